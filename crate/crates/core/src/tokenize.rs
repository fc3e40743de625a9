//! Wikitext tokenization.
//!
//! Whitespace separates tokens and is dropped. Runs of letters, digits and
//! underscores form a single token. Every other character (markup, punctuation,
//! symbols) is a delimiter *and* a token of its own. All output is lowercased.

/// Lowercases a single character using a simple one-to-one mapping.
///
/// Full lowercasing can expand a character (`İ` becomes `i` + combining dot),
/// which would change how the result tokenizes. Only the first mapped
/// character is kept so tokenization is stable under lowercasing.
#[inline]
pub fn lower_char(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    c.to_lowercase().next().unwrap_or(c)
}

/// Lowercases `s` character by character with [`lower_char`].
pub fn lowercase(s: &str) -> String {
    s.chars().map(lower_char).collect()
}

#[inline]
fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Splits `text` into lowercase tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    tokenize_into(text, &mut out);
    out
}

/// Like [`tokenize`], appending to an existing buffer.
pub fn tokenize_into(text: &str, out: &mut Vec<String>) {
    let mut word = String::new();
    for c in text.chars() {
        if is_word_char(c) {
            word.push(lower_char(c));
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(lower_char(c).to_string());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize(s)
    }

    #[test]
    fn link_markup_is_tokenized() {
        assert_eq!(
            toks("The [[Sun]] rises."),
            ["the", "[", "[", "sun", "]", "]", "rises", "."]
        );
    }

    #[test]
    fn empty_and_blank() {
        assert!(toks("").is_empty());
        assert!(toks(" \n\t  \r\n").is_empty());
    }

    #[test]
    fn special_char_is_delimiter_and_token() {
        assert_eq!(toks("a,b"), ["a", ",", "b"]);
        assert_eq!(toks("50%"), ["50", "%"]);
        assert_eq!(toks("{{cite|url=x}}"), ["{", "{", "cite", "|", "url", "=", "x", "}", "}"]);
    }

    #[test]
    fn numbers_and_underscores_stay_whole() {
        assert_eq!(toks("foo_bar 2016 abc123"), ["foo_bar", "2016", "abc123"]);
    }

    #[test]
    fn unicode_letters() {
        assert_eq!(toks("Ärger über Straße"), ["ärger", "über", "straße"]);
        // dotted capital I lowercases to a single char
        assert_eq!(toks("İstanbul"), ["istanbul"]);
    }

    /// Character-class oracle: classify each char independently and build
    /// tokens from the classes.
    fn oracle(text: &str) -> Vec<String> {
        #[derive(PartialEq)]
        enum Class {
            Space,
            Word,
            Special,
        }
        let class = |c: char| {
            if c.is_whitespace() {
                Class::Space
            } else if c.is_alphabetic() || c.is_numeric() || c == '_' {
                Class::Word
            } else {
                Class::Special
            }
        };
        let mut out: Vec<String> = Vec::new();
        let mut prev_word = false;
        for c in text.chars() {
            match class(c) {
                Class::Space => prev_word = false,
                Class::Special => {
                    out.push(lower_char(c).to_string());
                    prev_word = false;
                }
                Class::Word => {
                    if prev_word {
                        out.last_mut().unwrap().push(lower_char(c));
                    } else {
                        out.push(lower_char(c).to_string());
                    }
                    prev_word = true;
                }
            }
        }
        out
    }

    proptest! {
        #[test]
        fn matches_class_oracle(s in "[a-zA-Z0-9_ .,\\[\\]{}|\n\tÄöİß%=-]{0,60}") {
            prop_assert_eq!(tokenize(&s), oracle(&s));
        }

        #[test]
        fn rejoin_equals_text_without_whitespace(s in any::<String>()) {
            let joined: String = tokenize(&s).concat();
            let stripped: String = s.chars().filter(|c| !c.is_whitespace()).map(lower_char).collect();
            prop_assert_eq!(joined, stripped);
        }

        #[test]
        fn tokens_nonempty_without_whitespace(s in any::<String>()) {
            for t in tokenize(&s) {
                prop_assert!(!t.is_empty());
                prop_assert!(!t.chars().any(char::is_whitespace));
                prop_assert_eq!(lowercase(&t), t.clone());
            }
        }

        #[test]
        fn lowercasing_input_is_a_noop(s in any::<String>()) {
            prop_assert_eq!(tokenize(&lowercase(&s)), tokenize(&s));
        }
    }
}
