use sha1::{Digest, Sha1};

/// Lowercase hex SHA-1 of the UTF-8 bytes of `text`.
pub fn content_hash(text: &str) -> String {
    let digest = Sha1::digest(text.as_bytes());
    let mut out = String::with_capacity(40);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

const BASE36: &[u8; 36] = b"0123456789abcdefghijklmnopqrstuvwxyz";

/// Converts a 40-char hex SHA-1 into the dump's `<sha1>` encoding: base 36,
/// zero-padded to 31 characters.
pub fn hex_to_base36_sha1(hex: &str) -> Option<String> {
    if hex.len() != 40 {
        return None;
    }
    let mut num: Vec<u8> = (0..20)
        .map(|i| u8::from_str_radix(&hex[2 * i..2 * i + 2], 16))
        .collect::<Result<_, _>>()
        .ok()?;
    let mut digits = Vec::with_capacity(31);
    while num.iter().any(|&b| b != 0) {
        let mut rem = 0u32;
        for b in num.iter_mut() {
            let cur = (rem << 8) | *b as u32;
            *b = (cur / 36) as u8;
            rem = cur % 36;
        }
        digits.push(BASE36[rem as usize]);
    }
    while digits.len() < 31 {
        digits.push(b'0');
    }
    digits.reverse();
    String::from_utf8(digits).ok()
}

/// Inverse of [`hex_to_base36_sha1`]. Returns `None` for malformed input or
/// values that do not fit in 160 bits.
pub fn base36_sha1_to_hex(b36: &str) -> Option<String> {
    if b36.is_empty() || b36.len() > 31 {
        return None;
    }
    let mut num = [0u8; 20];
    for c in b36.bytes() {
        let d = match c {
            b'0'..=b'9' => c - b'0',
            b'a'..=b'z' => c - b'a' + 10,
            b'A'..=b'Z' => c - b'A' + 10,
            _ => return None,
        } as u32;
        let mut carry = d;
        for b in num.iter_mut().rev() {
            let cur = *b as u32 * 36 + carry;
            *b = (cur & 0xff) as u8;
            carry = cur >> 8;
        }
        if carry != 0 {
            return None;
        }
    }
    Some(num.iter().map(|b| format!("{b:02x}")).collect())
}
