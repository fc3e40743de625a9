//! Longest common subsequence via Myers' O(ND) difference algorithm, using
//! the linear-space middle-snake bisection.

/// Returns index pairs `(i, j)` with `a[i] == b[j]`, strictly increasing in
/// both coordinates, forming a longest common subsequence of `a` and `b`.
pub fn lcs_pairs<T: Eq>(a: &[T], b: &[T]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let max = a.len() + b.len() + 1;
    let mut vf = vec![0usize; 2 * max + 2];
    let mut vb = vec![0usize; 2 * max + 2];
    recurse(a, 0, b, 0, &mut vf, &mut vb, &mut out);
    out
}

fn recurse<T: Eq>(
    mut a: &[T],
    mut a_off: usize,
    mut b: &[T],
    mut b_off: usize,
    vf: &mut [usize],
    vb: &mut [usize],
    out: &mut Vec<(usize, usize)>,
) {
    let prefix = a.iter().zip(b).take_while(|(x, y)| x == y).count();
    out.extend((0..prefix).map(|i| (a_off + i, b_off + i)));
    a = &a[prefix..];
    b = &b[prefix..];
    a_off += prefix;
    b_off += prefix;

    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count();
    let (core_a, core_b) = (&a[..a.len() - suffix], &b[..b.len() - suffix]);

    if !core_a.is_empty() && !core_b.is_empty() {
        let (x0, y0, x1, y1) = middle_snake(core_a, core_b, vf, vb);
        recurse(&core_a[..x0], a_off, &core_b[..y0], b_off, vf, vb, out);
        out.extend((0..x1 - x0).map(|i| (a_off + x0 + i, b_off + y0 + i)));
        recurse(
            &core_a[x1..],
            a_off + x1,
            &core_b[y1..],
            b_off + y1,
            vf,
            vb,
            out,
        );
    }

    let (sa, sb) = (a_off + core_a.len(), b_off + core_b.len());
    out.extend((0..suffix).map(|i| (sa + i, sb + i)));
}

/// Finds the middle snake of an optimal edit path. Returns the snake as
/// `(x_start, y_start, x_end, y_end)` in forward coordinates.
fn middle_snake<T: Eq>(
    a: &[T],
    b: &[T],
    vf: &mut [usize],
    vb: &mut [usize],
) -> (usize, usize, usize, usize) {
    let n = a.len() as isize;
    let m = b.len() as isize;
    let delta = n - m;
    let odd = delta & 1 == 1;
    let max_d = (n + m + 1) / 2;
    let off = max_d + 1;
    let idx = |k: isize| (k + off) as usize;

    vf[idx(1)] = 0;
    vb[idx(1)] = 0;
    for d in 0..=max_d {
        let mut k = -d;
        while k <= d {
            let mut x = if k == -d || (k != d && vf[idx(k - 1)] < vf[idx(k + 1)]) {
                vf[idx(k + 1)] as isize
            } else {
                vf[idx(k - 1)] as isize + 1
            };
            let mut y = x - k;
            let (x0, y0) = (x, y);
            while x < n && y < m && a[x as usize] == b[y as usize] {
                x += 1;
                y += 1;
            }
            vf[idx(k)] = x as usize;
            let kr = delta - k;
            if odd && kr >= -(d - 1) && kr <= d - 1 && x + vb[idx(kr)] as isize >= n {
                return (x0 as usize, y0 as usize, x as usize, y as usize);
            }
            k += 2;
        }

        let mut k = -d;
        while k <= d {
            let mut x = if k == -d || (k != d && vb[idx(k - 1)] < vb[idx(k + 1)]) {
                vb[idx(k + 1)] as isize
            } else {
                vb[idx(k - 1)] as isize + 1
            };
            let mut y = x - k;
            let (x0, y0) = (x, y);
            while x < n && y < m && a[(n - x - 1) as usize] == b[(m - y - 1) as usize] {
                x += 1;
                y += 1;
            }
            vb[idx(k)] = x as usize;
            let kf = delta - k;
            if !odd && kf >= -d && kf <= d && x + vf[idx(kf)] as isize >= n {
                return (
                    (n - x) as usize,
                    (m - y) as usize,
                    (n - x0) as usize,
                    (m - y0) as usize,
                );
            }
            k += 2;
        }
    }
    unreachable!("an optimal path always has a middle snake")
}
