//! Finite Hindman windows over `(ℕ,+)`: the least `N` such that every
//! `r`-colouring of `[1, N]` has a monochromatic FS set of `k` distinct
//! generators. For `k = 2` this is one more than the weak Schur number.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum WindowOutcome {
    /// `certificate[i]` is the colour of `i + 1` in an avoiding colouring of `[1, n − 1]`.
    Found { n: u64, certificate: Vec<u8> },
    Exhausted { n_max: u64 },
}

struct ColoringSearch {
    r: usize,
    k: usize,
    n: usize,
    // colours[i] is the colour of i; index 0 unused
    colours: Vec<u8>,
}

impl ColoringSearch {
    /// Does colouring `m` with `c` complete a monochromatic FS set whose total is `m`?
    fn completes(&self, m: usize, c: u8) -> bool {
        let mut sums = vec![0usize];
        self.pick(m, c, 1, 0, &mut sums)
    }

    fn pick(&self, m: usize, c: u8, start: usize, chosen: usize, sums: &mut Vec<usize>) -> bool {
        let total = *sums.iter().max().unwrap();
        let left = self.k - chosen;
        if left == 1 {
            let last = m - total;
            if last < start || self.colours[last] != c {
                return false;
            }
            return sums.iter().all(|&s| s == total || s == 0 || self.colours[s + last] == c);
        }
        // the remaining `left` generators are distinct and ≥ x
        let mut x = start;
        while total + left * x + left * (left - 1) / 2 <= m {
            if self.colours[x] == c && sums.iter().all(|&s| s == 0 || self.colours[s + x] == c) {
                let before = sums.len();
                for i in 0..before {
                    sums.push(sums[i] + x);
                }
                let found = self.pick(m, c, x + 1, chosen + 1, sums);
                sums.truncate(before);
                if found {
                    return true;
                }
            }
            x += 1;
        }
        false
    }

    fn extend(&mut self, m: usize, max_used: usize) -> bool {
        if m > self.n {
            return true;
        }
        // colours appear in first-use order
        let limit = (max_used + 1).min(self.r - 1);
        for c in 0..=limit {
            if self.completes(m, c as u8) {
                continue;
            }
            self.colours[m] = c as u8;
            if self.extend(m + 1, max_used.max(c)) {
                return true;
            }
        }
        self.colours[m] = u8::MAX;
        false
    }
}

/// An `r`-colouring of `[1, n]` with no monochromatic FS set of `k` distinct generators.
pub fn avoiding_coloring(r: usize, k: usize, n: u64) -> Option<Vec<u8>> {
    assert!(r >= 1 && r <= u8::MAX as usize && k >= 2);
    let n = n as usize;
    let mut search = ColoringSearch { r, k, n, colours: vec![u8::MAX; n + 1] };
    if n == 0 {
        return Some(Vec::new());
    }
    // colour of 1 fixed to 0 by symmetry
    search.colours[1] = 0;
    if search.extend(2, 0) {
        Some(search.colours[1..].to_vec())
    } else {
        None
    }
}

pub fn hindman_window(r: usize, k: usize, n_max: u64) -> WindowOutcome {
    let mut previous = Vec::new();
    for n in 1..=n_max {
        match avoiding_coloring(r, k, n) {
            Some(c) => previous = c,
            None => return WindowOutcome::Found { n, certificate: previous },
        }
    }
    WindowOutcome::Exhausted { n_max }
}

/// Checks a certificate by enumerating every `k`-subset of `[1, N]` and all of
/// its subset sums. Independent of the search above.
pub fn verify_window_certificate(colouring: &[u8], r: usize, k: usize) -> bool {
    if colouring.iter().any(|&c| c as usize >= r) {
        return false;
    }
    let n = colouring.len();
    let colour = |v: usize| colouring[v - 1];
    let mut combo: Vec<usize> = (1..=k).collect();
    if k > n {
        return true;
    }
    loop {
        let mut sums = Vec::with_capacity(1 << k);
        for mask in 1u32..(1 << k) {
            sums.push((0..k).filter(|i| mask & (1 << i) != 0).map(|i| combo[i]).sum::<usize>());
        }
        if sums.iter().all(|&s| s <= n) {
            let c = colour(sums[0]);
            if sums.iter().all(|&s| colour(s) == c) {
                return false;
            }
        }
        // next combination in lexicographic order
        let mut i = k;
        while i > 0 && combo[i - 1] == n - k + i {
            i -= 1;
        }
        if i == 0 {
            return true;
        }
        combo[i - 1] += 1;
        for j in i..k {
            combo[j] = combo[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Least N by trying every 2-colouring of [1, N] for monochromatic {a, b, a+b}, a ≠ b.
    fn brute_weak_schur_window(limit: usize) -> Option<usize> {
        (1..=limit).find(|&n| {
            (0u32..(1 << n)).all(|m| {
                let col = |v: usize| (m >> (v - 1)) & 1;
                (1..=n).any(|a| ((a + 1)..=n).any(|b| a + b <= n && col(a) == col(b) && col(b) == col(a + b)))
            })
        })
    }

    #[test]
    fn single_colour() {
        assert_eq!(hindman_window(1, 2, 10), WindowOutcome::Found { n: 3, certificate: vec![0, 0] });
        // one colour: the least N is 1 + 2 + … + k
        for k in 2..=4 {
            let n = (k * (k + 1) / 2) as u64;
            assert!(matches!(hindman_window(1, k, 12), WindowOutcome::Found { n: m, .. } if m == n));
        }
    }

    #[test]
    fn two_colours_pairs() {
        let expected = brute_weak_schur_window(12).unwrap();
        assert_eq!(expected, 9);
        match hindman_window(2, 2, 20) {
            WindowOutcome::Found { n, certificate } => {
                assert_eq!(n as usize, expected);
                assert_eq!(certificate.len(), 8);
                assert!(verify_window_certificate(&certificate, 2, 2));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(hindman_window(2, 2, 5), WindowOutcome::Exhausted { n_max: 5 });
    }

    #[test]
    fn verifier_rejects_bad_colourings() {
        assert!(!verify_window_certificate(&[0, 0, 0], 1, 2));
        assert!(!verify_window_certificate(&[0, 2], 2, 2));
        assert!(verify_window_certificate(&[0, 0], 1, 2));
    }
}
