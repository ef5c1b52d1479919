//! Canonical enumeration of formulas.
//!
//! A formula's level is `max(size, 1 + largest constant index)`, so level `ℓ`
//! draws constants from the first `ℓ` carrier elements and contains finitely
//! many formulas. Formulas are listed by level, then encoded size, then the
//! lexicographic order of the canonical encoding.

use std::collections::BTreeSet;
use std::sync::Mutex;

use super::encode::{encode, varint_len};
use super::{Formula, Letter, Term, Var};
use crate::semigroup::Element;

pub fn level(f: &Formula) -> usize {
    let size = f.size();
    match f.constants().iter().next_back() {
        Some(c) => size.max(c.0 as usize + 1),
        None => size,
    }
}

struct Generator {
    num_preds: usize,
    num_consts: u64,
    by_size: Vec<Vec<Formula>>,
}

impl Generator {
    fn new(num_preds: usize, num_consts: u64) -> Self {
        Generator { num_preds, num_consts, by_size: vec![Vec::new()] }
    }

    fn letter_weight(l: &Letter) -> usize {
        match l {
            Letter::Var(_) => 1,
            Letter::Const(e) => 1 + varint_len(e.0),
        }
    }

    fn terms_of_weight(&self, w: usize) -> Vec<Vec<Letter>> {
        if w == 0 {
            return vec![Vec::new()];
        }
        let mut letters = vec![Letter::Var(Var::X), Letter::Var(Var::Y)];
        letters.extend((0..self.num_consts).map(|c| Letter::Const(Element(c))));
        let mut out = Vec::new();
        for l in letters {
            let lw = Self::letter_weight(&l);
            if lw > w {
                continue;
            }
            for mut rest in self.terms_of_weight(w - lw) {
                rest.insert(0, l);
                out.push(rest);
            }
        }
        out
    }

    fn atoms_of_size(&self, size: usize) -> Vec<Formula> {
        let mut out = Vec::new();
        for pred in 0..self.num_preds {
            let head = 1 + varint_len(pred as u64);
            for w in 1..size.saturating_sub(head) {
                for letters in self.terms_of_weight(w) {
                    if head + varint_len(letters.len() as u64) + w == size {
                        out.push(Formula::atom(pred, Term::new(letters)));
                    }
                }
            }
        }
        out
    }

    fn of_size(&mut self, size: usize) -> &[Formula] {
        while self.by_size.len() <= size {
            let s = self.by_size.len();
            let mut here = self.atoms_of_size(s);
            if s >= 1 {
                here.extend(self.by_size[s - 1].iter().cloned().map(Formula::not));
            }
            for left in 1..s.saturating_sub(1) {
                let right = s - 1 - left;
                for a in &self.by_size[left] {
                    for b in &self.by_size[right] {
                        here.push(a.clone().and(b.clone()));
                        here.push(a.clone().or(b.clone()));
                    }
                }
            }
            self.by_size.push(here);
        }
        &self.by_size[size]
    }
}

/// Every formula of encoded size ≤ `max_size` over the first `num_preds`
/// predicates and constants `0..num_consts`, sorted by (size, encoding).
pub fn formulas_up_to_size(num_preds: usize, num_consts: u64, max_size: usize) -> Vec<Formula> {
    let mut g = Generator::new(num_preds, num_consts);
    let mut out = Vec::new();
    for s in 1..=max_size {
        let mut here: Vec<(Vec<u8>, Formula)> = g.of_size(s).iter().map(|f| (encode(f), f.clone())).collect();
        here.sort();
        out.extend(here.into_iter().map(|(_, f)| f));
    }
    out
}

struct Cache {
    items: Vec<Formula>,
    next_level: usize,
}

/// Lazily materialised enumeration of the formulas whose free variables are
/// exactly `vars`, optionally with one formula pinned to index 0.
pub struct FormulaEnumeration {
    num_preds: usize,
    const_limit: Option<u64>,
    vars: BTreeSet<Var>,
    cache: Mutex<Cache>,
}

impl FormulaEnumeration {
    /// `const_limit` caps constants at the carrier size for finite semigroups.
    pub fn new(num_preds: usize, const_limit: Option<u64>, vars: BTreeSet<Var>) -> Self {
        assert!(num_preds >= 1, "enumeration needs at least one predicate");
        assert!(!vars.is_empty(), "enumerate formulas with at least one free variable");
        FormulaEnumeration {
            num_preds,
            const_limit,
            vars,
            cache: Mutex::new(Cache { items: Vec::new(), next_level: 1 }),
        }
    }

    /// One-variable formulas in `x`.
    pub fn unary(num_preds: usize, const_limit: Option<u64>) -> Self {
        Self::new(num_preds, const_limit, BTreeSet::from([Var::X]))
    }

    /// Two-variable formulas in `x, y`.
    pub fn binary(num_preds: usize, const_limit: Option<u64>) -> Self {
        Self::new(num_preds, const_limit, BTreeSet::from([Var::X, Var::Y]))
    }

    /// Swap `f` into index 0 with whatever formula naturally occupies it.
    pub fn pinned(self, f: &Formula) -> Option<Self> {
        let pos = self.index_of(f)?;
        self.cache.lock().unwrap().items.swap(0, pos);
        Some(self)
    }

    fn admissible(&self, f: &Formula) -> bool {
        f.free_vars() == self.vars
            && f.predicates().iter().all(|&p| p < self.num_preds)
            && self.const_limit.is_none_or(|n| f.constants().iter().all(|c| c.0 < n))
    }

    fn fill_level(&self, cache: &mut Cache) {
        let l = cache.next_level;
        let consts = self.const_limit.map_or(l as u64, |n| n.min(l as u64));
        let mut here: Vec<(usize, Vec<u8>, Formula)> = formulas_up_to_size(self.num_preds, consts, l)
            .into_iter()
            .filter(|f| level(f) == l && f.free_vars() == self.vars)
            .map(|f| (f.size(), encode(&f), f))
            .collect();
        here.sort();
        cache.items.extend(here.into_iter().map(|(_, _, f)| f));
        cache.next_level += 1;
    }

    pub fn get(&self, i: usize) -> Formula {
        let mut cache = self.cache.lock().unwrap();
        while cache.items.len() <= i {
            self.fill_level(&mut cache);
        }
        cache.items[i].clone()
    }

    pub fn index_of(&self, f: &Formula) -> Option<usize> {
        if !self.admissible(f) {
            return None;
        }
        let target = level(f);
        let mut cache = self.cache.lock().unwrap();
        while cache.next_level <= target {
            self.fill_level(&mut cache);
        }
        cache.items.iter().position(|g| g == f)
    }

    /// Number of formulas materialised so far.
    pub fn materialised(&self) -> usize {
        self.cache.lock().unwrap().items.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::decode;
    use std::collections::BTreeMap;

    fn p(i: usize, letters: &[Letter]) -> Formula {
        Formula::atom(i, Term::new(letters.to_vec()))
    }
    const X: Letter = Letter::Var(Var::X);
    const Y: Letter = Letter::Var(Var::Y);

    #[test]
    fn unary_prefix_golden() {
        let e = FormulaEnumeration::unary(2, None);
        let first: Vec<Formula> = (0..6).map(|i| e.get(i)).collect();
        assert_eq!(
            first,
            vec![
                p(0, &[X]),
                p(1, &[X]),
                p(0, &[X]).not(),
                p(1, &[X]).not(),
                p(0, &[X, X]),
                p(1, &[X, X]),
            ]
        );
    }

    #[test]
    fn pinning_swaps_with_index_zero() {
        let target = p(1, &[X]).not();
        let e = FormulaEnumeration::unary(2, None).pinned(&target).unwrap();
        assert_eq!(e.get(0), target);
        assert_eq!(e.get(3), p(0, &[X]));
        assert_eq!(e.index_of(&p(0, &[X])), Some(3));
        assert!(FormulaEnumeration::unary(2, None).pinned(&p(0, &[Y])).is_none());
    }

    #[test]
    fn binary_prefix_has_product_atoms() {
        let e = FormulaEnumeration::binary(3, None);
        let prefix: Vec<Formula> = (0..100).map(|i| e.get(i)).collect();
        for pred in 0..3 {
            assert!(prefix.contains(&p(pred, &[X, Y])));
        }
        assert_eq!(prefix[0], p(0, &[X, Y]));
        assert_eq!(prefix[1], p(0, &[Y, X]));
        let distinct: BTreeSet<&Formula> = prefix.iter().collect();
        assert_eq!(distinct.len(), 100);
    }

    #[test]
    fn finite_carrier_caps_constants() {
        let e = FormulaEnumeration::unary(1, Some(2));
        for i in 0..300 {
            assert!(e.get(i).constants().iter().all(|c| c.0 < 2));
        }
    }

    /// Decode every byte string over a small alphabet up to a length bound and
    /// check each admissible formula sits at the position its sort key predicts.
    #[test]
    fn complete_against_exhaustive_decoding() {
        let max_len = 7;
        let alphabet: Vec<u8> = (0..=4).collect();
        let mut found: BTreeMap<(usize, usize, Vec<u8>), Formula> = BTreeMap::new();
        let mut strings: Vec<Vec<u8>> = vec![Vec::new()];
        for _ in 0..max_len {
            let mut next = Vec::new();
            for s in &strings {
                for &b in &alphabet {
                    let mut t = s.clone();
                    t.push(b);
                    if let Ok(f) = decode(&t) {
                        let ok_preds = f.predicates().iter().all(|&q| q < 2);
                        if ok_preds && f.free_vars() == BTreeSet::from([Var::X]) {
                            found.insert((level(&f), t.len(), t.clone()), f);
                        }
                    }
                    next.push(t);
                }
            }
            strings = next;
        }
        // keep the full levels only: level ≤ 5 with constants < 5 and size ≤ 7
        let expected: Vec<Formula> = found
            .into_iter()
            .filter(|((l, _, _), _)| *l <= 5)
            .map(|(_, f)| f)
            .collect();
        let e = FormulaEnumeration::unary(2, None);
        let got: Vec<Formula> = (0..expected.len()).map(|i| e.get(i)).collect();
        assert_eq!(got, expected);
        assert_ne!(level(&e.get(expected.len())), 5);
    }

    #[test]
    fn size_generator_counts() {
        // size-4 atoms: P(x), P(y) per predicate
        let fs = formulas_up_to_size(2, 0, 4);
        assert_eq!(fs.len(), 4);
        let fs = formulas_up_to_size(1, 1, 6);
        for f in &fs {
            assert!(f.size() <= 6);
        }
        let sizes: Vec<usize> = fs.iter().map(|f| f.size()).collect();
        let mut sorted = sizes.clone();
        sorted.sort();
        assert_eq!(sizes, sorted);
    }
}
