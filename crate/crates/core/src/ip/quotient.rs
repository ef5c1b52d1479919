//! Exact IP decisions for quotient-backed sets.
//!
//! `h⁻¹(S)` is IP iff some idempotent of the image subsemigroup `h(M)` lies in
//! `S`. Sufficiency: the constant basis `(v, v, …)` with `h(v) = c`. Necessity:
//! colour an FP set by `h`-values; a monochromatic sub-IP-set has value `c`
//! with `c·c = c`.

use super::predicate::{QuotientForm, SetPredicate};
use super::search::{IpWitness, OracleVerdict};
use crate::error::{Error, Result};
use crate::semigroup::{Element, HomCheck};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuotientOptions {
    /// Length of the constant witness basis.
    pub depth: usize,
    pub skip_identity: bool,
}

impl Default for QuotientOptions {
    fn default() -> Self {
        QuotientOptions { depth: 4, skip_identity: false }
    }
}

/// The idempotent class in `h(M) ∩ S` with the least representative, and that representative.
pub fn quotient_ip_class(form: &QuotientForm, skip_identity: bool) -> Result<Option<(usize, Element)>> {
    let target = form.hom.target();
    let mut best: Option<(usize, Element)> = None;
    for c in form.hom.image() {
        if target.mul(c, c) != c || !form.subset.contains(&c) {
            continue;
        }
        let rep = form
            .hom
            .least_in_class(c, 0, skip_identity, 1 << 22)
            .ok_or(Error::EmptyFiber(c))?;
        if best.is_none_or(|(_, r)| rep < r) {
            best = Some((c, rep));
        }
    }
    Ok(best)
}

pub fn is_ip_quotient(x: &SetPredicate, opts: QuotientOptions) -> Result<OracleVerdict> {
    let form = x
        .quotient_form()
        .ok_or_else(|| Error::NotQuotientBacked(format!("{} has no quotient form", x.label())))?;
    if let HomCheck::Violation(a, b) = form.hom.verify(32)? {
        return Err(Error::InvalidHomomorphism(format!("h({a}·{b}) ≠ h({a})·h({b})")));
    }
    match quotient_ip_class(form, opts.skip_identity)? {
        Some((_, v)) => {
            let basis = vec![v; opts.depth.max(1)];
            Ok(OracleVerdict::Ip(IpWitness::new(form.hom.source(), basis)?))
        }
        None => Ok(OracleVerdict::NotIpExact),
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::ip::{ip_witness_bounded, SearchOptions};
    use crate::semigroup::{FiniteSemigroup, HomRule, Homomorphism, SemigroupHandle};

    #[test]
    fn multiples_of_four() {
        let s = SemigroupHandle::NatAdd;
        let x = SetPredicate::residue(&s, 4, [0]).unwrap();
        let v = is_ip_quotient(&x, QuotientOptions { depth: 3, skip_identity: true }).unwrap();
        assert_eq!(v.witness().unwrap().basis, vec![Element(4); 3]);
        assert!(v.witness().unwrap().recheck(&s, &x).unwrap());
    }

    #[test]
    fn odd_numbers_mod_four() {
        let s = SemigroupHandle::NatAdd;
        let x = SetPredicate::residue(&s, 4, [1, 3]).unwrap();
        // (Z_4,+) has the single idempotent 0
        assert_eq!(FiniteSemigroup::cyclic_add(4).idempotents(), vec![0]);
        assert_eq!(is_ip_quotient(&x, QuotientOptions::default()).unwrap(), OracleVerdict::NotIpExact);
        assert!(!ip_witness_bounded(&s, &x, 3, 200, SearchOptions::default()).unwrap().is_ip());
    }

    #[test]
    fn threes_under_multiplication() {
        let s = SemigroupHandle::NatMul;
        let x = SetPredicate::residue(&s, 6, [3]).unwrap();
        let v = is_ip_quotient(&x, QuotientOptions::default()).unwrap();
        assert_eq!(v.witness().unwrap().basis, vec![Element(3); 4]);
        assert!(v.witness().unwrap().recheck(&s, &x).unwrap());
    }

    #[test]
    fn free_word_automaton() {
        // words ending in the reset letter 'a' land in the constant-0 map
        let (t, gens) = FiniteSemigroup::transformation(2, &[vec![0, 0], vec![1, 0]]).unwrap();
        let fw = SemigroupHandle::free_word("ab").unwrap();
        let h = Arc::new(Homomorphism::new(fw.clone(), t, HomRule::LetterImage { images: gens.clone() }).unwrap());
        let x = SetPredicate::quotient(h.clone(), [gens[0]]).unwrap();
        let v = is_ip_quotient(&x, QuotientOptions::default()).unwrap();
        assert_eq!(fw.display(v.witness().unwrap().basis[0]), "a");
        let y = SetPredicate::quotient(h, [gens[1]]).unwrap();
        // the swap is not idempotent
        assert_eq!(is_ip_quotient(&y, QuotientOptions::default()).unwrap(), OracleVerdict::NotIpExact);
    }

    #[test]
    fn requires_quotient_form() {
        let x = SetPredicate::finite([Element(0)]);
        assert!(matches!(is_ip_quotient(&x, QuotientOptions::default()), Err(Error::NotQuotientBacked(_))));
    }

    #[test]
    fn invalid_homomorphism_is_rejected() {
        let h = Arc::new(
            Homomorphism::new(SemigroupHandle::NatAdd, FiniteSemigroup::cyclic_add(4), HomRule::Mod { d: 3 }).unwrap(),
        );
        let form = QuotientForm { hom: h, subset: [0].into() };
        let x = SetPredicate::from_fn("bad", |e| Ok(e.0 % 3 == 0)).with_quotient(form);
        assert!(matches!(is_ip_quotient(&x, QuotientOptions::default()), Err(Error::InvalidHomomorphism(_))));
    }
}
