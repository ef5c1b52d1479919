use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::semigroup::{Element, HomCheck, Homomorphism, SemigroupHandle};

/// Presentation of a set as `h⁻¹(subset)` for a homomorphism onto a finite semigroup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientForm {
    pub hom: Arc<Homomorphism>,
    pub subset: BTreeSet<usize>,
}

impl QuotientForm {
    pub fn contains(&self, a: Element) -> Result<bool> {
        Ok(self.subset.contains(&self.hom.apply(a)?))
    }
}

type Evaluator = Arc<dyn Fn(Element) -> Result<bool> + Send + Sync>;

#[derive(Clone)]
enum Kind {
    All,
    Residue { d: u64, residues: BTreeSet<u64> },
    Finite(BTreeSet<Element>),
    Bitset { window: u64, bits: Arc<Vec<u8>> },
    Quotient,
    Custom(Evaluator),
    Difference(Box<SetPredicate>, Box<SetPredicate>),
}

/// A subset of a semigroup given by a membership test, optionally with a
/// quotient presentation that makes IP-ness decidable.
#[derive(Clone)]
pub struct SetPredicate {
    label: String,
    kind: Kind,
    quotient: Option<QuotientForm>,
}

impl fmt::Debug for SetPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SetPredicate")
            .field("label", &self.label)
            .field("quotient", &self.quotient.as_ref().map(|q| &q.subset))
            .finish()
    }
}

impl SetPredicate {
    pub fn all() -> Self {
        SetPredicate { label: "all".into(), kind: Kind::All, quotient: None }
    }

    /// `{n : n mod d ∈ residues}` over `(ℕ,+)` or `(ℕ,×)`, quotient-backed by
    /// the residue map onto `Z_d`.
    pub fn residue(semigroup: &SemigroupHandle, d: u64, residues: impl IntoIterator<Item = u64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidPredicate("modulus must be positive".into()));
        }
        let residues: BTreeSet<u64> = residues.into_iter().collect();
        if let Some(r) = residues.iter().find(|&&r| r >= d) {
            return Err(Error::InvalidPredicate(format!("residue {r} is not below {d}")));
        }
        let hom = Homomorphism::residue(semigroup, d)
            .map_err(|e| Error::InvalidPredicate(format!("mod predicate: {e}")))?;
        let subset = residues.iter().map(|&r| r as usize).collect();
        Ok(SetPredicate {
            label: format!("mod:{d}:{}", join(&residues)),
            kind: Kind::Residue { d, residues },
            quotient: Some(QuotientForm { hom: Arc::new(hom), subset }),
        })
    }

    /// `h⁻¹(subset)`. The homomorphism law is checked on a small window.
    pub fn quotient(hom: Arc<Homomorphism>, subset: impl IntoIterator<Item = usize>) -> Result<Self> {
        let subset: BTreeSet<usize> = subset.into_iter().collect();
        if let Some(c) = subset.iter().find(|&&c| c >= hom.target().order()) {
            return Err(Error::InvalidPredicate(format!("class {c} is outside the target")));
        }
        if let HomCheck::Violation(a, b) = hom.verify(24)? {
            return Err(Error::InvalidHomomorphism(format!("h({a}·{b}) ≠ h({a})·h({b})")));
        }
        Ok(SetPredicate {
            label: format!("quotient:{}", join(&subset)),
            kind: Kind::Quotient,
            quotient: Some(QuotientForm { hom, subset }),
        })
    }

    pub fn finite(elems: impl IntoIterator<Item = Element>) -> Self {
        let set: BTreeSet<Element> = elems.into_iter().collect();
        SetPredicate {
            label: format!("{{{}}}", join(&set.iter().map(|e| e.0).collect())),
            kind: Kind::Finite(set),
            quotient: None,
        }
    }

    /// Membership of element `i < window` is bit `i % 8` of byte `i / 8`;
    /// elements outside the window are excluded.
    pub fn bitset(window: u64, bits: Vec<u8>) -> Result<Self> {
        if (bits.len() as u64) * 8 < window {
            return Err(Error::InvalidPredicate(format!(
                "bitset of {} bytes cannot cover window {window}",
                bits.len()
            )));
        }
        Ok(SetPredicate {
            label: format!("bitset:{window}"),
            kind: Kind::Bitset { window, bits: Arc::new(bits) },
            quotient: None,
        })
    }

    pub fn from_fn(label: impl Into<String>, f: impl Fn(Element) -> Result<bool> + Send + Sync + 'static) -> Self {
        SetPredicate { label: label.into(), kind: Kind::Custom(Arc::new(f)), quotient: None }
    }

    /// Attach a quotient presentation to an arbitrary evaluator. Callers are
    /// responsible for the two agreeing; [`check_quotient`](Self::check_quotient) tests it.
    pub fn with_quotient(mut self, q: QuotientForm) -> Self {
        self.quotient = Some(q);
        self
    }

    /// `self ∖ other`, quotient-backed when both sides share a homomorphism.
    pub fn difference(&self, other: &SetPredicate) -> Self {
        let quotient = match (&self.quotient, &other.quotient) {
            (Some(a), Some(b)) if a.hom == b.hom => Some(QuotientForm {
                hom: a.hom.clone(),
                subset: a.subset.difference(&b.subset).copied().collect(),
            }),
            _ => None,
        };
        SetPredicate {
            label: format!("{}∖{}", self.label, other.label),
            kind: Kind::Difference(Box::new(self.clone()), Box::new(other.clone())),
            quotient,
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn quotient_form(&self) -> Option<&QuotientForm> {
        self.quotient.as_ref()
    }

    pub fn contains(&self, a: Element) -> Result<bool> {
        match &self.kind {
            Kind::All => Ok(true),
            Kind::Residue { d, residues } => Ok(residues.contains(&(a.0 % d))),
            Kind::Finite(set) => Ok(set.contains(&a)),
            Kind::Bitset { window, bits } => {
                Ok(a.0 < *window && bits[(a.0 / 8) as usize] & (1 << (a.0 % 8)) != 0)
            }
            Kind::Quotient => self.quotient.as_ref().expect("quotient kind carries a form").contains(a),
            Kind::Custom(f) => f(a),
            Kind::Difference(x, y) => Ok(x.contains(a)? && !y.contains(a)?),
        }
    }

    /// First element of the window where the evaluator and the quotient form disagree.
    pub fn check_quotient(&self, semigroup: &SemigroupHandle, window: u64) -> Result<Option<Element>> {
        let Some(q) = &self.quotient else { return Ok(None) };
        for a in semigroup.window(window) {
            if self.contains(a)? != q.contains(a)? {
                return Ok(Some(a));
            }
        }
        Ok(None)
    }
}

fn join<T: fmt::Display>(items: &BTreeSet<T>) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn residue_quotient_agrees() {
        for s in [SemigroupHandle::NatAdd, SemigroupHandle::NatMul] {
            let p = SetPredicate::residue(&s, 6, [1, 3]).unwrap();
            assert_eq!(p.check_quotient(&s, 200).unwrap(), None);
        }
    }

    #[test]
    fn residue_rejects_free_words() {
        let fw = SemigroupHandle::free_word("ab").unwrap();
        assert!(SetPredicate::residue(&fw, 2, [0]).is_err());
    }

    #[test]
    fn bitset_membership() {
        let p = SetPredicate::bitset(10, vec![0b0000_0101, 0b0000_0010]).unwrap();
        let members: Vec<u64> = (0..20).filter(|&i| p.contains(Element(i)).unwrap()).collect();
        assert_eq!(members, vec![0, 2, 9]);
        assert!(SetPredicate::bitset(17, vec![0, 0]).is_err());
    }

    #[test]
    fn difference_keeps_shared_quotient() {
        let s = SemigroupHandle::NatAdd;
        let x = SetPredicate::residue(&s, 6, [0, 2, 4]).unwrap();
        let y = SetPredicate::residue(&s, 6, [0]).unwrap();
        let rest = x.difference(&y);
        assert_eq!(rest.quotient_form().unwrap().subset, BTreeSet::from([2, 4]));
        assert_eq!(rest.check_quotient(&s, 100).unwrap(), None);
        let z = SetPredicate::residue(&s, 4, [0]).unwrap();
        assert!(x.difference(&z).quotient_form().is_none());
    }
}
