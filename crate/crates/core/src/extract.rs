//! Basis extraction from an idempotent-type oracle.
//!
//! Starting from `ψ₁(x, y) = Y(x) ∧ Y(x·y)`, each round asks the oracle for a
//! witness `u_i` of `ψ_i` and sets `ψ_{i+1}(x, y) = ψ_i(x, y) ∧ ψ_i(u_i·x, y)`.
//! Every membership is a query against the two-variable type `q`; the one-variable
//! part `p` is never consulted separately.

use std::collections::BTreeSet;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::forge::{Forge, ForgeConfig, OracleMode, TypeOracle};
use crate::formula::{encode, Formula, StructureContext, Var};
use crate::ip::fp_set;
use crate::semigroup::Element;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractOptions {
    /// Require each witness to exceed the previous one.
    pub distinct: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractionResult {
    pub basis: Vec<Element>,
    pub psi_trace: Vec<Formula>,
    /// The formula the basis was extracted for: `Y`, or `X ∧ ¬Y` after renaming.
    pub side: Formula,
    pub fp: BTreeSet<Element>,
    pub verified: bool,
    pub renamed: bool,
    /// Number of witnesses obtained before the oracle reached its horizon.
    pub truncated_at: Option<usize>,
}

impl Serialize for ExtractionResult {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("ExtractionResult", 6)?;
        st.serialize_field("basis", &self.basis)?;
        let trace: Vec<String> = self.psi_trace.iter().map(|f| hex::encode(encode(f))).collect();
        st.serialize_field("psi_trace", &trace)?;
        st.serialize_field("fp", &self.fp)?;
        st.serialize_field("verified", &self.verified)?;
        st.serialize_field("renamed", &self.renamed)?;
        st.serialize_field("truncated_at", &self.truncated_at)?;
        st.end()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "result", rename_all = "kebab-case")]
pub enum BasisCheck {
    Ok,
    Failure { element: Element },
}

/// Evaluates `y` (a formula in `x`) on every finite product of the basis,
/// enumerating index subsets directly. Reports the least failing product.
pub fn verify_basis(ctx: &StructureContext, basis: &[Element], y: &Formula) -> Result<BasisCheck> {
    if basis.len() > 24 {
        return Err(Error::Contract(format!("basis of length {} is too long to enumerate", basis.len())));
    }
    let sem = ctx.semigroup();
    let mut failing: Option<Element> = None;
    for mask in 1u32..(1 << basis.len()) {
        let mut product: Option<Element> = None;
        for (i, &u) in basis.iter().enumerate() {
            if mask & (1 << i) != 0 {
                product = Some(match product {
                    None => u,
                    Some(p) => sem.product(p, u)?,
                });
            }
        }
        let e = product.expect("mask is nonzero");
        if !ctx.eval(y, Some(e), None)? && failing.is_none_or(|f| e < f) {
            failing = Some(e);
        }
    }
    Ok(match failing {
        None => BasisCheck::Ok,
        Some(element) => BasisCheck::Failure { element },
    })
}

fn in_x(f: &Formula) -> Result<Formula> {
    let fv = f.free_vars();
    if fv == BTreeSet::from([Var::X]) {
        Ok(f.clone())
    } else if fv == BTreeSet::from([Var::Y]) {
        Ok(f.rename(Var::Y, Var::X))
    } else {
        Err(Error::WrongArity { expected: "one free variable".into(), found: format!("{fv:?}") })
    }
}

pub fn extract_basis(
    ctx: &StructureContext,
    oracle: &dyn TypeOracle,
    y: &Formula,
    x: Option<&Formula>,
    k: usize,
    opts: ExtractOptions,
) -> Result<ExtractionResult> {
    let y = in_x(y)?;
    let x = x.map(in_x).transpose()?;
    let truncated = |side: Formula, renamed: bool| ExtractionResult {
        basis: Vec::new(),
        psi_trace: Vec::new(),
        side,
        fp: BTreeSet::new(),
        verified: false,
        renamed,
        truncated_at: Some(0),
    };
    let (side, renamed) = match oracle.query(&y) {
        Ok(true) => (y, false),
        Ok(false) => {
            let x = x.ok_or_else(|| Error::NotInType(format!("{} and no X to rename against", ctx.render(&y))))?;
            let rest = x.and(y.not());
            log::warn!("Y is not in the type; extracting a basis for X∖Y = {} instead", ctx.render(&rest));
            match oracle.query(&rest) {
                Ok(true) => (rest, true),
                Ok(false) => {
                    return Err(Error::Contract(format!("neither Y nor X∖Y is in the type ({})", ctx.render(&rest))))
                }
                Err(Error::Undecided { .. }) => return Ok(truncated(rest, true)),
                Err(e) => return Err(e),
            }
        }
        Err(Error::Undecided { .. }) => return Ok(truncated(y, false)),
        Err(e) => return Err(e),
    };

    let mut psi = side.clone().and(side.at_product());
    let mut basis = Vec::with_capacity(k);
    let mut trace = Vec::with_capacity(k);
    let mut truncated_at = None;
    for i in 0..k {
        let above = if opts.distinct { basis.last().copied() } else { None };
        let u = match oracle.witness(&psi, above) {
            Ok(u) => u,
            Err(Error::Undecided { .. }) => {
                truncated_at = Some(i);
                break;
            }
            Err(e) => return Err(e),
        };
        match oracle.query(&psi.substitute_x(u)) {
            Ok(true) => {}
            Ok(false) => {
                return Err(Error::Contract(format!(
                    "independence: witness {u} for ψ_{} does not keep ψ(u, y) in the type",
                    i + 1
                )))
            }
            Err(Error::Undecided { .. }) => {
                truncated_at = Some(i);
                break;
            }
            Err(e) => return Err(e),
        }
        basis.push(u);
        trace.push(psi.clone());
        if i + 1 < k {
            psi = psi.clone().and(psi.substitute_x_prefixed(u));
        }
    }

    let fp = fp_set(ctx.semigroup(), &basis)?;
    let verified = !basis.is_empty() && verify_basis(ctx, &basis, &side)? == BasisCheck::Ok;
    Ok(ExtractionResult { basis, psi_trace: trace, side, fp, verified, renamed, truncated_at })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    Y,
    XMinusY,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionOutcome {
    pub side: Side,
    /// The idempotent class completing the forged type.
    pub class: usize,
    pub stages: usize,
    pub result: ExtractionResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PartitionConfig {
    pub stages: usize,
    pub skip_identity: bool,
    pub distinct: bool,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig { stages: 8, skip_identity: false, distinct: false }
    }
}

/// Forges an idempotent type containing `X` over the structure, completes it
/// by its idempotent class, and extracts a basis for whichever of `Y`, `X∖Y`
/// the type contains.
pub fn partition_via_types(
    ctx: &StructureContext,
    x: &Formula,
    y: &Formula,
    k: usize,
    config: PartitionConfig,
) -> Result<PartitionOutcome> {
    let x = in_x(x)?;
    let y = in_x(y)?;
    let fc = ForgeConfig { mode: OracleMode::ExactQuotient, skip_identity: config.skip_identity, ..Default::default() };
    let forge = Forge::new(ctx.clone(), x.clone(), fc)?;
    let state = forge.run(config.stages)?;
    let oracle = forge.completion(&state)?;
    let result = extract_basis(ctx, &oracle, &y, Some(&x), k, ExtractOptions { distinct: config.distinct })?;
    let side = if result.renamed { Side::XMinusY } else { Side::Y };
    Ok(PartitionOutcome { side, class: oracle.class(), stages: config.stages, result })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forge::quotient_idempotent_type;
    use crate::formula::{Letter, NamedPredicate, Term};
    use crate::ip::SetPredicate;
    use crate::semigroup::{FiniteSemigroup, SemigroupHandle};
    use proptest::prelude::*;

    const X: Letter = Letter::Var(Var::X);
    const Y: Letter = Letter::Var(Var::Y);

    fn p(i: usize, letters: &[Letter]) -> Formula {
        Formula::atom(i, Term::new(letters.to_vec()))
    }

    fn residues(d: u64, sets: &[&[u64]]) -> StructureContext {
        let s = SemigroupHandle::NatAdd;
        let preds = sets
            .iter()
            .enumerate()
            .map(|(i, r)| NamedPredicate::new(format!("P{i}"), SetPredicate::residue(&s, d, r.iter().copied()).unwrap()))
            .collect();
        StructureContext::new(s, preds).unwrap()
    }

    #[test]
    fn multiples_of_six() {
        let ctx = residues(6, &[&[0]]);
        let o = quotient_idempotent_type(&ctx, 0, true).unwrap();
        let r = extract_basis(&ctx, &o, &p(0, &[X]), None, 4, ExtractOptions::default()).unwrap();
        assert_eq!(r.basis, vec![Element(6); 4]);
        assert!(r.verified && !r.renamed && r.truncated_at.is_none());
        assert!(r.fp.iter().all(|e| e.0 % 6 == 0));
        let r = extract_basis(&ctx, &o, &p(0, &[X]), None, 4, ExtractOptions { distinct: true }).unwrap();
        assert_eq!(r.basis, vec![Element(6), Element(12), Element(18), Element(24)]);
        let r = extract_basis(&ctx, &o, &p(0, &[X]), None, 1, ExtractOptions::default()).unwrap();
        assert_eq!(r.basis.len(), 1);
    }

    #[test]
    fn trace_follows_the_recursion() {
        let ctx = residues(6, &[&[0]]);
        let o = quotient_idempotent_type(&ctx, 0, true).unwrap();
        let r = extract_basis(&ctx, &o, &p(0, &[Y]), None, 3, ExtractOptions { distinct: true }).unwrap();
        let y = p(0, &[X]);
        let psi1 = y.clone().and(y.at_product());
        assert_eq!(r.psi_trace[0], psi1);
        // ψ₂ carries ψ₁(u₁·x, y) as its second conjunct
        assert_eq!(r.psi_trace[1], psi1.clone().and(psi1.substitute_x_prefixed(r.basis[0])));
        for (psi, &u) in r.psi_trace.iter().zip(&r.basis) {
            assert!(o.query(&psi.substitute_x(u)).unwrap());
        }
    }

    #[test]
    fn left_zero_singleton() {
        let lz = SemigroupHandle::FiniteTable(FiniteSemigroup::left_zero(3));
        let h = std::sync::Arc::new(
            crate::semigroup::Homomorphism::new(
                lz.clone(),
                FiniteSemigroup::left_zero(3),
                crate::semigroup::HomRule::Table { map: vec![0, 1, 2] },
            )
            .unwrap(),
        );
        let a = SetPredicate::quotient(h, [0]).unwrap();
        let ctx = StructureContext::new(lz, vec![NamedPredicate::new("A", a)]).unwrap();
        let o = quotient_idempotent_type(&ctx, 0, false).unwrap();
        let r = extract_basis(&ctx, &o, &p(0, &[X]), None, 3, ExtractOptions::default()).unwrap();
        assert_eq!(r.basis, vec![Element(0); 3]);
        assert_eq!(r.fp, BTreeSet::from([Element(0)]));
    }

    #[test]
    fn verify_basis_examples() {
        let ctx = residues(6, &[&[0], &[0, 2, 4]]);
        let b = [6, 12, 24].map(Element);
        assert_eq!(verify_basis(&ctx, &b, &p(0, &[X])).unwrap(), BasisCheck::Ok);
        let b = [2, 3].map(Element);
        assert_eq!(verify_basis(&ctx, &b, &p(1, &[X])).unwrap(), BasisCheck::Failure { element: Element(3) });
    }

    #[test]
    fn renames_when_y_is_outside() {
        let ctx = residues(4, &[&[0, 2], &[2]]);
        let o = quotient_idempotent_type(&ctx, 0, true).unwrap();
        let r = extract_basis(&ctx, &o, &p(1, &[X]), Some(&p(0, &[X])), 3, ExtractOptions::default()).unwrap();
        assert!(r.renamed && r.verified);
        assert_eq!(r.side, p(0, &[X]).and(p(1, &[X]).not()));
        assert!(matches!(
            extract_basis(&ctx, &o, &p(1, &[X]), None, 3, ExtractOptions::default()),
            Err(Error::NotInType(_))
        ));
    }

    #[test]
    fn forge_oracle_truncates_at_horizon() {
        let ctx = residues(4, &[&[0], &[1]]);
        let forge = Forge::new(ctx.clone(), p(0, &[X]), ForgeConfig::default()).unwrap();
        let st = forge.run(3).unwrap();
        let o = forge.oracle(&st);
        let r = extract_basis(&ctx, &o, &p(0, &[X]), None, 4, ExtractOptions::default()).unwrap();
        assert!(r.truncated_at.is_some());
        assert!(r.basis.len() < 4);
    }

    #[test]
    fn partition_examples() {
        let ctx = residues(6, &[&[0, 2, 4], &[0]]);
        let cfg = PartitionConfig { skip_identity: true, ..Default::default() };
        let out = partition_via_types(&ctx, &p(0, &[X]), &p(1, &[X]), 5, cfg).unwrap();
        assert_eq!(out.result.basis.len(), 5);
        assert!(out.result.verified);
        assert_eq!(verify_basis(&ctx, &out.result.basis, &out.result.side).unwrap(), BasisCheck::Ok);

        // Y = X ∩ {2 mod 4} misses the idempotent class
        let ctx = residues(4, &[&[0], &[]]);
        let out = partition_via_types(&ctx, &p(0, &[X]), &p(1, &[X]), 3, cfg).unwrap();
        assert_eq!(out.side, Side::XMinusY);
        assert!(out.result.verified);

        let out = partition_via_types(&ctx, &p(0, &[X]), &p(0, &[X]), 3, cfg).unwrap();
        assert_eq!(out.side, Side::Y);
    }

    proptest! {
        #[test]
        fn prefixes_are_extractions(d in 2u64..9, k in 1usize..6, distinct in any::<bool>()) {
            let ctx = residues(d, &[&[0]]);
            let o = quotient_idempotent_type(&ctx, 0, true).unwrap();
            let r = extract_basis(&ctx, &o, &p(0, &[X]), None, k, ExtractOptions { distinct }).unwrap();
            prop_assert_eq!(r.basis.len(), k);
            for i in 1..=k {
                prop_assert_eq!(verify_basis(&ctx, &r.basis[..i], &r.side).unwrap(), BasisCheck::Ok);
            }
        }
    }
}
