//! Witnesses for the consistency of `A(x) ∪ A(y) ∪ A(x·y) ∪ B(x, y)`.
//!
//! `u` is the least element with `A(u)` such that `Z = A(y) ∧ A(u·y)` is IP;
//! `v` is the least element of `Z` outside every rejected `ψ_j(u, ·)`.

use serde::{Serialize, Serializer};

use super::{Forge, ForgeState};
use crate::error::{Error, Result};
use crate::formula::{Formula, StructureContext};
use crate::ip::{ip_witness_bounded, SearchOptions, SetPredicate};
use crate::semigroup::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimOutcome {
    Pair { u: Element, v: Element },
    /// Bounded mode only: no pair within the window.
    Exhausted,
}

impl Serialize for ClaimOutcome {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ClaimOutcome::Pair { u, v } => [u, v].serialize(s),
            ClaimOutcome::Exhausted => s.serialize_str("exhausted"),
        }
    }
}

/// Direct evaluation of all four formula groups at `x := u, y := v`.
pub fn verify_claim_pair(ctx: &StructureContext, a: &[Formula], b: &[Formula], u: Element, v: Element) -> Result<bool> {
    let uv = ctx.semigroup().product(u, v)?;
    for f in a {
        for point in [u, v, uv] {
            if !ctx.eval(f, Some(point), None)? {
                return Ok(false);
            }
        }
    }
    for f in b {
        if !ctx.eval(f, Some(u), Some(v))? {
            return Ok(false);
        }
    }
    Ok(true)
}

impl Forge {
    pub fn consistency_witness(&self, state: &ForgeState) -> Result<ClaimOutcome> {
        let a: Vec<Formula> = state.a_formulas().cloned().collect();
        let psis: Vec<Formula> = state.j.iter().map(|&j| self.psi(j)).collect();
        let outcome = match self.quotient() {
            Some(q) => {
                let ctx = self.context();
                let t = self.classes_of(q, &a)?;
                let rs = psis.iter().map(|p| ctx.reduce_pair(p)).collect::<Result<Vec<_>>>()?;
                let target = q.hom.target();
                let mut found = None;
                for &(c, u) in &q.reps {
                    if !t[c] {
                        continue;
                    }
                    let z: Vec<bool> = (0..q.order()).map(|f| t[f] && t[target.mul(c, f)]).collect();
                    if !q.is_ip(&z) {
                        continue;
                    }
                    let rest: Vec<bool> = (0..q.order()).map(|f| z[f] && rs.iter().all(|r| !r[c][f])).collect();
                    if !q.is_ip(&rest) {
                        return Err(Error::Contract(format!(
                            "claim fails at stage {}: Z minus the rejected ψ_j({u}, ·) is not IP",
                            state.stage
                        )));
                    }
                    let v = q.reps.iter().find(|&&(f, _)| rest[f]).map(|&(_, v)| v).expect("IP sets are nonempty");
                    found = Some(ClaimOutcome::Pair { u, v });
                    break;
                }
                found.ok_or_else(|| Error::Contract(format!("claim fails at stage {}: no u", state.stage)))?
            }
            None => self.bounded_claim(state, &a, &psis)?,
        };
        if let ClaimOutcome::Pair { u, v } = outcome {
            if !verify_claim_pair(self.context(), &a, &state.b, u, v)? {
                return Err(Error::Contract(format!("claim pair ({u}, {v}) fails direct evaluation")));
            }
        }
        Ok(outcome)
    }

    fn bounded_claim(&self, state: &ForgeState, a: &[Formula], psis: &[Formula]) -> Result<ClaimOutcome> {
        let ctx = self.context().clone();
        let sem = ctx.semigroup().clone();
        let window = self.scan_window();
        let skip = self.config().skip_identity;
        let super::OracleMode::Bounded { k, n } = state.mode else { unreachable!() };
        let opts = SearchOptions { skip_identity: skip, parallel: true };
        let in_a = |e: Element| -> Result<bool> {
            for f in a {
                if !ctx.eval(f, Some(e), None)? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        for u in sem.window(window).filter(|&u| !sem.skipped(u, skip)) {
            if !in_a(u)? {
                continue;
            }
            let (c, fs, s2) = (ctx.clone(), a.to_vec(), sem.clone());
            let z = SetPredicate::from_fn("Z", move |y| {
                let uy = match s2.product(u, y) {
                    Ok(p) => p,
                    Err(Error::Overflow(_)) => return Ok(false),
                    Err(e) => return Err(e),
                };
                for f in &fs {
                    if !c.eval(f, Some(y), None)? || !c.eval(f, Some(uy), None)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            });
            if !ip_witness_bounded(&sem, &z, k, n, opts)?.is_ip() {
                continue;
            }
            for v in sem.window(window) {
                if !z.contains(v)? {
                    continue;
                }
                let mut ok = true;
                for p in psis {
                    if ctx.eval(p, Some(u), Some(v))? {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    return Ok(ClaimOutcome::Pair { u, v });
                }
            }
        }
        Ok(ClaimOutcome::Exhausted)
    }
}
