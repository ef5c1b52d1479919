//! Queryable stand-ins for an idempotent type `q(x, y)`.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use super::{Forge, ForgeState};
use crate::error::{Error, Result};
use crate::formula::{Formula, StructureContext, Var};
use crate::semigroup::{Element, Homomorphism};

/// Where an oracle's answers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Provenance {
    ForgeApproximation { stages: usize },
    /// The decided part of a forge run, completed by an idempotent class.
    ForgeCompleted { stages: usize, class: usize },
    QuotientIdempotent { class: usize },
}

pub trait TypeOracle: Send + Sync {
    fn query(&self, f: &Formula) -> Result<bool>;

    /// Some `u > above` (any `u` if `None`) with `query(ψ(u, y))`, for `ψ` in the type.
    fn witness(&self, psi: &Formula, above: Option<Element>) -> Result<Element>;

    fn provenance(&self) -> Provenance;
}

/// The type realised by an idempotent class `e` of the quotient: formulas
/// are evaluated in the finite semigroup with both `x` and `y` read as `e`.
pub struct QuotientTypeOracle {
    ctx: StructureContext,
    hom: Arc<Homomorphism>,
    class: usize,
    skip_identity: bool,
}

/// Fibres of non-arithmetic homomorphisms are searched this far.
const FIBRE_SCAN: u64 = 1 << 20;

pub fn quotient_idempotent_type(ctx: &StructureContext, class: usize, skip_identity: bool) -> Result<QuotientTypeOracle> {
    let hom = ctx
        .quotient_hom()
        .cloned()
        .ok_or_else(|| Error::NotQuotientBacked("all predicates must share one homomorphism".into()))?;
    let target = hom.target();
    if class >= target.order() || target.mul(class, class) != class {
        return Err(Error::NotIdempotent(class));
    }
    if !hom.image().contains(&class) || hom.least_in_class(class, 0, skip_identity, FIBRE_SCAN).is_none() {
        return Err(Error::EmptyFiber(class));
    }
    Ok(QuotientTypeOracle { ctx: ctx.clone(), hom, class, skip_identity })
}

impl QuotientTypeOracle {
    pub fn class(&self) -> usize {
        self.class
    }
}

impl TypeOracle for QuotientTypeOracle {
    fn query(&self, f: &Formula) -> Result<bool> {
        self.ctx.eval_classes(f, Some(self.class), Some(self.class))
    }

    fn witness(&self, psi: &Formula, above: Option<Element>) -> Result<Element> {
        if !self.query(psi)? {
            return Err(Error::NotInType(self.ctx.render(psi)));
        }
        let from = above.map_or(0, |a| a.0 + 1);
        self.hom
            .least_in_class(self.class, from, self.skip_identity, FIBRE_SCAN)
            .ok_or(Error::EmptyFiber(self.class))
    }

    fn provenance(&self) -> Provenance {
        Provenance::QuotientIdempotent { class: self.class }
    }
}

/// Answers from the decided part `q_0` of a finite-stage forge run only.
pub struct ForgeOracle {
    ctx: StructureContext,
    stage: usize,
    a: BTreeSet<Formula>,
    rejected: BTreeSet<Formula>,
    witnesses: BTreeMap<Formula, Element>,
    window: u64,
    skip_identity: bool,
}

impl ForgeOracle {
    fn lookup(&self, f: &Formula) -> Result<Option<bool>> {
        let fv = f.free_vars();
        let has_x = fv.contains(&Var::X);
        let has_y = fv.contains(&Var::Y);
        match (has_x, has_y) {
            (false, false) => self.ctx.eval(f, None, None).map(Some),
            (false, true) => self.lookup(&f.rename(Var::Y, Var::X)),
            (true, false) => {
                if self.a.contains(f) {
                    return Ok(Some(true));
                }
                if let Formula::Not(g) = f {
                    if self.a.contains(g.as_ref()) {
                        return Ok(Some(false));
                    }
                }
                if self.a.contains(&f.clone().not()) {
                    return Ok(Some(false));
                }
                Ok(None)
            }
            (true, true) => {
                if let Some(g) = f.strip_product() {
                    return self.decide(&g);
                }
                if self.rejected.contains(f) {
                    return Ok(Some(false));
                }
                if let Formula::Not(g) = f {
                    if self.rejected.contains(g.as_ref()) {
                        return Ok(Some(true));
                    }
                }
                Ok(None)
            }
        }
    }

    /// `Some(truth)` when `q_0` settles `f`, possibly through the connectives.
    pub fn decide(&self, f: &Formula) -> Result<Option<bool>> {
        if let Some(b) = self.lookup(f)? {
            return Ok(Some(b));
        }
        Ok(match f {
            Formula::Atom { .. } => None,
            Formula::Not(g) => self.decide(g)?.map(|b| !b),
            Formula::And(a, b) => match (self.decide(a)?, self.decide(b)?) {
                (Some(false), _) | (_, Some(false)) => Some(false),
                (Some(true), Some(true)) => Some(true),
                _ => None,
            },
            Formula::Or(a, b) => match (self.decide(a)?, self.decide(b)?) {
                (Some(true), _) | (_, Some(true)) => Some(true),
                (Some(false), Some(false)) => Some(false),
                _ => None,
            },
        })
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    fn undecided(&self, f: &Formula) -> Error {
        Error::Undecided { stage: self.stage, formula: self.ctx.render(f) }
    }
}

impl TypeOracle for ForgeOracle {
    fn query(&self, f: &Formula) -> Result<bool> {
        self.decide(f)?.ok_or_else(|| self.undecided(f))
    }

    fn witness(&self, psi: &Formula, above: Option<Element>) -> Result<Element> {
        if !self.query(psi)? {
            return Err(Error::NotInType(self.ctx.render(psi)));
        }
        if let Some(&u) = self.witnesses.get(psi) {
            if above.is_none_or(|a| u > a) {
                return Ok(u);
            }
        }
        let sem = self.ctx.semigroup();
        for u in sem.window(self.window) {
            if above.is_some_and(|a| u <= a) || sem.skipped(u, self.skip_identity) {
                continue;
            }
            if self.decide(&psi.substitute_x(u))? == Some(true) {
                return Ok(u);
            }
        }
        Err(self.undecided(psi))
    }

    fn provenance(&self) -> Provenance {
        Provenance::ForgeApproximation { stages: self.stage }
    }
}

/// The decided part of a forge run, completed by the quotient type of the
/// idempotent class of `A` with the least representative. Every answer is
/// checked against the decided part.
pub struct ForgeCompletion {
    decided: ForgeOracle,
    quotient: QuotientTypeOracle,
}

impl ForgeCompletion {
    pub fn class(&self) -> usize {
        self.quotient.class
    }

    pub fn decided(&self) -> &ForgeOracle {
        &self.decided
    }
}

impl TypeOracle for ForgeCompletion {
    fn query(&self, f: &Formula) -> Result<bool> {
        let q = self.quotient.query(f)?;
        if let Some(d) = self.decided.decide(f)? {
            if d != q {
                return Err(Error::Contract(format!(
                    "completion disagrees with the decided part on {}",
                    self.decided.ctx.render(f)
                )));
            }
        }
        Ok(q)
    }

    fn witness(&self, psi: &Formula, above: Option<Element>) -> Result<Element> {
        self.query(psi)?;
        self.quotient.witness(psi, above)
    }

    fn provenance(&self) -> Provenance {
        Provenance::ForgeCompleted { stages: self.decided.stage, class: self.quotient.class }
    }
}

impl Forge {
    pub fn oracle(&self, state: &ForgeState) -> ForgeOracle {
        ForgeOracle {
            ctx: self.context().clone(),
            stage: state.stage,
            a: state.a_formulas().cloned().collect(),
            rejected: state.j.iter().map(|&j| self.psi(j)).collect(),
            witnesses: state.witness_log.iter().map(|(&j, &u)| (self.psi(j), u)).collect(),
            window: self.scan_window(),
            skip_identity: self.config().skip_identity,
        }
    }

    /// Exact mode only.
    pub fn completion(&self, state: &ForgeState) -> Result<ForgeCompletion> {
        let q = self
            .quotient()
            .ok_or_else(|| Error::NotQuotientBacked("completions need exact-quotient mode".into()))?;
        let a: Vec<Formula> = state.a_formulas().cloned().collect();
        let t = self.classes_of(q, &a)?;
        let class = q
            .reps
            .iter()
            .map(|&(c, _)| c)
            .find(|&c| t[c] && q.idempotents.contains(&c))
            .ok_or_else(|| Error::Contract("A has no idempotent class".into()))?;
        Ok(ForgeCompletion {
            decided: self.oracle(state),
            quotient: quotient_idempotent_type(self.context(), class, self.config().skip_identity)?,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ContractReport {
    pub checked: usize,
    pub undecided: usize,
    pub violations: Vec<String>,
}

impl ContractReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Boolean, idempotence and independence contracts on the given formulas.
/// Conjunctions are checked between neighbours in the list.
pub fn check_contracts(ctx: &StructureContext, oracle: &dyn TypeOracle, formulas: &[Formula]) -> Result<ContractReport> {
    let mut report = ContractReport::default();
    let q = |f: &Formula| -> Result<Option<bool>> {
        match oracle.query(f) {
            Ok(b) => Ok(Some(b)),
            Err(Error::Undecided { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    };
    for (i, f) in formulas.iter().enumerate() {
        report.checked += 1;
        let Some(v) = q(f)? else {
            report.undecided += 1;
            continue;
        };
        let mut fail = |what: &str| report.violations.push(format!("{what}: {}", ctx.render(f)));
        if q(&f.clone().not())? == Some(v) {
            fail("negation");
        }
        if let Some(g) = formulas.get(i + 1) {
            if let (Some(vg), Some(c)) = (q(g)?, q(&f.clone().and(g.clone()))?) {
                if c != (v && vg) {
                    fail("conjunction");
                }
            }
        }
        let fv = f.free_vars();
        if fv == BTreeSet::from([Var::X]) {
            let at_y = q(&f.rename(Var::X, Var::Y))?;
            let at_xy = q(&f.at_product())?;
            if at_y.is_some_and(|b| b != v) || at_xy.is_some_and(|b| b != v) {
                fail("idempotence");
            }
        }
        if v && fv.contains(&Var::X) {
            match oracle.witness(f, None) {
                Ok(u) => {
                    if q(&f.substitute_x(u))? != Some(true) {
                        fail("independence");
                    }
                }
                Err(Error::Undecided { .. }) => {}
                Err(e) => return Err(e),
            }
        }
    }
    Ok(report)
}
