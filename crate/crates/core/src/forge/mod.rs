//! Stage-wise construction of an idempotent type containing a definable IP set.
//!
//! State at stage `s`: a list `A` of one-variable formulas whose conjunction
//! defines an IP set, the rejected two-variable formulas `B = {¬ψ_j : j ∈ J}`
//! and a witness log for the accepted ones. One step decides `φ_{s+1}` (kept
//! positively iff `A ∧ φ_{s+1}` is still IP) and then `ψ_s` (the least `u`
//! with `A(y) ∧ ψ_s(u, y)` IP, else `¬ψ_s` joins `B`).
//!
//! Two oracle modes: exact-quotient mode decides IP-ness through the shared
//! finite quotient of the base predicates; bounded mode uses the depth-`k`
//! witness search over a window and labels negative decisions "at bounds".

mod claim;
mod invariants;
mod oracle;
mod transcript;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use claim::{verify_claim_pair, ClaimOutcome};
pub use invariants::{ConditionCheck, InvariantReport};
pub use oracle::{
    check_contracts, quotient_idempotent_type, ContractReport, ForgeCompletion, ForgeOracle, Provenance,
    QuotientTypeOracle, TypeOracle,
};
pub use transcript::{read_transcript, record_json, verify_transcript, write_transcript, TranscriptHeader, VerifyReport};

use crate::error::{Error, Result};
use crate::formula::{Formula, FormulaEnumeration, StructureContext, Term, Var};
use crate::ip::{ip_witness_bounded, OracleVerdict, SearchOptions, SetPredicate};
use crate::semigroup::{Element, Homomorphism, Order};

/// Window scanned for witnesses and claim pairs in exact mode.
const EXACT_SCAN_WINDOW: u64 = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum OracleMode {
    ExactQuotient,
    Bounded {
        k: usize,
        #[serde(rename = "N")]
        n: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgeConfig {
    pub mode: OracleMode,
    pub skip_identity: bool,
    /// Bounded mode: how many `u` are sampled when checking condition (4).
    pub sample: u64,
}

impl Default for ForgeConfig {
    fn default() -> Self {
        ForgeConfig { mode: OracleMode::ExactQuotient, skip_identity: false, sample: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    Phi { index: usize, positive: bool },
    /// The instance `ψ_index(witness, ·)`, stored as a formula in `x`.
    Psi { index: usize, witness: Element },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AEntry {
    pub origin: Origin,
    pub formula: Formula,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiDecision {
    pub index: usize,
    pub formula: Formula,
    pub positive: bool,
    pub at_bounds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PsiDecision {
    pub index: usize,
    pub formula: Formula,
    pub accepted: bool,
    pub witness_u: Option<Element>,
    pub at_bounds: bool,
}

/// What happened in the step that produced stage `stage`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageRecord {
    pub stage: usize,
    pub phi: PhiDecision,
    pub psi: PsiDecision,
    pub j: BTreeSet<usize>,
    pub claim: Option<ClaimOutcome>,
    pub invariants: Option<InvariantReport>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForgeState {
    pub stage: usize,
    pub a: Vec<AEntry>,
    /// `¬ψ_j` for `j ∈ J`, in increasing `j`.
    pub b: Vec<Formula>,
    pub j: BTreeSet<usize>,
    pub witness_log: BTreeMap<usize, Element>,
    pub mode: OracleMode,
    /// Bounded mode: the last basis found for the conjunction of `A`.
    pub a_witness: Option<Vec<Element>>,
    pub records: Vec<StageRecord>,
}

impl ForgeState {
    pub fn a_formulas(&self) -> impl Iterator<Item = &Formula> {
        self.a.iter().map(|e| &e.formula)
    }

    pub fn conjunction(&self) -> Formula {
        Formula::conjunction(self.a_formulas().cloned()).expect("A always holds the X-formula")
    }
}

/// Finite quotient data for exact mode.
#[derive(Debug)]
pub(crate) struct QuotientData {
    pub hom: Arc<Homomorphism>,
    /// Image classes with their least (non-skipped) elements, by element.
    pub reps: Vec<(usize, Element)>,
    /// Idempotent image classes that have a representative.
    pub idempotents: Vec<usize>,
}

impl QuotientData {
    fn new(ctx: &StructureContext, skip_identity: bool) -> Result<Self> {
        let hom = ctx
            .quotient_hom()
            .cloned()
            .ok_or_else(|| Error::NotQuotientBacked("exact mode needs all predicates on one homomorphism".into()))?;
        let mut reps: Vec<(usize, Element)> = hom
            .image()
            .into_iter()
            .filter_map(|c| hom.least_in_class(c, 0, skip_identity, 1 << 22).map(|u| (c, u)))
            .collect();
        reps.sort_by_key(|&(_, u)| u);
        let target = hom.target();
        let mut idempotents: Vec<usize> = reps.iter().map(|&(c, _)| c).filter(|&c| target.mul(c, c) == c).collect();
        idempotents.sort_unstable();
        Ok(QuotientData { hom, reps, idempotents })
    }

    pub fn order(&self) -> usize {
        self.hom.target().order()
    }

    pub fn is_ip(&self, t: &[bool]) -> bool {
        self.idempotents.iter().any(|&e| t[e])
    }
}

pub struct Forge {
    ctx: StructureContext,
    x: Formula,
    config: ForgeConfig,
    phis: FormulaEnumeration,
    psis: FormulaEnumeration,
    quotient: Option<QuotientData>,
}

impl Forge {
    pub fn new(ctx: StructureContext, x: Formula, config: ForgeConfig) -> Result<Self> {
        if x.free_vars() != BTreeSet::from([Var::X]) {
            return Err(Error::WrongArity { expected: "{x}".into(), found: format!("{:?}", x.free_vars()) });
        }
        let n = ctx.predicates().len();
        if n == 0 {
            return Err(Error::Spec("the structure has no predicates".into()));
        }
        let limit = match ctx.semigroup().order() {
            Order::Finite(k) => Some(k),
            Order::Infinite => None,
        };
        let phis = FormulaEnumeration::unary(n, limit)
            .pinned(&x)
            .ok_or_else(|| Error::Spec(format!("{} is outside the structure's language", ctx.render(&x))))?;
        let psis = FormulaEnumeration::binary(n, limit);
        let quotient = match config.mode {
            OracleMode::ExactQuotient => Some(QuotientData::new(&ctx, config.skip_identity)?),
            OracleMode::Bounded { k, n } => {
                if k == 0 || n == 0 {
                    return Err(Error::Spec("bounded mode needs k ≥ 1 and N ≥ 1".into()));
                }
                None
            }
        };
        Ok(Forge { ctx, x, config, phis, psis, quotient })
    }

    pub fn context(&self) -> &StructureContext {
        &self.ctx
    }

    pub fn x_formula(&self) -> &Formula {
        &self.x
    }

    pub fn config(&self) -> ForgeConfig {
        self.config
    }

    pub fn phi(&self, i: usize) -> Formula {
        self.phis.get(i)
    }

    pub fn psi(&self, j: usize) -> Formula {
        self.psis.get(j)
    }

    pub(crate) fn quotient(&self) -> Option<&QuotientData> {
        self.quotient.as_ref()
    }

    pub(crate) fn scan_window(&self) -> u64 {
        match self.config.mode {
            OracleMode::ExactQuotient => EXACT_SCAN_WINDOW,
            OracleMode::Bounded { n, .. } => n,
        }
    }

    fn search_options(&self) -> SearchOptions {
        SearchOptions { skip_identity: self.config.skip_identity, parallel: true }
    }

    /// Classes satisfying every formula (all in `x`).
    pub(crate) fn classes_of<'a>(&self, q: &QuotientData, fs: impl IntoIterator<Item = &'a Formula>) -> Result<Vec<bool>> {
        let mut t = vec![true; q.order()];
        for f in fs {
            let s = self.ctx.reduce_to_quotient(f, Var::X)?;
            for (c, keep) in t.iter_mut().enumerate() {
                *keep &= s.contains(&c);
            }
        }
        Ok(t)
    }

    /// The set defined by the conjunction of `fs` (formulas in `x`).
    pub(crate) fn set_of(&self, fs: Vec<Formula>) -> SetPredicate {
        let ctx = self.ctx.clone();
        SetPredicate::from_fn("A", move |a| {
            for f in &fs {
                if !ctx.eval(f, Some(a), None)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })
    }

    fn bounded(&self) -> (usize, u64) {
        match self.config.mode {
            OracleMode::Bounded { k, n } => (k, n),
            OracleMode::ExactQuotient => unreachable!("bounded search in exact mode"),
        }
    }

    fn bounded_witness(&self, fs: Vec<Formula>) -> Result<Option<Vec<Element>>> {
        let (k, n) = self.bounded();
        let set = self.set_of(fs);
        Ok(match ip_witness_bounded(self.ctx.semigroup(), &set, k, n, self.search_options())? {
            OracleVerdict::Ip(w) => Some(w.basis),
            _ => None,
        })
    }

    /// Whether the conjunction of `fs` is IP per the active oracle, with the
    /// bounded witness when there is one.
    pub fn is_ip(&self, fs: &[Formula]) -> Result<(bool, Option<Vec<Element>>)> {
        match &self.quotient {
            Some(q) => Ok((q.is_ip(&self.classes_of(q, fs)?), None)),
            None => {
                let w = self.bounded_witness(fs.to_vec())?;
                Ok((w.is_some(), w))
            }
        }
    }

    pub fn init(&self) -> Result<ForgeState> {
        let (ip, witness) = self.is_ip(std::slice::from_ref(&self.x))?;
        if !ip {
            let how = match self.config.mode {
                OracleMode::ExactQuotient => "no idempotent class of the image satisfies it".to_string(),
                OracleMode::Bounded { k, n } => format!("no depth-{k} witness in the first {n} elements"),
            };
            return Err(Error::NotIp(format!("{}: {how}", self.ctx.render(&self.x))));
        }
        Ok(ForgeState {
            stage: 0,
            a: vec![AEntry { origin: Origin::Phi { index: 0, positive: true }, formula: self.x.clone() }],
            b: Vec::new(),
            j: BTreeSet::new(),
            witness_log: BTreeMap::new(),
            mode: self.config.mode,
            a_witness: witness,
            records: Vec::new(),
        })
    }

    /// The least `u` such that `A(y) ∧ ψ(u, y)` is IP per the active oracle,
    /// with the bounded witness for the enlarged set.
    pub fn psi_witness(&self, a: &[Formula], psi: &Formula) -> Result<Option<(Element, Option<Vec<Element>>)>> {
        match &self.quotient {
            Some(q) => {
                let t = self.classes_of(q, a)?;
                let r = self.ctx.reduce_pair(psi)?;
                for &(c, u) in &q.reps {
                    if q.idempotents.iter().any(|&f| t[f] && r[c][f]) {
                        return Ok(Some((u, None)));
                    }
                }
                Ok(None)
            }
            None => {
                let (k, n) = self.bounded();
                let skip = self.config.skip_identity;
                let s = self.ctx.semigroup();
                let candidates: Vec<Element> = s.window(n).filter(|&u| !s.skipped(u, skip)).collect();
                let opts = SearchOptions { parallel: false, ..self.search_options() };
                candidates
                    .par_iter()
                    .find_map_first(|&u| {
                        let mut fs = a.to_vec();
                        fs.push(instance(psi, u));
                        let set = self.set_of(fs);
                        match ip_witness_bounded(s, &set, k, n, opts) {
                            Ok(OracleVerdict::Ip(w)) => Some(Ok((u, Some(w.basis)))),
                            Ok(_) => None,
                            Err(e) => Some(Err(e)),
                        }
                    })
                    .transpose()
            }
        }
    }

    /// One step of the construction, without invariant or claim checks.
    pub fn step(&self, state: &ForgeState) -> Result<ForgeState> {
        let s = state.stage;
        let mut next = state.clone();
        let bounded = self.quotient.is_none();

        let phi = self.phis.get(s + 1);
        let mut fs: Vec<Formula> = state.a_formulas().cloned().collect();
        fs.push(phi.clone());
        let (positive, witness) = self.is_ip(&fs)?;
        let kept = if positive { phi.clone() } else { phi.clone().not() };
        if !positive {
            fs.pop();
            fs.push(kept.clone());
            next.a_witness = if bounded { self.bounded_witness(fs.clone())? } else { None };
        } else {
            next.a_witness = witness;
        }
        next.a.push(AEntry { origin: Origin::Phi { index: s + 1, positive }, formula: kept });
        let phi_decision = PhiDecision { index: s + 1, formula: phi, positive, at_bounds: bounded && !positive };

        let psi = self.psis.get(s);
        let psi_decision = match self.psi_witness(&fs, &psi)? {
            Some((u, w)) => {
                next.a.push(AEntry { origin: Origin::Psi { index: s, witness: u }, formula: instance(&psi, u) });
                next.witness_log.insert(s, u);
                if w.is_some() {
                    next.a_witness = w;
                }
                PsiDecision { index: s, formula: psi, accepted: true, witness_u: Some(u), at_bounds: false }
            }
            None => {
                next.b.push(psi.clone().not());
                next.j.insert(s);
                PsiDecision { index: s, formula: psi, accepted: false, witness_u: None, at_bounds: bounded }
            }
        };

        next.stage = s + 1;
        next.records.push(StageRecord {
            stage: s + 1,
            phi: phi_decision,
            psi: psi_decision,
            j: next.j.clone(),
            claim: None,
            invariants: None,
        });
        Ok(next)
    }

    /// A step followed by the invariant check and a claim witness, both
    /// stored in the new stage record.
    pub fn advance(&self, state: &ForgeState) -> Result<ForgeState> {
        let mut next = self.step(state)?;
        let report = self.check_invariants(&next)?;
        let claim = self.consistency_witness(&next)?;
        let rec = next.records.last_mut().expect("step pushes a record");
        rec.invariants = Some(report);
        rec.claim = Some(claim);
        Ok(next)
    }

    /// Initialise and advance `stages` times.
    pub fn run(&self, stages: usize) -> Result<ForgeState> {
        let mut state = self.init()?;
        for _ in 0..stages {
            state = self.advance(&state)?;
        }
        Ok(state)
    }
}

/// `ψ(u, ·)` as a formula in `x`.
pub fn instance(psi: &Formula, u: Element) -> Formula {
    psi.substitute_x(u).substitute(Var::Y, &Term::x())
}
