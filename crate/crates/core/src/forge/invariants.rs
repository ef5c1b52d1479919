use std::collections::BTreeSet;

use serde::Serialize;

use super::{instance, Forge, ForgeState, Origin};
use crate::error::Result;
use crate::formula::Formula;
use crate::ip::fp_set;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionCheck {
    pub condition: u8,
    pub pass: bool,
    /// False when the check only sampled the relevant space.
    pub exhaustive: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InvariantReport {
    pub conditions: Vec<ConditionCheck>,
}

impl InvariantReport {
    pub fn all_pass(&self) -> bool {
        self.conditions.iter().all(|c| c.pass)
    }

    pub fn failed(&self) -> Vec<u8> {
        self.conditions.iter().filter(|c| !c.pass).map(|c| c.condition).collect()
    }
}

fn check(condition: u8, exhaustive: bool, failure: Option<String>) -> ConditionCheck {
    ConditionCheck { condition, pass: failure.is_none(), exhaustive, detail: failure }
}

impl Forge {
    /// Conditions (1)–(5) of the construction, recomputed from the state's
    /// formulas rather than from anything cached during the steps.
    pub fn check_invariants(&self, state: &ForgeState) -> Result<InvariantReport> {
        let s = state.stage;
        let a: Vec<Formula> = state.a_formulas().cloned().collect();
        let a_set: BTreeSet<&Formula> = a.iter().collect();
        let ctx = self.context();

        // (1) exactly one of φ_i, ¬φ_i for each i ≤ s
        let mut c1 = None;
        for i in 0..=s {
            let phi = self.phi(i);
            let neg = phi.clone().not();
            let origins = state
                .a
                .iter()
                .filter(|e| matches!(e.origin, Origin::Phi { index, .. } if index == i))
                .count();
            let pos_in = a_set.contains(&phi);
            let neg_in = a_set.contains(&neg);
            if origins != 1 || pos_in == neg_in {
                c1 = Some(format!("φ_{i} = {}: decided {origins} times, φ∈A {pos_in}, ¬φ∈A {neg_in}", ctx.render(&phi)));
                break;
            }
        }

        // (2) A defines an IP set
        let c2 = match self.quotient() {
            Some(q) => {
                let t = self.classes_of(q, &a)?;
                (!q.is_ip(&t)).then(|| "no idempotent image class satisfies A".to_string())
            }
            None => match &state.a_witness {
                Some(basis) => {
                    let set = self.set_of(a.clone());
                    let fp = fp_set(ctx.semigroup(), basis)?;
                    let mut bad = None;
                    for e in fp {
                        if !set.contains(e)? {
                            bad = Some(format!("FP element {e} of the recorded basis leaves A (at bounds)"));
                            break;
                        }
                    }
                    bad
                }
                None => Some("no bounded witness for A (at bounds)".into()),
            },
        };

        // (3) B = {¬ψ_j : j ∈ J}
        let expected: Vec<Formula> = state.j.iter().map(|&j| self.psi(j).not()).collect();
        let c3 = if expected != state.b {
            Some(format!("B has {} entries, J has {}", state.b.len(), state.j.len()))
        } else { state.j.iter().find(|&&j| j >= s).map(|j| format!("J contains {j} ≥ stage {s}")) };

        // (4) A(y) ∧ ψ_j(u, y) is not IP for j ∈ J
        let (c4, exhaustive4) = match self.quotient() {
            Some(q) => {
                let t = self.classes_of(q, &a)?;
                let mut bad = None;
                'outer: for &j in &state.j {
                    let r = ctx.reduce_pair(&self.psi(j))?;
                    for &(c, u) in &q.reps {
                        if q.idempotents.iter().any(|&f| t[f] && r[c][f]) {
                            bad = Some(format!("ψ_{j} with u = {u} (class {c}) keeps A IP"));
                            break 'outer;
                        }
                    }
                }
                (bad, true)
            }
            None => {
                let sem = ctx.semigroup();
                let skip = self.config().skip_identity;
                let us: Vec<_> = sem.window(self.config().sample).filter(|&u| !sem.skipped(u, skip)).collect();
                let mut bad = None;
                'outer2: for &j in &state.j {
                    let psi = self.psi(j);
                    for &u in &us {
                        let mut fs = a.clone();
                        fs.push(instance(&psi, u));
                        if self.is_ip(&fs)?.0 {
                            bad = Some(format!("ψ_{j} with u = {u} has a bounded witness"));
                            break 'outer2;
                        }
                    }
                }
                (bad, false)
            }
        };

        // (5) accepted ψ_j have a logged witness whose instance is in A
        let mut c5 = None;
        for j in 0..s {
            if state.j.contains(&j) {
                if state.witness_log.contains_key(&j) {
                    c5 = Some(format!("ψ_{j} is both rejected and witnessed"));
                    break;
                }
                continue;
            }
            match state.witness_log.get(&j) {
                None => {
                    c5 = Some(format!("ψ_{j} is neither rejected nor witnessed"));
                    break;
                }
                Some(&u) => {
                    if !a_set.contains(&instance(&self.psi(j), u)) {
                        c5 = Some(format!("ψ_{j}({u}, y) is not in A"));
                        break;
                    }
                }
            }
        }

        Ok(InvariantReport {
            conditions: vec![
                check(1, true, c1),
                check(2, self.quotient().is_some(), c2),
                check(3, true, c3),
                check(4, exhaustive4, c4),
                check(5, true, c5),
            ],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::{mod_ctx, p};
    use super::super::{AEntry, ForgeConfig};
    use super::*;
    use crate::formula::{Letter, Var};

    const X: Letter = Letter::Var(Var::X);

    fn forge() -> Forge {
        Forge::new(mod_ctx(4, &[&[0], &[1], &[0, 2]]), p(0, &[X]), ForgeConfig::default()).unwrap()
    }

    #[test]
    fn fresh_state_passes() {
        let f = forge();
        let r = f.check_invariants(&f.init().unwrap()).unwrap();
        assert!(r.all_pass());
    }

    #[test]
    fn both_signs_fail_condition_one() {
        let f = forge();
        let mut st = f.run(2).unwrap();
        let phi1 = f.phi(1);
        let missing = if st.a_formulas().any(|g| *g == phi1) { phi1.not() } else { phi1 };
        st.a.push(AEntry { origin: Origin::Phi { index: 1, positive: true }, formula: missing });
        let r = f.check_invariants(&st).unwrap();
        assert!(r.failed().contains(&1));
    }

    #[test]
    fn tampered_b_fails_condition_three() {
        let f = forge();
        let mut st = f.run(3).unwrap();
        st.b.push(f.psi(0).not());
        assert!(f.check_invariants(&st).unwrap().failed().contains(&3));
    }

    #[test]
    fn dropped_witness_fails_condition_five() {
        let f = forge();
        let mut st = f.run(4).unwrap();
        let j = *st.witness_log.keys().next().expect("some ψ accepted");
        st.witness_log.remove(&j);
        assert!(f.check_invariants(&st).unwrap().failed().contains(&5));
    }
}
