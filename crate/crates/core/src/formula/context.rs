use std::collections::BTreeSet;
use std::sync::Arc;

use super::{Formula, Letter, Term, Var};
use crate::error::{Error, Result};
use crate::ip::{QuotientForm, SetPredicate};
use crate::semigroup::{Element, Homomorphism, SemigroupHandle};

#[derive(Debug, Clone)]
pub struct NamedPredicate {
    pub name: String,
    pub pred: SetPredicate,
}

impl NamedPredicate {
    pub fn new(name: impl Into<String>, pred: SetPredicate) -> Self {
        NamedPredicate { name: name.into(), pred }
    }
}

#[derive(Debug)]
struct Inner {
    semigroup: SemigroupHandle,
    predicates: Vec<NamedPredicate>,
    names: Vec<String>,
    hom: Option<Arc<Homomorphism>>,
}

/// A semigroup together with named base predicates. Cheap to clone.
#[derive(Debug, Clone)]
pub struct StructureContext(Arc<Inner>);

impl StructureContext {
    pub fn new(semigroup: SemigroupHandle, predicates: Vec<NamedPredicate>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for p in &predicates {
            if p.name.is_empty() || !seen.insert(p.name.as_str()) {
                return Err(Error::Spec(format!("predicate name {:?} is empty or repeated", p.name)));
            }
        }
        let hom = shared_hom(&predicates).filter(|h| *h.source() == semigroup);
        let names = predicates.iter().map(|p| p.name.clone()).collect();
        Ok(StructureContext(Arc::new(Inner { semigroup, predicates, names, hom })))
    }

    pub fn semigroup(&self) -> &SemigroupHandle {
        &self.0.semigroup
    }

    pub fn predicates(&self) -> &[NamedPredicate] {
        &self.0.predicates
    }

    pub fn names(&self) -> &[String] {
        &self.0.names
    }

    pub fn predicate_index(&self, name: &str) -> Option<usize> {
        self.0.names.iter().position(|n| n == name)
    }

    /// The homomorphism shared by every base predicate, if there is one.
    pub fn quotient_hom(&self) -> Option<&Arc<Homomorphism>> {
        self.0.hom.as_ref()
    }

    pub fn is_quotient_backed(&self) -> bool {
        self.0.hom.is_some()
    }

    fn predicate(&self, i: usize) -> Result<&SetPredicate> {
        self.0.predicates.get(i).map(|p| &p.pred).ok_or(Error::UnregisteredPredicate(i))
    }

    pub fn eval_term(&self, t: &Term, x: Option<Element>, y: Option<Element>) -> Result<Element> {
        let s = &self.0.semigroup;
        let mut acc: Option<Element> = None;
        for l in t.letters() {
            let v = match *l {
                Letter::Var(Var::X) => x.ok_or(Error::MissingAssignment('x'))?,
                Letter::Var(Var::Y) => y.ok_or(Error::MissingAssignment('y'))?,
                Letter::Const(c) => {
                    s.nth_element(c.0)?;
                    c
                }
            };
            acc = Some(match acc {
                None => v,
                Some(a) => s.product(a, v)?,
            });
        }
        Ok(acc.expect("terms are nonempty"))
    }

    pub fn eval(&self, f: &Formula, x: Option<Element>, y: Option<Element>) -> Result<bool> {
        match f {
            Formula::Atom { pred, term } => {
                let p = self.predicate(*pred)?;
                p.contains(self.eval_term(term, x, y)?)
            }
            Formula::Not(g) => Ok(!self.eval(g, x, y)?),
            Formula::And(a, b) => Ok(self.eval(a, x, y)? && self.eval(b, x, y)?),
            Formula::Or(a, b) => Ok(self.eval(a, x, y)? || self.eval(b, x, y)?),
        }
    }

    /// The homomorphism every predicate of `f` is backed by.
    pub fn hom_for(&self, f: &Formula) -> Result<Arc<Homomorphism>> {
        if let Some(h) = &self.0.hom {
            return Ok(h.clone());
        }
        let mut hom: Option<&Arc<Homomorphism>> = None;
        for i in f.predicates() {
            let p = self.predicate(i)?;
            let q = p
                .quotient_form()
                .ok_or_else(|| Error::NotQuotientBacked(format!("predicate {} has no quotient form", self.0.names[i])))?;
            match hom {
                None => hom = Some(&q.hom),
                Some(h) if *h == q.hom => {}
                Some(_) => return Err(Error::MixedHomomorphisms),
            }
        }
        let h = hom.ok_or_else(|| Error::NotQuotientBacked("formula has no predicates".into()))?;
        if h.source() != &self.0.semigroup {
            return Err(Error::NotQuotientBacked("homomorphism source differs from the structure".into()));
        }
        Ok(h.clone())
    }

    fn class_term(&self, h: &Homomorphism, t: &Term, cx: Option<usize>, cy: Option<usize>) -> Result<usize> {
        let target = h.target();
        let mut acc: Option<usize> = None;
        for l in t.letters() {
            let c = match *l {
                Letter::Var(Var::X) => cx.ok_or(Error::MissingAssignment('x'))?,
                Letter::Var(Var::Y) => cy.ok_or(Error::MissingAssignment('y'))?,
                Letter::Const(e) => {
                    self.0.semigroup.nth_element(e.0)?;
                    h.apply(e)?
                }
            };
            acc = Some(match acc {
                None => c,
                Some(a) => target.mul(a, c),
            });
        }
        Ok(acc.expect("terms are nonempty"))
    }

    fn eval_classes_with(&self, h: &Homomorphism, f: &Formula, cx: Option<usize>, cy: Option<usize>) -> Result<bool> {
        match f {
            Formula::Atom { pred, term } => {
                let q = self.predicate(*pred)?.quotient_form().ok_or_else(|| {
                    Error::NotQuotientBacked(format!("predicate {} has no quotient form", self.0.names[*pred]))
                })?;
                Ok(q.subset.contains(&self.class_term(h, term, cx, cy)?))
            }
            Formula::Not(g) => Ok(!self.eval_classes_with(h, g, cx, cy)?),
            Formula::And(a, b) => Ok(self.eval_classes_with(h, a, cx, cy)? && self.eval_classes_with(h, b, cx, cy)?),
            Formula::Or(a, b) => Ok(self.eval_classes_with(h, a, cx, cy)? || self.eval_classes_with(h, b, cx, cy)?),
        }
    }

    /// Evaluate `f` with variables ranging over classes of the quotient.
    pub fn eval_classes(&self, f: &Formula, cx: Option<usize>, cy: Option<usize>) -> Result<bool> {
        let h = self.hom_for(f)?;
        self.eval_classes_with(&h, f, cx, cy)
    }

    /// The classes `T` with `f(v := a) ⇔ h(a) ∈ T`.
    pub fn reduce_to_quotient(&self, f: &Formula, var: Var) -> Result<BTreeSet<usize>> {
        check_vars(f, &[var])?;
        let h = self.hom_for(f)?;
        let mut out = BTreeSet::new();
        for c in 0..h.target().order() {
            let (cx, cy) = match var {
                Var::X => (Some(c), None),
                Var::Y => (None, Some(c)),
            };
            if self.eval_classes_with(&h, f, cx, cy)? {
                out.insert(c);
            }
        }
        Ok(out)
    }

    /// Truth table of a two-variable formula over class pairs, indexed `[cx][cy]`.
    pub fn reduce_pair(&self, f: &Formula) -> Result<Vec<Vec<bool>>> {
        check_vars(f, &[Var::X, Var::Y])?;
        let h = self.hom_for(f)?;
        let n = h.target().order();
        (0..n)
            .map(|cx| (0..n).map(|cy| self.eval_classes_with(&h, f, Some(cx), Some(cy))).collect())
            .collect()
    }

    /// Human-readable rendering, e.g. `P(x·3) ∧ ¬Q(y)`.
    pub fn render(&self, f: &Formula) -> String {
        match f {
            Formula::Atom { pred, term } => {
                let name = self.0.names.get(*pred).cloned().unwrap_or_else(|| format!("#{pred}"));
                let letters: Vec<String> = term
                    .letters()
                    .iter()
                    .map(|l| match l {
                        Letter::Var(v) => v.to_string(),
                        Letter::Const(e) => self.0.semigroup.display(*e),
                    })
                    .collect();
                format!("{name}({})", letters.join("·"))
            }
            Formula::Not(g) => match **g {
                Formula::Atom { .. } | Formula::Not(_) => format!("¬{}", self.render(g)),
                _ => format!("¬({})", self.render(g)),
            },
            Formula::And(a, b) => format!("({} ∧ {})", self.render(a), self.render(b)),
            Formula::Or(a, b) => format!("({} ∨ {})", self.render(a), self.render(b)),
        }
    }
}

fn shared_hom(predicates: &[NamedPredicate]) -> Option<Arc<Homomorphism>> {
    let mut hom: Option<&Arc<Homomorphism>> = None;
    for p in predicates {
        let q = p.pred.quotient_form()?;
        match hom {
            None => hom = Some(&q.hom),
            Some(h) if *h == q.hom => {}
            Some(_) => return None,
        }
    }
    hom.cloned()
}

fn check_vars(f: &Formula, allowed: &[Var]) -> Result<()> {
    let fv = f.free_vars();
    if fv.iter().any(|v| !allowed.contains(v)) {
        return Err(Error::WrongArity { expected: fmt_vars(allowed.iter()), found: fmt_vars(fv.iter()) });
    }
    Ok(())
}

fn fmt_vars<'a>(vs: impl Iterator<Item = &'a Var>) -> String {
    let parts: Vec<String> = vs.map(|v| v.to_string()).collect();
    format!("{{{}}}", parts.join(","))
}

/// The set defined by a formula in `y`, quotient-backed when the structure is.
/// The evaluator and quotient form are cross-checked on the first `window` elements.
pub fn definable_set(ctx: &StructureContext, f: &Formula, window: u64) -> Result<SetPredicate> {
    let fv = f.free_vars();
    if fv != BTreeSet::from([Var::Y]) {
        return Err(Error::WrongArity { expected: "{y}".into(), found: fmt_vars(fv.iter()) });
    }
    for p in f.predicates() {
        ctx.predicate(p)?;
    }
    let label = ctx.render(f);
    let (c, g) = (ctx.clone(), f.clone());
    let mut pred = SetPredicate::from_fn(label, move |a| c.eval(&g, None, Some(a)));
    if ctx.is_quotient_backed() {
        let subset = ctx.reduce_to_quotient(f, Var::Y)?;
        let hom = ctx.hom_for(f)?;
        pred = pred.with_quotient(QuotientForm { hom, subset });
        if let Some(a) = pred.check_quotient(ctx.semigroup(), window)? {
            return Err(Error::Contract(format!("quotient reduction disagrees with evaluation at {a}")));
        }
    }
    Ok(pred)
}
