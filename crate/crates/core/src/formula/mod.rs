//! The quantifier-free definable language over a semigroup structure.
//!
//! Terms are words over `x`, `y` and constants, evaluated left to right by the
//! semigroup product. Formulas are Boolean combinations of atoms `P(t)` over
//! the registered base predicates of a [`StructureContext`].

mod context;
mod encode;
mod enumerate;

use std::collections::BTreeSet;
use std::fmt;

pub use context::{definable_set, NamedPredicate, StructureContext};
pub use encode::{decode, encode, from_json, to_json};
pub use enumerate::{formulas_up_to_size, level, FormulaEnumeration};

use crate::semigroup::Element;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    X,
    Y,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Var::X => "x",
            Var::Y => "y",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Letter {
    Var(Var),
    Const(Element),
}

/// A nonempty product of letters.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term(Vec<Letter>);

impl Term {
    pub fn new(letters: Vec<Letter>) -> Self {
        assert!(!letters.is_empty(), "terms are nonempty words");
        Term(letters)
    }

    pub fn var(v: Var) -> Self {
        Term(vec![Letter::Var(v)])
    }

    pub fn x() -> Self {
        Term::var(Var::X)
    }

    pub fn y() -> Self {
        Term::var(Var::Y)
    }

    /// `x·y`.
    pub fn xy() -> Self {
        Term(vec![Letter::Var(Var::X), Letter::Var(Var::Y)])
    }

    pub fn constant(e: Element) -> Self {
        Term(vec![Letter::Const(e)])
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn times(&self, other: &Term) -> Term {
        Term(self.0.iter().chain(&other.0).copied().collect())
    }

    fn substitute(&self, var: Var, by: &Term) -> Term {
        let mut out = Vec::with_capacity(self.0.len());
        for &l in &self.0 {
            match l {
                Letter::Var(v) if v == var => out.extend_from_slice(&by.0),
                other => out.push(other),
            }
        }
        Term(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Formula {
    Atom { pred: usize, term: Term },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn atom(pred: usize, term: Term) -> Self {
        Formula::Atom { pred, term }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(self) -> Self {
        Formula::Not(Box::new(self))
    }

    pub fn and(self, other: Formula) -> Self {
        Formula::And(Box::new(self), Box::new(other))
    }

    pub fn or(self, other: Formula) -> Self {
        Formula::Or(Box::new(self), Box::new(other))
    }

    /// Right-nested conjunction of a nonempty list.
    pub fn conjunction(parts: impl IntoIterator<Item = Formula>) -> Option<Formula> {
        let mut parts: Vec<Formula> = parts.into_iter().collect();
        let mut acc = parts.pop()?;
        while let Some(f) = parts.pop() {
            acc = f.and(acc);
        }
        Some(acc)
    }

    pub fn free_vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Formula::Atom { term, .. } => {
                out.extend(term.0.iter().filter_map(|l| match l {
                    Letter::Var(v) => Some(*v),
                    Letter::Const(_) => None,
                }))
            }
            Formula::Not(f) => f.collect_vars(out),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    pub fn constants(&self) -> BTreeSet<Element> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |_, t| {
            out.extend(t.0.iter().filter_map(|l| match l {
                Letter::Const(e) => Some(*e),
                Letter::Var(_) => None,
            }))
        });
        out
    }

    pub fn predicates(&self) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |p, _| {
            out.insert(p);
        });
        out
    }

    fn visit_atoms(&self, f: &mut impl FnMut(usize, &Term)) {
        match self {
            Formula::Atom { pred, term } => f(*pred, term),
            Formula::Not(g) => g.visit_atoms(f),
            Formula::And(a, b) | Formula::Or(a, b) => {
                a.visit_atoms(f);
                b.visit_atoms(f);
            }
        }
    }

    fn map_terms(&self, f: &impl Fn(&Term) -> Term) -> Formula {
        match self {
            Formula::Atom { pred, term } => Formula::Atom { pred: *pred, term: f(term) },
            Formula::Not(g) => Formula::Not(Box::new(g.map_terms(f))),
            Formula::And(a, b) => Formula::And(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
            Formula::Or(a, b) => Formula::Or(Box::new(a.map_terms(f)), Box::new(b.map_terms(f))),
        }
    }

    /// Replace every occurrence of `var` by the letters of `by`.
    pub fn substitute(&self, var: Var, by: &Term) -> Formula {
        self.map_terms(&|t| t.substitute(var, by))
    }

    /// `f(u, y)`.
    pub fn substitute_x(&self, u: Element) -> Formula {
        self.substitute(Var::X, &Term::constant(u))
    }

    /// `f(u·x, y)`.
    pub fn substitute_x_prefixed(&self, u: Element) -> Formula {
        self.substitute(Var::X, &Term::new(vec![Letter::Const(u), Letter::Var(Var::X)]))
    }

    /// Rename a variable; the target variable must not already occur.
    pub fn rename(&self, from: Var, to: Var) -> Formula {
        self.substitute(from, &Term::var(to))
    }

    /// `f(x·y)` for a formula in `x`.
    pub fn at_product(&self) -> Formula {
        self.substitute(Var::X, &Term::xy())
    }

    /// Inverse of [`at_product`](Self::at_product): `Some(g)` when every `x`
    /// is immediately followed by `y` and every `y` immediately preceded by `x`.
    pub fn strip_product(&self) -> Option<Formula> {
        fn strip(t: &Term) -> Option<Term> {
            let mut out = Vec::new();
            let mut i = 0;
            let l = &t.0;
            while i < l.len() {
                match l[i] {
                    Letter::Var(Var::X) => {
                        if l.get(i + 1) != Some(&Letter::Var(Var::Y)) {
                            return None;
                        }
                        out.push(Letter::Var(Var::X));
                        i += 2;
                    }
                    Letter::Var(Var::Y) => return None,
                    c => {
                        out.push(c);
                        i += 1;
                    }
                }
            }
            Some(Term(out))
        }
        fn go(f: &Formula) -> Option<Formula> {
            Some(match f {
                Formula::Atom { pred, term } => Formula::Atom { pred: *pred, term: strip(term)? },
                Formula::Not(g) => Formula::Not(Box::new(go(g)?)),
                Formula::And(a, b) => Formula::And(Box::new(go(a)?), Box::new(go(b)?)),
                Formula::Or(a, b) => Formula::Or(Box::new(go(a)?), Box::new(go(b)?)),
            })
        }
        go(self)
    }

    pub fn size(&self) -> usize {
        encode(self).len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(i: usize, letters: &[Letter]) -> Formula {
        Formula::atom(i, Term::new(letters.to_vec()))
    }

    const X: Letter = Letter::Var(Var::X);
    const Y: Letter = Letter::Var(Var::Y);

    #[test]
    fn substitution_is_syntactic() {
        let f = p(0, &[X, Y]);
        assert_eq!(f.substitute_x(Element(3)), p(0, &[Letter::Const(Element(3)), Y]));
        assert_eq!(f.substitute_x(Element(3)).free_vars(), BTreeSet::from([Var::Y]));
        assert_eq!(f.substitute_x_prefixed(Element(2)), p(0, &[Letter::Const(Element(2)), X, Y]));
    }

    #[test]
    fn product_pattern_roundtrip() {
        let g = p(0, &[Letter::Const(Element(2)), X, X]).and(p(1, &[X]).not());
        let f = g.at_product();
        assert_eq!(f.free_vars(), BTreeSet::from([Var::X, Var::Y]));
        assert_eq!(f.strip_product(), Some(g));
        assert_eq!(p(0, &[Y, X]).strip_product(), None);
        assert_eq!(p(0, &[X]).strip_product(), None);
    }

    #[test]
    fn conjunction_nests_right() {
        let a = p(0, &[X]);
        let b = p(1, &[X]);
        let c = p(2, &[X]);
        assert_eq!(
            Formula::conjunction([a.clone(), b.clone(), c.clone()]).unwrap(),
            a.and(b.and(c))
        );
        assert_eq!(Formula::conjunction(Vec::new()), None);
    }
}
