//! JSON specifications for semigroups, homomorphisms, predicates and structures.
//!
//! ```json
//! {"kind": "finite-table", "order": 2, "table": [[0, 0], [1, 1]]}
//! {"source": {"kind": "nat-add"}, "target": {"kind": "finite-table", ...}, "rule": {"type": "mod", "d": 5}}
//! {"type": "mod", "d": 4, "residues": [0]}
//! ```
//!
//! Short forms used on the command line: `nat-add`, `nat-mul`, `free-word:ab`,
//! `left-zero:3`, `right-zero:3`, `cyclic-add:5`, `cyclic-mul:6` for
//! semigroups and `mod:d:r1,r2` for predicates.

use std::sync::Arc;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::formula::{definable_set, from_json, NamedPredicate, StructureContext, Var};
use crate::ip::SetPredicate;
use crate::semigroup::{FiniteSemigroup, HomRule, Homomorphism, SemigroupHandle};

/// Moduli above this are not merged into a common residue homomorphism.
const MAX_HARMONISED_MODULUS: u64 = 720;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SemigroupSpec {
    FiniteTable { order: usize, table: Vec<Vec<usize>> },
    NatAdd,
    NatMul,
    FreeWord { alphabet: String },
}

impl SemigroupSpec {
    pub fn build(&self) -> Result<SemigroupHandle> {
        match self {
            SemigroupSpec::FiniteTable { .. } => Ok(SemigroupHandle::FiniteTable(self.build_finite()?)),
            SemigroupSpec::NatAdd => Ok(SemigroupHandle::NatAdd),
            SemigroupSpec::NatMul => Ok(SemigroupHandle::NatMul),
            SemigroupSpec::FreeWord { alphabet } => SemigroupHandle::free_word(alphabet),
        }
    }

    pub fn build_finite(&self) -> Result<FiniteSemigroup> {
        match self {
            SemigroupSpec::FiniteTable { order, table } => {
                if *order == 0 || table.len() != *order {
                    return Err(Error::Spec(format!("table has {} rows, order is {order}", table.len())));
                }
                FiniteSemigroup::from_rows(table)
            }
            other => Err(Error::Spec(format!("expected a finite-table semigroup, got {other:?}"))),
        }
    }

    pub fn from_finite(f: &FiniteSemigroup) -> Self {
        SemigroupSpec::FiniteTable { order: f.order(), table: f.table().rows() }
    }

    /// Parses a short name (see module docs).
    pub fn parse_short(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let size = |a: Option<&str>| -> Result<usize> {
            a.and_then(|a| a.parse().ok())
                .filter(|&n: &usize| n >= 1)
                .ok_or_else(|| Error::Spec(format!("{head} needs a positive size, e.g. {head}:3")))
        };
        let table = |f: FiniteSemigroup| Ok(SemigroupSpec::from_finite(&f));
        match head {
            "nat-add" if arg.is_none() => Ok(SemigroupSpec::NatAdd),
            "nat-mul" if arg.is_none() => Ok(SemigroupSpec::NatMul),
            "free-word" => Ok(SemigroupSpec::FreeWord {
                alphabet: arg.filter(|a| !a.is_empty()).ok_or_else(|| Error::Spec("free-word needs an alphabet".into()))?.into(),
            }),
            "left-zero" => table(FiniteSemigroup::left_zero(size(arg)?)),
            "right-zero" => table(FiniteSemigroup::right_zero(size(arg)?)),
            "cyclic-add" => table(FiniteSemigroup::cyclic_add(size(arg)?)),
            "cyclic-mul" => table(FiniteSemigroup::cyclic_mul(size(arg)?)),
            _ => Err(Error::Spec(format!("unknown semigroup {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomSpec {
    pub source: SemigroupSpec,
    pub target: SemigroupSpec,
    pub rule: HomRule,
}

impl HomSpec {
    pub fn build(&self) -> Result<Homomorphism> {
        Homomorphism::new(self.source.build()?, self.target.build_finite()?, self.rule.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PredicateSpec {
    /// `{n : n mod d ∈ residues}` over nat-add or nat-mul.
    Mod { d: u64, residues: Vec<u64> },
    /// Base64 bitset over the first `window` elements, least significant bit first.
    ExplicitBitset { window: u64, bits: String },
    Quotient { hom: HomSpec, subset: Vec<usize> },
    /// A formula in `y` over the predicates listed before this one.
    FormulaRef { formula: Value },
}

impl PredicateSpec {
    /// Parses `mod:d:r1,r2,…`.
    pub fn parse_short(s: &str) -> Result<Self> {
        let bad = || Error::Spec(format!("bad predicate {s:?}; expected mod:d:r1,r2,…"));
        let mut parts = s.splitn(3, ':');
        if parts.next() != Some("mod") {
            return Err(bad());
        }
        let d: u64 = parts.next().and_then(|d| d.parse().ok()).ok_or_else(bad)?;
        let residues = parts
            .next()
            .ok_or_else(bad)?
            .split(',')
            .filter(|r| !r.is_empty())
            .map(|r| r.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?;
        Ok(PredicateSpec::Mod { d, residues })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NamedPredicateSpec {
    pub name: String,
    pub pred: PredicateSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructureSpec {
    pub semigroup: SemigroupSpec,
    pub predicates: Vec<NamedPredicateSpec>,
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl StructureSpec {
    /// Builds the structure. Residue predicates are re-expressed modulo the
    /// least common multiple of all their moduli, so that a family such as
    /// "even" and "multiple of 6" shares one quotient homomorphism.
    pub fn build(&self) -> Result<StructureContext> {
        let semigroup = self.semigroup.build()?;
        let moduli: Vec<u64> = self
            .predicates
            .iter()
            .filter_map(|p| match p.pred {
                PredicateSpec::Mod { d, .. } => Some(d),
                _ => None,
            })
            .collect();
        if moduli.contains(&0) {
            return Err(Error::InvalidPredicate("modulus must be positive".into()));
        }
        let lcm = moduli
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d / gcd(acc, d)))
            .filter(|&l| l <= MAX_HARMONISED_MODULUS);

        let mut built: Vec<NamedPredicate> = Vec::new();
        for p in &self.predicates {
            let pred = match &p.pred {
                PredicateSpec::Mod { d, residues } => {
                    if let Some(r) = residues.iter().find(|&&r| r >= *d) {
                        return Err(Error::InvalidPredicate(format!("residue {r} is not below {d}")));
                    }
                    match lcm {
                        Some(l) => SetPredicate::residue(
                            &semigroup,
                            l,
                            (0..l).filter(|n| residues.contains(&(n % d))),
                        )?,
                        None => SetPredicate::residue(&semigroup, *d, residues.iter().copied())?,
                    }
                }
                PredicateSpec::ExplicitBitset { window, bits } => {
                    let bytes = base64::engine::general_purpose::STANDARD
                        .decode(bits)
                        .map_err(|e| Error::Spec(format!("predicate {}: bad base64: {e}", p.name)))?;
                    SetPredicate::bitset(*window, bytes)?
                }
                PredicateSpec::Quotient { hom, subset } => {
                    let h = hom.build()?;
                    if *h.source() != semigroup {
                        return Err(Error::Spec(format!("predicate {}: homomorphism source differs", p.name)));
                    }
                    SetPredicate::quotient(Arc::new(h), subset.iter().copied())?
                }
                PredicateSpec::FormulaRef { formula } => {
                    let ctx = StructureContext::new(semigroup.clone(), built.clone())?;
                    let f = from_json(formula, ctx.names())?;
                    let f = if f.free_vars().contains(&Var::X) { f.rename(Var::X, Var::Y) } else { f };
                    definable_set(&ctx, &f, 200)?
                }
            };
            built.push(NamedPredicate::new(p.name.clone(), pred));
        }
        StructureContext::new(semigroup, built)
    }

    /// `P0 = mod:d:0, …, P{d-1} = mod:d:{d-1}` over nat-add.
    pub fn residue_family(d: u64) -> Self {
        StructureSpec {
            semigroup: SemigroupSpec::NatAdd,
            predicates: (0..d)
                .map(|r| NamedPredicateSpec { name: format!("P{r}"), pred: PredicateSpec::Mod { d, residues: vec![r] } })
                .collect(),
        }
    }
}
