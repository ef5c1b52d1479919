//! Concrete countable semigroups.
//!
//! Every element is canonically a natural-number index into the carrier
//! enumeration, so "the least element" is meaningful uniformly across kinds:
//! numeric order for `(ℕ,+)` and `(ℕ,×)`, shortlex for free words, table row
//! order for finite semigroups.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An element of a semigroup, identified by its position in the carrier enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Element(pub u64);

impl Element {
    pub fn index(self) -> u64 {
        self.0
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Finite(u64),
    Infinite,
}

/// A raw square table of indices; not necessarily associative.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CayleyTable {
    order: usize,
    cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssocCheck {
    Ok,
    Violation(usize, usize, usize),
}

impl CayleyTable {
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        let order = rows.len();
        if order == 0 {
            return Err(Error::InvalidTable("order must be at least 1".into()));
        }
        let mut cells = Vec::with_capacity(order * order);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(Error::InvalidTable(format!(
                    "row {i} has {} entries, expected {order}",
                    row.len()
                )));
            }
            for &v in row {
                if v >= order {
                    return Err(Error::InvalidTable(format!(
                        "entry {v} in row {i} is not below the order {order}"
                    )));
                }
                cells.push(v);
            }
        }
        Ok(CayleyTable { order, cells })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> usize {
        self.cells[a * self.order + b]
    }

    pub fn rows(&self) -> Vec<Vec<usize>> {
        self.cells.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    /// Least triple in lexicographic order with `(a·b)·c ≠ a·(b·c)`, if any.
    pub fn check_associativity(&self) -> AssocCheck {
        let n = self.order;
        for a in 0..n {
            for b in 0..n {
                let ab = self.get(a, b);
                for c in 0..n {
                    if self.get(ab, c) != self.get(a, self.get(b, c)) {
                        return AssocCheck::Violation(a, b, c);
                    }
                }
            }
        }
        AssocCheck::Ok
    }
}

/// An associative Cayley table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FiniteSemigroup {
    table: CayleyTable,
}

impl TryFrom<CayleyTable> for FiniteSemigroup {
    type Error = Error;

    fn try_from(table: CayleyTable) -> Result<Self> {
        match table.check_associativity() {
            AssocCheck::Ok => Ok(FiniteSemigroup { table }),
            AssocCheck::Violation(a, b, c) => Err(Error::InvalidTable(format!(
                "not associative at ({a}, {b}, {c})"
            ))),
        }
    }
}

impl FiniteSemigroup {
    pub fn from_rows(rows: &[Vec<usize>]) -> Result<Self> {
        CayleyTable::from_rows(rows)?.try_into()
    }

    fn from_fn(n: usize, f: impl Fn(usize, usize) -> usize) -> Self {
        let cells = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| f(a, b));
        FiniteSemigroup {
            table: CayleyTable {
                order: n,
                cells: cells.collect(),
            },
        }
    }

    /// `(Z_d, +)`.
    pub fn cyclic_add(d: usize) -> Self {
        assert!(d >= 1);
        Self::from_fn(d, |a, b| (a + b) % d)
    }

    /// `(Z_d, ×)`.
    pub fn cyclic_mul(d: usize) -> Self {
        assert!(d >= 1);
        Self::from_fn(d, |a, b| (a * b) % d)
    }

    /// `x·y = x`.
    pub fn left_zero(n: usize) -> Self {
        assert!(n >= 1);
        Self::from_fn(n, |a, _| a)
    }

    /// `x·y = y`.
    pub fn right_zero(n: usize) -> Self {
        assert!(n >= 1);
        Self::from_fn(n, |_, b| b)
    }

    /// Transformation semigroup generated by maps on `0..states`, acting left
    /// to right: the product `f·g` applies `f` first, then `g`.
    ///
    /// Returns the semigroup and the indices of the generators in it.
    pub fn transformation(states: usize, generators: &[Vec<usize>]) -> Result<(Self, Vec<usize>)> {
        if generators.is_empty() {
            return Err(Error::InvalidTable("no generators".into()));
        }
        for g in generators {
            if g.len() != states || g.iter().any(|&s| s >= states) {
                return Err(Error::InvalidTable(format!("bad transformation {g:?}")));
            }
        }
        let compose = |f: &[usize], g: &[usize]| -> Vec<usize> { f.iter().map(|&s| g[s]).collect() };
        let mut index: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        let mut elems: Vec<Vec<usize>> = Vec::new();
        let mut gen_idx = Vec::new();
        let mut queue = VecDeque::new();
        for g in generators {
            let i = *index.entry(g.clone()).or_insert_with(|| {
                elems.push(g.clone());
                queue.push_back(elems.len() - 1);
                elems.len() - 1
            });
            gen_idx.push(i);
        }
        while let Some(i) = queue.pop_front() {
            for g in generators {
                let h = compose(&elems[i], g);
                if !index.contains_key(&h) {
                    index.insert(h.clone(), elems.len());
                    elems.push(h);
                    queue.push_back(elems.len() - 1);
                }
            }
        }
        let n = elems.len();
        let mut rows = vec![vec![0; n]; n];
        for a in 0..n {
            for b in 0..n {
                rows[a][b] = index[&compose(&elems[a], &elems[b])];
            }
        }
        Ok((Self::from_rows(&rows)?, gen_idx))
    }

    pub fn order(&self) -> usize {
        self.table.order
    }

    pub fn table(&self) -> &CayleyTable {
        &self.table
    }

    #[inline]
    pub fn mul(&self, a: usize, b: usize) -> usize {
        self.table.get(a, b)
    }

    pub fn idempotents(&self) -> Vec<usize> {
        (0..self.order()).filter(|&e| self.mul(e, e) == e).collect()
    }

    /// `{f, f², f³, …}`.
    pub fn cyclic_closure(&self, f: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::new();
        let mut p = f;
        while seen.insert(p) {
            p = self.mul(p, f);
        }
        seen
    }

    /// Closure of `seeds` under the product.
    pub fn generated(&self, seeds: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
        let mut set: BTreeSet<usize> = seeds.into_iter().collect();
        let mut frontier: Vec<usize> = set.iter().copied().collect();
        while let Some(a) = frontier.pop() {
            let current: Vec<usize> = set.iter().copied().collect();
            for b in current {
                for p in [self.mul(a, b), self.mul(b, a)] {
                    if set.insert(p) {
                        frontier.push(p);
                    }
                }
            }
        }
        set
    }

    pub fn is_identity(&self, e: usize) -> bool {
        (0..self.order()).all(|a| self.mul(e, a) == a && self.mul(a, e) == a)
    }

    pub fn is_commutative(&self) -> bool {
        let n = self.order();
        (0..n).all(|a| (a + 1..n).all(|b| self.mul(a, b) == self.mul(b, a)))
    }

    /// All associative tables of order `n`, by backtracking over cells in
    /// row-major order with partial associativity pruning.
    pub fn enumerate_all(n: usize) -> Vec<FiniteSemigroup> {
        fn consistent(n: usize, cells: &[Option<usize>]) -> bool {
            let get = |a: usize, b: usize| cells[a * n + b];
            for a in 0..n {
                for b in 0..n {
                    let Some(ab) = get(a, b) else { continue };
                    for c in 0..n {
                        let (Some(l), Some(bc)) = (get(ab, c), get(b, c)) else { continue };
                        if let Some(r) = get(a, bc) {
                            if l != r {
                                return false;
                            }
                        }
                    }
                }
            }
            true
        }
        fn go(n: usize, pos: usize, cells: &mut Vec<Option<usize>>, out: &mut Vec<FiniteSemigroup>) {
            if pos == n * n {
                let rows: Vec<Vec<usize>> = cells
                    .chunks(n)
                    .map(|r| r.iter().map(|c| c.unwrap()).collect())
                    .collect();
                out.push(FiniteSemigroup::from_rows(&rows).expect("pruned search yields semigroups"));
                return;
            }
            for v in 0..n {
                cells[pos] = Some(v);
                if consistent(n, cells) {
                    go(n, pos + 1, cells, out);
                }
            }
            cells[pos] = None;
        }
        let mut out = Vec::new();
        if n > 0 {
            go(n, 0, &mut vec![None; n * n], &mut out);
        }
        out
    }
}

/// A countable semigroup with computable product and fixed enumeration.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SemigroupHandle {
    FiniteTable(FiniteSemigroup),
    /// `(ℕ, +)` including 0.
    NatAdd,
    /// `(ℕ, ×)` including 0.
    NatMul,
    /// Nonempty words over an alphabet under concatenation, in shortlex order.
    FreeWord { alphabet: Vec<char> },
}

impl SemigroupHandle {
    pub fn free_word(alphabet: &str) -> Result<Self> {
        let letters: Vec<char> = alphabet.chars().collect();
        let distinct: BTreeSet<char> = letters.iter().copied().collect();
        if letters.is_empty() || distinct.len() != letters.len() {
            return Err(Error::Spec(format!("alphabet {alphabet:?} must be nonempty with distinct letters")));
        }
        Ok(SemigroupHandle::FreeWord { alphabet: letters })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SemigroupHandle::FiniteTable(_) => "finite-table",
            SemigroupHandle::NatAdd => "nat-add",
            SemigroupHandle::NatMul => "nat-mul",
            SemigroupHandle::FreeWord { .. } => "free-word",
        }
    }

    pub fn order(&self) -> Order {
        match self {
            SemigroupHandle::FiniteTable(t) => Order::Finite(t.order() as u64),
            _ => Order::Infinite,
        }
    }

    pub fn contains(&self, a: Element) -> bool {
        match self.order() {
            Order::Finite(n) => a.0 < n,
            Order::Infinite => true,
        }
    }

    fn check(&self, a: Element) -> Result<()> {
        match self.order() {
            Order::Finite(n) if a.0 >= n => Err(Error::OutOfRange { index: a.0, order: n }),
            _ => Ok(()),
        }
    }

    pub fn product(&self, a: Element, b: Element) -> Result<Element> {
        self.check(a)?;
        self.check(b)?;
        let overflow = || Error::Overflow(format!("{} · {} in {}", a.0, b.0, self.kind()));
        match self {
            SemigroupHandle::FiniteTable(t) => Ok(Element(t.mul(a.0 as usize, b.0 as usize) as u64)),
            SemigroupHandle::NatAdd => a.0.checked_add(b.0).map(Element).ok_or_else(overflow),
            SemigroupHandle::NatMul => a.0.checked_mul(b.0).map(Element).ok_or_else(overflow),
            SemigroupHandle::FreeWord { alphabet } => {
                let m = alphabet.len() as u64;
                // shortlex index i encodes the bijective base-m numeral i + 1
                let left = a.0 + 1;
                let right = b.0 + 1;
                let len = bijective_len(right, m);
                m.checked_pow(len)
                    .and_then(|p| left.checked_mul(p))
                    .and_then(|v| v.checked_add(right))
                    .map(|v| Element(v - 1))
                    .ok_or_else(overflow)
            }
        }
    }

    /// Product of a nonempty sequence, left to right.
    pub fn product_all(&self, elems: &[Element]) -> Result<Element> {
        let (first, rest) = elems
            .split_first()
            .ok_or_else(|| Error::InvalidPredicate("empty product".into()))?;
        rest.iter().try_fold(*first, |acc, &e| self.product(acc, e))
    }

    pub fn nth_element(&self, i: u64) -> Result<Element> {
        let e = Element(i);
        self.check(e)?;
        Ok(e)
    }

    /// Iterator over the first `n` elements (fewer for small finite semigroups).
    pub fn window(&self, n: u64) -> impl Iterator<Item = Element> {
        let cap = match self.order() {
            Order::Finite(k) => k.min(n),
            Order::Infinite => n,
        };
        (0..cap).map(Element)
    }

    /// Whether `e` is a two-sided identity.
    pub fn is_identity(&self, e: Element) -> bool {
        match self {
            SemigroupHandle::FiniteTable(t) => (e.0 as usize) < t.order() && t.is_identity(e.0 as usize),
            SemigroupHandle::NatAdd => e.0 == 0,
            SemigroupHandle::NatMul => e.0 == 1,
            SemigroupHandle::FreeWord { .. } => false,
        }
    }

    pub fn is_commutative(&self) -> bool {
        match self {
            SemigroupHandle::FiniteTable(t) => t.is_commutative(),
            SemigroupHandle::NatAdd | SemigroupHandle::NatMul => true,
            SemigroupHandle::FreeWord { alphabet } => alphabet.len() == 1,
        }
    }

    /// Whether `e` is excluded from bases under the skip-identity flag: only the
    /// index-0 element, and only when it is a two-sided identity.
    pub fn skipped(&self, e: Element, skip_identity: bool) -> bool {
        skip_identity && e.0 == 0 && self.is_identity(e)
    }

    pub fn display(&self, e: Element) -> String {
        match self {
            SemigroupHandle::FreeWord { alphabet } => {
                let m = alphabet.len() as u64;
                let mut v = e.0 + 1;
                let mut letters = Vec::new();
                while v > 0 {
                    letters.push(alphabet[((v - 1) % m) as usize]);
                    v = (v - 1) / m;
                }
                letters.iter().rev().collect()
            }
            _ => e.0.to_string(),
        }
    }

    /// Inverse of [`display`](Self::display).
    pub fn parse_element(&self, s: &str) -> Result<Element> {
        match self {
            SemigroupHandle::FreeWord { alphabet } => {
                if s.is_empty() {
                    return Err(Error::Spec("the empty word is not an element".into()));
                }
                let m = alphabet.len() as u64;
                let mut v: u64 = 0;
                for ch in s.chars() {
                    let d = alphabet
                        .iter()
                        .position(|&a| a == ch)
                        .ok_or_else(|| Error::Spec(format!("letter {ch:?} not in alphabet")))?;
                    v = v
                        .checked_mul(m)
                        .and_then(|v| v.checked_add(d as u64 + 1))
                        .ok_or_else(|| Error::Overflow(format!("word {s:?}")))?;
                }
                Ok(Element(v - 1))
            }
            _ => {
                let i: u64 = s.trim().parse().map_err(|_| Error::Spec(format!("bad element {s:?}")))?;
                self.nth_element(i)
            }
        }
    }

    /// Letters of a free word as alphabet positions.
    pub fn word_letters(&self, e: Element) -> Option<Vec<usize>> {
        let SemigroupHandle::FreeWord { alphabet } = self else {
            return None;
        };
        let m = alphabet.len() as u64;
        let mut v = e.0 + 1;
        let mut out = Vec::new();
        while v > 0 {
            out.push(((v - 1) % m) as usize);
            v = (v - 1) / m;
        }
        out.reverse();
        Some(out)
    }
}

fn bijective_len(mut v: u64, m: u64) -> u32 {
    let mut len = 0;
    while v > 0 {
        v = (v - 1) / m;
        len += 1;
    }
    len
}

/// How a homomorphism computes the image of a source element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum HomRule {
    /// `n ↦ n mod d` for `(ℕ,+)` or `(ℕ,×)` sources.
    Mod { d: u64 },
    /// Extend a letter assignment to words.
    LetterImage { images: Vec<usize> },
    /// Explicit array for finite-table sources.
    Table { map: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HomCheck {
    Ok,
    Violation(Element, Element),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Homomorphism {
    source: SemigroupHandle,
    target: FiniteSemigroup,
    rule: HomRule,
}

impl Homomorphism {
    /// Validates the rule's shape; the homomorphism law itself is checked by
    /// [`verify`](Self::verify).
    pub fn new(source: SemigroupHandle, target: FiniteSemigroup, rule: HomRule) -> Result<Self> {
        let n = target.order();
        let bad = |m: String| Err(Error::InvalidHomomorphism(m));
        match (&source, &rule) {
            (SemigroupHandle::NatAdd | SemigroupHandle::NatMul, HomRule::Mod { d }) => {
                if *d == 0 || *d as usize > n {
                    return bad(format!("modulus {d} must be in 1..={n}"));
                }
            }
            (SemigroupHandle::FreeWord { alphabet }, HomRule::LetterImage { images }) => {
                if images.len() != alphabet.len() || images.iter().any(|&i| i >= n) {
                    return bad(format!("letter images {images:?} do not fit the alphabet and target"));
                }
            }
            (SemigroupHandle::FiniteTable(s), HomRule::Table { map }) => {
                if map.len() != s.order() || map.iter().any(|&i| i >= n) {
                    return bad(format!("table map {map:?} does not fit source and target"));
                }
            }
            (s, r) => return bad(format!("rule {r:?} does not apply to a {} source", s.kind())),
        }
        Ok(Homomorphism { source, target, rule })
    }

    /// `n ↦ n mod d` onto `(Z_d,+)` or `(Z_d,×)` matching the source operation.
    pub fn residue(source: &SemigroupHandle, d: u64) -> Result<Self> {
        let target = match source {
            SemigroupHandle::NatAdd => FiniteSemigroup::cyclic_add(d as usize),
            SemigroupHandle::NatMul => FiniteSemigroup::cyclic_mul(d as usize),
            other => {
                return Err(Error::InvalidHomomorphism(format!(
                    "residue maps need a natural-number source, not {}",
                    other.kind()
                )))
            }
        };
        Homomorphism::new(source.clone(), target, HomRule::Mod { d })
    }

    pub fn source(&self) -> &SemigroupHandle {
        &self.source
    }

    pub fn target(&self) -> &FiniteSemigroup {
        &self.target
    }

    pub fn rule(&self) -> &HomRule {
        &self.rule
    }

    pub fn apply(&self, a: Element) -> Result<usize> {
        match &self.rule {
            HomRule::Mod { d } => Ok((a.0 % d) as usize),
            HomRule::LetterImage { images } => {
                let letters = self.source.word_letters(a).expect("checked in new");
                let mut it = letters.into_iter().map(|l| images[l]);
                let first = it.next().expect("words are nonempty");
                Ok(it.fold(first, |acc, c| self.target.mul(acc, c)))
            }
            HomRule::Table { map } => map
                .get(a.0 as usize)
                .copied()
                .ok_or(Error::OutOfRange { index: a.0, order: map.len() as u64 }),
        }
    }

    /// The image subsemigroup `h(M)`.
    pub fn image(&self) -> BTreeSet<usize> {
        match &self.rule {
            HomRule::Mod { d } => (0..*d as usize).collect(),
            HomRule::LetterImage { images } => self.target.generated(images.iter().copied()),
            HomRule::Table { map } => map.iter().copied().collect(),
        }
    }

    /// Checks `h(a·b) = h(a)·h(b)` over the first `window` elements, reporting
    /// the least violating pair in lexicographic order.
    pub fn verify(&self, window: u64) -> Result<HomCheck> {
        let elems: Vec<Element> = self.source.window(window).collect();
        for &a in &elems {
            let ha = self.apply(a)?;
            for &b in &elems {
                let lhs = self.apply(self.source.product(a, b)?)?;
                if lhs != self.target.mul(ha, self.apply(b)?) {
                    return Ok(HomCheck::Violation(a, b));
                }
            }
        }
        Ok(HomCheck::Ok)
    }

    /// Least element `≥ from` in class `class`, honouring skip-identity.
    /// Scans at most `cap` elements past `from` for non-arithmetic rules.
    pub fn least_in_class(&self, class: usize, from: u64, skip_identity: bool, cap: u64) -> Option<Element> {
        if let HomRule::Mod { d } = self.rule {
            let c = class as u64;
            if c >= d {
                return None;
            }
            let mut n = if from <= c { c } else { from + (c + d - from % d) % d };
            if self.source.skipped(Element(n), skip_identity) {
                n += d;
            }
            return Some(Element(n));
        }
        let end = match self.source.order() {
            Order::Finite(k) => k.min(from.saturating_add(cap)),
            Order::Infinite => from.saturating_add(cap),
        };
        (from..end)
            .map(Element)
            .filter(|&e| !self.source.skipped(e, skip_identity))
            .find(|&e| self.apply(e).ok() == Some(class))
    }

    /// Image classes paired with their least representatives, sorted by representative.
    pub fn class_representatives(&self, skip_identity: bool) -> Result<Vec<(usize, Element)>> {
        let mut reps = Vec::new();
        for c in self.image() {
            let rep = self
                .least_in_class(c, 0, skip_identity, 1 << 22)
                .ok_or(Error::EmptyFiber(c))?;
            reps.push((c, rep));
        }
        reps.sort_by_key(|&(_, e)| e);
        Ok(reps)
    }
}
