use std::collections::{BTreeSet, HashMap};

use rayon::prelude::*;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::predicate::SetPredicate;
use super::quotient::{is_ip_quotient, QuotientOptions};
use crate::error::{Error, Result};
use crate::semigroup::{Element, SemigroupHandle};

/// All products `u_{i₁}⋯u_{iₖ}` over nonempty index-increasing subsequences of `basis`.
pub fn fp_set(semigroup: &SemigroupHandle, basis: &[Element]) -> Result<BTreeSet<Element>> {
    let mut fp = BTreeSet::new();
    for &u in basis {
        let extended = fp
            .iter()
            .map(|&p| semigroup.product(p, u))
            .collect::<Result<Vec<_>>>()?;
        fp.insert(u);
        fp.extend(extended);
    }
    Ok(fp)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IpWitness {
    pub basis: Vec<Element>,
    pub fp: BTreeSet<Element>,
}

impl IpWitness {
    pub fn new(semigroup: &SemigroupHandle, basis: Vec<Element>) -> Result<Self> {
        let fp = fp_set(semigroup, &basis)?;
        Ok(IpWitness { basis, fp })
    }

    pub fn depth(&self) -> usize {
        self.basis.len()
    }

    /// Re-evaluates `FP(basis) ⊆ X` from scratch.
    pub fn recheck(&self, semigroup: &SemigroupHandle, x: &SetPredicate) -> Result<bool> {
        if fp_set(semigroup, &self.basis)? != self.fp {
            return Ok(false);
        }
        for &e in &self.fp {
            if !x.contains(e)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Bounds {
    pub k: usize,
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
}

/// Three-valued bounded surrogate for "is an IP set".
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OracleVerdict {
    Ip(IpWitness),
    /// Only produced by the exact quotient criterion.
    NotIpExact,
    Exhausted(Bounds),
}

impl OracleVerdict {
    pub fn is_ip(&self) -> bool {
        matches!(self, OracleVerdict::Ip(_))
    }

    pub fn witness(&self) -> Option<&IpWitness> {
        match self {
            OracleVerdict::Ip(w) => Some(w),
            _ => None,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            OracleVerdict::Ip(_) => "ip",
            OracleVerdict::NotIpExact => "not-ip-exact",
            OracleVerdict::Exhausted(_) => "exhausted",
        }
    }
}

impl Serialize for OracleVerdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("OracleVerdict", 4)?;
        st.serialize_field("verdict", self.tag())?;
        match self {
            OracleVerdict::Ip(w) => {
                st.serialize_field("basis", &w.basis)?;
                st.serialize_field("fp", &w.fp)?;
                st.serialize_field("bounds", &None::<Bounds>)?;
            }
            OracleVerdict::NotIpExact => {
                st.serialize_field("basis", &Vec::<Element>::new())?;
                st.serialize_field("fp", &Vec::<Element>::new())?;
                st.serialize_field("bounds", &None::<Bounds>)?;
            }
            OracleVerdict::Exhausted(b) => {
                st.serialize_field("basis", &Vec::<Element>::new())?;
                st.serialize_field("fp", &Vec::<Element>::new())?;
                st.serialize_field("bounds", b)?;
            }
        }
        st.end()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchOptions {
    /// Exclude index 0 from bases when it is a two-sided identity.
    pub skip_identity: bool,
    /// Parallelise over the first basis element. The returned witness is still
    /// the lexicographically least one.
    pub parallel: bool,
}

struct Search<'a> {
    semigroup: &'a SemigroupHandle,
    pred: &'a SetPredicate,
    k: usize,
    candidates: Vec<Element>,
    distinct: bool,
    min_fp: usize,
    /// In a commutative semigroup FP(basis) is invariant under reordering, so
    /// only non-decreasing bases are explored. The least witness is sorted anyway.
    sorted: bool,
}

impl Search<'_> {
    fn new<'a>(
        semigroup: &'a SemigroupHandle,
        pred: &'a SetPredicate,
        k: usize,
        window: u64,
        opts: SearchOptions,
    ) -> Result<Search<'a>> {
        let mut candidates = Vec::new();
        for e in semigroup.window(window) {
            if !semigroup.skipped(e, opts.skip_identity) && pred.contains(e)? {
                candidates.push(e);
            }
        }
        Ok(Search { semigroup, pred, k, candidates, distinct: false, min_fp: 0, sorted: semigroup.is_commutative() })
    }

    fn member(&self, e: Element, cache: &mut HashMap<Element, bool>) -> Result<bool> {
        if let Some(&b) = cache.get(&e) {
            return Ok(b);
        }
        let b = self.pred.contains(e)?;
        cache.insert(e, b);
        Ok(b)
    }

    /// Extends the FP set of the current prefix by `u`, or `None` if some new
    /// product leaves the target set.
    fn extend(&self, fp: &[Element], u: Element, cache: &mut HashMap<Element, bool>) -> Result<Option<Vec<Element>>> {
        let mut next = Vec::with_capacity(2 * fp.len() + 1);
        for &p in fp {
            let q = match self.semigroup.product(p, u) {
                Ok(q) => q,
                // products beyond the carrier encoding cannot be certified
                Err(Error::Overflow(_)) => return Ok(None),
                Err(e) => return Err(e),
            };
            if !self.member(q, cache)? {
                return Ok(None);
            }
            next.push(q);
        }
        next.push(u);
        next.extend_from_slice(fp);
        next.sort_unstable();
        next.dedup();
        Ok(Some(next))
    }

    fn dfs(&self, basis: &mut Vec<Element>, fp: &[Element], cache: &mut HashMap<Element, bool>) -> Result<bool> {
        if basis.len() == self.k {
            return Ok(fp.len() >= self.min_fp);
        }
        let remaining = (self.k - basis.len()) as u32;
        if self.min_fp > 0 {
            let reachable = (fp.len() as u128 + 1)
                .saturating_mul(1u128.checked_shl(remaining).unwrap_or(u128::MAX))
                .saturating_sub(1);
            if reachable < self.min_fp as u128 {
                return Ok(false);
            }
        }
        let start = match (self.sorted, basis.last()) {
            (true, Some(last)) => {
                let i = self.candidates.partition_point(|c| c < last);
                if self.distinct {
                    i + 1
                } else {
                    i
                }
            }
            _ => 0,
        };
        for &u in &self.candidates[start.min(self.candidates.len())..] {
            if self.distinct && basis.contains(&u) {
                continue;
            }
            let Some(next) = self.extend(fp, u, cache)? else { continue };
            basis.push(u);
            if self.dfs(basis, &next, cache)? {
                return Ok(true);
            }
            basis.pop();
        }
        Ok(false)
    }

    fn search_from(&self, u: Element) -> Result<Option<Vec<Element>>> {
        let mut cache = HashMap::new();
        let mut basis = vec![u];
        if self.dfs(&mut basis, &[u], &mut cache)? {
            Ok(Some(basis))
        } else {
            Ok(None)
        }
    }

    fn run(&self, parallel: bool) -> Result<Option<Vec<Element>>> {
        if self.k == 0 {
            return Err(Error::InvalidPredicate("depth k must be at least 1".into()));
        }
        if parallel && self.candidates.len() > 1 {
            // find_map_first reduces by candidate order, not completion time
            self.candidates
                .par_iter()
                .find_map_first(|&u| self.search_from(u).transpose())
                .transpose()
        } else {
            for &u in &self.candidates {
                if let Some(b) = self.search_from(u)? {
                    return Ok(Some(b));
                }
            }
            Ok(None)
        }
    }

    fn verdict(&self, window: u64, parallel: bool) -> Result<OracleVerdict> {
        match self.run(parallel)? {
            Some(basis) => Ok(OracleVerdict::Ip(IpWitness::new(self.semigroup, basis)?)),
            None => Ok(OracleVerdict::Exhausted(Bounds {
                k: self.k,
                n: window,
                m: (self.min_fp > 0).then_some(self.min_fp),
            })),
        }
    }
}

/// Depth-first search for a length-`k` basis drawn from the first `window`
/// elements (repeats allowed) whose FP set lies in `x`. The witness returned
/// is lexicographically least in enumeration order.
pub fn ip_witness_bounded(
    semigroup: &SemigroupHandle,
    x: &SetPredicate,
    k: usize,
    window: u64,
    opts: SearchOptions,
) -> Result<OracleVerdict> {
    Search::new(semigroup, x, k, window, opts)?.verdict(window, opts.parallel)
}

/// As [`ip_witness_bounded`], additionally requiring at least `m` distinct FP values.
pub fn iip_witness_bounded(
    semigroup: &SemigroupHandle,
    x: &SetPredicate,
    k: usize,
    m: usize,
    window: u64,
    opts: SearchOptions,
) -> Result<OracleVerdict> {
    if m == 0 {
        return Err(Error::InvalidPredicate("distinct count m must be at least 1".into()));
    }
    let mut search = Search::new(semigroup, x, k, window, opts)?;
    search.min_fp = m;
    search.verdict(window, opts.parallel)
}

/// As [`ip_witness_bounded`] with pairwise distinct basis entries.
pub fn dip_witness_bounded(
    semigroup: &SemigroupHandle,
    x: &SetPredicate,
    k: usize,
    window: u64,
    opts: SearchOptions,
) -> Result<OracleVerdict> {
    let mut search = Search::new(semigroup, x, k, window, opts)?;
    search.distinct = true;
    search.verdict(window, opts.parallel)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionReport {
    #[serde(rename = "Y")]
    pub y: OracleVerdict,
    #[serde(rename = "X-minus-Y")]
    pub rest: OracleVerdict,
    /// Both sides exhausted although X itself has a depth-k witness: the
    /// bounds are too small. Never a refutation.
    pub violation_at_bounds: bool,
    /// Exact verdicts `(Y, X∖Y)` when both are quotient-backed by one homomorphism.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<(OracleVerdict, OracleVerdict)>,
}

/// Bounded check of "either Y or X∖Y is IP" for `Y ⊆ X`.
pub fn partition_check(
    semigroup: &SemigroupHandle,
    x: &SetPredicate,
    y: &SetPredicate,
    k: usize,
    window: u64,
    opts: SearchOptions,
) -> Result<PartitionReport> {
    for e in semigroup.window(window) {
        if y.contains(e)? && !x.contains(e)? {
            return Err(Error::NotSubset(e.0));
        }
    }
    let rest = x.difference(y);
    let yv = ip_witness_bounded(semigroup, y, k, window, opts)?;
    let rv = ip_witness_bounded(semigroup, &rest, k, window, opts)?;
    let violation_at_bounds = !yv.is_ip() && !rv.is_ip() && ip_witness_bounded(semigroup, x, k, window, opts)?.is_ip();
    let exact = match (y.quotient_form(), rest.quotient_form()) {
        (Some(a), Some(b)) if a.hom == b.hom => {
            let qo = QuotientOptions { depth: k, skip_identity: opts.skip_identity };
            Some((is_ip_quotient(y, qo)?, is_ip_quotient(&rest, qo)?))
        }
        _ => None,
    };
    Ok(PartitionReport { y: yv, rest: rv, violation_at_bounds, exact })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::FiniteSemigroup;

    fn els(v: &[u64]) -> Vec<Element> {
        v.iter().map(|&i| Element(i)).collect()
    }

    /// Lexicographically least basis by plain enumeration of all k-tuples.
    fn brute_least(
        s: &SemigroupHandle,
        x: &SetPredicate,
        k: usize,
        n: u64,
        distinct: bool,
        skip: bool,
    ) -> Option<Vec<Element>> {
        let pool: Vec<Element> = s.window(n).filter(|&e| !s.skipped(e, skip)).collect();
        let total = (pool.len() as u64).pow(k as u32);
        'tuples: for code in 0..total {
            let mut c = code;
            let mut tuple = vec![Element(0); k];
            for slot in tuple.iter_mut().rev() {
                *slot = pool[(c % pool.len() as u64) as usize];
                c /= pool.len() as u64;
            }
            if distinct {
                let set: BTreeSet<_> = tuple.iter().collect();
                if set.len() != k {
                    continue;
                }
            }
            for mask in 1u32..(1 << k) {
                let picked: Vec<Element> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| tuple[i]).collect();
                if !x.contains(s.product_all(&picked).unwrap()).unwrap() {
                    continue 'tuples;
                }
            }
            return Some(tuple);
        }
        None
    }

    #[test]
    fn fp_examples() {
        let s = SemigroupHandle::NatAdd;
        assert_eq!(fp_set(&s, &els(&[1, 2, 4])).unwrap(), els(&[1, 2, 3, 4, 5, 6, 7]).into_iter().collect());
        assert_eq!(fp_set(&s, &els(&[2, 2])).unwrap(), els(&[2, 4]).into_iter().collect());
        let fw = SemigroupHandle::free_word("ab").unwrap();
        let a = fw.parse_element("a").unwrap();
        let b = fw.parse_element("b").unwrap();
        let fp: Vec<String> = fp_set(&fw, &[a, b]).unwrap().iter().map(|&e| fw.display(e)).collect();
        assert_eq!(fp, ["a", "b", "ab"]);
    }

    #[test]
    fn evens_are_ip() {
        let s = SemigroupHandle::NatAdd;
        let evens = SetPredicate::residue(&s, 2, [0]).unwrap();
        let v = ip_witness_bounded(&s, &evens, 4, 64, SearchOptions::default()).unwrap();
        assert_eq!(v.witness().unwrap().basis, els(&[0, 0, 0, 0]));
        let opts = SearchOptions { skip_identity: true, ..Default::default() };
        let v = ip_witness_bounded(&s, &evens, 4, 64, opts).unwrap();
        assert_eq!(v.witness().unwrap().basis, els(&[2, 2, 2, 2]));
        assert!(v.witness().unwrap().recheck(&s, &evens).unwrap());
    }

    #[test]
    fn odds_exhaust() {
        let s = SemigroupHandle::NatAdd;
        let odds = SetPredicate::residue(&s, 2, [1]).unwrap();
        let v = ip_witness_bounded(&s, &odds, 2, 100, SearchOptions::default()).unwrap();
        assert_eq!(v, OracleVerdict::Exhausted(Bounds { k: 2, n: 100, m: None }));
    }

    #[test]
    fn left_zero_singleton_is_ip() {
        let s = SemigroupHandle::FiniteTable(FiniteSemigroup::left_zero(3));
        let a = SetPredicate::finite([Element(0)]);
        let v = ip_witness_bounded(&s, &a, 5, 3, SearchOptions::default()).unwrap();
        assert_eq!(v.witness().unwrap().basis, els(&[0; 5]));
        assert_eq!(v.witness().unwrap().fp, BTreeSet::from([Element(0)]));
    }

    #[test]
    fn iip_examples() {
        let lz = SemigroupHandle::FiniteTable(FiniteSemigroup::left_zero(3));
        let a = SetPredicate::finite([Element(0)]);
        assert!(!iip_witness_bounded(&lz, &a, 5, 2, 3, SearchOptions::default()).unwrap().is_ip());

        let s = SemigroupHandle::NatAdd;
        let evens = SetPredicate::residue(&s, 2, [0]).unwrap();
        let v = iip_witness_bounded(&s, &evens, 3, 7, 64, SearchOptions::default()).unwrap();
        assert_eq!(v.witness().unwrap().basis, els(&[2, 4, 8]));
        let v = iip_witness_bounded(&s, &evens, 3, 8, 64, SearchOptions::default()).unwrap();
        assert_eq!(v, OracleVerdict::Exhausted(Bounds { k: 3, n: 64, m: Some(8) }));
    }

    #[test]
    fn dip_examples() {
        let t = SemigroupHandle::FiniteTable(FiniteSemigroup::cyclic_mul(3));
        assert!(!dip_witness_bounded(&t, &SetPredicate::all(), 4, 3, SearchOptions::default()).unwrap().is_ip());

        let s = SemigroupHandle::NatAdd;
        let threes = SetPredicate::residue(&s, 3, [0]).unwrap();
        for skip in [false, true] {
            let opts = SearchOptions { skip_identity: skip, ..Default::default() };
            let v = dip_witness_bounded(&s, &threes, 3, 100, opts).unwrap();
            let expected = brute_least(&s, &threes, 3, 100, true, skip).unwrap();
            assert_eq!(v.witness().unwrap().basis, expected);
        }

        let fw = SemigroupHandle::free_word("ab").unwrap();
        let starts_a = {
            let fw = fw.clone();
            SetPredicate::from_fn("starts-with-a", move |e| Ok(fw.display(e).starts_with('a')))
        };
        let v = dip_witness_bounded(&fw, &starts_a, 2, 20, SearchOptions::default()).unwrap();
        let shown: Vec<String> = v.witness().unwrap().basis.iter().map(|&e| fw.display(e)).collect();
        assert_eq!(shown, ["a", "aa"]);
        assert!(v.witness().unwrap().recheck(&fw, &starts_a).unwrap());
    }

    #[test]
    fn parallel_matches_sequential() {
        let s = SemigroupHandle::NatAdd;
        let x = SetPredicate::residue(&s, 5, [1, 2, 3, 4]).unwrap();
        for k in 1..=4 {
            let seq = ip_witness_bounded(&s, &x, k, 60, SearchOptions::default()).unwrap();
            let par = ip_witness_bounded(&s, &x, k, 60, SearchOptions { parallel: true, ..Default::default() }).unwrap();
            assert_eq!(seq, par);
            assert_eq!(seq.witness().map(|w| w.basis.clone()), brute_least(&s, &x, k, 12, false, false));
        }
    }

    #[test]
    fn search_matches_brute_force_small() {
        let s = SemigroupHandle::NatAdd;
        for d in 2..=4u64 {
            for mask in 0u32..(1 << d) {
                let x = SetPredicate::residue(&s, d, (0..d).filter(|r| mask & (1 << r) != 0)).unwrap();
                for k in 1..=3 {
                    for skip in [false, true] {
                        let opts = SearchOptions { skip_identity: skip, ..Default::default() };
                        let got = ip_witness_bounded(&s, &x, k, 9, opts).unwrap();
                        assert_eq!(got.witness().map(|w| w.basis.clone()), brute_least(&s, &x, k, 9, false, skip));
                    }
                }
            }
        }
    }

    #[test]
    fn order_three_tables_match_brute_force() {
        for t in FiniteSemigroup::enumerate_all(3) {
            let s = SemigroupHandle::FiniteTable(t);
            for mask in 1u64..8 {
                let x = SetPredicate::finite((0..3).filter(|i| mask & (1 << i) != 0).map(Element));
                for k in 1..=3 {
                    let ip = ip_witness_bounded(&s, &x, k, 3, SearchOptions::default()).unwrap();
                    assert_eq!(ip.witness().map(|w| w.basis.clone()), brute_least(&s, &x, k, 3, false, false));
                    let dip = dip_witness_bounded(&s, &x, k, 3, SearchOptions::default()).unwrap();
                    assert_eq!(dip.witness().map(|w| w.basis.clone()), brute_least(&s, &x, k, 3, true, false));
                }
            }
        }
    }

    #[test]
    fn partition_examples() {
        let s = SemigroupHandle::NatAdd;
        let all = SetPredicate::all();
        let evens = SetPredicate::residue(&s, 2, [0]).unwrap();
        let r = partition_check(&s, &all, &evens, 4, 64, SearchOptions::default()).unwrap();
        assert!(r.y.is_ip());

        let one_mod_3 = SetPredicate::residue(&s, 3, [1]).unwrap();
        let r = partition_check(&s, &all, &one_mod_3, 3, 200, SearchOptions::default()).unwrap();
        assert_eq!(r.y.tag(), "exhausted");
        assert!(r.rest.is_ip());
        assert!(!r.violation_at_bounds);

        let x = SetPredicate::residue(&s, 6, [0, 2, 4]).unwrap();
        let y = SetPredicate::residue(&s, 6, [0]).unwrap();
        let r = partition_check(&s, &x, &y, 3, 300, SearchOptions::default()).unwrap();
        assert!(r.y.is_ip());
        // {2, 4} mod 6 has no zero-sum-free sequence of length 3
        assert_eq!(r.rest.tag(), "exhausted");
        let (ey, er) = r.exact.unwrap();
        assert!(ey.is_ip());
        assert_eq!(er, OracleVerdict::NotIpExact);
    }

    #[test]
    fn partition_requires_subset() {
        let s = SemigroupHandle::NatAdd;
        let evens = SetPredicate::residue(&s, 2, [0]).unwrap();
        let threes = SetPredicate::residue(&s, 3, [0]).unwrap();
        assert_eq!(
            partition_check(&s, &evens, &threes, 2, 10, SearchOptions::default()),
            Err(Error::NotSubset(3))
        );
    }

    #[test]
    fn verdict_json_shape() {
        let v = OracleVerdict::Exhausted(Bounds { k: 3, n: 200, m: None });
        assert_eq!(
            serde_json::to_string(&v).unwrap(),
            r#"{"verdict":"exhausted","basis":[],"fp":[],"bounds":{"k":3,"N":200}}"#
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn subset_products(s: &SemigroupHandle, basis: &[Element]) -> Vec<Element> {
            let k = basis.len();
            (1u32..(1 << k))
                .map(|mask| {
                    let picked: Vec<Element> = (0..k).filter(|i| mask & (1 << i) != 0).map(|i| basis[i]).collect();
                    s.product_all(&picked).unwrap()
                })
                .collect()
        }

        proptest! {
            #[test]
            fn fp_size_bound(basis in proptest::collection::vec(0u64..40, 1..7), which in 0usize..3) {
                let s = match which {
                    0 => SemigroupHandle::NatAdd,
                    1 => SemigroupHandle::free_word("ab").unwrap(),
                    _ => SemigroupHandle::FiniteTable(FiniteSemigroup::cyclic_mul(7)),
                };
                let basis: Vec<Element> = basis.into_iter().map(|i| Element(if which == 2 { i % 7 } else { i })).collect();
                let fp = fp_set(&s, &basis).unwrap();
                let all = subset_products(&s, &basis);
                let distinct: BTreeSet<Element> = all.iter().copied().collect();
                prop_assert!(fp.len() <= (1 << basis.len()) - 1);
                prop_assert_eq!(&fp, &distinct);
                prop_assert_eq!(fp.len() == all.len(), distinct.len() == all.len());
            }

            #[test]
            fn monotone_in_window(d in 2u64..6, mask in 1u32..64, k in 1usize..4, n in 1u64..40, extra in 0u64..40) {
                let s = SemigroupHandle::NatAdd;
                let x = SetPredicate::residue(&s, d, (0..d).filter(|r| mask & (1 << r) != 0)).unwrap();
                let small = ip_witness_bounded(&s, &x, k, n, SearchOptions::default()).unwrap();
                let big = ip_witness_bounded(&s, &x, k, n + extra, SearchOptions::default()).unwrap();
                if small.is_ip() { prop_assert!(big.is_ip()); }
                if !small.is_ip() {
                    let deeper = ip_witness_bounded(&s, &x, k + 1, n, SearchOptions::default()).unwrap();
                    prop_assert!(!deeper.is_ip());
                }
            }
        }
    }
}
