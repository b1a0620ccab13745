//! Constructive search for a satisfied test, following the existence
//! argument level by level.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use serde::Serialize;

use crate::badsets::BadSetReport;
use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::params::{density_growth, DeskView};
use crate::scenery::ErrorSet;
use crate::testset::{reconstructed_size, Branch, Test, TestTree};
use crate::walk::Walk;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum FindFailure {
    DensityTooLarge,
    PremiseViolated { bad: usize, size: usize },
    FewDistinctPositions { m: usize, j: usize, found: usize, needed: usize },
    FewDisjointIntervals { m: usize, j: usize, found: usize, needed: usize },
    SubtestFailed { m: usize, j: usize, found: usize, needed: usize, inner: Box<FindFailure> },
}

impl std::fmt::Display for FindFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FindFailure::DensityTooLarge => write!(f, "density parameter is not below the inverse growth product"),
            FindFailure::PremiseViolated { bad, size } => {
                write!(f, "premise violated: {bad} bad or corrupted indices in a block of {size}")
            }
            FindFailure::FewDistinctPositions { m, j, found, needed } => {
                write!(f, "level {m} block {j}: {found} distinct reduced positions, need {needed}")
            }
            FindFailure::FewDisjointIntervals { m, j, found, needed } => {
                write!(f, "level {m} block {j}: {found} disjoint scenery intervals, need {needed}")
            }
            FindFailure::SubtestFailed { m, j, found, needed, inner } => {
                write!(f, "level {m} block {j}: {found} of {needed} sub-tests built; last failure: {inner}")
            }
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Found {
    pub tree: TestTree,
    /// Pairs relative to the block start.
    pub test: Test,
    /// Ground time of the block start.
    pub start: usize,
}

/// Prefix counts shared by every recursive call on one walk.
pub struct FinderContext<'a> {
    h: &'a Hierarchy,
    p: &'a DeskView,
    /// Prefix count of ground indices that are lifted-bad or corrupted, length n + 2.
    bad_prefix: Vec<usize>,
    signed: Vec<i64>,
}

impl<'a> FinderContext<'a> {
    pub fn new(h: &'a Hierarchy, p: &'a DeskView, report: &BadSetReport, errors: &ErrorSet) -> Self {
        let n = h.ground_walk().len();
        let emask = errors.mask(n);
        let mut bad_prefix = Vec::with_capacity(n + 2);
        bad_prefix.push(0);
        let mut acc = 0;
        for (i, &e) in emask.iter().enumerate() {
            if e || report.union_ground.contains(i) {
                acc += 1;
            }
            bad_prefix.push(acc);
        }
        bad_prefix.push(acc);
        FinderContext { h, p, bad_prefix, signed: errors.signed_prefix(n) }
    }

    /// Bad or corrupted indices in lo..=hi.
    fn bad_closed(&self, lo: usize, hi: usize) -> usize {
        self.bad_prefix[hi + 1] - self.bad_prefix[lo]
    }

    fn bad_open(&self, lo: usize, hi: usize) -> usize {
        self.bad_prefix[hi] - self.bad_prefix[lo]
    }

    fn below(count: usize, size: usize, a: &BigRational) -> bool {
        BigRational::from_integer(BigInt::from(count)) < a * BigRational::from_integer(BigInt::from(size))
    }

    /// Level-m test for block j, with density parameter `a`.
    pub fn find(&self, m: usize, j: usize, a: &BigRational) -> Result<std::result::Result<Found, FindFailure>> {
        if m == 0 || m > self.p.k || m > self.h.top() {
            return Err(Error::LevelOutOfRange { m, k: self.p.k.min(self.h.top()) });
        }
        let len = self.h.level_length(m);
        if j >= len {
            return Err(Error::IntervalOutOfRange { m, j, len });
        }
        let start = self.h.ground_embedding(m)[j];
        if a * density_growth(m) >= BigRational::one() {
            return Ok(Err(FindFailure::DensityTooLarge));
        }
        let r = self.h.ground_block(m, j);
        let bad = self.bad_open(r.start, r.end);
        if !Self::below(bad, r.len(), a) {
            return Ok(Err(FindFailure::PremiseViolated { bad, size: r.len() }));
        }
        Ok(self.build(m, j, a).map(|tree| Found { test: tree.flatten(), tree, start }))
    }

    fn build(&self, m: usize, j: usize, a: &BigRational) -> std::result::Result<TestTree, FindFailure> {
        if m == 1 {
            return Ok(TestTree::Leaf);
        }
        let p = self.p;
        let h = self.h;
        let need = p.branching[m];
        let m2 = BigInt::from((m * m) as u64);
        let relaxed = a * BigRational::new(&m2 + 1, m2);
        let block = h.reduced_block(m, j);
        let lower = h.ground_embedding(m - 1);
        let pos = h.level_walk(m - 1).trace();
        let ground = h.ground_walk().trace();
        let base = h.ground_embedding(m)[j];
        let mu = p.m_upper[m - 1];

        // first index of each distinct reduced position among admissible indices
        let mut seen = HashSet::new();
        let mut cands = Vec::new();
        for i in block.start + 1..block.end {
            let (lo, hi) = (lower[i], lower[i + 1]);
            let size = hi - lo + 1;
            if !Self::below(self.bad_closed(lo, hi), size, &relaxed) {
                continue;
            }
            if m == 2 && !(p.m_lower[0] as usize <= size && size as u64 <= p.m_upper[0]) {
                continue;
            }
            let t = lo - base;
            let delta = self.signed[lo] - self.signed[base];
            if t as u64 > mu || delta.unsigned_abs() > mu {
                continue;
            }
            if seen.insert(pos[i]) {
                let (smin, smax) = range_of(&ground[lo..=hi]);
                cands.push(Cand { i, t, delta, smin, smax });
            }
        }
        if cands.len() < 2 * need {
            return Err(FindFailure::FewDistinctPositions { m, j, found: cands.len(), needed: 2 * need });
        }
        cands.sort_by_key(|c| (c.smax, c.smin, c.i));
        let mut chosen: Vec<Branch> = Vec::with_capacity(need);
        let mut last_max: Option<i64> = None;
        let mut sub_fail = None;
        for c in &cands {
            if chosen.len() == need {
                break;
            }
            if last_max.is_some_and(|x| c.smin <= x) {
                continue;
            }
            match self.build(m - 1, c.i, &relaxed) {
                Ok(sub) => {
                    last_max = Some(c.smax);
                    chosen.push(Branch { t: c.t, delta: c.delta, sub });
                }
                Err(e) => sub_fail = Some(e),
            }
        }
        if chosen.len() < need {
            let found = chosen.len();
            return Err(match sub_fail {
                Some(inner) => FindFailure::SubtestFailed { m, j, found, needed: need, inner: Box::new(inner) },
                None => FindFailure::FewDisjointIntervals { m, j, found, needed: need },
            });
        }
        chosen.sort_by_key(|b| b.t);
        Ok(TestTree::Node(chosen))
    }
}

struct Cand {
    i: usize,
    t: usize,
    delta: i64,
    smin: i64,
    smax: i64,
}

fn range_of(xs: &[i64]) -> (i64, i64) {
    xs.iter().fold((i64::MAX, i64::MIN), |(a, b), &x| (a.min(x), b.max(x)))
}

/// One-shot wrapper around [`FinderContext::find`].
pub fn find_satisfied_test(
    h: &Hierarchy,
    p: &DeskView,
    report: &BadSetReport,
    errors: &ErrorSet,
    m: usize,
    j: usize,
    a: &BigRational,
) -> Result<std::result::Result<Found, FindFailure>> {
    FinderContext::new(h, p, report, errors).find(m, j, a)
}

#[derive(Clone, Debug, Serialize)]
pub struct PairCheck {
    pub t: usize,
    pub delta: i64,
    pub delta_identity: bool,
    pub delta_positions: bool,
    pub error_density: bool,
    pub length_bounds: bool,
    /// None when the corollary's threshold is not met.
    pub error_free: Option<bool>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TestReport {
    pub pairs: Vec<PairCheck>,
    pub delta_identity: bool,
    pub delta_positions: bool,
    pub error_density: bool,
    pub length_bounds: bool,
    pub disjoint: bool,
    pub size_ok: bool,
    pub reconstructed_size: usize,
    pub size_floor: usize,
    pub expected_size: bool,
    /// Applies when prod (1 + 1/r^2) alpha M_upper_1 < 1.
    pub corollary_applies: bool,
    pub error_free: bool,
}

impl TestReport {
    pub fn all_pass(&self) -> bool {
        self.delta_identity
            && self.delta_positions
            && self.error_density
            && self.length_bounds
            && self.disjoint
            && self.size_ok
            && self.expected_size
            && self.error_free
    }

    /// Names of failing clauses.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        for (ok, name) in [
            (self.delta_identity, "delta_identity"),
            (self.delta_positions, "delta_positions"),
            (self.error_density, "error_density"),
            (self.length_bounds, "length_bounds"),
            (self.disjoint, "disjoint"),
            (self.size_ok, "size"),
            (self.expected_size, "test_size"),
            (self.error_free, "error_free"),
        ] {
            if !ok {
                out.push(name);
            }
        }
        out
    }
}

/// Checks every conclusion for a test on block (m, j) independently.
#[allow(clippy::too_many_arguments)]
pub fn verify_test_properties(
    walk: &Walk,
    corrupted: &Walk,
    p: &DeskView,
    test: &Test,
    errors: &ErrorSet,
    a: &BigRational,
    m: usize,
    j: usize,
) -> Result<TestReport> {
    if walk.len() != corrupted.len() {
        return Err(Error::LengthMismatch(walk.len(), corrupted.len()));
    }
    let h = Hierarchy::build(walk, &p.l[..m])?;
    let len = h.level_length(m);
    if j >= len {
        return Err(Error::IntervalOutOfRange { m, j, len });
    }
    let i0 = h.ground_embedding(m)[j];
    let n = walk.len();
    let l1 = p.l[0];
    let signed = errors.signed_prefix(n);
    let emask = errors.mask(n);
    let growth = density_growth(m) * a;
    let corollary_applies = &growth * BigRational::from_integer(BigInt::from(p.m_upper[0])) < BigRational::one();
    let mut pairs = Vec::new();
    let mut ranges = Vec::new();
    for pr in &test.pairs {
        let s = i0 + pr.t;
        if s > n {
            return Err(Error::TimeOutOfRange { t: s, n });
        }
        let e = walk.next_crossing(l1, s);
        let size = e - s + 1;
        let ecount = (s..=e).filter(|&t| t < n && emask[t]).count();
        let delta_identity = pr.delta == 2 * (signed[s] - signed[i0]);
        let delta_positions = walk.trace()[s] - walk.trace()[i0] == corrupted.trace()[s] - corrupted.trace()[i0] + pr.delta;
        let error_density = BigRational::from_integer(BigInt::from(ecount))
            < &growth * BigRational::from_integer(BigInt::from(size));
        let length_bounds = p.m_lower[0] as usize <= size && size as u64 <= p.m_upper[0];
        let error_free = corollary_applies.then_some(ecount == 0);
        ranges.push(range_of(&walk.trace()[s..=e]));
        pairs.push(PairCheck { t: pr.t, delta: pr.delta, delta_identity, delta_positions, error_density, length_bounds, error_free });
    }
    ranges.sort();
    let disjoint = ranges.windows(2).all(|w| w[0].1 < w[1].0);
    let shifted = test.shifted(i0);
    let rsize = reconstructed_size(&shifted, corrupted, l1);
    let floor = l1 as usize * test.size();
    let expected: usize = (2..=m).map(|r| p.branching[r]).product();
    Ok(TestReport {
        delta_identity: pairs.iter().all(|c| c.delta_identity),
        delta_positions: pairs.iter().all(|c| c.delta_positions),
        error_density: pairs.iter().all(|c| c.error_density),
        length_bounds: pairs.iter().all(|c| c.length_bounds),
        error_free: pairs.iter().all(|c| c.error_free != Some(false)),
        pairs,
        disjoint,
        size_ok: rsize >= floor,
        reconstructed_size: rsize,
        size_floor: floor,
        expected_size: test.size() == expected,
        corollary_applies,
    })
}
