use std::collections::{BTreeMap, BTreeSet, HashSet};

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::DeskView;
use crate::scenery::{Record, Scenery};
use crate::walk::Walk;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub t: usize,
    pub delta: i64,
}

/// A sequence of (time offset, scenery offset) pairs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Test {
    pub pairs: Vec<Pair>,
}

impl Test {
    pub fn new(pairs: Vec<(usize, i64)>) -> Self {
        Test { pairs: pairs.into_iter().map(|(t, delta)| Pair { t, delta }).collect() }
    }

    pub fn size(&self) -> usize {
        self.pairs.len()
    }

    /// The same pairs with every time moved by `by`.
    pub fn shifted(&self, by: usize) -> Test {
        Test { pairs: self.pairs.iter().map(|p| Pair { t: p.t + by, delta: p.delta }).collect() }
    }
}

/// The recursive shape of a test: a level-1 leaf or B_m offset branches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestTree {
    Leaf,
    Node(Vec<Branch>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Branch {
    pub t: usize,
    /// Undoubled scenery offset of this branch.
    pub delta: i64,
    pub sub: TestTree,
}

impl TestTree {
    pub fn flatten(&self) -> Test {
        let mut pairs = Vec::new();
        self.flatten_into(0, 0, &mut pairs);
        Test { pairs }
    }

    fn flatten_into(&self, t0: usize, d0: i64, out: &mut Vec<Pair>) {
        match self {
            TestTree::Leaf => out.push(Pair { t: t0, delta: d0 }),
            TestTree::Node(bs) => {
                for b in bs {
                    b.sub.flatten_into(t0 + b.t, d0 + 2 * b.delta, out);
                }
            }
        }
    }

    /// Structural membership in the level-m test family.
    pub fn is_member(&self, p: &DeskView, m: usize) -> bool {
        match self {
            TestTree::Leaf => m == 1,
            TestTree::Node(bs) => {
                if m < 2 || m > p.k || bs.len() != p.branching[m] {
                    return false;
                }
                let mu = p.m_upper[m - 1];
                let ts: HashSet<usize> = bs.iter().map(|b| b.t).collect();
                ts.len() == bs.len()
                    && bs.iter().all(|b| {
                        b.t >= 1 && b.t as u64 <= mu && b.delta.unsigned_abs() <= mu && b.sub.is_member(p, m - 1)
                    })
            }
        }
    }
}

/// B_2...B_m.
pub fn lambda_size(p: &DeskView, m: usize) -> usize {
    (2..=m).map(|r| p.branching[r]).product()
}

/// Upper count of level-m tests: U_1 = 1, U_m = M!/(M-B)! (2M+1)^B U_{m-1}^B,
/// exact at m = 2.
pub fn predicted_count(p: &DeskView, m: usize) -> BigUint {
    let mut u = BigUint::one();
    for r in 2..=m {
        let mu = p.m_upper[r - 1];
        let b = p.branching[r] as u64;
        u = crate::params::lambda2_count(mu, b) * num_traits::Pow::pow(&u, b);
    }
    u
}

/// Exhaustive list of level-m tests, refused when the predicted count exceeds `cap`.
pub fn enumerate_tests(p: &DeskView, m: usize, cap: u64) -> Result<Vec<Test>> {
    if m == 0 || m > p.k {
        return Err(Error::LevelOutOfRange { m, k: p.k });
    }
    let pred = predicted_count(p, m);
    if pred > BigUint::from(cap) {
        return Err(Error::CapExceeded { bound: pred.to_string(), cap });
    }
    let mut cur = vec![Test::new(vec![(0, 0)])];
    for r in 2..=m {
        let mu = p.m_upper[r - 1] as usize;
        let b = p.branching[r];
        let mut next = Vec::new();
        let mut seen = HashSet::new();
        let mut ts = Vec::with_capacity(b);
        let mut choice = Vec::with_capacity(b);
        extend(&cur, mu, b, &mut ts, &mut choice, &mut |pairs: Vec<Pair>| {
            let t = Test { pairs };
            if r == 2 || seen.insert(t.clone()) {
                next.push(t);
            }
        });
        cur = next;
    }
    Ok(cur)
}

fn extend(
    prev: &[Test],
    mu: usize,
    b: usize,
    ts: &mut Vec<usize>,
    choice: &mut Vec<(usize, i64, usize)>,
    emit: &mut dyn FnMut(Vec<Pair>),
) {
    if choice.len() == b {
        let mut pairs = Vec::new();
        for &(t, d, idx) in choice.iter() {
            for q in &prev[idx].pairs {
                pairs.push(Pair { t: q.t + t, delta: q.delta + 2 * d });
            }
        }
        emit(pairs);
        return;
    }
    let mi = mu as i64;
    for t in 1..=mu {
        if ts.contains(&t) {
            continue;
        }
        ts.push(t);
        for d in -mi..=mi {
            for idx in 0..prev.len() {
                choice.push((t, d, idx));
                extend(prev, mu, b, ts, choice, emit);
                choice.pop();
            }
        }
        ts.pop();
    }
}

/// Times t_i..=next(w', L1, t_i) of one pair, excluding the record end.
fn window(w: &Walk, l1: u64, t: usize) -> std::ops::RangeInclusive<usize> {
    t..=w.next_crossing(l1, t)
}

/// Every record time in every pair's window agrees with the scenery at the shifted site.
pub fn passes_test(record: &Record, scenery: &Scenery, test: &Test, l1: u64) -> Result<bool> {
    let w = record.walk();
    let n = w.len();
    for p in &test.pairs {
        if p.t > n {
            return Err(Error::TimeOutOfRange { t: p.t, n });
        }
        for t in window(&w, l1, p.t) {
            if t >= n {
                continue;
            }
            let site = w.trace()[t] + p.delta;
            if scenery.color(site)? != record.entries[t].color {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Sites X'_t + delta_i over every pair's window, including X'_N when a window reaches it.
pub fn reconstructed_sites(test: &Test, w: &Walk, l1: u64) -> BTreeSet<i64> {
    let mut out = BTreeSet::new();
    for p in &test.pairs {
        if p.t > w.len() {
            continue;
        }
        for t in window(w, l1, p.t) {
            out.insert(w.trace()[t] + p.delta);
        }
    }
    out
}

pub fn reconstructed_size(test: &Test, w: &Walk, l1: u64) -> usize {
    reconstructed_sites(test, w, l1).len()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Conflict {
    pub site: i64,
    pub existing: u32,
    pub incoming: u32,
    pub pair: usize,
    pub t: usize,
}

/// Scenery suggestion written by a test; the first write to a site wins.
#[derive(Clone, Debug, Default, Serialize)]
pub struct PartialScenery {
    pub assignments: BTreeMap<i64, u32>,
    /// site -> (pair index, record time) of the first write.
    pub provenance: BTreeMap<i64, (usize, usize)>,
    pub conflicts: Vec<Conflict>,
}

impl PartialScenery {
    pub fn domain_size(&self) -> usize {
        self.assignments.len()
    }

    /// Sites where the suggestion differs from `truth` (or truth is unknown).
    pub fn disagreements(&self, truth: &Scenery) -> Vec<i64> {
        self.assignments.iter().filter(|&(&x, &c)| truth.get(x) != Some(c)).map(|(&x, _)| x).collect()
    }
}

pub fn apply_test(record: &Record, test: &Test, l1: u64) -> PartialScenery {
    let w = record.walk();
    let n = w.len();
    let mut ps = PartialScenery::default();
    for (i, p) in test.pairs.iter().enumerate() {
        if p.t > n {
            continue;
        }
        for t in window(&w, l1, p.t) {
            if t >= n {
                continue;
            }
            let site = w.trace()[t] + p.delta;
            let c = record.entries[t].color;
            match ps.assignments.get(&site) {
                Some(&old) if old != c => {
                    ps.conflicts.push(Conflict { site, existing: old, incoming: c, pair: i, t })
                }
                Some(_) => {}
                None => {
                    ps.assignments.insert(site, c);
                    ps.provenance.insert(site, (i, t));
                }
            }
        }
    }
    ps
}

/// ln of the recursive count bound, in f64 for quick comparisons.
pub fn lambda_count_ln_bound(p: &DeskView, m: usize) -> f64 {
    let mut v = 0.0;
    for r in 2..=m {
        v = p.branching[r] as f64 * (3.0 * (p.m_upper[r - 1] as f64).ln() + v);
    }
    v
}

pub fn count_to_f64_ln(c: &BigUint) -> f64 {
    c.to_f64().map(f64::ln).unwrap_or_else(|| crate::bigreal::ln_f64(c))
}
