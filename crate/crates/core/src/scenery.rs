use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::walk::Walk;

/// Colors of the integer window [lo, hi], stored densely.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenery {
    pub alphabet_size: u32,
    pub lo: i64,
    pub colors: Vec<u32>,
}

impl Scenery {
    pub fn new(alphabet_size: u32, lo: i64, colors: Vec<u32>) -> Result<Self> {
        if alphabet_size < 2 {
            return Err(Error::InvalidParams("alphabet size must be at least 2".into()));
        }
        if colors.is_empty() {
            return Err(Error::InvalidParams("scenery window is empty".into()));
        }
        if let Some(c) = colors.iter().find(|&&c| c >= alphabet_size) {
            return Err(Error::InvalidParams(format!("color {c} outside alphabet of size {alphabet_size}")));
        }
        Ok(Scenery { alphabet_size, lo, colors })
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.colors.len() as i64 - 1
    }

    pub fn get(&self, site: i64) -> Option<u32> {
        if site < self.lo {
            return None;
        }
        self.colors.get((site - self.lo) as usize).copied()
    }

    pub fn color(&self, site: i64) -> Result<u32> {
        self.get(site).ok_or(Error::WindowTooSmall { lo: self.lo, hi: self.hi(), site })
    }
}

pub fn sample_scenery<R: Rng>(rng: &mut R, alphabet_size: u32, lo: i64, hi: i64) -> Result<Scenery> {
    if hi < lo {
        return Err(Error::InvalidParams(format!("empty window [{lo}, {hi}]")));
    }
    if alphabet_size < 2 {
        return Err(Error::InvalidParams("alphabet size must be at least 2".into()));
    }
    let colors = (lo..=hi).map(|_| rng.random_range(0..alphabet_size)).collect();
    Scenery::new(alphabet_size, lo, colors)
}

/// A scenery covering everything the walk visits.
pub fn sample_scenery_for<R: Rng>(rng: &mut R, alphabet_size: u32, walk: &Walk) -> Result<Scenery> {
    let (lo, hi) = walk.visited_range(0, walk.len());
    sample_scenery(rng, alphabet_size, lo, hi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub step: i8,
    pub color: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub alphabet_size: u32,
    pub entries: Vec<RecordEntry>,
}

impl Record {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// The step projection of the record.
    pub fn walk(&self) -> Walk {
        Walk::from_steps(self.entries.iter().map(|e| e.step).collect()).expect("record steps are +-1")
    }
}

/// x(t) = (w(t), sigma(X_t)) for t < len(w).
pub fn make_record(walk: &Walk, scenery: &Scenery) -> Result<Record> {
    let mut entries = Vec::with_capacity(walk.len());
    for t in 0..walk.len() {
        let color = scenery.color(walk.trace()[t])?;
        entries.push(RecordEntry { step: walk.steps()[t], color });
    }
    Ok(Record { alphabet_size: scenery.alphabet_size, entries })
}

/// Sites recovered from a truthful record, site -> color.
pub fn read_back(record: &Record) -> HashMap<i64, u32> {
    let walk = record.walk();
    let mut out = HashMap::new();
    for (t, e) in record.entries.iter().enumerate() {
        out.insert(walk.trace()[t], e.color);
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorSet {
    pub e: Vec<usize>,
    pub e_plus: Vec<usize>,
    pub e_minus: Vec<usize>,
}

impl ErrorSet {
    /// Positionwise diff of two records of equal length.
    pub fn from_diff(x: &Record, xp: &Record) -> Result<Self> {
        if x.len() != xp.len() {
            return Err(Error::LengthMismatch(x.len(), xp.len()));
        }
        let e = (0..x.len()).filter(|&t| x.entries[t] != xp.entries[t]).collect();
        let steps: Vec<i8> = x.entries.iter().map(|e| e.step).collect();
        let steps_p: Vec<i8> = xp.entries.iter().map(|e| e.step).collect();
        let (e_plus, e_minus) = classify_errors(&steps, &steps_p)?;
        Ok(ErrorSet { e, e_plus, e_minus })
    }

    pub fn len(&self) -> usize {
        self.e.len()
    }

    pub fn is_empty(&self) -> bool {
        self.e.is_empty()
    }

    /// Indicator vector of E over 0..n.
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &t in &self.e {
            if t < n {
                m[t] = true;
            }
        }
        m
    }

    /// Prefix sums of (1[E+] - 1[E-]) over 0..=n.
    pub fn signed_prefix(&self, n: usize) -> Vec<i64> {
        let mut d = vec![0i64; n];
        for &t in &self.e_plus {
            d[t] += 1;
        }
        for &t in &self.e_minus {
            d[t] -= 1;
        }
        let mut p = Vec::with_capacity(n + 1);
        let mut acc = 0;
        p.push(0);
        for v in d {
            acc += v;
            p.push(acc);
        }
        p
    }
}

/// E+ = {t : (w(t), w'(t)) = (+1, -1)}, E- = {t : (w(t), w'(t)) = (-1, +1)}.
pub fn classify_errors(original: &[i8], corrupted: &[i8]) -> Result<(Vec<usize>, Vec<usize>)> {
    if original.len() != corrupted.len() {
        return Err(Error::LengthMismatch(original.len(), corrupted.len()));
    }
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (t, (&a, &b)) in original.iter().zip(corrupted).enumerate() {
        match (a, b) {
            (1, -1) => plus.push(t),
            (-1, 1) => minus.push(t),
            _ => {}
        }
    }
    Ok((plus, minus))
}

fn budget(delta: f64, n: usize) -> usize {
    assert!((0.0..1.0).contains(&delta), "delta must lie in [0, 1)");
    (delta * n as f64).floor() as usize
}

fn other_color<R: Rng>(rng: &mut R, c: u32, alphabet_size: u32) -> u32 {
    let shift = rng.random_range(1..alphabet_size);
    (c + shift) % alphabet_size
}

/// Rewrites floor(delta N) distinct uniformly chosen entries; each gets its
/// step flipped, its color changed, or both, with equal odds.
pub fn corrupt_random<R: Rng>(rng: &mut R, record: &Record, delta: f64) -> (Record, ErrorSet) {
    let n = record.len();
    let b = budget(delta, n).min(n);
    let mut out = record.clone();
    if b > 0 {
        for t in sample(rng, n, b).into_iter() {
            let e = &mut out.entries[t];
            match rng.random_range(0..3u8) {
                0 => e.step = -e.step,
                1 => e.color = other_color(rng, e.color, record.alphabet_size),
                _ => {
                    e.step = -e.step;
                    e.color = other_color(rng, e.color, record.alphabet_size);
                }
            }
        }
    }
    let errors = ErrorSet::from_diff(record, &out).expect("equal lengths");
    (out, errors)
}

/// Local time of each site over times 0..n-1, as (site, visits) sorted by
/// ascending visits then site.
pub fn local_times(walk: &Walk) -> Vec<(i64, usize)> {
    let mut counts: HashMap<i64, usize> = HashMap::new();
    for &x in &walk.trace()[..walk.len()] {
        *counts.entry(x).or_default() += 1;
    }
    let mut v: Vec<_> = counts.into_iter().collect();
    v.sort_by_key(|&(x, c)| (c, x));
    v
}

/// Flips the observed color at every visit to the least visited sites,
/// stopping at the first site whose visits no longer fit the budget.
pub fn corrupt_least_visited(record: &Record, walk: &Walk, delta: f64) -> Result<(Record, ErrorSet)> {
    if record.len() != walk.len() {
        return Err(Error::LengthMismatch(record.len(), walk.len()));
    }
    let n = record.len();
    let mut left = budget(delta, n);
    let mut out = record.clone();
    let mut chosen = Vec::new();
    for (site, visits) in local_times(walk) {
        if visits > left {
            break;
        }
        left -= visits;
        chosen.push(site);
    }
    chosen.sort_unstable();
    for t in 0..n {
        if chosen.binary_search(&walk.trace()[t]).is_ok() {
            let e = &mut out.entries[t];
            e.color = (e.color + 1) % record.alphabet_size;
        }
    }
    let errors = ErrorSet::from_diff(record, &out)?;
    Ok((out, errors))
}
