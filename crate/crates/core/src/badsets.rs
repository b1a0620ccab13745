use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hierarchy::Hierarchy;
use crate::params::DeskView;
use crate::walk::{is_stopped, Walk};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Classifier {
    Upper,
    RedUpper,
    Lower,
    RedLower,
    Length,
    RedLength,
    Local,
    All,
}

impl Classifier {
    pub const EVERY: [Classifier; 8] = [
        Classifier::Upper,
        Classifier::RedUpper,
        Classifier::Lower,
        Classifier::RedLower,
        Classifier::Length,
        Classifier::RedLength,
        Classifier::Local,
        Classifier::All,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Classifier::Upper => "upper",
            Classifier::RedUpper => "redUpper",
            Classifier::Lower => "lower",
            Classifier::RedLower => "redLower",
            Classifier::Length => "length",
            Classifier::RedLength => "redLength",
            Classifier::Local => "local",
            Classifier::All => "all",
        }
    }

    fn idx(self) -> usize {
        self as usize
    }
}

/// Sorted, disjoint, non-adjacent half-open runs.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Blocks {
    runs: Vec<Range<usize>>,
}

impl Blocks {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a run that starts at or after the end of the last one.
    pub fn push(&mut self, r: Range<usize>) {
        if r.is_empty() {
            return;
        }
        if let Some(last) = self.runs.last_mut() {
            assert!(r.start >= last.end, "runs must be pushed in order");
            if r.start == last.end {
                last.end = r.end;
                return;
            }
        }
        self.runs.push(r);
    }

    pub fn from_indices(idx: &[usize]) -> Self {
        let mut b = Blocks::new();
        for &i in idx {
            b.push(i..i + 1);
        }
        b
    }

    pub fn runs(&self) -> &[Range<usize>] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.iter().map(|r| r.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        let p = self.runs.partition_point(|r| r.end <= i);
        p < self.runs.len() && self.runs[p].start <= i
    }

    pub fn indices(&self) -> Vec<usize> {
        self.runs.iter().flat_map(|r| r.clone()).collect()
    }

    pub fn union(&self, o: &Blocks) -> Blocks {
        let mut all: Vec<Range<usize>> = self.runs.iter().chain(&o.runs).cloned().collect();
        all.sort_by_key(|r| r.start);
        let mut out: Vec<Range<usize>> = Vec::new();
        for r in all {
            match out.last_mut() {
                Some(last) if r.start <= last.end => last.end = last.end.max(r.end),
                _ => out.push(r),
            }
        }
        Blocks { runs: out }
    }

    pub fn complement(&self, total: usize) -> Blocks {
        let mut out = Blocks::new();
        let mut at = 0;
        for r in &self.runs {
            out.push(at..r.start);
            at = r.end;
        }
        out.push(at..total);
        out
    }

    /// Number of members in `r`.
    pub fn count_in(&self, r: Range<usize>) -> usize {
        let first = self.runs.partition_point(|b| b.end <= r.start);
        self.runs[first..]
            .iter()
            .take_while(|b| b.start < r.end)
            .map(|b| b.end.min(r.end) - b.start.max(r.start))
            .sum()
    }
}

/// Per-classifier bad index sets at one level.
#[derive(Clone, Debug, Serialize)]
pub struct LevelBad {
    pub m: usize,
    pub len: usize,
    sets: [Vec<usize>; 8],
    pub mlt: Vec<usize>,
}

impl LevelBad {
    pub fn set(&self, c: Classifier) -> &[usize] {
        &self.sets[c.idx()]
    }

    pub fn is_bad(&self, j: usize) -> bool {
        self.sets[Classifier::All.idx()].binary_search(&j).is_ok()
    }

    /// Complement of a bad set within 0..len.
    pub fn good(&self, c: Classifier) -> Vec<usize> {
        let bad = self.set(c);
        (0..self.len).filter(|j| bad.binary_search(j).is_err()).collect()
    }
}

fn union_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) if x < y => {
                i += 1;
                x
            }
            (Some(&x), Some(&y)) if x > y => {
                j += 1;
                y
            }
            (Some(&x), Some(_)) => {
                i += 1;
                j += 1;
                x
            }
            (Some(&x), None) => {
                i += 1;
                x
            }
            (None, Some(&y)) => {
                j += 1;
                y
            }
            (None, None) => unreachable!(),
        };
        out.push(x);
    }
    out
}

/// Max local time of the level-(m-1) walk over the times of I_{m,j}.
pub fn mlt(h: &Hierarchy, m: usize, j: usize) -> Result<usize> {
    if m == 0 || m > h.top() {
        return Err(Error::LevelOutOfRange { m, k: h.top() });
    }
    let r = h.interval(m, j, m - 1)?;
    let trace = h.level_walk(m - 1).trace();
    let l = h.scales()[m - 1] as i64;
    let mut counts = vec![0usize; (2 * l - 1) as usize];
    Ok(block_mlt(trace, r, l, &mut counts))
}

fn block_mlt(trace: &[i64], r: Range<usize>, l: i64, counts: &mut [usize]) -> usize {
    // every position before the crossing stays within l-1 of the block start
    let base = trace[r.start] - (l - 1);
    let mut best = 0;
    for &x in &trace[r.clone()] {
        let c = &mut counts[(x - base) as usize];
        *c += 1;
        best = best.max(*c);
    }
    for &x in &trace[r] {
        counts[(x - base) as usize] = 0;
    }
    best
}

/// All seven classifiers at level m.
pub fn classify_level(h: &Hierarchy, p: &DeskView, m: usize) -> Result<LevelBad> {
    if m == 0 || m > h.top() || m > p.k {
        return Err(Error::LevelOutOfRange { m, k: h.top().min(p.k) });
    }
    let i = m - 1;
    let len = h.level_length(m);
    let ground = h.ground_embedding(m);
    let down = h.down_embedding(m);
    let trace = h.level_walk(m - 1).trace();
    let l = p.l[i] as i64;
    let (bn, bd) = p.beta[i];
    let mut counts = vec![0usize; (2 * l - 1) as usize];
    let mut sets: [Vec<usize>; 8] = Default::default();
    let mut mlts = Vec::with_capacity(len);
    for j in 0..len {
        let g = (ground[j + 1] - ground[j]) as u64;
        let red = down[j]..down[j + 1];
        let rl = red.len() as u64;
        if g > p.m_upper[i] {
            sets[Classifier::Upper.idx()].push(j);
        }
        if g < p.m_lower[i] {
            sets[Classifier::Lower.idx()].push(j);
        }
        if rl > p.r_upper[i] {
            sets[Classifier::RedUpper.idx()].push(j);
        }
        if rl < p.r_lower[i] {
            sets[Classifier::RedLower.idx()].push(j);
        }
        let v = block_mlt(trace, red, l, &mut counts);
        mlts.push(v);
        // MLT > (beta/2)|I|  <=>  2 MLT den > num |I|
        if 2 * v as u128 * bd > bn * rl as u128 {
            sets[Classifier::Local.idx()].push(j);
        }
    }
    sets[Classifier::Length.idx()] = union_sorted(&sets[Classifier::Upper.idx()], &sets[Classifier::Lower.idx()]);
    sets[Classifier::RedLength.idx()] =
        union_sorted(&sets[Classifier::RedUpper.idx()], &sets[Classifier::RedLower.idx()]);
    let len_all = union_sorted(&sets[Classifier::Length.idx()], &sets[Classifier::RedLength.idx()]);
    sets[Classifier::All.idx()] = union_sorted(&len_all, &sets[Classifier::Local.idx()]);
    Ok(LevelBad { m, len, sets, mlt: mlts })
}

/// Union of I_{m,j}^{m'} over j in `idx` (sorted).
pub fn lift(h: &Hierarchy, m: usize, mp: usize, idx: &[usize]) -> Result<Blocks> {
    let mut b = Blocks::new();
    for &j in idx {
        b.push(h.interval(m, j, mp)?);
    }
    Ok(b)
}

#[derive(Clone, Debug, Serialize)]
pub struct BadSetReport {
    pub levels: Vec<LevelBad>,
    /// `lifted[m-1][c]`: ground lift of classifier c at level m.
    lifted: Vec<Vec<Blocks>>,
    pub union_ground: Blocks,
    pub ground_len: usize,
}

impl BadSetReport {
    pub fn build(h: &Hierarchy, p: &DeskView) -> Result<Self> {
        let mut levels = Vec::new();
        let mut lifted = Vec::new();
        let mut union_ground = Blocks::new();
        for m in 1..=p.k {
            let lb = classify_level(h, p, m)?;
            let lifts = Classifier::EVERY
                .iter()
                .map(|&c| lift(h, m, 0, lb.set(c)))
                .collect::<Result<Vec<_>>>()?;
            union_ground = union_ground.union(&lifts[Classifier::All.idx()]);
            lifted.push(lifts);
            levels.push(lb);
        }
        Ok(BadSetReport { levels, lifted, union_ground, ground_len: h.ground_walk().len() })
    }

    pub fn level(&self, m: usize) -> &LevelBad {
        &self.levels[m - 1]
    }

    pub fn lifted(&self, m: usize, c: Classifier) -> &Blocks {
        &self.lifted[m - 1][c.idx()]
    }

    pub fn is_bad(&self, m: usize, j: usize) -> bool {
        self.level(m).is_bad(j)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Sinuosity {
    pub sinuous: bool,
    pub union_size: usize,
    pub len: usize,
    /// 10 alpha len as a float, for display.
    pub threshold: f64,
    pub per_level_lifted: Vec<usize>,
}

/// |union of lifted bad sets| < 10 alpha len, decided exactly.
pub fn sinuosity(report: &BadSetReport, p: &DeskView) -> Sinuosity {
    let (an, ad) = p.alpha;
    let u = report.union_ground.len();
    let n = report.ground_len;
    Sinuosity {
        sinuous: (u as u128) * ad < 10 * an * n as u128,
        union_size: u,
        len: n,
        threshold: 10.0 * an as f64 / ad as f64 * n as f64,
        per_level_lifted: (1..=p.k).map(|m| report.lifted(m, Classifier::All).len()).collect(),
    }
}

/// Builds the hierarchy and bad sets, and decides sinuosity.
pub fn is_sinuous(walk: &Walk, p: &DeskView) -> Result<(Hierarchy, BadSetReport, Sinuosity)> {
    let top = p.scale_product(p.k);
    if !is_stopped(walk, top) {
        return Err(Error::NotStopped(top));
    }
    let h = Hierarchy::build(walk, &p.l)?;
    let r = BadSetReport::build(&h, p)?;
    let s = sinuosity(&r, p);
    Ok((h, r, s))
}
