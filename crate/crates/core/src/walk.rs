use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite simple random walk. The position trace is built once at
/// construction and shared by everything downstream.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Walk {
    steps: Vec<i8>,
    trace: Vec<i64>,
}

impl Walk {
    pub fn from_steps(steps: Vec<i8>) -> Result<Self> {
        let mut trace = Vec::with_capacity(steps.len() + 1);
        let mut x = 0i64;
        trace.push(0);
        for &s in &steps {
            if s != 1 && s != -1 {
                return Err(Error::InvalidStep(s as i64));
            }
            x += s as i64;
            trace.push(x);
        }
        Ok(Walk { steps, trace })
    }

    pub fn from_i64_steps(steps: &[i64]) -> Result<Self> {
        let mut v = Vec::with_capacity(steps.len());
        for &s in steps {
            if s != 1 && s != -1 {
                return Err(Error::InvalidStep(s));
            }
            v.push(s as i8);
        }
        Walk::from_steps(v)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn steps(&self) -> &[i8] {
        &self.steps
    }

    /// Positions X_0..X_n.
    pub fn trace(&self) -> &[i64] {
        &self.trace
    }

    pub fn position(&self, t: usize) -> Result<i64> {
        self.trace
            .get(t)
            .copied()
            .ok_or(Error::TimeOutOfRange { t, n: self.len() })
    }

    pub fn end_position(&self) -> i64 {
        self.trace[self.len()]
    }

    /// First j > i with |X_j - X_i| = l, or the sentinel n when the walk
    /// ends first.
    pub fn next_crossing(&self, l: u64, i: usize) -> usize {
        let n = self.len();
        if i >= n {
            return n;
        }
        let base = self.trace[i];
        let l = l as i64;
        for j in i + 1..=n {
            if (self.trace[j] - base).abs() == l {
                return j;
            }
        }
        n
    }

    /// Range of sites visited at times lo..=hi.
    pub fn visited_range(&self, lo: usize, hi: usize) -> (i64, i64) {
        let seg = &self.trace[lo..=hi];
        let mut a = seg[0];
        let mut b = seg[0];
        for &x in seg {
            a = a.min(x);
            b = b.max(x);
        }
        (a, b)
    }

    /// One line of '+' and '-'.
    pub fn to_text(&self) -> String {
        self.steps
            .iter()
            .map(|&s| if s > 0 { '+' } else { '-' })
            .collect()
    }

    pub fn from_text(s: &str) -> Result<Self> {
        let mut steps = Vec::new();
        for c in s.trim().chars() {
            match c {
                '+' => steps.push(1),
                '-' | '\u{2212}' => steps.push(-1),
                c if c.is_whitespace() => {}
                c => return Err(Error::Parse(format!("unexpected character {c:?} in walk"))),
            }
        }
        Walk::from_steps(steps)
    }
}

impl Serialize for Walk {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.steps.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Walk {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<i64>::deserialize(d)?;
        Walk::from_i64_steps(&v).map_err(serde::de::Error::custom)
    }
}

/// Outcome of a stopped-walk draw that ran out of budget.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejection {
    pub steps_used: usize,
}

/// Fair +-1 steps drawn 64 at a time.
pub struct StepSource<'a, R: RngCore> {
    rng: &'a mut R,
    buf: u64,
    left: u32,
}

impl<'a, R: RngCore> StepSource<'a, R> {
    pub fn new(rng: &'a mut R) -> Self {
        StepSource { rng, buf: 0, left: 0 }
    }

    #[inline]
    pub fn step(&mut self) -> i8 {
        if self.left == 0 {
            self.buf = self.rng.next_u64();
            self.left = 64;
        }
        let b = (self.buf & 1) as i8;
        self.buf >>= 1;
        self.left -= 1;
        2 * b - 1
    }
}

/// Run a fair walk from 0 until |X| = l_total. Rejects after `max_steps`.
pub fn sample_stopped_walk<R: RngCore>(
    rng: &mut R,
    l_total: u64,
    max_steps: usize,
) -> std::result::Result<Walk, Rejection> {
    assert!(l_total >= 1);
    let target = l_total as i64;
    let mut src = StepSource::new(rng);
    let mut steps = Vec::new();
    let mut x = 0i64;
    while steps.len() < max_steps {
        let s = src.step();
        steps.push(s);
        x += s as i64;
        if x.abs() == target {
            return Ok(Walk::from_steps(steps).expect("steps are +-1"));
        }
    }
    Err(Rejection { steps_used: max_steps })
}

pub fn default_max_steps(l_total: u64) -> usize {
    (100u64.saturating_mul(l_total).saturating_mul(l_total)) as usize
}

/// Hitting time of +-l for a fresh walk from 0, without storing steps.
pub fn sample_next_from_origin<R: RngCore>(rng: &mut R, l: u64) -> u64 {
    let target = l as i64;
    let mut src = StepSource::new(rng);
    let mut x = 0i64;
    let mut t = 0u64;
    loop {
        x += src.step() as i64;
        t += 1;
        if x.abs() == target {
            return t;
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReducedEmbedding {
    pub indices: Vec<usize>,
    pub scale: u64,
}

impl ReducedEmbedding {
    /// Number of reduced steps.
    pub fn reduced_len(&self) -> usize {
        self.indices.len() - 1
    }
}

pub fn reduced_embedding(walk: &Walk, l: u64) -> Result<ReducedEmbedding> {
    if l == 0 {
        return Err(Error::NotReducible { scale: l, reason: "scale must be positive".into() });
    }
    let n = walk.len();
    if walk.end_position() % l as i64 != 0 {
        return Err(Error::NotReducible {
            scale: l,
            reason: format!("end position {} is not a multiple of {l}", walk.end_position()),
        });
    }
    let mut indices = vec![0usize];
    let mut i = 0usize;
    while i < n {
        let j = walk.next_crossing(l, i);
        if (walk.trace[j] - walk.trace[i]).abs() != l as i64 {
            return Err(Error::NotReducible {
                scale: l,
                reason: format!("no crossing after time {i} before the end"),
            });
        }
        indices.push(j);
        i = j;
    }
    Ok(ReducedEmbedding { indices, scale: l })
}

pub fn reduce_with(walk: &Walk, emb: &ReducedEmbedding) -> Walk {
    let l = emb.scale as i64;
    let steps = emb
        .indices
        .windows(2)
        .map(|w| ((walk.trace[w[1]] - walk.trace[w[0]]) / l) as i8)
        .collect();
    Walk::from_steps(steps).expect("crossings are exact")
}

pub fn reduce_walk(walk: &Walk, l: u64) -> Result<Walk> {
    let emb = reduced_embedding(walk, l)?;
    Ok(reduce_with(walk, &emb))
}

/// Membership in the stopped-walk set at scale `l_total`.
pub fn is_stopped(walk: &Walk, l_total: u64) -> bool {
    !walk.is_empty()
        && walk.end_position().unsigned_abs() == l_total
        && walk.next_crossing(l_total, 0) == walk.len()
}
