#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rwrs_core::params::{desk_params, DeskLevels, DeskView, Num};
use rwrs_core::walk::{sample_stopped_walk, Walk};

/// Desk parameters tuned so that sinuous walks are common at three levels.
pub fn lenient_desk() -> DeskView {
    let d = DeskLevels {
        l: vec![4, 5, 10],
        m_upper: vec![160, 3200, 1_200_000],
        m_lower: vec![4, 20, 200],
        r_upper: vec![160, 200, 800],
        r_lower: vec![4, 5, 10],
        beta: vec![Num::Int(2); 3],
        alpha: Num::Text("0.0002".into()),
        branching: Some(vec![2, 2]),
        n: None,
    };
    desk_params(&d).unwrap().desk_view().unwrap()
}

/// Tight bounds so every classifier fires on typical walks.
pub fn tight_view() -> DeskView {
    DeskView {
        k: 3,
        l: vec![2, 3, 2],
        m_upper: vec![6, 60, 200],
        m_lower: vec![3, 20, 90],
        r_upper: vec![4, 12, 5],
        r_lower: vec![3, 5, 3],
        beta: vec![(3, 2), (1, 2), (1, 3)],
        alpha: (1, 100),
        branching: vec![0, 0, 1, 1],
    }
}

pub fn stopped_walk(seed: u64, top: u64) -> Walk {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_stopped_walk(&mut rng, top, usize::MAX).unwrap()
}

/// Crossing times of `walk` at scale `l`, computed by a plain scan.
pub fn crossings(walk: &Walk, l: u64) -> Vec<usize> {
    let x = walk.trace();
    let mut out = vec![0];
    let mut base = x[0];
    for (t, &v) in x.iter().enumerate().skip(1) {
        if (v - base).unsigned_abs() == l {
            out.push(t);
            base = v;
        }
    }
    out
}

/// Bad sets built straight from the definitions on the ground walk, using
/// the fact that level-m crossings are the crossings at scale L1...Lm.
pub struct Naive {
    /// `sets[m-1]` maps a classifier name to its sorted index set.
    pub sets: Vec<HashMap<&'static str, Vec<usize>>>,
    pub ground_lifts: Vec<HashMap<&'static str, BTreeSet<usize>>>,
}

pub fn naive_classify(walk: &Walk, p: &DeskView) -> Naive {
    let x = walk.trace();
    let mut sets = Vec::new();
    let mut lifts = Vec::new();
    let mut below_scale = 1u64;
    for m in 1..=p.k {
        let scale = below_scale * p.l[m - 1];
        let top = crossings(walk, scale);
        let lower = crossings(walk, below_scale);
        let mut s: HashMap<&'static str, Vec<usize>> = HashMap::new();
        for name in ["upper", "lower", "redUpper", "redLower", "local"] {
            s.insert(name, Vec::new());
        }
        for j in 0..top.len() - 1 {
            let (a, b) = (top[j], top[j + 1]);
            let ground = (b - a) as u64;
            let inside: Vec<usize> = lower.iter().copied().filter(|&t| t >= a && t < b).collect();
            let red = inside.len() as u64;
            let mut visits: HashMap<i64, u64> = HashMap::new();
            for &t in &inside {
                *visits.entry(x[t] / below_scale as i64).or_default() += 1;
            }
            let mlt = visits.values().copied().max().unwrap_or(0);
            let i = m - 1;
            if ground > p.m_upper[i] {
                s.get_mut("upper").unwrap().push(j);
            }
            if ground < p.m_lower[i] {
                s.get_mut("lower").unwrap().push(j);
            }
            if red > p.r_upper[i] {
                s.get_mut("redUpper").unwrap().push(j);
            }
            if red < p.r_lower[i] {
                s.get_mut("redLower").unwrap().push(j);
            }
            let (bn, bd) = p.beta[i];
            if (mlt as u128) * 2 * bd > bn * red as u128 {
                s.get_mut("local").unwrap().push(j);
            }
        }
        let union = |a: &[usize], b: &[usize]| -> Vec<usize> {
            a.iter().chain(b).copied().collect::<BTreeSet<_>>().into_iter().collect()
        };
        let length = union(&s["upper"], &s["lower"]);
        let red_length = union(&s["redUpper"], &s["redLower"]);
        let all = union(&union(&length, &red_length), &s["local"]);
        s.insert("length", length);
        s.insert("redLength", red_length);
        s.insert("all", all);
        let mut lift = HashMap::new();
        for (name, idx) in &s {
            let g: BTreeSet<usize> = idx.iter().flat_map(|&j| top[j]..top[j + 1]).collect();
            lift.insert(*name, g);
        }
        sets.push(s);
        lifts.push(lift);
        below_scale = scale;
    }
    Naive { sets, ground_lifts: lifts }
}
