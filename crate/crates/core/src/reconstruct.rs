//! One full trial: walk, scenery, record, corruption, bad sets, test search,
//! verification and scenery suggestion.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::badsets::{is_sinuous, BadSetReport, Sinuosity};
use crate::error::{Error, Result};
use crate::finder::{FindFailure, FinderContext, TestReport, verify_test_properties};
use crate::hierarchy::Hierarchy;
use crate::params::DeskView;
use crate::scenery::{
    corrupt_least_visited, corrupt_random, make_record, sample_scenery_for, ErrorSet, Record, Scenery,
};
use crate::seed::{trial_rng, CORRUPTION, SCENERY, WALK};
use crate::testset::{apply_test, passes_test, Test, TestTree};
use crate::walk::{sample_stopped_walk, Walk};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Adversary {
    Random,
    LeastVisited,
}

pub fn corrupt<R: rand::Rng>(
    rng: &mut R,
    adversary: Adversary,
    record: &Record,
    walk: &Walk,
    delta: f64,
) -> Result<(Record, ErrorSet)> {
    match adversary {
        Adversary::Random => Ok(corrupt_random(rng, record, delta)),
        Adversary::LeastVisited => corrupt_least_visited(record, walk, delta),
    }
}

/// Density handed to the finder: delta + 10 alpha.
pub fn finder_density(p: &DeskView, delta: &BigRational) -> BigRational {
    let (an, ad) = p.alpha;
    delta + BigRational::new(BigInt::from(10u128 * an), BigInt::from(ad))
}

#[derive(Clone, Debug)]
pub struct TrialSpec {
    pub alphabet_size: u32,
    pub delta: BigRational,
    pub adversary: Adversary,
    pub max_steps: usize,
    pub max_attempts: u32,
    /// Run the finder only on sinuous walks.
    pub find: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconstruction {
    pub test: Test,
    pub verify: TestReport,
    pub passes: bool,
    pub domain_size: usize,
    pub disagreements: usize,
    pub conflicts: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct TrialOutcome {
    pub trial: u64,
    pub attempts: u32,
    pub walk_len: usize,
    pub sinuosity: Sinuosity,
    pub bad_counts: Vec<Vec<(String, usize, usize)>>,
    pub errors: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<FindFailure>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reconstruction: Option<Reconstruction>,
}

/// Everything a trial produced, for callers that need the raw objects.
pub struct TrialArtifacts {
    pub walk: Walk,
    pub scenery: Scenery,
    pub record: Record,
    pub corrupted: Record,
    pub errors: ErrorSet,
    pub hierarchy: Hierarchy,
    pub report: BadSetReport,
    pub tree: Option<TestTree>,
    pub outcome: TrialOutcome,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rejected {
    pub trial: u64,
    pub attempts: u32,
}

pub fn run_trial(p: &DeskView, spec: &TrialSpec, master: u64, trial: u64) -> Result<std::result::Result<TrialArtifacts, Rejected>> {
    let top = p.scale_product(p.k);
    let mut walk = None;
    let mut attempts = 0;
    while attempts < spec.max_attempts {
        let mut rng = trial_rng(master, trial, WALK + 16 * attempts as u64);
        attempts += 1;
        if let Ok(w) = sample_stopped_walk(&mut rng, top, spec.max_steps) {
            walk = Some(w);
            break;
        }
    }
    let Some(walk) = walk else { return Ok(Err(Rejected { trial, attempts })) };
    let scenery = sample_scenery_for(&mut trial_rng(master, trial, SCENERY), spec.alphabet_size, &walk)?;
    let record = make_record(&walk, &scenery)?;
    let delta_f = spec.delta.to_f64().ok_or_else(|| Error::InvalidParams("delta".into()))?;
    let (corrupted, errors) = corrupt(&mut trial_rng(master, trial, CORRUPTION), spec.adversary, &record, &walk, delta_f)?;
    let (hierarchy, report, sinuosity) = is_sinuous(&walk, p)?;
    let bad_counts = report
        .levels
        .iter()
        .map(|lb| {
            crate::badsets::Classifier::EVERY
                .iter()
                .map(|&c| (c.name().to_string(), lb.set(c).len(), report.lifted(lb.m, c).len()))
                .collect()
        })
        .collect();
    let mut outcome = TrialOutcome {
        trial,
        attempts,
        walk_len: walk.len(),
        sinuosity,
        bad_counts,
        errors: errors.len(),
        failure: None,
        reconstruction: None,
    };
    let mut tree = None;
    if spec.find && outcome.sinuosity.sinuous {
        let a = finder_density(p, &spec.delta);
        let ctx = FinderContext::new(&hierarchy, p, &report, &errors);
        match ctx.find(p.k, 0, &a)? {
            Ok(found) => {
                let cwalk = corrupted.walk();
                let verify = verify_test_properties(&walk, &cwalk, p, &found.test, &errors, &a, p.k, 0)?;
                let passes = passes_test(&corrupted, &scenery, &found.test, p.l[0])?;
                let ps = apply_test(&corrupted, &found.test, p.l[0]);
                outcome.reconstruction = Some(Reconstruction {
                    test: found.test,
                    verify,
                    passes,
                    domain_size: ps.domain_size(),
                    disagreements: ps.disagreements(&scenery).len(),
                    conflicts: ps.conflicts.len(),
                });
                tree = Some(found.tree);
            }
            Err(f) => outcome.failure = Some(f),
        }
    }
    Ok(Ok(TrialArtifacts { walk, scenery, record, corrupted, errors, hierarchy, report, tree, outcome }))
}
