use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use num_traits::ToPrimitive;
use rwrs_core::badsets::is_sinuous;
use rwrs_core::harness::{
    params_report, run_feasibility, run_simulate, run_verify_bounds, write_bound_rows, ExperimentConfig, Verdict,
    VerifyConfig,
};
use rwrs_core::io::{
    read_json, record_from_json, record_to_json, scenery_from_json, write_json, JsonLines, SCHEMA_VERSION,
};
use rwrs_core::params::{parse_rational, Num};
use rwrs_core::reconstruct::{corrupt, finder_density, Adversary};
use rwrs_core::scenery::ErrorSet;
use rwrs_core::seed::{trial_rng, CORRUPTION};
use rwrs_core::testset::{apply_test, enumerate_tests, lambda_count_ln_bound, passes_test, predicted_count, Test};
use rwrs_core::{finder, Error};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "rwrs", version, about = "Random walk on random scenery experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the scale schedule and its condition checks.
    Params(ConfigArgs),
    /// Sample trials and stream per-trial JSON lines.
    Simulate(SimulateArgs),
    /// Corrupt a record with the configured adversary.
    Corrupt(CorruptArgs),
    /// Search for a satisfied test on a corrupted record.
    FindTest(FindArgs),
    /// Apply a test to a record and report the scenery it suggests.
    Reconstruct(ReconstructArgs),
    /// Check every probabilistic inequality against exact or sampled oracles.
    VerifyBounds(VerifyArgs),
    /// Enumerate all tests at one level.
    Enumerate(EnumerateArgs),
    /// Smallest admissible (A, B) for given target probabilities.
    Feasibility(FeasibilityArgs),
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    delta: Option<String>,
    #[arg(long, value_parser = parse_adversary)]
    adversary: Option<Adversary>,
    #[arg(long)]
    alphabet_size: Option<u32>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    max_attempts: Option<u32>,
    #[arg(long)]
    enumeration_cap: Option<u64>,
    /// Output file, stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_adversary(s: &str) -> Result<Adversary, String> {
    serde_json::from_value(json!(s)).map_err(|_| format!("unknown adversary {s:?}"))
}

impl ConfigArgs {
    fn load(&self) -> rwrs_core::Result<ExperimentConfig> {
        let mut c = ExperimentConfig::load(&self.config)?;
        if let Some(v) = self.seed {
            c.seed = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = &self.delta {
            c.delta = Num::Text(v.clone());
        }
        if let Some(v) = self.adversary {
            c.adversary = v;
        }
        if let Some(v) = self.alphabet_size {
            c.alphabet_size = v;
        }
        if let Some(v) = self.max_steps {
            c.caps.max_steps = Some(v);
        }
        if let Some(v) = self.max_attempts {
            c.caps.max_attempts = v;
        }
        if let Some(v) = self.enumeration_cap {
            c.caps.enumeration_cap = v;
        }
        if let Some(v) = &self.out {
            c.output.jsonl = Some(v.clone());
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// CSV of per-level bad-set sizes.
    #[arg(long)]
    report_badsets: Option<PathBuf>,
    /// Directory for per-trial walk, scenery, record and error files.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct CorruptArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    record: PathBuf,
    /// Trial index used to derive the corruption stream.
    #[arg(long, default_value_t = 0)]
    trial: u64,
    #[arg(long)]
    errors_out: Option<PathBuf>,
}

#[derive(Args)]
struct FindArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Uncorrupted record.
    #[arg(long)]
    record: PathBuf,
    #[arg(long)]
    corrupted: PathBuf,
}

#[derive(Args)]
struct ReconstructArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    record: PathBuf,
    /// A test array or the output of find-test.
    #[arg(long)]
    test: PathBuf,
    /// True scenery, for agreement checks.
    #[arg(long)]
    scenery: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// TOML grid; the built-in grid when absent.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, conflicts_with = "grid")]
    quick: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Replaces the upper-tail exponent rate.
    #[arg(long)]
    next_tail_rate: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    level: usize,
    /// Include every test in the output.
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct FeasibilityArgs {
    #[arg(long)]
    p: String,
    #[arg(long)]
    theta: String,
    #[arg(long)]
    epsilon: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Config(anyhow::Error),
    Verify(String),
    Rejected(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.into())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Config(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn output(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn emit(path: Option<&Path>, v: &Value) -> Outcome {
    match path {
        Some(p) => write_json(p, v)?,
        None => {
            let mut o = io::stdout().lock();
            serde_json::to_writer_pretty(&mut o, v).map_err(anyhow::Error::from)?;
            writeln!(o)?;
        }
    }
    Ok(())
}

fn cmd_params(a: &ConfigArgs) -> Outcome {
    let c = a.load()?;
    let mut v = params_report(&c.scale_params()?);
    v["config"] = c.to_json();
    emit(a.out.as_deref(), &v)
}

fn cmd_simulate(a: &SimulateArgs) -> Outcome {
    let c = a.cfg.load()?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let _ = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst));
    let mut out = JsonLines::new(output(c.output.jsonl.as_deref())?);
    let badsets_path = a.report_badsets.clone().or_else(|| c.output.badsets_csv.clone());
    let badsets = match &badsets_path {
        Some(p) => Some(output(Some(p))?),
        None => None,
    };
    if let Some(d) = &a.dump_dir {
        std::fs::create_dir_all(d)?;
    }
    let s = run_simulate(&c, &mut out, badsets, a.dump_dir.as_deref(), Some(&stop))?;
    if s.rejected > 0 {
        return Err(Failure::Rejected(format!("{} trials exhausted their sampling attempts", s.rejected)));
    }
    if s.verification_failures > 0 {
        return Err(Failure::Verify(format!("{} found tests failed verification", s.verification_failures)));
    }
    Ok(())
}

fn cmd_corrupt(a: &CorruptArgs) -> Outcome {
    let c = a.cfg.load()?;
    let record = record_from_json(&read_json(&a.record)?)?;
    let walk = record.walk();
    let d = c.delta()?.to_f64().context("delta out of range")?;
    let mut rng = trial_rng(c.seed, a.trial, CORRUPTION);
    let (cor, errors) = corrupt(&mut rng, c.adversary, &record, &walk, d)?;
    if let Some(p) = &a.errors_out {
        write_json(p, &rwrs_core::io::errors_to_json(&record, &cor, &errors))?;
    }
    emit(c.output.jsonl.as_deref(), &record_to_json(&cor))
}

fn cmd_find(a: &FindArgs) -> Outcome {
    let c = a.cfg.load()?;
    let sp = c.scale_params()?;
    let p = sp.desk_view()?;
    let record = record_from_json(&read_json(&a.record)?)?;
    let cor = record_from_json(&read_json(&a.corrupted)?)?;
    let errors = ErrorSet::from_diff(&record, &cor)?;
    let walk = record.walk();
    let (h, report, sinuosity) = is_sinuous(&walk, &p)?;
    let density = finder_density(&p, &c.delta()?);
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "config": c.to_json(),
        "sinuosity": sinuosity,
        "density": density.to_string(),
        "errors": errors.len(),
    });
    let res = finder::find_satisfied_test(&h, &p, &report, &errors, p.k, 0, &density)?;
    let verdict = match res {
        Ok(found) => {
            let verify =
                finder::verify_test_properties(&walk, &cor.walk(), &p, &found.test, &errors, &density, p.k, 0)?;
            let ok = verify.all_pass();
            let fails = verify.failures();
            v["test"] = serde_json::to_value(&found.test).map_err(anyhow::Error::from)?;
            v["tree"] = serde_json::to_value(&found.tree).map_err(anyhow::Error::from)?;
            v["verify"] = serde_json::to_value(&verify).map_err(anyhow::Error::from)?;
            if ok {
                Ok(())
            } else {
                Err(Failure::Verify(format!("failing clauses: {}", fails.join(", "))))
            }
        }
        Err(f) => {
            let msg = f.to_string();
            v["failure"] = serde_json::to_value(&f).map_err(anyhow::Error::from)?;
            Err(Failure::Verify(format!("no test found: {msg}")))
        }
    };
    emit(c.output.jsonl.as_deref(), &v)?;
    verdict
}

fn read_test(path: &Path) -> anyhow::Result<Test> {
    let v = read_json(path)?;
    let t = if v.is_object() { v.get("test").cloned().context("no \"test\" field")? } else { v };
    Ok(serde_json::from_value(t)?)
}

fn cmd_reconstruct(a: &ReconstructArgs) -> Outcome {
    let c = a.cfg.load()?;
    let p = c.scale_params()?.desk_view()?;
    let record = record_from_json(&read_json(&a.record)?)?;
    let test = read_test(&a.test)?;
    let ps = apply_test(&record, &test, p.l[0]);
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "config": c.to_json(),
        "domain_size": ps.domain_size(),
        "suggestion": ps,
    });
    let mut verdict = Ok(());
    if let Some(sp) = &a.scenery {
        let truth = scenery_from_json(&read_json(sp)?)?;
        let passes = passes_test(&record, &truth, &test, p.l[0])?;
        v["passes"] = json!(passes);
        v["disagreements"] = json!(ps.disagreements(&truth));
        if !passes {
            verdict = Err(Failure::Verify("record does not pass the test under the given scenery".into()));
        }
    }
    emit(c.output.jsonl.as_deref(), &v)?;
    verdict
}

fn cmd_verify(a: &VerifyArgs) -> Outcome {
    let mut g = match (&a.grid, a.quick) {
        (Some(p), _) => {
            let text = std::fs::read_to_string(p)?;
            toml::from_str::<VerifyConfig>(&text).map_err(|e| Error::InvalidParams(e.to_string()))?
        }
        (None, true) => VerifyConfig::quick(),
        (None, false) => VerifyConfig::default(),
    };
    if let Some(s) = a.seed {
        g.seed = s;
    }
    if let Some(r) = a.next_tail_rate {
        g.next_tail_rate = r;
    }
    let rows = run_verify_bounds(&g)?;
    write_bound_rows(output(a.out.as_deref())?, &rows)?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.verdict == Verdict::Fail)
        .map(|r| format!("{} [{}]", r.lemma, r.params))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!("{} failing rows: {}", failed.len(), failed.join("; "))))
    }
}

fn cmd_enumerate(a: &EnumerateArgs) -> Outcome {
    let c = a.cfg.load()?;
    let p = c.scale_params()?.desk_view()?;
    if a.level == 0 || a.level > p.k {
        return Err(Error::LevelOutOfRange { m: a.level, k: p.k }.into());
    }
    let tests = enumerate_tests(&p, a.level, c.caps.enumeration_cap)?;
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "config": c.to_json(),
        "level": a.level,
        "count": tests.len(),
        "predicted": predicted_count(&p, a.level).to_string(),
        "ln_count": (tests.len() as f64).ln(),
        "ln_bound": lambda_count_ln_bound(&p, a.level),
    });
    if a.list {
        v["tests"] = serde_json::to_value(&tests).map_err(anyhow::Error::from)?;
    }
    emit(c.output.jsonl.as_deref(), &v)
}

fn cmd_feasibility(a: &FeasibilityArgs) -> Outcome {
    let f = run_feasibility(&parse_rational(&a.p)?, &parse_rational(&a.theta)?, &parse_rational(&a.epsilon)?)?;
    let mut v = f.to_json();
    v["inputs"] = json!({"p": a.p, "theta": a.theta, "epsilon": a.epsilon});
    emit(a.out.as_deref(), &v)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let r = match &cli.cmd {
        Cmd::Params(a) => cmd_params(a),
        Cmd::Simulate(a) => cmd_simulate(a),
        Cmd::Corrupt(a) => cmd_corrupt(a),
        Cmd::FindTest(a) => cmd_find(a),
        Cmd::Reconstruct(a) => cmd_reconstruct(a),
        Cmd::VerifyBounds(a) => cmd_verify(a),
        Cmd::Enumerate(a) => cmd_enumerate(a),
        Cmd::Feasibility(a) => cmd_feasibility(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Verify(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Rejected(m)) => {
            eprintln!("sampling rejected: {m}");
            ExitCode::from(3)
        }
    }
}
