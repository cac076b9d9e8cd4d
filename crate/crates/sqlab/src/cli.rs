//! The `sqlab` command line.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use sqlab_core::algorithms::{
    coordinate_detector_t, default_subset_size, detect_by_coordinate_bias, detect_by_subset_enumeration, satisfied_fraction,
    solve_max_xor_sat, subset_detector_t,
};
use sqlab_core::bits::{IndexSet, Point};
use sqlab_core::dimension::{
    dense_subgraph_sda_bound, query_lower_bound, sample_lower_bound, sample_lower_bound_branches, sample_lower_bound_simplified, sd_to_sda,
    sda_clique_bound, sqdim_bridge, stat_lower_bound_from_sd,
};
use sqlab_core::distributions::{ParityDistribution, PlantedDistribution, PointDistribution};
use sqlab_core::oracles::{Backend, OracleSession, OracleSpec};
use sqlab_core::reductions::{
    generate_average_instance, generate_average_instance_unique, generate_planted_samples, solve_average_via_distributional,
    solve_distributional_via_average, AverageSolver, BipartiteInstance, BitMatrix, CoordinateBiasSolver, DistributionalSolver,
    GroundTruthAverageSolver, GroundTruthDistributionalSolver, Plant, SubsetEnumerationSolver, DEFAULT_DRAW_RETRIES,
};
use sqlab_core::rng::SeedStream;
use sqlab_core::scalar::{parse_rational, ratio_to_f64, ArithmeticMode, Prob};
use sqlab_core::simulation::{diagnose, standard_policies, SeededAdaptiveAlgorithm};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::io::{dimension_csv, parse_prob, read_matrix_with_meta, transcript_jsonl, write_matrix, DimensionRow, InstanceFile, MatrixMeta};
use crate::report::{read_report, write_atomic, write_report, ExperimentReport, Trial};
use crate::verify::{run_suite, Suite};

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "sqlab",
    version,
    about = "Statistical-query laboratory: oracles, planted distributions, detectors, dimension calculators and reductions"
)]
pub struct Cli {
    /// Arithmetic for oracle answers.
    #[arg(long, global = true, value_enum, env = "SQLAB_MODE", default_value = "exact")]
    pub mode: Mode,
    /// Worker threads for per-trial parallelism (default: all cores).
    #[arg(long, global = true, env = "SQLAB_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Float,
}

impl From<Mode> for ArithmeticMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Exact => ArithmeticMode::Exact,
            Mode::Float => ArithmeticMode::Float,
        }
    }
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Command {
    /// Generate an instance file, a bipartite matrix or a sample matrix.
    Gen(GenArgs),
    /// Run a planted-set detector against an oracle.
    Detect(DetectArgs),
    /// Run the MAX-XOR-SAT parity baseline.
    Maxxorsat(MaxXorSatArgs),
    /// Compare true and VSTAT-simulated transcript laws.
    Simulate(SimulateArgs),
    /// Statistical-dimension calculators.
    Dim {
        #[command(subcommand)]
        which: DimCommand,
    },
    /// Reductions between the distributional and average-case problems.
    Reduce(ReduceArgs),
    /// Exact invariant suites.
    Verify(VerifyArgs),
    /// Re-run a report's recorded command and compare per-trial outcomes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenKind {
    /// JSON instance `{n, k, plant, p, q, seed}`.
    Instance,
    /// `n × n` average-case matrix with a planted `k × k` block.
    Bipartite,
    /// `n` rows drawn from the planted biclique distribution.
    Samples,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenArgs {
    #[arg(long, value_enum, default_value = "instance")]
    pub kind: GenKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "1")]
    pub p: String,
    #[arg(long, default_value = "1/2")]
    pub q: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Instance or matrix file; a matrix gets a `.meta.json` sidecar.
    #[arg(long)]
    pub out: PathBuf,
    /// Also draw this many points from an instance.
    #[arg(long, requires = "samples_out")]
    pub samples: Option<usize>,
    #[arg(long, requires = "samples")]
    pub samples_out: Option<PathBuf>,
    /// Redraw background cells so the plant is the only completion.
    #[arg(long)]
    pub unique: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    Coords,
    Subsets,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleArg {
    Vstat,
    Stat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendArg {
    Exact,
    Honest,
    Adversarial,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct OracleArgs {
    #[arg(long, value_enum, default_value = "vstat")]
    pub oracle: OracleArg,
    /// VSTAT parameter (default: the detector's own).
    #[arg(long)]
    pub t: Option<u64>,
    /// STAT tolerance.
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long, value_enum, default_value = "exact")]
    pub backend: BackendArg,
    /// Failure probability per honest estimate.
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub trials: u64,
    /// Report file; a CSV mirror is written beside it. Without it the report goes to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DetectArgs {
    #[arg(long, value_enum)]
    pub algo: Algo,
    #[arg(long)]
    pub instance: PathBuf,
    /// Subset size for `subsets` (default ⌈log₂ n⌉).
    #[arg(long)]
    pub s: Option<usize>,
    #[command(flatten)]
    pub oracle: OracleArgs,
    #[command(flatten)]
    pub run: TrialArgs,
    /// Success rate below which the run exits 1.
    #[arg(long, default_value_t = 1.0)]
    pub min_rate: f64,
    /// JSON-lines transcript of the first trial.
    #[arg(long)]
    pub transcript: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MaxXorSatArgs {
    #[arg(long)]
    pub n: usize,
    /// Hidden assignment as a 0/1 string, coordinate 0 first (default: random per trial).
    #[arg(long)]
    pub c: Option<String>,
    /// Value of χ_c on the clause distribution's support.
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub target: i8,
    #[arg(long, default_value = "1/100")]
    pub tau: String,
    #[arg(long)]
    pub budget: u64,
    #[arg(long, value_enum, default_value = "exact")]
    pub backend: BackendArg,
    #[arg(long, default_value_t = 0.01)]
    pub delta: f64,
    #[command(flatten)]
    pub run: TrialArgs,
    #[arg(long, default_value_t = 1.0)]
    pub min_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyArg {
    All,
    Exact,
    BandEdgeHigh,
    BandEdgeLow,
    Adversarial,
    AlternatingEdges,
}

impl PolicyArg {
    fn matches(self, name: &str) -> bool {
        match self {
            PolicyArg::All => true,
            p => p.to_possible_value().is_some_and(|v| v.get_name() == name),
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulateArgs {
    /// Planted distribution to simulate (default: a random clique per algorithm).
    #[arg(long)]
    pub instance: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    /// Queries per algorithm.
    #[arg(long, default_value_t = 8)]
    pub m: usize,
    #[arg(long, default_value = "1/4")]
    pub delta_prime: String,
    #[arg(long, value_enum, default_value = "all")]
    pub policy: PolicyArg,
    /// Number of seeded adaptive algorithms.
    #[arg(long, default_value_t = 20)]
    pub algorithms: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Diagnostics as a JSON array `{m, t, deltaPrime, policy, tv, bound, pass}`.
    #[arg(long)]
    pub diagnostics: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum DimCommand {
    /// Planted biclique SDA bound over a grid.
    Clique(GridArgs),
    /// Generalized planted dense subgraph SDA bound over a grid.
    Dense(DenseArgs),
    /// STAT lower bound from SD and the SD → SDA conversion.
    Sd(SdArgs),
    /// SQ-DIM bridge.
    Sqdim(SqdimArgs),
    /// Query and sample lower bounds from (d, γ̄, success, η).
    Bounds(BoundsArgs),
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub delta: Vec<String>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub ell: Vec<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DenseArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub p: String,
    #[arg(long, default_value = "1/2")]
    pub q: String,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SdArgs {
    #[arg(long)]
    pub m: String,
    #[arg(long)]
    pub gamma: String,
    #[arg(long)]
    pub beta: String,
    #[arg(long)]
    pub tau: Option<String>,
    #[arg(long)]
    pub gamma_prime: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SqdimArgs {
    #[arg(long, value_delimiter = ',', required = true)]
    pub d_prime: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BoundsArgs {
    #[arg(long)]
    pub d: String,
    #[arg(long)]
    pub gamma_bar: String,
    #[arg(long, default_value = "2/3")]
    pub success: String,
    #[arg(long, default_value = "0")]
    pub eta: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Distributional problem solved with an average-case solver.
    Dist2avg,
    /// Average-case problem solved with a distributional solver.
    Avg2dist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverArg {
    GroundTruth,
    Coords,
    Subsets,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReduceArgs {
    #[arg(value_enum)]
    pub direction: Direction,
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub k: usize,
    #[arg(long, value_enum, default_value = "ground-truth")]
    pub solver: SolverArg,
    /// Subset size for the `subsets` solver.
    #[arg(long, default_value_t = 3)]
    pub s: usize,
    /// Matrix file (with optional sidecar) to reduce instead of generated ones.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub run: TrialArgs,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Largest dimension enumerated point by point.
    #[arg(long, default_value_t = 14)]
    pub nmax: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplayArgs {
    pub report: PathBuf,
}

/// Result of one command: the report (if any), whether the experiment
/// passed, and an optional table replacing the per-trial CSV.
pub struct Outcome {
    pub report: Option<ExperimentReport>,
    pub table: Option<Vec<u8>>,
    pub out: Option<PathBuf>,
}

fn core(e: sqlab_core::Error) -> anyhow::Error {
    anyhow!("{e}")
}

fn rational(s: &str) -> Result<BigRational> {
    parse_rational(s).ok_or_else(|| anyhow!("not a number: {s:?}"))
}

fn trial_seed(seed: u64, index: u64) -> u64 {
    SeedStream::new(seed).child(index).seed()
}

/// Runs `trials` independent trials in parallel, each with its own seed
/// derived from `(seed, index)`; results keep index order.
fn run_trials(seed: u64, trials: u64, f: impl Fn(u64, u64) -> Result<Trial> + Sync) -> Result<Vec<Trial>> {
    if trials == 0 {
        bail!("--trials must be at least 1");
    }
    (0..trials).into_par_iter().map(|i| f(i, trial_seed(seed, i))).collect()
}

fn random_subset(n: usize, k: usize, rng: &mut impl Rng) -> Result<IndexSet> {
    if k == 0 || k > n {
        bail!("need 1 <= k <= n, got k = {k}, n = {n}");
    }
    IndexSet::new(n, rand::seq::index::sample(rng, n, k).iter()).map_err(core)
}

/// Standard error of a proportion `p` over `n` trials.
fn proportion_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// `1 − 2e^{−k/8}`.
pub fn chernoff_bound(k: usize) -> f64 {
    1.0 - 2.0 * (-(k as f64) / 8.0).exp()
}

/// `P[Bin(n, k/n) ≥ m]`.
pub fn witness_tail(n: usize, k: usize, m: usize) -> Result<f64> {
    let b = Binomial::new(k as f64 / n as f64, n as u64)?;
    Ok(if m == 0 { 1.0 } else { b.sf(m as u64 - 1) })
}

fn make_backend(kind: BackendArg, dist: Arc<dyn PointDistribution>, reference: Arc<dyn PointDistribution>, delta: f64) -> Result<Backend> {
    match kind {
        BackendArg::Exact => Ok(Backend::exact(dist)),
        BackendArg::Honest => Backend::honest(dist, delta).map_err(core),
        BackendArg::Adversarial => Backend::adversarial(dist, reference).map_err(core),
    }
}

pub fn execute(cli: &Cli, argv: &[String], write: bool) -> Result<Outcome> {
    let config = serde_json::to_value(cli)?;
    let argv = argv.to_vec();
    let mode: ArithmeticMode = cli.mode.into();
    match &cli.command {
        Command::Gen(a) => gen(a, argv, config, write),
        Command::Detect(a) => detect(a, mode, argv, config, write),
        Command::Maxxorsat(a) => maxxorsat(a, mode, argv, config),
        Command::Simulate(a) => simulate(a, argv, config, write),
        Command::Dim { which } => dim(which, argv, config),
        Command::Reduce(a) => reduce(a, argv, config),
        Command::Verify(a) => {
            let results = run_suite(a.suite, a.nmax, a.seed)?;
            let mut report = ExperimentReport::new("verify", argv, config, a.seed);
            report.param("suite", format!("{:?}", a.suite).to_lowercase()).param("nmax", a.nmax).param("seed", a.seed);
            let trials = results
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    Ok(Trial {
                        index: i as u64,
                        seed: a.seed,
                        success: r.pass,
                        queries: r.checks,
                        samples: 0,
                        detail: serde_json::to_value(r)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            report.pass = results.iter().all(|r| r.pass);
            report.set_trials(trials)?;
            Ok(Outcome { report: Some(report), table: None, out: a.out.clone() })
        }
        Command::Replay(a) => replay(&a.report),
    }
}

fn gen(a: &GenArgs, argv: Vec<String>, config: Value, write: bool) -> Result<Outcome> {
    let seeds = SeedStream::new(a.seed);
    let mut rng = seeds.rng(0);
    let mut report = ExperimentReport::new("gen", argv, config, a.seed);
    report.param("kind", format!("{:?}", a.kind).to_lowercase()).param("n", a.n).param("k", a.k).param("seed", a.seed);
    let detail = match a.kind {
        GenKind::Instance => {
            let (p, q) = (parse_prob(&a.p)?, parse_prob(&a.q)?);
            let plant = random_subset(a.n, a.k, &mut rng)?;
            let inst = InstanceFile::new(a.n, &plant, &p, &q, a.seed);
            let dist = inst.distribution()?;
            if write {
                inst.write(&a.out)?;
                let back = InstanceFile::read(&a.out)?;
                if back.plant_set()? != plant {
                    bail!("instance written to {} does not read back", a.out.display());
                }
            }
            if let (Some(m), Some(path)) = (a.samples, &a.samples_out) {
                let mut srng = seeds.rng(1);
                let rows: Vec<Point> = (0..m).map(|_| dist.draw(&mut srng)).collect();
                let matrix = BitMatrix::from_rows(a.n, rows).map_err(core)?;
                if write {
                    write_atomic(path, matrix.to_lines().as_bytes())?;
                }
            }
            report.param("p", &p).param("q", &q);
            json!({ "plant": plant.to_vec(), "verified": true })
        }
        GenKind::Bipartite => {
            let inst =
                if a.unique { generate_average_instance_unique(a.n, a.k, &mut rng) } else { generate_average_instance(a.n, a.k, &mut rng) }
                    .map_err(core)?;
            let plant = inst.plant.clone().expect("generated with a plant");
            if !inst.verify_plant() {
                bail!("generated block is not all ones");
            }
            let meta = MatrixMeta { n: a.n, k: a.k, plant_rows: plant.rows.to_vec(), plant_cols: plant.cols.to_vec(), seed: a.seed };
            if write {
                write_matrix(&a.out, &inst.adjacency, Some(&meta))?;
            }
            json!({ "plantRows": meta.plant_rows, "plantCols": meta.plant_cols, "unique": inst.plant_is_unique() })
        }
        GenKind::Samples => {
            let plant = random_subset(a.n, a.k, &mut rng)?;
            let rows = a.samples.unwrap_or(a.n);
            let s = generate_planted_samples(rows, &plant, a.unique, &mut rng).map_err(core)?;
            let meta = MatrixMeta { n: a.n, k: a.k, plant_rows: s.witness_rows.to_vec(), plant_cols: plant.to_vec(), seed: a.seed };
            if write {
                write_matrix(&a.out, &s.matrix, Some(&meta))?;
            }
            json!({ "plantRows": meta.plant_rows, "plantCols": meta.plant_cols })
        }
    };
    report.set_trials(vec![Trial { index: 0, seed: a.seed, success: true, queries: 0, samples: 0, detail }])?;
    Ok(Outcome { report: Some(report), table: None, out: a.report.clone() })
}

fn detect(a: &DetectArgs, mode: ArithmeticMode, argv: Vec<String>, config: Value, write: bool) -> Result<Outcome> {
    let inst = InstanceFile::read(&a.instance)?;
    let dist = inst.distribution()?;
    let (n, k) = (inst.n, inst.k);
    let truth = dist.plant().clone();
    let reference: Arc<dyn PointDistribution> = Arc::new(dist.reference());
    let dist: Arc<dyn PointDistribution> = Arc::new(dist);
    let s = a.s.unwrap_or_else(|| default_subset_size(n));
    let spec = match a.oracle.oracle {
        OracleArg::Vstat => {
            let t = a.oracle.t.unwrap_or(match a.algo {
                Algo::Coords => coordinate_detector_t(n as u64, k as u64),
                Algo::Subsets => subset_detector_t(n as u64, k as u64),
            });
            OracleSpec::vstat(t).map_err(core)?
        }
        OracleArg::Stat => {
            let tau = a.oracle.tau.as_deref().ok_or_else(|| anyhow!("--oracle stat needs --tau"))?;
            OracleSpec::stat_exact(rational(tau)?).map_err(core)?
        }
    };
    let first_transcript = std::sync::Mutex::new(None);
    let trials = run_trials(a.run.seed, a.run.trials, |i, seed| {
        let backend = make_backend(a.oracle.backend, dist.clone(), reference.clone(), a.oracle.delta)?;
        let mut session = OracleSession::with_rng(spec.clone(), backend, SeedStream::new(seed).rng(0), mode);
        if !(i == 0 && a.transcript.is_some()) {
            session = session.without_transcript();
        }
        let result = match a.algo {
            Algo::Coords => detect_by_coordinate_bias(&mut session, n, k),
            Algo::Subsets => detect_by_subset_enumeration(&mut session, n, k, s),
        }
        .map_err(core)?;
        if i == 0 && a.transcript.is_some() {
            *first_transcript.lock().expect("transcript lock") = Some(session.transcript().to_vec());
        }
        Ok(Trial {
            index: i,
            seed,
            success: result.recovered == truth,
            queries: session.query_count(),
            samples: session.draws(),
            detail: serde_json::to_value(&result)?,
        })
    })?;
    if let (Some(path), Some(records), true) = (&a.transcript, first_transcript.into_inner().expect("transcript lock"), write) {
        write_atomic(path, &transcript_jsonl(&records)?)?;
    }
    let mut report = ExperimentReport::new("detect", argv, config, a.run.seed);
    report
        .param("algo", format!("{:?}", a.algo).to_lowercase())
        .param("n", n)
        .param("k", k)
        .param("oracle", spec.kind())
        .param("backend", format!("{:?}", a.oracle.backend).to_lowercase())
        .param("trials", a.run.trials)
        .param("seed", a.run.seed)
        .param("plant", format!("{:?}", truth.to_vec()));
    if a.algo == Algo::Subsets {
        report.param("s", s);
    }
    if let OracleSpec::Vstat { t } = spec {
        report.param("t", t);
        report.formula_values = json!({ "coordinateDetectorT": coordinate_detector_t(n as u64, k as u64), "subsetDetectorT": subset_detector_t(n as u64, k as u64), "t": t });
    }
    report.set_trials(trials)?;
    report.pass = report.aggregates.as_ref().is_some_and(|g| g.success_rate >= a.min_rate);
    Ok(Outcome { report: Some(report), table: None, out: a.run.out.clone() })
}

fn parse_bits(s: &str, n: usize) -> Result<Point> {
    let p = Point::parse(s).map_err(core)?;
    if p.dim() != n {
        bail!("--c has {} bits, expected n = {n}", p.dim());
    }
    Ok(p)
}

fn maxxorsat(a: &MaxXorSatArgs, mode: ArithmeticMode, argv: Vec<String>, config: Value) -> Result<Outcome> {
    let fixed = a.c.as_deref().map(|c| parse_bits(c, a.n)).transpose()?;
    let tau = rational(&a.tau)?;
    let spec = OracleSpec::stat_exact(tau).map_err(core)?;
    let trials = run_trials(a.run.seed, a.run.trials, |i, seed| {
        let seeds = SeedStream::new(seed);
        let c = match &fixed {
            Some(c) => c.clone(),
            None => {
                let mut rng = seeds.rng(1);
                loop {
                    let bits: Vec<bool> = (0..a.n).map(|_| rng.gen()).collect();
                    let p = Point::from_bits(&bits);
                    if !p.is_zero() {
                        break p;
                    }
                }
            }
        };
        let d: Arc<dyn PointDistribution> = Arc::new(ParityDistribution::new(c.clone(), a.target).map_err(core)?);
        let backend = make_backend(a.backend, d.clone(), d, a.delta)?;
        let mut session = OracleSession::with_rng(spec.clone(), backend, seeds.rng(0), mode).without_transcript();
        let out = solve_max_xor_sat(&mut session, a.n, a.budget, &mut seeds.rng(2)).map_err(core)?;
        Ok(Trial {
            index: i,
            seed,
            success: out.assignment == c,
            queries: out.queries_used,
            samples: session.draws(),
            detail: json!({ "c": c.to_row_string(), "result": out, "satisfied": satisfied_fraction(out.best_response) }),
        })
    })?;
    let mut report = ExperimentReport::new("maxxorsat", argv, config, a.run.seed);
    report.param("n", a.n).param("budget", a.budget).param("tau", &a.tau).param("trials", a.run.trials).param("seed", a.run.seed);
    report.set_trials(trials)?;
    report.pass = report.aggregates.as_ref().is_some_and(|g| g.success_rate >= a.min_rate);
    Ok(Outcome { report: Some(report), table: None, out: a.run.out.clone() })
}

fn simulate(a: &SimulateArgs, argv: Vec<String>, config: Value, write: bool) -> Result<Outcome> {
    let dp = rational(&a.delta_prime)?;
    let fixed = a.instance.as_deref().map(InstanceFile::read).transpose()?.map(|i| i.distribution()).transpose()?;
    let n = fixed.as_ref().map_or(a.n, |d| d.n());
    let policies: Vec<usize> =
        standard_policies().iter().enumerate().filter(|(_, p)| a.policy.matches(&p.name())).map(|(i, _)| i).collect();
    if policies.is_empty() {
        bail!("no policy matches {:?}", a.policy);
    }
    let per = policies.len() as u64;
    let trials = run_trials(a.seed, a.algorithms * per, |i, _| {
        let alg_index = i / per;
        let seed = trial_seed(a.seed, alg_index);
        let d = match &fixed {
            Some(d) => d.clone(),
            None => {
                let mut rng = SeedStream::new(seed).rng(0);
                let k = rng.gen_range(1..=n);
                PlantedDistribution::clique(n, random_subset(n, k, &mut rng)?).map_err(core)?
            }
        };
        let reference = d.reference();
        let alg = SeededAdaptiveAlgorithm::new(n, a.m, seed).map_err(core)?;
        let policy = &standard_policies()[policies[(i % per) as usize]];
        let diag = diagnose(&alg, &d, Some(&reference), policy.as_ref(), &dp).map_err(core)?;
        Ok(Trial {
            index: i,
            seed,
            success: diag.pass,
            queries: a.m as u64,
            samples: 0,
            detail: json!({ "plant": d.plant().to_vec(), "diagnostic": diag }),
        })
    })?;
    if let (Some(path), true) = (&a.diagnostics, write) {
        let diags: Vec<&Value> = trials.iter().map(|t| &t.detail["diagnostic"]).collect();
        write_atomic(path, &serde_json::to_vec_pretty(&diags)?)?;
    }
    let mut report = ExperimentReport::new("simulate", argv, config, a.seed);
    report.param("n", n).param("m", a.m).param("deltaPrime", &dp).param("algorithms", a.algorithms).param("seed", a.seed);
    let ratio_exceedances = trials.iter().filter(|t| t.detail["diagnostic"]["ratioPass"] == json!(false)).count();
    if ratio_exceedances > 0 {
        report.notes.push(format!("{ratio_exceedances} transcript laws exceed the chained ratio (1 + 2/t)^m"));
    }
    report.pass = trials.iter().all(|t| t.success);
    report.set_trials(trials)?;
    Ok(Outcome { report: Some(report), table: None, out: a.out.clone() })
}

fn dim(which: &DimCommand, argv: Vec<String>, config: Value) -> Result<Outcome> {
    let mut report = ExperimentReport::new("dim", argv, config, 0);
    let (values, table, out) = match which {
        DimCommand::Clique(g) => grid(g, None, &mut report)?,
        DimCommand::Dense(d) => grid(&d.grid, Some((parse_prob(&d.p)?, parse_prob(&d.q)?)), &mut report)?,
        DimCommand::Sd(s) => {
            report.param("which", "sd");
            let (m, gamma, beta) = (rational(&s.m)?, rational(&s.gamma)?, rational(&s.beta)?);
            let mut v = json!({});
            if let Some(tau) = &s.tau {
                let b = stat_lower_bound_from_sd(&m, &gamma, &beta, &rational(tau)?).map_err(core)?;
                v["statLowerBound"] = json!({ "exact": b.to_string(), "value": ratio_to_f64(&b) });
            }
            if let Some(gp) = &s.gamma_prime {
                let b = sd_to_sda(&m, &gamma, &beta, &rational(gp)?).map_err(core)?;
                v["sdaLowerBound"] = json!({ "exact": b.to_string(), "value": ratio_to_f64(&b) });
            }
            if s.tau.is_none() && s.gamma_prime.is_none() {
                bail!("dim sd needs --tau or --gamma-prime");
            }
            (v, None, s.out.clone())
        }
        DimCommand::Sqdim(s) => {
            report.param("which", "sqdim");
            let rows = s
                .d_prime
                .iter()
                .map(|d| Ok(serde_json::to_value(sqdim_bridge(&rational(d)?).map_err(core)?)?))
                .collect::<Result<Vec<_>>>()?;
            (Value::Array(rows), None, s.out.clone())
        }
        DimCommand::Bounds(b) => {
            report.param("which", "bounds");
            let (d, g, s, e) = (rational(&b.d)?, rational(&b.gamma_bar)?, rational(&b.success)?, rational(&b.eta)?);
            let q = query_lower_bound(&d, &s, &e).map_err(core)?;
            let sb = sample_lower_bound(&d, &g, &s, &e).map_err(core)?;
            let (b1, b2) = sample_lower_bound_branches(&d, &g, &s, &e).map_err(core)?;
            let simple = sample_lower_bound_simplified(&d, &g);
            let f = |r: &BigRational| json!({ "exact": r.to_string(), "value": ratio_to_f64(r) });
            (
                json!({ "queryBound": f(&q), "sampleBound": f(&sb), "branches": [f(&b1), b2.as_ref().map_or(Value::Null, f)], "simplified": f(&simple) }),
                None,
                b.out.clone(),
            )
        }
    };
    report.formula_values = values;
    report.set_trials(vec![Trial { index: 0, seed: 0, success: true, queries: 0, samples: 0, detail: Value::Null }])?;
    Ok(Outcome { report: Some(report), table, out })
}

type GridOutput = (Value, Option<Vec<u8>>, Option<PathBuf>);

fn grid(g: &GridArgs, pq: Option<(Prob, Prob)>, report: &mut ExperimentReport) -> Result<GridOutput> {
    report.param("which", if pq.is_some() { "dense" } else { "clique" });
    let deltas = g.delta.iter().map(|d| rational(d)).collect::<Result<Vec<_>>>()?;
    let mut combos: Vec<(usize, usize, &BigRational, usize)> = Vec::new();
    for &n in &g.n {
        for &k in &g.k {
            for d in &deltas {
                for &l in &g.ell {
                    combos.push((n, k, d, l));
                }
            }
        }
    }
    let (p, q) = pq.clone().unwrap_or((Prob::one(), Prob::half()));
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for &(n, k, d, l) in &combos {
        let est = match &pq {
            None => sda_clique_bound(n, k, d, l).map(|e| (serde_json::to_value(&e), e)),
            Some((p, q)) => dense_subgraph_sda_bound(n, k, d, l, p, q).map(|e| (serde_json::to_value(&e), e.estimate)),
        };
        match est {
            Ok((v, e)) => {
                rows.push(DimensionRow::from_estimate(n, k, &p, &q, d, l, &e));
                values.push(json!({ "n": n, "k": k, "delta": d.to_string(), "ell": l, "estimate": v? }));
            }
            Err(e) if combos.len() > 1 => report.notes.push(format!("n = {n}, k = {k}, δ = {d}, ℓ = {l}: {e}")),
            Err(e) => return Err(core(e)),
        }
    }
    Ok((Value::Array(values), Some(dimension_csv(&rows)?), g.out.clone()))
}

enum ReduceInput {
    Samples { matrix: BitMatrix, hint: Option<Plant> },
    Bipartite(BipartiteInstance),
}

fn read_reduce_input(path: &Path, direction: Direction) -> Result<ReduceInput> {
    let (matrix, meta) = read_matrix_with_meta(path)?;
    let n = matrix.n_cols();
    let hint = meta
        .map(|m| -> Result<Plant> {
            Ok(Plant {
                rows: IndexSet::new(matrix.n_rows(), m.plant_rows.iter().copied()).map_err(core)?,
                cols: IndexSet::new(n, m.plant_cols.iter().copied()).map_err(core)?,
            })
        })
        .transpose()?;
    Ok(match direction {
        Direction::Dist2avg => ReduceInput::Samples { matrix, hint },
        Direction::Avg2dist => ReduceInput::Bipartite(BipartiteInstance { n, adjacency: matrix, plant: hint }),
    })
}

fn reduce(a: &ReduceArgs, argv: Vec<String>, config: Value) -> Result<Outcome> {
    let input = a.input.as_deref().map(|p| read_reduce_input(p, a.direction)).transpose()?;
    let n = match &input {
        Some(ReduceInput::Samples { matrix, .. }) => matrix.n_cols(),
        Some(ReduceInput::Bipartite(b)) => b.n,
        None => a.n,
    };
    let k = a.k;
    match (a.direction, a.solver) {
        (Direction::Dist2avg, SolverArg::Subsets) | (Direction::Avg2dist, SolverArg::Coords) => {
            bail!("solver {:?} does not solve the problem {:?} reduces to", a.solver, a.direction)
        }
        _ => {}
    }
    let trials = run_trials(a.run.seed, if input.is_some() { 1 } else { a.run.trials }, |i, seed| {
        let mut rng = SeedStream::new(seed).rng(0);
        let detail;
        let success;
        match a.direction {
            Direction::Dist2avg => {
                let (matrix, hint) = match &input {
                    Some(ReduceInput::Samples { matrix, hint }) => (matrix.clone(), hint.clone()),
                    _ => {
                        let plant = random_subset(n, k, &mut rng)?;
                        let s = generate_planted_samples(n, &plant, true, &mut rng).map_err(core)?;
                        let hint = s.as_plant();
                        (s.matrix, Some(hint))
                    }
                };
                let mut solver: Box<dyn AverageSolver> = match a.solver {
                    SolverArg::Coords => Box::new(CoordinateBiasSolver),
                    _ => Box::new(GroundTruthAverageSolver),
                };
                let out = solve_distributional_via_average(&matrix, k, solver.as_mut(), hint.as_ref(), &mut rng).map_err(core)?;
                success = out.success.unwrap_or(out.recovered.is_some());
                detail = serde_json::to_value(&out)?;
            }
            Direction::Avg2dist => {
                let inst = match &input {
                    Some(ReduceInput::Bipartite(b)) => b.clone(),
                    _ => generate_average_instance_unique(n, k, &mut rng).map_err(core)?,
                };
                let mut solver: Box<dyn DistributionalSolver> = match a.solver {
                    SolverArg::Subsets => Box::new(SubsetEnumerationSolver { s: a.s }),
                    _ => Box::new(GroundTruthDistributionalSolver),
                };
                let out = solve_average_via_distributional(&inst, k, solver.as_mut(), DEFAULT_DRAW_RETRIES, &mut rng).map_err(core)?;
                success = out.success.unwrap_or(out.recovered.is_some());
                detail = serde_json::to_value(&out)?;
            }
        }
        let calls = detail["solverCalls"].as_u64().unwrap_or(0);
        Ok(Trial { index: i, seed, success, queries: calls, samples: n as u64, detail })
    })?;
    let bound = match a.direction {
        Direction::Dist2avg => chernoff_bound(k),
        Direction::Avg2dist => chernoff_bound(k) * chernoff_bound(k),
    };
    let mut report = ExperimentReport::new("reduce", argv, config, a.run.seed);
    report
        .param("direction", format!("{:?}", a.direction).to_lowercase())
        .param("solver", format!("{:?}", a.solver))
        .param("n", n)
        .param("k", k)
        .param("trials", trials.len())
        .param("seed", a.run.seed);
    let count = trials.len();
    report.set_trials(trials)?;
    let rate = report.aggregates.as_ref().map_or(0.0, |g| g.success_rate);
    let se = proportion_se(bound, count);
    report.formula_values = json!({
        "successLowerBound": bound,
        "standardError": se,
        "witnessProbability": witness_tail(n, k, k.div_ceil(2))?,
    });
    // the bound is a lower bound on the success probability
    report.pass = rate >= bound - 3.0 * se;
    Ok(Outcome { report: Some(report), table: None, out: a.run.out.clone() })
}

fn replay(path: &Path) -> Result<Outcome> {
    let recorded = read_report(path)?;
    let mut args = vec!["sqlab".to_string()];
    args.extend(recorded.argv.iter().cloned());
    let mut cli = Cli::try_parse_from(&args).with_context(|| format!("recorded arguments {:?} no longer parse", recorded.argv))?;
    if let Some(m) = recorded.config.get("mode").and_then(|m| m.as_str()) {
        cli.mode = if m == "float" { Mode::Float } else { Mode::Exact };
    }
    if matches!(cli.command, Command::Replay(_)) {
        bail!("cannot replay a replay");
    }
    let rerun = execute(&cli, &recorded.argv, false)?.report.ok_or_else(|| anyhow!("command produced no report"))?;
    let same = rerun.trials == recorded.trials;
    let mut report = ExperimentReport::new("replay", vec!["replay".into(), path.display().to_string()], json!({ "report": path }), 0);
    report.param("replayed", &recorded.experiment_id).param("trials", recorded.trials.len());
    let mismatched: Vec<u64> = recorded.trials.iter().zip(&rerun.trials).filter(|(a, b)| a != b).map(|(a, _)| a.index).collect();
    report.formula_values = json!({ "identical": same, "mismatchedTrials": mismatched });
    report.pass = same;
    Ok(Outcome { report: Some(report), table: None, out: None })
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 when the experiment fails, 2 on a
/// usage or input error.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(t) = cli.threads {
        // a second global pool in the same process is refused; keep the first
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let outcome = match execute(&cli, &argv[1..], true) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let Some(report) = outcome.report else { return 0 };
    let written = match &outcome.out {
        Some(path) => write_report(&report, path, outcome.table),
        None => {
            let mut out = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &report).map_err(anyhow::Error::from).and_then(|_| Ok(writeln!(out)?))
        }
    };
    if let Err(e) = written {
        eprintln!("error: {e:#}");
        return 2;
    }
    if report.pass {
        0
    } else {
        1
    }
}
