use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dirichlet_species::dataio::{self, Dataset, Envelope, ParseOptions, SpectrumFormat};
use dirichlet_species::distributions::{p_log_pmf_row, p_logpmf, ModelKind, PMethod, Shape};
use dirichlet_species::estimators::{
    joint_estimate, kingman_gamma, mle_n_shape, umvb_n_shape, EstimateReport, JointStatistic, NEstimator, Scheme,
};
use dirichlet_species::gof::{gof_report, AlphaVariant};
use dirichlet_species::sampling::{pair_match_d, psi_simpson};
use dirichlet_species::simulate::{simulate, SimConfig, DEFAULT_REPS};
use dirichlet_species::stopping::{
    coupon_report, epsilon_stop, simulate_trajectory, smallest_fragment_report, Method, DEFAULT_MC_PARTITIONS,
};
use dirichlet_species::{Error, Result};

const EXIT_VALIDATION: u8 = 2;
const EXIT_DIVERGENCE: u8 = 3;
const EXIT_IO: u8 = 4;

/// Species-number estimation under symmetric Dirichlet partitions.
#[derive(Parser, Debug)]
#[command(name = "dirichlet-species", version, about)]
struct Cli {
    /// Write the JSON report to this file instead of stdout
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the number of species from a spectrum or from (k, P)
    Estimate(EstimateArgs),
    /// Replicated estimation over a simulated partition
    Simulate(SimulateArgs),
    /// Law of the number of distinct species P in k draws
    Dist(DistArgs),
    /// Goodness of fit of a model family to a spectrum
    Gof(GofArgs),
    /// Stopping rules: coupon collector, smallest fragment, epsilon rule
    Stop(StopArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum ModelArg {
    /// Symmetric Dirichlet with shape --theta
    Dirichlet,
    /// Bose-Einstein (theta = 1)
    Be,
    /// Maxwell-Boltzmann (theta -> infinity)
    Mb,
    /// Kingman limit with parameter --gamma
    Kingman,
}

#[derive(Args, Debug, Serialize)]
struct ModelArgs {
    /// Model family
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    /// Number of species n
    #[arg(long)]
    n: Option<u64>,
    /// Dirichlet shape parameter theta
    #[arg(long)]
    theta: Option<f64>,
    /// Kingman parameter gamma
    #[arg(long)]
    gamma: Option<f64>,
}

fn need<T>(v: Option<T>, what: &str) -> Result<T> {
    v.ok_or_else(|| Error::Validation(format!("missing --{what}")))
}

impl ModelArgs {
    fn family(&self) -> Option<ModelArg> {
        self.model.or(self.theta.map(|_| ModelArg::Dirichlet))
    }

    fn model(&self) -> Result<ModelKind> {
        let m = match need(self.family(), "model")? {
            ModelArg::Dirichlet => ModelKind::Dirichlet { n: need(self.n, "n")?, theta: need(self.theta, "theta")? },
            ModelArg::Be => ModelKind::BoseEinstein { n: need(self.n, "n")? },
            ModelArg::Mb => ModelKind::MaxwellBoltzmann { n: need(self.n, "n")? },
            ModelArg::Kingman => ModelKind::Kingman { gamma: need(self.gamma, "gamma")? },
        };
        m.validate()?;
        Ok(m)
    }

    fn shape(&self) -> Result<Option<Shape>> {
        Ok(match self.family() {
            None => None,
            Some(ModelArg::Dirichlet) => Some(Shape::Theta(need(self.theta, "theta")?)),
            Some(ModelArg::Be) => Some(Shape::Theta(1.0)),
            Some(ModelArg::Mb) => Some(Shape::MaxwellBoltzmann),
            Some(ModelArg::Kingman) => Some(Shape::Kingman),
        })
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum FormatArg {
    /// Whitespace- or comma-separated pairs
    Pairs,
    /// Comma-separated pairs with optional header
    Csv,
}

#[derive(Args, Debug, Serialize)]
struct DataArgs {
    /// Bundled dataset: madison, hamilton, janzen-1967-day, janzen-1967-night, janzen-1968-day
    #[arg(long, conflicts_with = "input")]
    bundled: Option<String>,
    /// Spectrum file with one `i A(i)` pair per line
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// Format of the spectrum file
    #[arg(long, value_enum, default_value = "pairs")]
    format: FormatArg,
    /// Accept an i = 0 row and keep it as metadata
    #[arg(long)]
    allow_zero_class: bool,
}

impl DataArgs {
    fn given(&self) -> bool {
        self.bundled.is_some() || self.input.is_some()
    }

    fn load(&self) -> Result<Dataset> {
        if let Some(name) = &self.bundled {
            return dataio::bundled(name);
        }
        let path = need(self.input.as_ref(), "input or --bundled")?;
        let opts = ParseOptions {
            format: match self.format {
                FormatArg::Pairs => SpectrumFormat::Pairs,
                FormatArg::Csv => SpectrumFormat::Csv,
            },
            allow_zero_class: self.allow_zero_class,
            default_name: None,
        };
        dataio::read_spectrum_file(path, &opts)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum StatArg {
    /// Pair-matching statistic D
    #[value(name = "D", alias = "d")]
    D,
    /// Coverage-adjusted Simpson estimate psi
    Psi,
    /// Both statistics
    Both,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum SchemeArg {
    /// n from the Bose-Einstein closed form, then theta from the statistic
    Pilot,
    /// theta(n) substituted into the n equation, solved in n alone
    Coupled,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Scheme {
        match s {
            SchemeArg::Pilot => Scheme::Pilot,
            SchemeArg::Coupled => Scheme::Coupled,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum NEstimatorArg {
    /// Maximum likelihood
    Mle,
    /// Uniformly minimum variance unbiased
    Umvb,
}

impl From<NEstimatorArg> for NEstimator {
    fn from(e: NEstimatorArg) -> NEstimator {
        match e {
            NEstimatorArg::Mle => NEstimator::Mle,
            NEstimatorArg::Umvb => NEstimator::Umvb,
        }
    }
}

#[derive(Args, Debug, Serialize)]
struct EstimateArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Sample size k, when no spectrum is given
    #[arg(long, requires = "p", conflicts_with_all = ["bundled", "input"])]
    k: Option<u64>,
    /// Number of distinct species P, when no spectrum is given
    #[arg(long, requires = "k")]
    p: Option<u64>,
    /// Value of the statistic selected by --stat, when no spectrum is given
    #[arg(long, requires = "k")]
    stat_value: Option<f64>,
    #[command(flatten)]
    model: ModelArgs,
    /// Statistic used for the joint (n, theta) estimate
    #[arg(long, value_enum, default_value = "both")]
    stat: StatArg,
    /// Joint estimation scheme
    #[arg(long, value_enum, default_value = "pilot")]
    scheme: SchemeArg,
    /// Estimator of n inside the joint scheme
    #[arg(long, value_enum, default_value = "mle")]
    n_estimator: NEstimatorArg,
}

#[derive(Args, Debug, Serialize)]
struct SimulateArgs {
    /// Number of species n
    #[arg(long)]
    n: usize,
    /// Dirichlet shape parameter theta
    #[arg(long)]
    theta: f64,
    /// Sample sizes (repeatable); defaults to 2n/3, n, 3n/2
    #[arg(long = "k", value_name = "K")]
    ks: Vec<u64>,
    /// Number of k-samples drawn over the partition
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    /// Random seed (required)
    #[arg(long)]
    seed: u64,
    /// Also run the UMVB estimator with theta known
    #[arg(long)]
    include_umvb: bool,
    /// Joint estimation scheme
    #[arg(long, value_enum, default_value = "pilot")]
    scheme: SchemeArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum PMethodArg {
    /// Bell-polynomial table
    Bell,
    /// Exact alternating sum (n, k <= 40)
    Alternating,
    /// Closed forms of the special cases
    Special,
}

#[derive(Args, Debug, Serialize)]
struct DistArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Sample size k
    #[arg(long)]
    k: u64,
    /// Number of distinct species; omit for the whole law
    #[arg(long)]
    p: Option<u64>,
    /// Evaluation route for a single probability
    #[arg(long, value_enum, default_value = "bell")]
    method: PMethodArg,
}

#[derive(Serialize)]
struct DistReport {
    model: ModelKind,
    k: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    probability: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pmf: Option<Vec<f64>>,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum VariantArg {
    /// Formulas as printed
    Printed,
    /// Exact moment formulas
    Derived,
}

#[derive(Args, Debug, Serialize)]
struct GofArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Expected-count formula family
    #[arg(long, value_enum, default_value = "derived")]
    variant: VariantArg,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum RuleArg {
    /// Probability that all n species are seen within k draws
    Coupon,
    /// Probability that the smallest fragment is still unseen after k draws
    SmallestFragment,
    /// First k at which the estimated chance of a new species drops below epsilon
    Epsilon,
}

#[derive(ValueEnum, Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
enum MethodArg {
    /// Closed form (theta = 1 only for the smallest fragment)
    ClosedForm,
    /// Monte Carlo over simulated partitions (needs --seed)
    MonteCarlo,
}

#[derive(Args, Debug, Serialize)]
struct StopArgs {
    /// Stopping rule
    #[arg(long, value_enum)]
    rule: RuleArg,
    #[command(flatten)]
    model: ModelArgs,
    /// Sample sizes (repeatable)
    #[arg(long = "k", value_name = "K")]
    ks: Vec<u64>,
    /// Evaluation method for the smallest-fragment rule
    #[arg(long, value_enum, default_value = "closed-form")]
    method: MethodArg,
    /// Simulated partitions for Monte Carlo
    #[arg(long, default_value_t = DEFAULT_MC_PARTITIONS)]
    reps: usize,
    /// Random seed, required by every simulated quantity
    #[arg(long)]
    seed: Option<u64>,
    /// Threshold of the epsilon rule
    #[arg(long)]
    epsilon: Option<f64>,
    /// Estimator behind the epsilon rule
    #[arg(long, value_enum, default_value = "mle")]
    n_estimator: NEstimatorArg,
    /// File of `k P` lines; otherwise a Polya urn trajectory is simulated
    #[arg(long, value_name = "PATH")]
    trajectory: Option<PathBuf>,
    /// Length of a simulated trajectory
    #[arg(long, default_value_t = 1000)]
    k_max: usize,
}

fn echo(args: &impl Serialize) -> std::collections::BTreeMap<String, serde_json::Value> {
    match serde_json::to_value(args) {
        Ok(serde_json::Value::Object(map)) => map.into_iter().collect(),
        _ => Default::default(),
    }
}

fn envelope<T>(command: &str, seed: Option<u64>, args: &impl Serialize, report: T) -> Envelope<T> {
    let mut env = Envelope::new(command, seed, report);
    env.inputs = echo(args);
    env
}

fn cmd_estimate(a: &EstimateArgs) -> Result<Envelope<Vec<EstimateReport>>> {
    let (k, p, stats, dataset) = if a.data.given() {
        let d = a.data.load()?;
        let s = &d.spectrum;
        let dv = if d.k() >= 2 { Some(pair_match_d(s)?) } else { None };
        (d.k(), d.p(), (dv, Some(psi_simpson(s))), Some(d.name))
    } else {
        let (k, p) = (need(a.k, "k")?, need(a.p, "p")?);
        let stats = match a.stat {
            StatArg::D => (a.stat_value, None),
            StatArg::Psi => (None, a.stat_value),
            StatArg::Both if a.stat_value.is_some() => {
                return Err(Error::Validation("--stat-value needs --stat D or --stat psi".into()))
            }
            StatArg::Both => (None, None),
        };
        (k, p, stats, None)
    };
    let mut reports = Vec::new();
    match a.model.shape()? {
        Some(Shape::Kingman) | None => {}
        Some(shape) => {
            reports.push(mle_n_shape(shape, k, p)?);
            reports.push(umvb_n_shape(shape, k, p)?);
        }
    }
    reports.push(kingman_gamma(k, p)?);
    let wanted = |s: StatArg| a.stat == s || a.stat == StatArg::Both;
    for (stat, value, arg) in [(JointStatistic::D, stats.0, StatArg::D), (JointStatistic::Psi, stats.1, StatArg::Psi)] {
        if let (true, Some(v)) = (wanted(arg), value) {
            reports.push(joint_estimate(stat, k, p, v, a.n_estimator.into(), a.scheme.into())?);
        }
    }
    let mut env = envelope("estimate", None, a, reports);
    if let Some(name) = dataset {
        env = env.with_input("dataset", name).with_input("k", k).with_input("p", p);
    }
    Ok(env)
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Envelope<dirichlet_species::simulate::SimReport>> {
    let mut cfg = SimConfig::standard_grid(a.n, a.theta, a.reps, a.seed);
    if !a.ks.is_empty() {
        cfg.ks = a.ks.clone();
    }
    cfg.include_umvb = a.include_umvb;
    cfg.scheme = a.scheme.into();
    Ok(envelope("simulate", Some(a.seed), a, simulate(&cfg)?))
}

fn cmd_dist(a: &DistArgs) -> Result<Envelope<DistReport>> {
    let model = a.model.model()?;
    let (probability, pmf) = match a.p {
        Some(p) => {
            let method = match a.method {
                PMethodArg::Bell => PMethod::Bell,
                PMethodArg::Alternating => PMethod::Alternating,
                PMethodArg::Special => PMethod::Special,
            };
            (Some(p_logpmf(&model, a.k, p, method)?.exp()), None)
        }
        None => (None, Some(p_log_pmf_row(&model, a.k)?.into_iter().map(f64::exp).collect())),
    };
    Ok(envelope("dist", None, a, DistReport { model, k: a.k, p: a.p, probability, pmf }))
}

fn cmd_gof(a: &GofArgs) -> Result<Envelope<dirichlet_species::gof::GofReport>> {
    let d = a.data.load()?;
    let shape = need(a.model.shape()?, "model")?;
    let reference = match (a.model.n, a.model.gamma) {
        (Some(_), _) | (_, Some(_)) => Some(a.model.model()?),
        _ => None,
    };
    let variant = match a.variant {
        VariantArg::Printed => AlphaVariant::Printed,
        VariantArg::Derived => AlphaVariant::Derived,
    };
    let report = gof_report(&d.spectrum, shape, variant, reference.as_ref())?;
    Ok(envelope("gof", None, a, report).with_input("dataset", d.name))
}

fn read_trajectory(path: &Path) -> Result<Vec<(u64, u64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        let parse = |f: &str| {
            f.parse::<u64>().map_err(|_| Error::Parse { line: idx + 1, message: format!("{f:?} is not an integer") })
        };
        match fields.as_slice() {
            [k, p] => out.push((parse(k)?, parse(p)?)),
            _ => return Err(Error::Parse { line: idx + 1, message: "expected `k P`".into() }),
        }
    }
    Ok(out)
}

fn cmd_stop(a: &StopArgs) -> Result<Envelope<dirichlet_species::stopping::StoppingReport>> {
    let needs_ks = || -> Result<&[u64]> {
        if a.ks.is_empty() {
            return Err(Error::Validation("missing --k".into()));
        }
        Ok(&a.ks)
    };
    let seed_needed = |what: &str| {
        a.seed.ok_or_else(|| Error::Validation(format!("{what} is simulated and needs an explicit --seed")))
    };
    let (report, seed) = match a.rule {
        RuleArg::Coupon => (coupon_report(&a.model.model()?, needs_ks()?)?, None),
        RuleArg::SmallestFragment => {
            let n = need(a.model.n, "n")?;
            let theta = match a.model.family() {
                Some(ModelArg::Be) => 1.0,
                _ => need(a.model.theta, "theta")?,
            };
            let (method, seed) = match a.method {
                MethodArg::ClosedForm => (Method::ClosedForm, None),
                MethodArg::MonteCarlo => (Method::MonteCarlo, Some(seed_needed("the Monte Carlo tail")?)),
            };
            (smallest_fragment_report(n, theta, needs_ks()?, method, a.reps, seed.unwrap_or(0))?, seed)
        }
        RuleArg::Epsilon => {
            let shape = need(a.model.shape()?, "model")?;
            let eps = need(a.epsilon, "epsilon")?;
            let (traj, seed) = match &a.trajectory {
                Some(path) => (read_trajectory(path)?, None),
                None => {
                    let seed = seed_needed("the trajectory")?;
                    let n = need(a.model.n, "n")? as usize;
                    let theta = match shape {
                        Shape::Theta(t) => t,
                        _ => return Err(Error::Validation("simulated trajectories need a finite theta".into())),
                    };
                    (simulate_trajectory(n, theta, a.k_max, seed)?, Some(seed))
                }
            };
            (epsilon_stop(shape, eps, &traj, a.n_estimator.into())?, seed)
        }
    };
    Ok(envelope("stop", seed, a, report))
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

fn emit<T: Serialize>(env: &Envelope<T>, out: Option<&Path>) -> Result<()> {
    dataio::write_report(env, out)
}

fn run(cli: &Cli) -> Result<bool> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Estimate(a) => {
            let env = cmd_estimate(a)?;
            emit(&env, out)?;
            Ok(env.report.iter().any(|r| r.diverged()))
        }
        Command::Simulate(a) => emit(&cmd_simulate(a)?, out).map(|_| false),
        Command::Dist(a) => emit(&cmd_dist(a)?, out).map(|_| false),
        Command::Gof(a) => emit(&cmd_gof(a)?, out).map(|_| false),
        Command::Stop(a) => emit(&cmd_stop(a)?, out).map(|_| false),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(EXIT_DIVERGENCE),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
