//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numerical failure.

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::generate::{gen_lof, gen_sig, Deviation, DeviationKind, LofScenario, SigModel, SigScenario};
use super::io::{read_sample, read_sig_sample, write_sample, write_sig_sample};
use super::mc::{run_table, McConfig, McReport, TableOptions, TABLES};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::lackoffit::{LofConfig, LofContext};
use crate::modelfit::{estimate_theta, fit, fit_at_theta, Affine, ProfileConfig};
use crate::report::{Method, TestReport};
use crate::resampling::{Purpose, StreamSeed};
use crate::significance::{SigConfig, SigContext, SigSample};
use crate::smoothing::{cv_bandwidth, default_grid, normal_reference_bandwidth, BandwidthSpec, Smoother};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "TRANSTEST_THREADS";

#[derive(Debug, Parser)]
#[command(name = "transtest", version, about = "Specification tests for transformation regression models")]
struct Cli {
    /// TOML file with defaults for any of the flags below.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one test on a CSV dataset and print a JSON report.
    Test {
        #[command(subcommand)]
        kind: TestKind,
    },
    /// Run a Monte Carlo table and print it as CSV.
    Simulate(SimulateArgs),
    /// Report reference and cross-validated bandwidths for a dataset.
    Bandwidth(BandwidthArgs),
    /// Write a synthetic dataset as CSV.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
}

#[derive(Debug, Subcommand)]
enum TestKind {
    /// Lack-of-fit of the affine regression after transformation.
    Lof(TestArgs),
    /// Significance of the `v` columns given the `w` columns.
    Sig(TestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum StatChoice {
    T,
    V,
    Both,
}

#[derive(Debug, Args)]
struct TestArgs {
    /// Dataset CSV.
    data: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
    /// Lack-of-fit statistic to report.
    #[arg(long, value_enum)]
    statistic: Option<StatChoice>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Flags shared by `test` and `simulate`; each can also come from the config file.
#[derive(Debug, Args, Default, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct CommonArgs {
    /// Master seed of all random streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Bootstrap replicates.
    #[arg(long = "boot")]
    boot: Option<usize>,
    /// Calibration: asym, swb, twb, mb or cmb.
    #[arg(long)]
    method: Option<Method>,
    /// Hold the transformation parameter at this value (for `gen`: the true value).
    #[arg(long)]
    theta0: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Fixed test bandwidth.
    #[arg(long)]
    h: Option<f64>,
    /// Fixed bandwidth of the smoother on `w` (significance only).
    #[arg(long)]
    g: Option<f64>,
    /// Variance of the normal weight function (significance only).
    #[arg(long = "psi-var")]
    psi_var: Option<f64>,
    /// Multiplier applied to the default test bandwidth rule.
    #[arg(long = "h-scale")]
    h_scale: Option<f64>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Table to reproduce: 1, 2, 3, 5, 6 or 7.
    #[arg(long)]
    table: u8,
    /// Monte Carlo runs per cell.
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated subset of methods to run.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Restrict significance tables to one model, e.g. 5.4.
    #[arg(long)]
    model: Option<String>,
    /// Restrict table 5 to one sample size (75 or 100); sample size of tables 6 and 7.
    #[arg(long)]
    n: Option<usize>,
    /// Hold the transformation parameter at its true value.
    #[arg(long)]
    fixed_theta: bool,
    #[command(flatten)]
    common: CommonArgs,
    /// CSV output path; a JSON sidecar with the same stem is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BandwidthArgs {
    data: PathBuf,
    /// Transformation parameter used for the responses; estimated when absent.
    #[arg(long)]
    theta0: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum GenKind {
    /// `Lambda(Y) = 3 + 5X + Delta(X) + eps`.
    Lof(GenLofArgs),
    /// One of the significance models 5.1 to 5.7.
    Sig(GenSigArgs),
}

#[derive(Debug, Args)]
struct GenLofArgs {
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    theta0: f64,
    /// `zero`, or `quadratic:c`, `exp:c`, `sine:c`.
    #[arg(long, default_value = "zero")]
    deviation: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenSigArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "5.1")]
    model: String,
    #[arg(long, default_value_t = 1.0)]
    theta0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Contents of a `--config` file: the common flags plus `runs`, `methods`,
/// `statistic` and `model`.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    #[serde(flatten)]
    common: CommonArgs,
    runs: Option<usize>,
    methods: Option<Vec<Method>>,
    statistic: Option<StatChoice>,
    model: Option<String>,
    n: Option<usize>,
    fixed_theta: Option<bool>,
}

impl CommonArgs {
    fn merged(&self, file: &CommonArgs) -> CommonArgs {
        CommonArgs {
            seed: self.seed.or(file.seed),
            boot: self.boot.or(file.boot),
            method: self.method.or(file.method),
            theta0: self.theta0.or(file.theta0),
            alpha: self.alpha.or(file.alpha),
            h: self.h.or(file.h),
            g: self.g.or(file.g),
            psi_var: self.psi_var.or(file.psi_var),
            h_scale: self.h_scale.or(file.h_scale),
        }
    }

    fn apply_lof(&self, cfg: &mut LofConfig) {
        if let Some(s) = self.seed {
            cfg.plan.seed = s;
        }
        if let Some(b) = self.boot {
            cfg.plan.replicates = b;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(h) = self.h {
            cfg.bandwidth = BandwidthSpec::fixed(h);
        }
        if let Some(k) = self.h_scale {
            cfg.bandwidth = cfg.bandwidth.clone().scaled(k);
        }
    }

    fn apply_sig(&self, cfg: &mut SigConfig) {
        if let Some(s) = self.seed {
            cfg.plan.seed = s;
        }
        if let Some(b) = self.boot {
            cfg.plan.replicates = b;
        }
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(h) = self.h {
            cfg.h = BandwidthSpec::fixed(h);
        }
        if let Some(k) = self.h_scale {
            cfg.h = cfg.h.clone().scaled(k);
        }
        if let Some(g) = self.g {
            cfg.g = BandwidthSpec::fixed(g);
        }
        if let Some(v) = self.psi_var {
            cfg.psi_var = v;
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => EXIT_USAGE,
        Error::Parse { .. } | Error::Io(_) => EXIT_DATA,
        Error::Domain { .. }
        | Error::EmptyNeighborhood
        | Error::SingularDesign { .. }
        | Error::DegenerateData(_)
        | Error::DegenerateVariance(_)
        | Error::NoConvergence { .. } => EXIT_NUMERIC,
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn cli_main<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let pool = match thread_pool() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match pool.install(|| dispatch(cli)) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let k: usize = v.trim().parse().map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
        if k == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        b = b.num_threads(k);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(p) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
}

fn dispatch(cli: Cli) -> Result<()> {
    let file = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Test { kind: TestKind::Lof(a) } => {
            let common = a.common.merged(&file.common);
            let stat = a.statistic.or(file.statistic).unwrap_or(StatChoice::T);
            let text = test_lof(&a.data, &common, stat)?;
            emit(a.out.as_deref(), &text)
        }
        Command::Test { kind: TestKind::Sig(a) } => {
            let common = a.common.merged(&file.common);
            let text = test_sig(&a.data, &common)?;
            emit(a.out.as_deref(), &text)
        }
        Command::Simulate(a) => simulate(a, &file),
        Command::Bandwidth(a) => emit(None, &bandwidth(&a.data, a.theta0.or(file.common.theta0))?),
        Command::Gen { kind } => generate(kind),
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn test_lof(path: &Path, common: &CommonArgs, stat: StatChoice) -> Result<String> {
    let sample = read_sample(open(path)?)?;
    let mut cfg = LofConfig::default();
    cfg.kernel = cfg.kernel.with_dim(sample.dim());
    common.apply_lof(&mut cfg);
    cfg.validate()?;
    let fam = Affine { dim: sample.dim() };
    let fm = match common.theta0 {
        Some(t) => fit_at_theta(t, &sample, &fam, &cfg.profile)?,
        None => fit(&sample, &fam, &cfg.profile)?,
    };
    let ctx = LofContext::new(&fm, &sample, &cfg)?;
    let method = common.method.unwrap_or(Method::Cmb);
    let (t, v) = ctx.run(method, &fam)?;
    Ok(match stat {
        StatChoice::T => to_json(&t),
        StatChoice::V => to_json(&v),
        StatChoice::Both => to_json(&[t, v]),
    })
}

fn test_sig(path: &Path, common: &CommonArgs) -> Result<String> {
    let s = read_sig_sample(open(path)?)?;
    let mut cfg = SigConfig::default();
    cfg.kernel_k = cfg.kernel_k.with_dim(s.w.ncols());
    cfg.kernel_l = cfg.kernel_l.with_dim(s.w.ncols());
    common.apply_sig(&mut cfg);
    cfg.validate()?;
    let theta = match common.theta0 {
        Some(t) => t,
        None => estimate_theta(&s.full(), &cfg.profile)?,
    };
    let ctx = SigContext::new(theta, &s, &cfg)?;
    let report: TestReport = ctx.run(common.method.unwrap_or(Method::Cmb))?;
    Ok(to_json(&report))
}

#[derive(Serialize)]
struct Sidecar<'a> {
    schema_version: &'a str,
    table: u8,
    runs: usize,
    replicates: usize,
    seed: u64,
    fixed_theta: bool,
    reports: &'a [McReport],
}

fn simulate(a: SimulateArgs, file: &FileConfig) -> Result<()> {
    if !TABLES.contains(&a.table) {
        return Err(Error::Config(format!("unknown table {}; available: 1, 2, 3, 5, 6, 7", a.table)));
    }
    let common = a.common.merged(&file.common);
    if common.theta0.is_some() {
        return Err(Error::Config("--theta0 is fixed by the table; use --fixed-theta to skip estimation".into()));
    }
    let mut cfg =
        McConfig { runs: a.runs.or(file.runs).unwrap_or(200), fixed_theta: a.fixed_theta || file.fixed_theta.unwrap_or(false), ..McConfig::default() };
    cfg.seed = common.seed.unwrap_or(0);
    let seedless = CommonArgs { seed: None, ..common.clone() };
    seedless.apply_lof(&mut cfg.lof);
    seedless.apply_sig(&mut cfg.sig);
    let mut methods = a.methods.or_else(|| file.methods.clone());
    if let Some(m) = common.method {
        methods = Some(vec![m]);
    }
    let models = match a.model.as_deref().or(file.model.as_deref()) {
        Some(id) => Some(vec![SigModel::from_id(id)?]),
        None => None,
    };
    let opts = TableOptions { methods, models, n: a.n.or(file.n) };
    let grid = run_table(a.table, &opts, &cfg)?;
    let replicates = if a.table <= 3 { cfg.lof.plan.replicates } else { cfg.sig.plan.replicates };
    let sidecar = Sidecar {
        schema_version: crate::report::SCHEMA_VERSION,
        table: a.table,
        runs: cfg.runs,
        replicates,
        seed: cfg.seed,
        fixed_theta: cfg.fixed_theta,
        reports: &grid.reports,
    };
    match a.out {
        Some(p) => {
            std::fs::write(&p, grid.to_csv())?;
            std::fs::write(p.with_extension("json"), to_json(&sidecar))?;
            Ok(())
        }
        None => emit(None, &grid.to_csv()),
    }
}

#[derive(Serialize)]
struct BandwidthReport {
    n: usize,
    kind: &'static str,
    theta: f64,
    normal_reference: f64,
    lof_default: Option<f64>,
    cv_nadaraya_watson: f64,
    cv_local_linear: Option<f64>,
    g_cv_nadaraya_watson: Option<f64>,
}

/// Decides from the header whether the file is a significance dataset.
fn is_sig_file(path: &Path) -> Result<bool> {
    let mut line = String::new();
    std::io::BufRead::read_line(&mut open(path)?, &mut line)?;
    Ok(line.split(',').any(|c| c.trim().to_ascii_lowercase().starts_with('w')))
}

fn bandwidth(path: &Path, theta0: Option<f64>) -> Result<String> {
    let profile = ProfileConfig::default();
    let rep = if is_sig_file(path)? {
        let s: SigSample<f64> = read_sig_sample(open(path)?)?;
        let full = s.full();
        let theta = match theta0 {
            Some(t) => t,
            None => estimate_theta(&full, &profile)?,
        };
        let z = profile.transform.forward_all(theta, &s.y)?;
        let cfg = SigConfig::default();
        let k = cfg.kernel_k.with_dim(full.dim());
        let l = cfg.kernel_l.with_dim(s.w.ncols());
        BandwidthReport {
            n: s.len(),
            kind: "sig",
            theta,
            normal_reference: nr(&full)?,
            lof_default: None,
            cv_nadaraya_watson: cv_bandwidth(&full.x, &z, Smoother::NadarayaWatson, &default_grid(&full.x), &k)?,
            cv_local_linear: None,
            g_cv_nadaraya_watson: Some(cv_bandwidth(&s.w, &z, Smoother::NadarayaWatson, &default_grid(&s.w), &l)?),
        }
    } else {
        let s = read_sample(open(path)?)?;
        let theta = match theta0 {
            Some(t) => t,
            None => estimate_theta(&s, &profile)?,
        };
        let z = profile.transform.forward_all(theta, &s.y)?;
        let cfg = LofConfig::default();
        let k = cfg.kernel.with_dim(s.dim());
        BandwidthReport {
            n: s.len(),
            kind: "lof",
            theta,
            normal_reference: nr(&s)?,
            lof_default: Some(cfg.resolve_h(&s.x, &z)?),
            cv_nadaraya_watson: cv_bandwidth(&s.x, &z, Smoother::NadarayaWatson, &default_grid(&s.x), &k)?,
            cv_local_linear: Some(cv_bandwidth(&s.x, &z, Smoother::LocalLinear, &default_grid(&s.x), &k)?),
            g_cv_nadaraya_watson: None,
        }
    };
    Ok(to_json(&rep))
}

/// Normal reference rule averaged over covariate columns.
fn nr(s: &Sample<f64>) -> Result<f64> {
    let d = s.dim();
    let mut acc = 0.0;
    for j in 0..d {
        acc += normal_reference_bandwidth(&s.x.column_values(j))?;
    }
    Ok(acc / d as f64)
}

fn parse_deviation(spec: &str) -> Result<Deviation> {
    let spec = spec.trim().to_ascii_lowercase();
    if spec == "zero" || spec == "0" {
        return Ok(Deviation::ZERO);
    }
    let (kind, amp) = spec.split_once(':').ok_or_else(|| Error::Config(format!("deviation `{spec}` should look like quadratic:5")))?;
    let kind = match kind {
        "quadratic" | "x2" => DeviationKind::Quadratic,
        "exp" | "exponential" => DeviationKind::Exponential,
        "sine" | "sin" => DeviationKind::Sine,
        _ => return Err(Error::Config(format!("unknown deviation kind `{kind}`"))),
    };
    let amp: f64 = amp.parse().map_err(|_| Error::Config(format!("bad amplitude `{amp}`")))?;
    Ok(Deviation::new(kind, amp))
}

fn generate(kind: GenKind) -> Result<()> {
    let mut buf = Vec::new();
    let out = match kind {
        GenKind::Lof(a) => {
            if a.n == 0 {
                return Err(Error::Config("--n must be positive".into()));
            }
            let sc = LofScenario::new(a.theta0, a.n, parse_deviation(&a.deviation)?);
            let s = gen_lof::<f64>(&sc, &mut StreamSeed::new(a.seed, 0, Purpose::Data).rng())?;
            write_sample(&mut buf, &s)?;
            a.out
        }
        GenKind::Sig(a) => {
            if a.n == 0 {
                return Err(Error::Config("--n must be positive".into()));
            }
            let sc = SigScenario { theta0: a.theta0, ..SigScenario::new(SigModel::from_id(&a.model)?, a.n) };
            let s = gen_sig::<f64>(&sc, &mut StreamSeed::new(a.seed, 0, Purpose::Data).rng())?;
            write_sig_sample(&mut buf, &s)?;
            a.out
        }
    };
    emit(out.as_deref(), &String::from_utf8(buf).expect("csv is utf-8"))
}
