//! Monte Carlo rejection rates and the table grids built from them.

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{gen_lof, gen_sig, Deviation, LofScenario, SigModel, SigScenario};
use crate::error::{Error, Result};
use crate::lackoffit::{LofConfig, LofContext};
use crate::modelfit::{estimate_theta, fit, fit_at_theta, Linear1D};
use crate::report::Method;
use crate::resampling::{Purpose, StreamSeed};
use crate::significance::{SigConfig, SigContext};
use crate::smoothing::BandwidthSpec;

/// Settings shared by every run of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub runs: usize,
    pub seed: u64,
    pub lof: LofConfig,
    pub sig: SigConfig,
    /// Hold the transformation parameter at its true value instead of estimating it.
    pub fixed_theta: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        let mut lof = LofConfig::default();
        lof.plan.replicates = 500;
        let mut sig = SigConfig::default();
        sig.plan.replicates = 500;
        Self { runs: 200, seed: 0, lof, sig, fixed_theta: false }
    }
}

impl McConfig {
    fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("number of runs must be positive".into()));
        }
        Ok(())
    }

    /// Seed of the bootstrap streams in run `r`.
    pub fn run_seed(&self, r: usize) -> u64 {
        StreamSeed::new(self.seed, r as u64, Purpose::Run).digest()
    }

    /// Data stream of run `r`.
    pub fn data_stream(&self, r: usize) -> StreamSeed {
        StreamSeed::new(self.seed, r as u64, Purpose::Data)
    }
}

/// Empirical rejection rate of one test on one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub scenario: String,
    pub statistic: String,
    pub method: Method,
    pub rate: f64,
    /// Binomial standard error `sqrt(rate (1 - rate) / completed)`.
    pub se: f64,
    pub runs: usize,
    pub rejections: usize,
    /// Runs that produced no decision (fit or test failure).
    pub failed: usize,
    pub replicates: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Mean test bandwidth over completed runs.
    pub mean_h: f64,
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl McReport {
    #[allow(clippy::too_many_arguments)]
    fn from_counts(
        scenario: String,
        statistic: &str,
        method: Method,
        runs: usize,
        rejections: usize,
        failed: usize,
        h_sum: f64,
        cfg: (usize, u64, f64),
    ) -> Self {
        let done = runs - failed;
        let rate = if done == 0 { f64::NAN } else { rejections as f64 / done as f64 };
        let se = if done == 0 { f64::NAN } else { (rate * (1.0 - rate) / done as f64).sqrt() };
        let replicates = if method.is_bootstrap() { cfg.0 } else { 0 };
        let mean_h = if done == 0 { f64::NAN } else { h_sum / done as f64 };
        McReport {
            scenario,
            statistic: statistic.into(),
            method,
            rate,
            se,
            runs,
            rejections,
            failed,
            replicates,
            seed: cfg.1,
            alpha: cfg.2,
            mean_h,
            wall_clock: Duration::ZERO,
        }
    }
}

/// Decision of one run for one method: `None` when the run failed.
type RunOutcome = (Vec<Option<Vec<bool>>>, f64);

fn aggregate(outcomes: &[RunOutcome], methods: &[Method], names: &[&str], scenario: &str, cfg: (usize, u64, f64), started: Instant) -> Vec<McReport> {
    let runs = outcomes.len();
    let mut out = Vec::new();
    for (k, &m) in methods.iter().enumerate() {
        for (j, name) in names.iter().enumerate() {
            let (mut rej, mut failed, mut h_sum) = (0, 0, 0.0);
            for (dec, h) in outcomes {
                match &dec[k] {
                    Some(d) => {
                        rej += d[j] as usize;
                        h_sum += h;
                    }
                    None => failed += 1,
                }
            }
            out.push(McReport::from_counts(scenario.to_string(), name, m, runs, rej, failed, h_sum, cfg));
        }
    }
    let elapsed = started.elapsed();
    out.iter_mut().for_each(|r| r.wall_clock = elapsed);
    out
}

/// Rejection rates of the lack-of-fit tests; two reports (`T`, `V`) per method.
pub fn run_lof_mc(sc: &LofScenario, methods: &[Method], cfg: &McConfig) -> Result<Vec<McReport>> {
    cfg.validate()?;
    cfg.lof.validate()?;
    cfg.lof.plan.validate()?;
    let started = Instant::now();
    let outcomes: Vec<RunOutcome> = (0..cfg.runs).into_par_iter().map(|r| lof_run(sc, methods, cfg, r)).collect();
    let failed = outcomes.iter().filter(|(d, _)| d.iter().any(Option::is_none)).count();
    if failed > 0 {
        log::warn!("{}: {failed} of {} runs had failures", sc.describe(), cfg.runs);
    }
    Ok(aggregate(&outcomes, methods, &["T", "V"], &sc.describe(), (cfg.lof.plan.replicates, cfg.seed, cfg.lof.alpha), started))
}

fn lof_run(sc: &LofScenario, methods: &[Method], cfg: &McConfig, r: usize) -> RunOutcome {
    let failed = || (vec![None; methods.len()], 0.0);
    let s = match gen_lof::<f64>(sc, &mut cfg.data_stream(r).rng()) {
        Ok(s) => s,
        Err(e) => {
            log::debug!("run {r}: data generation failed: {e}");
            return failed();
        }
    };
    let fm = if cfg.fixed_theta { fit_at_theta(sc.theta0, &s, &Linear1D, &cfg.lof.profile) } else { fit(&s, &Linear1D, &cfg.lof.profile) };
    let fm = match fm {
        Ok(fm) => fm,
        Err(e) => {
            log::debug!("run {r}: fit failed: {e}");
            return failed();
        }
    };
    let mut lc = cfg.lof.clone();
    lc.plan.seed = cfg.run_seed(r);
    let ctx = match LofContext::new(&fm, &s, &lc) {
        Ok(c) => c,
        Err(e) => {
            log::debug!("run {r}: {e}");
            return failed();
        }
    };
    let h = ctx.weights().bandwidth();
    let dec = methods
        .iter()
        .map(|&m| match ctx.run(m, &Linear1D) {
            Ok((t, v)) => Some(vec![t.reject, v.reject]),
            Err(e) => {
                log::debug!("run {r}, {}: {e}", m.as_str());
                None
            }
        })
        .collect();
    (dec, h)
}

/// Rejection rates of the significance tests; one report per method.
pub fn run_sig_mc(sc: &SigScenario, methods: &[Method], cfg: &McConfig) -> Result<Vec<McReport>> {
    cfg.validate()?;
    cfg.sig.validate()?;
    cfg.sig.plan.validate()?;
    let started = Instant::now();
    let outcomes: Vec<RunOutcome> = (0..cfg.runs).into_par_iter().map(|r| sig_run(sc, methods, cfg, r)).collect();
    let failed = outcomes.iter().filter(|(d, _)| d.iter().any(Option::is_none)).count();
    if failed > 0 {
        log::warn!("{}: {failed} of {} runs had failures", sc.describe(), cfg.runs);
    }
    Ok(aggregate(&outcomes, methods, &["I"], &sc.describe(), (cfg.sig.plan.replicates, cfg.seed, cfg.sig.alpha), started))
}

fn sig_run(sc: &SigScenario, methods: &[Method], cfg: &McConfig, r: usize) -> RunOutcome {
    let failed = || (vec![None; methods.len()], 0.0);
    let s = match gen_sig::<f64>(sc, &mut cfg.data_stream(r).rng()) {
        Ok(s) => s,
        Err(e) => {
            log::debug!("run {r}: data generation failed: {e}");
            return failed();
        }
    };
    let theta = if cfg.fixed_theta { Ok(sc.theta0) } else { estimate_theta(&s.full(), &cfg.sig.profile) };
    let theta = match theta {
        Ok(t) => t,
        Err(e) => {
            log::debug!("run {r}: fit failed: {e}");
            return failed();
        }
    };
    let mut sg = cfg.sig.clone();
    sg.plan.seed = cfg.run_seed(r);
    let ctx = match SigContext::new(theta, &s, &sg) {
        Ok(c) => c,
        Err(e) => {
            log::debug!("run {r}: {e}");
            return failed();
        }
    };
    let dec = methods
        .iter()
        .map(|&m| match ctx.run(m) {
            Ok(rep) => Some(vec![rep.reject]),
            Err(e) => {
                log::debug!("run {r}, {}: {e}", m.as_str());
                None
            }
        })
        .collect();
    (dec, ctx.h())
}

/// A scenario of either kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Scenario {
    Lof(LofScenario),
    Sig(SigScenario),
}

/// Rejection rates of `method` on `scenario` (one report per statistic).
pub fn run_mc(scenario: &Scenario, method: Method, cfg: &McConfig) -> Result<Vec<McReport>> {
    match scenario {
        Scenario::Lof(sc) => run_lof_mc(sc, &[method], cfg),
        Scenario::Sig(sc) => run_sig_mc(sc, &[method], cfg),
    }
}

/// Tables that can be reproduced.
pub const TABLES: [u8; 6] = [1, 2, 3, 5, 6, 7];

/// Which parts of a table grid to run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TableOptions {
    /// Methods to run; others are left empty. `None` runs all of them.
    pub methods: Option<Vec<Method>>,
    /// Significance models to run (rows); `None` runs all seven.
    pub models: Option<Vec<SigModel>>,
    /// Restrict table 5 to one sample size.
    pub n: Option<usize>,
}

impl TableOptions {
    fn wants(&self, m: Method) -> bool {
        self.methods.as_ref().is_none_or(|ms| ms.contains(&m))
    }

    fn selected(&self, ms: &[Method]) -> Vec<Method> {
        ms.iter().copied().filter(|&m| self.wants(m)).collect()
    }

    fn models(&self) -> Vec<SigModel> {
        self.models.clone().unwrap_or_else(|| SigModel::ALL.to_vec())
    }
}

/// A filled table: header, labelled rows of cells (empty when not run) and
/// the underlying reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableGrid {
    pub table: u8,
    pub header: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
    pub reports: Vec<McReport>,
}

impl TableGrid {
    /// CSV text, one row per alternative or model.
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for (label, cells) in &self.rows {
            out.push_str(label);
            for c in cells {
                out.push(',');
                if let Some(v) = c {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }
}

const LOF_METHODS: [Method; 5] = [Method::Swb, Method::Twb, Method::Mb, Method::Cmb, Method::Asym];
const SIG_METHODS: [Method; 4] = [Method::Mb, Method::Cmb, Method::Swb, Method::Twb];

fn find(reports: &[McReport], stat: &str, m: Method) -> Option<f64> {
    reports.iter().find(|r| r.statistic == stat && r.method == m).map(|r| r.rate)
}

pub fn run_table(table: u8, opts: &TableOptions, cfg: &McConfig) -> Result<TableGrid> {
    match table {
        1..=3 => lof_table(table, opts, cfg),
        5 => table5(opts, cfg),
        6 => table6(opts, cfg),
        7 => table7(opts, cfg),
        _ => Err(Error::Config(format!("unknown table {table}; available: 1, 2, 3, 5, 6, 7"))),
    }
}

fn lof_table(table: u8, opts: &TableOptions, cfg: &McConfig) -> Result<TableGrid> {
    let theta0 = [0.0, 0.5, 1.0][table as usize - 1];
    let methods = opts.selected(&LOF_METHODS);
    let mut header = vec!["alternative".to_string()];
    for stat in ["T", "V"] {
        header.extend(LOF_METHODS.iter().map(|m| format!("{stat}_{}", m.as_str())));
    }
    let (mut rows, mut reports) = (Vec::new(), Vec::new());
    for dev in Deviation::table_rows() {
        let sc = LofScenario::new(theta0, 200, dev);
        let reps = if methods.is_empty() { Vec::new() } else { run_lof_mc(&sc, &methods, cfg)? };
        let mut cells = Vec::new();
        for stat in ["T", "V"] {
            cells.extend(LOF_METHODS.iter().map(|&m| find(&reps, stat, m)));
        }
        rows.push((dev.label(), cells));
        reports.extend(reps);
    }
    Ok(TableGrid { table, header, rows, reports })
}

fn table5(opts: &TableOptions, cfg: &McConfig) -> Result<TableGrid> {
    let methods = opts.selected(&SIG_METHODS);
    let sizes = [75, 100];
    let mut header = vec!["model".to_string()];
    for n in sizes {
        header.extend(SIG_METHODS.iter().map(|m| format!("n{n}_{}", m.as_str())));
    }
    let (mut rows, mut reports) = (Vec::new(), Vec::new());
    for model in opts.models() {
        let mut cells = Vec::new();
        for n in sizes {
            let reps = if methods.is_empty() || opts.n.is_some_and(|k| k != n) { Vec::new() } else { run_sig_mc(&SigScenario::new(model, n), &methods, cfg)? };
            cells.extend(SIG_METHODS.iter().map(|&m| find(&reps, "I", m)));
            reports.extend(reps);
        }
        rows.push((model.label().to_string(), cells));
    }
    Ok(TableGrid { table: 5, header, rows, reports })
}

fn table6(opts: &TableOptions, cfg: &McConfig) -> Result<TableGrid> {
    let methods = opts.selected(&[Method::Mb, Method::Cmb]);
    let cv = cfg.sig.h.clone();
    let variants = [("cv", cv.clone()), ("2cv", cv.clone().scaled(2.0)), ("0.5cv", cv.clone().scaled(0.5)), ("0.2", BandwidthSpec::fixed(0.2))];
    let mut header = vec!["model".to_string()];
    for (name, _) in &variants {
        header.extend(["mb", "cmb"].iter().map(|m| format!("h={name}_{m}")));
    }
    header.push("mean_h_cv".into());
    let n = opts.n.unwrap_or(100);
    let (mut rows, mut reports) = (Vec::new(), Vec::new());
    for model in opts.models() {
        let mut cells = Vec::new();
        let mut mean_h = None;
        for (k, (_, spec)) in variants.iter().enumerate() {
            let mut c = cfg.clone();
            c.sig.h = spec.clone();
            let reps = if methods.is_empty() { Vec::new() } else { run_sig_mc(&SigScenario::new(model, n), &methods, &c)? };
            if k == 0 {
                mean_h = reps.first().map(|r| r.mean_h);
            }
            cells.extend([Method::Mb, Method::Cmb].iter().map(|&m| find(&reps, "I", m)));
            reports.extend(reps);
        }
        cells.push(mean_h);
        rows.push((model.label().to_string(), cells));
    }
    Ok(TableGrid { table: 6, header, rows, reports })
}

fn table7(opts: &TableOptions, cfg: &McConfig) -> Result<TableGrid> {
    let methods = opts.selected(&[Method::Mb, Method::Cmb]);
    let vs = [0.05, 0.1, 0.2];
    let mut header = vec!["model".to_string()];
    for v in vs {
        header.extend(["mb", "cmb"].iter().map(|m| format!("v={v}_{m}")));
    }
    let n = opts.n.unwrap_or(100);
    let (mut rows, mut reports) = (Vec::new(), Vec::new());
    for model in opts.models() {
        let mut cells = Vec::new();
        for v in vs {
            let mut c = cfg.clone();
            c.sig.psi_var = v;
            let reps = if methods.is_empty() { Vec::new() } else { run_sig_mc(&SigScenario::new(model, n), &methods, &c)? };
            cells.extend([Method::Mb, Method::Cmb].iter().map(|&m| find(&reps, "I", m)));
            reports.extend(reps);
        }
        rows.push((model.label().to_string(), cells));
    }
    Ok(TableGrid { table: 7, header, rows, reports })
}
