//! Experiment runner: configuration, single points, sweeps, the named
//! reproduction grids and the convention calibration report.
//!
//! SNRs are given in dB in configurations and converted to linear scale
//! here and nowhere else. Output is CSV with a fixed column order; rows are
//! written in grid order whatever the completion order of the workers.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr_model::{CorrelationKind, CorrelationSpec, GaussianMap};
use crate::error::{FdlError, Result};
use crate::error_prob::ModulationScheme;
use crate::joint_stats::{FadingModel, JointStats};
use crate::montecarlo::{self, CalibrationReport, CalibrationStatus, McConfig};
use crate::series::{SeriesConfig, StopRule};
use crate::specfun::{db_to_linear, linear_to_db};
use crate::swc_metrics::ThresholdProfile;
use crate::threshold_solver::{sec_matched_thresholds, solve_anpe_constraint, SolveResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Swc,
    Sec,
    Mrc,
}

impl Receiver {
    pub fn name(self) -> &'static str {
        match self {
            Receiver::Swc => "swc",
            Receiver::Sec => "sec",
            Receiver::Mrc => "mrc",
        }
    }
}

impl FromStr for Receiver {
    type Err = FdlError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "swc" => Ok(Receiver::Swc),
            "sec" => Ok(Receiver::Sec),
            "mrc" => Ok(Receiver::Mrc),
            other => Err(FdlError::Config(format!("unknown receiver '{other}' (expected swc, sec or mrc)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Correlation {
    Exponential,
    /// Dual-branch Rayleigh series; `ρ` is the squared SNR correlation.
    Bivariate,
    /// Exactly independent branches; `ρ` is ignored.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    Explicit,
    AnpeTarget,
    SecMatched,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Mc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Analytic => "analytic",
            Method::Mc => "mc",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub id: String,
    pub method: Method,
    pub out: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { id: "run".into(), method: Method::Analytic, out: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub receiver: Receiver,
    pub modulation: String,
    /// Constellation size `M`; ignored for BPSK.
    pub order: Option<u32>,
    pub m: f64,
    pub branches: usize,
    pub correlation: Correlation,
    pub rho: f64,
    pub delta: f64,
    pub convention: GaussianMap,
}

impl Default for SystemSection {
    fn default() -> Self {
        SystemSection {
            receiver: Receiver::Swc,
            modulation: "bpsk".into(),
            order: None,
            m: 1.0,
            branches: 2,
            correlation: Correlation::Exponential,
            rho: 0.5,
            delta: 0.0,
            convention: GaussianMap::ElementwiseSqrt,
        }
    }
}

/// `ḡ_1` grid in dB; a single point when `stop_db` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SnrSection {
    pub start_db: f64,
    pub stop_db: Option<f64>,
    pub step_db: Option<f64>,
}

impl Default for SnrSection {
    fn default() -> Self {
        SnrSection { start_db: 10.0, stop_db: None, step_db: None }
    }
}

/// Largest accepted number of grid points.
pub const MAX_GRID: usize = 10_000;

impl SnrSection {
    pub fn single(db: f64) -> Self {
        SnrSection { start_db: db, stop_db: None, step_db: None }
    }

    pub fn range(start_db: f64, stop_db: f64, step_db: f64) -> Self {
        SnrSection { start_db, stop_db: Some(stop_db), step_db: Some(step_db) }
    }

    pub fn grid(&self) -> Result<Vec<f64>> {
        if !self.start_db.is_finite() {
            return Err(FdlError::Config(format!("average SNR must be finite, got {} dB", self.start_db)));
        }
        let Some(stop) = self.stop_db else { return Ok(vec![self.start_db]) };
        let step = self.step_db.ok_or_else(|| FdlError::Config("an SNR range needs step_db".into()))?;
        if !(step > 0.0 && stop.is_finite() && stop >= self.start_db) {
            return Err(FdlError::Config(format!("invalid SNR range {}:{stop}:{step}", self.start_db)));
        }
        // half a part per million of slack keeps `stop` on decimal grids
        let n = ((stop - self.start_db) / step + 5e-7).floor() as usize + 1;
        if n > MAX_GRID {
            return Err(FdlError::Config(format!("SNR grid has {n} points, more than {MAX_GRID}")));
        }
        Ok((0..n).map(|i| self.start_db + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSection {
    pub policy: ThresholdPolicy,
    pub gt1_db: Option<f64>,
    /// Defaults to the number of branches.
    pub anpe_target: Option<f64>,
}

impl Default for ThresholdSection {
    fn default() -> Self {
        ThresholdSection { policy: ThresholdPolicy::AnpeTarget, gt1_db: None, anpe_target: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeriesSection {
    pub tol: f64,
    pub n_max: usize,
    pub rule: StopRule,
}

impl Default for SeriesSection {
    fn default() -> Self {
        let d = SeriesConfig::<f64>::default();
        SeriesSection { tol: d.tol, n_max: d.n_max, rule: d.rule }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSection {
    pub samples: u64,
    pub seed: u64,
    pub batch: u64,
    pub error_counting: bool,
}

impl Default for McSection {
    fn default() -> Self {
        let d = McConfig::default();
        McSection { samples: d.samples, seed: d.seed, batch: d.batch, error_counting: d.error_counting }
    }
}

/// Everything one run needs, read from TOML sections and CLI overrides.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub run: RunSection,
    pub system: SystemSection,
    pub snr: SnrSection,
    pub threshold: ThresholdSection,
    pub series: SeriesSection,
    pub mc: McSection,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| FdlError::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| FdlError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| FdlError::Config(e.to_string()))
    }

    pub fn modulation(&self) -> Result<ModulationScheme> {
        ModulationScheme::new(&self.system.modulation, self.system.order).map_err(as_config)
    }

    pub fn series_config(&self) -> SeriesConfig<f64> {
        SeriesConfig { tol: self.series.tol, n_max: self.series.n_max, rule: self.series.rule }
    }

    pub fn mc_config(&self) -> McConfig {
        McConfig { samples: self.mc.samples, seed: self.mc.seed, batch: self.mc.batch, error_counting: self.mc.error_counting }
    }

    pub fn anpe_target(&self) -> f64 {
        self.threshold.anpe_target.unwrap_or(self.system.branches as f64)
    }

    pub fn model(&self, gbar1_db: f64) -> Result<FadingModel<f64>> {
        FadingModel::with_decay(self.system.m, db_to_linear(gbar1_db), self.system.delta, self.system.branches)
    }

    pub fn spec(&self) -> Result<CorrelationSpec<f64>> {
        let s = &self.system;
        let kind = match s.correlation {
            Correlation::Exponential => CorrelationKind::Exponential { rho: s.rho },
            Correlation::Bivariate => CorrelationKind::Bivariate { rho: s.rho },
            Correlation::Independent => CorrelationKind::Iid { rho: 0.0 },
        };
        CorrelationSpec::new(kind, s.branches, s.convention)
    }

    /// Checks everything that can be checked without evaluating a series.
    pub fn validate(&self) -> Result<()> {
        let grid = self.snr.grid()?;
        self.modulation()?;
        self.series_config().validate().map_err(as_config)?;
        if self.run.method == Method::Mc {
            self.mc_config().validate().map_err(as_config)?;
        }
        self.spec().map_err(as_config)?;
        self.model(grid[0]).map_err(as_config)?;
        if self.system.correlation == Correlation::Bivariate && self.system.m != 1.0 {
            return Err(FdlError::Config("the bivariate correlation model requires m = 1".into()));
        }
        if self.system.receiver != Receiver::Mrc {
            match self.threshold.policy {
                ThresholdPolicy::Explicit => {
                    let g = self.threshold.gt1_db.ok_or_else(|| FdlError::Config("explicit threshold policy needs gt1_db".into()))?;
                    if !g.is_finite() {
                        return Err(FdlError::Config(format!("threshold must be finite, got {g} dB")));
                    }
                }
                ThresholdPolicy::AnpeTarget => {
                    let t = self.anpe_target();
                    if !(t > 1.0 && t.is_finite()) {
                        return Err(FdlError::Config(format!("ANPE target must exceed 1, got {t}")));
                    }
                }
                ThresholdPolicy::SecMatched => {}
            }
        }
        Ok(())
    }
}

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "FDL_THREADS";

/// Sizes the global worker pool from [`THREADS_ENV`]; returns the cap, if any.
pub fn configure_threads() -> Result<Option<usize>> {
    let Ok(raw) = std::env::var(THREADS_ENV) else { return Ok(None) };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| FdlError::Config(format!("{THREADS_ENV} must be a positive integer, got '{raw}'")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| FdlError::Config(format!("cannot size worker pool: {e}")))?;
    Ok(Some(n))
}

fn as_config(e: FdlError) -> FdlError {
    match e {
        FdlError::Config(_) => e,
        other => FdlError::Config(other.to_string()),
    }
}

/// One evaluated grid point. Columns are serialized in declaration order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub receiver: String,
    pub modulation: String,
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub branches: usize,
    pub gbar1_db: f64,
    pub gt1: Option<f64>,
    pub gt1_db: Option<f64>,
    pub pe: Option<f64>,
    pub anpe: Option<f64>,
    pub awt: Option<f64>,
    pub nmin: Option<usize>,
    pub method: String,
    pub std_error: Option<f64>,
    pub samples: Option<u64>,
    pub seed: Option<u64>,
    pub tol: f64,
    pub convention: String,
    pub status: String,
    pub detail: String,
}

impl ResultRow {
    fn blank(cfg: &ExperimentConfig, gbar1_db: f64) -> Self {
        let s = &cfg.system;
        let mc = cfg.run.method == Method::Mc;
        ResultRow {
            experiment: cfg.run.id.clone(),
            receiver: s.receiver.name().into(),
            modulation: cfg.modulation().map(|m| m.name()).unwrap_or_else(|_| s.modulation.clone()),
            m: s.m,
            rho: if s.correlation == Correlation::Independent { 0.0 } else { s.rho },
            delta: s.delta,
            branches: s.branches,
            gbar1_db,
            gt1: None,
            gt1_db: None,
            pe: None,
            anpe: None,
            awt: None,
            nmin: None,
            method: cfg.run.method.name().into(),
            std_error: None,
            samples: mc.then_some(cfg.mc.samples),
            seed: mc.then_some(cfg.mc.seed),
            tol: cfg.series.tol,
            convention: s.convention.name().into(),
            status: "ok".into(),
            detail: String::new(),
        }
    }

    /// Row recording a failed point with its diagnostics.
    pub fn failed(cfg: &ExperimentConfig, gbar1_db: f64, err: &FdlError) -> Self {
        ResultRow { status: "error".into(), detail: err.to_string(), ..Self::blank(cfg, gbar1_db) }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Threshold `g_{T_1}` (linear) for one point, or `None` for MRC.
pub fn resolve_threshold(cfg: &ExperimentConfig, model: &FadingModel<f64>, spec: &CorrelationSpec<f64>) -> Result<Option<f64>> {
    let s = &cfg.system;
    if s.receiver == Receiver::Mrc {
        return Ok(None);
    }
    let series = cfg.series_config();
    Ok(Some(match cfg.threshold.policy {
        ThresholdPolicy::Explicit => db_to_linear(cfg.threshold.gt1_db.ok_or_else(|| FdlError::Config("missing gt1_db".into()))?),
        ThresholdPolicy::AnpeTarget => solve_anpe_constraint(model, spec, s.delta, cfg.anpe_target(), &series)?.gt1,
        ThresholdPolicy::SecMatched => {
            let r = sec_matched_thresholds(model, spec, s.delta, &cfg.modulation()?, &series)?;
            if s.receiver == Receiver::Swc { r.swc.gt1 } else { r.sec.gt1 }
        }
    }))
}

/// Evaluates one grid point.
pub fn run_point(cfg: &ExperimentConfig, gbar1_db: f64) -> Result<ResultRow> {
    let s = &cfg.system;
    let model = cfg.model(gbar1_db)?;
    let spec = cfg.spec()?;
    let modulation = cfg.modulation()?;
    let series = cfg.series_config();
    let mut row = ResultRow::blank(cfg, gbar1_db);
    let gt1 = resolve_threshold(cfg, &model, &spec)?;
    row.gt1 = gt1;
    row.gt1_db = gt1.filter(|g| *g > 0.0).map(linear_to_db);
    let profile = gt1.map(|g| ThresholdProfile::new(g, s.delta, s.branches)).transpose()?;
    match cfg.run.method {
        Method::Analytic => {
            let js = JointStats::new(&model, &spec)?;
            match (s.receiver, &profile) {
                (Receiver::Swc, Some(p)) => {
                    let pe = js.swc_error_prob(p, &modulation, &series)?;
                    let met = js.metrics(p, &series)?;
                    row.pe = Some(pe.pe);
                    row.anpe = Some(met.anpe_swc);
                    row.awt = Some(met.awt);
                    row.nmin = Some(pe.nmin().max(met.nmin()));
                }
                (Receiver::Sec, Some(p)) => {
                    let pe = js.sec_error_prob(p, &modulation, &series)?;
                    let n = js.anpe_sec_series(p, &series)?;
                    row.pe = Some(pe.pe);
                    row.anpe = Some(n.value);
                    row.awt = Some(0.0);
                    row.nmin = Some(pe.nmin().max(n.n_min()));
                }
                (Receiver::Mrc, _) if s.branches == 1 => {
                    // a single branch with a zero threshold is the branch itself
                    let p = ThresholdProfile::new(0.0, 0.0, 1)?;
                    row.pe = Some(js.swc_error_prob(&p, &modulation, &series)?.pe);
                    row.anpe = Some(1.0);
                    row.awt = Some(0.0);
                    row.nmin = Some(0);
                }
                (Receiver::Mrc, _) => {
                    return Err(FdlError::Unsupported("analytic maximal-ratio combining covers a single branch only; use the mc method".into()));
                }
                _ => unreachable!("SWC and SEC always resolve a threshold"),
            }
        }
        Method::Mc => {
            let mc = cfg.mc_config();
            match (s.receiver, &profile) {
                (Receiver::Swc, Some(p)) => {
                    let r = montecarlo::simulate_swc(&model, &spec, p, &modulation, &mc)?;
                    row.pe = Some(r.pe.mean);
                    row.std_error = Some(r.pe.std_error);
                    row.anpe = Some(r.anpe.mean);
                    row.awt = Some(r.awt.mean);
                }
                (Receiver::Sec, Some(p)) => {
                    let r = montecarlo::simulate_sec(&model, &spec, p, &modulation, &mc)?;
                    row.pe = Some(r.pe.mean);
                    row.std_error = Some(r.pe.std_error);
                    row.anpe = Some(r.anpe.mean);
                    row.awt = Some(0.0);
                }
                (Receiver::Mrc, _) => {
                    let r = montecarlo::simulate_mrc(&model, &spec, &modulation, &mc)?;
                    row.pe = Some(r.mean);
                    row.std_error = Some(r.std_error);
                    row.anpe = Some(s.branches as f64);
                    row.awt = Some(0.0);
                }
                _ => unreachable!("SWC and SEC always resolve a threshold"),
            }
        }
    }
    Ok(row)
}

/// Rows of a sweep together with the first error met, in grid order.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<ResultRow>,
    pub first_error: Option<FdlError>,
}

impl SweepOutcome {
    fn collect(results: Vec<(ResultRow, Option<FdlError>)>) -> Self {
        let first_error = results.iter().find_map(|(_, e)| e.clone());
        SweepOutcome { rows: results.into_iter().map(|(r, _)| r).collect(), first_error }
    }

    fn extend(&mut self, other: SweepOutcome) {
        self.rows.extend(other.rows);
        if self.first_error.is_none() {
            self.first_error = other.first_error;
        }
    }
}

fn guarded_point(cfg: &ExperimentConfig, db: f64) -> (ResultRow, Option<FdlError>) {
    match run_point(cfg, db) {
        Ok(r) => (r, None),
        Err(e) => (ResultRow::failed(cfg, db, &e), Some(e)),
    }
}

/// Evaluates every point of the SNR grid on the worker pool.
pub fn sweep(cfg: &ExperimentConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let grid = cfg.snr.grid()?;
    Ok(SweepOutcome::collect(grid.par_iter().map(|&db| guarded_point(cfg, db)).collect()))
}

/// Evaluates several configurations; rows follow configuration order.
pub fn sweep_all(cfgs: &[ExperimentConfig]) -> Result<SweepOutcome> {
    for c in cfgs {
        c.validate()?;
    }
    let jobs: Vec<(usize, f64)> = cfgs.iter().enumerate().map(|(i, c)| c.snr.grid().map(|g| g.into_iter().map(move |d| (i, d)))).collect::<Result<Vec<_>>>()?.into_iter().flatten().collect();
    Ok(SweepOutcome::collect(jobs.par_iter().map(|&(i, db)| guarded_point(&cfgs[i], db)).collect()))
}

pub fn write_rows<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    write_records(rows, out)
}

pub fn write_records<R: Serialize, W: Write>(rows: &[R], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Threshold solution of one point, for `solve-threshold`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub experiment: String,
    pub receiver: String,
    pub policy: String,
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    #[serde(rename = "L")]
    pub branches: usize,
    pub gbar1_db: f64,
    pub target: Option<f64>,
    pub gt1: Option<f64>,
    pub gt1_db: Option<f64>,
    pub achieved: Option<f64>,
    pub iterations: Option<usize>,
    pub flat: Option<bool>,
    pub status: String,
    pub detail: String,
}

fn threshold_point(cfg: &ExperimentConfig, db: f64) -> Result<SolveResult<f64>> {
    let model = cfg.model(db)?;
    let spec = cfg.spec()?;
    let series = cfg.series_config();
    let s = &cfg.system;
    match cfg.threshold.policy {
        ThresholdPolicy::SecMatched => {
            let r = sec_matched_thresholds(&model, &spec, s.delta, &cfg.modulation()?, &series)?;
            Ok(if s.receiver == Receiver::Sec { r.sec } else { r.swc })
        }
        _ => solve_anpe_constraint(&model, &spec, s.delta, cfg.anpe_target(), &series),
    }
}

/// Solved thresholds over the SNR grid (explicit policies become ANPE targets).
pub fn solve_thresholds(cfg: &ExperimentConfig) -> Result<(Vec<ThresholdRow>, Option<FdlError>)> {
    cfg.validate()?;
    let grid = cfg.snr.grid()?;
    let s = &cfg.system;
    let policy = match cfg.threshold.policy {
        ThresholdPolicy::SecMatched => "sec-matched",
        _ => "anpe-target",
    };
    let results: Vec<_> = grid.par_iter().map(|&db| (db, threshold_point(cfg, db))).collect();
    let mut first = None;
    let rows = results
        .into_iter()
        .map(|(db, r)| {
            let base = ThresholdRow {
                experiment: cfg.run.id.clone(),
                receiver: s.receiver.name().into(),
                policy: policy.into(),
                m: s.m,
                rho: s.rho,
                delta: s.delta,
                branches: s.branches,
                gbar1_db: db,
                target: None,
                gt1: None,
                gt1_db: None,
                achieved: None,
                iterations: None,
                flat: None,
                status: "ok".into(),
                detail: String::new(),
            };
            match r {
                Ok(r) => ThresholdRow {
                    target: r.target,
                    gt1: Some(r.gt1),
                    gt1_db: (r.gt1 > 0.0).then(|| linear_to_db(r.gt1)),
                    achieved: Some(r.achieved),
                    iterations: Some(r.iterations),
                    flat: Some(r.flat),
                    ..base
                },
                Err(e) => {
                    let row = ThresholdRow { status: "error".into(), detail: e.to_string(), ..base };
                    first.get_or_insert(e);
                    row
                }
            }
        })
        .collect();
    Ok((rows, first))
}

/// Human-readable calibration report at the first grid point.
pub fn calibrate(cfg: &ExperimentConfig) -> Result<(CalibrationReport, String)> {
    cfg.validate()?;
    let db = cfg.snr.grid()?[0];
    let model = cfg.model(db)?;
    let spec = cfg.spec()?;
    let mc = cfg.mc_config();
    mc.validate().map_err(as_config)?;
    let report = montecarlo::calibrate_convention(&model, &spec, &cfg.series_config(), &mc)?;
    Ok((report.clone(), render_calibration(cfg, db, &report)))
}

pub fn render_calibration(cfg: &ExperimentConfig, gbar1_db: f64, r: &CalibrationReport) -> String {
    let s = &cfg.system;
    let mut out = String::new();
    let _ = writeln!(out, "convention calibration");
    let _ = writeln!(out, "  L = {}, m = {}, rho = {}, delta = {}, gbar1 = {gbar1_db} dB", s.branches, s.m, s.rho, s.delta);
    let _ = writeln!(out, "  samples = {}, seed = {}, series tol = {}", r.samples, r.seed, cfg.series.tol);
    let _ = writeln!(out, "  agreement threshold: max |z| < {}", montecarlo::Z_LIMIT);
    for sc in &r.scores {
        match (sc.max_abs_z, &sc.error) {
            (Some(z), _) => {
                let _ = writeln!(out, "  {:<12} max |z| = {z:10.3}  {}", sc.convention.name(), if sc.matches() { "consistent" } else { "inconsistent" });
            }
            (None, Some(e)) => {
                let _ = writeln!(out, "  {:<12} series unavailable: {e}", sc.convention.name());
            }
            _ => {}
        }
    }
    let verdict = match r.status {
        CalibrationStatus::Matched(c) => format!("matched: {}", c.name()),
        CalibrationStatus::Inconclusive => "inconclusive: both conventions agree within noise".into(),
        CalibrationStatus::NoMatch => "no convention agrees".into(),
    };
    let _ = writeln!(out, "  verdict: {verdict}");
    let _ = writeln!(out, "  probe points (series | empirical ± std error per convention):");
    for (k, p) in r.probes.iter().enumerate() {
        let pts: Vec<String> = p.iter().map(|x| format!("{x:.4}")).collect();
        let _ = write!(out, "    [{}]", pts.join(", "));
        for sc in &r.scores {
            let e = &sc.empirical[k];
            match sc.series.get(k) {
                Some(v) => {
                    let _ = write!(out, "  {}: {v:.6} | {:.6} ± {:.1e}", sc.convention.name(), e.mean, e.std_error);
                }
                None => {
                    let _ = write!(out, "  {}: - | {:.6} ± {:.1e}", sc.convention.name(), e.mean, e.std_error);
                }
            }
        }
        let _ = writeln!(out);
    }
    out
}

/// Named reproduction grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reproduction {
    Fig1,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
    FigRho,
    Table1,
}

impl Reproduction {
    pub const ALL: [Reproduction; 7] =
        [Reproduction::Fig1, Reproduction::Fig3, Reproduction::Fig4, Reproduction::Fig5, Reproduction::Fig6, Reproduction::FigRho, Reproduction::Table1];

    pub fn name(self) -> &'static str {
        match self {
            Reproduction::Fig1 => "fig1",
            Reproduction::Fig3 => "fig3",
            Reproduction::Fig4 => "fig4",
            Reproduction::Fig5 => "fig5",
            Reproduction::Fig6 => "fig6",
            Reproduction::FigRho => "fig-rho",
            Reproduction::Table1 => "table1",
        }
    }
}

impl FromStr for Reproduction {
    type Err = FdlError;
    fn from_str(s: &str) -> Result<Self> {
        Reproduction::ALL
            .into_iter()
            .find(|r| r.name() == s.to_ascii_lowercase())
            .ok_or_else(|| FdlError::Config(format!("unknown reproduction '{s}' (expected one of fig1, fig3, fig4, fig5, fig6, fig-rho, table1)")))
    }
}

/// Knobs shared by every reproduction grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproOptions {
    pub series: SeriesSection,
    pub mc: McSection,
    pub convention: GaussianMap,
    /// Correlation of the correlated curves.
    pub rho: f64,
    /// Correlation standing in for independent branches.
    pub iid_rho: f64,
    pub snr: SnrSection,
}

impl Default for ReproOptions {
    fn default() -> Self {
        ReproOptions {
            series: SeriesSection::default(),
            mc: McSection::default(),
            convention: GaussianMap::ElementwiseSqrt,
            rho: 0.9,
            iid_rho: crate::corr_model::IID_RHO,
            snr: SnrSection::range(0.0, 15.0, 2.5),
        }
    }
}

struct Curve<'a> {
    receiver: Receiver,
    modulation: &'a str,
    order: Option<u32>,
    m: f64,
    branches: usize,
    rho: f64,
    delta: f64,
    policy: ThresholdPolicy,
    anpe_target: Option<f64>,
    method: Method,
}

fn curve_config(name: &str, o: &ReproOptions, c: Curve) -> ExperimentConfig {
    ExperimentConfig {
        run: RunSection { id: name.into(), method: c.method, out: None },
        system: SystemSection {
            receiver: c.receiver,
            modulation: c.modulation.into(),
            order: c.order,
            m: c.m,
            branches: c.branches,
            correlation: Correlation::Exponential,
            rho: c.rho,
            delta: c.delta,
            convention: o.convention,
        },
        snr: o.snr.clone(),
        threshold: ThresholdSection { policy: c.policy, gt1_db: None, anpe_target: c.anpe_target },
        series: o.series.clone(),
        mc: o.mc.clone(),
    }
}

/// Configurations behind a figure grid, in output order.
pub fn reproduction_configs(which: Reproduction, o: &ReproOptions) -> Vec<ExperimentConfig> {
    let name = which.name();
    let rhos = [o.iid_rho, o.rho];
    let mut out = Vec::new();
    let analytic = |receiver, modulation, order, m, branches, rho, delta, policy, anpe_target| Curve {
        receiver,
        modulation,
        order,
        m,
        branches,
        rho,
        delta,
        policy,
        anpe_target,
        method: Method::Analytic,
    };
    match which {
        Reproduction::Fig1 | Reproduction::Fig5 => {
            for m in [1.0, 3.0] {
                for rho in rhos {
                    for rx in [Receiver::Swc, Receiver::Sec] {
                        out.push(curve_config(name, o, analytic(rx, "pam", Some(4), m, 3, rho, 0.0, ThresholdPolicy::SecMatched, None)));
                    }
                }
            }
        }
        Reproduction::Fig3 => {
            for l in [2usize, 5] {
                for rho in rhos {
                    out.push(curve_config(name, o, analytic(Receiver::Swc, "bpsk", None, 1.0, l, rho, 0.1, ThresholdPolicy::AnpeTarget, Some(l as f64))));
                    out.push(curve_config(name, o, Curve { method: Method::Mc, ..analytic(Receiver::Mrc, "bpsk", None, 1.0, l, rho, 0.1, ThresholdPolicy::AnpeTarget, None) }));
                }
            }
        }
        Reproduction::Fig4 => {
            for (modulation, order) in [("bpsk", None), ("qam", Some(16))] {
                for l in [3usize, 5] {
                    for rho in rhos {
                        out.push(curve_config(name, o, analytic(Receiver::Swc, modulation, order, 2.0, l, rho, 0.1, ThresholdPolicy::AnpeTarget, Some(l as f64))));
                        out.push(curve_config(name, o, Curve { method: Method::Mc, ..analytic(Receiver::Mrc, modulation, order, 2.0, l, rho, 0.1, ThresholdPolicy::AnpeTarget, None) }));
                    }
                }
            }
        }
        Reproduction::Fig6 => {
            for m in [1.0, 2.0] {
                for rho in rhos {
                    out.push(curve_config(name, o, analytic(Receiver::Swc, "bpsk", None, m, 5, rho, 0.1, ThresholdPolicy::AnpeTarget, Some(5.0))));
                }
            }
        }
        Reproduction::FigRho => {
            let grid = [o.iid_rho, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95];
            for (modulation, order) in [("qam", Some(4)), ("qam", Some(64))] {
                for m in [1.0, 3.0] {
                    for rho in grid {
                        let mut c = curve_config(name, o, analytic(Receiver::Swc, modulation, order, m, 3, rho, 0.1, ThresholdPolicy::AnpeTarget, Some(3.0)));
                        c.snr = SnrSection::single(10.0);
                        out.push(c);
                    }
                }
            }
        }
        Reproduction::Table1 => {}
    }
    out
}

/// One column of the reference minimum-term grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NminColumn {
    pub label: &'static str,
    pub branches: usize,
    pub m: f64,
    pub modulations: Vec<ModulationScheme>,
    pub delta: f64,
    /// `None` selects SEC-matched thresholds, `Some(t)` pins the ANPE.
    pub anpe_target: Option<f64>,
}

/// The six configurations whose series counts are tabulated: the
/// SEC-matched 4-PAM curves and the ANPE-pinned BPSK / 16-QAM curves.
pub fn nmin_columns() -> Vec<NminColumn> {
    use ModulationScheme::*;
    vec![
        NminColumn { label: "L3m1", branches: 3, m: 1.0, modulations: vec![Pam(4)], delta: 0.0, anpe_target: None },
        NminColumn { label: "L3m3", branches: 3, m: 3.0, modulations: vec![Pam(4)], delta: 0.0, anpe_target: None },
        NminColumn { label: "L2m1", branches: 2, m: 1.0, modulations: vec![Bpsk], delta: 0.1, anpe_target: Some(2.0) },
        NminColumn { label: "L5m1", branches: 5, m: 1.0, modulations: vec![Bpsk], delta: 0.1, anpe_target: Some(5.0) },
        NminColumn { label: "L3m2", branches: 3, m: 2.0, modulations: vec![Bpsk, Qam(16)], delta: 0.1, anpe_target: Some(3.0) },
        NminColumn { label: "L5m2", branches: 5, m: 2.0, modulations: vec![Bpsk, Qam(16)], delta: 0.1, anpe_target: Some(5.0) },
    ]
}

/// Per-dimension term counts at one grid point, split by series family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NminRow {
    pub column: String,
    #[serde(rename = "L")]
    pub branches: usize,
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    pub gbar1_db: f64,
    pub tol: f64,
    /// Maximum over every series below.
    pub nmin: usize,
    pub nmin_anpe_awt: usize,
    pub nmin_swc_pe: usize,
    pub nmin_sec_pe: usize,
    pub nmin_anpe_sec: usize,
    pub kernel_calls: usize,
}

/// Term counts of every series entering the curves of `col` at one point.
pub fn nmin_point(col: &NminColumn, rho: f64, gbar1_db: f64, series: &SeriesConfig<f64>, convention: GaussianMap) -> Result<NminRow> {
    let model = FadingModel::with_decay(col.m, db_to_linear(gbar1_db), col.delta, col.branches)?;
    let spec = CorrelationSpec::new(CorrelationKind::Exponential { rho }, col.branches, convention)?;
    let js = JointStats::new(&model, &spec)?;
    let mut row = NminRow {
        column: col.label.into(),
        branches: col.branches,
        m: col.m,
        rho,
        delta: col.delta,
        gbar1_db,
        tol: series.tol,
        nmin: 0,
        nmin_anpe_awt: 0,
        nmin_swc_pe: 0,
        nmin_sec_pe: 0,
        nmin_anpe_sec: 0,
        kernel_calls: 0,
    };
    for md in &col.modulations {
        let gt = match col.anpe_target {
            Some(t) => solve_anpe_constraint(&model, &spec, col.delta, t, series)?.gt1,
            None => {
                let r = sec_matched_thresholds(&model, &spec, col.delta, md, series)?;
                let p = ThresholdProfile::new(r.sec.gt1, col.delta, col.branches)?;
                let sec = js.sec_error_prob(&p, md, series)?;
                row.nmin_sec_pe = row.nmin_sec_pe.max(sec.nmin());
                row.nmin_anpe_sec = row.nmin_anpe_sec.max(js.anpe_sec_series(&p, series)?.n_min());
                row.kernel_calls += sec.kernel_calls;
                r.swc.gt1
            }
        };
        let p = ThresholdProfile::new(gt, col.delta, col.branches)?;
        row.nmin_anpe_awt = row.nmin_anpe_awt.max(js.metrics(&p, series)?.nmin());
        let pe = js.swc_error_prob(&p, md, series)?;
        row.nmin_swc_pe = row.nmin_swc_pe.max(pe.nmin());
        row.kernel_calls += pe.kernel_calls;
    }
    row.nmin = row.nmin_anpe_awt.max(row.nmin_swc_pe).max(row.nmin_sec_pe).max(row.nmin_anpe_sec);
    Ok(row)
}

/// The full minimum-term grid, column-major, evaluated on the worker pool.
pub fn nmin_table(rho: f64, grid_db: &[f64], series: &SeriesConfig<f64>, convention: GaussianMap) -> Result<Vec<NminRow>> {
    let jobs: Vec<(NminColumn, f64)> = nmin_columns().into_iter().flat_map(|c| grid_db.iter().map(move |&d| (c.clone(), d))).collect();
    jobs.par_iter().map(|(c, d)| nmin_point(c, rho, *d, series, convention)).collect()
}

/// Files written by [`reproduce`].
#[derive(Debug, Clone, PartialEq)]
pub struct ReproOutput {
    pub csv: PathBuf,
    pub config: PathBuf,
    pub rows: usize,
    pub first_error: Option<FdlError>,
}

#[derive(Serialize)]
struct ConfigEcho<'a> {
    reproduction: &'a str,
    experiment: &'a [ExperimentConfig],
}

/// Writes `<dir>/<name>.csv` and the resolved configurations next to it.
pub fn reproduce(which: Reproduction, o: &ReproOptions, dir: &Path) -> Result<ReproOutput> {
    fs::create_dir_all(dir)?;
    let csv = dir.join(format!("{}.csv", which.name()));
    let config = dir.join(format!("{}.config.toml", which.name()));
    if which == Reproduction::Table1 {
        let series = SeriesConfig { tol: o.series.tol, n_max: o.series.n_max, rule: o.series.rule };
        series.validate()?;
        let rows = nmin_table(o.rho, &o.snr.grid()?, &series, o.convention)?;
        write_records(&rows, fs::File::create(&csv)?)?;
        let echo = format!(
            "reproduction = \"table1\"\nrho = {}\nconvention = \"{}\"\n\n[snr]\n{}\n[series]\n{}",
            o.rho,
            o.convention.name(),
            toml::to_string(&o.snr).map_err(|e| FdlError::Config(e.to_string()))?,
            toml::to_string(&o.series).map_err(|e| FdlError::Config(e.to_string()))?
        );
        fs::write(&config, echo)?;
        return Ok(ReproOutput { csv, config, rows: rows.len(), first_error: None });
    }
    let cfgs = reproduction_configs(which, o);
    let mut outcome = SweepOutcome { rows: Vec::new(), first_error: None };
    outcome.extend(sweep_all(&cfgs)?);
    write_rows(&outcome.rows, fs::File::create(&csv)?)?;
    let echo = toml::to_string(&ConfigEcho { reproduction: which.name(), experiment: &cfgs }).map_err(|e| FdlError::Config(e.to_string()))?;
    fs::write(&config, echo)?;
    Ok(ReproOutput { csv, config, rows: outcome.rows.len(), first_error: outcome.first_error })
}
