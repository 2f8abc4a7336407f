//! Monte Carlo reference for the series results.
//!
//! Branch SNRs are drawn by Gaussian decomposition,
//! `g_ℓ = ḡ_ℓ/(2m) · Σ_{j<2m} X_{j,ℓ}²`, where each `X_j` is a zero-mean
//! unit-variance Gaussian `L`-vector with the sampling correlation of the
//! correlation model and the `2m` components are mutually independent.
//!
//! Work is split into batches of `cfg.batch` samples. Batch `k` draws from
//! ChaCha8 stream `k` of `cfg.seed`, and batch accumulators are merged in
//! batch order, so results are bit-identical for any thread count.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::corr_model::{CorrelationSpec, GaussianMap};
use crate::error::{FdlError, Result};
use crate::error_prob::ModulationScheme;
use crate::joint_stats::{FadingModel, JointStats};
use crate::scalar::Real;
use crate::series::SeriesConfig;
use crate::swc_metrics::ThresholdProfile;

/// Smallest sample count for which an estimate is reported.
pub const MIN_SAMPLES: u64 = 10_000;

/// A scan-and-wait access that needs more redraws than this is taken as
/// evidence of an acceptance probability below about `10⁻⁶`.
pub const WAIT_LIMIT: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    pub batch: u64,
    /// Count BPSK bit errors over simulated noise instead of averaging the
    /// conditional error probability.
    pub error_counting: bool,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { samples: 1_000_000, seed: 1, batch: 1 << 16, error_counting: false }
    }
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Result<Self> {
        let cfg = McConfig { samples, seed, ..Self::default() };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples < MIN_SAMPLES {
            return Err(FdlError::Domain(format!("at least {MIN_SAMPLES} samples are required, got {}", self.samples)));
        }
        if self.batch == 0 {
            return Err(FdlError::Domain("batch size must be positive".into()));
        }
        Ok(())
    }

    fn batches(&self) -> impl IndexedParallelIterator<Item = (u64, u64)> + '_ {
        let n = self.samples.div_ceil(self.batch) as usize;
        (0..n).into_par_iter().map(move |k| {
            let k = k as u64;
            (k, self.batch.min(self.samples - k * self.batch))
        })
    }

    fn rng(&self, batch: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(batch);
        rng
    }
}

/// Sample mean with `std_error = sample std / √samples`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl McEstimate {
    /// `(x − mean) / std_error`; infinite when the estimate has no spread
    /// and disagrees.
    pub fn z_score(&self, x: f64) -> f64 {
        let d = x - self.mean;
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

/// Mean and centred sum of squares; merged with Chan's update.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if self.n == 0 {
            return o;
        }
        if o.n == 0 {
            return self;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments {
            n,
            mean: self.mean + d * o.n as f64 / n as f64,
            m2: self.m2 + o.m2 + d * d * (self.n as f64 * o.n as f64) / n as f64,
        }
    }

    fn estimate(&self) -> McEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate { mean: self.mean, std_error: (var / self.n as f64).sqrt(), samples: self.n }
    }
}

fn merge_all(parts: Vec<Vec<Moments>>, width: usize) -> Vec<McEstimate> {
    let total = parts.into_iter().fold(vec![Moments::default(); width], |acc, p| acc.into_iter().zip(p).map(|(a, b)| a.merge(b)).collect());
    total.iter().map(Moments::estimate).collect()
}

/// Correlated Gamma SNR generator for one model and correlation.
#[derive(Debug, Clone)]
pub struct SnrSampler {
    gbar: Vec<f64>,
    factor: Vec<Vec<f64>>,
    components: usize,
}

impl SnrSampler {
    pub fn new<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>) -> Result<Self> {
        let l = model.branches();
        if spec.branches() != l {
            return Err(FdlError::DimensionMismatch { expected: l, got: spec.branches() });
        }
        let two_m = 2.0 * model.m().as_f64();
        if two_m.fract() != 0.0 || two_m < 1.0 {
            return Err(FdlError::Unsupported(format!("Gaussian decomposition needs 2m to be a positive integer, got m = {}", model.m())));
        }
        let f = spec.sampling_correlation().psd_factor();
        Ok(SnrSampler {
            gbar: model.gbar().iter().map(|g| g.as_f64()).collect(),
            factor: (0..l).map(|i| (0..l).map(|k| f.get(i, k).as_f64()).collect()).collect(),
            components: two_m as usize,
        })
    }

    pub fn branches(&self) -> usize {
        self.gbar.len()
    }

    /// Overwrites `out` with one SNR vector; `z` is scratch of length `L`.
    pub fn draw<R: Rng>(&self, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
        out.fill(0.0);
        for _ in 0..self.components {
            for v in z.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            for (o, row) in out.iter_mut().zip(&self.factor) {
                let x: f64 = row.iter().zip(z.iter()).map(|(a, b)| a * b).sum();
                *o += x * x;
            }
        }
        let scale = 1.0 / self.components as f64;
        for (o, g) in out.iter_mut().zip(&self.gbar) {
            *o *= g * scale;
        }
    }

    /// Runs `body` over every sample of every batch; `width` accumulators.
    fn run<F>(&self, cfg: &McConfig, width: usize, body: F) -> Result<Vec<McEstimate>>
    where
        F: Fn(&mut ChaCha8Rng, &mut Scratch, &mut [Moments]) -> Result<()> + Sync,
    {
        cfg.validate()?;
        let parts: Vec<Vec<Moments>> = cfg
            .batches()
            .map(|(k, n)| {
                let mut rng = cfg.rng(k);
                let mut s = Scratch::new(self.branches());
                let mut acc = vec![Moments::default(); width];
                for _ in 0..n {
                    body(&mut rng, &mut s, &mut acc)?;
                }
                Ok(acc)
            })
            .collect::<Result<_>>()?;
        Ok(merge_all(parts, width))
    }

    /// Mean branch SNRs, used as a construction check.
    pub fn mean_snr(&self, cfg: &McConfig) -> Result<Vec<McEstimate>> {
        self.run(cfg, self.branches(), |rng, s, acc| {
            s.fill(self, rng);
            for (a, &g) in acc.iter_mut().zip(&s.g) {
                a.push(g);
            }
            Ok(())
        })
    }
}

struct Scratch {
    z: Vec<f64>,
    g: Vec<f64>,
}

impl Scratch {
    fn new(l: usize) -> Self {
        Scratch { z: vec![0.0; l], g: vec![0.0; l] }
    }

    fn fill<R: Rng>(&mut self, sampler: &SnrSampler, rng: &mut R) {
        sampler.draw(rng, &mut self.z, &mut self.g);
    }
}

/// Error sample at SNR `g`: the conditional probability, or a simulated
/// BPSK decision when counting errors.
fn error_sample<R: Rng>(modulation: &ModulationScheme, counting: bool, g: f64, rng: &mut R) -> f64 {
    if counting {
        let n: f64 = rng.sample(StandardNormal);
        if (2.0 * g).sqrt() + n < 0.0 { 1.0 } else { 0.0 }
    } else {
        modulation.conditional(g)
    }
}

fn check_modulation(modulation: &ModulationScheme, cfg: &McConfig) -> Result<()> {
    modulation.validate()?;
    if cfg.error_counting && *modulation != ModulationScheme::Bpsk {
        return Err(FdlError::Unsupported("error counting is implemented for BPSK only".into()));
    }
    Ok(())
}

fn thresholds_f64<T: Real>(profile: &ThresholdProfile<T>, l: usize) -> Result<Vec<f64>> {
    if profile.branches != l {
        return Err(FdlError::DimensionMismatch { expected: l, got: profile.branches });
    }
    Ok(profile.thresholds().into_iter().map(|t| t.as_f64()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SwcSimulation {
    pub pe: McEstimate,
    pub anpe: McEstimate,
    pub awt: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecSimulation {
    pub pe: McEstimate,
    pub anpe: McEstimate,
}

/// Scan-and-wait combining, one sample per channel access. A waiting period
/// redraws every branch independently of the previous period.
pub fn simulate_swc<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    profile: &ThresholdProfile<T>,
    modulation: &ModulationScheme,
    cfg: &McConfig,
) -> Result<SwcSimulation> {
    let sampler = SnrSampler::new(model, spec)?;
    let t = thresholds_f64(profile, sampler.branches())?;
    check_modulation(modulation, cfg)?;
    let est = sampler.run(cfg, 3, |rng, s, acc| {
        let mut estimations = 0u64;
        for waits in 0..=WAIT_LIMIT {
            s.fill(&sampler, rng);
            for (l, (&g, &tl)) in s.g.iter().zip(&t).enumerate() {
                // the first branch accepts at equality, later ones strictly above
                if g > tl || (l == 0 && g == tl) {
                    estimations += l as u64 + 1;
                    acc[0].push(error_sample(modulation, cfg.error_counting, g, rng));
                    acc[1].push(estimations as f64);
                    acc[2].push(waits as f64);
                    return Ok(());
                }
            }
            estimations += t.len() as u64;
        }
        Err(FdlError::Pathological(format!("no branch accepted in {WAIT_LIMIT} consecutive periods; acceptance probability is below 1e-6")))
    })?;
    Ok(SwcSimulation { pe: est[0], anpe: est[1], awt: est[2] })
}

/// Switch-and-examine combining: on total failure the last branch is used.
pub fn simulate_sec<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    profile: &ThresholdProfile<T>,
    modulation: &ModulationScheme,
    cfg: &McConfig,
) -> Result<SecSimulation> {
    let sampler = SnrSampler::new(model, spec)?;
    let t = thresholds_f64(profile, sampler.branches())?;
    check_modulation(modulation, cfg)?;
    let last = t.len() - 1;
    let est = sampler.run(cfg, 2, |rng, s, acc| {
        s.fill(&sampler, rng);
        let l = (0..last).find(|&l| s.g[l] > t[l] || (l == 0 && s.g[0] == t[0])).unwrap_or(last);
        acc[0].push(error_sample(modulation, cfg.error_counting, s.g[l], rng));
        acc[1].push(l as f64 + 1.0);
        Ok(())
    })?;
    Ok(SecSimulation { pe: est[0], anpe: est[1] })
}

/// Maximal-ratio combining: the error probability at `Σ_ℓ g_ℓ`.
pub fn simulate_mrc<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, modulation: &ModulationScheme, cfg: &McConfig) -> Result<McEstimate> {
    let sampler = SnrSampler::new(model, spec)?;
    check_modulation(modulation, cfg)?;
    let est = sampler.run(cfg, 1, |rng, s, acc| {
        s.fill(&sampler, rng);
        let g = s.g.iter().sum();
        acc[0].push(error_sample(modulation, cfg.error_counting, g, rng));
        Ok(())
    })?;
    Ok(est[0])
}

/// Fraction of samples with `g ≤ point` componentwise, one estimate per point.
pub fn empirical_joint_cdf<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, points: &[Vec<T>], cfg: &McConfig) -> Result<Vec<McEstimate>> {
    let sampler = SnrSampler::new(model, spec)?;
    let l = sampler.branches();
    let pts: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            if p.len() != l {
                return Err(FdlError::DimensionMismatch { expected: l, got: p.len() });
            }
            Ok(p.iter().map(|x| x.as_f64()).collect())
        })
        .collect::<Result<_>>()?;
    sampler.run(cfg, pts.len(), |rng, s, acc| {
        s.fill(&sampler, rng);
        for (a, p) in acc.iter_mut().zip(&pts) {
            a.push(if s.g.iter().zip(p).all(|(g, x)| g <= x) { 1.0 } else { 0.0 });
        }
        Ok(())
    })
}

/// Series and simulation agree at a point when `|z|` stays below this.
pub const Z_LIMIT: f64 = 3.0;

/// Nine probe points `ḡ ⊙ s`, with `s` alternating `(a, b, a, b, …)` over
/// `a, b ∈ {0.5, 1, 2}`.
pub fn probe_grid<T: Real>(model: &FadingModel<T>) -> Vec<Vec<T>> {
    let scales = [0.5, 1.0, 2.0];
    let mut out = Vec::with_capacity(9);
    for a in scales {
        for b in scales {
            out.push(model.gbar().iter().enumerate().map(|(k, &g)| g * T::lit(if k % 2 == 0 { a } else { b })).collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConventionScore {
    pub convention: GaussianMap,
    /// Largest `|z|` over the probe grid; `None` when the series failed.
    pub max_abs_z: Option<f64>,
    pub series: Vec<f64>,
    pub empirical: Vec<McEstimate>,
    pub error: Option<String>,
}

impl ConventionScore {
    pub fn matches(&self) -> bool {
        self.max_abs_z.is_some_and(|z| z < Z_LIMIT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CalibrationStatus {
    Matched(GaussianMap),
    /// Both conventions agree with the simulation within noise.
    Inconclusive,
    NoMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationReport {
    pub status: CalibrationStatus,
    pub scores: Vec<ConventionScore>,
    pub probes: Vec<Vec<f64>>,
    pub samples: u64,
    pub seed: u64,
}

/// Scores one convention: the sampler and the series both read `√Σ` that
/// way, and the joint CDF is compared on [`probe_grid`].
pub fn score_convention<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    convention: GaussianMap,
    series: &SeriesConfig<T>,
    cfg: &McConfig,
) -> Result<ConventionScore> {
    let spec = spec.clone().with_map(convention)?;
    let probes = probe_grid(model);
    let empirical = empirical_joint_cdf(model, &spec, &probes, cfg)?;
    let analytic: Result<Vec<f64>> = JointStats::new(model, &spec)
        .and_then(|js| probes.iter().map(|p| js.joint_cdf(p, series).map(|r| r.value.as_f64())).collect());
    Ok(match analytic {
        Ok(values) => {
            let z = values.iter().zip(&empirical).map(|(v, e)| e.z_score(*v).abs()).fold(0.0, f64::max);
            ConventionScore { convention, max_abs_z: Some(z), series: values, empirical, error: None }
        }
        Err(e) => ConventionScore { convention, max_abs_z: None, series: Vec::new(), empirical, error: Some(e.to_string()) },
    })
}

/// Determines which reading of `√Σ` makes the series joint CDF consistent
/// with Gaussian-decomposition sampling under the same reading.
pub fn calibrate_convention<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, series: &SeriesConfig<T>, cfg: &McConfig) -> Result<CalibrationReport> {
    let scores = [GaussianMap::ElementwiseSqrt, GaussianMap::MatrixSqrt]
        .into_iter()
        .map(|c| score_convention(model, spec, c, series, cfg))
        .collect::<Result<Vec<_>>>()?;
    let matching: Vec<GaussianMap> = scores.iter().filter(|s| s.matches()).map(|s| s.convention).collect();
    let status = match matching.as_slice() {
        [one] => CalibrationStatus::Matched(*one),
        [] => CalibrationStatus::NoMatch,
        _ => CalibrationStatus::Inconclusive,
    };
    Ok(CalibrationReport {
        status,
        scores,
        probes: probe_grid(model).into_iter().map(|p| p.into_iter().map(|x| x.as_f64()).collect()).collect(),
        samples: cfg.samples,
        seed: cfg.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_stats::marginal_cdf;

    fn mc(samples: u64, seed: u64) -> McConfig {
        McConfig { samples, seed, ..McConfig::default() }
    }

    #[test]
    fn sample_means_match_average_snr() {
        let model = FadingModel::with_decay(1.5, 3.0, 0.2, 3).unwrap();
        let spec = CorrelationSpec::exponential(0.7, 3).unwrap();
        let means = SnrSampler::new(&model, &spec).unwrap().mean_snr(&mc(1_000_000, 7)).unwrap();
        for (e, g) in means.iter().zip(model.gbar()) {
            assert!(e.z_score(*g).abs() < 4.0, "{e:?} vs {g}");
        }
    }

    #[test]
    fn rayleigh_marginal_passes_ks() {
        let model = FadingModel::new(1.0, vec![2.0, 1.0]).unwrap();
        let spec = CorrelationSpec::exponential(0.8, 2).unwrap();
        let sampler = SnrSampler::new(&model, &spec).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut z, mut g) = (vec![0.0; 2], vec![0.0; 2]);
        let n = 100_000;
        let mut xs: Vec<f64> = (0..n)
            .map(|_| {
                sampler.draw(&mut rng, &mut z, &mut g);
                g[0]
            })
            .collect();
        xs.sort_by(f64::total_cmp);
        let d = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = 1.0 - (-x / 2.0).exp();
                (f - i as f64 / n as f64).abs().max(((i + 1) as f64 / n as f64 - f).abs())
            })
            .fold(0.0, f64::max);
        // 1% critical value 1.628/√n
        assert!(d < 1.628 / (n as f64).sqrt(), "KS distance {d}");
    }

    #[test]
    fn power_correlation_is_squared_gaussian_correlation() {
        for map in [GaussianMap::ElementwiseSqrt, GaussianMap::MatrixSqrt] {
            let model = FadingModel::new(2.0, vec![1.0; 3]).unwrap();
            let spec = CorrelationSpec::exponential(0.6_f64, 3).unwrap().with_map(map).unwrap();
            let sampler = SnrSampler::new(&model, &spec).unwrap();
            let c = spec.sampling_correlation();
            let (mut z, mut g) = (vec![0.0; 3], vec![0.0; 3]);
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let n = 400_000;
            // products (g_0-1)(g_k-1) for k = 1, 2; unit means and variance 1/m
            let mut acc = [Moments::default(); 2];
            for _ in 0..n {
                sampler.draw(&mut rng, &mut z, &mut g);
                for k in 0..2 {
                    acc[k].push((g[0] - 1.0) * (g[k + 1] - 1.0) * 2.0);
                }
            }
            for k in 0..2 {
                let e = acc[k].estimate();
                let want = c.get(0, k + 1).powi(2);
                assert!(e.z_score(want).abs() < 4.0, "{map:?} k={k}: {e:?} vs {want}");
            }
        }
    }

    #[test]
    fn rejects_non_half_integer_m() {
        let model = FadingModel::new(1.3, vec![1.0; 2]).unwrap();
        let spec = CorrelationSpec::iid(2).unwrap();
        assert!(matches!(SnrSampler::new(&model, &spec), Err(FdlError::Unsupported(_))));
        let model = FadingModel::new(0.5, vec![1.0; 2]).unwrap();
        assert!(SnrSampler::new(&model, &spec).is_ok());
    }

    #[test]
    fn same_seed_is_bit_identical_across_pools() {
        let model = FadingModel::with_decay(2.0, 3.0, 0.1, 3).unwrap();
        let spec = CorrelationSpec::exponential(0.9, 3).unwrap();
        let p = ThresholdProfile::new(1.0, 0.1, 3).unwrap();
        let cfg = McConfig { samples: 50_000, seed: 99, batch: 4096, error_counting: false };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate_swc(&model, &spec, &p, &ModulationScheme::Bpsk, &cfg).unwrap())
        };
        let a = run(1);
        let b = run(3);
        assert_eq!(a, b);
        assert_eq!(a.pe.mean.to_bits(), b.pe.mean.to_bits());
        let c = simulate_swc(&model, &spec, &p, &ModulationScheme::Bpsk, &McConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a.pe.mean, c.pe.mean);
    }

    #[test]
    fn std_error_shrinks_with_samples() {
        let model = FadingModel::new(1.0, vec![3.0; 2]).unwrap();
        let spec = CorrelationSpec::iid(2).unwrap();
        let m = ModulationScheme::Bpsk;
        let a = simulate_mrc(&model, &spec, &m, &mc(200_000, 5)).unwrap();
        let b = simulate_mrc(&model, &spec, &m, &mc(800_000, 5)).unwrap();
        let ratio = a.std_error / b.std_error;
        assert!((ratio - 2.0).abs() < 0.15, "ratio {ratio}");
    }

    #[test]
    fn zero_thresholds_use_first_branch() {
        let model = FadingModel::with_decay(1.0, 2.0, 0.5, 3).unwrap();
        let spec = CorrelationSpec::exponential(0.5, 3).unwrap();
        let p = ThresholdProfile::new(0.0, 0.5, 3).unwrap();
        let m = ModulationScheme::Bpsk;
        let cfg = mc(200_000, 1);
        let swc = simulate_swc(&model, &spec, &p, &m, &cfg).unwrap();
        assert_eq!((swc.anpe.mean, swc.awt.mean), (1.0, 0.0));
        let single = 0.5 * (1.0 - (2.0_f64 / 3.0).sqrt());
        assert!(swc.pe.z_score(single).abs() < 4.0);
        let sec = simulate_sec(&model, &spec, &p, &m, &cfg).unwrap();
        assert_eq!(sec.pe, swc.pe);
    }

    #[test]
    fn unreachable_thresholds_use_last_branch_under_sec() {
        let model = FadingModel::with_decay(1.0, 2.0, 0.5, 3).unwrap();
        let spec = CorrelationSpec::exponential(0.5, 3).unwrap();
        let p = ThresholdProfile::new(1e9, 0.0, 3).unwrap();
        let sec = simulate_sec(&model, &spec, &p, &ModulationScheme::Bpsk, &mc(200_000, 2)).unwrap();
        let g3 = 2.0 * (-1.0_f64).exp();
        let single = 0.5 * (1.0 - (g3 / (1.0 + g3)).sqrt());
        assert_eq!(sec.anpe.mean, 3.0);
        assert!(sec.pe.z_score(single).abs() < 4.0);
    }

    #[test]
    fn pathological_thresholds_abort() {
        let model = FadingModel::new(1.0, vec![1.0; 2]).unwrap();
        let spec = CorrelationSpec::iid(2).unwrap();
        let p = ThresholdProfile::new(200.0, 0.0, 2).unwrap();
        let cfg = McConfig { samples: MIN_SAMPLES, seed: 1, batch: MIN_SAMPLES, error_counting: false };
        assert!(matches!(simulate_swc(&model, &spec, &p, &ModulationScheme::Bpsk, &cfg), Err(FdlError::Pathological(_))));
    }

    #[test]
    fn awt_matches_geometric_identity() {
        let model = FadingModel::new(1.0, vec![1.0; 5]).unwrap();
        let spec = CorrelationSpec::independent(5).unwrap();
        let p = ThresholdProfile::new(5f64.ln(), 0.0, 5).unwrap();
        let r = simulate_swc(&model, &spec, &p, &ModulationScheme::Bpsk, &mc(1_000_000, 4)).unwrap();
        assert!(r.awt.z_score(0.32768 / 0.67232).abs() < 3.5, "{:?}", r.awt);
        assert!(r.anpe.z_score(5.0).abs() < 3.5, "{:?}", r.anpe);
    }

    #[test]
    fn mrc_matches_dual_rayleigh_closed_form() {
        let gbar = 10f64.powf(1.5);
        let model = FadingModel::new(1.0, vec![gbar; 2]).unwrap();
        let spec = CorrelationSpec::independent(2).unwrap();
        let mu = (gbar / (1.0 + gbar)).sqrt();
        let want = ((1.0 - mu) / 2.0).powi(2) * (2.0 + mu);
        let r = simulate_mrc(&model, &spec, &ModulationScheme::Bpsk, &mc(1_000_000, 8)).unwrap();
        assert!(r.z_score(want).abs() < 3.5, "{r:?} vs {want}");
    }

    #[test]
    fn single_branch_mrc_is_single_branch() {
        let model = FadingModel::new(1.0, vec![4.0]).unwrap();
        let spec = CorrelationSpec::independent(1).unwrap();
        let r = simulate_mrc(&model, &spec, &ModulationScheme::Bpsk, &mc(500_000, 2)).unwrap();
        assert!(r.z_score(0.5 * (1.0 - (0.8_f64).sqrt())).abs() < 3.5);
    }

    #[test]
    fn correlation_hurts_mrc() {
        let m = ModulationScheme::Bpsk;
        let cfg = mc(500_000, 6);
        let model = FadingModel::with_decay(1.0, 10.0, 0.1, 3).unwrap();
        let lo = simulate_mrc(&model, &CorrelationSpec::iid(3).unwrap(), &m, &cfg).unwrap();
        let hi = simulate_mrc(&model, &CorrelationSpec::exponential(0.9, 3).unwrap(), &m, &cfg).unwrap();
        assert!(hi.mean - lo.mean > 5.0 * hi.std_error.hypot(lo.std_error));
    }

    #[test]
    fn bit_counting_agrees_with_semi_analytic() {
        let model = FadingModel::new(1.0, vec![2.0; 2]).unwrap();
        let spec = CorrelationSpec::iid(2).unwrap();
        let p = ThresholdProfile::new(1.0, 0.0, 2).unwrap();
        let m = ModulationScheme::Bpsk;
        let a = simulate_swc(&model, &spec, &p, &m, &mc(400_000, 1)).unwrap();
        let b = simulate_swc(&model, &spec, &p, &m, &McConfig { error_counting: true, ..mc(400_000, 2) }).unwrap();
        assert!((a.pe.mean - b.pe.mean).abs() < 4.0 * b.pe.std_error);
        let qam = simulate_mrc(&model, &spec, &ModulationScheme::Qam(16), &McConfig { error_counting: true, ..mc(10_000, 1) });
        assert!(matches!(qam, Err(FdlError::Unsupported(_))));
    }

    #[test]
    fn empirical_cdf_matches_marginal() {
        let model = FadingModel::new(2.0, vec![1.0, 3.0]).unwrap();
        let spec = CorrelationSpec::exponential(0.5, 2).unwrap();
        let big = 1e6;
        let pts = vec![vec![0.7, big], vec![big, 2.0]];
        let e = empirical_joint_cdf(&model, &spec, &pts, &mc(400_000, 9)).unwrap();
        assert!(e[0].z_score(marginal_cdf(&model, 0, 0.7).unwrap()).abs() < 4.0);
        assert!(e[1].z_score(marginal_cdf(&model, 1, 2.0).unwrap()).abs() < 4.0);
    }

    #[test]
    fn tiny_correlation_is_inconclusive() {
        let model = FadingModel::new(1.0, vec![1.0; 2]).unwrap();
        let spec = CorrelationSpec::iid(2).unwrap();
        let r = calibrate_convention(&model, &spec, &SeriesConfig::default(), &mc(200_000, 3)).unwrap();
        assert_eq!(r.status, CalibrationStatus::Inconclusive);
    }
}
