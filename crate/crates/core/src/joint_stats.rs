//! Marginal and joint statistics of correlated Nakagami-m branch SNRs.
//!
//! Branch `ℓ` has SNR `g_ℓ ~ Gamma(m, ḡ_ℓ/m)`. Joint quantities over the
//! leading `k` branches are chain series (see [`crate::series`]) built from
//! the coefficients of `Σ^{(k)}`, the leading `k×k` block of `Σ`.

use crate::corr_model::{ChainCoefficients, CorrelationSpec};
use crate::error::{FdlError, Result};
use crate::scalar::Real;
use crate::series::{ChainSum, SeriesConfig, SeriesResult};
use crate::specfun::{gamma_p, ln_gamma, ln_lower_inc_gamma};

/// First-order channel description: Nakagami `m` and per-branch average SNR (linear).
#[derive(Debug, Clone, PartialEq)]
pub struct FadingModel<T> {
    m: T,
    gbar: Vec<T>,
}

impl<T: Real> FadingModel<T> {
    pub fn new(m: T, gbar: Vec<T>) -> Result<Self> {
        if !(m >= T::lit(0.5)) || !m.is_finite() {
            return Err(FdlError::Domain(format!("Nakagami m must be ≥ 0.5, got {m}")));
        }
        if gbar.is_empty() {
            return Err(FdlError::Domain("at least one branch is required".into()));
        }
        if let Some(bad) = gbar.iter().find(|g| !(**g > T::zero() && g.is_finite())) {
            return Err(FdlError::Domain(format!("average SNRs must be positive and finite, got {bad}")));
        }
        Ok(FadingModel { m, gbar })
    }

    /// `ḡ_ℓ = ḡ₁·exp(−δ(ℓ−1))`.
    pub fn with_decay(m: T, gbar1: T, delta: T, branches: usize) -> Result<Self> {
        if !(delta >= T::zero()) {
            return Err(FdlError::Domain(format!("decay factor must be nonnegative, got {delta}")));
        }
        Self::new(m, (0..branches).map(|l| gbar1 * (-delta * T::of_usize(l)).exp()).collect())
    }

    pub fn m(&self) -> T {
        self.m
    }

    pub fn gbar(&self) -> &[T] {
        &self.gbar
    }

    pub fn branches(&self) -> usize {
        self.gbar.len()
    }

    pub fn has_integer_m(&self) -> bool {
        self.m == self.m.round()
    }

    fn check_branch(&self, branch: usize) -> Result<()> {
        if branch >= self.branches() {
            return Err(FdlError::DimensionMismatch { expected: self.branches(), got: branch + 1 });
        }
        Ok(())
    }
}

fn check_snr<T: Real>(g: T) -> Result<()> {
    if !(g >= T::zero()) {
        return Err(FdlError::Domain(format!("SNR must be nonnegative, got {g}")));
    }
    Ok(())
}

/// `F_ℓ(g) = γ(m, m g/ḡ_ℓ)/Γ(m)`; `branch` is 0-based.
pub fn marginal_cdf<T: Real>(model: &FadingModel<T>, branch: usize, g: T) -> Result<T> {
    model.check_branch(branch)?;
    check_snr(g)?;
    gamma_p(model.m, model.m * g / model.gbar[branch])
}

/// `f_ℓ(g) = (m/ḡ)^m g^{m−1} e^{−mg/ḡ}/Γ(m)`; `+inf` at `g = 0` when `m < 1`.
pub fn marginal_pdf<T: Real>(model: &FadingModel<T>, branch: usize, g: T) -> Result<T> {
    model.check_branch(branch)?;
    check_snr(g)?;
    let m = model.m;
    let c = m / model.gbar[branch];
    if g == T::zero() {
        return Ok(if m < T::one() {
            T::infinity()
        } else if m == T::one() {
            c
        } else {
            T::zero()
        });
    }
    Ok((m * c.ln() + (m - T::one()) * g.ln() - c * g - ln_gamma(m)).exp())
}

/// Series evaluator for one `(model, spec)` pair. Coefficients of every
/// leading block `Σ^{(k)}` are built once at construction.
#[derive(Debug, Clone)]
pub struct JointStats<T> {
    model: FadingModel<T>,
    spec: CorrelationSpec<T>,
    chains: Vec<ChainCoefficients<T>>,
}

impl<T: Real> JointStats<T> {
    pub fn new(model: &FadingModel<T>, spec: &CorrelationSpec<T>) -> Result<Self> {
        if model.branches() != spec.branches() {
            return Err(FdlError::DimensionMismatch { expected: spec.branches(), got: model.branches() });
        }
        let chains = (1..=spec.branches())
            .map(|k| ChainCoefficients::for_spec(&spec.leading(k)?, model.m))
            .collect::<Result<Vec<_>>>()?;
        Ok(JointStats { model: model.clone(), spec: spec.clone(), chains })
    }

    pub fn model(&self) -> &FadingModel<T> {
        &self.model
    }

    pub fn spec(&self) -> &CorrelationSpec<T> {
        &self.spec
    }

    pub fn branches(&self) -> usize {
        self.model.branches()
    }

    /// Coefficients of the leading `k` branches (`1 ≤ k ≤ L`).
    pub fn chain(&self, k: usize) -> &ChainCoefficients<T> {
        &self.chains[k - 1]
    }

    fn check_point(&self, g: &[T], k: usize) -> Result<()> {
        if g.len() < k {
            return Err(FdlError::DimensionMismatch { expected: k, got: g.len() });
        }
        g.iter().take(k).try_for_each(|&x| check_snr(x))
    }

    /// Joint CDF of the leading `k` branches at `g[..k]`.
    pub fn prefix_cdf(&self, k: usize, g: &[T], cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        self.prefix_cdf_scaled(k, g, cfg, T::one())
    }

    pub(crate) fn prefix_cdf_scaled(&self, k: usize, g: &[T], cfg: &SeriesConfig<T>, scale: T) -> Result<SeriesResult<T>> {
        if k == 0 || k > self.branches() {
            return Err(FdlError::DimensionMismatch { expected: self.branches(), got: k });
        }
        self.check_point(g, k)?;
        let coeffs = self.chain(k);
        let gbar = &self.model.gbar;
        let mut sum = ChainSum::new(coeffs, |l, kappa| ln_lower_inc_gamma(kappa, coeffs.xi[l] * g[l] / gbar[l]));
        let mut r = sum.adaptive(cfg, scale)?;
        r.value = r.value.min(T::one());
        Ok(r)
    }

    /// `F(g) = Pr[g_ℓ ≤ g_ℓ ∀ℓ]` over all `L` branches.
    pub fn joint_cdf(&self, g: &[T], cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        if g.len() != self.branches() {
            return Err(FdlError::DimensionMismatch { expected: self.branches(), got: g.len() });
        }
        self.prefix_cdf(self.branches(), g, cfg)
    }

    /// Joint density of all `L` branches.
    pub fn joint_pdf(&self, g: &[T], cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        let l_tot = self.branches();
        if g.len() != l_tot {
            return Err(FdlError::DimensionMismatch { expected: l_tot, got: g.len() });
        }
        self.check_point(g, l_tot)?;
        let coeffs = self.chain(l_tot);
        let gbar = &self.model.gbar;
        let mut sum = ChainSum::new(coeffs, |l, kappa| {
            let c = coeffs.xi[l] / gbar[l];
            Ok(log_gamma_kernel(kappa, c, g[l]))
        });
        sum.adaptive(cfg, T::one())
    }

    /// Joint density of `g_ℓ = g` with the event `g_j < T_j` for `j < ℓ`,
    /// restricted to `g > T_ℓ` (branch `ℓ` is 1-based). `thresholds` holds
    /// at least `ℓ` entries. Branch 1 reduces to the truncated marginal.
    pub fn truncated_conditional_pdf(&self, thresholds: &[T], l: usize, g: T, cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        if l == 0 || l > self.branches() {
            return Err(FdlError::DimensionMismatch { expected: self.branches(), got: l });
        }
        self.check_point(thresholds, l)?;
        check_snr(g)?;
        if l == 1 {
            let v = if g >= thresholds[0] { marginal_pdf(&self.model, 0, g)? } else { T::zero() };
            return Ok(SeriesResult::exact(v));
        }
        if g <= thresholds[l - 1] {
            return Ok(SeriesResult::exact(T::zero()));
        }
        self.branch_density(thresholds, l, g, cfg)
    }

    /// The ℓ-th numerator term without the `g > T_ℓ` truncation.
    fn branch_density(&self, thresholds: &[T], l: usize, g: T, cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        if thresholds[..l - 1].iter().any(|&t| t == T::zero()) {
            return Ok(SeriesResult::zero_degenerate(l - 1));
        }
        let coeffs = self.chain(l);
        let gbar = &self.model.gbar;
        let last = l - 1;
        let mut sum = ChainSum::new(coeffs, |j, kappa| {
            if j == last {
                Ok(log_gamma_kernel(kappa, coeffs.xi[j] / gbar[j], g))
            } else {
                ln_lower_inc_gamma(kappa, coeffs.xi[j] * thresholds[j] / gbar[j])
            }
        });
        sum.adaptive(cfg, T::one())
    }

    /// Density of the SNR of the branch finally used by the scan-and-wait
    /// receiver with per-branch thresholds `thresholds` (length `L`).
    pub fn swc_output_pdf(&self, thresholds: &[T], g: T, cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        let l_tot = self.branches();
        if thresholds.len() != l_tot {
            return Err(FdlError::DimensionMismatch { expected: l_tot, got: thresholds.len() });
        }
        let denom = self.all_fail(thresholds, cfg)?;
        let mut out = SeriesResult::exact(T::zero());
        for l in 1..=l_tot {
            let r = self.truncated_conditional_pdf(thresholds, l, g, cfg)?;
            out = merge(out, &r);
        }
        out.value = out.value / (T::one() - denom.value);
        Ok(track(out, &denom))
    }

    /// `F(T)` with a degenerate error when the scan can never succeed.
    pub(crate) fn all_fail(&self, thresholds: &[T], cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        let f = self.joint_cdf(thresholds, cfg)?;
        if T::one() - f.value <= cfg.tol {
            return Err(FdlError::Degenerate(format!(
                "all branches fail their thresholds with probability {} (no acceptable branch)",
                f.value
            )));
        }
        Ok(f)
    }
}

/// `ln[c^κ g^{κ−1} e^{−cg}]`, the Gamma density kernel without `1/Γ(κ)`.
fn log_gamma_kernel<T: Real>(kappa: T, c: T, g: T) -> T {
    if g == T::zero() {
        return if kappa < T::one() {
            T::infinity()
        } else if kappa == T::one() {
            c.ln()
        } else {
            T::neg_infinity()
        };
    }
    kappa * c.ln() + (kappa - T::one()) * g.ln() - c * g
}

/// Sum of two results; term counts are combined per dimension by maximum.
pub(crate) fn merge<T: Real>(mut a: SeriesResult<T>, b: &SeriesResult<T>) -> SeriesResult<T> {
    a.value = a.value + b.value;
    track(a, b)
}

/// Folds the truncation bookkeeping of `b` into `a`, leaving `a.value` alone.
pub(crate) fn track<T: Real>(mut a: SeriesResult<T>, b: &SeriesResult<T>) -> SeriesResult<T> {
    if a.n_used.len() < b.n_used.len() {
        a.n_used.resize(b.n_used.len(), 0);
    }
    for (x, &y) in a.n_used.iter_mut().zip(&b.n_used) {
        *x = (*x).max(y);
    }
    a.tol_achieved = a.tol_achieved.max(b.tol_achieved);
    a.converged &= b.converged;
    a.degenerate &= b.degenerate;
    a
}

/// Joint CDF for a one-off evaluation.
pub fn joint_cdf<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, g: &[T], cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
    JointStats::new(model, spec)?.joint_cdf(g, cfg)
}

/// Joint PDF for a one-off evaluation.
pub fn joint_pdf<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, g: &[T], cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
    JointStats::new(model, spec)?.joint_pdf(g, cfg)
}

pub fn truncated_conditional_pdf<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    thresholds: &[T],
    l: usize,
    g: T,
    cfg: &SeriesConfig<T>,
) -> Result<SeriesResult<T>> {
    JointStats::new(model, spec)?.truncated_conditional_pdf(thresholds, l, g, cfg)
}

pub fn swc_output_pdf<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    thresholds: &[T],
    g: T,
    cfg: &SeriesConfig<T>,
) -> Result<SeriesResult<T>> {
    JointStats::new(model, spec)?.swc_output_pdf(thresholds, g, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use fdl_oracle::quadrature::{integrate, integrate_split};
    use proptest::prelude::*;

    fn cfg() -> SeriesConfig<f64> {
        SeriesConfig::default()
    }

    fn tight() -> SeriesConfig<f64> {
        SeriesConfig { tol: 1e-12, n_max: 400, ..SeriesConfig::default() }
    }

    #[test]
    fn marginal_examples() {
        let ray = FadingModel::new(1.0, vec![1.0]).unwrap();
        assert!((marginal_cdf(&ray, 0, 1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-14);
        assert_eq!(marginal_cdf(&ray, 0, 0.0).unwrap(), 0.0);
        let m3 = FadingModel::new(3.0, vec![2.0]).unwrap();
        let q = integrate(|t: f64| t * t * (-t).exp(), 0.0, 3.0, 1e-14) / 2.0;
        assert!((marginal_cdf(&m3, 0, 2.0).unwrap() - q).abs() < 1e-12);
        assert!((q - 0.576_809_918_873_156).abs() < 1e-9);
        let m2 = FadingModel::new(2.0, vec![1.0]).unwrap();
        assert!((marginal_pdf(&m2, 0, 1.0).unwrap() - 4.0 * (-2.0f64).exp()).abs() < 1e-14);
        let half = FadingModel::new(0.5, vec![1.0]).unwrap();
        assert_eq!(marginal_pdf(&half, 0, 0.0).unwrap(), f64::INFINITY);
        assert!(marginal_cdf(&ray, 1, 1.0).is_err());
        assert!(marginal_cdf(&ray, 0, -1.0).is_err());
        assert!(FadingModel::new(0.4, vec![1.0]).is_err());
        assert!(FadingModel::new(1.0, vec![0.0]).is_err());
    }

    #[test]
    fn marginal_pdf_is_derivative_of_cdf() {
        let model = FadingModel::new(2.5, vec![1.7]).unwrap();
        for g in [0.5_f64, 1.0, 3.0] {
            let h = 1e-5_f64;
            let fd = (marginal_cdf(&model, 0, g + h).unwrap() - marginal_cdf(&model, 0, g - h).unwrap()) / (2.0 * h);
            assert!((fd - marginal_pdf(&model, 0, g).unwrap()).abs() < 1e-6);
        }
        let ray = FadingModel::new(1.0, vec![1.0]).unwrap();
        let mass = fdl_oracle::quadrature::integrate_to_infinity(|g| marginal_pdf(&ray, 0, g).unwrap(), 0.0, 1e-13);
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn independent_cdf_and_pdf_factorize() {
        let model = FadingModel::new(2.0, vec![1.0, 0.7, 1.9]).unwrap();
        let js = JointStats::new(&model, &CorrelationSpec::independent(3).unwrap()).unwrap();
        let g = [0.8, 0.3, 2.2];
        let cdf: f64 = (0..3).map(|l| marginal_cdf(&model, l, g[l]).unwrap()).product();
        let pdf: f64 = (0..3).map(|l| marginal_pdf(&model, l, g[l]).unwrap()).product();
        let r = js.joint_cdf(&g, &cfg()).unwrap();
        assert!((r.value - cdf).abs() < 1e-12);
        assert!(((js.joint_pdf(&g, &cfg()).unwrap().value - pdf) / pdf).abs() < 1e-10);
    }

    #[test]
    fn full_mass_far_in_the_tail() {
        for (l, m, rho) in [(2usize, 1.0, 0.5), (3, 2.0, 0.9), (4, 3.0, 0.7)] {
            let model = FadingModel::with_decay(m, 1.0, 0.1, l).unwrap();
            let js = JointStats::new(&model, &CorrelationSpec::exponential(rho, l).unwrap()).unwrap();
            let g: Vec<f64> = model.gbar().iter().map(|x| 50.0 * x).collect();
            let r = js.joint_cdf(&g, &tight()).unwrap();
            assert!((r.value - 1.0).abs() < 1e-6, "L={l}: {}", r.value);
        }
    }

    /// Bivariate exponential closed form: `Pr[g1 ≤ x, g2 ≤ y]` for unit-mean
    /// Rayleigh SNRs with power correlation `r`, by one-dimensional quadrature
    /// of the conditional Marcum form written as a Bessel series.
    #[test]
    fn two_branch_rayleigh_matches_quadrature_of_bessel_density() {
        let r = 0.6_f64;
        let model = FadingModel::new(1.0, vec![1.0, 1.0]).unwrap();
        let js = JointStats::new(&model, &CorrelationSpec::exponential(r, 2).unwrap()).unwrap();
        let density = |x: f64, y: f64| {
            // f(x,y) = e^{-(x+y)/(1-r)} I0(2√(rxy)/(1-r)) / (1-r)
            let z = 2.0 * (r * x * y).sqrt() / (1.0 - r);
            let mut i0 = 0.0;
            let mut term = 1.0;
            for k in 0..200 {
                if k > 0 {
                    term *= (z / 2.0) * (z / 2.0) / (k as f64 * k as f64);
                }
                i0 += term;
                if term < 1e-18 * i0 {
                    break;
                }
            }
            (-(x + y) / (1.0 - r)).exp() * i0 / (1.0 - r)
        };
        let (x, y) = (0.7, 1.3);
        let want = integrate(|u| integrate(|v| density(u, v), 0.0, y, 1e-13), 0.0, x, 1e-12);
        let got = js.joint_cdf(&[x, y], &tight()).unwrap().value;
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        let pdf = js.joint_pdf(&[x, y], &tight()).unwrap().value;
        assert!((pdf - density(x, y)).abs() < 1e-10);
    }

    #[test]
    fn pdf_is_mixed_derivative_of_cdf() {
        let model = FadingModel::new(2.0, vec![1.0, 0.8]).unwrap();
        let js = JointStats::new(&model, &CorrelationSpec::exponential(0.7, 2).unwrap()).unwrap();
        let (x, y, h) = (0.9, 0.6, 1e-3);
        let f = |a: f64, b: f64| js.joint_cdf(&[a, b], &tight()).unwrap().value;
        let fd = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4.0 * h * h);
        let pdf = js.joint_pdf(&[x, y], &tight()).unwrap().value;
        assert!((fd - pdf).abs() < 1e-4, "{fd} vs {pdf}");
    }

    #[test]
    fn joint_pdf_integrates_to_one() {
        let model = FadingModel::new(1.0, vec![1.0, 1.0]).unwrap();
        let js = JointStats::new(&model, &CorrelationSpec::exponential(0.5, 2).unwrap()).unwrap();
        let c = cfg();
        let mass = integrate(|x| integrate(|y| js.joint_pdf(&[x, y], &c).unwrap().value, 0.0, 6.0, 1e-8), 0.0, 6.0, 1e-7);
        // the square [0,6]² misses about 2e-3 of the mass
        let tail = 1.0 - js.joint_cdf(&[6.0, 6.0], &tight()).unwrap().value;
        assert!((mass + tail - 1.0).abs() < 5e-4, "mass {mass} tail {tail}");
        assert!((mass - (1.0 - tail)).abs() < 1e-5);
    }

    #[test]
    fn truncated_conditional_examples() {
        let model = FadingModel::new(1.0, vec![1.0, 1.0]).unwrap();
        let js = JointStats::new(&model, &CorrelationSpec::exponential(0.5, 2).unwrap()).unwrap();
        let r = js.truncated_conditional_pdf(&[0.0, 0.0], 2, 1.0, &cfg()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.degenerate);
        // ∫_{T2}^∞ h₂ = Pr[g1 < T1] − Pr[g1 < T1, g2 < T2]
        let t = [0.8, 0.5];
        let mass = fdl_oracle::quadrature::integrate_to_infinity(
            |g| js.truncated_conditional_pdf(&t, 2, g, &tight()).unwrap().value,
            0.5,
            1e-12,
        );
        let want = marginal_cdf(&model, 0, 0.8).unwrap() - js.joint_cdf(&t, &tight()).unwrap().value;
        assert!((mass - want).abs() < 1e-9, "{mass} vs {want}");

        let ind = JointStats::new(&model, &CorrelationSpec::independent(2).unwrap()).unwrap();
        let g = 1.4;
        let r = ind.truncated_conditional_pdf(&t, 2, g, &cfg()).unwrap().value;
        let want = marginal_cdf(&model, 0, 0.8).unwrap() * marginal_pdf(&model, 1, g).unwrap();
        assert!((r - want).abs() < 1e-10);
        assert_eq!(ind.truncated_conditional_pdf(&t, 2, 0.4, &cfg()).unwrap().value, 0.0);
    }

    #[test]
    fn output_pdf_with_zero_thresholds_is_first_marginal() {
        let model = FadingModel::with_decay(2.0, 3.0, 0.2, 3).unwrap();
        let js = JointStats::new(&model, &CorrelationSpec::exponential(0.9, 3).unwrap()).unwrap();
        for g in [0.2, 1.0, 4.0] {
            let r = js.swc_output_pdf(&[0.0; 3], g, &cfg()).unwrap().value;
            assert!((r - marginal_pdf(&model, 0, g).unwrap()).abs() < 1e-14);
        }
    }

    #[test]
    fn output_pdf_normalizes() {
        let cases = [
            (2usize, 1.0, 0.5, 0.0, 1.0, 0.7),
            (2, 2.0, 0.9, 0.1, 3.0, 2.0),
            (3, 1.0, 0.9, 0.0, 1.0, 0.5),
            (3, 3.0, 0.9, 0.1, 3.16, 2.5),
            (4, 2.0, 0.7, 0.2, 2.0, 1.0),
            (5, 1.0, 1e-4, 0.0, 1.0, 1.6),
        ];
        for (l, m, rho, delta, gbar1, gt1) in cases {
            let model = FadingModel::with_decay(m, gbar1, delta, l).unwrap();
            let js = JointStats::new(&model, &CorrelationSpec::exponential(rho, l).unwrap()).unwrap();
            let t: Vec<f64> = (0..l).map(|k| gt1 * (-delta * k as f64).exp()).collect();
            let c = SeriesConfig { n_max: 400, ..cfg() };
            let mut breaks = t.clone();
            breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
            // the mass beyond 30·ḡ₁ is below e^{-30}
            let upper = 30.0 * gbar1;
            let mass = integrate_split(|g| js.swc_output_pdf(&t, g, &c).unwrap().value, 0.0, upper, &breaks, 1e-8);
            assert!((mass - 1.0).abs() < 5e-4, "L={l} m={m} ρ={rho}: {mass}");
        }
    }

    #[test]
    fn output_pdf_rejects_hopeless_thresholds() {
        let model = FadingModel::new(1.0, vec![1.0, 1.0]).unwrap();
        let js = JointStats::new(&model, &CorrelationSpec::exponential(0.5, 2).unwrap()).unwrap();
        let r = js.swc_output_pdf(&[1e4, 1e4], 1.0, &cfg());
        assert!(matches!(r, Err(FdlError::Degenerate(_))), "{r:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn cdf_is_monotone_and_bounded(rho in 0.0f64..0.95, m in 1u32..4, x in 0.05f64..4.0, y in 0.05f64..4.0, dx in 0.01f64..1.0) {
            let model = FadingModel::new(m as f64, vec![1.0, 0.8, 1.2]).unwrap();
            let js = JointStats::new(&model, &CorrelationSpec::exponential(rho, 3).unwrap()).unwrap();
            let c = SeriesConfig { tol: 1e-10, n_max: 400, ..SeriesConfig::default() };
            let a = js.joint_cdf(&[x, y, 1.0], &c).unwrap().value;
            let b = js.joint_cdf(&[x + dx, y, 1.0], &c).unwrap().value;
            let d = js.joint_cdf(&[x, y + dx, 1.0], &c).unwrap().value;
            prop_assert!((0.0..=1.0).contains(&a));
            prop_assert!(b >= a * (1.0 - 1e-9));
            prop_assert!(d >= a * (1.0 - 1e-9));
            prop_assert!(js.joint_pdf(&[x, y, 1.0], &c).unwrap().value >= 0.0);
        }

        #[test]
        fn truncation_is_monotone_in_terms(rho in 0.1f64..0.95, x in 0.05f64..3.0) {
            let model = FadingModel::new(2.0, vec![1.0, 1.0, 1.0]).unwrap();
            let js = JointStats::new(&model, &CorrelationSpec::exponential(rho, 3).unwrap()).unwrap();
            let coeffs = js.chain(3);
            let mut sum = ChainSum::new(coeffs, |l, k| ln_lower_inc_gamma(k, coeffs.xi[l] * x));
            let mut prev = 0.0;
            for t in 1..15 {
                let v = sum.log_cube(t).unwrap().exp();
                prop_assert!(v >= prev);
                prev = v;
            }
        }
    }
}
