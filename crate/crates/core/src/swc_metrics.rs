//! Average number of path estimations (ANPE) and average waiting time (AWT).
//!
//! With `F^{(k)}` the joint CDF of the leading `k` branches at their
//! thresholds:
//!
//! ```text
//! N_SEC = 1 + Σ_{k<L} F^{(k)},   N_e = N_SEC / (1 − F^{(L)}),   N_c = F^{(L)} / (1 − F^{(L)})
//! ```

use crate::corr_model::CorrelationSpec;
use crate::error::{FdlError, Result};
use crate::joint_stats::{track, FadingModel, JointStats};
use crate::scalar::Real;
use crate::series::{SeriesConfig, SeriesResult};

/// Thresholds tied across branches: `g_{T_ℓ} = g_{T_1}·exp(−δ(ℓ−1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdProfile<T> {
    pub gt1: T,
    pub delta: T,
    pub branches: usize,
}

impl<T: Real> ThresholdProfile<T> {
    /// `gt1 = 0` is accepted as the "always accept" limit.
    pub fn new(gt1: T, delta: T, branches: usize) -> Result<Self> {
        if !(gt1 >= T::zero() && gt1.is_finite()) {
            return Err(FdlError::Domain(format!("threshold must be finite and nonnegative, got {gt1}")));
        }
        if !(delta >= T::zero() && delta.is_finite()) {
            return Err(FdlError::Domain(format!("decay factor must be finite and nonnegative, got {delta}")));
        }
        if branches == 0 {
            return Err(FdlError::Domain("at least one branch is required".into()));
        }
        Ok(ThresholdProfile { gt1, delta, branches })
    }

    pub fn thresholds(&self) -> Vec<T> {
        (0..self.branches).map(|l| self.gt1 * (-self.delta * T::of_usize(l)).exp()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport<T> {
    pub anpe_swc: T,
    pub anpe_sec: T,
    pub awt: T,
    pub all_fail_prob: T,
    /// Per-dimension term counts, maximum over every series involved.
    pub n_used: Vec<usize>,
}

impl<T: Real> MetricsReport<T> {
    pub fn nmin(&self) -> usize {
        self.n_used.iter().copied().max().unwrap_or(0)
    }
}

fn check_profile<T: Real>(js: &JointStats<T>, profile: &ThresholdProfile<T>) -> Result<Vec<T>> {
    if profile.branches != js.branches() {
        return Err(FdlError::DimensionMismatch { expected: js.branches(), got: profile.branches });
    }
    Ok(profile.thresholds())
}

impl<T: Real> JointStats<T> {
    /// `N_SEC` together with the truncation bookkeeping of its series.
    pub fn anpe_sec_series(&self, profile: &ThresholdProfile<T>, cfg: &SeriesConfig<T>) -> Result<SeriesResult<T>> {
        let t = check_profile(self, profile)?;
        let mut out = SeriesResult::exact(T::one());
        for k in 1..self.branches() {
            let f = self.prefix_cdf(k, &t, cfg)?;
            out.value = out.value + f.value;
            out = track(out, &f);
        }
        Ok(out)
    }

    pub fn metrics(&self, profile: &ThresholdProfile<T>, cfg: &SeriesConfig<T>) -> Result<MetricsReport<T>> {
        let t = check_profile(self, profile)?;
        let sec = self.anpe_sec_series(profile, cfg)?;
        let f = self.all_fail(&t, cfg)?;
        let ok = T::one() - f.value;
        let n_used = track(sec.clone(), &f).n_used;
        Ok(MetricsReport {
            anpe_swc: sec.value / ok,
            anpe_sec: sec.value,
            awt: f.value / ok,
            all_fail_prob: f.value,
            n_used,
        })
    }
}

/// `N_SEC = 1 + Σ_{k<L} F^{(k)}(g_T^{(k)})`.
pub fn anpe_sec<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, profile: &ThresholdProfile<T>, cfg: &SeriesConfig<T>) -> Result<T> {
    Ok(JointStats::new(model, spec)?.anpe_sec_series(profile, cfg)?.value)
}

/// `N_e = N_SEC / (1 − F^{(L)})`.
pub fn anpe_swc<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, profile: &ThresholdProfile<T>, cfg: &SeriesConfig<T>) -> Result<T> {
    Ok(JointStats::new(model, spec)?.metrics(profile, cfg)?.anpe_swc)
}

/// `N_c = F^{(L)} / (1 − F^{(L)})`.
pub fn awt<T: Real>(model: &FadingModel<T>, spec: &CorrelationSpec<T>, profile: &ThresholdProfile<T>, cfg: &SeriesConfig<T>) -> Result<T> {
    Ok(JointStats::new(model, spec)?.metrics(profile, cfg)?.awt)
}

pub fn metrics<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    profile: &ThresholdProfile<T>,
    cfg: &SeriesConfig<T>,
) -> Result<MetricsReport<T>> {
    JointStats::new(model, spec)?.metrics(profile, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> SeriesConfig<f64> {
        SeriesConfig::default()
    }

    #[test]
    fn zero_thresholds_never_wait() {
        let model = FadingModel::with_decay(2.0, 3.0, 0.1, 4).unwrap();
        let spec = CorrelationSpec::exponential(0.9, 4).unwrap();
        let r = metrics(&model, &spec, &ThresholdProfile::new(0.0, 0.1, 4).unwrap(), &cfg()).unwrap();
        assert_eq!(r.anpe_sec, 1.0);
        assert_eq!(r.anpe_swc, 1.0);
        assert_eq!(r.awt, 0.0);
    }

    #[test]
    fn independent_geometric_identities() {
        // F₁ = 0.8 for unit-mean Rayleigh at g_T = ln 5
        let model = FadingModel::new(1.0, vec![1.0; 5]).unwrap();
        let spec = CorrelationSpec::independent(5).unwrap();
        let p = ThresholdProfile::new(5f64.ln(), 0.0, 5).unwrap();
        let r = metrics(&model, &spec, &p, &cfg()).unwrap();
        assert!((r.anpe_sec - 3.3616).abs() < 1e-12);
        assert!((r.anpe_swc - 5.0).abs() < 1e-12);
        assert!((r.awt - 0.32768 / 0.67232).abs() < 1e-12);
        assert!((r.awt - 0.48739).abs() < 1e-5);
        assert!((r.anpe_swc * (1.0 - r.all_fail_prob) - r.anpe_sec).abs() < 1e-14);
    }

    #[test]
    fn huge_thresholds_examine_every_branch() {
        let model = FadingModel::new(1.0, vec![1.0; 3]).unwrap();
        let spec = CorrelationSpec::iid(3).unwrap();
        let p = ThresholdProfile::new(40.0, 0.0, 3).unwrap();
        assert!((anpe_sec(&model, &spec, &p, &cfg()).unwrap() - 3.0).abs() < 1e-6);
        let p = ThresholdProfile::new(1e3, 0.0, 3).unwrap();
        assert!(matches!(anpe_swc(&model, &spec, &p, &cfg()), Err(FdlError::Degenerate(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn metrics_are_consistent_and_monotone(rho in 0.0f64..0.95, m in 1u32..4, gt in 0.01f64..3.0, dg in 0.01f64..1.0, l in 2usize..5) {
            let model = FadingModel::with_decay(m as f64, 2.0, 0.1, l).unwrap();
            let spec = CorrelationSpec::exponential(rho, l).unwrap();
            let js = JointStats::new(&model, &spec).unwrap();
            let c = SeriesConfig { tol: 1e-10, n_max: 400, ..cfg() };
            let a = js.metrics(&ThresholdProfile::new(gt, 0.1, l).unwrap(), &c).unwrap();
            let b = js.metrics(&ThresholdProfile::new(gt + dg, 0.1, l).unwrap(), &c).unwrap();
            prop_assert!(a.anpe_sec >= 1.0 && a.anpe_sec <= l as f64 + 1e-9);
            prop_assert!((a.anpe_swc * (1.0 - a.all_fail_prob) - a.anpe_sec).abs() < 1e-12);
            prop_assert!((a.awt * (1.0 - a.all_fail_prob) - a.all_fail_prob).abs() < 1e-12);
            prop_assert!(b.anpe_sec >= a.anpe_sec - 1e-9);
            prop_assert!(b.awt >= a.awt - 1e-9);
        }
    }
}
