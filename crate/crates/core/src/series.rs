//! Truncated evaluation of chain-structured multiple series.
//!
//! Every series in this crate has the form
//!
//! ```text
//! Σ_{i_1..i_N ≥ 0} A(i) Π_ℓ φ_ℓ(κ_ℓ(i)),   κ_ℓ = m + i_{ℓ-1} + i_ℓ
//! ```
//!
//! with nonnegative terms. Because each `κ_ℓ` only involves two adjacent
//! indices, the sum over the cube `[0, t)^N` factorizes into a sequence of
//! `t × t` log-sum-exp contractions, `O(N t²)` instead of `O(t^N)`.
//! Truncation grows the cube one hyper-shell at a time and stops as soon as
//! the newest shell is negligible.

use serde::{Deserialize, Serialize};

use crate::corr_model::ChainCoefficients;
use crate::error::{FdlError, Result};
use crate::scalar::{log_sum_exp, Real};

/// How the contribution of the newest shell is compared with `tol`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StopRule {
    /// Shell contribution relative to the accumulated value.
    #[default]
    Relative,
    /// Shell contribution, scaled by the caller-supplied weight with which
    /// the series enters the final metric, in absolute terms.
    Absolute,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesConfig<T> {
    pub tol: T,
    /// Cap on the number of terms per dimension.
    pub n_max: usize,
    pub rule: StopRule,
}

impl<T: Real> Default for SeriesConfig<T> {
    fn default() -> Self {
        SeriesConfig { tol: T::lit(1e-6), n_max: 1000, rule: StopRule::Relative }
    }
}

impl<T: Real> SeriesConfig<T> {
    pub fn new(tol: T, n_max: usize) -> Result<Self> {
        let cfg = SeriesConfig { tol, n_max, rule: StopRule::Relative };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_rule(mut self, rule: StopRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > T::zero() && self.tol < T::one()) {
            return Err(FdlError::Config(format!("series tolerance must lie in (0,1), got {}", self.tol)));
        }
        if self.n_max == 0 {
            return Err(FdlError::Config("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Value of a truncated series together with how it was truncated.
///
/// `n_used[d]` is the number of terms per dimension the truncation needed
/// (`N_min`): shell `n_used[d]` was summed as well, and was found to be
/// below tolerance. For zero-dimensional series the vector is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesResult<T> {
    pub value: T,
    pub n_used: Vec<usize>,
    pub tol_achieved: T,
    pub converged: bool,
    /// Every term vanished identically (e.g. conditioning on zero thresholds).
    pub degenerate: bool,
}

impl<T: Real> SeriesResult<T> {
    pub fn exact(value: T) -> Self {
        SeriesResult { value, n_used: Vec::new(), tol_achieved: T::zero(), converged: true, degenerate: false }
    }

    pub fn zero_degenerate(dims: usize) -> Self {
        SeriesResult { value: T::zero(), n_used: vec![0; dims], tol_achieved: T::zero(), converged: true, degenerate: true }
    }

    /// Largest per-dimension term count.
    pub fn n_min(&self) -> usize {
        self.n_used.iter().copied().max().unwrap_or(0)
    }
}

/// Cube sums of one chain series with a fixed set of branch factors.
pub(crate) struct ChainSum<'a, T, F> {
    coeffs: &'a ChainCoefficients<T>,
    factor: F,
    /// `psi[ℓ][k] = ln φ_ℓ(m+k) − (m+k)·ln W_ℓℓ`
    psi: Vec<Vec<T>>,
    /// `weights[j][i] = ln(W_{j,j+1}^{2i}/(i! Γ(i+m)))`
    weights: Vec<Vec<T>>,
    pub evaluations: usize,
}

impl<'a, T, F> ChainSum<'a, T, F>
where
    T: Real,
    F: FnMut(usize, T) -> Result<T>,
{
    /// `factor(ℓ, κ)` must return `ln φ_ℓ(κ)` (`-inf` for a vanishing factor).
    pub fn new(coeffs: &'a ChainCoefficients<T>, factor: F) -> Self {
        let l = coeffs.branches();
        ChainSum { coeffs, factor, psi: vec![Vec::new(); l], weights: vec![Vec::new(); coeffs.dims()], evaluations: 0 }
    }

    fn ensure(&mut self, terms: usize) -> Result<()> {
        let n = self.coeffs.dims();
        for l in 0..self.coeffs.branches() {
            let interior = l > 0 && l < n;
            let need = if interior { 2 * terms - 1 } else { terms };
            while self.psi[l].len() < need {
                let k = self.psi[l].len();
                let kappa = self.coeffs.m + T::of_usize(k);
                let lf = (self.factor)(l, kappa)?;
                self.evaluations += 1;
                let v = if lf == T::neg_infinity() { lf } else { lf - kappa * self.coeffs.log_diag[l] };
                if v.is_nan() {
                    return Err(FdlError::Domain(format!("branch factor is NaN at branch {l}, κ = {kappa}")));
                }
                self.psi[l].push(v);
            }
        }
        for j in 0..n {
            while self.weights[j].len() < terms {
                let i = self.weights[j].len();
                self.weights[j].push(self.coeffs.log_index_weight(j, i));
            }
        }
        Ok(())
    }

    /// `ln` of the sum over indices in `[0, terms)^N`.
    pub fn log_cube(&mut self, terms: usize) -> Result<T> {
        let terms = terms.max(1);
        self.ensure(terms)?;
        let n = self.coeffs.dims();
        if n == 0 {
            return Ok(self.coeffs.log_const + self.psi[0][0]);
        }
        let mut v: Vec<T> = (0..terms).map(|i| self.weights[0][i] + self.psi[0][i]).collect();
        let mut scratch = vec![T::zero(); terms];
        for j in 1..n {
            let next: Vec<T> = (0..terms)
                .map(|i| {
                    for p in 0..terms {
                        scratch[p] = v[p] + self.psi[j][p + i];
                    }
                    self.weights[j][i] + log_sum_exp(&scratch)
                })
                .collect();
            v = next;
        }
        for p in 0..terms {
            scratch[p] = v[p] + self.psi[n][p];
        }
        Ok(self.coeffs.log_const + log_sum_exp(&scratch))
    }

    /// Stop test for `terms` per dimension: `(passed, ln S_terms, achieved)`.
    fn shell_test(&mut self, terms: usize, cfg: &SeriesConfig<T>, scale: T) -> Result<(bool, T, T)> {
        let prev = self.log_cube(terms - 1)?;
        let cur = self.log_cube(terms)?;
        Ok(self.judge(prev, cur, cfg, scale))
    }

    fn judge(&self, prev: T, cur: T, cfg: &SeriesConfig<T>, scale: T) -> (bool, T, T) {
        if cur == T::neg_infinity() {
            return (true, cur, T::zero());
        }
        // relative size of the newest shell with respect to the new total
        let rel = if prev == T::neg_infinity() { T::one() } else { -(prev - cur).exp_m1() };
        let achieved = match cfg.rule {
            StopRule::Relative => rel,
            StopRule::Absolute => rel * cur.exp() * scale,
        };
        (achieved <= cfg.tol, cur, achieved.max(T::zero()))
    }

    fn finish(&self, terms: usize, ln_value: T, achieved: T) -> SeriesResult<T> {
        let dims = self.coeffs.dims();
        if ln_value == T::neg_infinity() {
            return SeriesResult::zero_degenerate(dims);
        }
        SeriesResult { value: ln_value.exp(), n_used: vec![terms - 1; dims], tol_achieved: achieved, converged: true, degenerate: false }
    }

    /// Adaptive truncation: the smallest `t ≥ 2` whose newest shell passes
    /// the stop test; `N_min = t − 1`. `scale` is the weight of this series
    /// in the final metric and only matters for [`StopRule::Absolute`].
    ///
    /// Up to [`SEQUENTIAL_LIMIT`] terms every `t` is tested in turn. Beyond
    /// that shells are past their peak, where the test is monotone in `t`,
    /// and the first passing `t` is located by doubling and bisection.
    pub fn adaptive(&mut self, cfg: &SeriesConfig<T>, scale: T) -> Result<SeriesResult<T>> {
        if self.coeffs.dims() == 0 {
            let v = self.log_cube(1)?.exp();
            return Ok(SeriesResult::exact(v));
        }
        let cap = cfg.n_max + 1;
        let mut prev = self.log_cube(1)?;
        let mut last = T::infinity();
        for terms in 2..=cap.min(SEQUENTIAL_LIMIT) {
            let cur = self.log_cube(terms)?;
            let (ok, cur, achieved) = self.judge(prev, cur, cfg, scale);
            if ok {
                return Ok(self.finish(terms, cur, achieved));
            }
            last = achieved;
            prev = cur;
        }
        let mut lo = SEQUENTIAL_LIMIT;
        let mut hi = lo;
        let mut found = None;
        while hi < cap {
            hi = (2 * hi).min(cap);
            let (ok, cur, achieved) = self.shell_test(hi, cfg, scale)?;
            if ok {
                found = Some((cur, achieved));
                break;
            }
            last = achieved;
            prev = cur;
            lo = hi;
        }
        let Some(mut best) = found else {
            return Err(FdlError::NonConvergence { partial: prev.exp().as_f64(), n_max: cfg.n_max, last_shell: last.as_f64() });
        };
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            let (ok, cur, achieved) = self.shell_test(mid, cfg, scale)?;
            if ok {
                hi = mid;
                best = (cur, achieved);
            } else {
                lo = mid;
            }
        }
        Ok(self.finish(hi, best.0, best.1))
    }
}

/// Largest term count tested one step at a time.
pub const SEQUENTIAL_LIMIT: usize = 24;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr_model::{ChainCoefficients, CorrelationSpec, MultiIndex};
    use crate::specfun::ln_lower_inc_gamma;

    /// Brute-force enumeration over the cube, term by term.
    fn brute(coeffs: &ChainCoefficients<f64>, x: &[f64], terms: usize) -> f64 {
        let n = coeffs.dims();
        let mut idx = vec![0usize; n];
        let mut total = 0.0;
        loop {
            let t = coeffs.term(&MultiIndex(idx.clone())).unwrap();
            let mut lv = t.log_a;
            for l in 0..coeffs.branches() {
                lv += ln_lower_inc_gamma(t.kappa[l], t.xi[l] * x[l]).unwrap();
            }
            total += lv.exp();
            let mut d = 0;
            loop {
                if d == n {
                    return total;
                }
                idx[d] += 1;
                if idx[d] < terms {
                    break;
                }
                idx[d] = 0;
                d += 1;
            }
        }
    }

    #[test]
    fn chain_contraction_matches_enumeration() {
        for (l, m, rho) in [(2usize, 1.0, 0.5), (3, 2.0, 0.9), (4, 1.5, 0.7), (5, 1.0, 0.3)] {
            let spec = CorrelationSpec::exponential(rho, l).unwrap();
            let coeffs = ChainCoefficients::for_spec(&spec, m).unwrap();
            let x: Vec<f64> = (0..l).map(|k| 0.4 + 0.3 * k as f64).collect();
            let xi = coeffs.xi.clone();
            let mut sum = ChainSum::new(&coeffs, |b, kappa| ln_lower_inc_gamma(kappa, xi[b] * x[b]));
            for terms in [1, 2, 5, 7] {
                let fast = sum.log_cube(terms).unwrap().exp();
                let slow = brute(&coeffs, &x, terms);
                assert!(((fast - slow) / slow).abs() < 1e-12, "L={l} terms={terms}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn adaptive_reports_shell_count() {
        let spec = CorrelationSpec::<f64>::iid(3).unwrap();
        let coeffs = ChainCoefficients::for_spec(&spec, 1.0).unwrap();
        let xi = coeffs.xi.clone();
        let mut sum = ChainSum::new(&coeffs, |b, kappa| ln_lower_inc_gamma(kappa, xi[b]));
        let r = sum.adaptive(&SeriesConfig::default(), 1.0).unwrap();
        assert!(r.converged);
        assert_eq!(r.n_used, vec![2, 2]);
        assert!(r.tol_achieved <= 1e-6);
    }

    /// Beyond the sequential range the located `N_min` must equal the one a
    /// term-by-term scan finds.
    #[test]
    fn long_series_match_sequential_scan() {
        for (rho, m, x, tol) in [(0.95_f64, 3.0, 3.0, 1e-6), (0.9, 2.0, 8.0, 1e-10), (0.97, 1.0, 1.0, 1e-8)] {
            let spec = CorrelationSpec::exponential(rho, 3).unwrap();
            let coeffs = ChainCoefficients::for_spec(&spec, m).unwrap();
            let xi = coeffs.xi.clone();
            let cfg = SeriesConfig { tol, n_max: 2000, rule: StopRule::Relative };
            let mut sum = ChainSum::new(&coeffs, |b, kappa| ln_lower_inc_gamma(kappa, xi[b] * x));
            let fast = sum.adaptive(&cfg, 1.0).unwrap();
            let mut prev = sum.log_cube(1).unwrap();
            let mut t = 2;
            loop {
                let cur = sum.log_cube(t).unwrap();
                if -(prev - cur).exp_m1() <= tol {
                    break;
                }
                prev = cur;
                t += 1;
            }
            assert!(t > SEQUENTIAL_LIMIT, "case too short to exercise the search: {t}");
            assert_eq!(fast.n_used, vec![t - 1; 2]);
            assert!(((fast.value - sum.log_cube(t).unwrap().exp()) / fast.value).abs() < 1e-14);
        }
    }

    #[test]
    fn cap_reports_non_convergence() {
        let spec = CorrelationSpec::exponential(0.95_f64, 3).unwrap();
        let coeffs = ChainCoefficients::for_spec(&spec, 3.0).unwrap();
        let xi = coeffs.xi.clone();
        let mut sum = ChainSum::new(&coeffs, |b, kappa| ln_lower_inc_gamma(kappa, xi[b] * 2.0));
        let cfg = SeriesConfig { tol: 1e-12, n_max: 3, rule: StopRule::Relative };
        match sum.adaptive(&cfg, 1.0) {
            Err(FdlError::NonConvergence { partial, n_max, .. }) => {
                assert_eq!(n_max, 3);
                assert!(partial > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
