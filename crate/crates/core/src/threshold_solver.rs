//! Threshold selection: pinning the scan-and-wait ANPE to a target, the
//! switch-and-examine error-minimizing threshold, and the composition of
//! the two used to compare both receivers at equal estimation load.

use rayon::prelude::*;
use serde::Serialize;

use crate::corr_model::CorrelationSpec;
use crate::error::{FdlError, Result};
use crate::error_prob::ModulationScheme;
use crate::joint_stats::{FadingModel, JointStats};
use crate::scalar::Real;
use crate::series::SeriesConfig;
use crate::swc_metrics::ThresholdProfile;

/// Lower end of every threshold search.
pub const GT_MIN: f64 = 1e-8;
/// Upper end of the ANPE bracket as a multiple of the largest `ḡ_ℓ`.
pub const ANPE_BRACKET_FACTOR: f64 = 1e3;
/// Relative tolerance on `g_{T_1}`.
pub const GT_REL_TOL: f64 = 1e-8;
/// Accepted relative mismatch between the solved and requested ANPE.
pub const ANPE_TOL: f64 = 1e-6;
/// SEC search interval `[SEC_GT_MIN, SEC_BRACKET_FACTOR·ḡ_1]`.
pub const SEC_GT_MIN: f64 = 1e-6;
pub const SEC_BRACKET_FACTOR: f64 = 1e2;
/// Number of log-spaced points in the SEC pre-bracketing grid.
pub const SEC_GRID: usize = 100;
/// An objective spread below this across the SEC grid is reported as flat.
pub const FLAT_SPREAD: f64 = 1e-12;

const MAX_ITER: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveResult<T> {
    pub gt1: T,
    /// Constraint value for root finding, `None` for minimization.
    pub target: Option<T>,
    /// Objective at `gt1`.
    pub achieved: T,
    pub iterations: usize,
    pub bracket: (T, T),
    /// The minimized objective was flat to within [`FLAT_SPREAD`].
    pub flat: bool,
}

fn anpe_or_inf<T: Real>(js: &JointStats<T>, gt1: T, delta: T, cfg: &SeriesConfig<T>) -> Result<T> {
    let p = ThresholdProfile::new(gt1, delta, js.branches())?;
    match js.metrics(&p, cfg) {
        Ok(r) => Ok(r.anpe_swc),
        // every branch fails with certainty: the estimation count diverges
        Err(FdlError::Degenerate(_)) => Ok(T::infinity()),
        Err(e) => Err(e),
    }
}

/// `g_{T_1}` with `N_e(g_{T_1}) = target`, by bisection in `ln g_{T_1}`.
pub fn solve_anpe_constraint<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    delta: T,
    target: T,
    cfg: &SeriesConfig<T>,
) -> Result<SolveResult<T>> {
    if !(target > T::one() && target.is_finite()) {
        return Err(FdlError::Domain(format!("ANPE target must exceed 1, got {target}")));
    }
    let js = JointStats::new(model, spec)?;
    let gmax = model.gbar().iter().copied().fold(T::zero(), T::max);
    let bracket = (T::lit(GT_MIN), T::lit(ANPE_BRACKET_FACTOR) * gmax);
    let at_lo = anpe_or_inf(&js, bracket.0, delta, cfg)?;
    if at_lo >= target {
        return Err(FdlError::NoBracket(format!("ANPE {at_lo} already exceeds target {target} at g_T1 = {}", bracket.0)));
    }
    // grow the upper end from ḡ: far-out thresholds need long series
    let mut hi_gt = gmax.min(bracket.1);
    let mut lo_gt = bracket.0;
    loop {
        let v = anpe_or_inf(&js, hi_gt, delta, cfg)?;
        if v >= target {
            break;
        }
        if hi_gt >= bracket.1 {
            return Err(FdlError::NoBracket(format!("ANPE target {target} unreachable; supremum over the bracket is {v}")));
        }
        lo_gt = hi_gt;
        hi_gt = (hi_gt * T::lit(4.0)).min(bracket.1);
    }
    let (mut lo, mut hi) = (lo_gt.ln(), hi_gt.ln());
    let tol = T::lit(GT_REL_TOL).ln_1p();
    let mut iterations = 0;
    while hi - lo > tol {
        if iterations == MAX_ITER {
            return Err(FdlError::NoBracket(format!("bisection did not reach tolerance in {MAX_ITER} steps")));
        }
        iterations += 1;
        let mid = T::lit(0.5) * (lo + hi);
        if anpe_or_inf(&js, mid.exp(), delta, cfg)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let gt1 = (T::lit(0.5) * (lo + hi)).exp();
    let achieved = anpe_or_inf(&js, gt1, delta, cfg)?;
    // a jump instead of a root: the target lies beyond the resolvable range
    if !((achieved - target).abs() <= T::lit(ANPE_TOL) * target) {
        return Err(FdlError::NoBracket(format!("ANPE target {target} not resolvable; reached {achieved} at g_T1 = {gt1}")));
    }
    Ok(SolveResult { gt1, target: Some(target), achieved, iterations, bracket, flat: false })
}

fn sec_pe<T: Real>(js: &JointStats<T>, gt1: T, delta: T, modulation: &ModulationScheme, cfg: &SeriesConfig<T>) -> Result<T> {
    Ok(js.sec_error_prob(&ThresholdProfile::new(gt1, delta, js.branches())?, modulation, cfg)?.pe)
}

/// Minimizes the switch-and-examine error probability over `g_{T_1}`:
/// a log-spaced grid locates the best cell, golden-section search refines
/// it, and the better of the two is returned.
pub fn optimize_sec_threshold<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    delta: T,
    modulation: &ModulationScheme,
    cfg: &SeriesConfig<T>,
) -> Result<SolveResult<T>> {
    let js = JointStats::new(model, spec)?;
    let bracket = (T::lit(SEC_GT_MIN), T::lit(SEC_BRACKET_FACTOR) * model.gbar()[0]);
    let (a, b) = (bracket.0.ln(), bracket.1.ln());
    let step = (b - a) / T::of_usize(SEC_GRID - 1);
    let xs: Vec<T> = (0..SEC_GRID).map(|i| a + step * T::of_usize(i)).collect();
    let fs: Vec<T> = xs.par_iter().map(|&x| sec_pe(&js, x.exp(), delta, modulation, cfg)).collect::<Result<_>>()?;
    let best = (0..SEC_GRID).fold(0, |k, i| if fs[i] < fs[k] { i } else { k });
    let worst = fs.iter().copied().fold(T::neg_infinity(), T::max);
    let flat = (worst - fs[best]).as_f64() < FLAT_SPREAD;
    let (mut x, mut f) = (xs[best], fs[best]);
    let mut iterations = 0;
    if !flat {
        let (mut lo, mut hi) = (xs[best.saturating_sub(1)], xs[(best + 1).min(SEC_GRID - 1)]);
        let inv_phi = T::lit(0.618_033_988_749_894_8);
        let mut x1 = hi - inv_phi * (hi - lo);
        let mut x2 = lo + inv_phi * (hi - lo);
        let mut f1 = sec_pe(&js, x1.exp(), delta, modulation, cfg)?;
        let mut f2 = sec_pe(&js, x2.exp(), delta, modulation, cfg)?;
        let tol = T::lit(GT_REL_TOL);
        while hi - lo > tol && iterations < MAX_ITER {
            iterations += 1;
            if f1 <= f2 {
                hi = x2;
                (x2, f2) = (x1, f1);
                x1 = hi - inv_phi * (hi - lo);
                f1 = sec_pe(&js, x1.exp(), delta, modulation, cfg)?;
            } else {
                lo = x1;
                (x1, f1) = (x2, f2);
                x2 = lo + inv_phi * (hi - lo);
                f2 = sec_pe(&js, x2.exp(), delta, modulation, cfg)?;
            }
        }
        for (xc, fc) in [(x1, f1), (x2, f2)] {
            if fc < f {
                (x, f) = (xc, fc);
            }
        }
    }
    Ok(SolveResult { gt1: x.exp(), target: None, achieved: f, iterations, bracket, flat })
}

/// Both receivers at equal estimation load.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SecMatch<T> {
    /// SEC error-minimizing threshold.
    pub sec: SolveResult<T>,
    /// `N_SEC` at the SEC optimum, the ANPE target for SWC.
    pub anpe_sec: T,
    /// SWC threshold achieving that ANPE.
    pub swc: SolveResult<T>,
}

pub fn sec_matched_thresholds<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    delta: T,
    modulation: &ModulationScheme,
    cfg: &SeriesConfig<T>,
) -> Result<SecMatch<T>> {
    let sec = optimize_sec_threshold(model, spec, delta, modulation, cfg)?;
    let js = JointStats::new(model, spec)?;
    let anpe_sec = js.anpe_sec_series(&ThresholdProfile::new(sec.gt1, delta, js.branches())?, cfg)?.value;
    let swc = if anpe_sec > T::one() {
        solve_anpe_constraint(model, spec, delta, anpe_sec, cfg)?
    } else {
        // SEC never leaves the first branch; neither does SWC at g_T = 0
        SolveResult { gt1: T::zero(), target: Some(anpe_sec), achieved: T::one(), iterations: 0, bracket: (T::zero(), T::zero()), flat: false }
    };
    Ok(SecMatch { sec, anpe_sec, swc })
}

/// SWC threshold whose ANPE equals `N_SEC` at the SEC optimum.
pub fn match_sec_anpe<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    delta: T,
    modulation: &ModulationScheme,
    cfg: &SeriesConfig<T>,
) -> Result<SolveResult<T>> {
    Ok(sec_matched_thresholds(model, spec, delta, modulation, cfg)?.swc)
}
