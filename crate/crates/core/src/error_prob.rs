//! Average error probability for conditional error laws `A·Q(√(B g))`.
//!
//! Everything reduces to the kernel
//!
//! ```text
//! I(b, c, T) = ∫_T^∞ Q(√(B g)) g^{b−1} e^{−c g} dg,     b = 1, 2, …
//! ```
//!
//! and its complement `J(b, c, T) = ∫_0^T (same integrand)`. Internally the
//! kernels are carried as `ln(c^b I)`, the quantity that multiplies the
//! series coefficients.
//!
//! Integration by parts gives two exact finite/infinite forms of `c^b I`
//! (with `s = B/2 + c`, `t_n(y) = c^n Γ(n+½, y)/(n! s^{n+½})`,
//! `K = √B (b−1)! / (2√(2π))`):
//!
//! ```text
//! c^b I = Q(√(BT)) Γ(b, cT) − K Σ_{n<b}  t_n(sT)      (form 1)
//!       = K Σ_{n≥b} t_n(sT) − Q(√(BT)) γ(b, cT)       (form 2)
//! ```
//!
//! Form 1 cancels badly when `c ≪ B/2` (high SNR), form 2 is exact at
//! `T = 0` and well conditioned there; the evaluator picks the form that
//! loses fewer digits. The complement has an all-positive series
//! `c^b J = Q(√(BT)) γ(b, cT) + K Σ_{n≥b} c^n γ(n+½, sT)/(n! s^{n+½})`.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::corr_model::CorrelationSpec;
use crate::error::{FdlError, Result};
use crate::joint_stats::{merge, track, FadingModel, JointStats};
use crate::scalar::{log_add_exp, log_sum_exp, Real};
use crate::series::{ChainSum, SeriesConfig, SeriesResult};
use crate::specfun::{ln_factorial, ln_gamma, ln_gaussian_q, ln_lower_inc_gamma, ln_upper_inc_gamma};
use crate::swc_metrics::ThresholdProfile;

const MAX_TERMS: usize = 1_000_000;

/// Modulations whose conditional error probability is `A·Q(√(B g))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", content = "order", rename_all = "lowercase")]
pub enum ModulationScheme {
    Bpsk,
    /// M-ary PAM, exact symbol error probability.
    Pam(u32),
    /// Square M-QAM, the usual tight bit error approximation.
    Qam(u32),
}

impl ModulationScheme {
    pub fn new(name: &str, order: Option<u32>) -> Result<Self> {
        let scheme = match (name.to_ascii_lowercase().as_str(), order) {
            ("bpsk", None | Some(2)) => ModulationScheme::Bpsk,
            ("pam", Some(m)) => ModulationScheme::Pam(m),
            ("qam", Some(m)) => ModulationScheme::Qam(m),
            ("pam" | "qam", None) => return Err(FdlError::Config(format!("modulation {name} needs an order M"))),
            (other, _) => return Err(FdlError::Config(format!("unknown modulation '{other}' (bpsk, pam, qam)"))),
        };
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ModulationScheme::Bpsk => Ok(()),
            ModulationScheme::Pam(m) if m >= 2 => Ok(()),
            ModulationScheme::Qam(m) if m >= 4 && is_square(m) => Ok(()),
            other => Err(FdlError::Config(format!("unsupported modulation order {other:?}"))),
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ModulationScheme::Bpsk => "bpsk".into(),
            ModulationScheme::Pam(m) => format!("{m}-pam"),
            ModulationScheme::Qam(m) => format!("{m}-qam"),
        }
    }

    pub fn order(&self) -> u32 {
        match *self {
            ModulationScheme::Bpsk => 2,
            ModulationScheme::Pam(m) | ModulationScheme::Qam(m) => m,
        }
    }

    pub fn a<T: Real>(&self) -> T {
        match *self {
            ModulationScheme::Bpsk => T::one(),
            ModulationScheme::Pam(m) => T::lit(2.0 * (1.0 - 1.0 / m as f64)),
            ModulationScheme::Qam(m) => T::lit(4.0 * (1.0 - 1.0 / (m as f64).sqrt())),
        }
    }

    pub fn b<T: Real>(&self) -> T {
        match *self {
            ModulationScheme::Bpsk => T::lit(2.0),
            ModulationScheme::Pam(m) => T::lit(6.0 / ((m as f64).powi(2) - 1.0)),
            ModulationScheme::Qam(m) => T::lit(3.0 / (m as f64 - 1.0)),
        }
    }

    /// Conditional error probability at SNR `g`.
    pub fn conditional<T: Real>(&self, g: T) -> T {
        self.a::<T>() * crate::specfun::gaussian_q((self.b::<T>() * g).sqrt())
    }
}

fn is_square(m: u32) -> bool {
    let r = (m as f64).sqrt().round() as u32;
    r * r == m
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProbReport<T> {
    pub pe: T,
    /// Per-dimension term counts, maximum over every series involved.
    pub n_used: Vec<usize>,
    pub kernel_calls: usize,
    /// Branch series skipped because their bound is below working precision.
    pub bounded_branches: usize,
    /// `F^{(L)}` at the thresholds (the SWC normalization).
    pub all_fail_prob: T,
}

impl<T: Real> ErrorProbReport<T> {
    pub fn nmin(&self) -> usize {
        self.n_used.iter().copied().max().unwrap_or(0)
    }
}

fn check_kernel_args<T: Real>(b: usize, c: T, t: T, bb: T) -> Result<()> {
    if b == 0 {
        return Err(FdlError::Domain("kernel order b must be a positive integer".into()));
    }
    if !(c > T::zero() && c.is_finite()) {
        return Err(FdlError::Domain(format!("kernel rate c must be positive, got {c}")));
    }
    if !(t >= T::zero()) {
        return Err(FdlError::Domain(format!("kernel threshold must be nonnegative, got {t}")));
    }
    if !(bb > T::zero() && bb.is_finite()) {
        return Err(FdlError::Domain(format!("modulation constant B must be positive, got {bb}")));
    }
    Ok(())
}

/// `ln K = ln(√B (b−1)! / (2√(2π)))`.
fn ln_k<T: Real>(b: usize, bb: T) -> T {
    T::lit(0.5) * bb.ln() + ln_factorial::<T>(b - 1) - T::lit(2.0).ln() - T::lit(0.5) * T::TAU().ln()
}

/// `ln(P − N)` from logs, `None` when the difference is not resolvable.
fn ln_diff<T: Real>(ln_p: T, ln_n: T) -> Option<T> {
    if ln_n == T::neg_infinity() {
        return Some(ln_p);
    }
    let r = ln_n - ln_p;
    if r >= T::zero() {
        return None;
    }
    Some(ln_p + (-r.exp_m1()).ln())
}

/// `ln(c^b I(b, c, T))`.
pub fn ln_kernel_bracket<T: Real>(b: usize, c: T, t: T, bb: T) -> Result<T> {
    check_kernel_args(b, c, t, bb)?;
    if t == T::infinity() {
        return Ok(T::neg_infinity());
    }
    let fb = T::of_usize(b);
    let s = T::lit(0.5) * bb + c;
    let y = s * t;
    let ln_c = c.ln();
    let ln_s = s.ln();
    let ln_q = ln_gaussian_q((bb * t).sqrt());
    let lk = ln_k(b, bb);
    let half = T::lit(0.5);

    // ln t_n(y) with Γ(n+½, y) advanced by the upward recurrence
    let mut ln_up = ln_upper_inc_gamma(half, y)?;
    let ln_y = y.ln();
    let mut head = Vec::with_capacity(b);
    let term = |n: usize, ln_up: T| T::of_usize(n) * ln_c + ln_up - ln_factorial::<T>(n) - (T::of_usize(n) + half) * ln_s;
    for n in 0..b {
        head.push(term(n, ln_up));
        let a = T::of_usize(n) + half;
        ln_up = log_add_exp(a.ln() + ln_up, a * ln_y - y);
    }

    let p1 = ln_q + ln_upper_inc_gamma(fb, c * t)?;
    let n1 = lk + log_sum_exp(&head);
    let form1 = ln_diff(p1, n1);
    if let Some(v) = form1 {
        // accept when fewer than one digit is lost
        if n1 - p1 < T::lit(0.9f64.ln()) {
            return Ok(v);
        }
    }

    let mut tail = Vec::new();
    let mut best = T::neg_infinity();
    let mut prev = T::neg_infinity();
    let mut n = b;
    loop {
        let v = term(n, ln_up);
        tail.push(v);
        best = best.max(v);
        if n > b + 2 && v < prev && v < best + T::lit(-41.0) {
            break;
        }
        if n > MAX_TERMS {
            return Err(FdlError::NonConvergence { partial: f64::NAN, n_max: MAX_TERMS, last_shell: v.as_f64() });
        }
        prev = v;
        let a = T::of_usize(n) + half;
        ln_up = log_add_exp(a.ln() + ln_up, a * ln_y - y);
        n += 1;
    }
    let p2 = lk + log_sum_exp(&tail);
    let n2 = ln_q + ln_lower_inc_gamma(fb, c * t)?;
    let form2 = ln_diff(p2, n2);
    match (form1, form2) {
        (Some(a), Some(b2)) => Ok(if n1 - p1 <= n2 - p2 { a } else { b2 }),
        (None, Some(v)) | (Some(v), None) => Ok(v),
        (None, None) => Ok(T::neg_infinity()),
    }
}

/// `ln(c^b J(b, c, T))` with `J = ∫_0^T Q(√(Bg)) g^{b−1} e^{−cg} dg`.
pub fn ln_kernel_complement_bracket<T: Real>(b: usize, c: T, t: T, bb: T) -> Result<T> {
    check_kernel_args(b, c, t, bb)?;
    if t == T::zero() {
        return Ok(T::neg_infinity());
    }
    if t == T::infinity() {
        return ln_kernel_bracket(b, c, T::zero(), bb);
    }
    let half = T::lit(0.5);
    let s = half * bb + c;
    let y = s * t;
    let (ln_c, ln_s) = (c.ln(), s.ln());
    let head = ln_gaussian_q((bb * t).sqrt()) + ln_lower_inc_gamma(T::of_usize(b), c * t)?;
    let mut terms = Vec::new();
    let mut best = T::neg_infinity();
    let mut prev = T::neg_infinity();
    let mut n = b;
    loop {
        let fnn = T::of_usize(n);
        let v = fnn * ln_c + ln_lower_inc_gamma(fnn + half, y)? - ln_factorial::<T>(n) - (fnn + half) * ln_s;
        terms.push(v);
        best = best.max(v);
        if n > b + 2 && v < prev && v < best + T::lit(-41.0) {
            break;
        }
        if n > MAX_TERMS {
            return Err(FdlError::NonConvergence { partial: f64::NAN, n_max: MAX_TERMS, last_shell: v.as_f64() });
        }
        prev = v;
        n += 1;
    }
    Ok(log_add_exp(head, ln_k(b, bb) + log_sum_exp(&terms)))
}

/// `I(b, c, T) = ∫_T^∞ Q(√(Bg)) g^{b−1} e^{−cg} dg`.
pub fn kernel_i<T: Real>(b: usize, c: T, t: T, bb: T) -> Result<T> {
    Ok((ln_kernel_bracket(b, c, t, bb)? - T::of_usize(b) * c.ln()).exp())
}

/// `∫_0^T Q(√(Bg)) g^{b−1} e^{−cg} dg`.
pub fn kernel_i_complement<T: Real>(b: usize, c: T, t: T, bb: T) -> Result<T> {
    Ok((ln_kernel_complement_bracket(b, c, t, bb)? - T::of_usize(b) * c.ln()).exp())
}

fn integer_order<T: Real>(kappa: T) -> Result<usize> {
    let r = kappa.round();
    if (kappa - r).abs() > T::lit(1e-9) || r < T::one() {
        return Err(FdlError::Unsupported(format!("kernel order must be a positive integer, got {kappa}")));
    }
    Ok(r.to_usize().unwrap_or(0))
}

fn require_integer_m<T: Real>(model: &FadingModel<T>) -> Result<()> {
    if !model.has_integer_m() {
        return Err(FdlError::Unsupported(format!(
            "integer m required for analytic error probability (got m = {})",
            model.m()
        )));
    }
    Ok(())
}

/// How the last branch of an error-probability chain is integrated.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Tail {
    /// `∫_{T_ℓ}^∞`: the branch is accepted.
    Accept,
    /// `∫_0^{T_L}`: every branch failed and the last one is used anyway.
    Fallback,
}

impl<T: Real> JointStats<T> {
    /// `∫ Q(√(Bg)) · (density of using branch ℓ with SNR g)` as a chain series.
    fn branch_error_series(
        &self,
        t: &[T],
        l: usize,
        bb: T,
        tail: Tail,
        cfg: &SeriesConfig<T>,
        scale: T,
        calls: &Cell<usize>,
    ) -> Result<SeriesResult<T>> {
        if tail == Tail::Accept && t[..l - 1].iter().any(|&x| x == T::zero()) {
            return Ok(SeriesResult::zero_degenerate(l - 1));
        }
        let coeffs = self.chain(l);
        let gbar = self.model().gbar();
        let last = l - 1;
        let mut sum = ChainSum::new(coeffs, |j, kappa| {
            if j == last {
                calls.set(calls.get() + 1);
                let b = integer_order(kappa)?;
                let c = coeffs.xi[j] / gbar[j];
                match tail {
                    Tail::Accept => ln_kernel_bracket(b, c, t[j], bb),
                    Tail::Fallback => ln_kernel_complement_bracket(b, c, t[j], bb),
                }
            } else {
                ln_lower_inc_gamma(kappa, coeffs.xi[j] * t[j] / gbar[j])
            }
        });
        sum.adaptive(cfg, scale)
    }

    /// Sums the branch series of one receiver, largest a-priori bound first.
    ///
    /// Accepting branch `ℓ` contributes at most `Q(√(B T_ℓ))·P(g_ℓ > T_ℓ)`.
    /// A branch whose bound is below machine epsilon times the running total
    /// cannot change the sum and is skipped, so far-out thresholds never
    /// force a long series whose value is invisible.
    fn receiver_series(&self, t: &[T], bb: T, fallback: bool, cfg: &SeriesConfig<T>, scale: T) -> Result<(SeriesResult<T>, usize, usize)> {
        let m = self.model().m();
        let gbar = self.model().gbar();
        let mut jobs: Vec<(T, usize, Tail)> = Vec::with_capacity(t.len() + 1);
        for l in 1..=t.len() {
            let j = l - 1;
            let survival = ln_upper_inc_gamma(m, m * t[j] / gbar[j])? - ln_gamma(m);
            jobs.push((ln_gaussian_q((bb * t[j]).sqrt()) + survival, l, Tail::Accept));
        }
        if fallback {
            jobs.push((T::infinity(), t.len(), Tail::Fallback));
        }
        // stable: equal bounds keep branch order
        jobs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let calls = Cell::new(0);
        let mut acc = SeriesResult::exact(T::zero());
        let mut bounded = 0;
        for (ln_bound, l, tail) in jobs {
            if acc.value > T::zero() && ln_bound <= T::epsilon().ln() + acc.value.ln() {
                bounded += 1;
                continue;
            }
            let r = self.branch_error_series(t, l, bb, tail, cfg, scale, &calls)?;
            acc = merge(acc, &r);
        }
        Ok((acc, calls.get(), bounded))
    }

    /// Scan-and-wait combining: average error probability.
    pub fn swc_error_prob(&self, profile: &ThresholdProfile<T>, modulation: &ModulationScheme, cfg: &SeriesConfig<T>) -> Result<ErrorProbReport<T>> {
        require_integer_m(self.model())?;
        modulation.validate()?;
        let t = self.checked_thresholds(profile)?;
        let (a, bb) = (modulation.a::<T>(), modulation.b::<T>());
        let f = self.all_fail(&t, cfg)?;
        let scale = a / (T::one() - f.value);
        let (acc, kernel_calls, bounded_branches) = self.receiver_series(&t, bb, false, cfg, scale)?;
        let acc = track(acc, &f);
        Ok(ErrorProbReport { pe: scale * acc.value, n_used: acc.n_used, kernel_calls, bounded_branches, all_fail_prob: f.value })
    }

    /// Switch-and-examine combining: the last branch is used when all fail.
    pub fn sec_error_prob(&self, profile: &ThresholdProfile<T>, modulation: &ModulationScheme, cfg: &SeriesConfig<T>) -> Result<ErrorProbReport<T>> {
        require_integer_m(self.model())?;
        modulation.validate()?;
        let t = self.checked_thresholds(profile)?;
        let (a, bb) = (modulation.a::<T>(), modulation.b::<T>());
        let (acc, kernel_calls, bounded_branches) = self.receiver_series(&t, bb, true, cfg, a)?;
        Ok(ErrorProbReport { pe: a * acc.value, n_used: acc.n_used, kernel_calls, bounded_branches, all_fail_prob: T::nan() })
    }

    fn checked_thresholds(&self, profile: &ThresholdProfile<T>) -> Result<Vec<T>> {
        if profile.branches != self.branches() {
            return Err(FdlError::DimensionMismatch { expected: self.branches(), got: profile.branches });
        }
        Ok(profile.thresholds())
    }
}

pub fn swc_error_prob<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    profile: &ThresholdProfile<T>,
    modulation: &ModulationScheme,
    cfg: &SeriesConfig<T>,
) -> Result<ErrorProbReport<T>> {
    JointStats::new(model, spec)?.swc_error_prob(profile, modulation, cfg)
}

pub fn sec_error_prob<T: Real>(
    model: &FadingModel<T>,
    spec: &CorrelationSpec<T>,
    profile: &ThresholdProfile<T>,
    modulation: &ModulationScheme,
    cfg: &SeriesConfig<T>,
) -> Result<ErrorProbReport<T>> {
    JointStats::new(model, spec)?.sec_error_prob(profile, modulation, cfg)
}

/// Dual-branch Rayleigh scan-and-wait combining through the bivariate
/// series with parameter `ρ` (SNR correlation `√ρ`).
pub fn rayleigh_dual_error_prob<T: Real>(
    rho: T,
    gbar: [T; 2],
    profile: &ThresholdProfile<T>,
    modulation: &ModulationScheme,
    cfg: &SeriesConfig<T>,
) -> Result<ErrorProbReport<T>> {
    let model = FadingModel::new(T::one(), gbar.to_vec())?;
    let spec = CorrelationSpec::bivariate(rho)?;
    JointStats::new(&model, &spec)?.swc_error_prob(profile, modulation, cfg)
}
