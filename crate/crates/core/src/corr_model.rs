//! Correlation-matrix parameterizations and the per-term coefficients
//! `A(m, Σ, i)`, `κ_ℓ(m)`, `ξ_ℓ(m, Σ)` of the multivariate Gamma series.
//!
//! Two coefficient providers exist:
//!
//! * exponential correlation (`Σ_{k,ℓ} = ρ^{|k-ℓ|}`), any `m ≥ 0.5`, `N = L-1`
//!   indices, built from `W = (√Σ)^{-1}`;
//! * the dual-branch Rayleigh series, `m = 1`, `L = 2`, `N = 1`, with
//!   `A = (1-√ρ) ρ^{i/2} / (i! Γ(i+1))` and `ξ = 1/(1-√ρ)`.
//!
//! Both have the same chain shape: index `i_j` couples branches `j` and
//! `j+1`, and `κ_ℓ = m + i_{ℓ-1} + i_ℓ` (missing neighbours count as zero).
//! [`ChainCoefficients`] stores exactly what the series engine needs to
//! exploit that shape.

use serde::{Deserialize, Serialize};

use crate::error::{FdlError, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;
use crate::specfun::ln_gamma;

/// Correlation used to stand in for independent branches.
pub const IID_RHO: f64 = 1e-4;

/// Largest accepted condition number of `√Σ`.
pub const CONDITION_LIMIT: f64 = 1e12;

/// How `√Σ` is read when forming `W = (√Σ)^{-1}` and when drawing the
/// Gaussian components of the Monte Carlo sampler.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianMap {
    /// Entry-wise square root: Gaussian correlation `√ρ_{k,ℓ}`, so that the
    /// SNR (power) correlation equals `Σ`.
    #[default]
    #[serde(rename = "elementwise")]
    ElementwiseSqrt,
    /// Principal matrix square root of `Σ`.
    #[serde(rename = "matrix")]
    MatrixSqrt,
}

impl GaussianMap {
    pub fn name(self) -> &'static str {
        match self {
            GaussianMap::ElementwiseSqrt => "elementwise",
            GaussianMap::MatrixSqrt => "matrix",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationKind<T> {
    /// Independent, identically correlated stand-in: exponential with a tiny `ρ`
    /// ([`IID_RHO`] by default, `0` selects the exact independence shortcut).
    Iid { rho: T },
    /// `Σ_{k,ℓ} = ρ^{|k-ℓ|}`.
    Exponential { rho: T },
    /// Dual-branch Rayleigh parameterization; `√ρ` is the SNR correlation.
    Bivariate { rho: T },
}

/// Validated correlation description for `L` branches.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSpec<T> {
    kind: CorrelationKind<T>,
    branches: usize,
    gaussian_map: GaussianMap,
}

/// Multi-index `(i_1, …, i_N)` of one series term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<usize>);

/// Coefficients of a single series term; `A` is kept as `ln|A|` and a sign.
#[derive(Debug, Clone, PartialEq)]
pub struct TermCoefficients<T> {
    pub log_a: T,
    pub sign: i8,
    pub kappa: Vec<T>,
    pub xi: Vec<T>,
}

impl<T: Real> TermCoefficients<T> {
    pub fn a(&self) -> T {
        T::lit(self.sign as f64) * self.log_a.exp()
    }
}

impl<T: Real> CorrelationSpec<T> {
    pub fn new(kind: CorrelationKind<T>, branches: usize, gaussian_map: GaussianMap) -> Result<Self> {
        let rho = match kind {
            CorrelationKind::Iid { rho } | CorrelationKind::Exponential { rho } | CorrelationKind::Bivariate { rho } => rho,
        };
        if !(rho >= T::zero() && rho < T::one()) {
            return Err(FdlError::Domain(format!("correlation coefficient must lie in [0,1), got {rho}")));
        }
        if branches == 0 {
            return Err(FdlError::Domain("at least one branch is required".into()));
        }
        if matches!(kind, CorrelationKind::Bivariate { .. }) && branches != 2 {
            return Err(FdlError::DimensionMismatch { expected: 2, got: branches });
        }
        let spec = CorrelationSpec { kind, branches, gaussian_map };
        let root = spec.sqrt_sigma();
        let cond = root.condition_number();
        if !(cond <= T::lit(CONDITION_LIMIT)) || root.min_eigenvalue() <= T::zero() {
            return Err(FdlError::Singular { condition: cond.as_f64() });
        }
        Ok(spec)
    }

    /// IID stand-in with `ρ = 10⁻⁴`.
    pub fn iid(branches: usize) -> Result<Self> {
        Self::new(CorrelationKind::Iid { rho: T::lit(IID_RHO) }, branches, GaussianMap::default())
    }

    /// Exactly independent branches (`ρ = 0`, single-term series).
    pub fn independent(branches: usize) -> Result<Self> {
        Self::new(CorrelationKind::Iid { rho: T::zero() }, branches, GaussianMap::default())
    }

    pub fn exponential(rho: T, branches: usize) -> Result<Self> {
        Self::new(CorrelationKind::Exponential { rho }, branches, GaussianMap::default())
    }

    pub fn bivariate(rho: T) -> Result<Self> {
        Self::new(CorrelationKind::Bivariate { rho }, 2, GaussianMap::default())
    }

    pub fn with_map(self, gaussian_map: GaussianMap) -> Result<Self> {
        Self::new(self.kind, self.branches, gaussian_map)
    }

    pub fn kind(&self) -> CorrelationKind<T> {
        self.kind
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn gaussian_map(&self) -> GaussianMap {
        self.gaussian_map
    }

    /// The `ρ` parameter as given by the caller.
    pub fn rho(&self) -> T {
        match self.kind {
            CorrelationKind::Iid { rho } | CorrelationKind::Exponential { rho } | CorrelationKind::Bivariate { rho } => rho,
        }
    }

    /// Correlation matrix `Σ` of the branch SNRs.
    pub fn sigma(&self) -> Matrix<T> {
        match self.kind {
            CorrelationKind::Iid { rho } | CorrelationKind::Exponential { rho } => {
                Matrix::from_fn(self.branches, |k, l| rho.powi((k as i32 - l as i32).abs()))
            }
            CorrelationKind::Bivariate { rho } => {
                let r = rho.sqrt();
                Matrix::from_fn(2, |k, l| if k == l { T::one() } else { r })
            }
        }
    }

    /// `√Σ` under the configured convention.
    pub fn sqrt_sigma(&self) -> Matrix<T> {
        let sigma = self.sigma();
        match self.gaussian_map {
            GaussianMap::ElementwiseSqrt => sigma.map(|x| x.sqrt()),
            GaussianMap::MatrixSqrt => sigma.spectral_map(|x| x.max(T::zero()).sqrt()),
        }
    }

    /// Unit-diagonal Gaussian correlation used by the sampler.
    pub fn sampling_correlation(&self) -> Matrix<T> {
        let root = self.sqrt_sigma();
        Matrix::from_fn(self.branches, |i, j| root.get(i, j) / (root.get(i, i) * root.get(j, j)).sqrt())
    }

    /// Correlation restricted to the first `k` branches (`Σ^{(k)}`).
    pub fn leading(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.branches {
            return Err(FdlError::DimensionMismatch { expected: self.branches, got: k });
        }
        let kind = match self.kind {
            CorrelationKind::Bivariate { .. } if k == 1 => CorrelationKind::Iid { rho: T::zero() },
            other => other,
        };
        Self::new(kind, k, self.gaussian_map)
    }
}

/// `W = (√Σ)^{-1}` for exponential (and IID) correlations.
pub fn w_matrix<T: Real>(spec: &CorrelationSpec<T>) -> Result<Matrix<T>> {
    if matches!(spec.kind, CorrelationKind::Bivariate { .. }) {
        return Err(FdlError::Unsupported("W is defined for exponential correlation only".into()));
    }
    let root = spec.sqrt_sigma();
    let cond = root.condition_number();
    if !(cond <= T::lit(CONDITION_LIMIT)) {
        return Err(FdlError::Singular { condition: cond.as_f64() });
    }
    let w = root.spectral_map(|x| T::one() / x);
    // symmetrize round-off
    Ok(Matrix::from_fn(w.dim(), |i, j| T::lit(0.5) * (w.get(i, j) + w.get(j, i))))
}

/// Chain-structured coefficient set for one correlation spec and `m`.
///
/// `ln A(i) = log_const + Σ_j [i_j·log_coupling_j − ln i_j! − ln Γ(i_j+m)] − Σ_ℓ κ_ℓ·log_diag_ℓ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainCoefficients<T> {
    pub m: T,
    pub log_const: T,
    pub log_coupling: Vec<T>,
    pub log_diag: Vec<T>,
    pub xi: Vec<T>,
}

impl<T: Real> ChainCoefficients<T> {
    pub fn for_spec(spec: &CorrelationSpec<T>, m: T) -> Result<Self> {
        if !(m >= T::lit(0.5)) {
            return Err(FdlError::Domain(format!("Nakagami m must be ≥ 0.5, got {m}")));
        }
        match spec.kind {
            CorrelationKind::Bivariate { rho } => {
                if m != T::one() {
                    return Err(FdlError::Unsupported("the dual-branch Rayleigh series requires m = 1".into()));
                }
                Self::bivariate(rho)
            }
            _ => Self::exponential(spec, m),
        }
    }

    fn exponential(spec: &CorrelationSpec<T>, m: T) -> Result<Self> {
        let w = w_matrix(spec)?;
        let l = spec.branches;
        let det = w.determinant_symmetric();
        if !(det > T::zero()) {
            return Err(FdlError::Singular { condition: f64::INFINITY });
        }
        let log_coupling = (0..l.saturating_sub(1))
            .map(|j| {
                let v = w.get(j, j + 1);
                (v * v).ln()
            })
            .collect();
        Ok(ChainCoefficients {
            m,
            log_const: m * det.ln() - ln_gamma(m),
            log_coupling,
            log_diag: (0..l).map(|k| w.get(k, k).ln()).collect(),
            xi: (0..l).map(|k| m * w.get(k, k)).collect(),
        })
    }

    fn bivariate(rho: T) -> Result<Self> {
        if !(rho >= T::zero() && rho < T::one()) {
            return Err(FdlError::Domain(format!("correlation coefficient must lie in [0,1), got {rho}")));
        }
        let s = rho.sqrt();
        Ok(ChainCoefficients {
            m: T::one(),
            log_const: (T::one() - s).ln(),
            log_coupling: vec![T::lit(0.5) * rho.ln()],
            log_diag: vec![T::zero(); 2],
            xi: vec![T::one() / (T::one() - s); 2],
        })
    }

    pub fn branches(&self) -> usize {
        self.xi.len()
    }

    /// Number of summation indices `N`.
    pub fn dims(&self) -> usize {
        self.log_coupling.len()
    }

    /// `ln(W_{j,j+1}^{2i} / (i! Γ(i+m)))` with `0⁰ = 1`.
    #[inline]
    pub fn log_index_weight(&self, j: usize, i: usize) -> T {
        let fi = T::of_usize(i);
        let power = if i == 0 { T::zero() } else { fi * self.log_coupling[j] };
        power - ln_gamma(fi + T::one()) - ln_gamma(fi + self.m)
    }

    /// `κ_ℓ` for branch `l` (0-based) given the multi-index.
    pub fn kappa(&self, idx: &[usize], l: usize) -> T {
        let n = self.dims();
        let left = if l > 0 { idx[l - 1] } else { 0 };
        let right = if l < n { idx[l] } else { 0 };
        self.m + T::of_usize(left + right)
    }

    pub fn term(&self, idx: &MultiIndex) -> Result<TermCoefficients<T>> {
        let idx = &idx.0;
        if idx.len() != self.dims() {
            return Err(FdlError::DimensionMismatch { expected: self.dims(), got: idx.len() });
        }
        let kappa: Vec<T> = (0..self.branches()).map(|l| self.kappa(idx, l)).collect();
        let mut log_a = self.log_const;
        for (j, &i) in idx.iter().enumerate() {
            log_a = log_a + self.log_index_weight(j, i);
        }
        for (k, &ld) in kappa.iter().zip(&self.log_diag) {
            log_a = log_a - *k * ld;
        }
        Ok(TermCoefficients { log_a, sign: 1, kappa, xi: self.xi.clone() })
    }
}

/// Term coefficients of the exponential-correlation series at `idx`.
pub fn exp_cm_coefficients<T: Real>(spec: &CorrelationSpec<T>, m: T, idx: &MultiIndex) -> Result<TermCoefficients<T>> {
    if matches!(spec.kind, CorrelationKind::Bivariate { .. }) {
        return Err(FdlError::Unsupported("bivariate spec has its own provider".into()));
    }
    ChainCoefficients::exponential_checked(spec, m)?.term(idx)
}

/// Term coefficients of the dual-branch Rayleigh series at index `i1`.
pub fn bivariate_rayleigh_coefficients<T: Real>(rho: T, i1: usize) -> Result<TermCoefficients<T>> {
    ChainCoefficients::bivariate(rho)?.term(&MultiIndex(vec![i1]))
}

impl<T: Real> ChainCoefficients<T> {
    fn exponential_checked(spec: &CorrelationSpec<T>, m: T) -> Result<Self> {
        if !(m >= T::lit(0.5)) {
            return Err(FdlError::Domain(format!("Nakagami m must be ≥ 0.5, got {m}")));
        }
        Self::exponential(spec, m)
    }
}
