//! Reference numerics for the fdl test suites.
//!
//! Nothing here shares code with the `fdl` crate: quadrature is plain
//! adaptive Gauss-Kronrod and the special functions come from `libm`.

pub mod quadrature;

/// Gaussian tail probability via the libm complementary error function.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// `erfc` from libm.
pub fn erfc(x: f64) -> f64 {
    libm::erfc(x)
}

/// `ln Γ(x)` from libm.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}
