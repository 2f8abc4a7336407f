//! Convergence study: truncation depth, kernel work and wall time of the
//! series as the tolerance, the correlation and the average SNR vary.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::corr_model::{CorrelationKind, CorrelationSpec, GaussianMap};
use crate::error::Result;
use crate::experiments::{nmin_columns, nmin_point};
use crate::joint_stats::{FadingModel, JointStats};
use crate::series::SeriesConfig;
use crate::specfun::db_to_linear;

pub const STUDY_TOLS: [f64; 3] = [1e-4, 1e-6, 1e-8];
pub const STUDY_RHOS: [f64; 2] = [0.9, crate::corr_model::IID_RHO];
pub const STUDY_SNR_DB: [f64; 7] = [0.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRecord {
    pub column: String,
    #[serde(rename = "L")]
    pub branches: usize,
    pub m: f64,
    pub rho: f64,
    pub gbar1_db: f64,
    pub tol: f64,
    pub nmin: usize,
    pub kernel_calls: usize,
    pub wall_ms: f64,
}

/// Term counts of the tabulated configurations for every tolerance and
/// correlation of the study. Points run sequentially so that `wall_ms`
/// measures one evaluation, not pool contention.
pub fn convergence_study(tols: &[f64], rhos: &[f64], grid_db: &[f64], n_max: usize) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &tol in tols {
        let series = SeriesConfig::new(tol, n_max)?;
        for &rho in rhos {
            for col in nmin_columns() {
                for &db in grid_db {
                    let t0 = Instant::now();
                    let r = nmin_point(&col, rho, db, &series, GaussianMap::ElementwiseSqrt)?;
                    out.push(BenchRecord {
                        column: col.label.into(),
                        branches: col.branches,
                        m: col.m,
                        rho,
                        gbar1_db: db,
                        tol,
                        nmin: r.nmin,
                        kernel_calls: r.kernel_calls,
                        wall_ms: t0.elapsed().as_secs_f64() * 1e3,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CdfTiming {
    #[serde(rename = "L")]
    pub branches: usize,
    pub m: f64,
    pub rho: f64,
    pub tol: f64,
    pub value: f64,
    pub nmin: usize,
    pub wall_ms: f64,
}

/// Joint CDF at the mean SNR vector (10 dB, no decay) over a grid of
/// branch counts, fading orders and correlations.
pub fn joint_cdf_timing(branches: &[usize], ms: &[f64], rhos: &[f64], tol: f64, n_max: usize) -> Result<Vec<CdfTiming>> {
    let series = SeriesConfig::new(tol, n_max)?;
    let jobs: Vec<(usize, f64, f64)> = branches.iter().flat_map(|&l| ms.iter().flat_map(move |&m| rhos.iter().map(move |&r| (l, m, r)))).collect();
    jobs.par_iter()
        .map(|&(l, m, rho)| {
            let gbar = db_to_linear(10.0);
            let model = FadingModel::with_decay(m, gbar, 0.0, l)?;
            let spec = CorrelationSpec::new(CorrelationKind::Exponential { rho }, l, GaussianMap::ElementwiseSqrt)?;
            let t0 = Instant::now();
            let js = JointStats::new(&model, &spec)?;
            let r = js.joint_cdf(&vec![gbar; l], &series)?;
            Ok(CdfTiming { branches: l, m, rho, tol, value: r.value, nmin: r.n_min(), wall_ms: t0.elapsed().as_secs_f64() * 1e3 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn study(tols: &[f64], rhos: &[f64]) -> Vec<BenchRecord> {
        convergence_study(tols, rhos, &[0.0, 7.5, 15.0], 1000).unwrap()
    }

    #[test]
    fn nmin_nonincreasing_in_snr() {
        let recs = study(&[1e-6], &[0.9]);
        for w in recs.chunks(3) {
            assert!(w[0].nmin >= w[1].nmin && w[1].nmin >= w[2].nmin, "{}: {:?}", w[0].column, w.iter().map(|r| r.nmin).collect::<Vec<_>>());
        }
    }

    #[test]
    fn near_independence_needs_few_terms() {
        for r in study(&[1e-6], &[crate::corr_model::IID_RHO]) {
            assert!(r.nmin <= 2, "{} at {} dB: {}", r.column, r.gbar1_db, r.nmin);
        }
    }

    #[test]
    fn tighter_tolerance_never_lowers_nmin() {
        let recs = study(&[1e-4, 1e-8], &[0.9]);
        let (loose, tight) = recs.split_at(recs.len() / 2);
        for (a, b) in loose.iter().zip(tight) {
            assert_eq!((&a.column, a.gbar1_db), (&b.column, b.gbar1_db));
            assert!(b.nmin >= a.nmin, "{} at {} dB: {} < {}", a.column, a.gbar1_db, b.nmin, a.nmin);
        }
    }

    #[test]
    fn cdf_timing_grid_is_complete() {
        let t = joint_cdf_timing(&[2, 3], &[1.0, 2.0], &[0.5, 0.9], 1e-6, 1000).unwrap();
        assert_eq!(t.len(), 8);
        for r in &t {
            assert!(r.value > 0.0 && r.value < 1.0);
        }
        // stronger correlation needs at least as many terms
        for pair in t.chunks(2) {
            assert!(pair[1].nmin >= pair[0].nmin);
        }
    }
}
