//! One runner per experiment. Each returns a [`Report`]; shape violations
//! are recorded in the report rather than raised.

mod adiabatic;
mod cone_check;
mod correlation;
mod decay;
mod ergodic;
mod perturb;
mod srb;

pub use adiabatic::run_adiabatic;
pub use cone_check::run_cone_check;
pub use correlation::run_correlation;
pub use decay::run_decay;
pub use ergodic::run_ergodic;
pub use perturb::run_perturb;
pub use srb::{orbit_histogram, run_srb};

use qds_core::transfer_op::OperatorCache;

use crate::config::{Experiment, Setup};
use crate::report::Report;

pub fn run(setup: &Setup) -> anyhow::Result<Report> {
    match setup.config.experiment {
        Experiment::Decay => run_decay(setup),
        Experiment::Perturb => run_perturb(setup),
        Experiment::Adiabatic => run_adiabatic(setup),
        Experiment::Correlation => run_correlation(setup),
        Experiment::Ergodic => run_ergodic(setup),
        Experiment::ConeCheck => run_cone_check(setup),
        Experiment::Srb => run_srb(setup),
    }
}

fn cache_for(setup: &Setup, capacity: usize) -> OperatorCache<f64> {
    let t = &setup.config.tolerances;
    OperatorCache::with_settings(capacity, t.srb_tol, t.srb_max_iter)
}

/// Least-squares slope of `ln y` against `ln x` over the positive pairs;
/// `None` with fewer than two of them.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(&x, &y)| x > 0.0 && y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// `measured / shape` at the calibration point, or 0 when both vanish.
fn fit_constant(measured: f64, shape: f64) -> f64 {
    if measured == 0.0 {
        0.0
    } else {
        measured / shape
    }
}
