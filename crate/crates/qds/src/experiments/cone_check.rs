use qds_core::cone::{cone_membership, grid_eps, random_cone_density, ConeParams};
use qds_core::ergodic::sample_stream;
use qds_core::transfer_op::GridDensity;
use rand::Rng;
use rayon::prelude::*;

use super::cache_for;
use crate::config::{Experiment, Setup};
use crate::report::Report;

/// Random cone densities pushed through random admissible maps; each
/// pushforward must stay in `C_*(β_*)` up to `ε_cone + 2/N`.
pub fn run_cone_check(setup: &Setup) -> anyhow::Result<Report> {
    let cfg = &setup.config;
    let n = cfg.grid;
    let params = ConeParams::new(cfg.beta_star)?;
    let alpha_max = cfg.cone_check.alpha_max.unwrap_or(cfg.beta_star);
    let eps = grid_eps(cfg.tolerances.cone_eps, n);
    let cache = cache_for(setup, 64);

    let outcomes: Vec<(f64, bool, f64, qds_core::cone::ConeMargins<f64>)> = (0..cfg.samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = sample_stream(cfg.seed, i as u64);
            let d: GridDensity<f64> = random_cone_density(&mut rng, n, &params)?;
            let input = cone_membership(&d, &params, grid_eps(1e-9, n))?;
            let alpha = rng.random_range(0.0..=alpha_max);
            let out = cache.operator(alpha, n)?.apply(&d)?;
            let report = cone_membership(&out, &params, eps)?;
            Ok((alpha, input.passes && report.passes, report.margins.min(), report.margins))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut report = Report::new(
        Experiment::ConeCheck,
        &[
            "sample",
            "alpha",
            "min_margin",
            "nonnegative",
            "decreasing",
            "weighted_increasing",
            "upper_bound",
            "status",
        ],
    );
    for (i, (alpha, passes, min, m)) in outcomes.into_iter().enumerate() {
        let violation = (!passes).then(|| format!("sample {i} (alpha = {alpha}): worst margin {min:e} below -{eps:e}"));
        report.push(
            vec![
                i.into(),
                alpha.into(),
                min.into(),
                m.nonnegative.into(),
                m.decreasing.into(),
                m.weighted_increasing.into(),
                m.upper_bound.into(),
            ],
            violation,
        );
    }
    report.note("eps_cone", eps);
    Ok(report)
}
