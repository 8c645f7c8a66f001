use qds_core::cone::ConeParams;
use qds_core::ergodic::sample_stream;
use qds_core::pm_map::PmMap;
use qds_core::transfer_op::{srb_density, GridDensity};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{Experiment, Setup};
use crate::report::Report;

/// Normalised histogram of `chains` orbits of `T_α`, each started from a
/// uniform point, run `burn_in` steps, then sampled for `per_chain` steps.
pub fn orbit_histogram(
    alpha: f64,
    bins: usize,
    chains: usize,
    per_chain: u64,
    burn_in: usize,
    seed: u64,
) -> anyhow::Result<GridDensity<f64>> {
    let map = PmMap::new(alpha)?;
    let counts: Vec<Vec<u64>> = (0..chains)
        .into_par_iter()
        .map(|c| {
            let mut x: f64 = sample_stream(seed, c as u64).random();
            let mut counts = vec![0u64; bins];
            for _ in 0..burn_in {
                x = map.apply(x);
            }
            for _ in 0..per_chain {
                x = map.apply(x);
                counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
            }
            counts
        })
        .collect();
    let mut total = vec![0u64; bins];
    for c in &counts {
        for (t, v) in total.iter_mut().zip(c) {
            *t += v;
        }
    }
    let points = (chains as u64 * per_chain) as f64;
    Ok(GridDensity::new(total.iter().map(|&c| c as f64 * bins as f64 / points).collect())?)
}

/// Averages of `d` over blocks of consecutive cells (`d.n_cells()` must be
/// a multiple of `bins`).
fn coarsen(d: &GridDensity<f64>, bins: usize) -> anyhow::Result<GridDensity<f64>> {
    let n = d.n_cells();
    anyhow::ensure!(n.is_multiple_of(bins), "grid of {n} cells cannot be coarsened to {bins} bins");
    let w = n / bins;
    Ok(GridDensity::new(
        d.values().chunks(w).map(|c| c.iter().sum::<f64>() / w as f64).collect(),
    )?)
}

/// Worst relative slack of `values[i] ≤ a(α) x_i^{-α} m (1 + ε)` over cells
/// `i ≥ 1` (0-based), with `x_i` the left edge.
fn cone_bound_margin(d: &GridDensity<f64>, alpha: f64) -> anyhow::Result<f64> {
    let a = ConeParams::new(alpha)?.a();
    let n = d.n_cells() as f64;
    Ok((1..d.n_cells())
        .map(|i| {
            let bound = a * (i as f64 / n).powf(-alpha) * d.mass();
            (bound - d.values()[i]) / bound
        })
        .fold(f64::INFINITY, f64::min))
}

/// SRB densities by power iteration, checked for monotonicity, the cone
/// bound and (optionally) against an orbit histogram.
pub fn run_srb(setup: &Setup) -> anyhow::Result<Report> {
    let cfg = &setup.config;
    let tol = &cfg.tolerances;
    let n = cfg.grid;
    let bins = cfg.srb.bins.unwrap_or(n);
    let f = &setup.observable;

    let mut report = Report::new(
        Experiment::Srb,
        &[
            "alpha",
            "mass",
            "max_value",
            "min_value",
            "max_increase",
            "cone_bound_margin",
            "histogram_l1",
            "observable_mean",
            "status",
        ],
    );
    for alpha in cfg.srb_alphas(&setup.curve) {
        let d = srb_density(&PmMap::new(alpha)?, n, tol.srb_tol, tol.srb_max_iter)?;
        let v = d.values();
        let max_increase = v.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_value = v.iter().copied().fold(f64::INFINITY, f64::min);
        let margin = cone_bound_margin(&d, alpha)?;
        // For α = 0 the map is x ↦ 2x mod 1, whose floating-point orbits reach
        // 0 after about 53 steps, so a histogram says nothing there.
        let hist_l1 = if cfg.srb.orbit_points > 0 && alpha > 0.0 {
            let per_chain = cfg.srb.orbit_points.div_ceil(cfg.srb.chains as u64);
            let hist = orbit_histogram(alpha, bins, cfg.srb.chains, per_chain, cfg.srb.burn_in, cfg.seed)?;
            qds_core::transfer_op::l1_distance(&coarsen(&d, bins)?, &hist)?
        } else {
            f64::NAN
        };

        let mut problems = Vec::new();
        if max_increase > 1e-12 {
            problems.push(format!("density increases somewhere (by {max_increase:e})"));
        }
        if margin < -tol.grid_eps {
            problems.push(format!("cone bound margin {margin:e} below -{}", tol.grid_eps));
        }
        if hist_l1 > tol.histogram_l1 {
            problems.push(format!("histogram distance {hist_l1:e} above {}", tol.histogram_l1));
        }
        let violation = (!problems.is_empty()).then(|| format!("alpha = {alpha}: {}", problems.join("; ")));
        report.push(
            vec![
                alpha.into(),
                d.mass().into(),
                d.max_value().into(),
                min_value.into(),
                max_increase.into(),
                margin.into(),
                hist_l1.into(),
                d.integrate(|x| f.value(x)).into(),
            ],
            violation,
        );
    }
    Ok(report)
}
