use anyhow::bail;
use qds_core::ergodic::{correlation_functional, correlation_via_operators, phi, rho};
use qds_core::observable::ObservableSpec;
use qds_core::pm_map::MapSequence;
use qds_core::transfer_op::GridDensity;

use super::{cache_for, fit_constant};
use crate::config::{Experiment, Setup};
use crate::report::Report;

/// Indices `k_1 < … < k_ℓ` for one gap: steps of `spacing`, except `gap`
/// between `k_split` and `k_{split+1}`.
pub fn correlation_indices(start: usize, spacing: usize, split: usize, order: usize, gap: usize) -> Vec<usize> {
    let mut ks = vec![start];
    for i in 1..order {
        let step = if i == split { gap } else { spacing };
        ks.push(ks[i - 1] + step);
    }
    ks
}

/// Multi-correlations across the split, by Ulam operators and by Monte
/// Carlo, against `ρ(gap)`.
pub fn run_correlation(setup: &Setup) -> anyhow::Result<Report> {
    let cfg = &setup.config;
    let c = &cfg.correlation;
    let order = cfg.correlation_order();
    let fs: Vec<ObservableSpec> = if c.observables.is_empty() {
        vec![setup.observable.clone()]
    } else {
        c.observables.iter().cloned().map(ObservableSpec::new).collect::<Result<_, _>>()?
    };
    let mut gaps = c.gaps.clone();
    gaps.sort_unstable();
    gaps.dedup();
    let index_sets: Vec<Vec<usize>> = gaps
        .iter()
        .map(|&g| correlation_indices(c.start, c.spacing, c.split, order, g))
        .collect();
    let needed = index_sets.iter().map(|ks| ks[order - 1]).max().unwrap_or(0).max(1);
    let n = cfg.levels.first().copied().unwrap_or(needed);
    if n < needed {
        bail!("row level {n} is shorter than the largest correlation index {needed}");
    }
    let row = setup.curve.build_row(n)?;
    let seq = MapSequence::new(row[1..].to_vec(), cfg.beta_star)?;
    let cache = cache_for(setup, 4096);
    let h = GridDensity::uniform(cfg.grid);

    let mut report = Report::new(
        Experiment::Correlation,
        &[
            "m",
            "gap",
            "measured",
            "bound_shape",
            "operator_value",
            "mc_value",
            "mc_std_error",
            "phi_gap",
            "fitted_C",
            "status",
        ],
    );
    let mut fitted = None;
    for (&gap, ks) in gaps.iter().zip(&index_sets) {
        let op = correlation_via_operators(&seq, &fs, ks, c.split, &h, &cache)?;
        let mc = correlation_functional(&seq, &fs, ks, c.split, cfg.samples, cfg.seed)?;
        let measured = op.abs();
        let shape = rho(gap, cfg.beta_star);
        let c_hat = *fitted.get_or_insert_with(|| fit_constant(measured, shape));

        let mut problems = Vec::new();
        let window = cfg.tolerances.agreement_se * mc.std_error + 1e-12;
        if (op - mc.value).abs() > window {
            problems.push(format!(
                "operator route {op:e} and Monte Carlo {:e} differ by more than {window:e}",
                mc.value
            ));
        }
        if measured > c_hat * shape {
            problems.push(format!("|correlation| {measured:e} exceeds fitted {:e}", c_hat * shape));
        }
        let violation = (!problems.is_empty()).then(|| format!("gap {gap}: {}", problems.join("; ")));
        report.push(
            vec![
                c.split.into(),
                gap.into(),
                measured.into(),
                shape.into(),
                op.into(),
                mc.value.into(),
                mc.std_error.into(),
                phi::<f64>(gap).into(),
                c_hat.into(),
            ],
            violation,
        );
    }
    report.note("fitted_C", fitted.unwrap_or(0.0));
    report.note("row_level", n as f64);
    Ok(report)
}
