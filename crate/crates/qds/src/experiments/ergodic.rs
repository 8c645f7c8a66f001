use qds_core::ergodic::{default_t_grid, ensemble_sup_deviation, eventually_monotone_fraction, limit_zeta, ErgodicSettings};

use super::cache_for;
use crate::config::{Experiment, Setup};
use crate::report::Report;

/// Deviation of `ζ_n` from `ζ` over an ensemble of uniform initial points,
/// per level `n`.
pub fn run_ergodic(setup: &Setup) -> anyhow::Result<Report> {
    let cfg = &setup.config;
    let f = &setup.observable;
    let cache = cache_for(setup, 4096);
    let settings = ErgodicSettings {
        n_cells: cfg.grid,
        n_quad: cfg.ergodic.n_quad,
    };
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let mut eps = cfg.ergodic.eps.clone();
    eps.sort_by(|a, b| a.partial_cmp(b).expect("validated eps"));

    let mut header = vec!["n".to_owned(), "median_sup_dev".to_owned()];
    header.extend(eps.iter().map(|e| format!("p_exceed_{e}")));
    header.extend(["q90_sup_dev", "max_sup_dev", "grid_slack", "status"].map(String::from));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut report = Report::new(Experiment::Ergodic, &header_refs);

    let mut per_level = Vec::with_capacity(levels.len());
    let mut previous: Option<(usize, Vec<f64>)> = None;
    for &n in &levels {
        let t_grid: Vec<f64> = match cfg.ergodic.t_points {
            Some(m) => (0..m).map(|i| i as f64 / (m - 1) as f64).collect(),
            None => default_t_grid(n),
        };
        let limit = limit_zeta(&setup.curve, f, &settings, &t_grid, &cache)?;
        let result = ensemble_sup_deviation(&setup.curve, f, n, cfg.samples, cfg.seed, &t_grid, &limit, &eps)?;
        let probs: Vec<f64> = result.prob_exceed.iter().map(|&(_, p)| p).collect();

        let mut problems = Vec::new();
        if let Some((pn, prev)) = &previous {
            for ((e, p), q) in eps.iter().zip(&probs).zip(prev) {
                if p > q {
                    problems.push(format!("p_exceed({e}) rose from {q} at n = {pn} to {p}"));
                }
            }
        }
        let mut row = vec![n.into(), result.quantiles.median.into()];
        row.extend(probs.iter().map(|&p| p.into()));
        row.extend([result.quantiles.q90.into(), result.quantiles.max.into(), result.grid_slack.into()]);
        let violation = (!problems.is_empty()).then(|| format!("n = {n}: {}", problems.join("; ")));
        report.push(row, violation);
        previous = Some((n, probs));
        per_level.push(result.sup_devs);
    }
    if levels.len() >= 2 {
        // almost-sure surrogate, reported only
        report.note("eventually_monotone_fraction", eventually_monotone_fraction(&per_level)?);
    }
    Ok(report)
}
