use std::collections::BTreeMap;

use qds_core::transfer_op::{compose_apply, l1_distance, GridDensity};

use super::cache_for;
use crate::config::{Experiment, Setup};
use crate::report::Report;

/// Tracking of the instantaneous SRB density: `‖h_{n,k} − ĥ_{α_{n,k}}‖₁`
/// with `h_{n,k}` the uniform density pushed through the first `k = ⌈nt⌉`
/// maps of row `n`.
pub fn run_adiabatic(setup: &Setup) -> anyhow::Result<Report> {
    let cfg = &setup.config;
    let n_cells = cfg.grid;
    let f = &setup.observable;
    // operators are rebuilt along each row; only SRB densities are kept
    let cache = cache_for(setup, 0);
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let mut t_points = cfg.adiabatic.t_points.clone();
    t_points.sort_by(|a, b| a.partial_cmp(b).expect("validated t"));

    let mut report = Report::new(
        Experiment::Adiabatic,
        &["n", "k", "l1_to_instant_srb", "t", "alpha", "mean_gap", "status"],
    );
    // per t: last (n, l1, mean_gap)
    let mut previous: BTreeMap<usize, (usize, f64, f64)> = BTreeMap::new();
    for &n in &levels {
        let row = setup.curve.build_row(n)?;
        let mut h = GridDensity::uniform(n_cells);
        let mut at = 0;
        for (ti, &t) in t_points.iter().enumerate() {
            let k = ((n as f64 * t).ceil() as usize).clamp(1, n);
            h = compose_apply(&row[at + 1..=k], n_cells, &h, &cache)?;
            at = k;
            let alpha = row[k];
            let srb = cache.srb(alpha, n_cells)?;
            let l1 = l1_distance(&h, &srb)?;
            let mean_gap = (h.integrate(|x| f.value(x)) - srb.integrate(|x| f.value(x))).abs();

            let mut problems = Vec::new();
            if let Some(&(pn, pl1, pgap)) = previous.get(&ti) {
                if !(l1 < pl1) {
                    problems.push(format!("L¹ distance {l1:e} did not decrease from {pl1:e} at n = {pn}"));
                }
                if !(mean_gap < pgap) {
                    problems.push(format!("mean gap {mean_gap:e} did not decrease from {pgap:e} at n = {pn}"));
                }
            }
            previous.insert(ti, (n, l1, mean_gap));
            let violation = (!problems.is_empty()).then(|| format!("n = {n}, t = {t}: {}", problems.join("; ")));
            report.push(
                vec![n.into(), k.into(), l1.into(), t.into(), alpha.into(), mean_gap.into()],
                violation,
            );
        }
    }
    Ok(report)
}
