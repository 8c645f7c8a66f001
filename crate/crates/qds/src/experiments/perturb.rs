use qds_core::pm_map::PmMap;
use qds_core::transfer_op::{build_ulam, l1_distance, srb_from_operator, GridDensity};
use rayon::prelude::*;

use super::fit_constant;
use crate::config::{Experiment, Setup};
use crate::report::Report;

/// `(β−α)^{(1−β_*)/3} |log(β−α)|`, the operator-difference shape.
pub fn operator_shape(gap: f64, beta_star: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    gap.powf((1.0 - beta_star) / 3.0) * gap.ln().abs()
}

/// `(β−α)^{(1−β_*)²/3} |log(β−α)|^{1/β_*}`, the SRB-difference shape.
pub fn srb_shape(gap: f64, beta_star: f64) -> f64 {
    if gap <= 0.0 {
        return 0.0;
    }
    gap.powf((1.0 - beta_star).powi(2) / 3.0) * gap.ln().abs().powf(1.0 / beta_star)
}

/// Continuity of `L_α` and `ĥ_α` in `α` over a ladder of gaps `β − α`.
///
/// Operators are built at the exact parameters: the cache quantization
/// would be comparable to the smallest gaps.
pub fn run_perturb(setup: &Setup) -> anyhow::Result<Report> {
    let cfg = &setup.config;
    let (alpha, beta_star, n) = (cfg.perturb.alpha, cfg.beta_star, cfg.grid);
    let tol = &cfg.tolerances;
    let f = &setup.observable;

    let mut gaps = cfg.perturb.gaps.clone();
    gaps.sort_by(|a, b| b.partial_cmp(a).expect("validated gaps"));

    let base_op = build_ulam(&PmMap::new(alpha)?, n)?;
    let base_srb = srb_from_operator(&base_op, tol.srb_tol, tol.srb_max_iter)?;
    let uniform = GridDensity::uniform(n);
    let base_push = base_op.apply(&uniform)?;
    let base_mean = base_srb.integrate(|x| f.value(x));

    let measured: Vec<(f64, f64, f64)> = gaps
        .par_iter()
        .map(|&gap| {
            if gap == 0.0 {
                return Ok((0.0, 0.0, 0.0));
            }
            let op = build_ulam(&PmMap::new(alpha + gap)?, n)?;
            let srb = srb_from_operator(&op, tol.srb_tol, tol.srb_max_iter)?;
            let op_dist = l1_distance(&base_push, &op.apply(&uniform)?)?;
            let srb_dist = l1_distance(&base_srb, &srb)?;
            let mean_gap = (base_mean - srb.integrate(|x| f.value(x))).abs();
            Ok((op_dist, srb_dist, mean_gap))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut report = Report::new(
        Experiment::Perturb,
        &[
            "alpha",
            "beta",
            "op_dist",
            "srb_dist",
            "bound_shape",
            "op_bound_shape",
            "mean_gap",
            "status",
        ],
    );
    let c_op = fit_constant(measured[0].0, operator_shape(gaps[0], beta_star));
    let c_srb = fit_constant(measured[0].1, srb_shape(gaps[0], beta_star));
    report.note("fitted_C2_operator", c_op);
    report.note("fitted_C2_srb", c_srb);
    for (i, (&gap, &(op_dist, srb_dist, mean_gap))) in gaps.iter().zip(&measured).enumerate() {
        let (s_op, s_srb) = (operator_shape(gap, beta_star), srb_shape(gap, beta_star));
        let mut problems = Vec::new();
        if op_dist > c_op * s_op {
            problems.push(format!("operator distance {op_dist:e} exceeds fitted shape {:e}", c_op * s_op));
        }
        if srb_dist > c_srb * s_srb {
            problems.push(format!("SRB distance {srb_dist:e} exceeds fitted shape {:e}", c_srb * s_srb));
        }
        if i > 0 && gap < gaps[i - 1] {
            let (prev_op, prev_srb, _) = measured[i - 1];
            if !(op_dist < prev_op) {
                problems.push(format!("operator distance did not decrease ({op_dist:e} after {prev_op:e})"));
            }
            if !(srb_dist < prev_srb) {
                problems.push(format!("SRB distance did not decrease ({srb_dist:e} after {prev_srb:e})"));
            }
        }
        let violation = (!problems.is_empty()).then(|| format!("gap {gap:e}: {}", problems.join("; ")));
        report.push(
            vec![
                alpha.into(),
                (alpha + gap).into(),
                op_dist.into(),
                srb_dist.into(),
                s_srb.into(),
                s_op.into(),
                mean_gap.into(),
            ],
            violation,
        );
    }
    Ok(report)
}
