use anyhow::Context;
use qds_core::ergodic::rho;
use qds_core::pm_map::PmMap;
use qds_core::transfer_op::{
    build_partition_ulam, compose_apply, GridDensity, OperatorCache, Partition, PartitionOperator,
};

use super::{cache_for, fit_constant, log_log_slope};
use crate::config::{DensityChoice, Experiment, PartitionConfig, Setup};
use crate::report::Report;

/// Memory loss `‖L̃_n(f − g)‖₁` along each row, against `ρ(n)`.
///
/// `f − g` is pushed as cell masses, so on graded partitions the tail near
/// the neutral point is resolved far below `1/N`.
pub fn run_decay(setup: &Setup) -> anyhow::Result<Report> {
    let cfg = &setup.config;
    let beta = cfg.beta_star;
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();

    let distances: Vec<f64> = match cfg.decay.partition {
        PartitionConfig::Uniform => {
            let cache = cache_for(setup, 256);
            let diff = density(cfg.decay.first, beta, cfg.grid)?.checked_sub(&density(cfg.decay.second, beta, cfg.grid)?)?;
            levels
                .iter()
                .map(|&n| {
                    let row = setup.curve.build_row(n)?;
                    Ok(compose_apply(&row[1..], cfg.grid, &diff, &cache)?.l1_norm())
                })
                .collect::<anyhow::Result<_>>()?
        }
        PartitionConfig::Graded {
            geometric_cells,
            smallest,
            junction,
        } => {
            let partition = Partition::graded(cfg.grid, geometric_cells.unwrap_or(cfg.grid / 4), smallest, junction)
                .context("building the graded partition")?;
            let f = masses(cfg.decay.first, beta, &partition);
            let g = masses(cfg.decay.second, beta, &partition);
            let diff: Vec<f64> = f.iter().zip(&g).map(|(a, b)| a - b).collect();
            let mut ops = GradedOps::new(partition);
            levels
                .iter()
                .map(|&n| {
                    let row = setup.curve.build_row(n)?;
                    Ok(ops.push(&row[1..], &diff)?.iter().map(|m| m.abs()).sum())
                })
                .collect::<anyhow::Result<_>>()?
        }
    };

    let mut report = Report::new(Experiment::Decay, &["n", "l1_distance", "rho_n", "fitted_C", "status"]);
    let fitted = fit_constant(distances[0], rho(levels[0], beta));
    for (&n, &d) in levels.iter().zip(&distances) {
        let r = rho(n, beta);
        let violation = (d > fitted * r).then(|| format!("n = {n}: distance {d:e} exceeds {fitted:e}·ρ(n) = {:e}", fitted * r));
        report.push(vec![n.into(), d.into(), r.into(), fitted.into()], violation);
    }
    report.note("fitted_C", fitted);
    if let Some(slope) = log_log_slope(&levels.iter().map(|&n| n as f64).collect::<Vec<_>>(), &distances) {
        report.note("log_log_slope", slope);
    }
    Ok(report)
}

fn density(choice: DensityChoice, beta: f64, n: usize) -> anyhow::Result<GridDensity<f64>> {
    Ok(match choice {
        DensityChoice::Uniform => GridDensity::uniform(n),
        // exact cell averages of (1 − β)x^{-β}
        DensityChoice::Profile => {
            let nf = n as f64;
            let p = |x: f64| x.powf(1.0 - beta);
            GridDensity::new((0..n).map(|i| (p((i + 1) as f64 / nf) - p(i as f64 / nf)) * nf).collect())?
        }
    })
}

fn masses(choice: DensityChoice, beta: f64, partition: &Partition<f64>) -> Vec<f64> {
    match choice {
        DensityChoice::Uniform => partition.masses_from_primitive(|x| x),
        DensityChoice::Profile => partition.masses_from_primitive(|x| x.powf(1.0 - beta)),
    }
}

/// Graded-partition operators keyed by the cache quantization of `α`,
/// rebuilt whenever the row moves to a new key.
struct GradedOps {
    partition: Partition<f64>,
    current: Option<(i64, PartitionOperator<f64>)>,
}

impl GradedOps {
    fn new(partition: Partition<f64>) -> Self {
        Self { partition, current: None }
    }

    fn push(&mut self, alphas: &[f64], masses: &[f64]) -> anyhow::Result<Vec<f64>> {
        let mut cur = masses.to_vec();
        let mut next = vec![0.0; cur.len()];
        for &alpha in alphas {
            let key = OperatorCache::<f64>::quantize(alpha);
            if self.current.as_ref().is_none_or(|(k, _)| *k != key) {
                let map = PmMap::new(OperatorCache::<f64>::quantized_alpha(alpha))?;
                self.current = Some((key, build_partition_ulam(&map, &self.partition)?));
            }
            let (_, op) = self.current.as_ref().expect("operator just built");
            op.push_masses(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        Ok(cur)
    }
}
