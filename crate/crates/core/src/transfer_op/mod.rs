//! Transfer operators of Pomeau–Manneville maps: the pointwise formula, its
//! Ulam discretization, SRB densities by power iteration and compositions
//! along map sequences.

mod cache;
mod density;
mod partition;
mod ulam;

pub use cache::{OperatorCache, ALPHA_QUANTUM};
pub use density::{l1_distance, GridDensity, NEGATIVE_SLACK};
pub use partition::{build_partition_ulam, Partition, PartitionOperator};
pub use ulam::{build_ulam, exact_transfer, exact_transfer_cell_averages, UlamOperator};

use crate::error::{QdsError, Result};
use crate::pm_map::PmMap;
use crate::Real;

/// Grid size used by experiments unless configured otherwise.
pub const DEFAULT_N_CELLS: usize = 2048;
/// L¹ residual at which power iteration stops.
pub const DEFAULT_SRB_TOL: f64 = 1e-12;
pub const DEFAULT_SRB_MAX_ITER: usize = 2_000_000;

/// SRB density of `map` on `n_cells` cells: power iteration of the Ulam
/// matrix from the uniform density until `‖P d − d‖₁ ≤ tol`.
pub fn srb_density<T: Real>(
    map: &PmMap<T>,
    n_cells: usize,
    tol: T,
    max_iter: usize,
) -> Result<GridDensity<T>> {
    let op = build_ulam(map, n_cells)?;
    srb_from_operator(&op, tol, max_iter)
}

/// Power iteration on an already built operator.
pub fn srb_from_operator<T: Real>(
    op: &UlamOperator<T>,
    tol: T,
    max_iter: usize,
) -> Result<GridDensity<T>> {
    if !(tol > T::zero()) {
        return Err(QdsError::Argument(format!("SRB tolerance must be positive, got {tol}")));
    }
    let n = op.n_cells();
    let nf = T::count(n);
    let mut cur = vec![T::one(); n];
    let mut next = vec![T::zero(); n];
    let mut residual = T::infinity();
    for _ in 0..max_iter {
        op.apply_into(&cur, &mut next);
        residual = cur
            .iter()
            .zip(&next)
            .map(|(&a, &b)| (a - b).abs())
            .sum::<T>()
            / nf;
        std::mem::swap(&mut cur, &mut next);
        if residual <= tol {
            let d = GridDensity::new(cur)?;
            return d.normalized();
        }
    }
    Err(QdsError::NonConvergence {
        what: "SRB power iteration",
        iterations: max_iter,
        residual: residual.as_f64(),
    })
}

/// Applies the operators of `alphas` in order, `L_{α_n} ⋯ L_{α_1} d`, using
/// cached operators.
pub fn compose_apply<T: Real>(
    alphas: &[T],
    n_cells: usize,
    d: &GridDensity<T>,
    cache: &OperatorCache<T>,
) -> Result<GridDensity<T>> {
    if d.n_cells() != n_cells {
        return Err(QdsError::DimensionMismatch {
            expected: n_cells,
            got: d.n_cells(),
        });
    }
    let mut cur = d.values().to_vec();
    let mut next = vec![T::zero(); n_cells];
    let mut last: Option<(i64, std::sync::Arc<UlamOperator<T>>)> = None;
    for &alpha in alphas {
        let key = OperatorCache::<T>::quantize(alpha);
        let op = match &last {
            Some((k, op)) if *k == key => std::sync::Arc::clone(op),
            _ => {
                let op = cache.operator(alpha, n_cells)?;
                last = Some((key, std::sync::Arc::clone(&op)));
                op
            }
        };
        op.apply_into(&cur, &mut next);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(GridDensity::from_raw(cur))
}
