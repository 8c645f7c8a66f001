use std::fmt::Write as _;

use super::density::{cell_average, GridDensity};
use super::partition::transition_rows;
use crate::error::{QdsError, Result};
use crate::pm_map::{PmMap, DEFAULT_PREIMAGE_TOL};
use crate::Real;

/// Row-stochastic Ulam matrix `P[i][j] = m(I_i ∩ T⁻¹I_j) / m(I_i)` stored by rows.
///
/// Each row has only a handful of nonzeros (the image of a cell spans at most
/// `⌈sup T′⌉ + 1` cells), so the matrix is kept in compressed row form.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamOperator<T> {
    n_cells: usize,
    alpha: T,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<T>,
}

impl<T: Real> UlamOperator<T> {
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Nonzero entries `(j, P[i][j])` of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.weights[span])
            .map(|(&j, &w)| (j as usize, w))
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        self.row(i)
            .find(|&(c, _)| c == j)
            .map_or(T::zero(), |(_, w)| w)
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n_cells)
            .map(|i| {
                let mut row = vec![T::zero(); self.n_cells];
                for (j, w) in self.row(i) {
                    row[j] = w;
                }
                row
            })
            .collect()
    }

    /// Pushforward `out_j = Σ_i P[i][j] d_i`.
    pub fn apply(&self, d: &GridDensity<T>) -> Result<GridDensity<T>> {
        if d.n_cells() != self.n_cells {
            return Err(QdsError::DimensionMismatch {
                expected: self.n_cells,
                got: d.n_cells(),
            });
        }
        let mut out = vec![T::zero(); self.n_cells];
        self.apply_into(d.values(), &mut out);
        Ok(GridDensity::from_raw(out))
    }

    /// Slice form of [`apply`](Self::apply); `dst` is overwritten.
    pub fn apply_into(&self, src: &[T], dst: &mut [T]) {
        debug_assert_eq!(src.len(), self.n_cells);
        debug_assert_eq!(dst.len(), self.n_cells);
        dst.iter_mut().for_each(|v| *v = T::zero());
        for (i, &v) in src.iter().enumerate() {
            if v == T::zero() {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                dst[j] = dst[j] + self.weights[k] * v;
            }
        }
    }

    /// Debug dump as `i,j,weight` triplets under a `# n_cells=N alpha=α` header.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# n_cells={} alpha={}\n", self.n_cells, self.alpha.as_f64());
        for i in 0..self.n_cells {
            for (j, w) in self.row(i) {
                let _ = writeln!(out, "{i},{j},{:.16e}", w.as_f64());
            }
        }
        out
    }
}

fn preimage_tol<T: Real>() -> T {
    T::lit(DEFAULT_PREIMAGE_TOL).max(T::epsilon() * T::lit(16.0))
}

/// Builds the Ulam matrix of `map` on `n_cells` uniform cells.
///
/// Preimages of the grid points under both branches cut `[0, 1]` into `2N`
/// intervals, each mapped monotonically onto one cell; intersecting them
/// with the cells gives the transition masses exactly up to the preimage
/// tolerance.
pub fn build_ulam<T: Real>(map: &PmMap<T>, n_cells: usize) -> Result<UlamOperator<T>> {
    if n_cells < 2 {
        return Err(QdsError::Argument(format!("Ulam grid needs N >= 2, got {n_cells}")));
    }
    let n = n_cells;
    let nf = T::count(n);
    let tol = preimage_tol::<T>();
    let edges: Vec<T> = (0..=n).map(|j| T::count(j) / nf).collect();
    let mut left = Vec::with_capacity(n + 1);
    left.push(T::zero());
    for &e in &edges[1..n] {
        left.push(map.left_preimage(e, tol)?);
    }
    left.push(T::lit(0.5));
    let (row_ptr, cols, weights) = transition_rows(map, &edges, &left)?;
    Ok(UlamOperator {
        n_cells: n,
        alpha: map.alpha(),
        row_ptr,
        cols,
        weights,
    })
}

/// Pointwise transfer operator
/// `L_α f(x) = f(y_α)/T′_α(y_α) + f(x/2 + 1/2)/2`, with `y_α` the left-branch
/// preimage of `x`.
pub fn exact_transfer<T: Real>(map: &PmMap<T>, f: impl Fn(T) -> T, x: T) -> Result<T> {
    let y = map.left_preimage(x, preimage_tol())?;
    let half = T::lit(0.5);
    Ok(f(y) / map.left_branch_derivative(y) + f(x * half + half) * half)
}

/// Cell averages of `L_α f` on an `n_cells` grid, each by 5-point
/// Gauss–Legendre quadrature of [`exact_transfer`].
pub fn exact_transfer_cell_averages<T: Real>(
    map: &PmMap<T>,
    f: impl Fn(T) -> T,
    n_cells: usize,
) -> Result<GridDensity<T>> {
    let failure = std::cell::RefCell::new(None);
    let values: Vec<T> = (0..n_cells)
        .map(|i| {
            cell_average(i, n_cells, |x| match exact_transfer(map, &f, x) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    T::zero()
                }
            })
        })
        .collect();
    match failure.into_inner() {
        Some(e) => Err(e),
        None => GridDensity::signed(values),
    }
}
