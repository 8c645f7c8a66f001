use std::fmt::Write as _;

use crate::error::{QdsError, Result};
use crate::Real;

/// Slack below zero absorbed by [`GridDensity::new`] before it reports an error.
pub const NEGATIVE_SLACK: f64 = 1e-12;

/// Piecewise-constant function on the uniform partition of `[0, 1]` into
/// `N` cells `[i/N, (i+1)/N)`. Values are cell averages.
///
/// Densities built with [`GridDensity::new`] are nonnegative; signed grid
/// functions (differences, products with signed observables) come from
/// [`GridDensity::signed`].
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity<T> {
    values: Vec<T>,
    mass: T,
}

impl<T: Real> GridDensity<T> {
    /// Nonnegative density. Values in `[-1e-12, 0)` are clamped to zero.
    pub fn new(mut values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(QdsError::Argument("density needs at least one cell".into()));
        }
        let slack = T::lit(NEGATIVE_SLACK);
        for v in values.iter_mut() {
            if !v.is_finite() || *v < -slack {
                return Err(QdsError::Argument(format!("density value {v} is negative or not finite")));
            }
            if *v < T::zero() {
                *v = T::zero();
            }
        }
        Ok(Self::from_raw(values))
    }

    /// Signed grid function; only finiteness is checked.
    pub fn signed(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(QdsError::Argument("density needs at least one cell".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(QdsError::Argument("grid values must be finite".into()));
        }
        Ok(Self::from_raw(values))
    }

    pub(crate) fn from_raw(values: Vec<T>) -> Self {
        let mass = mean(&values);
        Self { values, mass }
    }

    pub fn uniform(n_cells: usize) -> Self {
        Self::from_raw(vec![T::one(); n_cells.max(1)])
    }

    pub fn zeros(n_cells: usize) -> Self {
        Self::from_raw(vec![T::zero(); n_cells.max(1)])
    }

    /// Samples `f` at cell midpoints.
    pub fn from_midpoints(n_cells: usize, f: impl Fn(T) -> T) -> Result<Self> {
        Self::signed((0..n_cells).map(|i| f(midpoint(i, n_cells))).collect())
    }

    /// Cell averages of `f` by 5-point Gauss–Legendre quadrature on each cell.
    pub fn from_cell_averages(n_cells: usize, f: impl Fn(T) -> T) -> Result<Self> {
        Self::signed((0..n_cells).map(|i| cell_average(i, n_cells, &f)).collect())
    }

    pub fn n_cells(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// `(1/N) Σ values`, i.e. the integral of the step function.
    pub fn mass(&self) -> T {
        self.mass
    }

    /// L¹ norm `(1/N) Σ |values|`.
    pub fn l1_norm(&self) -> T {
        mean_abs(&self.values)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|&v| v >= T::zero())
    }

    pub fn max_value(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &v| m.max(v))
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn cell_left(&self, i: usize) -> T {
        T::count(i) / T::count(self.n_cells())
    }

    pub fn midpoint(&self, i: usize) -> T {
        midpoint(i, self.n_cells())
    }

    /// Rescales to unit mass. Fails on zero mass.
    pub fn normalized(&self) -> Result<Self> {
        if !(self.mass.abs() > T::zero()) {
            return Err(QdsError::Argument("cannot normalize a grid function with zero mass".into()));
        }
        Ok(self.scaled(T::one() / self.mass))
    }

    pub fn scaled(&self, c: T) -> Self {
        Self::from_raw(self.values.iter().map(|&v| v * c).collect())
    }

    /// Pointwise product with `f` evaluated at cell midpoints.
    pub fn multiplied_by(&self, f: impl Fn(T) -> T) -> Self {
        let n = self.n_cells();
        Self::from_raw(
            self.values
                .iter()
                .enumerate()
                .map(|(i, &v)| f(midpoint(i, n)) * v)
                .collect(),
        )
    }

    pub fn plus_constant(&self, c: T) -> Self {
        Self::from_raw(self.values.iter().map(|&v| v + c).collect())
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self::from_raw(
            self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect(),
        ))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self::from_raw(
            self.values.iter().zip(&other.values).map(|(&a, &b)| a + b).collect(),
        ))
    }

    /// `(1/N) Σ f(midpoint_i) values_i`, the pairing `∫ f d` on the grid.
    pub fn integrate(&self, f: impl Fn(T) -> T) -> T {
        let n = self.n_cells();
        let sum: T = self
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(midpoint(i, n)) * v)
            .sum();
        sum / T::count(n)
    }

    pub(crate) fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.n_cells() != other.n_cells() {
            return Err(QdsError::DimensionMismatch {
                expected: self.n_cells(),
                got: other.n_cells(),
            });
        }
        Ok(())
    }

    /// Debug dump: a `# n_cells=N alpha=α` header then one value per line.
    pub fn to_csv(&self, alpha: Option<T>) -> String {
        let mut out = format!("# n_cells={}", self.n_cells());
        if let Some(a) = alpha {
            let _ = write!(out, " alpha={}", a.as_f64());
        }
        out.push('\n');
        for v in &self.values {
            let _ = writeln!(out, "{:.16e}", v.as_f64());
        }
        out
    }
}

/// `(1/N) Σ_i |d1_i − d2_i|`.
pub fn l1_distance<T: Real>(d1: &GridDensity<T>, d2: &GridDensity<T>) -> Result<T> {
    d1.check_same_grid(d2)?;
    let sum: T = d1
        .values
        .iter()
        .zip(&d2.values)
        .map(|(&a, &b)| (a - b).abs())
        .sum();
    Ok(sum / T::count(d1.n_cells()))
}

pub(crate) fn midpoint<T: Real>(i: usize, n: usize) -> T {
    (T::count(i) + T::lit(0.5)) / T::count(n)
}

fn mean<T: Real>(values: &[T]) -> T {
    values.iter().copied().sum::<T>() / T::count(values.len())
}

fn mean_abs<T: Real>(values: &[T]) -> T {
    values.iter().map(|v| v.abs()).sum::<T>() / T::count(values.len())
}

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Average of `f` over cell `i` of an `n`-cell grid.
pub(crate) fn cell_average<T: Real>(i: usize, n: usize, f: impl Fn(T) -> T) -> T {
    let half = T::lit(0.5);
    let centre = midpoint::<T>(i, n);
    let radius = half / T::count(n);
    GAUSS_NODES
        .iter()
        .zip(GAUSS_WEIGHTS)
        .map(|(&node, w)| T::lit(w) * f(centre + radius * T::lit(node)))
        .sum::<T>()
        * half
}
