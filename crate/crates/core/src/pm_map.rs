//! Pomeau–Manneville maps `T_α(x) = x(1 + 2^α x^α)` on `[0, 1/2)` and
//! `2x − 1` on `[1/2, 1]`.
//!
//! The left branch fixes the origin with derivative exactly one, which makes
//! the map intermittent: orbits linger near zero for a time that grows with
//! `α`. Everything here is a pure function of its inputs.

use crate::error::{check_unit, QdsError, Result};
use crate::Real;

/// Bisection steps used by [`PmMap::left_preimage`].
pub const PREIMAGE_MAX_ITER: usize = 64;

/// Default residual tolerance for left-branch preimages.
pub const DEFAULT_PREIMAGE_TOL: f64 = 1e-13;

/// A single Pomeau–Manneville map with intermittency parameter `alpha ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PmMap<T> {
    alpha: T,
}

impl<T: Real> PmMap<T> {
    pub fn new(alpha: T) -> Result<Self> {
        check_unit("alpha", alpha)?;
        Ok(Self { alpha })
    }

    /// For parameters already validated upstream (curve rows, sequences).
    pub(crate) fn new_unchecked(alpha: T) -> Self {
        Self { alpha }
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Left branch `y(1 + 2^α y^α)` without domain checks or clamping.
    #[inline]
    pub fn left_branch(&self, y: T) -> T {
        let two = T::lit(2.0);
        y * (T::one() + two.powf(self.alpha) * y.powf(self.alpha))
    }

    /// Derivative of the left branch, `1 + 2^α (1 + α) y^α`, valid on `[0, 1/2]`
    /// (one-sided at `1/2`).
    #[inline]
    pub fn left_branch_derivative(&self, y: T) -> T {
        let two = T::lit(2.0);
        T::one() + two.powf(self.alpha) * (T::one() + self.alpha) * y.powf(self.alpha)
    }

    /// Evaluates the map. `x = 1/2` belongs to the right branch.
    pub fn evaluate(&self, x: T) -> Result<T> {
        check_unit("x", x)?;
        Ok(self.apply(x))
    }

    /// Unchecked evaluation for orbit loops; `x` must already lie in `[0, 1]`.
    #[inline]
    pub fn apply(&self, x: T) -> T {
        let half = T::lit(0.5);
        let y = if x < half {
            self.left_branch(x)
        } else {
            x + x - T::one()
        };
        y.max(T::zero()).min(T::one())
    }

    /// Derivative of the map; at `x = 1/2` the right-branch value 2 is returned.
    pub fn derivative(&self, x: T) -> Result<T> {
        check_unit("x", x)?;
        if x < T::lit(0.5) {
            Ok(self.left_branch_derivative(x))
        } else {
            Ok(T::lit(2.0))
        }
    }

    /// Preimage of `x` under the left branch, found by bisection on `[0, 1/2]`.
    ///
    /// The full bisection schedule always runs, so the result is a
    /// nondecreasing function of `x`. Fails only if the final residual
    /// `|T(y) − x|` exceeds `tol`.
    pub fn left_preimage(&self, x: T, tol: T) -> Result<T> {
        check_unit("x", x)?;
        if !(tol > T::zero()) {
            return Err(QdsError::Argument(format!("tolerance must be positive, got {tol}")));
        }
        let y = self.left_preimage_unchecked(x);
        let residual = (self.left_branch(y) - x).abs();
        if residual <= tol {
            Ok(y)
        } else {
            Err(QdsError::NonConvergence {
                what: "left-branch preimage",
                iterations: PREIMAGE_MAX_ITER,
                residual: residual.as_f64(),
            })
        }
    }

    pub(crate) fn left_preimage_unchecked(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        if self.alpha == T::zero() {
            return x * T::lit(0.5);
        }
        let mut lo = T::zero();
        let mut hi = T::lit(0.5);
        for _ in 0..PREIMAGE_MAX_ITER {
            let mid = lo + (hi - lo) * T::lit(0.5);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.left_branch(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo + (hi - lo) * T::lit(0.5)
    }

    /// Left-branch preimage with relative rather than absolute precision,
    /// for points very close to the neutral fixed point.
    ///
    /// Bisects the bracket `[x/(1 + 2^α x^α), min(x, 1/2)]`, whose width is
    /// of order `x^{1+α}`, so tiny `x` keep full relative accuracy.
    pub fn left_preimage_relative(&self, x: T) -> Result<T> {
        check_unit("x", x)?;
        if x <= T::zero() {
            return Ok(T::zero());
        }
        let half = T::lit(0.5);
        if self.alpha == T::zero() {
            return Ok(x * half);
        }
        let two = T::lit(2.0);
        let mut hi = x.min(half);
        let mut lo = (x / (T::one() + two.powf(self.alpha) * x.powf(self.alpha))).min(hi);
        for _ in 0..PREIMAGE_MAX_ITER {
            let mid = lo + (hi - lo) * half;
            if mid <= lo || mid >= hi {
                break;
            }
            if self.left_branch(mid) < x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo + (hi - lo) * half)
    }

    /// Preimage of `x` under the affine right branch, `(x + 1)/2`.
    #[inline]
    pub fn right_preimage(&self, x: T) -> T {
        (x + T::one()) * T::lit(0.5)
    }
}

/// An admissible sequence of maps: every parameter is at most `beta_star`.
#[derive(Debug, Clone, PartialEq)]
pub struct MapSequence<T> {
    alphas: Vec<T>,
    beta_star: T,
}

impl<T: Real> MapSequence<T> {
    pub fn new(alphas: Vec<T>, beta_star: T) -> Result<Self> {
        if !(beta_star > T::zero() && beta_star < T::one()) {
            return Err(QdsError::Domain {
                what: "beta_star",
                value: beta_star.as_f64(),
                domain: "(0, 1)",
            });
        }
        for &alpha in &alphas {
            check_unit("alpha", alpha)?;
            if alpha > beta_star {
                return Err(QdsError::Inadmissible {
                    alpha: alpha.as_f64(),
                    beta_star: beta_star.as_f64(),
                });
            }
        }
        Ok(Self { alphas, beta_star })
    }

    pub fn alphas(&self) -> &[T] {
        &self.alphas
    }

    pub fn beta_star(&self) -> T {
        self.beta_star
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Trajectory `x_0 = x, x_j = T_{α_j}(x_{j−1})` for `j = 1..=k`.
    pub fn iterate(&self, x: T, k: usize) -> Result<Vec<T>> {
        check_unit("x", x)?;
        if k > self.alphas.len() {
            return Err(QdsError::Index {
                index: k,
                len: self.alphas.len(),
            });
        }
        let mut out = Vec::with_capacity(k + 1);
        out.push(x);
        let mut state = x;
        for &alpha in &self.alphas[..k] {
            state = PmMap { alpha }.apply(state);
            out.push(state);
        }
        Ok(out)
    }
}
