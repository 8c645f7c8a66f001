//! The invariant cone `C_*(β)` of decreasing densities with `x^{β+1} f`
//! increasing and `f ≤ a(β) x^{-β} m(f)`, grid-level membership checks, and
//! the splitting of `f·h` (with `f ∈ C¹`) into a difference of cone elements.

use crate::error::{QdsError, Result};
use crate::observable::ObservableSpec;
use crate::transfer_op::{compose_apply, GridDensity, OperatorCache};
use crate::Real;
use rand::Rng;

/// Largest number of observables [`recursive_decompose`] accepts; the piece
/// count doubles with each one.
pub const MAX_DECOMPOSITION_DEPTH: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeParams<T> {
    beta: T,
    a: T,
}

impl<T: Real> ConeParams<T> {
    pub fn new(beta: T) -> Result<Self> {
        if !(beta >= T::zero() && beta < T::one()) {
            return Err(QdsError::Domain {
                what: "cone exponent",
                value: beta.as_f64(),
                domain: "[0, 1)",
            });
        }
        let two = T::lit(2.0);
        Ok(Self {
            beta,
            a: two.powf(beta) * (beta + two),
        })
    }

    pub fn beta(&self) -> T {
        self.beta
    }

    /// `a(β) = 2^β (β + 2)`.
    pub fn a(&self) -> T {
        self.a
    }

    /// `max(a/(β+1), 4a/(a−1))`, the factor shared by `δ` and `C₁`.
    fn spread(&self) -> T {
        let one = T::one();
        (self.a / (self.beta + one)).max(T::lit(4.0) * self.a / (self.a - one))
    }
}

/// Smallest slack of each cone condition over the checked cells. Negative
/// values are violations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeMargins<T> {
    pub nonnegative: T,
    pub decreasing: T,
    pub weighted_increasing: T,
    pub upper_bound: T,
}

impl<T: Real> ConeMargins<T> {
    pub fn min(&self) -> T {
        self.nonnegative
            .min(self.decreasing)
            .min(self.weighted_increasing)
            .min(self.upper_bound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeReport<T> {
    pub passes: bool,
    pub margins: ConeMargins<T>,
    pub eps: T,
}

/// Checks the four cone conditions on cells `1..N` (the cell touching 0 is
/// skipped), with `x_i = i/N` the left edge of cell `i`.
///
/// Margins are normalised so that all four compare against `−eps`:
/// the two monotonicity margins are divided by `max(1, max values)` and the
/// upper-bound margin is relative to the bound itself.
pub fn cone_membership<T: Real>(d: &GridDensity<T>, params: &ConeParams<T>, eps: T) -> Result<ConeReport<T>> {
    let n = d.n_cells();
    if n < 4 {
        return Err(QdsError::Argument(format!("cone check needs at least 4 cells, got {n}")));
    }
    let v = d.values();
    let nf = T::count(n);
    let beta = params.beta;
    let scale = d.max_value().max(T::one());
    let bound_factor = params.a * d.mass();
    let weight = |i: usize| (T::count(i) / nf).powf(beta + T::one());

    let mut m = ConeMargins {
        nonnegative: T::infinity(),
        decreasing: T::infinity(),
        weighted_increasing: T::infinity(),
        upper_bound: T::infinity(),
    };
    for i in 1..n {
        m.nonnegative = m.nonnegative.min(v[i]);
        let bound = bound_factor * (T::count(i) / nf).powf(-beta);
        let slack = if bound > T::zero() {
            (bound - v[i]) / bound
        } else if v[i] > T::zero() {
            T::neg_infinity()
        } else {
            T::zero()
        };
        m.upper_bound = m.upper_bound.min(slack);
        if i + 1 < n {
            m.decreasing = m.decreasing.min((v[i] - v[i + 1]) / scale);
            m.weighted_increasing = m
                .weighted_increasing
                .min((weight(i + 1) * v[i + 1] - weight(i) * v[i]) / scale);
        }
    }
    Ok(ConeReport {
        passes: m.min() >= -eps,
        margins: m,
        eps,
    })
}

/// Grid tolerance used for pieces and pushforwards: `base + 2/N`.
pub fn grid_eps<T: Real>(base: T, n_cells: usize) -> T {
    base + T::lit(2.0) / T::count(n_cells)
}

/// `C₁ = 8 + 2·max(a/(β+1), 4a/(a−1))`.
pub fn c1_constant<T: Real>(params: &ConeParams<T>) -> T {
    T::lit(8.0) + T::lit(2.0) * params.spread()
}

/// Constants of the splitting `f h = [(f + λx + ν)h + δ] − [(λx + ν)h + δ]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionConstants<T> {
    pub lambda: T,
    pub nu: T,
    pub delta: T,
    /// C¹-norm bound `A`.
    pub a_bound: T,
    /// Mass bound `B`.
    pub b_bound: T,
    pub c1: T,
}

impl<T: Real> DecompositionConstants<T> {
    /// The two cone pieces `(plus, minus)` with `plus − minus = f·h` at cell
    /// midpoints.
    pub fn split(&self, f: &ObservableSpec, h: &GridDensity<T>) -> (GridDensity<T>, GridDensity<T>) {
        let (lambda, nu) = (self.lambda, self.nu);
        let plus = h
            .multiplied_by(|x| f.value(x) + lambda * x + nu)
            .plus_constant(self.delta);
        let minus = h.multiplied_by(|x| lambda * x + nu).plus_constant(self.delta);
        (plus, minus)
    }
}

/// `λ = −A`, `ν = 6A`, `δ = 2AB·max(a/(β+1), 4a/(a−1))`.
pub fn c1_decompose<T: Real>(
    f: &ObservableSpec,
    a_bound: T,
    b_bound: T,
    params: &ConeParams<T>,
) -> Result<DecompositionConstants<T>> {
    if a_bound.as_f64() < f.c1_norm() || !a_bound.is_finite() {
        return Err(QdsError::Argument(format!(
            "A = {a_bound} is below the observable's C¹ norm {}",
            f.c1_norm()
        )));
    }
    if !(b_bound >= T::zero()) || !b_bound.is_finite() {
        return Err(QdsError::Argument(format!("mass bound B must be >= 0, got {b_bound}")));
    }
    Ok(DecompositionConstants {
        lambda: -a_bound,
        nu: T::lit(6.0) * a_bound,
        delta: T::lit(2.0) * a_bound * b_bound * params.spread(),
        a_bound,
        b_bound,
        c1: c1_constant(params),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignedPiece<T> {
    /// `+1` or `−1`.
    pub sign: T,
    pub density: GridDensity<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<T> {
    pub pieces: Vec<SignedPiece<T>>,
    /// `C₁^k ∏ A_i m(h)`.
    pub mass_budget: T,
}

impl<T: Real> Decomposition<T> {
    /// `Σ σ_i g_i`.
    pub fn signed_sum(&self) -> GridDensity<T> {
        let n = self.pieces[0].density.n_cells();
        let mut acc = vec![T::zero(); n];
        for p in &self.pieces {
            for (a, &v) in acc.iter_mut().zip(p.density.values()) {
                *a = *a + p.sign * v;
            }
        }
        GridDensity::from_raw(acc)
    }
}

fn check_depth<T>(fs: &[ObservableSpec], gaps: &[Vec<T>]) -> Result<()> {
    if fs.is_empty() {
        return Err(QdsError::Argument("decomposition needs at least one observable".into()));
    }
    if fs.len() > MAX_DECOMPOSITION_DEPTH {
        return Err(QdsError::CapExceeded {
            what: "nested decomposition depth",
            cap: MAX_DECOMPOSITION_DEPTH,
            got: fs.len(),
        });
    }
    if gaps.len() + 1 != fs.len() {
        return Err(QdsError::DimensionMismatch {
            expected: fs.len() - 1,
            got: gaps.len(),
        });
    }
    Ok(())
}

/// `f_k L_{gap_{k−1}} ⋯ f_2 L_{gap_1} f_1 h` on the grid, with each gap an
/// α-list applied in order.
pub fn nested_product<T: Real>(
    fs: &[ObservableSpec],
    h: &GridDensity<T>,
    gaps: &[Vec<T>],
    cache: &OperatorCache<T>,
) -> Result<GridDensity<T>> {
    check_depth(fs, gaps)?;
    let n = h.n_cells();
    let mut cur = h.multiplied_by(|x| fs[0].value(x));
    for (f, gap) in fs[1..].iter().zip(gaps) {
        cur = compose_apply(gap, n, &cur, cache)?.multiplied_by(|x| f.value(x));
    }
    Ok(cur)
}

/// Writes the nested product as `Σ_{i=1}^{2^k} σ_i g_i` with every `g_i` in
/// the cone: split `f_1 h`, push both pieces through the next gap, split
/// each against `f_2`, and so on.
///
/// Each split uses `A = ‖f_s‖_{C¹}` and `B` equal to the mass of the piece
/// being split, so every piece has mass at most `C₁^k ∏ A_i m(h)`.
pub fn recursive_decompose<T: Real>(
    fs: &[ObservableSpec],
    h: &GridDensity<T>,
    gaps: &[Vec<T>],
    params: &ConeParams<T>,
    cache: &OperatorCache<T>,
) -> Result<Decomposition<T>> {
    check_depth(fs, gaps)?;
    let n = h.n_cells();
    let report = cone_membership(h, params, grid_eps(T::lit(1e-9), n))?;
    if !report.passes {
        return Err(QdsError::Argument(format!(
            "base density is outside the cone (worst margin {})",
            report.margins.min()
        )));
    }

    let c1 = c1_constant(params);
    let mut budget = h.mass();
    let mut pieces = vec![SignedPiece {
        sign: T::one(),
        density: h.clone(),
    }];
    for (s, f) in fs.iter().enumerate() {
        let a_bound = T::lit(f.c1_norm());
        budget = budget * c1 * a_bound;
        let mut next = Vec::with_capacity(2 * pieces.len());
        for piece in pieces {
            let g = if s == 0 {
                piece.density
            } else {
                compose_apply(&gaps[s - 1], n, &piece.density, cache)?
            };
            let consts = c1_decompose(f, a_bound, g.mass().max(T::zero()), params)?;
            let (plus, minus) = consts.split(f, &g);
            next.push(SignedPiece {
                sign: piece.sign,
                density: plus,
            });
            next.push(SignedPiece {
                sign: -piece.sign,
                density: minus,
            });
        }
        pieces = next;
    }
    Ok(Decomposition {
        pieces,
        mass_budget: budget,
    })
}

/// Random cone element: a positive mix of `1` and up to three truncated
/// powers `min(K, x^{-γ})` with `γ ≤ β`, `K ∈ [1, 64]`, cell-averaged and
/// normalised to unit mass. Every such function lies in `C_*(β)`.
pub fn random_cone_density<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n_cells: usize,
    params: &ConeParams<T>,
) -> Result<GridDensity<T>> {
    let beta = params.beta.as_f64();
    let base: f64 = rng.random_range(0.0..1.0);
    let terms: Vec<(f64, f64, f64)> = (0..rng.random_range(1..=3))
        .map(|_| {
            (
                rng.random_range(0.05..1.0),
                rng.random_range(0.0..=beta),
                rng.random_range(1.0..64.0),
            )
        })
        .collect();
    let f = move |x: T| {
        let x = x.as_f64();
        let v = base
            + terms
                .iter()
                .map(|&(w, gamma, cap)| w * x.powf(-gamma).min(cap))
                .sum::<f64>();
        T::lit(v)
    };
    GridDensity::from_cell_averages(n_cells, f)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half() -> ConeParams<f64> {
        ConeParams::new(0.5).unwrap()
    }

    #[test]
    fn cone_parameter() {
        assert!((half().a() - 3.535_533_905_932_737).abs() < 1e-14);
        assert_eq!(ConeParams::<f64>::new(0.0).unwrap().a(), 2.0);
        assert!(ConeParams::<f64>::new(-0.1).is_err());
        assert!(ConeParams::<f64>::new(1.0).is_err());
    }

    #[test]
    fn membership_examples() {
        let p = half();
        assert!(cone_membership(&GridDensity::uniform(64), &p, 0.0).unwrap().passes);

        let rising = GridDensity::from_midpoints(64, |x| x).unwrap();
        let r = cone_membership(&rising, &p, 1e-9).unwrap();
        assert!(!r.passes);
        assert!(r.margins.decreasing < 0.0);

        let profile = GridDensity::from_cell_averages(2048, |x: f64| 0.5 * x.powf(-0.5)).unwrap();
        let r = cone_membership(&profile, &p, 1e-9).unwrap();
        assert!(r.passes, "{r:?}");

        assert!(cone_membership(&GridDensity::uniform(3), &p, 0.0).is_err());
    }

    #[test]
    fn upper_bound_violation_is_detected() {
        let n = 256;
        let mut v = vec![0.0; n];
        v[..2].fill(n as f64 / 2.0);
        let r = cone_membership(&GridDensity::new(v).unwrap(), &half(), 1e-6).unwrap();
        assert!(!r.passes);
        assert!(r.margins.upper_bound < 0.0);
    }

    #[test]
    fn decomposition_constants() {
        let p = half();
        let zero = ObservableSpec::constant(0.0).unwrap();
        let c = c1_decompose(&zero, 1.0, 1.0, &p).unwrap();
        assert_eq!((c.lambda, c.nu), (-1.0, 6.0));
        assert!((c.delta - 11.155_154).abs() < 1e-6);

        let c = c1_decompose(&zero, 0.0, 5.0, &p).unwrap();
        assert_eq!((c.lambda, c.nu, c.delta), (0.0, 0.0, 0.0));

        let x = ObservableSpec::affine(0.0, 1.0).unwrap();
        let c = c1_decompose(&x, 2.0, 1.0, &p).unwrap();
        assert_eq!((c.lambda, c.nu), (-2.0, 12.0));
        assert!((c.delta - 22.310_308).abs() < 1e-6);

        assert!(c1_decompose(&x, 1.5, 1.0, &p).is_err());
        assert!(c1_decompose(&x, 2.0, -1.0, &p).is_err());
    }

    #[test]
    fn constants_are_homogeneous() {
        let p = half();
        let zero = ObservableSpec::constant(0.0).unwrap();
        let base = c1_decompose(&zero, 1.0, 1.0, &p).unwrap();
        let scaled = c1_decompose(&zero, 3.0, 2.0, &p).unwrap();
        assert_eq!(scaled.lambda, 3.0 * base.lambda);
        assert_eq!(scaled.nu, 3.0 * base.nu);
        assert!((scaled.delta - 6.0 * base.delta).abs() < 1e-12);
    }

    #[test]
    fn single_split_examples() {
        let p = half();
        let cache = OperatorCache::new();
        let h = GridDensity::<f64>::uniform(256);

        let zero = ObservableSpec::constant(0.0).unwrap();
        let d = recursive_decompose(&[zero], &h, &[], &p, &cache).unwrap();
        assert_eq!(d.pieces.len(), 2);
        assert_eq!(d.pieces[0].density, d.pieces[1].density);
        assert_eq!((d.pieces[0].sign, d.pieces[1].sign), (1.0, -1.0));
        assert!(d.signed_sum().max_abs() == 0.0);

        let f = ObservableSpec::affine(-0.5, 1.0).unwrap();
        let d = recursive_decompose(&[f], &h, &[], &p, &cache).unwrap();
        let sum = d.signed_sum();
        for i in 0..256 {
            assert!((sum.values()[i] - (h.midpoint(i) - 0.5)).abs() < 1e-12);
        }
        for piece in &d.pieces {
            assert!(cone_membership(&piece.density, &p, grid_eps(1e-9, 256)).unwrap().passes);
            assert!(piece.density.mass() <= d.mass_budget);
        }
    }

    #[test]
    fn depth_limits() {
        let p = half();
        let cache = OperatorCache::new();
        let h = GridDensity::<f64>::uniform(16);
        let f = ObservableSpec::cos_pi();
        let fs = vec![f.clone(); 5];
        let gaps = vec![vec![0.1]; 4];
        assert!(matches!(
            recursive_decompose(&fs, &h, &gaps, &p, &cache),
            Err(QdsError::CapExceeded { cap: 4, got: 5, .. })
        ));
        assert!(recursive_decompose(&fs[..2], &h, &[], &p, &cache).is_err());
        let rising = GridDensity::from_midpoints(16, |x| if x < 0.5 { 1.0 } else { 10.0 }).unwrap();
        assert!(recursive_decompose(&fs[..1], &rising, &[], &p, &cache).is_err());
    }
}
