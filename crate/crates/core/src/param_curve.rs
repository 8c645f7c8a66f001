//! Piecewise Hölder driving curves `γ : [0, 1] → [0, β_*]` and the
//! triangular parameter arrays `α_{n,k} = γ(k/n)` they generate.

use serde::{Deserialize, Serialize};

use crate::error::{check_unit, QdsError, Result};
use crate::Real;

/// Shape of a curve on one segment `[t_lo, t_hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SegmentKind<T> {
    Constant { value: T },
    /// Linear from `start` at `t_lo` to `end` at `t_hi`.
    Affine { start: T, end: T },
    /// `base + amplitude · (t − t_lo)^exponent`.
    PowerHolder { base: T, amplitude: T, exponent: T },
    /// Linear interpolation through `(t, value)` samples spanning the segment.
    Tabulated { points: Vec<(T, T)> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSegment<T> {
    pub t_lo: T,
    pub t_hi: T,
    #[serde(flatten)]
    pub kind: SegmentKind<T>,
}

impl<T: Real> CurveSegment<T> {
    pub fn new(t_lo: T, t_hi: T, kind: SegmentKind<T>) -> Result<Self> {
        let seg = Self { t_lo, t_hi, kind };
        seg.validate()?;
        Ok(seg)
    }

    fn validate(&self) -> Result<()> {
        check_unit("t_lo", self.t_lo)?;
        check_unit("t_hi", self.t_hi)?;
        if !(self.t_lo < self.t_hi) {
            return Err(QdsError::Argument(format!(
                "segment [{}, {}) is empty",
                self.t_lo, self.t_hi
            )));
        }
        match &self.kind {
            SegmentKind::Constant { value } => check_unit("segment value", *value)?,
            SegmentKind::Affine { start, end } => {
                check_unit("segment start", *start)?;
                check_unit("segment end", *end)?;
            }
            SegmentKind::PowerHolder {
                base,
                amplitude,
                exponent,
            } => {
                if !(*exponent > T::zero() && *exponent <= T::one()) {
                    return Err(QdsError::Domain {
                        what: "power_holder exponent",
                        value: exponent.as_f64(),
                        domain: "(0, 1]",
                    });
                }
                check_unit("segment base", *base)?;
                check_unit("segment end value", *base + *amplitude * (self.t_hi - self.t_lo).powf(*exponent))?;
            }
            SegmentKind::Tabulated { points } => {
                if points.len() < 2 {
                    return Err(QdsError::Argument("tabulated segment needs at least two samples".into()));
                }
                if points[0].0 != self.t_lo || points[points.len() - 1].0 != self.t_hi {
                    return Err(QdsError::Argument(
                        "tabulated samples must start at t_lo and end at t_hi".into(),
                    ));
                }
                if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
                    return Err(QdsError::Argument("tabulated sample times must increase".into()));
                }
                for &(_, v) in points {
                    check_unit("tabulated value", v)?;
                }
            }
        }
        Ok(())
    }

    /// Segment formula at `t ∈ [t_lo, t_hi]`; at `t_hi` this is the left limit.
    pub fn value_at(&self, t: T) -> T {
        match &self.kind {
            SegmentKind::Constant { value } => *value,
            SegmentKind::Affine { start, end } => {
                let s = (t - self.t_lo) / (self.t_hi - self.t_lo);
                *start + (*end - *start) * s
            }
            SegmentKind::PowerHolder {
                base,
                amplitude,
                exponent,
            } => *base + *amplitude * (t - self.t_lo).max(T::zero()).powf(*exponent),
            SegmentKind::Tabulated { points } => {
                let idx = points.partition_point(|p| p.0 <= t);
                if idx == 0 {
                    return points[0].1;
                }
                if idx >= points.len() {
                    return points[points.len() - 1].1;
                }
                let (t0, v0) = points[idx - 1];
                let (t1, v1) = points[idx];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// Supremum of the segment's values over its closure.
    pub fn range_max(&self) -> T {
        match &self.kind {
            SegmentKind::Constant { value } => *value,
            SegmentKind::Affine { start, end } => start.max(*end),
            SegmentKind::PowerHolder { base, .. } => base.max(self.value_at(self.t_hi)),
            SegmentKind::Tabulated { points } => {
                points.iter().fold(T::neg_infinity(), |m, p| m.max(p.1))
            }
        }
    }
}

/// Driving curve made of segments that partition `[0, 1]`. Jumps are allowed
/// at interior breakpoints, where the curve is right-continuous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseHolderCurve<T> {
    segments: Vec<CurveSegment<T>>,
    theta: T,
    beta_star: T,
}

impl<T: Real> PiecewiseHolderCurve<T> {
    pub fn new(segments: Vec<CurveSegment<T>>, theta: T, beta_star: T) -> Result<Self> {
        if segments.is_empty() {
            return Err(QdsError::Argument("curve needs at least one segment".into()));
        }
        if !(theta > T::zero() && theta <= T::one()) {
            return Err(QdsError::Domain {
                what: "theta",
                value: theta.as_f64(),
                domain: "(0, 1]",
            });
        }
        if !(beta_star > T::zero() && beta_star < T::one()) {
            return Err(QdsError::Domain {
                what: "beta_star",
                value: beta_star.as_f64(),
                domain: "(0, 1)",
            });
        }
        for seg in &segments {
            seg.validate()?;
        }
        if segments[0].t_lo != T::zero() || segments[segments.len() - 1].t_hi != T::one() {
            return Err(QdsError::Argument("segments must cover [0, 1]".into()));
        }
        if segments.windows(2).any(|w| w[0].t_hi != w[1].t_lo) {
            return Err(QdsError::Argument("segment breakpoints must match".into()));
        }
        Ok(Self {
            segments,
            theta,
            beta_star,
        })
    }

    /// Single-segment curve on `[0, 1]`.
    pub fn single(kind: SegmentKind<T>, theta: T, beta_star: T) -> Result<Self> {
        Self::new(vec![CurveSegment::new(T::zero(), T::one(), kind)?], theta, beta_star)
    }

    pub fn constant(value: T, beta_star: T) -> Result<Self> {
        Self::single(SegmentKind::Constant { value }, T::one(), beta_star)
    }

    pub fn segments(&self) -> &[CurveSegment<T>] {
        &self.segments
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn beta_star(&self) -> T {
        self.beta_star
    }

    /// Breakpoints `τ_1 = 0 < … < τ_{m+1} = 1`.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = self.segments.iter().map(|s| s.t_lo).collect();
        out.push(T::one());
        out
    }

    pub fn range_max(&self) -> T {
        self.segments
            .iter()
            .fold(T::neg_infinity(), |m, s| m.max(s.range_max()))
    }

    /// Returns `Some(value)` if every segment is the same constant.
    pub fn constant_value(&self) -> Option<T> {
        let mut it = self.segments.iter().map(|s| match s.kind {
            SegmentKind::Constant { value } => Some(value),
            _ => None,
        });
        let first = it.next()??;
        it.all(|v| v == Some(first)).then_some(first)
    }

    fn segment_index(&self, t: T) -> usize {
        // right-continuous: the last segment whose t_lo <= t
        let idx = self.segments.partition_point(|s| s.t_lo <= t);
        idx.saturating_sub(1)
    }

    /// `γ_t`. Interior breakpoints take the right segment's value.
    pub fn sample(&self, t: T) -> Result<T> {
        check_unit("t", t)?;
        Ok(self.sample_unchecked(t))
    }

    pub(crate) fn sample_unchecked(&self, t: T) -> T {
        self.segments[self.segment_index(t)].value_at(t)
    }

    /// Row `[α_{n,0}, …, α_{n,n}]` with `α_{n,k} = γ(k/n)`.
    pub fn build_row(&self, n: usize) -> Result<Vec<T>> {
        if n == 0 {
            return Err(QdsError::Argument("row level n must be at least 1".into()));
        }
        let nf = T::count(n);
        Ok((0..=n).map(|k| self.sample_unchecked(T::count(k) / nf)).collect())
    }

    /// Row with a user-supplied additive perturbation per entry. The
    /// perturbed entries must stay in `[0, β_*]`.
    pub fn build_row_perturbed(&self, n: usize, offsets: &[T]) -> Result<Vec<T>> {
        let mut row = self.build_row(n)?;
        if offsets.len() != row.len() {
            return Err(QdsError::DimensionMismatch {
                expected: row.len(),
                got: offsets.len(),
            });
        }
        for (a, d) in row.iter_mut().zip(offsets) {
            *a = *a + *d;
            check_unit("perturbed alpha", *a)?;
            if *a > self.beta_star {
                return Err(QdsError::Inadmissible {
                    alpha: a.as_f64(),
                    beta_star: self.beta_star.as_f64(),
                });
            }
        }
        Ok(row)
    }

    /// Checks the standing assumptions on the curve: range inside
    /// `[0, β_*]`, a finite empirical Hölder constant per segment, and a
    /// bounded equipartition error `n^θ sup_t |α_{n,⌈nt⌉} − γ_t|`.
    pub fn verify_admissibility(&self, n_list: &[usize]) -> Result<AdmissibilityReport<T>> {
        if n_list.is_empty() || n_list.contains(&0) {
            return Err(QdsError::Argument("n_list must be nonempty with positive levels".into()));
        }
        let range_max = self.range_max();
        let holder_constants: Vec<T> = self
            .segments
            .iter()
            .map(|s| empirical_holder_constant(s, self.theta, HOLDER_SAMPLES))
            .collect();

        let mut levels: Vec<usize> = n_list.to_vec();
        levels.sort_unstable();
        levels.dedup();
        let breakpoints = self.breakpoints();
        let deviations: Vec<(usize, T)> = levels
            .iter()
            .map(|&n| (n, T::count(n).powf(self.theta) * self.sup_deviation(n, &breakpoints)))
            .collect();
        let tiny = T::lit(1e-12);
        let bounded = deviations
            .windows(2)
            .all(|w| w[1].1 <= w[0].1 * T::lit(1.1) + tiny);
        let range_ok = range_max <= self.beta_star;
        Ok(AdmissibilityReport {
            range_max,
            beta_star: self.beta_star,
            range_ok,
            holder_constants,
            deviations,
            bounded,
            passes: range_ok && bounded,
        })
    }

    fn sup_deviation(&self, n: usize, breakpoints: &[T]) -> T {
        let nf = T::count(n);
        let grid = 16 * n;
        let dev = |t: T| {
            let k = (nf * t).ceil();
            (self.sample_unchecked(k / nf) - self.sample_unchecked(t)).abs()
        };
        let on_grid = (0..=grid)
            .map(|i| dev(T::count(i) / T::count(grid)))
            .fold(T::zero(), T::max);
        breakpoints.iter().map(|&t| dev(t)).fold(on_grid, T::max)
    }
}

const HOLDER_SAMPLES: usize = 513;

fn empirical_holder_constant<T: Real>(seg: &CurveSegment<T>, theta: T, samples: usize) -> T {
    let width = seg.t_hi - seg.t_lo;
    let ts: Vec<T> = (0..samples)
        .map(|i| seg.t_lo + width * T::count(i) / T::count(samples - 1))
        .collect();
    let vs: Vec<T> = ts.iter().map(|&t| seg.value_at(t)).collect();
    let mut best = T::zero();
    for i in 0..samples {
        for j in (i + 1)..samples {
            let ratio = (vs[j] - vs[i]).abs() / (ts[j] - ts[i]).powf(theta);
            best = best.max(ratio);
        }
    }
    best
}

/// Outcome of [`PiecewiseHolderCurve::verify_admissibility`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport<T> {
    pub range_max: T,
    pub beta_star: T,
    pub range_ok: bool,
    /// Empirical `Ĉ_γ`, one per segment.
    pub holder_constants: Vec<T>,
    /// `(n, n^θ · sup_t |α_{n,⌈nt⌉} − γ_t|)` for each tested level.
    pub deviations: Vec<(usize, T)>,
    pub bounded: bool,
    pub passes: bool,
}

impl<T: Real> AdmissibilityReport<T> {
    pub fn max_holder_constant(&self) -> T {
        self.holder_constants.iter().fold(T::zero(), |m, &c| m.max(c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn affine(start: f64, end: f64) -> PiecewiseHolderCurve<f64> {
        PiecewiseHolderCurve::single(SegmentKind::Affine { start, end }, 1.0, 0.5).unwrap()
    }

    fn power(base: f64, amplitude: f64, exponent: f64) -> PiecewiseHolderCurve<f64> {
        PiecewiseHolderCurve::single(
            SegmentKind::PowerHolder {
                base,
                amplitude,
                exponent,
            },
            exponent,
            0.5,
        )
        .unwrap()
    }

    #[test]
    fn sample_examples() {
        let c = PiecewiseHolderCurve::constant(0.25, 0.5).unwrap();
        assert_eq!(c.sample(0.37).unwrap(), 0.25);
        assert_abs_diff_eq!(affine(0.1, 0.4).sample(0.5).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(power(0.1, 0.2, 0.5).sample(0.25).unwrap(), 0.2, epsilon = 1e-15);
        assert!(c.sample(1.5).is_err());
    }

    #[test]
    fn row_examples() {
        let c = PiecewiseHolderCurve::constant(0.25, 0.5).unwrap();
        assert_eq!(c.build_row(4).unwrap(), vec![0.25; 5]);

        let row = affine(0.0, 0.4).build_row(4).unwrap();
        for (got, want) in row.iter().zip([0.0, 0.1, 0.2, 0.3, 0.4]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }

        let row = power(0.0, 0.4, 0.5).build_row(4).unwrap();
        for (got, want) in row.iter().zip([0.0, 0.2, 0.282843, 0.346410, 0.4]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-6);
        }
        assert!(c.build_row(0).is_err());
    }

    #[test]
    fn row_matches_sampling_exactly() {
        let c = power(0.05, 0.3, 0.7);
        for n in [1, 7, 64, 1000] {
            let row = c.build_row(n).unwrap();
            for (k, a) in row.iter().enumerate() {
                assert_eq!(*a, c.sample(k as f64 / n as f64).unwrap());
            }
        }
    }

    #[test]
    fn breakpoints_are_right_continuous() {
        let c = PiecewiseHolderCurve::new(
            vec![
                CurveSegment::new(0.0, 0.5, SegmentKind::Constant { value: 0.1 }).unwrap(),
                CurveSegment::new(0.5, 1.0, SegmentKind::Affine { start: 0.3, end: 0.4 }).unwrap(),
            ],
            1.0,
            0.5,
        )
        .unwrap();
        assert_eq!(c.sample(0.5).unwrap(), 0.3);
        assert_abs_diff_eq!(c.sample(1.0).unwrap(), 0.4, epsilon = 1e-15);
        assert_eq!(c.sample(0.4999).unwrap(), 0.1);
        assert_eq!(c.breakpoints(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn rejects_malformed_curves() {
        let gap = PiecewiseHolderCurve::new(
            vec![
                CurveSegment::new(0.0, 0.4, SegmentKind::Constant { value: 0.1 }).unwrap(),
                CurveSegment::new(0.5, 1.0, SegmentKind::Constant { value: 0.1 }).unwrap(),
            ],
            1.0,
            0.5,
        );
        assert!(gap.is_err());
        assert!(CurveSegment::new(
            0.0,
            1.0,
            SegmentKind::PowerHolder {
                base: 0.0,
                amplitude: 0.1,
                exponent: 1.5
            }
        )
        .is_err());
        assert!(CurveSegment::new(0.3, 0.3, SegmentKind::Constant { value: 0.1 }).is_err());
        assert!(PiecewiseHolderCurve::constant(0.1, 1.0).is_err());
    }

    #[test]
    fn tabulated_interpolates() {
        let c = PiecewiseHolderCurve::single(
            SegmentKind::Tabulated {
                points: vec![(0.0, 0.1), (0.5, 0.3), (1.0, 0.2)],
            },
            1.0,
            0.5,
        )
        .unwrap();
        assert_abs_diff_eq!(c.sample(0.25).unwrap(), 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(c.sample(0.75).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(c.sample(1.0).unwrap(), 0.2, epsilon = 1e-15);
        assert_eq!(c.range_max(), 0.3);
    }

    #[test]
    fn perturbed_rows() {
        let c = PiecewiseHolderCurve::constant(0.25, 0.5).unwrap();
        let row = c.build_row_perturbed(2, &[0.0, 0.01, -0.01]).unwrap();
        assert_eq!(row, vec![0.25, 0.26, 0.24]);
        assert!(c.build_row_perturbed(2, &[0.0, 0.3, 0.0]).is_err());
        assert!(c.build_row_perturbed(2, &[0.0]).is_err());
    }

    #[test]
    fn admissibility_constant_curve() {
        let c = PiecewiseHolderCurve::constant(0.25, 0.5).unwrap();
        let r = c.verify_admissibility(&[10, 100, 1000]).unwrap();
        assert_eq!(r.max_holder_constant(), 0.0);
        assert!(r.deviations.iter().all(|&(_, d)| d == 0.0));
        assert!(r.passes);
    }

    #[test]
    fn admissibility_affine_curve() {
        let r = affine(0.0, 0.4).verify_admissibility(&[10, 100]).unwrap();
        for &(_, d) in &r.deviations {
            assert!(d <= 0.4 + 1e-12, "scaled deviation {d}");
        }
        assert!(r.passes);
        assert_abs_diff_eq!(r.holder_constants[0], 0.4, epsilon = 1e-9);
    }

    #[test]
    fn admissibility_flags_range_violation() {
        let c = PiecewiseHolderCurve::single(SegmentKind::Affine { start: 0.1, end: 0.9 }, 1.0, 0.5)
            .unwrap();
        let r = c.verify_admissibility(&[10]).unwrap();
        assert!(!r.range_ok);
        assert!(!r.passes);
        assert_eq!(r.range_max, 0.9);
        assert!(c.verify_admissibility(&[]).is_err());
    }

    #[test]
    fn equipartition_rate_for_every_kind() {
        let curves = vec![
            affine(0.05, 0.45),
            power(0.0, 0.4, 0.5),
            power(0.1, 0.3, 0.8),
            PiecewiseHolderCurve::single(
                SegmentKind::Tabulated {
                    points: vec![(0.0, 0.1), (0.3, 0.4), (0.6, 0.2), (1.0, 0.35)],
                },
                1.0,
                0.5,
            )
            .unwrap(),
        ];
        for c in curves {
            let r = c.verify_admissibility(&[8, 32, 128, 512]).unwrap();
            let bound = 2.0 * r.max_holder_constant();
            for &(n, d) in &r.deviations {
                assert!(d < bound, "n={n}: {d} vs {bound}");
            }
            assert!(r.bounded);
        }
    }
}
