//! C¹ observables on `[0, 1]` with recorded norm bounds.
//!
//! The recorded bounds are certified upper bounds: the grid maximum on
//! `10⁴ + 1` points plus half a grid step times an analytic bound on the
//! next derivative, capped by the analytic bound itself.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{QdsError, Result};
use crate::Real;

const NORM_GRID: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableKind {
    /// `Σ_k c_k x^k`.
    Polynomial { coefficients: Vec<f64> },
    /// `constant + Σ_k cos[k−1]·cos(kπx) + sin[k−1]·sin(kπx)`.
    Trigonometric {
        #[serde(default)]
        constant: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    Affine { intercept: f64, slope: f64 },
    /// `height · S((x − lo)/width) · S((hi − x)/width)` with the smoothstep
    /// `S(u) = 3u² − 2u³` clamped to `[0, 1]`.
    IndicatorSmooth {
        lo: f64,
        hi: f64,
        width: f64,
        height: f64,
    },
}

/// Observable together with `‖f‖_∞` and `‖f‖_{C¹} = ‖f‖_∞ + ‖f′‖_∞` bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableSpec {
    kind: ObservableKind,
    sup_norm: f64,
    c1_norm: f64,
}

impl ObservableSpec {
    pub fn new(kind: ObservableKind) -> Result<Self> {
        validate(&kind)?;
        let (sup_norm, deriv_norm) = certified_norms(&kind);
        Ok(Self {
            kind,
            sup_norm,
            c1_norm: sup_norm + deriv_norm,
        })
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Self::new(ObservableKind::Polynomial { coefficients })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::polynomial(vec![c])
    }

    pub fn affine(intercept: f64, slope: f64) -> Result<Self> {
        Self::new(ObservableKind::Affine { intercept, slope })
    }

    /// `cos(πx)`.
    pub fn cos_pi() -> Self {
        Self::new(ObservableKind::Trigonometric {
            constant: 0.0,
            cos: vec![1.0],
            sin: vec![],
        })
        .expect("valid trigonometric observable")
    }

    /// Replaces the recorded bounds with larger ones.
    pub fn with_norm_bounds(mut self, sup_norm: f64, c1_norm: f64) -> Result<Self> {
        if sup_norm < self.sup_norm || c1_norm < self.c1_norm {
            return Err(QdsError::Argument(format!(
                "declared bounds ({sup_norm}, {c1_norm}) are below the certified ({}, {})",
                self.sup_norm, self.c1_norm
            )));
        }
        self.sup_norm = sup_norm;
        self.c1_norm = c1_norm;
        Ok(self)
    }

    pub fn kind(&self) -> &ObservableKind {
        &self.kind
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn c1_norm(&self) -> f64 {
        self.c1_norm
    }

    /// `Some(c)` when the observable is identically `c`.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.kind {
            ObservableKind::Polynomial { coefficients } => {
                if coefficients.iter().skip(1).all(|&c| c == 0.0) {
                    Some(coefficients.first().copied().unwrap_or(0.0))
                } else {
                    None
                }
            }
            ObservableKind::Trigonometric { constant, cos, sin } => cos
                .iter()
                .chain(sin)
                .all(|&c| c == 0.0)
                .then_some(*constant),
            ObservableKind::Affine { intercept, slope } => (*slope == 0.0).then_some(*intercept),
            ObservableKind::IndicatorSmooth { height, .. } => (*height == 0.0).then_some(0.0),
        }
    }

    pub fn value<T: Real>(&self, x: T) -> T {
        match &self.kind {
            ObservableKind::Polynomial { coefficients } => coefficients
                .iter()
                .rev()
                .fold(T::zero(), |acc, &c| acc * x + T::lit(c)),
            ObservableKind::Trigonometric { constant, cos, sin } => {
                let mut acc = T::lit(*constant);
                for (k, &c) in cos.iter().enumerate() {
                    acc = acc + T::lit(c) * (T::count(k + 1) * T::PI() * x).cos();
                }
                for (k, &s) in sin.iter().enumerate() {
                    acc = acc + T::lit(s) * (T::count(k + 1) * T::PI() * x).sin();
                }
                acc
            }
            ObservableKind::Affine { intercept, slope } => T::lit(*intercept) + T::lit(*slope) * x,
            ObservableKind::IndicatorSmooth {
                lo,
                hi,
                width,
                height,
            } => {
                let w = T::lit(*width);
                let up = smoothstep((x - T::lit(*lo)) / w);
                let down = smoothstep((T::lit(*hi) - x) / w);
                T::lit(*height) * up * down
            }
        }
    }

    pub fn derivative<T: Real>(&self, x: T) -> T {
        match &self.kind {
            ObservableKind::Polynomial { coefficients } => coefficients
                .iter()
                .enumerate()
                .skip(1)
                .rev()
                .fold(T::zero(), |acc, (k, &c)| acc * x + T::lit(c) * T::count(k)),
            ObservableKind::Trigonometric { cos, sin, .. } => {
                let mut acc = T::zero();
                for (k, &c) in cos.iter().enumerate() {
                    let w = T::count(k + 1) * T::PI();
                    acc = acc - T::lit(c) * w * (w * x).sin();
                }
                for (k, &s) in sin.iter().enumerate() {
                    let w = T::count(k + 1) * T::PI();
                    acc = acc + T::lit(s) * w * (w * x).cos();
                }
                acc
            }
            ObservableKind::Affine { slope, .. } => T::lit(*slope),
            ObservableKind::IndicatorSmooth {
                lo,
                hi,
                width,
                height,
            } => {
                let w = T::lit(*width);
                let u = (x - T::lit(*lo)) / w;
                let v = (T::lit(*hi) - x) / w;
                T::lit(*height)
                    * (smoothstep_slope(u) * smoothstep(v) - smoothstep(u) * smoothstep_slope(v))
                    / w
            }
        }
    }
}

fn smoothstep<T: Real>(u: T) -> T {
    let u = u.max(T::zero()).min(T::one());
    u * u * (T::lit(3.0) - T::lit(2.0) * u)
}

fn smoothstep_slope<T: Real>(u: T) -> T {
    if u <= T::zero() || u >= T::one() {
        T::zero()
    } else {
        T::lit(6.0) * u * (T::one() - u)
    }
}

fn validate(kind: &ObservableKind) -> Result<()> {
    let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
    let ok = match kind {
        ObservableKind::Polynomial { coefficients } => finite(coefficients),
        ObservableKind::Trigonometric { constant, cos, sin } => {
            constant.is_finite() && finite(cos) && finite(sin)
        }
        ObservableKind::Affine { intercept, slope } => intercept.is_finite() && slope.is_finite(),
        ObservableKind::IndicatorSmooth {
            lo,
            hi,
            width,
            height,
        } => finite(&[*lo, *hi, *height]) && *width > 0.0 && width.is_finite() && lo < hi,
    };
    if ok {
        Ok(())
    } else {
        Err(QdsError::Argument(format!("invalid observable {kind:?}")))
    }
}

/// Analytic bounds on `‖f‖_∞`, `‖f′‖_∞`, `‖f″‖_∞` over `[0, 1]`.
fn analytic_bounds(kind: &ObservableKind) -> [f64; 3] {
    match kind {
        ObservableKind::Polynomial { coefficients } => {
            let mut b = [0.0; 3];
            for (k, &c) in coefficients.iter().enumerate() {
                let k = k as f64;
                b[0] += c.abs();
                b[1] += k * c.abs();
                b[2] += k * (k - 1.0).max(0.0) * c.abs();
            }
            b
        }
        ObservableKind::Trigonometric { constant, cos, sin } => {
            let mut b = [constant.abs(), 0.0, 0.0];
            for coeffs in [cos, sin] {
                for (k, &c) in coeffs.iter().enumerate() {
                    let w = (k + 1) as f64 * PI;
                    b[0] += c.abs();
                    b[1] += w * c.abs();
                    b[2] += w * w * c.abs();
                }
            }
            b
        }
        ObservableKind::Affine { intercept, slope } => {
            [intercept.abs().max((intercept + slope).abs()), slope.abs(), 0.0]
        }
        ObservableKind::IndicatorSmooth { width, height, .. } => {
            let h = height.abs();
            [h, 3.0 * h / width, 16.5 * h / (width * width)]
        }
    }
}

fn certified_norms(kind: &ObservableKind) -> (f64, f64) {
    let [sup_a, d1_a, d2_a] = analytic_bounds(kind);
    let spec = ObservableSpec {
        kind: kind.clone(),
        sup_norm: 0.0,
        c1_norm: 0.0,
    };
    let half_step = 0.5 / NORM_GRID as f64;
    let (mut sup_g, mut d1_g) = (0.0f64, 0.0f64);
    for i in 0..=NORM_GRID {
        let x = i as f64 / NORM_GRID as f64;
        sup_g = sup_g.max(spec.value(x).abs());
        d1_g = d1_g.max(spec.derivative(x).abs());
    }
    let sup = sup_a.min(sup_g + d1_a * half_step);
    let d1 = d1_a.min(d1_g + d2_a * half_step);
    (sup, d1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_has_unit_norms() {
        let f = ObservableSpec::polynomial(vec![0.0, 1.0]).unwrap();
        assert_eq!(f.sup_norm(), 1.0);
        assert_eq!(f.c1_norm(), 2.0);
        assert_eq!(f.value(0.3), 0.3);
        assert_eq!(f.derivative(0.3), 1.0);
    }

    #[test]
    fn centered_identity_is_tight() {
        let f = ObservableSpec::affine(-0.5, 1.0).unwrap();
        assert!((f.sup_norm() - 0.5).abs() < 1e-12);
        assert!((f.c1_norm() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn cosine_norms() {
        let f = ObservableSpec::cos_pi();
        assert!(f.sup_norm() >= 1.0 && f.sup_norm() < 1.001);
        assert!(f.c1_norm() >= 1.0 + PI && f.c1_norm() < 1.0 + PI + 0.01);
        assert!((f.value(1.0f64) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn constants_are_recognised() {
        assert_eq!(ObservableSpec::constant(2.5).unwrap().constant_value(), Some(2.5));
        assert_eq!(ObservableSpec::affine(1.0, 0.0).unwrap().constant_value(), Some(1.0));
        assert_eq!(ObservableSpec::cos_pi().constant_value(), None);
        let zero = ObservableSpec::constant(0.0).unwrap();
        assert_eq!(zero.c1_norm(), 0.0);
    }

    #[test]
    fn declared_bounds_must_dominate() {
        let f = ObservableSpec::constant(0.0).unwrap().with_norm_bounds(1.0, 1.0).unwrap();
        assert_eq!(f.c1_norm(), 1.0);
        assert!(ObservableSpec::cos_pi().with_norm_bounds(0.5, 5.0).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ObservableSpec::new(ObservableKind::IndicatorSmooth {
            lo: 0.2,
            hi: 0.6,
            width: 0.0,
            height: 1.0
        })
        .is_err());
        assert!(ObservableSpec::polynomial(vec![f64::NAN]).is_err());
    }

    fn kinds() -> impl Strategy<Value = ObservableKind> {
        prop_oneof![
            prop::collection::vec(-2.0f64..2.0, 1..5)
                .prop_map(|coefficients| ObservableKind::Polynomial { coefficients }),
            (-1.0f64..1.0, prop::collection::vec(-1.0f64..1.0, 0..3), prop::collection::vec(-1.0f64..1.0, 0..3))
                .prop_map(|(constant, cos, sin)| ObservableKind::Trigonometric { constant, cos, sin }),
            (0.0f64..0.5, 0.5f64..1.0, 0.01f64..0.3, -2.0f64..2.0).prop_map(|(lo, hi, width, height)| {
                ObservableKind::IndicatorSmooth { lo, hi, width, height }
            }),
        ]
    }

    proptest! {
        #[test]
        fn recorded_norms_dominate_fine_grid(kind in kinds()) {
            let f = ObservableSpec::new(kind).unwrap();
            let mut sup = 0.0f64;
            let mut d1 = 0.0f64;
            for i in 0..=40_000 {
                let x = i as f64 / 40_000.0;
                sup = sup.max(f.value(x).abs());
                d1 = d1.max(f.derivative(x).abs());
            }
            prop_assert!(f.sup_norm() >= sup - 1e-12);
            prop_assert!(f.c1_norm() >= sup + d1 - 1e-12);
        }

        #[test]
        fn derivative_matches_finite_differences(kind in kinds(), x in 0.01f64..0.99) {
            let f = ObservableSpec::new(kind).unwrap();
            let h = 1e-6;
            let fd = (f.value(x + h) - f.value(x - h)) / (2.0 * h);
            prop_assert!((fd - f.derivative(x)).abs() < 1e-3 * (1.0 + f.c1_norm()));
        }
    }
}
