//! Time averages along rows of a quasistatic system: the functionals
//! `ζ_n(x, t)`, their limit `ζ(t) = ∫₀ᵗ μ̂_{γ_s}(f) ds`, ensemble deviation
//! statistics and (multi-)correlation estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{QdsError, Result};
use crate::observable::ObservableSpec;
use crate::param_curve::PiecewiseHolderCurve;
use crate::pm_map::{MapSequence, PmMap};
use crate::transfer_op::{compose_apply, GridDensity, OperatorCache, DEFAULT_N_CELLS};
use crate::Real;

/// Smallest number of quadrature nodes per unit length accepted by
/// [`limit_zeta`].
pub const MIN_QUAD_NODES: usize = 16;

/// Deterministic random stream for sample `index` of a run seeded with
/// `seed`; independent of how samples are scheduled.
pub fn sample_stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Memory-loss envelope `ρ(n) = n^{-(1/β_*−1)} (log n)^{1/β_*}`, with
/// `ρ(0) = ρ(1) = 1`.
pub fn rho<T: Real>(n: usize, beta_star: T) -> T {
    if n <= 1 {
        return T::one();
    }
    let nf = T::count(n);
    let inv = T::one() / beta_star;
    nf.powf(T::one() - inv) * nf.ln().powf(inv)
}

/// Correlation envelope `Φ(s) = s^{-1} (log s)^{-2}` for `s ≥ 2`; taken as
/// 1 below.
pub fn phi<T: Real>(s: usize) -> T {
    if s < 2 {
        return T::one();
    }
    let sf = T::count(s);
    T::one() / (sf * sf.ln().powi(2))
}

/// `m + 1` equispaced points `0, 1/m, …, 1` with `m = min(n, 512)`.
pub fn default_t_grid<T: Real>(n: usize) -> Vec<T> {
    let m = n.clamp(1, 512);
    (0..=m).map(|i| T::count(i) / T::count(m)).collect()
}

fn check_t_grid<T: Real>(t_grid: &[T]) -> Result<()> {
    for (i, &t) in t_grid.iter().enumerate() {
        if !(t >= T::zero() && t <= T::one()) {
            return Err(QdsError::Domain {
                what: "t",
                value: t.as_f64(),
                domain: "[0, 1]",
            });
        }
        if i > 0 && t < t_grid[i - 1] {
            return Err(QdsError::Argument("t grid must be sorted".into()));
        }
    }
    Ok(())
}

/// `ζ_n(x, t) = (1/n)[Σ_{k≤⌊nt⌋} f(x_{n,k}) + (nt − ⌊nt⌋) f(x_{n,⌈nt⌉})]`
/// on `t_grid`, where `x_{n,k}` is the orbit of `x` under row `n` of the
/// curve.
pub fn zeta_n<T: Real>(
    curve: &PiecewiseHolderCurve<T>,
    f: &ObservableSpec,
    n: usize,
    x: T,
    t_grid: &[T],
) -> Result<Vec<T>> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(QdsError::Domain {
            what: "x",
            value: x.as_f64(),
            domain: "[0, 1]",
        });
    }
    check_t_grid(t_grid)?;
    let row = curve.build_row(n)?;
    if let Some(c) = f.constant_value() {
        return Ok(t_grid.iter().map(|&t| T::lit(c) * t).collect());
    }
    Ok(zeta_on_row(&row, f, x, t_grid))
}

/// Orbit sums along `row = [α_0, …, α_n]`; inputs already validated.
fn zeta_on_row<T: Real>(row: &[T], f: &ObservableSpec, x: T, t_grid: &[T]) -> Vec<T> {
    let n = row.len() - 1;
    let mut values = Vec::with_capacity(n + 1);
    let mut prefix = Vec::with_capacity(n + 1);
    values.push(T::zero());
    prefix.push(T::zero());
    let mut state = x;
    let mut acc = T::zero();
    for &alpha in &row[1..] {
        state = PmMap::new_unchecked(alpha).apply(state);
        let v = f.value(state);
        acc = acc + v;
        values.push(v);
        prefix.push(acc);
    }
    let nf = T::count(n);
    t_grid
        .iter()
        .map(|&t| {
            let s = t * nf;
            let whole = s.floor().to_usize().unwrap_or(0).min(n);
            let frac = s - T::count(whole);
            let mut total = prefix[whole];
            if frac > T::zero() && whole < n {
                total = total + frac * values[whole + 1];
            }
            total / nf
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErgodicSettings {
    /// Ulam grid size for SRB densities.
    pub n_cells: usize,
    /// Quadrature nodes per unit length of `t`.
    pub n_quad: usize,
}

impl Default for ErgodicSettings {
    fn default() -> Self {
        Self {
            n_cells: DEFAULT_N_CELLS,
            n_quad: 256,
        }
    }
}

/// `μ̂_α(f)` as the grid pairing with the (cached) Ulam SRB density.
pub fn srb_mean<T: Real>(alpha: T, f: &ObservableSpec, n_cells: usize, cache: &OperatorCache<T>) -> Result<T> {
    if let Some(c) = f.constant_value() {
        return Ok(T::lit(c));
    }
    Ok(cache.srb(alpha, n_cells)?.integrate(|x| f.value(x)))
}

/// Composite midpoint rule for `ζ(t) = ∫₀ᵗ μ̂_{γ_s}(f) ds`.
///
/// Each stretch between breakpoints is cut into `⌈n_quad·length⌉` equal
/// subintervals; a `t` inside a subinterval picks up that subinterval's
/// midpoint value times the covered length.
pub fn limit_zeta<T: Real>(
    curve: &PiecewiseHolderCurve<T>,
    f: &ObservableSpec,
    settings: &ErgodicSettings,
    t_grid: &[T],
    cache: &OperatorCache<T>,
) -> Result<Vec<T>> {
    check_t_grid(t_grid)?;
    if settings.n_quad < MIN_QUAD_NODES {
        return Err(QdsError::Argument(format!(
            "limit_zeta needs at least {MIN_QUAD_NODES} quadrature nodes, got {}",
            settings.n_quad
        )));
    }
    if let Some(c) = f.constant_value() {
        return Ok(t_grid.iter().map(|&t| T::lit(c) * t).collect());
    }

    let mut cuts = curve.breakpoints();
    cuts.insert(0, T::zero());
    cuts.push(T::one());
    cuts.dedup();
    let mut cells: Vec<(T, T)> = Vec::new();
    for w in cuts.windows(2) {
        let len = w[1] - w[0];
        let m = (len * T::count(settings.n_quad)).ceil().to_usize().unwrap_or(1).max(1);
        for j in 0..m {
            let lo = w[0] + len * T::count(j) / T::count(m);
            let hi = if j + 1 == m { w[1] } else { w[0] + len * T::count(j + 1) / T::count(m) };
            cells.push((lo, hi));
        }
    }
    let means: Vec<T> = cells
        .par_iter()
        .map(|&(lo, hi)| {
            let alpha = curve.sample_unchecked((lo + hi) * T::lit(0.5));
            srb_mean(alpha, f, settings.n_cells, cache)
        })
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(t_grid.len());
    let mut idx = 0;
    let mut acc = T::zero();
    for &t in t_grid {
        while idx < cells.len() && cells[idx].1 <= t {
            acc = acc + (cells[idx].1 - cells[idx].0) * means[idx];
            idx += 1;
        }
        let partial = if idx < cells.len() && t > cells[idx].0 {
            (t - cells[idx].0) * means[idx]
        } else {
            T::zero()
        };
        out.push(acc + partial);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quantiles<T> {
    pub min: T,
    pub q25: T,
    pub median: T,
    pub q75: T,
    pub q90: T,
    pub max: T,
}

impl<T: Real> Quantiles<T> {
    /// Linear-interpolation quantiles of `values`.
    pub fn of(values: &[T]) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("quantiles of NaN"));
        let q = |p: f64| {
            if sorted.is_empty() {
                return T::nan();
            }
            let pos = p * (sorted.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let w = T::lit(pos - lo as f64);
            sorted[lo] + (sorted[hi] - sorted[lo]) * w
        };
        Self {
            min: q(0.0),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q90: q(0.9),
            max: q(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult<T> {
    pub n: usize,
    pub sample_count: usize,
    /// `sup_t |ζ_n(x, t) − ζ(t)|` over the t grid, one per sample.
    pub sup_devs: Vec<T>,
    pub quantiles: Quantiles<T>,
    /// `(ε, fraction of samples with sup_dev ≥ ε)`, ε ascending.
    pub prob_exceed: Vec<(T, T)>,
    /// `‖f‖_∞ / t_points`: gap between the grid sup and the true sup.
    pub grid_slack: T,
}

/// Per-sample sup deviations of `ζ_n` from a precomputed `ζ` on `t_grid`,
/// for initial points drawn uniformly from `sample_stream(seed, i)`.
#[allow(clippy::too_many_arguments)]
pub fn ensemble_sup_deviation<T: Real>(
    curve: &PiecewiseHolderCurve<T>,
    f: &ObservableSpec,
    n: usize,
    samples: usize,
    seed: u64,
    t_grid: &[T],
    limit: &[T],
    eps_list: &[T],
) -> Result<EnsembleResult<T>> {
    if samples == 0 {
        return Err(QdsError::Argument("ensemble needs at least one sample".into()));
    }
    if limit.len() != t_grid.len() {
        return Err(QdsError::DimensionMismatch {
            expected: t_grid.len(),
            got: limit.len(),
        });
    }
    check_t_grid(t_grid)?;
    let row = curve.build_row(n)?;
    let constant = f.constant_value();
    let sup_devs: Vec<T> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let x = T::lit(sample_stream(seed, i as u64).random::<f64>());
            let z = match constant {
                Some(c) => t_grid.iter().map(|&t| T::lit(c) * t).collect(),
                None => zeta_on_row(&row, f, x, t_grid),
            };
            z.iter()
                .zip(limit)
                .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
        })
        .collect();

    let mut eps: Vec<T> = eps_list.to_vec();
    eps.sort_by(|a, b| a.partial_cmp(b).expect("NaN threshold"));
    let prob_exceed = eps
        .iter()
        .map(|&e| {
            let hits = sup_devs.iter().filter(|&&d| d >= e).count();
            (e, T::count(hits) / T::count(samples))
        })
        .collect();
    Ok(EnsembleResult {
        n,
        sample_count: samples,
        quantiles: Quantiles::of(&sup_devs),
        sup_devs,
        prob_exceed,
        grid_slack: T::lit(f.sup_norm()) / T::count(t_grid.len().max(1)),
    })
}

/// Fraction of samples whose sup deviations, listed over increasing levels,
/// are nonincreasing from the second level on.
pub fn eventually_monotone_fraction<T: Real>(per_level: &[Vec<T>]) -> Result<f64> {
    let Some(first) = per_level.first() else {
        return Err(QdsError::Argument("need at least one level".into()));
    };
    let m = first.len();
    if let Some(bad) = per_level.iter().find(|l| l.len() != m) {
        return Err(QdsError::DimensionMismatch { expected: m, got: bad.len() });
    }
    if m == 0 {
        return Ok(1.0);
    }
    let tail = &per_level[per_level.len().min(1)..];
    let good = (0..m)
        .filter(|&i| tail.windows(2).all(|w| w[1][i] <= w[0][i]))
        .count();
    Ok(good as f64 / m as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationEstimate<T> {
    pub value: T,
    pub std_error: T,
    /// Estimates of `μ(f_{k_1}⋯f_{k_j})` and `μ(f_{k_{j+1}}⋯f_{k_ℓ})`.
    pub head_mean: T,
    pub tail_mean: T,
}

fn check_correlation_indices(fs: &[ObservableSpec], ks: &[usize], split: usize, len: usize) -> Result<()> {
    let l = ks.len();
    if fs.len() != 1 && fs.len() != l {
        return Err(QdsError::DimensionMismatch { expected: l, got: fs.len() });
    }
    if !(2..=4).contains(&l) {
        return Err(QdsError::Argument(format!("correlations take 2 to 4 indices, got {l}")));
    }
    if split != 1 && split != l - 1 {
        return Err(QdsError::Argument(format!("split must be 1 or {}, got {split}", l - 1)));
    }
    if ks.windows(2).any(|w| w[1] < w[0]) {
        return Err(QdsError::Argument("correlation indices must be sorted".into()));
    }
    if ks[l - 1] > len {
        return Err(QdsError::Index { index: ks[l - 1], len });
    }
    Ok(())
}

fn observable_at(fs: &[ObservableSpec], i: usize) -> &ObservableSpec {
    &fs[i.min(fs.len() - 1)]
}

/// Monte-Carlo estimate of
/// `μ(f_{k_1}⋯f_{k_ℓ}) − μ(f_{k_1}⋯f_{k_j}) μ(f_{k_{j+1}}⋯f_{k_ℓ})`
/// with `μ` Lebesgue and `f_k = f(x_k)` along `seq`. The standard error is
/// the delta-method one.
///
/// `fs` holds either one observable for every index or one per index.
pub fn correlation_functional<T: Real>(
    seq: &MapSequence<T>,
    fs: &[ObservableSpec],
    ks: &[usize],
    split: usize,
    samples: usize,
    seed: u64,
) -> Result<CorrelationEstimate<T>> {
    check_correlation_indices(fs, ks, split, seq.len())?;
    if samples < 2 {
        return Err(QdsError::Argument("correlation needs at least two samples".into()));
    }
    let alphas = seq.alphas();
    let last = ks[ks.len() - 1];
    let pairs: Vec<(f64, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut state = T::lit(sample_stream(seed, i as u64).random::<f64>());
            let (mut head, mut tail) = (1.0, 1.0);
            let mut next = 0;
            for step in 0..=last {
                if step > 0 {
                    state = PmMap::new_unchecked(alphas[step - 1]).apply(state);
                }
                while next < ks.len() && ks[next] == step {
                    let v = observable_at(fs, next).value(state).as_f64();
                    if next < split {
                        head *= v;
                    } else {
                        tail *= v;
                    }
                    next += 1;
                }
            }
            (head, tail)
        })
        .collect();

    let mf = samples as f64;
    let (mut sp, mut sq, mut spq) = (0.0, 0.0, 0.0);
    for &(p, q) in &pairs {
        sp += p;
        sq += q;
        spq += p * q;
    }
    let (ep, eq, epq) = (sp / mf, sq / mf, spq / mf);
    let value = epq - ep * eq;
    // influence function of E[PQ] − E[P]E[Q]
    let var = pairs
        .iter()
        .map(|&(p, q)| {
            let psi = p * q - eq * p - ep * q - (epq - 2.0 * ep * eq);
            psi * psi
        })
        .sum::<f64>()
        / (mf - 1.0);
    Ok(CorrelationEstimate {
        value: T::lit(value),
        std_error: T::lit((var / mf).sqrt()),
        head_mean: T::lit(ep),
        tail_mean: T::lit(eq),
    })
}

/// The same correlation through Ulam operators: push `h` to `k_1`, multiply
/// by `f`, push to `k_2`, … and pair with the last factor.
pub fn correlation_via_operators<T: Real>(
    seq: &MapSequence<T>,
    fs: &[ObservableSpec],
    ks: &[usize],
    split: usize,
    h: &GridDensity<T>,
    cache: &OperatorCache<T>,
) -> Result<T> {
    check_correlation_indices(fs, ks, split, seq.len())?;
    let alphas = seq.alphas();
    let n = h.n_cells();
    // expectation of Π f_i(x_{k_i}) over indices `range` of ks
    let chain = |range: std::ops::Range<usize>| -> Result<T> {
        let mut d = h.clone();
        let mut at = 0;
        let last = range.end - 1;
        for i in range {
            let f = observable_at(fs, i);
            d = compose_apply(&alphas[at..ks[i]], n, &d, cache)?;
            at = ks[i];
            if i == last {
                return Ok(d.integrate(|x| f.value(x)));
            }
            d = d.multiplied_by(|x| f.value(x));
        }
        unreachable!("empty correlation block")
    };
    let joint = chain(0..ks.len())?;
    let head = chain(0..split)?;
    let tail = chain(split..ks.len())?;
    Ok(joint - head * tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param_curve::{CurveSegment, SegmentKind};

    fn constant(alpha: f64, beta: f64) -> PiecewiseHolderCurve<f64> {
        PiecewiseHolderCurve::constant(alpha, beta).unwrap()
    }

    #[test]
    fn rho_and_phi() {
        assert_eq!(rho(0, 0.25), 1.0);
        assert_eq!(rho(1, 0.25), 1.0);
        assert!((rho(16, 0.25_f64) - 0.014_427_19).abs() < 1e-8);
        let expected = 1.0 / (16.0 * 16f64.ln().powi(2));
        assert!((phi::<f64>(16) - expected).abs() < 1e-15);
        assert_eq!(phi::<f64>(1), 1.0);
    }

    #[test]
    fn zeta_examples() {
        let x = ObservableSpec::affine(0.0, 1.0).unwrap();
        let z = zeta_n(&constant(0.0, 0.5), &x, 2, 0.1, &[0.0, 1.0]).unwrap();
        assert_eq!(z[0], 0.0);
        assert!((z[1] - 0.3).abs() < 1e-15);

        let c = ObservableSpec::constant(0.7).unwrap();
        let t = [0.0, 0.13, 0.5, 1.0];
        let z = zeta_n(&constant(0.3, 0.5), &c, 37, 0.42, &t).unwrap();
        for (zi, ti) in z.iter().zip(t) {
            assert_eq!(*zi, 0.7 * ti);
        }

        // half-step interpolation: n = 2, t = 3/4 covers x_1 fully and half of x_2
        let z = zeta_n(&constant(0.0, 0.5), &x, 2, 0.1, &[0.75]).unwrap();
        assert!((z[0] - (0.2 + 0.5 * 0.4) / 2.0).abs() < 1e-15);

        assert!(zeta_n(&constant(0.0, 0.5), &x, 2, 0.1, &[0.5, 0.2]).is_err());
        assert!(zeta_n(&constant(0.0, 0.5), &x, 0, 0.1, &[0.5]).is_err());
        assert!(zeta_n(&constant(0.0, 0.5), &x, 2, 1.5, &[0.5]).is_err());
    }

    #[test]
    fn zeta_at_one_is_a_birkhoff_average() {
        let f = ObservableSpec::cos_pi();
        let curve = constant(0.3, 0.5);
        let n = 500;
        let z = zeta_n(&curve, &f, n, 0.377, &[1.0]).unwrap()[0];
        let seq = MapSequence::new(vec![0.3; n], 0.5).unwrap();
        let orbit = seq.iterate(0.377, n).unwrap();
        let birkhoff = orbit[1..].iter().map(|&y| f.value(y)).sum::<f64>() / n as f64;
        assert_eq!(z, birkhoff);
    }

    #[test]
    fn limit_examples() {
        let cache = OperatorCache::new();
        let settings = ErgodicSettings { n_cells: 256, n_quad: 16 };
        let x = ObservableSpec::affine(0.0, 1.0).unwrap();
        let t = [0.0, 0.3, 0.55, 1.0];
        let z = limit_zeta(&constant(0.0, 0.5), &x, &settings, &t, &cache).unwrap();
        for (zi, ti) in z.iter().zip(t) {
            assert!((zi - ti / 2.0).abs() < 1e-12);
        }

        let curve = PiecewiseHolderCurve::new(
            vec![
                CurveSegment::new(0.0, 0.4, SegmentKind::Affine { start: 0.1, end: 0.3 }).unwrap(),
                CurveSegment::new(0.4, 1.0, SegmentKind::Constant { value: 0.45 }).unwrap(),
            ],
            1.0,
            0.5,
        )
        .unwrap();
        let c = ObservableSpec::constant(-2.0).unwrap();
        let z = limit_zeta(&curve, &c, &settings, &t, &cache).unwrap();
        for (zi, ti) in z.iter().zip(t) {
            assert_eq!(*zi, -2.0 * ti);
        }

        let z = limit_zeta(&curve, &x, &settings, &[0.2, 0.4, 0.7, 1.0], &cache).unwrap();
        assert!(z.windows(2).all(|w| w[1] >= w[0]));
        // additivity across the breakpoint: the constant stretch adds 0.6·μ̂_{0.45}(x)
        let tail = 0.6 * srb_mean(0.45, &x, 256, &cache).unwrap();
        assert!((z[3] - z[1] - tail).abs() < 1e-12);

        let coarse = ErgodicSettings { n_cells: 256, n_quad: 8 };
        assert!(limit_zeta(&curve, &x, &coarse, &t, &cache).is_err());
    }

    #[test]
    fn cache_quantization_moves_means_little() {
        let f = ObservableSpec::cos_pi();
        let a = crate::transfer_op::srb_density(&PmMap::<f64>::new(0.2).unwrap(), 1024, 1e-12, 1_000_000).unwrap();
        let b = crate::transfer_op::srb_density(&PmMap::new(0.200_05).unwrap(), 1024, 1e-12, 1_000_000).unwrap();
        let jump = (a.integrate(|x| f.value(x)) - b.integrate(|x| f.value(x))).abs();
        assert!(jump < 1e-3 * f.sup_norm(), "{jump}");
    }

    #[test]
    fn ensemble_constant_observable_is_exact() {
        let curve = constant(0.2, 0.25);
        let c = ObservableSpec::constant(3.0).unwrap();
        let t = default_t_grid::<f64>(50);
        let limit: Vec<f64> = t.iter().map(|&s| 3.0 * s).collect();
        let r = ensemble_sup_deviation(&curve, &c, 50, 16, 7, &t, &limit, &[0.01, 0.1]).unwrap();
        assert!(r.sup_devs.iter().all(|&d| d == 0.0));
        assert!(r.prob_exceed.iter().all(|&(_, p)| p == 0.0));
    }

    #[test]
    fn ensemble_is_deterministic_across_pools() {
        let curve = constant(0.2, 0.25);
        let f = ObservableSpec::cos_pi();
        let t = default_t_grid::<f64>(300);
        let limit = vec![0.0; t.len()];
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| ensemble_sup_deviation(&curve, &f, 300, 64, 99, &t, &limit, &[0.1, 0.05]).unwrap())
        };
        let a = run(1);
        assert_eq!(a, run(4));
        assert!(a.prob_exceed[0].1 >= a.prob_exceed[1].1);
        assert!(a.quantiles.min <= a.quantiles.median && a.quantiles.median <= a.quantiles.max);
    }

    #[test]
    fn eventual_monotonicity() {
        let levels = vec![vec![0.1, 0.5], vec![0.3, 0.4], vec![0.2, 0.45]];
        assert_eq!(eventually_monotone_fraction(&levels).unwrap(), 0.5);
        assert!(eventually_monotone_fraction::<f64>(&[]).is_err());
    }

    #[test]
    fn correlation_examples() {
        let seq = MapSequence::new(vec![0.25; 64], 0.25).unwrap();
        let one = ObservableSpec::constant(1.0).unwrap();
        let c = correlation_functional(&seq, &[one], &[0, 4], 1, 100, 1).unwrap();
        assert_eq!(c.value, 0.0);

        let f = ObservableSpec::affine(-0.5, 1.0).unwrap();
        let c = correlation_functional(&seq, std::slice::from_ref(&f), &[5, 5], 1, 10_000, 1).unwrap();
        assert!(c.value >= 0.0);
        assert!(c.std_error > 0.0);

        assert!(correlation_functional(&seq, std::slice::from_ref(&f), &[0], 1, 100, 1).is_err());
        assert!(correlation_functional(&seq, std::slice::from_ref(&f), &[0, 2, 3], 2, 100, 1).is_ok());
        assert!(correlation_functional(&seq, std::slice::from_ref(&f), &[0, 2, 3, 4], 2, 100, 1).is_err());
        assert!(correlation_functional(&seq, std::slice::from_ref(&f), &[3, 2], 1, 100, 1).is_err());
        assert!(correlation_functional(&seq, std::slice::from_ref(&f), &[0, 65], 1, 100, 1).is_err());
    }

    #[test]
    fn correlation_routes_agree() {
        let seq = MapSequence::new(vec![0.25; 40], 0.25).unwrap();
        let f = ObservableSpec::affine(-0.5, 1.0).unwrap();
        let cache = OperatorCache::new();
        let h = GridDensity::<f64>::uniform(2048);
        for ks in [[0usize, 2], [3, 7]] {
            let mc = correlation_functional(&seq, std::slice::from_ref(&f), &ks, 1, 200_000, 5).unwrap();
            let op = correlation_via_operators(&seq, std::slice::from_ref(&f), &ks, 1, &h, &cache).unwrap();
            assert!((mc.value - op).abs() <= 4.0 * mc.std_error + 1e-4, "{ks:?} {mc:?} {op}");
        }
    }
}
