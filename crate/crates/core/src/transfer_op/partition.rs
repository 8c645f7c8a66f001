//! Ulam's scheme on arbitrary interval partitions of `[0, 1]`.
//!
//! A uniform grid cannot see the slow escape from the neutral fixed point:
//! its first cell already has width `1/N`, so tails living below that scale
//! are lost after roughly `N^α/α` steps. Partitions graded geometrically
//! towards zero keep those tails. Functions on such partitions are handled
//! as cell masses `m_i = ∫_{I_i} f`, which the transition matrix moves
//! directly.

use crate::error::{QdsError, Result};
use crate::pm_map::PmMap;
use crate::Real;

/// Interval partition `0 = e_0 < e_1 < … < e_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<T> {
    edges: Vec<T>,
}

impl<T: Real> Partition<T> {
    pub fn from_edges(edges: Vec<T>) -> Result<Self> {
        if edges.len() < 3 {
            return Err(QdsError::Argument("a partition needs at least two cells".into()));
        }
        if edges[0] != T::zero() || edges[edges.len() - 1] != T::one() {
            return Err(QdsError::Argument("partition edges must run from 0 to 1".into()));
        }
        if edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(QdsError::Argument("partition edges must increase strictly".into()));
        }
        Ok(Self { edges })
    }

    pub fn uniform(n_cells: usize) -> Result<Self> {
        let nf = T::count(n_cells);
        Self::from_edges((0..=n_cells).map(|i| T::count(i) / nf).collect())
    }

    /// `n_cells` cells: `[0, smallest)`, then `geometric_cells` cells with a
    /// constant ratio up to `junction`, then uniform cells up to 1.
    pub fn graded(n_cells: usize, geometric_cells: usize, smallest: T, junction: T) -> Result<Self> {
        if !(smallest > T::zero() && smallest < junction && junction < T::one()) {
            return Err(QdsError::Argument(format!(
                "graded partition needs 0 < smallest < junction < 1, got {smallest}, {junction}"
            )));
        }
        if geometric_cells == 0 || geometric_cells + 2 > n_cells {
            return Err(QdsError::Argument(format!(
                "graded partition with {n_cells} cells cannot hold {geometric_cells} geometric cells"
            )));
        }
        let uniform_cells = n_cells - 1 - geometric_cells;
        let ratio = (junction / smallest).powf(T::one() / T::count(geometric_cells));
        let mut edges = Vec::with_capacity(n_cells + 1);
        edges.push(T::zero());
        for k in 0..geometric_cells {
            edges.push(smallest * ratio.powi(k as i32));
        }
        edges.push(junction);
        for k in 1..=uniform_cells {
            edges.push(junction + (T::one() - junction) * T::count(k) / T::count(uniform_cells));
        }
        let last = edges.len() - 1;
        edges[last] = T::one();
        Self::from_edges(edges)
    }

    pub fn n_cells(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[T] {
        &self.edges
    }

    pub fn width(&self, i: usize) -> T {
        self.edges[i + 1] - self.edges[i]
    }

    /// Cell masses `F(e_{i+1}) − F(e_i)` from an antiderivative `F`.
    pub fn masses_from_primitive(&self, primitive: impl Fn(T) -> T) -> Vec<T> {
        self.edges
            .windows(2)
            .map(|w| primitive(w[1]) - primitive(w[0]))
            .collect()
    }
}

/// Row-stochastic transition matrix `P[i][j] = m(I_i ∩ T⁻¹I_j)/m(I_i)` on a
/// general partition, acting on cell masses.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOperator<T> {
    alpha: T,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    weights: Vec<T>,
}

impl<T: Real> PartitionOperator<T> {
    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn n_cells(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .zip(&self.weights[span])
            .map(|(&j, &w)| (j as usize, w))
    }

    /// Pushes cell masses forward: `dst_j = Σ_i P[i][j] src_i`.
    pub fn push_masses(&self, src: &[T], dst: &mut [T]) {
        dst.iter_mut().for_each(|v| *v = T::zero());
        for (i, &m) in src.iter().enumerate() {
            if m == T::zero() {
                continue;
            }
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k] as usize;
                dst[j] = dst[j] + self.weights[k] * m;
            }
        }
    }

    /// `steps` applications of [`push_masses`](Self::push_masses).
    pub fn iterate_masses(&self, masses: &[T], steps: usize) -> Vec<T> {
        let mut cur = masses.to_vec();
        let mut next = vec![T::zero(); cur.len()];
        for _ in 0..steps {
            self.push_masses(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }
}

/// Builds the transition matrix of `map` on `partition`, with left preimages
/// of the edges computed to relative precision.
pub fn build_partition_ulam<T: Real>(map: &PmMap<T>, partition: &Partition<T>) -> Result<PartitionOperator<T>> {
    let edges = partition.edges();
    let n = partition.n_cells();
    let mut left = Vec::with_capacity(n + 1);
    for &e in &edges[..n] {
        left.push(map.left_preimage_relative(e)?);
    }
    left.push(T::lit(0.5));
    let (row_ptr, cols, weights) = transition_rows(map, edges, &left)?;
    Ok(PartitionOperator {
        alpha: map.alpha(),
        row_ptr,
        cols,
        weights,
    })
}

pub(crate) type Csr<T> = (Vec<usize>, Vec<u32>, Vec<T>);

/// Transition rows for a partition given the left-branch preimages of its
/// edges (`left[0] = 0`, `left[N] = 1/2`).
///
/// The preimage intervals of all cells under both branches are sorted along
/// `[0, 1]`; sweeping them against the cells gives each overlap length.
pub(crate) fn transition_rows<T: Real>(map: &PmMap<T>, edges: &[T], left: &[T]) -> Result<Csr<T>> {
    let n = edges.len() - 1;
    let half = T::lit(0.5);
    let mut pieces: Vec<(T, T, u32)> = Vec::with_capacity(2 * n);
    for j in 0..n {
        pieces.push((left[j], left[j + 1], j as u32));
    }
    for j in 0..n {
        let lo = if j == 0 { half } else { map.right_preimage(edges[j]) };
        let hi = if j + 1 == n { T::one() } else { map.right_preimage(edges[j + 1]) };
        pieces.push((lo, hi, j as u32));
    }

    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut cols = Vec::with_capacity(4 * n);
    let mut weights = Vec::with_capacity(4 * n);
    row_ptr.push(0);
    let mut p = 0;
    for i in 0..n {
        let (a, b) = (edges[i], edges[i + 1]);
        while p < pieces.len() && pieces[p].1 <= a {
            p += 1;
        }
        let row_start = cols.len();
        let mut q = p;
        while q < pieces.len() && pieces[q].0 < b {
            let (lo, hi, j) = pieces[q];
            let overlap = hi.min(b) - lo.max(a);
            if overlap > T::zero() {
                if cols.len() > row_start && cols[cols.len() - 1] == j {
                    let last = weights.len() - 1;
                    weights[last] = weights[last] + overlap;
                } else {
                    cols.push(j);
                    weights.push(overlap);
                }
            }
            q += 1;
        }
        let total: T = weights[row_start..].iter().copied().sum();
        if !(total > T::zero()) {
            return Err(QdsError::Argument(format!("transition row {i} has no mass")));
        }
        for w in &mut weights[row_start..] {
            *w = *w / total;
        }
        row_ptr.push(cols.len());
    }
    Ok((row_ptr, cols, weights))
}
