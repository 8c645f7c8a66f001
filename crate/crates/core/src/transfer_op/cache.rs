use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::density::GridDensity;
use super::ulam::{build_ulam, UlamOperator};
use super::{srb_from_operator, DEFAULT_SRB_MAX_ITER, DEFAULT_SRB_TOL};
use crate::error::Result;
use crate::pm_map::PmMap;
use crate::Real;

/// Parameter resolution of the cache: `α` is rounded to a multiple of this.
pub const ALPHA_QUANTUM: f64 = 1e-4;

type Key = (i64, usize);

/// Concurrent cache of Ulam operators and their SRB densities keyed by
/// `(α rounded to 1e-4, N)`. Cached objects are built at the rounded `α`,
/// so a key always determines its value.
#[derive(Debug)]
pub struct OperatorCache<T> {
    ops: RwLock<HashMap<Key, Arc<UlamOperator<T>>>>,
    srbs: RwLock<HashMap<Key, Arc<GridDensity<T>>>>,
    capacity: usize,
    srb_tol: T,
    srb_max_iter: usize,
}

impl<T: Real> Default for OperatorCache<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> OperatorCache<T> {
    pub fn new() -> Self {
        Self::with_settings(4096, T::lit(DEFAULT_SRB_TOL), DEFAULT_SRB_MAX_ITER)
    }

    /// `capacity` bounds the number of stored operators; past it, builds are
    /// returned without being stored.
    pub fn with_settings(capacity: usize, srb_tol: T, srb_max_iter: usize) -> Self {
        Self {
            ops: RwLock::new(HashMap::new()),
            srbs: RwLock::new(HashMap::new()),
            capacity,
            srb_tol,
            srb_max_iter,
        }
    }

    pub fn quantize(alpha: T) -> i64 {
        (alpha.as_f64() / ALPHA_QUANTUM).round() as i64
    }

    /// The parameter an `alpha` is actually evaluated at.
    pub fn quantized_alpha(alpha: T) -> T {
        T::lit(Self::quantize(alpha) as f64 * ALPHA_QUANTUM)
    }

    pub fn srb_tol(&self) -> T {
        self.srb_tol
    }

    pub fn srb_max_iter(&self) -> usize {
        self.srb_max_iter
    }

    pub fn operator(&self, alpha: T, n_cells: usize) -> Result<Arc<UlamOperator<T>>> {
        let key = (Self::quantize(alpha), n_cells);
        if let Some(op) = self.ops.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(op));
        }
        let map = PmMap::new(Self::quantized_alpha(alpha))?;
        let op = Arc::new(build_ulam(&map, n_cells)?);
        let mut guard = self.ops.write().expect("cache lock poisoned");
        if guard.len() >= self.capacity && !guard.contains_key(&key) {
            return Ok(op);
        }
        Ok(Arc::clone(guard.entry(key).or_insert(op)))
    }

    /// SRB density of the quantized `alpha` on `n_cells` cells.
    pub fn srb(&self, alpha: T, n_cells: usize) -> Result<Arc<GridDensity<T>>> {
        let key = (Self::quantize(alpha), n_cells);
        if let Some(d) = self.srbs.read().expect("cache lock poisoned").get(&key) {
            return Ok(Arc::clone(d));
        }
        let op = self.operator(alpha, n_cells)?;
        let d = Arc::new(srb_from_operator(&op, self.srb_tol, self.srb_max_iter)?);
        let mut guard = self.srbs.write().expect("cache lock poisoned");
        Ok(Arc::clone(guard.entry(key).or_insert(d)))
    }

    pub fn len(&self) -> usize {
        self.ops.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rayon::prelude::*;

    #[test]
    fn quantization() {
        assert_eq!(OperatorCache::<f64>::quantize(0.25), 2500);
        assert_eq!(OperatorCache::<f64>::quantize(0.250_04), 2500);
        assert_eq!(OperatorCache::<f64>::quantize(0.250_06), 2501);
        assert!((OperatorCache::<f64>::quantized_alpha(0.123_456) - 0.1235).abs() < 1e-15);
    }

    #[test]
    fn shares_operators_for_nearby_alphas() {
        let cache = OperatorCache::<f64>::new();
        let a = cache.operator(0.2, 64).unwrap();
        let b = cache.operator(0.200_01, 64).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        let c = cache.operator(0.2, 128).unwrap();
        assert_eq!(c.n_cells(), 128);
        assert_eq!(cache.len(), 2);
    }

    #[test]
    fn concurrent_use_is_consistent() {
        let cache = OperatorCache::<f64>::new();
        let masses: Vec<f64> = (0..32)
            .into_par_iter()
            .map(|i| cache.srb(0.1 + 0.01 * (i % 4) as f64, 128).unwrap().mass())
            .collect();
        assert!(masses.iter().all(|m| (m - 1.0).abs() < 1e-12));
        assert_eq!(cache.len(), 4);
    }

    #[test]
    fn capacity_limits_storage() {
        let cache = OperatorCache::<f64>::with_settings(1, 1e-10, 1000);
        cache.operator(0.1, 32).unwrap();
        let op = cache.operator(0.2, 32).unwrap();
        assert_eq!(op.alpha(), 0.2);
        assert_eq!(cache.len(), 1);
    }
}
