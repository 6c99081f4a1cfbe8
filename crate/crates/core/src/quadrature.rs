//! Gauss–Laguerre quadrature.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights of an `n`-point rule for `∫₀^∞ f(x) e^{−x} dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaguerreRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl LaguerreRule {
    /// Golub–Welsch starting nodes, Newton-polished on `L_n`, with weights
    /// `x/((n+1)² L_{n+1}(x)²)` taken in the log domain so tiny weights stay
    /// accurate instead of drowning in eigenvector round-off.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "rule needs at least one node");
        let jacobi = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (2 * i + 1) as f64
            } else if i.abs_diff(j) == 1 {
                i.max(j) as f64
            } else {
                0.0
            }
        });
        let mut nodes: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
        nodes.sort_by(f64::total_cmp);
        let mut weights: Vec<f64> = nodes
            .iter_mut()
            .map(|x| {
                for _ in 0..3 {
                    let (ln, ln_1, _) = laguerre_scaled(n, *x);
                    // x·L_n' = n(L_n − L_{n−1})
                    let step = *x * ln / (n as f64 * (ln - ln_1));
                    if step.is_finite() {
                        *x -= step;
                    }
                }
                let (_, _, log_next) = laguerre_scaled(n, *x);
                (x.ln() - 2.0 * ((n + 1) as f64).ln() - 2.0 * log_next).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Self { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * f(x) })
            .sum()
    }
}

/// `(L_n(x), L_{n−1}(x))` up to a common positive factor, and `ln|L_{n+1}(x)|`.
fn laguerre_scaled(n: usize, x: f64) -> (f64, f64, f64) {
    const BIG: f64 = 1e100;
    // (L_{k−1}, L_k, L_{k+1}) sharing the factor e^{−log_scale}
    let (mut lm1, mut l, mut lp1) = (0.0, 1.0, 1.0 - x);
    let mut log_scale = 0.0;
    for k in 1..=n {
        let next = (((2 * k + 1) as f64 - x) * lp1 - k as f64 * l) / (k + 1) as f64;
        (lm1, l, lp1) = (l, lp1, next);
        if lp1.abs() > BIG {
            lm1 /= BIG;
            l /= BIG;
            lp1 /= BIG;
            log_scale += BIG.ln();
        }
    }
    (l, lm1, lp1.abs().ln() + log_scale)
}

/// Shared, lazily built rule of the given order.
pub fn laguerre_rule(n: usize) -> Arc<LaguerreRule> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<LaguerreRule>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return Arc::clone(rule);
    }
    let rule = Arc::new(LaguerreRule::new(n));
    cache
        .lock()
        .unwrap()
        .entry(n)
        .or_insert(rule)
        .clone()
}
