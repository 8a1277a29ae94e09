//! Gauss–Legendre rules.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock, RwLock};

/// Nodes and weights on [-1, 1], nodes increasing.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

fn compute(n: usize) -> GaussLegendre {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    GaussLegendre { nodes, weights }
}

/// Cached n-point rule; safe to call from many threads.
pub fn gauss_legendre(n: usize) -> Arc<GaussLegendre> {
    assert!(n >= 1, "Gauss-Legendre order must be positive");
    static CACHE: OnceLock<RwLock<HashMap<usize, Arc<GaussLegendre>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| RwLock::new(HashMap::new()));
    if let Some(rule) = cache.read().expect("cache lock").get(&n) {
        return rule.clone();
    }
    let rule = Arc::new(compute(n));
    cache.write().expect("cache lock").entry(n).or_insert(rule).clone()
}

impl GaussLegendre {
    /// Nodes and weights mapped to [a, b].
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(x, w)| (mid + half * x, half * w))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_exactly() {
        for n in [1, 2, 5, 16, 33, 160] {
            let rule = gauss_legendre(n);
            assert!((rule.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            let deg = 2 * n - 1;
            let got: f64 = rule.on_interval(0.0, 1.0).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "n = {n}");
            assert!(rule.nodes.windows(2).all(|p| p[0] < p[1]));
        }
    }

    #[test]
    fn smooth_integrand() {
        let got: f64 = gauss_legendre(20).on_interval(0.0, PI).map(|(x, w)| w * x.sin()).sum();
        assert!((got - 2.0).abs() < 1e-14);
    }
}
