//! Quadrature building blocks: Gauss-Legendre rules on [-1, 1], composite
//! panel rules on finite intervals, and trapezoid weights for uniform grids.

use std::collections::HashMap;
use std::sync::Mutex;
use std::sync::OnceLock;

/// Nodes and weights of an n-point Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Builds the rule by Newton iteration on the Legendre polynomial P_n,
    /// starting from the Chebyshev-angle estimates of its roots.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-15 {
                    break;
                }
            }
            // One clean-up iteration to settle the last bit.
            let (p, d) = legendre_with_derivative(n, x);
            x -= p / d;
            let dp = legendre_with_derivative(n, x).1;
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

    /// Cached rule shared across callers.
    pub fn cached(n: usize) -> std::sync::Arc<GaussLegendre> {
        static CACHE: OnceLock<Mutex<HashMap<usize, std::sync::Arc<GaussLegendre>>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("quadrature cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| std::sync::Arc::new(GaussLegendre::new(n)))
            .clone()
    }

    /// Integrates `f` over [a, b] with this rule mapped affinely.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = 0.0;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += w * f(mid + half * x);
        }
        acc * half
    }
}

/// Evaluates (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A fixed set of nodes/weights on a finite interval, assembled from
/// equal-width Gauss-Legendre panels. Panel width is capped so that
/// oscillatory factors stay resolved; see `composite_rule`.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(*x))
            .sum()
    }
}

/// Builds a composite Gauss-Legendre rule on [a, b] with panels no wider
/// than `max_panel` and `nodes_per_panel` nodes each.
pub fn composite_rule(a: f64, b: f64, max_panel: f64, nodes_per_panel: usize) -> CompositeRule {
    assert!(b > a, "empty interval [{a}, {b}]");
    assert!(max_panel > 0.0);
    let n_panels = ((b - a) / max_panel).ceil().max(1.0) as usize;
    let width = (b - a) / n_panels as f64;
    let base = GaussLegendre::cached(nodes_per_panel);
    let mut nodes = Vec::with_capacity(n_panels * nodes_per_panel);
    let mut weights = Vec::with_capacity(n_panels * nodes_per_panel);
    for p in 0..n_panels {
        let lo = a + p as f64 * width;
        let mid = lo + 0.5 * width;
        let half = 0.5 * width;
        for (x, w) in base.nodes.iter().zip(&base.weights) {
            nodes.push(mid + half * x);
            weights.push(w * half);
        }
    }
    CompositeRule { nodes, weights }
}

/// Trapezoid weights for a uniform closed grid with spacing `dx`:
/// dx everywhere, dx/2 at the two endpoints.
pub fn trapezoid_weights(n: usize, dx: f64) -> Vec<f64> {
    assert!(n >= 2);
    let mut w = vec![dx; n];
    w[0] = 0.5 * dx;
    w[n - 1] = 0.5 * dx;
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn five_point_rule_matches_reference() {
        // Abramowitz & Stegun 25.4.30, n = 5.
        let rule = GaussLegendre::new(5);
        let x = 0.906179845938664;
        let w = 0.236926885056189;
        assert_relative_eq!(rule.nodes[4], x, max_relative = 1e-14);
        assert_relative_eq!(rule.nodes[0], -x, max_relative = 1e-14);
        assert_relative_eq!(rule.weights[0], w, max_relative = 1e-13);
        assert_relative_eq!(rule.weights[2], 0.568888888888889, max_relative = 1e-13);
        assert_relative_eq!(rule.nodes[2], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn polynomial_exactness() {
        // n-point Gauss-Legendre is exact through degree 2n-1.
        let rule = GaussLegendre::new(8);
        let val = rule.integrate(-1.0, 1.0, |x| x.powi(14));
        assert_relative_eq!(val, 2.0 / 15.0, max_relative = 1e-13);
        let val = rule.integrate(0.0, 2.0, |x| 3.0 * x * x);
        assert_relative_eq!(val, 8.0, max_relative = 1e-13);
    }

    #[test]
    fn weights_sum_to_interval_length() {
        for n in [2, 3, 7, 16, 24, 64] {
            let rule = GaussLegendre::new(n);
            let total: f64 = rule.weights.iter().sum();
            assert_relative_eq!(total, 2.0, max_relative = 1e-13);
        }
    }

    #[test]
    fn composite_rule_integrates_oscillatory_gaussian() {
        // exp(-x^2/2) cos(8x) over [-10, 10]; exact value sqrt(2 pi) exp(-32).
        let rule = composite_rule(-10.0, 10.0, 0.25, 12);
        let val = rule.integrate(|x| (-0.5 * x * x).exp() * (8.0 * x).cos());
        let exact = (2.0 * std::f64::consts::PI).sqrt() * (-32.0f64).exp();
        assert_relative_eq!(val, exact, max_relative = 1e-10);
    }

    #[test]
    fn trapezoid_weights_shape() {
        let w = trapezoid_weights(5, 0.5);
        assert_eq!(w, vec![0.25, 0.5, 0.5, 0.5, 0.25]);
        let total: f64 = w.iter().sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-15);
    }
}
