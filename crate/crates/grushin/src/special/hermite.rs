//! Hermite functions in the L^2-orthonormal convention
//!
//!   h_0(u) = pi^(-1/4) exp(-u^2/2),
//!   h_{k+1}(u) = u sqrt(2/(k+1)) h_k(u) - sqrt(k/(k+1)) h_{k-1}(u),
//!
//! together with tensor products over several axes, the scaled family
//! h_{k,tau}(x) = tau^(d/4) prod_j h_{k_j}(sqrt(tau) x_j), and the closed-form
//! heat kernel of the harmonic oscillator -d^2/dx^2 + |x|^2.
//!
//! The recurrence acts on the normalized functions directly, so no
//! intermediate factorially-growing quantity appears and evaluation stays
//! finite well past k = 150.

use crate::error::{GrushinError, Result};

/// A multi-index k = (k_1, ..., k_d) of Hermite degrees along the x' axes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    entries: Vec<u32>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        assert!(!entries.is_empty(), "multi-index needs at least one entry");
        MultiIndex { entries }
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Total degree |k| = k_1 + ... + k_d.
    pub fn order(&self) -> u32 {
        self.entries.iter().sum()
    }

    /// Eigenvalue 2|k| + d of the d-dimensional harmonic oscillator on the
    /// Hermite function h_k.
    pub fn oscillator_eigenvalue(&self) -> f64 {
        (2 * self.order()) as f64 + self.dim() as f64
    }
}

impl std::fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, k) in self.entries.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of dimension `dim` with total degree at most `cutoff`,
/// in graded order (by |k|, then lexicographically with the first entry
/// largest). The order is deterministic; transform coefficients are stored
/// in this order.
pub fn enumerate_multi_indices(dim: usize, cutoff: u32) -> Vec<MultiIndex> {
    fn fill(dim: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if dim == 1 {
            prefix.push(degree);
            out.push(MultiIndex::new(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=degree).rev() {
            prefix.push(first);
            fill(dim - 1, degree - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..=cutoff {
        fill(dim, degree, &mut Vec::new(), &mut out);
    }
    out
}

/// Evaluates the 1-D Hermite function h_k(u).
pub fn hermite_1d(k: u32, u: f64) -> f64 {
    let h0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    if k == 0 {
        return h0;
    }
    let mut hm = h0;
    let mut h = u * std::f64::consts::SQRT_2 * h0;
    for j in 1..k {
        let jf = j as f64;
        let hp = u * (2.0 / (jf + 1.0)).sqrt() * h - (jf / (jf + 1.0)).sqrt() * hm;
        hm = h;
        h = hp;
    }
    h
}

/// Evaluates h_0(u), ..., h_kmax(u) in one recurrence sweep.
pub fn hermite_column(kmax: u32, u: f64, out: &mut [f64]) {
    assert_eq!(out.len(), kmax as usize + 1);
    out[0] = std::f64::consts::PI.powf(-0.25) * (-0.5 * u * u).exp();
    if kmax == 0 {
        return;
    }
    out[1] = u * std::f64::consts::SQRT_2 * out[0];
    for j in 1..kmax as usize {
        let jf = j as f64;
        out[j + 1] = u * (2.0 / (jf + 1.0)).sqrt() * out[j] - (jf / (jf + 1.0)).sqrt() * out[j - 1];
    }
}

/// Tensor-product Hermite function h_k(x) = prod_j h_{k_j}(x_j).
pub fn hermite_multi(k: &MultiIndex, x: &[f64]) -> f64 {
    assert_eq!(k.dim(), x.len(), "multi-index and point dimension differ");
    k.entries
        .iter()
        .zip(x)
        .map(|(&kj, &xj)| hermite_1d(kj, xj))
        .product()
}

/// Scaled Hermite function h_{k,tau}(x) = tau^(d/4) h_k(sqrt(tau) x).
///
/// The scale tau must be strictly positive; tau = 0 collapses the family
/// and is rejected.
pub fn hermite_scaled(k: &MultiIndex, tau: f64, x: &[f64]) -> Result<f64> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(GrushinError::InvalidArgument(format!(
            "hermite_scaled needs tau > 0, got {tau}"
        )));
    }
    let s = tau.sqrt();
    let scaled: Vec<f64> = x.iter().map(|&xj| s * xj).collect();
    Ok(tau.powf(k.dim() as f64 / 4.0) * hermite_multi(k, &scaled))
}

/// Closed-form heat kernel of the harmonic oscillator -Delta + |x|^2 on R^d:
///
///   G_t(x, y) = (2 pi sinh 2t)^(-d/2)
///               exp(-(|x+y|^2 tanh t + |x-y|^2 coth t) / 4),  t > 0.
pub fn hermite_heat_kernel_closed(t: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(GrushinError::InvalidArgument(format!(
            "heat kernel needs t > 0, got {t}"
        )));
    }
    if x.len() != y.len() {
        return Err(GrushinError::ShapeMismatch {
            expected: vec![x.len()],
            got: vec![y.len()],
        });
    }
    let d = x.len() as f64;
    let mut plus = 0.0;
    let mut minus = 0.0;
    for (&xj, &yj) in x.iter().zip(y) {
        plus += (xj + yj) * (xj + yj);
        minus += (xj - yj) * (xj - yj);
    }
    let log_pref = -0.5 * d * ((2.0 * std::f64::consts::PI).ln() + ln_sinh(2.0 * t));
    let expo = -0.25 * (plus * t.tanh() + minus / t.tanh());
    Ok((log_pref + expo).exp())
}

/// log(sinh z) for z > 0, stable for large z where sinh overflows.
pub fn ln_sinh(z: f64) -> f64 {
    assert!(z > 0.0, "ln_sinh needs z > 0, got {z}");
    if z > 20.0 {
        z - std::f64::consts::LN_2 + (-(2.0 * z)).exp().ln_1p()
    } else {
        z.sinh().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::composite_rule;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn seed_values() {
        assert_relative_eq!(
            hermite_1d(0, 0.0),
            std::f64::consts::PI.powf(-0.25),
            max_relative = 1e-15
        );
        assert_abs_diff_eq!(hermite_1d(1, 0.0), 0.0, epsilon = 1e-300);
    }

    #[test]
    fn recurrence_matches_extended_precision_value() {
        // h_25(0.7), evaluated with the same recurrence carried at 200-bit
        // precision and rounded to double.
        let expected = -0.287698103656262949171717;
        assert_relative_eq!(hermite_1d(25, 0.7), expected, max_relative = 1e-12);
    }

    #[test]
    fn parity() {
        for k in [0u32, 1, 2, 7, 24, 61] {
            for u in [0.3, 1.7, 4.2] {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                assert_relative_eq!(
                    hermite_1d(k, -u),
                    sign * hermite_1d(k, u),
                    max_relative = 1e-13
                );
            }
        }
    }

    #[test]
    fn column_matches_single_evaluations() {
        let mut col = vec![0.0; 81];
        hermite_column(80, 1.3, &mut col);
        for k in [0u32, 1, 5, 40, 80] {
            assert_relative_eq!(col[k as usize], hermite_1d(k, 1.3), max_relative = 1e-13);
        }
    }

    #[test]
    fn evaluation_stays_finite_past_k_150() {
        for k in [150u32, 200, 300] {
            for u in [0.0, 1.0, 10.0, 25.0] {
                assert!(hermite_1d(k, u).is_finite());
            }
        }
    }

    #[test]
    fn orthonormality_under_quadrature() {
        // <h_k, h_l> = delta_kl for k, l <= 40, Gauss-Legendre on [-30, 30].
        let rule = composite_rule(-30.0, 30.0, 0.5, 12);
        let kmax = 40u32;
        let cols: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&u| {
                let mut c = vec![0.0; kmax as usize + 1];
                hermite_column(kmax, u, &mut c);
                c
            })
            .collect();
        for k in 0..=kmax as usize {
            for l in k..=kmax as usize {
                let mut acc = 0.0;
                for (q, w) in rule.weights.iter().enumerate() {
                    acc += w * cols[q][k] * cols[q][l];
                }
                let expected = if k == l { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(acc, expected, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn sup_norm_bounded_up_to_k_100() {
        // sup_u |h_k(u)| is maximal at k = 0 (pi^(-1/4) ~ 0.7511) and decays
        // slowly in k; scan a dense grid covering all turning points.
        let mut overall: f64 = 0.0;
        for k in 0..=100u32 {
            let mut m: f64 = 0.0;
            let lim = (2.0 * k as f64 + 1.0).sqrt() + 4.0;
            let n = 4000;
            for i in 0..=n {
                let u = -lim + 2.0 * lim * i as f64 / n as f64;
                m = m.max(hermite_1d(k, u).abs());
            }
            overall = overall.max(m);
        }
        assert!(overall < 0.7512, "sup over k <= 100 was {overall}");
    }

    #[test]
    fn l1_norm_grows_like_k_quarter() {
        // ||h_k||_1 * k^(-1/4) stays in a narrow band for 10 <= k <= 100
        // (high-precision quadrature gives 1.512..1.653 over this range).
        for k in [10u32, 17, 25, 40, 63, 100] {
            let lim = (2.0 * k as f64 + 1.0).sqrt() + 8.0;
            let rule = composite_rule(-lim, lim, 0.2, 8);
            let l1 = rule.integrate(|u| hermite_1d(k, u).abs());
            let band = l1 * (k as f64).powf(-0.25);
            assert!(
                (1.4..=1.8).contains(&band),
                "k = {k}: ||h_k||_1 k^(-1/4) = {band}"
            );
        }
    }

    #[test]
    fn scaled_family_is_normalized() {
        // ||h_{k,tau}||_2 = 1 by the substitution u = sqrt(tau) x.
        for (k, tau) in [(0u32, 0.3f64), (3, 2.5), (12, 7.0)] {
            let idx = MultiIndex::new(vec![k]);
            let lim = ((2.0 * k as f64 + 1.0).sqrt() + 6.0) / tau.sqrt();
            let rule = composite_rule(-lim, lim, 0.1 / tau.sqrt().max(1.0), 10);
            let norm2 = rule.integrate(|x| {
                let v = hermite_scaled(&idx, tau, &[x]).unwrap();
                v * v
            });
            assert_relative_eq!(norm2, 1.0, max_relative = 1e-10);
        }
    }

    #[test]
    fn scaled_satisfies_oscillator_eigenrelation() {
        // (-d^2/du^2 + tau^2 u^2) h_{k,tau} = (2k+1) tau h_{k,tau},
        // checked with a centered second difference; residual is O(h^2).
        let idx = MultiIndex::new(vec![5]);
        let tau = 2.0;
        let lambda = idx.oscillator_eigenvalue() * tau;
        let point = 0.9;
        let mut errs = Vec::new();
        for h in [1e-2, 5e-3] {
            let f = |u: f64| hermite_scaled(&idx, tau, &[u]).unwrap();
            let lap = (f(point + h) - 2.0 * f(point) + f(point - h)) / (h * h);
            let lhs = -lap + tau * tau * point * point * f(point);
            errs.push((lhs - lambda * f(point)).abs());
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(
            (order - 2.0).abs() < 0.2,
            "eigenrelation FD order {order}, errors {errs:?}"
        );
    }

    #[test]
    fn rejects_degenerate_scale() {
        let idx = MultiIndex::new(vec![1]);
        assert!(hermite_scaled(&idx, 0.0, &[0.5]).is_err());
        assert!(hermite_scaled(&idx, -1.0, &[0.5]).is_err());
        assert!(hermite_scaled(&idx, f64::NAN, &[0.5]).is_err());
    }

    /// Series oracle: sum_k e^{-t(2k+1)} h_k(x) h_k(y), truncated once the
    /// geometric tail bound e^{-t(2K+3)} / (1 - e^{-2t}) drops below 1e-14.
    fn oscillator_kernel_series(t: f64, x: f64, y: f64) -> f64 {
        let mut acc = 0.0;
        let mut k = 0u32;
        loop {
            acc += (-t * (2.0 * k as f64 + 1.0)).exp() * hermite_1d(k, x) * hermite_1d(k, y);
            let tail = (-t * (2.0 * k as f64 + 3.0)).exp() / (1.0 - (-2.0 * t).exp());
            if tail < 1e-14 || k > 500 {
                break;
            }
            k += 1;
        }
        acc
    }

    #[test]
    fn closed_form_matches_series() {
        // 5x5 sample of (x, y) in [-2, 2]^2 for t in {0.1, 0.5, 2}.
        for t in [0.1, 0.5, 2.0] {
            for i in 0..5 {
                for j in 0..5 {
                    let x = -2.0 + i as f64;
                    let y = -2.0 + j as f64;
                    let closed = hermite_heat_kernel_closed(t, &[x], &[y]).unwrap();
                    let series = oscillator_kernel_series(t, x, y);
                    assert_abs_diff_eq!(closed, series, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn closed_form_multidim_frozen_value() {
        // t = 0.3, x = 1, y = -1/2 (200-bit reference), plus the product
        // structure over axes.
        let v = hermite_heat_kernel_closed(0.3, &[1.0], &[-0.5]).unwrap();
        assert_relative_eq!(v, 0.0711976021123481812903407, max_relative = 1e-13);
        let v2 = hermite_heat_kernel_closed(0.3, &[1.0, 1.0], &[-0.5, -0.5]).unwrap();
        assert_relative_eq!(v2, v * v, max_relative = 1e-12);
    }

    #[test]
    fn closed_form_is_symmetric_and_positive() {
        for t in [0.05, 1.0, 12.0] {
            let a = hermite_heat_kernel_closed(t, &[1.3, -0.4], &[0.2, 2.0]).unwrap();
            let b = hermite_heat_kernel_closed(t, &[0.2, 2.0], &[1.3, -0.4]).unwrap();
            assert!(a > 0.0);
            assert_relative_eq!(a, b, max_relative = 1e-14);
        }
    }

    #[test]
    fn large_time_stays_finite() {
        // sinh(2t) overflows near t = 355 if handled naively.
        let v = hermite_heat_kernel_closed(400.0, &[0.5], &[0.25]).unwrap();
        assert!(v.is_finite());
        assert!(v >= 0.0);
    }

    #[test]
    fn multi_index_enumeration_graded() {
        let list = enumerate_multi_indices(2, 2);
        let expected: Vec<Vec<u32>> = vec![
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![2, 0],
            vec![1, 1],
            vec![0, 2],
        ];
        let got: Vec<Vec<u32>> = list.iter().map(|m| m.entries().to_vec()).collect();
        assert_eq!(got, expected);
        assert_eq!(enumerate_multi_indices(1, 64).len(), 65);
        assert_eq!(enumerate_multi_indices(3, 4).len(), 35);
    }

    #[test]
    fn oscillator_eigenvalue_formula() {
        let k = MultiIndex::new(vec![3, 0]);
        assert_eq!(k.oscillator_eigenvalue(), 8.0);
        let k = MultiIndex::new(vec![0]);
        assert_eq!(k.oscillator_eigenvalue(), 1.0);
    }
}
