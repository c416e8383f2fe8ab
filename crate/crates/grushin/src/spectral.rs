//! Spectral multipliers on the transform side and their physical-space
//! functional calculus, plus the discrete operators and lattice symmetries
//! used to validate them.
//!
//! The transform diagonalizes G = -laplacian_{x'} - |x'|^2 laplacian_{x''}
//! with joint spectrum theta(k, xi'') = (2|k| + d') |xi''|. A symbol Phi
//! acts entrywise through theta; the zero-frequency slice sits at theta = 0
//! and is scaled by Phi(0).

use crate::config::GrushinConfig;
use crate::error::{GrushinError, Result};
use crate::grid::{DualCoefficients, GridFunction};
use crate::special::{hermite_scaled, MultiIndex};
use crate::transform::TransformPlan;
use num_complex::Complex64;
use std::sync::Arc;

/// Joint eigenvalue of the diagonalized operator at (k, xi'').
pub fn theta(k: &MultiIndex, xi: &[f64]) -> f64 {
    let tau = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
    k.oscillator_eigenvalue() * tau
}

/// A function of the operator, applied through the joint spectrum.
#[derive(Clone)]
pub struct SpectralSymbol {
    name: String,
    bounded: bool,
    phi: Arc<dyn Fn(f64) -> Complex64 + Send + Sync>,
}

impl SpectralSymbol {
    pub fn from_fn<F>(name: &str, bounded: bool, phi: F) -> Self
    where
        F: Fn(f64) -> Complex64 + Send + Sync + 'static,
    {
        SpectralSymbol {
            name: name.to_string(),
            bounded,
            phi: Arc::new(phi),
        }
    }

    pub fn identity() -> Self {
        Self::from_fn("identity", true, |_| Complex64::new(1.0, 0.0))
    }

    /// Heat semigroup multiplier exp(-t lambda), t >= 0.
    pub fn heat(t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(GrushinError::InvalidArgument(format!(
                "heat symbol needs t >= 0, got {t}"
            )));
        }
        Ok(Self::from_fn(&format!("heat[t={t}]"), true, move |lam| {
            Complex64::new((-t * lam).exp(), 0.0)
        }))
    }

    /// Indicator of [0, cutoff]: the spectral projection.
    pub fn projection(cutoff: f64) -> Result<Self> {
        if !(cutoff >= 0.0) || !cutoff.is_finite() {
            return Err(GrushinError::InvalidArgument(format!(
                "projection symbol needs cutoff >= 0, got {cutoff}"
            )));
        }
        Ok(Self::from_fn(
            &format!("projection[{cutoff}]"),
            true,
            move |lam| {
                if lam <= cutoff {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            },
        ))
    }

    /// The operator itself: Phi(lambda) = lambda (unbounded).
    pub fn theta_multiplier() -> Self {
        Self::from_fn("theta", false, |lam| Complex64::new(lam, 0.0))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn is_bounded(&self) -> bool {
        self.bounded
    }

    pub fn eval(&self, lambda: f64) -> Complex64 {
        (self.phi)(lambda)
    }
}

/// Multiply transform-side coefficients by Phi(theta(k, xi'')). The zero
/// slice is scaled by Phi(0).
pub fn apply_symbol(
    plan: &TransformPlan,
    dual: &DualCoefficients,
    symbol: &SpectralSymbol,
) -> Result<DualCoefficients> {
    if dual.values().shape() != plan.config().dual_shape().as_slice() {
        return Err(GrushinError::ShapeMismatch {
            expected: plan.config().dual_shape(),
            got: dual.values().shape().to_vec(),
        });
    }
    let mut out = dual.clone();
    let indices = plan.multi_indices();
    let q_total: usize = out.values().shape()[1..].iter().product();
    {
        let values = out.values_mut().as_slice_mut().expect("standard layout");
        for (ki, k) in indices.iter().enumerate() {
            let eig = k.oscillator_eigenvalue();
            for q in 0..q_total {
                let lam = eig * plan.frequency_radius(q);
                let factor = symbol.eval(lam);
                values[ki * q_total + q] *= factor;
            }
        }
    }
    let at_zero = symbol.eval(0.0);
    for v in out.zero_slice_mut().iter_mut() {
        *v *= at_zero;
    }
    Ok(out)
}

/// Phi(G) f in physical space: forward transform, symbol, inverse.
pub fn functional_calculus(
    plan: &TransformPlan,
    f: &GridFunction,
    symbol: &SpectralSymbol,
) -> Result<GridFunction> {
    let dual = plan.forward(f)?;
    let scaled = apply_symbol(plan, &dual, symbol)?;
    plan.inverse(&scaled)
}

/// Heat semigroup exp(-t G) f.
pub fn heat_semigroup(plan: &TransformPlan, f: &GridFunction, t: f64) -> Result<GridFunction> {
    functional_calculus(plan, f, &SpectralSymbol::heat(t)?)
}

/// Graph-norm component ||theta . (transform f)||: finite exactly when f is
/// in the discrete domain of the operator.
pub fn theta_graph_norm(plan: &TransformPlan, dual: &DualCoefficients) -> Result<f64> {
    let scaled = apply_symbol(plan, dual, &SpectralSymbol::theta_multiplier())?;
    Ok(scaled.dual_norm())
}

/// Pointwise eigenfunction value psi_{k, xi0}(x', x'') =
/// (2 pi)^{-d''/2} h_{k,|xi0|}(x') exp(-i x'' . xi0).
pub fn eigenmode_pointwise(k: &MultiIndex, xi0: &[f64], xp: &[f64], xpp: &[f64]) -> Result<Complex64> {
    let tau = xi0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let h = hermite_scaled(k, tau, xp)?;
    let phase: f64 = -xpp.iter().zip(xi0.iter()).map(|(x, xi)| x * xi).sum::<f64>();
    let norm = (2.0 * std::f64::consts::PI).powf(-(xi0.len() as f64) / 2.0);
    Ok(Complex64::from_polar(norm * h, phase))
}

/// The eigenfunction sampled on the grid.
pub fn eigenmode(
    config: Arc<GrushinConfig>,
    k: &MultiIndex,
    xi0: &[f64],
) -> Result<GridFunction> {
    if k.dim() != config.d_prime || xi0.len() != config.d_doubleprime {
        return Err(GrushinError::InvalidArgument(format!(
            "eigenmode dimensions (|k| in R^{}, xi0 in R^{}) do not match config ({}, {})",
            k.dim(),
            xi0.len(),
            config.d_prime,
            config.d_doubleprime
        )));
    }
    let k = k.clone();
    let xi0 = xi0.to_vec();
    GridFunction::sample(config, move |xp, xpp| {
        eigenmode_pointwise(&k, &xi0, xp, xpp).expect("valid eigenmode parameters")
    })
}

/// G f by centered second differences: periodic wrap along x''-axes,
/// shifted one-sided stencils at the two ends of each x'-axis (test
/// functions decay there, so the low-order boundary rows are dark).
pub fn grushin_fd(f: &GridFunction) -> GridFunction {
    let cfg = f.config().clone();
    let dp = cfg.d_prime;
    let dpp = cfg.d_doubleprime;
    let shape = cfg.shape();
    let total: usize = shape.iter().product();
    let mut strides = vec![1usize; shape.len()];
    for a in (0..shape.len() - 1).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let src = f.values().as_slice().expect("standard layout");
    let axis = cfg.x_prime_axis();
    let hx2 = cfg.dx_prime() * cfg.dx_prime();
    let hy2 = cfg.dx_doubleprime() * cfg.dx_doubleprime();
    let n_p = cfg.x_prime_grid.points;
    let n_pp = cfg.x_doubleprime_grid.points;

    let mut out = GridFunction::zeros(cfg.clone());
    {
        let dst = out.values_mut().as_slice_mut().expect("standard layout");
        for p in 0..total {
            // Decode per-axis indices and |x'|^2.
            let mut rem = p;
            let mut idx = vec![0usize; shape.len()];
            for a in (0..shape.len()).rev() {
                idx[a] = rem % shape[a];
                rem /= shape[a];
            }
            let mut xp_sq = 0.0;
            for a in 0..dp {
                let x = axis[idx[a]];
                xp_sq += x * x;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for a in 0..dp {
                let i = idx[a];
                let s = strides[a];
                let d2 = if i == 0 {
                    src[p] - 2.0 * src[p + s] + src[p + 2 * s]
                } else if i == n_p - 1 {
                    src[p] - 2.0 * src[p - s] + src[p - 2 * s]
                } else {
                    src[p - s] - 2.0 * src[p] + src[p + s]
                };
                acc -= d2 / hx2;
            }
            for b in 0..dpp {
                let a = dp + b;
                let j = idx[a];
                let s = strides[a];
                let up = if j + 1 == n_pp { p - (n_pp - 1) * s } else { p + s };
                let dn = if j == 0 { p + (n_pp - 1) * s } else { p - s };
                let d2 = src[dn] - 2.0 * src[p] + src[up];
                acc -= xp_sq * d2 / hy2;
            }
            dst[p] = acc;
        }
    }
    out
}

/// A signed coordinate permutation preserving the product grid: axes may be
/// permuted within the x'-block and within the x''-block, each optionally
/// reflected. These commute with the operator (both pieces of G are
/// invariant under them).
#[derive(Clone, Debug)]
pub struct GridSymmetry {
    /// Output x'-axis a reads from input x'-axis xp_map[a].0, reflected
    /// when .1 is set.
    xp_map: Vec<(usize, bool)>,
    xpp_map: Vec<(usize, bool)>,
}

impl GridSymmetry {
    pub fn new(xp_map: Vec<(usize, bool)>, xpp_map: Vec<(usize, bool)>) -> Result<Self> {
        for (map, label) in [(&xp_map, "x'"), (&xpp_map, "x''")] {
            let mut seen = vec![false; map.len()];
            for &(src, _) in map.iter() {
                if src >= map.len() || seen[src] {
                    return Err(GrushinError::InvalidArgument(format!(
                        "invalid {label}-axis permutation {map:?}"
                    )));
                }
                seen[src] = true;
            }
        }
        Ok(GridSymmetry { xp_map, xpp_map })
    }

    pub fn identity(dp: usize, dpp: usize) -> Self {
        GridSymmetry {
            xp_map: (0..dp).map(|a| (a, false)).collect(),
            xpp_map: (0..dpp).map(|a| (a, false)).collect(),
        }
    }

    pub fn flip_x_prime(dp: usize, dpp: usize, axis: usize) -> Self {
        let mut s = Self::identity(dp, dpp);
        s.xp_map[axis].1 = true;
        s
    }

    pub fn flip_x_doubleprime(dp: usize, dpp: usize, axis: usize) -> Self {
        let mut s = Self::identity(dp, dpp);
        s.xpp_map[axis].1 = true;
        s
    }

    pub fn swap_x_prime(dp: usize, dpp: usize, a: usize, b: usize) -> Self {
        let mut s = Self::identity(dp, dpp);
        s.xp_map.swap(a, b);
        s
    }

    /// Pull back f along the symmetry: (S f)(x) = f(S^{-1} x) on the lattice.
    /// The closed x'-axis reflects as i -> N'-1-i; the periodic x''-axis as
    /// j -> (N''-j) mod N'' (the left endpoint -L'' is its own mirror).
    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let cfg = f.config().clone();
        if self.xp_map.len() != cfg.d_prime || self.xpp_map.len() != cfg.d_doubleprime {
            return Err(GrushinError::InvalidArgument(
                "symmetry dimensions do not match config".into(),
            ));
        }
        let shape = cfg.shape();
        let total: usize = shape.iter().product();
        let mut strides = vec![1usize; shape.len()];
        for a in (0..shape.len() - 1).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        let n_p = cfg.x_prime_grid.points;
        let n_pp = cfg.x_doubleprime_grid.points;
        let src = f.values().as_slice().expect("standard layout");
        let mut out = GridFunction::zeros(cfg.clone());
        {
            let dst = out.values_mut().as_slice_mut().expect("standard layout");
            for p in 0..total {
                let mut rem = p;
                let mut idx = vec![0usize; shape.len()];
                for a in (0..shape.len()).rev() {
                    idx[a] = rem % shape[a];
                    rem /= shape[a];
                }
                let mut sp = 0usize;
                for a in 0..cfg.d_prime {
                    let (srca, flip) = self.xp_map[a];
                    let i = if flip { n_p - 1 - idx[a] } else { idx[a] };
                    sp += i * strides[srca];
                }
                for b in 0..cfg.d_doubleprime {
                    let (srcb, flip) = self.xpp_map[b];
                    let j = if flip { (n_pp - idx[cfg.d_prime + b]) % n_pp } else { idx[cfg.d_prime + b] };
                    sp += j * strides[cfg.d_prime + srcb];
                }
                dst[p] = src[sp];
            }
        }
        Ok(out)
    }
}

/// Parabolic dilation rho_r f(x', x'') = r^{D/2} f(r x', r^2 x'') restricted
/// to the lattice. Exact on-grid when r is a positive integer and N' is odd
/// (so r x' lands on x'-nodes); x'-points carried outside the box read 0
/// (callers use decaying functions), x''-arguments wrap periodically.
pub fn parabolic_dilation(f: &GridFunction, r: u32) -> Result<GridFunction> {
    let cfg = f.config().clone();
    if r == 0 {
        return Err(GrushinError::InvalidArgument("dilation factor must be positive".into()));
    }
    let n_p = cfg.x_prime_grid.points;
    if r > 1 && n_p % 2 == 0 {
        return Err(GrushinError::InvalidArgument(
            "dilation needs an odd x'-point count so scaled nodes stay on-grid".into(),
        ));
    }
    let shape = cfg.shape();
    let total: usize = shape.iter().product();
    let mut strides = vec![1usize; shape.len()];
    for a in (0..shape.len() - 1).rev() {
        strides[a] = strides[a + 1] * shape[a + 1];
    }
    let n_pp = cfg.x_doubleprime_grid.points;
    let d = cfg.homogeneous_dimension as i32;
    let amp = (r as f64).powi(d).sqrt();
    let r = r as i64;
    let r2 = r * r;
    let src = f.values().as_slice().expect("standard layout");
    let mut out = GridFunction::zeros(cfg.clone());
    {
        let dst = out.values_mut().as_slice_mut().expect("standard layout");
        let mid_p = (n_p as i64 - 1) / 2;
        let mid_pp = n_pp as i64 / 2;
        'point: for p in 0..total {
            let mut rem = p;
            let mut idx = vec![0usize; shape.len()];
            for a in (0..shape.len()).rev() {
                idx[a] = rem % shape[a];
                rem /= shape[a];
            }
            let mut sp = 0usize;
            for a in 0..cfg.d_prime {
                let i = mid_p + r * (idx[a] as i64 - mid_p);
                if i < 0 || i >= n_p as i64 {
                    dst[p] = Complex64::new(0.0, 0.0);
                    continue 'point;
                }
                sp += i as usize * strides[a];
            }
            for b in 0..cfg.d_doubleprime {
                let a = cfg.d_prime + b;
                let j = (mid_pp + r2 * (idx[a] as i64 - mid_pp)).rem_euclid(n_pp as i64);
                sp += j as usize * strides[a];
            }
            dst[p] = amp * src[sp];
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AxisGrid;
    use approx::assert_relative_eq;

    fn desk_plan() -> (Arc<GrushinConfig>, TransformPlan) {
        let cfg = Arc::new(GrushinConfig::desk_default());
        let plan = TransformPlan::new(cfg.clone()).unwrap();
        (cfg, plan)
    }

    fn band_limited(cfg: &Arc<GrushinConfig>, plan: &TransformPlan) -> GridFunction {
        let n = cfg.x_doubleprime_grid.points;
        let mut dual = crate::grid::DualCoefficients::zeros(cfg.clone());
        for &(k, m, re, im) in &[
            (0usize, 6i64, 0.9, -0.1),
            (2, -9, 0.4, 0.7),
            (5, 12, -0.3, 0.2),
            (11, -4, 0.1, -0.8),
        ] {
            dual.values_mut()[[k, (n as i64 / 2 + m) as usize]] = Complex64::new(re, im);
        }
        plan.inverse(&dual).unwrap()
    }

    #[test]
    fn theta_formula() {
        let k = MultiIndex::new(vec![2]);
        assert_relative_eq!(theta(&k, &[0.5]), 2.5, max_relative = 1e-15);
        let k2 = MultiIndex::new(vec![1, 3]);
        assert_relative_eq!(theta(&k2, &[3.0, 4.0]), 50.0, max_relative = 1e-15);
    }

    #[test]
    fn identity_and_zero_time_heat_are_neutral() {
        let (cfg, plan) = desk_plan();
        let f = band_limited(&cfg, &plan);
        let id = functional_calculus(&plan, &f, &SpectralSymbol::identity()).unwrap();
        assert!(id.rel_l2_distance(&f).unwrap() < 1e-11);
        let h0 = heat_semigroup(&plan, &f, 0.0).unwrap();
        assert!(h0.rel_l2_distance(&f).unwrap() < 1e-11);
    }

    #[test]
    fn semigroup_composition_law() {
        let (cfg, plan) = desk_plan();
        let f = band_limited(&cfg, &plan);
        let two_step = heat_semigroup(&plan, &heat_semigroup(&plan, &f, 0.3).unwrap(), 0.5).unwrap();
        let one_step = heat_semigroup(&plan, &f, 0.8).unwrap();
        assert!(two_step.rel_l2_distance(&one_step).unwrap() < 1e-10);
    }

    #[test]
    fn eigenmode_decays_at_its_eigenvalue() {
        let (cfg, plan) = desk_plan();
        let k = MultiIndex::new(vec![3]);
        let xi0 = [10.0 * cfg.dxi()];
        let psi = eigenmode(cfg.clone(), &k, &xi0).unwrap();
        let t = 0.2;
        let evolved = heat_semigroup(&plan, &psi, t).unwrap();
        let expect = psi.scale(Complex64::new((-t * theta(&k, &xi0)).exp(), 0.0));
        assert!(evolved.rel_l2_distance(&expect).unwrap() < 1e-9);
    }

    #[test]
    fn finite_difference_applies_the_operator_to_an_eigenmode() {
        let (cfg, plan) = desk_plan();
        let k = MultiIndex::new(vec![2]);
        let xi0 = [8.0 * cfg.dxi()];
        let psi = eigenmode(cfg.clone(), &k, &xi0).unwrap();
        let lhs = grushin_fd(&psi);
        let rhs = psi.scale(Complex64::new(theta(&k, &xi0), 0.0));
        let err = lhs.rel_l2_distance(&rhs).unwrap();
        assert!(err < 0.02, "finite-difference eigen-relation error {err:.3e}");
        let _ = plan;
    }

    #[test]
    fn projection_is_an_orthogonal_idempotent() {
        let (cfg, plan) = desk_plan();
        let f = band_limited(&cfg, &plan);
        let proj = SpectralSymbol::projection(6.0).unwrap();
        let pf = functional_calculus(&plan, &f, &proj).unwrap();
        let ppf = functional_calculus(&plan, &pf, &proj).unwrap();
        assert!(ppf.rel_l2_distance(&pf).unwrap() < 1e-10);
        // Self-adjointness against a second function.
        let mut g = GridFunction::zeros(cfg.clone());
        for (i, v) in g.values_mut().iter_mut().enumerate() {
            let x = (i % 97) as f64 / 97.0 - 0.5;
            *v = Complex64::new((-(x * x) * 40.0).exp(), 0.1 * x);
        }
        let pg = functional_calculus(&plan, &g, &proj).unwrap();
        let a = pf.l2_inner(&g).unwrap();
        let b = f.l2_inner(&pg).unwrap();
        assert!((a - b).norm() <= 1e-9 * (1.0 + a.norm()));
    }

    #[test]
    fn reflections_commute_with_the_heat_flow() {
        let (cfg, plan) = desk_plan();
        let f = GridFunction::sample(cfg.clone(), |xp, xpp| {
            Complex64::new(
                (-0.4 * (xp[0] - 0.8).powi(2) - 0.3 * (xpp[0] + 0.5).powi(2)).exp(),
                (-0.5 * xp[0] * xp[0] - 0.2 * xpp[0] * xpp[0]).exp() * 0.4,
            )
        })
        .unwrap();
        for sym in [
            GridSymmetry::flip_x_prime(1, 1, 0),
            GridSymmetry::flip_x_doubleprime(1, 1, 0),
        ] {
            let a = heat_semigroup(&plan, &sym.apply(&f).unwrap(), 0.4).unwrap();
            let b = sym.apply(&heat_semigroup(&plan, &f, 0.4).unwrap()).unwrap();
            let d = a.rel_l2_distance(&b).unwrap();
            assert!(d < 1e-12, "commutation defect {d:.3e} for {sym:?}");
        }
    }

    #[test]
    fn reflection_matches_resampling() {
        let cfg = Arc::new(GrushinConfig::desk_default());
        let f = GridFunction::sample(cfg.clone(), |xp, xpp| {
            Complex64::new((xp[0] + 0.3).sin() * (xpp[0] * 0.2).cos(), xp[0] * 0.01)
        })
        .unwrap();
        let flipped = GridSymmetry::flip_x_prime(1, 1, 0).apply(&f).unwrap();
        let direct = GridFunction::sample(cfg, |xp, xpp| {
            Complex64::new((-xp[0] + 0.3).sin() * (xpp[0] * 0.2).cos(), -xp[0] * 0.01)
        })
        .unwrap();
        assert!(flipped.rel_l2_distance(&direct).unwrap() < 1e-14);
    }

    #[test]
    fn dilation_matches_argument_scaling() {
        let cfg = Arc::new(
            GrushinConfig::new(
                1,
                1,
                32,
                AxisGrid { half_width: 12.0, points: 129 },
                AxisGrid { half_width: 16.0, points: 128 },
            )
            .unwrap(),
        );
        let f = GridFunction::sample(cfg.clone(), |xp, xpp| {
            Complex64::new((-(xp[0] * xp[0]) - 0.5 * xpp[0] * xpp[0]).exp(), 0.0)
        })
        .unwrap();
        let dilated = parabolic_dilation(&f, 2).unwrap();
        // D = 3 so the amplitude factor is 2^{3/2}; the x''-argument 4 x''
        // wraps into [-L'', L'') exactly as the lattice map does.
        let l = 16.0;
        let direct = GridFunction::sample(cfg, move |xp, xpp| {
            let y = (4.0 * xpp[0] + l).rem_euclid(2.0 * l) - l;
            Complex64::new(
                2.0f64.powf(1.5) * (-(4.0 * xp[0] * xp[0]) - 0.5 * y * y).exp(),
                0.0,
            )
        })
        .unwrap();
        assert!(dilated.rel_l2_distance(&direct).unwrap() < 1e-13);
    }

    #[test]
    fn dilation_rejects_even_x_prime_grids() {
        let cfg = Arc::new(GrushinConfig::desk_default());
        let f = GridFunction::zeros(cfg);
        assert!(parabolic_dilation(&f, 2).is_err());
        assert!(parabolic_dilation(&f, 1).is_ok());
    }
}
