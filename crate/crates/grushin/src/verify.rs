//! Verification harness: every identity the construction rests on, run as a
//! named suite with pinned tolerances and machine-readable outcomes.
//!
//! Each check reports one `measured` number compared against a named entry
//! of the config tolerance table (scaled by the caller's `tolerance_scale`).
//! Convergence-order rows report |order - target|. The two `control-` rows
//! probe deliberately broken inputs and measure the deviation from the
//! failure mode a broken input must show, so a healthy build passes every
//! row; the acceptance layer separately checks that those controls sit far
//! outside the healthy windows.
//!
//! Determinism: every row draws from its own ChaCha8 stream keyed by the
//! run seed and the row name, so filtering or reordering rows does not
//! shift anyone's data, and two runs with the same (config, seed) pair
//! serialize to byte-identical reports (wall-clock timings are kept out of
//! the serialized form).
//!
//! The suite is calibrated for the desk-scale default geometry. Rows that
//! probe grid refinement or special lattices build their own fixed
//! configurations; rows that need d' = d'' = 1 report an error outcome on
//! configs with other dimensions instead of silently passing.

use crate::config::{AxisGrid, GrushinConfig};
use crate::error::{GrushinError, Result};
use crate::grid::{DualCoefficients, GridFunction};
use crate::heat::{
    chapman_kolmogorov, fiber_kernel, heat_equation_refinement_ratio, kernel_fiber_integral,
    kernel_fourier, kernel_fourier_diagnostics, kernel_fourier_lattice, kernel_hankel,
    kernel_l2_norm_direct, kernel_l2_norm_reduced, kernel_l2_norm_semigroup, kernel_point,
    HeatKernelQuery, KernelPoint,
};
use crate::special::{
    bessel_j, bessel_j_ratio, gamma, hermite_1d, hermite_column, hermite_heat_kernel_closed,
    hermite_scaled, MultiIndex,
};
use crate::spectral::{
    apply_symbol, eigenmode, eigenmode_pointwise, functional_calculus, grushin_fd, heat_semigroup,
    parabolic_dilation, theta, GridSymmetry, SpectralSymbol,
};
use crate::testfn::{band_limited_draw, gaussian_bump, schwartz_draw, theta_capped_draw};
use crate::transform::TransformPlan;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

/// One check: the measured number, the tolerance it was held to, and what
/// happened. `millis` is informational and excluded from serialization so
/// reports stay byte-identical across runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub group: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
    #[serde(skip)]
    pub millis: u64,
}

/// Full suite result. Serializes deterministically for a fixed
/// (config, seed, tolerance_scale, filter) tuple.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub config: GrushinConfig,
    pub seed: u64,
    pub generator: String,
    pub tolerance_scale: f64,
    pub passed: usize,
    pub failed: usize,
    pub outcomes: Vec<CheckOutcome>,
}

impl VerificationReport {
    pub fn all_passed(&self) -> bool {
        self.failed == 0 && !self.outcomes.is_empty()
    }

    /// Fixed-width table, one row per check, then a summary line.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<34} {:<10} {:>12} {:>10} {:>7} {:>8}\n",
            "check", "group", "measured", "tolerance", "status", "ms"
        ));
        for o in &self.outcomes {
            out.push_str(&format!(
                "{:<34} {:<10} {:>12.4e} {:>10.1e} {:>7} {:>8}\n",
                o.name,
                o.group,
                o.measured,
                o.tolerance,
                if o.passed { "pass" } else { "FAIL" },
                o.millis
            ));
        }
        out.push_str(&format!(
            "{} passed, {} failed (seed {}, tolerance scale {})\n",
            self.passed, self.failed, self.seed, self.tolerance_scale
        ));
        out
    }
}

struct Ctx {
    config: Arc<GrushinConfig>,
    plan: RefCell<Option<Arc<TransformPlan>>>,
}

impl Ctx {
    fn plan(&self) -> Result<Arc<TransformPlan>> {
        let mut slot = self.plan.borrow_mut();
        if let Some(p) = slot.as_ref() {
            return Ok(p.clone());
        }
        let p = Arc::new(TransformPlan::new(self.config.clone())?);
        *slot = Some(p.clone());
        Ok(p)
    }

    fn need_1x1(&self) -> Result<()> {
        if self.config.d_prime != 1 || self.config.d_doubleprime != 1 {
            return Err(GrushinError::InvalidArgument(
                "this check needs d' = d'' = 1".into(),
            ));
        }
        Ok(())
    }
}

type CheckFn = fn(&Ctx, &mut ChaCha8Rng) -> Result<(f64, String)>;

struct Check {
    name: &'static str,
    group: &'static str,
    tolerance_name: &'static str,
    run: CheckFn,
}

/// FNV-1a of the row name folded into the run seed: each row gets an
/// independent, reorder-stable stream.
fn sub_seed(seed: u64, name: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in name.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    seed ^ h
}

fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

// Special functions --------------------------------------------------------

/// Closed Mehler form against the defining eigenfunction series, summed far
/// past convergence (401 terms; the tail at the declared sample is below
/// 1e-30 of the leading term). Absolute error: the sample includes
/// alternating-sign points where the series value sits many orders below
/// the term size and relative error is not a meaningful f64 quantity.
fn check_mehler_series(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    const KMAX: u32 = 400;
    let points = [-2.0f64, -1.0, 0.0, 1.0, 2.0];
    let mut columns = Vec::with_capacity(points.len());
    for &u in &points {
        let mut col = vec![0.0f64; KMAX as usize + 1];
        hermite_column(KMAX, u, &mut col);
        columns.push(col);
    }
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &t in &[0.1f64, 0.5, 2.0] {
        for (ix, &x) in points.iter().enumerate() {
            for (iy, &y) in points.iter().enumerate() {
                let closed = hermite_heat_kernel_closed(t, &[x], &[y])?;
                let mut series = 0.0f64;
                for k in (0..=KMAX as usize).rev() {
                    series += (-t * (2.0 * k as f64 + 1.0)).exp() * columns[ix][k] * columns[iy][k];
                }
                let err = (closed - series).abs();
                if err > worst {
                    worst = err;
                    at = format!("t={t}, x={x}, y={y}");
                }
            }
        }
    }
    Ok((worst, format!("worst at {at}")))
}

/// Values frozen from 200-bit evaluations of the same definitions.
fn check_special_frozen(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let cases: [(f64, f64, &str); 5] = [
        (hermite_1d(25, 0.7), -0.287698103656262949171717, "h_25(0.7)"),
        (
            hermite_heat_kernel_closed(0.3, &[1.0], &[-0.5])?,
            0.0711976021123481812903407,
            "oscillator kernel t=0.3",
        ),
        (bessel_j(1.0, 3.7), 0.053_833_987_745_461_864, "J_1(3.7)"),
        (bessel_j(0.0, 15.0), -0.014_224_472_826_780_773, "J_0(15)"),
        (bessel_j(-0.5, 2.0), -0.234_785_710_406_248_47, "J_{-1/2}(2)"),
    ];
    let mut worst = 0.0f64;
    let mut at = "";
    for (got, want, name) in cases {
        let d = rel_dev(got, want);
        if d > worst {
            worst = d;
            at = name;
        }
    }
    Ok((worst, format!("worst at {at}")))
}

/// Half-integer orders against their elementary closed forms, on both sides
/// of the series/asymptotic switch.
fn check_bessel_half_integer(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &z in &[0.3f64, 1.7, 6.0, 14.2] {
        let c = (2.0 / (PI * z)).sqrt();
        let cases = [
            (bessel_j(0.5, z), c * z.sin(), "J_{1/2}"),
            (bessel_j(-0.5, z), c * z.cos(), "J_{-1/2}"),
            (bessel_j(1.5, z), c * (z.sin() / z - z.cos()), "J_{3/2}"),
        ];
        for (got, want, name) in cases {
            let d = rel_dev(got, want);
            if d > worst {
                worst = d;
                at = format!("{name}(z={z})");
            }
        }
    }
    Ok((worst, format!("worst at {at}")))
}

/// J_alpha(z)/z^alpha tends to 1/(2^alpha Gamma(alpha+1)); the ratio form
/// must reach that limit without cancellation at z = 1e-8.
fn check_bessel_ratio_near_zero(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &alpha in &[-0.5f64, 0.0, 0.5, 1.0] {
        let limit = 1.0 / (2.0f64.powf(alpha) * gamma(alpha + 1.0));
        let d = rel_dev(bessel_j_ratio(alpha, 1e-8), limit);
        if d > worst {
            worst = d;
            at = format!("alpha={alpha}");
        }
    }
    Ok((worst, format!("worst at {at}")))
}

/// ((|x|^2+|y|^2) cosh u - 2 x.y)/sinh u
///   = (|x+y|^2 tanh(u/2) + |x-y|^2 coth(u/2))/2,
/// the half-angle rewrite the closed kernel form rests on. Both sides are
/// evaluated exactly as written.
fn check_hyperbolic_identity(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for i in 0..100 {
        let d = 1 + (i % 3);
        let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let u = rng.gen_range(0.02f64.ln()..30.0f64.ln()).exp();
        let (mut s, mut dot, mut plus, mut minus) = (0.0, 0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(&y) {
            s += a * a + b * b;
            dot += a * b;
            plus += (a + b) * (a + b);
            minus += (a - b) * (a - b);
        }
        let lhs = (s * u.cosh() - 2.0 * dot) / u.sinh();
        let half = 0.5 * u;
        let rhs = 0.5 * (plus * half.tanh() + minus / half.tanh());
        let dev = (lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1.0);
        if dev > worst {
            worst = dev;
            at = format!("draw {i}: d'={d}, u={u:.3}");
        }
    }
    Ok((worst, format!("worst at {at}")))
}

// Transform ----------------------------------------------------------------

/// Inversion both ways on exact combinations of resolved modes: synthesis
/// then analysis must return the drawn coefficients, and analysis then
/// synthesis must return the drawn samples.
fn check_round_trip_band_limited(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (f, dual) = band_limited_draw(plan.as_ref(), rng, 12)?;
        let back = plan.forward(&f)?;
        let d_dual = back.rel_distance(&dual)?;
        let f2 = plan.inverse(&back)?;
        let d_grid = f2.rel_l2_distance(&f)?;
        worst = worst.max(d_dual).max(d_grid);
    }
    Ok((worst, "50 draws, 12 modes each, both directions".into()))
}

/// Norm preservation in both directions on the same draw family.
fn check_plancherel_band_limited(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (f, dual) = band_limited_draw(plan.as_ref(), rng, 12)?;
        let forward_ratio = plan.forward(&f)?.dual_norm() / f.l2_norm();
        let inverse_ratio = f.l2_norm() / dual.dual_norm();
        worst = worst
            .max((forward_ratio - 1.0).abs())
            .max((inverse_ratio - 1.0).abs());
    }
    Ok((worst, "50 draws, norm ratios both directions".into()))
}

/// <Gf, F> on the dual side equals <f, G^{-1}F> on the grid side: the
/// inverse really is the adjoint under the discrete measures.
fn check_transform_adjointness(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let (f, _) = band_limited_draw(plan.as_ref(), rng, 10)?;
        let (_, cap_f) = band_limited_draw(plan.as_ref(), rng, 10)?;
        let lhs = plan.forward(&f)?.dual_inner(&cap_f)?;
        let rhs = f.l2_inner(&plan.inverse(&cap_f)?)?;
        let scale = f.l2_norm() * cap_f.dual_norm();
        worst = worst.max((lhs - rhs).norm() / scale.max(1e-300));
    }
    Ok((worst, "10 polarized pairs".into()))
}

/// Round trip on sampled rapidly decaying functions; limited by grid
/// truncation rather than arithmetic.
fn check_round_trip_schwartz(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let f = schwartz_draw(ctx.config.clone(), rng)?;
        let back = plan.inverse(&plan.forward(&f)?)?;
        worst = worst.max(back.rel_l2_distance(&f)?);
    }
    Ok((worst, "10 sampled smooth draws".into()))
}

fn check_plancherel_schwartz(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let f = schwartz_draw(ctx.config.clone(), rng)?;
        let ratio = plan.forward(&f)?.dual_norm() / f.l2_norm();
        worst = worst.max((ratio - 1.0).abs());
    }
    Ok((worst, "10 sampled smooth draws".into()))
}

/// Raw sampled-shell Gram defects within the trusted degree band, across
/// the frequency range (the stored shells are re-orthonormalized; this row
/// certifies the raw material they are built from).
fn check_shell_gram(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let q_total: usize = ctx.config.dual_shape()[1..].iter().product();
    let mut by_radius: Vec<(usize, f64)> = (0..q_total)
        .filter(|&q| q != plan.zero_flat_index())
        .map(|q| (q, plan.frequency_radius(q)))
        .collect();
    by_radius.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    by_radius.dedup_by(|a, b| a.1 == b.1);
    let samples = 13.min(by_radius.len());
    let mut worst = 0.0f64;
    let mut at = String::new();
    for i in 0..samples {
        let (q, radius) = by_radius[i * (by_radius.len() - 1) / (samples - 1).max(1)];
        let (defect, trusted) = plan.gram_defect(q)?;
        if defect > worst {
            worst = defect;
            at = format!("|xi|={radius:.3}, trusted degree {trusted}");
        }
    }
    Ok((worst, format!("{samples} shells sampled; worst at {at}")))
}

/// The transform of a sampled eigenfunction concentrates on its own dual
/// entry: peak magnitude, leaked energy fraction, and norm preservation.
fn check_mode_concentration(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let pool = crate::testfn::admissible_modes(plan.as_ref());
    if pool.is_empty() {
        return Err(GrushinError::InvalidArgument(
            "no admissible modes on this grid".into(),
        ));
    }
    let indices = plan.multi_indices();
    let dpp = ctx.config.d_doubleprime;
    let expect_peak = (2.0 * ctx.config.x_doubleprime_grid.half_width / (2.0 * PI)).powi(dpp as i32);
    let q_total: usize = ctx.config.dual_shape()[1..].iter().product();
    let mut worst = 0.0f64;
    let mut at = String::new();
    for _ in 0..8 {
        let (ki, q) = pool[rng.gen_range(0..pool.len())];
        let coords = plan.frequency_coords(q);
        let f = eigenmode(ctx.config.clone(), &indices[ki], &coords)?;
        let dual = plan.forward(&f)?;
        // The e^{-i xi . x''} factor lands on the mirrored frequency bin.
        let neg: Vec<f64> = coords.iter().map(|v| -v).collect();
        let q_neg = (0..q_total)
            .find(|&p| plan.frequency_coords(p) == neg)
            .ok_or_else(|| GrushinError::InvalidArgument("mirror bin missing".into()))?;
        let values = dual.values();
        let peak = values[[ki, q_neg]].norm();
        let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
        let off_fraction = (total - peak * peak).max(0.0) / total;
        let peak_dev = (peak - expect_peak).abs() / expect_peak;
        let norm_dev = (dual.dual_norm() - f.l2_norm()).abs() / f.l2_norm();
        let m = peak_dev.max(off_fraction).max(norm_dev);
        if m > worst {
            worst = m;
            at = format!(
                "mode k={:?}, |xi|={:.3} (peak dev {:.2e}, leak {:.2e}, norm dev {:.2e})",
                indices[ki].entries(),
                plan.frequency_radius(q),
                peak_dev,
                off_fraction,
                norm_dev
            );
        }
    }
    Ok((worst, format!("8 sampled modes; worst at {at}")))
}

/// The forward transform agrees with its definition as a plain double sum
/// of f against the eigenfunction over the product grid, entry by entry
/// (the raw analysis route; both sides share the discrete measure).
fn check_integral_definition(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    ctx.need_1x1()?;
    let plan = ctx.plan()?;
    let cfg = &ctx.config;
    let f = schwartz_draw(cfg.clone(), rng)?;
    let g = plan.partial_fourier(&f);
    let np = cfg.x_prime_grid.points;
    let axis_p = cfg.x_prime_axis();
    let axis_pp = cfg.x_doubleprime_axis();
    let wp = cfg.x_prime_weights();
    let dpp_w = cfg.dx_doubleprime();
    let n = cfg.x_doubleprime_grid.points;
    let vals = f.values();
    let fnorm = f.l2_norm();
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &(k, m) in &[(0u32, 14i64), (1, -12), (3, 17), (6, -20)] {
        let q = (n as i64 / 2 + m) as usize;
        let xi = plan.frequency_coords(q);
        let idx = MultiIndex::new(vec![k]);
        // Definition: a direct Riemann double sum of f psi over the grid.
        let mut direct = Complex64::new(0.0, 0.0);
        for p in 0..np {
            let mut row = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let psi = eigenmode_pointwise(&idx, &xi, &[axis_p[p]], &[axis_pp[j]])?;
                row += vals[[p, j]] * psi;
            }
            direct += wp[p] * dpp_w * row;
        }
        // Pipeline: partial Fourier stage, then raw Hermite analysis.
        let slice: Vec<Complex64> = (0..np).map(|p| g[[p, q]]).collect();
        let staged = plan.scaled_hermite_analysis(&slice, &xi)?[plan
            .multi_indices()
            .iter()
            .position(|i| *i == idx)
            .expect("degree within cutoff")];
        let dev = (direct - staged).norm() / fnorm;
        if dev > worst {
            worst = dev;
            at = format!("entry (k={k}, m={m})");
        }
    }
    Ok((worst, format!("4 entries; worst at {at}")))
}

/// Running the Hermite stage before the Fourier stage reaches the same
/// coefficients: the two stages act on separate axes.
fn check_stage_order(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let mut worst = 0.0f64;
    for i in 0..5 {
        let f = if i < 3 {
            schwartz_draw(ctx.config.clone(), rng)?
        } else {
            band_limited_draw(plan.as_ref(), rng, 10)?.0
        };
        let a = plan.forward(&f)?;
        let b = plan.forward_stage_swapped(&f)?;
        worst = worst.max(a.rel_distance(&b)?);
    }
    Ok((worst, "5 draws, swapped stage order".into()))
}

/// On a separable product a(x') b(x'') the transform factorizes into the
/// one-dimensional Fourier coefficient of b times the one-dimensional
/// Hermite coefficient of a, both computed here from scratch.
fn check_separated_variables(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    ctx.need_1x1()?;
    let plan = ctx.plan()?;
    let cfg = &ctx.config;
    let a = |x: f64| (-0.5 * (x - 0.2) * (x - 0.2)).exp() * (1.0 + 0.3 * x);
    let b = |x: f64| (2.9 * x).cos() * (-x * x / 8.0).exp();
    let f = GridFunction::sample(cfg.clone(), move |xp, xpp| {
        Complex64::new(a(xp[0]) * b(xpp[0]), 0.0)
    })?;
    let dual = plan.forward(&f)?;
    let axis_p = cfg.x_prime_axis();
    let axis_pp = cfg.x_doubleprime_axis();
    let wp = cfg.x_prime_weights();
    let n = cfg.x_doubleprime_grid.points;
    let mut peak = 0.0f64;
    let mut entries = Vec::new();
    for &m in &[12i64, 14, 16, -14] {
        let q = (n as i64 / 2 + m) as usize;
        let xi = plan.frequency_coords(q)[0];
        // Unitary-convention Fourier coefficient of b on the periodic axis.
        let mut bhat = Complex64::new(0.0, 0.0);
        for &x in &axis_pp {
            bhat += b(x) * Complex64::from_polar(1.0, -xi * x);
        }
        bhat *= cfg.dx_doubleprime() / (2.0 * PI).sqrt();
        for &k in &[0u32, 2, 5, 9] {
            let idx = MultiIndex::new(vec![k]);
            let mut ha = 0.0;
            for (p, &x) in axis_p.iter().enumerate() {
                ha += wp[p] * a(x) * hermite_scaled(&idx, xi.abs(), &[x])?;
            }
            let product = bhat * ha;
            let got = dual.values()[[k as usize, q]];
            peak = peak.max(product.norm());
            entries.push(((k, m), (got - product).norm()));
        }
    }
    let mut worst = 0.0f64;
    let mut at = (0u32, 0i64);
    for (key, dev) in entries {
        let d = dev / peak.max(1e-300);
        if d > worst {
            worst = d;
            at = key;
        }
    }
    Ok((
        worst,
        format!("16 entries; worst at (k={}, m={})", at.0, at.1),
    ))
}

// Spectral calculus --------------------------------------------------------

/// Transforming the finite-difference operator output matches multiplying
/// the transform by the symbol, with the residual shrinking at second order
/// as the x''-grid refines (x'-grid held fixed).
fn check_fd_intertwining_order(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut residuals = Vec::new();
    for &n in &[128usize, 256, 512] {
        let cfg = Arc::new(GrushinConfig::new(
            1,
            1,
            64,
            AxisGrid {
                half_width: 12.0,
                points: 256,
            },
            AxisGrid {
                half_width: 16.0,
                points: n,
            },
        )?);
        let plan = TransformPlan::new(cfg.clone())?;
        let phi = GridFunction::sample(cfg.clone(), |xp, xpp| {
            let envelope = (-0.5 * xp[0] * xp[0]).exp() * (-xpp[0] * xpp[0] / 1.62).exp();
            Complex64::new(envelope * (5.0 * xpp[0]).sin(), 0.0)
        })?;
        let lhs = plan.forward(&grushin_fd(&phi))?;
        let rhs = apply_symbol(&plan, &plan.forward(&phi)?, &SpectralSymbol::theta_multiplier())?;
        let diff = lhs.add_scaled(&rhs, Complex64::new(-1.0, 0.0))?;
        residuals.push(diff.dual_norm() / rhs.dual_norm());
    }
    let o1 = (residuals[0] / residuals[1]).log2();
    let o2 = (residuals[1] / residuals[2]).log2();
    Ok((
        (o2 - 2.0).abs(),
        format!(
            "residuals {:.3e}/{:.3e}/{:.3e}, orders {:.3}/{:.3}",
            residuals[0], residuals[1], residuals[2], o1, o2
        ),
    ))
}

/// Shared machinery for the eigenfunction refinement rows: the relative
/// residual of G_fd psi against factor * Theta psi on an N x N grid.
fn eigen_fd_residual(k: u32, m: i64, n: usize, factor: f64) -> Result<f64> {
    let cfg = Arc::new(GrushinConfig::new(
        1,
        1,
        4,
        AxisGrid {
            half_width: 12.0,
            points: n,
        },
        AxisGrid {
            half_width: 16.0,
            points: n,
        },
    )?);
    let xi = m as f64 * cfg.dxi();
    let idx = MultiIndex::new(vec![k]);
    let lam = theta(&idx, &[xi]);
    let psi = eigenmode(cfg, &idx, &[xi])?;
    let fd = grushin_fd(&psi);
    let diff = fd.add_scaled(&psi, Complex64::new(-factor * lam, 0.0))?;
    Ok(diff.l2_norm() / (lam * psi.l2_norm()))
}

/// G_fd applied to sampled eigenfunctions reproduces Theta at second order
/// under joint grid refinement, for seeded (degree, frequency) pairs.
fn check_eigenfunction_fd_order(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for _ in 0..10 {
        let (k, m) = loop {
            let k = rng.gen_range(0u32..=20);
            let m = rng.gen_range(5i64..=30);
            // Keep the coarsest grid inside the asymptotic regime.
            if (m as f64 * PI / 16.0) * (2.0 * k as f64 + 1.0) <= 60.0 {
                break (k, m);
            }
        };
        let r: Vec<f64> = [128usize, 256, 512]
            .iter()
            .map(|&n| eigen_fd_residual(k, m, n, 1.0))
            .collect::<Result<_>>()?;
        let order = (r[1] / r[2]).log2();
        let dev = (order - 2.0).abs();
        if dev > worst {
            worst = dev;
            at = format!("(k={k}, m={m}): order {order:.3}");
        }
    }
    Ok((worst, format!("10 pairs; worst at {at}")))
}

/// Control: against a 5%-detuned eigenvalue the residual must stop
/// refining (order near zero, not near two).
fn check_control_off_eigenvalue(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &(k, m) in &[(2u32, 8i64), (0, 12)] {
        let r: Vec<f64> = [128usize, 256, 512]
            .iter()
            .map(|&n| eigen_fd_residual(k, m, n, 1.05))
            .collect::<Result<_>>()?;
        let order = (r[1] / r[2]).log2();
        if order.abs() > worst {
            worst = order.abs();
            at = format!("(k={k}, m={m}): order {order:.3}");
        }
    }
    Ok((worst, format!("2 detuned pairs; {at}")))
}

/// Semigroup algebra on band-limited data: identity at t = 0, contraction,
/// the composition law, projection idempotence, and self-adjointness.
fn check_semigroup_algebra(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let (f, _) = theta_capped_draw(plan.as_ref(), rng, 10, 120.0)?;
    let (g, _) = theta_capped_draw(plan.as_ref(), rng, 10, 120.0)?;
    let fnorm = f.l2_norm();
    let mut parts = Vec::new();

    let id = functional_calculus(plan.as_ref(), &f, &SpectralSymbol::heat(0.0)?)?;
    parts.push(("zero-time identity", id.rel_l2_distance(&f)?));

    for &t in &[0.25f64, 1.75] {
        let ratio = heat_semigroup(plan.as_ref(), &f, t)?.l2_norm() / fnorm;
        parts.push(("contraction", (ratio - 1.0).max(0.0)));
    }

    let two_step = heat_semigroup(plan.as_ref(), &heat_semigroup(plan.as_ref(), &f, 0.3)?, 0.5)?;
    let one_step = heat_semigroup(plan.as_ref(), &f, 0.8)?;
    let hom = two_step.add_scaled(&one_step, Complex64::new(-1.0, 0.0))?;
    parts.push(("composition", hom.l2_norm() / fnorm));

    let proj = SpectralSymbol::projection(40.0)?;
    let p1 = functional_calculus(plan.as_ref(), &f, &proj)?;
    let p2 = functional_calculus(plan.as_ref(), &p1, &proj)?;
    let idem = p2.add_scaled(&p1, Complex64::new(-1.0, 0.0))?;
    parts.push(("idempotence", idem.l2_norm() / fnorm));

    let lhs = heat_semigroup(plan.as_ref(), &f, 0.7)?.l2_inner(&g)?;
    let rhs = f.l2_inner(&heat_semigroup(plan.as_ref(), &g, 0.7)?)?;
    parts.push(("self-adjointness", (lhs - rhs).norm() / (fnorm * g.l2_norm())));

    let (worst_name, worst) = parts
        .iter()
        .cloned()
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    Ok((worst, format!("worst component: {worst_name}")))
}

/// Short-time limit on draws with bounded symbol: ||E_eps f - f|| scales
/// with eps times the spectral cap.
fn check_strong_continuity(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let mut worst = 0.0f64;
    for _ in 0..3 {
        let (f, _) = theta_capped_draw(plan.as_ref(), rng, 8, 10.0)?;
        let evolved = heat_semigroup(plan.as_ref(), &f, 1e-6)?;
        let diff = evolved.add_scaled(&f, Complex64::new(-1.0, 0.0))?;
        worst = worst.max(diff.l2_norm() / f.l2_norm());
    }
    Ok((worst, "3 draws with theta <= 10, eps = 1e-6".into()))
}

/// Coordinate reflections commute with the heat flow (the symbol depends
/// only on |k| and |xi''|).
fn check_symmetry_commutation(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let plan = ctx.plan()?;
    let dp = ctx.config.d_prime;
    let dpp = ctx.config.d_doubleprime;
    let mut symmetries = vec![
        GridSymmetry::flip_x_prime(dp, dpp, 0),
        GridSymmetry::flip_x_doubleprime(dp, dpp, 0),
    ];
    if dp >= 2 {
        symmetries.push(GridSymmetry::swap_x_prime(dp, dpp, 0, 1));
    }
    let mut worst = 0.0f64;
    for _ in 0..2 {
        let f = schwartz_draw(ctx.config.clone(), rng)?;
        let evolved = heat_semigroup(plan.as_ref(), &f, 0.4)?;
        for s in &symmetries {
            let a = heat_semigroup(plan.as_ref(), &s.apply(&f)?, 0.4)?;
            let b = s.apply(&evolved)?;
            worst = worst.max(a.rel_l2_distance(&b)?);
        }
    }
    Ok((worst, format!("{} reflections, 2 draws", symmetries.len())))
}

/// Degree-2 homogeneity: evolving a parabolically dilated function for
/// time t matches dilating the evolution at time 4t. Runs on its own
/// odd-x'-count grid so the dilated nodes stay on-grid.
fn check_dilation_covariance(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let cfg = Arc::new(GrushinConfig::new(
        1,
        1,
        32,
        AxisGrid {
            half_width: 12.0,
            points: 257,
        },
        AxisGrid {
            half_width: 16.0,
            points: 256,
        },
    )?);
    let plan = TransformPlan::new(cfg.clone())?;
    let n = cfg.x_doubleprime_grid.points;
    // Modes whose doubled-frequency, double-degree images stay resolved.
    let mut dual = DualCoefficients::zeros(cfg.clone());
    for m in 7i64..=11 {
        let q = (n as i64 / 2 + m) as usize;
        for k in 0..=10usize {
            let amp = 0.7f64.powi(k as i32);
            dual.values_mut()[[k, q]] = Complex64::new(
                amp * rng.gen_range(-1.0..1.0),
                amp * rng.gen_range(-1.0..1.0),
            );
        }
    }
    let f = plan.inverse(&dual)?;
    let t = 0.05;
    let lhs = heat_semigroup(&plan, &parabolic_dilation(&f, 2)?, t)?;
    let rhs = parabolic_dilation(&heat_semigroup(&plan, &f, 4.0 * t)?, 2)?;
    Ok((
        lhs.rel_l2_distance(&rhs)?,
        "55 modes, r = 2, t = 0.05 vs 0.20".into(),
    ))
}

/// Discrete Green symmetry: G_fd is self-adjoint against localized bumps
/// (the boundary stencils see only dark samples).
fn check_greens_identity(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let dp = ctx.config.d_prime;
        let dpp = ctx.config.d_doubleprime;
        let cp: Vec<f64> = (0..dp).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cpp: Vec<f64> = (0..dpp).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let dp2: Vec<f64> = (0..dp).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let dpp2: Vec<f64> = (0..dpp).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let phi = gaussian_bump(
            ctx.config.clone(),
            &cp,
            &cpp,
            rng.gen_range(0.6..1.1),
            rng.gen_range(0.8..1.4),
        )?;
        let psi = gaussian_bump(
            ctx.config.clone(),
            &dp2,
            &dpp2,
            rng.gen_range(0.6..1.1),
            rng.gen_range(0.8..1.4),
        )?;
        let lhs = grushin_fd(&phi).l2_inner(&psi)?;
        let rhs = phi.l2_inner(&grushin_fd(&psi))?;
        worst = worst.max((lhs - rhs).norm() / (phi.l2_norm() * psi.l2_norm()));
    }
    Ok((worst, "10 bump pairs".into()))
}

// Heat kernel --------------------------------------------------------------

fn q11(t: f64, xp: f64, xpp: f64, yp: f64, ypp: f64) -> HeatKernelQuery {
    HeatKernelQuery::new(
        t,
        KernelPoint::new(vec![xp], vec![xpp]),
        KernelPoint::new(vec![yp], vec![ypp]),
    )
}

/// Kernel values frozen from 60-digit adaptive quadrature of the defining
/// integral.
fn check_kernel_frozen(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let cases = [
        (q11(0.5, 0.3, -0.2, -0.4, 0.6), 0.045_087_519_394_112_868),
        (q11(1.0, 0.0, 0.0, 0.0, 0.0), 0.172_518_887_067_888_069),
        (q11(0.5, 1.0, 2.0, 0.5, 1.5), 0.140_782_603_483_565_818),
    ];
    let mut worst = 0.0f64;
    for (q, want) in cases {
        worst = worst.max(rel_dev(kernel_point(&q)?, want));
    }
    Ok((worst, "3 frozen references".into()))
}

/// d'' = 1: oscillatory line integral against the half-line Bessel route.
fn check_fourier_vs_hankel_line(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for i in 0..8 {
        let dp = 1 + (i % 2);
        let t = rng.gen_range(0.12f64.ln()..3.0f64.ln()).exp();
        let xp: Vec<f64> = (0..dp).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let yp: Vec<f64> = (0..dp).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let q = HeatKernelQuery::new(
            t,
            KernelPoint::new(xp, vec![rng.gen_range(-2.0..2.0)]),
            KernelPoint::new(yp, vec![rng.gen_range(-2.0..2.0)]),
        );
        worst = worst.max(rel_dev(kernel_fourier(&q)?, kernel_hankel(&q)?));
    }
    Ok((worst, "8 queries, d' in {1, 2}".into()))
}

/// d'' = 2: radial Bessel route against a plain tensor-lattice quadrature
/// that shares no Bessel code.
fn check_fourier_vs_hankel_plane(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let t = rng.gen_range(0.8..2.0);
        let q = HeatKernelQuery::new(
            t,
            KernelPoint::new(
                vec![rng.gen_range(-1.2..1.2)],
                vec![rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)],
            ),
            KernelPoint::new(
                vec![rng.gen_range(-1.2..1.2)],
                vec![rng.gen_range(-0.9..0.9), rng.gen_range(-0.9..0.9)],
            ),
        );
        worst = worst.max(rel_dev(kernel_hankel(&q)?, kernel_fourier_lattice(&q)?));
    }
    Ok((worst, "6 queries".into()))
}

/// d'' = 3: radial Bessel route against a radial x polar-angle rule.
fn check_fourier_vs_hankel_space(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let t = rng.gen_range(0.5..2.0);
        let draw3 = |rng: &mut ChaCha8Rng| {
            vec![
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            ]
        };
        let q = HeatKernelQuery::new(
            t,
            KernelPoint::new(vec![rng.gen_range(-1.2..1.2)], draw3(rng)),
            KernelPoint::new(vec![rng.gen_range(-1.2..1.2)], draw3(rng)),
        );
        worst = worst.max(rel_dev(kernel_hankel(&q)?, kernel_fourier_lattice(&q)?));
    }
    Ok((worst, "6 queries".into()))
}

/// The exact integral is real; the quadrature's imaginary residue is pure
/// noise and must sit at rounding level relative to the absolute mass.
fn check_kernel_imag_residual(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for _ in 0..6 {
        let t = rng.gen_range(0.15f64.ln()..4.0f64.ln()).exp();
        let q = q11(
            t,
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-2.5..2.5),
            rng.gen_range(-1.5..1.5),
            rng.gen_range(-2.5..2.5),
        );
        worst = worst.max(kernel_fourier_diagnostics(&q)?.1);
    }
    Ok((worst, "6 queries".into()))
}

/// p_t(x, y) = p_t(y, x): the closed form depends on the argument pair only
/// through |x'+y'|, |x'-y'| and |x''-y''|.
fn check_kernel_symmetry(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for _ in 0..8 {
        let t = rng.gen_range(0.3..2.0);
        let a = (rng.gen_range(-1.5..1.5), rng.gen_range(-2.0..2.0));
        let b = (rng.gen_range(-1.5..1.5), rng.gen_range(-2.0..2.0));
        let pab = kernel_point(&q11(t, a.0, a.1, b.0, b.1))?;
        let pba = kernel_point(&q11(t, b.0, b.1, a.0, a.1))?;
        worst = worst.max(rel_dev(pab, pba));
    }
    Ok((worst, "8 swapped pairs".into()))
}

/// Parabolic scaling p_{r^2 t}(delta_r x, delta_r y) = r^{-D} p_t(x, y)
/// for r = 2 and r = 1/2.
fn check_kernel_scaling(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for i in 0..4 {
        let r: f64 = if i % 2 == 0 { 2.0 } else { 0.5 };
        let dp = if i == 3 { 2 } else { 1 };
        let t = rng.gen_range(0.4..1.2);
        let xp: Vec<f64> = (0..dp).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let yp: Vec<f64> = (0..dp).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let xpp = rng.gen_range(-1.5..1.5);
        let ypp = rng.gen_range(-1.5..1.5);
        let base = HeatKernelQuery::new(
            t,
            KernelPoint::new(xp.clone(), vec![xpp]),
            KernelPoint::new(yp.clone(), vec![ypp]),
        );
        let scaled = HeatKernelQuery::new(
            r * r * t,
            KernelPoint::new(xp.iter().map(|v| r * v).collect(), vec![r * r * xpp]),
            KernelPoint::new(yp.iter().map(|v| r * v).collect(), vec![r * r * ypp]),
        );
        let d_hom = (dp + 2) as i32;
        let lhs = kernel_point(&scaled)? * r.powi(d_hom);
        worst = worst.max(rel_dev(lhs, kernel_point(&base)?));
    }
    Ok((worst, "4 queries, r in {2, 1/2}, d' in {1, 2}".into()))
}

/// Rotations of the x''-plane that map the quadrature lattice to itself
/// leave the kernel unchanged; checked on the radial route and, for the
/// quarter turn, on the tensor-lattice route whose arithmetic is not
/// manifestly rotation-invariant.
fn check_kernel_rotation(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let t = 0.9;
    let xp = 0.6;
    let yp = -0.4;
    let xpp = [0.5, -0.25];
    let ypp = [-0.75, 0.5];
    let rotations: [fn([f64; 2]) -> [f64; 2]; 3] = [
        |v| [-v[1], v[0]],
        |v| [v[1], v[0]],
        |v| [-v[0], v[1]],
    ];
    let base_q = HeatKernelQuery::new(
        t,
        KernelPoint::new(vec![xp], xpp.to_vec()),
        KernelPoint::new(vec![yp], ypp.to_vec()),
    );
    let base = kernel_hankel(&base_q)?;
    let mut worst = 0.0f64;
    for rot in rotations {
        let q = HeatKernelQuery::new(
            t,
            KernelPoint::new(vec![xp], rot(xpp).to_vec()),
            KernelPoint::new(vec![yp], rot(ypp).to_vec()),
        );
        worst = worst.max(rel_dev(kernel_hankel(&q)?, base));
    }
    let lattice_base = kernel_fourier_lattice(&base_q)?;
    let quarter = HeatKernelQuery::new(
        t,
        KernelPoint::new(vec![xp], [-xpp[1], xpp[0]].to_vec()),
        KernelPoint::new(vec![yp], [-ypp[1], ypp[0]].to_vec()),
    );
    worst = worst.max(rel_dev(kernel_fourier_lattice(&quarter)?, lattice_base));
    Ok((worst, "3 lattice-preserving maps + lattice quarter turn".into()))
}

/// The scaled-variable form of the kernel integral (time inside the
/// hyperbolic functions) against the reference form, on an independently
/// constructed quadrature.
fn check_kernel_change_of_variable(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let fixed = [0.1f64, 0.4, 1.0, 2.5, 10.0];
    for i in 0..6 {
        let t = if i < 5 {
            fixed[i]
        } else {
            rng.gen_range(0.2f64.ln()..5.0f64.ln()).exp()
        };
        let q = q11(
            t,
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-1.2..1.2),
            rng.gen_range(-2.0..2.0),
        );
        worst = worst.max(rel_dev(kernel_fiber_integral(&q)?, kernel_fourier(&q)?));
    }
    Ok((worst, "6 queries, t in [0.1, 10]".into()))
}

/// Single-frequency fiber kernel against its eigenfunction series at
/// K = 60 (converged to rounding when tau t >= 0.25).
fn check_fiber_series(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut cases = vec![(0.3, 1.3, 1.0, -0.5), (0.4, 1.3, 0.7, -0.2)];
    for _ in 0..2 {
        loop {
            let t = rng.gen_range(0.2..1.0);
            let tau = rng.gen_range(0.5..3.0);
            if t * tau >= 0.25 {
                cases.push((t, tau, rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5)));
                break;
            }
        }
    }
    let mut worst = 0.0f64;
    for (t, tau, x, y) in cases {
        let closed = fiber_kernel(t, tau, &[x], &[y])?;
        let mut series = 0.0f64;
        for k in (0..=60u32).rev() {
            let idx = MultiIndex::new(vec![k]);
            series += (-(2.0 * k as f64 + 1.0) * tau * t).exp()
                * hermite_scaled(&idx, tau, &[x])?
                * hermite_scaled(&idx, tau, &[y])?;
        }
        worst = worst.max(rel_dev(closed, series));
    }
    Ok((worst, "4 fiber evaluations vs 60-term series".into()))
}

/// Applies the kernel by direct quadrature to a sampled function and
/// compares with the spectral semigroup on the grid. The test function has
/// an exactly vanishing x''-mean, so the flagged zero-frequency slice
/// (frozen by design on both routes) carries no content.
fn odd_modulated_bump(cfg: Arc<GrushinConfig>) -> Result<GridFunction> {
    GridFunction::sample(cfg, |xp, xpp| {
        let radial = (-(xp[0] - 0.3) * (xp[0] - 0.3) / 1.62).exp();
        let trans = (3.0 * xpp[0]).sin() * (-xpp[0] * xpp[0] / 1.28).exp();
        Complex64::new(radial * trans, 0.0)
    })
}

/// Applies the kernel integral to `odd_modulated_bump` samples at probe
/// nodes. The y-sums are truncated where the bump envelopes sit below
/// 1e-17, the radial profile is the kernel module's closed form, and the
/// plane-wave factor along the y''-axis is accumulated by an exact
/// rotation recurrence (the direct per-pair cosine sum costs two orders
/// of magnitude more for the same digits).
fn kernel_apply_at_probes(
    t: f64,
    f: &GridFunction,
    probes: &[(usize, usize)],
) -> Result<Vec<f64>> {
    let cfg = f.config();
    let axis_p = cfg.x_prime_axis();
    let axis_pp = cfg.x_doubleprime_axis();
    let wp = cfg.x_prime_weights();
    let dw = cfg.dx_doubleprime();
    let vals = f.values();
    let ip = probes[0].0;
    debug_assert!(probes.iter().all(|p| p.0 == ip), "probes share one x' node");
    let xp = axis_p[ip];
    let lo = axis_pp
        .iter()
        .position(|v| v.abs() <= 6.0)
        .ok_or_else(|| GrushinError::InvalidArgument("x''-box too small".into()))?;
    let hi = axis_pp.iter().rposition(|v| v.abs() <= 6.0).unwrap();
    let r_max = probes
        .iter()
        .map(|&(_, q)| axis_pp[q].abs())
        .fold(0.0, f64::max)
        + 6.5;
    let cap = crate::heat::radial_cutoff(1);
    // 16-node panels spanning ~1.5 oscillation periods of the slowest
    // envelope hold the panel error near 1e-12.
    let width = (3.0 * PI * t / r_max).min(0.5);
    let rule = crate::quad::composite_rule(0.0, cap, width, 16);
    let prefac = 2.0 * (2.0 * PI * t).powf(-1.5);
    let mut out = vec![0.0; probes.len()];
    let mut acc = vec![0.0; probes.len()];
    for (jp, &yp) in axis_p.iter().enumerate() {
        if (yp - 0.3).abs() > 8.0 {
            continue;
        }
        let p_sq = (xp + yp) * (xp + yp);
        let m_sq = (xp - yp) * (xp - yp);
        acc.iter_mut().for_each(|a| *a = 0.0);
        for (&tau, &wq) in rule.nodes.iter().zip(&rule.weights) {
            if tau <= 0.0 {
                continue;
            }
            let wpsi = wq * crate::heat::psi_profile(tau, p_sq, m_sq, t, 1);
            let u = tau / t;
            let step = Complex64::from_polar(1.0, -u * dw);
            let mut phase = Complex64::from_polar(1.0, -u * axis_pp[lo]);
            let mut s = Complex64::new(0.0, 0.0);
            for j in lo..=hi {
                s += vals[[jp, j]].re * phase;
                phase *= step;
            }
            for (a, &(_, q)) in acc.iter_mut().zip(probes) {
                // sum_j f_j cos((x'' - y''_j) u) = Re(e^{i u x''} s)
                let probe_phase = Complex64::from_polar(1.0, u * axis_pp[q]);
                *a += wpsi * (probe_phase * s).re;
            }
        }
        for (o, a) in out.iter_mut().zip(&acc) {
            *o += wp[jp] * dw * prefac * a;
        }
    }
    Ok(out)
}

fn check_kernel_vs_semigroup(ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    ctx.need_1x1()?;
    let plan = ctx.plan()?;
    let cfg = &ctx.config;
    let f = odd_modulated_bump(cfg.clone())?;
    let n_pp = cfg.x_doubleprime_grid.points;
    let np = cfg.x_prime_grid.points;
    // Probe column near the bump center; transverse offsets on-grid and
    // away from x'' = 0, where odd symmetry makes both sides vanish.
    let ip = np / 2 + np / 48;
    let probes: Vec<(usize, usize)> = [4i64, 12, -20, 32]
        .iter()
        .map(|&off| (ip, (n_pp as i64 / 2 + off) as usize))
        .collect();
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &t in &[0.5f64, 1.0] {
        let evolved = heat_semigroup(plan.as_ref(), &f, t)?;
        let via_kernel = kernel_apply_at_probes(t, &f, &probes)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for (&(ip, ipp), &k) in probes.iter().zip(&via_kernel) {
            let s = evolved.values()[[ip, ipp]].re;
            num += (k - s) * (k - s);
            den += s * s;
        }
        let dev = (num / den).sqrt();
        if dev > worst {
            worst = dev;
            at = format!("t={t}");
        }
    }
    Ok((worst, format!("4 probes, t in {{0.5, 1}}; worst at {at}")))
}

/// Long-time variant on an enlarged box: at t = 10 the periodized box flow
/// differs from the continuum kernel by image terms decaying like
/// exp(-pi d''_image / 2t), so the x''-halfwidth is sized to hold that
/// leakage under the tolerance. Absolute comparison at the probe scale.
fn check_kernel_vs_semigroup_longtime(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let cfg = Arc::new(GrushinConfig::new(
        1,
        1,
        64,
        AxisGrid {
            half_width: 16.0,
            points: 320,
        },
        AxisGrid {
            half_width: 48.0,
            points: 768,
        },
    )?);
    let plan = TransformPlan::new(cfg.clone())?;
    let f = odd_modulated_bump(cfg.clone())?;
    let t = 10.0;
    let evolved = heat_semigroup(&plan, &f, t)?;
    let n_pp = cfg.x_doubleprime_grid.points;
    let probes: Vec<(usize, usize)> = [12i64, 24, -40, 64]
        .iter()
        .map(|&off| (163usize, (n_pp as i64 / 2 + off) as usize))
        .collect();
    let via_kernel = kernel_apply_at_probes(t, &f, &probes)?;
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (&(ip, ipp), &k) in probes.iter().zip(&via_kernel) {
        let s = evolved.values()[[ip, ipp]].re;
        worst = worst.max((k - s).abs());
        scale = scale.max(s.abs());
    }
    Ok((
        worst,
        format!("t = 10, 4 probes, largest |value| {scale:.3e}"),
    ))
}

/// Finite-difference residual of the heat equation refines at second order
/// on the true kernel.
fn check_heat_equation_refinement(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for i in 0..5 {
        let t = rng.gen_range(0.3f64.ln()..1.2f64.ln()).exp();
        let x = KernelPoint::new(
            vec![rng.gen_range(-1.2..1.2)],
            vec![rng.gen_range(-1.5..1.5)],
        );
        let y = KernelPoint::new(
            vec![rng.gen_range(-1.2..1.2)],
            vec![rng.gen_range(-1.5..1.5)],
        );
        let kernel = move |tt: f64, xx: &KernelPoint| {
            kernel_point(&HeatKernelQuery::new(tt, xx.clone(), y.clone()))
        };
        let ratio = heat_equation_refinement_ratio(&kernel, t, &x, 0.03 * t, 0.06)?;
        let dev = (ratio - 4.0).abs();
        if dev > worst {
            worst = dev;
            at = format!("query {i}: ratio {ratio:.3}");
        }
    }
    Ok((worst, format!("5 queries; worst at {at}")))
}

/// Control: a time-dilated kernel leaves a first-order equation defect, so
/// the residual stops refining (ratio near 1, far from 4).
fn check_control_time_dilated(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for i in 0..2 {
        let t = rng.gen_range(0.5..1.0);
        let x = KernelPoint::new(
            vec![rng.gen_range(-0.8..0.8)],
            vec![rng.gen_range(-1.0..1.0)],
        );
        let y = KernelPoint::new(
            vec![rng.gen_range(-0.8..0.8)],
            vec![rng.gen_range(-1.0..1.0)],
        );
        let wrong = move |tt: f64, xx: &KernelPoint| {
            kernel_point(&HeatKernelQuery::new(1.12 * tt, xx.clone(), y.clone()))
        };
        let ratio = heat_equation_refinement_ratio(&wrong, t, &x, 0.03 * t, 0.06)?;
        let dev = (ratio - 1.0).abs();
        if dev > worst {
            worst = dev;
            at = format!("query {i}: ratio {ratio:.3}");
        }
    }
    Ok((worst, format!("2 detuned queries; {at}")))
}

fn check_chapman_kolmogorov(_ctx: &Ctx, rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    for &(s, t) in &[(0.4f64, 0.6f64), (0.3, 1.0), (0.8, 0.8)] {
        let x = KernelPoint::new(
            vec![rng.gen_range(-0.8..0.8)],
            vec![rng.gen_range(-1.0..1.0)],
        );
        let y = KernelPoint::new(
            vec![rng.gen_range(-0.8..0.8)],
            vec![rng.gen_range(-1.0..1.0)],
        );
        let (composed, direct) = chapman_kolmogorov(s, t, &x, &y, 14)?;
        worst = worst.max(rel_dev(composed, direct));
    }
    Ok((worst, "3 (s, t) splits".into()))
}

/// int |p_t(x, .)|^2 dy three ways: brute quadrature, the closed-form
/// radial reduction, and p_{2t}(x, x) via the semigroup law; plus a decay
/// sanity probe (the norm shrinks with t).
fn check_kernel_l2_routes(_ctx: &Ctx, _rng: &mut ChaCha8Rng) -> Result<(f64, String)> {
    let mut worst = 0.0f64;
    let mut at = String::new();
    for &t in &[0.1f64, 1.0, 10.0] {
        for &(xp, xpp) in &[(0.0f64, 0.0f64), (0.7, 0.3)] {
            let x = KernelPoint::new(vec![xp], vec![xpp]);
            let direct = kernel_l2_norm_direct(t, &x, 18)?;
            let reduced = kernel_l2_norm_reduced(t, &x)?;
            let via_semigroup = kernel_l2_norm_semigroup(t, &x)?;
            let dev = rel_dev(direct, reduced)
                .max(rel_dev(reduced, via_semigroup))
                .max(rel_dev(direct, via_semigroup));
            if dev > worst {
                worst = dev;
                at = format!("t={t}, x'={xp}");
            }
        }
    }
    let origin = KernelPoint::new(vec![0.0], vec![0.0]);
    if kernel_l2_norm_reduced(2.0, &origin)? >= kernel_l2_norm_reduced(1.0, &origin)? {
        return Ok((1.0, "norm failed to decay from t = 1 to t = 2".into()));
    }
    Ok((worst, format!("6 (t, x) pairs, 3 routes; worst at {at}")))
}

// Registry and runner ------------------------------------------------------

fn registry() -> Vec<Check> {
    vec![
        Check {
            name: "mehler-closed-vs-series",
            group: "special",
            tolerance_name: "mehler_agreement",
            run: check_mehler_series,
        },
        Check {
            name: "special-frozen-values",
            group: "special",
            tolerance_name: "special_relative",
            run: check_special_frozen,
        },
        Check {
            name: "bessel-half-integer-forms",
            group: "special",
            tolerance_name: "special_relative",
            run: check_bessel_half_integer,
        },
        Check {
            name: "bessel-ratio-near-zero",
            group: "special",
            tolerance_name: "special_near_zero",
            run: check_bessel_ratio_near_zero,
        },
        Check {
            name: "hyperbolic-angle-identity",
            group: "special",
            tolerance_name: "hyperbolic_identity",
            run: check_hyperbolic_identity,
        },
        Check {
            name: "round-trip-band-limited",
            group: "transform",
            tolerance_name: "inversion_bandlimited",
            run: check_round_trip_band_limited,
        },
        Check {
            name: "plancherel-band-limited",
            group: "transform",
            tolerance_name: "plancherel_bandlimited",
            run: check_plancherel_band_limited,
        },
        Check {
            name: "transform-adjointness",
            group: "transform",
            tolerance_name: "plancherel_bandlimited",
            run: check_transform_adjointness,
        },
        Check {
            name: "round-trip-schwartz",
            group: "transform",
            tolerance_name: "inversion_schwartz",
            run: check_round_trip_schwartz,
        },
        Check {
            name: "plancherel-schwartz",
            group: "transform",
            tolerance_name: "plancherel_schwartz",
            run: check_plancherel_schwartz,
        },
        Check {
            name: "shell-gram-orthonormality",
            group: "transform",
            tolerance_name: "gram_orthonormality",
            run: check_shell_gram,
        },
        Check {
            name: "mode-concentration",
            group: "transform",
            tolerance_name: "mode_concentration",
            run: check_mode_concentration,
        },
        Check {
            name: "integral-definition",
            group: "transform",
            tolerance_name: "integral_definition",
            run: check_integral_definition,
        },
        Check {
            name: "stage-order-immaterial",
            group: "transform",
            tolerance_name: "composition_order",
            run: check_stage_order,
        },
        Check {
            name: "separated-variables",
            group: "transform",
            tolerance_name: "separated_variables",
            run: check_separated_variables,
        },
        Check {
            name: "fd-intertwining-order",
            group: "spectral",
            tolerance_name: "order_window",
            run: check_fd_intertwining_order,
        },
        Check {
            name: "eigenfunction-fd-order",
            group: "spectral",
            tolerance_name: "order_window",
            run: check_eigenfunction_fd_order,
        },
        Check {
            name: "control-off-eigenvalue",
            group: "spectral",
            tolerance_name: "order_window",
            run: check_control_off_eigenvalue,
        },
        Check {
            name: "semigroup-algebra",
            group: "spectral",
            tolerance_name: "semigroup_algebra",
            run: check_semigroup_algebra,
        },
        Check {
            name: "strong-continuity",
            group: "spectral",
            tolerance_name: "strong_continuity",
            run: check_strong_continuity,
        },
        Check {
            name: "symmetry-commutation",
            group: "spectral",
            tolerance_name: "symmetry_commutation",
            run: check_symmetry_commutation,
        },
        Check {
            name: "dilation-covariance",
            group: "spectral",
            tolerance_name: "symmetry_commutation",
            run: check_dilation_covariance,
        },
        Check {
            name: "greens-identity-fd",
            group: "spectral",
            tolerance_name: "green_symmetry",
            run: check_greens_identity,
        },
        Check {
            name: "kernel-frozen-values",
            group: "heat",
            tolerance_name: "kernel_quadrature",
            run: check_kernel_frozen,
        },
        Check {
            name: "fourier-vs-hankel-line",
            group: "heat",
            tolerance_name: "fourier_hankel",
            run: check_fourier_vs_hankel_line,
        },
        Check {
            name: "fourier-vs-hankel-plane",
            group: "heat",
            tolerance_name: "fourier_hankel",
            run: check_fourier_vs_hankel_plane,
        },
        Check {
            name: "fourier-vs-hankel-space",
            group: "heat",
            tolerance_name: "fourier_hankel",
            run: check_fourier_vs_hankel_space,
        },
        Check {
            name: "kernel-imag-residual",
            group: "heat",
            tolerance_name: "kernel_imag_residual",
            run: check_kernel_imag_residual,
        },
        Check {
            name: "kernel-symmetry",
            group: "heat",
            tolerance_name: "kernel_symmetry",
            run: check_kernel_symmetry,
        },
        Check {
            name: "kernel-scaling",
            group: "heat",
            tolerance_name: "kernel_scaling",
            run: check_kernel_scaling,
        },
        Check {
            name: "kernel-rotation",
            group: "heat",
            tolerance_name: "kernel_rotation",
            run: check_kernel_rotation,
        },
        Check {
            name: "kernel-change-of-variable",
            group: "heat",
            tolerance_name: "scaled_form_agreement",
            run: check_kernel_change_of_variable,
        },
        Check {
            name: "fiber-series",
            group: "heat",
            tolerance_name: "fiber_series",
            run: check_fiber_series,
        },
        Check {
            name: "kernel-vs-semigroup",
            group: "heat",
            tolerance_name: "kernel_semigroup",
            run: check_kernel_vs_semigroup,
        },
        Check {
            name: "kernel-vs-semigroup-longtime",
            group: "heat",
            tolerance_name: "kernel_semigroup_longtime",
            run: check_kernel_vs_semigroup_longtime,
        },
        Check {
            name: "heat-equation-refinement",
            group: "heat",
            tolerance_name: "heat_equation_ratio_window",
            run: check_heat_equation_refinement,
        },
        Check {
            name: "control-time-dilated-kernel",
            group: "heat",
            tolerance_name: "heat_equation_ratio_window",
            run: check_control_time_dilated,
        },
        Check {
            name: "chapman-kolmogorov",
            group: "heat",
            tolerance_name: "chapman_kolmogorov",
            run: check_chapman_kolmogorov,
        },
        Check {
            name: "kernel-l2-routes",
            group: "heat",
            tolerance_name: "kernel_l2_routes",
            run: check_kernel_l2_routes,
        },
    ]
}

/// The names and tolerance keys of every registered check, in report order.
pub fn check_names() -> Vec<(String, String)> {
    registry()
        .iter()
        .map(|c| (c.name.to_string(), c.group.to_string()))
        .collect()
}

/// Runs the suite (or the subset whose names contain `filter`) and collects
/// a deterministic report. Rows that error are recorded as failed with
/// measured = -1 and the error text in `detail`.
pub fn run_verification(
    config: &GrushinConfig,
    seed: u64,
    filter: Option<&str>,
    tolerance_scale: f64,
) -> Result<VerificationReport> {
    config.validate()?;
    if !(tolerance_scale > 0.0) || !tolerance_scale.is_finite() {
        return Err(GrushinError::InvalidArgument(format!(
            "tolerance scale must be positive and finite, got {tolerance_scale}"
        )));
    }
    let ctx = Ctx {
        config: Arc::new(config.clone()),
        plan: RefCell::new(None),
    };
    let mut outcomes = Vec::new();
    for check in registry() {
        if let Some(pat) = filter {
            if !check.name.contains(pat) && !check.group.contains(pat) {
                continue;
            }
        }
        let tolerance = config.tolerance(check.tolerance_name) * tolerance_scale;
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, check.name));
        let (measured, passed, detail) = match (check.run)(&ctx, &mut rng) {
            Ok((m, d)) => (m, m.is_finite() && m <= tolerance, d),
            Err(e) => (-1.0, false, format!("errored: {e}")),
        };
        outcomes.push(CheckOutcome {
            name: check.name.to_string(),
            group: check.group.to_string(),
            measured,
            tolerance,
            passed,
            detail,
            millis: started.elapsed().as_millis() as u64,
        });
    }
    if outcomes.is_empty() {
        return Err(GrushinError::InvalidArgument(format!(
            "filter {:?} matched no checks",
            filter.unwrap_or("")
        )));
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    let failed = outcomes.len() - passed;
    Ok(VerificationReport {
        config: config.clone(),
        seed,
        generator: "chacha8".into(),
        tolerance_scale,
        passed,
        failed,
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique_and_tolerances_known() {
        let checks = registry();
        let defaults = crate::config::default_tolerances();
        let mut names: Vec<&str> = checks.iter().map(|c| c.name).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), checks.len(), "duplicate check names");
        for c in checks {
            assert!(
                defaults.contains_key(c.tolerance_name),
                "check {} uses unknown tolerance {}",
                c.name,
                c.tolerance_name
            );
        }
    }

    #[test]
    fn sub_seed_separates_rows() {
        let a = sub_seed(7, "row-a");
        let b = sub_seed(7, "row-b");
        assert_ne!(a, b);
        assert_eq!(a, sub_seed(7, "row-a"));
    }

    #[test]
    fn special_rows_pass_and_serialize_deterministically() {
        let cfg = GrushinConfig::desk_default();
        let r1 = run_verification(&cfg, 0, Some("special"), 1.0).unwrap();
        assert!(r1.all_passed(), "{}", r1.render_text());
        let r2 = run_verification(&cfg, 0, Some("special"), 1.0).unwrap();
        let s1 = serde_json::to_string(&r1).unwrap();
        let s2 = serde_json::to_string(&r2).unwrap();
        assert_eq!(s1, s2);
    }

    #[test]
    fn unknown_filter_is_rejected() {
        let cfg = GrushinConfig::desk_default();
        assert!(run_verification(&cfg, 0, Some("no-such-row"), 1.0).is_err());
    }

    #[test]
    fn scaled_tolerances_shrink_the_pass_set() {
        // At a hostile scale the frozen-value rows must fail: their measured
        // deviations are real, nonzero numbers.
        let cfg = GrushinConfig::desk_default();
        let r = run_verification(&cfg, 0, Some("kernel-frozen-values"), 1e-8).unwrap();
        assert!(!r.all_passed());
    }
}
