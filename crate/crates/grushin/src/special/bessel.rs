//! Bessel functions of the first kind J_alpha for real order alpha > -1,
//! plus the even extension J_alpha(z) / z^alpha used by radial Fourier
//! inversion in d'' dimensions (order alpha = (d'' - 2)/2).
//!
//! Evaluation switches at z = 12: ascending power series below, Hankel
//! asymptotic expansion above. Both branches are cross-validated against
//! each other on the overlap window in the tests.

const BRANCH_SWITCH: f64 = 12.0;

/// Gamma function on the positive axis (Lanczos, g = 7, 9 terms), with the
/// reflection formula for arguments below 1/2.
pub fn gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut acc = G[0];
    for (i, &c) in G.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * acc
}

/// J_alpha(z) for alpha > -1 and z >= 0.
///
/// For alpha < 0 the value diverges as z -> 0+; the ratio form
/// [`bessel_j_ratio`] is the stable object there and is what the radial
/// transforms consume.
pub fn bessel_j(alpha: f64, z: f64) -> f64 {
    assert!(alpha > -1.0, "order must exceed -1, got {alpha}");
    assert!(z >= 0.0, "argument must be nonnegative, got {z}");
    if z == 0.0 {
        return if alpha == 0.0 {
            1.0
        } else if alpha > 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
    }
    if z <= BRANCH_SWITCH {
        series_branch(alpha, z)
    } else {
        asymptotic_branch(alpha, z)
    }
}

/// J_alpha(z) / z^alpha, extended continuously to z = 0 where it equals
/// 2^(-alpha) / Gamma(alpha + 1). Even in z; well behaved for all
/// alpha > -1 including negative orders.
pub fn bessel_j_ratio(alpha: f64, z: f64) -> f64 {
    assert!(alpha > -1.0, "order must exceed -1, got {alpha}");
    let z = z.abs();
    if z <= BRANCH_SWITCH {
        // Series for J/z^alpha: 2^(-alpha) sum_m (-1)^m (z/2)^(2m) / (m! Gamma(m+alpha+1)).
        let mut term = 0.5f64.powf(alpha) / gamma(alpha + 1.0);
        let q = 0.25 * z * z;
        let mut acc = term;
        for m in 0..200 {
            let mf = m as f64;
            term *= -q / ((mf + 1.0) * (mf + 1.0 + alpha));
            acc += term;
            if term.abs() < 1e-17 * acc.abs().max(1e-300) {
                break;
            }
        }
        acc
    } else {
        asymptotic_branch(alpha, z) / z.powf(alpha)
    }
}

/// Ascending series J_alpha(z) = sum_m (-1)^m (z/2)^(2m+alpha) / (m! Gamma(m+alpha+1)).
fn series_branch(alpha: f64, z: f64) -> f64 {
    let mut term = (0.5 * z).powf(alpha) / gamma(alpha + 1.0);
    let q = 0.25 * z * z;
    let mut acc = term;
    for m in 0..200 {
        let mf = m as f64;
        term *= -q / ((mf + 1.0) * (mf + 1.0 + alpha));
        acc += term;
        if term.abs() < 1e-17 * acc.abs().max(1e-300) {
            break;
        }
    }
    acc
}

/// Hankel expansion: J_alpha(z) ~ sqrt(2/(pi z)) [P cos(chi) - Q sin(chi)],
/// chi = z - (alpha/2 + 1/4) pi. The modulus series P, Q are summed until
/// the terms stop decreasing (they are asymptotic, not convergent).
fn asymptotic_branch(alpha: f64, z: f64) -> f64 {
    let mu = 4.0 * alpha * alpha;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    let mut prev = f64::INFINITY;
    for k in 1..=30 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * z);
        if term.abs() >= prev {
            break;
        }
        prev = term.abs();
        // Terms alternate between the Q (odd k) and P (even k) series with
        // signs -, -, +, +, -, -, ...
        let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 1 {
            q += sign * term;
        } else {
            p += sign * term;
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = z - (0.5 * alpha + 0.25) * std::f64::consts::PI;
    (2.0 / (std::f64::consts::PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
}
