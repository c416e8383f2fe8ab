//! Run configuration: dimensions, grids, Hermite cutoff, and named
//! tolerances. Configs serialize to versioned JSON; unknown keys are
//! rejected so typos fail loudly instead of silently using defaults.

use crate::error::{GrushinError, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub const CONFIG_VERSION: u32 = 1;

/// One uniform tensor-grid block: `points` samples per axis on
/// [-half_width, half_width].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisGrid {
    pub half_width: f64,
    pub points: usize,
}

/// Geometry and discretization for the operator
/// G = -Laplacian_{x'} - |x'|^2 Laplacian_{x''} on R^(d') x R^(d'').
///
/// x'-axes carry a closed uniform grid on [-L', L'] with trapezoid
/// quadrature weights; x''-axes carry a periodic uniform grid on
/// [-L'', L'') (right endpoint excluded). The discrete frequency grid for
/// x'' is (pi / L'') * {-N''/2, ..., N''/2 - 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrushinConfig {
    pub version: u32,
    pub d_prime: usize,
    pub d_doubleprime: usize,
    /// Homogeneous dimension; must equal d' + 2 d''.
    pub homogeneous_dimension: usize,
    /// Largest total Hermite degree |k| kept by the transform.
    pub hermite_cutoff: u32,
    pub x_prime_grid: AxisGrid,
    pub x_doubleprime_grid: AxisGrid,
    /// Named tolerances; entries override the built-in defaults.
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

/// Built-in tolerance table. Every name consumed anywhere in the library
/// appears here; config files may override values but not invent names.
pub fn default_tolerances() -> BTreeMap<String, f64> {
    let mut map = BTreeMap::new();
    for (name, value) in [
        ("plancherel_bandlimited", 1e-9),
        ("plancherel_schwartz", 1e-4),
        ("inversion_bandlimited", 1e-9),
        ("inversion_schwartz", 1e-4),
        ("gram_orthonormality", 1e-8),
        ("composition_order", 1e-12),
        ("integral_definition", 1e-12),
        ("separated_variables", 1e-10),
        ("mode_concentration", 1e-9),
        ("order_window", 0.3),
        ("semigroup_algebra", 1e-9),
        ("strong_continuity", 1e-4),
        ("symmetry_commutation", 1e-9),
        ("green_symmetry", 1e-8),
        ("mehler_agreement", 1e-10),
        ("hyperbolic_identity", 1e-13),
        ("special_relative", 1e-12),
        ("special_near_zero", 1e-10),
        ("kernel_quadrature", 1e-10),
        ("kernel_imag_residual", 1e-12),
        ("fourier_hankel", 1e-8),
        ("kernel_semigroup", 1e-6),
        ("kernel_semigroup_longtime", 1e-8),
        ("kernel_symmetry", 1e-12),
        ("kernel_scaling", 1e-10),
        ("kernel_rotation", 1e-12),
        ("scaled_form_agreement", 1e-12),
        ("fiber_series", 1e-10),
        ("chapman_kolmogorov", 1e-6),
        ("heat_equation_ratio_window", 0.5),
        ("kernel_l2_routes", 1e-6),
    ] {
        map.insert(name.to_string(), value);
    }
    map
}

impl GrushinConfig {
    /// Desk-scale defaults: d' = d'' = 1, L' = 12, N' = 256, L'' = 16,
    /// N'' = 256, Hermite cutoff 64.
    pub fn desk_default() -> Self {
        GrushinConfig {
            version: CONFIG_VERSION,
            d_prime: 1,
            d_doubleprime: 1,
            homogeneous_dimension: 3,
            hermite_cutoff: 64,
            x_prime_grid: AxisGrid {
                half_width: 12.0,
                points: 256,
            },
            x_doubleprime_grid: AxisGrid {
                half_width: 16.0,
                points: 256,
            },
            tolerances: BTreeMap::new(),
        }
    }

    /// Builds a validated config with explicit geometry and empty tolerance
    /// overrides.
    pub fn new(
        d_prime: usize,
        d_doubleprime: usize,
        hermite_cutoff: u32,
        x_prime_grid: AxisGrid,
        x_doubleprime_grid: AxisGrid,
    ) -> Result<Self> {
        let cfg = GrushinConfig {
            version: CONFIG_VERSION,
            d_prime,
            d_doubleprime,
            homogeneous_dimension: d_prime + 2 * d_doubleprime,
            hermite_cutoff,
            x_prime_grid,
            x_doubleprime_grid,
            tolerances: BTreeMap::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(GrushinError::ConfigValidation(format!(
                "unsupported config version {}, expected {CONFIG_VERSION}",
                self.version
            )));
        }
        if self.d_prime == 0 || self.d_doubleprime == 0 {
            return Err(GrushinError::ConfigValidation(
                "d_prime and d_doubleprime must both be at least 1".into(),
            ));
        }
        if self.homogeneous_dimension != self.d_prime + 2 * self.d_doubleprime {
            return Err(GrushinError::ConfigValidation(format!(
                "homogeneous_dimension must equal d' + 2 d'' = {}, got {}",
                self.d_prime + 2 * self.d_doubleprime,
                self.homogeneous_dimension
            )));
        }
        for (name, grid) in [
            ("x_prime_grid", &self.x_prime_grid),
            ("x_doubleprime_grid", &self.x_doubleprime_grid),
        ] {
            if !(grid.half_width > 0.0) || !grid.half_width.is_finite() {
                return Err(GrushinError::ConfigValidation(format!(
                    "{name}.half_width must be positive and finite"
                )));
            }
        }
        if self.x_prime_grid.points < 2 {
            return Err(GrushinError::ConfigValidation(
                "x_prime_grid.points must be at least 2".into(),
            ));
        }
        if self.x_doubleprime_grid.points < 4 || self.x_doubleprime_grid.points % 2 != 0 {
            return Err(GrushinError::ConfigValidation(format!(
                "x_doubleprime_grid.points must be even and at least 4, got {}",
                self.x_doubleprime_grid.points
            )));
        }
        let defaults = default_tolerances();
        for name in self.tolerances.keys() {
            if !defaults.contains_key(name) {
                return Err(GrushinError::ConfigValidation(format!(
                    "unknown tolerance name {name:?}"
                )));
            }
        }
        for (name, &v) in &self.tolerances {
            if !(v > 0.0) || !v.is_finite() {
                return Err(GrushinError::ConfigValidation(format!(
                    "tolerance {name:?} must be positive and finite"
                )));
            }
        }
        Ok(())
    }

    /// Named tolerance, with config overrides taking precedence over the
    /// built-in table. Panics on names absent from the table; those are
    /// programming errors, not user input.
    pub fn tolerance(&self, name: &str) -> f64 {
        if let Some(&v) = self.tolerances.get(name) {
            return v;
        }
        *default_tolerances()
            .get(name)
            .unwrap_or_else(|| panic!("unknown tolerance name {name:?}"))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: GrushinConfig = serde_json::from_str(s)
            .map_err(|e| GrushinError::ConfigValidation(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization cannot fail")
    }

    // Grid geometry -------------------------------------------------------

    /// Spacing of the closed x'-axis grid: 2 L' / (N' - 1).
    pub fn dx_prime(&self) -> f64 {
        2.0 * self.x_prime_grid.half_width / (self.x_prime_grid.points as f64 - 1.0)
    }

    /// Spacing of the periodic x''-axis grid: 2 L'' / N''.
    pub fn dx_doubleprime(&self) -> f64 {
        2.0 * self.x_doubleprime_grid.half_width / self.x_doubleprime_grid.points as f64
    }

    /// Frequency spacing pi / L''.
    pub fn dxi(&self) -> f64 {
        std::f64::consts::PI / self.x_doubleprime_grid.half_width
    }

    /// x'-axis sample points, both endpoints included.
    pub fn x_prime_axis(&self) -> Vec<f64> {
        let n = self.x_prime_grid.points;
        let l = self.x_prime_grid.half_width;
        let dx = self.dx_prime();
        (0..n).map(|i| -l + i as f64 * dx).collect()
    }

    /// Trapezoid weights on one x'-axis.
    pub fn x_prime_weights(&self) -> Vec<f64> {
        crate::quad::trapezoid_weights(self.x_prime_grid.points, self.dx_prime())
    }

    /// x''-axis sample points, right endpoint excluded.
    pub fn x_doubleprime_axis(&self) -> Vec<f64> {
        let n = self.x_doubleprime_grid.points;
        let l = self.x_doubleprime_grid.half_width;
        let dx = self.dx_doubleprime();
        (0..n).map(|j| -l + j as f64 * dx).collect()
    }

    /// Monotonic frequency samples (p - N''/2) * pi / L'', p = 0..N''-1.
    pub fn xi_axis(&self) -> Vec<f64> {
        let n = self.x_doubleprime_grid.points;
        let dxi = self.dxi();
        (0..n)
            .map(|p| (p as f64 - n as f64 / 2.0) * dxi)
            .collect()
    }

    /// Index of the zero frequency on the monotonic axis: N''/2.
    pub fn xi_zero_index(&self) -> usize {
        self.x_doubleprime_grid.points / 2
    }

    /// Physical-space array shape: d' axes of N' then d'' axes of N''.
    pub fn shape(&self) -> Vec<usize> {
        let mut s = vec![self.x_prime_grid.points; self.d_prime];
        s.extend(std::iter::repeat(self.x_doubleprime_grid.points).take(self.d_doubleprime));
        s
    }

    /// Multi-indices kept by the transform, in the canonical graded order.
    pub fn multi_indices(&self) -> Vec<crate::special::MultiIndex> {
        crate::special::enumerate_multi_indices(self.d_prime, self.hermite_cutoff)
    }

    /// Transform-side array shape: multi-index axis then d'' frequency axes.
    pub fn dual_shape(&self) -> Vec<usize> {
        let mut s = vec![self.multi_indices().len()];
        s.extend(std::iter::repeat(self.x_doubleprime_grid.points).take(self.d_doubleprime));
        s
    }
}
