//! Sampled functions on the tensor grid and coefficient arrays on the
//! transform side, with the weighted norms that make the discrete transform
//! an isometry:
//!
//! * physical side: trapezoid weights on x'-axes, uniform periodic weights
//!   on x''-axes;
//! * transform side: counting measure over multi-indices crossed with the
//!   trapezoid rule on the frequency grid, plus the verbatim zero-frequency
//!   slice which bypasses the Hermite stage and carries x'-weights.

use crate::config::GrushinConfig;
use crate::error::{GrushinError, Result};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use std::sync::Arc;

/// A complex-valued function sampled on the configured grid.
#[derive(Debug, Clone)]
pub struct GridFunction {
    config: Arc<GrushinConfig>,
    values: ArrayD<Complex64>,
}

impl GridFunction {
    pub fn zeros(config: Arc<GrushinConfig>) -> Self {
        let shape = config.shape();
        GridFunction {
            config,
            values: ArrayD::zeros(IxDyn(&shape)),
        }
    }

    pub fn from_values(config: Arc<GrushinConfig>, values: ArrayD<Complex64>) -> Result<Self> {
        let expected = config.shape();
        if values.shape() != expected.as_slice() {
            return Err(GrushinError::ShapeMismatch {
                expected,
                got: values.shape().to_vec(),
            });
        }
        Ok(GridFunction { config, values })
    }

    /// Samples `f(x', x'')` at every grid point. Rejects non-finite values.
    pub fn sample<F>(config: Arc<GrushinConfig>, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64]) -> Complex64,
    {
        let xp_axis = config.x_prime_axis();
        let xpp_axis = config.x_doubleprime_axis();
        let dp = config.d_prime;
        let dpp = config.d_doubleprime;
        let mut out = Self::zeros(config);
        let mut xp = vec![0.0; dp];
        let mut xpp = vec![0.0; dpp];
        for (idx, v) in out.values.indexed_iter_mut() {
            for a in 0..dp {
                xp[a] = xp_axis[idx[a]];
            }
            for a in 0..dpp {
                xpp[a] = xpp_axis[idx[dp + a]];
            }
            let val = f(&xp, &xpp);
            if !val.re.is_finite() || !val.im.is_finite() {
                return Err(GrushinError::NonFinite(format!(
                    "sample at x' = {xp:?}, x'' = {xpp:?}"
                )));
            }
            *v = val;
        }
        Ok(out)
    }

    pub fn config(&self) -> &Arc<GrushinConfig> {
        &self.config
    }

    pub fn values(&self) -> &ArrayD<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.values
    }

    /// Quadrature weight attached to one grid index.
    pub fn point_weight(&self, idx: &[usize]) -> f64 {
        let wp = self.config.x_prime_weights();
        let dxpp = self.config.dx_doubleprime();
        let dp = self.config.d_prime;
        let mut w = 1.0;
        for a in 0..dp {
            w *= wp[idx[a]];
        }
        w * dxpp.powi(self.config.d_doubleprime as i32)
    }

    /// Weighted L^2 inner product <self, other> (conjugate on `other`).
    pub fn l2_inner(&self, other: &GridFunction) -> Result<Complex64> {
        if self.values.shape() != other.values.shape() {
            return Err(GrushinError::ShapeMismatch {
                expected: self.values.shape().to_vec(),
                got: other.values.shape().to_vec(),
            });
        }
        let wp = self.config.x_prime_weights();
        let dp = self.config.d_prime;
        let wpp = self
            .config
            .dx_doubleprime()
            .powi(self.config.d_doubleprime as i32);
        let mut acc = Complex64::new(0.0, 0.0);
        for ((idx, a), b) in self.values.indexed_iter().zip(other.values.iter()) {
            let mut w = wpp;
            for ax in 0..dp {
                w *= wp[idx[ax]];
            }
            acc += w * a * b.conj();
        }
        Ok(acc)
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_inner(self)
            .expect("norm of self cannot mismatch")
            .re
            .max(0.0)
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// self + scale * other.
    pub fn add_scaled(&self, other: &GridFunction, scale: Complex64) -> Result<GridFunction> {
        if self.values.shape() != other.values.shape() {
            return Err(GrushinError::ShapeMismatch {
                expected: self.values.shape().to_vec(),
                got: other.values.shape().to_vec(),
            });
        }
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(other.values.iter()) {
            *o += scale * v;
        }
        Ok(out)
    }

    pub fn scale(&self, factor: Complex64) -> GridFunction {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= factor;
        }
        out
    }

    /// Relative L^2 distance ||self - other|| / ||other||.
    pub fn rel_l2_distance(&self, other: &GridFunction) -> Result<f64> {
        let diff = self.add_scaled(other, Complex64::new(-1.0, 0.0))?;
        let denom = other.l2_norm();
        if denom == 0.0 {
            return Err(GrushinError::InvalidArgument(
                "relative distance against the zero function".into(),
            ));
        }
        Ok(diff.l2_norm() / denom)
    }
}

/// Transform-side coefficients F(k, xi'') plus the flagged zero-frequency
/// slice.
///
/// `values` has shape [num_multi_indices, N'', ..., N''] with the frequency
/// axes in monotonic order; the column at the zero frequency is unused and
/// kept at zero. `zero_slice` holds the partial Fourier transform at
/// xi'' = 0 verbatim on the x'-grid (shape [N'; d']); the Hermite family
/// degenerates at scale zero, so that slice is carried through unchanged
/// and every spectral multiplier acts on it by its value at 0.
#[derive(Debug, Clone)]
pub struct DualCoefficients {
    config: Arc<GrushinConfig>,
    values: ArrayD<Complex64>,
    zero_slice: ArrayD<Complex64>,
}

impl DualCoefficients {
    pub fn zeros(config: Arc<GrushinConfig>) -> Self {
        let dual_shape = config.dual_shape();
        let zero_shape = vec![config.x_prime_grid.points; config.d_prime];
        DualCoefficients {
            config,
            values: ArrayD::zeros(IxDyn(&dual_shape)),
            zero_slice: ArrayD::zeros(IxDyn(&zero_shape)),
        }
    }

    pub fn from_parts(
        config: Arc<GrushinConfig>,
        values: ArrayD<Complex64>,
        zero_slice: ArrayD<Complex64>,
    ) -> Result<Self> {
        let dual_shape = config.dual_shape();
        if values.shape() != dual_shape.as_slice() {
            return Err(GrushinError::ShapeMismatch {
                expected: dual_shape,
                got: values.shape().to_vec(),
            });
        }
        let zero_shape = vec![config.x_prime_grid.points; config.d_prime];
        if zero_slice.shape() != zero_shape.as_slice() {
            return Err(GrushinError::ShapeMismatch {
                expected: zero_shape,
                got: zero_slice.shape().to_vec(),
            });
        }
        Ok(DualCoefficients {
            config,
            values,
            zero_slice,
        })
    }

    pub fn config(&self) -> &Arc<GrushinConfig> {
        &self.config
    }

    pub fn values(&self) -> &ArrayD<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.values
    }

    /// The verbatim partial-Fourier slice at xi'' = 0.
    pub fn zero_slice(&self) -> &ArrayD<Complex64> {
        &self.zero_slice
    }

    pub fn zero_slice_mut(&mut self) -> &mut ArrayD<Complex64> {
        &mut self.zero_slice
    }

    /// True when any energy sits on the flagged zero-frequency slice.
    pub fn zero_slice_active(&self) -> bool {
        self.zero_slice.iter().any(|v| v.norm_sqr() > 0.0)
    }

    /// Inner product: counting measure over multi-indices, trapezoid rule
    /// over frequencies, plus the x'-weighted zero-slice contribution.
    pub fn dual_inner(&self, other: &DualCoefficients) -> Result<Complex64> {
        if self.values.shape() != other.values.shape() {
            return Err(GrushinError::ShapeMismatch {
                expected: self.values.shape().to_vec(),
                got: other.values.shape().to_vec(),
            });
        }
        let dxi = self
            .config
            .dxi()
            .powi(self.config.d_doubleprime as i32);
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.values.iter().zip(other.values.iter()) {
            acc += a * b.conj();
        }
        acc *= dxi;
        let wp = self.config.x_prime_weights();
        let dp = self.config.d_prime;
        for (idx, a) in self.zero_slice.indexed_iter() {
            let mut w = dxi;
            for ax in 0..dp {
                w *= wp[idx[ax]];
            }
            acc += w * a * other.zero_slice[&idx].conj();
        }
        Ok(acc)
    }

    pub fn dual_norm(&self) -> f64 {
        self.dual_inner(self)
            .expect("norm of self cannot mismatch")
            .re
            .max(0.0)
            .sqrt()
    }

    pub fn add_scaled(&self, other: &DualCoefficients, scale: Complex64) -> Result<DualCoefficients> {
        if self.values.shape() != other.values.shape() {
            return Err(GrushinError::ShapeMismatch {
                expected: self.values.shape().to_vec(),
                got: other.values.shape().to_vec(),
            });
        }
        let mut out = self.clone();
        for (o, v) in out.values.iter_mut().zip(other.values.iter()) {
            *o += scale * v;
        }
        for (o, v) in out.zero_slice.iter_mut().zip(other.zero_slice.iter()) {
            *o += scale * v;
        }
        Ok(out)
    }

    pub fn rel_distance(&self, other: &DualCoefficients) -> Result<f64> {
        let diff = self.add_scaled(other, Complex64::new(-1.0, 0.0))?;
        let denom = other.dual_norm();
        if denom == 0.0 {
            return Err(GrushinError::InvalidArgument(
                "relative distance against zero coefficients".into(),
            ));
        }
        Ok(diff.dual_norm() / denom)
    }

    /// Fraction of (non-zero-slice) energy carried by multi-indices of
    /// total degree above `cutoff - depth`; a value near the Plancherel
    /// tolerance signals cutoff saturation.
    pub fn tail_energy_ratio(&self, depth: u32) -> f64 {
        let indices = self.config.multi_indices();
        let cutoff = self.config.hermite_cutoff;
        let threshold = cutoff.saturating_sub(depth);
        let mut tail = 0.0;
        let mut total = 0.0;
        for (i, k) in indices.iter().enumerate() {
            let slab = self.values.index_axis(ndarray::Axis(0), i);
            let energy: f64 = slab.iter().map(|v| v.norm_sqr()).sum();
            total += energy;
            if k.order() > threshold {
                tail += energy;
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }
}
