//! Brown radial distortion: the forward power-series model, numerical
//! inversion, and least-squares fitting of the inverse-series coefficients.
//!
//! All coefficients act in normalized image space. An empty or all-zero
//! coefficient list is the identity map.

use crate::geometry::NormalizedPoint2;
use crate::numerics::{solve_least_squares, DesignSystem, NumericsError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Default working radius (normalized units) inside which the model must be
/// invertible.
pub const DEFAULT_WORKING_RADIUS: f64 = 1.0;

/// Samples used for the construction-time monotonicity check and for fitting.
const RADIAL_SAMPLES: usize = 512;

/// Fixed-point iterations attempted before the Newton fallback kicks in.
const FIXED_POINT_ITERS: usize = 25;
const NEWTON_ITERS: usize = 60;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistortionError {
    #[error("point radius {radius:.6} exceeds working radius {limit:.6}")]
    OutsideWorkingRadius { radius: f64, limit: f64 },
    /// Iteration budget exhausted: distortion too strong or the point lies
    /// outside the invertible region.
    #[error("numerical inversion did not converge")]
    NoConvergence,
    #[error("inverse fit is rank-deficient")]
    DegenerateFit,
    #[error("invalid coefficients: {reason}")]
    InvalidCoefficients { reason: String },
}

/// Forward Brown radial model: a point at radius r is scaled by
/// `1 + k1 r^2 + k2 r^4 + k3 r^6 + ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialDistortion {
    k: Vec<f64>,
    working_radius: f64,
}

impl RadialDistortion {
    /// Model with the default working radius of 1.0 normalized units.
    pub fn new(k: Vec<f64>) -> Result<Self, DistortionError> {
        Self::with_working_radius(k, DEFAULT_WORKING_RADIUS)
    }

    /// Model valid on the disk of the given radius. Construction rejects
    /// coefficient sets whose distortion factor crosses zero inside the disk
    /// or whose distorted radius `r * factor(r^2)` is not strictly increasing
    /// there (the operational invertibility criterion).
    pub fn with_working_radius(k: Vec<f64>, working_radius: f64) -> Result<Self, DistortionError> {
        if !(working_radius > 0.0) || !working_radius.is_finite() {
            return Err(DistortionError::InvalidCoefficients {
                reason: format!("working radius must be > 0, got {working_radius}"),
            });
        }
        if k.iter().any(|c| !c.is_finite()) {
            return Err(DistortionError::InvalidCoefficients {
                reason: "coefficients must be finite".to_string(),
            });
        }
        let model = Self { k, working_radius };
        for i in 0..=RADIAL_SAMPLES {
            let r = working_radius * (i as f64) / (RADIAL_SAMPLES as f64);
            let r2 = r * r;
            if model.factor(r2) <= 0.0 {
                return Err(DistortionError::InvalidCoefficients {
                    reason: format!("distortion factor crosses zero at r = {r:.4}"),
                });
            }
            if model.radial_derivative(r2) <= 0.0 {
                return Err(DistortionError::InvalidCoefficients {
                    reason: format!("distorted radius not increasing at r = {r:.4}"),
                });
            }
        }
        Ok(model)
    }

    /// Identity map (no coefficients).
    pub fn none() -> Self {
        Self {
            k: Vec::new(),
            working_radius: DEFAULT_WORKING_RADIUS,
        }
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.k
    }

    pub fn working_radius(&self) -> f64 {
        self.working_radius
    }

    /// True when every coefficient is zero; the map is then the identity on
    /// the whole plane and the working-radius check does not apply.
    pub fn is_identity(&self) -> bool {
        self.k.iter().all(|&c| c == 0.0)
    }

    /// Distortion factor `1 + k1 u + k2 u^2 + ...` evaluated at `u = r^2`.
    pub fn factor(&self, r_sq: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.k.iter().rev() {
            acc = r_sq * (c + acc);
        }
        1.0 + acc
    }

    /// d/dr of `r * factor(r^2)`: `1 + sum (2i+1) k_i r^(2i)`.
    fn radial_derivative(&self, r_sq: f64) -> f64 {
        let mut acc = 0.0;
        let mut pow = 1.0;
        for (i, &c) in self.k.iter().enumerate() {
            pow *= r_sq;
            acc += (2 * (i + 1) + 1) as f64 * c * pow;
        }
        1.0 + acc
    }

    /// Distorted radius for an undistorted radius.
    fn distort_radius(&self, r: f64) -> f64 {
        r * self.factor(r * r)
    }

    /// Largest distorted radius reachable from the working disk.
    pub fn max_distorted_radius(&self) -> f64 {
        self.distort_radius(self.working_radius)
    }

    /// Apply the forward model to an undistorted normalized point.
    pub fn distort(&self, pu: &NormalizedPoint2) -> Result<NormalizedPoint2, DistortionError> {
        if self.is_identity() {
            return Ok(*pu);
        }
        let r_sq = pu.radius_sq();
        let limit = self.working_radius;
        if r_sq > limit * limit * (1.0 + 1e-12) {
            return Err(DistortionError::OutsideWorkingRadius {
                radius: r_sq.sqrt(),
                limit,
            });
        }
        let s = self.factor(r_sq);
        Ok(NormalizedPoint2::new(pu.x * s, pu.y * s))
    }

    /// Invert the forward model numerically: returns `pu` such that
    /// `distort(pu)` lies within `tol` of `pd` (Euclidean, normalized units).
    ///
    /// Fixed-point iteration `pu <- pd / factor(r(pu)^2)` handles mild
    /// distortion; a 1-D Newton solve on the radius rescues strong barrel
    /// cases after 25 iterations.
    pub fn undistort_numeric(
        &self,
        pd: &NormalizedPoint2,
        tol: f64,
    ) -> Result<NormalizedPoint2, DistortionError> {
        if !(tol > 0.0) {
            return Err(DistortionError::InvalidCoefficients {
                reason: format!("tolerance must be > 0, got {tol}"),
            });
        }
        if self.is_identity() {
            return Ok(*pd);
        }
        let rd = pd.radius_sq().sqrt();
        if rd == 0.0 {
            return Ok(*pd);
        }

        let mut pu = *pd;
        for _ in 0..FIXED_POINT_ITERS {
            let s = self.factor(pu.radius_sq());
            if s <= 0.0 {
                break;
            }
            pu = NormalizedPoint2::new(pd.x / s, pd.y / s);
            if self.residual(&pu, pd) <= tol {
                return self.check_inside(pu);
            }
        }

        // Newton on h(ru) = ru * factor(ru^2) - rd along the fixed direction.
        let ru = self.undistort_radius_newton(rd)?;
        let scale = ru / rd;
        let pu = NormalizedPoint2::new(pd.x * scale, pd.y * scale);
        if self.residual(&pu, pd) <= tol {
            self.check_inside(pu)
        } else {
            Err(DistortionError::NoConvergence)
        }
    }

    fn residual(&self, pu: &NormalizedPoint2, pd: &NormalizedPoint2) -> f64 {
        let s = self.factor(pu.radius_sq());
        let dx = pu.x * s - pd.x;
        let dy = pu.y * s - pd.y;
        (dx * dx + dy * dy).sqrt()
    }

    fn check_inside(&self, pu: NormalizedPoint2) -> Result<NormalizedPoint2, DistortionError> {
        if pu.radius_sq() > self.working_radius * self.working_radius * (1.0 + 1e-9) {
            return Err(DistortionError::NoConvergence);
        }
        Ok(pu)
    }

    fn undistort_radius_newton(&self, rd: f64) -> Result<f64, DistortionError> {
        let mut ru = rd.min(self.working_radius);
        for _ in 0..NEWTON_ITERS {
            let h = self.distort_radius(ru) - rd;
            let dh = self.radial_derivative(ru * ru);
            if dh.abs() < 1e-300 {
                return Err(DistortionError::NoConvergence);
            }
            let step = h / dh;
            ru -= step;
            ru = ru.clamp(0.0, self.working_radius * (1.0 + 1e-6));
            if step.abs() < 1e-16 {
                return Ok(ru);
            }
        }
        Ok(ru)
    }

    /// Least-squares fit of the inverse power series over `order` terms on
    /// dense radial samples of the disk `rho <= rho_max` (distorted units).
    pub fn fit_inverse(
        &self,
        order: usize,
        rho_max: f64,
    ) -> Result<InverseRadialDistortion, DistortionError> {
        if order < 1 {
            return Err(DistortionError::InvalidCoefficients {
                reason: "inverse order must be >= 1".to_string(),
            });
        }
        if !(rho_max > 0.0) {
            return Err(DistortionError::InvalidCoefficients {
                reason: format!("rho_max must be > 0, got {rho_max}"),
            });
        }
        let reachable = self.max_distorted_radius();
        if rho_max > reachable * (1.0 + 1e-9) {
            return Err(DistortionError::OutsideWorkingRadius {
                radius: rho_max,
                limit: reachable,
            });
        }

        // Sample distorted radii, recover true undistorted radii with the
        // independent 1-D Newton solve, and regress ru/rd - 1 on powers of
        // rd^2.
        let m = RADIAL_SAMPLES;
        let mut rd_samples = Vec::with_capacity(m);
        let mut ru_samples = Vec::with_capacity(m);
        for i in 1..=m {
            let rd = rho_max * (i as f64) / (m as f64);
            let ru = if self.is_identity() {
                rd
            } else {
                self.undistort_radius_newton(rd)?
            };
            rd_samples.push(rd);
            ru_samples.push(ru);
        }
        let a = DMatrix::from_fn(m, order, |i, j| rd_samples[i].powi(2 * (j as i32 + 1)));
        let b = DVector::from_fn(m, |i, _| ru_samples[i] / rd_samples[i] - 1.0);
        let sys = DesignSystem::new(a, b).map_err(|_| DistortionError::DegenerateFit)?;
        let sol = solve_least_squares(&sys).map_err(|e| match e {
            NumericsError::RankDeficient { .. } => DistortionError::DegenerateFit,
            _ => DistortionError::InvalidCoefficients {
                reason: e.to_string(),
            },
        })?;
        let kprime: Vec<f64> = sol.theta.iter().cloned().collect();

        let inv = InverseRadialDistortion {
            kprime,
            rho_max,
            fit_residual: 0.0,
        };
        let fit_residual = rd_samples
            .iter()
            .zip(&ru_samples)
            .map(|(&rd, &ru)| (rd * inv.factor(rd * rd) - ru).abs())
            .fold(0.0, f64::max);
        Ok(InverseRadialDistortion {
            fit_residual,
            ..inv
        })
    }
}

/// Inverse power series mapping distorted points back to undistorted ones:
/// `pu = pd * (1 + k1' rho^2 + k2' rho^4 + ...)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseRadialDistortion {
    kprime: Vec<f64>,
    rho_max: f64,
    fit_residual: f64,
}

impl InverseRadialDistortion {
    /// Directly supplied inverse coefficients (e.g. loaded from config).
    pub fn from_coefficients(kprime: Vec<f64>, rho_max: f64) -> Result<Self, DistortionError> {
        if !(rho_max > 0.0) || kprime.iter().any(|c| !c.is_finite()) {
            return Err(DistortionError::InvalidCoefficients {
                reason: "rho_max must be > 0 and coefficients finite".to_string(),
            });
        }
        Ok(Self {
            kprime,
            rho_max,
            fit_residual: f64::NAN,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.kprime
    }

    pub fn rho_max(&self) -> f64 {
        self.rho_max
    }

    /// Max absolute radial residual over the fit sample set, normalized units.
    pub fn fit_residual(&self) -> f64 {
        self.fit_residual
    }

    fn factor(&self, rho_sq: f64) -> f64 {
        let mut acc = 0.0;
        for &c in self.kprime.iter().rev() {
            acc = rho_sq * (c + acc);
        }
        1.0 + acc
    }

    /// Apply the inverse series to a distorted normalized point.
    pub fn apply(&self, pd: &NormalizedPoint2) -> Result<NormalizedPoint2, DistortionError> {
        let rho_sq = pd.radius_sq();
        if rho_sq > self.rho_max * self.rho_max * (1.0 + 1e-12) {
            return Err(DistortionError::OutsideWorkingRadius {
                radius: rho_sq.sqrt(),
                limit: self.rho_max,
            });
        }
        let s = self.factor(rho_sq);
        Ok(NormalizedPoint2::new(pd.x * s, pd.y * s))
    }
}
