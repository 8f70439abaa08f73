use crate::error::{Error, Result};
use crate::linalg::{dot, norm, unit};
use crate::ode::IntegratorConfig;

/// Scenario record shared by every stage of the construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Ambient dimension `N`.
    pub dim: usize,
    /// Energy level `E` of the well.
    pub energy: f64,
    /// Eccentricity `ε` of the inner quadratic potential.
    pub eps: f64,
    /// Unit axis `v`; the inner potential is centered at `ε v`.
    pub axis: Vec<f64>,
    /// Additive offset on the third matching coefficient. Zero except in
    /// negative-control runs.
    pub f3_perturbation: f64,
    pub integrator: IntegratorConfig,
}

impl ModelParams {
    /// Parameters with the axis along the first coordinate.
    pub fn new(dim: usize, energy: f64, eps: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidParams(format!("dimension must be >= 2, got {dim}")));
        }
        let p = Self {
            dim,
            energy,
            eps,
            axis: unit(dim, 0),
            f3_perturbation: 0.0,
            integrator: IntegratorConfig::default(),
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_axis(mut self, axis: Vec<f64>) -> Result<Self> {
        self.axis = axis;
        self.validate()?;
        Ok(self)
    }

    pub fn with_integrator(mut self, cfg: IntegratorConfig) -> Result<Self> {
        self.integrator = cfg;
        self.validate()?;
        Ok(self)
    }

    pub fn with_f3_perturbation(mut self, delta: f64) -> Self {
        self.f3_perturbation = delta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::InvalidParams(format!("dimension must be >= 2, got {}", self.dim)));
        }
        if !(self.energy >= 4.0) {
            return Err(Error::InvalidParams(format!("energy must be >= 4, got {}", self.energy)));
        }
        if !(self.eps >= 0.0) || !self.eps.is_finite() {
            return Err(Error::InvalidParams(format!("eccentricity must be >= 0, got {}", self.eps)));
        }
        if self.axis.len() != self.dim {
            return Err(Error::InvalidParams(format!(
                "axis has {} components, expected {}",
                self.axis.len(),
                self.dim
            )));
        }
        if (norm(&self.axis) - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParams(format!("axis must be a unit vector, |v| = {}", norm(&self.axis))));
        }
        let worst = self.radicand(-1.0);
        if !(worst > 0.0) {
            return Err(Error::Radicand { radicand: worst, u: -1.0 });
        }
        self.integrator.validate()
    }

    /// `2E - 1 + 2 ε u - ε²` with `u = <P, v>`.
    pub fn radicand(&self, u: f64) -> f64 {
        2.0 * self.energy - 1.0 + 2.0 * self.eps * u - self.eps * self.eps
    }

    /// Launch speed `λ_ε(P)` of the outward orbit leaving the unit sphere at `P`.
    pub fn launch_speed(&self, p: &[f64]) -> f64 {
        self.radicand(dot(p, &self.axis)).sqrt()
    }

    /// The center `ε v` of the inner potential.
    pub fn center(&self) -> Vec<f64> {
        self.axis.iter().map(|a| a * self.eps).collect()
    }

    /// Unit vector at angle `theta` from the axis, in the plane spanned by
    /// the axis and `companion` (assumed orthonormal to it).
    pub fn planar_direction(&self, theta: f64, companion: &[f64]) -> Vec<f64> {
        let (s, c) = theta.sin_cos();
        self.axis.iter().zip(companion).map(|(a, b)| c * a + s * b).collect()
    }

    /// A fixed unit vector orthogonal to the axis.
    pub fn axis_companion(&self) -> Vec<f64> {
        if self.dim == 2 {
            return vec![-self.axis[1], self.axis[0]];
        }
        let k = (0..self.dim)
            .min_by(|&i, &j| self.axis[i].abs().total_cmp(&self.axis[j].abs()))
            .unwrap_or(1);
        let e = unit(self.dim, k);
        let d = dot(&e, &self.axis);
        let w: Vec<f64> = e.iter().zip(&self.axis).map(|(x, a)| x - d * a).collect();
        let n = norm(&w);
        w.iter().map(|x| x / n).collect()
    }
}
