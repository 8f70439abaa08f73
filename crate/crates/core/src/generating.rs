//! The cubic generating function
//!
//! ```text
//! F(x) = f1(x̂) (|x| - 1) + f2(x̂) (|x| - 1)^2 / 2 + f3(x̂) (|x| - 1)^3 / 6
//! ```
//!
//! whose coefficients are fixed so that the collar potential built from `F`
//! glues to `½|x - εv|²` with second-order contact on the unit sphere.
//! Each coefficient depends on the sphere point only through
//! `u = <x̂, v>`, which makes the tangential gradients one-dimensional.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dual::{Dual, Scalar};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::params::ModelParams;

/// The three matching coefficients at one point of the sphere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub f1: f64,
    pub f2: f64,
    pub f3: f64,
}

/// Coefficients as functions of `u`, evaluated in any scalar type.
fn coefficients_in<T: Scalar>(u: T, energy: f64, eps: f64, f3_offset: f64) -> [T; 3] {
    let c = T::cst;
    let one = c(1.0);
    let radicand = c(2.0 * energy - 1.0 - eps * eps) + c(2.0 * eps) * u;
    let f1 = c(0.5) * radicand.sqrt();
    let f2 = c(0.25) * (c(4.0 / 3.0) * f1 * f1 - (one - c(eps) * u) / f1);

    // Spherical gradient of f1: (df1/du) (v - u P). It is tangent to the
    // sphere, so its component along P vanishes.
    let df1 = c(eps) / (c(4.0) * f1);
    let tangential = one - u * u;
    let grad_sq = df1 * df1 * tangential;
    let grad_dot_v = df1 * tangential;
    let grad_dot_p = c(0.0);

    let f1_sq = f1 * f1;
    let f3 = f1 * f1_sq / c(9.0) + f2 * f1 - c(2.0) / f1 * (grad_sq - grad_dot_p * grad_dot_p) - c(1.0 / 12.0)
        - one / (c(4.0) * f1)
        + f2 / (c(4.0) * f1_sq)
        + c(eps / 4.0) * (grad_dot_v / f1_sq + u * (c(1.0 / 3.0) - (f2 + grad_dot_p) / f1_sq))
        + c(f3_offset);
    [f1, f2, f3]
}

/// Evaluator for `F_ε` and its gradient.
#[derive(Debug, Clone)]
pub struct GeneratingFn {
    params: ModelParams,
}

/// Sampled lower bounds of `<grad F, x>` and `|grad F|` on `1 <= |x| <= 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub samples: usize,
    pub min_radial: f64,
    pub min_norm: f64,
}

impl BoundsReport {
    pub fn passed(&self) -> bool {
        self.min_radial >= 1.0 && self.min_norm >= 1.0
    }

    /// Smallest excess of either bound over 1.
    pub fn margin(&self) -> f64 {
        self.min_radial.min(self.min_norm) - 1.0
    }
}

impl GeneratingFn {
    pub fn new(params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn check_u(&self, u: f64) -> Result<()> {
        let r = self.params.radicand(u);
        if r > 0.0 {
            Ok(())
        } else {
            Err(Error::Radicand { radicand: r, u })
        }
    }

    /// Coefficients at `u = <P, v>`.
    pub fn coefficients_at(&self, u: f64) -> Result<Coefficients> {
        self.check_u(u)?;
        let p = &self.params;
        let [f1, f2, f3] = coefficients_in(u, p.energy, p.eps, p.f3_perturbation);
        Ok(Coefficients { f1, f2, f3 })
    }

    /// Coefficients at `u` and their derivatives with respect to `u`.
    pub fn coefficients_with_derivatives(&self, u: f64) -> Result<(Coefficients, Coefficients)> {
        self.check_u(u)?;
        let p = &self.params;
        let [f1, f2, f3] = coefficients_in(Dual::variable(u), p.energy, p.eps, p.f3_perturbation);
        Ok((
            Coefficients { f1: f1.re, f2: f2.re, f3: f3.re },
            Coefficients { f1: f1.eps, f2: f2.eps, f3: f3.eps },
        ))
    }

    /// Coefficients at a point `P` of the unit sphere.
    pub fn f_coefficients(&self, p: &[f64]) -> Result<Coefficients> {
        let n = norm(p);
        if (n - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("coefficients need a unit vector, |P| = {n}")));
        }
        self.coefficients_at(dot(p, &self.params.axis))
    }

    fn polar(&self, x: &[f64]) -> Result<(f64, f64)> {
        let r = norm(x);
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain("generating function is undefined at the origin".into()));
        }
        let u = (dot(x, &self.params.axis) / r).clamp(-1.0, 1.0);
        Ok((r, u))
    }

    /// `F_ε(x)`.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        let (r, u) = self.polar(x)?;
        let c = self.coefficients_at(u)?;
        let d = r - 1.0;
        Ok(d * (c.f1 + d * (c.f2 / 2.0 + d * c.f3 / 6.0)))
    }

    /// `F_ε(x)` and its analytic gradient.
    pub fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (r, u) = self.polar(x)?;
        let (c, dc) = self.coefficients_with_derivatives(u)?;
        let d = r - 1.0;
        let value = d * (c.f1 + d * (c.f2 / 2.0 + d * c.f3 / 6.0));
        let radial = c.f1 + d * (c.f2 + d * c.f3 / 2.0);
        let tangential = d * (dc.f1 + d * (dc.f2 / 2.0 + d * dc.f3 / 6.0)) / r;
        let v = &self.params.axis;
        let grad = x
            .iter()
            .zip(v)
            .map(|(xi, vi)| {
                let xh = xi / r;
                radial * xh + tangential * (vi - u * xh)
            })
            .collect();
        Ok((value, grad))
    }

    /// `grad F_ε(x)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    /// Whether `f1 > 1`, `f2 > 0`, `f3 > 0` on a uniform `u`-grid of `points` nodes.
    pub fn coefficients_positive(&self, points: usize) -> Result<bool> {
        for k in 0..points {
            let u = -1.0 + 2.0 * k as f64 / (points.max(2) - 1) as f64;
            let c = self.coefficients_at(u)?;
            if !(c.f1 > 1.0 && c.f2 > 0.0 && c.f3 > 0.0) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Sample the annulus `1 <= |x| <= 3` and record the minima of
    /// `<grad F, x>` and `|grad F|`. Failure is a report outcome.
    pub fn validate_bounds(&self, samples: usize, seed: u64) -> Result<BoundsReport> {
        let n = self.params.dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut min_radial = f64::INFINITY;
        let mut min_norm = f64::INFINITY;
        for k in 0..samples {
            let mut dir: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            while norm(&dir) < 1e-3 {
                dir = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            }
            let dn = norm(&dir);
            // Every fourth sample sits on the inner boundary, where the
            // bounds are tightest.
            let r = if k % 4 == 0 { 1.0 } else { rng.gen_range(1.0..=3.0) };
            let x: Vec<f64> = dir.iter().map(|d| d / dn * r).collect();
            let g = self.gradient(&x)?;
            min_radial = min_radial.min(dot(&g, &x));
            min_norm = min_norm.min(norm(&g));
        }
        Ok(BoundsReport {
            samples,
            min_radial,
            min_norm,
        })
    }
}

/// Largest eccentricity of the dyadic sequence `1, 1/2, 1/4, ...` whose
/// annulus bounds pass with at least `margin` to spare.
pub fn estimate_eps_star(base: &ModelParams, samples: usize, margin: f64) -> Result<f64> {
    let mut eps = 1.0;
    for _ in 0..30 {
        let mut p = base.clone();
        p.eps = eps;
        if p.validate().is_ok() {
            let report = GeneratingFn::new(p)?.validate_bounds(samples, 0x5eed)?;
            if report.margin() >= margin {
                return Ok(eps);
            }
        }
        eps *= 0.5;
    }
    Ok(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gen(eps: f64) -> GeneratingFn {
        GeneratingFn::new(ModelParams::new(2, 4.0, eps).unwrap()).unwrap()
    }

    #[test]
    fn constant_coefficients_at_zero_eccentricity() {
        let c = gen(0.0).f_coefficients(&[0.6, 0.8]).unwrap();
        assert!((c.f1 - 1.3228757).abs() < 1e-7);
        assert!((c.f2 - 0.3943511).abs() < 1e-7);
        // Direct evaluation of the constant-coefficient formulas.
        assert!((c.f3 - 0.5629235887738143).abs() < 1e-12);
        assert!((c.f3 - 0.5629238).abs() < 5e-7);
    }

    #[test]
    fn first_coefficient_on_axis() {
        let c = gen(0.05).f_coefficients(&[1.0, 0.0]).unwrap();
        assert!((c.f1 - 0.5 * 7.0975f64.sqrt()).abs() < 1e-15);
        assert!((c.f1 - 1.3320567).abs() < 1e-7);
    }

    #[test]
    fn value_vanishes_on_sphere_and_matches_at_radius_two() {
        let g = gen(0.0);
        for k in 0..16 {
            let t = k as f64 * 0.4;
            assert!(g.value(&[t.cos(), t.sin()]).unwrap().abs() < 1e-15);
            assert!((g.value(&[2.0 * t.cos(), 2.0 * t.sin()]).unwrap() - 1.6138718020756242).abs() < 1e-12);
        }
        let ge = gen(0.05);
        assert!(ge.value(&[0.6, -0.8]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn radial_gradient_at_unit_radius() {
        let g = gen(0.0).gradient(&[0.0, 1.0]).unwrap();
        assert!(g[0].abs() < 1e-15);
        assert!((g[1] - 1.3228757).abs() < 1e-7);
    }

    #[test]
    fn origin_and_oversized_eccentricity_are_errors() {
        assert!(gen(0.05).value(&[0.0, 0.0]).is_err());
        let mut p = ModelParams::new(2, 4.0, 0.0).unwrap();
        p.eps = 3.0;
        assert!(GeneratingFn::new(p).is_err());
    }

    #[test]
    fn derivative_of_first_coefficient() {
        let g = gen(0.05);
        let (c, dc) = g.coefficients_with_derivatives(0.3).unwrap();
        assert!((dc.f1 - 0.05 / (4.0 * c.f1)).abs() < 1e-15);
    }

    #[test]
    fn bounds_at_zero_and_small_eccentricity() {
        let r0 = gen(0.0).validate_bounds(2000, 1).unwrap();
        assert!(r0.passed());
        assert!((r0.min_norm - 1.3228757).abs() < 1e-6);
        assert!(gen(0.05).validate_bounds(10_000, 2).unwrap().passed());
    }
}
