//! Curves leaving the unit sphere along the normalized gradient of the
//! generating function.
//!
//! In the regular ("unit") parameterization the flow is
//! `dy/ds = grad F / |grad F|²`, so `F(y(P, s)) = s` and the outer boundary
//! of the well is reached at `s = 3/2`. The singular parameterization
//! `dy/dτ = (1 - τ)^{-1/3} grad F / |grad F|²` reaches it at `τ = 1`; the
//! two are related by [`rho_reparam`].

use std::cell::RefCell;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::generating::GeneratingFn;
use crate::linalg::{dot, gram_min_eigenvalue, norm, scale, unit};
use crate::ode::{integrate, Trajectory};
use crate::params::ModelParams;

/// Parameter value at which the flow reaches the outer boundary.
pub const S_MAX: f64 = 1.5;

/// Finite-difference step for directional derivatives of the normalized gradient.
const FD_STEP: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhiMode {
    /// `φ(τ) = (1 - τ)^{-1/3}`, `τ ∈ [0, 1[`.
    Singular,
    /// `φ ≡ 1`, `s ∈ [0, 3/2]`.
    Unit,
}

/// `τ = 1 - (1 - 2s/3)^{3/2}`, mapping `[0, 3/2]` onto `[0, 1]`.
pub fn rho_reparam(s: f64) -> Result<f64> {
    if !(0.0..=S_MAX).contains(&s) {
        return Err(Error::Domain(format!("reparameterization needs s in [0, 3/2], got {s}")));
    }
    Ok(1.0 - (1.0 - 2.0 * s / 3.0).max(0.0).powf(1.5))
}

/// Inverse of [`rho_reparam`].
pub fn rho_inverse(tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("τ must lie in [0, 1], got {tau}")));
    }
    Ok(1.5 * (1.0 - (1.0 - tau).powf(2.0 / 3.0)))
}

/// Orthonormal basis of the tangent space of the sphere at `p`.
///
/// Gram–Schmidt over the coordinate axes in order; when `p` is within
/// `acos(0.9)` of the first axis that axis is moved to the end of the list.
pub fn tangent_basis(p: &[f64]) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    if p[0].abs() > 0.9 {
        order.rotate_left(1);
    }
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
    for k in order {
        if basis.len() == n - 1 {
            break;
        }
        let mut w = unit(n, k);
        for b in std::iter::once(p).chain(basis.iter().map(|b| b.as_slice())) {
            let c = dot(&w, b);
            for (wi, bi) in w.iter_mut().zip(b) {
                *wi -= c * bi;
            }
        }
        let wn = norm(&w);
        if wn > 1e-8 {
            basis.push(scale(&w, 1.0 / wn));
        }
    }
    basis
}

/// Holds the first evaluation error raised inside an ODE right-hand side.
pub(crate) struct FieldErrors(RefCell<Option<Error>>);

impl FieldErrors {
    pub(crate) fn new() -> Self {
        Self(RefCell::new(None))
    }

    /// Unwrap `r`, or record the error and fill `out` with NaN so the
    /// integrator stops.
    pub(crate) fn write(&self, r: Result<Vec<f64>>, out: &mut [f64]) {
        match r {
            Ok(v) => out.copy_from_slice(&v),
            Err(e) => {
                self.0.borrow_mut().get_or_insert(e);
                out.fill(f64::NAN);
            }
        }
    }

    pub(crate) fn record(&self, e: Error) {
        self.0.borrow_mut().get_or_insert(e);
    }

    /// Prefer the recorded field error over the integrator's own.
    pub(crate) fn finish<T>(self, r: Result<T>) -> Result<T> {
        match (r, self.0.into_inner()) {
            (Err(_), Some(e)) => Err(e),
            (r, _) => r,
        }
    }
}

/// The family of curves `y(P, ·)` in one parameterization.
#[derive(Debug, Clone)]
pub struct FlowChart {
    gen: GeneratingFn,
    mode: PhiMode,
}

/// Linearized flow along one curve: augmented state `[y, v_1, .., v_{N-1}]`.
#[derive(Debug, Clone)]
pub struct JacobianFlow {
    pub p: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
    pub trajectory: Trajectory,
}

impl JacobianFlow {
    /// Position and Jacobian columns at parameter `t`.
    pub fn at(&self, t: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let state = self.trajectory.dense_eval(t)?;
        let n = self.p.len();
        let y = state[..n].to_vec();
        let cols = (0..self.basis.len())
            .map(|i| state[n * (i + 1)..n * (i + 2)].to_vec())
            .collect();
        Ok((y, cols))
    }
}

/// Worst-case residuals of the orthogonality and unit-speed checks plus
/// the chart properties sampled on the same grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussReport {
    pub points: usize,
    /// `max |<∂y/∂s, v_i>|`.
    pub orthogonality: f64,
    /// `max |½ (E - W(y)) |∂y/∂τ|² - 1|`.
    pub unit_speed: f64,
    /// `max |F(y(P, s)) - s|`.
    pub level: f64,
    /// `min <∂y/∂s, y>`.
    pub min_monotonicity: f64,
    /// `max |y|`.
    pub max_radius: f64,
    /// Smallest Gram eigenvalue of `{∂y/∂s, v_1, .., v_{N-1}}`.
    pub min_gram_eigenvalue: f64,
}

impl FlowChart {
    pub fn new(gen: GeneratingFn, mode: PhiMode) -> Self {
        Self { gen, mode }
    }

    pub fn unit(gen: GeneratingFn) -> Self {
        Self::new(gen, PhiMode::Unit)
    }

    pub fn singular(gen: GeneratingFn) -> Self {
        Self::new(gen, PhiMode::Singular)
    }

    pub fn mode(&self) -> PhiMode {
        self.mode
    }

    pub fn generating(&self) -> &GeneratingFn {
        &self.gen
    }

    pub fn params(&self) -> &ModelParams {
        self.gen.params()
    }

    /// Parameter value at which the outer boundary is reached.
    pub fn t_max(&self) -> f64 {
        match self.mode {
            PhiMode::Unit => S_MAX,
            PhiMode::Singular => 1.0,
        }
    }

    pub fn phi(&self, t: f64) -> f64 {
        match self.mode {
            PhiMode::Unit => 1.0,
            PhiMode::Singular => (1.0 - t).powf(-1.0 / 3.0),
        }
    }

    /// `G(y) = grad F(y) / |grad F(y)|²`.
    pub fn normalized_gradient(&self, y: &[f64]) -> Result<Vec<f64>> {
        let g = self.gen.gradient(y)?;
        let gg = dot(&g, &g);
        if !(gg > 0.0) {
            return Err(Error::Domain(format!("generating gradient vanishes at {y:?}")));
        }
        Ok(scale(&g, 1.0 / gg))
    }

    /// `dG(y)[w]` by Richardson-extrapolated central differences.
    pub fn normalized_gradient_derivative(&self, y: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        let wn = norm(w);
        if wn == 0.0 {
            return Ok(vec![0.0; y.len()]);
        }
        let dir = scale(w, 1.0 / wn);
        let central = |h: f64| -> Result<Vec<f64>> {
            let plus: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + h * d).collect();
            let minus: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a - h * d).collect();
            let gp = self.normalized_gradient(&plus)?;
            let gm = self.normalized_gradient(&minus)?;
            Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        };
        let d1 = central(FD_STEP)?;
        let d2 = central(2.0 * FD_STEP)?;
        Ok(d1.iter().zip(&d2).map(|(a, b)| wn * (4.0 * a - b) / 3.0).collect())
    }

    fn check_start(&self, p: &[f64], t_end: f64) -> Result<()> {
        if p.len() != self.params().dim {
            return Err(Error::Domain(format!("expected {} components, got {}", self.params().dim, p.len())));
        }
        if (norm(p) - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("start point must be on the unit sphere, |P| = {}", norm(p))));
        }
        let ok = match self.mode {
            PhiMode::Unit => (0.0..=S_MAX).contains(&t_end),
            PhiMode::Singular => (0.0..1.0).contains(&t_end),
        };
        if !ok {
            return Err(Error::Domain(format!("parameter {t_end} outside the chart range")));
        }
        Ok(())
    }

    /// Integrate `y(P, ·)` on `[0, t_end]`.
    pub fn flow_y(&self, p: &[f64], t_end: f64) -> Result<Trajectory> {
        self.check_start(p, t_end)?;
        let errors = FieldErrors::new();
        let r = integrate(
            |t, y: &[f64], dy: &mut [f64]| {
                let phi = self.phi(t);
                errors.write(self.normalized_gradient(y).map(|g| scale(&g, phi)), dy);
            },
            p,
            (0.0, t_end),
            &self.params().integrator,
        );
        errors.finish(r)
    }

    /// The point `y(P, t)`.
    pub fn point(&self, p: &[f64], t: f64) -> Result<Vec<f64>> {
        Ok(self.flow_y(p, t)?.last_state().to_vec())
    }

    /// Outer-boundary point `ỹ(P, 3/2)`, projected onto `{F = 3/2}` by
    /// Newton steps along the gradient.
    pub fn launch_point(&self, p: &[f64]) -> Result<Vec<f64>> {
        let unit_chart = FlowChart::unit(self.gen.clone());
        let mut x = unit_chart.point(p, S_MAX)?;
        for _ in 0..3 {
            let (f, g) = self.gen.value_and_gradient(&x)?;
            let gg = dot(&g, &g);
            let step = (S_MAX - f) / gg;
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += step * gi;
            }
        }
        Ok(x)
    }

    /// Integrate the curve together with its Jacobian columns
    /// `v_i = dy(P, t)[e_i]`.
    pub fn flow_jacobian(&self, p: &[f64], t_end: f64, basis: &[Vec<f64>]) -> Result<JacobianFlow> {
        self.check_start(p, t_end)?;
        let n = p.len();
        let mut state = p.to_vec();
        for e in basis {
            if e.len() != n {
                return Err(Error::Domain("tangent basis vector has the wrong dimension".into()));
            }
            state.extend_from_slice(e);
        }
        let errors = FieldErrors::new();
        let r = integrate(
            |t, s: &[f64], ds: &mut [f64]| {
                let phi = self.phi(t);
                let y = &s[..n];
                match self.normalized_gradient(y) {
                    Ok(g) => {
                        for i in 0..n {
                            ds[i] = phi * g[i];
                        }
                    }
                    Err(e) => {
                        errors.record(e);
                        ds.fill(f64::NAN);
                        return;
                    }
                }
                for k in 0..basis.len() {
                    let v = &s[n * (k + 1)..n * (k + 2)];
                    match self.normalized_gradient_derivative(y, v) {
                        Ok(dv) => {
                            for i in 0..n {
                                ds[n * (k + 1) + i] = phi * dv[i];
                            }
                        }
                        Err(e) => {
                            errors.record(e);
                            ds.fill(f64::NAN);
                            return;
                        }
                    }
                }
            },
            &state,
            (0.0, t_end),
            &self.params().integrator,
        );
        let trajectory = errors.finish(r)?;
        Ok(JacobianFlow {
            p: p.to_vec(),
            basis: basis.to_vec(),
            trajectory,
        })
    }

    /// Chart coordinates `(P, s)` of `x` with `0 <= F(x) <= 3/2`, found by
    /// flowing down the normalized gradient for a parameter time `F(x)`.
    pub fn backward_flow(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let s = self.gen.value(x)?;
        if !(-1e-12..=S_MAX + 1e-12).contains(&s) {
            return Err(Error::Domain(format!("F(x) = {s} outside [0, 3/2]")));
        }
        let s = s.clamp(0.0, S_MAX);
        if s == 0.0 {
            return Ok((x.to_vec(), 0.0));
        }
        let errors = FieldErrors::new();
        let r = integrate(
            |_t, y: &[f64], dy: &mut [f64]| {
                errors.write(self.normalized_gradient(y).map(|g| scale(&g, -1.0)), dy);
            },
            x,
            (0.0, s),
            &self.params().integrator,
        );
        let traj = errors.finish(r)?;
        Ok((traj.last_state().to_vec(), s))
    }

    /// Orthogonality and unit Jacobi speed on the `(P, s)` grid, together
    /// with the level law, monotonicity, confinement and Gram checks.
    ///
    /// `s_grid` values must lie in `[0, 3/2[`.
    pub fn verify_gauss(&self, p_grid: &[Vec<f64>], s_grid: &[f64]) -> Result<GaussReport> {
        // Dense output between steps is an order less accurate than the
        // steps themselves; tighter tolerances keep the level error below 1e-10.
        let mut tight = self.params().clone();
        tight.integrator = tight.integrator.scaled(1e-2);
        let unit_chart = FlowChart::unit(GeneratingFn::new(tight)?);
        let s_top = s_grid.iter().cloned().fold(0.0, f64::max);
        if s_grid.iter().any(|s| !(0.0..S_MAX).contains(s)) {
            return Err(Error::Domain("grid parameters must lie in [0, 3/2[".into()));
        }
        let energy = self.params().energy;
        let per_point: Vec<Result<GaussReport>> = p_grid
            .par_iter()
            .map(|p| {
                let basis = tangent_basis(p);
                let flow = unit_chart.flow_jacobian(p, s_top, &basis)?;
                let mut rep = GaussReport {
                    points: s_grid.len(),
                    orthogonality: 0.0,
                    unit_speed: 0.0,
                    level: 0.0,
                    min_monotonicity: f64::INFINITY,
                    max_radius: 0.0,
                    min_gram_eigenvalue: f64::INFINITY,
                };
                for &s in s_grid {
                    let (y, cols) = flow.at(s)?;
                    let (f, grad) = self.gen.value_and_gradient(&y)?;
                    let gg = dot(&grad, &grad);
                    let dy_ds = scale(&grad, 1.0 / gg);
                    for c in &cols {
                        rep.orthogonality = rep.orthogonality.max(dot(&dy_ds, c).abs());
                    }
                    // Speed in the singular parameter τ.
                    let tau = rho_reparam(s)?;
                    let phi = (1.0 - tau).powf(-1.0 / 3.0);
                    let w = energy - 2.0 * gg * (1.0 - 2.0 * f / 3.0);
                    let speed_sq = phi * phi * dot(&dy_ds, &dy_ds);
                    rep.unit_speed = rep.unit_speed.max((0.5 * (energy - w) * speed_sq - 1.0).abs());
                    rep.level = rep.level.max((f - s).abs());
                    rep.min_monotonicity = rep.min_monotonicity.min(dot(&dy_ds, &y));
                    rep.max_radius = rep.max_radius.max(norm(&y));
                    let mut vectors = vec![dy_ds];
                    vectors.extend(cols);
                    rep.min_gram_eigenvalue = rep.min_gram_eigenvalue.min(gram_min_eigenvalue(&vectors));
                }
                Ok(rep)
            })
            .collect();
        let mut total = GaussReport {
            points: 0,
            orthogonality: 0.0,
            unit_speed: 0.0,
            level: 0.0,
            min_monotonicity: f64::INFINITY,
            max_radius: 0.0,
            min_gram_eigenvalue: f64::INFINITY,
        };
        for r in per_point {
            let r = r?;
            total.points += r.points;
            total.orthogonality = total.orthogonality.max(r.orthogonality);
            total.unit_speed = total.unit_speed.max(r.unit_speed);
            total.level = total.level.max(r.level);
            total.min_monotonicity = total.min_monotonicity.min(r.min_monotonicity);
            total.max_radius = total.max_radius.max(r.max_radius);
            total.min_gram_eigenvalue = total.min_gram_eigenvalue.min(r.min_gram_eigenvalue);
        }
        Ok(total)
    }
}

/// `count` equally spaced unit vectors in the plane of the axis and its
/// companion, starting on the axis.
pub fn planar_grid(params: &ModelParams, count: usize) -> Vec<Vec<f64>> {
    let w = params.axis_companion();
    (0..count)
        .map(|k| params.planar_direction(2.0 * std::f64::consts::PI * k as f64 / count as f64, &w))
        .collect()
}

/// `count` equally spaced chart parameters in `[0, 3/2[`.
pub fn s_grid(count: usize) -> Vec<f64> {
    (0..count).map(|j| S_MAX * j as f64 / count as f64).collect()
}


#[cfg(test)]
mod oracle_tests {
    use super::*;

    /// Radius reached at chart parameter `s` when ε = 0: the root of the
    /// radial cubic `F0(r) = s`, solved by bisection.
    fn radial_oracle(s: f64) -> f64 {
        let f1 = 7.0f64.sqrt() / 2.0;
        let f2 = 0.25 * (4.0 / 3.0 * f1 * f1 - 1.0 / f1);
        let f3 = 0.5629235887738143;
        let f = |r: f64| {
            let d = r - 1.0;
            f1 * d + f2 * d * d / 2.0 + f3 * d * d * d / 6.0 - s
        };
        let (mut a, mut b) = (1.0, 4.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        0.5 * (a + b)
    }

    fn gen(eps: f64) -> GeneratingFn {
        GeneratingFn::new(ModelParams::new(2, 4.0, eps).unwrap()).unwrap()
    }

    #[test]
    fn radial_flow_at_zero_eccentricity() {
        let chart = FlowChart::unit(gen(0.0));
        let c = gen(0.0).f_coefficients(&[1.0, 0.0]).unwrap();
        assert!((c.f1 - 7.0f64.sqrt() / 2.0).abs() < 1e-15);
        let x = chart.point(&[0.6, 0.8], S_MAX).unwrap();
        let r = norm(&x);
        assert!((r - radial_oracle(S_MAX)).abs() < 1e-9);
        assert!((r - 1.9422).abs() < 1e-4);
        assert!((x[0] / r - 0.6).abs() < 1e-12);
    }

    #[test]
    fn level_law_and_round_trip() {
        let chart = FlowChart::unit(gen(0.05));
        for k in 0..12 {
            let t = 0.37 + k as f64 * 0.5;
            let p = vec![t.cos(), t.sin()];
            let s = 0.11 * (k + 1) as f64;
            let x = chart.point(&p, s).unwrap();
            assert!((chart.generating().value(&x).unwrap() - s).abs() < 1e-9);
            let (q, s_back) = chart.backward_flow(&x).unwrap();
            assert!((s_back - s).abs() < 1e-9);
            assert!(crate::linalg::distance(&q, &p) < 1e-7);
        }
    }

    #[test]
    fn singular_and_unit_charts_agree() {
        let g = gen(0.05);
        let p = [0.28, 0.96];
        let s = 1.2;
        let a = FlowChart::unit(g.clone()).point(&p, s).unwrap();
        let b = FlowChart::singular(g).point(&p, rho_reparam(s).unwrap()).unwrap();
        assert!(crate::linalg::distance(&a, &b) < 1e-8);
    }

    #[test]
    fn launch_point_is_on_the_outer_level() {
        let chart = FlowChart::unit(gen(0.05));
        let x = chart.launch_point(&[0.0, -1.0]).unwrap();
        assert!((chart.generating().value(&x).unwrap() - S_MAX).abs() < 1e-13);
    }

    #[test]
    fn gauss_residuals_small() {
        let g = gen(0.05);
        let chart = FlowChart::singular(g.clone());
        let rep = chart.verify_gauss(&planar_grid(g.params(), 8), &s_grid(16)).unwrap();
        assert!(rep.orthogonality < 1e-8, "{rep:?}");
        assert!(rep.unit_speed < 1e-8, "{rep:?}");
        assert!(rep.level < 1e-9, "{rep:?}");
        assert!(rep.min_monotonicity > 0.0);
        assert!(rep.max_radius < 3.0);
        assert!(rep.min_gram_eigenvalue > 0.0);
    }
}
