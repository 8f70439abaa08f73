//! From Jacobi geodesics to Newtonian orbits of energy `E`.
//!
//! Along the geodesic `y(P, s)` the Newtonian time satisfies
//! `ds/dt = 2 |grad F|² (1 - 2s/3)^{1/2}`, which stalls at `s = 3/2`.
//! With the accumulator `a`, `s = (3/2)(1 - (1 - a/3)²)`, the system
//!
//! ```text
//! dy/dt = 2 (1 - a/3) grad F(y),   da/dt = 2 |grad F(y)|²
//! ```
//!
//! is regular up to and past the arrival time `T`, defined by `a(T) = 3`.
//! The singular time change `σ = 1 - (1 - a/3)³` is integrated alongside
//! as an independent check.

use crate::error::{Error, Result};
use crate::generating::GeneratingFn;
use crate::geodesics::{FieldErrors, FlowChart, S_MAX};
use crate::linalg::{distance, dot, norm, scale};
use crate::ode::{integrate_until, Direction, Event, EventHit, IntegratorConfig, Trajectory};
use crate::params::ModelParams;
use crate::potential::Potential;

/// Accumulator value at arrival.
pub const ACCUMULATOR_TARGET: f64 = 3.0;

/// Tolerance factor applied to the configured integrator for conversions.
pub const CONVERSION_TOL_FACTOR: f64 = 1e-2;

/// Generous bound on the arrival time; the event always fires before it.
const TIME_BOUND: f64 = 20.0;

/// Smallest `1 - σ` at which the time-change law is evaluated.
const TIME_CHANGE_WINDOW: f64 = 1e-6;

/// Step of the velocity differences in [`verify_dynamics`].
const DYNAMICS_STEP: f64 = 1e-2;

/// `s(a) = (3/2)(1 - (1 - a/3)²)`.
pub fn chart_parameter(a: f64) -> f64 {
    let w = 1.0 - a / 3.0;
    S_MAX * (1.0 - w * w)
}

/// A curve with positions and velocities on a time interval.
pub trait PhasePath {
    fn span(&self) -> (f64, f64);

    /// Times at which the path was computed; sampling starts from these.
    fn knots(&self) -> Vec<f64>;

    fn phase(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)>;

    fn position(&self, t: f64) -> Result<Vec<f64>> {
        self.phase(t).map(|(q, _)| q)
    }
}

/// Newtonian trajectory with state `[q, q̇]`.
#[derive(Debug, Clone)]
pub struct NewtonOrbit {
    pub trajectory: Trajectory,
}

impl PhasePath for NewtonOrbit {
    fn span(&self) -> (f64, f64) {
        (self.trajectory.t_start(), self.trajectory.t_end())
    }

    fn knots(&self) -> Vec<f64> {
        self.trajectory.times().to_vec()
    }

    fn phase(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let s = self.trajectory.dense_eval(t)?;
        let n = s.len() / 2;
        Ok((s[..n].to_vec(), s[n..].to_vec()))
    }
}

impl NewtonOrbit {
    pub fn dim(&self) -> usize {
        self.trajectory.dim() / 2
    }

    pub fn last_phase(&self) -> (Vec<f64>, Vec<f64>) {
        let s = self.trajectory.last_state();
        let n = s.len() / 2;
        (s[..n].to_vec(), s[n..].to_vec())
    }
}

/// Integrate `q̈ = -grad V(q)` from `(q0, v0)` over `t_span`, stopping at
/// the first triggered event. Events see the state `[q, q̇]`.
pub fn integrate_newton(
    potential: &dyn Potential,
    q0: &[f64],
    v0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    events: &[Event<'_>],
) -> Result<(NewtonOrbit, Option<EventHit>)> {
    let n = q0.len();
    if v0.len() != n || potential.dim() != n {
        return Err(Error::Domain("position, velocity and potential dimensions differ".into()));
    }
    let mut state = q0.to_vec();
    state.extend_from_slice(v0);
    let errors = FieldErrors::new();
    let r = integrate_until(
        |_t, s: &[f64], ds: &mut [f64]| {
            ds[..n].copy_from_slice(&s[n..]);
            match potential.gradient(&s[..n]) {
                Ok(g) => {
                    for i in 0..n {
                        ds[n + i] = -g[i];
                    }
                }
                Err(e) => {
                    errors.record(e);
                    ds.fill(f64::NAN);
                }
            }
        },
        &state,
        t_span,
        cfg,
        events,
    );
    let (trajectory, hit) = errors.finish(r)?;
    Ok((NewtonOrbit { trajectory }, hit))
}

/// Newtonian orbit obtained by reparameterizing the geodesic from `P`.
/// State `[y, a, σ]`.
#[derive(Debug, Clone)]
pub struct ConvertedOrbit {
    pub p: Vec<f64>,
    pub trajectory: Trajectory,
    gen: GeneratingFn,
}

impl ConvertedOrbit {
    pub fn arrival_time(&self) -> f64 {
        self.trajectory.t_end()
    }

    /// `(a(t), σ(t))`.
    pub fn clocks(&self, t: f64) -> Result<(f64, f64)> {
        let s = self.trajectory.dense_eval(t)?;
        let n = s.len() - 2;
        Ok((s[n], s[n + 1]))
    }

    fn velocity_from_state(&self, state: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = state.len() - 2;
        let y = state[..n].to_vec();
        let g = self.gen.gradient(&y)?;
        let v = scale(&g, 2.0 * (1.0 - state[n] / 3.0));
        Ok((y, v))
    }

    pub fn terminal_phase(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        self.velocity_from_state(self.trajectory.last_state())
    }
}

impl PhasePath for ConvertedOrbit {
    fn span(&self) -> (f64, f64) {
        (self.trajectory.t_start(), self.trajectory.t_end())
    }

    fn knots(&self) -> Vec<f64> {
        self.trajectory.times().to_vec()
    }

    fn phase(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.velocity_from_state(&self.trajectory.dense_eval(t)?)
    }
}

/// Checks of the arrival-time law along one converted orbit.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalReport {
    pub arrival_time: f64,
    /// `|a(T) - 3|`.
    pub accumulator_residual: f64,
    /// `|σ(T) - 1|`.
    pub sigma_residual: f64,
    /// `|q̇(T)|`.
    pub terminal_speed: f64,
    /// `max |dσ/dt - (E - W(y))|` at the knots with `1 - σ >= 1e-6`; closer
    /// to arrival `(1 - σ)^{2/3}` amplifies the error in `σ` without bound.
    pub time_change_residual: f64,
    /// `max |σ - (1 - (1 - a/3)³)|` at all knots.
    pub sigma_consistency: f64,
    /// `max |F(y) - s(a)|` at the knots.
    pub level_residual: f64,
    /// Whether `σ < 1` at every knot before `T` and strictly increasing.
    pub sigma_monotone_below_one: bool,
    /// Whether `|q|` is strictly increasing at the knots.
    pub radius_increasing: bool,
}

/// The geodesic family of one generating function, read as Newtonian orbits.
#[derive(Debug, Clone)]
pub struct OrbitChart {
    chart: FlowChart,
}

impl OrbitChart {
    pub fn new(gen: GeneratingFn) -> Self {
        Self { chart: FlowChart::unit(gen) }
    }

    pub fn chart(&self) -> &FlowChart {
        &self.chart
    }

    pub fn params(&self) -> &ModelParams {
        self.chart.params()
    }

    fn gen(&self) -> &GeneratingFn {
        self.chart.generating()
    }

    /// `𝒲(P, s)` in the gradient form and, as a cross-check, in the form
    /// `E - 2 (1 - 2s/3) / |∂y/∂s|²`.
    pub fn potential_at(&self, p: &[f64], s: f64) -> Result<(f64, f64)> {
        let y = self.chart.point(p, s)?;
        let g = self.gen().gradient(&y)?;
        let energy = self.params().energy;
        let gradient_form = energy - 2.0 * dot(&g, &g) * (1.0 - 2.0 * s / 3.0);
        let dy = self.chart.normalized_gradient(&y)?;
        let speed_form = energy - 2.0 * (1.0 - 2.0 * s / 3.0) / dot(&dy, &dy);
        Ok((gradient_form, speed_form))
    }

    /// The converted orbit from `P` on `[0, T(P)]`.
    pub fn geodesic_to_orbit(&self, p: &[f64]) -> Result<ConvertedOrbit> {
        let n = self.params().dim;
        if p.len() != n || (norm(p) - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("orbit must start at a unit vector of the right dimension".into()));
        }
        let mut state = p.to_vec();
        state.extend_from_slice(&[0.0, 0.0]);
        let errors = FieldErrors::new();
        let arrival = |_t: f64, s: &[f64]| s[n] - ACCUMULATOR_TARGET;
        let events = [Event::new(&arrival, Direction::Rising)];
        let r = integrate_until(
            |_t, s: &[f64], ds: &mut [f64]| match self.gen().gradient(&s[..n]) {
                Ok(g) => {
                    let gg = dot(&g, &g);
                    let w = 1.0 - s[n] / 3.0;
                    for i in 0..n {
                        ds[i] = 2.0 * w * g[i];
                    }
                    ds[n] = 2.0 * gg;
                    ds[n + 1] = 2.0 * (1.0 - s[n + 1]).max(0.0).powf(2.0 / 3.0) * gg;
                }
                Err(e) => {
                    errors.record(e);
                    ds.fill(f64::NAN);
                }
            },
            &state,
            (0.0, TIME_BOUND),
            // (1 - σ)^{2/3} is not Lipschitz at arrival, where the local
            // error estimate undershoots; tighter steps keep σ(T) within 1e-9.
            &self.params().integrator.scaled(CONVERSION_TOL_FACTOR),
            &events,
        );
        let (trajectory, hit) = errors.finish(r)?;
        if hit.is_none() {
            return Err(Error::Domain(format!("accumulator did not reach 3 before t = {TIME_BOUND}")));
        }
        Ok(ConvertedOrbit {
            p: p.to_vec(),
            trajectory,
            gen: self.gen().clone(),
        })
    }

    /// `T(P)`.
    pub fn arrival_time(&self, p: &[f64]) -> Result<f64> {
        Ok(self.geodesic_to_orbit(p)?.arrival_time())
    }

    /// Arrival-time, time-change and monotonicity checks for the orbit from `P`.
    pub fn arrival_report(&self, p: &[f64]) -> Result<ArrivalReport> {
        let orbit = self.geodesic_to_orbit(p)?;
        let t_end = orbit.arrival_time();
        let n = self.params().dim;
        let energy = self.params().energy;
        let (a_end, sigma_end) = orbit.clocks(t_end)?;
        let (_, v_end) = orbit.terminal_phase()?;
        let mut time_change_residual: f64 = 0.0;
        let mut level_residual: f64 = 0.0;
        let mut sigma_consistency: f64 = 0.0;
        let mut sigma_monotone_below_one = true;
        let mut radius_increasing = true;
        let mut prev: Option<(f64, f64)> = None;
        let times = orbit.trajectory.times();
        for (i, state) in orbit.trajectory.states().iter().enumerate() {
            let y = &state[..n];
            let (a, sigma) = (state[n], state[n + 1]);
            let (f, g) = self.gen().value_and_gradient(y)?;
            let gg = dot(&g, &g);
            let w = energy - 2.0 * gg * (1.0 - 2.0 * f / 3.0);
            let dsigma = 2.0 * (1.0 - sigma).max(0.0).powf(2.0 / 3.0) * gg;
            if 1.0 - sigma >= TIME_CHANGE_WINDOW {
                time_change_residual = time_change_residual.max((dsigma - (energy - w)).abs());
            }
            sigma_consistency = sigma_consistency.max((sigma - (1.0 - (1.0 - a / 3.0).powi(3))).abs());
            level_residual = level_residual.max((f - chart_parameter(a)).abs());
            let r = norm(y);
            if let Some((r0, s0)) = prev {
                if !(r > r0) {
                    radius_increasing = false;
                }
                if times[i] < t_end && !(sigma > s0 && sigma < 1.0) {
                    sigma_monotone_below_one = false;
                }
            }
            prev = Some((r, sigma));
        }
        Ok(ArrivalReport {
            arrival_time: t_end,
            accumulator_residual: (a_end - ACCUMULATOR_TARGET).abs(),
            sigma_residual: (sigma_end - 1.0).abs(),
            terminal_speed: norm(&v_end),
            time_change_residual,
            sigma_consistency,
            level_residual,
            sigma_monotone_below_one,
            radius_increasing,
        })
    }

    /// Integrate Newton's equation for `potential` from `(P, λ P)` over
    /// `[0, T(P)]` and return the largest position deviation from the
    /// converted orbit.
    pub fn direct_vs_converted(&self, p: &[f64], potential: &dyn Potential) -> Result<f64> {
        let converted = self.geodesic_to_orbit(p)?;
        let t_end = converted.arrival_time();
        let lambda = self.params().launch_speed(p);
        let (direct, _) = integrate_newton(
            potential,
            p,
            &scale(p, lambda),
            (0.0, t_end),
            &self.params().integrator,
            &[],
        )?;
        let mut times = converted.knots();
        times.extend(direct.knots());
        times.extend((0..=256).map(|k| t_end * k as f64 / 256.0));
        let mut worst: f64 = 0.0;
        for t in times {
            let t = t.clamp(0.0, t_end);
            worst = worst.max(distance(&converted.position(t)?, &direct.position(t)?));
        }
        Ok(worst)
    }
}

/// Residuals of Newton's equation and of the energy law along a path.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsReport {
    pub samples: usize,
    /// `max |q̈ + grad V(q)|`, with `q̈` from Richardson-extrapolated
    /// central differences of the velocity.
    pub newton_residual: f64,
    /// `max |½ |q̇|² + V(q) - E|`.
    pub energy_residual: f64,
}

/// Check a path against `q̈ = -grad V` and `½|q̇|² + V = E`.
///
/// The energy law is checked at every knot; the equation of motion at the
/// knots at least two difference steps away from the ends.
pub fn verify_dynamics(path: &dyn PhasePath, potential: &dyn Potential, energy: f64) -> Result<DynamicsReport> {
    let (t0, t1) = path.span();
    let h = DYNAMICS_STEP.min((t1 - t0).abs() / 8.0);
    let mut newton_residual: f64 = 0.0;
    let mut energy_residual: f64 = 0.0;
    let knots = path.knots();
    for &t in &knots {
        let (q, v) = path.phase(t)?;
        let (value, grad) = potential.value_and_gradient(&q)?;
        energy_residual = energy_residual.max((0.5 * dot(&v, &v) + value - energy).abs());
        if t - 2.0 * h < t0.min(t1) || t + 2.0 * h > t0.max(t1) {
            continue;
        }
        let central = |k: f64| -> Result<Vec<f64>> {
            let (_, vp) = path.phase(t + k)?;
            let (_, vm) = path.phase(t - k)?;
            Ok(vp.iter().zip(&vm).map(|(a, b)| (a - b) / (2.0 * k)).collect())
        };
        let d1 = central(h)?;
        let d2 = central(2.0 * h)?;
        let res = d1
            .iter()
            .zip(&d2)
            .zip(&grad)
            .map(|((a, b), g)| ((4.0 * a - b) / 3.0 + g).powi(2))
            .sum::<f64>()
            .sqrt();
        newton_residual = newton_residual.max(res);
    }
    Ok(DynamicsReport {
        samples: knots.len(),
        newton_residual,
        energy_residual,
    })
}

/// Newtonian orbit from `(q0, v0)` integrated over `[0, t_end]` without events.
pub fn newton_orbit(
    potential: &dyn Potential,
    q0: &[f64],
    v0: &[f64],
    t_end: f64,
    cfg: &IntegratorConfig,
) -> Result<NewtonOrbit> {
    integrate_newton(potential, q0, v0, (0.0, t_end), cfg, &[]).map(|(o, _)| o)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bump::{BumpMode, BumpProfile};
    use crate::potential::{PotentialField, QuadraticPotential};

    fn chart(eps: f64) -> OrbitChart {
        OrbitChart::new(GeneratingFn::new(ModelParams::new(2, 4.0, eps).unwrap()).unwrap())
    }

    /// Arrival time at ε = 0 as the quadrature `∫_0^3 da / (2 F0'(r(a))²)`
    /// with `F0(r(a)) = s(a)` solved by bisection; Simpson's rule.
    fn radial_arrival_oracle() -> f64 {
        let f1 = 7.0f64.sqrt() / 2.0;
        let f2 = 0.25 * (4.0 / 3.0 * f1 * f1 - 1.0 / f1);
        let f3 = 0.5629235887738143;
        let f = |d: f64| d * (f1 + d * (f2 / 2.0 + d * f3 / 6.0));
        let df = |d: f64| f1 + d * (f2 + d * f3 / 2.0);
        let integrand = |a: f64| {
            let s = 1.5 * (1.0 - (1.0 - a / 3.0).powi(2));
            let (mut lo, mut hi) = (0.0, 3.0);
            for _ in 0..200 {
                let m = 0.5 * (lo + hi);
                if f(m) > s {
                    hi = m;
                } else {
                    lo = m;
                }
            }
            let slope = df(0.5 * (lo + hi));
            1.0 / (2.0 * slope * slope)
        };
        let m = 4000;
        let h = 3.0 / m as f64;
        let mut sum = integrand(0.0) + integrand(3.0);
        for k in 1..m {
            sum += if k % 2 == 1 { 4.0 } else { 2.0 } * integrand(k as f64 * h);
        }
        sum * h / 3.0
    }

    #[test]
    fn chart_parameter_endpoints() {
        assert_eq!(chart_parameter(0.0), 0.0);
        assert_eq!(chart_parameter(3.0), 1.5);
    }

    #[test]
    fn arrival_time_matches_radial_quadrature() {
        let t_oracle = radial_arrival_oracle();
        let c = chart(0.0);
        for p in [[1.0, 0.0], [0.6, -0.8]] {
            let t = c.arrival_time(&p).unwrap();
            assert!((t - t_oracle).abs() < 1e-8, "{t} vs {t_oracle}");
        }
    }

    #[test]
    fn arrival_report_at_small_eccentricity() {
        let rep = chart(0.05).arrival_report(&[0.28, 0.96]).unwrap();
        assert!(rep.accumulator_residual < 1e-9, "{rep:?}");
        assert!(rep.sigma_residual < 1e-8, "{rep:?}");
        assert!(rep.terminal_speed < 1e-6, "{rep:?}");
        assert!(rep.time_change_residual < 1e-8, "{rep:?}");
        assert!(rep.sigma_consistency < 1e-9, "{rep:?}");
        assert!(rep.sigma_monotone_below_one && rep.radius_increasing);
    }

    #[test]
    fn converted_orbit_initial_data() {
        let orbit = chart(0.0).geodesic_to_orbit(&[0.0, 1.0]).unwrap();
        let (q, v) = orbit.phase(0.0).unwrap();
        assert_eq!(q, vec![0.0, 1.0]);
        assert!((norm(&v) - 7.0f64.sqrt()).abs() < 1e-14);
        let (q_end, _) = orbit.terminal_phase().unwrap();
        assert!((norm(&q_end) - 1.9422).abs() < 1e-4);
    }

    #[test]
    fn two_forms_of_the_jacobi_potential_agree() {
        let (a, b) = chart(0.05).potential_at(&[0.6, 0.8], 0.9).unwrap();
        assert!((a - b).abs() < 1e-12);
        assert!(a < 4.0);
    }

    #[test]
    fn harmonic_circular_orbit() {
        let v = QuadraticPotential { center: vec![0.0, 0.0] };
        let cfg = IntegratorConfig::default().scaled(1e-3);
        let orbit = newton_orbit(&v, &[1.0, 0.0], &[0.0, 1.0], 2.0 * std::f64::consts::PI, &cfg).unwrap();
        let rep = verify_dynamics(&orbit, &v, 1.0).unwrap();
        assert!(rep.newton_residual < 1e-8, "{rep:?}");
        assert!(rep.energy_residual < 1e-8, "{rep:?}");
        let (q, _) = orbit.last_phase();
        assert!(distance(&q, &[1.0, 0.0]) < 1e-9);
    }

    #[test]
    fn converted_orbit_solves_newton_in_the_collar() {
        let c = chart(0.05);
        let field = PotentialField::new(
            c.chart().generating().clone(),
            Some(BumpProfile::with_defaults(BumpMode::Brake, 4.0).unwrap()),
        )
        .unwrap();
        let orbit = c.geodesic_to_orbit(&[0.6, 0.8]).unwrap();
        let rep = verify_dynamics(&orbit, &field, 4.0).unwrap();
        assert!(rep.energy_residual < 1e-8, "{rep:?}");
        assert!(rep.newton_residual < 1e-5, "{rep:?}");
        let dev = c.direct_vs_converted(&[0.6, 0.8], &field).unwrap();
        assert!(dev < 1e-6, "{dev}");
    }
}
