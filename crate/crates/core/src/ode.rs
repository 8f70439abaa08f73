//! Adaptive Dormand–Prince 5(4) integration with continuous output and
//! event location.
//!
//! Every flow and orbit in the crate goes through [`integrate`] or
//! [`integrate_until`]. The returned [`Trajectory`] keeps the accepted
//! steps together with the fourth-order continuous extension of each step,
//! so states can be evaluated at any time in range and events can be
//! resolved after the fact with [`Trajectory::locate_event`].

use crate::error::{Error, Result};

/// Step-size control knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest admissible step magnitude.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "tolerances must be positive (rel_tol = {}, abs_tol = {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "max_step must be positive, got {}",
                self.max_step
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Same config with both tolerances scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Time resolution of event root-finding.
pub const EVENT_TIME_TOL: f64 = 1e-12;

// Dormand–Prince tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension (Hairer, Nørsett & Wanner).
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[derive(Debug, Clone)]
struct Segment {
    t0: f64,
    h: f64,
    /// Five blocks of `dim` coefficients.
    coeffs: Vec<f64>,
}

impl Segment {
    fn eval_into(&self, t: f64, out: &mut [f64]) {
        let n = out.len();
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let c = &self.coeffs;
        for i in 0..n {
            out[i] = c[i]
                + theta
                    * (c[n + i]
                        + theta1 * (c[2 * n + i] + theta * (c[3 * n + i] + theta1 * c[4 * n + i])));
        }
    }
}

/// Accepted integration steps plus their continuous extensions.
///
/// Sample times are strictly monotone in the direction of integration
/// (increasing for forward runs).
#[derive(Debug, Clone)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
    segments: Vec<Segment>,
}

/// A resolved event crossing.
#[derive(Debug, Clone, PartialEq)]
pub struct EventHit {
    /// Index of the event in the slice passed to [`integrate_until`].
    pub index: usize,
    pub t: f64,
    pub state: Vec<f64>,
}

/// Which sign changes count as a crossing, in integration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Either,
}

impl Direction {
    fn triggers(self, before: f64, after: f64) -> bool {
        match self {
            Direction::Rising => before < 0.0 && after >= 0.0,
            Direction::Falling => before > 0.0 && after <= 0.0,
            Direction::Either => (before < 0.0 && after >= 0.0) || (before > 0.0 && after <= 0.0),
        }
    }
}

/// A terminal event `g(t, y) = 0`.
pub struct Event<'a> {
    pub func: &'a dyn Fn(f64, &[f64]) -> f64,
    pub direction: Direction,
}

impl<'a> Event<'a> {
    pub fn new(func: &'a dyn Fn(f64, &[f64]) -> f64, direction: Direction) -> Self {
        Self { func, direction }
    }
}

impl Trajectory {
    fn single(t0: f64, y0: &[f64]) -> Self {
        Self {
            dim: y0.len(),
            times: vec![t0],
            states: vec![y0.to_vec()],
            segments: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("trajectory has at least one sample")
    }

    pub fn first_state(&self) -> &[f64] {
        &self.states[0]
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().expect("trajectory has at least one sample")
    }

    fn forward(&self) -> bool {
        self.t_end() >= self.t_start()
    }

    fn in_range(&self, t: f64) -> bool {
        let (lo, hi) = if self.forward() {
            (self.t_start(), self.t_end())
        } else {
            (self.t_end(), self.t_start())
        };
        t >= lo && t <= hi
    }

    /// Continuous-extension state at time `t`.
    pub fn dense_eval(&self, t: f64) -> Result<Vec<f64>> {
        if !self.in_range(t) {
            return Err(Error::OutOfRange {
                t,
                start: self.t_start(),
                end: self.t_end(),
            });
        }
        if self.segments.is_empty() {
            return Ok(self.states[0].clone());
        }
        let fwd = self.forward();
        // First sample strictly beyond t, so segment idx - 1 covers t.
        let idx = self
            .times
            .partition_point(|&s| if fwd { s <= t } else { s >= t });
        if idx >= self.times.len() {
            return Ok(self.last_state().to_vec());
        }
        let seg = &self.segments[idx.saturating_sub(1).min(self.segments.len() - 1)];
        let mut out = vec![0.0; self.dim];
        seg.eval_into(t, &mut out);
        Ok(out)
    }

    /// First sign change of `event` along the trajectory, resolved on the
    /// continuous extension. `None` when the event never changes sign.
    pub fn locate_event<G>(&self, event: G) -> Option<(f64, Vec<f64>)>
    where
        G: Fn(f64, &[f64]) -> f64,
    {
        let mut prev = event(self.times[0], &self.states[0]);
        for (i, seg) in self.segments.iter().enumerate() {
            let t1 = self.times[i + 1];
            let g1 = event(t1, &self.states[i + 1]);
            if prev != 0.0 && Direction::Either.triggers(prev, g1) {
                let t = refine_root(seg, self.dim, &event, self.times[i], t1, prev, g1);
                let mut y = vec![0.0; self.dim];
                seg.eval_into(t, &mut y);
                return Some((t, y));
            }
            if prev == 0.0 || g1 != 0.0 {
                prev = g1;
            }
        }
        None
    }

    /// Restrict to the samples no later than `t` (in integration order),
    /// closing with the continuous-extension state at `t`.
    /// Extend by `other`, which must start where this trajectory ends.
    pub fn append(&mut self, other: &Trajectory) -> Result<()> {
        if other.dim != self.dim {
            return Err(Error::InvalidConfig("appended trajectory has a different dimension".into()));
        }
        let gap = (other.t_start() - self.t_end()).abs();
        if gap > 1e-12 * (1.0 + self.t_end().abs()) {
            return Err(Error::OutOfRange {
                t: other.t_start(),
                start: self.t_start(),
                end: self.t_end(),
            });
        }
        if other.len() > 1 && self.len() > 1 && other.forward() != self.forward() {
            return Err(Error::InvalidConfig("appended trajectory runs in the other direction".into()));
        }
        self.times.extend_from_slice(&other.times[1..]);
        self.states.extend_from_slice(&other.states[1..]);
        self.segments.extend_from_slice(&other.segments);
        Ok(())
    }

    pub fn truncated(&self, t: f64) -> Result<Trajectory> {
        let y = self.dense_eval(t)?;
        let fwd = self.forward();
        let keep = self
            .times
            .partition_point(|&s| if fwd { s < t } else { s > t })
            .max(1);
        let mut times = self.times[..keep].to_vec();
        let mut states = self.states[..keep].to_vec();
        let mut segments = self.segments[..keep - 1].to_vec();
        if t != times[keep - 1] {
            segments.push(self.segments[keep - 1].clone());
            times.push(t);
            states.push(y);
        }
        Ok(Trajectory {
            dim: self.dim,
            times,
            states,
            segments,
        })
    }
}

fn refine_root<G>(seg: &Segment, dim: usize, event: &G, ta: f64, tb: f64, ga: f64, gb: f64) -> f64
where
    G: Fn(f64, &[f64]) -> f64,
{
    let mut y = vec![0.0; dim];
    let mut g_at = |t: f64| {
        seg.eval_into(t, &mut y);
        event(t, &y)
    };
    find_bracketed_root(&mut g_at, ta, tb, ga, gb, EVENT_TIME_TOL)
}

/// Bracketed root of a scalar function by an Illinois false-position step
/// with a bisection fallback. `a` and `b` may be given in either order.
pub fn find_bracketed_root<G>(g: &mut G, a: f64, b: f64, ga: f64, gb: f64, tol: f64) -> f64
where
    G: FnMut(f64) -> f64,
{
    if ga == 0.0 {
        return a;
    }
    if gb == 0.0 {
        return b;
    }
    let (mut a, mut b, mut ga, mut gb) = (a, b, ga, gb);
    let mut side = 0i8;
    for iter in 0..200 {
        if (b - a).abs() <= tol {
            break;
        }
        let secant = (a * gb - b * ga) / (gb - ga);
        let mid = 0.5 * (a + b);
        let lo = a.min(b);
        let hi = a.max(b);
        // Every third iteration is a plain bisection so the bracket shrinks
        // geometrically even when false position stalls.
        let t = if iter % 3 == 2 || !secant.is_finite() || secant <= lo || secant >= hi {
            mid
        } else {
            secant
        };
        let gt = g(t);
        if gt == 0.0 {
            return t;
        }
        if (gt > 0.0) == (ga > 0.0) {
            a = t;
            ga = gt;
            if side == -1 {
                gb *= 0.5;
            }
            side = -1;
        } else {
            b = t;
            gb = gt;
            if side == 1 {
                ga *= 0.5;
            }
            side = 1;
        }
    }
    if ga.abs() < gb.abs() {
        a
    } else {
        b
    }
}

fn check_finite(t: f64, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { t })
    }
}

fn initial_step<F>(field: &mut F, t0: f64, y0: &[f64], f0: &[f64], dir: f64, cfg: &IntegratorConfig) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let n = y0.len();
    let mut dnf = 0.0;
    let mut dny = 0.0;
    for i in 0..n {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        dnf += (f0[i] / sk).powi(2);
        dny += (y0[i] / sk).powi(2);
    }
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(cfg.max_step);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + dir * h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    field(t0 + dir * h, &y1, &mut f1);
    check_finite(t0 + dir * h, &f1)?;
    let mut der2 = 0.0;
    for i in 0..n {
        let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        der2 += ((f1[i] - f0[i]) / sk).powi(2);
    }
    let der2 = der2.sqrt() / h;
    let der12 = der2.max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(cfg.max_step))
}

/// Integrate `dy/dt = field(t, y)` over `t_span` (which may run backwards).
pub fn integrate<F>(field: F, y0: &[f64], t_span: (f64, f64), cfg: &IntegratorConfig) -> Result<Trajectory>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    integrate_until(field, y0, t_span, cfg, &[]).map(|(traj, _)| traj)
}

/// Integrate until the end of `t_span` or the first triggered event,
/// whichever comes first. The trajectory ends exactly at the event time.
pub fn integrate_until<F>(
    mut field: F,
    y0: &[f64],
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    events: &[Event<'_>],
) -> Result<(Trajectory, Option<EventHit>)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    cfg.validate()?;
    let (t0, t1) = t_span;
    check_finite(t0, y0)?;
    let mut traj = Trajectory::single(t0, y0);
    if t1 == t0 {
        return Ok((traj, None));
    }
    let dir = if t1 > t0 { 1.0 } else { -1.0 };
    let n = y0.len();

    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.func)(t0, y0)).collect();

    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    field(t, &y, &mut k1);
    check_finite(t, &k1)?;
    let mut h = initial_step(&mut field, t0, y0, &k1, dir, cfg)?;

    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut y1 = vec![0.0; n];

    let mut steps = 0usize;
    let mut last_rejected = false;

    loop {
        if (t1 - t) * dir <= 0.0 {
            break;
        }
        if steps >= cfg.max_steps {
            return Err(Error::StepLimit { steps, t });
        }
        h = h.min(cfg.max_step);
        let remaining = (t1 - t).abs();
        let last = 1.01 * h >= remaining;
        if last {
            h = remaining;
        }
        let hs = dir * h;

        for i in 0..n {
            ys[i] = y[i] + hs * A21 * k1[i];
        }
        field(t + C2 * hs, &ys, &mut k2);
        for i in 0..n {
            ys[i] = y[i] + hs * (A31 * k1[i] + A32 * k2[i]);
        }
        field(t + C3 * hs, &ys, &mut k3);
        for i in 0..n {
            ys[i] = y[i] + hs * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        field(t + C4 * hs, &ys, &mut k4);
        for i in 0..n {
            ys[i] = y[i] + hs * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        field(t + C5 * hs, &ys, &mut k5);
        for i in 0..n {
            ys[i] = y[i] + hs * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        let t_new = if last { t1 } else { t + hs };
        field(t + hs, &ys, &mut k6);
        for i in 0..n {
            y1[i] = y[i] + hs * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        field(t_new, &y1, &mut k7);
        steps += 1;

        let finite = [&k2, &k3, &k4, &k5, &k6, &k7]
            .iter()
            .all(|k| k.iter().all(|x| x.is_finite()))
            && y1.iter().all(|x| x.is_finite());

        let err = if finite {
            let mut acc = 0.0;
            for i in 0..n {
                let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y1[i].abs());
                let e = hs
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                acc += (e / sk).powi(2);
            }
            (acc / n as f64).sqrt()
        } else {
            f64::INFINITY
        };

        if err <= 1.0 {
            let mut coeffs = vec![0.0; 5 * n];
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = hs * k1[i] - ydiff;
                coeffs[i] = y[i];
                coeffs[n + i] = ydiff;
                coeffs[2 * n + i] = bspl;
                coeffs[3 * n + i] = ydiff - hs * k7[i] - bspl;
                coeffs[4 * n + i] = hs
                    * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let seg = Segment { t0: t, h: hs, coeffs };

            // Earliest triggered event within this step.
            let mut hit: Option<(usize, f64)> = None;
            for (idx, ev) in events.iter().enumerate() {
                let g_new = (ev.func)(t_new, &y1);
                let before = g_prev[idx];
                if before != 0.0 && ev.direction.triggers(before, g_new) {
                    let t_root = refine_root(&seg, n, &ev.func, t, t_new, before, g_new);
                    if hit.is_none_or(|(_, th)| (t_root - th) * dir < 0.0) {
                        hit = Some((idx, t_root));
                    }
                }
                if before == 0.0 || g_new != 0.0 {
                    g_prev[idx] = g_new;
                }
            }

            if let Some((index, t_root)) = hit {
                let mut state = vec![0.0; n];
                seg.eval_into(t_root, &mut state);
                if t_root != t {
                    traj.times.push(t_root);
                    traj.states.push(state.clone());
                    traj.segments.push(seg);
                }
                return Ok((
                    traj,
                    Some(EventHit {
                        index,
                        t: t_root,
                        state,
                    }),
                ));
            }

            traj.times.push(t_new);
            traj.states.push(y1.clone());
            traj.segments.push(seg);
            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);

            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let fac = if last_rejected { fac.min(1.0) } else { fac };
            h *= fac;
            last_rejected = false;
        } else {
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.1, 1.0)
            } else {
                0.1
            };
            h *= fac;
            last_rejected = true;
        }
        if h < 1e-15 * t.abs().max(1.0) {
            if !finite {
                return Err(Error::NonFinite { t });
            }
            return Err(Error::StepUnderflow { t });
        }
    }
    Ok((traj, None))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_field(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[0];
    }

    fn oscillator(_t: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = y[1];
        dy[1] = -y[0];
    }

    #[test]
    fn zero_field_is_constant() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(|_, _, dy: &mut [f64]| dy.fill(0.0), &[1.5, -2.0], (0.0, 3.0), &cfg).unwrap();
        for s in traj.states() {
            assert_eq!(s, &vec![1.5, -2.0]);
        }
        assert_eq!(traj.dense_eval(1.234).unwrap(), vec![1.5, -2.0]);
    }

    #[test]
    fn exponential_endpoint_and_midpoint() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(exp_field, &[1.0], (0.0, 1.0), &cfg).unwrap();
        assert!((traj.last_state()[0] - std::f64::consts::E).abs() < 1e-9);
        assert!((traj.dense_eval(0.5).unwrap()[0] - 0.5f64.exp()).abs() < 1e-9);
    }

    #[test]
    fn singular_speed_integrand() {
        let cfg = IntegratorConfig::default();
        let t_end = 1.0 - 1e-8;
        let traj = integrate(
            |t, _y: &[f64], dy: &mut [f64]| dy[0] = (1.0 - t).powf(-1.0 / 3.0),
            &[0.0],
            (0.0, t_end),
            &cfg,
        )
        .unwrap();
        let exact = 1.5 * (1.0 - (1.0 - t_end).powf(2.0 / 3.0));
        assert!((traj.last_state()[0] - exact).abs() < 1e-8);
        assert!((traj.last_state()[0] - 1.4999930).abs() < 1e-7);
    }

    #[test]
    fn dense_eval_reproduces_samples() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(oscillator, &[1.0, 0.0], (0.0, 5.0), &cfg).unwrap();
        for (t, s) in traj.times().iter().zip(traj.states()) {
            let d = traj.dense_eval(*t).unwrap();
            for (a, b) in d.iter().zip(s) {
                assert!((a - b).abs() <= cfg.abs_tol);
            }
        }
        assert!(traj.dense_eval(5.1).is_err());
        assert!(traj.dense_eval(-0.1).is_err());
    }

    #[test]
    fn oscillator_velocity_event_at_pi() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(oscillator, &[1.0, 0.0], (0.0, 4.0), &cfg).unwrap();
        let (t, _) = traj.locate_event(|_, y| y[1]).unwrap();
        assert!((t - std::f64::consts::PI).abs() < 1e-8, "t = {t}");
    }

    #[test]
    fn linear_crossing_and_missing_event() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(|_, _, dy: &mut [f64]| dy[0] = 1.0, &[0.0], (0.0, 2.0), &cfg).unwrap();
        let (t, y) = traj.locate_event(|_, y| y[0] - 1.0).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        assert!((y[0] - 1.0).abs() < 1e-12);
        assert!(traj.locate_event(|_, y| y[0] + 1.0).is_none());
    }

    #[test]
    fn terminal_event_truncates() {
        let cfg = IntegratorConfig::default();
        let g = |_t: f64, y: &[f64]| y[1];
        let events = [Event::new(&g, Direction::Rising)];
        let (traj, hit) = integrate_until(oscillator, &[1.0, 0.0], (0.0, 10.0), &cfg, &events).unwrap();
        let hit = hit.unwrap();
        assert!((hit.t - std::f64::consts::PI).abs() < 1e-9);
        assert_eq!(traj.t_end(), hit.t);
        assert_eq!(traj.last_state(), &hit.state[..]);
    }

    #[test]
    fn forward_then_backward_returns() {
        let cfg = IntegratorConfig::default();
        let fwd = integrate(oscillator, &[0.3, -0.7], (0.0, 3.0), &cfg).unwrap();
        let back = integrate(oscillator, fwd.last_state(), (3.0, 0.0), &cfg).unwrap();
        let y = back.last_state();
        assert!((y[0] - 0.3).abs() < 10.0 * 1e-10 && (y[1] + 0.7).abs() < 10.0 * 1e-10);
        assert!((back.dense_eval(1.5).unwrap()[0] - fwd.dense_eval(1.5).unwrap()[0]).abs() < 1e-9);
    }

    #[test]
    fn non_finite_field_is_reported() {
        let cfg = IntegratorConfig::default();
        let r = integrate(
            |t, _y: &[f64], dy: &mut [f64]| dy[0] = 1.0 / (1.0 - t),
            &[0.0],
            (0.0, 2.0),
            &cfg,
        );
        assert!(matches!(r, Err(Error::NonFinite { .. }) | Err(Error::StepUnderflow { .. })));
    }

    #[test]
    fn step_budget_is_enforced() {
        let cfg = IntegratorConfig {
            max_steps: 3,
            ..IntegratorConfig::default()
        };
        let r = integrate(oscillator, &[1.0, 0.0], (0.0, 100.0), &cfg);
        assert!(matches!(r, Err(Error::StepLimit { .. })));
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = IntegratorConfig {
            rel_tol: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(integrate(exp_field, &[1.0], (0.0, 1.0), &cfg).is_err());
    }

    #[test]
    fn truncation_keeps_prefix() {
        let cfg = IntegratorConfig::default();
        let traj = integrate(oscillator, &[1.0, 0.0], (0.0, 5.0), &cfg).unwrap();
        let cut = traj.truncated(2.0).unwrap();
        assert_eq!(cut.t_end(), 2.0);
        assert!((cut.last_state()[0] - 2.0f64.cos()).abs() < 1e-9);
        assert!((cut.dense_eval(1.0).unwrap()[0] - 1.0f64.cos()).abs() < 1e-9);
    }
}
