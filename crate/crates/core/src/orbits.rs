//! Shooting from the outer boundary and the orbit census.
//!
//! A shot starts at rest on the outer boundary point labelled `P`, falls
//! through the collar, crosses the unit sphere orthogonally and continues in
//! the radial inner potential about `εv`, where its angular momentum about
//! `εv` is conserved. Brake orbits and homoclinics are the shots with zero
//! entry angular momentum; the census finds the zeros of `θ ↦ L(θ)`.

use rayon::prelude::*;

use crate::bump::BumpMode;
use crate::error::{Error, Result};
use crate::geodesics::FlowChart;
use crate::linalg::{angular_momentum, distance, dot, fibonacci_sphere, norm, planar_angular_momentum, scale, sub};
use crate::maupertuis::{integrate_newton, NewtonOrbit};
use crate::ode::{find_bracketed_root, Direction, Event, EventHit};
use crate::potential::{Potential, PotentialField};

/// Entry angular momenta below this count as zero.
pub const L_TOL: f64 = 1e-8;
/// Roots closer than this (radians) are merged.
pub const ROOT_MERGE_TOL: f64 = 1e-6;
/// Bisection resolution of a root of `L(θ)`.
pub const ROOT_TOL: f64 = 1e-10;
/// Speed below which a point counts as a turning point at rest.
pub const REST_SPEED: f64 = 1e-6;
/// Tolerance of the crossing speed and of the crossing angle.
pub const CROSSING_TOL: f64 = 1e-6;
/// Largest distance from the inner boundary for a brake endpoint.
pub const INNER_HIT_TOL: f64 = 1e-5;
/// Radius of the sphere used by the transit check.
pub const TRANSIT_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShootingOptions {
    /// Radius of the ball about `εv` that a homoclinic candidate must enter.
    pub delta_h: f64,
    /// Time budget of each leg.
    pub time_bound: f64,
}

impl Default for ShootingOptions {
    fn default() -> Self {
        Self {
            delta_h: 1e-3,
            time_bound: 50.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    ReachesInner,
    ReturnsOuter,
    EntersBall,
    Inconclusive,
}

impl std::fmt::Display for Classification {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ReachesInner => "reaches-inner",
            Self::ReturnsOuter => "returns-outer",
            Self::EntersBall => "enters-ball",
            Self::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub t: f64,
    pub q: Vec<f64>,
    pub v: Vec<f64>,
}

impl PhasePoint {
    fn from_state(t: f64, state: &[f64]) -> Self {
        let n = state.len() / 2;
        Self {
            t,
            q: state[..n].to_vec(),
            v: state[n..].to_vec(),
        }
    }

    pub fn speed(&self) -> f64 {
        norm(&self.v)
    }
}

/// Entry into the `δ_h`-ball about the maximum point.
#[derive(Debug, Clone, PartialEq)]
pub struct BallEntry {
    pub point: PhasePoint,
    /// `|speed - sqrt(2 (E - V(q)))|` at entry.
    pub energy_speed_error: f64,
    /// Whether the distance to `εv` decreased monotonically down to `δ_h / 10`.
    pub decay_confirmed: bool,
}

/// One shot from the outer boundary.
#[derive(Debug, Clone)]
pub struct ShootingRecord {
    pub p: Vec<f64>,
    pub launch: Vec<f64>,
    pub launch_energy_residual: f64,
    pub crossing: PhasePoint,
    /// `|speed - λ(P_c)|` at the crossing point `P_c`.
    pub crossing_speed_error: f64,
    /// Angle between the crossing velocity and `-P_c`.
    pub crossing_angle: f64,
    /// Entry angular momentum about `εv`: signed for `N = 2`, bivector norm otherwise.
    pub l: f64,
    /// Component of the entry angular momentum on the plane of the axis and its companion.
    pub l_planar: f64,
    /// Largest change of the angular momentum inside the radial ball.
    pub l_drift: f64,
    /// First point after the crossing where `<q̇, q - εv>` stops being negative.
    pub turning: Option<PhasePoint>,
    pub ball: Option<BallEntry>,
    pub classification: Classification,
    /// `max |½|q̇|² + V(q) - E|` over both legs.
    pub max_energy_residual: f64,
    /// Launch to crossing.
    pub outer_leg: NewtonOrbit,
    /// Crossing to the end of the shot.
    pub inner_leg: NewtonOrbit,
}

impl ShootingRecord {
    /// Samples `(t, q, |q̇|)` of both legs in time order.
    pub fn polyline(&self) -> Vec<(f64, Vec<f64>, f64)> {
        let mut out = Vec::new();
        for (k, leg) in [&self.outer_leg, &self.inner_leg].into_iter().enumerate() {
            let traj = &leg.trajectory;
            for (i, (t, s)) in traj.times().iter().zip(traj.states()).enumerate() {
                if k == 1 && i == 0 {
                    continue;
                }
                let n = s.len() / 2;
                out.push((*t, s[..n].to_vec(), norm(&s[n..])));
            }
        }
        out
    }
}

/// Entry angular momentum of a record.
pub fn entry_angular_momentum(record: &ShootingRecord) -> f64 {
    record.l
}

fn energy_residual(field: &PotentialField, leg: &NewtonOrbit, energy: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for s in leg.trajectory.states() {
        let n = s.len() / 2;
        let v = field.value(&s[..n])?;
        worst = worst.max((0.5 * dot(&s[n..], &s[n..]) + v - energy).abs());
    }
    Ok(worst)
}

/// Radius of the ball about `εv` on which the inner potential is radial
/// about `εv` and the collar is not yet involved.
fn radial_ball_radius(field: &PotentialField) -> f64 {
    let eps = field.params().eps;
    let knee = field.bump().map(|b| b.knee()).unwrap_or(0.5);
    (2.0 * knee).sqrt().min(1.0 - eps)
}

/// Most restarts allowed at bump knots on one inner leg.
const MAX_RESTARTS: usize = 64;

/// Integrate on the inner branch, restarting at every crossing of a bump
/// knot `½|q - εv|² = s_k` so that no step straddles a jump of `β'''`.
/// The returned hit indexes `stops`.
fn integrate_inner(
    field: &PotentialField,
    q0: &[f64],
    v0: &[f64],
    t_span: (f64, f64),
    stops: &[Event<'_>],
) -> Result<(NewtonOrbit, Option<EventHit>)> {
    let n = q0.len();
    let center = field.center();
    let cfg = &field.params().integrator;
    let knots = field.bump().map(|b| b.knots()).unwrap_or_default();
    let knot_fns: Vec<Box<dyn Fn(f64, &[f64]) -> f64 + '_>> = knots
        .iter()
        .map(|&k| {
            Box::new(move |_t: f64, s: &[f64]| 0.5 * distance(&s[..n], center).powi(2) - k) as Box<dyn Fn(f64, &[f64]) -> f64>
        })
        .collect();
    let mut directions = vec![Direction::Either; knots.len()];
    let mut q = q0.to_vec();
    let mut v = v0.to_vec();
    let mut t = t_span.0;
    let mut whole: Option<NewtonOrbit> = None;
    for _ in 0..MAX_RESTARTS {
        let mut events: Vec<Event<'_>> = stops.iter().map(|e| Event::new(e.func, e.direction)).collect();
        events.extend(knot_fns.iter().zip(&directions).map(|(f, d)| Event::new(f.as_ref(), *d)));
        let (mut leg, hit) = integrate_newton(field.inner(), &q, &v, (t, t_span.1), cfg, &events)?;
        let restart = match hit {
            Some(ref h) if h.index >= stops.len() => {
                // The step that straddles a knot sees a jump in the third
                // derivative of the force, so its interpolant is not trusted:
                // redo the last partial step from the preceding knot.
                let times = leg.trajectory.times();
                let states = leg.trajectory.states();
                let i = times.len().saturating_sub(2);
                let (t_prev, y_prev) = (times[i], states[i].clone());
                let mut refined = leg.trajectory.truncated(t_prev)?;
                if h.t != t_prev {
                    let (tail, _) = integrate_newton(field.inner(), &y_prev[..n], &y_prev[n..], (t_prev, h.t), cfg, &[])?;
                    refined.append(&tail.trajectory)?;
                }
                leg = NewtonOrbit { trajectory: refined };
                let k = h.index - stops.len();
                let before = (knot_fns[k])(0.0, &y_prev);
                Some((k, before))
            }
            _ => None,
        };
        whole = Some(match whole {
            None => leg.clone(),
            Some(w) => concat(&w, &leg)?,
        });
        match restart {
            Some((k, before)) => {
                directions = vec![Direction::Either; knots.len()];
                directions[k] = if before > 0.0 { Direction::Rising } else { Direction::Falling };
                let end = leg.trajectory.last_state().to_vec();
                q = end[..n].to_vec();
                v = end[n..].to_vec();
                t = leg.trajectory.t_end();
            }
            None => return Ok((whole.expect("at least one leg"), hit)),
        }
    }
    Err(Error::Domain(format!("more than {MAX_RESTARTS} bump-knot crossings on one leg")))
}

/// Launch from rest at the outer boundary point labelled `p`, cross the unit
/// sphere and classify the inner motion.
pub fn shoot_from_outer(field: &PotentialField, p: &[f64], opts: &ShootingOptions) -> Result<ShootingRecord> {
    let params = field.params();
    let n = params.dim;
    let energy = params.energy;
    let cfg = &params.integrator;
    let center = field.center().to_vec();
    let chart = FlowChart::unit(field.generating().clone());
    let launch = chart.launch_point(p)?;
    let launch_energy_residual = (field.value(&launch)? - energy).abs();

    let sphere = |_t: f64, s: &[f64]| dot(&s[..n], &s[..n]) - 1.0;
    let down = [Event::new(&sphere, Direction::Falling)];
    let (outer_leg, hit) = integrate_newton(field.collar(), &launch, &vec![0.0; n], (0.0, opts.time_bound), cfg, &down)?;
    let hit = hit.ok_or_else(|| Error::Domain(format!("shot from {p:?} never reached the unit sphere")))?;
    let crossing = PhasePoint::from_state(hit.t, &hit.state);

    let pc = scale(&crossing.q, 1.0 / norm(&crossing.q));
    let speed = crossing.speed();
    let crossing_speed_error = (speed - params.launch_speed(&pc)).abs();
    let radial = -dot(&crossing.v, &pc);
    let tangential = norm(&crossing.v.iter().zip(&pc).map(|(v, c)| v + radial * c).collect::<Vec<_>>());
    let crossing_angle = tangential.atan2(radial);
    if crossing_speed_error > CROSSING_TOL || crossing_angle > CROSSING_TOL {
        return Err(Error::Orthogonality(format!(
            "crossing at {pc:?}: speed error {crossing_speed_error:e}, angle {crossing_angle:e}"
        )));
    }

    let rel = sub(&crossing.q, &center);
    let l = angular_momentum(&rel, &crossing.v);
    let companion = params.axis_companion();
    let l_planar = planar_angular_momentum(&rel, &crossing.v, &params.axis, &companion);

    let turning_fn = |_t: f64, s: &[f64]| {
        s[n..].iter().zip(&s[..n]).zip(&center).map(|((v, q), c)| v * (q - c)).sum::<f64>()
    };
    let exit_fn = |_t: f64, s: &[f64]| dot(&s[..n], &s[..n]) - 1.0;
    let ball_fn = |_t: f64, s: &[f64]| distance(&s[..n], &center) - opts.delta_h;
    let homoclinic = matches!(field.bump().map(|b| b.mode()), Some(BumpMode::Homoclinic));

    let mut events = vec![Event::new(&turning_fn, Direction::Rising), Event::new(&exit_fn, Direction::Rising)];
    if homoclinic {
        events.push(Event::new(&ball_fn, Direction::Falling));
    }
    let t0 = crossing.t;
    let (mut inner_leg, first) = integrate_inner(field, &crossing.q, &crossing.v, (t0, t0 + opts.time_bound), &events)?;

    let mut turning = None;
    let mut ball = None;
    let mut classification = Classification::Inconclusive;
    match first {
        Some(h) if h.index == 0 => {
            let tp = PhasePoint::from_state(h.t, &h.state);
            let on_inner = field
                .inner_component()
                .map(|c| (distance(&tp.q, &c.center) - c.radius).abs() < INNER_HIT_TOL)
                .unwrap_or(false);
            if !homoclinic && l.abs() < L_TOL && on_inner && tp.speed() < REST_SPEED {
                classification = Classification::ReachesInner;
            } else {
                // Follow the shot back out to the sphere.
                let back = [Event::new(&exit_fn, Direction::Rising)];
                let (tail, exit) = integrate_inner(field, &tp.q, &tp.v, (tp.t, tp.t + opts.time_bound), &back)?;
                if exit.is_some() {
                    classification = Classification::ReturnsOuter;
                }
                inner_leg = concat(&inner_leg, &tail)?;
            }
            turning = Some(tp);
        }
        Some(h) if h.index == 1 => classification = Classification::ReturnsOuter,
        Some(h) => {
            let entry = PhasePoint::from_state(h.t, &h.state);
            let allowed = (2.0 * (energy - field.value(&entry.q)?)).max(0.0).sqrt();
            let energy_speed_error = (entry.speed() - allowed).abs();
            let target = opts.delta_h / 10.0;
            let deep_fn = |_t: f64, s: &[f64]| distance(&s[..n], &center) - target;
            let window = [Event::new(&deep_fn, Direction::Falling), Event::new(&turning_fn, Direction::Rising)];
            let (tail, end) = integrate_inner(field, &entry.q, &entry.v, (entry.t, entry.t + opts.time_bound), &window)?;
            let monotone = tail
                .trajectory
                .states()
                .windows(2)
                .all(|w| distance(&w[1][..n], &center) < distance(&w[0][..n], &center));
            let decay_confirmed = monotone && matches!(end, Some(ref e) if e.index == 0);
            inner_leg = concat(&inner_leg, &tail)?;
            if l.abs() < L_TOL && decay_confirmed && energy_speed_error < CROSSING_TOL {
                classification = Classification::EntersBall;
            }
            ball = Some(BallEntry {
                point: entry,
                energy_speed_error,
                decay_confirmed,
            });
        }
        None => {}
    }

    let radius = radial_ball_radius(field);
    let mut l_drift: f64 = 0.0;
    for s in inner_leg.trajectory.states() {
        let rel = sub(&s[..n], &center);
        if norm(&rel) <= radius && norm(&s[..n]) <= 1.0 {
            l_drift = l_drift.max((angular_momentum(&rel, &s[n..]) - l).abs());
        }
    }
    let max_energy_residual = energy_residual(field, &outer_leg, energy)?.max(energy_residual(field, &inner_leg, energy)?);

    Ok(ShootingRecord {
        p: p.to_vec(),
        launch,
        launch_energy_residual,
        crossing,
        crossing_speed_error,
        crossing_angle,
        l,
        l_planar,
        l_drift,
        turning,
        ball,
        classification,
        max_energy_residual,
        outer_leg,
        inner_leg,
    })
}

/// Join two legs where the second starts at the end of the first.
fn concat(a: &NewtonOrbit, b: &NewtonOrbit) -> Result<NewtonOrbit> {
    let mut traj = a.trajectory.clone();
    traj.append(&b.trajectory)?;
    Ok(NewtonOrbit { trajectory: traj })
}

/// Outcome of the inner-transit checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitReport {
    /// Time at which `|q - εv| = ½`, if reached.
    pub t_half: Option<f64>,
    /// `<q̇, q>` at that time.
    pub radial_velocity: f64,
    /// `<q̇, q - εv>` at that time.
    pub center_velocity: f64,
    /// Whether every knot between crossing and `t_half` lies in
    /// `{|x - εv| > ½, |x| < 1}`.
    pub contained: bool,
    /// Whether the inner boundary lies strictly inside `{|x - εv| < ½}`.
    pub inner_inside: bool,
}

impl TransitReport {
    pub fn passed(&self) -> bool {
        self.t_half.is_some() && self.radial_velocity < 0.0 && self.center_velocity < 0.0 && self.contained && self.inner_inside
    }
}

/// Transit from the unit sphere to the sphere `|x - εv| = ½`.
pub fn verify_transit(record: &ShootingRecord, field: &PotentialField) -> TransitReport {
    let center = field.center();
    let n = center.len();
    let traj = &record.inner_leg.trajectory;
    let hit = traj.locate_event(|_t, s: &[f64]| distance(&s[..n], center) - TRANSIT_RADIUS);
    let inner_inside = field
        .inner_component()
        .map(|c| c.radius < TRANSIT_RADIUS)
        .unwrap_or(true);
    match hit {
        None => TransitReport {
            t_half: None,
            radial_velocity: f64::NAN,
            center_velocity: f64::NAN,
            contained: false,
            inner_inside,
        },
        Some((t, s)) => {
            let contained = traj
                .times()
                .iter()
                .zip(traj.states())
                .filter(|(ti, _)| **ti > traj.t_start() && **ti < t)
                .all(|(_, s)| distance(&s[..n], center) > TRANSIT_RADIUS && norm(&s[..n]) < 1.0);
            TransitReport {
                t_half: Some(t),
                radial_velocity: dot(&s[n..], &s[..n]),
                center_velocity: dot(&s[n..], &sub(&s[..n], center)),
                contained,
                inner_inside,
            }
        }
    }
}

/// Distance between the launch point and the end of the reversed shot:
/// released at rest from the inner endpoint for the same duration, a brake
/// orbit retraces itself.
pub fn reversibility_error(record: &ShootingRecord, field: &PotentialField) -> Result<f64> {
    let tp = record
        .turning
        .as_ref()
        .ok_or_else(|| Error::Domain("record has no turning point".into()))?;
    let (orbit, _) = integrate_newton(
        field,
        &tp.q,
        &vec![0.0; tp.q.len()],
        (0.0, tp.t),
        &field.params().integrator,
        &[],
    )?;
    Ok(distance(&orbit.last_phase().0, &record.launch))
}

/// A confirmed or rejected root of `L(θ)`.
#[derive(Debug, Clone)]
pub struct RootReport {
    pub theta: f64,
    pub record: ShootingRecord,
    pub confirmed: bool,
}

/// Result of a planar scan.
#[derive(Debug, Clone)]
pub struct Census {
    pub mode: BumpMode,
    pub grid: usize,
    /// `(θ, L(θ))` on the scan grid.
    pub scan: Vec<(f64, f64)>,
    pub roots: Vec<RootReport>,
    /// `max |L(θ) + L(-θ)|` over the grid.
    pub symmetry_residual: f64,
    /// Largest energy residual over every shot of the census.
    pub max_energy_residual: f64,
    /// Largest angular-momentum drift inside the radial ball.
    pub max_l_drift: f64,
}

impl Census {
    pub fn count(&self) -> usize {
        self.roots.iter().filter(|r| r.confirmed).count()
    }

    pub fn inconclusive(&self) -> impl Iterator<Item = &RootReport> {
        self.roots.iter().filter(|r| !r.confirmed)
    }

    pub fn root_angles(&self) -> Vec<f64> {
        self.roots.iter().filter(|r| r.confirmed).map(|r| r.theta).collect()
    }
}

fn planar_label(field: &PotentialField, theta: f64) -> Vec<f64> {
    let params = field.params();
    params.planar_direction(theta, &params.axis_companion())
}

fn wrap(theta: f64) -> f64 {
    theta.rem_euclid(2.0 * std::f64::consts::PI)
}

/// Circular distance between two angles.
pub fn angle_distance(a: f64, b: f64) -> f64 {
    let d = wrap(a - b);
    d.min(2.0 * std::f64::consts::PI - d)
}

/// Scan of `L(θ)` on the plane of the axis and its companion.
struct PlanarScan {
    records: Vec<(f64, ShootingRecord)>,
    scan: Vec<(f64, f64)>,
    symmetry: f64,
    energy: f64,
    drift: f64,
}

/// Roots of `L` on the plane of the axis and its companion, from an `m`-point
/// scan: grid nodes with `|L| < L_TOL` plus bisected sign changes, merged
/// within [`ROOT_MERGE_TOL`].
fn planar_roots(field: &PotentialField, m: usize, opts: &ShootingOptions) -> Result<PlanarScan> {
    if m < 4 {
        return Err(Error::InvalidParams(format!("scan grid needs at least 4 points, got {m}")));
    }
    let step = 2.0 * std::f64::consts::PI / m as f64;
    let shots: Vec<ShootingRecord> = (0..m)
        .into_par_iter()
        .map(|k| shoot_from_outer(field, &planar_label(field, k as f64 * step), opts))
        .collect::<Result<_>>()?;
    let scan: Vec<(f64, f64)> = shots.iter().enumerate().map(|(k, r)| (k as f64 * step, r.l_planar)).collect();
    let mut energy = shots.iter().map(|r| r.max_energy_residual).fold(0.0, f64::max);
    let mut drift = shots.iter().map(|r| r.l_drift).fold(0.0, f64::max);
    let symmetry = (0..m).map(|k| (scan[k].1 + scan[(m - k) % m].1).abs()).fold(0.0, f64::max);

    let mut candidates: Vec<f64> = scan.iter().filter(|(_, l)| l.abs() < L_TOL).map(|(t, _)| *t).collect();
    let brackets: Vec<usize> = (0..m)
        .filter(|&k| {
            let (a, b) = (scan[k].1, scan[(k + 1) % m].1);
            a.abs() >= L_TOL && b.abs() >= L_TOL && a.signum() != b.signum()
        })
        .collect();
    let refined: Vec<f64> = brackets
        .par_iter()
        .map(|&k| -> Result<f64> {
            let (ta, la) = scan[k];
            let lb = scan[(k + 1) % m].1;
            let mut err = None;
            let mut g = |t: f64| match shoot_from_outer(field, &planar_label(field, t), opts) {
                Ok(r) => r.l_planar,
                Err(e) => {
                    err.get_or_insert(e);
                    f64::NAN
                }
            };
            let root = find_bracketed_root(&mut g, ta, ta + step, la, lb, ROOT_TOL);
            match err {
                Some(e) => Err(e),
                None => Ok(wrap(root)),
            }
        })
        .collect::<Result<_>>()?;
    candidates.extend(refined);
    candidates.sort_by(f64::total_cmp);
    let mut merged: Vec<f64> = Vec::new();
    for t in candidates {
        if merged.last().is_none_or(|&last| angle_distance(last, t) >= ROOT_MERGE_TOL) {
            merged.push(t);
        }
    }
    if merged.len() > 1 && angle_distance(merged[0], *merged.last().unwrap()) < ROOT_MERGE_TOL {
        merged.pop();
    }
    let records: Vec<(f64, ShootingRecord)> = merged
        .par_iter()
        .map(|&t| shoot_from_outer(field, &planar_label(field, t), opts).map(|r| (t, r)))
        .collect::<Result<_>>()?;
    for (_, r) in &records {
        energy = energy.max(r.max_energy_residual);
        drift = drift.max(r.l_drift);
    }
    Ok(PlanarScan {
        records,
        scan,
        symmetry,
        energy,
        drift,
    })
}

fn census(field: &PotentialField, m: usize, opts: &ShootingOptions, target: Classification) -> Result<Census> {
    let mode = field.bump().map(|b| b.mode()).ok_or_else(|| Error::Mode("census needs a bumped field".into()))?;
    let PlanarScan {
        records,
        scan,
        symmetry,
        energy,
        drift,
    } = planar_roots(field, m, opts)?;
    let roots = records
        .into_iter()
        .map(|(theta, record)| {
            let confirmed = record.classification == target;
            RootReport { theta, record, confirmed }
        })
        .collect();
    Ok(Census {
        mode,
        grid: m,
        scan,
        roots,
        symmetry_residual: symmetry,
        max_energy_residual: energy,
        max_l_drift: drift,
    })
}

/// Brake orbits: zeros of `L(θ)` whose shots come to rest on the inner boundary.
pub fn find_brake_orbits(field: &PotentialField, m: usize) -> Result<Census> {
    if field.bump().map(|b| b.mode()) != Some(BumpMode::Brake) {
        return Err(Error::Mode("brake census needs a brake-mode field".into()));
    }
    census(field, m, &ShootingOptions::default(), Classification::ReachesInner)
}

/// Homoclinics: zeros of `L(θ)` whose shots enter the `δ_h`-ball about `εv`
/// and keep approaching it.
pub fn find_homoclinics(field: &PotentialField, m: usize, opts: &ShootingOptions) -> Result<Census> {
    if field.bump().map(|b| b.mode()) != Some(BumpMode::Homoclinic) {
        return Err(Error::Mode("homoclinic census needs a homoclinic-mode field".into()));
    }
    census(field, m, opts, Classification::EntersBall)
}

/// Off-plane confirmation sweep in three dimensions.
#[derive(Debug, Clone)]
pub struct SphereSweep {
    pub points: usize,
    /// Smallest `|L|` over the sweep and the label where it occurs.
    pub min_l: f64,
    pub argmin: Vec<f64>,
    /// Number of labels with `|L| < 10 L_TOL`.
    pub candidates: usize,
    pub max_energy_residual: f64,
}

impl SphereSweep {
    pub fn passed(&self) -> bool {
        self.candidates == 0
    }
}

/// Shoot from every point of a Fibonacci lattice and record the smallest
/// entry angular momentum. Every lattice point is off the axis.
pub fn sphere_sweep(field: &PotentialField, count: usize) -> Result<SphereSweep> {
    if field.params().dim != 3 {
        return Err(Error::InvalidParams("the sphere sweep is three-dimensional".into()));
    }
    let axis = field.params().axis.clone();
    let labels: Vec<Vec<f64>> = fibonacci_sphere(count)
        .into_iter()
        .map(|p| {
            // Rotate the lattice pole onto the axis by swapping e3 and the axis frame.
            let companion = field.params().axis_companion();
            let third = cross(&axis, &companion);
            (0..3).map(|i| p[2] * axis[i] + p[0] * companion[i] + p[1] * third[i]).collect()
        })
        .collect();
    let opts = ShootingOptions::default();
    let shots: Vec<(f64, f64)> = labels
        .par_iter()
        .map(|p| shoot_from_outer(field, p, &opts).map(|r| (r.l.abs(), r.max_energy_residual)))
        .collect::<Result<_>>()?;
    let (k_min, min_l) = shots
        .iter()
        .enumerate()
        .map(|(k, (l, _))| (k, *l))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((0, f64::INFINITY));
    Ok(SphereSweep {
        points: count,
        min_l,
        argmin: labels.get(k_min).cloned().unwrap_or_default(),
        candidates: shots.iter().filter(|(l, _)| *l < 10.0 * L_TOL).count(),
        max_energy_residual: shots.iter().map(|(_, e)| *e).fold(0.0, f64::max),
    })
}

fn cross(a: &[f64], b: &[f64]) -> Vec<f64> {
    vec![a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
