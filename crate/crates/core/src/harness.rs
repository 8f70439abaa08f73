//! Experiment driver behind the `verify`, `census` and `export` commands.
//!
//! Every command is a pure function of its [`Scenario`]: sample sets are
//! seeded, parallel sweeps collect in input order, and numbers are written
//! with 17 significant digits. The only varying byte is the optional
//! timestamp line at the top of the report files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::bump::BumpMode;
use crate::error::{Error, Result};
use crate::generating::GeneratingFn;
use crate::geodesics::{planar_grid, s_grid, FlowChart, S_MAX};
use crate::linalg::{distance, dot, max_abs_diff, norm, scale, sphere_samples};
use crate::maupertuis::{integrate_newton, verify_dynamics, OrbitChart};
use crate::ode::{Direction, Event, EVENT_TIME_TOL};
use crate::orbits::{
    angle_distance, find_brake_orbits, find_homoclinics, reversibility_error, shoot_from_outer, sphere_sweep,
    verify_transit, Census, L_TOL,
};
use crate::potential::{Potential, PotentialField, QuadraticPotential, Region};
use crate::scenario::Scenario;

/// Output switches shared by the commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Exit nonzero when a census contains inconclusive shots.
    pub strict: bool,
    /// Write a `# generated ...` line at the top of report files.
    pub timestamp: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            strict: false,
            timestamp: true,
        }
    }
}

/// Decimal with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// One line of the verification report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    /// Library module whose invariant is checked.
    pub module: &'static str,
    pub invariant: String,
    pub value: f64,
    pub relation: &'static str,
    pub budget: f64,
    pub passed: bool,
}

impl CheckRow {
    fn at_most(module: &'static str, invariant: impl Into<String>, value: f64, budget: f64) -> Self {
        Self {
            module,
            invariant: invariant.into(),
            value,
            relation: "<=",
            budget,
            passed: value <= budget,
        }
    }

    /// Strict lower bound.
    fn above(module: &'static str, invariant: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            module,
            invariant: invariant.into(),
            value,
            relation: ">",
            budget: bound,
            passed: value > bound,
        }
    }

    fn at_least(module: &'static str, invariant: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            module,
            invariant: invariant.into(),
            value,
            relation: ">=",
            budget: bound,
            passed: value >= bound,
        }
    }

    fn equals(module: &'static str, invariant: impl Into<String>, value: usize, expected: usize) -> Self {
        Self {
            module,
            invariant: invariant.into(),
            value: value as f64,
            relation: "==",
            budget: expected as f64,
            passed: value == expected,
        }
    }

    /// A check whose verdict is decided elsewhere; `value` and `budget` are
    /// the headline numbers.
    fn verdict(module: &'static str, invariant: impl Into<String>, value: f64, budget: f64, passed: bool) -> Self {
        Self {
            module,
            invariant: invariant.into(),
            value,
            relation: "~",
            budget,
            passed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub rows: Vec<CheckRow>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckRow> {
        self.rows.iter().filter(|r| !r.passed)
    }

    pub fn to_csv(&self, stamp: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(s) = stamp {
            let _ = writeln!(out, "# generated {s}");
        }
        out.push_str("module,invariant,value,relation,budget,status\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.module,
                csv_field(&r.invariant),
                fmt17(r.value),
                r.relation,
                fmt17(r.budget),
                if r.passed { "pass" } else { "FAIL" }
            );
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn stamp(opts: &RunOptions) -> Option<String> {
    opts.timestamp.then(|| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true))
}

fn write_file(path: &Path, text: &str) -> Result<PathBuf> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(path.to_path_buf())
}

/// Uniform random unit vectors by rejection from the cube.
fn random_directions(rng: &mut ChaCha8Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 && n <= 1.0 {
            out.push(scale(&v, 1.0 / n));
        }
    }
    out
}

/// Boundary labels used by the per-profile checks: planar in two dimensions,
/// spread over the sphere otherwise.
fn profile_labels(sc: &Scenario, count: usize) -> Result<Vec<Vec<f64>>> {
    let params = sc.model_params()?;
    Ok(if params.dim == 2 {
        planar_grid(&params, count)
    } else {
        sphere_samples(params.dim, count)
    })
}

/// Run every module's invariant battery.
pub fn run_verify(sc: &Scenario) -> Result<VerifyReport> {
    let field = sc.field()?;
    let mut rows = Vec::new();
    rows.extend(ode_checks(&field)?);
    rows.extend(generating_checks(sc, field.generating())?);
    rows.extend(geodesic_checks(sc, field.generating())?);
    rows.extend(maupertuis_checks(sc, &field)?);
    rows.extend(potential_checks(sc, &field)?);
    rows.extend(orbit_checks(sc, &field)?);
    Ok(VerifyReport { rows })
}

fn ode_checks(field: &PotentialField) -> Result<Vec<CheckRow>> {
    const M: &str = "ode";
    let params = field.params();
    let n = params.dim;
    let cfg = params.integrator;
    let chart = FlowChart::unit(field.generating().clone());
    let label = params.planar_direction(std::f64::consts::FRAC_PI_3, &params.axis_companion());
    let launch = chart.launch_point(&label)?;
    let rest = vec![0.0; n];
    let collar = field.collar();
    let sphere = |_t: f64, s: &[f64]| dot(&s[..n], &s[..n]) - 1.0;
    let down = [Event::new(&sphere, Direction::Falling)];

    let (_, hit) = integrate_newton(collar, &launch, &rest, (0.0, 50.0), &cfg, &down)?;
    let hit = hit.ok_or_else(|| Error::Domain("reference shot never reached the unit sphere".into()))?;
    let (_, hit_short) = integrate_newton(collar, &launch, &rest, (0.0, 1.01 * hit.t), &cfg, &down)?;
    let restriction = hit_short.map_or(f64::INFINITY, |h| (h.t - hit.t).abs());

    let t_end = 0.9 * hit.t;
    let (coarse, _) = integrate_newton(collar, &launch, &rest, (0.0, t_end), &cfg, &[])?;
    let (fine, _) = integrate_newton(collar, &launch, &rest, (0.0, t_end), &cfg.scaled(0.5), &[])?;
    let end = coarse.trajectory.last_state().to_vec();
    let halving = max_abs_diff(&end, fine.trajectory.last_state());
    let scale_y = end.iter().fold(1.0f64, |m, y| m.max(y.abs()));

    let (back, _) = integrate_newton(collar, &end[..n], &end[n..], (t_end, 0.0), &cfg, &[])?;
    let mut start = launch.clone();
    start.extend(&rest);
    let reversal = max_abs_diff(back.trajectory.last_state(), &start);

    // The controller enforces the mixed tolerance per component; an event
    // time inherits the dense-output error divided by the crossing rate.
    let tol = cfg.abs_tol + cfg.rel_tol * scale_y;
    let crossing_rate = 2.0 * dot(&hit.state[..n], &hit.state[n..]).abs();
    Ok(vec![
        CheckRow::at_most(M, "halving tolerances moves the endpoint by less than the coarse tolerance", halving, tol),
        CheckRow::at_most(M, "forward then backward integration returns to the start (10 tol)", reversal, 10.0 * tol),
        CheckRow::at_most(
            M,
            "first event time is unchanged by shortening the span",
            restriction,
            (tol / crossing_rate).max(EVENT_TIME_TOL),
        ),
    ])
}

fn generating_checks(sc: &Scenario, gen: &GeneratingFn) -> Result<Vec<CheckRow>> {
    const M: &str = "generating";
    let params = gen.params();
    let n = params.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);

    let dirs = random_directions(&mut rng, n, sc.sweep.samples);
    let mut on_sphere: f64 = 0.0;
    let mut fd_error: f64 = 0.0;
    let h = 1e-6;
    for d in &dirs {
        on_sphere = on_sphere.max(gen.value(d)?.abs());
        let x = scale(d, rng.gen_range(1.0..=3.0));
        let g = gen.gradient(&x)?;
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (gen.value(&xp)? - gen.value(&xm)?) / (2.0 * h);
            fd_error = fd_error.max((fd - g[i]).abs());
        }
    }

    let us: Vec<f64> = (0..1000).map(|k| -1.0 + 2.0 * k as f64 / 999.0).collect();
    let mut positivity = f64::INFINITY;
    for &u in &us {
        let c = gen.coefficients_at(u)?;
        positivity = positivity.min((c.f1 - 1.0).min(c.f2).min(c.f3));
    }

    let baseline = GeneratingFn::new(crate::params::ModelParams { eps: 0.0, ..params.clone() })?;
    let mut deltas = Vec::new();
    for eps in [0.1, 0.05, 0.025, 0.0125] {
        let g = GeneratingFn::new(crate::params::ModelParams { eps, ..params.clone() })?;
        let mut worst: f64 = 0.0;
        for &u in &us {
            let (a, b) = (g.coefficients_at(u)?, baseline.coefficients_at(u)?);
            worst = worst.max((a.f1 - b.f1).abs()).max((a.f2 - b.f2).abs()).max((a.f3 - b.f3).abs());
        }
        deltas.push(worst);
    }
    let ratio = deltas.windows(2).map(|w| w[1] / w[0]).fold(0.0, f64::max);
    let rate = deltas.iter().zip([0.1, 0.05, 0.025, 0.0125]).map(|(d, e)| d / e).fold(0.0, f64::max);

    let bounds = gen.validate_bounds(sc.sweep.samples, sc.seed)?;
    Ok(vec![
        CheckRow::at_most(M, "F vanishes on the unit sphere up to rounding", on_sphere, 1e-15),
        CheckRow::at_most(M, "analytic gradient matches central differences at h = 1e-6", fd_error, 1e-7),
        CheckRow::above(M, "min(f1 - 1; f2; f3) over 1000 values of u", positivity, 0.0),
        CheckRow::at_most(M, "coefficient distance to eps = 0 shrinks as eps halves (worst ratio)", ratio, 1.0),
        CheckRow::verdict(M, "coefficient distance to eps = 0 is O(eps) (largest ratio to eps)", rate, f64::INFINITY, rate.is_finite()),
        CheckRow::at_least(M, "<grad F; x> and |grad F| stay >= 1 on the annulus (margin)", bounds.margin(), 0.0),
    ])
}

fn geodesic_checks(sc: &Scenario, gen: &GeneratingFn) -> Result<Vec<CheckRow>> {
    const M: &str = "geodesics";
    let chart = FlowChart::unit(gen.clone());
    let g = sc.sweep.gauss_grid;
    let gauss = chart.verify_gauss(&profile_labels(sc, g)?, &s_grid(g))?;

    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x9e37_79b9);
    let dirs = random_directions(&mut rng, gen.params().dim, sc.sweep.round_trip);
    let ss: Vec<f64> = (0..dirs.len()).map(|_| rng.gen_range(0.0..S_MAX)).collect();
    let trips: Vec<(Vec<f64>, f64, f64)> = dirs
        .par_iter()
        .zip(&ss)
        .map(|(p, &s)| {
            let x = chart.point(p, s)?;
            let (q, t) = chart.backward_flow(&x)?;
            Ok((x, max_abs_diff(p, &q).max((s - t).abs()), s))
        })
        .collect::<Result<_>>()?;
    let round_trip = trips.iter().map(|t| t.1).fold(0.0, f64::max);
    let mut injectivity: f64 = 0.0;
    for i in 0..trips.len() {
        for j in i + 1..trips.len() {
            if distance(&trips[i].0, &trips[j].0) < 1e-6 {
                let coords = max_abs_diff(&dirs[i], &dirs[j]).max((trips[i].2 - trips[j].2).abs());
                injectivity = injectivity.max(coords);
            }
        }
    }

    Ok(vec![
        CheckRow::at_most(M, "velocity orthogonal to transported tangents (Gauss grid)", gauss.orthogonality, 1e-8),
        CheckRow::at_most(M, "unit Jacobi speed in the singular parameter (Gauss grid)", gauss.unit_speed, 1e-8),
        CheckRow::at_most(M, "F(y(P; s)) = s along the flow", gauss.level, 1e-9),
        CheckRow::above(M, "<dy/ds; y> > 0 below the outer level", gauss.min_monotonicity, 0.0),
        CheckRow::at_most(M, "flow confined to |y| <= 5/2", gauss.max_radius, 2.5),
        CheckRow::above(M, "Jacobian columns stay independent (min Gram eigenvalue)", gauss.min_gram_eigenvalue, 0.0),
        CheckRow::at_most(M, "backward flow inverts the flow (random (P; s))", round_trip, 1e-7),
        CheckRow::at_most(M, "flow points closer than 1e-6 have chart coordinates within 1e-4", injectivity, 1e-4),
    ])
}

fn maupertuis_checks(sc: &Scenario, field: &PotentialField) -> Result<Vec<CheckRow>> {
    const M: &str = "maupertuis";
    let chart = OrbitChart::new(field.generating().clone());
    let energy = field.params().energy;
    let labels = profile_labels(sc, sc.sweep.profiles)?;
    let per: Vec<[f64; 9]> = labels
        .par_iter()
        .map(|p| {
            let a = chart.arrival_report(p)?;
            let deviation = chart.direct_vs_converted(p, field)?;
            let dynamics = verify_dynamics(&chart.geodesic_to_orbit(p)?, field, energy)?;
            Ok([
                a.accumulator_residual,
                a.sigma_residual,
                a.time_change_residual,
                a.sigma_consistency,
                a.level_residual,
                f64::from(u8::from(!(a.sigma_monotone_below_one && a.radius_increasing))),
                deviation,
                dynamics.energy_residual,
                dynamics.newton_residual,
            ])
        })
        .collect::<Result<_>>()?;
    let worst = |k: usize| per.iter().map(|r| r[k]).fold(0.0, f64::max);
    let broken = per.iter().filter(|r| r[5] > 0.0).count();
    Ok(vec![
        CheckRow::at_most(M, "accumulator reaches 3 at the arrival time", worst(0), 1e-8),
        CheckRow::at_most(M, "sigma reaches 1 at the arrival time", worst(1), 1e-8),
        CheckRow::at_most(M, "d sigma/dt = E - W(y) away from arrival", worst(2), 1e-8),
        CheckRow::at_most(M, "sigma agrees with its closed form in the accumulator", worst(3), 1e-9),
        CheckRow::at_most(M, "F(y) = s(a) along the converted orbit", worst(4), 1e-9),
        CheckRow::equals(M, "profiles where sigma or |q| fail to increase strictly before arrival", broken, 0),
        CheckRow::at_most(M, "direct Newton orbit matches the converted geodesic", worst(6), 1e-6),
        CheckRow::at_most(M, "energy law along converted orbits", worst(7), 1e-8),
        CheckRow::at_most(M, "converted orbits solve Newton's equation (difference estimate)", worst(8), 1e-5),
    ])
}

fn potential_checks(sc: &Scenario, field: &PotentialField) -> Result<Vec<CheckRow>> {
    const M: &str = "potential";
    let params = field.params();
    let n = params.dim;
    let energy = params.energy;
    let center = field.center().to_vec();
    let chart = FlowChart::unit(field.generating().clone());
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed ^ 0x5bd1_e995);

    let dirs = random_directions(&mut rng, n, sc.sweep.samples);
    let ss: Vec<f64> = (0..dirs.len()).map(|_| rng.gen_range(0.0..S_MAX)).collect();
    let routes = dirs
        .par_iter()
        .zip(&ss)
        .map(|(p, &s)| {
            let x = chart.point(p, s)?;
            if norm(&x) <= 1.0 {
                return Ok(0.0);
            }
            Ok(field.eval_w_cartesian(&x)?.discrepancy())
        })
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);

    // The band where the profile is the identity, inside the unit ball.
    let delta = sc.bump.delta_star;
    let plain = QuadraticPotential { center: center.clone() };
    let mut identity: f64 = 0.0;
    let mut tried = 0;
    let mut fd_error: f64 = 0.0;
    let mut fd_points = 0;
    while tried < sc.sweep.samples || fd_points < sc.sweep.samples {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let r = norm(&x);
        let s = plain.value(&x)?;
        if r <= 1.0 && (s - 0.5).abs() <= delta && tried < sc.sweep.samples {
            identity = identity.max((field.inner_value_and_gradient(&x).0 - s).abs());
            tried += 1;
        }
        // Keep finite-difference stencils on one side of the seam.
        if (r - 1.0).abs() > 1e-3 && r < 2.0 && fd_points < sc.sweep.samples {
            let g = field.gradient(&x)?;
            let h = 1e-6;
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (field.value(&xp)? - field.value(&xm)?) / (2.0 * h);
                fd_error = fd_error.max((fd - g[i]).abs());
            }
            fd_points += 1;
        }
    }

    let steps = [1e-3, 1e-4, 1e-5];
    let c2 = field.c2_matching_report(&sphere_samples(n, sc.sweep.c2_points), &steps)?;
    let names = ["value", "radial slope", "radial curvature"];
    let mut rows = vec![
        CheckRow::at_most(M, "collar potential: closed form and chart route agree", routes, 1e-9),
        CheckRow::at_most(M, "inner potential is the plain quadratic on the identity band", identity, 0.0),
        CheckRow::at_most(M, "gradient matches central differences at h = 1e-6", fd_error, 1e-6),
    ];
    for k in 0..3 {
        let h = steps[steps.len() - 1];
        rows.push(CheckRow::verdict(
            M,
            format!("{} jump across the sphere vanishes at order {} (finest jump)", names[k], 3 - k),
            c2.jumps[k][steps.len() - 1],
            100.0 * h.powi(3 - k as i32),
            c2.passed[k],
        ));
    }

    rows.extend(convergence_rows(sc)?);

    let labels = sphere_samples(n, sc.sweep.samples);
    match sc.mode {
        BumpMode::Brake => {
            let ls = field.level_set_components(sc.sweep.samples)?;
            rows.push(CheckRow::at_least(M, "|grad V| on the inner component of {V = E}", ls.min_grad_inner, 0.1));
            rows.push(CheckRow::at_least(M, "|grad V| on the outer component of {V = E}", ls.min_grad_outer, 0.1));
            rows.push(CheckRow::at_most(M, "sampled boundary points lie on {V = E}", ls.max_level_residual, 1e-9));
            rows.push(CheckRow::above(M, "the two boundary components are separated", ls.separation, 0.0));
        }
        BumpMode::Homoclinic | BumpMode::HomoclinicInterior => {
            let outer = field.outer_component(&labels)?;
            let mut min_grad = f64::INFINITY;
            let mut level: f64 = 0.0;
            for x in &outer.points {
                let (v, g) = field.value_and_gradient(x)?;
                min_grad = min_grad.min(norm(&g));
                level = level.max((v - energy).abs());
            }
            rows.push(CheckRow::at_least(M, "|grad V| on the outer component of {V = E}", min_grad, 0.1));
            rows.push(CheckRow::at_most(M, "sampled outer boundary points lie on {V = E}", level, 1e-9));
            if sc.mode == BumpMode::Homoclinic {
                let (v, g) = field.value_and_gradient(&center)?;
                let h = 1e-3;
                let mut curvature = f64::NEG_INFINITY;
                for i in 0..n {
                    let mut xp = center.clone();
                    let mut xm = center.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    curvature = curvature.max((field.value(&xp)? - 2.0 * v + field.value(&xm)?) / (h * h));
                }
                rows.push(CheckRow::at_most(M, "V = E at the maximum point", (v - energy).abs(), 1e-12));
                rows.push(CheckRow::at_most(M, "grad V vanishes at the maximum point", norm(&g), 1e-12));
                rows.push(CheckRow::at_most(M, "maximum is non-degenerate (largest second difference)", curvature, -1.0));
            }
        }
    }
    Ok(rows)
}

/// Distance of the glued potential to its `ε = 0` counterpart on a fixed
/// planar grid, in value, gradient and radial second difference.
fn convergence_rows(sc: &Scenario) -> Result<Vec<CheckRow>> {
    const M: &str = "potential";
    let base = sc.with_eps(0.0).field()?;
    let params = base.params().clone();
    let w = params.axis_companion();
    let mut points = Vec::new();
    for i in 0..24 {
        for j in 1..=12 {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / 24.0;
            let r = 0.15 * j as f64;
            points.push(scale(&params.planar_direction(theta, &w), r));
        }
    }
    let h = 1e-3;
    let probe = |f: &PotentialField, x: &[f64]| -> Result<(f64, Vec<f64>, f64)> {
        let (v, g) = f.value_and_gradient(x)?;
        let r = norm(x);
        let vp = f.value(&scale(x, (r + h) / r))?;
        let vm = f.value(&scale(x, (r - h) / r))?;
        Ok((v, g, (vp - 2.0 * v + vm) / (h * h)))
    };
    let reference: Vec<_> = points.iter().map(|x| probe(&base, x)).collect::<Result<_>>()?;
    let mut deltas = Vec::new();
    for eps in [0.1, 0.05, 0.025] {
        let f = sc.with_eps(eps).field()?;
        let mut worst = [0.0f64; 3];
        for (x, (v0, g0, c0)) in points.iter().zip(&reference) {
            let (v, g, c) = probe(&f, x)?;
            worst[0] = worst[0].max((v - v0).abs());
            worst[1] = worst[1].max(max_abs_diff(&g, g0));
            worst[2] = worst[2].max((c - c0).abs());
        }
        deltas.push(worst);
    }
    let names = ["value", "gradient", "second difference"];
    Ok((0..3)
        .map(|k| {
            let ratio = deltas.windows(2).map(|d| d[1][k] / d[0][k]).fold(0.0, f64::max);
            CheckRow::above(
                M,
                format!("{} distance to the radial potential shrinks as eps halves (worst ratio below 1)", names[k]),
                1.0 - ratio,
                0.0,
            )
        })
        .collect())
}

/// Planar census of the scenario's mode at angular grid `m`.
pub fn run_census(sc: &Scenario, field: &PotentialField, m: usize) -> Result<Census> {
    match sc.mode {
        BumpMode::Brake => find_brake_orbits(field, m),
        BumpMode::Homoclinic => find_homoclinics(field, m, &sc.shooting),
        BumpMode::HomoclinicInterior => Err(Error::Mode(
            "the census needs brake or homoclinic mode; homoclinic-interior is experimental".into(),
        )),
    }
}

fn orbit_checks(sc: &Scenario, field: &PotentialField) -> Result<Vec<CheckRow>> {
    const M: &str = "orbits";
    if sc.mode == BumpMode::HomoclinicInterior {
        return Ok(Vec::new());
    }
    let params = field.params();
    let mut rows = Vec::new();
    if params.eps == 0.0 {
        // Concentric well: every direction is a brake orbit, so the census
        // degenerates and the check is that L vanishes identically.
        let w = params.axis_companion();
        let shots: Vec<(f64, f64)> = (0..sc.sweep.grid)
            .into_par_iter()
            .map(|k| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 / sc.sweep.grid as f64;
                let r = shoot_from_outer(field, &params.planar_direction(theta, &w), &sc.shooting)?;
                Ok((r.l_planar.abs(), r.max_energy_residual))
            })
            .collect::<Result<_>>()?;
        rows.push(CheckRow::at_most(M, "concentric well: entry angular momentum vanishes for every launch", shots.iter().map(|s| s.0).fold(0.0, f64::max), L_TOL));
        rows.push(CheckRow::at_most(M, "energy law along every shot", shots.iter().map(|s| s.1).fold(0.0, f64::max), 1e-8));
        return Ok(rows);
    }

    let census = run_census(sc, field, sc.sweep.grid)?;
    let root_offset = census
        .root_angles()
        .iter()
        .map(|&t| angle_distance(t, 0.0).min(angle_distance(t, std::f64::consts::PI)))
        .fold(0.0, f64::max);
    rows.push(CheckRow::equals(M, format!("{} census count at m = {}", sc.mode, sc.sweep.grid), census.count(), 2));
    rows.push(CheckRow::at_most(M, "census roots lie on the axis (angle to {0; pi})", root_offset, 1e-8));
    rows.push(CheckRow::equals(M, "inconclusive census shots", census.inconclusive().count(), 0));
    rows.push(CheckRow::at_most(M, "L(-theta) = -L(theta) over the scan", census.symmetry_residual, 1e-9));
    rows.push(CheckRow::at_most(M, "energy law along every census shot", census.max_energy_residual, 1e-8));
    rows.push(CheckRow::at_most(M, "angular momentum conserved inside the radial ball", census.max_l_drift, 1e-9));
    if sc.mode == BumpMode::Brake {
        let mut reversal: f64 = 0.0;
        let mut transit_failures = 0;
        for root in census.roots.iter().filter(|r| r.confirmed) {
            reversal = reversal.max(reversibility_error(&root.record, field)?);
            if !verify_transit(&root.record, field).passed() {
                transit_failures += 1;
            }
        }
        rows.push(CheckRow::at_most(M, "brake orbits retrace themselves from the inner endpoint", reversal, 1e-5));
        rows.push(CheckRow::equals(M, "brake orbits failing the transit to |q - eps v| = 1/2", transit_failures, 0));
    }
    for &m in &sc.sweep.stability_grids {
        let c = run_census(sc, field, m)?;
        rows.push(CheckRow::equals(M, format!("census count is stable at m = {m}"), c.count(), 2));
    }
    if params.dim == 3 {
        let sweep = sphere_sweep(field, sc.sweep.sphere_points)?;
        rows.push(CheckRow::equals(M, format!("off-axis candidates among {} sphere launches", sweep.points), sweep.candidates, 0));
        rows.push(CheckRow::at_most(M, "energy law along the sphere sweep", sweep.max_energy_residual, 1e-8));
    }
    Ok(rows)
}

fn print_report(report: &VerifyReport) {
    let width = report.rows.iter().map(|r| r.invariant.len()).max().unwrap_or(0);
    for r in &report.rows {
        println!(
            "{:4}  {:10}  {:width$}  {:>24} {:2} {:<24}",
            if r.passed { "pass" } else { "FAIL" },
            r.module,
            r.invariant,
            fmt17(r.value),
            r.relation,
            fmt17(r.budget),
        );
    }
}

/// Run the battery, print it, write `verify.csv`, and return the exit code.
pub fn cmd_verify(sc: &Scenario, opts: &RunOptions) -> Result<i32> {
    let report = run_verify(sc)?;
    print_report(&report);
    let path = write_file(&sc.out_dir.join("verify.csv"), &report.to_csv(stamp(opts).as_deref()))?;
    let failed = report.failures().count();
    println!("{} checks, {} failed; report written to {}", report.rows.len(), failed, path.display());
    Ok(if failed == 0 { 0 } else { 1 })
}

/// Census table: one row per root of the scan.
pub fn census_csv(census: &Census, stamp: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(s) = stamp {
        let _ = writeln!(out, "# generated {s}");
    }
    out.push_str("index,theta,classification,confirmed,l_planar,turning_radius,energy_residual\n");
    for (k, r) in census.roots.iter().enumerate() {
        let turning = r.record.turning.as_ref().map_or(f64::NAN, |t| norm(&t.q));
        let _ = writeln!(
            out,
            "{k},{},{},{},{},{},{}",
            fmt17(r.theta),
            r.record.classification,
            r.confirmed,
            fmt17(r.record.l_planar),
            fmt17(turning),
            fmt17(r.record.max_energy_residual)
        );
    }
    out
}

/// The scan `(θ, L(θ))` behind a census.
pub fn scan_csv(census: &Census) -> String {
    let mut out = String::from("theta,l\n");
    for (t, l) in &census.scan {
        let _ = writeln!(out, "{},{}", fmt17(*t), fmt17(*l));
    }
    out
}

/// Summary object with keys `mode`, `eps`, `energy`, `count`, `roots` and
/// `residual_summary`.
pub fn census_json(census: &Census, eps: f64, energy: f64) -> serde_json::Value {
    let roots: Vec<_> = census
        .roots
        .iter()
        .map(|r| {
            json!({
                "theta": r.theta,
                "confirmed": r.confirmed,
                "classification": r.record.classification.to_string(),
                "l_planar": r.record.l_planar,
            })
        })
        .collect();
    json!({
        "mode": census.mode.to_string(),
        "eps": eps,
        "energy": energy,
        "count": census.count(),
        "roots": roots,
        "residual_summary": {
            "max_energy_residual": census.max_energy_residual,
            "symmetry_residual": census.symmetry_residual,
            "max_l_drift": census.max_l_drift,
            "inconclusive": census.inconclusive().count(),
        },
    })
}

/// Polyline `t, q1..qN, speed` of one shot.
pub fn orbit_csv(record: &crate::orbits::ShootingRecord) -> String {
    let n = record.p.len();
    let mut out = String::from("t");
    for i in 1..=n {
        let _ = write!(out, ",q{i}");
    }
    out.push_str(",speed\n");
    for (t, q, speed) in record.polyline() {
        out.push_str(&fmt17(t));
        for x in q {
            out.push(',');
            out.push_str(&fmt17(x));
        }
        let _ = writeln!(out, ",{}", fmt17(speed));
    }
    out
}

fn write_orbits(census: &Census, dir: &Path) -> Result<Vec<PathBuf>> {
    census
        .roots
        .iter()
        .enumerate()
        .map(|(k, r)| write_file(&dir.join(format!("orbit_{k}.csv")), &orbit_csv(&r.record)))
        .collect()
}

/// Run the census, write its table, scan, polylines and JSON summary, and
/// return the exit code.
pub fn cmd_census(sc: &Scenario, opts: &RunOptions) -> Result<i32> {
    let field = sc.field()?;
    let census = run_census(sc, &field, sc.sweep.grid)?;
    let dir = &sc.out_dir;
    let stamp = stamp(opts);
    write_file(&dir.join("census.csv"), &census_csv(&census, stamp.as_deref()))?;
    write_file(&dir.join("scan.csv"), &scan_csv(&census))?;
    write_orbits(&census, dir)?;
    let summary = census_json(&census, sc.eps, sc.energy);
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    write_file(&dir.join("census.json"), &(text + "\n"))?;
    for r in &census.roots {
        println!(
            "theta = {}  {}  L = {}",
            fmt17(r.theta),
            r.record.classification,
            fmt17(r.record.l_planar)
        );
    }
    let inconclusive = census.inconclusive().count();
    println!("{} census, eps = {}, E = {}: count = {}", census.mode, sc.eps, sc.energy, census.count());
    if inconclusive > 0 {
        println!("{inconclusive} inconclusive shot(s)");
    }
    Ok(if opts.strict && inconclusive > 0 { 2 } else { 0 })
}

/// Datasets written by `export`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportKind {
    PotentialGrid,
    FlowGrid,
    Orbits,
}

impl std::str::FromStr for ExportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "potential-grid" => Ok(Self::PotentialGrid),
            "flow-grid" => Ok(Self::FlowGrid),
            "orbits" => Ok(Self::Orbits),
            other => Err(Error::InvalidParams(format!("unknown export {other:?}; expected potential-grid, flow-grid or orbits"))),
        }
    }
}

/// `x,y,V,region` on a square grid in the plane of the axis and its
/// companion.
pub fn potential_grid_csv(sc: &Scenario) -> Result<String> {
    let field = sc.field()?;
    let params = field.params();
    let (a, b) = (params.axis.clone(), params.axis_companion());
    let m = sc.export.grid;
    let ext = sc.export.extent;
    let coord = |k: usize| -ext + 2.0 * ext * k as f64 / (m - 1) as f64;
    let rows: Vec<String> = (0..m)
        .into_par_iter()
        .map(|j| {
            let y = coord(j);
            let mut out = String::new();
            for i in 0..m {
                let x = coord(i);
                let p: Vec<f64> = a.iter().zip(&b).map(|(ai, bi)| x * ai + y * bi).collect();
                let region = match field.region(&p)? {
                    Region::Inner => "inner",
                    Region::Collar => "collar",
                };
                let _ = writeln!(out, "{},{},{},{region}", fmt17(x), fmt17(y), fmt17(field.value(&p)?));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(std::iter::once("x,y,V,region\n".to_string()).chain(rows).collect())
}

/// `p_index, s, x1..xN, f_residual` along the flow lines of planar labels.
pub fn flow_grid_csv(sc: &Scenario) -> Result<String> {
    let params = sc.model_params()?;
    let n = params.dim;
    let chart = FlowChart::unit(GeneratingFn::new(params.clone())?);
    let labels = planar_grid(&params, sc.export.flow_profiles);
    let ss = s_grid(sc.export.flow_steps);
    let s_last = *ss.last().unwrap_or(&0.0);
    let mut header = String::from("p_index,s");
    for i in 1..=n {
        let _ = write!(header, ",x{i}");
    }
    header.push_str(",f_residual\n");
    let blocks: Vec<String> = labels
        .par_iter()
        .enumerate()
        .map(|(k, p)| {
            let traj = chart.flow_y(p, s_last)?;
            let mut out = String::new();
            for &s in &ss {
                let x = traj.dense_eval(s)?;
                let _ = write!(out, "{k},{}", fmt17(s));
                for xi in &x {
                    let _ = write!(out, ",{}", fmt17(*xi));
                }
                let _ = writeln!(out, ",{}", fmt17(chart.generating().value(&x)? - s));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(std::iter::once(header).chain(blocks).collect())
}

/// Write the requested dataset under the scenario's output directory.
pub fn cmd_export(sc: &Scenario, kind: ExportKind) -> Result<Vec<PathBuf>> {
    let dir = &sc.out_dir;
    let written = match kind {
        ExportKind::PotentialGrid => vec![write_file(&dir.join("potential_grid.csv"), &potential_grid_csv(sc)?)?],
        ExportKind::FlowGrid => vec![write_file(&dir.join("flow_grid.csv"), &flow_grid_csv(sc)?)?],
        ExportKind::Orbits => {
            let field = sc.field()?;
            write_orbits(&run_census(sc, &field, sc.sweep.grid)?, dir)?
        }
    };
    for p in &written {
        println!("wrote {}", p.display());
    }
    Ok(written)
}
