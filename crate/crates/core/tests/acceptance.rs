//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are
//! always printed.

use std::f64::consts::PI;
use std::time::Instant;

use brakewell::bump::{BumpMode, BumpProfile};
use brakewell::generating::GeneratingFn;
use brakewell::geodesics::{planar_grid, s_grid, FlowChart, S_MAX};
use brakewell::linalg::max_abs_diff;
use brakewell::maupertuis::OrbitChart;
use brakewell::orbits::{angle_distance, find_brake_orbits, find_homoclinics, sphere_sweep, ShootingOptions};
use brakewell::potential::PotentialField;
use brakewell::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ENERGY: f64 = 4.0;
const EPS_SWEEP: [f64; 3] = [0.01, 0.02, 0.05];
const GRID: usize = 720;

fn params(dim: usize, eps: f64) -> ModelParams {
    ModelParams::new(dim, ENERGY, eps).unwrap()
}

fn field(dim: usize, eps: f64, mode: BumpMode) -> PotentialField {
    let gen = GeneratingFn::new(params(dim, eps)).unwrap();
    PotentialField::new(gen, Some(BumpProfile::with_defaults(mode, ENERGY).unwrap())).unwrap()
}

struct Outcome {
    passed: bool,
    detail: String,
}

fn check(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

/// Largest angular distance from the roots to the axis directions {0, π}.
fn axis_offset(roots: &[f64]) -> f64 {
    roots
        .iter()
        .map(|&t| angle_distance(t, 0.0).min(angle_distance(t, PI)))
        .fold(0.0, f64::max)
}

fn brake_census() -> (Outcome, f64) {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut energy: f64 = 0.0;
    for eps in EPS_SWEEP {
        let start = Instant::now();
        let c = find_brake_orbits(&field(2, eps, BumpMode::Brake), GRID).unwrap();
        let secs = start.elapsed().as_secs_f64();
        let offset = axis_offset(&c.root_angles());
        energy = energy.max(c.max_energy_residual);
        ok &= c.count() == 2 && offset <= 1e-8 && secs < 60.0;
        parts.push(format!("eps={eps}: count={} offset={offset:.1e} {secs:.1}s", c.count()));
    }
    (check(ok, parts.join("; ")), energy)
}

fn homoclinic_census() -> (Outcome, f64) {
    let mut ok = true;
    let mut parts = Vec::new();
    let mut energy: f64 = 0.0;
    let opts = ShootingOptions {
        delta_h: 1e-3,
        ..ShootingOptions::default()
    };
    for eps in EPS_SWEEP {
        let start = Instant::now();
        let c = find_homoclinics(&field(2, eps, BumpMode::Homoclinic), GRID, &opts).unwrap();
        let secs = start.elapsed().as_secs_f64();
        energy = energy.max(c.max_energy_residual);
        ok &= c.count() == 2 && secs < 120.0;
        parts.push(format!("eps={eps}: count={} {secs:.1}s", c.count()));
    }
    (check(ok, parts.join("; ")), energy)
}

fn gauss_lemma() -> Outcome {
    let p = params(2, 0.05);
    let chart = FlowChart::unit(GeneratingFn::new(p.clone()).unwrap());
    let start = Instant::now();
    let rep = chart.verify_gauss(&planar_grid(&p, 64), &s_grid(64)).unwrap();
    let secs = start.elapsed().as_secs_f64();
    check(
        rep.orthogonality < 1e-8 && rep.unit_speed < 1e-8 && secs < 30.0,
        format!("orthogonality={:.2e} unit_speed={:.2e} {secs:.1}s", rep.orthogonality, rep.unit_speed),
    )
}

fn maupertuis_equivalence() -> Outcome {
    let p = params(2, 0.05);
    let f = field(2, 0.05, BumpMode::Brake);
    let chart = OrbitChart::new(f.generating().clone());
    let start = Instant::now();
    let worst = planar_grid(&p, 32)
        .iter()
        .map(|label| chart.direct_vs_converted(label, &f).unwrap())
        .fold(0.0, f64::max);
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-6 && secs < 60.0, format!("max position deviation={worst:.2e} over 32 P {secs:.1}s"))
}

fn c2_matching() -> Outcome {
    let steps = [1e-3, 1e-4, 1e-5];
    let sphere = brakewell::linalg::sphere_samples(2, 128);
    let start = Instant::now();
    let good = field(2, 0.05, BumpMode::Brake).c2_matching_report(&sphere, &steps).unwrap();
    let gen = GeneratingFn::new(params(2, 0.05).with_f3_perturbation(1e-3)).unwrap();
    let corrupted = PotentialField::new(gen, Some(BumpProfile::with_defaults(BumpMode::Brake, ENERGY).unwrap()))
        .unwrap()
        .c2_matching_report(&sphere, &steps)
        .unwrap();
    let secs = start.elapsed().as_secs_f64();
    check(
        good.all_passed() && !corrupted.passed[2] && secs < 30.0,
        format!(
            "curvature jumps {:.1e}/{:.1e}/{:.1e}, orders {:.2}/{:.2}; corrupted f3 finest jump {:.1e} fails={} {secs:.1}s",
            good.jumps[2][0],
            good.jumps[2][1],
            good.jumps[2][2],
            good.orders[2][0],
            good.orders[2][1],
            corrupted.jumps[2][2],
            !corrupted.passed[2]
        ),
    )
}

fn chart_invertibility() -> Outcome {
    let p = params(2, 0.05);
    let chart = FlowChart::unit(GeneratingFn::new(p.clone()).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..256 {
        let theta = rng.gen_range(0.0..2.0 * PI);
        let s = rng.gen_range(0.0..S_MAX);
        let label = vec![theta.cos(), theta.sin()];
        let (back, s_back) = chart.backward_flow(&chart.point(&label, s).unwrap()).unwrap();
        worst = worst.max(max_abs_diff(&back, &label)).max((s_back - s).abs());
    }
    let grid = chart.verify_gauss(&planar_grid(&p, 64), &s_grid(64)).unwrap();
    check(
        worst < 1e-7 && grid.min_monotonicity > 0.0 && grid.max_radius <= 2.5,
        format!(
            "round trip={worst:.2e} min <dy/ds, y>={:.3} max |y|={:.4}",
            grid.min_monotonicity, grid.max_radius
        ),
    )
}

/// Arrival time at ε = 0 from the radial reduction, computed in the
/// variable `w = sqrt(1 - 2F/3)`: `T = ∫_0^1 3 / (2 F'(r(w))²) dw`, with
/// `r(w)` from bisection and composite Gauss–Legendre quadrature.
fn radial_arrival_time() -> f64 {
    let f1 = (2.0 * ENERGY - 1.0).sqrt() / 2.0;
    let f2 = 0.25 * (4.0 / 3.0 * f1 * f1 - 1.0 / f1);
    let f3 = f1.powi(3) / 9.0 + f2 * f1 - 1.0 / 12.0 - 1.0 / (4.0 * f1) + f2 / (4.0 * f1 * f1);
    let f = |d: f64| f1 * d + f2 * d * d / 2.0 + f3 * d.powi(3) / 6.0;
    let df = |d: f64| f1 + f2 * d + f3 * d * d / 2.0;
    let integrand = |w: f64| {
        let target = 1.5 * (1.0 - w * w);
        let (mut lo, mut hi) = (0.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let slope = df(0.5 * (lo + hi));
        3.0 / (2.0 * slope * slope)
    };
    let nodes = [
        (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
        (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.0, 0.568_888_888_888_888_9),
        (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
        (0.906_179_845_938_664, 0.236_926_885_056_189_1),
    ];
    let panels = 400;
    let h = 1.0 / panels as f64;
    (0..panels)
        .map(|k| {
            let mid = (k as f64 + 0.5) * h;
            nodes.iter().map(|(x, w)| w * integrand(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

fn arrival_law() -> Outcome {
    let p = params(2, 0.05);
    let chart = OrbitChart::new(GeneratingFn::new(p.clone()).unwrap());
    let mut acc: f64 = 0.0;
    let mut sigma: f64 = 0.0;
    for label in planar_grid(&p, 32) {
        let rep = chart.arrival_report(&label).unwrap();
        acc = acc.max(rep.accumulator_residual);
        sigma = sigma.max(rep.sigma_residual);
    }
    let radial = OrbitChart::new(GeneratingFn::new(params(2, 0.0)).unwrap());
    let t = radial.arrival_time(&[0.0, 1.0]).unwrap();
    let oracle = radial_arrival_time();
    let dt = (t - oracle).abs();
    check(
        acc < 1e-8 && sigma < 1e-8 && dt < 1e-8,
        format!("|a(T)-3|={acc:.1e} |sigma(T)-1|={sigma:.1e}; eps=0: T={t:.12} oracle={oracle:.12} diff={dt:.1e}"),
    )
}

fn three_dimensions() -> Outcome {
    let f = field(3, 0.05, BumpMode::Brake);
    let start = Instant::now();
    let c = find_brake_orbits(&f, GRID).unwrap();
    let sweep = sphere_sweep(&f, 962).unwrap();
    let secs = start.elapsed().as_secs_f64();
    check(
        c.count() == 2 && sweep.passed() && secs < 600.0,
        format!(
            "in-plane count={} sweep of {}: candidates={} min |L|={:.2e} at <P, v>={:.3} {secs:.1}s",
            c.count(),
            sweep.points,
            sweep.candidates,
            sweep.min_l,
            sweep.argmin[0]
        ),
    )
}

fn main() {
    let (c1, e1) = brake_census();
    let (c2, e2) = homoclinic_census();
    let energy = e1.max(e2);
    let results = [
        ("1 brake-orbit census", c1),
        ("2 homoclinic census", c2),
        ("3 converse Gauss lemma", gauss_lemma()),
        ("4 Maupertuis equivalence", maupertuis_equivalence()),
        ("5 C2 matching", c2_matching()),
        (
            "6 energy law over census shots",
            check(energy < 1e-8, format!("max |E - E0|={energy:.2e}")),
        ),
        ("7 chart invertibility", chart_invertibility()),
        ("8 arrival-time law", arrival_law()),
        ("9 three-dimensional confirmation", three_dimensions()),
    ];
    let mut failed = 0;
    for (name, r) in &results {
        println!("[{}] {name}: {}", if r.passed { "PASS" } else { "FAIL" }, r.detail);
        failed += usize::from(!r.passed);
    }
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
