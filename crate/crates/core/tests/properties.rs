use std::f64::consts::PI;

use brakewell::bump::{BumpMode, BumpProfile, BumpSettings};
use brakewell::generating::GeneratingFn;
use brakewell::geodesics::{FlowChart, S_MAX};
use brakewell::linalg::{max_abs_diff, norm, scale};
use brakewell::ode::{integrate, IntegratorConfig};
use brakewell::orbits::shoot_from_outer;
use brakewell::orbits::ShootingOptions;
use brakewell::potential::{Potential, PotentialField};
use brakewell::scenario::Scenario;
use brakewell::ModelParams;
use proptest::prelude::*;

fn gen(dim: usize, eps: f64) -> GeneratingFn {
    GeneratingFn::new(ModelParams::new(dim, 4.0, eps).unwrap()).unwrap()
}

fn field(eps: f64, mode: BumpMode) -> PotentialField {
    PotentialField::new(gen(2, eps), Some(BumpProfile::with_defaults(mode, 4.0).unwrap())).unwrap()
}

fn direction(theta: f64, phi: f64, dim: usize) -> Vec<f64> {
    match dim {
        2 => vec![theta.cos(), theta.sin()],
        _ => vec![phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()],
    }
}

fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            (f(&xp) - f(&xm)) / (2.0 * h)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn generating_function_vanishes_on_the_sphere(
        theta in 0.0..2.0 * PI, phi in 0.01..PI - 0.01, eps in 0.0..0.11, dim in 2usize..=3,
    ) {
        let p = direction(theta, phi, dim);
        prop_assert!(gen(dim, eps).value(&p).unwrap().abs() < 1e-15);
    }

    #[test]
    fn generating_gradient_matches_differences(
        theta in 0.0..2.0 * PI, phi in 0.01..PI - 0.01, r in 1.0..3.0, eps in 0.0..0.11, dim in 2usize..=3,
    ) {
        let g = gen(dim, eps);
        let x = scale(&direction(theta, phi, dim), r);
        let fd = central_gradient(|y| g.value(y).unwrap(), &x, 1e-6);
        prop_assert!(max_abs_diff(&fd, &g.gradient(&x).unwrap()) < 1e-7);
    }

    #[test]
    fn potential_gradient_matches_differences(r in 0.05f64..2.0, theta in 0.0..2.0 * PI, eps in 0.0..0.11) {
        // Stencils straddling the seam or a bump knot see only C² data.
        prop_assume!((r - 1.0).abs() > 1e-3);
        let f = field(eps, BumpMode::Brake);
        let x = vec![r * theta.cos(), r * theta.sin()];
        let s = 0.5 * ((x[0] - eps).powi(2) + x[1] * x[1]);
        prop_assume!(f.bump().unwrap().knots().iter().all(|k| (s - k).abs() > 1e-4));
        let fd = central_gradient(|y| f.value(y).unwrap(), &x, 1e-6);
        prop_assert!(max_abs_diff(&fd, &f.gradient(&x).unwrap()) < 1e-6);
    }

    #[test]
    fn bump_profile_is_c2_at_its_knots(
        s_star in 0.02..0.1, delta_star in 0.05..0.2, cap in 0.5..2.0, slope in -12.0..-4.0,
        mode in prop_oneof![Just(BumpMode::Brake), Just(BumpMode::Homoclinic)],
    ) {
        let settings = BumpSettings { s_star, delta_star, cap, wall_slope: slope, ..BumpSettings::default() };
        // Settings that violate an invariant must fail loudly, not build.
        if let Ok(b) = BumpProfile::build(mode, 4.0, settings) {
            for k in b.knots() {
                let (l, r) = (b.eval(k - 1e-12), b.eval(k + 1e-12));
                prop_assert!((l.0 - r.0).abs() < 1e-9);
                prop_assert!((l.1 - r.1).abs() < 1e-7);
                prop_assert!((l.2 - r.2).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn scenario_text_never_panics(text in "[a-z_.=0-9, #\n-]{0,200}") {
        if let Ok(s) = Scenario::parse(&text) {
            prop_assert_eq!(Scenario::parse(&s.render()).unwrap(), s);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backward_flow_inverts_the_flow(theta in 0.0..2.0 * PI, s in 0.0..S_MAX, eps in 0.0..0.11) {
        let chart = FlowChart::unit(gen(2, eps));
        let p = vec![theta.cos(), theta.sin()];
        let (q, t) = chart.backward_flow(&chart.point(&p, s).unwrap()).unwrap();
        prop_assert!(max_abs_diff(&p, &q) < 1e-7);
        prop_assert!((s - t).abs() < 1e-7);
    }

    #[test]
    fn collar_routes_agree(theta in 0.0..2.0 * PI, s in 0.01..S_MAX, eps in 0.0..0.11) {
        let f = field(eps, BumpMode::Brake);
        let chart = FlowChart::unit(f.generating().clone());
        let x = chart.point(&[theta.cos(), theta.sin()], s).unwrap();
        prop_assert!(f.eval_w_cartesian(&x).unwrap().discrepancy() < 1e-9);
    }

    #[test]
    fn planar_angular_momentum_is_odd(theta in 0.01..PI - 0.01, eps in 0.005..0.11) {
        let f = field(eps, BumpMode::Brake);
        let opts = ShootingOptions::default();
        let up = shoot_from_outer(&f, &[theta.cos(), theta.sin()], &opts).unwrap();
        let down = shoot_from_outer(&f, &[theta.cos(), -theta.sin()], &opts).unwrap();
        prop_assert!((up.l_planar + down.l_planar).abs() < 1e-9);
        prop_assert!(up.max_energy_residual < 1e-8 && down.max_energy_residual < 1e-8);
    }

    #[test]
    fn integration_is_reversible(x0 in -1.0..1.0, v0 in -1.0..1.0, t_end in 0.1..4.0) {
        let field = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy[0] = y[1];
            dy[1] = -y[0].sin();
        };
        let cfg = IntegratorConfig::default();
        let fwd = integrate(field, &[x0, v0], (0.0, t_end), &cfg).unwrap();
        let back = integrate(field, fwd.last_state(), (t_end, 0.0), &cfg).unwrap();
        let tol = cfg.abs_tol + cfg.rel_tol * norm(&[x0, v0]).max(1.0);
        prop_assert!(max_abs_diff(back.last_state(), &[x0, v0]) < 10.0 * tol);
    }
}

/// The glued potential and its derivatives approach the radial one as the
/// well shift goes to zero, at a linear rate.
#[test]
fn potential_converges_to_the_radial_limit() {
    let base = field(0.0, BumpMode::Brake);
    let points: Vec<Vec<f64>> = (0..48)
        .flat_map(|i| {
            let t = 2.0 * PI * i as f64 / 48.0;
            [0.3, 0.8, 1.2, 1.7].map(|r| vec![r * t.cos(), r * t.sin()])
        })
        .collect();
    let distance = |eps: f64| {
        let f = field(eps, BumpMode::Brake);
        points.iter().fold((0.0f64, 0.0f64), |(dv, dg), x| {
            let (v0, g0) = base.value_and_gradient(x).unwrap();
            let (v, g) = f.value_and_gradient(x).unwrap();
            (dv.max((v - v0).abs()), dg.max(max_abs_diff(&g, &g0)))
        })
    };
    let d: Vec<(f64, f64)> = [0.1, 0.05, 0.025].map(distance).to_vec();
    for w in d.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 < w[0].1, "{d:?}");
        assert!(w[1].0 / w[0].0 > 0.3 && w[1].0 / w[0].0 < 0.7, "{d:?}");
    }
}

/// Reflection across the axis maps the glued potential to itself.
#[test]
fn potential_is_symmetric_about_the_axis() {
    let f = field(0.05, BumpMode::Brake);
    for k in 0..64 {
        let t = 2.0 * PI * k as f64 / 64.0;
        for r in [0.2, 0.6, 0.99, 1.01, 1.5, 2.0] {
            let a = f.value(&[r * t.cos(), r * t.sin()]).unwrap();
            let b = f.value(&[r * t.cos(), -r * t.sin()]).unwrap();
            assert!((a - b).abs() < 1e-12, "{r} {t}");
        }
    }
}
