//! The glued potential.
//!
//! Inside the unit ball the potential is `β(½|x - εv|²)` (or the plain
//! quadratic `½|x - εv|²` without a bump); in the collar it is the closed
//! form `W(x) = E - 2 |grad F(x)|² (1 - 2 F(x)/3)`.

use rayon::prelude::*;

use crate::bump::{max_admissible_eps, BumpMode, BumpProfile};
use crate::error::{Error, Result};
use crate::generating::GeneratingFn;
use crate::geodesics::{FlowChart, S_MAX};
use crate::linalg::{distance, dot, norm, scale, sphere_samples, sub};
use crate::params::ModelParams;

/// Largest radius at which the collar form is evaluated.
pub const COLLAR_LIMIT: f64 = 4.0;

/// Step of the central differences for the Hessian of `F` along its gradient.
const HESSIAN_STEP: f64 = 1e-4;

/// Tolerance of the level-set membership predicates.
pub const MEMBERSHIP_TOL: f64 = 1e-6;

/// A smooth potential on a subset of `R^N`.
pub trait Potential: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }
}

/// `½ |x - c|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPotential {
    pub center: Vec<f64>,
}

impl Potential for QuadraticPotential {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let d = sub(x, &self.center);
        Ok(0.5 * dot(&d, &d))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(sub(x, &self.center))
    }
}

/// The collar potential in Cartesian form.
#[derive(Debug, Clone)]
pub struct CollarPotential {
    gen: GeneratingFn,
}

impl CollarPotential {
    pub fn new(gen: GeneratingFn) -> Self {
        Self { gen }
    }

    pub fn generating(&self) -> &GeneratingFn {
        &self.gen
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        let r = norm(x);
        if !(r > 0.0 && r <= COLLAR_LIMIT) {
            return Err(Error::Domain(format!("collar form evaluated at |x| = {r}")));
        }
        Ok(())
    }

    /// `H_F(x) grad F(x)` by Richardson-extrapolated central differences of
    /// the analytic gradient along the unit gradient direction.
    pub fn hessian_times_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.gen.gradient(x)?;
        let gn = norm(&g);
        if gn == 0.0 {
            return Ok(vec![0.0; x.len()]);
        }
        let n = scale(&g, 1.0 / gn);
        let central = |h: f64| -> Result<Vec<f64>> {
            let plus: Vec<f64> = x.iter().zip(&n).map(|(a, d)| a + h * d).collect();
            let minus: Vec<f64> = x.iter().zip(&n).map(|(a, d)| a - h * d).collect();
            let gp = self.gen.gradient(&plus)?;
            let gm = self.gen.gradient(&minus)?;
            Ok(gp.iter().zip(&gm).map(|(a, b)| (a - b) / (2.0 * h)).collect())
        };
        let d1 = central(HESSIAN_STEP)?;
        let d2 = central(2.0 * HESSIAN_STEP)?;
        Ok(d1.iter().zip(&d2).map(|(a, b)| gn * (4.0 * a - b) / 3.0).collect())
    }

    /// Evaluation through chart coordinates: `(P, s)` from the backward
    /// flow, then `E - 2 |grad F(ỹ(P, s))|² (1 - 2s/3)`.
    pub fn chart_value(&self, x: &[f64]) -> Result<f64> {
        let chart = FlowChart::unit(self.gen.clone());
        let (p, s) = chart.backward_flow(x)?;
        let y = chart.point(&p, s)?;
        let g = self.gen.gradient(&y)?;
        Ok(self.gen.params().energy - 2.0 * dot(&g, &g) * (1.0 - 2.0 * s / 3.0))
    }
}

impl Potential for CollarPotential {
    fn dim(&self) -> usize {
        self.gen.params().dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let (f, g) = self.gen.value_and_gradient(x)?;
        Ok(self.gen.params().energy - 2.0 * dot(&g, &g) * (1.0 - 2.0 * f / 3.0))
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(x)?;
        let (f, g) = self.gen.value_and_gradient(x)?;
        let a = dot(&g, &g);
        let b = 1.0 - 2.0 * f / 3.0;
        let hg = self.hessian_times_gradient(x)?;
        let value = self.gen.params().energy - 2.0 * a * b;
        let grad = hg
            .iter()
            .zip(&g)
            .map(|(h, gi)| -2.0 * (2.0 * b * h - 2.0 / 3.0 * a * gi))
            .collect();
        Ok((value, grad))
    }
}

/// The inner branch `β(½|x - εv|²)` on all of `R^N`.
#[derive(Debug, Clone)]
pub struct InnerPotential {
    center: Vec<f64>,
    bump: Option<BumpProfile>,
}

impl InnerPotential {
    pub fn value_and_gradient_of(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = sub(x, &self.center);
        let s = 0.5 * dot(&d, &d);
        match &self.bump {
            None => (s, d),
            Some(b) => {
                let (v, dv, _) = b.eval(s);
                (v, scale(&d, dv))
            }
        }
    }
}

impl Potential for InnerPotential {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.value_and_gradient_of(x).0)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient_of(x).1)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok(self.value_and_gradient_of(x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Inner,
    Collar,
}

/// Both evaluation routes of the collar potential at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollarEvaluation {
    pub closed_form: f64,
    pub via_chart: f64,
}

impl CollarEvaluation {
    pub fn discrepancy(&self) -> f64 {
        (self.closed_form - self.via_chart).abs()
    }
}

/// Jumps of value, radial first and radial second derivative across the
/// unit sphere, maximized over the sphere grid, for each step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct C2Report {
    pub steps: Vec<f64>,
    /// `jumps[k][i]`: jump of the `k`-th radial derivative at `steps[i]`.
    pub jumps: [Vec<f64>; 3],
    /// `orders[k][i]`: observed order between `steps[i]` and `steps[i + 1]`.
    pub orders: [Vec<f64>; 3],
    pub passed: [bool; 3],
}

/// Rounding floor of the `k`-th one-sided difference at step `h`.
fn noise_floor(k: usize, h: f64) -> f64 {
    1e-13 / h.powi(k as i32)
}

/// Bound on the jump of the `k`-th derivative at the finest step.
const JUMP_CONSTANT: f64 = 100.0;

impl C2Report {
    pub fn all_passed(&self) -> bool {
        self.passed.iter().all(|&p| p)
    }

    fn judge(steps: &[f64], jumps: &[f64], k: usize) -> (Vec<f64>, bool) {
        let expected = (3 - k) as f64;
        let mut orders = Vec::new();
        let mut ok = true;
        for i in 0..steps.len().saturating_sub(1) {
            let order = (jumps[i] / jumps[i + 1]).log10() / (steps[i] / steps[i + 1]).log10();
            orders.push(order);
            let converging = order >= expected - 0.5;
            if !converging && jumps[i + 1] > noise_floor(k, steps[i + 1]) {
                ok = false;
            }
        }
        if let (Some(&h), Some(&j)) = (steps.last(), jumps.last()) {
            if j > JUMP_CONSTANT * h.powi(3 - k as i32) && j > noise_floor(k, h) {
                ok = false;
            }
        }
        (orders, ok)
    }
}

/// The inner sphere `{½ |x - εv|² = s*}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerComponent {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl InnerComponent {
    pub fn contains(&self, x: &[f64]) -> bool {
        (distance(x, &self.center) - self.radius).abs() < MEMBERSHIP_TOL
    }
}

/// Samples of the outer boundary `{F = 3/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterComponent {
    pub labels: Vec<Vec<f64>>,
    pub points: Vec<Vec<f64>>,
}

/// The two components of `{V = E}` and the regularity checks on them.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSets {
    pub inner: InnerComponent,
    pub outer: OuterComponent,
    pub min_grad_inner: f64,
    pub min_grad_outer: f64,
    /// `max |V - E|` over all samples.
    pub max_level_residual: f64,
    /// Smallest distance between sampled points of the two components.
    pub separation: f64,
}

/// The global potential: inner branch glued to the collar at `|x| = 1`.
#[derive(Debug, Clone)]
pub struct PotentialField {
    collar: CollarPotential,
    inner: InnerPotential,
    center: Vec<f64>,
    bump: Option<BumpProfile>,
}

impl PotentialField {
    /// Inner branch `β(½|x - εv|²)` when `bump` is given, `½|x - εv|²` otherwise.
    pub fn new(gen: GeneratingFn, bump: Option<BumpProfile>) -> Result<Self> {
        let params = gen.params();
        if let Some(b) = &bump {
            let limit = max_admissible_eps(b.settings().delta_star);
            if params.eps > limit {
                return Err(Error::InvalidParams(format!(
                    "eccentricity {} exceeds {limit}, the largest keeping the unit sphere in the identity band",
                    params.eps
                )));
            }
            if (b.energy() - params.energy).abs() > 0.0 {
                return Err(Error::InvalidParams("bump profile built for a different energy".into()));
            }
        }
        Ok(Self {
            center: params.center(),
            inner: InnerPotential {
                center: params.center(),
                bump: bump.clone(),
            },
            collar: CollarPotential::new(gen),
            bump,
        })
    }

    pub fn plain(gen: GeneratingFn) -> Result<Self> {
        Self::new(gen, None)
    }

    pub fn params(&self) -> &ModelParams {
        self.collar.gen.params()
    }

    pub fn generating(&self) -> &GeneratingFn {
        &self.collar.gen
    }

    pub fn collar(&self) -> &CollarPotential {
        &self.collar
    }

    /// The inner branch, extended smoothly past the unit sphere.
    pub fn inner(&self) -> &InnerPotential {
        &self.inner
    }

    pub fn bump(&self) -> Option<&BumpProfile> {
        self.bump.as_ref()
    }

    /// The point `εv`.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn region(&self, x: &[f64]) -> Result<Region> {
        if x.len() != self.params().dim {
            return Err(Error::Domain(format!("expected {} components, got {}", self.params().dim, x.len())));
        }
        let r = norm(x);
        if !r.is_finite() || r > COLLAR_LIMIT {
            Err(Error::Domain(format!("|x| = {r} beyond the collar limit {COLLAR_LIMIT}")))
        } else if r <= 1.0 {
            Ok(Region::Inner)
        } else {
            Ok(Region::Collar)
        }
    }

    /// Inner branch at any point, regardless of region.
    pub fn inner_value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.inner.value_and_gradient_of(x)
    }

    /// Collar branch at any point where the closed form is defined.
    /// The smooth extension of each branch is what the integrators use on
    /// legs that end at the sphere: a step straddling `|x| = 1` would
    /// otherwise see the third-derivative jump of the glued field.
    pub fn collar_value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.collar.value_and_gradient(x)
    }

    /// Both routes for the collar potential at `x` with `0 <= F(x) <= 3/2`.
    pub fn eval_w_cartesian(&self, x: &[f64]) -> Result<CollarEvaluation> {
        if self.region(x)? != Region::Collar {
            return Err(Error::Domain("collar evaluation requested inside the unit ball".into()));
        }
        Ok(CollarEvaluation {
            closed_form: self.collar.value(x)?,
            via_chart: self.collar.chart_value(x)?,
        })
    }

    /// One-sided three-point extrapolations of value and radial derivatives
    /// of both branches at the sphere point `p`, with step `h`.
    fn jumps_at(&self, p: &[f64], h: f64) -> Result<[f64; 3]> {
        let along = |delta: f64| -> Vec<f64> { scale(p, 1.0 + delta) };
        let inner = |delta: f64| self.inner_value_and_gradient(&along(delta)).0;
        let outer = |delta: f64| self.collar.value(&along(delta));
        let (o1, o2, o3) = (outer(h)?, outer(2.0 * h)?, outer(3.0 * h)?);
        let (i1, i2, i3) = (inner(-h), inner(-2.0 * h), inner(-3.0 * h));
        let value = |g1: f64, g2: f64, g3: f64| 3.0 * g1 - 3.0 * g2 + g3;
        let slope = |g1: f64, g2: f64, g3: f64| (-2.5 * g1 + 4.0 * g2 - 1.5 * g3) / h;
        let curvature = |g1: f64, g2: f64, g3: f64| (g1 - 2.0 * g2 + g3) / (h * h);
        Ok([
            (value(o1, o2, o3) - value(i1, i2, i3)).abs(),
            (slope(o1, o2, o3) + slope(i1, i2, i3)).abs(),
            (curvature(o1, o2, o3) - curvature(i1, i2, i3)).abs(),
        ])
    }

    /// Jumps of the two branches across the unit sphere and their observed
    /// convergence orders. `steps` must be decreasing.
    pub fn c2_matching_report(&self, sphere: &[Vec<f64>], steps: &[f64]) -> Result<C2Report> {
        let per_step: Vec<Result<[f64; 3]>> = steps
            .par_iter()
            .map(|&h| {
                let mut worst = [0.0f64; 3];
                for p in sphere {
                    let j = self.jumps_at(p, h)?;
                    for k in 0..3 {
                        worst[k] = worst[k].max(j[k]);
                    }
                }
                Ok(worst)
            })
            .collect();
        let mut jumps: [Vec<f64>; 3] = Default::default();
        for w in per_step {
            let w = w?;
            for k in 0..3 {
                jumps[k].push(w[k]);
            }
        }
        let mut orders: [Vec<f64>; 3] = Default::default();
        let mut passed = [true; 3];
        for k in 0..3 {
            let (o, ok) = C2Report::judge(steps, &jumps[k], k);
            orders[k] = o;
            passed[k] = ok;
        }
        Ok(C2Report {
            steps: steps.to_vec(),
            jumps,
            orders,
            passed,
        })
    }

    /// The outer boundary sampled at `labels`.
    pub fn outer_component(&self, labels: &[Vec<f64>]) -> Result<OuterComponent> {
        let chart = FlowChart::unit(self.generating().clone());
        let points = labels
            .par_iter()
            .map(|p| chart.launch_point(p))
            .collect::<Result<Vec<_>>>()?;
        Ok(OuterComponent {
            labels: labels.to_vec(),
            points,
        })
    }

    /// Whether `x` lies on the outer boundary `{F = 3/2, |x| > 1}`.
    pub fn on_outer(&self, x: &[f64]) -> Result<bool> {
        Ok(norm(x) > 1.0 && (self.generating().value(x)? - S_MAX).abs() < MEMBERSHIP_TOL)
    }

    /// The inner sphere of a brake-mode field.
    pub fn inner_component(&self) -> Result<InnerComponent> {
        match &self.bump {
            Some(b) if b.mode() == BumpMode::Brake => Ok(InnerComponent {
                center: self.center.clone(),
                radius: (2.0 * b.crossing()).sqrt(),
            }),
            _ => Err(Error::Mode("the inner boundary component exists only in brake mode".into())),
        }
    }

    /// Both components of `{V = E}` sampled at `samples` directions, with
    /// gradient and separation checks.
    pub fn level_set_components(&self, samples: usize) -> Result<LevelSets> {
        let inner = self.inner_component()?;
        let dim = self.params().dim;
        let energy = self.params().energy;
        let dirs = sphere_samples(dim, samples);
        let outer = self.outer_component(&dirs)?;
        let mut min_grad_inner = f64::INFINITY;
        let mut max_level_residual: f64 = 0.0;
        let inner_points: Vec<Vec<f64>> = dirs
            .iter()
            .map(|d| inner.center.iter().zip(d).map(|(c, di)| c + inner.radius * di).collect())
            .collect();
        for x in &inner_points {
            let (v, g) = self.value_and_gradient(x)?;
            min_grad_inner = min_grad_inner.min(norm(&g));
            max_level_residual = max_level_residual.max((v - energy).abs());
        }
        let mut min_grad_outer = f64::INFINITY;
        for x in &outer.points {
            let (v, g) = self.value_and_gradient(x)?;
            min_grad_outer = min_grad_outer.min(norm(&g));
            max_level_residual = max_level_residual.max((v - energy).abs());
        }
        let separation = inner_points
            .iter()
            .flat_map(|a| outer.points.iter().map(move |b| distance(a, b)))
            .fold(f64::INFINITY, f64::min);
        Ok(LevelSets {
            inner,
            outer,
            min_grad_inner,
            min_grad_outer,
            max_level_residual,
            separation,
        })
    }
}

impl Potential for PotentialField {
    fn dim(&self) -> usize {
        self.params().dim
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        match self.region(x)? {
            Region::Inner => Ok(self.inner_value_and_gradient(x).0),
            Region::Collar => self.collar.value(x),
        }
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.value_and_gradient(x).map(|(_, g)| g)
    }

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        match self.region(x)? {
            Region::Inner => Ok(self.inner_value_and_gradient(x)),
            Region::Collar => self.collar.value_and_gradient(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field(eps: f64, mode: Option<BumpMode>) -> PotentialField {
        let gen = GeneratingFn::new(ModelParams::new(2, 4.0, eps).unwrap()).unwrap();
        let bump = mode.map(|m| BumpProfile::with_defaults(m, 4.0).unwrap());
        PotentialField::new(gen, bump).unwrap()
    }

    #[test]
    fn sphere_value_matches_inner_quadratic() {
        let f = field(0.0, None);
        let w = f.collar.value(&[0.0, 1.0]).unwrap();
        let f1 = 7.0f64.sqrt() / 2.0;
        assert!((w - (4.0 - 2.0 * f1 * f1)).abs() < 1e-14);
        assert!((w - 0.5).abs() < 1e-14);
        assert!((f.value(&[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn outer_level_is_the_energy() {
        let f = field(0.05, Some(BumpMode::Brake));
        let chart = FlowChart::unit(f.generating().clone());
        let x = chart.launch_point(&[0.6, 0.8]).unwrap();
        assert!((f.value(&x).unwrap() - 4.0).abs() < 1e-12);
        assert!(f.on_outer(&x).unwrap());
    }

    #[test]
    fn radial_collar_value_at_one_and_a_half() {
        let f1 = 7.0f64.sqrt() / 2.0;
        let f2 = 0.25 * (4.0 / 3.0 * f1 * f1 - 1.0 / f1);
        let f3 = 0.5629235887738143;
        let d = 0.5;
        let value = f1 * d + f2 * d * d / 2.0 + f3 * d * d * d / 6.0;
        let slope = f1 + f2 * d + f3 * d * d / 2.0;
        let expected = 4.0 - 2.0 * slope * slope * (1.0 - 2.0 * value / 3.0);
        let got = field(0.0, None).value(&[0.0, -1.5]).unwrap();
        assert!((got - expected).abs() < 1e-13);
    }

    #[test]
    fn brake_field_examples() {
        let f = field(0.05, Some(BumpMode::Brake));
        // ½|x - εv|² = 3/8 inside the unit ball: identity piece.
        let x = [0.05, -(0.75f64).sqrt()];
        assert!((f.value(&x).unwrap() - 0.375).abs() < 1e-14);
        let g = f.gradient(&[0.05, 0.0]).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
        let inner = f.inner_component().unwrap();
        assert!((inner.radius - 0.125f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn homoclinic_field_has_no_inner_component() {
        let f = field(0.05, Some(BumpMode::Homoclinic));
        assert!(matches!(f.inner_component(), Err(Error::Mode(_))));
        assert!(matches!(f.level_set_components(8), Err(Error::Mode(_))));
    }

    #[test]
    fn oversized_eccentricity_rejected_with_bump() {
        let gen = GeneratingFn::new(ModelParams::new(2, 4.0, 0.2).unwrap()).unwrap();
        let bump = BumpProfile::with_defaults(BumpMode::Brake, 4.0).unwrap();
        assert!(PotentialField::new(gen, Some(bump)).is_err());
    }

    #[test]
    fn out_of_domain_points() {
        let f = field(0.05, None);
        assert!(f.value(&[5.0, 0.0]).is_err());
        assert!(f.value(&[1.0]).is_err());
        assert!(f.eval_w_cartesian(&[0.5, 0.0]).is_err());
    }
}
