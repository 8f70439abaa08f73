//! Radial reshaping of the inner quadratic potential.
//!
//! The inner potential is `β(½|x - εv|²)`. The profile `β` is assembled from
//! quintic Hermite pieces, so it is `C²` at every knot, and it is the
//! identity beyond `½ - δ*`, which keeps the glue with the collar intact.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpMode {
    /// Plateau above `E` on `[0, s*[`, crossing `E` transversally at `s*`.
    Brake,
    /// Non-degenerate maximum equal to `E` at `s = 0`.
    Homoclinic,
    /// Experimental: maximum equal to `E` at the interior point `s*`.
    HomoclinicInterior,
}

impl std::str::FromStr for BumpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brake" => Ok(Self::Brake),
            "homoclinic" => Ok(Self::Homoclinic),
            "homoclinic-interior" => Ok(Self::HomoclinicInterior),
            other => Err(Error::Mode(format!("unknown bump mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for BumpMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Brake => "brake",
            Self::Homoclinic => "homoclinic",
            Self::HomoclinicInterior => "homoclinic-interior",
        })
    }
}

/// Shape parameters of the profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpSettings {
    /// Crossing (brake) or maximum (interior homoclinic) location.
    pub s_star: f64,
    /// The profile is the identity on `[½ - δ*, ∞[`.
    pub delta_star: f64,
    /// `β(0) - E` in brake mode.
    pub cap: f64,
    /// `β'` at the level crossing.
    pub wall_slope: f64,
    /// `β''` at the maximum.
    pub curvature: f64,
}

impl Default for BumpSettings {
    fn default() -> Self {
        Self {
            s_star: 1.0 / 16.0,
            delta_star: 1.0 / 8.0,
            cap: 1.0,
            wall_slope: -8.0,
            curvature: -64.0,
        }
    }
}

/// Largest eccentricity for which the unit sphere stays inside the band
/// `|½|x - εv|² - ½| <= δ*` where the profile is the identity.
pub fn max_admissible_eps(delta_star: f64) -> f64 {
    let outer = (1.0 + 2.0 * delta_star).sqrt() - 1.0;
    let inner = 1.0 - (1.0 - 2.0 * delta_star).max(0.0).sqrt();
    outer.min(inner)
}

/// `(value, first, second)` derivative data at a knot.
type Jet = (f64, f64, f64);

#[derive(Debug, Clone, PartialEq)]
struct QuinticPiece {
    a: f64,
    h: f64,
    /// Monomial coefficients in `t = (s - a) / h`.
    c: [f64; 6],
}

impl QuinticPiece {
    fn hermite(a: f64, b: f64, left: Jet, right: Jet) -> Self {
        let h = b - a;
        let c0 = left.0;
        let c1 = h * left.1;
        let c2 = h * h * left.2 / 2.0;
        let p = right.0 - c0 - c1 - c2;
        let q = h * right.1 - c1 - 2.0 * c2;
        let r = h * h * right.2 - 2.0 * c2;
        let c3 = 10.0 * p - 4.0 * q + r / 2.0;
        let c4 = -15.0 * p + 7.0 * q - r;
        let c5 = 6.0 * p - 3.0 * q + r / 2.0;
        Self { a, h, c: [c0, c1, c2, c3, c4, c5] }
    }

    fn eval(&self, s: f64) -> Jet {
        let t = (s - self.a) / self.h;
        let c = &self.c;
        let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let d = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
        let dd = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
        (v, d / self.h, dd / (self.h * self.h))
    }

    fn end(&self) -> f64 {
        self.a + self.h
    }
}

/// Samples per piece used by the invariant checks.
const CHECK_SAMPLES: usize = 4096;

/// The profile `β` for one mode and energy.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    mode: BumpMode,
    energy: f64,
    settings: BumpSettings,
    pieces: Vec<QuinticPiece>,
}

impl BumpProfile {
    /// Build the profile and verify its invariants; any violation is an error.
    pub fn build(mode: BumpMode, energy: f64, settings: BumpSettings) -> Result<Self> {
        let BumpSettings { s_star, delta_star, cap, wall_slope, curvature } = settings;
        let knee = 0.5 - delta_star;
        if !(delta_star > 0.0 && delta_star < 0.5) {
            return Err(Error::Bump(format!("δ* = {delta_star} must lie in ]0, ½[")));
        }
        if !(energy > knee) {
            return Err(Error::Bump(format!("energy {energy} must exceed ½ - δ* = {knee}")));
        }
        let identity_knot = (knee, 1.0, 0.0);
        let pieces = match mode {
            BumpMode::Brake | BumpMode::HomoclinicInterior => {
                if !(s_star > 0.0 && s_star < knee) {
                    return Err(Error::Bump(format!("s* = {s_star} must lie in ]0, ½ - δ*[")));
                }
                let (left, mid) = if mode == BumpMode::Brake {
                    if !(cap > 0.0 && wall_slope < 0.0) {
                        return Err(Error::Bump("brake profile needs a positive cap and a negative wall slope".into()));
                    }
                    ((energy + cap, 0.0, 0.0), (energy, wall_slope, 0.0))
                } else {
                    if !(cap > 0.0 && curvature < 0.0) {
                        return Err(Error::Bump("interior maximum needs a positive depth and negative curvature".into()));
                    }
                    ((energy - cap, 0.0, 0.0), (energy, 0.0, curvature))
                };
                vec![
                    QuinticPiece::hermite(0.0, s_star, left, mid),
                    QuinticPiece::hermite(s_star, knee, mid, identity_knot),
                ]
            }
            BumpMode::Homoclinic => {
                if !(wall_slope < 0.0) {
                    return Err(Error::Bump("homoclinic profile needs a negative slope at the maximum".into()));
                }
                vec![QuinticPiece::hermite(0.0, knee, (energy, wall_slope, 0.0), identity_knot)]
            }
        };
        let profile = Self { mode, energy, settings, pieces };
        profile.check_invariants()?;
        Ok(profile)
    }

    pub fn with_defaults(mode: BumpMode, energy: f64) -> Result<Self> {
        Self::build(mode, energy, BumpSettings::default())
    }

    pub fn mode(&self) -> BumpMode {
        self.mode
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn settings(&self) -> &BumpSettings {
        &self.settings
    }

    /// Start of the identity region.
    pub fn knee(&self) -> f64 {
        0.5 - self.settings.delta_star
    }

    /// Interior knots, where `β'''` may jump, including the knee.
    pub fn knots(&self) -> Vec<f64> {
        self.pieces.iter().map(|p| p.end()).collect()
    }

    /// `(β(s), β'(s), β''(s))` for `s >= 0`.
    pub fn eval(&self, s: f64) -> Jet {
        if s >= self.knee() {
            return (s, 1.0, 0.0);
        }
        let piece = self
            .pieces
            .iter()
            .find(|p| s < p.end())
            .unwrap_or_else(|| self.pieces.last().expect("profile has pieces"));
        piece.eval(s.max(0.0))
    }

    pub fn value(&self, s: f64) -> f64 {
        self.eval(s).0
    }

    /// Sub-level radius: `β(s) <= E` exactly for `s >= crossing()` on the
    /// non-identity part. Zero in the homoclinic modes.
    pub fn crossing(&self) -> f64 {
        match self.mode {
            BumpMode::Brake => self.settings.s_star,
            BumpMode::Homoclinic => 0.0,
            BumpMode::HomoclinicInterior => self.settings.s_star,
        }
    }

    fn samples(&self) -> impl Iterator<Item = (f64, Jet)> + '_ {
        self.pieces.iter().flat_map(|p| {
            (0..=CHECK_SAMPLES).map(move |k| {
                let s = p.a + p.h * k as f64 / CHECK_SAMPLES as f64;
                (s, p.eval(s))
            })
        })
    }

    fn check_invariants(&self) -> Result<()> {
        let e = self.energy;
        let s_star = self.settings.s_star;
        let knee = self.knee();
        // Continuity of the jet across every knot, including the identity knee.
        let mut knots: Vec<(f64, &QuinticPiece, Jet)> = Vec::new();
        for w in self.pieces.windows(2) {
            knots.push((w[0].end(), &w[1], w[0].eval(w[0].end())));
        }
        for (s, right, left) in knots {
            let r = right.eval(s);
            if (r.0 - left.0).abs() > 1e-12 || (r.1 - left.1).abs() > 1e-9 || (r.2 - left.2).abs() > 1e-6 {
                return Err(Error::Bump(format!("jet jumps at knot {s}")));
            }
        }
        let last = self.pieces.last().expect("profile has pieces").eval(knee);
        if (last.0 - knee).abs() > 1e-12 || (last.1 - 1.0).abs() > 1e-9 || last.2.abs() > 1e-6 {
            return Err(Error::Bump("profile does not join the identity".into()));
        }
        for (s, (v, d, _)) in self.samples() {
            if v < 0.0 {
                return Err(Error::Bump(format!("β({s}) = {v} is negative")));
            }
            let ok = match self.mode {
                BumpMode::Brake => {
                    if s < s_star {
                        v > e
                    } else if s == s_star {
                        (v - e).abs() < 1e-12 && d < 0.0
                    } else {
                        v < e
                    }
                }
                BumpMode::Homoclinic => {
                    if s == 0.0 {
                        (v - e).abs() < 1e-12 && d < 0.0
                    } else {
                        v < e
                    }
                }
                BumpMode::HomoclinicInterior => {
                    if s == s_star {
                        (v - e).abs() < 1e-12
                    } else {
                        v < e
                    }
                }
            };
            if !ok {
                return Err(Error::Bump(format!(
                    "{} profile has β({s}) = {v}, β' = {d} against energy {e}",
                    self.mode
                )));
            }
        }
        Ok(())
    }

    /// Smallest and largest sampled values of `β` on `[0, ½ - δ*]`.
    pub fn range(&self) -> (f64, f64) {
        self.samples()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, (v, _, _))| (lo.min(v), hi.max(v)))
    }
}
