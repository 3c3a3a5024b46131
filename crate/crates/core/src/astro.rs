//! Two-body orbital mechanics and the co-elliptic rendezvous cost model.
//!
//! Angles cross this module's public boundary in degrees and are converted to
//! radians internally. Lengths are km, speeds km/s, times s.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earth gravitational parameter, km^3/s^2.
pub const MU_EARTH: f64 = 398_600.441_8;
/// Equatorial Earth radius, km.
pub const EARTH_RADIUS: f64 = 6_378.137;
/// Upper bound (exclusive) on eccentricity for every mission body.
pub const MAX_MISSION_ECC: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AstroError {
    #[error("semi-major axis must be positive, got {0} km")]
    NonPositiveSma(f64),
    #[error("radius {0} km is below the Earth surface")]
    BelowSurface(f64),
    #[error("eccentricity {0} outside [0, {MAX_MISSION_ECC})")]
    Eccentricity(f64),
    #[error("speed must be non-negative, got {0} km/s")]
    NegativeSpeed(f64),
    #[error("plane-change angle {0} deg outside [0, 180]")]
    AngleOutOfRange(f64),
    #[error("no relative drift between identical orbits with a nonzero phase gap")]
    NoDrift,
    #[error("non-finite element value")]
    NonFinite,
}

pub type Result<T> = std::result::Result<T, AstroError>;

/// Keplerian state of a mission body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    /// Semi-major axis from Earth center, km.
    pub sma: f64,
    pub ecc: f64,
    /// Inclination, deg.
    pub inc: f64,
    /// Right ascension of the ascending node, deg.
    pub raan: f64,
    /// Argument of periapsis, deg.
    pub argp: f64,
    /// True anomaly at `epoch`, deg.
    pub anomaly: f64,
    /// Reference time of `anomaly`, s since mission start.
    pub epoch: f64,
}

impl OrbitalElements {
    /// Validated constructor; angles are wrapped into [0, 360).
    pub fn new(
        sma: f64,
        ecc: f64,
        inc: f64,
        raan: f64,
        argp: f64,
        anomaly: f64,
        epoch: f64,
    ) -> Result<Self> {
        let el = Self {
            sma,
            ecc,
            inc,
            raan,
            argp,
            anomaly,
            epoch,
        };
        el.validate()?;
        Ok(el.normalized())
    }

    /// Near-circular orbit at `altitude` km above the surface.
    pub fn circular(altitude: f64, inc: f64, raan: f64, arg_lat: f64) -> Result<Self> {
        Self::new(EARTH_RADIUS + altitude, 0.0, inc, raan, 0.0, arg_lat, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            self.sma,
            self.ecc,
            self.inc,
            self.raan,
            self.argp,
            self.anomaly,
            self.epoch,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err(AstroError::NonFinite);
        }
        if self.sma <= EARTH_RADIUS {
            return Err(AstroError::BelowSurface(self.sma));
        }
        if !(0.0..MAX_MISSION_ECC).contains(&self.ecc) {
            return Err(AstroError::Eccentricity(self.ecc));
        }
        Ok(())
    }

    pub fn normalized(mut self) -> Self {
        self.inc = wrap_deg(self.inc);
        self.raan = wrap_deg(self.raan);
        self.argp = wrap_deg(self.argp);
        self.anomaly = wrap_deg(self.anomaly);
        self
    }

    pub fn altitude(&self) -> f64 {
        self.sma - EARTH_RADIUS
    }

    /// Mean motion, rad/s.
    pub fn mean_motion(&self) -> f64 {
        mean_motion(self.sma)
    }

    /// Two-body propagation of the anomaly to time `t` (s since mission start).
    pub fn propagated(&self, t: f64) -> Self {
        let m0 = true_to_mean(self.anomaly.to_radians(), self.ecc);
        let m = (m0 + self.mean_motion() * (t - self.epoch)).rem_euclid(TAU);
        let nu = mean_to_true(m, self.ecc);
        Self {
            anomaly: wrap_deg(nu.to_degrees()),
            epoch: t,
            ..*self
        }
    }

    /// Argument of latitude (argp + true anomaly) at time `t`, deg in [0, 360).
    pub fn arg_latitude_at(&self, t: f64) -> f64 {
        let p = self.propagated(t);
        wrap_deg(p.argp + p.anomaly)
    }

    /// Unit orbit normal in the inertial frame.
    fn normal(&self) -> [f64; 3] {
        let (si, ci) = self.inc.to_radians().sin_cos();
        let (so, co) = self.raan.to_radians().sin_cos();
        [si * so, -si * co, ci]
    }
}

/// Wraps an angle in degrees into [0, 360).
pub fn wrap_deg(angle: f64) -> f64 {
    let w = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

/// Wraps an angle in degrees into [-180, 180).
pub fn wrap_deg_signed(angle: f64) -> f64 {
    let w = wrap_deg(angle + 180.0) - 180.0;
    if w >= 180.0 {
        -180.0
    } else {
        w
    }
}

pub fn mean_motion(sma: f64) -> f64 {
    (MU_EARTH / (sma * sma * sma)).sqrt()
}

pub fn circular_velocity(radius: f64) -> f64 {
    (MU_EARTH / radius).sqrt()
}

pub fn period_of_sma(sma: f64) -> Result<f64> {
    if !(sma > 0.0) {
        return Err(AstroError::NonPositiveSma(sma));
    }
    Ok(TAU * (sma * sma * sma / MU_EARTH).sqrt())
}

/// Keplerian period, s.
pub fn orbital_period(elements: &OrbitalElements) -> Result<f64> {
    period_of_sma(elements.sma)
}

fn true_to_mean(nu: f64, ecc: f64) -> f64 {
    if ecc == 0.0 {
        return nu.rem_euclid(TAU);
    }
    let e_anom = 2.0 * (((1.0 - ecc) / (1.0 + ecc)).sqrt() * (nu / 2.0).tan()).atan();
    (e_anom - ecc * e_anom.sin()).rem_euclid(TAU)
}

fn mean_to_true(m: f64, ecc: f64) -> f64 {
    if ecc == 0.0 {
        return m;
    }
    let mut e_anom = m;
    for _ in 0..12 {
        let f = e_anom - ecc * e_anom.sin() - m;
        let step = f / (1.0 - ecc * e_anom.cos());
        e_anom -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let nu = 2.0 * (((1.0 + ecc) / (1.0 - ecc)).sqrt() * (e_anom / 2.0).tan()).atan();
    nu.rem_euclid(TAU)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hohmann {
    pub dv1: f64,
    pub dv2: f64,
    pub duration: f64,
}

impl Hohmann {
    pub fn total_dv(&self) -> f64 {
        self.dv1 + self.dv2
    }
}

/// Two-impulse transfer between circular orbits of radii `r1` and `r2`.
///
/// Identical radii give an all-zero transfer.
pub fn hohmann_transfer(r1: f64, r2: f64) -> Result<Hohmann> {
    for r in [r1, r2] {
        if !(r > EARTH_RADIUS) {
            return Err(AstroError::BelowSurface(r));
        }
    }
    if r1 == r2 {
        return Ok(Hohmann {
            dv1: 0.0,
            dv2: 0.0,
            duration: 0.0,
        });
    }
    let a_t = 0.5 * (r1 + r2);
    let v1 = circular_velocity(r1);
    let v2 = circular_velocity(r2);
    let vp = (MU_EARTH * (2.0 / r1 - 1.0 / a_t)).sqrt();
    let va = (MU_EARTH * (2.0 / r2 - 1.0 / a_t)).sqrt();
    // v² differences taken algebraically: subtracting two ~7.5 km/s speeds
    // loses digits when the radii are close.
    let gap = r2 - r1;
    let dsq1 = MU_EARTH * gap / (2.0 * r1 * a_t);
    let dsq2 = MU_EARTH * gap / (2.0 * r2 * a_t);
    Ok(Hohmann {
        dv1: (dsq1 / (vp + v1)).abs(),
        dv2: (dsq2 / (v2 + va)).abs(),
        duration: PI * (a_t * a_t * a_t / MU_EARTH).sqrt(),
    })
}

/// Single-impulse plane change of `delta_angle` degrees at speed `v`.
pub fn plane_change_dv(v: f64, delta_angle: f64) -> Result<f64> {
    if v < 0.0 {
        return Err(AstroError::NegativeSpeed(v));
    }
    if !(0.0..=180.0).contains(&delta_angle) {
        return Err(AstroError::AngleOutOfRange(delta_angle));
    }
    Ok(2.0 * v * (delta_angle.to_radians() / 2.0).sin())
}

/// Coast time for two circular orbits to close `phase_gap` degrees of
/// along-track separation through their mean-motion difference.
pub fn phasing_wait(chaser_sma: f64, offset_sma: f64, phase_gap: f64) -> Result<f64> {
    if phase_gap == 0.0 {
        return Ok(0.0);
    }
    let drift = (mean_motion(chaser_sma) - mean_motion(offset_sma)).abs();
    if drift == 0.0 {
        return Err(AstroError::NoDrift);
    }
    Ok(phase_gap.abs().to_radians() / drift)
}

/// Impulse to enter a passive safety ellipse of semi-major axis `ellipse_sma`
/// km around a target in a circular orbit, and the time spent on it (one
/// revolution).
pub fn safety_ellipse_injection(target_sma: f64, ellipse_sma: f64) -> Result<(f64, f64)> {
    if !(target_sma > EARTH_RADIUS) {
        return Err(AstroError::BelowSurface(target_sma));
    }
    let n = mean_motion(target_sma);
    Ok((2.0 * n * ellipse_sma, TAU / n))
}

/// Angle between the orbit normals of two element sets, deg in [0, 180].
pub fn plane_separation(a: &OrbitalElements, b: &OrbitalElements) -> f64 {
    let na = a.normal();
    let nb = b.normal();
    let dot = na[0] * nb[0] + na[1] * nb[1] + na[2] * nb[2];
    let cross = [
        na[1] * nb[2] - na[2] * nb[1],
        na[2] * nb[0] - na[0] * nb[2],
        na[0] * nb[1] - na[1] * nb[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    // atan2 stays accurate near zero separation where acos does not
    sin.atan2(dot).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegKind {
    PlaneChange,
    Hohmann1,
    PhasingCoast,
    Hohmann2,
    ClosingBurn,
    SafetyEllipse,
    RefuelService,
}

impl LegKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LegKind::PlaneChange => "plane-change",
            LegKind::Hohmann1 => "hohmann-1",
            LegKind::PhasingCoast => "phasing-coast",
            LegKind::Hohmann2 => "hohmann-2",
            LegKind::ClosingBurn => "closing-burn",
            LegKind::SafetyEllipse => "safety-ellipse",
            LegKind::RefuelService => "refuel-service",
        }
    }
}

impl std::fmt::Display for LegKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub label: LegKind,
    /// km/s
    pub dv: f64,
    /// s
    pub duration: f64,
}

/// Itemized cost of one transfer. Totals are always the in-order leg sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferPlan {
    legs: Vec<Leg>,
    total_dv: f64,
    total_time: f64,
}

impl TransferPlan {
    pub fn from_legs(legs: Vec<Leg>) -> Self {
        let (total_dv, total_time) = sum_legs(&legs);
        Self {
            legs,
            total_dv,
            total_time,
        }
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn total_dv(&self) -> f64 {
        self.total_dv
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn push(&mut self, leg: Leg) {
        self.legs.push(leg);
        let (dv, t) = sum_legs(&self.legs);
        self.total_dv = dv;
        self.total_time = t;
    }

    pub fn leg(&self, kind: LegKind) -> Option<&Leg> {
        self.legs.iter().find(|l| l.label == kind)
    }
}

pub(crate) fn sum_legs(legs: &[Leg]) -> (f64, f64) {
    legs.iter()
        .fold((0.0, 0.0), |(dv, t), l| (dv + l.dv, t + l.duration))
}

/// Tunables of the co-elliptic rendezvous sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RendezvousModel {
    /// Altitude of the co-elliptic phasing orbit below the target, km.
    pub coelliptic_offset: f64,
    /// Fraction of the along-track gap closed by coasting in the offset orbit.
    pub phasing_fraction: f64,
    /// Fixed closing burn from the 1 km gate to ellipse entry, km/s.
    pub closing_dv: f64,
    /// Duration of the closing burn, in target orbital periods.
    pub closing_periods: f64,
    /// Safety-ellipse semi-major axis, km.
    pub safety_ellipse_sma: f64,
}

impl Default for RendezvousModel {
    fn default() -> Self {
        Self {
            coelliptic_offset: 100.0,
            phasing_fraction: 0.75,
            closing_dv: 0.003,
            closing_periods: 0.1,
            safety_ellipse_sma: 1.0,
        }
    }
}

/// Along-track gap from the chaser forward to the target at the chaser's
/// epoch, deg in [0, 360).
pub fn phase_gap(chaser: &OrbitalElements, target: &OrbitalElements) -> f64 {
    let t = chaser.epoch;
    wrap_deg(target.arg_latitude_at(t) - chaser.arg_latitude_at(t))
}

// Gaps below this are treated as already phased.
const PHASED_EPS_DEG: f64 = 1e-9;

/// Legs of the co-elliptic sequence from `chaser` (whose epoch is "now") to
/// `target`, in fixed order.
///
/// Both element sets must satisfy [`OrbitalElements::validate`].
pub fn rendezvous_legs(
    chaser: &OrbitalElements,
    target: &OrbitalElements,
    model: &RendezvousModel,
) -> [Leg; 6] {
    let rc = chaser.sma;
    let rt = target.sma;

    let angle = plane_separation(chaser, target);
    let plane_dv = 2.0 * circular_velocity(rc.max(rt)) * (angle.to_radians() / 2.0).sin();

    let gap0 = phase_gap(chaser, target);
    let (h1, coast, h2) = if gap0 < PHASED_EPS_DEG || 360.0 - gap0 < PHASED_EPS_DEG {
        let h = hohmann_unchecked(rc, rt);
        (h, 0.0, Hohmann::ZERO)
    } else {
        let r_off = rt - model.coelliptic_offset;
        let h1 = hohmann_unchecked(rc, r_off);
        // the chaser sweeps half a revolution on a nondegenerate transfer
        let chaser_sweep = if h1.duration > 0.0 { PI } else { 0.0 };
        let target_sweep = mean_motion(rt) * h1.duration;
        let gap_ins = wrap_deg(gap0 + (target_sweep - chaser_sweep).to_degrees());
        let drift = (mean_motion(r_off) - mean_motion(rt)).abs();
        let coast = if gap_ins == 0.0 || drift == 0.0 {
            0.0
        } else {
            model.phasing_fraction * gap_ins.to_radians() / drift
        };
        (h1, coast, hohmann_unchecked(r_off, rt))
    };

    let n_t = mean_motion(rt);
    let period_t = TAU / n_t;
    [
        Leg {
            label: LegKind::PlaneChange,
            dv: plane_dv,
            duration: 0.0,
        },
        Leg {
            label: LegKind::Hohmann1,
            dv: h1.total_dv(),
            duration: h1.duration,
        },
        Leg {
            label: LegKind::PhasingCoast,
            dv: 0.0,
            duration: coast,
        },
        Leg {
            label: LegKind::Hohmann2,
            dv: h2.total_dv(),
            duration: h2.duration,
        },
        Leg {
            label: LegKind::ClosingBurn,
            dv: model.closing_dv,
            duration: model.closing_periods * period_t,
        },
        Leg {
            label: LegKind::SafetyEllipse,
            dv: 2.0 * n_t * model.safety_ellipse_sma,
            duration: period_t,
        },
    ]
}

impl Hohmann {
    const ZERO: Hohmann = Hohmann {
        dv1: 0.0,
        dv2: 0.0,
        duration: 0.0,
    };
}

fn hohmann_unchecked(r1: f64, r2: f64) -> Hohmann {
    // radii come from validated elements
    hohmann_transfer(r1, r2).unwrap_or(Hohmann::ZERO)
}

/// Co-elliptic rendezvous: plane change, Hohmann into the offset orbit,
/// phasing coast, Hohmann onto the target orbit, closing burn and
/// safety-ellipse injection.
pub fn coelliptic_rendezvous_plan(
    chaser: &OrbitalElements,
    target: &OrbitalElements,
    model: &RendezvousModel,
) -> TransferPlan {
    TransferPlan::from_legs(rendezvous_legs(chaser, target, model).to_vec())
}
