//! Round-trip unitaries of the cavity layouts and their axis-angle form.
//!
//! `phi` is the relative H/V phase picked up over one full round trip, i.e.
//! each of the two plane mirrors contributes `phi / 2`. With this reading a
//! round trip of the compensated cavity is `exp(-i phi Z)`.

use std::fmt;
use std::str::FromStr;

use crate::elements::{mirror_mz, noise_element, spherical_mirror, waveplate, NoiseDelay, WaveplateAxis};
use crate::error::{Error, Result};
use crate::jones::{Unitary, C64};

/// Below this `|sin alpha|` the rotation axis is treated as undefined.
pub const DEGENERATE_SIN: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Layout {
    /// Plain ring cavity; one step is one round trip.
    Bare,
    /// Extra Z waveplate cancels the mirror Z; one round trip.
    ZCompensated,
    /// X flip in the short arm; one step is two round trips.
    CarrPurcell,
    /// X flip plus second Z; two round trips.
    PauliGroup,
    /// Soleil-Babinet noise, no control; two round trips.
    GenericFree,
    /// Soleil-Babinet noise with Z and X controls; two round trips.
    GenericBB,
}

impl Layout {
    pub const ALL: [Layout; 6] = [
        Layout::Bare,
        Layout::ZCompensated,
        Layout::CarrPurcell,
        Layout::PauliGroup,
        Layout::GenericFree,
        Layout::GenericBB,
    ];

    pub fn trips_per_step(self) -> u32 {
        match self {
            Layout::Bare | Layout::ZCompensated => 1,
            _ => 2,
        }
    }

    pub fn uses_theta(self) -> bool {
        matches!(self, Layout::GenericFree | Layout::GenericBB)
    }

    pub fn name(self) -> &'static str {
        match self {
            Layout::Bare => "bare",
            Layout::ZCompensated => "z-compensated",
            Layout::CarrPurcell => "carr-purcell",
            Layout::PauliGroup => "pauli-group",
            Layout::GenericFree => "generic-free",
            Layout::GenericBB => "generic-bb",
        }
    }
}

impl fmt::Display for Layout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Layout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Layout::ALL
            .into_iter()
            .find(|l| l.name() == key)
            .ok_or_else(|| Error::Parse(format!("unknown layout {s:?}")))
    }
}

/// Layout plus the noise delay for the generic layouts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityConfig {
    layout: Layout,
    theta: Option<NoiseDelay>,
}

impl CavityConfig {
    /// Non-generic layouts must not carry a delay; generic ones must.
    pub fn new(layout: Layout, theta: Option<NoiseDelay>) -> Result<Self> {
        if layout.uses_theta() != theta.is_some() {
            return Err(Error::InvalidConfig(if layout.uses_theta() {
                format!("layout {layout} needs a noise delay theta")
            } else {
                format!("layout {layout} does not take a noise delay")
            }));
        }
        Ok(Self { layout, theta })
    }

    /// Convenience constructor for the four fixed layouts.
    pub fn fixed(layout: Layout) -> Result<Self> {
        Self::new(layout, None)
    }

    pub fn generic(layout: Layout, theta: f64) -> Result<Self> {
        Self::new(layout, Some(NoiseDelay::new(theta)?))
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn theta(&self) -> Option<NoiseDelay> {
        self.theta
    }

    pub fn trips_per_step(&self) -> u32 {
        self.layout.trips_per_step()
    }
}

fn x() -> Unitary {
    waveplate(WaveplateAxis::X)
}

fn z() -> Unitary {
    waveplate(WaveplateAxis::Z)
}

/// Unitary of the first round trip of a step. For the double-trip layouts
/// both round trips of a step are identical, so `step = half^2`.
pub fn round_trip_unitary(cfg: &CavityConfig, phi: f64) -> Unitary {
    let m = mirror_mz(0.5 * phi);
    match cfg.layout {
        Layout::Bare => spherical_mirror() * m * m,
        Layout::ZCompensated => z() * spherical_mirror() * m * m,
        Layout::CarrPurcell | Layout::PauliGroup => z() * m * x() * m,
        Layout::GenericFree => {
            let n = noise_element(0.5 * phi, cfg.theta.unwrap_or_default());
            n * n
        }
        Layout::GenericBB => {
            let n = noise_element(0.5 * phi, cfg.theta.unwrap_or_default());
            z() * n * x() * n
        }
    }
}

/// Unitary of one step: one round trip for Bare/ZCompensated, two otherwise.
pub fn step_unitary(cfg: &CavityConfig, phi: f64) -> Unitary {
    let h = round_trip_unitary(cfg, phi);
    match cfg.trips_per_step() {
        1 => h,
        _ => h * h,
    }
}

/// `U = exp(-i alpha s.sigma)` up to global phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisAngle {
    pub alpha: f64,
    pub s: [f64; 3],
}

impl AxisAngle {
    pub fn unitary(&self) -> Unitary {
        Unitary::exp_rotation(self.alpha, self.s)
    }
}

/// Canonical decomposition with `alpha` in `[0, pi/2]`; projectively,
/// `(alpha, s)` and `(pi - alpha, -s)` are the same operator. The identity
/// maps to `alpha = 0` with axis `(0, 0, 1)`.
pub fn axis_angle(u: &Unitary) -> AxisAngle {
    let m = u.matrix();
    let root = m.det().sqrt();
    let mut su = m.scale(C64::new(1.0, 0.0) / root);
    if su.trace().re < 0.0 {
        su = -su;
    }
    let c = 0.5 * su.trace().re;
    // sin(a) s_k = -Im Tr(sigma_k su) / 2
    let sx = -0.5 * (su.get(0, 1) + su.get(1, 0)).im;
    let sy = -0.5 * (C64::new(0.0, 1.0) * (su.get(0, 1) - su.get(1, 0))).im;
    let sz = -0.5 * (su.get(0, 0) - su.get(1, 1)).im;
    let sn = (sx * sx + sy * sy + sz * sz).sqrt();
    if sn <= DEGENERATE_SIN {
        return AxisAngle {
            alpha: 0.0,
            s: [0.0, 0.0, 1.0],
        };
    }
    AxisAngle {
        alpha: sn.atan2(c),
        s: [sx / sn, sy / sn, sz / sn],
    }
}

/// Rotation axis from a closed form; `degenerate` when `sin(alpha)` vanishes
/// and the fallback `(0, 0, 1)` is returned.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationAxis {
    pub s: [f64; 3],
    pub degenerate: bool,
}

fn axis_from(num: [f64; 3], denom: f64) -> RotationAxis {
    if denom.abs() <= DEGENERATE_SIN {
        return RotationAxis {
            s: [0.0, 0.0, 1.0],
            degenerate: true,
        };
    }
    RotationAxis {
        s: [num[0] / denom, num[1] / denom, num[2] / denom],
        degenerate: false,
    }
}

/// Per-round-trip rotation angle of the free generic cavity,
/// `sin(alpha/2) = sin(phi/2) cos(theta/2)`, principal branch.
pub fn alpha_fe(phi: f64, theta: f64) -> f64 {
    2.0 * ((0.5 * phi).sin() * (0.5 * theta).cos()).clamp(-1.0, 1.0).asin()
}

pub fn s_fe(phi: f64, theta: f64) -> RotationAxis {
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let num = [st * (cp - 1.0), st * sp, (1.0 + ct) * sp];
    axis_from(num, 2.0 * alpha_fe(phi, theta).sin())
}

/// Per-round-trip angle with the controls, `cos(alpha) = -sin(phi) sin(theta) / 2`.
pub fn alpha_bb(phi: f64, theta: f64) -> f64 {
    (-0.5 * phi.sin() * theta.sin()).clamp(-1.0, 1.0).acos()
}

pub fn s_bb(phi: f64, theta: f64) -> RotationAxis {
    let sp = phi.sin();
    let st = theta.sin();
    let h2 = (0.5 * theta).sin().powi(2);
    let p2 = (0.5 * phi).sin().powi(2);
    let num = [-sp * h2, 1.0 - 2.0 * h2 * p2, -st * p2];
    axis_from(num, alpha_bb(phi, theta).sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jones::{Mat2, Pauli};
    use std::f64::consts::PI;

    fn minus_identity() -> Mat2 {
        -Mat2::identity()
    }

    #[test]
    fn decoupling_layouts_give_minus_identity() {
        for k in 0..100 {
            let phi = -PI + 2.0 * PI * k as f64 / 99.0;
            for l in [Layout::CarrPurcell, Layout::PauliGroup] {
                let u = step_unitary(&CavityConfig::fixed(l).unwrap(), phi);
                assert!(u.matrix().max_abs_diff(&minus_identity()) <= 1e-12, "{l} at {phi}");
            }
        }
    }

    #[test]
    fn bare_and_compensated_forms() {
        let phi = 0.3;
        let bare = step_unitary(&CavityConfig::fixed(Layout::Bare).unwrap(), phi);
        let zc = step_unitary(&CavityConfig::fixed(Layout::ZCompensated).unwrap(), phi);
        let rot = Unitary::exp_rotation(phi, [0.0, 0.0, 1.0]);
        assert!(zc.projective_distance(&rot) <= 1e-12);
        let zrot = crate::jones::pauli(Pauli::Z) * rot;
        assert!(bare.projective_distance(&zrot) <= 1e-12);
    }

    #[test]
    fn generic_free_at_zero_theta_is_two_compensated_trips() {
        let phi = 0.21;
        let u = step_unitary(&CavityConfig::generic(Layout::GenericFree, 0.0).unwrap(), phi);
        let expect = Unitary::exp_rotation(2.0 * phi, [0.0, 0.0, 1.0]);
        assert!(u.projective_distance(&expect) <= 1e-12);
    }

    #[test]
    fn generic_bb_at_zero_theta_is_carr_purcell() {
        let phi = -0.7;
        let u = step_unitary(&CavityConfig::generic(Layout::GenericBB, 0.0).unwrap(), phi);
        assert!(u.matrix().max_abs_diff(&minus_identity()) <= 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(CavityConfig::new(Layout::GenericBB, None).is_err());
        assert!(CavityConfig::new(Layout::Bare, Some(NoiseDelay::zero())).is_err());
        assert!(CavityConfig::fixed(Layout::PauliGroup).is_ok());
    }

    #[test]
    fn layout_names_round_trip() {
        for l in Layout::ALL {
            assert_eq!(l.name().parse::<Layout>().unwrap(), l);
        }
        assert_eq!("Generic_BB".parse::<Layout>().unwrap(), Layout::GenericBB);
        assert!("ring".parse::<Layout>().is_err());
    }

    #[test]
    fn axis_angle_examples() {
        let id = axis_angle(&Unitary::identity());
        assert_eq!(id.alpha, 0.0);
        assert_eq!(id.s, [0.0, 0.0, 1.0]);

        let a = axis_angle(&Unitary::exp_rotation(0.3, [0.0, 0.0, 1.0]));
        assert!((a.alpha - 0.3).abs() < 1e-12);
        assert!((a.s[2] - 1.0).abs() < 1e-12);

        let minus = axis_angle(&Unitary::identity().with_phase(PI));
        assert_eq!(minus.alpha, 0.0);
    }

    #[test]
    fn axis_angle_reassembles() {
        for (alpha, s) in [
            (0.2, [1.0, 0.0, 0.0]),
            (1.4, [0.3, -0.4, 0.866]),
            (2.9, [-0.6, 0.0, 0.8]),
            (PI / 2.0, [0.0, 1.0, 0.0]),
        ] {
            let u = Unitary::exp_rotation(alpha, s).with_phase(0.77);
            let aa = axis_angle(&u);
            assert!(aa.alpha >= 0.0 && aa.alpha <= PI / 2.0 + 1e-12);
            assert!(aa.unitary().projective_distance(&u) <= 1e-10);
        }
    }

    #[test]
    fn closed_forms_at_special_points() {
        assert!((alpha_fe(0.4, 0.0) - 0.4).abs() < 1e-15);
        assert_eq!(alpha_fe(0.0, 1.1), 0.0);
        assert!(s_fe(0.0, 1.1).degenerate);
        assert!((alpha_bb(0.4, 0.0) - PI / 2.0).abs() < 1e-15);
        assert!((alpha_bb(0.0, 0.9) - PI / 2.0).abs() < 1e-15);
        let s = s_bb(0.4, 0.0);
        assert!(!s.degenerate);
        assert!((s.s[1] - 1.0).abs() < 1e-15 && s.s[0].abs() < 1e-15 && s.s[2].abs() < 1e-15);
    }

    #[test]
    fn closed_forms_match_round_trip_matrices() {
        let (phi, theta) = (0.2, 1.0);
        let fe = CavityConfig::generic(Layout::GenericFree, theta).unwrap();
        let cf = Unitary::exp_rotation(alpha_fe(phi, theta), s_fe(phi, theta).s);
        assert!(cf.projective_distance(&round_trip_unitary(&fe, phi)) <= 1e-12);

        let bb = CavityConfig::generic(Layout::GenericBB, theta).unwrap();
        let cf = Unitary::exp_rotation(alpha_bb(phi, theta), s_bb(phi, theta).s);
        assert!(cf.projective_distance(&round_trip_unitary(&bb, phi)) <= 1e-12);
    }
}
