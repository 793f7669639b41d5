//! Second-order analytic decoherence model.
//!
//! The round-trip rotation `exp(-i alpha(phi) s(phi).sigma)` is approximated
//! by a frozen axis `s(phi0)` and a quadratic angle
//! `alpha0 + a1 (phi - phi0) + a2 (phi - phi0)^2 / 2`. The Gaussian average of
//! `exp(2 i m alpha)` over `m` round trips then has modulus `D` and phase
//! `2 m gamma`, which gives the Bloch map `V = D O + (1 - D) s s^T`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{Matrix3, Vector3};

use crate::cavity::{alpha_bb, alpha_fe, s_bb, s_fe, CavityConfig, Layout, RotationAxis};
use crate::error::{Error, Result};
use crate::jones::{fidelity_of_bloch, purity_of_bloch, BlochVector};

/// Finite-difference step for the angle derivatives.
pub const FD_STEP: f64 = 1e-4;

/// Expansion of the per-round-trip rotation around `phi0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionCoeffs {
    pub alpha0: f64,
    pub dalpha0: f64,
    pub ddalpha0: f64,
    pub s0_axis: [f64; 3],
    /// The axis is undefined at `phi0`; `s0_axis` is the one-sided limit
    /// `s(phi0 + FD_STEP)`.
    pub degenerate: bool,
    /// Round trips per step of the layout the coefficients came from.
    pub trips_per_step: u32,
}

impl ExpansionCoeffs {
    pub fn axis(&self) -> Vector3<f64> {
        Vector3::from(self.s0_axis)
    }

    fn trips(&self, n: usize) -> f64 {
        n as f64 * self.trips_per_step as f64
    }
}

fn angle_and_axis(cfg: &CavityConfig, phi: f64) -> (f64, RotationAxis) {
    let z_axis = RotationAxis {
        s: [0.0, 0.0, 1.0],
        degenerate: false,
    };
    let theta = cfg.theta().map(|t| t.value()).unwrap_or(0.0);
    match cfg.layout() {
        // Z exp(-i phi Z) = i exp(-i (phi + pi/2) Z)
        Layout::Bare => (phi + FRAC_PI_2, z_axis),
        Layout::ZCompensated => (phi, z_axis),
        Layout::CarrPurcell | Layout::PauliGroup => (alpha_bb(phi, 0.0), s_bb(phi, 0.0)),
        Layout::GenericFree => (alpha_fe(phi, theta), s_fe(phi, theta)),
        Layout::GenericBB => (alpha_bb(phi, theta), s_bb(phi, theta)),
    }
}

/// `alpha0`, centered finite-difference derivatives and the axis at `phi0`.
pub fn expansion_coeffs(cfg: &CavityConfig, phi0: f64) -> Result<ExpansionCoeffs> {
    if !phi0.is_finite() {
        return Err(Error::InvalidConfig(format!("phi0 must be finite, got {phi0}")));
    }
    let h = FD_STEP;
    let (a0, axis) = angle_and_axis(cfg, phi0);
    let (ap, axis_p) = angle_and_axis(cfg, phi0 + h);
    let (am, _) = angle_and_axis(cfg, phi0 - h);
    let (s0_axis, degenerate) = if axis.degenerate {
        (axis_p.s, true)
    } else {
        (axis.s, false)
    };
    Ok(ExpansionCoeffs {
        alpha0: a0,
        dalpha0: (ap - am) / (2.0 * h),
        ddalpha0: (ap - 2.0 * a0 + am) / (h * h),
        s0_axis,
        degenerate,
        trips_per_step: cfg.trips_per_step(),
    })
}

/// Modulus of the averaged phase factor after `n` steps.
pub fn decoherence_factor(n: usize, c: &ExpansionCoeffs, sigma_phi: f64) -> f64 {
    let m = c.trips(n);
    let s2 = sigma_phi * sigma_phi;
    let q = 1.0 + m * m * c.ddalpha0 * c.ddalpha0 * s2 * s2;
    q.powf(-0.25) * (-m * m * c.dalpha0 * c.dalpha0 * s2 / q).exp()
}

/// Effective rotation angle per round trip after `n` steps.
pub fn gamma_n(n: usize, c: &ExpansionCoeffs, sigma_phi: f64) -> f64 {
    let s2 = sigma_phi * sigma_phi;
    let m = c.trips(n);
    if m == 0.0 {
        // limit of atan(m a2 s^2) / (4 m)
        return c.alpha0 + 0.25 * c.ddalpha0 * s2;
    }
    let q = 1.0 + m * m * c.ddalpha0 * c.ddalpha0 * s2 * s2;
    c.alpha0 - 0.5 * m * m * c.ddalpha0 * c.dalpha0 * c.dalpha0 * s2 * s2 / q
        + (m * c.ddalpha0 * s2).atan() / (4.0 * m)
}

/// Right-handed rotation by `angle` about the unit vector `s`.
pub fn rodrigues(s: &Vector3<f64>, angle: f64) -> Matrix3<f64> {
    let (sn, cs) = angle.sin_cos();
    let cross = Matrix3::new(0.0, -s.z, s.y, s.z, 0.0, -s.x, -s.y, s.x, 0.0);
    Matrix3::identity() * cs + s * s.transpose() * (1.0 - cs) + cross * sn
}

/// Rotation `O` by `2 m gamma_n` about the frozen axis.
pub fn rotation_matrix(n: usize, c: &ExpansionCoeffs, sigma_phi: f64) -> Matrix3<f64> {
    rodrigues(&c.axis(), 2.0 * c.trips(n) * gamma_n(n, c, sigma_phi))
}

/// `V = D O + (1 - D) s s^T`.
pub fn v_matrix(n: usize, c: &ExpansionCoeffs, sigma_phi: f64) -> Matrix3<f64> {
    let d = decoherence_factor(n, c, sigma_phi);
    let s = c.axis();
    rotation_matrix(n, c, sigma_phi) * d + s * s.transpose() * (1.0 - d)
}

fn check_pure(p: &BlochVector) -> Result<()> {
    if (p.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "analytic predictions need a pure input, |P| = {}",
            p.norm()
        )));
    }
    Ok(())
}

/// `(purity, fidelity)` of `V p_in`.
pub fn analytic_purity_fidelity(
    n: usize,
    c: &ExpansionCoeffs,
    sigma_phi: f64,
    p_in: &BlochVector,
) -> Result<(f64, f64)> {
    check_pure(p_in)?;
    let out = BlochVector::from_vector(&(v_matrix(n, c, sigma_phi) * p_in.to_vector()));
    Ok((purity_of_bloch(&out), fidelity_of_bloch(p_in, &out)))
}

/// Large-`n` limit shared by purity and fidelity, `(1 + (p.s)^2) / 2`.
pub fn asymptotic_purity(c: &ExpansionCoeffs, p_in: &BlochVector) -> f64 {
    let ps = p_in.to_vector().dot(&c.axis());
    0.5 * (1.0 + ps * ps)
}

/// Leading small-`n` infidelity `m^2 (a1 sigma)^2 (1 - (p.s)^2) / 2`.
pub fn small_n_infidelity(n: usize, c: &ExpansionCoeffs, sigma_phi: f64, p_in: &BlochVector) -> f64 {
    let m = c.trips(n);
    let ps = p_in.to_vector().dot(&c.axis());
    0.5 * m * m * (c.dalpha0 * sigma_phi).powi(2) * (1.0 - ps * ps)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticRecord {
    pub n: usize,
    pub d: f64,
    pub gamma: f64,
    pub v: Matrix3<f64>,
    pub purity: f64,
    pub fidelity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticPrediction {
    pub coeffs: ExpansionCoeffs,
    pub sigma_phi: f64,
    pub input: BlochVector,
    pub records: Vec<AnalyticRecord>,
}

/// Predictions for steps `0..=n_max`.
pub fn predict(
    c: &ExpansionCoeffs,
    sigma_phi: f64,
    p_in: &BlochVector,
    n_max: usize,
) -> Result<AnalyticPrediction> {
    check_pure(p_in)?;
    let records = (0..=n_max)
        .map(|n| {
            let v = v_matrix(n, c, sigma_phi);
            let out = BlochVector::from_vector(&(v * p_in.to_vector()));
            AnalyticRecord {
                n,
                d: decoherence_factor(n, c, sigma_phi),
                gamma: gamma_n(n, c, sigma_phi),
                v,
                purity: purity_of_bloch(&out),
                fidelity: fidelity_of_bloch(p_in, &out),
            }
        })
        .collect();
    Ok(AnalyticPrediction {
        coeffs: *c,
        sigma_phi,
        input: *p_in,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn coeffs(a0: f64, a1: f64, a2: f64) -> ExpansionCoeffs {
        ExpansionCoeffs {
            alpha0: a0,
            dalpha0: a1,
            ddalpha0: a2,
            s0_axis: [0.0, 0.0, 1.0],
            degenerate: false,
            trips_per_step: 1,
        }
    }

    #[test]
    fn decoherence_factor_values() {
        let c = coeffs(0.3, 1.0, 0.0);
        assert_eq!(decoherence_factor(0, &c, 0.0839), 1.0);
        assert_eq!(decoherence_factor(7, &coeffs(0.3, 0.0, 0.0), 0.0839), 1.0);
        let d = decoherence_factor(5, &c, 0.0839);
        assert!((d - (-25.0f64 * 0.00703921).exp()).abs() < 1e-15);
        assert!((d - 0.838634).abs() < 1e-6);
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_n(4, &coeffs(0.2, 1.0, 0.0), 0.0839), 0.2);
        let (a0, a1, a2, s) = (0.1, 1.0, 0.5, 0.0839f64);
        let m = 3.0f64;
        let q = 1.0 + m * m * a2 * a2 * s.powi(4);
        let expect = a0 - 0.5 * m * m * a2 * a1 * a1 * s.powi(4) / q + (m * a2 * s * s).atan() / (4.0 * m);
        assert!((gamma_n(3, &coeffs(a0, a1, a2), s) - expect).abs() < 1e-15);
    }

    #[test]
    fn gamma_converges_for_large_n() {
        // gamma -> alpha0 - a1^2 / (2 a2) for m -> infinity
        let c = coeffs(0.1, 1.0, 0.5);
        let lim = 0.1 - 1.0 / (2.0 * 0.5);
        let errs: Vec<f64> = [10, 100, 1000, 10_000]
            .iter()
            .map(|&n| (gamma_n(n, &c, 0.0839) - lim).abs())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] < w[0]));
        assert!(errs[3] < 1e-3);
    }

    #[test]
    fn v_matrix_limits() {
        let c = coeffs(0.0, 0.0, 0.0);
        assert!((v_matrix(3, &c, 0.1) - Matrix3::identity()).norm() < 1e-15);
        let c = coeffs(0.4, 3.0, 0.0);
        let v = v_matrix(1000, &c, 0.3);
        let s = c.axis();
        assert!((v - s * s.transpose()).norm() < 1e-12);
    }

    #[test]
    fn rotation_is_proper_orthogonal() {
        let mut c = coeffs(0.37, 0.8, -0.4);
        c.s0_axis = [0.48, -0.6, 0.64];
        for n in [1, 5, 17] {
            let o = rotation_matrix(n, &c, 0.0839);
            assert!((o.transpose() * o - Matrix3::identity()).norm() < 1e-12);
            assert!((o.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rodrigues_is_right_handed() {
        let r = rodrigues(&Vector3::z(), PI / 2.0);
        assert!((r * Vector3::x() - Vector3::y()).norm() < 1e-15);
    }

    #[test]
    fn pointer_states_are_preserved() {
        let mut c = coeffs(0.37, 0.8, -0.4);
        c.s0_axis = [0.48, -0.6, 0.64];
        for sign in [1.0, -1.0] {
            let p = BlochVector::new(0.48 * sign, -0.6 * sign, 0.64 * sign);
            for n in [1, 10, 100] {
                let (pu, fi) = analytic_purity_fidelity(n, &c, 0.0839, &p).unwrap();
                assert!((pu - 1.0).abs() < 1e-12 && (fi - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn expanded_purity_and_fidelity_forms() {
        let mut c = coeffs(0.37, 0.8, -0.4);
        c.s0_axis = [0.48, -0.6, 0.64];
        let s = c.axis();
        let p = BlochVector::new(0.0, 0.6, 0.8);
        let pv = p.to_vector();
        for n in [1, 4, 9] {
            let d = decoherence_factor(n, &c, 0.0839);
            let pg = rotation_matrix(n, &c, 0.0839) * pv;
            let (ps, gs) = (pv.dot(&s), pg.dot(&s));
            let pu = 0.5 * (1.0 + 2.0 * d * (1.0 - d) * ps * gs + d * d + (1.0 - d).powi(2) * ps * ps);
            let fi = 0.5 * (1.0 + d * pv.dot(&pg) + (1.0 - d) * ps * ps);
            let (a, b) = analytic_purity_fidelity(n, &c, 0.0839, &p).unwrap();
            assert!((a - pu).abs() < 1e-12 && (b - fi).abs() < 1e-12);
        }
    }

    #[test]
    fn free_derivatives_at_zero_theta() {
        let cfg = CavityConfig::generic(Layout::GenericFree, 0.0).unwrap();
        let c = expansion_coeffs(&cfg, 1e-6).unwrap();
        assert!((c.dalpha0 - 1.0).abs() < 1e-6);
        let cfg = CavityConfig::generic(Layout::GenericBB, 0.0).unwrap();
        let c = expansion_coeffs(&cfg, 1e-6).unwrap();
        assert!(c.dalpha0.abs() < 1e-6);
    }

    #[test]
    fn derivatives_match_symbolic() {
        for &(phi0, theta) in &[(0.1, 0.7), (-0.2182, PI / 2.0), (0.3, 2.5)] {
            let (sp, cp) = (0.5f64 * phi0).sin_cos();
            let ct = (0.5f64 * theta).cos();
            let fe = cp * ct / (1.0 - sp * sp * ct * ct).sqrt();
            let cfg = CavityConfig::generic(Layout::GenericFree, theta).unwrap();
            let c = expansion_coeffs(&cfg, phi0).unwrap();
            assert!((c.dalpha0 - fe).abs() < 1e-6);

            let bb = phi0.cos() * theta.sin() / (2.0 * alpha_bb(phi0, theta).sin());
            let cfg = CavityConfig::generic(Layout::GenericBB, theta).unwrap();
            let c = expansion_coeffs(&cfg, phi0).unwrap();
            assert!((c.dalpha0 - bb).abs() < 1e-6);
        }
    }

    #[test]
    fn degenerate_axis_uses_limit() {
        let cfg = CavityConfig::generic(Layout::GenericFree, 1.0).unwrap();
        let c = expansion_coeffs(&cfg, 0.0).unwrap();
        assert!(c.degenerate);
        assert!((c.axis().norm() - 1.0).abs() < 1e-10);
        assert!(c.alpha0.abs() < 1e-15);
    }

    #[test]
    fn mixed_input_rejected() {
        let c = coeffs(0.1, 1.0, 0.0);
        assert!(analytic_purity_fidelity(2, &c, 0.1, &BlochVector::new(0.5, 0.0, 0.0)).is_err());
    }
}
