//! Jones operators of the individual cavity elements.

use std::f64::consts::TAU;

use crate::engine::PhaseDistribution;
use crate::error::{Error, Result};
use crate::jones::{pauli, Mat2, Pauli, Unitary, C64};
use crate::spectral::GaussianSpectrum;

/// Relative H/V phase of a plane mirror as a linear function of frequency,
/// `phi(w) = phi0 + tau * w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MirrorPhaseModel {
    pub phi0: f64,
    pub tau: f64,
}

impl MirrorPhaseModel {
    pub fn new(phi0: f64, tau: f64) -> Result<Self> {
        if !phi0.is_finite() || !tau.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "mirror phase model needs finite values, got phi0={phi0}, tau={tau}"
            )));
        }
        Ok(Self { phi0, tau })
    }

    pub fn phase(&self, omega: f64) -> f64 {
        self.phi0 + self.tau * omega
    }

    /// Phase measure induced by a Gaussian spectrum: width `|tau| sigma_omega`.
    pub fn distribution(&self, spectrum: &GaussianSpectrum) -> PhaseDistribution {
        PhaseDistribution {
            phi0: self.phase(spectrum.omega0),
            sigma_phi: self.tau.abs() * spectrum.sigma_omega,
        }
    }
}

/// Soleil-Babinet delay phase, kept in `[0, 2pi)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Default)]
pub struct NoiseDelay(f64);

impl NoiseDelay {
    /// Wraps `theta` into `[0, 2pi)`. Wrapping flips the sign of the
    /// compensator matrix, which is a global phase.
    pub fn new(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidConfig(format!("noise delay must be finite, got {theta}")));
        }
        let mut t = theta.rem_euclid(TAU);
        if t >= TAU {
            t = 0.0;
        }
        Ok(Self(t))
    }

    pub fn zero() -> Self {
        Self(0.0)
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Fixed waveplate orientations used in the cavity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveplateAxis {
    X,
    Z,
}

/// 45 degree plane mirror with relative phase `phi`: `Z exp(-i phi Z)`.
pub fn mirror_mz(phi: f64) -> Unitary {
    let (s, c) = phi.sin_cos();
    Unitary::from_mat_unchecked(Mat2::diag(C64::new(c, -s), C64::new(-c, -s)))
}

/// Spherical mirror, taken at zero relative phase.
pub fn spherical_mirror() -> Unitary {
    pauli(Pauli::Z)
}

pub fn waveplate(axis: WaveplateAxis) -> Unitary {
    match axis {
        WaveplateAxis::X => pauli(Pauli::X),
        WaveplateAxis::Z => pauli(Pauli::Z),
    }
}

/// `exp(-i theta X / 2)`.
pub fn soleil_babinet(theta: NoiseDelay) -> Unitary {
    let (s, c) = (0.5 * theta.value()).sin_cos();
    Unitary::from_mat_unchecked(Mat2::new(
        C64::new(c, 0.0),
        C64::new(0.0, -s),
        C64::new(0.0, -s),
        C64::new(c, 0.0),
    ))
}

/// Compensator followed by a plane mirror: `M_Z(phi) B_X(theta)`.
pub fn noise_element(phi: f64, theta: NoiseDelay) -> Unitary {
    mirror_mz(phi) * soleil_babinet(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    const TOL: f64 = 1e-12;

    fn close(a: &Unitary, b: &Mat2) -> bool {
        a.matrix().max_abs_diff(b) <= TOL
    }

    #[test]
    fn mirror_at_zero_is_z() {
        assert!(close(&mirror_mz(0.0), &Pauli::Z.matrix()));
    }

    #[test]
    fn mirror_at_pi_is_minus_z() {
        assert!(close(&mirror_mz(PI), &(-Pauli::Z.matrix())));
    }

    #[test]
    fn cavity_round_trip_with_spherical_mirror() {
        let phi = 0.37;
        let u = spherical_mirror() * mirror_mz(phi) * mirror_mz(phi);
        let expect = pauli(Pauli::Z) * Unitary::exp_rotation(2.0 * phi, [0.0, 0.0, 1.0]);
        assert!(u.projective_distance(&expect) <= TOL);
    }

    #[test]
    fn soleil_babinet_values() {
        assert!(close(&soleil_babinet(NoiseDelay::zero()), &Mat2::identity()));
        let pi = soleil_babinet(NoiseDelay::new(PI).unwrap());
        assert!(close(&pi, &Pauli::X.matrix().scale(C64::new(0.0, -1.0))));
        let half = soleil_babinet(NoiseDelay::new(PI / 2.0).unwrap());
        let expect = (Mat2::identity() - Pauli::X.matrix().scale(C64::new(0.0, 1.0)))
            .scale(C64::new(FRAC_1_SQRT_2, 0.0));
        assert!(close(&half, &expect));
    }

    #[test]
    fn noise_element_limits() {
        let phi = 0.41;
        assert!(close(
            &noise_element(phi, NoiseDelay::zero()),
            mirror_mz(phi).matrix()
        ));
        let th = NoiseDelay::new(0.8).unwrap();
        let expect = pauli(Pauli::Z) * soleil_babinet(th);
        assert!(close(&noise_element(0.0, th), expect.matrix()));
    }

    #[test]
    fn noise_element_explicit_product() {
        // diag(e^{-i phi}, -e^{i phi}) times [[c, -is], [-is, c]]
        let (phi, theta) = (0.1f64, 0.3f64);
        let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
        let e_m = C64::from_polar(1.0, -phi);
        let e_p = -C64::from_polar(1.0, phi);
        let expect = Mat2::new(
            e_m * c,
            e_m * C64::new(0.0, -s),
            e_p * C64::new(0.0, -s),
            e_p * c,
        );
        assert!(close(&noise_element(phi, NoiseDelay::new(theta).unwrap()), &expect));
    }

    #[test]
    fn delay_wraps() {
        assert!((NoiseDelay::new(-0.5).unwrap().value() - (TAU - 0.5)).abs() < 1e-15);
        assert_eq!(NoiseDelay::new(TAU).unwrap().value(), 0.0);
        assert!(NoiseDelay::new(f64::NAN).is_err());
    }

    #[test]
    fn waveplates_are_paulis() {
        assert!(close(&waveplate(WaveplateAxis::X), &Pauli::X.matrix()));
        assert!(close(&waveplate(WaveplateAxis::Z), &Pauli::Z.matrix()));
    }

    #[test]
    fn phase_model_distribution() {
        let m = MirrorPhaseModel::new(0.1, 2e-15).unwrap();
        let g = GaussianSpectrum::new(2.0e15, 4.0e13).unwrap();
        let d = m.distribution(&g);
        assert!((d.phi0 - 4.1).abs() < 1e-12);
        assert!((d.sigma_phi - 0.08).abs() < 1e-15);
    }
}
