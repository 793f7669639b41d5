use polardd::cavity::{round_trip_unitary, step_unitary, CavityConfig, Layout};
use polardd::elements::{
    mirror_mz, noise_element, soleil_babinet, spherical_mirror, waveplate, NoiseDelay, WaveplateAxis,
};
use polardd::jones::{Pauli, Unitary};
use proptest::prelude::*;

fn commutator_norm(a: &Unitary, b: &Unitary) -> f64 {
    let (a, b) = (*a.matrix(), *b.matrix());
    (a * b).max_abs_diff(&(b * a))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn every_element_is_unitary(phi in -10.0..10.0f64, theta in -10.0..10.0f64) {
        let t = NoiseDelay::new(theta).unwrap();
        let mut all = vec![
            mirror_mz(phi),
            soleil_babinet(t),
            noise_element(phi, t),
            spherical_mirror(),
            waveplate(WaveplateAxis::X),
            waveplate(WaveplateAxis::Z),
        ];
        for layout in Layout::ALL {
            let cfg = if layout.uses_theta() {
                CavityConfig::generic(layout, theta).unwrap()
            } else {
                CavityConfig::fixed(layout).unwrap()
            };
            all.push(round_trip_unitary(&cfg, phi));
            all.push(step_unitary(&cfg, phi));
        }
        for u in all {
            prop_assert!(u.unitarity_error() <= 1e-12);
        }
    }

    #[test]
    fn mirror_commutes_with_z(phi in -10.0..10.0f64) {
        prop_assert!(commutator_norm(&mirror_mz(phi), &waveplate(WaveplateAxis::Z)) <= 1e-15);
    }

    #[test]
    fn soleil_babinet_commutes_with_x(theta in -10.0..10.0f64) {
        let sb = soleil_babinet(NoiseDelay::new(theta).unwrap());
        prop_assert!(commutator_norm(&sb, &waveplate(WaveplateAxis::X)) <= 1e-15);
    }

    #[test]
    fn soleil_babinet_composes(a in -10.0..10.0f64, b in -10.0..10.0f64) {
        let sa = soleil_babinet(NoiseDelay::new(a).unwrap());
        let sb = soleil_babinet(NoiseDelay::new(b).unwrap());
        let sum = soleil_babinet(NoiseDelay::new(a + b).unwrap());
        prop_assert!((sa * sb).projective_distance(&sum) <= 1e-12);
    }
}

#[test]
fn zero_delay_is_identity() {
    let sb = soleil_babinet(NoiseDelay::zero());
    assert!(sb.projective_distance(&Unitary::identity()) <= 1e-15);
}

#[test]
fn half_wave_delay_is_x() {
    let sb = soleil_babinet(NoiseDelay::new(std::f64::consts::PI).unwrap());
    let x = polardd::jones::pauli(Pauli::X);
    assert!(sb.projective_distance(&x) <= 1e-15);
}
