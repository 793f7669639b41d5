use polardd::cavity::{step_unitary, CavityConfig, Layout};
use polardd::engine::{
    evolve, phase_samples, sphere_average, suggested_order, EvolutionConfig, Method, PhaseDistribution,
};
use polardd::jones::{BlochVector, JonesVector};
use proptest::prelude::*;

fn config(layout: Layout, theta: f64) -> CavityConfig {
    if layout.uses_theta() {
        CavityConfig::generic(layout, theta).unwrap()
    } else {
        CavityConfig::fixed(layout).unwrap()
    }
}

fn inputs() -> [BlochVector; 3] {
    [
        JonesVector::horizontal().bloch(),
        JonesVector::diagonal().bloch(),
        JonesVector::right().bloch(),
    ]
}

fn layout_strategy() -> impl Strategy<Value = Layout> {
    prop::sample::select(Layout::ALL.to_vec())
}

fn ball() -> impl Strategy<Value = BlochVector> {
    (0.0..=1.0f64, -1.0..=1.0f64, 0.0..std::f64::consts::TAU).prop_map(|(r, z, a)| {
        let rho = (1.0 - z * z).sqrt();
        BlochVector::new(r * rho * a.cos(), r * rho * a.sin(), r * z)
    })
}

#[test]
fn monte_carlo_agrees_with_quadrature() {
    let dist = PhaseDistribution::new(-0.2182, 0.0839).unwrap();
    for layout in Layout::ALL {
        let cfg = config(layout, 1.0);
        let q = EvolutionConfig::new(40, Method::Quadrature {
            order: suggested_order(&cfg, &dist, 40),
        })
        .unwrap();
        let mc = EvolutionConfig::new(40, Method::MonteCarlo {
            samples: 100_000,
            seed: 7,
        })
        .unwrap();
        for p in inputs() {
            let a = evolve(&cfg, &dist, &p, &q).unwrap();
            let b = evolve(&cfg, &dist, &p, &mc).unwrap();
            for (x, y) in a.records.iter().zip(&b.records) {
                let d = (x.purity - y.purity).abs();
                let se = y.purity_se.unwrap();
                assert!(d <= 5e-3, "{layout} n={} diff {d}", x.n);
                assert!(d <= 3.0 * se || d <= 1e-12, "{layout} n={} diff {d} se {se}", x.n);
            }
        }
    }
}

#[test]
fn monte_carlo_is_reproducible() {
    let cfg = config(Layout::GenericBB, 0.9);
    let dist = PhaseDistribution::new(0.1, 0.2).unwrap();
    let run = |seed| {
        let evo = EvolutionConfig::new(10, Method::MonteCarlo { samples: 5000, seed }).unwrap();
        evolve(&cfg, &dist, &JonesVector::diagonal().bloch(), &evo).unwrap()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

#[test]
fn bare_flips_transverse_components() {
    let dist = PhaseDistribution::new(0.4, 0.15).unwrap();
    let evo = EvolutionConfig::new(30, Method::Quadrature { order: 128 }).unwrap();
    let bare = config(Layout::Bare, 0.0);
    let zc = config(Layout::ZCompensated, 0.0);
    let p = BlochVector::new(0.3, -0.5, 0.6);
    let a = evolve(&bare, &dist, &p, &evo).unwrap();
    let b = evolve(&zc, &dist, &p, &evo).unwrap();
    for n in 0..=30 {
        let (x, y) = (a.at(n).unwrap().bloch, b.at(n).unwrap().bloch);
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        assert!((x.x - sign * y.x).abs() <= 1e-9);
        assert!((x.y - sign * y.y).abs() <= 1e-9);
        assert!((x.z - y.z).abs() <= 1e-12);
    }
}

#[test]
fn mean_bloch_is_average_of_samples() {
    let dist = PhaseDistribution::new(-0.3, 0.12).unwrap();
    let method = Method::MonteCarlo { samples: 3000, seed: 5 };
    for layout in Layout::ALL {
        let cfg = config(layout, 2.1);
        let p = BlochVector::new(0.6, 0.0, 0.8);
        let s = evolve(&cfg, &dist, &p, &EvolutionConfig::new(6, method).unwrap()).unwrap();
        let (phases, weights) = phase_samples(&dist, &method).unwrap();
        let mut mean = [nalgebra::Vector3::zeros(); 7];
        for (phi, w) in phases.iter().zip(&weights) {
            let r = step_unitary(&cfg, *phi).bloch_rotation();
            let mut v = p.to_vector();
            for m in mean.iter_mut() {
                *m += v * *w;
                v = r * v;
            }
        }
        for (n, m) in mean.iter().enumerate() {
            assert!(s.at(n).unwrap().bloch.distance(&BlochVector::from_vector(m)) <= 1e-12);
        }
    }
}

#[test]
fn sphere_average_of_decoupled_cavity_is_flat() {
    let dist = PhaseDistribution::new(0.2, 0.0839).unwrap();
    let evo = EvolutionConfig::new(10, Method::default()).unwrap();
    let s = sphere_average(&config(Layout::GenericBB, 0.0), &dist, &evo, 256).unwrap();
    for r in &s.records {
        assert!((r.purity - 1.0).abs() <= 1e-12);
        assert!((r.fidelity - 1.0).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn averaging_never_increases_purity(
        layout in layout_strategy(),
        theta in 0.0..6.0f64,
        phi0 in -3.0..3.0f64,
        sigma in 0.0..0.5f64,
        p in ball(),
    ) {
        let cfg = config(layout, theta);
        let dist = PhaseDistribution::new(phi0, sigma).unwrap();
        let evo = EvolutionConfig::new(12, Method::Quadrature { order: 48 }).unwrap().with_half_cycles(true);
        let s = evolve(&cfg, &dist, &p, &evo).unwrap();
        let p0 = 0.5 * (1.0 + p.dot(&p));
        for r in &s.records {
            prop_assert!(r.purity <= p0 + 1e-9);
            prop_assert!(r.purity <= 1.0 + 1e-9);
        }
    }

    #[test]
    fn zero_width_is_unitary(
        layout in layout_strategy(),
        theta in 0.0..6.0f64,
        phi0 in -3.0..3.0f64,
        p in ball(),
    ) {
        let cfg = config(layout, theta);
        let dist = PhaseDistribution::new(phi0, 0.0).unwrap();
        let evo = EvolutionConfig::new(25, Method::default()).unwrap();
        let s = evolve(&cfg, &dist, &p, &evo).unwrap();
        let p0 = 0.5 * (1.0 + p.dot(&p));
        for r in &s.records {
            prop_assert!((r.purity - p0).abs() <= 1e-12);
        }
    }
}
