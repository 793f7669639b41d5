use std::fs::File;

use polardd::analytic::{expansion_coeffs, predict};
use polardd::cavity::{CavityConfig, Layout};
use polardd::engine::{evolve, EvolutionConfig, Method, PhaseDistribution};
use polardd::fitting::fit_full;
use polardd::io::{
    read_counts_csv, read_decay_csv, write_analytic_csv, write_counts_csv, write_decay_csv, DecayCsvOptions,
};
use polardd::jones::{JonesVector, PolarizationState};
use polardd::tomography::{mle_reconstruct, simulate_counts, CountNoise};

#[test]
fn decay_files_feed_the_fit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CavityConfig::fixed(Layout::ZCompensated).unwrap();
    let dist = PhaseDistribution::new(-0.2182, 0.0839).unwrap();
    let evo = EvolutionConfig::new(30, Method::default()).unwrap();
    let mut back = Vec::new();
    for (name, j) in [("D", JonesVector::diagonal()), ("R", JonesVector::right())] {
        let s = evolve(&cfg, &dist, &j.bloch(), &evo).unwrap();
        let path = dir.path().join(format!("{name}.csv"));
        write_decay_csv(File::create(&path).unwrap(), &s, &DecayCsvOptions::default()).unwrap();
        let r = read_decay_csv(File::open(&path).unwrap(), name, None).unwrap();
        assert!(r.input.unwrap().distance(&j.bloch()) <= 1e-15);
        back.push(r);
    }
    let fit = fit_full(&back).unwrap();
    assert!((fit.sigma_phi - 0.0839).abs() < 1e-6);
    assert!((fit.phi0.unwrap() + 0.2182).abs() < 1e-6);
}

#[test]
fn counts_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("counts.csv");
    let rho = PolarizationState::from_bloch(&JonesVector::diagonal().bloch()).unwrap();
    let recs: Vec<_> = (0..5u64)
        .map(|k| {
            let mut r = simulate_counts(&rho, 10_000, k, CountNoise::Poisson).unwrap();
            r.n_trip = 2 * k;
            r
        })
        .collect();
    write_counts_csv(File::create(&path).unwrap(), &recs).unwrap();
    let back = read_counts_csv(File::open(&path).unwrap()).unwrap();
    assert_eq!(back, recs);
    for r in &back {
        assert!(mle_reconstruct(r).unwrap().bloch().x > 0.95);
    }
}

#[test]
fn counts_columns_in_any_order() {
    let text = "L,R,A,D,V,H,n_trip\n6,5,4,3,2,1,9\n";
    let r = read_counts_csv(text.as_bytes()).unwrap();
    assert_eq!(r[0].n_trip, 9);
    assert_eq!(r[0].counts, [1, 2, 3, 4, 5, 6]);
}

#[test]
fn analytic_file_has_matrix_columns() {
    let cfg = CavityConfig::generic(Layout::GenericBB, 0.8).unwrap();
    let c = expansion_coeffs(&cfg, -0.2182).unwrap();
    let pred = predict(&c, 0.0839, &JonesVector::right().bloch(), 4).unwrap();
    let mut buf = Vec::new();
    write_analytic_csv(&mut buf, &pred).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n,D_n,gamma_n,purity,fidelity,v11,v12,v13,v21,v22,v23,v31,v32,v33"
    );
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    // n = 0: V is the identity
    assert_eq!(first[0], 0.0);
    assert!((first[1] - 1.0).abs() < 1e-15);
    assert!((first[5] - 1.0).abs() < 1e-12 && first[6].abs() < 1e-12);
    assert_eq!(text.lines().count(), 6);
}
