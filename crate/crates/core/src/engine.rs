//! Frequency-averaged evolution: `rho_n = E_phi[U^n rho U^dag^n]`.
//!
//! Everything is done on Bloch vectors. Each phase sample contributes the
//! SO(3) rotation of its step unitary; averaging those is exact because the
//! map `rho -> U rho U^dag` is linear.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cavity::{round_trip_unitary, step_unitary, CavityConfig, Layout};
use crate::error::{Error, Result};
use crate::jones::{fidelity_of_bloch, purity_of_bloch, BlochVector};
use crate::quadrature::GaussHermite;

/// Samples per parallel work unit. Fixed so the reduction tree, and hence
/// the rounding, does not depend on the thread count.
const BLOCK: usize = 512;

pub const DEFAULT_QUAD_ORDER: usize = 64;
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_SPHERE_POINTS: usize = 256;
const MAX_SUGGESTED_ORDER: usize = 512;

/// Gaussian phase measure `dmu ~ exp(-(phi - phi0)^2 / sigma_phi^2) dphi`.
///
/// `sigma_phi` is the width parameter of the measure; the standard deviation
/// of `phi` is `sigma_phi / sqrt(2)`. With this normalization the
/// compensated cavity decays exactly as `(1 + exp(-2 n^2 sigma_phi^2)) / 2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDistribution {
    pub phi0: f64,
    pub sigma_phi: f64,
}

impl PhaseDistribution {
    pub fn new(phi0: f64, sigma_phi: f64) -> Result<Self> {
        if !phi0.is_finite() || !sigma_phi.is_finite() || sigma_phi < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "phase distribution needs finite phi0 and sigma_phi >= 0, got ({phi0}, {sigma_phi})"
            )));
        }
        Ok(Self { phi0, sigma_phi })
    }

    pub fn std_dev(&self) -> f64 {
        self.sigma_phi / SQRT_2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    MonteCarlo { samples: usize, seed: u64 },
    Quadrature { order: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::MonteCarlo { .. } => "monte-carlo",
            Method::Quadrature { .. } => "quadrature",
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Method::MonteCarlo { samples, .. } if samples < 1 => {
                Err(Error::InvalidConfig("Monte-Carlo needs at least one sample".into()))
            }
            Method::Quadrature { order } if order < 2 => {
                Err(Error::InvalidConfig("quadrature order must be >= 2".into()))
            }
            _ => Ok(()),
        }
    }
}

impl Default for Method {
    fn default() -> Self {
        Method::Quadrature {
            order: DEFAULT_QUAD_ORDER,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolutionConfig {
    pub n_max: usize,
    pub method: Method,
    /// Also report the state after the first round trip of each double-trip
    /// step. Ignored for single-trip layouts.
    pub half_cycles: bool,
}

impl EvolutionConfig {
    pub fn new(n_max: usize, method: Method) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidConfig("n_max must be >= 1".into()));
        }
        method.validate()?;
        Ok(Self {
            n_max,
            method,
            half_cycles: false,
        })
    }

    pub fn with_half_cycles(mut self, on: bool) -> Self {
        self.half_cycles = on;
        self
    }
}

/// One point of a decay curve. `n` counts completed steps; a half-cycle
/// record sits one round trip after step `n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayRecord {
    pub n: usize,
    pub half_cycle: bool,
    pub purity: f64,
    pub fidelity: f64,
    pub bloch: BlochVector,
    /// Standard error of the purity (Monte-Carlo only).
    pub purity_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecaySeries {
    pub label: String,
    pub layout: Layout,
    pub theta: Option<f64>,
    pub dist: PhaseDistribution,
    pub method: Method,
    /// Pure input state; `None` for sphere averages.
    pub input: Option<BlochVector>,
    pub records: Vec<DecayRecord>,
}

impl DecaySeries {
    /// Records at whole steps only.
    pub fn steps(&self) -> impl Iterator<Item = &DecayRecord> {
        self.records.iter().filter(|r| !r.half_cycle)
    }

    pub fn at(&self, n: usize) -> Option<&DecayRecord> {
        self.steps().find(|r| r.n == n)
    }

    pub fn trips_per_step(&self) -> u32 {
        self.layout.trips_per_step()
    }

    /// Cavity round trips elapsed at a record.
    pub fn round_trips(&self, r: &DecayRecord) -> usize {
        r.n * self.trips_per_step() as usize + usize::from(r.half_cycle)
    }
}

/// `(1 + exp(-2 n^2 sigma^2)) / 2`.
pub fn closed_form_purity(n: usize, sigma_phi: f64) -> f64 {
    let n = n as f64;
    0.5 * (1.0 + (-2.0 * n * n * sigma_phi * sigma_phi).exp())
}

/// Quadrature order heuristic growing with the phase spread accumulated
/// over `n_max` steps, `max(64, 8 m sigma / pi * 64)` with `m` round trips,
/// capped at 512.
pub fn suggested_order(cfg: &CavityConfig, dist: &PhaseDistribution, n_max: usize) -> usize {
    let m = (n_max as f64) * cfg.trips_per_step() as f64;
    let want = (8.0 * m * dist.sigma_phi / PI * DEFAULT_QUAD_ORDER as f64).ceil() as usize;
    want.clamp(DEFAULT_QUAD_ORDER, MAX_SUGGESTED_ORDER)
}

/// Phase nodes and normalized weights for the chosen back end.
pub fn phase_samples(dist: &PhaseDistribution, method: &Method) -> Result<(Vec<f64>, Vec<f64>)> {
    method.validate()?;
    match *method {
        Method::Quadrature { order } => {
            if dist.sigma_phi == 0.0 {
                return Ok((vec![dist.phi0], vec![1.0]));
            }
            let gh = GaussHermite::new(order)?;
            // normalize by the sum rather than sqrt(pi) so the rule is exact on 1
            let total: f64 = gh.weights.iter().sum();
            let phases = gh.nodes.iter().map(|x| dist.phi0 + dist.sigma_phi * x).collect();
            let weights = gh.weights.iter().map(|w| w / total).collect();
            Ok((phases, weights))
        }
        Method::MonteCarlo { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sd = dist.std_dev();
            let phases = (0..samples)
                .map(|_| dist.phi0 + sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Ok((phases, vec![1.0 / samples as f64; samples]))
        }
    }
}

/// Output slot layout: whole steps `0..=n_max`, then half cycles `0..n_max`.
#[derive(Clone, Copy, Debug)]
struct Slots {
    n_max: usize,
    half: bool,
}

impl Slots {
    fn new(cfg: &CavityConfig, evo: &EvolutionConfig) -> Self {
        Self {
            n_max: evo.n_max,
            half: evo.half_cycles && cfg.trips_per_step() == 2,
        }
    }

    fn count(&self) -> usize {
        self.n_max + 1 + if self.half { self.n_max } else { 0 }
    }

    fn half_slot(&self, k: usize) -> usize {
        self.n_max + 1 + k
    }

    /// (n, half_cycle) in output order: interleaved by round trip.
    fn order(&self) -> Vec<(usize, bool, usize)> {
        let mut out = Vec::with_capacity(self.count());
        for k in 0..=self.n_max {
            out.push((k, false, k));
            if self.half && k < self.n_max {
                out.push((k, true, self.half_slot(k)));
            }
        }
        out
    }
}

/// Deterministic weighted sum over samples: fixed blocks evaluated in
/// parallel, then combined by a fixed pairwise tree.
fn reduce_samples<F>(phases: &[f64], weights: &[f64], width: usize, f: F) -> Vec<f64>
where
    F: Fn(f64, f64, &mut [f64]) + Sync,
{
    let partials: Vec<Vec<f64>> = phases
        .par_chunks(BLOCK)
        .zip(weights.par_chunks(BLOCK))
        .map(|(ps, ws)| {
            let mut acc = vec![0.0; width];
            for (&p, &w) in ps.iter().zip(ws) {
                f(p, w, &mut acc);
            }
            acc
        })
        .collect();
    pairwise(partials, width)
}

fn pairwise(mut parts: Vec<Vec<f64>>, width: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; width];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

fn rotations(cfg: &CavityConfig, phi: f64) -> (Matrix3<f64>, Matrix3<f64>) {
    (
        step_unitary(cfg, phi).bloch_rotation(),
        round_trip_unitary(cfg, phi).bloch_rotation(),
    )
}

fn check_input(p: &BlochVector) -> Result<()> {
    let n = p.norm();
    if !n.is_finite() || n > 1.0 + crate::jones::BLOCH_TOL {
        return Err(Error::UnphysicalBloch { norm: n });
    }
    Ok(())
}

/// Frequency-averaged evolution of one input state.
pub fn evolve(
    cfg: &CavityConfig,
    dist: &PhaseDistribution,
    input: &BlochVector,
    evo: &EvolutionConfig,
) -> Result<DecaySeries> {
    check_input(input)?;
    let (phases, weights) = phase_samples(dist, &evo.method)?;
    let slots = Slots::new(cfg, evo);
    let p0 = input.to_vector();
    // per slot: mean (3) and second moment (6)
    const W: usize = 9;
    let sums = reduce_samples(&phases, &weights, slots.count() * W, |phi, w, acc| {
        let (r, rh) = rotations(cfg, phi);
        let mut v = p0;
        for k in 0..=slots.n_max {
            add_moments(&mut acc[k * W..(k + 1) * W], &v, w);
            if slots.half && k < slots.n_max {
                let s = slots.half_slot(k);
                add_moments(&mut acc[s * W..(s + 1) * W], &(rh * v), w);
            }
            v = r * v;
        }
    });

    let mc_n = match evo.method {
        Method::MonteCarlo { samples, .. } => Some(samples),
        Method::Quadrature { .. } => None,
    };
    let records = slots
        .order()
        .into_iter()
        .map(|(n, half_cycle, slot)| {
            let s = &sums[slot * W..(slot + 1) * W];
            let m = Vector3::new(s[0], s[1], s[2]);
            let bloch = BlochVector::from_vector(&m);
            let purity_se = mc_n.map(|n| purity_standard_error(&m, &s[3..], n));
            DecayRecord {
                n,
                half_cycle,
                purity: purity_of_bloch(&bloch),
                fidelity: fidelity_of_bloch(input, &bloch),
                bloch,
                purity_se,
            }
        })
        .collect();

    Ok(DecaySeries {
        label: String::new(),
        layout: cfg.layout(),
        theta: cfg.theta().map(|t| t.value()),
        dist: *dist,
        method: evo.method,
        input: Some(*input),
        records,
    })
}

fn add_moments(acc: &mut [f64], v: &Vector3<f64>, w: f64) {
    acc[0] += w * v.x;
    acc[1] += w * v.y;
    acc[2] += w * v.z;
    acc[3] += w * v.x * v.x;
    acc[4] += w * v.y * v.y;
    acc[5] += w * v.z * v.z;
    acc[6] += w * v.x * v.y;
    acc[7] += w * v.x * v.z;
    acc[8] += w * v.y * v.z;
}

// Var of (1 + |m^|^2) / 2 for a Gaussian sample mean m^ ~ N(m, C / n): the
// delta-method term m.C.m / n plus tr(C^2) / (2 n^2), which dominates once the
// mean has decayed to zero.
fn purity_standard_error(m: &Vector3<f64>, second: &[f64], n: usize) -> f64 {
    if n < 2 {
        return f64::INFINITY;
    }
    let s = Matrix3::new(
        second[0], second[3], second[4], //
        second[3], second[1], second[5], //
        second[4], second[5], second[2],
    );
    let cov = (s - m * m.transpose()) * (n as f64 / (n as f64 - 1.0));
    let nf = n as f64;
    let var = (m.transpose() * cov * m)[(0, 0)] / nf + (cov * cov).trace() / (2.0 * nf * nf);
    var.max(0.0).sqrt()
}

/// Mean Bloch vector after each of the steps `0..=n_max` for explicit phase
/// nodes and weights. Low-level entry for forward models that reuse a rule.
pub fn mean_bloch_series(
    cfg: &CavityConfig,
    phases: &[f64],
    weights: &[f64],
    input: &BlochVector,
    n_max: usize,
) -> Vec<BlochVector> {
    let p0 = input.to_vector();
    let sums = reduce_samples(phases, weights, (n_max + 1) * 3, |phi, w, acc| {
        let r = step_unitary(cfg, phi).bloch_rotation();
        let mut v = p0;
        for k in 0..=n_max {
            acc[3 * k] += w * v.x;
            acc[3 * k + 1] += w * v.y;
            acc[3 * k + 2] += w * v.z;
            v = r * v;
        }
    });
    sums.chunks(3).map(|c| BlochVector::new(c[0], c[1], c[2])).collect()
}

/// Averaged Bloch maps `E[R^k]`, one per output slot, with `(n, half_cycle)`.
#[derive(Clone, Debug)]
pub struct BlochMaps {
    pub entries: Vec<(usize, bool, Matrix3<f64>)>,
}

pub fn bloch_maps(
    cfg: &CavityConfig,
    dist: &PhaseDistribution,
    evo: &EvolutionConfig,
) -> Result<BlochMaps> {
    let (phases, weights) = phase_samples(dist, &evo.method)?;
    let slots = Slots::new(cfg, evo);
    const W: usize = 9;
    let sums = reduce_samples(&phases, &weights, slots.count() * W, |phi, w, acc| {
        let (r, rh) = rotations(cfg, phi);
        let mut p = Matrix3::identity();
        for k in 0..=slots.n_max {
            add_matrix(&mut acc[k * W..(k + 1) * W], &p, w);
            if slots.half && k < slots.n_max {
                let s = slots.half_slot(k);
                add_matrix(&mut acc[s * W..(s + 1) * W], &(rh * p), w);
            }
            p = r * p;
        }
    });
    let entries = slots
        .order()
        .into_iter()
        .map(|(n, h, slot)| {
            let s = &sums[slot * W..(slot + 1) * W];
            (n, h, Matrix3::from_column_slice(s))
        })
        .collect();
    Ok(BlochMaps { entries })
}

fn add_matrix(acc: &mut [f64], m: &Matrix3<f64>, w: f64) {
    for (a, x) in acc.iter_mut().zip(m.as_slice()) {
        *a += w * x;
    }
}

/// Quasi-uniform points on the unit sphere (Fibonacci lattice).
pub fn fibonacci_sphere(points: usize) -> Vec<BlochVector> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..points)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / points as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            BlochVector::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

/// Mean purity and fidelity over `grid_size` pure inputs spread over the sphere.
/// `bloch` of each record is the mean output Bloch vector.
pub fn sphere_average(
    cfg: &CavityConfig,
    dist: &PhaseDistribution,
    evo: &EvolutionConfig,
    grid_size: usize,
) -> Result<DecaySeries> {
    if grid_size < 16 {
        return Err(Error::InvalidConfig(format!(
            "sphere grid needs at least 16 points, got {grid_size}"
        )));
    }
    let maps = bloch_maps(cfg, dist, evo)?;
    let grid = fibonacci_sphere(grid_size);
    let records = maps
        .entries
        .iter()
        .map(|(n, half_cycle, v)| average_over(&grid, v, *n, *half_cycle))
        .collect();
    Ok(DecaySeries {
        label: format!("sphere-{grid_size}"),
        layout: cfg.layout(),
        theta: cfg.theta().map(|t| t.value()),
        dist: *dist,
        method: evo.method,
        input: None,
        records,
    })
}

/// Averages purity and fidelity of `v p` over the points `grid`.
pub fn average_over(grid: &[BlochVector], v: &Matrix3<f64>, n: usize, half_cycle: bool) -> DecayRecord {
    let k = grid.len() as f64;
    let (mut p, mut f) = (0.0, 0.0);
    let mut mean = Vector3::zeros();
    for x in grid {
        let out = v * x.to_vector();
        let b = BlochVector::from_vector(&out);
        p += purity_of_bloch(&b);
        f += fidelity_of_bloch(x, &b);
        mean += out;
    }
    DecayRecord {
        n,
        half_cycle,
        purity: p / k,
        fidelity: f / k,
        bloch: BlochVector::from_vector(&(mean / k)),
        purity_se: None,
    }
}
