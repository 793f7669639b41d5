//! Six-projector count records and maximum-likelihood state reconstruction.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::jones::{BlochVector, JonesVector, PolarizationState};

/// Projector order used everywhere: H, V, D, A, R, L.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Projector {
    H,
    V,
    D,
    A,
    R,
    L,
}

impl Projector {
    pub const ALL: [Projector; 6] = [
        Projector::H,
        Projector::V,
        Projector::D,
        Projector::A,
        Projector::R,
        Projector::L,
    ];

    pub fn state(self) -> JonesVector {
        match self {
            Projector::H => JonesVector::horizontal(),
            Projector::V => JonesVector::vertical(),
            Projector::D => JonesVector::diagonal(),
            Projector::A => JonesVector::antidiagonal(),
            Projector::R => JonesVector::right(),
            Projector::L => JonesVector::left(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Projector::H => "H",
            Projector::V => "V",
            Projector::D => "D",
            Projector::A => "A",
            Projector::R => "R",
            Projector::L => "L",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Projector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Projector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Projector::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Parse(format!("unknown projector {s:?}")))
    }
}

/// Counts for one round-trip peak, indexed in [`Projector::ALL`] order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CountRecord {
    pub n_trip: u64,
    pub counts: [u64; 6],
}

// basis pairs as (plus, minus) indices: z, x, y
const PAIRS: [(usize, usize); 3] = [(0, 1), (2, 3), (4, 5)];

impl CountRecord {
    pub fn new(n_trip: u64, counts: [u64; 6]) -> Self {
        Self { n_trip, counts }
    }

    pub fn get(&self, p: Projector) -> u64 {
        self.counts[p.index()]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Every basis pair must have at least one count.
    pub fn validate(&self) -> Result<()> {
        if self.total() == 0 {
            return Err(Error::InvalidCounts(format!("record {} is all zero", self.n_trip)));
        }
        for (a, b) in PAIRS {
            if self.counts[a] + self.counts[b] == 0 {
                return Err(Error::InvalidCounts(format!(
                    "record {}: no counts in the {}/{} basis",
                    self.n_trip,
                    Projector::ALL[a],
                    Projector::ALL[b]
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum CountNoise {
    /// Expected counts rounded to the nearest integer.
    #[default]
    None,
    Poisson,
}

/// Expected count `n_per_basis * <pi|rho|pi>` for each projector.
pub fn simulate_counts(
    rho: &PolarizationState,
    n_per_basis: u64,
    seed: u64,
    noise: CountNoise,
) -> Result<CountRecord> {
    if n_per_basis < 1 {
        return Err(Error::InvalidConfig("n_per_basis must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 6];
    for p in Projector::ALL {
        let mean = n_per_basis as f64 * rho.expectation(&p.state()).clamp(0.0, 1.0);
        counts[p.index()] = match noise {
            CountNoise::None => mean.round() as u64,
            CountNoise::Poisson if mean > 0.0 => {
                let d = Poisson::new(mean)
                    .map_err(|e| Error::InvalidConfig(format!("Poisson mean {mean}: {e}")))?;
                d.sample(&mut rng) as u64
            }
            CountNoise::Poisson => 0,
        };
    }
    Ok(CountRecord { n_trip: 0, counts })
}

/// Linear inversion `((D-A)/(D+A), (R-L)/(R+L), (H-V)/(H+V))`; may leave the ball.
pub fn stokes_from_counts(rec: &CountRecord) -> Result<BlochVector> {
    let mut r = [0.0; 3];
    for (k, (a, b)) in PAIRS.iter().enumerate() {
        let (p, m) = (rec.counts[*a] as f64, rec.counts[*b] as f64);
        if p + m == 0.0 {
            return Err(Error::InvalidCounts(format!(
                "record {}: zero counts in the {}/{} basis",
                rec.n_trip,
                Projector::ALL[*a],
                Projector::ALL[*b]
            )));
        }
        r[k] = (p - m) / (p + m);
    }
    Ok(BlochVector::new(r[1], r[2], r[0]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Likelihood {
    #[default]
    Poisson,
    /// Gaussian approximation with variance equal to the observed count
    /// (floored at 1).
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MleOptions {
    pub likelihood: Likelihood,
    pub max_iter: usize,
    /// Stop when the gradient norm, per recorded count, falls below this.
    pub grad_tol: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            likelihood: Likelihood::Poisson,
            max_iter: 10_000,
            grad_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReconstructionResult {
    pub rho: PolarizationState,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ReconstructionResult {
    pub fn bloch(&self) -> BlochVector {
        self.rho.bloch()
    }
}

/// Per-basis data in (z, x, y) order.
struct Data {
    plus: [f64; 3],
    minus: [f64; 3],
    total: f64,
    kind: Likelihood,
}

impl Data {
    fn new(rec: &CountRecord, kind: Likelihood) -> Self {
        let mut plus = [0.0; 3];
        let mut minus = [0.0; 3];
        for (k, (a, b)) in PAIRS.iter().enumerate() {
            plus[k] = rec.counts[*a] as f64;
            minus[k] = rec.counts[*b] as f64;
        }
        Self {
            plus,
            minus,
            total: rec.total() as f64,
            kind,
        }
    }

    /// Full log-likelihood at Bloch components `r` (z, x, y).
    fn loglik(&self, r: &[f64; 3]) -> f64 {
        let mut ll = 0.0;
        for k in 0..3 {
            let nb = self.plus[k] + self.minus[k];
            let e = [0.5 * nb * (1.0 + r[k]), 0.5 * nb * (1.0 - r[k])];
            let c = [self.plus[k], self.minus[k]];
            for j in 0..2 {
                ll += match self.kind {
                    Likelihood::Poisson => {
                        let t = if c[j] > 0.0 { c[j] * e[j].ln() } else { 0.0 };
                        t - e[j]
                    }
                    Likelihood::Gaussian => -(c[j] - e[j]).powi(2) / (2.0 * c[j].max(1.0)),
                };
            }
        }
        ll
    }

    /// d loglik / d r_k.
    fn grad_r(&self, r: &[f64; 3]) -> [f64; 3] {
        let mut g = [0.0; 3];
        for k in 0..3 {
            let (cp, cm) = (self.plus[k], self.minus[k]);
            g[k] = match self.kind {
                Likelihood::Poisson => {
                    let a = if cp > 0.0 { cp / (1.0 + r[k]) } else { 0.0 };
                    let b = if cm > 0.0 { cm / (1.0 - r[k]) } else { 0.0 };
                    a - b
                }
                Likelihood::Gaussian => {
                    let nb = cp + cm;
                    let ep = 0.5 * nb * (1.0 + r[k]);
                    let em = 0.5 * nb * (1.0 - r[k]);
                    (cp - ep) / cp.max(1.0) * 0.5 * nb - (cm - em) / cm.max(1.0) * 0.5 * nb
                }
            };
        }
        g
    }
}

// rho = T^dag T / |t|^2, T = [[a, 0], [c + i d, b]], t = (a, b, c, d).
fn bloch_of(t: &[f64; 4]) -> [f64; 3] {
    let [a, b, c, d] = *t;
    let s = a * a + b * b + c * c + d * d;
    [(a * a + c * c + d * d - b * b) / s, 2.0 * b * c / s, 2.0 * b * d / s]
}

// Jacobian dr_k / dt_j.
fn jacobian(t: &[f64; 4]) -> [[f64; 4]; 3] {
    let [a, b, c, d] = *t;
    let s = a * a + b * b + c * c + d * d;
    let r = bloch_of(t);
    let dn = [
        [2.0 * a, -2.0 * b, 2.0 * c, 2.0 * d],
        [0.0, 2.0 * c, 2.0 * b, 0.0],
        [0.0, 2.0 * d, 0.0, 2.0 * b],
    ];
    let mut j = [[0.0; 4]; 3];
    for k in 0..3 {
        for i in 0..4 {
            j[k][i] = dn[k][i] / s - r[k] * 2.0 * t[i] / s;
        }
    }
    j
}

fn grad_t(data: &Data, t: &[f64; 4]) -> [f64; 4] {
    let r = bloch_of(t);
    let gr = data.grad_r(&r);
    let jac = jacobian(t);
    let mut g = [0.0; 4];
    for i in 0..4 {
        g[i] = (0..3).map(|k| gr[k] * jac[k][i]).sum();
    }
    g
}

fn norm4(v: &[f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(t: &mut [f64; 4]) {
    let n = norm4(t);
    t.iter_mut().for_each(|x| *x /= n);
}

/// Lower-triangular factor of the state with Bloch vector `p`, `|p| < 1`.
fn factor_of(p: &BlochVector) -> [f64; 4] {
    let r00 = 0.5 * (1.0 + p.z);
    let r11 = 0.5 * (1.0 - p.z);
    // rho01 = (x - i y) / 2 = b (c - i d)
    let b = r11.sqrt();
    let c = 0.5 * p.x / b;
    let d = 0.5 * p.y / b;
    let a = (r00 - c * c - d * d).max(0.0).sqrt();
    [a, b, c, d]
}

fn state_of(t: &[f64; 4]) -> PolarizationState {
    let r = bloch_of(t);
    // |r| <= 1 by construction, up to rounding
    PolarizationState::from_bloch_unchecked(&BlochVector::new(r[1], r[2], r[0]))
}

/// Linear inversion scaled into the ball of radius 0.99 if it leaves it.
pub fn clipped_inversion(rec: &CountRecord) -> Result<BlochVector> {
    let p = stokes_from_counts(rec)?;
    let n = p.norm();
    Ok(if n > 0.99 { p.scaled(0.99 / n) } else { p })
}

/// Poisson maximum-likelihood reconstruction with default options.
pub fn mle_reconstruct(rec: &CountRecord) -> Result<ReconstructionResult> {
    mle_reconstruct_with(rec, &MleOptions::default())
}

/// Damped Newton ascent on the Cholesky parameters, started from the clipped
/// linear inversion. Only improving steps are accepted.
pub fn mle_reconstruct_with(rec: &CountRecord, opts: &MleOptions) -> Result<ReconstructionResult> {
    rec.validate()?;
    let data = Data::new(rec, opts.likelihood);
    let ll_at = |t: &[f64; 4]| data.loglik(&bloch_of(t));

    let mut t = factor_of(&clipped_inversion(rec)?);
    normalize(&mut t);
    let mut ll = ll_at(&t);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    let scale = data.total.max(1.0);

    while iterations < opts.max_iter {
        let g = grad_t(&data, &t);
        if norm4(&g) / scale <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let h = hessian_fd(&data, &t);
        let mut accepted = false;
        for _ in 0..60 {
            // (-H + lambda * scale * I) delta = g
            let mut a = nalgebra::Matrix4::<f64>::zeros();
            for i in 0..4 {
                for j in 0..4 {
                    a[(i, j)] = -h[i][j];
                }
                a[(i, i)] += lambda * scale;
            }
            let rhs = nalgebra::Vector4::from(g);
            let Some(delta) = a.lu().solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = [t[0] + delta[0], t[1] + delta[1], t[2] + delta[2], t[3] + delta[3]];
            if norm4(&trial) == 0.0 {
                lambda *= 10.0;
                continue;
            }
            normalize(&mut trial);
            let ll_trial = ll_at(&trial);
            if ll_trial.is_finite() && ll_trial >= ll {
                t = trial;
                ll = ll_trial;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted {
            // stalled at the best representable point
            break;
        }
    }
    if !converged {
        let g = grad_t(&data, &t);
        converged = norm4(&g) / scale <= opts.grad_tol;
    }
    Ok(ReconstructionResult {
        rho: state_of(&t),
        loglik: ll,
        iterations,
        converged,
    })
}

/// Log-likelihood of a Bloch vector (inside the ball) under `kind`.
pub fn log_likelihood(rec: &CountRecord, p: &BlochVector, kind: Likelihood) -> f64 {
    Data::new(rec, kind).loglik(&[p.z, p.x, p.y])
}

fn hessian_fd(data: &Data, t: &[f64; 4]) -> [[f64; 4]; 4] {
    let h = 1e-6;
    let mut out = [[0.0; 4]; 4];
    for j in 0..4 {
        let mut tp = *t;
        let mut tm = *t;
        tp[j] += h;
        tm[j] -= h;
        let gp = grad_t(data, &tp);
        let gm = grad_t(data, &tm);
        for i in 0..4 {
            out[i][j] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    // symmetrize
    for i in 0..4 {
        for j in 0..i {
            let m = 0.5 * (out[i][j] + out[j][i]);
            out[i][j] = m;
            out[j][i] = m;
        }
    }
    out
}
