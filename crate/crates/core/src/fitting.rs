//! Recovery of the phase-noise parameters from decay data.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Matrix2};
use rayon::prelude::*;

use crate::cavity::{CavityConfig, Layout};
use crate::engine::{mean_bloch_series, DecaySeries, DEFAULT_QUAD_ORDER};
use crate::error::{Error, Result};
use crate::jones::BlochVector;
use crate::quadrature::GaussHermite;

/// Purity below `1 - FLAT_TOL` counts as decayed.
const FLAT_TOL: f64 = 1e-4;
const MIN_DECAYED_POINTS: usize = 5;

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub sigma_phi: f64,
    /// `None` for the purity-only fit, which cannot see `phi0`.
    pub phi0: Option<f64>,
    /// Sum of squared residuals at the optimum.
    pub residual: f64,
    /// Gauss-Newton covariance `s^2 (J^T J)^-1` of `(sigma_phi, phi0)`. The
    /// `phi0` row and column are zero for the purity-only fit.
    pub covariance: Matrix2<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Residual after the starting point and after every accepted step.
    pub history: Vec<f64>,
}

fn purity_points(series: &DecaySeries) -> Vec<(f64, f64)> {
    series
        .records
        .iter()
        .map(|r| (series.round_trips(r) as f64, r.purity))
        .collect()
}

fn purity_model(m: f64, sigma: f64) -> f64 {
    0.5 * (1.0 + (-2.0 * m * m * sigma * sigma).exp())
}

fn purity_ssr(points: &[(f64, f64)], sigma: f64) -> f64 {
    points.iter().map(|&(m, p)| (purity_model(m, sigma) - p).powi(2)).sum()
}

/// Least-squares fit of `(1 + exp(-2 m^2 sigma^2)) / 2` to the purity points,
/// with `m` the elapsed round trips.
pub fn fit_sigma_phi(series: &DecaySeries) -> Result<FitResult> {
    let points = purity_points(series);
    let decayed = points.iter().filter(|(_, p)| *p < 1.0 - FLAT_TOL).count();
    if decayed < MIN_DECAYED_POINTS {
        return Err(Error::Unidentifiable(format!(
            "only {decayed} points with purity below {}; need {MIN_DECAYED_POINTS}",
            1.0 - FLAT_TOL
        )));
    }
    // coarse scan, then golden section around the best cell
    let step = 1e-3;
    let grid: Vec<f64> = (0..=2000).map(|k| k as f64 * step).collect();
    let best = grid
        .iter()
        .enumerate()
        .map(|(k, &s)| (k, purity_ssr(&points, s)))
        .fold((0, f64::INFINITY), |a, b| if b.1 < a.1 { b } else { a })
        .0;
    let lo = (grid[best] - step).max(0.0);
    let hi = grid[best] + step;
    let (sigma, iterations) = golden_section(|s| purity_ssr(&points, s), lo, hi, 1e-13);
    let residual = purity_ssr(&points, sigma);

    let jtj: f64 = points
        .iter()
        .map(|&(m, _)| {
            let d = -2.0 * m * m * sigma * (-2.0 * m * m * sigma * sigma).exp();
            d * d
        })
        .sum();
    let dof = points.len().saturating_sub(1).max(1) as f64;
    let var = if jtj > 0.0 { residual / dof / jtj } else { f64::INFINITY };
    Ok(FitResult {
        sigma_phi: sigma,
        phi0: None,
        residual,
        covariance: Matrix2::new(var, 0.0, 0.0, 0.0),
        iterations,
        converged: true,
        history: vec![residual],
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, usize) {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut it = 0;
    while (b - a).abs() > tol && it < 200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        it += 1;
    }
    (0.5 * (a + b), it)
}

/// Search box and refinement settings for [`fit_full_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub sigma_range: (f64, f64),
    pub sigma_points: usize,
    pub phi0_range: (f64, f64),
    pub phi0_points: usize,
    pub quad_order: usize,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            sigma_range: (0.0, 0.3),
            sigma_points: 31,
            phi0_range: (-FRAC_PI_2, FRAC_PI_2),
            phi0_points: 181,
            quad_order: DEFAULT_QUAD_ORDER,
            max_iter: 200,
        }
    }
}

/// One observed series prepared for the forward model.
struct Target {
    cfg: CavityConfig,
    input: BlochVector,
    n_max: usize,
    /// (step, observed Bloch vector)
    obs: Vec<(usize, BlochVector)>,
}

struct Problem {
    targets: Vec<Target>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    len: usize,
}

impl Problem {
    fn new(series: &[DecaySeries], quad_order: usize) -> Result<Self> {
        let mut targets = Vec::new();
        for s in series {
            let input = s.input.ok_or_else(|| {
                Error::InvalidConfig(format!("series {:?} has no input state", s.label))
            })?;
            let theta = s.theta;
            let cfg = match s.layout {
                l if l.uses_theta() => CavityConfig::generic(l, theta.unwrap_or(0.0))?,
                l => CavityConfig::fixed(l)?,
            };
            let obs: Vec<(usize, BlochVector)> = s.steps().map(|r| (r.n, r.bloch)).collect();
            let n_max = obs.iter().map(|o| o.0).max().unwrap_or(0);
            targets.push(Target {
                cfg,
                input,
                n_max,
                obs,
            });
        }
        let movers = targets
            .iter()
            .filter(|t| t.input.normalized().is_some() && !is_fixed_point(t))
            .count();
        if movers < 2 {
            return Err(Error::Unidentifiable(
                "need series for at least two inputs that are not invariant under the cavity".into(),
            ));
        }
        let gh = GaussHermite::new(quad_order)?;
        let norm = gh.weights.iter().sum::<f64>().recip();
        let len = targets.iter().map(|t| 3 * t.obs.len()).sum();
        Ok(Self {
            targets,
            nodes: gh.nodes,
            weights: gh.weights.iter().map(|w| w * norm).collect(),
            len,
        })
    }

    fn residuals(&self, sigma: f64, phi0: f64) -> DVector<f64> {
        let phases: Vec<f64> = self.nodes.iter().map(|x| phi0 + sigma * x).collect();
        let mut out = Vec::with_capacity(self.len);
        for t in &self.targets {
            let model = mean_bloch_series(&t.cfg, &phases, &self.weights, &t.input, t.n_max);
            for (n, b) in &t.obs {
                let m = model[*n];
                out.extend([m.x - b.x, m.y - b.y, m.z - b.z]);
            }
        }
        DVector::from_vec(out)
    }

    fn ssr(&self, sigma: f64, phi0: f64) -> f64 {
        self.residuals(sigma, phi0).norm_squared()
    }

    fn jacobian(&self, sigma: f64, phi0: f64) -> DMatrix<f64> {
        let h = 1e-6;
        // sigma enters through sigma * x with symmetric nodes, so the model is
        // even in sigma and a central difference at 0 is still valid
        let ds = (self.residuals(sigma + h, phi0) - self.residuals(sigma - h, phi0)) / (2.0 * h);
        let dp = (self.residuals(sigma, phi0 + h) - self.residuals(sigma, phi0 - h)) / (2.0 * h);
        DMatrix::from_columns(&[ds, dp])
    }
}

// H under the bare/compensated cavity, or anything under perfect decoupling.
fn is_fixed_point(t: &Target) -> bool {
    match t.cfg.layout() {
        Layout::CarrPurcell | Layout::PauliGroup => true,
        Layout::Bare | Layout::ZCompensated => t.input.x.abs() < 1e-12 && t.input.y.abs() < 1e-12,
        _ => false,
    }
}

/// Joint least squares over all Bloch components of all series.
pub fn fit_full(series: &[DecaySeries]) -> Result<FitResult> {
    fit_full_with(series, &FitOptions::default())
}

/// Grid search over the box followed by Levenberg-Marquardt refinement.
pub fn fit_full_with(series: &[DecaySeries], opts: &FitOptions) -> Result<FitResult> {
    if opts.sigma_points < 2 || opts.phi0_points < 2 || opts.max_iter < 1 {
        return Err(Error::InvalidConfig("fit grid needs at least 2x2 points and one iteration".into()));
    }
    let prob = Problem::new(series, opts.quad_order)?;
    let lin = |(a, b): (f64, f64), k: usize, n: usize| a + (b - a) * k as f64 / (n - 1) as f64;
    let cells: Vec<(f64, f64)> = (0..opts.sigma_points)
        .flat_map(|i| {
            (0..opts.phi0_points).map(move |j| {
                (
                    lin(opts.sigma_range, i, opts.sigma_points),
                    lin(opts.phi0_range, j, opts.phi0_points),
                )
            })
        })
        .collect();
    let losses: Vec<f64> = cells.par_iter().map(|&(s, p)| prob.ssr(s, p)).collect();
    let start = losses
        .iter()
        .enumerate()
        .filter(|(_, l)| l.is_finite())
        .fold((0, f64::INFINITY), |a, (k, &l)| if l < a.1 { (k, l) } else { a })
        .0;

    let (mut sigma, mut phi0) = cells[start];
    let mut r = prob.residuals(sigma, phi0);
    let mut ssr = r.norm_squared();
    let mut history = vec![ssr];
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let j = prob.jacobian(sigma, phi0);
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let mut stepped = false;
        while lambda < 1e12 {
            let mut a = jtj.clone();
            for k in 0..2 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(delta) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let s_new = (sigma + delta[0]).max(0.0);
            let p_new = phi0 + delta[1];
            let r_new = prob.residuals(s_new, p_new);
            let ssr_new = r_new.norm_squared();
            if ssr_new < ssr {
                let small_gain = ssr - ssr_new <= 1e-15 * ssr.max(1e-300);
                let small_step = delta.norm() <= 1e-12;
                sigma = s_new;
                phi0 = p_new;
                r = r_new;
                ssr = ssr_new;
                history.push(ssr);
                lambda = (lambda / 10.0).max(1e-15);
                stepped = true;
                converged = small_gain || small_step;
                break;
            }
            lambda *= 10.0;
        }
        if !stepped {
            // no decrease at any damping: stationary to working precision
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !ssr.is_finite() {
        return Err(Error::FitFailed("non-finite residual".into()));
    }

    let j = prob.jacobian(sigma, phi0);
    let dof = (prob.len as f64 - 2.0).max(1.0);
    let s2 = ssr / dof;
    let covariance = (j.transpose() * &j)
        .try_inverse()
        .map(|inv| Matrix2::new(inv[(0, 0)], inv[(0, 1)], inv[(1, 0)], inv[(1, 1)]) * s2)
        .unwrap_or_else(|| Matrix2::from_element(f64::INFINITY));

    Ok(FitResult {
        sigma_phi: sigma,
        phi0: Some(phi0),
        residual: ssr,
        covariance,
        iterations,
        converged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{closed_form_purity, evolve, DecayRecord, EvolutionConfig, Method, PhaseDistribution};
    use crate::jones::JonesVector;

    fn synthetic(sigma: f64, n_max: usize) -> DecaySeries {
        let records = (0..=n_max)
            .map(|n| DecayRecord {
                n,
                half_cycle: false,
                purity: closed_form_purity(n, sigma),
                fidelity: closed_form_purity(n, sigma),
                bloch: BlochVector::default(),
                purity_se: None,
            })
            .collect();
        DecaySeries {
            label: "synthetic".into(),
            layout: Layout::ZCompensated,
            theta: None,
            dist: PhaseDistribution::new(0.0, sigma).unwrap(),
            method: Method::default(),
            input: None,
            records,
        }
    }

    #[test]
    fn sigma_fit_is_exact_on_model_data() {
        let r = fit_sigma_phi(&synthetic(0.0839, 40)).unwrap();
        assert!((r.sigma_phi - 0.0839).abs() < 1e-6, "{}", r.sigma_phi);
        assert!(r.residual < 1e-20);
        assert!(r.phi0.is_none());
    }

    #[test]
    fn flat_series_is_unidentifiable() {
        let cfg = CavityConfig::fixed(Layout::PauliGroup).unwrap();
        let dist = PhaseDistribution::new(0.0, 0.0839).unwrap();
        let evo = EvolutionConfig::new(20, Method::default()).unwrap();
        let s = evolve(&cfg, &dist, &JonesVector::diagonal().bloch(), &evo).unwrap();
        assert!(matches!(fit_sigma_phi(&s), Err(Error::Unidentifiable(_))));
    }

    fn data(sigma: f64, phi0: f64) -> Vec<DecaySeries> {
        let cfg = CavityConfig::fixed(Layout::ZCompensated).unwrap();
        let dist = PhaseDistribution::new(phi0, sigma).unwrap();
        let evo = EvolutionConfig::new(25, Method::default()).unwrap();
        [JonesVector::diagonal(), JonesVector::right()]
            .iter()
            .map(|j| evolve(&cfg, &dist, &j.bloch(), &evo).unwrap())
            .collect()
    }

    fn quick() -> FitOptions {
        FitOptions {
            sigma_points: 16,
            phi0_points: 91,
            ..FitOptions::default()
        }
    }

    #[test]
    fn full_fit_recovers_own_model() {
        let r = fit_full_with(&data(0.0839, -0.2182), &quick()).unwrap();
        assert!((r.sigma_phi - 0.0839).abs() < 1e-6, "{r:?}");
        assert!((r.phi0.unwrap() + 0.2182).abs() < 1e-6, "{r:?}");
        assert!(r.converged);
        assert!(r.history.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn full_fit_sign_of_phi0() {
        let r = fit_full_with(&data(0.0839, 0.2182), &quick()).unwrap();
        assert!((r.phi0.unwrap() - 0.2182).abs() < 1e-6);
    }

    #[test]
    fn full_fit_zero_width() {
        let r = fit_full_with(&data(0.0, 0.3), &quick()).unwrap();
        assert!(r.sigma_phi < 1e-3, "{r:?}");
        assert!((r.phi0.unwrap() - 0.3).abs() < 1e-6);
    }

    #[test]
    fn full_fit_needs_two_moving_inputs() {
        let mut d = data(0.0839, 0.1);
        d.truncate(1);
        assert!(matches!(fit_full_with(&d, &quick()), Err(Error::Unidentifiable(_))));
    }
}
