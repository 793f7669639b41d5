//! Frequency-resolved pulse amplitudes and their Stokes parameters.
//!
//! The polarization state of a pulse is the frequency-integrated quantity
//! `(s2, s3, s1) / s0`; it is pure exactly when `alpha_h(w) / alpha_v(w)`
//! does not depend on `w`.

use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::jones::{BlochVector, JonesVector, C64};

/// Default number of grid points for a Gaussian spectrum.
pub const DEFAULT_GRID_POINTS: usize = 2048;
/// Default half-width of the grid in units of the bandwidth.
pub const DEFAULT_GRID_HALF_WIDTH: f64 = 6.0;
/// Minimum half-width accepted by [`GaussianSpectrum::envelope`].
pub const MIN_GRID_HALF_WIDTH: f64 = 5.0;

/// Uniform, strictly increasing angular-frequency grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyGrid {
    omega: Vec<f64>,
    step: f64,
}

impl FrequencyGrid {
    /// Uniform grid with `points` samples on `[start, stop]`.
    pub fn uniform(start: f64, stop: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidSpectrum("grid needs at least 2 points".into()));
        }
        if !(stop > start) || !start.is_finite() || !stop.is_finite() {
            return Err(Error::InvalidSpectrum(format!(
                "grid bounds must be finite and increasing, got [{start}, {stop}]"
            )));
        }
        let step = (stop - start) / (points - 1) as f64;
        let omega = (0..points).map(|i| start + step * i as f64).collect();
        Ok(Self { omega, step })
    }

    /// Accepts an explicit grid after checking uniform spacing.
    pub fn from_samples(omega: Vec<f64>) -> Result<Self> {
        if omega.len() < 2 {
            return Err(Error::InvalidSpectrum("grid needs at least 2 points".into()));
        }
        let step = (omega[omega.len() - 1] - omega[0]) / (omega.len() - 1) as f64;
        if !(step > 0.0) {
            return Err(Error::InvalidSpectrum("grid must be strictly increasing".into()));
        }
        for w in omega.windows(2) {
            let d = w[1] - w[0];
            if !(d > 0.0) || (d - step).abs() > 1e-6 * step {
                return Err(Error::InvalidSpectrum(
                    "grid must be strictly increasing with uniform spacing".into(),
                ));
            }
        }
        Ok(Self { omega, step })
    }

    pub fn len(&self) -> usize {
        self.omega.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omega.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.omega
    }

    /// Trapezoid weights.
    pub fn weights(&self) -> Vec<f64> {
        let n = self.omega.len();
        (0..n)
            .map(|i| {
                if i == 0 || i == n - 1 {
                    0.5 * self.step
                } else {
                    self.step
                }
            })
            .collect()
    }

    /// Trapezoid integral of sampled values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.len());
        self.weights().iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

/// Gaussian amplitude spectrum
/// `E(w) = (pi sigma^2)^(-1/4) exp(-(w - w0)^2 / (2 sigma^2))`, so that
/// `int |E|^2 dw = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianSpectrum {
    pub omega0: f64,
    pub sigma_omega: f64,
}

impl GaussianSpectrum {
    pub fn new(omega0: f64, sigma_omega: f64) -> Result<Self> {
        if !(sigma_omega > 0.0) || !omega0.is_finite() || !sigma_omega.is_finite() {
            return Err(Error::InvalidSpectrum(format!(
                "bandwidth must be positive and finite, got {sigma_omega}"
            )));
        }
        Ok(Self {
            omega0,
            sigma_omega,
        })
    }

    pub fn amplitude(&self, omega: f64) -> f64 {
        let d = omega - self.omega0;
        (PI * self.sigma_omega * self.sigma_omega).powf(-0.25)
            * (-d * d / (2.0 * self.sigma_omega * self.sigma_omega)).exp()
    }

    /// Grid of `points` samples over `w0 +/- half_width * sigma`.
    pub fn grid(&self, points: usize, half_width: f64) -> Result<FrequencyGrid> {
        FrequencyGrid::uniform(
            self.omega0 - half_width * self.sigma_omega,
            self.omega0 + half_width * self.sigma_omega,
            points,
        )
    }

    pub fn default_grid(&self) -> FrequencyGrid {
        self.grid(DEFAULT_GRID_POINTS, DEFAULT_GRID_HALF_WIDTH)
            .expect("default grid parameters are valid")
    }

    /// `E(w)` sampled on `grid`; the grid must cover at least +/-5 bandwidths.
    pub fn envelope(&self, grid: &FrequencyGrid) -> Result<Vec<f64>> {
        let w = grid.values();
        let lower = (self.omega0 - w[0]) / self.sigma_omega;
        let upper = (w[w.len() - 1] - self.omega0) / self.sigma_omega;
        // small slack for grids built as exactly +/-5 sigma
        let need = MIN_GRID_HALF_WIDTH * (1.0 - 1e-9);
        if lower < need || upper < need {
            return Err(Error::GridTooNarrow {
                lower_sigmas: lower,
                upper_sigmas: upper,
                required: MIN_GRID_HALF_WIDTH,
            });
        }
        Ok(w.iter().map(|&x| self.amplitude(x)).collect())
    }
}

/// `alpha_h(w)`, `alpha_v(w)` sampled on a uniform grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralAmplitudes {
    grid: FrequencyGrid,
    alpha_h: Vec<C64>,
    alpha_v: Vec<C64>,
}

/// Unnormalized Stokes parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stokes {
    pub s0: f64,
    pub s1: f64,
    pub s2: f64,
    pub s3: f64,
}

impl Stokes {
    /// `(s2, s3, s1) / s0`.
    pub fn bloch(&self) -> BlochVector {
        BlochVector::new(self.s2 / self.s0, self.s3 / self.s0, self.s1 / self.s0)
    }

    pub fn normalized(&self) -> Stokes {
        Stokes {
            s0: 1.0,
            s1: self.s1 / self.s0,
            s2: self.s2 / self.s0,
            s3: self.s3 / self.s0,
        }
    }
}

impl SpectralAmplitudes {
    pub fn new(grid: FrequencyGrid, alpha_h: Vec<C64>, alpha_v: Vec<C64>) -> Result<Self> {
        if alpha_h.len() != grid.len() || alpha_v.len() != grid.len() {
            return Err(Error::InvalidSpectrum(format!(
                "amplitude arrays ({}, {}) do not match grid length {}",
                alpha_h.len(),
                alpha_v.len(),
                grid.len()
            )));
        }
        if alpha_h.iter().chain(&alpha_v).any(|a| !a.re.is_finite() || !a.im.is_finite()) {
            return Err(Error::InvalidSpectrum("non-finite amplitude".into()));
        }
        if alpha_h.iter().chain(&alpha_v).all(|a| a.norm_sqr() == 0.0) {
            return Err(Error::InvalidSpectrum("all amplitudes are zero".into()));
        }
        Ok(Self {
            grid,
            alpha_h,
            alpha_v,
        })
    }

    /// `alpha_S(w) = E(w) alpha_S`: frequency and polarization factorized.
    pub fn factorized(grid: FrequencyGrid, envelope: &[f64], pol: &JonesVector) -> Result<Self> {
        let h = envelope.iter().map(|&e| pol.h * e).collect();
        let v = envelope.iter().map(|&e| pol.v * e).collect();
        Self::new(grid, h, v)
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn alpha_h(&self) -> &[C64] {
        &self.alpha_h
    }

    pub fn alpha_v(&self) -> &[C64] {
        &self.alpha_v
    }

    /// Multiply both arrays by a common complex factor.
    pub fn scaled(&self, c: C64) -> Self {
        Self {
            grid: self.grid.clone(),
            alpha_h: self.alpha_h.iter().map(|a| a * c).collect(),
            alpha_v: self.alpha_v.iter().map(|a| a * c).collect(),
        }
    }

    /// Reads `omega, re_h, im_h, re_v, im_v` rows (header required).
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = rdr.headers()?.clone();
        let expected = ["omega", "re_h", "im_h", "re_v", "im_v"];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!(
                "expected columns {expected:?}, found {headers:?}"
            )));
        }
        let (mut w, mut h, mut v) = (Vec::new(), Vec::new(), Vec::new());
        for row in rdr.records() {
            let row = row?;
            let vals = row
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("{s:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            w.push(vals[0]);
            h.push(C64::new(vals[1], vals[2]));
            v.push(C64::new(vals[3], vals[4]));
        }
        Self::new(FrequencyGrid::from_samples(w)?, h, v)
    }
}

/// Trapezoid quadrature of the four Stokes integrals.
pub fn stokes(spec: &SpectralAmplitudes) -> Result<Stokes> {
    let wts = spec.grid.weights();
    let mut s = Stokes {
        s0: 0.0,
        s1: 0.0,
        s2: 0.0,
        s3: 0.0,
    };
    for ((w, h), v) in wts.iter().zip(&spec.alpha_h).zip(&spec.alpha_v) {
        let (hh, vv) = (h.norm_sqr(), v.norm_sqr());
        let c = h.conj() * v;
        s.s0 += w * (hh + vv);
        s.s1 += w * (hh - vv);
        s.s2 += w * 2.0 * c.re;
        s.s3 += w * 2.0 * c.im;
    }
    if !(s.s0 > 0.0) {
        return Err(Error::InvalidSpectrum("s0 = 0".into()));
    }
    Ok(s)
}

/// `(s0^2 - s1^2 - s2^2 - s3^2) / s0^2`, zero exactly for a pure polarization.
pub fn purity_deficit(spec: &SpectralAmplitudes) -> Result<f64> {
    let s = stokes(spec)?;
    // 4 (A B - |C|^2) form avoids cancellation between s0^2 and s1^2
    let wts = spec.grid.weights();
    let (mut a, mut b, mut c) = (0.0, 0.0, C64::new(0.0, 0.0));
    for ((w, h), v) in wts.iter().zip(&spec.alpha_h).zip(&spec.alpha_v) {
        a += w * h.norm_sqr();
        b += w * v.norm_sqr();
        c += h.conj() * v * *w;
    }
    let det = (a * b - c.norm_sqr()).max(0.0);
    Ok(4.0 * det / (s.s0 * s.s0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn spectrum() -> GaussianSpectrum {
        GaussianSpectrum::new(2.35e15, 2.2e13).unwrap()
    }

    #[test]
    fn envelope_is_normalized() {
        let g = spectrum();
        let grid = g.default_grid();
        let e = g.envelope(&grid).unwrap();
        let p: Vec<f64> = e.iter().map(|x| x * x).collect();
        assert_abs_diff_eq!(grid.integrate(&p), 1.0, epsilon = 1e-6);
    }

    #[test]
    fn envelope_peak_and_symmetry() {
        let g = spectrum();
        let peak = (PI * g.sigma_omega * g.sigma_omega).powf(-0.25);
        assert_abs_diff_eq!(g.amplitude(g.omega0) / peak, 1.0, epsilon = 1e-15);
        for k in [0.3, 1.0, 2.5] {
            let d = k * g.sigma_omega;
            assert_abs_diff_eq!(
                g.amplitude(g.omega0 + d) / peak,
                g.amplitude(g.omega0 - d) / peak,
                epsilon = 1e-15
            );
        }
    }

    #[test]
    fn narrow_grid_rejected() {
        let g = spectrum();
        let grid = g.grid(512, 4.0).unwrap();
        assert!(matches!(g.envelope(&grid), Err(Error::GridTooNarrow { .. })));
        assert!(g.envelope(&g.grid(512, 5.0).unwrap()).is_ok());
    }

    #[test]
    fn factorized_h_and_d() {
        let g = spectrum();
        let grid = g.default_grid();
        let e = g.envelope(&grid).unwrap();

        let h = SpectralAmplitudes::factorized(grid.clone(), &e, &JonesVector::horizontal()).unwrap();
        let s = stokes(&h).unwrap().normalized();
        assert_abs_diff_eq!(s.s1, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.s2, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.s3, 0.0, epsilon = 1e-12);

        let d = SpectralAmplitudes::factorized(grid, &e, &JonesVector::diagonal()).unwrap();
        let s = stokes(&d).unwrap().normalized();
        assert_abs_diff_eq!(s.s2, 1.0, epsilon = 1e-12);
        assert!(purity_deficit(&d).unwrap() <= 1e-9);
    }

    #[test]
    fn entangled_spectrum_is_mixed() {
        let g = spectrum();
        let grid = g.default_grid();
        let e = g.envelope(&grid).unwrap();
        let h: Vec<C64> = e.iter().map(|&x| C64::new(x, 0.0)).collect();
        let v: Vec<C64> = grid
            .values()
            .iter()
            .zip(&e)
            .map(|(&w, &x)| C64::new(x * (w - g.omega0).signum(), 0.0))
            .collect();
        let spec = SpectralAmplitudes::new(grid, h, v).unwrap();
        assert!(stokes(&spec).unwrap().bloch().norm() < 1.0);
        assert!(purity_deficit(&spec).unwrap() > 0.1);
    }

    #[test]
    fn two_point_grid_is_pure() {
        let grid = FrequencyGrid::uniform(0.0, 1.0, 2).unwrap();
        let a = C64::new(0.3, -0.2);
        let b = C64::new(0.1, 0.7);
        let spec = SpectralAmplitudes::new(grid, vec![a, a], vec![b, b]).unwrap();
        assert!(purity_deficit(&spec).unwrap() <= 1e-12);
    }

    #[test]
    fn zero_amplitudes_rejected() {
        let grid = FrequencyGrid::uniform(0.0, 1.0, 4).unwrap();
        let z = vec![C64::new(0.0, 0.0); 4];
        assert!(SpectralAmplitudes::new(grid, z.clone(), z).is_err());
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let grid = FrequencyGrid::uniform(0.0, 1.0, 4).unwrap();
        let one = vec![C64::new(1.0, 0.0); 3];
        assert!(SpectralAmplitudes::new(grid, one.clone(), one).is_err());
    }

    #[test]
    fn nonuniform_grid_rejected() {
        assert!(FrequencyGrid::from_samples(vec![0.0, 1.0, 3.0]).is_err());
        assert!(FrequencyGrid::from_samples(vec![0.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("amp.csv");
        std::fs::write(
            &path,
            "omega,re_h,im_h,re_v,im_v\n0.0,1.0,0.0,0.0,1.0\n1.0,1.0,0.0,0.0,1.0\n2.0,1.0,0.0,0.0,1.0\n",
        )
        .unwrap();
        let spec = SpectralAmplitudes::read_csv(&path).unwrap();
        let p = stokes(&spec).unwrap().bloch();
        assert_abs_diff_eq!(p.y, 1.0, epsilon = 1e-15);
    }
}
