//! Discrete non-negative spectral measures, the Radon-Nikodym filter and the
//! error functionals of stationary filtering.

use std::f64::consts::PI;
use std::io::Read;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::grid::{fourier, inverse_fourier, Domain, Grid, GridFunction};

/// Non-negative weights on the frequency nodes of a grid.
///
/// Each weight is `density * freq_step^dim` plus the mass of any atom snapped to that node.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    grid: Grid,
    weights: Vec<f64>,
    /// Temperedness exponent, carried as metadata.
    pub tempered_exponent: f64,
}

impl SpectralMeasure {
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(GspError::LengthMismatch { expected: grid.len(), got: weights.len() });
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !(**w >= 0.0) || !w.is_finite()) {
            return Err(GspError::NegativeWeight { index, value });
        }
        Ok(Self { grid, weights, tempered_exponent: 0.0 })
    }

    pub fn zero(grid: Grid) -> Self {
        let weights = vec![0.0; grid.len()];
        Self { grid, weights, tempered_exponent: 0.0 }
    }

    /// Absolutely continuous measure `density(xi) d xi`.
    pub fn from_density(grid: Grid, density: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let cell = grid.cell(Domain::Frequency);
        let weights = (0..grid.len())
            .map(|idx| density(&frequency_of(&grid, idx)) * cell)
            .collect();
        Self::new(grid, weights)
    }

    /// `p` times Lebesgue measure.
    pub fn lebesgue(grid: Grid, p: f64) -> Result<Self> {
        Self::from_density(grid, |_| p)
    }

    /// Point mass `m` at the frequency node nearest to `xi`.
    pub fn atom(grid: Grid, xi: &[f64], m: f64) -> Result<Self> {
        let mut mu = Self::zero(grid);
        mu.add_atom(xi, m)?;
        Ok(mu)
    }

    /// Density `p` on the box `lo <= xi_i <= hi`.
    pub fn band(grid: Grid, lo: f64, hi: f64, p: f64) -> Result<Self> {
        let eps = 1e-12 * grid.freq_step();
        Self::from_density(grid, |xi| {
            if xi.iter().all(|&x| x >= lo - eps && x <= hi + eps) {
                p
            } else {
                0.0
            }
        })
    }

    /// `p |xi|^{2 alpha} d xi`.
    pub fn power_law(grid: Grid, alpha: u32, p: f64) -> Result<Self> {
        Self::from_density(grid, |xi| p * xi.iter().map(|x| x * x).sum::<f64>().powi(alpha as i32))
    }

    /// `<xi>^{2s} d xi` with `<xi> = (1 + |xi|^2)^{1/2}`.
    pub fn sobolev(grid: Grid, s: f64) -> Result<Self> {
        let mut mu = Self::from_density(grid, |xi| (1.0 + xi.iter().map(|x| x * x).sum::<f64>()).powf(s))?;
        mu.tempered_exponent = (2.0 * s).max(0.0);
        Ok(mu)
    }

    /// Builds a measure from a constructor expression such as `band -1 1 2 + atom 0 0.5`.
    pub fn parse(grid: &Grid, spec: &str) -> Result<Self> {
        let mut total = Self::zero(*grid);
        for term in spec.split('+') {
            let mut words = term.split_whitespace();
            let name = words.next().ok_or_else(|| GspError::Parse(format!("empty measure term in '{spec}'")))?;
            let args: Vec<f64> = words
                .map(|w| w.parse::<f64>().map_err(|_| GspError::Parse(format!("bad number '{w}' in '{term}'"))))
                .collect::<Result<_>>()?;
            let arity = |k: usize| -> Result<()> {
                if args.len() == k {
                    Ok(())
                } else {
                    Err(GspError::Parse(format!("'{name}' expects {k} arguments, got {}", args.len())))
                }
            };
            let g = *grid;
            let mu = match name {
                "lebesgue" => {
                    arity(1)?;
                    Self::lebesgue(g, args[0])?
                }
                "atom" => {
                    if args.len() != grid.dim() + 1 {
                        return Err(GspError::Parse(format!("'atom' expects {} arguments", grid.dim() + 1)));
                    }
                    Self::atom(g, &args[..grid.dim()], args[grid.dim()])?
                }
                "band" => {
                    arity(3)?;
                    Self::band(g, args[0], args[1], args[2])?
                }
                "power-law" => {
                    arity(2)?;
                    if args[0] < 0.0 || args[0].fract() != 0.0 {
                        return Err(GspError::Parse(format!("power-law order must be a non-negative integer, got {}", args[0])));
                    }
                    Self::power_law(g, args[0] as u32, args[1])?
                }
                "sobolev" => {
                    arity(1)?;
                    Self::sobolev(g, args[0])?
                }
                "zero" => {
                    arity(0)?;
                    Self::zero(g)
                }
                other => return Err(GspError::UnknownConstructor(other.to_string())),
            };
            total = total.add(&mu)?;
        }
        Ok(total)
    }

    /// Reads `(node, weight)` rows. The header of the first column selects how nodes are
    /// given: `index` for flat node indices, `xi` or `frequency` for values snapped to the grid.
    pub fn from_csv(grid: Grid, reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| GspError::Parse(e.to_string()))?.clone();
        let by_index = match headers.get(0) {
            Some("index") => true,
            Some("xi") | Some("frequency") => false,
            other => return Err(GspError::Parse(format!("unexpected first column {other:?}"))),
        };
        let dim = grid.dim();
        let mut mu = Self::zero(grid);
        for record in rdr.records() {
            let record = record.map_err(|e| GspError::Parse(e.to_string()))?;
            let nums: Vec<f64> = record
                .iter()
                .map(|w| w.parse::<f64>().map_err(|_| GspError::Parse(format!("bad number '{w}'"))))
                .collect::<Result<_>>()?;
            let weight = *nums.last().ok_or_else(|| GspError::Parse("empty row".into()))?;
            if weight < 0.0 {
                return Err(GspError::NegativeWeight { index: 0, value: weight });
            }
            if by_index {
                let idx = nums[0];
                if idx < 0.0 || idx.fract() != 0.0 || idx as usize >= mu.weights.len() {
                    return Err(GspError::Parse(format!("node index {idx} out of range")));
                }
                mu.weights[idx as usize] += weight;
            } else {
                if nums.len() != dim + 1 {
                    return Err(GspError::Parse(format!("expected {} columns", dim + 1)));
                }
                mu.add_atom(&nums[..dim], weight)?;
            }
        }
        Ok(mu)
    }

    fn add_atom(&mut self, xi: &[f64], m: f64) -> Result<()> {
        if xi.len() != self.grid.dim() {
            return Err(GspError::LengthMismatch { expected: self.grid.dim(), got: xi.len() });
        }
        if !(m >= 0.0) {
            return Err(GspError::NegativeWeight { index: 0, value: m });
        }
        let n = self.grid.n();
        let step = self.grid.freq_step();
        let mut idx = 0;
        for &x in xi {
            let k = (x / step).round() as i64 + (n / 2) as i64;
            if k < 0 || k >= n as i64 {
                return Err(GspError::InvalidParameter(format!("atom at {x} lies outside the frequency grid")));
            }
            idx = idx * n + k as usize;
        }
        self.weights[idx] += m;
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum weights <xi>^{-s}`, finite for every measure on a finite grid.
    pub fn tempered_mass(&self) -> f64 {
        let s = self.tempered_exponent;
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| w * (1.0 + frequency_of(&self.grid, k).iter().map(|x| x * x).sum::<f64>()).powf(-s / 2.0))
            .sum()
    }

    pub fn add(&self, other: &SpectralMeasure) -> Result<Self> {
        if self.grid != other.grid {
            return Err(GspError::GridMismatch);
        }
        let weights = self.weights.iter().zip(&other.weights).map(|(a, b)| a + b).collect();
        Ok(Self {
            grid: self.grid,
            weights,
            tempered_exponent: self.tempered_exponent.max(other.tempered_exponent),
        })
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        let mut out = Self::new(self.grid, self.weights.iter().map(|w| w * c).collect())?;
        out.tempered_exponent = self.tempered_exponent;
        Ok(out)
    }

    /// Multiplier of the associated convolution operator: `weights / freq_step^dim`.
    pub fn density(&self) -> Vec<f64> {
        let cell = self.grid.cell(Domain::Frequency);
        self.weights.iter().map(|w| w / cell).collect()
    }
}

fn frequency_of(grid: &Grid, idx: usize) -> Vec<f64> {
    if grid.dim() == 1 {
        vec![grid.frequency(idx)]
    } else {
        grid.unravel(idx).iter().take(grid.dim()).map(|&k| grid.frequency(k)).collect()
    }
}

/// Autocovariance `kappa(x_j) = (2 pi)^{-d} sum_k e^{i x_j xi_k} weights[k]`.
pub fn autocovariance(mu: &SpectralMeasure) -> GridFunction {
    let grid = mu.grid;
    let d = grid.dim() as i32;
    let scale = (2.0 * PI).powf(-(d as f64) / 2.0) / grid.cell(Domain::Frequency);
    let values = mu.weights.iter().map(|&w| C64::new(w * scale, 0.0)).collect();
    let spectrum = GridFunction::with_domain(grid, Domain::Frequency, values).expect("length checked at construction");
    inverse_fourier(&spectrum).expect("frequency-domain input")
}

/// `(sum_k |f^(xi_k)|^2 weights[k])^{1/2}`.
pub fn fl2_norm(f: &GridFunction, mu: &SpectralMeasure) -> Result<f64> {
    Ok(weighted_energy(f, &mu.weights)?.sqrt())
}

fn spectrum_energy(phi: &GridFunction, grid: &Grid) -> Result<Vec<f64>> {
    if phi.grid() != grid {
        return Err(GspError::GridMismatch);
    }
    Ok(fourier(phi)?.values().iter().map(|v| v.norm_sqr()).collect())
}

fn weighted_energy(f: &GridFunction, w: &[f64]) -> Result<f64> {
    if f.len() != w.len() {
        return Err(GspError::LengthMismatch { expected: w.len(), got: f.len() });
    }
    Ok(fourier(f)?.values().iter().zip(w).map(|(v, w)| v.norm_sqr() * w).sum())
}

/// Frequency response of the optimal convolution filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WienerFilter {
    pub fhat: Vec<f64>,
    pub support: Vec<bool>,
    pub tau: f64,
}

/// Default support tolerance `1e-14 * max(weights_u + weights_w)`.
pub fn default_tau(mu_u: &SpectralMeasure, mu_w: &SpectralMeasure) -> f64 {
    1e-14 * mu_u.weights.iter().zip(&mu_w.weights).map(|(a, b)| a + b).fold(0.0, f64::max)
}

/// Radon-Nikodym derivative `d mu_u / d(mu_u + mu_w)`, set to zero where `weights_u <= tau`.
pub fn rn_filter(mu_u: &SpectralMeasure, mu_w: &SpectralMeasure, tau: Option<f64>) -> Result<WienerFilter> {
    if mu_u.grid != mu_w.grid {
        return Err(GspError::GridMismatch);
    }
    let tau = tau.unwrap_or_else(|| default_tau(mu_u, mu_w));
    if !(tau >= 0.0) {
        return Err(GspError::InvalidParameter(format!("support tolerance must be >= 0, got {tau}")));
    }
    let support: Vec<bool> = mu_u.weights.iter().map(|&wu| wu > tau).collect();
    let fhat = mu_u
        .weights
        .iter()
        .zip(&mu_w.weights)
        .zip(&support)
        .map(|((&wu, &ww), &on)| if on { (wu / (wu + ww)).min(1.0) } else { 0.0 })
        .collect();
    Ok(WienerFilter { fhat, support, tau })
}

/// Minimal error `J(phi) = sum fhat |phi^|^2 weights_w`, cross-checked against
/// `sum (1 - fhat) |phi^|^2 weights_u`.
pub fn wss_mse(filter: &WienerFilter, phi: &GridFunction, mu_u: &SpectralMeasure, mu_w: &SpectralMeasure) -> Result<f64> {
    let (j, alt, scale) = wss_mse_forms(filter, phi, mu_u, mu_w)?;
    if (j - alt).abs() > 1e-10 * scale.max(f64::MIN_POSITIVE) {
        return Err(GspError::Consistency(format!("error forms disagree: {j:.6e} vs {alt:.6e}")));
    }
    Ok(j)
}

/// Both error expressions and the energy `sum |phi^|^2 (weights_u + weights_w)` they are measured against.
pub fn wss_mse_forms(
    filter: &WienerFilter,
    phi: &GridFunction,
    mu_u: &SpectralMeasure,
    mu_w: &SpectralMeasure,
) -> Result<(f64, f64, f64)> {
    if mu_u.grid != mu_w.grid || filter.fhat.len() != mu_u.weights.len() {
        return Err(GspError::GridMismatch);
    }
    let energy = spectrum_energy(phi, &mu_u.grid)?;
    let mut j = 0.0;
    let mut alt = 0.0;
    let mut scale = 0.0;
    for k in 0..energy.len() {
        let (f, e, wu, ww) = (filter.fhat[k], energy[k], mu_u.weights[k], mu_w.weights[k]);
        j += f * e * ww;
        alt += (1.0 - f) * e * wu;
        scale += e * (wu + ww);
    }
    Ok((j, alt, scale))
}

/// Pointwise error of the stationary filter and its split `J = J1 + J2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryError {
    /// `E|u_o(x) - u(x)|^2`, independent of `x`.
    pub error: f64,
    /// `sum (1 - fhat) weights_u`.
    pub j1: f64,
    /// `sum fhat weights_w`.
    pub j2: f64,
}

pub fn stationary_process_error(filter: &WienerFilter, mu_u: &SpectralMeasure, mu_w: &SpectralMeasure) -> Result<StationaryError> {
    if mu_u.grid != mu_w.grid || filter.fhat.len() != mu_u.weights.len() {
        return Err(GspError::GridMismatch);
    }
    let mut j1 = 0.0;
    let mut j2 = 0.0;
    for ((&f, &wu), &ww) in filter.fhat.iter().zip(&mu_u.weights).zip(&mu_w.weights) {
        j1 += (1.0 - f) * wu;
        j2 += f * ww;
    }
    let mass = mu_u.total_mass() + mu_w.total_mass();
    if (j1 - j2).abs() > 1e-10 * mass.max(f64::MIN_POSITIVE) {
        return Err(GspError::Consistency(format!("error forms disagree: {j1:.6e} vs {j2:.6e}")));
    }
    let d = mu_u.grid.dim() as f64;
    Ok(StationaryError { error: j2 * (2.0 * PI).powf(-d), j1, j2 })
}
