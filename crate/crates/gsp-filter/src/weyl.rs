//! Discrete Weyl calculus on a periodic grid: quantization, symbol extraction, cross-Wigner
//! distributions, the short-time Fourier transform and modulation-norm estimates.
//!
//! A symbol is sampled at the `2n` half-step positions `x_s = -L + s h/2` and the `n` frequency
//! nodes. Writing `A(s, d)` for its partial inverse transform in `xi` evaluated at the lag
//! `d h`, the kernel is `K[j, k] = A(j + k, j - k)` with indices taken on the torus. Lags equal
//! to the Nyquist lag `n/2` are reached from two midpoints and use the weights `(1 ± i)/2`, which
//! keeps real symbols Hermitian and makes quantization and extraction exact inverses.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::error::{GspError, Result};
use crate::grid::{fourier, inverse_fourier, Domain, Grid, GridFunction};
use crate::linalg::{self, CMat};
use crate::spectral::SpectralMeasure;

const ALPHA: C64 = C64::new(0.5, 0.5);
const BETA: C64 = C64::new(0.5, -0.5);

/// Phase-space function sampled on `2n` half-step positions times `n` frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct WeylSymbol {
    grid: Grid,
    values: Vec<C64>,
}

impl WeylSymbol {
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        check_base_grid(&grid)?;
        let expected = 2 * grid.n() * grid.n();
        if values.len() != expected {
            return Err(GspError::LengthMismatch { expected, got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid, a: impl Fn(f64, f64) -> C64) -> Result<Self> {
        check_base_grid(&grid)?;
        let n = grid.n();
        let values = (0..2 * n * n)
            .map(|i| a(half_position(&grid, i / n), grid.frequency(i % n)))
            .collect();
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, c: C64) -> Result<Self> {
        Self::from_fn(grid, |_, _| c)
    }

    /// The symbol `1 ⊗ mu` of a stationary covariance: `a(x, xi_l) = weights[l] / freq_step`.
    pub fn from_measure(mu: &SpectralMeasure) -> Result<Self> {
        let grid = *mu.grid();
        let density = mu.density();
        Self::from_fn(grid, |_, xi| {
            let l = ((xi / grid.freq_step()).round() as i64 + (grid.n() / 2) as i64) as usize;
            C64::new(density[l], 0.0)
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn rows(&self) -> usize {
        2 * self.grid.n()
    }

    pub fn cols(&self) -> usize {
        self.grid.n()
    }

    pub fn at(&self, s: usize, l: usize) -> C64 {
        self.values[s * self.grid.n() + l]
    }

    /// Half-step position `x_s`.
    pub fn position(&self, s: usize) -> f64 {
        half_position(&self.grid, s)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &WeylSymbol) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    fn as_matrix(&self) -> CMat {
        let n = self.grid.n();
        CMat::from_fn(2 * n, n, |s, l| self.values[s * n + l])
    }
}

fn check_base_grid(grid: &Grid) -> Result<()> {
    if grid.dim() != 1 {
        return Err(GspError::InvalidGrid("Weyl symbols are built over a one-dimensional grid".into()));
    }
    Ok(())
}

fn half_position(grid: &Grid, s: usize) -> f64 {
    -grid.half_width() + s as f64 * grid.step() / 2.0
}

/// Lag index `d mod n` mapped to `[-n/2, n/2)`.
fn centered(d: i64, n: usize) -> i64 {
    let n = n as i64;
    let d = d.rem_euclid(n);
    if d >= n / 2 {
        d - n
    } else {
        d
    }
}

/// `E[l, di] = exp(sign * i * d h xi_l)` with `d = centered(di)`.
fn lag_phases(grid: &Grid, sign: f64) -> CMat {
    let n = grid.n();
    let h = grid.step();
    CMat::from_fn(n, n, |l, di| C64::from_polar(1.0, sign * centered(di as i64, n) as f64 * h * grid.frequency(l)))
}

/// Time-frequency distribution sampled on `refine * n` positions (step `h / refine`) and `n` frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct TfDistribution {
    grid: Grid,
    refine: usize,
    values: Vec<C64>,
}

impl TfDistribution {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn rows(&self) -> usize {
        self.refine * self.grid.n()
    }

    pub fn cols(&self) -> usize {
        self.grid.n()
    }

    pub fn at(&self, r: usize, l: usize) -> C64 {
        self.values[r * self.grid.n() + l]
    }

    pub fn position(&self, r: usize) -> f64 {
        -self.grid.half_width() + r as f64 * self.grid.step() / self.refine as f64
    }

    /// Quadrature weight of one phase-space cell.
    pub fn cell(&self) -> f64 {
        self.grid.step() / self.refine as f64 * self.grid.freq_step()
    }

    /// `sum W dx dxi`.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.cell()
    }
}

/// Operator matrix (kernel view) of the Weyl quantization of `a`.
pub fn weyl_quantize(a: &WeylSymbol) -> CMat {
    let grid = a.grid;
    let n = grid.n();
    let c = grid.freq_step() / (2.0 * PI);
    let lags = linalg::matmul(&a.as_matrix(), &lag_phases(&grid, 1.0)) * C64::new(c, 0.0);
    let nyq = n / 2;
    CMat::from_fn(n, n, |j, k| {
        let d = centered(j as i64 - k as i64, n);
        if d != -(nyq as i64) {
            let s = (2 * k as i64 + d).rem_euclid(2 * n as i64) as usize;
            lags[(s, d.rem_euclid(n as i64) as usize)]
        } else {
            let sp = (2 * k + nyq) % (2 * n);
            let sm = (2 * k + 2 * n - nyq) % (2 * n);
            ALPHA * lags[(sp, nyq)] + BETA * lags[(sm, nyq)]
        }
    })
}

/// Weyl symbol of an operator given in kernel view; the inverse of [`weyl_quantize`].
pub fn symbol_from_operator(grid: &Grid, k: &CMat) -> Result<WeylSymbol> {
    check_base_grid(grid)?;
    let n = grid.n();
    if k.nrows() != n || k.ncols() != n {
        return Err(GspError::LengthMismatch { expected: n, got: k.nrows().max(k.ncols()) });
    }
    let nyq = n / 2;
    let mut lags = CMat::zeros(2 * n, n);
    for s in 0..2 * n {
        for di in 0..n {
            let d = centered(di as i64, n);
            if (s as i64 - d).rem_euclid(2) != 0 {
                continue;
            }
            lags[(s, di)] = if d != -(nyq as i64) {
                let j = ((s as i64 + d).rem_euclid(2 * n as i64) / 2) as usize % n;
                let kk = ((s as i64 - d).rem_euclid(2 * n as i64) / 2) as usize % n;
                k[(j, kk)]
            } else {
                let kk = ((s + 2 * n - nyq) % (2 * n)) / 2 % n;
                let fwd = k[((kk + nyq) % n, kk)];
                let back = k[(kk, (kk + nyq) % n)];
                C64::new(0.0, -1.0) * (ALPHA * fwd - BETA * back)
            };
        }
    }
    interpolate_missing_parity(&mut lags, n);
    let sym = linalg::matmul(&lags, &lag_phases(grid, -1.0).transpose()) * C64::new(grid.step(), 0.0);
    WeylSymbol::new(*grid, (0..2 * n * n).map(|i| sym[(i / n, i % n)]).collect())
}

/// Fills the cells `s ≢ d (mod 2)` by band-limited half-sample interpolation along `s`.
fn interpolate_missing_parity(lags: &mut CMat, n: usize) {
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut seq = vec![C64::new(0.0, 0.0); n];
    for di in 0..n {
        let p = centered(di as i64, n).rem_euclid(2) as usize;
        for m in 0..n {
            seq[m] = lags[(p + 2 * m, di)];
        }
        fwd.process(&mut seq);
        let sign = if p == 0 { 1.0 } else { -1.0 };
        for (q, v) in seq.iter_mut().enumerate() {
            let qs = if q < n / 2 { q as f64 } else { q as f64 - n as f64 };
            *v = if q == n / 2 { C64::new(0.0, 0.0) } else { *v * C64::from_polar(1.0 / n as f64, sign * PI * qs / n as f64) };
        }
        inv.process(&mut seq);
        for m in 0..n {
            lags[((1 - p) + 2 * m, di)] = seq[m];
        }
    }
}

/// Cross-Wigner distribution `W(g, f)` on the symbol grid, normalized so that
/// `(a^w f, g) = (2 pi)^{-1/2} <a, W(g, f)>` with [`phase_space_inner`].
pub fn cross_wigner(g: &GridFunction, f: &GridFunction) -> Result<TfDistribution> {
    if g.grid() != f.grid() {
        return Err(GspError::GridMismatch);
    }
    let grid = *f.grid();
    check_base_grid(&grid)?;
    let n = grid.n();
    let nyq = n / 2;
    let (gv, fv) = (g.values(), f.values());
    let mut b = CMat::zeros(2 * n, n);
    for j in 0..n {
        for k in 0..n {
            let x = gv[j] * fv[k].conj();
            let d = centered(j as i64 - k as i64, n);
            if d != -(nyq as i64) {
                let s = (2 * k as i64 + d).rem_euclid(2 * n as i64) as usize;
                b[(s, d.rem_euclid(n as i64) as usize)] += x;
            } else {
                b[((2 * k + nyq) % (2 * n), nyq)] += ALPHA.conj() * x;
                b[((2 * k + 2 * n - nyq) % (2 * n), nyq)] += BETA.conj() * x;
            }
        }
    }
    let c = 2.0 * grid.step() / (2.0 * PI).sqrt();
    let w = linalg::matmul(&b, &lag_phases(&grid, -1.0).transpose()) * C64::new(c, 0.0);
    Ok(TfDistribution { grid, refine: 2, values: (0..2 * n * n).map(|i| w[(i / n, i % n)]).collect() })
}

/// `<a, W> = sum a conj(W) (h/2) dxi` over the symbol grid.
pub fn phase_space_inner(a: &WeylSymbol, w: &TfDistribution) -> Result<C64> {
    if a.grid != w.grid || w.refine != 2 {
        return Err(GspError::GridMismatch);
    }
    Ok(a.values.iter().zip(&w.values).map(|(x, y)| x * y.conj()).sum::<C64>() * w.cell())
}

/// `(a^w f, g)` evaluated through the operator matrix.
pub fn operator_form(k: &CMat, f: &GridFunction, g: &GridFunction) -> Result<C64> {
    let h = f.grid().step();
    let kf: Vec<C64> = (0..k.nrows()).map(|j| (0..k.ncols()).map(|i| k[(j, i)] * f.values()[i]).sum::<C64>() * h).collect();
    GridFunction::new(*f.grid(), kf)?.inner(g)
}

/// L²-normalized Gaussian `pi^{-1/4} e^{-x^2/2}`.
pub fn gaussian_window(grid: &Grid) -> GridFunction {
    GridFunction::from_fn(*grid, Domain::Position, |x| C64::new(PI.powf(-0.25) * (-x[0] * x[0] / 2.0).exp(), 0.0))
}

/// Index offset of position `x_j - x_p` on the torus.
fn window_index(j: usize, p: usize, n: usize) -> usize {
    (j + n + n / 2 - p) % n
}

/// `V_phi u(x_p, xi_l) = (2 pi)^{-1/2} (u, M_{xi_l} T_{x_p} phi)` on the base grid.
pub fn stft(u: &GridFunction, phi: &GridFunction) -> Result<TfDistribution> {
    if u.grid() != phi.grid() {
        return Err(GspError::GridMismatch);
    }
    let grid = *u.grid();
    check_base_grid(&grid)?;
    let n = grid.n();
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|p| {
            let prod: Vec<C64> = (0..n).map(|j| u.values()[j] * phi.values()[window_index(j, p, n)].conj()).collect();
            let prod = GridFunction::new(grid, prod).expect("length matches");
            fourier(&prod).expect("position domain").into_values()
        })
        .collect();
    Ok(TfDistribution { grid, refine: 1, values: rows.concat() })
}

/// Inverse short-time Fourier transform, `(1/||phi||^2) sum V(x, xi) M_xi T_x phi dx dxi`.
pub fn stft_inverse(v: &TfDistribution, phi: &GridFunction) -> Result<GridFunction> {
    let grid = v.grid;
    if v.refine != 1 || phi.grid() != &grid {
        return Err(GspError::GridMismatch);
    }
    let n = grid.n();
    let norm = phi.norm_sqr();
    if norm == 0.0 {
        return Err(GspError::InvalidParameter("window must be non-zero".into()));
    }
    let mut out = vec![C64::new(0.0, 0.0); n];
    for p in 0..n {
        let row = GridFunction::with_domain(grid, Domain::Frequency, v.values[p * n..(p + 1) * n].to_vec())?;
        let back = inverse_fourier(&row)?;
        for (j, o) in out.iter_mut().enumerate() {
            *o += back.values()[j] * phi.values()[window_index(j, p, n)];
        }
    }
    let c = grid.step() / norm;
    GridFunction::new(grid, out.into_iter().map(|v| v * c).collect())
}

/// `(V, W) = sum V conj(W) dx dxi`.
pub fn tf_inner(v: &TfDistribution, w: &TfDistribution) -> Result<C64> {
    if v.grid != w.grid || v.refine != w.refine {
        return Err(GspError::GridMismatch);
    }
    Ok(v.values.iter().zip(&w.values).map(|(a, b)| a * b.conj()).sum::<C64>() * v.cell())
}

/// Mixed-norm exponents `(p, q)`: `p` over positions (inner), `q` over frequencies (outer).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum MixedNorm {
    InfOne,
    TwoTwo,
    InfInf,
}

impl std::str::FromStr for MixedNorm {
    type Err = GspError;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace(' ', "").as_str() {
            "inf,1" | "(inf,1)" => Ok(MixedNorm::InfOne),
            "2,2" | "(2,2)" => Ok(MixedNorm::TwoTwo),
            "inf,inf" | "(inf,inf)" => Ok(MixedNorm::InfInf),
            other => Err(GspError::Parse(format!("unsupported mixed norm '{other}'"))),
        }
    }
}

/// One uniformly sampled periodic axis `x_i = start + i * step`, `i < n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub n: usize,
    pub start: f64,
    pub step: f64,
}

impl Axis {
    fn position(&self, i: usize) -> f64 {
        self.start + i as f64 * self.step
    }

    fn dual_step(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.step)
    }

    fn dual(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.dual_step()
    }

    /// Signed torus distance `x_i - x_p`.
    fn offset(&self, i: usize, p: usize) -> f64 {
        let n = self.n as i64;
        let mut d = (i as i64 - p as i64).rem_euclid(n);
        if d >= n / 2 {
            d -= n;
        }
        d as f64 * self.step
    }
}

/// Settings of the modulation-norm estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ModNormOptions {
    /// Standard deviation parameter of the Gaussian window `e^{-|x|^2 / (2 width^2)}`.
    pub window_width: f64,
    /// Position stride per axis; `None` picks the largest stride with `stride * step <= width / 2`.
    pub stride: Option<Vec<usize>>,
}

impl Default for ModNormOptions {
    fn default() -> Self {
        Self { window_width: 1.0, stride: None }
    }
}

/// Data accepted by [`mod_norm`].
#[derive(Debug, Clone, Copy)]
pub enum ModInput<'a> {
    Function(&'a GridFunction),
    Symbol(&'a WeylSymbol),
}

impl<'a> ModInput<'a> {
    fn axes_and_values(&self) -> (Vec<Axis>, &'a [C64]) {
        match *self {
            ModInput::Function(f) => {
                let g = f.grid();
                let axis = Axis { n: g.n(), start: -g.half_width(), step: g.step() };
                (vec![axis; g.dim()], f.values())
            }
            ModInput::Symbol(a) => {
                let g = a.grid();
                let x = Axis { n: 2 * g.n(), start: -g.half_width(), step: g.step() / 2.0 };
                let xi = Axis { n: g.n(), start: g.frequency(0), step: g.freq_step() };
                (vec![x, xi], a.values())
            }
        }
    }
}

/// Riemann-sum estimate of `||(V_phi u) omega||_{L^{p,q}}` with a normalized Gaussian window.
///
/// `weight(x, xi)` receives the window position and the dual variable, each of the data dimension.
pub fn mod_norm(
    input: ModInput<'_>,
    weight: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    norm: MixedNorm,
    opts: &ModNormOptions,
) -> Result<f64> {
    let (axes, values) = input.axes_and_values();
    mixed_stft_norm(&axes, values, weight, norm, opts)
}

pub(crate) fn mixed_stft_norm(
    axes: &[Axis],
    values: &[C64],
    weight: &(dyn Fn(&[f64], &[f64]) -> f64 + Sync),
    norm: MixedNorm,
    opts: &ModNormOptions,
) -> Result<f64> {
    let dim = axes.len();
    if !(1..=2).contains(&dim) || values.len() != axes.iter().map(|a| a.n).product::<usize>() {
        return Err(GspError::InvalidParameter("mod_norm expects 1- or 2-axis data".into()));
    }
    let width = opts.window_width;
    if !(width > 0.0) {
        return Err(GspError::InvalidParameter(format!("window width must be positive, got {width}")));
    }
    let strides: Vec<usize> = match &opts.stride {
        Some(s) if s.len() == dim && s.iter().all(|&v| v > 0) => s.clone(),
        Some(_) => return Err(GspError::InvalidParameter("stride must be positive per axis".into())),
        None => axes.iter().map(|a| ((0.5 * width / a.step).floor() as usize).max(1)).collect(),
    };
    let window_norm = (PI.sqrt() * width).powf(-0.5);
    let windows: Vec<Vec<f64>> = axes
        .iter()
        .zip(&strides)
        .map(|(a, &st)| {
            (0..a.n)
                .step_by(st)
                .flat_map(|p| (0..a.n).map(move |i| (p, i)))
                .map(|(p, i)| window_norm * (-(a.offset(i, p) / width).powi(2) / 2.0).exp())
                .collect()
        })
        .collect();
    let counts: Vec<usize> = axes.iter().zip(&strides).map(|(a, &st)| a.n.div_ceil(st)).collect();
    let positions: Vec<Vec<usize>> = if dim == 1 {
        (0..counts[0]).map(|p| vec![p]).collect()
    } else {
        (0..counts[0]).flat_map(|p| (0..counts[1]).map(move |q| vec![p, q])).collect()
    };
    let plans: Vec<Arc<dyn Fft<f64>>> = {
        let mut planner = FftPlanner::new();
        axes.iter().map(|a| planner.plan_fft_forward(a.n)).collect()
    };
    let amp = axes.iter().map(|a| a.step / (2.0 * PI).sqrt()).product::<f64>();
    let cell_x = axes.iter().zip(&strides).map(|(a, &st)| a.step * st as f64).product::<f64>();
    let cell_xi = axes.iter().map(|a| a.dual_step()).product::<f64>();
    let total: usize = values.len();

    let per_position: Vec<Vec<f64>> = positions
        .par_iter()
        .map(|pos| {
            let mut buf: Vec<C64> = (0..total)
                .map(|idx| {
                    let (i0, i1) = if dim == 1 { (idx, 0) } else { (idx / axes[1].n, idx % axes[1].n) };
                    let mut w = windows[0][pos[0] * axes[0].n + i0];
                    let mut sign = if i0 % 2 == 0 { 1.0 } else { -1.0 };
                    if dim == 2 {
                        w *= windows[1][pos[1] * axes[1].n + i1];
                        if i1 % 2 == 1 {
                            sign = -sign;
                        }
                    }
                    values[idx] * (w * sign)
                })
                .collect();
            fft_all_axes(&plans, axes, &mut buf);
            let x: Vec<f64> = pos.iter().zip(axes).zip(&strides).map(|((&p, a), &st)| a.position(p * st)).collect();
            buf.iter()
                .enumerate()
                .map(|(k, v)| {
                    let (k0, k1) = if dim == 1 { (k, 0) } else { (k / axes[1].n, k % axes[1].n) };
                    let xi: Vec<f64> = if dim == 1 { vec![axes[0].dual(k0)] } else { vec![axes[0].dual(k0), axes[1].dual(k1)] };
                    v.norm() * amp * weight(&x, &xi)
                })
                .collect()
        })
        .collect();

    let value = match norm {
        MixedNorm::InfInf => per_position.iter().flatten().cloned().fold(0.0, f64::max),
        MixedNorm::TwoTwo => {
            let mut s = 0.0;
            for row in &per_position {
                s += row.iter().map(|v| v * v).sum::<f64>();
            }
            (s * cell_x * cell_xi).sqrt()
        }
        MixedNorm::InfOne => {
            let mut sup = vec![0.0f64; total];
            for row in &per_position {
                for (m, v) in sup.iter_mut().zip(row) {
                    *m = m.max(*v);
                }
            }
            sup.iter().sum::<f64>() * cell_xi
        }
    };
    Ok(value)
}

fn fft_all_axes(plans: &[Arc<dyn Fft<f64>>], axes: &[Axis], buf: &mut [C64]) {
    if axes.len() == 1 {
        plans[0].process(buf);
        return;
    }
    let (n0, n1) = (axes[0].n, axes[1].n);
    for row in buf.chunks_mut(n1) {
        plans[1].process(row);
    }
    let mut col = vec![C64::new(0.0, 0.0); n0];
    for c in 0..n1 {
        for r in 0..n0 {
            col[r] = buf[r * n1 + c];
        }
        plans[0].process(&mut col);
        for r in 0..n0 {
            buf[r * n1 + c] = col[r];
        }
    }
}
