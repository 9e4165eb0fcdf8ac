//! Gabor matrix of Weyl composition.
//!
//! For symbols expanded in a Gaussian Gabor frame, the coefficients of a composition
//! `a = a_u # b` are obtained from those of `a_u` by a matrix `M(g_b)` that depends linearly on
//! the coefficients of `b`:
//!
//! ```text
//! g_a(Lambda) = sum_Omega M(g_b)(Lambda, Omega) g_{a_u}(Omega),
//! M(g_b)(Lambda, Omega) = sum_Gamma calM(Omega, Gamma, Lambda) g_b(Gamma).
//! ```
//!
//! The kernel `calM` is a Gaussian in `Omega - Omega' - Gamma - Gamma'` times a phase times the
//! symplectic short-time Fourier transform `V(X, Y) = (2 pi)^{-1} (Phi, Pi(X, Y) dual)` at
//! half-lattice points. All lattice coordinates are integers in units of the common lattice
//! step `a = b`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::gabor::{centered, GaborCoefficients, GaborConfig, GaborSystem};
use crate::grid::{transform_all_axes, Domain, Grid, GridFunction};
use crate::linalg;
use crate::weyl::{symbol_from_operator, weyl_quantize, WeylSymbol};

/// Gaussian factor threshold that fixes the default truncation radius.
pub const GAUSSIAN_TAIL: f64 = 1e-12;

/// Radius `R` with `exp(-R^2 / 4) = GAUSSIAN_TAIL`.
pub fn default_radius() -> f64 {
    (4.0 * (1.0 / GAUSSIAN_TAIL).ln()).sqrt()
}

fn sigma(p: [i64; 2], q: [i64; 2]) -> i64 {
    q[0] * p[1] - p[0] * q[1]
}

/// Table of `V(X, Y)` on the folded half-lattice `(a/2) Z^2 x (a/2) Z^2`.
#[derive(Debug, Clone)]
pub struct SymplecticStft {
    config: GaborConfig,
    fold: usize,
    values: Vec<C64>,
}

impl SymplecticStft {
    /// Requires equal position and modulation lattices.
    pub fn new(sys: &GaborSystem) -> Result<Self> {
        let config = *sys.config();
        let (na, nb) = sys.fold();
        if na != nb || (config.a - config.b).abs() > 1e-12 * config.a {
            return Err(GspError::InvalidParameter("the Gabor matrix needs a = b".into()));
        }
        if sys.a_steps % 2 != 0 || sys.b_steps % 2 != 0 {
            return Err(GspError::InvalidParameter("half-lattice points are not grid aligned".into()));
        }
        let grid = *sys.grid();
        let n = grid.n();
        let m = 2 * na;
        // Phases e^{i a^2 k} must repeat with the torus period of the lattice.
        let turns = config.a * config.a * m as f64 / (2.0 * PI);
        if (turns - turns.round()).abs() > 1e-9 * turns {
            return Err(GspError::InvalidParameter(format!(
                "the Gabor matrix needs a square configuration (a^2 * 2 fold = {turns} turns)"
            )));
        }
        let half_pos = (sys.a_steps / 2) as i64;
        // Frequency 2Y of a half-lattice modulation in frequency bins.
        let half_freq = (sys.b_steps / 2) as i64;
        let rows: Vec<Vec<C64>> = (0..m * m)
            .into_par_iter()
            .map(|mx| {
                let (x1, x2) = (centered((mx / m) as i64, m) * half_pos, centered((mx % m) as i64, m) * half_pos);
                let mut buf: Vec<C64> = (0..n * n)
                    .map(|idx| sys.window[idx] * sys.dual[sys.shifted(idx / n, idx % n, x1, x2)].conj())
                    .collect();
                transform_all_axes(&sys.transform, 2, &mut buf, true);
                (0..m * m)
                    .map(|my| {
                        let (y1, y2) = (centered((my / m) as i64, m), centered((my % m) as i64, m));
                        let w1 = (y2 * half_freq + n as i64 / 2).rem_euclid(n as i64) as usize;
                        let w2 = (-y1 * half_freq + n as i64 / 2).rem_euclid(n as i64) as usize;
                        buf[w1 * n + w2]
                    })
                    .collect()
            })
            .collect();
        let mut values = vec![C64::new(0.0, 0.0); m * m * m * m];
        for (mx, row) in rows.into_iter().enumerate() {
            for (my, v) in row.into_iter().enumerate() {
                values[my * m * m + mx] = v;
            }
        }
        Ok(Self { config, fold: na, values })
    }

    pub fn config(&self) -> &GaborConfig {
        &self.config
    }

    /// Number of distinct half-lattice values per coordinate.
    pub fn period(&self) -> usize {
        2 * self.fold
    }

    fn index(&self, mx: [i64; 2], my: [i64; 2]) -> usize {
        let m = self.period() as i64;
        let f = |v: i64| v.rem_euclid(m) as usize;
        let mu = m as usize;
        (f(my[0]) * mu + f(my[1])) * mu * mu + f(mx[0]) * mu + f(mx[1])
    }

    /// `V(X, Y)` at `X = (a/2) mx`, `Y = (a/2) my`.
    pub fn at_half_lattice(&self, mx: [i64; 2], my: [i64; 2]) -> C64 {
        self.values[self.index(mx, my)]
    }

    /// `V(X, Y)` at physical half-lattice coordinates.
    pub fn at(&self, x: [f64; 2], y: [f64; 2]) -> Result<C64> {
        let half = self.config.a / 2.0;
        let snap = |v: f64| -> Result<i64> {
            let q = v / half;
            if (q - q.round()).abs() > 1e-9 * q.abs().max(1.0) {
                return Err(GspError::NotGridAligned { value: v, step: half });
            }
            Ok(q.round() as i64)
        };
        Ok(self.at_half_lattice([snap(x[0])?, snap(x[1])?], [snap(y[0])?, snap(y[1])?]))
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `calM(Omega, Gamma, Lambda)` for integer lattice coordinates `(n1, n2, k1, k2)`.
    pub fn cal_m(&self, omega: [i64; 4], gamma: [i64; 4], lambda: [i64; 4]) -> C64 {
        let a2 = self.config.a * self.config.a;
        let (o, op) = ([omega[0], omega[1]], [omega[2], omega[3]]);
        let (g, gp) = ([gamma[0], gamma[1]], [gamma[2], gamma[3]]);
        let (l, lp) = ([lambda[0], lambda[1]], [lambda[2], lambda[3]]);
        let p = [o[0] + op[0] + g[0] - gp[0], o[1] + op[1] + g[1] - gp[1]];
        let q = [o[0] + op[0] - g[0] + gp[0], o[1] + op[1] - g[1] + gp[1]];
        let d = [o[0] - op[0] - g[0] - gp[0], o[1] - op[1] - g[1] - gp[1]];
        let phase = sigma(p, lp) + sigma([op[0] + gp[0], op[1] + gp[1]], [o[0] + g[0], o[1] + g[1]]);
        let gauss = (-0.25 * a2 * (d[0] * d[0] + d[1] * d[1]) as f64).exp();
        let v = self.at_half_lattice([2 * l[0] - p[0], 2 * l[1] - p[1]], [2 * lp[0] - q[0], 2 * lp[1] - q[1]]);
        C64::from_polar(2.0 * PI * PI.sqrt() * gauss, a2 * phase as f64) * v
    }
}

/// Nonzero coefficients with their integer lattice coordinates.
type Terms = Vec<([i64; 4], C64)>;

/// Columns of `M(g_b)` over a chosen subset of lattice points `Omega`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixM {
    config: GaborConfig,
    fold: usize,
    radius: f64,
    tail_bound: f64,
    columns: Vec<usize>,
    entries: Vec<Vec<C64>>,
}

impl MatrixM {
    pub fn config(&self) -> &GaborConfig {
        &self.config
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Gaussian factor at the truncation radius.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// Number of lattice points (rows).
    pub fn dim(&self) -> usize {
        self.fold.pow(4)
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn column(&self, omega: usize) -> Option<&[C64]> {
        self.columns.iter().position(|&c| c == omega).map(|i| self.entries[i].as_slice())
    }

    pub fn entry(&self, lambda: usize, omega: usize) -> Option<C64> {
        self.column(omega).map(|c| c[lambda])
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().flatten().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &MatrixM) -> Result<f64> {
        if self.columns != other.columns || self.fold != other.fold {
            return Err(GspError::InvalidParameter("matrices cover different columns".into()));
        }
        Ok(self
            .entries
            .iter()
            .flatten()
            .zip(other.entries.iter().flatten())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }

    /// `M x`; `x` must vanish outside the stored columns.
    pub fn apply(&self, x: &[C64]) -> Result<Vec<C64>> {
        if x.len() != self.dim() {
            return Err(GspError::LengthMismatch { expected: self.dim(), got: x.len() });
        }
        if let Some(i) = (0..x.len()).find(|i| x[*i] != C64::new(0.0, 0.0) && !self.columns.contains(i)) {
            return Err(GspError::InvalidParameter(format!("column {i} is not assembled")));
        }
        let mut out = vec![C64::new(0.0, 0.0); self.dim()];
        for (c, col) in self.columns.iter().zip(&self.entries) {
            if x[*c] != C64::new(0.0, 0.0) {
                for (o, v) in out.iter_mut().zip(col) {
                    *o += v * x[*c];
                }
            }
        }
        Ok(out)
    }

    /// `(lambda, omega, |entry|)` for every stored entry, column by column.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.columns
            .iter()
            .zip(&self.entries)
            .flat_map(|(c, col)| col.iter().enumerate().map(move |(l, v)| (l, *c, v.norm())))
    }
}

struct Assembler<'a> {
    sys: &'a GaborSystem,
    stft: &'a SymplecticStft,
    radius: f64,
}

impl Assembler<'_> {
    /// Column `Omega` of `M` from the nonzero coefficients `terms = [(Gamma, g_b(Gamma))]`.
    fn column(&self, omega: [i64; 4], terms: &[([i64; 4], C64)]) -> Vec<C64> {
        let na = self.stft.fold as i64;
        let nl = self.stft.fold * self.stft.fold;
        let a = self.stft.config.a;
        let a2 = a * a;
        let r = self.radius / a;
        let (o, op) = ([omega[0], omega[1]], [omega[2], omega[3]]);
        let mut bins: BTreeMap<[i64; 2], C64> = BTreeMap::new();
        for (gamma, coef) in terms {
            let (g, gp) = ([gamma[0], gamma[1]], [gamma[2], gamma[3]]);
            let d0 = [o[0] - op[0] - g[0] - gp[0], o[1] - op[1] - g[1] - gp[1]];
            let range = |d: i64| ((d as f64 - r) / na as f64).ceil() as i64..=((d as f64 + r) / na as f64).floor() as i64;
            for s1 in range(d0[0]) {
                for s2 in range(d0[1]) {
                    let d = [d0[0] - na * s1, d0[1] - na * s2];
                    let dd = a2 * (d[0] * d[0] + d[1] * d[1]) as f64;
                    if dd > self.radius * self.radius {
                        continue;
                    }
                    let gs = [g[0] + na * s1, g[1] + na * s2];
                    let e = [gs[0] - gp[0], gs[1] - gp[1]];
                    let phase = sigma([op[0] + gp[0], op[1] + gp[1]], [o[0] + gs[0], o[1] + gs[1]]);
                    *bins.entry(e).or_insert(C64::new(0.0, 0.0)) +=
                        coef * C64::from_polar((-0.25 * dd).exp(), a2 * phase as f64);
                }
            }
        }
        let m = self.stft.period();
        let scale = 2.0 * PI * PI.sqrt();
        // Accumulated as [Lambda'][Lambda], transposed to lattice order at the end.
        let mut acc = vec![C64::new(0.0, 0.0); nl * nl];
        let mut cols = vec![0usize; nl];
        for (e, kappa) in bins {
            let p = [o[0] + op[0] + e[0], o[1] + op[1] + e[1]];
            let q = [o[0] + op[0] - e[0], o[1] + op[1] - e[1]];
            for (li, c) in cols.iter_mut().enumerate() {
                let l = [centered((li / self.stft.fold) as i64, self.stft.fold), centered((li % self.stft.fold) as i64, self.stft.fold)];
                let mx = [(2 * l[0] - p[0]).rem_euclid(m as i64) as usize, (2 * l[1] - p[1]).rem_euclid(m as i64) as usize];
                *c = mx[0] * m + mx[1];
            }
            for lpi in 0..nl {
                let lp = [centered((lpi / self.stft.fold) as i64, self.stft.fold), centered((lpi % self.stft.fold) as i64, self.stft.fold)];
                let factor = kappa * C64::from_polar(scale, a2 * sigma(p, lp) as f64);
                let row = self.stft.index([0, 0], [2 * lp[0] - q[0], 2 * lp[1] - q[1]]);
                let table = &self.stft.values[row..row + m * m];
                let out = &mut acc[lpi * nl..(lpi + 1) * nl];
                for (o, c) in out.iter_mut().zip(&cols) {
                    *o += factor * table[*c];
                }
            }
        }
        let mut col = vec![C64::new(0.0, 0.0); nl * nl];
        for lpi in 0..nl {
            for li in 0..nl {
                col[li * nl + lpi] = acc[lpi * nl + li];
            }
        }
        col
    }

    fn terms(&self, g: &[C64]) -> Terms {
        g.iter()
            .enumerate()
            .filter(|(_, v)| **v != C64::new(0.0, 0.0))
            .map(|(i, v)| (self.sys.lattice_indices(i), *v))
            .collect()
    }
}

fn check_coefficients(sys: &GaborSystem, stft: &SymplecticStft, g: &[C64]) -> Result<()> {
    if stft.config != *sys.config() {
        return Err(GspError::InvalidParameter("STFT table belongs to another Gabor system".into()));
    }
    if g.len() != sys.len() {
        return Err(GspError::LengthMismatch { expected: sys.len(), got: g.len() });
    }
    Ok(())
}

/// Assembles the columns `omegas` of `M(g_b)`, summing over `|Omega - Omega' - Gamma - Gamma'| <= radius`
/// with all torus images of `Gamma`.
pub fn build_m(sys: &GaborSystem, stft: &SymplecticStft, g_b: &[C64], radius: f64, omegas: &[usize]) -> Result<MatrixM> {
    check_coefficients(sys, stft, g_b)?;
    if !(radius > 0.0) {
        return Err(GspError::InvalidParameter(format!("truncation radius must be positive, got {radius}")));
    }
    if let Some(&bad) = omegas.iter().find(|&&o| o >= sys.len()) {
        return Err(GspError::InvalidParameter(format!("column {bad} is outside the lattice")));
    }
    let asm = Assembler { sys, stft, radius };
    let terms = asm.terms(g_b);
    let entries = omegas.par_iter().map(|&o| asm.column(sys.lattice_indices(o), &terms)).collect();
    Ok(MatrixM {
        config: *sys.config(),
        fold: stft.fold,
        radius,
        tail_bound: (-radius * radius / 4.0).exp(),
        columns: omegas.to_vec(),
        entries,
    })
}

/// In-place unnormalized two-dimensional DFT of an `m x m` array.
fn fft2(fft: &dyn Fft<f64>, m: usize, data: &mut [C64], scratch: &mut Vec<C64>) {
    fft.process(data);
    for c in 0..m {
        scratch.clear();
        scratch.extend((0..m).map(|r| data[r * m + c]));
        fft.process(scratch);
        for r in 0..m {
            data[r * m + c] = scratch[r];
        }
    }
}

/// `M(g_b) x`, summed exactly over all pairs `(Omega, Gamma)` within the truncation radius.
///
/// The pairs are first binned by the half-lattice offsets `P = Omega + Omega' + Gamma - Gamma'` and
/// `Q = Omega + Omega' - Gamma + Gamma'`; the table `V` then acts by cyclic convolution in `Q`.
pub fn apply_m(sys: &GaborSystem, stft: &SymplecticStft, g_b: &[C64], x: &[C64], radius: f64) -> Result<Vec<C64>> {
    check_coefficients(sys, stft, g_b)?;
    check_coefficients(sys, stft, x)?;
    if !(radius > 0.0) {
        return Err(GspError::InvalidParameter(format!("truncation radius must be positive, got {radius}")));
    }
    let fold = stft.fold;
    let na = fold as i64;
    let m = stft.period();
    let mi = m as i64;
    let mm = m * m;
    let a2 = stft.config.a * stft.config.a;
    let r = radius / stft.config.a;
    let r2 = r * r;
    let gauss: Vec<f64> = (0..=r2.floor() as usize).map(|k| (-0.25 * a2 * k as f64).exp()).collect();
    // e^{i a^2 k} is 2 na periodic in k for square configurations.
    let phases: Vec<C64> = (0..m).map(|k| C64::from_polar(1.0, a2 * k as f64)).collect();
    let phase = |k: i64| phases[k.rem_euclid(mi) as usize];
    let fm = |v: i64| v.rem_euclid(mi) as usize;

    let coords: Vec<[i64; 4]> = (0..sys.len()).map(|i| sys.lattice_indices(i)).collect();
    // Gamma grouped by t = Gamma + Gamma'.
    let mut groups: BTreeMap<[i64; 2], Terms> = BTreeMap::new();
    for (i, c) in g_b.iter().enumerate() {
        if *c != C64::new(0.0, 0.0) {
            let g = coords[i];
            groups.entry([g[0] + g[2], g[1] + g[3]]).or_default().push((g, *c));
        }
    }
    let groups: Vec<([i64; 2], Terms)> = groups.into_iter().collect();
    let inputs: Terms =
        x.iter().enumerate().filter(|(_, v)| **v != C64::new(0.0, 0.0)).map(|(i, v)| (coords[i], *v)).collect();

    const CHUNK: usize = 256;
    let partial: Vec<Vec<C64>> = inputs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut h = vec![C64::new(0.0, 0.0); mm * mm];
            let mut images: Vec<([i64; 2], usize)> = Vec::new();
            for (o4, w) in chunk {
                let (o, op) = ([o4[0], o4[1]], [o4[2], o4[3]]);
                let diff = [o[0] - op[0], o[1] - op[1]];
                let sum = [o[0] + op[0], o[1] + op[1]];
                for (t, members) in &groups {
                    let d0 = [diff[0] - t[0], diff[1] - t[1]];
                    images.clear();
                    let range = |d: i64| ((d as f64 - r) / na as f64).ceil() as i64..=((d as f64 + r) / na as f64).floor() as i64;
                    for s1 in range(d0[0]) {
                        for s2 in range(d0[1]) {
                            let d = [d0[0] - na * s1, d0[1] - na * s2];
                            let dd = (d[0] * d[0] + d[1] * d[1]) as f64;
                            if dd <= r2 {
                                images.push(([na * s1, na * s2], dd as usize));
                            }
                        }
                    }
                    for (shift, dd) in &images {
                        let wg = w * gauss[*dd];
                        for (g4, c) in members {
                            let gs = [g4[0] + shift[0], g4[1] + shift[1]];
                            let e = [gs[0] - g4[2], gs[1] - g4[3]];
                            let pi = fm(sum[0] + e[0]) * m + fm(sum[1] + e[1]);
                            let qi = fm(sum[0] - e[0]) * m + fm(sum[1] - e[1]);
                            let k = sigma([op[0] + g4[2], op[1] + g4[3]], [o[0] + gs[0], o[1] + gs[1]]);
                            h[pi * mm + qi] += wg * c * phase(k);
                        }
                    }
                }
            }
            h
        })
        .collect();
    let mut h = vec![C64::new(0.0, 0.0); mm * mm];
    for part in partial {
        for (o, v) in h.iter_mut().zip(part) {
            *o += v;
        }
    }

    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(m);
    let inv = planner.plan_fft_inverse(m);
    let mut scratch = Vec::with_capacity(m);
    // DFT in Y of every table row V(X, .).
    let mut vhat = vec![C64::new(0.0, 0.0); mm * mm];
    for xi in 0..mm {
        let row = &mut vhat[xi * mm..(xi + 1) * mm];
        for (yi, v) in row.iter_mut().enumerate() {
            *v = stft.values[yi * mm + xi];
        }
        fft2(fwd.as_ref(), m, row, &mut scratch);
    }
    let nl = fold * fold;
    let centered_l: Vec<[i64; 2]> = (0..nl).map(|i| [centered((i / fold) as i64, fold), centered((i % fold) as i64, fold)]).collect();
    let scale = 2.0 * PI * PI.sqrt() / mm as f64;
    let mut out = vec![C64::new(0.0, 0.0); sys.len()];
    let mut buf = vec![C64::new(0.0, 0.0); mm];
    for pi in 0..mm {
        let hp = &mut h[pi * mm..(pi + 1) * mm];
        if hp.iter().all(|v| *v == C64::new(0.0, 0.0)) {
            continue;
        }
        fft2(fwd.as_ref(), m, hp, &mut scratch);
        let p = [centered((pi / m) as i64, m), centered((pi % m) as i64, m)];
        let lp_phase: Vec<C64> = centered_l.iter().map(|lp| phase(sigma(p, *lp)) * scale).collect();
        for (li, l) in centered_l.iter().enumerate() {
            let xi = fm(2 * l[0] - p[0]) * m + fm(2 * l[1] - p[1]);
            let vx = &vhat[xi * mm..(xi + 1) * mm];
            for ((b, hv), vv) in buf.iter_mut().zip(hp.iter()).zip(vx) {
                *b = hv * vv;
            }
            fft2(inv.as_ref(), m, &mut buf, &mut scratch);
            for (lpi, lp) in centered_l.iter().enumerate() {
                let yi = fm(2 * lp[0]) * m + fm(2 * lp[1]);
                out[li * nl + lpi] += lp_phase[lpi] * buf[yi];
            }
        }
    }
    Ok(out)
}

/// Weyl symbol grid matching a Gabor system: `n = n2`, `L = 2 L2`, so that the symbol steps in
/// `x` and `xi` both equal the plane step.
pub fn weyl_grid(sys: &GaborSystem) -> Result<Grid> {
    let c = sys.config();
    let grid = Grid::new(c.n2, 2.0 * c.l2)?;
    let h2 = c.step();
    if (grid.step() / 2.0 - h2).abs() > 1e-12 * h2 || (grid.freq_step() - h2).abs() > 1e-12 * h2 {
        return Err(GspError::InvalidParameter(format!(
            "plane step {h2} differs from the symbol steps; use L2 = n2 sqrt(pi / n2) / 2"
        )));
    }
    Ok(grid)
}

/// Restricts a symbol to the plane (middle half in `x`, all of `xi`). Returns the restriction and
/// the largest discarded magnitude.
pub fn symbol_to_plane(a: &WeylSymbol, sys: &GaborSystem) -> Result<(GridFunction, f64)> {
    let grid = weyl_grid(sys)?;
    if a.grid() != &grid {
        return Err(GspError::GridMismatch);
    }
    let n = grid.n();
    let mut dropped: f64 = 0.0;
    for s in (0..n / 2).chain(n / 2 + n..2 * n) {
        for l in 0..n {
            dropped = dropped.max(a.at(s, l).norm());
        }
    }
    let values = (0..n * n).map(|idx| a.at(n / 2 + idx / n, idx % n)).collect();
    Ok((GridFunction::with_domain(*sys.grid(), Domain::Position, values)?, dropped))
}

/// Zero-padded inverse of [`symbol_to_plane`].
pub fn plane_to_symbol(f: &GridFunction, sys: &GaborSystem) -> Result<WeylSymbol> {
    let grid = weyl_grid(sys)?;
    if f.grid() != sys.grid() {
        return Err(GspError::GridMismatch);
    }
    let n = grid.n();
    let mut values = vec![C64::new(0.0, 0.0); 2 * n * n];
    for (idx, v) in f.values().iter().enumerate() {
        values[(n / 2 + idx / n) * n + idx % n] = *v;
    }
    WeylSymbol::new(grid, values)
}

/// Weyl symbol of the composition `a^w b^w`.
pub fn compose(a: &WeylSymbol, b: &WeylSymbol) -> Result<WeylSymbol> {
    if a.grid() != b.grid() {
        return Err(GspError::GridMismatch);
    }
    let h = a.grid().step();
    let k = linalg::matmul(&weyl_quantize(a), &weyl_quantize(b)) * C64::new(h, 0.0);
    symbol_from_operator(a.grid(), &k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionReport {
    /// `||g_op - g_mat|| / ||g_op||`.
    pub relative_error: f64,
    pub operator_norm: f64,
    pub radius: f64,
    /// Largest symbol magnitude outside the plane for `a_u`, `b` and the product.
    pub dropped: f64,
}

impl CompositionReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.relative_error <= tol
    }
}

/// Compares the Gabor coefficients of the symbol of `a_u^w b^w` with `M(g_b) g_{a_u}`.
pub fn verify_composition(
    a_u: &WeylSymbol,
    b: &WeylSymbol,
    sys: &GaborSystem,
    stft: &SymplecticStft,
    radius: f64,
) -> Result<CompositionReport> {
    let product = compose(a_u, b)?;
    let (pa, da) = symbol_to_plane(a_u, sys)?;
    let (pb, db) = symbol_to_plane(b, sys)?;
    let (pp, dp) = symbol_to_plane(&product, sys)?;
    let g_op = sys.analyze(&pp)?;
    let g_au: GaborCoefficients = sys.analyze(&pa)?;
    let g_b = sys.analyze(&pb)?;
    let g_mat = apply_m(sys, stft, &g_b, &g_au, radius)?;
    let norm = g_op.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let diff = g_op.iter().zip(&g_mat).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
    Ok(CompositionReport {
        relative_error: if norm > 0.0 { diff / norm } else { diff },
        operator_norm: norm,
        radius,
        dropped: da.max(db).max(dp),
    })
}

/// Synthetic coefficients `<Gamma>^{-r/2}` with `<Gamma> = (1 + |Gamma|^2)^{1/2}`.
pub fn rough_coefficients(sys: &GaborSystem, r: f64) -> GaborCoefficients {
    (0..sys.len())
        .map(|i| {
            let p = sys.lattice_point(i);
            let s: f64 = p.iter().map(|v| v * v).sum();
            C64::new((1.0 + s).powf(-r / 4.0), 0.0)
        })
        .collect()
}

/// Lattice distance `|Lambda - Omega|` using the nearest torus image.
pub fn lattice_distance(sys: &GaborSystem, lambda: usize, omega: usize) -> f64 {
    let (na, _) = sys.fold();
    let l = sys.lattice_indices(lambda);
    let o = sys.lattice_indices(omega);
    let k: i64 = (0..4).map(|i| centered(l[i] - o[i], na).pow(2)).sum();
    sys.config().a * (k as f64).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shell {
    pub rho: f64,
    pub max_abs: f64,
    pub count: usize,
    /// Used in the log-log fit.
    pub fitted: bool,
    /// Inside the mid-range checked against the bound.
    pub checked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub shells: Vec<Shell>,
    pub fitted_t: f64,
    pub fit_residual: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub t_target: f64,
    pub violations: usize,
}

impl DecayReport {
    pub fn passes(&self) -> bool {
        self.fitted_t >= self.t_target && self.violations == 0
    }
}

/// Shell maxima below this fraction of the largest entry are treated as rounding noise.
pub const DECAY_FLOOR: f64 = 1e-13;

/// Fits `log max|M| ~ -t log <rho>` over shells `0 < rho <= 0.8 rho_max` above the rounding floor.
/// `C` is calibrated on the inner half of those shells; a violation is a mid-range shell whose
/// maximum exceeds `C <rho>^{-t_target}`.
pub fn decay_fit(m: &MatrixM, sys: &GaborSystem, t_target: f64) -> Result<DecayReport> {
    if m.config != *sys.config() {
        return Err(GspError::InvalidParameter("matrix belongs to another Gabor system".into()));
    }
    let a = sys.config().a;
    let (na, _) = sys.fold();
    let mut maxima: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for (c, col) in m.columns.iter().zip(&m.entries) {
        let o = sys.lattice_indices(*c);
        for (li, v) in col.iter().enumerate() {
            let l = sys.lattice_indices(li);
            let k: i64 = (0..4).map(|i| centered(l[i] - o[i], na).pow(2)).sum();
            let e = maxima.entry(k).or_insert((0.0, 0));
            e.0 = e.0.max(v.norm());
            e.1 += 1;
        }
    }
    let peak = m.max_abs();
    let rho_max = maxima.keys().last().map_or(0.0, |k| a * (*k as f64).sqrt());
    let mut shells: Vec<Shell> = maxima
        .into_iter()
        .map(|(k, (max_abs, count))| {
            let rho = a * (k as f64).sqrt();
            let checked = k > 0 && rho <= 0.8 * rho_max;
            Shell { rho, max_abs, count, fitted: checked && max_abs > DECAY_FLOOR * peak, checked }
        })
        .collect();
    let bracket = |rho: f64| (1.0 + rho * rho).sqrt();
    let pts: Vec<(f64, f64)> = shells.iter().filter(|s| s.fitted).map(|s| (bracket(s.rho).ln(), s.max_abs.ln())).collect();
    let (fitted_t, fit_residual) = if pts.len() >= 2 {
        let nf = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / nf;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let slope = sxy / sxx;
        let res = (pts.iter().map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2)).sum::<f64>() / nf).sqrt();
        (-slope, res)
    } else if peak == 0.0 {
        (f64::INFINITY, 0.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    let fitted_rho: Vec<f64> = shells.iter().filter(|s| s.fitted).map(|s| s.rho).collect();
    let split = fitted_rho.get(fitted_rho.len() / 2).copied().unwrap_or(0.0);
    let c = shells
        .iter()
        .filter(|s| s.fitted && s.rho <= split)
        .map(|s| s.max_abs * bracket(s.rho).powf(t_target))
        .fold(0.0, f64::max);
    let violations = shells
        .iter_mut()
        .filter(|s| s.checked && s.max_abs > c * bracket(s.rho).powf(-t_target) * (1.0 + 1e-9))
        .count();
    Ok(DecayReport { shells, fitted_t, fit_residual, c, t_target, violations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system() -> GaborSystem {
        GaborSystem::new(GaborConfig::square(40).unwrap()).unwrap()
    }

    #[test]
    fn stft_origin_and_decay() {
        let sys = system();
        let v = SymplecticStft::new(&sys).unwrap();
        let direct = sys.window().inner(&sys.dual_window()).unwrap() / (2.0 * PI);
        let v0 = v.at_half_lattice([0, 0], [0, 0]);
        assert!((v0 - direct).norm() < 1e-12);
        assert!(v0.re > 0.0 && v0.im.abs() < 1e-12);
        assert!(v.at([8.0 * v.config().a, 0.0], [0.0, 0.0]).is_ok());
        assert!(v.at([0.1, 0.0], [0.0, 0.0]).is_err());
    }

    #[test]
    fn cal_m_at_origin() {
        let sys = system();
        let v = SymplecticStft::new(&sys).unwrap();
        let m0 = v.cal_m([0; 4], [0; 4], [0; 4]);
        let expect = v.at_half_lattice([0, 0], [0, 0]) * (2.0 * PI * PI.sqrt());
        assert!((m0 - expect).norm() < 1e-12);
        let bound = 2.0 * PI * PI.sqrt() * v.max_abs();
        for (o, g, l) in [([1i64, 0, -1, 2], [0, 1, 1, 0], [1, 1, 0, 2]), ([2, -2, 0, 0], [0, 0, 1, 1], [0, 0, 0, 0])] {
            let d: i64 = (0..2).map(|i| (o[i] - o[i + 2] - g[i] - g[i + 2]).pow(2)).sum();
            let gauss = (-0.25 * v.config().a.powi(2) * d as f64).exp();
            assert!(v.cal_m(o, g, l).norm() <= bound * gauss * (1.0 + 1e-12));
        }
    }

    #[test]
    fn build_m_is_linear_and_delta_supported() {
        let sys = system();
        let v = SymplecticStft::new(&sys).unwrap();
        let cols = [0usize, sys.lattice_index([1, -1, 0, 2])];
        let r = default_radius();
        let c1 = rough_coefficients(&sys, 12.0);
        let c2: Vec<C64> = (0..sys.len()).map(|i| C64::new(((i * 7) % 13) as f64 / 13.0, -(((i * 3) % 5) as f64))).collect();
        let (al, be) = (C64::new(0.5, -1.0), C64::new(2.0, 0.25));
        let mix: Vec<C64> = c1.iter().zip(&c2).map(|(x, y)| al * x + be * y).collect();
        let m1 = build_m(&sys, &v, &c1, r, &cols).unwrap();
        let m2 = build_m(&sys, &v, &c2, r, &cols).unwrap();
        let mm = build_m(&sys, &v, &mix, r, &cols).unwrap();
        let scale = mm.max_abs();
        for &c in &cols {
            let (a1, a2, am) = (m1.column(c).unwrap(), m2.column(c).unwrap(), mm.column(c).unwrap());
            for i in 0..a1.len() {
                assert!((al * a1[i] + be * a2[i] - am[i]).norm() <= 1e-12 * scale);
            }
        }
        let zero = build_m(&sys, &v, &vec![C64::new(0.0, 0.0); sys.len()], r, &cols).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
        let mut delta = vec![C64::new(0.0, 0.0); sys.len()];
        delta[sys.lattice_index([0; 4])] = C64::new(1.0, 0.0);
        let md = build_m(&sys, &v, &delta, r, &cols).unwrap();
        for &c in &cols {
            let o = sys.lattice_indices(c);
            let col = md.column(c).unwrap();
            for li in (0..sys.len()).step_by(97) {
                let na = sys.fold().0 as i64;
                let mut direct = C64::new(0.0, 0.0);
                for s1 in -2..=2i64 {
                    for s2 in -2..=2i64 {
                        let d = [o[0] - o[2] - na * s1, o[1] - o[3] - na * s2];
                        if v.config().a * ((d[0] * d[0] + d[1] * d[1]) as f64).sqrt() <= r {
                            direct += v.cal_m(o, [na * s1, na * s2, 0, 0], sys.lattice_indices(li));
                        }
                    }
                }
                assert!((col[li] - direct).norm() < 1e-14, "{li}");
            }
        }
    }

    #[test]
    fn apply_matches_columns() {
        let sys = system();
        let v = SymplecticStft::new(&sys).unwrap();
        let g = rough_coefficients(&sys, 12.0);
        let c = sys.lattice_index([1, 0, -1, 1]);
        let m = build_m(&sys, &v, &g, default_radius(), &[c]).unwrap();
        let mut e = vec![C64::new(0.0, 0.0); sys.len()];
        e[c] = C64::new(1.0, 0.0);
        let via_apply = m.apply(&e).unwrap();
        let streamed = apply_m(&sys, &v, &g, &e, default_radius()).unwrap();
        for i in 0..sys.len() {
            assert_eq!(via_apply[i], m.column(c).unwrap()[i]);
            assert!((streamed[i] - via_apply[i]).norm() < 1e-13);
        }
        e[0] = C64::new(1.0, 0.0);
        assert!(m.apply(&e).is_err());
    }

    #[test]
    fn decay_report_of_zero_matrix() {
        let sys = system();
        let v = SymplecticStft::new(&sys).unwrap();
        let m = build_m(&sys, &v, &vec![C64::new(0.0, 0.0); sys.len()], default_radius(), &[0]).unwrap();
        let rep = decay_fit(&m, &sys, 4.0).unwrap();
        assert_eq!(rep.violations, 0);
        assert!(rep.passes());
    }
}
