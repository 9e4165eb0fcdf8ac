//! Periodic discretization of the line and the plane.
//!
//! Positions are `x_j = -L + j h` with `h = 2L/n`, frequencies are
//! `xi_k = (k - n/2) pi/L`. The Fourier transform is the Riemann sum
//! `F(xi_k) = (2 pi)^{-d/2} h^d sum_j f(x_j) exp(-i <x_j, xi_k>)`, which is
//! exactly unitary between the position inner product (weight `h^d`) and the
//! frequency inner product (weight `(pi/L)^d`).

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use rustfft::{Fft, FftPlanner};

use crate::error::{GspError, Result};

/// Relative tolerance used when deciding whether a shift is grid aligned.
const ALIGN_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    n: usize,
    half_width: f64,
    dim: usize,
}

impl Grid {
    /// One-dimensional grid with `n` nodes on `[-l, l)`.
    pub fn new(n: usize, l: f64) -> Result<Self> {
        Self::with_dim(n, l, 1)
    }

    /// Square two-dimensional grid with `n` nodes per axis on `[-l, l)^2`.
    pub fn new_2d(n: usize, l: f64) -> Result<Self> {
        Self::with_dim(n, l, 2)
    }

    pub fn with_dim(n: usize, l: f64, dim: usize) -> Result<Self> {
        if n < 2 || n % 2 != 0 {
            return Err(GspError::InvalidGrid(format!("n = {n} must be even and >= 2")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(GspError::InvalidGrid(format!("half-width {l} must be positive")));
        }
        if dim != 1 && dim != 2 {
            return Err(GspError::InvalidGrid(format!("dim = {dim} must be 1 or 2")));
        }
        Ok(Self { n, half_width: l, dim })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Total number of nodes, `n^dim`.
    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Position step `h = 2L/n`.
    pub fn step(&self) -> f64 {
        2.0 * self.half_width / self.n as f64
    }

    /// Frequency step `pi/L`.
    pub fn freq_step(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest frequency magnitude on the grid, `pi/h`.
    pub fn nyquist(&self) -> f64 {
        PI / self.step()
    }

    pub fn position(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.step()
    }

    pub fn frequency(&self, k: usize) -> f64 {
        (k as f64 - (self.n / 2) as f64) * self.freq_step()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.position(j)).collect()
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.frequency(k)).collect()
    }

    /// Step of the given domain: `h` for positions, `pi/L` for frequencies.
    pub fn domain_step(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Position => self.step(),
            Domain::Frequency => self.freq_step(),
        }
    }

    /// Coordinate of axis node `j` in the given domain.
    pub fn coordinate(&self, domain: Domain, j: usize) -> f64 {
        match domain {
            Domain::Position => self.position(j),
            Domain::Frequency => self.frequency(j),
        }
    }

    /// Quadrature weight `step^dim` of the given domain.
    pub fn cell(&self, domain: Domain) -> f64 {
        self.domain_step(domain).powi(self.dim as i32)
    }

    /// Splits a flat row-major index into per-axis indices.
    pub fn unravel(&self, index: usize) -> [usize; 2] {
        if self.dim == 1 {
            [index, 0]
        } else {
            [index / self.n, index % self.n]
        }
    }

    /// Index of the node at the origin (`j = n/2` on every axis).
    pub fn origin_index(&self) -> usize {
        let c = self.n / 2;
        if self.dim == 1 {
            c
        } else {
            c * self.n + c
        }
    }

    /// Converts a coordinate offset into an integer number of steps.
    pub fn steps_of(&self, value: f64, step: f64) -> Result<i64> {
        let q = value / step;
        let r = q.round();
        if (q - r).abs() > ALIGN_TOL * q.abs().max(1.0) {
            return Err(GspError::NotGridAligned { value, step });
        }
        Ok(r as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Position,
    Frequency,
}

impl Domain {
    fn dual(self) -> Self {
        match self {
            Domain::Position => Domain::Frequency,
            Domain::Frequency => Domain::Position,
        }
    }
}

/// Samples of a function on a [`Grid`], either in position or in frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    domain: Domain,
    values: Vec<C64>,
}

impl GridFunction {
    /// Position-domain function from raw samples.
    pub fn new(grid: Grid, values: Vec<C64>) -> Result<Self> {
        Self::with_domain(grid, Domain::Position, values)
    }

    pub fn with_domain(grid: Grid, domain: Domain, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(GspError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, domain, values })
    }

    pub fn zeros(grid: Grid, domain: Domain) -> Self {
        Self { grid, domain, values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f` at every node of the domain; the closure receives the node
    /// coordinates (one entry per axis).
    pub fn from_fn(grid: Grid, domain: Domain, f: impl Fn(&[f64]) -> C64) -> Self {
        let values = (0..grid.len())
            .map(|i| {
                let [a, b] = grid.unravel(i);
                if grid.dim == 1 {
                    f(&[grid.coordinate(domain, a)])
                } else {
                    f(&[grid.coordinate(domain, a), grid.coordinate(domain, b)])
                }
            })
            .collect();
        Self { grid, domain, values }
    }

    /// Discrete delta at the origin, scaled by `1/cell` so that it integrates to one.
    pub fn delta(grid: Grid, domain: Domain) -> Self {
        let mut f = Self::zeros(grid, domain);
        f.values[grid.origin_index()] = C64::new(1.0 / grid.cell(domain), 0.0);
        f
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn check_compatible(&self, other: &GridFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(GspError::GridMismatch);
        }
        if self.domain != other.domain {
            return Err(GspError::DomainMismatch("operands live in different domains".into()));
        }
        Ok(())
    }

    /// `cell * sum f conj(g)`, conjugate-linear in the second argument.
    pub fn inner(&self, other: &GridFunction) -> Result<C64> {
        self.check_compatible(other)?;
        let s: C64 = self.values.iter().zip(&other.values).map(|(a, b)| a * b.conj()).sum();
        Ok(s * self.grid.cell(self.domain))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell(self.domain)
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&self, c: C64) -> GridFunction {
        self.map(|v| v * c)
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            domain: self.domain,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: C64, other: &GridFunction) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect();
        Ok(GridFunction { grid: self.grid, domain: self.domain, values })
    }

    /// Pointwise product.
    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.check_compatible(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect();
        Ok(GridFunction { grid: self.grid, domain: self.domain, values })
    }

    /// Largest modulus over nodes on the torus edge (first or last node of any axis).
    pub fn boundary_mass(&self) -> f64 {
        let n = self.grid.n;
        let mut m: f64 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let [a, b] = self.grid.unravel(i);
            let edge = a == 0 || a == n - 1 || (self.grid.dim == 2 && (b == 0 || b == n - 1));
            if edge {
                m = m.max(v.norm());
            }
        }
        m
    }

    /// Fails when the boundary mass relative to the peak modulus exceeds `tol`.
    pub fn check_boundary(&self, tol: f64) -> Result<f64> {
        let peak = self.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let rel = if peak > 0.0 { self.boundary_mass() / peak } else { 0.0 };
        if rel > tol {
            return Err(GspError::InvalidParameter(format!(
                "boundary mass {rel:.3e} exceeds {tol:.1e}; enlarge the torus"
            )));
        }
        Ok(rel)
    }
}

/// Fast evaluation of the grid Fourier quadrature along one axis.
#[derive(Clone)]
pub struct AxisTransform {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    fwd_scale: f64,
    inv_scale: f64,
}

impl AxisTransform {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n;
        Self {
            n,
            fwd: planner.plan_fft_forward(n),
            inv: planner.plan_fft_inverse(n),
            fwd_scale: grid.step() / (2.0 * PI).sqrt(),
            inv_scale: grid.freq_step() / (2.0 * PI).sqrt(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn sign(j: usize) -> f64 {
        if j % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// Position samples to frequency samples, in place.
    pub fn forward(&self, data: &mut [C64]) {
        let n = self.n;
        for (j, v) in data.iter_mut().enumerate() {
            *v *= Self::sign(j);
        }
        self.fwd.process(data);
        let s = self.fwd_scale * Self::sign(n / 2);
        for (k, v) in data.iter_mut().enumerate() {
            *v *= s * Self::sign(k);
        }
    }

    /// Frequency samples to position samples, in place.
    pub fn inverse(&self, data: &mut [C64]) {
        let n = self.n;
        let s = Self::sign(n / 2);
        for (k, v) in data.iter_mut().enumerate() {
            *v *= s * Self::sign(k);
        }
        self.inv.process(data);
        for (j, v) in data.iter_mut().enumerate() {
            *v *= self.inv_scale * Self::sign(j);
        }
    }

    fn apply(&self, data: &mut [C64], forward: bool) {
        if forward {
            self.forward(data)
        } else {
            self.inverse(data)
        }
    }
}

/// Applies the axis transform along every axis of a row-major array of shape `n^dim`.
pub(crate) fn transform_all_axes(t: &AxisTransform, dim: usize, data: &mut [C64], forward: bool) {
    let n = t.n;
    for row in data.chunks_mut(n) {
        t.apply(row, forward);
    }
    if dim == 2 {
        let mut col = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            t.apply(&mut col, forward);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }
}

/// Grid Fourier transform of a position-domain function.
pub fn fourier(f: &GridFunction) -> Result<GridFunction> {
    transform(f, Domain::Position)
}

/// Inverse grid Fourier transform of a frequency-domain function.
pub fn inverse_fourier(f: &GridFunction) -> Result<GridFunction> {
    transform(f, Domain::Frequency)
}

fn transform(f: &GridFunction, expected: Domain) -> Result<GridFunction> {
    if f.domain != expected {
        return Err(GspError::DomainMismatch(format!("expected a {expected:?}-domain function")));
    }
    let t = AxisTransform::new(&f.grid);
    let mut values = f.values.clone();
    transform_all_axes(&t, f.grid.dim, &mut values, expected == Domain::Position);
    Ok(GridFunction { grid: f.grid, domain: expected.dual(), values })
}

/// Circular convolution `(f * g)(x_j) = h^d sum_m f(x_m) g(x_j - x_m)`.
pub fn convolve(f: &GridFunction, g: &GridFunction) -> Result<GridFunction> {
    f.check_compatible(g)?;
    if f.domain != Domain::Position {
        return Err(GspError::DomainMismatch("convolution acts on position-domain functions".into()));
    }
    let fh = fourier(f)?;
    let gh = fourier(g)?;
    let c = (2.0 * PI).powf(f.grid.dim as f64 / 2.0);
    let prod = fh.mul(&gh)?.scale(C64::new(c, 0.0));
    inverse_fourier(&prod)
}

/// Circular translation `(T_{x0} f)(x) = f(x - x0)`; `x0` must be a multiple of the domain step.
pub fn translate(f: &GridFunction, shift: &[f64]) -> Result<GridFunction> {
    let grid = f.grid;
    if shift.len() != grid.dim {
        return Err(GspError::LengthMismatch { expected: grid.dim, got: shift.len() });
    }
    let step = grid.domain_step(f.domain);
    let n = grid.n as i64;
    let mut s = [0i64; 2];
    for (a, &x0) in shift.iter().enumerate() {
        s[a] = grid.steps_of(x0, step)?.rem_euclid(n);
    }
    let mut out = vec![C64::new(0.0, 0.0); f.len()];
    let nu = grid.n;
    for (i, o) in out.iter_mut().enumerate() {
        let [a, b] = grid.unravel(i);
        let sa = (a as i64 - s[0]).rem_euclid(n) as usize;
        let src = if grid.dim == 1 {
            sa
        } else {
            sa * nu + (b as i64 - s[1]).rem_euclid(n) as usize
        };
        *o = f.values[src];
    }
    Ok(GridFunction { grid, domain: f.domain, values: out })
}

/// Pointwise phase `exp(i <coord, omega>)`; `omega` must be a multiple of the dual step.
pub fn modulate(f: &GridFunction, omega: &[f64]) -> Result<GridFunction> {
    let grid = f.grid;
    if omega.len() != grid.dim {
        return Err(GspError::LengthMismatch { expected: grid.dim, got: omega.len() });
    }
    let dual_step = grid.domain_step(f.domain.dual());
    for &w in omega {
        grid.steps_of(w, dual_step)?;
    }
    let values = f
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let [a, b] = grid.unravel(i);
            let mut phase = grid.coordinate(f.domain, a) * omega[0];
            if grid.dim == 2 {
                phase += grid.coordinate(f.domain, b) * omega[1];
            }
            v * C64::from_polar(1.0, phase)
        })
        .collect();
    Ok(GridFunction { grid, domain: f.domain, values })
}
