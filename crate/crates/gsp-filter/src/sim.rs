//! Covariance operators on grid functions and Monte Carlo ensembles of circular complex
//! Gaussian processes.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{GspError, Result};
use crate::grid::{AxisTransform, Domain, Grid, GridFunction};
use crate::linalg::{self, CMat, CrossGram};
use crate::spectral::SpectralMeasure;

/// Hermitian tolerance for covariance matrices.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative tolerance below which negative eigenvalues are treated as zero.
pub const PSD_TOL: f64 = 1e-10;
/// Realizations generated per block; fixed so that sums do not depend on parallelism.
pub const BLOCK: usize = 2048;

/// Covariance operator in kernel view: `(K phi)(x_j) = h sum_k matrix[j,k] phi(x_k)`.
#[derive(Debug, Clone)]
pub struct CovarianceOperator {
    grid: Grid,
    matrix: CMat,
    /// Fourier multiplier of `K` when the operator is a convolution.
    multiplier: Option<Vec<f64>>,
    psd_checked: bool,
}

impl CovarianceOperator {
    /// Wraps a kernel matrix after checking that it is Hermitian and positive semidefinite.
    pub fn new(grid: Grid, matrix: CMat) -> Result<Self> {
        check_shape(&grid, &matrix)?;
        linalg::check_psd(&matrix, HERMITIAN_TOL, PSD_TOL)?;
        Ok(Self { grid, matrix, multiplier: None, psd_checked: true })
    }

    /// Wraps a kernel matrix without the eigenvalue check (e.g. empirical estimates).
    pub fn new_unchecked(grid: Grid, matrix: CMat) -> Result<Self> {
        check_shape(&grid, &matrix)?;
        Ok(Self { grid, matrix, multiplier: None, psd_checked: false })
    }

    /// Convolution operator with Fourier multiplier `m >= 0`.
    pub fn from_multiplier(grid: Grid, multiplier: Vec<f64>) -> Result<Self> {
        if grid.dim() != 1 {
            return Err(GspError::InvalidGrid("covariance operators act on one-dimensional grids".into()));
        }
        if multiplier.len() != grid.n() {
            return Err(GspError::LengthMismatch { expected: grid.n(), got: multiplier.len() });
        }
        if let Some((index, &value)) = multiplier.iter().enumerate().find(|(_, m)| !(**m >= 0.0)) {
            return Err(GspError::NegativeWeight { index, value });
        }
        let m: Vec<C64> = multiplier.iter().map(|&v| C64::new(v, 0.0)).collect();
        let mut matrix = linalg::multiplier_matrix(&grid, &m) / C64::new(grid.step(), 0.0);
        matrix = linalg::hermitian_part(&matrix);
        Ok(Self { grid, matrix, multiplier: Some(multiplier), psd_checked: true })
    }

    /// White noise of power `p`: `K = p Id`, i.e. `(p/h) Id` in kernel view.
    pub fn white_noise(grid: Grid, p: f64) -> Result<Self> {
        positive_power(p)?;
        let n = grid.n();
        let mut op = Self::from_multiplier(grid, vec![p; n])?;
        op.matrix = CMat::identity(n, n) * C64::new(p / grid.step(), 0.0);
        Ok(op)
    }

    /// Covariance of `D^alpha` applied to white noise of power `p`: the multiplier `p xi^{2 alpha}`.
    pub fn derivative_noise(grid: Grid, p: f64, alpha: u32) -> Result<Self> {
        positive_power(p)?;
        let m = grid.frequencies().iter().map(|xi| p * xi.powi(2 * alpha as i32)).collect();
        Self::from_multiplier(grid, m)
    }

    /// Stationary covariance with spectral measure `mu`: multiplier `weights / freq_step`.
    pub fn wss(mu: &SpectralMeasure) -> Result<Self> {
        Self::from_multiplier(*mu.grid(), mu.density())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn multiplier(&self) -> Option<&[f64]> {
        self.multiplier.as_deref()
    }

    pub fn is_wss(&self) -> bool {
        self.multiplier.is_some()
    }

    pub fn psd_checked(&self) -> bool {
        self.psd_checked
    }

    /// The operator itself, `h * matrix`.
    pub fn operator(&self) -> CMat {
        &self.matrix * C64::new(self.grid.step(), 0.0)
    }

    /// `(K phi)(x_j)`.
    pub fn apply(&self, phi: &GridFunction) -> Result<GridFunction> {
        if phi.grid() != &self.grid {
            return Err(GspError::GridMismatch);
        }
        let v = DVector::from_column_slice(phi.values());
        let out = (&self.matrix * v) * C64::new(self.grid.step(), 0.0);
        GridFunction::new(self.grid, out.as_slice().to_vec())
    }

    /// The covariance form `(K phi, psi)`.
    pub fn form(&self, phi: &GridFunction, psi: &GridFunction) -> Result<C64> {
        self.apply(phi)?.inner(psi)
    }

    pub fn add(&self, other: &CovarianceOperator) -> Result<CovarianceOperator> {
        if self.grid != other.grid {
            return Err(GspError::GridMismatch);
        }
        let multiplier = match (&self.multiplier, &other.multiplier) {
            (Some(a), Some(b)) => Some(a.iter().zip(b).map(|(x, y)| x + y).collect()),
            _ => None,
        };
        Ok(Self {
            grid: self.grid,
            matrix: &self.matrix + &other.matrix,
            multiplier,
            psd_checked: self.psd_checked && other.psd_checked,
        })
    }
}

fn check_shape(grid: &Grid, matrix: &CMat) -> Result<()> {
    if grid.dim() != 1 {
        return Err(GspError::InvalidGrid("covariance operators act on one-dimensional grids".into()));
    }
    if matrix.nrows() != grid.n() || matrix.ncols() != grid.n() {
        return Err(GspError::LengthMismatch { expected: grid.n(), got: matrix.nrows().max(matrix.ncols()) });
    }
    Ok(())
}

fn positive_power(p: f64) -> Result<()> {
    if p > 0.0 && p.is_finite() {
        Ok(())
    } else {
        Err(GspError::InvalidParameter(format!("power must be positive, got {p}")))
    }
}

/// Derives an independent seed for a labelled sub-experiment.
pub fn derive_seed(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The random stream of realization `index` under `seed`.
pub fn realization_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Standard circular complex Gaussians: real and imaginary parts `N(0, 1/2)`.
pub fn fill_circular_normal(rng: &mut impl Rng, out: &mut [C64]) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for v in out {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *v = C64::new(re * s, im * s);
    }
}

enum Coloring {
    /// Per-frequency amplitudes for the inverse grid transform.
    Spectral { transform: AxisTransform, amplitude: Vec<f64> },
    /// `V diag(sqrt(lambda_+))`, column-major.
    Dense(CMat),
}

/// Draws realizations of the circular Gaussian process with a given covariance.
pub struct Sampler {
    n: usize,
    seed: u64,
    coloring: Coloring,
}

impl Sampler {
    pub fn new(cov: &CovarianceOperator, seed: u64) -> Result<Self> {
        let grid = cov.grid;
        let n = grid.n();
        let coloring = match &cov.multiplier {
            Some(m) => {
                // Eigenvalues of the kernel matrix are m/h on the unit-norm Fourier modes.
                let h = grid.step();
                let c = (2.0 * std::f64::consts::PI).sqrt() / (grid.freq_step() * (n as f64).sqrt());
                let amplitude = m.iter().map(|&v| (v / h).sqrt() * c).collect();
                Coloring::Spectral { transform: AxisTransform::new(&grid), amplitude }
            }
            None => {
                let (vals, vecs) = linalg::check_psd(&cov.matrix, HERMITIAN_TOL, PSD_TOL)?;
                let mut factor = vecs;
                for (j, &lam) in vals.iter().enumerate() {
                    let s = lam.max(0.0).sqrt();
                    for v in factor.column_mut(j).iter_mut() {
                        *v *= s;
                    }
                }
                Coloring::Dense(factor)
            }
        };
        Ok(Self { n, seed, coloring })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Writes realizations `start..start + rows` row-major into `out`.
    pub fn fill(&self, start: usize, rows: usize, out: &mut [C64]) {
        let n = self.n;
        assert_eq!(out.len(), rows * n);
        out.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            let mut rng = realization_rng(self.seed, (start + i) as u64);
            fill_circular_normal(&mut rng, row);
            if let Coloring::Spectral { transform, amplitude } = &self.coloring {
                for (v, a) in row.iter_mut().zip(amplitude) {
                    *v *= a;
                }
                transform.inverse(row);
            }
        });
        if let Coloring::Dense(factor) = &self.coloring {
            let z = out.to_vec();
            // SAFETY: `z` and `out` are `rows x n` row-major, `factor` is `n x n` column-major;
            // `out = z factor^T` reads `factor^T[k, j] = factor[j + k n]`.
            unsafe {
                linalg::gemm_raw(
                    rows,
                    n,
                    n,
                    C64::new(1.0, 0.0),
                    z.as_ptr(),
                    n as isize,
                    1,
                    factor.as_ptr(),
                    n as isize,
                    1,
                    C64::new(0.0, 0.0),
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
    }

    /// Visits realizations `0..count` in consecutive blocks of [`BLOCK`] rows.
    pub fn for_each_block(&self, count: usize, mut visit: impl FnMut(usize, &[C64])) {
        let mut buf = vec![C64::new(0.0, 0.0); BLOCK.min(count) * self.n];
        let mut start = 0;
        while start < count {
            let rows = BLOCK.min(count - start);
            let block = &mut buf[..rows * self.n];
            self.fill(start, rows, block);
            visit(start, block);
            start += rows;
        }
    }
}

/// `N` realizations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GspEnsemble {
    grid: Grid,
    samples: Vec<C64>,
    len: usize,
    seed: u64,
}

impl GspEnsemble {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[C64] {
        &self.samples
    }

    pub fn realization(&self, i: usize) -> &[C64] {
        let n = self.grid.n();
        &self.samples[i * n..(i + 1) * n]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Componentwise sum of two ensembles of the same size.
    pub fn sum(&self, other: &GspEnsemble) -> Result<GspEnsemble> {
        if self.grid != other.grid || self.len != other.len {
            return Err(GspError::GridMismatch);
        }
        let samples = self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect();
        Ok(GspEnsemble { grid: self.grid, samples, len: self.len, seed: self.seed })
    }
}

/// Draws `count` realizations; realization `i` depends only on `(cov, seed, i)`.
pub fn sample(cov: &CovarianceOperator, count: usize, seed: u64) -> Result<GspEnsemble> {
    let sampler = Sampler::new(cov, seed)?;
    let n = cov.grid.n();
    let mut samples = vec![C64::new(0.0, 0.0); count * n];
    for (b, chunk) in samples.chunks_mut(BLOCK * n).enumerate() {
        let rows = chunk.len() / n;
        sampler.fill(b * BLOCK, rows, chunk);
    }
    Ok(GspEnsemble { grid: cov.grid, samples, len: count, seed })
}

/// Sample-wise pairing `(u, phi) = h sum_j u_j conj(phi_j)`.
pub fn pair(ens: &GspEnsemble, phi: &GridFunction) -> Result<Vec<C64>> {
    if phi.grid() != &ens.grid {
        return Err(GspError::GridMismatch);
    }
    Ok(pair_rows(&ens.samples, phi.values(), ens.grid.step()))
}

pub(crate) fn pair_rows(rows: &[C64], phi: &[C64], h: f64) -> Vec<C64> {
    rows.chunks(phi.len())
        .map(|u| u.iter().zip(phi).map(|(a, b)| a * b.conj()).sum::<C64>() * h)
        .collect()
}

/// Empirical covariance `(1/N) sum_i u_i u_i^H` in kernel view.
pub fn empirical_covariance(ens: &GspEnsemble) -> Result<CovarianceOperator> {
    let n = ens.grid.n();
    let mut gram = CrossGram::new(n, n);
    for chunk in ens.samples.chunks(BLOCK * n) {
        gram.add(chunk, chunk, chunk.len() / n);
    }
    let m = linalg::hermitian_part(&gram.mean());
    CovarianceOperator::new_unchecked(ens.grid, m)
}

/// Empirical pseudo-covariance `(1/N) sum_i u_i u_i^T`.
pub fn empirical_pseudo_covariance(ens: &GspEnsemble) -> CMat {
    let n = ens.grid.n();
    let mut out = CMat::zeros(n, n);
    for i in 0..ens.len {
        let u = ens.realization(i);
        for k in 0..n {
            for j in 0..n {
                out[(j, k)] += u[j] * u[k];
            }
        }
    }
    out / C64::new(ens.len.max(1) as f64, 0.0)
}

/// Number of worker threads requested through `GSP_THREADS`, if set.
pub fn env_threads() -> Option<usize> {
    std::env::var("GSP_THREADS").ok()?.trim().parse::<usize>().ok().filter(|&t| t > 0)
}

/// Runs `f` on a pool with `threads` workers, or with the `GSP_THREADS` setting when `None`.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads.or_else(env_threads) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .expect("thread pool construction")
            .install(f),
        None => f(),
    }
}

/// Position-domain grid function from a slice of values.
pub fn grid_function(grid: &Grid, values: &[C64]) -> GridFunction {
    GridFunction::with_domain(*grid, Domain::Position, values.to_vec()).expect("length matches grid")
}
