//! Dense complex matrix helpers shared by the simulation and solver modules.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{GspError, Result};
use crate::grid::Grid;

pub type CMat = DMatrix<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `C = A B` through the blocked complex GEMM kernel.
pub fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "inner dimensions differ");
    let (m, k, n) = (a.nrows(), a.ncols(), b.ncols());
    let mut c = CMat::zeros(m, n);
    if m == 0 || n == 0 || k == 0 {
        return c;
    }
    // SAFETY: all three buffers are column-major nalgebra storage whose
    // extents match the dimensions and strides handed to the kernel.
    unsafe {
        gemm_raw(m, k, n, ONE, a.as_ptr(), 1, m as isize, b.as_ptr(), 1, k as isize, ZERO, c.as_mut_ptr(), 1, m as isize);
    }
    c
}

/// Raw strided complex GEMM: `C <- alpha A B + beta C`.
///
/// # Safety
/// The pointers must address arrays large enough for the given shapes and strides.
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn gemm_raw(
    m: usize,
    k: usize,
    n: usize,
    alpha: C64,
    a: *const C64,
    rsa: isize,
    csa: isize,
    b: *const C64,
    rsb: isize,
    csb: isize,
    beta: C64,
    c: *mut C64,
    rsc: isize,
    csc: isize,
) {
    use matrixmultiply::{zgemm, CGemmOption};
    zgemm(
        CGemmOption::Standard,
        CGemmOption::Standard,
        m,
        k,
        n,
        [alpha.re, alpha.im],
        a as *const [f64; 2],
        rsa,
        csa,
        b as *const [f64; 2],
        rsb,
        csb,
        [beta.re, beta.im],
        c as *mut [f64; 2],
        rsc,
        csc,
    );
}

/// `A B^H`.
pub fn matmul_adj(a: &CMat, b: &CMat) -> CMat {
    matmul(a, &b.adjoint())
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Max-entry distance between two matrices of equal shape.
pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Largest entry of `A - A^H` relative to the largest entry of `A`.
pub fn hermitian_defect(a: &CMat) -> f64 {
    let scale = max_abs(a).max(f64::MIN_POSITIVE);
    let n = a.nrows();
    let mut d: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            d = d.max((a[(i, j)] - a[(j, i)].conj()).norm());
        }
    }
    d / scale
}

/// `(A + A^H)/2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * C64::new(0.5, 0.0)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let eig = nalgebra::SymmetricEigen::new(hermitian_part(a));
    let n = a.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

/// `V diag(d) V^H`.
pub fn reconstruct(vectors: &CMat, diag: &[C64]) -> CMat {
    let mut scaled = vectors.clone();
    for (j, &d) in diag.iter().enumerate() {
        for v in scaled.column_mut(j).iter_mut() {
            *v *= d;
        }
    }
    matmul_adj(&scaled, vectors)
}

/// Spectral norm (largest singular value).
pub fn norm2(a: &CMat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Spectral norm of a Hermitian matrix via its eigenvalues.
pub fn norm2_hermitian(a: &CMat) -> f64 {
    let (vals, _) = eigh(a);
    vals.iter().map(|v| v.abs()).fold(0.0, f64::max)
}

/// Checks that `a` is Hermitian and positive semidefinite within
/// `min eigenvalue >= -tol_rel * ||a||`.
pub fn check_psd(a: &CMat, herm_tol: f64, tol_rel: f64) -> Result<(Vec<f64>, CMat)> {
    let defect = hermitian_defect(a);
    if defect > herm_tol {
        return Err(GspError::NotHermitian(defect));
    }
    let (vals, vecs) = eigh(a);
    let norm = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let tol = tol_rel * norm;
    if let Some(&min) = vals.first() {
        if min < -tol {
            return Err(GspError::NotPsd { min_eig: min, tol });
        }
    }
    Ok((vals, vecs))
}

/// Plain operator matrix of the Fourier multiplier `m(xi_k)` on a one-dimensional grid:
/// `(F phi)_j = sum_k F[j,k] phi_k` with `F = inverse_fourier . diag(m) . fourier`.
pub fn multiplier_matrix(grid: &Grid, m: &[C64]) -> CMat {
    let n = grid.n();
    assert_eq!(m.len(), n);
    let h = grid.step();
    let g: Vec<C64> = (0..n)
        .map(|d| {
            let dd = d as f64;
            m.iter()
                .enumerate()
                .map(|(l, &ml)| ml * C64::from_polar(1.0, dd * h * grid.frequency(l)))
                .sum::<C64>()
                / n as f64
        })
        .collect();
    CMat::from_fn(n, n, |j, k| g[(j + n - k) % n])
}

/// Builds a matrix from row-major data.
pub fn from_rows(n_rows: usize, n_cols: usize, data: &[C64]) -> CMat {
    CMat::from_fn(n_rows, n_cols, |i, j| data[i * n_cols + j])
}

/// Running sum of `sum_i x_i y_i^H` over realizations supplied as row-major blocks.
///
/// The product is evaluated as one real GEMM over the interleaved `(re, im)` layout, so the
/// blocks are consumed in place; blocks must be fed in a fixed order for bit-stable sums.
#[derive(Debug, Clone)]
pub struct CrossGram {
    left: usize,
    right: usize,
    acc: Vec<f64>,
    count: usize,
}

impl CrossGram {
    pub fn new(left: usize, right: usize) -> Self {
        Self { left, right, acc: vec![0.0; 4 * left * right], count: 0 }
    }

    /// Adds `rows` realizations; `x` is `rows x left`, `y` is `rows x right`, both row-major.
    pub fn add(&mut self, x: &[C64], y: &[C64], rows: usize) {
        assert_eq!(x.len(), rows * self.left);
        assert_eq!(y.len(), rows * self.right);
        if rows == 0 {
            return;
        }
        let (m, n) = (2 * self.left, 2 * self.right);
        // SAFETY: `x` and `y` are `rows x m` and `rows x n` row-major real arrays when viewed
        // as interleaved pairs, and `acc` holds `m x n` entries.
        unsafe {
            matrixmultiply::dgemm(
                m,
                rows,
                n,
                1.0,
                x.as_ptr() as *const f64,
                1,
                m as isize,
                y.as_ptr() as *const f64,
                n as isize,
                1,
                1.0,
                self.acc.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        self.count += rows;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// `(1/count) sum_i x_i y_i^H`.
    pub fn mean(&self) -> CMat {
        let n2 = 2 * self.right;
        let c = 1.0 / self.count.max(1) as f64;
        CMat::from_fn(self.left, self.right, |j, k| {
            let at = |a: usize, b: usize| self.acc[(2 * j + a) * n2 + 2 * k + b];
            C64::new(at(0, 0) + at(1, 1), at(1, 0) - at(0, 1)) * c
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, m: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, m, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn gemm_matches_naive_product() {
        let a = random(7, 5, 1);
        let b = random(5, 9, 2);
        assert!(max_abs_diff(&matmul(&a, &b), &(&a * &b)) < 1e-13);
        assert!(max_abs_diff(&matmul_adj(&a, &a), &(&a * a.adjoint())) < 1e-13);
    }

    #[test]
    fn eigh_reconstructs() {
        let a = random(12, 12, 3);
        let h = hermitian_part(&a);
        let (vals, vecs) = eigh(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let d: Vec<C64> = vals.iter().map(|&v| C64::new(v, 0.0)).collect();
        assert!(max_abs_diff(&reconstruct(&vecs, &d), &h) < 1e-12);
    }

    #[test]
    fn psd_check_rejects_indefinite() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-0.5, 0.0)]));
        assert!(matches!(check_psd(&a, 1e-12, 1e-10), Err(GspError::NotPsd { .. })));
        let mut b = a.clone();
        b[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(check_psd(&b, 1e-12, 1e-10), Err(GspError::NotHermitian(_))));
    }

    #[test]
    fn cross_gram_matches_direct_sum() {
        let x = random(37, 5, 4);
        let y = random(37, 3, 5);
        let mut g = CrossGram::new(5, 3);
        let xr: Vec<C64> = (0..37).flat_map(|i| (0..5).map(move |j| (i, j))).map(|(i, j)| x[(i, j)]).collect();
        let yr: Vec<C64> = (0..37).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| y[(i, j)]).collect();
        g.add(&xr[..20 * 5], &yr[..20 * 3], 20);
        g.add(&xr[20 * 5..], &yr[20 * 3..], 17);
        let direct = x.transpose() * y.map(|v| v.conj()) / C64::new(37.0, 0.0);
        assert_eq!(g.count(), 37);
        assert!(max_abs_diff(&g.mean(), &direct) < 1e-14);
    }

    #[test]
    fn identity_multiplier_is_identity() {
        let g = Grid::new(16, 3.0).unwrap();
        let m = multiplier_matrix(&g, &vec![C64::new(1.0, 0.0); 16]);
        assert!(max_abs_diff(&m, &CMat::identity(16, 16)) < 1e-13);
    }
}
