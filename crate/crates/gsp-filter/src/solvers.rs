//! Solution routes for `Ku = F (Ku + Kw)`, optimality diagnostics and error functionals.
//!
//! Covariances are passed in kernel view (see [`CovarianceOperator`]); the filter `F` is a plain
//! matrix acting on grid samples, `u_o = F v`. The operator equation is invariant under the
//! common factor `h`, so residuals are computed on kernel matrices directly.

use nalgebra::{Cholesky, Schur, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::grid::{Grid, GridFunction};
use crate::linalg::{self, CMat, CrossGram};
use crate::sim::{derive_seed, CovarianceOperator, Sampler, BLOCK};
use crate::spectral::{rn_filter, SpectralMeasure, WienerFilter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    WssRn,
    CommutingSpectral,
    GeneralInverse,
    DouglasPinv,
    Oracle,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::WssRn => "wss-rn",
            Method::CommutingSpectral => "commuting-spectral",
            Method::GeneralInverse => "general-inverse",
            Method::DouglasPinv => "douglas-pinv",
            Method::Oracle => "oracle",
        }
    }
}

/// Rank test of `ran Ku ⊆ ran (Ku + Kw)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeReport {
    pub rank_kv: usize,
    pub rank_augmented: usize,
    pub svd_tol: f64,
    pub range_ok: bool,
}

/// The three conditions singling out the canonical solution of the pseudo-inverse route.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    /// `||(I - P) F^H|| / ||F||` with `P` the projector onto `ran (Ku + Kw)`.
    pub range_residual: f64,
    /// Sine of the largest principal angle between `ker F^H` and `ker Ku`.
    pub kernel_angle: f64,
    pub kernel_dim_f_adjoint: usize,
    pub kernel_dim_ku: usize,
    pub norm_f: f64,
    /// `sup ||Ku f|| / ||(Ku + Kw) f||` over `f` outside `ker (Ku + Kw)`.
    pub norm_sup: f64,
    /// Largest of `||Ku z||`, `||Kw z||` over unit `z` in `ker (Ku + Kw)`, relative to the norms.
    pub kernel_inclusion: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// `||Ku - F (Ku + Kw)||` in the spectral norm.
    pub residual: f64,
    /// `residual / ||Ku||`.
    pub relative_residual: f64,
    /// Smallest eigenvalue of `Ku + Kw`.
    pub spectral_floor: Option<f64>,
    pub commutator: Option<f64>,
    pub tau: Option<f64>,
    pub range: Option<RangeReport>,
    pub uniqueness: Option<UniquenessReport>,
}

#[derive(Debug, Clone)]
pub struct FilterSolution {
    pub f: CMat,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

impl FilterSolution {
    /// Summary with the keys `method`, `residual`, `spectral_floor`, `range_ok`, `norm_sup`.
    pub fn diagnostics_json(&self) -> serde_json::Value {
        let d = &self.diagnostics;
        serde_json::json!({
            "method": self.method.as_str(),
            "residual": d.residual,
            "relative_residual": d.relative_residual,
            "spectral_floor": d.spectral_floor,
            "range_ok": d.range.map(|r| r.range_ok),
            "norm_sup": d.uniqueness.map(|u| u.norm_sup),
            "commutator": d.commutator,
            "tau": d.tau,
            "range": d.range,
            "uniqueness": d.uniqueness,
        })
    }
}

fn check_pair(ku: &CMat, kw: &CMat) -> Result<()> {
    if ku.shape() != kw.shape() || ku.nrows() != ku.ncols() {
        return Err(GspError::LengthMismatch { expected: ku.nrows(), got: kw.nrows() });
    }
    Ok(())
}

fn diagnostics(f: &CMat, ku: &CMat, kw: &CMat) -> Diagnostics {
    let residual = residual_norm(f, ku, kw);
    let scale = linalg::norm2_hermitian(ku);
    Diagnostics {
        residual,
        relative_residual: if scale > 0.0 { residual / scale } else { residual },
        ..Default::default()
    }
}

fn residual_norm(f: &CMat, ku: &CMat, kw: &CMat) -> f64 {
    let kv = ku + kw;
    linalg::norm2(&(ku - linalg::matmul(f, &kv)))
}

/// Plain matrix of the convolution filter with frequency response `fhat`.
pub fn filter_matrix(grid: &Grid, filter: &WienerFilter) -> CMat {
    let m: Vec<C64> = filter.fhat.iter().map(|&v| C64::new(v, 0.0)).collect();
    linalg::multiplier_matrix(grid, &m)
}

/// Radon-Nikodym filter as a convolution operator; residual measured on the induced covariances.
pub fn solve_wss(mu_u: &SpectralMeasure, mu_w: &SpectralMeasure) -> Result<FilterSolution> {
    let filter = rn_filter(mu_u, mu_w, None)?;
    let ku = CovarianceOperator::wss(mu_u)?;
    let kw = CovarianceOperator::wss(mu_w)?;
    let f = filter_matrix(mu_u.grid(), &filter);
    let mut diagnostics = diagnostics(&f, ku.matrix(), kw.matrix());
    diagnostics.tau = Some(filter.tau);
    Ok(FilterSolution { f, method: Method::WssRn, diagnostics })
}

/// Joint spectral calculus for commuting covariances, via the Schur form of `Ku + i Kw`.
pub fn solve_commuting(ku: &CMat, kw: &CMat, tau: Option<f64>) -> Result<FilterSolution> {
    check_pair(ku, kw)?;
    let (vu, _) = linalg::check_psd(ku, 1e-12, 1e-10)?;
    let (vw, _) = linalg::check_psd(kw, 1e-12, 1e-10)?;
    let nu = vu.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let nw = vw.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let commutator = linalg::norm2(&(linalg::matmul(ku, kw) - linalg::matmul(kw, ku)));
    if commutator > 1e-8 * nu * nw {
        return Err(GspError::NotCommuting(commutator));
    }
    let normal = ku + kw * C64::new(0.0, 1.0);
    let (q, t) = Schur::new(normal).unpack();
    let z: Vec<C64> = (0..t.nrows()).map(|i| t[(i, i)]).collect();
    let lambda_max = z.iter().map(|v| v.re + v.im).fold(0.0, f64::max);
    let tau = tau.unwrap_or(1e-12 * lambda_max);
    let response: Vec<C64> = z
        .iter()
        .map(|v| if v.re > tau { C64::new(v.re / (v.re + v.im.max(0.0)), 0.0) } else { C64::new(0.0, 0.0) })
        .collect();
    let f = linalg::reconstruct(&q, &response);
    let mut diagnostics = diagnostics(&f, ku, kw);
    diagnostics.commutator = Some(commutator);
    diagnostics.tau = Some(tau);
    Ok(FilterSolution { f, method: Method::CommutingSpectral, diagnostics })
}

/// `F = Ku (Ku + Kw)^{-1}`, gated by the spectral floor `lambda_min(Ku + Kw) >= eps`.
pub fn solve_general(ku: &CMat, kw: &CMat, eps: Option<f64>) -> Result<FilterSolution> {
    check_pair(ku, kw)?;
    linalg::check_psd(ku, 1e-12, 1e-10)?;
    linalg::check_psd(kw, 1e-12, 1e-10)?;
    let kv = linalg::hermitian_part(&(ku + kw));
    let (vals, _) = linalg::eigh(&kv);
    let min_eig = vals.first().copied().unwrap_or(0.0);
    let norm = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let floor = eps.unwrap_or(1e-10 * norm);
    if min_eig < floor || min_eig <= 0.0 {
        return Err(GspError::SpectralFloor { min_eig, floor });
    }
    let chol = Cholesky::new(kv).ok_or(GspError::SpectralFloor { min_eig, floor })?;
    // (Ku + Kw) F^H = Ku
    let f = chol.solve(ku).adjoint();
    let mut diagnostics = diagnostics(&f, ku, kw);
    diagnostics.spectral_floor = Some(min_eig);
    Ok(FilterSolution { f, method: Method::GeneralInverse, diagnostics })
}

/// Orthonormal basis of the columns of `q` selected by `keep`.
fn columns(q: &CMat, keep: impl Fn(usize) -> bool) -> CMat {
    let idx: Vec<usize> = (0..q.ncols()).filter(|&i| keep(i)).collect();
    CMat::from_fn(q.nrows(), idx.len(), |r, c| q[(r, idx[c])])
}

/// Sine of the largest principal angle between the spans of two orthonormal bases.
pub fn subspace_angle(a: &CMat, b: &CMat) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let proj = a * (a.adjoint() * b);
    linalg::norm2(&(b - proj)).min(1.0)
}

/// Minimal-norm solution `F = Ku (Ku + Kw)^+`, with Douglas' range condition and the
/// uniqueness conditions checked. Only hermiticity is required of the inputs.
pub fn solve_douglas(ku: &CMat, kw: &CMat, svd_tol: Option<f64>) -> Result<FilterSolution> {
    check_pair(ku, kw)?;
    for m in [ku, kw] {
        let defect = linalg::hermitian_defect(m);
        if defect > 1e-12 {
            return Err(GspError::NotHermitian(defect));
        }
    }
    let n = ku.nrows();
    let kv = linalg::hermitian_part(&(ku + kw));
    let (lam, q) = linalg::eigh(&kv);
    let sigma_v = lam.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let sigma_u = linalg::norm2_hermitian(ku);
    let tol = svd_tol.unwrap_or(1e-10 * sigma_v.max(sigma_u));

    let rank_kv = lam.iter().filter(|v| v.abs() > tol).count();
    let mut augmented = CMat::zeros(n, 2 * n);
    augmented.view_mut((0, 0), (n, n)).copy_from(&kv);
    augmented.view_mut((0, n), (n, n)).copy_from(ku);
    let rank_augmented = augmented.singular_values().iter().filter(|&&s| s > tol).count();
    let range = RangeReport { rank_kv, rank_augmented, svd_tol: tol, range_ok: rank_augmented == rank_kv };
    if !range.range_ok {
        return Err(GspError::RangeCondition { base: rank_kv, augmented: rank_augmented });
    }

    let keep = |i: usize| lam[i].abs() > tol;
    let qr = columns(&q, keep);
    let q0 = columns(&q, |i| !keep(i));
    let inv: Vec<C64> = lam.iter().filter(|v| v.abs() > tol).map(|&v| C64::new(1.0 / v, 0.0)).collect();
    let mut scaled = qr.clone();
    for (j, s) in inv.iter().enumerate() {
        for v in scaled.column_mut(j).iter_mut() {
            *v *= s;
        }
    }
    // Ku Q_r diag(1/lambda_r), then F = that times Q_r^H.
    let ku_scaled = linalg::matmul(ku, &scaled);
    let f = linalg::matmul_adj(&ku_scaled, &qr);

    let (gram, u) = linalg::eigh(&linalg::hermitian_part(&linalg::matmul_adj(&f, &f)));
    let norm_f = gram.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let ftol = tol.max(1e-10 * norm_f);
    let null_dim = f.singular_values().iter().filter(|&&s| s <= ftol).count();
    let ker_fh = columns(&u, |i| i < null_dim);
    let (lu, qu) = linalg::eigh(ku);
    let ker_ku = columns(&qu, |i| lu[i].abs() <= tol);

    let fh = f.adjoint();
    let range_residual = if norm_f > 0.0 {
        linalg::norm2(&(&fh - linalg::matmul(&qr, &linalg::matmul(&qr.adjoint(), &fh)))) / norm_f
    } else {
        0.0
    };
    let ratio = linalg::hermitian_part(&(ku_scaled.adjoint() * &ku_scaled));
    let norm_sup = linalg::eigh(&ratio).0.last().copied().unwrap_or(0.0).max(0.0).sqrt();
    let kernel_inclusion = if q0.ncols() == 0 {
        0.0
    } else {
        let sw = linalg::norm2_hermitian(kw).max(f64::MIN_POSITIVE);
        let su = sigma_u.max(f64::MIN_POSITIVE);
        (linalg::norm2(&(ku * &q0)) / su).max(linalg::norm2(&(kw * &q0)) / sw)
    };
    let uniqueness = UniquenessReport {
        range_residual,
        kernel_angle: subspace_angle(&ker_fh, &ker_ku),
        kernel_dim_f_adjoint: ker_fh.ncols(),
        kernel_dim_ku: ker_ku.ncols(),
        norm_f,
        norm_sup,
        kernel_inclusion,
    };
    let mut diagnostics = diagnostics(&f, ku, kw);
    diagnostics.spectral_floor = lam.first().copied();
    diagnostics.range = Some(range);
    diagnostics.uniqueness = Some(uniqueness);
    Ok(FilterSolution { f, method: Method::DouglasPinv, diagnostics })
}

/// Theoretical and (optionally) empirical correlation between the residual `u - F v` and the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    /// `||Ku - F (Ku + Kw)||`.
    pub residual: f64,
    pub relative_residual: f64,
}

pub fn residual_orthogonality(f: &CMat, ku: &CMat, kw: &CMat) -> Result<OrthogonalityReport> {
    check_pair(ku, kw)?;
    let residual = residual_norm(f, ku, kw);
    let scale = linalg::norm2_hermitian(ku);
    Ok(OrthogonalityReport { residual, relative_residual: if scale > 0.0 { residual / scale } else { residual } })
}

/// Monte Carlo estimate of `E[(u - F v) v^H]` together with its natural entry scale
/// `sqrt(max_j E|e_j|^2 max_k E|v_k|^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalOrthogonality {
    pub max_entry: f64,
    pub scale: f64,
    pub samples: usize,
    /// Mean over positions of the empirical `|e_j|^2`.
    pub mean_square_error: f64,
}

/// Empirical statistics of the residual `e = u - F v` over an ensemble of `(u, w)` pairs.
pub struct ResidualStats {
    pub cross: CMat,
    /// Per-position empirical `E|e_j|^2`.
    pub error_power: Vec<f64>,
    pub data_power: Vec<f64>,
    pub samples: usize,
}

/// Draws `count` realizations of `u` and `w`, applies `filters` to `v = u + w` and accumulates
/// the residual statistics for each filter in a fixed order.
pub fn residual_statistics(
    filters: &[&CMat],
    ku: &CovarianceOperator,
    kw: &CovarianceOperator,
    count: usize,
    seed: u64,
    with_cross: bool,
) -> Result<Vec<ResidualStats>> {
    if ku.grid() != kw.grid() {
        return Err(GspError::GridMismatch);
    }
    let n = ku.grid().n();
    let su = Sampler::new(ku, derive_seed(seed, 1))?;
    let sw = Sampler::new(kw, derive_seed(seed, 2))?;
    let mut grams: Vec<CrossGram> = filters.iter().map(|_| CrossGram::new(n, n)).collect();
    let mut err_pow = vec![vec![0.0; n]; filters.len()];
    let mut data_pow = vec![0.0; n];
    let mut wbuf = vec![C64::new(0.0, 0.0); BLOCK.min(count) * n];
    let mut ebuf = wbuf.clone();
    su.for_each_block(count, |start, u| {
        let rows = u.len() / n;
        let w = &mut wbuf[..rows * n];
        sw.fill(start, rows, w);
        let v: Vec<C64> = u.iter().zip(w.iter()).map(|(a, b)| a + b).collect();
        for (k, x) in v.iter().enumerate() {
            data_pow[k % n] += x.norm_sqr();
        }
        for (fi, f) in filters.iter().enumerate() {
            let e = &mut ebuf[..rows * n];
            e.copy_from_slice(u);
            // e <- u - v F^T (row-major rows of realizations)
            // SAFETY: `v` and `e` are `rows x n` row-major; `f` is `n x n` column-major.
            unsafe {
                linalg::gemm_raw(
                    rows,
                    n,
                    n,
                    C64::new(-1.0, 0.0),
                    v.as_ptr(),
                    n as isize,
                    1,
                    f.as_ptr(),
                    n as isize,
                    1,
                    C64::new(1.0, 0.0),
                    e.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
            for (k, x) in e.iter().enumerate() {
                err_pow[fi][k % n] += x.norm_sqr();
            }
            if with_cross {
                grams[fi].add(e, &v, rows);
            }
        }
    });
    let c = 1.0 / count.max(1) as f64;
    let data_power: Vec<f64> = data_pow.iter().map(|v| v * c).collect();
    Ok(grams
        .into_iter()
        .zip(err_pow)
        .map(|(g, ep)| ResidualStats {
            cross: if with_cross { g.mean() } else { CMat::zeros(0, 0) },
            error_power: ep.iter().map(|v| v * c).collect(),
            data_power: data_power.clone(),
            samples: count,
        })
        .collect())
}

/// Monte Carlo form of the orthogonality principle for a filter `f`.
pub fn residual_orthogonality_mc(
    f: &CMat,
    ku: &CovarianceOperator,
    kw: &CovarianceOperator,
    count: usize,
    seed: u64,
) -> Result<EmpiricalOrthogonality> {
    let stats = residual_statistics(&[f], ku, kw, count, seed, true)?.remove(0);
    let emax = stats.error_power.iter().cloned().fold(0.0, f64::max);
    let vmax = stats.data_power.iter().cloned().fold(0.0, f64::max);
    let mean_square_error = stats.error_power.iter().sum::<f64>() / stats.error_power.len().max(1) as f64;
    Ok(EmpiricalOrthogonality {
        max_entry: linalg::max_abs(&stats.cross),
        scale: (emax * vmax).sqrt(),
        samples: count,
        mean_square_error,
    })
}

/// Mean-square error of the estimate `(F v, phi)` of `(u, phi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseReport {
    /// `((Ku - F Ku - Ku F^H + F Kv F^H) phi, phi)`, valid for any `F`.
    pub value: f64,
    /// `((Ku - F Kv F^H) phi, phi)`, `((I - F) Ku phi, phi)` and `(F Kw phi, phi)`.
    pub forms: [f64; 3],
    /// Largest disagreement among the forms and the value, relative to `(Kv phi, phi)`.
    pub spread: f64,
}

impl MseReport {
    /// Whether the three optimal-filter forms agree with the general value to `tol`.
    pub fn consistent(&self, tol: f64) -> bool {
        self.spread <= tol
    }
}

/// Evaluates the error functional; `ku`, `kw` in kernel view on the grid of `phi`.
pub fn mse(f: &CMat, ku: &CMat, kw: &CMat, phi: &GridFunction) -> Result<MseReport> {
    check_pair(ku, kw)?;
    let n = ku.nrows();
    if phi.len() != n || phi.grid().dim() != 1 {
        return Err(GspError::LengthMismatch { expected: n, got: phi.len() });
    }
    let h = phi.grid().step();
    let p = DVector::from_column_slice(phi.values());
    let form = |m: &CMat| -> f64 { (p.adjoint() * (m * &p))[(0, 0)].re * h * h };
    let kv = ku + kw;
    let fh = f.adjoint();
    let fku = f * ku;
    let fkvfh = f * &kv * &fh;
    let value = form(&(ku - &fku - ku * &fh + &fkvfh));
    let forms = [form(&(ku - &fkvfh)), form(&(ku - &fku)), form(&(f * kw))];
    let scale = form(&kv).abs().max(f64::MIN_POSITIVE);
    let spread = forms.iter().map(|x| (x - value).abs()).fold(0.0, f64::max) / scale;
    Ok(MseReport { value, forms, spread })
}

/// Per-entry standard deviation scale of the empirical normal-equation estimate:
/// `sqrt(max_j E|e_j|^2 * max_k (Kv^{-1})_kk)` with `e = u - F v` for the optimal `F`.
pub fn oracle_scale(f: &CMat, ku: &CMat, kw: &CMat) -> Result<f64> {
    check_pair(ku, kw)?;
    let err = ku - f * ku;
    let emax = (0..err.nrows()).map(|j| err[(j, j)].re).fold(0.0, f64::max);
    let kv = linalg::hermitian_part(&(ku + kw));
    let (vals, vecs) = linalg::eigh(&kv);
    if vals.first().is_none_or(|&v| v <= 0.0) {
        return Err(GspError::SpectralFloor { min_eig: vals.first().copied().unwrap_or(0.0), floor: 0.0 });
    }
    let inv_diag = (0..vecs.nrows())
        .map(|k| vecs.row(k).iter().zip(&vals).map(|(q, l)| q.norm_sqr() / l).sum::<f64>())
        .fold(0.0, f64::max);
    Ok((emax * inv_diag).sqrt())
}

/// Brute-force estimate from `count` simulated pairs: solves `F Cv = Cuv` for the empirical
/// covariances by Gaussian elimination.
pub fn lmmse_oracle(ku: &CovarianceOperator, kw: &CovarianceOperator, count: usize, seed: u64) -> Result<FilterSolution> {
    if ku.grid() != kw.grid() {
        return Err(GspError::GridMismatch);
    }
    let n = ku.grid().n();
    let su = Sampler::new(ku, derive_seed(seed, 1))?;
    let sw = Sampler::new(kw, derive_seed(seed, 2))?;
    let mut gram = CrossGram::new(2 * n, n);
    let mut wbuf = vec![C64::new(0.0, 0.0); BLOCK.min(count) * n];
    let mut stacked = vec![C64::new(0.0, 0.0); BLOCK.min(count) * 2 * n];
    let mut vbuf = wbuf.clone();
    su.for_each_block(count, |start, u| {
        let rows = u.len() / n;
        let w = &mut wbuf[..rows * n];
        sw.fill(start, rows, w);
        let v = &mut vbuf[..rows * n];
        let x = &mut stacked[..rows * 2 * n];
        for r in 0..rows {
            for j in 0..n {
                let (a, b) = (u[r * n + j], w[r * n + j]);
                v[r * n + j] = a + b;
                x[r * 2 * n + j] = a;
                x[r * 2 * n + n + j] = a + b;
            }
        }
        gram.add(x, v, rows);
    });
    let g = gram.mean();
    let cuv = g.rows(0, n).into_owned();
    let cv = g.rows(n, n).into_owned();
    // Cv F^H = Cuv^H
    let fh = elimination::solve(&cv, &cuv.adjoint())?;
    let f = fh.adjoint();
    let diagnostics = diagnostics(&f, ku.matrix(), kw.matrix());
    Ok(FilterSolution { f, method: Method::Oracle, diagnostics })
}

mod elimination {
    use super::*;

    /// Solves `A X = B` by Gaussian elimination with partial pivoting.
    pub fn solve(a: &CMat, b: &CMat) -> Result<CMat> {
        let n = a.nrows();
        let m = b.ncols();
        let w = n + m;
        let mut t: Vec<C64> = vec![C64::new(0.0, 0.0); n * w];
        for i in 0..n {
            for j in 0..n {
                t[i * w + j] = a[(i, j)];
            }
            for j in 0..m {
                t[i * w + n + j] = b[(i, j)];
            }
        }
        let scale = a.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&x, &y| t[x * w + col].norm().total_cmp(&t[y * w + col].norm()))
                .expect("non-empty range");
            if t[pivot * w + col].norm() <= 1e-14 * scale {
                return Err(GspError::Singular(col));
            }
            if pivot != col {
                for j in 0..w {
                    t.swap(col * w + j, pivot * w + j);
                }
            }
            let inv = C64::new(1.0, 0.0) / t[col * w + col];
            let (head, tail) = t.split_at_mut((col + 1) * w);
            let prow = &head[col * w..];
            for row in tail.chunks_mut(w) {
                let factor = row[col] * inv;
                if factor.norm() == 0.0 {
                    continue;
                }
                for j in col..w {
                    row[j] -= factor * prow[j];
                }
            }
        }
        let mut x = CMat::zeros(n, m);
        for i in (0..n).rev() {
            let inv = C64::new(1.0, 0.0) / t[i * w + i];
            for j in 0..m {
                let mut s = t[i * w + n + j];
                for k in i + 1..n {
                    s -= t[i * w + k] * x[(k, j)];
                }
                x[(i, j)] = s * inv;
            }
        }
        Ok(x)
    }
}
