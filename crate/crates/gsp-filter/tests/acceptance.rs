//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit status if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use gsp_filter::gabor::{GaborConfig, GaborSystem};
use gsp_filter::grid::inverse_fourier;
use gsp_filter::linalg::{self, CMat};
use gsp_filter::sim::{derive_seed, with_threads, CovarianceOperator, Sampler, BLOCK};
use gsp_filter::solvers::{
    filter_matrix, lmmse_oracle, mse, oracle_scale, residual_orthogonality, residual_statistics, solve_commuting,
    solve_douglas, solve_general, solve_wss,
};
use gsp_filter::spectral::{rn_filter, wss_mse_forms, SpectralMeasure};
use gsp_filter::symbol_matrix::{
    build_m, decay_fit, default_radius, rough_coefficients, verify_composition, weyl_grid, SymplecticStft,
};
use gsp_filter::weyl::{
    cross_wigner, mod_norm, operator_form, phase_space_inner, symbol_from_operator, weyl_quantize, MixedNorm, ModInput,
    ModNormOptions, WeylSymbol,
};
use gsp_filter::{Domain, Grid, GridFunction, GspError, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 100_000;

type Outcome = Result<(bool, String), String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn err(e: GspError) -> String {
    e.to_string()
}

fn random_c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_matrix(n: usize, m: usize, rng: &mut ChaCha8Rng) -> CMat {
    CMat::from_fn(n, m, |_, _| random_c(rng))
}

fn random_function(g: &Grid, rng: &mut ChaCha8Rng) -> GridFunction {
    GridFunction::new(*g, (0..g.len()).map(|_| random_c(rng)).collect()).unwrap()
}

fn random_pair(g: &Grid, rng: &mut ChaCha8Rng) -> (SpectralMeasure, SpectralMeasure) {
    let nyq = g.nyquist();
    let lo = -rng.random_range(0.05..0.5) * nyq;
    let hi = rng.random_range(0.05..0.5) * nyq;
    let band = SpectralMeasure::band(*g, lo, hi, rng.random_range(0.5..2.0)).unwrap();
    let smooth = SpectralMeasure::sobolev(*g, rng.random_range(-1.5..-0.5)).unwrap().scaled(rng.random_range(0.1..1.0)).unwrap();
    let mu_u = band.add(&smooth).unwrap();
    let lo2 = rng.random_range(-0.6..0.2) * nyq;
    let noise_band = SpectralMeasure::band(*g, lo2, lo2 + rng.random_range(0.1..0.4) * nyq, rng.random_range(0.0..1.0)).unwrap();
    let mu_w = SpectralMeasure::lebesgue(*g, rng.random_range(0.05..0.5)).unwrap().add(&noise_band).unwrap();
    (mu_u, mu_w)
}

/// Gaussians, modulated Gaussians and band-limited bumps.
fn test_family(g: &Grid) -> Vec<GridFunction> {
    let mut out = Vec::new();
    for (c, s) in [(-2.0, 0.7), (0.0, 1.0), (1.5, 1.5)] {
        out.push(GridFunction::from_fn(*g, Domain::Position, |x| C64::new((-(x[0] - c) * (x[0] - c) / (2.0 * s * s)).exp(), 0.0)));
    }
    for w in [1.0, -2.5, 4.0] {
        out.push(GridFunction::from_fn(*g, Domain::Position, |x| C64::from_polar((-x[0] * x[0] / 2.0).exp(), w * x[0])));
    }
    for beta in [1.0, 3.0] {
        let spec = GridFunction::from_fn(*g, Domain::Frequency, |xi| {
            let t = xi[0] / beta;
            C64::new(if t.abs() < 1.0 { (1.0 - t * t).powi(2) } else { 0.0 }, 0.0)
        });
        out.push(inverse_fourier(&spec).unwrap());
    }
    out
}

fn wss_pair(mu_u: &SpectralMeasure, mu_w: &SpectralMeasure) -> (CovarianceOperator, CovarianceOperator) {
    (CovarianceOperator::wss(mu_u).unwrap(), CovarianceOperator::wss(mu_w).unwrap())
}

/// Mean and standard error of `|(u - F v, phi)|^2` over `count` simulated pairs.
fn functional_error(f: &CMat, ku: &CovarianceOperator, kw: &CovarianceOperator, phi: &GridFunction, count: usize, seed: u64) -> (f64, f64) {
    let g = ku.grid();
    let n = g.n();
    let h = g.step();
    let c: Vec<C64> = phi.values().iter().map(|v| v.conj()).collect();
    let d: Vec<C64> = (0..n).map(|k| (0..n).map(|j| f[(j, k)] * c[j]).sum()).collect();
    let su = Sampler::new(ku, derive_seed(seed, 1)).unwrap();
    let sw = Sampler::new(kw, derive_seed(seed, 2)).unwrap();
    let mut wbuf = vec![C64::new(0.0, 0.0); BLOCK.min(count) * n];
    let (mut s1, mut s2) = (0.0, 0.0);
    su.for_each_block(count, |start, u| {
        let rows = u.len() / n;
        let w = &mut wbuf[..rows * n];
        sw.fill(start, rows, w);
        for r in 0..rows {
            let mut e = C64::new(0.0, 0.0);
            for j in 0..n {
                let uj = u[r * n + j];
                e += uj * c[j] - (uj + w[r * n + j]) * d[j];
            }
            let p = (e * h).norm_sqr();
            s1 += p;
            s2 += p * p;
        }
    });
    let nf = count as f64;
    let mean = s1 / nf;
    (mean, ((s2 / nf - mean * mean).max(0.0) / nf).sqrt())
}

fn criterion_1() -> Outcome {
    let g = Grid::new(256, 20.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..10 {
        let (mu_u, mu_w) = random_pair(&g, &mut rng);
        let exact = solve_wss(&mu_u, &mu_w).map_err(err)?;
        let (ku, kw) = wss_pair(&mu_u, &mu_w);
        let oracle = lmmse_oracle(&ku, &kw, SAMPLES, 1000 + i).map_err(err)?;
        let scale = oracle_scale(&exact.f, ku.matrix(), kw.matrix()).map_err(err)?;
        let tol = 10.0 / (SAMPLES as f64).sqrt() * scale;
        worst = worst.max(linalg::max_abs_diff(&exact.f, &oracle.f) / tol);
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((worst <= 1.0 && secs <= 60.0, format!("max error / tolerance {worst:.3} over 10 pairs, n = 256, N = {SAMPLES}; {secs:.1} s (limit 60 s)")))
}

fn criterion_2() -> Outcome {
    let g = Grid::new(64, 8.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut spread: f64 = 0.0;
    for _ in 0..100 {
        let (mu_u, mu_w) = random_pair(&g, &mut rng);
        let filter = rn_filter(&mu_u, &mu_w, None).map_err(err)?;
        let phi = random_function(&g, &mut rng);
        let (j, alt, scale) = wss_mse_forms(&filter, &phi, &mu_u, &mu_w).map_err(err)?;
        spread = spread.max((j - alt).abs() / scale);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let mut worst_z: f64 = 0.0;
    let mut kernel_gap: f64 = 0.0;
    for (i, phi) in test_family(&g).iter().take(4).enumerate() {
        let (mu_u, mu_w) = random_pair(&g, &mut rng);
        let filter = rn_filter(&mu_u, &mu_w, None).map_err(err)?;
        let (j, _, _) = wss_mse_forms(&filter, phi, &mu_u, &mu_w).map_err(err)?;
        let f = filter_matrix(&g, &filter);
        let (ku, kw) = wss_pair(&mu_u, &mu_w);
        let rep = mse(&f, ku.matrix(), kw.matrix(), phi).map_err(err)?;
        kernel_gap = kernel_gap.max((rep.value - j).abs() / j.abs().max(f64::MIN_POSITIVE));
        let (mean, se) = functional_error(&f, &ku, &kw, phi, SAMPLES, 2000 + i as u64);
        worst_z = worst_z.max((mean - j).abs() / se);
    }
    Ok((
        spread <= 1e-10 && worst_z <= 3.0 && kernel_gap <= 1e-8,
        format!(
            "form spread {spread:.2e} over 100 triples; Monte Carlo deviation {worst_z:.2} standard errors (N = {SAMPLES}); spectral vs kernel J gap {kernel_gap:.1e}"
        ),
    ))
}

fn criterion_3() -> Outcome {
    let g = Grid::new(128, 12.0).map_err(err)?;
    let mu_u = SpectralMeasure::band(g, -2.0, 2.0, 1.0).map_err(err)?;
    let mu_w = SpectralMeasure::band(g, 3.0, 6.0, 1.5)
        .and_then(|m| m.add(&SpectralMeasure::band(g, -7.0, -2.5, 0.5)?))
        .map_err(err)?;
    let filter = rn_filter(&mu_u, &mu_w, None).map_err(err)?;
    let exact = filter
        .fhat
        .iter()
        .zip(mu_u.weights())
        .all(|(f, w)| if *w > 0.0 { *f == 1.0 } else { *f == 0.0 });
    let mut worst: f64 = 0.0;
    for phi in test_family(&g) {
        let (j, _, _) = wss_mse_forms(&filter, &phi, &mu_u, &mu_w).map_err(err)?;
        worst = worst.max(j.abs());
    }
    Ok((exact && worst <= 1e-12, format!("filter equals the support indicator: {exact}; max J = {worst:.1e}")))
}

fn stationary_error_power(count: usize, seed: u64) -> Result<Vec<f64>, String> {
    let g = Grid::new(128, 12.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let (mu_u, mu_w) = random_pair(&g, &mut rng);
    let f = solve_wss(&mu_u, &mu_w).map_err(err)?.f;
    let (ku, kw) = wss_pair(&mu_u, &mu_w);
    Ok(residual_statistics(&[&f], &ku, &kw, count, seed, false).map_err(err)?.remove(0).error_power)
}

fn criterion_4() -> Outcome {
    let power = stationary_error_power(SAMPLES, 4000)?;
    let n = power.len() as f64;
    let mean = power.iter().sum::<f64>() / n;
    let sd = (power.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / n).sqrt();
    let cv = sd / mean;
    let limit = 3.0 * (n / SAMPLES as f64).sqrt();
    Ok((cv <= limit, format!("coefficient of variation {cv:.4} (limit {limit:.4}), n = 128, N = {SAMPLES}")))
}

fn commuting_pair(n: usize, rng: &mut ChaCha8Rng) -> (CMat, CMat) {
    let q = random_matrix(n, n, rng).qr().q();
    let lu: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(0.0..2.0), 0.0)).collect();
    let lw: Vec<C64> = (0..n).map(|_| C64::new(rng.random_range(0.1..1.0), 0.0)).collect();
    (linalg::hermitian_part(&linalg::reconstruct(&q, &lu)), linalg::hermitian_part(&linalg::reconstruct(&q, &lw)))
}

fn criterion_5() -> Outcome {
    let g = Grid::new(128, 12.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut worst: f64 = 0.0;
    let mut worst_residual: f64 = 0.0;
    for case in 0..5 {
        let (ku, kw, wss) = if case < 3 {
            let (mu_u, mu_w) = random_pair(&g, &mut rng);
            let (ku, kw) = wss_pair(&mu_u, &mu_w);
            let wss = solve_wss(&mu_u, &mu_w).map_err(err)?.f;
            (ku.into_matrix(), kw.into_matrix(), Some(wss))
        } else {
            let (ku, kw) = commuting_pair(128, &mut rng);
            (ku, kw, None)
        };
        let mut sols: Vec<CMat> = wss.into_iter().collect();
        sols.push(solve_commuting(&ku, &kw, None).map_err(err)?.f);
        sols.push(solve_general(&ku, &kw, None).map_err(err)?.f);
        sols.push(solve_douglas(&ku, &kw, None).map_err(err)?.f);
        for i in 0..sols.len() {
            worst_residual = worst_residual.max(residual_orthogonality(&sols[i], &ku, &kw).map_err(err)?.relative_residual);
            for j in 0..i {
                worst = worst.max(linalg::max_abs_diff(&sols[i], &sols[j]));
            }
        }
    }
    Ok((worst <= 1e-8, format!("max pairwise difference {worst:.2e} over 3 stationary and 2 general commuting pairs (largest relative residual {worst_residual:.1e})")))
}

fn perturbation_mse(count: usize, seed: u64) -> Result<(f64, Vec<f64>, f64), String> {
    let g = Grid::new(32, 6.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let (mu_u, mu_w) = random_pair(&g, &mut rng);
    let (ku, kw) = wss_pair(&mu_u, &mu_w);
    let sol = solve_general(ku.matrix(), kw.matrix(), None).map_err(err)?;
    let rel = residual_orthogonality(&sol.f, ku.matrix(), kw.matrix()).map_err(err)?.relative_residual;
    let fnorm = linalg::norm2(&sol.f);
    let mut filters = vec![sol.f.clone()];
    for _ in 0..20 {
        let d = random_matrix(32, 32, &mut rng);
        let d = &d * C64::new(1e-2 * fnorm / linalg::norm2(&d), 0.0);
        filters.push(&sol.f + d);
    }
    let refs: Vec<&CMat> = filters.iter().collect();
    let stats = residual_statistics(&refs, &ku, &kw, count, seed, false).map_err(err)?;
    let mean: Vec<f64> = stats.iter().map(|s| s.error_power.iter().sum::<f64>() / 32.0).collect();
    Ok((rel, mean, fnorm))
}

fn criterion_6() -> Outcome {
    let (rel, mean, _) = perturbation_mse(SAMPLES, 6000)?;
    let base = mean[0];
    let increased = mean[1..].iter().filter(|m| **m > base).count();
    let min_gain = mean[1..].iter().map(|m| m / base - 1.0).fold(f64::INFINITY, f64::min);
    Ok((
        rel <= 1e-8 && increased == 20,
        format!("relative residual {rel:.1e}; {increased}/20 perturbations raise the Monte Carlo MSE (smallest relative increase {min_gain:.2e})"),
    ))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let n = 24;
    let mut worst: f64 = 0.0;
    let mut dims_ok = true;
    for i in 0..10 {
        let b = random_matrix(n, 4 + i % 4, &mut rng);
        let c = random_matrix(n, 6 + i % 5, &mut rng);
        let ku = linalg::hermitian_part(&(&b * b.adjoint()));
        let kw = linalg::hermitian_part(&(&c * c.adjoint()));
        let sol = solve_douglas(&ku, &kw, None).map_err(err)?;
        let u = sol.diagnostics.uniqueness.ok_or("missing uniqueness report")?;
        dims_ok &= u.kernel_dim_f_adjoint == u.kernel_dim_ku && u.kernel_dim_ku == n - (4 + i % 4);
        worst = worst
            .max(sol.diagnostics.relative_residual)
            .max(u.range_residual)
            .max(u.kernel_angle)
            .max((u.norm_f - u.norm_sup).abs() / u.norm_sup);
    }
    let mut ku = CMat::zeros(n, n);
    let mut kw = CMat::identity(n, n);
    ku[(0, 0)] = C64::new(1.0, 0.0);
    kw[(0, 0)] = C64::new(-1.0, 0.0);
    let rejected = matches!(solve_douglas(&ku, &kw, None), Err(GspError::RangeCondition { .. }));
    Ok((
        worst <= 1e-8 && dims_ok && rejected,
        format!("worst residual or condition defect {worst:.1e} over 10 singular pairs; kernel dimensions match: {dims_ok}; range failure rejected: {rejected}"),
    ))
}

fn criterion_8() -> Outcome {
    let g = Grid::new(128, 10.0).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let values = (0..2 * g.n() * g.n()).map(|_| random_c(&mut rng)).collect();
        let a = WeylSymbol::new(g, values).map_err(err)?;
        let f = random_function(&g, &mut rng);
        let h = random_function(&g, &mut rng);
        let lhs = operator_form(&weyl_quantize(&a), &f, &h).map_err(err)?;
        let rhs = phase_space_inner(&a, &cross_wigner(&h, &f).map_err(err)?).map_err(err)? / (2.0 * PI).sqrt();
        let scale = a.max_abs() * f.norm() * h.norm();
        worst = worst.max((lhs - rhs).norm() / scale);
    }
    Ok((worst <= 1e-9, format!("max scaled pairing defect {worst:.2e} over 50 triples, n = 128")))
}

fn plane_family(g: &Grid) -> Vec<GridFunction> {
    (0..10)
        .map(|i| {
            let c = [0.4 * i as f64 - 1.8, 0.3 * (i % 3) as f64 - 0.3];
            let w = [0.5 * (i % 4) as f64 - 0.7, 0.4 * (i % 5) as f64 - 0.8];
            let s = 0.7 + 0.15 * i as f64;
            GridFunction::from_fn(*g, Domain::Position, |z| {
                let r = ((z[0] - c[0]).powi(2) + (z[1] - c[1]).powi(2)) / (2.0 * s * s);
                C64::from_polar((-r).exp(), w[0] * z[0] + w[1] * z[1])
            })
        })
        .collect()
}

fn criterion_9() -> Outcome {
    let sys = GaborSystem::new(GaborConfig::default()).map_err(err)?;
    let (a, b) = sys.frame_bounds().map_err(err)?;
    let mut recon: f64 = 0.0;
    let mut ratios = Vec::new();
    for f in plane_family(sys.grid()) {
        let back = sys.synthesize(&sys.analyze(&f).map_err(err)?).map_err(err)?;
        recon = recon.max(back.axpy(C64::new(-1.0, 0.0), &f).map_err(err)?.norm() / f.norm());
        let gn = sys.gabor_mod_norm(&f, &|_| 1.0, MixedNorm::TwoTwo).map_err(err)?;
        let mn = mod_norm(ModInput::Function(&f), &|_, _| 1.0, MixedNorm::TwoTwo, &ModNormOptions::default()).map_err(err)?;
        ratios.push(gn / mn);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let drift = (ratios.iter().cloned().fold(f64::MIN, f64::max) - ratios.iter().cloned().fold(f64::MAX, f64::min)) / mean;
    let c = sys.config();
    Ok((
        a > 0.0 && recon <= 1e-8 && drift <= 0.05,
        format!(
            "n2 = {}, ab = {:.4}: A = {a:.4}, B = {b:.4}; reconstruction error {recon:.1e}; (2,2) norm ratio drift {:.2}% over 10 functions",
            c.n2,
            c.a * c.b,
            100.0 * drift
        ),
    ))
}

fn criterion_10() -> Outcome {
    let start = Instant::now();
    let sys = GaborSystem::new(GaborConfig::default()).map_err(err)?;
    let stft = SymplecticStft::new(&sys).map_err(err)?;
    let g = weyl_grid(&sys).map_err(err)?;
    let gauss = |c: [f64; 2], s: f64, w: [f64; 2]| {
        WeylSymbol::from_fn(g, move |x, xi| {
            let r = ((x - c[0]).powi(2) + (xi - c[1]).powi(2)) / (2.0 * s * s);
            C64::from_polar((-r).exp(), w[0] * x + w[1] * xi)
        })
    };
    let pairs = [
        (gauss([0.0, 0.0], 1.0, [0.0, 0.0]).map_err(err)?, gauss([0.5, 0.0], 1.2, [0.0, 0.0]).map_err(err)?),
        (gauss([-0.4, 0.3], 0.9, [0.6, -0.3]).map_err(err)?, gauss([0.2, -0.5], 1.1, [-0.2, 0.4]).map_err(err)?),
    ];
    let mut worst: f64 = 0.0;
    for (au, b) in &pairs {
        worst = worst.max(verify_composition(au, b, &sys, &stft, default_radius()).map_err(err)?.relative_error);
    }
    let constant = WeylSymbol::constant(g, C64::new(2.0, 0.5)).map_err(err)?;
    let c_err = verify_composition(&pairs[0].0, &constant, &sys, &stft, default_radius()).map_err(err)?.relative_error;
    let secs = start.elapsed().as_secs_f64();
    Ok((
        worst <= 1e-5 && c_err <= 1e-6 && secs <= 300.0,
        format!("max relative discrepancy {worst:.2e} over 2 Gaussian pairs; constant b {c_err:.1e}; {secs:.1} s (limit 300 s)"),
    ))
}

fn criterion_11() -> Outcome {
    let sys = GaborSystem::new(GaborConfig::default()).map_err(err)?;
    let stft = SymplecticStft::new(&sys).map_err(err)?;
    let columns: Vec<usize> =
        [[0, 0, 0, 0], [1, -1, 2, 0], [-2, 1, 0, 1], [0, 2, -1, -2]].iter().map(|c| sys.lattice_index(*c)).collect();
    let m = build_m(&sys, &stft, &rough_coefficients(&sys, 12.0), default_radius(), &columns).map_err(err)?;
    let rep = decay_fit(&m, &sys, 4.0).map_err(err)?;
    Ok((
        rep.passes(),
        format!("fitted exponent {:.2} (target 4, fit residual {:.2}); C = {:.3}; violations {}", rep.fitted_t, rep.fit_residual, rep.c, rep.violations),
    ))
}

fn criterion_12() -> Outcome {
    let g = Grid::new(128, 10.0).map_err(err)?;
    let f = |xi: f64| 2.0 + xi.sin() + 0.5 * (2.3 * xi).cos();
    let a = WeylSymbol::from_fn(g, |_, xi| C64::new(f(xi), 0.0)).map_err(err)?;
    let k = weyl_quantize(&a);
    let h = g.step();
    let inv = k.try_inverse().ok_or("operator is singular")? * C64::new(1.0 / (h * h), 0.0);
    let b = symbol_from_operator(&g, &inv).map_err(err)?;
    let expect = WeylSymbol::from_fn(g, |_, xi| C64::new(1.0 / f(xi), 0.0)).map_err(err)?;
    let diff = b.max_abs_diff(&expect);
    Ok((diff <= 1e-8, format!("max symbol error {diff:.2e} for 1/f, min f = 0.5, n = 128")))
}

fn fingerprint(threads: usize) -> Result<Vec<u64>, String> {
    with_threads(Some(threads), || -> Result<Vec<u64>, String> {
        let mut bits = Vec::new();
        let g = Grid::new(256, 20.0).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let (mu_u, mu_w) = random_pair(&g, &mut rng);
        let (ku, kw) = wss_pair(&mu_u, &mu_w);
        let oracle = lmmse_oracle(&ku, &kw, SAMPLES, 1000).map_err(err)?;
        bits.extend(oracle.f.iter().flat_map(|v| [v.re.to_bits(), v.im.to_bits()]));
        let g2 = Grid::new(64, 8.0).map_err(err)?;
        let mut rng = ChaCha8Rng::seed_from_u64(203);
        let (mu_u, mu_w) = random_pair(&g2, &mut rng);
        let filter = rn_filter(&mu_u, &mu_w, None).map_err(err)?;
        let (ku, kw) = wss_pair(&mu_u, &mu_w);
        let (mean, se) = functional_error(&filter_matrix(&g2, &filter), &ku, &kw, &test_family(&g2)[0], SAMPLES, 2000);
        bits.extend([mean.to_bits(), se.to_bits()]);
        bits.extend(stationary_error_power(SAMPLES, 4000)?.iter().map(|v| v.to_bits()));
        bits.extend(perturbation_mse(SAMPLES, 6000)?.1.iter().map(|v| v.to_bits()));
        Ok(bits)
    })
}

fn criterion_13() -> Outcome {
    let runs: Vec<Vec<u64>> = [1usize, 2, 4].iter().map(|&t| fingerprint(t)).collect::<Result<_, _>>()?;
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    Ok((same, format!("{} values from criteria 1, 2, 4 and 6 compared bitwise under 1, 2 and 4 threads: identical = {same}", runs[0].len())))
}

fn main() {
    let criteria: [Criterion; 13] = [
        (1, "Radon-Nikodym filter matches the simulated LMMSE oracle", criterion_1),
        (2, "error functional identity and Monte Carlo agreement", criterion_2),
        (3, "perfect reconstruction for disjoint spectra", criterion_3),
        (4, "stationary error is constant in position", criterion_4),
        (5, "cross-route consistency", criterion_5),
        (6, "orthogonality principle", criterion_6),
        (7, "pseudo-inverse route and range condition", criterion_7),
        (8, "Weyl-Wigner pairing", criterion_8),
        (9, "Gabor frame bounds, reconstruction and norm equivalence", criterion_9),
        (10, "Gabor matrix of the composition", criterion_10),
        (11, "off-diagonal decay of the Gabor matrix", criterion_11),
        (12, "inverse of a Fourier multiplier symbol", criterion_12),
        (13, "determinism under varying thread counts", criterion_13),
    ];
    let mut failed = 0;
    for (id, name, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match outcome {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("{} criterion {id:>2} ({name}): {detail} [{secs:.1} s]", if pass { "PASS" } else { "FAIL" });
    }
    println!("{} of 13 criteria passed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
