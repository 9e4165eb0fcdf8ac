//! Gaussian Gabor frames on the periodic phase-space plane.
//!
//! Functions live on a square two-dimensional grid `Z = (z1, z2)`. The symplectic shift
//! `Pi(X, Y) f(Z) = e^{2 i sigma(Y, Z)} f(Z - X)` with `sigma(Y, Z) = z1 y2 - y1 z2` is a
//! translation by `X` followed by a modulation with frequency `(2 y2, -2 y1)`. Lattice points
//! `(Lambda, Lambda') = (a n, b k)` are folded onto the torus with centered representatives.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GspError, Result};
use crate::grid::{transform_all_axes, AxisTransform, Domain, Grid, GridFunction};
use crate::weyl::MixedNorm;

/// Largest admissible relative window value on the torus boundary.
pub const WINDOW_TAIL_TOL: f64 = 1e-12;

/// Grid and lattice parameters of a Gabor system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaborConfig {
    pub n2: usize,
    pub l2: f64,
    pub a: f64,
    pub b: f64,
}

impl GaborConfig {
    /// Square configuration on `n2` nodes: grid step `sqrt(pi / n2)`, equal to the frequency
    /// step of a Weyl symbol grid with `n2` nodes, and `a = b = m h2` with `m` the even divisor
    /// of `n2` closest to `sqrt(n2 / 2)`, so that `ab` is close to `pi / 2`.
    pub fn square(n2: usize) -> Result<Self> {
        if n2 < 4 || n2 % 2 != 0 {
            return Err(GspError::InvalidGrid(format!("n2 must be even and at least 4, got {n2}")));
        }
        let h2 = (PI / n2 as f64).sqrt();
        let target = (n2 as f64 / 2.0).sqrt();
        let m = (2..=n2)
            .step_by(2)
            .filter(|m| n2 % m == 0 && ((m * m) as f64) < n2 as f64)
            .min_by(|x, y| (*x as f64 - target).abs().total_cmp(&(*y as f64 - target).abs()))
            .ok_or_else(|| GspError::InvalidParameter(format!("no admissible lattice step for n2 = {n2}")))?;
        Ok(Self { n2, l2: n2 as f64 * h2 / 2.0, a: m as f64 * h2, b: m as f64 * h2 })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.l2 / self.n2 as f64
    }
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self::square(72).expect("72 admits a square lattice")
    }
}

/// Coefficients indexed like [`GaborSystem::lattice`].
pub type GaborCoefficients = Vec<C64>;

#[derive(Clone)]
pub struct GaborSystem {
    config: GaborConfig,
    grid: Grid,
    pub(crate) transform: AxisTransform,
    /// Lattice steps in grid units: positions move by `a_steps` nodes, frequencies by `b_steps` bins.
    pub(crate) a_steps: usize,
    pub(crate) b_steps: usize,
    /// Number of distinct lattice values per coordinate for positions and modulations.
    pub(crate) na: usize,
    pub(crate) nb: usize,
    pub(crate) window: Vec<C64>,
    pub(crate) dual: Vec<C64>,
    dual_residual: f64,
}

impl std::fmt::Debug for GaborSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaborSystem")
            .field("config", &self.config)
            .field("na", &self.na)
            .field("nb", &self.nb)
            .field("dual_residual", &self.dual_residual)
            .finish()
    }
}

/// Centered representative of `i mod n` in `[-n/2, n/2)`.
pub(crate) fn centered(i: i64, n: usize) -> i64 {
    let n = n as i64;
    let r = i.rem_euclid(n);
    if r >= (n + 1) / 2 {
        r - n
    } else {
        r
    }
}

impl GaborSystem {
    /// Builds the system and its canonical dual window. Lattice steps must be even multiples
    /// of the grid step so that half-lattice points are grid aligned.
    pub fn new(config: GaborConfig) -> Result<Self> {
        Self::build(config, true)
    }

    /// As [`GaborSystem::new`] but accepting any grid-aligned lattice.
    pub fn new_relaxed(config: GaborConfig) -> Result<Self> {
        Self::build(config, false)
    }

    fn build(config: GaborConfig, even: bool) -> Result<Self> {
        let GaborConfig { n2, l2, a, b } = config;
        let grid = Grid::new_2d(n2, l2)?;
        if !(a > 0.0 && b > 0.0) {
            return Err(GspError::InvalidParameter(format!("lattice steps must be positive, got a = {a}, b = {b}")));
        }
        if a * b >= PI {
            return Err(GspError::InvalidParameter(format!("ab = {} must be below pi", a * b)));
        }
        let h = grid.step();
        let a_steps = grid.steps_of(a, h)? as usize;
        // The modulation by Lambda' has frequency 2 Lambda', which must be a frequency node.
        let b_steps = grid.steps_of(2.0 * b, grid.freq_step())? as usize;
        if even {
            // Half-lattice positions a/2 and half-lattice frequencies b must stay on the grid.
            if a_steps % 2 != 0 {
                return Err(GspError::InvalidParameter(format!("a must be an even multiple of the grid step {h}")));
            }
            grid.steps_of(b, grid.freq_step())?;
            grid.steps_of(b, h).and_then(|s| {
                if s % 2 == 0 {
                    Ok(s)
                } else {
                    Err(GspError::InvalidParameter(format!("b must be an even multiple of the grid step {h}")))
                }
            })?;
        }
        if n2 % a_steps != 0 || n2 % b_steps != 0 {
            return Err(GspError::InvalidParameter("lattice does not fold onto the torus".into()));
        }
        let (na, nb) = (n2 / a_steps, n2 / b_steps);
        let window: Vec<C64> = GridFunction::from_fn(grid, Domain::Position, |z| {
            C64::new(2.0 * PI.sqrt() * (-(z[0] * z[0] + z[1] * z[1])).exp(), 0.0)
        })
        .into_values();
        let tail = window_tail(&grid, &window);
        if tail > WINDOW_TAIL_TOL {
            return Err(GspError::InvalidParameter(format!(
                "window tail {tail:.2e} at the torus boundary exceeds {WINDOW_TAIL_TOL:.0e}; enlarge L2"
            )));
        }
        let mut sys = Self {
            config,
            grid,
            transform: AxisTransform::new(&grid),
            a_steps,
            b_steps,
            na,
            nb,
            window: window.clone(),
            dual: Vec::new(),
            dual_residual: f64::NAN,
        };
        let (dual, residual) = sys.solve_frame(&window, 1e-13, 500)?;
        sys.dual = dual;
        sys.dual_residual = residual;
        Ok(sys)
    }

    pub fn config(&self) -> &GaborConfig {
        &self.config
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn window(&self) -> GridFunction {
        GridFunction::new(self.grid, self.window.clone()).expect("window has grid length")
    }

    /// Canonical dual window `S^{-1} Phi`.
    pub fn dual_window(&self) -> GridFunction {
        GridFunction::new(self.grid, self.dual.clone()).expect("dual has grid length")
    }

    /// `||S dual - Phi|| / ||Phi||` reached by the iterative solve.
    pub fn dual_residual(&self) -> f64 {
        self.dual_residual
    }

    /// Number of lattice values per coordinate for `Lambda` and `Lambda'`.
    pub fn fold(&self) -> (usize, usize) {
        (self.na, self.nb)
    }

    pub fn len(&self) -> usize {
        self.na * self.na * self.nb * self.nb
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centered integer lattice coordinates `(n1, n2, k1, k2)` of point `idx`.
    pub fn lattice_indices(&self, idx: usize) -> [i64; 4] {
        let (na, nb) = (self.na, self.nb);
        let k2 = idx % nb;
        let k1 = (idx / nb) % nb;
        let n2 = (idx / (nb * nb)) % na;
        let n1 = idx / (nb * nb * na);
        [centered(n1 as i64, na), centered(n2 as i64, na), centered(k1 as i64, nb), centered(k2 as i64, nb)]
    }

    /// Flat index of the lattice point with (possibly unfolded) integer coordinates.
    pub fn lattice_index(&self, c: [i64; 4]) -> usize {
        let (na, nb) = (self.na as i64, self.nb as i64);
        let f = |v: i64, m: i64| v.rem_euclid(m) as usize;
        ((f(c[0], na) * self.na + f(c[1], na)) * self.nb + f(c[2], nb)) * self.nb + f(c[3], nb)
    }

    /// Lattice point `(Lambda_1, Lambda_2, Lambda'_1, Lambda'_2)`.
    pub fn lattice_point(&self, idx: usize) -> [f64; 4] {
        let c = self.lattice_indices(idx);
        let (a, b) = (self.config.a, self.config.b);
        [a * c[0] as f64, a * c[1] as f64, b * c[2] as f64, b * c[3] as f64]
    }

    pub fn lattice(&self) -> Vec<[f64; 4]> {
        (0..self.len()).map(|i| self.lattice_point(i)).collect()
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(GspError::GridMismatch);
        }
        Ok(())
    }

    /// Flat grid index of node `(i, j)` shifted by `(di, dj)` on the torus.
    pub(crate) fn shifted(&self, i: usize, j: usize, di: i64, dj: i64) -> usize {
        let n = self.grid.n() as i64;
        let r = (i as i64 - di).rem_euclid(n) as usize;
        let c = (j as i64 - dj).rem_euclid(n) as usize;
        r * n as usize + c
    }

    /// Frequency bin of the modulation `e^{2 i sigma(Lambda', .)}` for modulation indices `(k1, k2)`.
    fn modulation_bins(&self, k1: i64, k2: i64) -> (usize, usize) {
        let n = self.grid.n() as i64;
        let bs = self.b_steps as i64;
        // frequency (2 y2, -2 y1)
        let w1 = (k2 * bs + n / 2).rem_euclid(n) as usize;
        let w2 = (-k1 * bs + n / 2).rem_euclid(n) as usize;
        (w1, w2)
    }

    /// `(f, Pi(Lambda) g)` for every lattice point.
    pub fn analyze_with(&self, f: &GridFunction, g: &GridFunction) -> Result<GaborCoefficients> {
        self.check(f)?;
        self.check(g)?;
        Ok(self.analyze_raw(f.values(), g.values()))
    }

    fn analyze_raw(&self, f: &[C64], g: &[C64]) -> Vec<C64> {
        let n = self.grid.n();
        let (na, nb) = (self.na, self.nb);
        let blocks: Vec<Vec<C64>> = (0..na * na)
            .into_par_iter()
            .map(|p| {
                let c = self.lattice_indices(p * nb * nb);
                let (d1, d2) = (c[0] * self.a_steps as i64, c[1] * self.a_steps as i64);
                let mut buf: Vec<C64> = (0..n * n)
                    .map(|idx| {
                        let (i, j) = (idx / n, idx % n);
                        f[idx] * g[self.shifted(i, j, d1, d2)].conj()
                    })
                    .collect();
                transform_all_axes(&self.transform, 2, &mut buf, true);
                (0..nb * nb)
                    .map(|q| {
                        let cc = self.lattice_indices(p * nb * nb + q);
                        let (w1, w2) = self.modulation_bins(cc[2], cc[3]);
                        buf[w1 * n + w2] * (2.0 * PI)
                    })
                    .collect()
            })
            .collect();
        blocks.concat()
    }

    /// `sum c(Lambda) Pi(Lambda) g`.
    pub fn synthesize_with(&self, c: &[C64], g: &GridFunction) -> Result<GridFunction> {
        self.check(g)?;
        if c.len() != self.len() {
            return Err(GspError::LengthMismatch { expected: self.len(), got: c.len() });
        }
        GridFunction::new(self.grid, self.synthesize_raw(c, g.values()))
    }

    fn synthesize_raw(&self, c: &[C64], g: &[C64]) -> Vec<C64> {
        let n = self.grid.n();
        let (na, nb) = (self.na, self.nb);
        let scale = 2.0 * PI / (self.grid.freq_step() * self.grid.freq_step());
        let parts: Vec<Vec<C64>> = (0..na * na)
            .into_par_iter()
            .map(|p| {
                let mut spec = vec![C64::new(0.0, 0.0); n * n];
                for q in 0..nb * nb {
                    let cc = self.lattice_indices(p * nb * nb + q);
                    let (w1, w2) = self.modulation_bins(cc[2], cc[3]);
                    spec[w1 * n + w2] += c[p * nb * nb + q];
                }
                transform_all_axes(&self.transform, 2, &mut spec, false);
                let cp = self.lattice_indices(p * nb * nb);
                let (d1, d2) = (cp[0] * self.a_steps as i64, cp[1] * self.a_steps as i64);
                (0..n * n)
                    .map(|idx| {
                        let (i, j) = (idx / n, idx % n);
                        spec[idx] * g[self.shifted(i, j, d1, d2)] * scale
                    })
                    .collect()
            })
            .collect();
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for part in parts {
            for (o, v) in out.iter_mut().zip(part) {
                *o += v;
            }
        }
        out
    }

    /// Gabor coefficients `(f, Pi(Lambda) dual)`.
    pub fn analyze(&self, f: &GridFunction) -> Result<GaborCoefficients> {
        self.check(f)?;
        Ok(self.analyze_raw(f.values(), &self.dual))
    }

    /// `sum c(Lambda) Pi(Lambda) Phi`.
    pub fn synthesize(&self, c: &[C64]) -> Result<GridFunction> {
        if c.len() != self.len() {
            return Err(GspError::LengthMismatch { expected: self.len(), got: c.len() });
        }
        GridFunction::new(self.grid, self.synthesize_raw(c, &self.window))
    }

    /// Frame operator `S f = sum (f, Pi Phi) Pi Phi`.
    pub fn frame_operator(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        GridFunction::new(self.grid, self.apply_frame(f.values()))
    }

    fn apply_frame(&self, f: &[C64]) -> Vec<C64> {
        let c = self.analyze_raw(f, &self.window);
        self.synthesize_raw(&c, &self.window)
    }

    fn inner(&self, x: &[C64], y: &[C64]) -> C64 {
        let h = self.grid.step();
        x.iter().zip(y).map(|(a, b)| a * b.conj()).sum::<C64>() * (h * h)
    }

    /// Conjugate gradients for `S x = rhs`; returns `x` and the relative residual.
    fn solve_frame(&self, rhs: &[C64], tol: f64, max_iter: usize) -> Result<(Vec<C64>, f64)> {
        let bnorm = self.inner(rhs, rhs).re.sqrt();
        let mut x = vec![C64::new(0.0, 0.0); rhs.len()];
        if bnorm == 0.0 {
            return Ok((x, 0.0));
        }
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut rr = self.inner(&r, &r).re;
        for _ in 0..max_iter {
            if rr.sqrt() <= tol * bnorm {
                break;
            }
            let sp = self.apply_frame(&p);
            let alpha = rr / self.inner(&p, &sp).re;
            for i in 0..x.len() {
                x[i] += p[i] * alpha;
                r[i] -= sp[i] * alpha;
            }
            let rr_new = self.inner(&r, &r).re;
            let beta = rr_new / rr;
            for i in 0..p.len() {
                p[i] = r[i] + p[i] * beta;
            }
            rr = rr_new;
        }
        // Recompute the true residual.
        let sx = self.apply_frame(&x);
        let res: Vec<C64> = sx.iter().zip(rhs).map(|(a, b)| a - b).collect();
        let rel = self.inner(&res, &res).re.sqrt() / bnorm;
        if rel > 1e-10 {
            return Err(GspError::InvalidParameter(format!("frame solve stalled at relative residual {rel:.2e}")));
        }
        Ok((x, rel))
    }

    /// Solves `S x = f`.
    pub fn solve(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f)?;
        let (x, _) = self.solve_frame(f.values(), 1e-13, 500)?;
        GridFunction::new(self.grid, x)
    }

    /// Extreme eigenvalues `(A, B)` of the frame operator on the grid space, by Lanczos iteration
    /// with full reorthogonalization.
    pub fn frame_bounds(&self) -> Result<(f64, f64)> {
        let dim = self.grid.len();
        let max_steps = dim.min(200);
        let mut basis: Vec<Vec<C64>> = Vec::new();
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut q: Vec<C64> = (0..dim)
            .map(|i| {
                let t = (i as f64 + 1.0) * 0.618_033_988_749_895;
                C64::new(t.fract() - 0.5, (t * 1.7).fract() - 0.5)
            })
            .collect();
        let norm = self.inner(&q, &q).re.sqrt();
        q.iter_mut().for_each(|v| *v /= norm);
        let mut bounds = (f64::NAN, f64::NAN);
        for step in 0..max_steps {
            let mut w = self.apply_frame(&q);
            let alpha = self.inner(&w, &q).re;
            basis.push(q.clone());
            alphas.push(alpha);
            for _ in 0..2 {
                for v in &basis {
                    let c = self.inner(&w, v);
                    for (x, y) in w.iter_mut().zip(v) {
                        *x -= c * y;
                    }
                }
            }
            let beta = self.inner(&w, &w).re.sqrt();
            let (vals, last) = tridiagonal_extremes(&alphas, &betas);
            bounds = (vals.0, vals.1);
            let scale = vals.1.abs().max(f64::MIN_POSITIVE);
            let converged = beta * last.0.abs() <= 1e-11 * scale && beta * last.1.abs() <= 1e-11 * scale;
            if (step > 4 && converged) || beta <= 1e-14 * scale {
                break;
            }
            betas.push(beta);
            q = w.iter().map(|v| v / beta).collect();
        }
        if !(bounds.0 > 0.0) {
            return Err(GspError::InvalidParameter(format!("frame operator is not positive definite (A = {:.3e})", bounds.0)));
        }
        Ok(bounds)
    }

    /// Mixed norm of the weighted dual-window coefficients: `p` over `n` (positions),
    /// `q` over `k` (modulations). `weight` receives `(Lambda_1, Lambda_2, Lambda'_1, Lambda'_2)`.
    pub fn gabor_mod_norm(&self, f: &GridFunction, weight: &(dyn Fn(&[f64; 4]) -> f64 + Sync), norm: MixedNorm) -> Result<f64> {
        let c = self.analyze(f)?;
        Ok(self.coefficient_norm(&c, weight, norm))
    }

    pub fn coefficient_norm(&self, c: &[C64], weight: &(dyn Fn(&[f64; 4]) -> f64 + Sync), norm: MixedNorm) -> f64 {
        let (na, nb) = (self.na, self.nb);
        let weighted: Vec<f64> = (0..c.len()).map(|i| c[i].norm() * weight(&self.lattice_point(i))).collect();
        match norm {
            MixedNorm::InfInf => weighted.iter().cloned().fold(0.0, f64::max),
            MixedNorm::TwoTwo => weighted.iter().map(|v| v * v).sum::<f64>().sqrt(),
            MixedNorm::InfOne => (0..nb * nb)
                .map(|q| (0..na * na).map(|p| weighted[p * nb * nb + q]).fold(0.0, f64::max))
                .sum(),
        }
    }
}

fn window_tail(grid: &Grid, w: &[C64]) -> f64 {
    let n = grid.n();
    let peak = w.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut edge: f64 = 0.0;
    for i in 0..n {
        for idx in [i, (n - 1) * n + i, i * n, i * n + n - 1] {
            edge = edge.max(w[idx].norm());
        }
    }
    edge / peak
}

/// Smallest and largest eigenvalue of the Lanczos tridiagonal matrix and the last components of
/// the corresponding eigenvectors.
fn tridiagonal_extremes(alphas: &[f64], betas: &[f64]) -> ((f64, f64), (f64, f64)) {
    let m = alphas.len();
    let t = nalgebra::DMatrix::<f64>::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j {
            betas[i]
        } else if j + 1 == i {
            betas[j]
        } else {
            0.0
        }
    });
    let eig = nalgebra::SymmetricEigen::new(t);
    let (mut lo, mut hi) = (0, 0);
    for i in 0..m {
        if eig.eigenvalues[i] < eig.eigenvalues[lo] {
            lo = i;
        }
        if eig.eigenvalues[i] > eig.eigenvalues[hi] {
            hi = i;
        }
    }
    (
        (eig.eigenvalues[lo], eig.eigenvalues[hi]),
        (eig.eigenvectors[(m - 1, lo)], eig.eigenvectors[(m - 1, hi)]),
    )
}

/// `Pi(X, Y) f` for grid-aligned `X` and frequency-aligned `2 Y`.
pub fn symplectic_shift(f: &GridFunction, x: [f64; 2], y: [f64; 2]) -> Result<GridFunction> {
    let grid = *f.grid();
    if grid.dim() != 2 {
        return Err(GspError::InvalidGrid("symplectic shifts act on two-dimensional grids".into()));
    }
    let n = grid.n();
    let h = grid.step();
    let d1 = grid.steps_of(x[0], h)?;
    let d2 = grid.steps_of(x[1], h)?;
    grid.steps_of(2.0 * y[0], grid.freq_step())?;
    grid.steps_of(2.0 * y[1], grid.freq_step())?;
    let v = f.values();
    let out = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            let src = ((i as i64 - d1).rem_euclid(n as i64) as usize) * n + (j as i64 - d2).rem_euclid(n as i64) as usize;
            let (z1, z2) = (grid.position(i), grid.position(j));
            v[src] * C64::from_polar(1.0, 2.0 * (z1 * y[1] - y[0] * z2))
        })
        .collect();
    GridFunction::new(grid, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> GaborSystem {
        GaborSystem::new(GaborConfig::square(40).unwrap()).unwrap()
    }

    fn bump(g: &Grid, c: [f64; 2], w: [f64; 2]) -> GridFunction {
        GridFunction::from_fn(*g, Domain::Position, |z| {
            let r = ((z[0] - c[0]).powi(2) + (z[1] - c[1]).powi(2)) / 2.0;
            C64::from_polar((-r).exp(), w[0] * z[0] + w[1] * z[1])
        })
    }

    #[test]
    fn square_configs() {
        let c = GaborConfig::default();
        assert_eq!(c.n2, 72);
        assert!((c.a * c.b - PI / 2.0).abs() < 1e-12);
        let c = GaborConfig::square(40).unwrap();
        assert!((c.a / c.step() - 4.0).abs() < 1e-12);
        assert!(GaborSystem::new(GaborConfig { a: 2.0, b: 2.0, ..GaborConfig::default() }).is_err());
        let small = GaborConfig::square(16).unwrap();
        assert!(matches!(GaborSystem::new(small), Err(GspError::InvalidParameter(_))));
    }

    #[test]
    fn symplectic_shift_properties() {
        let sys = small();
        let g = *sys.grid();
        let f = bump(&g, [0.3, -0.5], [0.0, 0.0]);
        let id = symplectic_shift(&f, [0.0, 0.0], [0.0, 0.0]).unwrap();
        assert_eq!(id, f);
        let h = g.step();
        let x = [4.0 * h, -2.0 * h];
        let y = [2.0 * h, 6.0 * h];
        let s = symplectic_shift(&f, x, y).unwrap();
        assert!((s.norm() - f.norm()).abs() < 1e-12 * f.norm());
        let t = symplectic_shift(&f, x, [0.0, 0.0]).unwrap();
        for (p, q) in s.values().iter().zip(t.values()) {
            assert!((p.norm() - q.norm()).abs() < 1e-14);
        }
        // Pi(X1,Y1) Pi(X2,Y2) = e^{-2 i sigma(Y2, X1)} Pi(X1 + X2, Y1 + Y2)
        let (x2, y2) = ([2.0 * h, 2.0 * h], [-4.0 * h, 2.0 * h]);
        let lhs = symplectic_shift(&symplectic_shift(&f, x2, y2).unwrap(), x, y).unwrap();
        let rhs = symplectic_shift(&f, [x[0] + x2[0], x[1] + x2[1]], [y[0] + y2[0], y[1] + y2[1]]).unwrap();
        let phase = C64::from_polar(1.0, -2.0 * (x[0] * y2[1] - y2[0] * x[1]));
        for (p, q) in lhs.values().iter().zip(rhs.values()) {
            assert!((p - q * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn analysis_matches_direct_inner_products() {
        let sys = small();
        let g = *sys.grid();
        let f = bump(&g, [0.5, 0.2], [1.0, -0.4]);
        let c = sys.analyze_with(&f, &sys.window()).unwrap();
        for idx in [0usize, 17, 1234, sys.len() - 1] {
            let p = sys.lattice_point(idx);
            let shifted = symplectic_shift(&sys.window(), [p[0], p[1]], [p[2], p[3]]).unwrap();
            let direct = f.inner(&shifted).unwrap();
            assert!((c[idx] - direct).norm() < 1e-12, "{idx}: {} vs {}", c[idx], direct);
        }
    }

    #[test]
    fn reconstruction_and_duality() {
        let sys = small();
        let g = *sys.grid();
        let f = bump(&g, [-0.7, 1.1], [0.8, 0.3]);
        let back = sys.synthesize(&sys.analyze(&f).unwrap()).unwrap();
        let err = back.axpy(C64::new(-1.0, 0.0), &f).unwrap().norm() / f.norm();
        assert!(err < 1e-10, "{err}");
        let other = sys.synthesize_with(&sys.analyze_with(&f, &sys.window()).unwrap(), &sys.dual_window()).unwrap();
        let err = other.axpy(C64::new(-1.0, 0.0), &f).unwrap().norm() / f.norm();
        assert!(err < 1e-10, "{err}");
        assert!(sys.dual_residual() < 1e-10);
    }

    #[test]
    fn coefficients_peak_at_shift() {
        let sys = small();
        let idx = sys.lattice_index([1, -2, 1, 0]);
        let p = sys.lattice_point(idx);
        let f = symplectic_shift(&sys.window(), [p[0], p[1]], [p[2], p[3]]).unwrap();
        let c = sys.analyze(&f).unwrap();
        let best = (0..c.len()).max_by(|&i, &j| c[i].norm().total_cmp(&c[j].norm())).unwrap();
        assert_eq!(best, idx);
    }

    #[test]
    fn frame_bounds_and_inequality() {
        let sys = small();
        let (a, b) = sys.frame_bounds().unwrap();
        assert!(a > 0.0 && a <= b);
        let g = *sys.grid();
        for (i, c) in [[0.0, 0.0], [1.0, -2.0], [2.5, 0.5]].iter().enumerate() {
            let f = bump(&g, *c, [i as f64 * 0.7, -0.3]);
            let e: f64 = sys.analyze_with(&f, &sys.window()).unwrap().iter().map(|v| v.norm_sqr()).sum();
            let n = f.norm_sqr();
            assert!(a * n * (1.0 - 1e-9) <= e && e <= b * n * (1.0 + 1e-9));
        }
    }

    #[test]
    fn full_grid_lattice_is_tight() {
        let cfg = GaborConfig { n2: 24, l2: 6.0, a: 0.5, b: PI / 12.0 };
        let sys = GaborSystem::new_relaxed(cfg).unwrap();
        let (a, b) = sys.frame_bounds().unwrap();
        assert!((b / a - 1.0).abs() < 1e-8, "{a} {b}");
    }

    #[test]
    fn l2_gabor_norm_of_zero() {
        let sys = small();
        let zero = GridFunction::zeros(*sys.grid(), Domain::Position);
        assert_eq!(sys.gabor_mod_norm(&zero, &|_| 1.0, MixedNorm::TwoTwo).unwrap(), 0.0);
    }
}
