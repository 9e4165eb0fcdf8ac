//! `verify`: invariant suite with a pass/fail table.

use gsp_filter::gabor::GaborSystem;
use gsp_filter::grid::{fourier, inverse_fourier};
use gsp_filter::linalg::{self, CMat};
use gsp_filter::sim::{derive_seed, fill_circular_normal, realization_rng};
use gsp_filter::solvers::{lmmse_oracle, oracle_scale, residual_orthogonality};
use gsp_filter::weyl::{cross_wigner, operator_form, phase_space_inner, weyl_quantize, WeylSymbol};
use gsp_filter::{Domain, Grid, GridFunction, C64};
use serde_json::json;

use crate::config::RunConfig;
use crate::family::parse_family;
use crate::filter::{solve_routes, Problem, RouteOutcome};
use crate::report::{print_table, Check, Output};

fn random_values(seed: u64, index: u64, len: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); len];
    fill_circular_normal(&mut realization_rng(seed, index), &mut out);
    out
}

fn parseval(grid: &Grid, cfg: &RunConfig) -> Result<Check, String> {
    let mut worst = 0.0f64;
    for t in parse_family(grid, &cfg.tests.family)? {
        let ff = fourier(&t.f).map_err(|e| e.to_string())?;
        let back = inverse_fourier(&ff).map_err(|e| e.to_string())?;
        let norm = t.f.norm();
        worst = worst
            .max((ff.norm() - norm).abs() / norm)
            .max(back.axpy(C64::new(-1.0, 0.0), &t.f).map_err(|e| e.to_string())?.norm() / norm);
    }
    Ok(Check::at_most("parseval", worst, 1e-12))
}

fn pairing(grid: &Grid, cfg: &RunConfig) -> Result<Check, String> {
    let seed = derive_seed(cfg.run.seed, 11);
    let mut worst = 0.0f64;
    for i in 0..cfg.run.pairs as u64 {
        let a = WeylSymbol::new(*grid, random_values(seed, 3 * i, 2 * grid.n() * grid.n())).map_err(|e| e.to_string())?;
        let f = GridFunction::new(*grid, random_values(seed, 3 * i + 1, grid.n())).map_err(|e| e.to_string())?;
        let g = GridFunction::new(*grid, random_values(seed, 3 * i + 2, grid.n())).map_err(|e| e.to_string())?;
        let lhs = operator_form(&weyl_quantize(&a), &f, &g).map_err(|e| e.to_string())?;
        let w = cross_wigner(&g, &f).map_err(|e| e.to_string())?;
        let rhs = phase_space_inner(&a, &w).map_err(|e| e.to_string())? / (2.0 * std::f64::consts::PI).sqrt();
        worst = worst.max((lhs - rhs).norm() / (a.max_abs() * f.norm() * g.norm()));
    }
    Ok(Check::at_most("weyl-wigner pairing", worst, 1e-9).with_detail(format!("{} random triples", cfg.run.pairs)))
}

fn frame(cfg: &RunConfig) -> Result<Vec<Check>, String> {
    let sys = GaborSystem::new(cfg.gabor.config()?).map_err(|e| e.to_string())?;
    let (a, b) = sys.frame_bounds().map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (i, s) in [0.7, 1.0, 1.4].into_iter().enumerate() {
        let c = [0.5 * i as f64 - 0.5, 0.3 - 0.3 * i as f64];
        let f = GridFunction::from_fn(*sys.grid(), Domain::Position, |z| {
            let r = ((z[0] - c[0]).powi(2) + (z[1] - c[1]).powi(2)) / (2.0 * s * s);
            C64::from_polar((-r).exp(), z[0] - 0.5 * z[1])
        });
        let back = sys.synthesize(&sys.analyze(&f).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        worst = worst.max(back.axpy(C64::new(-1.0, 0.0), &f).map_err(|e| e.to_string())?.norm() / f.norm());
    }
    let bound = Check { name: "frame lower bound".into(), value: a, tolerance: 0.0, pass: a > 0.0, detail: format!("upper bound {b:.4}") };
    Ok(vec![bound, Check::at_most("frame reconstruction", worst, 1e-8)])
}

/// Adds a seeded perturbation of relative spectral size `fault`.
fn inject_fault(f: &CMat, fault: f64, seed: u64) -> CMat {
    if fault <= 0.0 {
        return f.clone();
    }
    let n = f.nrows();
    let d = CMat::from_vec(n, n, random_values(derive_seed(seed, 13), 0, n * n));
    let scale = fault * linalg::norm2(f) / linalg::norm2(&d);
    f + d * C64::new(scale, 0.0)
}

pub fn run(cfg: &RunConfig, out: &Output, quiet: bool) -> Result<bool, String> {
    let p = Problem::load(cfg)?;
    let mut checks = vec![parseval(&p.grid, cfg)?, pairing(&p.grid, cfg)?];
    checks.extend(frame(cfg)?);

    let solved = solve_routes(cfg, &p)?.into_iter().find_map(|(route, o)| match o {
        RouteOutcome::Solved(sol) => Some((route, sol)),
        _ => None,
    });
    let route = match solved {
        Some((route, sol)) => {
            let f = inject_fault(&sol.f, cfg.run.fault, cfg.run.seed);
            let orth = residual_orthogonality(&f, p.ku.matrix(), p.kw.matrix()).map_err(|e| e.to_string())?;
            checks.push(Check::at_most("residual orthogonality", orth.relative_residual, cfg.solver.tolerance).with_detail(route));
            if cfg.run.samples > 0 {
                let n = cfg.run.samples;
                let oracle = lmmse_oracle(&p.ku, &p.kw, n, derive_seed(cfg.run.seed, 12)).map_err(|e| e.to_string())?;
                let scale = oracle_scale(&f, p.ku.matrix(), p.kw.matrix()).map_err(|e| e.to_string())?;
                let tol = 10.0 / (n as f64).sqrt() * scale;
                checks.push(Check::at_most("oracle agreement", linalg::max_abs_diff(&f, &oracle.f), tol).with_detail(format!("N = {n}")));
            }
            Some(route)
        }
        None => {
            checks.push(Check::failed("residual orthogonality", "no route produced a filter"));
            None
        }
    };

    out.checks_csv("verify.csv", &checks)?;
    let pass = checks.iter().all(|c| c.pass);
    out.json(
        "verify.json",
        &json!({
            "command": "verify",
            "grid": { "n": p.grid.n(), "L": p.grid.half_width() },
            "route": route,
            "fault": cfg.run.fault,
            "seed": cfg.run.seed,
            "checks": checks,
            "pass": pass,
        }),
    )?;
    if !quiet {
        print_table(&checks);
    }
    Ok(pass)
}
