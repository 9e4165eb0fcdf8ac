//! `decay`: Gabor matrix columns for configured symbols and their off-diagonal decay.

use gsp_filter::gabor::{GaborCoefficients, GaborSystem};
use gsp_filter::io::write_decay_json;
use gsp_filter::symbol_matrix::{build_m, decay_fit, rough_coefficients, symbol_to_plane, weyl_grid, SymplecticStft};
use gsp_filter::weyl::WeylSymbol;
use gsp_filter::C64;
use serde_json::json;

use crate::config::{split_list, RunConfig};
use crate::report::{print_table, Check, Output};

fn coefficients(sys: &GaborSystem, spec: &str) -> Result<GaborCoefficients, String> {
    let words: Vec<&str> = spec.split_whitespace().collect();
    let arg = |i: usize| -> Result<f64, String> {
        words.get(i).ok_or_else(|| format!("symbol '{spec}' is missing a parameter"))?.parse().map_err(|_| format!("bad number in '{spec}'"))
    };
    match words.first().copied() {
        Some("rough") if words.len() == 2 => Ok(rough_coefficients(sys, arg(1)?)),
        Some("gaussian") if words.len() == 2 => {
            let s = arg(1)?;
            let grid = weyl_grid(sys).map_err(|e| e.to_string())?;
            let b = WeylSymbol::from_fn(grid, |x, xi| C64::new((-(x * x + xi * xi) / (2.0 * s * s)).exp(), 0.0))
                .map_err(|e| e.to_string())?;
            let (plane, _) = symbol_to_plane(&b, sys).map_err(|e| e.to_string())?;
            sys.analyze(&plane).map_err(|e| e.to_string())
        }
        Some("zero") if words.len() == 1 => Ok(vec![C64::new(0.0, 0.0); sys.len()]),
        _ => Err(format!("unknown or malformed symbol '{spec}'")),
    }
}

pub fn run(cfg: &RunConfig, out: &Output, quiet: bool) -> Result<bool, String> {
    let sys = GaborSystem::new(cfg.gabor.config()?).map_err(|e| e.to_string())?;
    let stft = SymplecticStft::new(&sys).map_err(|e| e.to_string())?;
    let d = &cfg.decay;
    let radius = d.radius();
    let columns: Vec<usize> = d.columns()?.into_iter().map(|c| sys.lattice_index(c)).collect();
    let sweep = d.sweep()?;
    let symbols: Vec<&str> = split_list(&d.symbols, ';').collect();
    if symbols.is_empty() {
        return Err("[decay] lists no symbols".into());
    }

    let mut checks = Vec::new();
    let mut reports = Vec::new();
    let mut truncation = csv::Writer::from_writer(out.file("truncation.csv")?);
    truncation.write_record(["symbol", "radius", "tail_bound", "max_abs_diff"]).map_err(|e| e.to_string())?;
    for (i, spec) in symbols.iter().enumerate() {
        let g = coefficients(&sys, spec)?;
        let m = build_m(&sys, &stft, &g, radius, &columns).map_err(|e| e.to_string())?;
        let rep = decay_fit(&m, &sys, d.t).map_err(|e| e.to_string())?;
        write_decay_json(out.file(&format!("decay_{i}.json"))?, &rep).map_err(|e| e.to_string())?;
        let mut shells = csv::Writer::from_writer(out.file(&format!("shells_{i}.csv"))?);
        shells.write_record(["rho", "max_abs", "count", "fitted", "checked"]).map_err(|e| e.to_string())?;
        for s in &rep.shells {
            shells.serialize((s.rho, s.max_abs, s.count, s.fitted as u8, s.checked as u8)).map_err(|e| e.to_string())?;
        }
        shells.flush().map_err(|e| e.to_string())?;
        for factor in &sweep {
            let r = factor * radius;
            let mr = build_m(&sys, &stft, &g, r, &columns).map_err(|e| e.to_string())?;
            let diff = m.max_abs_diff(&mr).map_err(|e| e.to_string())?;
            truncation.serialize((spec, r, mr.tail_bound(), diff)).map_err(|e| e.to_string())?;
        }
        let mut check = Check::at_most(&format!("{spec} violations"), rep.violations as f64, 0.0);
        check.pass = rep.passes();
        checks.push(check.with_detail(format!("fitted exponent {:.3}", rep.fitted_t)));
        reports.push(json!({
            "symbol": spec,
            "max_abs": m.max_abs(),
            "fitted_t": rep.fitted_t,
            "fit_residual": rep.fit_residual,
            "C": rep.c,
            "violations": rep.violations,
            "pass": rep.passes(),
        }));
    }
    truncation.flush().map_err(|e| e.to_string())?;

    let pass = checks.iter().all(|c| c.pass);
    let c = sys.config();
    out.json(
        "decay.json",
        &json!({
            "command": "decay",
            "gabor": { "n2": c.n2, "L2": c.l2, "a": c.a, "b": c.b, "lattice_points": sys.len() },
            "radius": radius,
            "t_target": d.t,
            "columns": columns,
            "symbols": reports,
            "pass": pass,
        }),
    )?;
    if !quiet {
        print_table(&checks);
    }
    Ok(pass)
}
