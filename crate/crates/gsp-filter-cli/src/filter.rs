//! `filter`: solve for the optimal filter along the selected routes and tabulate the error functional.

use gsp_filter::io::write_operator_binary;
use gsp_filter::linalg::{self, CMat};
use gsp_filter::sim::CovarianceOperator;
use gsp_filter::solvers::{mse, solve_commuting, solve_douglas, solve_general, solve_wss, FilterSolution};
use gsp_filter::spectral::{rn_filter, wss_mse_forms};
use gsp_filter::{Grid, GspError};
use serde_json::{json, Value};

use crate::config::{split_list, Process, RunConfig};
use crate::family::parse_family;
use crate::report::{print_table, Check, Output};

pub const ROUTES: [&str; 4] = ["wss", "commuting", "general", "douglas"];

pub struct Problem {
    pub grid: Grid,
    pub signal: Process,
    pub noise: Process,
    pub ku: CovarianceOperator,
    pub kw: CovarianceOperator,
}

impl Problem {
    pub fn load(cfg: &RunConfig) -> Result<Self, String> {
        let grid = cfg.grid()?;
        let signal = cfg.signal(&grid)?;
        let noise = cfg.noise(&grid)?;
        let ku = signal.covariance(&grid, "signal")?;
        let kw = noise.covariance(&grid, "noise")?;
        Ok(Problem { grid, signal, noise, ku, kw })
    }

    pub fn is_wss(&self) -> bool {
        self.signal.measure().is_some() && self.noise.measure().is_some()
    }
}

pub enum RouteOutcome {
    Solved(Box<FilterSolution>),
    /// The route's precondition does not hold and the route was not explicitly requested.
    Skipped(String),
    Failed(String),
}

fn selected_routes(cfg: &RunConfig) -> Result<(Vec<&'static str>, bool), String> {
    let spec = cfg.solver.routes.trim();
    if spec == "auto" {
        return Ok((ROUTES.to_vec(), false));
    }
    let routes = split_list(spec, ',')
        .map(|r| ROUTES.iter().copied().find(|k| *k == r).ok_or_else(|| format!("unknown route '{r}'")))
        .collect::<Result<Vec<_>, _>>()?;
    if routes.is_empty() {
        return Err("no solver route selected".into());
    }
    Ok((routes, true))
}

fn precondition(e: &GspError) -> bool {
    matches!(e, GspError::NotCommuting(_) | GspError::SpectralFloor { .. } | GspError::Singular(_))
}

pub fn solve_routes(cfg: &RunConfig, p: &Problem) -> Result<Vec<(&'static str, RouteOutcome)>, String> {
    let (routes, explicit) = selected_routes(cfg)?;
    let s = &cfg.solver;
    Ok(routes
        .into_iter()
        .map(|route| {
            let result = match route {
                "wss" => match (p.signal.measure(), p.noise.measure()) {
                    (Some(mu_u), Some(mu_w)) => solve_wss(mu_u, mu_w),
                    _ => {
                        let reason = "inputs are not both spectral measures".to_string();
                        let outcome = if explicit { RouteOutcome::Failed(reason) } else { RouteOutcome::Skipped(reason) };
                        return (route, outcome);
                    }
                },
                "commuting" => solve_commuting(p.ku.matrix(), p.kw.matrix(), s.tau),
                "general" => solve_general(p.ku.matrix(), p.kw.matrix(), s.eps),
                _ => solve_douglas(p.ku.matrix(), p.kw.matrix(), s.svd_tol),
            };
            let outcome = match result {
                Ok(sol) => RouteOutcome::Solved(Box::new(sol)),
                Err(e) if !explicit && precondition(&e) => RouteOutcome::Skipped(e.to_string()),
                Err(e) => RouteOutcome::Failed(e.to_string()),
            };
            (route, outcome)
        })
        .collect())
}

pub fn run(cfg: &RunConfig, out: &Output, quiet: bool) -> Result<bool, String> {
    let p = Problem::load(cfg)?;
    let family = parse_family(&p.grid, &cfg.tests.family)?;
    let outcomes = solve_routes(cfg, &p)?;
    let tol = cfg.solver.tolerance;

    let mut checks = Vec::new();
    let mut routes_json = serde_json::Map::new();
    let mut solved: Vec<(&str, &CMat)> = Vec::new();
    for (route, outcome) in &outcomes {
        let entry = match outcome {
            RouteOutcome::Solved(sol) => {
                let d = &sol.diagnostics;
                checks.push(Check::at_most(&format!("{route} relative residual"), d.relative_residual, tol));
                if cfg.run.operators {
                    write_operator_binary(out.file(&format!("filter_{route}.bin"))?, &p.grid, &sol.f)
                        .map_err(|e| e.to_string())?;
                }
                solved.push((route, &sol.f));
                json!({ "status": "solved", "diagnostics": sol.diagnostics_json() })
            }
            RouteOutcome::Skipped(why) => json!({ "status": "skipped", "reason": why }),
            RouteOutcome::Failed(why) => {
                checks.push(Check::failed(&format!("{route} solve"), why.clone()));
                json!({ "status": "failed", "reason": why })
            }
        };
        routes_json.insert(route.to_string(), entry);
    }
    if solved.is_empty() {
        checks.push(Check::failed("any route", "no route produced a filter"));
    }
    let mut cross = 0.0f64;
    for i in 0..solved.len() {
        for j in 0..i {
            cross = cross.max(linalg::max_abs_diff(solved[i].1, solved[j].1));
        }
    }
    if solved.len() > 1 {
        checks.push(Check::at_most("cross-route max difference", cross, tol));
    }

    let mut table = csv::Writer::from_writer(out.file("mse.csv")?);
    table.write_record(["function", "route", "j", "j_spectral"]).map_err(|e| e.to_string())?;
    let spectral = match (p.signal.measure(), p.noise.measure()) {
        (Some(mu_u), Some(mu_w)) => {
            let filter = rn_filter(mu_u, mu_w, cfg.solver.tau).map_err(|e| e.to_string())?;
            let mut fhat = csv::Writer::from_writer(out.file("fhat.csv")?);
            fhat.write_record(["xi", "fhat", "support"]).map_err(|e| e.to_string())?;
            for (k, (v, s)) in filter.fhat.iter().zip(&filter.support).enumerate() {
                fhat.serialize((p.grid.frequency(k), v, *s as u8)).map_err(|e| e.to_string())?;
            }
            fhat.flush().map_err(|e| e.to_string())?;
            Some((filter, mu_u, mu_w))
        }
        _ => None,
    };
    for t in &family {
        let js = match &spectral {
            Some((filter, mu_u, mu_w)) => Some(wss_mse_forms(filter, &t.f, mu_u, mu_w).map_err(|e| e.to_string())?.0),
            None => None,
        };
        for (route, f) in &solved {
            let rep = mse(f, p.ku.matrix(), p.kw.matrix(), &t.f).map_err(|e| e.to_string())?;
            table.serialize((&t.name, route, rep.value, js)).map_err(|e| e.to_string())?;
        }
    }
    table.flush().map_err(|e| e.to_string())?;

    let pass = checks.iter().all(|c| c.pass);
    let summary: Value = json!({
        "command": "filter",
        "grid": { "n": p.grid.n(), "L": p.grid.half_width() },
        "stationary": p.is_wss(),
        "routes": routes_json,
        "cross_route_max_difference": if solved.len() > 1 { Some(cross) } else { None },
        "checks": checks,
        "pass": pass,
    });
    out.json("summary.json", &summary)?;
    if !quiet {
        print_table(&checks);
    }
    Ok(pass)
}
