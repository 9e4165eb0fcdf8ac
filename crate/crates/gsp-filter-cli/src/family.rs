//! Named test functions used for error tables and invariant checks.

use gsp_filter::grid::inverse_fourier;
use gsp_filter::{Domain, Grid, GridFunction, C64};

use crate::config::split_list;

pub struct TestFunction {
    pub name: String,
    pub f: GridFunction,
}

/// Parses `gaussian c s`, `modulated c s w` and `bump beta` items separated by `;`.
pub fn parse_family(grid: &Grid, spec: &str) -> Result<Vec<TestFunction>, String> {
    split_list(spec, ';')
        .map(|item| {
            let mut words = item.split_whitespace();
            let kind = words.next().unwrap_or_default();
            let args: Vec<f64> = words
                .map(|w| w.parse().map_err(|_| format!("bad number '{w}' in test function '{item}'")))
                .collect::<Result<_, _>>()?;
            let f = match (kind, args.as_slice()) {
                ("gaussian", &[c, s]) if s > 0.0 => modulated(grid, c, s, 0.0),
                ("modulated", &[c, s, w]) if s > 0.0 => modulated(grid, c, s, w),
                ("bump", &[beta]) if beta > 0.0 => bump(grid, beta)?,
                _ => return Err(format!("unknown or malformed test function '{item}'")),
            };
            Ok(TestFunction { name: item.split_whitespace().collect::<Vec<_>>().join(" "), f })
        })
        .collect()
}

fn modulated(grid: &Grid, c: f64, s: f64, w: f64) -> GridFunction {
    GridFunction::from_fn(*grid, Domain::Position, |x| {
        let t = x[0] - c;
        C64::from_polar((-t * t / (2.0 * s * s)).exp(), w * x[0])
    })
}

/// Band-limited bump with spectrum `(1 - (xi / beta)^2)^2` on `|xi| < beta`.
fn bump(grid: &Grid, beta: f64) -> Result<GridFunction, String> {
    let spec = GridFunction::from_fn(*grid, Domain::Frequency, |xi| {
        let t = xi[0] / beta;
        C64::new(if t.abs() < 1.0 { (1.0 - t * t).powi(2) } else { 0.0 }, 0.0)
    });
    inverse_fourier(&spec).map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_default_family() {
        let g = Grid::new(64, 8.0).unwrap();
        let fam = parse_family(&g, "gaussian 0 1; modulated 1 0.5 2;bump 2").unwrap();
        assert_eq!(fam.len(), 3);
        assert_eq!(fam[1].name, "modulated 1 0.5 2");
        assert!(fam.iter().all(|t| t.f.norm() > 0.0));
        assert!(parse_family(&g, "gaussian 0").is_err());
        assert!(parse_family(&g, "wavelet 1").is_err());
    }
}
