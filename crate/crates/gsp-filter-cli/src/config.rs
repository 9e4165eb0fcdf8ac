//! Run configuration: a flat TOML file with one level of sections.
//!
//! ```toml
//! [grid]
//! n = 128
//! L = 12.0
//!
//! [signal]
//! measure = "sobolev -1"
//!
//! [noise]
//! operator = "kw.bin"
//!
//! [solver]
//! routes = "auto"
//!
//! [run]
//! seed = 7
//! samples = 20000
//! ```

use std::path::{Path, PathBuf};

use gsp_filter::gabor::GaborConfig;
use gsp_filter::io::read_operator_binary;
use gsp_filter::linalg::CMat;
use gsp_filter::sim::CovarianceOperator;
use gsp_filter::spectral::SpectralMeasure;
use gsp_filter::symbol_matrix::default_radius;
use gsp_filter::Grid;
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub grid: GridSection,
    pub signal: ProcessSection,
    pub noise: ProcessSection,
    pub solver: SolverSection,
    pub run: RunSection,
    pub tests: TestSection,
    pub gabor: GaborSection,
    pub decay: DecaySection,
    pub output: OutputSection,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    #[serde(rename = "L")]
    pub l: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection { n: 128, l: 12.0 }
    }
}

pub const DEFAULT_SIGNAL: &str = "sobolev -1 + band -2 2 1";
pub const DEFAULT_NOISE: &str = "lebesgue 0.2";

/// A process is given either by its spectral measure or by a covariance matrix dump.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProcessSection {
    pub measure: Option<String>,
    pub operator: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    /// `auto` or a comma separated subset of `wss, commuting, general, douglas`.
    pub routes: String,
    pub tau: Option<f64>,
    pub eps: Option<f64>,
    pub svd_tol: Option<f64>,
    pub tolerance: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        SolverSection { routes: "auto".into(), tau: None, eps: None, svd_tol: None, tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub seed: u64,
    pub samples: usize,
    /// Relative size of the perturbation added to the filter before verification.
    pub fault: f64,
    /// Write filter matrices as binary dumps.
    pub operators: bool,
    pub pairs: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection { seed: 0, samples: 20_000, fault: 0.0, operators: true, pairs: 5 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestSection {
    /// Semicolon separated list of `gaussian c s`, `modulated c s w`, `bump beta`.
    pub family: String,
}

impl Default for TestSection {
    fn default() -> Self {
        TestSection {
            family: "gaussian -2 0.7; gaussian 0 1; gaussian 1.5 1.5; modulated 0 1 1; modulated 0 1 -2.5; \
                     modulated 0 1 4; bump 1; bump 3"
                .into(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaborSection {
    pub n2: usize,
    #[serde(rename = "L2")]
    pub l2: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl Default for GaborSection {
    fn default() -> Self {
        GaborSection { n2: 72, l2: None, a: None, b: None }
    }
}

impl GaborSection {
    pub fn config(&self) -> Result<GaborConfig, String> {
        let square = GaborConfig::square(self.n2).map_err(|e| e.to_string())?;
        let cfg = GaborConfig {
            n2: self.n2,
            l2: self.l2.unwrap_or(square.l2),
            a: self.a.unwrap_or(square.a),
            b: self.b.unwrap_or(square.b),
        };
        if cfg.a * cfg.b >= std::f64::consts::PI {
            return Err(format!("lattice constants a = {}, b = {} violate ab < pi", cfg.a, cfg.b));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecaySection {
    /// Semicolon separated list of `rough r`, `gaussian s`, `zero`.
    pub symbols: String,
    /// Semicolon separated integer lattice coordinates `n1 n2 k1 k2`.
    pub columns: String,
    pub radius: Option<f64>,
    /// Comma separated multiples of the radius for the truncation table.
    pub sweep: String,
    pub t: f64,
}

impl Default for DecaySection {
    fn default() -> Self {
        DecaySection {
            symbols: "rough 12; gaussian 1".into(),
            columns: "0 0 0 0; 1 -1 2 0; -2 1 0 1; 0 2 -1 -2".into(),
            radius: None,
            sweep: String::new(),
            t: 4.0,
        }
    }
}

impl DecaySection {
    pub fn radius(&self) -> f64 {
        self.radius.unwrap_or_else(default_radius)
    }

    pub fn columns(&self) -> Result<Vec<[i64; 4]>, String> {
        split_list(&self.columns, ';')
            .map(|item| {
                let v: Vec<i64> = item
                    .split_whitespace()
                    .map(|w| w.parse().map_err(|_| format!("bad lattice coordinate '{w}'")))
                    .collect::<Result<_, _>>()?;
                v.try_into().map_err(|_| format!("column '{item}' needs four integers"))
            })
            .collect()
    }

    pub fn sweep(&self) -> Result<Vec<f64>, String> {
        split_list(&self.sweep, ',').map(|w| w.parse().map_err(|_| format!("bad sweep factor '{w}'"))).collect()
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

pub fn split_list(s: &str, sep: char) -> impl Iterator<Item = &str> {
    s.split(sep).map(str::trim).filter(|t| !t.is_empty())
}

/// Input process after loading.
pub enum Process {
    Measure(SpectralMeasure),
    Operator(CMat),
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("invalid config: {e}"))
    }

    pub fn grid(&self) -> Result<Grid, String> {
        Grid::new(self.grid.n, self.grid.l).map_err(|e| e.to_string())
    }

    fn process(&self, grid: &Grid, section: &ProcessSection, name: &str) -> Result<Process, String> {
        match (&section.measure, &section.operator) {
            (Some(m), None) => SpectralMeasure::parse(grid, m).map(Process::Measure).map_err(|e| format!("{name}: {e}")),
            (None, Some(p)) => {
                let path = self.base_dir.join(p);
                let file = std::fs::File::open(&path).map_err(|e| format!("{name}: cannot open {}: {e}", path.display()))?;
                let (g, k) = read_operator_binary(std::io::BufReader::new(file)).map_err(|e| format!("{name}: {e}"))?;
                if g != *grid {
                    return Err(format!("{name}: operator grid (n = {}, L = {}) differs from [grid]", g.n(), g.half_width()));
                }
                Ok(Process::Operator(k))
            }
            (None, None) => {
                let default = if name == "signal" { DEFAULT_SIGNAL } else { DEFAULT_NOISE };
                SpectralMeasure::parse(grid, default).map(Process::Measure).map_err(|e| e.to_string())
            }
            (Some(_), Some(_)) => Err(format!("[{name}] sets both 'measure' and 'operator'")),
        }
    }

    pub fn signal(&self, grid: &Grid) -> Result<Process, String> {
        self.process(grid, &self.signal, "signal")
    }

    pub fn noise(&self, grid: &Grid) -> Result<Process, String> {
        self.process(grid, &self.noise, "noise")
    }
}

impl Process {
    /// Covariance operator, checked to be positive semidefinite.
    pub fn covariance(&self, grid: &Grid, name: &str) -> Result<CovarianceOperator, String> {
        match self {
            Process::Measure(mu) => CovarianceOperator::wss(mu),
            Process::Operator(k) => CovarianceOperator::new(*grid, k.clone()),
        }
        .map_err(|e| format!("{name} covariance rejected: {e}"))
    }

    pub fn measure(&self) -> Option<&SpectralMeasure> {
        match self {
            Process::Measure(mu) => Some(mu),
            Process::Operator(_) => None,
        }
    }
}
