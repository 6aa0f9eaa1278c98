use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::flow::FlowDirection;
use crate::geometry::BianchiClass;
use crate::integrate::Controls;
use crate::pipeline::DEFAULT_HORIZON;

/// Either `"a,b,c"` or `[a, b, c]` in a config file.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Triple {
    Text(String),
    List([f64; 3]),
}

/// Flat key-value config file; every key mirrors a command-line flag.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    class: Option<String>,
    direction: Option<String>,
    initial: Option<Triple>,
    horizon: Option<f64>,
    rel_tol: Option<f64>,
    abs_tol: Option<f64>,
    max_coeff: Option<f64>,
    out: Option<PathBuf>,
    summary: Option<PathBuf>,
    grid: Option<String>,
    bisect: Option<String>,
    no_swap: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("config {}: {e}", path.display())))
    }
}

/// Values given on the command line; `None` falls back to the config file.
#[derive(Debug, Clone, Default)]
pub struct FlagValues {
    pub class: Option<String>,
    pub direction: Option<String>,
    pub initial: Option<String>,
    pub horizon: Option<f64>,
    pub rel_tol: Option<f64>,
    pub abs_tol: Option<f64>,
    pub max_coeff: Option<f64>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub grid: Option<String>,
    pub bisect: Option<String>,
    pub no_swap: bool,
}

/// Fully resolved settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub class: Option<BianchiClass>,
    pub direction: FlowDirection,
    pub initial: Option<[f64; 3]>,
    pub horizon: f64,
    pub controls: Controls,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub grid: Option<GridSpec>,
    pub bisect: Option<BisectSpec>,
    pub allow_swap: bool,
}

impl RunConfig {
    pub fn resolve(flags: FlagValues, file: Option<FileConfig>) -> Result<Self> {
        let file = file.unwrap_or_default();
        let class = flags.class.or(file.class).map(|s| s.parse::<BianchiClass>()).transpose()?;
        let direction = flags
            .direction
            .or(file.direction)
            .map(|s| s.parse::<FlowDirection>())
            .transpose()?
            .unwrap_or(FlowDirection::PositiveNormalized);
        let initial = match (flags.initial, file.initial) {
            (Some(s), _) | (None, Some(Triple::Text(s))) => Some(parse_triple(&s)?),
            (None, Some(Triple::List(x))) => Some(x),
            (None, None) => None,
        };
        let horizon = flags.horizon.or(file.horizon).unwrap_or(DEFAULT_HORIZON);
        let mut controls = Controls::default();
        if let Some(v) = flags.rel_tol.or(file.rel_tol) {
            controls.rel_tol = v;
        }
        if let Some(v) = flags.abs_tol.or(file.abs_tol) {
            controls.abs_tol = v;
        }
        if let Some(v) = flags.max_coeff.or(file.max_coeff) {
            controls.max_coeff = v;
        }
        controls.validate()?;
        if !(horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("horizon {horizon} must be finite")));
        }
        Ok(RunConfig {
            class,
            direction,
            initial,
            horizon,
            controls,
            out: flags.out.or(file.out),
            summary: flags.summary.or(file.summary),
            grid: flags.grid.or(file.grid).map(|s| s.parse()).transpose()?,
            bisect: flags.bisect.or(file.bisect).map(|s| s.parse()).transpose()?,
            allow_swap: !(flags.no_swap || file.no_swap.unwrap_or(false)),
        })
    }

    pub fn require_class(&self) -> Result<BianchiClass> {
        self.class.ok_or_else(|| Error::InvalidInput("--class is required".into()))
    }

    pub fn require_initial(&self) -> Result<[f64; 3]> {
        self.initial.ok_or_else(|| Error::InvalidInput("--initial a,b,c is required".into()))
    }
}

pub fn parse_triple(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Error::InvalidInput(format!("expected three comma-separated numbers, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.parse().map_err(|_| bad())?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        match self.n {
            1 => vec![self.lo],
            n => (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

/// Grid over initial data. With two of `A, B, C` the third is `4 / (product
/// of the other two)`; `x` walks the SL(2,R) family `(x, 2 sqrt(2/x), sqrt(2/x))`.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Coefficients { axes: [Option<Axis>; 3] },
    Family(Axis),
}

impl GridSpec {
    /// Points in row-major order: the first named axis varies slowest.
    pub fn points(&self) -> Vec<[f64; 3]> {
        match self {
            GridSpec::Family(axis) => {
                axis.values().into_iter().map(|x| crate::analyze::standard_family(x).coeffs()).collect()
            }
            GridSpec::Coefficients { axes } => {
                let given: Vec<(usize, Vec<f64>)> =
                    axes.iter().enumerate().filter_map(|(i, a)| a.map(|a| (i, a.values()))).collect();
                let mut out = vec![[f64::NAN; 3]];
                for (i, vals) in &given {
                    out = out
                        .into_iter()
                        .flat_map(|p| {
                            vals.iter().map(move |&v| {
                                let mut q = p;
                                q[*i] = v;
                                q
                            })
                        })
                        .collect();
                }
                if let Some(missing) = (0..3).find(|&i| axes[i].is_none()) {
                    for p in &mut out {
                        let prod: f64 = (0..3).filter(|&i| i != missing).map(|i| p[i]).product();
                        p[missing] = 4.0 / prod;
                    }
                }
                out
            }
        }
    }
}

fn parse_axis(s: &str) -> Result<Axis> {
    let bad = || Error::InvalidInput(format!("axis {s:?} must look like lo:hi:n"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let n: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if n == 0 || !(lo > 0.0 && hi > 0.0 && lo.is_finite() && hi.is_finite()) {
        return Err(bad());
    }
    Ok(Axis { lo, hi, n })
}

impl std::str::FromStr for GridSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let mut axes = [None; 3];
        let mut family = None;
        for item in s.split(',').map(str::trim).filter(|x| !x.is_empty()) {
            let (name, range) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidInput(format!("grid item {item:?} must look like A=lo:hi:n")))?;
            let axis = parse_axis(range)?;
            let slot = match name.trim() {
                "A" | "a" => 0,
                "B" | "b" => 1,
                "C" | "c" => 2,
                "x" => {
                    family = Some(axis);
                    continue;
                }
                other => return Err(Error::InvalidInput(format!("unknown grid axis {other:?}"))),
            };
            if axes[slot].replace(axis).is_some() {
                return Err(Error::InvalidInput(format!("grid axis {name} given twice")));
            }
        }
        let named = axes.iter().filter(|a| a.is_some()).count();
        match (family, named) {
            (Some(axis), 0) => Ok(GridSpec::Family(axis)),
            (None, 2 | 3) => Ok(GridSpec::Coefficients { axes }),
            _ => Err(Error::InvalidInput(format!(
                "grid {s:?} needs two or three of A, B, C, or the family axis x alone"
            ))),
        }
    }
}

/// Bracket `lo:hi[:width]` on the SL(2,R) family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectSpec {
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl std::str::FromStr for BisectSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("bisection {s:?} must look like lo:hi or lo:hi:width"));
        let v: Vec<f64> =
            s.split(':').map(|p| p.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        let (lo, hi, width) = match v[..] {
            [lo, hi] => (lo, hi, 1e-6),
            [lo, hi, w] => (lo, hi, w),
            _ => return Err(bad()),
        };
        if !(lo > 0.0 && hi > lo && width > 0.0) {
            return Err(bad());
        }
        Ok(BisectSpec { lo, hi, width })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triples() {
        assert_eq!(parse_triple("2, 1.6,1.25").unwrap(), [2.0, 1.6, 1.25]);
        assert!(parse_triple("2,1").is_err());
        assert!(parse_triple("2,1,x").is_err());
    }

    #[test]
    fn coefficient_grid_projects_onto_product_four() {
        let g: GridSpec = "A=1:2:3,B=0.5:1:2".parse().unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0][..2], [1.0, 0.5]);
        assert_eq!(pts[1][..2], [1.0, 1.0]);
        for p in pts {
            assert!((p[0] * p[1] * p[2] - 4.0).abs() < 1e-14);
        }
    }

    #[test]
    fn family_grid() {
        let g: GridSpec = "x=0.5:2:17".parse().unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 17);
        assert_eq!(pts[16], [2.0, 2.0, 1.0]);
        assert!("x=1:2:3,A=1:2:2".parse::<GridSpec>().is_err());
        assert!("A=1:2:3".parse::<GridSpec>().is_err());
    }

    #[test]
    fn bisect_specs() {
        let b: BisectSpec = "0.5:2".parse().unwrap();
        assert_eq!((b.lo, b.hi, b.width), (0.5, 2.0, 1e-6));
        assert!("2:0.5".parse::<BisectSpec>().is_err());
    }

    #[test]
    fn flags_override_file() {
        let file: FileConfig =
            serde_json::from_str(r#"{"class": "e11", "initial": [2, 1, 2], "horizon": 5, "rel_tol": 1e-10}"#).unwrap();
        let flags = FlagValues { class: Some("su2".into()), horizon: Some(7.0), ..Default::default() };
        let cfg = RunConfig::resolve(flags, Some(file)).unwrap();
        assert_eq!(cfg.class, Some(BianchiClass::Su2));
        assert_eq!(cfg.initial, Some([2.0, 1.0, 2.0]));
        assert_eq!(cfg.horizon, 7.0);
        assert_eq!(cfg.controls.rel_tol, 1e-10);
        assert!(serde_json::from_str::<FileConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
