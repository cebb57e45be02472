//! Experiment configuration: a flat `key = value` file merged with
//! command-line overrides, then validated into typed form.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use berezin_core::{KGrid, ModelPoint, Observable, TestFunction};
use num_complex::Complex64;

use crate::error::CliError;

/// Keys accepted in a config file. Tolerances use `tolerance.<name>`.
pub const KEYS: &[&str] = &[
    "observable",
    "chi",
    "points",
    "k_grid",
    "fit_order",
    "cache_dir",
    "out",
    "assembly",
    "quadrature",
    "omega0",
    "q",
    "c2",
    "scan_resolution",
];

/// Where a raw value came from, for diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Origin {
    File { path: PathBuf, line: usize },
    CommandLine,
    Environment(&'static str),
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::File { path, line } => write!(f, "{}:{}", path.display(), line),
            Origin::CommandLine => f.write_str("command line"),
            Origin::Environment(var) => write!(f, "environment variable {var}"),
        }
    }
}

/// Unvalidated key/value pairs with their origins. Later inserts win.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, Origin)>,
}

fn is_known(key: &str) -> bool {
    KEYS.contains(&key)
        || key
            .strip_prefix("tolerance.")
            .is_some_and(|name| Tolerances::NAMES.contains(&name))
}

impl RawConfig {
    pub fn parse_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text, path)
    }

    pub fn parse_str(text: &str, path: &Path) -> Result<Self, CliError> {
        let mut raw = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let origin = Origin::File {
                path: path.to_path_buf(),
                line: n + 1,
            };
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Field {
                    origin,
                    field: line.to_string(),
                    reason: "expected `key = value`".into(),
                });
            };
            let key = key.trim();
            if !is_known(key) {
                return Err(CliError::Field {
                    origin,
                    field: key.to_string(),
                    reason: "unknown key".into(),
                });
            }
            if raw.entries.get(key).is_some_and(|(_, o)| matches!(o, Origin::File { .. })) {
                return Err(CliError::Field {
                    origin,
                    field: key.to_string(),
                    reason: "duplicate key".into(),
                });
            }
            raw.entries.insert(key.to_string(), (value.trim().to_string(), origin));
        }
        Ok(raw)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>, origin: Origin) -> Result<(), CliError> {
        if !is_known(key) {
            return Err(CliError::Field {
                origin,
                field: key.to_string(),
                reason: "unknown key".into(),
            });
        }
        self.entries.insert(key.to_string(), (value.into(), origin));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&(String, Origin)> {
        self.entries.get(key)
    }

    /// Parses `key` with `parse`, attaching origin and field to failures.
    fn typed<T>(
        &self,
        key: &str,
        parse: impl FnOnce(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, origin)) => parse(v).map(Some).map_err(|reason| CliError::Field {
                origin: origin.clone(),
                field: key.to_string(),
                reason,
            }),
        }
    }
}

/// Thresholds for the numerical contracts the runner enforces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Eigen-residual bound relative to `max(1, ‖T‖_max)`.
    pub residual: f64,
    /// `|a_k − oracle|` in reports.
    pub oracle: f64,
    pub szego_ratio_min: f64,
    pub szego_ratio_max: f64,
    /// Optional bound on the last Szegő error.
    pub szego_target: Option<f64>,
    pub gradient: f64,
    pub det: f64,
    pub separation: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: 1e-10,
            oracle: 1e-12,
            szego_ratio_min: 0.4,
            szego_ratio_max: 0.6,
            szego_target: None,
            gradient: 1e-12,
            det: 1e-8,
            separation: 0.01,
        }
    }
}

impl Tolerances {
    pub const NAMES: &'static [&'static str] = &[
        "residual",
        "oracle",
        "szego-ratio-min",
        "szego-ratio-max",
        "szego-target",
        "gradient",
        "det",
        "separation",
    ];

    fn set(&mut self, name: &str, v: f64) {
        match name {
            "residual" => self.residual = v,
            "oracle" => self.oracle = v,
            "szego-ratio-min" => self.szego_ratio_min = v,
            "szego-ratio-max" => self.szego_ratio_max = v,
            "szego-target" => self.szego_target = Some(v),
            "gradient" => self.gradient = v,
            "det" => self.det = v,
            "separation" => self.separation = v,
            _ => unreachable!("tolerance names are checked on insert"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AssemblyPath {
    /// Closed form when the symbol allows it.
    Auto,
    Closed,
    /// Quadrature, with explicit `(radial, angular)` orders or the
    /// level-dependent default.
    Quadrature(Option<(usize, usize)>),
}

/// A grid point with the text it was parsed from.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub label: String,
    pub point: ModelPoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaParams {
    pub omega0: f64,
    pub q: f64,
    pub c2: f64,
    pub resolution: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub observable: Observable,
    pub observable_spec: String,
    pub chi: TestFunction,
    pub chi_spec: String,
    pub points: Vec<GridPoint>,
    /// `None` when the subcommand default applies.
    pub k_grid: Option<Vec<u32>>,
    pub fit_order: usize,
    pub tolerances: Tolerances,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub assembly: AssemblyPath,
    pub lemma: LemmaParams,
}

pub const DEFAULT_OBSERVABLE: &str = "u3";
pub const DEFAULT_CHI: &str = "gaussian:0,1";
pub const DEFAULT_POINTS: &str = "latitudes:3,3";
pub const DEFAULT_FIT_ORDER: usize = 2;
pub const CACHE_ENV: &str = "BEREZIN_CACHE_DIR";

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self, CliError> {
        let observable_spec = raw
            .get("observable")
            .map_or(DEFAULT_OBSERVABLE.to_string(), |(v, _)| v.clone());
        let observable = raw
            .typed("observable", |s| s.parse::<Observable>())?
            .unwrap_or_else(Observable::u3);
        let chi_spec = raw.get("chi").map_or(DEFAULT_CHI.to_string(), |(v, _)| v.clone());
        let chi = match raw.typed("chi", |s| s.parse::<TestFunction>())? {
            Some(c) => c,
            None => DEFAULT_CHI.parse().expect("default test function parses"),
        };
        let points = match raw.typed("points", parse_points)? {
            Some(p) => p,
            None => parse_points(DEFAULT_POINTS).expect("default grid parses"),
        };
        let k_grid = raw.typed("k_grid", parse_k_grid)?;
        let fit_order = raw
            .typed("fit_order", |s| {
                s.parse::<usize>().map_err(|e| format!("not a fit order: {e}"))
            })?
            .unwrap_or(DEFAULT_FIT_ORDER);

        let mut tolerances = Tolerances::default();
        for name in Tolerances::NAMES {
            let key = format!("tolerance.{name}");
            if let Some(v) = raw.typed(&key, parse_positive)? {
                tolerances.set(name, v);
            }
        }
        if tolerances.szego_ratio_min >= tolerances.szego_ratio_max {
            let (_, origin) = raw
                .get("tolerance.szego-ratio-min")
                .or_else(|| raw.get("tolerance.szego-ratio-max"))
                .cloned()
                .unwrap_or((String::new(), Origin::CommandLine));
            return Err(CliError::Field {
                origin,
                field: "tolerance.szego-ratio-min".into(),
                reason: "must be below tolerance.szego-ratio-max".into(),
            });
        }

        let quadrature = raw.typed("quadrature", |s| {
            let v: Vec<&str> = s.split(',').map(str::trim).collect();
            match v.as_slice() {
                [r, a] => {
                    let r: usize = r.parse().map_err(|e| format!("radial order: {e}"))?;
                    let a: usize = a.parse().map_err(|e| format!("angular nodes: {e}"))?;
                    if r == 0 || a == 0 {
                        return Err("quadrature orders must be positive".into());
                    }
                    Ok((r, a))
                }
                _ => Err("expected `radial,angular`".into()),
            }
        })?;
        let assembly = raw
            .typed("assembly", |s| match s {
                "auto" => Ok(AssemblyPath::Auto),
                "closed" => Ok(AssemblyPath::Closed),
                "quadrature" => Ok(AssemblyPath::Quadrature(None)),
                other => Err(format!("unknown assembly path `{other}` (auto, closed, quadrature)")),
            })?
            .unwrap_or(AssemblyPath::Auto);
        let assembly = match (assembly, quadrature) {
            (AssemblyPath::Quadrature(_), q) => AssemblyPath::Quadrature(q),
            (a, None) => a,
            (_, Some(_)) => {
                let (_, origin) = raw.get("quadrature").cloned().expect("present");
                return Err(CliError::Field {
                    origin,
                    field: "quadrature".into(),
                    reason: "quadrature orders need `assembly = quadrature`".into(),
                });
            }
        };

        let omega0 = raw.typed("omega0", parse_positive)?.unwrap_or(1.0);
        let q = raw.typed("q", parse_finite)?.unwrap_or(1.0);
        let c2 = raw.typed("c2", parse_finite)?.unwrap_or(0.0);
        let resolution = raw
            .typed("scan_resolution", |s| {
                let r: usize = s.parse().map_err(|e| format!("not a resolution: {e}"))?;
                if !(3..=15).contains(&r) {
                    return Err("scan resolution must lie in 3..=15".into());
                }
                Ok(r)
            })?
            .unwrap_or(7);

        Ok(ExperimentConfig {
            observable,
            observable_spec,
            chi,
            chi_spec,
            points,
            k_grid,
            fit_order,
            tolerances,
            cache_dir: raw.get("cache_dir").map(|(v, _)| PathBuf::from(v)),
            out: raw.get("out").map(|(v, _)| PathBuf::from(v)),
            assembly,
            lemma: LemmaParams {
                omega0,
                q,
                c2,
                resolution,
            },
        })
    }

    /// Levels to run, falling back to `default`.
    pub fn levels(&self, default: &[u32]) -> Vec<u32> {
        self.k_grid.clone().unwrap_or_else(|| default.to_vec())
    }

    /// Levels as a fit grid; `k = 0` and too-short grids are rejected here,
    /// before any computation.
    pub fn fit_grid(&self, default: &[u32]) -> Result<KGrid, CliError> {
        let grid = KGrid::new(self.levels(default)).map_err(|e| CliError::validation(format!("k_grid: {e}")))?;
        Ok(grid)
    }
}

fn parse_finite(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if v <= 0.0 {
        return Err(format!("`{s}` must be positive"));
    }
    Ok(v)
}

/// Comma-separated strictly increasing levels; `a..b` and `a..b:step`
/// ranges are accepted as items.
pub fn parse_k_grid(s: &str) -> Result<Vec<u32>, String> {
    let mut ks = Vec::new();
    for item in s.split(',').map(str::trim) {
        if item.is_empty() {
            continue;
        }
        if let Some((lo, rest)) = item.split_once("..") {
            let (hi, step) = rest.split_once(':').unwrap_or((rest, "1"));
            let lo: u32 = lo.trim().parse().map_err(|_| format!("bad range start in `{item}`"))?;
            let hi: u32 = hi.trim().parse().map_err(|_| format!("bad range end in `{item}`"))?;
            let step: u32 = step.trim().parse().map_err(|_| format!("bad range step in `{item}`"))?;
            if step == 0 || hi < lo {
                return Err(format!("empty or invalid range `{item}`"));
            }
            ks.extend((lo..=hi).step_by(step as usize));
        } else {
            ks.push(item.parse().map_err(|_| format!("`{item}` is not a level"))?);
        }
    }
    if ks.is_empty() {
        return Err("empty k-grid".into());
    }
    if ks.windows(2).any(|w| w[0] >= w[1]) {
        return Err("levels must be strictly increasing".into());
    }
    Ok(ks)
}

fn parse_coordinate(s: &str) -> Result<Complex64, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| parse_finite(x.trim()))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [re] => Ok(Complex64::new(*re, 0.0)),
        [re, im] => Ok(Complex64::new(*re, *im)),
        _ => Err(format!("coordinate `{s}` needs one or two numbers")),
    }
}

/// One point: `z=re[,im]` (south chart), `w=re[,im]` (north chart),
/// `angles=theta,phi` (polar angle from the south pole), `south`, `north`.
pub fn parse_point(s: &str) -> Result<GridPoint, String> {
    let s = s.trim();
    let point = match s.split_once('=') {
        None if s == "south" => ModelPoint::south_pole(),
        None if s == "north" => ModelPoint::north_pole(),
        Some(("z", c)) => ModelPoint::south(parse_coordinate(c)?),
        Some(("w", c)) => ModelPoint::north(parse_coordinate(c)?),
        Some(("angles", c)) => {
            let a = parse_coordinate(c)?;
            ModelPoint::from_angles(a.re, a.im)
        }
        _ => return Err(format!("unrecognized point `{s}`")),
    };
    Ok(GridPoint {
        label: s.to_string(),
        point,
    })
}

/// `;`-separated points, or `latitudes:n,m` for `n` latitude circles at
/// polar angles `π i/(n+1)` with `m` equally spaced longitudes each.
pub fn parse_points(s: &str) -> Result<Vec<GridPoint>, String> {
    if let Some(spec) = s.trim().strip_prefix("latitudes:") {
        let v: Vec<usize> = spec
            .split(',')
            .map(|x| x.trim().parse().map_err(|_| format!("bad latitude grid `{s}`")))
            .collect::<Result<_, _>>()?;
        let [n, m] = v.as_slice() else {
            return Err(format!("latitude grid `{s}` needs two counts"));
        };
        if *n == 0 || *m == 0 {
            return Err("latitude grid counts must be positive".into());
        }
        return Ok(latitude_grid(*n, *m));
    }
    let points: Vec<GridPoint> = s
        .split(';')
        .filter(|p| !p.trim().is_empty())
        .map(parse_point)
        .collect::<Result<_, _>>()?;
    if points.is_empty() {
        return Err("no points given".into());
    }
    Ok(points)
}

pub fn latitude_grid(n: usize, m: usize) -> Vec<GridPoint> {
    let mut out = Vec::with_capacity(n * m);
    for i in 1..=n {
        let theta = PI * i as f64 / (n + 1) as f64;
        for j in 0..m {
            let phi = 2.0 * PI * j as f64 / m as f64;
            out.push(GridPoint {
                label: format!("angles={theta},{phi}"),
                point: ModelPoint::from_angles(theta, phi),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(text: &str) -> Result<RawConfig, CliError> {
        RawConfig::parse_str(text, Path::new("exp.conf"))
    }

    #[test]
    fn unknown_key_reports_line_and_field() {
        let err = raw("observable = u3\n\nfrobnicate = 2\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exp.conf:3"), "{msg}");
        assert!(msg.contains("frobnicate"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn bad_value_reports_origin() {
        let r = raw("# comment\nfit_order = two\n").unwrap();
        let msg = ExperimentConfig::from_raw(&r).unwrap_err().to_string();
        assert!(msg.contains("exp.conf:2") && msg.contains("fit_order"), "{msg}");
    }

    #[test]
    fn negative_tolerance_rejected() {
        let r = raw("tolerance.oracle = -1e-3\n").unwrap();
        assert!(ExperimentConfig::from_raw(&r).is_err());
        let r = raw("tolerance.det = 0\n").unwrap();
        assert!(ExperimentConfig::from_raw(&r).is_err());
    }

    #[test]
    fn command_line_overrides_file() {
        let mut r = raw("chi = gaussian:0.5,0.7\nk_grid = 4,8\n").unwrap();
        r.set("k_grid", "2", Origin::CommandLine).unwrap();
        let c = ExperimentConfig::from_raw(&r).unwrap();
        assert_eq!(c.k_grid, Some(vec![2]));
        assert_eq!(c.chi_spec, "gaussian:0.5,0.7");
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::from_raw(&RawConfig::default()).unwrap();
        assert_eq!(c.points.len(), 9);
        assert_eq!(c.fit_order, 2);
        assert_eq!(c.assembly, AssemblyPath::Auto);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn k_grid_forms() {
        assert_eq!(parse_k_grid("2").unwrap(), vec![2]);
        assert_eq!(parse_k_grid("0..4").unwrap(), vec![0, 1, 2, 3, 4]);
        assert_eq!(parse_k_grid("32..64:16, 128").unwrap(), vec![32, 48, 64, 128]);
        assert!(parse_k_grid("").is_err());
        assert!(parse_k_grid("8,4").is_err());
        assert!(parse_k_grid("4,4").is_err());
    }

    #[test]
    fn point_forms() {
        assert_eq!(parse_point("z=0").unwrap().point, ModelPoint::south_pole());
        assert_eq!(parse_point("north").unwrap().point, ModelPoint::north_pole());
        let p = parse_point("w=0.5,-0.25").unwrap().point;
        assert_eq!(p.coordinate(), Complex64::new(0.5, -0.25));
        assert!(parse_point("x=1").is_err());
        assert!(parse_point("z=1,2,3").is_err());
        assert_eq!(parse_points("z=0;north;").unwrap().len(), 2);
        assert!(parse_points("latitudes:0,3").is_err());
    }

    #[test]
    fn latitude_grid_avoids_poles_and_is_spread() {
        let g = latitude_grid(3, 3);
        let mut heights: Vec<f64> = g.iter().map(|p| p.point.sphere_coords()[2]).collect();
        heights.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(heights.len(), 3);
        assert!(heights.iter().all(|h| h.abs() < 0.99));
    }

    #[test]
    fn quadrature_orders_need_quadrature_path() {
        let r = raw("quadrature = 40,21\n").unwrap();
        assert!(ExperimentConfig::from_raw(&r).is_err());
        let r = raw("assembly = quadrature\nquadrature = 40,21\n").unwrap();
        let c = ExperimentConfig::from_raw(&r).unwrap();
        assert_eq!(c.assembly, AssemblyPath::Quadrature(Some((40, 21))));
    }
}
