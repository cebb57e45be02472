use std::path::Path;

use berezin_core::asymptotics::{normalized_pairings, richardson_coefficients, szego_from_spectra};
use berezin_core::phase::{
    critical_point, gradient_norm, hessian_det, min_gradient_away_from_critical, scan_stationary, PhaseParams,
    ScanBox,
};
use berezin_core::{binomial_oracle, fit_expansion, global_measure, local_measure, KGrid, SpectralData, SymbolClass};
use serde::Serialize;

use crate::cache::Cache;
use crate::config::{ExperimentConfig, GridPoint};
use crate::error::{CliError, Violation};
use crate::pipeline::{spectra, Diagnostics, LevelSpectrum};
use crate::report::{header, json, num, point_columns, Output, PointRecord};

pub const DEFAULT_FIT_GRID: &[u32] = &[32, 48, 64, 96, 128, 192, 256];
pub const DEFAULT_SZEGO_GRID: &[u32] = &[64, 128, 256, 512];

/// Phase-scan exclusion radius around the closed-form critical point.
pub const SEPARATION_RADIUS: f64 = 0.1;

/// Per-level assembly provenance; identical for cached and fresh spectra.
fn provenance_stable(levels: &[LevelSpectrum]) -> Vec<(&'static str, String)> {
    levels
        .iter()
        .map(|l| ("assembly", format!("k={} {}", l.data.level().k(), l.provenance)))
        .collect()
}

fn describe(cfg: &ExperimentConfig) -> Vec<(&'static str, String)> {
    vec![
        ("observable", cfg.observable_spec.clone()),
        ("test function", cfg.chi_spec.clone()),
    ]
}

fn open_cache(cfg: &ExperimentConfig) -> Result<Option<Cache>, CliError> {
    cfg.cache_dir
        .as_deref()
        .map(|d| {
            Cache::open(d).map_err(|source| CliError::Output {
                path: d.display().to_string(),
                source,
            })
        })
        .transpose()
}

pub fn spectrum(cfg: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Vec<Output>, CliError> {
    let levels = cfg.levels(DEFAULT_FIT_GRID);
    let cache = open_cache(cfg)?;
    let spec = spectra(cfg, cache.as_ref(), &levels, diag)?;
    let mut lines = vec![
        ("observable", cfg.observable_spec.clone()),
        ("eigenvalue", "dimensionless, same scale as the symbol".to_string()),
    ];
    lines.extend(provenance_stable(&spec));
    let mut s = header(&lines);
    s.push_str("k,index,eigenvalue\n");
    for l in &spec {
        for (j, v) in l.data.values().iter().enumerate() {
            s.push_str(&format!("{},{j},{}\n", l.data.level().k(), num(*v)));
        }
    }
    Ok(vec![Output::to(cfg.out.as_deref(), s)])
}

pub fn local(cfg: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Vec<Output>, CliError> {
    let levels = cfg.levels(DEFAULT_FIT_GRID);
    let cache = open_cache(cfg)?;
    let spec = spectra(cfg, cache.as_ref(), &levels, diag)?;
    let mut lines = vec![
        ("observable", cfg.observable_spec.clone()),
        ("atom", "eigenvalue, dimensionless".to_string()),
        ("weight", "squared eigenfunction modulus at the point, per unit Fubini-Study area".to_string()),
    ];
    lines.extend(provenance_stable(&spec));
    let mut s = header(&lines);
    s.push_str("point,chart,coord_re,coord_im,k,index,atom,weight\n");
    for (pi, p) in cfg.points.iter().enumerate() {
        for l in &spec {
            let mu = local_measure(&l.data, &p.point);
            for (j, (a, w)) in mu.atoms.iter().zip(&mu.weights).enumerate() {
                s.push_str(&format!(
                    "{pi},{},{},{j},{},{}\n",
                    point_columns(p),
                    l.data.level().k(),
                    num(*a),
                    num(*w)
                ));
            }
        }
    }
    Ok(vec![Output::to(cfg.out.as_deref(), s)])
}

pub fn global(cfg: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Vec<Output>, CliError> {
    let levels = cfg.levels(DEFAULT_FIT_GRID);
    let cache = open_cache(cfg)?;
    let spec = spectra(cfg, cache.as_ref(), &levels, diag)?;
    let mut lines = vec![
        ("observable", cfg.observable_spec.clone()),
        ("atom", "eigenvalue, dimensionless".to_string()),
        ("weight", "multiplicity count".to_string()),
    ];
    lines.extend(provenance_stable(&spec));
    let mut s = header(&lines);
    s.push_str("k,index,atom,weight\n");
    for l in &spec {
        let mu = global_measure(&l.data);
        for (j, (a, w)) in mu.atoms.iter().zip(&mu.weights).enumerate() {
            s.push_str(&format!("{},{j},{},{}\n", l.data.level().k(), num(*a), num(*w)));
        }
    }
    Ok(vec![Output::to(cfg.out.as_deref(), s)])
}

#[derive(Debug, Serialize)]
struct FitRecord {
    coefficients: Vec<f64>,
    residual: f64,
    condition: f64,
    self_consistent: bool,
}

#[derive(Debug, Serialize)]
struct Richardson {
    c0: f64,
    c1: f64,
}

#[derive(Debug, Serialize)]
struct PointFit {
    point: PointRecord,
    symbol_value: f64,
    leading_term: f64,
    a_k: Vec<f64>,
    fit: FitRecord,
    richardson: Richardson,
}

#[derive(Debug, Serialize)]
struct FitReport {
    observable: String,
    test_function: String,
    normalization: &'static str,
    k_grid: Vec<u32>,
    fit_order: usize,
    assembly: Vec<String>,
    points: Vec<PointFit>,
}

fn fit_points(
    cfg: &ExperimentConfig,
    grid: &KGrid,
    data: &[SpectralData],
    spec: &[LevelSpectrum],
) -> Result<FitReport, CliError> {
    let points = cfg
        .points
        .iter()
        .map(|p| {
            let a = normalized_pairings(data, &p.point, &cfg.chi);
            let fit = fit_expansion(&a, grid, cfg.fit_order)?;
            let (c0, c1) = richardson_coefficients(&a, grid);
            let fval = cfg.observable.eval(&p.point);
            Ok(PointFit {
                point: p.into(),
                symbol_value: fval,
                leading_term: cfg.chi.value(fval),
                a_k: a,
                fit: FitRecord {
                    self_consistent: fit.is_self_consistent(),
                    coefficients: fit.coefficients,
                    residual: fit.residual,
                    condition: fit.condition,
                },
                richardson: Richardson { c0, c1 },
            })
        })
        .collect::<Result<Vec<_>, berezin_core::Error>>()?;
    Ok(FitReport {
        observable: cfg.observable_spec.clone(),
        test_function: cfg.chi_spec.clone(),
        normalization: "a_k = (pi/k) <T_{m,k}, chi>",
        k_grid: grid.levels().to_vec(),
        fit_order: cfg.fit_order,
        assembly: spec.iter().map(|l| format!("k={} {}", l.data.level().k(), l.provenance)).collect(),
        points,
    })
}

pub fn fit(cfg: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Vec<Output>, CliError> {
    let grid = cfg.fit_grid(DEFAULT_FIT_GRID)?;
    check_fit_order(cfg, &grid)?;
    let cache = open_cache(cfg)?;
    let spec = spectra(cfg, cache.as_ref(), grid.levels(), diag)?;
    let data: Vec<SpectralData> = spec.iter().map(|l| l.data.clone()).collect();
    let report = fit_points(cfg, &grid, &data, &spec)?;
    Ok(vec![Output::to(cfg.out.as_deref(), json(&report))])
}

fn check_fit_order(cfg: &ExperimentConfig, grid: &KGrid) -> Result<(), CliError> {
    if grid.len() < cfg.fit_order + 2 {
        return Err(CliError::validation(format!(
            "fit order {} needs at least {} levels, got {}",
            cfg.fit_order,
            cfg.fit_order + 2,
            grid.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct Check {
    name: String,
    value: f64,
    limit: f64,
    passed: bool,
}

fn check(name: impl Into<String>, value: f64, limit: f64, passed: bool, diag: &mut Diagnostics) -> Check {
    let name = name.into();
    if !passed {
        diag.violations.push(Violation {
            check: name.clone(),
            context: String::new(),
            value,
            limit,
        });
    }
    Check {
        name,
        value,
        limit,
        passed,
    }
}

#[derive(Debug, Serialize)]
struct SzegoReport {
    observable: String,
    test_function: String,
    normalization: &'static str,
    k_grid: Vec<u32>,
    target: f64,
    values: Vec<f64>,
    errors: Vec<f64>,
    ratios: Vec<f64>,
    checks: Vec<Check>,
    passed: bool,
}

pub fn verify_szego(cfg: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Vec<Output>, CliError> {
    let grid = cfg.fit_grid(DEFAULT_SZEGO_GRID)?;
    if grid.len() < 2 {
        return Err(CliError::validation("verify-szego needs at least two levels"));
    }
    let cache = open_cache(cfg)?;
    let spec = spectra(cfg, cache.as_ref(), grid.levels(), diag)?;
    let data: Vec<SpectralData> = spec.iter().map(|l| l.data.clone()).collect();
    let result = szego_from_spectra(&cfg.observable, &cfg.chi, &data);
    let errors = result.errors();
    let ratios = result.ratios();
    let tol = cfg.tolerances;
    let mut checks = Vec::new();
    for (w, r) in grid.levels().windows(2).zip(&ratios) {
        let ok = (tol.szego_ratio_min..=tol.szego_ratio_max).contains(r);
        let limit = if *r < tol.szego_ratio_min {
            tol.szego_ratio_min
        } else {
            tol.szego_ratio_max
        };
        checks.push(check(format!("error ratio k={}/k={}", w[1], w[0]), *r, limit, ok, diag));
    }
    if let Some(limit) = tol.szego_target {
        let last = *errors.last().expect("grid is non-empty");
        checks.push(check(
            format!("error at k={}", grid.levels().last().unwrap()),
            last,
            limit,
            last <= limit,
            diag,
        ));
    }
    let report = SzegoReport {
        observable: cfg.observable_spec.clone(),
        test_function: cfg.chi_spec.clone(),
        normalization: "(pi/k) <T_k, chi>",
        k_grid: grid.levels().to_vec(),
        target: result.target,
        values: result.values.clone(),
        errors,
        ratios,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    Ok(vec![Output::to(cfg.out.as_deref(), json(&report))])
}

#[derive(Debug, Serialize)]
struct LemmaReport {
    omega0: f64,
    q: f64,
    c2: f64,
    variables: [&'static str; 6],
    critical_point: [f64; 6],
    gradient_norm: f64,
    hessian_det: [f64; 2],
    expected_det: f64,
    scan_resolution: usize,
    stationary_points_found: usize,
    min_gradient_away: f64,
    exclusion_radius: f64,
    checks: Vec<Check>,
    passed: bool,
}

pub fn verify_lemma(cfg: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Vec<Output>, CliError> {
    let l = cfg.lemma;
    let p = PhaseParams::new(l.omega0, l.q, l.c2);
    let crit = critical_point(&p);
    let grad = gradient_norm(&p, &crit);
    let det = hessian_det(&p);
    let expected = -l.omega0 * l.omega0;
    let det_err = (det - expected).norm();
    let b = ScanBox::around_critical(&p);
    let found = scan_stationary(&p, &b, l.resolution);
    let stray = found
        .iter()
        .map(|c| c.refined.distance(&crit))
        .fold(0.0, f64::max);
    let away = min_gradient_away_from_critical(&p, &b, l.resolution, SEPARATION_RADIUS);
    let tol = cfg.tolerances;
    let checks = vec![
        check("gradient at critical point", grad, tol.gradient, grad <= tol.gradient, diag),
        check("hessian determinant + omega0^2", det_err, tol.det, det_err <= tol.det, diag),
        check(
            "stationary points in scan box",
            found.len() as f64,
            1.0,
            found.len() == 1 && stray < 1e-6,
            diag,
        ),
        check(
            "min gradient away from critical point",
            away,
            tol.separation,
            away > tol.separation,
            diag,
        ),
    ];
    let report = LemmaReport {
        omega0: l.omega0,
        q: l.q,
        c2: l.c2,
        variables: berezin_core::phase::VARIABLES,
        critical_point: crit.to_array(),
        gradient_norm: grad,
        hessian_det: [det.re, det.im],
        expected_det: expected,
        scan_resolution: l.resolution,
        stationary_points_found: found.len(),
        min_gradient_away: away,
        exclusion_radius: SEPARATION_RADIUS,
        passed: checks.iter().all(|c| c.passed),
        checks,
    };
    Ok(vec![Output::to(cfg.out.as_deref(), json(&report))])
}

/// The binomial oracle applies to the height function `u₃` itself.
fn has_binomial_oracle(cfg: &ExperimentConfig) -> bool {
    matches!(
        cfg.observable.class(),
        SymbolClass::LinearU { a, b } if *a == [0.0, 0.0, 1.0] && *b == 0.0
    )
}

fn oracle(cfg: &ExperimentConfig, p: &GridPoint, k: u32) -> Option<f64> {
    if !has_binomial_oracle(cfg) || k == 0 {
        return None;
    }
    binomial_oracle(k, p.point.binomial_p().0, &cfg.chi).ok()
}

pub const REPORT_PAIRINGS: &str = "pairings.csv";
pub const REPORT_FIT: &str = "fit.json";
pub const REPORT_PLOT: &str = "plot.csv";

pub fn report(cfg: &ExperimentConfig, diag: &mut Diagnostics) -> Result<Vec<Output>, CliError> {
    let Some(dir) = cfg.out.as_deref() else {
        return Err(CliError::validation("report needs --out <directory>"));
    };
    let grid = cfg.fit_grid(DEFAULT_FIT_GRID)?;
    check_fit_order(cfg, &grid)?;
    let cache = open_cache(cfg)?;
    let spec = spectra(cfg, cache.as_ref(), grid.levels(), diag)?;
    let data: Vec<SpectralData> = spec.iter().map(|l| l.data.clone()).collect();
    let fits = fit_points(cfg, &grid, &data, &spec)?;

    let mut lines = describe(cfg);
    lines.push(("a_k", "(pi/k) <T_{m,k}, chi>, dimensionless".to_string()));
    lines.push((
        "oracle",
        if has_binomial_oracle(cfg) {
            "binomial sum over the exact u3 spectrum".to_string()
        } else {
            "none for this observable".to_string()
        },
    ));
    lines.extend(provenance_stable(&spec));
    let mut pairings = header(&lines);
    pairings.push_str("point,chart,coord_re,coord_im,k,a_k,oracle,difference\n");
    let mut plot = header(&[
        ("observable", cfg.observable_spec.clone()),
        ("test function", cfg.chi_spec.clone()),
        ("x", "1/k".to_string()),
        ("y", "a_k, dimensionless".to_string()),
    ]);
    plot.push_str("point,inv_k,a_k\n");
    for (pi, (p, pf)) in cfg.points.iter().zip(&fits.points).enumerate() {
        for (&k, &a) in grid.levels().iter().zip(&pf.a_k) {
            let (o, d) = match oracle(cfg, p, k) {
                Some(o) => {
                    let d = a - o;
                    if d.abs() > cfg.tolerances.oracle {
                        diag.violations.push(Violation {
                            check: "pipeline vs oracle".into(),
                            context: format!("point {pi}, k = {k}"),
                            value: d.abs(),
                            limit: cfg.tolerances.oracle,
                        });
                    }
                    (num(o), num(d))
                }
                None => (String::new(), String::new()),
            };
            pairings.push_str(&format!("{pi},{},{k},{},{o},{d}\n", point_columns(p), num(a)));
            plot.push_str(&format!("{pi},{},{}\n", num(1.0 / f64::from(k)), num(a)));
        }
    }
    Ok(vec![
        Output::to(Some(&dir.join(REPORT_PAIRINGS)), pairings),
        Output::to(Some(&dir.join(REPORT_FIT)), json(&fits)),
        Output::to(Some(&dir.join(REPORT_PLOT)), plot),
    ])
}

/// Path of the violation record written next to the outputs.
pub fn violation_path(out: &Path, is_dir: bool) -> std::path::PathBuf {
    if is_dir {
        out.join("violations.json")
    } else {
        let mut name = out.file_name().unwrap_or_default().to_os_string();
        name.push(".violations.json");
        out.with_file_name(name)
    }
}
