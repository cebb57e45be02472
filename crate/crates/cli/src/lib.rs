//! Experiment runner for the `berezin` binary: configuration, cached
//! spectra, and CSV/JSON reports.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, Origin, RawConfig, CACHE_ENV};
use crate::error::CliError;
use crate::pipeline::Diagnostics;
use crate::report::{json, Output};

#[derive(Debug, Parser)]
#[command(name = "berezin", version, about = "Spectral measures of Toeplitz operators on the sphere")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Eigenvalues of the Toeplitz matrix at each level.
    Spectrum(Options),
    /// Atoms and weights of the local spectral measure at each point.
    LocalMeasure(Options),
    /// Atoms of the global spectral measure.
    GlobalMeasure(Options),
    /// Fit the normalized pairings in powers of 1/k.
    Fit(Options),
    /// Check the convergence rate of the global pairings.
    VerifySzego(Options),
    /// Check the stationary point and Hessian of the model phase.
    VerifyLemma(Options),
    /// Per-level pairings against the oracle, fit JSON and plot data.
    Report(Options),
}

#[derive(Debug, Args)]
struct Options {
    /// Flat `key = value` file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// u1 | u2 | u3 | const:c | linear:a1,a2,a3,b | poly:coef@p1,p2,p3;...
    #[arg(long)]
    observable: Option<String>,
    /// gaussian:a,s | hermite:a,s,c0,c1,... | bump:lo,hi | poly:c0,c1,...
    #[arg(long)]
    chi: Option<String>,
    /// One point: z=re[,im] | w=re[,im] | angles=theta,phi | south | north
    #[arg(long, conflicts_with = "points")]
    point: Option<String>,
    /// `;`-separated points or latitudes:n,m
    #[arg(long)]
    points: Option<String>,
    /// A single level.
    #[arg(long, conflicts_with = "k_grid")]
    k: Option<String>,
    /// Strictly increasing levels: 32,48,64 or 32..256:32
    #[arg(long = "k-grid")]
    k_grid: Option<String>,
    #[arg(long = "fit-order")]
    fit_order: Option<String>,
    /// Defaults to $BEREZIN_CACHE_DIR.
    #[arg(long = "cache-dir")]
    cache_dir: Option<PathBuf>,
    /// Output file, or directory for `report`. Standard output otherwise.
    #[arg(long)]
    out: Option<PathBuf>,
    /// auto | closed | quadrature
    #[arg(long)]
    assembly: Option<String>,
    /// Quadrature orders `radial,angular`.
    #[arg(long)]
    quadrature: Option<String>,
    /// name=value, repeatable.
    #[arg(long = "tolerance")]
    tolerance: Vec<String>,
    #[arg(long)]
    omega0: Option<String>,
    #[arg(long)]
    q: Option<String>,
    #[arg(long)]
    c2: Option<String>,
    #[arg(long = "scan-resolution")]
    scan_resolution: Option<String>,
}

impl Options {
    fn into_config(self) -> Result<ExperimentConfig, CliError> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::parse_file(path)?,
            None => RawConfig::default(),
        };
        if raw.get("cache_dir").is_none() {
            if let Some(dir) = std::env::var_os(CACHE_ENV).filter(|d| !d.is_empty()) {
                raw.set("cache_dir", dir.to_string_lossy(), Origin::Environment(CACHE_ENV))?;
            }
        }
        let cl = Origin::CommandLine;
        let path = |p: PathBuf| p.to_string_lossy().into_owned();
        let pairs = [
            ("observable", self.observable),
            ("chi", self.chi),
            ("points", self.point.or(self.points)),
            ("k_grid", self.k.or(self.k_grid)),
            ("fit_order", self.fit_order),
            ("cache_dir", self.cache_dir.map(path)),
            ("out", self.out.map(path)),
            ("assembly", self.assembly),
            ("quadrature", self.quadrature),
            ("omega0", self.omega0),
            ("q", self.q),
            ("c2", self.c2),
            ("scan_resolution", self.scan_resolution),
        ];
        for (key, value) in pairs {
            if let Some(v) = value {
                raw.set(key, v, cl.clone())?;
            }
        }
        for t in self.tolerance {
            let Some((name, value)) = t.split_once('=') else {
                return Err(CliError::Field {
                    origin: cl,
                    field: "--tolerance".into(),
                    reason: format!("expected name=value, got `{t}`"),
                });
            };
            raw.set(&format!("tolerance.{}", name.trim()), value.trim(), cl.clone())?;
        }
        ExperimentConfig::from_raw(&raw)
    }
}

fn execute(command: Command, diag: &mut Diagnostics) -> Result<(Vec<Output>, Option<(PathBuf, bool)>), CliError> {
    let is_report = matches!(command, Command::Report(_));
    let (opts, run): (Options, fn(&ExperimentConfig, &mut Diagnostics) -> Result<Vec<Output>, CliError>) =
        match command {
            Command::Spectrum(o) => (o, commands::spectrum),
            Command::LocalMeasure(o) => (o, commands::local),
            Command::GlobalMeasure(o) => (o, commands::global),
            Command::Fit(o) => (o, commands::fit),
            Command::VerifySzego(o) => (o, commands::verify_szego),
            Command::VerifyLemma(o) => (o, commands::verify_lemma),
            Command::Report(o) => (o, commands::report),
        };
    let cfg = opts.into_config()?;
    let outputs = run(&cfg, diag)?;
    Ok((outputs, cfg.out.map(|o| (o, is_report))))
}

/// Runs the command line `args` (program name first) and returns the exit
/// code: 0 success, 2 invalid input or output path, 3 numerical contract
/// violated.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let mut diag = Diagnostics::default();
    let result = execute(cli.command, &mut diag).and_then(|(outputs, out)| {
        report::write_all(&outputs)?;
        Ok(out)
    });
    for w in &diag.warnings {
        eprintln!("warning: {w}");
    }
    match result {
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
        Ok(out) if !diag.violations.is_empty() => {
            if let Some((path, is_dir)) = out {
                let record = Output::to(
                    Some(&commands::violation_path(&path, is_dir)),
                    json(&serde_json::json!({ "violations": diag.violations })),
                );
                if let Err(e) = report::write_all(&[record]) {
                    eprintln!("error: {e}");
                }
            }
        }
        Ok(_) => return 0,
    }
    eprint!("{}", json(&serde_json::json!({ "violations": diag.violations })));
    3
}
