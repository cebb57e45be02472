//! Spectra per level, through the cache when one is configured.

use berezin_core::{
    assemble_closed, assemble_quadrature, eigh, Level, Observable, QuadratureScheme, SpectralData, SymbolClass,
};
use rayon::prelude::*;

use crate::cache::{Cache, CacheEntry, CacheKey, Lookup};
use crate::config::{AssemblyPath, ExperimentConfig};
use crate::error::{CliError, Violation};

/// Default bandwidth for the quadrature scheme when the symbol does not
/// report one.
const FALLBACK_BANDWIDTH: u32 = 16;

#[derive(Debug, Clone)]
pub struct LevelSpectrum {
    pub data: SpectralData,
    pub provenance: String,
    pub cache_hit: bool,
}

/// Everything a run produced besides its output files.
#[derive(Debug, Default)]
pub struct Diagnostics {
    pub warnings: Vec<String>,
    pub violations: Vec<Violation>,
}

enum Route {
    Closed,
    Quadrature(QuadratureScheme),
}

fn route(f: &Observable, k: u32, path: AssemblyPath) -> Route {
    let default_scheme =
        || QuadratureScheme::for_level(k, f.bandwidth().unwrap_or(FALLBACK_BANDWIDTH));
    match path {
        AssemblyPath::Closed => Route::Closed,
        AssemblyPath::Auto => match f.class() {
            SymbolClass::General(_) => Route::Quadrature(default_scheme()),
            _ => Route::Closed,
        },
        AssemblyPath::Quadrature(Some((r, a))) => Route::Quadrature(QuadratureScheme::new(r, a)),
        AssemblyPath::Quadrature(None) => Route::Quadrature(default_scheme()),
    }
}

fn key_for(f: &Observable, k: u32, route: &Route) -> Option<CacheKey> {
    let descriptor = f.descriptor()?;
    Some(match route {
        Route::Closed => CacheKey::new(&descriptor, k, "closed", "-"),
        Route::Quadrature(q) => CacheKey::new(
            &descriptor,
            k,
            "quadrature",
            &format!("{},{}", q.radial_order(), q.angular_nodes()),
        ),
    })
}

struct Computed {
    level: LevelSpectrum,
    store: Option<(CacheKey, CacheEntry)>,
    warnings: Vec<String>,
    violation: Option<Violation>,
}

fn compute(cfg: &ExperimentConfig, cache: Option<&Cache>, k: u32) -> Result<Computed, CliError> {
    let f = &cfg.observable;
    let route = route(f, k, cfg.assembly);
    let key = key_for(f, k, &route);
    let mut warnings = Vec::new();
    if let (Some(cache), Some(key)) = (cache, &key) {
        match cache.lookup(key) {
            Lookup::Hit(e) if e.k == k => {
                return Ok(Computed {
                    level: LevelSpectrum {
                        data: SpectralData::from_parts(Level(k), e.values, e.vectors),
                        provenance: e.provenance,
                        cache_hit: true,
                    },
                    store: None,
                    warnings,
                    violation: None,
                });
            }
            Lookup::Hit(e) => warnings.push(format!(
                "cache entry {} holds level {} instead of {k}; recomputing",
                key.as_str(),
                e.k
            )),
            Lookup::Corrupt(reason) => warnings.push(format!("ignoring cache entry {reason}")),
            Lookup::Miss => {}
        }
    }

    let t = match &route {
        Route::Closed => assemble_closed(Level(k), f),
        Route::Quadrature(q) => assemble_quadrature(Level(k), f, q),
    }
    .map_err(|e| CliError::Numerical(at_level(e, k)))?;
    if let berezin_core::Provenance::Quadrature {
        warning: Some(w), ..
    } = t.provenance()
    {
        warnings.push(format!("k = {k}: {w}"));
    }
    let data = eigh(&t).map_err(|e| CliError::Numerical(at_level(e, k)))?;
    let residual = data.residual(&t);
    let limit = cfg.tolerances.residual * t.max_abs().max(1.0);
    let violation = (residual > limit).then(|| Violation {
        check: "eigen-residual".into(),
        context: format!("k = {k}"),
        value: residual,
        limit,
    });
    let provenance = t.provenance().tag();
    let store = match (cache, key) {
        (Some(_), Some(key)) if violation.is_none() => Some((
            key,
            CacheEntry {
                k,
                provenance: provenance.clone(),
                values: data.values().to_vec(),
                vectors: data.vectors().clone(),
            },
        )),
        _ => None,
    };
    Ok(Computed {
        level: LevelSpectrum {
            data,
            provenance,
            cache_hit: false,
        },
        store,
        warnings,
        violation,
    })
}

fn at_level(e: berezin_core::Error, k: u32) -> berezin_core::Error {
    match e {
        e @ berezin_core::Error::AtLevel { .. } => e,
        e => berezin_core::Error::AtLevel {
            k,
            source: Box::new(e),
        },
    }
}

/// Spectra for every level, computed in parallel. Cache writes happen
/// afterwards on the calling thread.
pub fn spectra(
    cfg: &ExperimentConfig,
    cache: Option<&Cache>,
    levels: &[u32],
    diag: &mut Diagnostics,
) -> Result<Vec<LevelSpectrum>, CliError> {
    let computed: Vec<Computed> = levels
        .par_iter()
        .map(|&k| compute(cfg, cache, k))
        .collect::<Result<_, _>>()?;
    let mut out = Vec::with_capacity(computed.len());
    for c in computed {
        diag.warnings.extend(c.warnings);
        diag.violations.extend(c.violation);
        if let (Some(cache), Some((key, entry))) = (cache, c.store) {
            if let Err(e) = cache.store(&key, &entry) {
                diag.warnings.push(format!("could not write cache entry {}: {e}", key.as_str()));
            }
        }
        out.push(c.level);
    }
    Ok(out)
}
