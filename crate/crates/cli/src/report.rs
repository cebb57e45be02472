//! Text renderings of results. Everything here is a pure function of its
//! inputs so identical runs give identical bytes.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::GridPoint;
use crate::error::CliError;

/// Round-trippable fixed-width float: 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// `# key: value` header lines.
pub fn header(lines: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in lines {
        writeln!(s, "# {k}: {v}").unwrap();
    }
    s
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

/// Chart and coordinate columns of a grid point.
pub fn point_columns(p: &GridPoint) -> String {
    let chart = match p.point.chart() {
        berezin_core::Chart::South => "south",
        berezin_core::Chart::North => "north",
    };
    let c = p.point.coordinate();
    format!("{chart},{},{}", num(c.re), num(c.im))
}

#[derive(Debug, Clone, Serialize)]
pub struct PointRecord {
    pub label: String,
    pub chart: &'static str,
    pub coordinate: [f64; 2],
}

impl From<&GridPoint> for PointRecord {
    fn from(p: &GridPoint) -> Self {
        let c = p.point.coordinate();
        PointRecord {
            label: p.label.clone(),
            chart: match p.point.chart() {
                berezin_core::Chart::South => "south",
                berezin_core::Chart::North => "north",
            },
            coordinate: [c.re, c.im],
        }
    }
}

/// Destination of one rendered output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sink {
    Stdout,
    File(PathBuf),
}

#[derive(Debug, Clone)]
pub struct Output {
    pub sink: Sink,
    pub contents: String,
}

impl Output {
    pub fn to(out: Option<&Path>, contents: String) -> Self {
        Output {
            sink: out.map_or(Sink::Stdout, |p| Sink::File(p.to_path_buf())),
            contents,
        }
    }
}

/// The single writer for all outputs of a run.
pub fn write_all(outputs: &[Output]) -> Result<(), CliError> {
    use std::io::Write as _;
    for o in outputs {
        match &o.sink {
            Sink::Stdout => {
                let mut out = std::io::stdout().lock();
                out.write_all(o.contents.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|source| CliError::Output {
                        path: "<stdout>".into(),
                        source,
                    })?;
            }
            Sink::File(path) => {
                if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                    std::fs::create_dir_all(parent).map_err(|source| CliError::Output {
                        path: parent.display().to_string(),
                        source,
                    })?;
                }
                std::fs::write(path, &o.contents).map_err(|source| CliError::Output {
                    path: path.display().to_string(),
                    source,
                })?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, -0.0] {
            let s = num(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(num(-0.5), "-5.0000000000000000e-1");
    }

    #[test]
    fn header_lines() {
        assert_eq!(header(&[("a", "1".into()), ("b", "x y".into())]), "# a: 1\n# b: x y\n");
    }
}
