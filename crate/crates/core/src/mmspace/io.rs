//! Space files, path-graph files and generator specs.
//!
//! Space file:
//! ```text
//! mms v1 <n>
//! P <index> <measure>
//! E <i> <j> <length>
//! ```
//! Path-graph file: one positive edge length per line; point `i` joins `i + 1`.
//! Lines starting with `#` are comments in both formats.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FiniteSpace;

/// Description of a space to build.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpaceSpec {
    Interval {
        length: f64,
        n: usize,
        /// Overrides the default total mass (`length`).
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
    },
    Circle {
        length: f64,
        n: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
    },
    PathFile {
        path: PathBuf,
        /// Total mass spread uniformly; defaults to the total length.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_mass: Option<f64>,
    },
    EdgeFile {
        path: PathBuf,
    },
}

impl SpaceSpec {
    pub fn interval(length: f64, n: usize) -> Self {
        Self::Interval { length, n, total_mass: None }
    }

    pub fn circle(length: f64, n: usize) -> Self {
        Self::Circle { length, n, total_mass: None }
    }

    /// File this spec reads, if any.
    pub fn file(&self) -> Option<&Path> {
        match self {
            Self::PathFile { path, .. } | Self::EdgeFile { path } => Some(path),
            _ => None,
        }
    }

    /// Resolve relative file paths against `base`.
    pub fn rebase(&mut self, base: &Path) {
        if let Self::PathFile { path, .. } | Self::EdgeFile { path } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }
}

/// Accepts `interval:<L>:<n>`, `circle:<L>:<n>`, `path:<file>` and `file:<file>`.
impl FromStr for SpaceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognized space spec `{s}`"));
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let generator = |rest: &str| -> Result<(f64, usize)> {
            let (l, n) = rest.split_once(':').ok_or_else(bad)?;
            Ok((l.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
        };
        match kind {
            "interval" => generator(rest).map(|(l, n)| Self::interval(l, n)),
            "circle" => generator(rest).map(|(l, n)| Self::circle(l, n)),
            "path" => Ok(Self::PathFile { path: rest.into(), total_mass: None }),
            "file" => Ok(Self::EdgeFile { path: rest.into() }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for SpaceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Interval { length, n, .. } => write!(f, "interval:{length}:{n}"),
            Self::Circle { length, n, .. } => write!(f, "circle:{length}:{n}"),
            Self::PathFile { path, .. } => write!(f, "path:{}", path.display()),
            Self::EdgeFile { path } => write!(f, "file:{}", path.display()),
        }
    }
}

pub fn build_space(spec: &SpaceSpec) -> Result<FiniteSpace> {
    let scaled = |space: FiniteSpace, total: Option<f64>| match total {
        Some(t) => {
            let c = t / space.total_mass();
            space.rescale(1.0, c)
        }
        None => Ok(space),
    };
    match spec {
        SpaceSpec::Interval { length, n, total_mass } => scaled(FiniteSpace::interval(*length, *n)?, *total_mass),
        SpaceSpec::Circle { length, n, total_mass } => scaled(FiniteSpace::circle(*length, *n)?, *total_mass),
        SpaceSpec::PathFile { path, total_mass } => {
            let lengths = read_path_file(BufReader::new(File::open(path)?))?;
            let space = path_graph(&lengths)?;
            scaled(space, *total_mass)
        }
        SpaceSpec::EdgeFile { path } => read_space(BufReader::new(File::open(path)?)),
    }
}

/// Path graph with the given edge lengths and uniform mass `total length / n`.
pub fn path_graph(lengths: &[f64]) -> Result<FiniteSpace> {
    let n = lengths.len() + 1;
    let total: f64 = lengths.iter().sum();
    let edges: Vec<_> = lengths.iter().enumerate().map(|(i, &l)| (i, i + 1, l)).collect();
    FiniteSpace::from_edges(vec![total / n as f64; n], &edges)
}

fn content_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input.lines().enumerate().filter_map(|(i, line)| match line {
        Err(e) => Some(Err(e.into())),
        Ok(line) => {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                None
            } else {
                Some(Ok((i + 1, t.to_string())))
            }
        }
    })
}

pub fn read_path_file<R: BufRead>(input: R) -> Result<Vec<f64>> {
    let mut lengths = Vec::new();
    for item in content_lines(input) {
        let (line, text) = item?;
        let l: f64 = text.parse().map_err(|e| Error::Parse { line, msg: format!("bad edge length `{text}`: {e}") })?;
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::Parse { line, msg: format!("edge length {l} must be positive") });
        }
        lengths.push(l);
    }
    Ok(lengths)
}

pub fn read_space<R: BufRead>(input: R) -> Result<FiniteSpace> {
    let mut n: Option<usize> = None;
    let mut measure: Vec<Option<f64>> = Vec::new();
    let mut edges = Vec::new();
    let mut last_line = 0;
    for item in content_lines(input) {
        let (line, text) = item?;
        last_line = line;
        let err = |msg: String| Error::Parse { line, msg };
        let tok: Vec<&str> = text.split_whitespace().collect();
        let Some(count) = n else {
            match tok.as_slice() {
                ["mms", "v1", count] => {
                    let count: usize = count.parse().map_err(|_| err(format!("bad point count `{count}`")))?;
                    n = Some(count);
                    measure = vec![None; count];
                    continue;
                }
                _ => return Err(err("expected header `mms v1 <n>`".into())),
            }
        };
        let index = |s: &str| -> Result<usize> {
            let i: usize = s.parse().map_err(|_| err(format!("bad index `{s}`")))?;
            if i >= count {
                return Err(err(format!("index {i} out of range for {count} points")));
            }
            Ok(i)
        };
        let number = |s: &str| -> Result<f64> { s.parse().map_err(|_| err(format!("bad number `{s}`"))) };
        match tok.as_slice() {
            ["P", i, m] => {
                let (i, m) = (index(i)?, number(m)?);
                if !(m.is_finite() && m > 0.0) {
                    return Err(err(format!("measure {m} must be positive")));
                }
                if measure[i].replace(m).is_some() {
                    return Err(err(format!("point {i} listed twice")));
                }
            }
            ["E", i, j, l] => {
                let (i, j, l) = (index(i)?, index(j)?, number(l)?);
                if !(l.is_finite() && l > 0.0) {
                    return Err(err(format!("edge length {l} must be positive")));
                }
                if i == j {
                    return Err(err(format!("self-loop at point {i}")));
                }
                edges.push((i, j, l));
            }
            _ => return Err(err(format!("unrecognized line `{text}`"))),
        }
    }
    if n.is_none() {
        return Err(Error::Parse { line: last_line + 1, msg: "missing header".into() });
    }
    let measure = measure
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| Error::Parse { line: last_line + 1, msg: format!("point {i} has no P line") }))
        .collect::<Result<Vec<_>>>()?;
    FiniteSpace::from_edges(measure, &edges)
}

pub fn write_space<W: Write>(space: &FiniteSpace, mut out: W) -> Result<()> {
    writeln!(out, "mms v1 {}", space.len())?;
    for (i, m) in space.measure().iter().enumerate() {
        writeln!(out, "P {i} {m}")?;
    }
    for (i, j, l) in space.edges() {
        writeln!(out, "E {i} {j} {l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let s = FiniteSpace::circle(1.0, 6).unwrap();
        let mut buf = Vec::new();
        write_space(&s, &mut buf).unwrap();
        let back = read_space(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 6);
        assert_eq!(back.measure(), s.measure());
        assert_eq!(back.edges().collect::<Vec<_>>(), s.edges().collect::<Vec<_>>());
    }

    #[test]
    fn negative_edge_reports_line() {
        let text = "mms v1 2\n# masses\nP 0 1\nP 1 1\nE 0 1 -0.5\n";
        match read_space(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_header_and_points() {
        assert!(matches!(read_space("P 0 1\n".as_bytes()), Err(Error::Parse { line: 1, .. })));
        assert!(read_space("mms v1 2\nP 0 1\nE 0 1 1\n".as_bytes()).is_err());
        assert!(matches!(
            read_space("mms v1 3\nP 0 1\nP 1 1\nP 2 1\nE 0 1 1\n".as_bytes()),
            Err(Error::Disconnected(2))
        ));
    }

    #[test]
    fn path_file() {
        let lengths = read_path_file("# lengths\n0.5\n1.5\n".as_bytes()).unwrap();
        let s = path_graph(&lengths).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.distance(0, 2), 2.0);
        assert!((s.total_mass() - 2.0).abs() < 1e-12);
        assert!(matches!(read_path_file("1\n0\n".as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn spec_strings() {
        let s: SpaceSpec = "interval:1:5".parse().unwrap();
        assert_eq!(s, SpaceSpec::interval(1.0, 5));
        assert_eq!(s.to_string(), "interval:1:5");
        assert!("disk:1:5".parse::<SpaceSpec>().is_err());
        let built = build_space(&"circle:2:8".parse().unwrap()).unwrap();
        assert_eq!(built.len(), 8);
    }

    #[test]
    fn spec_json() {
        let s: SpaceSpec = serde_json::from_str(r#"{"type":"interval","length":1,"n":5,"total_mass":2}"#).unwrap();
        let built = build_space(&s).unwrap();
        assert!((built.total_mass() - 2.0).abs() < 1e-12);
    }
}
