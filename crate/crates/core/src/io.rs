//! Text formats: the graph interchange format and family config files.
//!
//! Graph files are line oriented. `#` starts a comment.
//!
//! ```text
//! graph <n>
//! mu <x> <value>          # one line per vertex
//! edge <x> <y> <w>        # unordered, each pair once
//! frontier <x>            # optional: truncation frontier
//! leak <x> <mass> <k>     # optional: k dropped edges of total weight mass at x
//! ```
//!
//! Values are written with 17 significant digits, which round-trips every
//! `f64` exactly.
//!
//! Family configs are TOML:
//!
//! ```toml
//! family = "ex5.6"
//! [params]
//! alpha = 1.0
//! case = 2
//! ```
//!
//! `family = "explicit"` with `graph = "<path>"` wraps a graph file; relative
//! paths resolve against the config's directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphBuilder, WeightedGraph};

pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_graph(g: &WeightedGraph) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "graph {}", g.len());
    for x in 0..g.len() {
        let _ = writeln!(s, "mu {x} {}", format_f64(g.measure(x)));
    }
    for (x, y, w) in g.edges() {
        let _ = writeln!(s, "edge {x} {y} {}", format_f64(w));
    }
    for &x in g.frontier().iter() {
        let _ = writeln!(s, "frontier {x}");
    }
    for x in 0..g.len() {
        if g.leak_edges(x) > 0 {
            let _ = writeln!(s, "leak {x} {} {}", format_f64(g.leak(x)), g.leak_edges(x));
        }
    }
    s
}

fn field<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line,
        detail: format!("missing {what}"),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line,
        detail: format!("bad {what} `{tok}`"),
    })
}

pub fn parse_graph(text: &str) -> Result<WeightedGraph> {
    let mut builder: Option<GraphBuilder> = None;
    let mut n = 0usize;
    let mut seen_mu = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut toks = content.split_whitespace();
        let key = toks.next().unwrap_or_default();
        if key == "graph" {
            if builder.is_some() {
                return Err(Error::Parse {
                    line,
                    detail: "duplicate `graph` header".into(),
                });
            }
            n = field(toks.next(), line, "vertex count")?;
            builder = Some(GraphBuilder::new(n));
            seen_mu = vec![false; n];
        } else {
            let b = builder.as_mut().ok_or_else(|| Error::Parse {
                line,
                detail: "expected `graph <n>` header first".into(),
            })?;
            let vertex = |tok: Option<&str>| -> Result<usize> {
                let x: usize = field(tok, line, "vertex id")?;
                if x >= n {
                    return Err(Error::Parse {
                        line,
                        detail: format!("vertex {x} out of range 0..{n}"),
                    });
                }
                Ok(x)
            };
            match key {
                "mu" => {
                    let x = vertex(toks.next())?;
                    if std::mem::replace(&mut seen_mu[x], true) {
                        return Err(Error::Parse {
                            line,
                            detail: format!("duplicate measure for vertex {x}"),
                        });
                    }
                    b.measure(x, field(toks.next(), line, "measure")?);
                }
                "edge" => {
                    let x = vertex(toks.next())?;
                    let y = vertex(toks.next())?;
                    b.edge(x, y, field(toks.next(), line, "weight")?);
                }
                "frontier" => {
                    b.frontier(vertex(toks.next())?);
                }
                "leak" => {
                    let x = vertex(toks.next())?;
                    let mass = field(toks.next(), line, "leak mass")?;
                    b.leak_many(x, mass, field(toks.next(), line, "leak edge count")?);
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        detail: format!("unknown record `{other}`"),
                    });
                }
            }
            if let Some(extra) = toks.next() {
                return Err(Error::Parse {
                    line,
                    detail: format!("trailing token `{extra}`"),
                });
            }
        }
    }
    let b = builder.ok_or_else(|| Error::Parse {
        line: 0,
        detail: "empty graph file".into(),
    })?;
    if let Some(x) = seen_mu.iter().position(|&s| !s) {
        return Err(Error::Parse {
            line: 0,
            detail: format!("no measure given for vertex {x}"),
        });
    }
    b.build()
}

pub fn read_graph(path: &Path) -> Result<WeightedGraph> {
    parse_graph(&fs::read_to_string(path)?)
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<PathBuf>,
}

impl FamilyConfig {
    pub fn named(family: impl Into<String>) -> Self {
        FamilyConfig {
            family: family.into(),
            params: BTreeMap::new(),
            graph: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            line: e
                .span()
                .map_or(0, |s| text[..s.start].lines().count().max(1)),
            detail: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::parse(&fs::read_to_string(path)?)?;
        if let (Some(g), Some(dir)) = (&cfg.graph, path.parent()) {
            if g.is_relative() {
                cfg.graph = Some(dir.join(g));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
