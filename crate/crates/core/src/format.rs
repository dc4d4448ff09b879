//! Snapshot text format, version `simlb-snapshot v1`.
//!
//! Layout (whitespace separated, `#` starts a comment, blank lines ignored):
//!
//! ```text
//! simlb-snapshot v1
//! H <node_count> <threads_per_node> <coord_dims> <periodic>
//! O <id> <node> <thread> <load> [x y ...]
//! E <a> <b> <bytes>
//! ```
//!
//! `<periodic>` is `-` when no boundary metadata is recorded, otherwise one
//! `0`/`1` character per coordinate dimension. Object ids in a file may be
//! sparse; the loader remaps them to dense `0..n-1` in ascending order and
//! reports the mapping so callers can persist it as a sidecar.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::{CommEdge, ObjectInfo, WorkloadSnapshot};

pub const SNAPSHOT_HEADER: &str = "simlb-snapshot v1";

/// A parsed snapshot plus the sparse-to-dense id mapping, when one was needed.
#[derive(Debug, Clone)]
pub struct LoadedSnapshot {
    pub snapshot: WorkloadSnapshot,
    /// `original_ids[dense_id]` = id used in the file; `None` when ids were
    /// already dense.
    pub original_ids: Option<Vec<u64>>,
}

pub fn load_snapshot(path: &Path) -> Result<WorkloadSnapshot> {
    Ok(load_snapshot_with_map(path)?.snapshot)
}

pub fn load_snapshot_with_map(path: &Path) -> Result<LoadedSnapshot> {
    let text = std::fs::read_to_string(path)?;
    parse_snapshot(&text)
}

pub fn save_snapshot(s: &WorkloadSnapshot, path: &Path) -> Result<()> {
    std::fs::write(path, render_snapshot(s))?;
    Ok(())
}

struct RawObject {
    id: u64,
    node: usize,
    thread: usize,
    load: f64,
    coords: Vec<f64>,
}

struct RawEdge {
    a: u64,
    b: u64,
    bytes: f64,
    line: usize,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn parse_field<T: std::str::FromStr>(tok: &str, line: usize, field: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, format!("cannot parse {field} from {tok:?}")))
}

pub fn parse_snapshot(text: &str) -> Result<LoadedSnapshot> {
    let mut header: Option<(usize, usize, usize, Option<Vec<bool>>)> = None;
    let mut saw_version = false;
    let mut objects: Vec<RawObject> = Vec::new();
    let mut edges: Vec<RawEdge> = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if !saw_version {
            if line != SNAPSHOT_HEADER {
                return Err(parse_err(
                    line_no,
                    format!("expected version header {SNAPSHOT_HEADER:?}, found {line:?}"),
                ));
            }
            saw_version = true;
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            "H" => {
                if header.is_some() {
                    return Err(parse_err(line_no, "duplicate H record"));
                }
                if tokens.len() != 5 {
                    return Err(parse_err(
                        line_no,
                        "H record needs node_count threads_per_node coord_dims periodic",
                    ));
                }
                let node_count = parse_field(tokens[1], line_no, "node_count")?;
                let threads = parse_field(tokens[2], line_no, "threads_per_node")?;
                let coord_dims: usize = parse_field(tokens[3], line_no, "coord_dims")?;
                let periodic = match tokens[4] {
                    "-" => None,
                    flags => {
                        let parsed: Option<Vec<bool>> = flags
                            .chars()
                            .map(|c| match c {
                                '0' => Some(false),
                                '1' => Some(true),
                                _ => None,
                            })
                            .collect();
                        let parsed = parsed.ok_or_else(|| {
                            parse_err(line_no, format!("bad periodic flags {flags:?}"))
                        })?;
                        if coord_dims != 0 && parsed.len() != coord_dims {
                            return Err(parse_err(
                                line_no,
                                format!(
                                    "periodic flags {flags:?} do not match coord_dims {coord_dims}"
                                ),
                            ));
                        }
                        Some(parsed)
                    }
                };
                header = Some((node_count, threads, coord_dims, periodic));
            }
            "O" => {
                let (_, _, coord_dims, _) = header
                    .as_ref()
                    .ok_or_else(|| parse_err(line_no, "O record before H record"))?;
                let expected = 5 + coord_dims;
                if tokens.len() != expected {
                    return Err(parse_err(
                        line_no,
                        format!(
                            "O record needs {expected} fields (id node thread load{}), found {}",
                            if *coord_dims > 0 { " coords" } else { "" },
                            tokens.len()
                        ),
                    ));
                }
                let coords = tokens[5..]
                    .iter()
                    .map(|t| parse_field(t, line_no, "coordinate"))
                    .collect::<Result<Vec<f64>>>()?;
                objects.push(RawObject {
                    id: parse_field(tokens[1], line_no, "object id")?,
                    node: parse_field(tokens[2], line_no, "home_node")?,
                    thread: parse_field(tokens[3], line_no, "home_thread")?,
                    load: parse_field(tokens[4], line_no, "load")?,
                    coords,
                });
            }
            "E" => {
                if header.is_none() {
                    return Err(parse_err(line_no, "E record before H record"));
                }
                if tokens.len() != 4 {
                    return Err(parse_err(line_no, "E record needs a b bytes"));
                }
                edges.push(RawEdge {
                    a: parse_field(tokens[1], line_no, "edge endpoint")?,
                    b: parse_field(tokens[2], line_no, "edge endpoint")?,
                    bytes: parse_field(tokens[3], line_no, "bytes")?,
                    line: line_no,
                });
            }
            other => {
                return Err(parse_err(line_no, format!("unknown record type {other:?}")));
            }
        }
    }

    if !saw_version {
        return Err(parse_err(1, format!("missing {SNAPSHOT_HEADER:?} header")));
    }
    let (node_count, threads_per_node, coord_dims, periodic_dims) =
        header.ok_or_else(|| parse_err(1, "missing H record"))?;

    // Canonicalize: dense ids assigned in ascending original-id order.
    let mut sorted_ids: Vec<u64> = objects.iter().map(|o| o.id).collect();
    sorted_ids.sort_unstable();
    if sorted_ids.windows(2).any(|w| w[0] == w[1]) {
        let dup = sorted_ids
            .windows(2)
            .find(|w| w[0] == w[1])
            .map(|w| w[0])
            .unwrap();
        return Err(Error::Invariant(format!("duplicate object id {dup}")));
    }
    let dense_map: std::collections::BTreeMap<u64, usize> = sorted_ids
        .iter()
        .enumerate()
        .map(|(dense, &orig)| (orig, dense))
        .collect();
    let already_dense = sorted_ids
        .iter()
        .enumerate()
        .all(|(i, &orig)| orig == i as u64);

    let mut canonical: Vec<Option<ObjectInfo>> = vec![None; objects.len()];
    for raw in objects {
        let dense = dense_map[&raw.id];
        canonical[dense] = Some(ObjectInfo {
            id: dense,
            home_node: raw.node,
            home_thread: raw.thread,
            load: raw.load,
            coords: raw.coords,
        });
    }
    let canonical: Vec<ObjectInfo> = canonical.into_iter().map(|o| o.unwrap()).collect();

    let mut canonical_edges = Vec::with_capacity(edges.len());
    for raw in edges {
        let a = *dense_map.get(&raw.a).ok_or_else(|| {
            parse_err(
                raw.line,
                format!("edge references unknown object id {}", raw.a),
            )
        })?;
        let b = *dense_map.get(&raw.b).ok_or_else(|| {
            parse_err(
                raw.line,
                format!("edge references unknown object id {}", raw.b),
            )
        })?;
        canonical_edges.push(CommEdge {
            a: a.min(b),
            b: a.max(b),
            bytes: raw.bytes,
        });
    }
    canonical_edges.sort_by_key(|e| (e.a, e.b));

    let snapshot = WorkloadSnapshot {
        node_count,
        threads_per_node,
        coord_dims,
        objects: canonical,
        edges: canonical_edges,
        periodic_dims,
    };
    snapshot.validate()?;
    Ok(LoadedSnapshot {
        snapshot,
        original_ids: if already_dense { None } else { Some(sorted_ids) },
    })
}

/// Deterministic text rendering: objects sorted by id, edges by (min, max).
pub fn render_snapshot(s: &WorkloadSnapshot) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SNAPSHOT_HEADER}");
    let periodic = match &s.periodic_dims {
        None => "-".to_string(),
        Some(flags) => flags.iter().map(|&p| if p { '1' } else { '0' }).collect(),
    };
    let _ = writeln!(
        out,
        "H {} {} {} {}",
        s.node_count, s.threads_per_node, s.coord_dims, periodic
    );
    let mut objects: Vec<&ObjectInfo> = s.objects.iter().collect();
    objects.sort_by_key(|o| o.id);
    for obj in objects {
        let _ = write!(
            out,
            "O {} {} {} {}",
            obj.id, obj.home_node, obj.home_thread, obj.load
        );
        for c in &obj.coords {
            let _ = write!(out, " {c}");
        }
        out.push('\n');
    }
    let mut edges: Vec<(usize, usize, f64)> = s
        .edges
        .iter()
        .map(|e| (e.a.min(e.b), e.a.max(e.b), e.bytes))
        .collect();
    edges.sort_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    for (a, b, bytes) in edges {
        let _ = writeln!(out, "E {a} {b} {bytes}");
    }
    out
}
