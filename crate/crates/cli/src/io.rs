use std::path::Path;

use gqms_core::json::{read_json, to_canonical_string, write_canonical};
use gqms_core::magic::BlockMatrixJson;
use gqms_core::{BlockMatrix, Graph};
use serde::Serialize;

pub fn read_square(path: &Path) -> Result<BlockMatrix, String> {
    let j: BlockMatrixJson = read_json(path).map_err(|e| format!("{}: {e}", path.display()))?;
    BlockMatrix::try_from(&j).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_graph(spec: &str) -> Result<Graph, String> {
    spec.parse().map_err(|e| format!("graph {spec:?}: {e}"))
}

/// Graph for a square of size `n`, rejecting a vertex-count mismatch.
pub fn graph_for(spec: Option<&str>, n: usize) -> Result<Option<Graph>, String> {
    let Some(spec) = spec else { return Ok(None) };
    let g = parse_graph(spec)?;
    if g.n() != n {
        return Err(format!("graph {spec} has {} vertices but the square has n = {n}", g.n()));
    }
    Ok(Some(g))
}

pub fn print<T: Serialize + ?Sized>(value: &T) -> Result<(), String> {
    println!("{}", to_canonical_string(value).map_err(|e| e.to_string())?);
    Ok(())
}

pub fn write<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), String> {
    write_canonical(path, value).map_err(|e| format!("{}: {e}", path.display()))
}

/// Write to `path` if given, else print to stdout.
pub fn emit<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<(), String> {
    match path {
        Some(p) => write(p, value),
        None => print(value),
    }
}
