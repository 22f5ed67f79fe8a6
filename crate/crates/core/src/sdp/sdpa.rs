//! SDPA sparse (`.dat-s`) reader and writer.
//!
//! SDPA states the dual as `max ⟨F0, Y⟩ s.t. ⟨F_i, Y⟩ = c_i, Y ⪰ 0`; in the
//! solver's convention that is `C = -F0`, `A_i = F_i`, `b = c`. Diagonal
//! blocks (negative sizes) are read as dense blocks of the same order, which
//! gives the same optimum since every data matrix in such a block is
//! diagonal.

use std::fmt::Write as _;
use std::path::Path;

use super::{SdpProblem, SymSparse};
use crate::error::{Error, Result};

fn parse_err(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

pub fn read_sdpa(text: &str) -> Result<SdpProblem> {
    let lines: Vec<String> = text
        .lines()
        .filter(|l| {
            let t = l.trim_start();
            !(t.is_empty() || t.starts_with('*') || t.starts_with('"'))
        })
        .map(|l| l.replace([',', '{', '}', '(', ')'], " "))
        .collect();
    let int = |s: &str, what: &str| -> Result<i64> {
        s.parse::<f64>()
            .ok()
            .filter(|v| v.fract() == 0.0)
            .map(|v| v as i64)
            .ok_or_else(|| parse_err(format!("bad {what}: {s}")))
    };
    // The three header lines may carry trailing annotations after the numbers.
    let header = |k: usize, what: &str| -> Result<Vec<&str>> {
        let l = lines.get(k).ok_or_else(|| parse_err(format!("missing {what}")))?;
        Ok(l.split_whitespace().collect())
    };
    let first = |k: usize, what: &str| -> Result<i64> {
        let h = header(k, what)?;
        int(h.first().ok_or_else(|| parse_err(format!("missing {what}")))?, what)
    };
    let m = usize::try_from(first(0, "m")?).map_err(|_| parse_err("negative m"))?;
    let nblocks = usize::try_from(first(1, "nblocks")?).map_err(|_| parse_err("negative nblocks"))?;
    let sizes = header(2, "block sizes")?;
    if sizes.len() < nblocks {
        return Err(parse_err("too few block sizes"));
    }
    let mut blocks = Vec::with_capacity(nblocks);
    for s in &sizes[..nblocks] {
        let v = int(s, "block size")?;
        if v == 0 {
            return Err(parse_err("zero block size"));
        }
        blocks.push(v.unsigned_abs() as usize);
    }
    let rest_text = lines[3..].join("\n");
    let mut tok = rest_text.split_whitespace();
    let mut next = |what: &str| tok.next().ok_or_else(|| parse_err(format!("missing {what}")));
    let mut c = Vec::with_capacity(m);
    for _ in 0..m {
        let s = next("objective entry")?;
        c.push(s.parse::<f64>().map_err(|_| parse_err(format!("bad objective entry {s}")))?);
    }
    let mut raw: Vec<Vec<(usize, usize, usize, f64)>> = vec![Vec::new(); m + 1];
    let rest: Vec<&str> = tok.collect();
    if !rest.len().is_multiple_of(5) {
        return Err(parse_err("entry list is not a multiple of 5 fields"));
    }
    for e in rest.chunks(5) {
        let matno = int(e[0], "matrix number")?;
        let blk = int(e[1], "block")?;
        let i = int(e[2], "row")?;
        let j = int(e[3], "column")?;
        let v: f64 = e[4].parse().map_err(|_| parse_err(format!("bad value {}", e[4])))?;
        if matno < 0 || matno as usize > m {
            return Err(parse_err(format!("matrix number {matno} out of range")));
        }
        if blk < 1 || blk as usize > nblocks {
            return Err(parse_err(format!("block {blk} out of range")));
        }
        let size = blocks[blk as usize - 1] as i64;
        if i < 1 || j < 1 || i > size || j > size {
            return Err(parse_err(format!("index ({i},{j}) outside block {blk}")));
        }
        raw[matno as usize].push((blk as usize - 1, i as usize - 1, j as usize - 1, v));
    }
    let mut p = SdpProblem::new(blocks);
    p.c = SymSparse::from_entries(raw[0].drain(..)).scaled(-1.0);
    for (k, entries) in raw.into_iter().enumerate().skip(1) {
        p.add_constraint(SymSparse::from_entries(entries), c[k - 1]);
    }
    Ok(p)
}

pub fn write_sdpa(p: &SdpProblem, comment: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(c) = comment {
        for line in c.lines() {
            let _ = writeln!(out, "*{line}");
        }
    }
    let _ = writeln!(out, "{}", p.constraints.len());
    let _ = writeln!(out, "{}", p.blocks.len());
    let sizes: Vec<String> = p.blocks.iter().map(|b| b.to_string()).collect();
    let _ = writeln!(out, "{}", sizes.join(" "));
    let rhs: Vec<String> = p.constraints.iter().map(|c| format!("{:e}", c.b)).collect();
    let _ = writeln!(out, "{}", rhs.join(" "));
    let mut emit = |matno: usize, s: &SymSparse, sign: f64| {
        for &(b, i, j, v) in s.entries() {
            let _ = writeln!(out, "{matno} {} {} {} {:e}", b + 1, i + 1, j + 1, sign * v);
        }
    };
    emit(0, &p.c, -1.0);
    for (k, c) in p.constraints.iter().enumerate() {
        emit(k + 1, &c.a, 1.0);
    }
    out
}

pub fn read_sdpa_file(path: impl AsRef<Path>) -> Result<SdpProblem> {
    read_sdpa(&std::fs::read_to_string(path)?)
}

pub fn write_sdpa_file(p: &SdpProblem, path: impl AsRef<Path>, comment: Option<&str>) -> Result<()> {
    std::fs::write(path, write_sdpa(p, comment))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::{solve, SdpStatus};

    const EXAMPLE: &str = "\"Example 1: mDim = 3, nBLOCK = 1, {2}\"
   3  =  mDIM
   1  =  nBOLCK
   2  = bLOCKsTRUCT
{48, -8, 20}
0 1 1 1 -11
0 1 1 2 0
0 1 2 2 23
1 1 1 1 10
1 1 1 2 4
2 1 2 2 -8
3 1 1 2 -8
3 1 2 2 -2
";

    #[test]
    fn reads_reference_example() {
        // The three constraints fix Y = [[5.9, -1.375], [-1.375, 1]], so
        // ⟨F0, Y⟩ = -41.9 and the solver's objective ⟨-F0, Y⟩ is 41.9.
        let p = read_sdpa(EXAMPLE).unwrap();
        assert_eq!(p.blocks, vec![2]);
        assert_eq!(p.constraints.len(), 3);
        let sol = solve(&p).unwrap();
        assert_eq!(sol.status, SdpStatus::Optimal);
        assert!((sol.objective - 41.9).abs() < 1e-6, "{}", sol.objective);
    }

    #[test]
    fn write_then_read_roundtrips() {
        let p = read_sdpa(EXAMPLE).unwrap();
        let text = write_sdpa(&p, Some("roundtrip"));
        assert!(text.starts_with("*roundtrip\n"));
        assert_eq!(read_sdpa(&text).unwrap(), p);
    }

    #[test]
    fn negative_blocks_read_as_dense() {
        let p = read_sdpa("1\n1\n-2\n1\n0 1 1 1 -1\n0 1 2 2 -2\n1 1 1 1 1\n1 1 2 2 1\n").unwrap();
        assert_eq!(p.blocks, vec![2]);
        let sol = solve(&p).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-7);
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        assert!(read_sdpa("").is_err());
        assert!(read_sdpa("1\n1\n2\n1\n1 1 3 1 1\n").is_err());
        assert!(read_sdpa("1\n1\n2\n1\n2 1 1 1 1\n").is_err());
        assert!(read_sdpa("1\n1\n2\n1\n1 1 1\n").is_err());
    }
}
