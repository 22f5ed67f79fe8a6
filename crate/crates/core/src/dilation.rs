//! One-row dilation probe for Arveson extremeness.
//!
//! A square `X` with blocks in `Her_s` is dilated to blocks
//! `D_ij = [[X_ij, β_ij], [β_ij*, γ_ij]]` in `Her_{s+1}` such that the
//! dilated square is again magic (and commutes with the graph, if given).
//! For a random direction `E` the SDP maximizes `Re⟨E, β⟩`. A nonzero
//! optimum exhibits a nontrivial dilation; optima that stay at zero over
//! many directions are evidence that every one-row dilation is trivial.
//!
//! Since `D_ij ⪰ 0` forces `β_ij ∈ range(X_ij)`, each block is written as
//! `T D'_ij T*` with `T = U ⊕ 1` for an orthonormal basis `U` of that range.
//! This removes the forced zeros and keeps the SDP strictly feasible.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::{eig_herm, embed_complex, her_basis, ComplexMatrix, HermitianMatrix};
use crate::magic::{graph_commutation_residual, verify_magic, BlockMatrix};
use crate::sdp::{solve, SdpProblem, SdpStatus, SymSparse};

/// Eigenvalues of `X_ij` at or below this count as zero.
const RANGE_TOL: f64 = 1e-9;
/// Tolerance for re-verifying a dilated square produced by the solver.
pub const DILATION_TOL: f64 = 1e-7;
/// Input squares must satisfy the affine and PSD conditions to this tolerance.
const INPUT_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct DirectionOutcome {
    pub status: SdpStatus,
    pub objective: f64,
    /// `(Σ_ij ||β_ij||²)^{1/2}` of the optimal dilation.
    pub beta_norm: f64,
}

#[derive(Clone, Debug)]
pub struct DilationProbeResult {
    pub max_beta_norm: f64,
    pub directions: Vec<DirectionOutcome>,
    /// Dilated square attaining the largest `β`, if any probe ran.
    pub dilation: Option<BlockMatrix>,
    /// Direct re-check of `dilation`: magic, commuting, blockwise PSD, and
    /// restricting to the input square.
    pub dilation_verified: bool,
    pub failures: usize,
}

struct BlockFrame {
    /// `(s+1) x (r+1)` map `U ⊕ 1`.
    t: ComplexMatrix,
    r: usize,
}

fn block_frame(x: &HermitianMatrix) -> Result<BlockFrame> {
    let s = x.dim();
    let (spec, vecs) = eig_herm(x)?;
    let keep: Vec<usize> = (0..s).filter(|&k| spec.eigenvalues[k] > RANGE_TOL).collect();
    let r = keep.len();
    let mut t = ComplexMatrix::zeros(s + 1, r + 1);
    for (c, &k) in keep.iter().enumerate() {
        t.view_mut((0, c), (s, 1)).copy_from(&vecs.column(k));
    }
    t[(s, r)] = Complex64::new(1.0, 0.0);
    Ok(BlockFrame { t, r })
}

/// Functional `D ↦ Tr(H D)` on block `b`, pulled back to the embedded `D'`.
fn pulled_back(b: usize, frame: &BlockFrame, h: &ComplexMatrix, scale: f64) -> Vec<(usize, usize, usize, f64)> {
    let reduced = frame.t.adjoint() * h * &frame.t;
    let emb = embed_complex(&reduced);
    let n = emb.nrows();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i..n {
            let v = emb[(i, j)] * scale;
            if v.abs() > 1e-15 {
                out.push((b, i, j, v));
            }
        }
    }
    out
}

pub fn arveson_dilation_probe(x: &BlockMatrix, graph: Option<&Graph>, directions: usize, seed: u64) -> Result<DilationProbeResult> {
    let (n, s) = (x.n(), x.s());
    let rep = verify_magic(x, INPUT_TOL)?;
    if !rep.overall {
        return Err(Error::InvalidInput(format!(
            "probe needs a quantum magic square (residual {:e}, min eig {:e})",
            rep.max_residual(),
            rep.min_block_eig()
        )));
    }
    if let Some(g) = graph {
        let r = graph_commutation_residual(x, g)?;
        if r > INPUT_TOL {
            return Err(Error::InvalidInput(format!("square does not commute with {} (residual {r:e})", g.name())));
        }
    }
    let mut result = DilationProbeResult {
        max_beta_norm: 0.0,
        directions: Vec::new(),
        dilation: None,
        dilation_verified: false,
        failures: 0,
    };
    if directions == 0 {
        return Ok(result);
    }

    let frames: Vec<BlockFrame> = x.blocks().iter().map(block_frame).collect::<Result<_>>()?;
    let sizes: Vec<usize> = frames.iter().map(|f| 2 * (f.r + 1)).collect();
    let mut base = SdpProblem::new(sizes);

    // Fix the reduced top-left corner to U* X_ij U.
    for (b, f) in frames.iter().enumerate() {
        let xr = f.t.view((0, 0), (s, f.r)).adjoint() * x.blocks()[b].matrix() * f.t.view((0, 0), (s, f.r));
        for h in her_basis(f.r) {
            let mut pad = ComplexMatrix::zeros(f.r + 1, f.r + 1);
            pad.view_mut((0, 0), (f.r, f.r)).copy_from(h.matrix());
            let target = (h.matrix() * &xr).trace().re;
            let emb = embed_complex(&pad);
            base.add_constraint(SymSparse::from_dense(b, &emb), target);
        }
    }

    // Functionals reading the last row and column of a dilated block.
    let edge: Vec<(ComplexMatrix, f64)> = her_basis(s + 1)
        .into_iter()
        .filter(|h| (0..=s).any(|p| h.matrix()[(p, s)] != Complex64::new(0.0, 0.0)))
        .map(|h| {
            let one = h.matrix()[(s, s)].re;
            (h.into_inner(), one)
        })
        .collect();
    let blk = |i: usize, j: usize| i * n + j;
    for (h, id_value) in &edge {
        for i in 0..n {
            let row: Vec<_> = (0..n).flat_map(|j| pulled_back(blk(i, j), &frames[blk(i, j)], h, 1.0)).collect();
            base.add_constraint(SymSparse::from_entries(row), *id_value);
            let col: Vec<_> = (0..n).flat_map(|k| pulled_back(blk(k, i), &frames[blk(k, i)], h, 1.0)).collect();
            base.add_constraint(SymSparse::from_entries(col), *id_value);
        }
        if let Some(g) = graph {
            for i in 0..n {
                for j in 0..n {
                    let mut e = Vec::new();
                    for k in g.neighbors(j) {
                        e.extend(pulled_back(blk(i, k), &frames[blk(i, k)], h, 1.0));
                    }
                    for k in g.neighbors(i) {
                        e.extend(pulled_back(blk(k, j), &frames[blk(k, j)], h, -1.0));
                    }
                    let a = SymSparse::from_entries(e);
                    if !a.is_empty() {
                        base.add_constraint(a, 0.0);
                    }
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_norm = -1.0;
    for _ in 0..directions {
        let e: Vec<Vec<Complex64>> = (0..n * n)
            .map(|_| {
                (0..s)
                    .map(|_| {
                        let re: f64 = StandardNormal.sample(&mut rng);
                        let im: f64 = StandardNormal.sample(&mut rng);
                        Complex64::new(re, im)
                    })
                    .collect()
            })
            .collect();
        let norm = e.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        // Re⟨E, β⟩ = Tr(H D) with H = (E e_s* + e_s E*)/2 placed in the last column.
        let mut obj = Vec::new();
        for (b, f) in frames.iter().enumerate() {
            let mut h = ComplexMatrix::zeros(s + 1, s + 1);
            for p in 0..s {
                let z = e[b][p] / norm;
                h[(s, p)] = z.conj() * 0.5;
                h[(p, s)] = z * 0.5;
            }
            obj.extend(pulled_back(b, f, &h, -1.0));
        }
        let mut p = base.clone();
        p.c = SymSparse::from_entries(obj);
        let sol = solve(&p)?;
        if sol.status != SdpStatus::Optimal {
            result.failures += 1;
            result.directions.push(DirectionOutcome {
                status: sol.status,
                objective: f64::NAN,
                beta_norm: f64::NAN,
            });
            continue;
        }
        let dilated = BlockMatrix::from_fn(n, s + 1, |i, j| {
            let b = blk(i, j);
            let f = &frames[b];
            let y = &sol.primal[b];
            let m = f.r + 1;
            let reduced = ComplexMatrix::from_fn(m, m, |r, c| {
                Complex64::new(y[(r, c)] + y[(r + m, c + m)], y[(r + m, c)] - y[(c + m, r)])
            });
            HermitianMatrix::symmetrize(&f.t * reduced * f.t.adjoint())
        });
        let beta_norm = (0..n * n)
            .map(|b| {
                let d = dilated.blocks()[b].matrix();
                (0..s).map(|p| d[(p, s)].norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt();
        result.directions.push(DirectionOutcome {
            status: sol.status,
            objective: -sol.objective,
            beta_norm,
        });
        if beta_norm > best_norm {
            best_norm = beta_norm;
            result.dilation = Some(dilated);
        }
    }
    result.max_beta_norm = result
        .directions
        .iter()
        .filter(|d| d.beta_norm.is_finite())
        .map(|d| d.beta_norm)
        .fold(0.0, f64::max);
    if let Some(d) = &result.dilation {
        result.dilation_verified = verify_dilation(x, d, graph, DILATION_TOL)?;
    }
    Ok(result)
}

/// Direct check that `d` is a magic (and commuting) square whose blocks
/// restrict to those of `x` in the top-left corner.
pub fn verify_dilation(x: &BlockMatrix, d: &BlockMatrix, graph: Option<&Graph>, tol: f64) -> Result<bool> {
    if d.n() != x.n() || d.s() != x.s() + 1 {
        return Ok(false);
    }
    let s = x.s();
    if !verify_magic(d, tol)?.overall {
        return Ok(false);
    }
    if let Some(g) = graph {
        if graph_commutation_residual(d, g)? > tol {
            return Ok(false);
        }
    }
    let corner_ok = x.blocks().iter().zip(d.blocks()).all(|(xb, db)| {
        let c = db.matrix().view((0, 0), (s, s)).into_owned();
        (c - xb.matrix()).norm() <= tol
    });
    Ok(corner_ok)
}
