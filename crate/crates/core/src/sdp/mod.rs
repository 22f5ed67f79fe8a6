//! A dense primal-dual interior-point solver for real semidefinite programs
//!
//! ```text
//!   minimize ⟨C, X⟩  subject to  ⟨A_i, X⟩ = b_i,  X ⪰ 0
//!   maximize bᵀy     subject to  Σ y_i A_i + S = C,  S ⪰ 0
//! ```
//!
//! with `X` block diagonal. Search directions use Nesterov-Todd scaling and
//! Mehrotra's predictor-corrector; the Schur complement is factored densely.
//! Complex Hermitian problems are handled by callers through the real
//! embedding.

pub mod sdpa;

pub use sdpa::{read_sdpa, read_sdpa_file, write_sdpa, write_sdpa_file};

use nalgebra::{Cholesky, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, sym_eigenvalues, RealMatrix, RealSymmetricMatrix};

/// A symmetric block-diagonal matrix stored as its upper-triangle entries
/// `(block, i, j, value)` with `i <= j`, sorted and merged.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SymSparse {
    entries: Vec<(usize, usize, usize, f64)>,
}

impl SymSparse {
    /// Entries may be given in either triangle; duplicates are summed.
    pub fn from_entries(raw: impl IntoIterator<Item = (usize, usize, usize, f64)>) -> Self {
        let mut entries: Vec<_> = raw
            .into_iter()
            .map(|(b, i, j, v)| if i <= j { (b, i, j, v) } else { (b, j, i, v) })
            .collect();
        entries.sort_by_key(|x| (x.0, x.1, x.2));
        let mut merged: Vec<(usize, usize, usize, f64)> = Vec::with_capacity(entries.len());
        for e in entries {
            match merged.last_mut() {
                Some(last) if (last.0, last.1, last.2) == (e.0, e.1, e.2) => last.3 += e.3,
                _ => merged.push(e),
            }
        }
        merged.retain(|e| e.3 != 0.0);
        Self { entries: merged }
    }

    /// Upper triangle of a dense symmetric block.
    pub fn from_dense(block: usize, m: &RealMatrix) -> Self {
        let n = m.nrows();
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i..n {
                let v = m[(i, j)];
                if v != 0.0 {
                    entries.push((block, i, j, v));
                }
            }
        }
        Self { entries }
    }

    pub fn identity(sizes: &[usize]) -> Self {
        Self {
            entries: sizes
                .iter()
                .enumerate()
                .flat_map(|(b, &n)| (0..n).map(move |i| (b, i, i, 1.0)))
                .collect(),
        }
    }

    pub fn entries(&self) -> &[(usize, usize, usize, f64)] {
        &self.entries
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `⟨A, X⟩` against dense blocks.
    pub fn dot_dense(&self, x: &[RealMatrix]) -> f64 {
        self.entries
            .iter()
            .map(|&(b, i, j, v)| if i == j { v * x[b][(i, i)] } else { 2.0 * v * x[b][(i, j)] })
            .sum()
    }

    /// `X += alpha A` on dense blocks (both triangles).
    pub fn add_to(&self, alpha: f64, x: &mut [RealMatrix]) {
        for &(b, i, j, v) in &self.entries {
            x[b][(i, j)] += alpha * v;
            if i != j {
                x[b][(j, i)] += alpha * v;
            }
        }
    }

    /// Trace inner product of two sparse matrices.
    pub fn dot(&self, other: &SymSparse) -> f64 {
        let (mut p, mut q, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while p < a.len() && q < b.len() {
            let ka = (a[p].0, a[p].1, a[p].2);
            let kb = (b[q].0, b[q].1, b[q].2);
            match ka.cmp(&kb) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    let w = if ka.1 == ka.2 { 1.0 } else { 2.0 };
                    acc += w * a[p].3 * b[q].3;
                    p += 1;
                    q += 1;
                }
            }
        }
        acc
    }

    pub fn fro(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> SymSparse {
        SymSparse {
            entries: self.entries.iter().map(|&(b, i, j, v)| (b, i, j, alpha * v)).collect(),
        }
    }

    pub fn to_dense(&self, sizes: &[usize]) -> Vec<RealMatrix> {
        let mut out = zero_blocks(sizes);
        self.add_to(1.0, &mut out);
        out
    }

    fn max_block(&self) -> Option<usize> {
        self.entries.iter().map(|e| e.0).max()
    }

    fn fits(&self, sizes: &[usize]) -> bool {
        self.entries.iter().all(|&(b, i, j, _)| b < sizes.len() && i < sizes[b] && j < sizes[b])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Constraint {
    pub a: SymSparse,
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem {
    pub blocks: Vec<usize>,
    pub c: SymSparse,
    pub constraints: Vec<Constraint>,
}

impl SdpProblem {
    pub fn new(blocks: Vec<usize>) -> Self {
        Self {
            blocks,
            c: SymSparse::default(),
            constraints: Vec::new(),
        }
    }

    /// Single dense block.
    pub fn dense(c: &RealSymmetricMatrix, constraints: &[(RealSymmetricMatrix, f64)]) -> Self {
        let mut p = Self::new(vec![c.dim()]);
        p.c = SymSparse::from_dense(0, c.matrix());
        for (a, b) in constraints {
            p.add_constraint(SymSparse::from_dense(0, a.matrix()), *b);
        }
        p
    }

    pub fn add_constraint(&mut self, a: SymSparse, b: f64) {
        self.constraints.push(Constraint { a, b });
    }

    pub fn dimension(&self) -> usize {
        self.blocks.iter().sum()
    }

    fn check(&self) -> Result<()> {
        if self.blocks.is_empty() || self.blocks.contains(&0) {
            return Err(Error::Sdp("every block needs positive size".into()));
        }
        if !self.c.fits(&self.blocks) {
            return Err(Error::Dimension(format!(
                "objective touches block {:?} outside sizes {:?}",
                self.c.max_block(),
                self.blocks
            )));
        }
        for (k, con) in self.constraints.iter().enumerate() {
            if !con.a.fits(&self.blocks) {
                return Err(Error::Dimension(format!("constraint {k} does not fit the block sizes")));
            }
            if !con.b.is_finite() {
                return Err(Error::InvalidInput(format!("constraint {k} has non-finite right-hand side")));
            }
        }
        Ok(())
    }

    /// `max_i |⟨A_i, X⟩ - b_i|`.
    pub fn max_residual(&self, x: &[RealMatrix]) -> f64 {
        self.constraints
            .iter()
            .map(|c| (c.a.dot_dense(x) - c.b).abs())
            .fold(0.0, f64::max)
    }

    pub fn objective(&self, x: &[RealMatrix]) -> f64 {
        self.c.dot_dense(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
    NumericalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SdpOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            feas_tol: 1e-8,
            gap_tol: 1e-7,
            max_iter: 500,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    /// Primal matrix `X`, one dense block per block of the problem.
    pub primal: Vec<RealMatrix>,
    /// Dual multipliers, one per constraint (zero for constraints dropped in presolve).
    pub dual: Vec<f64>,
    pub slack: Vec<RealMatrix>,
    pub objective: f64,
    pub dual_objective: f64,
    pub residual: f64,
    pub min_eig: f64,
    pub iterations: usize,
    /// Indices of constraints dropped as redundant.
    pub dropped: Vec<usize>,
}

impl SdpSolution {
    fn empty(p: &SdpProblem, status: SdpStatus, iterations: usize) -> Self {
        Self {
            status,
            primal: zero_blocks(&p.blocks),
            dual: vec![0.0; p.constraints.len()],
            slack: zero_blocks(&p.blocks),
            objective: f64::NAN,
            dual_objective: f64::NAN,
            residual: f64::NAN,
            min_eig: f64::NAN,
            iterations,
            dropped: Vec::new(),
        }
    }

    /// The primal matrix as a single dense block-diagonal matrix.
    pub fn primal_dense(&self) -> RealMatrix {
        block_diag(&self.primal)
    }
}

pub fn zero_blocks(sizes: &[usize]) -> Vec<RealMatrix> {
    sizes.iter().map(|&n| RealMatrix::zeros(n, n)).collect()
}

pub fn block_diag(blocks: &[RealMatrix]) -> RealMatrix {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = RealMatrix::zeros(n, n);
    let mut off = 0;
    for b in blocks {
        out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
        off += b.nrows();
    }
    out
}

fn blocks_dot(a: &[RealMatrix], b: &[RealMatrix]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.dot(y)).sum()
}

fn blocks_min_eig(x: &[RealMatrix]) -> Result<f64> {
    let mut lo = f64::INFINITY;
    for b in x {
        lo = lo.min(sym_eigenvalues(b)?[0]);
    }
    Ok(lo)
}

fn symmetrize(m: &mut RealMatrix) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

const PRESOLVE_TOL: f64 = 1e-12;

/// Keep a maximal independent subset of constraints (pivoted Cholesky of
/// the Gram matrix). Returns `None` when a dropped constraint contradicts
/// the kept ones.
fn presolve(p: &SdpProblem) -> Option<(Vec<usize>, Vec<usize>)> {
    let k = p.constraints.len();
    let norms: Vec<f64> = p.constraints.iter().map(|c| c.a.fro()).collect();
    let mut kept: Vec<usize> = Vec::new();
    let mut dropped: Vec<usize> = Vec::new();
    // Rows of the incremental Cholesky factor of the kept Gram matrix.
    let mut lrows: Vec<Vec<f64>> = Vec::new();
    for i in 0..k {
        if norms[i] == 0.0 {
            if p.constraints[i].b.abs() > PRESOLVE_TOL {
                return None;
            }
            dropped.push(i);
            continue;
        }
        let g: Vec<f64> = kept.iter().map(|&j| p.constraints[i].a.dot(&p.constraints[j].a)).collect();
        let mut l = vec![0.0; kept.len()];
        for r in 0..kept.len() {
            let s: f64 = (0..r).map(|c| lrows[r][c] * l[c]).sum();
            l[r] = (g[r] - s) / lrows[r][r];
        }
        let d2 = norms[i] * norms[i] - l.iter().map(|x| x * x).sum::<f64>();
        if d2 > PRESOLVE_TOL * norms[i] * norms[i] {
            l.push(d2.sqrt());
            lrows.push(l);
            kept.push(i);
        } else {
            // A_i = Σ c_j A_j; solve Lᵀ c = l for the coefficients.
            let m = kept.len();
            let mut c = vec![0.0; m];
            for r in (0..m).rev() {
                let s: f64 = (r + 1..m).map(|t| lrows[t][r] * c[t]).sum();
                c[r] = (l[r] - s) / lrows[r][r];
            }
            let implied: f64 = kept.iter().zip(&c).map(|(&j, cj)| cj * p.constraints[j].b).sum();
            let scale = 1.0 + p.constraints[i].b.abs() + implied.abs();
            if (implied - p.constraints[i].b).abs() > 1e-9 * scale {
                return None;
            }
            dropped.push(i);
        }
    }
    Some((kept, dropped))
}

struct Scaling {
    g: Vec<RealMatrix>,
    g_inv: Vec<RealMatrix>,
    w: Vec<RealMatrix>,
    d: Vec<Vec<f64>>,
}

fn nt_scaling(x: &[RealMatrix], s: &[RealMatrix]) -> Option<Scaling> {
    let mut out = Scaling {
        g: Vec::new(),
        g_inv: Vec::new(),
        w: Vec::new(),
        d: Vec::new(),
    };
    for (xb, sb) in x.iter().zip(s) {
        let l = Cholesky::new(xb.clone())?.unpack();
        let mut lsl = l.transpose() * sb * &l;
        symmetrize(&mut lsl);
        let (lam, q) = eig_sym(&RealSymmetricMatrix::new(lsl).ok()?).ok()?;
        if lam.iter().any(|&v| !(v > 0.0)) {
            return None;
        }
        let n = lam.len();
        let quarter: Vec<f64> = lam.iter().map(|v| v.powf(-0.25)).collect();
        let g = &l * &q * RealMatrix::from_diagonal(&DVector::from_vec(quarter.clone()));
        let l_inv = l.clone().solve_lower_triangular(&RealMatrix::identity(n, n))?;
        let g_inv = RealMatrix::from_diagonal(&DVector::from_iterator(n, quarter.iter().map(|v| 1.0 / v)))
            * q.transpose()
            * l_inv;
        let mut w = &g * g.transpose();
        symmetrize(&mut w);
        out.d.push(lam.iter().map(|v| v.sqrt()).collect());
        out.g.push(g);
        out.g_inv.push(g_inv);
        out.w.push(w);
    }
    Some(out)
}

/// Largest step in `(0, ∞]` keeping `X + αΔ` PSD.
fn max_step(x: &[RealMatrix], dx: &[RealMatrix]) -> Option<f64> {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(dx) {
        let l = Cholesky::new(xb.clone())?.unpack();
        let n = l.nrows();
        let l_inv = l.solve_lower_triangular(&RealMatrix::identity(n, n))?;
        let mut m = &l_inv * db * l_inv.transpose();
        symmetrize(&mut m);
        let lo = sym_eigenvalues(&m).ok()?[0];
        if lo < 0.0 {
            alpha = alpha.min(-1.0 / lo);
        }
    }
    Some(alpha)
}

struct Engine<'a> {
    p: &'a SdpProblem,
    rows: Vec<usize>,
}

impl<'a> Engine<'a> {
    fn a_op(&self, x: &[RealMatrix]) -> DVector<f64> {
        DVector::from_iterator(self.rows.len(), self.rows.iter().map(|&r| self.p.constraints[r].a.dot_dense(x)))
    }

    fn at_op(&self, y: &DVector<f64>) -> Vec<RealMatrix> {
        let mut out = zero_blocks(&self.p.blocks);
        for (k, &r) in self.rows.iter().enumerate() {
            if y[k] != 0.0 {
                self.p.constraints[r].a.add_to(y[k], &mut out);
            }
        }
        out
    }

    /// `H_ij = ⟨A_i, W A_j W⟩`.
    fn schur(&self, w: &[RealMatrix]) -> RealMatrix {
        let k = self.rows.len();
        let mut h = RealMatrix::zeros(k, k);
        let sizes = &self.p.blocks;
        for (jj, &rj) in self.rows.iter().enumerate() {
            let a = &self.p.constraints[rj].a;
            // W A_j W, block by block, touching only the rows A_j uses.
            let mut u = zero_blocks(sizes);
            for (b, wb) in w.iter().enumerate() {
                let ents: Vec<_> = a.entries.iter().filter(|e| e.0 == b).collect();
                if ents.is_empty() {
                    continue;
                }
                let n = sizes[b];
                let mut touched: Vec<usize> = ents.iter().flat_map(|e| [e.1, e.2]).collect();
                touched.sort_unstable();
                touched.dedup();
                let pos = |i: usize| touched.binary_search(&i).unwrap();
                // T = A_j W restricted to touched rows.
                let mut t = RealMatrix::zeros(touched.len(), n);
                for &&(_, i, j, v) in &ents {
                    let (pi, pj) = (pos(i), pos(j));
                    for c in 0..n {
                        t[(pi, c)] += v * wb[(j, c)];
                    }
                    if i != j {
                        for c in 0..n {
                            t[(pj, c)] += v * wb[(i, c)];
                        }
                    }
                }
                let wcols = RealMatrix::from_fn(n, touched.len(), |r, c| wb[(r, touched[c])]);
                u[b] = wcols * t;
            }
            for (ii, &ri) in self.rows.iter().enumerate().skip(jj) {
                let v = self.p.constraints[ri].a.dot_dense(&u);
                h[(ii, jj)] = v;
                h[(jj, ii)] = v;
            }
        }
        h
    }
}

fn mul3(a: &RealMatrix, b: &RealMatrix, c: &RealMatrix) -> RealMatrix {
    a * b * c
}

/// Solve with default options.
pub fn solve(p: &SdpProblem) -> Result<SdpSolution> {
    solve_with(p, &SdpOptions::default())
}

/// Find a strictly feasible point: the objective is dropped and the
/// interior-point iteration converges to the analytic center of the slice.
pub fn feasibility(p: &SdpProblem) -> Result<SdpSolution> {
    let mut q = p.clone();
    q.c = SymSparse::default();
    solve(&q)
}

pub fn solve_with(p: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.check()?;
    let Some((rows, dropped)) = presolve(p) else {
        return Ok(SdpSolution::empty(p, SdpStatus::Infeasible, 0));
    };
    if !dropped.is_empty() {
        log::warn!("sdp presolve dropped {} dependent constraints", dropped.len());
    }
    let eng = Engine { p, rows };
    let k = eng.rows.len();
    let sizes = &p.blocks;
    let n_total = p.dimension() as f64;
    let b = DVector::from_iterator(k, eng.rows.iter().map(|&r| p.constraints[r].b));
    let c_dense = p.c.to_dense(sizes);
    let c_norm = p.c.fro();
    let b_norm = b.norm();

    // Standard infeasible starting point.
    let mut xi: f64 = 10f64.max(n_total.sqrt());
    let mut eta: f64 = 10f64.max(n_total.sqrt()).max(c_norm);
    for &r in &eng.rows {
        let a = &p.constraints[r].a;
        let an = a.fro();
        xi = xi.max(n_total * (1.0 + p.constraints[r].b.abs()) / (1.0 + an));
        eta = eta.max(an);
    }
    eta = eta.max(n_total.sqrt()) / n_total.sqrt().max(1.0);
    eta = eta.max(1.0);
    let eye = |scale: f64| -> Vec<RealMatrix> { sizes.iter().map(|&n| RealMatrix::identity(n, n) * scale).collect() };
    let mut x = eye(xi);
    let mut s = eye(eta);
    let mut y = DVector::zeros(k);

    let finish = |status: SdpStatus, x: Vec<RealMatrix>, y: &DVector<f64>, s: Vec<RealMatrix>, it: usize| -> Result<SdpSolution> {
        let mut dual = vec![0.0; p.constraints.len()];
        for (kk, &r) in eng.rows.iter().enumerate() {
            dual[r] = y[kk];
        }
        let objective = p.objective(&x);
        let dual_objective = b.dot(y);
        let residual = p.max_residual(&x);
        let min_eig = blocks_min_eig(&x)?;
        Ok(SdpSolution {
            status,
            primal: x,
            dual,
            slack: s,
            objective,
            dual_objective,
            residual,
            min_eig,
            iterations: it,
            dropped: dropped.clone(),
        })
    };

    let mut stalls = 0;
    for it in 0..opts.max_iter {
        let ax = eng.a_op(&x);
        let rp = &b - &ax;
        let aty = eng.at_op(&y);
        let rd: Vec<RealMatrix> = (0..sizes.len()).map(|q| &c_dense[q] - &s[q] - &aty[q]).collect();
        let pobj = blocks_dot(&c_dense, &x);
        let dobj = b.dot(&y);
        let pinf = rp.norm() / (1.0 + b_norm);
        let dinf = rd.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt() / (1.0 + c_norm);
        let gap = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let maxres = rp.amax();
        log::trace!("sdp it {it}: pobj {pobj:.3e} dobj {dobj:.3e} pinf {pinf:.1e} dinf {dinf:.1e} gap {gap:.1e}");
        if pinf <= opts.feas_tol && dinf <= opts.feas_tol && gap <= opts.gap_tol && maxres <= opts.feas_tol {
            return finish(SdpStatus::Optimal, x, &y, s, it);
        }
        if dobj > 0.0 {
            let mut hi = f64::NEG_INFINITY;
            for m in &aty {
                hi = hi.max(*sym_eigenvalues(m)?.last().unwrap());
            }
            if hi <= 1e-8 * dobj && y.norm() > 1e3 * (1.0 + b_norm) {
                return finish(SdpStatus::Infeasible, x, &y, s, it);
            }
        }

        let Some(sc) = nt_scaling(&x, &s) else {
            return finish(SdpStatus::NumericalFailure, x, &y, s, it);
        };
        let h = eng.schur(&sc.w);
        let chol = match Cholesky::new(h.clone()) {
            Some(c) => c,
            None => {
                let reg = 1e-13 * h.diagonal().amax().max(1e-300);
                match Cholesky::new(h + RealMatrix::identity(k, k) * reg) {
                    Some(c) => c,
                    None => return finish(SdpStatus::NumericalFailure, x, &y, s, it),
                }
            }
        };
        let wrw: Vec<RealMatrix> = (0..sizes.len()).map(|q| mul3(&sc.w[q], &rd[q], &sc.w[q])).collect();
        let a_wrw = eng.a_op(&wrw);

        let direction = |m: &[RealMatrix]| -> (Vec<RealMatrix>, DVector<f64>, Vec<RealMatrix>) {
            let gmg: Vec<RealMatrix> = (0..sizes.len()).map(|q| mul3(&sc.g[q], &m[q], &sc.g[q].transpose())).collect();
            let rhs = &rp - eng.a_op(&gmg) + &a_wrw;
            let dy = chol.solve(&rhs);
            let atdy = eng.at_op(&dy);
            let ds: Vec<RealMatrix> = (0..sizes.len()).map(|q| &rd[q] - &atdy[q]).collect();
            let dx: Vec<RealMatrix> = (0..sizes.len())
                .map(|q| {
                    let mut v = &gmg[q] - mul3(&sc.w[q], &ds[q], &sc.w[q]);
                    symmetrize(&mut v);
                    v
                })
                .collect();
            (dx, dy, ds)
        };

        let mu = blocks_dot(&x, &s) / n_total;
        let pred: Vec<RealMatrix> = sc
            .d
            .iter()
            .map(|d| RealMatrix::from_diagonal(&DVector::from_iterator(d.len(), d.iter().map(|v| -v))))
            .collect();
        let (dxa, _, dsa) = direction(&pred);
        let (Some(ap), Some(ad)) = (max_step(&x, &dxa), max_step(&s, &dsa)) else {
            return finish(SdpStatus::NumericalFailure, x, &y, s, it);
        };
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut mu_aff = 0.0;
        for q in 0..sizes.len() {
            mu_aff += (&x[q] + &dxa[q] * ap).dot(&(&s[q] + &dsa[q] * ad));
        }
        mu_aff /= n_total;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        let corr: Vec<RealMatrix> = (0..sizes.len())
            .map(|q| {
                let xt = mul3(&sc.g_inv[q], &dxa[q], &sc.g_inv[q].transpose());
                let st = mul3(&sc.g[q].transpose(), &dsa[q], &sc.g[q]);
                let prod = &xt * &st;
                let sym = (&prod + prod.transpose()) * 0.5;
                let d = &sc.d[q];
                RealMatrix::from_fn(d.len(), d.len(), |i, j| {
                    let target = if i == j { sigma * mu - d[i] * d[i] } else { 0.0 };
                    2.0 * (target - sym[(i, j)]) / (d[i] + d[j])
                })
            })
            .collect();
        let (dx, dy, ds) = direction(&corr);
        let (Some(ap), Some(ad)) = (max_step(&x, &dx), max_step(&s, &ds)) else {
            return finish(SdpStatus::NumericalFailure, x, &y, s, it);
        };
        let tau = 0.98;
        let ap = (tau * ap).min(1.0);
        let ad = (tau * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            stalls += 1;
            if stalls > 5 {
                return finish(SdpStatus::NumericalFailure, x, &y, s, it);
            }
        }
        for q in 0..sizes.len() {
            x[q] += &dx[q] * ap;
            s[q] += &ds[q] * ad;
            symmetrize(&mut x[q]);
            symmetrize(&mut s[q]);
        }
        y += dy * ad;
    }
    finish(SdpStatus::IterationLimit, x, &y, s, opts.max_iter)
}

/// Recompute residual, minimum eigenvalue and objective of a solution from
/// the raw problem data and compare against the reported values.
pub fn validate(p: &SdpProblem, sol: &SdpSolution) -> bool {
    validate_with(p, sol, &SdpOptions::default())
}

pub fn validate_with(p: &SdpProblem, sol: &SdpSolution, opts: &SdpOptions) -> bool {
    if sol.primal.len() != p.blocks.len()
        || sol.primal.iter().zip(&p.blocks).any(|(m, &n)| m.nrows() != n || m.ncols() != n)
    {
        return false;
    }
    let residual = p.max_residual(&sol.primal);
    let Ok(lo) = blocks_min_eig(&sol.primal) else {
        return false;
    };
    let objective = p.objective(&sol.primal);
    let feas = 10.0 * opts.feas_tol;
    let gap = 10.0 * opts.gap_tol;
    residual <= feas
        && lo >= -feas
        && (objective - sol.objective).abs() <= gap * (1.0 + objective.abs())
        && (residual - sol.residual).abs() <= feas
        && (lo - sol.min_eig).abs() <= feas
}
