//! Affine parametrizations of quantum magic squares and the monic linear
//! pencils they induce.
//!
//! Every parametrization has the form
//! `X_kl = (1/n) I_s + Σ_p d_kl^p Y_p` with Hermitian block variables `Y_p`
//! attached to independent block positions. The coefficients `d` are exact
//! rationals. Substituting `X = (1/n)(I + Ŷ)` gives the monic pencil
//! `I_{n²} ⊗ I_s + Σ_p diag(n d^p) ⊗ Y_p`, which is PSD exactly when every
//! block of `X` is.

use std::fmt::Write as _;
use std::path::Path;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::json::{read_json, write_canonical};
use crate::linalg::{
    embed_complex, her_basis, her_coordinates, her_from_coordinates, kron, min_eig, nullspace_real,
    ComplexMatrix, HermitianMatrix, RealMatrix, RANK_TOL,
};
use crate::magic::{graph_commutation_residual, verify_magic, BlockMatrix};
use crate::rational::{q, q_frac, to_f64, QMatrix, Q};

/// Largest block residual at which a square counts as lying on the affine slice.
pub const AFFINE_TOL: f64 = 1e-8;
/// Span agreement required between the joint and composed graph parametrizations.
pub const SPAN_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    PlainQms,
    GraphJointNullspace,
    GraphComposition,
}

/// The integer elimination table `X_kl = α_kl I + Σ c_kl^{ij} X_ij` over the
/// `(n-1)²` upper-left blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QmsCoefficients {
    pub n: usize,
    /// Indexed by `k * n + l`.
    pub alpha: Vec<i64>,
    /// `c[k * n + l][p]` with `p` running over the independent positions.
    pub c: Vec<Vec<i64>>,
}

impl QmsCoefficients {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let m = n - 1;
        let mut alpha = vec![0; n * n];
        let mut c = vec![vec![0; m * m]; n * n];
        for k in 0..n {
            for l in 0..n {
                let kl = k * n + l;
                match (k < m, l < m) {
                    (true, true) => c[kl][k * m + l] = 1,
                    (true, false) => {
                        alpha[kl] = 1;
                        for j in 0..m {
                            c[kl][k * m + j] = -1;
                        }
                    }
                    (false, true) => {
                        alpha[kl] = 1;
                        for i in 0..m {
                            c[kl][i * m + l] = -1;
                        }
                    }
                    (false, false) => {
                        alpha[kl] = 2 - n as i64;
                        c[kl].iter_mut().for_each(|x| *x = 1);
                    }
                }
            }
        }
        Self { n, alpha, c }
    }

    /// `A_0 + (1/n) Σ A_ij = (1/n) I_{n²}` in exact rational arithmetic, with
    /// `A_0 = diag(α)` and `A_ij = diag(c^{ij})`.
    pub fn monic_identity_holds(&self) -> bool {
        let inv_n = q_frac(1, self.n as i64);
        (0..self.n * self.n).all(|kl| {
            let sum: Q = self.c[kl].iter().map(|&x| q(x)).fold(Q::zero(), |a, b| a + b);
            q(self.alpha[kl]) + &inv_n * sum == inv_n
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphCounts {
    pub graph: String,
    pub commutant_dimension: usize,
    pub components: usize,
    /// `d_G - N`, the count predicted by removing one parameter per component.
    pub claimed_parameters: usize,
    pub measured_parameters: usize,
    pub removed_by_magic: usize,
    pub composition_parameters: usize,
    pub composition_span_residual: f64,
}

#[derive(Clone, Debug)]
pub struct AffineBlockParametrization {
    pub n: usize,
    pub s: usize,
    pub independent: Vec<(usize, usize)>,
    pub dependent: Vec<(usize, usize)>,
    /// `n² x g`, row `k * n + l`, column = independent parameter.
    pub coeffs: QMatrix,
    pub provenance: Provenance,
    pub plain: Option<QmsCoefficients>,
    pub graph: Option<GraphCounts>,
}

impl AffineBlockParametrization {
    fn from_coeffs(n: usize, s: usize, independent: Vec<usize>, coeffs: QMatrix, provenance: Provenance) -> Self {
        let dependent = (0..n * n)
            .filter(|kl| !independent.contains(kl))
            .map(|kl| (kl / n, kl % n))
            .collect();
        Self {
            n,
            s,
            independent: independent.into_iter().map(|kl| (kl / n, kl % n)).collect(),
            dependent,
            coeffs,
            provenance,
            plain: None,
            graph: None,
        }
    }

    /// Number of Hermitian block parameters.
    pub fn parameter_count(&self) -> usize {
        self.independent.len()
    }

    /// Number of real scalar parameters (`g · s²`).
    pub fn scalar_parameter_count(&self) -> usize {
        self.independent.len() * self.s * self.s
    }

    pub fn particular_point(&self) -> BlockMatrix {
        BlockMatrix::uniform(self.n, self.s)
    }

    pub fn coeff(&self, k: usize, l: usize, p: usize) -> f64 {
        to_f64(&self.coeffs[(k * self.n + l, p)])
    }

    pub fn evaluate(&self, y: &[HermitianMatrix]) -> Result<BlockMatrix> {
        if y.len() != self.parameter_count() || y.iter().any(|b| b.dim() != self.s) {
            return Err(Error::Dimension(format!(
                "expected {} block parameters of size {}",
                self.parameter_count(),
                self.s
            )));
        }
        let d = self.coeffs.to_f64();
        let c = 1.0 / self.n as f64;
        Ok(BlockMatrix::from_fn(self.n, self.s, |k, l| {
            let row = k * self.n + l;
            y.iter()
                .enumerate()
                .fold(HermitianMatrix::scaled_identity(self.s, c), |acc, (p, yp)| {
                    let w = d[(row, p)];
                    if w == 0.0 {
                        acc
                    } else {
                        acc.axpy(w, yp)
                    }
                })
        }))
    }

    /// Scalar parameters are the [`her_basis`] coordinates of each block
    /// parameter in turn.
    pub fn evaluate_scalar(&self, y: &[f64]) -> Result<BlockMatrix> {
        let s2 = self.s * self.s;
        if y.len() != self.scalar_parameter_count() {
            return Err(Error::Dimension(format!(
                "expected {} scalar parameters, got {}",
                self.scalar_parameter_count(),
                y.len()
            )));
        }
        let blocks: Vec<_> = y.chunks(s2).map(|c| her_from_coordinates(self.s, c)).collect();
        self.evaluate(&blocks)
    }

    /// Read off the block parameters of `x` and report how far `x` is from
    /// the square they generate.
    pub fn invert(&self, x: &BlockMatrix) -> Result<(Vec<HermitianMatrix>, f64)> {
        if x.n() != self.n || x.s() != self.s {
            return Err(Error::Dimension(format!(
                "square is n = {}, s = {}; parametrization is n = {}, s = {}",
                x.n(),
                x.s(),
                self.n,
                self.s
            )));
        }
        let c = HermitianMatrix::scaled_identity(self.s, 1.0 / self.n as f64);
        let y: Vec<_> = self.independent.iter().map(|&(i, j)| x.block(i, j).sub(&c)).collect();
        let back = self.evaluate(&y)?;
        Ok((y, back.max_block_diff(x)))
    }

    pub fn invert_scalar(&self, x: &BlockMatrix) -> Result<(Vec<f64>, f64)> {
        let (y, r) = self.invert(x)?;
        Ok((y.iter().flat_map(her_coordinates).collect(), r))
    }
}

/// The plain parametrization of `M^(n)` by the `(n-1)²` upper-left blocks.
pub fn qms_affine(n: usize, s: usize) -> Result<AffineBlockParametrization> {
    if n < 2 || s == 0 {
        return Err(Error::InvalidInput(format!("qms_affine needs n >= 2 and s >= 1 (n = {n}, s = {s})")));
    }
    let table = QmsCoefficients::new(n);
    let m = n - 1;
    let coeffs = QMatrix::from_fn(n * n, m * m, |kl, p| q(table.c[kl][p]));
    let independent = (0..m).flat_map(|i| (0..m).map(move |j| i * n + j)).collect();
    let mut out = AffineBlockParametrization::from_coeffs(n, s, independent, coeffs, Provenance::PlainQms);
    out.plain = Some(table);
    Ok(out)
}

/// Scalar linear constraints on deviations `y_kl` from the center: zero row
/// sums and zero column sums.
fn magic_rows(n: usize) -> Vec<Vec<i64>> {
    let mut rows = Vec::new();
    for k in 0..n {
        let mut r = vec![0; n * n];
        (0..n).for_each(|l| r[k * n + l] = 1);
        rows.push(r);
    }
    for l in 0..n {
        let mut r = vec![0; n * n];
        (0..n).for_each(|k| r[k * n + l] = 1);
        rows.push(r);
    }
    rows
}

/// `Σ_{m~j} y_im - Σ_{m~i} y_mj = 0` for all `(i, j)`.
fn commutation_rows(g: &Graph) -> Vec<Vec<i64>> {
    let n = g.n();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut r = vec![0; n * n];
            for m in g.neighbors(j) {
                r[i * n + m] += 1;
            }
            for m in g.neighbors(i) {
                r[m * n + j] -= 1;
            }
            rows.push(r);
        }
    }
    rows
}

fn int_matrix(rows: &[Vec<i64>], cols: usize) -> QMatrix {
    QMatrix::from_fn(rows.len(), cols, |i, j| q(rows[i][j]))
}

/// Kernel basis `N` and greedily chosen independent positions `I`, then
/// the normalized coefficients `N (N[I,:])^{-1}`.
fn normalized_solution(constraints: &QMatrix) -> (Vec<usize>, QMatrix) {
    let kernel = constraints.nullspace();
    let independent = kernel.greedy_independent_rows();
    let pivot = kernel.select_rows(&independent);
    let inv = pivot.inverse().expect("greedy rows of a kernel basis are independent");
    (independent, kernel.mul(&inv))
}

/// Affine parametrization of `M^(G)` for a regular graph `G`.
///
/// The joint system (row sums, column sums, commutation) is solved exactly
/// and is authoritative. The two-step route (commutant first, then magic
/// on its parameters) is computed in floating point and must span the same
/// space.
pub fn gqms_affine(g: &Graph, s: usize) -> Result<AffineBlockParametrization> {
    if g.is_k_regular().is_none() {
        return Err(Error::NotRegular(g.degrees()));
    }
    if s == 0 {
        return Err(Error::InvalidInput("s must be at least 1".into()));
    }
    let n = g.n();
    let mut rows = magic_rows(n);
    rows.extend(commutation_rows(g));
    let (independent, coeffs) = normalized_solution(&int_matrix(&rows, n * n));

    let comm = int_matrix(&commutation_rows(g), n * n).nullspace();
    let commutant_dimension = comm.cols;
    let spectral = g.commutant_dimension_spectral()?;
    if spectral != commutant_dimension {
        return Err(Error::RankMismatch(format!(
            "commutant of {g}: exact kernel {commutant_dimension}, multiplicities {spectral}"
        )));
    }

    let composed = composed_coefficients(g)?;
    let joint = coeffs.to_f64();
    if composed.ncols() != joint.ncols() {
        return Err(Error::RankMismatch(format!(
            "{g}: joint solver finds {} parameters, composition finds {}",
            joint.ncols(),
            composed.ncols()
        )));
    }
    let span_residual = span_residual(&joint, &composed).max(span_residual(&composed, &joint));
    if span_residual > SPAN_TOL {
        return Err(Error::RankMismatch(format!(
            "{g}: joint and composed parametrizations differ (span residual {span_residual:e})"
        )));
    }

    let components = g.connected_components().count;
    let measured = independent.len();
    let mut out =
        AffineBlockParametrization::from_coeffs(n, s, independent, coeffs, Provenance::GraphJointNullspace);
    out.graph = Some(GraphCounts {
        graph: g.name().to_string(),
        commutant_dimension,
        components,
        claimed_parameters: commutant_dimension.saturating_sub(components),
        measured_parameters: measured,
        removed_by_magic: commutant_dimension - measured,
        composition_parameters: composed.ncols(),
        composition_span_residual: span_residual,
    });
    Ok(out)
}

/// Two-step coefficients `d = r c`: `r` expresses every block through `d_G`
/// commutant positions, `c` solves the magic relations on those positions.
/// Returns an `n² x g'` matrix (row `k * n + l`).
pub fn composed_coefficients(g: &Graph) -> Result<RealMatrix> {
    let n = g.n();
    let basis = g.commutant_basis()?;
    let d = basis.dimension;
    let big = RealMatrix::from_fn(n * n, d, |kl, p| basis.basis[p][(kl / n, kl % n)].re);
    let positions = greedy_rows_f64(&big);
    if positions.len() != d {
        return Err(Error::RankMismatch(format!(
            "{g}: found {} independent commutant positions for dimension {d}",
            positions.len()
        )));
    }
    let pivot = RealMatrix::from_fn(d, d, |i, j| big[(positions[i], j)]);
    let inv = pivot
        .try_inverse()
        .ok_or_else(|| Error::RankMismatch("singular commutant pivot block".into()))?;
    let r = &big * inv;
    let magic = magic_rows(n);
    let m = RealMatrix::from_fn(magic.len(), d, |row, p| {
        (0..n * n).map(|kl| magic[row][kl] as f64 * r[(kl, p)]).sum()
    });
    let c = nullspace_real(&m, RANK_TOL);
    let cm = RealMatrix::from_fn(d, c.len(), |i, j| c[j][i]);
    Ok(r * cm)
}

/// Rows chosen greedily by modified Gram-Schmidt with a relative threshold.
fn greedy_rows_f64(m: &RealMatrix) -> Vec<usize> {
    let scale = m.amax().max(1.0);
    let mut kept: Vec<usize> = Vec::new();
    let mut q: Vec<nalgebra::DVector<f64>> = Vec::new();
    for i in 0..m.nrows() {
        let mut v = m.row(i).transpose();
        for _ in 0..2 {
            for b in &q {
                let p = b.dot(&v);
                v -= b * p;
            }
        }
        let nv = v.norm();
        if nv > 1e-9 * scale {
            q.push(v / nv);
            kept.push(i);
        }
    }
    kept
}

/// Largest distance from a unit-normalized column of `a` to the column span of `b`.
fn span_residual(a: &RealMatrix, b: &RealMatrix) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    if b.ncols() == 0 {
        return 1.0;
    }
    let qb = b.clone().svd(true, false);
    let u = qb.u.expect("u requested");
    let smax = qb.singular_values.max();
    let cols: Vec<_> = (0..b.ncols())
        .filter(|&k| qb.singular_values[k] > 1e-10 * smax)
        .map(|k| u.column(k).into_owned())
        .collect();
    let mut worst: f64 = 0.0;
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        let nv = v.norm();
        if nv == 0.0 {
            continue;
        }
        v /= nv;
        for qc in &cols {
            let p = qc.dot(&v);
            v -= qc * p;
        }
        worst = worst.max(v.norm());
    }
    worst
}

#[derive(Clone, Debug, PartialEq)]
pub struct PencilVar {
    /// `(i, j, k)`: independent block position and [`her_basis`] index.
    pub label: (usize, usize, usize),
    /// Diagonal of the `n² x n²` coefficient matrix.
    pub diag: Vec<f64>,
}

/// `L(y) = I_{n²} ⊗ I_s + Σ_v diag(B_v) ⊗ H_{k(v)} y_v` with `H` the Hermitian basis of `Her_s`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonicPencil {
    pub n: usize,
    pub s: usize,
    pub graph: String,
    pub vars: Vec<PencilVar>,
}

#[derive(Clone, Debug)]
pub struct PencilEvaluation {
    pub matrix: HermitianMatrix,
    pub min_eig: f64,
}

impl MonicPencil {
    pub fn from_affine(p: &AffineBlockParametrization) -> Self {
        let n = p.n;
        let nq = q(n as i64);
        let mut vars = Vec::with_capacity(p.scalar_parameter_count());
        for (col, &(i, j)) in p.independent.iter().enumerate() {
            let diag: Vec<f64> = (0..n * n).map(|kl| to_f64(&(&nq * &p.coeffs[(kl, col)]))).collect();
            for k in 0..p.s * p.s {
                vars.push(PencilVar {
                    label: (i, j, k),
                    diag: diag.clone(),
                });
            }
        }
        let graph = p.graph.as_ref().map_or_else(|| "none".to_string(), |g| g.graph.clone());
        Self { n, s: p.s, graph, vars }
    }

    pub fn outer(&self) -> usize {
        self.n * self.n
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn is_diagonal(&self) -> bool {
        // Stored as diagonals, so this holds by representation.
        self.vars.iter().all(|v| v.diag.len() == self.outer())
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.vars.len() {
            return Err(Error::Dimension(format!(
                "pencil has {} variables, got {} values",
                self.vars.len(),
                y.len()
            )));
        }
        Ok(())
    }

    /// The `s x s` diagonal block of `L(y)` at outer index `kl`.
    pub fn block(&self, y: &[f64], kl: usize, basis: &[HermitianMatrix]) -> HermitianMatrix {
        self.vars
            .iter()
            .zip(y)
            .fold(HermitianMatrix::identity(self.s), |acc, (v, &yv)| {
                let w = v.diag[kl] * yv;
                if w == 0.0 {
                    acc
                } else {
                    acc.axpy(w, &basis[v.label.2])
                }
            })
    }

    /// Minimum eigenvalue of `L(y)`, computed over its diagonal blocks.
    pub fn min_eig(&self, y: &[f64]) -> Result<f64> {
        self.check_len(y)?;
        let basis = her_basis(self.s);
        let mut lo = f64::INFINITY;
        for kl in 0..self.outer() {
            lo = lo.min(min_eig(&self.block(y, kl, &basis))?);
        }
        Ok(lo)
    }

    pub fn evaluate(&self, y: &[f64]) -> Result<PencilEvaluation> {
        self.check_len(y)?;
        let basis = her_basis(self.s);
        let dim = self.outer() * self.s;
        let mut m = ComplexMatrix::identity(dim, dim);
        for (v, &yv) in self.vars.iter().zip(y) {
            if yv == 0.0 {
                continue;
            }
            let b = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                self.outer(),
                v.diag.iter().map(|&x| num_complex::Complex64::new(x * yv, 0.0)),
            ));
            m += kron(&b, basis[v.label.2].matrix());
        }
        let matrix = HermitianMatrix::symmetrize(m);
        let min_eig = self.min_eig(y)?;
        Ok(PencilEvaluation { matrix, min_eig })
    }

    /// Evaluate at Hermitian block variables (one per independent position).
    pub fn evaluate_blocks(&self, y: &[HermitianMatrix]) -> Result<PencilEvaluation> {
        let flat: Vec<f64> = y.iter().flat_map(her_coordinates).collect();
        self.evaluate(&flat)
    }

    /// Real symmetric coefficient matrices as written to SDPA files; Hermitian
    /// pencils with `s >= 2` are real-embedded and double in size.
    pub fn sdpa_block_size(&self) -> usize {
        if self.s == 1 {
            self.outer()
        } else {
            2 * self.outer() * self.s
        }
    }

    fn sdpa_matrix(&self, v: &PencilVar, basis: &[HermitianMatrix]) -> RealMatrix {
        let b = ComplexMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            self.outer(),
            v.diag.iter().map(|&x| num_complex::Complex64::new(x, 0.0)),
        ));
        let full = kron(&b, basis[v.label.2].matrix());
        if self.s == 1 {
            full.map(|z| z.re)
        } else {
            embed_complex(&full)
        }
    }

    /// SDPA sparse text. Only the constant term and one block are written;
    /// the constant is `F0 = -I` so that `Σ y_i F_i - F0 ⪰ 0` is the pencil.
    pub fn to_sdpa(&self) -> String {
        let size = self.sdpa_block_size();
        let basis = her_basis(self.s);
        let mut out = String::new();
        let _ = writeln!(out, "*gqms-spectra pencil n={} s={} graph={}", self.n, self.s, self.graph);
        if self.s > 1 {
            let _ = writeln!(
                out,
                "*complex pencil real-embedded: block size 2*n^2*s = {size} (each eigenvalue appears twice)"
            );
        }
        let _ = writeln!(out, "*constant term F0 = -I; feasible set is sum_i y_i F_i - F0 >= 0");
        let _ = writeln!(out, "{}", self.vars.len());
        let _ = writeln!(out, "1");
        let _ = writeln!(out, "{size}");
        let zeros = vec!["0"; self.vars.len()].join(" ");
        let _ = writeln!(out, "{zeros}");
        for i in 1..=size {
            let _ = writeln!(out, "0 1 {i} {i} -1");
        }
        for (idx, v) in self.vars.iter().enumerate() {
            let m = self.sdpa_matrix(v, &basis);
            for i in 0..size {
                for j in i..size {
                    let x = m[(i, j)];
                    if x != 0.0 {
                        let _ = writeln!(out, "{} 1 {} {} {}", idx + 1, i + 1, j + 1, x);
                    }
                }
            }
        }
        out
    }

    pub fn export_sdpa(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_sdpa())?;
        Ok(())
    }

    pub fn to_json(&self) -> PencilJson {
        PencilJson {
            outer: self.outer(),
            s: Some(self.s),
            graph: Some(self.graph.clone()),
            vars: self
                .vars
                .iter()
                .map(|v| PencilVarJson {
                    label: [v.label.0, v.label.1, v.label.2],
                    diag: v.diag.clone(),
                })
                .collect(),
        }
    }

    pub fn export_json(&self, path: &Path) -> Result<()> {
        write_canonical(path, &self.to_json())
    }

    pub fn import_json(path: &Path) -> Result<Self> {
        let j: PencilJson = read_json(path)?;
        MonicPencil::try_from(&j)
    }
}

/// `{"outer": n², "s": s, "graph": name, "vars": [{"label": [i, j, k], "diag": [...]}]}`.
/// `s` and `graph` are optional on input; a missing `s` is inferred from
/// the largest basis label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilJson {
    pub outer: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    pub vars: Vec<PencilVarJson>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PencilVarJson {
    pub label: [usize; 3],
    pub diag: Vec<f64>,
}

impl TryFrom<&PencilJson> for MonicPencil {
    type Error = Error;

    fn try_from(j: &PencilJson) -> Result<Self> {
        let n = (j.outer as f64).sqrt().round() as usize;
        if n * n != j.outer {
            return Err(Error::Parse(format!("outer dimension {} is not a square", j.outer)));
        }
        let s = match j.s {
            Some(s) => s,
            None => {
                let k = j.vars.iter().map(|v| v.label[2] + 1).max().unwrap_or(1);
                let s = (k as f64).sqrt().round() as usize;
                if s * s != k {
                    return Err(Error::Parse(format!("cannot infer s from {k} basis labels")));
                }
                s
            }
        };
        let mut vars = Vec::with_capacity(j.vars.len());
        for v in &j.vars {
            if v.diag.len() != j.outer {
                return Err(Error::Parse(format!(
                    "variable {:?} has {} diagonal entries, expected {}",
                    v.label,
                    v.diag.len(),
                    j.outer
                )));
            }
            if v.label[2] >= s * s || v.label[0] >= n || v.label[1] >= n {
                return Err(Error::Parse(format!("label {:?} out of range", v.label)));
            }
            vars.push(PencilVar {
                label: (v.label[0], v.label[1], v.label[2]),
                diag: v.diag.clone(),
            });
        }
        Ok(MonicPencil {
            n,
            s,
            graph: j.graph.clone().unwrap_or_else(|| "none".into()),
            vars,
        })
    }
}

pub fn monic_qms_pencil(n: usize, s: usize) -> Result<MonicPencil> {
    Ok(MonicPencil::from_affine(&qms_affine(n, s)?))
}

pub fn monic_gqms_pencil(g: &Graph, s: usize) -> Result<MonicPencil> {
    Ok(MonicPencil::from_affine(&gqms_affine(g, s)?))
}

#[derive(Clone, Debug, Serialize)]
pub struct MembershipResult {
    /// Magic relations, commutation and blockwise PSD checked directly.
    pub direct: bool,
    /// Pencil route; `None` when the square is off the affine slice or no
    /// pencil exists for the graph.
    pub pencil: Option<bool>,
    pub affine_residual: f64,
    pub magic_residual: f64,
    pub commutation_residual: Option<f64>,
    pub min_block_eig: f64,
    pub pencil_min_eig: Option<f64>,
}

impl MembershipResult {
    pub fn affine_feasible(&self) -> bool {
        self.pencil.is_some()
    }

    pub fn routes_agree(&self) -> bool {
        self.pencil == Some(self.direct)
    }
}

/// A reusable two-route membership tester for `M^(n)_s` or `M^(G)_s`.
pub struct MembershipTester {
    graph: Option<Graph>,
    param: Option<AffineBlockParametrization>,
    pencil: Option<MonicPencil>,
    tol: f64,
}

impl MembershipTester {
    pub fn new(n: usize, s: usize, graph: Option<&Graph>, tol: f64) -> Result<Self> {
        if let Some(g) = graph {
            if g.n() != n {
                return Err(Error::Dimension(format!("graph has {} vertices, square has n = {n}", g.n())));
            }
        }
        let param = match graph {
            None if n >= 2 => Some(qms_affine(n, s)?),
            None => None,
            Some(g) if g.is_k_regular().is_some() => Some(gqms_affine(g, s)?),
            Some(_) => None,
        };
        let pencil = param.as_ref().map(MonicPencil::from_affine);
        Ok(Self {
            graph: graph.cloned(),
            param,
            pencil,
            tol,
        })
    }

    pub fn parametrization(&self) -> Option<&AffineBlockParametrization> {
        self.param.as_ref()
    }

    pub fn pencil(&self) -> Option<&MonicPencil> {
        self.pencil.as_ref()
    }

    pub fn test(&self, x: &BlockMatrix) -> Result<MembershipResult> {
        let report = verify_magic(x, self.tol)?;
        let commutation_residual = match &self.graph {
            Some(g) => Some(graph_commutation_residual(x, g)?),
            None => None,
        };
        let direct = report.overall && commutation_residual.is_none_or(|r| r <= self.tol);
        let (mut pencil, mut pencil_min_eig, mut affine_residual) = (None, None, f64::NAN);
        if let (Some(p), Some(l)) = (&self.param, &self.pencil) {
            let (y, r) = p.invert_scalar(x)?;
            affine_residual = r;
            if r <= AFFINE_TOL {
                let e = l.min_eig(&y)?;
                pencil_min_eig = Some(e);
                pencil = Some(e >= -self.tol);
            }
        }
        Ok(MembershipResult {
            direct,
            pencil,
            affine_residual,
            magic_residual: report.max_residual(),
            commutation_residual,
            min_block_eig: report.min_block_eig(),
            pencil_min_eig,
        })
    }
}

pub fn membership_test(x: &BlockMatrix, graph: Option<&Graph>, tol: f64) -> Result<MembershipResult> {
    MembershipTester::new(x.n(), x.s(), graph, tol)?.test(x)
}

/// `A_0 + (1/n) Σ A_ij = (1/n) I` for the plain pencil of size `n`, exactly.
pub fn monic_identity_exact(n: usize) -> bool {
    QmsCoefficients::new(n).monic_identity_holds()
}
