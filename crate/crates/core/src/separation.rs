//! Separating quantum magic squares from the matrix convex hull of quantum
//! permutation matrices.
//!
//! For a square `A` of size `n >= 3` set `M = φ(A) + ψ(A)`. If `A` lies in
//! the matrix convex hull of quantum permutation matrices then `M + X ⪰ 0`
//! for some `X` in `S = (Z_e ⊗ Z_e ⊗ Mat_s)_her`. A trace-one PSD `Y` that is
//! orthogonal to `S` and has `Tr(Y M) < 0` therefore refutes membership.
//! Such a `Y` is found by solving
//!
//! ```text
//!   min Tr(Y M)  s.t.  Y ⪰ 0,  Tr Y = 1,  Tr(Y Z) = 0 for Z in a spanning family of S
//! ```
//!
//! through the real embedding, and is then re-checked by plain arithmetic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{c4_rotations, Graph};
use crate::json::MatrixJson;
use crate::linalg::{eig_herm, her_basis, herm_fn, min_eig, ComplexMatrix, HermitianMatrix};
use crate::magic::{
    graph_commutation_residual, group_average, random_qms_rank, sinkhorn, verify_magic, BlockMatrix, BlockMatrixJson,
    SINKHORN_MAX_SWEEPS, SINKHORN_TOL,
};
use crate::pencil::{gqms_affine, qms_affine};
use crate::rational::{q, to_f64, QMatrix, Q};
use crate::sdp::{solve_with, SdpOptions, SdpProblem, SdpStatus, SymSparse};

/// Structural tolerance for certificates: trace, PSD-ness and orthogonality.
pub const CERT_TOL: f64 = 1e-9;
/// A validated objective at or below this refutes membership.
pub const CERT_THRESHOLD: f64 = -1e-6;
/// Allowed gap between the solver's objective and the recomputed one.
pub const OBJECTIVE_MATCH_TOL: f64 = 1e-8;
/// `M + X` counts as PSD down to this eigenvalue.
pub const PRIMAL_TOL: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeVariant {
    /// `diag Z = 0`, `Z 1 = 0`.
    RowOnly,
    /// `diag Z = 0`, `Z 1 = 0`, `Z* 1 = 0`.
    RowAndCol,
}

impl fmt::Display for ZeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ZeVariant::RowOnly => "row_only",
            ZeVariant::RowAndCol => "row_and_col",
        })
    }
}

impl FromStr for ZeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "row_only" => Ok(ZeVariant::RowOnly),
            "row_and_col" => Ok(ZeVariant::RowAndCol),
            other => Err(Error::Parse(format!("unknown Z_e variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ZeBasis {
    pub n: usize,
    pub variant: ZeVariant,
    pub basis: Vec<ComplexMatrix>,
    pub dimension: usize,
    /// True when the basis is the fixed integer basis for `n = 4`.
    pub hard_coded: bool,
}

/// The five Hermitian integer matrices spanning `Z_e` at `n = 4` with both
/// row and column sums zero.
pub fn ze4_reference_basis() -> Vec<ComplexMatrix> {
    let re = |v: [i8; 16]| ComplexMatrix::from_fn(4, 4, |r, c| Complex64::new(v[r * 4 + c] as f64, 0.0));
    let im = |v: [i8; 16]| ComplexMatrix::from_fn(4, 4, |r, c| Complex64::new(0.0, v[r * 4 + c] as f64));
    vec![
        re([0, 1, 0, -1, 1, 0, -1, 0, 0, -1, 0, 1, -1, 0, 1, 0]),
        im([0, 1, 0, -1, -1, 0, 0, 1, 0, 0, 0, 0, 1, -1, 0, 0]),
        re([0, 0, 1, -1, 0, 0, -1, 1, 1, -1, 0, 0, -1, 1, 0, 0]),
        im([0, 0, 1, -1, 0, 0, 0, 0, -1, 0, 0, 1, 1, 0, -1, 0]),
        im([0, 0, 0, 0, 0, 0, 1, -1, 0, -1, 0, 1, 0, 1, -1, 0]),
    ]
}

/// Linear constraints defining `Z_e` on `vec(Z)` (row-major, index `i n + j`).
fn ze_constraints(n: usize, variant: ZeVariant) -> QMatrix {
    let mut rows: Vec<Vec<Q>> = Vec::new();
    let zero_row = || vec![Q::zero(); n * n];
    for i in 0..n {
        let mut d = zero_row();
        d[i * n + i] = Q::one();
        rows.push(d);
        let mut r = zero_row();
        for j in 0..n {
            r[i * n + j] = Q::one();
        }
        rows.push(r);
        if variant == ZeVariant::RowAndCol {
            let mut c = zero_row();
            for k in 0..n {
                c[k * n + i] = Q::one();
            }
            rows.push(c);
        }
    }
    let cols = n * n;
    QMatrix {
        rows: rows.len(),
        cols,
        data: rows.into_iter().flatten().collect(),
    }
}

/// Exact rational kernel basis of the `Z_e` constraints. The constraints are
/// real, so this real basis also spans the complex space.
pub fn ze_nullspace(n: usize, variant: ZeVariant) -> Vec<ComplexMatrix> {
    let k = ze_constraints(n, variant).nullspace();
    (0..k.cols)
        .map(|c| ComplexMatrix::from_fn(n, n, |i, j| Complex64::new(to_f64(&k[(i * n + j, c)]), 0.0)))
        .collect()
}

fn vec_of(m: &ComplexMatrix) -> DVector<Complex64> {
    DVector::from_iterator(m.len(), m.transpose().iter().cloned())
}

/// Orthonormalize with two passes of modified Gram-Schmidt, dropping
/// vectors that fall below `drop_tol` relative to their original norm.
fn orthonormalize_complex(vs: &[DVector<Complex64>], drop_tol: f64) -> Vec<DVector<Complex64>> {
    let mut out: Vec<DVector<Complex64>> = Vec::new();
    for v in vs {
        let n0 = v.norm();
        if n0 == 0.0 {
            continue;
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let p = q.dotc(&w);
                w -= q * p;
            }
        }
        let nw = w.norm();
        if nw > drop_tol * n0 {
            out.push(w / Complex64::new(nw, 0.0));
        }
    }
    out
}

/// Largest distance from a unit-normalized element of either family to the
/// span of the other.
pub fn mutual_span_residual(a: &[ComplexMatrix], b: &[ComplexMatrix]) -> f64 {
    let one_way = |x: &[ComplexMatrix], y: &[ComplexMatrix]| -> f64 {
        let qs = orthonormalize_complex(&y.iter().map(vec_of).collect::<Vec<_>>(), 1e-12);
        x.iter()
            .map(|m| {
                let v = vec_of(m);
                let nv = v.norm();
                if nv == 0.0 {
                    return 0.0;
                }
                let mut r = v.clone();
                for q in &qs {
                    let p = q.dotc(&r);
                    r -= q * p;
                }
                r.norm() / nv
            })
            .fold(0.0, f64::max)
    };
    one_way(a, b).max(one_way(b, a))
}

pub fn ze_basis(n: usize, variant: ZeVariant) -> Result<ZeBasis> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("Z_e is only used for n >= 3, got {n}")));
    }
    let computed = ze_nullspace(n, variant);
    if n == 4 && variant == ZeVariant::RowAndCol {
        let fixed = ze4_reference_basis();
        let res = mutual_span_residual(&fixed, &computed);
        if fixed.len() != computed.len() || res > 1e-10 {
            return Err(Error::RankMismatch(format!(
                "reference Z_e basis ({} elements) and kernel ({} elements) disagree, residual {res:e}",
                fixed.len(),
                computed.len()
            )));
        }
        return Ok(ZeBasis {
            n,
            variant,
            dimension: fixed.len(),
            basis: fixed,
            hard_coded: true,
        });
    }
    Ok(ZeBasis {
        n,
        variant,
        dimension: computed.len(),
        basis: computed,
        hard_coded: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Part {
    /// `Y + Y*`
    C,
    /// `i (Y - Y*)`
    D,
}

/// Generator `z_a ⊗ z_b ⊗ S_j` and which Hermitian part was taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SpanLabel {
    pub a: usize,
    pub b: usize,
    pub j: usize,
    pub part: Part,
}

/// A sparse Hermitian matrix with all nonzero entries listed (both triangles).
#[derive(Clone, Debug)]
pub struct SpanElement {
    pub label: SpanLabel,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SpanElement {
    pub fn to_matrix(&self, dim: usize) -> HermitianMatrix {
        let mut m = ComplexMatrix::zeros(dim, dim);
        for &(r, c, z) in &self.entries {
            m[(r, c)] = z;
        }
        HermitianMatrix::symmetrize(m)
    }

    /// `Tr(Z Y)`; real for Hermitian `Y`.
    pub fn pair(&self, y: &ComplexMatrix) -> f64 {
        self.entries.iter().map(|&(r, c, z)| (z * y[(c, r)]).re).sum()
    }

    /// The real embedding as sparse upper-triangle entries of one block.
    fn embedded(&self, dim: usize) -> SymSparse {
        let mut out = Vec::with_capacity(self.entries.len() * 2);
        for &(r, c, z) in &self.entries {
            for (i, j, v) in [(r, c, z.re), (r + dim, c + dim, z.re), (r, c + dim, -z.im), (r + dim, c, z.im)] {
                if i <= j && v != 0.0 {
                    out.push((0, i, j, v));
                }
            }
        }
        SymSparse::from_entries(out)
    }
}

#[derive(Clone, Debug)]
pub struct SeparationSubspaceBasis {
    pub n: usize,
    pub s: usize,
    pub variant: ZeVariant,
    pub elements: Vec<SpanElement>,
    /// Generators whose Hermitian part vanished.
    pub dropped: Vec<SpanLabel>,
}

impl SeparationSubspaceBasis {
    pub fn dim(&self) -> usize {
        self.n * self.n * self.s
    }

    pub fn max_residual(&self, y: &ComplexMatrix) -> f64 {
        self.elements.iter().map(|e| e.pair(y).abs()).fold(0.0, f64::max)
    }

    /// `Σ_k c_k Z_k`.
    pub fn combine(&self, coeffs: &[f64]) -> HermitianMatrix {
        let d = self.dim();
        let mut m = ComplexMatrix::zeros(d, d);
        for (e, &c) in self.elements.iter().zip(coeffs) {
            if c != 0.0 {
                for &(r, col, z) in &e.entries {
                    m[(r, col)] += z * c;
                }
            }
        }
        HermitianMatrix::symmetrize(m)
    }
}

fn sparse_entries(m: &ComplexMatrix) -> Vec<(usize, usize, Complex64)> {
    let mut out = Vec::new();
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let z = m[(r, c)];
            if z.norm() > 1e-14 {
                out.push((r, c, z));
            }
        }
    }
    out
}

/// Spanning family `{C_{a,b,j}, D_{a,b,j}}` of `S`, generators ordered
/// `(a, b, j)` lexicographically with `C` before `D`.
pub fn subspace_basis(n: usize, s: usize, variant: ZeVariant) -> Result<SeparationSubspaceBasis> {
    if s == 0 {
        return Err(Error::InvalidInput("s must be positive".into()));
    }
    let ze = ze_basis(n, variant)?;
    let zs: Vec<_> = ze.basis.iter().map(sparse_entries).collect();
    let ss: Vec<_> = her_basis(s).iter().map(|h| sparse_entries(h.matrix())).collect();
    let mut elements = Vec::new();
    let mut dropped = Vec::new();
    for (a, za) in zs.iter().enumerate() {
        for (b, zb) in zs.iter().enumerate() {
            for (j, sj) in ss.iter().enumerate() {
                // Y and Y* accumulated into the two Hermitian parts.
                let mut c_map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
                let mut d_map: BTreeMap<(usize, usize), Complex64> = BTreeMap::new();
                for &(r1, c1, v1) in za {
                    for &(r2, c2, v2) in zb {
                        for &(r3, c3, v3) in sj {
                            let row = (r1 * n + r2) * s + r3;
                            let col = (c1 * n + c2) * s + c3;
                            let v = v1 * v2 * v3;
                            *c_map.entry((row, col)).or_default() += v;
                            *c_map.entry((col, row)).or_default() += v.conj();
                            *d_map.entry((row, col)).or_default() += Complex64::i() * v;
                            *d_map.entry((col, row)).or_default() += -Complex64::i() * v.conj();
                        }
                    }
                }
                for (part, map) in [(Part::C, c_map), (Part::D, d_map)] {
                    let label = SpanLabel { a, b, j, part };
                    let entries: Vec<_> = map
                        .into_iter()
                        .filter(|(_, z)| z.norm() > 1e-14)
                        .map(|((r, c), z)| (r, c, z))
                        .collect();
                    if entries.is_empty() {
                        dropped.push(label);
                    } else {
                        elements.push(SpanElement { label, entries });
                    }
                }
            }
        }
    }
    Ok(SeparationSubspaceBasis {
        n,
        s,
        variant,
        elements,
        dropped,
    })
}

/// `col(A) = Σ e_i ⊗ e_j ⊗ A_ij`, an `n² s x s` stack of blocks in
/// lexicographic `(i, j)` order.
pub fn col_map(a: &BlockMatrix) -> ComplexMatrix {
    let (n, s) = (a.n(), a.s());
    let mut out = ComplexMatrix::zeros(n * n * s, s);
    for i in 0..n {
        for j in 0..n {
            out.view_mut(((i * n + j) * s, 0), (s, s)).copy_from(a.block(i, j).matrix());
        }
    }
    out
}

/// `diag(A) = Σ E_ii ⊗ E_jj ⊗ A_ij`.
pub fn diag_map(a: &BlockMatrix) -> HermitianMatrix {
    let (n, s) = (a.n(), a.s());
    let d = n * n * s;
    let mut out = ComplexMatrix::zeros(d, d);
    for i in 0..n {
        for j in 0..n {
            let o = (i * n + j) * s;
            out.view_mut((o, o), (s, s)).copy_from(a.block(i, j).matrix());
        }
    }
    HermitianMatrix::symmetrize(out)
}

/// `φ(A) = diag(A) - col(A) col(A)*`.
pub fn phi(a: &BlockMatrix) -> HermitianMatrix {
    let c = col_map(a);
    let cc = &c * c.adjoint();
    HermitianMatrix::symmetrize(diag_map(a).matrix() - cc)
}

/// Exact coefficients of `ψ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiCoefficients {
    pub alpha: Q,
    pub beta: Q,
    pub gamma: Q,
}

impl PsiCoefficients {
    pub fn new(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("ψ needs n >= 3, got {n}")));
        }
        let n = q(n as i64);
        let one = Q::one();
        let two = q(2);
        Ok(Self {
            alpha: &one / ((&n - &one) * (&n - &two)),
            beta: (&n - &one) / (&n * (&n - &two)),
            gamma: &one / (&n * (&n - &two)),
        })
    }

    pub fn to_f64(&self) -> (f64, f64, f64) {
        (to_f64(&self.alpha), to_f64(&self.beta), to_f64(&self.gamma))
    }
}

/// `ψ(A) = Σ_{i≠j, k≠l} E_ij ⊗ E_kl ⊗ (-α I + β A_ik + β A_jl + γ A_il + γ A_jk)`.
pub fn psi(a: &BlockMatrix) -> Result<HermitianMatrix> {
    let (n, s) = (a.n(), a.s());
    let (al, be, ga) = PsiCoefficients::new(n)?.to_f64();
    let d = n * n * s;
    let mut out = ComplexMatrix::zeros(d, d);
    let id = HermitianMatrix::identity(s);
    for i in 0..n {
        for j in (0..n).filter(|&j| j != i) {
            for k in 0..n {
                for l in (0..n).filter(|&l| l != k) {
                    let blk = id
                        .scale(-al)
                        .axpy(be, a.block(i, k))
                        .axpy(be, a.block(j, l))
                        .axpy(ga, a.block(i, l))
                        .axpy(ga, a.block(j, k));
                    out.view_mut(((i * n + k) * s, (j * n + l) * s), (s, s)).copy_from(blk.matrix());
                }
            }
        }
    }
    Ok(HermitianMatrix::symmetrize(out))
}

#[derive(Clone, Debug)]
pub struct SeparationOperator {
    pub m: HermitianMatrix,
    pub phi: HermitianMatrix,
    pub psi: HermitianMatrix,
    pub coefficients: PsiCoefficients,
}

pub fn separation_operator(a: &BlockMatrix) -> Result<SeparationOperator> {
    let coefficients = PsiCoefficients::new(a.n())?;
    let ph = phi(a);
    let ps = psi(a)?;
    Ok(SeparationOperator {
        m: ph.add(&ps),
        phi: ph,
        psi: ps,
        coefficients,
    })
}

/// Quantities recomputed from `Y`, `M` and the spanning family alone.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateCheck {
    pub objective: f64,
    pub min_eig: f64,
    pub trace: f64,
    pub max_residual: f64,
}

impl CertificateCheck {
    pub fn structure_ok(&self) -> bool {
        self.min_eig >= -CERT_TOL && (self.trace - 1.0).abs() <= CERT_TOL && self.max_residual <= CERT_TOL
    }
}

/// Solver-free check: eigenvalues via `eig_herm`, traces by direct summation.
pub fn check_certificate(y: &HermitianMatrix, m: &HermitianMatrix, family: &SeparationSubspaceBasis) -> Result<CertificateCheck> {
    if y.dim() != m.dim() || y.dim() != family.dim() {
        return Err(Error::Dimension(format!(
            "certificate of size {} against operator of size {} and family of size {}",
            y.dim(),
            m.dim(),
            family.dim()
        )));
    }
    let (spec, _) = eig_herm(y)?;
    let d = y.dim();
    let ym = y.matrix();
    let mut objective = 0.0;
    for r in 0..d {
        for c in 0..d {
            objective += (ym[(r, c)] * m.matrix()[(c, r)]).re;
        }
    }
    let trace = (0..d).map(|r| ym[(r, r)].re).sum();
    Ok(CertificateCheck {
        objective,
        min_eig: spec.min(),
        trace,
        max_residual: family.max_residual(ym),
    })
}

#[derive(Clone, Debug)]
pub struct DualCertificate {
    pub y: HermitianMatrix,
    /// `Tr(Y M)` recomputed from the polished `Y`.
    pub objective: f64,
    pub solver_objective: f64,
    pub min_eig: f64,
    pub trace: f64,
    pub max_residual: f64,
    pub validated: bool,
    pub status: SdpStatus,
    pub iterations: usize,
    /// Frobenius distance between the solver's `Y` and the polished one.
    pub polish_shift: f64,
}

impl DualCertificate {
    /// Validated and negative enough to refute membership.
    pub fn separates(&self) -> bool {
        self.validated && self.objective <= CERT_THRESHOLD
    }

    pub fn check(&self) -> CertificateCheck {
        CertificateCheck {
            objective: self.objective,
            min_eig: self.min_eig,
            trace: self.trace,
            max_residual: self.max_residual,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum FeasibilityStatus {
    /// A witness `X ∈ S` with `M + X ⪰ -PRIMAL_TOL` was found.
    Feasible,
    /// A validated dual certificate refutes feasibility.
    Infeasible,
    /// Neither outcome could be established (solver trouble or a borderline value).
    Undetermined,
}

#[derive(Clone, Debug)]
pub struct PrimalFeasibility {
    pub status: FeasibilityStatus,
    pub witness: HermitianMatrix,
    /// `λ_min(M + X)`, computed directly.
    pub min_eig: f64,
    pub certificate: DualCertificate,
}

/// Spanning family, its embedded constraints and an orthonormal basis for
/// polishing, built once per `(n, s, variant)`.
pub struct SeparationContext {
    family: SeparationSubspaceBasis,
    constraints: Vec<SymSparse>,
    orthonormal: Vec<DVector<f64>>,
    options: SdpOptions,
}

fn her_vec(m: &ComplexMatrix) -> DVector<f64> {
    let d = m.nrows();
    let mut v = DVector::zeros(2 * d * d);
    for r in 0..d {
        for c in 0..d {
            v[2 * (r * d + c)] = m[(r, c)].re;
            v[2 * (r * d + c) + 1] = m[(r, c)].im;
        }
    }
    v
}

impl SeparationContext {
    pub fn new(n: usize, s: usize, variant: ZeVariant) -> Result<Self> {
        let family = subspace_basis(n, s, variant)?;
        let d = family.dim();
        let constraints = family.elements.iter().map(|e| e.embedded(d)).collect();
        let mut orthonormal: Vec<DVector<f64>> = Vec::new();
        for e in &family.elements {
            let v = her_vec(e.to_matrix(d).matrix());
            let n0 = v.norm();
            let mut w = v;
            for _ in 0..2 {
                for q in &orthonormal {
                    let p = q.dot(&w);
                    w.axpy(-p, q, 1.0);
                }
            }
            let nw = w.norm();
            if nw > 1e-9 * n0 {
                orthonormal.push(w / nw);
            }
        }
        Ok(Self {
            family,
            constraints,
            orthonormal,
            options: SdpOptions::default(),
        })
    }

    pub fn family(&self) -> &SeparationSubspaceBasis {
        &self.family
    }

    /// Real dimension of the span of the family.
    pub fn span_dimension(&self) -> usize {
        self.orthonormal.len()
    }

    fn check_square(&self, a: &BlockMatrix) -> Result<()> {
        if a.n() != self.family.n || a.s() != self.family.s {
            return Err(Error::Dimension(format!(
                "square with n = {}, s = {} against a context for n = {}, s = {}",
                a.n(),
                a.s(),
                self.family.n,
                self.family.s
            )));
        }
        Ok(())
    }

    /// The embedded problem: constraint 0 is the trace, constraint `k + 1`
    /// is orthogonality to family element `k`.
    pub fn problem(&self, m: &HermitianMatrix) -> SdpProblem {
        let d = self.family.dim();
        let emb = crate::linalg::embed_complex(m.matrix());
        let mut p = SdpProblem::new(vec![2 * d]);
        p.c = SymSparse::from_dense(0, &emb);
        p.add_constraint(SymSparse::identity(&[2 * d]), 1.0);
        for c in &self.constraints {
            p.add_constraint(c.clone(), 0.0);
        }
        p
    }

    /// Project onto `{Tr Y = 1, Y ⊥ S}` exactly, then mix with `I/N` just
    /// enough to restore PSD-ness. `I/N` satisfies the affine conditions
    /// because every element of `S` is traceless.
    fn polish(&self, y: &HermitianMatrix) -> Result<HermitianMatrix> {
        let d = y.dim();
        let mut v = her_vec(y.matrix());
        for q in &self.orthonormal {
            let p = q.dot(&v);
            v.axpy(-p, q, 1.0);
        }
        let mut m = ComplexMatrix::from_fn(d, d, |r, c| Complex64::new(v[2 * (r * d + c)], v[2 * (r * d + c) + 1]));
        let tr: f64 = (0..d).map(|r| m[(r, r)].re).sum();
        let shift = (1.0 - tr) / d as f64;
        for r in 0..d {
            m[(r, r)] += shift;
        }
        let mut out = HermitianMatrix::symmetrize(m);
        let lo = min_eig(&out)?;
        if lo < 0.0 {
            let inv = 1.0 / d as f64;
            let t = -lo / (inv - lo);
            out = out.scale(1.0 - t).add(&HermitianMatrix::scaled_identity(d, t * inv));
        }
        Ok(out)
    }

    fn certificate_from(&self, m: &HermitianMatrix, sol: &crate::sdp::SdpSolution) -> Result<DualCertificate> {
        let d = self.family.dim();
        let yh = &sol.primal[0];
        let y_raw = HermitianMatrix::symmetrize(ComplexMatrix::from_fn(d, d, |r, c| {
            Complex64::new(yh[(r, c)] + yh[(r + d, c + d)], yh[(r + d, c)] - yh[(c + d, r)])
        }));
        let y = self.polish(&y_raw)?;
        let chk = check_certificate(&y, m, &self.family)?;
        let validated = sol.status == SdpStatus::Optimal
            && chk.structure_ok()
            && (chk.objective - sol.objective).abs() <= OBJECTIVE_MATCH_TOL;
        Ok(DualCertificate {
            polish_shift: y.sub(&y_raw).fro(),
            y,
            objective: chk.objective,
            solver_objective: sol.objective,
            min_eig: chk.min_eig,
            trace: chk.trace,
            max_residual: chk.max_residual,
            validated,
            status: sol.status,
            iterations: sol.iterations,
        })
    }

    pub fn dual_certificate(&self, a: &BlockMatrix) -> Result<DualCertificate> {
        self.check_square(a)?;
        let op = separation_operator(a)?;
        let sol = solve_with(&self.problem(&op.m), &self.options)?;
        self.certificate_from(&op.m, &sol)
    }

    /// Witness from the dual multipliers of the certificate problem:
    /// `M - t I - Σ y_k Z_k ⪰ 0`, so `X = -Σ y_k Z_k` gives `M + X ⪰ t I`.
    pub fn primal_feasibility(&self, a: &BlockMatrix) -> Result<PrimalFeasibility> {
        self.check_square(a)?;
        let op = separation_operator(a)?;
        let sol = solve_with(&self.problem(&op.m), &self.options)?;
        let certificate = self.certificate_from(&op.m, &sol)?;
        let coeffs: Vec<f64> = sol.dual[1..].iter().map(|v| -v).collect();
        let witness = self.family.combine(&coeffs);
        let lo = min_eig(&op.m.add(&witness))?;
        let status = if sol.status == SdpStatus::Optimal && lo >= -PRIMAL_TOL {
            FeasibilityStatus::Feasible
        } else if certificate.separates() {
            FeasibilityStatus::Infeasible
        } else {
            FeasibilityStatus::Undetermined
        };
        Ok(PrimalFeasibility {
            status,
            witness,
            min_eig: lo,
            certificate,
        })
    }
}

pub fn dual_certificate(a: &BlockMatrix, variant: ZeVariant) -> Result<DualCertificate> {
    SeparationContext::new(a.n(), a.s(), variant)?.dual_certificate(a)
}

pub fn primal_feasibility(a: &BlockMatrix, variant: ZeVariant) -> Result<PrimalFeasibility> {
    SeparationContext::new(a.n(), a.s(), variant)?.primal_feasibility(a)
}

#[derive(Clone, Debug)]
pub struct SearchOptions {
    pub budget: usize,
    pub seed: u64,
    pub jobs: usize,
    pub s: usize,
    pub variant: ZeVariant,
    /// Rank of the Gaussian factors of each sample (`s` for full rank).
    pub rank: usize,
    /// Average each sample over the rotations of the 4-cycle.
    pub average: bool,
    /// Coordinate perturbation steps per candidate in the affine parameter space.
    pub refine_steps: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            budget: 5000,
            seed: 42,
            jobs: 1,
            s: 2,
            variant: ZeVariant::RowOnly,
            rank: 2,
            average: true,
            refine_steps: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CandidateRecord {
    pub index: usize,
    pub seed: u64,
    /// Best validated objective, `None` when no certificate validated.
    pub objective: Option<f64>,
    pub rejected: Option<String>,
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub b: BlockMatrix,
    pub certificate: DualCertificate,
    pub index: usize,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct SearchReport {
    pub accepted: Option<Counterexample>,
    pub candidates: Vec<CandidateRecord>,
}

impl SearchReport {
    pub fn best(&self) -> Option<(usize, f64)> {
        self.candidates
            .iter()
            .filter_map(|c| c.objective.map(|o| (c.index, o)))
            .fold(None, |acc: Option<(usize, f64)>, x| match acc {
                Some(a) if a.1 <= x.1 => Some(a),
                _ => Some(x),
            })
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.candidates.iter().map(|c| c.seed).collect()
    }
}

/// SplitMix64 finalizer over `(master, index)`.
pub fn candidate_seed(master: u64, index: usize) -> u64 {
    let mut z = master ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Evaluated {
    record: CandidateRecord,
    best: Option<(BlockMatrix, DualCertificate)>,
}

fn membership_gate(b: &BlockMatrix, c4: Option<&Graph>) -> Result<Option<String>> {
    let rep = verify_magic(b, CERT_TOL)?;
    if !rep.overall {
        return Ok(Some(format!("not a quantum magic square (residual {:e})", rep.max_residual())));
    }
    if let Some(g) = c4 {
        let r = graph_commutation_residual(b, g)?;
        if r > CERT_TOL {
            return Ok(Some(format!("does not commute with C4 (residual {r:e})")));
        }
    }
    Ok(None)
}

/// Clip negative eigenvalues, rescale, and re-average.
fn repair(b: &BlockMatrix, average: bool) -> Result<BlockMatrix> {
    let clipped = b.map(|h| herm_fn(h, |x| x.max(0.0)).unwrap_or_else(|_| h.clone()));
    let (scaled, _) = sinkhorn(&clipped, SINKHORN_TOL, SINKHORN_MAX_SWEEPS)?;
    if average {
        group_average(&scaled, &c4_rotations())
    } else {
        Ok(scaled)
    }
}

fn evaluate_candidate(ctx: &SeparationContext, opts: &SearchOptions, index: usize) -> Result<Evaluated> {
    use rand::{Rng, SeedableRng};
    let seed = candidate_seed(opts.seed, index);
    let c4 = Graph::cycle(4)?;
    let graph = opts.average.then_some(&c4);
    let mut record = CandidateRecord {
        index,
        seed,
        objective: None,
        rejected: None,
    };
    let a = random_qms_rank(4, opts.s, opts.rank.min(opts.s), seed)?;
    let b = if opts.average { group_average(&a, &c4_rotations())? } else { a };
    if let Some(why) = membership_gate(&b, graph)? {
        record.rejected = Some(why);
        return Ok(Evaluated { record, best: None });
    }
    let cert = ctx.dual_certificate(&b)?;
    let mut best = cert.validated.then(|| (b.clone(), cert));
    if opts.refine_steps > 0 {
        let par = match graph {
            Some(g) => gqms_affine(g, opts.s)?,
            None => qms_affine(4, opts.s)?,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let start = best.as_ref().map(|x| x.0.clone()).unwrap_or(b);
        let (mut y, _) = par.invert_scalar(&start)?;
        for step in 0..opts.refine_steps {
            let k = step % y.len();
            let mut trial = y.clone();
            trial[k] += rng.gen_range(-0.05..0.05);
            let Ok(raw) = par.evaluate_scalar(&trial) else { continue };
            let Ok(cand) = repair(&raw, opts.average) else { continue };
            if membership_gate(&cand, graph)?.is_some() {
                continue;
            }
            let c = ctx.dual_certificate(&cand)?;
            let better = c.validated && best.as_ref().is_none_or(|(_, bc)| c.objective < bc.objective);
            if better {
                y = par.invert_scalar(&cand)?.0;
                best = Some((cand, c));
            }
        }
    }
    record.objective = best.as_ref().map(|(_, c)| c.objective);
    Ok(Evaluated { record, best })
}

/// Sample, average, gate, certify. Candidates are evaluated in rounds of
/// `jobs`; the first accepted candidate by index wins, so the outcome does
/// not depend on `jobs`.
pub fn counterexample_search(opts: &SearchOptions) -> Result<SearchReport> {
    if opts.budget == 0 {
        return Err(Error::InvalidInput("budget must be at least 1".into()));
    }
    let ctx = SeparationContext::new(4, opts.s, opts.variant)?;
    let jobs = opts.jobs.max(1);
    let mut report = SearchReport {
        accepted: None,
        candidates: Vec::new(),
    };
    let mut start = 0;
    while start < opts.budget {
        let end = (start + jobs).min(opts.budget);
        let results: Vec<Result<Evaluated>> = if jobs == 1 {
            vec![evaluate_candidate(&ctx, opts, start)]
        } else {
            std::thread::scope(|sc| {
                let handles: Vec<_> = (start..end)
                    .map(|i| {
                        let ctx = &ctx;
                        sc.spawn(move || evaluate_candidate(ctx, opts, i))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or_else(|_| Err(Error::Sdp("worker panicked".into()))))
                    .collect()
            })
        };
        for r in results {
            let ev = r?;
            let accept = ev.best.as_ref().is_some_and(|(_, c)| c.separates());
            if accept && report.accepted.is_none() {
                let (b, certificate) = ev.best.clone().expect("accepted candidate has a certificate");
                report.accepted = Some(Counterexample {
                    b,
                    certificate,
                    index: ev.record.index,
                    seed: ev.record.seed,
                });
            }
            log::info!(
                "candidate {} seed {} objective {:?}",
                ev.record.index,
                ev.record.seed,
                ev.record.objective
            );
            report.candidates.push(ev.record);
        }
        if report.accepted.is_some() {
            break;
        }
        start = end;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualsJson {
    pub trace: f64,
    pub min_eig: f64,
    pub orthogonality: f64,
}

/// The reproducibility artifact for a separating certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateJson {
    #[serde(rename = "B")]
    pub b: BlockMatrixJson,
    #[serde(rename = "Y")]
    pub y: MatrixJson,
    pub objective: f64,
    pub residuals: ResidualsJson,
    pub variant: ZeVariant,
    pub seed: u64,
    pub candidate_index: usize,
    /// Graph the square must commute with, `null` for a plain square.
    pub graph: Option<String>,
}

impl CertificateJson {
    pub fn new(cx: &Counterexample, variant: ZeVariant, graph: Option<&Graph>) -> Self {
        let c = &cx.certificate;
        Self {
            b: cx.b.to_json(),
            y: MatrixJson::from(c.y.matrix()),
            objective: c.objective,
            residuals: ResidualsJson {
                trace: (c.trace - 1.0).abs(),
                min_eig: c.min_eig,
                orthogonality: c.max_residual,
            },
            variant,
            seed: cx.seed,
            candidate_index: cx.index,
            graph: graph.map(|g| g.name().to_string()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CertificateVerdict {
    pub check: Option<CertificateCheck>,
    pub valid: bool,
    pub reasons: Vec<String>,
}

/// Re-validate a certificate file with arithmetic only.
pub fn verify_certificate_json(j: &CertificateJson) -> Result<CertificateVerdict> {
    let mut reasons = Vec::new();
    let b = BlockMatrix::try_from(&j.b)?;
    if let Some(why) = membership_gate(&b, None)? {
        reasons.push(why);
    }
    if let Some(name) = &j.graph {
        let g: Graph = name.parse()?;
        let r = graph_commutation_residual(&b, &g)?;
        if r > CERT_TOL {
            reasons.push(format!("square does not commute with {name} (residual {r:e})"));
        }
    }
    let ym = ComplexMatrix::try_from(&j.y)?;
    let y = HermitianMatrix::new(ym)?;
    if y.deviation() > 1e-12 {
        reasons.push(format!("Y is not Hermitian (deviation {:e})", y.deviation()));
    }
    let family = subspace_basis(b.n(), b.s(), j.variant)?;
    let m = separation_operator(&b)?.m;
    let check = check_certificate(&y, &m, &family)?;
    if !check.structure_ok() {
        reasons.push(format!(
            "Y fails structure checks (min eig {:e}, trace {}, orthogonality {:e})",
            check.min_eig, check.trace, check.max_residual
        ));
    }
    if (check.objective - j.objective).abs() > OBJECTIVE_MATCH_TOL {
        reasons.push(format!(
            "recorded objective {} differs from recomputed {}",
            j.objective, check.objective
        ));
    }
    if check.objective > CERT_THRESHOLD {
        reasons.push(format!("objective {} does not reach {CERT_THRESHOLD}", check.objective));
    }
    Ok(CertificateVerdict {
        check: Some(check),
        valid: reasons.is_empty(),
        reasons,
    })
}
