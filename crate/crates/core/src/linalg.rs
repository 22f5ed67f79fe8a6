//! Dense complex and Hermitian matrix kernels.
//!
//! Hermitian eigenproblems go through the real embedding
//! `H -> [[Re H, -Im H], [Im H, Re H]]` and a real symmetric eigensolver
//! (Householder tridiagonalization followed by implicit QR). The embedding
//! doubles every eigenvalue; [`eig_herm`] folds the doubled spectrum back and
//! extracts one complex orthonormal eigenbasis per eigenvalue cluster.

use nalgebra::{DMatrix, DVector, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type RealMatrix = DMatrix<f64>;

/// Relative singular-value threshold used to decide numerical rank.
pub const RANK_TOL: f64 = 1e-10;
/// Absolute tolerance for grouping eigenvalues into multiplicity clusters.
pub const CLUSTER_TOL: f64 = 1e-8;

const EIG_MAX_ITER: usize = 60;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Frobenius norm of a complex matrix.
pub fn fro(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn identity(n: usize) -> ComplexMatrix {
    ComplexMatrix::identity(n, n)
}

/// Matrix with a single one at `(i, j)`.
pub fn unit(rows: usize, cols: usize, i: usize, j: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    m[(i, j)] = Complex64::new(1.0, 0.0);
    m
}

pub fn from_real(m: &RealMatrix) -> ComplexMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Build a complex matrix from row-major `(re, im)` pairs.
pub fn from_rows(rows: usize, cols: usize, data: &[(f64, f64)]) -> ComplexMatrix {
    assert_eq!(data.len(), rows * cols, "entry count must equal rows*cols");
    ComplexMatrix::from_fn(rows, cols, |i, j| {
        let (re, im) = data[i * cols + j];
        Complex64::new(re, im)
    })
}

/// Trace inner product `Re Tr(A^* B)`.
pub fn inner_re(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `Tr(A B)` without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    assert_eq!(a.ncols(), b.nrows());
    assert_eq!(a.nrows(), b.ncols());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

/// Standard Kronecker product; the output has `(ra*rb) x (ca*cb)` entries.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    a.kronecker(b)
}

/// A complex Hermitian matrix.
///
/// Construction symmetrizes the input as `(H + H^*)/2`, so the stored matrix
/// is exactly Hermitian. The Frobenius norm of the discarded anti-Hermitian
/// part is kept as `deviation`.
#[derive(Clone, Debug)]
pub struct HermitianMatrix {
    m: ComplexMatrix,
    deviation: f64,
}

/// Equality compares entries only; the recorded deviation is ignored.
impl PartialEq for HermitianMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl HermitianMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrize a square matrix without validation.
    pub fn symmetrize(m: ComplexMatrix) -> Self {
        let adj = m.adjoint();
        let deviation = fro(&(&m - &adj)) * 0.5;
        let m = (&m + &adj).map(|z| z * 0.5);
        Self { m, deviation }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: identity(n),
            deviation: 0.0,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: ComplexMatrix::zeros(n, n),
            deviation: 0.0,
        }
    }

    pub fn scaled_identity(n: usize, x: f64) -> Self {
        Self {
            m: identity(n).map(|z| z * x),
            deviation: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.m
    }

    /// Frobenius norm of the anti-Hermitian part removed at construction.
    pub fn deviation(&self) -> f64 {
        self.deviation
    }

    pub fn fro(&self) -> f64 {
        fro(&self.m)
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    pub fn scale(&self, x: f64) -> Self {
        Self {
            m: self.m.map(|z| z * x),
            deviation: 0.0,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            m: &self.m + &other.m,
            deviation: 0.0,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            m: &self.m - &other.m,
            deviation: 0.0,
        }
    }

    /// `self + x * other`.
    pub fn axpy(&self, x: f64, other: &Self) -> Self {
        Self {
            m: &self.m + other.m.map(|z| z * x),
            deviation: 0.0,
        }
    }

    /// `V^* H V` for a (possibly rectangular) `V`.
    pub fn congruence(&self, v: &ComplexMatrix) -> Self {
        Self::symmetrize(v.adjoint() * &self.m * v)
    }

    /// `Re Tr(self * other)`, which is real for Hermitian operands.
    pub fn inner(&self, other: &Self) -> f64 {
        inner_re(&self.m, &other.m)
    }
}

/// A real symmetric matrix, symmetrized on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct RealSymmetricMatrix {
    m: RealMatrix,
}

impl RealSymmetricMatrix {
    pub fn new(m: RealMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let t = m.transpose();
        Ok(Self { m: (&m + &t) * 0.5 })
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        Self {
            m: RealMatrix::from_diagonal(&DVector::from_column_slice(d)),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: RealMatrix::identity(n, n),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            m: RealMatrix::zeros(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &RealMatrix {
        &self.m
    }

    pub fn into_inner(self) -> RealMatrix {
        self.m
    }

    pub fn is_diagonal(&self) -> bool {
        let n = self.dim();
        (0..n).all(|i| (0..n).all(|j| i == j || self.m[(i, j)] == 0.0))
    }

    pub fn min_eig(&self) -> Result<f64> {
        let ev = sym_eigenvalues(&self.m)?;
        Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// Sorted eigenvalues together with their clustering into multiplicities.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    /// Representative (mean) value of each cluster.
    pub cluster_values: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub cluster_tolerance: f64,
}

impl Spectrum {
    pub fn from_sorted(eigenvalues: Vec<f64>, cluster_tolerance: f64) -> Self {
        let mut cluster_values = Vec::new();
        let mut multiplicities: Vec<usize> = Vec::new();
        let mut start = f64::NAN;
        let mut sum = 0.0;
        for &x in &eigenvalues {
            if multiplicities.is_empty() || x - start > cluster_tolerance {
                if let Some(&m) = multiplicities.last() {
                    cluster_values.push(sum / m as f64);
                }
                multiplicities.push(1);
                start = x;
                sum = x;
            } else {
                *multiplicities.last_mut().unwrap() += 1;
                sum += x;
            }
        }
        if let Some(&m) = multiplicities.last() {
            cluster_values.push(sum / m as f64);
        }
        Self {
            eigenvalues,
            cluster_values,
            multiplicities,
            cluster_tolerance,
        }
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::INFINITY)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NEG_INFINITY)
    }
}

/// `[[Re H, -Im H], [Im H, Re H]]`.
pub fn real_embed(h: &HermitianMatrix) -> RealSymmetricMatrix {
    RealSymmetricMatrix {
        m: embed_complex(h.matrix()),
    }
}

pub(crate) fn embed_complex(h: &ComplexMatrix) -> RealMatrix {
    let (r, c) = h.shape();
    let mut out = RealMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            let z = h[(i, j)];
            out[(i, j)] = z.re;
            out[(i + r, j + c)] = z.re;
            out[(i, j + c)] = -z.im;
            out[(i + r, j)] = z.im;
        }
    }
    out
}

/// Householder reduction of a symmetric matrix to tridiagonal form.
/// On return `v` holds the accumulated orthogonal transform, `d` the
/// diagonal and `e[1..]` the subdiagonal.
fn tridiagonalize(v: &mut RealMatrix, d: &mut [f64], e: &mut [f64]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for x in e.iter_mut().take(i) {
                *x = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicit QL iteration on the tridiagonal form, accumulating rotations in `v`.
fn tridiagonal_ql(v: &mut RealMatrix, d: &mut [f64], e: &mut [f64]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > EIG_MAX_ITER {
                    return Err(Error::EigenNonConvergence);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for x in d.iter_mut().skip(l + 2) {
                    *x -= h;
                }
                f += h;
                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let t = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * t;
                        v[(k, i)] = c * v[(k, i)] - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Symmetric eigendecomposition, eigenvalues ascending. Only the lower
/// triangle of `m` is read.
fn symmetric_eigen(m: &RealMatrix) -> Result<(Vec<f64>, RealMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((Vec::new(), RealMatrix::zeros(0, 0)));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let mut v = m.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    tridiagonalize(&mut v, &mut d, &mut e);
    tridiagonal_ql(&mut v, &mut d, &mut e)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals = order.iter().map(|&k| d[k]).collect();
    let vecs = RealMatrix::from_fn(n, n, |i, j| v[(i, order[j])]);
    Ok((vals, vecs))
}

pub(crate) fn sym_eigenvalues(m: &RealMatrix) -> Result<Vec<f64>> {
    Ok(symmetric_eigen(m)?.0)
}

/// Real symmetric eigendecomposition with eigenvalues ascending.
pub fn eig_sym(m: &RealSymmetricMatrix) -> Result<(Vec<f64>, RealMatrix)> {
    symmetric_eigen(m.matrix())
}

/// Hermitian eigendecomposition: ascending spectrum and a unitary matrix of
/// eigenvectors (columns), so that `H = U diag(λ) U^*`.
pub fn eig_herm(h: &HermitianMatrix) -> Result<(Spectrum, ComplexMatrix)> {
    let n = h.dim();
    if n == 0 {
        return Ok((
            Spectrum::from_sorted(Vec::new(), CLUSTER_TOL),
            ComplexMatrix::zeros(0, 0),
        ));
    }
    let emb = real_embed(h);
    let (vals2, vecs2) = eig_sym(&emb)?;
    // Group the doubled real spectrum into clusters of even size; each
    // cluster of real dimension 2k carries a k-dimensional complex eigenspace.
    let group_tol = 1e-10 * (1.0 + h.fro());
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for k in 1..=2 * n {
        if k == 2 * n || vals2[k] - vals2[start] > group_tol {
            groups.push((start, k));
            start = k;
        }
    }
    // Merge odd-sized neighbours; the doubling guarantees pairs exist.
    let mut merged: Vec<(usize, usize)> = Vec::new();
    let mut pending: Option<(usize, usize)> = None;
    for g in groups {
        let g = match pending.take() {
            Some((a, _)) => (a, g.1),
            None => g,
        };
        if (g.1 - g.0) % 2 == 1 {
            pending = Some(g);
        } else {
            merged.push(g);
        }
    }
    if let Some(g) = pending {
        merged.push(g);
    }

    let mut values = Vec::with_capacity(n);
    let mut u = ComplexMatrix::zeros(n, 0);
    for (a, b) in merged {
        let want = (b - a) / 2;
        let cands: Vec<DVector<Complex64>> = (a..b)
            .map(|k| DVector::from_fn(n, |i, _| c64(vecs2[(i, k)], vecs2[(i + n, k)])))
            .collect();
        let basis = complex_gram_schmidt(&cands, &u, want);
        // Rayleigh quotients give per-vector eigenvalues inside the cluster.
        for v in &basis {
            let hv = h.matrix() * v;
            let rq = v.dotc(&hv).re;
            values.push(rq);
            let last = u.ncols();
            u = u.insert_column(last, Complex64::new(0.0, 0.0));
            u.set_column(last, v);
        }
    }
    if u.ncols() != n {
        return Err(Error::EigenNonConvergence);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| values[x].total_cmp(&values[y]));
    let sorted: Vec<f64> = order.iter().map(|&k| values[k]).collect();
    let u = ComplexMatrix::from_fn(n, n, |i, j| u[(i, order[j])]);
    Ok((Spectrum::from_sorted(sorted, CLUSTER_TOL), u))
}

/// Pick up to `want` orthonormal vectors from the complex span of `cands`,
/// orthogonal to the columns of `against`. Largest-residual pivoting.
fn complex_gram_schmidt(
    cands: &[DVector<Complex64>],
    against: &ComplexMatrix,
    want: usize,
) -> Vec<DVector<Complex64>> {
    let mut work: Vec<DVector<Complex64>> = cands
        .iter()
        .map(|v| {
            let mut v = v.clone();
            for _ in 0..2 {
                for q in against.column_iter() {
                    let p = q.dotc(&v);
                    v -= q * p;
                }
            }
            v
        })
        .collect();
    let mut out: Vec<DVector<Complex64>> = Vec::with_capacity(want);
    while out.len() < want {
        let (best, norm) = work
            .iter()
            .enumerate()
            .map(|(k, v)| (k, v.norm()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best == usize::MAX || norm < 1e-8 {
            break;
        }
        let q = work.swap_remove(best) / Complex64::new(norm, 0.0);
        for v in work.iter_mut() {
            for _ in 0..2 {
                let p = q.dotc(v);
                *v -= &q * p;
            }
        }
        out.push(q);
    }
    out
}

pub fn min_eig(h: &HermitianMatrix) -> Result<f64> {
    if h.dim() == 0 {
        return Ok(f64::INFINITY);
    }
    // Every eigenvalue appears twice in the embedding; the minimum is unaffected.
    let ev = sym_eigenvalues(real_embed(h).matrix())?;
    Ok(ev[0])
}

pub fn psd_check(h: &HermitianMatrix, tol: f64) -> Result<bool> {
    Ok(min_eig(h)? >= -tol)
}

/// Orthonormal basis of `ker M`; rank is decided by `sigma <= rank_tol * sigma_max`.
pub fn nullspace_real(m: &RealMatrix, rank_tol: f64) -> Vec<DVector<f64>> {
    let (r, c) = m.shape();
    if c == 0 {
        return Vec::new();
    }
    // Pad with zero rows so the SVD is not thin in the column space.
    let rows = r.max(c);
    let mut padded = RealMatrix::zeros(rows, c);
    padded.view_mut((0, 0), (r, c)).copy_from(m);
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let thresh = rank_tol * smax;
    (0..c)
        .filter(|&k| smax == 0.0 || svd.singular_values[k] <= thresh)
        .map(|k| vt.row(k).transpose())
        .collect()
}

/// Complex kernel via the real embedding: the real kernel of the embedding
/// is invariant under multiplication by `i` and has twice the dimension.
pub fn nullspace_complex(m: &ComplexMatrix, rank_tol: f64) -> Vec<DVector<Complex64>> {
    let c = m.ncols();
    let real = nullspace_real(&embed_complex(m), rank_tol);
    let cands: Vec<DVector<Complex64>> = real
        .iter()
        .map(|v| DVector::from_fn(c, |i, _| c64(v[i], v[i + c])))
        .collect();
    complex_gram_schmidt(&cands, &ComplexMatrix::zeros(c, 0), real.len() / 2)
}

/// `C = B + B^*`, `D = i (B - B^*)`, both Hermitian, with `B = (C - i D)/2`.
pub fn hermitize_pair(b: &ComplexMatrix) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if !b.is_square() {
        return Err(Error::Dimension(format!(
            "hermitize_pair needs a square matrix, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    let adj = b.adjoint();
    let c = HermitianMatrix::symmetrize(b + &adj);
    let d = HermitianMatrix::symmetrize((b - &adj).map(|z| z * Complex64::i()));
    Ok((c, d))
}

/// The Hermitian basis of `Her_s`: for each `i`, `E_ii` followed by the pairs
/// `E_ij + E_ji`, `i(E_ji - E_ij)` for `j > i`. For `s = 2` this is
/// `[[1,0],[0,0]], [[0,1],[1,0]], [[0,-i],[i,0]], [[0,0],[0,1]]`.
pub fn her_basis(s: usize) -> Vec<HermitianMatrix> {
    let mut out = Vec::with_capacity(s * s);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::i();
    for a in 0..s {
        let mut e = ComplexMatrix::zeros(s, s);
        e[(a, a)] = one;
        out.push(HermitianMatrix::symmetrize(e));
        for b in a + 1..s {
            let mut sym = ComplexMatrix::zeros(s, s);
            sym[(a, b)] = one;
            sym[(b, a)] = one;
            out.push(HermitianMatrix::symmetrize(sym));
            let mut asym = ComplexMatrix::zeros(s, s);
            asym[(a, b)] = -i;
            asym[(b, a)] = i;
            out.push(HermitianMatrix::symmetrize(asym));
        }
    }
    out
}

/// Coordinates of a Hermitian matrix in [`her_basis`] (the basis is
/// orthogonal, so this is a scaled projection).
pub fn her_coordinates(h: &HermitianMatrix) -> Vec<f64> {
    her_basis(h.dim())
        .iter()
        .map(|b| h.inner(b) / b.inner(b))
        .collect()
}

/// Inverse of [`her_coordinates`].
pub fn her_from_coordinates(s: usize, coords: &[f64]) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(s, s);
    for (b, &x) in her_basis(s).iter().zip(coords) {
        m += b.matrix().map(|z| z * x);
    }
    HermitianMatrix::symmetrize(m)
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn herm_fn(h: &HermitianMatrix, f: impl Fn(f64) -> f64) -> Result<HermitianMatrix> {
    let (spec, u) = eig_herm(h)?;
    let n = h.dim();
    let d = ComplexMatrix::from_diagonal(&DVector::from_iterator(
        n,
        spec.eigenvalues.iter().map(|&x| Complex64::new(f(x), 0.0)),
    ));
    Ok(HermitianMatrix::symmetrize(&u * d * u.adjoint()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_herm(n: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let m = ComplexMatrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        HermitianMatrix::symmetrize(m)
    }

    fn s2() -> ComplexMatrix {
        from_rows(2, 2, &[(0.0, 0.0), (1.0, 0.0), (1.0, 0.0), (0.0, 0.0)])
    }
    fn s3() -> ComplexMatrix {
        from_rows(2, 2, &[(0.0, 0.0), (0.0, -1.0), (0.0, 1.0), (0.0, 0.0)])
    }

    #[test]
    fn kron_identity_and_placement() {
        assert_eq!(kron(&identity(2), &identity(2)), identity(4));
        let m = from_rows(2, 2, &[(1.0, 0.0), (2.0, 1.0), (3.0, 0.0), (4.0, -1.0)]);
        let k = kron(&unit(2, 2, 0, 0), &m);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i < 2 && j < 2 { m[(i, j)] } else { c64(0.0, 0.0) };
                assert_eq!(k[(i, j)], want);
            }
        }
    }

    #[test]
    fn kron_matches_double_loop() {
        let (a, b) = (s2(), s3());
        let k = kron(&a, &b);
        let mut oracle = ComplexMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                for p in 0..2 {
                    for q in 0..2 {
                        oracle[(2 * i + p, 2 * j + q)] = a[(i, j)] * b[(p, q)];
                    }
                }
            }
        }
        assert_eq!(k, oracle);
    }

    #[test]
    fn kron_mixed_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut r = |r, c| ComplexMatrix::from_fn(r, c, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let (a, b, c, d) = (r(2, 3), r(3, 2), r(3, 2), r(2, 4));
        let lhs = kron(&a, &b) * kron(&c, &d);
        let rhs = kron(&(&a * &c), &(&b * &d));
        assert!(fro(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn identity_spectrum() {
        let (spec, _) = eig_herm(&HermitianMatrix::identity(3)).unwrap();
        assert_eq!(spec.multiplicities, vec![3]);
        for x in spec.eigenvalues {
            assert!((x - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn c4_adjacency_spectrum() {
        let mut a = RealMatrix::zeros(4, 4);
        for i in 0..4 {
            a[(i, (i + 1) % 4)] = 1.0;
            a[((i + 1) % 4, i)] = 1.0;
        }
        let (spec, _) = eig_herm(&HermitianMatrix::new(from_real(&a)).unwrap()).unwrap();
        let want = [-2.0, 0.0, 0.0, 2.0];
        for (x, w) in spec.eigenvalues.iter().zip(want) {
            assert!((x - w).abs() < 1e-12);
        }
        assert_eq!(spec.multiplicities, vec![1, 2, 1]);
    }

    #[test]
    fn reconstruction_and_unitarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [1, 2, 5, 8, 17] {
            let h = random_herm(n, &mut rng);
            let (spec, u) = eig_herm(&h).unwrap();
            let d = ComplexMatrix::from_diagonal(&DVector::from_iterator(
                n,
                spec.eigenvalues.iter().map(|&x| c64(x, 0.0)),
            ));
            let rec = &u * d * u.adjoint();
            assert!(fro(&(rec - h.matrix())) <= 1e-9 * (1.0 + h.fro()));
            assert!(fro(&(u.adjoint() * &u - identity(n))) < 1e-10);
        }
    }

    #[test]
    fn degenerate_complex_spectrum() {
        // Unitary conjugate of diag(1,1,1,-2,-2) with a complex unitary.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = ComplexMatrix::from_fn(5, 5, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let q = g.qr().q();
        let d = ComplexMatrix::from_diagonal(&DVector::from_vec(
            [1.0, 1.0, 1.0, -2.0, -2.0].iter().map(|&x| c64(x, 0.0)).collect(),
        ));
        let h = HermitianMatrix::symmetrize(&q * d * q.adjoint());
        let (spec, u) = eig_herm(&h).unwrap();
        assert_eq!(spec.multiplicities, vec![2, 3]);
        assert!(fro(&(u.adjoint() * &u - identity(5))) < 1e-10);
    }

    #[test]
    fn psd_examples() {
        assert!(psd_check(&HermitianMatrix::zeros(2), 0.0).unwrap());
        let h = HermitianMatrix::new(from_rows(2, 2, &[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (-1e-3, 0.0)])).unwrap();
        assert!(!psd_check(&h, 1e-9).unwrap());
    }

    #[test]
    fn diag_minus_outer_product() {
        // D - v v^* with v the all-ones vector of length 4 has eigenvalues {1,1,1,-3}.
        let v = ComplexMatrix::from_element(4, 1, c64(1.0, 0.0));
        let d = identity(4);
        let h = HermitianMatrix::new(d - &v * v.adjoint()).unwrap();
        assert!((min_eig(&h).unwrap() + 3.0).abs() < 1e-12);
    }

    #[test]
    fn embed_examples() {
        assert_eq!(real_embed(&HermitianMatrix::identity(2)), RealSymmetricMatrix::identity(4));
        let e = real_embed(&HermitianMatrix::new(s3()).unwrap());
        assert_eq!(e.matrix()[(0, 3)], 1.0);
        assert_eq!(e.matrix()[(1, 2)], -1.0);
        let (vals, _) = eig_sym(&e).unwrap();
        let want = [-1.0, -1.0, 1.0, 1.0];
        for (x, w) in vals.iter().zip(want) {
            assert!((x - w).abs() < 1e-14);
        }
        let h = HermitianMatrix::new(from_rows(2, 2, &[(0.5, 0.0), (0.0, 1.0), (0.0, -1.0), (0.5, 0.0)])).unwrap();
        assert!((min_eig(&h).unwrap() + 0.5).abs() < 1e-12);
        assert!((e.min_eig().unwrap() + 1.0).abs() < 1e-12);
        let eh = real_embed(&h);
        assert!((eh.min_eig().unwrap() + 0.5).abs() < 1e-12);
    }

    #[test]
    fn nullspace_examples() {
        assert_eq!(nullspace_real(&RealMatrix::zeros(3, 3), RANK_TOL).len(), 3);
        assert!(nullspace_real(&RealMatrix::identity(3, 3), RANK_TOL).is_empty());
        // Wide matrix: kernel must not be lost to a thin SVD.
        let m = RealMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]);
        let k = nullspace_real(&m, RANK_TOL);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert!((&m * v).norm() < 1e-12);
        }
    }

    #[test]
    fn complex_nullspace() {
        // [1, i] has kernel spanned by (i, -1)/sqrt2 over C.
        let m = from_rows(1, 2, &[(1.0, 0.0), (0.0, 1.0)]);
        let k = nullspace_complex(&m, RANK_TOL);
        assert_eq!(k.len(), 1);
        assert!((&m * &k[0]).norm() < 1e-12);
        assert!((k[0].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hermitize_examples() {
        let b = from_rows(2, 2, &[(1.0, 0.0), (2.0, 1.0), (2.0, -1.0), (3.0, 0.0)]);
        let (c, d) = hermitize_pair(&b).unwrap();
        assert!(fro(&(c.matrix() - b.map(|z| z * 2.0))) < 1e-15);
        assert!(d.fro() < 1e-15);
        let ii = identity(2).map(|z| z * Complex64::i());
        let (c, d) = hermitize_pair(&ii).unwrap();
        assert!(c.fro() < 1e-15);
        assert!(fro(&(d.matrix() + identity(2).map(|z| z * 2.0))) < 1e-15);
        assert!(hermitize_pair(&ComplexMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn her_basis_orthogonal() {
        assert_eq!(her_basis(1).len(), 1);
        for s in 1..5 {
            let b = her_basis(s);
            assert_eq!(b.len(), s * s);
            for i in 0..b.len() {
                for j in 0..b.len() {
                    let ip = b[i].inner(&b[j]);
                    if i != j {
                        assert_eq!(ip, 0.0);
                    } else {
                        assert!(ip > 0.0);
                    }
                }
            }
        }
        let b = her_basis(2);
        assert_eq!(b[1].matrix(), &s2());
        assert_eq!(b[2].matrix(), &s3());
    }

    #[test]
    fn hermitian_symmetrization_records_deviation() {
        let m = from_rows(2, 2, &[(1.0, 0.5), (0.0, 0.0), (1.0, 0.0), (0.0, 0.0)]);
        let h = HermitianMatrix::new(m).unwrap();
        assert!(h.deviation() > 0.0);
        assert_eq!(h.matrix()[(0, 0)].im, 0.0);
        assert_eq!(h.matrix()[(0, 1)], h.matrix()[(1, 0)].conj());
    }

    /// Characteristic polynomial by Faddeev-LeVerrier, roots from the
    /// companion matrix through a general (non-symmetric) Schur solver.
    fn charpoly_roots(h: &HermitianMatrix) -> Vec<f64> {
        let n = h.dim();
        let a = h.matrix();
        let mut coeffs = vec![c64(1.0, 0.0)];
        let mut m = ComplexMatrix::zeros(n, n);
        for k in 1..=n {
            m = a * &m + identity(n).map(|z| z * coeffs[k - 1]);
            let am = a * &m;
            let tr: Complex64 = (0..n).map(|i| am[(i, i)]).sum();
            coeffs.push(-tr / k as f64);
        }
        let mut comp = RealMatrix::zeros(n, n);
        for i in 1..n {
            comp[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            comp[(i, n - 1)] = -coeffs[n - i].re;
        }
        let mut roots: Vec<f64> = comp.complex_eigenvalues().iter().map(|z| z.re).collect();
        roots.sort_by(|a, b| a.total_cmp(b));
        roots
    }

    #[test]
    fn spectrum_matches_characteristic_polynomial_roots() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_herm(8, &mut rng);
        let (spec, _) = eig_herm(&h).unwrap();
        let roots = charpoly_roots(&h);
        for (x, r) in spec.eigenvalues.iter().zip(&roots) {
            assert!((x - r).abs() < 1e-8, "{x} vs {r}");
        }
    }

    #[test]
    fn embedding_preserves_psd_both_ways() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for k in 0..200 {
            let n = 1 + k % 5;
            let g = ComplexMatrix::from_fn(n, n, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            // Half the instances are Gram matrices, half are shifted to be indefinite.
            let mut h = HermitianMatrix::symmetrize(&g * g.adjoint());
            if k % 2 == 1 {
                h = h.sub(&HermitianMatrix::scaled_identity(n, rng.gen_range(0.01..1.0) + min_eig(&h).unwrap()));
            }
            let lo = min_eig(&h).unwrap();
            let (vals, _) = eig_sym(&real_embed(&h)).unwrap();
            assert!((vals[0] - lo).abs() < 1e-10);
            assert_eq!(lo >= -1e-12, vals[0] >= -1e-12);
            let emb = real_embed(&h);
            let tr: f64 = (0..2 * n).map(|i| emb.matrix()[(i, i)]).sum();
            assert!((tr - 2.0 * h.trace()).abs() < 1e-12);
        }
    }

    #[test]
    fn embedding_doubles_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_herm(4, &mut rng);
        let b = random_herm(4, &mut rng);
        let ea = real_embed(&a);
        let eb = real_embed(&b);
        let lhs: f64 = ea.matrix().iter().zip(eb.matrix().iter()).map(|(x, y)| x * y).sum();
        assert!((lhs - 2.0 * a.inner(&b)).abs() < 1e-12);
    }

    #[test]
    fn eigensolver_reports_non_finite_input() {
        let mut m = RealMatrix::identity(3, 3);
        m[(1, 1)] = f64::NAN;
        assert!(sym_eigenvalues(&m).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn herm_reconstruction(seed in 0u64..100_000, n in 1usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_herm(n, &mut rng);
            let (spec, u) = eig_herm(&h).unwrap();
            proptest::prop_assert_eq!(spec.multiplicities.iter().sum::<usize>(), n);
            let d = ComplexMatrix::from_diagonal(&DVector::from_iterator(n, spec.eigenvalues.iter().map(|&x| c64(x, 0.0))));
            proptest::prop_assert!(fro(&(&u * d * u.adjoint() - h.matrix())) <= 1e-9 * (1.0 + h.fro()));
        }

        #[test]
        fn kron_is_bilinear(seed in 0u64..100_000, x in -2.0f64..2.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut r = |rows, cols| ComplexMatrix::from_fn(rows, cols, |_, _| c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            let (a, a2, b) = (r(2, 3), r(2, 3), r(3, 2));
            let lhs = kron(&(&a + a2.map(|z| z * x)), &b);
            let rhs = kron(&a, &b) + kron(&a2, &b).map(|z| z * x);
            proptest::prop_assert!(fro(&(lhs - rhs)) < 1e-12);
        }

        #[test]
        fn nullspace_is_orthonormal_and_annihilates(seed in 0u64..100_000, rank in 0usize..6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = RealMatrix::from_fn(7, rank, |_, _| rng.gen_range(-1.0..1.0));
            let r = RealMatrix::from_fn(rank, 9, |_, _| rng.gen_range(-1.0..1.0));
            let m = &l * &r;
            let k = nullspace_real(&m, RANK_TOL);
            proptest::prop_assert_eq!(k.len(), 9 - rank);
            let mn = m.norm();
            for (i, v) in k.iter().enumerate() {
                proptest::prop_assert!((&m * v).norm() <= RANK_TOL * mn.max(1.0));
                for (j, w) in k.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    proptest::prop_assert!((v.dot(w) - want).abs() < 1e-12);
                }
            }
        }
    }
}
