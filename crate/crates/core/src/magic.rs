//! Quantum magic squares: block matrices whose rows and columns are POVMs.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{is_permutation, Graph};
use crate::json::MatrixJson;
use crate::linalg::{fro, herm_fn, identity, min_eig, ComplexMatrix, HermitianMatrix};

/// An `n x n` grid of Hermitian `s x s` blocks, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockMatrix {
    n: usize,
    s: usize,
    blocks: Vec<HermitianMatrix>,
}

impl BlockMatrix {
    pub fn new(n: usize, s: usize, blocks: Vec<HermitianMatrix>) -> Result<Self> {
        if blocks.len() != n * n {
            return Err(Error::Dimension(format!(
                "expected {} blocks for n = {n}, got {}",
                n * n,
                blocks.len()
            )));
        }
        if let Some(b) = blocks.iter().find(|b| b.dim() != s) {
            return Err(Error::Dimension(format!(
                "block of size {} in a square with s = {s}",
                b.dim()
            )));
        }
        Ok(Self { n, s, blocks })
    }

    pub fn from_fn(n: usize, s: usize, mut f: impl FnMut(usize, usize) -> HermitianMatrix) -> Self {
        let blocks = (0..n * n).map(|k| f(k / n, k % n)).collect::<Vec<_>>();
        Self::new(n, s, blocks).expect("block generator returned a block of the wrong size")
    }

    /// Every block equal to `(1/n) I_s`.
    pub fn uniform(n: usize, s: usize) -> Self {
        Self::from_fn(n, s, |_, _| HermitianMatrix::scaled_identity(s, 1.0 / n as f64))
    }

    /// Blocks `δ_{σ(i), j} I_s`.
    pub fn from_permutation(perm: &[usize], s: usize) -> Result<Self> {
        if !is_permutation(perm) {
            return Err(Error::InvalidInput(format!("{perm:?} is not a permutation")));
        }
        Ok(Self::from_fn(perm.len(), s, |i, j| {
            if perm[i] == j {
                HermitianMatrix::identity(s)
            } else {
                HermitianMatrix::zeros(s)
            }
        }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s(&self) -> usize {
        self.s
    }

    pub fn block(&self, i: usize, j: usize) -> &HermitianMatrix {
        &self.blocks[i * self.n + j]
    }

    pub fn set_block(&mut self, i: usize, j: usize, b: HermitianMatrix) {
        assert_eq!(b.dim(), self.s);
        self.blocks[i * self.n + j] = b;
    }

    pub fn blocks(&self) -> &[HermitianMatrix] {
        &self.blocks
    }

    pub fn map(&self, f: impl Fn(&HermitianMatrix) -> HermitianMatrix) -> Self {
        Self::from_fn(self.n, self.s, |i, j| f(self.block(i, j)))
    }

    /// The `ns x ns` matrix with block `(i, j)` at rows `i*s..` and columns `j*s..`.
    pub fn full(&self) -> ComplexMatrix {
        let (n, s) = (self.n, self.s);
        let mut out = ComplexMatrix::zeros(n * s, n * s);
        for i in 0..n {
            for j in 0..n {
                out.view_mut((i * s, j * s), (s, s)).copy_from(self.block(i, j).matrix());
            }
        }
        out
    }

    pub fn row_sum(&self, i: usize) -> HermitianMatrix {
        (0..self.n).fold(HermitianMatrix::zeros(self.s), |acc, j| acc.add(self.block(i, j)))
    }

    pub fn col_sum(&self, j: usize) -> HermitianMatrix {
        (0..self.n).fold(HermitianMatrix::zeros(self.s), |acc, i| acc.add(self.block(i, j)))
    }

    /// Largest Frobenius distance between corresponding blocks.
    pub fn max_block_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.n, self.s), (other.n, other.s));
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.sub(b).fro())
            .fold(0.0, f64::max)
    }

    /// Largest row or column residual `||Σ X - I||_F`.
    pub fn magic_residual(&self) -> f64 {
        let id = HermitianMatrix::identity(self.s);
        (0..self.n)
            .map(|k| self.row_sum(k).sub(&id).fro().max(self.col_sum(k).sub(&id).fro()))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> BlockMatrixJson {
        BlockMatrixJson {
            n: self.n,
            s: self.s,
            blocks: (0..self.n)
                .map(|i| (0..self.n).map(|j| MatrixJson::from(self.block(i, j).matrix())).collect())
                .collect(),
        }
    }
}

/// `{"n": n, "s": s, "blocks": [[matrix, ...], ...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockMatrixJson {
    pub n: usize,
    pub s: usize,
    pub blocks: Vec<Vec<MatrixJson>>,
}

/// Largest anti-Hermitian part accepted when reading blocks from JSON.
const JSON_HERMITIAN_TOL: f64 = 1e-8;

impl TryFrom<&BlockMatrixJson> for BlockMatrix {
    type Error = Error;

    fn try_from(j: &BlockMatrixJson) -> Result<Self> {
        if j.blocks.len() != j.n || j.blocks.iter().any(|r| r.len() != j.n) {
            return Err(Error::Parse(format!("block grid is not {0}x{0}", j.n)));
        }
        let mut blocks = Vec::with_capacity(j.n * j.n);
        for row in &j.blocks {
            for m in row {
                let c = ComplexMatrix::try_from(m)?;
                if c.nrows() != j.s || c.ncols() != j.s {
                    return Err(Error::Parse(format!(
                        "block is {}x{}, expected {2}x{2}",
                        c.nrows(),
                        c.ncols(),
                        j.s
                    )));
                }
                let h = HermitianMatrix::new(c)?;
                if h.deviation() > JSON_HERMITIAN_TOL * (1.0 + h.fro()) {
                    return Err(Error::Parse(format!(
                        "block is not Hermitian (deviation {:e})",
                        h.deviation()
                    )));
                }
                blocks.push(h);
            }
        }
        BlockMatrix::new(j.n, j.s, blocks)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MagicReport {
    pub is_psd: Vec<bool>,
    pub block_min_eigs: Vec<f64>,
    pub row_residuals: Vec<f64>,
    pub col_residuals: Vec<f64>,
    pub tol: f64,
    pub overall: bool,
}

impl MagicReport {
    pub fn max_residual(&self) -> f64 {
        self.row_residuals
            .iter()
            .chain(&self.col_residuals)
            .copied()
            .fold(0.0, f64::max)
    }

    pub fn min_block_eig(&self) -> f64 {
        self.block_min_eigs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn verify_magic(x: &BlockMatrix, tol: f64) -> Result<MagicReport> {
    let id = HermitianMatrix::identity(x.s);
    let block_min_eigs = x.blocks.iter().map(min_eig).collect::<Result<Vec<_>>>()?;
    let is_psd: Vec<bool> = block_min_eigs.iter().map(|&e| e >= -tol).collect();
    let row_residuals: Vec<f64> = (0..x.n).map(|i| x.row_sum(i).sub(&id).fro()).collect();
    let col_residuals: Vec<f64> = (0..x.n).map(|j| x.col_sum(j).sub(&id).fro()).collect();
    let overall = is_psd.iter().all(|&b| b)
        && row_residuals.iter().chain(&col_residuals).all(|&r| r <= tol);
    Ok(MagicReport {
        is_psd,
        block_min_eigs,
        row_residuals,
        col_residuals,
        tol,
        overall,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassFlags {
    pub in_m: bool,
    pub in_p: bool,
    pub in_c: bool,
    pub projection_residuals: Vec<f64>,
    pub commutator_residual: f64,
}

/// Membership in the chain `C ⊆ P ⊆ M`: magic, then projection entries,
/// then pairwise commuting entries.
pub fn classify(x: &BlockMatrix, tol: f64) -> Result<ClassFlags> {
    let in_m = verify_magic(x, tol)?.overall;
    let projection_residuals: Vec<f64> = x
        .blocks
        .iter()
        .map(|b| fro(&(b.matrix() * b.matrix() - b.matrix())))
        .collect();
    let mut commutator_residual: f64 = 0.0;
    for (p, a) in x.blocks.iter().enumerate() {
        for b in &x.blocks[p + 1..] {
            let c = a.matrix() * b.matrix() - b.matrix() * a.matrix();
            commutator_residual = commutator_residual.max(fro(&c));
        }
    }
    let in_p = in_m && projection_residuals.iter().all(|&r| r <= tol);
    let in_c = in_p && commutator_residual <= tol;
    Ok(ClassFlags {
        in_m,
        in_p,
        in_c,
        projection_residuals,
        commutator_residual,
    })
}

pub const SINKHORN_TOL: f64 = 1e-10;
pub const SINKHORN_MAX_SWEEPS: usize = 10_000;

fn inv_sqrt(h: &HermitianMatrix) -> Result<HermitianMatrix> {
    let lo = min_eig(h)?;
    if lo <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "Sinkhorn scaling needs positive definite sums (min eigenvalue {lo:e})"
        )));
    }
    herm_fn(h, |x| 1.0 / x.sqrt())
}

/// One Sinkhorn sweep: normalize rows, then columns, by symmetric conjugation.
pub fn sinkhorn_sweep(x: &BlockMatrix) -> Result<BlockMatrix> {
    let rows = (0..x.n).map(|i| inv_sqrt(&x.row_sum(i))).collect::<Result<Vec<_>>>()?;
    let y = BlockMatrix::from_fn(x.n, x.s, |i, j| x.block(i, j).congruence(rows[i].matrix()));
    let cols = (0..x.n).map(|j| inv_sqrt(&y.col_sum(j))).collect::<Result<Vec<_>>>()?;
    Ok(BlockMatrix::from_fn(x.n, x.s, |i, j| y.block(i, j).congruence(cols[j].matrix())))
}

/// Iterate [`sinkhorn_sweep`] until both row and column residuals are at
/// most `tol`.
pub fn sinkhorn(x: &BlockMatrix, tol: f64, max_sweeps: usize) -> Result<(BlockMatrix, usize)> {
    let mut cur = x.clone();
    let mut residual = f64::INFINITY;
    for sweep in 0..=max_sweeps {
        residual = cur.magic_residual();
        if residual <= tol {
            return Ok((cur, sweep));
        }
        if sweep == max_sweeps {
            break;
        }
        cur = sinkhorn_sweep(&cur)?;
    }
    Err(Error::SinkhornNonConvergence {
        sweeps: max_sweeps,
        residual,
    })
}

/// A random quantum magic square: Gram blocks `G G^*` of complex Gaussian
/// `s x s` matrices `G`, scaled by operator Sinkhorn. Deterministic in `seed`.
pub fn random_qms(n: usize, s: usize, seed: u64) -> Result<BlockMatrix> {
    random_qms_rank(n, s, s, seed)
}

/// As [`random_qms`] with `s x rank` Gaussian factors, so every block of the
/// starting point has rank at most `rank`.
pub fn random_qms_rank(n: usize, s: usize, rank: usize, seed: u64) -> Result<BlockMatrix> {
    if n == 0 || s == 0 || rank == 0 {
        return Err(Error::InvalidInput("random_qms needs n, s and rank >= 1".into()));
    }
    if n == 1 {
        return Ok(BlockMatrix::from_fn(1, s, |_, _| HermitianMatrix::identity(s)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = BlockMatrix::from_fn(n, s, |_, _| {
        let g = ComplexMatrix::from_fn(s, rank, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        });
        HermitianMatrix::symmetrize(&g * g.adjoint())
    });
    Ok(sinkhorn(&start, SINKHORN_TOL, SINKHORN_MAX_SWEEPS)?.0)
}

/// `Σ_i V_i^* A^(i)_kl V_i` for squares of sizes `s_i` and `s_i x t`
/// isometry pieces with `Σ V_i^* V_i = I_t`.
pub fn matrix_convex_combine(squares: &[BlockMatrix], isometries: &[ComplexMatrix]) -> Result<BlockMatrix> {
    if squares.is_empty() || squares.len() != isometries.len() {
        return Err(Error::Dimension(format!(
            "{} squares but {} isometry pieces",
            squares.len(),
            isometries.len()
        )));
    }
    let n = squares[0].n;
    let t = isometries[0].ncols();
    for (a, v) in squares.iter().zip(isometries) {
        if a.n != n || v.nrows() != a.s || v.ncols() != t {
            return Err(Error::Dimension(format!(
                "square n = {}, s = {} does not fit isometry piece {}x{}",
                a.n,
                a.s,
                v.nrows(),
                v.ncols()
            )));
        }
    }
    let gram = isometries
        .iter()
        .fold(ComplexMatrix::zeros(t, t), |acc, v| acc + v.adjoint() * v);
    let dev = fro(&(gram - identity(t)));
    if dev > 1e-10 {
        return Err(Error::Isometry(dev));
    }
    Ok(BlockMatrix::from_fn(n, t, |k, l| {
        squares
            .iter()
            .zip(isometries)
            .fold(HermitianMatrix::zeros(t), |acc, (a, v)| acc.add(&a.block(k, l).congruence(v)))
    }))
}

/// Residual `max_{i,j} ||Σ_{k~j} X_ik - Σ_{k~i} X_kj||_F` of commutation with `A_G ⊗ I_s`.
pub fn graph_commutation_residual(x: &BlockMatrix, g: &Graph) -> Result<f64> {
    if x.n != g.n() {
        return Err(Error::Dimension(format!(
            "square has n = {} but graph has {} vertices",
            x.n,
            g.n()
        )));
    }
    let mut worst: f64 = 0.0;
    for i in 0..x.n {
        for j in 0..x.n {
            let left = g
                .neighbors(j)
                .fold(HermitianMatrix::zeros(x.s), |acc, k| acc.add(x.block(i, k)));
            let right = g
                .neighbors(i)
                .fold(HermitianMatrix::zeros(x.s), |acc, k| acc.add(x.block(k, j)));
            worst = worst.max(left.sub(&right).fro());
        }
    }
    Ok(worst)
}

pub fn graph_commutes(x: &BlockMatrix, g: &Graph, tol: f64) -> Result<(bool, f64)> {
    let r = graph_commutation_residual(x, g)?;
    Ok((r <= tol, r))
}

/// Blockwise average `(1/|G|) Σ_g A_{g(i), g(j)}`.
pub fn group_average(x: &BlockMatrix, perms: &[Vec<usize>]) -> Result<BlockMatrix> {
    if perms.is_empty() {
        return Err(Error::InvalidInput("group_average needs at least one permutation".into()));
    }
    if let Some(p) = perms.iter().find(|p| p.len() != x.n || !is_permutation(p)) {
        return Err(Error::InvalidInput(format!("{p:?} is not a permutation of {}", x.n)));
    }
    let w = 1.0 / perms.len() as f64;
    Ok(BlockMatrix::from_fn(x.n, x.s, |i, j| {
        perms
            .iter()
            .fold(HermitianMatrix::zeros(x.s), |acc, p| acc.add(x.block(p[i], p[j])))
            .scale(w)
    }))
}

/// A square commuting with the 4-cycle built from two Hermitian blocks:
/// `P, I - P` on the vertex pair {0, 2} and `Q, I - Q` on {1, 3}, zeros
/// elsewhere. With non-commuting projections `P`, `Q` this lies in
/// `P^(C4)` but not in `C^(C4)`.
pub fn c4_orbit_square(p: &HermitianMatrix, q: &HermitianMatrix) -> Result<BlockMatrix> {
    if p.dim() != q.dim() {
        return Err(Error::Dimension("P and Q must have equal size".into()));
    }
    let s = p.dim();
    let ip = HermitianMatrix::identity(s).sub(p);
    let iq = HermitianMatrix::identity(s).sub(q);
    let z = HermitianMatrix::zeros(s);
    let grid = [
        [p, &z, &ip, &z],
        [&z, q, &z, &iq],
        [&ip, &z, p, &z],
        [&z, &iq, &z, q],
    ];
    Ok(BlockMatrix::from_fn(4, s, |i, j| grid[i][j].clone()))
}

#[derive(Clone, Debug)]
pub struct ComponentSums {
    pub row_sums: Vec<HermitianMatrix>,
    pub col_sums: Vec<HermitianMatrix>,
    pub deviation: f64,
}

/// Row and column sums averaged over each connected component, with the
/// largest deviation of an individual row or column sum from its average.
pub fn componentwise_sums(b: &BlockMatrix, g: &Graph) -> Result<ComponentSums> {
    if b.n != g.n() {
        return Err(Error::Dimension(format!(
            "square has n = {} but graph has {} vertices",
            b.n,
            g.n()
        )));
    }
    let comps = g.connected_components();
    let mut row_sums = Vec::with_capacity(comps.count);
    let mut col_sums = Vec::with_capacity(comps.count);
    let mut deviation: f64 = 0.0;
    for t in 0..comps.count {
        let members = comps.members(t);
        let w = 1.0 / members.len() as f64;
        let rows: Vec<_> = members.iter().map(|&i| b.row_sum(i)).collect();
        let cols: Vec<_> = members.iter().map(|&j| b.col_sum(j)).collect();
        let lr = rows.iter().fold(HermitianMatrix::zeros(b.s), |a, r| a.add(r)).scale(w);
        let lc = cols.iter().fold(HermitianMatrix::zeros(b.s), |a, c| a.add(c)).scale(w);
        for r in &rows {
            deviation = deviation.max(r.sub(&lr).fro());
        }
        for c in &cols {
            deviation = deviation.max(c.sub(&lc).fro());
        }
        row_sums.push(lr);
        col_sums.push(lc);
    }
    Ok(ComponentSums {
        row_sums,
        col_sums,
        deviation,
    })
}
