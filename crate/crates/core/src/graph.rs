//! Simple undirected graphs, their adjacency spectra and commutants.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    eig_sym, from_real, nullspace_real, ComplexMatrix, RealMatrix, RealSymmetricMatrix, Spectrum,
    CLUSTER_TOL, RANK_TOL,
};

/// A permutation of `0..n`, stored as its image list: `perm[i] = σ(i)`.
pub type Permutation = Vec<usize>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
    name: String,
}

impl Graph {
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adj = vec![false; n * n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidInput(format!(
                    "edge ({a}, {b}) out of range for {n} vertices"
                )));
            }
            if a == b {
                return Err(Error::InvalidInput(format!("loop at vertex {a}")));
            }
            adj[a * n + b] = true;
            adj[b * n + a] = true;
        }
        Ok(Self {
            n,
            adj,
            name: format!("edges:{n}"),
        })
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidInput(format!("cycle needs n >= 3, got {n}")));
        }
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        let mut g = Self::from_edge_list(n, &edges)?;
        g.name = format!("cycle:{n}");
        Ok(g)
    }

    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("complete graph needs n >= 2, got {n}")));
        }
        let edges: Vec<_> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let mut g = Self::from_edge_list(n, &edges)?;
        g.name = format!("complete:{n}");
        Ok(g)
    }

    pub fn path(n: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        let mut g = Self::from_edge_list(n, &edges)?;
        g.name = format!("path:{n}");
        Ok(g)
    }

    /// Vertices of `other` are shifted by `self.n()`.
    pub fn disjoint_union(&self, other: &Graph) -> Graph {
        let n = self.n + other.n;
        let mut edges = self.edges();
        edges.extend(other.edges().into_iter().map(|(a, b)| (a + self.n, b + self.n)));
        let mut g = Self::from_edge_list(n, &edges).expect("edges of valid graphs stay valid");
        g.name = format!("union:{}+{}", self.name, other.name);
        g
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.adjacent(i, j))
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.n)
            .flat_map(|i| (i + 1..self.n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.adjacent(i, j))
            .collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.neighbors(i).count()).collect()
    }

    pub fn is_k_regular(&self) -> Option<usize> {
        let d = self.degrees();
        match d.first() {
            Some(&k) if d.iter().all(|&x| x == k) => Some(k),
            Some(_) => None,
            None => Some(0),
        }
    }

    pub fn adjacency(&self) -> RealMatrix {
        RealMatrix::from_fn(self.n, self.n, |i, j| if self.adjacent(i, j) { 1.0 } else { 0.0 })
    }

    pub fn adjacency_complex(&self) -> ComplexMatrix {
        from_real(&self.adjacency())
    }

    pub fn connected_components(&self) -> ComponentDecomposition {
        let mut labels = vec![usize::MAX; self.n];
        let mut count = 0;
        for start in 0..self.n {
            if labels[start] != usize::MAX {
                continue;
            }
            labels[start] = count;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for w in self.neighbors(v) {
                    if labels[w] == usize::MAX {
                        labels[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        ComponentDecomposition { count, labels }
    }

    pub fn spectrum(&self) -> Result<Spectrum> {
        let a = RealSymmetricMatrix::new(self.adjacency())?;
        let (vals, _) = eig_sym(&a)?;
        Ok(Spectrum::from_sorted(vals, CLUSTER_TOL))
    }

    /// `dim Comm(A_G) = Σ_λ m_λ²`.
    pub fn commutant_dimension_spectral(&self) -> Result<usize> {
        Ok(self.spectrum()?.multiplicities.iter().map(|m| m * m).sum())
    }

    /// Orthonormal basis (trace inner product) of `{X : A X = X A}`, from the
    /// kernel of `I ⊗ A - Aᵀ ⊗ I` acting on column-major `vec(X)`. The
    /// adjacency is real, so a real kernel basis is also a complex basis.
    pub fn commutant_basis(&self) -> Result<CommutantBasis> {
        let n = self.n;
        let a = self.adjacency();
        let id = RealMatrix::identity(n, n);
        let op = id.kronecker(&a) - a.transpose().kronecker(&id);
        let kernel = nullspace_real(&op, RANK_TOL);
        let spectral = self.commutant_dimension_spectral()?;
        if kernel.len() != spectral {
            return Err(Error::RankMismatch(format!(
                "commutant of {}: nullspace gives {}, multiplicities give {}",
                self.name,
                kernel.len(),
                spectral
            )));
        }
        let basis = kernel
            .iter()
            .map(|v| from_real(&RealMatrix::from_column_slice(n, n, v.as_slice())))
            .collect::<Vec<_>>();
        Ok(CommutantBasis {
            dimension: basis.len(),
            basis,
            source: CommutantSource::Nullspace,
        })
    }

    pub fn is_automorphism(&self, perm: &[usize]) -> bool {
        perm.len() == self.n
            && is_permutation(perm)
            && (0..self.n).all(|i| (0..self.n).all(|j| self.adjacent(i, j) == self.adjacent(perm[i], perm[j])))
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            edges: self.edges().into_iter().map(|(a, b)| [a, b]).collect(),
        }
    }
}

impl fmt::Display for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Parses `cycle:N`, `complete:N`, `path:N` and `union:<spec>+<spec>[+...]`.
impl FromStr for Graph {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("union:") {
            let mut parts = rest.split('+');
            let first = parts
                .next()
                .filter(|p| !p.is_empty())
                .ok_or_else(|| Error::Parse(format!("empty union in {s:?}")))?;
            let mut g: Graph = first.parse()?;
            let mut any = false;
            for p in parts {
                g = g.disjoint_union(&p.parse()?);
                any = true;
            }
            if !any {
                return Err(Error::Parse(format!("union needs at least two parts: {s:?}")));
            }
            return Ok(g);
        }
        let (kind, num) = s
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("graph spec {s:?} is not family:N")))?;
        let n: usize = num
            .parse()
            .map_err(|_| Error::Parse(format!("bad vertex count in {s:?}")))?;
        match kind {
            "cycle" => Graph::cycle(n),
            "complete" => Graph::complete(n),
            "path" => Graph::path(n),
            _ => Err(Error::Parse(format!("unknown graph family {kind:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

impl TryFrom<&GraphJson> for Graph {
    type Error = Error;

    fn try_from(j: &GraphJson) -> Result<Self> {
        let edges: Vec<_> = j.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::from_edge_list(j.n, &edges)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ComponentDecomposition {
    pub count: usize,
    pub labels: Vec<usize>,
}

impl ComponentDecomposition {
    pub fn members(&self, t: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&v| self.labels[v] == t).collect()
    }

    /// The 0/1 indicator vector of component `t`.
    pub fn indicator(&self, t: usize) -> Vec<f64> {
        self.labels.iter().map(|&l| if l == t { 1.0 } else { 0.0 }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CommutantSource {
    Nullspace,
    MultiplicityFormula,
}

#[derive(Clone, Debug)]
pub struct CommutantBasis {
    pub dimension: usize,
    pub basis: Vec<ComplexMatrix>,
    pub source: CommutantSource,
}

/// `dim Comm(A_{C_n})`: `2n - 1` for odd `n`, `2n - 2` for even `n`.
pub fn cycle_commutant_dim_formula(n: usize) -> usize {
    assert!(n >= 3, "cycles have at least 3 vertices");
    if n % 2 == 1 {
        2 * n - 1
    } else {
        2 * n - 2
    }
}

pub fn is_permutation(perm: &[usize]) -> bool {
    let mut seen = vec![false; perm.len()];
    for &p in perm {
        if p >= perm.len() || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// Rotations `i -> i + k (mod 4)`, `k = 0..3`.
pub fn c4_rotations() -> Vec<Permutation> {
    (0..4).map(|k| (0..4).map(|i| (i + k) % 4).collect()).collect()
}

/// The eight automorphisms of the 4-cycle: rotations and reflections.
pub fn c4_dihedral() -> Vec<Permutation> {
    let mut out = c4_rotations();
    out.extend((0..4).map(|k| (0..4).map(|i| (k + 4 - i) % 4).collect()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cycle_adjacency() {
        let g = Graph::cycle(4).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                let want = (i + 1) % 4 == j || (j + 1) % 4 == i;
                assert_eq!(g.adjacent(i, j), want);
            }
        }
        assert_eq!(g.is_k_regular(), Some(2));
    }

    #[test]
    fn complete_is_j_minus_i() {
        let a = Graph::complete(4).unwrap().adjacency();
        assert_eq!(a, RealMatrix::from_element(4, 4, 1.0) - RealMatrix::identity(4, 4));
    }

    #[test]
    fn union_relabels() {
        let c3 = Graph::cycle(3).unwrap();
        let g = c3.disjoint_union(&c3);
        assert_eq!(g.n(), 6);
        assert_eq!(g.is_k_regular(), Some(2));
        assert!(g.adjacent(3, 5) && !g.adjacent(2, 3));
        let comps = g.connected_components();
        assert_eq!(comps.count, 2);
        assert_eq!(comps.members(1), vec![3, 4, 5]);
    }

    #[test]
    fn rejects_bad_edges() {
        assert!(Graph::from_edge_list(3, &[(0, 0)]).is_err());
        assert!(Graph::from_edge_list(3, &[(0, 3)]).is_err());
        assert!(Graph::cycle(2).is_err());
        assert!(Graph::complete(1).is_err());
    }

    #[test]
    fn regularity_and_components() {
        let c5 = Graph::cycle(5).unwrap();
        assert_eq!(c5.is_k_regular(), Some(2));
        assert_eq!(c5.connected_components().count, 1);
        let p3 = Graph::path(3).unwrap();
        assert_eq!(p3.is_k_regular(), None);
        assert_eq!(p3.degrees(), vec![1, 2, 1]);
    }

    #[test]
    fn spectral_dimensions() {
        assert_eq!(Graph::cycle(4).unwrap().commutant_dimension_spectral().unwrap(), 6);
        assert_eq!(Graph::cycle(5).unwrap().commutant_dimension_spectral().unwrap(), 9);
        assert_eq!(Graph::complete(4).unwrap().commutant_dimension_spectral().unwrap(), 10);
    }

    #[test]
    fn formula_values() {
        assert_eq!(cycle_commutant_dim_formula(3), 5);
        assert_eq!(cycle_commutant_dim_formula(4), 6);
        assert_eq!(cycle_commutant_dim_formula(8), 14);
    }

    #[test]
    fn k2_commutant_is_span_of_identity_and_swap() {
        let b = Graph::complete(2).unwrap().commutant_basis().unwrap();
        assert_eq!(b.dimension, 2);
        // Each element has the form [[a, b], [b, a]].
        for e in &b.basis {
            assert!((e[(0, 0)] - e[(1, 1)]).norm() < 1e-12);
            assert!((e[(0, 1)] - e[(1, 0)]).norm() < 1e-12);
        }
    }

    fn projection_residual(basis: &[ComplexMatrix], x: &ComplexMatrix) -> f64 {
        let mut r = x.clone();
        for e in basis {
            let c = e.iter().zip(x.iter()).map(|(a, b)| a.conj() * b).sum::<num_complex::Complex64>();
            r -= e.map(|z| z * c);
        }
        crate::linalg::fro(&r)
    }

    #[test]
    fn c4_commutant_contains_circulants() {
        let b = Graph::cycle(4).unwrap().commutant_basis().unwrap();
        assert_eq!(b.dimension, 6);
        for rot in c4_rotations() {
            let p = ComplexMatrix::from_fn(4, 4, |i, j| {
                num_complex::Complex64::new(if rot[i] == j { 1.0 } else { 0.0 }, 0.0)
            });
            assert!(projection_residual(&b.basis, &p) < 1e-10);
        }
    }

    #[test]
    fn commutant_basis_properties_on_family() {
        let mut family: Vec<Graph> = (3..=10).map(|n| Graph::cycle(n).unwrap()).collect();
        family.extend((2..=6).map(|n| Graph::complete(n).unwrap()));
        let c3 = Graph::cycle(3).unwrap();
        let c4 = Graph::cycle(4).unwrap();
        family.push(c3.disjoint_union(&c3));
        family.push(c4.disjoint_union(&c4));
        for g in &family {
            let b = g.commutant_basis().unwrap();
            let spec = g.spectrum().unwrap();
            assert_eq!(spec.multiplicities.iter().sum::<usize>(), g.n());
            assert_eq!(b.dimension, g.commutant_dimension_spectral().unwrap());
            let a = g.adjacency_complex();
            let an = crate::linalg::fro(&a);
            for (p, e) in b.basis.iter().enumerate() {
                let comm = &a * e - e * &a;
                assert!(crate::linalg::fro(&comm) <= 1e-9 * an * crate::linalg::fro(e));
                for q in &b.basis[..p] {
                    assert!(crate::linalg::inner_re(e, q).abs() < 1e-10);
                }
                assert!((crate::linalg::fro(e) - 1.0).abs() < 1e-10);
            }
        }
        let u = Graph::cycle(3).unwrap().disjoint_union(&Graph::cycle(3).unwrap());
        assert_eq!(u.commutant_basis().unwrap().dimension, 20);
    }

    #[test]
    fn cycle_methods_match_formula() {
        for n in 3..=12 {
            let g = Graph::cycle(n).unwrap();
            assert_eq!(g.commutant_dimension_spectral().unwrap(), cycle_commutant_dim_formula(n));
            assert_eq!(g.commutant_basis().unwrap().dimension, cycle_commutant_dim_formula(n));
        }
    }

    #[test]
    fn parse_specs() {
        assert_eq!("cycle:7".parse::<Graph>().unwrap(), Graph::cycle(7).unwrap());
        let u: Graph = "union:cycle:3+cycle:3".parse().unwrap();
        assert_eq!(u.n(), 6);
        assert_eq!(u.name(), "union:cycle:3+cycle:3");
        assert!("wheel:5".parse::<Graph>().is_err());
        assert!("cycle".parse::<Graph>().is_err());
        assert!("union:cycle:3".parse::<Graph>().is_err());
    }

    #[test]
    fn dihedral_group_is_automorphism_group_of_c4() {
        let g = Graph::cycle(4).unwrap();
        let d = c4_dihedral();
        assert_eq!(d.len(), 8);
        for p in &d {
            assert!(g.is_automorphism(p));
        }
        let mut sorted = d.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
        assert!(!g.is_automorphism(&[0, 2, 1, 3]));
    }

    #[test]
    fn json_roundtrip() {
        let g = Graph::cycle(5).unwrap();
        let back = Graph::try_from(&g.to_json()).unwrap();
        assert_eq!(back.edges(), g.edges());
    }
}
