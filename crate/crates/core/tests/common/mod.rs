#![allow(dead_code)]

use gqms_core::linalg::{nullspace_real, RealMatrix};
use gqms_core::sdp::SdpProblem;
use gqms_core::RealSymmetricMatrix;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random problem whose slice contains the identity, so it is feasible,
/// and with positive definite cost, so it is bounded.
pub fn random_problem(seed: u64, n: usize, m: usize) -> SdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rsym = || {
        let a = RealMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        RealSymmetricMatrix::new(&a + a.transpose()).unwrap()
    };
    let g = rsym();
    let c = RealSymmetricMatrix::new(g.matrix() * g.matrix() + RealMatrix::identity(n, n) * 0.1).unwrap();
    let cons: Vec<_> = (0..m)
        .map(|_| {
            let a = rsym();
            let b = a.matrix().trace();
            (a, b)
        })
        .collect();
    SdpProblem::dense(&c, &cons)
}

/// Primal log-barrier path following on the affine slice, started at the
/// identity. Uses no dual variables; on the central path the optimality
/// gap is `n μ`.
pub fn barrier_oracle(p: &SdpProblem) -> f64 {
    assert_eq!(p.blocks.len(), 1);
    let c = p.c.to_dense(&p.blocks).remove(0);
    let cons: Vec<(RealMatrix, f64)> = p.constraints.iter().map(|k| (k.a.to_dense(&p.blocks).remove(0), k.b)).collect();
    let n = c.nrows();
    let x0 = RealMatrix::identity(n, n);
    assert!(cons.iter().all(|(a, b)| (a.dot(&x0) - b).abs() < 1e-12), "oracle starts at the identity");
    let basis: Vec<RealMatrix> = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let mut e = RealMatrix::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            e
        })
        .collect();
    let k = RealMatrix::from_fn(cons.len(), basis.len(), |r, q| cons[r].0.dot(&basis[q]));
    let dirs: Vec<RealMatrix> = nullspace_real(&k, 1e-12)
        .iter()
        .map(|v| basis.iter().enumerate().fold(RealMatrix::zeros(n, n), |acc, (t, e)| acc + e * v[t]))
        .collect();
    let d = dirs.len();
    let mut x = x0;
    let mut mu = 1.0;
    while n as f64 * mu > 1e-10 {
        for _ in 0..50 {
            let xi = x.clone().try_inverse().unwrap();
            let g = DVector::from_iterator(d, dirs.iter().map(|nk| c.dot(nk) / mu - xi.dot(nk)));
            let xn: Vec<RealMatrix> = dirs.iter().map(|nk| &xi * nk * &xi).collect();
            let h = RealMatrix::from_fn(d, d, |a, b| xn[a].dot(&dirs[b]));
            let step = -h.cholesky().unwrap().solve(&g);
            let dec = (-g.dot(&step)).sqrt();
            let dx = dirs.iter().enumerate().fold(RealMatrix::zeros(n, n), |acc, (t, nk)| acc + nk * step[t]);
            let mut t = if dec > 0.25 { 1.0 / (1.0 + dec) } else { 1.0 };
            while (&x + &dx * t).cholesky().is_none() {
                t *= 0.5;
            }
            x += dx * t;
            if dec < 1e-9 {
                break;
            }
        }
        mu *= 0.3;
    }
    c.dot(&x)
}
