//! Shared helpers for integration tests.
#![allow(dead_code)]

use extremal_order::graph::NodeSet;
use extremal_order::Dag;
use nalgebra::DMatrix;
use rand::Rng;

/// Adjustment validity checked on a linear Gaussian model with generic
/// weights: the interventional law of `x_j` under `do(x_i)` is compared with
/// the law obtained from the adjustment formula.
pub struct GaussianOracle {
    d: usize,
    b: DMatrix<f64>,
    sigma: DMatrix<f64>,
}

impl GaussianOracle {
    pub fn new<R: Rng>(dag: &Dag, rng: &mut R) -> Self {
        let d = dag.d();
        let mut b = DMatrix::zeros(d, d);
        for (from, to) in dag.edges() {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            b[(to - 1, from - 1)] = sign * rng.random_range(0.5..1.5);
        }
        let sigma = covariance(&b, &DMatrix::identity(d, d));
        GaussianOracle { d, b, sigma }
    }

    fn interventional(&self, i: usize, j: usize) -> (f64, f64) {
        let d = self.d;
        let mut cut = self.b.clone();
        cut.row_mut(i - 1).fill(0.0);
        let mut noise = DMatrix::identity(d, d);
        noise[(i - 1, i - 1)] = 0.0;
        let cov = covariance(&cut, &noise);
        let total = (DMatrix::identity(d, d) - &cut).try_inverse().unwrap();
        (total[(j - 1, i - 1)], cov[(j - 1, j - 1)])
    }

    fn adjusted(&self, i: usize, j: usize, z: &NodeSet) -> (f64, f64) {
        if z.contains(&j) {
            return (0.0, self.sigma[(j - 1, j - 1)]);
        }
        let reg: Vec<usize> = std::iter::once(i - 1).chain(z.iter().map(|v| v - 1)).collect();
        let m = reg.len();
        let s_rr = DMatrix::from_fn(m, m, |p, q| self.sigma[(reg[p], reg[q])]);
        let s_rj = DMatrix::from_fn(m, 1, |p, _| self.sigma[(reg[p], j - 1)]);
        let beta = s_rr.clone().try_inverse().unwrap() * &s_rj;
        let residual = self.sigma[(j - 1, j - 1)] - (s_rj.transpose() * &beta)[(0, 0)];
        let spread = if m > 1 {
            let bz = beta.rows(1, m - 1).into_owned();
            let s_zz = s_rr.view((1, 1), (m - 1, m - 1)).into_owned();
            (bz.transpose() * s_zz * &bz)[(0, 0)]
        } else {
            0.0
        };
        (beta[(0, 0)], residual + spread)
    }

    pub fn valid(&self, i: usize, j: usize, z: &NodeSet) -> bool {
        let (ts, tv) = self.interventional(i, j);
        let (s, v) = self.adjusted(i, j, z);
        (ts - s).abs() < 1e-8 && (tv - v).abs() < 1e-8 * tv.max(1.0)
    }
}

fn covariance(b: &DMatrix<f64>, noise: &DMatrix<f64>) -> DMatrix<f64> {
    let d = b.nrows();
    let inv = (DMatrix::identity(d, d) - b).try_inverse().unwrap();
    &inv * noise * inv.transpose()
}

pub fn sid_oracle<R: Rng>(truth: &Dag, estimate: &Dag, rng: &mut R) -> usize {
    let g = GaussianOracle::new(truth, rng);
    let mut raw = 0;
    for i in 1..=truth.d() {
        let z = estimate.parents(i).unwrap();
        for j in (1..=truth.d()).filter(|&j| j != i) {
            if !g.valid(i, j, &z) {
                raw += 1;
            }
        }
    }
    raw
}

pub fn permutations(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d);
            out.push(q);
        }
    }
    out
}

/// Nonempty proper subsets of `1..=d` as sorted label lists.
pub fn proper_subsets(d: usize) -> Vec<Vec<usize>> {
    (1u32..(1 << d) - 1)
        .map(|mask| (1..=d).filter(|v| mask & (1 << (v - 1)) != 0).collect())
        .collect()
}

pub fn bin() -> std::process::Command {
    std::process::Command::new(env!("CARGO_BIN_EXE_extremal-order"))
}
