//! Structural intervention distance and bootstrap uncertainty.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discovery::{causal_order, AlgoParams};
use crate::error::{Error, Result};
use crate::extremes::{pit_frechet2, SampleMatrix};
use crate::graph::{check_permutation, Dag, NodeSet};

/// Number of ordered pairs whose intervention distribution is inferred
/// wrongly, and that count divided by `d (d - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidScore {
    pub raw: usize,
    pub normalized: f64,
}

impl SidScore {
    fn new(raw: usize, d: usize) -> Self {
        let pairs = d * d.saturating_sub(1);
        let normalized = if pairs == 0 { 0.0 } else { raw as f64 / pairs as f64 };
        SidScore { raw, normalized }
    }
}

/// Complete DAG in which every node points to all nodes after it in
/// `ancestral_order`.
pub fn full_dag_from_order(ancestral_order: &[usize]) -> Result<Dag> {
    check_permutation(ancestral_order)?;
    let d = ancestral_order.len();
    let mut edges = Vec::with_capacity(d * d.saturating_sub(1) / 2);
    for (p, &from) in ancestral_order.iter().enumerate() {
        for &to in &ancestral_order[p + 1..] {
            edges.push((from, to));
        }
    }
    Dag::new(d, &edges)
}

/// Whether `pa_est(i)` is a valid adjustment set for the effect of `i` on `j` in `truth`.
fn parent_adjustment_valid(truth: &Dag, i: usize, j: usize, z: &NodeSet) -> Result<bool> {
    let de_i = truth.descendants(i)?;
    if z.contains(&j) {
        return Ok(!de_i.contains(&j));
    }
    if !de_i.contains(&j) {
        return truth.d_separated(i, j, z);
    }
    // Nodes other than i on proper causal paths from i to j.
    let an_j = truth.ancestors_inclusive(j)?;
    let causal: NodeSet = de_i.intersection(&an_j).copied().collect();
    for &w in &causal {
        if z.contains(&w) || truth.descendants(w)?.iter().any(|v| z.contains(v)) {
            return Ok(false);
        }
    }
    truth.d_separated_with(i, j, z, |from, to| !(from == i && causal.contains(&to)))
}

/// Structural intervention distance of `estimate` with respect to `truth`.
pub fn sid(truth: &Dag, estimate: &Dag) -> Result<SidScore> {
    let d = truth.d();
    if estimate.d() != d {
        return Err(Error::DimensionMismatch(format!(
            "true DAG has {d} nodes, estimate has {}",
            estimate.d()
        )));
    }
    let mut raw = 0;
    for i in 1..=d {
        let z = estimate.parents(i)?;
        for j in (1..=d).filter(|&j| j != i) {
            if !parent_adjustment_valid(truth, i, j, &z)? {
                raw += 1;
            }
        }
    }
    Ok(SidScore::new(raw, d))
}

/// SID of the complete DAG induced by an ancestral order.
pub fn sid_of_order(truth: &Dag, ancestral_order: &[usize]) -> Result<SidScore> {
    sid(truth, &full_dag_from_order(ancestral_order)?)
}

/// One bootstrap replicate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub replicate: usize,
    pub raw: usize,
    pub normalized: f64,
    pub seed: u64,
}

/// Per-replicate seeds drawn from a master generator.
pub fn replicate_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.random()).collect()
}

/// `n` row indices drawn uniformly with replacement.
pub fn resample_indices<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..n)).collect()
}

/// Runs transform, discovery and SID on the rows `indices` of `x`.
pub fn sid_on_rows(x: &SampleMatrix, indices: &[usize], truth: &Dag, params: &AlgoParams) -> Result<SidScore> {
    let sample = pit_frechet2(&x.select_rows(indices)?);
    let result = causal_order(&sample, params)?;
    sid_of_order(truth, &result.ancestral_order())
}

/// Bootstrap distribution of the SID over `replicates` resamples of size `n`.
pub fn bootstrap_sid(
    x: &SampleMatrix,
    truth: &Dag,
    params: &AlgoParams,
    replicates: usize,
    seed: u64,
) -> Result<Vec<BootstrapRow>> {
    if replicates == 0 {
        return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
    }
    if truth.d() != x.d() {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} columns, DAG has {} nodes",
            x.d(),
            truth.d()
        )));
    }
    params.validate()?;
    params.resolve_k(x.n())?;
    replicate_seeds(seed, replicates)
        .into_par_iter()
        .enumerate()
        .map(|(replicate, rep_seed)| {
            let mut rng = ChaCha20Rng::seed_from_u64(rep_seed);
            let indices = resample_indices(x.n(), &mut rng);
            let score = sid_on_rows(x, &indices, truth, params)?;
            Ok(BootstrapRow {
                replicate,
                raw: score.raw,
                normalized: score.normalized,
                seed: rep_seed,
            })
        })
        .collect()
}

pub fn write_bootstrap_csv<W: Write>(rows: &[BootstrapRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Location and spread of a set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linearly interpolated sample quantile.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Some(Summary {
        count: sorted.len(),
        mean: sorted.iter().sum::<f64>() / sorted.len() as f64,
        median: quantile(&sorted, 0.5),
        q1: quantile(&sorted, 0.25),
        q3: quantile(&sorted, 0.75),
    })
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Adjustment validity from first principles: a linear Gaussian model
    //! with generic weights, comparing the interventional distribution with
    //! the distribution produced by the adjustment formula.

    use super::*;
    use nalgebra::DMatrix;

    pub struct GaussianOracle {
        d: usize,
        /// `b[(to, from)]`.
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
            let sigma = Self::covariance(&b, &DMatrix::identity(d, d));
            GaussianOracle { d, b, sigma }
        }

        fn covariance(b: &DMatrix<f64>, noise: &DMatrix<f64>) -> DMatrix<f64> {
            let d = b.nrows();
            let inv = (DMatrix::identity(d, d) - b).try_inverse().expect("acyclic");
            &inv * noise * inv.transpose()
        }

        /// Slope and variance of `x_j` under `do(x_i)`.
        fn interventional(&self, i: usize, j: usize) -> (f64, f64) {
            let d = self.d;
            let mut cut = self.b.clone();
            cut.row_mut(i - 1).fill(0.0);
            let mut noise = DMatrix::identity(d, d);
            noise[(i - 1, i - 1)] = 0.0;
            let cov = Self::covariance(&cut, &noise);
            let inv_cut = (DMatrix::identity(d, d) - &cut).try_inverse().unwrap();
            (inv_cut[(j - 1, i - 1)], cov[(j - 1, j - 1)])
        }

        /// Slope and variance of `sum_z p(x_j | x_i, z) p(z)`.
        fn adjusted(&self, i: usize, j: usize, z: &NodeSet) -> (f64, f64) {
            if z.contains(&j) {
                return (0.0, self.sigma[(j - 1, j - 1)]);
            }
            let regressors: Vec<usize> = std::iter::once(i - 1).chain(z.iter().map(|v| v - 1)).collect();
            let m = regressors.len();
            let s_rr = DMatrix::from_fn(m, m, |p, q| self.sigma[(regressors[p], regressors[q])]);
            let s_rj = DMatrix::from_fn(m, 1, |p, _| self.sigma[(regressors[p], j - 1)]);
            let beta = s_rr.clone().try_inverse().expect("positive definite") * &s_rj;
            let residual = self.sigma[(j - 1, j - 1)] - (s_rj.transpose() * &beta)[(0, 0)];
            let bz = beta.rows(1, m - 1).into_owned();
            let s_zz = s_rr.view((1, 1), (m - 1, m - 1)).into_owned();
            let spread = if m > 1 { (bz.transpose() * s_zz * &bz)[(0, 0)] } else { 0.0 };
            (beta[(0, 0)], residual + spread)
        }

        pub fn valid(&self, i: usize, j: usize, z: &NodeSet) -> bool {
            let (t_slope, t_var) = self.interventional(i, j);
            let (a_slope, a_var) = self.adjusted(i, j, z);
            (t_slope - a_slope).abs() < 1e-8 && (t_var - a_var).abs() < 1e-8 * t_var.max(1.0)
        }
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
}
