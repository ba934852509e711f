//! Seeded benchmark sweeps over simulated models, written as long-format rows.

use std::collections::BTreeMap;
use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::gamma_order;
use crate::discovery::{causal_order, AlgoParams, DEFAULT_A, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::extremes::{default_threshold, pit_frechet2};
use crate::lsem::{simulate, LsemModel};
use crate::metrics::{replicate_seeds, sid_of_order, summarize};

pub const ALGORITHM: &str = "algorithm1";
pub const GAMMA_BASELINE: &str = "gamma-baseline";
pub const REVERSED_CONTROL: &str = "reversed-control";

/// Scale factors compared in an `a` sweep.
pub const A_SWEEP: [f64; 5] = [1.0001, 1.15, 1.3, 1.5, 2.0];

/// Grid of simulation settings and method parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub ds: Vec<usize>,
    pub ps: Vec<f64>,
    pub alphas: Vec<f64>,
    pub ns: Vec<usize>,
    /// `None` stands for `floor(n^0.4)`.
    pub ks: Vec<Option<usize>>,
    pub a_values: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub replicates: usize,
    pub seed: u64,
    pub gamma_baseline: bool,
    /// Adds the reverse of a true causal order as a worst-case reference.
    pub reversed_control: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            ds: vec![10],
            ps: vec![0.05],
            alphas: vec![2.0],
            ns: vec![1000],
            ks: vec![None],
            a_values: vec![DEFAULT_A],
            epsilons: vec![0.1, DEFAULT_EPSILON],
            replicates: 10,
            seed: 0,
            gamma_baseline: true,
            reversed_control: false,
        }
    }
}

impl BenchConfig {
    /// Grid over the scale parameter `a` with a single ε.
    pub fn a_sweep(d: usize, p: f64, n: usize, replicates: usize, seed: u64) -> Self {
        BenchConfig {
            ds: vec![d],
            ps: vec![p],
            ns: vec![n],
            a_values: A_SWEEP.to_vec(),
            epsilons: vec![DEFAULT_EPSILON],
            replicates,
            seed,
            gamma_baseline: false,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        let empty = [
            ("d", self.ds.is_empty()),
            ("p", self.ps.is_empty()),
            ("alpha", self.alphas.is_empty()),
            ("n", self.ns.is_empty()),
            ("k", self.ks.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidParameter(format!("empty {name} grid")));
        }
        if self.replicates == 0 {
            return Err(Error::InvalidParameter("replicate count must be at least 1".into()));
        }
        if self.a_values.is_empty() || self.epsilons.is_empty() {
            return Err(Error::InvalidParameter("empty a or epsilon grid".into()));
        }
        for &a in &self.a_values {
            for &epsilon in &self.epsilons {
                AlgoParams::new(a, epsilon, None)?;
            }
        }
        for &n in &self.ns {
            for k in self.ks.iter().flatten() {
                if *k == 0 || *k > n {
                    return Err(Error::ThresholdOutOfRange { k: *k, n });
                }
            }
        }
        Ok(())
    }
}

/// One method evaluated on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub n: usize,
    pub k: Option<usize>,
    pub a: Option<f64>,
    pub epsilon: Option<f64>,
    pub replicate: usize,
    pub seed: u64,
    pub sid_raw: usize,
    pub sid: f64,
}

struct Task {
    d: usize,
    p: f64,
    alpha: f64,
    n: usize,
    replicate: usize,
    seed: u64,
}

fn run_task(task: &Task, config: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rng = ChaCha20Rng::seed_from_u64(task.seed);
    let model = LsemModel::random(task.d, task.p, task.alpha, &mut rng)?;
    let abar = model.coefficient_matrix().standardize(task.alpha)?;
    let x = pit_frechet2(&simulate(&abar, task.n, task.alpha, &mut rng)?);
    let truth = model.dag();
    let row = |method: &str, k, a, epsilon, score: crate::metrics::SidScore| BenchRow {
        method: method.to_string(),
        d: task.d,
        p: task.p,
        alpha: task.alpha,
        n: task.n,
        k,
        a,
        epsilon,
        replicate: task.replicate,
        seed: task.seed,
        sid_raw: score.raw,
        sid: score.normalized,
    };

    let mut rows = Vec::new();
    for &k in &config.ks {
        let k = k.unwrap_or_else(|| default_threshold(task.n));
        for &a in &config.a_values {
            for &epsilon in &config.epsilons {
                let result = causal_order(&x, &AlgoParams::new(a, epsilon, Some(k))?)?;
                let score = sid_of_order(truth, &result.ancestral_order())?;
                rows.push(row(ALGORITHM, Some(k), Some(a), Some(epsilon), score));
            }
        }
        if config.gamma_baseline {
            let score = sid_of_order(truth, &gamma_order(&x, k)?)?;
            rows.push(row(GAMMA_BASELINE, Some(k), None, None, score));
        }
    }
    if config.reversed_control {
        let reversed: Vec<usize> = truth.topological_order().into_iter().rev().collect();
        rows.push(row(REVERSED_CONTROL, None, None, None, sid_of_order(truth, &reversed)?));
    }
    Ok(rows)
}

/// Runs the grid. Replicates are seeded from `config.seed` in grid order, so
/// the output does not depend on thread scheduling.
pub fn run_benchmark(config: &BenchConfig) -> Result<Vec<BenchRow>> {
    config.validate()?;
    let mut cells = Vec::new();
    for &d in &config.ds {
        for &p in &config.ps {
            for &alpha in &config.alphas {
                for &n in &config.ns {
                    cells.push((d, p, alpha, n));
                }
            }
        }
    }
    let seeds = replicate_seeds(config.seed, cells.len() * config.replicates);
    let tasks: Vec<Task> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, &(d, p, alpha, n))| {
            let seeds = &seeds;
            (0..config.replicates).map(move |replicate| Task {
                d,
                p,
                alpha,
                n,
                replicate,
                seed: seeds[c * config.replicates + replicate],
            })
        })
        .collect();
    let rows: Vec<Vec<BenchRow>> = tasks
        .par_iter()
        .map(|t| run_task(t, config))
        .collect::<Result<_>>()?;
    Ok(rows.concat())
}

pub fn write_rows_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// SID distribution of one method at one parameter setting.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub method: String,
    pub d: usize,
    pub p: f64,
    pub alpha: f64,
    pub n: usize,
    pub k: Option<usize>,
    pub a: Option<f64>,
    pub epsilon: Option<f64>,
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

/// Groups rows by everything except replicate and seed, in first-seen order.
pub fn summarize_rows(rows: &[BenchRow]) -> Vec<GroupSummary> {
    type Key = (String, usize, u64, u64, usize, Option<usize>, Option<u64>, Option<u64>);
    let key = |r: &BenchRow| -> Key {
        (
            r.method.clone(),
            r.d,
            r.p.to_bits(),
            r.alpha.to_bits(),
            r.n,
            r.k,
            r.a.map(f64::to_bits),
            r.epsilon.map(f64::to_bits),
        )
    };
    let mut order: Vec<Key> = Vec::new();
    let mut groups: BTreeMap<Key, (&BenchRow, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let k = key(r);
        groups
            .entry(k.clone())
            .or_insert_with(|| {
                order.push(k);
                (r, Vec::new())
            })
            .1
            .push(r.sid);
    }
    order
        .iter()
        .map(|k| {
            let (first, values) = &groups[k];
            let s = summarize(values).expect("nonempty group");
            GroupSummary {
                method: first.method.clone(),
                d: first.d,
                p: first.p,
                alpha: first.alpha,
                n: first.n,
                k: first.k,
                a: first.a,
                epsilon: first.epsilon,
                count: s.count,
                mean: s.mean,
                median: s.median,
                q1: s.q1,
                q3: s.q3,
            }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(summaries: &[GroupSummary], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in summaries {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}
