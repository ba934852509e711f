//! Iterative estimation of a causal order from the Δ matrix.
//!
//! Each iteration compares, for every pair of unidentified nodes, the
//! scaling of `max(X_i, a X_j, a X_I)` with the scalings of the unscaled
//! maxima. Columns whose minimum is (close to) zero belong to nodes with no
//! unidentified ancestors; they are prepended to the identified list.

use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::extremes::{
    check_triple, default_threshold, estimate_scaling_init, pit_frechet2, rescaled_max_estimates,
    theoretical_max_scaling, theoretical_scaled_max_scaling, Margins, SampleMatrix,
};
use crate::lsem::CoefficientMatrix;

pub const DEFAULT_A: f64 = 1.3;
pub const DEFAULT_EPSILON: f64 = 0.4;

/// Tuning parameters. `k = None` means `floor(n^0.4)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    pub a: f64,
    pub epsilon: f64,
    pub k: Option<usize>,
}

impl Default for AlgoParams {
    fn default() -> Self {
        AlgoParams {
            a: DEFAULT_A,
            epsilon: DEFAULT_EPSILON,
            k: None,
        }
    }
}

impl AlgoParams {
    pub fn new(a: f64, epsilon: f64, k: Option<usize>) -> Result<Self> {
        let p = AlgoParams { a, epsilon, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 1.0 && self.a.is_finite()) {
            return Err(Error::InvalidParameter(format!("a = {} must exceed 1", self.a)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "epsilon = {} must be nonnegative",
                self.epsilon
            )));
        }
        if self.k == Some(0) {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        Ok(())
    }

    /// Threshold count for a sample of size `n`.
    pub fn resolve_k(&self, n: usize) -> Result<usize> {
        let k = self.k.unwrap_or_else(|| default_threshold(n));
        if k == 0 || k > n {
            return Err(Error::ThresholdOutOfRange { k, n });
        }
        Ok(k)
    }
}

/// `d x d` matrix with `+inf` on rows and columns of identified nodes and
/// on the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaMatrix {
    d: usize,
    values: Vec<f64>,
}

impl DeltaMatrix {
    pub fn excluded(d: usize) -> Self {
        DeltaMatrix {
            d,
            values: vec![f64::INFINITY; d * d],
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Entry `(i, j)`, 1-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * self.d + j - 1]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[(i - 1) * self.d + j - 1] = v;
    }

    /// Minimum of column `j` over the remaining rows other than `j`.
    pub fn col_min(&self, j: usize, remaining: &[usize]) -> f64 {
        remaining
            .iter()
            .filter(|&&i| i != j)
            .map(|&i| self.get(i, j))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn col_mins(&self, remaining: &[usize]) -> Vec<f64> {
        remaining.iter().map(|&j| self.col_min(j, remaining)).collect()
    }

    /// Rows as vectors; excluded entries become `None`.
    pub fn rows(&self) -> Vec<Vec<Option<f64>>> {
        self.values
            .chunks(self.d)
            .map(|r| r.iter().map(|v| v.is_finite().then_some(*v)).collect())
            .collect()
    }
}

impl Serialize for DeltaMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let rows = self.rows();
        let mut seq = serializer.serialize_seq(Some(rows.len()))?;
        for r in &rows {
            seq.serialize_element(r)?;
        }
        seq.end()
    }
}

/// Audit record of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    /// Identified nodes before this iteration, most downstream first.
    pub identified: Vec<usize>,
    /// Remaining nodes, ascending.
    pub remaining: Vec<usize>,
    /// Column minima of Δ over the remaining nodes (aligned with `remaining`).
    pub col_mins: Vec<Option<f64>>,
    /// `col_mins - max(col_mins)`.
    pub delta: Vec<Option<f64>>,
    pub epsilon_hat: f64,
    pub selected: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_matrix: Option<DeltaMatrix>,
}

/// Estimated causal order with its audit trail.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingResult {
    /// Identified list: the last selected node first, sources last.
    pub ordering: Vec<usize>,
    pub steps: Vec<Step>,
    pub a: f64,
    pub epsilon: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl OrderingResult {
    /// Roots first: every node precedes its descendants when the estimate is valid.
    pub fn ancestral_order(&self) -> Vec<usize> {
        self.ordering.iter().rev().copied().collect()
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn remaining_nodes(d: usize, identified: &[usize]) -> Vec<usize> {
    (1..=d).filter(|v| !identified.contains(v)).collect()
}

fn check_identified(d: usize, identified: &[usize]) -> Result<()> {
    let mut seen = vec![false; d + 1];
    for &v in identified {
        if v == 0 || v > d {
            return Err(Error::InvalidNode { node: v, d });
        }
        if std::mem::replace(&mut seen[v], true) {
            return Err(Error::OverlappingNodes(format!("repeated node {v} in I")));
        }
    }
    if identified.len() >= d {
        return Err(Error::InvalidParameter(
            "identified set must be a proper subset".into(),
        ));
    }
    Ok(())
}

/// Empirical Δ for the identified list `identified` (Fréchet(2) margins).
pub fn delta_matrix(x: &SampleMatrix, identified: &[usize], params: &AlgoParams) -> Result<DeltaMatrix> {
    params.validate()?;
    let d = x.d();
    check_identified(d, identified)?;
    let k = params.resolve_k(x.n())?;
    let a = params.a;
    let remaining = remaining_nodes(d, identified);

    // Used only at the first step; later steps read `M_{j,I}` off the same
    // thresholded rows as the other two terms.
    let init: Vec<f64> = if identified.is_empty() {
        remaining
            .par_iter()
            .map(|&j| estimate_scaling_init(x, &[j], k))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let pairs: Vec<(usize, usize)> = remaining
        .iter()
        .flat_map(|&i| remaining.iter().filter(move |&&j| j != i).map(move |&j| (i, j)))
        .collect();
    let entries: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let mut scaled = Vec::with_capacity(identified.len() + 1);
            scaled.push(j);
            scaled.extend_from_slice(identified);
            let est = rescaled_max_estimates(x, i, &scaled, a, k);
            let base = if identified.is_empty() {
                init[remaining.binary_search(&j).expect("remaining node")]
            } else {
                est.rest
            };
            est.scaled - est.unscaled - (a * a - 1.0) * base
        })
        .collect();

    let mut delta = DeltaMatrix::excluded(d);
    for (&(i, j), v) in pairs.iter().zip(entries) {
        delta.set(i, j, v);
    }
    Ok(delta)
}

/// Exact Δ from a coefficient matrix; `identified` must be closed under ancestors.
pub fn theoretical_delta(a_mat: &CoefficientMatrix, identified: &[usize], a: f64) -> Result<DeltaMatrix> {
    let d = a_mat.d();
    check_identified(d, identified)?;
    if !a_mat.is_ancestrally_closed(identified) {
        return Err(Error::NotAncestrallyClosed(identified.to_vec()));
    }
    let remaining = remaining_nodes(d, identified);
    let mut delta = DeltaMatrix::excluded(d);
    for &j in &remaining {
        let mut with_j = vec![j];
        with_j.extend_from_slice(identified);
        let base = theoretical_max_scaling(a_mat, &with_j)?;
        for &i in remaining.iter().filter(|&&i| i != j) {
            check_triple(d, i, j, identified)?;
            let mut all = vec![i, j];
            all.extend_from_slice(identified);
            let v = theoretical_scaled_max_scaling(a_mat, i, j, identified, a)?
                - theoretical_max_scaling(a_mat, &all)?
                - (a * a - 1.0) * base;
            delta.set(i, j, v);
        }
    }
    Ok(delta)
}

/// `epsilon * |max_j colMin_j|` over the remaining columns.
pub fn epsilon_threshold(delta: &DeltaMatrix, identified: &[usize], epsilon: f64) -> Result<f64> {
    let remaining = remaining_nodes(delta.d(), identified);
    if remaining.is_empty() {
        return Err(Error::InvalidParameter("no remaining columns".into()));
    }
    let best = finite_max(&delta.col_mins(&remaining));
    Ok(match best {
        Some(m) => epsilon * m.abs(),
        None => 0.0,
    })
}

fn finite_max(values: &[f64]) -> Option<f64> {
    values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(None, |acc, v| Some(acc.map_or(v, |m: f64| m.max(v))))
}

/// Nodes whose `|delta|` is within `eps_hat`, ascending by delta then label.
pub fn select_nodes(delta: &DeltaMatrix, identified: &[usize], eps_hat: f64) -> Vec<usize> {
    select_with_diagnostics(delta, identified, eps_hat).0
}

fn select_with_diagnostics(
    delta: &DeltaMatrix,
    identified: &[usize],
    eps_hat: f64,
) -> (Vec<usize>, Vec<usize>, Vec<f64>, Vec<f64>) {
    let remaining = remaining_nodes(delta.d(), identified);
    let mins = delta.col_mins(&remaining);
    if remaining.len() == 1 {
        return (remaining.clone(), remaining, mins, vec![0.0]);
    }
    let Some(best) = finite_max(&mins) else {
        // Nothing usable: take the smallest remaining label so the loop progresses.
        let deltas = vec![f64::NAN; remaining.len()];
        return (vec![remaining[0]], remaining, mins, deltas);
    };
    let deltas: Vec<f64> = mins.iter().map(|m| m - best).collect();
    let mut chosen: Vec<(f64, usize)> = remaining
        .iter()
        .zip(&deltas)
        .filter(|(_, dl)| dl.abs() <= eps_hat)
        .map(|(&p, &dl)| (dl, p))
        .collect();
    chosen.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
    (
        chosen.into_iter().map(|(_, p)| p).collect(),
        remaining,
        mins,
        deltas,
    )
}

/// Runs the selection loop with any Δ source.
pub fn order_with<F>(d: usize, epsilon: f64, keep_matrices: bool, mut delta_fn: F) -> Result<(Vec<usize>, Vec<Step>)>
where
    F: FnMut(&[usize]) -> Result<DeltaMatrix>,
{
    if d == 0 {
        return Err(Error::EmptyGraph);
    }
    let mut identified: Vec<usize> = Vec::with_capacity(d);
    let mut steps = Vec::new();
    while identified.len() < d {
        let remaining = remaining_nodes(d, &identified);
        if remaining.len() == 1 {
            steps.push(Step {
                identified: identified.clone(),
                remaining: remaining.clone(),
                col_mins: vec![None],
                delta: vec![Some(0.0)],
                epsilon_hat: 0.0,
                selected: remaining.clone(),
                delta_matrix: None,
            });
            identified.insert(0, remaining[0]);
            break;
        }
        let delta = delta_fn(&identified)?;
        let eps_hat = epsilon_threshold(&delta, &identified, epsilon)?;
        let (selected, remaining, mins, deltas) = select_with_diagnostics(&delta, &identified, eps_hat);
        let finite = |v: &f64| v.is_finite().then_some(*v);
        steps.push(Step {
            identified: identified.clone(),
            remaining,
            col_mins: mins.iter().map(finite).collect(),
            delta: deltas.iter().map(finite).collect(),
            epsilon_hat: eps_hat,
            selected: selected.clone(),
            delta_matrix: keep_matrices.then(|| delta.clone()),
        });
        identified.splice(0..0, selected);
    }
    Ok((identified, steps))
}

/// Estimates a causal order from a sample. Raw margins are standardised first.
pub fn causal_order(x: &SampleMatrix, params: &AlgoParams) -> Result<OrderingResult> {
    params.validate()?;
    let standardised;
    let x = match x.margins() {
        Margins::Frechet2 => x,
        Margins::Raw => {
            log::warn!("input has raw margins; applying the empirical Fréchet(2) transform");
            standardised = pit_frechet2(x);
            &standardised
        }
    };
    let k = params.resolve_k(x.n())?;
    let resolved = AlgoParams { k: Some(k), ..*params };
    let (ordering, steps) = order_with(x.d(), params.epsilon, true, |identified| {
        delta_matrix(x, identified, &resolved)
    })?;
    Ok(OrderingResult {
        ordering,
        steps,
        a: params.a,
        epsilon: params.epsilon,
        k: Some(k),
        n: Some(x.n()),
        seed: None,
    })
}

/// The same loop driven by the exact Δ of a coefficient matrix.
pub fn causal_order_oracle(a_mat: &CoefficientMatrix, a: f64, epsilon: f64) -> Result<OrderingResult> {
    AlgoParams::new(a, epsilon, None)?;
    let (ordering, steps) = order_with(a_mat.d(), epsilon, true, |identified| {
        theoretical_delta(a_mat, identified, a)
    })?;
    Ok(OrderingResult {
        ordering,
        steps,
        a,
        epsilon,
        k: None,
        n: None,
        seed: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::four_node_example;
    use crate::lsem::{four_node_model, simulate, LsemModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn example_abar() -> CoefficientMatrix {
        four_node_model([0.7, 0.4, 1.1, 0.9, 0.3], [1.2, 0.8, 0.5, 1.4])
            .coefficient_matrix()
            .standardize(2.0)
            .unwrap()
    }

    #[test]
    fn sources_give_zero_columns() {
        let delta = theoretical_delta(&example_abar(), &[], 1.3).unwrap();
        for j in [3, 4] {
            for i in (1..=4).filter(|&i| i != j) {
                assert!(delta.get(i, j).abs() < 1e-12, "({i},{j}) = {}", delta.get(i, j));
            }
        }
        for j in [1, 2] {
            assert!(delta.col_min(j, &[1, 2, 3, 4]) < -1e-6);
        }
    }

    #[test]
    fn second_step_separates_one_from_two() {
        let delta = theoretical_delta(&example_abar(), &[3, 4], 1.3).unwrap();
        assert!(delta.get(1, 2).abs() < 1e-12);
        assert!(delta.get(2, 1) < -1e-6);
        assert!(delta.get(3, 1).is_infinite() && delta.get(1, 4).is_infinite());
    }

    #[test]
    fn closure_is_enforced() {
        assert!(matches!(
            theoretical_delta(&example_abar(), &[2], 1.3),
            Err(Error::NotAncestrallyClosed(_))
        ));
    }

    #[test]
    fn edgeless_delta_is_zero() {
        let delta = theoretical_delta(&CoefficientMatrix::identity(4), &[], 1.5).unwrap();
        for i in 1..=4 {
            for j in (1..=4).filter(|&j| j != i) {
                assert!(delta.get(i, j).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn epsilon_threshold_cases() {
        let delta = theoretical_delta(&example_abar(), &[], 1.3).unwrap();
        assert!(epsilon_threshold(&delta, &[], 0.4).unwrap() < 1e-12);

        let mut ones = DeltaMatrix::excluded(3);
        for i in 1..=3 {
            for j in (1..=3).filter(|&j| j != i) {
                ones.set(i, j, -1.0);
            }
        }
        assert_eq!(epsilon_threshold(&ones, &[], 0.25).unwrap(), 0.25);
        assert_eq!(epsilon_threshold(&ones, &[], 0.0).unwrap(), 0.0);
        assert!(epsilon_threshold(&ones, &[1, 2, 3], 0.1).is_err());
    }

    #[test]
    fn selection_threshold_arithmetic() {
        // Column minima -0.5, -0.2, 0 give delta (-0.5, -0.2, 0).
        let mut delta = DeltaMatrix::excluded(3);
        let mins = [-0.5, -0.2, 0.0];
        for j in 1..=3 {
            for i in (1..=3).filter(|&i| i != j) {
                delta.set(i, j, mins[j - 1]);
            }
        }
        assert_eq!(select_nodes(&delta, &[], 0.1), vec![3]);
        assert_eq!(select_nodes(&delta, &[], 0.3), vec![2, 3]);
        assert_eq!(select_nodes(&delta, &[1, 2], 0.0), vec![3]);
    }

    #[test]
    fn selection_on_example_picks_both_sources() {
        let delta = theoretical_delta(&example_abar(), &[], 1.3).unwrap();
        let eps = epsilon_threshold(&delta, &[], 0.4).unwrap();
        let mut pi = select_nodes(&delta, &[], eps.max(1e-12));
        pi.sort_unstable();
        assert_eq!(pi, vec![3, 4]);
    }

    #[test]
    fn oracle_reproduces_worked_ordering() {
        let res = causal_order_oracle(&example_abar(), 1.3, 0.4).unwrap();
        assert_eq!(&res.ordering[..2], &[1, 2]);
        let mut tail = res.ordering[2..].to_vec();
        tail.sort_unstable();
        assert_eq!(tail, vec![3, 4]);
        assert!(four_node_example().is_causal_order(&res.ancestral_order()).unwrap());
    }

    #[test]
    fn oracle_with_zero_epsilon_is_valid() {
        let mut rng = ChaCha20Rng::seed_from_u64(41);
        for _ in 0..20 {
            let m = LsemModel::random(6, 0.5, 2.0, &mut rng).unwrap();
            let abar = m.coefficient_matrix().standardize(2.0).unwrap();
            let res = causal_order_oracle(&abar, 1.3, 0.0).unwrap();
            assert!(m.dag().is_causal_order(&res.ancestral_order()).unwrap());
        }
    }

    #[test]
    fn jointly_selected_nodes_are_unrelated() {
        let mut rng = ChaCha20Rng::seed_from_u64(43);
        for _ in 0..30 {
            let m = LsemModel::random(7, 0.3, 2.0, &mut rng).unwrap();
            let abar = m.coefficient_matrix().standardize(2.0).unwrap();
            let res = causal_order_oracle(&abar, 1.3, 0.4).unwrap();
            for step in &res.steps {
                for &p in &step.selected {
                    let anc = m.dag().ancestors(p).unwrap();
                    assert!(step.selected.iter().all(|q| !anc.contains(q)));
                }
            }
        }
    }

    #[test]
    fn single_node() {
        let x = SampleMatrix::from_rows(&[vec![1.0], vec![2.0]], Margins::Raw).unwrap();
        let res = causal_order(&x, &AlgoParams::default()).unwrap();
        assert_eq!(res.ordering, vec![1]);
        assert_eq!(res.steps.len(), 1);
    }

    #[test]
    fn parameter_validation() {
        assert!(AlgoParams::new(1.0, 0.4, None).is_err());
        assert!(AlgoParams::new(1.3, -0.1, None).is_err());
        assert!(AlgoParams::new(1.3, 0.4, Some(0)).is_err());
        let p = AlgoParams::new(1.3, 0.4, Some(10)).unwrap();
        assert!(matches!(p.resolve_k(5), Err(Error::ThresholdOutOfRange { k: 10, n: 5 })));
    }

    #[test]
    fn empirical_source_columns_near_zero() {
        let m = four_node_model([0.7, 0.4, 1.1, 0.9, 0.3], [1.2, 0.8, 0.5, 1.4]);
        let abar = m.coefficient_matrix().standardize(2.0).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(5000);
        let x = pit_frechet2(&simulate(&abar, 5000, 2.0, &mut rng).unwrap());
        let delta = delta_matrix(&x, &[], &AlgoParams::default()).unwrap();
        for j in [3, 4] {
            let m = delta.col_min(j, &[1, 2, 3, 4]);
            assert!(m.abs() <= 0.15, "column {j} min {m}");
        }
    }

    #[test]
    fn empirical_delta_is_deterministic_and_respects_exclusions() {
        let mut rng = ChaCha20Rng::seed_from_u64(77);
        let m = LsemModel::random(5, 0.4, 2.0, &mut rng).unwrap();
        let abar = m.coefficient_matrix().standardize(2.0).unwrap();
        let x = pit_frechet2(&simulate(&abar, 800, 2.0, &mut rng).unwrap());
        let p = AlgoParams::default();
        let d1 = delta_matrix(&x, &[2, 4], &p).unwrap();
        let d2 = delta_matrix(&x, &[2, 4], &p).unwrap();
        assert_eq!(d1, d2);
        for v in 1..=5 {
            assert!(d1.get(v, v).is_infinite());
            assert!(d1.get(2, v).is_infinite() && d1.get(v, 4).is_infinite());
        }
        assert!(d1.get(1, 3).is_finite());
    }

    #[test]
    fn empirical_delta_nonpositive_after_first_step() {
        // Each thresholded row contributes max(L, a²R) - max(L, R) - (a² - 1)R <= 0.
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let m = LsemModel::random(6, 0.5, 2.0, &mut rng).unwrap();
        let abar = m.coefficient_matrix().standardize(2.0).unwrap();
        let x = pit_frechet2(&simulate(&abar, 1000, 2.0, &mut rng).unwrap());
        for identified in [vec![1], vec![3, 5], vec![6, 2, 4]] {
            let delta = delta_matrix(&x, &identified, &AlgoParams::default()).unwrap();
            for i in 1..=6 {
                for j in 1..=6 {
                    let v = delta.get(i, j);
                    assert!(v.is_infinite() || v <= 1e-12, "I={identified:?} ({i},{j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn result_serialises() {
        let res = causal_order_oracle(&example_abar(), 1.3, 0.4).unwrap().with_seed(9);
        let v: serde_json::Value = serde_json::from_str(&res.to_json().unwrap()).unwrap();
        assert_eq!(v["seed"], 9);
        assert_eq!(v["ordering"].as_array().unwrap().len(), 4);
        assert!(v["steps"][0]["delta_matrix"][0][0].is_null());
    }

    #[test]
    fn ordering_is_permutation_for_noise() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x = simulate(&CoefficientMatrix::identity(5), 300, 2.0, &mut rng).unwrap();
        let res = causal_order(&x, &AlgoParams::default()).unwrap();
        let mut o = res.ordering.clone();
        o.sort_unstable();
        assert_eq!(o, vec![1, 2, 3, 4, 5]);
    }
}
