//! Angular measures and extremal scalings.
//!
//! The theoretical side works from a coefficient matrix `A`: the angular
//! measure of `A Z` has one atom per column, and the squared scaling of a
//! maximum `M_I = max(X_i : i in I)` is `sum_k max_{i in I} a_ik^2`.
//!
//! The empirical side standardises margins to Fréchet(2) by ranks, takes
//! Euclidean angular decompositions of (possibly rescaled) sub-vectors and
//! averages over the `k` observations with the largest radii.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lsem::CoefficientMatrix;

/// Marginal state of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Margins {
    Raw,
    Frechet2,
}

/// `n x d` nonnegative observations, stored row-major.
///
/// Rows (observations) are indexed from 0, columns (nodes) from 1.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
    margins: Margins,
}

impl SampleMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>, margins: Margins) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::DimensionMismatch(format!("empty sample ({n}x{d})")));
        }
        if values.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {n}x{d} sample",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "entry ({}, {}) = {} is not a finite nonnegative number",
                pos / d,
                pos % d + 1,
                values[pos]
            )));
        }
        Ok(SampleMatrix {
            n,
            d,
            values,
            margins,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], margins: Margins) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("rows have unequal lengths".into()));
        }
        Self::new(rows.len(), d, rows.concat(), margins)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn margins(&self) -> Margins {
        self.margins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.d..(row + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.d)
    }

    /// Entry at observation `row` (0-based) and node `node` (1-based).
    pub fn get(&self, row: usize, node: usize) -> f64 {
        self.values[row * self.d + node - 1]
    }

    pub fn column(&self, node: usize) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().skip(node - 1).step_by(self.d).copied()
    }

    /// New sample made of the given rows (repetition allowed).
    pub fn select_rows(&self, rows: &[usize]) -> Result<SampleMatrix> {
        let mut values = Vec::with_capacity(rows.len() * self.d);
        for &r in rows {
            if r >= self.n {
                return Err(Error::InvalidParameter(format!("row {r} out of range")));
            }
            values.extend_from_slice(self.row(r));
        }
        SampleMatrix::new(rows.len(), self.d, values, self.margins)
    }

    pub fn with_margins(mut self, margins: Margins) -> Self {
        self.margins = margins;
        self
    }

    pub(crate) fn check_node(&self, node: usize) -> Result<()> {
        if node == 0 || node > self.d {
            Err(Error::InvalidNode { node, d: self.d })
        } else {
            Ok(())
        }
    }

    pub(crate) fn check_k(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.n {
            Err(Error::ThresholdOutOfRange { k, n: self.n })
        } else {
            Ok(())
        }
    }
}

/// Empirical ranks `#{m : x_m <= x_l}` of a column (ties share the top rank).
pub(crate) fn upper_ranks(column: &[f64]) -> Vec<usize> {
    let n = column.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| column[p].total_cmp(&column[q]));
    let mut ranks = vec![0; n];
    let mut start = 0;
    while start < n {
        let mut end = start;
        while end + 1 < n && column[order[end + 1]] == column[order[start]] {
            end += 1;
        }
        for &idx in &order[start..=end] {
            ranks[idx] = end + 1;
        }
        start = end + 1;
    }
    ranks
}

/// Columnwise empirical probability integral transform to Fréchet(2):
/// `x = (-log(rank / (n + 1)))^(-1/2)`.
///
/// Depends on the data only through ranks, so it is idempotent.
pub fn pit_frechet2(raw: &SampleMatrix) -> SampleMatrix {
    let (n, d) = (raw.n, raw.d);
    let mut values = vec![0.0; n * d];
    let denom = (n + 1) as f64;
    for node in 1..=d {
        let column: Vec<f64> = raw.column(node).collect();
        for (row, rank) in upper_ranks(&column).into_iter().enumerate() {
            values[row * d + node - 1] = (-(rank as f64 / denom).ln()).powf(-0.5);
        }
    }
    SampleMatrix {
        n,
        d,
        values,
        margins: Margins::Frechet2,
    }
}

/// Radii and unit directions of every observation.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularRepresentation {
    pub radii: Vec<f64>,
    pub angles: Vec<Vec<f64>>,
}

impl AngularRepresentation {
    pub fn reconstruct(&self, row: usize) -> Vec<f64> {
        self.angles[row].iter().map(|w| w * self.radii[row]).collect()
    }
}

/// Euclidean polar decomposition `R_l = ||X_l||`, `w_l = X_l / R_l`.
pub fn angular_decomposition(x: &SampleMatrix) -> Result<AngularRepresentation> {
    let mut radii = Vec::with_capacity(x.n);
    let mut angles = Vec::with_capacity(x.n);
    for (l, row) in x.rows().enumerate() {
        let r = euclidean_norm(row);
        if r == 0.0 {
            return Err(Error::ZeroRow(l));
        }
        radii.push(r);
        angles.push(row.iter().map(|v| v / r).collect());
    }
    Ok(AngularRepresentation { radii, angles })
}

fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Discrete angular measure: atoms on the positive unit sphere with masses.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AngularMeasure {
    pub atoms: Vec<Vec<f64>>,
    pub masses: Vec<f64>,
}

impl AngularMeasure {
    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// `integral f dH = sum_k mass_k f(atom_k)`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, f: F) -> f64 {
        self.atoms
            .iter()
            .zip(&self.masses)
            .map(|(atom, m)| m * f(atom))
            .sum()
    }

    /// Mass of an atom on the sphere normalised to a probability measure.
    pub fn normalised_masses(&self) -> Vec<f64> {
        let total = self.total_mass();
        self.masses.iter().map(|m| m / total).collect()
    }
}

/// Angular measure of `A Z`: atom `a_j / ||a_j||` with mass `||a_j||^alpha`
/// for each column `a_j` (Euclidean norm).
pub fn angular_measure(a: &CoefficientMatrix, alpha: f64) -> Result<AngularMeasure> {
    let d = a.d();
    let mut atoms = Vec::with_capacity(d);
    let mut masses = Vec::with_capacity(d);
    for (j, col) in a.matrix().column_iter().enumerate() {
        let norm = col.norm();
        if norm == 0.0 {
            return Err(Error::ZeroColumn(j + 1));
        }
        atoms.push(col.iter().map(|v| v / norm).collect());
        masses.push(norm.powf(alpha));
    }
    Ok(AngularMeasure { atoms, masses })
}

/// `sigma^2_ij = (A A^T)_ij = sum_k a_ik a_jk`.
pub fn theoretical_scaling(a: &CoefficientMatrix, i: usize, j: usize) -> Result<f64> {
    check_matrix_node(a, i)?;
    check_matrix_node(a, j)?;
    Ok((1..=a.d()).map(|k| a.get(i, k) * a.get(j, k)).sum())
}

/// Squared scaling of `M_I = max(X_i : i in I)`: `sum_k max_{i in I} a_ik^2`.
pub fn theoretical_max_scaling(a: &CoefficientMatrix, set: &[usize]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::InvalidParameter("index set must be nonempty".into()));
    }
    for &i in set {
        check_matrix_node(a, i)?;
    }
    Ok((1..=a.d())
        .map(|k| set.iter().map(|&i| a.get(i, k).powi(2)).fold(0.0, f64::max))
        .sum())
}

/// Squared scaling of `M_{i,aj,aI} = max(X_i, a X_j, a X_I)`:
/// `sum_k max(a_ik^2, a^2 a_jk^2, a^2 max_{r in I} a_rk^2)`.
pub fn theoretical_scaled_max_scaling(
    a: &CoefficientMatrix,
    i: usize,
    j: usize,
    set: &[usize],
    scale: f64,
) -> Result<f64> {
    check_triple(a.d(), i, j, set)?;
    let s2 = scale * scale;
    Ok((1..=a.d())
        .map(|k| {
            let mut m = a.get(i, k).powi(2).max(s2 * a.get(j, k).powi(2));
            for &r in set {
                m = m.max(s2 * a.get(r, k).powi(2));
            }
            m
        })
        .sum())
}

fn check_matrix_node(a: &CoefficientMatrix, node: usize) -> Result<()> {
    if node == 0 || node > a.d() {
        Err(Error::InvalidNode { node, d: a.d() })
    } else {
        Ok(())
    }
}

/// Validates `i != j`, `i, j` outside `set`, `set` free of repeats.
pub(crate) fn check_triple(d: usize, i: usize, j: usize, set: &[usize]) -> Result<()> {
    for &v in [i, j].iter().chain(set) {
        if v == 0 || v > d {
            return Err(Error::InvalidNode { node: v, d });
        }
    }
    if i == j || set.contains(&i) || set.contains(&j) {
        return Err(Error::OverlappingNodes(format!("i = {i}, j = {j}, I = {set:?}")));
    }
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::OverlappingNodes(format!("repeated node in I = {set:?}")));
    }
    Ok(())
}

/// Default threshold count `floor(n^0.4)`, at least 1.
pub fn default_threshold(n: usize) -> usize {
    ((n as f64).powf(0.4) + 1e-9).floor().max(1.0) as usize
}

/// `k`-th largest value of `values` (1-based `k`).
pub(crate) fn kth_largest(values: &[f64], k: usize) -> f64 {
    let mut buf = values.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |p, q| q.total_cmp(p));
    *kth
}

/// Estimates sharing the top-`k` rows of `(X_lead, a X_s for s in scaled)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct RescaledMax {
    /// Maximum of the rescaled angles.
    pub scaled: f64,
    /// Maximum of the angles with the factor `a` divided back out.
    pub unscaled: f64,
    /// As `unscaled`, restricted to the scaled components.
    pub rest: f64,
}

/// Rows at the origin carry no direction and contribute nothing.
pub(crate) fn rescaled_max_estimates(
    x: &SampleMatrix,
    lead: usize,
    scaled: &[usize],
    a: f64,
    k: usize,
) -> RescaledMax {
    let radii: Vec<f64> = x
        .rows()
        .map(|row| {
            let lead_v = row[lead - 1];
            let mut r2 = lead_v * lead_v;
            for &s in scaled {
                let v = a * row[s - 1];
                r2 += v * v;
            }
            r2.sqrt()
        })
        .collect();
    let threshold = kth_largest(&radii, k);
    let a2 = a * a;
    let mut sum_scaled = 0.0;
    let mut sum_unscaled = 0.0;
    let mut sum_rest = 0.0;
    for (row, &r) in x.rows().zip(&radii) {
        if r < threshold || r == 0.0 {
            continue;
        }
        let lead_sq = row[lead - 1] * row[lead - 1];
        let rest_sq = scaled
            .iter()
            .map(|&s| row[s - 1] * row[s - 1])
            .fold(0.0, f64::max);
        let r2 = r * r;
        sum_scaled += lead_sq.max(a2 * rest_sq) / r2;
        sum_unscaled += lead_sq.max(rest_sq) / r2;
        sum_rest += rest_sq / r2;
    }
    let prefactor = (1.0 + a2 * scaled.len() as f64) / k as f64;
    RescaledMax {
        scaled: prefactor * sum_scaled,
        unscaled: prefactor * sum_unscaled,
        rest: prefactor * sum_rest,
    }
}

/// Estimate of the squared scaling of `M_{i,aj,aI}` from the angular
/// measure of `(X_i, a X_j, a X_I)`.
pub fn estimate_scaling_scaled(
    x: &SampleMatrix,
    i: usize,
    j: usize,
    set: &[usize],
    a: f64,
    k: usize,
) -> Result<f64> {
    check_estimator_args(x, i, j, set, a, k)?;
    Ok(rescaled_max_estimates(x, i, &scaled_indices(j, set), a, k).scaled)
}

/// Estimate of the squared scaling of `M_{i,j,I}`, thresholded on the
/// radii of `(X_i, a X_j, a X_I)` with the factor `a` removed from the angles.
pub fn estimate_scaling_unscaled(
    x: &SampleMatrix,
    i: usize,
    j: usize,
    set: &[usize],
    a: f64,
    k: usize,
) -> Result<f64> {
    check_estimator_args(x, i, j, set, a, k)?;
    Ok(rescaled_max_estimates(x, i, &scaled_indices(j, set), a, k).unscaled)
}

/// Estimate of the squared scaling of `M_indices` directly from the
/// angular measure of `X_indices`: `(|indices| / k) sum max w^2`.
pub fn estimate_scaling_init(x: &SampleMatrix, indices: &[usize], k: usize) -> Result<f64> {
    if indices.is_empty() {
        return Err(Error::InvalidParameter("index set must be nonempty".into()));
    }
    for &v in indices {
        x.check_node(v)?;
    }
    x.check_k(k)?;
    let radii: Vec<f64> = x
        .rows()
        .map(|row| indices.iter().map(|&v| row[v - 1].powi(2)).sum::<f64>().sqrt())
        .collect();
    let threshold = kth_largest(&radii, k);
    let mut sum = 0.0;
    for (row, &r) in x.rows().zip(&radii) {
        if r < threshold || r == 0.0 {
            continue;
        }
        let m = indices.iter().map(|&v| row[v - 1].powi(2)).fold(0.0, f64::max);
        sum += m / (r * r);
    }
    Ok(indices.len() as f64 / k as f64 * sum)
}

fn scaled_indices(j: usize, set: &[usize]) -> Vec<usize> {
    let mut v = Vec::with_capacity(set.len() + 1);
    v.push(j);
    v.extend_from_slice(set);
    v
}

fn check_estimator_args(
    x: &SampleMatrix,
    i: usize,
    j: usize,
    set: &[usize],
    a: f64,
    k: usize,
) -> Result<()> {
    check_triple(x.d(), i, j, set)?;
    x.check_k(k)?;
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidParameter(format!("scale a = {a} must be positive")));
    }
    Ok(())
}
