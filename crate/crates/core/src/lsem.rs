//! Linear structural equation models with nonnegative edge weights and
//! positive innovation weights, their innovation coefficient matrices, and
//! heavy-tailed simulation.
//!
//! With edge-weight matrix `C` (`c_ij` is the weight of `j -> i`) and
//! diagonal innovation weights `S`, the model solves to `X = (I - C)^-1 S Z
//! = A Z`. Entry `a_ij` is the sum over directed paths `j ~> i` of
//! `s_jj` times the product of the edge weights along the path.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremes::{Margins, SampleMatrix};
use crate::graph::{Dag, DEFAULT_PATH_CAP};

/// Slack used when checking exact algebraic identities.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Slack used when checking row normalisation.
pub const NORMALISATION_TOL: f64 = 1e-12;

const WEIGHT_RANGE: (f64, f64) = (0.1, 1.5);

#[derive(Debug, Clone, PartialEq)]
pub struct LsemModel {
    dag: Dag,
    c: DMatrix<f64>,
    s: Vec<f64>,
    alpha: f64,
}

impl LsemModel {
    /// `weights` holds `(j, i, c_ij)` for the edge `j -> i`; every edge of
    /// `dag` needs a strictly positive weight.
    pub fn new(dag: Dag, weights: &[(usize, usize, f64)], s: Vec<f64>, alpha: f64) -> Result<Self> {
        let d = dag.d();
        if s.len() != d {
            return Err(Error::InvalidModel(format!(
                "expected {d} innovation weights, got {}",
                s.len()
            )));
        }
        if let Some((k, v)) = s.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidModel(format!("s_{0}{0} = {v} must be positive", k + 1)));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidModel(format!("alpha = {alpha} must be positive")));
        }
        let mut c = DMatrix::zeros(d, d);
        for &(j, i, w) in weights {
            if !dag.has_edge(j, i) {
                return Err(Error::InvalidModel(format!("weight given for non-edge {j} -> {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidModel(format!("c_{i}{j} = {w} must be positive")));
            }
            if c[(i - 1, j - 1)] != 0.0 {
                return Err(Error::InvalidModel(format!("edge {j} -> {i} weighted twice")));
            }
            c[(i - 1, j - 1)] = w;
        }
        if let Some((j, i)) = dag.edges().into_iter().find(|&(j, i)| c[(i - 1, j - 1)] == 0.0) {
            return Err(Error::InvalidModel(format!("edge {j} -> {i} has no weight")));
        }
        Ok(LsemModel { dag, c, s, alpha })
    }

    /// Draws a DAG via [`Dag::random`], then every edge weight (row-major
    /// over the upper triangle) and every `s_ii` i.i.d. Uniform[0.1, 1.5].
    pub fn random<R: Rng + ?Sized>(d: usize, p: f64, alpha: f64, rng: &mut R) -> Result<Self> {
        let dag = Dag::random(d, p, rng)?;
        let mut weights = Vec::with_capacity(dag.edge_count());
        for i in 1..=d {
            for j in (i + 1)..=d {
                if dag.has_edge(j, i) {
                    weights.push((j, i, uniform_weight(rng)));
                }
            }
        }
        let s = (0..d).map(|_| uniform_weight(rng)).collect();
        LsemModel::new(dag, &weights, s, alpha)
    }

    /// Random weights on a fixed graph, same distribution as [`LsemModel::random`].
    pub fn random_weights<R: Rng + ?Sized>(dag: Dag, alpha: f64, rng: &mut R) -> Result<Self> {
        let weights: Vec<(usize, usize, f64)> = dag
            .edges()
            .into_iter()
            .map(|(j, i)| (j, i, uniform_weight(rng)))
            .collect();
        let s = (0..dag.d()).map(|_| uniform_weight(rng)).collect();
        LsemModel::new(dag, &weights, s, alpha)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn d(&self) -> usize {
        self.dag.d()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Edge weight of `j -> i` (zero for non-edges).
    pub fn edge_weight(&self, j: usize, i: usize) -> f64 {
        self.c[(i - 1, j - 1)]
    }

    pub fn edge_weights(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn innovation_weights(&self) -> &[f64] {
        &self.s
    }

    /// `A = (I - C)^-1 S` via the finite Neumann series `sum_{m<d} C^m S`.
    pub fn coefficient_matrix(&self) -> CoefficientMatrix {
        let d = self.d();
        let mut power = DMatrix::<f64>::identity(d, d);
        let mut inverse = DMatrix::<f64>::identity(d, d);
        for _ in 1..d {
            power = &power * &self.c;
            inverse += &power;
        }
        for (col, &s) in self.s.iter().enumerate() {
            inverse.column_mut(col).scale_mut(s);
        }
        CoefficientMatrix {
            a: inverse,
            standardized: false,
        }
    }

    /// `A` by summing path weights `s_jj * c_{l1 j} * ... * c_{i l(m-1)}`
    /// over all directed paths `j ~> i`.
    pub fn coefficient_matrix_paths(&self) -> Result<CoefficientMatrix> {
        let d = self.d();
        let mut a = DMatrix::zeros(d, d);
        for i in 1..=d {
            a[(i - 1, i - 1)] = self.s[i - 1];
            for j in self.dag.ancestors(i)? {
                let total: f64 = self
                    .dag
                    .enumerate_paths_capped(j, i, DEFAULT_PATH_CAP)?
                    .iter()
                    .map(|path| {
                        path.edges()
                            .map(|(from, to)| self.edge_weight(from, to))
                            .product::<f64>()
                            * self.s[j - 1]
                    })
                    .sum();
                a[(i - 1, j - 1)] = total;
            }
        }
        Ok(CoefficientMatrix {
            a,
            standardized: false,
        })
    }

    pub fn to_document(&self) -> ModelDocument {
        ModelDocument {
            d: self.d(),
            edges: self
                .dag
                .edges()
                .into_iter()
                .map(|(j, i)| (j, i, self.edge_weight(j, i)))
                .collect(),
            s: self.s.clone(),
            alpha: self.alpha,
        }
    }

    pub fn from_document(doc: &ModelDocument) -> Result<Self> {
        let edges: Vec<(usize, usize)> = doc.edges.iter().map(|&(j, i, _)| (j, i)).collect();
        let dag = Dag::new(doc.d, &edges)?;
        LsemModel::new(dag, &doc.edges, doc.s.clone(), doc.alpha)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        Self::from_document(&doc)
    }
}

fn uniform_weight<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random_range(WEIGHT_RANGE.0..=WEIGHT_RANGE.1)
}

/// Serialised model: `{"d", "edges": [[j, i, c_ij], ...], "s", "alpha"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDocument {
    pub d: usize,
    pub edges: Vec<(usize, usize, f64)>,
    pub s: Vec<f64>,
    pub alpha: f64,
}

/// Innovation coefficient matrix, optionally row-standardised.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientMatrix {
    a: DMatrix<f64>,
    standardized: bool,
}

impl CoefficientMatrix {
    /// Wraps an arbitrary nonnegative square matrix.
    pub fn from_matrix(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix is {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if a.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidModel("coefficient matrix must be nonnegative".into()));
        }
        Ok(CoefficientMatrix {
            a,
            standardized: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::DimensionMismatch("rows must have equal length d".into()));
        }
        Self::from_matrix(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        CoefficientMatrix {
            a: DMatrix::identity(d, d),
            standardized: false,
        }
    }

    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    /// Entry `a_ij`, 1-based.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[(i - 1, j - 1)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Divides every row by its `alpha`-norm, `a_ij / (sum_k a_ik^alpha)^(1/alpha)`.
    pub fn standardize(&self, alpha: f64) -> Result<CoefficientMatrix> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha = {alpha} must be positive")));
        }
        let mut a = self.a.clone();
        for (i, mut row) in a.row_iter_mut().enumerate() {
            let norm = row.iter().map(|v| v.powf(alpha)).sum::<f64>().powf(1.0 / alpha);
            if norm == 0.0 || !norm.is_finite() {
                return Err(Error::ZeroRow(i + 1));
            }
            row /= norm;
        }
        Ok(CoefficientMatrix {
            a,
            standardized: true,
        })
    }

    /// Checks `a_ij >= a_ik a_kj / a_kk` for every triple, with `1e-12` slack.
    pub fn verify_path_inequality(&self) -> bool {
        let d = self.d();
        (0..d).all(|k| {
            let akk = self.a[(k, k)];
            akk > 0.0
                && (0..d).all(|i| {
                    (0..d).all(|j| self.a[(i, j)] >= self.a[(i, k)] * self.a[(k, j)] / akk - 1e-12)
                })
        })
    }

    /// Whether `a_ij = a_ik a_kj / a_kk` holds to `tol` (relative to `a_ij`).
    pub fn factors_through(&self, i: usize, j: usize, k: usize, tol: f64) -> bool {
        let lhs = self.get(i, j);
        let rhs = self.get(i, k) * self.get(k, j) / self.get(k, k);
        (lhs - rhs).abs() <= tol * lhs.abs().max(1.0)
    }

    /// Whether every diagonal entry strictly dominates its column.
    pub fn is_diagonally_dominant(&self) -> bool {
        let d = self.d();
        (0..d).all(|j| (0..d).all(|i| i == j || self.a[(j, j)] > self.a[(i, j)]))
    }

    /// Whether no identified node has a coefficient on an unidentified
    /// innovation, i.e. `a_rk = 0` for `r` in `set`, `k` outside it.
    pub fn is_ancestrally_closed(&self, set: &[usize]) -> bool {
        let d = self.d();
        let inside: Vec<bool> = (1..=d).map(|v| set.contains(&v)).collect();
        set.iter()
            .all(|&r| (0..d).all(|k| inside[k] || self.a[(r - 1, k)] == 0.0))
    }
}

/// Samples `n` rows of `X = A Z` with `Z` having i.i.d. `|t_alpha|` entries.
///
/// Draw order is canonical: row by row, `Z_1..Z_d` within a row.
pub fn simulate<R: Rng + ?Sized>(
    a: &CoefficientMatrix,
    n: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<SampleMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let t = StudentT::new(alpha)
        .map_err(|e| Error::InvalidParameter(format!("Student-t with {alpha} dof: {e}")))?;
    let d = a.d();
    let mut values = vec![0.0; n * d];
    let mut z = vec![0.0; d];
    for row in values.chunks_mut(d) {
        for zk in z.iter_mut() {
            *zk = t.sample(rng).abs();
        }
        for (i, out) in row.iter_mut().enumerate() {
            *out = (0..d).map(|k| a.a[(i, k)] * z[k]).sum();
        }
    }
    SampleMatrix::new(n, d, values, Margins::Raw)
}

/// Model from the running four-node example with the given weights.
#[cfg(test)]
pub(crate) fn four_node_model(c: [f64; 5], s: [f64; 4]) -> LsemModel {
    let dag = crate::graph::four_node_example();
    LsemModel::new(
        dag,
        &[(4, 2, c[0]), (3, 2, c[1]), (3, 1, c[2]), (2, 1, c[3]), (4, 1, c[4])],
        s.to_vec(),
        2.0,
    )
    .unwrap()
}
