//! Causal tail coefficients and the Γ-baseline ordering used as a comparison
//! method in benchmarks.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::extremes::{upper_ranks, SampleMatrix};

/// Empirical distribution values `rank / (n + 1)` of one column.
fn edf_column(x: &SampleMatrix, node: usize) -> Vec<f64> {
    let col: Vec<f64> = x.column(node).collect();
    let denom = (x.n() + 1) as f64;
    upper_ranks(&col).into_iter().map(|r| r as f64 / denom).collect()
}

/// Row indices of the `k` largest values of `column`; ties go to the lower row.
fn top_rows(column: &[f64], k: usize) -> Vec<usize> {
    let mut rows: Vec<usize> = (0..column.len()).collect();
    rows.sort_by(|&p, &q| column[q].total_cmp(&column[p]).then(p.cmp(&q)));
    rows.truncate(k);
    rows
}

fn gamma_from(edf_j: &[f64], top_i: &[usize]) -> f64 {
    top_i.iter().map(|&r| edf_j[r]).sum::<f64>() / top_i.len() as f64
}

/// `(1/k) sum F_j(X_j)` over the `k` rows with the largest `X_i`.
pub fn causal_tail_coefficient(x: &SampleMatrix, i: usize, j: usize, k: usize) -> Result<f64> {
    x.check_node(i)?;
    x.check_node(j)?;
    if i == j {
        return Err(Error::OverlappingNodes(format!("i = j = {i}")));
    }
    x.check_k(k)?;
    let col_i: Vec<f64> = x.column(i).collect();
    Ok(gamma_from(&edf_column(x, j), &top_rows(&col_i, k)))
}

/// All pairwise coefficients; the diagonal is `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    d: usize,
    values: Vec<f64>,
}

impl GammaMatrix {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i - 1) * self.d + j - 1]
    }

    /// Square CSV with an `i` column and one column per `j`; the diagonal is empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["i".to_string()];
        header.extend((1..=self.d).map(|j| j.to_string()));
        w.write_record(&header)?;
        for i in 1..=self.d {
            let mut rec = vec![i.to_string()];
            for j in 1..=self.d {
                rec.push(if i == j { String::new() } else { self.get(i, j).to_string() });
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn gamma_matrix(x: &SampleMatrix, k: usize) -> Result<GammaMatrix> {
    x.check_k(k)?;
    let d = x.d();
    let edfs: Vec<Vec<f64>> = (1..=d).into_par_iter().map(|v| edf_column(x, v)).collect();
    let tops: Vec<Vec<usize>> = (1..=d)
        .into_par_iter()
        .map(|v| top_rows(&x.column(v).collect::<Vec<_>>(), k))
        .collect();
    let values = (0..d * d)
        .map(|idx| {
            let (i, j) = (idx / d, idx % d);
            if i == j {
                f64::NAN
            } else {
                gamma_from(&edfs[j], &tops[i])
            }
        })
        .collect();
    Ok(GammaMatrix { d, values })
}

/// Γ-baseline: repeatedly picks the remaining node maximising its minimum
/// coefficient towards the other remaining nodes. Returns roots first.
pub fn gamma_order(x: &SampleMatrix, k: usize) -> Result<Vec<usize>> {
    let gamma = gamma_matrix(x, k)?;
    let mut remaining: Vec<usize> = (1..=x.d()).collect();
    let mut order = Vec::with_capacity(x.d());
    while !remaining.is_empty() {
        let mut best = (f64::NEG_INFINITY, remaining[0]);
        for &p in &remaining {
            let score = remaining
                .iter()
                .filter(|&&q| q != p)
                .map(|&q| gamma.get(p, q))
                .fold(f64::INFINITY, f64::min);
            if score > best.0 {
                best = (score, p);
            }
        }
        order.push(best.1);
        remaining.retain(|&v| v != best.1);
    }
    Ok(order)
}
