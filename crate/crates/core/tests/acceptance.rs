//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use extremal_order::bench::{run_benchmark, summarize_rows, BenchConfig, ALGORITHM, GAMMA_BASELINE};
use extremal_order::data::{decluster, TimeSeriesPanel};
use extremal_order::discovery::theoretical_delta;
use extremal_order::extremes::{angular_measure, estimate_scaling_scaled, estimate_scaling_unscaled};
use extremal_order::metrics::{sid_of_order, summarize};
use extremal_order::{
    causal_order_oracle, full_dag_from_order, simulate, CoefficientMatrix, Dag, LsemModel,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use common::{bin, permutations, proper_subsets, sid_oracle};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_standardized(rng: &mut ChaCha20Rng, d: usize, p: f64) -> (LsemModel, CoefficientMatrix) {
    let model = LsemModel::random(d, p, 2.0, rng).unwrap();
    let abar = model.coefficient_matrix().standardize(2.0).unwrap();
    (model, abar)
}

/// The fifty models shared by criteria 2 and 3.
fn shared_models() -> Vec<(LsemModel, CoefficientMatrix)> {
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    (0..50)
        .map(|_| {
            let d = rng.random_range(2..=10);
            let p = if rng.random::<bool>() { 0.2 } else { 0.5 };
            random_standardized(&mut rng, d, p)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for m in 0..100 {
        let d = rng.random_range(4..=10);
        let p = if m % 2 == 0 { 0.2 } else { 0.5 };
        let model = LsemModel::random(d, p, 2.0, &mut rng).unwrap();
        let direct = model.coefficient_matrix();
        let paths = model.coefficient_matrix_paths().unwrap();
        worst = worst.max((direct.matrix() - paths.matrix()).amax());
    }
    ensure(worst <= 1e-10, || format!("max deviation {worst:e}"))?;
    Ok(format!("100 models, max deviation {worst:.1e}"))
}

fn criterion_2() -> Outcome {
    let mut zeros = 0;
    let mut negatives = 0;
    for (idx, (model, abar)) in shared_models().iter().enumerate() {
        let dag = model.dag();
        let sources = dag.source_nodes();
        for a in [1.1, 1.3, 2.0] {
            let delta = theoretical_delta(abar, &[], a).map_err(|e| e.to_string())?;
            for j in dag.nodes() {
                if sources.contains(&j) {
                    for i in dag.nodes().filter(|&i| i != j) {
                        let v = delta.get(i, j);
                        ensure(v.abs() <= 1e-12, || format!("model {idx}, a={a}: Δ({i},{j}) = {v:e}"))?;
                        zeros += 1;
                    }
                } else {
                    for i in dag.ancestors(j).unwrap() {
                        let v = delta.get(i, j);
                        ensure(v < 0.0, || format!("model {idx}, a={a}: Δ({i},{j}) = {v:e} not < 0"))?;
                        negatives += 1;
                    }
                }
            }
        }
    }
    Ok(format!("{zeros} zero entries, {negatives} negative entries"))
}

fn criterion_3() -> Outcome {
    let mut zeros = 0;
    let mut negatives = 0;
    let mut sets = 0;
    for (idx, (model, abar)) in shared_models().iter().enumerate() {
        let dag = model.dag();
        let d = dag.d();
        for set in proper_subsets(d) {
            if dag.ancestral_closure(&set).unwrap().len() != set.len() {
                continue;
            }
            sets += 1;
            for a in [1.1, 1.3, 2.0] {
                let delta = theoretical_delta(abar, &set, a).map_err(|e| e.to_string())?;
                for j in dag.nodes().filter(|j| !set.contains(j)) {
                    let outside: Vec<usize> =
                        dag.ancestors(j).unwrap().into_iter().filter(|v| !set.contains(v)).collect();
                    if outside.is_empty() {
                        for i in dag.nodes().filter(|&i| i != j && !set.contains(&i)) {
                            let v = delta.get(i, j);
                            ensure(v.abs() <= 1e-12, || {
                                format!("model {idx}, I={set:?}, a={a}: Δ({i},{j}) = {v:e}")
                            })?;
                            zeros += 1;
                        }
                    } else {
                        for i in outside {
                            let v = delta.get(i, j);
                            ensure(v < 0.0, || {
                                format!("model {idx}, I={set:?}, a={a}: Δ({i},{j}) = {v:e} not < 0")
                            })?;
                            negatives += 1;
                        }
                    }
                }
            }
        }
    }
    Ok(format!("{sets} closed sets, {zeros} zero entries, {negatives} negative entries"))
}

fn criterion_4() -> Outcome {
    let mut total = 0;
    for d in 1..=5 {
        let dags = Dag::all(d);
        let failures: Vec<String> = dags
            .par_iter()
            .enumerate()
            .filter_map(|(g, dag)| {
                let mut rng = ChaCha20Rng::seed_from_u64(((d as u64) << 32) | g as u64);
                for draw in 0..10 {
                    let model = LsemModel::random_weights(dag.clone(), 2.0, &mut rng).unwrap();
                    let abar = model.coefficient_matrix().standardize(2.0).unwrap();
                    let outcome = causal_order_oracle(&abar, 1.3, 0.4)
                        .and_then(|r| sid_of_order(dag, &r.ancestral_order()));
                    match outcome {
                        Ok(s) if s.raw == 0 => {}
                        Ok(s) => return Some(format!("{} draw {draw}: SID {}", dag.to_text(), s.raw)),
                        Err(e) => return Some(format!("{} draw {draw}: {e}", dag.to_text())),
                    }
                }
                None
            })
            .collect();
        if let Some(f) = failures.first() {
            return Err(format!("{} failures, first: {f}", failures.len()));
        }
        total += dags.len();
    }
    Ok(format!("{total} DAGs x 10 weight draws, all SID 0"))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for m in 0..200 {
        let d = rng.random_range(2..=10);
        let p = [0.2, 0.5, 0.8][m % 3];
        let (_, abar) = random_standardized(&mut rng, d, p);
        ensure(abar.is_diagonally_dominant(), || format!("model {m}: diagonal dominance fails"))?;
        ensure(abar.verify_path_inequality(), || format!("model {m}: path inequality fails"))?;
        let mass = angular_measure(&abar, 2.0).unwrap().total_mass();
        worst = worst.max((mass - d as f64).abs());
    }
    ensure(worst <= 1e-10, || format!("mass deviation {worst:e}"))?;
    Ok(format!("200 models, max mass deviation {worst:.1e}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(6);
    let x = simulate(&CoefficientMatrix::identity(2), 50_000, 2.0, &mut rng).unwrap();
    let unscaled = estimate_scaling_unscaled(&x, 1, 2, &[], 1.3, 500).unwrap();
    let scaled = estimate_scaling_scaled(&x, 1, 2, &[], 1.3, 500).unwrap();
    ensure((1.8..=2.2).contains(&unscaled), || format!("unscaled {unscaled:.4} outside [1.8, 2.2]"))?;
    ensure((2.49..=2.89).contains(&scaled), || format!("scaled {scaled:.4} outside [2.49, 2.89]"))?;
    Ok(format!("unscaled {unscaled:.4}, scaled {scaled:.4}"))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut pairs = 0;
    for d in 1..=4 {
        let orders = permutations(d);
        for truth in Dag::all(d) {
            for order in &orders {
                let estimate = full_dag_from_order(order).unwrap();
                let got = sid_of_order(&truth, order).unwrap().raw;
                let want = sid_oracle(&truth, &estimate, &mut rng);
                ensure(got == want, || format!("{} vs order {order:?}: {got} != {want}", truth.to_text()))?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} pairs match exactly"))
}

fn median_of(rows: &[extremal_order::bench::BenchRow], method: &str) -> f64 {
    let values: Vec<f64> = rows.iter().filter(|r| r.method == method).map(|r| r.sid).collect();
    summarize(&values).unwrap().median
}

fn criterion_8() -> Outcome {
    let config = BenchConfig {
        ds: vec![10],
        ps: vec![0.05],
        alphas: vec![2.0],
        ns: vec![5000],
        ks: vec![None],
        a_values: vec![1.3],
        epsilons: vec![0.4],
        replicates: 20,
        seed: 8,
        gamma_baseline: true,
        reversed_control: false,
    };
    let rows = run_benchmark(&config).map_err(|e| e.to_string())?;
    let alg = median_of(&rows, ALGORITHM);
    let gamma = median_of(&rows, GAMMA_BASELINE);
    ensure(alg <= 0.10, || format!("algorithm median {alg:.4} > 0.10 (baseline {gamma:.4})"))?;
    ensure(alg <= gamma, || format!("algorithm median {alg:.4} > baseline median {gamma:.4}"))?;
    Ok(format!("median SID algorithm {alg:.4}, baseline {gamma:.4}"))
}

fn criterion_9() -> Outcome {
    let config = BenchConfig {
        ks: vec![Some(250)],
        ..BenchConfig::a_sweep(10, 0.1, 1000, 10, 9)
    };
    let rows = run_benchmark(&config).map_err(|e| e.to_string())?;
    let means: Vec<(f64, f64)> = summarize_rows(&rows).iter().map(|s| (s.a.unwrap(), s.mean)).collect();
    let table = means.iter().map(|(a, m)| format!("a={a}:{m:.4}")).collect::<Vec<_>>().join(" ");
    let mean_at = |a: f64| means.iter().find(|(v, _)| *v == a).unwrap().1;
    let near_one = mean_at(1.0001);
    let strictly_lowest = means.iter().filter(|(a, _)| *a != 1.0001).all(|(_, m)| near_one < *m);
    ensure(!strictly_lowest, || format!("a=1.0001 strictly lowest; {table}"))?;
    let target = mean_at(1.3);
    let better = means.iter().filter(|(_, m)| *m < target).count();
    ensure(better <= 1, || format!("a=1.3 ranks below the best two; {table}"))?;
    Ok(table)
}

fn panel(values: Vec<f64>, d: usize, segments: Option<Vec<usize>>) -> TimeSeriesPanel {
    let columns = (1..=d).map(|c| format!("X{c}")).collect();
    TimeSeriesPanel::new(columns, values, None, segments).unwrap()
}

fn criterion_10() -> Outcome {
    let mut rng = ChaCha20Rng::seed_from_u64(10);
    let values: Vec<f64> = (0..60 * 3).map(|_| rng.random::<f64>()).collect();
    let p = panel(values, 3, Some(vec![0, 20, 45]));
    let same = decluster(&p, 1).map_err(|e| e.to_string())?;
    ensure(same == p, || "l=1 changed the panel".into())?;

    let flat = decluster(&panel(vec![5.0; 9], 1, None), 9).map_err(|e| e.to_string())?;
    ensure(flat.n() == 1, || format!("constant segment kept {} rows", flat.n()))?;

    let spikes = vec![1.0, 10.0, 2.0, 1.5, 3.0, 12.0, 0.5, 2.5];
    let kept = decluster(&panel(spikes, 1, None), 3).map_err(|e| e.to_string())?;
    let kept_values: Vec<f64> = kept.values().to_vec();
    ensure(kept_values.contains(&10.0) && kept_values.contains(&12.0), || {
        format!("two-spike fixture kept {kept_values:?}")
    })?;
    Ok(format!("identity, 1 row, spikes kept {kept_values:?}"))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("{args:?} failed: {}", String::from_utf8_lossy(&out.stderr))
    })
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_default()
}

fn criterion_11() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |name: &str| dir.path().join(name);
    let s = |name: &str| p(name).to_string_lossy().into_owned();
    let mut checked = Vec::new();

    for run in ["a", "b"] {
        run_cli(&[
            "simulate", "--d", "5", "--p", "0.4", "--n", "800", "--seed", "31",
            "--model", &s(&format!("model_{run}.json")), "--out", &s(&format!("x_{run}.csv")),
        ])?;
    }
    ensure(read(&p("model_a.json")) == read(&p("model_b.json")), || "simulate model differs".into())?;
    ensure(read(&p("x_a.csv")) == read(&p("x_b.csv")), || "simulate samples differ".into())?;
    checked.push("simulate");

    for run in ["a", "b"] {
        run_cli(&["discover", "--samples", &s("x_a.csv"), "--seed", "31", "--out", &s(&format!("order_{run}.json"))])?;
    }
    ensure(read(&p("order_a.json")) == read(&p("order_b.json")), || "discover differs".into())?;
    checked.push("discover");

    for run in ["a", "b"] {
        run_cli(&[
            "bootstrap", "--samples", &s("x_a.csv"), "--dag", &s("model_a.json"), "--replicates", "6",
            "--seed", "32", "--out", &s(&format!("boot_{run}.csv")),
        ])?;
    }
    ensure(read(&p("boot_a.csv")) == read(&p("boot_b.csv")), || "bootstrap differs".into())?;
    checked.push("bootstrap");

    for run in ["a", "b"] {
        run_cli(&[
            "benchmark", "--d", "5", "--p", "0.3", "--n", "400", "--replicates", "3", "--seed", "33",
            "--reversed-control", "--out", &s(&format!("bench_{run}.csv")),
            "--summary", &s(&format!("summary_{run}.csv")),
        ])?;
    }
    ensure(read(&p("bench_a.csv")) == read(&p("bench_b.csv")), || "benchmark rows differ".into())?;
    ensure(read(&p("summary_a.csv")) == read(&p("summary_b.csv")), || "benchmark summary differs".into())?;
    checked.push("benchmark");

    let nonempty = ["model_a.json", "x_a.csv", "order_a.json", "boot_a.csv", "bench_a.csv", "summary_a.csv"]
        .iter()
        .all(|f| !read(&p(f)).is_empty());
    ensure(nonempty, || "an output file is empty".into())?;
    Ok(format!("byte-identical reruns: {}", checked.join(", ")))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("coefficient routes agree", criterion_1),
        ("source columns vanish, ancestor entries negative", criterion_2),
        ("zero columns given closed sets", criterion_3),
        ("oracle ordering has SID 0 on all small DAGs", criterion_4),
        ("diagonal dominance, path inequality, total mass", criterion_5),
        ("estimator consistency on independent margins", criterion_6),
        ("SID matches adjustment oracle", criterion_7),
        ("downscaled benchmark against baseline", criterion_8),
        ("scale parameter sweep ranking", criterion_9),
        ("declustering fixtures", criterion_10),
        ("CLI determinism", criterion_11),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", n + 1);
        if !filter.is_empty() && !filter.iter().any(|f| id.ends_with(&format!(" {f}"))) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {id}: {name} ({detail}) [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id}: {name} ({detail}) [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
