use std::fs;
use std::path::{Path, PathBuf};

use abcpart::abc::{holding_weights, AbcRun};
use abcpart::gibbs::GibbsRun;
use abcpart::io::{
    read_chain, read_labels, write_attempts, write_chain, write_graph_bundle, write_json, write_labels,
    write_matrix, write_similarity, ChainRow,
};
use abcpart::partition::Partition;
use abcpart::scenarios::{simulate, Observations, ScenarioOptions};
use abcpart::summaries::{summarize, PointEstimateOptions};
use abcpart::{Error, Result};
use serde::Serialize;

use crate::{SimulateArgs, SummarizeArgs};

#[derive(Debug, Serialize)]
pub struct Summary {
    pub kept: usize,
    pub point_estimate: Vec<usize>,
    pub point_estimate_k: usize,
    pub expected_vi: f64,
    pub ess_k: f64,
    pub ess_entropy: f64,
    pub mean_k: f64,
    pub acceptance_rate: f64,
    pub mean_attempts: f64,
    pub vi_to_truth: Option<f64>,
    /// Median wall time of a post-burn-in iteration.
    pub median_seconds_per_iteration: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    match xs.len() {
        0 => f64::NAN,
        len if len % 2 == 0 => 0.5 * (xs[m - 1] + xs[m]),
        _ => xs[m],
    }
}

/// Summarizes chain rows. ABC rows (with attempt counts) are weighted by
/// holding times; marginal-sampler rows are weighted equally.
fn summarize_rows(
    rows: &[ChainRow],
    truth: Option<&Partition>,
    thin: usize,
    seed: u64,
) -> Result<(Summary, abcpart::partition::SimilarityMatrix)> {
    let chain = rows
        .iter()
        .map(|r| Partition::canonicalize(&r.labels))
        .collect::<Result<Vec<_>>>()?;
    let attempts: Option<Vec<u64>> = rows.iter().map(|r| r.attempts).collect();
    let (weights, acceptance_rate, mean_attempts) = match &attempts {
        Some(a) => {
            let total: u64 = a.iter().sum();
            let rate = if total == 0 { 0.0 } else { a.len() as f64 / total as f64 };
            (Some(holding_weights(a)), rate, total as f64 / a.len() as f64)
        }
        None => (None, 1.0, 1.0),
    };
    let options = PointEstimateOptions {
        thin,
        seed,
        ..PointEstimateOptions::default()
    };
    let s = summarize(&chain, weights.as_deref(), acceptance_rate, mean_attempts, truth, options)?;
    let summary = Summary {
        kept: rows.len(),
        point_estimate: s.point_estimate.partition.labels().to_vec(),
        point_estimate_k: s.point_estimate.partition.k(),
        expected_vi: s.point_estimate.expected_vi,
        ess_k: s.ess_k,
        ess_entropy: s.ess_entropy,
        mean_k: s.mean_k,
        acceptance_rate: s.acceptance_rate,
        mean_attempts: s.mean_attempts,
        vi_to_truth: s.vi_to_truth,
        median_seconds_per_iteration: median(rows.iter().map(|r| r.seconds).collect()),
    };
    Ok((summary, s.similarity))
}

fn write_summary(dir: &Path, rows: &[ChainRow], truth: Option<&Partition>, thin: usize, seed: u64) -> Result<()> {
    let (summary, similarity) = summarize_rows(rows, truth, thin, seed)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_similarity(&dir.join("similarity.csv"), &similarity)?;
    write_labels(&dir.join("point_estimate.csv"), &Partition::canonicalize(&summary.point_estimate)?)?;
    println!(
        "{}: k = {}, acceptance {:.4}, {:.3e} s/iteration{}",
        dir.display(),
        summary.point_estimate_k,
        summary.acceptance_rate,
        summary.median_seconds_per_iteration,
        summary.vi_to_truth.map(|v| format!(", VI to truth {v:.4}")).unwrap_or_default(),
    );
    Ok(())
}

pub fn write_abc_outputs(dir: &Path, run: &AbcRun, truth: Option<&Partition>, thin: usize, seed: u64) -> Result<()> {
    let rows = ChainRow::from_abc(run);
    write_chain(&dir.join("chain.csv"), &rows)?;
    write_attempts(&dir.join("attempts.csv"), &run.attempt_log)?;
    write_summary(dir, &rows, truth, thin, seed)
}

pub fn write_gibbs_outputs<P>(
    dir: &Path,
    run: &GibbsRun<P>,
    truth: Option<&Partition>,
    thin: usize,
    seed: u64,
) -> Result<()> {
    let rows = ChainRow::from_gibbs(run);
    write_chain(&dir.join("chain.csv"), &rows)?;
    write_summary(dir, &rows, truth, thin, seed)
}

pub fn summarize_command(args: SummarizeArgs) -> Result<()> {
    let chain_path = if args.chain.is_dir() {
        args.chain.join("chain.csv")
    } else {
        args.chain.clone()
    };
    let rows = read_chain(&chain_path)?;
    let truth = match &args.truth {
        Some(p) => {
            let t = read_labels(p)?;
            if t.n() != rows[0].labels.len() {
                return Err(Error::SizeMismatch {
                    left: rows[0].labels.len(),
                    right: t.n(),
                });
            }
            Some(t)
        }
        None => None,
    };
    let out = args.out.clone().unwrap_or_else(|| {
        chain_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    fs::create_dir_all(&out)?;
    write_summary(&out, &rows, truth.as_ref(), args.thin, 0)
}

pub fn simulate_command(args: SimulateArgs) -> Result<()> {
    let options = ScenarioOptions {
        nodes: args.nodes,
        sweeps: args.sweeps,
    };
    let dataset = simulate(args.kernel.into(), args.n, args.seed, options)?;
    fs::create_dir_all(&args.out)?;
    let data_path = match &dataset.observations {
        Observations::Scalar(x) => {
            let path = args.out.join("data.csv");
            write_matrix(&path, &["x"], x.iter().map(|v| vec![*v]))?;
            path
        }
        Observations::Bivariate(x) => {
            let path = args.out.join("data.csv");
            write_matrix(&path, &["x1", "x2"], x.iter().map(|v| v.to_vec()))?;
            path
        }
        Observations::Graphs { nodes, graphs } => write_graph_bundle(&args.out.join("graphs"), *nodes, graphs)?,
    };
    write_labels(&args.out.join("truth.csv"), &dataset.truth)?;
    println!("{}", data_path.display());
    Ok(())
}
