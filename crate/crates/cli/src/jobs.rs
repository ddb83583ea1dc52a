//! Sampler jobs: data loading, threshold resolution, replications and the
//! config echo that makes a run repeatable.

use std::fs;
use std::path::{Path, PathBuf};

use abcpart::abc::{
    default_fixed_threshold, default_schedule, prior_predictive_distances, quantile, run_abc, AbcConfig, AdaptMode,
    EpsilonSchedule, Threshold, TuneOptions,
};
use abcpart::gibbs::{gibbs_conjugate, gibbs_mc, GibbsConfig};
use abcpart::io::{read_bivariate_data, read_graph_manifest, read_json, read_labels, read_scalar_data, write_json};
use abcpart::kernels::{ErgmModel, GaussianNig, Gk2Model, GkModel, GkPrior, KernelModel, SpectralGraph};
use abcpart::partition::Partition;
use abcpart::pitman_yor::PYParams;
use abcpart::scenarios::Scenario;
use abcpart::transport::SolverKind;
use abcpart::{Error, Result};
use log::{error, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::output::{write_abc_outputs, write_gibbs_outputs};
use crate::{Common, RerunArgs, RunAbcArgs, RunGibbsArgs};

/// Everything needed to repeat one replication. Written as `config.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "sampler", rename_all = "kebab-case")]
pub enum Job {
    Abc {
        kernel: Scenario,
        data: PathBuf,
        truth: Option<PathBuf>,
        sweeps: usize,
        thin: usize,
        config: AbcConfig,
    },
    Gibbs {
        kernel: Scenario,
        data: PathBuf,
        truth: Option<PathBuf>,
        thin: usize,
        conjugate: bool,
        config: GibbsConfig,
    },
}

enum Data {
    Scalar(Vec<f64>),
    Bivariate(Vec<[f64; 2]>),
    Graphs { nodes: usize, graphs: Vec<SpectralGraph> },
}

impl Data {
    fn load(kernel: Scenario, path: &Path) -> Result<Self> {
        let data = match kernel {
            Scenario::Gaussian | Scenario::Gk1 => Data::Scalar(read_scalar_data(path)?),
            Scenario::Gk2 => Data::Bivariate(read_bivariate_data(path)?),
            Scenario::Ergm => {
                let (nodes, graphs) = read_graph_manifest(path)?;
                Data::Graphs {
                    nodes,
                    graphs: graphs.into_iter().map(SpectralGraph::new).collect(),
                }
            }
        };
        if data.len() < 2 {
            return Err(Error::InvalidParameter(format!("need at least 2 observations, got {}", data.len())));
        }
        Ok(data)
    }

    fn len(&self) -> usize {
        match self {
            Data::Scalar(x) => x.len(),
            Data::Bivariate(x) => x.len(),
            Data::Graphs { graphs, .. } => graphs.len(),
        }
    }
}

fn load_truth(path: Option<&Path>, n: usize) -> Result<Option<Partition>> {
    let Some(path) = path else { return Ok(None) };
    let truth = read_labels(path)?;
    if truth.n() != n {
        return Err(Error::SizeMismatch { left: n, right: truth.n() });
    }
    Ok(Some(truth))
}

/// Threshold flags before any tuning has happened.
#[derive(Debug, Clone, Copy)]
struct ThresholdRequest {
    eps: Option<f64>,
    eps0: Option<f64>,
    eps_star: Option<f64>,
    mode: Option<AdaptMode>,
    target: f64,
}

impl ThresholdRequest {
    fn check(&self) -> Result<()> {
        match self.mode {
            None if self.eps0.is_some() || self.eps_star.is_some() => Err(Error::InvalidParameter(
                "--eps0 and --eps-star need --adapt burnin or full".into(),
            )),
            Some(_) if self.eps.is_some() => {
                Err(Error::InvalidParameter("--eps sets a fixed threshold; use it with --adapt none".into()))
            }
            _ => Ok(()),
        }
    }

    fn resolve<K: KernelModel>(&self, data: &[K::Obs], kernel: &K, config: &AbcConfig) -> Result<Threshold> {
        let Some(mode) = self.mode else {
            let eps = self.eps.unwrap_or_else(|| default_fixed_threshold(data.len(), config.order));
            return Ok(Threshold::Fixed(eps));
        };
        let schedule = match (self.eps0, self.eps_star) {
            (Some(eps0), Some(eps_star)) => EpsilonSchedule::new(eps0, eps_star, mode)?,
            (eps0, Some(eps_star)) => {
                let eps0 = match eps0 {
                    Some(e) => e,
                    None => quantile(&prior_predictive_distances(data, kernel, config, 200, &mut config.rng())?, 1.0),
                };
                EpsilonSchedule::new(eps0.max(eps_star), eps_star, mode)?
            }
            (eps0, None) => {
                let options = TuneOptions {
                    target: self.target,
                    ..TuneOptions::default()
                };
                let tuned = default_schedule(data, kernel, config, mode, options)?;
                match eps0 {
                    Some(e) => EpsilonSchedule::new(e, tuned.eps_star(), mode)?,
                    None => tuned,
                }
            }
        };
        info!("threshold schedule eps0 {:.4} eps* {:.4}", schedule.eps0(), schedule.eps_star());
        Ok(Threshold::Adaptive(schedule))
    }
}

fn replication_dir(out: &Path, reps: u64, rep: u64) -> PathBuf {
    if reps == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("rep_{rep:03}"))
    }
}

/// Runs `reps` replications, one ChaCha stream each, and reports the first
/// failure after all have finished.
fn replicate(out: &Path, reps: u64, run: impl Fn(u64, &Path) -> Result<()> + Sync) -> Result<()> {
    if reps == 0 {
        return Err(Error::InvalidParameter("--reps must be at least 1".into()));
    }
    let results: Vec<Result<()>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let dir = replication_dir(out, reps, rep);
            fs::create_dir_all(&dir)?;
            let result = run(rep, &dir);
            if let (Err(e), true) = (&result, reps > 1) {
                error!("replication {rep}: {e}");
            }
            result
        })
        .collect();
    results.into_iter().collect()
}

/// Inputs as absolute paths, so the config echo works from any directory.
fn absolute_paths(common: &Common) -> Result<(PathBuf, Option<PathBuf>)> {
    let truth = common.truth.as_deref().map(fs::canonicalize).transpose()?;
    Ok((fs::canonicalize(&common.data)?, truth))
}

fn prior(common: &Common) -> Result<PYParams> {
    PYParams::new(common.theta, common.sigma)
}

pub fn run_abc_command(args: RunAbcArgs) -> Result<()> {
    let common = &args.common;
    let kernel: Scenario = common.kernel.into();
    let request = ThresholdRequest {
        eps: args.eps,
        eps0: args.eps0,
        eps_star: args.eps_star,
        mode: args.adapt.mode(),
        target: args.target,
    };
    request.check()?;
    let (data_path, truth_path) = absolute_paths(common)?;
    let data = Data::load(kernel, &data_path)?;
    let truth = load_truth(truth_path.as_deref(), data.len())?;

    let mut base = AbcConfig::new(common.iters, common.burnin, Threshold::Fixed(1.0));
    base.prior = prior(common)?;
    base.order = args.q;
    base.solver = match (args.solver, &data) {
        (Some(s), _) => s.into(),
        (None, Data::Scalar(_)) => SolverKind::Sorted1d,
        (None, _) => SolverKind::Hungarian,
    };
    base.seed = common.seed;
    base.max_attempts = args.max_attempts;
    base.log_attempts = true;
    base.validate()?;

    replicate(&common.out, common.reps, |rep, dir| {
        let mut config = base.clone();
        config.stream = rep;
        let job = Job::Abc {
            kernel,
            data: data_path.clone(),
            truth: truth_path.clone(),
            sweeps: common.sweeps,
            thin: common.thin,
            config,
        };
        execute_abc(job, &data, truth.as_ref(), Some(request), dir)
    })
}

pub fn run_gibbs_command(args: RunGibbsArgs) -> Result<()> {
    let common = &args.common;
    let kernel: Scenario = common.kernel.into();
    if matches!(kernel, Scenario::Gk2 | Scenario::Ergm) {
        return Err(Error::InvalidParameter(format!("no marginal sampler for the {kernel} kernel")));
    }
    let (data_path, truth_path) = absolute_paths(common)?;
    let data = Data::load(kernel, &data_path)?;
    let truth = load_truth(truth_path.as_deref(), data.len())?;
    let mut base = GibbsConfig::new(common.iters, common.burnin);
    base.prior = prior(common)?;
    base.m = args.m;
    base.seed = common.seed;
    base.validate()?;
    replicate(&common.out, common.reps, |rep, dir| {
        let mut config = base;
        config.stream = rep;
        let job = Job::Gibbs {
            kernel,
            data: data_path.clone(),
            truth: truth_path.clone(),
            thin: common.thin,
            conjugate: args.conjugate,
            config,
        };
        execute_gibbs(&job, &data, truth.as_ref(), dir)
    })
}

pub fn rerun_command(args: RerunArgs) -> Result<()> {
    let job: Job = read_json(&args.config)?;
    let (kernel, path, truth_path) = match &job {
        Job::Abc { kernel, data, truth, .. } | Job::Gibbs { kernel, data, truth, .. } => (*kernel, data, truth),
    };
    let data = Data::load(kernel, path)?;
    let truth = load_truth(truth_path.as_deref(), data.len())?;
    fs::create_dir_all(&args.out)?;
    match job {
        Job::Abc { .. } => execute_abc(job, &data, truth.as_ref(), None, &args.out),
        Job::Gibbs { .. } => execute_gibbs(&job, &data, truth.as_ref(), &args.out),
    }
}

/// Resolves the threshold (unless the job already carries one), echoes the
/// job and runs it.
fn execute_abc(
    job: Job,
    data: &Data,
    truth: Option<&Partition>,
    request: Option<ThresholdRequest>,
    dir: &Path,
) -> Result<()> {
    let Job::Abc { kernel, sweeps, .. } = &job else {
        unreachable!("not an ABC job")
    };
    match (kernel, data) {
        (Scenario::Gaussian, Data::Scalar(x)) => abc_with(job, x, &GaussianNig::preset(), truth, request, dir),
        (Scenario::Gk1, Data::Scalar(x)) => {
            let model = GkModel::new(GkPrior::default())?;
            abc_with(job, x, &model, truth, request, dir)
        }
        (Scenario::Gk2, Data::Bivariate(x)) => abc_with(job, x, &Gk2Model::preset(), truth, request, dir),
        (Scenario::Ergm, Data::Graphs { nodes, graphs }) => {
            let model = ErgmModel::new(*nodes, *sweeps)?;
            abc_with(job, graphs, &model, truth, request, dir)
        }
        _ => unreachable!("data loaded for a different kernel"),
    }
}

fn abc_with<K: KernelModel>(
    mut job: Job,
    data: &[K::Obs],
    kernel: &K,
    truth: Option<&Partition>,
    request: Option<ThresholdRequest>,
    dir: &Path,
) -> Result<()> {
    let Job::Abc { config, thin, .. } = &mut job else {
        unreachable!("not an ABC job")
    };
    if let Some(request) = request {
        config.threshold = request.resolve(data, kernel, config)?;
    }
    let (config, thin) = (config.clone(), *thin);
    write_json(&dir.join("config.json"), &job)?;
    let run = run_abc(data, kernel, &config)?;
    write_abc_outputs(dir, &run, truth, thin, config.seed)
}

fn execute_gibbs(job: &Job, data: &Data, truth: Option<&Partition>, dir: &Path) -> Result<()> {
    let Job::Gibbs {
        kernel,
        thin,
        conjugate,
        config,
        ..
    } = job
    else {
        unreachable!("not a Gibbs job")
    };
    let Data::Scalar(x) = data else {
        return Err(Error::InvalidParameter(format!("no marginal sampler for the {kernel} kernel")));
    };
    write_json(&dir.join("config.json"), job)?;
    let (thin, seed) = (*thin, config.seed);
    match (kernel, conjugate) {
        (Scenario::Gaussian, true) => {
            write_gibbs_outputs(dir, &gibbs_conjugate(x, &GaussianNig::preset(), config)?, truth, thin, seed)
        }
        (Scenario::Gaussian, false) => {
            write_gibbs_outputs(dir, &gibbs_mc(x, &GaussianNig::preset(), config)?, truth, thin, seed)
        }
        (Scenario::Gk1, false) => {
            let model = GkModel::new(GkPrior::default())?;
            write_gibbs_outputs(dir, &gibbs_mc(x, &model, config)?, truth, thin, seed)
        }
        (_, true) => Err(Error::InvalidParameter(format!("the {kernel} kernel has no conjugate sampler"))),
        _ => unreachable!("scalar data for a non-scalar kernel"),
    }
}
