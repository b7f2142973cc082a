//! Command-line interface: simulation, fitting, sequential fitting, partition
//! point estimation, evaluation, convergence diagnostics, and FCS conversion.
//!
//! Exit codes: 0 success, 2 config/argument error, 3 data-format error,
//! 4 numerical failure.

mod config;

use clap::{Parser, Subcommand};
use config::{RunConfig, SimConfig};
use dpmst::error::Error;
use dpmst::io::{self, Transform};
use dpmst::model::DataMatrix;
use dpmst::partition::{
    binder_loss, binder_point_estimate, f_measure_total, f_point_estimate, limited_f_measure,
    similarity_matrix, Partition,
};
use dpmst::rng::RngStream;
use dpmst::sampler::{gelman_rubin, run_chain_observed, PosteriorDraws};
use dpmst::seqpost::{build_informative_prior, default_prior_components, MapPriorConfig};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser)]
#[command(name = "dpmst", version, about = "Dirichlet process mixtures of skew distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic mixture sample and its truth partition.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the mixture model to a dataset.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit with an informative prior built from a previous run.
    Seqfit {
        #[arg(long)]
        config: PathBuf,
        /// Run directory whose posterior draws prime the prior.
        #[arg(long)]
        prior_from: PathBuf,
        /// Number of base-measure components (default: modal K of the prior
        /// run).
        #[arg(long)]
        prior_k: Option<usize>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Recompute a partition point estimate from stored draws.
    Pointest {
        dir: PathBuf,
        #[arg(long, default_value = "binder")]
        method: String,
        /// Output file (default: pointest_METHOD.csv inside the run dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a predicted partition against a reference partition.
    Eval {
        pred: PathBuf,
        reference: PathBuf,
        /// Also report the F-measure limited to reference clusters smaller
        /// than this.
        #[arg(long)]
        limit_p: Option<usize>,
    },
    /// Gelman-Rubin diagnostics across run directories.
    Diagnose {
        dirs: Vec<PathBuf>,
    },
    /// Convert an FCS file to CSV, optionally transforming the markers.
    Fcs2csv {
        input: PathBuf,
        output: PathBuf,
        #[arg(long)]
        transform: Option<String>,
    },
}

#[derive(clap::Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// sn or st.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    parallel: Option<bool>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// none, arcsinh:COFACTOR, or boxcox:LAMBDA.
    #[arg(long)]
    transform: Option<String>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.iters {
            cfg.iters = v;
        }
        if let Some(v) = self.burnin {
            cfg.burnin = v;
        }
        if let Some(v) = self.thin {
            cfg.thin = v;
        }
        if let Some(v) = &self.mode {
            cfg.mode = v.clone();
        }
        if let Some(v) = self.parallel {
            cfg.parallel = v;
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        if let Some(v) = &self.transform {
            cfg.transform = Some(v.clone());
        }
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse { .. } | Error::Unsupported(_) | Error::Corrupt { .. } => 3,
        Error::NotSpd(_)
        | Error::NumericalDomain(_)
        | Error::DegenerateSlice(_)
        | Error::ChainFailure { .. }
        | Error::DegenerateSample(_)
        | Error::ComponentCollapse(_)
        | Error::Domain(_) => 4,
        _ => 2,
    }
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(exit_code(&err));
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate { config, seed } => cmd_simulate(&config, seed),
        Command::Fit { config, overrides } => cmd_fit(&config, &overrides, None),
        Command::Seqfit { config, prior_from, prior_k, overrides } => {
            cmd_fit(&config, &overrides, Some((prior_from, prior_k)))
        }
        Command::Pointest { dir, method, out } => cmd_pointest(&dir, &method, out),
        Command::Eval { pred, reference, limit_p } => cmd_eval(&pred, &reference, limit_p),
        Command::Diagnose { dirs } => cmd_diagnose(&dirs),
        Command::Fcs2csv { input, output, transform } => cmd_fcs2csv(&input, &output, transform),
    }
}

fn cmd_simulate(config: &Path, seed: Option<u64>) -> Result<(), Error> {
    let mut cfg = SimConfig::from_file(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let components = cfg.components()?;
    let mut rng = RngStream::new(cfg.seed);
    let (data, labels) = dpmst::sim::simulate_mixture(&components, cfg.count, &mut rng)?;
    io::write_csv(&data, &cfg.out_data)?;
    io::write_partition_csv(&Partition::from_raw_labels(&labels)?, &cfg.out_labels)?;
    println!(
        "{}",
        serde_json::json!({
            "command": "simulate",
            "count": cfg.count,
            "dim": data.dim(),
            "components": components.len(),
            "seed": cfg.seed,
            "data": cfg.out_data,
            "labels": cfg.out_labels,
        })
    );
    Ok(())
}

fn load_data(path: &Path, transform: Transform<f64>) -> Result<DataMatrix<f64>, Error> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let data = if ext.eq_ignore_ascii_case("fcs") {
        io::read_fcs(path)?
    } else {
        io::read_csv(path)?
    };
    io::transform(&data, transform)
}

fn cmd_fit(
    config: &Path,
    overrides: &Overrides,
    prior_from: Option<(PathBuf, Option<usize>)>,
) -> Result<(), Error> {
    let started = Instant::now();
    let (mut cfg, _) = RunConfig::from_file(config)?;
    overrides.apply(&mut cfg);
    let resolved = format!("{cfg:?}");
    let chain_cfg = cfg.chain_config()?;
    let data = load_data(&cfg.input, cfg.transform_spec()?)?;

    let (base, conc, prior_note) = match &prior_from {
        None => {
            let (base, conc) = cfg.hyperparams(&data)?;
            (base, conc, None)
        }
        Some((dir, prior_k)) => {
            let prior_draws: PosteriorDraws<f64> = io::read_draws(dir)?;
            if prior_draws
                .cluster_params
                .iter()
                .flatten()
                .next()
                .map(|cp| cp.dim())
                .unwrap_or(data.dim())
                != data.dim()
            {
                return Err(Error::Config(format!(
                    "prior run in {dir:?} has a different dimension than the data"
                )));
            }
            let k = prior_k.unwrap_or_else(|| default_prior_components(&prior_draws));
            // the sequential approximation re-estimates the base measure and
            // concentration; the nu prior passes through unchanged
            let (default_base, _) = cfg.hyperparams(&data)?;
            let mut rng = RngStream::keyed(chain_cfg.seed, u64::MAX - 2, 0);
            let (base, conc) = build_informative_prior(
                &prior_draws,
                k,
                &MapPriorConfig::default(),
                default_base.nu_prior.clone(),
                &mut rng,
            )?;
            (base, conc, Some(format!("{}", dir.display())))
        }
    };

    let progress_every = (chain_cfg.n_iter / 20).max(1);
    let n_iter = chain_cfg.n_iter;
    let draws = run_chain_observed(&data, &base, &conc, &chain_cfg, |t, state| {
        if (t + 1) % progress_every == 0 || t + 1 == n_iter {
            eprintln!(
                "iter {}/{} K={} alpha={:.3}",
                t + 1,
                n_iter,
                state.n_clusters(),
                state.alpha
            );
        }
    })?;

    let partitions = draws.partitions_as_partition()?;
    let (point, similarity, binder) = match cfg.point_method.as_str() {
        "binder" => {
            let zeta = similarity_matrix(&partitions)?;
            let (p, loss) = binder_point_estimate(&partitions, &zeta)?;
            (p, Some(zeta), Some(loss))
        }
        "fmeasure" => {
            let p = if partitions.len() == 1 {
                partitions[0].clone()
            } else {
                f_point_estimate(&partitions)?
            };
            (p, None, None)
        }
        other => {
            return Err(Error::Config(format!(
                "point_method must be binder or fmeasure, got {other:?}"
            )))
        }
    };

    let bundle = io::ResultBundle {
        point_estimate: point.clone(),
        similarity: if cfg.save_similarity { similarity } else { None },
        k_trace: draws.k_trace.clone(),
        alpha_trace: draws.alpha_trace.clone(),
        logdensity_trace: draws.logdensity_trace.clone(),
        nu_acceptance_rate: draws.nu_acceptance_rate,
        provenance: io::Provenance {
            seed: chain_cfg.seed,
            config_hash: io::config_hash(&resolved),
            mode: chain_cfg.mode.to_string(),
            n_obs: data.n_obs(),
            dim: data.dim(),
            prior_from: prior_note.clone(),
        },
    };
    io::write_results(&bundle, &cfg.out)?;
    io::write_draws(&draws, &cfg.out)?;

    println!(
        "{}",
        serde_json::json!({
            "command": if prior_note.is_some() { "seqfit" } else { "fit" },
            "out": cfg.out,
            "n_obs": data.n_obs(),
            "dim": data.dim(),
            "k_mode": draws.modal_k(),
            "k_point": point.n_clusters(),
            "binder_loss": binder,
            "nu_acceptance": draws.nu_acceptance_rate,
            "runtime_s": started.elapsed().as_secs_f64(),
            "seed": chain_cfg.seed,
        })
    );
    Ok(())
}

fn cmd_pointest(dir: &Path, method: &str, out: Option<PathBuf>) -> Result<(), Error> {
    let draws: PosteriorDraws<f64> = io::read_draws(dir)?;
    let partitions = draws.partitions_as_partition()?;
    let (point, loss) = match method {
        "binder" => {
            let zeta: dpmst::SimilarityMatrix64 = similarity_matrix(&partitions)?;
            let (p, loss) = binder_point_estimate(&partitions, &zeta)?;
            // the returned loss is minimal over every stored draw by
            // construction
            debug_assert!(partitions
                .iter()
                .all(|q| binder_loss(q, &zeta).unwrap() >= loss - 1e-9));
            (p, Some(loss))
        }
        "fmeasure" => {
            let p = if partitions.len() == 1 {
                partitions[0].clone()
            } else {
                f_point_estimate(&partitions)?
            };
            (p, None)
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "method must be binder or fmeasure, got {other:?}"
            )))
        }
    };
    let out = out.unwrap_or_else(|| dir.join(format!("pointest_{method}.csv")));
    io::write_partition_csv(&point, &out)?;
    println!(
        "{}",
        serde_json::json!({
            "command": "pointest",
            "method": method,
            "out": out,
            "k": point.n_clusters(),
            "binder_loss": loss,
            "n_draws": partitions.len(),
        })
    );
    Ok(())
}

fn cmd_eval(pred: &Path, reference: &Path, limit_p: Option<usize>) -> Result<(), Error> {
    let pred_part = io::read_partition_csv(pred)?;
    let ref_part = io::read_partition_csv(reference)?;
    let f_total: f64 = f_measure_total(&pred_part, &ref_part)?;
    let limited = match limit_p {
        None => None,
        Some(p) => match limited_f_measure::<f64>(&pred_part, &ref_part, p) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(msg)) => {
                eprintln!("warning: limited F-measure omitted: {msg}");
                None
            }
            Err(e) => return Err(e),
        },
    };
    eprintln!("F_total = {f_total:.4}");
    if let Some(l) = limited {
        eprintln!("F_limited = {l:.4}");
    }
    println!(
        "{}",
        serde_json::json!({
            "command": "eval",
            "f_total": format!("{f_total:.4}"),
            "f_limited": limited.map(|l| format!("{l:.4}")),
            "pred_clusters": pred_part.n_clusters(),
            "ref_clusters": ref_part.n_clusters(),
        })
    );
    Ok(())
}

fn cmd_diagnose(dirs: &[PathBuf]) -> Result<(), Error> {
    if dirs.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "diagnose needs at least 2 run directories, got {}",
            dirs.len()
        )));
    }
    let mut logdens = Vec::new();
    let mut alphas = Vec::new();
    for dir in dirs {
        let bundle: io::ResultBundle<f64> = io::read_results(dir)?;
        logdens.push(bundle.logdensity_trace);
        alphas.push(bundle.alpha_trace);
    }
    let r_logdensity = gelman_rubin(&logdens)?;
    let r_alpha = gelman_rubin(&alphas)?;
    eprintln!("split-chain R-hat: logdensity = {r_logdensity:.4}, alpha = {r_alpha:.4}");
    println!(
        "{}",
        serde_json::json!({
            "command": "diagnose",
            "runs": dirs.len(),
            "rhat_logdensity": r_logdensity,
            "rhat_alpha": r_alpha,
        })
    );
    Ok(())
}

fn cmd_fcs2csv(input: &Path, output: &Path, transform: Option<String>) -> Result<(), Error> {
    let spec: Transform<f64> = match transform {
        None => Transform::None,
        Some(s) => s.parse()?,
    };
    let data = load_data(input, spec)?;
    io::write_csv(&data, output)?;
    println!(
        "{}",
        serde_json::json!({
            "command": "fcs2csv",
            "rows": data.n_obs(),
            "columns": data.dim(),
            "out": output,
        })
    );
    Ok(())
}
