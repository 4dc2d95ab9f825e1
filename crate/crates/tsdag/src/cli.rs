//! Command implementations behind the `tsdag` binary: generate synthetic
//! data, discover a causal graph from a CSV, evaluate graphs, sweep seeds,
//! and export DOT renderings.

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{self, Family, SyntheticSpec};
use crate::graphio::{self, GraphMetadata};
use crate::metrics::{self, EdgeSet, GraphMode, MetricReport};
use crate::model::{Activation, ModelConfig, Variant};
use crate::preprocess;
use crate::trainer::{self, TrainConfig};
use crate::TemporalGraph;

/// A stage-tagged error; the binary prints it and exits nonzero.
#[derive(Debug)]
pub struct CliError {
    pub stage: &'static str,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

fn stage_err<E: fmt::Display>(stage: &'static str) -> impl Fn(E) -> CliError {
    move |e| CliError {
        stage,
        message: e.to_string(),
    }
}

/// Full pipeline configuration: training, model, and preprocessing knobs.
/// Loadable from TOML; command-line flags override individual fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub lambda: f64,
    pub rho0: f64,
    pub alpha0: f64,
    pub beta: f64,
    pub gamma: f64,
    pub threshold: f64,
    pub inner_epochs: usize,
    pub max_outer: usize,
    pub h_tolerance: f64,
    pub rho_max: f64,
    pub learning_rate: f64,
    pub seed: u64,
    pub lag: usize,
    pub latent_channels: usize,
    pub activation: Activation,
    pub variant: Variant,
    pub latent_clamp: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        RunConfig {
            lambda: t.lambda,
            rho0: t.rho0,
            alpha0: t.alpha0,
            beta: t.beta,
            gamma: t.gamma,
            threshold: t.omega,
            inner_epochs: t.inner_epochs,
            max_outer: t.max_outer,
            h_tolerance: t.h_tolerance,
            rho_max: t.rho_max,
            learning_rate: t.learning_rate,
            seed: 0,
            lag: 5,
            latent_channels: 8,
            activation: Activation::Tanh,
            variant: Variant::Conv2d,
            latent_clamp: 1.0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(stage_err("config"))?;
        toml::from_str(&text).map_err(stage_err("config"))
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            rho0: self.rho0,
            alpha0: self.alpha0,
            beta: self.beta,
            gamma: self.gamma,
            omega: self.threshold,
            inner_epochs: self.inner_epochs,
            max_outer: self.max_outer,
            h_tolerance: self.h_tolerance,
            rho_max: self.rho_max,
            learning_rate: self.learning_rate,
            seed: self.seed,
        }
    }

    pub fn model_config(&self, n: usize) -> ModelConfig {
        ModelConfig {
            n,
            l_max: self.lag,
            latent_channels: self.latent_channels,
            activation: self.activation,
            variant: self.variant,
            latent_clamp: self.latent_clamp,
        }
    }

    fn as_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

/// Flag-level overrides applied on top of defaults and the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub lag: Option<usize>,
    pub threshold: Option<f64>,
    pub lambda: Option<f64>,
    pub variant: Option<Variant>,
}

pub fn resolve_config(config_path: Option<&Path>, ov: &Overrides) -> Result<RunConfig, CliError> {
    let mut cfg = match config_path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = ov.seed {
        cfg.seed = seed;
    }
    if let Some(lag) = ov.lag {
        cfg.lag = lag;
    }
    if let Some(th) = ov.threshold {
        cfg.threshold = th;
    }
    if let Some(lambda) = ov.lambda {
        cfg.lambda = lambda;
    }
    if let Some(variant) = ov.variant {
        cfg.variant = variant;
    }
    Ok(cfg)
}

pub struct GenerateArgs {
    pub family: Family,
    pub length: usize,
    pub seed: u64,
    pub noise_scale: f64,
    pub burn_in: usize,
    pub snr: Option<f64>,
    pub out_data: PathBuf,
    pub out_truth: PathBuf,
}

/// Writes a simulated dataset CSV plus its ground-truth graph file.
pub fn cmd_generate(args: &GenerateArgs) -> Result<(), CliError> {
    let mut spec = SyntheticSpec::new(args.family, args.length, args.seed);
    spec.noise_scale = args.noise_scale;
    spec.burn_in = args.burn_in;
    if let Some(target) = args.snr {
        spec = datagen::snr_variant(&spec, target).map_err(stage_err("generate/snr"))?;
    }
    let (data, truth) = datagen::generate(&spec).map_err(stage_err("generate"))?;
    preprocess::write_csv(&data, &args.out_data).map_err(stage_err("generate/write"))?;
    let metadata = GraphMetadata {
        threshold: None,
        seed: Some(spec.seed),
        acyclicity_reached: None,
        edges_removed: None,
        config: Some(serde_json::to_value(spec).expect("spec serializes")),
    };
    graphio::write_graph(&truth.graph, metadata, &args.out_truth)
        .map_err(stage_err("generate/write"))?;
    println!(
        "generate: wrote {} rows to {} and {} edges to {}",
        data.rows(),
        args.out_data.display(),
        truth.graph.edges().len(),
        args.out_truth.display()
    );
    Ok(())
}

pub struct DiscoverArgs {
    pub input: PathBuf,
    pub out: PathBuf,
    pub config: RunConfig,
}

fn train_log_path(out: &Path) -> PathBuf {
    out.with_extension("train.csv")
}

/// Normalize -> window -> fit -> threshold -> write graph + training log.
pub fn cmd_discover(args: &DiscoverArgs) -> Result<MetadataSummary, CliError> {
    let cfg = &args.config;
    let data = preprocess::load_csv(&args.input).map_err(stage_err("discover/ingest"))?;
    if data.rows() <= cfg.lag {
        return Err(CliError {
            stage: "discover/ingest",
            message: format!(
                "need more than lag={} rows, found {}",
                cfg.lag,
                data.rows()
            ),
        });
    }
    let normalized = preprocess::normalize(&data).map_err(stage_err("discover/normalize"))?;
    let batch = preprocess::window(&normalized, cfg.lag).map_err(stage_err("discover/window"))?;
    let model_cfg = cfg.model_config(batch.n());
    let train_cfg = cfg.train_config();
    let report =
        trainer::fit::<f64>(&batch, &model_cfg, &train_cfg).map_err(stage_err("discover/fit"))?;

    let metadata = GraphMetadata {
        threshold: Some(cfg.threshold),
        seed: Some(cfg.seed),
        acyclicity_reached: Some(report.acyclicity_reached),
        edges_removed: Some(report.edges_removed),
        config: Some(cfg.as_json()),
    };
    graphio::write_graph(&report.graph, metadata, &args.out)
        .map_err(stage_err("discover/write"))?;

    let log_path = train_log_path(&args.out);
    let mut log = String::from("iteration,loss,h,rho,alpha,objective\n");
    for r in &report.state.history {
        log.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iteration, r.loss, r.h, r.rho, r.alpha, r.objective
        ));
    }
    std::fs::write(&log_path, log).map_err(stage_err("discover/write"))?;

    let summary = MetadataSummary {
        edges: report.graph.edges().len(),
        acyclicity_reached: report.acyclicity_reached,
        edges_removed: report.edges_removed,
        iterations: report.state.outer_iteration,
    };
    println!(
        "discover: {} edges ({} outer iterations, acyclicity_reached={}, edges_removed={}) -> {}",
        summary.edges,
        summary.iterations,
        summary.acyclicity_reached,
        summary.edges_removed,
        args.out.display()
    );
    Ok(summary)
}

#[derive(Debug, Clone, Copy)]
pub struct MetadataSummary {
    pub edges: usize,
    pub acyclicity_reached: bool,
    pub edges_removed: usize,
    pub iterations: usize,
}

/// Builds an edge set from a graph reindexed onto a reference name order.
fn edge_set_in(
    mode: GraphMode,
    graph: &TemporalGraph,
    names: &[String],
) -> Result<EdgeSet, CliError> {
    let mut set = EdgeSet::empty(mode, names.to_vec());
    for (from, lag, to, _) in graph.edges() {
        let f = names
            .iter()
            .position(|n| *n == graph.names[from])
            .ok_or_else(|| CliError {
                stage: "evaluate",
                message: format!("variable {:?} not shared by both graphs", graph.names[from]),
            })?;
        let t = names
            .iter()
            .position(|n| *n == graph.names[to])
            .ok_or_else(|| CliError {
                stage: "evaluate",
                message: format!("variable {:?} not shared by both graphs", graph.names[to]),
            })?;
        let lag = match mode {
            GraphMode::Full => Some(lag),
            GraphMode::Summary => None,
        };
        set.insert(f, lag, t);
    }
    Ok(set)
}

pub fn evaluate_graphs(
    pred: &TemporalGraph,
    truth: &TemporalGraph,
    mode: GraphMode,
) -> Result<MetricReport, CliError> {
    let mut names = truth.names.clone();
    names.sort();
    let pred_set = edge_set_in(mode, pred, &names)?;
    let truth_set = edge_set_in(mode, truth, &names)?;
    metrics::evaluate(&pred_set, &truth_set).map_err(stage_err("evaluate"))
}

pub struct EvaluateArgs {
    pub pred: PathBuf,
    pub truth: PathBuf,
    pub mode: GraphMode,
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<MetricReport, CliError> {
    let (pred, _) = graphio::read_graph(&args.pred).map_err(stage_err("evaluate/read"))?;
    let (truth, _) = graphio::read_graph(&args.truth).map_err(stage_err("evaluate/read"))?;
    let report = evaluate_graphs(&pred, &truth, args.mode)?;
    let line = format!(
        "evaluate[{}]: SHD {} F1 {:.4} FDR {:.4} (tp {} fp {} fn {}{})",
        report.mode,
        report.shd,
        report.f1,
        report.fdr,
        report.tp,
        report.fp,
        report.fn_,
        if report.empty_prediction {
            ", empty prediction"
        } else {
            ""
        }
    );
    println!("{line}");
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(out, text).map_err(stage_err("evaluate/write"))?;
    }
    Ok(report)
}

pub struct SweepArgs {
    pub input: PathBuf,
    pub truth: PathBuf,
    pub seeds: Vec<u64>,
    pub mode: GraphMode,
    pub config: RunConfig,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub shd: usize,
    pub f1: f64,
    pub fdr: f64,
    pub edges: usize,
    pub acyclicity_reached: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub mode: GraphMode,
    pub rows: Vec<SweepRow>,
    /// Row of the best single run, ranked by (shd, fdr, -f1).
    pub best: SweepRow,
    pub config: RunConfig,
}

/// Repeats discovery across seeds and reports per-seed plus best metrics.
pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepReport, CliError> {
    if args.seeds.is_empty() {
        return Err(CliError {
            stage: "sweep",
            message: "need at least one seed".into(),
        });
    }
    let cfg = &args.config;
    let data = preprocess::load_csv(&args.input).map_err(stage_err("sweep/ingest"))?;
    let normalized = preprocess::normalize(&data).map_err(stage_err("sweep/normalize"))?;
    let batch = preprocess::window(&normalized, cfg.lag).map_err(stage_err("sweep/window"))?;
    let (truth, _) = graphio::read_graph(&args.truth).map_err(stage_err("sweep/read"))?;
    let model_cfg = cfg.model_config(batch.n());

    let rows: Result<Vec<SweepRow>, CliError> = args
        .seeds
        .par_iter()
        .map(|&seed| {
            let train_cfg = TrainConfig {
                seed,
                ..cfg.train_config()
            };
            let report = trainer::fit::<f64>(&batch, &model_cfg, &train_cfg)
                .map_err(stage_err("sweep/fit"))?;
            let metrics = evaluate_graphs(&report.graph, &truth, args.mode)?;
            Ok(SweepRow {
                seed,
                shd: metrics.shd,
                f1: metrics.f1,
                fdr: metrics.fdr,
                edges: report.graph.edges().len(),
                acyclicity_reached: report.acyclicity_reached,
            })
        })
        .collect();
    let rows = rows?;
    let best = rows
        .iter()
        .min_by(|a, b| {
            (a.shd, a.fdr, -a.f1)
                .partial_cmp(&(b.shd, b.fdr, -b.f1))
                .expect("metrics are finite")
        })
        .expect("at least one seed")
        .clone();
    let report = SweepReport {
        mode: args.mode,
        rows,
        best,
        config: cfg.clone(),
    };
    for row in &report.rows {
        println!(
            "sweep[seed {}]: SHD {} F1 {:.4} FDR {:.4} ({} edges)",
            row.seed, row.shd, row.f1, row.fdr, row.edges
        );
    }
    println!(
        "sweep[best seed {}]: SHD {} F1 {:.4} FDR {:.4}",
        report.best.seed, report.best.shd, report.best.f1, report.best.fdr
    );
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(out, text).map_err(stage_err("sweep/write"))?;
    }
    Ok(report)
}

pub struct ExportDotArgs {
    pub input: PathBuf,
    pub mode: GraphMode,
    pub out: PathBuf,
}

pub fn cmd_export_dot(args: &ExportDotArgs) -> Result<(), CliError> {
    let (graph, _) = graphio::read_graph(&args.input).map_err(stage_err("export-dot/read"))?;
    let dot = graphio::to_dot(&graph, args.mode);
    std::fs::write(&args.out, dot).map_err(stage_err("export-dot/write"))?;
    println!("export-dot: wrote {}", args.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_matches_published_hyperparameters() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.lambda, 0.1);
        assert_eq!(cfg.rho0, 1.0);
        assert_eq!(cfg.alpha0, 0.0);
        assert_eq!(cfg.beta, 0.1);
        assert_eq!(cfg.gamma, 0.25);
        assert_eq!(cfg.threshold, 0.3);
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let parsed: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, cfg);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "lambda = 0.5\nlag = 3\n").unwrap();
        let ov = Overrides {
            lambda: Some(0.7),
            ..Overrides::default()
        };
        let resolved = resolve_config(Some(&path), &ov).unwrap();
        assert_eq!(resolved.lambda, 0.7); // flag wins over file
        assert_eq!(resolved.lag, 3); // file wins over default
        assert_eq!(resolved.gamma, 0.25); // default survives
    }

    #[test]
    fn unknown_config_keys_are_rejected() {
        let err = toml::from_str::<RunConfig>("lambdaa = 0.5\n");
        assert!(err.is_err());
    }
}
