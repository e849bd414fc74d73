use std::ops::Range;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use hlle_fault::pipeline::{
    calibrate, cluster_events, detect_cases, evaluate, generate, load_csv_cases, load_manifest_cases, read_clusters,
    read_events, run_pipeline, write_cluster_output, write_detect_output, write_metrics, DetectionMode, Manifest,
    PipelineConfig, CLUSTERS_FILE, EVENTS_FILE, METRICS_FILE,
};

#[derive(Parser, Debug)]
#[command(
    name = "hlle-fault",
    version,
    about = "Detect and cluster three-phase faults in measurement streams"
)]
struct Cli {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for synthesis, t-SNE and the mixture fit.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for every artifact (default `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Detection threshold on the rank-test p-value.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Print the resolved config and exit without touching any file.
    #[arg(long, global = true)]
    dry_run: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    PerCase,
    Concatenated,
}

impl From<Mode> for DetectionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::PerCase => DetectionMode::PerCase,
            Mode::Concatenated => DetectionMode::Concatenated,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize the configured scenario grid.
    Generate,
    /// Segment, embed and rank-test measurement files; write events and p-values.
    Detect {
        /// CSV files, or a manifest.json. Defaults to the generated manifest.
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Set alpha from a fault-free segment span of the first stream, e.g. 1..150.
        #[arg(long, value_parser = parse_span)]
        calibrate: Option<Range<usize>>,
    },
    /// Embed event features with t-SNE and fit the Gaussian mixture.
    Cluster {
        #[arg(long)]
        events: Option<PathBuf>,
        /// Number of mixture components.
        #[arg(short = 'k', long = "clusters")]
        k: Option<usize>,
    },
    /// Score cluster labels against the ground truth in the manifest.
    Evaluate {
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
    },
    /// Run every stage end to end.
    Pipeline,
}

fn parse_span(s: &str) -> std::result::Result<Range<usize>, String> {
    let (a, b) = s.split_once("..").ok_or("expected START..END")?;
    let a: usize = a.trim().parse().map_err(|e| format!("start: {e}"))?;
    let b: usize = b.trim().parse().map_err(|e| format!("end: {e}"))?;
    if a >= b {
        return Err("span is empty".into());
    }
    Ok(a..b)
}

fn resolve(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.out_dir {
        cfg.out_dir = d.clone();
    }
    if let Some(a) = cli.alpha {
        cfg.alpha = a;
    }
    match &cli.command {
        Command::Detect { mode: Some(m), .. } => cfg.detection_mode = (*m).into(),
        Command::Cluster { k: Some(k), .. } => cfg.gmm.k = *k,
        _ => {}
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = resolve(&cli)?;
    if cli.dry_run {
        println!("# {:?}", cli.command);
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let out = &cfg.out_dir;

    match &cli.command {
        Command::Generate => {
            let dir = cfg.dataset_dir();
            let m = generate(&cfg.dataset, &dir)?;
            println!("wrote {} cases to {}", m.cases.len(), dir.display());
        }
        Command::Detect {
            inputs,
            calibrate: span,
            ..
        } => {
            let cases = if inputs.is_empty() {
                load_manifest_cases(&cfg.manifest_path())?.1
            } else if inputs.len() == 1 && inputs[0].extension().is_some_and(|e| e == "json") {
                load_manifest_cases(&inputs[0])?.1
            } else {
                load_csv_cases(inputs)?
            };
            let mut det_cfg = cfg.detector();
            if let Some(span) = span.clone() {
                det_cfg.alpha = calibrate(&cases, &det_cfg, cfg.detection_mode, span.clone())?;
                println!("calibrated alpha = {} from segments {span:?}", det_cfg.alpha);
            }
            let det = detect_cases(&cases, &det_cfg, cfg.detection_mode)?;
            write_detect_output(out, &det)?;
            println!(
                "{} streams, {} events -> {}",
                cases.len(),
                det.events.len(),
                out.join(EVENTS_FILE).display()
            );
        }
        Command::Cluster { events, .. } => {
            let path = events.clone().unwrap_or_else(|| out.join(EVENTS_FILE));
            let events = read_events(&path)?;
            if events.is_empty() {
                println!("no events in {}; nothing to cluster", path.display());
                return Ok(());
            }
            let c = cluster_events(&events, &cfg.tsne, &cfg.gmm)?;
            write_cluster_output(out, &c)?;
            println!(
                "{} events in {} clusters -> {}",
                events.len(),
                cfg.gmm.k,
                out.join(CLUSTERS_FILE).display()
            );
        }
        Command::Evaluate {
            clusters,
            events,
            manifest,
        } => {
            let clusters = read_clusters(&clusters.clone().unwrap_or_else(|| out.join(CLUSTERS_FILE)))?;
            let events = read_events(&events.clone().unwrap_or_else(|| out.join(EVENTS_FILE)))?;
            let manifest = Manifest::read(&manifest.clone().unwrap_or_else(|| cfg.manifest_path()))?;
            let scores = evaluate(&clusters, &events, &manifest)?;
            write_metrics(&out.join(METRICS_FILE), &scores)?;
            println!("{}", serde_json::to_string_pretty(&scores)?);
        }
        Command::Pipeline => {
            let report = run_pipeline(&cfg).context("pipeline")?;
            for n in &report.notices {
                println!("notice: {n}");
            }
            println!("{}", report.summary());
            if report.cases == 0 {
                bail!("no cases were generated");
            }
        }
    }
    Ok(())
}
