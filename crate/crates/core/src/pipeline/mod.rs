//! End-to-end orchestration: generate, detect, cluster, evaluate. Every
//! stage reads and writes plain files so stages can be rerun in isolation.

mod artifacts;
pub mod plot;

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{
    calibrate_alpha, detect, detect_events, extract_features, pvalue_series, segment_stream, DetectorConfig,
    FaultEvent, PValueSeries,
};
use crate::error::{Error, Result};
use crate::gmm::{fit, GmmConfig, GmmFit};
use crate::hlle::HlleConfig;
use crate::metrics::{score_all, ClusterScores};
use crate::signal::{generate_dataset, meta_path_for, read_csv, write_csv, write_meta, DatasetConfig, SignalTrace};
use crate::tsne::{tsne_embed, EmbeddingLD, TsneConfig};

pub use artifacts::{
    read_clusters, read_events, read_pvalues, write_clusters, write_embedding, write_events, write_pvalues,
    ClusterAssignment, Manifest, ManifestCase, MANIFEST_FILE,
};

pub const EVENTS_FILE: &str = "events.jsonl";
pub const PVALUES_FILE: &str = "pvalues.csv";
pub const PVALUES_DIR: &str = "pvalues";
pub const EMBEDDING_FILE: &str = "embedding.csv";
pub const CLUSTERS_FILE: &str = "clusters.csv";
pub const MODEL_FILE: &str = "model.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const PLOTS_DIR: &str = "plots";
pub const DATASET_DIR: &str = "dataset";

/// How several measurement files are analysed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    /// Each case is its own stream with its own reference segment.
    #[default]
    PerCase,
    /// All cases are joined into one stream in manifest order; the first
    /// segment of the first case is the only reference.
    Concatenated,
}

/// Everything a pipeline run needs. `seed` overrides the seeds of the
/// dataset, t-SNE and mixture sections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub segment_len: usize,
    pub alpha: f64,
    pub termination_run: usize,
    pub reference_index: usize,
    pub tie_tolerance: f64,
    pub detection_mode: DetectionMode,
    /// Render SVG plots next to the plot CSVs.
    pub svg: bool,
    pub hlle: HlleConfig,
    pub tsne: TsneConfig,
    pub gmm: GmmConfig,
    pub dataset: DatasetConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let det = DetectorConfig::default();
        Self {
            seed: 42,
            out_dir: PathBuf::from("out"),
            segment_len: det.segment_len,
            alpha: det.alpha,
            termination_run: det.termination_run,
            reference_index: det.reference_index,
            tie_tolerance: det.tie_tolerance,
            detection_mode: DetectionMode::default(),
            svg: true,
            hlle: det.hlle,
            // below the ~15 events per fault type of the desk-scale grid
            tsne: TsneConfig {
                perplexity: 10.0,
                ..TsneConfig::default()
            },
            gmm: GmmConfig::default(),
            dataset: DatasetConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            row: e.span().map_or(0, |s| text[..s.start].lines().count().max(1)),
            reason: e.message().to_string(),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(&self.resolved()).expect("config is always representable")
    }

    /// Copy with the master seed pushed into every stage.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.dataset.seed = self.seed;
        c.tsne.seed = self.seed;
        c.gmm.seed = self.seed;
        c
    }

    pub fn detector(&self) -> DetectorConfig {
        DetectorConfig {
            segment_len: self.segment_len,
            alpha: self.alpha,
            termination_run: self.termination_run,
            reference_index: self.reference_index,
            tie_tolerance: self.tie_tolerance,
            hlle: self.hlle,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.resolved();
        r.detector().validate()?;
        r.tsne.validate()?;
        r.gmm.validate()?;
        r.dataset.validate()
    }

    pub fn dataset_dir(&self) -> PathBuf {
        self.out_dir.join(DATASET_DIR)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dataset_dir().join(MANIFEST_FILE)
    }
}

fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Synthesize the configured grid into `dir`: one CSV and sidecar per case
/// plus `manifest.json`.
pub fn generate(dataset: &DatasetConfig, dir: &Path) -> Result<Manifest> {
    create_dir(dir)?;
    let cases = generate_dataset(dataset)?;
    let entries = cases
        .par_iter()
        .map(|c| {
            let file = PathBuf::from(format!("{}.csv", c.case_id));
            let csv_path = dir.join(&file);
            write_csv(&csv_path, &c.trace)?;
            let meta_path = meta_path_for(&csv_path);
            let meta = c.scenario.annotation();
            write_meta(&meta_path, &meta)?;
            Ok(ManifestCase {
                case_id: c.case_id.clone(),
                meta_file: meta_path.file_name().map(PathBuf::from).unwrap_or_default(),
                file,
                fault_type: meta.fault_type,
                resistance_ohm: meta.resistance_ohm,
                distance_km: meta.distance_km,
                fault_start_sample: meta.fault_start_sample,
                fault_end_sample: meta.fault_end_sample,
                seed: meta.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let manifest = Manifest {
        dataset: dataset.clone(),
        cases: entries,
    };
    manifest.write(&dir.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// A named measurement stream.
#[derive(Debug, Clone)]
pub struct CaseInput {
    pub case_id: String,
    pub trace: SignalTrace,
}

/// Read every case listed in a manifest, in manifest order.
pub fn load_manifest_cases(manifest_path: &Path) -> Result<(Manifest, Vec<CaseInput>)> {
    let manifest = Manifest::read(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let cases = manifest
        .cases
        .par_iter()
        .map(|c| {
            Ok(CaseInput {
                case_id: c.case_id.clone(),
                trace: read_csv(&base.join(&c.file))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, cases))
}

/// Read loose CSV files; each case is named after its file stem.
pub fn load_csv_cases(paths: &[PathBuf]) -> Result<Vec<CaseInput>> {
    paths
        .par_iter()
        .map(|p| {
            Ok(CaseInput {
                case_id: p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                trace: read_csv(p)?,
            })
        })
        .collect()
}

/// P-values of one analysed stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamPValues {
    /// Case name in per-case mode; `None` for the concatenated stream.
    pub case_id: Option<String>,
    pub series: PValueSeries,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectOutput {
    pub mode: DetectionMode,
    pub events: Vec<FaultEvent>,
    pub streams: Vec<StreamPValues>,
    /// First-segment offset of every case in the running segment count.
    pub case_offsets: Vec<(String, usize)>,
}

/// Run detection over the cases. Event ids are assigned in case order and
/// every event records the case it came from.
pub fn detect_cases(cases: &[CaseInput], cfg: &DetectorConfig, mode: DetectionMode) -> Result<DetectOutput> {
    if cases.is_empty() {
        return Err(Error::EmptyInput("no cases to analyse"));
    }
    let mut offsets = Vec::with_capacity(cases.len());
    let mut seg = 0;
    for c in cases {
        offsets.push((c.case_id.clone(), seg));
        seg += c.trace.len() / cfg.segment_len;
    }
    let (mut events, streams) = match mode {
        DetectionMode::PerCase => {
            let runs = cases
                .par_iter()
                .map(|c| detect(&c.trace, cfg).map(|d| (c.case_id.clone(), d)))
                .collect::<Result<Vec<_>>>()?;
            let mut events = Vec::new();
            let mut streams = Vec::new();
            for (case_id, d) in runs {
                events.extend(d.events.into_iter().map(|mut e| {
                    e.case_id = Some(case_id.clone());
                    e
                }));
                streams.push(StreamPValues {
                    case_id: Some(case_id),
                    series: d.pvalues,
                });
            }
            (events, streams)
        }
        DetectionMode::Concatenated => {
            let traces: Vec<SignalTrace> = cases.iter().map(|c| c.trace.clone()).collect();
            let joined = SignalTrace::concatenate(&traces)?;
            let segments = segment_stream(&joined, cfg)?;
            let series = pvalue_series(&segments, cfg)?;
            let mut events = detect_events(&series, cfg.termination_run, cfg.segment_len);
            for e in &mut events {
                extract_features(e, &segments)?;
                let owner = offsets.partition_point(|(_, off)| *off <= e.start_segment) - 1;
                e.case_id = Some(offsets[owner].0.clone());
            }
            (events, vec![StreamPValues { case_id: None, series }])
        }
    };
    for (i, e) in events.iter_mut().enumerate() {
        e.event_id = i;
    }
    Ok(DetectOutput {
        mode,
        events,
        streams,
        case_offsets: offsets,
    })
}

/// Threshold from a fault-free span of the first analysed stream.
pub fn calibrate(cases: &[CaseInput], cfg: &DetectorConfig, mode: DetectionMode, span: Range<usize>) -> Result<f64> {
    let first = cases.first().ok_or(Error::EmptyInput("no cases to analyse"))?;
    let trace = match mode {
        DetectionMode::PerCase => first.trace.clone(),
        DetectionMode::Concatenated => {
            SignalTrace::concatenate(&cases.iter().map(|c| c.trace.clone()).collect::<Vec<_>>())?
        }
    };
    let segments = segment_stream(&trace, cfg)?;
    calibrate_alpha(&pvalue_series(&segments, cfg)?, span)
}

/// `events.jsonl` plus p-values: `pvalues.csv` for a single stream, one
/// file per case under `pvalues/` in per-case mode.
pub fn write_detect_output(out_dir: &Path, out: &DetectOutput) -> Result<()> {
    create_dir(out_dir)?;
    write_events(&out_dir.join(EVENTS_FILE), &out.events)?;
    match out.mode {
        DetectionMode::Concatenated => write_pvalues(&out_dir.join(PVALUES_FILE), &out.streams[0].series),
        DetectionMode::PerCase => {
            let dir = out_dir.join(PVALUES_DIR);
            create_dir(&dir)?;
            out.streams.par_iter().try_for_each(|s| {
                let name = s.case_id.as_deref().unwrap_or("stream");
                write_pvalues(&dir.join(format!("{name}.csv")), &s.series)
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutput {
    pub event_ids: Vec<usize>,
    pub embedding: EmbeddingLD,
    pub fit: GmmFit,
}

impl ClusterOutput {
    pub fn assignments(&self) -> Vec<ClusterAssignment> {
        self.event_ids
            .iter()
            .zip(&self.fit.labels)
            .map(|(&event_id, &cluster_label)| ClusterAssignment {
                event_id,
                cluster_label,
            })
            .collect()
    }
}

/// Embed event features with t-SNE and fit the mixture to the embedding.
pub fn cluster_events(events: &[FaultEvent], tsne: &TsneConfig, gmm: &GmmConfig) -> Result<ClusterOutput> {
    if events.len() < gmm.k.max(3) {
        return Err(Error::Pipeline(format!(
            "clustering needs at least K = {} events (and 3 for the embedding), found {}",
            gmm.k,
            events.len()
        )));
    }
    let features: Vec<Vec<f64>> = events.iter().map(|e| e.features.clone()).collect();
    let embedding = tsne_embed(&features, tsne)?;
    let fit = fit(&embedding.coords, gmm)?;
    Ok(ClusterOutput {
        event_ids: events.iter().map(|e| e.event_id).collect(),
        embedding,
        fit,
    })
}

#[derive(Serialize)]
struct ModelDump<'a> {
    means: Vec<&'a [f64]>,
    covariances: Vec<&'a Vec<Vec<f64>>>,
    weights: Vec<f64>,
    log_likelihood: f64,
    iterations: usize,
    converged: bool,
    tsne_final_kl: f64,
}

pub fn write_cluster_output(out_dir: &Path, out: &ClusterOutput) -> Result<()> {
    create_dir(out_dir)?;
    write_embedding(&out_dir.join(EMBEDDING_FILE), &out.event_ids, &out.embedding.coords)?;
    write_clusters(&out_dir.join(CLUSTERS_FILE), &out.assignments())?;
    let m = &out.fit.model;
    let dump = ModelDump {
        means: m.components.iter().map(|c| c.mean.as_slice()).collect(),
        covariances: m.components.iter().map(|c| &c.covariance).collect(),
        weights: m.components.iter().map(|c| c.weight).collect(),
        log_likelihood: m.log_likelihood,
        iterations: out.fit.log_likelihood_trace.len(),
        converged: out.fit.converged,
        tsne_final_kl: out.embedding.final_kl,
    };
    artifacts::write_json(&out_dir.join(MODEL_FILE), &dump)
}

/// Join cluster labels to ground truth through each event's case. Ids must
/// match one to one; nothing is silently dropped.
pub fn truth_labels(clusters: &[ClusterAssignment], events: &[FaultEvent], manifest: &Manifest) -> Result<Vec<String>> {
    let by_id: HashMap<usize, &FaultEvent> = events.iter().map(|e| (e.event_id, e)).collect();
    let labels = clusters
        .iter()
        .map(|row| {
            let event = by_id
                .get(&row.event_id)
                .ok_or_else(|| Error::Pipeline(format!("event {} is not in the events file", row.event_id)))?;
            let case_id = event
                .case_id
                .as_deref()
                .ok_or_else(|| Error::Pipeline(format!("event {} carries no case id", row.event_id)))?;
            let case = manifest.case(case_id).ok_or_else(|| {
                Error::Pipeline(format!(
                    "case `{case_id}` of event {} is not in the manifest",
                    row.event_id
                ))
            })?;
            Ok(case.fault_type.to_string())
        })
        .collect::<Result<Vec<_>>>()?;
    let seen: HashSet<usize> = clusters.iter().map(|r| r.event_id).collect();
    if seen.len() != clusters.len() {
        return Err(Error::Pipeline("clusters file lists an event id twice".into()));
    }
    let mut missing: Vec<usize> = by_id.keys().filter(|id| !seen.contains(id)).copied().collect();
    if !missing.is_empty() {
        missing.sort_unstable();
        return Err(Error::Pipeline(format!(
            "{} events have no cluster label (ids {:?}{})",
            missing.len(),
            &missing[..missing.len().min(10)],
            if missing.len() > 10 { ", ..." } else { "" }
        )));
    }
    Ok(labels)
}

pub fn evaluate(clusters: &[ClusterAssignment], events: &[FaultEvent], manifest: &Manifest) -> Result<ClusterScores> {
    let truth = truth_labels(clusters, events, manifest)?;
    let pred: Vec<usize> = clusters.iter().map(|r| r.cluster_label).collect();
    score_all(&truth, &pred)
}

pub fn write_metrics(path: &Path, scores: &ClusterScores) -> Result<()> {
    artifacts::write_json(path, scores)
}

/// Plot data: the p-value series over the running segment count and the
/// labelled embedding scatter, with optional SVG renderings.
pub fn write_plots(
    out_dir: &Path,
    detect: &DetectOutput,
    alpha: f64,
    cluster: Option<(&ClusterOutput, &[String])>,
    svg: bool,
) -> Result<()> {
    let dir = out_dir.join(PLOTS_DIR);
    create_dir(&dir)?;
    let offset: HashMap<&str, usize> = detect.case_offsets.iter().map(|(c, o)| (c.as_str(), *o)).collect();
    let mut rows = Vec::new();
    for s in &detect.streams {
        for (seg, p) in s.series.iter() {
            let (case_id, global, local) = match &s.case_id {
                Some(c) => (c.as_str(), offset[c.as_str()] + seg, seg),
                None => {
                    let owner = detect.case_offsets.partition_point(|(_, o)| *o <= seg) - 1;
                    let (c, o) = &detect.case_offsets[owner];
                    (c.as_str(), seg, seg - o)
                }
            };
            rows.push((global, case_id, local, p));
        }
    }
    artifacts::write_with(&dir.join("pvalues.csv"), |out| {
        writeln!(out, "segment,case_id,segment_index,p_value")?;
        for (g, c, l, p) in &rows {
            writeln!(out, "{g},{c},{l},{p}")?;
        }
        Ok(())
    })?;
    if svg {
        let pts: Vec<(usize, f64)> = rows.iter().map(|r| (r.0, r.3)).collect();
        let path = dir.join("pvalues.svg");
        std::fs::write(&path, plot::pvalue_svg(&pts, alpha)).map_err(|e| Error::io(&path, e))?;
    }
    if let Some((c, truth)) = cluster {
        let case_of: HashMap<usize, &str> = detect
            .events
            .iter()
            .map(|e| (e.event_id, e.case_id.as_deref().unwrap_or("")))
            .collect();
        artifacts::write_with(&dir.join("embedding.csv"), |out| {
            writeln!(out, "event_id,case_id,y1,y2,true_label,cluster_label")?;
            for (k, id) in c.event_ids.iter().enumerate() {
                let y = &c.embedding.coords[k];
                writeln!(
                    out,
                    "{id},{},{},{},{},{}",
                    case_of.get(id).copied().unwrap_or(""),
                    y[0],
                    y.get(1).copied().unwrap_or(0.0),
                    truth.get(k).map(String::as_str).unwrap_or(""),
                    c.fit.labels[k]
                )?;
            }
            Ok(())
        })?;
        if svg {
            let path = dir.join("embedding.svg");
            std::fs::write(&path, plot::scatter_svg(&c.embedding.coords, &c.fit.labels, truth))
                .map_err(|e| Error::io(&path, e))?;
        }
    }
    Ok(())
}

/// What a full run produced.
#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub cases: usize,
    pub events: usize,
    /// `None` when no events were detected and clustering was skipped.
    pub scores: Option<ClusterScores>,
    pub notices: Vec<String>,
}

impl PipelineReport {
    pub fn summary(&self) -> String {
        let mut s = format!("{} cases, {} events", self.cases, self.events);
        if let Some(m) = &self.scores {
            let _ = write!(
                s,
                "; ARI {:.4}, AMI {:.4}, homogeneity {:.4}, completeness {:.4}, MI {:.4}",
                m.adjusted_rand, m.adjusted_mutual_info, m.homogeneity, m.completeness, m.mutual_info
            );
        }
        s
    }
}

fn stage<T>(name: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Pipeline(format!("{name} stage failed: {e}")))
}

/// Run every stage under `cfg.out_dir`. A run with no events stops after
/// detection and says so in the report.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    let cfg = cfg.resolved();
    stage("config", cfg.validate())?;
    let out = &cfg.out_dir;
    stage("generate", generate(&cfg.dataset, &cfg.dataset_dir()))?;
    let (manifest, cases) = stage("detect", load_manifest_cases(&cfg.manifest_path()))?;
    let det = stage("detect", detect_cases(&cases, &cfg.detector(), cfg.detection_mode))?;
    stage("detect", write_detect_output(out, &det))?;
    let mut report = PipelineReport {
        cases: cases.len(),
        events: det.events.len(),
        scores: None,
        notices: Vec::new(),
    };
    if det.events.is_empty() {
        report.notices.push(format!(
            "no events detected at alpha = {}; cluster and evaluate stages skipped",
            cfg.alpha
        ));
        stage("plot", write_plots(out, &det, cfg.alpha, None, cfg.svg))?;
        return Ok(report);
    }
    let clus = stage("cluster", cluster_events(&det.events, &cfg.tsne, &cfg.gmm))?;
    stage("cluster", write_cluster_output(out, &clus))?;
    let assignments = clus.assignments();
    let truth = stage("evaluate", truth_labels(&assignments, &det.events, &manifest))?;
    let scores = stage("evaluate", evaluate(&assignments, &det.events, &manifest))?;
    stage("evaluate", write_metrics(&out.join(METRICS_FILE), &scores))?;
    stage(
        "plot",
        write_plots(out, &det, cfg.alpha, Some((&clus, &truth)), cfg.svg),
    )?;
    report.scores = Some(scores);
    Ok(report)
}
