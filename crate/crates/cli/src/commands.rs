use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{anyhow, Context};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thoughtlens::entities::{dominant_entities, entity_shift, specificity_rate, EntityProfile};
use thoughtlens::ingest::{load_scene_file, IngestStats};
use thoughtlens::judge::strip_code_fence;
use thoughtlens::model::{validate_record, ErrorInfo, SceneRecord, StructuredOutput, TokenUsage, VariantConfig};
use thoughtlens::pipeline::ExtractionMode;
use thoughtlens::reporting::{scaling_table, variant_report, write_reports_csv, write_scaling_csv};
use thoughtlens::similarity::{determinism_report, variant_similarity_matrix, SimilarityMethod};
use thoughtlens::{Evaluator, SceneMetrics, VariantReport};
use thoughtlens_gateway::{CollectRequest, Gateway, Request, Service};

use crate::config::{Backend, Provenance, RunConfig};
use crate::output::{display_name, file_stem, write_json, write_jsonl, write_with};
use crate::runtime::{gateway, Runtime};

/// Why a command failed; decides the exit status.
pub enum Failure {
    /// Bad flags, config or missing files: exit 2.
    Config(anyhow::Error),
    /// Unusable data or failed upstream work: exit 1.
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Data(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(e) | Failure::Data(e) => write!(f, "{e:#}"),
        }
    }
}

fn data(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Data(e.into())
}

type Outcome = Result<(), Failure>;

#[derive(Serialize)]
struct InputSummary {
    file: String,
    #[serde(flatten)]
    stats: IngestStats,
}

/// One input file's records, sorted by scene id.
struct Run {
    file: String,
    records: Vec<SceneRecord>,
}

impl Run {
    fn variant(&self) -> Result<&str, Failure> {
        let first = self
            .records
            .first()
            .ok_or_else(|| data(anyhow!("{}: no usable records", self.file)))?;
        if let Some(other) = self.records.iter().find(|r| r.variant_id != first.variant_id) {
            return Err(data(anyhow!(
                "{}: mixes variants {} and {}",
                self.file,
                first.variant_id,
                other.variant_id
            )));
        }
        Ok(&first.variant_id)
    }
}

fn load_runs(cfg: &RunConfig) -> Result<(Vec<Run>, Vec<InputSummary>), Failure> {
    let mut runs = Vec::new();
    let mut summaries = Vec::new();
    for path in &cfg.inputs {
        let (mut records, stats) = load_scene_file(path).map_err(data)?;
        let file = display_name(path);
        if stats.rejected > 0 {
            warn!("{file}: {} of {} lines rejected", stats.rejected, stats.total_lines);
        }
        if let Some(v) = &cfg.variant {
            records.retain(|r| &r.variant_id == v);
        }
        records.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        summaries.push(InputSummary {
            file: file.clone(),
            stats,
        });
        runs.push(Run { file, records });
    }
    Ok((runs, summaries))
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    command: &'static str,
    provenance: &'a Provenance,
    inputs: &'a [InputSummary],
    #[serde(flatten)]
    details: T,
}

#[derive(Serialize)]
struct ReportsFile<'a> {
    provenance: &'a Provenance,
    reports: &'a [VariantReport],
}

fn write_reports(out: &Path, rt: &Runtime, reports: &[VariantReport]) -> Outcome {
    let digest = &rt.provenance.config_digest;
    write_json(&out.join("reports.json"), &ReportsFile {
        provenance: &rt.provenance,
        reports,
    })
    .map_err(data)?;
    write_with(&out.join("reports.csv"), |w| Ok(write_reports_csv(w, reports, digest)?)).map_err(data)?;
    if reports.len() >= 2 {
        let rows = scaling_table(reports).map_err(data)?;
        write_with(&out.join("scaling.csv"), |w| Ok(write_scaling_csv(w, &rows, digest)?))
            .map_err(data)?;
    }
    Ok(())
}

fn judge_gateway(cfg: &RunConfig) -> Result<Option<Gateway>, Failure> {
    match cfg.backend {
        Backend::Judge => gateway(cfg, Service::Judge).map(Some).map_err(Failure::Config),
        Backend::Deterministic => Ok(None),
    }
}

pub fn evaluate(cfg: &RunConfig) -> Outcome {
    let rt = Runtime::new(cfg).map_err(Failure::Config)?;
    let (runs, inputs) = load_runs(cfg)?;
    let mut by_variant: BTreeMap<String, Vec<SceneRecord>> = BTreeMap::new();
    for run in runs {
        for r in run.records {
            by_variant.entry(r.variant_id.clone()).or_default().push(r);
        }
    }
    if by_variant.is_empty() {
        return Err(data(anyhow!("no scene records to evaluate")));
    }
    for (variant, records) in &mut by_variant {
        records.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
        if let Some(w) = records.windows(2).find(|w| w[0].scene_id == w[1].scene_id) {
            return Err(data(anyhow!("variant {variant}: scene {} appears twice", w[0].scene_id)));
        }
    }

    let judge = judge_gateway(cfg)?;
    let extraction = match &judge {
        Some(g) => ExtractionMode::Judge {
            gateway: g,
            settings: &cfg.judge,
            fallback: cfg.judge_fallback,
        },
        None => ExtractionMode::Deterministic,
    };
    let evaluator = Evaluator {
        patterns: &rt.patterns,
        lexicon: &rt.lexicon,
        cascade: cfg.cascade,
        extraction,
    };

    #[derive(Serialize)]
    struct VariantSummary {
        scenes: usize,
        error_records: usize,
        metrics_file: String,
    }
    let mut reports = Vec::new();
    let mut summaries = BTreeMap::new();
    for (variant, records) in &by_variant {
        let metrics: Vec<SceneMetrics> = rt
            .pool
            .install(|| records.par_iter().map(|r| evaluator.evaluate_scene(r)).collect::<Result<_, _>>())
            .map_err(|e| data(anyhow!("variant {variant}: {e}")))?;
        let rel = Path::new("scenes").join(file_stem(variant)).with_extension("jsonl");
        write_jsonl(&cfg.out_dir.join(&rel), &metrics, &rt.provenance.config_digest).map_err(data)?;
        let report = variant_report(&metrics).map_err(data)?;
        summaries.insert(
            variant.clone(),
            VariantSummary {
                scenes: report.scene_count,
                error_records: report.scene_count - report.evaluated,
                metrics_file: rel.to_string_lossy().replace('\\', "/"),
            },
        );
        reports.push(report);
    }
    if let Some(g) = &judge {
        let s = g.stats();
        info!("judge: {} upstream calls, {} cache hits", s.upstream_calls, s.cache_hits);
    }
    write_reports(&cfg.out_dir, &rt, &reports)?;
    #[derive(Serialize)]
    struct Details {
        variants: BTreeMap<String, VariantSummary>,
    }
    write_json(&cfg.out_dir.join("evaluate-manifest.json"), &Manifest {
        command: "evaluate",
        provenance: &rt.provenance,
        inputs: &inputs,
        details: Details { variants: summaries },
    })
    .map_err(data)
}

/// A metric line as written by `evaluate`.
#[derive(Deserialize)]
struct StampedMetrics {
    config_digest: Option<String>,
    #[serde(flatten)]
    metrics: SceneMetrics,
}

fn read_metric_file(path: &Path) -> Result<Vec<StampedMetrics>, Failure> {
    let file = File::open(path)
        .with_context(|| format!("cannot open {}", path.display()))
        .map_err(data)?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(data)?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: not a metric row", path.display(), i + 1))
            .map_err(data)?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn report(cfg: &RunConfig) -> Outcome {
    let rt = Runtime::new(cfg).map_err(Failure::Config)?;
    let mut by_variant: BTreeMap<String, Vec<SceneMetrics>> = BTreeMap::new();
    let mut sources = BTreeSet::new();
    for path in &cfg.inputs {
        for row in read_metric_file(path)? {
            if cfg.variant.as_ref().is_some_and(|v| v != &row.metrics.variant_id) {
                continue;
            }
            sources.extend(row.config_digest);
            by_variant
                .entry(row.metrics.variant_id.clone())
                .or_default()
                .push(row.metrics);
        }
    }
    if by_variant.is_empty() {
        return Err(data(anyhow!("no metric rows to aggregate")));
    }
    let reports = by_variant
        .values()
        .map(|rows| variant_report(rows))
        .collect::<Result<Vec<_>, _>>()
        .map_err(data)?;
    write_reports(&cfg.out_dir, &rt, &reports)?;
    #[derive(Serialize)]
    struct Details {
        source_digests: BTreeSet<String>,
        variants: Vec<String>,
    }
    let inputs: Vec<InputSummary> = Vec::new();
    write_json(&cfg.out_dir.join("report-manifest.json"), &Manifest {
        command: "report",
        provenance: &rt.provenance,
        inputs: &inputs,
        details: Details {
            source_digests: sources,
            variants: by_variant.keys().cloned().collect(),
        },
    })
    .map_err(data)
}

#[derive(Serialize)]
struct RunProfiles {
    file: String,
    variant_id: String,
    profiled: usize,
    unprofiled: usize,
    generic_subject_pct: Option<f64>,
}

fn profiles(run: &Run, rt: &Runtime) -> Result<(Vec<EntityProfile>, RunProfiles), Failure> {
    let variant = run.variant()?.to_string();
    let mut out = Vec::new();
    let mut unprofiled = 0;
    for r in run.records.iter().filter(|r| !r.is_error()) {
        match dominant_entities(r, &rt.lexicon) {
            Ok(p) => out.push(p),
            Err(e) => {
                warn!("{}: {e}", run.file);
                unprofiled += 1;
            }
        }
    }
    let summary = RunProfiles {
        file: run.file.clone(),
        variant_id: variant,
        profiled: out.len(),
        unprofiled,
        generic_subject_pct: specificity_rate(&out).ok(),
    };
    Ok((out, summary))
}

pub fn compare(cfg: &RunConfig) -> Outcome {
    if cfg.inputs.len() != 2 {
        return Err(Failure::Config(anyhow!(
            "compare takes exactly two inputs, got {}",
            cfg.inputs.len()
        )));
    }
    let rt = Runtime::new(cfg).map_err(Failure::Config)?;
    let (runs, inputs) = load_runs(cfg)?;
    let (pa, sa) = profiles(&runs[0], &rt)?;
    let (pb, sb) = profiles(&runs[1], &rt)?;
    let shift = entity_shift::<f64>(&pa, &pb).map_err(data)?;
    write_with(&cfg.out_dir.join("entity-shift.csv"), |w| Ok(shift.write_csv(w)?)).map_err(data)?;
    #[derive(Serialize)]
    struct Details<'a> {
        run_a: RunProfiles,
        run_b: RunProfiles,
        shift: &'a thoughtlens::EntityShift,
    }
    write_json(&cfg.out_dir.join("entity-shift.json"), &Manifest {
        command: "compare",
        provenance: &rt.provenance,
        inputs: &inputs,
        details: Details {
            run_a: sa,
            run_b: sb,
            shift: &shift,
        },
    })
    .map_err(data)
}

pub fn similarity(cfg: &RunConfig) -> Outcome {
    if cfg.inputs.len() < 2 {
        return Err(Failure::Config(anyhow!(
            "similarity needs at least two inputs, got {}",
            cfg.inputs.len()
        )));
    }
    let rt = Runtime::new(cfg).map_err(Failure::Config)?;
    let (runs, inputs) = load_runs(cfg)?;
    let judge = judge_gateway(cfg)?;
    let method = match &judge {
        Some(g) => SimilarityMethod::Judge {
            gateway: g,
            settings: &cfg.judge,
        },
        None => SimilarityMethod::Lexical {
            patterns: &rt.patterns,
        },
    };

    // Repeated runs of one variant are labelled `<id>-rerun`, `<id>-rerun-2`, ...
    let mut labelled: BTreeMap<String, Vec<SceneRecord>> = BTreeMap::new();
    let mut by_variant: BTreeMap<String, Vec<&Run>> = BTreeMap::new();
    let mut labels = Vec::new();
    for run in &runs {
        let variant = run.variant()?.to_string();
        let seen = by_variant.entry(variant.clone()).or_default();
        let label = match seen.len() {
            0 => variant.clone(),
            1 => format!("{variant}-rerun"),
            n => format!("{variant}-rerun-{n}"),
        };
        seen.push(run);
        labels.push((run.file.clone(), label.clone()));
        labelled.insert(label, run.records.clone());
    }

    let matrix = rt
        .pool
        .install(|| variant_similarity_matrix::<f64>(&labelled, method))
        .map_err(data)?;
    write_with(&cfg.out_dir.join("similarity-matrix.csv"), |w| Ok(matrix.write_csv(w)?))
        .map_err(data)?;

    let mut determinism = Vec::new();
    for (variant, variant_runs) in &by_variant {
        if let [first, second, ..] = variant_runs[..] {
            let report = rt
                .pool
                .install(|| {
                    determinism_report::<f64>(&first.records, &second.records, method, cfg.stability_threshold)
                })
                .map_err(data)?;
            let rel = format!("determinism-{}.json", file_stem(variant).display());
            write_json(&cfg.out_dir.join(&rel), &Manifest {
                command: "similarity",
                provenance: &rt.provenance,
                inputs: &[],
                details: &report,
            })
            .map_err(data)?;
            determinism.push(rel);
        }
    }

    #[derive(Serialize)]
    struct Details<'a> {
        runs: Vec<(String, String)>,
        matrix: &'a thoughtlens::SimilarityMatrix,
        determinism_reports: Vec<String>,
    }
    write_json(&cfg.out_dir.join("similarity-matrix.json"), &Manifest {
        command: "similarity",
        provenance: &rt.provenance,
        inputs: &inputs,
        details: Details {
            runs: labels,
            matrix: &matrix,
            determinism_reports: determinism,
        },
    })
    .map_err(data)
}

/// One line of a collection request file.
#[derive(Debug, Deserialize)]
struct SceneRequest {
    scene_id: String,
    video_id: String,
    frames: Vec<String>,
    #[serde(default)]
    prompt: Option<String>,
}

#[derive(Deserialize)]
struct CollectReply {
    thought: String,
    output: String,
}

fn collect_one(req: &SceneRequest, variant: &VariantConfig, cfg: &RunConfig, gw: &Gateway) -> SceneRecord {
    let mut record = SceneRecord {
        scene_id: req.scene_id.clone(),
        video_id: req.video_id.clone(),
        variant_id: variant.variant_id.clone(),
        frame_count: req.frames.len() as u32,
        thought_stream: String::new(),
        final_output: StructuredOutput::default(),
        tokens: TokenUsage::default(),
        error: None,
    };
    let fail = |mut r: SceneRecord, kind: &str, message: String| {
        warn!("scene {}: {kind}: {message}", r.scene_id);
        r.thought_stream.clear();
        r.final_output = StructuredOutput::default();
        r.tokens = TokenUsage::default();
        r.error = Some(ErrorInfo {
            kind: kind.into(),
            message,
        });
        r
    };
    let call = Request::Collect(CollectRequest {
        frames: req.frames.clone(),
        prompt: req.prompt.clone().unwrap_or_else(|| cfg.collect_prompt.clone()),
        budget: variant.budget.into(),
        model_id: cfg.collect_model.clone(),
    });
    let response = match gw.complete(&call) {
        Ok(r) => r,
        Err(e) => return fail(record, "gateway", e.to_string()),
    };
    let parsed = serde_json::from_str::<CollectReply>(&response.body)
        .map_err(|e| e.to_string())
        .and_then(|reply| {
            serde_json::from_str::<StructuredOutput>(strip_code_fence(&reply.output))
                .map(|out| (reply.thought, out))
                .map_err(|e| format!("final output is not a structured object: {e}"))
        });
    let (thought, output) = match parsed {
        Ok(p) => p,
        Err(e) => return fail(record, "malformed_output", e),
    };
    record.thought_stream = thought;
    record.final_output = output;
    if let Some(u) = response.usage {
        record.tokens = TokenUsage::new(u.thought, u.input, u.output);
        if u.total != record.tokens.total {
            warn!(
                "scene {}: provider total {} differs from component sum {}",
                record.scene_id, u.total, record.tokens.total
            );
        }
    }
    match validate_record(record.clone()) {
        Ok(r) => r,
        Err(e) => fail(record, "invalid_output", e.to_string()),
    }
}

pub fn collect(cfg: &RunConfig) -> Outcome {
    let variant_id = cfg
        .variant
        .clone()
        .ok_or_else(|| Failure::Config(anyhow!("collect needs --variant")))?;
    let variant = VariantConfig::infer(&variant_id);
    let rt = Runtime::new(cfg).map_err(Failure::Config)?;
    let mut requests = Vec::new();
    for path in &cfg.inputs {
        let file = File::open(path)
            .with_context(|| format!("cannot open {}", path.display()))
            .map_err(data)?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(data)?;
            if line.trim().is_empty() {
                continue;
            }
            let req: SceneRequest = serde_json::from_str(&line)
                .with_context(|| format!("{}:{}: not a scene request", path.display(), i + 1))
                .map_err(data)?;
            requests.push(req);
        }
    }
    requests.sort_by(|a, b| a.scene_id.cmp(&b.scene_id));
    if let Some(w) = requests.windows(2).find(|w| w[0].scene_id == w[1].scene_id) {
        return Err(data(anyhow!("scene {} requested twice", w[0].scene_id)));
    }
    let gw = gateway(cfg, Service::Collect).map_err(Failure::Config)?;
    let records: Vec<SceneRecord> = rt
        .pool
        .install(|| requests.par_iter().map(|r| collect_one(r, &variant, cfg, &gw)).collect());
    let rel = Path::new("records").join(file_stem(&variant_id)).with_extension("jsonl");
    write_jsonl(&cfg.out_dir.join(&rel), &records, &rt.provenance.config_digest).map_err(data)?;

    #[derive(Serialize)]
    struct Details {
        variant: VariantConfig,
        model_id: String,
        scenes: usize,
        error_records: usize,
        records_file: String,
    }
    let errors = records.iter().filter(|r| r.is_error()).count();
    write_json(&cfg.out_dir.join("collect-manifest.json"), &Manifest {
        command: "collect",
        provenance: &rt.provenance,
        inputs: &[],
        details: Details {
            variant,
            model_id: cfg.collect_model.clone(),
            scenes: records.len(),
            error_records: errors,
            records_file: rel.to_string_lossy().replace('\\', "/"),
        },
    })
    .map_err(data)?;
    if errors == records.len() && !records.is_empty() {
        return Err(data(anyhow!("every collection request failed")));
    }
    Ok(())
}
