use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thoughtlens::contentfulness::MetaPatternSet;
use thoughtlens::entities::GenericLexicon;
use thoughtlens::judge::{JudgeSettings, PromptTemplate};
use thoughtlens::CascadeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    Deterministic,
    Judge,
}

/// Everything a run depends on. Loaded from one JSON file; command-line
/// flags override individual fields. Secrets never appear here.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Scene-record (or metric) JSONL files.
    pub inputs: Vec<PathBuf>,
    /// Restricts a run to one variant.
    pub variant: Option<String>,
    pub cascade: CascadeConfig,
    /// Meta-commentary pattern file; the shipped `v1` set when absent.
    pub meta_patterns: Option<PathBuf>,
    /// Generic-subject lexicon file; the shipped `v1` lexicon when absent.
    pub generic_lexicon: Option<PathBuf>,
    /// Backend for item extraction and trace similarity.
    pub backend: Backend,
    /// Fall back to deterministic extraction when the judge stays down.
    pub judge_fallback: bool,
    pub judge: JudgeSettings,
    /// Model used by `collect`.
    pub collect_model: String,
    /// Prompt sent with every collection request.
    pub collect_prompt: String,
    pub cache_dir: Option<PathBuf>,
    pub max_in_flight: usize,
    pub max_attempts: u32,
    /// Similarity below this marks a scene as unstable across reruns.
    pub stability_threshold: f64,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Answer every upstream call from the built-in offline provider.
    pub mock: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: Vec::new(),
            variant: None,
            cascade: CascadeConfig::default(),
            meta_patterns: None,
            generic_lexicon: None,
            backend: Backend::Deterministic,
            judge_fallback: true,
            judge: JudgeSettings::default(),
            collect_model: "scene-model".into(),
            collect_prompt: DEFAULT_COLLECT_PROMPT.into(),
            cache_dir: None,
            max_in_flight: 8,
            max_attempts: 5,
            stability_threshold: 0.8,
            workers: 1,
            out_dir: PathBuf::from("out"),
            mock: false,
        }
    }
}

pub const DEFAULT_COLLECT_PROMPT: &str = "Describe this video scene. Reply with a JSON object with the \
keys subjects, actions, settings and emotions (lists of short labels) and shot_type (a string).";

impl RunConfig {
    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let raw = fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig = serde_json::from_str(&raw)
            .with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.inputs.iter_mut().for_each(fix);
        cfg.meta_patterns.iter_mut().for_each(fix);
        cfg.generic_lexicon.iter_mut().for_each(fix);
        cfg.cache_dir.iter_mut().for_each(fix);
        fix(&mut cfg.out_dir);
        Ok(cfg)
    }

    /// Checks invariants that must hold before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            bail!("workers must be at least 1");
        }
        if self.max_in_flight == 0 {
            bail!("max_in_flight must be at least 1");
        }
        if self.max_attempts == 0 {
            bail!("max_attempts must be at least 1");
        }
        self.cascade.validate()?;
        if !(0.0..=1.0).contains(&self.stability_threshold) {
            bail!("stability_threshold must be in [0, 1]");
        }
        if self.inputs.is_empty() {
            bail!("no input files given");
        }
        let referenced = self
            .inputs
            .iter()
            .chain(&self.meta_patterns)
            .chain(&self.generic_lexicon);
        for p in referenced {
            if !p.is_file() {
                bail!("input file not found: {}", p.display());
            }
        }
        Ok(())
    }

    pub fn patterns(&self) -> Result<MetaPatternSet> {
        match &self.meta_patterns {
            Some(p) => MetaPatternSet::load(p)
                .with_context(|| format!("invalid meta-pattern file {}", p.display())),
            None => Ok(MetaPatternSet::default_v1()),
        }
    }

    pub fn lexicon(&self) -> Result<GenericLexicon> {
        match &self.generic_lexicon {
            Some(p) => GenericLexicon::load(p)
                .with_context(|| format!("invalid lexicon file {}", p.display())),
            None => Ok(GenericLexicon::default_v1()),
        }
    }
}

/// Identifies the configuration that produced an artifact.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool_version: &'static str,
    pub config_digest: String,
    pub meta_patterns_version: String,
    pub generic_lexicon_version: String,
    pub backend: Backend,
    pub templates: Vec<String>,
}

impl Provenance {
    /// The digest covers every setting that can change results, plus the
    /// full pattern and lexicon contents. Input paths, output directory,
    /// worker count and cache location are excluded so the same data and
    /// settings give the same digest wherever they run.
    pub fn new(cfg: &RunConfig, patterns: &MetaPatternSet, lexicon: &GenericLexicon) -> Self {
        let mut settings = serde_json::to_value(cfg).expect("config encodes as JSON");
        if let Some(map) = settings.as_object_mut() {
            for volatile in ["inputs", "out_dir", "workers", "cache_dir", "meta_patterns", "generic_lexicon"] {
                map.remove(volatile);
            }
        }
        let material = serde_json::json!({
            "settings": settings,
            "meta_patterns": serde_json::from_str::<serde_json::Value>(&patterns.to_json())
                .expect("pattern JSON parses"),
            "generic_lexicon": lexicon,
            "tool_version": env!("CARGO_PKG_VERSION"),
        });
        let digest = Sha256::digest(material.to_string().as_bytes());
        Provenance {
            tool_version: env!("CARGO_PKG_VERSION"),
            config_digest: hex::encode(digest),
            meta_patterns_version: patterns.version().to_string(),
            generic_lexicon_version: lexicon.version.clone(),
            backend: cfg.backend,
            templates: [PromptTemplate::extract_items(), PromptTemplate::similarity()]
                .iter()
                .map(|t| t.reference.to_string())
                .collect(),
        }
    }
}
