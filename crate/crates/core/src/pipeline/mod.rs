//! End-to-end runs: render, generate, extract, rerank, evaluate. Also the
//! prompt-design sweep and the JSONL run manifest.

mod eval;
mod sweep;

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{copy_baseline, evaluate, style_label_set, EvalItem};
pub use sweep::{run_sweep, write_sweep_csv, SweepGrid, SweepRow, SweepTable, SWEEP_CSV_HEADER};

use crate::backend::{BackendError, Backends, CompletionRequest, DecodeParams, GeneratedText};
use crate::datasets::StylePairRecord;
use crate::metrics::{EvalSummary, MetricError};
use crate::par::par_map;
use crate::prompt::{
    extract_completion, render_prompt, DelimiterPair, Exemplar, PromptError, StyleLabel, Template,
    TemplateKind, TransferRequest,
};
use crate::rerank::{Candidate, RerankConfig, RerankError, RerankRecord, Reranker};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Rerank(#[from] RerankError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("every generation came back empty after extraction")]
    EmptyExtraction,
    #[error("example {id}: {source}")]
    Example {
        id: String,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("all {count} examples failed; first error: {first}")]
    AllFailed { count: usize, first: String },
    #[error("{context}: {message}")]
    Io { context: String, message: String },
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
}

impl PipelineError {
    /// Whether the failure came from a model service rather than from the
    /// configuration or inputs.
    pub fn is_backend(&self) -> bool {
        match self {
            PipelineError::Backend(_) | PipelineError::Metric(MetricError::Backend(_)) => true,
            PipelineError::Rerank(RerankError::Backend(_)) => true,
            PipelineError::Example { source, .. } => source.is_backend(),
            PipelineError::AllFailed { .. } => true,
            _ => false,
        }
    }
}

fn io_err(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> PipelineError {
    let context = context.into();
    move |e| PipelineError::Io {
        context,
        message: e.to_string(),
    }
}

/// Everything that determines a run, apart from the dataset and backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub template: Template,
    pub delimiter: DelimiterPair,
    /// Exemplars to draw from, matched to each example by direction.
    #[serde(default)]
    pub exemplars: Vec<Exemplar>,
    pub shots: usize,
    pub rerank: RerankConfig,
    /// `None` means beam search of width `k`.
    pub decode: Option<DecodeParams>,
    pub max_new_tokens: u32,
    /// Example `i` is generated with seed `seed + i`.
    pub seed: u64,
    /// Examples processed concurrently.
    pub jobs: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            template: TemplateKind::Contrastive.template(),
            delimiter: crate::prompt::delimiter_by_name("curly").expect("builtin"),
            exemplars: Vec::new(),
            shots: 0,
            rerank: RerankConfig::default(),
            decode: None,
            max_new_tokens: 64,
            seed: 0,
            jobs: 4,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        self.rerank.validate()?;
        if self.jobs == 0 {
            return Err(PipelineError::Config("jobs must be >= 1".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(PipelineError::Config("max_new_tokens must be >= 1".into()));
        }
        Ok(())
    }

    pub fn decode_params(&self) -> DecodeParams {
        self.decode.clone().unwrap_or_else(|| DecodeParams::beam(self.rerank.k))
    }

    /// The first `shots` exemplars whose direction matches.
    pub fn exemplars_for(
        &self,
        source: &StyleLabel,
        target: &StyleLabel,
    ) -> Result<Vec<Exemplar>, PipelineError> {
        let picked: Vec<Exemplar> = self
            .exemplars
            .iter()
            .filter(|e| &e.source_style == source && &e.target_style == target)
            .take(self.shots)
            .cloned()
            .collect();
        if picked.len() < self.shots {
            return Err(PipelineError::Config(format!(
                "{} shot(s) requested but only {} exemplar(s) for {source}->{target}",
                self.shots,
                picked.len()
            )));
        }
        Ok(picked)
    }

    pub fn request_for(
        &self,
        text: &str,
        source: &StyleLabel,
        target: &StyleLabel,
    ) -> Result<TransferRequest, PipelineError> {
        Ok(TransferRequest::new(
            text,
            source.clone(),
            target.clone(),
            self.template.clone(),
            self.delimiter.clone(),
        )
        .with_exemplars(self.exemplars_for(source, target)?))
    }
}

/// Full audit trail for one successfully transferred example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub id: String,
    pub source: String,
    pub reference: Option<String>,
    pub source_style: StyleLabel,
    pub target_style: StyleLabel,
    pub seed: u64,
    pub prompt: String,
    /// Continuations exactly as the generator returned them.
    pub raw_candidates: Vec<GeneratedText>,
    #[serde(flatten)]
    pub rerank: RerankRecord,
    pub output: String,
    pub baseline_output: String,
}

impl ExampleRecord {
    pub fn eval_item(&self) -> EvalItem {
        EvalItem {
            source: self.source.clone(),
            output: self.output.clone(),
            reference: self.reference.clone(),
            source_style: self.source_style.clone(),
            target_style: self.target_style.clone(),
        }
    }

    /// The same example evaluated with the top-beam choice instead.
    pub fn baseline_item(&self) -> EvalItem {
        EvalItem {
            output: self.baseline_output.clone(),
            ..self.eval_item()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ExampleOutcome {
    Ok(Box<ExampleRecord>),
    Error(ErrorRecord),
}

impl ExampleOutcome {
    pub fn id(&self) -> &str {
        match self {
            ExampleOutcome::Ok(r) => &r.id,
            ExampleOutcome::Error(e) => &e.id,
        }
    }

    pub fn record(&self) -> Option<&ExampleRecord> {
        match self {
            ExampleOutcome::Ok(r) => Some(r.as_ref()),
            ExampleOutcome::Error(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub run_id: String,
    pub timestamp: String,
    pub config: PipelineConfig,
    pub summary: EvalSummary,
    pub examples: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub header: ManifestHeader,
    pub examples: Vec<ExampleOutcome>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum ManifestLine {
    Header(Box<ManifestHeader>),
    Example(ExampleOutcome),
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ *b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Stable identifier derived from the configuration alone.
pub fn run_id(cfg: &PipelineConfig) -> String {
    let json = serde_json::to_string(cfg).expect("config serializes");
    format!("{:016x}", fnv1a(json.as_bytes()))
}

impl RunManifest {
    pub fn records(&self) -> impl Iterator<Item = &ExampleRecord> {
        self.examples.iter().filter_map(ExampleOutcome::record)
    }

    pub fn outputs(&self) -> Vec<&str> {
        self.records().map(|r| r.output.as_str()).collect()
    }

    pub fn write_jsonl(&self, out: impl Write) -> Result<(), PipelineError> {
        let mut out = BufWriter::new(out);
        let line = |l: &ManifestLine| serde_json::to_string(l).expect("manifest serializes");
        writeln!(out, "{}", line(&ManifestLine::Header(Box::new(self.header.clone()))))
            .map_err(io_err("writing manifest"))?;
        for e in &self.examples {
            writeln!(out, "{}", line(&ManifestLine::Example(e.clone())))
                .map_err(io_err("writing manifest"))?;
        }
        out.flush().map_err(io_err("writing manifest"))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PipelineError> {
        let path = path.as_ref();
        let f = File::create(path).map_err(io_err(format!("creating {}", path.display())))?;
        self.write_jsonl(f)
    }

    pub fn read_jsonl(input: impl Read) -> Result<Self, PipelineError> {
        let mut header = None;
        let mut examples = Vec::new();
        for (i, line) in BufReader::new(input).lines().enumerate() {
            let line = line.map_err(io_err("reading manifest"))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: ManifestLine = serde_json::from_str(&line).map_err(|e| PipelineError::Manifest {
                line: i + 1,
                message: e.to_string(),
            })?;
            match parsed {
                ManifestLine::Header(h) if header.is_none() => header = Some(*h),
                ManifestLine::Header(_) => {
                    return Err(PipelineError::Manifest {
                        line: i + 1,
                        message: "second header".into(),
                    })
                }
                ManifestLine::Example(e) => examples.push(e),
            }
        }
        let header = header.ok_or(PipelineError::Manifest {
            line: 0,
            message: "no header line".into(),
        })?;
        Ok(Self { header, examples })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(io_err(format!("opening {}", path.display())))?;
        Self::read_jsonl(f)
    }
}

/// A configured pipeline bound to connected backends.
#[derive(Debug, Clone)]
pub struct Pipeline {
    cfg: PipelineConfig,
    reranker: Reranker,
}

impl Pipeline {
    pub fn new(cfg: PipelineConfig, backends: Backends) -> Result<Self, PipelineError> {
        cfg.validate()?;
        let reranker = Reranker::with_backends(cfg.rerank.clone(), backends)?;
        Ok(Self { cfg, reranker })
    }

    pub fn connect(cfg: PipelineConfig) -> Result<Self, PipelineError> {
        let backends = Backends::connect(&cfg.rerank.endpoints)?;
        Self::new(cfg, backends)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.cfg
    }

    pub fn backends(&self) -> &Backends {
        self.reranker.backends()
    }

    /// The same backends under a different configuration.
    pub fn reconfigured(&self, cfg: PipelineConfig) -> Result<Self, PipelineError> {
        Self::new(cfg, self.backends().clone())
    }

    /// Generates `k` candidates for one request, extracts them at the closing
    /// marker and reranks the non-empty ones.
    pub fn transfer_one(
        &self,
        id: &str,
        req: &TransferRequest,
        seed: u64,
    ) -> Result<ExampleRecord, PipelineError> {
        req.validate()?;
        let prompt = render_prompt(req)?;
        let completion = CompletionRequest {
            prompt: prompt.clone(),
            max_new_tokens: self.cfg.max_new_tokens,
            num_candidates: self.cfg.rerank.k,
            stop: Some(req.delimiter.close().to_string()),
            seed: Some(seed),
            decode: self.cfg.decode_params(),
        };
        let resp = self.backends().generator()?.complete(&completion)?;

        let pool: Vec<Candidate> = resp
            .candidates
            .iter()
            .enumerate()
            .filter_map(|(index, g)| {
                let ex = extract_completion(&g.text, &req.delimiter);
                if ex.text.is_empty() {
                    warn!("{id}: candidate {index} is empty after extraction; dropped");
                    return None;
                }
                Some(Candidate {
                    index,
                    text: ex.text,
                    gen_score: g.gen_score,
                    unterminated: ex.unterminated,
                })
            })
            .collect();
        if pool.is_empty() {
            return Err(PipelineError::EmptyExtraction);
        }

        let rerank = self.reranker.rerank(req, &pool)?;
        Ok(ExampleRecord {
            id: id.to_string(),
            source: req.input_text.clone(),
            reference: None,
            source_style: req.source_style.clone(),
            target_style: req.target_style.clone(),
            seed,
            prompt,
            raw_candidates: resp.candidates,
            output: rerank.winner().text.clone(),
            baseline_output: rerank.baseline().text.clone(),
            rerank,
        })
    }

    fn transfer_record(&self, i: usize, rec: &StylePairRecord) -> Result<ExampleRecord, PipelineError> {
        let req = self
            .cfg
            .request_for(&rec.source, &rec.source_style, &rec.target_style)?;
        let mut out = self.transfer_one(&rec.id, &req, self.cfg.seed.wrapping_add(i as u64))?;
        out.reference = rec.reference.clone();
        Ok(out)
    }

    /// Transfers every record with at most `jobs` in flight. Failures are
    /// kept as error records; the run fails only if every example fails.
    pub fn transfer_corpus(&self, records: &[StylePairRecord]) -> Result<RunManifest, PipelineError> {
        if records.is_empty() {
            return Err(PipelineError::Config("no records to transfer".into()));
        }
        let outcomes = par_map(records, self.cfg.jobs, |i, rec| {
            match self.transfer_record(i, rec) {
                Ok(r) => ExampleOutcome::Ok(Box::new(r)),
                Err(e) => {
                    warn!("example {}: {e}", rec.id);
                    ExampleOutcome::Error(ErrorRecord {
                        id: rec.id.clone(),
                        error: e.to_string(),
                    })
                }
            }
        });
        let failed = outcomes.iter().filter(|o| o.record().is_none()).count();
        if failed == outcomes.len() {
            let first = match &outcomes[0] {
                ExampleOutcome::Error(e) => format!("{}: {}", e.id, e.error),
                ExampleOutcome::Ok(_) => unreachable!(),
            };
            return Err(PipelineError::AllFailed {
                count: failed,
                first,
            });
        }

        let items: Vec<EvalItem> = outcomes
            .iter()
            .filter_map(ExampleOutcome::record)
            .map(ExampleRecord::eval_item)
            .collect();
        let summary = evaluate(&items, self.backends(), self.cfg.jobs)?;
        info!(
            "{} of {} examples transferred ({} failed)",
            items.len(),
            records.len(),
            failed
        );
        Ok(RunManifest {
            header: ManifestHeader {
                run_id: run_id(&self.cfg),
                timestamp: chrono::Utc::now().to_rfc3339(),
                config: self.cfg.clone(),
                summary,
                examples: outcomes.len(),
                failed,
            },
            examples: outcomes,
        })
    }
}

/// Recomputes a manifest's summary from its stored outputs.
pub fn evaluate_manifest(manifest: &RunManifest, backends: &Backends) -> Result<EvalSummary, PipelineError> {
    let items: Vec<EvalItem> = manifest.records().map(ExampleRecord::eval_item).collect();
    Ok(evaluate(&items, backends, manifest.header.config.jobs)?)
}
