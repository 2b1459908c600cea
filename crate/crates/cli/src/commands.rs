use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{anyhow, Context};
use log::info;
use serde_json::json;

use prompt_rerank::backend::{BackendEndpoints, Backends, DecodeParams};
use prompt_rerank::datasets::{
    clean_text, generate_symb, load_dataset, write_records, DatasetFormat, LoadOptions, StylePairRecord,
    SymbSpec,
};
use prompt_rerank::metrics::{
    classifier_accuracy, corpus_perplexity, exact_match_accuracy, mean_sentence_gleu, ref_sbleu,
    self_sbleu, EvalSummary,
};
use prompt_rerank::pipeline::{
    copy_baseline, evaluate_manifest, run_sweep, write_sweep_csv, Pipeline, PipelineConfig,
    PipelineError, RunManifest, SweepGrid,
};
use prompt_rerank::prompt::{Exemplar, PromptConfig, StyleLabel};
use prompt_rerank::rerank::{RerankConfig, StrengthSource};

use crate::args::{
    BackendArgs, CleanArgs, DatasetArgs, DecodeArg, EvalArgs, FormatArg, RunArgs, StrengthArg, SweepArgs,
    SymbArgs, TransferArgs,
};

pub const EXIT_BACKEND: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

/// A failed command and the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type CmdResult = Result<(), Failure>;

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error: e.into(),
    }
}

fn backend_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: EXIT_BACKEND,
        error: e.into(),
    }
}

fn pipeline_err(e: PipelineError) -> Failure {
    if e.is_backend() {
        backend_err(e)
    } else {
        config_err(e)
    }
}

impl BackendArgs {
    fn any_given(&self) -> bool {
        self.mock
            || [
                &self.base_url,
                &self.complete_url,
                &self.score_url,
                &self.fill_mask_url,
                &self.embed_url,
                &self.classifier_url,
            ]
            .iter()
            .any(|o| o.is_some())
    }

    fn endpoints(&self) -> Result<BackendEndpoints, Failure> {
        let mut e = if self.mock {
            BackendEndpoints::mocks()
        } else {
            BackendEndpoints::default()
        };
        if let Some(base) = &self.base_url {
            let b = BackendEndpoints::with_base_url(base);
            e.complete = b.complete;
            e.score = b.score;
            e.fill_mask = b.fill_mask;
            e.embed = b.embed;
        }
        for (given, slot) in [
            (&self.complete_url, &mut e.complete),
            (&self.score_url, &mut e.score),
            (&self.fill_mask_url, &mut e.fill_mask),
            (&self.embed_url, &mut e.embed),
            (&self.classifier_url, &mut e.classifier),
        ] {
            if let Some(v) = given {
                *slot = Some(v.clone());
            }
        }
        if let Some(m) = &self.mask_token {
            e.mask_token = m.clone();
        }
        if let Some(t) = self.timeout_secs {
            if !(t.is_finite() && t > 0.0) {
                return Err(config_err(anyhow!("timeout must be a positive number of seconds")));
            }
            e.timeout_secs = t;
        }
        if let Some(n) = self.max_attempts {
            e.max_attempts = n;
        }
        Ok(e)
    }
}

fn connect(endpoints: &BackendEndpoints) -> Result<Backends, Failure> {
    Backends::connect(endpoints).map_err(config_err)
}

fn load_prompt_config(path: Option<&Path>) -> Result<PromptConfig, Failure> {
    match path {
        Some(p) => PromptConfig::load(p).map_err(config_err),
        None => Ok(PromptConfig::default()),
    }
}

fn load_exemplars(path: &Path) -> Result<Vec<Exemplar>, Failure> {
    let f = File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .map_err(config_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(config_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let e: Exemplar = serde_json::from_str(&line)
            .with_context(|| format!("{} line {}", path.display(), i + 1))
            .map_err(config_err)?;
        out.push(e);
    }
    Ok(out)
}

fn pipeline_config(
    run: &RunArgs,
    backend: &BackendArgs,
    prompts: &PromptConfig,
    template: &str,
    delimiter: &str,
    shots: usize,
) -> Result<PipelineConfig, Failure> {
    let template = prompts.template(template).cloned().ok_or_else(|| {
        let names: Vec<&str> = prompts.templates().iter().map(|t| t.name()).collect();
        config_err(anyhow!("unknown template `{template}` (known: {})", names.join(", ")))
    })?;
    let delimiter = prompts.delimiter(delimiter).cloned().ok_or_else(|| {
        let names: Vec<&str> = prompts.delimiters().iter().map(|d| d.name()).collect();
        config_err(anyhow!("unknown delimiter `{delimiter}` (known: {})", names.join(", ")))
    })?;
    let exemplars = match &run.exemplars {
        Some(p) => load_exemplars(p)?,
        None => Vec::new(),
    };
    let decode = match run.decode {
        DecodeArg::Beam => None,
        DecodeArg::Sample => {
            if !(run.temperature.is_finite() && run.temperature > 0.0) {
                return Err(config_err(anyhow!("temperature must be positive")));
            }
            Some(DecodeParams::sample(run.temperature))
        }
    };
    let cfg = PipelineConfig {
        template,
        delimiter,
        exemplars,
        shots,
        rerank: RerankConfig {
            k: run.k,
            use_fluency: !run.no_fluency,
            strength_source: match run.strength_source {
                StrengthArg::MlmCloze => StrengthSource::MlmCloze,
                StrengthArg::ExternalClassifier => StrengthSource::ExternalClassifier,
            },
            endpoints: backend.endpoints()?,
            max_in_flight: run.jobs as usize,
        },
        decode,
        max_new_tokens: run.max_new_tokens,
        seed: run.seed,
        jobs: run.jobs as usize,
    };
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn format_of(arg: Option<FormatArg>, path: &Path) -> DatasetFormat {
    match arg {
        Some(FormatArg::Jsonl) => DatasetFormat::Jsonl,
        Some(FormatArg::Tsv) => DatasetFormat::Tsv,
        None => DatasetFormat::from_path(path),
    }
}

fn load_records(d: &DatasetArgs) -> Result<Vec<StylePairRecord>, Failure> {
    let path = d
        .input
        .as_deref()
        .ok_or_else(|| config_err(anyhow!("--input is required")))?;
    let opts = LoadOptions {
        format: format_of(d.format, path),
        strict: d.strict,
        clean: d.clean,
        word_range: None,
    };
    let ds = load_dataset(path, &opts).map_err(config_err)?;
    if !ds.report.skipped.is_empty() {
        log::warn!("{} malformed row(s) skipped", ds.report.skipped.len());
    }
    if ds.records.is_empty() {
        return Err(config_err(anyhow!("{} holds no usable records", path.display())));
    }
    info!("loaded {} records from {}", ds.records.len(), path.display());
    Ok(ds.records)
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(config_err)?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn style(s: &str) -> Result<StyleLabel, Failure> {
    s.parse().map_err(config_err)
}

fn print_summary(s: &EvalSummary) {
    let rows = [
        ("accuracy", s.accuracy),
        ("r-sBLEU", s.r_sbleu),
        ("s-sBLEU", s.s_sbleu),
        ("PPL", s.ppl),
        ("GLEU", s.gleu),
        ("exact match", s.exact_match),
    ];
    for (name, v) in rows {
        if let Some(v) = v {
            println!("{name:<12} {v:.4}");
        }
    }
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("json value"));
}

pub fn cmd_transfer(a: &TransferArgs, json_out: bool) -> CmdResult {
    let prompts = load_prompt_config(a.run.prompt_config.as_deref())?;
    let cfg = pipeline_config(&a.run, &a.backend, &prompts, &a.template, &a.delimiter, a.shots)?;

    let (records, single) = match &a.text {
        Some(text) => {
            let (from, to) = (a.from.as_deref(), a.to.as_deref());
            let (from, to) = from.zip(to).ok_or_else(|| config_err(anyhow!("--text needs --from and --to")))?;
            let rec = StylePairRecord {
                id: "input".into(),
                source: text.clone(),
                reference: None,
                source_style: style(from)?,
                target_style: style(to)?,
            };
            cfg.request_for(&rec.source, &rec.source_style, &rec.target_style)
                .and_then(|r| r.validate().map_err(PipelineError::from))
                .map_err(config_err)?;
            (vec![rec], true)
        }
        None => (load_records(&a.dataset)?, false),
    };

    let pipeline = Pipeline::connect(cfg).map_err(pipeline_err)?;
    let manifest = pipeline.transfer_corpus(&records).map_err(pipeline_err)?;
    if let Some(out) = &a.out {
        manifest.save(out).map_err(config_err)?;
        info!("manifest written to {}", out.display());
    }

    match (single, json_out) {
        (true, true) => {
            let rec = manifest.records().next().expect("one record");
            print_json(&serde_json::to_value(rec).expect("record serializes"));
        }
        (true, false) => println!("{}", manifest.outputs()[0]),
        (false, true) => print_json(&json!({
            "run_id": manifest.header.run_id,
            "examples": manifest.header.examples,
            "failed": manifest.header.failed,
            "summary": manifest.header.summary,
        })),
        (false, false) => {
            for e in &manifest.examples {
                match e.record() {
                    Some(r) => println!("{}\t{}", r.id, r.output),
                    None => println!("{}\t<failed>", e.id()),
                }
            }
            println!(
                "-- {} examples, {} failed",
                manifest.header.examples, manifest.header.failed
            );
            print_summary(&manifest.header.summary);
        }
    }
    Ok(())
}

fn sanitize(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

pub fn cmd_sweep(a: &SweepArgs, json_out: bool) -> CmdResult {
    let prompts = load_prompt_config(a.run.prompt_config.as_deref())?;
    let records = load_records(&a.dataset)?;
    let base = pipeline_config(&a.run, &a.backend, &prompts, "contrastive", "curly", 0)?;

    let mut grid = SweepGrid::full(SweepGrid::directions_of(&records));
    grid.shots = a.shots.clone();
    if !a.templates.is_empty() {
        grid.templates = a
            .templates
            .iter()
            .map(|n| {
                prompts
                    .template(n)
                    .cloned()
                    .ok_or_else(|| config_err(anyhow!("unknown template `{n}`")))
            })
            .collect::<Result<_, _>>()?;
    }
    if !a.delimiters.is_empty() {
        grid.delimiters = a
            .delimiters
            .iter()
            .map(|n| {
                prompts
                    .delimiter(n)
                    .cloned()
                    .ok_or_else(|| config_err(anyhow!("unknown delimiter `{n}`")))
            })
            .collect::<Result<_, _>>()?;
    }
    grid.validate().map_err(config_err)?;

    let pipeline = Pipeline::connect(base).map_err(pipeline_err)?;
    let table = run_sweep(&pipeline, &records, &grid).map_err(pipeline_err)?;

    if let Some(dir) = &a.manifest_dir {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating {}", dir.display()))
            .map_err(config_err)?;
        for m in &table.manifests {
            let c = &m.header.config;
            let first = m.records().next().expect("successful cell has records");
            let name = format!(
                "{}_{}_{}-{}_{}shot.jsonl",
                sanitize(c.template.name()),
                sanitize(c.delimiter.name()),
                sanitize(first.source_style.name()),
                sanitize(first.target_style.name()),
                c.shots
            );
            m.save(dir.join(name)).map_err(config_err)?;
        }
    }

    let failed = table.rows.iter().filter(|r| r.error.is_some()).count();
    if json_out && a.out.is_some() {
        print_json(&json!({ "cells": table.rows.len(), "failed": failed }));
    } else if json_out {
        print_json(&serde_json::to_value(&table.rows).expect("rows serialize"));
    }
    if a.out.is_some() || !json_out {
        let out = open_out(a.out.as_deref())?;
        write_sweep_csv(&table.rows, out).map_err(config_err)?;
    }
    if failed == table.rows.len() {
        return Err(backend_err(anyhow!("all {failed} sweep cells failed")));
    }
    Ok(())
}

pub fn cmd_symb(a: &SymbArgs, json_out: bool) -> CmdResult {
    let spec = SymbSpec::new(a.n as usize, a.seed);
    let records = generate_symb(&spec).map_err(config_err)?;
    let format = match a.format {
        FormatArg::Jsonl => DatasetFormat::Jsonl,
        FormatArg::Tsv => DatasetFormat::Tsv,
    };
    let out = open_out(a.out.as_deref())?;
    write_records(out, &records, format).map_err(config_err)?;
    if let Some(p) = &a.out {
        if json_out {
            print_json(&json!({ "records": records.len(), "out": p }));
        } else {
            eprintln!("wrote {} records to {}", records.len(), p.display());
        }
    }
    Ok(())
}

fn read_lines(path: &Path) -> Result<Vec<String>, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(config_err)?;
    Ok(text.lines().map(str::to_string).collect())
}

pub fn cmd_clean(a: &CleanArgs, _json_out: bool) -> CmdResult {
    let lines = read_lines(&a.input)?;
    let mut out = open_out(a.out.as_deref())?;
    for l in &lines {
        writeln!(out, "{}", clean_text(l)).map_err(config_err)?;
    }
    out.flush().map_err(config_err)
}

fn eval_files(a: &EvalArgs, hyp_path: &Path, jobs: usize) -> Result<EvalSummary, Failure> {
    let hyps = read_lines(hyp_path)?;
    let srcs = a.src.as_deref().map(read_lines).transpose()?;
    let refs = a.reference.as_deref().map(read_lines).transpose()?;
    let mut s = EvalSummary::default();
    if let Some(refs) = &refs {
        s.r_sbleu = Some(ref_sbleu(&hyps, refs).map_err(config_err)?);
        s.exact_match = Some(exact_match_accuracy(&hyps, refs).map_err(config_err)?);
    }
    if let Some(srcs) = &srcs {
        s.s_sbleu = Some(self_sbleu(&hyps, srcs).map_err(config_err)?);
        if let Some(refs) = &refs {
            s.gleu = Some(mean_sentence_gleu(srcs, &hyps, refs).map_err(config_err)?);
        }
    }

    if a.backend.any_given() {
        let backends = connect(&a.backend.endpoints()?)?;
        if let Ok(scorer) = backends.scorer() {
            s.ppl = Some(corpus_perplexity(&hyps, scorer, jobs).map_err(backend_err)?);
        }
        if let (Ok(clf), Some(t), Some(src)) = (
            backends.classifier(),
            a.target_style.as_deref(),
            a.source_style.as_deref(),
        ) {
            let (t, src) = (style(t)?, style(src)?);
            let labels = prompt_rerank::pipeline::style_label_set([(&src, &t)]);
            if labels.len() < 2 {
                return Err(config_err(anyhow!("source and target styles must differ")));
            }
            let targets = vec![t; hyps.len()];
            s.accuracy = Some(classifier_accuracy(&hyps, &targets, &labels, clf, jobs).map_err(backend_err)?);
        }
    }
    Ok(s)
}

pub fn cmd_eval(a: &EvalArgs, json_out: bool) -> CmdResult {
    const JOBS: usize = 4;
    if let Some(path) = &a.manifest {
        let manifest = RunManifest::load(path).map_err(config_err)?;
        let endpoints = if a.backend.any_given() {
            a.backend.endpoints()?
        } else {
            manifest.header.config.rerank.endpoints.clone()
        };
        let backends = connect(&endpoints)?;
        let summary = evaluate_manifest(&manifest, &backends).map_err(pipeline_err)?;
        let reproduced = summary == manifest.header.summary;
        if json_out {
            print_json(&json!({ "summary": summary, "matches_stored": reproduced }));
        } else {
            print_summary(&summary);
            println!("stored summary {}", if reproduced { "reproduced" } else { "differs" });
        }
        return Ok(());
    }

    let summary = if a.copy_baseline {
        let records = load_records(&a.dataset)?;
        let backends = if a.backend.any_given() {
            connect(&a.backend.endpoints()?)?
        } else {
            Backends::default()
        };
        copy_baseline(&records, &backends, JOBS).map_err(backend_err)?
    } else if let Some(hyp) = &a.hyp {
        eval_files(a, hyp, JOBS)?
    } else {
        return Err(config_err(anyhow!("give --manifest, --hyp or --copy-baseline")));
    };
    if json_out {
        print_json(&serde_json::to_value(&summary).expect("summary serializes"));
    } else {
        print_summary(&summary);
    }
    Ok(())
}
