use std::io::Write;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::{Pipeline, PipelineConfig, PipelineError, RunManifest};
use crate::datasets::StylePairRecord;
use crate::prompt::{builtin_delimiters, direction_label, DelimiterPair, StyleLabel, Template, TemplateKind};

/// Axes of a prompt-design sweep. Every combination is one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub templates: Vec<Template>,
    pub delimiters: Vec<DelimiterPair>,
    pub directions: Vec<(StyleLabel, StyleLabel)>,
    pub shots: Vec<usize>,
}

impl SweepGrid {
    /// All four templates and ten delimiters, zero-shot, over `directions`.
    pub fn full(directions: Vec<(StyleLabel, StyleLabel)>) -> Self {
        Self {
            templates: TemplateKind::ALL.iter().map(|k| k.template()).collect(),
            delimiters: builtin_delimiters(),
            directions,
            shots: vec![0],
        }
    }

    /// Directions in order of first appearance in `records`.
    pub fn directions_of(records: &[StylePairRecord]) -> Vec<(StyleLabel, StyleLabel)> {
        let mut out: Vec<(StyleLabel, StyleLabel)> = Vec::new();
        for r in records {
            let d = (r.source_style.clone(), r.target_style.clone());
            if !out.contains(&d) {
                out.push(d);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let empty = [
            ("templates", self.templates.is_empty()),
            ("delimiters", self.delimiters.is_empty()),
            ("directions", self.directions.is_empty()),
            ("shots", self.shots.is_empty()),
        ];
        match empty.iter().find(|(_, e)| *e) {
            Some((axis, _)) => Err(PipelineError::Config(format!("sweep grid has no {axis}"))),
            None => Ok(()),
        }
    }

    pub fn cell_count(&self) -> usize {
        self.templates.len() * self.delimiters.len() * self.directions.len() * self.shots.len()
    }
}

/// One sweep cell's headline numbers. BLEU is on the 0-100 scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub template: String,
    pub delimiter: String,
    pub direction: String,
    pub shots: usize,
    pub accuracy: Option<f64>,
    pub r_sbleu: Option<f64>,
    pub s_sbleu: Option<f64>,
    pub ppl: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Manifests of the cells that ran, parallel to the successful rows.
    pub manifests: Vec<RunManifest>,
}

pub const SWEEP_CSV_HEADER: [&str; 9] = [
    "template",
    "delimiter",
    "direction",
    "shots",
    "accuracy",
    "r_sbleu",
    "s_sbleu",
    "ppl",
    "error",
];

/// Runs every grid cell over the records of its direction. A failing cell
/// is recorded in its row and the sweep moves on.
pub fn run_sweep(
    pipeline: &Pipeline,
    records: &[StylePairRecord],
    grid: &SweepGrid,
) -> Result<SweepTable, PipelineError> {
    grid.validate()?;
    let mut rows = Vec::with_capacity(grid.cell_count());
    let mut manifests = Vec::new();
    for template in &grid.templates {
        for delimiter in &grid.delimiters {
            for (s1, s2) in &grid.directions {
                let subset: Vec<StylePairRecord> = records
                    .iter()
                    .filter(|r| &r.source_style == s1 && &r.target_style == s2)
                    .cloned()
                    .collect();
                for &shots in &grid.shots {
                    let mut row = SweepRow {
                        template: template.name().to_string(),
                        delimiter: delimiter.name().to_string(),
                        direction: direction_label(s1, s2),
                        shots,
                        accuracy: None,
                        r_sbleu: None,
                        s_sbleu: None,
                        ppl: None,
                        error: None,
                    };
                    let cfg = PipelineConfig {
                        template: template.clone(),
                        delimiter: delimiter.clone(),
                        shots,
                        ..pipeline.config().clone()
                    };
                    let result = if subset.is_empty() {
                        Err(PipelineError::Config(format!("no records for {}", row.direction)))
                    } else {
                        pipeline.reconfigured(cfg).and_then(|p| p.transfer_corpus(&subset))
                    };
                    match result {
                        Ok(m) => {
                            let s = &m.header.summary;
                            row.accuracy = s.accuracy;
                            row.r_sbleu = s.r_sbleu;
                            row.s_sbleu = s.s_sbleu;
                            row.ppl = s.ppl;
                            manifests.push(m);
                        }
                        Err(e) => {
                            warn!(
                                "cell {}/{}/{}/{shots}-shot failed: {e}",
                                row.template, row.delimiter, row.direction
                            );
                            row.error = Some(e.to_string());
                        }
                    }
                    rows.push(row);
                }
            }
        }
    }
    info!("sweep finished: {} cells", rows.len());
    Ok(SweepTable { rows, manifests })
}

fn fixed(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Writes the header row then one row per cell. Numbers use four decimals;
/// missing values are empty fields.
pub fn write_sweep_csv(rows: &[SweepRow], out: impl Write) -> Result<(), PipelineError> {
    let csv_err = |e: csv::Error| PipelineError::Io {
        context: "writing sweep CSV".into(),
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.template.clone(),
            r.delimiter.clone(),
            r.direction.clone(),
            r.shots.to_string(),
            fixed(r.accuracy),
            fixed(r.r_sbleu),
            fixed(r.s_sbleu),
            fixed(r.ppl),
            r.error.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| PipelineError::Io {
        context: "writing sweep CSV".into(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::BackendEndpoints;
    use crate::rerank::RerankConfig;

    fn toy() -> Vec<StylePairRecord> {
        let mk = |id: &str, src: &str, s1: &str, s2: &str| StylePairRecord {
            id: id.into(),
            source: src.into(),
            reference: None,
            source_style: s1.parse().unwrap(),
            target_style: s2.parse().unwrap(),
        };
        vec![
            mk("p1", "the food was good", "positive", "negative"),
            mk("n1", "the staff was rude", "negative", "positive"),
        ]
    }

    fn pipeline() -> Pipeline {
        Pipeline::connect(PipelineConfig {
            rerank: RerankConfig {
                endpoints: BackendEndpoints::mocks(),
                ..RerankConfig::default()
            },
            ..PipelineConfig::default()
        })
        .unwrap()
    }

    #[test]
    fn restricted_grid_rows() {
        let records = toy();
        let grid = SweepGrid {
            templates: vec![TemplateKind::Vanilla.template(), TemplateKind::Contrastive.template()],
            delimiters: vec![crate::prompt::delimiter_by_name("curly").unwrap()],
            directions: SweepGrid::directions_of(&records),
            shots: vec![0],
        };
        let t = run_sweep(&pipeline(), &records, &grid).unwrap();
        assert_eq!(t.rows.len(), 4);
        assert!(t.rows.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn missing_direction_isolated() {
        let records = toy();
        let mut grid = SweepGrid::full(vec![(
            "formal".parse().unwrap(),
            "informal".parse().unwrap(),
        )]);
        grid.templates.truncate(1);
        grid.delimiters.truncate(1);
        let t = run_sweep(&pipeline(), &records, &grid).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].error.is_some());
    }

    #[test]
    fn empty_axis_rejected() {
        let mut grid = SweepGrid::full(vec![]);
        assert!(grid.validate().is_err());
        grid.directions.push(("a".parse().unwrap(), "b".parse().unwrap()));
        assert!(grid.validate().is_ok());
        assert_eq!(grid.cell_count(), 40);
    }

    #[test]
    fn csv_layout() {
        let rows = vec![SweepRow {
            template: "contrastive".into(),
            delimiter: "curly".into(),
            direction: "positive->negative".into(),
            shots: 0,
            accuracy: Some(1.0),
            r_sbleu: None,
            s_sbleu: Some(42.123456),
            ppl: Some(200.0),
            error: Some("x, y".into()),
        }];
        let mut buf = Vec::new();
        write_sweep_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], SWEEP_CSV_HEADER.join(","));
        assert_eq!(lines[1], "contrastive,curly,positive->negative,0,1.0000,,42.1235,200.0000,\"x, y\"");
    }
}
