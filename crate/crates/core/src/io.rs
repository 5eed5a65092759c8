//! File formats: dataset CSV (`x_1,...,x_d,y`), the TOML ground-truth
//! sidecar, and JSON-lines solver traces.

use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, GroundTruth, SolverTrace};
use crate::error::{DataError, IoErrorKind};
use crate::Real;

fn csv_err(e: csv::Error) -> DataError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => DataError::Parse {
            line,
            reason: format!("{other:?}"),
        },
    }
}

pub fn write_dataset_csv<T: Real, W: Write>(data: &Dataset<T>, out: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.d()).map(|j| format!("x_{j}")).collect();
    header.push("y".into());
    w.write_record(&header).map_err(csv_err)?;
    let mut row = Vec::with_capacity(data.d() + 1);
    for (x, &y) in data.points().zip(data.responses()) {
        row.clear();
        row.extend(x.iter().map(|v| v.as_f64().to_string()));
        row.push(y.as_f64().to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset_csv<T: Real, R: Read>(input: R) -> Result<Dataset<T>, DataError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let header = r.headers().map_err(csv_err)?.clone();
    let cols = header.len();
    if cols < 2 || &header[cols - 1] != "y" {
        return Err(DataError::Parse {
            line: 1,
            reason: "header must be x_1,...,x_d,y".into(),
        });
    }
    for (j, name) in header.iter().take(cols - 1).enumerate() {
        if name != format!("x_{}", j + 1) {
            return Err(DataError::Parse {
                line: 1,
                reason: format!("column {} is `{name}`, expected `x_{}`", j + 1, j + 1),
            });
        }
    }
    let d = cols - 1;
    let mut cov = Vec::new();
    let mut resp = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = k + 2;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| DataError::Parse {
                line,
                reason: format!("`{field}` is not a number"),
            })?;
            if j < d {
                cov.push(T::lit(v));
            } else {
                resp.push(T::lit(v));
            }
        }
    }
    Dataset::new(d, cov, resp)
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    // TOML integers are signed 64-bit, so the seed travels as text
    seed: String,
    alpha: f64,
    gold_model: Vec<f64>,
    fake_model: Option<Vec<f64>>,
    corruption_support: Vec<usize>,
    corruption_values: Vec<f64>,
    dense_noise: Vec<f64>,
}

pub fn ground_truth_to_toml<T: Real>(truth: &GroundTruth<T>) -> String {
    let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
    let s = Sidecar {
        seed: truth.seed.to_string(),
        alpha: truth.alpha,
        gold_model: f(&truth.gold_model),
        fake_model: truth.fake_model.as_deref().map(f),
        corruption_support: truth.corruption_support.clone(),
        corruption_values: f(&truth.corruption_values),
        dense_noise: f(&truth.dense_noise),
    };
    toml::to_string(&s).expect("sidecar fields are TOML-representable")
}

pub fn ground_truth_from_toml<T: Real>(text: &str) -> Result<GroundTruth<T>, DataError> {
    let s: Sidecar = toml::from_str(text).map_err(|e| DataError::Parse {
        line: e
            .span()
            .map_or(0, |sp| text[..sp.start].matches('\n').count() + 1),
        reason: e.message().to_string(),
    })?;
    let seed = s
        .seed
        .parse()
        .map_err(|_| DataError::invalid("seed", format!("`{}` is not a u64", s.seed)))?;
    let f = |v: Vec<f64>| v.into_iter().map(T::lit).collect::<Vec<T>>();
    let mut support = s.corruption_support;
    support.sort_unstable();
    Ok(GroundTruth {
        gold_model: f(s.gold_model),
        corruption_support: support,
        corruption_values: f(s.corruption_values),
        dense_noise: f(s.dense_noise),
        fake_model: s.fake_model.map(f),
        alpha: s.alpha,
        seed,
    })
}

/// One line of a JSON-lines trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: usize,
    pub iter: usize,
    #[serde(rename = "M")]
    pub truncation: Option<f64>,
    pub dist_to_gold: Option<f64>,
    pub objective: f64,
    pub elapsed_ns: u64,
}

pub fn trace_rows<T: Real>(trace: &SolverTrace<T>) -> Vec<TraceRow> {
    let mut rows = Vec::new();
    for (k, stage) in trace.stages.iter().enumerate() {
        for t in 0..stage.iterates.len() {
            rows.push(TraceRow {
                stage: k + 1,
                iter: t,
                truncation: stage.truncation.map(Real::as_f64),
                dist_to_gold: stage.dist_to_gold.get(t).map(|v| v.as_f64()),
                objective: stage.objective[t].as_f64(),
                elapsed_ns: stage.elapsed_ns[t],
            });
        }
    }
    rows
}

pub fn write_trace_jsonl<T: Real, W: Write>(trace: &SolverTrace<T>, mut out: W) -> Result<(), DataError> {
    for row in trace_rows(trace) {
        let line = serde_json::to_string(&row).map_err(|e| IoErrorKind(e.to_string()))?;
        writeln!(out, "{line}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_jsonl<R: BufRead>(input: R) -> Result<Vec<TraceRow>, DataError> {
    let mut rows = Vec::new();
    for (k, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| DataError::Parse {
            line: k + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(rows)
}
