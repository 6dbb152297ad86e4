//! File formats: JSON lines of [`SequenceRecord`] for event data, a single
//! JSON [`ModelRecord`] for fitted models. Event types are one-based in files.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use sdc_hawkes::{
    BasisConfig, BasisKind, Event, EventSequence, HawkesModel, InfectivityTensor,
    ObservationWindow,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowRecord {
    pub begin: f64,
    pub end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub t: f64,
    pub c: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceRecord {
    pub id: String,
    #[serde(default)]
    pub windows: Vec<WindowRecord>,
    pub events: Vec<EventRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
    /// Training weight of a stitched sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl SequenceRecord {
    pub fn from_sequence(seq: &EventSequence, weight: Option<f64>) -> Self {
        Self {
            id: seq.id.clone(),
            windows: seq
                .windows()
                .iter()
                .map(|w| WindowRecord {
                    begin: w.begin,
                    end: w.end,
                })
                .collect(),
            events: seq
                .events()
                .iter()
                .map(|e| EventRecord {
                    t: e.time,
                    c: e.kind + 1,
                })
                .collect(),
            feature: seq.feature.clone(),
            origin: seq.origin.clone(),
            weight,
        }
    }

    /// Validate and convert. Without windows, `endpoint_fallback` spans the
    /// first to the last event; otherwise a missing window is an error.
    pub fn to_sequence(&self, endpoint_fallback: bool) -> Result<EventSequence, String> {
        let mut events = Vec::with_capacity(self.events.len());
        for e in &self.events {
            if e.c == 0 {
                return Err(format!("event type must be at least 1 (sequence `{}`)", self.id));
            }
            events.push(Event::new(e.t, e.c - 1));
        }
        let seq = if self.windows.is_empty() {
            if !endpoint_fallback {
                return Err(format!("sequence `{}` has no observation window", self.id));
            }
            EventSequence::from_event_span(self.id.clone(), events)
        } else {
            let windows = self
                .windows
                .iter()
                .map(|w| ObservationWindow::new(w.begin, w.end))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| e.to_string())?;
            EventSequence::new(self.id.clone(), events, windows)
        }
        .map_err(|e| e.to_string())?;
        if let Some(w) = self.weight {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(format!("sequence `{}` has invalid weight {w}", self.id));
            }
        }
        Ok(seq
            .with_feature(self.feature.clone())
            .with_origin(self.origin.clone()))
    }
}

/// A parsed sequence file.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFile {
    pub sequences: Vec<EventSequence>,
    /// Per-record weights; `None` where the record has none.
    pub weights: Vec<Option<f64>>,
}

impl SequenceFile {
    /// Stored weights, defaulting to 1.
    pub fn weights_or_unit(&self) -> Vec<f64> {
        self.weights.iter().map(|w| w.unwrap_or(1.0)).collect()
    }
}

pub fn parse_sequences(text: &str, path: &Path, endpoint_fallback: bool) -> CliResult<SequenceFile> {
    let mut out = SequenceFile {
        sequences: Vec::new(),
        weights: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |message: String| CliError::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let record: SequenceRecord = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        out.sequences
            .push(record.to_sequence(endpoint_fallback).map_err(err)?);
        out.weights.push(record.weight);
    }
    Ok(out)
}

pub fn read_sequences(path: &Path, endpoint_fallback: bool) -> CliResult<SequenceFile> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_sequences(&text, path, endpoint_fallback)
}

pub fn render_sequences<'a>(
    records: impl IntoIterator<Item = (&'a EventSequence, Option<f64>)>,
) -> String {
    let mut out = String::new();
    for (seq, weight) in records {
        let record = SequenceRecord::from_sequence(seq, weight);
        out.push_str(&serde_json::to_string(&record).expect("records always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelRecord {
    #[serde(rename = "C")]
    pub n_types: usize,
    #[serde(rename = "M")]
    pub basis_len: usize,
    pub beta: f64,
    pub basis: BasisKind,
    pub centers: Vec<f64>,
    pub sigma_kappa: f64,
    pub mu: Vec<f64>,
    /// `A[c][c'][m]`
    #[serde(rename = "A")]
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

impl ModelRecord {
    pub fn from_model(model: &HawkesModel) -> Self {
        let c_len = model.n_types();
        let m_len = model.basis().len();
        let basis = model.basis();
        Self {
            n_types: c_len,
            basis_len: m_len,
            beta: model.beta(),
            basis: basis.kind(),
            centers: match basis.kind() {
                BasisKind::Constant => Vec::new(),
                BasisKind::Gaussian => basis.centers().to_vec(),
            },
            sigma_kappa: basis.bandwidth(),
            mu: model.mu().to_vec(),
            coeffs: (0..c_len)
                .map(|c| (0..c_len).map(|d| model.coeffs().pair(c, d).to_vec()).collect())
                .collect(),
        }
    }

    pub fn to_model(&self) -> Result<HawkesModel, String> {
        let basis = match self.basis {
            BasisKind::Constant => {
                if self.basis_len != 1 {
                    return Err(format!("constant basis requires M = 1, got {}", self.basis_len));
                }
                BasisConfig::constant()
            }
            BasisKind::Gaussian => {
                if self.centers.len() != self.basis_len {
                    return Err(format!(
                        "M = {} but {} centers given",
                        self.basis_len,
                        self.centers.len()
                    ));
                }
                BasisConfig::gaussian(self.centers.clone(), self.sigma_kappa)
                    .map_err(|e| e.to_string())?
            }
        };
        let (c_len, m_len) = (self.n_types, self.basis_len);
        if self.mu.len() != c_len {
            return Err(format!("C = {c_len} but mu has {} entries", self.mu.len()));
        }
        let shape_ok = self.coeffs.len() == c_len
            && self
                .coeffs
                .iter()
                .all(|row| row.len() == c_len && row.iter().all(|cell| cell.len() == m_len));
        if !shape_ok {
            return Err(format!("A must have shape [{c_len}][{c_len}][{m_len}]"));
        }
        let flat = self.coeffs.iter().flatten().flatten().copied().collect();
        let coeffs = InfectivityTensor::from_vec(c_len, m_len, flat).map_err(|e| e.to_string())?;
        HawkesModel::new(self.mu.clone(), coeffs, basis, self.beta).map_err(|e| e.to_string())
    }
}

pub fn read_model(path: &Path) -> CliResult<HawkesModel> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let record: ModelRecord = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    record.to_model().map_err(|message| CliError::Parse {
        path: path.to_path_buf(),
        line: 1,
        message,
    })
}

pub fn render_model(model: &HawkesModel) -> String {
    let mut s = serde_json::to_string_pretty(&ModelRecord::from_model(model))
        .expect("models always serialize");
    s.push('\n');
    s
}
