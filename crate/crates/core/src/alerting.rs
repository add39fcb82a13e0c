//! Traffic-light alert over all the comments of a content source.
//!
//! A source is green when its share of sexist comments is at most
//! `yellow_min`, yellow up to and including `red_min`, and red above it.
//! Sources with fewer than `min_comments` classified comments get no color.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifier::Prediction;
use crate::Label;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AlertError {
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("proportion {0} outside [0, 1]")]
    InvalidProportion(f64),
    #[error("source sets differ: only manual {only_manual:?}, only predicted {only_predicted:?}")]
    KeyMismatch { only_manual: Vec<String>, only_predicted: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Color {
    Green,
    Yellow,
    Red,
}

impl Color {
    pub fn as_str(self) -> &'static str {
        match self {
            Color::Green => "green",
            Color::Yellow => "yellow",
            Color::Red => "red",
        }
    }
}

impl fmt::Display for Color {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Color {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "green" => Ok(Color::Green),
            "yellow" => Ok(Color::Yellow),
            "red" => Ok(Color::Red),
            other => Err(format!("unknown color `{other}`")),
        }
    }
}

/// Color of a source, or the absence of one when too few comments exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertStatus {
    Green,
    Yellow,
    Red,
    InsufficientData,
}

impl AlertStatus {
    pub fn color(self) -> Option<Color> {
        match self {
            AlertStatus::Green => Some(Color::Green),
            AlertStatus::Yellow => Some(Color::Yellow),
            AlertStatus::Red => Some(Color::Red),
            AlertStatus::InsufficientData => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            AlertStatus::InsufficientData => "insufficient_data",
            other => other.color().expect("colored status").as_str(),
        }
    }
}

impl From<Color> for AlertStatus {
    fn from(c: Color) -> Self {
        match c {
            Color::Green => AlertStatus::Green,
            Color::Yellow => AlertStatus::Yellow,
            Color::Red => AlertStatus::Red,
        }
    }
}

impl fmt::Display for AlertStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlertThresholds {
    pub red_min: f64,
    pub yellow_min: f64,
    pub min_comments: usize,
}

impl Default for AlertThresholds {
    fn default() -> Self {
        AlertThresholds { red_min: 0.05, yellow_min: 0.025, min_comments: 100 }
    }
}

impl AlertThresholds {
    pub fn validate(&self) -> Result<(), AlertError> {
        let ordered = 0.0 < self.yellow_min && self.yellow_min < self.red_min && self.red_min < 1.0;
        if !ordered {
            return Err(AlertError::InvalidThresholds(format!(
                "need 0 < yellow ({}) < red ({}) < 1",
                self.yellow_min, self.red_min
            )));
        }
        if self.min_comments == 0 {
            return Err(AlertError::InvalidThresholds("min_comments must be at least 1".into()));
        }
        Ok(())
    }

    /// True when `p` sits exactly on one of the two breakpoints.
    pub fn is_boundary(&self, p: f64) -> bool {
        p == self.red_min || p == self.yellow_min
    }
}

/// Parses `red=0.05,yellow=0.025,min=100`. Omitted keys keep their default.
impl FromStr for AlertThresholds {
    type Err = AlertError;

    fn from_str(s: &str) -> Result<Self, AlertError> {
        let mut t = AlertThresholds::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| AlertError::InvalidThresholds(format!("expected key=value, got `{part}`")))?;
            let bad = |e: &dyn fmt::Display| AlertError::InvalidThresholds(format!("{key}: {e}"));
            match key.trim() {
                "red" => t.red_min = value.trim().parse().map_err(|e| bad(&e))?,
                "yellow" => t.yellow_min = value.trim().parse().map_err(|e| bad(&e))?,
                "min" => t.min_comments = value.trim().parse().map_err(|e| bad(&e))?,
                other => return Err(AlertError::InvalidThresholds(format!("unknown key `{other}`"))),
            }
        }
        t.validate()?;
        Ok(t)
    }
}

pub fn colorize(proportion: f64, thresholds: &AlertThresholds) -> Result<Color, AlertError> {
    thresholds.validate()?;
    if !(0.0..=1.0).contains(&proportion) {
        return Err(AlertError::InvalidProportion(proportion));
    }
    Ok(if proportion > thresholds.red_min {
        Color::Red
    } else if proportion > thresholds.yellow_min {
        Color::Yellow
    } else {
        Color::Green
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceAlert {
    pub source_id: String,
    pub n_comments: usize,
    pub sexist_count: usize,
    /// `sexist_count / n_comments`, 0 when there are no comments.
    pub sexist_proportion: f64,
    pub color: AlertStatus,
    /// The proportion equals one of the thresholds exactly.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub at_threshold: bool,
}

impl SourceAlert {
    pub fn percent(&self) -> f64 {
        self.sexist_proportion * 100.0
    }
}

/// Alert for one source from the predicted labels of all its comments.
pub fn aggregate_labels(
    source_id: &str,
    labels: impl IntoIterator<Item = Label>,
    thresholds: &AlertThresholds,
) -> Result<SourceAlert, AlertError> {
    thresholds.validate()?;
    let (mut n, mut sexist) = (0usize, 0usize);
    for label in labels {
        n += 1;
        if label.is_sexist() {
            sexist += 1;
        }
    }
    let proportion = if n == 0 { 0.0 } else { sexist as f64 / n as f64 };
    let color = if n < thresholds.min_comments {
        AlertStatus::InsufficientData
    } else {
        colorize(proportion, thresholds)?.into()
    };
    Ok(SourceAlert {
        source_id: source_id.to_string(),
        n_comments: n,
        sexist_count: sexist,
        sexist_proportion: proportion,
        color,
        at_threshold: color != AlertStatus::InsufficientData && thresholds.is_boundary(proportion),
    })
}

pub fn aggregate_source(
    source_id: &str,
    predictions: &[Prediction],
    thresholds: &AlertThresholds,
) -> Result<SourceAlert, AlertError> {
    aggregate_labels(source_id, predictions.iter().map(|p| p.label), thresholds)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColorMismatch {
    pub source_id: String,
    pub manual: Color,
    pub predicted: Color,
}

impl ColorMismatch {
    /// Green confused with red, in either direction.
    pub fn is_severe(&self) -> bool {
        matches!((self.manual, self.predicted), (Color::Green, Color::Red) | (Color::Red, Color::Green))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColorAgreement {
    pub total: usize,
    pub matches: usize,
    /// `matches / total`, 0 when there are no sources.
    pub fraction: f64,
    pub mismatches: Vec<ColorMismatch>,
    pub severe_mismatches: Vec<ColorMismatch>,
}

pub fn color_agreement(
    manual: &BTreeMap<String, Color>,
    predicted: &BTreeMap<String, Color>,
) -> Result<ColorAgreement, AlertError> {
    let only_manual: Vec<String> = manual.keys().filter(|k| !predicted.contains_key(*k)).cloned().collect();
    let only_predicted: Vec<String> = predicted.keys().filter(|k| !manual.contains_key(*k)).cloned().collect();
    if !only_manual.is_empty() || !only_predicted.is_empty() {
        return Err(AlertError::KeyMismatch { only_manual, only_predicted });
    }
    let mismatches: Vec<ColorMismatch> = manual
        .iter()
        .filter(|(k, m)| predicted[*k] != **m)
        .map(|(k, &m)| ColorMismatch { source_id: k.clone(), manual: m, predicted: predicted[k] })
        .collect();
    let severe_mismatches = mismatches.iter().filter(|m| m.is_severe()).cloned().collect();
    let total = manual.len();
    let matches = total - mismatches.len();
    let fraction = if total == 0 { 0.0 } else { matches as f64 / total as f64 };
    Ok(ColorAgreement { total, matches, fraction, mismatches, severe_mismatches })
}

/// One row of the manual-vs-predicted alert table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlertRow {
    pub source_id: String,
    pub manual: Option<SourceAlert>,
    pub predicted: SourceAlert,
}

fn paint(status: AlertStatus, ansi: bool) -> String {
    let text = match status {
        AlertStatus::InsufficientData => "n/a".to_string(),
        other => {
            let s = other.as_str();
            let mut c = s.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        }
    };
    if !ansi {
        return text;
    }
    let code = match status {
        AlertStatus::Green => "32",
        AlertStatus::Yellow => "33",
        AlertStatus::Red => "31",
        AlertStatus::InsufficientData => "90",
    };
    format!("\x1b[{code}m{text:<7}\x1b[0m")
}

/// Renders the per-source alert table. Percentages are shown with two
/// decimals; the manual columns appear only when some row has them.
pub fn render_alert_table(rows: &[AlertRow], ansi: bool) -> String {
    let with_manual = rows.iter().any(|r| r.manual.is_some());
    let mut out = String::new();
    if with_manual {
        let _ = writeln!(out, "{:<10}{:>10}  {:<8}{:>10}  {:<8}{:>8}", "ID", "Manual %", "Color", "Pred. %", "Color", "n");
    } else {
        let _ = writeln!(out, "{:<10}{:>10}  {:<8}{:>8}", "ID", "Pred. %", "Color", "n");
    }
    for r in rows {
        let pred = format!("{:>10.2}  {:<8}", r.predicted.percent(), paint(r.predicted.color, ansi));
        let flag = if r.predicted.at_threshold { " *" } else { "" };
        if with_manual {
            let manual = match &r.manual {
                Some(m) => format!("{:>10.2}  {:<8}", m.percent(), paint(m.color, ansi)),
                None => format!("{:>10}  {:<8}", "-", "-"),
            };
            let _ = writeln!(out, "{:<10}{manual}{pred}{:>8}{flag}", r.source_id, r.predicted.n_comments);
        } else {
            let _ = writeln!(out, "{:<10}{pred}{:>8}{flag}", r.source_id, r.predicted.n_comments);
        }
    }
    if rows.iter().any(|r| r.predicted.at_threshold) {
        let _ = writeln!(out, "* proportion exactly on a threshold");
    }
    out
}
