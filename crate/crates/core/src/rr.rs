//! RR-interval records: parsing, validation and artifact filtering.
//!
//! Input files are plain text with one interval per line. A line may also hold
//! two fields (cumulative time, interval), in which case the second field is the
//! interval. Fields are separated by whitespace or commas and lines starting with
//! `#` are comments. Everything is converted to milliseconds on the way in.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

/// Default lower bound of the artifact gate, in milliseconds.
pub const DEFAULT_RR_MIN_MS: f64 = 300.0;
/// Default upper bound of the artifact gate, in milliseconds.
pub const DEFAULT_RR_MAX_MS: f64 = 2000.0;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: non-numeric token {token:?}")]
    NonNumeric {
        path: PathBuf,
        line: usize,
        token: String,
    },
    #[error("{path}:{line}: expected one or two fields, found {found}")]
    FieldCount {
        path: PathBuf,
        line: usize,
        found: usize,
    },
    #[error("{path}:{line}: interval {value} is not positive")]
    NonPositive {
        path: PathBuf,
        line: usize,
        value: f64,
    },
    #[error("invalid interval {value} at index {index}")]
    InvalidInterval { index: usize, value: f64 },
    #[error("series {label:?} has {len} valid intervals, at least 2 are required")]
    TooShort { label: String, len: usize },
    #[error("artifact bounds must satisfy 0 < lo < hi, got lo={lo} hi={hi}")]
    InvalidBounds { lo: f64, hi: f64 },
    #[error("unknown unit {0:?}, expected `s` or `ms`")]
    UnknownUnit(String),
}

/// Unit of the numbers stored in an RR text file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Deserialize, serde::Serialize)]
pub enum RrUnit {
    #[serde(rename = "s", alias = "seconds")]
    Seconds,
    #[default]
    #[serde(rename = "ms", alias = "milliseconds")]
    Milliseconds,
}

impl RrUnit {
    fn to_ms(self) -> f64 {
        match self {
            RrUnit::Seconds => 1000.0,
            RrUnit::Milliseconds => 1.0,
        }
    }
}

impl FromStr for RrUnit {
    type Err = IngestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s" | "sec" | "seconds" => Ok(RrUnit::Seconds),
            "ms" | "milliseconds" => Ok(RrUnit::Milliseconds),
            other => Err(IngestError::UnknownUnit(other.to_string())),
        }
    }
}

impl std::fmt::Display for RrUnit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RrUnit::Seconds => "s",
            RrUnit::Milliseconds => "ms",
        })
    }
}

/// A validated sequence of inter-beat intervals in milliseconds.
///
/// Every interval is finite and positive and there are at least two of them.
#[derive(Debug, Clone, PartialEq)]
pub struct RrSeries {
    intervals_ms: Vec<f64>,
    label: String,
    source_path: Option<PathBuf>,
}

impl RrSeries {
    pub fn new(intervals_ms: Vec<f64>, label: impl Into<String>) -> Result<Self, IngestError> {
        let label = label.into();
        if let Some((index, &value)) = intervals_ms
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v <= 0.0)
        {
            return Err(IngestError::InvalidInterval { index, value });
        }
        if intervals_ms.len() < 2 {
            return Err(IngestError::TooShort {
                label,
                len: intervals_ms.len(),
            });
        }
        Ok(Self {
            intervals_ms,
            label,
            source_path: None,
        })
    }

    pub fn with_source(mut self, path: impl Into<PathBuf>) -> Self {
        self.source_path = Some(path.into());
        self
    }

    pub fn intervals_ms(&self) -> &[f64] {
        &self.intervals_ms
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn source_path(&self) -> Option<&Path> {
        self.source_path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.intervals_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals_ms.is_empty()
    }

    /// Total duration of the record (sum of all intervals).
    pub fn duration_ms(&self) -> f64 {
        self.intervals_ms.iter().sum()
    }
}

/// Parse RR text that has already been read into memory. `path` is only used
/// in error messages.
pub fn parse_rr_str(
    text: &str,
    unit: RrUnit,
    label: &str,
    path: &Path,
) -> Result<RrSeries, IngestError> {
    let scale = unit.to_ms();
    let mut intervals = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .collect();
        let token = match fields.as_slice() {
            [only] => *only,
            [_, second] => *second,
            _ => {
                return Err(IngestError::FieldCount {
                    path: path.to_path_buf(),
                    line: line_no,
                    found: fields.len(),
                })
            }
        };
        // Validate every field, including the ignored time column.
        for t in &fields {
            if t.parse::<f64>().map(|v| !v.is_finite()).unwrap_or(true) {
                return Err(IngestError::NonNumeric {
                    path: path.to_path_buf(),
                    line: line_no,
                    token: (*t).to_string(),
                });
            }
        }
        let value: f64 = token.parse().expect("validated above");
        if value <= 0.0 {
            return Err(IngestError::NonPositive {
                path: path.to_path_buf(),
                line: line_no,
                value,
            });
        }
        intervals.push(value * scale);
    }
    Ok(RrSeries::new(intervals, label)?.with_source(path))
}

/// Value of a `# label: ...` comment header, if the text has one.
pub fn label_header(text: &str) -> Option<&str> {
    text.lines()
        .map(str::trim)
        .take_while(|l| l.is_empty() || l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().strip_prefix("label:"))
        .map(str::trim)
        .find(|l| !l.is_empty())
}

/// Read and parse an RR-interval text file.
pub fn parse_rr_file(
    path: impl AsRef<Path>,
    unit: RrUnit,
    label: &str,
) -> Result<RrSeries, IngestError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_rr_str(&text, unit, label, path)
}

/// Canonical text form: a comment header followed by one interval (ms) per
/// line. Values are printed in shortest round-trip form so parsing the output
/// with [`RrUnit::Milliseconds`] restores the series exactly.
pub fn write_rr_string(series: &RrSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# label: {}", series.label);
    let _ = writeln!(out, "# unit: ms");
    for v in &series.intervals_ms {
        let _ = writeln!(out, "{v}");
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Filtered {
    pub series: RrSeries,
    pub removed: usize,
}

/// Drop intervals outside `[lo_ms, hi_ms]`. Order and label are preserved.
pub fn filter_artifacts(
    series: &RrSeries,
    lo_ms: f64,
    hi_ms: f64,
) -> Result<Filtered, IngestError> {
    if !(lo_ms > 0.0 && lo_ms < hi_ms) {
        return Err(IngestError::InvalidBounds {
            lo: lo_ms,
            hi: hi_ms,
        });
    }
    let kept: Vec<f64> = series
        .intervals_ms
        .iter()
        .copied()
        .filter(|v| (lo_ms..=hi_ms).contains(v))
        .collect();
    let removed = series.len() - kept.len();
    let mut out = RrSeries::new(kept, series.label.clone())?;
    out.source_path = series.source_path.clone();
    Ok(Filtered {
        series: out,
        removed,
    })
}
