//! Time-domain HRV metrics (AVNN, SDNN, RMSSD, pNNx), computed over whole
//! records or over sliding windows of cumulative time.

use std::io::{Read, Write};

use ndarray::Array2;
use thiserror::Error;

use crate::fmt::sig;
use crate::rr::RrSeries;

/// Column names in the fixed feature order.
pub const FEATURE_NAMES: [&str; 4] = ["avnn", "sdnn", "rmssd", "pnn50"];
pub const N_FEATURES: usize = 4;

pub const DEFAULT_WINDOW_MS: f64 = 60_000.0;
pub const DEFAULT_HOP_MS: f64 = 30_000.0;
pub const MIN_WINDOW_MS: f64 = 10_000.0;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("need at least 2 intervals, got {0}")]
    TooShort(usize),
    #[error("pNNx threshold must be positive, got {0}")]
    InvalidThreshold(f64),
    #[error("window must be >= {MIN_WINDOW_MS} ms and 0 < hop <= window, got window={window_ms} hop={hop_ms}")]
    InvalidWindow { window_ms: f64, hop_ms: f64 },
    #[error("record {0:?} produced no feature window")]
    NoWindow(String),
    #[error("feature rows mix pNNx thresholds")]
    MixedThreshold,
    #[error("features csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("features csv line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// Successive-difference threshold for pNNx.
///
/// `strict == false` counts differences `>= x_ms`; `strict == true` counts
/// differences `> x_ms`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct PnnThreshold {
    pub x_ms: f64,
    #[serde(default)]
    pub strict: bool,
}

impl Default for PnnThreshold {
    fn default() -> Self {
        Self {
            x_ms: 50.0,
            strict: false,
        }
    }
}

impl PnnThreshold {
    pub fn inclusive(x_ms: f64) -> Self {
        Self {
            x_ms,
            strict: false,
        }
    }

    /// Column header for this threshold, e.g. `pnn50`.
    pub fn column_name(&self) -> String {
        format!("pnn{}", sig(self.x_ms))
    }

    fn validate(&self) -> Result<(), FeatureError> {
        if self.x_ms > 0.0 && self.x_ms.is_finite() {
            Ok(())
        } else {
            Err(FeatureError::InvalidThreshold(self.x_ms))
        }
    }
}

fn check_len(rr: &[f64]) -> Result<(), FeatureError> {
    if rr.len() < 2 {
        Err(FeatureError::TooShort(rr.len()))
    } else {
        Ok(())
    }
}

/// Mean of the intervals.
pub fn avnn(rr: &[f64]) -> Result<f64, FeatureError> {
    check_len(rr)?;
    Ok(rr.iter().sum::<f64>() / rr.len() as f64)
}

/// Sample standard deviation (N-1 divisor) of the intervals.
pub fn sdnn(rr: &[f64]) -> Result<f64, FeatureError> {
    let mean = avnn(rr)?;
    let ss: f64 = rr.iter().map(|v| (v - mean).powi(2)).sum();
    Ok((ss / (rr.len() - 1) as f64).sqrt())
}

/// Root mean square of successive differences.
pub fn rmssd(rr: &[f64]) -> Result<f64, FeatureError> {
    check_len(rr)?;
    let ss: f64 = rr.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok((ss / (rr.len() - 1) as f64).sqrt())
}

/// Percentage of successive pairs whose absolute difference reaches the threshold.
pub fn pnnx(rr: &[f64], threshold: PnnThreshold) -> Result<f64, FeatureError> {
    check_len(rr)?;
    threshold.validate()?;
    let x = threshold.x_ms;
    let hits = rr
        .windows(2)
        .filter(|w| {
            let d = (w[1] - w[0]).abs();
            if threshold.strict {
                d > x
            } else {
                d >= x
            }
        })
        .count();
    Ok(100.0 * hits as f64 / (rr.len() - 1) as f64)
}

/// One row of the feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub avnn_ms: f64,
    pub sdnn_ms: f64,
    pub rmssd_ms: f64,
    pub pnnx_pct: f64,
    pub window_start_ms: f64,
    /// Covered duration. Rows read back from CSV do not carry it.
    pub window_len_ms: Option<f64>,
    pub record_label: String,
}

impl FeatureVector {
    pub fn values(&self) -> [f64; N_FEATURES] {
        [self.avnn_ms, self.sdnn_ms, self.rmssd_ms, self.pnnx_pct]
    }

    /// Metrics over an arbitrary interval slice.
    pub fn from_intervals(
        rr: &[f64],
        threshold: PnnThreshold,
        label: &str,
        window_start_ms: f64,
    ) -> Result<Self, FeatureError> {
        Ok(Self {
            avnn_ms: avnn(rr)?,
            sdnn_ms: sdnn(rr)?,
            rmssd_ms: rmssd(rr)?,
            pnnx_pct: pnnx(rr, threshold)?,
            window_start_ms,
            window_len_ms: Some(rr.iter().sum()),
            record_label: label.to_string(),
        })
    }

    /// Whole-record metrics.
    pub fn from_series(rr: &RrSeries, threshold: PnnThreshold) -> Result<Self, FeatureError> {
        Self::from_intervals(rr.intervals_ms(), threshold, rr.label(), 0.0)
    }
}

/// Rows of HRV features in the fixed order AVNN, SDNN, RMSSD, pNNx, all sharing
/// one pNNx threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: Vec<FeatureVector>,
    threshold: PnnThreshold,
}

impl FeatureMatrix {
    pub fn new(rows: Vec<FeatureVector>, threshold: PnnThreshold) -> Self {
        Self { rows, threshold }
    }

    pub fn rows(&self) -> &[FeatureVector] {
        &self.rows
    }

    pub fn threshold(&self) -> PnnThreshold {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Append all rows of `other`; both matrices must use the same threshold.
    pub fn extend(&mut self, other: FeatureMatrix) -> Result<(), FeatureError> {
        if other.threshold != self.threshold {
            return Err(FeatureError::MixedThreshold);
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// `n_rows x 4` data matrix.
    pub fn to_array(&self) -> Array2<f64> {
        let mut a = Array2::zeros((self.rows.len(), N_FEATURES));
        for (i, r) in self.rows.iter().enumerate() {
            for (j, v) in r.values().into_iter().enumerate() {
                a[[i, j]] = v;
            }
        }
        a
    }

    /// Values of one feature column for the rows of `label`, in row order.
    pub fn column_for_label(&self, column: usize, label: &str) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.record_label == label)
            .map(|r| r.values()[column])
            .collect()
    }

    /// Distinct record labels in first-appearance order.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.record_label) {
                out.push(r.record_label.clone());
            }
        }
        out
    }

    pub fn column_names(&self) -> [String; N_FEATURES] {
        [
            FEATURE_NAMES[0].to_string(),
            FEATURE_NAMES[1].to_string(),
            FEATURE_NAMES[2].to_string(),
            self.threshold.column_name(),
        ]
    }

    /// Write `label,window_start_ms,avnn,sdnn,rmssd,pnn<x>` rows with six
    /// significant digits.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), FeatureError> {
        let mut w = csv::Writer::from_writer(writer);
        let names = self.column_names();
        w.write_record(
            ["label", "window_start_ms"]
                .into_iter()
                .chain(names.iter().map(String::as_str)),
        )?;
        for r in &self.rows {
            let mut rec = vec![r.record_label.clone(), sig(r.window_start_ms)];
            rec.extend(r.values().iter().map(|v| sig(*v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, FeatureError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expect = ["label", "window_start_ms", "avnn", "sdnn", "rmssd"];
        if headers.len() != 6
            || headers.iter().take(5).ne(expect.iter().copied())
            || !headers[5].starts_with("pnn")
        {
            return Err(FeatureError::Parse {
                line: 1,
                msg: format!("unexpected header {:?}", headers.iter().collect::<Vec<_>>()),
            });
        }
        let x_ms: f64 = headers[5][3..].parse().map_err(|_| FeatureError::Parse {
            line: 1,
            msg: format!("cannot read threshold from column {:?}", &headers[5]),
        })?;
        let threshold = PnnThreshold::inclusive(x_ms);
        threshold.validate()?;
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i + 2;
            let num = |k: usize| -> Result<f64, FeatureError> {
                rec.get(k)
                    .and_then(|t| t.trim().parse::<f64>().ok())
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| FeatureError::Parse {
                        line,
                        msg: format!("column {} is not a finite number", k + 1),
                    })
            };
            rows.push(FeatureVector {
                record_label: rec[0].to_string(),
                window_start_ms: num(1)?,
                avnn_ms: num(2)?,
                sdnn_ms: num(3)?,
                rmssd_ms: num(4)?,
                pnnx_pct: num(5)?,
                window_len_ms: None,
            });
        }
        Ok(Self { rows, threshold })
    }
}

/// Sliding-window parameters, in milliseconds of cumulative record time.
#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
pub struct WindowParams {
    pub window_ms: f64,
    pub hop_ms: f64,
}

impl Default for WindowParams {
    fn default() -> Self {
        Self {
            window_ms: DEFAULT_WINDOW_MS,
            hop_ms: DEFAULT_HOP_MS,
        }
    }
}

impl WindowParams {
    pub fn validate(&self) -> Result<(), FeatureError> {
        let ok = self.window_ms >= MIN_WINDOW_MS
            && self.window_ms.is_finite()
            && self.hop_ms > 0.0
            && self.hop_ms <= self.window_ms;
        if ok {
            Ok(())
        } else {
            Err(FeatureError::InvalidWindow {
                window_ms: self.window_ms,
                hop_ms: self.hop_ms,
            })
        }
    }
}

// Tolerance for comparing cumulative sums against window edges.
const EDGE_EPS_MS: f64 = 1e-6;

/// Features over windows `[k*hop, k*hop + window)` of cumulative time.
///
/// An interval belongs to a window when it starts and ends inside it. Windows
/// with fewer than two intervals are skipped. Window generation stops after
/// the first window that reaches the end of the record; a trailing window
/// shorter than half the window length (other than the first) is dropped.
pub fn windowed_features(
    rr: &RrSeries,
    params: WindowParams,
    threshold: PnnThreshold,
) -> Result<FeatureMatrix, FeatureError> {
    params.validate()?;
    threshold.validate()?;
    let intervals = rr.intervals_ms();
    let mut starts = Vec::with_capacity(intervals.len());
    let mut t = 0.0;
    for v in intervals {
        starts.push(t);
        t += v;
    }
    let total = t;

    let mut rows = Vec::new();
    let mut first = 0usize;
    for k in 0usize.. {
        let s = k as f64 * params.hop_ms;
        if s >= total - EDGE_EPS_MS {
            break;
        }
        let end = s + params.window_ms;
        let span = end.min(total) - s;
        if k > 0 && span < params.window_ms / 2.0 {
            break;
        }
        while first < intervals.len() && starts[first] < s - EDGE_EPS_MS {
            first += 1;
        }
        let mut last = first;
        while last < intervals.len() && starts[last] + intervals[last] <= end + EDGE_EPS_MS {
            last += 1;
        }
        let slice = &intervals[first..last];
        if slice.len() >= 2 {
            let mut row = FeatureVector::from_intervals(slice, threshold, rr.label(), s)?;
            row.window_len_ms = Some(span);
            rows.push(row);
        }
        if end >= total - EDGE_EPS_MS {
            break;
        }
    }
    if rows.is_empty() {
        return Err(FeatureError::NoWindow(rr.label().to_string()));
    }
    Ok(FeatureMatrix::new(rows, threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const P50: PnnThreshold = PnnThreshold {
        x_ms: 50.0,
        strict: false,
    };

    #[test]
    fn constant_series() {
        let rr = [800.0, 800.0, 800.0];
        assert_eq!(avnn(&rr).unwrap(), 800.0);
        assert_eq!(sdnn(&rr).unwrap(), 0.0);
        assert_eq!(rmssd(&rr).unwrap(), 0.0);
        assert_eq!(pnnx(&rr, P50).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_values() {
        let rr = [800.0, 860.0, 800.0];
        assert_abs_diff_eq!(avnn(&rr).unwrap(), 820.0, epsilon = 1e-9);
        assert_abs_diff_eq!(sdnn(&rr).unwrap(), 1200f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(rmssd(&rr).unwrap(), 60.0, epsilon = 1e-9);
        assert_abs_diff_eq!(pnnx(&rr, P50).unwrap(), 100.0, epsilon = 1e-9);

        assert_abs_diff_eq!(avnn(&[500.0, 1500.0]).unwrap(), 1000.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sdnn(&[1.0, 2.0, 3.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(rmssd(&[100.0, 200.0]).unwrap(), 100.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            pnnx(&[800.0, 830.0, 900.0], P50).unwrap(),
            50.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn inclusive_versus_strict_threshold() {
        let rr = [800.0, 850.0, 800.0];
        assert_eq!(pnnx(&rr, P50).unwrap(), 100.0);
        let strict = PnnThreshold {
            x_ms: 50.0,
            strict: true,
        };
        assert_eq!(pnnx(&rr, strict).unwrap(), 0.0);
    }

    #[test]
    fn short_input_errors() {
        assert!(matches!(avnn(&[800.0]), Err(FeatureError::TooShort(1))));
        assert!(sdnn(&[]).is_err());
        assert!(rmssd(&[1.0]).is_err());
        assert!(pnnx(&[1.0], P50).is_err());
        assert!(matches!(
            pnnx(&[1.0, 2.0], PnnThreshold::inclusive(0.0)),
            Err(FeatureError::InvalidThreshold(_))
        ));
    }

    fn constant(n: usize, v: f64) -> RrSeries {
        RrSeries::new(vec![v; n], "c").unwrap()
    }

    #[test]
    fn two_full_windows_on_constant_record() {
        let rr = constant(120, 1000.0);
        let m = windowed_features(
            &rr,
            WindowParams {
                window_ms: 60_000.0,
                hop_ms: 60_000.0,
            },
            P50,
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        for r in m.rows() {
            assert_eq!(r.values(), [1000.0, 0.0, 0.0, 0.0]);
        }
        assert_eq!(m.rows()[1].window_start_ms, 60_000.0);
    }

    #[test]
    fn single_window_equals_whole_record() {
        let v: Vec<f64> = (0..70).map(|i| 780.0 + (i % 7) as f64 * 10.0).collect();
        let rr = RrSeries::new(v, "w").unwrap();
        let total = rr.duration_ms();
        assert!(total <= 60_000.0);
        let m = windowed_features(&rr, WindowParams::default(), P50).unwrap();
        assert_eq!(m.len(), 1);
        let whole = FeatureVector::from_series(&rr, P50).unwrap();
        assert_eq!(m.rows()[0].values(), whole.values());

        // exactly 60 s, hop 30 s: the half-length tail is dropped
        let rr = constant(60, 1000.0);
        let m = windowed_features(&rr, WindowParams::default(), P50).unwrap();
        assert_eq!(m.len(), 1);
    }

    #[test]
    fn alternating_record_every_window() {
        let v: Vec<f64> = (0..400)
            .map(|i| if i % 2 == 0 { 800.0 } else { 860.0 })
            .collect();
        let rr = RrSeries::new(v, "alt").unwrap();
        let m = windowed_features(&rr, WindowParams::default(), P50).unwrap();
        assert!(m.len() > 5);
        for r in m.rows() {
            assert_abs_diff_eq!(r.pnnx_pct, 100.0, epsilon = 1e-12);
            assert_abs_diff_eq!(r.rmssd_ms, 60.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn short_trailing_window_dropped() {
        // 75 s record, 60/60 windows: tail of 15 s is below half a window
        let m = windowed_features(
            &constant(75, 1000.0),
            WindowParams {
                window_ms: 60_000.0,
                hop_ms: 60_000.0,
            },
            P50,
        )
        .unwrap();
        assert_eq!(m.len(), 1);
        // 100 s record, 60/60: tail of 40 s is kept
        let m = windowed_features(
            &constant(100, 1000.0),
            WindowParams {
                window_ms: 60_000.0,
                hop_ms: 60_000.0,
            },
            P50,
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.rows()[1].window_len_ms, Some(40_000.0));
    }

    #[test]
    fn invalid_window_params() {
        let rr = constant(100, 1000.0);
        for (w, h) in [(5_000.0, 1_000.0), (60_000.0, 0.0), (60_000.0, 70_000.0)] {
            assert!(matches!(
                windowed_features(
                    &rr,
                    WindowParams {
                        window_ms: w,
                        hop_ms: h
                    },
                    P50
                ),
                Err(FeatureError::InvalidWindow { .. })
            ));
        }
    }

    #[test]
    fn no_window_when_intervals_exceed_window() {
        let rr = RrSeries::new(vec![15_000.0, 15_000.0], "long").unwrap();
        let params = WindowParams {
            window_ms: 10_000.0,
            hop_ms: 10_000.0,
        };
        assert!(matches!(
            windowed_features(&rr, params, P50),
            Err(FeatureError::NoWindow(_))
        ));
    }

    #[test]
    fn csv_round_trip_preserves_six_digits() {
        let rr = RrSeries::new(vec![812.345678, 861.0, 799.5, 845.25], "chi/s1").unwrap();
        let m = FeatureMatrix::new(vec![FeatureVector::from_series(&rr, P50).unwrap()], P50);
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("label,window_start_ms,avnn,sdnn,rmssd,pnn50\n"));
        let back = FeatureMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back.rows()[0].record_label, "chi/s1");
        for (a, b) in back.rows()[0].values().iter().zip(m.rows()[0].values()) {
            assert!(((a - b) / b).abs() < 1e-5);
        }
    }

    #[test]
    fn csv_rejects_bad_header() {
        let text = "label,start,avnn,sdnn,rmssd,pnn50\n";
        assert!(FeatureMatrix::read_csv(text.as_bytes()).is_err());
        let text = "label,window_start_ms,avnn,sdnn,rmssd,pnn50\nx,0,1,2,oops,4\n";
        assert!(matches!(
            FeatureMatrix::read_csv(text.as_bytes()),
            Err(FeatureError::Parse { line: 2, .. })
        ));
    }

    fn rr_strategy() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(400.0..1400.0f64, 2..120)
    }

    fn all(rr: &[f64], t: PnnThreshold) -> [f64; 4] {
        [
            avnn(rr).unwrap(),
            sdnn(rr).unwrap(),
            rmssd(rr).unwrap(),
            pnnx(rr, t).unwrap(),
        ]
    }

    proptest! {
        #[test]
        fn metric_invariants_hold(rr in rr_strategy()) {
            let f = all(&rr, P50);
            prop_assert!(f[0] > 0.0 && f[1] >= 0.0 && f[2] >= 0.0);
            prop_assert!((0.0..=100.0).contains(&f[3]));
        }

        #[test]
        fn reversal_leaves_metrics_unchanged(rr in rr_strategy()) {
            let rev: Vec<f64> = rr.iter().rev().copied().collect();
            let a = all(&rr, P50);
            let b = all(&rev, P50);
            for k in 0..3 {
                prop_assert!((a[k] - b[k]).abs() <= 1e-9 * a[k].abs().max(1.0));
            }
            prop_assert_eq!(a[3], b[3]);
        }
    }
}
