//! File-level stages and the end-to-end run.
//!
//! Every stage reads and writes only documented files, and [`run_pipeline`]
//! is literally the composition of the stage functions the subcommands call:
//! cleaned RR text -> `features.csv` -> cluster CSVs, and `features.csv` ->
//! one WAV per record -> one PNG per WAV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clustering::{self, ClusterError, FcmConfig, FcmResult, FEATURE_PAIRS};
use crate::features::{
    self, FeatureError, FeatureMatrix, PnnThreshold, WindowParams, FEATURE_NAMES,
};
use crate::fmt::sig;
use crate::rr::{self, IngestError, RrUnit};
use crate::sonify::{self, SonificationConfig, SonifyError, VowelTable};
use crate::spectrogram::{self, SpectrogramError, SpectrogramParams};
use crate::wav::{self, WavError};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "HRV_SONIFY_OUT_DIR";
/// Output directory when neither flag, config nor environment names one.
pub const DEFAULT_OUT_DIR: &str = "hrv-sonify-out";

pub const FEATURES_FILE: &str = "features.csv";
pub const CENTERS_FILE: &str = "centers.csv";
pub const PARTITION_FILE: &str = "partition.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const RR_DIR: &str = "rr";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Features,
    Clustering,
    Sonify,
    Spectrogram,
    Report,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Features => "features",
            Stage::Clustering => "clustering",
            Stage::Sonify => "sonify",
            Stage::Spectrogram => "spectrogram",
            Stage::Report => "report",
        })
    }
}

/// What went wrong, as far as the exit code is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Io,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Io => 4,
        }
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    pub class: ErrorClass,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl PipelineError {
    pub fn new(
        stage: Stage,
        class: ErrorClass,
        source: impl Into<Box<dyn std::error::Error + Send + Sync>>,
    ) -> Self {
        Self {
            stage,
            class,
            source: source.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class.exit_code()
    }

    /// Same error attributed to another stage.
    pub fn in_stage(mut self, stage: Stage) -> Self {
        self.stage = stage;
        self
    }

    fn io(stage: Stage, path: &Path, e: std::io::Error) -> Self {
        Self::new(stage, ErrorClass::Io, format!("{}: {e}", path.display()))
    }
}

fn csv_class(e: &csv::Error) -> ErrorClass {
    if e.is_io_error() {
        ErrorClass::Io
    } else {
        ErrorClass::Data
    }
}

impl From<IngestError> for PipelineError {
    fn from(e: IngestError) -> Self {
        let class = match e {
            IngestError::Io { .. } => ErrorClass::Io,
            IngestError::InvalidBounds { .. } | IngestError::UnknownUnit(_) => ErrorClass::Config,
            _ => ErrorClass::Data,
        };
        Self::new(Stage::Ingest, class, e)
    }
}

impl From<FeatureError> for PipelineError {
    fn from(e: FeatureError) -> Self {
        let class = match &e {
            FeatureError::InvalidThreshold(_) | FeatureError::InvalidWindow { .. } => {
                ErrorClass::Config
            }
            FeatureError::Csv(c) => csv_class(c),
            _ => ErrorClass::Data,
        };
        Self::new(Stage::Features, class, e)
    }
}

impl From<ClusterError> for PipelineError {
    fn from(e: ClusterError) -> Self {
        let class = match e {
            ClusterError::InvalidConfig(_) => ErrorClass::Config,
            _ => ErrorClass::Data,
        };
        Self::new(Stage::Clustering, class, e)
    }
}

impl From<SonifyError> for PipelineError {
    fn from(e: SonifyError) -> Self {
        let class = match e {
            SonifyError::Io { .. } => ErrorClass::Io,
            SonifyError::InvalidConfig(_)
            | SonifyError::InvalidFormant(_)
            | SonifyError::VowelTable(_)
            | SonifyError::F0OutOfRange { .. } => ErrorClass::Config,
            _ => ErrorClass::Data,
        };
        Self::new(Stage::Sonify, class, e)
    }
}

impl From<WavError> for PipelineError {
    fn from(e: WavError) -> Self {
        let class = match e {
            WavError::Io { .. } => ErrorClass::Io,
            _ => ErrorClass::Data,
        };
        Self::new(Stage::Sonify, class, e)
    }
}

impl From<SpectrogramError> for PipelineError {
    fn from(e: SpectrogramError) -> Self {
        let class = match e {
            SpectrogramError::Io { .. } | SpectrogramError::Png(_) => ErrorClass::Io,
            SpectrogramError::TooShort { .. } => ErrorClass::Data,
            _ => ErrorClass::Config,
        };
        Self::new(Stage::Spectrogram, class, e)
    }
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub unit: RrUnit,
    /// Defaults to the file stem.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl RecordSpec {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| {
            self.path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "record".to_string())
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestSection {
    pub rr_min_ms: f64,
    pub rr_max_ms: f64,
}

impl Default for IngestSection {
    fn default() -> Self {
        Self {
            rr_min_ms: rr::DEFAULT_RR_MIN_MS,
            rr_max_ms: rr::DEFAULT_RR_MAX_MS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub window_s: f64,
    pub hop_s: f64,
    pub pnn_x_ms: f64,
    pub strict_pnn: bool,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            window_s: features::DEFAULT_WINDOW_MS / 1000.0,
            hop_s: features::DEFAULT_HOP_MS / 1000.0,
            pnn_x_ms: 50.0,
            strict_pnn: false,
        }
    }
}

impl FeatureSection {
    pub fn window(&self) -> WindowParams {
        WindowParams {
            window_ms: self.window_s * 1000.0,
            hop_ms: self.hop_s * 1000.0,
        }
    }

    pub fn threshold(&self) -> PnnThreshold {
        PnnThreshold {
            x_ms: self.pnn_x_ms,
            strict: self.strict_pnn,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SonifySection {
    /// Feature column to sonify: `avnn`, `sdnn`, `rmssd` or `pnn<x>`.
    pub feature: String,
    pub sample_rate_hz: u32,
    pub seg_dur_s: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub glide_ms: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vowel_table: Option<PathBuf>,
}

impl Default for SonifySection {
    fn default() -> Self {
        let d = SonificationConfig::default();
        Self {
            feature: FEATURE_NAMES[0].to_string(),
            sample_rate_hz: d.sample_rate_hz,
            seg_dur_s: d.seg_dur_s,
            f0_min_hz: d.f0_min_hz,
            f0_max_hz: d.f0_max_hz,
            glide_ms: d.glide_ms,
            vowel_table: None,
        }
    }
}

impl SonifySection {
    /// Resolve the vowel table and build a validated config.
    pub fn to_config(&self) -> Result<SonificationConfig, PipelineError> {
        let vowels = match &self.vowel_table {
            Some(p) => VowelTable::load(p)?,
            None => VowelTable::default(),
        };
        let cfg = SonificationConfig {
            sample_rate_hz: self.sample_rate_hz,
            seg_dur_s: self.seg_dur_s,
            f0_min_hz: self.f0_min_hz,
            f0_max_hz: self.f0_max_hz,
            vowels,
            glide_ms: self.glide_ms,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrogramSection {
    pub dft_size: usize,
    pub hop: usize,
    pub floor_db: f64,
    pub width: u32,
    pub height: u32,
}

impl Default for SpectrogramSection {
    fn default() -> Self {
        Self {
            dft_size: spectrogram::DEFAULT_DFT_SIZE,
            hop: spectrogram::DEFAULT_HOP,
            floor_db: spectrogram::DEFAULT_FLOOR_DB,
            width: spectrogram::DEFAULT_WIDTH,
            height: spectrogram::DEFAULT_HEIGHT,
        }
    }
}

impl SpectrogramSection {
    pub fn params(&self) -> SpectrogramParams {
        SpectrogramParams {
            dft_size: self.dft_size,
            hop: self.hop,
            floor_db: self.floor_db,
            ..SpectrogramParams::default()
        }
    }
}

/// Everything a run needs. Loaded from TOML; every section is optional.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub records: Vec<RecordSpec>,
    pub ingest: IngestSection,
    pub features: FeatureSection,
    pub clustering: FcmConfig,
    pub sonification: SonifySection,
    pub spectrogram: SpectrogramSection,
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, PipelineError> {
        toml::from_str(text).map_err(|e| PipelineError::new(Stage::Config, ErrorClass::Config, e))
    }

    /// Load a config file. Relative record, vowel-table and output paths are
    /// taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text =
            fs::read_to_string(path).map_err(|e| PipelineError::io(Stage::Config, path, e))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        cfg.records.iter_mut().for_each(|r| rebase(&mut r.path));
        if let Some(p) = cfg.sonification.vowel_table.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.output_dir.as_mut() {
            rebase(p);
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Check every nested section without touching the filesystem.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg_err = |stage, msg: String| PipelineError::new(stage, ErrorClass::Config, msg);
        if self.records.is_empty() {
            return Err(cfg_err(Stage::Config, "no input records configured".into()));
        }
        let mut labels: Vec<String> = self.records.iter().map(RecordSpec::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(cfg_err(
                Stage::Config,
                format!("duplicate record label {:?}", w[0]),
            ));
        }
        let ing = self.ingest;
        if !(ing.rr_min_ms > 0.0 && ing.rr_min_ms < ing.rr_max_ms) {
            return Err(IngestError::InvalidBounds {
                lo: ing.rr_min_ms,
                hi: ing.rr_max_ms,
            }
            .into());
        }
        self.features.window().validate()?;
        if !(self.features.pnn_x_ms > 0.0 && self.features.pnn_x_ms.is_finite()) {
            return Err(FeatureError::InvalidThreshold(self.features.pnn_x_ms).into());
        }
        self.clustering.validate()?;
        feature_column(&self.sonification.feature, self.features.threshold())
            .map_err(|e| PipelineError::new(Stage::Sonify, ErrorClass::Config, e))?;
        self.spectrogram.params().validate()?;
        if self.spectrogram.width == 0 || self.spectrogram.height == 0 {
            return Err(SpectrogramError::ImageSize(
                self.spectrogram.width,
                self.spectrogram.height,
            )
            .into());
        }
        Ok(())
    }
}

/// Output directory: explicit value, else the environment variable, else
/// [`DEFAULT_OUT_DIR`].
pub fn resolve_out_dir(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| {
            std::env::var_os(OUT_DIR_ENV)
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Column index of a feature name. `pnnx` and `pnn<x>` both select the
/// fourth column, the latter only when `<x>` matches the threshold.
pub fn feature_column(name: &str, threshold: PnnThreshold) -> Result<usize, String> {
    let lower = name.to_ascii_lowercase();
    if let Some(i) = FEATURE_NAMES[..3].iter().position(|n| *n == lower) {
        return Ok(i);
    }
    if lower == "pnnx" || lower == threshold.column_name() {
        return Ok(3);
    }
    Err(format!(
        "unknown feature {name:?}; expected one of avnn, sdnn, rmssd, {}",
        threshold.column_name()
    ))
}

// ---------------------------------------------------------------------------
// stages

fn create_dir(stage: Stage, dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::io(stage, dir, e))
}

fn write_file(stage: Stage, path: &Path, bytes: &[u8]) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(stage, parent)?;
    }
    fs::write(path, bytes).map_err(|e| PipelineError::io(stage, path, e))
}

/// Outcome of [`ingest_file`].
#[derive(Debug, Clone, PartialEq)]
pub struct IngestSummary {
    pub label: String,
    pub read: usize,
    pub removed: usize,
}

/// Parse one RR file, drop intervals outside the gate, write the cleaned
/// series in canonical millisecond form.
pub fn ingest_file(
    record: &RecordSpec,
    gate: IngestSection,
    out: &Path,
) -> Result<IngestSummary, PipelineError> {
    let label = record.label();
    let series = rr::parse_rr_file(&record.path, record.unit, &label)?;
    let filtered = rr::filter_artifacts(&series, gate.rr_min_ms, gate.rr_max_ms)?;
    write_file(
        Stage::Ingest,
        out,
        rr::write_rr_string(&filtered.series).as_bytes(),
    )?;
    Ok(IngestSummary {
        label,
        read: series.len(),
        removed: filtered.removed,
    })
}

/// Windowed features over several RR files, concatenated in input order.
/// Labels come from `# label:` headers, falling back to [`RecordSpec::label`].
pub fn features_from_files(
    records: &[RecordSpec],
    section: FeatureSection,
) -> Result<FeatureMatrix, PipelineError> {
    let threshold = section.threshold();
    let mut all = FeatureMatrix::new(Vec::new(), threshold);
    for rec in records {
        let text = fs::read_to_string(&rec.path)
            .map_err(|e| PipelineError::io(Stage::Features, &rec.path, e))?;
        let label = match &rec.label {
            Some(l) => l.clone(),
            None => rr::label_header(&text)
                .map(str::to_string)
                .unwrap_or_else(|| rec.label()),
        };
        let series = rr::parse_rr_str(&text, rec.unit, &label, &rec.path)
            .map_err(|e| PipelineError::from(e).in_stage(Stage::Features))?;
        all.extend(features::windowed_features(
            &series,
            section.window(),
            threshold,
        )?)?;
    }
    Ok(all)
}

pub fn write_features_csv(matrix: &FeatureMatrix, path: &Path) -> Result<(), PipelineError> {
    let mut bytes = Vec::new();
    matrix.write_csv(&mut bytes)?;
    write_file(Stage::Features, path, &bytes)
}

pub fn read_features_csv(path: &Path) -> Result<FeatureMatrix, PipelineError> {
    let file = fs::File::open(path).map_err(|e| PipelineError::io(Stage::Features, path, e))?;
    Ok(FeatureMatrix::read_csv(file)?)
}

/// Result of the clustering stage with the files it wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutputs {
    pub result: FcmResult,
    pub normalized: Array2<f64>,
    pub files: Vec<PathBuf>,
}

/// File name of one pairwise plot-data CSV, e.g. `pair_sdnn_avnn.csv`.
pub fn pair_file_name(y: usize, x: usize, names: &[String; 4]) -> String {
    format!("pair_{}_{}.csv", names[y], names[x])
}

fn csv_bytes(rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, PipelineError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.write_record(&r)
            .map_err(|e| PipelineError::new(Stage::Clustering, csv_class(&e), e))?;
    }
    w.into_inner()
        .map_err(|e| PipelineError::new(Stage::Clustering, ErrorClass::Io, e.to_string()))
}

/// z-score the feature matrix, run FCM and write `centers.csv`,
/// `partition.csv` and the six pair CSVs into `out_dir`.
pub fn cluster_features(
    matrix: &FeatureMatrix,
    config: &FcmConfig,
    out_dir: &Path,
) -> Result<ClusterOutputs, PipelineError> {
    config.validate()?;
    if matrix.len() < config.n_clusters {
        return Err(ClusterError::TooFewPoints {
            clusters: config.n_clusters,
            points: matrix.len(),
        }
        .into());
    }
    let names = matrix.column_names();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let (z, _) = clustering::zscore(&matrix.to_array(), &name_refs)?;
    let result = clustering::fcm(&z, config)?;
    let labels = result.hard_labels();
    create_dir(Stage::Clustering, out_dir)?;
    let mut files = Vec::new();

    let header = |lead: &[&str], rest: &[String]| -> Vec<String> {
        lead.iter()
            .map(|s| s.to_string())
            .chain(rest.iter().cloned())
            .collect()
    };

    let centers = std::iter::once(header(&["cluster"], &names)).chain(
        result
            .centers
            .rows()
            .into_iter()
            .enumerate()
            .map(|(j, row)| {
                std::iter::once(format!("Cluster{}", j + 1))
                    .chain(row.iter().map(|v| sig(*v)))
                    .collect()
            }),
    );
    let path = out_dir.join(CENTERS_FILE);
    write_file(Stage::Clustering, &path, &csv_bytes(centers)?)?;
    files.push(path);

    let u_names: Vec<String> = (1..=config.n_clusters).map(|j| format!("u{j}")).collect();
    let mut partition = vec![header(&["label", "window_start_ms"], &u_names)];
    partition[0].push("cluster".into());
    for (i, r) in matrix.rows().iter().enumerate() {
        let mut rec = vec![r.record_label.clone(), sig(r.window_start_ms)];
        rec.extend(result.partition.column(i).iter().map(|v| sig(*v)));
        rec.push(format!("Cluster{}", labels[i] + 1));
        partition.push(rec);
    }
    let path = out_dir.join(PARTITION_FILE);
    write_file(Stage::Clustering, &path, &csv_bytes(partition)?)?;
    files.push(path);

    for plot in clustering::pairwise_plot_data(&z, &result.partition)? {
        let mut rows = vec![vec![
            "label".to_string(),
            "window_start_ms".to_string(),
            names[plot.x].clone(),
            names[plot.y].clone(),
            "cluster".to_string(),
        ]];
        for (i, (r, &(x, y))) in matrix.rows().iter().zip(&plot.points).enumerate() {
            rows.push(vec![
                r.record_label.clone(),
                sig(r.window_start_ms),
                sig(x),
                sig(y),
                format!("Cluster{}", plot.labels[i] + 1),
            ]);
        }
        let path = out_dir.join(pair_file_name(plot.y, plot.x, &names));
        write_file(Stage::Clustering, &path, &csv_bytes(rows)?)?;
        files.push(path);
    }
    debug_assert_eq!(files.len(), 2 + FEATURE_PAIRS.len());
    Ok(ClusterOutputs {
        result,
        normalized: z,
        files,
    })
}

/// The feature series of one record.
pub fn select_series(
    matrix: &FeatureMatrix,
    label: Option<&str>,
    feature: &str,
) -> Result<(String, Vec<f64>), PipelineError> {
    let col = feature_column(feature, matrix.threshold())
        .map_err(|e| PipelineError::new(Stage::Sonify, ErrorClass::Config, e))?;
    let labels = matrix.labels();
    let label = match label {
        Some(l) if labels.iter().any(|x| x == l) => l.to_string(),
        Some(l) => {
            return Err(PipelineError::new(
                Stage::Sonify,
                ErrorClass::Data,
                format!(
                    "no rows labelled {l:?}; labels present: {}",
                    labels.join(", ")
                ),
            ))
        }
        None if labels.len() == 1 => labels[0].clone(),
        None => {
            return Err(PipelineError::new(
                Stage::Sonify,
                ErrorClass::Config,
                format!(
                    "several records present ({}); choose one with a label",
                    labels.join(", ")
                ),
            ))
        }
    };
    let values = matrix.column_for_label(col, &label);
    Ok((label, values))
}

/// Render a feature series and write it as a WAV file.
pub fn sonify_to_wav(
    values: &[f64],
    config: &SonificationConfig,
    out: &Path,
) -> Result<(), PipelineError> {
    let buffer = sonify::render_sonification(values, config)?;
    let bytes = wav::encode_wav(&buffer)?;
    write_file(Stage::Sonify, out, &bytes)
}

/// Read a WAV, write its spectrogram PNG and the `.axes.txt` sidecar.
/// Returns the two paths.
pub fn spectrogram_from_wav(
    wav_path: &Path,
    section: &SpectrogramSection,
    out_png: &Path,
) -> Result<(PathBuf, PathBuf), PipelineError> {
    let pcm =
        wav::read_wav(wav_path).map_err(|e| PipelineError::from(e).in_stage(Stage::Spectrogram))?;
    let spec = spectrogram::compute_spectrogram(&pcm.to_audio(), &section.params())?;
    if let Some(parent) = out_png.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(Stage::Spectrogram, parent)?;
    }
    spectrogram::render_png(&spec, out_png, section.height, section.width)?;
    let axes = spectrogram::axes_path(out_png);
    write_file(Stage::Spectrogram, &axes, spec.axes_text().as_bytes())?;
    Ok((out_png.to_path_buf(), axes))
}

// ---------------------------------------------------------------------------
// full run

/// Per-record line of the run report.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordReport {
    pub label: String,
    pub intervals_read: usize,
    pub removed: usize,
    pub windows: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub records: Vec<RecordReport>,
    pub n_points: usize,
    pub iterations: usize,
    pub final_objective: f64,
    pub converged: bool,
    /// Effective configuration, defaults filled in.
    pub config: PipelineConfig,
    /// Written files, relative to the output directory.
    pub files: Vec<PathBuf>,
}

impl RunReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "hrv-sonify run report");
        let _ = writeln!(s);
        let _ = writeln!(s, "[records]");
        for r in &self.records {
            let _ = writeln!(
                s,
                "{}: {} intervals read, {} removed by the artifact gate, {} windows",
                r.label, r.intervals_read, r.removed, r.windows
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[clustering]");
        let _ = writeln!(s, "points: {}", self.n_points);
        let _ = writeln!(s, "iterations: {}", self.iterations);
        let _ = writeln!(s, "final objective: {}", sig(self.final_objective));
        let _ = writeln!(s, "converged: {}", self.converged);
        let _ = writeln!(s);
        let _ = writeln!(s, "[effective configuration]");
        let mut shown = self.config.clone();
        shown.output_dir = None;
        for r in &mut shown.records {
            r.label = Some(r.label());
        }
        s.push_str(&shown.to_toml_string());
        if shown.sonification.vowel_table.is_none() {
            let _ = writeln!(s);
            let _ = writeln!(s, "# built-in vowel table");
            for line in VowelTable::default().to_toml_string().lines() {
                let _ = writeln!(s, "# {line}");
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "[files]");
        for f in &self.files {
            let _ = writeln!(s, "{}", f.display());
        }
        let _ = writeln!(s, "{REPORT_FILE}");
        s
    }
}

/// WAV and PNG paths of one record inside the output directory.
pub fn record_outputs(out_dir: &Path, label: &str) -> (PathBuf, PathBuf) {
    (
        out_dir.join(format!("{label}.wav")),
        out_dir.join(format!("{label}.png")),
    )
}

/// Ingest, features, clustering, sonification and spectrograms for every
/// configured record, then `report.txt`. `out_dir` must already be resolved.
pub fn run_pipeline(config: &PipelineConfig, out_dir: &Path) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let sonify_cfg = config.sonification.to_config()?;
    create_dir(Stage::Config, out_dir)?;
    let rel = |p: &Path| p.strip_prefix(out_dir).unwrap_or(p).to_path_buf();
    let mut files = Vec::new();

    let mut cleaned = Vec::new();
    let mut summaries = Vec::new();
    for rec in &config.records {
        let label = rec.label();
        let out = out_dir.join(RR_DIR).join(format!("{label}.txt"));
        summaries.push(ingest_file(rec, config.ingest, &out)?);
        files.push(rel(&out));
        cleaned.push(RecordSpec {
            path: out,
            unit: RrUnit::Milliseconds,
            label: Some(label),
        });
    }

    let features_path = out_dir.join(FEATURES_FILE);
    let matrix = features_from_files(&cleaned, config.features)?;
    write_features_csv(&matrix, &features_path)?;
    files.push(rel(&features_path));

    // Downstream stages see exactly what the file holds.
    let matrix = read_features_csv(&features_path)?;
    let clusters = cluster_features(&matrix, &config.clustering, out_dir)?;
    files.extend(clusters.files.iter().map(|p| rel(p)));

    let mut records = Vec::new();
    for s in &summaries {
        let (label, values) = select_series(&matrix, Some(&s.label), &config.sonification.feature)?;
        let (wav_path, png_path) = record_outputs(out_dir, &label);
        sonify_to_wav(&values, &sonify_cfg, &wav_path)?;
        let (png, axes) = spectrogram_from_wav(&wav_path, &config.spectrogram, &png_path)?;
        files.extend([rel(&wav_path), rel(&png), rel(&axes)]);
        records.push(RecordReport {
            label,
            intervals_read: s.read,
            removed: s.removed,
            windows: values.len(),
        });
    }

    let report = RunReport {
        records,
        n_points: matrix.len(),
        iterations: clusters.result.iterations_run,
        final_objective: clusters.result.final_objective(),
        converged: clusters.result.converged,
        config: config.clone(),
        files,
    };
    let path = out_dir.join(REPORT_FILE);
    write_file(Stage::Report, &path, report.to_text().as_bytes())?;
    Ok(report)
}
