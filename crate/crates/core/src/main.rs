use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hrv_sonify::clustering::FcmConfig;
use hrv_sonify::pipeline::{
    self, ErrorClass, FeatureSection, IngestSection, PipelineConfig, PipelineError, RecordSpec,
    SonifySection, SpectrogramSection, Stage,
};
use hrv_sonify::rr::RrUnit;

/// HRV features, fuzzy c-means clustering and formant sonification of
/// RR-interval records.
#[derive(Debug, Parser)]
#[command(name = "hrv-sonify", version)]
struct Cli {
    /// Default output directory (else $HRV_SONIFY_OUT_DIR, else ./hrv-sonify-out).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse an RR file, drop artifacts, write the cleaned series in ms.
    Ingest {
        input: PathBuf,
        #[arg(long, default_value = "ms")]
        unit: RrUnit,
        #[command(flatten)]
        gate: GateArgs,
        /// Record label (default: file stem).
        #[arg(long)]
        label: Option<String>,
        /// Output file (default: <out-dir>/rr/<label>.txt).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Windowed AVNN, SDNN, RMSSD and pNNx for one or more RR files.
    Features {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "ms")]
        unit: RrUnit,
        #[command(flatten)]
        params: FeatureArgs,
        /// Output CSV (default: <out-dir>/features.csv).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// z-score a features CSV and run fuzzy c-means.
    Cluster {
        features: PathBuf,
        #[command(flatten)]
        fcm: FcmArgs,
        /// Directory for centers.csv, partition.csv and pair_*.csv (default: <out-dir>).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Render one record's feature series from a features CSV to WAV.
    Sonify {
        features: PathBuf,
        /// Record to sonify; may be omitted when the CSV holds one record.
        #[arg(long)]
        label: Option<String>,
        #[command(flatten)]
        params: SonifyArgs,
        /// Output WAV (default: <out-dir>/<label>.wav).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// DFT magnitude spectrogram of a WAV file as an RGB PNG.
    Spectrogram {
        input: PathBuf,
        #[command(flatten)]
        params: SpectrogramArgs,
        /// Output PNG (default: the input path with a .png extension).
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Run every stage on the configured records.
    Pipeline {
        /// TOML config file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Extra RR files appended to the configured records.
        records: Vec<PathBuf>,
        /// Unit of the extra RR files.
        #[arg(long, default_value = "ms")]
        unit: RrUnit,
        #[command(flatten)]
        gate: GateArgs,
        #[command(flatten)]
        features: FeatureArgs,
        #[command(flatten)]
        fcm: FcmArgs,
        #[command(flatten)]
        sonify: SonifyArgs,
        #[command(flatten)]
        spectrogram: SpectrogramArgs,
    },
}

#[derive(Debug, Args)]
struct GateArgs {
    /// Shortest accepted interval [default: 300].
    #[arg(long)]
    rr_min_ms: Option<f64>,
    /// Longest accepted interval [default: 2000].
    #[arg(long)]
    rr_max_ms: Option<f64>,
}

impl GateArgs {
    fn apply(&self, s: &mut IngestSection) {
        set(&mut s.rr_min_ms, self.rr_min_ms);
        set(&mut s.rr_max_ms, self.rr_max_ms);
    }
}

#[derive(Debug, Args)]
struct FeatureArgs {
    /// Window length in seconds [default: 60].
    #[arg(long)]
    window_s: Option<f64>,
    /// Window hop in seconds [default: 30].
    #[arg(long)]
    hop_s: Option<f64>,
    /// pNNx threshold in ms [default: 50].
    #[arg(long)]
    pnn_x_ms: Option<f64>,
    /// Count successive differences > x instead of >= x.
    #[arg(long)]
    strict_pnn: bool,
}

impl FeatureArgs {
    fn apply(&self, s: &mut FeatureSection) {
        set(&mut s.window_s, self.window_s);
        set(&mut s.hop_s, self.hop_s);
        set(&mut s.pnn_x_ms, self.pnn_x_ms);
        s.strict_pnn |= self.strict_pnn;
    }
}

#[derive(Debug, Args)]
struct FcmArgs {
    /// Number of clusters [default: 3].
    #[arg(long)]
    clusters: Option<usize>,
    /// Fuzzifier m > 1 [default: 2.0].
    #[arg(long)]
    fuzzifier: Option<f64>,
    /// Iteration cap [default: 100].
    #[arg(long)]
    max_iter: Option<usize>,
    /// Stop when the objective improves by less than this [default: 1e-5].
    #[arg(long)]
    tol: Option<f64>,
    /// Seed of the initial partition [default: 42].
    #[arg(long)]
    seed: Option<u64>,
}

impl FcmArgs {
    fn apply(&self, c: &mut FcmConfig) {
        set(&mut c.n_clusters, self.clusters);
        set(&mut c.fuzzifier, self.fuzzifier);
        set(&mut c.max_iter, self.max_iter);
        set(&mut c.tol, self.tol);
        set(&mut c.seed, self.seed);
    }
}

#[derive(Debug, Args)]
struct SonifyArgs {
    /// Feature to sonify: avnn, sdnn, rmssd or pnn<x> [default: avnn].
    #[arg(long)]
    feature: Option<String>,
    /// Seconds of audio per data point [default: 0.5].
    #[arg(long)]
    seg_dur: Option<f64>,
    /// Pitch of the smallest value in Hz [default: 110].
    #[arg(long)]
    f0_min: Option<f64>,
    /// Pitch of the largest value in Hz [default: 440].
    #[arg(long)]
    f0_max: Option<f64>,
    /// Control glide at segment boundaries in ms [default: 50].
    #[arg(long)]
    glide_ms: Option<f64>,
    /// Output sample rate [default: 44100].
    #[arg(long)]
    sample_rate: Option<u32>,
    /// TOML vowel table with [vowel_a] and [vowel_i].
    #[arg(long)]
    vowel_table: Option<PathBuf>,
}

impl SonifyArgs {
    fn apply(&self, s: &mut SonifySection) {
        if let Some(f) = &self.feature {
            s.feature = f.clone();
        }
        set(&mut s.seg_dur_s, self.seg_dur);
        set(&mut s.f0_min_hz, self.f0_min);
        set(&mut s.f0_max_hz, self.f0_max);
        set(&mut s.glide_ms, self.glide_ms);
        set(&mut s.sample_rate_hz, self.sample_rate);
        if self.vowel_table.is_some() {
            s.vowel_table = self.vowel_table.clone();
        }
    }
}

#[derive(Debug, Args)]
struct SpectrogramArgs {
    /// DFT size, a power of two [default: 2048].
    #[arg(long)]
    dft: Option<usize>,
    /// Hop between frames in samples [default: 512].
    #[arg(long)]
    hop: Option<usize>,
    /// Lowest displayed level in dBFS [default: -90].
    #[arg(long, allow_negative_numbers = true)]
    floor_db: Option<f64>,
    /// Image width in pixels [default: 900].
    #[arg(long)]
    width: Option<u32>,
    /// Image height in pixels [default: 300].
    #[arg(long)]
    height: Option<u32>,
}

impl SpectrogramArgs {
    fn apply(&self, s: &mut SpectrogramSection) {
        set(&mut s.dft_size, self.dft);
        set(&mut s.hop, self.hop);
        set(&mut s.floor_db, self.floor_db);
        set(&mut s.width, self.width);
        set(&mut s.height, self.height);
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), PipelineError> {
    let out_dir = || pipeline::resolve_out_dir(cli.out_dir.as_deref());
    match cli.command {
        Command::Ingest {
            input,
            unit,
            gate,
            label,
            output,
        } => {
            let mut section = IngestSection::default();
            gate.apply(&mut section);
            let record = RecordSpec {
                path: input,
                unit,
                label,
            };
            let out = output.unwrap_or_else(|| {
                out_dir()
                    .join(pipeline::RR_DIR)
                    .join(format!("{}.txt", record.label()))
            });
            let s = pipeline::ingest_file(&record, section, &out)?;
            println!(
                "{}: {} intervals read, {} removed, wrote {}",
                s.label,
                s.read,
                s.removed,
                out.display()
            );
        }
        Command::Features {
            inputs,
            unit,
            params,
            output,
        } => {
            let mut section = FeatureSection::default();
            params.apply(&mut section);
            let records: Vec<RecordSpec> = inputs
                .into_iter()
                .map(|path| RecordSpec {
                    path,
                    unit,
                    label: None,
                })
                .collect();
            let matrix = pipeline::features_from_files(&records, section)?;
            let out = output.unwrap_or_else(|| out_dir().join(pipeline::FEATURES_FILE));
            pipeline::write_features_csv(&matrix, &out)?;
            println!("{} rows, wrote {}", matrix.len(), out.display());
        }
        Command::Cluster {
            features,
            fcm,
            output,
        } => {
            let mut cfg = FcmConfig::default();
            fcm.apply(&mut cfg);
            let matrix = pipeline::read_features_csv(&features)?;
            let dir = output.unwrap_or_else(out_dir);
            let res = pipeline::cluster_features(&matrix, &cfg, &dir)?;
            println!(
                "{} points, {} clusters, {} iterations, final objective {}, converged {}",
                matrix.len(),
                cfg.n_clusters,
                res.result.iterations_run,
                hrv_sonify::fmt::sig(res.result.final_objective()),
                res.result.converged
            );
            for f in &res.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sonify {
            features,
            label,
            params,
            output,
        } => {
            let mut section = SonifySection::default();
            params.apply(&mut section);
            let cfg = section.to_config()?;
            let matrix = pipeline::read_features_csv(&features)?;
            let (label, values) =
                pipeline::select_series(&matrix, label.as_deref(), &section.feature)?;
            let out = output.unwrap_or_else(|| out_dir().join(format!("{label}.wav")));
            pipeline::sonify_to_wav(&values, &cfg, &out)?;
            println!("{label}: {} values, wrote {}", values.len(), out.display());
        }
        Command::Spectrogram {
            input,
            params,
            output,
        } => {
            let mut section = SpectrogramSection::default();
            params.apply(&mut section);
            if section.width == 0 || section.height == 0 {
                return Err(hrv_sonify::spectrogram::SpectrogramError::ImageSize(
                    section.width,
                    section.height,
                )
                .into());
            }
            let out = output.unwrap_or_else(|| input.with_extension("png"));
            let (png, axes) = pipeline::spectrogram_from_wav(&input, &section, &out)?;
            println!("wrote {} and {}", png.display(), axes.display());
        }
        Command::Pipeline {
            config,
            records,
            unit,
            gate,
            features,
            fcm,
            sonify,
            spectrogram,
        } => {
            let mut cfg = match &config {
                Some(p) => PipelineConfig::load(p)?,
                None => PipelineConfig::default(),
            };
            cfg.records
                .extend(records.into_iter().map(|path| RecordSpec {
                    path,
                    unit,
                    label: None,
                }));
            gate.apply(&mut cfg.ingest);
            features.apply(&mut cfg.features);
            fcm.apply(&mut cfg.clustering);
            sonify.apply(&mut cfg.sonification);
            spectrogram.apply(&mut cfg.spectrogram);
            if cfg.records.is_empty() {
                return Err(PipelineError::new(
                    Stage::Config,
                    ErrorClass::Config,
                    "no records: pass RR files or a --config listing [[records]]",
                ));
            }
            let dir =
                pipeline::resolve_out_dir(cli.out_dir.as_deref().or(cfg.output_dir.as_deref()));
            let report = pipeline::run_pipeline(&cfg, &dir)?;
            print_summary(&report, &dir);
        }
    }
    Ok(())
}

fn print_summary(report: &pipeline::RunReport, dir: &Path) {
    for r in &report.records {
        println!(
            "{}: {} windows ({} artifacts removed)",
            r.label, r.windows, r.removed
        );
    }
    println!(
        "clustering: {} points, {} iterations, final objective {}, converged {}",
        report.n_points,
        report.iterations,
        hrv_sonify::fmt::sig(report.final_objective),
        report.converged
    );
    println!(
        "wrote {} files to {}",
        report.files.len() + 1,
        dir.display()
    );
}
