//! Browser bindings for the demo page in `www/`.
//!
//! Each export has a plain-Rust twin returning `Result<_, String>` so the
//! logic can be tested natively; the `#[wasm_bindgen]` wrappers only turn the
//! error into a `JsError`.

use std::path::Path;

use hrv_sonify::clustering::{fcm, zscore, FcmConfig};
use hrv_sonify::features::{windowed_features, PnnThreshold, WindowParams, N_FEATURES};
use hrv_sonify::rr::{
    filter_artifacts, parse_rr_str, RrUnit, DEFAULT_RR_MAX_MS, DEFAULT_RR_MIN_MS,
};
use hrv_sonify::sonify::{render_sonification, SonificationConfig};
use hrv_sonify::spectrogram::{compute_spectrogram, render_rgb, SpectrogramParams};
use hrv_sonify::wav::encode_wav;
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use wasm_bindgen::prelude::*;

const BLOB_CENTERS: [[f64; 2]; 3] = [[0.0, 0.0], [4.0, 1.0], [1.5, 4.0]];

/// Windowed HRV features of one pasted record.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct FeatureTable {
    csv: String,
    starts_s: Vec<f64>,
    /// Row-major, four columns.
    values: Vec<f64>,
    removed: usize,
}

#[wasm_bindgen]
impl FeatureTable {
    pub fn csv(&self) -> String {
        self.csv.clone()
    }

    pub fn rows(&self) -> usize {
        self.starts_s.len()
    }

    pub fn starts_s(&self) -> Vec<f64> {
        self.starts_s.clone()
    }

    /// Column `k`: 0 avnn, 1 sdnn, 2 rmssd, 3 pNNx.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values
            .iter()
            .skip(k)
            .step_by(N_FEATURES)
            .copied()
            .collect()
    }

    /// Intervals dropped by the artifact gate.
    pub fn removed(&self) -> usize {
        self.removed
    }
}

pub fn features_from_text(
    text: &str,
    unit: &str,
    window_s: f64,
    hop_s: f64,
    pnn_x_ms: f64,
) -> Result<FeatureTable, String> {
    let unit = match unit {
        "s" => RrUnit::Seconds,
        "ms" => RrUnit::Milliseconds,
        other => return Err(format!("unknown unit {other:?}")),
    };
    let rr = parse_rr_str(text, unit, "pasted", Path::new("<input>")).map_err(|e| e.to_string())?;
    let gated =
        filter_artifacts(&rr, DEFAULT_RR_MIN_MS, DEFAULT_RR_MAX_MS).map_err(|e| e.to_string())?;
    let params = WindowParams {
        window_ms: window_s * 1000.0,
        hop_ms: hop_s * 1000.0,
    };
    let matrix = windowed_features(&gated.series, params, PnnThreshold::inclusive(pnn_x_ms))
        .map_err(|e| e.to_string())?;
    let mut csv = Vec::new();
    matrix.write_csv(&mut csv).map_err(|e| e.to_string())?;
    Ok(FeatureTable {
        csv: String::from_utf8(csv).map_err(|e| e.to_string())?,
        starts_s: matrix
            .rows()
            .iter()
            .map(|r| r.window_start_ms / 1000.0)
            .collect(),
        values: matrix.rows().iter().flat_map(|r| r.values()).collect(),
        removed: gated.removed,
    })
}

#[wasm_bindgen]
pub fn rr_features(
    text: &str,
    unit: &str,
    window_s: f64,
    hop_s: f64,
    pnn_x_ms: f64,
) -> Result<FeatureTable, JsError> {
    features_from_text(text, unit, window_s, hop_s, pnn_x_ms).map_err(|e| JsError::new(&e))
}

/// Fuzzy c-means on three seeded 2-D Gaussian blobs.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct BlobClustering {
    points: Vec<f64>,
    labels: Vec<u32>,
    strength: Vec<f64>,
    centers: Vec<f64>,
    iterations: usize,
    objective: f64,
}

#[wasm_bindgen]
impl BlobClustering {
    /// Interleaved `x, y` in z-score units.
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    pub fn labels(&self) -> Vec<u32> {
        self.labels.clone()
    }

    /// Largest membership of each point.
    pub fn strength(&self) -> Vec<f64> {
        self.strength.clone()
    }

    /// Interleaved `x, y` per cluster.
    pub fn centers(&self) -> Vec<f64> {
        self.centers.clone()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn objective(&self) -> f64 {
        self.objective
    }
}

pub fn cluster_blobs(
    per_blob: usize,
    spread: f64,
    clusters: usize,
    fuzzifier: f64,
    seed: u32,
) -> Result<BlobClustering, String> {
    if !(spread > 0.0) {
        return Err(format!("spread must be positive, got {spread}"));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed as u64);
    let mut raw = Array2::zeros((per_blob * BLOB_CENTERS.len(), 2));
    for (b, c) in BLOB_CENTERS.iter().enumerate() {
        for i in 0..per_blob {
            for d in 0..2 {
                raw[[b * per_blob + i, d]] = c[d] + noise.sample(&mut rng);
            }
        }
    }
    let (z, _) = zscore(&raw, &["x", "y"]).map_err(|e| e.to_string())?;
    let config = FcmConfig {
        n_clusters: clusters,
        fuzzifier,
        seed: seed as u64,
        ..FcmConfig::default()
    };
    let r = fcm(&z, &config).map_err(|e| e.to_string())?;
    Ok(BlobClustering {
        points: z.iter().copied().collect(),
        labels: r.hard_labels().into_iter().map(|l| l as u32).collect(),
        strength: r
            .partition
            .columns()
            .into_iter()
            .map(|c| c.fold(0.0, |a: f64, &b| a.max(b)))
            .collect(),
        centers: r.centers.iter().copied().collect(),
        iterations: r.iterations_run,
        objective: r.final_objective(),
    })
}

#[wasm_bindgen]
pub fn fcm_blobs(
    per_blob: usize,
    spread: f64,
    clusters: usize,
    fuzzifier: f64,
    seed: u32,
) -> Result<BlobClustering, JsError> {
    cluster_blobs(per_blob, spread, clusters, fuzzifier, seed).map_err(|e| JsError::new(&e))
}

/// A rendered sonification and its spectrogram image.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Rendering {
    wav: Vec<u8>,
    rgba: Vec<u8>,
    width: u32,
    height: u32,
    duration_s: f64,
}

#[wasm_bindgen]
impl Rendering {
    /// PCM16 mono WAV file bytes.
    pub fn wav(&self) -> Vec<u8> {
        self.wav.clone()
    }

    /// Pixels ready for `ImageData`.
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_s
    }
}

pub fn render_series(
    values: &[f64],
    seg_dur_s: f64,
    f0_min_hz: f64,
    f0_max_hz: f64,
    width: u32,
    height: u32,
) -> Result<Rendering, String> {
    let config = SonificationConfig {
        seg_dur_s,
        f0_min_hz,
        f0_max_hz,
        ..SonificationConfig::default()
    };
    let audio = render_sonification(values, &config).map_err(|e| e.to_string())?;
    let wav = encode_wav(&audio).map_err(|e| e.to_string())?;
    let spec =
        compute_spectrogram(&audio, &SpectrogramParams::default()).map_err(|e| e.to_string())?;
    let rgb = render_rgb(&spec, width, height).map_err(|e| e.to_string())?;
    let rgba = rgb
        .chunks_exact(3)
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect();
    Ok(Rendering {
        wav,
        rgba,
        width,
        height,
        duration_s: audio.duration_s(),
    })
}

#[wasm_bindgen]
pub fn sonify(
    values: Vec<f64>,
    seg_dur_s: f64,
    f0_min_hz: f64,
    f0_max_hz: f64,
    width: u32,
    height: u32,
) -> Result<Rendering, JsError> {
    render_series(&values, seg_dur_s, f0_min_hz, f0_max_hz, width, height)
        .map_err(|e| JsError::new(&e))
}
