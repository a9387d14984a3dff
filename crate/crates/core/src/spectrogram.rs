//! Short-time DFT magnitude spectrograms and their PNG rendering.
//!
//! Magnitudes are in dB relative to full scale: a full-scale sine whose
//! frequency sits on a bin reads 0 dB at that bin. Everything below the floor
//! is clamped to the floor.

use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::Array2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::fmt::sig;
use crate::sonify::AudioBuffer;

pub const DEFAULT_DFT_SIZE: usize = 2048;
pub const DEFAULT_HOP: usize = 512;
pub const DEFAULT_FLOOR_DB: f64 = -90.0;
pub const DEFAULT_WIDTH: u32 = 900;
pub const DEFAULT_HEIGHT: u32 = 300;
/// A cepstral peak this close to the global maximum wins over longer periods.
const OCTAVE_RATIO: f64 = 0.5;

#[derive(Debug, Error)]
pub enum SpectrogramError {
    #[error("dft size must be a power of two >= 256, got {0}")]
    DftSize(usize),
    #[error("hop must satisfy 0 < hop <= dft size, got {0}")]
    Hop(usize),
    #[error("floor must be a negative finite dB value, got {0}")]
    Floor(f64),
    #[error("buffer has {len} samples, shorter than the dft size {dft_size}")]
    TooShort { len: usize, dft_size: usize },
    #[error("image size must be positive, got {0}x{1}")]
    ImageSize(u32, u32),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("png encoding: {0}")]
    Png(#[from] png::EncodingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Window {
    #[default]
    Hann,
}

impl Window {
    /// Periodic window of length `n`.
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..n)
                .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramParams {
    pub dft_size: usize,
    pub hop: usize,
    pub window: Window,
    pub floor_db: f64,
}

impl Default for SpectrogramParams {
    fn default() -> Self {
        Self {
            dft_size: DEFAULT_DFT_SIZE,
            hop: DEFAULT_HOP,
            window: Window::Hann,
            floor_db: DEFAULT_FLOOR_DB,
        }
    }
}

impl SpectrogramParams {
    pub fn validate(&self) -> Result<(), SpectrogramError> {
        if self.dft_size < 256 || !self.dft_size.is_power_of_two() {
            return Err(SpectrogramError::DftSize(self.dft_size));
        }
        if self.hop == 0 || self.hop > self.dft_size {
            return Err(SpectrogramError::Hop(self.hop));
        }
        if !(self.floor_db < 0.0 && self.floor_db.is_finite()) {
            return Err(SpectrogramError::Floor(self.floor_db));
        }
        Ok(())
    }
}

/// `n_frames x n_bins` magnitudes in dBFS.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub frames: Array2<f64>,
    pub frame_hop_s: f64,
    pub bin_hz: f64,
    pub sample_rate_hz: u32,
    pub floor_db: f64,
    pub dft_size: usize,
}

impl Spectrogram {
    pub fn n_frames(&self) -> usize {
        self.frames.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.frames.ncols()
    }

    /// Index of the strongest bin in every frame.
    pub fn peak_bins(&self) -> Vec<usize> {
        self.frames
            .rows()
            .into_iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .fold(
                        (0, f64::NEG_INFINITY),
                        |b, (i, &v)| if v > b.1 { (i, v) } else { b },
                    )
                    .0
            })
            .collect()
    }

    /// Per-frame fundamental bin for a harmonic signal with f0 in `[lo_hz, hi_hz]`.
    ///
    /// A formant-filtered pulse train can have its fundamental far below the
    /// floor, so the strongest bin says little about pitch. The pitch period is
    /// read from the real cepstrum of each frame instead: the shortest
    /// quefrency in `fs/hi_hz ..= fs/lo_hz` holding a local maximum of at
    /// least half the largest value. The period maps to the nearest bin.
    pub fn fundamental_bins(&self, lo_hz: f64, hi_hz: f64) -> Vec<usize> {
        let n = self.dft_size;
        let fs = self.sample_rate_hz as f64;
        let q_lo = ((fs / hi_hz).floor() as usize).max(1);
        let q_hi = ((fs / lo_hz).ceil() as usize).min(n / 2);
        let ifft = FftPlanner::new().plan_fft_inverse(n);
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        self.frames
            .rows()
            .into_iter()
            .map(|row| {
                for (k, c) in buf.iter_mut().enumerate() {
                    let b = if k <= n / 2 { k } else { n - k };
                    *c = Complex64::new(row[b], 0.0);
                }
                ifft.process(&mut buf);
                let c = |q: usize| buf[q].re;
                let top = (q_lo..=q_hi).map(c).fold(f64::NEG_INFINITY, f64::max);
                // rahmonics at 2T0, 3T0 can rival T0; take the shortest strong peak
                let q = (q_lo..=q_hi)
                    .find(|&q| c(q) >= OCTAVE_RATIO * top && c(q) >= c(q - 1) && c(q) >= c(q + 1))
                    .unwrap_or(q_lo);
                (n as f64 / q as f64).round() as usize
            })
            .collect()
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_hz
    }

    /// Plain-text description of the image axes.
    pub fn axes_text(&self) -> String {
        let mut s = String::new();
        let duration = (self.n_frames().saturating_sub(1)) as f64 * self.frame_hop_s
            + self.dft_size as f64 / self.sample_rate_hz as f64;
        let _ = writeln!(
            s,
            "x: time 0 .. {} s (left to right), {} frames, hop {} s",
            sig(duration),
            self.n_frames(),
            sig(self.frame_hop_s)
        );
        let _ = writeln!(
            s,
            "y: frequency 0 .. {} Hz (bottom to top), {} bins, {} Hz per bin",
            sig(self.sample_rate_hz as f64 / 2.0),
            self.n_bins(),
            sig(self.bin_hz)
        );
        let _ = writeln!(s, "colour: magnitude {} .. 0 dBFS", sig(self.floor_db));
        let _ = writeln!(s, "dft_size: {}", self.dft_size);
        let _ = writeln!(s, "sample_rate_hz: {}", self.sample_rate_hz);
        s
    }
}

/// Number of frames for `n` samples: `floor((n - dft_size) / hop) + 1`.
pub fn frame_count(n: usize, dft_size: usize, hop: usize) -> usize {
    if n < dft_size {
        0
    } else {
        (n - dft_size) / hop + 1
    }
}

pub fn compute_spectrogram(
    buffer: &AudioBuffer,
    params: &SpectrogramParams,
) -> Result<Spectrogram, SpectrogramError> {
    params.validate()?;
    let n = params.dft_size;
    if buffer.samples.len() < n {
        return Err(SpectrogramError::TooShort {
            len: buffer.samples.len(),
            dft_size: n,
        });
    }
    let window = params.window.coefficients(n);
    let wsum: f64 = window.iter().sum();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n);
    let n_frames = frame_count(buffer.samples.len(), n, params.hop);
    let n_bins = n / 2 + 1;
    let mut frames = Array2::from_elem((n_frames, n_bins), params.floor_db);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for f in 0..n_frames {
        let start = f * params.hop;
        for (k, c) in buf.iter_mut().enumerate() {
            *c = Complex64::new(buffer.samples[start + k] * window[k], 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (b, out) in frames.row_mut(f).iter_mut().enumerate() {
            // one-sided amplitude; DC and Nyquist are not doubled
            let scale = if b == 0 || b == n / 2 { 1.0 } else { 2.0 };
            let amp = scale * buf[b].norm() / wsum;
            let db = 20.0 * amp.log10();
            *out = if db > params.floor_db {
                db
            } else {
                params.floor_db
            };
        }
    }
    Ok(Spectrogram {
        frames,
        frame_hop_s: params.hop as f64 / buffer.sample_rate_hz as f64,
        bin_hz: buffer.sample_rate_hz as f64 / n as f64,
        sample_rate_hz: buffer.sample_rate_hz,
        floor_db: params.floor_db,
        dft_size: n,
    })
}

/// Colour ramp stops `(position, rgb)`, linearly interpolated to 256 entries.
pub const COLOUR_STOPS: [(f64, [u8; 3]); 7] = [
    (0.00, [0, 0, 0]),
    (0.13, [0, 0, 90]),
    (0.30, [90, 0, 140]),
    (0.50, [190, 0, 80]),
    (0.68, [240, 70, 0]),
    (0.85, [255, 190, 0]),
    (1.00, [255, 255, 230]),
];

/// The 256-entry colour lookup table.
pub fn colour_table() -> [[u8; 3]; 256] {
    std::array::from_fn(|i| {
        let t = i as f64 / 255.0;
        let k = COLOUR_STOPS
            .windows(2)
            .position(|w| t <= w[1].0)
            .unwrap_or(COLOUR_STOPS.len() - 2);
        let (t0, c0) = COLOUR_STOPS[k];
        let (t1, c1) = COLOUR_STOPS[k + 1];
        let u = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
        std::array::from_fn(|ch| {
            (c0[ch] as f64 + u * (c1[ch] as f64 - c0[ch] as f64)).round() as u8
        })
    })
}

/// Table index for a magnitude: `floor_db` maps to 0, 0 dBFS and above to 255.
pub fn colour_index(db: f64, floor_db: f64) -> u8 {
    let t = ((db - floor_db) / -floor_db).clamp(0.0, 1.0);
    (t * 255.0).floor() as u8
}

/// RGB8 raster, row-major from the top row. Time runs left to right and
/// frequency bottom to top; both axes are nearest-neighbour resampled.
pub fn render_rgb(
    spec: &Spectrogram,
    width: u32,
    height: u32,
) -> Result<Vec<u8>, SpectrogramError> {
    if width == 0 || height == 0 {
        return Err(SpectrogramError::ImageSize(width, height));
    }
    let lut = colour_table();
    let (nf, nb) = (spec.n_frames(), spec.n_bins());
    let (w, h) = (width as usize, height as usize);
    let mut out = Vec::with_capacity(w * h * 3);
    for row in 0..h {
        let bin = ((h - 1 - row) * nb / h).min(nb.saturating_sub(1));
        for x in 0..w {
            let frame = (x * nf / w).min(nf.saturating_sub(1));
            let db = if nf == 0 {
                spec.floor_db
            } else {
                spec.frames[[frame, bin]]
            };
            out.extend_from_slice(&lut[colour_index(db, spec.floor_db) as usize]);
        }
    }
    Ok(out)
}

/// Write an 8-bit RGB PNG of exactly `width x height` pixels.
pub fn render_png(
    spec: &Spectrogram,
    path: impl AsRef<Path>,
    height: u32,
    width: u32,
) -> Result<(), SpectrogramError> {
    let path = path.as_ref();
    let rgb = render_rgb(spec, width, height)?;
    let io_err = |source| SpectrogramError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::create(path).map_err(io_err)?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header()?;
    writer.write_image_data(&rgb)?;
    writer.finish()?;
    Ok(())
}

/// Sidecar path for a PNG: `out.png` -> `out.axes.txt`.
pub fn axes_path(png_path: &Path) -> PathBuf {
    png_path.with_extension("axes.txt")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, n: usize, amp: f64) -> AudioBuffer {
        AudioBuffer {
            samples: (0..n)
                .map(|i| amp * (2.0 * std::f64::consts::PI * freq * i as f64 / 44100.0).sin())
                .collect(),
            sample_rate_hz: 44100,
        }
    }

    #[test]
    fn frame_count_formula() {
        assert_eq!(frame_count(2048, 2048, 512), 1);
        assert_eq!(frame_count(2048, 2048, 1), 1);
        assert_eq!(frame_count(2047, 2048, 512), 0);
        assert_eq!(frame_count(10_000, 2048, 512), (10_000 - 2048) / 512 + 1);
    }

    #[test]
    fn exact_length_gives_one_frame() {
        let s = compute_spectrogram(
            &tone(1000.0, 2048, 0.5),
            &SpectrogramParams {
                hop: 7,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(s.n_frames(), 1);
        assert_eq!(s.n_bins(), 1025);
    }

    #[test]
    fn silence_sits_on_floor() {
        let buf = AudioBuffer {
            samples: vec![0.0; 8192],
            sample_rate_hz: 44100,
        };
        let s = compute_spectrogram(&buf, &SpectrogramParams::default()).unwrap();
        assert!(s.frames.iter().all(|&v| v == -90.0));
        let rgb = render_rgb(&s, 10, 5).unwrap();
        assert!(rgb.chunks(3).all(|p| p == colour_table()[0]));
    }

    #[test]
    fn on_bin_full_scale_sine_reads_zero_db() {
        let bin_hz = 44100.0 / 2048.0;
        let s = compute_spectrogram(
            &tone(20.0 * bin_hz, 4096, 1.0),
            &SpectrogramParams::default(),
        )
        .unwrap();
        for f in 0..s.n_frames() {
            assert!(s.frames[[f, 20]].abs() < 1e-9);
        }
        assert!(s.frames.iter().all(|&v| v >= -90.0));
    }

    #[test]
    fn parameter_validation() {
        let buf = tone(440.0, 4096, 1.0);
        for p in [
            SpectrogramParams {
                dft_size: 1000,
                ..Default::default()
            },
            SpectrogramParams {
                dft_size: 128,
                ..Default::default()
            },
            SpectrogramParams {
                hop: 0,
                ..Default::default()
            },
            SpectrogramParams {
                hop: 4096,
                ..Default::default()
            },
            SpectrogramParams {
                floor_db: 0.0,
                ..Default::default()
            },
        ] {
            assert!(compute_spectrogram(&buf, &p).is_err());
        }
        let short = tone(440.0, 100, 1.0);
        assert!(matches!(
            compute_spectrogram(&short, &SpectrogramParams::default()),
            Err(SpectrogramError::TooShort { .. })
        ));
    }

    #[test]
    fn colour_map_is_monotone() {
        let mut prev = 0;
        for i in 0..=1000 {
            let db = -90.0 + 95.0 * i as f64 / 1000.0;
            let idx = colour_index(db, -90.0);
            assert!(idx >= prev);
            prev = idx;
        }
        assert_eq!(colour_index(-90.0, -90.0), 0);
        assert_eq!(colour_index(0.0, -90.0), 255);
        let lut = colour_table();
        assert_eq!(lut[0], [0, 0, 0]);
        assert_eq!(lut[255], [255, 255, 230]);
    }

    #[test]
    fn orientation_bottom_left_is_first_frame_lowest_bin() {
        let mut frames = Array2::from_elem((4, 8), -90.0);
        frames[[0, 0]] = 0.0;
        let s = Spectrogram {
            frames,
            frame_hop_s: 0.01,
            bin_hz: 10.0,
            sample_rate_hz: 160,
            floor_db: -90.0,
            dft_size: 14,
        };
        let (w, h) = (8u32, 16u32);
        let rgb = render_rgb(&s, w, h).unwrap();
        let px = |x: usize, y: usize| &rgb[(y * w as usize + x) * 3..][..3];
        let hot = colour_table()[255];
        assert_eq!(px(0, h as usize - 1), hot);
        assert_ne!(px(0, 0), hot);
        assert_ne!(px(w as usize - 1, h as usize - 1), hot);
    }

    #[test]
    fn fundamental_of_filtered_pulse_train() {
        use crate::sonify::{formant_filter, pulse_oscillator, VowelState};
        for f0 in [110.0, 200.0, 330.0, 440.0] {
            let src = pulse_oscillator(f0, 16_384, 44100).unwrap();
            let mut out = formant_filter(&src, &VowelState::tenor_a(), 44100).unwrap();
            let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            out.iter_mut().for_each(|v| *v *= 0.89 / peak);
            let s = compute_spectrogram(
                &AudioBuffer {
                    samples: out,
                    sample_rate_hz: 44100,
                },
                &SpectrogramParams::default(),
            )
            .unwrap();
            let expect = (f0 / s.bin_hz).round() as usize;
            for b in s.fundamental_bins(99.0, 484.0).into_iter().skip(2) {
                assert!(b.abs_diff(expect) <= 1, "{f0}: {b} vs {expect}");
            }
        }
    }

    #[test]
    fn png_has_requested_size() {
        let s =
            compute_spectrogram(&tone(440.0, 8192, 1.0), &SpectrogramParams::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.png");
        render_png(&s, &path, 120, 333).unwrap();
        let decoder = png::Decoder::new(std::io::BufReader::new(File::open(&path).unwrap()));
        let reader = decoder.read_info().unwrap();
        let info = reader.info();
        assert_eq!((info.width, info.height), (333, 120));
        assert_eq!(info.color_type, png::ColorType::Rgb);
        assert_eq!(info.bit_depth, png::BitDepth::Eight);
    }
}
