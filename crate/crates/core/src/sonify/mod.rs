//! Formant-synthesis sonification of a feature series.
//!
//! Each data point becomes one segment of sound. The min-max normalized value
//! `v` sets both the fundamental (linear map into `[f0_min, f0_max]`) and the
//! vowel position `alpha = v` between tenor "a" and tenor "i". A band-limited
//! pulse source is run through four Butterworth bandpass sections in series
//! whose parameters follow the interpolated vowel.

pub mod filter;
pub mod oscillator;
pub mod vowel;

use std::path::PathBuf;

use thiserror::Error;

pub use filter::{formant_filter, Biquad, FormantBank};
pub use oscillator::{harmonic_count, pulse_oscillator, PulseOscillator};
pub use vowel::{interpolate_vowel, Formant, VowelState, VowelTable};

/// Coefficients are redesigned every this many samples.
pub const CONTROL_BLOCK: usize = 64;
/// Final peak level relative to full scale (about -1 dBFS).
pub const PEAK_TARGET: f64 = 0.89;

#[derive(Debug, Error)]
pub enum SonifyError {
    #[error("nothing to sonify: empty series")]
    Empty,
    #[error("series contains non-finite values")]
    NonFinite,
    #[error("f0 {f0_hz} Hz outside (0, {nyquist_hz}) Hz")]
    F0OutOfRange { f0_hz: f64, nyquist_hz: f64 },
    #[error("invalid formant: {0}")]
    InvalidFormant(String),
    #[error("unstable section at {center_hz} Hz (pole radius {radius})")]
    Unstable { center_hz: f64, radius: f64 },
    #[error("invalid sonification config: {0}")]
    InvalidConfig(String),
    #[error("vowel table: {0}")]
    VowelTable(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SonificationConfig {
    pub sample_rate_hz: u32,
    /// Seconds of audio per data point.
    pub seg_dur_s: f64,
    pub f0_min_hz: f64,
    pub f0_max_hz: f64,
    pub vowels: VowelTable,
    /// Linear control glide at each segment boundary.
    pub glide_ms: f64,
}

impl Default for SonificationConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 44100,
            seg_dur_s: 0.5,
            f0_min_hz: 110.0,
            f0_max_hz: 440.0,
            vowels: VowelTable::default(),
            glide_ms: 50.0,
        }
    }
}

impl SonificationConfig {
    pub fn validate(&self) -> Result<(), SonifyError> {
        let bad = |m: String| Err(SonifyError::InvalidConfig(m));
        if self.sample_rate_hz < 8000 {
            return bad(format!("sample rate {} Hz is too low", self.sample_rate_hz));
        }
        if !(self.seg_dur_s > 0.0 && self.seg_dur_s.is_finite()) {
            return bad(format!(
                "seg_dur_s must be positive, got {}",
                self.seg_dur_s
            ));
        }
        if !(self.glide_ms >= 0.0 && self.glide_ms.is_finite()) {
            return bad(format!("glide_ms must be >= 0, got {}", self.glide_ms));
        }
        self.vowels.a.validate(self.sample_rate_hz)?;
        self.vowels.i.validate(self.sample_rate_hz)?;
        // The pitch range has to sit under the first formant of at least one
        // vowel endpoint; the default "i" has F1 = 290 Hz, inside 110-440 Hz.
        let f1_ceiling = self
            .vowels
            .a
            .lowest_center_hz()
            .max(self.vowels.i.lowest_center_hz());
        if !(self.f0_min_hz > 0.0 && self.f0_min_hz < self.f0_max_hz && self.f0_max_hz < f1_ceiling)
        {
            return bad(format!(
                "need 0 < f0_min < f0_max < {f1_ceiling} Hz, got {}..{}",
                self.f0_min_hz, self.f0_max_hz
            ));
        }
        Ok(())
    }

    /// Samples in the render of `n_values` points.
    pub fn total_samples(&self, n_values: usize) -> usize {
        (n_values as f64 * self.seg_dur_s * self.sample_rate_hz as f64).round() as usize
    }
}

/// Mono samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioBuffer {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Min-max scaling to `[0, 1]`; a constant series maps to 0.5 everywhere.
pub fn normalize_series(values: &[f64]) -> Result<Vec<f64>, SonifyError> {
    if values.is_empty() {
        return Err(SonifyError::Empty);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(SonifyError::NonFinite);
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == lo {
        return Ok(vec![0.5; values.len()]);
    }
    Ok(values.iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// `(f0, alpha)` for a normalized value.
pub fn map_controls(v: f64, config: &SonificationConfig) -> (f64, f64) {
    let v = v.clamp(0.0, 1.0);
    (
        config.f0_min_hz + v * (config.f0_max_hz - config.f0_min_hz),
        v,
    )
}

/// Normalized control value at every sample, with a linear glide of
/// `glide_ms` from the previous segment's value at each boundary.
fn control_track(norm: &[f64], config: &SonificationConfig) -> Vec<f64> {
    let fs = config.sample_rate_hz as f64;
    let total = config.total_samples(norm.len());
    let glide = (config.glide_ms * 1e-3 * fs).round() as usize;
    let seg_start = |s: usize| (s as f64 * config.seg_dur_s * fs).round() as usize;
    let mut out = Vec::with_capacity(total);
    for (s, &v) in norm.iter().enumerate() {
        let (b, e) = (seg_start(s), seg_start(s + 1).min(total));
        for n in b..e {
            let t = n - b;
            let c = if s > 0 && t < glide {
                let prev = norm[s - 1];
                prev + (v - prev) * t as f64 / glide as f64
            } else {
                v
            };
            out.push(c);
        }
    }
    out
}

/// Render a feature series to audio.
pub fn render_sonification(
    values: &[f64],
    config: &SonificationConfig,
) -> Result<AudioBuffer, SonifyError> {
    config.validate()?;
    let norm = normalize_series(values)?;
    let track = control_track(&norm, config);

    let mut osc = PulseOscillator::new(config.sample_rate_hz);
    let start_vowel = interpolate_vowel(
        map_controls(track.first().copied().unwrap_or(0.5), config).1,
        &config.vowels.a,
        &config.vowels.i,
    );
    let mut bank = FormantBank::new(&start_vowel, config.sample_rate_hz)?;
    let mut samples = Vec::with_capacity(track.len());
    for block in track.chunks(CONTROL_BLOCK) {
        let (_, alpha) = map_controls(block[0], config);
        bank.set_vowel(&interpolate_vowel(
            alpha,
            &config.vowels.a,
            &config.vowels.i,
        ))?;
        for &v in block {
            let (f0, _) = map_controls(v, config);
            samples.push(bank.process(osc.tick(f0)?));
        }
    }

    let peak = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        let g = PEAK_TARGET / peak;
        samples
            .iter_mut()
            .for_each(|v| *v = (*v * g).clamp(-1.0, 1.0));
    }
    Ok(AudioBuffer {
        samples,
        sample_rate_hz: config.sample_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_examples() {
        assert_eq!(
            normalize_series(&[800.0, 900.0, 1000.0]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(normalize_series(&[5.0, 5.0, 5.0]).unwrap(), vec![0.5; 3]);
        assert_eq!(normalize_series(&[0.0, 1.0]).unwrap(), vec![0.0, 1.0]);
        assert!(matches!(normalize_series(&[]), Err(SonifyError::Empty)));
        assert!(matches!(
            normalize_series(&[1.0, f64::NAN]),
            Err(SonifyError::NonFinite)
        ));
    }

    #[test]
    fn control_mapping_endpoints() {
        let c = SonificationConfig::default();
        assert_eq!(map_controls(0.0, &c), (110.0, 0.0));
        assert_eq!(map_controls(1.0, &c), (440.0, 1.0));
        assert_eq!(map_controls(0.5, &c), (275.0, 0.5));
    }

    #[test]
    fn default_config_is_valid() {
        SonificationConfig::default().validate().unwrap();
    }

    #[test]
    fn invalid_configs() {
        let base = SonificationConfig::default();
        for c in [
            SonificationConfig {
                seg_dur_s: 0.0,
                ..base.clone()
            },
            SonificationConfig {
                f0_min_hz: 500.0,
                ..base.clone()
            },
            SonificationConfig {
                f0_max_hz: 700.0,
                ..base.clone()
            },
            SonificationConfig {
                glide_ms: -1.0,
                ..base.clone()
            },
        ] {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn duration_of_ten_values() {
        let values: Vec<f64> = (0..10).map(|i| 800.0 + i as f64).collect();
        let buf = render_sonification(&values, &SonificationConfig::default()).unwrap();
        assert_eq!(buf.samples.len(), 220_500);
        assert!((buf.peak() - PEAK_TARGET).abs() < 1e-12);
    }

    #[test]
    fn glide_interpolates_between_segments() {
        let c = SonificationConfig {
            seg_dur_s: 0.1,
            glide_ms: 10.0,
            ..SonificationConfig::default()
        };
        let track = control_track(&[0.0, 1.0], &c);
        assert_eq!(track.len(), 8820);
        assert_eq!(track[4409], 0.0);
        assert_eq!(track[4410], 0.0);
        assert!((track[4410 + 147] - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(track[4410 + 441], 1.0);
    }

    #[test]
    fn render_is_deterministic() {
        let v = [3.0, 1.0, 4.0, 1.0, 5.0];
        let c = SonificationConfig::default();
        assert_eq!(
            render_sonification(&v, &c).unwrap(),
            render_sonification(&v, &c).unwrap()
        );
    }
}
