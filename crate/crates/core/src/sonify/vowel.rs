//! Vowel formant tables and their interpolation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SonifyError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Formant {
    pub center_hz: f64,
    pub bandwidth_hz: f64,
    pub gain_db: f64,
}

/// Four formants with strictly increasing centers.
#[derive(Debug, Clone, PartialEq)]
pub struct VowelState {
    pub formants: [Formant; 4],
}

impl VowelState {
    pub fn from_arrays(center_hz: [f64; 4], bandwidth_hz: [f64; 4], gain_db: [f64; 4]) -> Self {
        Self {
            formants: std::array::from_fn(|k| Formant {
                center_hz: center_hz[k],
                bandwidth_hz: bandwidth_hz[k],
                gain_db: gain_db[k],
            }),
        }
    }

    /// Tenor "a".
    pub fn tenor_a() -> Self {
        Self::from_arrays(
            [650.0, 1080.0, 2650.0, 2900.0],
            [80.0, 90.0, 120.0, 130.0],
            [0.0, -6.0, -7.0, -8.0],
        )
    }

    /// Tenor "i".
    pub fn tenor_i() -> Self {
        Self::from_arrays(
            [290.0, 1870.0, 2800.0, 3250.0],
            [40.0, 90.0, 100.0, 120.0],
            [0.0, -15.0, -18.0, -20.0],
        )
    }

    pub fn lowest_center_hz(&self) -> f64 {
        self.formants[0].center_hz
    }

    pub fn validate(&self, sample_rate_hz: u32) -> Result<(), SonifyError> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let mut prev = 0.0;
        for (k, f) in self.formants.iter().enumerate() {
            if !(f.center_hz > prev && f.center_hz < nyquist) {
                return Err(SonifyError::InvalidFormant(format!(
                    "formant {} center {} Hz must be above {prev} Hz and below {nyquist} Hz",
                    k + 1,
                    f.center_hz
                )));
            }
            if !(f.bandwidth_hz > 0.0 && f.bandwidth_hz.is_finite()) {
                return Err(SonifyError::InvalidFormant(format!(
                    "formant {} bandwidth must be positive, got {}",
                    k + 1,
                    f.bandwidth_hz
                )));
            }
            if !f.gain_db.is_finite() {
                return Err(SonifyError::InvalidFormant(format!(
                    "formant {} gain is not finite",
                    k + 1
                )));
            }
            prev = f.center_hz;
        }
        Ok(())
    }
}

/// Per-formant linear interpolation `(1 - alpha) * a + alpha * i` of center,
/// bandwidth and gain. The endpoints are returned exactly.
pub fn interpolate_vowel(alpha: f64, a: &VowelState, i: &VowelState) -> VowelState {
    if alpha <= 0.0 {
        return a.clone();
    }
    if alpha >= 1.0 {
        return i.clone();
    }
    let lerp = |p: f64, q: f64| (1.0 - alpha) * p + alpha * q;
    VowelState {
        formants: std::array::from_fn(|k| {
            let (fa, fi) = (&a.formants[k], &i.formants[k]);
            Formant {
                center_hz: lerp(fa.center_hz, fi.center_hz),
                bandwidth_hz: lerp(fa.bandwidth_hz, fi.bandwidth_hz),
                gain_db: lerp(fa.gain_db, fi.gain_db),
            }
        }),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct VowelEntry {
    center_hz: [f64; 4],
    bw_hz: [f64; 4],
    gain_db: [f64; 4],
}

impl From<VowelEntry> for VowelState {
    fn from(e: VowelEntry) -> Self {
        VowelState::from_arrays(e.center_hz, e.bw_hz, e.gain_db)
    }
}

impl From<&VowelState> for VowelEntry {
    fn from(v: &VowelState) -> Self {
        VowelEntry {
            center_hz: v.formants.map(|f| f.center_hz),
            bw_hz: v.formants.map(|f| f.bandwidth_hz),
            gain_db: v.formants.map(|f| f.gain_db),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VowelTableFile {
    vowel_a: VowelEntry,
    vowel_i: VowelEntry,
}

/// The two interpolation endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct VowelTable {
    pub a: VowelState,
    pub i: VowelState,
}

impl Default for VowelTable {
    fn default() -> Self {
        Self {
            a: VowelState::tenor_a(),
            i: VowelState::tenor_i(),
        }
    }
}

impl VowelTable {
    /// Parse the TOML vowel table:
    ///
    /// ```toml
    /// [vowel_a]
    /// center_hz = [650, 1080, 2650, 2900]
    /// bw_hz = [80, 90, 120, 130]
    /// gain_db = [0, -6, -7, -8]
    ///
    /// [vowel_i]
    /// center_hz = [290, 1870, 2800, 3250]
    /// bw_hz = [40, 90, 100, 120]
    /// gain_db = [0, -15, -18, -20]
    /// ```
    pub fn from_toml_str(text: &str) -> Result<Self, SonifyError> {
        let file: VowelTableFile =
            toml::from_str(text).map_err(|e| SonifyError::VowelTable(e.to_string()))?;
        Ok(Self {
            a: file.vowel_a.into(),
            i: file.vowel_i.into(),
        })
    }

    pub fn load(path: &Path) -> Result<Self, SonifyError> {
        let text = std::fs::read_to_string(path).map_err(|e| SonifyError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        let file = VowelTableFile {
            vowel_a: (&self.a).into(),
            vowel_i: (&self.i).into(),
        };
        toml::to_string(&file).expect("vowel table serializes")
    }
}
