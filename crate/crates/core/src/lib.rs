//! HRV feature extraction, fuzzy c-means clustering and vocal formant
//! sonification of RR-interval records.
//!
//! The stages are independent modules that the [`pipeline`] wires together:
//!
//! - [`rr`]: RR text parsing and artifact filtering
//! - [`features`]: AVNN, SDNN, RMSSD and pNNx per record or sliding window
//! - [`clustering`]: z-score normalization and fuzzy c-means
//! - [`sonify`]: band-limited pulse source through a vowel formant cascade
//! - [`wav`]: 16-bit PCM mono WAV files
//! - [`spectrogram`]: DFT magnitude spectrograms rendered to PNG

pub mod clustering;
pub mod features;
pub mod fmt;
pub mod pipeline;
pub mod rr;
pub mod sonify;
pub mod spectrogram;
pub mod wav;
