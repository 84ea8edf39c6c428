//! Audio front/back end: 8 kHz mono signals, Hann-windowed 100 ms chunks
//! with 50% overlap, overlap-add synthesis, and model-driven generation.
//! The periodic Hann window sums to exactly 1 at 50% hop, so analysis
//! windowing alone makes overlap-add reconstruction exact on the interior.

mod spectrogram;
mod wav;

pub use spectrogram::{spectrogram, SpectrogramGrid, DEFAULT_FFT_SIZE, DEFAULT_SPEC_HOP};
pub use wav::{load_wav, save_wav};

use crate::error::{Error, Result};
use crate::hmm::GaussianHMM;
use crate::implicit::{BaseDistribution, ImplicitModel};
use crate::numerics::SeededRng;

pub const SAMPLE_RATE: u32 = 8000;
/// 100 ms at 8 kHz.
pub const CHUNK_LEN: usize = 800;
/// 50 ms hop (50% overlap).
pub const HOP: usize = 400;

/// Mono audio at the fixed 8 kHz rate, samples in [-1, 1].
#[derive(Debug, Clone)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>) -> Self {
        AudioSignal {
            samples,
            sample_rate: SAMPLE_RATE,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Windowed, overlapping frames of a signal.
#[derive(Debug, Clone)]
pub struct ChunkSet {
    pub chunks: Vec<Vec<f64>>,
    pub hop: usize,
    pub window: Vec<f64>,
}

/// Periodic Hann window (denominator N, not N-1): shifted copies at 50%
/// hop sum to exactly 1.
pub fn hann_window(len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()))
        .collect()
}

/// Split into Hann-windowed chunks of 800 samples at hop 400; a trailing
/// remainder shorter than one chunk is dropped.
pub fn chunk(signal: &AudioSignal) -> Result<ChunkSet> {
    if signal.len() < CHUNK_LEN {
        return Err(Error::TooShort {
            needed: CHUNK_LEN,
            actual: signal.len(),
        });
    }
    let window = hann_window(CHUNK_LEN);
    let n_chunks = (signal.len() - CHUNK_LEN) / HOP + 1;
    let mut chunks = Vec::with_capacity(n_chunks);
    for t in 0..n_chunks {
        let start = t * HOP;
        let frame: Vec<f64> = signal.samples[start..start + CHUNK_LEN]
            .iter()
            .zip(&window)
            .map(|(s, w)| s * w)
            .collect();
        chunks.push(frame);
    }
    Ok(ChunkSet {
        chunks,
        hop: HOP,
        window,
    })
}

/// Sum chunks at hop offsets; output length `(n-1)*hop + 800`. No synthesis
/// window is applied (the analysis Hann already satisfies the overlap-add
/// identity).
pub fn overlap_add(chunks: &ChunkSet) -> AudioSignal {
    assert!(!chunks.chunks.is_empty(), "need at least one chunk");
    let out_len = (chunks.chunks.len() - 1) * chunks.hop + CHUNK_LEN;
    let mut samples = vec![0.0; out_len];
    for (t, frame) in chunks.chunks.iter().enumerate() {
        let start = t * chunks.hop;
        for (i, v) in frame.iter().enumerate() {
            samples[start + i] += v;
        }
    }
    AudioSignal::new(samples)
}

/// Result of decoding an HMM sample path into audio.
#[derive(Debug, Clone)]
pub struct GeneratedAudio {
    pub signal: AudioSignal,
    pub states: Vec<usize>,
    /// Fraction of output samples that hit the [-1, 1] clip.
    pub clip_fraction: f64,
}

/// Sample `frames` latent vectors from the HMM base, decode each to an
/// 800-sample chunk, and overlap-add. Output is hard-clipped to [-1, 1]
/// with a warning when more than 1% of samples clip.
pub fn generate_audio(
    model: &ImplicitModel,
    rng: &mut SeededRng,
    frames: usize,
) -> Result<GeneratedAudio> {
    assert!(frames >= 1);
    let hmm: &GaussianHMM = match &model.base {
        BaseDistribution::Hmm(h) => h,
        BaseDistribution::Gmm(_) => {
            return Err(Error::Config(
                "audio generation requires an HMM base distribution".into(),
            ))
        }
    };
    if model.mapping.data_dim() != CHUNK_LEN {
        return Err(Error::DimensionMismatch {
            expected: CHUNK_LEN,
            actual: model.mapping.data_dim(),
            context: "audio decoder output length",
        });
    }
    let (latents, states) = hmm.sample(rng, frames);
    let mut chunks = Vec::with_capacity(frames);
    for h in &latents.frames {
        chunks.push(model.mapping.decode(h)?);
    }
    let set = ChunkSet {
        chunks,
        hop: HOP,
        window: hann_window(CHUNK_LEN),
    };
    let mut signal = overlap_add(&set);
    let mut clipped = 0usize;
    for v in signal.samples.iter_mut() {
        if *v > 1.0 || *v < -1.0 {
            clipped += 1;
            *v = v.clamp(-1.0, 1.0);
        }
    }
    let clip_fraction = clipped as f64 / signal.len() as f64;
    if clip_fraction > 0.01 {
        log::warn!(
            "generated audio clipped at {:.2}% of samples",
            clip_fraction * 100.0
        );
    }
    Ok(GeneratedAudio {
        signal,
        states,
        clip_fraction,
    })
}
