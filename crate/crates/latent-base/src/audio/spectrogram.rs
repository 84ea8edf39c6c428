//! Short-time magnitude spectra via direct DFT (quadratic cost is fine at
//! the scales the figures need). One-sided bins, Hann analysis window.

use super::{hann_window, AudioSignal};
use crate::error::{Error, Result};

pub const DEFAULT_FFT_SIZE: usize = 256;
pub const DEFAULT_SPEC_HOP: usize = 128;

/// Magnitudes laid out as `bins x frames`.
#[derive(Debug, Clone)]
pub struct SpectrogramGrid {
    pub bins: usize,
    pub frames: usize,
    /// Row-major `[bin][frame]` magnitudes.
    pub magnitudes: Vec<f64>,
}

impl SpectrogramGrid {
    pub fn at(&self, bin: usize, frame: usize) -> f64 {
        self.magnitudes[bin * self.frames + frame]
    }

    /// Frequency bin with the largest total magnitude across frames.
    pub fn peak_bin(&self) -> usize {
        let mut best = 0;
        let mut best_mag = f64::NEG_INFINITY;
        for b in 0..self.bins {
            let total: f64 = (0..self.frames).map(|f| self.at(b, f)).sum();
            if total > best_mag {
                best_mag = total;
                best = b;
            }
        }
        best
    }

    /// Header row `frame_0,frame_1,...`, then one row per frequency bin.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for f in 0..self.frames {
            if f > 0 {
                out.push(',');
            }
            out.push_str(&format!("frame_{f}"));
        }
        out.push('\n');
        for b in 0..self.bins {
            for f in 0..self.frames {
                if f > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{}", self.at(b, f)));
            }
            out.push('\n');
        }
        out
    }
}

/// Hann-windowed short-time DFT magnitudes, one-sided
/// (`fft_size/2 + 1` bins).
pub fn spectrogram(signal: &AudioSignal, fft_size: usize, hop: usize) -> Result<SpectrogramGrid> {
    if signal.len() < fft_size {
        return Err(Error::TooShort {
            needed: fft_size,
            actual: signal.len(),
        });
    }
    assert!(hop >= 1);
    let window = hann_window(fft_size);
    let n_frames = (signal.len() - fft_size) / hop + 1;
    let bins = fft_size / 2 + 1;
    let mut magnitudes = vec![0.0; bins * n_frames];

    // direct DFT with precomputed twiddle tables
    let mut cos_table = vec![0.0; fft_size * bins];
    let mut sin_table = vec![0.0; fft_size * bins];
    for k in 0..bins {
        for n in 0..fft_size {
            let angle = -2.0 * std::f64::consts::PI * (k * n) as f64 / fft_size as f64;
            cos_table[k * fft_size + n] = angle.cos();
            sin_table[k * fft_size + n] = angle.sin();
        }
    }

    let mut frame = vec![0.0; fft_size];
    for f in 0..n_frames {
        let start = f * hop;
        for (i, w) in window.iter().enumerate() {
            frame[i] = signal.samples[start + i] * w;
        }
        for k in 0..bins {
            let (mut re, mut im) = (0.0, 0.0);
            let ct = &cos_table[k * fft_size..(k + 1) * fft_size];
            let st = &sin_table[k * fft_size..(k + 1) * fft_size];
            for n in 0..fft_size {
                re += frame[n] * ct[n];
                im += frame[n] * st[n];
            }
            magnitudes[k * n_frames + f] = (re * re + im * im).sqrt();
        }
    }
    Ok(SpectrogramGrid {
        bins,
        frames: n_frames,
        magnitudes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::SAMPLE_RATE;

    #[test]
    fn pure_tone_peak_bin() {
        // 1 kHz at 8 kHz with fft 256: bin = 1000/8000*256 = 32
        let samples: Vec<f64> = (0..4096)
            .map(|n| {
                (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / SAMPLE_RATE as f64).sin() * 0.5
            })
            .collect();
        let grid = spectrogram(&AudioSignal::new(samples), 256, 128).unwrap();
        assert_eq!(grid.bins, 129);
        assert_eq!(grid.peak_bin(), 32);
    }

    #[test]
    fn peak_bins_across_frequencies() {
        for i in 1..=10 {
            let freq = 300.0 * i as f64;
            let samples: Vec<f64> = (0..4096)
                .map(|n| {
                    (2.0 * std::f64::consts::PI * freq * n as f64 / SAMPLE_RATE as f64).sin()
                })
                .collect();
            let grid = spectrogram(&AudioSignal::new(samples), 256, 128).unwrap();
            let expect = (freq / SAMPLE_RATE as f64 * 256.0).round() as usize;
            let got = grid.peak_bin();
            assert!(
                got.abs_diff(expect) <= 1,
                "freq {freq}: bin {got}, expected {expect}"
            );
        }
    }

    #[test]
    fn silence_is_all_zero() {
        let grid = spectrogram(&AudioSignal::new(vec![0.0; 1024]), 256, 128).unwrap();
        assert!(grid.magnitudes.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn four_point_impulse_dft() {
        // length-4 impulse [1,0,0,0] has |X_k| = 1 for all k; the Hann
        // window zeroes sample 0, so place the impulse at the window peak
        // (n = 2, weight 1) instead and check against the hand DFT of
        // [0,0,1,0]: |X_k| = 1.
        let mut samples = vec![0.0; 4];
        samples[2] = 1.0;
        let grid = spectrogram(&AudioSignal::new(samples), 4, 4).unwrap();
        assert_eq!(grid.bins, 3);
        assert_eq!(grid.frames, 1);
        for b in 0..3 {
            assert!((grid.at(b, 0) - 1.0).abs() < 1e-12, "bin {b}: {}", grid.at(b, 0));
        }
    }

    #[test]
    fn csv_layout() {
        let grid = spectrogram(&AudioSignal::new(vec![0.0; 512]), 256, 128).unwrap();
        let csv = grid.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "frame_0,frame_1,frame_2");
        assert_eq!(csv.lines().count(), 1 + 129);
    }
}
