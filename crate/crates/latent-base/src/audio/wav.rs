//! Minimal RIFF/WAVE reader and writer for the one format the pipeline
//! accepts: PCM (format code 1), 16-bit, mono, 8000 Hz, little-endian.
//! Resampling is refused, not implemented.

use super::{AudioSignal, SAMPLE_RATE};
use crate::error::{Error, Result};
use std::io::{Read, Write};
use std::path::Path;

fn read_u32(buf: &[u8], at: usize) -> Result<u32> {
    let bytes = buf
        .get(at..at + 4)
        .ok_or(Error::TruncatedFile {
            needed: at + 4,
            available: buf.len(),
        })?;
    Ok(u32::from_le_bytes(bytes.try_into().unwrap()))
}

fn read_u16(buf: &[u8], at: usize) -> Result<u16> {
    let bytes = buf
        .get(at..at + 2)
        .ok_or(Error::TruncatedFile {
            needed: at + 2,
            available: buf.len(),
        })?;
    Ok(u16::from_le_bytes(bytes.try_into().unwrap()))
}

/// Load a PCM 16-bit mono 8 kHz WAV file; samples are scaled to [-1, 1]
/// by dividing by 32768.
pub fn load_wav(path: &Path) -> Result<AudioSignal> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::UnsupportedFormat("not a RIFF/WAVE file".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None;
    let mut data: Option<&[u8]> = None;
    let mut at = 12;
    while at + 8 <= bytes.len() {
        let id = &bytes[at..at + 4];
        let size = read_u32(&bytes, at + 4)? as usize;
        let body_start = at + 8;
        if body_start + size > bytes.len() {
            return Err(Error::TruncatedFile {
                needed: body_start + size,
                available: bytes.len(),
            });
        }
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(Error::UnsupportedFormat("fmt chunk too small".into()));
                }
                fmt = Some((
                    read_u16(&bytes, body_start)?,      // format code
                    read_u16(&bytes, body_start + 2)?,  // channels
                    read_u32(&bytes, body_start + 4)?,  // sample rate
                    read_u16(&bytes, body_start + 14)?, // bits per sample
                ));
            }
            b"data" => data = Some(&bytes[body_start..body_start + size]),
            _ => {}
        }
        // chunks are word-aligned
        at = body_start + size + (size & 1);
    }

    let (format, channels, rate, bits) =
        fmt.ok_or_else(|| Error::UnsupportedFormat("missing fmt chunk".into()))?;
    if format != 1 || bits != 16 {
        return Err(Error::UnsupportedFormat(format!(
            "need PCM 16-bit, got format {format} with {bits} bits"
        )));
    }
    if channels != 1 {
        return Err(Error::UnsupportedFormat(format!(
            "need mono, got {channels} channels"
        )));
    }
    if rate != SAMPLE_RATE {
        return Err(Error::SampleRateMismatch {
            expected: SAMPLE_RATE,
            actual: rate,
        });
    }
    let data = data.ok_or_else(|| Error::UnsupportedFormat("missing data chunk".into()))?;
    let samples: Vec<f64> = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / 32768.0)
        .collect();
    Ok(AudioSignal::new(samples))
}

/// Write a PCM 16-bit mono 8 kHz WAV file. Samples must already lie in
/// [-1, 1]; quantization is round-to-nearest of `x * 32768`, so a
/// load/save round trip is within one quantization step per sample.
pub fn save_wav(signal: &AudioSignal, path: &Path) -> Result<()> {
    if signal
        .samples
        .iter()
        .any(|&v| !(-1.0..=1.0).contains(&v) || !v.is_finite())
    {
        return Err(Error::Config(
            "samples must be finite and within [-1, 1]".into(),
        ));
    }
    let data_len = signal.len() * 2;
    let mut out = Vec::with_capacity(44 + data_len);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&SAMPLE_RATE.to_le_bytes());
    out.extend_from_slice(&(SAMPLE_RATE * 2).to_le_bytes()); // byte rate
    out.extend_from_slice(&2u16.to_le_bytes()); // block align
    out.extend_from_slice(&16u16.to_le_bytes()); // bits
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(data_len as u32).to_le_bytes());
    for &v in &signal.samples {
        let q = (v * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&q.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    #[test]
    fn zeros_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.wav");
        save_wav(&AudioSignal::new(vec![0.0; 8000]), &path).unwrap();
        let back = load_wav(&path).unwrap();
        assert_eq!(back.len(), 8000);
        assert!(back.samples.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_scale_square_wave_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sq.wav");
        let wave: Vec<f64> = (0..1000)
            .map(|i| if i % 2 == 0 { 32767.0 / 32768.0 } else { -32767.0 / 32768.0 })
            .collect();
        save_wav(&AudioSignal::new(wave), &path).unwrap();
        let back = load_wav(&path).unwrap();
        for (i, &v) in back.samples.iter().enumerate() {
            let expect = if i % 2 == 0 { 32767.0 } else { -32767.0 } / 32768.0;
            assert_eq!(v, expect);
            assert!((v.abs() - 0.99997).abs() < 1e-4);
        }
    }

    #[test]
    fn round_trip_quantization_bound() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.wav");
        let mut rng = SeededRng::new(1);
        let samples: Vec<f64> = (0..5000).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
        save_wav(&AudioSignal::new(samples.clone()), &path).unwrap();
        let back = load_wav(&path).unwrap();
        for (a, b) in samples.iter().zip(&back.samples) {
            assert!((a - b).abs() <= 1.0 / 32768.0, "{a} vs {b}");
        }
    }

    #[test]
    fn wrong_sample_rate_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("44k.wav");
        // hand-build a 44.1 kHz header
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&40u32.to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&44100u32.to_le_bytes());
        out.extend_from_slice(&88200u32.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&[0, 0, 0, 0]);
        std::fs::write(&path, &out).unwrap();
        assert!(matches!(
            load_wav(&path),
            Err(Error::SampleRateMismatch {
                expected: 8000,
                actual: 44100
            })
        ));
    }

    #[test]
    fn stereo_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("st.wav");
        let mut out: Vec<u8> = Vec::new();
        out.extend_from_slice(b"RIFF");
        out.extend_from_slice(&40u32.to_le_bytes());
        out.extend_from_slice(b"WAVE");
        out.extend_from_slice(b"fmt ");
        out.extend_from_slice(&16u32.to_le_bytes());
        out.extend_from_slice(&1u16.to_le_bytes());
        out.extend_from_slice(&2u16.to_le_bytes());
        out.extend_from_slice(&8000u32.to_le_bytes());
        out.extend_from_slice(&32000u32.to_le_bytes());
        out.extend_from_slice(&4u16.to_le_bytes());
        out.extend_from_slice(&16u16.to_le_bytes());
        out.extend_from_slice(b"data");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&[0, 0, 0, 0]);
        std::fs::write(&path, &out).unwrap();
        assert!(matches!(
            load_wav(&path),
            Err(Error::UnsupportedFormat(_))
        ));
    }

    #[test]
    fn out_of_range_samples_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.wav");
        assert!(save_wav(&AudioSignal::new(vec![1.5]), &path).is_err());
    }
}
