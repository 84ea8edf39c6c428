//! Data ingestion and synthesis: the 2-D two-Gaussian toy generator, the
//! IDX image/label reader with validation, a synthetic two-class digit
//! stand-in for offline runs, deterministic splitting, and the dataset
//! cache formats (CSV rows, or raw little-endian f64 with a JSON sidecar).

use crate::error::{Error, Result};
use crate::numerics::SeededRng;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub items: Vec<(Vec<f64>, Option<u8>)>,
    pub dim: usize,
    pub source: String,
}

impl LabeledDataset {
    pub fn new(items: Vec<(Vec<f64>, Option<u8>)>, source: impl Into<String>) -> Self {
        let dim = items.first().map(|(v, _)| v.len()).unwrap_or(0);
        assert!(items.iter().all(|(v, _)| v.len() == dim), "uniform dim");
        LabeledDataset {
            items,
            dim,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.items.iter().map(|(v, _)| v.clone()).collect()
    }

    pub fn labels(&self) -> Option<Vec<u8>> {
        self.items.iter().map(|(_, l)| *l).collect()
    }

    pub fn has_labels(&self) -> bool {
        self.items.iter().all(|(_, l)| l.is_some()) && !self.items.is_empty()
    }
}

/// Balanced draw from two isotropic Gaussians in the plane; labels are the
/// component of origin. Defaults elsewhere: means (-3, 0) / (3, 0),
/// covariance 0.5 I (well-separated modes).
pub fn gen_two_gaussian_toy(
    rng: &mut SeededRng,
    n: usize,
    means: [[f64; 2]; 2],
    cov_scale: f64,
) -> LabeledDataset {
    assert!(n >= 2, "need at least one point per component");
    let sd = cov_scale.sqrt();
    let items = (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let m = means[label as usize];
            let point = vec![
                m[0] + sd * rng.next_normal(),
                m[1] + sd * rng.next_normal(),
            ];
            (point, Some(label))
        })
        .collect();
    LabeledDataset::new(items, "two-gaussian-toy")
}

fn read_be_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or(Error::TruncatedFile {
        needed: at + 4,
        available: bytes.len(),
    })?;
    Ok(u32::from_be_bytes(b.try_into().unwrap()))
}

/// Read an IDX image/label pair: big-endian headers, magic 2051 for images
/// (count x rows x cols unsigned bytes) and 2049 for labels. Pixels are
/// scaled to [0, 1].
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<LabeledDataset> {
    let mut image_bytes = Vec::new();
    std::fs::File::open(images_path)?.read_to_end(&mut image_bytes)?;
    let magic = read_be_u32(&image_bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_IMAGES_MAGIC,
            actual: magic,
        });
    }
    let count = read_be_u32(&image_bytes, 4)? as usize;
    let rows = read_be_u32(&image_bytes, 8)? as usize;
    let cols = read_be_u32(&image_bytes, 12)? as usize;
    let pixels = rows * cols;
    let needed = 16 + count * pixels;
    if image_bytes.len() < needed {
        return Err(Error::TruncatedFile {
            needed,
            available: image_bytes.len(),
        });
    }

    let mut label_bytes = Vec::new();
    std::fs::File::open(labels_path)?.read_to_end(&mut label_bytes)?;
    let magic = read_be_u32(&label_bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::BadMagic {
            expected: IDX_LABELS_MAGIC,
            actual: magic,
        });
    }
    let label_count = read_be_u32(&label_bytes, 4)? as usize;
    if label_bytes.len() < 8 + label_count {
        return Err(Error::TruncatedFile {
            needed: 8 + label_count,
            available: label_bytes.len(),
        });
    }
    if label_count != count {
        return Err(Error::CountMismatch {
            images: count,
            labels: label_count,
        });
    }

    let items = (0..count)
        .map(|i| {
            let start = 16 + i * pixels;
            let v: Vec<f64> = image_bytes[start..start + pixels]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect();
            (v, Some(label_bytes[8 + i]))
        })
        .collect();
    Ok(LabeledDataset::new(
        items,
        images_path.display().to_string(),
    ))
}

/// Write vectors (values in [0, 1]) as an IDX image file.
pub fn write_idx_images(path: &Path, images: &[Vec<f64>], rows: usize, cols: usize) -> Result<()> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        assert_eq!(img.len(), rows * cols);
        for &p in img {
            out.push((p * 255.0).round().clamp(0.0, 255.0) as u8);
        }
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Synthetic two-class 28x28 stand-in for handwritten 0/1 digits: class 0
/// is an elliptical ring, class 1 a slanted vertical stroke, both with
/// jittered geometry. Serves offline demos and tests.
pub fn synthetic_digits(rng: &mut SeededRng, n: usize) -> LabeledDataset {
    let items = (0..n)
        .map(|i| {
            let label = (i % 2) as u8;
            let img = if label == 0 {
                synthetic_ring(rng)
            } else {
                synthetic_stroke(rng)
            };
            (img, Some(label))
        })
        .collect();
    LabeledDataset::new(items, "synthetic-digits")
}

fn synthetic_ring(rng: &mut SeededRng) -> Vec<f64> {
    let cx = 13.5 + rng.next_normal() * 0.8;
    let cy = 13.5 + rng.next_normal() * 0.8;
    let rx = 6.5 + rng.next_f64() * 2.0;
    let ry = 8.0 + rng.next_f64() * 2.5;
    let sharp = 12.0 + rng.next_f64() * 6.0;
    let mut img = vec![0.0; 28 * 28];
    for y in 0..28 {
        for x in 0..28 {
            let ex = (x as f64 - cx) / rx;
            let ey = (y as f64 - cy) / ry;
            let level = ex * ex + ey * ey - 1.0;
            img[y * 28 + x] = (-(level * level) * sharp).exp();
        }
    }
    img
}

fn synthetic_stroke(rng: &mut SeededRng) -> Vec<f64> {
    let x0 = 13.5 + rng.next_normal() * 2.0;
    let slant = rng.next_normal() * 0.12;
    let width = 1.4 + rng.next_f64() * 0.8;
    let mut img = vec![0.0; 28 * 28];
    for y in 4..24 {
        let center = x0 + slant * (y as f64 - 14.0);
        for x in 0..28 {
            let d = (x as f64 - center) / width;
            img[y * 28 + x] = (-(d * d)).exp();
        }
    }
    img
}

/// Order-preserving subset with labels in `keep`.
pub fn filter_classes(ds: &LabeledDataset, keep: &[u8]) -> Result<LabeledDataset> {
    if !ds.has_labels() {
        return Err(Error::NoLabels);
    }
    let items: Vec<_> = ds
        .items
        .iter()
        .filter(|(_, l)| keep.contains(&l.unwrap()))
        .cloned()
        .collect();
    Ok(LabeledDataset {
        items,
        dim: ds.dim,
        source: ds.source.clone(),
    })
}

/// Seed-deterministic shuffle split into disjoint, exhaustive train/test
/// subsets.
pub fn split(
    ds: &LabeledDataset,
    test_fraction: f64,
    rng: &mut SeededRng,
) -> (LabeledDataset, LabeledDataset) {
    assert!(
        test_fraction > 0.0 && test_fraction < 1.0,
        "test fraction must be in (0, 1)"
    );
    let mut order: Vec<usize> = (0..ds.len()).collect();
    rng.shuffle(&mut order);
    let n_test = ((ds.len() as f64) * test_fraction).round() as usize;
    let test_idx = &order[..n_test];
    let train_idx = &order[n_test..];
    let take = |idx: &[usize]| -> LabeledDataset {
        LabeledDataset {
            items: idx.iter().map(|&i| ds.items[i].clone()).collect(),
            dim: ds.dim,
            source: ds.source.clone(),
        }
    };
    (take(train_idx), take(test_idx))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct CacheManifest {
    pub dim: usize,
    pub count: usize,
    pub labels_present: bool,
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    path.with_file_name(name)
}

/// Persist a dataset: `.csv` writes one row per item with the label as the
/// final column when present; any other extension writes raw little-endian
/// f64 rows plus a JSON sidecar manifest.
pub fn save_cache(ds: &LabeledDataset, path: &Path) -> Result<()> {
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let mut out = String::new();
        for (v, label) in &ds.items {
            let mut row: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
            if let Some(l) = label {
                row.push(format!("{l}"));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        return Ok(());
    }
    let labels_present = ds.has_labels();
    let mut bytes = Vec::with_capacity(ds.len() * (ds.dim + labels_present as usize) * 8);
    for (v, label) in &ds.items {
        for x in v {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        if labels_present {
            bytes.extend_from_slice(&(label.unwrap() as f64).to_le_bytes());
        }
    }
    std::fs::write(path, bytes)?;
    let manifest = CacheManifest {
        dim: ds.dim,
        count: ds.len(),
        labels_present,
    };
    std::fs::write(
        sidecar_path(path),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

/// Load a dataset cache. CSV needs `labeled` to say whether the final
/// column is a label; the raw format reads its sidecar manifest.
pub fn load_cache(path: &Path, labeled: bool) -> Result<LabeledDataset> {
    if path.extension().and_then(|e| e.to_str()) == Some("csv") {
        let text = std::fs::read_to_string(path)?;
        let mut items = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut values: Vec<f64> = Vec::new();
            for field in line.split(',') {
                values.push(field.trim().parse::<f64>().map_err(|_| {
                    Error::Config(format!("bad number at line {}", lineno + 1))
                })?);
            }
            let label = if labeled {
                let l = values.pop().ok_or_else(|| {
                    Error::Config(format!("empty row at line {}", lineno + 1))
                })?;
                Some(l as u8)
            } else {
                None
            };
            items.push((values, label));
        }
        return Ok(LabeledDataset::new(items, path.display().to_string()));
    }

    let manifest: CacheManifest =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(path))?)?;
    let bytes = std::fs::read(path)?;
    let row_len = manifest.dim + manifest.labels_present as usize;
    let needed = manifest.count * row_len * 8;
    if bytes.len() < needed {
        return Err(Error::TruncatedFile {
            needed,
            available: bytes.len(),
        });
    }
    let mut items = Vec::with_capacity(manifest.count);
    for i in 0..manifest.count {
        let base = i * row_len * 8;
        let mut v = Vec::with_capacity(manifest.dim);
        for d in 0..manifest.dim {
            let at = base + d * 8;
            v.push(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()));
        }
        let label = if manifest.labels_present {
            let at = base + manifest.dim * 8;
            Some(f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as u8)
        } else {
            None
        };
        items.push((v, label));
    }
    Ok(LabeledDataset::new(items, path.display().to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn toy_generator_moments_and_balance() {
        let mut rng = SeededRng::new(1);
        let ds = gen_two_gaussian_toy(&mut rng, 2000, [[-3.0, 0.0], [3.0, 0.0]], 0.5);
        let mut count = [0usize; 2];
        let mut mean = [[0.0; 2]; 2];
        for (v, l) in &ds.items {
            let l = l.unwrap() as usize;
            count[l] += 1;
            mean[l][0] += v[0];
            mean[l][1] += v[1];
        }
        assert!(count[0].abs_diff(count[1]) <= 1);
        for l in 0..2 {
            mean[l][0] /= count[l] as f64;
            mean[l][1] /= count[l] as f64;
        }
        assert!((mean[0][0] + 3.0).abs() < 0.2 && mean[0][1].abs() < 0.2);
        assert!((mean[1][0] - 3.0).abs() < 0.2 && mean[1][1].abs() < 0.2);

        let tiny = gen_two_gaussian_toy(&mut rng, 2, [[-3.0, 0.0], [3.0, 0.0]], 0.5);
        assert_eq!(tiny.labels().unwrap(), vec![0, 1]);
    }

    #[test]
    fn toy_generator_is_seed_deterministic() {
        let a = gen_two_gaussian_toy(&mut SeededRng::new(5), 10, [[-3.0, 0.0], [3.0, 0.0]], 0.5);
        let b = gen_two_gaussian_toy(&mut SeededRng::new(5), 10, [[-3.0, 0.0], [3.0, 0.0]], 0.5);
        assert_eq!(a.items, b.items);
    }

    #[test]
    fn idx_round_trip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let images_path = dir.path().join("images.idx");
        let labels_path = dir.path().join("labels.idx");
        let imgs: Vec<Vec<f64>> = vec![
            (0..784).map(|i| (i % 256) as f64 / 255.0).collect(),
            (0..784).map(|i| ((i * 7) % 256) as f64 / 255.0).collect(),
        ];
        write_idx_images(&images_path, &imgs, 28, 28).unwrap();
        write_idx_labels(&labels_path, &[0, 1]).unwrap();
        let ds = load_mnist_idx(&images_path, &labels_path).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim, 784);
        for (orig, (got, _)) in imgs.iter().zip(&ds.items) {
            for (a, b) in orig.iter().zip(got) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(ds.labels().unwrap(), vec![0, 1]);
        // pixel 255 -> 1.0
        assert_eq!(ds.items[0].0[255], 1.0);
    }

    #[test]
    fn idx_bad_magic_and_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let images_path = dir.path().join("img.idx");
        let labels_path = dir.path().join("lab.idx");
        std::fs::write(&images_path, 99u32.to_be_bytes()).unwrap();
        write_idx_labels(&labels_path, &[0]).unwrap();
        assert!(matches!(
            load_mnist_idx(&images_path, &labels_path),
            Err(Error::BadMagic { .. })
        ));

        write_idx_images(&images_path, &[vec![0.0; 784]], 28, 28).unwrap();
        write_idx_labels(&labels_path, &[0, 1]).unwrap();
        assert!(matches!(
            load_mnist_idx(&images_path, &labels_path),
            Err(Error::CountMismatch {
                images: 1,
                labels: 2
            })
        ));
    }

    #[test]
    fn filter_classes_cases() {
        let mut rng = SeededRng::new(2);
        let ds = synthetic_digits(&mut rng, 10);
        let only_zero = filter_classes(&ds, &[0]).unwrap();
        assert_eq!(only_zero.len(), 5);
        assert!(only_zero.labels().unwrap().iter().all(|&l| l == 0));
        let all = filter_classes(&ds, &[0, 1]).unwrap();
        assert_eq!(all.len(), 10);
        let none = filter_classes(&ds, &[]).unwrap();
        assert!(none.is_empty());

        let unlabeled = LabeledDataset::new(vec![(vec![0.0], None)], "u");
        assert!(matches!(
            filter_classes(&unlabeled, &[0]),
            Err(Error::NoLabels)
        ));
    }

    #[test]
    fn split_half_on_ten() {
        let mut rng = SeededRng::new(3);
        let ds = synthetic_digits(&mut rng, 10);
        let (train, test) = split(&ds, 0.5, &mut rng);
        assert_eq!(train.len(), 5);
        assert_eq!(test.len(), 5);

        let (a_train, a_test) = split(&ds, 0.3, &mut SeededRng::new(7));
        let (b_train, b_test) = split(&ds, 0.3, &mut SeededRng::new(7));
        assert_eq!(a_train.items, b_train.items);
        assert_eq!(a_test.items, b_test.items);
    }

    proptest! {
        #[test]
        fn split_disjoint_and_exhaustive(n in 2usize..60, frac in 0.05f64..0.95, seed in 0u64..1000) {
            let mut rng = SeededRng::new(seed);
            let items: Vec<(Vec<f64>, Option<u8>)> =
                (0..n).map(|i| (vec![i as f64], None)).collect();
            let ds = LabeledDataset::new(items, "p");
            let (train, test) = split(&ds, frac, &mut rng);
            prop_assert_eq!(train.len() + test.len(), n);
            let mut seen: Vec<i64> = train
                .items
                .iter()
                .chain(&test.items)
                .map(|(v, _)| v[0] as i64)
                .collect();
            seen.sort_unstable();
            let expect: Vec<i64> = (0..n as i64).collect();
            prop_assert_eq!(seen, expect);
        }
    }

    #[test]
    fn synthetic_digits_classes_are_distinct() {
        let mut rng = SeededRng::new(4);
        let ds = synthetic_digits(&mut rng, 40);
        assert_eq!(ds.dim, 784);
        // mean within-class distance is far below cross-class distance
        let rings: Vec<&Vec<f64>> = ds
            .items
            .iter()
            .filter(|(_, l)| *l == Some(0))
            .map(|(v, _)| v)
            .collect();
        let strokes: Vec<&Vec<f64>> = ds
            .items
            .iter()
            .filter(|(_, l)| *l == Some(1))
            .map(|(v, _)| v)
            .collect();
        let dist = |a: &[f64], b: &[f64]| crate::numerics::squared_distance(a, b).sqrt();
        let within = dist(rings[0], rings[1]);
        let across = dist(rings[0], strokes[0]);
        assert!(across > within, "within {within}, across {across}");
    }

    #[test]
    fn cache_round_trip_csv_and_raw() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = SeededRng::new(5);
        let ds = gen_two_gaussian_toy(&mut rng, 8, [[-3.0, 0.0], [3.0, 0.0]], 0.5);

        let csv = dir.path().join("d.csv");
        save_cache(&ds, &csv).unwrap();
        let back = load_cache(&csv, true).unwrap();
        assert_eq!(back.len(), 8);
        assert_eq!(back.labels().unwrap(), ds.labels().unwrap());

        let raw = dir.path().join("d.f64");
        save_cache(&ds, &raw).unwrap();
        let back = load_cache(&raw, true).unwrap();
        assert_eq!(back.len(), 8);
        for ((a, _), (b, _)) in ds.items.iter().zip(&back.items) {
            for (x, y) in a.iter().zip(b) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
