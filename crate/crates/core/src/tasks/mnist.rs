//! IDX file ingestion (big-endian magic 0x00000803 / 0x00000801) and the
//! crop/pool/standardize preprocessing pipeline.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tasks::data::{DataBundle, Dataset, Split};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq)]
pub struct RawMnist {
    pub rows: usize,
    pub cols: usize,
    /// raw pixel bytes, row-major per image
    pub pixels: Vec<u8>,
    pub labels: Vec<u8>,
}

impl RawMnist {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let sz = self.rows * self.cols;
        &self.pixels[i * sz..(i + 1) * sz]
    }

    /// Pixel values scaled to [0,1].
    pub fn scaled_image(&self, i: usize) -> Vec<f64> {
        self.image(i).iter().map(|&p| p as f64 / 255.0).collect()
    }

    /// Re-serialize a subset in IDX format (byte-exact for full round trips).
    pub fn serialize_images(&self, indices: &[usize]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
        out.extend_from_slice(&(indices.len() as u32).to_be_bytes());
        out.extend_from_slice(&(self.rows as u32).to_be_bytes());
        out.extend_from_slice(&(self.cols as u32).to_be_bytes());
        for &i in indices {
            out.extend_from_slice(self.image(i));
        }
        out
    }

    pub fn serialize_labels(&self, indices: &[usize]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
        out.extend_from_slice(&(indices.len() as u32).to_be_bytes());
        for &i in indices {
            out.push(self.labels[i]);
        }
        out
    }
}

fn be_u32(bytes: &[u8], off: usize) -> Result<u32> {
    bytes
        .get(off..off + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Parse("IDX file truncated in header".into()))
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse(format!("bad IDX image magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    let data = &bytes[16..];
    if data.len() != count * rows * cols {
        return Err(Error::Parse(format!(
            "IDX image payload is {} bytes, header promises {}",
            data.len(),
            count * rows * cols
        )));
    }
    Ok((count, rows, cols, data))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<(usize, &[u8])> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse(format!("bad IDX label magic {magic:#010x}")));
    }
    let count = be_u32(bytes, 4)? as usize;
    let data = &bytes[8..];
    if data.len() != count {
        return Err(Error::Parse(format!(
            "IDX label payload is {} bytes, header promises {count}",
            data.len()
        )));
    }
    Ok((count, data))
}

/// Load an images/labels IDX pair.
pub fn load_mnist_idx(images_path: &Path, labels_path: &Path) -> Result<RawMnist> {
    let img_bytes = std::fs::read(images_path)?;
    let lbl_bytes = std::fs::read(labels_path)?;
    let (count, rows, cols, pixels) = parse_idx_images(&img_bytes)?;
    let (lcount, labels) = parse_idx_labels(&lbl_bytes)?;
    if count != lcount {
        return Err(Error::Validation(format!("{count} images but {lcount} labels")));
    }
    Ok(RawMnist { rows, cols, pixels: pixels.to_vec(), labels: labels.to_vec() })
}

/// Center-crop a 28×28 image to 24×24 and average-pool to `target`×`target`
/// (target 4 → kernel 6, target 6 → kernel 4), flattened row-major.
pub fn preprocess(image: &[f64], target: usize) -> Result<Vec<f64>> {
    if image.len() != 28 * 28 {
        return Err(Error::Validation(format!("expected 28×28 image, got {} pixels", image.len())));
    }
    let kernel = match target {
        4 => 6,
        6 => 4,
        other => return Err(Error::Validation(format!("pool target must be 4 or 6, got {other}"))),
    };
    let mut out = Vec::with_capacity(target * target);
    for by in 0..target {
        for bx in 0..target {
            let mut acc = 0.0;
            for dy in 0..kernel {
                for dx in 0..kernel {
                    let y = 2 + by * kernel + dy;
                    let x = 2 + bx * kernel + dx;
                    acc += image[y * 28 + x];
                }
            }
            out.push(acc / (kernel * kernel) as f64);
        }
    }
    Ok(out)
}

/// Standardize all splits with the train split's global mean/std, then scale
/// by π so encoder rotations span a full period.
pub fn standardize_bundle(bundle: &mut DataBundle) {
    let train: Vec<f64> = bundle.train.features.iter().flatten().copied().collect();
    let n = train.len().max(1) as f64;
    let mean = train.iter().sum::<f64>() / n;
    let var = train.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-9);
    for ds in [&mut bundle.train, &mut bundle.valid, &mut bundle.test] {
        for f in &mut ds.features {
            for v in f.iter_mut() {
                *v = (*v - mean) / std * std::f64::consts::PI;
            }
        }
    }
}

/// Assemble a classification bundle from raw MNIST: keep the listed digit
/// classes (relabelled by position), 95%/5% train/valid split, seeded
/// 300-image test subset, pooled and standardized.
pub fn build_mnist_task(
    raw: &RawMnist,
    test_raw: &RawMnist,
    classes: &[usize],
    target: usize,
    seed: u64,
) -> Result<DataBundle> {
    let class_of = |label: u8| classes.iter().position(|&c| c == label as usize);
    let mut feats = Vec::new();
    let mut labels = Vec::new();
    for i in 0..raw.len() {
        if let Some(cls) = class_of(raw.labels[i]) {
            feats.push(preprocess(&raw.scaled_image(i), target)?);
            labels.push(cls);
        }
    }
    let n_train = (feats.len() * 95) / 100;
    let mut test_feats = Vec::new();
    let mut test_labels = Vec::new();
    let mut keep: Vec<usize> = (0..test_raw.len()).filter(|&i| class_of(test_raw.labels[i]).is_some()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    keep.shuffle(&mut rng);
    keep.truncate(300);
    keep.sort_unstable();
    for &i in &keep {
        test_feats.push(preprocess(&test_raw.scaled_image(i), target)?);
        test_labels.push(class_of(test_raw.labels[i]).unwrap());
    }

    let n_classes = classes.len();
    let mut bundle = DataBundle {
        train: Dataset {
            features: feats[..n_train].to_vec(),
            labels: labels[..n_train].to_vec(),
            n_classes,
            split: Split::Train,
        },
        valid: Dataset {
            features: feats[n_train..].to_vec(),
            labels: labels[n_train..].to_vec(),
            n_classes,
            split: Split::Valid,
        },
        test: Dataset { features: test_feats, labels: test_labels, n_classes, split: Split::Test },
    };
    standardize_bundle(&mut bundle);
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture(n: usize) -> RawMnist {
        let mut pixels = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            for p in 0..28 * 28 {
                pixels.push(((i * 37 + p * 11) % 256) as u8);
            }
            labels.push((i % 10) as u8);
        }
        RawMnist { rows: 28, cols: 28, pixels, labels }
    }

    #[test]
    fn idx_round_trip_is_byte_exact() {
        let raw = fixture(7);
        let ids: Vec<usize> = (0..7).collect();
        let img_bytes = raw.serialize_images(&ids);
        let lbl_bytes = raw.serialize_labels(&ids);
        let (count, rows, cols, data) = parse_idx_images(&img_bytes).unwrap();
        assert_eq!((count, rows, cols), (7, 28, 28));
        assert_eq!(data, &raw.pixels[..]);
        let (lcount, ldata) = parse_idx_labels(&lbl_bytes).unwrap();
        assert_eq!(lcount, 7);
        assert_eq!(ldata, &raw.labels[..]);
        // and the reconstruction re-serializes identically
        let again = RawMnist { rows, cols, pixels: data.to_vec(), labels: ldata.to_vec() };
        assert_eq!(again.serialize_images(&ids), img_bytes);
    }

    #[test]
    fn truncated_and_bad_magic_rejected() {
        let raw = fixture(3);
        let mut bytes = raw.serialize_images(&[0, 1, 2]);
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(parse_idx_images(&bytes), Err(Error::Parse(_))));
        let mut bad = raw.serialize_images(&[0]);
        bad[3] = 0x99;
        assert!(matches!(parse_idx_images(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn pooling_preserves_mean_and_shape() {
        let raw = fixture(1);
        let img = raw.scaled_image(0);
        let pooled = preprocess(&img, 4).unwrap();
        assert_eq!(pooled.len(), 16);
        // mean of pooled = mean of cropped region
        let mut crop_mean = 0.0;
        for y in 2..26 {
            for x in 2..26 {
                crop_mean += img[y * 28 + x];
            }
        }
        crop_mean /= 576.0;
        let pooled_mean: f64 = pooled.iter().sum::<f64>() / 16.0;
        assert!((pooled_mean - crop_mean).abs() < 1e-12);

        let constant = vec![0.4; 28 * 28];
        for v in preprocess(&constant, 6).unwrap() {
            assert!((v - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn task_assembly_filters_and_splits() {
        let raw = fixture(40);
        let bundle = build_mnist_task(&raw, &raw, &[3, 6], 4, 5).unwrap();
        assert_eq!(bundle.train.n_classes, 2);
        assert!(bundle.train.labels.iter().all(|&l| l < 2));
        assert_eq!(bundle.train.features[0].len(), 16);
        // 8 samples of classes {3,6} in the fixture; 95% → 7 train, 1 valid
        assert_eq!(bundle.train.len() + bundle.valid.len(), 8);
        assert!(!bundle.test.is_empty());
    }
}
