//! IDX image/label ingestion (the classic big-endian digit format).

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use super::{DataError, Dataset, Targets};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

fn read_u32_be(r: &mut impl Read) -> Result<u32, DataError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_be_bytes(b))
}

/// Loads an IDX image file and its label file into a classification dataset.
/// Pixels are scaled to [0,1] by dividing by 255; images flatten row-major to
/// `rows * cols` features.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset, DataError> {
    let mut ir = BufReader::new(File::open(images_path)?);
    let magic = read_u32_be(&mut ir)?;
    if magic != IMAGE_MAGIC {
        return Err(DataError::IdxFormat(format!(
            "image file magic 0x{:08x}, expected 0x{:08x}",
            magic, IMAGE_MAGIC
        )));
    }
    let n_images = read_u32_be(&mut ir)? as usize;
    let rows = read_u32_be(&mut ir)? as usize;
    let cols = read_u32_be(&mut ir)? as usize;
    let mut pixels = vec![0u8; n_images * rows * cols];
    ir.read_exact(&mut pixels)?;

    let mut lr = BufReader::new(File::open(labels_path)?);
    let magic = read_u32_be(&mut lr)?;
    if magic != LABEL_MAGIC {
        return Err(DataError::IdxFormat(format!(
            "label file magic 0x{:08x}, expected 0x{:08x}",
            magic, LABEL_MAGIC
        )));
    }
    let n_labels = read_u32_be(&mut lr)? as usize;
    if n_labels != n_images {
        return Err(DataError::LengthMismatch {
            images: n_images,
            labels: n_labels,
        });
    }
    let mut raw_labels = vec![0u8; n_labels];
    lr.read_exact(&mut raw_labels)?;

    let features: Vec<f64> = pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let labels: Vec<usize> = raw_labels.iter().map(|&l| l as usize).collect();
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1).max(2);

    let d = rows * cols;
    let feature_names = (0..d).map(|i| format!("px{}_{}", i / cols, i % cols)).collect();
    Ok(Dataset {
        features,
        n_features: d,
        targets: Targets::Labels(labels),
        feature_names,
        n_classes,
        normalization: None,
        categorical_map: Vec::new(),
        rejected_rows: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    /// Builds IDX bytes for 2 images of 2x2 pixels plus matching labels.
    fn fixture() -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let images = dir.path().join("images.idx");
        let labels = dir.path().join("labels.idx");

        let mut ib: Vec<u8> = Vec::new();
        ib.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
        ib.extend_from_slice(&2u32.to_be_bytes()); // images
        ib.extend_from_slice(&2u32.to_be_bytes()); // rows
        ib.extend_from_slice(&2u32.to_be_bytes()); // cols
        ib.extend_from_slice(&[0, 51, 102, 255]); // image 0
        ib.extend_from_slice(&[255, 204, 153, 0]); // image 1
        File::create(&images).unwrap().write_all(&ib).unwrap();

        let mut lb: Vec<u8> = Vec::new();
        lb.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        lb.extend_from_slice(&2u32.to_be_bytes());
        lb.extend_from_slice(&[7, 1]);
        File::create(&labels).unwrap().write_all(&lb).unwrap();

        (dir, images, labels)
    }

    #[test]
    fn hand_built_fixture_parses_to_exact_pixels() {
        let (_dir, images, labels) = fixture();
        let data = load_idx(&images, &labels).unwrap();
        assert_eq!(data.n_rows(), 2);
        assert_eq!(data.n_features(), 4);
        assert_eq!(
            data.row(0),
            &[0.0, 51.0 / 255.0, 102.0 / 255.0, 1.0]
        );
        assert_eq!(
            data.row(1),
            &[1.0, 204.0 / 255.0, 153.0 / 255.0, 0.0]
        );
        assert_eq!(data.label(0), 7);
        assert_eq!(data.label(1), 1);
        assert_eq!(data.n_classes(), 8);
    }

    #[test]
    fn saturated_pixel_maps_to_one() {
        let (_dir, images, labels) = fixture();
        let data = load_idx(&images, &labels).unwrap();
        assert_eq!(data.row(0)[3], 1.0);
    }

    #[test]
    fn label_magic_on_image_file_is_rejected() {
        let (_dir, images, labels) = fixture();
        // Swap the files: the labels file starts with the label magic.
        match load_idx(&labels, &images) {
            Err(DataError::IdxFormat(msg)) => assert!(msg.contains("magic")),
            other => panic!("expected format error, got {:?}", other),
        }
    }

    #[test]
    fn image_label_count_mismatch_is_rejected() {
        let (dir, images, _labels) = fixture();
        let labels = dir.path().join("short.idx");
        let mut lb: Vec<u8> = Vec::new();
        lb.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
        lb.extend_from_slice(&1u32.to_be_bytes());
        lb.push(3);
        File::create(&labels).unwrap().write_all(&lb).unwrap();
        assert!(matches!(
            load_idx(&images, &labels),
            Err(DataError::LengthMismatch { images: 2, labels: 1 })
        ));
    }

    #[test]
    fn truncated_image_payload_is_an_error() {
        let (dir, images, labels) = fixture();
        let bytes = std::fs::read(&images).unwrap();
        let short = dir.path().join("short_images.idx");
        std::fs::write(&short, &bytes[..bytes.len() - 3]).unwrap();
        assert!(load_idx(&short, &labels).is_err());
    }
}
