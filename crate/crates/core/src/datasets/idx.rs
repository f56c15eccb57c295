//! IDX container reader/writer (MNIST, EMNIST).
//!
//! ```text
//! images: 0x00000803 | n: u32 | rows: u32 | cols: u32 | n*rows*cols bytes
//! labels: 0x00000801 | n: u32 | n bytes
//! ```
//! All header integers are big-endian. Files may be gzip-compressed; that is
//! detected from the `1f 8b` prefix rather than the file name.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use super::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdxOptions {
    /// Swap rows and columns of every image (EMNIST stores images transposed).
    pub transpose: bool,
    pub n_classes: usize,
}

impl Default for IdxOptions {
    fn default() -> Self {
        Self {
            transpose: false,
            n_classes: 10,
        }
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn truncated(path: &Path, what: &str) -> Error {
    Error::io(
        path,
        io::Error::new(io::ErrorKind::UnexpectedEof, format!("truncated IDX file ({what})")),
    )
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

struct Header {
    dims: Vec<usize>,
    payload_offset: usize,
}

fn parse_header(bytes: &[u8], path: &Path, expected_magic: u32) -> Result<Header> {
    if bytes.len() < 4 {
        return Err(truncated(path, "magic"));
    }
    let magic = be_u32(bytes, 0);
    if magic != expected_magic {
        return Err(Error::Format(format!(
            "{}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}",
            path.display()
        )));
    }
    let n_dims = (magic & 0xff) as usize;
    let payload_offset = 4 + 4 * n_dims;
    if bytes.len() < payload_offset {
        return Err(truncated(path, "dimension header"));
    }
    let dims: Vec<usize> = (0..n_dims).map(|d| be_u32(bytes, 4 + 4 * d) as usize).collect();
    let expected_len = payload_offset + dims.iter().product::<usize>();
    if bytes.len() < expected_len {
        return Err(truncated(path, "payload"));
    }
    Ok(Header {
        dims,
        payload_offset,
    })
}

/// Loads an image/label IDX pair with default options (10 classes, no transpose).
pub fn load_idx<S: Scalar>(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset<S>> {
    load_idx_with(images_path, labels_path, IdxOptions::default())
}

/// Loads an image/label IDX pair. Pixels map to `byte / 255`.
pub fn load_idx_with<S: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
    opts: IdxOptions,
) -> Result<Dataset<S>> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();

    let img = read_all(images_path)?;
    let img_header = parse_header(&img, images_path, IDX_IMAGES_MAGIC)?;
    let lab = read_all(labels_path)?;
    let lab_header = parse_header(&lab, labels_path, IDX_LABELS_MAGIC)?;

    let (n, rows, cols) = (img_header.dims[0], img_header.dims[1], img_header.dims[2]);
    let n_labels = lab_header.dims[0];
    if n != n_labels {
        return Err(Error::Consistency(format!(
            "{n} images but {n_labels} labels ({} / {})",
            images_path.display(),
            labels_path.display()
        )));
    }

    let pixels = &img[img_header.payload_offset..img_header.payload_offset + n * rows * cols];
    let scale = S::from_f64_lossy(255.0);
    let features: Vec<S> = if opts.transpose {
        let mut out = Vec::with_capacity(pixels.len());
        for image in pixels.chunks_exact(rows * cols) {
            for c in 0..cols {
                for r in 0..rows {
                    out.push(S::from_f64_lossy(image[r * cols + c] as f64) / scale);
                }
            }
        }
        out
    } else {
        pixels.iter().map(|&b| S::from_f64_lossy(b as f64) / scale).collect()
    };

    let labels: Vec<usize> = lab[lab_header.payload_offset..lab_header.payload_offset + n]
        .iter()
        .map(|&b| b as usize)
        .collect();

    let (out_rows, out_cols) = if opts.transpose { (cols, rows) } else { (rows, cols) };
    Dataset::new(features, rows * cols, labels, opts.n_classes)?.with_image_shape(out_rows, out_cols)
}

/// Writes `data` as an uncompressed IDX image/label pair.
///
/// Features are mapped back with `round(v * 255)`, so anything loaded through
/// [`load_idx`] round-trips exactly. Datasets without an image shape are
/// written as `1 x n_dims` images.
pub fn write_idx<S: Scalar>(
    data: &Dataset<S>,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let images_path = images_path.as_ref();
    let labels_path = labels_path.as_ref();
    let (rows, cols) = data.image_shape().unwrap_or((1, data.n_dims()));

    let to_u32 = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::InvalidInput(format!("{what} {v} does not fit an IDX header")))
    };

    let mut w = BufWriter::new(File::create(images_path).map_err(|e| Error::io(images_path, e))?);
    let mut header = Vec::with_capacity(16);
    header.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    header.extend_from_slice(&to_u32(data.len(), "sample count")?.to_be_bytes());
    header.extend_from_slice(&to_u32(rows, "rows")?.to_be_bytes());
    header.extend_from_slice(&to_u32(cols, "cols")?.to_be_bytes());
    let mut payload = Vec::with_capacity(data.features().len());
    for &v in data.features() {
        let byte = (v.as_f64() * 255.0).round();
        if !(0.0..=255.0).contains(&byte) {
            return Err(Error::InvalidInput(format!("feature {v} outside [0, 1]")));
        }
        payload.push(byte as u8);
    }
    w.write_all(&header)
        .and_then(|_| w.write_all(&payload))
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(images_path, e))?;

    let mut w = BufWriter::new(File::create(labels_path).map_err(|e| Error::io(labels_path, e))?);
    let mut bytes = Vec::with_capacity(8 + data.len());
    bytes.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&to_u32(data.len(), "sample count")?.to_be_bytes());
    for &l in data.labels() {
        let l = u8::try_from(l).map_err(|_| Error::InvalidInput(format!("label {l} does not fit a byte")))?;
        bytes.push(l);
    }
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(labels_path, e))?;
    Ok(())
}
