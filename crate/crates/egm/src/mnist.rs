//! MNIST IDX parsing, balanced subsampling and cyclic shifts.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Side length of an MNIST canvas.
pub const CANVAS: usize = 28;

/// Largest random shift per axis: half the canvas.
pub const MAX_SHIFT: i32 = (CANVAS / 2) as i32;

pub const NUM_CLASSES: usize = 10;

/// Grayscale raster with intensities in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Argument(format!(
                "image of {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Image {
            width,
            height,
            pixels: vec![0.0; width * height],
        }
    }

    /// Builds an image from raw 0-255 bytes.
    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        Image::new(
            width,
            height,
            bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    /// Intensity at column `x`, row `y`.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn mass(&self) -> f64 {
        self.pixels.iter().sum()
    }

    pub fn scaled(&self, factor: f64) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|p| p * factor).collect(),
        }
    }

    /// Mirror about the vertical axis (x -> width - 1 - x).
    pub fn mirrored(&self) -> Image {
        let mut out = Image::zeros(self.width, self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                out.set(self.width - 1 - x, y, self.get(x, y));
            }
        }
        out
    }

    /// Quantizes back to the 0-255 byte encoding.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|p| (p * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Which MNIST partition a set was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetSource {
    Model,
    Test,
}

/// Images with digit labels. `ids` are indices into the originating file.
#[derive(Debug, Clone)]
pub struct LabelledSet {
    pub images: Vec<Image>,
    pub labels: Vec<u8>,
    pub ids: Vec<usize>,
    pub source: SetSource,
}

impl LabelledSet {
    pub fn new(images: Vec<Image>, labels: Vec<u8>, source: SetSource) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::Argument(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= NUM_CLASSES) {
            return Err(Error::Argument(format!("label {bad} is not a digit")));
        }
        let ids = (0..images.len()).collect();
        Ok(LabelledSet {
            images,
            labels,
            ids,
            source,
        })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        counts
    }

    /// Loads `<prefix>-images-idx3-ubyte` and `<prefix>-labels-idx1-ubyte`
    /// from `dir`, with prefix `train` for models and `t10k` for tests.
    pub fn load(dir: &Path, source: SetSource) -> Result<Self> {
        let (images_path, labels_path) = file_paths(dir, source);
        let image_bytes =
            std::fs::read(&images_path).map_err(|e| Error::io(&images_path, e))?;
        let label_bytes =
            std::fs::read(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
        let images = parse_idx_images(&image_bytes)?;
        let labels = parse_idx_labels(&label_bytes)?;
        LabelledSet::new(images, labels, source)
    }
}

fn read_u32_be(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Length {
            expected: offset + 4,
            actual: bytes.len(),
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let actual = read_u32_be(bytes, 0)?;
    if actual != expected {
        return Err(Error::Magic { expected, actual });
    }
    Ok(())
}

/// Parses an IDX3 image stream. Intensities are divided by 255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<Image>> {
    check_magic(bytes, IMAGE_MAGIC)?;
    let count = read_u32_be(bytes, 4)? as usize;
    let rows = read_u32_be(bytes, 8)? as usize;
    let cols = read_u32_be(bytes, 12)? as usize;
    let per_image = rows * cols;
    let expected = 16 + count * per_image;
    if bytes.len() < expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len(),
        });
    }
    bytes[16..expected]
        .chunks_exact(per_image.max(1))
        .take(count)
        .map(|chunk| Image::from_bytes(cols, rows, chunk))
        .collect()
}

/// Parses an IDX1 label stream; every label must be a digit.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABEL_MAGIC)?;
    let count = read_u32_be(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Length {
            expected,
            actual: bytes.len(),
        });
    }
    let labels = bytes[8..expected].to_vec();
    if let Some((i, &bad)) = labels.iter().enumerate().find(|(_, &l)| l > 9) {
        return Err(Error::Format(format!("label {i} has value {bad}, not a digit")));
    }
    Ok(labels)
}

/// Serializes images back to IDX3. All images must share one size.
pub fn write_idx_images(images: &[Image]) -> Result<Vec<u8>> {
    let (rows, cols) = images
        .first()
        .map(|im| (im.height(), im.width()))
        .unwrap_or((CANVAS, CANVAS));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for im in images {
        if im.height() != rows || im.width() != cols {
            return Err(Error::Argument("images differ in size".into()));
        }
        out.extend(im.to_bytes());
    }
    Ok(out)
}

pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Positions of `per_digit` draws per class, without replacement.
///
/// Uses ChaCha8 seeded with `seed`; each class is drawn by a partial
/// Fisher-Yates shuffle of that class's members in input order. The result
/// is ordered by class, then by draw order.
pub fn balanced_indices(labels: &[u8], per_digit: usize, seed: u64) -> Result<Vec<usize>> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in labels.iter().enumerate() {
        if l as usize >= NUM_CLASSES {
            return Err(Error::Format(format!("label {i} has value {l}, not a digit")));
        }
        by_class[l as usize].push(i);
    }
    if let Some((class, members)) = by_class
        .iter()
        .enumerate()
        .find(|(_, m)| m.len() < per_digit)
    {
        return Err(Error::Capacity {
            class: class as u8,
            needed: per_digit,
            available: members.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_digit * NUM_CLASSES);
    for mut members in by_class {
        for k in 0..per_digit {
            let j = rng.gen_range(k..members.len());
            members.swap(k, j);
            out.push(members[k]);
        }
    }
    Ok(out)
}

/// Draws `per_digit` images of every class; see [`balanced_indices`].
pub fn sample_balanced(set: &LabelledSet, per_digit: usize, seed: u64) -> Result<LabelledSet> {
    let picks = balanced_indices(&set.labels, per_digit, seed)?;
    Ok(LabelledSet {
        images: picks.iter().map(|&i| set.images[i].clone()).collect(),
        labels: picks.iter().map(|&i| set.labels[i]).collect(),
        ids: picks.iter().map(|&i| set.ids[i]).collect(),
        source: set.source,
    })
}

/// Same selection as [`sample_balanced`] on the full file, decoding only the
/// chosen images.
pub fn load_balanced(dir: &Path, source: SetSource, per_digit: usize, seed: u64) -> Result<LabelledSet> {
    let (images_path, labels_path) = file_paths(dir, source);
    let label_bytes = std::fs::read(&labels_path).map_err(|e| Error::io(&labels_path, e))?;
    let labels = parse_idx_labels(&label_bytes)?;
    let image_bytes = std::fs::read(&images_path).map_err(|e| Error::io(&images_path, e))?;
    check_magic(&image_bytes, IMAGE_MAGIC)?;
    let count = read_u32_be(&image_bytes, 4)? as usize;
    let rows = read_u32_be(&image_bytes, 8)? as usize;
    let cols = read_u32_be(&image_bytes, 12)? as usize;
    if count != labels.len() {
        return Err(Error::Format(format!(
            "{} holds {count} images but {} has {} labels",
            images_path.display(),
            labels_path.display(),
            labels.len()
        )));
    }
    let per_image = rows * cols;
    let expected = 16 + count * per_image;
    if image_bytes.len() < expected {
        return Err(Error::Length {
            expected,
            actual: image_bytes.len(),
        });
    }
    let picks = balanced_indices(&labels, per_digit, seed)?;
    let images = picks
        .iter()
        .map(|&i| {
            let start = 16 + i * per_image;
            Image::from_bytes(cols, rows, &image_bytes[start..start + per_image])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LabelledSet {
        images,
        labels: picks.iter().map(|&i| labels[i]).collect(),
        ids: picks,
        source,
    })
}

fn file_paths(dir: &Path, source: SetSource) -> (std::path::PathBuf, std::path::PathBuf) {
    let prefix = match source {
        SetSource::Model => "train",
        SetSource::Test => "t10k",
    };
    (
        dir.join(format!("{prefix}-images-idx3-ubyte")),
        dir.join(format!("{prefix}-labels-idx1-ubyte")),
    )
}

/// Cyclic shift: output pixel (x, y) is input pixel ((x - dx) mod w, (y - dy) mod h).
///
/// Shifts up to one full canvas period in either direction are accepted.
pub fn shift_wraparound(img: &Image, dx: i32, dy: i32) -> Result<Image> {
    let (w, h) = (img.width() as i32, img.height() as i32);
    if dx.abs() > w || dy.abs() > h {
        return Err(Error::Argument(format!(
            "shift ({dx}, {dy}) exceeds one period of a {w}x{h} image"
        )));
    }
    let mut out = Image::zeros(img.width(), img.height());
    for y in 0..h {
        let sy = (y - dy).rem_euclid(h) as usize;
        for x in 0..w {
            let sx = (x - dx).rem_euclid(w) as usize;
            out.set(x as usize, y as usize, img.get(sx, sy));
        }
    }
    Ok(out)
}

/// Draws `(dx, dy)` uniformly from `[-14, 14]²` and applies the cyclic shift.
pub fn random_shift(img: &Image, seed: u64) -> (Image, i32, i32) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dx = rng.gen_range(-MAX_SHIFT..=MAX_SHIFT);
    let dy = rng.gen_range(-MAX_SHIFT..=MAX_SHIFT);
    let shifted = shift_wraparound(img, dx, dy).expect("shift within half the canvas");
    (shifted, dx, dy)
}
