//! Raster containers shared by every stage: images, label masks and
//! superpixel maps, plus PNG/PPM/PGM ingestion.
//!
//! Coordinates follow one convention everywhere: `x` is the column, `y` the
//! row, origin at the top-left pixel. Samples are stored row-major with
//! channels interleaved.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use image::{ColorType, DynamicImage, ImageError, ImageReader};

use crate::error::{Error, Result};

/// A dense raster with 1 (gray) or 3 (RGB) channels and samples in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    channels: usize,
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl Image {
    /// Wraps unit-interval samples. Fails on a bad channel count, a zero
    /// dimension, a length mismatch or a sample outside `[0, 1]`.
    pub fn new(channels: usize, width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::UnsupportedChannels(channels));
        }
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != channels * width * height {
            return Err(Error::InvalidData(format!(
                "expected {} samples, found {}",
                channels * width * height,
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidData(format!("sample {bad} outside [0, 1]")));
        }
        Ok(Self {
            channels,
            width,
            height,
            data,
        })
    }

    /// Builds an image from 8-bit samples, scaling each by `1/255`.
    pub fn from_u8(channels: usize, width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f32 / 255.0).collect();
        Self::new(channels, width, height, data)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn sample(&self, x: usize, y: usize, channel: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + channel]
    }

    /// RGB triple of a pixel; gray images replicate their single channel.
    #[inline]
    pub fn rgb(&self, x: usize, y: usize) -> [f32; 3] {
        self.rgb_at(y * self.width + x)
    }

    #[inline]
    pub fn rgb_at(&self, index: usize) -> [f32; 3] {
        let base = index * self.channels;
        if self.channels == 3 {
            [self.data[base], self.data[base + 1], self.data[base + 2]]
        } else {
            let v = self.data[base];
            [v, v, v]
        }
    }

    /// Quantizes back to 8-bit RGB (gray replicated).
    pub fn to_rgb8(&self) -> Vec<u8> {
        (0..self.width * self.height)
            .flat_map(|i| self.rgb_at(i))
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Per-pixel class labels. Binary tasks use `{0, 1}`; 255 is reserved for the
/// empty-cell sentinel and never appears in a mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    labels: Vec<u8>,
}

impl Mask {
    pub fn new(width: usize, height: usize, labels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::InvalidData(format!(
                "expected {} labels, found {}",
                width * height,
                labels.len()
            )));
        }
        if labels.contains(&crate::assembly::EMPTY) {
            return Err(Error::InvalidData("label 255 is reserved".into()));
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn filled(width: usize, height: usize, label: u8) -> Result<Self> {
        Self::new(width, height, vec![label; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.labels[y * self.width + x]
    }

    pub fn is_binary(&self) -> bool {
        self.labels.iter().all(|&l| l <= 1)
    }

    /// Renders the mask as 8-bit gray with nonzero labels mapped to 255.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.labels
            .iter()
            .map(|&l| if l == 0 { 0 } else { 255 })
            .collect()
    }
}

/// Per-pixel superpixel ids. Ids are positive; after [`relabel_compact`]
/// they cover exactly `1..=region_count`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Superpixelation {
    width: usize,
    height: usize,
    ids: Vec<u32>,
    region_count: usize,
    max_id: u32,
}

impl Superpixelation {
    /// Wraps a map of positive ids. Gaps in the id range are accepted here;
    /// call [`Superpixelation::relabel_compact`] to close them.
    pub fn new(width: usize, height: usize, ids: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "superpixelation dimensions must be positive, got {width}x{height}"
            )));
        }
        if ids.len() != width * height {
            return Err(Error::InvalidData(format!(
                "expected {} region ids, found {}",
                width * height,
                ids.len()
            )));
        }
        if ids.contains(&0) {
            return Err(Error::InvalidData("region id 0 is not allowed".into()));
        }
        let max_id = ids.iter().copied().max().unwrap_or(0);
        let region_count = if (max_id as usize) <= 4 * ids.len() {
            let mut seen = vec![false; max_id as usize + 1];
            ids.iter().for_each(|&id| seen[id as usize] = true);
            seen.iter().filter(|&&s| s).count()
        } else {
            let mut seen: Vec<u32> = ids.clone();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        };
        Ok(Self {
            width,
            height,
            ids,
            region_count,
            max_id,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn ids(&self) -> &[u32] {
        &self.ids
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.ids[y * self.width + x]
    }

    /// Number of distinct region ids.
    pub fn region_count(&self) -> usize {
        self.region_count
    }

    /// Largest id in the map; equals `region_count` when compact.
    pub fn max_id(&self) -> u32 {
        self.max_id
    }

    pub fn is_compact(&self) -> bool {
        self.max_id as usize == self.region_count
    }

    /// Pixel count per id, indexed by id (slot 0 unused).
    pub fn region_areas(&self) -> Vec<usize> {
        let mut areas = vec![0usize; self.max_id as usize + 1];
        self.ids.iter().for_each(|&id| areas[id as usize] += 1);
        areas
    }

    /// Remaps ids onto `1..=K'` in order of first appearance in a row-major
    /// scan. Idempotent.
    pub fn relabel_compact(&self) -> Superpixelation {
        relabel_compact(self.width, self.height, &self.ids)
    }

    /// Pixel coordinates of every region, each list in row-major order.
    pub fn region_pixel_lists(&self) -> BTreeMap<u32, Vec<(usize, usize)>> {
        let mut lists: BTreeMap<u32, Vec<(usize, usize)>> = BTreeMap::new();
        for (i, &id) in self.ids.iter().enumerate() {
            lists
                .entry(id)
                .or_default()
                .push((i % self.width, i / self.width));
        }
        lists
    }
}

/// Compacts arbitrary positive ids onto `1..=K'`, numbering regions by first
/// occurrence in a row-major scan.
///
/// # Panics
/// If `ids.len() != width * height` or an id is 0.
pub fn relabel_compact(width: usize, height: usize, ids: &[u32]) -> Superpixelation {
    assert_eq!(ids.len(), width * height, "id map does not match dimensions");
    let mut remap: HashMap<u32, u32> = HashMap::new();
    let mut next = 0u32;
    let compact: Vec<u32> = ids
        .iter()
        .map(|&id| {
            assert_ne!(id, 0, "region id 0 is not allowed");
            *remap.entry(id).or_insert_with(|| {
                next += 1;
                next
            })
        })
        .collect();
    Superpixelation {
        width,
        height,
        ids: compact,
        region_count: next as usize,
        max_id: next,
    }
}

fn decode_error(path: &Path, err: ImageError) -> Error {
    match err {
        ImageError::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => Error::io(path, e),
        ImageError::IoError(e) if e.kind() == std::io::ErrorKind::PermissionDenied => {
            Error::io(path, e)
        }
        ImageError::Unsupported(e) => Error::UnsupportedImage {
            path: path.to_path_buf(),
            reason: e.to_string(),
        },
        other => Error::CorruptImage {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

fn decode(path: &Path) -> Result<DynamicImage> {
    let reader = ImageReader::open(path).map_err(|e| Error::io(path, e))?;
    let reader = reader
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    if reader.format().is_none() {
        return Err(Error::CorruptImage {
            path: path.to_path_buf(),
            reason: "unrecognized header".into(),
        });
    }
    reader.decode().map_err(|e| decode_error(path, e))
}

/// Loads an 8-bit gray or RGB PNG/PPM/PGM file.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = decode(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    match img.color() {
        ColorType::L8 => Image::from_u8(1, w, h, img.as_bytes()),
        ColorType::Rgb8 => Image::from_u8(3, w, h, img.as_bytes()),
        other => Err(Error::UnsupportedImage {
            path: path.to_path_buf(),
            reason: format!("color type {other:?}; only 8-bit gray and RGB are accepted"),
        }),
    }
}

/// Loads a mask image; any nonzero sample marks the pixel as label 1.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img = load_image(path)?;
    let c = img.channels();
    let labels = img
        .data()
        .chunks_exact(c)
        .map(|px| u8::from(px.iter().any(|&v| v > 0.0)))
        .collect();
    Mask::new(img.width(), img.height(), labels)
}

pub(crate) fn save_buffer(
    path: &Path,
    bytes: &[u8],
    width: usize,
    height: usize,
    color: image::ExtendedColorType,
) -> Result<()> {
    image::save_buffer_with_format(
        path,
        bytes,
        width as u32,
        height as u32,
        color,
        image::ImageFormat::Png,
    )
    .map_err(|e| match e {
        ImageError::IoError(io) => Error::io(path, io),
        other => Error::InvalidData(other.to_string()),
    })
}

/// Writes an 8-bit RGB (or gray, for 1-channel images) PNG.
pub fn save_image_png(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    let path = path.as_ref();
    if img.channels() == 1 {
        let gray: Vec<u8> = img
            .data()
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        save_buffer(
            path,
            &gray,
            img.width(),
            img.height(),
            image::ExtendedColorType::L8,
        )
    } else {
        save_buffer(
            path,
            &img.to_rgb8(),
            img.width(),
            img.height(),
            image::ExtendedColorType::Rgb8,
        )
    }
}

/// Writes a mask as a gray PNG with values 0/255.
pub fn save_mask_png(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    save_buffer(
        path.as_ref(),
        &mask.to_gray8(),
        mask.width(),
        mask.height(),
        image::ExtendedColorType::L8,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sp(w: usize, h: usize, ids: &[u32]) -> Superpixelation {
        Superpixelation::new(w, h, ids.to_vec()).unwrap()
    }

    #[test]
    fn relabel_is_order_preserving() {
        let out = sp(2, 2, &[3, 7, 7, 3]).relabel_compact();
        assert_eq!(out.ids(), &[1, 2, 2, 1]);
        assert_eq!(out.region_count(), 2);
    }

    #[test]
    fn relabel_leaves_compact_maps_alone() {
        let input = sp(2, 1, &[1, 2]);
        assert_eq!(input.relabel_compact(), input);
    }

    #[test]
    fn relabel_single_region() {
        let out = sp(3, 2, &[5; 6]).relabel_compact();
        assert!(out.ids().iter().all(|&i| i == 1));
        assert_eq!(out.region_count(), 1);
    }

    #[test]
    fn pixel_lists() {
        let lists = sp(2, 2, &[1, 1, 2, 2]).region_pixel_lists();
        assert_eq!(lists[&1], vec![(0, 0), (1, 0)]);
        assert_eq!(lists[&2], vec![(0, 1), (1, 1)]);

        let lists = sp(1, 1, &[1]).region_pixel_lists();
        assert_eq!(lists[&1], vec![(0, 0)]);

        let lists = sp(3, 1, &[1, 2, 1]).region_pixel_lists();
        assert_eq!(lists[&1].len(), 2);
        assert_eq!(lists[&2].len(), 1);
    }

    #[test]
    fn rejects_bad_images() {
        assert!(matches!(
            Image::new(2, 1, 1, vec![0.0, 0.0]),
            Err(Error::UnsupportedChannels(2))
        ));
        assert!(Image::new(1, 2, 1, vec![0.0]).is_err());
        assert!(Image::new(1, 1, 1, vec![1.5]).is_err());
        assert!(Superpixelation::new(2, 1, vec![0, 1]).is_err());
    }

    #[test]
    fn loads_png_and_pgm() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("red.png");
        image::save_buffer(&png, &[255, 0, 0], 1, 1, image::ExtendedColorType::Rgb8).unwrap();
        let img = load_image(&png).unwrap();
        assert_eq!(img.channels(), 3);
        assert_eq!(img.data(), &[1.0, 0.0, 0.0]);

        let pgm = dir.path().join("gray.pgm");
        let mut bytes = b"P5\n2 2\n255\n".to_vec();
        bytes.extend_from_slice(&[0, 51, 102, 255]);
        std::fs::write(&pgm, &bytes).unwrap();
        let img = load_image(&pgm).unwrap();
        assert_eq!(img.channels(), 1);
        assert_eq!(img.data().len(), 4);
        assert_eq!(img.sample(1, 0, 0), 0.2);

        let truncated = dir.path().join("cut.ppm");
        std::fs::write(&truncated, b"P6\n4 4\n255\n\x00\x01").unwrap();
        assert!(matches!(
            load_image(&truncated),
            Err(Error::CorruptImage { .. })
        ));

        let junk = dir.path().join("junk.png");
        std::fs::write(&junk, b"\x89PNG\r\n").unwrap();
        assert!(matches!(load_image(&junk), Err(Error::CorruptImage { .. })));

        assert!(matches!(
            load_image(dir.path().join("missing.png")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn rejects_alpha() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("rgba.png");
        image::save_buffer(&png, &[1, 2, 3, 4], 1, 1, image::ExtendedColorType::Rgba8).unwrap();
        assert!(matches!(
            load_image(&png),
            Err(Error::UnsupportedImage { .. })
        ));
    }

    #[test]
    fn mask_nonzero_is_foreground() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("m.png");
        image::save_buffer(&png, &[0, 1, 128, 255], 2, 2, image::ExtendedColorType::L8).unwrap();
        let mask = load_mask(&png).unwrap();
        assert_eq!(mask.labels(), &[0, 1, 1, 1]);
    }
}
