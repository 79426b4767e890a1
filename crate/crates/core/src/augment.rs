//! Rotation/flip expansion of training images, applied before any
//! superpixel computation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{Image, Mask};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Transform {
    Rot90,
    Rot180,
    Rot270,
    FlipHorizontal,
    FlipVertical,
}

impl Transform {
    pub fn suffix(&self) -> &'static str {
        match self {
            Transform::Rot90 => "rot90",
            Transform::Rot180 => "rot180",
            Transform::Rot270 => "rot270",
            Transform::FlipHorizontal => "fliph",
            Transform::FlipVertical => "flipv",
        }
    }

    fn output_dims(&self, w: usize, h: usize) -> (usize, usize) {
        match self {
            Transform::Rot90 | Transform::Rot270 => (h, w),
            _ => (w, h),
        }
    }

    /// Source pixel of output pixel `(x, y)`. Rotations are clockwise.
    fn source(&self, x: usize, y: usize, w: usize, h: usize) -> (usize, usize) {
        match self {
            Transform::Rot90 => (y, h - 1 - x),
            Transform::Rot180 => (w - 1 - x, h - 1 - y),
            Transform::Rot270 => (w - 1 - y, x),
            Transform::FlipHorizontal => (w - 1 - x, y),
            Transform::FlipVertical => (x, h - 1 - y),
        }
    }
}

/// Applies `t` to an interleaved raster with `c` samples per pixel.
pub fn transform_raster<T: Copy>(data: &[T], w: usize, h: usize, c: usize, t: Transform) -> (Vec<T>, usize, usize) {
    let (ow, oh) = t.output_dims(w, h);
    let mut out = Vec::with_capacity(data.len());
    for y in 0..oh {
        for x in 0..ow {
            let (sx, sy) = t.source(x, y, w, h);
            let base = (sy * w + sx) * c;
            out.extend_from_slice(&data[base..base + c]);
        }
    }
    (out, ow, oh)
}

pub fn transform_image(img: &Image, t: Transform) -> Image {
    let (data, w, h) = transform_raster(img.data(), img.width(), img.height(), img.channels(), t);
    Image::new(img.channels(), w, h, data).expect("transform preserves validity")
}

pub fn transform_mask(mask: &Mask, t: Transform) -> Mask {
    let (labels, w, h) = transform_raster(mask.labels(), mask.width(), mask.height(), 1, t);
    Mask::new(w, h, labels).expect("transform preserves validity")
}

/// FNV-1a hash of the file stem, used as the augmentation seed.
pub fn stem_seed(stem: &str) -> u64 {
    stem.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Transforms generated for one source file: one rotation drawn from
/// {90, 180, 270} degrees by a generator seeded from the stem, plus both flips.
pub fn transforms_for(stem: &str) -> Vec<Transform> {
    let mut rng = ChaCha8Rng::seed_from_u64(stem_seed(stem));
    let rotation = [Transform::Rot90, Transform::Rot180, Transform::Rot270][rng.random_range(0..3)];
    vec![rotation, Transform::FlipHorizontal, Transform::FlipVertical]
}

/// Augmented copies `(stem_suffix, image, mask)` of one sample; the original
/// is not included.
pub fn expand(stem: &str, img: &Image, mask: Option<&Mask>) -> Vec<(String, Image, Option<Mask>)> {
    transforms_for(stem)
        .into_iter()
        .map(|t| {
            (
                format!("{stem}_{}", t.suffix()),
                transform_image(img, t),
                mask.map(|m| transform_mask(m, t)),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotations_compose() {
        // 3x2 raster:  0 1 2 / 3 4 5
        let data: Vec<u8> = (0..6).collect();
        let (r90, w, h) = transform_raster(&data, 3, 2, 1, Transform::Rot90);
        assert_eq!((w, h), (2, 3));
        assert_eq!(r90, vec![3, 0, 4, 1, 5, 2]);
        let (r180, ..) = transform_raster(&data, 3, 2, 1, Transform::Rot180);
        let (twice, ..) = transform_raster(&r90, 2, 3, 1, Transform::Rot90);
        assert_eq!(twice, r180);
        let (r270, ..) = transform_raster(&data, 3, 2, 1, Transform::Rot270);
        let (back, ..) = transform_raster(&r270, 2, 3, 1, Transform::Rot90);
        assert_eq!(back, data);
        let (fh, ..) = transform_raster(&data, 3, 2, 1, Transform::FlipHorizontal);
        assert_eq!(fh, vec![2, 1, 0, 5, 4, 3]);
        let (fv, ..) = transform_raster(&data, 3, 2, 1, Transform::FlipVertical);
        assert_eq!(fv, vec![3, 4, 5, 0, 1, 2]);
    }

    #[test]
    fn deterministic_per_stem() {
        assert_eq!(transforms_for("bird_0001"), transforms_for("bird_0001"));
        assert_eq!(transforms_for("x").len(), 3);
    }

    #[test]
    fn multi_channel() {
        let img = Image::new(3, 2, 1, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]).unwrap();
        let out = transform_image(&img, Transform::FlipHorizontal);
        assert_eq!(out.data(), &[0.4, 0.5, 0.6, 0.1, 0.2, 0.3]);
    }
}
