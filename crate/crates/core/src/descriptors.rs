//! Per-superpixel appearance and shape descriptors.
//!
//! All statistics are gathered by accumulating pixel contributions into
//! arrays indexed by region id (one scatter pass for counts, sums and
//! extents, a second for central moments), rather than by iterating over
//! each region separately.
//!
//! Channel order, restricted to the enabled groups, is fixed:
//! `[AC_r, AC_g, AC_b, A, W, H, C, S, E, Hu1..Hu7]`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::hull_area;
use crate::imaging::{Image, Superpixelation};

/// Which descriptor groups are emitted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DescriptorConfig {
    pub avg_color: bool,
    pub area: bool,
    pub width: bool,
    pub height: bool,
    pub compactness: bool,
    pub solidity: bool,
    pub eccentricity: bool,
    pub hu_moments: bool,
}

/// Short names in channel order, as used by `--descriptors`.
pub const DESCRIPTOR_KEYS: [&str; 8] = ["ac", "a", "w", "h", "c", "s", "e", "hu"];

impl Default for DescriptorConfig {
    /// Average color plus Hu moments (10 channels).
    fn default() -> Self {
        Self::from_bits(0b1000_0001).expect("nonzero mask")
    }
}

impl DescriptorConfig {
    fn flags(&self) -> [bool; 8] {
        [
            self.avg_color,
            self.area,
            self.width,
            self.height,
            self.compactness,
            self.solidity,
            self.eccentricity,
            self.hu_moments,
        ]
    }

    /// Bitmask with bit `i` set for group `DESCRIPTOR_KEYS[i]`.
    pub fn to_bits(&self) -> u16 {
        self.flags()
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    pub fn from_bits(bits: u16) -> Result<Self> {
        if bits == 0 || bits >> 8 != 0 {
            return Err(Error::InvalidParameter(format!(
                "invalid descriptor bitmask {bits:#06x}"
            )));
        }
        let on = |i: u16| bits & (1 << i) != 0;
        Ok(Self {
            avg_color: on(0),
            area: on(1),
            width: on(2),
            height: on(3),
            compactness: on(4),
            solidity: on(5),
            eccentricity: on(6),
            hu_moments: on(7),
        })
    }

    /// Parses a comma list drawn from `ac,a,w,h,c,s,e,hu`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut bits = 0u16;
        for key in list.split(',').map(str::trim).filter(|k| !k.is_empty()) {
            let key = key.to_ascii_lowercase();
            let pos = DESCRIPTOR_KEYS
                .iter()
                .position(|&k| k == key)
                .ok_or_else(|| Error::InvalidParameter(format!("unknown descriptor `{key}`")))?;
            bits |= 1 << pos;
        }
        Self::from_bits(bits)
    }

    /// Comma list in canonical order; inverse of [`DescriptorConfig::parse`].
    pub fn to_list(&self) -> String {
        self.flags()
            .iter()
            .zip(DESCRIPTOR_KEYS)
            .filter(|(&on, _)| on)
            .map(|(_, k)| k)
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Channel count `d`.
    pub fn channels(&self) -> usize {
        const WIDTHS: [usize; 8] = [3, 1, 1, 1, 1, 1, 1, 7];
        self.flags()
            .iter()
            .zip(WIDTHS)
            .filter(|(&on, _)| on)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn channel_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.avg_color {
            names.extend(["ac_r", "ac_g", "ac_b"].map(String::from));
        }
        for (on, name) in [
            (self.area, "area"),
            (self.width, "width"),
            (self.height, "height"),
            (self.compactness, "compactness"),
            (self.solidity, "solidity"),
            (self.eccentricity, "eccentricity"),
        ] {
            if on {
                names.push(name.to_string());
            }
        }
        if self.hu_moments {
            names.extend((1..=7).map(|i| format!("hu{i}")));
        }
        names
    }
}

/// Descriptor values of one region, in channel order.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorVector {
    pub values: Vec<f64>,
}

/// Central moments `mu_pq` for `2 <= p + q <= 3`, plus the pixel count.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CentralMoments {
    pub m00: f64,
    pub mu20: f64,
    pub mu11: f64,
    pub mu02: f64,
    pub mu30: f64,
    pub mu21: f64,
    pub mu12: f64,
    pub mu03: f64,
}

impl CentralMoments {
    #[inline]
    fn add(&mut self, dx: f64, dy: f64) {
        let (dx2, dy2) = (dx * dx, dy * dy);
        self.m00 += 1.0;
        self.mu20 += dx2;
        self.mu11 += dx * dy;
        self.mu02 += dy2;
        self.mu30 += dx2 * dx;
        self.mu21 += dx2 * dy;
        self.mu12 += dx * dy2;
        self.mu03 += dy2 * dy;
    }

    /// Hu's seven invariants from the normalized moments
    /// `eta_pq = mu_pq / m00^(1 + (p+q)/2)`.
    pub fn hu(&self) -> [f64; 7] {
        if self.m00 <= 0.0 {
            return [0.0; 7];
        }
        let s2 = self.m00 * self.m00;
        let s3 = s2 * self.m00.sqrt();
        let (n20, n11, n02) = (self.mu20 / s2, self.mu11 / s2, self.mu02 / s2);
        let (n30, n21, n12, n03) = (
            self.mu30 / s3,
            self.mu21 / s3,
            self.mu12 / s3,
            self.mu03 / s3,
        );

        let a = n30 + n12;
        let b = n21 + n03;
        let c = n30 - 3.0 * n12;
        let d = 3.0 * n21 - n03;

        [
            n20 + n02,
            (n20 - n02).powi(2) + 4.0 * n11 * n11,
            c * c + d * d,
            a * a + b * b,
            c * a * (a * a - 3.0 * b * b) + d * b * (3.0 * a * a - b * b),
            (n20 - n02) * (a * a - b * b) + 4.0 * n11 * a * b,
            d * a * (a * a - 3.0 * b * b) - c * b * (3.0 * a * a - b * b),
        ]
    }

    /// Eccentricity of the region seen as a union of unit pixel squares:
    /// the covariance of pixel centers plus the `1/12` variance of a unit
    /// square on each axis. Lies in `[0, 1)`.
    pub fn eccentricity(&self) -> f64 {
        if self.m00 <= 0.0 {
            return 0.0;
        }
        let a = self.mu20 / self.m00 + 1.0 / 12.0;
        let c = self.mu02 / self.m00 + 1.0 / 12.0;
        let b = self.mu11 / self.m00;
        let mid = 0.5 * (a + c);
        let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let (l1, l2) = (mid + rad, (mid - rad).max(0.0));
        if l1 <= 0.0 {
            0.0
        } else {
            (1.0 - l2 / l1).max(0.0).sqrt()
        }
    }
}

/// Unscaled Hu invariants of a pixel set.
pub fn hu_moments_raw(pixels: &[(usize, usize)]) -> Result<[f64; 7]> {
    if pixels.is_empty() {
        return Err(Error::EmptyPixelSet);
    }
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    let (cx, cy) = (sx / n, sy / n);
    let mut m = CentralMoments::default();
    for &(x, y) in pixels {
        m.add(x as f64 - cx, y as f64 - cy);
    }
    Ok(m.hu())
}

/// Signed log compression applied to Hu values before storage:
/// `sign(v) * log10(1 + |v| * 1e12) / 12`.
#[inline]
pub fn scale_hu(v: f64) -> f64 {
    v.signum() * (1.0 + v.abs() * 1e12).log10() / 12.0
}

#[derive(Clone, Debug)]
struct Accumulator {
    count: usize,
    rgb: [f64; 3],
    sum_x: f64,
    sum_y: f64,
    min_x: usize,
    max_x: usize,
    min_y: usize,
    max_y: usize,
    perimeter: usize,
}

impl Default for Accumulator {
    fn default() -> Self {
        Self {
            count: 0,
            rgb: [0.0; 3],
            sum_x: 0.0,
            sum_y: 0.0,
            min_x: usize::MAX,
            max_x: 0,
            min_y: usize::MAX,
            max_y: 0,
            perimeter: 0,
        }
    }
}

/// Computes the enabled descriptors for every region of `sp`.
pub fn compute_descriptors(
    img: &Image,
    sp: &Superpixelation,
    cfg: &DescriptorConfig,
) -> Result<BTreeMap<u32, DescriptorVector>> {
    if img.dims() != sp.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: img.dims(),
        });
    }
    if cfg.to_bits() == 0 {
        return Err(Error::InvalidParameter("no descriptor enabled".into()));
    }
    let (w, h) = sp.dims();
    let ids = sp.ids();
    let slots = sp.max_id() as usize + 1;
    let mut acc = vec![Accumulator::default(); slots];
    let mut corners: Vec<Vec<(i64, i64)>> = if cfg.solidity {
        vec![Vec::new(); slots]
    } else {
        Vec::new()
    };

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let id = ids[i];
            let a = &mut acc[id as usize];
            a.count += 1;
            let rgb = img.rgb_at(i);
            a.rgb[0] += rgb[0] as f64;
            a.rgb[1] += rgb[1] as f64;
            a.rgb[2] += rgb[2] as f64;
            a.sum_x += x as f64;
            a.sum_y += y as f64;
            a.min_x = a.min_x.min(x);
            a.max_x = a.max_x.max(x);
            a.min_y = a.min_y.min(y);
            a.max_y = a.max_y.max(y);
            let exposed = usize::from(x == 0 || ids[i - 1] != id)
                + usize::from(x + 1 == w || ids[i + 1] != id)
                + usize::from(y == 0 || ids[i - w] != id)
                + usize::from(y + 1 == h || ids[i + w] != id);
            a.perimeter += exposed;
            if cfg.solidity && exposed > 0 {
                let (xi, yi) = (x as i64, y as i64);
                corners[id as usize].extend([(xi, yi), (xi + 1, yi), (xi, yi + 1), (xi + 1, yi + 1)]);
            }
        }
    }

    let needs_moments = cfg.hu_moments || cfg.eccentricity;
    let mut moments = vec![CentralMoments::default(); if needs_moments { slots } else { 0 }];
    if needs_moments {
        let centers: Vec<(f64, f64)> = acc
            .iter()
            .map(|a| {
                if a.count == 0 {
                    (0.0, 0.0)
                } else {
                    (a.sum_x / a.count as f64, a.sum_y / a.count as f64)
                }
            })
            .collect();
        for (i, &id) in ids.iter().enumerate() {
            let (cx, cy) = centers[id as usize];
            moments[id as usize].add((i % w) as f64 - cx, (i / w) as f64 - cy);
        }
    }

    let image_area = (w * h) as f64;
    let d = cfg.channels();
    let mut out = BTreeMap::new();
    for (id, a) in acc.iter().enumerate() {
        if a.count == 0 {
            continue;
        }
        let n = a.count as f64;
        let mut values = Vec::with_capacity(d);
        if cfg.avg_color {
            values.extend(a.rgb.iter().map(|s| s / n));
        }
        if cfg.area {
            values.push(n / image_area);
        }
        if cfg.width {
            values.push((a.max_x - a.min_x + 1) as f64 / w as f64);
        }
        if cfg.height {
            values.push((a.max_y - a.min_y + 1) as f64 / h as f64);
        }
        if cfg.compactness {
            let per = a.perimeter as f64;
            values.push((4.0 * PI * n / (per * per)).min(1.0));
        }
        if cfg.solidity {
            let hull = hull_area(std::mem::take(&mut corners[id]));
            values.push((n / hull).min(1.0));
        }
        if cfg.eccentricity {
            values.push(moments[id].eccentricity());
        }
        if cfg.hu_moments {
            values.extend(moments[id].hu().iter().map(|&v| scale_hu(v)));
        }
        debug_assert_eq!(values.len(), d);
        out.insert(id as u32, DescriptorVector { values });
    }
    Ok(out)
}
