//! Visualizations of a Sigrid as RGB images.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::assembly::{CellLabelGrid, Sigrid, EMPTY};
use crate::error::{Error, Result};
use crate::imaging::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    /// Retained-region boundaries and centroids at source resolution.
    Boundaries,
    /// The grid with populated cells lit.
    Occupancy,
    /// Cell labels, one color per class.
    Labels,
}

impl FromStr for RenderMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "boundaries" => Ok(RenderMode::Boundaries),
            "occupancy" => Ok(RenderMode::Occupancy),
            "labels" => Ok(RenderMode::Labels),
            _ => Err(Error::InvalidParameter(format!(
                "unknown render mode `{s}` (boundaries, occupancy, labels)"
            ))),
        }
    }
}

const BOUNDARY: [f32; 3] = [1.0, 0.9, 0.0];
const CENTROID: [f32; 3] = [1.0, 0.0, 0.0];
const DISCARDED: [f32; 3] = [0.25, 0.25, 0.25];
const GRID_LINE: [f32; 3] = [0.2, 0.2, 0.2];
pub const EMPTY_COLOR: [f32; 3] = [0.0, 0.0, 0.0];
pub const OCCUPIED_COLOR: [f32; 3] = [1.0, 1.0, 1.0];

/// Display color of a cell label.
pub fn label_color(label: u8) -> [f32; 3] {
    match label {
        EMPTY => EMPTY_COLOR,
        0 => [0.15, 0.2, 0.55],
        1 => [0.95, 0.8, 0.1],
        l => {
            let h = (l as u32).wrapping_mul(2_654_435_761);
            [(h >> 24) as f32 / 255.0, ((h >> 16) & 0xff) as f32 / 255.0, ((h >> 8) & 0xff) as f32 / 255.0]
        }
    }
}

fn from_pixels(width: usize, height: usize, pixels: &[[f32; 3]]) -> Image {
    let data = pixels.iter().flat_map(|p| p.iter().copied()).collect();
    Image::new(3, width, height, data).expect("colors are in range")
}

/// Region boundaries over `background`, or over the stored average colors
/// when no background is given and the Sigrid carries them. Discarded
/// pixels are drawn dark gray in the latter case.
pub fn render_boundaries(sg: &Sigrid, background: Option<&Image>) -> Result<Image> {
    let (w, h) = sg.source_dims();
    let map = sg.region_map();
    let mut pixels: Vec<[f32; 3]> = match background {
        Some(img) => {
            if img.dims() != (w, h) {
                return Err(Error::DimensionMismatch {
                    expected: (w, h),
                    found: img.dims(),
                });
            }
            (0..w * h).map(|i| img.rgb_at(i)).collect()
        }
        None => {
            let colors: BTreeMap<u32, [f32; 3]> = if sg.config().avg_color {
                sg.cells()
                    .iter()
                    .map(|c| (c.region, [c.values[0], c.values[1], c.values[2]]))
                    .collect()
            } else {
                BTreeMap::new()
            };
            map.iter()
                .map(|&id| match id {
                    0 => DISCARDED,
                    id => colors.get(&id).copied().unwrap_or([0.5, 0.5, 0.5]),
                })
                .collect()
        }
    };
    for y in 0..h {
        for x in 0..w {
            let id = map[y * w + x];
            let right = x + 1 < w && map[y * w + x + 1] != id;
            let below = y + 1 < h && map[(y + 1) * w + x] != id;
            if right || below {
                pixels[y * w + x] = BOUNDARY;
            }
        }
    }
    let mut sums: BTreeMap<u32, (f64, f64, f64)> = BTreeMap::new();
    for (i, &id) in map.iter().enumerate() {
        if id != 0 {
            let e = sums.entry(id).or_default();
            e.0 += (i % w) as f64;
            e.1 += (i / w) as f64;
            e.2 += 1.0;
        }
    }
    for (sx, sy, n) in sums.values() {
        let (cx, cy) = ((sx / n).round() as i64, (sy / n).round() as i64);
        for (dx, dy) in [(0, 0), (1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (x, y) = (cx + dx, cy + dy);
            if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                pixels[y as usize * w + x as usize] = CENTROID;
            }
        }
    }
    Ok(from_pixels(w, h, &pixels))
}

/// Draws every cell as a `scale` x `scale` block colored by `color`, with
/// a one-pixel grid line on the block's right and bottom edges when
/// `scale >= 4`.
fn render_cells(gw: usize, gh: usize, scale: usize, color: impl Fn(usize, usize) -> [f32; 3]) -> Result<Image> {
    if scale == 0 {
        return Err(Error::InvalidParameter("scale must be >= 1".into()));
    }
    let (w, h) = (gw * scale, gh * scale);
    let mut pixels = vec![EMPTY_COLOR; w * h];
    for y in 0..h {
        for x in 0..w {
            let edge = scale >= 4 && (x % scale == scale - 1 || y % scale == scale - 1);
            pixels[y * w + x] = if edge { GRID_LINE } else { color(y / scale, x / scale) };
        }
    }
    Ok(from_pixels(w, h, &pixels))
}

pub fn render_occupancy(sg: &Sigrid, scale: usize) -> Result<Image> {
    let spec = *sg.spec();
    let mut occupied = vec![false; spec.cell_count()];
    for c in sg.cells() {
        occupied[c.cell.row * spec.grid_width + c.cell.col] = true;
    }
    render_cells(spec.grid_width, spec.grid_height, scale, |r, c| {
        if occupied[r * spec.grid_width + c] {
            OCCUPIED_COLOR
        } else {
            EMPTY_COLOR
        }
    })
}

pub fn render_labels(labels: &CellLabelGrid, scale: usize) -> Result<Image> {
    let spec = *labels.spec();
    render_cells(spec.grid_width, spec.grid_height, scale, |r, c| {
        label_color(labels.labels()[r * spec.grid_width + c])
    })
}
