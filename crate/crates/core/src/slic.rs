//! SLIC superpixels: localized k-means in joint CIELAB + image-plane space,
//! followed by 4-connectivity enforcement.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::color::srgb_to_lab;
use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::imaging::{relabel_compact, Image, Superpixelation};

/// Parameters of a SLIC run.
#[derive(Clone, Debug, PartialEq)]
pub struct SlicParams {
    /// Target number of superpixels `K`.
    pub segments: usize,
    /// Weight `m` of spatial distance relative to color distance.
    pub compactness: f64,
    pub max_iterations: usize,
    pub enforce_connectivity: bool,
}

impl Default for SlicParams {
    fn default() -> Self {
        Self {
            segments: 1500,
            compactness: 20.0,
            max_iterations: 10,
            enforce_connectivity: true,
        }
    }
}

impl SlicParams {
    pub fn validate(&self) -> Result<()> {
        if self.segments == 0 {
            return Err(Error::InvalidParameter("segments must be >= 1".into()));
        }
        if !self.compactness.is_finite() || self.compactness <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "compactness must be positive, got {}",
                self.compactness
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// A cluster center in joint color/position space. Positions are pixel
/// indices (not pixel centers).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterCenter {
    pub lab: [f64; 3],
    pub x: f64,
    pub y: f64,
}

/// Raw k-means output, before connectivity enforcement.
#[derive(Clone, Debug)]
pub struct SlicClustering {
    pub width: usize,
    pub height: usize,
    /// Zero-based cluster index per pixel.
    pub labels: Vec<u32>,
    /// Centers after the final update step.
    pub centers: Vec<ClusterCenter>,
    /// Grid interval `s = sqrt(w*h/K)`.
    pub step: f64,
    /// Squared color weight `(s/m)^2` used in the distance.
    pub color_weight: f64,
}

impl SlicClustering {
    /// Scaled SLIC distance `D^2 * s^2 / m^2 = d_xy^2 + d_lab^2 * (s/m)^2`.
    ///
    /// Scaling by `s^2/m^2` leaves the arg-min unchanged and keeps purely
    /// spatial comparisons independent of `m`.
    #[inline]
    pub fn distance(&self, lab: [f64; 3], x: f64, y: f64, center: &ClusterCenter) -> f64 {
        scaled_distance(self.color_weight, lab, x, y, center)
    }
}

#[inline]
fn scaled_distance(color_weight: f64, lab: [f64; 3], x: f64, y: f64, c: &ClusterCenter) -> f64 {
    let dl = lab[0] - c.lab[0];
    let da = lab[1] - c.lab[1];
    let db = lab[2] - c.lab[2];
    let dx = x - c.x;
    let dy = y - c.y;
    dx * dx + dy * dy + (dl * dl + da * da + db * db) * color_weight
}

fn lab_plane(img: &Image) -> Vec<[f64; 3]> {
    (0..img.width() * img.height())
        .into_par_iter()
        .map(|i| srgb_to_lab(img.rgb_at(i)))
        .collect()
}

fn grid_shape(segments: usize, width: usize, height: usize) -> (usize, usize) {
    let k = segments as f64;
    let rows = (k * height as f64 / width as f64)
        .sqrt()
        .round()
        .clamp(1.0, segments.min(height) as f64) as usize;
    let cols = (k / rows as f64).round().clamp(1.0, width as f64) as usize;
    (cols, rows)
}

fn gradient(lab: &[[f64; 3]], width: usize, height: usize, x: usize, y: usize) -> f64 {
    let at = |x: usize, y: usize| lab[y * width + x];
    let (xl, xr) = (x.saturating_sub(1), (x + 1).min(width - 1));
    let (yu, yd) = (y.saturating_sub(1), (y + 1).min(height - 1));
    let sq = |a: [f64; 3], b: [f64; 3]| {
        (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
    };
    sq(at(xr, y), at(xl, y)) + sq(at(x, yd), at(x, yu))
}

fn initial_centers(lab: &[[f64; 3]], width: usize, height: usize, segments: usize) -> Vec<ClusterCenter> {
    let (cols, rows) = grid_shape(segments, width, height);
    let mut centers = Vec::with_capacity(cols * rows);
    for j in 0..rows {
        for i in 0..cols {
            let x0 = (((i as f64 + 0.5) * width as f64 / cols as f64).floor() as usize).min(width - 1);
            let y0 = (((j as f64 + 0.5) * height as f64 / rows as f64).floor() as usize).min(height - 1);
            // Move to the lowest-gradient pixel of the 3x3 neighborhood.
            let (mut bx, mut by) = (x0, y0);
            let mut best = gradient(lab, width, height, x0, y0);
            for ny in y0.saturating_sub(1)..=(y0 + 1).min(height - 1) {
                for nx in x0.saturating_sub(1)..=(x0 + 1).min(width - 1) {
                    let g = gradient(lab, width, height, nx, ny);
                    if g < best {
                        best = g;
                        bx = nx;
                        by = ny;
                    }
                }
            }
            centers.push(ClusterCenter {
                lab: lab[by * width + bx],
                x: bx as f64,
                y: by as f64,
            });
        }
    }
    centers
}

struct Window {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

fn window(c: &ClusterCenter, step: f64, width: usize, height: usize) -> Window {
    let lo = |v: f64| (v - step).floor().max(0.0) as usize;
    let hi = |v: f64, n: usize| ((v + step).ceil().max(0.0) as usize).min(n - 1);
    Window {
        x0: lo(c.x).min(width - 1),
        x1: hi(c.x, width),
        y0: lo(c.y).min(height - 1),
        y1: hi(c.y, height),
    }
}

/// One assignment sweep. Centers are visited in index order with a strict
/// comparison, so ties go to the lower index whatever the thread count.
fn assign(
    lab: &[[f64; 3]],
    width: usize,
    height: usize,
    centers: &[ClusterCenter],
    step: f64,
    color_weight: f64,
    labels: &mut [u32],
) {
    let windows: Vec<Window> = centers
        .iter()
        .map(|c| window(c, step, width, height))
        .collect();
    let mut per_row: Vec<Vec<u32>> = vec![Vec::new(); height];
    for (k, w) in windows.iter().enumerate() {
        for row in &mut per_row[w.y0..=w.y1] {
            row.push(k as u32);
        }
    }

    labels
        .par_chunks_mut(width)
        .zip(lab.par_chunks(width))
        .enumerate()
        .for_each(|(y, (row_labels, row_lab))| {
            let mut dist = vec![f64::INFINITY; width];
            row_labels.fill(u32::MAX);
            let yf = y as f64;
            for &k in &per_row[y] {
                let c = &centers[k as usize];
                let w = &windows[k as usize];
                for x in w.x0..=w.x1 {
                    let d = scaled_distance(color_weight, row_lab[x], x as f64, yf, c);
                    if d < dist[x] {
                        dist[x] = d;
                        row_labels[x] = k;
                    }
                }
            }
            // Pixels outside every window fall back to a global search.
            for x in 0..width {
                if row_labels[x] == u32::MAX {
                    let mut best = f64::INFINITY;
                    for (k, c) in centers.iter().enumerate() {
                        let d = scaled_distance(color_weight, row_lab[x], x as f64, yf, c);
                        if d < best {
                            best = d;
                            row_labels[x] = k as u32;
                        }
                    }
                }
            }
        });
}

fn update(lab: &[[f64; 3]], width: usize, labels: &[u32], centers: &mut [ClusterCenter]) {
    let mut sums = vec![[0.0f64; 6]; centers.len()];
    for (i, (&k, px)) in labels.iter().zip(lab).enumerate() {
        let s = &mut sums[k as usize];
        s[0] += px[0];
        s[1] += px[1];
        s[2] += px[2];
        s[3] += (i % width) as f64;
        s[4] += (i / width) as f64;
        s[5] += 1.0;
    }
    for (c, s) in centers.iter_mut().zip(&sums) {
        if s[5] > 0.0 {
            let n = s[5];
            c.lab = [s[0] / n, s[1] / n, s[2] / n];
            c.x = s[3] / n;
            c.y = s[4] / n;
        }
    }
}

/// Runs the k-means stage only: grid seeding with gradient perturbation,
/// then `max_iterations` assignment/update rounds.
pub fn slic_clusters(img: &Image, params: &SlicParams) -> Result<SlicClustering> {
    params.validate()?;
    let (width, height) = img.dims();
    if params.segments > width * height {
        return Err(Error::InvalidParameter(format!(
            "segments ({}) exceeds pixel count ({})",
            params.segments,
            width * height
        )));
    }
    let lab = lab_plane(img);
    let step = ((width * height) as f64 / params.segments as f64).sqrt();
    let color_weight = (step / params.compactness).powi(2);
    let mut centers = initial_centers(&lab, width, height, params.segments);
    let mut labels = vec![0u32; width * height];
    for _ in 0..params.max_iterations {
        assign(&lab, width, height, &centers, step, color_weight, &mut labels);
        update(&lab, width, &labels, &mut centers);
    }
    Ok(SlicClustering {
        width,
        height,
        labels,
        centers,
        step,
        color_weight,
    })
}

/// 4-connected components of a label map, numbered in raster order of their
/// first pixel. Returns the component id per pixel and component sizes.
pub(crate) fn connected_components(labels: &[u32], width: usize, height: usize) -> (Vec<u32>, Vec<usize>) {
    let mut comp = vec![u32::MAX; labels.len()];
    let mut sizes = Vec::new();
    let mut stack = Vec::new();
    for start in 0..labels.len() {
        if comp[start] != u32::MAX {
            continue;
        }
        let id = sizes.len() as u32;
        let label = labels[start];
        comp[start] = id;
        stack.push(start);
        let mut size = 0;
        while let Some(p) = stack.pop() {
            size += 1;
            let (x, y) = (p % width, p / width);
            let mut visit = |q: usize| {
                if comp[q] == u32::MAX && labels[q] == label {
                    comp[q] = id;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < width {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - width);
            }
            if y + 1 < height {
                visit(p + width);
            }
        }
        sizes.push(size);
    }
    (comp, sizes)
}

/// Splits disconnected clusters into separate regions and folds components
/// smaller than `min_size` pixels into their largest neighbor. Ties between
/// equally large neighbors go to the one appearing first in raster order.
pub(crate) fn enforce_connectivity(labels: &[u32], width: usize, height: usize, min_size: usize) -> Vec<u32> {
    let (comp, sizes) = connected_components(labels, width, height);
    let n = sizes.len();
    let mut groups = DisjointSet::with_sizes(sizes);

    loop {
        let mut small: Vec<usize> = Vec::new();
        let mut seen = vec![false; n];
        let mut group_count = 0;
        for &c in &comp {
            let r = groups.find(c as usize);
            if !seen[r] {
                seen[r] = true;
                group_count += 1;
                if groups.set_size(r) < min_size {
                    small.push(r);
                }
            }
        }
        if small.is_empty() || group_count == 1 {
            break;
        }

        let mut slot = vec![usize::MAX; n];
        for (i, &r) in small.iter().enumerate() {
            slot[r] = i;
        }
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); small.len()];
        let mut note = |a: usize, b: usize, groups: &mut DisjointSet| {
            let (ra, rb) = (groups.find(a), groups.find(b));
            if ra != rb {
                if slot[ra] != usize::MAX {
                    neighbors[slot[ra]].push(rb);
                }
                if slot[rb] != usize::MAX {
                    neighbors[slot[rb]].push(ra);
                }
            }
        };
        for y in 0..height {
            for x in 0..width {
                let p = y * width + x;
                if x + 1 < width && comp[p] != comp[p + 1] {
                    note(comp[p] as usize, comp[p + 1] as usize, &mut groups);
                }
                if y + 1 < height && comp[p] != comp[p + width] {
                    note(comp[p] as usize, comp[p + width] as usize, &mut groups);
                }
            }
        }

        let mut merged_any = false;
        for (i, &g) in small.iter().enumerate() {
            let r = groups.find(g);
            if groups.set_size(r) >= min_size {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for &nb in &neighbors[i] {
                let nr = groups.find(nb);
                if nr == r {
                    continue;
                }
                let size = groups.set_size(nr);
                let better = match best {
                    None => true,
                    Some((bs, br)) => size > bs || (size == bs && nr < br),
                };
                if better {
                    best = Some((size, nr));
                }
            }
            if let Some((_, target)) = best {
                groups.union(r, target);
                merged_any = true;
            }
        }
        if !merged_any {
            break;
        }
    }

    comp.iter()
        .map(|&c| groups.find(c as usize) as u32 + 1)
        .collect()
}

/// Computes a SLIC superpixelation of `img`.
///
/// The returned map is compact (ids `1..=K'`, numbered in raster order) and,
/// with `enforce_connectivity`, every region is 4-connected. `K'` generally
/// differs from the requested segment count.
pub fn slic_segment(img: &Image, params: &SlicParams) -> Result<Superpixelation> {
    let clustering = slic_clusters(img, params)?;
    let (width, height) = (clustering.width, clustering.height);
    let ids: Vec<u32> = if params.enforce_connectivity {
        let min_size = (clustering.step * clustering.step / 4.0).ceil() as usize;
        enforce_connectivity(&clustering.labels, width, height, min_size)
    } else {
        clustering.labels.iter().map(|&k| k + 1).collect()
    };
    Ok(relabel_compact(width, height, &ids))
}

/// Per-id pixel count and centroid sums, indexed by region id.
pub(crate) struct RegionGeometry {
    pub areas: Vec<usize>,
    pub centroids: Vec<(f64, f64)>,
}

pub(crate) fn region_geometry(sp: &Superpixelation) -> RegionGeometry {
    let slots = sp.max_id() as usize + 1;
    let mut areas = vec![0usize; slots];
    let mut sums = vec![(0.0f64, 0.0f64); slots];
    let w = sp.width();
    for (i, &id) in sp.ids().iter().enumerate() {
        let id = id as usize;
        areas[id] += 1;
        sums[id].0 += (i % w) as f64 + 0.5;
        sums[id].1 += (i / w) as f64 + 0.5;
    }
    let centroids = sums
        .iter()
        .zip(&areas)
        .map(|(&(sx, sy), &n)| {
            if n == 0 {
                (f64::NAN, f64::NAN)
            } else {
                (sx / n as f64, sy / n as f64)
            }
        })
        .collect();
    RegionGeometry { areas, centroids }
}

/// Centroid of every region in pixel-center coordinates (pixel `(x, y)`
/// contributes `(x + 0.5, y + 0.5)`).
pub fn superpixel_centroids(sp: &Superpixelation) -> BTreeMap<u32, (f64, f64)> {
    let geo = region_geometry(sp);
    geo.areas
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(id, _)| (id as u32, geo.centroids[id]))
        .collect()
}
