//! Sigrid assembly, ground-truth rasterization onto cells and back-projection
//! of cell labels to pixels.

use std::collections::BTreeMap;

use crate::descriptors::{compute_descriptors, DescriptorConfig};
use crate::error::{Error, Result};
use crate::gridmap::{CellIndex, GridAssignment, GridSpec};
use crate::imaging::{Image, Mask, Superpixelation};
use crate::metrics::iou;

/// Label of a cell that holds no superpixel.
pub const EMPTY: u8 = 255;

/// A populated cell: the retained region placed there and its descriptor.
#[derive(Clone, Debug, PartialEq)]
pub struct CellEntry {
    pub cell: CellIndex,
    pub region: u32,
    pub values: Vec<f32>,
}

/// Sparse `d x h' x w'` descriptor grid together with the retained-region
/// map needed to expand cell predictions back to pixels.
///
/// The region map holds the id of every retained region and 0 for pixels of
/// regions that lost a cell collision.
#[derive(Clone, Debug, PartialEq)]
pub struct Sigrid {
    spec: GridSpec,
    config: DescriptorConfig,
    source_dims: (usize, usize),
    cells: Vec<CellEntry>,
    region_map: Vec<u32>,
}

impl Sigrid {
    /// Validates and wraps the parts of a Sigrid. `cells` may be in any
    /// order; they are stored sorted by `(row, col)`.
    pub fn from_parts(
        spec: GridSpec,
        config: DescriptorConfig,
        source_dims: (usize, usize),
        mut cells: Vec<CellEntry>,
        region_map: Vec<u32>,
    ) -> Result<Self> {
        spec.validate()?;
        let (w, h) = source_dims;
        if w == 0 || h == 0 || region_map.len() != w * h {
            return Err(Error::InvalidData(format!(
                "region map of {} pixels does not match {w}x{h}",
                region_map.len()
            )));
        }
        let d = config.channels();
        cells.sort_by_key(|c| c.cell);
        for pair in cells.windows(2) {
            if pair[0].cell == pair[1].cell {
                return Err(Error::InvalidData(format!(
                    "cell {:?} populated twice",
                    pair[0].cell
                )));
            }
        }
        let mut regions = BTreeMap::new();
        for c in &cells {
            if c.cell.row >= spec.grid_height || c.cell.col >= spec.grid_width {
                return Err(Error::InvalidData(format!("cell {:?} outside grid", c.cell)));
            }
            if c.values.len() != d {
                return Err(Error::InvalidData(format!(
                    "cell {:?} has {} values, expected {d}",
                    c.cell,
                    c.values.len()
                )));
            }
            if c.region == 0 || regions.insert(c.region, false).is_some() {
                return Err(Error::InvalidData(format!(
                    "region id {} invalid or repeated",
                    c.region
                )));
            }
        }
        for &id in &region_map {
            if id != 0 {
                match regions.get_mut(&id) {
                    Some(seen) => *seen = true,
                    None => {
                        return Err(Error::InvalidData(format!(
                            "region {id} in map has no cell"
                        )))
                    }
                }
            }
        }
        if let Some((id, _)) = regions.iter().find(|(_, &seen)| !seen) {
            return Err(Error::InvalidData(format!("region {id} has no pixels")));
        }
        Ok(Self {
            spec,
            config,
            source_dims,
            cells,
            region_map,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn config(&self) -> &DescriptorConfig {
        &self.config
    }

    pub fn channels(&self) -> usize {
        self.config.channels()
    }

    pub fn source_dims(&self) -> (usize, usize) {
        self.source_dims
    }

    /// Populated cells sorted by `(row, col)`.
    pub fn cells(&self) -> &[CellEntry] {
        &self.cells
    }

    pub fn retained_count(&self) -> usize {
        self.cells.len()
    }

    /// Per-pixel retained region id; 0 marks pixels of discarded regions.
    pub fn region_map(&self) -> &[u32] {
        &self.region_map
    }

    pub fn cell(&self, cell: CellIndex) -> Option<&CellEntry> {
        self.cells
            .binary_search_by_key(&cell, |c| c.cell)
            .ok()
            .map(|i| &self.cells[i])
    }

    /// Dense tensor, channel-major then row-major: index
    /// `(ch * h' + row) * w' + col`. Unpopulated cells are zero.
    pub fn dense(&self) -> Vec<f32> {
        let (gw, gh) = (self.spec.grid_width, self.spec.grid_height);
        let mut out = vec![0.0f32; self.channels() * gw * gh];
        for c in &self.cells {
            for (ch, &v) in c.values.iter().enumerate() {
                out[(ch * gh + c.cell.row) * gw + c.cell.col] = v;
            }
        }
        out
    }

    /// Reads descriptor vectors for `occupied` cells back out of a dense
    /// tensor laid out as in [`Sigrid::dense`].
    pub fn cells_from_dense(&self, dense: &[f32], occupied: &[(CellIndex, u32)]) -> Result<Vec<CellEntry>> {
        let (gw, gh) = (self.spec.grid_width, self.spec.grid_height);
        let d = self.channels();
        if dense.len() != d * gw * gh {
            return Err(Error::InvalidData(format!(
                "dense tensor has {} elements, expected {}",
                dense.len(),
                d * gw * gh
            )));
        }
        Ok(occupied
            .iter()
            .map(|&(cell, region)| CellEntry {
                cell,
                region,
                values: (0..d)
                    .map(|ch| dense[(ch * gh + cell.row) * gw + cell.col])
                    .collect(),
            })
            .collect())
    }

    /// Cells of a dense tensor whose descriptor is not all zeros.
    pub fn nonzero_cells(dense: &[f32], channels: usize, spec: &GridSpec) -> Vec<CellIndex> {
        let (gw, gh) = (spec.grid_width, spec.grid_height);
        let mut cells = Vec::new();
        for row in 0..gh {
            for col in 0..gw {
                if (0..channels).any(|ch| dense[(ch * gh + row) * gw + col] != 0.0) {
                    cells.push(CellIndex { row, col });
                }
            }
        }
        cells
    }

    pub(crate) fn layout(&self) -> Layout<'_> {
        Layout {
            width: self.source_dims.0,
            height: self.source_dims.1,
            pixel_region: std::borrow::Cow::Borrowed(&self.region_map),
            region_cell: self.cells.iter().map(|c| (c.region, c.cell)).collect(),
        }
    }
}

/// Per-cell class labels, row-major, with [`EMPTY`] for unpopulated cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellLabelGrid {
    spec: GridSpec,
    labels: Vec<u8>,
}

impl CellLabelGrid {
    pub fn empty(spec: GridSpec) -> Self {
        Self {
            labels: vec![EMPTY; spec.cell_count()],
            spec,
        }
    }

    pub fn from_labels(spec: GridSpec, labels: Vec<u8>) -> Result<Self> {
        if labels.len() != spec.cell_count() {
            return Err(Error::InvalidData(format!(
                "expected {} cell labels, found {}",
                spec.cell_count(),
                labels.len()
            )));
        }
        Ok(Self { spec, labels })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn get(&self, cell: CellIndex) -> u8 {
        self.labels[cell.row * self.spec.grid_width + cell.col]
    }

    pub fn set(&mut self, cell: CellIndex, label: u8) {
        self.labels[cell.row * self.spec.grid_width + cell.col] = label;
    }

    pub fn populated(&self) -> usize {
        self.labels.iter().filter(|&&l| l != EMPTY).count()
    }
}

/// Where retained regions live, in pixels and on the grid.
pub(crate) struct Layout<'a> {
    pub width: usize,
    pub height: usize,
    /// Retained region id per pixel, 0 for discarded pixels.
    pub pixel_region: std::borrow::Cow<'a, [u32]>,
    pub region_cell: BTreeMap<u32, CellIndex>,
}

impl<'a> Layout<'a> {
    pub fn from_assignment(sp: &Superpixelation, ga: &GridAssignment) -> Result<Layout<'static>> {
        let slots = sp.max_id() as usize + 1;
        let mut keep = vec![false; slots];
        for &id in ga.assignments.keys() {
            if id as usize >= slots {
                return Err(Error::InvalidData(format!(
                    "assignment references region {id} absent from the superpixelation"
                )));
            }
            keep[id as usize] = true;
        }
        let pixel_region: Vec<u32> = sp
            .ids()
            .iter()
            .map(|&id| if keep[id as usize] { id } else { 0 })
            .collect();
        Ok(Layout {
            width: sp.width(),
            height: sp.height(),
            pixel_region: std::borrow::Cow::Owned(pixel_region),
            region_cell: ga.assignments.clone(),
        })
    }

    /// Retained region supplying each pixel's value: the pixel's own region,
    /// or for discarded pixels the region whose centroid is nearest to the
    /// pixel center (ties to the lower id).
    pub fn source_regions(&self) -> Vec<u32> {
        let map = &self.pixel_region;
        if !map.contains(&0) {
            return map.to_vec();
        }
        let mut sums: BTreeMap<u32, (f64, f64, usize)> = BTreeMap::new();
        for (i, &id) in map.iter().enumerate() {
            if id != 0 {
                let e = sums.entry(id).or_insert((0.0, 0.0, 0));
                e.0 += (i % self.width) as f64 + 0.5;
                e.1 += (i / self.width) as f64 + 0.5;
                e.2 += 1;
            }
        }
        let centroids: Vec<(u32, f64, f64)> = sums
            .into_iter()
            .map(|(id, (sx, sy, n))| (id, sx / n as f64, sy / n as f64))
            .collect();
        map.iter()
            .enumerate()
            .map(|(i, &id)| {
                if id != 0 {
                    return id;
                }
                let (px, py) = ((i % self.width) as f64 + 0.5, (i / self.width) as f64 + 0.5);
                let mut best = (f64::INFINITY, 0u32);
                for &(rid, cx, cy) in &centroids {
                    let d = (px - cx).powi(2) + (py - cy).powi(2);
                    if d < best.0 {
                        best = (d, rid);
                    }
                }
                best.1
            })
            .collect()
    }

    /// Expands per-cell values to pixels.
    pub fn expand<T: Copy>(&self, value_of_cell: impl Fn(CellIndex) -> Result<T>) -> Result<Vec<T>> {
        let per_region: BTreeMap<u32, T> = self
            .region_cell
            .iter()
            .map(|(&id, &cell)| value_of_cell(cell).map(|v| (id, v)))
            .collect::<Result<_>>()?;
        let sources = self.source_regions();
        Ok(sources.iter().map(|id| per_region[id]).collect())
    }

    pub fn rasterize(&self, mask: &Mask, spec: GridSpec) -> Result<CellLabelGrid> {
        if mask.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                found: mask.dims(),
            });
        }
        let mut histograms: BTreeMap<u32, [u32; 256]> =
            self.region_cell.keys().map(|&id| (id, [0u32; 256])).collect();
        for (&id, &label) in self.pixel_region.iter().zip(mask.labels()) {
            if id != 0 {
                if let Some(hist) = histograms.get_mut(&id) {
                    hist[label as usize] += 1;
                }
            }
        }
        let mut grid = CellLabelGrid::empty(spec);
        for (id, hist) in histograms {
            // First maximum wins, i.e. the lowest label among ties.
            let mut best = 0usize;
            for (label, &count) in hist.iter().enumerate() {
                if count > hist[best] {
                    best = label;
                }
            }
            grid.set(self.region_cell[&id], best as u8);
        }
        Ok(grid)
    }

    pub fn backproject(&self, cells: &CellLabelGrid) -> Result<Mask> {
        let labels = self.expand(|cell| match cells.get(cell) {
            EMPTY => Err(Error::InvalidData(format!(
                "populated cell {cell:?} carries the EMPTY label"
            ))),
            label => Ok(label),
        })?;
        Mask::new(self.width, self.height, labels)
    }
}

/// Places each retained region's descriptor at its assigned cell.
pub fn build_sigrid(
    img: &Image,
    sp: &Superpixelation,
    ga: &GridAssignment,
    cfg: &DescriptorConfig,
) -> Result<Sigrid> {
    if img.dims() != sp.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: img.dims(),
        });
    }
    let layout = Layout::from_assignment(sp, ga)?;
    let descriptors = compute_descriptors(img, sp, cfg)?;
    let cells = ga
        .assignments
        .iter()
        .map(|(&region, &cell)| {
            let desc = descriptors.get(&region).ok_or_else(|| {
                Error::InvalidData(format!("assigned region {region} has no pixels"))
            })?;
            Ok(CellEntry {
                cell,
                region,
                values: desc.values.iter().map(|&v| v as f32).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Sigrid::from_parts(ga.spec, *cfg, sp.dims(), cells, layout.pixel_region.into_owned())
}

/// Majority ground-truth label of each retained region, written at its
/// cell (ties to the lower label); all other cells are [`EMPTY`].
pub fn rasterize_labels(mask: &Mask, sp: &Superpixelation, ga: &GridAssignment) -> Result<CellLabelGrid> {
    if mask.dims() != sp.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: mask.dims(),
        });
    }
    Layout::from_assignment(sp, ga)?.rasterize(mask, ga.spec)
}

/// Same as [`rasterize_labels`], using the layout stored in a Sigrid.
pub fn rasterize_labels_on(mask: &Mask, sg: &Sigrid) -> Result<CellLabelGrid> {
    sg.layout().rasterize(mask, *sg.spec())
}

/// Expands cell labels to a pixel mask. Pixels of discarded regions take
/// the label of the retained region with the nearest centroid.
pub fn backproject(cells: &CellLabelGrid, sg: &Sigrid) -> Result<Mask> {
    check_spec(cells.spec(), sg.spec())?;
    sg.layout().backproject(cells)
}

/// Expands a row-major grid of per-cell scores to per-pixel scores.
pub fn backproject_scores(scores: &[f32], sg: &Sigrid) -> Result<Vec<f32>> {
    let spec = sg.spec();
    if scores.len() != spec.cell_count() {
        return Err(Error::GridMismatch {
            expected: (spec.grid_width, spec.grid_height),
            found: (scores.len(), 1),
        });
    }
    sg.layout()
        .expand(|cell| Ok(scores[cell.row * spec.grid_width + cell.col]))
}

/// Pixel IoU reached when every populated cell carries its majority
/// ground-truth label: the best any cell classifier can do on this
/// superpixelation.
pub fn max_iou(gt: &Mask, sp: &Superpixelation, ga: &GridAssignment) -> Result<f64> {
    if gt.dims() != sp.dims() {
        return Err(Error::DimensionMismatch {
            expected: sp.dims(),
            found: gt.dims(),
        });
    }
    let layout = Layout::from_assignment(sp, ga)?;
    let cells = layout.rasterize(gt, ga.spec)?;
    iou(&layout.backproject(&cells)?, gt)
}

/// [`max_iou`] computed from a Sigrid's stored layout.
pub fn max_iou_on(gt: &Mask, sg: &Sigrid) -> Result<f64> {
    let layout = sg.layout();
    let cells = layout.rasterize(gt, *sg.spec())?;
    iou(&layout.backproject(&cells)?, gt)
}

pub(crate) fn check_spec(found: &GridSpec, expected: &GridSpec) -> Result<()> {
    if found != expected {
        return Err(Error::GridMismatch {
            expected: (expected.grid_width, expected.grid_height),
            found: (found.grid_width, found.grid_height),
        });
    }
    Ok(())
}
