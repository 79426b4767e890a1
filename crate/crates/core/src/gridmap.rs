//! Placement of superpixels on the `w' x h'` grid: centroid merging,
//! cell assignment and collision discard.

use std::collections::{BTreeMap, HashSet};

use crate::dsu::DisjointSet;
use crate::error::{Error, Result};
use crate::imaging::Superpixelation;
use crate::slic::region_geometry;

/// Size of the output grid in cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridSpec {
    pub grid_width: usize,
    pub grid_height: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(80)
    }
}

impl GridSpec {
    pub fn new(grid_width: usize, grid_height: usize) -> Result<Self> {
        let spec = Self {
            grid_width,
            grid_height,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn square(n: usize) -> Self {
        Self {
            grid_width: n,
            grid_height: n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let limit = u16::MAX as usize;
        if self.grid_width == 0 || self.grid_height == 0 {
            return Err(Error::InvalidParameter("grid dimensions must be >= 1".into()));
        }
        if self.grid_width > limit || self.grid_height > limit {
            return Err(Error::InvalidParameter(format!(
                "grid dimensions must fit in 16 bits, got {}x{}",
                self.grid_width, self.grid_height
            )));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.grid_width * self.grid_height
    }

    /// Merge radius `tau = max(w, h) / max(w', h')` for an image of the given size.
    pub fn merge_radius(&self, width: usize, height: usize) -> f64 {
        width.max(height) as f64 / self.grid_width.max(self.grid_height) as f64
    }

    /// Grid cell holding a centroid given in pixel-center coordinates.
    /// Cells are half-open; positions on the far edge clamp inwards.
    pub fn cell_of(&self, centroid: (f64, f64), width: usize, height: usize) -> CellIndex {
        let row = (centroid.1 * self.grid_height as f64 / height as f64).floor();
        let col = (centroid.0 * self.grid_width as f64 / width as f64).floor();
        CellIndex {
            row: row.clamp(0.0, (self.grid_height - 1) as f64) as usize,
            col: col.clamp(0.0, (self.grid_width - 1) as f64) as usize,
        }
    }
}

/// Row/column address of a grid cell. Orders row-major.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

/// A set of pre-merge regions fused into one post-merge region.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MergedGroup {
    /// Id of the fused region in the merged superpixelation.
    pub id: u32,
    /// Original ids, ascending.
    pub members: Vec<u32>,
}

/// Outcome of placing a superpixelation on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAssignment {
    pub spec: GridSpec,
    /// Retained region id to its cell.
    pub assignments: BTreeMap<u32, CellIndex>,
    /// Groups fused by the merge step (empty when merging was not run).
    pub merged_groups: Vec<MergedGroup>,
    /// Regions dropped because a larger region claimed their cell, ascending.
    pub discarded: Vec<u32>,
    /// Number of regions considered for assignment (after merging).
    pub region_count: usize,
    /// `discarded.len() / region_count`.
    pub collision_rate: f64,
}

impl GridAssignment {
    pub fn retained_count(&self) -> usize {
        self.assignments.len()
    }

    /// Cell to retained region id.
    pub fn cell_map(&self) -> BTreeMap<CellIndex, u32> {
        self.assignments.iter().map(|(&id, &c)| (c, id)).collect()
    }

    pub fn is_retained(&self, id: u32) -> bool {
        self.assignments.contains_key(&id)
    }
}

/// Result of [`merge_close_centroids_with_groups`].
#[derive(Clone, Debug)]
pub struct MergeOutcome {
    pub superpixelation: Superpixelation,
    pub groups: Vec<MergedGroup>,
}

/// Fuses every pair of regions whose centroids lie closer than
/// `tau = max(w, h) / max(w', h')`, transitively, in a single pass.
///
/// Fused regions are renumbered compactly in order of their smallest
/// original id, so a compact input with nothing to merge comes back unchanged.
pub fn merge_close_centroids_with_groups(sp: &Superpixelation, spec: &GridSpec) -> MergeOutcome {
    let (width, height) = sp.dims();
    let tau = spec.merge_radius(width, height);
    let geo = region_geometry(sp);
    let slots = geo.areas.len();

    let mut present: Vec<(u32, f64, f64)> = geo
        .areas
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(id, _)| (id as u32, geo.centroids[id].0, geo.centroids[id].1))
        .collect();
    present.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut groups = DisjointSet::new(slots);
    for (i, &(a, ax, ay)) in present.iter().enumerate() {
        for &(b, bx, by) in &present[i + 1..] {
            if bx - ax >= tau {
                break;
            }
            if (bx - ax).hypot(by - ay) < tau {
                groups.union(a as usize, b as usize);
            }
        }
    }

    // Smallest original id of each set, then compact by that order.
    let mut min_member = vec![u32::MAX; slots];
    let mut ordered: Vec<u32> = present.iter().map(|p| p.0).collect();
    ordered.sort_unstable();
    for &id in &ordered {
        let r = groups.find(id as usize);
        min_member[r] = min_member[r].min(id);
    }
    let mut representatives: Vec<u32> = ordered
        .iter()
        .filter(|&&id| min_member[groups.find(id as usize)] == id)
        .copied()
        .collect();
    representatives.sort_unstable();
    let mut new_id = vec![0u32; slots];
    for (rank, &rep) in representatives.iter().enumerate() {
        new_id[groups.find(rep as usize)] = rank as u32 + 1;
    }

    let mut members: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for &id in &ordered {
        members
            .entry(new_id[groups.find(id as usize)])
            .or_default()
            .push(id);
    }
    let merged_groups = members
        .into_iter()
        .filter(|(_, m)| m.len() > 1)
        .map(|(id, members)| MergedGroup { id, members })
        .collect();

    let root_ids: Vec<u32> = (0..slots)
        .map(|s| if geo.areas[s] > 0 { new_id[groups.find(s)] } else { 0 })
        .collect();
    let ids = sp.ids().iter().map(|&id| root_ids[id as usize]).collect();
    let superpixelation =
        Superpixelation::new(width, height, ids).expect("merged map keeps the input dimensions");
    MergeOutcome {
        superpixelation,
        groups: merged_groups,
    }
}

/// Single-pass transitive centroid merge; see [`merge_close_centroids_with_groups`].
pub fn merge_close_centroids(sp: &Superpixelation, spec: &GridSpec) -> Superpixelation {
    merge_close_centroids_with_groups(sp, spec).superpixelation
}

/// Assigns each region to the cell containing its centroid. When several
/// regions share a cell the largest one (by pixel count) is kept, ties going
/// to the lower id; the rest are discarded.
pub fn assign_cells(sp: &Superpixelation, spec: &GridSpec) -> GridAssignment {
    let (width, height) = sp.dims();
    let geo = region_geometry(sp);
    let mut owners: BTreeMap<CellIndex, u32> = BTreeMap::new();
    let mut discarded = Vec::new();
    let mut region_count = 0;

    for (id, &area) in geo.areas.iter().enumerate() {
        if area == 0 {
            continue;
        }
        region_count += 1;
        let id = id as u32;
        let cell = spec.cell_of(geo.centroids[id as usize], width, height);
        match owners.get(&cell).copied() {
            None => {
                owners.insert(cell, id);
            }
            // Ids are visited in ascending order, so the incumbent wins ties.
            Some(owner) if geo.areas[owner as usize] >= area => discarded.push(id),
            Some(owner) => {
                discarded.push(owner);
                owners.insert(cell, id);
            }
        }
    }
    discarded.sort_unstable();
    let collision_rate = if region_count == 0 {
        0.0
    } else {
        discarded.len() as f64 / region_count as f64
    };
    GridAssignment {
        spec: *spec,
        assignments: owners.into_iter().map(|(c, id)| (id, c)).collect(),
        merged_groups: Vec::new(),
        discarded,
        region_count,
        collision_rate,
    }
}

/// Merges close centroids, then assigns cells. Returns the merged
/// superpixelation with an assignment that records the merge groups.
pub fn map_to_grid(sp: &Superpixelation, spec: &GridSpec) -> (Superpixelation, GridAssignment) {
    let merged = merge_close_centroids_with_groups(sp, spec);
    let mut assignment = assign_cells(&merged.superpixelation, spec);
    assignment.merged_groups = merged.groups;
    (merged.superpixelation, assignment)
}

/// Smallest square grid `n x n` (scanning upward from `ceil(sqrt(K))`) on
/// which no two centroids share a cell; `max_cells x max_cells` if none
/// up to that size is collision-free.
pub fn min_collision_free_grid(sp: &Superpixelation, max_cells: usize) -> GridSpec {
    let max_cells = max_cells.max(1);
    let (width, height) = sp.dims();
    let geo = region_geometry(sp);
    let centroids: Vec<(f64, f64)> = geo
        .areas
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > 0)
        .map(|(id, _)| geo.centroids[id])
        .collect();
    let start = (centroids.len() as f64).sqrt().ceil().max(1.0) as usize;
    let mut seen = HashSet::with_capacity(centroids.len());
    for n in start..=max_cells {
        let spec = GridSpec::square(n);
        seen.clear();
        if centroids
            .iter()
            .all(|&c| seen.insert(spec.cell_of(c, width, height)))
        {
            return spec;
        }
    }
    GridSpec::square(max_cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Builds a map of isolated single-pixel regions on a background region.
    fn dots(w: usize, h: usize, dots: &[(usize, usize)]) -> Superpixelation {
        let mut ids = vec![1u32; w * h];
        for (i, &(x, y)) in dots.iter().enumerate() {
            ids[y * w + x] = i as u32 + 2;
        }
        Superpixelation::new(w, h, ids).unwrap()
    }

    #[test]
    fn merge_radius_formula() {
        assert_eq!(GridSpec::square(80).merge_radius(400, 320), 5.0);
        assert_eq!(GridSpec::new(40, 80).unwrap().merge_radius(320, 400), 5.0);
    }

    #[test]
    fn transitive_merge() {
        // Three dots: 0-1 at 4 px, 1-2 at 4 px, 0-2 at 8 px; tau = 100/20 = 5.
        let sp = dots(100, 100, &[(10, 10), (14, 10), (18, 10)]);
        let spec = GridSpec::square(20);
        let out = merge_close_centroids_with_groups(&sp, &spec);
        assert_eq!(out.groups.len(), 1);
        assert_eq!(out.groups[0].members, vec![2, 3, 4]);
        assert_eq!(out.superpixelation.region_count(), 2);
        let id = out.superpixelation.get(10, 10);
        assert_eq!(out.superpixelation.get(18, 10), id);
    }

    #[test]
    fn merge_is_identity_when_far_apart() {
        let sp = dots(100, 100, &[(10, 10), (30, 10), (10, 60)]);
        let out = merge_close_centroids(&sp, &GridSpec::square(20));
        assert_eq!(out, sp);
    }

    #[test]
    fn cell_of_corner() {
        let spec = GridSpec::square(80);
        assert_eq!(spec.cell_of((0.5, 0.5), 80, 80), CellIndex { row: 0, col: 0 });
        assert_eq!(spec.cell_of((80.0, 80.0), 80, 80), CellIndex { row: 79, col: 79 });
    }

    #[test]
    fn larger_region_wins_collision() {
        // 30x10 image, 1x1 grid: both regions share the single cell.
        let mut ids = vec![1u32; 300];
        ids[..120].fill(2);
        let sp = Superpixelation::new(30, 10, ids).unwrap();
        let ga = assign_cells(&sp, &GridSpec::square(1));
        assert_eq!(ga.assignments.keys().copied().collect::<Vec<_>>(), vec![1]);
        assert_eq!(ga.discarded, vec![2]);
        assert_eq!(ga.collision_rate, 0.5);
    }

    #[test]
    fn equal_areas_keep_lower_id() {
        let sp = Superpixelation::new(2, 1, vec![2, 1]).unwrap();
        let ga = assign_cells(&sp, &GridSpec::square(1));
        assert_eq!(ga.discarded, vec![2]);
    }

    #[test]
    fn quadrant_centroids_need_two_cells() {
        let mut ids = vec![0u32; 16];
        for y in 0..4 {
            for x in 0..4 {
                ids[y * 4 + x] = 1 + (x / 2) as u32 + 2 * (y / 2) as u32;
            }
        }
        let sp = Superpixelation::new(4, 4, ids).unwrap();
        assert_eq!(min_collision_free_grid(&sp, 80), GridSpec::square(2));

        let single = Superpixelation::new(5, 3, vec![1; 15]).unwrap();
        assert_eq!(min_collision_free_grid(&single, 80), GridSpec::square(1));
    }

    #[test]
    fn coincident_centroids_never_separate() {
        // A pixel and the ring around it share the centroid (1.5, 1.5).
        let mut ids = vec![1u32; 9];
        ids[4] = 2;
        let sp = Superpixelation::new(3, 3, ids).unwrap();
        let spec = min_collision_free_grid(&sp, 12);
        assert_eq!(spec, GridSpec::square(12));
        assert_eq!(assign_cells(&sp, &spec).discarded.len(), 1);
    }
}
