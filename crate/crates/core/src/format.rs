//! On-disk formats.
//!
//! SGRD (little-endian) stores a Sigrid, its optional cell labels and the
//! run-length coded retained-region map:
//!
//! ```text
//! magic "SGRD" | version u16 = 1 | flags u16 (bit0: labels present)
//! image w u32 | image h u32 | grid w' u16 | grid h' u16 | channels d u16
//! retained count u32 | descriptor bitmask u16
//! retained records sorted by (row, col):
//!     row u16 | col u16 | region id u32 | d x f32
//! [labels: retained count x u8, same order]
//! run count u32 | runs: (length u32, region id u32), row-major, id 0 = discarded
//! ```
//!
//! SGPD holds per-cell predictions:
//!
//! ```text
//! magic "SGPD" | w' u16 | h' u16 | w'h' x f32 scores | w'h' x u8 labels
//! ```
//! both row-major.

use std::path::Path;

use crate::assembly::{CellEntry, CellLabelGrid, Sigrid, EMPTY};
use crate::descriptors::DescriptorConfig;
use crate::error::{Error, Result};
use crate::gridmap::{CellIndex, GridSpec};
use crate::metrics::CellPrediction;
use crate::rle::{self, Run};

pub const SGRD_MAGIC: &[u8; 4] = b"SGRD";
pub const SGRD_VERSION: u16 = 1;
pub const SGPD_MAGIC: &[u8; 4] = b"SGPD";
const FLAG_LABELS: u16 = 1;
/// Size of the fixed SGRD header in bytes.
pub const SGRD_HEADER_LEN: usize = 28;

/// Fixed-size SGRD header fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SgrdHeader {
    pub version: u16,
    pub flags: u16,
    pub image_width: u32,
    pub image_height: u32,
    pub grid_width: u16,
    pub grid_height: u16,
    pub channels: u16,
    pub retained: u32,
    pub descriptor_bits: u16,
}

impl SgrdHeader {
    pub fn has_labels(&self) -> bool {
        self.flags & FLAG_LABELS != 0
    }
}

/// Contents of an SGRD file.
#[derive(Clone, Debug, PartialEq)]
pub struct SgrdFile {
    pub sigrid: Sigrid,
    pub labels: Option<CellLabelGrid>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], format: &'static str) -> Self {
        Self {
            bytes,
            pos: 0,
            format,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.format,
                format!("truncated at byte {} (need {n} more)", self.pos),
            ));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::format(
                self.format,
                format!("{} trailing bytes", self.bytes.len() - self.pos),
            ));
        }
        Ok(())
    }
}

fn to_u16(v: usize, what: &str) -> Result<u16> {
    u16::try_from(v).map_err(|_| Error::InvalidData(format!("{what} {v} does not fit in u16")))
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidData(format!("{what} {v} does not fit in u32")))
}

/// Serializes a Sigrid and optional labels. Labels must be non-EMPTY on
/// every populated cell and EMPTY elsewhere.
pub fn encode_sgrd(sigrid: &Sigrid, labels: Option<&CellLabelGrid>) -> Result<Vec<u8>> {
    let spec = sigrid.spec();
    let (w, h) = sigrid.source_dims();
    let d = sigrid.channels();
    if let Some(labels) = labels {
        crate::assembly::check_spec(labels.spec(), spec)?;
        if labels.populated() != sigrid.retained_count() {
            return Err(Error::InvalidData(format!(
                "label grid populates {} cells, Sigrid has {}",
                labels.populated(),
                sigrid.retained_count()
            )));
        }
    }

    let runs = rle::encode(sigrid.region_map());
    let mut out = Vec::with_capacity(
        SGRD_HEADER_LEN + sigrid.retained_count() * (9 + 4 * d) + 4 + runs.len() * 8,
    );
    out.extend_from_slice(SGRD_MAGIC);
    out.extend_from_slice(&SGRD_VERSION.to_le_bytes());
    let flags = if labels.is_some() { FLAG_LABELS } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&to_u32(w, "image width")?.to_le_bytes());
    out.extend_from_slice(&to_u32(h, "image height")?.to_le_bytes());
    out.extend_from_slice(&to_u16(spec.grid_width, "grid width")?.to_le_bytes());
    out.extend_from_slice(&to_u16(spec.grid_height, "grid height")?.to_le_bytes());
    out.extend_from_slice(&to_u16(d, "channel count")?.to_le_bytes());
    out.extend_from_slice(&to_u32(sigrid.retained_count(), "retained count")?.to_le_bytes());
    out.extend_from_slice(&sigrid.config().to_bits().to_le_bytes());

    for c in sigrid.cells() {
        out.extend_from_slice(&(c.cell.row as u16).to_le_bytes());
        out.extend_from_slice(&(c.cell.col as u16).to_le_bytes());
        out.extend_from_slice(&c.region.to_le_bytes());
        for v in &c.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(labels) = labels {
        for c in sigrid.cells() {
            let label = labels.get(c.cell);
            if label == EMPTY {
                return Err(Error::InvalidData(format!(
                    "populated cell {:?} has no label",
                    c.cell
                )));
            }
            out.push(label);
        }
    }
    out.extend_from_slice(&to_u32(runs.len(), "run count")?.to_le_bytes());
    for run in &runs {
        out.extend_from_slice(&run.length.to_le_bytes());
        out.extend_from_slice(&run.value.to_le_bytes());
    }
    Ok(out)
}

fn read_header(r: &mut Reader<'_>) -> Result<SgrdHeader> {
    if r.take(4)? != SGRD_MAGIC {
        return Err(Error::format("SGRD", "bad magic"));
    }
    let header = SgrdHeader {
        version: r.u16()?,
        flags: r.u16()?,
        image_width: r.u32()?,
        image_height: r.u32()?,
        grid_width: r.u16()?,
        grid_height: r.u16()?,
        channels: r.u16()?,
        retained: r.u32()?,
        descriptor_bits: r.u16()?,
    };
    if header.version != SGRD_VERSION {
        return Err(Error::format(
            "SGRD",
            format!("unsupported version {}", header.version),
        ));
    }
    if header.flags & !FLAG_LABELS != 0 {
        return Err(Error::format("SGRD", format!("unknown flags {:#06x}", header.flags)));
    }
    Ok(header)
}

/// Parses only the fixed header.
pub fn decode_sgrd_header(bytes: &[u8]) -> Result<SgrdHeader> {
    read_header(&mut Reader::new(bytes, "SGRD"))
}

pub fn decode_sgrd(bytes: &[u8]) -> Result<SgrdFile> {
    let mut r = Reader::new(bytes, "SGRD");
    let header = read_header(&mut r)?;
    let config = DescriptorConfig::from_bits(header.descriptor_bits)
        .map_err(|e| Error::format("SGRD", e.to_string()))?;
    let d = header.channels as usize;
    if config.channels() != d {
        return Err(Error::format(
            "SGRD",
            format!(
                "descriptor mask implies {} channels, header says {d}",
                config.channels()
            ),
        ));
    }
    let spec = GridSpec::new(header.grid_width as usize, header.grid_height as usize)
        .map_err(|e| Error::format("SGRD", e.to_string()))?;
    let (w, h) = (header.image_width as usize, header.image_height as usize);
    let retained = header.retained as usize;
    if retained > spec.cell_count() {
        return Err(Error::format("SGRD", "more records than grid cells"));
    }

    let mut cells = Vec::with_capacity(retained);
    for _ in 0..retained {
        let row = r.u16()? as usize;
        let col = r.u16()? as usize;
        let region = r.u32()?;
        let values = (0..d).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
        cells.push(CellEntry {
            cell: CellIndex { row, col },
            region,
            values,
        });
    }
    if cells.windows(2).any(|p| p[0].cell >= p[1].cell) {
        return Err(Error::format("SGRD", "records not sorted by (row, col)"));
    }

    let labels = if header.has_labels() {
        let mut grid = CellLabelGrid::empty(spec);
        for c in &cells {
            if c.cell.row >= spec.grid_height || c.cell.col >= spec.grid_width {
                return Err(Error::format("SGRD", "record outside grid"));
            }
            let label = r.u8()?;
            if label == EMPTY {
                return Err(Error::format("SGRD", "EMPTY label on a populated cell"));
            }
            grid.set(c.cell, label);
        }
        Some(grid)
    } else {
        None
    };

    let run_count = r.u32()? as usize;
    if run_count > w.saturating_mul(h) {
        return Err(Error::format("SGRD", "more runs than pixels"));
    }
    let mut runs = Vec::with_capacity(run_count);
    for _ in 0..run_count {
        runs.push(Run {
            length: r.u32()?,
            value: r.u32()?,
        });
    }
    r.finish()?;
    let region_map = rle::decode(&runs, w * h)?;
    let sigrid = Sigrid::from_parts(spec, config, (w, h), cells, region_map)
        .map_err(|e| Error::format("SGRD", e.to_string()))?;
    Ok(SgrdFile { sigrid, labels })
}

pub fn write_sgrd(path: impl AsRef<Path>, sigrid: &Sigrid, labels: Option<&CellLabelGrid>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_sgrd(sigrid, labels)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_sgrd(path: impl AsRef<Path>) -> Result<SgrdFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sgrd(&bytes)
}

/// Per-cell scores and hard labels for one image.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionGrid {
    pub spec: GridSpec,
    pub scores: Vec<f32>,
    pub labels: Vec<u8>,
}

impl PredictionGrid {
    /// Builds a prediction from scores, labelling cells with `score >= 0.5`
    /// as foreground.
    pub fn from_scores(spec: GridSpec, scores: Vec<f32>) -> Result<Self> {
        let labels = scores.iter().map(|&s| u8::from(s >= 0.5)).collect();
        let grid = Self {
            spec,
            scores,
            labels,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Hard labels only; scores mirror the labels.
    pub fn from_labels(labels: &CellLabelGrid) -> Self {
        let values: Vec<u8> = labels
            .labels()
            .iter()
            .map(|&l| if l == EMPTY { 0 } else { l })
            .collect();
        Self {
            spec: *labels.spec(),
            scores: values.iter().map(|&v| v as f32).collect(),
            labels: values,
        }
    }

    fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let n = self.spec.cell_count();
        if self.scores.len() != n || self.labels.len() != n {
            return Err(Error::InvalidData(format!(
                "prediction holds {} scores and {} labels for {n} cells",
                self.scores.len(),
                self.labels.len()
            )));
        }
        Ok(())
    }

    pub fn to_cell_prediction(&self) -> Result<CellPrediction> {
        Ok(CellPrediction::Scores {
            scores: self.scores.clone(),
            labels: CellLabelGrid::from_labels(self.spec, self.labels.clone())?,
        })
    }
}

pub fn encode_sgpd(pred: &PredictionGrid) -> Result<Vec<u8>> {
    pred.validate()?;
    let n = pred.spec.cell_count();
    let mut out = Vec::with_capacity(8 + 5 * n);
    out.extend_from_slice(SGPD_MAGIC);
    out.extend_from_slice(&to_u16(pred.spec.grid_width, "grid width")?.to_le_bytes());
    out.extend_from_slice(&to_u16(pred.spec.grid_height, "grid height")?.to_le_bytes());
    for s in &pred.scores {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out.extend_from_slice(&pred.labels);
    Ok(out)
}

pub fn decode_sgpd(bytes: &[u8]) -> Result<PredictionGrid> {
    let mut r = Reader::new(bytes, "SGPD");
    if r.take(4)? != SGPD_MAGIC {
        return Err(Error::format("SGPD", "bad magic"));
    }
    let spec = GridSpec::new(r.u16()? as usize, r.u16()? as usize)
        .map_err(|e| Error::format("SGPD", e.to_string()))?;
    let n = spec.cell_count();
    let scores = (0..n).map(|_| r.f32()).collect::<Result<Vec<_>>>()?;
    let labels = r.take(n)?.to_vec();
    r.finish()?;
    Ok(PredictionGrid {
        spec,
        scores,
        labels,
    })
}

pub fn write_sgpd(path: impl AsRef<Path>, pred: &PredictionGrid) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_sgpd(pred)?).map_err(|e| Error::io(path, e))
}

pub fn read_sgpd(path: impl AsRef<Path>) -> Result<PredictionGrid> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_sgpd(&bytes)
}
