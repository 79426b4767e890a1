//! File-level drivers behind the `sigrid` command.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::assembly::{backproject, build_sigrid, max_iou, rasterize_labels, CellLabelGrid, Sigrid, EMPTY};
use crate::augment;
use crate::config::{GridMode, PipelineConfig};
use crate::error::{Error, Result};
use crate::format::{read_sgpd, read_sgrd, write_sgrd, SgrdHeader};
use crate::gridmap::{map_to_grid, min_collision_free_grid, GridAssignment};
use crate::imaging::{load_image, load_mask, save_image_png, save_mask_png, Image, Mask};
use crate::metrics::{evaluate, evaluate_mask, to_csv, to_table, CellPrediction, MetricsReport};
use crate::render::{render_boundaries, render_labels, render_occupancy, RenderMode};
use crate::slic::slic_segment;

/// Extensions recognized for images and masks, in lookup order.
pub const IMAGE_EXTENSIONS: [&str; 4] = ["png", "ppm", "pgm", "pnm"];

/// Everything produced for one image.
#[derive(Clone, Debug)]
pub struct BuildOutcome {
    pub sigrid: Sigrid,
    pub labels: Option<CellLabelGrid>,
    pub assignment: GridAssignment,
    /// Superpixels produced by segmentation, before centroid merging.
    pub segments: usize,
    pub max_iou: Option<f64>,
    pub seconds: f64,
}

/// Segments `img`, maps it to the configured grid and assembles the Sigrid,
/// with cell labels and the reachable IoU when a mask is given.
pub fn build(img: &Image, mask: Option<&Mask>, cfg: &PipelineConfig) -> Result<BuildOutcome> {
    cfg.validate()?;
    if let Some(m) = mask {
        if m.dims() != img.dims() {
            return Err(Error::DimensionMismatch {
                expected: img.dims(),
                found: m.dims(),
            });
        }
    }
    let start = Instant::now();
    let sp = slic_segment(img, &cfg.slic)?;
    let spec = match cfg.grid {
        GridMode::Fixed(spec) => spec,
        GridMode::Auto { max_cells } => min_collision_free_grid(&sp, max_cells),
    };
    let (merged, ga) = map_to_grid(&sp, &spec);
    let sigrid = build_sigrid(img, &merged, &ga, &cfg.descriptors)?;
    let (labels, bound) = match mask {
        Some(m) => (
            Some(rasterize_labels(m, &merged, &ga)?),
            Some(max_iou(m, &merged, &ga)?),
        ),
        None => (None, None),
    };
    Ok(BuildOutcome {
        sigrid,
        labels,
        assignment: ga,
        segments: sp.region_count(),
        max_iou: bound,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// [`build`] on files, writing the SGRD to `output`.
pub fn build_file(image: &Path, mask: Option<&Path>, output: &Path, cfg: &PipelineConfig) -> Result<BuildOutcome> {
    let img = load_image(image)?;
    let mask = mask.map(load_mask).transpose()?;
    let outcome = build(&img, mask.as_ref(), cfg)?;
    write_sgrd(output, &outcome.sigrid, outcome.labels.as_ref())?;
    log::info!(
        "{}: {} superpixels, {} retained on {}x{}, collision rate {:.4}, {:.3}s",
        image.display(),
        outcome.segments,
        outcome.sigrid.retained_count(),
        outcome.sigrid.spec().grid_width,
        outcome.sigrid.spec().grid_height,
        outcome.assignment.collision_rate,
        outcome.seconds
    );
    Ok(outcome)
}

fn has_image_extension(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        .unwrap_or(false)
}

fn stem_of(path: &Path) -> Option<String> {
    path.file_stem().and_then(|s| s.to_str()).map(str::to_string)
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|entry| entry.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<Vec<_>>>()?;
    paths.retain(|p| p.is_file());
    paths.sort();
    Ok(paths)
}

/// Image files of `dir` as `(stem, path)`, sorted by stem. When several
/// files share a stem the first in [`IMAGE_EXTENSIONS`] order wins.
pub fn list_images(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut found: std::collections::BTreeMap<String, PathBuf> = Default::default();
    for path in read_dir_sorted(dir)?.into_iter().filter(|p| has_image_extension(p)) {
        let Some(stem) = stem_of(&path) else { continue };
        if let Some(prev) = found.get(&stem) {
            log::warn!("{}: stem already taken by {}, skipped", path.display(), prev.display());
            continue;
        }
        found.insert(stem, path);
    }
    Ok(found.into_iter().collect())
}

/// `dir/<stem>.<ext>` for the first existing image extension.
pub fn find_image(dir: &Path, stem: &str) -> Option<PathBuf> {
    IMAGE_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{stem}.{ext}")))
        .find(|p| p.is_file())
}

/// One successfully processed image of a batch.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchRecord {
    pub stem: String,
    pub width: usize,
    pub height: usize,
    pub segments: usize,
    pub merged_regions: usize,
    pub retained: usize,
    pub discarded: usize,
    pub collision_rate: f64,
    pub max_iou: Option<f64>,
    pub sgrd_bytes: u64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BatchReport {
    /// Sorted by stem.
    pub records: Vec<BatchRecord>,
    /// `(stem, error message)`, sorted by stem.
    pub failures: Vec<(String, String)>,
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl BatchReport {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }

    pub fn mean_collision_rate(&self) -> Option<f64> {
        mean(self.records.iter().map(|r| r.collision_rate))
    }

    /// Mean over the images that had a mask.
    pub fn mean_max_iou(&self) -> Option<f64> {
        mean(self.records.iter().filter_map(|r| r.max_iou))
    }

    /// Per-image statistics with a trailing `MEAN` row. Contains no timings,
    /// so it is identical across runs with the same inputs.
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "image_id,width,height,segments,merged_regions,retained,discarded,collision_rate,max_iou,sgrd_bytes\n",
        );
        let opt = |v: Option<f64>| v.map(|v| format!("{v:.6}")).unwrap_or_default();
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{:.6},{},{}",
                r.stem,
                r.width,
                r.height,
                r.segments,
                r.merged_regions,
                r.retained,
                r.discarded,
                r.collision_rate,
                opt(r.max_iou),
                r.sgrd_bytes
            );
        }
        let _ = writeln!(
            out,
            "MEAN,,,,,,,{},{},",
            opt(self.mean_collision_rate()),
            opt(self.mean_max_iou())
        );
        out
    }

    pub fn timing_csv(&self) -> String {
        let mut out = String::from("image_id,seconds\n");
        for r in &self.records {
            let _ = writeln!(out, "{},{:.6}", r.stem, r.seconds);
        }
        out
    }
}

struct Job {
    stem: String,
    image: PathBuf,
    mask: Option<PathBuf>,
}

fn required_dir<'a>(dir: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    dir.as_deref()
        .ok_or_else(|| Error::InvalidParameter(format!("{name} is required")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the rotated/flipped copies of one source into `aug_dir`.
fn augment_job(job: &Job, aug_dir: &Path) -> Result<Vec<Job>> {
    let img = load_image(&job.image)?;
    let mask = job.mask.as_deref().map(load_mask).transpose()?;
    augment::expand(&job.stem, &img, mask.as_ref())
        .into_iter()
        .map(|(stem, img, mask)| {
            let image = aug_dir.join("images").join(format!("{stem}.png"));
            save_image_png(&image, &img)?;
            let mask = match mask {
                Some(m) => {
                    let path = aug_dir.join("masks").join(format!("{stem}.png"));
                    save_mask_png(&path, &m)?;
                    Some(path)
                }
                None => None,
            };
            Ok(Job { stem, image, mask })
        })
        .collect()
}

fn run_job(job: &Job, out_dir: &Path, cfg: &PipelineConfig) -> Result<BatchRecord> {
    let output = out_dir.join(format!("{}.sgrd", job.stem));
    let o = build_file(&job.image, job.mask.as_deref(), &output, cfg)?;
    let sgrd_bytes = std::fs::metadata(&output).map_err(|e| Error::io(&output, e))?.len();
    let (width, height) = o.sigrid.source_dims();
    Ok(BatchRecord {
        stem: job.stem.clone(),
        width,
        height,
        segments: o.segments,
        merged_regions: o.assignment.region_count,
        retained: o.assignment.retained_count(),
        discarded: o.assignment.discarded.len(),
        collision_rate: o.assignment.collision_rate,
        max_iou: o.max_iou,
        sgrd_bytes,
        seconds: o.seconds,
    })
}

/// Builds a Sigrid for every image of `cfg.input_dir` on `cfg.workers`
/// threads, writing `<stem>.sgrd`, `summary.csv` and `timing.csv` to
/// `cfg.output_dir`. Masks are looked up as `<mask_dir>/<stem>.<ext>`.
///
/// Failing images are reported, not fatal; an input directory without
/// images is an error.
pub fn run_batch(cfg: &PipelineConfig) -> Result<BatchReport> {
    cfg.validate()?;
    let input = required_dir(&cfg.input_dir, "input directory")?;
    let out_dir = required_dir(&cfg.output_dir, "output directory")?;
    let sources = list_images(input)?;
    if sources.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no images found in {}",
            input.display()
        )));
    }
    create_dir(out_dir)?;
    let mut jobs: Vec<Job> = sources
        .into_iter()
        .map(|(stem, image)| {
            let mask = cfg.mask_dir.as_deref().and_then(|d| find_image(d, &stem));
            if cfg.mask_dir.is_some() && mask.is_none() {
                log::warn!("{stem}: no mask found, labels omitted");
            }
            Job { stem, image, mask }
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("cannot start worker pool: {e}")))?;
    let mut failures = Vec::new();

    if cfg.augment {
        let aug_dir = out_dir.join("augmented");
        create_dir(&aug_dir.join("images"))?;
        create_dir(&aug_dir.join("masks"))?;
        let expanded: Vec<(String, Result<Vec<Job>>)> = pool.install(|| {
            jobs.par_iter()
                .map(|j| (j.stem.clone(), augment_job(j, &aug_dir)))
                .collect()
        });
        for (stem, result) in expanded {
            match result {
                Ok(extra) => jobs.extend(extra),
                Err(e) => failures.push((stem, e.to_string())),
            }
        }
        jobs.sort_by(|a, b| a.stem.cmp(&b.stem));
    }

    let results: Vec<Result<BatchRecord>> =
        pool.install(|| jobs.par_iter().map(|j| run_job(j, out_dir, cfg)).collect());
    let mut report = BatchReport::default();
    for (job, result) in jobs.iter().zip(results) {
        match result {
            Ok(r) => report.records.push(r),
            Err(e) => {
                log::error!("{}: {e}", job.stem);
                failures.push((job.stem.clone(), e.to_string()));
            }
        }
    }
    failures.sort();
    failures.dedup_by(|a, b| a.0 == b.0);
    report.failures = failures;
    write_text(&out_dir.join("summary.csv"), &report.summary_csv())?;
    write_text(&out_dir.join("timing.csv"), &report.timing_csv())?;
    Ok(report)
}

/// Reads cell labels from an SGPD prediction or an SGRD file's label section.
pub fn read_cell_labels(path: &Path) -> Result<CellLabelGrid> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("sgrd") => read_sgrd(path)?.labels.ok_or(Error::MissingSection("labels")),
        _ => {
            let pred = read_sgpd(path)?;
            CellLabelGrid::from_labels(pred.spec, pred.labels)
        }
    }
}

/// Expands the cell labels in `prediction` to a pixel mask over the layout
/// stored in `sgrd`, writing a 0/255 PNG.
pub fn backproject_file(sgrd: &Path, prediction: &Path, output: &Path) -> Result<Mask> {
    let file = read_sgrd(sgrd)?;
    let labels = read_cell_labels(prediction)?;
    let mask = backproject(&labels, &file.sigrid)?;
    save_mask_png(output, &mask)?;
    Ok(mask)
}

#[derive(Clone, Debug, Default)]
pub struct EvalReport {
    /// Sorted by stem.
    pub rows: Vec<(String, MetricsReport)>,
    /// Stems missing a prediction, ground truth or SGRD file.
    pub unmatched: Vec<String>,
    pub failures: Vec<(String, String)>,
}

impl EvalReport {
    pub fn is_partial(&self) -> bool {
        !self.unmatched.is_empty() || !self.failures.is_empty()
    }

    pub fn mean(&self) -> Option<MetricsReport> {
        crate::metrics::corpus_mean(&self.rows.iter().map(|r| r.1).collect::<Vec<_>>())
    }
}

fn find_prediction(dir: &Path, stem: &str) -> Option<PathBuf> {
    let sgpd = dir.join(format!("{stem}.sgpd"));
    if sgpd.is_file() {
        Some(sgpd)
    } else {
        find_image(dir, stem)
    }
}

fn evaluate_one(pred: &Path, gt: &Path, sgrd: &Path, beta: f64) -> Result<MetricsReport> {
    let sg = read_sgrd(sgrd)?.sigrid;
    let gt = load_mask(gt)?;
    if pred.extension().and_then(|e| e.to_str()) == Some("sgpd") {
        let pred: CellPrediction = read_sgpd(pred)?.to_cell_prediction()?;
        evaluate(&pred, &gt, &sg, beta)
    } else {
        evaluate_mask(&load_mask(pred)?, &gt, &sg, beta)
    }
}

/// Scores every stem that has an SGRD file, a prediction (`.sgpd` or a mask
/// image) and a ground-truth mask. Writes `metrics.csv` and `metrics.txt`
/// to `out_dir` when given.
pub fn evaluate_dirs(
    pred_dir: &Path,
    gt_dir: &Path,
    sgrd_dir: &Path,
    out_dir: Option<&Path>,
    beta: f64,
) -> Result<EvalReport> {
    let mut stems: Vec<String> = read_dir_sorted(sgrd_dir)?
        .iter()
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("sgrd"))
        .filter_map(|p| stem_of(p))
        .collect();
    if stems.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "no .sgrd files in {}",
            sgrd_dir.display()
        )));
    }
    stems.sort();
    let mut report = EvalReport::default();
    for path in read_dir_sorted(pred_dir)? {
        let is_pred = has_image_extension(&path) || path.extension().and_then(|e| e.to_str()) == Some("sgpd");
        if let Some(stem) = stem_of(&path).filter(|_| is_pred) {
            if stems.binary_search(&stem).is_err() && !report.unmatched.contains(&stem) {
                log::warn!("{stem}: prediction without an SGRD file");
                report.unmatched.push(stem);
            }
        }
    }
    for stem in &stems {
        let (Some(pred), Some(gt)) = (find_prediction(pred_dir, stem), find_image(gt_dir, stem)) else {
            log::warn!("{stem}: missing prediction or ground truth, skipped");
            report.unmatched.push(stem.clone());
            continue;
        };
        let sgrd = sgrd_dir.join(format!("{stem}.sgrd"));
        match evaluate_one(&pred, &gt, &sgrd, beta) {
            Ok(m) => report.rows.push((stem.clone(), m)),
            Err(e) => {
                log::error!("{stem}: {e}");
                report.failures.push((stem.clone(), e.to_string()));
            }
        }
    }
    report.unmatched.sort();
    if let Some(dir) = out_dir {
        create_dir(dir)?;
        write_text(&dir.join("metrics.csv"), &to_csv(&report.rows))?;
        write_text(&dir.join("metrics.txt"), &to_table(&report.rows))?;
    }
    Ok(report)
}

/// Renders an SGRD file. `background` only applies to
/// [`RenderMode::Boundaries`]; `scale` is the cell size in pixels for the
/// grid modes.
pub fn render_file(sgrd: &Path, mode: RenderMode, background: Option<&Path>, scale: usize, output: &Path) -> Result<()> {
    let file = read_sgrd(sgrd)?;
    let img = match mode {
        RenderMode::Boundaries => {
            let bg = background.map(load_image).transpose()?;
            render_boundaries(&file.sigrid, bg.as_ref())?
        }
        RenderMode::Occupancy => render_occupancy(&file.sigrid, scale)?,
        RenderMode::Labels => {
            let labels = file.labels.as_ref().ok_or(Error::MissingSection("labels"))?;
            render_labels(labels, scale)?
        }
    };
    save_image_png(output, &img)
}

/// Summary of an SGRD file.
#[derive(Clone, Debug)]
pub struct InspectReport {
    pub header: SgrdHeader,
    pub file_bytes: u64,
    pub channel_names: Vec<String>,
    /// Per channel `(min, mean, max)` over retained cells.
    pub channel_stats: Vec<(f32, f64, f32)>,
    /// Fraction of pixels whose region was discarded.
    pub discarded_pixels: f64,
    /// `(label, count)` over populated cells, when labels are present.
    pub label_counts: Option<Vec<(u8, usize)>>,
}

pub fn inspect_file(path: &Path) -> Result<InspectReport> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = crate::format::decode_sgrd_header(&bytes)?;
    let file = crate::format::decode_sgrd(&bytes)?;
    let sg = &file.sigrid;
    let channel_stats = (0..sg.channels())
        .map(|ch| {
            let values = sg.cells().iter().map(|c| c.values[ch]);
            let (lo, hi, sum) = values.fold((f32::INFINITY, f32::NEG_INFINITY, 0.0f64), |(lo, hi, s), v| {
                (lo.min(v), hi.max(v), s + v as f64)
            });
            (lo, sum / sg.retained_count().max(1) as f64, hi)
        })
        .collect();
    let map = sg.region_map();
    let discarded_pixels = map.iter().filter(|&&id| id == 0).count() as f64 / map.len() as f64;
    let label_counts = file.labels.as_ref().map(|labels| {
        let mut counts = [0usize; 256];
        for c in sg.cells() {
            counts[labels.get(c.cell) as usize] += 1;
        }
        (0..=255u8)
            .filter(|&l| l != EMPTY && counts[l as usize] > 0)
            .map(|l| (l, counts[l as usize]))
            .collect()
    });
    Ok(InspectReport {
        header,
        file_bytes: bytes.len() as u64,
        channel_names: sg.config().channel_names(),
        channel_stats,
        discarded_pixels,
        label_counts,
    })
}

impl fmt::Display for InspectReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let h = &self.header;
        let cells = h.grid_width as usize * h.grid_height as usize;
        writeln!(f, "version      {}", h.version)?;
        writeln!(f, "image        {}x{}", h.image_width, h.image_height)?;
        writeln!(f, "grid         {}x{}", h.grid_width, h.grid_height)?;
        writeln!(f, "channels     {}", h.channels)?;
        writeln!(
            f,
            "descriptors  {} (bits {:#06x})",
            crate::descriptors::DescriptorConfig::from_bits(h.descriptor_bits)
                .map(|c| c.to_list())
                .unwrap_or_else(|_| "?".into()),
            h.descriptor_bits
        )?;
        writeln!(
            f,
            "retained     {} of {} cells ({:.2}%)",
            h.retained,
            cells,
            100.0 * h.retained as f64 / cells as f64
        )?;
        writeln!(f, "labels       {}", if h.has_labels() { "yes" } else { "no" })?;
        writeln!(f, "discarded    {:.2}% of pixels", 100.0 * self.discarded_pixels)?;
        writeln!(
            f,
            "size         {} bytes ({:.1}x smaller than 8-bit RGB)",
            self.file_bytes,
            (h.image_width as f64 * h.image_height as f64 * 3.0) / self.file_bytes as f64
        )?;
        if let Some(counts) = &self.label_counts {
            let parts: Vec<String> = counts.iter().map(|(l, n)| format!("{l}:{n}")).collect();
            writeln!(f, "label counts {}", parts.join(" "))?;
        }
        writeln!(f, "channel stats (min / mean / max)")?;
        for (name, (lo, m, hi)) in self.channel_names.iter().zip(&self.channel_stats) {
            writeln!(f, "  {name:<6} {lo:>12.6} {m:>12.6} {hi:>12.6}")?;
        }
        Ok(())
    }
}
