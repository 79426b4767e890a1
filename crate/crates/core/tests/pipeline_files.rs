use std::path::{Path, PathBuf};

use sigrid_core::config::{GridMode, PipelineConfig};
use sigrid_core::format::{read_sgrd, write_sgpd, PredictionGrid};
use sigrid_core::imaging::{load_image, load_mask, save_image_png, save_mask_png};
use sigrid_core::pipeline::{backproject_file, evaluate_dirs, render_file, run_batch};
use sigrid_core::render::RenderMode;
use sigrid_core::synth::{write_corpus, SceneParams};
use sigrid_core::{CellLabelGrid, Error, GridSpec};

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new(count: usize) -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        let params = SceneParams {
            width: 72,
            height: 60,
            noise: 0.01,
        };
        write_corpus(&root.join("images"), &root.join("masks"), count, 7, &params).unwrap();
        Self { _tmp: tmp, root }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn config(&self) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.slic.segments = 80;
        cfg.grid = GridMode::Fixed(GridSpec::square(16));
        cfg.input_dir = Some(self.path("images"));
        cfg.mask_dir = Some(self.path("masks"));
        cfg.output_dir = Some(self.path("out"));
        cfg.workers = 2;
        cfg
    }
}

fn lines(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn batch_reports_partial_failures() {
    let fx = Fixture::new(3);
    std::fs::write(fx.path("images/broken.png"), b"\x89PNG\r\n\x1a\n garbage").unwrap();
    std::fs::remove_file(fx.path("masks/scene_0001.png")).unwrap();
    let report = run_batch(&fx.config()).unwrap();
    assert_eq!(report.records.len(), 3);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].0, "broken");
    assert!(report.is_partial());
    assert!(report.records[1].max_iou.is_none());
    assert!(report.records[0].max_iou.unwrap() > 0.8);

    let summary = lines(&fx.path("out/summary.csv"));
    assert_eq!(summary.len(), 5);
    assert!(summary[0].starts_with("image_id,"));
    assert!(summary[4].starts_with("MEAN,"));
    assert_eq!(lines(&fx.path("out/timing.csv")).len(), 4);
    assert!(read_sgrd(fx.path("out/scene_0000.sgrd")).unwrap().labels.is_some());
    assert!(read_sgrd(fx.path("out/scene_0001.sgrd")).unwrap().labels.is_none());
}

#[test]
fn augmentation_writes_transformed_copies() {
    let fx = Fixture::new(2);
    let mut cfg = fx.config();
    cfg.augment = true;
    let report = run_batch(&cfg).unwrap();
    assert_eq!(report.records.len(), 8);
    let stems: Vec<&str> = report.records.iter().map(|r| r.stem.as_str()).collect();
    assert!(stems.windows(2).all(|w| w[0] < w[1]));
    assert!(stems.contains(&"scene_0000_fliph"));
    let flipped = load_image(fx.path("out/augmented/images/scene_0000_fliph.png")).unwrap();
    let original = load_image(fx.path("images/scene_0000.png")).unwrap();
    assert_eq!(flipped.rgb(0, 5), original.rgb(71, 5));
    let mask = load_mask(fx.path("out/augmented/masks/scene_0000_flipv.png")).unwrap();
    assert_eq!(mask.dims(), (72, 60));
    let rotated = report.records.iter().find(|r| r.stem.starts_with("scene_0000_rot")).unwrap();
    if rotated.stem.ends_with("rot180") {
        assert_eq!((rotated.width, rotated.height), (72, 60));
    } else {
        assert_eq!((rotated.width, rotated.height), (60, 72));
    }
}

#[test]
fn evaluation_handles_predictions_and_unmatched_stems() {
    let fx = Fixture::new(3);
    run_batch(&fx.config()).unwrap();
    let preds = fx.path("preds");
    std::fs::create_dir_all(&preds).unwrap();

    // scene_0000: oracle cell labels as SGPD. scene_0001: the ground-truth
    // mask itself. scene_0002: no prediction. extra: no SGRD file.
    let file = read_sgrd(fx.path("out/scene_0000.sgrd")).unwrap();
    write_sgpd(preds.join("scene_0000.sgpd"), &PredictionGrid::from_labels(file.labels.as_ref().unwrap())).unwrap();
    let gt1 = load_mask(fx.path("masks/scene_0001.png")).unwrap();
    save_mask_png(preds.join("scene_0001.png"), &gt1).unwrap();
    save_mask_png(preds.join("extra.png"), &gt1).unwrap();

    let report = evaluate_dirs(&preds, &fx.path("masks"), &fx.path("out"), Some(&fx.path("eval")), 0.3).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert_eq!(report.unmatched, vec!["extra".to_string(), "scene_0002".to_string()]);
    assert!(report.is_partial());
    let oracle = &report.rows[0].1;
    assert_eq!(oracle.pixel_iou, oracle.max_iou);
    assert_eq!(oracle.cell_accuracy, 1.0);
    let perfect = &report.rows[1].1;
    assert_eq!(perfect.pixel_iou, 1.0);
    // A pixel-level prediction is not limited by the superpixel layout.
    assert!(perfect.pixel_iou > perfect.max_iou);
    let csv = lines(&fx.path("eval/metrics.csv"));
    assert_eq!(csv[0], "image_id,pixel_acc,pixel_iou,pixel_maxf,cell_acc,cell_iou,cell_maxf,max_iou");
    assert_eq!(csv.len(), 4);
    assert!(fx.path("eval/metrics.txt").is_file());
}

#[test]
fn backprojection_and_rendering_from_files() {
    let fx = Fixture::new(1);
    run_batch(&fx.config()).unwrap();
    let sgrd = fx.path("out/scene_0000.sgrd");
    let file = read_sgrd(&sgrd).unwrap();
    let labels = file.labels.clone().unwrap();

    let pred = fx.path("p.sgpd");
    write_sgpd(&pred, &PredictionGrid::from_labels(&labels)).unwrap();
    let mask = backproject_file(&sgrd, &pred, &fx.path("back.png")).unwrap();
    assert_eq!(load_mask(fx.path("back.png")).unwrap(), mask);

    let wrong = PredictionGrid::from_labels(&CellLabelGrid::empty(GridSpec::square(5)));
    write_sgpd(fx.path("wrong.sgpd"), &wrong).unwrap();
    assert!(matches!(
        backproject_file(&sgrd, &fx.path("wrong.sgpd"), &fx.path("x.png")),
        Err(Error::GridMismatch { .. })
    ));

    for (mode, bg) in [
        (RenderMode::Boundaries, Some(fx.path("images/scene_0000.png"))),
        (RenderMode::Boundaries, None),
        (RenderMode::Occupancy, None),
        (RenderMode::Labels, None),
    ] {
        let out = fx.path("render.png");
        render_file(&sgrd, mode, bg.as_deref(), 6, &out).unwrap();
        let img = load_image(&out).unwrap();
        let expected = if mode == RenderMode::Boundaries { (72, 60) } else { (96, 96) };
        assert_eq!(img.dims(), expected, "{mode:?}");
    }

    let mut cfg = fx.config();
    cfg.mask_dir = None;
    cfg.output_dir = Some(fx.path("unlabelled"));
    run_batch(&cfg).unwrap();
    assert!(matches!(
        render_file(&fx.path("unlabelled/scene_0000.sgrd"), RenderMode::Labels, None, 4, &fx.path("l.png")),
        Err(Error::MissingSection("labels"))
    ));
}

#[test]
fn config_file_drives_the_batch() {
    let fx = Fixture::new(1);
    let text = format!(
        "input_dir = {}\noutput-dir = {}\nsegments = 50\nauto-grid = 40\ndescriptors = a,w,h\n",
        fx.path("images").display(),
        fx.path("cfg_out").display()
    );
    std::fs::write(fx.path("run.cfg"), text).unwrap();
    let cfg = PipelineConfig::from_file(fx.path("run.cfg")).unwrap();
    let report = run_batch(&cfg).unwrap();
    assert_eq!(report.records[0].discarded, 0);
    let file = read_sgrd(fx.path("cfg_out/scene_0000.sgrd")).unwrap();
    assert_eq!(file.sigrid.channels(), 3);
    assert!(file.sigrid.spec().grid_width <= 40);

    let img = load_image(fx.path("images/scene_0000.png")).unwrap();
    save_image_png(fx.path("copy.png"), &img).unwrap();
    assert_eq!(load_image(fx.path("copy.png")).unwrap(), img);
}
