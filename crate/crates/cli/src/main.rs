use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sigrid_core::config::{parse_pairs, PipelineConfig};
use sigrid_core::pipeline;
use sigrid_core::render::RenderMode;
use sigrid_core::synth::{write_corpus, SceneParams};
use sigrid_core::{Error, Result};

/// Build, inspect and evaluate superpixel-integrated grids.
#[derive(Parser)]
#[command(name = "sigrid", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Settings {
    /// `key = value` file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Target number of superpixels.
    #[arg(long)]
    segments: Option<usize>,
    /// Spatial weight of the superpixel distance.
    #[arg(long)]
    compactness: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Grid size, `N` or `WxH`.
    #[arg(long, conflicts_with = "auto_grid")]
    grid: Option<String>,
    /// Pick the smallest collision-free square grid, up to this side length.
    #[arg(long)]
    auto_grid: Option<usize>,
    /// Comma-separated descriptor groups: ac,a,w,h,c,s,e,hu.
    #[arg(long)]
    descriptors: Option<String>,
}

impl Settings {
    fn overrides(&self) -> Vec<(String, String)> {
        let mut pairs = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        push("segments", self.segments.map(|v| v.to_string()));
        push("compactness", self.compactness.map(|v| v.to_string()));
        push("max-iterations", self.max_iterations.map(|v| v.to_string()));
        push("grid", self.grid.clone());
        push("auto-grid", self.auto_grid.map(|v| v.to_string()));
        push("descriptors", self.descriptors.clone());
        pairs
    }

    fn load(&self, extra: Vec<(String, String)>) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        if let Some(path) = &self.config {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))?;
            cfg.apply_layer(&parse_pairs(&text)?)?;
        }
        let mut pairs = self.overrides();
        pairs.extend(extra);
        cfg.apply_layer(&pairs)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the SGRD file of one image.
    Build {
        #[arg(long)]
        image: PathBuf,
        /// Ground-truth mask; adds cell labels to the output.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, short)]
        output: PathBuf,
        #[command(flatten)]
        settings: Settings,
    },
    /// Build SGRD files for a directory of images.
    Batch {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Directory of masks named like the images.
        #[arg(long)]
        masks: Option<PathBuf>,
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        /// Also build rotated and flipped copies of every image.
        #[arg(long)]
        augment: bool,
        #[command(flatten)]
        settings: Settings,
    },
    /// Expand a cell prediction (SGPD) to a pixel mask.
    Backproject {
        #[arg(long)]
        sgrd: PathBuf,
        #[arg(long)]
        prediction: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Score predictions against ground-truth masks.
    Eval {
        /// Directory of `<stem>.sgpd` predictions or predicted mask images.
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        sgrd: PathBuf,
        /// Where to write metrics.csv and metrics.txt.
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Draw an SGRD file as a PNG.
    Render {
        #[arg(long)]
        sgrd: PathBuf,
        /// boundaries, occupancy or labels.
        #[arg(long, default_value = "boundaries")]
        mode: RenderMode,
        /// Source image drawn under the boundaries.
        #[arg(long)]
        image: Option<PathBuf>,
        /// Pixels per cell in the grid modes.
        #[arg(long, default_value_t = 8)]
        scale: usize,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Print the header and statistics of an SGRD file.
    Inspect { sgrd: PathBuf },
    /// Write a synthetic image/mask corpus.
    Synth {
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 310)]
        width: usize,
        #[arg(long, default_value_t = 375)]
        height: usize,
    },
}

enum Status {
    Done,
    Partial,
}

fn run(command: Command) -> Result<Status> {
    match command {
        Command::Build {
            image,
            mask,
            output,
            settings,
        } => {
            let cfg = settings.load(Vec::new())?;
            let o = pipeline::build_file(&image, mask.as_deref(), &output, &cfg)?;
            println!(
                "{}: {} superpixels, {} retained, collision rate {:.4}{}",
                output.display(),
                o.segments,
                o.sigrid.retained_count(),
                o.assignment.collision_rate,
                o.max_iou.map(|v| format!(", max IoU {v:.4}")).unwrap_or_default()
            );
            Ok(Status::Done)
        }
        Command::Batch {
            input,
            masks,
            output,
            workers,
            augment,
            settings,
        } => {
            let mut extra = Vec::new();
            let mut push = |k: &str, v: Option<String>| {
                if let Some(v) = v {
                    extra.push((k.to_string(), v));
                }
            };
            push("input-dir", input.map(|p| p.display().to_string()));
            push("mask-dir", masks.map(|p| p.display().to_string()));
            push("output-dir", output.map(|p| p.display().to_string()));
            push("workers", workers.map(|w| w.to_string()));
            push("augment", augment.then(|| "true".to_string()));
            let cfg = settings.load(extra)?;
            let report = pipeline::run_batch(&cfg)?;
            println!(
                "{} built, {} failed",
                report.records.len(),
                report.failures.len()
            );
            if let Some(c) = report.mean_collision_rate() {
                println!("mean collision rate {c:.4}");
            }
            if let Some(m) = report.mean_max_iou() {
                println!("mean max IoU {m:.4}");
            }
            for (stem, err) in &report.failures {
                eprintln!("failed {stem}: {err}");
            }
            Ok(if report.is_partial() { Status::Partial } else { Status::Done })
        }
        Command::Backproject {
            sgrd,
            prediction,
            output,
        } => {
            pipeline::backproject_file(&sgrd, &prediction, &output)?;
            Ok(Status::Done)
        }
        Command::Eval {
            pred,
            gt,
            sgrd,
            output,
            beta,
            config,
        } => {
            let settings = Settings {
                config,
                ..Default::default()
            };
            let cfg = settings.load(beta.map(|b| ("beta".to_string(), b.to_string())).into_iter().collect())?;
            let report = pipeline::evaluate_dirs(&pred, &gt, &sgrd, output.as_deref(), cfg.beta)?;
            print!("{}", sigrid_core::metrics::to_table(&report.rows));
            for stem in &report.unmatched {
                eprintln!("unmatched {stem}");
            }
            for (stem, err) in &report.failures {
                eprintln!("failed {stem}: {err}");
            }
            Ok(if report.is_partial() { Status::Partial } else { Status::Done })
        }
        Command::Render {
            sgrd,
            mode,
            image,
            scale,
            output,
        } => {
            pipeline::render_file(&sgrd, mode, image.as_deref(), scale, &output)?;
            Ok(Status::Done)
        }
        Command::Inspect { sgrd } => {
            print!("{}", pipeline::inspect_file(&sgrd)?);
            Ok(Status::Done)
        }
        Command::Synth {
            output,
            count,
            seed,
            width,
            height,
        } => {
            let params = SceneParams {
                width,
                height,
                ..Default::default()
            };
            let stems = write_corpus(&output.join("images"), &output.join("masks"), count, seed, &params)?;
            println!("wrote {} scenes to {}", stems.len(), output.display());
            Ok(Status::Done)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::Partial) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
