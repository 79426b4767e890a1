//! Pipeline configuration: a line-oriented `key = value` file whose keys
//! match the command-line flag names.

use std::path::{Path, PathBuf};

use crate::descriptors::DescriptorConfig;
use crate::error::{Error, Result};
use crate::gridmap::GridSpec;
use crate::metrics::DEFAULT_BETA;
use crate::slic::SlicParams;

/// Fixed grid, or the smallest collision-free square grid up to a bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GridMode {
    Fixed(GridSpec),
    Auto { max_cells: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub slic: SlicParams,
    pub grid: GridMode,
    pub descriptors: DescriptorConfig,
    pub input_dir: Option<PathBuf>,
    pub mask_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub workers: usize,
    pub augment: bool,
    pub beta: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            slic: SlicParams::default(),
            grid: GridMode::Fixed(GridSpec::default()),
            descriptors: DescriptorConfig::default(),
            input_dir: None,
            mask_dir: None,
            output_dir: None,
            workers: 1,
            augment: false,
            beta: DEFAULT_BETA,
        }
    }
}

/// Recognized keys, in the spelling used by the CLI flags.
pub const KEYS: [&str; 13] = [
    "segments",
    "compactness",
    "max-iterations",
    "connectivity",
    "grid",
    "auto-grid",
    "descriptors",
    "input-dir",
    "mask-dir",
    "output-dir",
    "workers",
    "augment",
    "beta",
];

fn normalize_key(key: &str) -> String {
    key.trim().to_ascii_lowercase().replace('_', "-")
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::InvalidParameter(format!(
            "{key}: expected a boolean, got `{value}`"
        ))),
    }
}

/// Parses `80` or `80x60` (width x height).
pub fn parse_grid(value: &str) -> Result<GridSpec> {
    let value = value.trim().to_ascii_lowercase();
    let (w, h) = match value.split_once('x') {
        Some((w, h)) => (parse_num("grid", w.trim())?, parse_num("grid", h.trim())?),
        None => {
            let n = parse_num("grid", &value)?;
            (n, n)
        }
    };
    GridSpec::new(w, h)
}

/// Splits config text into `(key, value)` pairs. `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::InvalidParameter(format!("config line {}: expected `key = value`", n + 1))
        })?;
        pairs.push((normalize_key(key), value.trim().to_string()));
    }
    Ok(pairs)
}

impl PipelineConfig {
    /// Sets one key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize_key(key);
        match key.as_str() {
            "segments" => self.slic.segments = parse_num(&key, value)?,
            "compactness" => self.slic.compactness = parse_num(&key, value)?,
            "max-iterations" => self.slic.max_iterations = parse_num(&key, value)?,
            "connectivity" => self.slic.enforce_connectivity = parse_bool(&key, value)?,
            "grid" => self.grid = GridMode::Fixed(parse_grid(value)?),
            "auto-grid" => {
                self.grid = GridMode::Auto {
                    max_cells: parse_num(&key, value)?,
                }
            }
            "descriptors" => self.descriptors = DescriptorConfig::parse(value)?,
            "input-dir" => self.input_dir = Some(PathBuf::from(value)),
            "mask-dir" => self.mask_dir = Some(PathBuf::from(value)),
            "output-dir" => self.output_dir = Some(PathBuf::from(value)),
            "workers" => self.workers = parse_num(&key, value)?,
            "augment" => self.augment = parse_bool(&key, value)?,
            "beta" => self.beta = parse_num(&key, value)?,
            _ => return Err(Error::InvalidParameter(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Applies one layer of settings (a file, or the command line).
    /// `grid` and `auto-grid` may not both appear in the same layer.
    pub fn apply_layer(&mut self, pairs: &[(String, String)]) -> Result<()> {
        let has = |k: &str| pairs.iter().any(|(key, _)| normalize_key(key) == k);
        if has("grid") && has("auto-grid") {
            return Err(Error::InvalidParameter(
                "`grid` and `auto-grid` are mutually exclusive".into(),
            ));
        }
        for (k, v) in pairs {
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::default();
        cfg.apply_layer(&parse_pairs(&text)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.slic.validate()?;
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be >= 1".into()));
        }
        match self.grid {
            GridMode::Fixed(spec) => spec.validate()?,
            GridMode::Auto { max_cells } => GridSpec::square(max_cells).validate()?,
        }
        if !self.beta.is_finite() || self.beta <= 0.0 {
            return Err(Error::InvalidParameter(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }

    /// Renders the configuration in the file format.
    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("segments = {}", self.slic.segments),
            format!("compactness = {}", self.slic.compactness),
            format!("max-iterations = {}", self.slic.max_iterations),
            format!("connectivity = {}", self.slic.enforce_connectivity),
        ];
        match self.grid {
            GridMode::Fixed(s) => lines.push(format!("grid = {}x{}", s.grid_width, s.grid_height)),
            GridMode::Auto { max_cells } => lines.push(format!("auto-grid = {max_cells}")),
        }
        lines.push(format!("descriptors = {}", self.descriptors.to_list()));
        for (key, dir) in [
            ("input-dir", &self.input_dir),
            ("mask-dir", &self.mask_dir),
            ("output-dir", &self.output_dir),
        ] {
            if let Some(d) = dir {
                lines.push(format!("{key} = {}", d.display()));
            }
        }
        lines.push(format!("workers = {}", self.workers));
        lines.push(format!("augment = {}", self.augment));
        lines.push(format!("beta = {}", self.beta));
        lines.join("\n") + "\n"
    }
}
