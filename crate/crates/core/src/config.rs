//! Flat `key = value` run configuration with `#` comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiments::Experiment;
use crate::servo::{Binning, ControllerConfig, StepScaling};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub noise_sigma: f64,
    pub reference: Option<PathBuf>,
    pub target: Option<PathBuf>,
    pub scene: Option<PathBuf>,
    pub output: PathBuf,
    pub controller: ControllerConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::C1,
            seed: 0,
            noise_sigma: 0.0,
            reference: None,
            target: None,
            scene: None,
            output: PathBuf::from("out"),
            controller: ControllerConfig::default(),
        }
    }
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(Error::Validation(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>()
        .map_err(|e| Error::Validation(format!("{key}: bad value {v:?}: {e}")))
}

fn parse_path(v: &str) -> Option<PathBuf> {
    if v.is_empty() {
        None
    } else {
        Some(PathBuf::from(v))
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let c = &mut self.controller;
        match key {
            "experiment" => self.experiment = value.parse()?,
            "seed" => self.seed = parse_num(key, value)?,
            "noise_sigma" => self.noise_sigma = parse_num(key, value)?,
            "reference" => self.reference = parse_path(value),
            "target" => self.target = parse_path(value),
            "scene" => self.scene = parse_path(value),
            "output" => self.output = PathBuf::from(value),
            "lambda_t" => c.lambda_t = parse_num(key, value)?,
            "lambda_r" => c.lambda_r = parse_num(key, value)?,
            "epsilon_g" => c.epsilon_g = parse_num(key, value)?,
            "max_iters" => c.max_iters = parse_num(key, value)?,
            "resolution" => c.resolution = parse_num(key, value)?,
            "dims" => {
                let parts: Vec<usize> = value
                    .split(',')
                    .map(|s| parse_num(key, s.trim()))
                    .collect::<Result<_>>()?;
                c.dims = match parts[..] {
                    [n] => [n; 3],
                    [a, b, d] => [a, b, d],
                    _ => return Err(Error::Validation(format!("dims: expected 1 or 3 values, got {value:?}"))),
                };
            }
            "bandwidth" => c.bandwidth = parse_num(key, value)?,
            "l_max" => c.l_max = parse_num(key, value)?,
            "normalized_stop" => c.normalized_stop = parse_bool(key, value)?,
            "subvoxel" => c.subvoxel = parse_bool(key, value)?,
            "smoothing" => c.smoothing = parse_num(key, value)?,
            "binning" => {
                c.binning = match value {
                    "nearest" => Binning::Nearest,
                    "linear" => Binning::Linear,
                    _ => return Err(Error::Validation(format!("binning: expected nearest or linear, got {value:?}"))),
                }
            }
            "step_scaling" => {
                c.step_scaling = match value {
                    "scalar" => StepScaling::Scalar,
                    "matrix" => StepScaling::Matrix,
                    _ => return Err(Error::Validation(format!("step_scaling: expected scalar or matrix, got {value:?}"))),
                }
            }
            "divergence_window" => c.divergence_window = parse_num(key, value)?,
            "orthonormalize_every" => c.orthonormalize_every = parse_num(key, value)?,
            _ => return Err(Error::Validation(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Validation(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Validation(format!("noise_sigma must be non-negative, got {}", self.noise_sigma)));
        }
        self.controller.validate()
    }

    /// Applies every `key = value` line of `text` on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: PathBuf::from("<config>"),
                line: idx + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            self.set(k.trim(), v.trim())?;
        }
        self.validate()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Applies the file at `path` on top of `self`.
    pub fn apply_file(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let c = &self.controller;
        let mut out = String::from("# resolved run configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("experiment", self.experiment.to_string());
        kv("seed", self.seed.to_string());
        kv("noise_sigma", self.noise_sigma.to_string());
        kv("reference", show_path(&self.reference));
        kv("target", show_path(&self.target));
        kv("scene", show_path(&self.scene));
        kv("output", self.output.display().to_string());
        kv("lambda_t", c.lambda_t.to_string());
        kv("lambda_r", c.lambda_r.to_string());
        kv("epsilon_g", c.epsilon_g.to_string());
        kv("max_iters", c.max_iters.to_string());
        kv("resolution", c.resolution.to_string());
        kv("dims", format!("{},{},{}", c.dims[0], c.dims[1], c.dims[2]));
        kv("bandwidth", c.bandwidth.to_string());
        kv("l_max", c.l_max.to_string());
        kv("normalized_stop", c.normalized_stop.to_string());
        kv("subvoxel", c.subvoxel.to_string());
        kv("smoothing", c.smoothing.to_string());
        kv(
            "binning",
            match c.binning {
                Binning::Nearest => "nearest",
                Binning::Linear => "linear",
            }
            .into(),
        );
        kv(
            "step_scaling",
            match c.step_scaling {
                StepScaling::Scalar => "scalar",
                StepScaling::Matrix => "matrix",
            }
            .into(),
        );
        kv("divergence_window", c.divergence_window.to_string());
        kv("orthonormalize_every", c.orthonormalize_every.to_string());
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}
