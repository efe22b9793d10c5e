//! `key = value` configuration files.
//!
//! One assignment per line, `#` starts a comment, blank lines are ignored.
//! Every key is optional; unknown or repeated keys are errors.

use std::collections::HashSet;

use foa_core::{Attraction, BoundaryPolicy, InitialFoa, MotionSource, SimConfig, TelegraphMode};

use crate::error::CliError;

/// Keys accepted by [`parse_config`], in documentation order.
pub const KEYS: &[&str] = &[
    "dt_frame",
    "alpha1",
    "alpha2",
    "motion_source",
    "ior_beta",
    "ior_sigma",
    "mode",
    "gamma",
    "lambda_drag",
    "c",
    "h",
    "dissipation",
    "attraction",
    "boundary",
    "hs_lambda",
    "hs_max_iters",
    "hs_tol",
    "blur_sigma0",
    "blur_decay_rate",
    "blur_floor",
    "substeps_per_frame",
    "dump_every",
    "initial_foa",
    "saccade_speed",
    "min_fixation",
];

pub const DEFAULT_DT_FRAME: f64 = 0.04;

/// A parsed configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Seconds between consecutive frames.
    pub dt_frame: f64,
    pub sim: SimConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dt_frame: DEFAULT_DT_FRAME,
            sim: SimConfig::default(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| CliError::Config { line: line_no, message };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, found {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(err(format!("unknown key {key:?}")));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(format!("key {key:?} given twice")));
        }
        apply(&mut cfg, key, value).map_err(err)?;
    }
    Ok(cfg)
}

fn apply(cfg: &mut RunConfig, key: &str, value: &str) -> Result<(), String> {
    let s = &mut cfg.sim;
    match key {
        "dt_frame" => cfg.dt_frame = float(value)?,
        "alpha1" => s.mass.alpha1 = float(value)?,
        "alpha2" => s.mass.alpha2 = float(value)?,
        "motion_source" => {
            s.mass.motion_source = match value {
                "temporal_derivative" => MotionSource::TemporalDerivative,
                "flow_magnitude" => MotionSource::FlowMagnitude,
                _ => return Err(choice(value, "temporal_derivative, flow_magnitude")),
            }
        }
        "ior_beta" => s.ior_beta = float(value)?,
        "ior_sigma" => s.ior_sigma = Some(float(value)?),
        "mode" => {
            s.mode = match value {
                "heat" => TelegraphMode::Heat,
                "wave" => TelegraphMode::Wave,
                "damped_wave" => TelegraphMode::DampedWave,
                _ => return Err(choice(value, "heat, wave, damped_wave")),
            }
        }
        "gamma" => s.gamma = float(value)?,
        "lambda_drag" => s.lambda_drag = float(value)?,
        "c" => s.c = float(value)?,
        "h" => s.h = float(value)?,
        "dissipation" => s.dissipation = float(value)?,
        "attraction" => {
            s.attraction = match value {
                "attract" => Attraction::Attract,
                "repel" => Attraction::Repel,
                _ => return Err(choice(value, "attract, repel")),
            }
        }
        "boundary" => {
            s.boundary = match value {
                "reflect" => BoundaryPolicy::Reflect,
                "clamp" => BoundaryPolicy::Clamp,
                _ => return Err(choice(value, "reflect, clamp")),
            }
        }
        "hs_lambda" => s.hs.lambda = float(value)?,
        "hs_max_iters" => s.hs.max_iters = count(value)?,
        "hs_tol" => s.hs.tol = float(value)?,
        "blur_sigma0" => s.blur.sigma0 = float(value)?,
        "blur_decay_rate" => s.blur.decay_rate = float(value)?,
        "blur_floor" => s.blur.floor = float(value)?,
        "substeps_per_frame" => s.substeps_per_frame = count(value)?,
        "dump_every" => s.dump_every = count(value)?,
        "initial_foa" => {
            s.initial_foa = if value == "center" {
                InitialFoa::Center
            } else {
                let (x, y) = value
                    .split_once(',')
                    .ok_or_else(|| format!("initial_foa must be `center` or `x, y`, got {value:?}"))?;
                InitialFoa::Explicit(float(x.trim())?, float(y.trim())?)
            }
        }
        "saccade_speed" => s.saccade_speed = float(value)?,
        "min_fixation" => s.min_fixation = float(value)?,
        _ => unreachable!("key list and match arms agree"),
    }
    Ok(())
}

fn float(v: &str) -> Result<f64, String> {
    v.parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .ok_or_else(|| format!("expected a finite number, got {v:?}"))
}

fn count(v: &str) -> Result<usize, String> {
    v.parse()
        .map_err(|_| format!("expected a non-negative integer, got {v:?}"))
}

fn choice(v: &str, options: &str) -> String {
    format!("expected one of {options}, got {v:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
        assert_eq!(parse_config("# nothing\n\n   \n").unwrap(), RunConfig::default());
    }

    #[test]
    fn every_key_parses() {
        let text = "\
dt_frame = 0.05
alpha1 = 2
alpha2 = 3   # trailing comment
motion_source = flow_magnitude
ior_beta = 0.5
ior_sigma = 6
mode = heat
gamma = 0
lambda_drag = 30
c = 10
h = 1
dissipation = 2
attraction = repel
boundary = clamp
hs_lambda = 0.2
hs_max_iters = 50
hs_tol = 1e-3
blur_sigma0 = 2
blur_decay_rate = 0.5
blur_floor = 0.25
substeps_per_frame = 4
dump_every = 10
initial_foa = 3.5, 7
saccade_speed = 20
min_fixation = 0.1
";
        let cfg = parse_config(text).unwrap();
        let s = &cfg.sim;
        assert_eq!(cfg.dt_frame, 0.05);
        assert_eq!((s.mass.alpha1, s.mass.alpha2), (2.0, 3.0));
        assert_eq!(s.mass.motion_source, MotionSource::FlowMagnitude);
        assert_eq!((s.ior_beta, s.ior_sigma), (0.5, Some(6.0)));
        assert_eq!(s.mode, TelegraphMode::Heat);
        assert_eq!((s.gamma, s.lambda_drag, s.c, s.h), (0.0, 30.0, 10.0, 1.0));
        assert_eq!(s.dissipation, 2.0);
        assert_eq!(s.attraction, Attraction::Repel);
        assert_eq!(s.boundary, BoundaryPolicy::Clamp);
        assert_eq!((s.hs.lambda, s.hs.max_iters, s.hs.tol), (0.2, 50, 1e-3));
        assert_eq!((s.blur.sigma0, s.blur.decay_rate, s.blur.floor), (2.0, 0.5, 0.25));
        assert_eq!((s.substeps_per_frame, s.dump_every), (4, 10));
        assert_eq!(s.initial_foa, InitialFoa::Explicit(3.5, 7.0));
        assert_eq!((s.saccade_speed, s.min_fixation), (20.0, 0.1));
        assert_eq!(text.lines().count(), KEYS.len());
    }

    #[test]
    fn rejects_unknown_repeated_and_malformed() {
        let line_of = |text: &str| match parse_config(text) {
            Err(CliError::Config { line, .. }) => line,
            other => panic!("expected config error, got {other:?}"),
        };
        assert_eq!(line_of("c = 1\nspeed_of_light = 3\n"), 2);
        assert_eq!(line_of("c = 1\n\nc = 2\n"), 3);
        assert_eq!(line_of("c 1\n"), 1);
        assert_eq!(line_of("c = fast\n"), 1);
        assert_eq!(line_of("c = inf\n"), 1);
        assert_eq!(line_of("mode = wavy\n"), 1);
        assert_eq!(line_of("substeps_per_frame = -1\n"), 1);
        assert_eq!(line_of("initial_foa = 3\n"), 1);
    }
}
