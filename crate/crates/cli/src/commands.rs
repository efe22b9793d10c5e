//! Subcommand implementations.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use foa_core::export::{read_field, write_field, write_scanpath_csv};
use foa_core::optical_flow::horn_schunck;
use foa_core::potential::{convergence_in_c, direct_potential, poisson_solve, ConvergenceSetup};
use foa_core::retina::{encode_pgm, gradient, load_pgm};
use foa_core::synth;
use foa_core::{run_simulation, Boundary, Field2D, FrameSequence, TelegraphMode, TelegraphParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_config, RunConfig};
use crate::error::CliError;

pub const SCANPATH_FILE: &str = "scanpath.csv";

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::file(path, e))?;
    parse_config(&text)
}

fn load_frame(path: &Path) -> Result<Field2D, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::file(path, e))?;
    load_pgm(&bytes).map_err(|e| CliError::input(path, e))
}

pub fn load_field(path: &Path) -> Result<Field2D, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::file(path, e))?;
    read_field(&bytes[..]).map_err(|e| CliError::input(path, e))
}

fn create(path: &Path) -> Result<BufWriter<fs::File>, CliError> {
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::file(path, e))
}

pub fn save_field(f: &Field2D, path: &Path) -> Result<(), CliError> {
    write_field(f, create(path)?).map_err(|e| CliError::file(path, e))
}

/// Frame paths matching `pattern`, in lexicographic order.
pub fn frame_paths(pattern: &str) -> Result<Vec<PathBuf>, CliError> {
    let entries = glob::glob(pattern).map_err(|e| CliError::Usage(format!("bad frame pattern {pattern:?}: {e}")))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| {
            let path = e.path().to_path_buf();
            CliError::file(path, e.into())
        })?;
        if path.is_file() {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateReport {
    pub frames: usize,
    pub samples: usize,
    pub dumps: usize,
}

/// Runs the pipeline over the frames matching `pattern` and writes
/// `scanpath.csv` plus `<name>_<frame>.foaf` dumps into `out`.
pub fn simulate(config: &Path, pattern: &str, out: &Path) -> Result<SimulateReport, CliError> {
    let cfg = load_config(config)?;
    // Stability and parameter checks run before any frame is read.
    cfg.sim.validate(cfg.dt_frame)?;
    let paths = frame_paths(pattern)?;
    if paths.len() < 2 {
        return Err(foa_core::Error::Data(format!(
            "pattern {pattern:?} matched {} frame(s), need at least 2",
            paths.len()
        ))
        .into());
    }
    let frames = paths.iter().map(|p| load_frame(p)).collect::<Result<Vec<_>, _>>()?;
    let output = run_simulation(&FrameSequence::new(frames, cfg.dt_frame)?, &cfg.sim)?;

    fs::create_dir_all(out).map_err(|e| CliError::file(out, e))?;
    let csv = out.join(SCANPATH_FILE);
    write_scanpath_csv(&output.scanpath, create(&csv)?).map_err(|e| CliError::file(&csv, e))?;
    for d in &output.dumps {
        save_field(&d.field, &out.join(format!("{}_{:06}.foaf", d.name, d.frame)))?;
    }
    Ok(SimulateReport {
        frames: paths.len(),
        samples: output.scanpath.len(),
        dumps: output.dumps.len(),
    })
}

/// Horn–Schunck flow between two PGM frames, written as two consecutive
/// FOAF records (x component, then y component) in px/s.
pub fn flow(config: &Path, frame_a: &Path, frame_b: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    cfg.sim.hs.validate()?;
    let a = load_frame(frame_a)?;
    let b = load_frame(frame_b)?;
    let v = horn_schunck(&a, &b, cfg.dt_frame, &cfg.sim.hs)?;
    let mut sink = create(out)?;
    for f in [v.x_component(), v.y_component()] {
        write_field(&f, &mut sink).map_err(|e| CliError::file(out, e))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonOptions {
    pub h: f64,
    pub tol: f64,
    pub max_iters: usize,
    /// Take border values from the log-kernel sum instead of zero.
    pub oracle: bool,
}

/// Solves for the potential of the mass in `mu`. With `oracle`, returns the
/// relative L2 gradient error against the kernel sum over the interior.
pub fn poisson(mu_path: &Path, out: &Path, opts: &PoissonOptions) -> Result<Option<f64>, CliError> {
    let mu = load_field(mu_path)?;
    let (u, err) = if opts.oracle {
        let reference = direct_potential(&mu, opts.h)?;
        let u = poisson_solve(
            &mu,
            opts.h,
            opts.tol,
            opts.max_iters,
            &Boundary::DirichletValues(reference.clone()),
        )?;
        let err = interior_gradient_error(&u, &reference, opts.h)?;
        (u, Some(err))
    } else {
        (
            poisson_solve(&mu, opts.h, opts.tol, opts.max_iters, &Boundary::DirichletZero)?,
            None,
        )
    };
    save_field(&u, out)?;
    Ok(err)
}

fn interior_gradient_error(u: &Field2D, reference: &Field2D, h: f64) -> Result<f64, CliError> {
    let (gu, gr) = (gradient(u, h)?, gradient(reference, h)?);
    let (mut num, mut den) = (0.0, 0.0);
    for y in 1..u.height().saturating_sub(1) {
        for x in 1..u.width().saturating_sub(1) {
            let (p, q) = (gu.get(x, y), gr.get(x, y));
            num += (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
            den += q[0] * q[0] + q[1] * q[1];
        }
    }
    Ok(if den == 0.0 { 0.0 } else { (num / den).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergeOptions {
    pub mode: TelegraphMode,
    pub gamma: f64,
    pub lambda_drag: f64,
    pub h: f64,
    pub dt: f64,
    pub horizon: f64,
    pub poisson_tol: f64,
    pub poisson_max_iters: usize,
}

impl Default for ConvergeOptions {
    fn default() -> Self {
        Self {
            mode: TelegraphMode::DampedWave,
            gamma: 0.1,
            lambda_drag: 2.0,
            h: 1.0,
            dt: 0.025,
            horizon: 8.0,
            poisson_tol: 1e-10,
            poisson_max_iters: 100_000,
        }
    }
}

/// Relative gradient error of the evolved potential for each `c`.
pub fn converge(mu_path: &Path, cs: &[f64], opts: &ConvergeOptions) -> Result<Vec<(f64, f64)>, CliError> {
    if cs.is_empty() {
        return Err(CliError::Usage("--c needs at least one value".into()));
    }
    let setup = ConvergenceSetup {
        base: TelegraphParams {
            gamma: opts.gamma,
            lambda_drag: opts.lambda_drag,
            c: cs[0],
            h: opts.h,
            dt: opts.dt,
            mode: opts.mode,
        },
        poisson_tol: opts.poisson_tol,
        poisson_max_iters: opts.poisson_max_iters,
    };
    for &c in cs {
        TelegraphParams { c, ..setup.base }.validate()?;
    }
    let mu = load_field(mu_path)?;
    let errors = convergence_in_c(&mu, cs, opts.horizon, &setup)?;
    Ok(cs.iter().copied().zip(errors).collect())
}

/// Synthetic inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scene {
    /// Smoothed uniform noise written as one FOAF field.
    Mass,
    /// Two static Gaussian detail blobs at seeded positions.
    Blobs,
    /// A Gaussian blob crossing the frame at 5 px/s.
    Pursuit,
    /// Oblique stripes moving 1 px per frame along x.
    Stripes,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub size: usize,
    pub frames: usize,
    pub dt_frame: f64,
    pub seed: u64,
}

/// Writes a scene: a FOAF file for [`Scene::Mass`], otherwise a directory
/// of `frame_00000.pgm`, `frame_00001.pgm`, …. Returns the files written.
pub fn synth(scene: Scene, out: &Path, opts: &SynthOptions) -> Result<Vec<PathBuf>, CliError> {
    let n = opts.size;
    if n < 8 {
        return Err(CliError::Usage(format!("--size must be at least 8, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    if scene == Scene::Mass {
        let mu = synth::random_mass(n, n, 2.0, || rng.gen_range(0.0..1.0));
        save_field(&mu, out)?;
        return Ok(vec![out.to_path_buf()]);
    }
    if opts.frames < 2 {
        return Err(CliError::Usage(format!(
            "--frames must be at least 2, got {}",
            opts.frames
        )));
    }
    if !(opts.dt_frame > 0.0 && opts.dt_frame.is_finite()) {
        return Err(CliError::Usage(format!(
            "--dt-frame must be > 0, got {}",
            opts.dt_frame
        )));
    }
    let side = n as f64;
    let frames: Vec<Field2D> = match scene {
        Scene::Blobs => {
            let sigma = (side / 32.0).max(1.0);
            let mut pick = || {
                [
                    rng.gen_range(0.2 * side..0.8 * side),
                    rng.gen_range(0.2 * side..0.8 * side),
                ]
            };
            let first = pick();
            let second = loop {
                let c = pick();
                if (c[0] - first[0]).hypot(c[1] - first[1]) >= 0.35 * side {
                    break c;
                }
            };
            vec![synth::blobs(n, n, &[first, second], sigma); opts.frames]
        }
        Scene::Pursuit => {
            let start = [0.25 * side, rng.gen_range(0.35 * side..0.65 * side)];
            synth::translating_blob(n, n, start, [5.0, 0.0], side / 16.0, opts.frames, opts.dt_frame)
        }
        Scene::Stripes => {
            let angle = -std::f64::consts::FRAC_PI_4;
            (0..opts.frames)
                .map(|k| synth::stripes(n, n, angle, side / 4.0, k as f64 * angle.cos()))
                .collect()
        }
        Scene::Mass => unreachable!("handled above"),
    };
    fs::create_dir_all(out).map_err(|e| CliError::file(out, e))?;
    let mut written = Vec::with_capacity(frames.len());
    for (k, f) in frames.iter().enumerate() {
        let path = out.join(format!("frame_{k:05}.pgm"));
        let mut sink = create(&path)?;
        sink.write_all(&encode_pgm(f))
            .and_then(|_| sink.flush())
            .map_err(|e| CliError::file(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
