//! Frame-by-frame attention simulation.
//!
//! For every consecutive pair of frames:
//!
//! 1. blur both frames with the scheduled `σ(t)`;
//! 2. take the spatial gradient of the current frame and the motion field
//!    (`|∂_t b|` or the Horn–Schunck speed);
//! 3. advance inhibition of return around the current focus;
//! 4. build the mass density;
//! 5. run `substeps_per_frame` × (potential step, then focus step), recording
//!    one scanpath sample per substep.
//!
//! The finished scanpath is segmented into fixations and saccades.

use crate::error::{Error, Result};
use crate::foa::{
    detect_saccades, foa_step, Attraction, BoundaryPolicy, FoaParams, FoaState, ScanSample, Scanpath, Vec2,
};
use crate::mass::{ior_step, mass_density, IorField, IorParams, MassParams, MotionSource};
use crate::optical_flow::{horn_schunck, HsParams};
use crate::potential::{evolve_potential_in_place, PotentialState, TelegraphMode, TelegraphParams};
use crate::retina::{
    gaussian_blur, gradient, schedule_sigma, temporal_derivative, BlurSchedule, Field2D, FrameSequence,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialFoa {
    /// Geometric center of the retina.
    #[default]
    Center,
    Explicit(f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub mass: MassParams,
    pub ior_beta: f64,
    /// Inhibition footprint; `None` means `max(width, height)/16`.
    pub ior_sigma: Option<f64>,

    pub mode: TelegraphMode,
    pub gamma: f64,
    pub lambda_drag: f64,
    pub c: f64,
    pub h: f64,

    pub dissipation: f64,
    pub attraction: Attraction,
    pub boundary: BoundaryPolicy,

    pub hs: HsParams,
    pub blur: BlurSchedule,

    pub substeps_per_frame: usize,
    /// Dump `mu`, `u` and `ior` every this many frames; 0 disables dumps.
    pub dump_every: usize,
    pub initial_foa: InitialFoa,

    /// Speed (px/s) above which a sample counts as saccadic.
    pub saccade_speed: f64,
    /// Shortest fixation (s) kept between two saccades.
    pub min_fixation: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        let tele = TelegraphParams::default();
        Self {
            mass: MassParams::default(),
            ior_beta: 1.0,
            ior_sigma: None,
            mode: tele.mode,
            gamma: tele.gamma,
            lambda_drag: tele.lambda_drag,
            c: tele.c,
            h: tele.h,
            dissipation: 1.0,
            attraction: Attraction::Attract,
            boundary: BoundaryPolicy::Reflect,
            hs: HsParams::default(),
            blur: BlurSchedule::default(),
            substeps_per_frame: 8,
            dump_every: 0,
            initial_foa: InitialFoa::Center,
            saccade_speed: 30.0,
            min_fixation: 0.05,
        }
    }
}

impl SimConfig {
    pub fn telegraph(&self, dt_frame: f64) -> TelegraphParams {
        TelegraphParams {
            gamma: self.gamma,
            lambda_drag: self.lambda_drag,
            c: self.c,
            h: self.h,
            dt: dt_frame / self.substeps_per_frame.max(1) as f64,
            mode: self.mode,
        }
    }

    pub fn foa(&self, dt_frame: f64) -> FoaParams {
        FoaParams {
            dissipation: self.dissipation,
            dt: dt_frame / self.substeps_per_frame.max(1) as f64,
            attraction: self.attraction,
            boundary: self.boundary,
            h: self.h,
        }
    }

    pub fn ior(&self, width: usize, height: usize) -> IorParams {
        IorParams {
            beta: self.ior_beta,
            sigma: self
                .ior_sigma
                .unwrap_or_else(|| IorParams::for_grid(width, height).sigma),
        }
    }

    /// Checks every embedded parameter set, including the explicit
    /// stability bound of the potential at `dt_frame / substeps_per_frame`.
    pub fn validate(&self, dt_frame: f64) -> Result<()> {
        if self.substeps_per_frame == 0 {
            return Err(Error::Parameter("substeps_per_frame must be >= 1".into()));
        }
        if !(dt_frame > 0.0 && dt_frame.is_finite()) {
            return Err(Error::Parameter(format!("dt_frame must be > 0, got {dt_frame}")));
        }
        self.mass.validate()?;
        IorParams {
            beta: self.ior_beta,
            sigma: self.ior_sigma.unwrap_or(1.0),
        }
        .validate()?;
        self.hs.validate()?;
        self.blur.validate()?;
        self.telegraph(dt_frame).validate()?;
        self.foa(dt_frame).validate()?;
        if !(self.saccade_speed > 0.0 && self.min_fixation > 0.0) {
            return Err(Error::Parameter("saccade thresholds must be > 0".into()));
        }
        if let InitialFoa::Explicit(x, y) = self.initial_foa {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::Parameter("initial focus must be finite".into()));
            }
        }
        Ok(())
    }

    fn initial_position(&self, width: usize, height: usize) -> Result<Vec2> {
        let pos = match self.initial_foa {
            InitialFoa::Center => [(width - 1) as f64 / 2.0, (height - 1) as f64 / 2.0],
            InitialFoa::Explicit(x, y) => [x, y],
        };
        if pos[0] < 0.0 || pos[1] < 0.0 || pos[0] > (width - 1) as f64 || pos[1] > (height - 1) as f64 {
            return Err(Error::Domain {
                x: pos[0],
                y: pos[1],
                width,
                height,
            });
        }
        Ok(pos)
    }
}

/// A field snapshot taken during the run.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldDump {
    pub frame: usize,
    /// `"mu"`, `"u"` or `"ior"`.
    pub name: &'static str,
    pub field: Field2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub scanpath: Scanpath,
    pub dumps: Vec<FieldDump>,
}

pub fn run_simulation(frames: &FrameSequence, cfg: &SimConfig) -> Result<SimOutput> {
    run_simulation_observed(frames, cfg, |_, _| {})
}

/// Per-frame view handed to observers of [`run_simulation_observed`].
#[derive(Debug)]
pub struct FrameView<'a> {
    pub mass: &'a Field2D,
    pub ior: &'a IorField,
    pub potential: &'a PotentialState,
    pub foa: &'a FoaState,
}

/// Like [`run_simulation`], calling `observe(frame, view)` after each frame
/// has been fully processed.
pub fn run_simulation_observed(
    frames: &FrameSequence,
    cfg: &SimConfig,
    mut observe: impl FnMut(usize, &FrameView<'_>),
) -> Result<SimOutput> {
    let dt_frame = frames.dt_frame();
    cfg.validate(dt_frame)?;
    if frames.len() < 2 {
        return Err(Error::Data(format!("need at least 2 frames, got {}", frames.len())));
    }
    let first = &frames.frames()[0];
    let (w, h) = (first.width(), first.height());
    if w < 3 || h < 3 {
        return Err(Error::Dimension(format!("frames must be at least 3x3, got {w}x{h}")));
    }

    let tele = cfg.telegraph(dt_frame);
    let foa_params = cfg.foa(dt_frame);
    let ior_params = cfg.ior(w, h);
    ior_params.validate()?;
    let dt_sub = tele.dt;

    let mut foa = FoaState::at_rest(cfg.initial_position(w, h)?);
    let mut ior = IorField::zeros(w, h);
    let mut potential = PotentialState::zeros(w, h);
    let mut scratch = Field2D::zeros(w, h);
    let mut path = Scanpath::new();
    let mut dumps = Vec::new();
    let mut tick: u64 = 0;
    path.push(ScanSample {
        t: 0.0,
        a: foa.a,
        v: foa.v,
        saccade: false,
    })?;

    for k in 1..frames.len() {
        let sigma = schedule_sigma(&cfg.blur, (k - 1) as f64 * dt_frame);
        let prev = gaussian_blur(&frames.frames()[k - 1], sigma).map_err(|e| e.at_stage(k, "blur"))?;
        let next = gaussian_blur(&frames.frames()[k], sigma).map_err(|e| e.at_stage(k, "blur"))?;
        let grad = gradient(&next, cfg.h).map_err(|e| e.at_stage(k, "gradient"))?;
        let motion = match cfg.mass.motion_source {
            MotionSource::TemporalDerivative => {
                temporal_derivative(&prev, &next, dt_frame).map_err(|e| e.at_stage(k, "motion"))?
            }
            MotionSource::FlowMagnitude => horn_schunck(&prev, &next, dt_frame, &cfg.hs)
                .map_err(|e| e.at_stage(k, "flow"))?
                .magnitude(),
        };
        ior = ior_step(&ior, foa.a, dt_frame, &ior_params).map_err(|e| e.at_stage(k, "ior"))?;
        let mu = mass_density(&grad, &motion, &ior, &cfg.mass).map_err(|e| e.at_stage(k, "mass"))?;

        for _ in 0..cfg.substeps_per_frame {
            evolve_potential_in_place(&mut potential, &mu, &tele, &mut scratch)
                .map_err(|e| e.at_stage(k, "potential"))?;
            foa = foa_step(&foa, &potential.u, &foa_params);
            tick += 1;
            path.push(ScanSample {
                t: tick as f64 * dt_sub,
                a: foa.a,
                v: foa.v,
                saccade: false,
            })
            .map_err(|e| e.at_stage(k, "foa"))?;
        }
        if !(foa.a[0].is_finite() && foa.a[1].is_finite()) {
            return Err(Error::Data("focus position diverged".into()).at_stage(k, "foa"));
        }

        if cfg.dump_every > 0 && k % cfg.dump_every == 0 {
            dumps.push(FieldDump {
                frame: k,
                name: "mu",
                field: mu.clone(),
            });
            dumps.push(FieldDump {
                frame: k,
                name: "u",
                field: potential.u.clone(),
            });
            dumps.push(FieldDump {
                frame: k,
                name: "ior",
                field: ior.field().clone(),
            });
        }
        observe(
            k,
            &FrameView {
                mass: &mu,
                ior: &ior,
                potential: &potential,
                foa: &foa,
            },
        );
    }

    Ok(SimOutput {
        scanpath: detect_saccades(&path, cfg.saccade_speed, cfg.min_fixation),
        dumps,
    })
}

/// Largest potential substep the explicit scheme accepts for a mode.
pub fn max_stable_dt(mode: TelegraphMode, gamma: f64, lambda_drag: f64, c: f64, h: f64) -> f64 {
    match mode {
        TelegraphMode::Heat => h * h * lambda_drag / (4.0 * c * c),
        TelegraphMode::Wave | TelegraphMode::DampedWave => std::f64::consts::FRAC_1_SQRT_2 * h * gamma.sqrt() / c,
    }
}
