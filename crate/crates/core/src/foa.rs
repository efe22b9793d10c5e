//! Focus-of-attention particle and scanpath handling.
//!
//! The focus is a unit-mass particle with position `a` (pixels) and velocity
//! `v` (px/s), driven by the potential gradient and slowed by a linear
//! dissipation:
//!
//! `ä = −ϖ·ȧ + s·∇u(a)`
//!
//! where `s = +1` pulls it towards potential maxima (towards the masses) and
//! `s = −1` gives `ä + ϖȧ + ∇u = 0`, which pushes it away from them.

use crate::error::{Error, Result};
use crate::retina::{bilinear_cell, Field2D};

pub type Vec2 = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoaState {
    pub a: Vec2,
    pub v: Vec2,
}

impl FoaState {
    pub fn at_rest(a: Vec2) -> Self {
        Self { a, v: [0.0, 0.0] }
    }

    pub fn speed(&self) -> f64 {
        self.v[0].hypot(self.v[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Attraction {
    /// Force `+∇u`: the focus climbs towards the masses.
    #[default]
    Attract,
    /// Force `−∇u`: the focus is pushed away from the masses.
    Repel,
}

impl Attraction {
    pub fn sign(self) -> f64 {
        match self {
            Attraction::Attract => 1.0,
            Attraction::Repel => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryPolicy {
    /// Mirror the position and flip the normal velocity.
    #[default]
    Reflect,
    /// Project the position and zero the normal velocity.
    Clamp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoaParams {
    /// Linear dissipation ϖ (1/s).
    pub dissipation: f64,
    /// Integration step (s).
    pub dt: f64,
    pub attraction: Attraction,
    pub boundary: BoundaryPolicy,
    /// Grid spacing used for the potential gradient.
    pub h: f64,
}

impl Default for FoaParams {
    fn default() -> Self {
        Self {
            dissipation: 1.0,
            dt: 0.005,
            attraction: Attraction::Attract,
            boundary: BoundaryPolicy::Reflect,
            h: 1.0,
        }
    }
}

impl FoaParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Parameter(format!("foa dt must be > 0, got {}", self.dt)));
        }
        if !(self.dissipation >= 0.0 && self.dissipation.is_finite()) {
            return Err(Error::Parameter(format!(
                "foa dissipation must be >= 0, got {}",
                self.dissipation
            )));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Parameter(format!(
                "foa grid spacing must be > 0, got {}",
                self.h
            )));
        }
        Ok(())
    }
}

/// Gradient at node `(x, y)`: central inside, one-sided on the border.
fn node_gradient(u: &Field2D, x: usize, y: usize, h: f64) -> Vec2 {
    let (w, ht) = (u.width(), u.height());
    let gx = if x == 0 {
        (u.get(1, y) - u.get(0, y)) / h
    } else if x == w - 1 {
        (u.get(x, y) - u.get(x - 1, y)) / h
    } else {
        (u.get(x + 1, y) - u.get(x - 1, y)) / (2.0 * h)
    };
    let gy = if y == 0 {
        (u.get(x, 1) - u.get(x, 0)) / h
    } else if y == ht - 1 {
        (u.get(x, y) - u.get(x, y - 1)) / h
    } else {
        (u.get(x, y + 1) - u.get(x, y - 1)) / (2.0 * h)
    };
    [gx, gy]
}

/// Bilinear blend of the node gradients around `pos`; `pos` is clamped.
fn interpolated_gradient(u: &Field2D, pos: Vec2, h: f64) -> Vec2 {
    let (x0, y0, fx, fy) = bilinear_cell(pos, u.width(), u.height());
    let (x1, y1) = (x0 + 1, y0 + 1);
    let g00 = node_gradient(u, x0, y0, h);
    let g10 = node_gradient(u, x1, y0, h);
    let g01 = node_gradient(u, x0, y1, h);
    let g11 = node_gradient(u, x1, y1, h);
    let mut out = [0.0; 2];
    for k in 0..2 {
        let top = g00[k] * (1.0 - fx) + g10[k] * fx;
        let bottom = g01[k] * (1.0 - fx) + g11[k] * fx;
        out[k] = top * (1.0 - fy) + bottom * fy;
    }
    out
}

/// Potential gradient at a continuous position: bilinear interpolation of
/// the central-difference gradient field.
pub fn sample_gradient(u: &Field2D, pos: Vec2, h: f64) -> Result<Vec2> {
    let (w, ht) = (u.width(), u.height());
    if w < 2 || ht < 2 {
        return Err(Error::Dimension(format!(
            "gradient sampling needs at least 2x2, got {w}x{ht}"
        )));
    }
    let inside = pos[0] >= 0.0 && pos[1] >= 0.0 && pos[0] <= (w - 1) as f64 && pos[1] <= (ht - 1) as f64;
    if !inside {
        return Err(Error::Domain {
            x: pos[0],
            y: pos[1],
            width: w,
            height: ht,
        });
    }
    Ok(interpolated_gradient(u, pos, h))
}

fn reflect(mut x: f64, mut v: f64, max: f64) -> (f64, f64) {
    if max <= 0.0 || !x.is_finite() {
        return (x.clamp(0.0, max.max(0.0)), 0.0);
    }
    while x < 0.0 || x > max {
        x = if x < 0.0 { -x } else { 2.0 * max - x };
        v = -v;
    }
    (x, v)
}

fn clamp(x: f64, v: f64, max: f64) -> (f64, f64) {
    if x < 0.0 {
        (0.0, 0.0)
    } else if x > max {
        (max, 0.0)
    } else {
        (x, v)
    }
}

/// One semi-implicit Euler step:
/// `v' = v + dt(−ϖv + s·∇u(a))`, `a' = a + dt·v'`, followed by the
/// boundary policy.
pub fn foa_step(s: &FoaState, u: &Field2D, p: &FoaParams) -> FoaState {
    let g = interpolated_gradient(u, s.a, p.h);
    let sign = p.attraction.sign();
    let mut v = [0.0; 2];
    let mut a = [0.0; 2];
    for k in 0..2 {
        v[k] = s.v[k] + p.dt * (-p.dissipation * s.v[k] + sign * g[k]);
        a[k] = s.a[k] + p.dt * v[k];
    }
    let limits = [(u.width() - 1) as f64, (u.height() - 1) as f64];
    for k in 0..2 {
        let (pos, vel) = match p.boundary {
            BoundaryPolicy::Reflect => reflect(a[k], v[k], limits[k]),
            BoundaryPolicy::Clamp => clamp(a[k], v[k], limits[k]),
        };
        a[k] = pos;
        v[k] = vel;
    }
    FoaState { a, v }
}

/// `½‖v‖² − s·u(a)`, with `u` sampled bilinearly. Conserved by the
/// continuous dynamics when ϖ = 0.
pub fn energy(s: &FoaState, u: &Field2D, p: &FoaParams) -> f64 {
    0.5 * (s.v[0] * s.v[0] + s.v[1] * s.v[1]) - p.attraction.sign() * u.sample_bilinear(s.a)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSample {
    pub t: f64,
    pub a: Vec2,
    pub v: Vec2,
    pub saccade: bool,
}

/// Time-stamped focus trajectory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scanpath {
    samples: Vec<ScanSample>,
}

impl Scanpath {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: Vec<ScanSample>) -> Result<Self> {
        let mut path = Self::new();
        for s in samples {
            path.push(s)?;
        }
        Ok(path)
    }

    /// Appends a sample; timestamps must be strictly increasing.
    pub fn push(&mut self, sample: ScanSample) -> Result<()> {
        if !sample.t.is_finite() {
            return Err(Error::Data(format!("non-finite timestamp {}", sample.t)));
        }
        if let Some(last) = self.samples.last() {
            if sample.t <= last.t {
                return Err(Error::Data(format!(
                    "timestamp {} does not follow {}",
                    sample.t, last.t
                )));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[ScanSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Maximal runs of consecutive saccadic samples, as index ranges.
    pub fn saccade_segments(&self) -> Vec<std::ops::Range<usize>> {
        runs(&self.samples, true)
    }

    pub fn fixation_segments(&self) -> Vec<std::ops::Range<usize>> {
        runs(&self.samples, false)
    }
}

fn runs(samples: &[ScanSample], flag: bool) -> Vec<std::ops::Range<usize>> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, s) in samples.iter().enumerate() {
        match (s.saccade == flag, start) {
            (true, None) => start = Some(i),
            (false, Some(b)) => {
                out.push(b..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        out.push(b..samples.len());
    }
    out
}

/// Flags samples faster than `speed_threshold` as saccadic, then absorbs
/// fixation runs shorter than `min_fixation` that sit between two saccades.
///
/// The duration of a bracketed fixation run is measured from its first
/// sample to the first sample of the following saccade.
pub fn detect_saccades(path: &Scanpath, speed_threshold: f64, min_fixation: f64) -> Scanpath {
    let mut samples: Vec<ScanSample> = path
        .samples
        .iter()
        .map(|s| ScanSample {
            saccade: s.v[0].hypot(s.v[1]) > speed_threshold,
            ..*s
        })
        .collect();
    for run in runs(&samples, false) {
        let bracketed = run.start > 0 && run.end < samples.len();
        if bracketed && samples[run.end].t - samples[run.start].t < min_fixation {
            for s in &mut samples[run] {
                s.saccade = true;
            }
        }
    }
    Scanpath { samples }
}
