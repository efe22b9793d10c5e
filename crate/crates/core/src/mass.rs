//! Attention mass density and inhibition of return.

use crate::error::{Error, Result};
use crate::retina::{Field2D, VectorField2D};

/// Which field feeds the motion component of the mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MotionSource {
    /// `|∂_t b|`.
    #[default]
    TemporalDerivative,
    /// `‖v‖` of the Horn–Schunck flow.
    FlowMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassParams {
    /// Weight of spatial detail `‖∇b‖`.
    pub alpha1: f64,
    /// Weight of motion.
    pub alpha2: f64,
    pub motion_source: MotionSource,
}

impl Default for MassParams {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            motion_source: MotionSource::TemporalDerivative,
        }
    }
}

impl MassParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha1 >= 0.0 && self.alpha2 >= 0.0 && self.alpha1.is_finite() && self.alpha2.is_finite()) {
            return Err(Error::Parameter(format!(
                "mass weights must be >= 0, got alpha1={} alpha2={}",
                self.alpha1, self.alpha2
            )));
        }
        if self.alpha1 + self.alpha2 <= 0.0 {
            return Err(Error::Parameter("alpha1 + alpha2 must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IorParams {
    /// Relaxation rate (1/s).
    pub beta: f64,
    /// Width of the inhibition footprint around the focus (px).
    pub sigma: f64,
}

impl IorParams {
    /// Defaults for a `width × height` retina.
    pub fn for_grid(width: usize, height: usize) -> Self {
        Self {
            beta: 1.0,
            sigma: width.max(height) as f64 / 16.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Parameter(format!("ior beta must be > 0, got {}", self.beta)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Parameter(format!("ior sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Inhibition-of-return state, valued in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IorField(Field2D);

impl IorField {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self(Field2D::zeros(width, height))
    }

    pub fn new(field: Field2D) -> Result<Self> {
        field.ensure_finite("inhibition field")?;
        if let Some(v) = field.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Data(format!("inhibition value {v} outside [0, 1]")));
        }
        Ok(Self(field))
    }

    pub fn field(&self) -> &Field2D {
        &self.0
    }

    pub fn into_field(self) -> Field2D {
        self.0
    }
}

/// `μ = α₁‖∇b‖(1 − I) + α₂|motion|`, pointwise.
///
/// `motion` is `∂_t b` or `‖v‖` depending on [`MassParams::motion_source`];
/// its absolute value is taken here.
pub fn mass_density(b_grad: &VectorField2D, motion: &Field2D, ior: &IorField, p: &MassParams) -> Result<Field2D> {
    if !b_grad.shape_matches(motion) || !motion.same_shape(ior.field()) {
        return Err(Error::Dimension("mass density operands differ in size".into()));
    }
    let detail = b_grad.magnitude();
    let out: Vec<f64> = detail
        .data()
        .iter()
        .zip(motion.data())
        .zip(ior.field().data())
        .map(|((d, m), i)| p.alpha1 * d * (1.0 - i) + p.alpha2 * m.abs())
        .collect();
    Field2D::new(motion.width(), motion.height(), out)
}

/// Advances `I_t + βI = β·exp(−‖x − a‖²/2σ²)` by `dt`, holding the focus
/// `a` fixed over the step and integrating exactly:
///
/// `I' = I·e^{−β·dt} + (1 − e^{−β·dt})·G(x)`.
pub fn ior_step(ior: &IorField, a: [f64; 2], dt: f64, p: &IorParams) -> Result<IorField> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("ior dt must be > 0, got {dt}")));
    }
    if !(a[0].is_finite() && a[1].is_finite()) {
        return Err(Error::Data(format!("non-finite focus position {a:?}")));
    }
    let decay = (-p.beta * dt).exp();
    let gain = -(-p.beta * dt).exp_m1();
    let inv_two_s2 = 1.0 / (2.0 * p.sigma * p.sigma);
    let f = ior.field();
    let next = Field2D::from_fn(f.width(), f.height(), |x, y| {
        let (dx, dy) = (x as f64 - a[0], y as f64 - a[1]);
        let g = (-(dx * dx + dy * dy) * inv_two_s2).exp();
        (f.get(x, y) * decay + gain * g).clamp(0.0, 1.0)
    });
    Ok(IorField(next))
}

/// The Gaussian source `exp(−‖x − a‖²/2σ²)` of the inhibition dynamics.
pub fn ior_source(width: usize, height: usize, a: [f64; 2], sigma: f64) -> Field2D {
    Field2D::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 - a[0], y as f64 - a[1]);
        (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
    })
}
