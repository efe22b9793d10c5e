//! Field model of visual attention.
//!
//! A grayscale frame sequence is turned into an attention mass density
//! (spatial detail plus motion, gated by inhibition of return). The mass is
//! the source of a scalar potential, obtained either from the Poisson
//! equation or from its heat / damped-wave temporal regularizations, and the
//! focus of attention is a damped particle driven by the potential gradient.
//!
//! The crate also carries the brightness-invariance machinery the model
//! builds on: Horn–Schunck flow, multi-channel feature-group flow and the
//! conjugation residual `∇φ·v + φ_t`.

pub mod error;
pub mod export;
pub mod foa;
pub mod mass;
pub mod optical_flow;
pub mod pipeline;
pub mod potential;
pub mod retina;
pub mod synth;

pub use error::{Error, Result};
pub use foa::{Attraction, BoundaryPolicy, FoaParams, FoaState, ScanSample, Scanpath, Vec2};
pub use mass::{IorField, IorParams, MassParams, MotionSource};
pub use optical_flow::{FeatureChannel, FeatureStack, FlowField, HsParams};
pub use pipeline::{run_simulation, FieldDump, InitialFoa, SimConfig, SimOutput};
pub use potential::{Boundary, PotentialState, TelegraphMode, TelegraphParams};
pub use retina::{BlurSchedule, Field2D, FrameSequence, VectorField2D};
