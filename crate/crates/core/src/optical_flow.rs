//! Brightness-invariance optical flow.
//!
//! Horn–Schunck flow is computed by Jacobi sweeps over the discretized
//! Euler–Lagrange system of the regularized brightness constraint. For a
//! group of `m` feature channels the per-pixel constraints are stacked into
//! an `m × 2` system and solved in the least-squares sense.

use crate::error::{Error, Result};
use crate::retina::{gradient, temporal_derivative, Field2D, VectorField2D};

/// Per-pixel velocity in pixels per second.
pub type FlowField = VectorField2D;

/// Relative singular-value cutoff for the numerical rank of a feature group.
pub const RANK_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsParams {
    /// Smoothness weight.
    pub lambda: f64,
    pub max_iters: usize,
    /// Stop once the max-norm of a Jacobi update falls below this (px/s).
    pub tol: f64,
}

impl Default for HsParams {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            max_iters: 10_000,
            tol: 1e-6,
        }
    }
}

impl HsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("hs lambda must be > 0, got {}", self.lambda)));
        }
        if self.max_iters == 0 {
            return Err(Error::Parameter("hs max_iters must be >= 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Parameter(format!("hs tol must be > 0, got {}", self.tol)));
        }
        Ok(())
    }
}

/// Pointwise conjugation residual `∇φ·v + φ_t`.
pub fn conjugation_residual(grad: &VectorField2D, ddt: &Field2D, v: &FlowField) -> Result<Field2D> {
    if !grad.shape_matches(ddt) || grad.width() != v.width() || grad.height() != v.height() {
        return Err(Error::Dimension("conjugation residual operands differ in size".into()));
    }
    let (w, h) = (ddt.width(), ddt.height());
    Ok(Field2D::from_fn(w, h, |x, y| {
        let g = grad.get(x, y);
        let u = v.get(x, y);
        g[0] * u[0] + g[1] * u[1] + ddt.get(x, y)
    }))
}

/// Data of the linearized brightness constraint between two frames: the
/// spatial gradient averaged over both frames and the forward time
/// difference.
#[derive(Debug, Clone)]
pub struct BrightnessConstraint {
    pub grad: VectorField2D,
    pub b_t: Field2D,
}

impl BrightnessConstraint {
    pub fn between(b_prev: &Field2D, b_next: &Field2D, dt: f64) -> Result<Self> {
        b_prev.check_shape(b_next, "brightness frames")?;
        b_prev.ensure_finite("previous frame")?;
        b_next.ensure_finite("next frame")?;
        let g0 = gradient(b_prev, 1.0)?;
        let g1 = gradient(b_next, 1.0)?;
        let grad = VectorField2D::from_fn(b_prev.width(), b_prev.height(), |x, y| {
            let (a, b) = (g0.get(x, y), g1.get(x, y));
            [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
        });
        let b_t = temporal_derivative(b_prev, b_next, dt)?;
        Ok(Self { grad, b_t })
    }
}

/// Horn–Schunck flow between two frames.
pub fn horn_schunck(b_prev: &Field2D, b_next: &Field2D, dt: f64, p: &HsParams) -> Result<FlowField> {
    horn_schunck_iterates(b_prev, b_next, dt, p, |_, _| {})
}

/// Same as [`horn_schunck`], calling `observe(iteration, &flow)` after every
/// Jacobi sweep (iteration counts from 1).
pub fn horn_schunck_iterates(
    b_prev: &Field2D,
    b_next: &Field2D,
    dt: f64,
    p: &HsParams,
    mut observe: impl FnMut(usize, &FlowField),
) -> Result<FlowField> {
    p.validate()?;
    if b_prev.width() < 3 || b_prev.height() < 3 {
        return Err(Error::Dimension(format!(
            "horn-schunck needs at least 3x3 frames, got {}x{}",
            b_prev.width(),
            b_prev.height()
        )));
    }
    let c = BrightnessConstraint::between(b_prev, b_next, dt)?;
    let (w, h) = (b_prev.width(), b_prev.height());
    let mut v = VectorField2D::zeros(w, h);
    let mut next = VectorField2D::zeros(w, h);
    for iter in 1..=p.max_iters {
        let max_update = jacobi_sweep(&c, p.lambda, &v, &mut next);
        std::mem::swap(&mut v, &mut next);
        observe(iter, &v);
        if max_update < p.tol {
            break;
        }
    }
    v.ensure_finite("horn-schunck flow")?;
    Ok(v)
}

/// One synchronous update `v ← v̄ − ∇b (∇b·v̄ + b_t) / (λ + |∇b|²)`, where
/// `v̄` is the four-neighbour mean with the flow replicated across the
/// border (zero normal derivative). Returns the max-norm of the change.
fn jacobi_sweep(c: &BrightnessConstraint, lambda: f64, v: &FlowField, out: &mut FlowField) -> f64 {
    let (w, h) = (v.width(), v.height());
    let mut max_update: f64 = 0.0;
    for y in 0..h {
        let ym = y.saturating_sub(1);
        let yp = (y + 1).min(h - 1);
        for x in 0..w {
            let xm = x.saturating_sub(1);
            let xp = (x + 1).min(w - 1);
            let n = [v.get(xm, y), v.get(xp, y), v.get(x, ym), v.get(x, yp)];
            let avg = [
                0.25 * (n[0][0] + n[1][0] + n[2][0] + n[3][0]),
                0.25 * (n[0][1] + n[1][1] + n[2][1] + n[3][1]),
            ];
            let g = c.grad.get(x, y);
            let k = (g[0] * avg[0] + g[1] * avg[1] + c.b_t.get(x, y)) / (lambda + g[0] * g[0] + g[1] * g[1]);
            let new = [avg[0] - g[0] * k, avg[1] - g[1] * k];
            let old = v.get(x, y);
            max_update = max_update.max((new[0] - old[0]).abs()).max((new[1] - old[1]).abs());
            out.set(x, y, new);
        }
    }
    max_update
}

/// Discrete Horn–Schunck objective in pixel units:
///
/// `Σ_p (∇b·v + b_t)² + (λ/4) Σ_edges |v_p − v_q|²`
///
/// The data term runs over every pixel and the smoothness term over every
/// pair of 4-neighbours (forward differences of both flow components). The
/// quarter weight pairs the difference energy with the four-neighbour mean
/// of the Jacobi update, whose fixed point is exactly the minimizer of this
/// function.
pub fn hs_objective(b_grad: &VectorField2D, b_t: &Field2D, v: &FlowField, lambda: f64) -> Result<f64> {
    if !b_grad.shape_matches(b_t) || v.width() != b_t.width() || v.height() != b_t.height() {
        return Err(Error::Dimension("hs objective operands differ in size".into()));
    }
    let (w, h) = (b_t.width(), b_t.height());
    let mut data = 0.0;
    let mut smooth = 0.0;
    for y in 0..h {
        for x in 0..w {
            let g = b_grad.get(x, y);
            let u = v.get(x, y);
            let r = g[0] * u[0] + g[1] * u[1] + b_t.get(x, y);
            data += r * r;
            if x + 1 < w {
                let q = v.get(x + 1, y);
                smooth += (q[0] - u[0]).powi(2) + (q[1] - u[1]).powi(2);
            }
            if y + 1 < h {
                let q = v.get(x, y + 1);
                smooth += (q[0] - u[0]).powi(2) + (q[1] - u[1]).powi(2);
            }
        }
    }
    Ok(data + 0.25 * lambda * smooth)
}

/// One feature channel: spatial gradient and temporal derivative.
#[derive(Debug, Clone)]
pub struct FeatureChannel {
    pub grad: VectorField2D,
    pub ddt: Field2D,
}

/// A group of channels assumed to share one velocity field.
#[derive(Debug, Clone)]
pub struct FeatureStack {
    pub channels: Vec<FeatureChannel>,
    pub ridge: f64,
}

/// Per-pixel least-squares flow of a feature group.
///
/// Minimizes `‖G v + φ_t‖² + ridge·‖v‖²`, i.e. solves
/// `(GᵀG + ridge·I) v = −Gᵀφ_t`, with `G` the `m × 2` matrix of channel
/// gradients. The stacked rows are reduced by Givens rotations, so accuracy
/// degrades with the condition number of `G` rather than of `GᵀG`. The
/// returned rank map holds the numerical rank of `G`.
pub fn feature_group_flow(stack: &FeatureStack) -> Result<(FlowField, Field2D)> {
    let first = stack
        .channels
        .first()
        .ok_or_else(|| Error::Parameter("feature group has no channels".into()))?;
    if !(stack.ridge >= 0.0 && stack.ridge.is_finite()) {
        return Err(Error::Parameter(format!("ridge must be >= 0, got {}", stack.ridge)));
    }
    if stack.ridge == 0.0 && stack.channels.len() < 2 {
        return Err(Error::Parameter(
            "an unregularized feature group needs at least two channels".into(),
        ));
    }
    let (w, h) = (first.ddt.width(), first.ddt.height());
    for (i, ch) in stack.channels.iter().enumerate() {
        if !ch.grad.shape_matches(&ch.ddt) || ch.ddt.width() != w || ch.ddt.height() != h {
            return Err(Error::Dimension(format!("channel {i} differs in size from channel 0")));
        }
    }

    let mut flow = VectorField2D::zeros(w, h);
    let mut rank_map = Field2D::zeros(w, h);
    let root_ridge = stack.ridge.sqrt();
    for y in 0..h {
        for x in 0..w {
            let mut qr = Triangular::default();
            for ch in &stack.channels {
                let g = ch.grad.get(x, y);
                qr.push(g[0], g[1], -ch.ddt.get(x, y));
            }
            let rank = qr.rank();
            rank_map.set(x, y, rank as f64);
            if stack.ridge == 0.0 && rank < 2 {
                return Err(Error::Singular { x, y, rank });
            }
            if root_ridge > 0.0 {
                qr.push(root_ridge, 0.0, 0.0);
                qr.push(0.0, root_ridge, 0.0);
            }
            flow.set(x, y, qr.solve());
        }
    }
    Ok((flow, rank_map))
}

/// Upper-triangular factor `[[r11, r12], [0, r22]]` of a stacked `m × 2`
/// least-squares system together with the rotated right-hand side.
#[derive(Debug, Default, Clone, Copy)]
struct Triangular {
    r11: f64,
    r12: f64,
    r22: f64,
    c1: f64,
    c2: f64,
}

impl Triangular {
    /// Appends the row `[p, q]` with right-hand side `z`.
    fn push(&mut self, p: f64, q: f64, z: f64) {
        let rho = self.r11.hypot(p);
        let (q, z) = if rho == 0.0 {
            (q, z)
        } else {
            let (c, s) = (self.r11 / rho, p / rho);
            let (r12, c1) = (self.r12, self.c1);
            self.r11 = rho;
            self.r12 = c * r12 + s * q;
            self.c1 = c * c1 + s * z;
            (c * q - s * r12, c * z - s * c1)
        };
        let rho = self.r22.hypot(q);
        if rho != 0.0 {
            let (c, s) = (self.r22 / rho, q / rho);
            self.r22 = rho;
            self.c2 = c * self.c2 + s * z;
        }
    }

    /// Numerical rank from the singular values of the factor, using
    /// `σ₁σ₂ = |det R|` and `σ₁² + σ₂² = ‖R‖_F²`.
    fn rank(&self) -> usize {
        let frob2 = self.r11 * self.r11 + self.r12 * self.r12 + self.r22 * self.r22;
        if frob2 == 0.0 {
            return 0;
        }
        let det = (self.r11 * self.r22).abs();
        let s_max = (0.5 * (frob2 + (frob2 * frob2 - 4.0 * det * det).max(0.0).sqrt())).sqrt();
        let s_min = det / s_max;
        if s_min > RANK_TOLERANCE * s_max {
            2
        } else {
            1
        }
    }

    /// Back substitution; a zero pivot gives a zero component.
    fn solve(&self) -> [f64; 2] {
        let v1 = if self.r22 == 0.0 { 0.0 } else { self.c2 / self.r22 };
        let v0 = if self.r11 == 0.0 {
            0.0
        } else {
            (self.c1 - self.r12 * v1) / self.r11
        };
        [v0, v1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(w: usize, h: usize, rng: &mut ChaCha8Rng) -> Field2D {
        Field2D::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn random_vectors(w: usize, h: usize, rng: &mut ChaCha8Rng) -> VectorField2D {
        VectorField2D::from_fn(w, h, |_, _| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
    }

    #[test]
    fn residual_with_zero_flow_is_ddt() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = random_vectors(5, 4, &mut rng);
        let t = random_field(5, 4, &mut rng);
        let r = conjugation_residual(&g, &t, &VectorField2D::zeros(5, 4)).unwrap();
        assert_eq!(r, t);
    }

    #[test]
    fn residual_matches_direct_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (g, t, v) = (
            random_vectors(6, 5, &mut rng),
            random_field(6, 5, &mut rng),
            random_vectors(6, 5, &mut rng),
        );
        let r = conjugation_residual(&g, &t, &v).unwrap();
        for i in 0..30 {
            let direct = g.dx()[i] * v.dx()[i] + g.dy()[i] * v.dy()[i] + t.data()[i];
            assert!((r.data()[i] - direct).abs() < 1e-15);
        }
        assert!(matches!(
            conjugation_residual(&g, &Field2D::zeros(5, 5), &v),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = random_field(10, 8, &mut rng);
        let v = horn_schunck(&b, &b, 0.1, &HsParams::default()).unwrap();
        assert!(v.dx().iter().chain(v.dy()).all(|c| *c == 0.0));
    }

    #[test]
    fn horn_schunck_rejects_bad_input() {
        let b = Field2D::zeros(4, 4);
        let bad = HsParams {
            lambda: 0.0,
            ..HsParams::default()
        };
        assert!(matches!(horn_schunck(&b, &b, 1.0, &bad), Err(Error::Parameter(_))));
        let nan = Field2D::from_fn(4, 4, |x, _| if x == 2 { f64::NAN } else { 0.0 });
        assert!(matches!(
            horn_schunck(&b, &nan, 1.0, &HsParams::default()),
            Err(Error::Data(_))
        ));
        assert!(matches!(
            horn_schunck(&Field2D::zeros(2, 5), &Field2D::zeros(2, 5), 1.0, &HsParams::default()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn objective_zero_flow_is_sum_of_squared_bt() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = random_vectors(7, 6, &mut rng);
        let t = random_field(7, 6, &mut rng);
        let z = VectorField2D::zeros(7, 6);
        let e = hs_objective(&g, &t, &z, 0.3).unwrap();
        let direct: f64 = t.data().iter().map(|v| v * v).sum();
        assert!((e - direct).abs() < 1e-12);

        let still = Field2D::zeros(7, 6);
        assert_eq!(hs_objective(&g, &still, &z, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_two_pass_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (w, h) = (9, 7);
        let g = random_vectors(w, h, &mut rng);
        let t = random_field(w, h, &mut rng);
        let v = random_vectors(w, h, &mut rng);
        let lambda = 0.7;

        let mut data = 0.0;
        for y in 0..h {
            for x in 0..w {
                let r = g.get(x, y)[0] * v.get(x, y)[0] + g.get(x, y)[1] * v.get(x, y)[1] + t.get(x, y);
                data += r * r;
            }
        }
        let mut smooth = 0.0;
        for comp in [v.x_component(), v.y_component()] {
            for y in 0..h {
                for x in 0..w - 1 {
                    smooth += (comp.get(x + 1, y) - comp.get(x, y)).powi(2);
                }
            }
            for y in 0..h - 1 {
                for x in 0..w {
                    smooth += (comp.get(x, y + 1) - comp.get(x, y)).powi(2);
                }
            }
        }
        let expected = data + lambda / 4.0 * smooth;
        let e = hs_objective(&g, &t, &v, lambda).unwrap();
        assert!((e - expected).abs() < 1e-10 * expected.max(1.0));
    }

    #[test]
    fn jacobi_iterates_never_increase_objective() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let b0 = random_field(16, 16, &mut rng);
            let b1 = Field2D::from_fn(16, 16, |x, y| b0.get(x, y) + 0.2 * rng.gen_range(-1.0..1.0));
            let p = HsParams {
                lambda: 0.05,
                max_iters: 60,
                tol: 1e-12,
            };
            let c = BrightnessConstraint::between(&b0, &b1, 1.0).unwrap();
            let mut last = hs_objective(&c.grad, &c.b_t, &VectorField2D::zeros(16, 16), p.lambda).unwrap();
            horn_schunck_iterates(&b0, &b1, 1.0, &p, |_, v| {
                let e = hs_objective(&c.grad, &c.b_t, v, p.lambda).unwrap();
                assert!(e <= last * (1.0 + 1e-12), "seed {seed}: {e} > {last}");
                last = e;
            })
            .unwrap();
        }
    }

    #[test]
    fn swapping_frames_negates_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let b0 = random_field(12, 12, &mut rng);
        let b1 = random_field(12, 12, &mut rng);
        let p = HsParams::default();
        let fwd = horn_schunck(&b0, &b1, 0.5, &p).unwrap();
        let back = horn_schunck(&b1, &b0, 0.5, &p).unwrap();
        for i in 0..144 {
            assert!((fwd.dx()[i] + back.dx()[i]).abs() <= p.tol);
            assert!((fwd.dy()[i] + back.dy()[i]).abs() <= p.tol);
        }
    }

    fn uniform_stack(rows: &[[f64; 2]], ddt: &[f64], ridge: f64) -> FeatureStack {
        FeatureStack {
            channels: rows
                .iter()
                .zip(ddt)
                .map(|(g, t)| FeatureChannel {
                    grad: VectorField2D::from_fn(3, 2, |_, _| *g),
                    ddt: Field2D::constant(3, 2, *t),
                })
                .collect(),
            ridge,
        }
    }

    #[test]
    fn feature_group_closed_forms() {
        let (v, rank) = feature_group_flow(&uniform_stack(&[[0.0, 0.0], [0.0, 0.0]], &[1.0, 2.0], 1.0)).unwrap();
        assert!(v.dx().iter().chain(v.dy()).all(|c| *c == 0.0));
        assert!(rank.data().iter().all(|r| *r == 0.0));

        let eps = 1e-3;
        let (v, rank) = feature_group_flow(&uniform_stack(&[[1.0, 0.0]], &[-2.0], eps)).unwrap();
        assert!((v.get(1, 1)[0] - 2.0 / (1.0 + eps)).abs() < 1e-14);
        assert_eq!(v.get(1, 1)[1], 0.0);
        assert_eq!(rank.get(0, 0), 1.0);

        let (v, rank) = feature_group_flow(&uniform_stack(&[[1.0, 0.0], [0.0, 1.0]], &[-3.0, -4.0], 0.0)).unwrap();
        assert_eq!(v.get(2, 0), [3.0, 4.0]);
        assert_eq!(rank.get(2, 0), 2.0);
    }

    #[test]
    fn feature_group_singular_and_parameter_errors() {
        let parallel = uniform_stack(&[[1.0, 2.0], [2.0, 4.0]], &[1.0, 1.0], 0.0);
        assert!(matches!(
            feature_group_flow(&parallel),
            Err(Error::Singular { x: 0, y: 0, rank: 1 })
        ));
        let single = uniform_stack(&[[1.0, 0.0]], &[1.0], 0.0);
        assert!(matches!(feature_group_flow(&single), Err(Error::Parameter(_))));
        let empty = FeatureStack {
            channels: vec![],
            ridge: 1.0,
        };
        assert!(matches!(feature_group_flow(&empty), Err(Error::Parameter(_))));
    }

    proptest! {
        #[test]
        fn least_squares_residual_never_exceeds_zero_flow(seed in 0u64..500, m in 2usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let stack = FeatureStack {
                channels: (0..m).map(|_| FeatureChannel {
                    grad: random_vectors(4, 4, &mut rng),
                    ddt: random_field(4, 4, &mut rng),
                }).collect(),
                ridge: 0.0,
            };
            let (v, _) = feature_group_flow(&stack).unwrap();
            for y in 0..4 {
                for x in 0..4 {
                    let mut fitted = 0.0;
                    let mut at_rest = 0.0;
                    for ch in &stack.channels {
                        let r = conjugation_residual(&ch.grad, &ch.ddt, &v).unwrap().get(x, y);
                        fitted += r * r;
                        at_rest += ch.ddt.get(x, y).powi(2);
                    }
                    prop_assert!(fitted <= at_rest * (1.0 + 1e-12) + 1e-15);
                }
            }
        }

        #[test]
        fn planted_velocity_is_recovered(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (w, h) = (5, 4);
            let truth = random_vectors(w, h, &mut rng);
            let grads = [random_vectors(w, h, &mut rng), random_vectors(w, h, &mut rng)];
            let channels = grads.iter().map(|g| FeatureChannel {
                grad: g.clone(),
                ddt: Field2D::from_fn(w, h, |x, y| {
                    let (a, v) = (g.get(x, y), truth.get(x, y));
                    -(a[0] * v[0] + a[1] * v[1])
                }),
            }).collect();
            let (v, rank) = feature_group_flow(&FeatureStack { channels, ridge: 0.0 }).unwrap();
            prop_assert!(rank.data().iter().all(|r| *r == 2.0));
            for i in 0..w * h {
                let err = (v.dx()[i] - truth.dx()[i]).abs().max((v.dy()[i] - truth.dy()[i]).abs());
                // Random 2x2 systems lose digits in proportion to their
                // condition number.
                let g0 = grads[0].get(i % w, i / w);
                let g1 = grads[1].get(i % w, i / w);
                let det = (g0[0] * g1[1] - g0[1] * g1[0]).abs();
                prop_assert!(err <= 1e-10 || err * det <= 1e-13, "err {err:e} det {det:e}");
            }
        }
    }
}
