//! The attention potential.
//!
//! Three routes to `u`:
//!
//! * [`poisson_solve`]: the elliptic problem `−∇²u = μ` by SOR on the grid;
//! * [`direct_potential`]: the free-space logarithmic kernel summed
//!   directly, used as an oracle on small grids;
//! * [`evolve_potential`]: explicit time stepping of
//!   `γ·u_tt + λ·u_t = c²(∇²u + μ)`, whose quiescent state is the Poisson
//!   solution for every mode.
//!
//! The evolving modes hold `u = 0` on the border of the retina.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::retina::{gradient, laplacian_into, Field2D};

/// Largest grid accepted by the `O(N²)` kernel sum.
pub const DIRECT_POTENTIAL_LIMIT: usize = 64;

/// Border condition for the elliptic solve.
#[derive(Debug, Clone, PartialEq)]
pub enum Boundary {
    DirichletZero,
    /// Border pixels take their values from this field; interior values are
    /// ignored.
    DirichletValues(Field2D),
}

/// Classical optimal over-relaxation factor for an `n`-point grid side.
pub fn sor_omega(width: usize, height: usize) -> f64 {
    2.0 / (1.0 + (PI / width.max(height) as f64).sin())
}

/// Solves `−∇²u = μ` with Dirichlet data on the border by successive
/// over-relaxation, iterating until the interior max-norm residual
/// `|∇²u + μ|` drops below `tol`.
pub fn poisson_solve(mu: &Field2D, h: f64, tol: f64, max_iters: usize, boundary: &Boundary) -> Result<Field2D> {
    mu.ensure_finite("mass density")?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("grid spacing must be > 0, got {h}")));
    }
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Parameter(format!("poisson tol must be > 0, got {tol}")));
    }
    let (w, ht) = (mu.width(), mu.height());
    let mut u = Field2D::zeros(w, ht);
    if let Boundary::DirichletValues(edge) = boundary {
        mu.check_shape(edge, "poisson boundary values")?;
        edge.ensure_finite("poisson boundary values")?;
        for y in 0..ht {
            for x in 0..w {
                if x == 0 || y == 0 || x == w - 1 || y == ht - 1 {
                    u.set(x, y, edge.get(x, y));
                }
            }
        }
    }
    if w < 3 || ht < 3 {
        return Ok(u);
    }

    let omega = sor_omega(w, ht);
    let h2 = h * h;
    let src = mu.data();
    let mut residual = interior_residual(&u, mu, h);
    if residual < tol {
        return Ok(u);
    }
    for _ in 0..max_iters {
        let d = u.data_mut();
        for y in 1..ht - 1 {
            for x in 1..w - 1 {
                let i = y * w + x;
                let gs = 0.25 * (d[i + 1] + d[i - 1] + d[i + w] + d[i - w] + h2 * src[i]);
                d[i] += omega * (gs - d[i]);
            }
        }
        residual = interior_residual(&u, mu, h);
        if residual < tol {
            return Ok(u);
        }
    }
    Err(Error::Convergence {
        iterations: max_iters,
        residual,
    })
}

/// Interior max-norm of `∇²u + μ`.
pub fn interior_residual(u: &Field2D, mu: &Field2D, h: f64) -> f64 {
    let (w, ht) = (u.width(), u.height());
    if w < 3 || ht < 3 {
        return 0.0;
    }
    let d = u.data();
    let src = mu.data();
    let inv_h2 = 1.0 / (h * h);
    let mut worst: f64 = 0.0;
    for y in 1..ht - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let lap = (d[i + 1] + d[i - 1] + d[i + w] + d[i - w] - 4.0 * d[i]) * inv_h2;
            worst = worst.max((lap + src[i]).abs());
        }
    }
    worst
}

/// Free-space potential `u⁰(x) = (1/2π) Σ_y log(1/‖x − y‖) μ(y) h²`.
///
/// The singular self-term is replaced by the fixed regularization
/// `(1/2π)(1.5 − ln(h/2)) μ(x) h²`. It is not the exact pixel average of the
/// kernel, so agreement with [`poisson_solve`] degrades for rough `μ`.
pub fn direct_potential(mu: &Field2D, h: f64) -> Result<Field2D> {
    let (w, ht) = (mu.width(), mu.height());
    if w > DIRECT_POTENTIAL_LIMIT || ht > DIRECT_POTENTIAL_LIMIT {
        return Err(Error::Size {
            width: w,
            height: ht,
            limit: DIRECT_POTENTIAL_LIMIT,
        });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Parameter(format!("grid spacing must be > 0, got {h}")));
    }
    mu.ensure_finite("mass density")?;

    // Kernel tabulated by pixel offset; index (|dx|, |dy|).
    let self_term = (1.5 - (0.5 * h).ln()) / (2.0 * PI);
    let mut kernel = vec![0.0; w * ht];
    for dy in 0..ht {
        for dx in 0..w {
            kernel[dy * w + dx] = if dx == 0 && dy == 0 {
                self_term
            } else {
                let r = h * ((dx * dx + dy * dy) as f64).sqrt();
                -r.ln() / (2.0 * PI)
            };
        }
    }
    let h2 = h * h;
    let sources: Vec<(usize, usize, f64)> = (0..ht)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter_map(|(x, y)| {
            let m = mu.get(x, y);
            (m != 0.0).then_some((x, y, m * h2))
        })
        .collect();
    Ok(Field2D::from_fn(w, ht, |x, y| {
        sources
            .iter()
            .map(|&(sx, sy, m)| kernel[sx.abs_diff(x) + sy.abs_diff(y) * w] * m)
            .sum()
    }))
}

/// `u` and its time derivative, evolved by [`evolve_potential`].
///
/// In the second-order modes `u_t` is the backward difference
/// `(uⁿ − uⁿ⁻¹)/dt`, which lets the state carry the previous time level.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState {
    pub u: Field2D,
    pub u_t: Field2D,
}

impl PotentialState {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            u: Field2D::zeros(width, height),
            u_t: Field2D::zeros(width, height),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TelegraphMode {
    /// `λ·u_t = c²(∇²u + μ)`.
    Heat,
    /// `γ·u_tt = c²(∇²u + μ)`.
    Wave,
    /// `γ·u_tt + λ·u_t = c²(∇²u + μ)`.
    #[default]
    DampedWave,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TelegraphParams {
    /// Inertia.
    pub gamma: f64,
    /// Drag.
    pub lambda_drag: f64,
    /// Propagation speed (px/s).
    pub c: f64,
    /// Grid spacing (px).
    pub h: f64,
    /// Time step (s).
    pub dt: f64,
    pub mode: TelegraphMode,
}

impl Default for TelegraphParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda_drag: 20.0,
            c: 100.0,
            h: 1.0,
            dt: 0.005,
            mode: TelegraphMode::DampedWave,
        }
    }
}

impl TelegraphParams {
    /// Checks the mode's coefficient constraints and its explicit stability
    /// bound: `dt ≤ h²λ/(4c²)` for heat, `(c/√γ)·dt/h ≤ 1/√2` otherwise.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("c", self.c), ("h", self.h), ("dt", self.dt)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("telegraph {name} must be > 0, got {v}")));
            }
        }
        if !(self.gamma >= 0.0 && self.lambda_drag >= 0.0 && self.gamma.is_finite() && self.lambda_drag.is_finite()) {
            return Err(Error::Parameter("telegraph gamma and lambda must be >= 0".into()));
        }
        match self.mode {
            TelegraphMode::Heat => {
                if self.gamma != 0.0 {
                    return Err(Error::Parameter(format!(
                        "heat mode needs gamma = 0, got {}",
                        self.gamma
                    )));
                }
                if self.lambda_drag <= 0.0 {
                    return Err(Error::Parameter("heat mode needs lambda > 0".into()));
                }
                let limit = self.h * self.h * self.lambda_drag / (4.0 * self.c * self.c);
                if self.dt > limit {
                    return Err(Error::Stability(format!(
                        "heat step dt={} exceeds h²λ/(4c²)={limit}",
                        self.dt
                    )));
                }
            }
            TelegraphMode::Wave | TelegraphMode::DampedWave => {
                if self.gamma <= 0.0 {
                    return Err(Error::Parameter(format!("{:?} mode needs gamma > 0", self.mode)));
                }
                if self.mode == TelegraphMode::Wave && self.lambda_drag != 0.0 {
                    return Err(Error::Parameter(format!(
                        "wave mode is undamped, got lambda = {}",
                        self.lambda_drag
                    )));
                }
                let courant = self.c * self.dt / (self.h * self.gamma.sqrt());
                if courant > std::f64::consts::FRAC_1_SQRT_2 {
                    return Err(Error::Stability(format!("Courant number {courant} exceeds 1/√2")));
                }
            }
        }
        Ok(())
    }
}

/// One explicit step of the telegraph family with the source scaled by
/// `c²`, so that every mode relaxes to `−∇²u = μ`.
///
/// Heat: `u' = u + (dt·c²/λ)(∇²u + μ)`, `u_t' = 0`.
/// Wave modes: the centered scheme
/// `γ(u' − 2u + u⁻)/dt² + λ(u' − u⁻)/(2dt) = c²(∇²u + μ)` with
/// `u⁻ = u − dt·u_t`.
pub fn evolve_potential(state: &PotentialState, mu: &Field2D, p: &TelegraphParams) -> Result<PotentialState> {
    p.validate()?;
    let mut next = state.clone();
    evolve_potential_in_place(&mut next, mu, p, &mut Field2D::zeros(mu.width(), mu.height()))?;
    Ok(next)
}

/// In-place variant of [`evolve_potential`]; `scratch` must match `mu` in
/// size. Parameters are assumed validated.
pub(crate) fn evolve_potential_in_place(
    state: &mut PotentialState,
    mu: &Field2D,
    p: &TelegraphParams,
    scratch: &mut Field2D,
) -> Result<()> {
    state.u.check_shape(&state.u_t, "potential state")?;
    state.u.check_shape(mu, "potential vs mass")?;
    let (w, ht) = (mu.width(), mu.height());
    if w < 3 || ht < 3 {
        return Err(Error::Dimension(format!(
            "potential evolution needs at least 3x3, got {w}x{ht}"
        )));
    }
    laplacian_into(&state.u, p.h, scratch);
    let c2 = p.c * p.c;
    let lap = scratch.data();
    let src = mu.data();
    let (u, ut) = (state.u.data_mut(), state.u_t.data_mut());
    match p.mode {
        TelegraphMode::Heat => {
            let k = p.dt * c2 / p.lambda_drag;
            for y in 1..ht - 1 {
                for x in 1..w - 1 {
                    let i = y * w + x;
                    u[i] += k * (lap[i] + src[i]);
                }
            }
            ut.iter_mut().for_each(|v| *v = 0.0);
        }
        TelegraphMode::Wave | TelegraphMode::DampedWave => {
            let a = p.gamma / (p.dt * p.dt);
            let b = p.lambda_drag / (2.0 * p.dt);
            let inv = 1.0 / (a + b);
            for y in 1..ht - 1 {
                for x in 1..w - 1 {
                    let i = y * w + x;
                    let prev = u[i] - p.dt * ut[i];
                    let new = (c2 * (lap[i] + src[i]) + a * (2.0 * u[i] - prev) + b * prev) * inv;
                    ut[i] = (new - u[i]) / p.dt;
                    u[i] = new;
                }
            }
        }
    }
    // Border held at zero.
    for y in 0..ht {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == ht - 1 {
                let i = y * w + x;
                u[i] = 0.0;
                ut[i] = 0.0;
            }
        }
    }
    Ok(())
}

/// Discrete energy conserved by the undamped centered scheme:
///
/// `h² [ Σ γ u_t² + c² Σ_edges (Δuⁿ/h)(Δuⁿ⁻¹/h) ]`
///
/// where the staggered product pairs the current and previous levels
/// (`uⁿ⁻¹ = u − dt·u_t`). With `λ > 0` it is non-increasing.
pub fn wave_energy(state: &PotentialState, p: &TelegraphParams) -> f64 {
    let (w, ht) = (state.u.width(), state.u.height());
    let u = state.u.data();
    let ut = state.u_t.data();
    let prev: Vec<f64> = u.iter().zip(ut).map(|(a, b)| a - p.dt * b).collect();
    let kinetic: f64 = ut.iter().map(|v| p.gamma * v * v).sum();
    let mut strain = 0.0;
    for y in 0..ht {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                strain += (u[i + 1] - u[i]) * (prev[i + 1] - prev[i]);
            }
            if y + 1 < ht {
                strain += (u[i + w] - u[i]) * (prev[i + w] - prev[i]);
            }
        }
    }
    p.h * p.h * kinetic + p.c * p.c * strain
}

/// Settings shared by every run of [`convergence_in_c`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceSetup {
    /// Template for each run; its `c` is replaced by the swept value.
    pub base: TelegraphParams,
    pub poisson_tol: f64,
    pub poisson_max_iters: usize,
}

/// For each `c`, evolves from rest over `horizon` seconds and reports
/// `‖∇u_c − ∇u_ref‖₂ / ‖∇u_ref‖₂` against the Poisson solution with the
/// same zero border. `0/0` is reported as `0`.
pub fn convergence_in_c(mu: &Field2D, c_list: &[f64], horizon: f64, setup: &ConvergenceSetup) -> Result<Vec<f64>> {
    if c_list
        .windows(2)
        .any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less))
    {
        return Err(Error::Parameter("c values must be strictly ascending".into()));
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::Parameter(format!("horizon must be >= 0, got {horizon}")));
    }
    let runs: Vec<TelegraphParams> = c_list.iter().map(|&c| TelegraphParams { c, ..setup.base }).collect();
    for p in &runs {
        p.validate()?;
    }
    let h = setup.base.h;
    let reference = poisson_solve(
        mu,
        h,
        setup.poisson_tol,
        setup.poisson_max_iters,
        &Boundary::DirichletZero,
    )?;
    let g_ref = gradient(&reference, h)?;
    let ref_norm: f64 = g_ref.dx().iter().chain(g_ref.dy()).map(|v| v * v).sum::<f64>().sqrt();

    let steps = (horizon / setup.base.dt).round() as usize;
    let mut errors = Vec::with_capacity(runs.len());
    let mut scratch = Field2D::zeros(mu.width(), mu.height());
    for p in &runs {
        let mut state = PotentialState::zeros(mu.width(), mu.height());
        for _ in 0..steps {
            evolve_potential_in_place(&mut state, mu, p, &mut scratch)?;
        }
        let g = gradient(&state.u, h)?;
        let diff: f64 = g
            .dx()
            .iter()
            .zip(g_ref.dx())
            .chain(g.dy().iter().zip(g_ref.dy()))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        errors.push(if ref_norm == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            diff / ref_norm
        });
    }
    Ok(errors)
}
