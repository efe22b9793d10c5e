//! Synthetic scenes with known geometry and motion.

use std::f64::consts::PI;

use crate::retina::Field2D;

/// `exp(−‖x − c‖²/2σ²)` on a `width × height` grid.
pub fn gaussian_blob(width: usize, height: usize, center: [f64; 2], sigma: f64) -> Field2D {
    let k = 1.0 / (2.0 * sigma * sigma);
    Field2D::from_fn(width, height, |x, y| {
        let (dx, dy) = (x as f64 - center[0], y as f64 - center[1]);
        (-(dx * dx + dy * dy) * k).exp()
    })
}

/// Sum of Gaussian blobs, clipped to `[0, 1]`.
pub fn blobs(width: usize, height: usize, centers: &[[f64; 2]], sigma: f64) -> Field2D {
    let parts: Vec<Field2D> = centers
        .iter()
        .map(|c| gaussian_blob(width, height, *c, sigma))
        .collect();
    Field2D::from_fn(width, height, |x, y| {
        parts.iter().map(|p| p.get(x, y)).sum::<f64>().min(1.0)
    })
}

/// Sinusoidal stripes `½ + ½·sin(2π(n·x − offset)/period)` with unit
/// normal `n` at `angle` radians from the x axis.
pub fn stripes(width: usize, height: usize, angle: f64, period: f64, offset: f64) -> Field2D {
    let (c, s) = (angle.cos(), angle.sin());
    Field2D::from_fn(width, height, |x, y| {
        0.5 + 0.5 * (2.0 * PI * (c * x as f64 + s * y as f64 - offset) / period).sin()
    })
}

/// Frames of a Gaussian blob moving from `start` at `velocity` px/s.
pub fn translating_blob(
    width: usize,
    height: usize,
    start: [f64; 2],
    velocity: [f64; 2],
    sigma: f64,
    frames: usize,
    dt_frame: f64,
) -> Vec<Field2D> {
    (0..frames)
        .map(|k| {
            let t = k as f64 * dt_frame;
            gaussian_blob(
                width,
                height,
                [start[0] + velocity[0] * t, start[1] + velocity[1] * t],
                sigma,
            )
        })
        .collect()
}

/// Nonnegative random field with roughly `correlation` pixels of spatial
/// correlation: uniform noise smoothed by a Gaussian.
pub fn random_mass<R: FnMut() -> f64>(width: usize, height: usize, correlation: f64, mut uniform: R) -> Field2D {
    let noise = Field2D::from_fn(width, height, |_, _| uniform());
    crate::retina::gaussian_blur(&noise, correlation).expect("correlation is non-negative")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blob_peaks_at_center() {
        let b = gaussian_blob(9, 9, [4.0, 4.0], 2.0);
        assert_eq!(b.get(4, 4), 1.0);
        assert!(b.get(0, 0) < b.get(3, 4));
    }

    #[test]
    fn stripes_are_constant_along_their_orientation() {
        let s = stripes(32, 32, -PI / 4.0, 8.0, 0.0);
        for y in 0..31 {
            for x in 0..31 {
                assert!((s.get(x, y) - s.get(x + 1, y + 1)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn translating_blob_moves() {
        let f = translating_blob(20, 10, [3.0, 5.0], [10.0, 0.0], 1.5, 3, 0.1);
        assert_eq!(f[0].get(3, 5), 1.0);
        assert_eq!(f[2].get(5, 5), 1.0);
    }
}
