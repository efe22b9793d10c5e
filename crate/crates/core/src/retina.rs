//! Retina grid: scalar and vector fields, frame ingestion, finite-difference
//! stencils and the input-smoothing process.
//!
//! Fields are row-major with `x` the column and `y` the row; pixel `(x, y)`
//! sits at continuous coordinate `(x, y)`, so the retina spans
//! `[0, width-1] × [0, height-1]`.

use crate::error::{Error, Result};

/// Scalar field on the retina grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field2D {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Field2D {
    /// Builds a field from row-major data, rejecting a length mismatch or
    /// any non-finite sample.
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Dimension(format!(
                "{} samples for a {width}x{height} grid",
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite sample at ({}, {})",
                i % width.max(1),
                i / width.max(1)
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::constant(width, height, 0.0)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Samples `f(x, y)` at every pixel. The caller is responsible for
    /// producing finite values; use [`Field2D::ensure_finite`] when in doubt.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    /// Sample with coordinates clamped onto the grid (edge replication).
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn same_shape(&self, other: &Field2D) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_shape(&self, other: &Field2D, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )))
        }
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            None => Ok(()),
            Some(i) => Err(Error::Data(format!(
                "{what}: non-finite sample at ({}, {})",
                i % self.width,
                i / self.width
            ))),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field2D {
        Field2D {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Bilinear interpolation at a continuous position. Positions are
    /// clamped onto the grid.
    pub fn sample_bilinear(&self, pos: [f64; 2]) -> f64 {
        let (x0, y0, fx, fy) = bilinear_cell(pos, self.width, self.height);
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

/// Lower-left node and fractional offsets of the cell containing `pos`.
pub(crate) fn bilinear_cell(pos: [f64; 2], width: usize, height: usize) -> (usize, usize, f64, f64) {
    let px = pos[0].clamp(0.0, (width - 1) as f64);
    let py = pos[1].clamp(0.0, (height - 1) as f64);
    let x0 = (px.floor() as usize).min(width.saturating_sub(2));
    let y0 = (py.floor() as usize).min(height.saturating_sub(2));
    (x0, y0, px - x0 as f64, py - y0 as f64)
}

/// Per-pixel 2-vector field, e.g. a spatial gradient or an optical flow.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2D {
    width: usize,
    height: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
}

impl VectorField2D {
    pub fn new(width: usize, height: usize, dx: Vec<f64>, dy: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if dx.len() != n || dy.len() != n {
            return Err(Error::Dimension(format!(
                "component lengths {}/{} for a {width}x{height} grid",
                dx.len(),
                dy.len()
            )));
        }
        if dx.iter().chain(dy.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite vector component".into()));
        }
        Ok(Self { width, height, dx, dy })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dx: vec![0.0; width * height],
            dy: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(width, height);
        for y in 0..height {
            for x in 0..width {
                let [a, b] = f(x, y);
                out.dx[y * width + x] = a;
                out.dy[y * width + x] = b;
            }
        }
        out
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn dy(&self) -> &[f64] {
        &self.dy
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [f64; 2] {
        let i = y * self.width + x;
        [self.dx[i], self.dy[i]]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: [f64; 2]) {
        let i = y * self.width + x;
        self.dx[i] = v[0];
        self.dy[i] = v[1];
    }

    pub fn x_component(&self) -> Field2D {
        Field2D::new(self.width, self.height, self.dx.clone()).expect("finite by construction")
    }

    pub fn y_component(&self) -> Field2D {
        Field2D::new(self.width, self.height, self.dy.clone()).expect("finite by construction")
    }

    /// Pointwise Euclidean norm.
    pub fn magnitude(&self) -> Field2D {
        Field2D {
            width: self.width,
            height: self.height,
            data: self.dx.iter().zip(&self.dy).map(|(a, b)| a.hypot(*b)).collect(),
        }
    }

    pub fn neg(&self) -> VectorField2D {
        VectorField2D {
            width: self.width,
            height: self.height,
            dx: self.dx.iter().map(|v| -v).collect(),
            dy: self.dy.iter().map(|v| -v).collect(),
        }
    }

    pub fn shape_matches(&self, f: &Field2D) -> bool {
        self.width == f.width() && self.height == f.height()
    }

    pub fn ensure_finite(&self, what: &str) -> Result<()> {
        if self.dx.iter().chain(self.dy.iter()).all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Data(format!("{what}: non-finite vector component")))
        }
    }
}

/// Ordered frames of a video, all the same size.
#[derive(Debug, Clone)]
pub struct FrameSequence {
    frames: Vec<Field2D>,
    dt_frame: f64,
}

impl FrameSequence {
    pub fn new(frames: Vec<Field2D>, dt_frame: f64) -> Result<Self> {
        if !(dt_frame > 0.0 && dt_frame.is_finite()) {
            return Err(Error::Parameter(format!("dt_frame must be > 0, got {dt_frame}")));
        }
        if let Some(first) = frames.first() {
            for (i, f) in frames.iter().enumerate().skip(1) {
                if !f.same_shape(first) {
                    return Err(Error::Dimension(format!(
                        "frame {i} is {}x{}, frame 0 is {}x{}",
                        f.width(),
                        f.height(),
                        first.width(),
                        first.height()
                    )));
                }
            }
        }
        Ok(Self { frames, dt_frame })
    }

    pub fn frames(&self) -> &[Field2D] {
        &self.frames
    }

    pub fn dt_frame(&self) -> f64 {
        self.dt_frame
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Blur annealing: `sigma(t) = max(floor, sigma0 · exp(-decay_rate · t))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlurSchedule {
    pub sigma0: f64,
    pub decay_rate: f64,
    pub floor: f64,
}

impl Default for BlurSchedule {
    fn default() -> Self {
        Self {
            sigma0: 0.0,
            decay_rate: 0.0,
            floor: 0.0,
        }
    }
}

impl BlurSchedule {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma0", self.sigma0),
            ("decay_rate", self.decay_rate),
            ("floor", self.floor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!("blur {name} must be >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

pub fn schedule_sigma(schedule: &BlurSchedule, t: f64) -> f64 {
    schedule.floor.max(schedule.sigma0 * (-schedule.decay_rate * t).exp())
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset,
        message: message.into(),
    }
}

/// Decodes a binary graymap (`P5`), scaling samples to `[0, 1]`.
pub fn load_pgm(bytes: &[u8]) -> Result<Field2D> {
    if bytes.len() < 2 {
        return Err(parse_err(0, "missing magic number"));
    }
    if &bytes[..2] != b"P5" {
        return Err(parse_err(
            0,
            format!(
                "unsupported magic {:?}, only binary P5 is accepted",
                String::from_utf8_lossy(&bytes[..2])
            ),
        ));
    }
    let mut pos = 2;
    let width = read_header_int(bytes, &mut pos, "width")?;
    let height = read_header_int(bytes, &mut pos, "height")?;
    let maxval = read_header_int(bytes, &mut pos, "maxval")?;
    if width == 0 || height == 0 {
        return Err(parse_err(pos, format!("empty image {width}x{height}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(parse_err(pos, format!("maxval {maxval} outside 1..=65535")));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        Some(_) => return Err(parse_err(pos, "expected whitespace after maxval")),
        None => return Err(parse_err(pos, "truncated header")),
    }
    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let n = width
        .checked_mul(height)
        .ok_or_else(|| parse_err(pos, "image dimensions overflow"))?;
    let needed = n * bytes_per_sample;
    let payload = &bytes[pos..];
    if payload.len() < needed {
        return Err(parse_err(
            bytes.len(),
            format!("truncated payload: {} of {needed} bytes", payload.len()),
        ));
    }
    let scale = 1.0 / maxval as f64;
    let data = if bytes_per_sample == 1 {
        payload[..needed].iter().map(|&b| b as f64 * scale).collect()
    } else {
        payload[..needed]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 * scale)
            .collect()
    };
    Ok(Field2D { width, height, data })
}

fn read_header_int(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    // Skip whitespace and `#` comments.
    loop {
        match bytes.get(*pos) {
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(_) => break,
            None => return Err(parse_err(*pos, format!("truncated header before {what}"))),
        }
    }
    let start = *pos;
    while bytes.get(*pos).is_some_and(u8::is_ascii_digit) {
        *pos += 1;
    }
    if start == *pos {
        return Err(parse_err(start, format!("expected decimal {what}")));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(start, format!("{what} out of range")))
}

/// Encodes a field as an 8-bit `P5` graymap, clamping to `[0, 1]`.
pub fn encode_pgm(f: &Field2D) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", f.width, f.height).into_bytes();
    out.extend(f.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    out
}

fn require_grid(f: &Field2D, min: usize, what: &str) -> Result<()> {
    if f.width < min || f.height < min {
        Err(Error::Dimension(format!(
            "{what} needs at least {min}x{min}, got {}x{}",
            f.width, f.height
        )))
    } else {
        Ok(())
    }
}

fn require_spacing(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("grid spacing must be > 0, got {h}")))
    }
}

/// Spatial gradient: central differences inside, one-sided on the border.
pub fn gradient(f: &Field2D, h: f64) -> Result<VectorField2D> {
    require_grid(f, 2, "gradient")?;
    require_spacing(h)?;
    let (w, ht) = (f.width, f.height);
    let mut out = VectorField2D::zeros(w, ht);
    for y in 0..ht {
        for x in 0..w {
            let gx = if x == 0 {
                (f.get(1, y) - f.get(0, y)) / h
            } else if x == w - 1 {
                (f.get(x, y) - f.get(x - 1, y)) / h
            } else {
                (f.get(x + 1, y) - f.get(x - 1, y)) / (2.0 * h)
            };
            let gy = if y == 0 {
                (f.get(x, 1) - f.get(x, 0)) / h
            } else if y == ht - 1 {
                (f.get(x, y) - f.get(x, y - 1)) / h
            } else {
                (f.get(x, y + 1) - f.get(x, y - 1)) / (2.0 * h)
            };
            out.set(x, y, [gx, gy]);
        }
    }
    Ok(out)
}

/// Five-point Laplacian at interior pixels.
///
/// Border pixels carry prescribed (Dirichlet) values in the potential
/// solvers and have no equation of their own, so their entries are zero.
pub fn laplacian(f: &Field2D, h: f64) -> Result<Field2D> {
    require_grid(f, 3, "laplacian")?;
    require_spacing(h)?;
    let mut out = Field2D::zeros(f.width, f.height);
    laplacian_into(f, h, &mut out);
    Ok(out)
}

pub(crate) fn laplacian_into(f: &Field2D, h: f64, out: &mut Field2D) {
    let w = f.width;
    let inv_h2 = 1.0 / (h * h);
    let d = &f.data;
    for y in 1..f.height - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            out.data[i] = (d[i + 1] + d[i - 1] + d[i + w] + d[i - w] - 4.0 * d[i]) * inv_h2;
        }
    }
}

pub fn temporal_derivative(f_prev: &Field2D, f_next: &Field2D, dt: f64) -> Result<Field2D> {
    f_prev.check_shape(f_next, "temporal derivative")?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Parameter(format!("dt must be > 0, got {dt}")));
    }
    Ok(Field2D {
        width: f_prev.width,
        height: f_prev.height,
        data: f_prev
            .data
            .iter()
            .zip(&f_next.data)
            .map(|(a, b)| (b - a) / dt)
            .collect(),
    })
}

/// Normalized truncated Gaussian taps for offsets `-radius..=radius`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut taps: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let k = i as f64 - radius as f64;
            (-k * k / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Separable Gaussian smoothing with edge replication. `sigma = 0` returns
/// the frame untouched.
pub fn gaussian_blur(f: &Field2D, sigma: f64) -> Result<Field2D> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::Parameter(format!("blur sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(f.clone());
    }
    let taps = gaussian_kernel(sigma);
    let r = (taps.len() / 2) as isize;
    let (w, h) = (f.width, f.height);

    let mut rows = Field2D::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * f.get_clamped(x as isize + i as isize - r, y as isize))
                .sum();
            rows.set(x, y, acc);
        }
    }
    let mut out = Field2D::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            let acc: f64 = taps
                .iter()
                .enumerate()
                .map(|(i, t)| t * rows.get_clamped(x as isize, y as isize + i as isize - r))
                .sum();
            out.set(x, y, acc);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(w: usize, h: usize, seed: u64) -> Field2D {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Field2D::from_fn(w, h, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn pgm(header: &str, payload: &[u8]) -> Vec<u8> {
        let mut v = header.as_bytes().to_vec();
        v.extend_from_slice(payload);
        v
    }

    #[test]
    fn pgm_scales_to_unit_range() {
        let f = load_pgm(&pgm("P5\n2 2\n255\n", &[0, 255, 0, 255])).unwrap();
        assert_eq!((f.width(), f.height()), (2, 2));
        assert_eq!(f.data(), &[0.0, 1.0, 0.0, 1.0]);

        let f = load_pgm(&pgm("P5 1 1 255\n", &[128])).unwrap();
        assert_eq!(f.data(), &[128.0 / 255.0]);
    }

    #[test]
    fn pgm_sixteen_bit_is_big_endian() {
        let f = load_pgm(&pgm("P5\n# made by hand\n2 1\n65535\n", &[0xff, 0xff, 0x80, 0x00])).unwrap();
        assert_eq!(f.data(), &[1.0, 32768.0 / 65535.0]);
    }

    #[test]
    fn pgm_rejects_ascii_and_truncation() {
        match load_pgm(b"P2\n1 1\n255\n0\n") {
            Err(Error::Parse { offset: 0, .. }) => {}
            other => panic!("expected parse error at 0, got {other:?}"),
        }
        match load_pgm(&pgm("P5\n2 2\n255\n", &[1, 2, 3])) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 14),
            other => panic!("expected truncation error, got {other:?}"),
        }
        assert!(matches!(
            load_pgm(b"P5\n2 x\n255\n"),
            Err(Error::Parse { offset: 5, .. })
        ));
        assert!(matches!(load_pgm(b"P5\n1 1\n70000\n\0"), Err(Error::Parse { .. })));
    }

    #[test]
    fn pgm_encode_round_trips() {
        let f = Field2D::from_fn(5, 3, |x, y| ((x + 5 * y) as f64 * 17.0) / 255.0);
        let g = load_pgm(&encode_pgm(&f)).unwrap();
        for (a, b) in f.data().iter().zip(g.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_ramp_and_quadratic() {
        let c = Field2D::constant(6, 5, 3.0);
        let g = gradient(&c, 1.0).unwrap();
        assert!(g.dx().iter().chain(g.dy()).all(|v| *v == 0.0));

        let ramp = Field2D::from_fn(6, 5, |x, _| x as f64);
        let g = gradient(&ramp, 1.0).unwrap();
        for y in 1..4 {
            for x in 1..5 {
                assert_eq!(g.get(x, y), [1.0, 0.0]);
            }
        }

        let quad = Field2D::from_fn(7, 4, |x, _| (x * x) as f64);
        let g = gradient(&quad, 1.0).unwrap();
        for y in 1..3 {
            for x in 1..6 {
                assert_eq!(g.get(x, y)[0], 2.0 * x as f64);
            }
        }
    }

    #[test]
    fn stencils_reject_degenerate_grids() {
        assert!(matches!(gradient(&Field2D::zeros(1, 5), 1.0), Err(Error::Dimension(_))));
        assert!(matches!(
            laplacian(&Field2D::zeros(2, 5), 1.0),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(gradient(&Field2D::zeros(3, 3), 0.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn laplacian_matches_direct_stencil() {
        let c = Field2D::constant(5, 5, -2.0);
        assert!(laplacian(&c, 1.0).unwrap().data().iter().all(|v| *v == 0.0));

        let q = Field2D::from_fn(6, 6, |x, y| (x * x + y * y) as f64);
        let l = laplacian(&q, 1.0).unwrap();
        for y in 1..5 {
            for x in 1..5 {
                assert_eq!(l.get(x, y), 4.0);
            }
        }

        let f = random_field(8, 8, 7);
        let h = 0.5;
        let l = laplacian(&f, h).unwrap();
        for y in 1..7 {
            for x in 1..7 {
                let direct = (f.get(x + 1, y) + f.get(x - 1, y) + f.get(x, y + 1) + f.get(x, y - 1)
                    - 4.0 * f.get(x, y))
                    / (h * h);
                assert!((l.get(x, y) - direct).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn laplacian_is_divergence_of_compact_gradient() {
        // Forward-difference gradient followed by backward-difference
        // divergence reproduces the five-point stencil.
        let f = random_field(12, 10, 3);
        let h = 0.7;
        let l = laplacian(&f, h).unwrap();
        let fwd = |x: usize, y: usize| [(f.get(x + 1, y) - f.get(x, y)) / h, (f.get(x, y + 1) - f.get(x, y)) / h];
        for y in 2..8 {
            for x in 2..10 {
                let div = (fwd(x, y)[0] - fwd(x - 1, y)[0]) / h + (fwd(x, y)[1] - fwd(x, y - 1)[1]) / h;
                assert!((div - l.get(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn temporal_derivative_cases() {
        let a = random_field(4, 3, 1);
        let z = temporal_derivative(&a, &a, 0.1).unwrap();
        assert!(z.data().iter().all(|v| *v == 0.0));

        let b = a.map(|v| v + 0.5);
        let d = temporal_derivative(&a, &b, 0.5).unwrap();
        assert!(d.data().iter().all(|v| (v - 1.0).abs() < 1e-15));

        let b = random_field(4, 3, 2);
        let d = temporal_derivative(&a, &b, 0.25).unwrap();
        for y in 0..3 {
            for x in 0..4 {
                assert_eq!(d.get(x, y), (b.get(x, y) - a.get(x, y)) / 0.25);
            }
        }
        assert!(matches!(
            temporal_derivative(&a, &Field2D::zeros(3, 4), 1.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn blur_identity_cases() {
        let f = random_field(9, 7, 11);
        assert_eq!(gaussian_blur(&f, 0.0).unwrap(), f);
        let c = Field2D::constant(9, 7, 0.37);
        let b = gaussian_blur(&c, 2.3).unwrap();
        assert!(b.data().iter().all(|v| (v - 0.37).abs() < 1e-15));
        assert!(matches!(gaussian_blur(&f, -1.0), Err(Error::Parameter(_))));
    }

    #[test]
    fn blur_matches_dense_convolution() {
        let n = 15;
        let mut f = Field2D::zeros(n, n);
        f.set(7, 7, 1.0);
        let sigma = 1.0;
        let b = gaussian_blur(&f, sigma).unwrap();

        // Dense 2D convolution with the outer product of the same taps.
        let taps = gaussian_kernel(sigma);
        let r = (taps.len() / 2) as isize;
        for y in 0..n {
            for x in 0..n {
                let mut acc = 0.0;
                for (j, ty) in taps.iter().enumerate() {
                    for (i, tx) in taps.iter().enumerate() {
                        let sx = x as isize + i as isize - r;
                        let sy = y as isize + j as isize - r;
                        acc += tx * ty * f.get_clamped(sx, sy);
                    }
                }
                assert!((acc - b.get(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blur_semigroup_on_smooth_interior() {
        // Smooth, band-limited field; compare away from the border.
        let n = 96;
        let f = Field2D::from_fn(n, n, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.3 * (x / 30.0).sin() * (y / 40.0).cos() + 0.01 * x + 0.002 * x * y / 10.0
        });
        let (s1, s2) = (1.0, 1.5);
        let twice = gaussian_blur(&gaussian_blur(&f, s1).unwrap(), s2).unwrap();
        let once = gaussian_blur(&f, (s1 * s1 + s2 * s2).sqrt()).unwrap();
        let margin = (3.0 * (s1 + s2)).ceil() as usize + 1;
        let mut worst: f64 = 0.0;
        for y in margin..n - margin {
            for x in margin..n - margin {
                worst = worst.max((twice.get(x, y) - once.get(x, y)).abs());
            }
        }
        assert!(worst < 1e-6, "semigroup defect {worst:e}");
    }

    #[test]
    fn schedule_values() {
        let s = BlurSchedule {
            sigma0: 8.0,
            decay_rate: std::f64::consts::LN_2,
            floor: 0.0,
        };
        assert_eq!(schedule_sigma(&s, 0.0), 8.0);
        assert!((schedule_sigma(&s, 3.0) - 1.0).abs() < 1e-12);
        let flat = BlurSchedule { decay_rate: 0.0, ..s };
        assert_eq!(schedule_sigma(&flat, 123.0), 8.0);
        let floored = BlurSchedule { floor: 2.0, ..s };
        assert_eq!(schedule_sigma(&floored, 10.0), 2.0);
    }

    fn max_grad_norm(f: &Field2D) -> f64 {
        let g = gradient(f, 1.0).unwrap();
        g.magnitude().max_abs()
    }

    proptest! {
        #[test]
        fn stencils_are_linear(seed in 0u64..1000, a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let f = random_field(7, 6, seed);
            let g = random_field(7, 6, seed + 1);
            let combo = Field2D::from_fn(7, 6, |x, y| a * f.get(x, y) + b * g.get(x, y));
            let (lf, lg, lc) = (laplacian(&f, 1.0).unwrap(), laplacian(&g, 1.0).unwrap(), laplacian(&combo, 1.0).unwrap());
            let (gf, gg, gc) = (gradient(&f, 1.0).unwrap(), gradient(&g, 1.0).unwrap(), gradient(&combo, 1.0).unwrap());
            for i in 0..42 {
                prop_assert!((lc.data()[i] - (a * lf.data()[i] + b * lg.data()[i])).abs() < 1e-12);
                prop_assert!((gc.dx()[i] - (a * gf.dx()[i] + b * gg.dx()[i])).abs() < 1e-12);
                prop_assert!((gc.dy()[i] - (a * gf.dy()[i] + b * gg.dy()[i])).abs() < 1e-12);
            }
        }

        #[test]
        fn blur_never_sharpens(seed in 0u64..1000, sigma in 0.3f64..3.0) {
            let f = random_field(11, 9, seed);
            let b = gaussian_blur(&f, sigma).unwrap();
            prop_assert!(max_grad_norm(&b) <= max_grad_norm(&f) + 1e-12);
        }

        #[test]
        fn schedule_is_non_increasing(s0 in 0.0f64..10.0, rate in 0.0f64..3.0, floor in 0.0f64..2.0, t in 0.0f64..10.0, dt in 0.0f64..5.0) {
            let s = BlurSchedule { sigma0: s0, decay_rate: rate, floor };
            prop_assert!(schedule_sigma(&s, t + dt) <= schedule_sigma(&s, t));
        }
    }
}
