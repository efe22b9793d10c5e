//! Scanpath CSV and binary field dumps.
//!
//! CSV: header `t,x,y,vx,vy,saccade`, one row per sample, floats in the
//! shortest `%.9g` form, `saccade` as `0`/`1`, LF line endings.
//!
//! FOAF: the magic `FOAF`, width and height as little-endian `u32`, then the
//! row-major samples as little-endian `f32`.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::foa::{ScanSample, Scanpath};
use crate::retina::Field2D;

pub const CSV_HEADER: &str = "t,x,y,vx,vy,saccade";
pub const FIELD_MAGIC: &[u8; 4] = b"FOAF";

/// Formats like C's `%.9g`: nine significant digits, trailing zeros
/// stripped, exponent form outside `1e-4 ≤ |x| < 1e9`.
pub fn format_sig9(x: f64) -> String {
    const P: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    // Rounding to P significant digits fixes the exponent.
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..P).contains(&exp) {
        let decimals = (P - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_scanpath_csv<W: Write>(path: &Scanpath, mut sink: W) -> std::io::Result<()> {
    let mut out = String::with_capacity(32 * (path.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in path.samples() {
        for v in [s.t, s.a[0], s.a[1], s.v[0], s.v[1]] {
            out.push_str(&format_sig9(v));
            out.push(',');
        }
        out.push(if s.saccade { '1' } else { '0' });
        out.push('\n');
    }
    sink.write_all(out.as_bytes())?;
    sink.flush()
}

pub fn scanpath_csv_string(path: &Scanpath) -> String {
    let mut buf = Vec::new();
    write_scanpath_csv(path, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Parses the CSV produced by [`write_scanpath_csv`].
pub fn parse_scanpath_csv(text: &str) -> Result<Scanpath> {
    let mut lines = text.split('\n');
    let mut offset = 0;
    match lines.next() {
        Some(CSV_HEADER) => offset += CSV_HEADER.len() + 1,
        _ => {
            return Err(Error::Parse {
                offset: 0,
                message: format!("expected header {CSV_HEADER:?}"),
            })
        }
    }
    let mut path = Scanpath::new();
    for line in lines {
        if line.is_empty() {
            offset += 1;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let bad = |message: String| Error::Parse { offset, message };
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 columns, found {}", fields.len())));
        }
        let mut nums = [0.0; 5];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| bad(format!("bad number {f:?}")))?;
        }
        let saccade = match fields[5] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("bad saccade flag {other:?}"))),
        };
        path.push(ScanSample {
            t: nums[0],
            a: [nums[1], nums[2]],
            v: [nums[3], nums[4]],
            saccade,
        })?;
        offset += line.len() + 1;
    }
    Ok(path)
}

pub fn write_field<W: Write>(f: &Field2D, mut sink: W) -> std::io::Result<()> {
    let mut buf = Vec::with_capacity(12 + 4 * f.data().len());
    buf.extend_from_slice(FIELD_MAGIC);
    buf.extend_from_slice(&(f.width() as u32).to_le_bytes());
    buf.extend_from_slice(&(f.height() as u32).to_le_bytes());
    for v in f.data() {
        buf.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    sink.write_all(&buf)?;
    sink.flush()
}

pub fn field_bytes(f: &Field2D) -> Vec<u8> {
    let mut buf = Vec::new();
    write_field(f, &mut buf).expect("writing to memory");
    buf
}

/// Reads one FOAF record. Any trailing data is left in `source`.
pub fn read_field<R: Read>(mut source: R) -> Result<Field2D> {
    let mut header = [0u8; 12];
    read_exact_at(&mut source, &mut header, 0)?;
    if &header[..4] != FIELD_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: "missing FOAF magic".into(),
        });
    }
    let width = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let n = width.checked_mul(height).ok_or_else(|| Error::Parse {
        offset: 4,
        message: "field dimensions overflow".into(),
    })?;
    let mut payload = vec![0u8; 4 * n];
    read_exact_at(&mut source, &mut payload, 12)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Field2D::new(width, height, data)
}

fn read_exact_at<R: Read>(source: &mut R, buf: &mut [u8], offset: usize) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match source.read(&mut buf[filled..]) {
            Ok(0) => {
                return Err(Error::Parse {
                    offset: offset + filled,
                    message: "truncated field record".into(),
                })
            }
            Ok(k) => filled += k,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}
