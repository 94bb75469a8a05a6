//! Grid-sample CSV and the little-endian binary snapshot format.
//!
//! Snapshot header: `dim: u32`, `lengths: dim x f64`, `grid points: dim x u32`,
//! `m: u32`. Payload: `m` pairs `(re: f64, im: f64)`. A series stores the
//! header once, then `count: u64`, then `count` records of `t: f64` followed by
//! a payload.

use std::io::{Read, Write};

use nalgebra::DVector;
use num_complex::Complex64;

use super::domain::BoxDomain;
use crate::error::{Error, Result};

pub fn write_grid_csv<W: Write>(out: &mut W, domain: &BoxDomain, samples: &[Complex64]) -> Result<()> {
    if samples.len() != domain.num_nodes() {
        return Err(Error::InvalidInput("sample count does not match the grid".into()));
    }
    let axes = ["x", "y", "z"];
    let header: Vec<&str> = axes[..domain.dim()].to_vec();
    writeln!(out, "{},re,im", header.join(","))?;
    for (i, s) in samples.iter().enumerate() {
        let x = domain.point(i);
        for xi in &x[..domain.dim()] {
            write!(out, "{xi:.17e},")?;
        }
        writeln!(out, "{:.17e},{:.17e}", s.re, s.im)?;
    }
    Ok(())
}

/// Parse grid CSV written by [`write_grid_csv`]; node order must match the domain.
pub fn read_grid_csv<R: Read>(input: R, domain: &BoxDomain) -> Result<Vec<Complex64>> {
    let mut text = String::new();
    let mut input = input;
    input.read_to_string(&mut text)?;
    let dim = domain.dim();
    let mut out = Vec::with_capacity(domain.num_nodes());
    for (line_no, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != dim + 2 && cols.len() != dim + 1 {
            return Err(Error::Parse(format!("line {}: expected {} columns", line_no + 1, dim + 2)));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
        };
        let x: Vec<f64> = cols[..dim].iter().map(|c| parse(c)).collect::<Result<_>>()?;
        let expected = domain.point(out.len());
        if x.iter().zip(&expected).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
            return Err(Error::Parse(format!("line {}: node coordinates do not match the grid", line_no + 1)));
        }
        let re = parse(cols[dim])?;
        let im = if cols.len() == dim + 2 { parse(cols[dim + 1])? } else { 0.0 };
        out.push(Complex64::new(re, im));
    }
    if out.len() != domain.num_nodes() {
        return Err(Error::Parse(format!(
            "{} rows for a grid of {} nodes",
            out.len(),
            domain.num_nodes()
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotHeader {
    pub lengths: Vec<f64>,
    pub grid_points: Vec<usize>,
    pub m: usize,
}

impl SnapshotHeader {
    pub fn for_domain(domain: &BoxDomain, m: usize) -> Self {
        Self {
            lengths: domain.lengths().to_vec(),
            grid_points: domain.grid_points().to_vec(),
            m,
        }
    }

    fn write<W: Write>(&self, out: &mut W) -> Result<()> {
        out.write_all(&(self.lengths.len() as u32).to_le_bytes())?;
        for l in &self.lengths {
            out.write_all(&l.to_le_bytes())?;
        }
        for n in &self.grid_points {
            out.write_all(&(*n as u32).to_le_bytes())?;
        }
        out.write_all(&(self.m as u32).to_le_bytes())?;
        Ok(())
    }

    fn read<R: Read>(input: &mut R) -> Result<Self> {
        let dim = read_u32(input)? as usize;
        if !(1..=3).contains(&dim) {
            return Err(Error::Parse(format!("snapshot dimension {dim} out of range")));
        }
        let lengths = (0..dim).map(|_| read_f64(input)).collect::<Result<_>>()?;
        let grid_points = (0..dim)
            .map(|_| read_u32(input).map(|v| v as usize))
            .collect::<Result<_>>()?;
        let m = read_u32(input)? as usize;
        Ok(Self {
            lengths,
            grid_points,
            m,
        })
    }
}

fn write_payload<W: Write>(out: &mut W, coeffs: &DVector<Complex64>) -> Result<()> {
    for c in coeffs.iter() {
        out.write_all(&c.re.to_le_bytes())?;
        out.write_all(&c.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_payload<R: Read>(input: &mut R, m: usize) -> Result<DVector<Complex64>> {
    let mut v = Vec::with_capacity(m);
    for _ in 0..m {
        let re = read_f64(input)?;
        let im = read_f64(input)?;
        v.push(Complex64::new(re, im));
    }
    Ok(DVector::from_vec(v))
}

pub fn write_snapshot<W: Write>(out: &mut W, header: &SnapshotHeader, coeffs: &DVector<Complex64>) -> Result<()> {
    if coeffs.len() != header.m {
        return Err(Error::InvalidInput("payload length differs from header m".into()));
    }
    header.write(out)?;
    write_payload(out, coeffs)
}

pub fn read_snapshot<R: Read>(input: &mut R) -> Result<(SnapshotHeader, DVector<Complex64>)> {
    let header = SnapshotHeader::read(input)?;
    let coeffs = read_payload(input, header.m)?;
    Ok((header, coeffs))
}

pub fn write_series<W: Write>(
    out: &mut W,
    header: &SnapshotHeader,
    times: &[f64],
    states: &[DVector<Complex64>],
) -> Result<()> {
    if times.len() != states.len() {
        return Err(Error::InvalidInput("times and states differ in length".into()));
    }
    header.write(out)?;
    out.write_all(&(times.len() as u64).to_le_bytes())?;
    for (t, s) in times.iter().zip(states) {
        if s.len() != header.m {
            return Err(Error::InvalidInput("payload length differs from header m".into()));
        }
        out.write_all(&t.to_le_bytes())?;
        write_payload(out, s)?;
    }
    Ok(())
}

pub type Series = (SnapshotHeader, Vec<f64>, Vec<DVector<Complex64>>);

pub fn read_series<R: Read>(input: &mut R) -> Result<Series> {
    let header = SnapshotHeader::read(input)?;
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(truncated)?;
    let count = u64::from_le_bytes(buf) as usize;
    let mut times = Vec::with_capacity(count);
    let mut states = Vec::with_capacity(count);
    for _ in 0..count {
        times.push(read_f64(input)?);
        states.push(read_payload(input, header.m)?);
    }
    Ok((header, times, states))
}

fn truncated(e: std::io::Error) -> Error {
    Error::Parse(format!("truncated snapshot: {e}"))
}

fn read_u32<R: Read>(input: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    input.read_exact(&mut buf).map_err(truncated)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(input: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf).map_err(truncated)?;
    Ok(f64::from_le_bytes(buf))
}
