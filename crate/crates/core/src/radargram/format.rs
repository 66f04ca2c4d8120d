//! RGRM binary container and magnitude CSV export.
//!
//! Layout (little-endian): magic `RGRM`, version `u16`, `M u32`, `N u32`,
//! then `Fs, Ts, f0, omega0, bin_scale` as `f64`, then `M * N` complex
//! samples as interleaved `f32` pairs, slow time outer.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use super::{ComplexGrid, RadarConfig, Radargram};
use crate::error::{Error, Result};

pub const RGRM_MAGIC: [u8; 4] = *b"RGRM";
pub const RGRM_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 5 * 8;

/// Writes `x` in RGRM format. Samples are stored as `f32`; a radargram
/// whose samples are already `f32`-representable round-trips bit-exactly.
pub fn write_radargram(x: &Radargram, path: impl AsRef<Path>) -> Result<()> {
    let bytes = encode(x)?;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

pub fn read_radargram(path: impl AsRef<Path>) -> Result<Radargram> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode(&bytes)
}

pub(crate) fn encode(x: &Radargram) -> Result<Vec<u8>> {
    let c = x.config();
    let m = u32::try_from(c.scans).map_err(|_| Error::invalid("M does not fit in u32"))?;
    let n = u32::try_from(c.bins).map_err(|_| Error::invalid("N does not fit in u32"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + c.scans * c.bins * 8);
    out.extend_from_slice(&RGRM_MAGIC);
    out.extend_from_slice(&RGRM_VERSION.to_le_bytes());
    out.extend_from_slice(&m.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    for v in [c.scan_rate_hz, c.fast_period_s, c.carrier_hz, c.pulse_width_s, c.bin_scale_m] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for (i, z) in x.samples().as_slice().iter().enumerate() {
        let (re, im) = (z.re as f32, z.im as f32);
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        out.extend_from_slice(&re.to_le_bytes());
        out.extend_from_slice(&im.to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const K: usize>(&mut self) -> [u8; K] {
        let mut buf = [0u8; K];
        buf.copy_from_slice(&self.bytes[self.pos..self.pos + K]);
        self.pos += K;
        buf
    }
}

pub(crate) fn decode(bytes: &[u8]) -> Result<Radargram> {
    if bytes.len() < 4 {
        return Err(Error::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let mut cur = Cursor { bytes, pos: 0 };
    let magic: [u8; 4] = cur.take();
    if magic != RGRM_MAGIC {
        return Err(Error::BadMagic { expected: RGRM_MAGIC, found: magic });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated { expected: HEADER_LEN as u64, found: bytes.len() as u64 });
    }
    let version = u16::from_le_bytes(cur.take());
    if version != RGRM_VERSION {
        return Err(Error::Version { expected: RGRM_VERSION, found: version });
    }
    let scans = u32::from_le_bytes(cur.take()) as usize;
    let bins = u32::from_le_bytes(cur.take()) as usize;
    let mut header = [0f64; 5];
    for (i, h) in header.iter_mut().enumerate() {
        *h = f64::from_le_bytes(cur.take());
        if !h.is_finite() {
            return Err(Error::NonFiniteValue(i));
        }
    }
    let [scan_rate_hz, fast_period_s, carrier_hz, pulse_width_s, bin_scale_m] = header;
    let config = RadarConfig { carrier_hz, fast_period_s, pulse_width_s, scan_rate_hz, bin_scale_m, scans, bins };
    config.validate()?;

    let expected = HEADER_LEN as u64 + scans as u64 * bins as u64 * 8;
    if bytes.len() as u64 != expected {
        return Err(Error::Truncated { expected, found: bytes.len() as u64 });
    }
    let mut data = Vec::with_capacity(scans * bins);
    for i in 0..scans * bins {
        let re = f32::from_le_bytes(cur.take());
        let im = f32::from_le_bytes(cur.take());
        if !(re.is_finite() && im.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        data.push(Complex64::new(re as f64, im as f64));
    }
    Radargram::new(config, ComplexGrid::from_vec(scans, bins, data)?)
}

/// Magnitude-only CSV: header `m,n,magnitude`, scan index `m` from 1, bin `n` from 0.
pub fn write_magnitude_csv(x: &Radargram, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "m,n,magnitude")?;
    for m in 0..x.scans() {
        for n in 0..x.bins() {
            writeln!(w, "{},{},{:.9e}", m + 1, n, x.at(m, n).norm())?;
        }
    }
    w.flush()?;
    Ok(())
}
