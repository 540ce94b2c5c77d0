//! Little-endian binary primitives shared by the dataset and model formats.

use crate::{Error, Result};
use num_complex::Complex64;
use std::io::{Read, Write};

pub fn write_u8<W: Write>(w: &mut W, v: u8) -> Result<()> {
    w.write_all(&[v])?;
    Ok(())
}

pub fn write_u16<W: Write>(w: &mut W, v: u16) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn write_c64<W: Write>(w: &mut W, v: Complex64) -> Result<()> {
    write_f64(w, v.re)?;
    write_f64(w, v.im)
}

fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format("file is truncated".into())
        } else {
            Error::Io(e)
        }
    })
}

pub fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    fill(r, &mut b)?;
    Ok(b[0])
}

pub fn read_u16<R: Read>(r: &mut R) -> Result<u16> {
    let mut b = [0u8; 2];
    fill(r, &mut b)?;
    Ok(u16::from_le_bytes(b))
}

pub fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    fill(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

pub fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    fill(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    fill(r, &mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_c64<R: Read>(r: &mut R) -> Result<Complex64> {
    let re = read_f64(r)?;
    let im = read_f64(r)?;
    Ok(Complex64::new(re, im))
}

/// Reads and verifies a fixed magic string.
pub fn expect_magic<R: Read>(r: &mut R, magic: &[u8], what: &str) -> Result<()> {
    let mut buf = vec![0u8; magic.len()];
    fill(r, &mut buf)?;
    if buf != magic {
        return Err(Error::Format(format!("not a {what} file (bad magic bytes)")));
    }
    Ok(())
}
