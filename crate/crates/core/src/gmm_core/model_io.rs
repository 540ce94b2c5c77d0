//! Binary serialization of fitted mixtures.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "GMCEMDL"  magic
//! u16        format version (1)
//! u32        K (components)
//! u32        N (dimension)
//! u8         structure tag: 0 = full, 1 = block-Toeplitz
//! u32, u32   grid dims (carriers, timeslots); (N, 1) for full mixtures
//! K   f64    weights
//! K*N (f64, f64)  means, component-major
//! then, full:            K*N*N (f64, f64) covariances, column-major
//! then, block-Toeplitz:  K*R f64 spectra (R from the grid dims)
//! ```

use crate::gmm_core::{toeplitz::DftBasis, CovStructure, GmmParams};
use crate::io_util as io;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

const MAGIC: &[u8] = b"GMCEMDL";
const VERSION: u16 = 1;

/// Writes a mixture to `path`.
pub fn write_model(path: &Path, gmm: &GmmParams) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    io::write_u16(&mut w, VERSION)?;
    let k = gmm.num_components();
    let n = gmm.dim();
    io::write_u32(&mut w, k as u32)?;
    io::write_u32(&mut w, n as u32)?;
    match gmm.structure() {
        CovStructure::Full => {
            io::write_u8(&mut w, 0)?;
            io::write_u32(&mut w, n as u32)?;
            io::write_u32(&mut w, 1)?;
        }
        CovStructure::BlockToeplitz { dims, .. } => {
            io::write_u8(&mut w, 1)?;
            io::write_u32(&mut w, dims.0 as u32)?;
            io::write_u32(&mut w, dims.1 as u32)?;
        }
    }
    for &wt in gmm.weights() {
        io::write_f64(&mut w, wt)?;
    }
    for mu in gmm.means() {
        for v in mu.iter() {
            io::write_c64(&mut w, *v)?;
        }
    }
    match gmm.structure() {
        CovStructure::Full => {
            for c in gmm.covariances() {
                for v in c.iter() {
                    io::write_c64(&mut w, *v)?;
                }
            }
        }
        CovStructure::BlockToeplitz { spectra, .. } => {
            for spec in spectra {
                for &v in spec.iter() {
                    io::write_f64(&mut w, v)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a mixture written by [`write_model`] and revalidates its invariants.
pub fn read_model(path: &Path) -> Result<GmmParams> {
    let mut r = BufReader::new(File::open(path)?);
    io::expect_magic(&mut r, MAGIC, "model")?;
    let version = io::read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported model format version {version}"
        )));
    }
    let k = io::read_u32(&mut r)? as usize;
    let n = io::read_u32(&mut r)? as usize;
    let tag = io::read_u8(&mut r)?;
    let dims = (io::read_u32(&mut r)? as usize, io::read_u32(&mut r)? as usize);
    if k == 0 || n == 0 {
        return Err(Error::Format("model with zero components or dimension".into()));
    }
    let mut weights = Vec::with_capacity(k);
    for _ in 0..k {
        weights.push(io::read_f64(&mut r)?);
    }
    let mut means = Vec::with_capacity(k);
    for _ in 0..k {
        let mut mu = DVector::zeros(n);
        for i in 0..n {
            mu[i] = io::read_c64(&mut r)?;
        }
        means.push(mu);
    }
    match tag {
        0 => {
            let mut covs = Vec::with_capacity(k);
            for _ in 0..k {
                let mut c = DMatrix::zeros(n, n);
                for j in 0..n {
                    for i in 0..n {
                        c[(i, j)] = io::read_c64(&mut r)?;
                    }
                }
                covs.push(c);
            }
            GmmParams::new(weights, means, covs)
        }
        1 => {
            if dims.0 * dims.1 != n {
                return Err(Error::Format(format!(
                    "grid {}x{} does not match dimension {n}",
                    dims.0, dims.1
                )));
            }
            let rlen = DftBasis::new(dims).spectrum_len();
            let mut spectra = Vec::with_capacity(k);
            for _ in 0..k {
                let mut c = DVector::zeros(rlen);
                for i in 0..rlen {
                    c[i] = io::read_f64(&mut r)?;
                }
                spectra.push(c);
            }
            GmmParams::new_block_toeplitz(weights, means, spectra, dims)
        }
        other => Err(Error::Format(format!("unknown structure tag {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn bits_equal(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> bool {
        a.len() == b.len()
            && a.iter().zip(b.iter()).all(|(x, y)| {
                x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()
            })
    }

    #[test]
    fn full_model_round_trips_bit_exactly() {
        let mut rng = crate::rng::sample_rng(41, 0);
        let n = 3;
        let mut covs = Vec::new();
        let mut means = Vec::new();
        for _ in 0..2 {
            let a = DMatrix::from_fn(n, n, |_, _| crate::rng::standard_complex(&mut rng));
            covs.push(&a * a.adjoint() + DMatrix::identity(n, n));
            means.push(DVector::from_fn(n, |_, _| crate::rng::standard_complex(&mut rng)));
        }
        let gmm = GmmParams::new(vec![0.25, 0.75], means, covs).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gmm");
        write_model(&path, &gmm).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.weights(), gmm.weights());
        for k in 0..2 {
            assert_eq!(back.means()[k], gmm.means()[k]);
            assert!(bits_equal(&back.covariances()[k], &gmm.covariances()[k]));
        }
        assert_eq!(back.structure(), gmm.structure());
    }

    #[test]
    fn block_toeplitz_model_round_trips() {
        let dims = (3, 2);
        let basis = DftBasis::new(dims);
        let mut rng = crate::rng::sample_rng(42, 0);
        let spectra: Vec<DVector<f64>> = (0..2)
            .map(|_| {
                DVector::from_fn(basis.spectrum_len(), |_, _| {
                    rand::Rng::gen_range(&mut rng, 0.1..2.0)
                })
            })
            .collect();
        let means = vec![DVector::zeros(6); 2];
        let gmm =
            GmmParams::new_block_toeplitz(vec![0.5, 0.5], means, spectra, dims).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.gmm");
        write_model(&path, &gmm).unwrap();
        let back = read_model(&path).unwrap();
        assert_eq!(back.structure(), gmm.structure());
        for k in 0..2 {
            assert!(bits_equal(&back.covariances()[k], &gmm.covariances()[k]));
        }
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.gmm");
        std::fs::write(&path, b"NOTAMODELFILE....").unwrap();
        assert!(matches!(read_model(&path), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_model_is_rejected() {
        let gmm = GmmParams::new(
            vec![1.0],
            vec![DVector::from_element(2, Complex64::new(0.0, 0.0))],
            vec![DMatrix::identity(2, 2)],
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.gmm");
        write_model(&path, &gmm).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(read_model(&path), Err(Error::Format(_))));
    }
}
