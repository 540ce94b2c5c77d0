//! Binary dataset files for channel samples and pilot observations.
//!
//! Layout (integers and floats little-endian):
//!
//! ```text
//! "GMCE"     magic
//! u16        format version (1)
//! u8         tag: 0 = spatial channels, 1 = OFDM channels, 2 = observations
//! u32, u32   N_c, N_t  (spatial channels: N_c = N, N_t = 1)
//! u32        M: observed entries per record; 0 means full observation
//! u64        L: number of records
//! if tag 2:  f64 noise variance, then M u32 pattern indices
//! L records  of complex entries as (f64 real, f64 imag) pairs; a record has
//!            M entries when M > 0, otherwise N_c * N_t
//! ```

use super::{ChannelSample, ObservationSet, Scenario, SelectionPattern};
use crate::io_util as io;
use crate::{Complex64, Error, Result};
use nalgebra::DVector;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

const MAGIC: &[u8] = b"GMCE";
const VERSION: u16 = 1;

/// The two kinds of content a dataset file can hold.
#[derive(Clone, Debug)]
pub enum Dataset {
    /// Ground-truth channel vectors.
    Channels {
        scenario: Scenario,
        /// Grid shape `(N_c, N_t)`; spatial data uses `(N, 1)`.
        dims: (usize, usize),
        samples: Vec<DVector<Complex64>>,
    },
    /// Noisy, possibly partial observations sharing one pattern.
    Observations {
        /// Grid shape of the underlying channel.
        dims: (usize, usize),
        set: ObservationSet,
    },
}

impl Dataset {
    /// Bundles generated channel samples for persistence (the per-sample
    /// genie covariances are not stored).
    pub fn from_channel_samples(
        dims: (usize, usize),
        samples: &[ChannelSample],
    ) -> Result<Dataset> {
        let n = dims.0 * dims.1;
        let mut scenario = None;
        for s in samples {
            if s.h.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "sample length {} does not match grid dimension {n}",
                    s.h.len()
                )));
            }
            match scenario {
                None => scenario = Some(s.scenario),
                Some(sc) if sc == s.scenario => {}
                _ => {
                    return Err(Error::InvalidParameter(
                        "cannot mix scenarios in one dataset".into(),
                    ))
                }
            }
        }
        Ok(Dataset::Channels {
            scenario: scenario.unwrap_or(Scenario::Spatial),
            dims,
            samples: samples.iter().map(|s| s.h.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Channels { samples, .. } => samples.len(),
            Dataset::Observations { set, .. } => set.samples.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            Dataset::Channels { dims, .. } | Dataset::Observations { dims, .. } => *dims,
        }
    }
}

/// Writes a dataset to `path`.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    io::write_u16(&mut w, VERSION)?;
    match data {
        Dataset::Channels {
            scenario,
            dims,
            samples,
        } => {
            let n = dims.0 * dims.1;
            io::write_u8(
                &mut w,
                match scenario {
                    Scenario::Spatial => 0,
                    Scenario::Ofdm => 1,
                },
            )?;
            io::write_u32(&mut w, dims.0 as u32)?;
            io::write_u32(&mut w, dims.1 as u32)?;
            io::write_u32(&mut w, 0)?;
            io::write_u64(&mut w, samples.len() as u64)?;
            for s in samples {
                if s.len() != n {
                    return Err(Error::DimensionMismatch(format!(
                        "sample length {} does not match grid dimension {n}",
                        s.len()
                    )));
                }
                for v in s.iter() {
                    io::write_c64(&mut w, *v)?;
                }
            }
        }
        Dataset::Observations { dims, set } => {
            let n = dims.0 * dims.1;
            if set.pattern.total_dim() != n {
                return Err(Error::DimensionMismatch(format!(
                    "pattern dimension {} does not match grid dimension {n}",
                    set.pattern.total_dim()
                )));
            }
            let m = if set.pattern.is_full() {
                0
            } else {
                set.pattern.num_observed()
            };
            let record_len = if m == 0 { n } else { m };
            io::write_u8(&mut w, 2)?;
            io::write_u32(&mut w, dims.0 as u32)?;
            io::write_u32(&mut w, dims.1 as u32)?;
            io::write_u32(&mut w, m as u32)?;
            io::write_u64(&mut w, set.samples.len() as u64)?;
            io::write_f64(&mut w, set.noise_var)?;
            if m > 0 {
                for &i in set.pattern.observed() {
                    io::write_u32(&mut w, i as u32)?;
                }
            }
            for s in &set.samples {
                if s.len() != record_len {
                    return Err(Error::DimensionMismatch(format!(
                        "record length {} does not match pattern size {record_len}",
                        s.len()
                    )));
                }
                for v in s.iter() {
                    io::write_c64(&mut w, *v)?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = BufReader::new(File::open(path)?);
    io::expect_magic(&mut r, MAGIC, "dataset")?;
    let version = io::read_u16(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format version {version}"
        )));
    }
    let tag = io::read_u8(&mut r)?;
    let nc = io::read_u32(&mut r)? as usize;
    let nt = io::read_u32(&mut r)? as usize;
    let m = io::read_u32(&mut r)? as usize;
    let l = io::read_u64(&mut r)? as usize;
    let n = nc
        .checked_mul(nt)
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format("invalid grid dimensions".into()))?;
    let read_records = |r: &mut BufReader<File>, len: usize| -> Result<Vec<DVector<Complex64>>> {
        let mut out = Vec::with_capacity(l.min(1 << 20));
        for _ in 0..l {
            let mut v = DVector::zeros(len);
            for i in 0..len {
                v[i] = io::read_c64(r)?;
            }
            out.push(v);
        }
        Ok(out)
    };
    match tag {
        0 | 1 => {
            if m != 0 {
                return Err(Error::Format(
                    "channel dataset must not declare a pattern".into(),
                ));
            }
            let samples = read_records(&mut r, n)?;
            Ok(Dataset::Channels {
                scenario: if tag == 0 {
                    Scenario::Spatial
                } else {
                    Scenario::Ofdm
                },
                dims: (nc, nt),
                samples,
            })
        }
        2 => {
            let noise_var = io::read_f64(&mut r)?;
            if !(noise_var >= 0.0 && noise_var.is_finite()) {
                return Err(Error::Format("invalid noise variance".into()));
            }
            let pattern = if m == 0 {
                SelectionPattern::full(n)
            } else {
                let mut idx = Vec::with_capacity(m);
                for _ in 0..m {
                    idx.push(io::read_u32(&mut r)? as usize);
                }
                SelectionPattern::new(idx, n)
                    .map_err(|e| Error::Format(format!("bad stored pattern: {e}")))?
            };
            let samples = read_records(&mut r, pattern.num_observed())?;
            Ok(Dataset::Observations {
                dims: (nc, nt),
                set: ObservationSet {
                    pattern,
                    noise_var,
                    samples,
                },
            })
        }
        other => Err(Error::Format(format!("unknown dataset tag {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_sim::{
        generate_spatial_samples, make_diamond_pattern, observe_samples, SpatialParams,
    };

    fn bits_equal(a: &DVector<Complex64>, b: &DVector<Complex64>) -> bool {
        a.len() == b.len()
            && a.iter().zip(b.iter()).all(|(x, y)| {
                x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits()
            })
    }

    #[test]
    fn channel_dataset_round_trips_bit_exactly() {
        let params = SpatialParams::new(5);
        let samples = generate_spatial_samples(&params, 100, 77).unwrap();
        let data = Dataset::from_channel_samples((5, 1), &samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.gmce");
        write_dataset(&path, &data).unwrap();
        match read_dataset(&path).unwrap() {
            Dataset::Channels {
                scenario,
                dims,
                samples: back,
            } => {
                assert_eq!(scenario, Scenario::Spatial);
                assert_eq!(dims, (5, 1));
                assert_eq!(back.len(), 100);
                for (a, b) in back.iter().zip(samples.iter()) {
                    assert!(bits_equal(a, &b.h));
                }
            }
            _ => panic!("wrong dataset kind"),
        }
    }

    #[test]
    fn observation_dataset_round_trips() {
        let params = SpatialParams::new(12);
        let samples = generate_spatial_samples(&params, 7, 3).unwrap();
        let pattern = make_diamond_pattern(12, 1, 1, 4).unwrap();
        let set = observe_samples(&samples, &pattern, 0.25, 9).unwrap();
        let data = Dataset::Observations {
            dims: (12, 1),
            set: set.clone(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("o.gmce");
        write_dataset(&path, &data).unwrap();
        match read_dataset(&path).unwrap() {
            Dataset::Observations { dims, set: back } => {
                assert_eq!(dims, (12, 1));
                assert_eq!(back.pattern, set.pattern);
                assert_eq!(back.noise_var, 0.25);
                for (a, b) in back.samples.iter().zip(set.samples.iter()) {
                    assert!(bits_equal(a, b));
                }
            }
            _ => panic!("wrong dataset kind"),
        }
    }

    #[test]
    fn full_pattern_observations_store_m_zero() {
        let params = SpatialParams::new(3);
        let samples = generate_spatial_samples(&params, 2, 4).unwrap();
        let pattern = SelectionPattern::full(3);
        let set = observe_samples(&samples, &pattern, 1.0, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.gmce");
        write_dataset(&path, &Dataset::Observations { dims: (3, 1), set }).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        // Bytes 15..19 hold M; a full pattern is encoded as zero.
        assert_eq!(&bytes[15..19], &[0, 0, 0, 0]);
        match read_dataset(&path).unwrap() {
            Dataset::Observations { set, .. } => assert!(set.pattern.is_full()),
            _ => panic!("wrong dataset kind"),
        }
    }

    #[test]
    fn empty_dataset_is_valid() {
        let data = Dataset::Channels {
            scenario: Scenario::Ofdm,
            dims: (4, 2),
            samples: vec![],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("e.gmce");
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.dims(), (4, 2));
    }

    #[test]
    fn header_bytes_are_pinned() {
        let data = Dataset::Channels {
            scenario: Scenario::Spatial,
            dims: (2, 1),
            samples: vec![DVector::from_vec(vec![
                Complex64::new(1.0, 2.0),
                Complex64::new(3.0, -4.0),
            ])],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.gmce");
        write_dataset(&path, &data).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let mut expected = Vec::new();
        expected.extend_from_slice(b"GMCE");
        expected.extend_from_slice(&1u16.to_le_bytes());
        expected.push(0u8);
        expected.extend_from_slice(&2u32.to_le_bytes());
        expected.extend_from_slice(&1u32.to_le_bytes());
        expected.extend_from_slice(&0u32.to_le_bytes());
        expected.extend_from_slice(&1u64.to_le_bytes());
        for v in [1.0f64, 2.0, 3.0, -4.0] {
            expected.extend_from_slice(&v.to_le_bytes());
        }
        assert_eq!(bytes, expected);
    }

    #[test]
    fn corrupt_magic_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.gmce");
        std::fs::write(&path, b"WHAT\x01\x00\x00garbage").unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
    }

    #[test]
    fn truncated_file_is_rejected() {
        let params = SpatialParams::new(4);
        let samples = generate_spatial_samples(&params, 3, 6).unwrap();
        let data = Dataset::from_channel_samples((4, 1), &samples).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.gmce");
        write_dataset(&path, &data).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(read_dataset(&path), Err(Error::Format(_))));
    }
}
