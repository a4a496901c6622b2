//! Model files.
//!
//! ```text
//! "DTAG"                      4 bytes
//! version                     u32 LE
//! arch length, arch string    u32 LE, UTF-8
//! per parameter tensor:       rank u32 LE, extents u32 LE each,
//!                             values as f32 LE, row-major
//! ```
//!
//! Tensors follow [`Network::params`] order (weight then bias per layer).
//! The frame count of image networks is recovered from the first
//! convolution's weight extents.

use std::path::Path;

use super::{parse_arch, InputSpec};
use crate::binio::{put_f32, put_string, put_u32, Reader};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::nn::{BuildOptions, Network};
use crate::tensor::{Real, Tensor};

pub const MAGIC: &[u8; 4] = b"DTAG";
pub const FORMAT_VERSION: u32 = 1;

pub fn write_model(network: &Network) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, FORMAT_VERSION);
    put_string(&mut out, &network.spec().render());
    for tensor in network.params() {
        put_u32(&mut out, tensor.rank() as u32);
        for &e in tensor.shape() {
            put_u32(&mut out, e as u32);
        }
        for &v in tensor.data() {
            put_f32(&mut out, v as f32);
        }
    }
    out
}

pub fn read_model(bytes: &[u8]) -> Result<Network> {
    let mut r = Reader::new(bytes, |offset, reason| Error::ModelFormat { offset, reason });
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::ModelFormat {
            offset: 0,
            reason: "bad magic, not a model file".into(),
        });
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat {
            offset: 4,
            reason: format!("unsupported version {version}, expected {FORMAT_VERSION}"),
        });
    }
    let arch_offset = r.offset();
    let arch = r.string("architecture string")?;

    let mut tensors = Vec::new();
    while r.offset() < bytes.len() {
        let start = r.offset();
        let rank = r.u32("tensor rank")? as usize;
        if rank == 0 || rank > 4 {
            return Err(Error::ModelFormat {
                offset: start as u64,
                reason: format!("tensor rank {rank} out of range"),
            });
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32("tensor extent")? as usize);
        }
        let len = shape.iter().try_fold(1usize, |acc, &e| acc.checked_mul(e));
        let len = len.ok_or_else(|| r.fail("tensor size overflows"))?;
        let values = r.f32s(len, "tensor values")?;
        let tensor = Tensor::new(shape, values.into_iter().map(|v| v as Real).collect())
            .map_err(|e| Error::ModelFormat {
                offset: start as u64,
                reason: e.to_string(),
            })?;
        tensors.push((start, tensor));
    }
    r.finish()?;

    let as_format = |e: Error| Error::ModelFormat {
        offset: arch_offset as u64,
        reason: e.to_string(),
    };
    let mut spec = parse_arch(&arch, 1).map_err(as_format)?;
    if let InputSpec::Image { .. } = spec.input {
        let frames = tensors
            .first()
            .filter(|(_, t)| t.rank() == 4)
            .map(|(_, t)| t.shape()[1])
            .unwrap_or(1);
        spec = parse_arch(&arch, frames).map_err(as_format)?;
    }
    let mut network = Network::zeros(&spec, &BuildOptions::default()).map_err(as_format)?;
    let expected = network.params().len();
    if tensors.len() != expected {
        return Err(Error::ModelFormat {
            offset: bytes.len() as u64,
            reason: format!("{} tensors present, {arch} needs {expected}", tensors.len()),
        });
    }
    for (slot, (offset, tensor)) in network.params_mut().into_iter().zip(tensors) {
        if slot.shape() != tensor.shape() {
            return Err(Error::ModelFormat {
                offset: offset as u64,
                reason: format!(
                    "tensor shape {:?} does not match {:?} required by {arch}",
                    tensor.shape(),
                    slot.shape()
                ),
            });
        }
        *slot = tensor;
    }
    Ok(network)
}

pub fn save_model(network: &Network, path: &Path) -> Result<()> {
    write_atomic(path, &write_model(network))
}

pub fn load_model(path: &Path) -> Result<Network> {
    read_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netspec::parse_arch;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_net(arch: &str, frames: usize) -> Network {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        Network::build(&parse_arch(arch, frames).unwrap(), &BuildOptions { init_std: 0.3, ..Default::default() }, &mut rng)
            .unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        for (arch, frames) in [("D24-FC10-FC10-S3", 1), ("I8-C(3,4)-L3-P2-FC5-4", 3)] {
            let net = random_net(arch, frames);
            let back = read_model(&write_model(&net)).unwrap();
            assert_eq!(back.spec(), net.spec());
            for (a, b) in net.params().iter().zip(back.params()) {
                assert!(a.data().iter().zip(b.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            let x = Tensor::full(&net.input_shape(), 0.25).unwrap();
            let (p, q) = (net.predict(&x).unwrap(), back.predict(&x).unwrap());
            assert!(p.data().iter().zip(q.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn payload_size_matches_parameter_count() {
        let net = random_net("D24-FC10-FC10-S3", 1);
        let bytes = write_model(&net);
        let header = 4 + 4 + 4 + "D24-FC10-FC10-S3".len();
        // rank 2 weights (3 u32) and rank 1 biases (2 u32), three layers.
        let tensor_headers = 3 * (3 + 2) * 4;
        assert_eq!(bytes.len(), header + tensor_headers + 4 * net.spec().parameter_count().unwrap());
    }

    #[test]
    fn corrupt_files_rejected() {
        let bytes = write_model(&random_net("D6-FC4-S2", 1));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_model(&bad), Err(Error::ModelFormat { offset: 0, .. })));

        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(read_model(&bad), Err(Error::ModelFormat { offset: 4, .. })));

        let cut = bytes.len() - 3;
        match read_model(&bytes[..cut]) {
            Err(Error::ModelFormat { offset, reason }) => {
                assert!(reason.contains("truncated"), "{reason}");
                assert!(offset > 0 && (offset as usize) < cut);
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut long = bytes.clone();
        long.extend_from_slice(&[1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0]);
        assert!(read_model(&long).is_err());
    }

    #[test]
    fn shape_mismatch_with_embedded_spec() {
        let net = random_net("D6-FC4-S2", 1);
        let mut bytes = write_model(&net);
        let arch_at = 12;
        bytes[arch_at + 1] = b'7'; // "D6" -> "D7": first weight no longer fits.
        assert!(matches!(read_model(&bytes), Err(Error::ModelFormat { .. })));
    }
}
