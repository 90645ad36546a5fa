//! Network checkpoint layout (little-endian):
//!
//! | size | field |
//! |---|---|
//! | 8 | magic `SYNTHW1\0` |
//! | 4 × 5 | `in_dim`, `out_dim`, `width`, `depth`, `rff_dim` (u32) |
//! | 4 × rff_dim | frozen Fourier frequencies (f32) |
//! | 4 × param_count | parameters (f32) in [`ResidualMlp`] storage order |

use std::fs;
use std::path::Path;

use super::{NetShape, ResidualMlp};
use crate::bytes::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const NETWORK_MAGIC: &[u8; 8] = b"SYNTHW1\0";

pub(crate) fn write_network(net: &ResidualMlp<f32>, w: &mut ByteWriter) {
    let s = net.shape();
    w.bytes(NETWORK_MAGIC);
    for v in [s.in_dim, s.out_dim, s.width, s.depth, s.rff_dim] {
        w.u32(v as u32);
    }
    w.f32s(net.rff_frequencies());
    w.f32s(net.params());
}

pub(crate) fn read_network(r: &mut ByteReader<'_>) -> Result<ResidualMlp<f32>> {
    r.magic(NETWORK_MAGIC)?;
    let at = r.offset();
    let shape = NetShape {
        in_dim: r.u32("in_dim")? as usize,
        out_dim: r.u32("out_dim")? as usize,
        width: r.u32("width")? as usize,
        depth: r.u32("depth")? as usize,
        rff_dim: r.u32("rff_dim")? as usize,
    };
    let rff = r.f32s(shape.rff_dim, "Fourier frequencies")?;
    let params = r.f32s(shape.param_count(), "parameters")?;
    ResidualMlp::from_parts(shape, rff, params).map_err(|e| Error::format(at, e.to_string()))
}

pub fn encode_network(net: &ResidualMlp<f32>) -> Vec<u8> {
    let mut w = ByteWriter::default();
    write_network(net, &mut w);
    w.buf
}

pub fn decode_network(bytes: &[u8]) -> Result<ResidualMlp<f32>> {
    let mut r = ByteReader::new(bytes);
    let net = read_network(&mut r)?;
    r.finish()?;
    Ok(net)
}

pub fn save_network(net: &ResidualMlp<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_network(net))?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<ResidualMlp<f32>> {
    decode_network(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn roundtrip_and_layout() {
        let shape = NetShape {
            in_dim: 5,
            out_dim: 5,
            width: 16,
            depth: 2,
            rff_dim: 3,
        };
        let net = ResidualMlp::<f32>::new(shape, &mut rng::seeded(8)).unwrap();
        let bytes = encode_network(&net);
        assert_eq!(&bytes[..8], NETWORK_MAGIC);
        assert_eq!(bytes.len(), 8 + 20 + 4 * 3 + 4 * shape.param_count());
        assert_eq!(decode_network(&bytes).unwrap(), net);
        assert!(decode_network(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes;
        bad[6] = b'9';
        assert!(matches!(decode_network(&bad), Err(Error::Format { offset: 0, .. })));
    }
}
