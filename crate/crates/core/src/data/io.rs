//! Dataset files.
//!
//! Binary layout (little-endian):
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 8 | magic `SYNTHR1\0` |
//! | 8 | 4 | `state_dim` (u32) |
//! | 12 | 4 | `action_dim` (u32) |
//! | 16 | 1 | `has_terminal` (u8, 0 or 1) |
//! | 17 | 8 | row count (u64) |
//! | 25 | 4 × count × row_dim | rows, row-major f32 |

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{TransitionDataset, TransitionSchema};
use crate::bytes::{ByteReader, ByteWriter};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 8] = b"SYNTHR1\0";
pub const DATASET_HEADER_LEN: usize = 25;

pub fn encode_dataset(dataset: &TransitionDataset) -> Vec<u8> {
    let s = dataset.schema();
    let mut w = ByteWriter::default();
    w.buf.reserve(DATASET_HEADER_LEN + 4 * dataset.as_slice().len());
    w.bytes(DATASET_MAGIC);
    w.u32(s.state_dim() as u32);
    w.u32(s.action_dim() as u32);
    w.u8(u8::from(s.has_terminal()));
    w.u64(dataset.count() as u64);
    w.f32s(dataset.as_slice());
    w.buf
}

pub fn decode_dataset(bytes: &[u8]) -> Result<TransitionDataset> {
    let mut r = ByteReader::new(bytes);
    r.magic(DATASET_MAGIC)?;
    let state_dim = r.u32("state_dim")? as usize;
    let action_dim = r.u32("action_dim")? as usize;
    let flag_at = r.offset();
    let has_terminal = match r.u8("has_terminal")? {
        0 => false,
        1 => true,
        v => return Err(Error::format(flag_at, format!("has_terminal flag {v} is not 0 or 1"))),
    };
    let schema = TransitionSchema::new(state_dim, action_dim, has_terminal)
        .map_err(|e| Error::format(8, e.to_string()))?;
    let count = r.u64("row count")? as usize;
    let payload_at = r.offset();
    let values = count
        .checked_mul(schema.row_dim())
        .ok_or_else(|| Error::format(17, "row count overflows"))?;
    let rows = r.f32s(values, "row payload")?;
    r.finish()?;
    TransitionDataset::new(schema, rows).map_err(|e| Error::format(payload_at, e.to_string()))
}

pub fn save_dataset(dataset: &TransitionDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_dataset(dataset))?;
    f.flush()?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<TransitionDataset> {
    decode_dataset(&fs::read(path)?)
}

/// Writes a CSV with header `s0..,a0..,r,ns0..,d` and shortest round-trip decimals.
pub fn export_csv(dataset: &TransitionDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(dataset.schema().column_names())?;
    let mut record = Vec::with_capacity(dataset.row_dim());
    for row in dataset.rows() {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_csv(path: impl AsRef<Path>) -> Result<TransitionDataset> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let schema = TransitionSchema::from_column_names(&header)?;
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let record = record?;
        if record.len() != schema.row_dim() {
            return Err(Error::invalid(format!(
                "CSV row {} has {} fields, expected {}",
                i + 1,
                record.len(),
                schema.row_dim()
            )));
        }
        for field in record.iter() {
            let v: f32 = field.trim().parse().map_err(|_| {
                Error::invalid(format!("CSV row {}: cannot parse {field:?} as a number", i + 1))
            })?;
            rows.push(v);
        }
    }
    TransitionDataset::new(schema, rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(count: usize, seed: u64) -> TransitionDataset {
        use rand::Rng;
        let s = TransitionSchema::new(3, 2, true).unwrap();
        let mut rng = crate::rng::seeded(seed);
        let mut rows = Vec::new();
        for _ in 0..count {
            for j in 0..s.row_dim() {
                rows.push(if Some(j) == s.terminal_index() {
                    f32::from(u8::from(rng.random_bool(0.1)))
                } else {
                    rng.random_range(-1e3f32..1e3)
                });
            }
        }
        TransitionDataset::new(s, rows).unwrap()
    }

    #[test]
    fn header_fields() {
        let d = sample(17, 0);
        let bytes = encode_dataset(&d);
        assert_eq!(&bytes[..8], DATASET_MAGIC);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(bytes[16], 1);
        assert_eq!(u64::from_le_bytes(bytes[17..25].try_into().unwrap()), 17);
        assert_eq!(bytes.len(), DATASET_HEADER_LEN + 17 * 10 * 4);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let d = sample(200, 4);
        let bin = dir.path().join("d.bin");
        save_dataset(&d, &bin).unwrap();
        let back = load_dataset(&bin).unwrap();
        assert_eq!(back.schema(), d.schema());
        let a: Vec<u32> = d.as_slice().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(a, b);

        let csv = dir.path().join("d.csv");
        export_csv(&d, &csv).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        assert!(text.starts_with("s0,s1,s2,a0,a1,r,ns0,ns1,ns2,d\n"));
        assert_eq!(import_csv(&csv).unwrap(), d);
    }

    #[test]
    fn format_errors_carry_offsets() {
        let bytes = encode_dataset(&sample(3, 1));

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_dataset(&bad), Err(Error::Format { offset: 0, .. })));

        let mut bad = bytes.clone();
        bad[6] = b'2';
        let err = decode_dataset(&bad).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");

        let err = decode_dataset(&bytes[..bytes.len() - 3]).unwrap_err();
        assert!(matches!(err, Error::Format { offset: 25, .. }), "{err}");

        assert!(matches!(decode_dataset(&bytes[..20]), Err(Error::Format { offset: 17, .. })));

        let mut bad = bytes.clone();
        bad[8..12].copy_from_slice(&0u32.to_le_bytes());
        assert!(matches!(decode_dataset(&bad), Err(Error::Format { offset: 8, .. })));

        let mut bad = bytes;
        bad.push(0);
        assert!(matches!(decode_dataset(&bad), Err(Error::Format { .. })));
    }

    proptest! {
        #[test]
        fn binary_roundtrip_bit_exact(count in 0usize..40, seed: u64) {
            let d = sample(count, seed);
            let back = decode_dataset(&encode_dataset(&d)).unwrap();
            prop_assert_eq!(encode_dataset(&back), encode_dataset(&d));
        }
    }
}
