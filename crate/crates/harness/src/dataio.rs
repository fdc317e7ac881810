//! Dataset file formats: CSV vectors and the `MDIM` raw-raster container.
//!
//! CSV: one sample per line, features then an integer label, comma-separated.
//! MDIM, little-endian: magic `MDIM`, u32 count, u32 c, u32 h, u32 w, u32 k,
//! then `count*c*h*w` f32 pixels and `count` u16 labels.

use std::fs;
use std::path::Path;

use mia_core::data::Dataset;
use mia_core::Tensor;

use crate::{HarnessError, Result};

const MAGIC: &[u8; 4] = b"MDIM";

fn format_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Format(msg.into())
}

/// Parse a CSV dataset. The class count is the largest label plus one, with a
/// floor of two.
pub fn parse_csv(text: &str) -> Result<Dataset> {
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut dim: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(format_err(format!(
                "line {}: need at least one feature and a label",
                lineno + 1
            )));
        }
        let (feat, label) = fields.split_at(fields.len() - 1);
        let features: Vec<f64> = feat
            .iter()
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>().map_err(|_| {
                    format_err(format!("line {}, field {}: bad number {f:?}", lineno + 1, col + 1))
                })
            })
            .collect::<Result<_>>()?;
        let label: usize = label[0].parse().map_err(|_| {
            format_err(format!("line {}: bad label {:?}", lineno + 1, label[0]))
        })?;
        match dim {
            None => dim = Some(features.len()),
            Some(d) if d != features.len() => {
                return Err(format_err(format!(
                    "line {}: expected {} features, got {}",
                    lineno + 1,
                    d,
                    features.len()
                )));
            }
            _ => {}
        }
        samples.push(Tensor::from_vec(features));
        labels.push(label);
    }
    if samples.is_empty() {
        return Err(format_err("CSV contains no samples"));
    }
    let k = labels.iter().copied().max().unwrap_or(0) + 1;
    Ok(Dataset::new(samples, labels, k.max(2))?)
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn save_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut out = String::new();
    for i in 0..data.len() {
        let fields: Vec<String> =
            data.sample(i).data().iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push(',');
        out.push_str(&data.label(i).to_string());
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Serialize a raster dataset into MDIM bytes.
pub fn raster_bytes(data: &Dataset) -> Result<Vec<u8>> {
    if !data.is_raster() {
        return Err(format_err("MDIM requires rank-3 raster samples"));
    }
    let shape = data.sample_shape();
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [data.len() as u32, c as u32, h as u32, w as u32, data.num_classes() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for i in 0..data.len() {
        for &px in data.sample(i).data() {
            out.extend_from_slice(&(px as f32).to_le_bytes());
        }
    }
    for i in 0..data.len() {
        let label = data.label(i);
        if label > u16::MAX as usize {
            return Err(format_err(format!("label {label} exceeds u16 range")));
        }
        out.extend_from_slice(&(label as u16).to_le_bytes());
    }
    Ok(out)
}

/// Parse MDIM bytes, validating the payload length against the header.
pub fn parse_raster(bytes: &[u8]) -> Result<Dataset> {
    if bytes.len() < 24 || &bytes[0..4] != MAGIC {
        return Err(format_err("bad magic: not an MDIM raster file"));
    }
    let u32_at = |i: usize| -> u32 {
        u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"))
    };
    let count = u32_at(4) as usize;
    let (c, h, w) = (u32_at(8) as usize, u32_at(12) as usize, u32_at(16) as usize);
    let k = u32_at(20) as usize;
    let pixel_bytes = count * c * h * w * 4;
    let expected = 24 + pixel_bytes + count * 2;
    if bytes.len() != expected {
        return Err(format_err(format!(
            "payload length mismatch: header implies {expected} bytes, file has {}",
            bytes.len()
        )));
    }
    let mut samples = Vec::with_capacity(count);
    let mut offset = 24;
    for _ in 0..count {
        let n = c * h * w;
        let data: Vec<f64> = bytes[offset..offset + n * 4]
            .chunks_exact(4)
            .map(|ch| f32::from_le_bytes(ch.try_into().expect("4 bytes")) as f64)
            .collect();
        samples.push(
            Tensor::new(vec![c, h, w], data).map_err(HarnessError::Core)?,
        );
        offset += n * 4;
    }
    let labels: Vec<usize> = bytes[offset..]
        .chunks_exact(2)
        .map(|ch| u16::from_le_bytes(ch.try_into().expect("2 bytes")) as usize)
        .collect();
    Ok(Dataset::new(samples, labels, k)?)
}

pub fn load_raster(path: &Path) -> Result<Dataset> {
    parse_raster(&fs::read(path)?)
}

pub fn save_raster(path: &Path, data: &Dataset) -> Result<()> {
    fs::write(path, raster_bytes(data)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use mia_core::data::synth_gaussian_raster;

    #[test]
    fn csv_single_row() {
        let d = parse_csv("0.1,0.2,1\n").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.sample_shape(), &[2]);
        assert_eq!(d.label(0), 1);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let err = parse_csv("0.1,0.2,0\nnot-a-number,0.4,1\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn raster_header_and_count() {
        let d = synth_gaussian_raster(2, 1, 8, 8, 2, 1.0, 3).unwrap();
        let bytes = raster_bytes(&d).unwrap();
        let back = parse_raster(&bytes).unwrap();
        assert_eq!(back.len(), 4);
        assert_eq!(back.sample_shape(), &[1, 8, 8]);
    }

    #[test]
    fn raster_round_trip_is_byte_exact() {
        let d = synth_gaussian_raster(3, 2, 4, 4, 3, 1.5, 9).unwrap();
        let bytes = raster_bytes(&d).unwrap();
        let reloaded = parse_raster(&bytes).unwrap();
        assert_eq!(raster_bytes(&reloaded).unwrap(), bytes);
    }

    #[test]
    fn truncated_raster_names_byte_counts() {
        let d = synth_gaussian_raster(2, 1, 4, 4, 2, 1.0, 4).unwrap();
        let bytes = raster_bytes(&d).unwrap();
        let err = parse_raster(&bytes[..bytes.len() - 5]).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(&format!("{}", bytes.len())), "{msg}");
        assert!(msg.contains(&format!("{}", bytes.len() - 5)), "{msg}");
    }
}
