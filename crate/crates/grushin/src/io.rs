//! Serialization: numeric CSV for grid and dual data, a JSON-header plus
//! raw binary pair for large arrays, and verification reports.
//!
//! CSV schemas (headers written and checked verbatim):
//!
//! * grid: `x_prime_0,..,x_doubleprime_0,..,re,im` - one row per node,
//!   row-major over the x'-axes then the x''-axes. Readers demand full
//!   lattice coverage in order, with coordinates matching the config.
//! * dual: `k_0,..,xi_0,..,re,im` - one row per coefficient, sparse
//!   (absent entries read as zero). Rows with every k-column equal to -1
//!   carry the flagged zero-frequency slice; their leading xi-columns hold
//!   x'-node coordinates instead, which needs d' <= d''.
//!
//! The binary pair is a self-describing JSON header next to a flat file of
//! interleaved re,im little-endian f64 in logical (row-major) order, dual
//! zero slice appended after the main block. Floats in CSV use shortest
//! round-trip formatting, so write-read cycles are bit-exact.

use crate::config::GrushinConfig;
use crate::error::{GrushinError, Result};
use crate::grid::{DualCoefficients, GridFunction};
use crate::verify::VerificationReport;
use ndarray::{ArrayD, Dimension, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

fn ser_err(e: impl std::fmt::Display) -> GrushinError {
    GrushinError::Serialization(e.to_string())
}

fn parse_f64(field: &str, what: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| GrushinError::Serialization(format!("bad {what} field {field:?}")))
}

/// Coordinates written in CSV must land back on the grid node they came
/// from; shortest round-trip output makes this exact, the slack only
/// forgives hand-edited files.
fn coord_matches(written: f64, node: f64) -> bool {
    (written - node).abs() <= 1e-9 * node.abs().max(1.0)
}

fn grid_header(config: &GrushinConfig) -> Vec<String> {
    let mut h: Vec<String> = (0..config.d_prime).map(|a| format!("x_prime_{a}")).collect();
    h.extend((0..config.d_doubleprime).map(|a| format!("x_doubleprime_{a}")));
    h.push("re".into());
    h.push("im".into());
    h
}

fn dual_header(config: &GrushinConfig) -> Vec<String> {
    let mut h: Vec<String> = (0..config.d_prime).map(|a| format!("k_{a}")).collect();
    h.extend((0..config.d_doubleprime).map(|a| format!("xi_{a}")));
    h.push("re".into());
    h.push("im".into());
    h
}

fn check_header(got: &csv::StringRecord, want: &[String], kind: &str) -> Result<()> {
    if got.len() != want.len() || got.iter().zip(want).any(|(g, w)| g != w) {
        return Err(GrushinError::Serialization(format!(
            "{kind} CSV header {:?} does not match the config (want {:?})",
            got.iter().collect::<Vec<_>>(),
            want
        )));
    }
    Ok(())
}

pub fn write_grid_csv<W: Write>(f: &GridFunction, out: W) -> Result<()> {
    let config = f.config();
    let axis_p = config.x_prime_axis();
    let axis_pp = config.x_doubleprime_axis();
    let dp = config.d_prime;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(grid_header(config)).map_err(ser_err)?;
    for (idx, v) in f.values().indexed_iter() {
        let mut row: Vec<String> = Vec::with_capacity(idx.ndim() + 2);
        for a in 0..dp {
            row.push(format!("{}", axis_p[idx[a]]));
        }
        for a in dp..idx.ndim() {
            row.push(format!("{}", axis_pp[idx[a]]));
        }
        row.push(format!("{}", v.re));
        row.push(format!("{}", v.im));
        w.write_record(&row).map_err(ser_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_grid_csv<R: Read>(config: Arc<GrushinConfig>, input: R) -> Result<GridFunction> {
    let axis_p = config.x_prime_axis();
    let axis_pp = config.x_doubleprime_axis();
    let dp = config.d_prime;
    let shape = config.shape();
    let total: usize = shape.iter().product();
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers().map_err(ser_err)?, &grid_header(&config), "grid")?;
    let mut flat = Vec::with_capacity(total);
    let mut cursor = vec![0usize; shape.len()];
    for record in r.records() {
        let record = record.map_err(ser_err)?;
        if flat.len() == total {
            return Err(GrushinError::Serialization(
                "grid CSV has more rows than lattice nodes".into(),
            ));
        }
        if record.len() != shape.len() + 2 {
            return Err(GrushinError::Serialization(format!(
                "grid CSV row with {} fields, want {}",
                record.len(),
                shape.len() + 2
            )));
        }
        for (a, &i) in cursor.iter().enumerate() {
            let node = if a < dp { axis_p[i] } else { axis_pp[i] };
            let written = parse_f64(&record[a], "coordinate")?;
            if !coord_matches(written, node) {
                return Err(GrushinError::Serialization(format!(
                    "grid CSV row {} axis {a}: coordinate {written} is not node {node}",
                    flat.len()
                )));
            }
        }
        let re = parse_f64(&record[shape.len()], "re")?;
        let im = parse_f64(&record[shape.len() + 1], "im")?;
        flat.push(Complex64::new(re, im));
        for a in (0..shape.len()).rev() {
            cursor[a] += 1;
            if cursor[a] < shape[a] {
                break;
            }
            cursor[a] = 0;
        }
    }
    if flat.len() != total {
        return Err(GrushinError::Serialization(format!(
            "grid CSV has {} rows, lattice needs {total}",
            flat.len()
        )));
    }
    let values = ArrayD::from_shape_vec(IxDyn(&shape), flat)
        .map_err(|e| GrushinError::Serialization(e.to_string()))?;
    GridFunction::from_values(config, values)
}

pub fn write_dual_csv<W: Write>(dual: &DualCoefficients, out: W) -> Result<()> {
    let config = dual.config();
    let indices = config.multi_indices();
    let xi_axis = config.xi_axis();
    let dp = config.d_prime;
    let dpp = config.d_doubleprime;
    if dual.zero_slice_active() && dp > dpp {
        return Err(GrushinError::InvalidArgument(
            "zero-frequency slice rows need d' <= d'' in the CSV schema; \
             use the binary format"
                .into(),
        ));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(dual_header(config)).map_err(ser_err)?;
    for (idx, v) in dual.values().indexed_iter() {
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let mut row: Vec<String> = Vec::with_capacity(dp + dpp + 2);
        for &k in indices[idx[0]].entries() {
            row.push(format!("{k}"));
        }
        for a in 0..dpp {
            row.push(format!("{}", xi_axis[idx[1 + a]]));
        }
        row.push(format!("{}", v.re));
        row.push(format!("{}", v.im));
        w.write_record(&row).map_err(ser_err)?;
    }
    let axis_p = config.x_prime_axis();
    for (idx, v) in dual.zero_slice().indexed_iter() {
        if v.re == 0.0 && v.im == 0.0 {
            continue;
        }
        let mut row: Vec<String> = Vec::with_capacity(dp + dpp + 2);
        row.extend(std::iter::repeat("-1".to_string()).take(dp));
        for a in 0..dp {
            row.push(format!("{}", axis_p[idx[a]]));
        }
        row.extend(std::iter::repeat("0".to_string()).take(dpp - dp));
        row.push(format!("{}", v.re));
        row.push(format!("{}", v.im));
        w.write_record(&row).map_err(ser_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Locates a written coordinate on a uniform ascending axis.
fn axis_position(axis: &[f64], written: f64, what: &str) -> Result<usize> {
    let step = axis[1] - axis[0];
    let guess = ((written - axis[0]) / step).round();
    let i = guess.max(0.0).min(axis.len() as f64 - 1.0) as usize;
    if coord_matches(written, axis[i]) {
        Ok(i)
    } else {
        Err(GrushinError::Serialization(format!(
            "{what} coordinate {written} is not on the config grid"
        )))
    }
}

pub fn read_dual_csv<R: Read>(config: Arc<GrushinConfig>, input: R) -> Result<DualCoefficients> {
    let indices = config.multi_indices();
    let by_entries: HashMap<&[u32], usize> = indices
        .iter()
        .enumerate()
        .map(|(i, k)| (k.entries(), i))
        .collect();
    let xi_axis = config.xi_axis();
    let axis_p = config.x_prime_axis();
    let dp = config.d_prime;
    let dpp = config.d_doubleprime;
    let mut dual = DualCoefficients::zeros(config.clone());
    let mut r = csv::Reader::from_reader(input);
    check_header(r.headers().map_err(ser_err)?, &dual_header(&config), "dual")?;
    for record in r.records() {
        let record = record.map_err(ser_err)?;
        if record.len() != dp + dpp + 2 {
            return Err(GrushinError::Serialization(format!(
                "dual CSV row with {} fields, want {}",
                record.len(),
                dp + dpp + 2
            )));
        }
        let ks: Vec<i64> = record
            .iter()
            .take(dp)
            .map(|f| {
                f.trim()
                    .parse::<i64>()
                    .map_err(|_| GrushinError::Serialization(format!("bad k field {f:?}")))
            })
            .collect::<Result<_>>()?;
        let re = parse_f64(&record[dp + dpp], "re")?;
        let im = parse_f64(&record[dp + dpp + 1], "im")?;
        if ks.iter().all(|&k| k == -1) {
            if dp > dpp {
                return Err(GrushinError::Serialization(
                    "zero-slice CSV rows need d' <= d''".into(),
                ));
            }
            let mut idx = Vec::with_capacity(dp);
            for a in 0..dp {
                idx.push(axis_position(
                    &axis_p,
                    parse_f64(&record[dp + a], "zero-slice")?,
                    "zero-slice x'",
                )?);
            }
            dual.zero_slice_mut()[IxDyn(&idx)] = Complex64::new(re, im);
            continue;
        }
        let entries: Vec<u32> = ks
            .iter()
            .map(|&k| {
                u32::try_from(k).map_err(|_| {
                    GrushinError::Serialization(format!("negative degree {k} outside a -1 row"))
                })
            })
            .collect::<Result<_>>()?;
        let &ki = by_entries.get(entries.as_slice()).ok_or_else(|| {
            GrushinError::Serialization(format!(
                "degree {entries:?} exceeds the config cutoff"
            ))
        })?;
        let mut idx = vec![ki];
        for a in 0..dpp {
            idx.push(axis_position(
                &xi_axis,
                parse_f64(&record[dp + a], "xi")?,
                "frequency",
            )?);
        }
        dual.values_mut()[IxDyn(&idx)] = Complex64::new(re, im);
    }
    Ok(dual)
}

// Binary pair ---------------------------------------------------------------

const BINARY_FORMAT: &str = "grushin-array-binary";
const BINARY_VERSION: u32 = 1;
const BINARY_DTYPE: &str = "complex128-interleaved-little-endian";

#[derive(Serialize, Deserialize)]
struct BinaryHeader {
    format: String,
    version: u32,
    /// "grid" or "dual".
    kind: String,
    config: GrushinConfig,
    /// Shapes of the blocks in file order; dual data stores the
    /// coefficient array then the zero-frequency slice.
    shapes: Vec<Vec<usize>>,
    dtype: String,
    /// Data file name, relative to the header's directory.
    data_file: String,
}

impl BinaryHeader {
    fn check(&self, kind: &str) -> Result<()> {
        if self.format != BINARY_FORMAT || self.version != BINARY_VERSION {
            return Err(GrushinError::Serialization(format!(
                "unsupported binary format {}/{}",
                self.format, self.version
            )));
        }
        if self.dtype != BINARY_DTYPE {
            return Err(GrushinError::Serialization(format!(
                "unsupported dtype {}",
                self.dtype
            )));
        }
        if self.kind != kind {
            return Err(GrushinError::Serialization(format!(
                "binary header holds {} data, expected {kind}",
                self.kind
            )));
        }
        self.config.validate()
    }
}

fn data_path(header_path: &Path, data_file: &str) -> PathBuf {
    header_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(data_file)
}

fn write_blocks(header_path: &Path, header: &BinaryHeader, blocks: &[&ArrayD<Complex64>]) -> Result<()> {
    let json = serde_json::to_string_pretty(header).map_err(ser_err)?;
    std::fs::write(header_path, json)?;
    let mut buf = Vec::new();
    for block in blocks {
        for v in block.iter() {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    std::fs::write(data_path(header_path, &header.data_file), buf)?;
    Ok(())
}

fn read_blocks(header_path: &Path, header: &BinaryHeader) -> Result<Vec<ArrayD<Complex64>>> {
    let raw = std::fs::read(data_path(header_path, &header.data_file))?;
    let total: usize = header.shapes.iter().map(|s| s.iter().product::<usize>()).sum();
    if raw.len() != 16 * total {
        return Err(GrushinError::Serialization(format!(
            "binary data holds {} bytes, header shapes need {}",
            raw.len(),
            16 * total
        )));
    }
    let mut values = raw.chunks_exact(16).map(|c| {
        Complex64::new(
            f64::from_le_bytes(c[0..8].try_into().unwrap()),
            f64::from_le_bytes(c[8..16].try_into().unwrap()),
        )
    });
    let mut blocks = Vec::with_capacity(header.shapes.len());
    for shape in &header.shapes {
        let n: usize = shape.iter().product();
        let flat: Vec<Complex64> = values.by_ref().take(n).collect();
        blocks.push(
            ArrayD::from_shape_vec(IxDyn(shape), flat)
                .map_err(|e| GrushinError::Serialization(e.to_string()))?,
        );
    }
    Ok(blocks)
}

fn binary_data_name(header_path: &Path) -> String {
    let stem = header_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    format!("{stem}.bin")
}

/// Writes `<header_path>` (JSON) plus a sibling `<stem>.bin` data file.
pub fn write_grid_binary(f: &GridFunction, header_path: &Path) -> Result<()> {
    let header = BinaryHeader {
        format: BINARY_FORMAT.into(),
        version: BINARY_VERSION,
        kind: "grid".into(),
        config: (**f.config()).clone(),
        shapes: vec![f.values().shape().to_vec()],
        dtype: BINARY_DTYPE.into(),
        data_file: binary_data_name(header_path),
    };
    write_blocks(header_path, &header, &[f.values()])
}

/// Self-describing read: the geometry comes from the header itself.
pub fn read_grid_binary(header_path: &Path) -> Result<GridFunction> {
    let header: BinaryHeader =
        serde_json::from_str(&std::fs::read_to_string(header_path)?).map_err(ser_err)?;
    header.check("grid")?;
    let mut blocks = read_blocks(header_path, &header)?;
    if blocks.len() != 1 {
        return Err(GrushinError::Serialization(
            "grid binary data must hold exactly one block".into(),
        ));
    }
    GridFunction::from_values(Arc::new(header.config), blocks.remove(0))
}

pub fn write_dual_binary(dual: &DualCoefficients, header_path: &Path) -> Result<()> {
    let header = BinaryHeader {
        format: BINARY_FORMAT.into(),
        version: BINARY_VERSION,
        kind: "dual".into(),
        config: (**dual.config()).clone(),
        shapes: vec![
            dual.values().shape().to_vec(),
            dual.zero_slice().shape().to_vec(),
        ],
        dtype: BINARY_DTYPE.into(),
        data_file: binary_data_name(header_path),
    };
    write_blocks(header_path, &header, &[dual.values(), dual.zero_slice()])
}

pub fn read_dual_binary(header_path: &Path) -> Result<DualCoefficients> {
    let header: BinaryHeader =
        serde_json::from_str(&std::fs::read_to_string(header_path)?).map_err(ser_err)?;
    header.check("dual")?;
    let mut blocks = read_blocks(header_path, &header)?;
    if blocks.len() != 2 {
        return Err(GrushinError::Serialization(
            "dual binary data must hold two blocks (values, zero slice)".into(),
        ));
    }
    let zero = blocks.pop().unwrap();
    let values = blocks.pop().unwrap();
    DualCoefficients::from_parts(Arc::new(header.config), values, zero)
}

// Reports -------------------------------------------------------------------

pub fn write_report_json<W: Write>(report: &VerificationReport, mut out: W) -> Result<()> {
    let json = serde_json::to_string_pretty(report).map_err(ser_err)?;
    out.write_all(json.as_bytes())?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn read_report_json<R: Read>(input: R) -> Result<VerificationReport> {
    serde_json::from_reader(input).map_err(ser_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::AxisGrid;
    use crate::testfn::schwartz_draw;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> Arc<GrushinConfig> {
        Arc::new(
            GrushinConfig::new(
                1,
                1,
                6,
                AxisGrid {
                    half_width: 5.0,
                    points: 12,
                },
                AxisGrid {
                    half_width: 4.0,
                    points: 16,
                },
            )
            .unwrap(),
        )
    }

    #[test]
    fn grid_csv_round_trip_is_bit_exact() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = schwartz_draw(cfg.clone(), &mut rng).unwrap();
        let mut buf = Vec::new();
        write_grid_csv(&f, &mut buf).unwrap();
        let back = read_grid_csv(cfg, buf.as_slice()).unwrap();
        assert_eq!(f.values(), back.values());
    }

    #[test]
    fn grid_csv_rejects_truncated_and_misheaded_input() {
        let cfg = small_config();
        let f = GridFunction::zeros(cfg.clone());
        let mut buf = Vec::new();
        write_grid_csv(&f, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let truncated: String = text.lines().take(20).collect::<Vec<_>>().join("\n");
        assert!(read_grid_csv(cfg.clone(), truncated.as_bytes()).is_err());
        let misheaded = text.replacen("x_prime_0", "x", 1);
        assert!(read_grid_csv(cfg, misheaded.as_bytes()).is_err());
    }

    #[test]
    fn dual_csv_round_trip_with_zero_slice() {
        let cfg = small_config();
        let mut dual = DualCoefficients::zeros(cfg.clone());
        dual.values_mut()[[2, 11]] = Complex64::new(0.75, -0.25);
        dual.values_mut()[[5, 3]] = Complex64::new(-1.5, 1e-12);
        dual.zero_slice_mut()[[7]] = Complex64::new(0.125, 2.0);
        let mut buf = Vec::new();
        write_dual_csv(&dual, &mut buf).unwrap();
        let back = read_dual_csv(cfg, buf.as_slice()).unwrap();
        assert_eq!(dual.values(), back.values());
        assert_eq!(dual.zero_slice(), back.zero_slice());
    }

    #[test]
    fn dual_csv_zero_slice_needs_narrow_first_factor() {
        let cfg = Arc::new(
            GrushinConfig::new(
                2,
                1,
                4,
                AxisGrid {
                    half_width: 5.0,
                    points: 8,
                },
                AxisGrid {
                    half_width: 4.0,
                    points: 8,
                },
            )
            .unwrap(),
        );
        let mut dual = DualCoefficients::zeros(cfg);
        dual.zero_slice_mut()[[1, 2]] = Complex64::new(1.0, 0.0);
        assert!(write_dual_csv(&dual, Vec::new()).is_err());
    }

    #[test]
    fn binary_round_trips_are_bit_exact() {
        let cfg = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = schwartz_draw(cfg.clone(), &mut rng).unwrap();
        let dir = std::env::temp_dir().join("grushin-io-test");
        std::fs::create_dir_all(&dir).unwrap();
        let gpath = dir.join("grid.json");
        write_grid_binary(&f, &gpath).unwrap();
        let back = read_grid_binary(&gpath).unwrap();
        assert_eq!(f.values(), back.values());
        assert_eq!(**back.config(), *cfg);

        let mut dual = DualCoefficients::zeros(cfg);
        dual.values_mut()[[1, 4]] = Complex64::new(std::f64::consts::PI, -1.0);
        dual.zero_slice_mut()[[3]] = Complex64::new(0.0, 1e-300);
        let dpath = dir.join("dual.json");
        write_dual_binary(&dual, &dpath).unwrap();
        let dback = read_dual_binary(&dpath).unwrap();
        assert_eq!(dual.values(), dback.values());
        assert_eq!(dual.zero_slice(), dback.zero_slice());
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn report_json_round_trips() {
        let report = VerificationReport {
            config: (*small_config()).clone(),
            seed: 42,
            generator: "chacha8".into(),
            tolerance_scale: 1.0,
            passed: 1,
            failed: 0,
            outcomes: vec![crate::verify::CheckOutcome {
                name: "example".into(),
                group: "special".into(),
                measured: 1e-14,
                tolerance: 1e-10,
                passed: true,
                detail: "one case".into(),
                millis: 3,
            }],
        };
        let mut buf = Vec::new();
        write_report_json(&report, &mut buf).unwrap();
        let back = read_report_json(buf.as_slice()).unwrap();
        assert_eq!(back.outcomes.len(), 1);
        assert_eq!(back.outcomes[0].name, "example");
        // timing is informational only and stays out of the serialized form
        assert_eq!(back.outcomes[0].millis, 0);
    }
}
