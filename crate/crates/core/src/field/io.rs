//! Field dumps: a JSON header next to a CSV matrix with one line per grid
//! row. Vector components are interleaved (`x0,y0,x1,y1,...`). Values are
//! written with 17 significant digits so a dump reads back bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Field, FieldValue, Grid2D, ScalarField, VectorField};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DumpHeader {
    pub nx: usize,
    pub ny: usize,
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub components: usize,
}

/// A dump whose component count is only known after reading.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyField {
    Scalar(ScalarField),
    Vector(VectorField),
}

fn paths(base: &Path) -> (PathBuf, PathBuf) {
    (base.with_extension("json"), base.with_extension("csv"))
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Write `<base>.json` and `<base>.csv`.
pub fn write_dump<T: FieldValue>(field: &Field<T>, base: &Path) -> Result<()> {
    let g = field.grid();
    let header = DumpHeader {
        nx: g.nx(),
        ny: g.ny(),
        x0: g.x0(),
        y0: g.y0(),
        h: g.h(),
        components: T::COMPONENTS,
    };
    let (json_path, csv_path) = paths(base);
    fs::write(&json_path, serde_json::to_string_pretty(&header)? + "\n")?;

    let mut out = String::with_capacity(g.len() * T::COMPONENTS * 24);
    for j in 0..g.ny() {
        for i in 0..g.nx() {
            let v = field.get(i, j);
            for c in 0..T::COMPONENTS {
                if i > 0 || c > 0 {
                    out.push(',');
                }
                write!(out, "{:.16e}", v.component(c)).expect("write to string");
            }
        }
        out.push('\n');
    }
    fs::write(&csv_path, out)?;
    Ok(())
}

fn read_parts(base: &Path) -> Result<(DumpHeader, Grid2D, Vec<f64>)> {
    let (json_path, csv_path) = paths(base);
    let header: DumpHeader = serde_json::from_str(&fs::read_to_string(&json_path)?)
        .map_err(|e| format_err(&json_path, e.to_string()))?;
    if header.components != 1 && header.components != 2 {
        return Err(format_err(
            &json_path,
            format!("components must be 1 or 2, got {}", header.components),
        ));
    }
    let grid = Grid2D::new(header.x0, header.y0, header.h, header.nx, header.ny)
        .map_err(|e| format_err(&json_path, e.to_string()))?;
    let text = fs::read_to_string(&csv_path)?;
    let row_len = header.nx * header.components;
    let mut raw = Vec::with_capacity(grid.len() * header.components);
    let mut rows = 0;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let before = raw.len();
        for cell in line.split(',') {
            let v: f64 = cell.trim().parse().map_err(|_| {
                format_err(&csv_path, format!("line {}: cannot parse {cell:?}", line_no + 1))
            })?;
            raw.push(v);
        }
        if raw.len() - before != row_len {
            return Err(format_err(
                &csv_path,
                format!(
                    "line {}: expected {row_len} values, found {}",
                    line_no + 1,
                    raw.len() - before
                ),
            ));
        }
        rows += 1;
    }
    if rows != header.ny {
        return Err(format_err(
            &csv_path,
            format!("expected {} rows, found {rows}", header.ny),
        ));
    }
    Ok((header, grid, raw))
}

/// Read a dump with a known value type.
pub fn read_dump<T: FieldValue>(base: &Path) -> Result<Field<T>> {
    let (header, grid, raw) = read_parts(base)?;
    if header.components != T::COMPONENTS {
        return Err(format_err(
            &paths(base).0,
            format!(
                "expected {} component(s), header declares {}",
                T::COMPONENTS,
                header.components
            ),
        ));
    }
    let values = raw.chunks_exact(T::COMPONENTS).map(T::from_components).collect();
    Field::new(grid, values)
}

pub fn read_dump_any(base: &Path) -> Result<AnyField> {
    let (header, grid, raw) = read_parts(base)?;
    if header.components == 1 {
        Ok(AnyField::Scalar(Field::new(grid, raw)?))
    } else {
        let values = raw.chunks_exact(2).map(FieldValue::from_components).collect();
        Ok(AnyField::Vector(Field::new(grid, values)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orlicz::Vec2;

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::new(-0.3, 1.7, 0.013, 7, 5).unwrap();
        let f = g.sample(|p| (p.x * 17.0).sin() / 3.0 + 1e-300 * p.y - 0.0);
        let base = dir.path().join("u");
        write_dump(&f, &base).unwrap();
        let back: ScalarField = read_dump(&base).unwrap();
        assert_eq!(back.grid(), f.grid());
        for (a, b) in f.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn vector_round_trip_and_layout() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::new(0.0, 0.0, 0.5, 3, 2).unwrap();
        let f = g.sample(|p| Vec2::new(p.x, -p.y / 7.0));
        let base = dir.path().join("grad");
        write_dump(&f, &base).unwrap();
        let csv = fs::read_to_string(base.with_extension("csv")).unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0].split(',').count(), 6);
        match read_dump_any(&base).unwrap() {
            AnyField::Vector(v) => assert_eq!(v, f),
            AnyField::Scalar(_) => panic!("wrong kind"),
        }
        assert!(read_dump::<f64>(&base).is_err());
    }

    #[test]
    fn truncated_csv_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let g = Grid2D::new(0.0, 0.0, 0.5, 3, 3).unwrap();
        let base = dir.path().join("u");
        write_dump(&g.sample(|p| p.x), &base).unwrap();
        let csv_path = base.with_extension("csv");
        let csv = fs::read_to_string(&csv_path).unwrap();
        let cut: Vec<_> = csv.lines().take(2).collect();
        fs::write(&csv_path, cut.join("\n")).unwrap();
        assert!(matches!(read_dump::<f64>(&base), Err(Error::Format { .. })));
    }
}
