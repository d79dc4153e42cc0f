//! On-disk formats for fields, masks, and measures.
//!
//! Scalar fields are raw little-endian `f64` in x-fastest order with a JSON
//! sidecar (`<file>.json`) describing the grid. Masks are binary PGM (P5)
//! images, one row per y line with z slabs stacked vertically, plus the same
//! sidecar. Measures are JSON documents listing atoms, balls, and spheres,
//! with an optional reference to a density field file resolved relative to
//! the document.

use super::{GridSpec, Mask, Measure, ScalarField, SINGULAR};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

#[derive(Serialize, Deserialize)]
struct FieldMeta {
    kind: String,
    dim: usize,
    origin: [f64; 3],
    spacing: f64,
    shape: [usize; 3],
    order: String,
    storage: String,
    sentinel: f64,
}

impl FieldMeta {
    fn new(spec: &GridSpec, kind: &str, storage: &str) -> Self {
        FieldMeta {
            kind: kind.into(),
            dim: spec.dim,
            origin: spec.origin,
            spacing: spec.h,
            shape: spec.shape,
            order: "x_fastest".into(),
            storage: storage.into(),
            sentinel: SINGULAR,
        }
    }

    fn spec(&self) -> Result<GridSpec> {
        if self.order != "x_fastest" {
            return Err(Error::Config(format!("unsupported order {:?}", self.order)));
        }
        GridSpec::new(self.dim, self.origin, self.shape, self.spacing)
    }
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, meta: &FieldMeta) -> Result<()> {
    let f = fs::File::create(sidecar_path(path))?;
    serde_json::to_writer_pretty(BufWriter::new(f), meta)?;
    Ok(())
}

fn read_sidecar(path: &Path) -> Result<FieldMeta> {
    let f = fs::File::open(sidecar_path(path))?;
    Ok(serde_json::from_reader(BufReader::new(f))?)
}

/// Writes the field as raw little-endian `f64` plus a JSON sidecar.
pub fn write_field(field: &ScalarField, path: &Path) -> Result<()> {
    write_sidecar(path, &FieldMeta::new(&field.spec, "scalar_field", "f64_le"))?;
    let mut w = BufWriter::new(fs::File::create(path)?);
    for v in &field.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a field written by [`write_field`].
pub fn read_field(path: &Path) -> Result<ScalarField> {
    let meta = read_sidecar(path)?;
    if meta.storage != "f64_le" {
        return Err(Error::Config(format!(
            "field at {} has storage {:?}, expected f64_le",
            path.display(),
            meta.storage
        )));
    }
    let spec = meta.spec()?;
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut buf = vec![0u8; spec.len() * 8];
    r.read_exact(&mut buf)?;
    let data = buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(ScalarField { spec, data })
}

/// Writes the field as CSV with columns `x,y,z,value`.
pub fn write_field_csv(field: &ScalarField, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["x", "y", "z", "value"]).map_err(csv_err)?;
    let spec = field.spec;
    for idx in 0..spec.len() {
        let c = spec.center(spec.decompose(idx));
        w.write_record([
            format!("{}", c[0]),
            format!("{}", c[1]),
            format!("{}", c[2]),
            format!("{}", field.data[idx]),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Config(format!("csv: {other:?}")),
    }
}

/// Writes the mask as a binary PGM (P5) image: width `nx`, height
/// `ny * nz` (z slabs stacked top to bottom), 255 for set cells.
pub fn write_mask(mask: &Mask, path: &Path) -> Result<()> {
    write_sidecar(path, &FieldMeta::new(&mask.spec, "mask", "pgm_u8"))?;
    let spec = mask.spec;
    let mut w = BufWriter::new(fs::File::create(path)?);
    let width = spec.shape[0];
    let height = spec.shape[1] * spec.shape[2];
    write!(w, "P5\n{width} {height}\n255\n")?;
    // Data order in the file equals grid order: x fastest, then y, then z.
    let bytes: Vec<u8> = mask.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
    w.write_all(&bytes)?;
    w.flush()?;
    Ok(())
}

/// Reads a mask written by [`write_mask`].
pub fn read_mask(path: &Path) -> Result<Mask> {
    let meta = read_sidecar(path)?;
    if meta.storage != "pgm_u8" {
        return Err(Error::Config(format!(
            "mask at {} has storage {:?}, expected pgm_u8",
            path.display(),
            meta.storage
        )));
    }
    let spec = meta.spec()?;
    let mut r = BufReader::new(fs::File::open(path)?);
    let mut header = String::new();
    for _ in 0..3 {
        let mut line = String::new();
        r.read_line(&mut line)?;
        header.push_str(&line);
    }
    let mut parts = header.split_ascii_whitespace();
    if parts.next() != Some("P5") {
        return Err(Error::Config(format!("{} is not a binary PGM", path.display())));
    }
    let width: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config("PGM header lacks a width".into()))?;
    let height: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config("PGM header lacks a height".into()))?;
    if width != spec.shape[0] || height != spec.shape[1] * spec.shape[2] {
        return Err(Error::Config(format!(
            "PGM size {width}x{height} does not match the sidecar shape {:?}",
            spec.shape
        )));
    }
    let mut bytes = vec![0u8; spec.len()];
    r.read_exact(&mut bytes)?;
    Ok(Mask { spec, data: bytes.into_iter().map(|b| b > 127).collect() })
}

#[derive(Serialize, Deserialize, Default)]
struct MeasureFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    atoms: Vec<super::Atom>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    balls: Vec<super::Ball>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    shells: Vec<super::Shell>,
    /// Path to a density field file, relative to this document.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    density_file: Option<String>,
}

/// Writes a measure as JSON; a density component goes to a sibling field
/// file named `<path>.density.f64`.
pub fn write_measure(measure: &Measure, path: &Path) -> Result<()> {
    let density_file = match &measure.density {
        Some(d) => {
            let name = format!(
                "{}.density.f64",
                path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
            );
            let target = path.with_file_name(&name);
            write_field(d, &target)?;
            Some(name)
        }
        None => None,
    };
    let doc = MeasureFile {
        atoms: measure.atoms.clone(),
        balls: measure.balls.clone(),
        shells: measure.shells.clone(),
        density_file,
    };
    let f = fs::File::create(path)?;
    serde_json::to_writer_pretty(BufWriter::new(f), &doc)?;
    Ok(())
}

/// Reads a measure document; `density_file` references resolve relative to
/// the document's directory.
pub fn read_measure(path: &Path) -> Result<Measure> {
    let f = fs::File::open(path)?;
    let doc: MeasureFile = serde_json::from_reader(BufReader::new(f))?;
    let density = match doc.density_file {
        Some(rel) => {
            let base = path.parent().unwrap_or(Path::new("."));
            Some(read_field(&base.join(rel))?)
        }
        None => None,
    };
    Ok(Measure { atoms: doc.atoms, balls: doc.balls, shells: doc.shells, density })
}
