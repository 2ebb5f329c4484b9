//! On-disk formats: raw `f32` images with a JSON sidecar, 8-bit PGM
//! previews, and CSV tables.
//!
//! A raw image at `path` is the row-major little-endian `f32` payload; its
//! header lives next to it at `path.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DTYPE_F32LE: &str = "f32le";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFileHeader {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    #[serde(default)]
    pub description: String,
}

pub fn header_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes the payload and its sidecar header. Samples are narrowed to `f32`.
pub fn write_image(path: &Path, image: &Image, description: &str) -> Result<()> {
    let header = ImageFileHeader {
        width: image.width(),
        height: image.height(),
        dtype: DTYPE_F32LE.to_string(),
        description: description.to_string(),
    };
    let mut payload = Vec::with_capacity(image.len() * 4);
    for &v in image.samples() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, payload).map_err(|e| Error::io(path, e))?;
    let hpath = header_path(path);
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    fs::write(&hpath, json + "\n").map_err(|e| Error::io(&hpath, e))?;
    Ok(())
}

pub fn read_header(path: &Path) -> Result<ImageFileHeader> {
    let hpath = header_path(path);
    let text = match fs::read_to_string(&hpath) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::CorruptHeader {
                path: hpath,
                reason: "header file is missing".into(),
            })
        }
        Err(e) => return Err(Error::io(&hpath, e)),
    };
    let header: ImageFileHeader = serde_json::from_str(&text).map_err(|e| Error::CorruptHeader {
        path: hpath.clone(),
        reason: e.to_string(),
    })?;
    if header.dtype != DTYPE_F32LE {
        return Err(Error::CorruptHeader {
            path: hpath,
            reason: format!("unsupported dtype '{}'", header.dtype),
        });
    }
    if header.width == 0 || header.height == 0 {
        return Err(Error::CorruptHeader {
            path: hpath,
            reason: format!("non-positive dimensions {}x{}", header.width, header.height),
        });
    }
    Ok(header)
}

/// Reads an image and its header.
///
/// A payload shorter than the header promises is reported as a size
/// mismatch; a longer one means the header dimensions are wrong.
pub fn read_image(path: &Path) -> Result<(Image, ImageFileHeader)> {
    let header = read_header(path)?;
    let payload = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = (header.width * header.height * 4) as u64;
    let actual = payload.len() as u64;
    if actual < expected {
        return Err(Error::SizeMismatch {
            path: path.to_path_buf(),
            expected,
            actual,
        });
    }
    if actual > expected {
        return Err(Error::CorruptHeader {
            path: header_path(path),
            reason: format!(
                "header declares {}x{} ({expected} bytes) but the payload holds {actual} bytes",
                header.width, header.height
            ),
        });
    }
    let samples = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Ok((Image::new(header.width, header.height, samples)?, header))
}

/// Linear window `[window_min, window_max] → [0, 255]`, floored and clamped.
pub fn window_to_byte(v: f64, window_min: f64, window_max: f64) -> u8 {
    let t = (v - window_min) / (window_max - window_min) * 255.0;
    t.floor().clamp(0.0, 255.0) as u8
}

/// Binary 8-bit PGM (`P5`).
pub fn export_pgm(path: &Path, image: &Image, window_min: f64, window_max: f64) -> Result<()> {
    if !(window_max > window_min) {
        return Err(Error::Parameter(format!(
            "window max {window_max} must exceed window min {window_min}"
        )));
    }
    let mut bytes = format!("P5\n{} {}\n255\n", image.width(), image.height()).into_bytes();
    bytes.extend(
        image
            .samples()
            .iter()
            .map(|&v| window_to_byte(v, window_min, window_max)),
    );
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Shortest representation that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v}")
}

/// A header row plus string cells, written as RFC 4180 CSV.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(file)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.iter().map(str::to_string).collect();
        let rows = r
            .records()
            .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { header, rows })
    }
}
