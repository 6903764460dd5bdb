//! Image decoding, label file encoding and overlays.
//!
//! Label files come in three encodings, picked by extension unless given
//! explicitly:
//!
//! * `png16`: 16-bit grayscale PNG, 2D only, at most 65536 labels.
//! * `csv`: comma-separated rows, one line per image row; volume frames are
//!   separated by a blank line.
//! * `raw`: little-endian, magic `ADPT`, then `u32` width, height, depth
//!   and label count `K`, then one `u32` label per pixel in row-major order.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{AdaptelError, Result};
use crate::features::GridShape;
use crate::metrics::BoundaryMap;
use crate::segmenter::LabelMap;

pub const RAW_MAGIC: &[u8; 4] = b"ADPT";
const RAW_HEADER_LEN: usize = 20;

/// Boundary color painted by [`overlay`].
pub const OVERLAY_COLOR: Rgb<u8> = Rgb([255, 0, 0]);

const IMAGE_EXTENSIONS: &[&str] = &["png", "ppm", "pnm", "pgm", "pbm"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelFileFormat {
    Png16,
    Csv,
    Raw,
}

impl LabelFileFormat {
    /// `.png` maps to png16, `.csv` to csv, anything else to raw.
    pub fn from_path(path: &Path) -> Self {
        match extension(path).as_deref() {
            Some("png") => LabelFileFormat::Png16,
            Some("csv") => LabelFileFormat::Csv,
            _ => LabelFileFormat::Raw,
        }
    }
}

impl FromStr for LabelFileFormat {
    type Err = AdaptelError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "png16" | "png" => Ok(LabelFileFormat::Png16),
            "csv" => Ok(LabelFileFormat::Csv),
            "raw" => Ok(LabelFileFormat::Raw),
            other => Err(AdaptelError::InvalidConfig(format!(
                "unknown label format '{other}'"
            ))),
        }
    }
}

fn extension(path: &Path) -> Option<String> {
    path.extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
}

pub fn is_image_path(path: &Path) -> bool {
    extension(path).is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str()))
}

pub fn is_label_path(path: &Path) -> bool {
    extension(path).is_some_and(|e| matches!(e.as_str(), "png" | "csv" | "raw" | "adpt"))
}

/// Decodes a PNG or PPM image to 8-bit RGB.
pub fn read_image(path: &Path) -> Result<RgbImage> {
    let img = image::ImageReader::open(path)
        .map_err(|e| AdaptelError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| AdaptelError::io(path, e))?
        .decode()
        .map_err(|source| AdaptelError::Image {
            path: path.to_path_buf(),
            source,
        })?;
    Ok(img.to_rgb8())
}

/// Image files of a directory, sorted by file name.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    list_files(dir, is_image_path)
}

pub fn list_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| AdaptelError::io(dir, e))? {
        let path = entry.map_err(|e| AdaptelError::io(dir, e))?.path();
        if path.is_file() && keep(&path) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads a directory of numbered frames in file name order.
pub fn read_frames(dir: &Path) -> Result<Vec<RgbImage>> {
    let paths = list_images(dir)?;
    if paths.is_empty() {
        return Err(AdaptelError::Empty(format!(
            "no image frames in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| read_image(p)).collect()
}

pub fn encode_labels(labels: &LabelMap, format: LabelFileFormat) -> Result<Vec<u8>> {
    let shape = labels.shape();
    let k = labels.label_bound();
    if !labels.is_complete() {
        return Err(AdaptelError::Format(
            "cannot encode a partial label map".into(),
        ));
    }
    match format {
        LabelFileFormat::Raw => {
            let mut out = Vec::with_capacity(RAW_HEADER_LEN + 4 * labels.len());
            out.extend_from_slice(RAW_MAGIC);
            for v in [
                shape.width as u32,
                shape.height as u32,
                shape.depth as u32,
                k,
            ] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for &l in labels.as_slice() {
                out.extend_from_slice(&l.to_le_bytes());
            }
            Ok(out)
        }
        LabelFileFormat::Csv => {
            let mut out = String::new();
            let row_len = shape.width;
            for (i, row) in labels.as_slice().chunks(row_len).enumerate() {
                if i > 0 && i % shape.height == 0 {
                    out.push('\n');
                }
                let cells: Vec<String> = row.iter().map(|l| l.to_string()).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
        LabelFileFormat::Png16 => {
            if shape.is_volume() {
                return Err(AdaptelError::Format(
                    "png16 label files hold 2D maps only".into(),
                ));
            }
            if k > 1 << 16 {
                return Err(AdaptelError::Format(format!(
                    "{k} labels exceed the png16 range"
                )));
            }
            let data: Vec<u16> = labels.as_slice().iter().map(|&l| l as u16).collect();
            let img: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_raw(shape.width as u32, shape.height as u32, data)
                    .expect("buffer matches dimensions");
            let mut out = std::io::Cursor::new(Vec::new());
            img.write_to(&mut out, image::ImageFormat::Png)
                .map_err(|e| AdaptelError::Format(e.to_string()))?;
            Ok(out.into_inner())
        }
    }
}

pub fn decode_labels(bytes: &[u8], format: LabelFileFormat) -> Result<LabelMap> {
    match format {
        LabelFileFormat::Raw => decode_raw(bytes),
        LabelFileFormat::Csv => decode_csv(bytes),
        LabelFileFormat::Png16 => {
            let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
                .map_err(|e| AdaptelError::Format(e.to_string()))?;
            // 8-bit ground truth images are accepted as well.
            let scale = if img.color() == image::ColorType::L8 {
                257
            } else {
                1
            };
            let gray = img.to_luma16();
            let shape = GridShape::planar(gray.width() as usize, gray.height() as usize)?;
            let labels = gray
                .into_raw()
                .into_iter()
                .map(|v| u32::from(v) / scale)
                .collect();
            LabelMap::from_vec(shape, labels)
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn decode_raw(bytes: &[u8]) -> Result<LabelMap> {
    if bytes.len() < RAW_HEADER_LEN || &bytes[..4] != RAW_MAGIC {
        return Err(AdaptelError::Format("missing ADPT header".into()));
    }
    let (w, h, d, k) = (
        read_u32(bytes, 4) as usize,
        read_u32(bytes, 8) as usize,
        read_u32(bytes, 12) as usize,
        read_u32(bytes, 16),
    );
    let shape = GridShape::new(w, h, d)?;
    let body = &bytes[RAW_HEADER_LEN..];
    if body.len() != 4 * shape.len() {
        return Err(AdaptelError::Format(format!(
            "expected {} label bytes, found {}",
            4 * shape.len(),
            body.len()
        )));
    }
    let labels: Vec<u32> = body
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
        return Err(AdaptelError::Format(format!(
            "label {bad} not below K = {k}"
        )));
    }
    LabelMap::from_vec(shape, labels)
}

fn decode_csv(bytes: &[u8]) -> Result<LabelMap> {
    let text = std::str::from_utf8(bytes).map_err(|e| AdaptelError::Format(e.to_string()))?;
    let mut frames: Vec<Vec<Vec<u32>>> = vec![Vec::new()];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            if !frames.last().expect("non-empty").is_empty() {
                frames.push(Vec::new());
            }
            continue;
        }
        let row = line
            .split(',')
            .map(|c| {
                c.trim().parse::<u32>().map_err(|e| {
                    AdaptelError::Format(format!("line {}: '{}': {e}", lineno + 1, c.trim()))
                })
            })
            .collect::<Result<Vec<u32>>>()?;
        frames.last_mut().expect("non-empty").push(row);
    }
    if frames.last().is_some_and(|f| f.is_empty()) {
        frames.pop();
    }
    let first = frames
        .first()
        .ok_or_else(|| AdaptelError::Format("empty csv label file".into()))?;
    let (h, w) = (first.len(), first[0].len());
    let mut labels = Vec::with_capacity(w * h * frames.len());
    for (t, frame) in frames.iter().enumerate() {
        if frame.len() != h || frame.iter().any(|r| r.len() != w) {
            return Err(AdaptelError::Format(format!("frame {t} is not {w}x{h}")));
        }
        labels.extend(frame.iter().flatten());
    }
    LabelMap::from_vec(GridShape::new(w, h, frames.len())?, labels)
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| AdaptelError::io(dir, e))?;
    tmp.write_all(bytes)
        .map_err(|e| AdaptelError::io(path, e))?;
    tmp.persist(path)
        .map_err(|e| AdaptelError::io(path, e.error))?;
    Ok(())
}

pub fn write_labels(path: &Path, labels: &LabelMap, format: LabelFileFormat) -> Result<()> {
    write_atomic(path, &encode_labels(labels, format)?)
}

pub fn read_labels(path: &Path) -> Result<LabelMap> {
    let bytes = fs::read(path).map_err(|e| AdaptelError::io(path, e))?;
    decode_labels(&bytes, LabelFileFormat::from_path(path))
}

/// Copy of `frame` with boundary pixels of frame `t` painted in
/// [`OVERLAY_COLOR`].
pub fn overlay(frame: &RgbImage, boundaries: &BoundaryMap, t: usize) -> RgbImage {
    let shape = boundaries.shape();
    let mut out = frame.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        if boundaries.get(shape.index(x as usize, y as usize, t)) {
            *px = OVERLAY_COLOR;
        }
    }
    out
}

pub fn write_png(path: &Path, img: &RgbImage) -> Result<()> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|source| AdaptelError::Image {
            path: path.to_path_buf(),
            source,
        })?;
    write_atomic(path, &buf.into_inner())
}
