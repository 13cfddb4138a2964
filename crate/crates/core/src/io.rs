//! MetaImage-style volume files: a text header followed by (or pointing to) a
//! raw little-endian payload in x-fastest order.
//!
//! Header keys:
//!
//! ```text
//! NDims=3
//! DimSize=nx ny nz
//! ElementSpacing=sx sy sz
//! Offset=ox oy oz
//! ElementType=FLOAT32|UINT8
//! ElementDataFile=<relative raw path or LOCAL>
//! ```
//!
//! `FLOAT32` payloads load as [`Volume`], `UINT8` as [`LabelMap`]. With
//! `ElementDataFile=LOCAL` the payload starts on the byte after the header's
//! final newline. Write/read is an exact round trip for values and geometry.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::Geometry;
use crate::mask::BinaryMask;
use crate::volume::{LabelMap, Volume};

/// Payload element types supported by the format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    Float32,
    Uint8,
}

impl ElementType {
    fn token(self) -> &'static str {
        match self {
            ElementType::Float32 => "FLOAT32",
            ElementType::Uint8 => "UINT8",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "FLOAT32" => Ok(ElementType::Float32),
            "UINT8" => Ok(ElementType::Uint8),
            other => Err(Error::UnsupportedElementType(other.to_string())),
        }
    }

    fn bytes_per_element(self) -> usize {
        match self {
            ElementType::Float32 => 4,
            ElementType::Uint8 => 1,
        }
    }
}

/// A decoded file: scalar volume or label map, per the header's element type.
#[derive(Debug, Clone)]
pub enum VolumeFile {
    Scalar(Volume),
    Labels(LabelMap),
}

struct Header {
    geom: Geometry,
    element_type: ElementType,
    data_file: String,
    header_len: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_triplet<T: std::str::FromStr>(value: &str, key: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::MalformedHeader(format!(
            "{key} expects 3 components, got `{value}`"
        )));
    }
    let mut out: Vec<T> = Vec::with_capacity(3);
    for p in parts {
        out.push(
            p.parse()
                .map_err(|_| Error::MalformedHeader(format!("{key}: cannot parse `{p}`")))?,
        );
    }
    Ok([out.remove(0), out.remove(0), out.remove(0)])
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut ndims = None;
    let mut dim_size: Option<[usize; 3]> = None;
    let mut spacing: Option<[f64; 3]> = None;
    let mut offset: Option<[f64; 3]> = None;
    let mut element_type = None;
    let mut data_file: Option<String> = None;

    let mut pos = 0usize;
    while pos < bytes.len() {
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|i| pos + i)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..line_end])
            .map_err(|_| Error::MalformedHeader("non-UTF8 header line".into()))?
            .trim_end_matches('\r');
        pos = line_end + 1;

        let line_t = line.trim();
        if line_t.is_empty() {
            continue;
        }
        let (key, value) = line_t
            .split_once('=')
            .ok_or_else(|| Error::MalformedHeader(format!("missing `=` in `{line_t}`")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "NDims" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| Error::MalformedHeader(format!("NDims: `{value}`")))?;
                if n != 3 {
                    return Err(Error::MalformedHeader(format!("NDims must be 3, got {n}")));
                }
                ndims = Some(n);
            }
            "DimSize" => dim_size = Some(parse_triplet::<usize>(value, "DimSize")?),
            "ElementSpacing" => spacing = Some(parse_triplet::<f64>(value, "ElementSpacing")?),
            "Offset" => offset = Some(parse_triplet::<f64>(value, "Offset")?),
            "ElementType" => element_type = Some(ElementType::parse(value)?),
            "ElementDataFile" => {
                data_file = Some(value.to_string());
                // Payload (or nothing) follows this key; stop scanning.
                break;
            }
            // Unknown keys are tolerated for forward compatibility.
            _ => {}
        }
    }

    ndims.ok_or_else(|| Error::MalformedHeader("missing NDims".into()))?;
    let [nx, ny, nz] = dim_size.ok_or_else(|| Error::MalformedHeader("missing DimSize".into()))?;
    let [sx, sy, sz] =
        spacing.ok_or_else(|| Error::MalformedHeader("missing ElementSpacing".into()))?;
    let [ox, oy, oz] = offset.unwrap_or([0.0, 0.0, 0.0]);
    let element_type =
        element_type.ok_or_else(|| Error::MalformedHeader("missing ElementType".into()))?;
    let data_file =
        data_file.ok_or_else(|| Error::MalformedHeader("missing ElementDataFile".into()))?;

    Ok(Header {
        geom: Geometry::new([nz, ny, nx], [sz, sy, sx], [oz, oy, ox])?,
        element_type,
        data_file,
        header_len: pos,
    })
}

/// Reads a volume or label map, selecting the type from the header.
pub fn read_volume(path: impl AsRef<Path>) -> Result<VolumeFile> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    let header = parse_header(&bytes)?;

    let payload: Vec<u8> = if header.data_file == "LOCAL" {
        bytes[header.header_len.min(bytes.len())..].to_vec()
    } else {
        let raw_path: PathBuf = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&header.data_file);
        fs::read(&raw_path).map_err(|e| io_err(&raw_path, e))?
    };

    let n = header.geom.voxel_count();
    let expected = n * header.element_type.bytes_per_element();
    if payload.len() != expected {
        return Err(Error::PayloadSizeMismatch {
            expected,
            actual: payload.len(),
        });
    }

    match header.element_type {
        ElementType::Float32 => {
            let values: Vec<f32> = payload
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            Ok(VolumeFile::Scalar(Volume::from_vec(header.geom, values)?))
        }
        ElementType::Uint8 => {
            let max = payload.iter().copied().max().unwrap_or(0) as usize;
            Ok(VolumeFile::Labels(LabelMap::from_vec(
                header.geom,
                payload,
                max + 1,
            )?))
        }
    }
}

/// Reads a file that must contain a FLOAT32 scalar volume.
pub fn read_scalar(path: impl AsRef<Path>) -> Result<Volume> {
    match read_volume(&path)? {
        VolumeFile::Scalar(v) => Ok(v),
        VolumeFile::Labels(_) => Err(Error::UnsupportedElementType(
            "expected FLOAT32 volume, found UINT8 labels".into(),
        )),
    }
}

/// Reads a file that must contain a UINT8 label map.
pub fn read_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    match read_volume(&path)? {
        VolumeFile::Labels(m) => Ok(m),
        VolumeFile::Scalar(_) => Err(Error::UnsupportedElementType(
            "expected UINT8 labels, found FLOAT32 volume".into(),
        )),
    }
}

fn write_file(
    path: &Path,
    geom: &Geometry,
    element_type: ElementType,
    payload: &[u8],
) -> Result<()> {
    let [nz, ny, nx] = geom.dims;
    let [sz, sy, sx] = geom.spacing;
    let [oz, oy, ox] = geom.origin;
    let mut out = Vec::with_capacity(payload.len() + 160);
    // Shortest round-trip float formatting keeps the header byte-stable.
    write!(
        out,
        "NDims=3\nDimSize={nx} {ny} {nz}\nElementSpacing={sx} {sy} {sz}\nOffset={ox} {oy} {oz}\nElementType={}\nElementDataFile=LOCAL\n",
        element_type.token()
    )
    .expect("writing to Vec cannot fail");
    out.extend_from_slice(payload);
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Writes a scalar volume as FLOAT32 with a LOCAL payload.
pub fn write_scalar(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let mut payload = Vec::with_capacity(v.as_slice().len() * 4);
    for &x in v.as_slice() {
        payload.extend_from_slice(&x.to_le_bytes());
    }
    write_file(path.as_ref(), v.geometry(), ElementType::Float32, &payload)
}

/// Writes a label map as UINT8 with a LOCAL payload.
pub fn write_labels(m: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    write_file(
        path.as_ref(),
        m.geometry(),
        ElementType::Uint8,
        m.as_slice(),
    )
}

/// Writes a mask as UINT8 `{0, 1}`.
pub fn write_mask(m: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    write_labels(&m.to_label_map(), path)
}
