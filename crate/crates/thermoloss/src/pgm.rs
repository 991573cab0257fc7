//! Netpbm graymaps (PGM), plain (P2) and raw (P5).
//!
//! Thermal images are stored with maxval 65535 (value `v` as `round(v * 65535)`),
//! segmentation masks with maxval 255. Raw 16-bit samples are big-endian.

use std::fs;
use std::path::Path;

use thermoloss_core::{SegmentationMask, ThermalImage};

pub const THERMAL_MAXVAL: u16 = 65535;
pub const MASK_MAXVAL: u16 = 255;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PgmError {
    #[error("not a PGM file (magic {0:?})")]
    BadMagic(String),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("unsupported maxval {found} (expected {expected})")]
    Maxval { expected: u16, found: u32 },
    #[error("truncated payload: expected {expected} samples, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("sample {value} at index {index} exceeds maxval {maxval}")]
    SampleRange { index: usize, value: u32, maxval: u16 },
    #[error("invalid label {label} at index {index} (must be below 18)")]
    Label { index: usize, label: u16 },
    #[error("trailing data after {0} samples")]
    Trailing(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    /// ASCII samples.
    Plain,
    /// Binary samples.
    Raw,
}

/// A decoded graymap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pgm {
    pub width: usize,
    pub height: usize,
    pub maxval: u16,
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn token(&mut self) -> Option<&[u8]> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(|b| !b.is_ascii_whitespace() && *b != b'#') {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<u32, PgmError> {
        let tok = self
            .token()
            .ok_or_else(|| PgmError::MalformedHeader(format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .ok_or_else(|| PgmError::MalformedHeader(format!("{what} is not a number: {:?}", String::from_utf8_lossy(tok))))
    }
}

/// Decodes a P2 or P5 graymap with any maxval in `1..=65535`.
pub fn decode(bytes: &[u8]) -> Result<Pgm, PgmError> {
    let magic = bytes.get(..2).unwrap_or(bytes);
    let raw = match magic {
        b"P2" => false,
        b"P5" => true,
        _ => return Err(PgmError::BadMagic(String::from_utf8_lossy(magic).into_owned())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if !cur.bytes.get(2).is_some_and(|b| b.is_ascii_whitespace() || *b == b'#') {
        return Err(PgmError::MalformedHeader("no separator after magic".into()));
    }
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PgmError::MalformedHeader("zero width or height".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PgmError::MalformedHeader(format!("maxval {maxval} outside 1..=65535")));
    }
    let maxval = maxval as u16;
    let n = width
        .checked_mul(height)
        .ok_or_else(|| PgmError::MalformedHeader("image too large".into()))?;
    let mut samples = Vec::with_capacity(n);
    if raw {
        if !cur.bytes.get(cur.pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(PgmError::MalformedHeader("no separator before raster".into()));
        }
        let data = &bytes[cur.pos + 1..];
        let width_bytes = if maxval > 255 { 2 } else { 1 };
        let available = data.len() / width_bytes;
        if available < n {
            return Err(PgmError::Truncated {
                expected: n,
                found: available,
            });
        }
        if data.len() > n * width_bytes {
            return Err(PgmError::Trailing(n));
        }
        for i in 0..n {
            let v = if width_bytes == 2 {
                u16::from_be_bytes([data[2 * i], data[2 * i + 1]])
            } else {
                data[i] as u16
            };
            samples.push(v);
        }
    } else {
        while samples.len() < n {
            let Some(tok) = cur.token() else {
                return Err(PgmError::Truncated {
                    expected: n,
                    found: samples.len(),
                });
            };
            let v = std::str::from_utf8(tok)
                .ok()
                .and_then(|s| s.parse::<u32>().ok())
                .ok_or_else(|| PgmError::MalformedHeader(format!("bad sample {:?}", String::from_utf8_lossy(tok))))?;
            if v > u32::from(maxval) {
                return Err(PgmError::SampleRange {
                    index: samples.len(),
                    value: v,
                    maxval,
                });
            }
            samples.push(v as u16);
        }
        if cur.token().is_some() {
            return Err(PgmError::Trailing(n));
        }
    }
    if let Some((index, &value)) = samples.iter().enumerate().find(|(_, &v)| v > maxval) {
        return Err(PgmError::SampleRange {
            index,
            value: value.into(),
            maxval,
        });
    }
    Ok(Pgm {
        width,
        height,
        maxval,
        samples,
    })
}

pub fn encode(pgm: &Pgm, format: Format) -> Vec<u8> {
    let magic = match format {
        Format::Plain => "P2",
        Format::Raw => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{}\n", pgm.width, pgm.height, pgm.maxval).into_bytes();
    match format {
        Format::Plain => {
            for row in pgm.samples.chunks(pgm.width) {
                let line: Vec<String> = row.iter().map(u16::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
        Format::Raw => {
            for &v in &pgm.samples {
                if pgm.maxval > 255 {
                    out.extend_from_slice(&v.to_be_bytes());
                } else {
                    out.push(v as u8);
                }
            }
        }
    }
    out
}

/// Thermal image from a 16-bit graymap; maxval must be 65535.
pub fn thermal_from_pgm(pgm: &Pgm) -> Result<ThermalImage, PgmError> {
    if pgm.maxval != THERMAL_MAXVAL {
        return Err(PgmError::Maxval {
            expected: THERMAL_MAXVAL,
            found: pgm.maxval.into(),
        });
    }
    let values = pgm.samples.iter().map(|&s| f64::from(s) / f64::from(THERMAL_MAXVAL)).collect();
    Ok(ThermalImage::new(pgm.height, pgm.width, values).expect("samples lie in [0, 1]"))
}

pub fn thermal_to_pgm(img: &ThermalImage) -> Pgm {
    Pgm {
        width: img.width(),
        height: img.height(),
        maxval: THERMAL_MAXVAL,
        samples: img
            .values()
            .iter()
            .map(|v| (v * f64::from(THERMAL_MAXVAL)).round() as u16)
            .collect(),
    }
}

pub fn mask_from_pgm(pgm: &Pgm) -> Result<SegmentationMask, PgmError> {
    if pgm.maxval != MASK_MAXVAL {
        return Err(PgmError::Maxval {
            expected: MASK_MAXVAL,
            found: pgm.maxval.into(),
        });
    }
    if let Some((index, &label)) = pgm.samples.iter().enumerate().find(|(_, &l)| l >= 18) {
        return Err(PgmError::Label { index, label });
    }
    let labels = pgm.samples.iter().map(|&l| l as u8).collect();
    Ok(SegmentationMask::new(pgm.height, pgm.width, labels).expect("labels checked"))
}

pub fn mask_to_pgm(mask: &SegmentationMask) -> Pgm {
    Pgm {
        width: mask.width(),
        height: mask.height(),
        maxval: MASK_MAXVAL,
        samples: mask.labels().iter().map(|&l| l.into()).collect(),
    }
}

/// Either an IO failure or a decoding failure, tagged with the path.
#[derive(Debug, thiserror::Error)]
pub enum PgmFileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: String, source: PgmError },
}

fn read(path: &Path) -> Result<Pgm, PgmFileError> {
    let bytes = fs::read(path).map_err(|source| PgmFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode(&bytes).map_err(|source| PgmFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

fn write(path: &Path, pgm: &Pgm, format: Format) -> Result<(), PgmFileError> {
    fs::write(path, encode(pgm, format)).map_err(|source| PgmFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_image(path: &Path) -> Result<ThermalImage, PgmFileError> {
    thermal_from_pgm(&read(path)?).map_err(|source| PgmFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_image(img: &ThermalImage, path: &Path, format: Format) -> Result<(), PgmFileError> {
    write(path, &thermal_to_pgm(img), format)
}

pub fn load_mask(path: &Path) -> Result<SegmentationMask, PgmFileError> {
    mask_from_pgm(&read(path)?).map_err(|source| PgmFileError::Parse {
        path: path.display().to_string(),
        source,
    })
}

/// Masks are always written raw.
pub fn save_mask(mask: &SegmentationMask, path: &Path) -> Result<(), PgmFileError> {
    write(path, &mask_to_pgm(mask), Format::Raw)
}
