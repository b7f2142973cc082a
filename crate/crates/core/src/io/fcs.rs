//! Minimal FCS 3.0/3.1 reader: list-mode float32/float64 data only.
//!
//! Layout handled: 58-byte header (6-byte version, space padding, six 8-byte
//! ASCII segment offsets), delimiter-framed TEXT keywords with
//! doubled-delimiter escaping, contiguous DATA segment. Integer and ASCII
//! data types, bit packing, and FCS 2.0 are rejected with typed errors.

use crate::error::{Error, Result};
use crate::model::DataMatrix;
use crate::real::{cv, Real};
use nalgebra::DMatrix;
use std::collections::HashMap;
use std::path::Path;

/// Parsed FCS header and keyword map.
#[derive(Clone, Debug)]
pub struct FcsHeader {
    pub version: String,
    pub text: (usize, usize),
    pub data: (usize, usize),
    pub analysis: (usize, usize),
    pub keywords: HashMap<String, String>,
}

impl FcsHeader {
    pub fn keyword(&self, key: &str) -> Option<&str> {
        self.keywords.get(&key.to_ascii_uppercase()).map(|s| s.as_str())
    }
}

fn corrupt(path: &Path, msg: impl Into<String>) -> Error {
    Error::corrupt(path, msg)
}

fn parse_offset(path: &Path, bytes: &[u8], what: &str) -> Result<usize> {
    let s = std::str::from_utf8(bytes)
        .map_err(|_| corrupt(path, format!("{what} offset is not ASCII")))?
        .trim();
    if s.is_empty() {
        return Ok(0);
    }
    s.parse::<usize>().map_err(|_| corrupt(path, format!("{what} offset {s:?} is not a number")))
}

// Splits the TEXT segment into tokens, honoring doubled-delimiter escapes.
fn parse_text_tokens(path: &Path, seg: &[u8]) -> Result<Vec<String>> {
    if seg.len() < 2 {
        return Err(corrupt(path, "TEXT segment too short"));
    }
    let delim = seg[0];
    let mut tokens = Vec::new();
    let mut cur: Vec<u8> = Vec::new();
    let mut i = 1usize;
    let mut closed = false;
    while i < seg.len() {
        let b = seg[i];
        if b == delim {
            if i + 1 < seg.len() && seg[i + 1] == delim {
                cur.push(delim);
                i += 2;
            } else {
                tokens.push(cur.clone());
                cur.clear();
                closed = i + 1 == seg.len();
                i += 1;
            }
        } else {
            cur.push(b);
            i += 1;
        }
    }
    if !closed && !cur.is_empty() {
        return Err(corrupt(path, "TEXT segment does not end with the delimiter"));
    }
    tokens
        .into_iter()
        .map(|t| {
            String::from_utf8(t).map_err(|_| corrupt(path, "TEXT keyword is not valid UTF-8"))
        })
        .collect()
}

/// Parse the header and TEXT segment of an FCS file.
pub fn read_fcs_header(path: impl AsRef<Path>) -> Result<FcsHeader> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_fcs_header_bytes(path, &bytes)
}

fn parse_fcs_header_bytes(path: &Path, bytes: &[u8]) -> Result<FcsHeader> {
    if bytes.len() < 58 {
        return Err(corrupt(path, format!("file is {} bytes, header needs 58", bytes.len())));
    }
    let version = std::str::from_utf8(&bytes[0..6])
        .map_err(|_| corrupt(path, "version field is not ASCII"))?
        .to_string();
    if version != "FCS3.0" && version != "FCS3.1" {
        return Err(Error::Unsupported(format!(
            "FCS version {version:?}; only FCS3.0 and FCS3.1 are supported"
        )));
    }
    let off = |i: usize, what: &str| parse_offset(path, &bytes[10 + 8 * i..18 + 8 * i], what);
    let text = (off(0, "TEXT begin")?, off(1, "TEXT end")?);
    let data = (off(2, "DATA begin")?, off(3, "DATA end")?);
    let analysis = (off(4, "ANALYSIS begin")?, off(5, "ANALYSIS end")?);

    if text.0 < 58 || text.1 < text.0 || text.1 >= bytes.len() {
        return Err(corrupt(
            path,
            format!("TEXT segment [{}, {}] outside file of {} bytes", text.0, text.1, bytes.len()),
        ));
    }
    let tokens = parse_text_tokens(path, &bytes[text.0..=text.1])?;
    if tokens.len() % 2 != 0 {
        return Err(corrupt(path, "TEXT segment has a keyword without a value"));
    }
    let mut keywords = HashMap::new();
    for pair in tokens.chunks(2) {
        keywords.insert(pair[0].trim().to_ascii_uppercase(), pair[1].clone());
    }
    Ok(FcsHeader { version, text, data, analysis, keywords })
}

fn required<'a>(path: &Path, h: &'a FcsHeader, key: &str) -> Result<&'a str> {
    h.keyword(key).ok_or_else(|| corrupt(path, format!("required keyword {key} is missing")))
}

fn required_usize(path: &Path, h: &FcsHeader, key: &str) -> Result<usize> {
    required(path, h, key)?
        .trim()
        .parse::<usize>()
        .map_err(|_| corrupt(path, format!("keyword {key} is not a non-negative integer")))
}

/// Read an FCS file into a [`DataMatrix`], column names from $PnN.
pub fn read_fcs<T: Real>(path: impl AsRef<Path>) -> Result<DataMatrix<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_fcs_header_bytes(path, &bytes)?;

    let mode = required(path, &header, "$MODE")?.trim().to_ascii_uppercase();
    if mode != "L" {
        return Err(Error::Unsupported(format!("$MODE {mode:?}; only list mode (L) is supported")));
    }
    let datatype = required(path, &header, "$DATATYPE")?.trim().to_ascii_uppercase();
    let (value_bytes, expect_bits) = match datatype.as_str() {
        "F" => (4usize, 32usize),
        "D" => (8usize, 64usize),
        other => {
            return Err(Error::Unsupported(format!(
                "$DATATYPE {other:?}; only F (float32) and D (float64) are supported"
            )))
        }
    };
    let byteord = required(path, &header, "$BYTEORD")?.trim().to_string();
    let little = match byteord.as_str() {
        "1,2,3,4" => true,
        "4,3,2,1" => false,
        other => {
            return Err(Error::Unsupported(format!(
                "$BYTEORD {other:?}; expected 1,2,3,4 or 4,3,2,1"
            )))
        }
    };
    let n_par = required_usize(path, &header, "$PAR")?;
    let n_tot = required_usize(path, &header, "$TOT")?;
    if n_par == 0 || n_tot == 0 {
        return Err(corrupt(path, "$PAR and $TOT must be positive"));
    }
    let mut names = Vec::with_capacity(n_par);
    for p in 1..=n_par {
        let bits = required_usize(path, &header, &format!("$P{p}B"))?;
        if bits != expect_bits {
            return Err(Error::Unsupported(format!(
                "$P{p}B = {bits}; datatype {datatype} requires {expect_bits} bits per value"
            )));
        }
        names.push(required(path, &header, &format!("$P{p}N"))?.trim().to_string());
    }

    // DATA offsets: header first, keyword fallback when the header says 0.
    let (mut begin, mut end) = header.data;
    if begin == 0 && end == 0 {
        begin = required_usize(path, &header, "$BEGINDATA")?;
        end = required_usize(path, &header, "$ENDDATA")?;
    }
    let need = n_par * n_tot * value_bytes;
    if begin == 0 || end < begin || end >= bytes.len() {
        return Err(corrupt(
            path,
            format!("DATA segment [{begin}, {end}] outside file of {} bytes", bytes.len()),
        ));
    }
    if end - begin + 1 < need {
        return Err(corrupt(
            path,
            format!("DATA segment holds {} bytes, need {need}", end - begin + 1),
        ));
    }
    let data = &bytes[begin..begin + need];
    let mut values = Vec::with_capacity(n_par * n_tot);
    match datatype.as_str() {
        "F" => {
            for chunk in data.chunks_exact(4) {
                let raw: [u8; 4] = chunk.try_into().unwrap();
                let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
                values.push(cv::<T>(v as f64));
            }
        }
        _ => {
            for chunk in data.chunks_exact(8) {
                let raw: [u8; 8] = chunk.try_into().unwrap();
                let v = if little { f64::from_le_bytes(raw) } else { f64::from_be_bytes(raw) };
                values.push(cv::<T>(v));
            }
        }
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(corrupt(path, "DATA segment contains non-finite values"));
    }
    let mat = DMatrix::from_row_slice(n_tot, n_par, &values);
    DataMatrix::new(mat, names)
}

#[cfg(test)]
pub mod fixture {
    //! Byte-level FCS fixture builder for tests.

    /// Build a minimal FCS file: version, TEXT keywords, raw data bytes.
    pub fn build_fcs(version: &str, delim: u8, keywords: &[(&str, &str)], data: &[u8]) -> Vec<u8> {
        let mut text = vec![delim];
        for (k, v) in keywords {
            text.extend_from_slice(k.as_bytes());
            text.push(delim);
            text.extend_from_slice(v.as_bytes());
            text.push(delim);
        }
        let text_begin = 58usize;
        let text_end = text_begin + text.len() - 1;
        let data_begin = text_end + 1;
        let data_end = if data.is_empty() { 0 } else { data_begin + data.len() - 1 };
        let mut out = Vec::new();
        out.extend_from_slice(version.as_bytes());
        out.extend_from_slice(b"    ");
        for v in [
            text_begin,
            text_end,
            if data.is_empty() { 0 } else { data_begin },
            data_end,
            0,
            0,
        ] {
            out.extend_from_slice(format!("{v:>8}").as_bytes());
        }
        assert_eq!(out.len(), 58);
        out.extend_from_slice(&text);
        out.extend_from_slice(data);
        out
    }

    /// Standard two-parameter float32 little-endian fixture with values 1..=6.
    pub fn float32_le_fixture() -> Vec<u8> {
        let mut data = Vec::new();
        for v in 1..=6 {
            data.extend_from_slice(&(v as f32).to_le_bytes());
        }
        build_fcs(
            "FCS3.0",
            b'/',
            &[
                ("$MODE", "L"),
                ("$DATATYPE", "F"),
                ("$BYTEORD", "1,2,3,4"),
                ("$PAR", "2"),
                ("$TOT", "3"),
                ("$P1B", "32"),
                ("$P1N", "FSC-A"),
                ("$P2B", "32"),
                ("$P2N", "SSC-A"),
            ],
            &data,
        )
    }
}
