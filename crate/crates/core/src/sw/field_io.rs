//! Field dumps: one ASCII header line followed by the raw values,
//! row-major, 32-bit little-endian.
//!
//! ```text
//! swfield 1 name=<name> rows=<rows> cols=<cols> dtype=<f32le|i32le>\n
//! <rows * cols * 4 bytes>
//! ```

use std::io::{self, BufRead, Write};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldIoError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("malformed field header: {0}")]
    Header(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum FieldDump {
    F32 { name: String, rows: usize, cols: usize, data: Vec<f32> },
    I32 { name: String, rows: usize, cols: usize, data: Vec<i32> },
}

impl FieldDump {
    pub fn name(&self) -> &str {
        match self {
            FieldDump::F32 { name, .. } | FieldDump::I32 { name, .. } => name,
        }
    }
}

pub fn write_field<W: Write>(mut w: W, field: &FieldDump) -> Result<(), FieldIoError> {
    match field {
        FieldDump::F32 { name, rows, cols, data } => {
            writeln!(w, "swfield 1 name={name} rows={rows} cols={cols} dtype=f32le")?;
            for x in data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        FieldDump::I32 { name, rows, cols, data } => {
            writeln!(w, "swfield 1 name={name} rows={rows} cols={cols} dtype=i32le")?;
            for x in data {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_field<R: BufRead>(mut r: R) -> Result<FieldDump, FieldIoError> {
    let mut header = String::new();
    r.read_line(&mut header)?;
    let mut parts = header.trim_end().split(' ');
    if parts.next() != Some("swfield") || parts.next() != Some("1") {
        return Err(FieldIoError::Header(header));
    }
    let (mut name, mut rows, mut cols, mut dtype) = (None, None, None, None);
    for kv in parts {
        let (k, v) = kv.split_once('=').ok_or_else(|| FieldIoError::Header(header.clone()))?;
        match k {
            "name" => name = Some(v.to_string()),
            "rows" => rows = v.parse::<usize>().ok(),
            "cols" => cols = v.parse::<usize>().ok(),
            "dtype" => dtype = Some(v.to_string()),
            _ => return Err(FieldIoError::Header(header.clone())),
        }
    }
    let (Some(name), Some(rows), Some(cols), Some(dtype)) = (name, rows, cols, dtype) else {
        return Err(FieldIoError::Header(header));
    };
    let mut bytes = vec![0u8; rows * cols * 4];
    r.read_exact(&mut bytes)?;
    let words = bytes.chunks_exact(4).map(|c| [c[0], c[1], c[2], c[3]]);
    match dtype.as_str() {
        "f32le" => Ok(FieldDump::F32 { name, rows, cols, data: words.map(f32::from_le_bytes).collect() }),
        "i32le" => Ok(FieldDump::I32 { name, rows, cols, data: words.map(i32::from_le_bytes).collect() }),
        _ => Err(FieldIoError::Header(header)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_is_plain_text_and_payload_is_little_endian() {
        let f = FieldDump::F32 { name: "eta".into(), rows: 1, cols: 2, data: vec![1.0, -2.5] };
        let mut buf = Vec::new();
        write_field(&mut buf, &f).unwrap();
        let nl = buf.iter().position(|&b| b == b'\n').unwrap();
        assert_eq!(&buf[..nl], b"swfield 1 name=eta rows=1 cols=2 dtype=f32le");
        assert_eq!(&buf[nl + 1..nl + 5], &1.0f32.to_le_bytes());
        assert_eq!(read_field(&buf[..]).unwrap(), f);
    }

    #[test]
    fn rejects_unknown_dtype() {
        let buf = b"swfield 1 name=x rows=1 cols=1 dtype=f64le\n\0\0\0\0";
        assert!(matches!(read_field(&buf[..]), Err(FieldIoError::Header(_))));
    }
}
