//! Model file: an ASCII header terminated by a line `end`, then every tensor as
//! little-endian f32 in header order.
//!
//! ```text
//! deepxi-model 1
//! mode uni
//! blocks 2
//! cell 64
//! input 257
//! output 257
//! tensor fc_in.weight 64 257
//! ...
//! end
//! ```

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::network::{Mode, NetworkParams, NetworkShape};
use crate::error::{Error, Result};

const MAGIC: &str = "deepxi-model 1";

pub fn model_to_bytes(params: &NetworkParams) -> Vec<u8> {
    let mut h = String::new();
    writeln!(h, "{MAGIC}").unwrap();
    writeln!(h, "mode {}", params.mode).unwrap();
    writeln!(h, "blocks {}", params.blocks.len()).unwrap();
    writeln!(h, "cell {}", params.cell_size).unwrap();
    writeln!(h, "input {}", params.input_dim).unwrap();
    writeln!(h, "output {}", params.output_dim).unwrap();
    for (name, dims) in params.tensor_specs() {
        let dims: Vec<String> = dims.iter().map(usize::to_string).collect();
        writeln!(h, "tensor {name} {}", dims.join(" ")).unwrap();
    }
    writeln!(h, "end").unwrap();
    let mut bytes = h.into_bytes();
    for t in params.tensors() {
        for &v in t {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    bytes
}

pub fn model_from_bytes(bytes: &[u8], origin: &Path) -> Result<NetworkParams> {
    let bad = |msg: String| Error::format(origin, msg);
    let mut pos = 0;
    let mut lines = Vec::new();
    loop {
        let rest = &bytes[pos..];
        let nl = rest.iter().position(|&b| b == b'\n').ok_or_else(|| bad("header not terminated by 'end'".into()))?;
        let line = std::str::from_utf8(&rest[..nl]).map_err(|_| bad("header is not UTF-8".into()))?;
        pos += nl + 1;
        if line == "end" {
            break;
        }
        lines.push(line.to_string());
    }
    let mut it = lines.iter();
    if it.next().map(String::as_str) != Some(MAGIC) {
        return Err(bad(format!("missing '{MAGIC}' header")));
    }
    let mut field = |key: &str| -> Result<String> {
        let line = it.next().ok_or_else(|| bad(format!("missing '{key}' line")))?;
        line.strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .map(str::to_string)
            .ok_or_else(|| bad(format!("expected '{key}', found '{line}'")))
    };
    let mode: Mode = field("mode")?.parse().map_err(|e: Error| bad(e.to_string()))?;
    let mut num = |key: &str| -> Result<usize> { field(key)?.parse().map_err(|_| bad(format!("bad '{key}' value"))) };
    let shape = NetworkShape {
        mode,
        n_blocks: num("blocks")?,
        cell_size: num("cell")?,
        input_dim: num("input")?,
        output_dim: num("output")?,
    };
    let mut params = NetworkParams::zeros(&shape).map_err(|e| bad(e.to_string()))?;
    let specs = params.tensor_specs();
    let listed: Vec<&String> = lines[6..].iter().collect();
    if listed.len() != specs.len() {
        return Err(bad(format!("{} tensors listed, architecture has {}", listed.len(), specs.len())));
    }
    for (line, (name, dims)) in listed.iter().zip(&specs) {
        let mut want = format!("tensor {name}");
        for d in dims {
            write!(want, " {d}").unwrap();
        }
        if **line != want {
            return Err(bad(format!("tensor line '{line}' does not match expected '{want}'")));
        }
    }
    let n_values: usize = specs.iter().map(|(_, d)| d.iter().product::<usize>()).sum();
    let data = &bytes[pos..];
    if data.len() != 4 * n_values {
        return Err(bad(format!("expected {} data bytes, found {}", 4 * n_values, data.len())));
    }
    let mut chunks = data.chunks_exact(4);
    for t in params.tensors_mut() {
        for v in t.iter_mut() {
            let c = chunks.next().expect("length checked");
            *v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
        }
    }
    if params.tensors().iter().any(|t| t.iter().any(|v| !v.is_finite())) {
        return Err(bad("non-finite parameter".into()));
    }
    Ok(params)
}

pub fn save_model(params: &NetworkParams, path: &Path) -> Result<()> {
    fs::write(path, model_to_bytes(params)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<NetworkParams> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, path)
}
