//! Model file format.
//!
//! ```text
//! dialekt-model v1
//! [config]
//! chunk_size=1
//! embedding_dim=64
//! ...
//! [vocab] 31
//! U+0061
//! ...
//! [tensors] 24
//! src_embed 35 64
//! ...
//! data <bytes> <crc32>
//! <little-endian f64 payload>
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::params::Params;
use super::vocab::Vocabulary;
use super::{ModelError, NormalizerModel};
use crate::chunker::MAX_CHUNK;

pub const MODEL_HEADER: &str = "dialekt-model v1";

fn format_err(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

pub fn write_model<W: Write>(model: &NormalizerModel, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MODEL_HEADER}")?;
    writeln!(w, "[config]")?;
    writeln!(w, "chunk_size={}", model.chunk_size)?;
    write!(w, "{}", model.config.to_text())?;
    let symbols = model.vocab.symbols();
    writeln!(w, "[vocab] {}", symbols.len())?;
    for c in symbols {
        writeln!(w, "U+{:04X}", *c as u32)?;
    }
    let names = model.params.tensor_names();
    let tensors = model.params.tensors();
    writeln!(w, "[tensors] {}", tensors.len())?;
    let mut payload = Vec::with_capacity(model.params.num_parameters() * 8);
    for (name, t) in names.iter().zip(&tensors) {
        writeln!(w, "{name} {} {}", t.rows, t.cols)?;
        for v in &t.data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    writeln!(w, "data {} {:08x}", payload.len(), crc32fast::hash(&payload))?;
    w.write_all(&payload)?;
    w.flush()
}

pub fn save_model(model: &NormalizerModel, path: &Path) -> Result<(), ModelError> {
    let io_err = |source| ModelError::Io { path: path.display().to_string(), source };
    let file = fs::File::create(path).map_err(io_err)?;
    write_model(model, std::io::BufWriter::new(file)).map_err(io_err)
}

pub fn load_model(path: &Path) -> Result<NormalizerModel, ModelError> {
    let file = fs::File::open(path).map_err(|source| ModelError::Io { path: path.display().to_string(), source })?;
    read_model(BufReader::new(file))
}

fn next_line<R: BufRead>(r: &mut R) -> Result<String, ModelError> {
    let mut line = String::new();
    let n = r.read_line(&mut line).map_err(|e| format_err(format!("read failed: {e}")))?;
    if n == 0 {
        return Err(format_err("unexpected end of file"));
    }
    Ok(line.trim_end_matches(['\n', '\r']).to_string())
}

fn section_count(line: &str, name: &str) -> Result<usize, ModelError> {
    line.strip_prefix(name)
        .and_then(|rest| rest.trim().parse().ok())
        .ok_or_else(|| format_err(format!("expected `{name} <count>`, got {line:?}")))
}

pub fn read_model<R: BufRead>(mut r: R) -> Result<NormalizerModel, ModelError> {
    let header = next_line(&mut r)?;
    if header != MODEL_HEADER {
        if header.starts_with("dialekt-model ") {
            return Err(format_err(format!("unsupported version {header:?}")));
        }
        return Err(format_err("not a dialekt model file"));
    }
    if next_line(&mut r)? != "[config]" {
        return Err(format_err("missing [config] section"));
    }
    let mut config = ModelConfig::default();
    let mut chunk_size = None;
    let vocab_line = loop {
        let line = next_line(&mut r)?;
        if line.starts_with("[vocab]") {
            break line;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| format_err(format!("bad config line {line:?}")))?;
        if key == "chunk_size" {
            chunk_size = Some(value.parse::<usize>().map_err(|_| format_err("bad chunk_size"))?);
        } else {
            config.set(key, value)?;
        }
    };
    let chunk_size = chunk_size.ok_or_else(|| format_err("missing chunk_size"))?;
    if !(1..=MAX_CHUNK).contains(&chunk_size) {
        return Err(format_err(format!("chunk_size {chunk_size} out of range")));
    }
    config.validate()?;

    let n_symbols = section_count(&vocab_line, "[vocab]")?;
    let mut symbols = Vec::with_capacity(n_symbols);
    for _ in 0..n_symbols {
        let line = next_line(&mut r)?;
        let c = line
            .strip_prefix("U+")
            .and_then(|h| u32::from_str_radix(h, 16).ok())
            .and_then(char::from_u32)
            .ok_or_else(|| format_err(format!("bad vocab entry {line:?}")))?;
        symbols.push(c);
    }
    let vocab = Vocabulary::from_symbols(symbols);
    if vocab.symbols().len() != n_symbols {
        return Err(format_err("duplicate vocab entries"));
    }

    let mut params = Params::zeros(&config, vocab.len());
    let n_tensors = section_count(&next_line(&mut r)?, "[tensors]")?;
    let names = params.tensor_names();
    if n_tensors != names.len() {
        return Err(format_err(format!("expected {} tensors, found {n_tensors}", names.len())));
    }
    for (name, t) in names.iter().zip(params.tensors()) {
        let line = next_line(&mut r)?;
        let expected = format!("{name} {} {}", t.rows, t.cols);
        if line != expected {
            return Err(format_err(format!("tensor mismatch: expected {expected:?}, got {line:?}")));
        }
    }
    let data_line = next_line(&mut r)?;
    let mut parts = data_line.split(' ');
    let (Some("data"), Some(bytes), Some(crc), None) = (parts.next(), parts.next(), parts.next(), parts.next()) else {
        return Err(format_err(format!("bad data line {data_line:?}")));
    };
    let bytes: usize = bytes.parse().map_err(|_| format_err("bad payload size"))?;
    let crc = u32::from_str_radix(crc, 16).map_err(|_| format_err("bad checksum field"))?;
    if bytes != params.num_parameters() * 8 {
        return Err(format_err("payload size does not match tensor shapes"));
    }
    let mut payload = vec![0u8; bytes];
    r.read_exact(&mut payload).map_err(|_| format_err("truncated payload"))?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra).map_err(|e| format_err(format!("read failed: {e}")))? != 0 {
        return Err(format_err("trailing bytes after payload"));
    }
    if crc32fast::hash(&payload) != crc {
        return Err(format_err("checksum mismatch"));
    }
    let mut chunks = payload.chunks_exact(8);
    for t in params.tensors_mut() {
        for v in t.data.iter_mut() {
            let b = chunks.next().expect("size checked");
            *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
        }
    }
    if !params.is_finite() {
        return Err(format_err("non-finite parameter values"));
    }
    Ok(NormalizerModel { config, vocab, params, chunk_size })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Vocabulary;

    fn tiny() -> NormalizerModel {
        let config = ModelConfig { embedding_dim: 3, hidden_dim: 4, ..Default::default() };
        NormalizerModel::new(config, Vocabulary::from_symbols("abcå".chars()), 2).unwrap()
    }

    fn bytes(m: &NormalizerModel) -> Vec<u8> {
        let mut v = Vec::new();
        write_model(m, &mut v).unwrap();
        v
    }

    #[test]
    fn round_trip_is_exact() {
        let m = tiny();
        let back = read_model(&bytes(&m)[..]).unwrap();
        assert_eq!(back, m);
        let src = ['a', 'b', 'x'];
        assert_eq!(back.translate(&src), m.translate(&src));
    }

    #[test]
    fn rejects_version_and_garbage() {
        let mut b = bytes(&tiny());
        b[15] = b'9';
        assert!(matches!(read_model(&b[..]), Err(ModelError::Format(m)) if m.contains("version")));
        assert!(read_model(&b"hello\n"[..]).is_err());
        assert!(read_model(&b""[..]).is_err());
    }

    #[test]
    fn rejects_truncation_and_corruption() {
        let b = bytes(&tiny());
        assert!(read_model(&b[..b.len() - 3]).is_err());
        let mut c = b.clone();
        let last = c.len() - 1;
        c[last] ^= 0x55;
        assert!(matches!(read_model(&c[..]), Err(ModelError::Format(m)) if m.contains("checksum")));
        let mut extra = b.clone();
        extra.push(0);
        assert!(read_model(&extra[..]).is_err());
    }
}
