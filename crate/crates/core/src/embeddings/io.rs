use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::EmbeddingTable;
use crate::corpus::{Vocabulary, PAD_TOKEN, UNK_TOKEN};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"EAVEMB\0\0";
const VERSION: u32 = 1;

/// Word2vec-style text: a `V d` header, then one `token x1 ... xd` line per
/// row of the input vectors. Floats are written in shortest round-trip form.
pub fn write_text(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        writeln!(w, "{} {}", table.len(), table.dim())?;
        for (i, tok) in table.vocab().tokens().iter().enumerate() {
            w.write_all(tok.as_bytes())?;
            for x in table.input_row(i) {
                write!(w, " {x}")?;
            }
            w.write_all(b"\n")?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

/// Reads the text format. Files from other tools that lack the reserved
/// `<pad>`/`<unk>` rows get zero rows inserted in front. Output vectors and
/// frequencies are not part of the format and load as zero.
pub fn read_text(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty embedding file", path.display())))?
        .map_err(|e| Error::io(path, e))?;
    let mut parts = header.split_whitespace().map(str::parse::<usize>);
    let (rows, dim) = match (parts.next(), parts.next(), parts.next()) {
        (Some(Ok(v)), Some(Ok(d)), None) if d > 0 => (v, d),
        _ => return Err(Error::Data(format!("{}: bad header {header:?}", path.display()))),
    };
    let mut tokens = Vec::with_capacity(rows + 2);
    let mut input = Vec::with_capacity((rows + 2) * dim);
    for (lineno, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(' ').filter(|s| !s.is_empty());
        let token = fields.next().unwrap_or_default().to_string();
        let before = input.len();
        for f in fields {
            let x: f32 = f.parse().map_err(|_| {
                Error::Data(format!("{}:{}: bad component {f:?}", path.display(), lineno + 2))
            })?;
            input.push(x);
        }
        if input.len() - before != dim {
            return Err(Error::Data(format!(
                "{}:{}: expected {dim} components, found {}",
                path.display(),
                lineno + 2,
                input.len() - before
            )));
        }
        tokens.push(token);
    }
    if tokens.len() != rows {
        return Err(Error::Data(format!(
            "{}: header declares {rows} rows but {} were read",
            path.display(),
            tokens.len()
        )));
    }
    let has_reserved = tokens.len() >= 2 && tokens[0] == PAD_TOKEN && tokens[1] == UNK_TOKEN;
    if !has_reserved {
        let mut padded = vec![0.0f32; 2 * dim];
        padded.extend(input);
        input = padded;
        let mut all = vec![PAD_TOKEN.to_string(), UNK_TOKEN.to_string()];
        all.extend(tokens);
        tokens = all;
    }
    let frequency = vec![0; tokens.len()];
    let vocab = Vocabulary::from_parts(tokens, frequency)?;
    let output = vec![0.0; input.len()];
    EmbeddingTable::new(vocab, dim, input, output)
}

/// Binary layout, all little-endian: 8-byte magic, u32 version, u64 V, u64 d;
/// then V entries of (u32 byte length, UTF-8 token, u64 frequency); then the
/// V*d input floats and the V*d output floats as f32.
pub fn write_binary(path: impl AsRef<Path>, table: &EmbeddingTable) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut body = || -> std::io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(table.len() as u64).to_le_bytes())?;
        w.write_all(&(table.dim() as u64).to_le_bytes())?;
        let vocab = table.vocab();
        for (tok, &freq) in vocab.tokens().iter().zip(vocab.frequencies()) {
            w.write_all(&(tok.len() as u32).to_le_bytes())?;
            w.write_all(tok.as_bytes())?;
            w.write_all(&freq.to_le_bytes())?;
        }
        for x in table.input_vectors().iter().chain(table.output_vectors()) {
            w.write_all(&x.to_le_bytes())?;
        }
        w.flush()
    };
    body().map_err(|e| Error::io(path, e))
}

pub fn read_binary(path: impl AsRef<Path>) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let truncated = |e: std::io::Error| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Data(format!("{}: truncated embedding file", path.display()))
        } else {
            Error::io(path, e)
        }
    };
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("{}: not a binary embedding file", path.display())));
    }
    let version = read_u32(&mut r).map_err(truncated)?;
    if version != VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported embedding format version {version}",
            path.display()
        )));
    }
    let rows = read_u64(&mut r).map_err(truncated)? as usize;
    let dim = read_u64(&mut r).map_err(truncated)? as usize;
    let mut tokens = Vec::with_capacity(rows);
    let mut freqs = Vec::with_capacity(rows);
    for _ in 0..rows {
        let len = read_u32(&mut r).map_err(truncated)? as usize;
        let mut buf = vec![0u8; len];
        r.read_exact(&mut buf).map_err(truncated)?;
        let tok = String::from_utf8(buf)
            .map_err(|_| Error::Data(format!("{}: token is not UTF-8", path.display())))?;
        tokens.push(tok);
        freqs.push(read_u64(&mut r).map_err(truncated)?);
    }
    let mut floats = |n: usize| -> Result<Vec<f32>> {
        let mut bytes = vec![0u8; n * 4];
        r.read_exact(&mut bytes).map_err(truncated)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    };
    let input = floats(rows * dim)?;
    let output = floats(rows * dim)?;
    let vocab = Vocabulary::from_parts(tokens, freqs)?;
    EmbeddingTable::new(vocab, dim, input, output)
}

fn read_u32(r: &mut impl Read) -> std::io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> std::io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
