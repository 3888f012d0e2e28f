//! Versioned binary tensor files for embeddings and Q-network checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    [u8; 4]   "IVEM" (embeddings) or "IVQN" (Q-network)
//! version  u32
//! d        u32       embedding width
//! n        u32       node count (0 for Q-network files)
//! l        u32       number of trailing weight matrices
//! payload  f32...    column-major matrices
//! ```
//!
//! An embedding file stores the `d x n` embedding matrix followed by `l`
//! message-passing weights of shape `d x d` and, when `l > 0`, the `d x n`
//! input features the network was run on; `l = 0` marks random embeddings.
//! A Q-network file stores `theta1 (2d x d)`, `theta2 (d x 2d)` and their
//! target copies, so `l = 4`. A JSON sidecar next to each file records the
//! configuration that produced it.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Serialize;

use crate::agent::QNetParams;
use crate::embed::{EmbeddingMatrix, GnnParams, Provenance};
use crate::error::{Error, Result};

pub const TENSOR_FORMAT_VERSION: u32 = 1;
const EMBED_MAGIC: &[u8; 4] = b"IVEM";
const QNET_MAGIC: &[u8; 4] = b"IVQN";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Header {
    magic: [u8; 4],
    d: u32,
    n: u32,
    l: u32,
}

fn to_u32(x: usize, what: &str) -> Result<u32> {
    u32::try_from(x).map_err(|_| Error::Format(format!("{what} {x} does not fit the header")))
}

fn write_header(out: &mut impl Write, h: Header) -> Result<()> {
    out.write_all(&h.magic)?;
    for x in [TENSOR_FORMAT_VERSION, h.d, h.n, h.l] {
        out.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_header(input: &mut impl Read, expect: &[u8; 4]) -> Result<Header> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != expect {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(expect)
        )));
    }
    let version = read_u32(input)?;
    if version != TENSOR_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported tensor format version {version} (expected {TENSOR_FORMAT_VERSION})"
        )));
    }
    Ok(Header {
        magic,
        d: read_u32(input)?,
        n: read_u32(input)?,
        l: read_u32(input)?,
    })
}

/// Writes `m` column by column.
fn write_col_major(out: &mut impl Write, m: &Array2<f64>) -> Result<()> {
    for x in m.t().iter() {
        out.write_all(&(*x as f32).to_le_bytes())?;
    }
    Ok(())
}

fn read_col_major(input: &mut impl Read, rows: usize, cols: usize) -> Result<Array2<f64>> {
    let mut buf = vec![0u8; rows * cols * 4];
    input.read_exact(&mut buf)?;
    let vals: Vec<f64> = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    // column-major data is the row-major layout of the transpose
    let t = Array2::from_shape_vec((cols, rows), vals).expect("length matches shape");
    Ok(t.reversed_axes().as_standard_layout().into_owned())
}

fn expect_eof(input: &mut impl Read) -> Result<()> {
    let mut b = [0u8; 1];
    match input.read(&mut b)? {
        0 => Ok(()),
        _ => Err(Error::Format("trailing bytes after tensor payload".into())),
    }
}

/// The network behind a set of trained embeddings.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainedNetwork {
    pub params: GnnParams,
    /// Input features of the coupled graph.
    pub features: EmbeddingMatrix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingArtifact {
    pub embeddings: EmbeddingMatrix,
    /// `None` for random embeddings.
    pub network: Option<TrainedNetwork>,
}

pub fn write_embeddings(path: impl AsRef<Path>, artifact: &EmbeddingArtifact) -> Result<()> {
    let z = &artifact.embeddings;
    let (d, n) = (z.dim(), z.node_count());
    if let Some(net) = &artifact.network {
        let weights = &net.params.weights;
        if weights.is_empty() || weights.iter().any(|w| w.dim() != (d, d)) {
            return Err(Error::Shape {
                what: "gnn weights",
                expected: format!("{d} x {d}"),
                found: format!("{:?}", weights.iter().map(|w| w.dim()).collect::<Vec<_>>()),
            });
        }
        if net.features.node_major().dim() != (n, d) {
            return Err(Error::Shape {
                what: "features",
                expected: format!("{n} x {d}"),
                found: format!("{:?}", net.features.node_major().dim()),
            });
        }
    }
    let mut out = BufWriter::new(File::create(path)?);
    let depth = artifact.network.as_ref().map_or(0, |net| net.params.depth());
    write_header(
        &mut out,
        Header {
            magic: *EMBED_MAGIC,
            d: to_u32(d, "dimension")?,
            n: to_u32(n, "node count")?,
            l: to_u32(depth, "depth")?,
        },
    )?;
    // the d x n matrix in column-major order is the node-major matrix in row order
    let write_node_major = |out: &mut BufWriter<File>, m: &EmbeddingMatrix| -> Result<()> {
        for x in m.node_major().iter() {
            out.write_all(&(*x as f32).to_le_bytes())?;
        }
        Ok(())
    };
    write_node_major(&mut out, z)?;
    if let Some(net) = &artifact.network {
        for w in &net.params.weights {
            write_col_major(&mut out, w)?;
        }
        write_node_major(&mut out, &net.features)?;
    }
    out.flush()?;
    Ok(())
}

fn read_node_major(input: &mut impl Read, d: usize, n: usize, provenance: Provenance) -> Result<EmbeddingMatrix> {
    let m = read_col_major(input, d, n)?.reversed_axes().as_standard_layout().into_owned();
    EmbeddingMatrix::new(m, provenance)
}

pub fn read_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingArtifact> {
    let mut input = BufReader::new(File::open(path)?);
    let h = read_header(&mut input, EMBED_MAGIC)?;
    let (d, n) = (h.d as usize, h.n as usize);
    if d == 0 {
        return Err(Error::Format("embedding width is zero".into()));
    }
    let provenance = if h.l == 0 { Provenance::Random } else { Provenance::Pretrained };
    let embeddings = read_node_major(&mut input, d, n, provenance)?;
    let network = if h.l == 0 {
        None
    } else {
        let weights = (0..h.l)
            .map(|_| read_col_major(&mut input, d, d))
            .collect::<Result<Vec<_>>>()?;
        let features = read_node_major(&mut input, d, n, Provenance::Pretrained)?;
        Some(TrainedNetwork {
            params: GnnParams { weights },
            features,
        })
    };
    expect_eof(&mut input)?;
    Ok(EmbeddingArtifact { embeddings, network })
}

pub fn write_qnet(path: impl AsRef<Path>, params: &QNetParams) -> Result<()> {
    let d = params.dim();
    let mut out = BufWriter::new(File::create(path)?);
    write_header(
        &mut out,
        Header {
            magic: *QNET_MAGIC,
            d: to_u32(d, "dimension")?,
            n: 0,
            l: 4,
        },
    )?;
    for m in [&params.theta1, &params.theta2, &params.target1, &params.target2] {
        write_col_major(&mut out, m)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_qnet(path: impl AsRef<Path>) -> Result<QNetParams> {
    let mut input = BufReader::new(File::open(path)?);
    let h = read_header(&mut input, QNET_MAGIC)?;
    if h.n != 0 || h.l != 4 || h.d == 0 {
        return Err(Error::Format(format!(
            "malformed q-network header: d={}, n={}, l={}",
            h.d, h.n, h.l
        )));
    }
    let d = h.d as usize;
    let theta1 = read_col_major(&mut input, 2 * d, d)?;
    let theta2 = read_col_major(&mut input, d, 2 * d)?;
    let target1 = read_col_major(&mut input, 2 * d, d)?;
    let target2 = read_col_major(&mut input, d, 2 * d)?;
    expect_eof(&mut input)?;
    Ok(QNetParams {
        theta1,
        theta2,
        target1,
        target2,
    })
}

/// `emb.bin` -> `emb.bin.json`.
pub fn sidecar_path(path: impl AsRef<Path>) -> PathBuf {
    let mut s = path.as_ref().as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_sidecar(path: impl AsRef<Path>, config: &impl Serialize) -> Result<()> {
    let mut json = serde_json::to_string_pretty(config)?;
    json.push('\n');
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}
