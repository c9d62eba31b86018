//! Binary model files.
//!
//! Layout: `RLNK`, format version (u32 LE), header length (u64 LE), UTF-8
//! JSON header, then a data area of row-major f64 LE matrices. Section
//! offsets in the header are byte offsets from the start of the data area.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::Idf;
use crate::embedding::{EmbeddingConfig, EmbeddingModel};
use crate::error::{Error, Result};
use crate::inference::LabelFrequencies;
use crate::kernel::{FeatureMap, KernelFamily};
use crate::link::{LinkModel, LossKind};
use crate::pipeline::{Pipeline, PipelineConfig};
use crate::tensor::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"RLNK";
pub const FORMAT_VERSION: u32 = 1;

const PREAMBLE: usize = 4 + 4 + 8;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub offset: u64,
    pub rows: u64,
    pub cols: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineHeader {
    config: PipelineConfig,
    n_features: usize,
    n_labels: usize,
    rank: usize,
    family: Option<KernelFamily>,
    bandwidth: Option<f64>,
    loss: LossKind,
    lambda_v: f64,
    seed: u64,
    n_train: usize,
    sections: Vec<Section>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingHeader {
    config: EmbeddingConfig,
    n_features: usize,
    n_labels: usize,
    rank: usize,
    seed: u64,
    sections: Vec<Section>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Header {
    Pipeline(PipelineHeader),
    Embedding(EmbeddingHeader),
}

#[derive(Default)]
struct DataArea {
    sections: Vec<Section>,
    bytes: Vec<u8>,
}

impl DataArea {
    fn push(&mut self, name: &str, rows: usize, cols: usize, values: &[f64]) {
        debug_assert_eq!(rows * cols, values.len());
        self.sections.push(Section {
            name: name.to_string(),
            offset: self.bytes.len() as u64,
            rows: rows as u64,
            cols: cols as u64,
        });
        self.bytes.reserve(values.len() * 8);
        for v in values {
            self.bytes.extend_from_slice(&v.to_le_bytes());
        }
    }

    fn matrix(&mut self, name: &str, m: &DenseMatrix) {
        self.push(name, m.rows(), m.cols(), m.as_slice());
    }

    fn vector(&mut self, name: &str, v: &[f64]) {
        self.push(name, 1, v.len(), v);
    }
}

fn encode(header: &Header, data: &DataArea) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header).map_err(|e| Error::Format(format!("header encoding: {e}")))?;
    let mut out = Vec::with_capacity(PREAMBLE + json.len() + data.bytes.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&data.bytes);
    Ok(out)
}

fn format_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

fn decode(bytes: &[u8]) -> Result<(Header, &[u8])> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return format_err("not a model file (bad magic bytes)");
    }
    if bytes.len() < PREAMBLE {
        return format_err("truncated model file: incomplete preamble");
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return format_err(format!("unsupported model format version {version} (expected {FORMAT_VERSION})"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let rest = &bytes[PREAMBLE..];
    if header_len > rest.len() as u64 {
        return format_err(format!(
            "truncated model file: header needs {header_len} bytes, {} remain",
            rest.len()
        ));
    }
    let (json, data) = rest.split_at(header_len as usize);
    let header: Header =
        serde_json::from_slice(json).map_err(|e| Error::Format(format!("invalid model header: {e}")))?;
    Ok((header, data))
}

struct Sections<'a> {
    table: &'a [Section],
    data: &'a [u8],
}

impl<'a> Sections<'a> {
    fn new(table: &'a [Section], data: &'a [u8]) -> Result<Self> {
        let mut end = 0u64;
        for s in table {
            let len = s
                .rows
                .checked_mul(s.cols)
                .and_then(|n| n.checked_mul(8))
                .and_then(|n| n.checked_add(s.offset));
            match len {
                Some(e) if e <= data.len() as u64 => end = end.max(e),
                Some(_) => {
                    return format_err(format!(
                        "truncated model file: section '{}' extends past the end of the data",
                        s.name
                    ))
                }
                None => return format_err(format!("section '{}' has an invalid extent", s.name)),
            }
        }
        if end != data.len() as u64 {
            return format_err(format!("{} unexpected trailing bytes", data.len() as u64 - end));
        }
        Ok(Sections { table, data })
    }

    fn find(&self, name: &str) -> Option<&'a Section> {
        self.table.iter().find(|s| s.name == name)
    }

    fn values(&self, s: &Section) -> Vec<f64> {
        let start = s.offset as usize;
        let len = (s.rows * s.cols) as usize;
        self.data[start..start + len * 8]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect()
    }

    fn matrix_opt(&self, name: &str, rows: usize, cols: usize) -> Result<Option<DenseMatrix>> {
        let Some(s) = self.find(name) else { return Ok(None) };
        if (s.rows, s.cols) != (rows as u64, cols as u64) {
            return format_err(format!(
                "dimension mismatch: section '{name}' is {}x{}, header implies {rows}x{cols}",
                s.rows, s.cols
            ));
        }
        DenseMatrix::from_vec(rows, cols, self.values(s))
            .map(Some)
            .map_err(|e| Error::Format(format!("section '{name}': {e}")))
    }

    fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<DenseMatrix> {
        self.matrix_opt(name, rows, cols)?
            .ok_or_else(|| Error::Format(format!("missing section '{name}'")))
    }

    fn vector(&self, name: &str, len: usize) -> Result<Vec<f64>> {
        Ok(self.matrix(name, 1, len)?.into_vec())
    }

    fn vector_any(&self, name: &str) -> Result<Vec<f64>> {
        let s = self
            .find(name)
            .ok_or_else(|| Error::Format(format!("missing section '{name}'")))?;
        if s.rows != 1 {
            return format_err(format!("section '{name}' must be a single row"));
        }
        self.vector(name, s.cols as usize)
    }
}

pub fn pipeline_to_bytes(p: &Pipeline) -> Result<Vec<u8>> {
    p.validate()?;
    let mut data = DataArea::default();
    if let Some(u) = &p.label_projector {
        data.matrix("U", u);
    }
    data.matrix("W", &p.activation_projector);
    if let Some(map) = &p.feature_map {
        data.matrix("R", &map.directions);
        data.vector("b", &map.biases);
    }
    data.matrix("V", &p.link.weights);
    data.vector("sigma", &p.sigma);
    data.vector("label_frequencies", &p.label_frequencies.p);
    if let Some(idf) = &p.idf {
        data.vector("idf", &idf.weights);
    }
    let header = Header::Pipeline(PipelineHeader {
        config: p.config.clone(),
        n_features: p.n_features,
        n_labels: p.n_labels,
        rank: p.activation_dim(),
        family: p.feature_map.as_ref().map(|m| m.family),
        bandwidth: p.feature_map.as_ref().map(|m| m.bandwidth),
        loss: p.link.loss,
        lambda_v: p.link.lambda_v,
        seed: p.config.seed,
        n_train: p.label_frequencies.n_train,
        sections: data.sections.clone(),
    });
    encode(&header, &data)
}

pub fn pipeline_from_bytes(bytes: &[u8]) -> Result<Pipeline> {
    let (header, data) = decode(bytes)?;
    let h = match header {
        Header::Pipeline(h) => h,
        Header::Embedding(_) => return format_err("file holds an embedding, not a trained pipeline"),
    };
    let sec = Sections::new(&h.sections, data)?;
    let (d, c, k) = (h.n_features, h.n_labels, h.rank);
    let label_projector = sec.matrix_opt("U", c, k)?;
    let w = sec.matrix("W", d, k)?;
    let feature_map = match (h.family, h.bandwidth) {
        (Some(family), Some(bandwidth)) => {
            let s = sec
                .find("R")
                .ok_or_else(|| Error::Format("missing section 'R'".into()))?
                .cols as usize;
            let r = sec.matrix("R", k, s)?;
            let b = sec.vector("b", s)?;
            Some(FeatureMap::from_parts(r, b, family, bandwidth)?)
        }
        (None, None) => None,
        _ => return format_err("kernel family and bandwidth must both be present or absent"),
    };
    let s = feature_map.as_ref().map_or(k, |m| m.n_features());
    let v = sec.matrix("V", s, c)?;
    let sigma = sec.vector_any("sigma")?;
    let p = sec.vector("label_frequencies", c)?;
    let idf = sec.matrix_opt("idf", 1, d)?.map(|m| Idf { weights: m.into_vec() });
    if h.config.seed != h.seed {
        return format_err("header seed disagrees with configuration");
    }
    let pipeline = Pipeline {
        config: h.config,
        n_features: d,
        n_labels: c,
        label_projector,
        sigma,
        activation_projector: w,
        feature_map,
        link: LinkModel {
            weights: v,
            loss: h.loss,
            lambda_v: h.lambda_v,
        },
        label_frequencies: LabelFrequencies { p, n_train: h.n_train },
        idf,
    };
    pipeline.validate()?;
    Ok(pipeline)
}

/// Writes to a temporary file in the target directory, then renames it.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("invalid output path {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    let result = (|| -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(Error::from)
}

pub fn save_pipeline(p: &Pipeline, path: &Path) -> Result<()> {
    write_atomic(path, &pipeline_to_bytes(p)?)
}

pub fn load_pipeline(path: &Path) -> Result<Pipeline> {
    let bytes = fs::read(path)?;
    pipeline_from_bytes(&bytes)
}

/// Embedding-only artifact: projectors and spectrum estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct StoredEmbedding {
    pub model: EmbeddingModel,
    pub sigma_ext: Vec<f64>,
}

pub fn save_embedding(e: &StoredEmbedding, path: &Path) -> Result<()> {
    let m = &e.model;
    let mut data = DataArea::default();
    data.matrix("U", &m.label_projector);
    data.matrix("W", &m.feature_projector);
    data.vector("sigma", &m.sigma);
    data.vector("sigma_ext", &e.sigma_ext);
    let header = Header::Embedding(EmbeddingHeader {
        config: m.config,
        n_features: m.feature_projector.rows(),
        n_labels: m.label_projector.rows(),
        rank: m.rank(),
        seed: m.seed,
        sections: data.sections.clone(),
    });
    write_atomic(path, &encode(&header, &data)?)
}

pub fn load_embedding(path: &Path) -> Result<StoredEmbedding> {
    let bytes = fs::read(path)?;
    let (header, data) = decode(&bytes)?;
    let h = match header {
        Header::Embedding(h) => h,
        Header::Pipeline(_) => return format_err("file holds a trained pipeline, not an embedding"),
    };
    let sec = Sections::new(&h.sections, data)?;
    let u = sec.matrix("U", h.n_labels, h.rank)?;
    let w = sec.matrix("W", h.n_features, h.rank)?;
    let sigma = sec.vector("sigma", h.rank)?;
    let sigma_ext = sec.vector_any("sigma_ext")?;
    Ok(StoredEmbedding {
        model: EmbeddingModel {
            label_projector: u,
            feature_projector: w,
            sigma,
            config: h.config,
            seed: h.seed,
        },
        sigma_ext,
    })
}
