//! Binary artifacts: feature matrices (`SPGF`), networks (`SPGM`), GMM pairs
//! (`SPGG`) and SVMs (`SPGS`). All little-endian, each prefixed by a 4-byte
//! magic and a `u32` version.

use std::path::Path;

use spoofguard_core::features::NormStats;
use spoofguard_core::gmm::{Component, Covariance, FullCovariance, GmmModel, GmmPair};
use spoofguard_core::mlp::{Activation, Layer, Mlp};
use spoofguard_core::svm::{SvmModel, SvmParams};
use spoofguard_core::Matrix;

use crate::error::{Error, IoContext, Result};

pub const VERSION: u32 = 1;

const FEATURES: &[u8; 4] = b"SPGF";
const NETWORK: &[u8; 4] = b"SPGM";
const MIXTURES: &[u8; 4] = b"SPGG";
const SVM: &[u8; 4] = b"SPGS";

#[derive(Default)]
struct Writer(Vec<u8>);

impl Writer {
    fn header(magic: &[u8; 4]) -> Self {
        let mut w = Writer(magic.to_vec());
        w.u32(VERSION);
        w
    }

    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("dimension exceeds u32"));
    }

    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn open(buf: &'a [u8], path: &'a Path, magic: &[u8; 4], what: &'static str) -> Result<Self> {
        let mut r = Reader { buf, pos: 0, path, what };
        if r.take(4)? != magic {
            return Err(r.err(format!("bad magic, expected {:?}", std::str::from_utf8(magic).unwrap())));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        Ok(r)
    }

    fn err(&self, reason: String) -> Error {
        Error::format(self.path, self.what, reason)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| self.err(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| self.err("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    fn finish(self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.err(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).at(path)
}

fn write(path: &Path, bytes: Vec<u8>) -> Result<()> {
    std::fs::write(path, bytes).at(path)
}

/// Feature matrices are stored as `f32`; values are rounded on write.
pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut w = Writer::header(FEATURES);
    w.len(m.rows());
    w.len(m.cols());
    for &v in m.as_slice() {
        w.0.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.0
}

pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let mut r = Reader::open(bytes, path, FEATURES, "feature file")?;
    let (rows, cols) = (r.len()?, r.len()?);
    let n = rows.checked_mul(cols).and_then(|n| n.checked_mul(4)).ok_or_else(|| r.err("size overflow".into()))?;
    let data = r.take(n)?.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap()))).collect();
    r.finish()?;
    Ok(Matrix::from_vec(rows, cols, data)?)
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    write(path, encode_matrix(m))
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    decode_matrix(&read(path)?, path)
}

fn activation_tag(a: Activation) -> u32 {
    match a {
        Activation::Logistic => 0,
        Activation::Softmax => 1,
    }
}

pub fn encode_mlp(model: &Mlp) -> Vec<u8> {
    let mut w = Writer::header(NETWORK);
    w.u64(model.seed());
    w.len(model.layers().len());
    for layer in model.layers() {
        w.len(layer.fan_in());
        w.len(layer.fan_out());
        w.u32(activation_tag(layer.activation));
        w.f64s(layer.weights.as_slice());
        w.f64s(&layer.biases);
    }
    match model.norm_stats() {
        Some(stats) => {
            w.u32(1);
            w.len(stats.dim());
            w.f64s(&stats.mean);
            w.f64s(&stats.std);
        }
        None => w.u32(0),
    }
    w.0
}

pub fn decode_mlp(bytes: &[u8], path: &Path) -> Result<Mlp> {
    let mut r = Reader::open(bytes, path, NETWORK, "network file")?;
    let seed = r.u64()?;
    let n_layers = r.len()?;
    let mut layers = Vec::with_capacity(n_layers.min(64));
    for _ in 0..n_layers {
        let (fan_in, fan_out) = (r.len()?, r.len()?);
        let activation = match r.u32()? {
            0 => Activation::Logistic,
            1 => Activation::Softmax,
            t => return Err(r.err(format!("unknown activation tag {t}"))),
        };
        let weights = Matrix::from_vec(fan_in, fan_out, r.f64s(fan_in * fan_out)?)?;
        let biases = r.f64s(fan_out)?;
        layers.push(Layer { weights, biases, activation });
    }
    let norm = match r.u32()? {
        0 => None,
        1 => {
            let dim = r.len()?;
            Some(NormStats { mean: r.f64s(dim)?, std: r.f64s(dim)? })
        }
        t => return Err(r.err(format!("bad normalization flag {t}"))),
    };
    r.finish()?;
    Ok(Mlp::from_layers(layers, norm, seed)?)
}

pub fn write_mlp(path: &Path, model: &Mlp) -> Result<()> {
    write(path, encode_mlp(model))
}

pub fn read_mlp(path: &Path) -> Result<Mlp> {
    decode_mlp(&read(path)?, path)
}

fn encode_gmm(w: &mut Writer, model: &GmmModel) {
    let full = matches!(model.components()[0].covariance, Covariance::Full(_));
    w.len(model.n_components());
    w.len(model.dim());
    w.u32(u32::from(full));
    for c in model.components() {
        w.f64s(&[c.weight]);
    }
    for c in model.components() {
        w.f64s(&c.mean);
    }
    for c in model.components() {
        match &c.covariance {
            Covariance::Diagonal(v) => w.f64s(v),
            Covariance::Full(f) => w.f64s(f.matrix().as_slice()),
        }
    }
}

fn decode_gmm(r: &mut Reader<'_>) -> Result<GmmModel> {
    let (k, dim) = (r.len()?, r.len()?);
    let full = match r.u32()? {
        0 => false,
        1 => true,
        t => return Err(r.err(format!("unknown covariance tag {t}"))),
    };
    let weights = r.f64s(k)?;
    let means = r.f64s(k * dim)?;
    let cov_len = if full { dim * dim } else { dim };
    let mut components = Vec::with_capacity(k);
    for (i, &weight) in weights.iter().enumerate() {
        let values = r.f64s(cov_len)?;
        let covariance = if full {
            Covariance::Full(FullCovariance::new(Matrix::from_vec(dim, dim, values)?)?)
        } else {
            Covariance::Diagonal(values)
        };
        components.push(Component { weight, mean: means[i * dim..(i + 1) * dim].to_vec(), covariance });
    }
    Ok(GmmModel::new(components)?)
}

/// Human model first, then spoof.
pub fn encode_gmm_pair(pair: &GmmPair) -> Vec<u8> {
    let mut w = Writer::header(MIXTURES);
    w.u32(2);
    encode_gmm(&mut w, &pair.human);
    encode_gmm(&mut w, &pair.spoof);
    w.0
}

pub fn decode_gmm_pair(bytes: &[u8], path: &Path) -> Result<GmmPair> {
    let mut r = Reader::open(bytes, path, MIXTURES, "GMM file")?;
    let n = r.u32()?;
    if n != 2 {
        return Err(r.err(format!("expected 2 models, found {n}")));
    }
    let human = decode_gmm(&mut r)?;
    let spoof = decode_gmm(&mut r)?;
    r.finish()?;
    Ok(GmmPair::new(human, spoof)?)
}

pub fn write_gmm_pair(path: &Path, pair: &GmmPair) -> Result<()> {
    write(path, encode_gmm_pair(pair))
}

pub fn read_gmm_pair(path: &Path) -> Result<GmmPair> {
    decode_gmm_pair(&read(path)?, path)
}

pub fn encode_svm(model: &SvmModel) -> Vec<u8> {
    let mut w = Writer::header(SVM);
    let params = model.params();
    w.f64s(&[params.c, params.gamma]);
    w.len(model.coef().len());
    w.len(model.dim());
    w.f64s(model.support_vectors().as_slice());
    w.f64s(model.coef());
    w.f64s(&[model.bias()]);
    w.0
}

pub fn decode_svm(bytes: &[u8], path: &Path) -> Result<SvmModel> {
    let mut r = Reader::open(bytes, path, SVM, "SVM file")?;
    let (c, gamma) = (r.f64()?, r.f64()?);
    let (m, dim) = (r.len()?, r.len()?);
    let svs = Matrix::from_vec(m, dim, r.f64s(m * dim)?)?;
    let coef = r.f64s(m)?;
    let bias = r.f64()?;
    r.finish()?;
    Ok(SvmModel::new(svs, coef, bias, SvmParams::new(c, gamma)?)?)
}

pub fn write_svm(path: &Path, model: &SvmModel) -> Result<()> {
    write(path, encode_svm(model))
}

pub fn read_svm(path: &Path) -> Result<SvmModel> {
    decode_svm(&read(path)?, path)
}
