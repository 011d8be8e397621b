//! Binary model checkpoints.
//!
//! ```text
//! "PRCK" u32:version u16+utf8:model
//! u32:meta_count  meta_count × (u16+utf8:key u16+utf8:value)
//! u32:tensor_count tensor_count × (u16+utf8:name u8:ndim ndim × u32 dims  f64 LE values)
//! ```
//!
//! KNRM stores its frozen kernel bank as the `kernel_mu` and `kernel_sigma`
//! tensors; PACRR stores its shape hyperparameters as metadata.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use thiserror::Error;

use super::{AnyRanker, Kernel, KnrmModel, PacrrHyper, PacrrModel, Params, Ranker, Tensor};

const MAGIC: &[u8; 4] = b"PRCK";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("malformed checkpoint: {0}")]
    Format(String),
}

fn put_str<W: Write>(w: &mut W, s: &str) -> io::Result<()> {
    w.write_all(&(s.len() as u16).to_le_bytes())?;
    w.write_all(s.as_bytes())
}

fn get_bytes<R: Read, const N: usize>(r: &mut R) -> Result<[u8; N], CheckpointError> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32, CheckpointError> {
    Ok(u32::from_le_bytes(get_bytes(r)?))
}

fn get_str<R: Read>(r: &mut R) -> Result<String, CheckpointError> {
    let len = u16::from_le_bytes(get_bytes(r)?) as usize;
    let mut b = vec![0u8; len];
    r.read_exact(&mut b)?;
    String::from_utf8(b).map_err(|_| CheckpointError::Format("non-UTF-8 string".into()))
}

pub fn write_checkpoint<W: Write>(model: &AnyRanker, mut w: W) -> Result<(), CheckpointError> {
    let mut meta: Vec<(String, String)> = Vec::new();
    let mut tensors: Vec<Tensor> = Vec::new();
    match model {
        AnyRanker::Knrm(k) => {
            let mut mu = Tensor::zeros("kernel_mu", &[k.kernels().len()]);
            let mut sigma = Tensor::zeros("kernel_sigma", &[k.kernels().len()]);
            for (i, kern) in k.kernels().iter().enumerate() {
                mu.data[i] = kern.mu;
                sigma.data[i] = kern.sigma;
            }
            tensors.push(mu);
            tensors.push(sigma);
        }
        AnyRanker::Pacrr(p) => {
            let h = p.hyper();
            for (key, v) in [("lq", h.lq), ("ld", h.ld), ("nf", h.nf), ("kmax", h.kmax), ("hidden", h.hidden)] {
                meta.push((key.into(), v.to_string()));
            }
            let sizes: Vec<String> = h.filter_sizes.iter().map(|n| n.to_string()).collect();
            meta.push(("filter_sizes".into(), sizes.join(",")));
        }
    }
    tensors.extend(model.params().tensors.iter().cloned());

    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    put_str(&mut w, model.kind().name())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    for (k, v) in &meta {
        put_str(&mut w, k)?;
        put_str(&mut w, v)?;
    }
    w.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for t in &tensors {
        put_str(&mut w, &t.name)?;
        w.write_all(&[t.shape.len() as u8])?;
        for &d in &t.shape {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        for &x in &t.data {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<AnyRanker, CheckpointError> {
    if &get_bytes::<_, 4>(&mut r)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = get_u32(&mut r)?;
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let kind = get_str(&mut r)?;
    let mut meta = BTreeMap::new();
    for _ in 0..get_u32(&mut r)? {
        let k = get_str(&mut r)?;
        meta.insert(k, get_str(&mut r)?);
    }
    let mut tensors = Vec::new();
    for _ in 0..get_u32(&mut r)? {
        let name = get_str(&mut r)?;
        let ndim = get_bytes::<_, 1>(&mut r)?[0] as usize;
        let shape = (0..ndim).map(|_| get_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>, _>>()?;
        let mut t = Tensor::zeros(name, &shape);
        for x in &mut t.data {
            *x = f64::from_le_bytes(get_bytes(&mut r)?);
            if !x.is_finite() {
                return Err(CheckpointError::Format(format!("non-finite value in {}", t.name)));
            }
        }
        tensors.push(t);
    }

    let fill = |expected: &Params, loaded: Vec<Tensor>| -> Result<Params, CheckpointError> {
        if loaded.len() != expected.tensors.len() {
            return Err(CheckpointError::Format("unexpected tensor count".into()));
        }
        for (e, l) in expected.tensors.iter().zip(&loaded) {
            if e.name != l.name || e.shape != l.shape {
                return Err(CheckpointError::Format(format!(
                    "expected tensor {} {:?}, found {} {:?}",
                    e.name, e.shape, l.name, l.shape
                )));
            }
        }
        Ok(Params { tensors: loaded })
    };

    match kind.as_str() {
        "knrm" => {
            if tensors.len() < 2 || tensors[0].name != "kernel_mu" || tensors[1].name != "kernel_sigma" {
                return Err(CheckpointError::Format("missing kernel bank".into()));
            }
            let rest = tensors.split_off(2);
            let kernels: Vec<Kernel> = tensors[0]
                .data
                .iter()
                .zip(&tensors[1].data)
                .map(|(&mu, &sigma)| Kernel { mu, sigma })
                .collect();
            if kernels.iter().any(|k| k.sigma <= 0.0) {
                return Err(CheckpointError::Format("kernel widths must be positive".into()));
            }
            let mut model = KnrmModel::zeros(kernels);
            let params = fill(model.params(), rest)?;
            *model.params_mut() = params;
            Ok(AnyRanker::Knrm(model))
        }
        "pacrr" => {
            let num = |key: &str| -> Result<usize, CheckpointError> {
                meta.get(key)
                    .and_then(|v| v.parse().ok())
                    .filter(|&v: &usize| v >= 1)
                    .ok_or_else(|| CheckpointError::Format(format!("bad or missing '{key}'")))
            };
            let filter_sizes = meta
                .get("filter_sizes")
                .ok_or_else(|| CheckpointError::Format("missing 'filter_sizes'".into()))?
                .split(',')
                .map(|s| s.parse::<usize>().ok().filter(|&n| n >= 1))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| CheckpointError::Format("bad 'filter_sizes'".into()))?;
            let hyper = PacrrHyper {
                lq: num("lq")?,
                ld: num("ld")?,
                nf: num("nf")?,
                kmax: num("kmax")?,
                hidden: num("hidden")?,
                filter_sizes,
            };
            let mut model = PacrrModel::zeros(hyper);
            let params = fill(model.params(), tensors)?;
            *model.params_mut() = params;
            Ok(AnyRanker::Pacrr(model))
        }
        other => Err(CheckpointError::Format(format!("unknown model '{other}'"))),
    }
}
