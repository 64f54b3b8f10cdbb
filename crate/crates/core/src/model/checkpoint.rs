//! Versioned binary checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "HQNNCKPT"
//! version    u32      (currently 1)
//! config     u32 length + UTF-8 TOML of ModelConfig
//! epoch      u64      epochs completed when written
//! rng        u64 seed, u64 stream, u128 word position
//! n_tensors  u32, then per tensor:
//!              u16 name length + name, u8 trainable, u8 ndim,
//!              u32 × ndim dims, f64 × numel values
//! optimizer  u8 present flag; if 1: u64 step, u32 count,
//!              then count × (f64 first moment, f64 second moment)
//!              arrays shaped like the trainable tensors in order
//! ```
//!
//! Floats are stored as raw bit patterns, so a round trip is bit-exact.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::config::ModelConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::rng::RngState;
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HQNNCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Adam moments in trainable-tensor order.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub step: u64,
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub optimizer: Option<OptimizerState>,
    pub rng: RngState,
    pub epoch: u64,
}

struct Writer(Vec<u8>);

impl Writer {
    fn bytes(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.bytes(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.bytes(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.bytes(&x.to_bits().to_le_bytes());
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::data(format!("checkpoint truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn arr<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.arr::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.arr()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.arr()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.arr()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.arr()?))
    }
    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::data("checkpoint string is not UTF-8"))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::data("checkpoint size overflow"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect())
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer(Vec::new());
        w.bytes(CHECKPOINT_MAGIC);
        w.u32(CHECKPOINT_VERSION);
        let cfg = toml::to_string(&self.config).expect("config serialises");
        w.u32(cfg.len() as u32);
        w.bytes(cfg.as_bytes());
        w.u64(self.epoch);
        w.u64(self.rng.seed);
        w.u64(self.rng.stream);
        w.bytes(&self.rng.word_pos.to_le_bytes());
        w.u32(self.params.len() as u32);
        for (s, t) in self.params.specs().iter().zip(self.params.values()) {
            w.u16(s.name.len() as u16);
            w.bytes(s.name.as_bytes());
            w.u8(s.trainable as u8);
            w.u8(t.ndim() as u8);
            for &d in t.shape() {
                w.u32(d as u32);
            }
            w.f64s(t.data());
        }
        match &self.optimizer {
            None => w.u8(0),
            Some(o) => {
                w.u8(1);
                w.u64(o.step);
                w.u32(o.m.len() as u32);
                for (m, v) in o.m.iter().zip(&o.v) {
                    w.f64s(m.data());
                    w.f64s(v.data());
                }
            }
        }
        w.0
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::data("not a checkpoint file (bad magic)"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::data(format!(
                "checkpoint version {version}, this build reads {CHECKPOINT_VERSION}"
            )));
        }
        let n = r.u32()? as usize;
        let text = r.string(n)?;
        let config: ModelConfig = toml::from_str(&text)
            .map_err(|e| Error::data(format!("checkpoint config: {e}")))?;
        config.validate()?;
        let epoch = r.u64()?;
        let rng = RngState { seed: r.u64()?, stream: r.u64()?, word_pos: r.u128()? };
        let count = r.u32()? as usize;
        let mut named = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.u16()? as usize;
            let name = r.string(len)?;
            let _trainable = r.u8()?;
            let nd = r.u8()? as usize;
            let shape = (0..nd).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let data = r.f64s(shape.iter().product())?;
            named.push((name, Tensor::new(shape, data)?));
        }
        let params = ModelParams::from_named(&config, named)?;
        let optimizer = match r.u8()? {
            0 => None,
            1 => {
                let step = r.u64()?;
                let k = r.u32()? as usize;
                let idx = params.trainable_indices();
                if k != idx.len() {
                    return Err(Error::data(format!(
                        "optimizer holds {k} moment pairs for {} trainable tensors",
                        idx.len()
                    )));
                }
                let (mut m, mut v) = (Vec::with_capacity(k), Vec::with_capacity(k));
                for &i in &idx {
                    let shape = params.values()[i].shape().to_vec();
                    let numel = params.values()[i].len();
                    m.push(Tensor::new(shape.clone(), r.f64s(numel)?)?);
                    v.push(Tensor::new(shape, r.f64s(numel)?)?);
                }
                Some(OptimizerState { step, m, v })
            }
            f => return Err(Error::data(format!("bad optimizer flag {f}"))),
        };
        if r.pos != buf.len() {
            return Err(Error::data(format!("{} trailing bytes in checkpoint", buf.len() - r.pos)));
        }
        Ok(Self { config, params, optimizer, rng, epoch })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path).map_err(|e| Error::file(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut buf = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::file(path, e))?;
        Self::from_bytes(&buf).map_err(|e| match e {
            Error::Data(m) => Error::data(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fails with the differing field names when `expected` disagrees.
    pub fn check_config(&self, expected: &ModelConfig) -> Result<()> {
        let diff = self.config.diff(expected);
        if diff.is_empty() {
            Ok(())
        } else {
            Err(Error::config(format!(
                "checkpoint config mismatch: {}",
                diff.join(", ")
            )))
        }
    }
}
