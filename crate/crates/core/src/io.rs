//! PTTK1 binary container.
//!
//! Layout, all integers little-endian `u64` and all reals little-endian IEEE `f64`:
//!
//! ```text
//! "PTTK1" | version | kind | section count | sections...
//! section = tag | payload length in bytes | payload | CRC-32 of payload (u32)
//! ```
//!
//! A matrix payload is `rows, cols` followed by the column-major entries; a tensor payload is
//! `order, dims..` followed by the entries in little-endian multi-index order. Decoding
//! reproduces every stored value bit for bit.

use std::fs;
use std::path::Path;

use crate::chebyshev::{ChebyshevGrid, Interval};
use crate::error::{ContainerError, Error, Result};
use crate::global::GlobalFactorization;
use crate::kernels::{KernelFamily, KernelSpec, ProblemGeometry};
use crate::parametric::{FactorizationMeta, ParametricFactorization};
use crate::tensor::{DenseTensor, RealMatrix};
use crate::tt::TtTensor;

pub const MAGIC: &[u8; 5] = b"PTTK1";
pub const VERSION: u64 = 1;

const KIND_TT: u64 = 1;
const KIND_PARAMETRIC: u64 = 2;
const KIND_GLOBAL: u64 = 3;

const TAG_META: u64 = 1;
const TAG_S: u64 = 2;
const TAG_T: u64 = 3;
const TAG_CORES: u64 = 4;
const TAG_GRID: u64 = 5;
const TAG_Q: u64 = 6;
const TAG_R: u64 = 7;
const TAG_SPLIT: u64 = 8;

/// Anything a PTTK1 file can hold.
#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Tt(TtTensor),
    Parametric(ParametricFactorization),
    Global(GlobalFactorization),
}

#[derive(Default)]
struct Enc(Vec<u8>);

impl Enc {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64s(&mut self, v: &[f64]) {
        for &x in v {
            self.f64(x);
        }
    }
    fn opt_f64(&mut self, v: Option<f64>) {
        self.u64(v.is_some() as u64);
        self.f64(v.unwrap_or(0.0));
    }
    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.0.extend_from_slice(s.as_bytes());
    }
    fn matrix(&mut self, m: &RealMatrix) {
        self.usize(m.nrows());
        self.usize(m.ncols());
        self.f64s(m.as_slice());
    }
    fn tensor(&mut self, t: &DenseTensor) {
        self.usize(t.order());
        for &d in t.shape() {
            self.usize(d);
        }
        self.f64s(t.data());
    }
    fn tensors(&mut self, ts: &[DenseTensor]) {
        self.usize(ts.len());
        for t in ts {
            self.tensor(t);
        }
    }
    fn intervals(&mut self, ivs: &[Interval]) {
        self.usize(ivs.len());
        for iv in ivs {
            self.f64(iv.lo);
            self.f64(iv.hi);
        }
    }
}

struct Dec<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Dec<'a> {
    fn new(buf: &'a [u8], what: &'static str) -> Self {
        Self { buf, what }
    }
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(ContainerError::Truncated(self.what).into());
        }
        let (head, rest) = self.buf.split_at(n);
        self.buf = rest;
        Ok(head)
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| malformed(format!("size {v} does not fit in memory")))
    }
    /// A count of items of `item` bytes each that must still fit in the buffer.
    fn count(&mut self, item: usize) -> Result<usize> {
        let n = self.usize()?;
        if n.checked_mul(item).map_or(true, |b| b > self.buf.len()) {
            return Err(ContainerError::Truncated(self.what).into());
        }
        Ok(n)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("eight bytes")))
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| malformed("length overflow".into()))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes"))).collect())
    }
    fn opt_f64(&mut self) -> Result<Option<f64>> {
        let some = self.u64()? != 0;
        let v = self.f64()?;
        Ok(some.then_some(v))
    }
    fn str(&mut self) -> Result<String> {
        let n = self.count(1)?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| malformed("invalid UTF-8".into()))
    }
    fn matrix(&mut self) -> Result<RealMatrix> {
        let (r, c) = (self.usize()?, self.usize()?);
        let len = r.checked_mul(c).ok_or_else(|| malformed("matrix size overflow".into()))?;
        Ok(RealMatrix::from_vec(r, c, self.f64s(len)?))
    }
    fn tensor(&mut self) -> Result<DenseTensor> {
        let order = self.count(8)?;
        let shape = (0..order).map(|_| self.usize()).collect::<Result<Vec<_>>>()?;
        let len = shape.iter().try_fold(1usize, |a, &d| a.checked_mul(d)).ok_or_else(|| malformed("tensor size overflow".into()))?;
        DenseTensor::new(shape, self.f64s(len)?)
    }
    fn tensors(&mut self) -> Result<Vec<DenseTensor>> {
        let n = self.count(8)?;
        (0..n).map(|_| self.tensor()).collect()
    }
    fn intervals(&mut self) -> Result<Vec<Interval>> {
        let n = self.count(16)?;
        (0..n).map(|_| Interval::new(self.f64()?, self.f64()?)).collect()
    }
    fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(malformed(format!("{} trailing bytes in {}", self.buf.len(), self.what)))
        }
    }
}

fn malformed(msg: String) -> Error {
    ContainerError::Malformed(msg).into()
}

fn container(kind: u64, sections: &[(u64, Vec<u8>)]) -> Vec<u8> {
    let mut out = Enc::default();
    out.0.extend_from_slice(MAGIC);
    out.u64(VERSION);
    out.u64(kind);
    out.usize(sections.len());
    for (tag, payload) in sections {
        out.u64(*tag);
        out.usize(payload.len());
        out.0.extend_from_slice(payload);
        out.0.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
    }
    out.0
}

/// Splits a container into its kind and verified sections.
fn sections(bytes: &[u8]) -> Result<(u64, Vec<(u64, &[u8])>)> {
    let mut d = Dec::new(bytes, "header");
    if d.take(MAGIC.len())? != MAGIC {
        return Err(ContainerError::BadMagic.into());
    }
    let version = d.u64()?;
    if version != VERSION {
        return Err(ContainerError::Version { found: version, expected: VERSION }.into());
    }
    let kind = d.u64()?;
    let count = d.count(20)?;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        d.what = "section header";
        let tag = d.u64()?;
        let len = d.usize()?;
        d.what = "section payload";
        let payload = d.take(len)?;
        let crc = u32::from_le_bytes(d.take(4)?.try_into().expect("four bytes"));
        if crc != crc32fast::hash(payload) {
            return Err(ContainerError::Checksum { section: tag }.into());
        }
        out.push((tag, payload));
    }
    d.what = "container";
    d.finish()?;
    Ok((kind, out))
}

fn section<'a>(secs: &[(u64, &'a [u8])], tag: u64) -> Result<&'a [u8]> {
    secs.iter().find(|(t, _)| *t == tag).map(|(_, p)| *p).ok_or_else(|| malformed(format!("missing section {tag}")))
}

fn encode_meta(m: &FactorizationMeta) -> Vec<u8> {
    let mut e = Enc::default();
    match &m.kernel {
        Some(k) => {
            e.str(k.family.name());
            e.opt_f64(k.length_scale);
            e.opt_f64(k.nu);
        }
        None => e.str(""),
    }
    e.intervals(&m.geometry.source);
    e.intervals(&m.geometry.target);
    e.intervals(&m.geometry.theta);
    e.usize(m.n);
    e.f64(m.eps);
    e.u64(m.seed);
    e.u64(m.converged as u64);
    e.usize(m.cross_ranks.len());
    for &r in &m.cross_ranks {
        e.usize(r);
    }
    e.usize(m.sweeps);
    e.f64(m.sample_error);
    e.u64(m.evaluations);
    e.f64(m.cross_seconds);
    e.f64(m.total_seconds);
    e.0
}

fn decode_meta(bytes: &[u8]) -> Result<FactorizationMeta> {
    let mut d = Dec::new(bytes, "metadata");
    let family = d.str()?;
    let kernel = if family.is_empty() {
        None
    } else {
        let family: KernelFamily = family.parse()?;
        Some(KernelSpec { family, length_scale: d.opt_f64()?, nu: d.opt_f64()? })
    };
    let geometry = ProblemGeometry::new(d.intervals()?, d.intervals()?, d.intervals()?)?;
    let n = d.usize()?;
    let eps = d.f64()?;
    let seed = d.u64()?;
    let converged = d.u64()? != 0;
    let nr = d.count(8)?;
    let cross_ranks = (0..nr).map(|_| d.usize()).collect::<Result<Vec<_>>>()?;
    let meta = FactorizationMeta {
        kernel,
        geometry,
        n,
        eps,
        seed,
        converged,
        cross_ranks,
        sweeps: d.usize()?,
        sample_error: d.f64()?,
        evaluations: d.u64()?,
        cross_seconds: d.f64()?,
        total_seconds: d.f64()?,
    };
    d.finish()?;
    Ok(meta)
}

fn encode_grid(g: &ChebyshevGrid) -> Vec<u8> {
    let mut e = Enc::default();
    e.usize(g.n());
    e.intervals(g.intervals());
    e.0
}

fn decode_grid(bytes: &[u8]) -> Result<ChebyshevGrid> {
    let mut d = Dec::new(bytes, "parameter grid");
    let n = d.usize()?;
    let ivs = d.intervals()?;
    d.finish()?;
    ChebyshevGrid::new(n, ivs)
}

fn encoded(f: impl FnOnce(&mut Enc)) -> Vec<u8> {
    let mut e = Enc::default();
    f(&mut e);
    e.0
}

fn decoded<T>(bytes: &[u8], what: &'static str, f: impl FnOnce(&mut Dec) -> Result<T>) -> Result<T> {
    let mut d = Dec::new(bytes, what);
    let v = f(&mut d)?;
    d.finish()?;
    Ok(v)
}

impl Artifact {
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Artifact::Tt(t) => container(KIND_TT, &[(TAG_CORES, encoded(|e| e.tensors(t.cores())))]),
            Artifact::Parametric(f) => container(
                KIND_PARAMETRIC,
                &[
                    (TAG_META, encode_meta(&f.meta)),
                    (TAG_S, encoded(|e| e.matrix(&f.s))),
                    (TAG_T, encoded(|e| e.matrix(&f.t))),
                    (TAG_CORES, encoded(|e| e.tensors(&f.param_cores))),
                    (TAG_GRID, encode_grid(&f.param_grid)),
                ],
            ),
            Artifact::Global(g) => container(
                KIND_GLOBAL,
                &[
                    (TAG_META, encode_meta(&g.meta)),
                    (TAG_Q, encoded(|e| e.matrix(&g.q))),
                    (TAG_R, encoded(|e| e.matrix(&g.r))),
                    (
                        TAG_SPLIT,
                        encoded(|e| {
                            e.usize(g.r_s);
                            e.u64(g.clip as u64);
                        }),
                    ),
                    (TAG_CORES, encoded(|e| e.tensors(&g.param_cores))),
                    (TAG_GRID, encode_grid(&g.param_grid)),
                ],
            ),
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let (kind, secs) = sections(bytes)?;
        let cores = |what| decoded(section(&secs, TAG_CORES)?, what, |d| d.tensors());
        match kind {
            KIND_TT => Ok(Artifact::Tt(TtTensor::new(cores("TT cores")?)?)),
            KIND_PARAMETRIC => {
                let s = decoded(section(&secs, TAG_S)?, "S", |d| d.matrix())?;
                let t = decoded(section(&secs, TAG_T)?, "T", |d| d.matrix())?;
                let grid = decode_grid(section(&secs, TAG_GRID)?)?;
                let meta = decode_meta(section(&secs, TAG_META)?)?;
                Ok(Artifact::Parametric(ParametricFactorization::new(s, t, cores("parameter cores")?, grid, meta)?))
            }
            KIND_GLOBAL => {
                let q = decoded(section(&secs, TAG_Q)?, "Q", |d| d.matrix())?;
                let r = decoded(section(&secs, TAG_R)?, "R", |d| d.matrix())?;
                let (r_s, clip) = decoded(section(&secs, TAG_SPLIT)?, "split", |d| Ok((d.usize()?, d.u64()? != 0)))?;
                if q.ncols() != r.nrows() || r_s > r.ncols() {
                    return Err(malformed(format!("Q is {:?}, R is {:?}, split {r_s}", q.shape(), r.shape())));
                }
                let g = GlobalFactorization {
                    q,
                    r,
                    r_s,
                    param_cores: cores("parameter cores")?,
                    param_grid: decode_grid(section(&secs, TAG_GRID)?)?,
                    meta: decode_meta(section(&secs, TAG_META)?)?,
                    clip,
                };
                Ok(Artifact::Global(g))
            }
            other => Err(malformed(format!("unknown artifact kind {other}"))),
        }
    }
}

pub fn save(path: impl AsRef<Path>, artifact: &Artifact) -> Result<()> {
    fs::write(path, artifact.to_bytes())?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<Artifact> {
    Artifact::from_bytes(&fs::read(path)?)
}

pub fn save_parametric(path: impl AsRef<Path>, f: &ParametricFactorization) -> Result<()> {
    save(path, &Artifact::Parametric(f.clone()))
}

pub fn load_parametric(path: impl AsRef<Path>) -> Result<ParametricFactorization> {
    match load(path)? {
        Artifact::Parametric(f) => Ok(f),
        _ => Err(malformed("file does not hold a parametric factorization".into())),
    }
}

pub fn save_global(path: impl AsRef<Path>, g: &GlobalFactorization) -> Result<()> {
    save(path, &Artifact::Global(g.clone()))
}

pub fn load_global(path: impl AsRef<Path>) -> Result<GlobalFactorization> {
    match load(path)? {
        Artifact::Global(g) => Ok(g),
        _ => Err(malformed("file does not hold a global factorization".into())),
    }
}
