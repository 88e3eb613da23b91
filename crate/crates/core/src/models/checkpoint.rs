//! Binary checkpoint format (all integers little-endian):
//!
//! ```text
//! magic    8 bytes  "CTCDCKPT"
//! version  u32
//! header   u32 length + UTF-8 `key=value` lines (encoder spec and metadata)
//! count    u32 number of parameters
//! param*   u32 name length + UTF-8 name,
//!          u32 rank, rank x u64 dims,
//!          prod(dims) x f64 raw IEEE-754 bits
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::DenseArray;

use super::{EncoderSpec, Family};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CTCDCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TrainingMeta {
    /// Free-form stage label, e.g. `baseline`, `rkd`, `tutornet`.
    pub stage: String,
    pub epoch: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: EncoderSpec,
    pub params: Vec<(String, DenseArray)>,
    pub meta: TrainingMeta,
}

fn join(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

fn split(s: &str) -> Result<Vec<usize>> {
    if s.is_empty() {
        return Ok(Vec::new());
    }
    s.split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| Error::Format(format!("bad integer list `{s}`")))
        })
        .collect()
}

impl Checkpoint {
    fn header(&self) -> String {
        let s = &self.spec;
        format!(
            "family={}\ninput_dim={}\nlayer_widths={}\nkernel_widths={}\nbidirectional={}\nclasses={}\nstage={}\nepoch={}\nseed={}\n",
            s.family,
            s.input_dim,
            join(&s.layer_widths),
            join(&s.kernel_widths),
            s.bidirectional,
            s.classes,
            self.meta.stage,
            self.meta.epoch,
            self.meta.seed
        )
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        let header = self.header();
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for (name, value) in &self.params {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(value.rank() as u32).to_le_bytes());
            for &d in value.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in value.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint (bad magic bytes)".into()));
        }
        let version = r.u32("version")?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let header_len = r.u32("header length")? as usize;
        let header = std::str::from_utf8(r.take(header_len, "header")?)
            .map_err(|_| Error::Format("header is not UTF-8".into()))?;
        let (spec, meta) = parse_header(header)?;
        let count = r.u32("parameter count")? as usize;
        let mut params = Vec::with_capacity(count.min(1024));
        for i in 0..count {
            let what = format!("parameter {i}");
            let name_len = r.u32(&what)? as usize;
            let name = std::str::from_utf8(r.take(name_len, &what)?)
                .map_err(|_| Error::Format(format!("{what} name is not UTF-8")))?
                .to_string();
            let rank = r.u32(&name)? as usize;
            if rank == 0 || rank > crate::numcore::MAX_RANK {
                return Err(Error::Format(format!("`{name}` has rank {rank}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u64(&name)? as usize);
            }
            let n: usize = shape.iter().product();
            let raw = r.take(n.checked_mul(8).ok_or_else(|| Error::Format("shape overflow".into()))?, &name)?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            params.push((name, DenseArray::new(shape, data)?));
        }
        if r.pos != bytes.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after last parameter",
                bytes.len() - r.pos
            )));
        }
        Ok(Checkpoint {
            format_version: version,
            spec,
            params,
            meta,
        })
    }

    /// Writes to a sibling temp file, then renames over `path`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("ckpt.tmp");
        fs::write(&tmp, self.to_bytes()).map_err(|e| Error::file(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::file(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }
}

fn parse_header(header: &str) -> Result<(EncoderSpec, TrainingMeta)> {
    let mut spec = EncoderSpec::tdnn(0, &[], &[], 0);
    let mut meta = TrainingMeta::default();
    let bad = |k: &str, v: &str| Error::Format(format!("bad header value {k}={v}"));
    for line in header.lines().filter(|l| !l.is_empty()) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("bad header line `{line}`")))?;
        match k {
            "family" => spec.family = v.parse::<Family>().map_err(|_| bad(k, v))?,
            "input_dim" => spec.input_dim = v.parse().map_err(|_| bad(k, v))?,
            "layer_widths" => spec.layer_widths = split(v)?,
            "kernel_widths" => spec.kernel_widths = split(v)?,
            "bidirectional" => spec.bidirectional = v.parse().map_err(|_| bad(k, v))?,
            "classes" => spec.classes = v.parse().map_err(|_| bad(k, v))?,
            "stage" => meta.stage = v.to_string(),
            "epoch" => meta.epoch = v.parse().map_err(|_| bad(k, v))?,
            "seed" => meta.seed = v.parse().map_err(|_| bad(k, v))?,
            _ => return Err(Error::Format(format!("unknown header key `{k}`"))),
        }
    }
    Ok((spec, meta))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Truncated(what.to_string()));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Encoder;
    use crate::numcore::Rng;

    fn sample() -> Checkpoint {
        let enc = Encoder::build(EncoderSpec::rnn(3, &[4, 2], true, 5), &mut Rng::new(3)).unwrap();
        enc.to_checkpoint(TrainingMeta {
            stage: "baseline".into(),
            epoch: 7,
            seed: 3,
        })
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = sample();
        let back = Checkpoint::from_bytes(&ck.to_bytes()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), ck.to_bytes());
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let ck = sample();
        ck.save(&path).unwrap();
        assert_eq!(Checkpoint::load(&path).unwrap(), ck);
    }

    #[test]
    fn corrupted_magic_is_format_error() {
        let mut bytes = sample().to_bytes();
        bytes[0] = b'X';
        assert!(matches!(Checkpoint::from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn version_mismatch_is_version_error() {
        let mut bytes = sample().to_bytes();
        bytes[8..12].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Version { found: 99, .. })
        ));
    }

    #[test]
    fn truncation_is_truncated_error() {
        let bytes = sample().to_bytes();
        for cut in [4, 20, bytes.len() - 1] {
            assert!(matches!(
                Checkpoint::from_bytes(&bytes[..cut]),
                Err(Error::Truncated(_))
            ));
        }
    }

    #[test]
    fn loading_into_mismatched_spec_is_shape_error() {
        let ck = sample();
        let mut other =
            Encoder::build(EncoderSpec::rnn(3, &[4, 3], true, 5), &mut Rng::new(0)).unwrap();
        assert!(matches!(other.load_params(&ck), Err(Error::Shape { .. })));
        let restored = Encoder::from_checkpoint(&ck).unwrap();
        assert_eq!(restored.to_checkpoint(ck.meta.clone()), ck);
    }
}
