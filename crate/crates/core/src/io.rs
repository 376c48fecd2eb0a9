//! Binary and JSON storage of tensor trains.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic   b"TTAF"
//! u32     version (1)
//! u32     layout  (0 = row-major cores, right index fastest)
//! u32     d
//! u64[d]  mode sizes
//! u64[d-1] bond ranks
//! f64[..] core 1, core 2, …, core d
//! ```

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::train::{TensorTrain, TtCore};

pub const MAGIC: &[u8; 4] = b"TTAF";
pub const FORMAT_VERSION: u32 = 1;
pub const LAYOUT_ROW_MAJOR: u32 = 0;

pub fn to_bytes(tt: &TensorTrain) -> Vec<u8> {
    let d = tt.order();
    let mut out = Vec::with_capacity(16 + 16 * d + 8 * tt.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&LAYOUT_ROW_MAJOR.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    for &n in tt.shape().dims() {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for r in tt.ranks() {
        out.extend_from_slice(&(r as u64).to_le_bytes());
    }
    for core in tt.cores() {
        for v in core.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(CoreError::Parse {
                offset: self.pos,
                message: format!("unexpected end of file while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<usize> {
        let at = self.pos;
        let v = u64::from_le_bytes(self.take(8, what)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| CoreError::Parse {
            offset: at,
            message: format!("{what} {v} does not fit in memory"),
        })
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<TensorTrain> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(CoreError::Parse {
            offset: 0,
            message: "bad magic, not a tensor-train file".into(),
        });
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION {
        return Err(CoreError::UnsupportedVersion {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let layout_at = r.pos;
    let layout = r.u32("layout")?;
    if layout != LAYOUT_ROW_MAJOR {
        return Err(CoreError::Parse {
            offset: layout_at,
            message: format!("unknown core layout {layout}"),
        });
    }
    let d_at = r.pos;
    let d = r.u32("order")? as usize;
    if d < 2 {
        return Err(CoreError::Parse {
            offset: d_at,
            message: format!("order {d} is below 2"),
        });
    }
    let dims = (0..d).map(|_| r.u64("mode size")).collect::<Result<Vec<_>>>()?;
    let mut ranks = vec![1];
    for _ in 0..d - 1 {
        ranks.push(r.u64("rank")?);
    }
    ranks.push(1);
    let mut cores = Vec::with_capacity(d);
    for k in 0..d {
        let at = r.pos;
        let n = ranks[k]
            .checked_mul(dims[k])
            .and_then(|x| x.checked_mul(ranks[k + 1]))
            .filter(|&n| n > 0)
            .ok_or_else(|| CoreError::Parse {
                offset: at,
                message: format!("core {} has invalid dimensions", k + 1),
            })?;
        let bytes = n.checked_mul(8).ok_or_else(|| CoreError::Parse {
            offset: at,
            message: format!("core {} is too large", k + 1),
        })?;
        let raw = r.take(bytes, "core data")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        cores.push(TtCore::new(ranks[k], dims[k], ranks[k + 1], data).map_err(|e| {
            CoreError::Parse {
                offset: at,
                message: e.to_string(),
            }
        })?);
    }
    if r.pos != buf.len() {
        return Err(CoreError::Parse {
            offset: r.pos,
            message: format!("{} trailing bytes", buf.len() - r.pos),
        });
    }
    TensorTrain::new(cores)
}

pub fn tt_save(tt: &TensorTrain, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_bytes(tt))?;
    Ok(())
}

pub fn tt_load(path: impl AsRef<Path>) -> Result<TensorTrain> {
    from_bytes(&std::fs::read(path)?)
}

/// JSON form of the binary format, cores as base64 of their little-endian bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtDescriptor {
    pub version: u32,
    pub layout: String,
    pub dims: Vec<usize>,
    pub ranks: Vec<usize>,
    pub cores: Vec<String>,
}

impl TtDescriptor {
    pub fn from_train(tt: &TensorTrain) -> Self {
        Self {
            version: FORMAT_VERSION,
            layout: "row-major".into(),
            dims: tt.shape().dims().to_vec(),
            ranks: tt.ranks(),
            cores: tt
                .cores()
                .iter()
                .map(|c| {
                    let bytes: Vec<u8> = c.data().iter().flat_map(|v| v.to_le_bytes()).collect();
                    STANDARD.encode(bytes)
                })
                .collect(),
        }
    }

    pub fn to_train(&self) -> Result<TensorTrain> {
        if self.version != FORMAT_VERSION {
            return Err(CoreError::UnsupportedVersion {
                found: self.version,
                expected: FORMAT_VERSION,
            });
        }
        if self.layout != "row-major" {
            return Err(CoreError::Config(format!("unknown core layout {:?}", self.layout)));
        }
        let d = self.dims.len();
        if d < 2 || self.ranks.len() + 1 != d || self.cores.len() != d {
            return Err(CoreError::Config(
                "descriptor dims, ranks and cores disagree in length".into(),
            ));
        }
        let mut full = vec![1];
        full.extend_from_slice(&self.ranks);
        full.push(1);
        let cores = self
            .cores
            .iter()
            .enumerate()
            .map(|(k, payload)| {
                let bytes = STANDARD
                    .decode(payload)
                    .map_err(|e| CoreError::Config(format!("core {}: {e}", k + 1)))?;
                if bytes.len() % 8 != 0 {
                    return Err(CoreError::Config(format!(
                        "core {} payload is not a whole number of floats",
                        k + 1
                    )));
                }
                let data = bytes
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                TtCore::new(full[k], self.dims[k], full[k + 1], data)
            })
            .collect::<Result<Vec<_>>>()?;
        TensorTrain::new(cores)
    }
}

pub fn to_json(tt: &TensorTrain) -> Result<String> {
    serde_json::to_string_pretty(&TtDescriptor::from_train(tt))
        .map_err(|e| CoreError::Config(e.to_string()))
}

pub fn from_json(text: &str) -> Result<TensorTrain> {
    let desc: TtDescriptor =
        serde_json::from_str(text).map_err(|e| CoreError::Config(format!("bad descriptor: {e}")))?;
    desc.to_train()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> TensorTrain {
        let c1 = TtCore::new(1, 2, 2, vec![1.0, -2.0, 0.5, 3.25]).unwrap();
        let c2 = TtCore::new(2, 3, 1, vec![0.1, 0.2, 0.3, -0.4, f64::MIN_POSITIVE, 1e300]).unwrap();
        TensorTrain::new(vec![c1, c2]).unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = to_bytes(&sample());
        assert_eq!(&bytes[..4], b"TTAF");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[12..16].try_into().unwrap()), 2);
        assert_eq!(bytes.len(), 16 + 16 + 8 + 8 * 10);
    }

    #[test]
    fn truncation_reports_offset() {
        let bytes = to_bytes(&sample());
        match from_bytes(&bytes[..bytes.len() - 3]) {
            Err(CoreError::Parse { offset, .. }) => assert_eq!(offset, 16 + 16 + 8 + 32),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(from_bytes(&bytes[..10]), Err(CoreError::Parse { .. })));
    }

    #[test]
    fn version_mismatch() {
        let mut bytes = to_bytes(&sample());
        bytes[4] = 7;
        assert!(matches!(
            from_bytes(&bytes),
            Err(CoreError::UnsupportedVersion { found: 7, expected: 1 })
        ));
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = to_bytes(&sample());
        bytes.push(0);
        assert!(matches!(from_bytes(&bytes), Err(CoreError::Parse { .. })));
    }

    #[test]
    fn json_round_trip() {
        let tt = sample();
        let back = from_json(&to_json(&tt).unwrap()).unwrap();
        assert_eq!(back, tt);
    }
}
