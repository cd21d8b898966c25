//! Binary checkpoint format:
//!
//! ```text
//! magic "LGAUGCK1" | u32 version | u32 metadata length | metadata (UTF-8 JSON)
//! u32 tensor count | per tensor: u32 name length, name, u32 rank, u64 dims…, f64 data…
//! ```
//!
//! All integers and floats are little-endian; floats are stored by bit
//! pattern, so a save/load round trip is exact.

use std::io::{Read, Write};
use std::path::Path;

use super::params::ParamStore;
use super::RuntimeError;
use crate::tensor::{numel, Tensor};

const MAGIC: &[u8; 8] = b"LGAUGCK1";
const VERSION: u32 = 1;

/// Parameters plus free-form metadata describing how they were produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ParamStore,
    pub metadata: serde_json::Value,
}

fn bad(msg: impl Into<String>) -> RuntimeError {
    RuntimeError::Checkpoint(msg.into())
}

pub fn write_checkpoint(mut w: impl Write, ck: &Checkpoint) -> Result<(), RuntimeError> {
    let meta = serde_json::to_vec(&ck.metadata).map_err(|e| bad(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(&meta)?;
    w.write_all(&(ck.params.len() as u32).to_le_bytes())?;
    for (name, t) in ck.params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.rank() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &x in t.data() {
            w.write_all(&x.to_bits().to_le_bytes())?;
        }
    }
    Ok(())
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>, RuntimeError> {
        let mut buf = vec![0; n];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| bad("unexpected end of file"))?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, RuntimeError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, RuntimeError> {
        Ok(u64::from_le_bytes(self.bytes(8)?.try_into().unwrap()))
    }
}

pub fn read_checkpoint(r: impl Read) -> Result<Checkpoint, RuntimeError> {
    let mut r = Reader { inner: r };
    if r.bytes(8)? != MAGIC {
        return Err(bad("not a checkpoint file"));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let len = r.u32()? as usize;
    let metadata = serde_json::from_slice(&r.bytes(len)?).map_err(|e| bad(e.to_string()))?;
    let count = r.u32()?;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(len)?).map_err(|_| bad("parameter name is not UTF-8"))?;
        let rank = r.u32()? as usize;
        let shape = (0..rank)
            .map(|_| r.u64().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let data = (0..numel(&shape))
            .map(|_| r.u64().map(f64::from_bits))
            .collect::<Result<Vec<_>, _>>()?;
        params.insert(name, Tensor::new(shape, data));
    }
    Ok(Checkpoint { params, metadata })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<(), RuntimeError> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, ck)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, RuntimeError> {
    read_checkpoint(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bitwise() {
        let mut params = ParamStore::new();
        params.insert("w", Tensor::matrix(2, 2, vec![0.1, -0.0, 1e-310, f64::MAX]));
        params.insert("b", Tensor::scalar(std::f64::consts::PI));
        let ck = Checkpoint {
            params,
            metadata: serde_json::json!({"task": "tag"}),
        };
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &ck).unwrap();
        let back = read_checkpoint(buf.as_slice()).unwrap();
        assert_eq!(back.metadata, ck.metadata);
        for ((n1, t1), (n2, t2)) in back.params.iter().zip(ck.params.iter()) {
            assert_eq!(n1, n2);
            let bits = |t: &Tensor| t.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(t1), bits(t2));
        }
        assert!(read_checkpoint(&buf[..buf.len() - 3]).is_err());
        assert!(read_checkpoint(&b"NOTACKPT00000000"[..]).is_err());
    }
}
