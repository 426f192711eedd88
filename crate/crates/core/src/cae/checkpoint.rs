//! Versioned binary model checkpoints.
//!
//! All integers are little-endian `u32`:
//!
//! ```text
//! magic        b"UCAE"
//! version      1
//! width height channels latent_length filters kernel
//! hidden_activation output_activation   (0 identity, 1 relu, 2 sigmoid)
//! tensor_count (12), then rows cols for each tensor
//! values       every tensor row-major as little-endian f64, in ParamId order
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Activation, CaeConfig, ModelParams, PARAM_COUNT};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"UCAE";

pub fn write_checkpoint<T: Scalar, W: Write>(params: &ModelParams<T>, mut out: W) -> std::io::Result<()> {
    let cfg = params.config();
    let mut header = Vec::new();
    header.extend_from_slice(MAGIC);
    for v in [
        CHECKPOINT_VERSION,
        cfg.width as u32,
        cfg.height as u32,
        cfg.channels as u32,
        cfg.latent_length as u32,
        cfg.filters as u32,
        cfg.kernel as u32,
        cfg.hidden_activation.code(),
        cfg.output_activation.code(),
        PARAM_COUNT as u32,
    ] {
        header.extend_from_slice(&v.to_le_bytes());
    }
    for t in params.tensors() {
        header.extend_from_slice(&(t.nrows() as u32).to_le_bytes());
        header.extend_from_slice(&(t.ncols() as u32).to_le_bytes());
    }
    out.write_all(&header)?;
    let mut body = Vec::with_capacity(params.len() * 8);
    for t in params.tensors() {
        for v in t.iter() {
            body.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out.write_all(&body)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            Error::shape(format!("at least {} bytes", self.pos + n), format!("{} bytes", self.bytes.len()))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }
}

pub fn read_checkpoint<T: Scalar, R: Read>(mut input: R) -> Result<ModelParams<T>> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes).map_err(|e| Error::io("<checkpoint stream>", e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::shape("checkpoint magic UCAE", "unrecognized header"));
    }
    let version = cur.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: CHECKPOINT_VERSION });
    }
    let (width, height, channels, latent_length, filters, kernel) =
        (cur.usize()?, cur.usize()?, cur.usize()?, cur.usize()?, cur.usize()?, cur.usize()?);
    let act = |code: u32| Activation::from_code(code).ok_or_else(|| Error::shape("activation code 0..=2", code));
    let hidden_activation = act(cur.u32()?)?;
    let output_activation = act(cur.u32()?)?;
    let config = CaeConfig { width, height, channels, latent_length, filters, kernel, hidden_activation, output_activation };
    config.validate()?;
    let count = cur.usize()?;
    if count != PARAM_COUNT {
        return Err(Error::shape(format!("{PARAM_COUNT} tensors"), count));
    }
    let expected = config.param_shapes();
    let mut shapes = Vec::with_capacity(count);
    for want in expected {
        let got = (cur.usize()?, cur.usize()?);
        if got != want {
            return Err(Error::shape(format!("{want:?}"), format!("{got:?}")));
        }
        shapes.push(got);
    }
    let mut tensors = Vec::with_capacity(count);
    for (rows, cols) in shapes {
        let raw = cur.take(rows * cols * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| T::of(f64::from_le_bytes(b.try_into().expect("8 bytes"))))
            .collect();
        tensors.push(Array2::from_shape_vec((rows, cols), values).expect("length matches shape"));
    }
    if cur.pos != bytes.len() {
        return Err(Error::shape(format!("{} bytes", cur.pos), format!("{} bytes", bytes.len())));
    }
    ModelParams::from_tensors(config, tensors)
}

pub fn save_checkpoint<T: Scalar>(params: &ModelParams<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_checkpoint(params, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<ModelParams<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(std::io::BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn small() -> ModelParams<f64> {
        ModelParams::init(CaeConfig::new(6, 5, 1, 4), &mut stream(1)).unwrap()
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let params = small();
        let mut buf = Vec::new();
        write_checkpoint(&params, &mut buf).unwrap();
        let back: ModelParams<f64> = read_checkpoint(&buf[..]).unwrap();
        assert_eq!(back, params);
        let single: ModelParams<f32> = params.cast();
        let mut buf = Vec::new();
        write_checkpoint(&single, &mut buf).unwrap();
        assert_eq!(read_checkpoint::<f32, _>(&buf[..]).unwrap(), single);
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/model.bin");
        let params = small();
        save_checkpoint(&params, &path).unwrap();
        assert_eq!(load_checkpoint::<f64>(&path).unwrap(), params);
        assert!(matches!(load_checkpoint::<f64>(dir.path().join("absent.bin")), Err(Error::IoFailure { .. })));
    }

    #[test]
    fn rejects_other_versions_and_bad_shapes() {
        let mut buf = Vec::new();
        write_checkpoint(&small(), &mut buf).unwrap();

        let mut wrong_version = buf.clone();
        wrong_version[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert!(matches!(
            read_checkpoint::<f64, _>(&wrong_version[..]),
            Err(Error::VersionMismatch { found: 2, expected: 1 })
        ));

        // first tensor's row count lives after magic + 10 header words
        let mut wrong_shape = buf.clone();
        wrong_shape[44..48].copy_from_slice(&99u32.to_le_bytes());
        assert!(matches!(read_checkpoint::<f64, _>(&wrong_shape[..]), Err(Error::ShapeMismatch { .. })));

        assert!(read_checkpoint::<f64, _>(&buf[..buf.len() - 1]).is_err());
        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(read_checkpoint::<f64, _>(&trailing[..]).is_err());
        assert!(read_checkpoint::<f64, _>(&b"JUNKJUNK"[..]).is_err());
    }
}
