//! Versioned flat binary model files.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! "FMIA" | version | channels | height | width | embed_dim
//!        | n_sizes | size[0] .. size[n_sizes-1] | T
//!        | f64 LE weights: per layer W (row-major, in × out) then b
//! ```
//!
//! `size` lists the full layer chain `[input, hidden..., output]`.

use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

use super::toy::{Dense, ToyDenoiser};

pub const MODEL_MAGIC: &[u8; 4] = b"FMIA";
pub const MODEL_VERSION: u32 = 1;

fn put_u32<W: Write>(w: &mut W, v: usize) -> std::io::Result<()> {
    let v = u32::try_from(v).map_err(|_| std::io::Error::other("header field exceeds u32"))?;
    w.write_all(&v.to_le_bytes())
}

pub fn write_model<W: Write>(model: &ToyDenoiser, mut w: W) -> std::io::Result<()> {
    let (c, h, wd) = model.image_shape();
    w.write_all(MODEL_MAGIC)?;
    put_u32(&mut w, MODEL_VERSION as usize)?;
    put_u32(&mut w, c)?;
    put_u32(&mut w, h)?;
    put_u32(&mut w, wd)?;
    put_u32(&mut w, model.embed_dim())?;
    let sizes = model.layer_sizes();
    put_u32(&mut w, sizes.len())?;
    for s in sizes {
        put_u32(&mut w, s)?;
    }
    put_u32(&mut w, model.num_timesteps())?;
    for p in model.params_flat() {
        w.write_all(&p.to_le_bytes())?;
    }
    w.flush()
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn u32(&mut self, what: &str) -> Result<usize> {
        let mut b = [0u8; 4];
        self.inner
            .read_exact(&mut b)
            .map_err(|e| Error::ModelFormat(format!("truncated header reading {what}: {e}")))?;
        Ok(u32::from_le_bytes(b) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let mut buf = vec![0u8; n * 8];
        self.inner
            .read_exact(&mut buf)
            .map_err(|e| Error::ModelFormat(format!("truncated weights: {e}")))?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

pub fn read_model<R: Read>(r: R) -> Result<ToyDenoiser> {
    let mut r = Reader { inner: r };
    let mut magic = [0u8; 4];
    r.inner
        .read_exact(&mut magic)
        .map_err(|e| Error::ModelFormat(format!("missing magic: {e}")))?;
    if &magic != MODEL_MAGIC {
        return Err(Error::ModelFormat(format!("bad magic {magic:?}")));
    }
    let version = r.u32("version")?;
    if version != MODEL_VERSION as usize {
        return Err(Error::ModelFormat(format!("unsupported format version {version}")));
    }
    let shape = (r.u32("channels")?, r.u32("height")?, r.u32("width")?);
    let embed_dim = r.u32("embed_dim")?;
    let n_sizes = r.u32("layer count")?;
    if !(2..=64).contains(&n_sizes) {
        return Err(Error::ModelFormat(format!("implausible layer count {n_sizes}")));
    }
    let sizes = (0..n_sizes).map(|_| r.u32("layer size")).collect::<Result<Vec<_>>>()?;
    let num_timesteps = r.u32("T")?;
    let pixels = shape.0 * shape.1 * shape.2;
    if sizes[0] != pixels + embed_dim || *sizes.last().unwrap() != pixels || sizes.contains(&0) {
        return Err(Error::ModelFormat(format!(
            "layer sizes {sizes:?} inconsistent with image shape {shape:?} and embedding {embed_dim}"
        )));
    }
    let mut layers = Vec::with_capacity(n_sizes - 1);
    for w in sizes.windows(2) {
        let weight = Array2::from_shape_vec((w[0], w[1]), r.f64s(w[0] * w[1])?).expect("sized buffer");
        let bias = Array1::from(r.f64s(w[1])?);
        layers.push(Dense { weight, bias });
    }
    let mut rest = Vec::new();
    r.inner
        .read_to_end(&mut rest)
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    if !rest.is_empty() {
        return Err(Error::ModelFormat(format!("{} trailing bytes after weights", rest.len())));
    }
    Ok(ToyDenoiser::from_parts(shape, embed_dim, num_timesteps, layers))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::ToyArchitecture;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model() -> ToyDenoiser {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let arch = ToyArchitecture {
            hidden: vec![5],
            embed_dim: 2,
        };
        ToyDenoiser::init((1, 2, 2), &arch, 50, &mut rng).unwrap()
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"FMIA");
        let words: Vec<u32> = buf[4..44]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        // version, c, h, w, embed_dim, n_sizes, sizes.., T
        assert_eq!(words, vec![1, 1, 2, 2, 2, 3, 6, 5, 4, 50]);
        let params = model().num_params();
        assert_eq!(buf.len(), 4 + 4 * 10 + 8 * params);
        let first = f64::from_le_bytes(buf[44..52].try_into().unwrap());
        assert_eq!(first, model().params_flat()[0]);
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert_eq!(read_model(&buf[..]).unwrap(), m);
    }

    #[test]
    fn rejects_corruption() {
        let mut buf = Vec::new();
        write_model(&model(), &mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_model(&bad[..]).is_err());
        assert!(read_model(&buf[..buf.len() - 3]).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_model(&long[..]).is_err());
        let mut version = buf;
        version[4] = 9;
        assert!(read_model(&version[..]).is_err());
    }
}
