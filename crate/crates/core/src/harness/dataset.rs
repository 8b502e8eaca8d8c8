//! Synthetic image sets and PGM directory I/O.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::attacks::LabeledSample;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::spectral::{forward_dft, inverse_dft, radial_distance};

use super::seed::derive_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Generator {
    /// White noise shaped by amplitude `(1 + r)^(−γ)`, `γ ~ U[gamma_min, gamma_max]`
    /// per image.
    PowerLaw { gamma_min: f64, gamma_max: f64 },
    /// A smooth `γ = 3` field plus a checkerboard of weight `U[weight_min, weight_max]`.
    CheckerboardMix { weight_min: f64, weight_max: f64 },
    /// PGM files listed in `manifest.csv` inside `path`.
    Directory { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub image_size: usize,
    pub n_member: usize,
    pub n_holdout: usize,
    pub generator: Generator,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            image_size: 16,
            n_member: 200,
            n_holdout: 200,
            generator: Generator::PowerLaw {
                gamma_min: 0.5,
                gamma_max: 3.0,
            },
            seed: 0,
        }
    }
}

fn check_range(lo: f64, hi: f64, what: &str) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0 && lo <= hi) {
        return Err(Error::Config(format!("{what} range [{lo}, {hi}] is invalid")));
    }
    Ok(())
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.generator {
            Generator::Directory { .. } => return Ok(()),
            Generator::PowerLaw { gamma_min, gamma_max } => check_range(*gamma_min, *gamma_max, "gamma")?,
            Generator::CheckerboardMix { weight_min, weight_max } => {
                check_range(*weight_min, *weight_max, "checkerboard weight")?
            }
        }
        if ![8, 16, 32].contains(&self.image_size) {
            return Err(Error::Config(format!(
                "image_size must be 8, 16 or 32, got {}",
                self.image_size
            )));
        }
        if self.n_member == 0 || self.n_holdout == 0 {
            return Err(Error::Config("n_member and n_holdout must be positive".into()));
        }
        Ok(())
    }
}

/// Maps an image linearly onto `[−1, 1]`; a constant image becomes zero.
pub fn normalize_min_max(img: &ImageTensor) -> ImageTensor {
    let lo = img.data().iter().copied().fold(f64::INFINITY, f64::min);
    let hi = img.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo <= 0.0 {
        return img.map(|_| 0.0);
    }
    img.map(|v| 2.0 * (v - lo) / (hi - lo) - 1.0)
}

/// One normalised power-law field of size `n × n`.
pub fn power_law_field<R: Rng>(n: usize, gamma: f64, rng: &mut R) -> ImageTensor {
    let noise = ImageTensor::from_fn(1, n, n, |_, _, _| rng.sample(StandardNormal));
    let mut spec = forward_dft(&noise);
    for u in 0..n {
        for v in 0..n {
            let amp = (1.0 + radial_distance(u, v, n, n)).powf(-gamma);
            let z = spec.get(0, u, v);
            spec.set(0, u, v, z * amp);
        }
    }
    normalize_min_max(&inverse_dft(&spec))
}

fn synth_image(spec: &DatasetSpec, id: &str) -> ImageTensor {
    let n = spec.image_size;
    let mut rng = derive_rng(spec.seed, "dataset", id);
    match &spec.generator {
        Generator::PowerLaw { gamma_min, gamma_max } => {
            let gamma = if gamma_max > gamma_min { rng.random_range(*gamma_min..*gamma_max) } else { *gamma_min };
            power_law_field(n, gamma, &mut rng)
        }
        Generator::CheckerboardMix { weight_min, weight_max } => {
            let w = if weight_max > weight_min { rng.random_range(*weight_min..*weight_max) } else { *weight_min };
            let smooth = power_law_field(n, 3.0, &mut rng);
            let board = ImageTensor::from_fn(1, n, n, |_, y, x| if (x + y) % 2 == 0 { 1.0 } else { -1.0 });
            normalize_min_max(&smooth.lin_comb(1.0, &board, w))
        }
        Generator::Directory { .. } => unreachable!("directory datasets are ingested"),
    }
}

/// Builds the labelled set. Synthetic samples are named `s0000`, `s0001`, …;
/// the first `n_member` are members. Each image depends only on
/// `(seed, id)`.
pub fn generate_dataset(spec: &DatasetSpec) -> Result<Vec<LabeledSample>> {
    spec.validate()?;
    if let Generator::Directory { path } = &spec.generator {
        return ingest_pgm_dir(path);
    }
    Ok((0..spec.n_member + spec.n_holdout)
        .map(|i| {
            let id = format!("s{i:04}");
            LabeledSample {
                image: synth_image(spec, &id),
                member: i < spec.n_member,
                id,
            }
        })
        .collect())
}

fn ingestion(file: &Path, reason: impl Into<String>) -> Error {
    Error::Ingestion {
        file: file.display().to_string(),
        reason: reason.into(),
    }
}

/// Parses an 8-bit binary PGM into a single-channel image on `[−1, 1]`.
pub fn parse_pgm(bytes: &[u8], file: &Path) -> Result<ImageTensor> {
    let mut pos = 0;
    let mut token = || -> Result<String> {
        loop {
            match bytes.get(pos) {
                Some(b'#') => {
                    while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                        pos += 1;
                    }
                }
                Some(b) if b.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
                None => return Err(ingestion(file, "truncated header")),
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|b| !b.is_ascii_whitespace()) {
            pos += 1;
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };
    if token()? != "P5" {
        return Err(ingestion(file, "not a binary PGM (expected P5)"));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = token()?;
        t.parse().map_err(|_| ingestion(file, format!("bad {what} `{t}`")))
    };
    let (width, height, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if width == 0 || height == 0 {
        return Err(ingestion(file, "zero image dimension"));
    }
    if maxval != 255 {
        return Err(ingestion(file, format!("maxval {maxval} unsupported, need 255")));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let raster = bytes
        .get(start..)
        .filter(|r| r.len() == width * height)
        .ok_or_else(|| ingestion(file, format!("expected {} pixel bytes", width * height)))?;
    let data = raster.iter().map(|&p| p as f64 / 255.0 * 2.0 - 1.0).collect();
    ImageTensor::new(1, height, width, data).map_err(|e| ingestion(file, e.to_string()))
}

/// Quantises a single-channel image back to 8-bit PGM.
pub fn encode_pgm(img: &ImageTensor) -> Result<Vec<u8>> {
    if img.channels() != 1 {
        return Err(Error::Contract(format!("PGM holds one channel, image has {}", img.channels())));
    }
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.data().iter().map(|&v| ((v + 1.0) / 2.0 * 255.0).round().clamp(0.0, 255.0) as u8));
    Ok(out)
}

pub const MANIFEST_NAME: &str = "manifest.csv";

/// Reads `manifest.csv` (`filename,membership`) and every listed PGM. All
/// images must share one size, and every `.pgm` in the directory must be
/// listed.
pub fn ingest_pgm_dir(dir: &Path) -> Result<Vec<LabeledSample>> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&manifest_path).map_err(|e| ingestion(&manifest_path, e.to_string()))?;
    let mut samples: Vec<LabeledSample> = Vec::new();
    let mut listed = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line == "filename,membership") {
            continue;
        }
        let (name, m) = line
            .split_once(',')
            .ok_or_else(|| ingestion(&manifest_path, format!("line {}: expected filename,membership", i + 1)))?;
        let member = match m.trim() {
            "1" => true,
            "0" => false,
            other => {
                return Err(ingestion(&manifest_path, format!("line {}: membership `{other}`", i + 1)));
            }
        };
        let name = name.trim();
        if listed.insert(name.to_string(), ()).is_some() {
            return Err(ingestion(&manifest_path, format!("duplicate entry {name}")));
        }
        let path = dir.join(name);
        let bytes = fs::read(&path).map_err(|_| ingestion(&path, format!("manifest entry {name} has no file")))?;
        let image = parse_pgm(&bytes, &path)?;
        if let Some(first) = samples.first() {
            if !image.same_shape(&first.image) {
                return Err(ingestion(
                    &path,
                    format!("size {:?} differs from {:?}", image.shape(), first.image.shape()),
                ));
            }
        }
        samples.push(LabeledSample {
            id: name.to_string(),
            member,
            image,
        });
    }
    let mut entries: Vec<_> = fs::read_dir(dir)
        .map_err(|e| ingestion(dir, e.to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "pgm"))
        .collect();
    entries.sort();
    for p in entries {
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if !listed.contains_key(&name) {
            return Err(ingestion(&p, "file has no manifest entry"));
        }
    }
    if samples.is_empty() {
        return Err(ingestion(&manifest_path, "manifest lists no images"));
    }
    Ok(samples)
}

/// Writes `<id>.pgm` per sample plus the manifest.
pub fn export_pgm_dir(samples: &[LabeledSample], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("filename,membership\n");
    for s in samples {
        let name = if s.id.ends_with(".pgm") { s.id.clone() } else { format!("{}.pgm", s.id) };
        let path = dir.join(&name);
        fs::write(&path, encode_pgm(&s.image)?).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&format!("{name},{}\n", u8::from(s.member)));
    }
    let path = dir.join(MANIFEST_NAME);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(manifest.as_bytes()).map_err(|e| Error::io(&path, e))
}
