use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CubeError {
    #[error("cube dimensions must be positive, got {width}x{height}x{bands}")]
    EmptyDimensions { width: usize, height: usize, bands: usize },
    #[error("bit depth {0} outside 1..=16")]
    BitDepth(u8),
    #[error("expected {expected} samples, got {actual}")]
    SampleCount { expected: usize, actual: usize },
    #[error("sample {index} = {value} exceeds {bit_depth}-bit range")]
    SampleRange { index: usize, value: u16, bit_depth: u8 },
    #[error("sidecar header line {line}: {message}")]
    Sidecar { line: usize, message: String },
    #[error("raw cube has {actual} bytes, sidecar implies {expected}")]
    RawLength { expected: usize, actual: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Band-sequential hyperspectral cube.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HyperspectralCube {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub bit_depth: u8,
    samples: Vec<u16>,
}

impl HyperspectralCube {
    pub fn new(
        width: usize,
        height: usize,
        bands: usize,
        bit_depth: u8,
        samples: Vec<u16>,
    ) -> Result<Self, CubeError> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(CubeError::EmptyDimensions { width, height, bands });
        }
        if !(1..=16).contains(&bit_depth) {
            return Err(CubeError::BitDepth(bit_depth));
        }
        let expected = width * height * bands;
        if samples.len() != expected {
            return Err(CubeError::SampleCount {
                expected,
                actual: samples.len(),
            });
        }
        let max = max_sample(bit_depth);
        if let Some((index, &value)) = samples.iter().enumerate().find(|(_, s)| **s > max) {
            return Err(CubeError::SampleRange { index, value, bit_depth });
        }
        Ok(HyperspectralCube {
            width,
            height,
            bands,
            bit_depth,
            samples,
        })
    }

    pub fn samples(&self) -> &[u16] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.height + y) * self.width + x
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> u16 {
        self.samples[self.index(x, y, z)]
    }

    pub fn raw_bits(&self) -> u64 {
        self.samples.len() as u64 * self.bit_depth as u64
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.samples.iter().flat_map(|s| s.to_le_bytes()).collect()
    }

    pub fn sidecar_text(&self) -> String {
        format!(
            "hsc-cube\nversion=1\nwidth={}\nheight={}\nbands={}\nbit_depth={}\nbyte_order=little\ninterleave=bsq\n",
            self.width, self.height, self.bands, self.bit_depth
        )
    }

    /// Writes the raw samples to `path` and the text header to `<path>.hdr`.
    pub fn write_files(&self, path: &Path) -> Result<(), CubeError> {
        fs::write(path, self.to_le_bytes())?;
        fs::write(sidecar_path(path), self.sidecar_text())?;
        Ok(())
    }

    pub fn read_files(path: &Path) -> Result<Self, CubeError> {
        let header = fs::read_to_string(sidecar_path(path))?;
        let (width, height, bands, bit_depth) = parse_sidecar(&header)?;
        let raw = fs::read(path)?;
        let expected = width * height * bands * 2;
        if raw.len() != expected {
            return Err(CubeError::RawLength {
                expected,
                actual: raw.len(),
            });
        }
        let samples = raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]))
            .collect();
        HyperspectralCube::new(width, height, bands, bit_depth, samples)
    }

    pub fn constant(width: usize, height: usize, bands: usize, bit_depth: u8, value: u16) -> Self {
        Self::new(width, height, bands, bit_depth, vec![value; width * height * bands]).unwrap()
    }

    /// Smooth linear ramp in all three axes spanning most of the range.
    pub fn gradient(width: usize, height: usize, bands: usize, bit_depth: u8) -> Self {
        let max = max_sample(bit_depth) as f64;
        let mut samples = Vec::with_capacity(width * height * bands);
        for z in 0..bands {
            for y in 0..height {
                for x in 0..width {
                    let v = 0.05
                        + 0.4 * x as f64 / width as f64
                        + 0.3 * y as f64 / height as f64
                        + 0.2 * z as f64 / bands as f64;
                    samples.push((v * max).round() as u16);
                }
            }
        }
        Self::new(width, height, bands, bit_depth, samples).unwrap()
    }

    /// Spatially rough first band; each later band is the previous one plus
    /// a small offset and Gaussian noise.
    pub fn band_correlated(
        width: usize,
        height: usize,
        bands: usize,
        bit_depth: u8,
        seed: u64,
    ) -> Self {
        let max = max_sample(bit_depth) as f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.5).unwrap();
        let plane = width * height;
        let mut samples = Vec::with_capacity(plane * bands);
        for _ in 0..plane {
            samples.push(rng.random_range(max * 0.25..max * 0.6).round() as u16);
        }
        for z in 1..bands {
            for i in 0..plane {
                let prev = samples[(z - 1) * plane + i] as f64;
                let v = prev * 1.01 + 3.0 + noise.sample(&mut rng);
                samples.push(v.round().clamp(0.0, max) as u16);
            }
        }
        Self::new(width, height, bands, bit_depth, samples).unwrap()
    }

    pub fn uniform_random(
        width: usize,
        height: usize,
        bands: usize,
        bit_depth: u8,
        seed: u64,
    ) -> Self {
        let max = max_sample(bit_depth);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples = (0..width * height * bands)
            .map(|_| rng.random_range(0..=max))
            .collect();
        Self::new(width, height, bands, bit_depth, samples).unwrap()
    }
}

pub fn max_sample(bit_depth: u8) -> u16 {
    ((1u32 << bit_depth) - 1) as u16
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".hdr");
    PathBuf::from(s)
}

fn parse_sidecar(text: &str) -> Result<(usize, usize, usize, u8), CubeError> {
    let err = |line: usize, message: String| CubeError::Sidecar { line, message };
    let lines: Vec<&str> = text.lines().collect();
    if lines.first().map(|l| l.trim()) != Some("hsc-cube") {
        return Err(err(1, "expected `hsc-cube`".into()));
    }
    let mut fields = Vec::new();
    for (n, line) in lines.iter().enumerate().skip(1) {
        match line.split_once('=') {
            Some((k, v)) => fields.push((n + 1, k.trim(), v.trim())),
            None if line.trim().is_empty() => {}
            None => return Err(err(n + 1, format!("expected key=value, got `{line}`"))),
        }
    }
    let get = |key: &str| {
        fields
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(n, _, v)| (*n, *v))
            .ok_or_else(|| err(lines.len(), format!("missing key `{key}`")))
    };
    let number = |key: &str| -> Result<usize, CubeError> {
        let (n, v) = get(key)?;
        v.parse()
            .map_err(|_| err(n, format!("`{key}` is not a number: {v}")))
    };
    let (n, version) = get("version")?;
    if version != "1" {
        return Err(err(n, format!("unsupported sidecar version {version}")));
    }
    for (key, want) in [("byte_order", "little"), ("interleave", "bsq")] {
        let (n, v) = get(key)?;
        if v != want {
            return Err(err(n, format!("`{key}` must be {want}, got {v}")));
        }
    }
    let (width, height, bands) = (number("width")?, number("height")?, number("bands")?);
    let depth = number("bit_depth")?;
    let depth = u8::try_from(depth).map_err(|_| CubeError::BitDepth(u8::MAX))?;
    Ok((width, height, bands, depth))
}
