use thiserror::Error;

use super::bitio::{BitReader, BitWriter, OutOfData};
use super::cube::{max_sample, HyperspectralCube};
use super::predictor::{
    map_residual, predict_sample, unmap_residual, update_weights, Plane, PredictorParams,
    PredictorState,
};

pub const FORMAT_VERSION: u16 = 1;
pub const MAGIC: &[u8; 4] = b"HSCS";
pub const HEADER_LEN: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoderParams {
    /// Unary prefixes this long escape to a raw sample.
    pub u_max: u8,
    pub initial_k: u8,
    /// Counter value at which the running statistics are halved.
    pub counter_limit: u16,
}

impl Default for CoderParams {
    fn default() -> Self {
        CoderParams {
            u_max: 16,
            initial_k: 3,
            counter_limit: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CodecParams {
    pub predictor: PredictorParams,
    pub coder: CoderParams,
}

impl CodecParams {
    pub fn with_p(p: u8) -> Self {
        let mut c = CodecParams::default();
        c.predictor.p = p;
        c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u16,
    pub width: u32,
    pub height: u32,
    pub bands: u16,
    pub bit_depth: u8,
    pub params: CodecParams,
    pub body_len: u64,
    pub body_crc: u32,
}

impl StreamHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[0..4].copy_from_slice(MAGIC);
        b[4..6].copy_from_slice(&self.version.to_le_bytes());
        b[6..10].copy_from_slice(&self.width.to_le_bytes());
        b[10..14].copy_from_slice(&self.height.to_le_bytes());
        b[14..16].copy_from_slice(&self.bands.to_le_bytes());
        b[16] = self.bit_depth;
        b[17] = self.params.predictor.p;
        b[18] = self.params.predictor.weight_resolution;
        b[19] = self.params.predictor.update_scaling;
        b[20] = self.params.coder.u_max;
        b[21] = self.params.coder.initial_k;
        b[22..24].copy_from_slice(&self.params.coder.counter_limit.to_le_bytes());
        b[24..32].copy_from_slice(&self.body_len.to_le_bytes());
        b[32..36].copy_from_slice(&self.body_crc.to_le_bytes());
        b
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, DecodeError> {
        if bytes.len() < 4 {
            return Err(DecodeError::Truncated { offset: bytes.len() });
        }
        if &bytes[..4] != MAGIC {
            return Err(DecodeError::BadMagic);
        }
        if bytes.len() < 6 {
            return Err(DecodeError::Truncated { offset: bytes.len() });
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(DecodeError::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(DecodeError::Truncated { offset: bytes.len() });
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let h = StreamHeader {
            version,
            width: u32_at(6),
            height: u32_at(10),
            bands: u16::from_le_bytes([bytes[14], bytes[15]]),
            bit_depth: bytes[16],
            params: CodecParams {
                predictor: PredictorParams {
                    p: bytes[17],
                    weight_resolution: bytes[18],
                    update_scaling: bytes[19],
                },
                coder: CoderParams {
                    u_max: bytes[20],
                    initial_k: bytes[21],
                    counter_limit: u16::from_le_bytes([bytes[22], bytes[23]]),
                },
            },
            body_len: u64::from_le_bytes(bytes[24..32].try_into().unwrap()),
            body_crc: u32_at(32),
        };
        h.validate()?;
        Ok(h)
    }

    fn validate(&self) -> Result<(), DecodeError> {
        let bad = |offset: usize, reason: String| Err(DecodeError::InvalidHeader { offset, reason });
        if self.width == 0 {
            return bad(6, "width is zero".into());
        }
        if self.height == 0 {
            return bad(10, "height is zero".into());
        }
        if self.bands == 0 {
            return bad(14, "band count is zero".into());
        }
        if !(1..=16).contains(&self.bit_depth) {
            return bad(16, format!("bit depth {} outside 1..=16", self.bit_depth));
        }
        if let Err(e) = self.params.predictor.validate() {
            return bad(17, e);
        }
        if !(1..=32).contains(&self.params.coder.u_max) {
            return bad(20, format!("u_max {} outside 1..=32", self.params.coder.u_max));
        }
        if self.params.coder.initial_k > 16 {
            return bad(21, format!("initial k {} exceeds 16", self.params.coder.initial_k));
        }
        if self.params.coder.counter_limit < 2 {
            return bad(22, "counter limit below 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedStream {
    pub header: StreamHeader,
    pub body: Vec<u8>,
}

impl EncodedStream {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.header.to_bytes().to_vec();
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let header = StreamHeader::parse(bytes)?;
        let body = &bytes[HEADER_LEN..];
        let declared = header.body_len as usize;
        if body.len() < declared {
            return Err(DecodeError::Truncated { offset: bytes.len() });
        }
        if body.len() > declared {
            return Err(DecodeError::TrailingBytes {
                offset: HEADER_LEN + declared,
            });
        }
        if crc32fast::hash(body) != header.body_crc {
            return Err(DecodeError::ChecksumMismatch { offset: HEADER_LEN });
        }
        Ok(EncodedStream {
            header,
            body: body.to_vec(),
        })
    }

    pub fn len_bits(&self) -> u64 {
        (HEADER_LEN + self.body.len()) as u64 * 8
    }

    /// Raw size at `bit_depth` bits per sample over encoded size.
    pub fn ratio(&self) -> f64 {
        let h = &self.header;
        let raw = h.width as f64 * h.height as f64 * h.bands as f64 * h.bit_depth as f64;
        raw / self.len_bits() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("stream truncated at byte offset {offset}")]
    Truncated { offset: usize },
    #[error("bad magic at byte offset 0")]
    BadMagic,
    #[error("format version mismatch at byte offset 4: stream is v{found}, decoder is v{expected}")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("invalid header at byte offset {offset}: {reason}")]
    InvalidHeader { offset: usize, reason: String },
    #[error("unexpected trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: usize },
    #[error("body checksum mismatch (body starts at byte offset {offset})")]
    ChecksumMismatch { offset: usize },
    #[error("decoded sample out of range at byte offset {offset}")]
    SampleRange { offset: usize },
}

impl DecodeError {
    pub fn offset(&self) -> usize {
        match self {
            DecodeError::BadMagic => 0,
            DecodeError::VersionMismatch { .. } => 4,
            DecodeError::Truncated { offset }
            | DecodeError::InvalidHeader { offset, .. }
            | DecodeError::TrailingBytes { offset }
            | DecodeError::ChecksumMismatch { offset }
            | DecodeError::SampleRange { offset } => *offset,
        }
    }
}

/// Per-band adaptive Golomb-Rice statistics.
#[derive(Debug, Clone)]
struct AdaptiveRice {
    counter: u64,
    accumulator: u64,
    params: CoderParams,
    bit_depth: u32,
}

impl AdaptiveRice {
    fn new(params: CoderParams, bit_depth: u8) -> Self {
        AdaptiveRice {
            counter: 1,
            accumulator: 1 << params.initial_k,
            params,
            bit_depth: bit_depth as u32,
        }
    }

    fn k(&self) -> u32 {
        let mut k = 0;
        while k < self.bit_depth && (self.counter << (k + 1)) <= self.accumulator {
            k += 1;
        }
        k
    }

    fn update(&mut self, m: u64) {
        self.accumulator += m;
        self.counter += 1;
        if self.counter >= self.params.counter_limit as u64 {
            self.counter >>= 1;
            self.accumulator >>= 1;
        }
    }

    fn encode(&mut self, w: &mut BitWriter, m: u64) {
        let k = self.k();
        let q = m >> k;
        if q < self.params.u_max as u64 {
            w.zeros(q as u32);
            w.write(1, 1);
            w.write(m, k);
        } else {
            w.zeros(self.params.u_max as u32);
            w.write(m, self.bit_depth);
        }
        self.update(m);
    }

    fn decode(&mut self, r: &mut BitReader<'_>) -> Result<u64, OutOfData> {
        let k = self.k();
        let mut q = 0u64;
        let m = loop {
            if q == self.params.u_max as u64 {
                break r.read(self.bit_depth)?;
            }
            if r.read_bit()? == 1 {
                break (q << k) | r.read(k)?;
            }
            q += 1;
        };
        self.update(m);
        Ok(m)
    }
}

/// Weight vectors after each sample, in coding order.
pub type WeightTrace = Vec<Vec<i64>>;

pub fn encode(cube: &HyperspectralCube, params: CodecParams) -> EncodedStream {
    encode_traced(cube, params, None)
}

pub fn encode_traced(
    cube: &HyperspectralCube,
    params: CodecParams,
    mut trace: Option<&mut WeightTrace>,
) -> EncodedStream {
    let plane = Plane {
        width: cube.width,
        height: cube.height,
        samples: cube.samples(),
    };
    let d = cube.bit_depth;
    let mut w = BitWriter::new();
    for z in 0..cube.bands {
        let mut state = PredictorState::for_band(params.predictor, z);
        let mut rice = AdaptiveRice::new(params.coder, d);
        for y in 0..cube.height {
            for x in 0..cube.width {
                let s = cube.get(x, y, z) as i64;
                if (x, y, z) == (0, 0, 0) {
                    w.write(s as u64, d as u32);
                } else {
                    let pred = predict_sample(&plane, x, y, z, d, &state);
                    rice.encode(&mut w, map_residual(pred.value, s, d));
                    update_weights(&mut state, s - pred.value, &pred.diffs);
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(state.weights.clone());
                }
            }
        }
        w.align();
    }
    let body = w.finish();
    EncodedStream {
        header: StreamHeader {
            version: FORMAT_VERSION,
            width: cube.width as u32,
            height: cube.height as u32,
            bands: cube.bands as u16,
            bit_depth: d,
            params,
            body_len: body.len() as u64,
            body_crc: crc32fast::hash(&body),
        },
        body,
    }
}

pub fn decode(stream: &EncodedStream) -> Result<HyperspectralCube, DecodeError> {
    decode_traced(stream, None)
}

pub fn decode_bytes(bytes: &[u8]) -> Result<HyperspectralCube, DecodeError> {
    decode(&EncodedStream::from_bytes(bytes)?)
}

pub fn decode_traced(
    stream: &EncodedStream,
    trace: Option<&mut WeightTrace>,
) -> Result<HyperspectralCube, DecodeError> {
    let h = &stream.header;
    let partial = decode_bands(h, &stream.body, trace);
    if let Some(e) = partial.error {
        return Err(e);
    }
    Ok(HyperspectralCube::new(
        h.width as usize,
        h.height as usize,
        h.bands as usize,
        h.bit_depth,
        partial.samples,
    )
    .expect("decoder only emits in-range samples"))
}

/// Result of decoding as many whole bands as the body allows.
#[derive(Debug, Clone)]
pub struct PartialDecode {
    pub bands_complete: usize,
    /// Samples of the complete bands only.
    pub samples: Vec<u16>,
    pub error: Option<DecodeError>,
}

/// Decodes band by band without the checksum gate, so a truncated stream
/// still yields its leading bands.
pub fn decode_partial(bytes: &[u8]) -> Result<PartialDecode, DecodeError> {
    let header = StreamHeader::parse(bytes)?;
    Ok(decode_bands(&header, &bytes[HEADER_LEN..], None))
}

fn decode_bands(
    h: &StreamHeader,
    body: &[u8],
    mut trace: Option<&mut WeightTrace>,
) -> PartialDecode {
    let (width, height, bands) = (h.width as usize, h.height as usize, h.bands as usize);
    let d = h.bit_depth;
    let max = max_sample(d) as i64;
    let plane_len = width * height;
    let mut samples = vec![0u16; plane_len * bands];
    let mut r = BitReader::new(body);
    for z in 0..bands {
        let mut state = PredictorState::for_band(h.params.predictor, z);
        let mut rice = AdaptiveRice::new(h.params.coder, d);
        for y in 0..height {
            for x in 0..width {
                let idx = (z * height + y) * width + x;
                let fail = |error| PartialDecode {
                    bands_complete: z,
                    samples: samples[..z * plane_len].to_vec(),
                    error: Some(error),
                };
                let s = if (x, y, z) == (0, 0, 0) {
                    match r.read(d as u32) {
                        Ok(v) => v as i64,
                        Err(OutOfData(o)) => return fail(DecodeError::Truncated { offset: HEADER_LEN + o }),
                    }
                } else {
                    let plane = Plane {
                        width,
                        height,
                        samples: &samples,
                    };
                    let pred = predict_sample(&plane, x, y, z, d, &state);
                    let m = match rice.decode(&mut r) {
                        Ok(m) => m,
                        Err(OutOfData(o)) => return fail(DecodeError::Truncated { offset: HEADER_LEN + o }),
                    };
                    let s = unmap_residual(pred.value, m, d);
                    if !(0..=max).contains(&s) {
                        return fail(DecodeError::SampleRange {
                            offset: HEADER_LEN + r.byte_pos(),
                        });
                    }
                    update_weights(&mut state, s - pred.value, &pred.diffs);
                    s
                };
                samples[idx] = s as u16;
                if let Some(t) = trace.as_deref_mut() {
                    t.push(state.weights.clone());
                }
            }
        }
        r.align();
    }
    PartialDecode {
        bands_complete: bands,
        samples,
        error: None,
    }
}
