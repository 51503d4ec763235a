//! Lossless hyperspectral compression: adaptive spectral prediction,
//! residual folding and per-band adaptive Golomb-Rice coding.

mod bitio;
mod codec;
mod cube;
mod predictor;

pub use codec::{
    decode, decode_bytes, decode_partial, decode_traced, encode, encode_traced, CodecParams,
    CoderParams, DecodeError, EncodedStream, PartialDecode, StreamHeader, WeightTrace,
    FORMAT_VERSION, HEADER_LEN,
};
pub use cube::{max_sample, sidecar_path, CubeError, HyperspectralCube};
pub use predictor::{
    map_residual, predict_sample, unmap_residual, update_weights, Plane, PredictorParams,
    PredictorState, Prediction,
};
