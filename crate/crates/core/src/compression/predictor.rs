//! Adaptive spectral predictor in the style of the CCSDS-123 prediction
//! stage, reduced to a neighbour-oriented local sum and central differences
//! taken from previous bands only.

use super::cube::max_sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredictorParams {
    /// Number of previous bands feeding the prediction.
    pub p: u8,
    /// Fractional bits of the fixed-point weights.
    pub weight_resolution: u8,
    /// Weight steps are `2^-update_scaling` in real units.
    pub update_scaling: u8,
}

impl Default for PredictorParams {
    fn default() -> Self {
        PredictorParams {
            p: 3,
            weight_resolution: 13,
            update_scaling: 10,
        }
    }
}

impl PredictorParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.p > 15 {
            return Err(format!("P = {} exceeds 15", self.p));
        }
        if !(4..=19).contains(&self.weight_resolution) {
            return Err(format!("weight resolution {} outside 4..=19", self.weight_resolution));
        }
        if self.update_scaling > self.weight_resolution {
            return Err(format!(
                "update scaling {} exceeds weight resolution {}",
                self.update_scaling, self.weight_resolution
            ));
        }
        Ok(())
    }

    pub fn weight_min(&self) -> i64 {
        -(1i64 << (self.weight_resolution + 2))
    }

    pub fn weight_max(&self) -> i64 {
        (1i64 << (self.weight_resolution + 2)) - 1
    }
}

/// Geometry plus read access to samples already known to both sides.
#[derive(Debug, Clone, Copy)]
pub struct Plane<'a> {
    pub width: usize,
    pub height: usize,
    pub samples: &'a [u16],
}

impl Plane<'_> {
    fn at(&self, x: usize, y: usize, z: usize) -> i64 {
        self.samples[(z * self.height + y) * self.width + x] as i64
    }

    /// Causal neighbour sum, four times the scale of one sample.
    /// Undefined at (0, 0).
    pub fn local_sum(&self, x: usize, y: usize, z: usize) -> i64 {
        let w = self.width;
        match (x, y) {
            (0, 0) => unreachable!("no causal neighbours at the origin"),
            (_, 0) => 4 * self.at(x - 1, 0, z),
            (0, _) if w == 1 => 4 * self.at(0, y - 1, z),
            (0, _) => 2 * (self.at(0, y - 1, z) + self.at(1, y - 1, z)),
            (_, _) if x == w - 1 => {
                self.at(x - 1, y, z) + self.at(x - 1, y - 1, z) + 2 * self.at(x, y - 1, z)
            }
            (_, _) => {
                self.at(x - 1, y, z)
                    + self.at(x - 1, y - 1, z)
                    + self.at(x, y - 1, z)
                    + self.at(x + 1, y - 1, z)
            }
        }
    }

    pub fn central_difference(&self, x: usize, y: usize, z: usize) -> i64 {
        4 * self.at(x, y, z) - self.local_sum(x, y, z)
    }
}

/// Weights for the band currently being coded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictorState {
    pub params: PredictorParams,
    pub weights: Vec<i64>,
}

impl PredictorState {
    /// Fresh weights for band `z`: 7/8 on the nearest band, each further
    /// band an eighth of the previous one.
    pub fn for_band(params: PredictorParams, z: usize) -> Self {
        let n = (params.p as usize).min(z);
        let mut weights = Vec::with_capacity(n);
        let mut w = (7i64 << params.weight_resolution) / 8;
        for _ in 0..n {
            weights.push(w);
            w /= 8;
        }
        PredictorState { params, weights }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub value: i64,
    pub diffs: Vec<i64>,
}

/// Predicts sample (x, y, z) from `plane`, which must hold every sample
/// preceding it in band-sequential order.
pub fn predict_sample(
    plane: &Plane<'_>,
    x: usize,
    y: usize,
    z: usize,
    bit_depth: u8,
    state: &PredictorState,
) -> Prediction {
    let max = max_sample(bit_depth) as i64;
    if x == 0 && y == 0 {
        let value = if state.weights.is_empty() {
            1i64 << (bit_depth - 1)
        } else {
            plane.at(0, 0, z - 1)
        };
        return Prediction { value, diffs: Vec::new() };
    }
    let sigma = plane.local_sum(x, y, z);
    if state.weights.is_empty() {
        return Prediction {
            value: ((sigma + 2) >> 2).clamp(0, max),
            diffs: Vec::new(),
        };
    }
    let diffs: Vec<i64> = (1..=state.weights.len())
        .map(|i| plane.central_difference(x, y, z - i))
        .collect();
    let omega = state.params.weight_resolution as u32;
    let dhat: i64 = state.weights.iter().zip(&diffs).map(|(w, d)| w * d).sum();
    let value = (dhat + (sigma << omega) + (1 << (omega + 1))) >> (omega + 2);
    Prediction {
        value: value.clamp(0, max),
        diffs,
    }
}

/// Sign-sign LMS step, clamped to the weight range.
pub fn update_weights(state: &mut PredictorState, error: i64, diffs: &[i64]) {
    let p = state.params;
    let step = 1i64 << (p.weight_resolution - p.update_scaling);
    let (lo, hi) = (p.weight_min(), p.weight_max());
    for (w, d) in state.weights.iter_mut().zip(diffs) {
        *w = (*w + error.signum() * d.signum() * step).clamp(lo, hi);
    }
}

/// Folds a signed residual into `0..=max_sample`, interleaving small
/// magnitudes and appending the one-sided tail.
pub fn map_residual(predicted: i64, actual: i64, bit_depth: u8) -> u64 {
    let max = max_sample(bit_depth) as i64;
    let delta = actual - predicted;
    let theta = predicted.min(max - predicted);
    if delta.abs() <= theta {
        if delta > 0 {
            (2 * delta - 1) as u64
        } else {
            (-2 * delta) as u64
        }
    } else {
        (theta + delta.abs()) as u64
    }
}

pub fn unmap_residual(predicted: i64, mapped: u64, bit_depth: u8) -> i64 {
    let max = max_sample(bit_depth) as i64;
    let theta = predicted.min(max - predicted);
    let m = mapped as i64;
    let delta = if m > 2 * theta {
        if theta == predicted {
            m - theta
        } else {
            theta - m
        }
    } else if m % 2 == 1 {
        (m + 1) / 2
    } else {
        -m / 2
    };
    predicted + delta
}
