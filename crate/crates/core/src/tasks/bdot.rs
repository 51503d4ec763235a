use nalgebra::Vector3;

use crate::simkernel::SimTime;

/// Samples further apart than this are not differenced.
const MAX_GAP_MS: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct BdotState {
    pub prev_b: Option<Vector3<f64>>,
    pub prev_time: SimTime,
    pub gain_k: f64,
}

impl BdotState {
    pub fn new(gain_k: f64) -> Self {
        assert!(gain_k >= 0.0);
        BdotState {
            prev_b: None,
            prev_time: SimTime::ZERO,
            gain_k,
        }
    }

    /// B-dot law: m = -k dB/dt from a first difference of body-frame field
    /// samples, returned as per-axis duty clamped to [-1, 1].
    pub fn command(&mut self, b: Vector3<f64>, now: SimTime, dipole_per_duty: f64) -> [f64; 3] {
        let prev = self.prev_b.replace(b);
        let dt_ms = now.saturating_sub(self.prev_time);
        self.prev_time = now;
        match prev {
            Some(p) if dt_ms > 0 && dt_ms <= MAX_GAP_MS => {
                let b_dot = (b - p) / (dt_ms as f64 / 1000.0);
                let m = -self.gain_k * b_dot;
                (m / dipole_per_duty).map(|d| d.clamp(-1.0, 1.0)).into()
            }
            _ => [0.0; 3],
        }
    }

    pub fn reset(&mut self) {
        self.prev_b = None;
    }
}
