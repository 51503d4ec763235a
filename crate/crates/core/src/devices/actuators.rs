use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuatorState {
    /// PWM duty per magnetorquer axis.
    pub magnetorquer_duty: [f64; 3],
    /// A·m² at full duty.
    pub dipole_per_duty: f64,
    /// Reaction wheel speed, rad/s. Not driven by any control law.
    pub wheel_speed: f64,
}

impl ActuatorState {
    pub fn new(dipole_per_duty: f64) -> Self {
        ActuatorState {
            magnetorquer_duty: [0.0; 3],
            dipole_per_duty,
            wheel_speed: 0.0,
        }
    }

    pub fn set_magnetorquer(&mut self, duty: [f64; 3]) {
        self.magnetorquer_duty = duty.map(|d| if d.is_nan() { 0.0 } else { d.clamp(-1.0, 1.0) });
    }

    pub fn dipole(&self) -> Vector3<f64> {
        Vector3::from(self.magnetorquer_duty) * self.dipole_per_duty
    }
}

pub fn magnetic_torque(dipole: &Vector3<f64>, b_body: &Vector3<f64>) -> Vector3<f64> {
    dipole.cross(b_body)
}
