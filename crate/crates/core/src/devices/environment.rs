//! Rigid-body attitude dynamics under magnetic torque, integrated with a
//! fixed-step RK4.
//!
//! The attitude quaternion maps inertial vectors into the body frame, so a
//! body spinning at ω sees fixed inertial vectors rotate as `v̇ = -ω × v`.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::actuators::magnetic_torque;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentState {
    pub omega: Vector3<f64>,
    pub inertia: Matrix3<f64>,
    pub b_inertial: Vector3<f64>,
    pub attitude: UnitQuaternion<f64>,
}

/// Per-step record of the torque applied and the work it did.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub torque: [f64; 3],
    /// ∫ τ·ω dt over the step (Simpson's rule).
    pub work: f64,
    pub energy_before: f64,
    pub energy_after: f64,
}

#[derive(Clone, Copy)]
struct State {
    w: Vector3<f64>,
    q: Quaternion<f64>,
}

impl EnvironmentState {
    pub fn new(omega: Vector3<f64>, inertia_diag: Vector3<f64>, b_inertial: Vector3<f64>) -> Self {
        EnvironmentState {
            omega,
            inertia: Matrix3::from_diagonal(&inertia_diag),
            b_inertial,
            attitude: UnitQuaternion::identity(),
        }
    }

    pub fn b_body(&self) -> Vector3<f64> {
        self.attitude.transform_vector(&self.b_inertial)
    }

    pub fn kinetic_energy(&self) -> f64 {
        0.5 * self.omega.dot(&(self.inertia * self.omega))
    }

    pub fn angular_momentum_inertial(&self) -> Vector3<f64> {
        self.attitude.inverse_transform_vector(&(self.inertia * self.omega))
    }

    fn deriv(&self, s: State, dipole: &Vector3<f64>) -> State {
        let q = UnitQuaternion::new_normalize(s.q);
        let torque = magnetic_torque(dipole, &q.transform_vector(&self.b_inertial));
        let iw = self.inertia * s.w;
        let inv = self.inertia.try_inverse().expect("positive inertia");
        let w_dot = inv * (torque - s.w.cross(&iw));
        let q_dot = Quaternion::from_parts(0.0, s.w) * s.q * -0.5;
        State { w: w_dot, q: q_dot }
    }

    fn rk4(&self, s: State, dt: f64, dipole: &Vector3<f64>) -> State {
        let add = |a: State, b: State, h: f64| State {
            w: a.w + b.w * h,
            q: a.q + b.q * h,
        };
        let k1 = self.deriv(s, dipole);
        let k2 = self.deriv(add(s, k1, dt / 2.0), dipole);
        let k3 = self.deriv(add(s, k2, dt / 2.0), dipole);
        let k4 = self.deriv(add(s, k3, dt), dipole);
        State {
            w: s.w + (k1.w + k2.w * 2.0 + k3.w * 2.0 + k4.w) * (dt / 6.0),
            q: s.q + (k1.q + k2.q * 2.0 + k3.q * 2.0 + k4.q) * (dt / 6.0),
        }
    }

    fn power(&self, s: State, dipole: &Vector3<f64>) -> f64 {
        let q = UnitQuaternion::new_normalize(s.q);
        magnetic_torque(dipole, &q.transform_vector(&self.b_inertial)).dot(&s.w)
    }

    /// Advances `dt` seconds holding `dipole` constant.
    pub fn env_step(&mut self, dt: f64, dipole: &Vector3<f64>) -> StepLog {
        assert!(dt > 0.0);
        let s0 = State {
            w: self.omega,
            q: *self.attitude.quaternion(),
        };
        let energy_before = self.kinetic_energy();
        let torque = magnetic_torque(dipole, &self.b_body());
        let mid = self.rk4(s0, dt / 2.0, dipole);
        let s1 = self.rk4(s0, dt, dipole);
        let work = dt / 6.0
            * (self.power(s0, dipole) + 4.0 * self.power(mid, dipole) + self.power(s1, dipole));
        self.omega = s1.w;
        self.attitude = UnitQuaternion::new_normalize(s1.q);
        StepLog {
            torque: torque.into(),
            work,
            energy_before,
            energy_after: self.kinetic_energy(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torque_free(omega: Vector3<f64>) -> EnvironmentState {
        EnvironmentState::new(omega, Vector3::new(0.05, 0.05, 0.02), Vector3::new(3e-5, 3e-5, 0.0))
    }

    #[test]
    fn principal_axis_spin_is_a_fixed_point() {
        let mut env = torque_free(Vector3::new(0.0, 0.0, 0.3));
        for _ in 0..100 {
            env.env_step(0.1, &Vector3::zeros());
        }
        assert!((env.omega - Vector3::new(0.0, 0.0, 0.3)).norm() < 1e-6 * 0.3);
    }

    #[test]
    fn body_field_rotates_against_spin() {
        let mut env = torque_free(Vector3::new(0.0, 0.0, 0.3));
        for _ in 0..37 {
            env.env_step(0.1, &Vector3::zeros());
        }
        let angle: f64 = -0.3 * 3.7;
        let b = env.b_inertial;
        let expect = Vector3::new(
            b.x * angle.cos() - b.y * angle.sin(),
            b.x * angle.sin() + b.y * angle.cos(),
            0.0,
        );
        assert!((env.b_body() - expect).norm() < 1e-12);
    }

    #[test]
    fn torque_free_energy_and_momentum_conserved() {
        let mut env = torque_free(Vector3::new(0.05, -0.08, 0.25));
        let e0 = env.kinetic_energy();
        let l0 = env.angular_momentum_inertial();
        for _ in 0..600 {
            env.env_step(0.1, &Vector3::zeros());
            assert!((env.attitude.quaternion().norm() - 1.0).abs() < 1e-9);
        }
        assert!(((env.kinetic_energy() - e0) / e0).abs() < 1e-6);
        assert!((env.angular_momentum_inertial() - l0).norm() / l0.norm() < 1e-6);
    }

    #[test]
    fn logged_work_matches_energy_change() {
        let mut env = torque_free(Vector3::new(0.01, -0.01, 0.3));
        let m = Vector3::new(0.2, -0.1, 0.05);
        for _ in 0..200 {
            let log = env.env_step(0.1, &m);
            let de = log.energy_after - log.energy_before;
            assert!((log.work - de).abs() < 1e-12, "{} vs {}", log.work, de);
        }
    }
}
