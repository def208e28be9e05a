//! State space and vector field of a two-level atom moving in a tilted
//! standing-wave lattice.
//!
//! The atom is a point particle with dimensionless position `x`, momentum `p`
//! and an internal Bloch vector `(u, v, z)`. Three dimensionless control
//! parameters enter the equations of motion: the recoil frequency `omega_r`,
//! the atom-field detuning `delta` and the applied force `kappa`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest accepted deviation of `u² + v² + z²` from one when an
/// [`AtomState`] is built through [`AtomState::new`].
pub const BLOCH_NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("invalid physical parameter `{field}`: {reason}")]
    InvalidPhysicalParams { field: &'static str, reason: String },
    #[error("invalid control parameter `{field}`: {reason}")]
    InvalidControlParams { field: &'static str, reason: String },
    #[error("Bloch vector is not unit length: |u²+v²+z² - 1| = {deviation:e}")]
    NotUnitBloch { deviation: f64 },
    #[error("non-finite component `{field}` in atom state")]
    NonFinite { field: &'static str },
}

/// Dimensional parameters of the lattice and the atom, in any consistent
/// unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Photon momentum `ħ k_f`.
    pub hbar_kf: f64,
    /// Lattice wave number `k_f`.
    pub kf: f64,
    /// Atomic mass.
    pub m_a: f64,
    /// Maximal Rabi frequency (rad/s).
    pub rabi: f64,
    /// Atomic transition frequency (rad/s).
    pub omega_a: f64,
    /// Laser frequency (rad/s).
    pub omega_f: f64,
    /// Static force along the lattice axis.
    pub force: f64,
}

impl PhysicalParams {
    fn validate(&self) -> Result<(), DynamicsError> {
        let positive = [
            ("m_a", self.m_a),
            ("rabi", self.rabi),
            ("kf", self.kf),
            ("hbar_kf", self.hbar_kf),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidPhysicalParams {
                    field,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        for (field, value) in [
            ("omega_a", self.omega_a),
            ("omega_f", self.omega_f),
            ("force", self.force),
        ] {
            if !value.is_finite() {
                return Err(DynamicsError::InvalidPhysicalParams {
                    field,
                    reason: format!("must be finite, got {value}"),
                });
            }
        }
        Ok(())
    }
}

/// The three dimensionless control parameters of the equations of motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub omega_r: f64,
    pub delta: f64,
    pub kappa: f64,
}

impl ControlParams {
    /// Validated constructor. `delta` and `kappa` may take either sign.
    pub fn new(omega_r: f64, delta: f64, kappa: f64) -> Result<Self, DynamicsError> {
        let c = Self {
            omega_r,
            delta,
            kappa,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.omega_r.is_finite() && self.omega_r > 0.0) {
            return Err(DynamicsError::InvalidControlParams {
                field: "omega_r",
                reason: format!("must be finite and > 0, got {}", self.omega_r),
            });
        }
        if !self.delta.is_finite() {
            return Err(DynamicsError::InvalidControlParams {
                field: "delta",
                reason: format!("must be finite, got {}", self.delta),
            });
        }
        if !self.kappa.is_finite() {
            return Err(DynamicsError::InvalidControlParams {
                field: "kappa",
                reason: format!("must be finite, got {}", self.kappa),
            });
        }
        Ok(())
    }

    pub fn with_delta(self, delta: f64) -> Self {
        Self { delta, ..self }
    }

    pub fn with_kappa(self, kappa: f64) -> Self {
        Self { kappa, ..self }
    }
}

impl Default for ControlParams {
    /// `omega_r = 1e-3`, `kappa = 0.01` and the chaotic-walking detuning
    /// `delta = 0.15`.
    fn default() -> Self {
        Self {
            omega_r: 1e-3,
            delta: 0.15,
            kappa: 0.01,
        }
    }
}

/// Maps dimensional parameters onto the dimensionless control set:
/// `omega_r = ħk_f²/(m_a Ω)`, `delta = (ω_f − ω_a)/Ω`, `kappa = F/(ħk_f Ω)`.
///
/// The same Rabi frequency `Ω` is used for the time scale and the coupling.
pub fn normalize(phys: &PhysicalParams) -> Result<ControlParams, DynamicsError> {
    phys.validate()?;
    let omega_r = phys.hbar_kf * phys.kf / (phys.m_a * phys.rabi);
    let delta = (phys.omega_f - phys.omega_a) / phys.rabi;
    let kappa = phys.force / (phys.hbar_kf * phys.rabi);
    ControlParams::new(omega_r, delta, kappa)
}

/// Phase point `(x, p, u, v, z)`.
///
/// Fields are public for numerical code. [`AtomState::new`] enforces the
/// unit Bloch-vector invariant; [`AtomState::from_array`] does not and is
/// used for integrated states, whose norm drift must remain observable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AtomState {
    pub x: f64,
    pub p: f64,
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl AtomState {
    pub fn new(x: f64, p: f64, u: f64, v: f64, z: f64) -> Result<Self, DynamicsError> {
        let s = Self { x, p, u, v, z };
        s.check_finite()?;
        let deviation = (s.bloch_norm_sq() - 1.0).abs();
        if deviation > BLOCH_NORM_TOLERANCE {
            return Err(DynamicsError::NotUnitBloch { deviation });
        }
        Ok(s)
    }

    /// Atom in the internal ground state `u = v = 0, z = −1`.
    pub fn ground(x: f64, p: f64) -> Self {
        Self {
            x,
            p,
            u: 0.0,
            v: 0.0,
            z: -1.0,
        }
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            x: a[0],
            p: a[1],
            u: a[2],
            v: a[3],
            z: a[4],
        }
    }

    pub fn to_array(self) -> [f64; 5] {
        [self.x, self.p, self.u, self.v, self.z]
    }

    pub fn bloch_norm_sq(&self) -> f64 {
        bloch_norm_sq(self)
    }

    /// Image under the time-reversal involution `(p, v) → (−p, −v)`.
    /// Integrating the image forward is integrating the original backward.
    pub fn time_reversed(self) -> Self {
        Self {
            p: -self.p,
            v: -self.v,
            ..self
        }
    }

    fn check_finite(&self) -> Result<(), DynamicsError> {
        for (field, value) in [
            ("x", self.x),
            ("p", self.p),
            ("u", self.u),
            ("v", self.v),
            ("z", self.z),
        ] {
            if !value.is_finite() {
                return Err(DynamicsError::NonFinite { field });
            }
        }
        Ok(())
    }
}

/// Time derivative of an [`AtomState`] with respect to dimensionless time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateDerivative {
    pub dx: f64,
    pub dp: f64,
    pub du: f64,
    pub dv: f64,
    pub dz: f64,
}

impl StateDerivative {
    pub fn to_array(self) -> [f64; 5] {
        [self.dx, self.dp, self.du, self.dv, self.dz]
    }
}

/// Tangent-space vector, components ordered as `(x, p, u, v, z)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentVector(pub [f64; 5]);

impl TangentVector {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Unit vector with all five components equal.
    pub fn diagonal() -> Self {
        Self([1.0 / 5f64.sqrt(); 5])
    }
}

/// Bloch–Hamilton vector field on a raw `(x, p, u, v, z)` array.
#[inline]
pub(crate) fn field(y: &[f64], c: &ControlParams, dy: &mut [f64]) {
    let (sin_x, cos_x) = y[0].sin_cos();
    dy[0] = c.omega_r * y[1];
    dy[1] = -y[2] * sin_x - c.kappa;
    dy[2] = c.delta * y[3];
    dy[3] = -c.delta * y[2] + 2.0 * y[4] * cos_x;
    dy[4] = -2.0 * y[3] * cos_x;
}

/// Jacobian of [`field`] at `y` applied to the tangent `t`.
#[inline]
pub(crate) fn field_jacobian_apply(y: &[f64], t: &[f64], c: &ControlParams, dt: &mut [f64]) {
    let (sin_x, cos_x) = y[0].sin_cos();
    let (u, v, z) = (y[2], y[3], y[4]);
    dt[0] = c.omega_r * t[1];
    dt[1] = -u * cos_x * t[0] - sin_x * t[2];
    dt[2] = c.delta * t[3];
    dt[3] = -2.0 * z * sin_x * t[0] - c.delta * t[2] + 2.0 * cos_x * t[4];
    dt[4] = 2.0 * v * sin_x * t[0] - 2.0 * cos_x * t[3];
}

pub fn rhs(s: &AtomState, c: &ControlParams) -> StateDerivative {
    let mut d = [0.0; 5];
    field(&s.to_array(), c, &mut d);
    StateDerivative {
        dx: d[0],
        dp: d[1],
        du: d[2],
        dv: d[3],
        dz: d[4],
    }
}

pub fn jacobian_apply(s: &AtomState, t: &TangentVector, c: &ControlParams) -> TangentVector {
    let mut d = [0.0; 5];
    field_jacobian_apply(&s.to_array(), &t.0, c, &mut d);
    TangentVector(d)
}

/// Total energy `(ω_r/2)p² + κx − u cos x − (Δ/2)z`, an integral of motion.
pub fn energy(s: &AtomState, c: &ControlParams) -> f64 {
    0.5 * c.omega_r * s.p * s.p + c.kappa * s.x - s.u * s.x.cos() - 0.5 * c.delta * s.z
}

/// Squared Bloch-vector length `u² + v² + z²`, an integral of motion.
pub fn bloch_norm_sq(s: &AtomState) -> f64 {
    s.u * s.u + s.v * s.v + s.z * s.z
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn reference() -> ControlParams {
        ControlParams::new(1e-3, 0.15, 0.01).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn rhs_ground_state_at_origin() {
        let d = rhs(&AtomState::ground(0.0, 10.0), &reference()).to_array();
        let want = [0.01, -0.01, 0.0, -2.0, 0.0];
        for (g, w) in d.iter().zip(want) {
            assert!(close(*g, w, 1e-15), "{d:?}");
        }
    }

    #[test]
    fn rhs_at_node() {
        let s = AtomState::new(FRAC_PI_2, 0.0, 1.0, 0.0, 0.0).unwrap();
        let d = rhs(&s, &reference()).to_array();
        let want = [0.0, -1.01, 0.0, -0.15, 0.0];
        for (g, w) in d.iter().zip(want) {
            assert!(close(*g, w, 1e-15), "{d:?}");
        }
    }

    #[test]
    fn force_only_at_resonance_without_dipole() {
        let c = ControlParams::new(1e-3, 0.0, 0.37).unwrap();
        for i in 0..50 {
            let x = -7.0 + 0.3 * i as f64;
            let s = AtomState::from_array([x, 3.0, 0.0, 0.6, 0.8]);
            assert_eq!(rhs(&s, &c).dp, -0.37);
        }
    }

    #[test]
    fn jacobian_columns() {
        let c = reference();
        let s = AtomState::new(0.3, 2.0, 0.6, 0.0, 0.8).unwrap();
        let out = jacobian_apply(&s, &TangentVector([0.0, 1.0, 0.0, 0.0, 0.0]), &c);
        assert_eq!(out.0, [1e-3, 0.0, 0.0, 0.0, 0.0]);

        let node = AtomState::new(FRAC_PI_2, 0.0, 1.0, 0.0, 0.0).unwrap();
        let out = jacobian_apply(&node, &TangentVector([0.0, 0.0, 1.0, 0.0, 0.0]), &c);
        let want = [0.0, -1.0, 0.0, -0.15, 0.0];
        for (g, w) in out.0.iter().zip(want) {
            assert!(close(*g, w, 1e-15));
        }
    }

    #[test]
    fn energy_examples() {
        let c = reference();
        assert!(close(
            energy(&AtomState::ground(0.0, 10.0), &c),
            0.125,
            1e-15
        ));
        let s = AtomState::new(PI, 0.0, 1.0, 0.0, 0.0).unwrap();
        assert!(close(energy(&s, &c), 0.01 * PI + 1.0, 1e-15));
        let c0 = ControlParams::new(1e-3, 0.0, 0.01).unwrap();
        assert_eq!(energy(&AtomState::ground(0.0, 0.0), &c0), 0.0);
    }

    #[test]
    fn bloch_norm_examples() {
        assert_eq!(bloch_norm_sq(&AtomState::ground(0.0, 0.0)), 1.0);
        assert!(close(
            bloch_norm_sq(&AtomState::from_array([0.0, 0.0, 0.6, 0.0, 0.8])),
            1.0,
            1e-15
        ));
        assert_eq!(
            bloch_norm_sq(&AtomState::from_array([0.0, 0.0, 0.5, 0.5, 0.5])),
            0.75
        );
    }

    #[test]
    fn state_constructor_rejects_off_sphere() {
        assert!(matches!(
            AtomState::new(0.0, 0.0, 0.5, 0.5, 0.5),
            Err(DynamicsError::NotUnitBloch { .. })
        ));
        assert!(AtomState::new(0.0, 0.0, 0.6, 0.0, 0.8).is_ok());
        assert!(matches!(
            AtomState::new(f64::NAN, 0.0, 0.0, 0.0, -1.0),
            Err(DynamicsError::NonFinite { field: "x" })
        ));
    }

    #[test]
    fn control_params_validation() {
        assert!(ControlParams::new(-1.0, 0.0, 0.0).is_err());
        assert!(ControlParams::new(0.0, 0.0, 0.0).is_err());
        assert!(ControlParams::new(1e-3, -0.4, -0.2).is_ok());
    }

    fn phys() -> PhysicalParams {
        PhysicalParams {
            hbar_kf: 2.0,
            kf: 5e-4,
            m_a: 1.0,
            rabi: 1.0,
            omega_a: 100.0,
            omega_f: 100.0,
            force: 0.0,
        }
    }

    #[test]
    fn normalize_resonance_and_zero_force() {
        let c = normalize(&phys()).unwrap();
        assert_eq!(c.delta, 0.0);
        assert_eq!(c.kappa, 0.0);
        assert!(close(c.omega_r, 1e-3, 1e-18));
    }

    #[test]
    fn normalize_general() {
        let p = PhysicalParams {
            omega_f: 100.3,
            force: 0.04,
            rabi: 2.0,
            ..phys()
        };
        let c = normalize(&p).unwrap();
        assert!(close(c.delta, 0.15, 1e-12));
        assert!(close(c.kappa, 0.01, 1e-15));
        assert!(close(c.omega_r, 5e-4, 1e-18));
    }

    #[test]
    fn normalize_rejects_bad_params() {
        for bad in [
            PhysicalParams { m_a: 0.0, ..phys() },
            PhysicalParams {
                rabi: -1.0,
                ..phys()
            },
            PhysicalParams { kf: 0.0, ..phys() },
        ] {
            assert!(matches!(
                normalize(&bad),
                Err(DynamicsError::InvalidPhysicalParams { .. })
            ));
        }
    }

    #[test]
    fn time_reversal_is_involution_and_conjugates_field() {
        let c = reference();
        let s = AtomState::new(0.4, 3.0, 0.6, 0.0, 0.8).unwrap();
        assert_eq!(s.time_reversed().time_reversed(), s);
        // R f(R s) = -f(s)
        let a = rhs(&s, &c);
        let b = rhs(&s.time_reversed(), &c);
        assert!(close(b.dx, -a.dx, 1e-15));
        assert!(close(-b.dp, -a.dp, 1e-15));
        assert!(close(b.du, -a.du, 1e-15));
        assert!(close(-b.dv, -a.dv, 1e-15));
        assert!(close(b.dz, -a.dz, 1e-15));
    }
}
