use atomwalk_core::dynamics::{bloch_norm_sq, energy, jacobian_apply, rhs};
use atomwalk_core::{AtomState, ControlParams, TangentVector};
use proptest::prelude::*;

fn bloch_state() -> impl Strategy<Value = AtomState> {
    (
        -20.0..20.0f64,
        -30.0..30.0f64,
        0.0..std::f64::consts::PI,
        0.0..std::f64::consts::TAU,
    )
        .prop_map(|(x, p, theta, phi)| {
            AtomState::new(
                x,
                p,
                theta.sin() * phi.cos(),
                theta.sin() * phi.sin(),
                theta.cos(),
            )
            .unwrap()
        })
}

fn params() -> impl Strategy<Value = ControlParams> {
    (1e-4..1e-1f64, -2.0..2.0f64, -1.0..1.0f64)
        .prop_map(|(w, d, k)| ControlParams::new(w, d, k).unwrap())
}

fn tangent() -> impl Strategy<Value = TangentVector> {
    prop::array::uniform5(-1.0..1.0f64)
        .prop_filter("nonzero", |t| t.iter().any(|v| v.abs() > 1e-3))
        .prop_map(TangentVector)
}

fn shifted(s: &AtomState, t: &TangentVector, h: f64) -> AtomState {
    let a = s.to_array();
    AtomState::from_array(std::array::from_fn(|i| a[i] + h * t.0[i]))
}

fn norm(v: &[f64; 5]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn jacobian_matches_central_differences(s in bloch_state(), t in tangent(), c in params()) {
        let h = 1e-6;
        let fp = rhs(&shifted(&s, &t, h), &c).to_array();
        let fm = rhs(&shifted(&s, &t, -h), &c).to_array();
        let fd: [f64; 5] = std::array::from_fn(|i| (fp[i] - fm[i]) / (2.0 * h));
        let j = jacobian_apply(&s, &t, &c).0;
        let err: [f64; 5] = std::array::from_fn(|i| j[i] - fd[i]);
        let scale = norm(&j).max(1e-3);
        prop_assert!(norm(&err) / scale <= 1e-6, "err {:e} scale {scale}", norm(&err));
    }

    #[test]
    fn vector_field_preserves_both_integrals(s in bloch_state(), c in params()) {
        let d = rhs(&s, &c);
        let dn = 2.0 * (s.u * d.du + s.v * d.dv + s.z * d.dz);
        prop_assert!(dn.abs() < 1e-12);
        // dH/dτ along the field
        let dh = c.omega_r * s.p * d.dp
            + (c.kappa + s.u * s.x.sin()) * d.dx
            - s.x.cos() * d.du
            - 0.5 * c.delta * d.dz;
        prop_assert!(dh.abs() < 1e-12 * (1.0 + s.p.abs()), "{dh:e}");
    }

    #[test]
    fn reversal_conjugates_the_field(s in bloch_state(), c in params()) {
        let a = rhs(&s, &c);
        let b = rhs(&s.time_reversed(), &c);
        prop_assert_eq!(b.dx, -a.dx);
        prop_assert_eq!(b.dp, a.dp);
        prop_assert_eq!(b.du, -a.du);
        prop_assert_eq!(b.dv, a.dv);
        prop_assert_eq!(b.dz, -a.dz);
        prop_assert_eq!(energy(&s.time_reversed(), &c), energy(&s, &c));
    }

    #[test]
    fn resonance_force_is_uniform(x in -50.0..50.0f64, p in -20.0..20.0f64, theta in 0.0..std::f64::consts::TAU) {
        let s = AtomState::new(x, p, 0.0, theta.sin(), theta.cos()).unwrap();
        let c = ControlParams::new(1e-3, 0.0, 0.01).unwrap();
        prop_assert_eq!(rhs(&s, &c).dp, -0.01);
        prop_assert!((bloch_norm_sq(&s) - 1.0).abs() < 1e-12);
    }
}
