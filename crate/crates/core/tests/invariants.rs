use fpme::action::{action, transport_estimate};
use fpme::entropy::u_m_prime;
use fpme::grid::{discrete_divergence, discrete_gradient};
use fpme::means::theta_m;
use fpme::{kernel_matrix, make_grid, DensityField, KernelConfig, KernelMatrix, NodeField, PairField};
use proptest::prelude::*;

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.5), Just(1.0), Just(1.5), Just(2.0), 0.05f64..2.0]
}

fn kernel(n: usize) -> KernelMatrix {
    let g = make_grid(1, n).unwrap();
    kernel_matrix(&g, 0.5, &KernelConfig::default()).unwrap()
}

fn density(values: Vec<f64>) -> DensityField {
    let g = make_grid(1, values.len()).unwrap();
    DensityField::new(g, values).unwrap().normalized().unwrap()
}

proptest! {
    #[test]
    fn theta_is_a_symmetric_homogeneous_mean(s in 1e-3f64..10.0, t in 1e-3f64..10.0, m in exponent(), lam in 0.1f64..10.0) {
        let th = theta_m(s, t, m).unwrap();
        prop_assert!((th - theta_m(t, s, m).unwrap()).abs() <= 1e-13 * th);
        prop_assert!(th >= s.min(t) * (1.0 - 1e-13) && th <= s.max(t) * (1.0 + 1e-13));
        prop_assert!((theta_m(lam * s, lam * t, m).unwrap() - lam * th).abs() <= 1e-12 * lam * th);
    }

    #[test]
    fn theta_chain_identity(s in 1e-3f64..10.0, t in 1e-3f64..10.0, m in exponent()) {
        prop_assume!((s - t).abs() > 1e-6 * s.max(t));
        let th = theta_m(s, t, m).unwrap();
        let lhs = th * (u_m_prime(s, m).unwrap() - u_m_prime(t, m).unwrap());
        let rhs = s.powf(m) - t.powf(m);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
    }

    #[test]
    fn theta_is_monotone(s in 1e-3f64..10.0, t in 1e-3f64..10.0, ds in 0.0f64..1.0, m in exponent()) {
        prop_assert!(theta_m(s + ds, t, m).unwrap() >= theta_m(s, t, m).unwrap() * (1.0 - 1e-13));
    }

    #[test]
    fn divergence_is_adjoint_to_gradient(
        phi in prop::collection::vec(-1.0f64..1.0, 12),
        v in prop::collection::vec(-1.0f64..1.0, 66),
    ) {
        let k = kernel(12);
        let g = *k.grid();
        let hd = g.cell_volume();
        let phi = NodeField::new(g, phi).unwrap();
        let v = PairField::from_upper(g, v).unwrap();
        let div = discrete_divergence(&v, &k).unwrap();
        let lhs = phi.inner(&div).unwrap();
        let grad = discrete_gradient(&phi);
        let pairs: f64 = (0..12)
            .flat_map(|i| (i + 1..12).map(move |j| (i, j)))
            .map(|(i, j)| grad.get(i, j) * v.get(i, j) * k.get(i, j))
            .sum::<f64>() * hd * hd;
        prop_assert!((lhs + pairs).abs() <= 1e-12);
    }

    #[test]
    fn action_is_jointly_convex(
        r0 in prop::collection::vec(0.05f64..2.0, 8),
        r1 in prop::collection::vec(0.05f64..2.0, 8),
        v0 in prop::collection::vec(-1.0f64..1.0, 28),
        v1 in prop::collection::vec(-1.0f64..1.0, 28),
        t in 0.0f64..1.0,
        m in exponent(),
    ) {
        let k = kernel(8);
        let g = *k.grid();
        let (r0, r1) = (density(r0), density(r1));
        let mix = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect::<Vec<_>>();
        let rt = DensityField::new(g, mix(r0.values(), r1.values())).unwrap();
        let vt = PairField::from_upper(g, mix(&v0, &v1)).unwrap();
        let a0 = action(&r0, &PairField::from_upper(g, v0).unwrap(), &k, m).unwrap().value_or_inf();
        let a1 = action(&r1, &PairField::from_upper(g, v1).unwrap(), &k, m).unwrap().value_or_inf();
        let at = action(&rt, &vt, &k, m).unwrap().value_or_inf();
        prop_assert!(at <= (1.0 - t) * a0 + t * a1 + 1e-10);
    }

    #[test]
    fn transport_estimate_holds(
        r in prop::collection::vec(0.0f64..2.0, 10),
        v in prop::collection::vec(-1.0f64..1.0, 45),
        m in exponent(),
    ) {
        prop_assume!(r.iter().sum::<f64>() > 0.1);
        let k = kernel(10);
        let rho = density(r);
        let v = PairField::from_upper(*k.grid(), v).unwrap();
        let est = transport_estimate(&rho, &v, &k, m).unwrap();
        prop_assert!(est.holds(), "{est:?}");
    }
}
