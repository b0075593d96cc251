use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use ricci_core::flow::{vector_field, FlowMode};
use ricci_core::homogeneous::{ricci_closed_form, ricci_diagonal, DiagonalMetric, MilnorSignature};
use ricci_core::maxprinciple::{eigen_invariants, logistic_comparison, p_factored, EigenTriple};
use ricci_core::symbol::{composition_residual, from_coords, ricci_symbol, sym_dim, PointMetric};

fn metric() -> impl Strategy<Value = DiagonalMetric> {
    (0.1f64..10.0, 0.1f64..10.0, 0.1f64..10.0).prop_map(|(a, b, c)| DiagonalMetric::new(a, b, c).unwrap())
}

fn signature() -> impl Strategy<Value = MilnorSignature> {
    proptest::sample::select(MilnorSignature::all())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #[test]
    fn ricci_is_scale_invariant(sig in signature(), g in metric(), s in 0.05f64..20.0) {
        let r1 = ricci_diagonal(sig, &g).ricci;
        let r2 = ricci_diagonal(sig, &g.scaled(s)).ricci;
        for k in 0..3 {
            prop_assert!(close(r1[k], r2[k], 1e-10), "{r1:?} vs {r2:?}");
        }
        // so the unnormalized vector field is too
        let (v1, v2) = (vector_field(sig, &g, FlowMode::Unnormalized), vector_field(sig, &g.scaled(s), FlowMode::Unnormalized));
        for k in 0..3 {
            prop_assert!(close(v1[k], v2[k], 1e-10));
        }
    }

    #[test]
    fn ricci_ignores_overall_sign(sig in signature(), g in metric()) {
        let a = ricci_closed_form(sig, &g);
        let b = ricci_closed_form(sig.negated(), &g);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn normalized_flow_preserves_volume(sig in signature(), g in metric()) {
        // d/dt log(ABC) = Σ v_k / g_k
        let v = vector_field(sig, &g, FlowMode::Normalized);
        let w = g.coeffs();
        let rate: f64 = (0..3).map(|k| v[k] / w[k]).sum();
        let scale = ricci_diagonal(sig, &g).scalar.abs().max(1.0);
        prop_assert!(rate.abs() <= 1e-10 * scale, "rate {rate}");
    }

    #[test]
    fn p_identity_and_homogeneity(l in -10.0f64..10.0, m in -10.0f64..10.0, n in -10.0f64..10.0, s in 0.1f64..5.0) {
        let v = [l, m, n];
        let inv = eigen_invariants(&EigenTriple::sorted(v).unwrap());
        let scale4 = v.iter().map(|x| x.abs()).fold(1.0, f64::max).powi(4);
        prop_assert!((inv.p - p_factored(v)).abs() <= 1e-9 * scale4);
        let scaled = p_factored(v.map(|x| s * x));
        prop_assert!((scaled - s.powi(4) * p_factored(v)).abs() <= 1e-9 * scale4 * s.powi(4));
        prop_assert!((p_factored([m, n, l]) - p_factored(v)).abs() <= 1e-9 * scale4);
    }

    #[test]
    fn comparison_solution_solves_its_ode(r in -2.0f64..2.0, c0 in -2.0f64..2.0, frac in 0.0f64..0.9) {
        let sol = logistic_comparison(r, c0);
        let t = sol.blow_up_time.map_or(3.0 * frac, |tb| tb * frac);
        let phi = sol.eval(t).unwrap();
        let d = sol.derivative(t).unwrap();
        prop_assert!(close(d, phi * (phi - r), 1e-8), "φ={phi} φ'={d}");
        prop_assert!(close(sol.eval(0.0).unwrap(), c0, 1e-14));
    }

    #[test]
    fn ricci_symbol_is_frame_independent(
        n in 2usize..=4,
        seed in proptest::collection::vec(-1.0f64..1.0, 64),
    ) {
        let take = |k: usize| seed[k % seed.len()];
        let a = DMatrix::from_fn(n, n, |i, j| take(i * n + j));
        let g = PointMetric::new(&a * a.transpose() + DMatrix::identity(n, n)).unwrap();
        let p = DMatrix::identity(n, n) + 0.4 * DMatrix::from_fn(n, n, |i, j| take(17 + i * n + j));
        prop_assume!(p.determinant().abs() > 0.1);
        let xi = DVector::from_fn(n, |i, _| take(40 + i) + if i == 0 { 1.5 } else { 0.0 });
        let h = from_coords(n, &DVector::from_fn(sym_dim(n), |i, _| take(50 + i)));

        let g2 = PointMetric::new(p.transpose() * g.matrix() * &p).unwrap();
        let xi2 = p.transpose() * &xi;
        let h2 = p.transpose() * &h * &p;
        let direct = ricci_symbol(&g2, &xi2).unwrap().apply(&h2);
        let pulled = p.transpose() * ricci_symbol(&g, &xi).unwrap().apply(&h) * &p;
        let err = (&direct - &pulled).amax();
        prop_assert!(err <= 1e-10 * pulled.amax().max(1.0), "err {err}");
        prop_assert!(composition_residual(&g2, &xi2).unwrap() <= 1e-10 * xi2.norm_squared().max(1.0));
    }
}
