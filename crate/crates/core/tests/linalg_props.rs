use proptest::prelude::*;
use rug::Float;

use modgen::linalg::spectral::default_margin_floor;
use modgen::linalg::{artanh_sym, jacobi_eigen_sym, skew_canonical_form, tanh_sym, BigMatrix, Precision};

const DIGITS: u32 = 50;

fn p() -> Precision {
    Precision::digits(DIGITS)
}

fn symmetric(n: usize, v: &[f64]) -> BigMatrix {
    BigMatrix::from_fn(n, n, p(), |i, j| {
        let (a, b) = (i.min(j), i.max(j));
        p().float(v[a * n + b])
    })
}

fn skew(n: usize, v: &[f64]) -> BigMatrix {
    BigMatrix::from_fn(n, n, p(), |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => p().float(v[i * n + j]),
        std::cmp::Ordering::Greater => -p().float(v[j * n + i]),
        std::cmp::Ordering::Equal => p().zero(),
    })
}

fn rel_diff(a: &BigMatrix, b: &BigMatrix) -> f64 {
    let scale = b.max_norm().to_f64().max(1e-300);
    a.max_abs_diff(b).to_f64() / scale
}

fn entries(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, n * n)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn eigen_reconstructs_symmetric_input((n, v) in (2usize..7).prop_flat_map(|n| (Just(n), entries(n)))) {
        let m = symmetric(n, &v);
        let eig = jacobi_eigen_sym(&m, None).unwrap();
        prop_assert!(rel_diff(&eig.reconstruct(), &m) < 1e-40);
        let q = &eig.vectors;
        prop_assert!(q.transpose().matmul(q).max_abs_diff(&BigMatrix::identity(n, p())).to_f64() < 1e-40);
        prop_assert!(eig.values.windows(2).all(|w| w[0].value() <= w[1].value()));
    }

    #[test]
    fn skew_form_reconstructs_and_exponentials_compose((n, v) in (2usize..7).prop_flat_map(|n| (Just(n), entries(n)))) {
        let s = skew(n, &v);
        let c = skew_canonical_form(&s).unwrap();
        prop_assert!(rel_diff(&c.reconstruct(), &s) < 1e-35);
        let bits = p().bits();
        let quarter = Float::with_val(bits, 0.25);
        let aq = c.exp(&quarter);
        let aq_inv = c.exp(&(-quarter.clone()));
        let id = BigMatrix::identity(n, p());
        // Orthogonal, inverse pair, and exp(S/4)^2 = exp(S/2).
        prop_assert!(aq.transpose().matmul(&aq).max_abs_diff(&id).to_f64() < 1e-35);
        prop_assert!(aq.matmul(&aq_inv).max_abs_diff(&id).to_f64() < 1e-35);
        prop_assert!(aq.transpose().max_abs_diff(&aq_inv).to_f64() < 1e-35);
        let half = c.exp(&Float::with_val(bits, 0.5));
        prop_assert!(aq.matmul(&aq).max_abs_diff(&half).to_f64() < 1e-35);
    }

    #[test]
    fn artanh_inverts_tanh((n, v) in (2usize..6).prop_flat_map(|n| (Just(n), entries(n)))) {
        let x = symmetric(n, &v);
        let t = tanh_sym(&x).unwrap();
        let back = artanh_sym(&t, &default_margin_floor(p())).unwrap();
        prop_assert!(rel_diff(&back.matrix, &x) < 1e-30);
        prop_assert!(back.margin.to_f64() > 0.0);
    }

    #[test]
    fn split_is_exact_up_to_one_rounding((n, v) in (1usize..7).prop_flat_map(|n| (Just(n), entries(n)))) {
        let m = BigMatrix::from_f64(n, n, &v, p());
        let (sym, sk) = m.split_sym_skew();
        prop_assert!(sym.transpose() == sym);
        prop_assert!(sk.transpose() == sk.neg());
        prop_assert!(rel_diff(&sym.add(&sk), &m) <= 2.0 * p().epsilon().to_f64());
    }
}
