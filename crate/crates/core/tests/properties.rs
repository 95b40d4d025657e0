//! Randomized invariants across modules.

use num_rational::Ratio;
use proptest::prelude::*;

use slopekit::branching::gsp4_weights;
use slopekit::matrix::Matrix;
use slopekit::padic::{self, PadicRing};
use slopekit::series::{GrowthProfile, TruncatedSeries};
use slopekit::slope::{fredholm_matrix, newton_slopes, riesz_decompose, verify_riesz, CompactOperator, FredholmSeries};
use slopekit::suites;

fn prime() -> impl Strategy<Value = u64> {
    prop_oneof![Just(3u64), Just(5), Just(7)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ring_axioms(p in prime(), n in 1u32..10, a in any::<i64>(), b in any::<i64>(), c in any::<i64>()) {
        let r = PadicRing::new(p, n).unwrap();
        let (a, b, c) = (r.elem(a as i128), r.elem(b as i128), r.elem(c as i128));
        prop_assert_eq!((a + b) + c, a + (b + c));
        prop_assert_eq!((a * b) * c, a * (b * c));
        prop_assert_eq!(a * (b + c), a * b + a * c);
        prop_assert_eq!(a - a, r.zero());
        if a.is_unit() {
            prop_assert_eq!(a * a.inv().unwrap(), r.one());
        }
    }

    #[test]
    fn teichmuller_is_a_root_of_unity(p in prime(), n in 2u32..10, z in 1i64..10_000) {
        prop_assume!(z % p as i64 != 0);
        let r = PadicRing::new(p, n).unwrap();
        let x = r.elem(z as i128);
        let w = padic::teichmuller(&x).unwrap();
        prop_assert_eq!(w.pow(p - 1), r.one());
        prop_assert!(w.eq_mod(&x, 1));
        // z = omega(z) <z>
        prop_assert_eq!(w * padic::one_unit_part(&x).unwrap(), x);
    }

    #[test]
    fn series_product_is_commutative_and_truncation_coherent(
        a in proptest::collection::vec(0u64..729, 6),
        b in proptest::collection::vec(0u64..729, 6),
    ) {
        let r = PadicRing::new(3, 6).unwrap();
        let f = TruncatedSeries::univariate(r, &a.iter().map(|x| r.elem(*x as i128)).collect::<Vec<_>>(), GrowthProfile::Tate);
        let g = TruncatedSeries::univariate(r, &b.iter().map(|x| r.elem(*x as i128)).collect::<Vec<_>>(), GrowthProfile::Tate);
        let fg = f.mul(&g).unwrap();
        prop_assert_eq!(&fg, &g.mul(&f).unwrap());
        prop_assert_eq!(fg.truncate(3), f.truncate(3).mul(&g.truncate(3)).unwrap());
    }

    #[test]
    fn newton_slopes_of_a_product_of_linear_factors(vals in proptest::collection::vec(0u32..4, 1..6)) {
        // prod (1 - u_i p^(v_i) t) with units u_i = 1 + 3 i.
        let r = PadicRing::new(5, 20).unwrap();
        let mut coeffs = vec![r.one()];
        for (i, v) in vals.iter().enumerate() {
            let root = r.elem(1 + 5 * i as i128).mul_p_power(*v);
            let mut next = vec![r.zero(); coeffs.len() + 1];
            for (k, c) in coeffs.iter().enumerate() {
                next[k] = next[k] + *c;
                next[k + 1] = next[k + 1] - *c * root;
            }
            coeffs = next;
        }
        let f = FredholmSeries::from_coeffs(r, &coeffs).unwrap();
        let poly = newton_slopes(&f, vals.len()).unwrap();
        let mut want: Vec<Ratio<i64>> = vals.iter().map(|v| Ratio::from_integer(*v as i64)).collect();
        want.sort();
        prop_assert_eq!(poly.slope_multiset(), want);
    }

    #[test]
    fn fredholm_of_a_diagonal_matrix(vals in proptest::collection::vec(0u32..4, 1..6)) {
        let r = PadicRing::new(3, 12).unwrap();
        let diag: Vec<_> = vals.iter().map(|v| r.elem(2).mul_p_power(*v)).collect();
        let f = fredholm_matrix(&Matrix::diagonal(r, &diag), vals.len()).unwrap();
        let mut want = vec![r.one()];
        for x in &diag {
            let mut next = vec![r.zero(); want.len() + 1];
            for (k, c) in want.iter().enumerate() {
                next[k] = next[k] + *c;
                next[k + 1] = next[k + 1] - *c * *x;
            }
            want = next;
        }
        prop_assert_eq!(f.coeffs(), want);
    }

    #[test]
    fn kernels_are_annihilated(seed in any::<u64>(), rows in 1usize..6, cols in 1usize..7, drop in 0usize..3) {
        use rand::Rng;
        let r = PadicRing::new(3, 12).unwrap();
        let mut rng = suites::rng(seed);
        // Rank-deficient by construction: the last `drop` rows repeat earlier ones.
        let m = Matrix::from_fn(r, rows, cols, |_, _| r.elem(rng.gen_range(0..r.modulus()) as i128));
        let m = Matrix::from_fn(r, rows + drop, cols, |i, j| m.get(i % rows, j));
        let (k, free) = m.kernel_with_free().unwrap();
        prop_assert_eq!(k.cols(), free.len());
        let prec = k.precision();
        prop_assert!(m.mul(&k).unwrap().is_zero_mod(prec));
        for (i, f) in free.iter().enumerate() {
            for c in 0..k.cols() {
                let want = if c == i { r.one() } else { r.zero() };
                prop_assert!(k.get(*f, c).eq_mod(&want, prec));
            }
        }
    }

    #[test]
    fn returned_decompositions_satisfy_the_identities(seed in any::<u64>(), size in 2usize..8, h in 0i64..3) {
        let r = PadicRing::new(3, 20).unwrap();
        let mut rng = suites::rng(seed);
        let profile = suites::random_profile(&mut rng, size);
        let u: CompactOperator = suites::random_compact(&mut rng, r, &profile).unwrap();
        if let Ok(dec) = riesz_decompose(&u, Ratio::from_integer(h)) {
            let report = verify_riesz(&u, &dec).unwrap();
            prop_assert!(report.all_hold(), "{:?}", report);
            prop_assert_eq!(dec.rank(), dec.degree);
        }
    }

    #[test]
    fn gsp4_formulas(a in 0i64..20, b in 0i64..20, qs in 0i64..20, rs in 0i64..20) {
        let (q, r) = (qs % (a + 1), rs % (b + 1));
        let w = gsp4_weights(a, b, q, r).unwrap();
        prop_assert_eq!((w.c, w.d), (a + b - q - r, a - q + r));
        prop_assert!(gsp4_weights(a, b, a + 1, r).is_err());
    }
}
