use std::collections::BTreeSet;

use k3rank::ff::{ExtField, Fq};
use k3rank::family::{random_sample, CoefficientVector};
use k3rank::pipeline::count_all_methods;
use k3rank::poly::{self, IntPoly};
use k3rank::tate::{combine_primes, RankBoundAtPrime};
use k3rank::weil::{mirror_candidates, PsiCandidate};
use num_bigint::BigInt;
use proptest::prelude::*;

fn field() -> impl Strategy<Value = ExtField> {
    (prop::sample::select(vec![5u64, 7, 11, 13, 101]), 1usize..=4).prop_map(|(p, k)| ExtField::new(p, k).unwrap())
}

fn with_elements(n: usize) -> impl Strategy<Value = (ExtField, Vec<Fq>)> {
    field().prop_flat_map(move |f| {
        let q = f.q();
        (Just(f), prop::collection::vec(0..q, n))
    })
    .prop_map(|(f, idx)| {
        let els = idx.into_iter().map(|i| f.element(i)).collect();
        (f, els)
    })
}

fn rank_bound() -> impl Strategy<Value = RankBoundAtPrime> {
    (prop::sample::select(vec![5u64, 7, 11, 13, 17, 19, 23]), 15usize..=22, prop::collection::btree_set(-12i64..12, 1..3))
        .prop_map(|(p, bound, cs)| RankBoundAtPrime { p, bound, disc_classes: cs.into_iter().map(BigInt::from).collect() })
}

proptest! {
    #[test]
    fn field_axioms((f, e) in with_elements(3)) {
        let (a, b, c) = (e[0], e[1], e[2]);
        prop_assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
        prop_assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
        prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
        prop_assert_eq!(f.sub(f.add(a, b), b), a);
        match f.inv(a) {
            Some(i) => prop_assert_eq!(f.mul(a, i), Fq::ONE),
            None => prop_assert!(a.is_zero()),
        }
    }

    #[test]
    fn frobenius_is_a_field_automorphism((f, e) in with_elements(2)) {
        let (a, b) = (e[0], e[1]);
        prop_assert_eq!(f.frobenius(f.mul(a, b)), f.mul(f.frobenius(a), f.frobenius(b)));
        prop_assert_eq!(f.frobenius(f.add(a, b)), f.add(f.frobenius(a), f.frobenius(b)));
        prop_assert_eq!(f.frobenius(a), f.pow(a, f.p() as u64));
        prop_assert_eq!(f.pow(a, f.q()), a);
    }

    #[test]
    fn square_roots_square_back((f, e) in with_elements(1)) {
        let a = f.square(e[0]);
        let r = f.sqrt(a).expect("squares have roots");
        prop_assert_eq!(f.square(r), a);
    }

    #[test]
    fn newton_round_trip(c in prop::collection::vec(-50i64..50, 1..8)) {
        let mut a: IntPoly = c.iter().map(|&x| BigInt::from(x)).collect();
        a.push(BigInt::from(1));
        let d = a.len() - 1;
        let s = poly::power_sums(&a, d);
        prop_assert_eq!(poly::from_power_sums(&s, d).unwrap(), a);
    }

    #[test]
    fn mirrors_satisfy_functional_equation(c in prop::array::uniform3(-2000i64..2000), p in prop::sample::select(vec![5u64, 7, 31, 103])) {
        let c = c.map(BigInt::from);
        for cand in mirror_candidates([&c[0], &c[1], &c[2]], p) {
            prop_assert!(cand.satisfies_functional_equation(p));
        }
    }

    #[test]
    fn combining_is_order_independent(mut bs in prop::collection::vec(rank_bound(), 1..6)) {
        let a = combine_primes(&bs).unwrap();
        bs.reverse();
        let b = combine_primes(&bs).unwrap();
        prop_assert_eq!(a.upper, b.upper);
        prop_assert_eq!(a.conflict.is_some(), b.conflict.is_some());
        let min = bs.iter().map(|r| r.bound).min().unwrap();
        prop_assert!(a.upper == min || a.upper + 1 == min);
    }

    #[test]
    fn more_primes_never_raise_the_bound(bs in prop::collection::vec(rank_bound(), 1..6), extra in rank_bound()) {
        let before = combine_primes(&bs).unwrap().upper;
        let mut more = bs.clone();
        more.push(extra);
        prop_assert!(combine_primes(&more).unwrap().upper <= before);
    }

    #[test]
    fn serde_round_trip_keeps_big_integers(
        big in prop::collection::vec(any::<i128>(), 8),
        classes in prop::collection::btree_set(any::<i64>(), 0..4),
    ) {
        let psi = PsiCandidate { coeffs: big.iter().map(|&x| BigInt::from(x) * BigInt::from(x)).collect(), sign: -1 };
        let json = serde_json::to_string(&psi).unwrap();
        prop_assert_eq!(serde_json::from_str::<PsiCandidate>(&json).unwrap(), psi);
        let rb = RankBoundAtPrime { p: 7, bound: 16, disc_classes: classes.into_iter().map(BigInt::from).collect::<BTreeSet<_>>() };
        let json = serde_json::to_string(&rb).unwrap();
        prop_assert_eq!(serde_json::from_str::<RankBoundAtPrime>(&json).unwrap(), rb);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn counting_methods_agree(i in 0usize..40, p in prop::sample::select(vec![7u64, 11, 13]), k in 1usize..=2) {
        let cv: CoefficientVector = random_sample(40, 5, 20)[i];
        if let Ok(rows) = count_all_methods(&cv, p, k, false) {
            prop_assert!(rows.len() >= 2);
            prop_assert!(rows.windows(2).all(|w| w[0].1 == w[1].1), "{:?}", rows);
        }
    }
}
