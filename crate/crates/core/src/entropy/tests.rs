use proptest::prelude::*;

use super::*;
use crate::bits::BitString;
use crate::linalg::{ComplexMatrix, C64};
use crate::states::{chapter4_prefix, classical_prefix, diagonal_f_prefix, tracial_prefix, DensityFn};

fn r(s: &str) -> Rational {
    s.parse().unwrap()
}

#[test]
fn simple_values() {
    let t = DensityMatrix::maximally_mixed(6);
    assert!((von_neumann_entropy(&t).unwrap() - 6.0).abs() < 1e-12);
    let p = DensityMatrix::basis_state(4, 3).unwrap();
    assert_eq!(von_neumann_entropy(&p).unwrap(), 0.0);
    for n in 5..=12 {
        let d = chapter4_block(n).unwrap();
        assert!((von_neumann_entropy(&d).unwrap() - chapter4_block_entropy(n)).abs() < 1e-8);
    }
}

#[test]
fn rate_series() {
    let t = entropy_rate_series(&tracial_prefix(30).unwrap()).unwrap();
    assert!(t.rows.iter().all(|r| (r.rate - 1.0).abs() < 1e-12));
    let x: BitString = "0110101".parse().unwrap();
    let c = entropy_rate_series(&classical_prefix(&x, 7).unwrap()).unwrap();
    assert!(c.rows.iter().all(|r| r.h == 0.0));
    let s = entropy_rate_series(&chapter4_prefix(8).unwrap()).unwrap();
    assert_eq!(s.rows.len(), 26);
    let want =
        (chapter4_block_entropy(5) + chapter4_block_entropy(6) + chapter4_block_entropy(7) + chapter4_block_entropy(8))
            / 26.0;
    assert!((s.rows[25].rate - want).abs() < 1e-10);
}

#[test]
fn chapter4_rates_closed_form() {
    let series = chapter4_rate_series(12).unwrap();
    let mut h = 0.0;
    let mut g = 0.0;
    for (n, rate) in series {
        h += chapter4_block_entropy(n);
        g += n as f64;
        assert!((rate - h / g).abs() < 1e-10);
    }
}

#[test]
fn top_k_and_bounds() {
    let t = DensityMatrix::maximally_mixed(4);
    assert!((top_k_mass(&t, 3).unwrap() - 3.0 / 16.0).abs() < 1e-15);
    assert!((top_k_mass(&t, 16).unwrap() - 1.0).abs() < 1e-12);
    assert!(top_k_mass(&t, 0).is_err());
    let b = flattened_entropy_bound(&t, 2).unwrap();
    assert!((b.s - 0.25).abs() < 1e-12);
    assert!((b.bound - (1.0 - 0.5 + 4.0)).abs() < 1e-12);
    assert!(b.holds);
    let p = DensityMatrix::basis_state(4, 0).unwrap();
    let b = flattened_entropy_bound(&p, 3).unwrap();
    assert_eq!(b.s, 1.0);
    assert!(b.holds);
    assert!(flattened_entropy_bound(&p, 4).is_err());
}

#[test]
fn flattening_chain_chapter4() {
    let s = chapter4_prefix(6).unwrap();
    for n in 5..=11 {
        let rho = s.level(n).unwrap();
        for m in 1..=4 {
            let b = flattened_entropy_bound(rho, m).unwrap();
            assert!(b.holds);
            let r = flattened_distribution(rho, m).unwrap();
            let hr = shannon_entropy(&r).unwrap();
            assert!((hr - flattened_entropy(b.s, m, n)).abs() < 1e-9);
            assert!(b.entropy <= hr + 1e-8);
            assert!(hr <= b.bound + 1e-8);
        }
    }
}

#[test]
fn f_states() {
    let s1 = entropy_rate_series(&diagonal_f_prefix(DensityFn::F1, 16).unwrap()).unwrap();
    assert!(s1.excess_strictly_decreasing);
    let s2 = entropy_rate_series(&diagonal_f_prefix(DensityFn::F2, 16).unwrap()).unwrap();
    assert!(s2.rows.iter().all(|r| r.excess.abs() < 2.0));
}

#[test]
fn eigenmass_examples() {
    let x: BitString = "0110101011".parse().unwrap();
    let c =
        eigenmass_concentration_test(&classical_prefix(&x, 10).unwrap(), &r("1/10"), &r("9/10"), 3).unwrap().unwrap();
    assert!(c.witnesses.iter().all(|w| (w.top_mass - 1.0).abs() < 1e-12));
    assert!(eigenmass_concentration_test(&tracial_prefix(12).unwrap(), &r("1/2"), &r("9/10"), 3).unwrap().is_none());
    let f = eigenmass_concentration_test(&diagonal_f_prefix(DensityFn::F1, 18).unwrap(), &r("1/2"), &r("3/10"), 4)
        .unwrap()
        .unwrap();
    assert_eq!(f.witnesses[0].m, 0);
    for w in &f.witnesses {
        assert!(w.trace > 0.3);
        assert!(w.tau < 2f64.powi(-(w.m as i32)));
    }
}

#[test]
fn exact_level_condition() {
    // 2^{4·1/2} + 1 = 5 < 2^{4−m} holds for m = 1 and fails for m = 2
    assert!(level_small_enough(&r("1/2"), 4, 1));
    assert!(!level_small_enough(&r("1/2"), 4, 2));
    // 2^{3/2} ≈ 2.83, so 2^{3/2} + 1 < 4 holds
    assert!(level_small_enough(&r("1/2"), 3, 1));
}

fn random_density(seed: u64, n: usize) -> DensityMatrix {
    use rand::Rng;
    let mut rng = crate::rng::rng_for(seed, 9);
    let d = 1usize << n;
    let a: Vec<C64> = (0..d * d).map(|_| C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)).collect();
    let a = ComplexMatrix::dense(d, d, a).unwrap();
    let p = a.mul(&a.adjoint()).unwrap();
    let tr = p.trace().re;
    DensityMatrix::new(p.scale(C64::new(1.0 / tr, 0.0))).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn entropy_within_rank(seed in 0u64..1000, n in 1usize..5) {
        let rho = random_density(seed, n);
        let h = von_neumann_entropy(&rho).unwrap();
        prop_assert!(h >= 0.0 && h <= n as f64 + 1e-8);
        for m in 0..n {
            prop_assert!(flattened_entropy_bound(&rho, m).unwrap().holds);
        }
    }
}
