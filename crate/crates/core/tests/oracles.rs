//! Frozen reference values computed by hand or by independent high-precision evaluation.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rwrs_core::hierarchy::{interval, level_length};
use rwrs_core::oracle::{
    expected_next_identity_exact, gambler_moments, next_below_exact, next_tail_exact, next_tail_rational, psi_bin,
    psi_bin_exact,
};
use rwrs_core::params::{branching_formula_exact, lambda2_count, paper_params, parse_rational, DeskView};
use rwrs_core::scenery::sample_scenery;
use rwrs_core::testset::{enumerate_tests, lambda_count_ln_bound, lambda_size, reconstructed_size, Test};
use rwrs_core::walk::{reduce_walk, reduced_embedding, Walk};

fn q(s: &str) -> BigRational {
    parse_rational(s).unwrap()
}

fn int(v: u64) -> BigUint {
    BigUint::from(v)
}

#[test]
fn hand_traced_reductions() {
    let w = Walk::from_text("++----").unwrap();
    assert_eq!(reduced_embedding(&w, 2).unwrap().indices, vec![0, 2, 4, 6]);
    assert_eq!(reduce_walk(&w, 2).unwrap().to_text(), "+--");
    assert_eq!(level_length(&w, &[2], 1).unwrap(), 3);
    assert_eq!(interval(&w, &[2], 1, 0, 0).unwrap(), 0..2);
    assert_eq!(interval(&w, &[2], 1, 1, 0).unwrap(), 2..4);
    assert_eq!(interval(&w, &[2], 1, 2, 0).unwrap(), 4..6);
    let w = Walk::from_text("+-++").unwrap();
    assert_eq!(reduced_embedding(&w, 2).unwrap().indices, vec![0, 4]);
}

#[test]
fn paper_schedule_matches_independent_evaluation() {
    // mpmath at 400 digits
    let p = paper_params(&int(1000), 250, 2, true).unwrap();
    let l1 = p.level(1);
    assert_eq!(l1.l, int(1000));
    assert_eq!(p.level(2).l, int(1000) * Pow::pow(&int(2), 250u32));
    assert_eq!(p.alpha, BigRational::new(BigInt::one(), Pow::pow(&BigInt::from(10), 16u32)));
    assert_eq!(l1.m_upper, int(73_682_722_976));
    assert_eq!(l1.m_lower, int(5714));
    assert_eq!(l1.r_upper, int(147_365_445_952));
    assert_eq!(l1.r_lower, int(1621));
    let beta1 = num_traits::ToPrimitive::to_f64(&l1.beta).unwrap();
    assert!((beta1 - 1_285.801_091_488_718).abs() < 1e-9);
    let b2: BigUint = "4757124371494466618616747985442497571775311707218749631995".parse().unwrap();
    assert_eq!(p.branching[0], b2);
    let mu2: BigUint = "250268099236166418670439715447315955281709588704523158847327500687229163102038355291187310647247632441291671039036562687884197242177196364385695863374628738541452121229".parse().unwrap();
    assert_eq!(p.level(2).m_upper, mu2);
}

#[test]
fn branching_formula_example() {
    let b = branching_formula_exact(&int(1200), &q("0.1"), &int(100), &int(10), 2);
    assert_eq!(b, int(2));
    assert_eq!(branching_formula_exact(&int(10), &q("0.1"), &int(100), &int(10), 2), BigUint::zero());
}

fn two_level(m_upper2: u64, b2: usize) -> DeskView {
    DeskView {
        k: 2,
        l: vec![1, 3],
        m_upper: vec![2, m_upper2],
        m_lower: vec![1, 1],
        r_upper: vec![2, m_upper2],
        r_lower: vec![1, 1],
        beta: vec![(2, 1); 2],
        alpha: (1, 2),
        branching: vec![0, 0, b2],
    }
}

#[test]
fn test_counts() {
    let p = two_level(2, 1);
    let all = enumerate_tests(&p, 2, 1000).unwrap();
    assert_eq!(all.len(), 10);
    assert_eq!(lambda2_count(2, 1), int(10));
    assert_eq!(lambda2_count(7, 2), int(9450));
    let p = two_level(7, 2);
    assert_eq!(enumerate_tests(&p, 2, 10_000).unwrap().len(), 9450);
    assert!((lambda_count_ln_bound(&p, 2) - 6.0 * 7f64.ln()).abs() < 1e-12);
    assert_eq!(lambda_size(&p, 1), 1);
    assert_eq!(lambda_size(&p, 2), 2);
    let mut p3 = two_level(7, 3);
    p3.k = 3;
    p3.branching.push(2);
    assert_eq!(lambda_size(&p3, 3), 6);
}

#[test]
fn single_pair_reconstruction_size() {
    let w = Walk::from_text("++").unwrap();
    assert_eq!(reconstructed_size(&Test::new(vec![(0, 0)]), &w, 2), 3);
}

#[test]
fn binomial_tails() {
    assert_eq!(psi_bin_exact(2, &q("0.5"), &q("0.5")).unwrap(), q("1/4"));
    assert_eq!(psi_bin_exact(1, &q("0.3"), &q("0")).unwrap(), q("0.3"));
    assert_eq!(psi_bin_exact(7, &q("0.3"), &q("1")).unwrap(), BigRational::zero());
    assert_eq!(psi_bin(0, 0.3, 0.5).unwrap(), 0.0);
}

#[test]
fn gambler_closed_forms() {
    assert_eq!(gambler_moments(10, 0).unwrap().0, q("100"));
    assert_eq!(gambler_moments(2, 0).unwrap().1, q("8"));
    assert_eq!(gambler_moments(5, 5).unwrap(), (q("0"), q("0")));
    assert!(gambler_moments(5, 6).is_err());
}

#[test]
fn first_crossing_distribution() {
    assert_eq!(next_tail_rational(2, 3), q("1/2"));
    assert_eq!(next_tail_exact(1, 1), 0.0);
    assert_eq!(next_below_exact(2, 3), 0.5);
    assert_eq!(next_below_exact(5, 5), 0.0);
    assert_eq!(next_below_exact(5, 1), 0.0);
    // P(next > 2k) = 2^-k at L = 2
    for k in 0..20 {
        assert_eq!(next_tail_rational(2, 2 * k), BigRational::new(BigInt::one(), BigInt::from(1u64 << k)));
    }
    for l in [2u64, 3, 7] {
        assert_eq!(expected_next_identity_exact(l, (5 * l * l) as usize), q(&(l * l).to_string()));
    }
}

#[test]
fn scenery_colors_are_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = sample_scenery(&mut rng, 4, 0, 99_999).unwrap();
    let n = 100_000f64;
    let se = (0.25f64 * 0.75 / n).sqrt();
    for c in 0..4 {
        let f = (0..100_000).filter(|&i| s.get(i) == Some(c)).count() as f64 / n;
        assert!((f - 0.25).abs() < 3.0 * se, "color {c}: {f}");
    }
}

#[test]
fn desk_examples() {
    use rwrs_core::params::{desk_params, DeskLevels, Num};
    let ok = DeskLevels {
        l: vec![4, 4],
        m_upper: vec![64, 1024],
        m_lower: vec![4, 64],
        r_upper: vec![64, 64],
        r_lower: vec![1, 1],
        beta: vec![Num::Int(1); 2],
        alpha: Num::Text("0.01".into()),
        branching: None,
        n: None,
    };
    rwrs_core::params::validate_desk_structure(&ok).unwrap();
    let e = desk_params(&ok).unwrap_err().to_string();
    assert!(e.contains("B_2 = 0"), "{e}");
    let mut with_b = ok.clone();
    with_b.branching = Some(vec![1]);
    desk_params(&with_b).unwrap();
    let mut bad = ok;
    bad.m_lower[0] = 65;
    assert!(desk_params(&bad).is_err());
}
