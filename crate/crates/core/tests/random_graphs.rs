mod common;

use common::{params, BETAS};
use potts_core::randstats::{expected_contraction, simulate_block_growth, verify_gnp_properties};

#[test]
fn gnp_above_threshold_contracts() {
    let r = verify_gnp_properties(500, 4.0, params(17, 0, 1), 1, 8, 50).unwrap();
    assert!(r.contracting, "{:?}", r.contraction);
    assert_eq!(r.colorable, Some(true));
    assert!(r.sparsity.worst_ratio.is_finite());
}

#[test]
fn gnp_far_below_threshold_does_not() {
    let r = verify_gnp_properties(500, 4.0, params(5, 0, 1), 1, 8, 50).unwrap();
    assert!(!r.contracting, "{:?}", r.contraction);
}

#[test]
fn subcritical_gnp_contracts() {
    for q in [3, 5] {
        let r = verify_gnp_properties(500, 0.5, params(q, 0, 1), 2, 8, 50).unwrap();
        assert!(r.contracting, "q={q}: {:?}", r.contraction);
        assert!(r.sparsity.worst_ratio < 3.0, "{:?}", r.sparsity);
    }
}

#[test]
fn growth_walk_tail_is_exponential() {
    let r = simulate_block_growth(5, 10_000, 5.0, 40, 200, 100_000, 3).unwrap();
    let slope = r.fitted_slope.expect("enough positive tail estimates");
    assert!(slope < 0.0, "{slope}");
    for e in &r.tail_estimates {
        assert!(e.lower <= e.estimate && e.estimate <= e.upper);
    }
    let again = simulate_block_growth(5, 10_000, 5.0, 40, 200, 100_000, 3).unwrap();
    assert_eq!(r, again);
}

#[test]
fn lemma_grid_holds() {
    for big in [2u32, 3, 5, 10, 20] {
        for (num, den) in BETAS {
            let lambda = (den - num) as f64 / den as f64;
            let q = (3.0 * lambda * big as f64 - 1e-9).ceil() as usize + 2;
            let e = expected_contraction(10_000, big as f64, params(q, num, den)).unwrap();
            assert!(e < 1.0 / big as f64, "Δ={big} beta={num}/{den} q={q}: {e}");
        }
    }
}
