mod common;

use common::{params, pinned_caterpillar, seeded_instance, BETAS};
use potts_core::decay::{marg_all, marginal_distribution, MargOptions};
use potts_core::exact::exact_marginals;
use potts_core::graph::{generate, Family};
use potts_core::{Color, Instance};
use proptest::prelude::*;

fn opts() -> MargOptions {
    MargOptions::default()
}

fn any_params() -> impl Strategy<Value = potts_core::PottsParams> {
    (3usize..=5, 0usize..4).prop_map(|(q, b)| params(q, BETAS[b].0, BETAS[b].1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn untruncated_runs_are_exact(seed in any::<u64>(), p in any_params()) {
        let inst = seeded_instance(seed, p);
        for v in inst.free_vertices() {
            let (est, diag) = marg_all(&inst, v, inst.n() as i64, &opts()).unwrap();
            prop_assert_eq!(diag.termination_events, 0);
            let exact = exact_marginals(&inst, v).unwrap();
            for (a, b) in est.iter().zip(&exact) {
                prop_assert!((a - b).abs() < 1e-9, "v={} est={:?} exact={:?}", v, est, exact);
            }
        }
    }

    #[test]
    fn estimates_respect_the_clamp(seed in any::<u64>(), p in any_params(), l in -1i64..4) {
        let inst = seeded_instance(seed, p);
        for v in inst.free_vertices() {
            let bound = p.clamp_bound(inst.degree(v));
            let (est, _) = marg_all(&inst, v, l, &opts()).unwrap();
            for x in est {
                prop_assert!((0.0..=bound + 1e-12).contains(&x), "v={} x={} bound={}", v, x, bound);
            }
        }
    }

    #[test]
    fn repeated_runs_are_bit_identical(seed in any::<u64>(), p in any_params(), l in 0i64..4) {
        let inst = seeded_instance(seed, p);
        let v = inst.free_vertices()[0];
        let seq = MargOptions { parallel: false, ..opts() };
        let (a, da) = marg_all(&inst, v, l, &opts()).unwrap();
        let (b, db) = marg_all(&inst, v, l, &seq).unwrap();
        prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        prop_assert_eq!(da, db);
    }

    /// On a path with all-singleton blocks the recursion never looks further
    /// than `l + 1` from the root, so pins beyond that are invisible.
    #[test]
    fn pins_beyond_the_radius_are_invisible(n in 8usize..30, l in 0i64..5, c1 in 0u16..4, c2 in 0u16..4) {
        let g = generate(Family::Path(n)).unwrap();
        let p = params(4, 1, 2);
        let far = (l as usize + 2).min(n - 1);
        let a = Instance::new(g.clone(), p, &[(far, c1)]).unwrap();
        let b = Instance::new(g, p, &[(far, c2)]).unwrap();
        let (ra, _) = marg_all(&a, 0, l, &opts()).unwrap();
        let (rb, _) = marg_all(&b, 0, l, &opts()).unwrap();
        prop_assert!(ra.iter().zip(&rb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }
}

#[test]
fn pins_inside_the_radius_are_seen() {
    let g = generate(Family::Path(6)).unwrap();
    let p = params(4, 1, 2);
    let a = Instance::new(g.clone(), p, &[(2, 0)]).unwrap();
    let b = Instance::new(g, p, &[(2, 1)]).unwrap();
    assert_ne!(
        marg_all(&a, 0, 4, &opts()).unwrap().0,
        marg_all(&b, 0, 4, &opts()).unwrap().0
    );
}

#[test]
fn caterpillar_q5_does_not_decay() {
    // spine vertices see three pinned bristle colors, leaving two colors that
    // must alternate; the far end fixes the parity
    let a = pinned_caterpillar(8, 5, Some(3));
    let b = pinned_caterpillar(8, 5, Some(4));
    for l in [8, 16, 40] {
        let (ea, da) = marg_all(&a, 0, l, &opts()).unwrap();
        let (eb, _) = marg_all(&b, 0, l, &opts()).unwrap();
        let gap = ea
            .iter()
            .zip(&eb)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(gap > 0.5, "L={l}: {ea:?} vs {eb:?}");
        if da.termination_events == 0 {
            let exact = exact_marginals(&a, 0).unwrap();
            assert!(ea.iter().zip(&exact).all(|(x, y)| (x - y).abs() < 1e-9));
        }
    }
    assert_eq!(
        exact_marginals(&a, 0).unwrap(),
        vec![0.0, 0.0, 0.0, 0.0, 1.0]
    );
    assert_eq!(
        exact_marginals(&b, 0).unwrap(),
        vec![0.0, 0.0, 0.0, 1.0, 0.0]
    );
}

#[test]
fn caterpillar_q6_estimates_converge() {
    let a = pinned_caterpillar(6, 6, Some(3));
    let exact = exact_marginals(&a, 0).unwrap();
    let est = marginal_distribution(&a, 0, a.n() as i64, &opts()).unwrap();
    assert_eq!(est.diagnostics.termination_events, 0);
    for (x, y) in est.marginals.iter().zip(&exact) {
        assert!((x - y).abs() < 1e-9);
    }
}

#[test]
fn normalized_marginals() {
    let inst = Instance::unpinned(generate(Family::Cycle(5)).unwrap(), params(4, 1, 3));
    let est = marginal_distribution(&inst, 2, 2, &opts()).unwrap();
    for x in &est.marginals {
        assert!((x - 0.25).abs() < 1e-12);
    }
    let pinned = Instance::new(
        generate(Family::Cycle(5)).unwrap(),
        params(4, 1, 3),
        &[(2, 3 as Color)],
    )
    .unwrap();
    assert_eq!(
        marginal_distribution(&pinned, 2, 2, &opts())
            .unwrap()
            .marginals,
        vec![0.0, 0.0, 0.0, 1.0]
    );
}

#[test]
fn caterpillar_oracle_matches_walk_counts() {
    // spine vertices are restricted to colors {3,4,5}; with the far end 12
    // steps away fixed to c, the root takes c in (2^12 + 2)/3 of the 2^12
    // colorings and each other color in (2^12 - 1)/3
    for (far, same) in [(3u16, 3usize), (4, 4)] {
        let m = exact_marginals(&pinned_caterpillar(13, 6, Some(far)), 0).unwrap();
        for (x, &p) in m.iter().enumerate() {
            let expect = match x {
                0..=2 => 0.0,
                _ if x == same => 1366.0 / 4096.0,
                _ => 1365.0 / 4096.0,
            };
            assert!((p - expect).abs() < 1e-12, "far={far} x={x}: {p}");
        }
    }
}
