//! Random-graph checks: the binomial expectation of the contraction
//! function, the block-growth walk, and a combined report on one sampled
//! `G(n, d/n)`.

use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::{verify_locally_sparse, SparsityMode, SparsityReport, DEFAULT_BLOCK_BUDGET};
use crate::counting::find_feasible_config;
use crate::error::{invalid, Result};
use crate::exact::neumaier_sum;
use crate::graph::{generate, Family};
use crate::model::{weight, Instance, PottsParams};
use crate::sampling::sample_rng;
use crate::saw::{fit_slope, verify_contraction, ContractionReport, DEFAULT_WALK_BUDGET};

/// `E[δ(X)]` for `X ~ Bin(n, Δ/n)`, summed exactly over `k = 0..=n` with
/// binomial weights from a log-space recurrence. Requires `0 < Δ <= n`.
pub fn expected_contraction(n: u64, big_delta: f64, params: PottsParams) -> Result<f64> {
    if n < 1 {
        return Err(invalid("expected_contraction needs n >= 1"));
    }
    if !(big_delta > 0.0 && big_delta <= n as f64) {
        return Err(invalid(format!(
            "expected_contraction needs 0 < Δ <= n, got Δ = {big_delta}"
        )));
    }
    let p = big_delta / n as f64;
    if p >= 1.0 {
        return Ok(params.delta(n as usize));
    }
    let log_odds = p.ln() - (1.0 - p).ln();
    let mut log_pmf = n as f64 * (-p).ln_1p();
    let mut terms = Vec::with_capacity(n as usize + 1);
    for k in 0..=n {
        if k > 0 {
            log_pmf += ((n - k + 1) as f64 / k as f64).ln() + log_odds;
        }
        terms.push(params.delta(k as usize) * log_pmf.exp());
    }
    Ok(neumaier_sum(terms))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailEstimate {
    pub t: usize,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthProcessReport {
    #[serde(rename = "L")]
    pub l: usize,
    pub n: u64,
    pub d: f64,
    pub q: usize,
    pub t_values: Vec<usize>,
    pub tail_estimates: Vec<TailEstimate>,
    /// Least-squares slope of `ln Pr[Y_t >= 0]` over `t > L` with positive
    /// estimates; `None` with fewer than two such points.
    pub fitted_slope: Option<f64>,
    pub trials: u64,
    pub seed: u64,
}

const WILSON_Z: f64 = 1.959963984540054;

/// 95% Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte-Carlo of the walk `Y_0 = L`, `Y_t = Y_{t-1} + X_t - 1`, where
/// `X_t ~ Bin(n, d/n)` for `t <= L` and, for `t > L`, `X_t` is a fresh
/// `Bin(n, d/n)` draw kept only when it is at least `(q-5)/2` (else 0).
/// Reports `Pr[Y_t >= 0]` for `t = 1..=t_max`. Trial `i` uses stream `i` of
/// the generator keyed by `seed`.
pub fn simulate_block_growth(
    l: usize,
    n: u64,
    d: f64,
    q: usize,
    t_max: usize,
    trials: u64,
    seed: u64,
) -> Result<GrowthProcessReport> {
    if q < 6 {
        return Err(invalid("simulate_block_growth needs q >= 6"));
    }
    if n < 1 || !(0.0..=n as f64).contains(&d) || trials == 0 || t_max == 0 {
        return Err(invalid(
            "simulate_block_growth needs n >= 1, 0 <= d <= n, trials > 0, t_max > 0",
        ));
    }
    let binom = Binomial::new(n, d / n as f64).map_err(|e| invalid(e.to_string()))?;
    let cutoff = (q as f64 - 5.0) / 2.0;
    let alive = (0..trials)
        .into_par_iter()
        .fold(
            || vec![0u64; t_max + 1],
            |mut acc, trial| {
                let mut rng = sample_rng(seed, trial);
                let mut y = l as i64;
                for (t, slot) in acc.iter_mut().enumerate().skip(1) {
                    let raw = binom.sample(&mut rng) as i64;
                    let x = if t <= l || raw as f64 >= cutoff {
                        raw
                    } else {
                        0
                    };
                    y += x - 1;
                    if y >= 0 {
                        *slot += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; t_max + 1],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let tail: Vec<TailEstimate> = (1..=t_max)
        .map(|t| {
            let (lower, upper) = wilson_interval(alive[t], trials);
            TailEstimate {
                t,
                estimate: alive[t] as f64 / trials as f64,
                lower,
                upper,
            }
        })
        .collect();
    let pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|e| e.t > l && e.estimate > 0.0)
        .map(|e| (e.t as f64, e.estimate.ln()))
        .collect();
    Ok(GrowthProcessReport {
        l,
        n,
        d,
        q,
        t_values: (1..=t_max).collect(),
        fitted_slope: (pts.len() >= 2).then(|| fit_slope(&pts)),
        tail_estimates: tail,
        trials,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GnpReport {
    pub n: usize,
    pub d: f64,
    pub q: usize,
    pub beta: f64,
    pub seed: u64,
    pub edges: usize,
    pub max_degree: usize,
    pub contraction: ContractionReport,
    pub sparsity: SparsityReport,
    /// `beta = 0` only: whether the greedy block coloring succeeded.
    pub colorable: Option<bool>,
    pub contracting: bool,
}

/// Samples `G ~ G(n, d/n)` and runs the contraction check, a sampled
/// local-sparsity check, and (for `beta = 0`) the greedy colorability
/// witness.
pub fn verify_gnp_properties(
    n: usize,
    d: f64,
    params: PottsParams,
    seed: u64,
    l_max: usize,
    sparsity_trials: usize,
) -> Result<GnpReport> {
    let g = generate(Family::Gnp { n, d, seed })?;
    let contraction = verify_contraction(&g, l_max, &|k| params.delta(k), DEFAULT_WALK_BUDGET)?;
    let sparsity = verify_locally_sparse(
        &g,
        params,
        l_max,
        SparsityMode::Sampled {
            trials: sparsity_trials,
            seed,
        },
        0,
    )?;
    let colorable = params.beta.is_zero().then(|| {
        let inst = Instance::unpinned(g.clone(), params);
        find_feasible_config(&inst, DEFAULT_BLOCK_BUDGET.max(n))
            .map(|c| weight(&inst, &c) > 0.0)
            .unwrap_or(false)
    });
    Ok(GnpReport {
        n,
        d,
        q: params.q,
        beta: params.beta.value(),
        seed,
        edges: g.num_edges(),
        max_degree: g.max_degree(),
        contracting: contraction.contracting,
        contraction,
        sparsity,
        colorable,
    })
}
