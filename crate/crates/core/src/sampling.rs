//! Approximate Gibbs sampling by sequential conditional marginals.
//!
//! Free vertices are visited in ascending order; each is drawn from its
//! normalized estimated marginal in the instance conditioned on the colors
//! already drawn, then pinned. With exact marginals this is a perfect
//! sampler.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::decay::{marginal_distribution, MargOptions};
use crate::error::{Error, Result};
use crate::exact::{gibbs_table, GibbsTable};
use crate::model::{Color, Instance};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub colors: Vec<Color>,
    /// `ln` of the probability with which the sampler produced `colors`.
    pub log_proposal: f64,
    /// Smallest pre-normalization mass seen across the sequential steps.
    pub min_pre_normalization_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleBatch {
    pub samples: Vec<Sample>,
    pub seed: u64,
    pub depth: i64,
}

/// The generator for sample `index` of a run seeded with `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Draws index `c` with probability `probs[c]` (assumed normalized);
/// zero-probability entries are never returned.
fn draw(probs: &[f64], rng: &mut impl Rng) -> Option<usize> {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = None;
    for (c, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        last = Some(c);
        acc += p;
        if u < acc {
            return Some(c);
        }
    }
    last
}

/// Sequential sampling with marginal vectors from `marginals(Ω_i, v_i)`.
pub fn sample_with<F>(inst: &Instance, rng: &mut impl Rng, mut marginals: F) -> Result<Sample>
where
    F: FnMut(&Instance, usize) -> Result<Vec<f64>>,
{
    let mut cur = inst.clone();
    let mut colors: Vec<Color> = (0..inst.n()).map(|v| inst.pin(v).unwrap_or(0)).collect();
    let mut log_proposal = 0.0;
    let mut min_mass = f64::INFINITY;
    for v in inst.free_vertices() {
        let raw = marginals(&cur, v)?;
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::Infeasible(format!(
                "conditional marginal of vertex {v} is identically 0"
            )));
        }
        min_mass = min_mass.min(total);
        let probs: Vec<f64> = raw.iter().map(|p| p / total).collect();
        let c = draw(&probs, rng).expect("positive mass");
        log_proposal += probs[c].ln();
        colors[v] = c as Color;
        cur.set_pin(v, c as Color)?;
    }
    Ok(Sample {
        colors,
        log_proposal,
        min_pre_normalization_sum: min_mass,
    })
}

/// Sample number `index` of the stream keyed by `seed`, depth `depth`.
pub fn sample_config(
    inst: &Instance,
    depth: i64,
    seed: u64,
    index: u64,
    opts: &MargOptions,
) -> Result<Sample> {
    inst.params().require_algorithmic()?;
    let mut rng = sample_rng(seed, index);
    sample_with(inst, &mut rng, |cur, v| {
        Ok(marginal_distribution(cur, v, depth, opts)?.raw)
    })
}

/// `count` independent samples, computed in parallel; sample `i` uses
/// stream `i`, so the batch does not depend on the thread count.
pub fn sample_batch(
    inst: &Instance,
    depth: i64,
    seed: u64,
    count: usize,
    opts: &MargOptions,
) -> Result<SampleBatch> {
    let inner = MargOptions {
        parallel: false,
        ..opts.clone()
    };
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|i| sample_config(inst, depth, seed, i, &inner))
        .collect::<Result<Vec<_>>>()?;
    Ok(SampleBatch {
        samples,
        seed,
        depth,
    })
}

/// `½ Σ_σ |empirical(σ) - gibbs(σ)|`.
pub fn tv_against_table<'a>(
    configs: impl IntoIterator<Item = &'a [Color]>,
    table: &GibbsTable,
) -> f64 {
    let mut counts: HashMap<&[Color], u64> = HashMap::new();
    let mut total = 0u64;
    for c in configs {
        *counts.entry(c).or_default() += 1;
        total += 1;
    }
    let n = total as f64;
    let mut tv = 0.0;
    for (c, w) in &table.entries {
        let emp = counts.remove(c.as_slice()).unwrap_or(0) as f64 / n;
        tv += (emp - w / table.total).abs();
    }
    tv += counts.values().map(|&k| k as f64 / n).sum::<f64>();
    tv / 2.0
}

/// Total-variation distance between a batch and the exact Gibbs measure.
pub fn empirical_tv(batch: &SampleBatch, inst: &Instance) -> Result<f64> {
    let table = gibbs_table(inst)?;
    Ok(tv_against_table(
        batch.samples.iter().map(|s| s.colors.as_slice()),
        &table,
    ))
}
