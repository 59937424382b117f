//! Partition-function estimates from a telescoping product of conditional
//! marginals along an anchor configuration.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::blocks::{feasible_block_configs, minimal_permissive_block, DEFAULT_CONFIG_BUDGET};
use crate::decay::{marg, MargDiagnostics, MargOptions};
use crate::error::{Error, Result};
use crate::model::{log_weight, Color, Instance};

/// A positive-weight configuration of every vertex that respects the
/// pinning.
///
/// For `beta > 0` every free vertex gets color 1. For `beta = 0` blocks are
/// colored greedily: take the lowest free vertex `v`, color `B(v)` with the
/// first feasible block configuration given everything colored so far, and
/// treat it as pinned from then on.
pub fn find_feasible_config(inst: &Instance, block_budget: usize) -> Result<Vec<Color>> {
    let mut colors: Vec<Color> = (0..inst.n()).map(|v| inst.pin(v).unwrap_or(0)).collect();
    if !inst.params().beta.is_zero() {
        return Ok(colors);
    }
    let mut cur = inst.clone();
    while let Some(&v) = cur.free_vertices().first() {
        let block = minimal_permissive_block(&cur, &[v], block_budget)?;
        let configs = feasible_block_configs(&cur, &block, DEFAULT_CONFIG_BUDGET)?;
        let Some(first) = configs.first() else {
            return Err(Error::Infeasible(format!(
                "no proper coloring of the block of vertex {v} extends the partial coloring"
            )));
        };
        for (&u, &c) in block.vertices.iter().zip(first) {
            cur.set_pin(u, c)?;
            colors[u] = c;
        }
    }
    if log_weight(inst, &colors) == f64::NEG_INFINITY {
        return Err(Error::Infeasible(
            "greedy block coloring produced a conflict".into(),
        ));
    }
    Ok(colors)
}

/// Order in which free vertices are pinned to the anchor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorOrder {
    #[default]
    Ascending,
    /// A ChaCha8 shuffle of the free vertices.
    Shuffled(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VertexFactor {
    pub vertex: usize,
    pub color: Color,
    pub marginal: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartitionEstimate {
    pub log_z: f64,
    pub anchor: Vec<Color>,
    pub anchor_weight_log: f64,
    pub per_vertex: Vec<VertexFactor>,
    pub depth_used: i64,
    pub diagnostics: MargDiagnostics,
}

impl PartitionEstimate {
    pub fn z(&self) -> f64 {
        self.log_z.exp()
    }
}

fn anchor_order(inst: &Instance, order: AnchorOrder) -> Vec<usize> {
    let mut free = inst.free_vertices();
    if let AnchorOrder::Shuffled(seed) = order {
        free.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    free
}

/// `ln Z = ln w(σ) - Σ_i ln Pr_{Ω_i}[c(v_i) = σ(v_i)]` with the
/// conditional marginals supplied by `marginal(Ω_i, v_i, σ(v_i))`.
pub fn telescoping_log_partition<F>(
    inst: &Instance,
    anchor: &[Color],
    order: &[usize],
    mut marginal: F,
) -> Result<(f64, Vec<VertexFactor>)>
where
    F: FnMut(&Instance, usize, Color) -> Result<f64>,
{
    let anchor_log = log_weight(inst, anchor);
    if anchor_log == f64::NEG_INFINITY {
        return Err(Error::Infeasible(
            "anchor configuration has zero weight".into(),
        ));
    }
    let mut cur = inst.clone();
    let mut log_z = anchor_log;
    let mut trace = Vec::with_capacity(order.len());
    for &v in order {
        let x = anchor[v];
        let p = marginal(&cur, v, x)?;
        if p <= 0.0 {
            return Err(Error::Infeasible(format!(
                "conditional marginal of vertex {v} at its anchor color is 0"
            )));
        }
        log_z -= p.ln();
        trace.push(VertexFactor {
            vertex: v,
            color: x,
            marginal: p,
        });
        cur.set_pin(v, x)?;
    }
    Ok((log_z, trace))
}

/// Estimates `ln Z(Ω)` with depth `depth` for every conditional marginal.
pub fn estimate_partition(
    inst: &Instance,
    depth: i64,
    order: AnchorOrder,
    opts: &MargOptions,
) -> Result<PartitionEstimate> {
    inst.params().require_algorithmic()?;
    let anchor = find_feasible_config(inst, opts.block_budget)?;
    let order = anchor_order(inst, order);
    let mut diag = MargDiagnostics::default();
    let (log_z, per_vertex) = telescoping_log_partition(inst, &anchor, &order, |cur, v, x| {
        let (p, d) = marg(cur, v, x, depth, opts)?;
        diag.recursive_calls += d.recursive_calls;
        diag.termination_events += d.termination_events;
        diag.max_block_size = diag.max_block_size.max(d.max_block_size);
        diag.max_f_size = diag.max_f_size.max(d.max_f_size);
        diag.infeasible_blocks += d.infeasible_blocks;
        Ok(p)
    })?;
    Ok(PartitionEstimate {
        log_z,
        anchor_weight_log: log_weight(inst, &anchor),
        anchor,
        per_vertex,
        depth_used: depth,
        diagnostics: diag,
    })
}
