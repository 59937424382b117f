//! The truncated block recursion for vertex marginals.
//!
//! `marg` estimates `Pr[c(v) = x]` by summing block marginals over `B(v)`;
//! `marg_block` writes a block marginal in terms of vertex marginals of the
//! boundary vertices `v_i` inside conditioned sub-instances `Ω_i^ρ`, calling
//! back into `marg` with the depth reduced by the escape-path length. Once the
//! depth goes negative the recursion returns a fixed guess.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::blocks::{
    feasible_block_configs, minimal_permissive_block, Block, DEFAULT_BLOCK_BUDGET,
    DEFAULT_CONFIG_BUDGET,
};
use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::model::{Color, Instance, PottsParams};
use crate::saw::{e_delta_profile, SawWalk};

#[derive(Debug, Clone)]
pub struct MargOptions {
    /// Largest permissive block allowed before failing.
    pub block_budget: usize,
    /// Largest `|F(B)|` allowed before failing.
    pub config_budget: usize,
    /// Cap on the total number of `marg` invocations.
    pub call_budget: Option<u64>,
    pub deadline: Option<Instant>,
    /// Evaluate sibling sub-calls on the rayon pool.
    pub parallel: bool,
}

impl Default for MargOptions {
    fn default() -> Self {
        MargOptions {
            block_budget: DEFAULT_BLOCK_BUDGET,
            config_budget: DEFAULT_CONFIG_BUDGET,
            call_budget: None,
            deadline: None,
            parallel: true,
        }
    }
}

/// Counters collected over one top-level estimate.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MargDiagnostics {
    /// Invocations of `marg`, including the root and pinned short-circuits.
    /// One invocation yields the estimates for every color.
    pub recursive_calls: u64,
    /// Invocations that returned at the depth test.
    pub termination_events: u64,
    pub max_block_size: usize,
    pub max_f_size: usize,
    /// Depth-test returns (`beta = 0`) whose block had no feasible
    /// configuration at all.
    pub infeasible_blocks: u64,
    /// Sum of the raw estimates before normalization, when normalized.
    pub pre_normalization_sum: Option<f64>,
}

#[derive(Default)]
struct Counters {
    calls: AtomicU64,
    terminations: AtomicU64,
    max_block: AtomicUsize,
    max_f: AtomicUsize,
    infeasible: AtomicU64,
}

struct Ctx<'a> {
    opts: &'a MargOptions,
    counters: Counters,
}

impl Ctx<'_> {
    fn new(opts: &MargOptions) -> Ctx<'_> {
        Ctx {
            opts,
            counters: Counters::default(),
        }
    }

    fn enter(&self) -> Result<()> {
        let calls = self.counters.calls.fetch_add(1, Ordering::Relaxed) + 1;
        if let Some(limit) = self.opts.call_budget {
            if calls > limit {
                return Err(Error::Budget(format!("marg call budget {limit} exhausted")));
            }
        }
        if let Some(deadline) = self.opts.deadline {
            if calls.is_multiple_of(64) && Instant::now() >= deadline {
                return Err(Error::Budget("marg deadline reached".into()));
            }
        }
        Ok(())
    }

    fn diagnostics(&self) -> MargDiagnostics {
        MargDiagnostics {
            recursive_calls: self.counters.calls.load(Ordering::Relaxed),
            termination_events: self.counters.terminations.load(Ordering::Relaxed),
            max_block_size: self.counters.max_block.load(Ordering::Relaxed),
            max_f_size: self.counters.max_f.load(Ordering::Relaxed),
            infeasible_blocks: self.counters.infeasible.load(Ordering::Relaxed),
            pre_normalization_sum: None,
        }
    }
}

fn indicator(q: usize, c: Color) -> Vec<f64> {
    (0..q)
        .map(|x| if x == c as usize { 1.0 } else { 0.0 })
        .collect()
}

/// `Ω_i^ρ` with `i` 1-based in `1..=m+1`: the block interior `B \ B̄` and
/// the edges of `G[B]` are deleted, `u_j` is pinned to `ρ(u_j)` for `j < i`,
/// and the boundary edges `u_j v_j` with `j >= i` are deleted. `rho` is
/// aligned with `block.vertices`.
pub fn build_subinstance(
    inst: &Instance,
    block: &Block,
    i: usize,
    rho: &[Color],
) -> Result<Instance> {
    let m = block.boundary_edges.len();
    if i == 0 || i > m + 1 {
        return Err(invalid(format!("boundary index {i} outside 1..={}", m + 1)));
    }
    if rho.len() != block.len() {
        return Err(invalid("block configuration has the wrong length"));
    }
    subinstance(inst, block, i - 1, |u| rho[block.index_of(u).unwrap()])
}

/// `fixed` boundary edges are pinned at their `u`, the rest deleted.
fn subinstance(
    inst: &Instance,
    block: &Block,
    fixed: usize,
    color_of: impl Fn(usize) -> Color,
) -> Result<Instance> {
    let mut sub = inst.clone();
    for &e in &block.internal_edge_ids {
        sub.remove_edge(e);
    }
    for &u in &block.vertices {
        if block.inner_boundary.binary_search(&u).is_err() {
            sub.remove_vertex(u);
        }
    }
    for (j, (&(u, _), &e)) in block
        .boundary_edges
        .iter()
        .zip(&block.boundary_edge_ids)
        .enumerate()
    {
        if j < fixed {
            sub.set_pin(u, color_of(u))?;
        } else {
            sub.remove_edge(e);
        }
    }
    Ok(sub)
}

/// One walk per boundary edge `(u_i, v_i)`: a shortest path from `v` to
/// `u_i` inside `G[B]` (lexicographically smallest among shortest), then
/// `v_i`.
pub fn escape_paths(block: &Block, v: usize) -> Result<Vec<SawWalk>> {
    let root = block
        .index_of(v)
        .ok_or_else(|| invalid(format!("vertex {v} is not in the block")))?;
    let k = block.len();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(a, b) in &block.internal_edges {
        let (ia, ib) = (block.index_of(a).unwrap(), block.index_of(b).unwrap());
        nbrs[ia].push(ib);
        nbrs[ib].push(ia);
    }
    for list in &mut nbrs {
        list.sort_unstable();
    }
    let mut parent = vec![usize::MAX; k];
    parent[root] = root;
    let mut queue = VecDeque::from([root]);
    while let Some(a) = queue.pop_front() {
        for &b in &nbrs[a] {
            if parent[b] == usize::MAX {
                parent[b] = a;
                queue.push_back(b);
            }
        }
    }
    block
        .boundary_edges
        .iter()
        .map(|&(u, w)| {
            let mut cur = block.index_of(u).unwrap();
            if parent[cur] == usize::MAX {
                return Err(Error::Invariant(format!(
                    "boundary vertex {u} unreachable from {v} inside the block"
                )));
            }
            let mut rev = vec![w, u];
            while cur != root {
                cur = parent[cur];
                rev.push(block.vertices[cur]);
            }
            rev.reverse();
            Ok(SawWalk { vertices: rev })
        })
        .collect()
}

/// Evaluates the block recursion ratio for every `π ∈ configs` given the
/// boundary marginals `p[ρ][i] = Pr_{Ω_i^ρ}[c(v_i) = ρ(u_i)]` (exact or
/// estimated). Products are taken in log space and normalized by
/// log-sum-exp; fails if every configuration has zero mass.
pub fn block_marginals_from(
    inst: &Instance,
    block: &Block,
    configs: &[Vec<Color>],
    p: &[Vec<f64>],
) -> Result<Vec<f64>> {
    let params = inst.params();
    let lambda = params.lambda();
    let ln_beta = params.beta.value().ln();
    let logs: Vec<f64> = configs
        .iter()
        .zip(p)
        .map(|(rho, pr)| {
            let mono = block
                .internal_edges
                .iter()
                .filter(|&&(a, b)| {
                    rho[block.index_of(a).unwrap()] == rho[block.index_of(b).unwrap()]
                })
                .count();
            let mut acc = if mono == 0 {
                0.0
            } else {
                mono as f64 * ln_beta
            };
            for &pi in pr {
                acc += (1.0 - lambda * pi).max(0.0).ln();
            }
            acc
        })
        .collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return Err(Error::Infeasible(format!(
            "every configuration of the block {:?} has zero mass in the recursion",
            block.vertices
        )));
    }
    let lse = top + logs.iter().map(|&a| (a - top).exp()).sum::<f64>().ln();
    Ok(logs.iter().map(|&a| (a - lse).exp()).collect())
}

/// One `marg` invocation, all colors at once.
fn marg_vec(ctx: &Ctx, inst: &Instance, v: usize, l: i64) -> Result<Vec<f64>> {
    ctx.enter()?;
    let params = inst.params();
    let q = params.q;
    if let Some(c) = inst.pin(v) {
        return Ok(indicator(q, c));
    }
    let zero_beta = params.beta.is_zero();
    if !zero_beta && l < 0 {
        ctx.counters.terminations.fetch_add(1, Ordering::Relaxed);
        return Ok(vec![1.0 / q as f64; q]);
    }
    let block = minimal_permissive_block(inst, &[v], ctx.opts.block_budget)?;
    ctx.counters
        .max_block
        .fetch_max(block.len(), Ordering::Relaxed);
    let configs = feasible_block_configs(inst, &block, ctx.opts.config_budget)?;
    ctx.counters
        .max_f
        .fetch_max(configs.len(), Ordering::Relaxed);
    let vi = block.index_of(v).unwrap();
    if l < 0 {
        ctx.counters.terminations.fetch_add(1, Ordering::Relaxed);
        if configs.is_empty() {
            ctx.counters.infeasible.fetch_add(1, Ordering::Relaxed);
        }
        let mut out = vec![0.0; q];
        for rho in &configs {
            out[rho[vi] as usize] = 1.0 / q as f64;
        }
        return Ok(out);
    }
    let p_hat = block_estimates(ctx, inst, &block, &configs, v, l)?;
    let mut out = vec![0.0; q];
    for (rho, p) in configs.iter().zip(&p_hat) {
        out[rho[vi] as usize] += p;
    }
    let cap = params.clamp_bound(inst.degree(v));
    for x in &mut out {
        *x = x.min(cap);
    }
    Ok(out)
}

/// `marg-block` for every `π ∈ F(B)` at once.
fn block_estimates(
    ctx: &Ctx,
    inst: &Instance,
    block: &Block,
    configs: &[Vec<Color>],
    v: usize,
    l: i64,
) -> Result<Vec<f64>> {
    let m = block.boundary_edges.len();
    let paths = escape_paths(block, v)?;
    let u_idx: Vec<usize> = block
        .boundary_edges
        .iter()
        .map(|&(u, _)| block.index_of(u).unwrap())
        .collect();

    // The estimate for Ω_i^ρ is a function of the free component of v_i and
    // the pins adjacent to it, so ρ matters only through the colors of the
    // pinned u_j (j < i) on that frontier. Configurations agreeing there share
    // one evaluation, done on the sub-instance of the first such ρ.
    let mut tasks: Vec<(usize, usize)> = Vec::new();
    // task index for (ρ, i); unused when v_i is pinned
    let mut which = vec![vec![usize::MAX; m]; configs.len()];
    for i in 0..m {
        let (_, w) = block.boundary_edges[i];
        if inst.is_pinned(w) {
            continue;
        }
        let template = subinstance(inst, block, i, |_| 0)?;
        let frontier = pinned_frontier(&template, w);
        let mut relevant: Vec<usize> = u_idx[..i]
            .iter()
            .copied()
            .filter(|&b| frontier.binary_search(&block.vertices[b]).is_ok())
            .collect();
        relevant.sort_unstable();
        relevant.dedup();
        let mut seen: HashMap<Vec<Color>, usize> = HashMap::new();
        for (r, rho) in configs.iter().enumerate() {
            let key: Vec<Color> = relevant.iter().map(|&b| rho[b]).collect();
            which[r][i] = *seen.entry(key).or_insert_with(|| {
                tasks.push((i, r));
                tasks.len() - 1
            });
        }
    }

    let run = |&(i, r): &(usize, usize)| -> Result<Vec<f64>> {
        let rho = &configs[r];
        let sub = subinstance(inst, block, i, |u| rho[block.index_of(u).unwrap()])?;
        marg_vec(
            ctx,
            &sub,
            block.boundary_edges[i].1,
            l - paths[i].len() as i64,
        )
    };
    let results: Vec<Vec<f64>> = if ctx.opts.parallel && tasks.len() > 1 {
        tasks.par_iter().map(run).collect::<Result<_>>()?
    } else {
        tasks.iter().map(run).collect::<Result<_>>()?
    };

    // pinned v_i return their indicator at once
    let pinned_hits = block
        .boundary_edges
        .iter()
        .filter(|e| inst.is_pinned(e.1))
        .count();
    ctx.counters
        .calls
        .fetch_add(pinned_hits as u64, Ordering::Relaxed);
    let mut p = vec![vec![0.0; m]; configs.len()];
    for (r, rho) in configs.iter().enumerate() {
        for i in 0..m {
            let x = rho[u_idx[i]];
            p[r][i] = match inst.pin(block.boundary_edges[i].1) {
                Some(c) => (c == x) as u8 as f64,
                None => results[which[r][i]][x as usize],
            };
        }
    }
    block_marginals_from(inst, block, configs, &p)
}

/// Pinned vertices adjacent to the free component of `start`, ascending.
fn pinned_frontier(inst: &Instance, start: usize) -> Vec<usize> {
    let mut seen = HashSet::from([start]);
    let mut frontier = Vec::new();
    let mut stack = vec![start];
    while let Some(a) = stack.pop() {
        for b in inst.neighbors(a) {
            if seen.insert(b) {
                if inst.is_pinned(b) {
                    frontier.push(b);
                } else {
                    stack.push(b);
                }
            }
        }
    }
    frontier.sort_unstable();
    frontier
}

fn check_entry(inst: &Instance, v: usize) -> Result<()> {
    inst.params().require_algorithmic()?;
    if v >= inst.n() || !inst.is_active(v) {
        return Err(invalid(format!("vertex {v} is not in the instance")));
    }
    Ok(())
}

/// Estimates of `Pr[c(v) = x]` for every color `x`, each exactly what the
/// single-color procedure returns. Dispatches on `beta = 0`.
pub fn marg_all(
    inst: &Instance,
    v: usize,
    l: i64,
    opts: &MargOptions,
) -> Result<(Vec<f64>, MargDiagnostics)> {
    check_entry(inst, v)?;
    let ctx = Ctx::new(opts);
    let out = marg_vec(&ctx, inst, v, l)?;
    Ok((out, ctx.diagnostics()))
}

/// Estimate of `Pr_Ω[c(v) = x]` with depth budget `l`.
pub fn marg(
    inst: &Instance,
    v: usize,
    x: Color,
    l: i64,
    opts: &MargOptions,
) -> Result<(f64, MargDiagnostics)> {
    if x as usize >= inst.q() {
        return Err(invalid(format!("color {} out of range", x as usize + 1)));
    }
    let (out, diag) = marg_all(inst, v, l, opts)?;
    Ok((out[x as usize], diag))
}

/// Estimate of `Pr_Ω[c(B) = π]` for `B = B(v)`, `π` aligned with
/// `block.vertices`.
pub fn marg_block(
    inst: &Instance,
    v: usize,
    block: &Block,
    pi: &[Color],
    l: i64,
    opts: &MargOptions,
) -> Result<(f64, MargDiagnostics)> {
    check_entry(inst, v)?;
    let ctx = Ctx::new(opts);
    let configs = feasible_block_configs(inst, block, opts.config_budget)?;
    let Some(idx) = configs.iter().position(|c| c.as_slice() == pi) else {
        return Err(invalid("configuration is not in F(B)"));
    };
    let est = block_estimates(&ctx, inst, block, &configs, v, l)?;
    Ok((est[idx], ctx.diagnostics()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalEstimate {
    pub vertex: usize,
    /// Normalized estimates, index = color - 1.
    pub marginals: Vec<f64>,
    /// Estimates before normalization.
    pub raw: Vec<f64>,
    pub depth: i64,
    pub diagnostics: MargDiagnostics,
}

/// [`marg_all`] normalized to a probability vector.
pub fn marginal_distribution(
    inst: &Instance,
    v: usize,
    l: i64,
    opts: &MargOptions,
) -> Result<MarginalEstimate> {
    let (raw, mut diagnostics) = marg_all(inst, v, l, opts)?;
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::Infeasible(format!(
            "every color of vertex {v} has estimate 0"
        )));
    }
    diagnostics.pre_normalization_sum = Some(total);
    Ok(MarginalEstimate {
        vertex: v,
        marginals: raw.iter().map(|p| p / total).collect(),
        raw,
        depth: l,
        diagnostics,
    })
}

/// Default coefficient `c` in `L = ⌈c ln n⌉`.
pub const DEFAULT_DEPTH_COEFF: f64 = 3.0;

/// `⌈c ln n⌉`.
pub fn default_depth(n: usize, c: f64) -> i64 {
    (c * (n.max(1) as f64).ln()).ceil() as i64
}

/// `⌈c (ln n + ln 1/ε)⌉`.
pub fn depth_for_eps(n: usize, eps: f64, c: f64) -> i64 {
    (c * ((n.max(1) as f64).ln() + (1.0 / eps).ln())).ceil() as i64
}

/// Prefactor used by [`error_bound`] when `beta > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PrefactorForm {
    /// `q + n ln(1/beta)`.
    #[default]
    NForm,
    /// `q + deg(v) ln(1/beta)`.
    DegreeForm,
}

/// A-priori error envelope `prefactor · Σ_{k=L+1}^{θL} E_δ(v, k)` with
/// `θ = max(⌈log_{1/α}((q-1)/(2(1-beta)))⌉, 2)`. At `beta = 0` the
/// prefactor is `n ln q`. `alpha` is a decay rate in `(0, 1)` supplied by the
/// caller, typically a fitted contraction rate.
pub fn error_bound(
    g: &Graph,
    v: usize,
    l: usize,
    params: PottsParams,
    alpha: f64,
    form: PrefactorForm,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if l < 1 {
        return Err(invalid("error_bound needs L >= 1"));
    }
    let q = params.q as f64;
    let ratio = (q - 1.0) / (2.0 * params.lambda());
    let theta = ((ratio.ln() / (1.0 / alpha).ln()).ceil() as usize).max(2);
    let n = g.n() as f64;
    let prefactor = if params.beta.is_zero() {
        n * q.ln()
    } else {
        let ln_inv = -params.beta.value().ln();
        match form {
            PrefactorForm::NForm => q + n * ln_inv,
            PrefactorForm::DegreeForm => q + g.degree(v) as f64 * ln_inv,
        }
    };
    // no walk is longer than n - 1 edges
    let top = (theta * l).min(g.n().saturating_sub(1));
    if top <= l {
        return Ok(0.0);
    }
    let profile = e_delta_profile(g, v, top, &|d| params.delta(d));
    Ok(prefactor * profile[l + 1..=top].iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_block_marginal, exact_marginals};
    use crate::graph::{generate, Family};
    use crate::model::Beta;

    fn inst(g: Graph, q: usize, num: u64, den: u64, pins: &[(usize, Color)]) -> Instance {
        Instance::new(
            g,
            PottsParams::new(q, Beta::new(num, den).unwrap()).unwrap(),
            pins,
        )
        .unwrap()
    }

    fn opts() -> MargOptions {
        MargOptions::default()
    }

    #[test]
    fn pinned_and_truncated_base_cases() {
        let i = inst(generate(Family::Path(3)).unwrap(), 3, 1, 2, &[(0, 1)]);
        assert_eq!(marg(&i, 0, 1, 5, &opts()).unwrap().0, 1.0);
        assert_eq!(marg(&i, 0, 0, 5, &opts()).unwrap().0, 0.0);
        let (p, d) = marg(&i, 2, 0, -1, &opts()).unwrap();
        assert_eq!(p, 1.0 / 3.0);
        assert_eq!(d.termination_events, 1);
    }

    #[test]
    fn exact_on_small_path() {
        let i = inst(generate(Family::Path(3)).unwrap(), 3, 1, 2, &[]);
        let exact = exact_marginals(&i, 1).unwrap();
        for l in 4..7 {
            let (est, d) = marg_all(&i, 1, l, &opts()).unwrap();
            assert_eq!(d.termination_events, 0);
            for x in 0..3 {
                assert!((est[x] - exact[x]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn subinstance_construction() {
        let i = inst(generate(Family::Path(3)).unwrap(), 7, 0, 1, &[]);
        let b = minimal_permissive_block(&i, &[1], 64).unwrap();
        let s1 = build_subinstance(&i, &b, 1, &[2]).unwrap();
        assert_eq!(s1.degree(1), 0);
        assert!(!s1.is_pinned(1) && s1.is_active(1));
        let s3 = build_subinstance(&i, &b, 3, &[2]).unwrap();
        assert_eq!(s3.pin(1), Some(2));
        assert_eq!(s3.degree(1), 2);
        assert!(build_subinstance(&i, &b, 4, &[2]).is_err());
        assert!(build_subinstance(&i, &b, 0, &[2]).is_err());

        let star = inst(generate(Family::Star(5)).unwrap(), 7, 0, 1, &[]);
        let b = minimal_permissive_block(&star, &[1], 64).unwrap();
        let s = build_subinstance(&star, &b, 2, &[4, 6]).unwrap();
        // B = {0, 1}; the leaf 1 is interior and removed
        assert!(!s.is_active(1));
        assert_eq!(s.pin(0), Some(4));
        assert_eq!(s.neighbors(0).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn escape_path_examples() {
        let star = inst(generate(Family::Star(5)).unwrap(), 7, 0, 1, &[]);
        let b = minimal_permissive_block(&star, &[1], 64).unwrap();
        let paths = escape_paths(&b, 1).unwrap();
        assert_eq!(paths[0].vertices, vec![1, 0, 2]);
        assert_eq!(paths.len(), 4);
        assert!(paths.iter().all(|p| p.len() == 2));
        let p3 = inst(generate(Family::Path(3)).unwrap(), 7, 0, 1, &[]);
        let b = minimal_permissive_block(&p3, &[1], 64).unwrap();
        let paths = escape_paths(&b, 1).unwrap();
        assert_eq!(
            paths.iter().map(|p| p.vertices.clone()).collect::<Vec<_>>(),
            vec![vec![1, 0], vec![1, 2]]
        );
    }

    #[test]
    fn isolated_block_formula() {
        // m = 0: the ratio reduces to w(π) / Σ w(ρ)
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let i = inst(g, 3, 1, 2, &[]);
        let b = Block::from_vertices(&i, vec![0, 1]);
        let (p, _) = marg_block(&i, 0, &b, &[1, 1], 3, &opts()).unwrap();
        assert!((p - 0.5 / (3.0 * 0.5 + 6.0)).abs() < 1e-15);
    }

    #[test]
    fn single_pinned_neighbor_formula() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let i = inst(g, 4, 1, 3, &[(1, 2)]);
        let b = minimal_permissive_block(&i, &[0], 64).unwrap();
        let (p, _) = marg_block(&i, 0, &b, &[2], 3, &opts()).unwrap();
        let beta = 1.0 / 3.0;
        assert!((p - beta / (3.0 + beta)).abs() < 1e-15);
    }

    #[test]
    fn recursion_identity_with_exact_inputs() {
        let g = generate(Family::Star(5)).unwrap();
        let i = inst(g, 7, 0, 1, &[(3, 2)]);
        let b = minimal_permissive_block(&i, &[1], 64).unwrap();
        let configs = feasible_block_configs(&i, &b, 1000).unwrap();
        let p: Vec<Vec<f64>> = configs
            .iter()
            .map(|rho| {
                (0..b.boundary_edges.len())
                    .map(|k| {
                        let sub = build_subinstance(&i, &b, k + 1, rho).unwrap();
                        let (u, w) = b.boundary_edges[k];
                        exact_marginals(&sub, w).unwrap()[rho[b.index_of(u).unwrap()] as usize]
                    })
                    .collect()
            })
            .collect();
        let est = block_marginals_from(&i, &b, &configs, &p).unwrap();
        for (rho, e) in configs.iter().zip(est) {
            assert!((e - exact_block_marginal(&i, &b.vertices, rho).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn coloring_base_case_uses_local_feasibility() {
        // v has q-1 = 2 pinned neighbors with distinct colors
        let g = generate(Family::Star(2)).unwrap();
        let i = inst(g, 3, 0, 1, &[(1, 0), (2, 1)]);
        let (out, d) = marg_all(&i, 0, -1, &opts()).unwrap();
        assert_eq!(out, vec![0.0, 0.0, 1.0 / 3.0]);
        assert_eq!(d.termination_events, 1);
    }

    #[test]
    fn triangle_colorings_are_uniform() {
        let i = inst(generate(Family::Complete(3)).unwrap(), 3, 0, 1, &[]);
        let est = marginal_distribution(&i, 0, 10, &opts()).unwrap();
        for p in est.marginals {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn infeasible_input_errors() {
        let i = inst(generate(Family::Complete(4)).unwrap(), 3, 0, 1, &[]);
        assert!(matches!(
            marginal_distribution(&i, 0, 10, &opts()),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn q_two_rejected() {
        let i = inst(generate(Family::Path(2)).unwrap(), 2, 1, 2, &[]);
        assert!(matches!(
            marg(&i, 0, 0, 3, &opts()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn budgets() {
        let i = inst(generate(Family::Cycle(8)).unwrap(), 4, 1, 2, &[]);
        let o = MargOptions {
            call_budget: Some(10),
            ..MargOptions::default()
        };
        assert!(matches!(marg(&i, 0, 0, 20, &o), Err(Error::Budget(_))));
        let k = inst(generate(Family::Complete(6)).unwrap(), 3, 0, 1, &[]);
        let o = MargOptions {
            block_budget: 3,
            ..MargOptions::default()
        };
        assert!(matches!(marg(&k, 0, 0, 20, &o), Err(Error::Budget(_))));
    }

    #[test]
    fn parallel_and_sequential_agree_bitwise() {
        let i = inst(
            generate(Family::Caterpillar {
                spine: 4,
                bristles: 2,
            })
            .unwrap(),
            5,
            1,
            4,
            &[(5, 1)],
        );
        let seq = MargOptions {
            parallel: false,
            ..MargOptions::default()
        };
        let a = marg_all(&i, 1, 4, &seq).unwrap();
        let b = marg_all(&i, 1, 4, &opts()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_bound_cases() {
        let p = PottsParams::new(7, Beta::new(1, 2).unwrap()).unwrap();
        let g = generate(Family::Path(60)).unwrap();
        let b: Vec<f64> = (2..8)
            .map(|l| error_bound(&g, 0, l, p, 0.5, PrefactorForm::NForm).unwrap())
            .collect();
        assert!(b.iter().all(|x| x.is_finite() && *x > 0.0));
        assert!(b.windows(2).all(|w| w[1] < w[0]));
        let short = generate(Family::Path(4)).unwrap();
        assert_eq!(
            error_bound(&short, 0, 3, p, 0.5, PrefactorForm::NForm).unwrap(),
            0.0
        );
        assert!(error_bound(&g, 0, 3, p, 1.0, PrefactorForm::NForm).is_err());
        let deg = error_bound(&g, 0, 3, p, 0.5, PrefactorForm::DegreeForm).unwrap();
        assert!(deg < b[1]);
    }

    #[test]
    fn depth_helpers() {
        assert_eq!(default_depth(2000, 3.0), 23);
        assert_eq!(default_depth(1, 3.0), 0);
        assert_eq!(depth_for_eps(100, 0.01, 1.0), 10);
    }
}
