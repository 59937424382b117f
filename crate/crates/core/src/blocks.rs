//! Permissive blocks: closure, boundary bookkeeping, feasible block
//! configurations and the local-sparsity check.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::graph::Graph;
use crate::model::{Color, Instance, PottsParams};

/// Default cap on block size.
pub const DEFAULT_BLOCK_BUDGET: usize = 64;
/// Default cap on `|F(B)|`.
pub const DEFAULT_CONFIG_BUDGET: usize = 5_000_000;

/// A permissive block `B` of an instance, with everything the recursion
/// needs about its boundary. All lists are sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub vertices: Vec<usize>,
    /// Vertices of `B` with a neighbor outside `B`.
    pub inner_boundary: Vec<usize>,
    /// `(u_i, v_i)` with `u_i ∈ B`, `v_i ∉ B`, sorted by `(u_i, v_i)`.
    pub boundary_edges: Vec<(usize, usize)>,
    pub boundary_edge_ids: Vec<usize>,
    /// Present edges of `G[B]`.
    pub internal_edges: Vec<(usize, usize)>,
    pub internal_edge_ids: Vec<usize>,
}

impl Block {
    /// Builds the boundary data of an arbitrary vertex set (no permissiveness
    /// check). `vertices` need not be sorted.
    pub fn from_vertices(inst: &Instance, mut vertices: Vec<usize>) -> Block {
        vertices.sort_unstable();
        vertices.dedup();
        let mut inner = Vec::new();
        let mut boundary = Vec::new();
        let mut internal = Vec::new();
        for &u in &vertices {
            let mut is_inner = false;
            for (w, e) in inst.neighbor_edges(u) {
                if vertices.binary_search(&w).is_ok() {
                    if u < w {
                        internal.push(((u, w), e));
                    }
                } else {
                    is_inner = true;
                    boundary.push(((u, w), e));
                }
            }
            if is_inner {
                inner.push(u);
            }
        }
        internal.sort_unstable();
        Block {
            vertices,
            inner_boundary: inner,
            boundary_edges: boundary.iter().map(|x| x.0).collect(),
            boundary_edge_ids: boundary.iter().map(|x| x.1).collect(),
            internal_edges: internal.iter().map(|x| x.0).collect(),
            internal_edge_ids: internal.iter().map(|x| x.1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }

    pub fn index_of(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    /// Outer vertex boundary `∂B`, ascending.
    pub fn outer_boundary(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self.boundary_edges.iter().map(|e| e.1).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every unpinned vertex of `∂B` is low-degree and `B` avoids pins.
    pub fn is_permissive(&self, inst: &Instance) -> bool {
        self.vertices.iter().all(|&u| !inst.is_pinned(u))
            && self
                .outer_boundary()
                .into_iter()
                .all(|w| inst.is_pinned(w) || inst.params().is_low_degree(inst.degree(w)))
    }
}

/// `B(S)`: close `S` under "add the lowest-id unpinned high-degree vertex of
/// `∂B`". Fails with [`Error::Budget`] once `|B|` would exceed `budget`.
pub fn minimal_permissive_block(inst: &Instance, seed: &[usize], budget: usize) -> Result<Block> {
    if seed.is_empty() {
        return Err(invalid("block seed set is empty"));
    }
    let params = inst.params();
    let mut members: Vec<usize> = Vec::with_capacity(seed.len());
    for &s in seed {
        if s >= inst.n() || !inst.is_active(s) {
            return Err(invalid(format!(
                "block seed vertex {s} is not in the instance"
            )));
        }
        if inst.is_pinned(s) {
            return Err(invalid(format!("block seed vertex {s} is pinned")));
        }
        if let Err(pos) = members.binary_search(&s) {
            members.insert(pos, s);
        }
    }
    let violates = |w: usize| !inst.is_pinned(w) && !params.is_low_degree(inst.degree(w));
    let mut heap = BinaryHeap::new();
    for &u in &members {
        heap.extend(inst.neighbors(u).filter(|&w| violates(w)).map(Reverse));
    }
    while let Some(Reverse(w)) = heap.pop() {
        let Err(pos) = members.binary_search(&w) else {
            continue;
        };
        members.insert(pos, w);
        if members.len() > budget {
            return Err(Error::Budget(format!(
                "permissive block exceeds {budget} vertices"
            )));
        }
        heap.extend(
            inst.neighbors(w)
                .filter(|&x| violates(x) && members.binary_search(&x).is_err())
                .map(Reverse),
        );
    }
    if members.len() > budget {
        return Err(Error::Budget(format!(
            "permissive block exceeds {budget} vertices"
        )));
    }
    Ok(Block::from_vertices(inst, members))
}

/// `F(B)`, colors aligned with `block.vertices`, in lexicographic order.
///
/// With `beta > 0` this is all of `[q]^B`. With `beta = 0` it is the set of
/// assignments proper on `G[B]` that avoid the colors of pinned neighbors;
/// the list may be empty.
pub fn feasible_block_configs(
    inst: &Instance,
    block: &Block,
    budget: usize,
) -> Result<Vec<Vec<Color>>> {
    let q = inst.q();
    let k = block.len();
    if !inst.params().beta.is_zero() {
        let total = (q as f64).powi(k as i32);
        if total > budget as f64 {
            return Err(Error::Budget(format!("|F(B)| = {q}^{k} exceeds {budget}")));
        }
        let total = q.pow(k as u32);
        let mut out = Vec::with_capacity(total);
        let mut cur = vec![0 as Color; k];
        for _ in 0..total {
            out.push(cur.clone());
            for pos in (0..k).rev() {
                cur[pos] += 1;
                if (cur[pos] as usize) < q {
                    break;
                }
                cur[pos] = 0;
            }
        }
        return Ok(out);
    }

    // Local indices; forbidden colors from pinned neighbors.
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &(a, b) in &block.internal_edges {
        let (ia, ib) = (block.index_of(a).unwrap(), block.index_of(b).unwrap());
        nbrs[ia].push(ib);
        nbrs[ib].push(ia);
    }
    let mut forbidden = vec![vec![false; q]; k];
    for &(u, w) in &block.boundary_edges {
        if let Some(c) = inst.pin(w) {
            forbidden[block.index_of(u).unwrap()][c as usize] = true;
        }
    }
    let mut search = Mrv {
        q,
        nbrs,
        forbidden,
        assign: vec![None; k],
        out: Vec::new(),
        budget,
        nodes: 0,
    };
    search.run()?;
    let mut out = search.out;
    out.sort_unstable();
    Ok(out)
}

struct Mrv {
    q: usize,
    nbrs: Vec<Vec<usize>>,
    forbidden: Vec<Vec<bool>>,
    assign: Vec<Option<Color>>,
    out: Vec<Vec<Color>>,
    budget: usize,
    nodes: usize,
}

impl Mrv {
    fn allowed(&self, i: usize, c: usize) -> bool {
        !self.forbidden[i][c]
            && self.nbrs[i]
                .iter()
                .all(|&j| self.assign[j] != Some(c as Color))
    }

    fn run(&mut self) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget.saturating_mul(16) || self.out.len() > self.budget {
            return Err(Error::Budget(format!(
                "feasible block configurations exceed {}",
                self.budget
            )));
        }
        let mut best: Option<(usize, usize)> = None;
        for i in 0..self.assign.len() {
            if self.assign[i].is_some() {
                continue;
            }
            let count = (0..self.q).filter(|&c| self.allowed(i, c)).count();
            if best.is_none_or(|(_, b)| count < b) {
                best = Some((i, count));
            }
        }
        let Some((i, count)) = best else {
            self.out
                .push(self.assign.iter().map(|c| c.unwrap()).collect());
            return Ok(());
        };
        if count == 0 {
            return Ok(());
        }
        for c in 0..self.q {
            if self.allowed(i, c) {
                self.assign[i] = Some(c as Color);
                self.run()?;
                self.assign[i] = None;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SparsityMode {
    /// Every simple path of length `1..=l_max`.
    Exhaustive,
    /// `trials` random simple paths.
    Sampled { trials: usize, seed: u64 },
}

/// Default cap on the number of paths in exhaustive mode.
pub const DEFAULT_PATH_BUDGET: u64 = 2_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityReport {
    pub l_max: usize,
    pub mode: String,
    pub paths_tested: u64,
    /// `max |B(P)| / (ℓ + ln n)` over tested paths.
    pub worst_ratio: f64,
    pub worst_path: Vec<usize>,
    pub worst_block_size: usize,
    /// Largest `|B(P)|` per path length `1..=l_max` (0 if none tested).
    pub max_block_size: Vec<usize>,
}

/// Measures `|B(P)| / (ℓ + ln n)` over simple paths of `g`, with `B`
/// computed in the unpinned instance.
pub fn verify_locally_sparse(
    g: &Graph,
    params: PottsParams,
    l_max: usize,
    mode: SparsityMode,
    path_budget: u64,
) -> Result<SparsityReport> {
    if l_max < 1 {
        return Err(invalid("verify_locally_sparse needs l_max >= 1"));
    }
    let inst = Instance::unpinned(g.clone(), params);
    let ln_n = (g.n() as f64).ln();
    let mut report = SparsityReport {
        l_max,
        mode: String::new(),
        paths_tested: 0,
        worst_ratio: 0.0,
        worst_path: Vec::new(),
        worst_block_size: 0,
        max_block_size: vec![0; l_max],
    };
    let record = |path: &[usize], report: &mut SparsityReport| -> Result<()> {
        let block = minimal_permissive_block(&inst, path, usize::MAX)?;
        let l = path.len() - 1;
        let ratio = block.len() as f64 / (l as f64 + ln_n);
        report.paths_tested += 1;
        report.max_block_size[l - 1] = report.max_block_size[l - 1].max(block.len());
        if ratio > report.worst_ratio {
            report.worst_ratio = ratio;
            report.worst_path = path.to_vec();
            report.worst_block_size = block.len();
        }
        Ok(())
    };
    match mode {
        SparsityMode::Exhaustive => {
            report.mode = "exhaustive".into();
            // each undirected path once: start < end
            let mut total = 0u64;
            for v in 0..g.n() {
                for l in 1..=l_max {
                    crate::saw::for_each_saw(g, v, l, |p| total += (p[0] < p[l]) as u64);
                    if total > path_budget {
                        return Err(Error::Budget(format!(
                            "more than {path_budget} paths; use sampled mode"
                        )));
                    }
                }
            }
            for v in 0..g.n() {
                for l in 1..=l_max {
                    let mut paths = Vec::new();
                    crate::saw::for_each_saw(g, v, l, |p| {
                        if p[0] < p[l] {
                            paths.push(p.to_vec());
                        }
                    });
                    for p in paths {
                        record(&p, &mut report)?;
                    }
                }
            }
        }
        SparsityMode::Sampled { trials, seed } => {
            report.mode = format!("sampled(trials={trials}, seed={seed})");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut on_path = vec![false; g.n()];
            for _ in 0..trials {
                let l = rng.random_range(1..=l_max);
                let start = rng.random_range(0..g.n());
                let mut path = vec![start];
                on_path[start] = true;
                while path.len() <= l {
                    let tail = *path.last().unwrap();
                    let opts: Vec<usize> = g
                        .neighbors(tail)
                        .iter()
                        .copied()
                        .filter(|&w| !on_path[w])
                        .collect();
                    if opts.is_empty() {
                        break;
                    }
                    let w = opts[rng.random_range(0..opts.len())];
                    on_path[w] = true;
                    path.push(w);
                }
                for &u in &path {
                    on_path[u] = false;
                }
                if path.len() >= 2 {
                    record(&path, &mut report)?;
                }
            }
        }
    }
    Ok(report)
}
