//! Self-avoiding walks, the SAW tree, and the contraction functional
//! `E_δ(v, ℓ) = Σ_{walks} Π_{i=1}^{ℓ} δ(deg v_i)`.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::Graph;

/// A self-avoiding walk `(v, v_1, ..., v_ℓ)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct SawWalk {
    pub vertices: Vec<usize>,
}

impl SawWalk {
    /// Number of edges.
    pub fn len(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn start(&self) -> usize {
        self.vertices[0]
    }

    pub fn end(&self) -> usize {
        *self.vertices.last().unwrap()
    }
}

/// Calls `f` on every self-avoiding walk of length exactly `l` from `v`, in
/// lexicographic order of vertex sequences.
pub fn for_each_saw(g: &Graph, v: usize, l: usize, mut f: impl FnMut(&[usize])) {
    let mut on_path = vec![false; g.n()];
    let mut path = vec![v];
    on_path[v] = true;
    fn rec(
        g: &Graph,
        l: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        f: &mut dyn FnMut(&[usize]),
    ) {
        if path.len() == l + 1 {
            f(path);
            return;
        }
        let tail = *path.last().unwrap();
        for &w in g.neighbors(tail) {
            if on_path[w] {
                continue;
            }
            on_path[w] = true;
            path.push(w);
            rec(g, l, path, on_path, f);
            path.pop();
            on_path[w] = false;
        }
    }
    rec(g, l, &mut path, &mut on_path, &mut f);
}

pub fn enumerate_saws(g: &Graph, v: usize, l: usize) -> Vec<SawWalk> {
    let mut out = Vec::new();
    for_each_saw(g, v, l, |p| {
        out.push(SawWalk {
            vertices: p.to_vec(),
        })
    });
    out
}

pub fn saw_count(g: &Graph, v: usize, l: usize) -> u64 {
    let mut count = 0u64;
    for_each_saw(g, v, l, |_| count += 1);
    count
}

/// `E_δ(v, ℓ)`. The start vertex contributes no factor; `δ` is evaluated at
/// degrees in `g`.
pub fn e_delta(g: &Graph, v: usize, l: usize, delta: &(impl Fn(usize) -> f64 + ?Sized)) -> f64 {
    let mut profile = vec![0.0; l + 1];
    profile_dfs(g, v, l, delta, &mut profile, None);
    profile[l]
}

/// `[E_δ(v, 0), ..., E_δ(v, l_max)]` from one DFS (`E_δ(v, 0) = 1`).
pub fn e_delta_profile(
    g: &Graph,
    v: usize,
    l_max: usize,
    delta: &(impl Fn(usize) -> f64 + ?Sized),
) -> Vec<f64> {
    let mut profile = vec![0.0; l_max + 1];
    profile_dfs(g, v, l_max, delta, &mut profile, None);
    profile
}

/// Streaming DFS adding each walk's product into `profile[len]`. Returns
/// false if `budget` (shared walk-extension counter, limit) ran out.
fn profile_dfs(
    g: &Graph,
    v: usize,
    l_max: usize,
    delta: &(impl Fn(usize) -> f64 + ?Sized),
    profile: &mut [f64],
    budget: Option<(&AtomicU64, u64)>,
) -> bool {
    let factor: Vec<f64> = (0..g.n()).map(|u| delta(g.degree(u))).collect();
    let mut on_path = vec![false; g.n()];
    on_path[v] = true;
    profile[0] += 1.0;
    struct Ctx<'a> {
        g: &'a Graph,
        l_max: usize,
        factor: Vec<f64>,
        on_path: Vec<bool>,
        budget: Option<(&'a AtomicU64, u64)>,
        local: u64,
    }
    fn rec(ctx: &mut Ctx, tail: usize, depth: usize, prod: f64, profile: &mut [f64]) -> bool {
        if depth == ctx.l_max {
            return true;
        }
        for i in 0..ctx.g.degree(tail) {
            let w = ctx.g.neighbors(tail)[i];
            if ctx.on_path[w] {
                continue;
            }
            if let Some((counter, limit)) = ctx.budget {
                ctx.local += 1;
                if ctx.local == 4096 {
                    if counter.fetch_add(ctx.local, Ordering::Relaxed) + ctx.local > limit {
                        return false;
                    }
                    ctx.local = 0;
                }
            }
            let p = prod * ctx.factor[w];
            profile[depth + 1] += p;
            ctx.on_path[w] = true;
            let ok = rec(ctx, w, depth + 1, p, profile);
            ctx.on_path[w] = false;
            if !ok {
                return false;
            }
        }
        true
    }
    let mut ctx = Ctx {
        g,
        l_max,
        factor,
        on_path,
        budget,
        local: 0,
    };
    let ok = rec(&mut ctx, v, 0, 1.0, profile);
    if let Some((counter, limit)) = budget {
        if counter.fetch_add(ctx.local, Ordering::Relaxed) + ctx.local > limit {
            return false;
        }
    }
    ok
}

/// Default cap on walk extensions for [`verify_contraction`].
pub const DEFAULT_WALK_BUDGET: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    /// Lengths actually evaluated, `1..=l_done`.
    pub l: Vec<usize>,
    pub max_e_delta: Vec<f64>,
    /// Vertex attaining each maximum (lowest id on ties).
    pub argmax: Vec<usize>,
    /// `exp(slope)` of a least-squares fit of `ln max_v E_δ(v, ℓ)` on the
    /// upper half of the evaluated range; `0` once the maxima hit zero.
    pub gamma: Option<f64>,
    pub contracting: bool,
    pub fit_range: Option<(usize, usize)>,
    pub warning: Option<String>,
}

/// Tolerance below 1 required of the fitted rate before calling it
/// contracting; exact-rate-one inputs otherwise flip on rounding.
pub const CONTRACTION_TOLERANCE: f64 = 1e-9;

/// Evaluates `max_v E_δ(v, ℓ)` for `ℓ = 1..=l_max` and fits a rate.
///
/// If the total number of walk extensions would exceed `walk_budget`, the
/// largest `l_max' < l_max` that fits is used instead and a warning is set.
pub fn verify_contraction<F>(
    g: &Graph,
    l_max: usize,
    delta: &F,
    walk_budget: u64,
) -> Result<ContractionReport>
where
    F: Fn(usize) -> f64 + Sync + ?Sized,
{
    if l_max < 2 {
        return Err(Error::InvalidArgument(
            "verify_contraction needs l_max >= 2".into(),
        ));
    }
    let mut limit = l_max;
    let profiles = loop {
        if limit == 0 {
            break None;
        }
        let counter = AtomicU64::new(0);
        let results: Vec<Option<Vec<f64>>> = (0..g.n())
            .into_par_iter()
            .map(|v| {
                let mut profile = vec![0.0; limit + 1];
                profile_dfs(
                    g,
                    v,
                    limit,
                    delta,
                    &mut profile,
                    Some((&counter, walk_budget)),
                )
                .then_some(profile)
            })
            .collect();
        if results.iter().all(Option::is_some) {
            break Some(results.into_iter().map(Option::unwrap).collect::<Vec<_>>());
        }
        limit -= 1;
    };
    let warning = (limit < l_max).then(|| {
        format!("walk budget {walk_budget} exceeded; evaluated lengths 1..={limit} of 1..={l_max}")
    });
    let profiles = profiles.unwrap_or_default();

    let mut l = Vec::new();
    let mut max_e = Vec::new();
    let mut argmax = Vec::new();
    for len in 1..=limit {
        let (best_v, best) = profiles.iter().enumerate().map(|(v, p)| (v, p[len])).fold(
            (0, f64::NEG_INFINITY),
            |acc, x| if x.1 > acc.1 { x } else { acc },
        );
        l.push(len);
        max_e.push(best.max(0.0));
        argmax.push(best_v);
    }

    let (gamma, fit_range) = if limit >= 2 {
        let lo = limit.div_ceil(2);
        let pts: Vec<(f64, f64)> = (lo..=limit)
            .map(|len| (len as f64, max_e[len - 1]))
            .collect();
        let gamma = if pts.iter().any(|&(_, y)| y <= 0.0) {
            0.0
        } else {
            fit_slope(&pts.iter().map(|&(x, y)| (x, y.ln())).collect::<Vec<_>>()).exp()
        };
        (Some(gamma), Some((lo, limit)))
    } else {
        (None, None)
    };
    Ok(ContractionReport {
        l,
        max_e_delta: max_e,
        argmax,
        gamma,
        contracting: gamma.is_some_and(|g| g < 1.0 - CONTRACTION_TOLERANCE),
        fit_range,
        warning,
    })
}

/// Least-squares slope of `y` on `x`.
pub(crate) fn fit_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Default node cap for [`build_saw_tree`].
pub const DEFAULT_TREE_NODE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SawTreeNode {
    /// End vertex of the walk this node represents.
    pub graph_vertex: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub children: Vec<usize>,
}

/// The SAW tree of `G` rooted at `v`, truncated at `depth`. Node 0 is the
/// trivial walk. Only meant for inspection on small graphs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SawTree {
    pub nodes: Vec<SawTreeNode>,
}

impl SawTree {
    pub fn walk(&self, node: usize) -> SawWalk {
        let mut vertices = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            vertices.push(self.nodes[i].graph_vertex);
            cur = self.nodes[i].parent;
        }
        vertices.reverse();
        SawWalk { vertices }
    }

    pub fn nodes_at_depth(&self, depth: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.depth == depth)
            .map(|(i, _)| i)
    }
}

pub fn build_saw_tree(g: &Graph, v: usize, depth: usize, node_cap: usize) -> Result<SawTree> {
    let mut nodes = vec![SawTreeNode {
        graph_vertex: v,
        parent: None,
        depth: 0,
        children: Vec::new(),
    }];
    let mut on_path = vec![false; g.n()];
    on_path[v] = true;
    fn rec(
        g: &Graph,
        node: usize,
        depth: usize,
        cap: usize,
        nodes: &mut Vec<SawTreeNode>,
        on_path: &mut [bool],
    ) -> Result<()> {
        if nodes[node].depth == depth {
            return Ok(());
        }
        let tail = nodes[node].graph_vertex;
        for &w in g.neighbors(tail) {
            if on_path[w] {
                continue;
            }
            if nodes.len() >= cap {
                return Err(Error::Budget(format!("SAW tree exceeds {cap} nodes")));
            }
            let child = nodes.len();
            nodes.push(SawTreeNode {
                graph_vertex: w,
                parent: Some(node),
                depth: nodes[node].depth + 1,
                children: Vec::new(),
            });
            nodes[node].children.push(child);
            on_path[w] = true;
            rec(g, child, depth, cap, nodes, on_path)?;
            on_path[w] = false;
        }
        Ok(())
    }
    rec(g, 0, depth, node_cap, &mut nodes, &mut on_path)?;
    Ok(SawTree { nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Family};
    use crate::model::{Beta, PottsParams};
    use proptest::prelude::*;

    fn walks(g: &Graph, v: usize, l: usize) -> Vec<Vec<usize>> {
        enumerate_saws(g, v, l)
            .into_iter()
            .map(|w| w.vertices)
            .collect()
    }

    #[test]
    fn enumeration_examples() {
        let k3 = generate(Family::Complete(3)).unwrap();
        assert_eq!(walks(&k3, 0, 2), vec![vec![0, 1, 2], vec![0, 2, 1]]);
        let p3 = generate(Family::Path(3)).unwrap();
        assert_eq!(walks(&p3, 0, 2), vec![vec![0, 1, 2]]);
        assert_eq!(walks(&p3, 1, 0), vec![vec![1]]);
    }

    #[test]
    fn counts() {
        let k4 = generate(Family::Complete(4)).unwrap();
        assert_eq!([1, 2, 3].map(|l| saw_count(&k4, 0, l)), [3, 6, 6]);
        let star = generate(Family::Star(5)).unwrap();
        assert_eq!(saw_count(&star, 1, 2), 4);
        let path = generate(Family::Path(9)).unwrap();
        assert!((0..9).all(|v| (0..10).all(|l| saw_count(&path, v, l) <= 2)));
    }

    #[test]
    fn e_delta_examples() {
        let p = PottsParams::new(7, Beta::ZERO).unwrap();
        let p3 = generate(Family::Path(3)).unwrap();
        assert!((e_delta(&p3, 0, 2, &|d| p.delta(d)) - 0.2).abs() < 1e-15);
        assert_eq!(e_delta(&p3, 0, 3, &|d| p.delta(d)), 0.0);
        let star = generate(Family::Star(5)).unwrap();
        assert_eq!(e_delta(&star, 0, 1, &|_| 1.0 / 8.0), 5.0 / 8.0);
    }

    #[test]
    fn contraction_on_path() {
        let p = PottsParams::new(7, Beta::ZERO).unwrap();
        let g = generate(Family::Path(50)).unwrap();
        let r = verify_contraction(&g, 10, &|d| p.delta(d), DEFAULT_WALK_BUDGET).unwrap();
        assert!(r.gamma.unwrap() <= 0.5 + 1e-9);
        assert!(r.contracting);
        assert_eq!(r.l, (1..=10).collect::<Vec<_>>());
    }

    #[test]
    fn caterpillar_does_not_contract() {
        let p = PottsParams::new(5, Beta::ZERO).unwrap();
        let g = generate(Family::Caterpillar {
            spine: 50,
            bristles: 3,
        })
        .unwrap();
        let r = verify_contraction(&g, 10, &|d| p.delta(d), DEFAULT_WALK_BUDGET).unwrap();
        assert!((r.gamma.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.max_e_delta[1..].iter().all(|&e| (e - 6.0).abs() < 1e-12));
        assert!(!r.contracting);
    }

    #[test]
    fn cycle_with_constant_half() {
        let g = generate(Family::Cycle(20)).unwrap();
        let r = verify_contraction(&g, 12, &|_| 0.5, DEFAULT_WALK_BUDGET).unwrap();
        for (i, &e) in r.max_e_delta.iter().enumerate() {
            assert_eq!(e, 2.0 * 0.5f64.powi(i as i32 + 1));
        }
        assert!((r.gamma.unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn tiny_budget_shrinks_range() {
        let g = generate(Family::Complete(7)).unwrap();
        let r = verify_contraction(&g, 6, &|_| 0.5, 2_000).unwrap();
        assert!(r.l.len() < 6);
        assert!(r.warning.is_some());
        let r2 = verify_contraction(&g, 6, &|_| 0.5, 2_000).unwrap();
        assert_eq!(r, r2);
    }

    #[test]
    fn zero_tail_gives_zero_rate() {
        let g = generate(Family::Path(4)).unwrap();
        let r = verify_contraction(&g, 8, &|_| 0.9, DEFAULT_WALK_BUDGET).unwrap();
        assert_eq!(r.gamma, Some(0.0));
        assert!(r.contracting);
    }

    #[test]
    fn saw_tree_matches_enumeration() {
        let g = generate(Family::Complete(4)).unwrap();
        let t = build_saw_tree(&g, 0, 3, DEFAULT_TREE_NODE_CAP).unwrap();
        assert_eq!(t.nodes.len(), 1 + 3 + 6 + 6);
        let deepest: Vec<_> = t.nodes_at_depth(3).map(|i| t.walk(i)).collect();
        assert_eq!(deepest, enumerate_saws(&g, 0, 3));
        assert!(build_saw_tree(&g, 0, 3, 5).is_err());
    }

    fn small_graph() -> impl Strategy<Value = Graph> {
        (
            2usize..9,
            proptest::collection::vec((0usize..9, 0usize..9), 0..20),
        )
            .prop_map(|(n, raw)| {
                let mut e: Vec<_> = raw
                    .into_iter()
                    .filter(|&(a, b)| a < n && b < n && a != b)
                    .map(|(a, b)| (a.min(b), a.max(b)))
                    .collect();
                e.sort_unstable();
                e.dedup();
                Graph::from_edges(n, e).unwrap()
            })
    }

    proptest! {
        #[test]
        fn unit_delta_counts_walks(g in small_graph(), l in 1usize..6) {
            for v in 0..g.n() {
                prop_assert_eq!(e_delta(&g, v, l, &|_| 1.0), saw_count(&g, v, l) as f64);
            }
        }

        #[test]
        fn constant_delta_is_scaled_count(g in small_graph(), l in 1usize..6, k in 0i32..4, big in 1usize..30) {
            // power-of-two Δ: exact in binary floating point
            let inv = 0.5f64.powi(k);
            let v = 0;
            prop_assert_eq!(e_delta(&g, v, l, &|_| inv), saw_count(&g, v, l) as f64 * inv.powi(l as i32));
            let inv = 1.0 / big as f64;
            let lhs = e_delta(&g, v, l, &|_| inv);
            let rhs = saw_count(&g, v, l) as f64 / (big as f64).powi(l as i32);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300));
        }

        #[test]
        fn monotone_in_delta(g in small_graph(), l in 1usize..6, scale in 0.0f64..1.0) {
            let p = PottsParams::new(5, Beta::ZERO).unwrap();
            for v in 0..g.n() {
                let hi = e_delta(&g, v, l, &|d| p.delta(d));
                let lo = e_delta(&g, v, l, &|d| scale * p.delta(d));
                prop_assert!(lo <= hi);
            }
        }

        #[test]
        fn lexicographic_and_distinct(g in small_graph(), l in 0usize..5) {
            let w = enumerate_saws(&g, 0, l);
            prop_assert!(w.windows(2).all(|p| p[0] < p[1]));
            for walk in &w {
                let mut s = walk.vertices.clone();
                s.sort_unstable();
                s.dedup();
                prop_assert_eq!(s.len(), l + 1);
                prop_assert!(walk.vertices.windows(2).all(|e| g.has_edge(e[0], e[1])));
            }
        }
    }
}
