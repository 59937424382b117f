//! Immutable simple graphs, deterministic generators and the instance file
//! format.

use std::collections::VecDeque;
use std::fmt::Write as _;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::model::Color;

/// Simple undirected graph on vertices `0..n`.
///
/// Adjacency lists are sorted ascending and edges are stored once as `(u, v)`
/// with `u < v`, sorted lexicographically. Every downstream enumeration walks
/// these lists in order, which is what makes results reproducible bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    // edge id of each adjacency entry, parallel to `adj`
    adj_edge: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, parallel edges and out-of-range
    /// endpoints.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canon = Vec::new();
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(invalid(format!("edge ({a}, {b}) out of range for n = {n}")));
            }
            if a == b {
                return Err(invalid(format!("self-loop at vertex {a}")));
            }
            canon.push((a.min(b), a.max(b)));
        }
        canon.sort_unstable();
        if let Some(w) = canon.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self::from_canonical(n, canon))
    }

    fn from_canonical(n: usize, edges: Vec<(usize, usize)>) -> Graph {
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (id, &(u, v)) in edges.iter().enumerate() {
            adj[u].push((v, id));
            adj[v].push((u, id));
        }
        let mut nbrs = Vec::with_capacity(n);
        let mut ids = Vec::with_capacity(n);
        for mut list in adj {
            list.sort_unstable();
            nbrs.push(list.iter().map(|&(w, _)| w).collect());
            ids.push(list.iter().map(|&(_, e)| e).collect());
        }
        Graph {
            n,
            adj: nbrs,
            adj_edge: ids,
            edges,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> (usize, usize) {
        self.edges[id]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    /// Edge ids incident to `v`, aligned with [`Graph::neighbors`].
    pub fn incident_edges(&self, v: usize) -> &[usize] {
        &self.adj_edge[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adj.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edge_id(&self, u: usize, v: usize) -> Option<usize> {
        let pos = self.adj[u].binary_search(&v).ok()?;
        Some(self.adj_edge[u][pos])
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// BFS distance from `v` to the nearest vertex of `targets`; `None` when
    /// no target is reachable.
    pub fn dist(&self, v: usize, targets: &[usize]) -> Option<usize> {
        let mut is_target = vec![false; self.n];
        for &t in targets {
            is_target[t] = true;
        }
        if is_target[v] {
            return Some(0);
        }
        let mut seen = vec![false; self.n];
        seen[v] = true;
        let mut queue = VecDeque::from([(v, 0usize)]);
        while let Some((u, d)) = queue.pop_front() {
            for &w in &self.adj[u] {
                if seen[w] {
                    continue;
                }
                if is_target[w] {
                    return Some(d + 1);
                }
                seen[w] = true;
                queue.push_back((w, d + 1));
            }
        }
        None
    }

    /// Relabels vertices: vertex `v` becomes `perm[v]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(invalid("permutation length differs from vertex count"));
        }
        Graph::from_edges(self.n, self.edges.iter().map(|&(u, v)| (perm[u], perm[v])))
    }
}

/// Graph families with deterministic constructions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    Path(usize),
    Cycle(usize),
    Complete(usize),
    /// Center `0` joined to leaves `1..=k`.
    Star(usize),
    /// Spine `0..spine`, then `bristles` pendant leaves per spine vertex:
    /// leaf `j` of spine vertex `i` is `spine + i * bristles + j`.
    Caterpillar {
        spine: usize,
        bristles: usize,
    },
    /// Erdős–Rényi `G(n, d/n)`.
    Gnp {
        n: usize,
        d: f64,
        seed: u64,
    },
}

pub fn generate(family: Family) -> Result<Graph> {
    match family {
        Family::Path(n) => {
            require(n >= 1, "path needs n >= 1")?;
            Graph::from_edges(n, (1..n).map(|i| (i - 1, i)))
        }
        Family::Cycle(n) => {
            require(n >= 3, "cycle needs n >= 3")?;
            Graph::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
        }
        Family::Complete(n) => {
            require(n >= 1, "complete graph needs n >= 1")?;
            Graph::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
        }
        Family::Star(k) => Graph::from_edges(k + 1, (1..=k).map(|leaf| (0, leaf))),
        Family::Caterpillar { spine, bristles } => {
            require(
                spine >= 1,
                "caterpillar needs a spine of at least one vertex",
            )?;
            let spine_edges = (1..spine).map(|i| (i - 1, i));
            let bristle_edges =
                (0..spine).flat_map(|i| (0..bristles).map(move |j| (i, spine + i * bristles + j)));
            Graph::from_edges(spine * (bristles + 1), spine_edges.chain(bristle_edges))
        }
        Family::Gnp { n, d, seed } => gnp(n, d, seed),
    }
}

fn require(cond: bool, msg: &str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(invalid(msg))
    }
}

/// Pair `k` (lexicographic index of `(u, v)`, `u < v`) is kept when the
/// `k`-th 64-bit word of the ChaCha8 stream keyed by `seed`, read as a
/// uniform in `[0, 1)`, falls below `d / n`. The decision for a pair depends
/// only on `(seed, k)`.
fn gnp(n: usize, d: f64, seed: u64) -> Result<Graph> {
    require(n >= 1, "gnp needs n >= 1")?;
    require(d > 0.0 && d < n as f64, "gnp needs 0 < d < n")?;
    let p = d / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let word = rng.next_u64();
            let uniform = (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            if uniform < p {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::from_canonical(n, edges))
}

/// Parsed instance file. Pin colors are 0-based here; the file is 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub graph: Graph,
    pub pins: Vec<(usize, Color)>,
}

/// Parses the line-oriented instance format:
///
/// ```text
/// # comment
/// graph <n>
/// edge <u> <v>
/// pin <v> <color>   # color in 1..=q
/// ```
///
/// When `q` is given, pin colors above `q` are rejected here with the line
/// number; otherwise only `color >= 1` is checked.
pub fn parse_instance(text: &str, q: Option<usize>) -> Result<InstanceFile> {
    let mut n: Option<usize> = None;
    let mut edges: Vec<(usize, usize)> = Vec::new();
    let mut edge_lines: Vec<usize> = Vec::new();
    let mut pins: Vec<(usize, Color)> = Vec::new();
    let mut pin_line = std::collections::BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let mut parts = line.split_whitespace();
        let keyword = parts.next().unwrap_or_default();
        let args: Vec<&str> = parts.collect();
        let num = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| err(format!("expected a non-negative integer, found {s:?}")))
        };
        match (keyword, n) {
            ("graph", None) => {
                if args.len() != 1 {
                    return Err(err("usage: graph <n>".into()));
                }
                n = Some(num(args[0])?);
            }
            ("graph", Some(_)) => return Err(err("duplicate graph directive".into())),
            (_, None) => return Err(err("first directive must be graph <n>".into())),
            ("edge", Some(n)) => {
                if args.len() != 2 {
                    return Err(err("usage: edge <u> <v>".into()));
                }
                let (u, v) = (num(args[0])?, num(args[1])?);
                if u >= n || v >= n {
                    return Err(err(format!("vertex id out of range (n = {n})")));
                }
                if u == v {
                    return Err(err("self-loop".into()));
                }
                edges.push((u.min(v), u.max(v)));
                edge_lines.push(line_no);
            }
            ("pin", Some(n)) => {
                if args.len() != 2 {
                    return Err(err("usage: pin <v> <color>".into()));
                }
                let (v, c) = (num(args[0])?, num(args[1])?);
                if v >= n {
                    return Err(err(format!("vertex id out of range (n = {n})")));
                }
                if c == 0 || q.is_some_and(|q| c > q) || c > Color::MAX as usize {
                    return Err(err(format!("pin color {c} out of range")));
                }
                if pin_line.insert(v, line_no).is_some() {
                    return Err(err(format!("vertex {v} pinned twice")));
                }
                pins.push((v, (c - 1) as Color));
            }
            (other, Some(_)) => return Err(err(format!("unknown directive {other:?}"))),
        }
    }

    let n = n.ok_or(Error::Parse {
        line: text.lines().count().max(1),
        msg: "missing graph directive".into(),
    })?;
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.sort_by_key(|&i| (edges[i], edge_lines[i]));
    for w in order.windows(2) {
        if edges[w[0]] == edges[w[1]] {
            return Err(Error::Parse {
                line: edge_lines[w[1]],
                msg: "duplicate edge".into(),
            });
        }
    }
    pins.sort_unstable();
    let graph = Graph::from_edges(n, edges)?;
    Ok(InstanceFile { graph, pins })
}

/// Writes the instance format read by [`parse_instance`].
pub fn write_instance(graph: &Graph, pins: &[(usize, Color)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "graph {}", graph.n());
    for &(u, v) in graph.edges() {
        let _ = writeln!(out, "edge {u} {v}");
    }
    for &(v, c) in pins {
        let _ = writeln!(out, "pin {v} {}", c as usize + 1);
    }
    out
}
