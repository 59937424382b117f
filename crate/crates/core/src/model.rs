//! Model parameters, conditioned instances, configuration weights and the
//! closed-form degree functions (low-degree test, contraction function,
//! marginal bounds).

use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::graph::Graph;

/// A color, 0-based. All text I/O is 1-based.
pub type Color = u16;

/// Edge activity `num / den` in `[0, 1)`, kept exact so degree thresholds
/// are decided without rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Beta {
    num: u64,
    den: u64,
}

impl Beta {
    pub const ZERO: Beta = Beta { num: 0, den: 1 };

    pub fn new(num: u64, den: u64) -> Result<Beta> {
        if den == 0 || num >= den {
            return Err(invalid(format!("beta must lie in [0, 1), got {num}/{den}")));
        }
        let g = gcd(num, den);
        Ok(Beta {
            num: num / g,
            den: den / g,
        })
    }

    /// Parses a decimal such as `0`, `0.25` or `.9` with at most nine
    /// fractional digits.
    pub fn parse(text: &str) -> Result<Beta> {
        let t = text.trim();
        let (int, frac) = t.split_once('.').unwrap_or((t, ""));
        let digits_ok = |s: &str| s.bytes().all(|b| b.is_ascii_digit());
        if (int.is_empty() && frac.is_empty()) || !digits_ok(int) || !digits_ok(frac) {
            return Err(invalid(format!("beta {text:?} is not a decimal number")));
        }
        if frac.len() > 9 {
            return Err(invalid(format!(
                "beta {text:?} has more than 9 fractional digits"
            )));
        }
        let int_val: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| invalid("beta too large"))?
        };
        if int_val >= 1 {
            return Err(invalid(format!("beta must lie in [0, 1), got {text}")));
        }
        let den = 10u64.pow(frac.len() as u32);
        let num: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().unwrap()
        };
        Beta::new(num, den)
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn den(self) -> u64 {
        self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }
}

impl fmt::Display for Beta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PottsParams {
    pub q: usize,
    pub beta: Beta,
}

impl PottsParams {
    pub fn new(q: usize, beta: Beta) -> Result<PottsParams> {
        if q < 2 {
            return Err(invalid(format!("q must be at least 2, got {q}")));
        }
        if q > Color::MAX as usize {
            return Err(invalid(format!(
                "q = {q} exceeds the supported color range"
            )));
        }
        Ok(PottsParams { q, beta })
    }

    /// The algorithms need `q >= 3`; `q = 2` is only for the exact oracle.
    pub fn require_algorithmic(&self) -> Result<()> {
        if self.q < 3 {
            return Err(invalid("the approximation algorithms require q >= 3"));
        }
        Ok(())
    }

    /// `1 - beta`.
    pub fn lambda(&self) -> f64 {
        (self.beta.den - self.beta.num) as f64 / self.beta.den as f64
    }

    /// `d < (q-1)/(1-beta) - 2`, decided exactly.
    pub fn is_low_degree(&self, d: usize) -> bool {
        let (num, den) = (self.beta.num as u128, self.beta.den as u128);
        (d as u128 + 2) * (den - num) < (self.q as u128 - 1) * den
    }

    /// Contraction function: `2(1-beta) / (q-1-(1-beta)d)` when
    /// `d <= (q-1)/(1-beta) - 2`, else `1`.
    pub fn delta(&self, d: usize) -> f64 {
        let (num, den) = (self.beta.num as u128, self.beta.den as u128);
        let lam = den - num;
        let d = d as u128;
        let top = (self.q as u128 - 1) * den;
        if (d + 2) * lam <= top {
            (2 * lam) as f64 / (top - lam * d) as f64
        } else {
            1.0
        }
    }

    /// `1 / (q - (1-beta)d)`; `+inf` when the denominator is not positive.
    pub fn marginal_upper_bound(&self, d: usize) -> f64 {
        let (num, den) = (self.beta.num as i128, self.beta.den as i128);
        let denom = self.q as i128 * den - (den - num) * d as i128;
        if denom <= 0 {
            f64::INFINITY
        } else {
            den as f64 / denom as f64
        }
    }

    /// `1 / max(1, q - (1-beta)d)`, the clamp applied to every estimate.
    pub fn clamp_bound(&self, d: usize) -> f64 {
        self.marginal_upper_bound(d).min(1.0)
    }

    /// `beta^d / q`.
    pub fn marginal_lower_bound(&self, d: usize) -> f64 {
        if d == 0 {
            return 1.0 / self.q as f64;
        }
        self.beta.value().powi(d as i32) / self.q as f64
    }
}

/// Vertex colors over an explicit support, parallel vectors.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Configuration {
    pub support: Vec<usize>,
    pub colors: Vec<Color>,
}

impl Configuration {
    pub fn new(support: Vec<usize>, colors: Vec<Color>) -> Configuration {
        assert_eq!(support.len(), colors.len());
        Configuration { support, colors }
    }

    /// A configuration of every vertex `0..colors.len()`.
    pub fn full(colors: Vec<Color>) -> Configuration {
        Configuration {
            support: (0..colors.len()).collect(),
            colors,
        }
    }

    pub fn get(&self, v: usize) -> Option<Color> {
        self.support
            .iter()
            .position(|&u| u == v)
            .map(|i| self.colors[i])
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, Color)> + '_ {
        self.support
            .iter()
            .copied()
            .zip(self.colors.iter().copied())
    }
}

/// A conditioned Potts instance: a shared graph, parameters, a pinning, and
/// the edges and vertices deleted by the recursion.
///
/// Sub-instances share the underlying [`Graph`]; only the pin and liveness
/// vectors are copied.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    graph: Arc<Graph>,
    params: PottsParams,
    pins: Vec<Option<Color>>,
    edge_alive: Vec<bool>,
    vertex_alive: Vec<bool>,
}

impl Instance {
    pub fn new(
        graph: impl Into<Arc<Graph>>,
        params: PottsParams,
        pins: &[(usize, Color)],
    ) -> Result<Instance> {
        let graph = graph.into();
        let mut inst = Instance {
            pins: vec![None; graph.n()],
            edge_alive: vec![true; graph.num_edges()],
            vertex_alive: vec![true; graph.n()],
            graph,
            params,
        };
        for &(v, c) in pins {
            if v >= inst.n() {
                return Err(invalid(format!("pinned vertex {v} out of range")));
            }
            if c as usize >= params.q {
                return Err(invalid(format!(
                    "pin color {} out of range for q = {}",
                    c as usize + 1,
                    params.q
                )));
            }
            if inst.pins[v].replace(c).is_some() {
                return Err(invalid(format!("vertex {v} pinned twice")));
            }
        }
        Ok(inst)
    }

    pub fn unpinned(graph: impl Into<Arc<Graph>>, params: PottsParams) -> Instance {
        Instance::new(graph, params, &[]).expect("no pins to validate")
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shared_graph(&self) -> Arc<Graph> {
        Arc::clone(&self.graph)
    }

    pub fn params(&self) -> PottsParams {
        self.params
    }

    pub fn q(&self) -> usize {
        self.params.q
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn pin(&self, v: usize) -> Option<Color> {
        self.pins[v]
    }

    pub fn is_pinned(&self, v: usize) -> bool {
        self.pins[v].is_some()
    }

    /// Pinned vertices with their colors, ascending by vertex.
    pub fn pins(&self) -> Vec<(usize, Color)> {
        self.pins
            .iter()
            .enumerate()
            .filter_map(|(v, c)| c.map(|c| (v, c)))
            .collect()
    }

    pub fn pin_slice(&self) -> &[Option<Color>] {
        &self.pins
    }

    pub fn is_active(&self, v: usize) -> bool {
        self.vertex_alive[v]
    }

    pub fn is_edge_alive(&self, e: usize) -> bool {
        self.edge_alive[e]
    }

    /// Neighbors of `v` through present edges, ascending.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbor_edges(v).map(|(w, _)| w)
    }

    /// `(neighbor, edge id)` pairs through present edges, ascending.
    pub fn neighbor_edges(&self, v: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.graph
            .neighbors(v)
            .iter()
            .zip(self.graph.incident_edges(v))
            .filter(|&(_, &e)| self.edge_alive[e])
            .map(|(&w, &e)| (w, e))
    }

    /// Degree in the current instance graph (edges to pinned vertices count).
    pub fn degree(&self, v: usize) -> usize {
        self.neighbor_edges(v).count()
    }

    /// Present edges `(u, v, id)` in canonical order.
    pub fn alive_edges(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.graph
            .edges()
            .iter()
            .enumerate()
            .filter(|&(e, _)| self.edge_alive[e])
            .map(|(e, &(u, v))| (u, v, e))
    }

    /// Present, unpinned vertices, ascending.
    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&v| self.vertex_alive[v] && self.pins[v].is_none())
            .collect()
    }

    /// Pins `v` to `c`. Re-pinning to a different color is an error.
    pub fn set_pin(&mut self, v: usize, c: Color) -> Result<()> {
        if c as usize >= self.params.q {
            return Err(invalid(format!(
                "pin color {} out of range",
                c as usize + 1
            )));
        }
        match self.pins[v] {
            Some(old) if old != c => Err(invalid(format!(
                "vertex {v} already pinned to a different color"
            ))),
            _ => {
                self.pins[v] = Some(c);
                Ok(())
            }
        }
    }

    pub fn remove_edge(&mut self, e: usize) {
        self.edge_alive[e] = false;
    }

    /// Deletes `v` together with its incident edges.
    pub fn remove_vertex(&mut self, v: usize) {
        self.vertex_alive[v] = false;
        self.pins[v] = None;
        for &e in self.graph.incident_edges(v) {
            self.edge_alive[e] = false;
        }
    }

    /// Copy with additional pins.
    pub fn with_pins(&self, pins: &[(usize, Color)]) -> Result<Instance> {
        let mut out = self.clone();
        for &(v, c) in pins {
            out.set_pin(v, c)?;
        }
        Ok(out)
    }

    /// Number of monochromatic present edges under a full assignment.
    pub fn monochromatic_edges(&self, colors: &[Color]) -> usize {
        self.alive_edges()
            .filter(|&(u, v, _)| colors[u] == colors[v])
            .count()
    }

    pub fn agrees_with_pins(&self, colors: &[Color]) -> bool {
        self.pins
            .iter()
            .zip(colors)
            .all(|(p, &c)| p.is_none_or(|p| p == c))
    }
}

/// `beta^{#monochromatic edges}` if `colors` agrees with the pinning, else 0.
/// `colors` assigns every vertex (entries of deleted vertices are ignored).
pub fn weight(inst: &Instance, colors: &[Color]) -> f64 {
    if !inst.agrees_with_pins(colors) {
        return 0.0;
    }
    let mono = inst.monochromatic_edges(colors);
    if mono == 0 {
        1.0
    } else {
        inst.params().beta.value().powi(mono as i32)
    }
}

/// Natural log of [`weight`]; `-inf` for zero weight.
pub fn log_weight(inst: &Instance, colors: &[Color]) -> f64 {
    if !inst.agrees_with_pins(colors) {
        return f64::NEG_INFINITY;
    }
    let mono = inst.monochromatic_edges(colors);
    if mono == 0 {
        0.0
    } else {
        mono as f64 * inst.params().beta.value().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Family};
    use proptest::prelude::*;

    fn params(q: usize, beta: &str) -> PottsParams {
        PottsParams::new(q, Beta::parse(beta).unwrap()).unwrap()
    }

    #[test]
    fn beta_parsing() {
        assert_eq!(Beta::parse("0.25").unwrap(), Beta::new(1, 4).unwrap());
        assert_eq!(Beta::parse(".5").unwrap(), Beta::new(1, 2).unwrap());
        assert_eq!(Beta::parse("0").unwrap(), Beta::ZERO);
        assert_eq!(
            Beta::parse("0.000000001").unwrap(),
            Beta::new(1, 1_000_000_000).unwrap()
        );
        for bad in ["1", "1.0", "0.1234567891", "-0.5", "abc", ".", ""] {
            assert!(Beta::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn weights_of_single_edge() {
        let g = Graph::from_edges(2, [(0, 1)]).unwrap();
        let inst = Instance::unpinned(g, params(2, "0.5"));
        assert_eq!(weight(&inst, &[0, 0]), 0.5);
        assert_eq!(weight(&inst, &[0, 1]), 1.0);
    }

    #[test]
    fn weight_respects_pins() {
        let inst = Instance::new(
            generate(Family::Path(3)).unwrap(),
            params(3, "0"),
            &[(0, 0)],
        )
        .unwrap();
        assert_eq!(weight(&inst, &[1, 0, 1]), 0.0);
        assert_eq!(weight(&inst, &[0, 1, 0]), 1.0);
        assert_eq!(weight(&inst, &[0, 0, 1]), 0.0);
    }

    #[test]
    fn low_degree_threshold() {
        let p = params(7, "0");
        assert!(p.is_low_degree(3));
        assert!(!p.is_low_degree(4));
        assert!(params(4, "0").is_low_degree(0));
        // (q-1)/(1-beta) - 2 = 4/0.5 - 2 = 6 exactly
        let p = params(5, "0.5");
        assert!(p.is_low_degree(5));
        assert!(!p.is_low_degree(6));
    }

    #[test]
    fn delta_values() {
        let p = params(7, "0");
        assert_eq!(p.delta(2), 0.5);
        assert_eq!(p.delta(4), 1.0);
        assert_eq!(p.delta(100), 1.0);
        assert_eq!(p.delta(1), 0.4);
    }

    #[test]
    fn bound_values() {
        assert_eq!(params(7, "0").marginal_upper_bound(3), 0.25);
        assert_eq!(params(3, "0.5").marginal_upper_bound(2), 0.5);
        assert_eq!(params(5, "0.3").marginal_upper_bound(0), 0.2);
        assert!((params(3, "0.5").marginal_lower_bound(2) - 1.0 / 12.0).abs() < 1e-15);
        assert_eq!(params(6, "0.7").marginal_lower_bound(0), 1.0 / 6.0);
        assert_eq!(params(3, "0").marginal_lower_bound(1), 0.0);
        assert_eq!(params(3, "0").marginal_upper_bound(5), f64::INFINITY);
        assert_eq!(params(3, "0").clamp_bound(5), 1.0);
    }

    #[test]
    fn q_validation() {
        assert!(PottsParams::new(1, Beta::ZERO).is_err());
        assert!(PottsParams::new(2, Beta::ZERO)
            .unwrap()
            .require_algorithmic()
            .is_err());
    }

    #[test]
    fn removal_updates_degrees() {
        let mut inst = Instance::unpinned(generate(Family::Star(3)).unwrap(), params(3, "0"));
        assert_eq!(inst.degree(0), 3);
        inst.remove_edge(inst.graph().edge_id(0, 2).unwrap());
        assert_eq!(inst.degree(0), 2);
        assert_eq!(inst.neighbors(0).collect::<Vec<_>>(), vec![1, 3]);
        inst.remove_vertex(1);
        assert_eq!(inst.degree(0), 1);
        assert_eq!(inst.free_vertices(), vec![0, 2, 3]);
    }

    fn any_params() -> impl Strategy<Value = PottsParams> {
        (2usize..40, 0u64..1000)
            .prop_map(|(q, b)| PottsParams::new(q, Beta::new(b, 1000).unwrap()).unwrap())
    }

    proptest! {
        #[test]
        fn delta_monotone_and_bounded_below(p in any_params(), d in 0usize..200) {
            prop_assert!(p.delta(d) <= p.delta(d + 1));
            prop_assert!(p.delta(d) >= p.delta(0) - 1e-15);
            prop_assert!(p.delta(d) > 0.0 && p.delta(d) <= 1.0);
            let d0 = 2.0 * p.lambda() / (p.q as f64 - 1.0);
            prop_assert!((p.delta(0) - d0.min(1.0)).abs() < 1e-12);
        }

        #[test]
        fn low_degree_matches_first_branch(p in any_params(), d in 0usize..200) {
            if p.is_low_degree(d) {
                prop_assert!(p.delta(d) < 1.0);
            } else {
                prop_assert!(p.delta(d + 1) == 1.0);
            }
        }
    }
}
