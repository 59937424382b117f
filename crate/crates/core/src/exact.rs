//! Brute-force oracle: partition functions, marginals, block marginals,
//! feasibility and Gibbs tables by exhaustive enumeration of free vertices.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{Color, Instance};

/// Default cap on enumeration work (leaves for `beta > 0`, search nodes for
/// `beta = 0`).
pub const DEFAULT_ORACLE_BUDGET: u64 = 100_000_000;

/// Compensated (Neumaier) sum.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for x in values {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Free vertices in ascending order with, for each, the neighbors that are
/// already fixed when it is assigned (pinned ones or earlier free ones).
struct Plan {
    order: Vec<usize>,
    earlier: Vec<Vec<usize>>,
    base: Vec<Color>,
}

impl Plan {
    fn new(inst: &Instance) -> Plan {
        let order = inst.free_vertices();
        let mut pos = vec![usize::MAX; inst.n()];
        for (i, &v) in order.iter().enumerate() {
            pos[v] = i;
        }
        let earlier = order
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                inst.neighbors(v)
                    .filter(|&w| inst.is_pinned(w) || pos[w] < i)
                    .collect()
            })
            .collect();
        let mut base = vec![0 as Color; inst.n()];
        for (v, c) in inst.pins() {
            base[v] = c;
        }
        Plan {
            order,
            earlier,
            base,
        }
    }

    /// Monochromatic edges among pinned vertices only.
    fn pinned_mono(inst: &Instance) -> usize {
        inst.alive_edges()
            .filter(|&(u, v, _)| inst.pin(u).is_some() && inst.pin(u) == inst.pin(v))
            .count()
    }
}

/// Enumerates every assignment of the free vertices (pruning positive-mono
/// partial assignments when `beta = 0`), calling `leaf(acc, colors, mono)`.
/// The space is split on the first free vertex and branches run in parallel;
/// accumulators are merged in color order.
fn enumerate<A, M, L, J>(inst: &Instance, budget: u64, make: M, leaf: L, merge: J) -> Result<A>
where
    A: Send,
    M: Fn() -> A + Sync,
    L: Fn(&mut A, &[Color], usize) + Sync,
    J: Fn(&mut A, A),
{
    let plan = Plan::new(inst);
    let q = inst.q();
    let zero_beta = inst.params().beta.is_zero();
    let base_mono = Plan::pinned_mono(inst);
    if zero_beta && base_mono > 0 {
        return Ok(make());
    }
    if !zero_beta {
        let leaves = (q as f64).powi(plan.order.len() as i32);
        if leaves > budget as f64 {
            return Err(Error::Budget(format!(
                "exact enumeration needs {q}^{} = {leaves:.3e} evaluations, budget {budget}",
                plan.order.len()
            )));
        }
    }
    if plan.order.is_empty() {
        let mut acc = make();
        leaf(&mut acc, &plan.base, base_mono);
        return Ok(acc);
    }
    let nodes = AtomicU64::new(0);
    let branches: Vec<Result<A>> = (0..q)
        .into_par_iter()
        .map(|c0| {
            let mut colors = plan.base.clone();
            let mut acc = make();
            let mut local = 0u64;
            dfs(
                &plan,
                q,
                zero_beta,
                budget,
                &nodes,
                &mut local,
                0,
                Some(c0 as Color),
                base_mono,
                &mut colors,
                &mut acc,
                &leaf,
            )?;
            flush(&nodes, &mut local, budget)?;
            Ok(acc)
        })
        .collect();
    let mut total = make();
    for b in branches {
        merge(&mut total, b?);
    }
    Ok(total)
}

fn flush(nodes: &AtomicU64, local: &mut u64, budget: u64) -> Result<()> {
    let before = nodes.fetch_add(*local, Ordering::Relaxed);
    *local = 0;
    if before > budget {
        return Err(Error::Budget(format!(
            "exact enumeration exceeded {budget} search nodes"
        )));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn dfs<A, L>(
    plan: &Plan,
    q: usize,
    zero_beta: bool,
    budget: u64,
    nodes: &AtomicU64,
    local: &mut u64,
    i: usize,
    only: Option<Color>,
    mono: usize,
    colors: &mut [Color],
    acc: &mut A,
    leaf: &L,
) -> Result<()>
where
    L: Fn(&mut A, &[Color], usize),
{
    if i == plan.order.len() {
        leaf(acc, colors, mono);
        return Ok(());
    }
    let v = plan.order[i];
    let range = match only {
        Some(c) => c..c + 1,
        None => 0..q as Color,
    };
    for c in range {
        if zero_beta {
            *local += 1;
            if *local >= 1 << 16 {
                flush(nodes, local, budget)?;
            }
        }
        let add = plan.earlier[i].iter().filter(|&&w| colors[w] == c).count();
        if zero_beta && add > 0 {
            continue;
        }
        colors[v] = c;
        dfs(
            plan,
            q,
            zero_beta,
            budget,
            nodes,
            local,
            i + 1,
            None,
            mono + add,
            colors,
            acc,
            leaf,
        )?;
    }
    Ok(())
}

/// Weight histogram: `counts[k]` assignments with `k` monochromatic edges.
fn sum_histogram(inst: &Instance, counts: &[u64]) -> f64 {
    let beta = inst.params().beta.value();
    neumaier_sum(counts.iter().enumerate().map(|(k, &c)| {
        if c == 0 {
            0.0
        } else {
            c as f64 * beta.powi(k as i32)
        }
    }))
}

fn add_into(a: &mut Vec<u64>, b: Vec<u64>) {
    if a.len() < b.len() {
        a.resize(b.len(), 0);
    }
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

fn bump(h: &mut Vec<u64>, k: usize) {
    if h.len() <= k {
        h.resize(k + 1, 0);
    }
    h[k] += 1;
}

pub fn exact_partition_with_budget(inst: &Instance, budget: u64) -> Result<f64> {
    let hist = enumerate(
        inst,
        budget,
        Vec::new,
        |h: &mut Vec<u64>, _, mono| bump(h, mono),
        add_into,
    )?;
    Ok(sum_histogram(inst, &hist))
}

/// `Z(Ω)`, summed over assignments of the free vertices.
pub fn exact_partition(inst: &Instance) -> Result<f64> {
    exact_partition_with_budget(inst, DEFAULT_ORACLE_BUDGET)
}

/// `Pr[c(v) = x]` for every `x`. A pinned `v` gives its indicator vector.
pub fn exact_marginals(inst: &Instance, v: usize) -> Result<Vec<f64>> {
    Ok(exact_all_marginals_for(inst, &[v], DEFAULT_ORACLE_BUDGET)?.remove(0))
}

pub fn exact_marginal(inst: &Instance, v: usize, x: Color) -> Result<f64> {
    Ok(exact_marginals(inst, v)?[x as usize])
}

/// Marginal vectors of every vertex, one enumeration pass.
pub fn exact_all_marginals(inst: &Instance) -> Result<Vec<Vec<f64>>> {
    let all: Vec<usize> = (0..inst.n()).collect();
    exact_all_marginals_for(inst, &all, DEFAULT_ORACLE_BUDGET)
}

pub fn exact_all_marginals_for(
    inst: &Instance,
    vertices: &[usize],
    budget: u64,
) -> Result<Vec<Vec<f64>>> {
    let q = inst.q();
    type Acc = (Vec<u64>, Vec<Vec<Vec<u64>>>);
    let make = || -> Acc { (Vec::new(), vec![vec![Vec::new(); q]; vertices.len()]) };
    let (total, per) = enumerate(
        inst,
        budget,
        make,
        |acc: &mut Acc, colors, mono| {
            bump(&mut acc.0, mono);
            for (i, &v) in vertices.iter().enumerate() {
                bump(&mut acc.1[i][colors[v] as usize], mono);
            }
        },
        |a: &mut Acc, b: Acc| {
            add_into(&mut a.0, b.0);
            for (x, y) in a.1.iter_mut().zip(b.1) {
                for (xc, yc) in x.iter_mut().zip(y) {
                    add_into(xc, yc);
                }
            }
        },
    )?;
    let z = sum_histogram(inst, &total);
    if z <= 0.0 {
        return Err(Error::Infeasible(
            "instance has no configuration of positive weight".into(),
        ));
    }
    Ok(vertices
        .iter()
        .zip(per)
        .map(|(&v, hists)| match inst.pin(v) {
            Some(c) => (0..q)
                .map(|x| if x == c as usize { 1.0 } else { 0.0 })
                .collect(),
            None => hists.iter().map(|h| sum_histogram(inst, h) / z).collect(),
        })
        .collect())
}

/// `Pr[c(B) = π]` for `π` given as colors aligned with `vertices`.
pub fn exact_block_marginal(inst: &Instance, vertices: &[usize], pi: &[Color]) -> Result<f64> {
    let z = exact_partition(inst)?;
    if z <= 0.0 {
        return Err(Error::Infeasible(
            "instance has no configuration of positive weight".into(),
        ));
    }
    let pins: Vec<(usize, Color)> = vertices.iter().copied().zip(pi.iter().copied()).collect();
    let Ok(pinned) = inst.with_pins(&pins) else {
        return Ok(0.0);
    };
    Ok(exact_partition(&pinned)? / z)
}

/// The joint law of `c(vertices)`, as a map from positive-probability
/// projections to probabilities. One enumeration pass.
pub fn exact_block_distribution(
    inst: &Instance,
    vertices: &[usize],
) -> Result<HashMap<Vec<Color>, f64>> {
    type Acc = HashMap<Vec<Color>, Vec<u64>>;
    let hists = enumerate(
        inst,
        DEFAULT_ORACLE_BUDGET,
        Acc::new,
        |acc: &mut Acc, colors, mono| {
            let key: Vec<Color> = vertices.iter().map(|&v| colors[v]).collect();
            bump(acc.entry(key).or_default(), mono);
        },
        |a: &mut Acc, b: Acc| {
            for (k, h) in b {
                add_into(a.entry(k).or_default(), h);
            }
        },
    )?;
    let weights: Vec<(Vec<Color>, f64)> = hists
        .into_iter()
        .map(|(k, h)| (k, sum_histogram(inst, &h)))
        .collect();
    let z = neumaier_sum(weights.iter().map(|w| w.1));
    if z <= 0.0 {
        return Err(Error::Infeasible(
            "instance has no configuration of positive weight".into(),
        ));
    }
    Ok(weights
        .into_iter()
        .filter(|w| w.1 > 0.0)
        .map(|(k, w)| (k, w / z))
        .collect())
}

/// Whether some configuration has positive weight.
pub fn is_feasible(inst: &Instance) -> Result<bool> {
    if !inst.params().beta.is_zero() {
        return Ok(true);
    }
    let plan = Plan::new(inst);
    if Plan::pinned_mono(inst) > 0 {
        return Ok(false);
    }
    // first-solution search, sequential
    fn rec(
        plan: &Plan,
        q: usize,
        i: usize,
        colors: &mut [Color],
        nodes: &mut u64,
        budget: u64,
    ) -> Result<bool> {
        if i == plan.order.len() {
            return Ok(true);
        }
        let v = plan.order[i];
        for c in 0..q as Color {
            *nodes += 1;
            if *nodes > budget {
                return Err(Error::Budget(format!(
                    "feasibility search exceeded {budget} nodes"
                )));
            }
            if plan.earlier[i].iter().any(|&w| colors[w] == c) {
                continue;
            }
            colors[v] = c;
            if rec(plan, q, i + 1, colors, nodes, budget)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
    let mut colors = plan.base.clone();
    rec(
        &plan,
        inst.q(),
        0,
        &mut colors,
        &mut 0,
        DEFAULT_ORACLE_BUDGET,
    )
}

/// All positive-weight configurations of the full vertex set with weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsTable {
    pub entries: Vec<(Vec<Color>, f64)>,
    pub total: f64,
}

impl GibbsTable {
    pub fn probability(&self, colors: &[Color]) -> f64 {
        match self
            .entries
            .binary_search_by(|(c, _)| c.as_slice().cmp(colors))
        {
            Ok(i) => self.entries[i].1 / self.total,
            Err(_) => 0.0,
        }
    }
}

/// Entries are sorted lexicographically by configuration.
pub fn gibbs_table(inst: &Instance) -> Result<GibbsTable> {
    let beta = inst.params().beta.value();
    let mut entries = enumerate(
        inst,
        DEFAULT_ORACLE_BUDGET,
        Vec::new,
        |acc: &mut Vec<(Vec<Color>, f64)>, colors, mono| {
            let w = if mono == 0 {
                1.0
            } else {
                beta.powi(mono as i32)
            };
            if w > 0.0 {
                acc.push((colors.to_vec(), w));
            }
        },
        |a, b| a.extend(b),
    )?;
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let total = neumaier_sum(entries.iter().map(|e| e.1));
    Ok(GibbsTable { entries, total })
}
