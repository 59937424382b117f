//! Instance corpora shared by the acceptance checks.

use std::collections::HashSet;

use potts_core::exact::is_feasible;
use potts_core::{Beta, Color, Graph, Instance, PottsParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const BETAS: [(u64, u64); 4] = [(0, 1), (1, 4), (1, 2), (9, 10)];

pub fn params(q: usize, num: u64, den: u64) -> PottsParams {
    PottsParams::new(q, Beta::new(num, den).unwrap()).unwrap()
}

/// One corpus entry with the free vertex the checks focus on.
pub struct Case {
    pub inst: Instance,
    pub focus: usize,
}

/// A random instance on `3..=9` vertices with about two edges per vertex,
/// each vertex pinned with probability 0.2. `None` when the draw has no free
/// vertex or no positive-weight configuration.
pub fn random_instance(rng: &mut ChaCha8Rng, p: PottsParams) -> Option<Instance> {
    let n = rng.random_range(3..=9usize);
    let target = rng.random_range(n - 1..=n + 2);
    let mut edges = HashSet::new();
    let mut tries = 0;
    while edges.len() < target && tries < 200 {
        tries += 1;
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let g = Graph::from_edges(n, edges).unwrap();
    let mut pins: Vec<(usize, Color)> = Vec::new();
    for v in 0..n {
        if rng.random_bool(0.2) {
            pins.push((v, rng.random_range(0..p.q) as Color));
        }
    }
    let inst = Instance::new(g, p, &pins).unwrap();
    (!inst.free_vertices().is_empty() && is_feasible(&inst).unwrap()).then_some(inst)
}

/// Same as [`random_instance`] but keyed by a seed, redrawing until valid.
pub fn seeded_instance(seed: u64, p: PottsParams) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        if let Some(inst) = random_instance(&mut rng, p) {
            return inst;
        }
    }
}

/// `count` random instances with `q` and `beta` cycling over
/// `{3,4,5} × {0, 1/4, 1/2, 9/10}`, each with a random free focus vertex.
pub fn corpus(count: usize, seed: u64) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let k = out.len();
        let (num, den) = BETAS[(k / 3) % 4];
        let Some(inst) = random_instance(&mut rng, params([3, 4, 5][k % 3], num, den)) else {
            continue;
        };
        let free = inst.free_vertices();
        let focus = free[rng.random_range(0..free.len())];
        out.push(Case { inst, focus });
    }
    out
}

/// Spine `0..spine` with every bristle set pinned to colors `0, 1, 2`.
pub fn pinned_caterpillar(spine: usize, q: usize, far_end: Option<Color>) -> Instance {
    let g = potts_core::graph::generate(potts_core::Family::Caterpillar { spine, bristles: 3 })
        .unwrap();
    let mut pins: Vec<(usize, Color)> = (0..spine)
        .flat_map(|i| (0..3).map(move |j| (spine + 3 * i + j, j as Color)))
        .collect();
    if let Some(c) = far_end {
        pins.push((spine - 1, c));
    }
    Instance::new(g, params(q, 0, 1), &pins).unwrap()
}
