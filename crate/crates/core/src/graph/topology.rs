//! Structural graph families and a modularity score.

use rand::seq::IndexedRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Adjacency;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Complete,
    Ring,
    Grid,
    SmallWorld,
    ScaleFree,
    ErSparse,
    Star,
    Modular,
    Tree,
}

impl Topology {
    pub const ALL: [Topology; 9] = [
        Topology::Complete,
        Topology::Ring,
        Topology::Grid,
        Topology::SmallWorld,
        Topology::ScaleFree,
        Topology::ErSparse,
        Topology::Star,
        Topology::Modular,
        Topology::Tree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Topology::Complete => "complete",
            Topology::Ring => "ring",
            Topology::Grid => "grid",
            Topology::SmallWorld => "small_world",
            Topology::ScaleFree => "scale_free",
            Topology::ErSparse => "er_sparse",
            Topology::Star => "star",
            Topology::Modular => "modular",
            Topology::Tree => "tree",
        }
    }

    pub fn build<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Result<Adjacency> {
        if n < 2 {
            return Err(Error::param("n", "topologies need at least 2 nodes"));
        }
        match self {
            Topology::Complete => Ok(Adjacency::complete(n)),
            Topology::Ring => ring(n, 1),
            Topology::Grid => grid(n),
            Topology::SmallWorld => small_world(n, 2, 0.1, rng),
            Topology::ScaleFree => scale_free(n, 2, rng),
            Topology::ErSparse => erdos_renyi(n, 3.0 / (n as f64 - 1.0), rng),
            Topology::Star => Adjacency::from_edges(n, (1..n).map(|j| (0, j))),
            Topology::Modular => modular(n, 4, 0.8, 0.05, rng),
            Topology::Tree => Adjacency::from_edges(n, (1..n).map(|j| (rng.random_range(0..j), j))),
        }
    }
}

/// Ring lattice where each node links to `k` neighbours on each side.
pub fn ring(n: usize, k: usize) -> Result<Adjacency> {
    Adjacency::from_edges(n, (0..n).flat_map(|i| (1..=k).map(move |d| (i, (i + d) % n))))
}

/// Near-square 2-D lattice, filled row by row.
pub fn grid(n: usize) -> Result<Adjacency> {
    let cols = (n as f64).sqrt().ceil() as usize;
    let edges = (0..n).flat_map(|i| {
        let right = (i % cols + 1 < cols && i + 1 < n).then_some((i, i + 1));
        let down = (i + cols < n).then_some((i, i + cols));
        right.into_iter().chain(down)
    });
    Adjacency::from_edges(n, edges)
}

/// Watts–Strogatz rewiring of a ring lattice.
pub fn small_world<R: Rng + ?Sized>(n: usize, k: usize, p: f64, rng: &mut R) -> Result<Adjacency> {
    let mut mask = ring(n, k)?.mask.clone();
    for i in 0..n {
        for d in 1..=k {
            let j = (i + d) % n;
            if mask[(i, j)] == 1 && rng.random::<f64>() < p {
                let candidates: Vec<usize> = (0..n).filter(|&t| t != i && mask[(i, t)] == 0).collect();
                if let Some(&t) = candidates.choose(rng) {
                    mask[(i, j)] = 0;
                    mask[(j, i)] = 0;
                    mask[(i, t)] = 1;
                    mask[(t, i)] = 1;
                }
            }
        }
    }
    Adjacency::new(mask)
}

/// Barabási–Albert preferential attachment with `m` links per new node.
pub fn scale_free<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<Adjacency> {
    let m = m.max(1).min(n - 1);
    let mut edges: Vec<(usize, usize)> = (0..=m).flat_map(|i| ((i + 1)..=m).map(move |j| (i, j))).collect();
    let mut ends: Vec<usize> = edges.iter().flat_map(|&(a, b)| [a, b]).collect();
    for v in (m + 1)..n {
        let mut targets = Vec::with_capacity(m);
        while targets.len() < m {
            let t = ends[rng.random_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            edges.push((v, t));
            ends.extend([v, t]);
        }
    }
    Adjacency::from_edges(n, edges)
}

pub fn erdos_renyi<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R) -> Result<Adjacency> {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Adjacency::from_edges(n, edges)
}

/// Planted partition: `blocks` near-equal communities.
pub fn modular<R: Rng + ?Sized>(n: usize, blocks: usize, p_in: f64, p_out: f64, rng: &mut R) -> Result<Adjacency> {
    let label = |i: usize| i * blocks / n;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if label(i) == label(j) { p_in } else { p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    Adjacency::from_edges(n, edges)
}

/// Newman modularity Q of a partition.
pub fn modularity_of(adjacency: &Adjacency, labels: &[usize]) -> f64 {
    let n = adjacency.n();
    let deg: Vec<f64> = (0..n).map(|i| adjacency.degree(i) as f64).collect();
    let two_m: f64 = deg.iter().sum();
    if two_m == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                let a = if adjacency.has(i, j) { 1.0 } else { 0.0 };
                q += a - deg[i] * deg[j] / two_m;
            }
        }
    }
    q / two_m
}

/// Greedy agglomerative modularity maximisation; returns the best Q found.
pub fn greedy_modularity(adjacency: &Adjacency) -> f64 {
    let n = adjacency.n();
    let mut labels: Vec<usize> = (0..n).collect();
    let mut best = modularity_of(adjacency, &labels);
    loop {
        let mut communities: Vec<usize> = labels.clone();
        communities.sort_unstable();
        communities.dedup();
        let mut step_best: Option<(f64, usize, usize)> = None;
        for (ai, &a) in communities.iter().enumerate() {
            for &b in &communities[ai + 1..] {
                let linked = (0..n).any(|i| labels[i] == a && (0..n).any(|j| labels[j] == b && adjacency.has(i, j)));
                if !linked {
                    continue;
                }
                let trial: Vec<usize> = labels.iter().map(|&l| if l == b { a } else { l }).collect();
                let q = modularity_of(adjacency, &trial);
                if step_best.is_none_or(|(bq, _, _)| q > bq) {
                    step_best = Some((q, a, b));
                }
            }
        }
        match step_best {
            Some((q, a, b)) if q > best - 1e-12 => {
                labels.iter_mut().filter(|l| **l == b).for_each(|l| *l = a);
                best = best.max(q);
            }
            _ => return best,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;

    #[test]
    fn families_are_valid_and_sized() {
        let mut rng = stream_rng("topology", 1, "t");
        for t in Topology::ALL {
            let a = t.build(20, &mut rng).unwrap();
            assert_eq!(a.n(), 20, "{}", t.name());
            for (i, j) in a.edges() {
                assert!(a.has(j, i), "{} must be undirected", t.name());
            }
        }
    }

    #[test]
    fn star_and_complete_degrees() {
        let mut rng = stream_rng("topology", 1, "t");
        let s = Topology::Star.build(5, &mut rng).unwrap();
        assert_eq!(s.degree(0), 4);
        assert!((1..5).all(|i| s.degree(i) == 1));
        let c = Topology::Complete.build(6, &mut rng).unwrap();
        assert!((0..6).all(|i| c.degree(i) == 5));
    }

    #[test]
    fn two_cliques_have_high_modularity() {
        // Two triangles joined by one bridge: best split Q = 5/14.
        let a = Adjacency::from_edges(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)]).unwrap();
        let q = modularity_of(&a, &[0, 0, 0, 1, 1, 1]);
        assert!((q - 5.0 / 14.0).abs() < 1e-12);
        assert!((greedy_modularity(&a) - q).abs() < 1e-12);
    }
}
