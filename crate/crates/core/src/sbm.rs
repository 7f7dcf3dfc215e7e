//! Weighted stochastic block model graphs and their regularized inverse Laplacians.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{BwError, Result};
use crate::linalg::SymEigen;
use crate::matrix::{Definiteness, SymMatrix};
use crate::rng::{self, Purpose};

/// Block-model parameters. Nodes are labeled contiguously by block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub d: usize,
    /// Nominal block sizes, summing to `d`.
    pub base_sizes: Vec<usize>,
    /// Every block but the last is resized by a uniform draw from
    /// `{−size_jitter, …, size_jitter}`; the last block takes the remainder.
    pub size_jitter: usize,
    /// Edge probability per block pair.
    pub p: Vec<Vec<f64>>,
    /// Poisson mean of the weight of a present edge, per block pair.
    pub weight_means: Vec<Vec<f64>>,
    pub seed: u64,
}

impl SbmConfig {
    /// Two communities of `10 ± 2` nodes, `p = (0.8, 0.5, 0.2)`, Poisson means `(12, 7, 2)`.
    pub fn full_preset(seed: u64) -> Self {
        SbmConfig {
            d: 20,
            base_sizes: vec![10, 10],
            size_jitter: 2,
            p: vec![vec![0.8, 0.2], vec![0.2, 0.5]],
            weight_means: vec![vec![12.0, 2.0], vec![2.0, 7.0]],
            seed,
        }
    }

    /// The same two-community model scaled down to `d = 8` with fixed `4 + 4` blocks.
    pub fn desk_preset(seed: u64) -> Self {
        SbmConfig {
            d: 8,
            base_sizes: vec![4, 4],
            size_jitter: 0,
            ..Self::full_preset(seed)
        }
    }

    pub fn n_blocks(&self) -> usize {
        self.base_sizes.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_blocks();
        if k == 0 || self.d == 0 {
            return Err(BwError::Config("need at least one block and one node".into()));
        }
        if self.base_sizes.iter().sum::<usize>() != self.d {
            return Err(BwError::Config(format!(
                "block sizes {:?} do not sum to d = {}",
                self.base_sizes, self.d
            )));
        }
        for (name, table) in [("p", &self.p), ("weight_means", &self.weight_means)] {
            if table.len() != k || table.iter().any(|row| row.len() != k) {
                return Err(BwError::Config(format!("{name} must be {k}x{k}")));
            }
            for a in 0..k {
                for b in 0..k {
                    if table[a][b] != table[b][a] {
                        return Err(BwError::Config(format!("{name} is not symmetric")));
                    }
                }
            }
        }
        if self.p.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(BwError::Config("edge probabilities must lie in [0, 1]".into()));
        }
        if self.weight_means.iter().flatten().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(BwError::Config("Poisson weight means must be positive".into()));
        }
        Ok(())
    }

    /// Draws jittered block sizes.
    pub fn draw_block_sizes<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<usize>> {
        let k = self.n_blocks();
        let j = self.size_jitter as i64;
        let mut sizes = Vec::with_capacity(k);
        let mut used: i64 = 0;
        for &base in &self.base_sizes[..k - 1] {
            let shift = if j > 0 { rng.gen_range(-j..=j) } else { 0 };
            let size = base as i64 + shift;
            if size <= 0 {
                return Err(BwError::Config(format!(
                    "block size {size} after jitter is not positive"
                )));
            }
            used += size;
            sizes.push(size);
        }
        let last = self.d as i64 - used;
        if last <= 0 {
            return Err(BwError::Config(format!(
                "last block size {last} after jitter is not positive"
            )));
        }
        sizes.push(last);
        Ok(sizes.into_iter().map(|s| s as usize).collect())
    }
}

/// Undirected weighted graph without self loops.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    adjacency: DMatrix<f64>,
    blocks: Vec<usize>,
    /// Edges `(i, j)`, `i < j`, in row-major order. A drawn edge may carry weight zero.
    edges: Vec<(usize, usize)>,
}

impl WeightedGraph {
    pub fn new(adjacency: DMatrix<f64>, blocks: Vec<usize>) -> Result<Self> {
        let d = adjacency.nrows();
        if !adjacency.is_square() || blocks.len() != d {
            return Err(BwError::shape(
                format!("{d}x{d} adjacency with {d} block labels"),
                format!("{}x{} with {}", adjacency.nrows(), adjacency.ncols(), blocks.len()),
            ));
        }
        for i in 0..d {
            if adjacency[(i, i)] != 0.0 {
                return Err(BwError::Domain("graph has a self loop".into()));
            }
            for j in 0..d {
                let a = adjacency[(i, j)];
                if a < 0.0 || !a.is_finite() || a != adjacency[(j, i)] {
                    return Err(BwError::Domain(
                        "adjacency must be symmetric and non-negative".into(),
                    ));
                }
            }
        }
        let edges = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .filter(|&(i, j)| adjacency[(i, j)] > 0.0)
            .collect();
        Ok(WeightedGraph {
            adjacency,
            blocks,
            edges,
        })
    }

    pub fn dim(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// Block label of each node.
    pub fn blocks(&self) -> &[usize] {
        &self.blocks
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// `(edges, node pairs)` between blocks `a` and `b` (within the block if `a == b`).
    pub fn block_pair_counts(&self, a: usize, b: usize) -> (usize, usize) {
        let is_pair = |i: usize, j: usize| {
            let (x, y) = (self.blocks[i], self.blocks[j]);
            (x == a && y == b) || (x == b && y == a)
        };
        let d = self.dim();
        let pairs = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .filter(|&(i, j)| is_pair(i, j))
            .count();
        let edges = self.edges.iter().filter(|&&(i, j)| is_pair(i, j)).count();
        (edges, pairs)
    }
}

/// One graph from the stream `(cfg.seed, index)`.
pub fn generate_sbm_indexed(cfg: &SbmConfig, index: u64) -> Result<WeightedGraph> {
    generate_sbm_with(cfg, &mut rng::stream(cfg.seed, Purpose::Graph, index))
}

pub fn generate_sbm(cfg: &SbmConfig) -> Result<WeightedGraph> {
    generate_sbm_indexed(cfg, 0)
}

/// Draws block sizes, then visits each unordered pair once: an edge appears with
/// its block-pair probability and carries a Poisson weight (possibly zero).
pub fn generate_sbm_with<R: Rng + ?Sized>(cfg: &SbmConfig, rng: &mut R) -> Result<WeightedGraph> {
    cfg.validate()?;
    let sizes = cfg.draw_block_sizes(rng)?;
    let blocks: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat(b).take(s))
        .collect();
    let k = cfg.n_blocks();
    let poissons: Vec<Vec<Poisson<f64>>> = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| Poisson::new(cfg.weight_means[a][b]).expect("validated mean"))
                .collect()
        })
        .collect();
    let d = cfg.d;
    let mut adjacency = DMatrix::zeros(d, d);
    let mut edges = Vec::new();
    for i in 0..d {
        for j in (i + 1)..d {
            let (a, b) = (blocks[i], blocks[j]);
            if rng.gen_bool(cfg.p[a][b]) {
                let w = poissons[a][b].sample(rng);
                adjacency[(i, j)] = w;
                adjacency[(j, i)] = w;
                edges.push((i, j));
            }
        }
    }
    Ok(WeightedGraph {
        adjacency,
        blocks,
        edges,
    })
}

/// `L = D − A`.
pub fn laplacian(g: &WeightedGraph) -> SymMatrix {
    let a = g.adjacency();
    let d = g.dim();
    let mut l = -a.clone();
    for i in 0..d {
        l[(i, i)] = a.row(i).sum();
    }
    SymMatrix::from_parts(l, Definiteness::PositiveSemiDefinite)
}

/// `(L + r I)^{-1}` via the eigendecomposition of `L`.
pub fn invert_laplacian(l: &SymMatrix, r: f64) -> Result<SymMatrix> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(BwError::Config(format!(
            "regularization r must be positive, got {r}"
        )));
    }
    l.require_psd("Laplacian")?;
    let inv = SymEigen::new(l.matrix()).map(|lambda| 1.0 / (lambda.max(0.0) + r));
    Ok(SymMatrix::from_parts(inv, Definiteness::PositiveDefinite))
}

/// `n` data matrices `S_i = (L_{G_i} + r I)^{-1}`, graph `i` drawn from stream `(cfg.seed, offset + i)`.
pub fn generate_dataset(cfg: &SbmConfig, r: f64, n: usize, offset: u64) -> Result<Vec<SymMatrix>> {
    (0..n as u64)
        .map(|i| {
            let g = generate_sbm_indexed(cfg, offset + i)?;
            invert_laplacian(&laplacian(&g), r)
        })
        .collect()
}
