//! Seeded generator of two clustered similarity spaces joined by a random
//! comparability mapping.
//!
//! Each space gets 3 to 18 clusters of 20 to 40 elements. Pairwise similarity is
//! `0.5 + v_s·N(0,1)` inside a cluster and `−0.5 + v_s·N(0,1)` across clusters.
//! A cluster map draws one standard normal offset per (cluster of 𝒮′, cluster
//! of 𝒮) pair, and every comparability cell is `v_c·N(0,1)` plus the offset of
//! its block.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{ComparabilityMatrix, SimilarityMatrix};

pub const DEFAULT_V_S: f64 = 1.0;
pub const DEFAULT_V_C: f64 = 3.0;
pub const CLUSTER_COUNT_RANGE: (usize, usize) = (3, 18);
pub const CLUSTER_SIZE_RANGE: (usize, usize) = (20, 40);

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTest {
    pub seed: u64,
    pub sim_s: SimilarityMatrix,
    pub sim_sp: SimilarityMatrix,
    /// Rows are elements of 𝒮, columns elements of 𝒮′.
    pub comp: ComparabilityMatrix,
    pub labels_s: Vec<usize>,
    pub labels_sp: Vec<usize>,
    pub cluster_sizes_s: Vec<usize>,
    pub cluster_sizes_sp: Vec<usize>,
    /// Row-major, one row per cluster of 𝒮′ and one column per cluster of 𝒮.
    pub cluster_map: Vec<f64>,
}

impl SyntheticTest {
    /// Block offset between cluster `l` of 𝒮′ and cluster `k` of 𝒮.
    pub fn cluster_offset(&self, l: usize, k: usize) -> f64 {
        self.cluster_map[l * self.cluster_sizes_s.len() + k]
    }

    pub fn summary(&self) -> TestSummary {
        TestSummary {
            seed: self.seed,
            clusters_s: self.cluster_sizes_s.len(),
            elements_s: self.labels_s.len(),
            clusters_sp: self.cluster_sizes_sp.len(),
            elements_sp: self.labels_sp.len(),
        }
    }
}

/// Sizes of one generated test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TestSummary {
    pub seed: u64,
    pub clusters_s: usize,
    pub elements_s: usize,
    pub clusters_sp: usize,
    pub elements_sp: usize,
}

fn labels_for(sizes: &[usize]) -> Vec<usize> {
    sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
        .collect()
}

fn draw_similarities(rng: &mut ChaCha8Rng, labels: &[usize], v_s: f64, prefix: &str) -> Result<SimilarityMatrix> {
    let n = labels.len();
    // Draw the upper triangle in row-major order, then mirror.
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        values[i * n + i] = 1.0;
        for j in i + 1..n {
            let mean = if labels[i] == labels[j] { 0.5 } else { -0.5 };
            let noise: f64 = rng.sample(StandardNormal);
            let v = mean + v_s * noise;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    SimilarityMatrix::from_values((0..n).map(|i| format!("{prefix}{i}")).collect(), values)
}

/// Generates one test. Identical seeds give identical tests.
pub fn generate_test(seed: u64, v_s: f64, v_c: f64) -> Result<SyntheticTest> {
    if !(v_s.is_finite() && v_s > 0.0 && v_c.is_finite() && v_c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "noise scales must be positive, got v_s = {v_s}, v_c = {v_c}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = CLUSTER_COUNT_RANGE;
    let n_clusters_s = rng.random_range(lo..=hi);
    let n_clusters_sp = rng.random_range(lo..=hi);
    let (lo, hi) = CLUSTER_SIZE_RANGE;
    let sizes_s: Vec<usize> = (0..n_clusters_s).map(|_| rng.random_range(lo..=hi)).collect();
    let sizes_sp: Vec<usize> = (0..n_clusters_sp).map(|_| rng.random_range(lo..=hi)).collect();
    let labels_s = labels_for(&sizes_s);
    let labels_sp = labels_for(&sizes_sp);

    let sim_s = draw_similarities(&mut rng, &labels_s, v_s, "s")?;
    let sim_sp = draw_similarities(&mut rng, &labels_sp, v_s, "t")?;

    let cluster_map: Vec<f64> = (0..n_clusters_sp * n_clusters_s)
        .map(|_| rng.sample(StandardNormal))
        .collect();

    // Fill block by block: outer loop over clusters of 𝒮, inner over clusters
    // of 𝒮′, cells ordered by 𝒮′ element then 𝒮 element.
    let (n_s, n_sp) = (labels_s.len(), labels_sp.len());
    let mut comp = vec![0.0; n_s * n_sp];
    let mut col_offset = 0;
    for (k, &size_k) in sizes_s.iter().enumerate() {
        let mut row_offset = 0;
        for (l, &size_l) in sizes_sp.iter().enumerate() {
            let offset = cluster_map[l * n_clusters_s + k];
            for i in 0..size_l {
                for j in 0..size_k {
                    let noise: f64 = rng.sample(StandardNormal);
                    let s_elem = col_offset + j;
                    let sp_elem = row_offset + i;
                    comp[s_elem * n_sp + sp_elem] = noise * v_c + offset;
                }
            }
            row_offset += size_l;
        }
        col_offset += size_k;
    }
    let comp = ComparabilityMatrix::from_values(sim_s.ids().to_vec(), sim_sp.ids().to_vec(), comp)?;

    Ok(SyntheticTest {
        seed,
        sim_s,
        sim_sp,
        comp,
        labels_s,
        labels_sp,
        cluster_sizes_s: sizes_s,
        cluster_sizes_sp: sizes_sp,
        cluster_map,
    })
}

/// Per-test seed derived from a suite seed (SplitMix64 finalizer).
pub fn derive_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `count` independent tests, generated in parallel with per-test seeds.
pub fn generate_suite(base_seed: u64, count: usize, v_s: f64, v_c: f64) -> Result<Vec<SyntheticTest>> {
    if count == 0 {
        return Err(Error::InvalidParameter("suite needs at least one test".into()));
    }
    (0..count as u64)
        .into_par_iter()
        .map(|i| generate_test(derive_seed(base_seed, i), v_s, v_c))
        .collect()
}
