//! Clustering quality: accuracy under the best one-to-one cluster/class
//! matching, normalized mutual information, and the Davies–Bouldin index over
//! a similarity matrix.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::learners::{medoid_of, Partition};
use crate::matrix::SimilarityMatrix;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub ac: f64,
    pub nmi: f64,
    pub db: Option<f64>,
    pub k: usize,
    pub n: usize,
    /// True when cluster and class counts differed and the contingency table
    /// was padded to a square before matching.
    pub padded: bool,
    pub assignment_method: &'static str,
}

/// AC, NMI and, when a similarity matrix is given, DB.
pub fn evaluate(pred: &Partition, truth: &Partition, sim: Option<&SimilarityMatrix>) -> Result<MetricReport> {
    let ac = accuracy(pred, truth)?;
    let nmi = nmi(pred, truth)?;
    let db = sim.map(|s| davies_bouldin(s, pred)).transpose()?;
    Ok(MetricReport {
        ac,
        nmi,
        db,
        k: pred.k(),
        n: pred.len(),
        padded: pred.k() != truth.k(),
        assignment_method: "hungarian",
    })
}

fn check_same_len(pred: &Partition, truth: &Partition) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            left: "predicted partition".into(),
            left_dims: pred.len().to_string(),
            right: "true partition".into(),
            right_dims: truth.len().to_string(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidInput("partitions are empty".into()));
    }
    Ok(())
}

/// Joint counts, `pred.k()` rows by `truth.k()` columns.
pub fn contingency(pred: &Partition, truth: &Partition) -> Vec<Vec<usize>> {
    let mut table = vec![vec![0; truth.k()]; pred.k()];
    for (&p, &t) in pred.assignment().iter().zip(truth.assignment()) {
        table[p][t] += 1;
    }
    table
}

/// Fraction of documents whose cluster maps to their class under the best
/// one-to-one matching of clusters to classes.
pub fn accuracy(pred: &Partition, truth: &Partition) -> Result<f64> {
    check_same_len(pred, truth)?;
    let table = contingency(pred, truth);
    let size = pred.k().max(truth.k());
    let mut profit = vec![vec![0i64; size]; size];
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            profit[i][j] = c as i64;
        }
    }
    let matched = max_assignment(&profit);
    Ok(matched as f64 / pred.len() as f64)
}

/// Maximum-weight perfect matching on a square matrix (Hungarian method with
/// potentials, O(n³)). Returns the optimal total.
pub fn max_assignment(profit: &[Vec<i64>]) -> i64 {
    let n = profit.len();
    if n == 0 {
        return 0;
    }
    let max = profit.iter().flatten().copied().max().unwrap_or(0);
    // Minimize cost = max - profit over 1-indexed arrays.
    let cost = |i: usize, j: usize| max - profit[i - 1][j - 1];
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut owner = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| profit[owner[j] - 1][j - 1]).sum()
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// Mutual information normalized by the mean of the two entropies (natural log).
///
/// When both partitions have zero entropy the result is 1 if they are the same
/// set partition and 0 otherwise; when only one does, the result is 0.
pub fn nmi(pred: &Partition, truth: &Partition) -> Result<f64> {
    check_same_len(pred, truth)?;
    let n = pred.len() as f64;
    let table = contingency(pred, truth);
    let rows: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..truth.k()).map(|j| table.iter().map(|r| r[j]).sum()).collect();
    let h_pred = entropy(&rows, n);
    let h_truth = entropy(&cols, n);
    if h_pred == 0.0 && h_truth == 0.0 {
        return Ok(if same_set_partition(pred, truth) { 1.0 } else { 0.0 });
    }
    if h_pred == 0.0 || h_truth == 0.0 {
        return Ok(0.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c == 0 {
                continue;
            }
            let pij = c as f64 / n;
            mi += pij * (pij * n * n / (rows[i] as f64 * cols[j] as f64)).ln();
        }
    }
    Ok((mi / ((h_pred + h_truth) / 2.0)).clamp(0.0, 1.0))
}

fn same_set_partition(a: &Partition, b: &Partition) -> bool {
    let mut forward = vec![None; a.k()];
    let mut backward = vec![None; b.k()];
    for (&x, &y) in a.assignment().iter().zip(b.assignment()) {
        match (forward[x], backward[y]) {
            (None, None) => {
                forward[x] = Some(y);
                backward[y] = Some(x);
            }
            (Some(fy), Some(bx)) if fy == y && bx == x => {}
            _ => return false,
        }
    }
    true
}

/// Davies–Bouldin index with distance `1 − sim`, each cluster represented by
/// its medoid. Lower is better.
pub fn davies_bouldin(sim: &SimilarityMatrix, part: &Partition) -> Result<f64> {
    if part.len() != sim.len() {
        return Err(Error::DimensionMismatch {
            left: "similarity matrix".into(),
            left_dims: format!("{0}x{0}", sim.len()),
            right: "partition".into(),
            right_dims: part.len().to_string(),
        });
    }
    let members = part.members();
    if members.len() < 2 {
        return Err(Error::InvalidInput("Davies-Bouldin needs at least two clusters".into()));
    }
    if let Some(k) = members.iter().position(Vec::is_empty) {
        return Err(Error::InvalidInput(format!("cluster {k} is empty")));
    }
    let centers: Vec<usize> = members.iter().map(|m| medoid_of(sim, m)).collect();
    let scatter: Vec<f64> = members
        .iter()
        .zip(&centers)
        .map(|(m, &c)| m.iter().map(|&i| 1.0 - sim.get(i, c)).sum::<f64>() / m.len() as f64)
        .collect();
    let k = members.len();
    let mut total = 0.0;
    for a in 0..k {
        let mut worst = f64::NEG_INFINITY;
        for b in 0..k {
            if a == b {
                continue;
            }
            let d = 1.0 - sim.get(centers[a], centers[b]);
            if d == 0.0 {
                return Err(Error::CoincidentMedoids {
                    first: a.min(b),
                    second: a.max(b),
                    first_doc: centers[a.min(b)],
                    second_doc: centers[a.max(b)],
                });
            }
            worst = worst.max((scatter[a] + scatter[b]) / d);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn p(a: &[usize]) -> Partition {
        Partition::from_assignment(a.to_vec())
    }

    fn permutations(k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for perm in permutations(k - 1) {
            for pos in 0..=perm.len() {
                let mut q = perm.clone();
                q.insert(pos, k - 1);
                out.push(q);
            }
        }
        out
    }

    fn brute_force_accuracy(pred: &[usize], truth: &[usize], k: usize) -> f64 {
        permutations(k)
            .iter()
            .map(|perm| pred.iter().zip(truth).filter(|(&a, &b)| perm[a] == b).count())
            .max()
            .unwrap() as f64
            / pred.len() as f64
    }

    #[test]
    fn accuracy_basics() {
        assert_eq!(accuracy(&p(&[1, 1, 0, 0, 2]), &p(&[0, 0, 2, 2, 1])).unwrap(), 1.0);
        let truth = p(&[0, 0, 1, 1, 2, 2]);
        let one = Partition::new(vec![0; 6], 3).unwrap();
        assert!((accuracy(&one, &truth).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(accuracy(&p(&[0]), &truth).is_err());
    }

    #[test]
    fn accuracy_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let k = rng.random_range(1..=4);
            let n = rng.random_range(1..=15);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let got = accuracy(
                &Partition::new(pred.clone(), k).unwrap(),
                &Partition::new(truth.clone(), k).unwrap(),
            )
            .unwrap();
            assert_eq!(got, brute_force_accuracy(&pred, &truth, k));
        }
    }

    #[test]
    fn accuracy_pads_rectangular_tables() {
        // 3 clusters vs 2 classes
        let pred = Partition::new(vec![0, 0, 1, 1, 2, 2], 3).unwrap();
        let truth = Partition::new(vec![0, 0, 1, 1, 1, 1], 2).unwrap();
        assert!((accuracy(&pred, &truth).unwrap() - 4.0 / 6.0).abs() < 1e-15);
        let r = evaluate(&pred, &truth, None).unwrap();
        assert!(r.padded);
    }

    #[test]
    fn nmi_basics() {
        assert_eq!(nmi(&p(&[0, 0, 1, 1, 2]), &p(&[2, 2, 0, 0, 1])).unwrap(), 1.0);
        // product joint counts: each pred cluster splits evenly over classes
        let a = p(&[0, 0, 1, 1]);
        let b = p(&[0, 1, 0, 1]);
        assert!(nmi(&a, &b).unwrap().abs() < 1e-15);
        let single = p(&[0, 0, 0, 0]);
        assert_eq!(nmi(&single, &single).unwrap(), 1.0);
        assert_eq!(nmi(&single, &a).unwrap(), 0.0);
        assert_eq!(nmi(&a, &single).unwrap(), 0.0);
    }

    #[test]
    fn nmi_eight_document_hand_instance() {
        let pred = p(&[0, 0, 0, 1, 1, 1, 2, 2]);
        let truth = p(&[0, 0, 1, 1, 1, 1, 0, 0]);
        // joint counts: (0,0)=2 (0,1)=1 (1,1)=3 (2,0)=2; rows 3,3,2; cols 4,4
        let n: f64 = 8.0;
        let joint = [(2.0, 3.0, 4.0), (1.0, 3.0, 4.0), (3.0, 3.0, 4.0), (2.0, 2.0, 4.0)];
        let mi: f64 = joint
            .iter()
            .map(|&(c, r, k)| c / n * ((c / n) / ((r / n) * (k / n))).ln())
            .sum();
        let h_pred: f64 = -[3.0f64, 3.0, 2.0].iter().map(|c| c / n * (c / n).ln()).sum::<f64>();
        let h_truth: f64 = -[4.0f64, 4.0].iter().map(|c| c / n * (c / n).ln()).sum::<f64>();
        let expected = mi / ((h_pred + h_truth) / 2.0);
        assert!((nmi(&pred, &truth).unwrap() - expected).abs() < 1e-12);
        assert!((nmi(&truth, &pred).unwrap() - expected).abs() < 1e-12);
    }

    fn sim_from(rows: &[&[f64]]) -> SimilarityMatrix {
        let n = rows.len();
        SimilarityMatrix::from_values((0..n).map(|i| format!("d{i}")).collect(), rows.concat()).unwrap()
    }

    #[test]
    fn db_two_singletons_is_zero() {
        let sim = sim_from(&[&[1.0, 0.2], &[0.2, 1.0]]);
        assert_eq!(davies_bouldin(&sim, &p(&[0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn db_errors() {
        let sim = sim_from(&[&[1.0, 1.0], &[1.0, 1.0]]);
        assert!(matches!(
            davies_bouldin(&sim, &p(&[0, 1])),
            Err(Error::CoincidentMedoids { .. })
        ));
        assert!(davies_bouldin(&sim, &p(&[0, 0])).is_err());
        assert!(davies_bouldin(&sim, &Partition::new(vec![0, 2], 3).unwrap()).is_err());
    }

    #[test]
    fn db_three_cluster_hand_instance() {
        // clusters {0,1}, {2,3}, {4}
        let sim = sim_from(&[
            &[1.0, 0.8, 0.1, 0.0, 0.2],
            &[0.8, 1.0, 0.3, 0.1, 0.0],
            &[0.1, 0.3, 1.0, 0.6, 0.4],
            &[0.0, 0.1, 0.6, 1.0, 0.5],
            &[0.2, 0.0, 0.4, 0.5, 1.0],
        ]);
        let part = p(&[0, 0, 1, 1, 2]);
        // medoids: ties on summed distance go to the lowest index → 0, 2, 4
        let (c0, c1, c2) = (0, 2, 4);
        let s0 = (0.0 + 0.2) / 2.0;
        let s1 = (0.0 + 0.4) / 2.0;
        let s2 = 0.0;
        let d = |a: usize, b: usize| 1.0 - sim.get(a, b);
        let r0 = ((s0 + s1) / d(c0, c1)).max((s0 + s2) / d(c0, c2));
        let r1 = ((s1 + s0) / d(c1, c0)).max((s1 + s2) / d(c1, c2));
        let r2 = ((s2 + s0) / d(c2, c0)).max((s2 + s1) / d(c2, c1));
        let expected = (r0 + r1 + r2) / 3.0;
        assert!((davies_bouldin(&sim, &part).unwrap() - expected).abs() < 1e-12);
        let relabeled = p(&[2, 2, 0, 0, 1]);
        assert!((davies_bouldin(&sim, &relabeled).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn tighter_clusters_lower_db() {
        let make = |within: f64| {
            sim_from(&[
                &[1.0, within, 0.0, 0.0],
                &[within, 1.0, 0.0, 0.0],
                &[0.0, 0.0, 1.0, within],
                &[0.0, 0.0, within, 1.0],
            ])
        };
        let part = p(&[0, 0, 1, 1]);
        assert!(davies_bouldin(&make(0.9), &part).unwrap() < davies_bouldin(&make(0.5), &part).unwrap());
    }

    #[test]
    fn optimal_matching_dominates_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let k = rng.random_range(2..=5);
            let n = rng.random_range(2..=20);
            let pred: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let truth: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let identity = pred.iter().zip(&truth).filter(|(a, b)| a == b).count() as f64 / n as f64;
            let ac = accuracy(&Partition::new(pred, k).unwrap(), &Partition::new(truth, k).unwrap()).unwrap();
            assert!(ac >= identity);
        }
    }
}
