//! Similarity-based learners: the 1-nearest-neighbor classifier with
//! leave-one-out and stratified k-fold estimates, and k-medoids clustering.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::SimilarityMatrix;

/// Hard assignment of documents to clusters `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    k: usize,
}

impl Partition {
    pub fn new(assignment: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&c| c >= k) {
            return Err(Error::InvalidInput(format!(
                "cluster id {bad} out of range for k = {k}"
            )));
        }
        Ok(Partition { assignment, k })
    }

    /// Partition with `k` = one more than the largest id used.
    pub fn from_assignment(assignment: Vec<usize>) -> Self {
        let k = assignment.iter().max().map_or(0, |m| m + 1);
        Partition { assignment, k }
    }

    /// Encodes string labels as cluster ids, numbered in sorted label order.
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> (Self, Vec<String>) {
        let names: Vec<String> = labels
            .iter()
            .map(|l| l.as_ref().to_string())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let lookup: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let assignment = labels.iter().map(|l| lookup[l.as_ref()]).collect();
        let k = names.len();
        (Partition { assignment, k }, names)
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k];
        for (i, &c) in self.assignment.iter().enumerate() {
            members[c].push(i);
        }
        members
    }
}

/// Label of the most similar training document other than `test_index`.
///
/// Ties go to the lowest document index. Fails when no candidate is left.
pub fn knn1_classify(
    sim: &SimilarityMatrix,
    labels: &[usize],
    train_mask: &[bool],
    test_index: usize,
) -> Result<usize> {
    nearest(sim.row(test_index), train_mask, test_index)
        .map(|j| labels[j])
        .ok_or_else(|| Error::InvalidInput(format!("no training document available for document {test_index}")))
}

fn nearest(row: &[f64], train_mask: &[bool], exclude: usize) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, (&s, &train)) in row.iter().zip(train_mask).enumerate() {
        if !train || j == exclude {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    best.map(|(j, _)| j)
}

fn check_labels(sim: &SimilarityMatrix, labels: &[usize]) -> Result<()> {
    if labels.len() != sim.len() {
        return Err(Error::DimensionMismatch {
            left: "similarity matrix".into(),
            left_dims: format!("{0}x{0}", sim.len()),
            right: "labels".into(),
            right_dims: labels.len().to_string(),
        });
    }
    Ok(())
}

/// Leave-one-out error rate of the 1-NN classifier.
pub fn loocv(sim: &SimilarityMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(sim, labels)?;
    let n = sim.len();
    if n < 2 {
        return Err(Error::InvalidInput("leave-one-out needs at least two documents".into()));
    }
    let all = vec![true; n];
    let errors = (0..n)
        .filter(|&i| nearest(sim.row(i), &all, i).map(|j| labels[j]) != Some(labels[i]))
        .count();
    Ok(errors as f64 / n as f64)
}

/// Outcome of a k-fold cross-validation of the 1-NN classifier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub k: usize,
    pub seed: u64,
    /// Fold index of every document.
    pub folds: Vec<usize>,
    /// Error rate of each non-empty fold.
    pub fold_errors: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation of the fold errors.
    pub std_dev: f64,
}

/// Stratified fold assignment: the members of each class are shuffled and
/// dealt round-robin, the dealer position carrying over from class to class.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut folds = vec![0; labels.len()];
    let mut dealer = 0;
    for (class, mut members) in by_class {
        if members.len() < k {
            warn!(
                "class {class} has {} document(s), fewer than {k} folds; it is absent from some folds",
                members.len()
            );
        }
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = dealer % k;
            dealer += 1;
        }
    }
    folds
}

/// Stratified k-fold cross-validation error of the 1-NN classifier.
pub fn kfold_cv(sim: &SimilarityMatrix, labels: &[usize], k: usize, seed: u64) -> Result<CvReport> {
    check_labels(sim, labels)?;
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k-fold needs k >= 2, got {k}")));
    }
    let n = sim.len();
    if n < 2 {
        return Err(Error::InvalidInput(
            "cross-validation needs at least two documents".into(),
        ));
    }
    let folds = stratified_folds(labels, k, seed);
    let mut fold_errors = Vec::with_capacity(k);
    for fold in 0..k {
        let train: Vec<bool> = folds.iter().map(|&f| f != fold).collect();
        let test: Vec<usize> = (0..n).filter(|&i| folds[i] == fold).collect();
        if test.is_empty() {
            warn!("fold {fold} of {k} is empty and is skipped");
            continue;
        }
        let wrong = test
            .iter()
            .filter(|&&i| nearest(sim.row(i), &train, i).map(|j| labels[j]) != Some(labels[i]))
            .count();
        fold_errors.push(wrong as f64 / test.len() as f64);
    }
    let (mean, std_dev) = mean_std(&fold_errors);
    Ok(CvReport {
        k,
        seed,
        folds,
        fold_errors,
        mean,
        std_dev,
    })
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Result of a k-medoids run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMedoids {
    pub partition: Partition,
    /// Medoid document of each cluster, ascending.
    pub medoids: Vec<usize>,
    /// Objective `Σ d(i, medoid(i))` after every accepted step, starting with
    /// the initial assignment.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub seed: u64,
}

impl KMedoids {
    pub fn objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

struct Assignment {
    cluster: Vec<usize>,
    objective: f64,
}

/// Nearest medoid for every document, ties to the lower medoid position.
fn assign(sim: &SimilarityMatrix, medoids: &[usize]) -> Assignment {
    let n = sim.len();
    let mut cluster = vec![0; n];
    let mut objective = 0.0;
    for (i, slot) in cluster.iter_mut().enumerate() {
        let row = sim.row(i);
        let mut best = 0;
        let mut best_d = 1.0 - row[medoids[0]];
        for (pos, &m) in medoids.iter().enumerate().skip(1) {
            let d = 1.0 - row[m];
            if d < best_d {
                best = pos;
                best_d = d;
            }
        }
        *slot = best;
        objective += best_d;
    }
    Assignment { cluster, objective }
}

/// Member minimizing the summed distance to the other members, ties to the
/// lowest index.
pub(crate) fn medoid_of(sim: &SimilarityMatrix, members: &[usize]) -> usize {
    let mut best = members[0];
    let mut best_cost = f64::INFINITY;
    for &c in members {
        let row = sim.row(c);
        let cost: f64 = members.iter().map(|&j| 1.0 - row[j]).sum();
        if cost < best_cost {
            best = c;
            best_cost = cost;
        }
    }
    best
}

/// k-medoids over the distance `1 − sim`.
///
/// Starts from `k` distinct seeded random medoids, then alternates nearest-medoid
/// assignment with per-cluster medoid updates. When alternation stalls, the best
/// single medoid/non-medoid swap is tried (the PAM swap step); the search ends
/// when neither move strictly lowers the objective or `max_iter` is reached.
/// Clusters left empty are reseeded with the document farthest from its medoid.
pub fn kmedoids(sim: &SimilarityMatrix, k: usize, seed: u64, max_iter: usize) -> Result<KMedoids> {
    let n = sim.len();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!(
            "k-medoids needs 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids = index::sample(&mut rng, n, k).into_vec();
    medoids.sort_unstable();

    let mut current = assign(sim, &medoids);
    reseed_empty(sim, &mut medoids, &mut current);
    let mut trace = vec![current.objective];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        if let Some((m, a)) = alternation_step(sim, &medoids, &current).or_else(|| swap_step(sim, &medoids, &current)) {
            medoids = m;
            current = a;
            reseed_empty(sim, &mut medoids, &mut current);
            trace.push(current.objective);
        } else {
            converged = true;
            break;
        }
    }

    Ok(KMedoids {
        partition: Partition {
            assignment: current.cluster,
            k,
        },
        medoids,
        objective_trace: trace,
        iterations,
        converged,
        seed,
    })
}

fn alternation_step(
    sim: &SimilarityMatrix,
    medoids: &[usize],
    current: &Assignment,
) -> Option<(Vec<usize>, Assignment)> {
    let mut members = vec![Vec::new(); medoids.len()];
    for (i, &c) in current.cluster.iter().enumerate() {
        members[c].push(i);
    }
    let mut next: Vec<usize> = members
        .iter()
        .zip(medoids)
        .map(|(m, &old)| if m.is_empty() { old } else { medoid_of(sim, m) })
        .collect();
    next.sort_unstable();
    if next == medoids {
        return None;
    }
    let a = assign(sim, &next);
    (a.objective < current.objective).then_some((next, a))
}

fn swap_step(sim: &SimilarityMatrix, medoids: &[usize], current: &Assignment) -> Option<(Vec<usize>, Assignment)> {
    let n = sim.len();
    let mut best: Option<(Vec<usize>, Assignment)> = None;
    for pos in 0..medoids.len() {
        for cand in 0..n {
            if medoids.binary_search(&cand).is_ok() {
                continue;
            }
            let mut trial = medoids.to_vec();
            trial[pos] = cand;
            trial.sort_unstable();
            let a = assign(sim, &trial);
            let bound = best.as_ref().map_or(current.objective, |(_, b)| b.objective);
            if a.objective < bound {
                best = Some((trial, a));
            }
        }
    }
    best
}

fn reseed_empty(sim: &SimilarityMatrix, medoids: &mut [usize], current: &mut Assignment) {
    loop {
        let sizes = {
            let mut s = vec![0usize; medoids.len()];
            for &c in &current.cluster {
                s[c] += 1;
            }
            s
        };
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let farthest = (0..sim.len())
            .filter(|i| medoids.binary_search(i).is_err())
            .map(|i| (i, 1.0 - sim.get(i, medoids[current.cluster[i]])))
            .fold(None::<(usize, f64)>, |acc, (i, d)| match acc {
                Some((_, bd)) if bd >= d => acc,
                _ => Some((i, d)),
            });
        let Some((doc, _)) = farthest else {
            return;
        };
        warn!(
            "k-medoids: cluster of medoid {} is empty, reseeding with document {doc}",
            medoids[empty]
        );
        medoids[empty] = doc;
        medoids.sort_unstable();
        *current = assign(sim, medoids);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("d{i}")).collect()
    }

    /// Two blocks: within-block similarity `hi`, across `lo`.
    fn blocks(sizes: &[usize], hi: f64, lo: f64) -> (SimilarityMatrix, Vec<usize>) {
        let labels: Vec<usize> = sizes
            .iter()
            .enumerate()
            .flat_map(|(c, &s)| std::iter::repeat_n(c, s))
            .collect();
        let l = labels.clone();
        let sim = SimilarityMatrix::from_upper(ids(labels.len()), |i, j| {
            if i == j {
                1.0
            } else if l[i] == l[j] {
                hi
            } else {
                lo
            }
        })
        .unwrap();
        (sim, labels)
    }

    fn random_sim(n: usize, seed: u64) -> SimilarityMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vals: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        SimilarityMatrix::from_upper(ids(n), |i, j| if i == j { 1.0 } else { vals[i * n + j] }).unwrap()
    }

    #[test]
    fn single_training_document_decides() {
        let sim = random_sim(4, 1);
        let mask = [false, false, true, false];
        assert_eq!(knn1_classify(&sim, &[0, 1, 7, 3], &mask, 0).unwrap(), 7);
        assert!(knn1_classify(&sim, &[0, 1, 7, 3], &mask, 2).is_err());
    }

    #[test]
    fn identical_document_wins_and_ties_go_low() {
        let sim = SimilarityMatrix::from_values(
            ids(4),
            vec![
                1.0, 1.0, 0.3, 0.3, //
                1.0, 1.0, 0.2, 0.2, //
                0.3, 0.2, 1.0, 0.3, //
                0.3, 0.2, 0.3, 1.0,
            ],
        )
        .unwrap();
        let all = [true; 4];
        assert_eq!(knn1_classify(&sim, &[0, 5, 6, 7], &all, 0).unwrap(), 5);
        // document 2 sees 0.3 at indices 0 and 3
        assert_eq!(knn1_classify(&sim, &[4, 5, 6, 7], &all, 2).unwrap(), 4);
    }

    #[test]
    fn loocv_cases() {
        let sim = random_sim(2, 3);
        assert_eq!(loocv(&sim, &[0, 1]).unwrap(), 1.0);
        let (sim, labels) = blocks(&[5, 6, 4], 0.8, 0.1);
        assert_eq!(loocv(&sim, &labels).unwrap(), 0.0);
        assert!(loocv(&random_sim(1, 0), &[0]).is_err());
    }

    #[test]
    fn loocv_matches_brute_force() {
        for seed in 0..20 {
            let n = 12;
            let sim = random_sim(n, seed);
            let labels: Vec<usize> = (0..n).map(|i| (i * 7 + seed as usize) % 3).collect();
            let mut wrong = 0;
            for i in 0..n {
                let mut best = usize::MAX;
                let mut best_s = f64::NEG_INFINITY;
                for j in 0..n {
                    if j != i && sim.get(i, j) > best_s {
                        best_s = sim.get(i, j);
                        best = j;
                    }
                }
                if labels[best] != labels[i] {
                    wrong += 1;
                }
            }
            assert_eq!(loocv(&sim, &labels).unwrap(), wrong as f64 / n as f64);
        }
    }

    #[test]
    fn kfold_on_separable_data_is_perfect_and_deterministic() {
        let (sim, labels) = blocks(&[20, 15, 25], 0.9, 0.1);
        let a = kfold_cv(&sim, &labels, 10, 42).unwrap();
        assert_eq!(a.mean, 0.0);
        assert_eq!(a.fold_errors.len(), 10);
        assert_eq!(a, kfold_cv(&sim, &labels, 10, 42).unwrap());
        assert_ne!(a.folds, kfold_cv(&sim, &labels, 10, 43).unwrap().folds);
        assert!(kfold_cv(&sim, &labels, 1, 0).is_err());
    }

    #[test]
    fn kfold_on_shuffled_labels_is_at_chance() {
        use rand::Rng;
        let mut total = 0.0;
        let runs = 100;
        for seed in 0..runs {
            let n = 60;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let mut labels: Vec<usize> = (0..n).map(|i| i % 2).collect();
            labels.shuffle(&mut rng);
            let vals: Vec<f64> = (0..n * n).map(|_| rng.random::<f64>()).collect();
            let sim = SimilarityMatrix::from_upper(ids(n), |i, j| if i == j { 1.0 } else { vals[i * n + j] }).unwrap();
            total += kfold_cv(&sim, &labels, 10, seed).unwrap().mean;
        }
        let mean = total / runs as f64;
        assert!((mean - 0.5).abs() < 0.1, "{mean}");
    }

    #[test]
    fn folds_are_stratified() {
        let labels: Vec<usize> = (0..97).map(|i| [0, 0, 0, 1, 1, 2][i % 6]).collect();
        let folds = stratified_folds(&labels, 10, 9);
        for class in 0..3 {
            let class_total = labels.iter().filter(|&&l| l == class).count() as f64;
            for fold in 0..10 {
                let in_fold = (0..labels.len())
                    .filter(|&i| folds[i] == fold && labels[i] == class)
                    .count() as f64;
                assert!((in_fold - class_total / 10.0).abs() < 1.0, "class {class} fold {fold}");
            }
        }
    }

    #[test]
    fn knn_is_invariant_under_increasing_transform() {
        for seed in 0..10 {
            let sim = random_sim(15, seed);
            let transformed = SimilarityMatrix::from_upper(ids(15), |i, j| (3.0 * sim.get(i, j)).exp() - 7.0).unwrap();
            let labels: Vec<usize> = (0..15).map(|i| i % 4).collect();
            assert_eq!(loocv(&sim, &labels).unwrap(), loocv(&transformed, &labels).unwrap());
            assert_eq!(
                kfold_cv(&sim, &labels, 5, seed).unwrap().fold_errors,
                kfold_cv(&transformed, &labels, 5, seed).unwrap().fold_errors
            );
        }
    }

    #[test]
    fn kmedoids_with_k_equal_n_is_zero_cost() {
        let sim = random_sim(6, 5);
        let r = kmedoids(&sim, 6, 1, 100).unwrap();
        assert_eq!(r.objective(), 0.0);
        assert_eq!(r.medoids, vec![0, 1, 2, 3, 4, 5]);
        assert!(kmedoids(&sim, 7, 1, 100).is_err());
    }

    #[test]
    fn kmedoids_recovers_separated_blocks() {
        let (sim, labels) = blocks(&[10, 14], 0.9, -0.2);
        for seed in 0..20 {
            let r = kmedoids(&sim, 2, seed, 100).unwrap();
            let a = r.partition.assignment();
            for i in 0..labels.len() {
                for j in 0..labels.len() {
                    assert_eq!(labels[i] == labels[j], a[i] == a[j]);
                }
            }
        }
    }

    fn brute_force_pair_optimum(sim: &SimilarityMatrix) -> f64 {
        let n = sim.len();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in a + 1..n {
                let cost: f64 = (0..n).map(|i| (1.0 - sim.get(i, a)).min(1.0 - sim.get(i, b))).sum();
                best = best.min(cost);
            }
        }
        best
    }

    #[test]
    fn kmedoids_objective_never_increases_and_finds_small_optima() {
        let mut hits = 0;
        for seed in 0..100u64 {
            let n = 4 + (seed as usize % 5);
            let sim = random_sim(n, 500 + seed);
            let r = kmedoids(&sim, 2, seed, 100).unwrap();
            for w in r.objective_trace.windows(2) {
                assert!(w[1] <= w[0]);
            }
            let opt = brute_force_pair_optimum(&sim);
            assert!(r.objective() >= opt - 1e-12);
            if (r.objective() - opt).abs() <= 1e-12 {
                hits += 1;
            }
        }
        assert!(hits >= 80, "{hits}");
    }

    #[test]
    fn empty_clusters_are_reseeded() {
        // documents 0 and 1 are interchangeable; a medoid at 1 loses its only member to 0 on ties.
        let sim = SimilarityMatrix::from_values(
            ids(3),
            vec![
                1.0, 1.0, 0.0, //
                1.0, 1.0, 0.0, //
                0.0, 0.0, 1.0,
            ],
        )
        .unwrap();
        let mut medoids = vec![0, 1];
        let mut a = assign(&sim, &medoids);
        assert_eq!(a.cluster, vec![0, 0, 0]);
        reseed_empty(&sim, &mut medoids, &mut a);
        assert_eq!(medoids, vec![0, 2]);
        assert_eq!(a.objective, 0.0);
    }

    #[test]
    fn partition_helpers() {
        let (p, names) = Partition::from_labels(&["b", "a", "b", "c"]);
        assert_eq!(names, ["a", "b", "c"]);
        assert_eq!(p.assignment(), [1, 0, 1, 2]);
        assert_eq!(p.cluster_sizes(), [1, 2, 1]);
        assert!(Partition::new(vec![0, 3], 3).is_err());
    }
}
