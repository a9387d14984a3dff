//! Z-score normalization and fuzzy c-means clustering.
//!
//! Data matrices are `n_points x n_features`. Partition matrices are
//! `n_clusters x n_points`, so every column holds the memberships of one point
//! and sums to one. The objective minimized is
//!
//! ```text
//! J_m = sum_i sum_j u_ji^m * ||x_i - c_j||^2
//! ```
//!
//! and each iteration alternates the closed-form center update with the
//! membership update. The partition matrix, not the centers, is seeded.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Distances below this are treated as a point sitting on a center.
pub const COINCIDENT_EPS: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("need at least 2 rows to normalize, got {0}")]
    TooFewRows(usize),
    #[error("column {name:?} has zero variance")]
    ZeroVariance { name: String },
    #[error("invalid fcm config: {0}")]
    InvalidConfig(String),
    #[error("{clusters} clusters requested but only {points} data points")]
    TooFewPoints { clusters: usize, points: usize },
    #[error("data has {distinct} distinct rows, fewer than the {clusters} clusters requested")]
    TooFewDistinct { clusters: usize, distinct: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("cluster {0} lost all membership weight")]
    DegenerateCluster(usize),
    #[error("data contains non-finite values")]
    NonFinite,
}

/// Per-column affine parameters of a z-score transform.
#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl ZScore {
    /// Map normalized values back to the original units.
    pub fn inverse(&self, normalized: &Array2<f64>) -> Array2<f64> {
        normalized * &self.std + &self.mean
    }
}

/// Normalize every column to mean 0 and sample standard deviation 1.
///
/// `names` labels the columns in the zero-variance error; missing names fall
/// back to the column index.
pub fn zscore(data: &Array2<f64>, names: &[&str]) -> Result<(Array2<f64>, ZScore), ClusterError> {
    let n = data.nrows();
    if n < 2 {
        return Err(ClusterError::TooFewRows(n));
    }
    if data.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    let mut mean = Array1::zeros(data.ncols());
    let mut std = Array1::zeros(data.ncols());
    for (j, col) in data.axis_iter(Axis(1)).enumerate() {
        let m = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let s = var.sqrt();
        // Relative test so that float noise on a constant column still counts as zero.
        if !(s > 1e-12 * m.abs().max(f64::MIN_POSITIVE)) {
            let name = names
                .get(j)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("column {j}"));
            return Err(ClusterError::ZeroVariance { name });
        }
        mean[j] = m;
        std[j] = s;
    }
    let out = (data - &mean) / &std;
    Ok((out, ZScore { mean, std }))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Deserialize, serde::Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcmConfig {
    pub n_clusters: usize,
    /// Fuzzifier exponent `m`, strictly greater than one.
    pub fuzzifier: f64,
    pub max_iter: usize,
    /// Stop once the objective improves by less than this (absolute).
    pub tol: f64,
    pub seed: u64,
}

impl Default for FcmConfig {
    fn default() -> Self {
        Self {
            n_clusters: 3,
            fuzzifier: 2.0,
            max_iter: 100,
            tol: 1e-5,
            seed: 42,
        }
    }
}

impl FcmConfig {
    pub fn validate(&self) -> Result<(), ClusterError> {
        if self.n_clusters < 2 {
            return Err(ClusterError::InvalidConfig(format!(
                "n_clusters must be >= 2, got {}",
                self.n_clusters
            )));
        }
        if !(self.fuzzifier > 1.0 && self.fuzzifier.is_finite()) {
            return Err(ClusterError::InvalidConfig(format!(
                "fuzzifier must be > 1, got {}",
                self.fuzzifier
            )));
        }
        if self.max_iter == 0 {
            return Err(ClusterError::InvalidConfig(
                "max_iter must be positive".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(ClusterError::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmResult {
    /// `n_clusters x n_features`.
    pub centers: Array2<f64>,
    /// `n_clusters x n_points`, column-stochastic.
    pub partition: Array2<f64>,
    /// Objective after each iteration.
    pub objective_trace: Vec<f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl FcmResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("at least one iteration")
    }

    pub fn hard_labels(&self) -> Vec<usize> {
        hard_labels(&self.partition)
    }
}

/// Seeded uniform entries, each column normalized to sum to one.
pub fn init_partition(
    n_clusters: usize,
    n_points: usize,
    seed: u64,
) -> Result<Array2<f64>, ClusterError> {
    if n_clusters == 0 || n_clusters > n_points {
        return Err(ClusterError::TooFewPoints {
            clusters: n_clusters,
            points: n_points,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = Array2::zeros((n_clusters, n_points));
    for i in 0..n_points {
        // (0, 1] keeps every column sum strictly positive
        let mut col: Vec<f64> = (0..n_clusters).map(|_| 1.0 - rng.random::<f64>()).collect();
        let s: f64 = col.iter().sum();
        col.iter_mut().for_each(|v| *v /= s);
        for (j, v) in col.into_iter().enumerate() {
            u[[j, i]] = v;
        }
    }
    Ok(u)
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum()
}

/// `c_j = sum_i u_ji^m x_i / sum_i u_ji^m`.
pub fn update_centers(
    data: ArrayView2<f64>,
    partition: ArrayView2<f64>,
    m: f64,
) -> Result<Array2<f64>, ClusterError> {
    if partition.ncols() != data.nrows() {
        return Err(ClusterError::Shape(format!(
            "partition has {} columns for {} points",
            partition.ncols(),
            data.nrows()
        )));
    }
    let (c, d) = (partition.nrows(), data.ncols());
    let mut centers = Array2::zeros((c, d));
    for j in 0..c {
        let weights: Vec<f64> = partition.row(j).iter().map(|u| u.powf(m)).collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(ClusterError::DegenerateCluster(j));
        }
        let mut row = centers.row_mut(j);
        for (w, x) in weights.iter().zip(data.axis_iter(Axis(0))) {
            row.scaled_add(*w, &x);
        }
        row /= total;
    }
    Ok(centers)
}

/// Memberships `u_ji = 1 / sum_k (d_ji / d_ki)^(2/(m-1))` with Euclidean `d`.
///
/// A point within [`COINCIDENT_EPS`] of one or more centers gets its
/// membership split equally among those centers and zero elsewhere.
pub fn update_partition(
    data: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    m: f64,
) -> Result<Array2<f64>, ClusterError> {
    if centers.ncols() != data.ncols() {
        return Err(ClusterError::Shape(format!(
            "centers have {} features, data has {}",
            centers.ncols(),
            data.ncols()
        )));
    }
    let c = centers.nrows();
    let exp = 1.0 / (m - 1.0);
    let mut u = Array2::zeros((c, data.nrows()));
    let mut d2 = vec![0.0; c];
    for (i, x) in data.axis_iter(Axis(0)).enumerate() {
        for (j, cj) in centers.axis_iter(Axis(0)).enumerate() {
            d2[j] = sq_dist(x, cj);
        }
        let hits = d2.iter().filter(|v| v.sqrt() < COINCIDENT_EPS).count();
        if hits > 0 {
            let share = 1.0 / hits as f64;
            for j in 0..c {
                u[[j, i]] = if d2[j].sqrt() < COINCIDENT_EPS {
                    share
                } else {
                    0.0
                };
            }
            continue;
        }
        // (d_j/d_k)^(2/(m-1)) == (d2_j/d2_k)^(1/(m-1))
        for j in 0..c {
            let denom: f64 = d2.iter().map(|dk| (d2[j] / dk).powf(exp)).sum();
            u[[j, i]] = 1.0 / denom;
        }
    }
    Ok(u)
}

/// `J_m` for the given centers and partition.
pub fn objective(
    data: ArrayView2<f64>,
    centers: ArrayView2<f64>,
    partition: ArrayView2<f64>,
    m: f64,
) -> f64 {
    let mut j_m = 0.0;
    for (j, cj) in centers.axis_iter(Axis(0)).enumerate() {
        for (i, x) in data.axis_iter(Axis(0)).enumerate() {
            j_m += partition[[j, i]].powf(m) * sq_dist(x, cj);
        }
    }
    j_m
}

/// One alternating step: centers from `partition`, then the new partition.
pub fn fcm_step(
    data: ArrayView2<f64>,
    partition: ArrayView2<f64>,
    m: f64,
) -> Result<(Array2<f64>, Array2<f64>), ClusterError> {
    let centers = update_centers(data, partition, m)?;
    let next = update_partition(data, centers.view(), m)?;
    Ok((centers, next))
}

fn count_distinct_rows(data: ArrayView2<f64>, limit: usize) -> usize {
    let mut seen: Vec<ArrayView1<f64>> = Vec::new();
    for row in data.axis_iter(Axis(0)) {
        if !seen.contains(&row) {
            seen.push(row);
            if seen.len() >= limit {
                break;
            }
        }
    }
    seen.len()
}

/// Fuzzy c-means from a seeded random partition.
pub fn fcm(data: &Array2<f64>, config: &FcmConfig) -> Result<FcmResult, ClusterError> {
    config.validate()?;
    if data.nrows() < config.n_clusters {
        return Err(ClusterError::TooFewPoints {
            clusters: config.n_clusters,
            points: data.nrows(),
        });
    }
    let init = init_partition(config.n_clusters, data.nrows(), config.seed)?;
    fcm_from_partition(data, init, config)
}

/// Fuzzy c-means from a caller-supplied initial partition. `config.seed` is
/// ignored.
pub fn fcm_from_partition(
    data: &Array2<f64>,
    init: Array2<f64>,
    config: &FcmConfig,
) -> Result<FcmResult, ClusterError> {
    config.validate()?;
    if data.iter().any(|v| !v.is_finite()) {
        return Err(ClusterError::NonFinite);
    }
    if init.dim() != (config.n_clusters, data.nrows()) {
        return Err(ClusterError::Shape(format!(
            "initial partition is {:?}, expected {:?}",
            init.dim(),
            (config.n_clusters, data.nrows())
        )));
    }
    let distinct = count_distinct_rows(data.view(), config.n_clusters);
    if distinct < config.n_clusters {
        return Err(ClusterError::TooFewDistinct {
            clusters: config.n_clusters,
            distinct,
        });
    }

    let m = config.fuzzifier;
    let mut partition = init;
    let mut centers = Array2::zeros((config.n_clusters, data.ncols()));
    let mut trace = Vec::with_capacity(config.max_iter);
    let mut converged = false;
    for _ in 0..config.max_iter {
        let (c, u) = fcm_step(data.view(), partition.view(), m)?;
        centers = c;
        partition = u;
        let j_m = objective(data.view(), centers.view(), partition.view(), m);
        let improved = trace.last().map(|prev: &f64| prev - j_m);
        trace.push(j_m);
        if let Some(delta) = improved {
            if delta < config.tol {
                converged = true;
                break;
            }
        }
    }
    Ok(FcmResult {
        centers,
        partition,
        iterations_run: trace.len(),
        objective_trace: trace,
        converged,
    })
}

/// Argmax membership per point; ties go to the lowest cluster index.
pub fn hard_labels(partition: &Array2<f64>) -> Vec<usize> {
    partition
        .axis_iter(Axis(1))
        .map(|col| {
            col.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| {
                    if v > best.1 {
                        (j, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

/// Points of one feature pair with their hard cluster labels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairPlot {
    /// Column index plotted on the y axis.
    pub y: usize,
    /// Column index plotted on the x axis.
    pub x: usize,
    /// `(x, y)` coordinates.
    pub points: Vec<(f64, f64)>,
    pub labels: Vec<usize>,
}

/// The six `(y, x)` column pairs: SDNN/AVNN, RMSSD/AVNN, pNN50/AVNN,
/// RMSSD/SDNN, pNN50/SDNN, pNN50/RMSSD.
pub const FEATURE_PAIRS: [(usize, usize); 6] = [(1, 0), (2, 0), (3, 0), (2, 1), (3, 1), (3, 2)];

pub fn pairwise_plot_data(
    data: &Array2<f64>,
    partition: &Array2<f64>,
) -> Result<Vec<PairPlot>, ClusterError> {
    if data.ncols() != 4 {
        return Err(ClusterError::Shape(format!(
            "pairwise plots need 4 feature columns, got {}",
            data.ncols()
        )));
    }
    if partition.ncols() != data.nrows() {
        return Err(ClusterError::Shape("partition does not match data".into()));
    }
    let labels = hard_labels(partition);
    Ok(FEATURE_PAIRS
        .iter()
        .map(|&(y, x)| PairPlot {
            y,
            x,
            points: data.axis_iter(Axis(0)).map(|r| (r[x], r[y])).collect(),
            labels: labels.clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn zscore_of_one_two_three() {
        let data = array![[1.0], [2.0], [3.0]];
        let (z, p) = zscore(&data, &["a"]).unwrap();
        assert_eq!(z.column(0).to_vec(), vec![-1.0, 0.0, 1.0]);
        assert_eq!(p.mean[0], 2.0);
        assert_eq!(p.std[0], 1.0);
        assert_abs_diff_eq!(p.inverse(&z), data, epsilon = 1e-12);
    }

    #[test]
    fn zscore_zero_variance_names_column() {
        let data = array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]];
        assert_eq!(
            zscore(&data, &["avnn", "sdnn"]).unwrap_err(),
            ClusterError::ZeroVariance {
                name: "sdnn".into()
            }
        );
        assert!(matches!(
            zscore(&array![[1.0]], &[]),
            Err(ClusterError::TooFewRows(1))
        ));
    }

    #[test]
    fn zscore_is_idempotent() {
        let data = array![[1.0, 10.0], [4.0, 20.0], [2.0, 25.0], [9.0, 11.0]];
        let (z1, _) = zscore(&data, &[]).unwrap();
        let (z2, _) = zscore(&z1, &[]).unwrap();
        assert_abs_diff_eq!(z1, z2, epsilon = 1e-12);
    }

    #[test]
    fn init_partition_is_deterministic_and_stochastic() {
        let a = init_partition(3, 12, 42).unwrap();
        let b = init_partition(3, 12, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_partition(3, 12, 43).unwrap());
        for col in a.axis_iter(Axis(1)) {
            assert!((col.sum() - 1.0).abs() < 1e-12);
            assert!(col.iter().all(|v| (0.0..=1.0).contains(v)));
        }
        let small = init_partition(2, 2, 0).unwrap();
        assert_eq!(small.dim(), (2, 2));
        assert!(init_partition(3, 2, 0).is_err());
    }

    #[test]
    fn centers_of_hard_partition() {
        let data = array![[0.0, 0.0], [2.0, 0.0], [10.0, 10.0]];
        let u = array![[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let c = update_centers(data.view(), u.view(), 2.0).unwrap();
        assert_eq!(c, array![[1.0, 0.0], [10.0, 10.0]]);
    }

    #[test]
    fn center_of_identical_points() {
        let data = array![[3.0, -1.0], [3.0, -1.0], [3.0, -1.0]];
        let u = Array2::from_elem((2, 3), 0.5);
        let c = update_centers(data.view(), u.view(), 2.0).unwrap();
        for row in c.axis_iter(Axis(0)) {
            assert_abs_diff_eq!(row[0], 3.0, epsilon = 1e-12);
            assert_abs_diff_eq!(row[1], -1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn empty_cluster_is_degenerate() {
        let data = array![[0.0], [1.0]];
        let u = array![[1.0, 1.0], [0.0, 0.0]];
        assert_eq!(
            update_centers(data.view(), u.view(), 2.0).unwrap_err(),
            ClusterError::DegenerateCluster(1)
        );
    }

    #[test]
    fn membership_examples() {
        let centers = array![[0.0], [2.0]];
        let u = update_partition(array![[1.0]].view(), centers.view(), 2.0).unwrap();
        assert_abs_diff_eq!(u[[0, 0]], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(u[[1, 0]], 0.5, epsilon = 1e-15);

        let u = update_partition(array![[2.0]].view(), centers.view(), 2.0).unwrap();
        assert_eq!(u.column(0).to_vec(), vec![0.0, 1.0]);

        // distances 1 and 2
        let centers = array![[1.0], [-2.0]];
        let u = update_partition(array![[0.0]].view(), centers.view(), 2.0).unwrap();
        assert_abs_diff_eq!(u[[0, 0]], 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(u[[1, 0]], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn coincident_centers_split_membership() {
        let centers = array![[1.0, 1.0], [1.0, 1.0], [5.0, 5.0]];
        let u = update_partition(array![[1.0, 1.0]].view(), centers.view(), 2.0).unwrap();
        assert_eq!(u.column(0).to_vec(), vec![0.5, 0.5, 0.0]);
    }

    #[test]
    fn objective_examples() {
        let data = array![[0.0, 0.0], [4.0, 4.0]];
        let centers = data.clone();
        let u = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(objective(data.view(), centers.view(), u.view(), 2.0), 0.0);

        let x = array![[1.0, 2.0]];
        let c = array![[4.0, 6.0]];
        let u = array![[1.0]];
        assert_eq!(objective(x.view(), c.view(), u.view(), 2.0), 25.0);
    }

    #[test]
    fn objective_matches_double_loop() {
        let data = array![[0.0, 1.0], [2.0, -1.0], [3.5, 0.5]];
        let centers = array![[0.5, 0.5], [3.0, 0.0]];
        let u = array![[0.9, 0.3, 0.15], [0.1, 0.7, 0.85]];
        let m = 2.0;
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..2 {
                let dx = data[[i, 0]] - centers[[j, 0]];
                let dy = data[[i, 1]] - centers[[j, 1]];
                brute += u[[j, i]] * u[[j, i]] * (dx * dx + dy * dy);
            }
        }
        assert_abs_diff_eq!(
            objective(data.view(), centers.view(), u.view(), m),
            brute,
            epsilon = 1e-12
        );
    }

    #[test]
    fn separated_duplicates() {
        let data = array![
            [0.0, 0.0],
            [0.0, 0.0],
            [0.0, 0.0],
            [10.0, 10.0],
            [10.0, 10.0],
            [10.0, 10.0]
        ];
        let cfg = FcmConfig {
            n_clusters: 2,
            ..FcmConfig::default()
        };
        let r = fcm(&data, &cfg).unwrap();
        let labels = r.hard_labels();
        let (a, b) = (labels[0], labels[3]);
        assert_ne!(a, b);
        assert_abs_diff_eq!(r.centers.row(a)[0], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(r.centers.row(b)[1], 10.0, epsilon = 1e-6);
        for i in 0..6 {
            let own = if i < 3 { a } else { b };
            assert_abs_diff_eq!(r.partition[[own, i]], 1.0, epsilon = 1e-9);
        }
        assert!(r.converged);
    }

    #[test]
    fn near_hard_limit_matches_nearest_center() {
        let data = array![
            [0.0, 0.0],
            [0.0, 0.0],
            [0.0, 0.0],
            [10.0, 10.0],
            [10.0, 10.0],
            [10.0, 10.0]
        ];
        let cfg = FcmConfig {
            n_clusters: 2,
            fuzzifier: 1.05,
            ..FcmConfig::default()
        };
        let r = fcm(&data, &cfg).unwrap();
        let labels = r.hard_labels();
        for (i, row) in data.axis_iter(Axis(0)).enumerate() {
            let nearest = (0..2)
                .min_by(|&p, &q| {
                    sq_dist(row, r.centers.row(p))
                        .partial_cmp(&sq_dist(row, r.centers.row(q)))
                        .unwrap()
                })
                .unwrap();
            assert_eq!(labels[i], nearest);
        }
    }

    #[test]
    fn config_validation() {
        let data = array![[0.0], [1.0], [2.0], [3.0]];
        for cfg in [
            FcmConfig {
                fuzzifier: 1.0,
                ..Default::default()
            },
            FcmConfig {
                n_clusters: 1,
                ..Default::default()
            },
            FcmConfig {
                max_iter: 0,
                ..Default::default()
            },
            FcmConfig {
                tol: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(
                fcm(&data, &cfg),
                Err(ClusterError::InvalidConfig(_))
            ));
        }
        let cfg = FcmConfig {
            n_clusters: 5,
            ..Default::default()
        };
        assert!(matches!(
            fcm(&data, &cfg),
            Err(ClusterError::TooFewPoints {
                clusters: 5,
                points: 4
            })
        ));
        let dup = array![[1.0], [1.0], [1.0], [2.0]];
        assert!(matches!(
            fcm(&dup, &FcmConfig::default()),
            Err(ClusterError::TooFewDistinct { .. })
        ));
    }

    #[test]
    fn hard_label_ties_and_argmax() {
        let u = array![[0.7, 0.5], [0.2, 0.5], [0.1, 0.0]];
        assert_eq!(hard_labels(&u), vec![0, 0]);
    }

    #[test]
    fn six_pairs() {
        let data = Array2::from_shape_fn((5, 4), |(i, j)| (i * 4 + j) as f64);
        let u = init_partition(3, 5, 1).unwrap();
        let pairs = pairwise_plot_data(&data, &u).unwrap();
        assert_eq!(pairs.len(), 6);
        assert_eq!((pairs[0].y, pairs[0].x), (1, 0));
        assert_eq!(pairs[0].points[2], (8.0, 9.0));
        assert!(pairwise_plot_data(&data.slice(ndarray::s![.., 0..3]).to_owned(), &u).is_err());
    }
}
