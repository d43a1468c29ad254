//! Seeded synthetic datasets for examples and tests: piecewise-linear
//! regression, XOR-style classification, and banded multiclass layouts
//! where small trees with linear leaves are exactly the right model.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::data::{Dataset, FeatureOrigin, Labels, Task};

pub struct Rng(ChaCha8Rng);

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}

fn numeric_dataset(features: Vec<Vec<f64>>, labels: Labels, task: Task, k: usize) -> Dataset {
    let nf = features[0].len();
    Dataset {
        features,
        labels,
        task,
        class_count: k,
        class_names: match task {
            Task::Regression => Vec::new(),
            _ => (0..k).map(|c| format!("c{c}")).collect(),
        },
        feature_names: (0..nf).map(|j| format!("x{j}")).collect(),
        origins: (0..nf)
            .map(|j| FeatureOrigin::Numeric {
                source: format!("x{j}"),
            })
            .collect(),
    }
}

/// One feature, `y = x` below zero and `y = 3x` at or above it: a single
/// split at the kink recovers the function exactly.
pub fn piecewise_regression(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        // Deterministic spread over [-2, 2] with jitter, both sides covered.
        let base = -2.0 + 4.0 * (i as f64 + 0.5) / n as f64;
        let x = base + rng.range(-0.05, 0.05);
        let y = if x < 0.0 { x } else { 3.0 * x };
        xs.push(vec![x]);
        ys.push(y);
    }
    numeric_dataset(xs, Labels::Numeric(ys), Task::Regression, 1)
}

/// Regression with a split on feature 0 and different linear models of
/// the remaining features on each side, plus optional label noise.
pub fn split_linear_regression(
    n: usize,
    extra_features: usize,
    noise: f64,
    seed: u64,
) -> Dataset {
    let mut rng = Rng::new(seed);
    let nf = 1 + extra_features;
    let mut coeffs_left = Vec::new();
    let mut coeffs_right = Vec::new();
    for _ in 0..nf {
        coeffs_left.push(rng.range(-2.0, 2.0));
        coeffs_right.push(rng.range(-2.0, 2.0));
    }
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..nf).map(|_| rng.range(-1.5, 1.5)).collect();
        let coeffs = if row[0] < 0.0 { &coeffs_left } else { &coeffs_right };
        let base: f64 = row.iter().zip(coeffs).map(|(x, c)| x * c).sum();
        let offset = if row[0] < 0.0 { -1.0 } else { 2.0 };
        let y = base + offset + noise * rng.range(-1.0, 1.0);
        xs.push(row);
        ys.push(y);
    }
    numeric_dataset(xs, Labels::Numeric(ys), Task::Regression, 1)
}

/// Two features, four jittered clusters at (+-1, +-1); the label is the
/// quadrant parity, so no single linear model separates the classes but a
/// depth-2 univariate tree does.
pub fn xor_classification(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for i in 0..n {
        let quadrant = i % 4;
        let (sx, sy) = match quadrant {
            0 => (1.0, 1.0),
            1 => (-1.0, 1.0),
            2 => (-1.0, -1.0),
            _ => (1.0, -1.0),
        };
        let x0 = sx + rng.range(-0.3, 0.3);
        let x1 = sy + rng.range(-0.3, 0.3);
        let label = usize::from((x0 > 0.0) == (x1 > 0.0));
        xs.push(vec![x0, x1]);
        ys.push(label);
    }
    numeric_dataset(xs, Labels::Classes(ys), Task::Binary, 2)
}

/// One feature, three class bands: class 0 well left, classes 1 and 2 in
/// nearby bands to the right. One split plus per-leaf multiclass SVMs
/// separates everything; a single leaf needs much larger weights.
pub fn three_class_line(per_class: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let bands = [(-1.2, -0.8), (-0.1, 0.1), (0.9, 1.1)];
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..per_class {
        for (k, (lo, hi)) in bands.iter().enumerate() {
            let spread = (hi - lo) * (i as f64 + 0.5) / per_class as f64;
            let x = lo + spread + rng.range(-0.01, 0.01);
            xs.push(vec![x]);
            ys.push(k);
        }
    }
    numeric_dataset(xs, Labels::Classes(ys), Task::Multiclass, 3)
}

/// Regression with a level jump across the diagonal x0 + x1 = 0: linear
/// leaf models absorb the in-region slope but only a multivariate split
/// captures the jump boundary, so the optimal tree must use one.
pub fn diagonal_regression(n: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    while xs.len() < n {
        let x0 = rng.range(-1.0, 1.0);
        let x1 = rng.range(-1.0, 1.0);
        // Keep a corridor clear so the boundary has slack.
        if (x0 + x1).abs() < 0.2 {
            continue;
        }
        let jump = if x0 + x1 >= 0.0 { 3.0 } else { -3.0 };
        xs.push(vec![x0, x1]);
        ys.push(0.5 * x0 - 0.5 * x1 + jump);
    }
    numeric_dataset(xs, Labels::Numeric(ys), Task::Regression, 1)
}

/// Random small regression data with no planted structure; useful as a
/// stress case where the solver must still prove optimality.
pub fn noisy_regression(n: usize, features: usize, seed: u64) -> Dataset {
    let mut rng = Rng::new(seed);
    let mut xs = Vec::with_capacity(n);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..features).map(|_| rng.range(-2.0, 2.0)).collect();
        ys.push(rng.range(-3.0, 3.0));
        xs.push(row);
    }
    numeric_dataset(xs, Labels::Numeric(ys), Task::Regression, 1)
}
