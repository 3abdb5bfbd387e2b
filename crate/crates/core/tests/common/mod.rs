//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use adl_core::dataset::SensorRecord;
use adl_core::labels::{Activity, Behavior};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Sort-all-distances k-NN. Returns the winning class index (first class on
/// ties) and the normalized votes per class.
pub fn knn_oracle(
    points: &[Vec<f64>],
    labels: &[usize],
    n_classes: usize,
    k: usize,
    inverse: bool,
    query: &[f64],
) -> (usize, Vec<f64>) {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d: f64 = p
                .iter()
                .zip(query)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            (d, i)
        })
        .collect();
    // stable: equal distances keep row order
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut votes = vec![0.0; n_classes];
    for &(d, i) in all.iter().take(k) {
        votes[labels[i]] += if inverse { 1.0 / (d + 1e-9) } else { 1.0 };
    }
    let total: f64 = votes.iter().sum();
    let conf: Vec<f64> = votes.iter().map(|v| v / total).collect();
    let mut best = 0;
    for c in 1..n_classes {
        if conf[c] > conf[best] {
            best = c;
        }
    }
    (best, conf)
}

/// Number of subsets of `n` items containing every index in `core`, counted
/// by listing each subset explicitly.
pub fn brute_force_goal_subsets(n: usize, core: &[usize]) -> (u64, u64) {
    let mut reached = 0;
    let mut total = 0;
    for mask in 0..(1u64 << n) {
        let members: Vec<usize> = (0..n).filter(|i| (mask >> i) & 1 == 1).collect();
        total += 1;
        if core.iter().all(|c| members.contains(c)) {
            reached += 1;
        }
    }
    (total, reached)
}

fn record(
    zone: &str,
    accel: [f64; 3],
    gyro: [f64; 3],
    behavior: Behavior,
    activity: Activity,
) -> SensorRecord {
    SensorRecord {
        timestamp: None,
        zone: zone.to_string(),
        accel,
        gyro,
        behavior: Some(behavior),
        activity: Some(activity),
    }
}

/// Four behavior clusters on the accelerometer axes, centers `separation`
/// standard deviations apart.
pub fn behavior_clusters(per_class: usize, separation: f64, seed: u64) -> Vec<SensorRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::new();
    for i in 0..per_class {
        for (c, b) in Behavior::ALL.into_iter().enumerate() {
            let mut accel = [0.0; 3];
            accel[c % 3] = separation * if c == 3 { -1.0 } else { 1.0 };
            for a in accel.iter_mut() {
                *a += noise.sample(&mut rng);
            }
            let gyro = [
                noise.sample(&mut rng),
                noise.sample(&mut rng),
                noise.sample(&mut rng),
            ];
            let zone = ["kitchen", "bedroom", "office", "toilet"][(i + c) % 4];
            out.push(record(zone, accel, gyro, b, Activity::Cooking));
        }
    }
    out
}

/// Emergencies (lying in the toilet with a distinct accelerometer
/// signature) against ordinary activity elsewhere.
pub fn emergency_clusters(
    n_normal: usize,
    n_emergency: usize,
    separation: f64,
    seed: u64,
) -> Vec<SensorRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut out = Vec::new();
    let jitter = |rng: &mut ChaCha8Rng| [noise.sample(rng), noise.sample(rng), noise.sample(rng)];
    for i in 0..n_normal {
        let b = [Behavior::Standing, Behavior::Sitting, Behavior::Walking][i % 3];
        let a = jitter(&mut rng);
        let g = jitter(&mut rng);
        let zone = ["kitchen", "office", "bedroom"][rng.random_range(0..3)];
        out.push(record(zone, a, g, b, Activity::Working));
    }
    for _ in 0..n_emergency {
        let mut a = jitter(&mut rng);
        a[2] += separation;
        let g = jitter(&mut rng);
        out.push(record("toilet", a, g, Behavior::Lying, Activity::Emergency));
    }
    out
}
