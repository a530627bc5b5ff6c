//! Workloads shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slipway_core::gbt::FeatureMatrix;

/// `n` rows of `m` features with a few planted effects and 5% missing
/// values, labelled for classification.
pub fn planted(n: usize, m: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n * m);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..m).map(|_| if rng.gen_bool(0.05) { f64::NAN } else { rng.gen_range(-3.0..3.0) }).collect();
        let at = |j: usize| if row[j].is_nan() { 0.0 } else { row[j] };
        let s = 1.5 * at(0) - at(1) * at(2) + if at(3) > 1.0 { 2.0 } else { 0.0 } + rng.gen_range(-1.0..1.0);
        y.push(f64::from(u8::from(s > 2.5)));
        values.extend(row);
    }
    let names = (0..m).map(|j| format!("x{j}")).collect();
    (FeatureMatrix::new(names, values).expect("shape matches"), y)
}
