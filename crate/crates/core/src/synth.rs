//! Synthetic trend dataset: three separable shape classes under Gaussian
//! noise, used by the test suites and the desk-scale demo.

use crate::data::{Dataset, DatasetMeta};
use crate::init::Rng;
use crate::tensor::Tensor;

/// Generate `n_samples` univariate series of the given length, cycling
/// through three classes: increasing ramp, decreasing ramp and a centered
/// bump, each with `noise_sigma` Gaussian noise added.
pub fn trend_dataset(n_samples: usize, length: usize, noise_sigma: f32, seed: u64) -> Dataset {
    let mut rng = Rng::seed_from(seed);
    let mut data = Vec::with_capacity(n_samples * length);
    let mut labels = Vec::with_capacity(n_samples);
    let mid = (length as f32 - 1.0) / 2.0;
    let width = length as f32 / 10.0;
    for i in 0..n_samples {
        let class = i % 3;
        labels.push(class);
        for t in 0..length {
            let u = t as f32 / (length as f32 - 1.0);
            let base = match class {
                0 => 2.0 * u - 1.0,
                1 => 1.0 - 2.0 * u,
                _ => {
                    let z = (t as f32 - mid) / width;
                    2.0 * (-0.5 * z * z).exp() - 0.5
                }
            };
            data.push(base + noise_sigma * rng.normal());
        }
    }
    Dataset {
        series: Tensor::from_vec(n_samples, 1, length, data).expect("consistent dimensions"),
        labels,
        class_names: vec!["ramp_up".into(), "ramp_down".into(), "bump".into()],
        meta: DatasetMeta { source: "synthetic-trend".into(), ..Default::default() },
    }
}
