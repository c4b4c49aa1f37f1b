use lite_tsc::arch::{ArchConfig, LiteConfig};
use lite_tsc::data::{stratified_split, znormalize};
use lite_tsc::model::build_model;
use lite_tsc::synth::trend_dataset;
use lite_tsc::train::{evaluate, train_with_observer, EpochControl, TrainConfig};
use std::time::Instant;

fn epochs_to_95(name: &str, arch: &ArchConfig, data_seed: u64) -> Option<usize> {
    let ds = znormalize(&trend_dataset(300, 128, 0.2, data_seed));
    let (train_ds, test_ds) = stratified_split(&ds, 0.2, 0).unwrap();
    let model = build_model(arch, 1, 3, 0).unwrap();
    let config = TrainConfig { epochs: 300, seed: 0, ..TrainConfig::default() };
    let mut reached = None;
    let t0 = Instant::now();
    train_with_observer(model, &train_ds, &config, |r, m| {
        let (_, acc) = evaluate(m, &test_ds, 64).unwrap();
        if acc >= 0.95 {
            reached = Some(r.epoch + 1);
            return EpochControl::Stop;
        }
        EpochControl::Continue
    })
    .unwrap();
    println!("data_seed={data_seed} {name:16} reached95={reached:?}  elapsed={:.1}s", t0.elapsed().as_secs_f32());
    reached
}

fn main() {
    for data_seed in [0u64, 13] {
        epochs_to_95("lite", &ArchConfig::Lite(LiteConfig::lite()), data_seed);
        let s = epochs_to_95("striped", &ArchConfig::Lite(LiteConfig::striped()), data_seed);
        let c = epochs_to_95("striped+custom", &ArchConfig::Lite(LiteConfig::striped_plus_custom_filters()), data_seed);
        println!("  custom<=striped: {:?}", c.map(|c| c <= s.unwrap_or(usize::MAX)));
    }
}
