use weasl_core::data::Dataset;
use weasl_core::model::ScorerSpec;
use weasl_core::noise;
use weasl_core::rng::derive_seed;
use weasl_core::synth::{self, GaussianMixtureSpec};
use weasl_core::train::{Method, TrainConfig};

fn ccn(separation: f64, beta: f64, seed: u64) -> (Dataset, Dataset) {
    let mix = GaussianMixtureSpec::two_gaussians(2, separation);
    let clean = synth::sample_instances(&mix, 6_000, 14_000, derive_seed(seed, 1)).unwrap();
    let weak = synth::inject_ccn_noise(&clean, 0.2, beta, derive_seed(seed, 2)).unwrap();
    let strong = synth::sample_instances(&mix, 50, 50, derive_seed(seed, 3)).unwrap();
    (strong, weak)
}

fn estimate(strong: &Dataset, weak: &Dataset, seed: u64) -> f64 {
    let cfg = TrainConfig {
        method: Method::OnlyStrong,
        epochs: noise::DEFAULT_ESTIMATION_EPOCHS,
        seed,
        ..TrainConfig::default()
    };
    noise::estimate_beta(strong, weak, &ScorerSpec::logistic(2), &cfg, noise::DEFAULT_QUANTILE).unwrap()
}

#[test]
fn well_separated_classes_recover_beta() {
    let (strong, weak) = ccn(4.0, 0.05, 0);
    let b = estimate(&strong, &weak, 0);
    assert!((b - 0.05).abs() <= 0.02, "estimate {b}");
}

#[test]
fn all_negative_groups_estimate_zero() {
    let (strong, weak) = ccn(4.0, 0.05, 1);
    let silent = Dataset::new(
        2,
        weak.iter().enumerate().map(|(i, inst)| inst.clone().with_group(i as u64, false)).collect(),
    )
    .unwrap();
    assert_eq!(estimate(&strong, &silent, 1), 0.0);
}

#[test]
fn estimate_improves_with_separation() {
    let err = |sep: f64| {
        (0..4)
            .map(|seed| {
                let (strong, weak) = ccn(sep, 0.05, 10 + seed);
                (estimate(&strong, &weak, seed) - 0.05).abs()
            })
            .sum::<f64>()
            / 4.0
    };
    let (close, far) = (err(0.5), err(4.0));
    assert!(far < close, "mean error {far} at separation 4 vs {close} at 0.5");
}

#[test]
fn purity_rates_follow_the_construction() {
    // f = 0.4, groups of 20: 8 positives and 12 negatives per positive group.
    let (ds, _) = synth::gen_purity_dataset(
        &synth::PurityConfig::new(0.4, 10, 3),
        &GaussianMixtureSpec::purity_default(),
    )
    .unwrap();
    let r = noise::true_noise_rates(&ds).unwrap();
    assert_eq!(r.alpha, 0.0);
    assert_eq!(r.beta, 120.0 / 320.0);
    assert_eq!(ds.skew().unwrap(), 4.0);
}
