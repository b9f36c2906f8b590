use krr_core::eigenbounds::empirical_spectrum;
use krr_core::rng::{stream_rng, Stream};
use krr_core::spectrum::{Decay, ExplicitProfile, FeatureSample};

#[test]
fn slow_decay_self_regularizes() {
    let decay = Decay::LogPolynomial { a: 0.25 };
    let profile = ExplicitProfile::parametric(decay, 1 << 16, true).unwrap();
    for n in [256, 512] {
        for seed in 0..3 {
            let mut rng = stream_rng(seed, Stream::Features, n as u64);
            let f = FeatureSample::gaussian(n, &profile, 2 * n, true, &mut rng).unwrap();
            let mu = empirical_spectrum(&f.gram()).unwrap();
            let ratio = mu[n - 1] / decay.value(n);
            assert!(ratio >= 10.0, "n={n} seed={seed}: ratio {ratio}");
        }
    }
}
