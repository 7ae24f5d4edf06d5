use cvqkd_core::gaussian::{attenuate, beam_splitter, homodyne_sample, rescale_outcome};
use cvqkd_core::streams::stream;
use cvqkd_core::{CoherentAmplitude, QuadratureBasis, SHOT_NOISE};
use proptest::prelude::*;
use rand::Rng;

const N: usize = 100_000;

fn moments(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

#[test]
fn homodyne_mean_and_variance_concentrate() {
    let alpha = CoherentAmplitude::real(3.0).unwrap();
    let mut rng = stream(1, 0);
    let xs: Vec<f64> = (0..N)
        .map(|_| homodyne_sample(alpha, QuadratureBasis::X, &mut rng).value)
        .collect();
    let (mean, var) = moments(&xs);
    // 3σ bound on the mean, σ = 0.5/√N
    assert!((mean - 3.0).abs() < 3.0 * 0.5 / (N as f64).sqrt(), "{mean}");
    assert!((var / SHOT_NOISE - 1.0).abs() < 0.05, "{var}");
}

#[test]
fn rescaled_samples_recover_encoding_and_amplified_noise() {
    let alpha = CoherentAmplitude::new(1.3, -0.4).unwrap();
    for (k, &eta) in [1.0, 0.5, 0.1, 0.02].iter().enumerate() {
        let mut rng = stream(2, k as u64);
        let received = attenuate(alpha, eta).unwrap();
        let xs: Vec<f64> = (0..N)
            .map(|_| {
                let o = homodyne_sample(received, QuadratureBasis::X, &mut rng);
                rescale_outcome(o, eta).unwrap().value
            })
            .collect();
        let (mean, var) = moments(&xs);
        let sigma = (SHOT_NOISE / eta).sqrt();
        assert!(
            (mean - 1.3).abs() < 3.0 * sigma / (N as f64).sqrt(),
            "eta={eta} mean={mean}"
        );
        assert!(
            (var / (SHOT_NOISE / eta) - 1.0).abs() < 0.05,
            "eta={eta} var={var}"
        );
    }
}

#[test]
fn energy_is_conserved_at_the_splitter() {
    let mut rng = stream(3, 0);
    for _ in 0..1000 {
        let a =
            CoherentAmplitude::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)).unwrap();
        let eta: f64 = rng.gen_range(0.0..=1.0);
        let (t, r) = beam_splitter(a, eta).unwrap();
        assert!(
            (t.norm_sqr() + r.norm_sqr() - a.norm_sqr()).abs() <= 1e-12 * a.norm_sqr().max(1.0)
        );
    }
}

proptest! {
    #[test]
    fn attenuation_composes(re in -50.0f64..50.0, im in -50.0f64..50.0, e1 in 0.0f64..=1.0, e2 in 0.0f64..=1.0) {
        let a = CoherentAmplitude::new(re, im).unwrap();
        let twice = attenuate(attenuate(a, e1).unwrap(), e2).unwrap();
        let once = attenuate(a, e1 * e2).unwrap();
        prop_assert!((twice.re - once.re).abs() <= 1e-12 * (1.0 + re.abs()));
        prop_assert!((twice.im - once.im).abs() <= 1e-12 * (1.0 + im.abs()));
    }

    #[test]
    fn transmitted_arm_is_attenuation(re in -50.0f64..50.0, im in -50.0f64..50.0, eta in 0.0f64..=1.0) {
        let a = CoherentAmplitude::new(re, im).unwrap();
        prop_assert_eq!(beam_splitter(a, eta).unwrap().0, attenuate(a, eta).unwrap());
    }
}
