use lpl_core::exponents::LevyTriplet;
use lpl_core::mc::Summary;
use lpl_core::perpetuity::{
    check_as_finiteness, check_moment_finiteness, estimate_abs_moment, sample_perpetuity, DiscretePairs, IterationRule,
    LevyPairs,
};
use lpl_core::sampler::SamplerConfig;
use lpl_core::{DensityLaw, DensityPiece, LevyMeasure, Verdict};

fn kesten() -> LevyTriplet {
    LevyTriplet::new(1.0, 1.0, LevyMeasure::zero(), LevyMeasure::atom(1.0, 1.0).unwrap()).unwrap()
}

#[test]
fn kesten_triplet_verdicts() {
    let t = kesten();
    assert!(check_as_finiteness(&t).holds());
    for (p, holds) in [(0.5, true), (1.0, true), (1.99, true), (2.5, false)] {
        assert_eq!(check_moment_finiteness(&t, p).unwrap().holds(), holds, "p = {p}");
    }
    let boundary = check_moment_finiteness(&t, 2.0).unwrap();
    assert_eq!(boundary.verdict, Verdict::Fails);
    assert!(boundary.boundary());
}

#[test]
fn heavy_payments_break_moments_but_not_finiteness() {
    // Λ₂ with tail y^{-2.5}: p-moments exist only for p < 1.5.
    let l2 = LevyMeasure::density(DensityPiece::new(1.0, f64::INFINITY, DensityLaw::Power { c: 1.0, alpha: 2.5 })).unwrap();
    let t = LevyTriplet::new(1.0, 2.0, LevyMeasure::zero(), l2).unwrap();
    assert!(check_as_finiteness(&t).holds());
    assert!(check_moment_finiteness(&t, 1.0).unwrap().holds());
    let r = check_moment_finiteness(&t, 1.75).unwrap();
    assert!(!r.holds());
    assert_eq!(r.component("laplace_exponent_negative").unwrap().verdict, Verdict::Holds);
}

#[test]
fn monte_carlo_mean_matches_closed_form() {
    let source = LevyPairs::new(&kesten(), &SamplerConfig::default()).unwrap();
    let est = estimate_abs_moment(&source, 1.0, 20_000, IterationRule::adaptive(), 77).unwrap();
    assert!((est.estimate - 2.0).abs() <= 3.0 * est.std_error, "{} ± {}", est.estimate, est.std_error);
    assert_eq!(est.n_overflowed, 0);
}

#[test]
fn discrete_pairs_match_geometric_oracle() {
    // M ∈ {0.5, 0.8} w.p. 1/2, Q ≡ 1: E S = 1 / (1 − E M) = 1 / 0.35.
    let source = DiscretePairs::new(&[(0.5, 1.0, 0.5), (0.8, 1.0, 0.5)]).unwrap();
    let batch = sample_perpetuity(&source, 20_000, IterationRule::Fixed(200), 5).unwrap();
    let s = Summary::from_slice(&batch.values());
    let target = 1.0 / 0.35;
    assert!((s.mean - target).abs() <= 3.0 * s.std_error(), "{} ± {}", s.mean, s.std_error());
    assert!(source.moment_criterion(2.0).holds());
}

#[test]
fn batches_do_not_depend_on_thread_count() {
    let source = LevyPairs::new(&kesten(), &SamplerConfig::default()).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| sample_perpetuity(&source, 500, IterationRule::Fixed(50), 9).unwrap());
    let b = four.install(|| sample_perpetuity(&source, 500, IterationRule::Fixed(50), 9).unwrap());
    assert_eq!(a.values(), b.values());
}
