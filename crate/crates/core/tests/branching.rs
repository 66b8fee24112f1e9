use lpl_core::branching::{
    check_lp_criterion, check_spine_identity, check_ui_criterion, sample_martingale, simulate_population, verify_many_to_one,
    BranchingChars, OffspringAtom,
};
use lpl_core::exponents::kappa_real;
use lpl_core::rng::SeedRecord;

fn mixed() -> BranchingChars {
    BranchingChars::new(
        0.5,
        0.2,
        vec![
            OffspringAtom::new(1.0, vec![0.3, -0.2]).unwrap(),
            OffspringAtom::new(0.4, vec![]).unwrap(),
            OffspringAtom::new(0.3, vec![1.5, 0.0, -1.0]).unwrap(),
        ],
        0.6,
    )
    .unwrap()
}

#[test]
fn many_to_one_on_mixed_offspring() {
    let c = mixed();
    for z in [0.0, 0.6] {
        let r = verify_many_to_one(&c, z, 1.0, 10_000, 1_000_000, 21).unwrap();
        assert_eq!(r.n_truncated, 0);
        assert!(r.z_score.abs() < 3.0, "z = {z}: {} ± {} vs {}", r.estimate, r.std_error, r.rhs);
        let direct = (kappa_real(&c, z)).exp();
        assert!((r.rhs - direct).abs() < 1e-12);
    }
}

#[test]
fn martingale_has_unit_mean() {
    let c = mixed();
    let batch = sample_martingale(&c, &[0.5, 1.0, 1.5], 10_000, 1_000_000, 22).unwrap();
    for (t, s) in batch.times.iter().zip(batch.summaries()) {
        assert!((s.mean - 1.0).abs() <= 3.0 * s.std_error(), "t = {t}: {} ± {}", s.mean, s.std_error());
    }
}

#[test]
fn spine_side_matches_population_side() {
    let chk = check_spine_identity(&mixed(), 1.0, 10_000, 1_000_000, 23).unwrap();
    assert!(chk.z_score.abs() < 3.0, "{chk:?}");
}

#[test]
fn criteria_on_mixed_offspring_are_consistent() {
    let c = mixed();
    let ui = check_ui_criterion(&c);
    let l2 = check_lp_criterion(&c, 2.0).unwrap();
    // L2 convergence implies uniform integrability.
    assert!(!l2.holds() || ui.holds());
}

#[test]
fn population_is_reproducible() {
    let c = BranchingChars::bbm(1.0);
    let a = simulate_population(&c, 3.0, 100_000, SeedRecord::new(4, 2)).unwrap();
    let b = simulate_population(&c, 3.0, 100_000, SeedRecord::new(4, 2)).unwrap();
    assert_eq!(a, b);
    let mut csv = Vec::new();
    a.write_csv(3.0, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert_eq!(text.lines().next(), Some("label,birth_time,position_at_t"));
    assert_eq!(text.lines().count() - 1, a.size_at(3.0).unwrap());
}
