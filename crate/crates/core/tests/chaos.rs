use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use srbp_core::chaos::*;
use srbp_core::PotentialSpec;
use std::f64::consts::PI;

fn small_space(max_level: usize) -> ChaosSpace {
    let grid = ChaosGrid::half_offset(3, 2, 0.8).unwrap();
    ChaosSpace::new(grid, PotentialSpec::unit(3), max_level).unwrap()
}

fn medium_space(max_level: usize) -> ChaosSpace {
    let grid = ChaosGrid::half_offset(3, 4, 0.6).unwrap();
    ChaosSpace::new(grid, PotentialSpec::unit(3), max_level).unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

#[test]
fn literal_rho2_matches_closed_form() {
    let r = rho2_quadrature(&PotentialSpec::unit(3), Rho2Convention::Literal).unwrap();
    let exact = 4.0 * PI / 3.0 * (PI / 2.0).sqrt();
    assert!((r.value - exact).abs() < 1e-6, "{} vs {exact}", r.value);
    assert!((r.value - 5.24987).abs() < 1e-5);
}

#[test]
fn derivation_rho2_is_four_thirds_in_three_dimensions() {
    let r = rho2_quadrature(&PotentialSpec::unit(3), Rho2Convention::Derivation).unwrap();
    assert!((r.value - 4.0 / 3.0).abs() < 1e-9, "{}", r.value);
    assert!((r.literal * r.scale - r.value).abs() < 1e-15);
}

#[test]
fn rho2_scales_with_amplitude_and_width() {
    // ∫|p|^{-2} V̂ scales as A w²
    let base = rho2_quadrature(&PotentialSpec::unit(3), Rho2Convention::Literal).unwrap().value;
    let spec = PotentialSpec::gaussian(3, 2.5, 1.7).unwrap();
    let r = rho2_quadrature(&spec, Rho2Convention::Literal).unwrap().value;
    assert!((r - base * 2.5 * 1.7 * 1.7).abs() < 1e-8 * r);
}

#[test]
fn four_dimensional_rho2() {
    // d = 4: (1/4) 2π² ∫ r e^{-r²/2} dr = π²/2
    let r = rho2_quadrature(&PotentialSpec::unit(4), Rho2Convention::Literal).unwrap();
    assert!((r.value - PI * PI / 2.0).abs() < 1e-8, "{}", r.value);
}

#[test]
fn sector_constant_matches_closed_form() {
    let s = sector_constant(&PotentialSpec::unit(3)).unwrap();
    let exact = 4.0 * PI * (PI / 2.0).sqrt();
    assert!((s.c2 - exact).abs() < 1e-6, "{} vs {exact}", s.c2);
    assert!((s.c2 - 15.74961).abs() < 1e-5);
    assert_eq!(s.argmax, 0.0);
    assert!(s.profile.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
}

#[test]
fn sector_profile_general_dimension_agrees_with_closed_angular_form() {
    // the nested-quadrature branch for d = 4 at s = 0 equals S_3 ∫ r e^{-r²/2} dr = 2π²
    let f0 = sector_profile(&PotentialSpec::unit(4), 0.0).unwrap();
    assert!((f0 - 2.0 * PI * PI).abs() < 1e-7, "{f0}");
}

#[test]
fn creation_and_annihilation_are_adjoint() {
    let sp = small_space(3);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 0..3 {
        for l in 0..3 {
            for _ in 0..20 {
                let u = sp.random_symmetric(n, &mut rng);
                let v = sp.random_symmetric(n + 1, &mut rng);
                let lhs = sp.inner(&sp.creation(&u, l), &v);
                let rhs = sp.inner(&u, &sp.annihilation(&v, l));
                assert!(rel(lhs, rhs) < 1e-10, "n={n} l={l}: {lhs} vs {rhs}");
            }
        }
    }
}

#[test]
fn skew_parts_are_negative_adjoints() {
    let sp = small_space(3);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 0..3 {
        for _ in 0..20 {
            let u = sp.random_symmetric(n, &mut rng);
            let v = sp.random_symmetric(n + 1, &mut rng);
            let lhs = sp.inner(&sp.a_plus(&u), &v);
            let rhs = -sp.inner(&u, &sp.a_minus(&v));
            assert!(rel(lhs, rhs) < 1e-10, "n={n}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn generator_symmetric_part_is_nonpositive_and_skew_part_is_skew() {
    let sp = small_space(3);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let mut u = sp.zero_stack(3);
        for n in 0..=3 {
            u.levels[n] = sp.random_symmetric(n, &mut rng);
        }
        let gu = sp.generator(&u);
        let q = sp.stack_inner(&u, &gu);
        // Re(u, Gu) = (u, ½Δ u) ≤ 0; A contributes only an imaginary part
        let mut sym = Complex64::new(0.0, 0.0);
        for n in 0..=3 {
            sym += sp.inner(&u.levels[n], &sp.delta(&u.levels[n])) * 0.5;
        }
        assert!(q.re <= 1e-12);
        assert!((q.re - sym.re).abs() < 1e-10 * sym.re.abs().max(1.0));
    }
}

#[test]
fn grading_and_vanishing_on_low_levels() {
    let sp = small_space(3);
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in 0..3 {
        let u = sp.random_symmetric(n, &mut rng);
        assert_eq!(sp.a_plus(&u).level, n + 1);
        assert_eq!(sp.creation(&u, 0).level, n + 1);
        if n > 0 {
            assert_eq!(sp.annihilation(&u, 0).level, n - 1);
            assert_eq!(sp.a_minus(&u).level, n - 1);
        }
        if n <= 1 {
            let am = sp.a_minus(&u);
            assert!(am.values.iter().all(|v| *v == Complex64::new(0.0, 0.0)), "level {n}");
        }
    }
    let vac = sp.random_symmetric(0, &mut rng);
    assert!(sp.nabla(&vac, 0).values.iter().all(|v| v.norm() == 0.0));
}

#[test]
fn aligned_grid_nabla_block_norm_is_one() {
    for l in 0..3 {
        let pts: Vec<Vec<f64>> = [0.5, -0.5, 1.25, -1.25]
            .iter()
            .map(|&v| {
                let mut p = vec![0.0; 3];
                p[l] = v;
                p
            })
            .collect();
        let grid = ChaosGrid::from_points(3, &pts, &[0.3; 4]).unwrap();
        let sp = ChaosSpace::new(grid, PotentialSpec::unit(3), 3).unwrap();
        for n in 1..=3 {
            let r = nabla_block_report(&sp, n, l);
            assert!((r.norm - 1.0).abs() < 1e-6, "l={l} n={n}: {}", r.norm);
        }
    }
}

#[test]
fn fast_sector_operator_matches_composition() {
    let sp = medium_space(3);
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for n in 1..=2 {
        let mut u = sp.random_symmetric(n, &mut rng);
        sp.mask(&mut u);
        let fast = sector_apply(&sp, &u);
        let slow = sp.s_inv_sqrt(&sp.a_plus(&sp.s_inv_sqrt(&u)));
        let err = fast
            .values
            .iter()
            .zip(&slow.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = slow.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-12 * scale, "n={n}: {err} vs {scale}");
        let w = sp.random_symmetric(n + 1, &mut rng);
        let lhs = sp.inner(&fast, &w);
        let rhs = sp.inner(&u, &sector_adjoint(&sp, n, &w));
        assert!(rel(lhs, rhs) < 1e-10);
    }
}

#[test]
fn drift_norm_approaches_one_third() {
    let grid = ChaosGrid::half_offset(3, 16, 0.5).unwrap();
    let sp = ChaosSpace::new(grid, PotentialSpec::unit(3), 1).unwrap();
    let f = sp.drift(0);
    let n2 = sp.inner(&f, &f).re;
    assert!((n2 - 1.0 / 3.0).abs() < 0.01, "{n2}");
}

#[test]
fn level_one_resolvent_matches_closed_form() {
    let sp = medium_space(2);
    let f = drift_stack(&sp, 1, 0);
    let opts = ResolventOptions::default();
    for &lam in &[1.0, 0.1, 0.01] {
        let s = solve_resolvent(&sp, lam, &f, &opts).unwrap();
        let exact = level1_pairing(&sp, lam, &f.levels[1]);
        assert!((s.pairing - exact).abs() <= 1e-9 * exact, "{lam}: {} vs {exact}", s.pairing);
        assert!(s.residual <= opts.tol);
    }
}

#[test]
fn resolvent_residual_is_small_with_coupling() {
    let sp = medium_space(2);
    let f = drift_stack(&sp, 2, 1);
    let s = solve_resolvent(&sp, 0.05, &f, &ResolventOptions::default()).unwrap();
    assert!(s.residual <= 1e-10);
    assert!(s.pairing > 0.0);
    // coupling to level 2 lowers the pairing below the level-1 truncation
    let l1 = level1_pairing(&sp, 0.05, &f.levels[1]);
    assert!(s.pairing <= l1 * (1.0 + 1e-9));
}

#[test]
fn sigma2_reports_truncation_diagnostic() {
    let sp = medium_space(2);
    let lams = lambda_sequence(0.04, 2.0, 4);
    let r = sigma2_kv(&sp, &lams, 2, 0, &ResolventOptions::default()).unwrap();
    assert!(r.sigma2 >= 1.0);
    let d = r.truncation_diagnostic.unwrap();
    assert!((d - (r.sigma2 - r.sigma2_lower_truncation.unwrap()).abs()).abs() < 1e-15);
    assert_eq!(r.table.len(), 4);
}

#[test]
fn invalid_resolvent_inputs_are_rejected() {
    let sp = small_space(2);
    let f = drift_stack(&sp, 1, 0);
    assert!(solve_resolvent(&sp, 0.0, &f, &ResolventOptions::default()).is_err());
    assert!(solve_resolvent(&sp, -1.0, &f, &ResolventOptions::default()).is_err());
    let deep = drift_stack(&small_space(3), 3, 0);
    assert!(solve_resolvent(&sp, 1.0, &deep, &ResolventOptions::default()).is_err());
    assert!(sigma2_kv(&sp, &[0.1], 1, 0, &ResolventOptions::default()).is_err());
}

#[test]
fn sector_norm_is_positive_and_reports_iterations() {
    let sp = medium_space(1);
    let r = graded_sector_norm(&sp, 1, &PowerOptions::default()).unwrap();
    assert!(r.norm > 0.0 && r.iterations > 1);
    assert!(r.residual <= 1e-4);
    assert!(graded_sector_norm(&sp, 0, &PowerOptions::default()).is_err());
}

#[test]
fn creation_norm_bound() {
    // ‖a*_l u‖² ≤ (n+1) ‖∂_l δ‖² ‖u‖² and the bound is nearly attained on level 0
    let sp = medium_space(1);
    let r0 = creation_norm(&sp, 0, 0, &PowerOptions::default()).unwrap();
    let f = sp.drift(0);
    let d2 = sp.inner(&f, &f).re;
    assert!((r0.norm * r0.norm - d2).abs() < 1e-8 * d2);
    let r1 = creation_norm(&sp, 1, 0, &PowerOptions::default()).unwrap();
    assert!(r1.norm * r1.norm <= 2.0 * d2 * (1.0 + 1e-6));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn symmetrize_is_idempotent(seed in any::<u64>(), n in 0usize..=3) {
        let sp = small_space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = sp.random_symmetric(n, &mut rng);
        prop_assert!(sp.is_symmetric(&u));
        let s = sp.symmetrize(&u);
        prop_assert!(sp.is_symmetric(&s));
        for (a, b) in s.values.iter().zip(&u.values) {
            prop_assert!((a - b).norm() <= 1e-14 * (1.0 + b.norm()));
        }
    }

    #[test]
    fn a_plus_preserves_symmetry(seed in any::<u64>(), n in 0usize..=2) {
        let sp = small_space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = sp.random_symmetric(n, &mut rng);
        prop_assert!(sp.is_symmetric(&sp.a_plus(&u)));
    }

    #[test]
    fn delta_is_nonpositive(seed in any::<u64>(), n in 1usize..=3) {
        let sp = small_space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = sp.random_symmetric(n, &mut rng);
        prop_assert!(sp.inner(&u, &sp.delta(&u)).re <= 0.0);
    }
}
