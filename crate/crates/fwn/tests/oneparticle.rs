use fwn::c64;
use fwn::oneparticle::{
    gauge_block, gauge_matrix_element, gauge_matrix_element_quadrature, slice_block, Block, GaugeFunction, ModeIndex,
    Momentum, OneParticleModel, Scenario, Sign,
};
use fwn::qops::gamma_conjugate;
use proptest::prelude::*;

fn model(dim: u32, mass: f64, cutoff: u32) -> OneParticleModel {
    OneParticleModel::build(&Scenario::new(dim, mass, 2.0, cutoff).unwrap()).unwrap()
}

#[test]
fn massive_ground_state_is_the_mass_twice() {
    let m = model(1, 2.0, 8);
    assert_eq!(m.len(), 34);
    assert_eq!(m.eigenvalue(0), 2.0);
    assert_eq!(m.eigenvalue(1), 2.0);
    assert!(m.eigenvalue(2) > 2.0);
}

#[test]
fn massless_zero_mode_is_shifted() {
    let m = model(1, 0.0, 8);
    assert_eq!(m.dirac_energy(0), 0.0);
    assert_eq!(m.eigenvalue(0), 2.0);
}

#[test]
fn three_torus_first_excited_level_has_multiplicity_twelve() {
    let m = model(3, 2.0, 2);
    assert_eq!(m.len(), 250);
    let count = m.eigenvalues().iter().filter(|e| (**e - 5f64.sqrt()).abs() < 1e-12).count();
    assert_eq!(count, 12);
}

#[test]
fn eigen_equation_holds_for_every_mode() {
    for (dim, mass, cut) in [(1, 2.0, 8), (1, 0.0, 8), (3, 2.0, 2), (3, 0.0, 2)] {
        let m = model(dim, mass, cut);
        for k in 0..m.len() {
            for s in [Sign::Plus, Sign::Minus] {
                assert!(m.eigen_residual(k, s) < 1e-12, "dim {dim} mass {mass} mode {k}");
            }
        }
    }
}

#[test]
fn gauge_operator_is_hermitian_and_odd_under_gamma() {
    for (dim, mass) in [(1, 2.0), (1, 0.0), (3, 2.0), (3, 0.0)] {
        let m = model(dim, mass, if dim == 1 { 6 } else { 1 });
        let x = m.gauge_operator(&GaugeFunction::default_for(dim as usize)).unwrap().to_dense();
        assert!((&x - x.adjoint()).norm() < 1e-13);
        assert!((gamma_conjugate(&x) + &x).norm() < 1e-13);
    }
}

#[test]
fn closed_form_block_matches_spectral_slice() {
    for (dim, mass) in [(1, 2.0), (3, 0.0)] {
        let m = model(dim, mass, if dim == 1 { 6 } else { 1 });
        let g = GaugeFunction::default_for(dim as usize);
        let x = m.gauge_operator(&g).unwrap();
        for block in [Block::PlusPlus, Block::PlusMinusGamma] {
            let a = gauge_block(&m, &g, block).unwrap().to_dense();
            let b = slice_block(&x, block).to_dense();
            assert!((a - b).norm() < 1e-13);
        }
    }
}

#[test]
fn mode_outside_cutoff_is_rejected() {
    let m = model(1, 2.0, 4);
    let g = GaugeFunction::cos(1, 0);
    let inside = ModeIndex::positive(Momentum([0, 0, 0]), Sign::Plus);
    let outside = ModeIndex::positive(Momentum([9, 0, 0]), Sign::Plus);
    assert!(gauge_matrix_element(&m, &g, &outside, &inside, Block::PlusPlus).is_err());
}

#[test]
fn invalid_scenarios_are_rejected() {
    assert!(Scenario::new(2, 1.0, 2.0, 4).is_err());
    assert!(Scenario::new(1, 0.5, 1.0, 4).is_err());
    assert!(Scenario::new(1, -1.0, 2.0, 4).is_err());
    assert!(Scenario::new(1, 2.0, 2.0, 0).is_err());
}

fn gauge_1d() -> impl Strategy<Value = GaugeFunction> {
    prop::collection::vec((1i32..4, -1.0f64..1.0, -1.0f64..1.0), 1..3).prop_map(|cs| {
        let mut coeffs = vec![(Momentum([0, 0, 0]), c64(0.3, 0.0))];
        for (g, re, im) in cs {
            // Real gauge: φ̂(−γ) = conj φ̂(γ).
            coeffs.push((Momentum([g, 0, 0]), c64(re, im)));
            coeffs.push((Momentum([-g, 0, 0]), c64(re, -im)));
        }
        GaugeFunction::new(1, coeffs).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_form_matches_quadrature(g in gauge_1d(), a in -4i32..=4, b in -4i32..=4, s in any::<bool>(), t in any::<bool>(), massless in any::<bool>()) {
        let m = model(1, if massless { 0.0 } else { 2.0 }, 4);
        let sign = |x: bool| if x { Sign::Plus } else { Sign::Minus };
        let out = ModeIndex::positive(Momentum([a, 0, 0]), sign(s));
        let inp = ModeIndex::positive(Momentum([b, 0, 0]), sign(t));
        for block in [Block::PlusPlus, Block::PlusMinusGamma] {
            let cf = gauge_matrix_element(&m, &g, &out, &inp, block).unwrap();
            let qu = gauge_matrix_element_quadrature(&m, &g, &out, &inp, block).unwrap();
            prop_assert!((cf - qu).norm() < 1e-12);
        }
    }
}
