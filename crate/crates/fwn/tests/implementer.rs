use fwn::config::RunConfig;
use fwn::fock::{random_fock_vector, Parity};
use fwn::implementer::{
    ad_matrix, kernels_from_matrix, o_residual, printed_odd_k10, random_kvector, verify_batch, verify_single_commutator,
    w_matrix, BatchSpec, ImplementerBundle,
};
use fwn::oneparticle::{GaugeFunction, KVector, OneParticleModel, Scenario};
use fwn::qops::{field_apply, KernelOperator};
use fwn::suites::{bulk_radius, implementer_suite};
use fwn::FwnError;
use nalgebra::DVector;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(mass: f64, cutoff: u32) -> OneParticleModel {
    OneParticleModel::build(&Scenario::new(1, mass, 2.0, cutoff).unwrap()).unwrap()
}

#[test]
fn small_batches_pass_in_both_scenarios() {
    for mass in [2.0, 0.0] {
        let m = model(mass, 5);
        let g = GaugeFunction::cos(1, 0);
        let bundle = ImplementerBundle::build(&m, &g, &[0.5]).unwrap();
        assert!(bundle.diagnostics.odd_mismatch < 1e-12);
        let spec = BatchSpec { inputs: 12, max_particles: 4, bulk_radius: bulk_radius(m.scenario(), &g), seed: 3 };
        let rep = verify_batch(&bundle, &m, &spec).unwrap();
        assert!(!rep.leaked);
        assert!(rep.max() < 1e-9, "mass {mass}: {rep:?}");
    }
}

#[test]
fn zero_gauge_gives_exactly_zero_residuals() {
    let mut cfg = RunConfig::preset("massive1d").unwrap();
    cfg.gauge.coefficients.clear();
    cfg.scenario.mode_cutoff = 4;
    let rep = implementer_suite(&cfg, 1, None).unwrap();
    assert!(rep.pass);
    assert!(rep.checks.iter().all(|c| c.residual == 0.0), "{:?}", rep.checks);
}

#[test]
fn large_mode_counts_are_refused() {
    let m = OneParticleModel::build(&Scenario::new(3, 2.0, 2.0, 2).unwrap()).unwrap();
    let r = ImplementerBundle::build(&m, &GaugeFunction::default_for(3), &[]);
    assert!(matches!(r, Err(FwnError::ModeLimit(250))));
}

#[test]
fn printed_odd_sign_breaks_the_commutator() {
    let m = model(2.0, 5);
    let g = GaugeFunction::cos(1, 0);
    let pairing = m.pairing();
    let w = w_matrix(m.len(), 0);
    let y = &w * m.gauge_operator(&g).unwrap().to_dense() * &w;
    let derived = kernels_from_matrix(&m, &y);
    let mut printed = derived.clone();
    printed.k10 = printed_odd_k10(&m, &g, 0).unwrap();
    assert!(printed.k10.max_abs_diff(&derived.k10) > 1e-3);

    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_kvector(&m, 2, &mut rng);
    let v = random_fock_vector(&m, 2, Some(Parity::Even), 2, 2).unwrap().with_max_particles(5);
    let yx = KVector::from_flat((&y * DVector::from_vec(x.flat())).as_slice());
    let residual = |op: &KernelOperator| {
        let lhs = op.apply(&field_apply(&x, &v), &pairing).sub(&field_apply(&x, &op.apply(&v, &pairing)));
        lhs.sub(&field_apply(&yx, &v)).norm0()
    };
    assert!(residual(&derived.operator()) < 1e-12);
    assert!(residual(&printed.operator()) > 1e-3);
}

#[test]
fn ad_of_skew_generator_stays_skew() {
    let m = model(2.0, 3);
    let x = m.gauge_operator(&GaugeFunction::cos(1, 0)).unwrap().to_dense();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (f, h) = (random_kvector(&m, 3, &mut rng), random_kvector(&m, 3, &mut rng));
    let pairs = fwn::qops::y_from_pair(&f, &h);
    let y = fwn::qops::QOperator { pairs }.matrix();
    assert!(o_residual(&y) < 1e-12);
    assert!(o_residual(&ad_matrix(&x, &y)) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn single_field_commutator_holds(seed in any::<u64>(), massless in any::<bool>()) {
        let m = model(if massless { 0.0 } else { 2.0 }, 4);
        let g = GaugeFunction::cos(1, 0);
        let bundle = ImplementerBundle::build(&m, &g, &[]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random_kvector(&m, 1, &mut rng);
        let v = random_fock_vector(&m, 3, None, 1, seed).unwrap();
        let r = verify_single_commutator(&bundle, &x, &v).unwrap();
        prop_assert!(!r.leaked);
        prop_assert!(r.value < 1e-9);
    }
}
