use fwn::exterior::AntisymTensor;
use fwn::fock::{random_fock_vector, random_fock_vector_on, sector_split, FockVector, Parity};
use fwn::oneparticle::{OneParticleModel, Scenario};
use fwn::qops::{
    annihilate, anticommutator_check, apply_ikop, apply_ikop_definitional, compose_ikop, create, dgamma2,
    second_quantization, w_op, BiKernel, KernelOperator,
};
use fwn::suites::{car_checks, toy_pairing, xi_checks};
use fwn::{c64, C64};
use nalgebra::DMatrix;
use proptest::prelude::*;

const ONE: C64 = C64::new(1.0, 0.0);

fn small_model() -> OneParticleModel {
    OneParticleModel::build(&Scenario::new(1, 2.0, 2.0, 3).unwrap()).unwrap()
}

fn cvec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c64(a, b)), n)
}

fn toy_vector(seed: u64, parity: Option<Parity>) -> FockVector {
    let support: Vec<u32> = (0..8).collect();
    random_fock_vector_on(&support, 5, parity, 5, seed).unwrap().with_max_particles(8)
}

#[test]
fn car_suite_passes() {
    assert!(car_checks(3, 1e-12).unwrap().iter().all(|c| c.pass));
}

#[test]
fn left_removal_convention() {
    let pairing = fwn::exterior::PairingTable::identity(4);
    let mut e1 = vec![C64::new(0.0, 0.0); 4];
    e1[1] = ONE;
    let v = FockVector::basis(&[1, 2], 4);
    let out = annihilate(&e1, &v, &pairing);
    assert!(out.sub(&FockVector::basis(&[2], 4)).norm0() < 1e-15);
}

#[test]
fn xi_identities_and_composition() {
    for c in xi_checks(&small_model(), 4, 11, 1e-10).unwrap() {
        assert!(c.pass, "{} residual {}", c.name, c.residual);
    }
}

#[test]
fn fast_and_definitional_kernel_application_agree() {
    let m = small_model();
    let pairing = m.pairing();
    let n = m.len() as u32;
    let v = random_fock_vector(&m, 4, Some(Parity::Even), 2, 5).unwrap().with_max_particles(6);
    let mut k = BiKernel::zero(2, 2);
    k.add_term(&[0, 3], &[1, 2], c64(0.5, -0.2));
    k.add_term(&[4, n - 1], &[0, 5], c64(-1.0, 0.3));
    let fast = apply_ikop(1, 1, &k, &v, &pairing).unwrap();
    let slow = apply_ikop_definitional(1, 1, &k, &v, &pairing).unwrap();
    assert!(fast.sub(&slow).norm0() < 1e-12);
}

#[test]
fn kernel_application_rejects_odd_vectors_and_wrong_bidegree() {
    let m = small_model();
    let pairing = m.pairing();
    let odd = FockVector::basis(&[0], 4);
    let k = BiKernel::zero(2, 2);
    assert!(apply_ikop(1, 1, &k, &odd, &pairing).is_err());
    assert!(apply_ikop(1, 0, &k, &FockVector::vacuum(4), &pairing).is_err());
}

#[test]
fn compose_matches_nested_application() {
    let m = small_model();
    let pairing = m.pairing();
    let v = random_fock_vector(&m, 2, Some(Parity::Even), 2, 9).unwrap().with_max_particles(6);
    let mut a = BiKernel::zero(2, 0);
    a.add_term(&[1, 2], &[], c64(1.0, 0.5));
    let mut b = BiKernel::zero(0, 2);
    b.add_term(&[], &[0, 3], c64(0.3, -1.0));
    let composed = compose_ikop(1, 0, &a, 0, 1, &b, &pairing).unwrap().apply(&v, &pairing);
    let nested = apply_ikop(1, 0, &a, &apply_ikop(0, 1, &b, &v, &pairing).unwrap(), &pairing).unwrap();
    assert!(composed.sub(&nested).norm0() < 1e-12);
}

#[test]
fn second_quantized_identity_is_the_number_operator() {
    let m = small_model();
    let pairing = m.pairing();
    let k = KernelOperator::single(second_quantization(&DMatrix::identity(m.len(), m.len()), &pairing));
    for d in 1..=4usize {
        let modes: Vec<u32> = (0..d as u32).collect();
        let v = FockVector::basis(&modes, 4);
        assert!((k.apply(&v, &pairing).inner(&v).re - d as f64).abs() < 1e-12);
    }
}

#[test]
fn pair_kernel_counts_pairs_not_particles() {
    // The two-slot kernel of dΓ(1) acts as N(N−1) on Ξ₁₁, which equals N only on two particles.
    let m = small_model();
    let pairing = m.pairing();
    let k = dgamma2(&DMatrix::identity(m.len(), m.len()), &pairing);
    for (d, want) in [(2usize, 2.0), (4, 12.0)] {
        let modes: Vec<u32> = (0..d as u32).collect();
        let v = FockVector::basis(&modes, 4);
        let got = apply_ikop(1, 1, &k, &v, &pairing).unwrap().inner(&v).re;
        assert!((got - want).abs() < 1e-12, "degree {d}: {got}");
    }
}

#[test]
fn w_requires_unit_vector() {
    let pairing = toy_pairing();
    assert!(w_op(&[c64(2.0, 0.0); 8], &FockVector::vacuum(4), &pairing).is_err());
}

#[test]
fn sector_split_recombines() {
    let v = toy_vector(4, None);
    let (e, o) = sector_split(&v);
    assert_eq!(e.parity(), Some(Parity::Even));
    assert_eq!(o.parity(), Some(Parity::Odd));
    assert!(e.axpy(ONE, &o).sub(&v).norm0() < 1e-15);
}

#[test]
fn truncation_is_flagged() {
    let v = FockVector::basis(&[0, 1], 2);
    let mut f = vec![C64::new(0.0, 0.0); 8];
    f[5] = ONE;
    assert!(create(&f, &v).truncated());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mixed_anticommutator_is_the_pairing(f in cvec(8), g in cvec(8), seed in any::<u64>()) {
        let v = toy_vector(seed, None);
        prop_assert!(anticommutator_check(&f, &g, &v, &toy_pairing()) < 1e-12);
    }

    #[test]
    fn creators_anticommute(f in cvec(8), g in cvec(8), seed in any::<u64>()) {
        let v = toy_vector(seed, None);
        let s = create(&f, &create(&g, &v)).axpy(ONE, &create(&g, &create(&f, &v)));
        prop_assert!(s.norm0() < 1e-12);
    }

    #[test]
    fn w_squares_to_one(f in cvec(8), seed in any::<u64>()) {
        let n = f.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        prop_assume!(n > 1e-3);
        let f: Vec<C64> = f.iter().map(|c| c / n).collect();
        let pairing = toy_pairing();
        let v = toy_vector(seed, None);
        let ww = w_op(&f, &w_op(&f, &v, &pairing).unwrap(), &pairing).unwrap();
        prop_assert!(ww.sub(&v).norm0() < 1e-12);
    }

    #[test]
    fn xi10_of_a_wedge_is_two_creators(f in cvec(8), g in cvec(8), seed in any::<u64>()) {
        let pairing = toy_pairing();
        let v = toy_vector(seed, Some(Parity::Even));
        let vec_of = |x: &[C64]| AntisymTensor::vector(&x.iter().enumerate().map(|(i, c)| (i as u32, *c)).collect::<Vec<_>>());
        let k = BiKernel::from_tensors(&vec_of(&f).wedge(&vec_of(&g)), &AntisymTensor::scalar(ONE));
        let lhs = apply_ikop(1, 0, &k, &v, &pairing).unwrap();
        prop_assert!(lhs.sub(&create(&f, &create(&g, &v))).norm0() < 1e-12);
    }
}
