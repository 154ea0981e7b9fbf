use fwn::exterior::{factorial, permutations, AntisymTensor, Tensor};
use fwn::{c64, C64};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const MODES: u32 = 8;

fn random(seed: u64, degree: usize) -> AntisymTensor {
    AntisymTensor::random(&mut ChaCha8Rng::seed_from_u64(seed), degree, MODES, 4)
}

fn vector(v: &[C64]) -> AntisymTensor {
    let terms: Vec<(u32, C64)> = v.iter().enumerate().map(|(i, c)| (i as u32, *c)).collect();
    AntisymTensor::vector(&terms)
}

fn cvec() -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c64(a, b)), MODES as usize)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wedge_is_associative(s in any::<u64>(), p in 0usize..3, q in 0usize..3, r in 0usize..3) {
        let (x, y, z) = (random(s, p), random(s ^ 1, q), random(s ^ 2, r));
        prop_assert!(x.wedge(&y).wedge(&z).max_abs_diff(&x.wedge(&y.wedge(&z))) < 1e-12);
    }

    #[test]
    fn wedge_is_graded_commutative(s in any::<u64>(), p in 0usize..4, q in 0usize..4) {
        let (x, y) = (random(s, p), random(s ^ 7, q));
        let sign = if p * q % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(x.wedge(&y).max_abs_diff(&y.wedge(&x).scale(c64(sign, 0.0))) < 1e-12);
    }

    #[test]
    fn antisymmetrizer_is_idempotent(s in any::<u64>(), d in 1usize..5) {
        let a = random(s, d);
        prop_assert!(a.to_tensor().antisymmetrize().max_abs_diff(&a) < 1e-12);
    }

    #[test]
    fn wedge_matches_dense_antisymmetrization(s in any::<u64>(), p in 1usize..3, q in 1usize..3) {
        let (x, y) = (random(s, p), random(s ^ 3, q));
        let dense = x.to_tensor().outer(&y.to_tensor()).antisymmetrize();
        prop_assert!(dense.max_abs_diff(&x.wedge(&y)) < 1e-12);
    }

    #[test]
    fn wedge_norm_is_submultiplicative(f in cvec(), g in cvec()) {
        let (a, b) = (vector(&f), vector(&g));
        prop_assert!(a.wedge(&b).norm0() <= a.norm0() * b.norm0() * (1.0 + 1e-12));
    }

    #[test]
    fn inner_product_is_a_gram_determinant(fs in prop::collection::vec(cvec(), 3), gs in prop::collection::vec(cvec(), 3)) {
        let wedge_all = |vs: &[Vec<C64>]| vs.iter().fold(AntisymTensor::scalar(c64(1.0, 0.0)), |acc, v| acc.wedge(&vector(v)));
        let lhs = wedge_all(&fs).inner_product(&wedge_all(&gs)).unwrap() * factorial(3);
        let gram = |i: usize, j: usize| -> C64 { fs[i].iter().zip(&gs[j]).map(|(a, b)| a.conj() * b).sum() };
        let rhs: C64 = permutations(3).into_iter().map(|(p, s)| (0..3).map(|i| gram(i, p[i])).product::<C64>() * s).sum();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1.0));
    }
}

#[test]
fn basis_wedge_sign() {
    let a = AntisymTensor::basis(&[2]).wedge(&AntisymTensor::basis(&[1]));
    assert_eq!(a.get(&[1, 2]), c64(-1.0, 0.0));
    assert!(AntisymTensor::basis(&[1]).wedge(&AntisymTensor::basis(&[1])).is_empty());
}

#[test]
fn repeated_slot_antisymmetrizes_to_zero() {
    assert!(Tensor::basis(&[3, 3]).antisymmetrize().is_empty());
}

#[test]
fn inner_product_rejects_degree_mismatch() {
    assert!(AntisymTensor::basis(&[1]).inner_product(&AntisymTensor::basis(&[1, 2])).is_err());
}
