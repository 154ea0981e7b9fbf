//! Verification suites run by `fwn verify` and by the acceptance target.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::exterior::{factorial, permutations, AntisymTensor, PairingTable, Tensor};
use crate::fock::{random_fock_vector, random_fock_vector_on, Parity, MAX_MODES};
use crate::implementer::{verify_batch, BatchSpec, ImplementerBundle};
use crate::oneparticle::{Block, GaugeFunction, OneParticleModel, Quadrature, Scenario, Sign, closed_form};
use crate::qops::{
    annihilate, apply_ikop, compose_ikop, create, w_op, BiKernel, KernelOperator,
};
use crate::{FwnError, Result, C64};

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: &str, residual: f64, tol: f64) -> Self {
        Self { name: name.to_string(), residual, tol, pass: residual <= tol }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl SuiteReport {
    fn new(suite: &str, seed: u64, checks: Vec<Check>) -> Self {
        let pass = checks.iter().all(|c| c.pass);
        Self { suite: suite.to_string(), seed, checks, pass }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn max_residual(&self) -> f64 {
        self.checks.iter().map(|c| c.residual).fold(0.0, f64::max)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Suite {
    Algebra,
    Operators,
    Implementer,
}

impl Suite {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "algebra" => Some(Suite::Algebra),
            "operators" => Some(Suite::Operators),
            "implementer" => Some(Suite::Implementer),
            _ => None,
        }
    }
}

pub fn run_suite(suite: Suite, cfg: &RunConfig, seed: u64, tol: Option<f64>) -> Result<SuiteReport> {
    match suite {
        Suite::Algebra => Ok(algebra_suite(seed, tol)),
        Suite::Operators => operators_suite(cfg, seed, tol),
        Suite::Implementer => implementer_suite(cfg, seed, tol),
    }
}

fn random_tensor(rng: &mut ChaCha8Rng, degree: usize, n_modes: u32, terms: usize) -> Tensor {
    let t = (0..terms).map(|_| {
        let k: Vec<u32> = (0..degree).map(|_| rng.gen_range(0..n_modes)).collect();
        (k, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    });
    Tensor::from_terms(degree, t).expect("keys have the requested degree")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

fn as_tensor(v: &[C64]) -> AntisymTensor {
    let terms: Vec<(u32, C64)> = v.iter().enumerate().map(|(i, c)| (i as u32, *c)).collect();
    AntisymTensor::vector(&terms)
}

/// Wedge-algebra identities on random tensors over 8 modes.
pub fn algebra_suite(seed: u64, tol: Option<f64>) -> SuiteReport {
    let tol = tol.unwrap_or(1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes = 8u32;
    let (mut idem, mut dense, mut assoc, mut graded, mut det, mut ineq) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);

    for i in 0..50 {
        let d = 1 + i % 4;
        let a = random_tensor(&mut rng, d, modes, 6).antisymmetrize();
        idem = idem.max(a.to_tensor().antisymmetrize().max_abs_diff(&a));

        let (p, q, r) = (1 + i % 3, 1 + (i / 3) % 2, 1 + (i / 2) % 2);
        let x = AntisymTensor::random(&mut rng, p, modes, 4);
        let y = AntisymTensor::random(&mut rng, q, modes, 4);
        let z = AntisymTensor::random(&mut rng, r, modes, 4);
        dense = dense.max(x.to_tensor().outer(&y.to_tensor()).antisymmetrize().max_abs_diff(&x.wedge(&y)));
        assoc = assoc.max(x.wedge(&y).wedge(&z).max_abs_diff(&x.wedge(&y.wedge(&z))));
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        graded = graded.max(x.wedge(&y).max_abs_diff(&y.wedge(&x).scale(C64::new(sign, 0.0))));
    }

    for k in 1..=4usize {
        for _ in 0..10 {
            let f: Vec<Vec<C64>> = (0..k).map(|_| random_vec(&mut rng, modes as usize)).collect();
            let g: Vec<Vec<C64>> = (0..k).map(|_| random_vec(&mut rng, modes as usize)).collect();
            let wedge_all = |vs: &[Vec<C64>]| {
                vs.iter().fold(AntisymTensor::scalar(ONE), |acc, v| acc.wedge(&as_tensor(v)))
            };
            let lhs = wedge_all(&f).inner_product(&wedge_all(&g)).expect("same degree") * factorial(k);
            let gram = |i: usize, j: usize| -> C64 { f[i].iter().zip(&g[j]).map(|(a, b)| a.conj() * b).sum() };
            let rhs: C64 = permutations(k)
                .into_iter()
                .map(|(p, s)| (0..k).map(|i| gram(i, p[i])).product::<C64>() * s)
                .sum();
            det = det.max((lhs - rhs).norm() / rhs.norm().max(1.0));
        }
    }

    for i in 0..200 {
        let x = AntisymTensor::random(&mut rng, 1 + i % 3, modes, 5);
        let y = AntisymTensor::random(&mut rng, 1 + (i / 3) % 3, modes, 5);
        ineq = ineq.max(x.wedge(&y).norm0() - x.norm0() * y.norm0());
    }

    SuiteReport::new(
        "algebra",
        seed,
        vec![
            Check::new("antisymmetrizer_idempotent", idem, tol),
            Check::new("wedge_matches_dense_antisymmetrization", dense, tol),
            Check::new("wedge_associative", assoc, tol),
            Check::new("wedge_graded_commutative", graded, tol),
            Check::new("determinant_inner_product", det, tol),
            Check::new("wedge_norm_inequality", ineq.max(0.0), tol),
        ],
    )
}

/// Pairing on 8 toy modes: `J` swaps `(0 1)(2 3)(4 5)(6 7)` with phases `1, i, 1, −1`.
pub fn toy_pairing() -> PairingTable {
    let ph = [ONE, C64::new(0.0, 1.0), ONE, -ONE];
    let j = (0..8u32).map(|a| (a ^ 1, ph[(a / 2) as usize])).collect();
    PairingTable::new(j).expect("toy pairing is admissible")
}

fn basis_vec(n: usize, i: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[i] = ONE;
    v
}

/// CAR relations on the 8-mode toy basis and `W(f)² = 1`.
pub fn car_checks(seed: u64, tol: f64) -> Result<Vec<Check>> {
    let pairing = toy_pairing();
    let support: Vec<u32> = (0..8).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xCA5);
    let (mut mixed, mut cc, mut aa) = (0f64, 0f64, 0f64);
    for t in 0..4 {
        let v = random_fock_vector_on(&support, 6, None, 6, seed.wrapping_add(t))?.with_max_particles(8);
        for i in 0..8 {
            let ei = basis_vec(8, i);
            for j in 0..8 {
                let ej = basis_vec(8, j);
                let ad_a = create(&ei, &annihilate(&ej, &v, &pairing))
                    .axpy(ONE, &annihilate(&ej, &create(&ei, &v), &pairing));
                mixed = mixed.max(ad_a.axpy(-pairing.pair(j as u32, i as u32), &v).norm0());
                cc = cc.max(create(&ei, &create(&ej, &v)).axpy(ONE, &create(&ej, &create(&ei, &v))).norm0());
                let a2 = annihilate(&ei, &annihilate(&ej, &v, &pairing), &pairing)
                    .axpy(ONE, &annihilate(&ej, &annihilate(&ei, &v, &pairing), &pairing));
                aa = aa.max(a2.norm0());
            }
        }
    }
    let mut w2 = 0f64;
    for t in 0..50u64 {
        let mut f = random_vec(&mut rng, 8);
        let n = f.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        f.iter_mut().for_each(|c| *c /= n);
        let v = random_fock_vector_on(&support, 7, None, 4, seed.wrapping_add(100 + t))?.with_max_particles(8);
        let ww = w_op(&f, &w_op(&f, &v, &pairing)?, &pairing)?;
        w2 = w2.max(ww.sub(&v).norm0());
    }
    Ok(vec![
        Check::new("car_adag_a_pairing_delta", mixed, tol),
        Check::new("car_adag_adag_zero", cc, tol),
        Check::new("car_a_a_zero", aa, tol),
        Check::new("w_squared_identity", w2, tol),
    ])
}

/// Model used by Fock-space checks: the scenario itself, or its cutoff-1 version
/// when it has more than 128 modes.
pub fn fock_model(scenario: &Scenario) -> Result<OneParticleModel> {
    let model = OneParticleModel::build(scenario)?;
    if model.len() <= MAX_MODES {
        return Ok(model);
    }
    OneParticleModel::build(&scenario.with_cutoff(1))
}

fn random_kernel(rng: &mut ChaCha8Rng, out: usize, inp: usize, support: &[u32]) -> BiKernel {
    let mut k = BiKernel::zero(out, inp);
    for _ in 0..4 {
        let mut pick = |d: usize| -> Vec<u32> {
            let mut v: Vec<u32> = Vec::new();
            while v.len() < d {
                let m = support[rng.gen_range(0..support.len())];
                if !v.contains(&m) {
                    v.push(m);
                }
            }
            v
        };
        let (p, q) = (pick(out), pick(inp));
        k.add_term(&p, &q, C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    }
    k
}

/// Ξ identities against products of creation and annihilation operators, and `compose_ikop`.
pub fn xi_checks(model: &OneParticleModel, max_particles: usize, seed: u64, tol: f64) -> Result<Vec<Check>> {
    let pairing = model.pairing();
    let n = model.len();
    let radius = model.scenario().mode_cutoff.min(3);
    let support = crate::fock::bulk_modes(model, radius);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED);
    let one = AntisymTensor::scalar(ONE);
    let (mut e10, mut e01, mut e11, mut ec) = (0f64, 0f64, 0f64, 0f64);
    let labels = [(1usize, 0usize), (0, 1), (1, 1)];
    for t in 0..50u64 {
        let sparse = |rng: &mut ChaCha8Rng| {
            let mut v = vec![C64::new(0.0, 0.0); n];
            for &s in &support {
                v[s as usize] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            }
            v
        };
        let (f, g) = (sparse(&mut rng), sparse(&mut rng));
        let (ft, gt) = (as_tensor(&f), as_tensor(&g));
        let v = random_fock_vector(model, max_particles, Some(Parity::Even), radius, seed.wrapping_add(t))?;
        let wide = v.clone().with_max_particles(max_particles + 4);

        let k10 = BiKernel::from_tensors(&ft.wedge(&gt), &one);
        e10 = e10.max(apply_ikop(1, 0, &k10, &wide, &pairing)?.sub(&create(&f, &create(&g, &wide))).norm0());
        let k01 = BiKernel::from_tensors(&one, &ft.wedge(&gt));
        let rhs = annihilate(&f, &annihilate(&g, &v, &pairing), &pairing);
        e01 = e01.max(apply_ikop(0, 1, &k01, &v, &pairing)?.sub(&rhs).norm0());
        let k11 = KernelOperator::single(BiKernel::from_tensors(&ft, &gt));
        e11 = e11.max(k11.apply(&v, &pairing).sub(&create(&f, &annihilate(&g, &v, &pairing))).norm0());

        let (l, m) = labels[(t % 3) as usize];
        let (lp, mp) = labels[((t / 3) % 3) as usize];
        let kappa = random_kernel(&mut rng, 2 * l, 2 * m, &support);
        let lambda = random_kernel(&mut rng, 2 * lp, 2 * mp, &support);
        let composed = compose_ikop(l, m, &kappa, lp, mp, &lambda, &pairing)?.apply(&wide, &pairing);
        let inner = apply_ikop(lp, mp, &lambda, &wide, &pairing)?;
        let nested = apply_ikop(l, m, &kappa, &inner, &pairing)?;
        ec = ec.max(composed.sub(&nested).norm0());
    }
    Ok(vec![
        Check::new("xi10_equals_adag_adag", e10, tol),
        Check::new("xi01_equals_a_a", e01, tol),
        Check::new("xi11_dgamma_kernel_equals_adag_a", e11, tol),
        Check::new("compose_equals_apply_apply", ec, tol),
    ])
}

/// Largest Dirac eigen-equation residual over all positive and negative modes.
pub fn eigen_residual_max(model: &OneParticleModel) -> f64 {
    (0..model.len())
        .map(|k| model.eigen_residual(k, Sign::Plus).max(model.eigen_residual(k, Sign::Minus)))
        .fold(0.0, f64::max)
}

/// Largest `|closed form − quadrature|` over all mode pairs and both blocks,
/// relative to the largest element magnitude.
pub fn matrix_element_residual(model: &OneParticleModel, gauge: &GaugeFunction) -> Result<f64> {
    let q = Quadrature::new(model, gauge)?;
    let (mut diff, mut scale) = (0f64, 0f64);
    for block in [Block::PlusPlus, Block::PlusMinusGamma] {
        for a in model.modes() {
            for b in model.modes() {
                let cf = closed_form(model.dim(), model.scenario().mass, gauge, a, b, block);
                let qu = q.element(a, b, block)?;
                diff = diff.max((cf - qu).norm());
                scale = scale.max(qu.norm());
            }
        }
    }
    Ok(if scale == 0.0 { diff } else { diff / scale })
}

/// Gauge functions used by the matrix-element oracle.
pub fn oracle_gauges(dim: usize) -> Vec<GaugeFunction> {
    let axis = if dim == 1 { 0 } else { 1 };
    vec![GaugeFunction::cos(dim, axis), GaugeFunction::cos_plus_half_cos2(dim, axis)]
}

pub fn operators_suite(cfg: &RunConfig, seed: u64, tol: Option<f64>) -> Result<SuiteReport> {
    let model = OneParticleModel::build(&cfg.scenario)?;
    let gauge = cfg.gauge_function()?;
    let mut checks = car_checks(seed, tol.unwrap_or(1e-12))?;
    let fm = fock_model(&cfg.scenario)?;
    checks.extend(xi_checks(&fm, cfg.fock.max_particles, seed, tol.unwrap_or(1e-10))?);
    checks.push(Check::new("dirac_eigen_residual", eigen_residual_max(&model), tol.unwrap_or(1e-12)));
    checks.push(Check::new(
        "matrix_element_closed_form_vs_quadrature",
        matrix_element_residual(&model, &gauge)?,
        tol.unwrap_or(1e-10),
    ));
    Ok(SuiteReport::new("operators", seed, checks))
}

/// Bulk radius leaving room for the gauge bandwidth and two further shifts.
pub fn bulk_radius(scenario: &Scenario, gauge: &GaugeFunction) -> u32 {
    (scenario.mode_cutoff as i32 - gauge.bandwidth() - 2).max(0) as u32
}

pub fn implementer_suite(cfg: &RunConfig, seed: u64, tol: Option<f64>) -> Result<SuiteReport> {
    let tol = tol.unwrap_or(1e-9);
    let model = OneParticleModel::build(&cfg.scenario)?;
    if model.len() > MAX_MODES {
        return Err(FwnError::ModeLimit(model.len()));
    }
    let gauge = cfg.gauge_function()?;
    let bundle = ImplementerBundle::build(&model, &gauge, &[])?;
    let spec = BatchSpec {
        inputs: 100,
        max_particles: cfg.fock.max_particles,
        bulk_radius: bulk_radius(&cfg.scenario, &gauge),
        seed,
    };
    let rep = verify_batch(&bundle, &model, &spec)?;
    let checks = vec![
        Check::new("quadratic_commutator_even", rep.quadratic_even, tol),
        Check::new("quadratic_commutator_odd", rep.quadratic_odd, tol),
        Check::new("single_commutator_mixed", rep.single_mixed, tol),
        Check::new("q_commutator_even", rep.q_even, tol),
        Check::new("q_commutator_odd", rep.q_odd, tol),
        Check::new("odd_sector_matches_even_operator", bundle.diagnostics.odd_mismatch, tol),
        Check::new("no_truncation", if rep.leaked { 1.0 } else { 0.0 }, 0.0),
    ];
    Ok(SuiteReport::new("implementer", seed, checks))
}
