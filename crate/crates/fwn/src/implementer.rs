//! Implementers `M_X` of the gauge derivation `B(x) ↦ B(Xx)` on the truncated Fock space.
//!
//! The even-sector operator is `dΓ(P₊XP₊) + Ξ₁₀(κ₁₀) + Ξ₀₁(κ₀₁)` with
//! `κ₁₀ = ½Σₙ P₊XP₋Γeₙ ∧ eₙ` and `κ₀₁ = ½Σₙ P₊JXJP₋Γeₙ ∧ eₙ`. The odd sector is
//! `W(e₁) M̃ W(e₁) − c`, where `M̃` is the even construction for `w X w` and the
//! constant `c` aligns both sectors so that single-field commutators hold on
//! mixed-parity vectors.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::exterior::{AntisymTensor, PairingTable};
use crate::fock::{bulk_modes, random_fock_vector, sector_split, FockVector, Occupation, Parity, MAX_MODES};
use crate::oneparticle::{GaugeFunction, KOperator, KVector, OneParticleModel};
use crate::qops::{
    dgamma2, field_apply, gamma_conjugate, q_finite_rank, second_quantization, w_op, BiKernel, CompiledOp,
    KernelOperator, NormalOrdered, QOperator,
};
use crate::{FwnError, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Kernels of the even-sector implementer.
#[derive(Clone, Debug)]
pub struct EvenKernels {
    /// Single-slot `(1,1)` kernel of `dΓ(P₊XP₊)`.
    pub k11: BiKernel,
    pub k10: BiKernel,
    pub k01: BiKernel,
}

impl EvenKernels {
    pub fn operator(&self) -> KernelOperator {
        KernelOperator {
            terms: [&self.k11, &self.k10, &self.k01].into_iter().filter(|k| !k.is_zero()).cloned().collect(),
            scalar: ZERO,
        }
    }
}

fn column(xd: &DMatrix<C64>, x: &KVector) -> KVector {
    KVector::from_flat((xd * nalgebra::DVector::from_vec(x.flat())).as_slice())
}

/// Even construction for a dense operator on `K` (basis `{e_k, Γe_k}`).
pub fn kernels_from_matrix(model: &OneParticleModel, xd: &DMatrix<C64>) -> EvenKernels {
    let n = model.len();
    let pairing = model.pairing();
    let xpp = xd.view((0, 0), (n, n)).into_owned();
    let mut k10 = AntisymTensor::zero(2);
    let mut k01 = AntisymTensor::zero(2);
    for m in 0..n {
        let gm = KVector::negative_basis(n, m);
        let col = column(xd, &gm);
        let jxj = model.apply_j(&column(xd, &model.apply_j(&gm)));
        for r in 0..n {
            if r == m {
                continue;
            }
            if col.plus[r] != ZERO {
                k10.add_term(&[r as u32, m as u32], col.plus[r] * 0.5);
            }
            if jxj.plus[r] != ZERO {
                k01.add_term(&[r as u32, m as u32], jxj.plus[r] * 0.5);
            }
        }
    }
    let one = AntisymTensor::scalar(ONE);
    EvenKernels {
        k11: second_quantization(&xpp, &pairing),
        k10: BiKernel::from_tensors(&k10, &one),
        k01: BiKernel::from_tensors(&one, &k01),
    }
}

pub fn build_even_kernels(model: &OneParticleModel, gauge: &GaugeFunction) -> Result<EvenKernels> {
    Ok(kernels_from_matrix(model, &model.gauge_operator(gauge)?.to_dense()))
}

/// Pair kernel `(1₂⊗dΓ(P₊XP₊)⁽²⁾)*τ`. Its `Ξ₁₁` matches `dΓ(P₊XP₊)` on two particles only.
pub fn pair_kernel(model: &OneParticleModel, gauge: &GaugeFunction) -> Result<BiKernel> {
    let n = model.len();
    let xd = model.gauge_operator(gauge)?.to_dense();
    Ok(dgamma2(&xd.view((0, 0), (n, n)).into_owned(), &model.pairing()))
}

/// `w(f) = 1 − |(1+Γ)f⟩⟨(1+Γ)f|` for a unit positive mode `f = e_k`.
pub fn w_matrix(n: usize, f_mode: usize) -> DMatrix<C64> {
    let mut u = KVector::positive_basis(n, f_mode);
    u.minus[f_mode] = ONE;
    let u = nalgebra::DVector::from_vec(u.flat());
    DMatrix::identity(2 * n, 2 * n) - &u * u.adjoint()
}

/// `M̃` for the odd sector: the even construction applied to `w(e₁) X w(e₁)`.
pub fn build_odd_kernels(model: &OneParticleModel, gauge: &GaugeFunction, f_mode: usize) -> Result<KernelOperator> {
    if f_mode >= model.len() {
        return Err(FwnError::ModeOutside(format!("mode {f_mode}")));
    }
    let w = w_matrix(model.len(), f_mode);
    let xd = model.gauge_operator(gauge)?.to_dense();
    Ok(kernels_from_matrix(model, &(&w * xd * &w)).operator())
}

/// `κ₁₀` of the odd sector with the sign `+½P₊Xe₁∧e₁` on the `n = 1` term as printed.
///
/// The derived construction has `−½P₊Xe₁∧e₁`; this variant exists so tests can
/// show the printed sign breaks the commutator identity.
pub fn printed_odd_k10(model: &OneParticleModel, gauge: &GaugeFunction, f_mode: usize) -> Result<BiKernel> {
    let n = model.len();
    let xd = model.gauge_operator(gauge)?.to_dense();
    let w = w_matrix(n, f_mode);
    let xt = &w * &xd * &w;
    let mut k10 = AntisymTensor::zero(2);
    let first = column(&xd, &KVector::positive_basis(n, f_mode));
    for r in 0..n {
        if r != f_mode && first.plus[r] != ZERO {
            k10.add_term(&[r as u32, f_mode as u32], first.plus[r] * 0.5);
        }
    }
    for m in (0..n).filter(|&m| m != f_mode) {
        let col = column(&xt, &KVector::negative_basis(n, m));
        for r in (0..n).filter(|&r| r != m) {
            if col.plus[r] != ZERO {
                k10.add_term(&[r as u32, m as u32], col.plus[r] * 0.5);
            }
        }
    }
    Ok(BiKernel::from_tensors(&k10, &AntisymTensor::scalar(ONE)))
}

/// Residual of one verification together with its truncation flag.
#[derive(Copy, Clone, Debug, Default, PartialEq, Serialize)]
pub struct Residual {
    pub value: f64,
    /// Set when a component above the particle cap was dropped; the value is then advisory.
    pub leaked: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelNorm {
    pub p: f64,
    pub k11: f64,
    pub k10: f64,
    pub k01: f64,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub kernel_norms: Vec<KernelNorm>,
    /// Constant separating `W(e₁)M̃W(e₁)` from the even operator on odd vectors.
    pub odd_shift: [f64; 2],
    /// Largest non-scalar coefficient of `W(e₁)M̃W(e₁) − M⁺ − c` in normal order.
    pub odd_mismatch: f64,
}

/// `M_X` with its compiled sectors and the truncated `π(X)`.
pub struct ImplementerBundle {
    pub even_op: KernelOperator,
    pub odd_conjugated_op: KernelOperator,
    pub f_mode: usize,
    pub diagnostics: Diagnostics,
    x: KOperator,
    pairing: PairingTable,
    even: CompiledOp,
    odd: CompiledOp,
    odd_shift: C64,
    n: usize,
}

fn w_normal_ordered(f_mode: usize) -> NormalOrdered {
    let mut w = NormalOrdered::default();
    let f = Occupation::from_modes(&[f_mode as u32]);
    w.add_term(f, Occupation::EMPTY, ONE);
    w.add_term(Occupation::EMPTY, f, ONE);
    w
}

impl ImplementerBundle {
    pub fn build(model: &OneParticleModel, gauge: &GaugeFunction, p_values: &[f64]) -> Result<Self> {
        if model.len() > MAX_MODES {
            return Err(FwnError::ModeLimit(model.len()));
        }
        let x = model.gauge_operator(gauge)?;
        let pairing = model.pairing();
        let kernels = kernels_from_matrix(model, &x.to_dense());
        let even_op = kernels.operator();
        let f_mode = 0;
        let odd_conjugated_op = build_odd_kernels(model, gauge, f_mode)?;

        let even_no = even_op.to_normal_ordered(&pairing);
        let w = w_normal_ordered(f_mode);
        let odd_no = w.compose(&odd_conjugated_op.to_normal_ordered(&pairing)).compose(&w);
        let scalar = |no: &NormalOrdered| {
            no.terms().get(&(Occupation::EMPTY, Occupation::EMPTY)).copied().unwrap_or_default()
        };
        let odd_shift = scalar(&odd_no) - scalar(&even_no);
        let mut mismatch: f64 = 0.0;
        for (k, c) in odd_no.terms() {
            if *k != (Occupation::EMPTY, Occupation::EMPTY) {
                mismatch = mismatch.max((c - even_no.terms().get(k).copied().unwrap_or_default()).norm());
            }
        }
        for (k, c) in even_no.terms() {
            if *k != (Occupation::EMPTY, Occupation::EMPTY) && !odd_no.terms().contains_key(k) {
                mismatch = mismatch.max(c.norm());
            }
        }

        let ev = model.eigenvalues();
        let kernel_norms = p_values
            .iter()
            .map(|&p| KernelNorm {
                p,
                k11: kernels.k11.weighted_norm(p, ev),
                k10: kernels.k10.weighted_norm(p, ev),
                k01: kernels.k01.weighted_norm(p, ev),
            })
            .collect();
        Ok(Self {
            even: even_no.compile(),
            odd: odd_conjugated_op.compile(&pairing),
            even_op,
            odd_conjugated_op,
            f_mode,
            diagnostics: Diagnostics {
                kernel_norms,
                odd_shift: [odd_shift.re, odd_shift.im],
                odd_mismatch: mismatch,
            },
            x,
            pairing,
            odd_shift,
            n: model.len(),
        })
    }

    pub fn x(&self) -> &KOperator {
        &self.x
    }

    pub fn pairing(&self) -> &PairingTable {
        &self.pairing
    }

    fn e1(&self) -> Vec<C64> {
        let mut f = vec![ZERO; self.n];
        f[self.f_mode] = ONE;
        f
    }

    /// `M⁺ v` for even `v`.
    pub fn apply_even(&self, v: &FockVector) -> Result<FockVector> {
        if v.parity() != Some(Parity::Even) {
            return Err(FwnError::Sector("M⁺ acts on even vectors".into()));
        }
        Ok(self.even.apply(v))
    }

    /// `M⁻ v = W(e₁) M̃ W(e₁) v − c v` for odd `v`.
    pub fn apply_odd(&self, v: &FockVector) -> Result<FockVector> {
        if v.parity() != Some(Parity::Odd) && !v.is_empty() {
            return Err(FwnError::Sector("M⁻ acts on odd vectors".into()));
        }
        let e1 = self.e1();
        // W(e₁) raises the degree before M̃ acts; two more particles keep it exact.
        let cap = v.max_particles();
        let wide = v.clone().with_max_particles(cap + 2);
        let inner = w_op(&e1, &wide, &self.pairing)?;
        let out = w_op(&e1, &self.odd.apply(&inner), &self.pairing)?;
        Ok(out.axpy(-self.odd_shift, &wide).truncate(cap))
    }

    /// `M_X = M⁺ ⊕ M⁻` on a vector of any parity.
    pub fn apply(&self, v: &FockVector) -> Result<FockVector> {
        let (even, odd) = sector_split(v);
        Ok(self.apply_even(&even)?.axpy(ONE, &self.apply_odd(&odd)?))
    }

    pub fn x_apply(&self, x: &KVector) -> KVector {
        self.x.apply(x)
    }
}

fn residual(diff: &FockVector, leaked: bool) -> Residual {
    Residual { value: diff.norm0(), leaked: leaked || diff.truncated() }
}

/// Gives `v` room for the operators applied during a verification.
fn headroom(v: &FockVector, extra: usize) -> FockVector {
    let top = v.degrees().last().copied().unwrap_or(0);
    v.clone().with_max_particles(v.max_particles().max(top + extra))
}

/// `‖[M, π(B(x)B(y))]v − π(B(Xx)B(y) + B(x)B(Xy))v‖₀`; `v` must have a single parity.
pub fn verify_quadratic_commutator(bundle: &ImplementerBundle, x: &KVector, y: &KVector, v: &FockVector) -> Result<Residual> {
    if v.parity().is_none() {
        return Err(FwnError::Sector("quadratic check needs a vector of one parity".into()));
    }
    let v = headroom(v, 4);
    let bb = |a: &KVector, b: &KVector, u: &FockVector| field_apply(a, &field_apply(b, u));
    let lhs = bundle.apply(&bb(x, y, &v))?.sub(&bb(x, y, &bundle.apply(&v)?));
    let (xx, xy) = (bundle.x_apply(x), bundle.x_apply(y));
    let rhs = bb(&xx, y, &v).axpy(ONE, &bb(x, &xy, &v));
    Ok(residual(&lhs.sub(&rhs), false))
}

/// `‖M π(B(x)) v − π(B(x)) M v − π(B(Xx)) v‖₀` for `v` of any parity.
pub fn verify_single_commutator(bundle: &ImplementerBundle, x: &KVector, v: &FockVector) -> Result<Residual> {
    let v = headroom(v, 3);
    let lhs = bundle.apply(&field_apply(x, &v))?.sub(&field_apply(x, &bundle.apply(&v)?));
    Ok(residual(&lhs.sub(&field_apply(&bundle.x_apply(x), &v)), false))
}

/// Rank data of `ad(X)(Y) = XY − YX` for `Y = Σ(gᵢ,·)fᵢ` and Hermitian `X`.
pub fn ad_rank_data(bundle: &ImplementerBundle, pairs: &[(KVector, KVector)]) -> Vec<(KVector, KVector)> {
    let mut out = Vec::with_capacity(2 * pairs.len());
    for (f, g) in pairs {
        out.push((bundle.x_apply(f), g.clone()));
        out.push((f.scale(-ONE), bundle.x_apply(g)));
    }
    out
}

/// `‖[M, q(Y)]v − q(ad(X)Y)v‖₀`.
pub fn verify_q_commutator(
    bundle: &ImplementerBundle,
    pairs: Vec<(KVector, KVector)>,
    v: &FockVector,
) -> Result<Residual> {
    let ad = ad_rank_data(bundle, &pairs);
    let q = q_finite_rank(pairs)?;
    let qa = QOperator { pairs: ad };
    let v = headroom(v, 4);
    let lhs = bundle.apply(&q.apply(&v))?.sub(&q.apply(&bundle.apply(&v)?));
    Ok(residual(&lhs.sub(&qa.apply(&v)), false))
}

/// Dense `ad(X)(Y)` for matrix-level cross-checks.
pub fn ad_matrix(x: &DMatrix<C64>, y: &DMatrix<C64>) -> DMatrix<C64> {
    x * y - y * x
}

/// `‖ΓY†Γ + Y‖`, which vanishes exactly on `C ⊗ o(K,Γ)`.
pub fn o_residual(y: &DMatrix<C64>) -> f64 {
    (gamma_conjugate(&y.adjoint()) + y).norm()
}

/// Random vector of `K` supported on the bulk positive and negative modes.
pub fn random_kvector(model: &OneParticleModel, bulk_radius: u32, rng: &mut impl Rng) -> KVector {
    let mut x = KVector::zero(model.len());
    for b in bulk_modes(model, bulk_radius) {
        let b = b as usize;
        x.plus[b] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        x.minus[b] = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    x
}

/// Settings of a verification batch.
#[derive(Clone, Debug)]
pub struct BatchSpec {
    pub inputs: usize,
    pub max_particles: usize,
    pub bulk_radius: u32,
    pub seed: u64,
}

/// Maximum residuals of a verification batch.
#[derive(Clone, Debug, Default, Serialize)]
pub struct BatchReport {
    pub inputs: usize,
    pub quadratic_even: f64,
    pub quadratic_odd: f64,
    pub single_mixed: f64,
    pub q_even: f64,
    pub q_odd: f64,
    pub leaked: bool,
}

impl BatchReport {
    pub fn max(&self) -> f64 {
        [self.quadratic_even, self.quadratic_odd, self.single_mixed, self.q_even, self.q_odd]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Runs all three identities over `spec.inputs` random inputs per sector in parallel.
pub fn verify_batch(bundle: &ImplementerBundle, model: &OneParticleModel, spec: &BatchSpec) -> Result<BatchReport> {
    let rows: Vec<Result<[Residual; 5]>> = (0..spec.inputs)
        .into_par_iter()
        .map(|i| {
            let seed = spec.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_kvector(model, spec.bulk_radius, &mut rng);
            let y = random_kvector(model, spec.bulk_radius, &mut rng);
            let ve = random_fock_vector(model, spec.max_particles, Some(Parity::Even), spec.bulk_radius, seed)?;
            let vo = random_fock_vector(model, spec.max_particles, Some(Parity::Odd), spec.bulk_radius, seed ^ 1)?;
            let mixed = ve.axpy(ONE, &vo);
            let pairs = crate::qops::y_from_pair(&x, &y);
            Ok([
                verify_quadratic_commutator(bundle, &x, &y, &ve)?,
                verify_quadratic_commutator(bundle, &x, &y, &vo)?,
                verify_single_commutator(bundle, &x, &mixed)?,
                verify_q_commutator(bundle, pairs.clone(), &ve)?,
                verify_q_commutator(bundle, pairs, &vo)?,
            ])
        })
        .collect();
    let mut rep = BatchReport { inputs: spec.inputs, ..Default::default() };
    for r in rows {
        let r = r?;
        rep.quadratic_even = rep.quadratic_even.max(r[0].value);
        rep.quadratic_odd = rep.quadratic_odd.max(r[1].value);
        rep.single_mixed = rep.single_mixed.max(r[2].value);
        rep.q_even = rep.q_even.max(r[3].value);
        rep.q_odd = rep.q_odd.max(r[4].value);
        rep.leaked |= r.iter().any(|x| x.leaked);
    }
    Ok(rep)
}
