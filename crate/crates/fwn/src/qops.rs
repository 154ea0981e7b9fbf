//! Quantized operators on the truncated Fock space.
//!
//! Every operator here reduces to normal-ordered monomials
//! `a†_{p₁}⋯a†_{p_c} a_{q_a}⋯a_{q₁}` with `p` and `q` increasing, stored as
//! occupation pairs `(P, Q)`. On `e_I = s·e_Q∧e_R` the monomial `(P, Q)` gives
//! `s·e_P∧e_R`. Kernels [`BiKernel`] are translated into monomials through the
//! bilinear pairing; the translation was derived against the definitional
//! contraction route and is locked by tests.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rustc_hash::FxHashMap;

use crate::exterior::{factorial, sort_with_sign, AntisymTensor, Key, PairingTable, Tensor};
use crate::fock::{FockVector, Occupation, Parity, MAX_MODES};
use crate::oneparticle::{KVector, OneParticleModel};
use crate::{FwnError, Result, C64};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn parity_sign(n: u32) -> f64 {
    if n.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// `Σ_j f_j a†_j v`.
pub fn create(f: &[C64], v: &FockVector) -> FockVector {
    let mut out = FockVector::zero(v.max_particles());
    if v.truncated() {
        out.mark_truncated();
    }
    let nz: Vec<(u32, C64)> = f.iter().enumerate().filter(|(_, c)| **c != ZERO).map(|(j, c)| (j as u32, *c)).collect();
    for (&o, &c) in v.amps() {
        for &(j, fj) in &nz {
            if !o.contains(j) {
                out.add(Occupation(o.0 | 1u128 << j), c * fj * parity_sign(o.below(j)));
            }
        }
    }
    out.prune();
    out
}

/// `Σ_j c_j a_j v` with the usual (Hilbert-space) annihilators `a_j = a†_j*`.
pub fn annihilate_coeffs(c: &[C64], v: &FockVector) -> FockVector {
    let mut out = FockVector::zero(v.max_particles());
    if v.truncated() {
        out.mark_truncated();
    }
    let nz: Vec<(u32, C64)> = c.iter().enumerate().filter(|(_, x)| **x != ZERO).map(|(j, x)| (j as u32, *x)).collect();
    for (&o, &amp) in v.amps() {
        for &(j, cj) in &nz {
            if o.contains(j) {
                out.add(Occupation(o.0 & !(1u128 << j)), amp * cj * parity_sign(o.below(j)));
            }
        }
    }
    out.prune();
    out
}

/// Annihilator `a(f)` for the bilinear pairing: `a(f) = Σ_a f_a conj(ω_a) a_{Ja}`.
pub fn annihilate(f: &[C64], v: &FockVector, pairing: &PairingTable) -> FockVector {
    let mut c = vec![ZERO; f.len()];
    for (a, fa) in f.iter().enumerate() {
        let (ja, w) = pairing.j(a as u32);
        c[ja as usize] += fa * w.conj();
    }
    annihilate_coeffs(&c, v)
}

/// `‖{a†(f), a(g)}v − ⟨g,f⟩v‖₀`.
pub fn anticommutator_check(f: &[C64], g: &[C64], v: &FockVector, pairing: &PairingTable) -> f64 {
    let lhs = create(f, &annihilate(g, v, pairing)).axpy(ONE, &annihilate(g, &create(f, v), pairing));
    lhs.axpy(-pairing.bilinear(g, f), v).norm0()
}

/// `W(f) = a†(f) + a(Jf)`; requires `(f,f) = 1`.
pub fn w_op(f: &[C64], v: &FockVector, pairing: &PairingTable) -> Result<FockVector> {
    let n: f64 = f.iter().map(|c| c.norm_sqr()).sum();
    if (n - 1.0).abs() > 1e-10 {
        return Err(FwnError::NotNormalized(n));
    }
    let jf = pairing.apply_j(f);
    Ok(create(f, v).axpy(ONE, &annihilate(&jf, v, pairing)))
}

/// `π(B(x)) = a†(P₊x) + a(JP₊Γx)`, which in the basis `{e_k, Γe_k}` is
/// `Σ x⁺_k a†_k + Σ x⁻_k a_k`.
pub fn field_apply(x: &KVector, v: &FockVector) -> FockVector {
    create(&x.plus, v).axpy(ONE, &annihilate_coeffs(&x.minus, v))
}

/// `π(B(x))` evaluated literally through `J` and the bilinear annihilator.
pub fn field_apply_literal(x: &KVector, v: &FockVector, model: &OneParticleModel) -> FockVector {
    let pairing = model.pairing();
    let p_gamma = x.gamma();
    let j = model.apply_j(&KVector { plus: p_gamma.plus, minus: vec![ZERO; x.len()] });
    create(&x.plus, v).axpy(ONE, &annihilate(&j.plus, v, &pairing))
}

/// Sum of normal-ordered monomials.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct NormalOrdered {
    terms: FxHashMap<(Occupation, Occupation), C64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
enum Op {
    Create(u32),
    Annihilate(u32),
}

impl NormalOrdered {
    pub fn add_term(&mut self, p: Occupation, q: Occupation, c: C64) {
        *self.terms.entry((p, q)).or_default() += c;
    }

    pub fn terms(&self) -> &FxHashMap<(Occupation, Occupation), C64> {
        &self.terms
    }

    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    fn word(p: Occupation, q: Occupation) -> Vec<Op> {
        let mut w: Vec<Op> = p.modes().into_iter().map(Op::Create).collect();
        w.extend(q.modes().into_iter().rev().map(Op::Annihilate));
        w
    }

    fn order(ops: &mut Vec<Op>, coeff: C64, out: &mut NormalOrdered) {
        let pos = ops.windows(2).position(|w| matches!((w[0], w[1]), (Op::Annihilate(_), Op::Create(_))));
        match pos {
            None => {
                let cr: Vec<u32> =
                    ops.iter().filter_map(|o| if let Op::Create(j) = o { Some(*j) } else { None }).collect();
                let an: Vec<u32> =
                    ops.iter().filter_map(|o| if let Op::Annihilate(j) = o { Some(*j) } else { None }).collect();
                let Some((cs, s1)) = sort_with_sign(&cr) else { return };
                // Annihilators are stored in decreasing order.
                let rev: Vec<u32> = an.iter().rev().copied().collect();
                let Some((qs, s2)) = sort_with_sign(&rev) else { return };
                out.add_term(Occupation::from_modes(&cs), Occupation::from_modes(&qs), coeff * (s1 * s2));
            }
            Some(i) => {
                let (Op::Annihilate(x), Op::Create(y)) = (ops[i], ops[i + 1]) else { unreachable!() };
                if x == y {
                    let mut rest = ops.clone();
                    rest.drain(i..i + 2);
                    Self::order(&mut rest, coeff, out);
                }
                ops.swap(i, i + 1);
                Self::order(ops, -coeff, out);
            }
        }
    }

    /// Operator product `self · other`, normal ordered.
    pub fn compose(&self, other: &NormalOrdered) -> NormalOrdered {
        let mut out = NormalOrdered::default();
        for (&(p1, q1), &c1) in &self.terms {
            for (&(p2, q2), &c2) in &other.terms {
                let mut w = Self::word(p1, q1);
                w.extend(Self::word(p2, q2));
                Self::order(&mut w, c1 * c2, &mut out);
            }
        }
        out.prune(0.0);
        out
    }

    pub fn compile(&self) -> CompiledOp {
        let mut by_q: FxHashMap<Occupation, Vec<(Occupation, C64)>> = FxHashMap::default();
        let mut sizes = Vec::new();
        for (&(p, q), &c) in &self.terms {
            if c == ZERO {
                continue;
            }
            by_q.entry(q).or_default().push((p, c));
            if !sizes.contains(&q.degree()) {
                sizes.push(q.degree());
            }
        }
        for v in by_q.values_mut() {
            v.sort_by_key(|x| x.0);
        }
        sizes.sort_unstable();
        CompiledOp { by_q, sizes }
    }
}

/// Monomials grouped by annihilated set for fast application.
#[derive(Clone, Debug, Default)]
pub struct CompiledOp {
    by_q: FxHashMap<Occupation, Vec<(Occupation, C64)>>,
    sizes: Vec<usize>,
}

fn subsets_of_size(modes: &[u32], k: usize, f: &mut impl FnMut(u128)) {
    fn rec(modes: &[u32], k: usize, start: usize, acc: u128, f: &mut impl FnMut(u128)) {
        if k == 0 {
            f(acc);
            return;
        }
        for i in start..=modes.len() - k {
            rec(modes, k - 1, i + 1, acc | 1u128 << modes[i], f);
        }
    }
    if k <= modes.len() {
        rec(modes, k, 0, 0, f);
    }
}

#[inline]
fn extraction_sign(set: u128, rest: u128) -> f64 {
    let mut x = set;
    let mut n = 0u32;
    while x != 0 {
        let t = x.trailing_zeros();
        n += (rest & ((1u128 << t) - 1)).count_ones();
        x &= x - 1;
    }
    parity_sign(n)
}

impl CompiledOp {
    pub fn apply(&self, v: &FockVector) -> FockVector {
        let mut out = FockVector::zero(v.max_particles());
        if v.truncated() {
            out.mark_truncated();
        }
        for (&o, &amp) in v.amps() {
            let modes = o.modes();
            for &a in &self.sizes {
                subsets_of_size(&modes, a, &mut |q| {
                    if let Some(list) = self.by_q.get(&Occupation(q)) {
                        let rest = o.0 & !q;
                        let sq = extraction_sign(q, rest);
                        for &(p, c) in list {
                            if p.0 & rest != 0 {
                                continue;
                            }
                            let sp = extraction_sign(p.0, rest);
                            out.add(Occupation(p.0 | rest), amp * c * (sq * sp));
                        }
                    }
                });
            }
        }
        out.prune();
        out
    }
}

/// Kernel `κ = Σ k_{P,Q} e_P^∧ ⊗ e_Q^∧` with `|P| = out_degree`, `|Q| = in_degree`.
///
/// The integral kernel operator of a kernel with slot bidegree `(c, a)` is
/// `φ_N ↦ (N!/(N−a)!) 𝒜(κ ⌟ φ_N)`, where in-slot `a+1−r` of `κ` is paired with
/// slot `r` of `φ_N`. For `(c, a) = (2l, 2m)` this is `Ξ_{l,m}(κ)`; the slot
/// bidegree `(1, 1)` realizes second quantization `dΓ(B)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BiKernel {
    out_degree: usize,
    in_degree: usize,
    coeffs: BTreeMap<(Key, Key), C64>,
}

impl BiKernel {
    pub fn zero(out_degree: usize, in_degree: usize) -> Self {
        Self { out_degree, in_degree, coeffs: BTreeMap::new() }
    }

    /// `f ⊗ g` style product of antisymmetric factors.
    pub fn from_tensors(out: &AntisymTensor, inp: &AntisymTensor) -> Self {
        let mut k = Self::zero(out.degree(), inp.degree());
        for (p, a) in out.coeffs() {
            for (q, b) in inp.coeffs() {
                k.coeffs.insert((p.clone(), q.clone()), a * b);
            }
        }
        k.prune();
        k
    }

    /// Adds `c·e_P^∧⊗e_Q^∧` for unsorted keys.
    pub fn add_term(&mut self, p: &[u32], q: &[u32], c: C64) {
        assert_eq!((p.len(), q.len()), (self.out_degree, self.in_degree));
        let (Some((ps, s1)), Some((qs, s2))) = (sort_with_sign(p), sort_with_sign(q)) else { return };
        *self.coeffs.entry((ps, qs)).or_default() += c * (s1 * s2);
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| *c != ZERO);
    }

    pub fn out_degree(&self) -> usize {
        self.out_degree
    }

    pub fn in_degree(&self) -> usize {
        self.in_degree
    }

    pub fn coeffs(&self) -> &BTreeMap<(Key, Key), C64> {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut k = self.clone();
        k.coeffs.values_mut().for_each(|x| *x *= c);
        k.prune();
        k
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for (k, x) in &self.coeffs {
            m = m.max((x - other.coeffs.get(k).copied().unwrap_or_default()).norm());
        }
        for (k, y) in &other.coeffs {
            if !self.coeffs.contains_key(k) {
                m = m.max(y.norm());
            }
        }
        m
    }

    /// `|κ|_{p}`: every slot weighted by `λ^p` with the `1/(c! a!)` wedge normalization.
    pub fn weighted_norm(&self, p: f64, eigenvalues: &[f64]) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .map(|((pk, qk), c)| {
                let w: f64 = pk.iter().chain(qk).map(|&i| eigenvalues[i as usize].powf(2.0 * p)).product();
                c.norm_sqr() * w
            })
            .sum();
        (s / (factorial(self.out_degree) * factorial(self.in_degree))).sqrt()
    }

    /// Dense tensor with out-slots first.
    pub fn to_tensor(&self) -> Tensor {
        let mut acc = Tensor::zero(self.out_degree + self.in_degree);
        for ((p, q), c) in &self.coeffs {
            let t = AntisymTensor::basis(p).to_tensor().outer(&AntisymTensor::basis(q).to_tensor());
            let terms = acc
                .coeffs()
                .iter()
                .map(|(k, v)| (k.clone(), *v))
                .chain(t.coeffs().iter().map(|(k, v)| (k.clone(), v * c)))
                .collect::<Vec<_>>();
            acc = Tensor::from_terms(self.out_degree + self.in_degree, terms).expect("degrees agree");
        }
        acc
    }

    /// Factor and dual annihilation set of in-key `q` (see the type docs).
    fn dual(q: &[u32], pairing: &PairingTable) -> (Occupation, C64) {
        let mut phase = ONE;
        let mut mapped: Vec<u32> = Vec::with_capacity(q.len());
        for &x in q.iter().rev() {
            let (jx, w) = pairing.j(x);
            phase *= w.conj();
            mapped.push(jx);
        }
        let (sorted, s) = sort_with_sign(&mapped).expect("J is a bijection");
        (Occupation::from_modes(&sorted), phase * s)
    }

    pub fn to_normal_ordered(&self, pairing: &PairingTable) -> NormalOrdered {
        let mut no = NormalOrdered::default();
        for ((p, q), c) in &self.coeffs {
            let (qq, f) = Self::dual(q, pairing);
            no.add_term(Occupation::from_modes(p), qq, c * f);
        }
        no
    }
}

/// Finite sum of integral kernel operators plus a scalar.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KernelOperator {
    pub terms: Vec<BiKernel>,
    pub scalar: C64,
}

impl KernelOperator {
    pub fn single(kernel: BiKernel) -> Self {
        Self { terms: vec![kernel], scalar: ZERO }
    }

    pub fn scalar_only(c: C64) -> Self {
        Self { terms: Vec::new(), scalar: c }
    }

    pub fn plus(mut self, other: KernelOperator) -> Self {
        self.terms.extend(other.terms);
        self.scalar += other.scalar;
        self
    }

    pub fn scale(&self, c: C64) -> Self {
        Self { terms: self.terms.iter().map(|k| k.scale(c)).collect(), scalar: self.scalar * c }
    }

    /// `(l, m)` labels of the terms with even slot bidegrees.
    pub fn labels(&self) -> Vec<(usize, usize)> {
        self.terms.iter().map(|k| (k.out_degree() / 2, k.in_degree() / 2)).collect()
    }

    /// True if every term changes the degree by an even amount.
    pub fn preserves_parity(&self) -> bool {
        self.terms.iter().all(|k| (k.out_degree() + k.in_degree()) % 2 == 0)
    }

    pub fn to_normal_ordered(&self, pairing: &PairingTable) -> NormalOrdered {
        let mut no = NormalOrdered::default();
        for k in &self.terms {
            for (&(p, q), &c) in k.to_normal_ordered(pairing).terms() {
                no.add_term(p, q, c);
            }
        }
        if self.scalar != ZERO {
            no.add_term(Occupation::EMPTY, Occupation::EMPTY, self.scalar);
        }
        no.prune(0.0);
        no
    }

    /// Regroups monomials into kernels by slot bidegree.
    pub fn from_normal_ordered(no: &NormalOrdered, pairing: &PairingTable) -> Self {
        let mut groups: BTreeMap<(usize, usize), BiKernel> = BTreeMap::new();
        let mut scalar = ZERO;
        let mut entries: Vec<_> = no.terms().iter().collect();
        entries.sort_by_key(|((p, q), _)| (*p, *q));
        for (&(p, q), &c) in entries {
            if p.degree() == 0 && q.degree() == 0 {
                scalar += c;
                continue;
            }
            // In-key whose dual is q: J is an involution.
            let jq: Vec<u32> = q.modes().iter().map(|&x| pairing.j(x).0).collect();
            let (qk, _) = sort_with_sign(&jq).expect("bijection");
            let (dq, f) = BiKernel::dual(&qk, pairing);
            debug_assert_eq!(dq, q);
            let k = groups.entry((p.degree(), q.degree())).or_insert_with(|| BiKernel::zero(p.degree(), q.degree()));
            *k.coeffs.entry((p.modes(), qk)).or_default() += c / f;
        }
        let terms = groups.into_values().map(|mut k| {
            k.prune();
            k
        });
        Self { terms: terms.filter(|k| !k.is_zero()).collect(), scalar }
    }

    pub fn compile(&self, pairing: &PairingTable) -> CompiledOp {
        self.to_normal_ordered(pairing).compile()
    }

    pub fn apply(&self, v: &FockVector, pairing: &PairingTable) -> FockVector {
        self.compile(pairing).apply(v)
    }

    /// `self ∘ other` as a kernel operator.
    pub fn compose(&self, other: &KernelOperator, pairing: &PairingTable) -> KernelOperator {
        let no = self.to_normal_ordered(pairing).compose(&other.to_normal_ordered(pairing));
        Self::from_normal_ordered(&no, pairing)
    }

    /// Definitional route: contraction and antisymmetrization per component.
    pub fn apply_definitional(&self, v: &FockVector, pairing: &PairingTable) -> Result<FockVector> {
        let mut out = v.scale(self.scalar);
        for k in &self.terms {
            out = out.axpy(ONE, &apply_kernel_definitional(k, v, pairing)?);
        }
        Ok(out)
    }
}

/// `Σ_N (N!/(N−a)!) 𝒜(κ ⌟ φ_N)` evaluated with dense tensors.
pub fn apply_kernel_definitional(kernel: &BiKernel, v: &FockVector, pairing: &PairingTable) -> Result<FockVector> {
    let (c, a) = (kernel.out_degree(), kernel.in_degree());
    let kt = kernel.to_tensor();
    let kslots: Vec<usize> = (c..c + a).rev().collect();
    let vslots: Vec<usize> = (0..a).collect();
    let mut comps = Vec::new();
    for n in v.degrees() {
        if n < a || n - a + c > v.max_particles() {
            continue;
        }
        let phi = v.component(n).to_tensor();
        let contracted = kt.contract(&kslots, &phi, &vslots, pairing)?;
        let factor = factorial(n) / factorial(n - a);
        comps.push(contracted.antisymmetrize().scale(C64::new(factor, 0.0)));
    }
    FockVector::from_components(&comps, v.max_particles())
}

fn check_even(v: &FockVector) -> Result<()> {
    match v.parity() {
        Some(Parity::Even) => Ok(()),
        _ => Err(FwnError::Sector("integral kernel operators act on even vectors".into())),
    }
}

fn check_bidegree(l: usize, m: usize, kernel: &BiKernel) -> Result<()> {
    if kernel.out_degree() != 2 * l || kernel.in_degree() != 2 * m {
        return Err(FwnError::DegreeMismatch(kernel.out_degree() + kernel.in_degree(), 2 * (l + m)));
    }
    Ok(())
}

/// `Ξ_{l,m}(κ) v` on the even sector.
pub fn apply_ikop(l: usize, m: usize, kernel: &BiKernel, v: &FockVector, pairing: &PairingTable) -> Result<FockVector> {
    check_bidegree(l, m, kernel)?;
    check_even(v)?;
    Ok(kernel.to_normal_ordered(pairing).compile().apply(v))
}

/// Definitional `Ξ_{l,m}(κ) v`.
pub fn apply_ikop_definitional(
    l: usize,
    m: usize,
    kernel: &BiKernel,
    v: &FockVector,
    pairing: &PairingTable,
) -> Result<FockVector> {
    check_bidegree(l, m, kernel)?;
    check_even(v)?;
    apply_kernel_definitional(kernel, v, pairing)
}

/// `Ξ_{l,m}(κ) Ξ_{l',m'}(λ)` as a kernel operator.
///
/// Single contractions produce terms of odd slot bidegree (for instance a
/// one-body `(1,1)` term from `Ξ_{0,1}Ξ_{1,0}`), which are kept as such.
pub fn compose_ikop(
    l: usize,
    m: usize,
    kappa: &BiKernel,
    lp: usize,
    mp: usize,
    lambda: &BiKernel,
    pairing: &PairingTable,
) -> Result<KernelOperator> {
    if l > 1 || m > 1 || lp > 1 || mp > 1 {
        return Err(FwnError::Unsupported(format!("composition of Ξ_{{{l},{m}}} and Ξ_{{{lp},{mp}}}")));
    }
    check_bidegree(l, m, kappa)?;
    check_bidegree(lp, mp, lambda)?;
    Ok(KernelOperator::single(kappa.clone()).compose(&KernelOperator::single(lambda.clone()), pairing))
}

/// Monomial coefficients of `dΓ(B) = Σ B_{ik} a†_i a_k` as a slot-(1,1) kernel.
pub fn second_quantization(b: &DMatrix<C64>, pairing: &PairingTable) -> BiKernel {
    let mut no = NormalOrdered::default();
    for i in 0..b.nrows() {
        for k in 0..b.ncols() {
            let v = b[(i, k)];
            if v != ZERO {
                no.add_term(Occupation::from_modes(&[i as u32]), Occupation::from_modes(&[k as u32]), v);
            }
        }
    }
    single_kernel(&no, pairing, (1, 1))
}

fn single_kernel(no: &NormalOrdered, pairing: &PairingTable, deg: (usize, usize)) -> BiKernel {
    KernelOperator::from_normal_ordered(no, pairing)
        .terms
        .into_iter()
        .next()
        .unwrap_or_else(|| BiKernel::zero(deg.0, deg.1))
}

/// `(1₂ ⊗ dΓ(B)^{(2)})* τ`: the pair kernel acting as `dΓ(B)` on two-particle vectors.
///
/// On degree `2k` its `Ξ_{1,1}` equals the pair-replacement sum, which is
/// `(2k−1)·dΓ(B)` for diagonalizable `B`; only `k = 1` reproduces `dΓ(B)`.
pub fn dgamma2(b: &DMatrix<C64>, pairing: &PairingTable) -> BiKernel {
    let n = b.nrows();
    let mut no = NormalOrdered::default();
    // ⟨e_i∧e_j, dΓ⁽²⁾(B) e_k∧e_l⟩ in wedge coordinates.
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..n {
                for l in k + 1..n {
                    let d = |x: usize, y: usize| if x == y { ONE } else { ZERO };
                    let v = b[(i, k)] * d(j, l) + d(i, k) * b[(j, l)] - b[(j, k)] * d(i, l) - d(j, k) * b[(i, l)];
                    if v != ZERO {
                        no.add_term(
                            Occupation::from_modes(&[i as u32, j as u32]),
                            Occupation::from_modes(&[k as u32, l as u32]),
                            v,
                        );
                    }
                }
            }
        }
    }
    single_kernel(&no, pairing, (2, 2))
}

/// `π(B(x)B(y))` on the even sector as `Σ Ξ_{i,j}(λ_{i,j})` plus the one-body term.
pub fn quadratic_op(x: &KVector, y: &KVector, model: &OneParticleModel) -> KernelOperator {
    let n = x.len();
    let pairing = model.pairing();
    // λ₀₀ = (PΓx, Py)₀ = Σ x⁻_k y⁺_k.
    let scalar: C64 = (0..n).map(|k| x.minus[k] * y.plus[k]).sum();
    let px = AntisymTensor::vector(&nonzero(&x.plus));
    let py = AntisymTensor::vector(&nonzero(&y.plus));
    let l10 = BiKernel::from_tensors(&px.wedge(&py), &AntisymTensor::scalar(ONE));
    let pj = |v: &KVector| {
        let pg = v.gamma();
        model.apply_j(&KVector { plus: pg.plus, minus: vec![ZERO; n] }).plus
    };
    let jx = AntisymTensor::vector(&nonzero(&pj(x)));
    let jy = AntisymTensor::vector(&nonzero(&pj(y)));
    let l01 = BiKernel::from_tensors(&AntisymTensor::scalar(ONE), &jx.wedge(&jy));
    // T(x,y) z = (PΓy, z) Px − (PΓx, z) Py.
    let t = DMatrix::from_fn(n, n, |i, k| x.plus[i] * y.minus[k] - y.plus[i] * x.minus[k]);
    let l11 = second_quantization(&t, &pairing);
    KernelOperator { terms: vec![l10, l01, l11].into_iter().filter(|k| !k.is_zero()).collect(), scalar }
}

fn nonzero(v: &[C64]) -> Vec<(u32, C64)> {
    v.iter().enumerate().filter(|(_, c)| **c != ZERO).map(|(i, c)| (i as u32, *c)).collect()
}

/// One factor of a CAR word.
#[derive(Clone, Debug)]
pub enum Factor {
    Create(Vec<C64>),
    Annihilate(Vec<C64>),
    W(Vec<C64>),
    Field(KVector),
    Kernel(KernelOperator),
}

/// Product of factors; `apply` acts with the rightmost factor first.
#[derive(Clone, Debug, Default)]
pub struct CarWord {
    pub coeff: C64,
    pub factors: Vec<Factor>,
}

impl CarWord {
    pub fn new(coeff: C64, factors: Vec<Factor>) -> Self {
        Self { coeff, factors }
    }

    pub fn apply(&self, v: &FockVector, pairing: &PairingTable) -> Result<FockVector> {
        let mut cur = v.clone();
        for f in self.factors.iter().rev() {
            cur = match f {
                Factor::Create(g) => create(g, &cur),
                Factor::Annihilate(g) => annihilate(g, &cur, pairing),
                Factor::W(g) => w_op(g, &cur, pairing)?,
                Factor::Field(x) => field_apply(x, &cur),
                Factor::Kernel(k) => k.apply(&cur, pairing),
            };
        }
        Ok(cur.scale(self.coeff))
    }
}

/// Finite-rank `Y = Σ (g_i, ·) f_i` with its quantization `q(Y) = ½ Σ B(f_i) B(Γg_i)`.
#[derive(Clone, Debug)]
pub struct QOperator {
    pub pairs: Vec<(KVector, KVector)>,
}

impl QOperator {
    pub fn words(&self) -> Vec<CarWord> {
        self.pairs
            .iter()
            .map(|(f, g)| CarWord::new(C64::new(0.5, 0.0), vec![Factor::Field(f.clone()), Factor::Field(g.gamma())]))
            .collect()
    }

    pub fn apply(&self, v: &FockVector) -> FockVector {
        let mut out = FockVector::zero(v.max_particles());
        for (f, g) in &self.pairs {
            let w = field_apply(f, &field_apply(&g.gamma(), v));
            out = out.axpy(C64::new(0.5, 0.0), &w);
        }
        out
    }

    pub fn kernel(&self, model: &OneParticleModel) -> KernelOperator {
        let mut k = KernelOperator::default();
        for (f, g) in &self.pairs {
            k = k.plus(quadratic_op(f, &g.gamma(), model).scale(C64::new(0.5, 0.0)));
        }
        k
    }

    /// Dense matrix of `Y` in the basis `{e_k, Γe_k}`.
    pub fn matrix(&self) -> DMatrix<C64> {
        let n2 = self.pairs.first().map(|p| 2 * p.0.len()).unwrap_or(0);
        let mut m = DMatrix::from_element(n2, n2, ZERO);
        for (f, g) in &self.pairs {
            let (ff, gf) = (f.flat(), g.flat());
            for r in 0..n2 {
                for c in 0..n2 {
                    m[(r, c)] += ff[r] * gf[c].conj();
                }
            }
        }
        m
    }
}

/// `ΓAΓ` for a dense matrix in the basis `{e_k, Γe_k}`.
pub fn gamma_conjugate(a: &DMatrix<C64>) -> DMatrix<C64> {
    let n = a.nrows() / 2;
    let sw = |i: usize| if i < n { i + n } else { i - n };
    DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(sw(r), sw(c))].conj())
}

/// Builds `q(Y)`; `Y` must lie in `C ⊗ o_fin(K,Γ)`, i.e. `Γ Y† Γ = −Y`.
pub fn q_finite_rank(pairs: Vec<(KVector, KVector)>) -> Result<QOperator> {
    let q = QOperator { pairs };
    if q.pairs.is_empty() {
        return Ok(q);
    }
    let y = q.matrix();
    let r = (gamma_conjugate(&y.adjoint()) + &y).norm();
    if r > 1e-10 * (1.0 + y.norm()) {
        return Err(FwnError::NotSkew(r));
    }
    Ok(q)
}

/// `H₁(x,y)` as rank data.
pub fn h1(x: &KVector, y: &KVector) -> Vec<(KVector, KVector)> {
    let h = C64::new(0.5, 0.0);
    vec![
        (x.scale(h), y.clone()),
        (y.scale(h), x.clone()),
        (x.gamma().scale(-h), y.gamma()),
        (y.gamma().scale(-h), x.gamma()),
    ]
}

/// `H₂(x,y)` as rank data.
pub fn h2(x: &KVector, y: &KVector) -> Vec<(KVector, KVector)> {
    let h = C64::new(0.0, 0.5);
    vec![
        (y.scale(h), x.clone()),
        (x.scale(-h), y.clone()),
        (y.gamma().scale(h), x.gamma()),
        (x.gamma().scale(-h), y.gamma()),
    ]
}

/// `Y = ½(H₁(x,Γy) + i H₂(x,Γy))` as rank data.
pub fn y_from_pair(x: &KVector, y: &KVector) -> Vec<(KVector, KVector)> {
    let gy = y.gamma();
    let mut out: Vec<(KVector, KVector)> =
        h1(x, &gy).into_iter().map(|(f, g)| (f.scale(C64::new(0.5, 0.0)), g)).collect();
    out.extend(h2(x, &gy).into_iter().map(|(f, g)| (f.scale(C64::new(0.0, 0.5)), g)));
    out
}

/// Check helper: number of modes a Fock computation may address.
pub fn check_mode_count(n: usize) -> Result<()> {
    if n > MAX_MODES {
        return Err(FwnError::ModeLimit(n));
    }
    Ok(())
}
