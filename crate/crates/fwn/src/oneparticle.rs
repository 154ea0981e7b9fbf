//! Truncated one-particle models: Dirac eigenbases on tori, the involutions Γ
//! and J, the gauge generator `X = −φ σ₂` and its matrix elements.
//!
//! Spinors are stored as `[C64; 4]` with index `2·block + component`, where
//! `block ∈ {0, 1}` is the Dirac block and `component` the gauge (1D) or Pauli
//! (3D) index. All eigenfunctions are plane waves `w e^{iα·x}` normalized for
//! the measure `dx/(2π)^d`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use nalgebra::DMatrix;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::{c64, FwnError, Result, C64};

pub type Spinor = [C64; 4];
pub type Mat2 = [[C64; 2]; 2];

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "+" | "plus" | "p" | "1" | "+1" => Some(Sign::Plus),
            "-" | "minus" | "m" | "-1" => Some(Sign::Minus),
            _ => None,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Lattice momentum; unused components are zero.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Momentum(pub [i32; 3]);

impl Momentum {
    pub fn from_slice(v: &[i32]) -> Result<Self> {
        if v.is_empty() || v.len() > 3 {
            return Err(FwnError::InvalidScenario(format!("momentum {v:?} must have 1..=3 components")));
        }
        let mut m = [0; 3];
        m[..v.len()].copy_from_slice(v);
        Ok(Momentum(m))
    }

    pub fn max_norm(self) -> i32 {
        self.0.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    pub fn norm_sqr(self) -> f64 {
        self.0.iter().map(|&x| (x as f64) * (x as f64)).sum()
    }

    /// `ι(α) = (−α₁, α₂, −α₃)`.
    pub fn iota(self) -> Self {
        Momentum([-self.0[0], self.0[1], -self.0[2]])
    }

    pub fn components(self, dim: usize) -> Vec<i32> {
        self.0[..dim].to_vec()
    }
}

impl std::ops::Neg for Momentum {
    type Output = Self;
    fn neg(self) -> Self {
        Momentum([-self.0[0], -self.0[1], -self.0[2]])
    }
}

impl std::ops::Add for Momentum {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Momentum([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl std::ops::Sub for Momentum {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModeIndex {
    pub momentum: Momentum,
    pub internal: Sign,
    pub energy_sign: Sign,
}

impl ModeIndex {
    pub fn positive(momentum: Momentum, internal: Sign) -> Self {
        Self { momentum, internal, energy_sign: Sign::Plus }
    }
}

fn default_shift() -> f64 {
    2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub torus_dim: u32,
    pub mass: f64,
    #[serde(default = "default_shift")]
    pub shift_c: f64,
    pub mode_cutoff: u32,
}

impl Scenario {
    pub fn new(torus_dim: u32, mass: f64, shift_c: f64, mode_cutoff: u32) -> Result<Self> {
        let s = Self { torus_dim, mass, shift_c, mode_cutoff };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.torus_dim != 1 && self.torus_dim != 3 {
            return Err(FwnError::InvalidScenario(format!("torus_dim must be 1 or 3, got {}", self.torus_dim)));
        }
        if !(self.mass.is_finite() && self.mass >= 0.0) {
            return Err(FwnError::InvalidScenario(format!("mass must be finite and ≥ 0, got {}", self.mass)));
        }
        if self.mass <= 1.0 && !(self.shift_c.is_finite() && self.shift_c > 1.0) {
            return Err(FwnError::InvalidScenario(format!(
                "mass {} ≤ 1 needs shift_c > 1, got {}",
                self.mass, self.shift_c
            )));
        }
        if self.mode_cutoff < 1 {
            return Err(FwnError::InvalidScenario("mode_cutoff must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn with_cutoff(&self, cutoff: u32) -> Self {
        Self { mode_cutoff: cutoff, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.torus_dim as usize
    }

    /// Weight eigenvalue for a positive mode with `√E = sqrt_e`.
    pub fn weight(&self, sqrt_e: f64) -> f64 {
        if self.mass > 1.0 {
            sqrt_e
        } else {
            sqrt_e + self.shift_c
        }
    }
}

/// Real trigonometric polynomial `φ(x) = Σ_γ φ̂(γ) e^{iγ·x}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeFunction {
    dim: usize,
    fourier: BTreeMap<Momentum, C64>,
}

impl GaugeFunction {
    pub fn new(dim: usize, coeffs: impl IntoIterator<Item = (Momentum, C64)>) -> Result<Self> {
        let mut fourier = BTreeMap::new();
        for (g, c) in coeffs {
            if g.0[dim..].iter().any(|&x| x != 0) {
                return Err(FwnError::InvalidScenario(format!("gauge momentum {:?} exceeds dimension {dim}", g.0)));
            }
            *fourier.entry(g).or_insert(ZERO) += c;
        }
        fourier.retain(|_, c: &mut C64| *c != ZERO);
        for (g, c) in &fourier {
            let partner = fourier.get(&-*g).copied().unwrap_or(ZERO);
            if (partner - c.conj()).norm() > 1e-12 {
                return Err(FwnError::InvalidScenario(format!(
                    "gauge function is not real: φ̂(−γ) ≠ conj φ̂(γ) at γ = {:?}",
                    g.components(dim)
                )));
            }
        }
        Ok(Self { dim, fourier })
    }

    pub fn zero(dim: usize) -> Self {
        Self { dim, fourier: BTreeMap::new() }
    }

    fn axis(dim: usize, axis: usize, k: i32) -> Momentum {
        let mut m = [0; 3];
        m[axis.min(dim - 1)] = k;
        Momentum(m)
    }

    /// `cos(x_axis)`.
    pub fn cos(dim: usize, axis: usize) -> Self {
        let h = c64(0.5, 0.0);
        Self::new(dim, [(Self::axis(dim, axis, 1), h), (Self::axis(dim, axis, -1), h)]).expect("cos is real")
    }

    /// `cos(x_axis) + ½ cos(2 x_axis)`.
    pub fn cos_plus_half_cos2(dim: usize, axis: usize) -> Self {
        let h = c64(0.5, 0.0);
        let q = c64(0.25, 0.0);
        Self::new(
            dim,
            [
                (Self::axis(dim, axis, 1), h),
                (Self::axis(dim, axis, -1), h),
                (Self::axis(dim, axis, 2), q),
                (Self::axis(dim, axis, -2), q),
            ],
        )
        .expect("real")
    }

    /// Default gauge function for a torus: `cos x` in 1D, `cos x₂` in 3D.
    pub fn default_for(dim: usize) -> Self {
        if dim == 1 {
            Self::cos(1, 0)
        } else {
            Self::cos(dim, 1)
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hat(&self, g: Momentum) -> C64 {
        self.fourier.get(&g).copied().unwrap_or(ZERO)
    }

    pub fn support(&self) -> impl Iterator<Item = (Momentum, C64)> + '_ {
        self.fourier.iter().map(|(g, c)| (*g, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.fourier.is_empty()
    }

    pub fn bandwidth(&self) -> i32 {
        self.fourier.keys().map(|g| g.max_norm()).max().unwrap_or(0)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.fourier
            .iter()
            .map(|(g, c)| {
                let ph: f64 = (0..self.dim).map(|d| g.0[d] as f64 * x[d]).sum();
                (c * C64::from_polar(1.0, ph)).re
            })
            .sum()
    }

    /// `‖∂^k φ‖²` for the normalized measure, summed over all axes' k-th derivatives
    /// as `Σ_γ |γ|^{2k} |φ̂(γ)|²`.
    pub fn sobolev_sq(&self, k: i32) -> f64 {
        self.fourier.iter().map(|(g, c)| g.norm_sqr().powi(k) * c.norm_sqr()).sum()
    }
}

/// d-coefficients of a momentum.
#[derive(Clone, Debug, PartialEq)]
pub enum DCoefficients {
    /// `(d_α, d_{−α})`.
    OneD { d: f64, d_neg: f64 },
    /// `d^±`, the projector `p_α = ½(1 + α̂·σ)` and `A_α = d⁺p_α + d⁻(1−p_α)`.
    ThreeD { d_plus: f64, d_minus: f64, p: Mat2, a: Mat2 },
}

fn ratio(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        x / e.sqrt()
    }
}

/// `d_α = √(½(1 + α/√E))` with the convention `α/√E := 0` when `E = 0`.
pub fn d1(alpha: f64, mass: f64) -> f64 {
    let e = alpha * alpha + mass * mass;
    (0.5 * (1.0 + ratio(alpha, e))).sqrt()
}

pub fn pauli(j: usize) -> Mat2 {
    match j {
        0 => [[ZERO, ONE], [ONE, ZERO]],
        1 => [[ZERO, -I], [I, ZERO]],
        _ => [[ONE, ZERO], [ZERO, -ONE]],
    }
}

pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

pub fn mat2_vec(a: &Mat2, v: &[C64; 2]) -> [C64; 2] {
    [a[0][0] * v[0] + a[0][1] * v[1], a[1][0] * v[0] + a[1][1] * v[1]]
}

fn mat2_lin(x: f64, a: &Mat2, y: f64, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][j] * x + b[i][j] * y;
        }
    }
    out
}

fn ident2() -> Mat2 {
    [[ONE, ZERO], [ZERO, ONE]]
}

fn dot2(a: &[C64; 2], b: &[C64; 2]) -> C64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

/// Internal basis `e_± = (±i, 1)/√2`; `σ₂ e_s = −s e_s`.
pub fn internal_basis(s: Sign) -> [C64; 2] {
    [c64(0.0, s.value() * FRAC_1_SQRT_2), c64(FRAC_1_SQRT_2, 0.0)]
}

/// `p_α`; at `α = 0` returns `½·1`, which makes `A₀ = 1/√2`.
pub fn projector3(alpha: Momentum) -> Mat2 {
    let n = alpha.norm_sqr().sqrt();
    if n == 0.0 {
        return mat2_lin(0.5, &ident2(), 0.0, &ident2());
    }
    let mut p = mat2_lin(0.5, &ident2(), 0.0, &ident2());
    for j in 0..3 {
        let w = 0.5 * alpha.0[j] as f64 / n;
        p = mat2_lin(1.0, &p, w, &pauli(j));
    }
    p
}

/// `A_α = d⁺ p_α + d⁻ (1 − p_α)` with `d^σ = √(½(1 + σ|α|/√E))`.
pub fn a_matrix(alpha: Momentum, mass: f64) -> Mat2 {
    let n = alpha.norm_sqr().sqrt();
    let e = n * n + mass * mass;
    let dp = (0.5 * (1.0 + ratio(n, e))).sqrt();
    let dm = (0.5 * (1.0 - ratio(n, e))).sqrt();
    let p = projector3(alpha);
    let q = mat2_lin(1.0, &ident2(), -1.0, &p);
    mat2_lin(dp, &p, dm, &q)
}

fn spinor_from_blocks(b0: [C64; 2], b1: [C64; 2]) -> Spinor {
    [b0[0], b0[1], b1[0], b1[1]]
}

fn blocks(w: &Spinor) -> ([C64; 2], [C64; 2]) {
    ([w[0], w[1]], [w[2], w[3]])
}

/// Eigen-spinor `φ^σ_{α,s}` of the Dirac operator, valid for every `m ≥ 0`.
pub fn eigen_spinor(dim: usize, mass: f64, alpha: Momentum, s: Sign, sigma: Sign) -> Spinor {
    let e = internal_basis(s);
    if dim == 1 {
        let a = alpha.0[0] as f64;
        let (dp, dn) = (d1(a, mass), d1(-a, mass));
        let f = match sigma {
            Sign::Plus => [dp, dn],
            Sign::Minus => [dn, -dp],
        };
        [e[0] * f[0], e[1] * f[0], e[0] * f[1], e[1] * f[1]]
    } else {
        let ap = mat2_vec(&a_matrix(alpha, mass), &e);
        let an = mat2_vec(&a_matrix(-alpha, mass), &e);
        match sigma {
            Sign::Plus => spinor_from_blocks(ap, an),
            Sign::Minus => spinor_from_blocks(an, [-ap[0], -ap[1]]),
        }
    }
}

/// Fourier-space Dirac operator applied to `w e^{iα·x}`.
pub fn dirac_apply(dim: usize, mass: f64, alpha: Momentum, w: &Spinor) -> Spinor {
    let (u, v) = blocks(w);
    let m = c64(mass, 0.0);
    let sa: Mat2 = if dim == 1 {
        let a = alpha.0[0] as f64;
        mat2_lin(a, &ident2(), 0.0, &ident2())
    } else {
        let mut s = [[ZERO; 2]; 2];
        for j in 0..3 {
            s = mat2_lin(1.0, &s, alpha.0[j] as f64, &pauli(j));
        }
        s
    };
    let su = mat2_vec(&sa, &u);
    let sv = mat2_vec(&sa, &v);
    spinor_from_blocks([su[0] + m * v[0], su[1] + m * v[1]], [m * u[0] - sv[0], m * u[1] - sv[1]])
}

fn spinor_dot(a: &Spinor, b: &Spinor) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `⟨w_out, (−σ₂ on the component index) w_in⟩`.
pub fn x_spinor_element(w_out: &Spinor, w_in: &Spinor) -> C64 {
    let ms2 = [[ZERO, I], [-I, ZERO]];
    let mut s = ZERO;
    for b in 0..2 {
        for c in 0..2 {
            for cp in 0..2 {
                s += w_out[2 * b + c].conj() * ms2[c][cp] * w_in[2 * b + cp];
            }
        }
    }
    s
}

/// Action of Γ on the spinor of `w e^{iα x}`; the image lives at momentum `−α`.
pub fn gamma_spinor(dim: usize, w: &Spinor) -> Spinor {
    if dim == 1 {
        [w[0].conj(), w[1].conj(), -w[2].conj(), -w[3].conj()]
    } else {
        let (f1, f2) = blocks(w);
        let s2 = pauli(1);
        let a = mat2_vec(&s2, &[f2[0].conj(), f2[1].conj()]);
        let b = mat2_vec(&s2, &[f1[0].conj(), f1[1].conj()]);
        spinor_from_blocks(a, [-b[0], -b[1]])
    }
}

/// `J(u⊗f) = ū⊗σ₁ f̄` for the 1D model; image at momentum `−α`.
pub fn j_spinor_1d(w: &Spinor) -> Spinor {
    [w[2].conj(), w[3].conj(), w[0].conj(), w[1].conj()]
}

/// A vector of `K` in the basis `{e_k} ∪ {Γ e_k}`: `x = Σ plus_k e_k + Σ minus_k Γe_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct KVector {
    pub plus: Vec<C64>,
    pub minus: Vec<C64>,
}

impl KVector {
    pub fn zero(n: usize) -> Self {
        Self { plus: vec![ZERO; n], minus: vec![ZERO; n] }
    }

    pub fn positive_basis(n: usize, k: usize) -> Self {
        let mut v = Self::zero(n);
        v.plus[k] = ONE;
        v
    }

    /// `Γ e_k`.
    pub fn negative_basis(n: usize, k: usize) -> Self {
        let mut v = Self::zero(n);
        v.minus[k] = ONE;
        v
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    /// Flat coordinates `(plus, minus)`.
    pub fn flat(&self) -> Vec<C64> {
        let mut v = self.plus.clone();
        v.extend_from_slice(&self.minus);
        v
    }

    pub fn from_flat(v: &[C64]) -> Self {
        let n = v.len() / 2;
        Self { plus: v[..n].to_vec(), minus: v[n..].to_vec() }
    }

    /// Γ swaps the halves and conjugates.
    pub fn gamma(&self) -> Self {
        Self {
            plus: self.minus.iter().map(|c| c.conj()).collect(),
            minus: self.plus.iter().map(|c| c.conj()).collect(),
        }
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.flat().iter().zip(other.flat()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn axpy(&self, c: C64, other: &Self) -> Self {
        Self::from_flat(&self.flat().iter().zip(other.flat()).map(|(a, b)| a + c * b).collect::<Vec<_>>())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self::from_flat(&self.flat().iter().map(|a| a * c).collect::<Vec<_>>())
    }
}

/// Sparse column-major operator on `K` (dimension `2N`, positive block first).
#[derive(Clone, Debug, PartialEq)]
pub struct KOperator {
    pub n: usize,
    pub cols: Vec<Vec<(usize, C64)>>,
}

impl KOperator {
    pub fn apply(&self, x: &KVector) -> KVector {
        let flat = x.flat();
        let mut out = vec![ZERO; 2 * self.n];
        for (b, col) in self.cols.iter().enumerate() {
            if flat[b] == ZERO {
                continue;
            }
            for &(r, v) in col {
                out[r] += v * flat[b];
            }
        }
        KVector::from_flat(&out)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(2 * self.n, 2 * self.n, ZERO);
        for (b, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                m[(r, b)] += v;
            }
        }
        m
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.cols[c].iter().filter(|(i, _)| *i == r).map(|(_, v)| *v).sum()
    }
}

/// Sparse matrix over positive modes, column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseBlock {
    pub n: usize,
    pub cols: Vec<Vec<(usize, C64)>>,
}

impl SparseBlock {
    pub fn frobenius_sq(&self) -> f64 {
        self.cols.iter().flatten().map(|(_, v)| v.norm_sqr()).sum()
    }

    pub fn nnz(&self) -> usize {
        self.cols.iter().map(|c| c.len()).sum()
    }

    pub fn entry(&self, r: usize, c: usize) -> C64 {
        self.cols[c].iter().filter(|(i, _)| *i == r).map(|(_, v)| *v).sum()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::from_element(self.n, self.n, ZERO);
        for (c, col) in self.cols.iter().enumerate() {
            for &(r, v) in col {
                m[(r, c)] += v;
            }
        }
        m
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// `(e_out, X e_in)`.
    PlusPlus,
    /// `(e_out, X Γ e_in)`, the block `P₊XP₋Γ`.
    PlusMinusGamma,
}

/// Truncated eigenbasis of a scenario.
#[derive(Clone, Debug)]
pub struct OneParticleModel {
    scenario: Scenario,
    modes: Vec<ModeIndex>,
    index: FxHashMap<(Momentum, Sign), usize>,
    sqrt_e: Vec<f64>,
    eigenvalue: Vec<f64>,
    spinor_pos: Vec<Spinor>,
    spinor_neg: Vec<Spinor>,
    gamma: Vec<(usize, C64)>,
    j: Vec<(usize, C64)>,
}

fn momenta_in_ball(dim: usize, cutoff: i32) -> Vec<Momentum> {
    let r: Vec<i32> = (-cutoff..=cutoff).collect();
    let mut out = Vec::new();
    if dim == 1 {
        for &a in &r {
            out.push(Momentum([a, 0, 0]));
        }
    } else {
        for &a in &r {
            for &b in &r {
                for &c in &r {
                    out.push(Momentum([a, b, c]));
                }
            }
        }
    }
    out
}

pub fn build_model(scenario: &Scenario) -> Result<OneParticleModel> {
    OneParticleModel::build(scenario)
}

impl OneParticleModel {
    pub fn build(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let dim = scenario.dim();
        let m = scenario.mass;
        let mut modes: Vec<(f64, ModeIndex)> = momenta_in_ball(dim, scenario.mode_cutoff as i32)
            .into_iter()
            .flat_map(|a| {
                let se = (a.norm_sqr() + m * m).sqrt();
                [Sign::Plus, Sign::Minus].map(|s| (se, ModeIndex::positive(a, s)))
            })
            .collect();
        modes.sort_by(|x, y| {
            x.0.partial_cmp(&y.0)
                .unwrap()
                .then(x.1.momentum.cmp(&y.1.momentum))
                .then(x.1.internal.cmp(&y.1.internal))
        });
        let sqrt_e: Vec<f64> = modes.iter().map(|x| x.0).collect();
        let modes: Vec<ModeIndex> = modes.into_iter().map(|x| x.1).collect();
        let index: FxHashMap<(Momentum, Sign), usize> =
            modes.iter().enumerate().map(|(k, md)| ((md.momentum, md.internal), k)).collect();
        let eigenvalue = sqrt_e.iter().map(|&e| scenario.weight(e)).collect();
        let spinor_pos: Vec<Spinor> =
            modes.iter().map(|md| eigen_spinor(dim, m, md.momentum, md.internal, Sign::Plus)).collect();
        let spinor_neg: Vec<Spinor> =
            modes.iter().map(|md| eigen_spinor(dim, m, md.momentum, md.internal, Sign::Minus)).collect();

        let mut model = Self {
            scenario: scenario.clone(),
            modes,
            index,
            sqrt_e,
            eigenvalue,
            spinor_pos,
            spinor_neg,
            gamma: Vec::new(),
            j: Vec::new(),
        };
        model.gamma = model.match_images(|w| gamma_spinor(dim, w), &model.spinor_neg, "Γ")?;
        model.j = if dim == 1 {
            model.match_images(j_spinor_1d, &model.spinor_pos, "J")?
        } else {
            // No local antiunitary commuting with the 3D Dirac operator squares to
            // one; J is defined on the eigenbasis instead.
            model
                .modes
                .iter()
                .map(|md| (model.index[&(-md.momentum, md.internal.flip())], ONE))
                .collect()
        };
        Ok(model)
    }

    /// For each positive mode, applies `map` to its spinor (moving to `−α`) and
    /// identifies the image among `targets` at `−α`, returning its phase.
    fn match_images(
        &self,
        map: impl Fn(&Spinor) -> Spinor + Sync,
        targets: &[Spinor],
        name: &str,
    ) -> Result<Vec<(usize, C64)>> {
        (0..self.modes.len())
            .into_par_iter()
            .map(|k| {
                let img = map(&self.spinor_pos[k]);
                let mneg = -self.modes[k].momentum;
                let mut best = None;
                let mut weight = 0.0;
                for s in [Sign::Plus, Sign::Minus] {
                    let t = self.index[&(mneg, s)];
                    let ov = spinor_dot(&targets[t], &img);
                    weight += ov.norm_sqr();
                    if (ov.norm() - 1.0).abs() < 1e-9 {
                        best = Some((t, ov));
                    }
                }
                match best {
                    Some(b) if (weight - 1.0).abs() < 1e-9 => Ok(b),
                    _ => Err(FwnError::Unsupported(format!(
                        "{name} does not map mode {k} onto a single basis vector"
                    ))),
                }
            })
            .collect()
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn dim(&self) -> usize {
        self.scenario.dim()
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn mode(&self, k: usize) -> ModeIndex {
        self.modes[k]
    }

    pub fn position(&self, momentum: Momentum, internal: Sign) -> Option<usize> {
        self.index.get(&(momentum, internal)).copied()
    }

    pub fn position_of(&self, mode: &ModeIndex) -> Result<usize> {
        if mode.energy_sign != Sign::Plus {
            return Err(FwnError::Unsupported("expected a positive-energy mode".into()));
        }
        self.position(mode.momentum, mode.internal)
            .ok_or_else(|| FwnError::ModeOutside(format!("{:?}", mode.momentum.components(self.dim()))))
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalue
    }

    pub fn eigenvalue(&self, k: usize) -> f64 {
        self.eigenvalue[k]
    }

    /// `σ√E(α)` of positive mode `k` (σ = +).
    pub fn dirac_energy(&self, k: usize) -> f64 {
        self.sqrt_e[k]
    }

    pub fn spinor(&self, k: usize, sigma: Sign) -> &Spinor {
        match sigma {
            Sign::Plus => &self.spinor_pos[k],
            Sign::Minus => &self.spinor_neg[k],
        }
    }

    /// `Γ e_k = phase · φ^−` at the returned index.
    pub fn gamma_image(&self, k: usize) -> (usize, C64) {
        self.gamma[k]
    }

    /// `J e_k = ω_k e_{Jk}`.
    pub fn j_image(&self, k: usize) -> (usize, C64) {
        self.j[k]
    }

    pub fn pairing(&self) -> crate::exterior::PairingTable {
        crate::exterior::PairingTable::new(self.j.iter().map(|&(a, w)| (a as u32, w)).collect())
            .expect("J is an involution with admissible phases")
    }

    /// Momentum and physical spinor of basis vector `b` of `K` (`b ≥ N` is `Γ e_{b−N}`).
    pub fn basis_vector(&self, b: usize) -> (Momentum, Spinor) {
        let n = self.len();
        if b < n {
            (self.modes[b].momentum, self.spinor_pos[b])
        } else {
            let (t, ph) = self.gamma[b - n];
            let w = self.spinor_neg[t];
            (self.modes[t].momentum, [w[0] * ph, w[1] * ph, w[2] * ph, w[3] * ph])
        }
    }

    /// Basis indices of `K` carrying physical momentum `alpha`.
    fn basis_at(&self, alpha: Momentum) -> Vec<usize> {
        let n = self.len();
        let mut out = Vec::with_capacity(4);
        if alpha.max_norm() > self.scenario.mode_cutoff as i32 {
            return out;
        }
        for s in [Sign::Plus, Sign::Minus] {
            out.push(self.index[&(alpha, s)]);
        }
        for s in [Sign::Plus, Sign::Minus] {
            // Γ e_j sits at −α_j.
            out.push(n + self.index[&(-alpha, s)]);
        }
        out
    }

    /// `J` on `K`: `J e_k = ω_k e_{Jk}` and `J Γ e_k = −Γ J e_k`.
    pub fn apply_j(&self, x: &KVector) -> KVector {
        let n = self.len();
        let mut out = KVector::zero(n);
        for k in 0..n {
            let (jk, w) = self.j[k];
            out.plus[jk] += w * x.plus[k].conj();
            out.minus[jk] -= w.conj() * x.minus[k].conj();
        }
        out
    }

    /// `π(X)` on the truncated `K`, built from spinor overlaps.
    pub fn gauge_operator(&self, gauge: &GaugeFunction) -> Result<KOperator> {
        self.check_gauge(gauge)?;
        let n = self.len();
        let support: Vec<(Momentum, C64)> = gauge.support().collect();
        let cols = (0..2 * n)
            .into_par_iter()
            .map(|b| {
                let (beta, wb) = self.basis_vector(b);
                let mut col = Vec::new();
                for &(g, c) in &support {
                    for r in self.basis_at(beta + g) {
                        let (_, wr) = self.basis_vector(r);
                        let v = c * x_spinor_element(&wr, &wb);
                        if v.norm() > 1e-15 {
                            col.push((r, v));
                        }
                    }
                }
                col.sort_by_key(|e| e.0);
                col
            })
            .collect();
        Ok(KOperator { n, cols })
    }

    fn check_gauge(&self, gauge: &GaugeFunction) -> Result<()> {
        if gauge.dim() != self.dim() {
            return Err(FwnError::InvalidScenario(format!(
                "gauge dimension {} does not match torus dimension {}",
                gauge.dim(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Eigen-equation residual `|𝔥 w − σ√E w|` of positive or negative mode `k`.
    pub fn eigen_residual(&self, k: usize, sigma: Sign) -> f64 {
        let w = self.spinor(k, sigma);
        let hw = dirac_apply(self.dim(), self.scenario.mass, self.modes[k].momentum, w);
        let e = sigma.value() * self.sqrt_e[k];
        hw.iter().zip(w).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt()
    }
}

pub fn spinor_d_coefficients(model: &OneParticleModel, alpha: Momentum) -> Result<DCoefficients> {
    let sc = model.scenario();
    if alpha.max_norm() > sc.mode_cutoff as i32 {
        return Err(FwnError::ModeOutside(format!("{:?}", alpha.components(sc.dim()))));
    }
    if sc.dim() == 1 {
        let a = alpha.0[0] as f64;
        return Ok(DCoefficients::OneD { d: d1(a, sc.mass), d_neg: d1(-a, sc.mass) });
    }
    if sc.mass == 0.0 && alpha.norm_sqr() == 0.0 {
        return Err(FwnError::Unsupported("p_α is undefined at α = 0 for the massless 3-torus".into()));
    }
    let n = alpha.norm_sqr().sqrt();
    let e = n * n + sc.mass * sc.mass;
    Ok(DCoefficients::ThreeD {
        d_plus: (0.5 * (1.0 + n / e.sqrt())).sqrt(),
        d_minus: (0.5 * (1.0 - n / e.sqrt())).sqrt(),
        p: projector3(alpha),
        a: a_matrix(alpha, sc.mass),
    })
}

/// Closed-form matrix element between positive modes.
pub fn gauge_matrix_element(
    model: &OneParticleModel,
    gauge: &GaugeFunction,
    out_mode: &ModeIndex,
    in_mode: &ModeIndex,
    block: Block,
) -> Result<C64> {
    model.check_gauge(gauge)?;
    model.position_of(out_mode)?;
    model.position_of(in_mode)?;
    Ok(closed_form(model.dim(), model.scenario().mass, gauge, out_mode, in_mode, block))
}

pub(crate) fn closed_form(
    dim: usize,
    mass: f64,
    gauge: &GaugeFunction,
    out_mode: &ModeIndex,
    in_mode: &ModeIndex,
    block: Block,
) -> C64 {
    let (a, b) = (out_mode.momentum, in_mode.momentum);
    let (s, t) = (out_mode.internal, in_mode.internal);
    let transfer = match block {
        Block::PlusPlus => a - b,
        Block::PlusMinusGamma => a + b,
    };
    let phi = gauge.hat(transfer);
    if phi == ZERO {
        return ZERO;
    }
    if dim == 1 {
        let (x, y) = (a.0[0] as f64, b.0[0] as f64);
        let (da, dna, db, dnb) = (d1(x, mass), d1(-x, mass), d1(y, mass), d1(-y, mass));
        match block {
            Block::PlusPlus if s == t => phi * s.value() * (da * db + dna * dnb),
            Block::PlusMinusGamma if s != t => phi * s.value() * (da * db - dna * dnb),
            _ => ZERO,
        }
    } else {
        let es = internal_basis(s);
        let prod = |x: Momentum, y: Momentum| mat2_mul(&a_matrix(x, mass), &a_matrix(y, mass));
        let first = prod(a.iota(), b);
        let second = prod((-a).iota(), -b);
        match block {
            Block::PlusPlus => {
                let m = mat2_lin(1.0, &first, 1.0, &second);
                phi * s.value() * dot2(&es, &mat2_vec(&m, &internal_basis(t)))
            }
            Block::PlusMinusGamma => {
                let m = mat2_lin(1.0, &first, -1.0, &second);
                phi * (s.value() * t.value()) * dot2(&es, &mat2_vec(&m, &internal_basis(t.flip())))
            }
        }
    }
}

/// Equispaced-grid quadrature of `∫ conj(ψ_out) (−φσ₂) ψ_in dx/(2π)^d`.
///
/// The grid sums `(1/G^d) Σ_x φ(x) e^{ik·x}` are tabulated once per frequency;
/// the spinor factor is constant in `x` and multiplies the tabulated sum.
pub struct Quadrature<'a> {
    model: &'a OneParticleModel,
    radius: i32,
    table: FxHashMap<Momentum, C64>,
}

impl<'a> Quadrature<'a> {
    pub fn new(model: &'a OneParticleModel, gauge: &GaugeFunction) -> Result<Self> {
        let lam = model.scenario().mode_cutoff as i32;
        let bw = gauge.bandwidth();
        Self::with_grid(model, gauge, (2 * (lam + bw) + 1) as usize)
    }

    pub fn with_grid(model: &'a OneParticleModel, gauge: &GaugeFunction, points: usize) -> Result<Self> {
        model.check_gauge(gauge)?;
        let dim = model.dim();
        let lam = model.scenario().mode_cutoff as i32;
        // Integrand frequencies are α_in − α_out + γ with |·|∞ ≤ 2Λ + bandwidth;
        // the trapezoid rule on G points is exact below G.
        let need = (2 * lam + gauge.bandwidth()) as usize;
        if points <= need {
            return Err(FwnError::GridTooSmall { got: points, need });
        }
        let radius = 2 * lam;
        let g = points;
        let xs: Vec<f64> = (0..g).map(|i| 2.0 * PI * i as f64 / g as f64).collect();
        let npts = g.pow(dim as u32);
        let coords = |idx: usize| -> [usize; 3] {
            let mut c = [0usize; 3];
            let mut r = idx;
            for slot in c.iter_mut().take(dim) {
                *slot = r % g;
                r /= g;
            }
            c
        };
        let phi: Vec<f64> = (0..npts)
            .map(|p| {
                let c = coords(p);
                let x: Vec<f64> = (0..dim).map(|d| xs[c[d]]).collect();
                gauge.value(&x)
            })
            .collect();
        let phase = |k: i32, i: usize| C64::from_polar(1.0, k as f64 * xs[i]);
        let freqs = momenta_in_ball(dim, radius);
        let table = freqs
            .par_iter()
            .map(|&k| {
                let mut s = ZERO;
                for (p, phi_p) in phi.iter().enumerate() {
                    let c = coords(p);
                    let mut e = ONE;
                    for (d, &cd) in c.iter().enumerate().take(dim) {
                        e *= phase(k.0[d], cd);
                    }
                    s += e * phi_p;
                }
                (k, s / npts as f64)
            })
            .collect();
        Ok(Self { model, radius, table })
    }

    /// `(ψ_a, X ψ_b)` for basis vectors of `K` given by momentum and spinor.
    pub fn element_raw(&self, out: (Momentum, &Spinor), inp: (Momentum, &Spinor)) -> Result<C64> {
        // ∫ e^{-iα_out x} φ(x) e^{iα_in x}: frequency α_in − α_out.
        let k = inp.0 - out.0;
        if k.max_norm() > self.radius {
            return Err(FwnError::GridTooSmall { got: self.table.len(), need: k.max_norm() as usize });
        }
        Ok(self.table[&k] * x_spinor_element(out.1, inp.1))
    }

    pub fn element(&self, out_mode: &ModeIndex, in_mode: &ModeIndex, block: Block) -> Result<C64> {
        let i = self.model.position_of(out_mode)?;
        let k = self.model.position_of(in_mode)?;
        let (ma, wa) = self.model.basis_vector(i);
        let b = match block {
            Block::PlusPlus => k,
            Block::PlusMinusGamma => self.model.len() + k,
        };
        let (mb, wb) = self.model.basis_vector(b);
        self.element_raw((ma, &wa), (mb, &wb))
    }
}

pub fn gauge_matrix_element_quadrature(
    model: &OneParticleModel,
    gauge: &GaugeFunction,
    out_mode: &ModeIndex,
    in_mode: &ModeIndex,
    block: Block,
) -> Result<C64> {
    Quadrature::new(model, gauge)?.element(out_mode, in_mode, block)
}

/// `P₊π(X)P₊` or `P₊π(X)P₋Γ` over positive modes, sliced from `π(X)`.
pub fn gauge_block(model: &OneParticleModel, gauge: &GaugeFunction, block: Block) -> Result<SparseBlock> {
    let x = model.gauge_operator(gauge)?;
    Ok(slice_block(&x, block))
}

pub fn slice_block(x: &KOperator, block: Block) -> SparseBlock {
    let n = x.n;
    let offset = match block {
        Block::PlusPlus => 0,
        Block::PlusMinusGamma => n,
    };
    let cols = (0..n)
        .map(|c| x.cols[offset + c].iter().filter(|(r, _)| *r < n).copied().collect())
        .collect();
    SparseBlock { n, cols }
}
