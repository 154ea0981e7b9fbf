//! Sparse antisymmetric tensors in increasing-tuple (wedge) coordinates.
//!
//! A degree-n tensor `T = Σ_I c_I e_{i₁}∧…∧e_{iₙ}` stores only the `c_I`; the
//! `1/n!` of the antisymmetrizer lives in the norm, so `|T|₀² = (1/n!)Σ|c_I|²`.
//! General (not necessarily antisymmetric) tensors are kept in [`Tensor`] and
//! serve as the definitional route for contractions.

use std::collections::BTreeMap;

use rand::Rng;
use rustc_hash::FxHashMap;

use crate::{C64, FwnError, Result};

pub type Key = Vec<u32>;

/// Sorts `key` and returns the permutation sign, or `None` on a repeated mode.
pub fn sort_with_sign(key: &[u32]) -> Option<(Key, f64)> {
    let mut k = key.to_vec();
    let mut sign = 1.0;
    for i in 1..k.len() {
        let mut j = i;
        while j > 0 && k[j - 1] > k[j] {
            k.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
        if j > 0 && k[j - 1] == k[j] {
            return None;
        }
    }
    Some((k, sign))
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// All permutations of `0..n` with their signs.
pub fn permutations(n: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; n], &mut out);
    out.into_iter()
        .map(|p| {
            let mut inv = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if p[i] > p[j] {
                        inv += 1;
                    }
                }
            }
            (p, if inv % 2 == 0 { 1.0 } else { -1.0 })
        })
        .collect()
}

/// The bilinear pairing `⟨e_a, e_b⟩ = (J e_a, e_b)₀ = conj(ω_a) δ_{J a, b}`
/// where `J e_a = ω_a e_{J a}`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairingTable {
    j: Vec<(u32, C64)>,
}

impl PairingTable {
    pub fn new(j: Vec<(u32, C64)>) -> Result<Self> {
        for (a, &(ja, w)) in j.iter().enumerate() {
            let back = j
                .get(ja as usize)
                .ok_or_else(|| FwnError::ModeOutside(format!("J maps {a} to {ja}")))?;
            if back.0 as usize != a {
                return Err(FwnError::Unsupported(format!("J is not an involution at mode {a}")));
            }
            // J² = 1 for an antilinear J forces ω_{Ja} = ω_a.
            if (w.norm() - 1.0).abs() > 1e-12 || (back.1 - w).norm() > 1e-12 {
                return Err(FwnError::Unsupported(format!("J phase at mode {a} is not admissible")));
            }
        }
        Ok(Self { j })
    }

    /// The unit-test pairing with `J = identity`.
    pub fn identity(n_modes: usize) -> Self {
        Self { j: (0..n_modes as u32).map(|a| (a, C64::new(1.0, 0.0))).collect() }
    }

    pub fn len(&self) -> usize {
        self.j.len()
    }

    pub fn is_empty(&self) -> bool {
        self.j.is_empty()
    }

    /// `(J a, ω_a)`.
    #[inline]
    pub fn j(&self, a: u32) -> (u32, C64) {
        self.j[a as usize]
    }

    #[inline]
    pub fn pair(&self, a: u32, b: u32) -> C64 {
        let (ja, w) = self.j[a as usize];
        if ja == b {
            w.conj()
        } else {
            C64::new(0.0, 0.0)
        }
    }

    /// `⟨f, g⟩` for dense coordinate vectors.
    pub fn bilinear(&self, f: &[C64], g: &[C64]) -> C64 {
        f.iter()
            .enumerate()
            .map(|(a, fa)| {
                let (ja, w) = self.j[a];
                fa * w.conj() * g[ja as usize]
            })
            .sum()
    }

    /// `J f` for a dense coordinate vector.
    pub fn apply_j(&self, f: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        for (a, fa) in f.iter().enumerate() {
            let (ja, w) = self.j[a];
            out[ja as usize] += w * fa.conj();
        }
        out
    }
}

/// General sparse tensor `Σ_k c_k e_{k₁}⊗…⊗e_{kₙ}`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tensor {
    degree: usize,
    coeffs: BTreeMap<Key, C64>,
}

impl Tensor {
    pub fn zero(degree: usize) -> Self {
        Self { degree, coeffs: BTreeMap::new() }
    }

    pub fn basis(key: &[u32]) -> Self {
        let mut t = Self::zero(key.len());
        t.coeffs.insert(key.to_vec(), C64::new(1.0, 0.0));
        t
    }

    pub fn from_terms(degree: usize, terms: impl IntoIterator<Item = (Key, C64)>) -> Result<Self> {
        let mut t = Self::zero(degree);
        for (k, c) in terms {
            if k.len() != degree {
                return Err(FwnError::DegreeMismatch(k.len(), degree));
            }
            *t.coeffs.entry(k).or_default() += c;
        }
        t.prune();
        Ok(t)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &BTreeMap<Key, C64> {
        &self.coeffs
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| *c != C64::new(0.0, 0.0));
    }

    pub fn outer(&self, other: &Tensor) -> Tensor {
        let mut t = Tensor::zero(self.degree + other.degree);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                let mut k = a.clone();
                k.extend_from_slice(b);
                *t.coeffs.entry(k).or_default() += ca * cb;
            }
        }
        t.prune();
        t
    }

    /// New slot `i` holds old slot `perm[i]`.
    pub fn permute_slots(&self, perm: &[usize]) -> Tensor {
        let mut t = Tensor::zero(self.degree);
        for (k, c) in &self.coeffs {
            let nk: Key = perm.iter().map(|&p| k[p]).collect();
            *t.coeffs.entry(nk).or_default() += c;
        }
        t
    }

    /// `𝒜_n(T)` in wedge coordinates.
    pub fn antisymmetrize(&self) -> AntisymTensor {
        let mut out = AntisymTensor::zero(self.degree);
        for (k, c) in &self.coeffs {
            if let Some((sk, s)) = sort_with_sign(k) {
                *out.coeffs.entry(sk).or_default() += c * s;
            }
        }
        out.prune();
        out
    }

    /// Contracts slots `f_slots` of `self` against `g_slots` of `g` pairwise
    /// with the bilinear pairing. The result carries the remaining slots of
    /// `self` followed by the remaining slots of `g`, each in original order.
    pub fn contract(
        &self,
        f_slots: &[usize],
        g: &Tensor,
        g_slots: &[usize],
        pairing: &PairingTable,
    ) -> Result<Tensor> {
        let m = f_slots.len();
        if m != g_slots.len() || m > self.degree || m > g.degree {
            return Err(FwnError::ContractionTooLarge { m, left: self.degree, right: g.degree });
        }
        let f_rest: Vec<usize> = (0..self.degree).filter(|s| !f_slots.contains(s)).collect();
        let g_rest: Vec<usize> = (0..g.degree).filter(|s| !g_slots.contains(s)).collect();
        let mut index: FxHashMap<Key, Vec<(Key, C64)>> = FxHashMap::default();
        for (k, c) in &g.coeffs {
            let proj: Key = g_slots.iter().map(|&s| k[s]).collect();
            let rest: Key = g_rest.iter().map(|&s| k[s]).collect();
            index.entry(proj).or_default().push((rest, *c));
        }
        let mut out = Tensor::zero(f_rest.len() + g_rest.len());
        for (k, c) in &self.coeffs {
            let mut factor = *c;
            let mut want = Vec::with_capacity(m);
            for &s in f_slots {
                let (ja, w) = pairing.j(k[s]);
                factor *= w.conj();
                want.push(ja);
            }
            if let Some(hits) = index.get(&want) {
                let head: Key = f_rest.iter().map(|&s| k[s]).collect();
                for (rest, cg) in hits {
                    let mut nk = head.clone();
                    nk.extend_from_slice(rest);
                    *out.coeffs.entry(nk).or_default() += factor * cg;
                }
            }
        }
        out.prune();
        Ok(out)
    }

    /// Left contraction `F ⊗^m g`: first `m` slots of both, same order.
    pub fn contract_left(&self, g: &Tensor, m: usize, pairing: &PairingTable) -> Result<Tensor> {
        let s: Vec<usize> = (0..m).collect();
        self.contract(&s, g, &s, pairing)
    }

    /// Right contraction `F ⊗_m g`: last `m` slots of both, same order.
    pub fn contract_right(&self, g: &Tensor, m: usize, pairing: &PairingTable) -> Result<Tensor> {
        if m > self.degree || m > g.degree {
            return Err(FwnError::ContractionTooLarge { m, left: self.degree, right: g.degree });
        }
        let fs: Vec<usize> = (self.degree - m..self.degree).collect();
        let gs: Vec<usize> = (g.degree - m..g.degree).collect();
        self.contract(&fs, g, &gs, pairing)
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        max_diff(&self.coeffs, &other.coeffs)
    }
}

fn max_diff(a: &BTreeMap<Key, C64>, b: &BTreeMap<Key, C64>) -> f64 {
    let mut m: f64 = 0.0;
    for (k, x) in a {
        m = m.max((x - b.get(k).copied().unwrap_or_default()).norm());
    }
    for (k, y) in b {
        if !a.contains_key(k) {
            m = m.max(y.norm());
        }
    }
    m
}

/// `F ∧_m g := 𝒜(F ⊗_m g)`.
pub fn wedge_contract(f: &Tensor, g: &Tensor, m: usize, pairing: &PairingTable) -> Result<AntisymTensor> {
    Ok(f.contract_right(g, m, pairing)?.antisymmetrize())
}

/// `F ∧^m g := 𝒜(F ⊗^m g)`.
pub fn wedge_contract_left(f: &Tensor, g: &Tensor, m: usize, pairing: &PairingTable) -> Result<AntisymTensor> {
    Ok(f.contract_left(g, m, pairing)?.antisymmetrize())
}

/// Sparse antisymmetric tensor in wedge coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct AntisymTensor {
    degree: usize,
    coeffs: BTreeMap<Key, C64>,
}

impl AntisymTensor {
    pub fn zero(degree: usize) -> Self {
        Self { degree, coeffs: BTreeMap::new() }
    }

    pub fn scalar(c: C64) -> Self {
        let mut t = Self::zero(0);
        t.coeffs.insert(Vec::new(), c);
        t.prune();
        t
    }

    /// Degree-one tensor from `(mode, coefficient)` pairs.
    pub fn vector(terms: &[(u32, C64)]) -> Self {
        let mut t = Self::zero(1);
        for &(a, c) in terms {
            *t.coeffs.entry(vec![a]).or_default() += c;
        }
        t.prune();
        t
    }

    /// `e_{m₁}∧…∧e_{mₙ}` for arbitrary (unsorted) modes.
    pub fn basis(modes: &[u32]) -> Self {
        let mut t = Self::zero(modes.len());
        t.add_term(modes, C64::new(1.0, 0.0));
        t
    }

    /// Adds `c·e_{k₁}∧…∧e_{kₙ}`, sorting `key` with its sign.
    pub fn add_term(&mut self, key: &[u32], c: C64) {
        assert_eq!(key.len(), self.degree, "key length must equal the degree");
        if let Some((k, s)) = sort_with_sign(key) {
            let e = self.coeffs.entry(k.clone()).or_default();
            *e += c * s;
            if *e == C64::new(0.0, 0.0) {
                self.coeffs.remove(&k);
            }
        }
    }

    pub fn from_sorted(degree: usize, coeffs: BTreeMap<Key, C64>) -> Result<Self> {
        for k in coeffs.keys() {
            if k.len() != degree || k.windows(2).any(|w| w[0] >= w[1]) {
                return Err(FwnError::Unsupported(format!("key {k:?} is not a strictly increasing {degree}-tuple")));
            }
        }
        let mut t = Self { degree, coeffs };
        t.prune();
        Ok(t)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &BTreeMap<Key, C64> {
        &self.coeffs
    }

    pub fn get(&self, key: &[u32]) -> C64 {
        self.coeffs.get(key).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| *c != C64::new(0.0, 0.0));
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut t = self.clone();
        t.coeffs.values_mut().for_each(|x| *x *= c);
        t.prune();
        t
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: C64, other: &Self) -> Result<Self> {
        if self.degree != other.degree {
            return Err(FwnError::DegreeMismatch(self.degree, other.degree));
        }
        let mut t = self.clone();
        for (k, v) in &other.coeffs {
            *t.coeffs.entry(k.clone()).or_default() += c * v;
        }
        t.prune();
        Ok(t)
    }

    pub fn wedge(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.degree + other.degree);
        for (a, ca) in &self.coeffs {
            for (b, cb) in &other.coeffs {
                let (merged, s) = match merge_sign(a, b) {
                    Some(x) => x,
                    None => continue,
                };
                *out.coeffs.entry(merged).or_default() += ca * cb * s;
            }
        }
        out.prune();
        out
    }

    /// `(a, b)₀ = (1/n!) Σ_I conj(a_I) b_I`.
    pub fn inner_product(&self, other: &Self) -> Result<C64> {
        if self.degree != other.degree {
            return Err(FwnError::DegreeMismatch(self.degree, other.degree));
        }
        let s: C64 = self
            .coeffs
            .iter()
            .filter_map(|(k, a)| other.coeffs.get(k).map(|b| a.conj() * b))
            .sum();
        Ok(s / factorial(self.degree))
    }

    pub fn norm0(&self) -> f64 {
        self.weighted_norm(0.0, &[])
    }

    /// `|A^{⊗n p} a|₀` with `eigenvalues[mode] = λ_mode`; `p = 0` ignores them.
    pub fn weighted_norm(&self, p: f64, eigenvalues: &[f64]) -> f64 {
        let s: f64 = self
            .coeffs
            .iter()
            .map(|(k, c)| {
                let w: f64 = if p == 0.0 {
                    1.0
                } else {
                    k.iter().map(|&i| eigenvalues[i as usize].powf(2.0 * p)).product()
                };
                c.norm_sqr() * w
            })
            .sum();
        (s / factorial(self.degree)).sqrt()
    }

    /// Dense expansion `Σ_I c_I (1/n!) Σ_σ sign(σ) e_{I∘σ}`.
    pub fn to_tensor(&self) -> Tensor {
        let perms = permutations(self.degree);
        let norm = factorial(self.degree);
        let mut t = Tensor::zero(self.degree);
        for (k, c) in &self.coeffs {
            for (p, s) in &perms {
                let nk: Key = p.iter().map(|&i| k[i]).collect();
                *t.coeffs.entry(nk).or_default() += c * (s / norm);
            }
        }
        t.prune();
        t
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        max_diff(&self.coeffs, &other.coeffs)
    }

    /// Random tensor with `terms` keys drawn from modes `0..n_modes`.
    pub fn random<R: Rng>(rng: &mut R, degree: usize, n_modes: u32, terms: usize) -> Self {
        let mut t = Self::zero(degree);
        if degree as u32 > n_modes {
            return t;
        }
        for _ in 0..terms {
            let mut key = Vec::with_capacity(degree);
            while key.len() < degree {
                let a = rng.gen_range(0..n_modes);
                if !key.contains(&a) {
                    key.push(a);
                }
            }
            key.sort_unstable();
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            *t.coeffs.entry(key).or_default() += c;
        }
        t.prune();
        t
    }
}

/// Merges two increasing keys; the sign counts the transpositions needed.
pub(crate) fn merge_sign(a: &[u32], b: &[u32]) -> Option<(Key, f64)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let mut swaps = 0usize;
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                // b[j] jumps over the remaining a's.
                swaps += a.len() - i;
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => return None,
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    Some((out, if swaps.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sort_sign_detects_repeats() {
        assert_eq!(sort_with_sign(&[2, 1]), Some((vec![1, 2], -1.0)));
        assert_eq!(sort_with_sign(&[3, 1, 3]), None);
        assert_eq!(sort_with_sign(&[3, 1, 2]), Some((vec![1, 2, 3], 1.0)));
    }

    #[test]
    fn merge_matches_sort() {
        let (k, s) = merge_sign(&[1, 4], &[2, 3]).unwrap();
        assert_eq!(k, vec![1, 2, 3, 4]);
        assert_eq!(s, sort_with_sign(&[1, 4, 2, 3]).unwrap().1);
    }

    #[test]
    fn permutation_count_and_signs() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p.iter().map(|x| x.1).sum::<f64>(), 0.0);
    }
}
