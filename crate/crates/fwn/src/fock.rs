//! Truncated fermionic Fock vectors in occupation coordinates.
//!
//! The amplitude of key `I` is the wedge coefficient `c_I` of `e_{i₁}∧…∧e_{iₙ}`,
//! so `‖v‖₀² = Σ_n n!|v_n|₀² = Σ_I |c_I|²`. Modes are bits of a `u128`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

use crate::exterior::AntisymTensor;
use crate::oneparticle::OneParticleModel;
use crate::{FwnError, Result, C64};

pub const MAX_MODES: usize = 128;

/// Set of occupied modes.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation(pub u128);

impl Occupation {
    pub const EMPTY: Occupation = Occupation(0);

    pub fn from_modes(modes: &[u32]) -> Self {
        Occupation(modes.iter().fold(0u128, |acc, &m| acc | (1u128 << m)))
    }

    #[inline]
    pub fn degree(self) -> usize {
        self.0.count_ones() as usize
    }

    #[inline]
    pub fn contains(self, mode: u32) -> bool {
        self.0 >> mode & 1 == 1
    }

    /// Occupied modes strictly below `mode`.
    #[inline]
    pub fn below(self, mode: u32) -> u32 {
        (self.0 & ((1u128 << mode) - 1)).count_ones()
    }

    pub fn modes(self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.degree());
        let mut x = self.0;
        while x != 0 {
            let t = x.trailing_zeros();
            out.push(t);
            x &= x - 1;
        }
        out
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

impl Parity {
    pub fn of(degree: usize) -> Self {
        if degree.is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FockVector {
    amps: FxHashMap<Occupation, C64>,
    max_particles: usize,
    truncated: bool,
}

impl FockVector {
    pub fn zero(max_particles: usize) -> Self {
        Self { amps: FxHashMap::default(), max_particles, truncated: false }
    }

    pub fn vacuum(max_particles: usize) -> Self {
        let mut v = Self::zero(max_particles);
        v.amps.insert(Occupation::EMPTY, C64::new(1.0, 0.0));
        v
    }

    pub fn basis(modes: &[u32], max_particles: usize) -> Self {
        let mut v = Self::zero(max_particles);
        v.add_component(&AntisymTensor::basis(modes));
        v
    }

    pub fn from_components(components: &[AntisymTensor], max_particles: usize) -> Result<Self> {
        let mut v = Self::zero(max_particles);
        for t in components {
            if t.degree() > max_particles {
                return Err(FwnError::DegreeMismatch(t.degree(), max_particles));
            }
            v.add_component(t);
        }
        Ok(v)
    }

    fn add_component(&mut self, t: &AntisymTensor) {
        for (k, c) in t.coeffs() {
            *self.amps.entry(Occupation::from_modes(k)).or_default() += c;
        }
        self.prune();
    }

    pub fn max_particles(&self) -> usize {
        self.max_particles
    }

    pub fn with_max_particles(mut self, max_particles: usize) -> Self {
        self.max_particles = max_particles;
        self
    }

    /// Set once any operator dropped a component above `max_particles`.
    pub fn truncated(&self) -> bool {
        self.truncated
    }

    pub(crate) fn mark_truncated(&mut self) {
        self.truncated = true;
    }

    pub fn amps(&self) -> &FxHashMap<Occupation, C64> {
        &self.amps
    }

    pub fn amplitude(&self, occ: Occupation) -> C64 {
        self.amps.get(&occ).copied().unwrap_or_default()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    #[inline]
    pub(crate) fn add(&mut self, occ: Occupation, c: C64) {
        if occ.degree() > self.max_particles {
            self.truncated = true;
            return;
        }
        *self.amps.entry(occ).or_default() += c;
    }

    pub(crate) fn prune(&mut self) {
        self.amps.retain(|_, c| *c != C64::new(0.0, 0.0));
    }

    pub fn component(&self, degree: usize) -> AntisymTensor {
        let coeffs = self.amps.iter().filter(|(o, _)| o.degree() == degree).map(|(o, c)| (o.modes(), *c)).collect();
        AntisymTensor::from_sorted(degree, coeffs).expect("occupation keys are increasing")
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.amps.keys().map(|o| o.degree()).collect();
        d.sort_unstable();
        d.dedup();
        d
    }

    /// `Some(parity)` if all components share a parity (the zero vector is even).
    pub fn parity(&self) -> Option<Parity> {
        let mut p = None;
        for o in self.amps.keys() {
            let q = Parity::of(o.degree());
            match p {
                None => p = Some(q),
                Some(x) if x != q => return None,
                _ => {}
            }
        }
        Some(p.unwrap_or(Parity::Even))
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut v = self.clone();
        v.amps.values_mut().for_each(|x| *x *= c);
        v.prune();
        v
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: C64, other: &Self) -> Self {
        let mut v = self.clone();
        v.max_particles = v.max_particles.max(other.max_particles);
        v.truncated |= other.truncated;
        for (o, x) in &other.amps {
            *v.amps.entry(*o).or_default() += c * x;
        }
        v.prune();
        v
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(C64::new(-1.0, 0.0), other)
    }

    pub fn inner(&self, other: &Self) -> C64 {
        self.amps.iter().filter_map(|(o, a)| other.amps.get(o).map(|b| a.conj() * b)).sum()
    }

    pub fn norm0(&self) -> f64 {
        self.amps.values().fold(0.0, |acc, c| acc + c.norm_sqr()).sqrt()
    }

    /// Drops components above `max_particles`, flagging the vector if any were present.
    pub fn truncate(mut self, max_particles: usize) -> Self {
        let before = self.amps.len();
        self.amps.retain(|o, _| o.degree() <= max_particles);
        if self.amps.len() != before {
            self.truncated = true;
        }
        self.max_particles = max_particles;
        self
    }

    /// Builds a vector from raw occupation amplitudes.
    pub fn from_amplitudes(amps: impl IntoIterator<Item = (Occupation, C64)>, max_particles: usize) -> Self {
        let mut v = Self::zero(max_particles);
        for (o, c) in amps {
            v.add(o, c);
        }
        v.prune();
        v
    }
}

/// `‖v‖_p = √(Σ_n n!|v_n|_p²)`.
pub fn fock_norm(v: &FockVector, p: f64, eigenvalues: &[f64]) -> f64 {
    v.amps
        .iter()
        .map(|(o, c)| {
            let w: f64 = if p == 0.0 {
                1.0
            } else {
                o.modes().iter().map(|&m| eigenvalues[m as usize].powf(2.0 * p)).product()
            };
            c.norm_sqr() * w
        })
        .sum::<f64>()
        .sqrt()
}

/// Splits into even and odd degree parts.
pub fn sector_split(v: &FockVector) -> (FockVector, FockVector) {
    let mut even = FockVector::zero(v.max_particles);
    let mut odd = FockVector::zero(v.max_particles);
    for (o, c) in &v.amps {
        match Parity::of(o.degree()) {
            Parity::Even => even.amps.insert(*o, *c),
            Parity::Odd => odd.amps.insert(*o, *c),
        };
    }
    even.truncated = v.truncated;
    odd.truncated = v.truncated;
    (even, odd)
}

/// Deterministic random normalized vector on the given modes with `keys_per_degree`
/// random keys in every degree of the requested parity up to `max_particles`.
pub fn random_fock_vector_on(
    support: &[u32],
    max_particles: usize,
    parity: Option<Parity>,
    keys_per_degree: usize,
    seed: u64,
) -> Result<FockVector> {
    if support.is_empty() {
        return Err(FwnError::EmptySupport);
    }
    if let Some(&m) = support.iter().max() {
        if m as usize >= MAX_MODES {
            return Err(FwnError::ModeLimit(m as usize + 1));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = FockVector::zero(max_particles);
    for deg in 0..=max_particles.min(support.len()) {
        if let Some(p) = parity {
            if Parity::of(deg) != p {
                continue;
            }
        }
        let keys = if deg == 0 { 1 } else { keys_per_degree };
        for _ in 0..keys {
            let mut occ = Occupation::EMPTY;
            while occ.degree() < deg {
                occ.0 |= 1u128 << support[rng.gen_range(0..support.len())];
            }
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            v.add(occ, c);
        }
    }
    v.prune();
    let n = v.norm0();
    if n == 0.0 {
        return Err(FwnError::EmptySupport);
    }
    Ok(v.scale(C64::new(1.0 / n, 0.0)))
}

/// Positive modes of `model` with momentum max-norm at most `bulk_radius`.
pub fn bulk_modes(model: &OneParticleModel, bulk_radius: u32) -> Vec<u32> {
    (0..model.len())
        .filter(|&k| model.mode(k).momentum.max_norm() <= bulk_radius as i32)
        .map(|k| k as u32)
        .collect()
}

/// Random vector supported on the bulk of a model.
pub fn random_fock_vector(
    model: &OneParticleModel,
    max_particles: usize,
    parity: Option<Parity>,
    bulk_radius: u32,
    seed: u64,
) -> Result<FockVector> {
    if bulk_radius > model.scenario().mode_cutoff {
        return Err(FwnError::InvalidScenario(format!(
            "bulk radius {bulk_radius} exceeds the cutoff {}",
            model.scenario().mode_cutoff
        )));
    }
    if model.len() > MAX_MODES {
        return Err(FwnError::ModeLimit(model.len()));
    }
    random_fock_vector_on(&bulk_modes(model, bulk_radius), max_particles, parity, 3, seed)
}
