//! Implementability criteria as partial sums over growing cutoffs.
//!
//! Every criterion is a weighted sum of `|C_{in}|²` over the block
//! `C = P₊XP₋Γ`. The entries come from closed forms, so a cutoff of 1024 in one
//! dimension or 16 on the 3-torus never needs a full model. The Frobenius route
//! through [`gauge_block`] is kept as an independent check at small cutoffs.

use rayon::prelude::*;
use serde::Serialize;

use crate::oneparticle::{closed_form, gauge_block, Block, GaugeFunction, ModeIndex, Momentum, OneParticleModel, Scenario, Sign};
use crate::{FwnError, Result};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionKind {
    /// `Σ λₙ^{−2p} |P₊XP₋Γeₙ|²_{−p}`.
    GenFunctional,
    /// `Σ λₙ^{2p} |P₊XP₋Γeₙ|²_{p}`.
    TestFunctional,
    /// `|P₊XP₋Γ|²_{HS}`.
    HilbertSchmidt,
}

impl CriterionKind {
    pub fn name(self) -> &'static str {
        match self {
            CriterionKind::GenFunctional => "gen_functional",
            CriterionKind::TestFunctional => "test_functional",
            CriterionKind::HilbertSchmidt => "hilbert_schmidt",
        }
    }

    fn exponent(self, p: f64) -> f64 {
        match self {
            CriterionKind::GenFunctional => -p,
            CriterionKind::TestFunctional => p,
            CriterionKind::HilbertSchmidt => 0.0,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Convergent,
    Divergent,
    Inconclusive,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub cutoffs: Vec<u32>,
    pub partial_sums: Vec<f64>,
    /// Fitted slope of `log(ΔS/Δlog Λ)` against `log Λ`.
    pub growth_exponent: f64,
    pub verdict: Verdict,
    pub rel_tol: f64,
}

/// Sublattice of outgoing momenta used to exhibit divergence on the 3-torus.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Sublattice {
    All,
    /// `α₁ = α₃ = 0`, the momenta fixed by `ι`.
    IotaLine,
    /// `α₂ = 0`.
    Alpha2Plane,
}

impl Sublattice {
    fn contains(self, a: Momentum) -> bool {
        match self {
            Sublattice::All => true,
            Sublattice::IotaLine => a.0[0] == 0 && a.0[2] == 0,
            Sublattice::Alpha2Plane => a.0[1] == 0,
        }
    }
}

/// Entries `(λ_out, λ_in, |C|²)` of the block at one cutoff.
fn block_entries(scenario: &Scenario, gauge: &GaugeFunction, sub: Sublattice) -> Vec<(f64, f64, f64)> {
    let dim = scenario.dim();
    let lam = scenario.mode_cutoff as i32;
    let m = scenario.mass;
    let support: Vec<Momentum> = gauge.support().map(|(g, _)| g).collect();
    let axis: Vec<i32> = (-lam..=lam).collect();
    let cols: Vec<Momentum> = if dim == 1 {
        axis.iter().map(|&a| Momentum([a, 0, 0])).collect()
    } else {
        let mut v = Vec::with_capacity(axis.len().pow(3));
        for &a in &axis {
            for &b in &axis {
                for &c in &axis {
                    v.push(Momentum([a, b, c]));
                }
            }
        }
        v
    };
    let weight = |a: Momentum| scenario.weight((a.norm_sqr() + m * m).sqrt());
    cols.par_iter()
        .flat_map_iter(|&beta| {
            let mut out = Vec::new();
            for &g in &support {
                let alpha = g - beta;
                if alpha.max_norm() > lam || !sub.contains(alpha) {
                    continue;
                }
                let (wa, wb) = (weight(alpha), weight(beta));
                let mut c2 = 0.0;
                for s in [Sign::Plus, Sign::Minus] {
                    for t in [Sign::Plus, Sign::Minus] {
                        let v = closed_form(
                            dim,
                            m,
                            gauge,
                            &ModeIndex::positive(alpha, s),
                            &ModeIndex::positive(beta, t),
                            Block::PlusMinusGamma,
                        );
                        c2 += v.norm_sqr();
                    }
                }
                if c2 > 0.0 {
                    out.push((wa, wb, c2));
                }
            }
            out
        })
        .collect()
}

fn weighted(entries: &[(f64, f64, f64)], q: f64) -> f64 {
    if q == 0.0 {
        return entries.iter().map(|e| e.2).sum();
    }
    entries.iter().map(|&(a, b, c)| (a * b).powf(2.0 * q) * c).sum()
}

/// `Σₙ λₙ^{±2p} Σᵢ λᵢ^{±2p} |C_{in}|²` over positive modes within the cutoff.
pub fn criterion_partial_sum(scenario: &Scenario, gauge: &GaugeFunction, p: f64, signed: bool) -> f64 {
    let q = if signed { -p } else { p };
    weighted(&block_entries(scenario, gauge, Sublattice::All), q)
}

/// The same sum with outgoing momenta restricted to a sublattice.
pub fn sublattice_partial_sum(scenario: &Scenario, gauge: &GaugeFunction, p: f64, sub: Sublattice) -> f64 {
    weighted(&block_entries(scenario, gauge, sub), p)
}

/// `|P₊XP₋Γ|²_{HS}` from the spectral operator of a built model.
pub fn frobenius_sq(model: &OneParticleModel, gauge: &GaugeFunction) -> Result<f64> {
    Ok(gauge_block(model, gauge, Block::PlusMinusGamma)?.frobenius_sq())
}

/// Rearranged double sum `Σ_γ |φ̂(γ)|² Σ_α E(α)^p E(γ−α)^p (1 − α(α−γ)/√(EE) − m²/√(EE))`.
#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormSum {
    /// Both `α` and `γ − α` within the cutoff; equals the partial sum.
    pub restricted: f64,
    /// `α` within the cutoff only, as in the rearranged proof.
    pub proof_form: f64,
    /// `proof_form − restricted`: terms whose partner momentum leaves the cutoff.
    pub boundary_correction: f64,
}

pub fn closed_form_sum_massive1d(gauge: &GaugeFunction, mass: f64, p: f64, cutoff: u32) -> Result<ClosedFormSum> {
    if gauge.dim() != 1 || mass <= 0.0 {
        return Err(FwnError::Unsupported("closed-form sum needs a massive 1-torus".into()));
    }
    let lam = cutoff as i32;
    let e = |a: i32| (a as f64).powi(2) + mass * mass;
    let mut restricted = 0.0;
    let mut proof = 0.0;
    for (g, c) in gauge.support() {
        let g = g.0[0];
        for a in -lam..=lam {
            let b = g - a;
            let (ea, eb) = (e(a), e(b));
            let root = (ea * eb).sqrt();
            let bracket = 1.0 - (a as f64) * ((a - g) as f64) / root - mass * mass / root;
            let term = c.norm_sqr() * ea.powf(p) * eb.powf(p) * bracket;
            proof += term;
            if b.abs() <= lam {
                restricted += term;
            }
        }
    }
    Ok(ClosedFormSum { restricted, proof_form: proof, boundary_correction: proof - restricted })
}

/// `ΔS/Δlog Λ` between consecutive ladder points and the geometric midpoints.
fn increment_density(cutoffs: &[u32], sums: &[f64]) -> Vec<(f64, f64)> {
    cutoffs
        .windows(2)
        .zip(sums.windows(2))
        .map(|(l, s)| {
            let (l0, l1) = (l[0] as f64, l[1] as f64);
            ((l0 * l1).sqrt(), (s[1] - s[0]) / (l1.ln() - l0.ln()))
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Classifies a ladder of partial sums.
///
/// Convergent: the last two relative increments are below `rel_tol` and do not
/// grow. Divergent: the increment density `ΔS/Δlog Λ` has fitted log-log slope
/// at least −0.1, which keeps logarithmic growth (slope 0) divergent.
pub fn diagnose(cutoffs: &[u32], sums: &[f64], rel_tol: f64) -> Result<ConvergenceReport> {
    if cutoffs.len() != sums.len() || cutoffs.len() < 4 {
        return Err(FwnError::Config(format!("diagnosis needs ≥ 4 ladder points, got {}", cutoffs.len())));
    }
    if cutoffs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FwnError::Config("ladder must be strictly increasing".into()));
    }
    for (i, w) in sums.windows(2).enumerate() {
        if w[1] < w[0] - 1e-12 * w[0].abs().max(1.0) {
            return Err(FwnError::NonMonotone(i + 1));
        }
    }
    let rel: Vec<f64> = sums
        .windows(2)
        .map(|w| if w[1] == 0.0 { 0.0 } else { (w[1] - w[0]).max(0.0) / w[1] })
        .collect();
    let k = rel.len();
    let converged = rel[k - 1] < rel_tol && rel[k - 2] < rel_tol && rel[k - 1] <= rel[k - 2];

    let dens: Vec<(f64, f64)> = increment_density(cutoffs, sums)
        .into_iter()
        .filter(|&(_, d)| d > 0.0)
        .map(|(l, d)| (l.ln(), d.ln()))
        .collect();
    let growth_exponent = if dens.len() >= 2 { fit_slope(&dens) } else { f64::NEG_INFINITY };
    let verdict = if converged {
        Verdict::Convergent
    } else if growth_exponent >= -0.1 {
        Verdict::Divergent
    } else {
        Verdict::Inconclusive
    };
    Ok(ConvergenceReport {
        cutoffs: cutoffs.to_vec(),
        partial_sums: sums.to_vec(),
        growth_exponent,
        verdict,
        rel_tol,
    })
}

/// `Σ_j λ_j^{−2a}` over positive modes within each cutoff, diagnosed.
pub fn delta_squared(scenario: &Scenario, exponent: f64, ladder: &[u32], rel_tol: f64) -> Result<ConvergenceReport> {
    if exponent <= 0.0 {
        return Err(FwnError::Config(format!("nuclearity exponent must be > 0, got {exponent}")));
    }
    let m = scenario.mass;
    let sums: Vec<f64> = ladder
        .par_iter()
        .map(|&lam| {
            let lam = lam as i32;
            let term = |n2: f64| 2.0 * scenario.weight((n2 + m * m).sqrt()).powf(-2.0 * exponent);
            if scenario.dim() == 1 {
                (-lam..=lam).map(|a| term((a * a) as f64)).sum()
            } else {
                let mut s = 0.0;
                for a in -lam..=lam {
                    for b in -lam..=lam {
                        for c in -lam..=lam {
                            s += term((a * a + b * b + c * c) as f64);
                        }
                    }
                }
                s
            }
        })
        .collect();
    diagnose(ladder, &sums, rel_tol)
}

/// One criterion at one exponent.
#[derive(Clone, Debug, Serialize)]
pub struct CriterionReport {
    pub kind: CriterionKind,
    pub p: f64,
    pub report: ConvergenceReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct SublatticeReport {
    pub sublattice: Sublattice,
    pub cutoffs: Vec<u32>,
    pub partial_sums: Vec<f64>,
    /// Fitted slope of `log S` against `log Λ`.
    pub growth_exponent: f64,
}

/// HS value against `2|φ̂(0)|² + ¼ζ_Λ(3)‖φ''‖²`.
#[derive(Clone, Debug, Serialize)]
pub struct MasslessBound {
    pub hilbert_schmidt: f64,
    /// Bound with `‖φ''‖²` for the normalized measure `dx/2π`.
    pub bound: f64,
    /// Bound with `‖φ''‖²` for the Lebesgue measure `dx`.
    pub bound_lebesgue: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosedFormCheck {
    pub cutoff: u32,
    pub partial_sum: f64,
    pub frobenius: f64,
    pub closed_form: ClosedFormSum,
}

#[derive(Clone, Debug, Serialize)]
pub struct TopVerdicts {
    /// Criterion 3: `P₊XP₋Γ` Hilbert-Schmidt.
    pub implementable_as_gamma_to_dual: bool,
    /// Criterion 1 holds at some tested `p`.
    pub as_test_to_dual: bool,
    /// Criterion 2 holds at every tested `p`.
    pub as_test_to_test: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScenarioReport {
    pub scenario: Scenario,
    pub ladder: Vec<u32>,
    pub p_values: Vec<f64>,
    pub rel_tol: f64,
    pub criteria: Vec<CriterionReport>,
    pub verdicts: TopVerdicts,
    pub sublattices: Vec<SublatticeReport>,
    pub massless_bound: Option<MasslessBound>,
    pub closed_form_check: Option<ClosedFormCheck>,
}

impl ScenarioReport {
    pub fn criterion(&self, kind: CriterionKind, p: f64) -> Option<&CriterionReport> {
        self.criteria.iter().find(|c| c.kind == kind && (c.p - p).abs() < 1e-12)
    }

    pub fn sublattice(&self, sub: Sublattice) -> Option<&SublatticeReport> {
        self.sublattices.iter().find(|s| s.sublattice == sub)
    }

    /// Rows `criterion,p,Λ,partial_sum`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("criterion,p,Λ,partial_sum\n");
        for c in &self.criteria {
            for (l, v) in c.report.cutoffs.iter().zip(&c.report.partial_sums) {
                s.push_str(&format!("{},{},{},{:.17e}\n", c.kind.name(), c.p, l, v));
            }
        }
        for sl in &self.sublattices {
            let name = match sl.sublattice {
                Sublattice::All => "hilbert_schmidt",
                Sublattice::IotaLine => "hilbert_schmidt_iota_line",
                Sublattice::Alpha2Plane => "hilbert_schmidt_alpha2_plane",
            };
            for (l, v) in sl.cutoffs.iter().zip(&sl.partial_sums) {
                s.push_str(&format!("{name},0,{l},{v:.17e}\n"));
            }
        }
        s
    }
}

/// Massless 1-torus bound on the HS norm.
pub fn massless_bound(scenario: &Scenario, gauge: &GaugeFunction, hs: f64) -> MasslessBound {
    let lam = scenario.mode_cutoff as i32;
    let zeta: f64 = (1..=lam).map(|g| (g as f64).powi(-3)).sum();
    let d2 = gauge.sobolev_sq(2);
    let phi0 = gauge.hat(Momentum([0, 0, 0])).norm_sqr();
    let bound = 2.0 * phi0 + 0.25 * zeta * d2;
    let bound_lebesgue = 2.0 * phi0 + 0.25 * zeta * d2 * 2.0 * std::f64::consts::PI;
    MasslessBound { hilbert_schmidt: hs, bound, bound_lebesgue, holds: hs <= bound * (1.0 + 1e-12) }
}

/// Evaluates all criteria over the ladder and the scenario-specific extras.
pub fn scenario_report(
    scenario: &Scenario,
    gauge: &GaugeFunction,
    p_values: &[f64],
    ladder: &[u32],
    rel_tol: f64,
) -> Result<ScenarioReport> {
    scenario.validate()?;
    if gauge.dim() != scenario.dim() {
        return Err(FwnError::InvalidScenario("gauge and torus dimensions differ".into()));
    }
    let entries: Vec<Vec<(f64, f64, f64)>> =
        ladder.iter().map(|&l| block_entries(&scenario.with_cutoff(l), gauge, Sublattice::All)).collect();
    let mut jobs = vec![(CriterionKind::HilbertSchmidt, 0.0)];
    for &p in p_values.iter().filter(|&&p| p > 0.0) {
        jobs.push((CriterionKind::TestFunctional, p));
        jobs.push((CriterionKind::GenFunctional, p));
    }
    let criteria = jobs
        .iter()
        .map(|&(kind, p)| {
            let sums: Vec<f64> = entries.iter().map(|e| weighted(e, kind.exponent(p))).collect();
            Ok(CriterionReport { kind, p, report: diagnose(ladder, &sums, rel_tol)? })
        })
        .collect::<Result<Vec<_>>>()?;

    let hs_ok = criteria[0].report.verdict == Verdict::Convergent;
    let of_kind = |k: CriterionKind| criteria.iter().filter(move |c| c.kind == k);
    let verdicts = TopVerdicts {
        implementable_as_gamma_to_dual: hs_ok,
        as_test_to_dual: of_kind(CriterionKind::GenFunctional).any(|c| c.report.verdict == Verdict::Convergent),
        as_test_to_test: of_kind(CriterionKind::TestFunctional).count() > 0
            && of_kind(CriterionKind::TestFunctional).all(|c| c.report.verdict == Verdict::Convergent),
    };

    let mut sublattices = Vec::new();
    if scenario.dim() == 3 {
        for sub in [Sublattice::IotaLine, Sublattice::Alpha2Plane] {
            let sums: Vec<f64> =
                ladder.iter().map(|&l| sublattice_partial_sum(&scenario.with_cutoff(l), gauge, 0.0, sub)).collect();
            let pts: Vec<(f64, f64)> = ladder
                .iter()
                .zip(&sums)
                .filter(|(_, s)| **s > 0.0)
                .map(|(l, s)| ((*l as f64).ln(), s.ln()))
                .collect();
            sublattices.push(SublatticeReport {
                sublattice: sub,
                cutoffs: ladder.to_vec(),
                partial_sums: sums,
                growth_exponent: if pts.len() >= 2 { fit_slope(&pts) } else { 0.0 },
            });
        }
    }

    let last = *ladder.last().expect("ladder checked by diagnose");
    let massless_bound = (scenario.dim() == 1 && scenario.mass == 0.0)
        .then(|| massless_bound(&scenario.with_cutoff(last), gauge, *criteria[0].report.partial_sums.last().unwrap()));

    let closed_form_check = if scenario.dim() == 1 && scenario.mass > 0.0 {
        let cutoff = ladder[0].min(32);
        let sc = scenario.with_cutoff(cutoff);
        let model = OneParticleModel::build(&sc)?;
        Some(ClosedFormCheck {
            cutoff,
            partial_sum: criterion_partial_sum(&sc, gauge, 0.0, false),
            frobenius: frobenius_sq(&model, gauge)?,
            closed_form: closed_form_sum_massive1d(gauge, scenario.mass, 0.0, cutoff)?,
        })
    } else {
        None
    };

    Ok(ScenarioReport {
        scenario: scenario.clone(),
        ladder: ladder.to_vec(),
        p_values: p_values.to_vec(),
        rel_tol,
        criteria,
        verdicts,
        sublattices,
        massless_bound,
        closed_form_check,
    })
}
