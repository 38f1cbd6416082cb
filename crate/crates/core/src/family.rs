//! Parametric catalog of Musielak-Orlicz functions.
//!
//! Every [`MOFunction`] evaluates `Φ(x,t)` (with `+∞` as a first-class,
//! absorbing value), carries its analytic pole metadata, and optionally a
//! doubling certificate `Φ(x,2t) ≤ C·Φ(x,t) + h(x)`.

use crate::descriptor::ScalarField;
use crate::error::{Error, Result};
use crate::geometry::{lattice_cells, BoxSet, Cuboid};
use crate::rationals;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Half-width of the default working window standing in for an unbounded
/// domain.
pub const DEFAULT_DOMAIN_HALF_WIDTH: f64 = 1e6;

/// Which side of a pole carries the declared lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleSide {
    Left,
    Right,
    Both,
}

/// How the pole enters `Φ`; every pole in this catalog enters through a
/// factor linear in `t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleScale {
    LinearInT,
}

/// Whether a pole is part of the truncated object or generated on demand
/// from dense-singularity metadata (full-series semantics).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleProvenance {
    Declared,
    DenseOnDemand,
}

/// An analytic pole of the weight: `Φ(x,t) ≥ t · c · |x − s|^{−q}` for `x`
/// on the declared side of `s`.
///
/// The coefficient is stored as `log2(c)` so that series terms with
/// astronomically small coefficients remain representable; `c > 0` always.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleInfo {
    pub location: Vec<f64>,
    /// Order `q > 0` of the pole; `q ≥ 1` is what divergence certificates
    /// require.
    pub order: f64,
    /// `log2` of the coefficient lower bound.
    pub coeff_log2: f64,
    pub side: PoleSide,
    pub scale: PoleScale,
    pub provenance: PoleProvenance,
}

impl PoleInfo {
    /// Coefficient as an `f64`; may underflow to 0 for very deep series
    /// terms, in which case `coeff_log2` remains the authoritative record.
    pub fn coeff(&self) -> f64 {
        self.coeff_log2.exp2()
    }

    /// Is `x` on the active side of the pole (1-d)?
    pub fn side_contains(&self, x: f64) -> bool {
        let s = self.location[0];
        match self.side {
            PoleSide::Left => x < s,
            PoleSide::Right => x > s,
            PoleSide::Both => x != s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertProvenance {
    Analytic,
    Sampled,
}

/// Doubling certificate: `Φ(x,2t) ≤ C·Φ(x,t) + h(x)` with `∫ h < ∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta2Certificate {
    pub c: f64,
    pub h: ScalarField,
    /// Declared value of `∫_Ω h`.
    pub h_integral: f64,
    pub provenance: CertProvenance,
}

impl Delta2Certificate {
    pub fn homogeneous(c: f64) -> Self {
        Delta2Certificate {
            c,
            h: ScalarField::constant(0.0),
            h_integral: 0.0,
            provenance: CertProvenance::Analytic,
        }
    }
}

/// Orlicz functions of `t` alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrliczKind {
    /// `t^exponent`, exponent ≥ 1.
    Power { exponent: f64 },
    /// `e^t − 1`.
    ExpM1,
}

impl OrliczKind {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            OrliczKind::Power { exponent } => t.powf(*exponent),
            OrliczKind::ExpM1 => t.exp_m1(),
        }
    }
}

/// Scalar weights for the `t·w(x)` family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    /// `1/|x|` on the line, defined as 0 at the origin.
    InverseAbs,
    /// A nonnegative closed-form field.
    Field { field: ScalarField },
}

/// One truncated series term: pole at the rational `num/den` with
/// coefficient `4^{−index}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesTerm {
    pub index: u64,
    pub num: u64,
    pub den: u64,
    pub location: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    Orlicz { phi: OrliczKind },
    WeightedLinear { weight: Weight },
    SeriesWeight { terms: Vec<SeriesTerm> },
    VariableExponent { p: ScalarField },
    DoublePhase {
        p: ScalarField,
        r: ScalarField,
        a: ScalarField,
    },
}

/// A Musielak-Orlicz function with analytic metadata.
#[derive(Debug, Clone)]
pub struct MOFunction {
    family: Family,
    domain: BoxSet,
    poles: Vec<PoleInfo>,
    delta2: Option<Delta2Certificate>,
    dense_singular_interval: Option<(f64, f64)>,
}

impl MOFunction {
    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn domain(&self) -> &BoxSet {
        &self.domain
    }

    pub fn poles(&self) -> &[PoleInfo] {
        &self.poles
    }

    pub fn delta2(&self) -> Option<&Delta2Certificate> {
        self.delta2.as_ref()
    }

    pub fn attach_delta2(&mut self, cert: Delta2Certificate) {
        self.delta2 = Some(cert);
    }

    /// Interval on which the *untruncated* function is singular everywhere
    /// (metadata; pointwise evaluation stays truncated).
    pub fn dense_singular_interval(&self) -> Option<(f64, f64)> {
        self.dense_singular_interval
    }

    /// `Φ(x, t)`; returns `+∞` when the value overflows, and `Φ(x,0) = 0`
    /// always.
    pub fn eval(&self, x: &[f64], t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        if t == 0.0 {
            return 0.0;
        }
        match &self.family {
            Family::Orlicz { phi } => phi.eval(t),
            Family::WeightedLinear { weight } => t * self.weight_at(x, weight),
            Family::SeriesWeight { .. } => t * self.series_weight_at(x[0]),
            Family::VariableExponent { p } => {
                let px = p.eval(x);
                if px.is_infinite() {
                    // limiting value of t^p/p
                    return if t > 1.0 { f64::INFINITY } else { 0.0 };
                }
                t.powf(px) / px
            }
            Family::DoublePhase { p, r, a } => {
                let ax = a.eval(x);
                let mut v = t.powf(p.eval(x));
                if ax > 0.0 {
                    v += ax * t.powf(r.eval(x));
                }
                v
            }
        }
    }

    fn weight_at(&self, x: &[f64], weight: &Weight) -> f64 {
        match weight {
            Weight::InverseAbs => {
                let xi = x[0];
                if xi == 0.0 {
                    0.0
                } else {
                    xi.abs().recip()
                }
            }
            Weight::Field { field } => field.eval(x).max(0.0),
        }
    }

    /// Scalar weight of a weighted-linear or series family (`Φ(x,t) = t·w(x)`).
    pub fn scalar_weight(&self, x: &[f64]) -> Option<f64> {
        match &self.family {
            Family::WeightedLinear { weight } => Some(self.weight_at(x, weight)),
            Family::SeriesWeight { .. } => Some(self.series_weight_at(x[0])),
            Family::Orlicz {
                phi: OrliczKind::Power { exponent },
            } if *exponent == 1.0 => Some(1.0),
            _ => None,
        }
    }

    /// Truncated weight of the series family: `Σ_{n≤N} 4^{−n} g_n(x)` on
    /// (0,1), and 1 outside.
    pub fn series_weight_at(&self, x: f64) -> f64 {
        let Family::SeriesWeight { terms } = &self.family else {
            return f64::NAN;
        };
        if !(0.0 < x && x < 1.0) {
            return 1.0;
        }
        let mut w = 0.0;
        for term in terms {
            if x > term.location {
                w += (-2.0 * term.index as f64).exp2() / (x - term.location);
            }
        }
        w
    }

    /// `Φ` linear in `t` for every `x`?
    pub fn is_linear_in_t(&self) -> bool {
        match &self.family {
            Family::WeightedLinear { .. } | Family::SeriesWeight { .. } => true,
            Family::Orlicz {
                phi: OrliczKind::Power { exponent },
            } => *exponent == 1.0,
            _ => false,
        }
    }

    /// Does the family expose a scalar weight (`Φ(x,t) = t·w(x)`)?
    pub fn has_scalar_weight(&self) -> bool {
        matches!(
            &self.family,
            Family::WeightedLinear { .. } | Family::SeriesWeight { .. }
        ) || self.is_linear_in_t()
    }

    /// On-demand pole of the untruncated series weight: the least-index
    /// enumeration element inside `(lo, hi) ⊆ (0,1)`, when the family
    /// carries dense-singularity metadata.
    pub fn dense_pole_in(&self, lo: f64, hi: f64) -> Option<PoleInfo> {
        let (s_lo, s_hi) = self.dense_singular_interval?;
        let lo = lo.max(s_lo);
        let hi = hi.min(s_hi);
        if lo >= hi {
            return None;
        }
        let (index, r) = rationals::least_index_in_interval(lo, hi)?;
        Some(PoleInfo {
            location: vec![r.value()],
            order: 1.0,
            coeff_log2: -2.0 * index,
            side: PoleSide::Right,
            scale: PoleScale::LinearInT,
            provenance: PoleProvenance::DenseOnDemand,
        })
    }

    /// Is a zero value of `Φ(x,t)` for `t>0` expected at this `x`
    /// (declared null set or truncation artifact)?
    fn positivity_exempt(&self, x: &[f64]) -> bool {
        match &self.family {
            Family::WeightedLinear {
                weight: Weight::InverseAbs,
            } => x[0] == 0.0,
            Family::WeightedLinear {
                weight: Weight::Field { field },
            } => field.eval(x) <= 0.0,
            Family::SeriesWeight { .. } => self.series_weight_at(x[0]) == 0.0,
            _ => false,
        }
    }

    /// Definition-level validation: `Φ(x,0)=0`, positivity off the declared
    /// null set, monotonicity and midpoint convexity in `t` at random
    /// samples.
    pub fn validate_definition(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let boxes = self.domain.boxes();
        if boxes.is_empty() {
            return Err(Error::precondition("empty domain"));
        }
        for _ in 0..samples {
            let b = &boxes[rng.random_range(0..boxes.len())];
            let x: Vec<f64> = b
                .lo()
                .iter()
                .zip(b.hi())
                .map(|(a, z)| rng.random_range(*a..*z))
                .collect();
            if self.eval(&x, 0.0) != 0.0 {
                return Err(Error::precondition(format!(
                    "Φ(x,0) ≠ 0 at x = {x:?}"
                )));
            }
            let t1 = 10f64.powf(rng.random_range(-3.0..2.0));
            let t2 = t1 * 10f64.powf(rng.random_range(0.0..2.0));
            let (f1, f2) = (self.eval(&x, t1), self.eval(&x, t2));
            if f1.is_finite() && f2.is_finite() {
                if f2 + 1e-9 * f2.abs() < f1 {
                    return Err(Error::precondition(format!(
                        "Φ decreasing in t at x = {x:?}: Φ({t1}) = {f1}, Φ({t2}) = {f2}"
                    )));
                }
                let mid = self.eval(&x, 0.5 * (t1 + t2));
                let bound = 0.5 * (f1 + f2);
                if mid > bound * (1.0 + 1e-9) + 1e-300 {
                    return Err(Error::precondition(format!(
                        "midpoint convexity violated at x = {x:?}, t ∈ [{t1}, {t2}]"
                    )));
                }
            }
            if !self.positivity_exempt(&x) && self.eval(&x, 1.0) <= 0.0 {
                return Err(Error::precondition(format!(
                    "Φ(x,1) = 0 off the declared null set at x = {x:?}"
                )));
            }
        }
        Ok(())
    }
}

fn default_domain() -> BoxSet {
    BoxSet::interval(-DEFAULT_DOMAIN_HALF_WIDTH, DEFAULT_DOMAIN_HALF_WIDTH, false)
        .expect("static bounds")
}

/// `Φ(x,t) = t/|x|` on the line (0 at the origin): linear weight with a
/// single order-1 pole at the origin.
pub fn make_phi1() -> MOFunction {
    MOFunction {
        family: Family::WeightedLinear {
            weight: Weight::InverseAbs,
        },
        domain: default_domain(),
        poles: vec![PoleInfo {
            location: vec![0.0],
            order: 1.0,
            coeff_log2: 0.0,
            side: PoleSide::Both,
            scale: PoleScale::LinearInT,
            provenance: PoleProvenance::Declared,
        }],
        delta2: Some(Delta2Certificate::homogeneous(2.0)),
        dense_singular_interval: None,
    }
}

/// Truncated series weight `Φ(x,t) = t·Σ_{n≤N} 4^{−n} g_n(x)` on (0,1) and
/// `t` outside, with `g_n(x) = 1/(x−r_n)` right of the n-th enumerated
/// rational `r_n`.
///
/// The untruncated weight has a pole at *every* rational of (0,1); that is
/// recorded as dense-singularity metadata, and `w_N ≤ w` makes truncated
/// modulars valid lower bounds.
pub fn make_phi2(n_terms: usize) -> Result<MOFunction> {
    if n_terms == 0 {
        return Err(Error::precondition("series truncation must keep n ≥ 1 terms"));
    }
    let rats = rationals::first_unit_rationals(n_terms);
    let terms: Vec<SeriesTerm> = rats
        .iter()
        .enumerate()
        .map(|(i, r)| SeriesTerm {
            index: i as u64 + 1,
            num: r.num,
            den: r.den,
            location: r.value(),
        })
        .collect();
    let poles = terms
        .iter()
        .map(|t| PoleInfo {
            location: vec![t.location],
            order: 1.0,
            coeff_log2: -2.0 * t.index as f64,
            side: PoleSide::Right,
            scale: PoleScale::LinearInT,
            provenance: PoleProvenance::Declared,
        })
        .collect();
    Ok(MOFunction {
        family: Family::SeriesWeight { terms },
        domain: default_domain(),
        poles,
        delta2: Some(Delta2Certificate::homogeneous(2.0)),
        dense_singular_interval: Some((0.0, 1.0)),
    })
}

/// `Φ(x,t) = φ(t)`, independent of `x`.
pub fn make_orlicz(phi: OrliczKind, domain: BoxSet) -> Result<MOFunction> {
    if let OrliczKind::Power { exponent } = &phi {
        if *exponent < 1.0 {
            return Err(Error::InvalidDescriptor(
                "power exponent must be at least 1".into(),
            ));
        }
    }
    Ok(MOFunction {
        family: Family::Orlicz { phi },
        domain,
        poles: Vec::new(),
        delta2: None,
        dense_singular_interval: None,
    })
}

/// `Φ(x,t) = t·w(x)` for a nonnegative closed-form weight.
pub fn make_weighted_linear(field: ScalarField, domain: BoxSet) -> Result<MOFunction> {
    field.validate(domain.dim())?;
    let (lo, _) = field.range_on_set(&domain);
    if lo < 0.0 {
        return Err(Error::InvalidDescriptor(
            "weight must be nonnegative on the domain".into(),
        ));
    }
    Ok(MOFunction {
        family: Family::WeightedLinear {
            weight: Weight::Field { field },
        },
        domain,
        poles: Vec::new(),
        delta2: Some(Delta2Certificate::homogeneous(2.0)),
        dense_singular_interval: None,
    })
}

/// `Φ(x,t) = t^{p(x)}/p(x)` with `1 ≤ p(x)`; attaches `C = 2^{p⁺}` when the
/// exponent is bounded.
pub fn make_variable_exponent(p: ScalarField, domain: BoxSet) -> Result<MOFunction> {
    p.validate(domain.dim())?;
    let (p_min, p_max) = p.range_on_set(&domain);
    if p_min < 1.0 {
        return Err(Error::InvalidDescriptor(format!(
            "exponent dips below 1 on the domain (inf p = {p_min})"
        )));
    }
    let delta2 = if p_max.is_finite() {
        Some(Delta2Certificate::homogeneous(2f64.powf(p_max)))
    } else {
        None
    };
    Ok(MOFunction {
        family: Family::VariableExponent { p },
        domain,
        poles: Vec::new(),
        delta2,
        dense_singular_interval: None,
    })
}

/// `Φ(x,t) = t^{p(x)} + a(x)·t^{r(x)}` with `a ≥ 0`, `1 ≤ p ≤ r` and `a`
/// essentially bounded.
pub fn make_double_phase(
    p: ScalarField,
    r: ScalarField,
    a: ScalarField,
    domain: BoxSet,
) -> Result<MOFunction> {
    p.validate(domain.dim())?;
    r.validate(domain.dim())?;
    a.validate(domain.dim())?;
    let (a_min, a_max) = a.range_on_set(&domain);
    if a_min < 0.0 {
        return Err(Error::InvalidDescriptor(
            "double-phase coefficient a must be nonnegative".into(),
        ));
    }
    if !a_max.is_finite() {
        return Err(Error::InvalidDescriptor(
            "double-phase coefficient a must be essentially bounded".into(),
        ));
    }
    let (p_min, _) = p.range_on_set(&domain);
    if p_min < 1.0 {
        return Err(Error::InvalidDescriptor(format!(
            "exponent p dips below 1 (inf p = {p_min})"
        )));
    }
    // p ≤ r checked pointwise on a lattice per box.
    for b in domain.boxes() {
        for x in validation_lattice(b, 64) {
            let (pv, rv) = (p.eval(&x), r.eval(&x));
            if pv > rv {
                return Err(Error::InvalidDescriptor(format!(
                    "p(x) > r(x) at x = {x:?}: {pv} > {rv}"
                )));
            }
        }
    }
    Ok(MOFunction {
        family: Family::DoublePhase { p, r, a },
        domain,
        poles: Vec::new(),
        delta2: None,
        dense_singular_interval: None,
    })
}

fn validation_lattice(b: &Cuboid, per_axis: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    match b.dim() {
        1 => {
            for i in 0..per_axis {
                let s = (i as f64 + 0.5) / per_axis as f64;
                pts.push(vec![b.lo()[0] + s * (b.hi()[0] - b.lo()[0])]);
            }
        }
        2 => {
            let side = (per_axis as f64).sqrt().ceil() as usize;
            for i in 0..side {
                for j in 0..side {
                    let sx = (i as f64 + 0.5) / side as f64;
                    let sy = (j as f64 + 0.5) / side as f64;
                    pts.push(vec![
                        b.lo()[0] + sx * (b.hi()[0] - b.lo()[0]),
                        b.lo()[1] + sy * (b.hi()[1] - b.lo()[1]),
                    ]);
                }
            }
        }
        _ => unreachable!(),
    }
    pts
}

/// Which clause of the double-phase doubling criterion applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoublePhaseClause {
    /// (i): the upper exponent is globally bounded.
    BoundedUpperExponent,
    /// (ii): strict gap p < r on the support of `a`, with `p` bounded
    /// globally and `r` bounded on that support.
    StrictGapOnSupport,
}

/// Outcome of the double-phase doubling check.
#[derive(Debug, Clone)]
pub enum DoublePhaseDelta2 {
    Certified {
        cert: Delta2Certificate,
        clause: DoublePhaseClause,
    },
    Rejected {
        reasons: Vec<String>,
    },
}

/// Check the two sufficient doubling clauses for a double-phase family on
/// declared analytic bounds; returns a certificate or a rejection naming
/// what failed in each clause.
pub fn check_double_phase_delta2(
    p: &ScalarField,
    r: &ScalarField,
    a: &ScalarField,
    domain: &BoxSet,
) -> Result<DoublePhaseDelta2> {
    let (_, p_sup) = p.range_on_set(domain);
    let (_, r_sup) = r.range_on_set(domain);
    let mut reasons = Vec::new();

    // Clause (i): r⁺ < ∞.
    if r_sup.is_finite() {
        let c = 2f64.powf(p_sup.max(r_sup));
        return Ok(DoublePhaseDelta2::Certified {
            cert: Delta2Certificate::homogeneous(c),
            clause: DoublePhaseClause::BoundedUpperExponent,
        });
    }
    reasons.push(format!(
        "clause bounded_upper_exponent: sup r = {r_sup} is not finite"
    ));

    // Clause (ii): p < r a.e. on supp a, sup p < ∞, sup r over supp a < ∞.
    let supp_a = a.support_within(domain)?;
    let clause_ii = (|| -> std::result::Result<f64, String> {
        if !p_sup.is_finite() {
            return Err(format!("sup p = {p_sup} is not finite"));
        }
        let (_, r_sup_on_supp) = if supp_a.is_empty() {
            (1.0, 1.0)
        } else {
            r.range_on_set(&supp_a)
        };
        if !r_sup_on_supp.is_finite() {
            return Err(format!(
                "sup of r over supp a = {r_sup_on_supp} is not finite"
            ));
        }
        for b in supp_a.boxes() {
            for x in validation_lattice(b, 64) {
                if p.eval(&x) >= r.eval(&x) {
                    return Err(format!("p(x) ≥ r(x) at x = {x:?} inside supp a"));
                }
            }
        }
        Ok(2f64.powf(p_sup.max(r_sup_on_supp)))
    })();
    match clause_ii {
        Ok(c) => Ok(DoublePhaseDelta2::Certified {
            cert: Delta2Certificate::homogeneous(c),
            clause: DoublePhaseClause::StrictGapOnSupport,
        }),
        Err(why) => {
            reasons.push(format!("clause strict_gap_on_support: {why}"));
            Ok(DoublePhaseDelta2::Rejected { reasons })
        }
    }
}

/// Sampling specification for doubling verification.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplingGrid {
    pub x_per_box: usize,
    pub t_count: usize,
    pub t_min: f64,
    pub t_max: f64,
}

impl Default for SamplingGrid {
    fn default() -> Self {
        SamplingGrid {
            x_per_box: 64,
            t_count: 24,
            t_min: 1e-4,
            t_max: 256.0,
        }
    }
}

/// Result of checking `Φ(x,2t) ≤ C·Φ(x,t) + h(x)` on a grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Delta2Report {
    pub pass: bool,
    pub samples: usize,
    /// Worst value of `lhs / (C·Φ + h)` observed (1 means equality).
    pub worst_ratio: f64,
    pub worst_at: Option<(Vec<f64>, f64)>,
}

/// Verify a doubling certificate on a sampling grid with 1e−9 relative
/// slack; infinite values on both sides count as satisfied.
pub fn verify_delta2(phi: &MOFunction, cert: &Delta2Certificate, grid: &SamplingGrid) -> Delta2Report {
    let mut samples = 0;
    let mut worst_ratio: f64 = 0.0;
    let mut worst_at = None;
    let mut pass = true;
    let log_min = grid.t_min.ln();
    let log_max = grid.t_max.ln();
    for b in phi.domain().boxes() {
        for x in validation_lattice(b, grid.x_per_box) {
            let hx = cert.h.eval(&x);
            for i in 0..grid.t_count {
                let t = if i == 0 {
                    0.0
                } else {
                    let s = (i - 1) as f64 / (grid.t_count.max(2) - 2).max(1) as f64;
                    (log_min + s * (log_max - log_min)).exp()
                };
                samples += 1;
                let lhs = phi.eval(&x, 2.0 * t);
                let rhs = cert.c * phi.eval(&x, t) + hx;
                if lhs.is_infinite() {
                    if rhs.is_infinite() {
                        continue;
                    }
                    pass = false;
                    worst_ratio = f64::INFINITY;
                    worst_at = Some((x.clone(), t));
                    continue;
                }
                let ratio = if rhs == 0.0 {
                    if lhs == 0.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    }
                } else {
                    lhs / rhs
                };
                if ratio > worst_ratio {
                    worst_ratio = ratio;
                    worst_at = Some((x.clone(), t));
                }
                if lhs > rhs * (1.0 + 1e-9) + 1e-300 {
                    pass = false;
                }
            }
        }
    }
    Delta2Report {
        pass,
        samples,
        worst_ratio,
        worst_at,
    }
}

/// One level of the weight decomposition: grid cells where the scalar
/// weight stays within `[n−1, n)`.
#[derive(Debug, Clone)]
pub struct LevelSet {
    pub n: usize,
    pub cells: Vec<Cuboid>,
    /// Cells assigned by midpoint value because their weight range straddles
    /// a threshold.
    pub straddling: Vec<Cuboid>,
}

#[derive(Debug, Clone)]
pub struct LevelSetDecomposition {
    pub levels: Vec<LevelSet>,
    /// Cells whose weight exceeds every requested level (or is unbounded).
    pub unassigned: Vec<Cuboid>,
}

/// Decompose `a` into grid-cell sets `A_n ≈ {x : w(x) ∈ [n−1, n)}` for a
/// scalar-weight family, so that `Φ(x,t) ≤ n·t` on `A_n` by construction.
pub fn level_set_decomposition(
    phi: &MOFunction,
    a: &BoxSet,
    n_max: usize,
    grid_res: f64,
) -> Result<LevelSetDecomposition> {
    if grid_res <= 0.0 {
        return Err(Error::precondition("grid resolution must be positive"));
    }
    if !phi.has_scalar_weight() {
        return Err(Error::precondition(
            "level-set decomposition needs a scalar-weight family",
        ));
    }
    let mut levels: Vec<LevelSet> = (1..=n_max)
        .map(|n| LevelSet {
            n,
            cells: Vec::new(),
            straddling: Vec::new(),
        })
        .collect();
    let mut unassigned = Vec::new();
    for b in a.boxes() {
        for cell in lattice_cells(b, grid_res) {
            let mid = cell.center();
            let Some(wm) = phi.scalar_weight(&mid) else {
                continue;
            };
            if !wm.is_finite() || wm >= n_max as f64 {
                unassigned.push(cell);
                continue;
            }
            let n = wm.floor() as usize + 1;
            let range = weight_range_on_cell(phi, &cell);
            let clean = match range {
                Some((lo, hi)) => hi.is_finite() && lo.floor() == hi.floor() && lo >= 0.0,
                None => false,
            };
            if clean {
                levels[n - 1].cells.push(cell);
            } else {
                levels[n - 1].straddling.push(cell);
            }
        }
    }
    Ok(LevelSetDecomposition { levels, unassigned })
}

/// Exact weight range over a cell where the family supports it.
fn weight_range_on_cell(phi: &MOFunction, cell: &Cuboid) -> Option<(f64, f64)> {
    match phi.family() {
        Family::WeightedLinear {
            weight: Weight::InverseAbs,
        } => {
            let (a, b) = (cell.lo()[0], cell.hi()[0]);
            if a <= 0.0 && b >= 0.0 {
                Some((0.0, f64::INFINITY))
            } else {
                let (lo, hi) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
                Some((hi.recip(), lo.recip()))
            }
        }
        Family::WeightedLinear {
            weight: Weight::Field { field },
        } => Some(field.range_on_box(cell)),
        Family::SeriesWeight { terms } => {
            let (a, b) = (cell.lo()[0], cell.hi()[0]);
            if b <= 0.0 || a >= 1.0 {
                return Some((1.0, 1.0));
            }
            if a < 0.0 || b > 1.0 {
                // straddles the boundary of (0,1): hull with the outside value
                return None;
            }
            let mut lo = 0.0;
            let mut hi = 0.0;
            for term in terms {
                let c = (-2.0 * term.index as f64).exp2();
                let s = term.location;
                if b <= s {
                    continue;
                }
                if a <= s {
                    return Some((lo, f64::INFINITY));
                }
                lo += c / (b - s);
                hi += c / (a - s);
            }
            Some((lo, hi))
        }
        _ => None,
    }
}

/// Serializable family descriptor, the on-disk format the CLI loads.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyDescriptor {
    Phi1,
    Phi2 { n_terms: usize },
    Orlicz { phi: OrliczKind, domain: BoxSet },
    WeightedLinear { weight: ScalarField, domain: BoxSet },
    VariableExponent { p: ScalarField, domain: BoxSet },
    DoublePhase {
        p: ScalarField,
        r: ScalarField,
        a: ScalarField,
        domain: BoxSet,
    },
}

impl FamilyDescriptor {
    pub fn build(&self) -> Result<MOFunction> {
        match self {
            FamilyDescriptor::Phi1 => Ok(make_phi1()),
            FamilyDescriptor::Phi2 { n_terms } => make_phi2(*n_terms),
            FamilyDescriptor::Orlicz { phi, domain } => make_orlicz(phi.clone(), domain.clone()),
            FamilyDescriptor::WeightedLinear { weight, domain } => {
                make_weighted_linear(weight.clone(), domain.clone())
            }
            FamilyDescriptor::VariableExponent { p, domain } => {
                make_variable_exponent(p.clone(), domain.clone())
            }
            FamilyDescriptor::DoublePhase { p, r, a, domain } => {
                let phi = make_double_phase(p.clone(), r.clone(), a.clone(), domain.clone())?;
                Ok(
                    match check_double_phase_delta2(p, r, a, domain)? {
                        DoublePhaseDelta2::Certified { cert, .. } => {
                            let mut phi = phi;
                            phi.attach_delta2(cert);
                            phi
                        }
                        DoublePhaseDelta2::Rejected { .. } => phi,
                    },
                )
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi1_values() {
        let phi = make_phi1();
        assert!((phi.eval(&[2.0], 3.0) - 1.5).abs() < 1e-15);
        assert_eq!(phi.eval(&[7.3], 0.0), 0.0);
        assert_eq!(phi.eval(&[0.0], 5.0), 0.0);
        assert!((phi.eval(&[-0.5], 1.0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn phi2_truncated_weight() {
        let phi = make_phi2(1).unwrap();
        // single term: r_1 = 1/2, coefficient 1/4
        assert!((phi.series_weight_at(0.75) - 1.0).abs() < 1e-15);
        assert_eq!(phi.eval(&[2.0], 3.0), 3.0);
        assert_eq!(phi.series_weight_at(0.25), 0.0);
        assert!(phi.dense_singular_interval().is_some());
    }

    #[test]
    fn phi2_pole_lists_deterministic() {
        let a = make_phi2(12).unwrap();
        let b = make_phi2(12).unwrap();
        assert_eq!(a.poles(), b.poles());
        assert_eq!(a.poles().len(), 12);
        assert_eq!(a.poles()[0].location, vec![0.5]);
    }

    #[test]
    fn phi2_rejects_zero_terms() {
        assert!(make_phi2(0).is_err());
    }

    #[test]
    fn variable_exponent_values() {
        let dom = BoxSet::interval(-10.0, 10.0, false).unwrap();
        let phi = make_variable_exponent(ScalarField::constant(2.0), dom.clone()).unwrap();
        assert!((phi.eval(&[1.0], 3.0) - 4.5).abs() < 1e-12);
        assert!((phi.delta2().unwrap().c - 4.0).abs() < 1e-12);

        let p = ScalarField::Sinusoid {
            offset: 2.0,
            amp: 1.0,
            freq: vec![1.0],
            phase: 0.0,
        };
        let dom2 = BoxSet::interval(0.0, std::f64::consts::PI, false).unwrap();
        let phi2 = make_variable_exponent(p, dom2).unwrap();
        let x = std::f64::consts::FRAC_PI_2;
        assert!((phi2.eval(&[x], 2.0) - 8.0 / 3.0).abs() < 1e-12);
        assert!((phi2.delta2().unwrap().c - 8.0).abs() < 1e-12);
    }

    #[test]
    fn variable_exponent_below_one_rejected() {
        let dom = BoxSet::interval(0.0, 1.0, false).unwrap();
        assert!(make_variable_exponent(ScalarField::constant(0.5), dom).is_err());
    }

    #[test]
    fn double_phase_values() {
        let dom = BoxSet::interval(0.0, 1.0, false).unwrap();
        let phi = make_double_phase(
            ScalarField::constant(2.0),
            ScalarField::constant(3.0),
            ScalarField::constant(1.0),
            dom.clone(),
        )
        .unwrap();
        assert!((phi.eval(&[0.5], 2.0) - 12.0).abs() < 1e-12);
        assert_eq!(phi.eval(&[0.5], 0.0), 0.0);

        let reduced = make_double_phase(
            ScalarField::constant(2.0),
            ScalarField::constant(3.0),
            ScalarField::constant(0.0),
            dom,
        )
        .unwrap();
        assert!((reduced.eval(&[0.5], 2.0) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn double_phase_clause_i() {
        let dom = BoxSet::interval(0.0, 1.0, false).unwrap();
        let out = check_double_phase_delta2(
            &ScalarField::constant(2.0),
            &ScalarField::constant(3.0),
            &ScalarField::constant(1.0),
            &dom,
        )
        .unwrap();
        match out {
            DoublePhaseDelta2::Certified { cert, clause } => {
                assert_eq!(clause, DoublePhaseClause::BoundedUpperExponent);
                assert!((cert.c - 8.0).abs() < 1e-12);
            }
            DoublePhaseDelta2::Rejected { .. } => panic!("expected certificate"),
        }
    }

    #[test]
    fn double_phase_equal_exponents_clause_i() {
        let dom = BoxSet::interval(0.0, 1.0, false).unwrap();
        let out = check_double_phase_delta2(
            &ScalarField::constant(2.0),
            &ScalarField::constant(2.0),
            &ScalarField::constant(1.0),
            &dom,
        )
        .unwrap();
        match out {
            DoublePhaseDelta2::Certified { cert, clause } => {
                assert_eq!(clause, DoublePhaseClause::BoundedUpperExponent);
                assert!((cert.c - 4.0).abs() < 1e-12);
            }
            _ => panic!("expected certificate"),
        }
    }

    #[test]
    fn double_phase_clause_ii_with_unbounded_r() {
        // r blows up at 2.0 but a vanishes outside [0,1], where r is bounded.
        let dom = BoxSet::interval(0.0, 3.0, false).unwrap();
        let r = ScalarField::RecipDist {
            center: vec![2.0],
            scale: 1.0,
            offset: 3.0,
        };
        let a = ScalarField::Piecewise {
            pieces: vec![crate::descriptor::Piece {
                set: BoxSet::interval(0.0, 1.0, false).unwrap(),
                value: 1.0,
            }],
            default: 0.0,
        };
        let out =
            check_double_phase_delta2(&ScalarField::constant(2.0), &r, &a, &dom).unwrap();
        match out {
            DoublePhaseDelta2::Certified { clause, cert } => {
                assert_eq!(clause, DoublePhaseClause::StrictGapOnSupport);
                // sup r over [0,1] is 3 + 1/1 = 4 → C = 2^4
                assert!((cert.c - 16.0).abs() < 1e-9);
            }
            DoublePhaseDelta2::Rejected { reasons } => panic!("rejected: {reasons:?}"),
        }
    }

    #[test]
    fn double_phase_rejection_names_clauses() {
        // a ≡ 1 everywhere and r unbounded inside the domain: both clauses fail.
        let dom = BoxSet::interval(0.0, 3.0, false).unwrap();
        let r = ScalarField::RecipDist {
            center: vec![1.5],
            scale: 1.0,
            offset: 3.0,
        };
        let out = check_double_phase_delta2(
            &ScalarField::constant(2.0),
            &r,
            &ScalarField::constant(1.0),
            &dom,
        )
        .unwrap();
        match out {
            DoublePhaseDelta2::Rejected { reasons } => {
                assert_eq!(reasons.len(), 2);
                assert!(reasons[0].contains("bounded_upper_exponent"));
                assert!(reasons[1].contains("strict_gap_on_support"));
            }
            _ => panic!("expected rejection"),
        }
    }

    #[test]
    fn verify_delta2_examples() {
        let grid = SamplingGrid::default();
        let phi1 = make_phi1();
        assert!(verify_delta2(&phi1, phi1.delta2().unwrap(), &grid).pass);

        let dom = BoxSet::interval(-5.0, 5.0, false).unwrap();
        let phi = make_variable_exponent(ScalarField::constant(2.0), dom).unwrap();
        assert!(verify_delta2(&phi, &Delta2Certificate::homogeneous(4.0), &grid).pass);
        let report = verify_delta2(&phi, &Delta2Certificate::homogeneous(3.9), &grid);
        assert!(!report.pass);
        assert!(report.worst_ratio > 1.0);
    }

    #[test]
    fn definition_validation_passes_for_builtins() {
        make_phi1().validate_definition(1000, 7).unwrap();
        make_phi2(8).unwrap().validate_definition(1000, 7).unwrap();
        let dom = BoxSet::interval(0.0, std::f64::consts::PI, false).unwrap();
        let p = ScalarField::Sinusoid {
            offset: 2.0,
            amp: 1.0,
            freq: vec![1.0],
            phase: 0.0,
        };
        make_variable_exponent(p, dom.clone())
            .unwrap()
            .validate_definition(1000, 7)
            .unwrap();
        make_double_phase(
            ScalarField::constant(2.0),
            ScalarField::constant(3.0),
            ScalarField::constant(1.0),
            dom,
        )
        .unwrap()
        .validate_definition(1000, 7)
        .unwrap();
    }

    #[test]
    fn level_sets_phi1_on_unit_shift() {
        let phi = make_phi1();
        let a = BoxSet::interval(1.0, 2.0, false).unwrap();
        let dec = level_set_decomposition(&phi, &a, 4, 0.05).unwrap();
        // w = 1/x ∈ (1/2, 1) on (1,2): everything lands in A_1.
        assert!(!dec.levels[0].cells.is_empty());
        for lvl in &dec.levels[1..] {
            assert!(lvl.cells.is_empty() && lvl.straddling.is_empty());
        }
        assert!(dec.unassigned.is_empty());
    }

    #[test]
    fn level_sets_phi1_wide_window() {
        let phi = make_phi1();
        let a = BoxSet::interval(0.1, 10.0, false).unwrap();
        let dec = level_set_decomposition(&phi, &a, 10, 0.01).unwrap();
        // cells in (1, 10) have w < 1 → A_1; near 0.1 w approaches 10.
        assert!(!dec.levels[0].cells.is_empty());
        assert!(!dec.levels[9].cells.is_empty() || !dec.levels[9].straddling.is_empty());
        // pairwise disjoint by construction: total cell count matches lattice
        let total: usize = dec
            .levels
            .iter()
            .map(|l| l.cells.len() + l.straddling.len())
            .sum::<usize>()
            + dec.unassigned.len();
        assert_eq!(total, 990);
    }

    #[test]
    fn level_sets_empty_region() {
        let phi = make_phi1();
        let a = BoxSet::empty(1, false);
        let dec = level_set_decomposition(&phi, &a, 3, 0.1).unwrap();
        assert!(dec.levels.iter().all(|l| l.cells.is_empty()));
    }

    #[test]
    fn level_sets_reject_nonscalar_family() {
        let dom = BoxSet::interval(0.0, 1.0, false).unwrap();
        let phi = make_variable_exponent(ScalarField::constant(2.0), dom).unwrap();
        let a = BoxSet::interval(0.0, 1.0, false).unwrap();
        assert!(level_set_decomposition(&phi, &a, 3, 0.1).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        let d = FamilyDescriptor::DoublePhase {
            p: ScalarField::constant(2.0),
            r: ScalarField::constant(3.0),
            a: ScalarField::constant(1.0),
            domain: BoxSet::interval(0.0, 1.0, false).unwrap(),
        };
        let j = serde_json::to_string(&d).unwrap();
        let back: FamilyDescriptor = serde_json::from_str(&j).unwrap();
        let phi = back.build().unwrap();
        assert!((phi.eval(&[0.5], 2.0) - 12.0).abs() < 1e-12);
        assert!(phi.delta2().is_some());
    }
}
