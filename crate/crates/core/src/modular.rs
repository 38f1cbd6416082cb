//! The modular `I_Φ(f) = ∫ Φ(x,|f(x)|) dx` with three honest outcomes:
//! a certified finite value, a certified divergence, or an explicit
//! inconclusive verdict.
//!
//! Declared poles are handled analytically: when the integrand has a positive
//! essential lower bound approaching a declared pole, the engine emits an
//! analytic-pole certificate directly (log divergence cannot be detected by
//! thresholding). The growth heuristic applies only to undeclared
//! singularities of opaque integrands.

use crate::error::{Error, Result};
use crate::family::{MOFunction, PoleInfo, PoleSide};
use crate::function::{FunctionKind, PiecewiseFunction};
use crate::geometry::{BoxSet, Cuboid};
use serde::{Deserialize, Serialize};

/// Threshold a growth record must cross to certify divergence.
pub const D_MAX: f64 = 1e6;
/// Increments must not decelerate below this ratio in a growth record.
pub const DECEL_RATIO: f64 = 0.9;
/// Number of shaving steps before giving up.
pub const SHAVE_STEPS: usize = 40;

const MAX_DEPTH: u32 = 44;
const MIN_DEPTH: u32 = 3;

/// Target absolute error and evaluation budget.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AccuracySpec {
    pub abs_err: f64,
    pub budget: u64,
}

impl Default for AccuracySpec {
    fn default() -> Self {
        AccuracySpec {
            abs_err: 1e-8,
            budget: 1_000_000,
        }
    }
}

impl AccuracySpec {
    pub fn loose() -> Self {
        AccuracySpec {
            abs_err: 1e-4,
            budget: 200_000,
        }
    }
}

/// Machine-checkable witness that an integral is infinite.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum DivergenceCertificate {
    /// The integrand dominates `t_bound · c · |x − s|^{−q}` on a window
    /// touching the pole from its active side, and `q ≥ 1` makes the
    /// elementary integral diverge.
    AnalyticPole {
        pole: PoleInfo,
        window: Cuboid,
        t_bound: f64,
    },
    /// Shaved partial integrals that crossed the divergence threshold
    /// without decelerating (heuristic evidence for opaque integrands).
    Growth {
        radii: Vec<f64>,
        partials: Vec<f64>,
        threshold: f64,
    },
}

/// Outcome of a modular computation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ModularResult {
    Finite { value: f64, err: f64 },
    Divergent(DivergenceCertificate),
    Inconclusive { partial: f64, evals: u64 },
}

impl ModularResult {
    pub fn is_finite(&self) -> bool {
        matches!(self, ModularResult::Finite { .. })
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, ModularResult::Divergent(_))
    }

    pub fn finite_value(&self) -> Option<f64> {
        match self {
            ModularResult::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// Re-validate a certificate from its own fields, without quadrature.
///
/// Structurally broken certificates are errors; well-formed ones that fail
/// the divergence rules return `false`.
pub fn check_certificate(cert: &DivergenceCertificate) -> Result<bool> {
    match cert {
        DivergenceCertificate::AnalyticPole {
            pole,
            window,
            t_bound,
        } => {
            if pole.location.len() != 1 || window.dim() != 1 {
                return Err(Error::MalformedCertificate(
                    "analytic-pole certificates are one-dimensional".into(),
                ));
            }
            if !pole.order.is_finite() || !t_bound.is_finite() {
                return Err(Error::MalformedCertificate(
                    "non-finite pole order or scaling bound".into(),
                ));
            }
            let s = pole.location[0];
            let (a, b) = (window.lo()[0], window.hi()[0]);
            // c > 0 (as log2 it just needs to be finite), q ≥ 1, t > 0, and
            // the window must reach the pole from an active side.
            if !pole.coeff_log2.is_finite() || pole.order < 1.0 || *t_bound <= 0.0 {
                return Ok(false);
            }
            let touches_right = a <= s && s < b;
            let touches_left = a < s && s <= b;
            let ok = match pole.side {
                PoleSide::Right => touches_right,
                PoleSide::Left => touches_left,
                PoleSide::Both => touches_right || touches_left,
            };
            Ok(ok)
        }
        DivergenceCertificate::Growth {
            radii,
            partials,
            threshold,
        } => {
            if radii.len() != partials.len() || partials.len() < 3 {
                return Err(Error::MalformedCertificate(
                    "growth record needs at least three matched (radius, partial) pairs".into(),
                ));
            }
            if radii.iter().any(|r| !(*r > 0.0)) {
                return Err(Error::MalformedCertificate(
                    "growth radii must be positive".into(),
                ));
            }
            let radii_shrink = radii.windows(2).all(|w| w[1] < w[0]);
            let increasing = partials.windows(2).all(|w| w[1] > w[0]);
            let n = partials.len();
            let last_inc = partials[n - 1] - partials[n - 2];
            let prev_inc = partials[n - 2] - partials[n - 3];
            Ok(radii_shrink
                && increasing
                && *threshold >= D_MAX
                && partials[n - 1] > *threshold
                && last_inc >= DECEL_RATIO * prev_inc)
        }
    }
}

/// One integration piece: a cell with either a constant |f| value (simple
/// functions) or pointwise evaluation.
#[derive(Clone)]
struct Piece {
    value: Option<f64>,
    cell: Cuboid,
}

struct Integrator<'a> {
    phi: &'a MOFunction,
    f: &'a PiecewiseFunction,
    evals: u64,
    budget: u64,
    exhausted: bool,
    saw_nonfinite: bool,
    hotspot: Option<(Vec<f64>, f64)>,
}

impl<'a> Integrator<'a> {
    fn new(phi: &'a MOFunction, f: &'a PiecewiseFunction, budget: u64) -> Self {
        Integrator {
            phi,
            f,
            evals: 0,
            budget,
            exhausted: false,
            saw_nonfinite: false,
            hotspot: None,
        }
    }

    fn integrand(&mut self, x: &[f64], value: Option<f64>) -> f64 {
        self.evals += 1;
        if self.evals > self.budget {
            self.exhausted = true;
        }
        let t = match value {
            Some(v) => v,
            None => self.f.eval(x).abs(),
        };
        let g = self.phi.eval(x, t);
        if !g.is_finite() {
            self.saw_nonfinite = true;
            if self.hotspot.as_ref().map_or(true, |(_, v)| !v.is_infinite()) {
                self.hotspot = Some((x.to_vec(), f64::INFINITY));
            }
        } else if self.hotspot.as_ref().map_or(true, |(_, v)| g > *v) {
            self.hotspot = Some((x.to_vec(), g));
        }
        g
    }

    /// Adaptive midpoint rule with two levels of Richardson extrapolation:
    /// the accept test compares the two extrapolants, so smooth cells
    /// converge at high order. Never samples cell boundaries, keeping
    /// endpoint singularities out of reach of the rule itself.
    fn cell(&mut self, piece: &Piece, cell: &Cuboid, tol: f64, depth: u32) -> (f64, f64) {
        let vol = cell.volume();
        let g_mid = self.integrand(&cell.center(), piece.value);
        if self.exhausted {
            return (
                if g_mid.is_finite() { g_mid * vol } else { 0.0 },
                f64::INFINITY,
            );
        }
        let kids = bisect(cell);
        let mut m2 = 0.0;
        let mut singular = !g_mid.is_finite();
        for k in &kids {
            let g = self.integrand(&k.center(), piece.value);
            if g.is_finite() {
                m2 += g * k.volume();
            } else {
                singular = true;
            }
            if self.exhausted {
                return (m2, f64::INFINITY);
            }
        }
        if !singular {
            let mut m4 = 0.0;
            for k in &kids {
                for kk in bisect(k) {
                    let g = self.integrand(&kk.center(), piece.value);
                    if g.is_finite() {
                        m4 += g * kk.volume();
                    } else {
                        singular = true;
                    }
                    if self.exhausted {
                        return (m4, f64::INFINITY);
                    }
                }
            }
            if !singular {
                let m1 = g_mid * vol;
                let r1 = (4.0 * m2 - m1) / 3.0;
                let r2 = (4.0 * m4 - m2) / 3.0;
                let est = (r2 - r1).abs() / 15.0;
                if (est <= tol && depth >= MIN_DEPTH) || depth >= MAX_DEPTH {
                    let value = (16.0 * r2 - r1) / 15.0;
                    return (value, est.max(1e-18 * value.abs()));
                }
            }
        }
        if singular && depth >= MAX_DEPTH {
            return (0.0, f64::INFINITY);
        }
        let mut val = 0.0;
        let mut err = 0.0;
        for k in &kids {
            let (v, e) = self.cell(piece, k, tol / kids.len() as f64, depth + 1);
            val += v;
            err += e;
        }
        (val, err)
    }

    fn pieces(&mut self, pieces: &[Piece], tol: f64) -> (f64, f64) {
        let total_vol: f64 = pieces.iter().map(|p| p.cell.volume()).sum();
        let mut val = 0.0;
        let mut err = 0.0;
        for p in pieces {
            let share = if total_vol > 0.0 {
                tol * p.cell.volume() / total_vol
            } else {
                tol
            };
            let (v, e) = self.cell(&p.clone(), &p.cell, share.max(1e-300), 0);
            val += v;
            err += e;
        }
        (val, err)
    }
}

fn bisect(c: &Cuboid) -> Vec<Cuboid> {
    let mid = c.center();
    match c.dim() {
        1 => vec![
            Cuboid::new(vec![c.lo()[0]], vec![mid[0]]).expect("positive half"),
            Cuboid::new(vec![mid[0]], vec![c.hi()[0]]).expect("positive half"),
        ],
        2 => {
            let mut kids = Vec::with_capacity(4);
            for (x0, x1) in [(c.lo()[0], mid[0]), (mid[0], c.hi()[0])] {
                for (y0, y1) in [(c.lo()[1], mid[1]), (mid[1], c.hi()[1])] {
                    kids.push(Cuboid::new(vec![x0, y0], vec![x1, y1]).expect("positive quarter"));
                }
            }
            kids
        }
        _ => unreachable!(),
    }
}

/// Essential behavior of `|f|` approaching a 1-d point from one side.
enum NearPoleBound {
    /// `|f| ≥ τ > 0` on a window `(s, s+ρ)` (or mirror); divergence follows.
    Positive { tau: f64, window: Cuboid },
    /// `f` tends to 0 but does not vanish near the pole: needs shaving.
    Vanishing { extent: f64 },
    /// `f` vanishes identically near the pole.
    Zero,
}

fn near_pole_bound(
    f: &PiecewiseFunction,
    pieces: &[Piece],
    s: f64,
    right: bool,
) -> NearPoleBound {
    // Find the piece whose closure touches s from the requested side.
    let adjacent = pieces.iter().find(|p| {
        let (a, b) = (p.cell.lo()[0], p.cell.hi()[0]);
        if right {
            a <= s && s < b
        } else {
            a < s && s <= b
        }
    });
    let Some(p) = adjacent else {
        return NearPoleBound::Zero;
    };
    let (a, b) = (p.cell.lo()[0], p.cell.hi()[0]);
    let extent = if right { b - s } else { s - a };
    if let Some(v) = p.value {
        // simple pieces carry exact constant |f|
        let window = if right {
            Cuboid::interval(s, b).expect("positive side extent")
        } else {
            Cuboid::interval(a, s).expect("positive side extent")
        };
        return NearPoleBound::Positive { tau: v, window };
    }
    // Opaque/smooth: sample shrinking side windows.
    let mut rho = extent;
    let mut tau = f64::INFINITY;
    let mut any_nonzero = false;
    for _ in 0..14 {
        let mut min_here = f64::INFINITY;
        for i in 1..=16 {
            let x = if right {
                s + rho * i as f64 / 17.0
            } else {
                s - rho * i as f64 / 17.0
            };
            let v = f.eval(&[x]).abs();
            min_here = min_here.min(v);
            if v > 0.0 {
                any_nonzero = true;
            }
        }
        tau = min_here;
        rho *= 0.5;
    }
    if tau > 1e-12 {
        let window = if right {
            Cuboid::interval(s, s + rho * 2.0)
        } else {
            Cuboid::interval(s - rho * 2.0, s)
        }
        .expect("positive window");
        NearPoleBound::Positive { tau, window }
    } else if any_nonzero {
        NearPoleBound::Vanishing { extent }
    } else {
        NearPoleBound::Zero
    }
}

/// Remove the open window `(s−eps, s+eps)` from a list of 1-d pieces.
fn shave_pieces(pieces: &[Piece], s: f64, eps: f64) -> Vec<Piece> {
    let mut out = Vec::new();
    for p in pieces {
        let (a, b) = (p.cell.lo()[0], p.cell.hi()[0]);
        let (wl, wr) = (s - eps, s + eps);
        if b <= wl || a >= wr {
            out.push(p.clone());
            continue;
        }
        if a < wl {
            out.push(Piece {
                value: p.value,
                cell: Cuboid::interval(a, wl).expect("positive left remainder"),
            });
        }
        if b > wr {
            out.push(Piece {
                value: p.value,
                cell: Cuboid::interval(wr, b).expect("positive right remainder"),
            });
        }
    }
    out
}

/// Compute the modular `I_Φ(f)` over `region` with the given accuracy
/// contract.
pub fn modular(
    phi: &MOFunction,
    f: &PiecewiseFunction,
    region: &BoxSet,
    acc: &AccuracySpec,
) -> Result<ModularResult> {
    if acc.budget == 0 {
        return Err(Error::precondition("evaluation budget must be positive"));
    }
    if region.dim() != phi.domain().dim() {
        return Err(Error::DimensionMismatch(region.dim(), phi.domain().dim()));
    }
    if f.dim() != region.dim() {
        return Err(Error::DimensionMismatch(f.dim(), region.dim()));
    }
    let outside = region.difference(&region.intersect(phi.domain())?)?;
    if outside.volume() > 1e-12 {
        return Err(Error::precondition(
            "integration region extends outside the function domain",
        ));
    }
    if f.is_identically_zero() || f.support().is_empty() {
        return Ok(ModularResult::Finite {
            value: 0.0,
            err: 0.0,
        });
    }

    // Integration pieces: constant cells for simple functions, support boxes
    // otherwise. Φ(x,0) = 0 makes the rest of the region contribute nothing.
    let pieces: Vec<Piece> = match f.kind() {
        FunctionKind::Simple { .. } => f
            .simple_cells(Some(region))?
            .into_iter()
            .map(|(v, cell)| Piece {
                value: Some(v.abs()),
                cell,
            })
            .collect(),
        _ => f
            .support()
            .intersect(region)?
            .boxes()
            .iter()
            .map(|b| Piece {
                value: None,
                cell: b.clone(),
            })
            .collect(),
    };
    if pieces.is_empty() {
        return Ok(ModularResult::Finite {
            value: 0.0,
            err: 0.0,
        });
    }

    // Declared poles first: certified divergence or a shaving plan.
    let mut shave_points: Vec<(f64, f64)> = Vec::new(); // (location, eps0)
    if region.dim() == 1 {
        for pole in phi.poles() {
            let s = pole.location[0];
            let sides: &[bool] = match pole.side {
                PoleSide::Right => &[true],
                PoleSide::Left => &[false],
                PoleSide::Both => &[true, false],
            };
            for &right in sides {
                match near_pole_bound(f, &pieces, s, right) {
                    NearPoleBound::Positive { tau, window } => {
                        return Ok(ModularResult::Divergent(
                            DivergenceCertificate::AnalyticPole {
                                pole: pole.clone(),
                                window,
                                t_bound: tau,
                            },
                        ));
                    }
                    NearPoleBound::Vanishing { extent } => {
                        shave_points.push((s, 0.5 * extent.max(1e-12)));
                    }
                    NearPoleBound::Zero => {}
                }
            }
        }
    }

    let mut integ = Integrator::new(phi, f, acc.budget);
    if !shave_points.is_empty() {
        return Ok(shaved_integration(
            &mut integ,
            &pieces,
            &shave_points,
            acc,
            false,
        ));
    }

    let (value, err) = integ.pieces(&pieces, acc.abs_err);
    let converged = !integ.exhausted
        && !integ.saw_nonfinite
        && err.is_finite()
        && err <= (acc.abs_err * 8.0).max(1e-9 * value.abs());
    if converged {
        return Ok(ModularResult::Finite { value, err });
    }

    // Undeclared singularity of an opaque integrand: growth heuristic.
    if region.dim() == 1 {
        let s = locate_blowup(&mut integ, &pieces);
        if let Some(s) = s {
            let ext = pieces
                .iter()
                .map(|p| p.cell.hi()[0] - p.cell.lo()[0])
                .fold(0.0_f64, f64::max);
            let mut fresh = Integrator::new(phi, f, acc.budget);
            return Ok(shaved_integration(
                &mut fresh,
                &pieces,
                &[(s, 0.5 * ext)],
                acc,
                true,
            ));
        }
    }
    Ok(ModularResult::Inconclusive {
        partial: value,
        evals: integ.evals,
    })
}

/// Shaving protocol: excise windows `ε_k = ε_0·2^{−k}` around every
/// suspect point and accumulate annulus contributions. Cauchy convergence
/// (with geometric tail extrapolation for power-law tails) yields a finite
/// value; crossing the divergence threshold without deceleration yields a
/// growth certificate (opaque suspects only).
fn shaved_integration(
    integ: &mut Integrator,
    pieces: &[Piece],
    suspects: &[(f64, f64)],
    acc: &AccuracySpec,
    allow_growth_cert: bool,
) -> ModularResult {
    let shaved_at = |scale: f64| -> Vec<Piece> {
        let mut out = pieces.to_vec();
        for (s, eps0) in suspects {
            out = shave_pieces(&out, *s, eps0 * scale);
        }
        out
    };
    integ.exhausted = false;
    integ.saw_nonfinite = false;
    let (base, base_err) = integ.pieces(&shaved_at(1.0), acc.abs_err * 0.1);
    if integ.exhausted || integ.saw_nonfinite {
        return ModularResult::Inconclusive {
            partial: base,
            evals: integ.evals,
        };
    }
    let mut total = base;
    let mut err = base_err;
    let mut radii = vec![suspects.iter().map(|(_, e0)| *e0).fold(0.0, f64::max)];
    let mut partials = vec![total];
    let mut prev_inc: Option<f64> = None;
    let mut prev_extrap: Option<f64> = None;
    for k in 1..SHAVE_STEPS {
        let outer_scale = 2f64.powi(-(k as i32 - 1));
        let inner_scale = 2f64.powi(-(k as i32));
        // Annulus = (windows at the outer radius) minus (windows at the
        // inner radius), clipped to the original pieces.
        let mut annulus: Vec<Piece> = Vec::new();
        for (s, eps0) in suspects {
            let (r_out, r_in) = (eps0 * outer_scale, eps0 * inner_scale);
            for (lo, hi) in [(s - r_out, s - r_in), (s + r_in, s + r_out)] {
                for p in pieces {
                    let (a, b) = (p.cell.lo()[0], p.cell.hi()[0]);
                    let (clo, chi) = (a.max(lo), b.min(hi));
                    if clo < chi {
                        annulus.push(Piece {
                            value: p.value,
                            cell: Cuboid::interval(clo, chi).expect("positive overlap"),
                        });
                    }
                }
            }
        }
        // Other suspects' current windows must stay excised.
        for (s, eps0) in suspects {
            annulus = shave_pieces(&annulus, *s, eps0 * inner_scale);
        }
        let tol_k = (acc.abs_err * 0.05).max(1e-6 * total.abs());
        integ.exhausted = false;
        integ.saw_nonfinite = false;
        let (inc_raw, inc_err) = integ.pieces(&annulus, tol_k);
        if integ.saw_nonfinite || integ.exhausted {
            return ModularResult::Inconclusive {
                partial: total,
                evals: integ.evals,
            };
        }
        let inc = inc_raw.max(0.0);
        total += inc;
        err += inc_err;
        radii.push(suspects.iter().map(|(_, e0)| e0 * inner_scale).fold(0.0, f64::max));
        partials.push(total);

        let threshold = (acc.abs_err * 0.5).max(4e-6 * total.abs());
        if inc <= threshold {
            return ModularResult::Finite {
                value: total,
                err: err + 2.0 * inc + threshold,
            };
        }
        if let Some(pinc) = prev_inc {
            if pinc > 0.0 {
                let ratio = inc / pinc;
                if ratio > 0.0 && ratio < 0.97 {
                    let extrap = total + inc * ratio / (1.0 - ratio);
                    if let Some(pe) = prev_extrap {
                        let drift = (extrap - pe).abs();
                        if drift <= threshold {
                            return ModularResult::Finite {
                                value: extrap,
                                err: err + 2.0 * drift + threshold,
                            };
                        }
                    }
                    prev_extrap = Some(extrap);
                } else {
                    prev_extrap = None;
                }
            }
        }
        if allow_growth_cert && partials.len() >= 3 && total > D_MAX {
            let n = partials.len();
            let inc_last = partials[n - 1] - partials[n - 2];
            let inc_prev = partials[n - 2] - partials[n - 3];
            if inc_last >= DECEL_RATIO * inc_prev && partials.windows(2).all(|w| w[1] > w[0]) {
                return ModularResult::Divergent(DivergenceCertificate::Growth {
                    radii,
                    partials,
                    threshold: D_MAX,
                });
            }
        }
        prev_inc = Some(inc);
    }
    ModularResult::Inconclusive {
        partial: total,
        evals: integ.evals,
    }
}

/// Guess where an opaque integrand blows up: candidates are the piece
/// corners plus the hottest sample; score by approaching each side
/// geometrically.
fn locate_blowup(integ: &mut Integrator, pieces: &[Piece]) -> Option<f64> {
    let mut candidates: Vec<f64> = Vec::new();
    for p in pieces {
        candidates.push(p.cell.lo()[0]);
        candidates.push(p.cell.hi()[0]);
    }
    if let Some((x, _)) = &integ.hotspot {
        candidates.push(x[0]);
    }
    let scale = pieces
        .iter()
        .map(|p| p.cell.hi()[0] - p.cell.lo()[0])
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    let mut best: Option<(f64, f64)> = None;
    for &c in &candidates {
        for sign in [-1.0, 1.0] {
            let mut score: f64 = 0.0;
            for j in 1..=8 {
                let x = c + sign * scale * 4f64.powi(-j);
                if pieces.iter().any(|p| p.cell.contains_closed(&[x])) {
                    let v = match pieces.iter().find(|p| p.cell.contains_closed(&[x])) {
                        Some(p) => integ.integrand(&[x], p.value),
                        None => 0.0,
                    };
                    if v.is_finite() {
                        score = score.max(v);
                    } else {
                        score = f64::INFINITY;
                    }
                }
            }
            if best.as_ref().map_or(true, |(_, s)| score > *s) {
                best = Some((c, score));
            }
        }
    }
    match best {
        Some((s, score)) if score > 1e3 => Some(s),
        _ => integ.hotspot.as_ref().map(|(x, _)| x[0]),
    }
}

/// Exact closed-form modular for simple functions over families that carry
/// an antiderivative in `x` — the independent oracle the tests check the
/// adaptive engine against.
pub fn modular_oracle(
    phi: &MOFunction,
    f: &PiecewiseFunction,
    region: &BoxSet,
) -> Result<ModularResult> {
    use crate::descriptor::ScalarField;
    use crate::family::{Family, Weight};

    let cells = f.simple_cells(Some(region))?;
    let mut total = 0.0;
    for (v, cell) in &cells {
        let t = v.abs();
        if t == 0.0 {
            continue;
        }
        let contrib = match phi.family() {
            Family::Orlicz { phi: kind } => kind.eval(t) * cell.volume(),
            Family::WeightedLinear {
                weight: Weight::InverseAbs,
            } => {
                let (a, b) = (cell.lo()[0], cell.hi()[0]);
                if a <= 0.0 && b >= 0.0 {
                    return Ok(ModularResult::Divergent(divergent_cert_at(
                        phi, 0.0, cell, t,
                    )?));
                }
                // t·∫ dx/|x| = t·ln(far/near)
                let (near, far) = (a.abs().min(b.abs()), a.abs().max(b.abs()));
                t * (far / near).ln()
            }
            Family::WeightedLinear {
                weight: Weight::Field { field },
            } => {
                let integral = field
                    .integral_on_box(cell)
                    .ok_or(Error::MissingAntiderivative)?;
                t * integral
            }
            Family::SeriesWeight { terms } => {
                let (a, b) = (cell.lo()[0], cell.hi()[0]);
                let inside = (a.max(0.0), b.min(1.0));
                let outside_len = (b - a) - (inside.1 - inside.0).max(0.0);
                let mut acc = t * outside_len;
                if inside.0 < inside.1 {
                    let (ia, ib) = inside;
                    for term in terms {
                        let s = term.location;
                        if ib <= s {
                            continue;
                        }
                        if ia <= s {
                            // the cell reaches the pole from the right
                            let window = Cuboid::interval(s.max(ia), ib)
                                .unwrap_or_else(|_| cell.clone());
                            return Ok(ModularResult::Divergent(divergent_cert_at(
                                phi, s, &window, t,
                            )?));
                        }
                        let c = (-2.0 * term.index as f64).exp2();
                        acc += t * c * ((ib - s) / (ia - s)).ln();
                    }
                }
                acc
            }
            Family::VariableExponent { p } => match p {
                ScalarField::Const { v: pc } => t.powf(*pc) / pc * cell.volume(),
                _ => return Err(Error::MissingAntiderivative),
            },
            Family::DoublePhase { p, r, a } => {
                let (ScalarField::Const { v: pc }, ScalarField::Const { v: rc }) = (p, r) else {
                    return Err(Error::MissingAntiderivative);
                };
                let a_int = a
                    .integral_on_box(cell)
                    .ok_or(Error::MissingAntiderivative)?;
                t.powf(*pc) * cell.volume() + a_int * t.powf(*rc)
            }
        };
        total += contrib;
    }
    Ok(ModularResult::Finite {
        value: total,
        err: 1e-14 * total.abs() + 1e-300,
    })
}

fn divergent_cert_at(
    phi: &MOFunction,
    s: f64,
    window: &Cuboid,
    t: f64,
) -> Result<DivergenceCertificate> {
    let pole = phi
        .poles()
        .iter()
        .find(|p| p.location[0] == s)
        .cloned()
        .ok_or_else(|| Error::precondition("no declared pole at the divergent location"))?;
    Ok(DivergenceCertificate::AnalyticPole {
        pole,
        window: window.clone(),
        t_bound: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{make_orlicz, make_phi1, make_phi2, make_variable_exponent, OrliczKind};
    use crate::descriptor::ScalarField;

    fn chi(lo: f64, hi: f64) -> PiecewiseFunction {
        PiecewiseFunction::simple(1, vec![(1.0, Cuboid::interval(lo, hi).unwrap())]).unwrap()
    }

    #[test]
    fn phi1_log_integral() {
        let phi = make_phi1();
        let region = BoxSet::interval(0.5, 3.0, false).unwrap();
        let r = modular(&phi, &chi(1.0, 2.0), &region, &AccuracySpec::default()).unwrap();
        match r {
            ModularResult::Finite { value, err } => {
                assert!((value - 2f64.ln()).abs() < 1e-7, "got {value}");
                assert!(err < 1e-6);
            }
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn phi1_divergent_across_pole() {
        let phi = make_phi1();
        let region = BoxSet::interval(-2.0, 2.0, false).unwrap();
        for lambda in [0.25, 1.0, 7.0] {
            let f = chi(-1.0, 1.0).scaled(lambda);
            let r = modular(&phi, &f, &region, &AccuracySpec::default()).unwrap();
            match r {
                ModularResult::Divergent(cert) => {
                    assert!(check_certificate(&cert).unwrap());
                    match cert {
                        DivergenceCertificate::AnalyticPole { pole, t_bound, .. } => {
                            assert_eq!(pole.location[0], 0.0);
                            assert!((t_bound - lambda).abs() < 1e-12);
                        }
                        _ => panic!("expected analytic pole"),
                    }
                }
                other => panic!("expected divergent, got {other:?}"),
            }
        }
    }

    #[test]
    fn zero_function_zero_modular() {
        let phi = make_phi1();
        let region = BoxSet::interval(-1.0, 1.0, false).unwrap();
        let r = modular(
            &phi,
            &PiecewiseFunction::zero(1),
            &region,
            &AccuracySpec::default(),
        )
        .unwrap();
        assert_eq!(r.finite_value(), Some(0.0));
    }

    #[test]
    fn constant_square_integrand() {
        let dom = BoxSet::interval(-10.0, 10.0, false).unwrap();
        let phi = make_variable_exponent(ScalarField::constant(2.0), dom).unwrap();
        let region = BoxSet::interval(-5.0, 5.0, false).unwrap();
        let f = chi(0.0, 4.0).scaled(3.0);
        let r = modular(&phi, &f, &region, &AccuracySpec::default()).unwrap();
        match r {
            ModularResult::Finite { value, err } => {
                assert!((value - 18.0).abs() < 1e-7);
                assert!(err < 1e-6);
            }
            other => panic!("expected finite, got {other:?}"),
        }
    }

    #[test]
    fn pole_in_region_but_function_away_is_finite() {
        let phi = make_phi1();
        let region = BoxSet::interval(-1.0, 3.0, false).unwrap();
        let r = modular(&phi, &chi(1.0, 2.0), &region, &AccuracySpec::default()).unwrap();
        assert!((r.finite_value().unwrap() - 2f64.ln()).abs() < 1e-7);
    }

    #[test]
    fn oracle_phi1_exact() {
        let phi = make_phi1();
        let region = BoxSet::interval(0.5, 3.0, false).unwrap();
        let r = modular_oracle(&phi, &chi(1.0, 2.0), &region).unwrap();
        assert!((r.finite_value().unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn oracle_phi2_termwise() {
        let phi = make_phi2(1).unwrap();
        let region = BoxSet::interval(0.0, 1.0, false).unwrap();
        let r = modular_oracle(&phi, &chi(0.75, 1.0), &region).unwrap();
        assert!((r.finite_value().unwrap() - 2f64.ln() / 4.0).abs() < 1e-15);
    }

    #[test]
    fn oracle_phi2_divergent_when_cell_covers_pole() {
        let phi = make_phi2(4).unwrap();
        let region = BoxSet::interval(0.0, 1.0, false).unwrap();
        // [0.3, 0.6] contains r_1 = 1/2 and r_2 = 1/3
        let r = modular_oracle(&phi, &chi(0.3, 0.6), &region).unwrap();
        match r {
            ModularResult::Divergent(cert) => assert!(check_certificate(&cert).unwrap()),
            other => panic!("expected divergent, got {other:?}"),
        }
    }

    #[test]
    fn engine_matches_oracle_on_phi2() {
        let phi = make_phi2(3).unwrap();
        let region = BoxSet::interval(0.0, 1.0, false).unwrap();
        let f = chi(0.75, 0.95).scaled(2.0);
        let engine = modular(&phi, &f, &region, &AccuracySpec::default()).unwrap();
        let oracle = modular_oracle(&phi, &f, &region).unwrap();
        let (a, b) = (engine.finite_value().unwrap(), oracle.finite_value().unwrap());
        assert!((a - b).abs() <= 1e-7_f64.max(1e-6 * b.abs()), "{a} vs {b}");
    }

    #[test]
    fn certificate_checks() {
        let phi = make_phi1();
        let pole = phi.poles()[0].clone();
        // valid: order-1 pole, window straddles 0
        let good = DivergenceCertificate::AnalyticPole {
            pole: pole.clone(),
            window: Cuboid::interval(-0.1, 0.1).unwrap(),
            t_bound: 1.0,
        };
        assert!(check_certificate(&good).unwrap());
        // sub-1 order converges
        let mut weak_pole = pole.clone();
        weak_pole.order = 0.5;
        let weak = DivergenceCertificate::AnalyticPole {
            pole: weak_pole,
            window: Cuboid::interval(-0.1, 0.1).unwrap(),
            t_bound: 1.0,
        };
        assert!(!check_certificate(&weak).unwrap());
        // window not touching the pole
        let detached = DivergenceCertificate::AnalyticPole {
            pole,
            window: Cuboid::interval(0.5, 0.7).unwrap(),
            t_bound: 1.0,
        };
        assert!(!check_certificate(&detached).unwrap());
    }

    #[test]
    fn growth_certificate_rules() {
        let ok = DivergenceCertificate::Growth {
            radii: vec![0.1, 0.05, 0.025],
            partials: vec![9e5, 1.4e6, 1.9e6],
            threshold: D_MAX,
        };
        assert!(check_certificate(&ok).unwrap());
        let decelerating = DivergenceCertificate::Growth {
            radii: vec![0.1, 0.05, 0.025],
            partials: vec![1.1e6, 1.6e6, 1.7e6],
            threshold: D_MAX,
        };
        assert!(!check_certificate(&decelerating).unwrap());
        let malformed = DivergenceCertificate::Growth {
            radii: vec![0.1],
            partials: vec![2e6],
            threshold: D_MAX,
        };
        assert!(check_certificate(&malformed).is_err());
    }

    #[test]
    fn growth_heuristic_flags_power_singularity() {
        // Φ(x,t) = t with an opaque integrand ~ x^{−3/2} near 0.
        let dom = BoxSet::interval(-2.0, 2.0, false).unwrap();
        let phi = make_orlicz(OrliczKind::Power { exponent: 1.0 }, dom).unwrap();
        let support = BoxSet::interval(0.0, 1.0, true).unwrap();
        let f = PiecewiseFunction::opaque(
            |x: &[f64]| {
                if x[0] > 0.0 {
                    x[0].powf(-1.5)
                } else {
                    0.0
                }
            },
            support,
            false,
        );
        let region = BoxSet::interval(0.0, 1.0, false).unwrap();
        let r = modular(&phi, &f, &region, &AccuracySpec::default()).unwrap();
        match r {
            ModularResult::Divergent(cert) => {
                assert!(matches!(cert, DivergenceCertificate::Growth { .. }));
                assert!(check_certificate(&cert).unwrap());
            }
            other => panic!("expected growth divergence, got {other:?}"),
        }
    }

    #[test]
    fn region_outside_domain_rejected() {
        let dom = BoxSet::interval(0.0, 1.0, false).unwrap();
        let phi = make_orlicz(OrliczKind::Power { exponent: 2.0 }, dom).unwrap();
        let region = BoxSet::interval(0.0, 2.0, false).unwrap();
        assert!(modular(&phi, &chi(0.2, 0.4), &region, &AccuracySpec::default()).is_err());
    }

    #[test]
    fn budget_zero_rejected() {
        let phi = make_phi1();
        let region = BoxSet::interval(0.0, 1.0, false).unwrap();
        let acc = AccuracySpec {
            abs_err: 1e-8,
            budget: 0,
        };
        assert!(modular(&phi, &chi(0.2, 0.4), &region, &acc).is_err());
    }
}

