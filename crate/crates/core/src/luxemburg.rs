//! Luxemburg norm `‖f‖ = inf{λ > 0 : I_Φ(f/λ) ≤ 1}` by monotone bracketing
//! and bisection on the modular, plus space-membership probes.

use crate::error::{Error, Result};
use crate::family::MOFunction;
use crate::function::PiecewiseFunction;
use crate::geometry::BoxSet;
use crate::modular::{modular, AccuracySpec, ModularResult};
use serde::{Deserialize, Serialize};

/// Largest/smallest scaling explored before declaring `+∞`/`0`.
pub const LAMBDA_CAP_LOG2: i32 = 60;

/// Schedule-relative membership verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Membership {
    /// Finite modular at every schedule scaling.
    InE,
    /// Finite at small scalings, divergent at large ones.
    InLOnly,
    /// Divergent at every schedule scaling.
    NotInL,
    /// Some probe was inconclusive.
    Undetermined,
}

/// Norm value with its certified bracket and membership evidence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormResult {
    /// `+∞` when no scaling brings the modular to 1.
    pub value: f64,
    /// `[lo, hi]`: modular at `f/hi` certified ≤ 1, at `f/lo` above 1 or
    /// divergent. The reported value is `hi`, the certified-feasible end.
    pub bracket: (f64, f64),
    pub modular_at_value: ModularResult,
    pub membership: Membership,
}

/// Geometric scaling schedule `{2^k : k_min ≤ k ≤ k_max}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaSchedule {
    pub k_min: i32,
    pub k_max: i32,
}

impl Default for LambdaSchedule {
    fn default() -> Self {
        LambdaSchedule {
            k_min: -10,
            k_max: 10,
        }
    }
}

impl LambdaSchedule {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (self.k_min..=self.k_max).map(|k| 2f64.powi(k))
    }
}

fn norm_region(phi: &MOFunction, f: &PiecewiseFunction) -> Result<BoxSet> {
    f.support().closure().intersect(&phi.domain().closure())
}

/// Membership of `f` relative to the scaling schedule: all modulars finite
/// puts `f` among the finite elements, all divergent outside the space,
/// divergence only at large scalings witnesses the gap between them.
pub fn membership_probe(
    phi: &MOFunction,
    f: &PiecewiseFunction,
    schedule: &LambdaSchedule,
    acc: &AccuracySpec,
) -> Result<Membership> {
    if f.is_identically_zero() {
        return Ok(Membership::InE);
    }
    let region = norm_region(phi, f)?;
    let mut any_finite = false;
    let mut any_divergent = false;
    let mut finite_at_max = false;
    let mut divergent_at_min = false;
    let lambdas: Vec<f64> = schedule.values().collect();
    for (i, lambda) in lambdas.iter().enumerate() {
        let r = modular(phi, &f.scaled(*lambda), &region, acc)?;
        match r {
            ModularResult::Finite { .. } => {
                any_finite = true;
                if i == lambdas.len() - 1 {
                    finite_at_max = true;
                }
            }
            ModularResult::Divergent(_) => {
                any_divergent = true;
                if i == 0 {
                    divergent_at_min = true;
                }
            }
            ModularResult::Inconclusive { .. } => return Ok(Membership::Undetermined),
        }
    }
    Ok(if finite_at_max {
        Membership::InE
    } else if divergent_at_min {
        Membership::NotInL
    } else if any_finite && any_divergent {
        Membership::InLOnly
    } else {
        Membership::Undetermined
    })
}

/// Compute the Luxemburg norm by geometric bracketing plus bisection.
///
/// `λ ↦ I_Φ(f/λ)` is nonincreasing; the solver expands geometrically from
/// `λ = 1` to bracket the level-1 crossing, bisects the bracket down to
/// `tol`, and reports the certified-feasible end. Families linear in `t`
/// take a fast path (`‖f‖ = I_Φ(f)` exactly) whose bracket is still
/// verified by two modular evaluations.
pub fn luxemburg_norm(
    phi: &MOFunction,
    f: &PiecewiseFunction,
    tol: f64,
    acc: &AccuracySpec,
) -> Result<NormResult> {
    let norm = luxemburg_norm_value(phi, f, tol, acc)?;
    if norm.value == 0.0 || !norm.value.is_finite() {
        return Ok(norm);
    }
    let membership = membership_probe(phi, f, &LambdaSchedule::default(), &AccuracySpec::loose())?;
    Ok(NormResult { membership, ..norm })
}

/// The norm solver without the membership probe; membership is reported
/// from the search evidence only (cheap enough for inner loops).
pub fn luxemburg_norm_value(
    phi: &MOFunction,
    f: &PiecewiseFunction,
    tol: f64,
    acc: &AccuracySpec,
) -> Result<NormResult> {
    if tol <= 0.0 {
        return Err(Error::precondition("norm tolerance must be positive"));
    }
    if f.is_identically_zero() || f.support().is_empty() {
        return Ok(NormResult {
            value: 0.0,
            bracket: (0.0, 0.0),
            modular_at_value: ModularResult::Finite {
                value: 0.0,
                err: 0.0,
            },
            membership: Membership::InE,
        });
    }
    let region = norm_region(phi, f)?;
    let eval = |lambda: f64| -> Result<ModularResult> {
        modular(phi, &f.scaled(1.0 / lambda), &region, acc)
    };

    // Fast path for families linear in t: I(f/λ) = I(f)/λ, so the crossing
    // is I(f) itself. The defining bracket is still verified.
    if phi.is_linear_in_t() {
        match modular(phi, f, &region, acc)? {
            ModularResult::Finite { value: i0, err } => {
                if i0 <= 0.0 {
                    return Ok(NormResult {
                        value: 0.0,
                        bracket: (0.0, 0.0),
                        modular_at_value: ModularResult::Finite { value: 0.0, err },
                        membership: Membership::InE,
                    });
                }
                let half = (0.5 * tol).max(i0 * 1e-12);
                let hi = i0 + half;
                let lo = (i0 - half).max(i0 * 0.5);
                let at_hi = eval(hi)?;
                let at_lo = eval(lo)?;
                let hi_ok =
                    matches!(at_hi, ModularResult::Finite { value, .. } if value <= 1.0 + 1e-9);
                let lo_ok = match &at_lo {
                    ModularResult::Finite { value, .. } => *value > 1.0 - 1e-9,
                    ModularResult::Divergent(_) => true,
                    ModularResult::Inconclusive { .. } => false,
                };
                if hi_ok && lo_ok {
                    return Ok(NormResult {
                        value: hi,
                        bracket: (lo, hi),
                        modular_at_value: at_hi,
                        membership: Membership::InE,
                    });
                }
                // verification failed (quadrature corner); fall through to
                // the generic search
            }
            ModularResult::Divergent(cert) => {
                // linear in t: divergent at one scaling means divergent at all
                return Ok(NormResult {
                    value: f64::INFINITY,
                    bracket: (f64::INFINITY, f64::INFINITY),
                    modular_at_value: ModularResult::Divergent(cert),
                    membership: Membership::NotInL,
                });
            }
            ModularResult::Inconclusive { partial, evals } => {
                return Ok(NormResult {
                    value: f64::NAN,
                    bracket: (f64::NAN, f64::NAN),
                    modular_at_value: ModularResult::Inconclusive { partial, evals },
                    membership: Membership::Undetermined,
                });
            }
        }
    }

    // Geometric expansion from λ = 1. `feasible` means I(f/λ) ≤ 1 certified.
    let classify = |r: &ModularResult| -> Option<bool> {
        match r {
            ModularResult::Finite { value, .. } => Some(*value <= 1.0),
            ModularResult::Divergent(_) => Some(false),
            ModularResult::Inconclusive { .. } => None,
        }
    };
    let mut lambda = 1.0;
    let first = eval(lambda)?;
    let Some(first_feasible) = classify(&first) else {
        return Ok(NormResult {
            value: f64::NAN,
            bracket: (f64::NAN, f64::NAN),
            modular_at_value: first,
            membership: Membership::Undetermined,
        });
    };
    let mut lo;
    let mut hi;
    let mut at_hi;
    if first_feasible {
        // shrink downward until infeasible
        hi = lambda;
        at_hi = first;
        loop {
            lambda *= 0.5;
            if lambda < 2f64.powi(-LAMBDA_CAP_LOG2) {
                // norm indistinguishable from 0 at solver scale
                return Ok(NormResult {
                    value: hi,
                    bracket: (0.0, hi),
                    modular_at_value: at_hi,
                    membership: Membership::Undetermined,
                });
            }
            let r = eval(lambda)?;
            match classify(&r) {
                Some(true) => {
                    hi = lambda;
                    at_hi = r;
                }
                Some(false) => {
                    lo = lambda;
                    break;
                }
                None => {
                    return Ok(NormResult {
                        value: hi,
                        bracket: (lambda, hi),
                        modular_at_value: r,
                        membership: Membership::Undetermined,
                    })
                }
            }
        }
    } else {
        // expand upward until feasible
        lo = lambda;
        loop {
            lambda *= 2.0;
            if lambda > 2f64.powi(LAMBDA_CAP_LOG2) {
                return Ok(NormResult {
                    value: f64::INFINITY,
                    bracket: (lo, f64::INFINITY),
                    modular_at_value: first,
                    membership: Membership::NotInL,
                });
            }
            let r = eval(lambda)?;
            match classify(&r) {
                Some(true) => {
                    hi = lambda;
                    at_hi = r;
                    break;
                }
                Some(false) => {
                    lo = lambda;
                }
                None => {
                    return Ok(NormResult {
                        value: f64::NAN,
                        bracket: (lo, f64::NAN),
                        modular_at_value: r,
                        membership: Membership::Undetermined,
                    })
                }
            }
        }
    }

    // Bisection; the modular is monotone along the trace, which the loop
    // asserts as it goes.
    let mut last_lo_modular = f64::INFINITY;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let r = eval(mid)?;
        match classify(&r) {
            Some(true) => {
                hi = mid;
                at_hi = r;
            }
            Some(false) => {
                if let ModularResult::Finite { value, .. } = &r {
                    debug_assert!(
                        *value <= last_lo_modular * (1.0 + 1e-6) + 1e-12,
                        "modular must be nonincreasing in λ"
                    );
                    last_lo_modular = *value;
                }
                lo = mid;
            }
            None => {
                return Ok(NormResult {
                    value: hi,
                    bracket: (lo, hi),
                    modular_at_value: r,
                    membership: Membership::Undetermined,
                })
            }
        }
    }
    Ok(NormResult {
        value: hi,
        bracket: (lo, hi),
        modular_at_value: at_hi,
        membership: Membership::InE,
    })
}

/// One row of the norm/modular convergence report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub norm: f64,
    /// `I_Φ(λ(f − f_n))` per schedule value.
    pub modulars: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub lambdas: Vec<f64>,
    pub rows: Vec<ConvergenceRow>,
    pub norms_converge: bool,
    pub modulars_converge: bool,
    /// True when one side converges and the other does not (tolerance 1e−3).
    pub violation: bool,
}

/// Pair each `f_n` with its norm distance to `f` and the modulars
/// `I_Φ(λ(f−f_n))` over the λ schedule; flag any norm/modular convergence
/// mismatch.
pub fn norm_modular_convergence_check(
    phi: &MOFunction,
    f: &PiecewiseFunction,
    seq: &[PiecewiseFunction],
    lambdas: &[f64],
    tol: f64,
    acc: &AccuracySpec,
) -> Result<ConvergenceReport> {
    let lambdas = if lambdas.is_empty() {
        vec![0.5, 1.0, 2.0, 10.0]
    } else {
        lambdas.to_vec()
    };
    let mut rows = Vec::with_capacity(seq.len());
    for (n, fnn) in seq.iter().enumerate() {
        let diff = PiecewiseFunction::difference(f, fnn)?;
        let norm = luxemburg_norm_value(phi, &diff, tol, acc)?.value;
        let region = norm_region(phi, &diff)?;
        let mut modulars = Vec::with_capacity(lambdas.len());
        for lambda in &lambdas {
            let r = modular(phi, &diff.scaled(*lambda), &region, acc)?;
            modulars.push(match r {
                ModularResult::Finite { value, .. } => value,
                ModularResult::Divergent(_) => f64::INFINITY,
                ModularResult::Inconclusive { .. } => f64::NAN,
            });
        }
        rows.push(ConvergenceRow {
            n: n + 1,
            norm,
            modulars,
        });
    }
    let conv_tol = 1e-3;
    let norms_converge = rows.last().is_some_and(|r| r.norm <= conv_tol);
    let modulars_converge = rows
        .last()
        .is_some_and(|r| r.modulars.iter().all(|m| *m <= conv_tol));
    Ok(ConvergenceReport {
        lambdas,
        rows,
        norms_converge,
        modulars_converge,
        violation: norms_converge != modulars_converge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{make_orlicz, make_phi1, make_phi2, OrliczKind};
    use crate::geometry::Cuboid;

    fn chi(lo: f64, hi: f64) -> PiecewiseFunction {
        PiecewiseFunction::simple(1, vec![(1.0, Cuboid::interval(lo, hi).unwrap())]).unwrap()
    }

    #[test]
    fn square_family_norm_of_indicator() {
        let dom = BoxSet::interval(-10.0, 10.0, false).unwrap();
        let phi = make_orlicz(OrliczKind::Power { exponent: 2.0 }, dom).unwrap();
        let r = luxemburg_norm(&phi, &chi(0.0, 4.0), 1e-6, &AccuracySpec::default()).unwrap();
        assert!((r.value - 2.0).abs() <= 1e-6 + 1e-7, "got {}", r.value);
        assert!(r.bracket.1 - r.bracket.0 <= 1e-6);
        assert_eq!(r.membership, Membership::InE);
        match r.modular_at_value {
            ModularResult::Finite { value, .. } => assert!(value <= 1.0 + 1e-9),
            _ => panic!("expected finite modular at the norm"),
        }
    }

    #[test]
    fn phi1_norm_log_two() {
        let phi = make_phi1();
        let r = luxemburg_norm(&phi, &chi(1.0, 2.0), 1e-6, &AccuracySpec::default()).unwrap();
        assert!((r.value - 2f64.ln()).abs() <= 1e-6, "got {}", r.value);
        assert_eq!(r.membership, Membership::InE);
    }

    #[test]
    fn zero_function_norm() {
        let phi = make_phi1();
        let r = luxemburg_norm(
            &phi,
            &PiecewiseFunction::zero(1),
            1e-6,
            &AccuracySpec::default(),
        )
        .unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.bracket, (0.0, 0.0));
    }

    #[test]
    fn pole_inside_support_gives_infinite_norm() {
        let phi = make_phi1();
        let r = luxemburg_norm(&phi, &chi(-1.0, 1.0), 1e-6, &AccuracySpec::default()).unwrap();
        assert!(r.value.is_infinite());
        assert_eq!(r.membership, Membership::NotInL);
    }

    #[test]
    fn membership_examples() {
        let phi = make_phi1();
        let acc = AccuracySpec::loose();
        assert_eq!(
            membership_probe(&phi, &chi(1.0, 2.0), &LambdaSchedule::default(), &acc).unwrap(),
            Membership::InE
        );
        assert_eq!(
            membership_probe(&phi, &chi(-1.0, 1.0), &LambdaSchedule::default(), &acc).unwrap(),
            Membership::NotInL
        );
    }

    #[test]
    fn membership_gap_between_spaces() {
        // Φ(x,t) = e^t − 1 with f = 1.5·ln(1/x) on (0,1):
        // I(λf) = ∫ x^{−1.5λ} − 1 dx, finite iff 1.5λ < 1.
        let dom = BoxSet::interval(-2.0, 2.0, false).unwrap();
        let phi = make_orlicz(OrliczKind::ExpM1, dom).unwrap();
        let support = BoxSet::interval(0.0, 1.0, true).unwrap();
        let f = PiecewiseFunction::opaque(
            |x: &[f64]| {
                if x[0] > 0.0 && x[0] < 1.0 {
                    1.5 * (1.0 / x[0]).ln()
                } else {
                    0.0
                }
            },
            support,
            false,
        );
        let schedule = LambdaSchedule { k_min: -2, k_max: 2 };
        let m = membership_probe(&phi, &f, &schedule, &AccuracySpec::default()).unwrap();
        assert_eq!(m, Membership::InLOnly);
    }

    #[test]
    fn convergence_rows_for_shrinking_difference() {
        let phi = make_phi1();
        let f = chi(1.0, 2.0);
        let seq: Vec<PiecewiseFunction> = (1..=8)
            .map(|n| f.scaled(1.0 - 1.0 / n as f64))
            .collect();
        let report = norm_modular_convergence_check(
            &phi,
            &f,
            &seq,
            &[0.5, 1.0, 2.0, 10.0],
            1e-6,
            &AccuracySpec::default(),
        )
        .unwrap();
        // I(λ(f − f_n)) = λ·ln2/n for the linear family
        for row in &report.rows {
            let n = row.n as f64;
            for (lambda, m) in report.lambdas.iter().zip(&row.modulars) {
                let expect = lambda * 2f64.ln() / n;
                assert!(
                    (m - expect).abs() < 1e-6,
                    "n={n} λ={lambda}: {m} vs {expect}"
                );
            }
        }
        assert!(!report.violation || !report.norms_converge);
    }

    #[test]
    fn constant_sequence_all_zero() {
        let phi = make_phi1();
        let f = chi(1.0, 2.0);
        let seq = vec![f.clone(), f.clone()];
        let report =
            norm_modular_convergence_check(&phi, &f, &seq, &[], 1e-6, &AccuracySpec::default())
                .unwrap();
        for row in &report.rows {
            assert_eq!(row.norm, 0.0);
            assert!(row.modulars.iter().all(|m| *m == 0.0));
        }
        assert!(!report.violation);
    }

    #[test]
    fn phi2_truncated_norm_uses_fast_path() {
        let phi = make_phi2(2).unwrap();
        // support right of both truncated poles (r_1=1/2, r_2=1/3)
        let r = luxemburg_norm(&phi, &chi(0.75, 0.9), 1e-6, &AccuracySpec::default()).unwrap();
        assert!(r.value.is_finite() && r.value > 0.0);
        assert_eq!(r.membership, Membership::InE);
        // oracle cross-check: I(f) = Σ 4^{−n} ln((b−r_n)/(a−r_n))
        let i0 = 0.25 * ((0.9_f64 - 0.5) / (0.75 - 0.5)).ln()
            + 0.0625 * ((0.9_f64 - 1.0 / 3.0) / (0.75 - 1.0 / 3.0)).ln();
        assert!((r.value - i0).abs() <= 2e-6, "{} vs {}", r.value, i0);
    }

    #[test]
    fn invalid_tolerance_rejected() {
        let phi = make_phi1();
        assert!(luxemburg_norm(&phi, &chi(1.0, 2.0), 0.0, &AccuracySpec::default()).is_err());
    }
}

