//! Closed-form scalar fields on box domains.
//!
//! The exponent and weight functions accepted by the family constructors are
//! restricted to this grammar so that suprema, infima and integrals over
//! boxes are available analytically, not just as grid estimates.

use crate::error::{Error, Result};
use crate::geometry::{BoxSet, Cuboid};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

/// One piece of a piecewise-constant field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub set: BoxSet,
    pub value: f64,
}

/// A real-valued field on a box domain with analytic range bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarField {
    Const {
        v: f64,
    },
    /// `coeffs · x + offset`
    Affine {
        coeffs: Vec<f64>,
        offset: f64,
    },
    /// `offset + amp · sin(freq · x + phase)`
    Sinusoid {
        offset: f64,
        amp: f64,
        freq: Vec<f64>,
        phase: f64,
    },
    /// Value per box set, `default` elsewhere; pieces must be pairwise
    /// disjoint.
    Piecewise {
        pieces: Vec<Piece>,
        default: f64,
    },
    /// `offset + scale / |x − center|`, +∞ at the center. The one unbounded
    /// form in the grammar.
    RecipDist {
        center: Vec<f64>,
        scale: f64,
        offset: f64,
    },
}

impl ScalarField {
    pub fn constant(v: f64) -> Self {
        ScalarField::Const { v }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ScalarField::Const { .. } => Ok(()),
            ScalarField::Affine { coeffs, .. } => {
                if coeffs.len() != dim {
                    return Err(Error::InvalidDescriptor(format!(
                        "affine coeffs have length {}, domain dimension is {dim}",
                        coeffs.len()
                    )));
                }
                Ok(())
            }
            ScalarField::Sinusoid { freq, .. } => {
                if freq.len() != dim {
                    return Err(Error::InvalidDescriptor(format!(
                        "sinusoid freq has length {}, domain dimension is {dim}",
                        freq.len()
                    )));
                }
                Ok(())
            }
            ScalarField::Piecewise { pieces, .. } => {
                for p in pieces {
                    if p.set.dim() != dim {
                        return Err(Error::InvalidDescriptor(
                            "piecewise piece dimension mismatch".into(),
                        ));
                    }
                }
                for (i, a) in pieces.iter().enumerate() {
                    for b in &pieces[i + 1..] {
                        let overlap = a.set.intersect(&b.set)?;
                        if overlap.volume() > 0.0 {
                            return Err(Error::InvalidDescriptor(
                                "piecewise pieces overlap".into(),
                            ));
                        }
                    }
                }
                Ok(())
            }
            ScalarField::RecipDist { center, scale, .. } => {
                if center.len() != dim {
                    return Err(Error::InvalidDescriptor(
                        "recip_dist center dimension mismatch".into(),
                    ));
                }
                if *scale <= 0.0 {
                    return Err(Error::InvalidDescriptor(
                        "recip_dist scale must be positive".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Pointwise evaluation; may return `+∞` (recip_dist at its center).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ScalarField::Const { v } => *v,
            ScalarField::Affine { coeffs, offset } => {
                offset + coeffs.iter().zip(x).map(|(c, xi)| c * xi).sum::<f64>()
            }
            ScalarField::Sinusoid {
                offset,
                amp,
                freq,
                phase,
            } => {
                let u = phase + freq.iter().zip(x).map(|(f, xi)| f * xi).sum::<f64>();
                offset + amp * u.sin()
            }
            ScalarField::Piecewise { pieces, default } => pieces
                .iter()
                .find(|p| p.set.closure().contains_point(x))
                .map_or(*default, |p| p.value),
            ScalarField::RecipDist {
                center,
                scale,
                offset,
            } => {
                let d = dist(center, x);
                if d == 0.0 {
                    f64::INFINITY
                } else {
                    offset + scale / d
                }
            }
        }
    }

    /// Exact `(inf, sup)` over the closed box.
    pub fn range_on_box(&self, b: &Cuboid) -> (f64, f64) {
        match self {
            ScalarField::Const { v } => (*v, *v),
            ScalarField::Affine { coeffs, offset } => {
                let (mut lo, mut hi) = (*offset, *offset);
                for (c, (a, z)) in coeffs.iter().zip(b.lo().iter().zip(b.hi())) {
                    let (p, q) = (c * a, c * z);
                    lo += p.min(q);
                    hi += p.max(q);
                }
                (lo, hi)
            }
            ScalarField::Sinusoid {
                offset,
                amp,
                freq,
                phase,
            } => {
                let (mut u_lo, mut u_hi) = (*phase, *phase);
                for (f, (a, z)) in freq.iter().zip(b.lo().iter().zip(b.hi())) {
                    let (p, q) = (f * a, f * z);
                    u_lo += p.min(q);
                    u_hi += p.max(q);
                }
                let (s_lo, s_hi) = sin_range(u_lo, u_hi);
                let (p, q) = (amp * s_lo, amp * s_hi);
                (offset + p.min(q), offset + p.max(q))
            }
            ScalarField::Piecewise { pieces, default } => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut covered = 0.0;
                for p in pieces {
                    let overlap: f64 = p
                        .set
                        .boxes()
                        .iter()
                        .filter_map(|pb| pb.intersect(b))
                        .map(|c| c.volume())
                        .sum();
                    if overlap > 0.0 {
                        lo = lo.min(p.value);
                        hi = hi.max(p.value);
                        covered += overlap;
                    }
                }
                if covered < b.volume() {
                    lo = lo.min(*default);
                    hi = hi.max(*default);
                }
                (lo, hi)
            }
            ScalarField::RecipDist {
                center,
                scale,
                offset,
            } => {
                let near = b.dist_sq(center).sqrt();
                let far = b
                    .corners()
                    .into_iter()
                    .map(|c| dist(center, &c))
                    .fold(0.0_f64, f64::max);
                let sup = if near == 0.0 {
                    f64::INFINITY
                } else {
                    offset + scale / near
                };
                let inf = if far == 0.0 {
                    f64::INFINITY
                } else {
                    offset + scale / far
                };
                (inf, sup)
            }
        }
    }

    /// Exact `(inf, sup)` over a box set.
    pub fn range_on_set(&self, s: &BoxSet) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in s.boxes() {
            let (a, z) = self.range_on_box(b);
            lo = lo.min(a);
            hi = hi.max(z);
        }
        (lo, hi)
    }

    /// Closed-form integral over a box; `None` when the grammar does not
    /// provide one (recip_dist).
    pub fn integral_on_box(&self, b: &Cuboid) -> Option<f64> {
        match self {
            ScalarField::Const { v } => Some(v * b.volume()),
            ScalarField::Affine { .. } => {
                // Affine fields integrate to the center value times the volume.
                Some(self.eval(&b.center()) * b.volume())
            }
            ScalarField::Sinusoid {
                offset,
                amp,
                freq,
                phase,
            } => Some(offset * b.volume() + amp * sin_integral(freq, *phase, b)),
            ScalarField::Piecewise { pieces, default } => {
                let mut total = default * b.volume();
                for p in pieces {
                    let overlap: f64 = p
                        .set
                        .boxes()
                        .iter()
                        .filter_map(|pb| pb.intersect(b))
                        .map(|c| c.volume())
                        .sum();
                    total += (p.value - default) * overlap;
                }
                Some(total)
            }
            ScalarField::RecipDist { .. } => None,
        }
    }

    /// Support of the field within `domain`, up to null sets: the region
    /// where the field is not identically zero.
    pub fn support_within(&self, domain: &BoxSet) -> Result<BoxSet> {
        match self {
            ScalarField::Const { v } => {
                if *v == 0.0 {
                    Ok(BoxSet::empty(domain.dim(), domain.is_closed()))
                } else {
                    Ok(domain.clone())
                }
            }
            ScalarField::Affine { coeffs, offset } => {
                if coeffs.iter().all(|c| *c == 0.0) && *offset == 0.0 {
                    Ok(BoxSet::empty(domain.dim(), domain.is_closed()))
                } else {
                    // zero set is a null set
                    Ok(domain.clone())
                }
            }
            ScalarField::Sinusoid { offset, amp, .. } => {
                if *amp == 0.0 && *offset == 0.0 {
                    Ok(BoxSet::empty(domain.dim(), domain.is_closed()))
                } else if *offset == 0.0 && *amp != 0.0 {
                    // sin vanishes on a null set only
                    Ok(domain.clone())
                } else {
                    Ok(domain.clone())
                }
            }
            ScalarField::Piecewise { pieces, default } => {
                let mut supp = if *default != 0.0 {
                    let mut s = domain.clone();
                    for p in pieces.iter().filter(|p| p.value == 0.0) {
                        s = s.difference(&match_flag(&p.set, &s))?;
                    }
                    s
                } else {
                    BoxSet::empty(domain.dim(), domain.is_closed())
                };
                for p in pieces.iter().filter(|p| p.value != 0.0) {
                    let part = match_flag(&p.set, domain).intersect(domain)?;
                    supp = supp.union(&match_flag(&part, &supp))?;
                }
                Ok(supp)
            }
            ScalarField::RecipDist { .. } => Ok(domain.clone()),
        }
    }
}

fn match_flag(s: &BoxSet, like: &BoxSet) -> BoxSet {
    if s.is_closed() == like.is_closed() {
        s.clone()
    } else if like.is_closed() {
        s.closure()
    } else {
        s.interior()
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Range of `sin` over the angle interval `[lo, hi]`.
fn sin_range(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo >= TAU {
        return (-1.0, 1.0);
    }
    let crest_in = |crest: f64| -> bool {
        let k = ((lo - crest) / TAU).ceil();
        crest + k * TAU <= hi
    };
    let mut min = lo.sin().min(hi.sin());
    let mut max = lo.sin().max(hi.sin());
    if crest_in(std::f64::consts::FRAC_PI_2) {
        max = 1.0;
    }
    if crest_in(-std::f64::consts::FRAC_PI_2) {
        min = -1.0;
    }
    (min, max)
}

/// `∫_box sin(freq·x + phase) dx` in closed form.
fn sin_integral(freq: &[f64], phase: f64, b: &Cuboid) -> f64 {
    match b.dim() {
        1 => {
            let f = freq[0];
            let (a, z) = (b.lo()[0], b.hi()[0]);
            if f == 0.0 {
                phase.sin() * (z - a)
            } else {
                ((f * a + phase).cos() - (f * z + phase).cos()) / f
            }
        }
        2 => {
            let (f0, f1) = (freq[0], freq[1]);
            let (x0, x1) = (b.lo()[0], b.hi()[0]);
            let (y0, y1) = (b.lo()[1], b.hi()[1]);
            match (f0 == 0.0, f1 == 0.0) {
                (true, true) => phase.sin() * b.volume(),
                (true, false) => {
                    (x1 - x0) * (((f1 * y0 + phase).cos() - (f1 * y1 + phase).cos()) / f1)
                }
                (false, true) => {
                    (y1 - y0) * (((f0 * x0 + phase).cos() - (f0 * x1 + phase).cos()) / f0)
                }
                (false, false) => {
                    let s = |x: f64, y: f64| (f0 * x + f1 * y + phase).sin();
                    -(s(x1, y1) - s(x0, y1) - s(x1, y0) + s(x0, y0)) / (f0 * f1)
                }
            }
        }
        _ => unreachable!(),
    }
}

impl Cuboid {
    /// All corners of the box (2 in d=1, 4 in d=2).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        match self.dim() {
            1 => vec![vec![self.lo()[0]], vec![self.hi()[0]]],
            2 => vec![
                vec![self.lo()[0], self.lo()[1]],
                vec![self.lo()[0], self.hi()[1]],
                vec![self.hi()[0], self.lo()[1]],
                vec![self.hi()[0], self.hi()[1]],
            ],
            _ => unreachable!(),
        }
    }
}
