//! Real-valued functions on box domains: simple (finitely many values on
//! boxes), smooth composites built from plateau bumps, and opaque callables.

use crate::error::{Error, Result};
use crate::geometry::{BoxSet, Cuboid};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::sync::Arc;

/// `exp(−1/τ)` for τ > 0, else 0: the classic smooth cutoff kernel.
fn cutoff(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else {
        (-1.0 / tau).exp()
    }
}

/// Smooth ramp from 0 at τ ≤ 0 to 1 at τ ≥ 1.
pub fn smoothstep(tau: f64) -> f64 {
    if tau <= 0.0 {
        0.0
    } else if tau >= 1.0 {
        1.0
    } else {
        let a = cutoff(tau);
        let b = cutoff(1.0 - tau);
        a / (a + b)
    }
}

/// A tensor-product bump: 1 on `inner`, 0 outside `outer`, smooth ramps on
/// each face in between.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpPrimitive {
    inner: Cuboid,
    outer: Cuboid,
}

impl BumpPrimitive {
    /// Requires positive per-axis margins between `inner` and `outer`.
    pub fn new(inner: Cuboid, outer: Cuboid) -> Result<Self> {
        if inner.dim() != outer.dim() {
            return Err(Error::DimensionMismatch(inner.dim(), outer.dim()));
        }
        for i in 0..inner.dim() {
            if !(outer.lo()[i] < inner.lo()[i] && inner.hi()[i] < outer.hi()[i]) {
                return Err(Error::precondition(
                    "bump inner box must sit strictly inside its outer box",
                ));
            }
        }
        Ok(BumpPrimitive { inner, outer })
    }

    pub fn inner(&self) -> &Cuboid {
        &self.inner
    }

    pub fn outer(&self) -> &Cuboid {
        &self.outer
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for i in 0..self.inner.dim() {
            let (wl, wh) = (self.outer.lo()[i], self.outer.hi()[i]);
            let (kl, kh) = (self.inner.lo()[i], self.inner.hi()[i]);
            let xi = x[i];
            let p = if xi <= wl || xi >= wh {
                0.0
            } else if xi < kl {
                smoothstep((xi - wl) / (kl - wl))
            } else if xi <= kh {
                1.0
            } else {
                smoothstep((wh - xi) / (wh - kh))
            };
            if p == 0.0 {
                return 0.0;
            }
            v *= p;
        }
        v
    }
}

/// `1 − Π_b (1 − g_b)`: a smooth [0,1] plateau equal to 1 on the union of
/// the inner boxes and supported in the union of the outer boxes. A single
/// bump is the one-factor case.
#[derive(Debug, Clone, PartialEq)]
pub struct PlateauBump {
    bumps: Vec<BumpPrimitive>,
}

impl PlateauBump {
    pub fn new(bumps: Vec<BumpPrimitive>) -> Result<Self> {
        if bumps.is_empty() {
            return Err(Error::precondition("a plateau needs at least one bump"));
        }
        Ok(PlateauBump { bumps })
    }

    pub fn bumps(&self) -> &[BumpPrimitive] {
        &self.bumps
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let mut prod = 1.0;
        for b in &self.bumps {
            prod *= 1.0 - b.eval(x);
            if prod == 0.0 {
                return 1.0;
            }
        }
        1.0 - prod
    }

    pub fn support_boxes(&self) -> Vec<Cuboid> {
        self.bumps.iter().map(|b| b.outer.clone()).collect()
    }

    pub fn plateau_boxes(&self) -> Vec<Cuboid> {
        self.bumps.iter().map(|b| b.inner.clone()).collect()
    }
}

type OpaqueEval = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum FunctionKind {
    /// `Σ value·χ_box`; overlapping boxes add.
    Simple { terms: Vec<(f64, Cuboid)> },
    /// `Σ coeff·plateau`; infinitely smooth by construction.
    Smooth { terms: Vec<(f64, PlateauBump)> },
    /// Arbitrary callable with a declared support and smoothness flag.
    Opaque { eval: OpaqueEval, smooth: bool },
}

impl std::fmt::Debug for FunctionKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FunctionKind::Simple { terms } => {
                f.debug_struct("Simple").field("terms", &terms.len()).finish()
            }
            FunctionKind::Smooth { terms } => {
                f.debug_struct("Smooth").field("terms", &terms.len()).finish()
            }
            FunctionKind::Opaque { smooth, .. } => {
                f.debug_struct("Opaque").field("smooth", smooth).finish()
            }
        }
    }
}

/// A function on the domain with bounded support.
#[derive(Debug, Clone)]
pub struct PiecewiseFunction {
    kind: FunctionKind,
    support: BoxSet,
}

impl PiecewiseFunction {
    /// Simple function `Σ value·χ_box` (boxes treated as closed for
    /// pointwise evaluation; overlaps add).
    pub fn simple(dim: usize, terms: Vec<(f64, Cuboid)>) -> Result<Self> {
        for (_, b) in &terms {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch(dim, b.dim()));
            }
        }
        let support = BoxSet::new(
            dim,
            true,
            terms
                .iter()
                .filter(|(v, _)| *v != 0.0)
                .map(|(_, b)| b.clone())
                .collect(),
        )?;
        Ok(PiecewiseFunction {
            kind: FunctionKind::Simple { terms },
            support,
        })
    }

    /// The zero function.
    pub fn zero(dim: usize) -> Self {
        PiecewiseFunction {
            kind: FunctionKind::Simple { terms: Vec::new() },
            support: BoxSet::empty(dim, true),
        }
    }

    /// Indicator of a box set.
    pub fn indicator(set: &BoxSet) -> Result<Self> {
        PiecewiseFunction::simple(
            set.dim(),
            set.boxes().iter().map(|b| (1.0, b.clone())).collect(),
        )
    }

    /// Smooth composite `Σ coeff·plateau`.
    pub fn smooth(dim: usize, terms: Vec<(f64, PlateauBump)>) -> Result<Self> {
        let mut boxes = Vec::new();
        for (c, p) in &terms {
            if *c != 0.0 {
                boxes.extend(p.support_boxes());
            }
        }
        for b in &boxes {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch(dim, b.dim()));
            }
        }
        let support = BoxSet::new(dim, true, boxes)?;
        Ok(PiecewiseFunction {
            kind: FunctionKind::Smooth { terms },
            support,
        })
    }

    /// Opaque callable with declared support.
    pub fn opaque(
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        support: BoxSet,
        smooth: bool,
    ) -> Self {
        PiecewiseFunction {
            kind: FunctionKind::Opaque {
                eval: Arc::new(eval),
                smooth,
            },
            support,
        }
    }

    pub fn kind(&self) -> &FunctionKind {
        &self.kind
    }

    pub fn support(&self) -> &BoxSet {
        &self.support
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            FunctionKind::Simple { terms } => terms.iter().all(|(v, _)| *v == 0.0),
            FunctionKind::Smooth { .. } => true,
            FunctionKind::Opaque { smooth, .. } => *smooth,
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match &self.kind {
            FunctionKind::Simple { terms } => terms.iter().all(|(v, _)| *v == 0.0),
            FunctionKind::Smooth { terms } => terms.iter().all(|(c, _)| *c == 0.0),
            FunctionKind::Opaque { .. } => false,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            FunctionKind::Simple { terms } => terms
                .iter()
                .filter(|(_, b)| b.contains_closed(x))
                .map(|(v, _)| v)
                .sum(),
            FunctionKind::Smooth { terms } => {
                terms.iter().map(|(c, p)| c * p.eval(x)).sum()
            }
            FunctionKind::Opaque { eval, .. } => eval(x),
        }
    }

    /// `c·f`.
    pub fn scaled(&self, c: f64) -> PiecewiseFunction {
        match &self.kind {
            FunctionKind::Simple { terms } => PiecewiseFunction {
                kind: FunctionKind::Simple {
                    terms: terms.iter().map(|(v, b)| (c * v, b.clone())).collect(),
                },
                support: self.support.clone(),
            },
            FunctionKind::Smooth { terms } => PiecewiseFunction {
                kind: FunctionKind::Smooth {
                    terms: terms.iter().map(|(v, p)| (c * v, p.clone())).collect(),
                },
                support: self.support.clone(),
            },
            FunctionKind::Opaque { eval, smooth } => {
                let inner = Arc::clone(eval);
                PiecewiseFunction {
                    kind: FunctionKind::Opaque {
                        eval: Arc::new(move |x: &[f64]| c * inner(x)),
                        smooth: *smooth,
                    },
                    support: self.support.clone(),
                }
            }
        }
    }

    /// `Σ c_i·f_i`. Stays simple (resp. smooth) when every term is; falls
    /// back to an opaque sum otherwise.
    pub fn linear_combination(parts: &[(f64, &PiecewiseFunction)]) -> Result<PiecewiseFunction> {
        let dim = parts
            .first()
            .map(|(_, f)| f.dim())
            .ok_or_else(|| Error::precondition("empty combination"))?;
        for (_, f) in parts {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch(dim, f.dim()));
            }
        }
        let mut support = BoxSet::empty(dim, true);
        for (c, f) in parts {
            if *c != 0.0 {
                support = support.union(&f.support)?;
            }
        }
        if parts
            .iter()
            .all(|(_, f)| matches!(f.kind, FunctionKind::Simple { .. }))
        {
            let mut terms = Vec::new();
            for (c, f) in parts {
                if let FunctionKind::Simple { terms: t } = &f.kind {
                    terms.extend(t.iter().map(|(v, b)| (c * v, b.clone())));
                }
            }
            return Ok(PiecewiseFunction {
                kind: FunctionKind::Simple { terms },
                support,
            });
        }
        if parts
            .iter()
            .all(|(_, f)| matches!(f.kind, FunctionKind::Smooth { .. }))
        {
            let mut terms = Vec::new();
            for (c, f) in parts {
                if let FunctionKind::Smooth { terms: t } = &f.kind {
                    terms.extend(t.iter().map(|(v, p)| (c * v, p.clone())));
                }
            }
            return Ok(PiecewiseFunction {
                kind: FunctionKind::Smooth { terms },
                support,
            });
        }
        let owned: Vec<(f64, PiecewiseFunction)> =
            parts.iter().map(|(c, f)| (*c, (*f).clone())).collect();
        let smooth = parts.iter().all(|(_, f)| f.is_smooth());
        Ok(PiecewiseFunction {
            kind: FunctionKind::Opaque {
                eval: Arc::new(move |x: &[f64]| {
                    owned.iter().map(|(c, f)| c * f.eval(x)).sum()
                }),
                smooth,
            },
            support,
        })
    }

    /// `a − b`.
    pub fn difference(a: &PiecewiseFunction, b: &PiecewiseFunction) -> Result<PiecewiseFunction> {
        PiecewiseFunction::linear_combination(&[(1.0, a), (-1.0, b)])
    }

    /// Disjoint constant cells of a simple function (clipped to `clip` when
    /// given), with summed values; zero-valued cells are dropped.
    pub fn simple_cells(&self, clip: Option<&BoxSet>) -> Result<Vec<(f64, Cuboid)>> {
        let FunctionKind::Simple { terms } = &self.kind else {
            return Err(Error::precondition("not a simple function"));
        };
        let dim = self.dim();
        let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dim];
        let clip_boxes = clip.map(|c| c.boxes()).unwrap_or(&[]);
        for b in terms.iter().map(|(_, b)| b).chain(clip_boxes.iter()) {
            for i in 0..dim {
                coords[i].push(b.lo()[i]);
                coords[i].push(b.hi()[i]);
            }
        }
        for axis in coords.iter_mut() {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        if coords.iter().any(|axis| axis.len() < 2) {
            return Ok(Vec::new());
        }
        let mut cells = Vec::new();
        let mut push_cell = |lo: Vec<f64>, hi: Vec<f64>| {
            let mid: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
            if let Some(c) = clip {
                if !c.boxes().iter().any(|b| b.contains_closed(&mid)) {
                    return;
                }
            }
            let v: f64 = terms
                .iter()
                .filter(|(_, b)| b.contains_closed(&mid))
                .map(|(v, _)| v)
                .sum();
            if v != 0.0 {
                if let Ok(cell) = Cuboid::new(lo, hi) {
                    cells.push((v, cell));
                }
            }
        };
        match dim {
            1 => {
                for w in coords[0].windows(2) {
                    push_cell(vec![w[0]], vec![w[1]]);
                }
            }
            2 => {
                let (xs, ys) = (coords[0].clone(), coords[1].clone());
                for wx in xs.windows(2) {
                    for wy in ys.windows(2) {
                        push_cell(vec![wx[0], wy[0]], vec![wx[1], wy[1]]);
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(cells)
    }
}

/// Serializable function descriptor (what the CLI loads).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionDescriptor {
    /// `Σ value·χ_box`.
    Simple { terms: Vec<(f64, Cuboid)> },
    /// A single smooth bump: `height` on `plateau`, supported in `support`.
    Bump {
        height: f64,
        plateau: Cuboid,
        support: Cuboid,
    },
    Zero { dim: usize },
}

impl FunctionDescriptor {
    pub fn build(&self) -> Result<PiecewiseFunction> {
        match self {
            FunctionDescriptor::Simple { terms } => {
                let dim = terms
                    .first()
                    .map(|(_, b)| b.dim())
                    .ok_or_else(|| Error::precondition("simple descriptor without terms"))?;
                PiecewiseFunction::simple(dim, terms.clone())
            }
            FunctionDescriptor::Bump {
                height,
                plateau,
                support,
            } => {
                let bump = BumpPrimitive::new(plateau.clone(), support.clone())?;
                PiecewiseFunction::smooth(plateau.dim(), vec![(*height, PlateauBump::new(vec![bump])?)])
            }
            FunctionDescriptor::Zero { dim } => Ok(PiecewiseFunction::zero(*dim)),
        }
    }
}

impl Serialize for Cuboid {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.dim() == 1 {
            [self.lo()[0], self.hi()[0]].serialize(serializer)
        } else {
            [
                [self.lo()[0], self.lo()[1]],
                [self.hi()[0], self.hi()[1]],
            ]
            .serialize(serializer)
        }
    }
}

impl<'de> Deserialize<'de> for Cuboid {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(deserializer)?;
        if let Ok(pair) = serde_json::from_value::<[f64; 2]>(v.clone()) {
            return Cuboid::interval(pair[0], pair[1]).map_err(D::Error::custom);
        }
        if let Ok(pts) = serde_json::from_value::<[[f64; 2]; 2]>(v) {
            return Cuboid::rect(pts[0], pts[1]).map_err(D::Error::custom);
        }
        Err(D::Error::custom(
            "expected [lo,hi] or [[lo0,lo1],[hi0,hi1]]",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(-0.5), 0.0);
        assert_eq!(smoothstep(0.0), 0.0);
        assert_eq!(smoothstep(1.0), 1.0);
        let mid = smoothstep(0.5);
        assert!((mid - 0.5).abs() < 1e-12, "symmetric at the midpoint");
        assert!(smoothstep(0.3) < smoothstep(0.7));
    }

    #[test]
    fn bump_plateau_and_support() {
        let bump = BumpPrimitive::new(
            Cuboid::interval(1.0, 2.0).unwrap(),
            Cuboid::interval(0.5, 2.5).unwrap(),
        )
        .unwrap();
        assert_eq!(bump.eval(&[1.5]), 1.0);
        assert_eq!(bump.eval(&[0.5]), 0.0);
        assert_eq!(bump.eval(&[2.5]), 0.0);
        let ramp = bump.eval(&[0.75]);
        assert!(ramp > 0.0 && ramp < 1.0);
    }

    #[test]
    fn plateau_product_of_touching_cells() {
        // Two inner cells sharing a face: the combination is still 1 on both
        // and on the shared face.
        let b1 = BumpPrimitive::new(
            Cuboid::interval(0.0, 1.0).unwrap(),
            Cuboid::interval(-0.5, 1.5).unwrap(),
        )
        .unwrap();
        let b2 = BumpPrimitive::new(
            Cuboid::interval(1.0, 2.0).unwrap(),
            Cuboid::interval(0.5, 2.5).unwrap(),
        )
        .unwrap();
        let p = PlateauBump::new(vec![b1, b2]).unwrap();
        assert_eq!(p.eval(&[0.5]), 1.0);
        assert_eq!(p.eval(&[1.0]), 1.0);
        assert_eq!(p.eval(&[1.9]), 1.0);
        assert!(p.eval(&[2.3]) < 1.0);
        assert_eq!(p.eval(&[3.0]), 0.0);
        assert!(p.eval(&[0.9]) <= 1.0);
    }

    #[test]
    fn simple_eval_and_cells() {
        let f = PiecewiseFunction::simple(
            1,
            vec![
                (2.0, Cuboid::interval(0.0, 2.0).unwrap()),
                (-1.0, Cuboid::interval(1.0, 3.0).unwrap()),
            ],
        )
        .unwrap();
        assert_eq!(f.eval(&[0.5]), 2.0);
        assert_eq!(f.eval(&[1.5]), 1.0);
        assert_eq!(f.eval(&[2.5]), -1.0);
        assert_eq!(f.eval(&[5.0]), 0.0);
        let cells = f.simple_cells(None).unwrap();
        assert_eq!(cells.len(), 3);
        let total: f64 = cells.iter().map(|(v, b)| v * b.volume()).sum();
        assert!((total - (2.0 * 1.0 + 1.0 * 1.0 - 1.0 * 1.0)).abs() < 1e-12);
    }

    #[test]
    fn linear_combination_stays_typed() {
        let a = PiecewiseFunction::simple(1, vec![(1.0, Cuboid::interval(0.0, 1.0).unwrap())])
            .unwrap();
        let b = PiecewiseFunction::simple(1, vec![(1.0, Cuboid::interval(2.0, 3.0).unwrap())])
            .unwrap();
        let c = PiecewiseFunction::linear_combination(&[(2.0, &a), (-1.0, &b)]).unwrap();
        assert!(matches!(c.kind(), FunctionKind::Simple { .. }));
        assert_eq!(c.eval(&[0.5]), 2.0);
        assert_eq!(c.eval(&[2.5]), -1.0);
    }

    #[test]
    fn difference_of_smooth_and_simple_is_opaque() {
        let bump = BumpPrimitive::new(
            Cuboid::interval(1.0, 2.0).unwrap(),
            Cuboid::interval(0.5, 2.5).unwrap(),
        )
        .unwrap();
        let f = PiecewiseFunction::smooth(1, vec![(1.0, PlateauBump::new(vec![bump]).unwrap())])
            .unwrap();
        let g = PiecewiseFunction::simple(1, vec![(1.0, Cuboid::interval(1.0, 2.0).unwrap())])
            .unwrap();
        let d = PiecewiseFunction::difference(&f, &g).unwrap();
        assert_eq!(d.eval(&[1.5]), 0.0);
        assert!(d.eval(&[0.75]) > 0.0);
    }

    #[test]
    fn descriptor_round_trip() {
        let d = FunctionDescriptor::Bump {
            height: 1.0,
            plateau: Cuboid::interval(0.45, 0.55).unwrap(),
            support: Cuboid::interval(0.4, 0.6).unwrap(),
        };
        let j = serde_json::to_string(&d).unwrap();
        let back: FunctionDescriptor = serde_json::from_str(&j).unwrap();
        let f = back.build().unwrap();
        assert_eq!(f.eval(&[0.5]), 1.0);
        assert_eq!(f.eval(&[0.39]), 0.0);
    }
}
