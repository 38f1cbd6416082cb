//! Axis-aligned box-set algebra for dimensions 1 and 2.
//!
//! A [`BoxSet`] is a finite union of axis-aligned boxes, tracked as either an
//! open or a closed set. Open sets are kept *regular open* (equal to the
//! interior of their closure) and closed sets *regular closed* (the closure of
//! their interior), so degenerate slabs and pinched configurations never
//! survive normalization. All volumes are exact up to floating-point rounding
//! of the endpoint arithmetic.

use crate::error::{Error, Result};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Strict-inequality slack for volume comparisons (ties broken conservatively).
pub const VOLUME_SLACK: f64 = 1e-12;

/// A single axis-aligned box with nonempty interior: `lo[i] < hi[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cuboid {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Cuboid {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch(lo.len(), hi.len()));
        }
        if lo.is_empty() || lo.len() > 2 {
            return Err(Error::UnsupportedDimension(lo.len()));
        }
        if lo
            .iter()
            .zip(&hi)
            .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
        {
            return Err(Error::InvalidBox { lo, hi });
        }
        Ok(Cuboid { lo, hi })
    }

    /// 1-d interval constructor.
    pub fn interval(lo: f64, hi: f64) -> Result<Self> {
        Cuboid::new(vec![lo], vec![hi])
    }

    /// 2-d rectangle constructor.
    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Result<Self> {
        Cuboid::new(lo.to_vec(), hi.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    pub fn side_lengths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).collect()
    }

    pub fn contains_closed(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(xi, (a, b))| *a <= *xi && *xi <= *b)
    }

    pub fn contains_open(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(xi, (a, b))| *a < *xi && *xi < *b)
    }

    /// Grow the box by `margin` on every face. `margin` may be negative
    /// (shrink); returns an error if the result would be empty.
    pub fn inflate(&self, margin: f64) -> Result<Self> {
        Cuboid::new(
            self.lo.iter().map(|a| a - margin).collect(),
            self.hi.iter().map(|b| b + margin).collect(),
        )
    }

    /// Intersection with another box, `None` when the interiors are disjoint.
    pub fn intersect(&self, other: &Cuboid) -> Option<Cuboid> {
        if self.dim() != other.dim() {
            return None;
        }
        let lo: Vec<f64> = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(a, b)| a.max(*b))
            .collect();
        let hi: Vec<f64> = self
            .hi
            .iter()
            .zip(&other.hi)
            .map(|(a, b)| a.min(*b))
            .collect();
        if lo.iter().zip(&hi).all(|(a, b)| a < b) {
            Some(Cuboid { lo, hi })
        } else {
            None
        }
    }

    /// Squared Euclidean distance from `x` to the closed box.
    pub fn dist_sq(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(xi, (a, b))| {
                let d = if xi < a {
                    a - xi
                } else if xi > b {
                    xi - b
                } else {
                    0.0
                };
                d * d
            })
            .sum()
    }

    /// Euclidean distance between two closed boxes (0 when they touch).
    pub fn dist_to_box(&self, other: &Cuboid) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.dim() {
            let gap = (other.lo[i] - self.hi[i]).max(self.lo[i] - other.hi[i]).max(0.0);
            acc += gap * gap;
        }
        acc.sqrt()
    }
}

/// Which set operation [`set_ops`] performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SetOp {
    Union,
    Intersect,
    Difference,
}

/// A finite union of pairwise-disjoint axis-aligned boxes, all open or all
/// closed, in dimension 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    dim: usize,
    closed: bool,
    boxes: Vec<Cuboid>,
}

impl BoxSet {
    /// Build and normalize a box set from an arbitrary (possibly overlapping)
    /// list of boxes.
    pub fn new(dim: usize, closed: bool, boxes: Vec<Cuboid>) -> Result<Self> {
        if dim == 0 || dim > 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        for b in &boxes {
            if b.dim() != dim {
                return Err(Error::DimensionMismatch(dim, b.dim()));
            }
        }
        let mut s = BoxSet { dim, closed, boxes };
        s.normalize();
        Ok(s)
    }

    pub fn empty(dim: usize, closed: bool) -> Self {
        BoxSet {
            dim,
            closed,
            boxes: Vec::new(),
        }
    }

    /// Open or closed interval as a 1-d box set.
    pub fn interval(lo: f64, hi: f64, closed: bool) -> Result<Self> {
        BoxSet::new(1, closed, vec![Cuboid::interval(lo, hi)?])
    }

    /// Single rectangle as a 2-d box set.
    pub fn rect(lo: [f64; 2], hi: [f64; 2], closed: bool) -> Result<Self> {
        BoxSet::new(2, closed, vec![Cuboid::rect(lo, hi)?])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn boxes(&self) -> &[Cuboid] {
        &self.boxes
    }

    /// Lebesgue measure of the union.
    pub fn volume(&self) -> f64 {
        self.boxes.iter().map(Cuboid::volume).sum()
    }

    /// Same point set, closed flag.
    pub fn closure(&self) -> BoxSet {
        let mut s = BoxSet {
            dim: self.dim,
            closed: true,
            boxes: self.boxes.clone(),
        };
        s.normalize();
        s
    }

    /// Same cells, open flag (regular-open interior).
    pub fn interior(&self) -> BoxSet {
        let mut s = BoxSet {
            dim: self.dim,
            closed: false,
            boxes: self.boxes.clone(),
        };
        s.normalize();
        s
    }

    pub fn bounding_box(&self) -> Option<Cuboid> {
        if self.boxes.is_empty() {
            return None;
        }
        let mut lo = self.boxes[0].lo.clone();
        let mut hi = self.boxes[0].hi.clone();
        for b in &self.boxes[1..] {
            for i in 0..self.dim {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        Some(Cuboid { lo, hi })
    }

    /// Grow every box by `margin`; the result keeps this set's flag.
    pub fn inflate(&self, margin: f64) -> Result<BoxSet> {
        let boxes = self
            .boxes
            .iter()
            .map(|b| b.inflate(margin))
            .collect::<Result<Vec<_>>>()?;
        BoxSet::new(self.dim, self.closed, boxes)
    }

    /// Exact membership with open/closed endpoint semantics.
    ///
    /// Closed sets contain their boundary. Open sets are regular open: a point
    /// on a shared internal face of two cells is a member exactly when a small
    /// neighborhood of it is covered by the union.
    pub fn contains_point(&self, x: &[f64]) -> bool {
        if x.len() != self.dim {
            return false;
        }
        if self.closed {
            return self.boxes.iter().any(|b| b.contains_closed(x));
        }
        if self.boxes.iter().any(|b| b.contains_open(x)) {
            return true;
        }
        if !self.boxes.iter().any(|b| b.contains_closed(x)) {
            return false;
        }
        // x sits on a cell boundary; probe a small box around it.
        let eps = self.boundary_probe_radius(x);
        let probe = match Cuboid::new(
            x.iter().map(|v| v - eps).collect(),
            x.iter().map(|v| v + eps).collect(),
        ) {
            Ok(p) => p,
            Err(_) => return false,
        };
        uncovered_volume(&probe, &self.boxes) <= 0.0
    }

    fn boundary_probe_radius(&self, x: &[f64]) -> f64 {
        let mut eps: f64 = 1.0;
        for b in &self.boxes {
            for i in 0..self.dim {
                for c in [b.lo[i], b.hi[i]] {
                    let d = (c - x[i]).abs();
                    if d > 0.0 {
                        eps = eps.min(0.5 * d);
                    }
                }
            }
        }
        eps
    }

    /// Euclidean distance from `x` to the set; 0 iff `x` lies in the closure.
    pub fn dist_to_point(&self, x: &[f64]) -> f64 {
        self.boxes
            .iter()
            .map(|b| b.dist_sq(x))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    /// Set containment test honoring open/closed semantics.
    pub fn contains_set(&self, other: &BoxSet) -> bool {
        if other.is_empty() {
            return true;
        }
        if self.dim != other.dim {
            return false;
        }
        match (other.closed, self.closed) {
            // closed ⊆ open needs every cell strictly inside.
            (true, false) => other
                .boxes
                .iter()
                .all(|c| closed_box_inside_open_set(c, self)),
            // all other combinations reduce to measure containment for
            // regular sets.
            _ => other
                .boxes
                .iter()
                .all(|c| uncovered_volume(c, &self.boxes) <= 0.0),
        }
    }

    fn normalize(&mut self) {
        if self.boxes.is_empty() {
            return;
        }
        let grid = CoordGrid::from_boxes(self.dim, self.boxes.iter());
        let cells = grid.covered_cells(|mid| self.boxes.iter().any(|b| b.contains_closed(mid)));
        self.boxes = merge_cells(self.dim, cells);
    }
}

/// Union, intersection or difference of two box sets.
///
/// Unions require equal open/closed flags. For mixed-flag intersections and
/// differences the result flag follows the rules: `closed ∖ open` is closed,
/// `open ∖ closed` is open, and an intersection is closed exactly when the
/// closure of the resulting cells lies inside the open operand; half-open
/// truths are rounded to the nearest representable flag (measure is always
/// exact).
pub fn set_ops(a: &BoxSet, b: &BoxSet, op: SetOp) -> Result<BoxSet> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch(a.dim, b.dim));
    }
    let closed = match op {
        SetOp::Union => {
            if a.closed != b.closed {
                return Err(Error::MixedClosedness("union"));
            }
            a.closed
        }
        SetOp::Difference => a.closed,
        SetOp::Intersect => a.closed && b.closed, // may be upgraded below
    };
    let grid = CoordGrid::from_boxes(a.dim, a.boxes.iter().chain(b.boxes.iter()));
    let cells = grid.covered_cells(|mid| {
        let in_a = a.boxes.iter().any(|x| x.contains_closed(mid));
        let in_b = b.boxes.iter().any(|x| x.contains_closed(mid));
        match op {
            SetOp::Union => in_a || in_b,
            SetOp::Intersect => in_a && in_b,
            SetOp::Difference => in_a && !in_b,
        }
    });
    let mut out = BoxSet {
        dim: a.dim,
        closed,
        boxes: merge_cells(a.dim, cells),
    };
    if op == SetOp::Intersect && a.closed != b.closed && !out.boxes.is_empty() {
        let open_side = if a.closed { b } else { a };
        let all_inside = out
            .boxes
            .iter()
            .all(|c| closed_box_inside_open_set(c, open_side));
        out.closed = all_inside;
        if !all_inside {
            out.normalize();
        }
    }
    Ok(out)
}

impl BoxSet {
    pub fn union(&self, other: &BoxSet) -> Result<BoxSet> {
        set_ops(self, other, SetOp::Union)
    }

    pub fn intersect(&self, other: &BoxSet) -> Result<BoxSet> {
        set_ops(self, other, SetOp::Intersect)
    }

    pub fn difference(&self, other: &BoxSet) -> Result<BoxSet> {
        set_ops(self, other, SetOp::Difference)
    }
}

/// Volume of `probe ∖ cells`, ignoring open/closed flags.
fn uncovered_volume(probe: &Cuboid, cells: &[Cuboid]) -> f64 {
    let grid = CoordGrid::from_boxes(probe.dim(), std::iter::once(probe).chain(cells.iter()));
    let mut vol = 0.0;
    grid.for_each_cell(|lo, hi, mid| {
        if probe.contains_closed(mid) && !cells.iter().any(|c| c.contains_closed(mid)) {
            vol += lo.iter().zip(hi).map(|(a, b)| b - a).product::<f64>();
        }
    });
    vol
}

/// Is the closed box `c` strictly inside the regular-open set `u`?
///
/// Exact test on the joint coordinate grid: the box must be measure-covered,
/// and so must one grid slab beyond every face and every outward corner
/// wedge, which together certify that the closed box avoids the outer
/// boundary of `u`.
pub fn closed_box_inside_open_set(c: &Cuboid, u: &BoxSet) -> bool {
    if u.is_empty() || c.dim() != u.dim() {
        return false;
    }
    if uncovered_volume(c, &u.boxes) > 0.0 {
        return false;
    }
    let dim = c.dim();
    // Per-axis sorted coordinates of u (plus c's own), used to pick the width
    // of the probe slabs just outside each face.
    let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dim];
    for b in u.boxes.iter().chain(std::iter::once(c)) {
        for i in 0..dim {
            coords[i].push(b.lo[i]);
            coords[i].push(b.hi[i]);
        }
    }
    for axis in coords.iter_mut() {
        axis.sort_by(f64::total_cmp);
        axis.dedup();
    }
    let next_above = |axis: usize, v: f64| -> Option<f64> {
        coords[axis].iter().copied().find(|&c| c > v)
    };
    let next_below = |axis: usize, v: f64| -> Option<f64> {
        coords[axis].iter().rev().copied().find(|&c| c < v)
    };
    // Outward probe ranges per axis/direction: None means no grid coordinate
    // beyond the face, i.e. the face touches the outer boundary.
    let mut probes: Vec<[(f64, f64); 2]> = Vec::with_capacity(dim);
    for i in 0..dim {
        let below = match next_below(i, c.lo[i]) {
            Some(v) => (v, c.lo[i]),
            None => return false,
        };
        let above = match next_above(i, c.hi[i]) {
            Some(v) => (c.hi[i], v),
            None => return false,
        };
        probes.push([below, above]);
    }
    let covered = |b: &Cuboid| uncovered_volume(b, &u.boxes) <= 0.0;
    // Face slabs.
    for i in 0..dim {
        for dir in 0..2 {
            let (lo_i, hi_i) = probes[i][dir];
            let mut lo = c.lo.clone();
            let mut hi = c.hi.clone();
            lo[i] = lo_i;
            hi[i] = hi_i;
            match Cuboid::new(lo, hi) {
                Ok(slab) => {
                    if !covered(&slab) {
                        return false;
                    }
                }
                Err(_) => return false,
            }
        }
    }
    // Corner wedges (d = 2 only; in d = 1 the faces are the corners).
    if dim == 2 {
        for d0 in 0..2 {
            for d1 in 0..2 {
                let (lo0, hi0) = probes[0][d0];
                let (lo1, hi1) = probes[1][d1];
                match Cuboid::new(vec![lo0, lo1], vec![hi0, hi1]) {
                    Ok(wedge) => {
                        if !covered(&wedge) {
                            return false;
                        }
                    }
                    Err(_) => return false,
                }
            }
        }
    }
    true
}

/// Nested open covers of a compact box set: `U_1 ⊃ closure(U_2) ⊃ U_2 ⊃ …`
/// with `K ⊂ U_n` and `volume(U_n) < volume(K) + 1/n`.
///
/// Construction by margin inflation with strictly decreasing margins, so the
/// three clauses hold without any search loop.
pub fn nested_open_covers(k: &BoxSet, n_max: usize) -> Result<Vec<BoxSet>> {
    if k.is_empty() {
        return Err(Error::EmptySet);
    }
    if !k.is_closed() {
        return Err(Error::precondition("nested covers require a closed set"));
    }
    if n_max == 0 {
        return Err(Error::precondition("n_max must be at least 1"));
    }
    let b_count = k.boxes.len() as f64;
    // Per-box surface constant: inflation by margin m ≤ 1 adds at most c_b·m
    // of volume per box.
    let c_max = k
        .boxes
        .iter()
        .map(|b| match b.dim() {
            1 => 2.0,
            _ => 2.0 * b.side_lengths().iter().sum::<f64>() + 4.0,
        })
        .fold(2.0_f64, f64::max);
    // Half the minimal positive gap between boxes keeps inflated components
    // from gluing together.
    let mut gamma = f64::INFINITY;
    for (i, a) in k.boxes.iter().enumerate() {
        for b in &k.boxes[i + 1..] {
            let d = a.dist_to_box(b);
            if d > 0.0 {
                gamma = gamma.min(0.5 * d);
            }
        }
    }
    let mut covers = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let nf = n as f64;
        let margin = (1.0 / (4.0 * nf * c_max * b_count)).min(gamma / 2f64.powi(n as i32));
        let inflated = k
            .boxes
            .iter()
            .map(|b| b.inflate(margin))
            .collect::<Result<Vec<_>>>()?;
        covers.push(BoxSet::new(k.dim, false, inflated)?);
    }
    Ok(covers)
}

/// Split a box into lattice cells of side at most `res`.
pub fn lattice_cells(b: &Cuboid, res: f64) -> Vec<Cuboid> {
    let mut cells = Vec::new();
    match b.dim() {
        1 => {
            let (a, z) = (b.lo()[0], b.hi()[0]);
            let n = ((z - a) / res).ceil().max(1.0) as usize;
            for i in 0..n {
                let lo = a + (z - a) * i as f64 / n as f64;
                let hi = a + (z - a) * (i + 1) as f64 / n as f64;
                if let Ok(c) = Cuboid::interval(lo, hi) {
                    cells.push(c);
                }
            }
        }
        2 => {
            let (ax, zx) = (b.lo()[0], b.hi()[0]);
            let (ay, zy) = (b.lo()[1], b.hi()[1]);
            let nx = ((zx - ax) / res).ceil().max(1.0) as usize;
            let ny = ((zy - ay) / res).ceil().max(1.0) as usize;
            for i in 0..nx {
                for j in 0..ny {
                    let lo = [
                        ax + (zx - ax) * i as f64 / nx as f64,
                        ay + (zy - ay) * j as f64 / ny as f64,
                    ];
                    let hi = [
                        ax + (zx - ax) * (i + 1) as f64 / nx as f64,
                        ay + (zy - ay) * (j + 1) as f64 / ny as f64,
                    ];
                    if let Ok(c) = Cuboid::rect(lo, hi) {
                        cells.push(c);
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    cells
}

/// Coordinate grid induced by a family of boxes; cells are the elementary
/// products of consecutive coordinates.
struct CoordGrid {
    dim: usize,
    coords: Vec<Vec<f64>>,
}

impl CoordGrid {
    fn from_boxes<'a>(dim: usize, boxes: impl Iterator<Item = &'a Cuboid>) -> Self {
        let mut coords: Vec<Vec<f64>> = vec![Vec::new(); dim];
        for b in boxes {
            for i in 0..dim {
                coords[i].push(b.lo[i]);
                coords[i].push(b.hi[i]);
            }
        }
        for axis in coords.iter_mut() {
            axis.sort_by(f64::total_cmp);
            axis.dedup();
        }
        CoordGrid { dim, coords }
    }

    fn for_each_cell(&self, mut f: impl FnMut(&[f64], &[f64], &[f64])) {
        match self.dim {
            1 => {
                for w in self.coords[0].windows(2) {
                    let (a, b) = (w[0], w[1]);
                    f(&[a], &[b], &[0.5 * (a + b)]);
                }
            }
            2 => {
                let xs = &self.coords[0];
                let ys = &self.coords[1];
                for wx in xs.windows(2) {
                    for wy in ys.windows(2) {
                        let lo = [wx[0], wy[0]];
                        let hi = [wx[1], wy[1]];
                        let mid = [0.5 * (wx[0] + wx[1]), 0.5 * (wy[0] + wy[1])];
                        f(&lo, &hi, &mid);
                    }
                }
            }
            _ => unreachable!("dimension checked at construction"),
        }
    }

    fn covered_cells(&self, pred: impl Fn(&[f64]) -> bool) -> Vec<Cuboid> {
        let mut out = Vec::new();
        self.for_each_cell(|lo, hi, mid| {
            if pred(mid) {
                out.push(Cuboid {
                    lo: lo.to_vec(),
                    hi: hi.to_vec(),
                });
            }
        });
        out
    }
}

/// Greedy merge of grid cells into fewer boxes: coalesce along axis 0, then
/// along axis 1 for equal cross-sections.
fn merge_cells(dim: usize, mut cells: Vec<Cuboid>) -> Vec<Cuboid> {
    if cells.len() <= 1 {
        return cells;
    }
    let merge_along = |cells: &mut Vec<Cuboid>, axis: usize| {
        cells.sort_by(|a, b| {
            let other = 1 - axis.min(1);
            if dim == 2 {
                a.lo[other]
                    .total_cmp(&b.lo[other])
                    .then(a.hi[other].total_cmp(&b.hi[other]))
                    .then(a.lo[axis].total_cmp(&b.lo[axis]))
            } else {
                a.lo[axis].total_cmp(&b.lo[axis])
            }
        });
        let mut merged: Vec<Cuboid> = Vec::with_capacity(cells.len());
        for cell in cells.drain(..) {
            if let Some(last) = merged.last_mut() {
                let same_cross = if dim == 2 {
                    let other = 1 - axis;
                    last.lo[other] == cell.lo[other] && last.hi[other] == cell.hi[other]
                } else {
                    true
                };
                if same_cross && last.hi[axis] == cell.lo[axis] {
                    last.hi[axis] = cell.hi[axis];
                    continue;
                }
            }
            merged.push(cell);
        }
        *cells = merged;
    };
    merge_along(&mut cells, 0);
    if dim == 2 {
        merge_along(&mut cells, 1);
    }
    cells
}

impl Serialize for BoxSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("BoxSet", 3)?;
        st.serialize_field("dim", &self.dim)?;
        st.serialize_field("closed", &self.closed)?;
        if self.dim == 1 {
            let boxes: Vec<[f64; 2]> = self
                .boxes
                .iter()
                .map(|b| [b.lo[0], b.hi[0]])
                .collect();
            st.serialize_field("boxes", &boxes)?;
        } else {
            let boxes: Vec<[[f64; 2]; 2]> = self
                .boxes
                .iter()
                .map(|b| [[b.lo[0], b.lo[1]], [b.hi[0], b.hi[1]]])
                .collect();
            st.serialize_field("boxes", &boxes)?;
        }
        st.end()
    }
}

#[derive(Deserialize)]
struct BoxSetRepr {
    dim: usize,
    closed: bool,
    boxes: serde_json::Value,
}

impl<'de> Deserialize<'de> for BoxSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = BoxSetRepr::deserialize(deserializer)?;
        let mut boxes = Vec::new();
        let arr = repr
            .boxes
            .as_array()
            .ok_or_else(|| D::Error::custom("field `boxes` must be an array"))?;
        for item in arr {
            let b = match repr.dim {
                1 => {
                    let pair: [f64; 2] = serde_json::from_value(item.clone())
                        .map_err(|e| D::Error::custom(format!("field `boxes`: {e}")))?;
                    Cuboid::interval(pair[0], pair[1])
                }
                2 => {
                    let pts: [[f64; 2]; 2] = serde_json::from_value(item.clone())
                        .map_err(|e| D::Error::custom(format!("field `boxes`: {e}")))?;
                    Cuboid::rect(pts[0], pts[1])
                }
                d => return Err(D::Error::custom(format!("field `dim`: unsupported {d}"))),
            }
            .map_err(|e| D::Error::custom(format!("field `boxes`: {e}")))?;
            boxes.push(b);
        }
        BoxSet::new(repr.dim, repr.closed, boxes)
            .map_err(|e| D::Error::custom(format!("field `boxes`: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn iv(lo: f64, hi: f64, closed: bool) -> BoxSet {
        BoxSet::interval(lo, hi, closed).unwrap()
    }

    #[test]
    fn unit_interval_volume() {
        assert_eq!(iv(0.0, 1.0, false).volume(), 1.0);
    }

    #[test]
    fn overlap_resolved_by_normalization() {
        let s = BoxSet::new(
            1,
            false,
            vec![
                Cuboid::interval(0.0, 1.0).unwrap(),
                Cuboid::interval(0.5, 2.0).unwrap(),
            ],
        )
        .unwrap();
        assert!((s.volume() - 2.0).abs() < 1e-15);
        assert_eq!(s.boxes().len(), 1);
    }

    #[test]
    fn unit_square_volume() {
        let s = BoxSet::rect([0.0, 0.0], [1.0, 1.0], false).unwrap();
        assert_eq!(s.volume(), 1.0);
    }

    #[test]
    fn difference_closed_minus_open() {
        let a = iv(0.0, 3.0, true);
        let b = iv(1.0, 2.0, false);
        let d = a.difference(&b).unwrap();
        assert!(d.is_closed());
        assert_eq!(d.boxes().len(), 2);
        assert!((d.volume() - 2.0).abs() < 1e-15);
        assert!(d.contains_point(&[1.0]));
        assert!(d.contains_point(&[2.0]));
        assert!(!d.contains_point(&[1.5]));
    }

    #[test]
    fn intersect_closed_with_open_containment() {
        let a = iv(1.0, 2.0, true);
        let b = iv(0.0, 10.0, false);
        let r = a.intersect(&b).unwrap();
        assert!(r.is_closed());
        assert!((r.volume() - 1.0).abs() < 1e-15);
        assert!(r.contains_point(&[1.0]) && r.contains_point(&[2.0]));
    }

    #[test]
    fn union_then_difference_example() {
        let a = BoxSet::new(
            1,
            true,
            vec![
                Cuboid::interval(0.0, 1.0).unwrap(),
                Cuboid::interval(2.0, 3.0).unwrap(),
            ],
        )
        .unwrap();
        let b = iv(0.5, 2.5, false);
        let d = a.difference(&b).unwrap();
        assert_eq!(d.boxes().len(), 2);
        assert!((d.volume() - 1.0).abs() < 1e-15);
        assert!(d.contains_point(&[0.5]));
        assert!(d.contains_point(&[2.5]));
        assert!(!d.contains_point(&[1.0]));
    }

    #[test]
    fn membership_endpoint_semantics() {
        assert!(iv(0.0, 1.0, false).contains_point(&[0.5]));
        assert!(!iv(0.0, 1.0, false).contains_point(&[1.0]));
        assert!(iv(0.0, 1.0, true).contains_point(&[1.0]));
    }

    #[test]
    fn regular_open_membership_on_internal_face() {
        // L-shaped open region: the internal face is a member.
        let u = BoxSet::new(
            2,
            false,
            vec![
                Cuboid::rect([0.0, 0.0], [2.0, 1.0]).unwrap(),
                Cuboid::rect([0.0, 1.0], [1.0, 2.0]).unwrap(),
            ],
        )
        .unwrap();
        assert!(u.contains_point(&[0.5, 1.0]));
        assert!(!u.contains_point(&[1.5, 1.0]));
        assert!(!u.contains_point(&[0.0, 0.5]));
    }

    #[test]
    fn dist_to_union() {
        let s = BoxSet::new(
            1,
            true,
            vec![
                Cuboid::interval(0.0, 1.0).unwrap(),
                Cuboid::interval(2.0, 2.5).unwrap(),
            ],
        )
        .unwrap();
        assert!((s.dist_to_point(&[3.0]) - 0.5).abs() < 1e-15);
        assert_eq!(s.dist_to_point(&[2.2]), 0.0);
    }

    #[test]
    fn nested_covers_clauses() {
        let k = iv(1.0, 2.0, true);
        let covers = nested_open_covers(&k, 3).unwrap();
        assert_eq!(covers.len(), 3);
        for (i, u) in covers.iter().enumerate() {
            let n = (i + 1) as f64;
            assert!(u.contains_set(&k), "K ⊂ U_{}", i + 1);
            assert!(
                u.volume() < k.volume() + 1.0 / n - VOLUME_SLACK,
                "volume clause at n={}",
                i + 1
            );
        }
        for w in covers.windows(2) {
            assert!(w[0].contains_set(&w[1].closure()));
            assert!(w[1].volume() < w[0].volume() - VOLUME_SLACK);
        }
    }

    #[test]
    fn nested_covers_two_components() {
        let k = BoxSet::new(
            1,
            true,
            vec![
                Cuboid::interval(0.0, 1.0).unwrap(),
                Cuboid::interval(2.0, 3.0).unwrap(),
            ],
        )
        .unwrap();
        let covers = nested_open_covers(&k, 1).unwrap();
        assert_eq!(covers[0].boxes().len(), 2);
        assert!(covers[0].volume() < 2.0 + 1.0);
        assert!(covers[0].contains_set(&k));
    }

    #[test]
    fn nested_covers_empty_input_rejected() {
        let k = BoxSet::empty(1, true);
        assert!(nested_open_covers(&k, 3).is_err());
    }

    #[test]
    fn closed_box_inside_open_set_edge_cases() {
        let u = iv(0.0, 3.0, false);
        assert!(closed_box_inside_open_set(
            &Cuboid::interval(1.0, 2.0).unwrap(),
            &u
        ));
        // Touching the outer boundary fails.
        assert!(!closed_box_inside_open_set(
            &Cuboid::interval(0.0, 2.0).unwrap(),
            &u
        ));
        // Corner wedge check in 2d: plus-shaped set does not contain the
        // closed center square once it touches the inner corners.
        let plus = BoxSet::new(
            2,
            false,
            vec![
                Cuboid::rect([1.0, 0.0], [2.0, 3.0]).unwrap(),
                Cuboid::rect([0.0, 1.0], [3.0, 2.0]).unwrap(),
            ],
        )
        .unwrap();
        assert!(!closed_box_inside_open_set(
            &Cuboid::rect([1.0, 1.0], [2.0, 2.0]).unwrap(),
            &plus
        ));
        assert!(closed_box_inside_open_set(
            &Cuboid::rect([1.2, 1.2], [1.8, 1.8]).unwrap(),
            &plus
        ));
    }

    #[test]
    fn serde_round_trip_1d() {
        let s = BoxSet::new(
            1,
            true,
            vec![
                Cuboid::interval(0.0, 1.0).unwrap(),
                Cuboid::interval(2.0, 3.0).unwrap(),
            ],
        )
        .unwrap();
        let j = serde_json::to_string(&s).unwrap();
        let back: BoxSet = serde_json::from_str(&j).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn serde_round_trip_2d() {
        let s = BoxSet::rect([0.0, 1.0], [2.0, 3.0], false).unwrap();
        let j = serde_json::to_string(&s).unwrap();
        assert!(j.contains("[[0.0,1.0],[2.0,3.0]]"));
        let back: BoxSet = serde_json::from_str(&j).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn mixed_union_rejected() {
        let a = iv(0.0, 1.0, true);
        let b = iv(2.0, 3.0, false);
        assert!(a.union(&b).is_err());
    }
}
