//! Deterministic enumeration of the rationals in (0,1).
//!
//! The order is the Calkin-Wilf sequence (breadth-first over the Calkin-Wilf
//! tree) restricted to values strictly between 0 and 1. Restriction keeps the
//! order: the n-th element here is the n-th (0,1)-value of the full sequence.

/// A positive rational in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: u64,
    pub den: u64,
}

impl Rational {
    pub fn value(&self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

/// Iterator over the full Calkin-Wilf sequence 1, 1/2, 2, 1/3, 3/2, ...
struct CalkinWilf {
    num: u64,
    den: u64,
}

impl Iterator for CalkinWilf {
    type Item = Rational;

    fn next(&mut self) -> Option<Rational> {
        let out = Rational {
            num: self.num,
            den: self.den,
        };
        // next = 1 / (2*floor(q) + 1 - q), kept in integers.
        let floor = self.num / self.den;
        let new_den = self.den * (2 * floor + 1) - self.num;
        self.num = self.den;
        self.den = new_den;
        Some(out)
    }
}

/// Iterator over the rationals of (0,1) in enumeration order, yielding
/// `(index, rational)` with 1-based indices.
pub fn unit_rationals() -> impl Iterator<Item = (u64, Rational)> {
    CalkinWilf { num: 1, den: 1 }
        .filter(|r| r.num < r.den)
        .enumerate()
        .map(|(i, r)| (i as u64 + 1, r))
}

/// First `n` rationals of (0,1) in enumeration order.
pub fn first_unit_rationals(n: usize) -> Vec<Rational> {
    unit_rationals().take(n).map(|(_, r)| r).collect()
}

/// The element of the enumeration with the least index whose value lies in
/// the open interval `(lo, hi) ⊆ (0, 1)`, together with that index.
///
/// The index is returned as `f64`: it is exact below 2^53 and a slight
/// overestimate beyond (rounded up so that `4^{-index}` never overstates the
/// coefficient it models). Returns `None` for empty or out-of-range
/// intervals, or when the Stern-Brocot walk exceeds its step cap.
pub fn least_index_in_interval(lo: f64, hi: f64) -> Option<(f64, Rational)> {
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
        return None;
    }
    // Fast path: scan the enumeration directly. The scanned prefix is the
    // exact order, so the first hit has the least index.
    const BRUTE_CAP: u64 = 1 << 16;
    for (n, r) in unit_rationals().take(BRUTE_CAP as usize) {
        let v = r.value();
        if lo < v && v < hi {
            return Some((n as f64, r));
        }
    }
    // Fallback: the minimal-depth tree node inside the interval (unique, and
    // of least index among all members) via the Stern-Brocot walk.
    let r = simplest_in_interval(lo, hi, 100_000)?;
    // Global breadth-first index from the root path; (0,1)-restricted index
    // is exactly half of it (left/right children alternate below/above 1).
    let mut k: f64 = 1.0;
    for bit in cw_path(r.num, r.den) {
        k = 2.0 * k + if bit { 1.0 } else { 0.0 };
        if !k.is_finite() {
            return None;
        }
    }
    let index = (k / 2.0) * (1.0 + 1e-12);
    Some((index, r))
}

/// Stern-Brocot search for the minimal-depth rational inside `(lo, hi)`.
fn simplest_in_interval(lo: f64, hi: f64, max_steps: usize) -> Option<Rational> {
    let (mut ln, mut ld) = (0u64, 1u64); // lower bound 0/1
    let (mut hn, mut hd) = (1u64, 1u64); // upper bound 1/1
    for _ in 0..max_steps {
        let mn = ln.checked_add(hn)?;
        let md = ld.checked_add(hd)?;
        let v = mn as f64 / md as f64;
        if v <= lo {
            ln = mn;
            ld = md;
        } else if v >= hi {
            hn = mn;
            hd = md;
        } else {
            return Some(Rational { num: mn, den: md });
        }
    }
    None
}

/// Root-to-node path of `p/q` in the Calkin-Wilf tree
/// (false = left child `a/(a+b)`, true = right child `(a+b)/b`).
fn cw_path(mut p: u64, mut q: u64) -> Vec<bool> {
    let mut rev = Vec::new();
    while p != q {
        if p < q {
            rev.push(false);
            q -= p;
        } else {
            rev.push(true);
            p -= q;
        }
    }
    rev.reverse();
    rev
}
