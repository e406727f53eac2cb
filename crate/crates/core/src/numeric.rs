//! Closed intervals, grids, certification margins and outward-rounded arithmetic.

use serde::{Deserialize, Serialize};

/// Relative margin used when certifying strict inequalities.
pub const REL_MARGIN: f64 = 1e-9;

/// Absolute slack for closed-interval membership tests.
pub const MEMBERSHIP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Interval {
    fn from(v: [f64; 2]) -> Self {
        Interval { lo: v[0], hi: v[1] }
    }
}

impl From<Interval> for [f64; 2] {
    fn from(i: Interval) -> Self {
        [i.lo, i.hi]
    }
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Membership with an absolute slack on both ends.
    pub fn contains_slack(&self, x: f64, slack: f64) -> bool {
        x >= self.lo - slack && x <= self.hi + slack
    }

    pub fn contains_interval(&self, other: &Interval, slack: f64) -> bool {
        other.lo >= self.lo - slack && other.hi <= self.hi + slack
    }

    pub fn interior_contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    /// Linear interpolation: `frac = 0` gives `lo`, `frac = 1` gives `hi`.
    pub fn at(&self, frac: f64) -> f64 {
        self.lo + frac * (self.hi - self.lo)
    }
}

/// `n + 1` evenly spaced points from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(1);
    (0..=n).map(move |i| {
        if i == n {
            b
        } else {
            a + (b - a) * (i as f64) / (n as f64)
        }
    })
}

/// Which arithmetic backs a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertMode {
    #[default]
    Fast,
    #[serde(alias = "directed-rounding")]
    Directed,
}

/// Interval enclosure with every operation rounded outward by one ulp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outward {
    pub lo: f64,
    pub hi: f64,
}

impl Outward {
    pub fn point(x: f64) -> Self {
        Outward { lo: x, hi: x }
    }

    pub fn new(lo: f64, hi: f64) -> Self {
        Outward { lo: lo.min(hi), hi: lo.max(hi) }
    }

    fn widen(lo: f64, hi: f64) -> Self {
        Outward { lo: lo.next_down(), hi: hi.next_up() }
    }

    pub fn add(self, o: Outward) -> Outward {
        Outward::widen(self.lo + o.lo, self.hi + o.hi)
    }

    pub fn sub(self, o: Outward) -> Outward {
        Outward::widen(self.lo - o.hi, self.hi - o.lo)
    }

    pub fn mul(self, o: Outward) -> Outward {
        let c = [self.lo * o.lo, self.lo * o.hi, self.hi * o.lo, self.hi * o.hi];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Outward::widen(lo, hi)
    }

    /// Division by an enclosure that excludes zero.
    pub fn div(self, o: Outward) -> Outward {
        assert!(o.lo > 0.0 || o.hi < 0.0, "divisor enclosure contains zero");
        let c = [self.lo / o.lo, self.lo / o.hi, self.hi / o.lo, self.hi / o.hi];
        let lo = c.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = c.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Outward::widen(lo, hi)
    }

    /// `exp` widened by two ulps on each side, covering the libm error bound.
    pub fn exp(self) -> Outward {
        Outward {
            lo: self.lo.exp().next_down().next_down(),
            hi: self.hi.exp().next_up().next_up(),
        }
    }

    pub fn ln(self) -> Outward {
        Outward {
            lo: self.lo.ln().next_down().next_down(),
            hi: self.hi.ln().next_up().next_up(),
        }
    }

    pub fn powi(self, n: u32) -> Outward {
        let mut acc = Outward::point(1.0);
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn max(self, o: Outward) -> Outward {
        Outward { lo: self.lo.max(o.lo), hi: self.hi.max(o.hi) }
    }

    pub fn min(self, o: Outward) -> Outward {
        Outward { lo: self.lo.min(o.lo), hi: self.hi.min(o.hi) }
    }

    /// True when every point of `self` is strictly below every point of `o`.
    pub fn certainly_lt(self, o: Outward) -> bool {
        self.hi < o.lo
    }
}
