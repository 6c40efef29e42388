use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An interval of the extended real line with open/closed endpoint flags.
///
/// Infinite endpoints are always open. A closed interval may be degenerate
/// (`[x, x]`), which is how isolated points of a region are represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateInterval {
    left: f64,
    right: f64,
    left_closed: bool,
    right_closed: bool,
}

impl StateInterval {
    pub fn new(left: f64, right: f64, left_closed: bool, right_closed: bool) -> Result<Self> {
        if left.is_nan() || right.is_nan() {
            return Err(Error::BadParams("NaN interval endpoint".into()));
        }
        if left.is_infinite() && left_closed || right.is_infinite() && right_closed {
            return Err(Error::BadParams("infinite endpoint cannot be closed".into()));
        }
        let degenerate_ok = left == right && left_closed && right_closed;
        if !(left < right || degenerate_ok) {
            return Err(Error::BadParams(format!("empty interval ({left}, {right})")));
        }
        Ok(Self { left, right, left_closed, right_closed })
    }

    pub fn open(left: f64, right: f64) -> Result<Self> {
        Self::new(left, right, false, false)
    }

    pub fn closed(left: f64, right: f64) -> Result<Self> {
        Self::new(left, right, true, true)
    }

    pub fn point(x: f64) -> Result<Self> {
        Self::new(x, x, true, true)
    }

    pub fn real_line() -> Self {
        Self { left: f64::NEG_INFINITY, right: f64::INFINITY, left_closed: false, right_closed: false }
    }

    /// `[x, +inf)` or `(x, +inf)`.
    pub fn right_ray(x: f64, closed: bool) -> Result<Self> {
        Self::new(x, f64::INFINITY, closed, false)
    }

    /// `(-inf, x]` or `(-inf, x)`.
    pub fn left_ray(x: f64, closed: bool) -> Result<Self> {
        Self::new(f64::NEG_INFINITY, x, false, closed)
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn left_closed(&self) -> bool {
        self.left_closed
    }

    pub fn right_closed(&self) -> bool {
        self.right_closed
    }

    pub fn is_degenerate(&self) -> bool {
        self.left == self.right
    }

    pub fn length(&self) -> f64 {
        self.right - self.left
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.left_closed { x >= self.left } else { x > self.left };
        let below = if self.right_closed { x <= self.right } else { x < self.right };
        above && below
    }

    /// Strictly inside, ignoring the endpoint flags.
    pub fn contains_interior(&self, x: f64) -> bool {
        x > self.left && x < self.right
    }

    /// Same endpoints with both flags open.
    pub fn interior(&self) -> Result<Self> {
        Self::open(self.left, self.right)
    }

    pub fn intersects(&self, other: &Self) -> bool {
        if self.right < other.left || other.right < self.left {
            return false;
        }
        if self.right == other.left {
            return self.right_closed && other.left_closed;
        }
        if other.right == self.left {
            return other.right_closed && self.left_closed;
        }
        true
    }

    pub fn contains_interval(&self, other: &Self) -> bool {
        let left_ok = self.left < other.left
            || self.left == other.left && (self.left_closed || !other.left_closed);
        let right_ok = self.right > other.right
            || self.right == other.right && (self.right_closed || !other.right_closed);
        left_ok && right_ok
    }

    /// Clip `x` into the closure of the interval.
    pub fn clamp(&self, x: f64) -> f64 {
        x.max(self.left).min(self.right)
    }
}

impl std::fmt::Display for StateInterval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let lb = if self.left_closed { '[' } else { '(' };
        let rb = if self.right_closed { ']' } else { ')' };
        write!(f, "{lb}{}, {}{rb}", self.left, self.right)
    }
}

/// Finite, ordered union of pairwise disjoint intervals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionSet {
    intervals: Vec<StateInterval>,
}

impl RegionSet {
    pub fn empty() -> Self {
        Self { intervals: Vec::new() }
    }

    pub fn single(interval: StateInterval) -> Self {
        Self { intervals: vec![interval] }
    }

    /// Sorts by left endpoint and rejects overlapping members.
    pub fn new(mut intervals: Vec<StateInterval>) -> Result<Self> {
        intervals.sort_by(|a, b| a.left.total_cmp(&b.left).then(b.left_closed.cmp(&a.left_closed)));
        for w in intervals.windows(2) {
            if w[0].intersects(&w[1]) {
                return Err(Error::BadParams(format!("overlapping intervals {} and {}", w[0], w[1])));
            }
        }
        Ok(Self { intervals })
    }

    pub fn intervals(&self) -> &[StateInterval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, x: f64) -> bool {
        self.intervals.iter().any(|i| i.contains(x))
    }

    /// Finite endpoints of all members, ascending and deduplicated.
    pub fn boundary_points(&self) -> Vec<f64> {
        let mut pts: Vec<f64> = self
            .intervals
            .iter()
            .flat_map(|i| [i.left, i.right])
            .filter(|x| x.is_finite())
            .collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Complement relative to `ambient`; every member must lie inside `ambient`.
    pub fn complement(&self, ambient: &StateInterval) -> Result<Self> {
        let mut out = Vec::new();
        let mut cur = ambient.left;
        let mut cur_closed = ambient.left_closed;
        for iv in &self.intervals {
            if !ambient.contains_interval(iv) {
                return Err(Error::BadParams(format!("{iv} is not inside {ambient}")));
            }
            let gap_right_closed = !iv.left_closed;
            if cur < iv.left || (cur == iv.left && cur_closed && gap_right_closed) {
                out.push(StateInterval::new(cur, iv.left, cur_closed, gap_right_closed)?);
            }
            cur = iv.right;
            cur_closed = !iv.right_closed;
        }
        if cur < ambient.right || (cur == ambient.right && cur_closed && ambient.right_closed) {
            out.push(StateInterval::new(cur, ambient.right, cur_closed, ambient.right_closed)?);
        }
        Self::new(out)
    }
}

impl std::fmt::Display for RegionSet {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.intervals.is_empty() {
            return write!(f, "{{}}");
        }
        let parts: Vec<String> = self.intervals.iter().map(|i| i.to_string()).collect();
        write!(f, "{}", parts.join(" U "))
    }
}
