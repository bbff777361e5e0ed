//! Piecewise-constant functions on the real line.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `values[i]` holds on `(breaks[i-1], breaks[i])`, with `breaks[-1] = -∞`
/// and `breaks[n] = +∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pwc {
    pub breaks: Vec<f64>,
    pub values: Vec<f64>,
}

impl Pwc {
    pub fn new(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::InvalidInput(format!(
                "{} breakpoints need {} values, got {}",
                breaks.len(),
                breaks.len() + 1,
                values.len()
            )));
        }
        if breaks.iter().chain(values.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite entry in piecewise-constant table".into()));
        }
        if breaks.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("breakpoints must be nondecreasing".into()));
        }
        Ok(Self { breaks, values })
    }

    pub fn constant(c: f64) -> Self {
        Self { breaks: vec![], values: vec![c] }
    }

    /// `value` on `[lo, hi)`, `0` elsewhere.
    pub fn indicator(lo: f64, hi: f64, value: f64) -> Self {
        Self { breaks: vec![lo, hi], values: vec![0.0, value, 0.0] }
    }

    pub fn left_value(&self) -> f64 {
        self.values[0]
    }
    pub fn right_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.breaks.partition_point(|&b| b <= x)]
    }

    /// Left limit at `x`.
    pub fn eval_left(&self, x: f64) -> f64 {
        self.values[self.breaks.partition_point(|&b| b < x)]
    }

    /// Drops zero-length pieces and merges equal neighbours.
    pub fn simplified(&self) -> Self {
        let mut breaks = Vec::with_capacity(self.breaks.len());
        let mut values = vec![self.values[0]];
        for (i, &b) in self.breaks.iter().enumerate() {
            let v = self.values[i + 1];
            let next = self.breaks.get(i + 1).copied().unwrap_or(f64::INFINITY);
            if next == b && i + 1 < self.breaks.len() {
                continue;
            }
            if v == *values.last().unwrap() {
                continue;
            }
            breaks.push(b);
            values.push(v);
        }
        Self { breaks, values }
    }

    /// Iterates over `(lo, hi, value)` pieces, with infinite outer ends.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(move |i| {
            let lo = if i == 0 { f64::NEG_INFINITY } else { self.breaks[i - 1] };
            let hi = self.breaks.get(i).copied().unwrap_or(f64::INFINITY);
            (lo, hi, self.values[i])
        })
    }

    /// `∫_lo^hi g(u(x)) dx`.
    pub fn integral_of<G: Fn(f64) -> f64>(&self, lo: f64, hi: f64, g: G) -> f64 {
        let mut s = 0.0;
        for (a, b, v) in self.pieces() {
            let (a, b) = (a.max(lo), b.min(hi));
            if b > a {
                s += (b - a) * g(v);
            }
        }
        s
    }

    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        self.integral_of(lo, hi, |v| v)
    }

    pub fn total_variation(&self) -> f64 {
        self.values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
    }

    /// Exact `L¹` distance on the whole line; the far-field states must agree.
    pub fn l1_distance(&self, other: &Pwc) -> Result<f64> {
        if self.left_value() != other.left_value() || self.right_value() != other.right_value() {
            return Err(Error::Domain(
                "far-field states differ, the L1 distance on the line is infinite".into(),
            ));
        }
        Ok(self.l1_on(other, f64::NEG_INFINITY, f64::INFINITY))
    }

    /// Exact `L¹` distance on `[lo, hi]`.
    pub fn l1_on(&self, other: &Pwc, lo: f64, hi: f64) -> f64 {
        let mut xs: Vec<f64> = self
            .breaks
            .iter()
            .chain(other.breaks.iter())
            .copied()
            .filter(|&x| x > lo && x < hi)
            .collect();
        xs.sort_by(f64::total_cmp);
        let mut s = 0.0;
        let mut prev = lo;
        let mut eval_piece = |a: f64, b: f64| {
            if b > a {
                let m = if a.is_finite() && b.is_finite() {
                    0.5 * (a + b)
                } else if a.is_finite() {
                    a + 1.0
                } else {
                    b - 1.0
                };
                let d = (self.eval(m) - other.eval(m)).abs();
                if d != 0.0 {
                    s += d * (b - a);
                }
            }
        };
        for &x in &xs {
            eval_piece(prev, x);
            prev = x;
        }
        eval_piece(prev, hi);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_integrals() {
        let u = Pwc::indicator(0.0, 1.0, 1.0);
        assert_eq!(u.integral(-5.0, 5.0), 1.0);
        assert_eq!(u.l1_distance(&Pwc::constant(0.0)).unwrap(), 1.0);
        assert_eq!(u.total_variation(), 2.0);
        assert_eq!(u.eval(0.0), 1.0);
        assert_eq!(u.eval_left(0.0), 0.0);
    }

    #[test]
    fn mismatched_far_field_rejected() {
        let u = Pwc::new(vec![0.0], vec![1.0, 0.0]).unwrap();
        assert!(u.l1_distance(&Pwc::constant(0.0)).is_err());
        assert_eq!(u.l1_on(&Pwc::constant(0.0), -2.0, 2.0), 2.0);
    }

    #[test]
    fn simplification_drops_empty_pieces() {
        let u = Pwc::new(vec![0.0, 0.0, 1.0, 2.0], vec![0.0, 5.0, 1.0, 1.0, 0.0]).unwrap();
        let s = u.simplified();
        assert_eq!(s.breaks, vec![0.0, 2.0]);
        assert_eq!(s.values, vec![0.0, 1.0, 0.0]);
    }
}
