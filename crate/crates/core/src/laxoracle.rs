//! Lax-Oleinik formula for Burgers' equation with piecewise-constant data:
//! `U(t,x) = min_y U0(y) + (x−y)²/(2t)` and `u = (x − y*)/t`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::pwc::Pwc;

/// Primitive `U0(y) = ∫_{y_ref}^y u0` of a piecewise-constant datum,
/// normalised by `U0(breaks[0]) = 0`.
#[derive(Debug, Clone, Serialize)]
pub struct PotentialDatum {
    pub breaks: Vec<f64>,
    /// Slope of `U0` on each piece (the datum values).
    pub slopes: Vec<f64>,
    /// `U0` at each breakpoint.
    pub at_breaks: Vec<f64>,
}

impl PotentialDatum {
    pub fn new(u0: &Pwc) -> Self {
        let u0 = u0.simplified();
        let mut at_breaks = Vec::with_capacity(u0.breaks.len());
        let mut acc = 0.0;
        for (i, &b) in u0.breaks.iter().enumerate() {
            if i > 0 {
                acc += u0.values[i] * (b - u0.breaks[i - 1]);
            }
            at_breaks.push(acc);
        }
        Self { breaks: u0.breaks, slopes: u0.values, at_breaks }
    }

    pub fn eval(&self, y: f64) -> f64 {
        if self.breaks.is_empty() {
            return self.slopes[0] * y;
        }
        let i = self.breaks.partition_point(|&b| b <= y);
        if i == 0 {
            self.slopes[0] * (y - self.breaks[0])
        } else {
            self.at_breaks[i - 1] + self.slopes[i] * (y - self.breaks[i - 1])
        }
    }

    pub fn max_abs_u(&self) -> f64 {
        self.slopes.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Which candidate family attains the left-most minimum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Branch {
    /// Minimizer at breakpoint `i`: `u = (x − y_i)/t`.
    Corner(usize),
    /// Minimizer inside piece `i`: `u = slopes[i]`.
    Piece(usize),
}

struct Candidate {
    y: f64,
    value: f64,
    branch: Branch,
}

fn candidates(p: &PotentialDatum, t: f64, x: f64) -> Vec<Candidate> {
    let mut c = Vec::with_capacity(2 * p.breaks.len() + 1);
    for (i, &y) in p.breaks.iter().enumerate() {
        c.push(Candidate { y, value: p.at_breaks[i] + (x - y).powi(2) / (2.0 * t), branch: Branch::Corner(i) });
    }
    let n = p.slopes.len();
    for (i, &v) in p.slopes.iter().enumerate() {
        let y = x - t * v;
        let lo = if i == 0 { f64::NEG_INFINITY } else { p.breaks[i - 1] };
        let hi = if i + 1 == n { f64::INFINITY } else { p.breaks[i] };
        if y > lo && y < hi {
            c.push(Candidate { y, value: p.eval(y) + t * v * v / 2.0, branch: Branch::Piece(i) });
        }
    }
    c
}

fn tie_tol(p: &PotentialDatum, t: f64, x: f64) -> f64 {
    let m = p.max_abs_u() + 1.0;
    1e-13 * (1.0 + m * (x.abs() + m * t) + x * x / t)
}

/// `U(t,x)` and its minimizers, sorted increasingly.
pub fn lax_value(p: &PotentialDatum, t: f64, x: f64) -> Result<(f64, Vec<f64>)> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("Lax formula needs t > 0, got {t}")));
    }
    let c = candidates(p, t, x);
    let best = c.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let tol = tie_tol(p, t, x);
    let mut ys: Vec<f64> = c.iter().filter(|c| c.value <= best + tol).map(|c| c.y).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + a.abs()));
    Ok((best, ys))
}

fn leftmost(p: &PotentialDatum, t: f64, x: f64) -> Candidate {
    let c = candidates(p, t, x);
    let best = c.iter().map(|c| c.value).fold(f64::INFINITY, f64::min);
    let tol = tie_tol(p, t, x);
    c.into_iter()
        .filter(|c| c.value <= best + tol)
        .min_by(|a, b| a.y.total_cmp(&b.y))
        .expect("at least one candidate")
}

/// `u(t,x) = (x − y*)/t` with the left-most minimizer `y*`.
pub fn lax_u(p: &PotentialDatum, t: f64, x: f64) -> f64 {
    let c = leftmost(p, t, x);
    match c.branch {
        Branch::Piece(i) => p.slopes[i],
        Branch::Corner(_) => (x - c.y) / t,
    }
}

pub fn lax_sample_u(p: &PotentialDatum, t: f64, grid: &[f64]) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("Lax formula needs t > 0, got {t}")));
    }
    Ok(grid.iter().map(|&x| lax_u(p, t, x)).collect())
}

/// Lax solution on `[lo, hi]` at time `t` as maximal intervals on which
/// `u(x) = alpha + beta·x`.
#[derive(Debug, Clone, Serialize)]
pub struct LaxProfile {
    pub t: f64,
    /// `(x_lo, x_hi, alpha, beta)`.
    pub pieces: Vec<(f64, f64, f64, f64)>,
}

/// Resolves branch changes of the left-most minimizer on a grid of `n` cells,
/// refining each change by bisection.
pub fn lax_profile(p: &PotentialDatum, t: f64, lo: f64, hi: f64, n: usize) -> Result<LaxProfile> {
    if !(t > 0.0) || !(hi > lo) {
        return Err(Error::InvalidInput("lax_profile needs t > 0 and lo < hi".into()));
    }
    let branch = |x: f64| leftmost(p, t, x).branch;
    let affine = |b: Branch| match b {
        Branch::Piece(i) => (p.slopes[i], 0.0),
        Branch::Corner(i) => (-p.breaks[i] / t, 1.0 / t),
    };
    let mut pieces = Vec::new();
    let mut start = lo;
    let mut cur = branch(lo);
    let dx = (hi - lo) / n as f64;
    for i in 1..=n {
        let x = if i == n { hi } else { lo + i as f64 * dx };
        let b = branch(x);
        let mut left = x - dx;
        let mut guard = 0;
        while b != cur && guard < 16 {
            guard += 1;
            let (mut a, mut c) = (left, x);
            for _ in 0..80 {
                let m = 0.5 * (a + c);
                if m <= a || m >= c {
                    break;
                }
                if branch(m) == cur {
                    a = m;
                } else {
                    c = m;
                }
            }
            let next = branch(c);
            let c = crossing(p, t, cur, next, a, c);
            let (al, be) = affine(cur);
            pieces.push((start, c, al, be));
            start = c;
            left = c;
            cur = next;
        }
        cur = b;
    }
    let (al, be) = affine(cur);
    pieces.push((start, hi, al, be));
    pieces.retain(|q| q.1 > q.0);
    Ok(LaxProfile { t, pieces })
}

/// Candidate value as a quadratic `(c2, c1, c0)` in `x`.
fn branch_poly(p: &PotentialDatum, t: f64, b: Branch) -> (f64, f64, f64) {
    match b {
        Branch::Corner(i) => {
            let y = p.breaks[i];
            (0.5 / t, -y / t, p.at_breaks[i] + 0.5 * y * y / t)
        }
        Branch::Piece(i) => {
            let v = p.slopes[i];
            let (a, y) = if i == 0 { (0.0, p.breaks[0]) } else { (p.at_breaks[i - 1], p.breaks[i - 1]) };
            (0.0, v, a - v * y - 0.5 * t * v * v)
        }
    }
}

/// Point in `[a, c]` where two branches have equal value, falling back to the
/// bisection midpoint when no root is found there.
fn crossing(p: &PotentialDatum, t: f64, b1: Branch, b2: Branch, a: f64, c: f64) -> f64 {
    let (p1, p2) = (branch_poly(p, t, b1), branch_poly(p, t, b2));
    let (q2, q1, q0) = (p1.0 - p2.0, p1.1 - p2.1, p1.2 - p2.2);
    let mid = 0.5 * (a + c);
    let slack = 1e-9 * (1.0 + mid.abs()) + (c - a);
    let roots: Vec<f64> = if q2 == 0.0 {
        if q1 == 0.0 {
            vec![]
        } else {
            vec![-q0 / q1]
        }
    } else {
        let disc = q1 * q1 - 4.0 * q2 * q0;
        let vertex = -q1 / (2.0 * q2);
        if disc <= 0.0 {
            vec![vertex]
        } else {
            let r = disc.sqrt() / (2.0 * q2.abs());
            vec![vertex - r, vertex + r]
        }
    };
    roots
        .into_iter()
        .filter(|r| (r - mid).abs() <= slack)
        .min_by(|x, y| (x - mid).abs().total_cmp(&(y - mid).abs()))
        .unwrap_or(mid)
}

impl LaxProfile {
    pub fn eval(&self, x: f64) -> f64 {
        let i = self.pieces.partition_point(|q| q.1 <= x).min(self.pieces.len() - 1);
        let q = self.pieces[i];
        q.2 + q.3 * x
    }

    /// Exact `∫|u_lax − v|` over the profile's range.
    pub fn l1_distance(&self, v: &Pwc) -> f64 {
        let mut s = 0.0;
        for &(a, b, al, be) in &self.pieces {
            let mut cuts: Vec<f64> = v.breaks.iter().copied().filter(|&x| x > a && x < b).collect();
            cuts.insert(0, a);
            cuts.push(b);
            for w in cuts.windows(2) {
                let (p, r) = (w[0], w[1]);
                let c = v.eval(0.5 * (p + r));
                s += abs_affine_integral(al - c, be, p, r);
            }
        }
        s
    }
}

/// `∫_p^r |a + b x| dx`.
fn abs_affine_integral(a: f64, b: f64, p: f64, r: f64) -> f64 {
    let prim = |x: f64| a * x + 0.5 * b * x * x;
    if b != 0.0 {
        let z = -a / b;
        if z > p && z < r {
            return (prim(z) - prim(p)).abs() + (prim(r) - prim(z)).abs();
        }
    }
    (prim(r) - prim(p)).abs()
}

/// `max_θ θ^{-2} |[y, y+θ] \ C|` for a finite union `C` of closed intervals.
pub fn square_density_criterion(c: &[(f64, f64)], y: f64, thetas: &[f64]) -> f64 {
    thetas
        .iter()
        .filter(|&&th| th > 0.0)
        .map(|&th| {
            let covered: f64 = c.iter().map(|&(a, b)| (b.min(y + th) - a.max(y)).max(0.0)).sum();
            let gap = th - covered;
            if gap <= 1e-12 * th {
                0.0
            } else {
                gap / (th * th)
            }
        })
        .fold(0.0, f64::max)
}
