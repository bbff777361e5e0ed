//! Riemann fans for piecewise-linear fluxes and the boundary Riemann problem
//! in a channel between two polylines, solved by length minimization.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{envelope_idx, hull_indices, Envelope, EnvelopeKind, Flux, PlFlux};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Wave {
    pub speed: f64,
    pub u_before: f64,
    pub u_after: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WaveFan {
    pub u_left: f64,
    pub u_right: f64,
    pub waves: Vec<Wave>,
}

impl WaveFan {
    /// Self-similar solution `u(x/t)`; on a wave the right state is returned.
    pub fn value_at(&self, xi: f64) -> f64 {
        let i = self.waves.partition_point(|w| w.speed <= xi);
        if i == 0 {
            self.u_left
        } else {
            self.waves[i - 1].u_after
        }
    }
}

/// Fan of waves between grid indices `jl -> jr`, as `(speed, j_before, j_after)`
/// with strictly increasing speeds.
pub(crate) fn fan_indices(f: &PlFlux, jl: i64, jr: i64) -> Vec<(f64, i64, i64)> {
    if jl == jr {
        return vec![];
    }
    if jl < jr {
        let hull = hull_indices(f, jl, jr, EnvelopeKind::Convex);
        hull.windows(2).map(|w| (f.speed_idx(w[0], w[1]), w[0], w[1])).collect()
    } else {
        let hull = hull_indices(f, jr, jl, EnvelopeKind::Concave);
        hull.windows(2).rev().map(|w| (f.speed_idx(w[0], w[1]), w[1], w[0])).collect()
    }
}

/// How off-grid Riemann data are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffGridPolicy {
    #[default]
    Snap,
    Strict,
}

pub fn solve_riemann(f: &PlFlux, u_left: f64, u_right: f64) -> Result<WaveFan> {
    solve_riemann_with(f, u_left, u_right, OffGridPolicy::Snap)
}

pub fn solve_riemann_with(f: &PlFlux, u_left: f64, u_right: f64, policy: OffGridPolicy) -> Result<WaveFan> {
    let idx = |u: f64| -> Result<i64> {
        match f.index_of(u) {
            Ok(j) => Ok(j),
            Err(e @ Error::OffGrid { .. }) if policy == OffGridPolicy::Snap => {
                let (lo, hi) = f.domain();
                if u < lo || u > hi {
                    return Err(e);
                }
                let j = f.snap(u);
                log::warn!("Riemann datum {u} snapped to grid value {}", f.u_of(j));
                Ok(j)
            }
            Err(e) => Err(e),
        }
    };
    let (jl, jr) = (idx(u_left)?, idx(u_right)?);
    let waves = fan_indices(f, jl, jr)
        .into_iter()
        .map(|(speed, a, b)| Wave { speed, u_before: f.u_of(a), u_after: f.u_of(b) })
        .collect();
    Ok(WaveFan { u_left: f.u_of(jl), u_right: f.u_of(jr), waves })
}

/// Monotone step map `[λ⁻, λ⁺] → [a, b]` inverting the derivative of a convex
/// envelope. On a flat-slope piece the map returns the piece's right end, so
/// `g(s_i) = u_i` for the breakpoint `u_i` closing the segment of slope `s_i`.
#[derive(Debug, Clone)]
pub struct PseudoInverse {
    slopes: Vec<f64>,
    us: Vec<f64>,
}

pub fn pseudo_inverse_g(env: &Envelope) -> Result<PseudoInverse> {
    if env.kind != EnvelopeKind::Convex {
        return Err(Error::InvalidInput("pseudo-inverse needs a convex envelope".into()));
    }
    let us = (0..env.breakpoints.len()).map(|i| env.breakpoint_u(i)).collect();
    Ok(PseudoInverse { slopes: env.slopes.clone(), us })
}

impl PseudoInverse {
    pub fn lambda_minus(&self) -> f64 {
        self.slopes[0]
    }
    pub fn lambda_plus(&self) -> f64 {
        *self.slopes.last().unwrap()
    }
    /// `g(v)`; queries outside `[λ⁻, λ⁺]` clamp to `a` or `b`.
    pub fn eval(&self, v: f64) -> f64 {
        if v < self.lambda_minus() {
            return self.us[0];
        }
        let i = self.slopes.partition_point(|&s| s <= v);
        self.us[i]
    }
}

/// `u = a` for `v ≤ λ⁻`, `b` for `v ≥ λ⁺`, `g(v)` in between, for the fan
/// joining `a` to `b` (either ordering).
pub fn fan_value_from_slope(fan: &WaveFan, v: f64) -> f64 {
    let m = fan.waves.len();
    if m == 0 || v <= fan.waves[0].speed {
        return fan.u_left;
    }
    if v >= fan.waves[m - 1].speed {
        return fan.u_right;
    }
    let i = fan.waves.partition_point(|w| w.speed <= v);
    fan.waves[i - 1].u_after
}

/// Polyline `x = γ(t)` through `(t, x)` vertices with strictly increasing `t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Polyline {
    pub pts: Vec<(f64, f64)>,
}

impl Polyline {
    pub fn new(pts: Vec<(f64, f64)>) -> Result<Self> {
        if pts.len() < 2 {
            return Err(Error::InvalidInput("a polyline needs two vertices".into()));
        }
        if pts.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidInput("polyline times must increase strictly".into()));
        }
        Ok(Self { pts })
    }

    /// Straight line `x = x0 + s·t` on `[0, t_end]`.
    pub fn line(x0: f64, s: f64, t_end: f64) -> Self {
        Self { pts: vec![(0.0, x0), (t_end, x0 + s * t_end)] }
    }

    pub fn t_start(&self) -> f64 {
        self.pts[0].0
    }
    pub fn t_end(&self) -> f64 {
        self.pts.last().unwrap().0
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.pts.len();
        let i = self.pts.partition_point(|p| p.0 <= t).clamp(1, n - 1);
        let (t0, x0) = self.pts[i - 1];
        let (t1, x1) = self.pts[i];
        x0 + (t - t0) * (x1 - x0) / (t1 - t0)
    }

    /// Slope on the segment containing `t` (right derivative).
    pub fn slope_at(&self, t: f64) -> f64 {
        let n = self.pts.len();
        let i = self.pts.partition_point(|p| p.0 <= t).clamp(1, n - 1);
        let (t0, x0) = self.pts[i - 1];
        let (t1, x1) = self.pts[i];
        (x1 - x0) / (t1 - t0)
    }

    pub fn lipschitz(&self) -> f64 {
        self.pts
            .windows(2)
            .map(|w| ((w[1].1 - w[0].1) / (w[1].0 - w[0].0)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ChannelProblem {
    pub gamma1: Polyline,
    pub gamma2: Polyline,
    pub a: f64,
    pub b: f64,
    pub flux: PlFlux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ChannelRegion {
    Minus,
    Middle,
    Plus,
}

#[derive(Debug, Clone)]
pub struct ChannelSolution {
    pub problem: ChannelProblem,
    pub fan: WaveFan,
    horizon: f64,
    width_tol: f64,
}

pub fn solve_channel(p: ChannelProblem) -> Result<ChannelSolution> {
    let (g1, g2) = (&p.gamma1, &p.gamma2);
    if g1.t_start() != 0.0 || g2.t_start() != 0.0 {
        return Err(Error::InvalidInput("channel boundaries must start at t = 0".into()));
    }
    if g1.pts[0].1 != g2.pts[0].1 {
        return Err(Error::InvalidInput("channel boundaries must share their apex".into()));
    }
    let horizon = g1.t_end().min(g2.t_end());
    let mut times: Vec<f64> = g1.pts.iter().chain(g2.pts.iter()).map(|p| p.0).filter(|&t| t <= horizon).collect();
    times.push(horizon);
    let scale = 1.0 + g1.lipschitz().max(g2.lipschitz()) * horizon;
    let width_tol = 1e-12 * scale;
    let mut max_width: f64 = 0.0;
    for &t in &times {
        let w = g2.eval(t) - g1.eval(t);
        if w < -width_tol {
            return Err(Error::InvalidInput(format!("gamma1 > gamma2 at t = {t}")));
        }
        max_width = max_width.max(w);
    }
    if max_width <= width_tol {
        return Err(Error::InvalidInput("degenerate channel of zero width".into()));
    }
    let fan = solve_riemann(&p.flux, p.a, p.b)?;
    Ok(ChannelSolution { problem: p, fan, horizon, width_tol })
}

impl ChannelSolution {
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    fn check_inside(&self, t: f64, x: f64) -> Result<(f64, f64)> {
        if !(t > 0.0 && t <= self.horizon) {
            return Err(Error::Domain(format!("t = {t} outside (0, {}]", self.horizon)));
        }
        let lo = self.problem.gamma1.eval(t);
        let hi = self.problem.gamma2.eval(t);
        if x < lo - self.width_tol || x > hi + self.width_tol {
            return Err(Error::Domain(format!("x = {x} outside channel [{lo}, {hi}] at t = {t}")));
        }
        Ok((lo, hi))
    }

    /// Terminal slope of the shortest path from the apex to `(t, x)` inside
    /// the channel (taut string through the vertical gates at boundary
    /// vertices).
    pub fn v(&self, t: f64, x: f64) -> Result<f64> {
        let (lo, hi) = self.check_inside(t, x)?;
        let x = x.clamp(lo, hi);
        let g1 = &self.problem.gamma1;
        let g2 = &self.problem.gamma2;
        let mut gt: Vec<f64> = g1
            .pts
            .iter()
            .chain(g2.pts.iter())
            .map(|p| p.0)
            .filter(|&s| s > 0.0 && s < t)
            .collect();
        gt.sort_by(f64::total_cmp);
        gt.dedup();
        let gates: Vec<(f64, f64, f64)> = gt.iter().map(|&s| (s, g1.eval(s), g2.eval(s))).collect();
        let mut apex = (0.0, g1.pts[0].1);
        let mut start = 0;
        loop {
            let (mut smin, mut smax) = (f64::NEG_INFINITY, f64::INFINITY);
            let (mut jmin, mut jmax) = (usize::MAX, usize::MAX);
            let mut bend = None;
            for j in start..=gates.len() {
                let (tj, l, h) = if j == gates.len() { (t, x, x) } else { gates[j] };
                let dt = tj - apex.0;
                let sl = (l - apex.1) / dt;
                let sh = (h - apex.1) / dt;
                if sl > smax {
                    bend = Some((jmax, true));
                    break;
                }
                if sh < smin {
                    bend = Some((jmin, false));
                    break;
                }
                if sl >= smin {
                    smin = sl;
                    jmin = j;
                }
                if sh <= smax {
                    smax = sh;
                    jmax = j;
                }
            }
            match bend {
                None => return Ok((x - apex.1) / (t - apex.0)),
                Some((j, upper)) => {
                    let (tj, l, h) = gates[j];
                    apex = (tj, if upper { h } else { l });
                    start = j + 1;
                }
            }
        }
    }

    pub fn u(&self, t: f64, x: f64) -> Result<f64> {
        Ok(fan_value_from_slope(&self.fan, self.v(t, x)?))
    }

    fn threshold(&self, t: f64, pred: impl Fn(f64) -> bool) -> Result<f64> {
        let (lo, hi) = self.check_inside(t, self.problem.gamma1.eval(t))?;
        if pred(self.v(t, lo)?) {
            return Ok(lo);
        }
        if !pred(self.v(t, hi)?) {
            return Ok(hi);
        }
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if pred(self.v(t, m)?) {
                b = m;
            } else {
                a = m;
            }
        }
        Ok(b)
    }

    /// Lower boundary of `{u > a}` at time `t`.
    pub fn gamma_minus(&self, t: f64) -> Result<f64> {
        let lm = self.fan.waves.first().map(|w| w.speed).unwrap_or(f64::INFINITY);
        self.threshold(t, |v| v > lm)
    }

    /// Upper boundary of `{u < b}` at time `t`.
    pub fn gamma_plus(&self, t: f64) -> Result<f64> {
        let lp = self.fan.waves.last().map(|w| w.speed).unwrap_or(f64::NEG_INFINITY);
        self.threshold(t, |v| v >= lp)
    }

    pub fn region(&self, t: f64, x: f64) -> Result<ChannelRegion> {
        let v = self.v(t, x)?;
        Ok(match (self.fan.waves.first(), self.fan.waves.last()) {
            (Some(w0), Some(w1)) if v > w0.speed && v < w1.speed => ChannelRegion::Middle,
            (Some(w0), _) if v <= w0.speed => ChannelRegion::Minus,
            (None, _) => ChannelRegion::Minus,
            _ => ChannelRegion::Plus,
        })
    }

    /// `(t, x, u, v)` on an `nt × nx` grid spanning the channel.
    pub fn sample_grid(&self, nt: usize, nx: usize) -> Result<Vec<(f64, f64, f64, f64)>> {
        let mut out = Vec::with_capacity(nt * nx);
        for i in 1..=nt {
            let t = self.horizon * i as f64 / nt as f64;
            let lo = self.problem.gamma1.eval(t);
            let hi = self.problem.gamma2.eval(t);
            for j in 0..nx {
                let x = lo + (hi - lo) * (j as f64 + 0.5) / nx as f64;
                let v = self.v(t, x)?;
                out.push((t, x, fan_value_from_slope(&self.fan, v), v));
            }
        }
        Ok(out)
    }
}

/// Envelope used by the boundary problem: convex when `a ≤ b`, concave else.
pub fn channel_envelope(f: &PlFlux, a: f64, b: f64) -> Result<Envelope> {
    let (ja, jb) = (f.index_of(a)?, f.index_of(b)?);
    if ja == jb {
        return Err(Error::InvalidInterval { a, b });
    }
    Ok(if ja < jb {
        envelope_idx(f, ja, jb, EnvelopeKind::Convex)
    } else {
        envelope_idx(f, jb, ja, EnvelopeKind::Concave)
    })
}
