//! Flux functions: smooth fluxes given by closures, piecewise-linear fluxes
//! on the dyadic grid `2^-k Z`, their convex/concave envelopes and their
//! linearly degenerate components.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub trait Flux: Send + Sync {
    fn eval(&self, u: f64) -> f64;
    /// Characteristic speed `f'(u)`.
    fn deriv(&self, u: f64) -> f64;
    fn domain(&self) -> (f64, f64);
    fn as_pl(&self) -> Option<&PlFlux> {
        None
    }
}

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A flux given by an evaluation procedure and its analytic derivative.
#[derive(Clone)]
pub struct SmoothFlux {
    name: String,
    eval: RealFn,
    deriv: RealFn,
    domain: (f64, f64),
}

impl fmt::Debug for SmoothFlux {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SmoothFlux({} on [{}, {}])", self.name, self.domain.0, self.domain.1)
    }
}

impl SmoothFlux {
    pub fn new<E, D>(name: &str, domain: (f64, f64), eval: E, deriv: D) -> Self
    where
        E: Fn(f64) -> f64 + Send + Sync + 'static,
        D: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self { name: name.to_string(), eval: Arc::new(eval), deriv: Arc::new(deriv), domain }
    }

    /// `u^2/2` on `[-m, m]`.
    pub fn burgers(m: f64) -> Self {
        Self::new("burgers", (-m, m), |u| 0.5 * u * u, |u| u)
    }

    /// `u^3` on `[-m, m]`, convex for u > 0 and concave for u < 0.
    pub fn cubic(m: f64) -> Self {
        Self::new("cubic", (-m, m), |u| u * u * u, |u| 3.0 * u * u)
    }

    pub fn linear(c: f64, m: f64) -> Self {
        Self::new("linear", (-m, m), move |u| c * u, move |_| c)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_domain(&self, domain: (f64, f64)) -> Self {
        Self { domain, ..self.clone() }
    }
}

impl Flux for SmoothFlux {
    fn eval(&self, u: f64) -> f64 {
        (self.eval)(u)
    }
    fn deriv(&self, u: f64) -> f64 {
        (self.deriv)(u)
    }
    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// Rankine-Hugoniot speed of the jump `u_left -> u_right`, or `f'(u)` when
/// the two values coincide.
pub fn speed<F: Flux + ?Sized>(f: &F, u_left: f64, u_right: f64) -> f64 {
    if u_left == u_right {
        f.deriv(u_left)
    } else {
        (f.eval(u_right) - f.eval(u_left)) / (u_right - u_left)
    }
}

/// Piecewise-linear flux interpolating node values on `u = j·2^-k`,
/// `j_min ≤ j ≤ j_max`.
#[derive(Debug, Clone)]
pub struct PlFlux {
    k: u32,
    j_min: i64,
    values: Vec<f64>,
    /// Characteristic speed attached to each node: the smooth derivative when
    /// the flux was sampled from a smooth one, else the mean of the two
    /// adjacent slopes.
    node_speeds: Vec<f64>,
}

pub fn grid_step(k: u32) -> f64 {
    (-(k as f64)).exp2()
}

impl PlFlux {
    /// Builds a flux from a verbatim table of node values starting at `u_min`.
    pub fn from_table(k: u32, u_min: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("a flux table needs at least two nodes".into()));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite flux value {v}")));
        }
        let j_min = grid_index(u_min, k)?;
        let h = grid_step(k);
        let n = values.len();
        let slope = |i: usize| (values[i + 1] - values[i]) / h;
        let node_speeds = (0..n)
            .map(|i| {
                if i == 0 {
                    slope(0)
                } else if i == n - 1 {
                    slope(n - 2)
                } else {
                    0.5 * (slope(i - 1) + slope(i))
                }
            })
            .collect();
        Ok(Self { k, j_min, values, node_speeds })
    }

    pub fn k(&self) -> u32 {
        self.k
    }
    pub fn h(&self) -> f64 {
        grid_step(self.k)
    }
    pub fn j_min(&self) -> i64 {
        self.j_min
    }
    pub fn j_max(&self) -> i64 {
        self.j_min + self.values.len() as i64 - 1
    }
    pub fn u_min(&self) -> f64 {
        self.u_of(self.j_min)
    }
    pub fn u_max(&self) -> f64 {
        self.u_of(self.j_max())
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn u_of(&self, j: i64) -> f64 {
        j as f64 * self.h()
    }

    /// Grid index of `u`; errors when `u` is off the grid or outside the table.
    pub fn index_of(&self, u: f64) -> Result<i64> {
        let j = grid_index(u, self.k)?;
        if j < self.j_min || j > self.j_max() {
            return Err(Error::Domain(format!(
                "u = {u} outside flux table [{}, {}]",
                self.u_min(),
                self.u_max()
            )));
        }
        Ok(j)
    }

    /// Nearest grid index, clamped to the table.
    pub fn snap(&self, u: f64) -> i64 {
        ((u / self.h()).round() as i64).clamp(self.j_min, self.j_max())
    }

    pub fn value_at(&self, j: i64) -> f64 {
        self.values[(j - self.j_min) as usize]
    }

    /// Slope of the segment `[j, j+1]`.
    pub fn slope(&self, j: i64) -> f64 {
        (self.value_at(j + 1) - self.value_at(j)) / self.h()
    }

    pub fn node_speed(&self, j: i64) -> f64 {
        self.node_speeds[(j - self.j_min) as usize]
    }

    /// Rankine-Hugoniot speed between two grid values given by index.
    pub fn speed_idx(&self, jl: i64, jr: i64) -> f64 {
        if jl == jr {
            self.node_speed(jl)
        } else {
            (self.value_at(jr) - self.value_at(jl)) / ((jr - jl) as f64 * self.h())
        }
    }

    pub fn max_abs_slope(&self) -> f64 {
        (self.j_min..self.j_max()).map(|j| self.slope(j).abs()).fold(0.0, f64::max)
    }

    pub fn max_abs_speed(&self) -> f64 {
        self.node_speeds.iter().fold(self.max_abs_slope(), |m, s| m.max(s.abs()))
    }
}

impl Flux for PlFlux {
    fn eval(&self, u: f64) -> f64 {
        let x = u / self.h();
        let j = (x.floor() as i64).clamp(self.j_min, self.j_max() - 1);
        let s = x - j as f64;
        if s == 0.0 {
            return self.value_at(j);
        }
        self.value_at(j) + s * (self.value_at(j + 1) - self.value_at(j))
    }

    fn deriv(&self, u: f64) -> f64 {
        let x = u / self.h();
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            let j = (r as i64).clamp(self.j_min, self.j_max());
            return self.node_speed(j);
        }
        let j = (x.floor() as i64).clamp(self.j_min, self.j_max() - 1);
        self.slope(j)
    }

    fn domain(&self) -> (f64, f64) {
        (self.u_min(), self.u_max())
    }

    fn as_pl(&self) -> Option<&PlFlux> {
        Some(self)
    }
}

/// Grid index of `u` on `2^-k Z`, rejecting values that are not grid points.
pub fn grid_index(u: f64, k: u32) -> Result<i64> {
    let x = u / grid_step(k);
    let j = x.round();
    if !u.is_finite() || (x - j).abs() > 1e-9 {
        return Err(Error::OffGrid { value: u, k });
    }
    Ok(j as i64)
}

/// Samples `f` at every grid node of `range`.
pub fn build_pl_flux<F: Flux + ?Sized>(f: &F, k: u32, range: (f64, f64)) -> Result<PlFlux> {
    let (lo, hi) = range;
    if lo >= hi {
        return Err(Error::InvalidInterval { a: lo, b: hi });
    }
    let j0 = grid_index(lo, k)?;
    let j1 = grid_index(hi, k)?;
    let h = grid_step(k);
    let mut values = Vec::with_capacity((j1 - j0 + 1) as usize);
    let mut node_speeds = Vec::with_capacity(values.capacity());
    for j in j0..=j1 {
        let u = j as f64 * h;
        let v = f.eval(u);
        let d = f.deriv(u);
        if !v.is_finite() || !d.is_finite() {
            return Err(Error::InvalidInput(format!("flux is not finite at u = {u}")));
        }
        values.push(v);
        node_speeds.push(d);
    }
    Ok(PlFlux { k, j_min: j0, values, node_speeds })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeKind {
    Convex,
    Concave,
}

/// Convex or concave envelope of a [`PlFlux`] on `[a, b]`.
#[derive(Debug, Clone)]
pub struct Envelope {
    pub kind: EnvelopeKind,
    h: f64,
    /// Grid indices where the envelope touches the flux, from `a` to `b`.
    pub breakpoints: Vec<i64>,
    pub values: Vec<f64>,
    /// `slopes[i]` is the slope between breakpoints `i` and `i+1`.
    pub slopes: Vec<f64>,
}

impl Envelope {
    pub fn a(&self) -> f64 {
        self.breakpoints[0] as f64 * self.h
    }
    pub fn b(&self) -> f64 {
        *self.breakpoints.last().unwrap() as f64 * self.h
    }
    pub fn breakpoint_u(&self, i: usize) -> f64 {
        self.breakpoints[i] as f64 * self.h
    }
    pub fn lambda_minus(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn lambda_plus(&self) -> f64 {
        self.slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn eval(&self, u: f64) -> f64 {
        let n = self.breakpoints.len();
        let x = u / self.h;
        let mut i = self.breakpoints.partition_point(|&j| (j as f64) <= x);
        i = i.clamp(1, n - 1);
        let (j0, j1) = (self.breakpoints[i - 1] as f64, self.breakpoints[i] as f64);
        let s = (x - j0) / (j1 - j0);
        self.values[i - 1] + s * (self.values[i] - self.values[i - 1])
    }
}

/// Vertices of the lower (convex) or upper (concave) hull of the flux nodes in
/// `[ja, jb]`; collinear vertices are dropped.
pub(crate) fn hull_indices(f: &PlFlux, ja: i64, jb: i64, kind: EnvelopeKind) -> Vec<i64> {
    let mut st: Vec<i64> = Vec::new();
    let sign = match kind {
        EnvelopeKind::Convex => 1.0,
        EnvelopeKind::Concave => -1.0,
    };
    for j in ja..=jb {
        let y = f.value_at(j);
        while st.len() >= 2 {
            let o = st[st.len() - 2];
            let a = st[st.len() - 1];
            let (oy, ay) = (f.value_at(o), f.value_at(a));
            let cross = (a - o) as f64 * (y - oy) - (ay - oy) * (j - o) as f64;
            if sign * cross <= 0.0 {
                st.pop();
            } else {
                break;
            }
        }
        st.push(j);
    }
    st
}

pub fn envelope(f: &PlFlux, a: f64, b: f64, kind: EnvelopeKind) -> Result<Envelope> {
    if a >= b {
        return Err(Error::InvalidInterval { a, b });
    }
    let ja = f.index_of(a)?;
    let jb = f.index_of(b)?;
    Ok(envelope_idx(f, ja, jb, kind))
}

pub(crate) fn envelope_idx(f: &PlFlux, ja: i64, jb: i64, kind: EnvelopeKind) -> Envelope {
    let breakpoints = hull_indices(f, ja, jb, kind);
    let values: Vec<f64> = breakpoints.iter().map(|&j| f.value_at(j)).collect();
    let slopes = breakpoints.windows(2).map(|w| f.speed_idx(w[0], w[1])).collect();
    Envelope { kind, h: f.h(), breakpoints, values, slopes }
}

/// A maximal interval on which `f'` is constant (to tolerance).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdComponent {
    pub lo: f64,
    pub hi: f64,
    pub speed: f64,
}

impl LdComponent {
    pub fn contains(&self, u: f64) -> bool {
        self.lo <= u && u <= self.hi
    }
}

/// Default tolerance `1e-9·max|f'|`.
pub fn default_ld_tol(f: &PlFlux) -> f64 {
    let m = f.max_abs_slope();
    if m > 0.0 {
        1e-9 * m
    } else {
        1e-300
    }
}

/// Runs of at least two consecutive segments whose slopes spread by at most
/// `tol`.
pub fn ld_components_pl(f: &PlFlux, tol: f64) -> Vec<LdComponent> {
    let slopes: Vec<f64> = (f.j_min()..f.j_max()).map(|j| f.slope(j)).collect();
    runs(&slopes, tol, 2)
        .into_iter()
        .map(|(s, e)| LdComponent {
            lo: f.u_of(f.j_min() + s as i64),
            hi: f.u_of(f.j_min() + e as i64 + 1),
            speed: mean(&slopes[s..=e]),
        })
        .collect()
}

/// Samples `f'` on `samples` uniform intervals; a component is a run of at
/// least two samples whose derivative values spread by at most `tol`.
pub fn ld_components_smooth(f: &SmoothFlux, tol: f64, samples: usize) -> Vec<LdComponent> {
    let (lo, hi) = f.domain();
    let du = (hi - lo) / samples as f64;
    let us: Vec<f64> = (0..=samples).map(|i| if i == samples { hi } else { lo + i as f64 * du }).collect();
    let ds: Vec<f64> = us.iter().map(|&u| f.deriv(u)).collect();
    runs(&ds, tol, 2)
        .into_iter()
        .map(|(s, e)| LdComponent { lo: us[s], hi: us[e], speed: mean(&ds[s..=e]) })
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn runs(v: &[f64], tol: f64, min_len: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut s = 0;
    while s < v.len() {
        let (mut lo, mut hi) = (v[s], v[s]);
        let mut e = s;
        while e + 1 < v.len() {
            let x = v[e + 1];
            let (nlo, nhi) = (lo.min(x), hi.max(x));
            if nhi - nlo > tol {
                break;
            }
            lo = nlo;
            hi = nhi;
            e += 1;
        }
        if e + 1 - s >= min_len {
            out.push((s, e));
        }
        s = e + 1;
    }
    out
}

/// The component containing `u`, if `u` lies in a non-trivial one.
pub fn ld_component_of(comps: &[LdComponent], u: f64) -> Option<LdComponent> {
    comps.iter().copied().find(|c| c.contains(u))
}
