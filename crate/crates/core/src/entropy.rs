//! Entropy-entropy flux pairs, dissipation atoms on fronts, weak residuals
//! against compactly supported test functions, cylinder balances and
//! initial-trace errors.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{Flux, PlFlux};
use crate::fronttrack::{Front, FtSolution};
use crate::quad::{adaptive, gl16_integrate};

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PairKind {
    KruzkovPlus(f64),
    KruzkovMinus(f64),
    Custom(String),
}

#[derive(Clone)]
pub struct EntropyPair {
    pub kind: PairKind,
    eta: RealFn,
    q: RealFn,
    /// Second differences of η on the flux grid are ≥ -1e-12.
    pub convex: bool,
}

impl fmt::Debug for EntropyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "EntropyPair({:?}, convex = {})", self.kind, self.convex)
    }
}

impl EntropyPair {
    pub fn eta(&self, u: f64) -> f64 {
        (self.eta)(u)
    }
    pub fn q(&self, u: f64) -> f64 {
        (self.q)(u)
    }
}

/// `η = (u-k)^+`, `q = χ_{u≥k}(f(u)-f(k))` or `η = (k-u)^+`,
/// `q = χ_{u≤k}(f(k)-f(u))`.
pub fn kruzkov_pair<F: Flux + Clone + 'static>(f: &F, k: f64, sign: Sign) -> EntropyPair {
    let fk = f.eval(k);
    let g = f.clone();
    match sign {
        Sign::Plus => EntropyPair {
            kind: PairKind::KruzkovPlus(k),
            eta: Arc::new(move |u| (u - k).max(0.0)),
            q: Arc::new(move |u| if u >= k { g.eval(u) - fk } else { 0.0 }),
            convex: true,
        },
        Sign::Minus => EntropyPair {
            kind: PairKind::KruzkovMinus(k),
            eta: Arc::new(move |u| (k - u).max(0.0)),
            q: Arc::new(move |u| if u <= k { fk - g.eval(u) } else { 0.0 }),
            convex: true,
        },
    }
}

/// Builds `q(u) = ∫_{u_min}^u η' f'`. For a piecewise-linear flux this is the
/// exact sum `Σ slope·Δη` over segments; otherwise adaptive quadrature of
/// `η' f'` to 1e-10.
pub fn entropy_flux<F, E, D>(f: &F, name: &str, eta: E, deta: D) -> EntropyPair
where
    F: Flux + Clone + 'static,
    E: Fn(f64) -> f64 + Send + Sync + 'static,
    D: Fn(f64) -> f64 + Send + Sync + 'static,
{
    let (lo, hi) = f.domain();
    let eta: RealFn = Arc::new(eta);
    let q: RealFn = match f.as_pl() {
        Some(pl) => {
            let pl = pl.clone();
            let mut prefix = vec![0.0];
            for j in pl.j_min()..pl.j_max() {
                let d = pl.slope(j) * (eta(pl.u_of(j + 1)) - eta(pl.u_of(j)));
                prefix.push(prefix.last().unwrap() + d);
            }
            let e = eta.clone();
            Arc::new(move |u: f64| {
                let x = u / pl.h();
                let j = (x.floor() as i64).clamp(pl.j_min(), pl.j_max() - 1);
                let i = (j - pl.j_min()) as usize;
                prefix[i] + pl.slope(j) * (e(u) - e(pl.u_of(j)))
            })
        }
        None => {
            let g = f.clone();
            let d = Arc::new(deta);
            Arc::new(move |u: f64| adaptive(|s| d(s) * g.deriv(s), lo, u, 1e-10))
        }
    };
    let n = match f.as_pl() {
        Some(pl) => (pl.j_max() - pl.j_min()) as usize,
        None => 1024,
    };
    let du = (hi - lo) / n as f64;
    let convex = (1..n).all(|i| {
        let u = lo + i as f64 * du;
        eta(u - du) - 2.0 * eta(u) + eta(u + du) >= -1e-12
    });
    if !convex {
        log::warn!("entropy {name} is not convex on the flux domain; sign checks disabled for it");
    }
    EntropyPair { kind: PairKind::Custom(name.to_string()), eta, q, convex }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DissipationAtom {
    pub front_id: usize,
    pub rate: f64,
    pub t_start: f64,
    pub t_end: f64,
}

pub fn dissipation_rate(pair: &EntropyPair, u_left: f64, u_right: f64, speed: f64) -> f64 {
    (pair.q(u_right) - pair.q(u_left)) - speed * (pair.eta(u_right) - pair.eta(u_left))
}

pub fn front_dissipation(front: &Front, pair: &EntropyPair, horizon: f64) -> DissipationAtom {
    DissipationAtom {
        front_id: front.id,
        rate: dissipation_rate(pair, front.u_left, front.u_right, front.speed),
        t_start: front.t_birth,
        t_end: front.t_end().min(horizon),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DissipationMeasure {
    pub atoms: Vec<DissipationAtom>,
    pub total: f64,
}

pub fn dissipation_measure(sol: &FtSolution, pair: &EntropyPair) -> DissipationMeasure {
    let atoms: Vec<DissipationAtom> =
        sol.fronts.iter().map(|f| front_dissipation(f, pair, sol.horizon)).collect();
    let total = atoms.iter().map(|a| a.rate * (a.t_end - a.t_start)).sum();
    DissipationMeasure { atoms, total }
}

impl DissipationMeasure {
    /// `μ([t0,t1] × [x0,x1])` from the straight front segments.
    pub fn in_window(&self, sol: &FtSolution, t0: f64, t1: f64, x0: f64, x1: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| {
                let f = &sol.fronts[a.front_id];
                let (mut lo, mut hi) = (a.t_start.max(t0), a.t_end.min(t1));
                if f.speed == 0.0 {
                    if f.x_birth < x0 || f.x_birth > x1 {
                        return 0.0;
                    }
                } else {
                    let ta = f.t_birth + (x0 - f.x_birth) / f.speed;
                    let tb = f.t_birth + (x1 - f.x_birth) / f.speed;
                    lo = lo.max(ta.min(tb));
                    hi = hi.min(ta.max(tb));
                }
                if hi > lo {
                    a.rate * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }
}

/// Largest Kruzkov dissipation rate over every front and every `k` on the
/// grid or at a grid midpoint inside the front's value range.
pub fn max_kruzkov_violation(sol: &FtSolution) -> f64 {
    let f = &sol.flux;
    let mut worst = f64::NEG_INFINITY;
    for fr in &sol.fronts {
        let (a, b) = (fr.j_left.min(fr.j_right), fr.j_left.max(fr.j_right));
        for j2 in 2 * a..=2 * b {
            let k = 0.5 * j2 as f64 * f.h();
            for sign in [Sign::Plus, Sign::Minus] {
                worst = worst.max(kruzkov_rate(f, k, sign, fr.u_left, fr.u_right, fr.speed));
            }
        }
    }
    worst
}

/// Closed-form Kruzkov dissipation rate of a single jump.
pub fn kruzkov_rate(f: &PlFlux, k: f64, sign: Sign, ul: f64, ur: f64, s: f64) -> f64 {
    let fk = f.eval(k);
    let (eta, q): (Box<dyn Fn(f64) -> f64>, Box<dyn Fn(f64) -> f64>) = match sign {
        Sign::Plus => (
            Box::new(move |u| (u - k).max(0.0)),
            Box::new(move |u| if u >= k { f.eval(u) - fk } else { 0.0 }),
        ),
        Sign::Minus => (
            Box::new(move |u| (k - u).max(0.0)),
            Box::new(move |u| if u <= k { fk - f.eval(u) } else { 0.0 }),
        ),
    };
    (q(ur) - q(ul)) - s * (eta(ur) - eta(ul))
}

/// Compactly supported test function `φ(t,x) = B((t-tc)/rt)·B((x-xc)/rx)`
/// with the polynomial bump `B(s) = (1-s²)^4` on `|s| < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Bump {
    pub tc: f64,
    pub rt: f64,
    pub xc: f64,
    pub rx: f64,
}

fn b(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - s * s).powi(4)
    }
}

fn db(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        -8.0 * s * (1.0 - s * s).powi(3)
    }
}

/// `∫_{-1}^{s} B`.
fn pb(s: f64) -> f64 {
    let a = |s: f64| {
        let s2 = s * s;
        s * (1.0 + s2 * (-4.0 / 3.0 + s2 * (6.0 / 5.0 + s2 * (-4.0 / 7.0 + s2 / 9.0))))
    };
    let s = s.clamp(-1.0, 1.0);
    a(s) - a(-1.0)
}

impl Bump {
    pub fn phi(&self, t: f64, x: f64) -> f64 {
        b((t - self.tc) / self.rt) * b((x - self.xc) / self.rx)
    }
    pub fn phi_t(&self, t: f64, x: f64) -> f64 {
        db((t - self.tc) / self.rt) / self.rt * b((x - self.xc) / self.rx)
    }
    pub fn phi_x(&self, t: f64, x: f64) -> f64 {
        b((t - self.tc) / self.rt) * db((x - self.xc) / self.rx) / self.rx
    }
    /// `∫_{-∞}^x φ_t(t, s) ds`.
    fn g(&self, t: f64, x: f64) -> f64 {
        db((t - self.tc) / self.rt) / self.rt * self.rx * pb((x - self.xc) / self.rx)
    }
    pub fn t_support(&self) -> (f64, f64) {
        (self.tc - self.rt, self.tc + self.rt)
    }
    pub fn x_support(&self) -> (f64, f64) {
        (self.xc - self.rx, self.xc + self.rx)
    }
}

/// Integrates `h(t, γ(t))` along `γ(t) = x0 + s(t - t0)` over `[ta, tb]`,
/// splitting where `γ` enters or leaves the bump's x-support so that every
/// piece is polynomial.
fn along_line<H: Fn(f64, f64) -> f64>(bump: &Bump, x0: f64, t0: f64, s: f64, ta: f64, tb: f64, h: H) -> f64 {
    if tb <= ta {
        return 0.0;
    }
    let mut cuts = vec![ta, tb];
    if s != 0.0 {
        let (xl, xr) = bump.x_support();
        for xe in [xl, xr] {
            let tc = t0 + (xe - x0) / s;
            if tc > ta && tc < tb {
                cuts.push(tc);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.windows(2).map(|w| gl16_integrate(|t| h(t, x0 + s * (t - t0)), w[0], w[1])).sum()
}

/// `∫∫(η φ_t + q φ_x) + Σ_atoms ∫ rate·φ(t, γ(t)) dt`. The area integral is
/// evaluated cell by cell: the x-integral of each cell is taken in closed form
/// and the t-integral by a Gauss rule exact for the resulting polynomials.
pub fn weak_residual(sol: &FtSolution, pair: &EntropyPair, bump: &Bump) -> Result<f64> {
    let (ts, te) = bump.t_support();
    if ts < 0.0 || te > sol.horizon {
        return Err(Error::Domain(format!(
            "test function support [{ts}, {te}] escapes the computed window [0, {}]",
            sol.horizon
        )));
    }
    let mut area = 0.0;
    let mut atoms = 0.0;
    for fr in &sol.fronts {
        let ta = fr.t_birth.max(ts);
        let tb = fr.t_end().min(te);
        if tb <= ta {
            continue;
        }
        let (el, er) = (pair.eta(fr.u_left), pair.eta(fr.u_right));
        let (ql, qr) = (pair.q(fr.u_left), pair.q(fr.u_right));
        let ig = along_line(bump, fr.x_birth, fr.t_birth, fr.speed, ta, tb, |t, x| bump.g(t, x));
        let ip = along_line(bump, fr.x_birth, fr.t_birth, fr.speed, ta, tb, |t, x| bump.phi(t, x));
        area += (el - er) * ig + (ql - qr) * ip;
        atoms += dissipation_rate(pair, fr.u_left, fr.u_right, fr.speed) * ip;
    }
    // rightmost cell: η_far·∫ G(t, +∞) dt
    let far = pair.eta(sol.datum.right_value());
    area += far * gl16_integrate(|t| bump.g(t, f64::INFINITY), ts, te);
    Ok(area + atoms)
}

/// Straight characteristic `x = x0 + slope·t` used as a cylinder side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderSide {
    pub x0: f64,
    pub slope: f64,
    pub value: f64,
}

impl CylinderSide {
    pub fn x_at(&self, t: f64) -> f64 {
        self.x0 + self.slope * t
    }
}

/// Residual of `∫η(t2) − ∫η(t1) + (t2−t1)(Q(y2)−Q(y1)) − μ(cylinder)`, with
/// `Q = q(u) − λη(u)` evaluated on each side.
pub fn cylinder_balance(
    sol: &FtSolution,
    pair: &EntropyPair,
    s1: &CylinderSide,
    s2: &CylinderSide,
    t1: f64,
    t2: f64,
) -> Result<f64> {
    if !(0.0 <= t1 && t1 < t2 && t2 <= sol.horizon) {
        return Err(Error::InvalidInput(format!("bad cylinder times [{t1}, {t2}]")));
    }
    if s1.x_at(t1) > s2.x_at(t1) || s1.x_at(t2) > s2.x_at(t2) {
        return Err(Error::Validation("cylinder sides cross".into()));
    }
    let mut mu = 0.0;
    for fr in &sol.fronts {
        let (a, b) = (fr.t_birth.max(t1), fr.t_end().min(t2));
        if b <= a {
            continue;
        }
        for side in [s1, s2] {
            let da = fr.x_at(a) - side.x_at(a);
            let db = fr.x_at(b) - side.x_at(b);
            let tol = 1e-12 * (1.0 + side.x_at(a).abs());
            if (da > tol && db < -tol) || (da < -tol && db > tol) {
                return Err(Error::Validation(format!("front {} crosses a cylinder side", fr.id)));
            }
        }
        let m = 0.5 * (a + b);
        let xm = fr.x_at(m);
        if xm > s1.x_at(m) && xm < s2.x_at(m) {
            mu += dissipation_rate(pair, fr.u_left, fr.u_right, fr.speed) * (b - a);
        }
    }
    let e2 = sol.sample(t2)?.integral_of(s1.x_at(t2), s2.x_at(t2), |u| pair.eta(u));
    let e1 = sol.sample(t1)?.integral_of(s1.x_at(t1), s2.x_at(t1), |u| pair.eta(u));
    let qf = |s: &CylinderSide| pair.q(s.value) - s.slope * pair.eta(s.value);
    Ok(e2 - e1 + (t2 - t1) * (qf(s2) - qf(s1)) - mu)
}

/// `‖u(t) − u0‖_{L¹([−l, l])}`.
pub fn initial_trace_error(sol: &FtSolution, t: f64, l: f64) -> Result<f64> {
    if !(t > 0.0 && t <= sol.horizon) {
        return Err(Error::Domain(format!("t = {t} outside (0, {}]", sol.horizon)));
    }
    Ok(sol.sample(t)?.l1_on(&sol.datum, -l, l))
}
