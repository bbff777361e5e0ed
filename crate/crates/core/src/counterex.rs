//! Generators and verifiers for the two counterexamples: a Cantor-type datum
//! for Burgers' equation whose points admit no backward minimizer, and a
//! compactly supported smooth flux for which `f'(u)` fails to have locally
//! bounded variation.

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::{build_pl_flux, grid_step, SmoothFlux};
use crate::fronttrack::{solve, FtSolution};
use crate::laxoracle::square_density_criterion;
use crate::pwc::Pwc;
use crate::quad::gl16_integrate;
use crate::riemann::solve_riemann;

pub type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

fn pow3(n: u32) -> i128 {
    3i128.pow(n)
}

fn to_f64(x: &Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

/// `C_n ⊂ [0, 2]`: start from `[0, 2]` and at step `j` remove the open middle
/// interval of length `3^-j` from every component.
#[derive(Debug, Clone, PartialEq)]
pub struct CantorSet {
    pub level: u32,
    pub components: Vec<(Q, Q)>,
}

/// Exact up to level 30 (denominators `2·3^n` fit in i128 with room to spare).
pub fn cantor(n: u32) -> Result<CantorSet> {
    if n > 30 {
        return Err(Error::InvalidInput(format!("Cantor level {n} exceeds the exact range (≤ 30)")));
    }
    let mut comps = vec![(q(0, 1), q(2, 1))];
    for j in 1..=n {
        let gap = q(1, pow3(j));
        comps = comps
            .into_iter()
            .flat_map(|(a, b)| {
                let len = (b - a - gap) / 2;
                [(a, a + len), (b - len, b)]
            })
            .collect();
    }
    Ok(CantorSet { level: n, components: comps })
}

/// Length of each level-`n` component: `ℓ_0 = 2`, `ℓ_n = (ℓ_{n-1} − 3^-n)/2`.
pub fn component_length(n: u32) -> Q {
    (1..=n).fold(q(2, 1), |l, j| (l - q(1, pow3(j))) / 2)
}

impl CantorSet {
    pub fn measure(&self) -> Q {
        self.components.iter().fold(q(0, 1), |s, (a, b)| s + (b - a))
    }

    /// `2 − Σ_{j≤n} 2^{j-1} 3^{-j}`.
    pub fn measure_closed_form(&self) -> Q {
        (1..=self.level).fold(q(2, 1), |m, j| m - q(1i128 << (j - 1), pow3(j)))
    }

    pub fn components_f64(&self) -> Vec<(f64, f64)> {
        self.components.iter().map(|(a, b)| (to_f64(a), to_f64(b))).collect()
    }

    /// `χ_C` as a piecewise-constant datum.
    pub fn indicator(&self) -> Pwc {
        let mut breaks = Vec::new();
        let mut values = vec![0.0];
        for (a, b) in self.components_f64() {
            breaks.push(a);
            values.push(1.0);
            breaks.push(b);
            values.push(0.0);
        }
        Pwc { breaks, values }
    }
}

/// Exact square-density criterion at the left endpoint `y = 0` of a level-`n`
/// component with `θ = ℓ_n + 3^-n`, the distance to the next component:
/// `3^-n / (ℓ_n + 3^-n)²`.
pub fn left_endpoint_criterion_exact(n: u32) -> Q {
    let g = q(1, pow3(n));
    let th = component_length(n) + g;
    g / (th * th)
}

/// The displayed lower bound `3^-n / (2^{-n+1} + 3^-n)²`.
pub fn left_endpoint_bound(n: u32) -> f64 {
    let g = 3f64.powi(-(n as i32));
    g / (2f64.powi(1 - n as i32) + g).powi(2)
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionRow {
    pub level: u32,
    pub measured: f64,
    pub exact: f64,
    pub bound: f64,
    pub pass_fraction: f64,
}

/// Criterion value measured through [`square_density_criterion`] on the
/// level-`n` set at `y = 0`.
pub fn left_endpoint_criterion(n: u32) -> Result<f64> {
    let c = cantor(n)?;
    let th = to_f64(&(component_length(n) + q(1, pow3(n))));
    Ok(square_density_criterion(&c.components_f64(), 0.0, &[th]))
}

/// Sample points: `per_component` equally spaced points in every component of
/// `C_sample_level`, kept exactly.
pub fn sample_points(sample_level: u32, per_component: u32) -> Result<Vec<Q>> {
    let c = cantor(sample_level)?;
    let m = per_component as i128;
    Ok(c.components.iter().flat_map(|&(a, b)| (0..m).map(move |i| a + (b - a) * q(i, m))).collect())
}

impl CantorSet {
    /// Exact `|[lo, hi] ∩ C|`.
    pub fn measure_in(&self, lo: &Q, hi: &Q) -> Q {
        let i0 = self.components.partition_point(|(_, b)| b <= lo);
        let i1 = self.components.partition_point(|(a, _)| a < hi);
        self.components[i0..i1.max(i0)].iter().fold(q(0, 1), |s, (a, b)| {
            let (l, r) = (a.max(lo), b.min(hi));
            if r > l {
                s + (r - l)
            } else {
                s
            }
        })
    }

    /// Smallest left endpoint of a component strictly greater than `y`.
    pub fn next_left_endpoint(&self, y: &Q) -> Option<Q> {
        let i = self.components.partition_point(|(a, _)| a <= y);
        self.components.get(i).map(|c| c.0)
    }
}

/// `max_{m ≤ n} θ_m^-2 |[y, y+θ_m] \ C_n|` with `θ_m = y_m − y` and `y_m` the
/// next left endpoint of a component of `C_m` after `y`. `sets[m]` is `C_m`.
pub fn next_endpoint_criterion(sets: &[CantorSet], n: usize, y: &Q) -> f64 {
    (1..=n)
        .filter_map(|m| sets[m].next_left_endpoint(y))
        .map(|ym| {
            let th = ym - y;
            let gap = th - sets[n].measure_in(y, &ym);
            to_f64(&(gap / (th * th)))
        })
        .fold(0.0, f64::max)
}

/// Fraction of `points` whose criterion on `C_n` stays ≤ `1/(2t)`.
pub fn pass_fraction(n: u32, points: &[Q], t: f64) -> Result<f64> {
    let sets: Vec<CantorSet> = (0..=n).map(cantor).collect::<Result<_>>()?;
    let pass = points.iter().filter(|y| next_endpoint_criterion(&sets, n as usize, y) <= 0.5 / t).count();
    Ok(pass as f64 / points.len() as f64)
}

/// Per-level report of the square-density criterion.
pub fn counterexample1(levels: &[u32], sample_level: u32, per_component: u32) -> Result<Vec<CriterionRow>> {
    let pts = sample_points(sample_level, per_component)?;
    levels
        .iter()
        .map(|&n| {
            Ok(CriterionRow {
                level: n,
                measured: left_endpoint_criterion(n)?,
                exact: to_f64(&left_endpoint_criterion_exact(n)),
                bound: left_endpoint_bound(n),
                pass_fraction: pass_fraction(n, &pts, 1.0)?,
            })
        })
        .collect()
}

/// Smooth transition `g` on `[-1, 1]` with `g' = exp(β − β/(1−s²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpG {
    pub beta: f64,
}

/// Golden value of `β`.
pub const BUMP_BETA: f64 = 1.899_566_937_261_681_9;

const G_PANELS: usize = 16;

fn gprime(beta: f64, s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (beta - beta / (1.0 - s * s)).exp()
    }
}

fn g_from_minus_one(beta: f64, s: f64) -> f64 {
    let s = s.clamp(-1.0, 1.0);
    let w = (s + 1.0) / G_PANELS as f64;
    (0..G_PANELS)
        .map(|i| {
            let a = -1.0 + i as f64 * w;
            gl16_integrate(|x| gprime(beta, x), a, a + w)
        })
        .sum()
}

/// Finds `β` with `∫_{-1}^1 g' = 1` by bisection on `[1, 10]`.
pub fn build_bump_g() -> Result<BumpG> {
    let total = |beta: f64| 2.0 * g_from_minus_one(beta, 0.0);
    let (mut lo, mut hi) = (1.0, 10.0);
    if !(total(lo) > 1.0 && total(hi) < 1.0) {
        return Err(Error::Internal("bump normalisation is not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    Ok(BumpG { beta: 0.5 * (lo + hi) })
}

impl BumpG {
    pub fn golden() -> Self {
        Self { beta: BUMP_BETA }
    }
    pub fn g(&self, s: f64) -> f64 {
        if s <= 0.0 {
            g_from_minus_one(self.beta, s)
        } else {
            1.0 - g_from_minus_one(self.beta, -s)
        }
    }
    pub fn gprime(&self, s: f64) -> f64 {
        gprime(self.beta, s)
    }
}

/// Single building block `f^n_{a,L}`: 0 below `L−a`, rising through
/// `a^n g((u−L)/a)` to the plateau `a^n` on `(L+a, 2L]`, falling through
/// `a^n g((2L+a−u)/a)` to 0 at `2L+2a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpBlock {
    pub a: f64,
    pub l: f64,
    pub n: u32,
}

impl BumpBlock {
    pub fn new(a: f64, l: f64, n: u32) -> Result<Self> {
        if !(a > 0.0 && l > 0.0) || n == 0 {
            return Err(Error::Validation(format!("block needs a, L > 0 and n ≥ 1 (a = {a}, L = {l}, n = {n})")));
        }
        if 3.0 * a > l {
            return Err(Error::Validation(format!("block violates 3a ≤ L (a = {a}, L = {l})")));
        }
        Ok(Self { a, l, n })
    }

    pub fn height(&self) -> f64 {
        self.a.powi(self.n as i32)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.l - self.a, 2.0 * self.l + 2.0 * self.a)
    }

    pub fn eval(&self, g: &BumpG, u: f64) -> f64 {
        let (a, l, h) = (self.a, self.l, self.height());
        if u <= l - a || u > 2.0 * l + 2.0 * a {
            0.0
        } else if u <= l + a {
            h * g.g((u - l) / a)
        } else if u <= 2.0 * l {
            h
        } else {
            h * g.g((2.0 * l + a - u) / a)
        }
    }

    pub fn deriv(&self, g: &BumpG, u: f64) -> f64 {
        let (a, l, h) = (self.a, self.l, self.height());
        if u <= l - a || u > 2.0 * l + 2.0 * a {
            0.0
        } else if u <= l + a {
            h / a * g.gprime((u - l) / a)
        } else if u <= 2.0 * l {
            0.0
        } else {
            -h / a * g.gprime((2.0 * l + a - u) / a)
        }
    }

    pub fn flux(&self, g: BumpG) -> SmoothFlux {
        let b = *self;
        SmoothFlux::new(&format!("bump{}", self.n), (0.0, 2.0 * self.l + 2.0 * self.a), move |u| b.eval(&g, u), move |u| {
            b.deriv(&g, u)
        })
    }

    /// `(a^n/(L+a), a^n/L)`.
    pub fn d_interval(&self) -> (f64, f64) {
        (self.height() / (self.l + self.a), self.height() / self.l)
    }

    /// `1 + 2a/(L−2a)`.
    pub fn t1_bound(&self) -> f64 {
        1.0 + 2.0 * self.a / (self.l - 2.0 * self.a)
    }

    /// `(a^n/(L+a))·log((L−2a)/(2a))`.
    pub fn tv_bound(&self) -> f64 {
        self.height() / (self.l + self.a) * ((self.l - 2.0 * self.a) / (2.0 * self.a)).ln()
    }
}

/// Block parameters indexed by `n = 0, 1, ...`; entry 0 only supplies `L_0`
/// for the no-interaction condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockSequences {
    pub a: Vec<f64>,
    pub l: Vec<f64>,
}

/// `a_n = 4^-n`, `L_n = 3·4^-n` for `n = 0..=n_max`.
pub fn geometric_sequences(n_max: u32) -> BlockSequences {
    let a = (0..=n_max).map(|n| 4f64.powi(-(n as i32))).collect::<Vec<_>>();
    let l = a.iter().map(|x| 3.0 * x).collect();
    BlockSequences { a, l }
}

/// Both readings of `a_{n+1}^{n+1} < (L_n/a_n^n)·L_{n−1}`: returns the margins
/// `rhs/lhs` for `(L_n/a_n^n)·L_{n−1}` and `L_n/(a_n^n·L_{n−1})`.
pub fn no_interaction_margins(s: &BlockSequences, n: usize) -> (f64, f64) {
    let lhs = s.a[n + 1].powi(n as i32 + 1);
    let an = s.a[n].powi(n as i32);
    ((s.l[n] / an) * s.l[n - 1] / lhs, s.l[n] / (an * s.l[n - 1]) / lhs)
}

/// `f = Σ_{n=1}^{N} f^n_{a_n, L_n}` after checking `3a_n ≤ L_n`,
/// `4L_{n+1} ≤ L_n` and the no-interaction condition (weaker reading).
pub fn assemble_flux(s: &BlockSequences, g: BumpG) -> Result<SmoothFlux> {
    let n_max = s.a.len().min(s.l.len());
    if n_max < 2 {
        return Err(Error::InvalidInput("need at least one block besides n = 0".into()));
    }
    let blocks: Vec<BumpBlock> = (1..n_max).map(|n| BumpBlock::new(s.a[n], s.l[n], n as u32)).collect::<Result<_>>()?;
    for n in 1..n_max - 1 {
        if 4.0 * s.l[n + 1] > s.l[n] {
            return Err(Error::Validation(format!("4 L_{} ≤ L_{} fails", n + 1, n)));
        }
        let (m1, m2) = no_interaction_margins(s, n);
        if !(m1.max(m2) > 1.0) {
            return Err(Error::Validation(format!("no-interaction condition fails at n = {n}")));
        }
    }
    let hi = blocks[0].support().1;
    let bl = blocks.clone();
    let bd = blocks;
    Ok(SmoothFlux::new(
        "counterexample2",
        (0.0, hi),
        move |u| bl.iter().map(|b| b.eval(&g, u)).sum(),
        move |u| bd.iter().map(|b| b.deriv(&g, u)).sum(),
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct BlockRun {
    pub n: u32,
    pub k: u32,
    pub d_n: f64,
    pub d_interval: (f64, f64),
    /// Death time of the rightmost front issued from `x = d`; infinite if it
    /// survives the run.
    pub t1: f64,
    pub t1_bound: f64,
    pub tv_integral: f64,
    pub theoretical_bound: f64,
    pub events: usize,
}

impl BlockRun {
    pub fn d_inside(&self) -> bool {
        self.d_n > self.d_interval.0 && self.d_n < self.d_interval.1
    }
    pub fn t1_satisfied(&self) -> bool {
        self.t1 > self.t1_bound
    }
    pub fn tv_satisfied(&self) -> bool {
        self.tv_integral >= 0.5 * self.theoretical_bound
    }
}

/// `∫_{t0}^{t1} Σ_fronts |f'(u_R) − f'(u_L)| dt` with the node speeds of the
/// piecewise-linear flux standing for `f'`.
pub fn tv_of_speed(sol: &FtSolution, t0: f64, t1: f64) -> f64 {
    sol.fronts
        .iter()
        .map(|fr| {
            let dt = (fr.t_end().min(t1) - fr.t_birth.max(t0)).max(0.0);
            (sol.flux.node_speed(fr.j_right) - sol.flux.node_speed(fr.j_left)).abs() * dt
        })
        .sum()
}

/// Front-tracks one block of the second counterexample on `[0, 2]` with the
/// flux sampled on `2^-k Z`.
pub fn run_block_with(block: BumpBlock, g: BumpG, k: u32) -> Result<(BlockRun, FtSolution)> {
    let h = grid_step(k);
    if h > block.a / 16.0 {
        return Err(Error::Validation(format!(
            "grid 2^-{k} does not resolve a = {} (need 2^-k ≤ a/16)",
            block.a
        )));
    }
    let f = build_pl_flux(&block.flux(g), k, (0.0, 2.0 * block.l + 2.0 * block.a))?;
    let top = 2.0 * block.l;
    let fan = solve_riemann(&f, 0.0, top)?;
    let d = fan.waves.last().map(|w| w.speed).ok_or_else(|| Error::Internal("empty Riemann fan".into()))?;
    let sol = solve(&f, &Pwc::indicator(0.0, d, top), 2.0)?;
    let t1 = sol
        .fronts
        .iter()
        .filter(|fr| fr.birth_event.is_none() && fr.x_birth == d)
        .max_by(|a, b| a.speed.total_cmp(&b.speed))
        .map(|fr| fr.t_death.unwrap_or(f64::INFINITY))
        .ok_or_else(|| Error::Internal("no front issued from x = d".into()))?;
    let run = BlockRun {
        n: block.n,
        k,
        d_n: d,
        d_interval: block.d_interval(),
        t1,
        t1_bound: block.t1_bound(),
        tv_integral: tv_of_speed(&sol, 1.0, 2.0),
        theoretical_bound: block.tv_bound(),
        events: sol.event_count(),
    };
    Ok((run, sol))
}

/// Block `n` with `a_n = 4^-n`, `L_n = 3·4^-n`.
pub fn run_block(n: u32, k: u32) -> Result<BlockRun> {
    let s = geometric_sequences(n);
    let block = BumpBlock::new(s.a[n as usize], s.l[n as usize], n)?;
    Ok(run_block_with(block, BumpG::golden(), k)?.0)
}

/// `X_n = L_n/(n² a_n^n)` for the geometric block sequences, as `log X_n`.
fn log_x(n: u32) -> f64 {
    let nf = n as f64;
    let ln4 = 4f64.ln();
    3f64.ln() - nf * ln4 - 2.0 * nf.ln() + nf * nf * ln4
}

/// `⌊X⌋/X`, exact while `X` is representable, 1 beyond `2^53`.
fn floor_ratio(log_x: f64) -> f64 {
    if log_x > 53.0 * 2f64.ln() {
        1.0
    } else {
        let x = log_x.exp();
        x.floor() / x
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesReport {
    pub terms: u32,
    /// `Σ N_n a_n^n / L_n`.
    pub convergent_sum: f64,
    /// Partial sums of `Σ N_n a_n^n/(L_n+a_n)·log((L_n−2a_n)/(2a_n))` at
    /// `n = 10, 100, 1000, ...` and at the last term.
    pub divergent_partials: Vec<(u32, f64)>,
    pub divergent_max: f64,
    /// Smallest `n` at which the divergent partial sum exceeds 10.
    pub exceeds_ten_at: Option<u32>,
}

/// Evaluates both series for the geometric block sequences with
/// `N_n = ⌊L_n/(n² a_n^n)⌋`, so that `N_n a_n^n = (⌊X_n⌋/X_n)·L_n/n²`.
pub fn analytic_series(terms: u32) -> SeriesReport {
    let (mut conv, mut div, mut best) = (0.0, 0.0, f64::NEG_INFINITY);
    let mut partials = Vec::new();
    let mut hit = None;
    for n in 1..=terms {
        let nf = n as f64;
        let r = floor_ratio(log_x(n));
        // with L = 3a: N a^n/L = r/n², L/(L+a) = 3/4, (L−2a)/(2a) = 1/2
        conv += r / (nf * nf);
        div += r / (nf * nf) * 0.75 * 0.5f64.ln();
        best = best.max(div);
        if hit.is_none() && div > 10.0 {
            hit = Some(n);
        }
        if n == terms || (n >= 10 && (n as f64).log10().fract() == 0.0) {
            partials.push((n, div));
        }
    }
    SeriesReport { terms, convergent_sum: conv, divergent_partials: partials, divergent_max: best, exceeds_ten_at: hit }
}
