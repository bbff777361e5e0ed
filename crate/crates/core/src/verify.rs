//! Solution-level checks shared by the command line and the test suites:
//! conservation, entropy admissibility, concentration of the dissipation on
//! fronts, initial trace, L¹ contraction and the Lax-Oleinik comparison.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy::{initial_trace_error, kruzkov_pair, max_kruzkov_violation, weak_residual, Bump, EntropyPair, Sign};
use crate::error::Result;
use crate::flux::{Flux, PlFlux};
use crate::fronttrack::{l1_distance, solve, FtSolution};
use crate::laxoracle::{lax_profile, PotentialDatum};
use crate::pwc::Pwc;
use crate::scenario::Scenario;

/// Evenly spaced times `horizon·i/n`, `i = 0..=n`.
pub fn time_grid(horizon: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| horizon * i as f64 / n as f64).collect()
}

/// Interval containing the whole front graph with a unit margin.
pub fn domain_window(sol: &FtSolution) -> (f64, f64) {
    let (lo, hi) = sol.front_hull();
    (lo - 1.0, hi + 1.0)
}

/// `max_t |∫u(t) - ∫u0 + t(f(u_R) - f(u_L))|` over `[lo, hi]` containing
/// every front.
pub fn conservation_error(sol: &FtSolution, times: &[f64]) -> Result<f64> {
    let (lo, hi) = domain_window(sol);
    let f = &sol.flux;
    let m0 = sol.datum.integral(lo, hi);
    let boundary = f.eval(sol.datum.right_value()) - f.eval(sol.datum.left_value());
    let mut worst: f64 = 0.0;
    for &t in times {
        let m = sol.sample(t)?.integral(lo, hi);
        worst = worst.max((m - m0 + t * boundary).abs());
    }
    Ok(worst)
}

/// Largest increase of `TV(u(t))` between consecutive times.
pub fn tv_increase(sol: &FtSolution, times: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for &t in times {
        let tv = sol.sample(t)?.total_variation();
        if let Some(p) = prev {
            worst = worst.max(tv - p);
        }
        prev = Some(tv);
    }
    Ok(worst)
}

/// Kruzkov pairs with `k` spread over the flux domain, both signs.
pub fn kruzkov_family(f: &PlFlux, count: usize) -> Vec<EntropyPair> {
    let (lo, hi) = (f.u_min(), f.u_max());
    let per_sign = count.div_ceil(2).max(1);
    let mut pairs = Vec::with_capacity(count);
    for i in 0..per_sign {
        let k = lo + (hi - lo) * (i as f64 + 0.5) / per_sign as f64;
        for sign in [Sign::Plus, Sign::Minus] {
            if pairs.len() < count {
                pairs.push(kruzkov_pair(f, k, sign));
            }
        }
    }
    pairs
}

/// Random bumps whose support lies in `(0, horizon) × window`.
pub fn random_bumps(rng: &mut ChaCha8Rng, horizon: f64, window: (f64, f64), n: usize) -> Vec<Bump> {
    let w = window.1 - window.0;
    (0..n)
        .map(|_| {
            let rt = rng.gen_range(0.05..0.45) * horizon;
            let tc = rng.gen_range(rt..horizon - rt);
            let rx = rng.gen_range(0.05..0.45) * w;
            let xc = rng.gen_range(window.0 + rx..window.1 - rx);
            Bump { tc, rt, xc, rx }
        })
        .collect()
}

/// `max |weak_residual|` over every pair and bump.
pub fn max_weak_residual(sol: &FtSolution, pairs: &[EntropyPair], bumps: &[Bump]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for p in pairs {
        for b in bumps {
            worst = worst.max(weak_residual(sol, p, b)?.abs());
        }
    }
    Ok(worst)
}

/// Datum with the same far-field states, jittered breakpoints and fresh
/// interior grid values, so the two solutions stay at finite L¹ distance.
pub fn perturbed_datum(rng: &mut ChaCha8Rng, f: &PlFlux, u0: &Pwc) -> Pwc {
    let gap = u0.breaks.windows(2).map(|w| w[1] - w[0]).fold(1.0, f64::min);
    let d = 0.4 * gap;
    let breaks = u0.breaks.iter().map(|&x| x + rng.gen_range(-d..d)).collect();
    let n = u0.values.len();
    let values = u0
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| if i == 0 || i + 1 == n { v } else { f.u_of(rng.gen_range(f.j_min()..=f.j_max())) })
        .collect();
    Pwc { breaks, values }
}

/// Largest increase of `t ↦ ‖u(t) - v(t)‖₁` between consecutive times.
pub fn contraction_increase(a: &FtSolution, b: &FtSolution, times: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut prev: Option<f64> = None;
    for &t in times {
        let d = l1_distance(a, b, t)?;
        if let Some(p) = prev {
            worst = worst.max(d - p);
        }
        prev = Some(d);
    }
    Ok(worst)
}

/// `‖u(t) - u0‖₁` on `[-l, l]` at `t = horizon·2^-j`, `j = 1..=levels`.
pub fn initial_trace_sequence(sol: &FtSolution, l: f64, levels: u32) -> Result<Vec<f64>> {
    (1..=levels).map(|j| initial_trace_error(sol, sol.horizon * 0.5f64.powi(j as i32), l)).collect()
}

/// L¹ distance at `t` between front tracking and the Lax-Oleinik formula for
/// Burgers on the window.
pub fn oracle_distance(sol: &FtSolution, t: f64, window: (f64, f64), cells: usize) -> Result<f64> {
    let p = PotentialDatum::new(&sol.datum);
    let prof = lax_profile(&p, t, window.0, window.1, cells)?;
    Ok(prof.l1_distance(&sol.sample(t)?))
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct VerifyReport {
    pub scenario: Option<String>,
    pub seed: u64,
    pub events: usize,
    pub fronts: usize,
    pub conservation_error: Option<f64>,
    pub tv_increase: Option<f64>,
    pub max_dissipation_sign_violation: Option<f64>,
    pub max_weak_residual: Option<f64>,
    pub initial_trace: Option<Vec<f64>>,
    pub contraction_increase: Option<f64>,
    pub oracle_l1: Option<f64>,
    pub passed: bool,
}

/// Magnitude of the flux terms over the window: `1 + ‖u‖∞(1 + max|s|)·width`.
/// Residual tolerances are relative to it.
pub fn scenario_scale(f: &PlFlux, window: (f64, f64)) -> f64 {
    1.0 + f.u_max().abs().max(f.u_min().abs()) * (1.0 + f.max_abs_speed()) * (window.1 - window.0)
}

pub const CONSERVATION_TOL: f64 = 1e-10;
pub const SIGN_TOL: f64 = 1e-12;
pub const WEAK_RESIDUAL_TOL: f64 = 1e-8;
pub const CONTRACTION_TOL: f64 = 1e-10;

/// Runs the checks enabled in the scenario. `bumps` random test functions and
/// `pairs` Kruzkov pairs are used for the concentration check.
pub fn verify_scenario(sc: &Scenario, seed: u64, bumps: usize, pairs: usize) -> Result<VerifyReport> {
    let (f, u0) = sc.build()?;
    let sol = solve(&f, &u0, sc.horizon)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let times = time_grid(sc.horizon, 16);
    let window = sc.window_or_default(&f, &u0);
    let scale = scenario_scale(&f, window);
    let mut r = VerifyReport {
        scenario: sc.name.clone(),
        seed,
        events: sol.events.len(),
        fronts: sol.fronts.len(),
        passed: true,
        ..VerifyReport::default()
    };
    let v = &sc.verify;
    if v.conservation {
        let e = conservation_error(&sol, &times)?;
        let tv = tv_increase(&sol, &times)?;
        r.passed &= e <= CONSERVATION_TOL * scale && tv <= CONSERVATION_TOL * scale;
        r.conservation_error = Some(e);
        r.tv_increase = Some(tv);
    }
    if v.admissibility {
        let s = max_kruzkov_violation(&sol).max(0.0);
        r.passed &= s <= SIGN_TOL * scale;
        r.max_dissipation_sign_violation = Some(s);
    }
    if v.weak_residual {
        let b = random_bumps(&mut rng, sc.horizon, window, bumps);
        let w = max_weak_residual(&sol, &kruzkov_family(&f, pairs), &b)?;
        r.passed &= w <= WEAK_RESIDUAL_TOL * scale;
        r.max_weak_residual = Some(w);
    }
    if v.initial_trace {
        let seq = initial_trace_sequence(&sol, window.0.abs().max(window.1.abs()), 12)?;
        r.passed &= seq.windows(2).all(|w| w[1] <= w[0]);
        r.initial_trace = Some(seq);
    }
    if v.contraction {
        let other = solve(&f, &perturbed_datum(&mut rng, &f, &u0), sc.horizon)?;
        let c = contraction_increase(&sol, &other, &times)?;
        r.passed &= c <= CONTRACTION_TOL * scale;
        r.contraction_increase = Some(c);
    }
    if v.oracle {
        let d = oracle_distance(&sol, sc.horizon, window, 4096)?;
        r.passed &= d <= 5.0 * f.h();
        r.oracle_l1 = Some(d);
    }
    Ok(r)
}
