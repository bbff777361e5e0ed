use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use charflow_core::counterex::{analytic_series, cantor, counterexample1, run_block};
use charflow_core::entropy::{dissipation_measure, entropy_flux, kruzkov_pair, max_kruzkov_violation, EntropyPair, Sign};
use charflow_core::flux::{build_pl_flux, grid_step, PlFlux, SmoothFlux};
use charflow_core::fronttrack::{solve, FtSolution};
use charflow_core::lagrange::{build_family_with, classify, FamilyOptions, Region};
use charflow_core::laxoracle::{lax_profile, PotentialDatum};
use charflow_core::pwc::Pwc;
use charflow_core::riemann::{solve_channel, solve_riemann, ChannelProblem, Polyline};
use charflow_core::scenario::{parse_scenario, DatumSpec, Scenario, VerifyToggles};
use charflow_core::verify::{self, VerifyReport};
use charflow_core::Error as CoreError;

use crate::output::{ensure_dir, write_csv, write_csv_with_header, write_json};
use crate::{Check, Cli, Cmd, FluxKind, Outcome};

/// Grid exponent for `riemann` and `channel` without a scenario.
const DEFAULT_K: u32 = 8;

fn input(msg: impl Into<String>) -> anyhow::Error {
    CoreError::InvalidInput(msg.into()).into()
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.cmd {
        Cmd::Solve { times } => cmd_solve(cli, times),
        Cmd::Riemann { ul, ur, flux } => cmd_riemann(cli, *ul, *ur, *flux),
        Cmd::Channel { gamma1, gamma2, a, b, flux, nt, nx } => cmd_channel(cli, gamma1, gamma2, *a, *b, *flux, *nt, *nx),
        Cmd::Characteristics { y_grid, w_resolution } => cmd_characteristics(cli, *y_grid, *w_resolution),
        Cmd::Classify { points, y_grid, w_resolution } => cmd_classify(cli, points, *y_grid, *w_resolution),
        Cmd::Dissipation { entropy } => cmd_dissipation(cli, entropy),
        Cmd::Oracle { datum, t, grid } => cmd_oracle(cli, datum, *t, *grid),
        Cmd::Counterexample1 { levels, sample_level, per_component } => {
            cmd_counterexample1(cli, *levels, *sample_level, *per_component)
        }
        Cmd::Counterexample2 { blocks, series_terms } => cmd_counterexample2(cli, blocks, *series_terms),
        Cmd::Verify { check, bumps, pairs } => cmd_verify(cli, *check, *bumps, *pairs),
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    ensure_dir(&dir)?;
    Ok(dir)
}

fn load_scenario(path: &Path, cli: &Cli) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| input(format!("reading {}: {e}", path.display())))?;
    let mut sc = parse_scenario(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(k) = cli.k {
        sc.k = k;
    }
    if let Some(t) = cli.until {
        sc.horizon = t;
    }
    sc.validate()?;
    Ok(sc)
}

fn single_scenario(cli: &Cli) -> Result<Scenario> {
    match cli.scenario.as_slice() {
        [p] => load_scenario(p, cli),
        [] => Err(input("this subcommand needs --scenario")),
        _ => Err(input("this subcommand takes a single --scenario")),
    }
}

fn seed(cli: &Cli) -> Result<u64> {
    if let Some(s) = cli.seed {
        return Ok(s);
    }
    match std::env::var("CHARFLOW_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| input(format!("CHARFLOW_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn pool(cli: &Cli) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(input("--workers must be at least 1"));
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn pl_flux(kind: FluxKind, k: u32, lo: f64, hi: f64) -> Result<PlFlux> {
    let h = grid_step(k);
    let lo = (lo / h).floor() * h;
    let hi = ((hi / h).ceil() * h).max(lo + h);
    let m = lo.abs().max(hi.abs());
    let smooth = match kind {
        FluxKind::Burgers => SmoothFlux::burgers(m),
        FluxKind::Cubic => SmoothFlux::cubic(m),
    };
    Ok(build_pl_flux(&smooth, k, (lo, hi))?)
}

fn write_timing(dir: &Path, start: Instant) -> Result<()> {
    #[derive(Serialize)]
    struct Timing {
        wall_seconds: f64,
    }
    write_json(&dir.join("timing.json"), &Timing { wall_seconds: start.elapsed().as_secs_f64() })
}

#[derive(Serialize)]
struct FrontRow {
    id: usize,
    t_birth: f64,
    x_birth: f64,
    t_death: Option<f64>,
    x_death: Option<f64>,
    u_left: f64,
    u_right: f64,
    speed: f64,
}

#[derive(Serialize)]
struct EventRow {
    id: usize,
    t: f64,
    x: f64,
    incoming: String,
    outgoing: String,
    cancelled: String,
}

#[derive(Serialize)]
struct SampleRow {
    t: f64,
    x_lo: f64,
    x_hi: f64,
    u: f64,
}

#[derive(Serialize)]
struct SolveSummary {
    scenario: Option<String>,
    k: u32,
    horizon: f64,
    events: usize,
    fronts: usize,
    conservation_error: f64,
    max_dissipation_sign_violation: f64,
    max_weak_residual: f64,
}

fn join<T: ToString>(items: impl IntoIterator<Item = T>) -> String {
    items.into_iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

fn write_fronts(dir: &Path, sol: &FtSolution) -> Result<()> {
    write_csv_with_header(
        &dir.join("fronts.csv"),
        &["id", "t_birth", "x_birth", "t_death", "x_death", "u_left", "u_right", "speed"],
        sol.fronts.iter().map(|f| FrontRow {
            id: f.id,
            t_birth: f.t_birth,
            x_birth: f.x_birth,
            t_death: f.t_death,
            x_death: f.x_death,
            u_left: f.u_left,
            u_right: f.u_right,
            speed: f.speed,
        }),
    )
}

fn cmd_solve(cli: &Cli, times: &[f64]) -> Result<Outcome> {
    let start = Instant::now();
    let sc = single_scenario(cli)?;
    let dir = out_dir(cli)?;
    let (f, u0) = sc.build()?;
    let sol = solve(&f, &u0, sc.horizon)?;
    log::info!("{} fronts, {} events", sol.fronts.len(), sol.events.len());

    let times = if times.is_empty() { verify::time_grid(sc.horizon, 4) } else { times.to_vec() };
    if let Some(&t) = times.iter().find(|&&t| !(0.0..=sc.horizon).contains(&t)) {
        return Err(input(format!("sample time {t} outside [0, {}]", sc.horizon)));
    }

    write_fronts(&dir, &sol)?;
    write_csv_with_header(
        &dir.join("events.csv"),
        &["id", "t", "x", "incoming", "outgoing", "cancelled"],
        sol.events.iter().map(|e| EventRow {
            id: e.id,
            t: e.t,
            x: e.x,
            incoming: join(&e.incoming),
            outgoing: join(&e.outgoing),
            cancelled: join(e.cancelled.iter().map(|(a, b)| format!("{a}:{b}"))),
        }),
    )?;
    let mut samples = Vec::new();
    for &t in &times {
        for (x_lo, x_hi, u) in sol.sample(t)?.pieces() {
            samples.push(SampleRow { t, x_lo, x_hi, u });
        }
    }
    write_csv(&dir.join("samples.csv"), samples)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let window = sc.window_or_default(&f, &u0);
    let bumps = verify::random_bumps(&mut rng, sc.horizon, window, 5);
    let summary = SolveSummary {
        scenario: sc.name.clone(),
        k: sc.k,
        horizon: sc.horizon,
        events: sol.events.len(),
        fronts: sol.fronts.len(),
        conservation_error: verify::conservation_error(&sol, &times)?,
        max_dissipation_sign_violation: max_kruzkov_violation(&sol).max(0.0),
        max_weak_residual: verify::max_weak_residual(&sol, &verify::kruzkov_family(&f, 4), &bumps)?,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    write_timing(&dir, start)?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct WaveRow {
    speed: f64,
    u_before: f64,
    u_after: f64,
}

fn cmd_riemann(cli: &Cli, ul: f64, ur: f64, kind: FluxKind) -> Result<Outcome> {
    let f = if cli.scenario.is_empty() {
        pl_flux(kind, cli.k.unwrap_or(DEFAULT_K), ul.min(ur), ul.max(ur))?
    } else {
        single_scenario(cli)?.build()?.0
    };
    let fan = solve_riemann(&f, ul, ur)?;
    let rows = fan.waves.iter().map(|w| WaveRow { speed: w.speed, u_before: w.u_before, u_after: w.u_after });
    let header = ["speed", "u_before", "u_after"];
    match &cli.out {
        Some(_) => write_csv_with_header(&out_dir(cli)?.join("riemann.csv"), &header, rows)?,
        None => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(std::io::stdout());
            w.write_record(header)?;
            for r in rows {
                w.serialize(r)?;
            }
            w.flush()?;
        }
    }
    Ok(Outcome::Ok)
}

fn parse_polyline(s: &str) -> Result<Polyline> {
    let pts = s
        .split(',')
        .map(|p| {
            let (t, x) = p.split_once(':').ok_or_else(|| input(format!("polyline vertex {p:?} is not t:x")))?;
            let num = |v: &str| v.trim().parse::<f64>().map_err(|_| input(format!("bad number {v:?} in polyline")));
            Ok((num(t)?, num(x)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Polyline::new(pts)?)
}

#[derive(Serialize)]
struct ChannelRow {
    t: f64,
    x: f64,
    u: f64,
    v: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_channel(cli: &Cli, g1: &str, g2: &str, a: f64, b: f64, kind: FluxKind, nt: usize, nx: usize) -> Result<Outcome> {
    if nt == 0 || nx == 0 {
        return Err(input("--nt and --nx must be positive"));
    }
    let flux = if cli.scenario.is_empty() {
        pl_flux(kind, cli.k.unwrap_or(DEFAULT_K), a.min(b), a.max(b))?
    } else {
        single_scenario(cli)?.build()?.0
    };
    let sol = solve_channel(ChannelProblem { gamma1: parse_polyline(g1)?, gamma2: parse_polyline(g2)?, a, b, flux })?;
    let rows = sol.sample_grid(nt, nx)?;
    write_csv(&out_dir(cli)?.join("channel.csv"), rows.into_iter().map(|(t, x, u, v)| ChannelRow { t, x, u, v }))?;
    Ok(Outcome::Ok)
}

fn family(cli: &Cli, y_grid: usize, w_resolution: usize) -> Result<(Scenario, charflow_core::lagrange::BoundaryFamily)> {
    let sc = single_scenario(cli)?;
    let (f, u0) = sc.build()?;
    let sol = solve(&f, &u0, sc.horizon)?;
    let opts = FamilyOptions { w_resolution, pencil: y_grid, window: sc.window, ..FamilyOptions::default() };
    let fam = build_family_with(&sol, &opts)?;
    if fam.order_repairs > 0 {
        log::warn!("{} curves needed order repairs", fam.order_repairs);
    }
    Ok((sc, fam))
}

#[derive(Serialize)]
struct CurveRow {
    y: f64,
    t: f64,
    x: f64,
    w: f64,
    #[serde(rename = "T")]
    terminal: Option<f64>,
}

fn cmd_characteristics(cli: &Cli, y_grid: usize, w_resolution: usize) -> Result<Outcome> {
    let (_, fam) = family(cli, y_grid, w_resolution)?;
    let ys = fam.y_positions();
    let mut rows = Vec::new();
    for (c, &y) in fam.curves.iter().zip(&ys) {
        for &(t, x) in &c.path.pts {
            rows.push(CurveRow { y, t, x, w: c.w, terminal: c.terminal });
        }
    }
    write_csv_with_header(&out_dir(cli)?.join("curves.csv"), &["y", "t", "x", "w", "T"], rows)?;
    Ok(Outcome::Ok)
}

#[derive(serde::Deserialize)]
struct PointRow {
    t: f64,
    x: f64,
}

#[derive(Serialize)]
struct LabelRow {
    t: f64,
    x: f64,
    region: &'static str,
    jump: bool,
}

fn region_name(r: Region) -> &'static str {
    match r {
        Region::A1 => "A1",
        Region::A2 => "A2",
        Region::B => "B",
        Region::C => "C",
        Region::Unresolved => "unresolved",
    }
}

fn cmd_classify(cli: &Cli, points: &Path, y_grid: usize, w_resolution: usize) -> Result<Outcome> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(points)
        .map_err(|e| input(format!("reading {}: {e}", points.display())))?;
    let pts: Vec<PointRow> = rdr
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| input(format!("{}: expected columns t,x: {e}", points.display())))?;
    let (_, fam) = family(cli, y_grid, w_resolution)?;
    let rows = pts
        .iter()
        .map(|p| {
            let l = classify(&fam, p.t, p.x)?;
            Ok(LabelRow { t: p.t, x: p.x, region: region_name(l.region), jump: l.jump })
        })
        .collect::<Result<Vec<_>>>()?;
    write_csv_with_header(&out_dir(cli)?.join("labels.csv"), &["t", "x", "region", "jump"], rows)?;
    Ok(Outcome::Ok)
}

fn parse_entropy(spec: &str, f: &PlFlux) -> Result<EntropyPair> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["kruzkov", sign, k] => {
            let sign = match *sign {
                "+" => Sign::Plus,
                "-" => Sign::Minus,
                s => return Err(input(format!("kruzkov sign must be + or -, got {s:?}"))),
            };
            let k: f64 = k.parse().map_err(|_| input(format!("bad kruzkov level {k:?}")))?;
            Ok(kruzkov_pair(f, k, sign))
        }
        ["quadratic"] => Ok(entropy_flux(f, "quadratic", |u| 0.5 * u * u, |u| u)),
        _ => Err(input(format!("unknown entropy {spec:?} (expected kruzkov:+:k, kruzkov:-:k or quadratic)"))),
    }
}

fn cmd_dissipation(cli: &Cli, entropy: &str) -> Result<Outcome> {
    let sc = single_scenario(cli)?;
    let (f, u0) = sc.build()?;
    let pair = parse_entropy(entropy, &f)?;
    let sol = solve(&f, &u0, sc.horizon)?;
    let mu = dissipation_measure(&sol, &pair);
    write_csv_with_header(&out_dir(cli)?.join("atoms.csv"), &["front_id", "rate", "t_start", "t_end"], &mu.atoms)?;
    Ok(Outcome::Ok)
}

#[derive(Serialize)]
struct OracleRow {
    x: f64,
    u: f64,
}

fn cmd_oracle(cli: &Cli, datum: &str, t: f64, grid: usize) -> Result<Outcome> {
    if grid == 0 || !(t > 0.0 && t.is_finite()) {
        return Err(input("oracle needs --grid ≥ 1 and --t > 0"));
    }
    let u0 = match datum.parse::<DatumSpec>()? {
        DatumSpec::Cantor { n } => cantor(n)?.indicator(),
        DatumSpec::Indicator { lo, hi, value } if lo < hi => Pwc::indicator(lo, hi, value),
        DatumSpec::Indicator { lo, hi, .. } => return Err(CoreError::InvalidInterval { a: lo, b: hi }.into()),
        _ => return Err(input("oracle takes cantor:n or indicator:lo:hi:v")),
    };
    let p = PotentialDatum::new(&u0);
    let reach = p.max_abs_u() * t + 1.0;
    let lo = u0.breaks.first().copied().unwrap_or(0.0) - reach;
    let hi = u0.breaks.last().copied().unwrap_or(0.0) + reach;
    let prof = lax_profile(&p, t, lo, hi, grid)?;
    let rows = (0..=grid).map(|i| {
        let x = lo + (hi - lo) * i as f64 / grid as f64;
        OracleRow { x, u: prof.eval(x) }
    });
    write_csv(&out_dir(cli)?.join("oracle.csv"), rows)?;
    Ok(Outcome::Ok)
}

fn cmd_counterexample1(cli: &Cli, levels: u32, sample_level: Option<u32>, per_component: u32) -> Result<Outcome> {
    if levels == 0 || per_component == 0 {
        return Err(input("--levels and --per-component must be positive"));
    }
    let lv: Vec<u32> = (1..=levels).collect();
    let rows = counterexample1(&lv, sample_level.unwrap_or(levels.max(8)), per_component)?;
    write_csv(&out_dir(cli)?.join("criterion.csv"), &rows)?;
    Ok(Outcome::Ok)
}

fn parse_blocks(s: &str) -> Result<Vec<u32>> {
    let bad = || input(format!("--blocks {s:?}: expected a..b or n"));
    let (a, b) = match s.split_once("..") {
        Some((a, b)) => (a.parse().map_err(|_| bad())?, b.trim_start_matches('=').parse().map_err(|_| bad())?),
        None => {
            let n = s.parse().map_err(|_| bad())?;
            (n, n)
        }
    };
    if a == 0 || b < a {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

#[derive(Serialize)]
struct BlockRow {
    n: u32,
    d_n: f64,
    t1: f64,
    tv_integral: f64,
    theoretical_bound: f64,
}

fn cmd_counterexample2(cli: &Cli, blocks: &str, series_terms: u32) -> Result<Outcome> {
    let start = Instant::now();
    let ns = parse_blocks(blocks)?;
    let k = cli.k.unwrap_or(14);
    let dir = out_dir(cli)?;
    let runs = pool(cli)?.install(|| ns.par_iter().map(|&n| run_block(n, k)).collect::<Vec<_>>());
    let runs = runs.into_iter().collect::<charflow_core::Result<Vec<_>>>()?;
    write_csv(
        &dir.join("blocks.csv"),
        runs.iter().map(|r| BlockRow {
            n: r.n,
            d_n: r.d_n,
            t1: r.t1,
            tv_integral: r.tv_integral,
            theoretical_bound: r.theoretical_bound,
        }),
    )?;
    #[derive(Serialize)]
    struct Report<'a> {
        blocks: &'a [charflow_core::counterex::BlockRun],
        series: charflow_core::counterex::SeriesReport,
    }
    write_json(&dir.join("series.json"), &Report { blocks: &runs, series: analytic_series(series_terms) })?;
    write_timing(&dir, start)?;
    Ok(Outcome::Ok)
}

fn toggles(check: Check, base: VerifyToggles) -> VerifyToggles {
    let only = |c: Check| check == c;
    match check {
        Check::All => base,
        _ => VerifyToggles {
            conservation: only(Check::Conservation),
            admissibility: only(Check::Admissibility),
            weak_residual: only(Check::Concentration),
            initial_trace: only(Check::Trace),
            contraction: only(Check::Contraction),
            oracle: only(Check::Oracle),
        },
    }
}

#[derive(Serialize)]
struct VerifySummary {
    seed: u64,
    scenarios: usize,
    events: usize,
    conservation_error: Option<f64>,
    max_dissipation_sign_violation: Option<f64>,
    max_weak_residual: Option<f64>,
    max_contraction_increase: Option<f64>,
    max_oracle_l1: Option<f64>,
    passed: bool,
    reports: Vec<VerifyReport>,
}

fn max_of(reports: &[VerifyReport], get: impl Fn(&VerifyReport) -> Option<f64>) -> Option<f64> {
    reports.iter().filter_map(get).reduce(f64::max)
}

fn cmd_verify(cli: &Cli, check: Check, bumps: usize, pairs: usize) -> Result<Outcome> {
    let start = Instant::now();
    if cli.scenario.is_empty() {
        return Err(input("verify needs at least one --scenario"));
    }
    let seed = seed(cli)?;
    let mut scenarios = cli
        .scenario
        .iter()
        .map(|p| {
            let mut sc = load_scenario(p, cli)?;
            sc.verify = toggles(check, sc.verify);
            Ok((p.display().to_string(), sc))
        })
        .collect::<Result<Vec<_>>>()?;
    scenarios.sort_by(|a, b| a.0.cmp(&b.0));
    let results = pool(cli)?.install(|| {
        scenarios
            .par_iter()
            .map(|(path, sc)| {
                let mut r = verify::verify_scenario(sc, seed, bumps, pairs)?;
                r.scenario.get_or_insert_with(|| path.clone());
                Ok(r)
            })
            .collect::<Vec<charflow_core::Result<VerifyReport>>>()
    });
    let reports = results.into_iter().collect::<charflow_core::Result<Vec<_>>>()?;
    let summary = VerifySummary {
        seed,
        scenarios: reports.len(),
        events: reports.iter().map(|r| r.events).sum(),
        conservation_error: max_of(&reports, |r| r.conservation_error),
        max_dissipation_sign_violation: max_of(&reports, |r| r.max_dissipation_sign_violation),
        max_weak_residual: max_of(&reports, |r| r.max_weak_residual),
        max_contraction_increase: max_of(&reports, |r| r.contraction_increase),
        max_oracle_l1: max_of(&reports, |r| r.oracle_l1),
        passed: reports.iter().all(|r| r.passed),
        reports,
    };
    let dir = out_dir(cli)?;
    write_json(&dir.join("summary.json"), &summary)?;
    write_timing(&dir, start)?;
    Ok(if summary.passed { Outcome::Ok } else { Outcome::ChecksFailed })
}
