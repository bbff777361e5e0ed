//! Families of boundary characteristics built on top of a front-tracking
//! solution, the Lagrangian flow they induce, the A/B/C partition of the
//! half-plane and the straight characteristics used by cylinder balances.
//!
//! Three kinds of curves are created. Pencil lines leave `t = 0` inside the
//! constant pieces of the datum. Front curves carry an off-grid value `w`
//! and follow whichever front contains `w`. Wedge lines leave each interior
//! vertex of a fan. At an interaction every arriving curve is assigned to the
//! outgoing fan through the running extreme of the values it carries, which
//! keeps the family ordered.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::entropy::{CylinderSide, EntropyPair};
use crate::error::{Error, Result};
use crate::flux::{default_ld_tol, ld_component_of, ld_components_pl, Flux, PlFlux};
use crate::fronttrack::{Front, FtSolution};
use crate::riemann::Polyline;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    Pencil,
    Front,
    Wedge,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryCurve {
    pub kind: CurveKind,
    pub path: Polyline,
    /// Carried value.
    pub w: f64,
    /// Time at which `(γ, w)` stops being admissible; `None` means open.
    pub terminal: Option<f64>,
    /// Time from which the curve has an identity of its own. Wedge lines born
    /// at an interaction share the path of a neighbour before that time.
    pub born: f64,
}

impl BoundaryCurve {
    pub fn x_at(&self, t: f64) -> f64 {
        self.path.eval(t)
    }

    pub fn alive_at(&self, t: f64) -> bool {
        self.terminal.is_none_or(|tt| t < tt)
    }
}

#[derive(Debug, Clone)]
pub struct FamilyOptions {
    /// Front curves per grid cell of a front's range.
    pub w_resolution: usize,
    /// Number of pencil lines spread uniformly over the window.
    pub pencil: usize,
    /// Defaults to the hull of the front graph padded by a quarter of its width.
    pub window: Option<(f64, f64)>,
    /// Reference time for the parameterization `y = γ(ε)`.
    pub eps: f64,
}

impl Default for FamilyOptions {
    fn default() -> Self {
        Self { w_resolution: 1, pencil: 64, window: None, eps: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryFamily {
    pub sol: FtSolution,
    /// Curves in increasing order; the index is the label `y`.
    pub curves: Vec<BoundaryCurve>,
    pub window: (f64, f64),
    pub eps: f64,
    /// Curves that sat inside an interaction block without being registered
    /// as arriving. Zero on every consistent run.
    pub order_repairs: usize,
}

#[derive(Debug, Clone, Copy)]
enum State {
    Ride(usize),
    Line { b: f64, c: f64 },
}

struct Work {
    kind: CurveKind,
    state: State,
    w: f64,
    e: f64,
    terminal: Option<f64>,
    born: f64,
    pts: Vec<(f64, f64)>,
    version: u32,
}

impl Work {
    fn push(&mut self, t: f64, x: f64) {
        if let Some(last) = self.pts.last_mut() {
            if t <= last.0 {
                last.1 = x;
                return;
            }
        }
        self.pts.push((t, x));
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Hit {
    Event(usize),
    Absorb { front: usize, t: f64 },
}

#[derive(Debug, PartialEq)]
struct Absorption {
    t: f64,
    curve: usize,
    front: usize,
    version: u32,
}

impl Eq for Absorption {}

impl Ord for Absorption {
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.curve.cmp(&self.curve))
    }
}

impl PartialOrd for Absorption {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn direction(incr: bool, v: f64) -> f64 {
    if incr {
        v
    } else {
        -v
    }
}

fn clamp_range(v: f64, a: f64, b: f64) -> f64 {
    v.clamp(a.min(b), a.max(b))
}

/// Off-grid values inside the range of a front, ordered from `u_left` to
/// `u_right`.
fn front_values(f: &PlFlux, fr: &Front, m: usize) -> Vec<f64> {
    let (lo, hi) = (fr.j_left.min(fr.j_right), fr.j_left.max(fr.j_right));
    let h = f.h();
    let mut v = Vec::new();
    for j in lo..hi {
        for i in 0..m {
            v.push(f.u_of(j) + (i as f64 + 0.5) * h / m as f64);
        }
    }
    if fr.j_left > fr.j_right {
        v.reverse();
    }
    v
}

fn wedge_slope(f: &PlFlux, q: f64, s_before: f64, s_after: f64) -> f64 {
    let c = f.deriv(q);
    c.clamp(s_before.min(s_after), s_before.max(s_after))
}


enum Placement {
    Ride(usize),
    Vertex(usize),
}

struct Builder<'a> {
    sol: &'a FtSolution,
    wres: usize,
    work: Vec<Work>,
    riders: Vec<Vec<usize>>,
    line_arrivals: Vec<Vec<(usize, u32)>>,
    absorptions: BinaryHeap<Absorption>,
    order: Vec<usize>,
    rank: Vec<usize>,
    tol_x: f64,
    tol_t: f64,
    tol_u: f64,
    repairs: usize,
}

impl<'a> Builder<'a> {
    fn new(sol: &'a FtSolution, wres: usize, scale: f64) -> Self {
        Self {
            sol,
            wres,
            work: Vec::new(),
            riders: vec![Vec::new(); sol.fronts.len()],
            line_arrivals: vec![Vec::new(); sol.events.len()],
            absorptions: BinaryHeap::new(),
            order: Vec::new(),
            rank: Vec::new(),
            tol_x: 1e-10 * scale,
            tol_t: 1e-10 * (1.0 + sol.horizon),
            tol_u: 1e-9 * sol.flux.h(),
            repairs: 0,
        }
    }

    fn rerank(&mut self) {
        self.rank.resize(self.work.len(), usize::MAX);
        for (i, &c) in self.order.iter().enumerate() {
            self.rank[c] = i;
        }
    }

    fn add(&mut self, kind: CurveKind, state: State, w: f64, t: f64, x: f64) -> usize {
        let id = self.work.len();
        self.work.push(Work { kind, state, w, e: w, terminal: None, born: t, pts: vec![(t, x)], version: 0 });
        if let State::Ride(f) = state {
            self.riders[f].push(id);
        }
        id
    }

    fn pencil_line(&mut self, x0: f64, v: f64) -> usize {
        let c = self.sol.flux.deriv(v);
        self.add(CurveKind::Pencil, State::Line { b: x0, c }, v, 0.0, x0)
    }

    /// First contact of the line `x = b + c·t`, `t > t0`, with the front graph.
    fn first_hit(&self, b: f64, c: f64, t0: f64) -> Option<Hit> {
        let horizon = self.sol.horizon;
        let mut best: Option<(f64, usize)> = None;
        for fr in &self.sol.fronts {
            let ta = fr.t_birth.max(t0);
            let tb = fr.t_end().min(horizon);
            if tb < ta {
                continue;
            }
            let da = b + c * ta - fr.x_at(ta);
            let db = b + c * tb - fr.x_at(tb);
            let cand = if da.abs() <= self.tol_x && db.abs() <= self.tol_x {
                // travelling along the front until it dies
                fr.t_death.map(|_| tb)
            } else if da.abs() <= self.tol_x {
                Some(ta)
            } else if db.abs() <= self.tol_x {
                Some(tb)
            } else if (da < 0.0) != (db < 0.0) {
                Some(ta + (tb - ta) * da / (da - db))
            } else {
                None
            };
            if let Some(t) = cand {
                if t > t0 + self.tol_t && best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, fr.id));
                }
            }
        }
        let (t, id) = best?;
        let fr = &self.sol.fronts[id];
        if let (Some(td), Some(e)) = (fr.t_death, fr.death_event) {
            if (t - td).abs() <= self.tol_t {
                return Some(Hit::Event(e));
            }
        }
        if let Some(e) = fr.birth_event {
            if (t - fr.t_birth).abs() <= self.tol_t {
                return Some(Hit::Event(e));
            }
        }
        Some(Hit::Absorb { front: id, t })
    }

    fn register_line(&mut self, id: usize) {
        let State::Line { b, c } = self.work[id].state else { return };
        let t0 = self.work[id].pts.last().unwrap().0;
        let v = self.work[id].version;
        match self.first_hit(b, c, t0) {
            Some(Hit::Event(e)) => self.line_arrivals[e].push((id, v)),
            Some(Hit::Absorb { front, t }) => self.absorptions.push(Absorption { t, curve: id, front, version: v }),
            None => {}
        }
    }

    fn absorb(&mut self, a: Absorption) {
        let fr = &self.sol.fronts[a.front];
        let x = fr.x_at(a.t);
        let (ul, ur) = (fr.u_left, fr.u_right);
        let wk = &mut self.work[a.curve];
        if wk.version != a.version || !matches!(wk.state, State::Line { .. }) {
            return;
        }
        wk.version += 1;
        wk.push(a.t, x);
        wk.state = State::Ride(a.front);
        wk.e = clamp_range(wk.e, ul, ur);
        if wk.terminal.is_none() {
            wk.terminal = Some(a.t);
        }
        self.riders[a.front].push(a.curve);
    }

    fn init(&mut self, pencil: &[f64]) {
        let sol = self.sol;
        let f = &sol.flux;
        let mut groups: Vec<Vec<&Front>> = Vec::new();
        for fr in sol.fronts.iter().filter(|fr| fr.birth_event.is_none()) {
            match groups.last_mut() {
                Some(g) if g[0].x_birth == fr.x_birth => g.push(fr),
                _ => groups.push(vec![fr]),
            }
        }
        let mut order = Vec::new();
        let mut pi = 0;
        for g in &groups {
            let x = g[0].x_birth;
            while pi < pencil.len() && pencil[pi] <= x + self.tol_x {
                if pencil[pi] < x - self.tol_x {
                    order.push(self.pencil_line(pencil[pi], sol.datum.eval(pencil[pi])));
                }
                pi += 1;
            }
            for (i, fr) in g.iter().enumerate() {
                for w in front_values(f, fr, self.wres) {
                    order.push(self.add(CurveKind::Front, State::Ride(fr.id), w, 0.0, x));
                }
                if let Some(nx) = g.get(i + 1) {
                    let q = fr.u_right;
                    let c = wedge_slope(f, q, fr.speed, nx.speed);
                    order.push(self.add(CurveKind::Wedge, State::Line { b: x, c }, q, 0.0, x));
                }
            }
        }
        for &x0 in &pencil[pi..] {
            order.push(self.pencil_line(x0, sol.datum.eval(x0)));
        }
        self.order = order;
        self.rerank();
        for id in 0..self.work.len() {
            self.register_line(id);
        }
    }

    fn event(&mut self, eid: usize) {
        let sol = self.sol;
        let f = &sol.flux;
        let ev = &sol.events[eid];
        let (t, x) = (ev.t, ev.x);
        let inc: Vec<&Front> = ev.incoming.iter().map(|&i| &sol.fronts[i]).collect();
        let outs: Vec<&Front> = ev.outgoing.iter().map(|&i| &sol.fronts[i]).collect();
        let ul = inc[0].u_left;
        let ur = inc[inc.len() - 1].u_right;

        let mut registered: Vec<usize> = Vec::new();
        for fr in &inc {
            registered.append(&mut self.riders[fr.id]);
        }
        for (id, v) in std::mem::take(&mut self.line_arrivals[eid]) {
            if self.work[id].version == v && matches!(self.work[id].state, State::Line { .. }) {
                registered.push(id);
            }
        }
        if registered.is_empty() {
            return;
        }
        let lo = registered.iter().map(|&c| self.rank[c]).min().unwrap();
        let hi = registered.iter().map(|&c| self.rank[c]).max().unwrap();
        let arriving: Vec<usize> = self.order[lo..=hi].to_vec();
        if arriving.len() != registered.len() {
            let mut reg = registered.clone();
            reg.sort_unstable();
            for &c in &arriving {
                if reg.binary_search(&c).is_err() {
                    self.repairs += 1;
                    if let State::Ride(fr) = self.work[c].state {
                        self.riders[fr].retain(|&r| r != c);
                    }
                }
            }
        }

        let incr = ur > ul;
        let d = |v: f64| direction(incr, v);
        let (lo_u, hi_u) = (ul.min(ur), ul.max(ur));
        // extreme of the incoming path up to the left state of each incoming front
        let mut ext = Vec::with_capacity(inc.len());
        let mut m = ul;
        for fr in &inc {
            if d(fr.u_left) > d(m) {
                m = fr.u_left;
            }
            ext.push((fr.id, m));
        }
        let mut run = f64::NAN;
        let mut r = Vec::with_capacity(arriving.len());
        for &id in &arriving {
            let e = self.work[id].e;
            run = if run.is_nan() || d(e) > d(run) { e } else { run };
            r.push(run.clamp(lo_u, hi_u));
        }
        for &id in &arriving {
            let wk = &mut self.work[id];
            if wk.terminal.is_some() {
                continue;
            }
            let keep = wk.kind == CurveKind::Front
                && wk.w > lo_u + self.tol_u
                && wk.w < hi_u - self.tol_u
                && match wk.state {
                    State::Ride(fr) => ext.iter().any(|&(id, m)| id == fr && d(wk.w) > d(m) + self.tol_u),
                    State::Line { .. } => false,
                };
            if !keep {
                wk.terminal = Some(t);
            }
        }

        let mut q = vec![ul];
        q.extend(outs.iter().map(|fr| fr.u_right));
        let nv = outs.len();
        let tol_u = self.tol_u;
        let place = |rv: f64| -> Placement {
            if nv == 0 {
                return Placement::Vertex(0);
            }
            for i in 0..nv {
                if d(rv) > d(q[i]) + tol_u && d(rv) < d(q[i + 1]) - tol_u {
                    return Placement::Ride(i);
                }
            }
            match (0..=nv).find(|&i| (rv - q[i]).abs() <= tol_u) {
                Some(0) => Placement::Ride(0),
                Some(i) if i == nv => Placement::Ride(nv - 1),
                Some(i) => Placement::Vertex(i),
                None => Placement::Ride((0..nv).rfind(|&i| d(rv) >= d(q[i])).unwrap_or(0)),
            }
        };
        let vertex_slope = |i: usize| -> f64 {
            if nv == 0 {
                f.deriv(ul)
            } else {
                wedge_slope(f, q[i], outs[i - 1].speed, outs[i].speed)
            }
        };

        let mut block = Vec::with_capacity(arriving.len() + nv);
        let mut new_lines = Vec::new();
        let mut next_v = 1;
        let mut prev: Option<usize> = None;
        let spawn = |me: &mut Self, src: usize, i: usize| -> usize {
            let c = vertex_slope(i);
            let mut pts = me.work[src].pts.clone();
            let wid = me.work.len();
            pts.retain(|p| p.0 < t);
            me.work.push(Work {
                kind: CurveKind::Wedge,
                state: State::Line { b: x - c * t, c },
                w: q[i],
                e: q[i],
                terminal: None,
                born: t,
                pts,
                version: 0,
            });
            me.work[wid].push(t, x);
            wid
        };
        for (p, &id) in arriving.iter().enumerate() {
            while next_v < nv && d(r[p]) >= d(q[next_v]) - tol_u {
                let wid = spawn(self, prev.unwrap_or(id), next_v);
                block.push(wid);
                new_lines.push(wid);
                next_v += 1;
            }
            block.push(id);
            prev = Some(id);
        }
        while next_v < nv {
            let wid = spawn(self, prev.unwrap(), next_v);
            block.push(wid);
            new_lines.push(wid);
            next_v += 1;
        }

        for (p, &id) in arriving.iter().enumerate() {
            let wk = &mut self.work[id];
            wk.push(t, x);
            wk.version += 1;
            match place(r[p]) {
                Placement::Ride(i) => {
                    let fr = outs[i];
                    wk.state = State::Ride(fr.id);
                    wk.e = clamp_range(r[p], fr.u_left, fr.u_right);
                    self.riders[fr.id].push(id);
                }
                Placement::Vertex(i) => {
                    let c = vertex_slope(i);
                    wk.state = State::Line { b: x - c * t, c };
                    wk.e = q[i];
                    new_lines.push(id);
                }
            }
        }
        self.order.splice(lo..=hi, block);
        self.rerank();
        for id in new_lines {
            self.register_line(id);
        }
    }

    fn run(&mut self) {
        for eid in 0..self.sol.events.len() {
            let te = self.sol.events[eid].t;
            while self.absorptions.peek().is_some_and(|a| a.t <= te) {
                let a = self.absorptions.pop().unwrap();
                self.absorb(a);
            }
            self.event(eid);
        }
        while let Some(a) = self.absorptions.pop() {
            self.absorb(a);
        }
        let horizon = self.sol.horizon;
        for wk in &mut self.work {
            let x = match wk.state {
                State::Ride(f) => self.sol.fronts[f].x_at(horizon),
                State::Line { b, c } => b + c * horizon,
            };
            wk.push(horizon, x);
        }
    }
}

fn default_window(sol: &FtSolution) -> (f64, f64) {
    let (lo, hi) = sol.front_hull();
    let pad = 0.25 * (hi - lo).max(1.0);
    (lo - pad, hi + pad)
}

/// Family with the default options.
pub fn build_family(sol: &FtSolution, w_resolution: usize) -> Result<BoundaryFamily> {
    build_family_with(sol, &FamilyOptions { w_resolution, ..FamilyOptions::default() })
}

pub fn build_family_with(sol: &FtSolution, opts: &FamilyOptions) -> Result<BoundaryFamily> {
    if opts.w_resolution == 0 {
        return Err(Error::InvalidInput("w_resolution must be positive".into()));
    }
    if !(opts.eps > 0.0 && opts.eps < sol.horizon) {
        return Err(Error::InvalidInput(format!("reference time {} outside (0, {})", opts.eps, sol.horizon)));
    }
    let window = opts.window.unwrap_or_else(|| default_window(sol));
    if !(window.0 < window.1) {
        return Err(Error::InvalidInterval { a: window.0, b: window.1 });
    }
    let n = opts.pencil;
    let dx = (window.1 - window.0) / n.max(1) as f64;
    let pencil: Vec<f64> = (0..n).map(|i| window.0 + (i as f64 + 0.5) * dx).collect();
    let scale = 1.0 + window.0.abs().max(window.1.abs());
    let mut b = Builder::new(sol, opts.w_resolution, scale);
    b.init(&pencil);
    b.run();
    let mut curves = Vec::with_capacity(b.order.len());
    for &id in &b.order {
        let wk = &b.work[id];
        let mut pts = wk.pts.clone();
        if pts.len() == 1 {
            pts.push((sol.horizon, pts[0].1));
        }
        curves.push(BoundaryCurve { kind: wk.kind, path: Polyline::new(pts)?, w: wk.w, terminal: wk.terminal, born: wk.born });
    }
    if b.repairs > 0 {
        log::warn!("{} curves joined an interaction without being registered", b.repairs);
    }
    Ok(BoundaryFamily { sol: sol.clone(), curves, window, eps: opts.eps, order_repairs: b.repairs })
}

impl BoundaryFamily {
    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Spatial coincidence tolerance, `1e-9` of the window width.
    pub fn tol_x(&self) -> f64 {
        1e-9 * (self.window.1 - self.window.0)
    }

    fn tol_t(&self) -> f64 {
        1e-9 * self.sol.horizon
    }

    /// Position of every curve at the reference time `ε`.
    pub fn y_positions(&self) -> Vec<f64> {
        self.curves.iter().map(|c| c.x_at(self.eps)).collect()
    }

    /// Raw positions at `t`, in label order.
    pub fn raw_positions(&self, t: f64) -> Vec<f64> {
        self.curves.iter().map(|c| c.x_at(t)).collect()
    }

    /// Every vertex time of every curve; between two consecutive ones all
    /// curves are affine.
    pub fn vertex_times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.curves.iter().flat_map(|c| c.path.pts.iter().map(|p| p.0)).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }

    /// Front through `(t, x)` within tolerance, if any.
    pub fn front_at(&self, t: f64, x: f64) -> Option<&Front> {
        let tol = self.tol_x();
        self.sol.fronts.iter().find(|fr| fr.alive_at(t) && (fr.x_at(t) - x).abs() <= tol)
    }

    /// Characteristic speed read off the front graph: the front speed on a
    /// front, `f'(u)` elsewhere.
    pub fn lambda_at(&self, t: f64, x: f64) -> Result<f64> {
        if let Some(fr) = self.front_at(t, x) {
            return Ok(fr.speed);
        }
        Ok(self.sol.flux.deriv(self.sol.value_at(t, x)?))
    }

    fn speed_tol(&self) -> f64 {
        1e-9 * (1.0 + self.sol.flux.max_abs_speed())
    }

    /// Characteristics enter the front from at least one side.
    pub fn is_compressive(&self, fr: &Front) -> bool {
        let f = &self.sol.flux;
        let tol = self.speed_tol();
        f.node_speed(fr.j_left) > fr.speed + tol || f.node_speed(fr.j_right) < fr.speed - tol
    }

    fn is_contact(&self, fr: &Front) -> bool {
        let f = &self.sol.flux;
        let tol = self.speed_tol();
        (f.node_speed(fr.j_left) - fr.speed).abs() <= tol && (f.node_speed(fr.j_right) - fr.speed).abs() <= tol
    }

    /// Largest violation of the Kruzkov boundary inequalities on `[born, T]`,
    /// with traces taken from the front graph at segment midpoints.
    pub fn admissibility_violation(&self, idx: usize) -> Result<f64> {
        let c = &self.curves[idx];
        let f = &self.sol.flux;
        let t_end = c.terminal.unwrap_or(self.sol.horizon);
        let mut ks: Vec<f64> = (f.j_min()..=f.j_max()).map(|j| f.u_of(j)).collect();
        ks.push(c.w);
        let mut worst: f64 = 0.0;
        for seg in c.path.pts.windows(2) {
            let (t1, t2) = (seg[0].0.max(c.born), seg[1].0.min(t_end));
            if t2 <= t1 {
                continue;
            }
            let tm = 0.5 * (t1 + t2);
            let xm = c.x_at(tm);
            let sigma = (seg[1].1 - seg[0].1) / (seg[1].0 - seg[0].0);
            let (um, up) = match self.front_at(tm, xm) {
                Some(fr) => (fr.u_left, fr.u_right),
                None => {
                    let u = self.sol.value_at(tm, xm)?;
                    (u, u)
                }
            };
            for &k in &ks {
                let fk = f.eval(k);
                let plus = |u: f64| if u >= k { -sigma * (u - k) + f.eval(u) - fk } else { 0.0 };
                let minus = |u: f64| if u <= k { -sigma * (k - u) + fk - f.eval(u) } else { 0.0 };
                if k >= c.w {
                    worst = worst.max(-plus(um)).max(plus(up));
                }
                if k <= c.w {
                    worst = worst.max(-minus(um)).max(minus(up));
                }
            }
        }
        Ok(worst)
    }
}

/// Lagrangian representation `(X, u, T)` induced by a family.
#[derive(Debug, Clone)]
pub struct LagrangianRep<'a> {
    pub fam: &'a BoundaryFamily,
    pub uy: Vec<f64>,
    pub ty: Vec<Option<f64>>,
    /// Largest amount by which raw curve positions fall out of label order at
    /// any vertex time.
    pub raw_order_violation: f64,
}

pub fn lagrangian(fam: &BoundaryFamily) -> LagrangianRep<'_> {
    let mut worst: f64 = 0.0;
    for t in fam.vertex_times() {
        let xs = fam.raw_positions(t);
        for w in xs.windows(2) {
            worst = worst.max(w[0] - w[1]);
        }
    }
    LagrangianRep {
        fam,
        uy: fam.curves.iter().map(|c| c.w).collect(),
        ty: fam.curves.iter().map(|c| c.terminal).collect(),
        raw_order_violation: worst,
    }
}

/// `φ(x) = (1 - ((x-c)/r)²)^4` on `|x - c| < r`.
fn bump(x: f64, c: f64, r: f64) -> f64 {
    let s = (x - c) / r;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - s * s).powi(4)
    }
}

impl LagrangianRep<'_> {
    /// `X(t, ·)`: running maximum of the raw positions, nondecreasing by
    /// construction.
    pub fn x(&self, t: f64) -> Vec<f64> {
        let mut xs = self.fam.raw_positions(t);
        for i in 1..xs.len() {
            if xs[i] < xs[i - 1] {
                xs[i] = xs[i - 1];
            }
        }
        xs
    }

    /// `|∫u φ' dx - ∫u_y d_y(φ∘X(t))|` for the bump centred at `c` with radius
    /// `r`. Both sides are sums of exact differences of `φ`; the strip between
    /// two consecutive curves alive at `t` carries the value of an adjacent
    /// line, or the mean of the two front values when both ride fronts.
    pub fn representation_residual(&self, t: f64, c: f64, r: f64) -> Result<f64> {
        let fam = self.fam;
        let u = fam.sol.sample(t)?;
        let phi = |x: f64| bump(x, c, r);
        let lhs: f64 = u
            .pieces()
            .map(|(a, b, v)| {
                let pa = if a.is_finite() { phi(a) } else { 0.0 };
                let pb = if b.is_finite() { phi(b) } else { 0.0 };
                v * (pb - pa)
            })
            .sum();
        let xs = self.x(t);
        let live: Vec<usize> = (0..fam.len()).filter(|&i| fam.curves[i].alive_at(t)).collect();
        if live.is_empty() {
            return Ok(lhs.abs());
        }
        let is_line = |i: usize| fam.curves[i].kind != CurveKind::Front;
        let mut rhs = u.left_value() * phi(xs[live[0]]);
        for w in live.windows(2) {
            let (a, b) = (w[0], w[1]);
            let v = if is_line(a) {
                self.uy[a]
            } else if is_line(b) {
                self.uy[b]
            } else {
                0.5 * (self.uy[a] + self.uy[b])
            };
            rhs += v * (phi(xs[b]) - phi(xs[a]));
        }
        rhs -= u.right_value() * phi(xs[*live.last().unwrap()]);
        Ok((lhs - rhs).abs())
    }

    /// Largest `|slope - λ|` over every segment of every curve, with `λ`
    /// read off the front graph at the segment midpoint.
    pub fn characteristic_residual(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for c in &self.fam.curves {
            for seg in c.path.pts.windows(2) {
                let (t1, x1) = seg[0];
                let (t2, x2) = seg[1];
                if t2 - t1 <= self.fam.tol_t() {
                    continue;
                }
                let slope = (x2 - x1) / (t2 - t1);
                let lam = self.fam.lambda_at(0.5 * (t1 + t2), 0.5 * (x1 + x2))?;
                worst = worst.max((slope - lam).abs());
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    A1,
    A2,
    B,
    C,
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RegionLabel {
    pub region: Region,
    pub jump: bool,
}

impl RegionLabel {
    fn new(region: Region, jump: bool) -> Self {
        Self { region, jump }
    }
}

/// A1 on compressive fronts, B strictly between two curves that met earlier,
/// C on straight rays that reach `t = 0` untouched, A2 otherwise. Points
/// within tolerance of an interaction or of `t = 0` are unresolved.
pub fn classify(fam: &BoundaryFamily, t: f64, x: f64) -> Result<RegionLabel> {
    if !(0.0..=fam.sol.horizon).contains(&t) {
        return Err(Error::Domain(format!("t = {t} outside [0, {}]", fam.sol.horizon)));
    }
    let tol_x = fam.tol_x();
    let tol_t = fam.tol_t();
    if t <= tol_t || fam.sol.events.iter().any(|e| (e.t - t).abs() <= tol_t && (e.x - x).abs() <= tol_x) {
        return Ok(RegionLabel::new(Region::Unresolved, false));
    }
    let on = fam.front_at(t, x);
    if let Some(fr) = on {
        if fam.is_compressive(fr) {
            return Ok(RegionLabel::new(Region::A1, true));
        }
    }
    let xs = fam.raw_positions(t);
    let left = (0..xs.len()).rev().find(|&i| xs[i] < x - tol_x);
    let right = (0..xs.len()).find(|&i| xs[i] > x + tol_x);
    if let (Some(a), Some(b)) = (left, right) {
        if met_before(&fam.curves[a].path, &fam.curves[b].path, t - tol_t, tol_x) {
            return Ok(RegionLabel::new(Region::B, on.is_some()));
        }
    }
    let f = &fam.sol.flux;
    match on {
        Some(fr) => {
            if fam.is_contact(fr) && fr.birth_event.is_none() {
                let comps = ld_components_pl(f, default_ld_tol(f));
                let same = ld_component_of(&comps, fr.u_left) == ld_component_of(&comps, fr.u_right)
                    && ld_component_of(&comps, fr.u_left).is_some();
                return Ok(RegionLabel::new(Region::C, !same));
            }
        }
        None => {
            let c = f.deriv(fam.sol.value_at(t, x)?);
            if !ray_touches_front(&fam.sol, t, x, c, tol_x) {
                return Ok(RegionLabel::new(Region::C, false));
            }
        }
    }
    Ok(RegionLabel::new(Region::A2, true))
}

/// The two polylines come within `tol` of each other at some time `< t`.
fn met_before(a: &Polyline, b: &Polyline, t: f64, tol: f64) -> bool {
    let mut ts: Vec<f64> = a.pts.iter().chain(b.pts.iter()).map(|p| p.0).filter(|&s| s <= t).collect();
    ts.push(t.max(a.t_start()));
    ts.iter().any(|&s| (b.eval(s) - a.eval(s)).abs() <= tol)
}

/// Whether `s ↦ x - c(t - s)`, `s ∈ [0, t]`, comes within `tol` of a front.
fn ray_touches_front(sol: &FtSolution, t: f64, x: f64, c: f64, tol: f64) -> bool {
    sol.fronts.iter().any(|fr| {
        let (sa, sb) = (fr.t_birth, fr.t_end().min(t));
        if sb < sa {
            return false;
        }
        let da = x - c * (t - sa) - fr.x_at(sa);
        let db = x - c * (t - sb) - fr.x_at(sb);
        da.abs() <= tol || db.abs() <= tol || (da < 0.0) != (db < 0.0)
    })
}

/// Straight characteristics `x = x0 + λt`, `x0 ∈ (lo, hi)`, that start in
/// one constant piece of the datum and meet no front on `[0, T]`. The label
/// is `y = x0 + λε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderPiece {
    pub x0_lo: f64,
    pub x0_hi: f64,
    pub value: f64,
    pub lambda: f64,
}

impl CylinderPiece {
    pub fn y_range(&self, eps: f64) -> (f64, f64) {
        (self.x0_lo + self.lambda * eps, self.x0_hi + self.lambda * eps)
    }
}

/// The set `Y_T` with its slopes and values.
#[derive(Debug, Clone, Serialize)]
pub struct CylinderFamily {
    pub t_final: f64,
    pub eps: f64,
    pub pieces: Vec<CylinderPiece>,
}

fn subtract(ints: Vec<(f64, f64)>, a: f64, b: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(ints.len() + 1);
    for (lo, hi) in ints {
        if b <= lo || a >= hi {
            out.push((lo, hi));
            continue;
        }
        if a > lo {
            out.push((lo, a));
        }
        if b < hi {
            out.push((b, hi));
        }
    }
    out
}

pub fn cylinder_extract(fam: &BoundaryFamily, t_final: f64, eps: f64) -> Result<CylinderFamily> {
    let sol = &fam.sol;
    if !(eps > 0.0 && t_final > 2.0 * eps && t_final <= sol.horizon) {
        return Err(Error::InvalidInput(format!(
            "need 0 < 2ε < T ≤ horizon, got ε = {eps}, T = {t_final}, horizon = {}",
            sol.horizon
        )));
    }
    let (wlo, whi) = fam.window;
    let mut pieces = Vec::new();
    for (a, b, v) in sol.datum.pieces() {
        let (a, b) = (a.max(wlo), b.min(whi));
        if b <= a {
            continue;
        }
        let lambda = sol.flux.deriv(v);
        let mut ints = vec![(a, b)];
        for fr in &sol.fronts {
            let (ta, tb) = (fr.t_birth, fr.t_end().min(t_final));
            if tb < ta {
                continue;
            }
            let pa = fr.x_at(ta) - lambda * ta;
            let pb = fr.x_at(tb) - lambda * tb;
            ints = subtract(ints, pa.min(pb), pa.max(pb));
            if ints.is_empty() {
                break;
            }
        }
        pieces.extend(ints.into_iter().filter(|(lo, hi)| hi > lo).map(|(lo, hi)| CylinderPiece {
            x0_lo: lo,
            x0_hi: hi,
            value: v,
            lambda,
        }));
    }
    Ok(CylinderFamily { t_final, eps, pieces })
}

impl CylinderFamily {
    /// Total length of `Y_T`.
    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|p| p.x0_hi - p.x0_lo).sum()
    }

    /// Piece carrying `y`, or the first piece to its right (right-continuous
    /// extension off `Y_T`).
    fn piece_for(&self, y: f64) -> Option<&CylinderPiece> {
        self.pieces.iter().find(|p| p.y_range(self.eps).1 >= y).or(self.pieces.last())
    }

    pub fn contains(&self, y: f64) -> bool {
        self.pieces.iter().any(|p| {
            let (lo, hi) = p.y_range(self.eps);
            lo < y && y < hi
        })
    }

    pub fn value(&self, y: f64) -> Option<f64> {
        self.piece_for(y).map(|p| p.value)
    }

    pub fn lambda(&self, y: f64) -> Option<f64> {
        self.piece_for(y).map(|p| p.lambda)
    }

    /// The characteristic labelled `y`, usable as a cylinder side.
    pub fn side(&self, y: f64) -> Option<CylinderSide> {
        let p = self.piece_for(y)?;
        Some(CylinderSide { x0: y - p.lambda * self.eps, slope: p.lambda, value: p.value })
    }

    /// `F(y) = f(u) - λu`.
    pub fn f_map<F: Flux + ?Sized>(&self, f: &F, y: f64) -> Option<f64> {
        self.piece_for(y).map(|p| f.eval(p.value) - p.lambda * p.value)
    }

    /// `Q(y) = q(u) - λη(u)`.
    pub fn q_map(&self, pair: &EntropyPair, y: f64) -> Option<f64> {
        self.piece_for(y).map(|p| pair.q(p.value) - p.lambda * pair.eta(p.value))
    }

    /// `max ε|λ(y2) - λ(y1)| / (y2 - y1)` over pairs of pieces; the
    /// non-crossing bound says this is at most one.
    pub fn lambda_lipschitz_ratio(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, p) in self.pieces.iter().enumerate() {
            for q in &self.pieces[i + 1..] {
                let dl = (q.lambda - p.lambda).abs();
                if dl == 0.0 {
                    continue;
                }
                let (_, y1) = p.y_range(self.eps);
                let (y2, _) = q.y_range(self.eps);
                worst = worst.max(self.eps * dl / (y2 - y1).abs().max(f64::MIN_POSITIVE));
            }
        }
        worst
    }

    /// Largest `|F(y2) - F(y1)| / (y2 - y1)` between pieces.
    pub fn f_lipschitz<F: Flux + ?Sized>(&self, f: &F) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.pieces.windows(2) {
            let (_, y1) = w[0].y_range(self.eps);
            let (y2, _) = w[1].y_range(self.eps);
            let fa = f.eval(w[0].value) - w[0].lambda * w[0].value;
            let fb = f.eval(w[1].value) - w[1].lambda * w[1].value;
            if (fb - fa).abs() > 0.0 {
                worst = worst.max((fb - fa).abs() / (y2 - y1).abs().max(f64::MIN_POSITIVE));
            }
        }
        worst
    }

    /// `Σ|Q(y_{i+1}) - Q(y_i)|` over consecutive pieces.
    pub fn q_variation(&self, pair: &EntropyPair) -> f64 {
        let q = |p: &CylinderPiece| pair.q(p.value) - p.lambda * pair.eta(p.value);
        self.pieces.windows(2).map(|w| (q(&w[1]) - q(&w[0])).abs()).sum()
    }

    /// Centred differences on the grid `y_i = lo + i·dy`: returns the largest
    /// `|ΔF + u Δλ|` and `|ΔQ + η(u) Δλ|`.
    pub fn chain_rule_residuals<F: Flux + ?Sized>(&self, f: &F, pair: &EntropyPair, dy: f64) -> (f64, f64) {
        let (Some(first), Some(last)) = (self.pieces.first(), self.pieces.last()) else {
            return (0.0, 0.0);
        };
        let lo = first.y_range(self.eps).0;
        let hi = last.y_range(self.eps).1;
        let n = ((hi - lo) / dy).floor() as usize;
        let (mut rf, mut rq) = (0.0f64, 0.0f64);
        for i in 1..n {
            let y = lo + i as f64 * dy;
            let (Some(a), Some(b), Some(m)) = (self.piece_for(y - 0.5 * dy), self.piece_for(y + 0.5 * dy), self.piece_for(y))
            else {
                continue;
            };
            let fa = f.eval(a.value) - a.lambda * a.value;
            let fb = f.eval(b.value) - b.lambda * b.value;
            let qa = pair.q(a.value) - a.lambda * pair.eta(a.value);
            let qb = pair.q(b.value) - b.lambda * pair.eta(b.value);
            let dl = b.lambda - a.lambda;
            rf = rf.max((fb - fa + m.value * dl).abs());
            rq = rq.max((qb - qa + pair.eta(m.value) * dl).abs());
        }
        (rf, rq)
    }
}
