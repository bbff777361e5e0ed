//! Event-driven wavefront tracking: every initial jump is replaced by its
//! Riemann fan, fronts travel straight at Rankine-Hugoniot speed, and each
//! collision is resolved by the fan of the outer states.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flux::PlFlux;
use crate::pwc::Pwc;
use crate::riemann::fan_indices;

#[derive(Debug, Clone, Serialize)]
pub struct Front {
    pub id: usize,
    pub t_birth: f64,
    pub x_birth: f64,
    pub t_death: Option<f64>,
    pub x_death: Option<f64>,
    pub j_left: i64,
    pub j_right: i64,
    pub u_left: f64,
    pub u_right: f64,
    pub speed: f64,
    pub birth_event: Option<usize>,
    pub death_event: Option<usize>,
}

impl Front {
    pub fn x_at(&self, t: f64) -> f64 {
        self.x_birth + self.speed * (t - self.t_birth)
    }

    pub fn t_end(&self) -> f64 {
        self.t_death.unwrap_or(f64::INFINITY)
    }

    /// Alive on `[t_birth, t_death)`.
    pub fn alive_at(&self, t: f64) -> bool {
        self.t_birth <= t && t < self.t_end()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Event {
    pub id: usize,
    pub t: f64,
    pub x: f64,
    /// Incoming fronts, left to right.
    pub incoming: Vec<usize>,
    /// Outgoing fronts, left to right.
    pub outgoing: Vec<usize>,
    /// Values swept by the incoming fronts but not by the outgoing fan.
    pub cancelled: Vec<(f64, f64)>,
}

/// Front configuration right after `t = 0`.
#[derive(Debug, Clone)]
pub struct FtState {
    pub flux: PlFlux,
    pub datum: Pwc,
    pub time: f64,
    pub fronts: Vec<Front>,
}

#[derive(Debug, Clone)]
pub struct FtSolution {
    pub flux: PlFlux,
    pub datum: Pwc,
    pub horizon: f64,
    pub fronts: Vec<Front>,
    pub events: Vec<Event>,
}

/// Snaps every value of `u0` to the nearest grid value of `2^-k Z`.
pub fn quantize(u0: &Pwc, k: u32) -> Pwc {
    let h = crate::flux::grid_step(k);
    let values = u0.values.iter().map(|v| (v / h).round() * h).collect();
    Pwc { breaks: u0.breaks.clone(), values }.simplified()
}

pub fn init(f: &PlFlux, u0: &Pwc) -> Result<FtState> {
    let u0 = u0.simplified();
    let idx: Vec<i64> = u0.values.iter().map(|&v| f.index_of(v)).collect::<Result<_>>()?;
    let mut fronts = Vec::new();
    for (i, &x) in u0.breaks.iter().enumerate() {
        for (speed, a, b) in fan_indices(f, idx[i], idx[i + 1]) {
            fronts.push(new_front(f, fronts.len(), 0.0, x, a, b, speed, None));
        }
    }
    Ok(FtState { flux: f.clone(), datum: u0, time: 0.0, fronts })
}

#[allow(clippy::too_many_arguments)]
fn new_front(f: &PlFlux, id: usize, t: f64, x: f64, a: i64, b: i64, speed: f64, ev: Option<usize>) -> Front {
    Front {
        id,
        t_birth: t,
        x_birth: x,
        t_death: None,
        x_death: None,
        j_left: a,
        j_right: b,
        u_left: f.u_of(a),
        u_right: f.u_of(b),
        speed,
        birth_event: ev,
        death_event: None,
    }
}

#[derive(Debug, PartialEq)]
struct Collision {
    t: f64,
    x: f64,
    left: usize,
    right: usize,
}

impl Eq for Collision {}

impl Ord for Collision {
    fn cmp(&self, other: &Self) -> Ordering {
        // reversed: BinaryHeap is a max-heap
        other
            .t
            .total_cmp(&self.t)
            .then_with(|| other.x.total_cmp(&self.x))
            .then_with(|| other.left.cmp(&self.left))
    }
}

impl PartialOrd for Collision {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct Tracker {
    flux: PlFlux,
    fronts: Vec<Front>,
    events: Vec<Event>,
    prev: Vec<Option<usize>>,
    next: Vec<Option<usize>>,
    heap: BinaryHeap<Collision>,
    horizon: f64,
    now: f64,
}

const MAX_EVENTS: usize = 50_000_000;

impl Tracker {
    fn alive(&self, id: usize) -> bool {
        self.fronts[id].t_death.is_none()
    }

    fn pos_tol(x: f64) -> f64 {
        1e-12 * (1.0 + x.abs())
    }

    fn schedule(&mut self, l: usize, r: usize) -> Result<()> {
        let (a, b) = (&self.fronts[l], &self.fronts[r]);
        if a.speed <= b.speed {
            return Ok(());
        }
        let mut t = (b.x_birth - b.speed * b.t_birth - a.x_birth + a.speed * a.t_birth) / (a.speed - b.speed);
        if t < self.now {
            let gap = b.x_at(self.now) - a.x_at(self.now);
            if gap < -Self::pos_tol(a.x_at(self.now)) {
                return Err(Error::Internal(format!(
                    "fronts {l} and {r} crossed before t = {}: left at {}, right at {}",
                    self.now,
                    a.x_at(self.now),
                    b.x_at(self.now)
                )));
            }
            t = self.now;
        }
        if t <= self.horizon {
            let x = a.x_at(t);
            self.heap.push(Collision { t, x, left: l, right: r });
        }
        Ok(())
    }

    fn run(&mut self) -> Result<()> {
        while let Some(c) = self.heap.pop() {
            if !self.alive(c.left) || !self.alive(c.right) || self.next[c.left] != Some(c.right) {
                continue;
            }
            if self.events.len() >= MAX_EVENTS {
                return Err(Error::Internal(format!("event budget of {MAX_EVENTS} exhausted at t = {}", c.t)));
            }
            self.now = c.t;
            self.interact(c.t, c.left, c.right)?;
        }
        Ok(())
    }

    fn interact(&mut self, t: f64, l: usize, r: usize) -> Result<()> {
        let x = 0.5 * (self.fronts[l].x_at(t) + self.fronts[r].x_at(t));
        let tol = Self::pos_tol(x);
        let mut first = l;
        while let Some(p) = self.prev[first] {
            if (self.fronts[p].x_at(t) - x).abs() <= tol {
                first = p;
            } else {
                break;
            }
        }
        let mut last = r;
        while let Some(n) = self.next[last] {
            if (self.fronts[n].x_at(t) - x).abs() <= tol {
                last = n;
            } else {
                break;
            }
        }
        let mut incoming = vec![first];
        while *incoming.last().unwrap() != last {
            let n = self.next[*incoming.last().unwrap()].expect("cluster is contiguous");
            incoming.push(n);
        }
        let jl = self.fronts[first].j_left;
        let jr = self.fronts[last].j_right;
        let mut path = vec![jl];
        path.extend(incoming.iter().map(|&id| self.fronts[id].j_right));
        let (pmin, pmax) = (*path.iter().min().unwrap(), *path.iter().max().unwrap());
        let (omin, omax) = (jl.min(jr), jl.max(jr));
        let mut cancelled = Vec::new();
        if pmin < omin {
            cancelled.push((self.flux.u_of(pmin), self.flux.u_of(omin)));
        }
        if pmax > omax {
            cancelled.push((self.flux.u_of(omax), self.flux.u_of(pmax)));
        }
        let eid = self.events.len();
        for &id in &incoming {
            let fr = &mut self.fronts[id];
            fr.t_death = Some(t);
            fr.x_death = Some(x);
            fr.death_event = Some(eid);
        }
        let before = self.prev[first];
        let after = self.next[last];
        let mut outgoing = Vec::new();
        for (speed, a, b) in fan_indices(&self.flux, jl, jr) {
            let id = self.fronts.len();
            self.fronts.push(new_front(&self.flux, id, t, x, a, b, speed, Some(eid)));
            self.prev.push(None);
            self.next.push(None);
            outgoing.push(id);
        }
        let mut chain: Vec<Option<usize>> = vec![before];
        chain.extend(outgoing.iter().map(|&id| Some(id)));
        chain.push(after);
        for w in chain.windows(2) {
            if let Some(a) = w[0] {
                self.next[a] = w[1];
            }
            if let Some(b) = w[1] {
                self.prev[b] = w[0];
            }
        }
        self.events.push(Event { id: eid, t, x, incoming, outgoing: outgoing.clone(), cancelled });
        if let (Some(a), Some(b)) = (before, outgoing.first().copied().or(after)) {
            self.schedule(a, b)?;
        }
        if let (Some(a), Some(b)) = (outgoing.last().copied(), after) {
            self.schedule(a, b)?;
        }
        Ok(())
    }
}

/// Processes every collision up to and including time `horizon`.
pub fn evolve(state: FtState, horizon: f64) -> Result<FtSolution> {
    if !(horizon > state.time) {
        return Err(Error::InvalidInput(format!("horizon {horizon} must exceed start time {}", state.time)));
    }
    let n = state.fronts.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (&state.fronts[a], &state.fronts[b]);
        fa.x_birth.total_cmp(&fb.x_birth).then(fa.speed.total_cmp(&fb.speed))
    });
    let mut tr = Tracker {
        flux: state.flux,
        fronts: state.fronts,
        events: Vec::new(),
        prev: vec![None; n],
        next: vec![None; n],
        heap: BinaryHeap::new(),
        horizon,
        now: state.time,
    };
    for w in order.windows(2) {
        tr.next[w[0]] = Some(w[1]);
        tr.prev[w[1]] = Some(w[0]);
    }
    for w in order.windows(2) {
        tr.schedule(w[0], w[1])?;
    }
    tr.run()?;
    Ok(FtSolution { flux: tr.flux, datum: state.datum, horizon, fronts: tr.fronts, events: tr.events })
}

/// Convenience: quantization-free `init` followed by `evolve`.
pub fn solve(f: &PlFlux, u0: &Pwc, horizon: f64) -> Result<FtSolution> {
    evolve(init(f, u0)?, horizon)
}

impl FtSolution {
    /// Fronts alive at `t` (t+ convention), sorted by position then speed.
    pub fn live_fronts(&self, t: f64) -> Vec<&Front> {
        let mut v: Vec<&Front> = self.fronts.iter().filter(|f| f.alive_at(t)).collect();
        v.sort_by(|a, b| a.x_at(t).total_cmp(&b.x_at(t)).then(a.speed.total_cmp(&b.speed)));
        v
    }

    pub fn sample(&self, t: f64) -> Result<Pwc> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        let live = self.live_fronts(t);
        let mut breaks = Vec::with_capacity(live.len());
        let mut values = Vec::with_capacity(live.len() + 1);
        values.push(self.datum.left_value());
        for f in &live {
            breaks.push(f.x_at(t));
            values.push(f.u_right);
        }
        let mut p = Pwc { breaks, values };
        // rounding can leave coincident fronts a hair out of order
        for i in 1..p.breaks.len() {
            if p.breaks[i] < p.breaks[i - 1] {
                p.breaks[i] = p.breaks[i - 1];
            }
        }
        p = p.simplified();
        Ok(p)
    }

    /// Value just right of `x` at time `t`.
    pub fn value_at(&self, t: f64, x: f64) -> Result<f64> {
        Ok(self.sample(t)?.eval(x))
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    /// Smallest interval containing every front over `[0, horizon]`.
    pub fn front_hull(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for f in &self.fronts {
            let t1 = f.t_end().min(self.horizon);
            for x in [f.x_birth, f.x_at(t1)] {
                lo = lo.min(x);
                hi = hi.max(x);
            }
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }
}

pub fn l1_distance(a: &FtSolution, b: &FtSolution, t: f64) -> Result<f64> {
    a.sample(t)?.l1_distance(&b.sample(t)?)
}

pub fn total_variation(sol: &FtSolution, t: f64) -> Result<f64> {
    Ok(sol.sample(t)?.total_variation())
}
