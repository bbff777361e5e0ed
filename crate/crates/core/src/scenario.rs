//! Scenario files: flux and datum specifications, grid, horizon, window and
//! verification toggles, with builders for the solver inputs.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::counterex::{assemble_flux, geometric_sequences, BumpG};
use crate::error::{Error, Result};
use crate::flux::{build_pl_flux, grid_step, PlFlux, SmoothFlux};
use crate::fronttrack::quantize;
use crate::pwc::Pwc;
use crate::riemann::solve_riemann;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FluxSpec {
    /// `u²/2`; `range` defaults to the hull of the datum values.
    Burgers {
        #[serde(default)]
        range: Option<(f64, f64)>,
    },
    /// `u³`.
    Cubic {
        #[serde(default)]
        range: Option<(f64, f64)>,
    },
    /// Node values on `u_min + j·2^-k`, used verbatim.
    PlTable { k: u32, u_min: f64, values: Vec<f64> },
    /// Sum of the bump blocks `n = 1..=blocks` with `a_n = 4^-n`, `L_n = 3·4^-n`.
    Counterexample2 { blocks: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatumSpec {
    Table { breaks: Vec<f64>, values: Vec<f64> },
    Indicator { lo: f64, hi: f64, value: f64 },
    /// `χ_{C_n}` for the level-`n` Cantor set in `[0, 2]`.
    Cantor { n: u32 },
    /// `2L_n·χ_[0, d_n]` for bump block `n`.
    Block { n: u32 },
}

impl FromStr for DatumSpec {
    type Err = Error;

    /// `cantor:n`, `block:n` or `indicator:lo:hi:value`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |p: &str| p.parse::<f64>().map_err(|_| Error::InvalidInput(format!("bad number {p:?} in datum {s:?}")));
        let int = |p: &str| p.parse::<u32>().map_err(|_| Error::InvalidInput(format!("bad level {p:?} in datum {s:?}")));
        match parts.as_slice() {
            ["cantor", n] => Ok(Self::Cantor { n: int(n)? }),
            ["block", n] => Ok(Self::Block { n: int(n)? }),
            ["indicator", lo, hi, v] => Ok(Self::Indicator { lo: num(lo)?, hi: num(hi)?, value: num(v)? }),
            _ => Err(Error::InvalidInput(format!("unknown datum {s:?} (expected cantor:n, block:n or indicator:lo:hi:v)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyToggles {
    pub conservation: bool,
    pub admissibility: bool,
    pub weak_residual: bool,
    pub initial_trace: bool,
    pub contraction: bool,
    pub oracle: bool,
}

impl Default for VerifyToggles {
    fn default() -> Self {
        Self { conservation: true, admissibility: true, weak_residual: true, initial_trace: true, contraction: true, oracle: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: Option<String>,
    pub flux: FluxSpec,
    pub datum: DatumSpec,
    pub k: u32,
    pub horizon: f64,
    #[serde(default)]
    pub window: Option<(f64, f64)>,
    #[serde(default)]
    pub verify: VerifyToggles,
}

/// Parses a scenario; schema errors carry the JSON path of the offending field.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let s: Scenario = serde_path_to_error::deserialize(de)
        .map_err(|e| Error::InvalidInput(format!("scenario schema error at `{}`: {}", e.path(), e.inner())))?;
    s.validate()?;
    Ok(s)
}

fn outward(range: (f64, f64), k: u32) -> (f64, f64) {
    let h = grid_step(k);
    let lo = (range.0 / h).floor() * h;
    let mut hi = (range.1 / h).ceil() * h;
    if hi <= lo {
        hi = lo + h;
    }
    (lo, hi)
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 || self.k > 30 {
            return Err(Error::InvalidInput(format!("scenario `k`: must lie in 1..=30, got {}", self.k)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidInput(format!("scenario `horizon`: must be positive, got {}", self.horizon)));
        }
        if let Some((a, b)) = self.window {
            if !(a < b) {
                return Err(Error::InvalidInput(format!("scenario `window`: need lo < hi, got [{a}, {b}]")));
            }
        }
        match &self.flux {
            FluxSpec::Burgers { range: Some((a, b)) } | FluxSpec::Cubic { range: Some((a, b)) } if !(a < b) => {
                Err(Error::InvalidInput(format!("scenario `flux.range`: need lo < hi, got [{a}, {b}]")))
            }
            FluxSpec::PlTable { values, .. } if values.len() < 2 => {
                Err(Error::InvalidInput("scenario `flux.values`: need at least two nodes".into()))
            }
            FluxSpec::Counterexample2 { blocks } if *blocks == 0 => {
                Err(Error::InvalidInput("scenario `flux.blocks`: need at least one block".into()))
            }
            _ => Ok(()),
        }
    }

    fn raw_datum(&self) -> Result<Option<Pwc>> {
        Ok(match &self.datum {
            DatumSpec::Table { breaks, values } => Some(Pwc::new(breaks.clone(), values.clone())?),
            DatumSpec::Indicator { lo, hi, value } => {
                if !(lo < hi) {
                    return Err(Error::InvalidInput(format!("scenario `datum`: need lo < hi, got [{lo}, {hi}]")));
                }
                Some(Pwc::indicator(*lo, *hi, *value))
            }
            DatumSpec::Cantor { n } => Some(crate::counterex::cantor(*n)?.indicator()),
            DatumSpec::Block { .. } => None,
        })
    }

    /// Piecewise-linear flux and grid-valued datum for this scenario. Datum
    /// values off the grid are snapped with a warning.
    pub fn build(&self) -> Result<(PlFlux, Pwc)> {
        self.validate()?;
        let k = self.k;
        let raw = self.raw_datum()?;
        let range = || -> Result<(f64, f64)> {
            let d = raw.as_ref().ok_or_else(|| Error::InvalidInput("block datum needs the counterexample2 flux".into()))?;
            let lo = d.values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = d.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            Ok(outward((lo, hi), k))
        };
        let flux = match &self.flux {
            FluxSpec::Burgers { range: r } => {
                let r = outward(r.map_or_else(range, Ok)?, k);
                build_pl_flux(&SmoothFlux::burgers(r.0.abs().max(r.1.abs())), k, r)?
            }
            FluxSpec::Cubic { range: r } => {
                let r = outward(r.map_or_else(range, Ok)?, k);
                build_pl_flux(&SmoothFlux::cubic(r.0.abs().max(r.1.abs())), k, r)?
            }
            FluxSpec::PlTable { k: tk, u_min, values } => {
                if *tk != k {
                    return Err(Error::InvalidInput(format!("scenario `flux.k` = {tk} differs from `k` = {k}")));
                }
                PlFlux::from_table(*tk, *u_min, values.clone())?
            }
            FluxSpec::Counterexample2 { blocks } => {
                let s = geometric_sequences(*blocks);
                let f = assemble_flux(&s, BumpG::golden())?;
                let h = grid_step(k);
                let smallest = s.a[*blocks as usize];
                if h > smallest / 16.0 {
                    return Err(Error::InvalidInput(format!(
                        "scenario `k`: 2^-{k} does not resolve a_{blocks} = {smallest} (need 2^-k ≤ a/16)"
                    )));
                }
                build_pl_flux(&f, k, (0.0, 2.0 * s.l[1] + 2.0 * s.a[1]))?
            }
        };
        let datum = match (&self.datum, raw) {
            (_, Some(d)) => {
                let q = quantize(&d, k);
                if q != d.simplified() {
                    log::warn!("datum values snapped to the grid 2^-{k}");
                }
                q
            }
            (DatumSpec::Block { n }, None) => {
                let blocks = match self.flux {
                    FluxSpec::Counterexample2 { blocks } => blocks,
                    _ => return Err(Error::InvalidInput("scenario `datum`: block:n needs the counterexample2 flux".into())),
                };
                if *n == 0 || *n > blocks {
                    return Err(Error::InvalidInput(format!("scenario `datum`: block {n} outside 1..={blocks}")));
                }
                let top = 2.0 * geometric_sequences(*n).l[*n as usize];
                let fan = solve_riemann(&flux, 0.0, top)?;
                let d = fan.waves.last().map(|w| w.speed).ok_or_else(|| Error::Internal("empty Riemann fan".into()))?;
                Pwc::indicator(0.0, d, top)
            }
            _ => unreachable!("raw datum is only absent for block data"),
        };
        Ok((flux, datum))
    }

    /// Explicit window, or the datum's breakpoint hull widened by the maximal
    /// propagation distance.
    pub fn window_or_default(&self, flux: &PlFlux, datum: &Pwc) -> (f64, f64) {
        self.window.unwrap_or_else(|| {
            let reach = flux.max_abs_slope() * self.horizon + 1.0;
            let lo = datum.breaks.first().copied().unwrap_or(0.0);
            let hi = datum.breaks.last().copied().unwrap_or(0.0);
            (lo - reach, hi + reach)
        })
    }
}
