//! Data-generating processes: forward simulation of panels from fully
//! specified structures, and high-draw outcome frequencies per cell.
//!
//! Draw order per unit: covariate cell; an observed initial condition
//! (depending on `z` only); `u` from the latent distribution, independent
//! of `(z, y0)`; fixed effects from a Gaussian mixture whose means move
//! with `z`, `u` and `y0`; an unobserved initial condition (depending on
//! the fixed effect and `z`); then outcomes period by period.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::distributions::{cell_seed, CellProbs, CondOutcomeDist, LatentDist, LatentFamily};
use crate::error::{Error, Result};
use crate::models::{CovariateCell, Family, LatentPoint, ModelSpec, OutcomeSeq, Theta, Y0Status};

pub const DEFAULT_EXACT_DRAWS: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    #[serde(default)]
    pub mean: f64,
    /// Coefficient on the mean of the covariate path.
    #[serde(default)]
    pub on_z: f64,
    /// Coefficient on the mean of the matching latent component.
    #[serde(default)]
    pub on_u: f64,
    #[serde(default)]
    pub on_y0: f64,
    #[serde(default = "one")]
    pub sd: f64,
}

fn one() -> f64 {
    1.0
}

/// Distribution of each fixed effect given `(z, u, y0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedEffectSpec {
    pub components: Vec<MixtureComponent>,
}

impl Default for FixedEffectSpec {
    fn default() -> Self {
        FixedEffectSpec {
            components: vec![MixtureComponent { weight: 1.0, mean: 0.0, on_z: 0.0, on_u: 0.0, on_y0: 0.0, sd: 1.0 }],
        }
    }
}

/// Initial condition: `P(y0 = j) ∝ exp(j·s)` with
/// `s = intercept + on_c·c̄ + on_z·z̄` (`on_c` unused when `y0` is observed);
/// a continuous initial level is `s + level_sd·N(0,1)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub on_c: f64,
    #[serde(default)]
    pub on_z: f64,
    #[serde(default)]
    pub level_sd: f64,
}

/// Outcome for an index exactly at a threshold. `Upper` gives the higher
/// binary or ordered outcome and keeps the lowest-numbered alternative
/// among tied utilities; `Lower` does the opposite.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    Upper,
    Lower,
}

/// Equilibrium chosen by the simultaneous model when several exist.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    High,
    Low,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpCell {
    pub cell: CovariateCell,
    #[serde(default = "one")]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    pub model: ModelSpec,
    pub theta: Theta,
    pub latent: LatentDist,
    /// Latent distribution by observed initial condition, overriding
    /// `latent`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub latent_by_y0: BTreeMap<i64, LatentFamily>,
    #[serde(default)]
    pub fixed_effect: FixedEffectSpec,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub tie: TieRule,
    #[serde(default)]
    pub selection: Selection,
    pub cells: Vec<DgpCell>,
}

/// One simulated unit with the latent values that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimUnit {
    pub unit: usize,
    /// Index into `DgpSpec::cells`.
    pub cell: usize,
    pub outcome: OutcomeSeq,
    pub u: Vec<f64>,
    pub latent: LatentPoint,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn softmax_draw(n: usize, s: f64, rng: &mut impl Rng) -> i64 {
    let w: Vec<f64> = (0..n).map(|j| (j as f64 * s - (n - 1) as f64 * s.max(0.0)).exp()).collect();
    let total: f64 = w.iter().sum();
    let r = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (j, x) in w.iter().enumerate() {
        acc += x;
        if r < acc {
            return j as i64;
        }
    }
    n as i64 - 1
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.theta.validate(&self.model)?;
        self.latent.validate(&self.model)?;
        for f in self.latent_by_y0.values() {
            f.validate(&self.model)?;
        }
        if self.cells.is_empty() {
            return Err(Error::Validation("a DGP needs at least one cell".into()));
        }
        for c in &self.cells {
            let mut probe = c.cell.clone();
            if self.model.y0 == Y0Status::Observed && self.model.has_discrete_outcomes() {
                probe.y0 = Some(0);
            }
            probe.validate(&self.model)?;
            if !(c.weight.is_finite() && c.weight >= 0.0) {
                return Err(Error::Validation("cell weights must be nonnegative".into()));
            }
        }
        let total: f64 = self.cells.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!("cell weights sum to {total}, expected 1")));
        }
        let fe = &self.fixed_effect.components;
        if fe.is_empty() || fe.iter().any(|c| c.weight < 0.0 || c.sd < 0.0 || !c.mean.is_finite()) {
            return Err(Error::Validation("fixed-effect mixture needs nonnegative weights and sds".into()));
        }
        if self.model.family == Family::SimultaneousBinary && self.theta.alpha[0] * self.theta.alpha[1] < 0.0 {
            return Err(Error::Validation(
                "simultaneous_binary needs alpha entries of equal sign for an equilibrium to exist".into(),
            ));
        }
        Ok(())
    }

    fn observed_discrete_y0(&self) -> bool {
        self.model.y0 == Y0Status::Observed && self.model.has_discrete_outcomes()
    }

    fn latent_for(&self, cell_id: usize, y0: Option<i64>) -> &LatentFamily {
        match y0.and_then(|v| self.latent_by_y0.get(&v)) {
            Some(f) if self.observed_discrete_y0() => f,
            _ => self.latent.at_cell(cell_id),
        }
    }

    fn draw_fe(&self, zbar: f64, u: &[f64], slot: usize, y0: f64, rng: &mut impl Rng) -> f64 {
        let tn = self.model.periods;
        let ubar = mean(u[slot * tn..(slot + 1) * tn].iter().copied());
        let comps = &self.fixed_effect.components;
        let total: f64 = comps.iter().map(|c| c.weight).sum();
        let r = rng.gen::<f64>() * total;
        let mut acc = 0.0;
        let mut k = comps.len() - 1;
        for (i, c) in comps.iter().enumerate() {
            acc += c.weight;
            if r < acc {
                k = i;
                break;
            }
        }
        let c = &comps[k];
        c.mean + c.on_z * zbar + c.on_u * ubar + c.on_y0 * y0 + c.sd * rng.sample::<f64, _>(StandardNormal)
    }

    fn index_zb(&self, cell: &CovariateCell, slot: usize, t: usize) -> f64 {
        cell.z[t].iter().zip(&self.theta.beta[slot]).map(|(a, b)| a * b).sum()
    }

    fn binary(&self, index: f64) -> i64 {
        match self.tie {
            TieRule::Upper => i64::from(index >= 0.0),
            TieRule::Lower => i64::from(index > 0.0),
        }
    }

    /// Outcomes for given latents.
    fn roll_forward(&self, cell: &CovariateCell, u: &[f64], v: &LatentPoint) -> OutcomeSeq {
        let (m, th) = (&self.model, &self.theta);
        let tn = m.periods;
        let g0 = th.gamma.first().copied().unwrap_or(0.0);
        let xterm = |t: usize| -> f64 {
            match &cell.y2 {
                Some(x) if m.family != Family::SimultaneousBinary => {
                    x[t].iter().zip(&th.alpha).map(|(a, b)| a * b).sum()
                }
                _ => 0.0,
            }
        };
        let mut y = Vec::with_capacity(m.outcome_len());
        match m.family {
            Family::BinaryStatic | Family::BinaryDynamic => {
                let mut prev = v.y0.unwrap_or(0);
                for t in 0..tn {
                    let lag = if m.is_static() { 0.0 } else { g0 * prev as f64 };
                    let yt = self.binary(self.index_zb(cell, 0, t) + xterm(t) + lag + v.fe[0] + u[t]);
                    y.push(yt);
                    prev = yt;
                }
            }
            Family::Ordered => {
                let mut prev = v.y0.unwrap_or(0);
                for t in 0..tn {
                    let lag = if m.is_static() { 0.0 } else { th.gamma[prev as usize] };
                    let index = self.index_zb(cell, 0, t) + lag + v.fe[0] + u[t];
                    let yt = th
                        .cuts
                        .iter()
                        .filter(|c| match self.tie {
                            TieRule::Upper => index >= **c,
                            TieRule::Lower => index > **c,
                        })
                        .count() as i64;
                    y.push(yt);
                    prev = yt;
                }
            }
            Family::Multidiscrete => {
                let k = m.n_categories();
                for t in 0..tn {
                    let util = |a: usize| {
                        let base = if a == k { 0.0 } else { self.index_zb(cell, a - 1, t) + v.fe[a - 1] };
                        base + u[(a - 1) * tn + t]
                    };
                    let mut best = 1;
                    for a in 2..=k {
                        let better = match self.tie {
                            TieRule::Upper => util(a) > util(best),
                            TieRule::Lower => util(a) >= util(best),
                        };
                        if better {
                            best = a;
                        }
                    }
                    y.push(best as i64);
                }
            }
            Family::SimultaneousBinary => {
                let mut y1 = Vec::with_capacity(tn);
                let mut y2 = Vec::with_capacity(tn);
                for t in 0..tn {
                    let base =
                        [self.index_zb(cell, 0, t) + v.fe[0] + u[t], self.index_zb(cell, 1, t) + v.fe[1] + u[tn + t]];
                    let mut eq = Vec::new();
                    for (a, b) in [(0i64, 0i64), (0, 1), (1, 0), (1, 1)] {
                        let ok1 = self.binary(base[0] + th.alpha[0] * b as f64) == a;
                        let ok2 = self.binary(base[1] + th.alpha[1] * a as f64) == b;
                        if ok1 && ok2 {
                            eq.push((a, b));
                        }
                    }
                    let pick = match self.selection {
                        Selection::High => eq.last(),
                        Selection::Low => eq.first(),
                    };
                    let (a, b) = *pick.expect("equal-sign interactions always admit an equilibrium");
                    y1.push(a);
                    y2.push(b);
                }
                y.extend(y1);
                y.extend(y2);
            }
            Family::Censored | Family::Linear => {
                let mut levels = Vec::with_capacity(tn);
                let mut prev = v.y0_level.unwrap_or(0.0);
                for t in 0..tn {
                    let lag = if m.family == Family::Censored && !m.is_static() { g0 * prev } else { 0.0 };
                    let index = self.index_zb(cell, 0, t) + xterm(t) + lag + v.fe[0] + u[t];
                    let (level, w) = match m.family {
                        Family::Censored => {
                            let floor = cell.y3.as_ref().map(|f| f[t]).unwrap_or(0.0);
                            if index <= floor {
                                (floor, 1)
                            } else {
                                (index, 0)
                            }
                        }
                        _ => (index, 0),
                    };
                    if m.family == Family::Censored {
                        y.push(w);
                    }
                    levels.push(level);
                    prev = level;
                }
                let mut out = OutcomeSeq::new(y);
                out.levels = Some(levels);
                if m.family == Family::Censored && m.y0 == Y0Status::Observed {
                    out.y0_level = v.y0_level;
                }
                return out;
            }
        }
        let y0 = if self.observed_discrete_y0() { v.y0 } else { None };
        OutcomeSeq::new(y).with_y0(y0)
    }

    /// One unit drawn at `cell_index`.
    fn draw_unit(&self, cell_index: usize, rng: &mut impl Rng) -> (OutcomeSeq, Vec<f64>, LatentPoint) {
        let m = &self.model;
        let cell = &self.cells[cell_index].cell;
        let zbar = mean(cell.z.iter().flatten().copied());
        let ini = &self.initial;
        let dynamic = !m.is_static();
        let mut v = LatentPoint::default();
        if dynamic && m.y0 == Y0Status::Observed {
            if m.has_discrete_outcomes() {
                v.y0 = Some(softmax_draw(m.n_categories(), ini.intercept + ini.on_z * zbar, rng));
            } else {
                v.y0_level =
                    Some(ini.intercept + ini.on_z * zbar + ini.level_sd * rng.sample::<f64, _>(StandardNormal));
            }
        }
        let u = self.latent_for(cell.cell_id, v.y0).sample_levels(m, rng);
        let y0f = v.y0.map(|x| x as f64).or(v.y0_level).unwrap_or(0.0);
        v.fe = (0..m.fe_coords().len()).map(|slot| self.draw_fe(zbar, &u, slot, y0f, rng)).collect();
        if dynamic && m.y0 == Y0Status::Unobserved {
            let cbar = mean(v.fe.iter().copied());
            let s = ini.intercept + ini.on_c * cbar + ini.on_z * zbar;
            if m.has_discrete_outcomes() {
                v.y0 = Some(softmax_draw(m.n_categories(), s, rng));
            } else {
                v.y0_level = Some(s + ini.level_sd * rng.sample::<f64, _>(StandardNormal));
            }
        }
        let y = self.roll_forward(cell, &u, &v);
        (y, u, v)
    }

    fn pick_cell(&self, rng: &mut impl Rng) -> usize {
        let r: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, c) in self.cells.iter().enumerate() {
            acc += c.weight;
            if r < acc {
                return i;
            }
        }
        self.cells.iter().rposition(|c| c.weight > 0.0).unwrap_or(0)
    }

    /// The conditioning cell of a simulated unit, carrying its observed
    /// initial condition.
    pub fn unit_cell(&self, unit: &SimUnit) -> CovariateCell {
        let mut c = self.cells[unit.cell].cell.clone();
        if self.observed_discrete_y0() {
            c.y0 = unit.latent.y0;
        }
        c
    }
}

/// Simulates `n_units` units; unit `i` uses its own stream seeded from
/// `(seed, i)`.
pub fn simulate_units(dgp: &DgpSpec, n_units: usize, seed: u64) -> Result<Vec<SimUnit>> {
    use rayon::prelude::*;
    dgp.validate()?;
    if n_units == 0 {
        return Err(Error::Validation("n_units must be at least 1".into()));
    }
    Ok((0..n_units)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(seed, i));
            let cell = dgp.pick_cell(&mut rng);
            let (outcome, u, latent) = dgp.draw_unit(cell, &mut rng);
            SimUnit { unit: i + 1, cell, outcome, u, latent }
        })
        .collect())
}

/// Writes units in the long panel format read by
/// [`estimate_f`](crate::distributions::estimate_f).
pub fn write_panel(dgp: &DgpSpec, units: &[SimUnit], out: impl Write) -> Result<()> {
    let m = &dgp.model;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = vec!["unit".into(), "period".into()];
    match m.family {
        Family::SimultaneousBinary => header.extend(["y1".into(), "y2".into()]),
        Family::Censored => header.extend(["y".into(), "w".into(), "y3".into()]),
        _ => header.push("y".into()),
    }
    if m.dim_z == 1 {
        header.push("z".into());
    } else {
        header.extend((1..=m.dim_z).map(|j| format!("z{j}")));
    }
    let with_y0 = m.y0 == Y0Status::Observed;
    if with_y0 {
        header.push("y0".into());
    }
    w.write_record(&header)?;
    let tn = m.periods;
    for u in units {
        let cell = &dgp.cells[u.cell].cell;
        for t in 0..tn {
            let mut rec: Vec<String> = vec![u.unit.to_string(), (t + 1).to_string()];
            let levels = u.outcome.levels.as_deref();
            match m.family {
                Family::SimultaneousBinary => {
                    rec.push(u.outcome.y[t].to_string());
                    rec.push(u.outcome.y[tn + t].to_string());
                }
                Family::Censored => {
                    rec.push(levels.map(|l| l[t]).unwrap_or(0.0).to_string());
                    rec.push(u.outcome.y[t].to_string());
                    rec.push(cell.y3.as_ref().map(|f| f[t]).unwrap_or(0.0).to_string());
                }
                Family::Linear => rec.push(levels.map(|l| l[t]).unwrap_or(0.0).to_string()),
                _ => rec.push(u.outcome.y[t].to_string()),
            }
            rec.extend(cell.z[t].iter().map(|v| v.to_string()));
            if with_y0 {
                let y0 = match (u.latent.y0, u.latent.y0_level) {
                    (Some(v), _) => v.to_string(),
                    (None, Some(l)) => l.to_string(),
                    _ => String::new(),
                };
                rec.push(y0);
            }
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Simulates a panel and writes it.
pub fn simulate_panel(dgp: &DgpSpec, n_units: usize, seed: u64, out: impl Write) -> Result<Vec<SimUnit>> {
    let units = simulate_units(dgp, n_units, seed)?;
    write_panel(dgp, &units, out)?;
    Ok(units)
}

/// Outcome frequencies from `draws` simulated units per DGP cell. With an
/// observed initial condition each cell splits by `y0`; split cells are
/// numbered `cell_id · n_categories + y0`.
pub fn exact_f(dgp: &DgpSpec, draws: usize, seed: u64) -> Result<CondOutcomeDist> {
    use rayon::prelude::*;
    dgp.validate()?;
    let m = &dgp.model;
    if !m.has_discrete_outcomes() {
        return Err(Error::Unsupported(format!("{:?} outcomes are continuous", m.family)));
    }
    if draws == 0 {
        return Err(Error::Validation("draws must be positive".into()));
    }
    let split = dgp.observed_discrete_y0();
    let n_cat = m.n_categories();
    let probe = |c: &CovariateCell, y0: i64| {
        let mut p = c.clone();
        if split {
            p.y0 = Some(y0);
        }
        p
    };
    let outcomes = m.enumerate_outcomes(&probe(&dgp.cells[0].cell, 0))?;
    let index: BTreeMap<Vec<i64>, usize> = outcomes.iter().enumerate().map(|(i, o)| (o.y.clone(), i)).collect();
    const CHUNK: usize = 10_000;
    let mut cells = Vec::new();
    for (ci, dc) in dgp.cells.iter().enumerate() {
        let n_chunks = draws.div_ceil(CHUNK);
        let counts = (0..n_chunks)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(cell_seed(seed, dc.cell.cell_id), k));
                let mut counts = vec![vec![0u64; outcomes.len()]; if split { n_cat } else { 1 }];
                for _ in 0..CHUNK.min(draws - k * CHUNK) {
                    let (y, _, v) = dgp.draw_unit(ci, &mut rng);
                    let slot = if split { v.y0.unwrap_or(0) as usize } else { 0 };
                    counts[slot][index[&y.y]] += 1;
                }
                counts
            })
            .reduce(
                || vec![vec![0u64; outcomes.len()]; if split { n_cat } else { 1 }],
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    a
                },
            );
        for (slot, row) in counts.into_iter().enumerate() {
            let n: u64 = row.iter().sum();
            if n == 0 {
                continue;
            }
            let mut cell = probe(&dc.cell, slot as i64);
            if split {
                cell.cell_id = dc.cell.cell_id * n_cat + slot;
            }
            let probs: Vec<f64> = row.iter().map(|c| *c as f64 / n as f64).collect();
            let std_errors = probs.iter().map(|p| (p * (1.0 - p) / n as f64).sqrt()).collect();
            cells.push(CellProbs { cell, probs, std_errors: Some(std_errors), n_units: Some(n), sparse: false });
        }
    }
    let f = CondOutcomeDist { cells };
    f.validate(m)?;
    Ok(f)
}

/// Per-cell `(E[Y_2 - Y_1 | z], z_2 - z_1)` of a linear DGP in closed form.
/// The fixed effect cancels; the latent term contributes `E[Δ_21 u]`.
pub fn linear_moments(dgp: &DgpSpec) -> Result<Vec<(f64, f64)>> {
    dgp.validate()?;
    if dgp.model.family != Family::Linear || dgp.model.dim_z != 1 {
        return Err(Error::Unsupported("linear moments need the linear family with one covariate".into()));
    }
    let b = dgp.theta.beta[0][0];
    dgp.cells
        .iter()
        .map(|c| {
            let dz = c.cell.z[1][0] - c.cell.z[0][0];
            let du = match dgp.latent.at_cell(c.cell.cell_id) {
                LatentFamily::GaussianIid { .. } | LatentFamily::GaussianCorr { .. } => 0.0,
                LatentFamily::DiscreteGrid { points, weights } => {
                    points.iter().zip(weights).map(|(p, w)| p[0] * w).sum()
                }
                LatentFamily::PiecewiseUniform { edges, weights } => {
                    (0..weights.len()).map(|i| weights[i] * 0.5 * (edges[i] + edges[i + 1])).sum()
                }
            };
            Ok((b * dz + du, dz))
        })
        .collect()
}

#[cfg(test)]
mod tests;
