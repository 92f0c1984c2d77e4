//! Latent distributions G_U with region measures, and conditional outcome
//! distributions F_{Y|Z}.
//!
//! Regions live in the differenced space. Gaussian families put i.i.d. or
//! AR(1) errors on each latent component independently; the finite families
//! are specified directly on the differenced basis (`Δ_t1 u`, component
//! major). Boundary rows carry no mass for continuous families.

mod outcome;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::models::{DiffSpace, ModelSpec};
use crate::polyhedra::{RegionUnion, Relation};
use crate::randomsets::region_contains;
use crate::scalar::{rational_from_f64, rational_to_f64, Rational};

pub use outcome::{estimate_f, CellProbs, CondOutcomeDist};

pub const DEFAULT_DRAWS: usize = 200_000;
pub const DEFAULT_SEED: u64 = 0x5e_ed0f_5e75;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum LatentFamily {
    GaussianIid {
        sigma: f64,
    },
    /// Stationary AR(1) errors within each component.
    GaussianCorr {
        sigma: f64,
        rho: f64,
    },
    /// Finite support on the differenced basis.
    DiscreteGrid {
        points: Vec<Vec<f64>>,
        weights: Vec<f64>,
    },
    /// Piecewise-uniform density of a scalar `Δu` on `edges`.
    PiecewiseUniform {
        edges: Vec<f64>,
        weights: Vec<f64>,
    },
}

/// A latent distribution, optionally varying across covariate cells.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatentDist {
    #[serde(flatten)]
    pub base: LatentFamily,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub per_cell: BTreeMap<usize, LatentFamily>,
}

impl From<LatentFamily> for LatentDist {
    fn from(base: LatentFamily) -> Self {
        LatentDist { base, per_cell: BTreeMap::new() }
    }
}

fn check_weights(w: &[f64]) -> Result<()> {
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Validation("weights must be finite and nonnegative".into()));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("weights sum to {s}, expected 1")));
    }
    Ok(())
}

impl LatentFamily {
    pub fn gaussian(sigma: f64) -> Self {
        LatentFamily::GaussianIid { sigma }
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        let dim = model.diff_space().basis_dim();
        match self {
            LatentFamily::GaussianIid { sigma } | LatentFamily::GaussianCorr { sigma, .. }
                if !(sigma.is_finite() && *sigma > 0.0) =>
            {
                Err(Error::Validation(format!("sigma must be positive, got {sigma}")))
            }
            LatentFamily::GaussianCorr { rho, .. } if !(rho.abs() < 1.0) => {
                Err(Error::Validation(format!("rho must lie in (-1, 1), got {rho}")))
            }
            LatentFamily::DiscreteGrid { points, weights } => {
                if points.is_empty() || points.len() != weights.len() {
                    return Err(Error::Validation("discrete_grid needs one weight per point".into()));
                }
                if let Some(p) = points.iter().find(|p| p.len() != dim || p.iter().any(|v| !v.is_finite())) {
                    return Err(Error::Validation(format!("support point {p:?} must have {dim} finite coordinates")));
                }
                check_weights(weights)
            }
            LatentFamily::PiecewiseUniform { edges, weights } => {
                if dim != 1 {
                    return Err(Error::Validation(
                        "piecewise_uniform needs a one-dimensional differenced space".into(),
                    ));
                }
                if edges.len() < 2 || weights.len() + 1 != edges.len() {
                    return Err(Error::Validation("piecewise_uniform needs one weight per interval".into()));
                }
                if edges.windows(2).any(|w| !(w[0] < w[1])) || edges.iter().any(|e| !e.is_finite()) {
                    return Err(Error::Validation("edges must be finite and strictly increasing".into()));
                }
                check_weights(weights)
            }
            _ => Ok(()),
        }
    }

    /// A draw of the latent levels, component-major. Finite families pin
    /// the first period of each component at zero.
    pub fn sample_levels(&self, model: &ModelSpec, rng: &mut impl Rng) -> Vec<f64> {
        let tn = model.periods;
        let nc = model.comps().len();
        match self {
            LatentFamily::GaussianIid { sigma } => {
                (0..nc * tn).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect()
            }
            LatentFamily::GaussianCorr { sigma, rho } => {
                let innov = sigma * (1.0 - rho * rho).sqrt();
                let mut out = Vec::with_capacity(nc * tn);
                for _ in 0..nc {
                    let mut prev = sigma * rng.sample::<f64, _>(StandardNormal);
                    out.push(prev);
                    for _ in 1..tn {
                        prev = rho * prev + innov * rng.sample::<f64, _>(StandardNormal);
                        out.push(prev);
                    }
                }
                out
            }
            LatentFamily::DiscreteGrid { points, weights } => {
                let p = &points[pick(weights, rng)];
                let mut out = Vec::with_capacity(nc * tn);
                for c in 0..nc {
                    out.push(0.0);
                    out.extend_from_slice(&p[c * (tn - 1)..(c + 1) * (tn - 1)]);
                }
                out
            }
            LatentFamily::PiecewiseUniform { edges, weights } => {
                let i = pick(weights, rng);
                vec![0.0, rng.gen_range(edges[i]..edges[i + 1])]
            }
        }
    }

    /// Exact measure, when the family and region allow it.
    fn exact(&self, model: &ModelSpec, region: &RegionUnion<Rational>) -> Result<Option<f64>> {
        let space = model.diff_space();
        match self {
            LatentFamily::DiscreteGrid { points, weights } => {
                let mut total = 0.0;
                for (p, w) in points.iter().zip(weights) {
                    let b = p.iter().map(|v| rational_from_f64(*v)).collect::<Result<Vec<_>>>()?;
                    if region_contains(model, region, &b)? {
                        total += w;
                    }
                }
                Ok(Some(total))
            }
            _ if space.basis_dim() != 1 => Ok(None),
            LatentFamily::GaussianIid { sigma } => {
                let sd = sigma * 2f64.sqrt();
                Ok(Some(interval_mass(&intervals(&space, region)?, |x| normal_cdf(x / sd))))
            }
            LatentFamily::GaussianCorr { sigma, rho } => {
                let sd = sigma * (2.0 * (1.0 - rho)).sqrt();
                Ok(Some(interval_mass(&intervals(&space, region)?, |x| normal_cdf(x / sd))))
            }
            LatentFamily::PiecewiseUniform { edges, weights } => {
                let cdf = |x: f64| piecewise_cdf(edges, weights, x);
                Ok(Some(interval_mass(&intervals(&space, region)?, cdf)))
            }
        }
    }
}

fn pick(weights: &[f64], rng: &mut impl Rng) -> usize {
    let r: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if r < acc {
            return i;
        }
    }
    weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
}

fn normal_cdf(x: f64) -> f64 {
    if x == f64::INFINITY {
        1.0
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        Normal::standard().cdf(x)
    }
}

fn piecewise_cdf(edges: &[f64], weights: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let (a, b) = (edges[i], edges[i + 1]);
        if x >= b {
            acc += w;
        } else if x > a {
            acc += w * (x - a) / (b - a);
        }
    }
    acc
}

/// Disjoint closed intervals making up a one-dimensional region.
pub(crate) fn intervals(space: &DiffSpace, region: &RegionUnion<Rational>) -> Result<Vec<(f64, f64)>> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    for part in region.parts() {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for row in part.rows() {
            let mut a = 0.0;
            for (c, k) in row.coeffs() {
                for (_, w) in space.expand(c)? {
                    a += w * rational_to_f64(k);
                }
            }
            if a == 0.0 {
                continue;
            }
            let b = rational_to_f64(row.rhs()) / a;
            match (row.rel(), a > 0.0) {
                (Relation::Eq, _) => {
                    lo = lo.max(b);
                    hi = hi.min(b);
                }
                (_, true) => hi = hi.min(b),
                (_, false) => lo = lo.max(b),
            }
        }
        if lo < hi {
            out.push((lo, hi));
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in out {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    Ok(merged)
}

fn interval_mass(iv: &[(f64, f64)], cdf: impl Fn(f64) -> f64) -> f64 {
    iv.iter().map(|(a, b)| cdf(*b) - cdf(*a)).sum::<f64>().clamp(0.0, 1.0)
}

impl LatentDist {
    pub fn gaussian(sigma: f64) -> Self {
        LatentFamily::gaussian(sigma).into()
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        self.base.validate(model)?;
        for f in self.per_cell.values() {
            f.validate(model)?;
        }
        Ok(())
    }

    pub fn at_cell(&self, cell_id: usize) -> &LatentFamily {
        self.per_cell.get(&cell_id).unwrap_or(&self.base)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureOptions {
    pub seed: u64,
    pub draws: usize,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        MeasureOptions { seed: DEFAULT_SEED, draws: DEFAULT_DRAWS }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeasureValue {
    pub estimate: f64,
    pub std_error: f64,
    /// Zero for closed-form values.
    pub n_draws: usize,
}

impl MeasureValue {
    pub fn exact(v: f64) -> Self {
        MeasureValue { estimate: v, std_error: 0.0, n_draws: 0 }
    }
}

/// Seed of the stream used for one cell.
pub fn cell_seed(seed: u64, cell_id: usize) -> u64 {
    let mut x = seed ^ (cell_id as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// A region compiled to rows over the differenced basis.
struct Compiled {
    /// Per part: rows `a·x <= b`; parts with an equality have no volume
    /// and are dropped.
    parts: Vec<Vec<(Vec<f64>, f64)>>,
}

impl Compiled {
    fn new(space: &DiffSpace, region: &RegionUnion<Rational>) -> Result<Self> {
        let dim = space.basis_dim();
        let mut parts = Vec::new();
        'part: for part in region.parts() {
            let mut rows = Vec::new();
            for row in part.rows() {
                let mut a = vec![0.0; dim];
                for (c, k) in row.coeffs() {
                    let k = rational_to_f64(k);
                    for (i, w) in space.expand(c)? {
                        a[i] += w * k;
                    }
                }
                let b = rational_to_f64(row.rhs());
                if a.iter().all(|v| *v == 0.0) {
                    if 0.0 > b || (row.rel() == Relation::Eq && b != 0.0) {
                        continue 'part;
                    }
                    continue;
                }
                if row.rel() == Relation::Eq {
                    continue 'part;
                }
                rows.push((a, b));
            }
            parts.push(rows);
        }
        Ok(Compiled { parts })
    }

    fn contains(&self, x: &[f64]) -> bool {
        self.parts.iter().any(|rows| rows.iter().all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= *b))
    }
}

/// Measures regions under one latent distribution at one cell, sharing a
/// fixed set of draws across queries so that comparisons across regions
/// (and across parameter values) use common random numbers.
pub struct Measurer {
    model: ModelSpec,
    family: LatentFamily,
    opts: MeasureOptions,
    cell_id: usize,
    draws: std::sync::OnceLock<Vec<f64>>,
}

impl Measurer {
    pub fn new(model: &ModelSpec, g: &LatentDist, cell_id: usize, opts: MeasureOptions) -> Result<Self> {
        let family = g.at_cell(cell_id).clone();
        family.validate(model)?;
        if opts.draws == 0 {
            return Err(Error::Validation("draws must be positive".into()));
        }
        Ok(Measurer { model: model.clone(), family, opts, cell_id, draws: std::sync::OnceLock::new() })
    }

    /// Whether measures are closed form for this family and space.
    pub fn is_exact(&self) -> bool {
        matches!(self.family, LatentFamily::DiscreteGrid { .. }) || self.model.diff_space().basis_dim() == 1
    }

    fn draws(&self) -> &[f64] {
        self.draws.get_or_init(|| {
            let space = self.model.diff_space();
            let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(self.opts.seed, self.cell_id));
            let mut out = Vec::with_capacity(self.opts.draws * space.basis_dim());
            for _ in 0..self.opts.draws {
                let u = self.family.sample_levels(&self.model, &mut rng);
                out.extend(space.basis_from_levels(&u));
            }
            out
        })
    }

    fn check_coords(&self, region: &RegionUnion<Rational>) -> Result<()> {
        let known = self.model.diff_space().coords();
        if let Some(c) = region.coords().iter().find(|c| !known.contains(c)) {
            return Err(Error::Validation(format!("coordinate {c} is not part of the latent space")));
        }
        Ok(())
    }

    pub fn measure(&self, region: &RegionUnion<Rational>) -> Result<MeasureValue> {
        Ok(self.measure_unions(&[region], &[1])?.remove(0))
    }

    /// Measures of unions of `atoms`, each union given as a bitmask over
    /// the atoms.
    pub fn measure_unions(&self, atoms: &[&RegionUnion<Rational>], unions: &[u64]) -> Result<Vec<MeasureValue>> {
        if atoms.len() > 64 {
            return Err(Error::Capacity("at most 64 regions per batch".into()));
        }
        for a in atoms {
            self.check_coords(a)?;
        }
        if self.is_exact() {
            let coords = self.model.diff_space().coords();
            return unions
                .iter()
                .map(|mask| {
                    let mut r = RegionUnion::empty(coords.clone());
                    for (i, a) in atoms.iter().enumerate() {
                        if mask >> i & 1 == 1 {
                            r = r.union(a);
                        }
                    }
                    Ok(MeasureValue::exact(self.family.exact(&self.model, &r)?.expect("exact family")))
                })
                .collect();
        }
        let space = self.model.diff_space();
        let dim = space.basis_dim();
        let compiled = atoms.iter().map(|a| Compiled::new(&space, a)).collect::<Result<Vec<_>>>()?;
        let draws = self.draws();
        let n = self.opts.draws;
        let mut counts = vec![0u64; unions.len()];
        for x in draws.chunks_exact(dim) {
            let mut m = 0u64;
            for (i, c) in compiled.iter().enumerate() {
                if c.contains(x) {
                    m |= 1 << i;
                }
            }
            for (k, u) in unions.iter().enumerate() {
                if m & u != 0 {
                    counts[k] += 1;
                }
            }
        }
        Ok(counts
            .into_iter()
            .map(|c| {
                let p = c as f64 / n as f64;
                MeasureValue { estimate: p, std_error: (p * (1.0 - p) / n as f64).sqrt(), n_draws: n }
            })
            .collect())
    }
}

/// `G(region)` at one cell.
pub fn measure(
    model: &ModelSpec,
    g: &LatentDist,
    region: &RegionUnion<Rational>,
    cell_id: usize,
    opts: MeasureOptions,
) -> Result<MeasureValue> {
    Measurer::new(model, g, cell_id, opts)?.measure(region)
}

#[cfg(test)]
mod tests;
