//! Model families, parameters, covariate cells and outcome sequences.

mod dt;
mod residual;
mod space;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::polyhedra::Coord;
use crate::scalar::{rational_from_f64, Bound, Rational};

pub use dt::{dt_inverse, latent_system, DtBranch};
pub use residual::{feasible_latent, structural_residual, LatentPoint};
pub use space::DiffSpace;

pub const MAX_PERIODS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Linear,
    BinaryStatic,
    BinaryDynamic,
    Ordered,
    Multidiscrete,
    SimultaneousBinary,
    Censored,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Y0Status {
    Observed,
    Unobserved,
    #[default]
    Absent,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignKind {
    Positive,
    Negative,
    NonNegative,
    NonPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SignRestriction {
    /// `gamma`, `alpha`, `beta`, `cuts`, optionally indexed as `alpha[1]`.
    pub param: String,
    pub sign: SignKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub family: Family,
    pub periods: usize,
    #[serde(default)]
    pub y0: Y0Status,
    #[serde(default = "one")]
    pub dim_z: usize,
    /// Categories (ordered) or alternatives (multidiscrete).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_choices: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sign_restrictions: Vec<SignRestriction>,
}

fn one() -> usize {
    1
}

impl ModelSpec {
    pub fn new(family: Family, periods: usize, y0: Y0Status) -> Self {
        ModelSpec { family, periods, y0, dim_z: 1, n_choices: None, sign_restrictions: Vec::new() }
    }

    pub fn with_choices(mut self, n: usize) -> Self {
        self.n_choices = Some(n);
        self
    }

    pub fn with_dim_z(mut self, d: usize) -> Self {
        self.dim_z = d;
        self
    }

    pub fn validate(&self) -> Result<()> {
        use Family::*;
        if !(2..=MAX_PERIODS).contains(&self.periods) {
            return Err(Error::Validation(format!(
                "periods must be between 2 and {MAX_PERIODS}, got {}",
                self.periods
            )));
        }
        let always_static = matches!(self.family, Linear | BinaryStatic | Multidiscrete | SimultaneousBinary);
        if always_static && self.y0 != Y0Status::Absent {
            return Err(Error::Validation(format!("{:?} has no initial condition; y0 must be absent", self.family)));
        }
        if self.family == BinaryDynamic && self.y0 == Y0Status::Absent {
            return Err(Error::Validation("binary_dynamic needs y0 observed or unobserved".into()));
        }
        match (self.family, self.n_choices) {
            (Ordered, Some(n)) if n >= 2 => {}
            (Multidiscrete, Some(n)) if (2..=5).contains(&n) => {}
            (Ordered, _) => return Err(Error::Validation("ordered needs n_choices >= 2".into())),
            (Multidiscrete, _) => return Err(Error::Validation("multidiscrete needs 2 <= n_choices <= 5".into())),
            (_, None) | (_, Some(2)) => {}
            (f, Some(n)) => return Err(Error::Validation(format!("{f:?} takes no n_choices (got {n})"))),
        }
        if self.dim_z == 0 {
            return Err(Error::Validation("dim_z must be positive".into()));
        }
        Ok(())
    }

    pub fn is_static(&self) -> bool {
        self.y0 == Y0Status::Absent
    }

    /// Number of values an initial condition can take when it is discrete.
    pub fn n_categories(&self) -> usize {
        match self.family {
            Family::Ordered | Family::Multidiscrete => self.n_choices.unwrap_or(2),
            _ => 2,
        }
    }

    /// Latent components carried by `u`.
    pub fn comps(&self) -> Vec<u8> {
        match self.family {
            Family::Multidiscrete => (1..=self.n_categories() as u8).collect(),
            Family::SimultaneousBinary => vec![1, 2],
            _ => vec![0],
        }
    }

    /// Fixed-effect coordinates eliminated when forming U* sets.
    pub fn fe_coords(&self) -> Vec<Coord> {
        match self.family {
            Family::Multidiscrete => (1..self.n_categories() as u8).map(Coord::Fe).collect(),
            Family::SimultaneousBinary => vec![Coord::Fe(1), Coord::Fe(2)],
            _ => vec![Coord::Fe(0)],
        }
    }

    /// Coordinates projected out of the latent system: fixed effects plus a
    /// continuous unobserved initial condition.
    pub fn latent_coords(&self) -> Vec<Coord> {
        let mut v = self.fe_coords();
        if self.family == Family::Censored && self.y0 == Y0Status::Unobserved {
            v.push(Coord::Init);
        }
        v
    }

    pub fn level_coords(&self) -> Vec<Coord> {
        let mut v = Vec::new();
        for comp in self.comps() {
            for t in 1..=self.periods as u8 {
                v.push(Coord::Level { comp, t });
            }
        }
        v
    }

    pub fn diff_space(&self) -> DiffSpace {
        DiffSpace::new(self.comps(), self.periods)
    }

    /// Number of index slots `zβ`: one per non-base alternative or equation.
    pub fn n_index(&self) -> usize {
        match self.family {
            Family::Multidiscrete => self.n_categories() - 1,
            Family::SimultaneousBinary => 2,
            _ => 1,
        }
    }

    /// Length of the outcome vector `y`.
    pub fn outcome_len(&self) -> usize {
        match self.family {
            Family::SimultaneousBinary => 2 * self.periods,
            _ => self.periods,
        }
    }

    pub fn has_discrete_outcomes(&self) -> bool {
        !matches!(self.family, Family::Censored | Family::Linear)
    }

    /// Every outcome sequence, in lexicographic order, carrying the cell's
    /// observed initial condition.
    pub fn enumerate_outcomes(&self, cell: &CovariateCell) -> Result<Vec<OutcomeSeq>> {
        if !self.has_discrete_outcomes() {
            return Err(Error::Unsupported(format!("{:?} has continuous outcomes", self.family)));
        }
        let (lo, hi) = match self.family {
            Family::Ordered => (0, self.n_categories() as i64 - 1),
            Family::Multidiscrete => (1, self.n_categories() as i64),
            _ => (0, 1),
        };
        let y0 = match self.y0 {
            Y0Status::Observed => {
                Some(cell.y0.ok_or_else(|| Error::Validation(format!("cell {} lacks the observed y0", cell.cell_id)))?)
            }
            _ => None,
        };
        let n = self.outcome_len();
        let base = (hi - lo + 1) as usize;
        let total = base.pow(n as u32);
        let mut out = Vec::with_capacity(total);
        for mut k in 0..total {
            let mut y = vec![0i64; n];
            for slot in (0..n).rev() {
                y[slot] = lo + (k % base) as i64;
                k /= base;
            }
            out.push(OutcomeSeq { y, y0, ..OutcomeSeq::default() });
        }
        Ok(out)
    }

    pub fn check_outcome(&self, y: &OutcomeSeq) -> Result<()> {
        if y.y.len() != self.outcome_len() && !(self.family == Family::Linear && y.y.is_empty()) {
            return Err(Error::Validation(format!(
                "outcome {y} has length {}, expected {}",
                y.y.len(),
                self.outcome_len()
            )));
        }
        let (lo, hi) = match self.family {
            Family::Ordered => (0, self.n_categories() as i64 - 1),
            Family::Multidiscrete => (1, self.n_categories() as i64),
            Family::Linear => (i64::MIN, i64::MAX),
            _ => (0, 1),
        };
        if let Some(v) = y.y.iter().find(|v| **v < lo || **v > hi) {
            return Err(Error::Validation(format!("outcome value {v} outside {lo}..={hi}")));
        }
        if matches!(self.family, Family::Censored | Family::Linear) {
            let levels =
                y.levels.as_ref().ok_or_else(|| Error::Validation("continuous outcome needs levels".into()))?;
            if levels.len() != self.periods {
                return Err(Error::Validation("levels must have one entry per period".into()));
            }
        }
        Ok(())
    }
}

/// One outcome path. Discrete families use `y`; the censored model uses `y`
/// as the censoring pattern (1 = censored) with `levels` holding the
/// observed outcome; the linear model uses `levels` only.
#[derive(Clone, Debug, Default, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSeq {
    pub y: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Endogenous regressor per period (censored model).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endog: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0_level: Option<f64>,
}

impl OutcomeSeq {
    pub fn new(y: Vec<i64>) -> Self {
        OutcomeSeq { y, ..Default::default() }
    }

    pub fn with_y0(mut self, y0: Option<i64>) -> Self {
        self.y0 = y0;
        self
    }

    pub fn label(&self) -> String {
        let parts: Vec<String> = self.y.iter().map(|v| v.to_string()).collect();
        format!("({})", parts.join(","))
    }
}

impl fmt::Display for OutcomeSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// A conditioning cell: covariate path, plus the observed initial condition
/// and endogenous regressors when the model conditions on them.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariateCell {
    pub cell_id: usize,
    /// `z[t][j]`, one row per period.
    pub z: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y2: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y0: Option<i64>,
    /// Censoring thresholds per period, used when simulating.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y3: Option<Vec<f64>>,
}

impl CovariateCell {
    pub fn new(cell_id: usize, z: Vec<Vec<f64>>) -> Self {
        CovariateCell { cell_id, z, ..Default::default() }
    }

    /// A cell with one scalar covariate per period.
    pub fn scalar(cell_id: usize, z: &[f64]) -> Self {
        Self::new(cell_id, z.iter().map(|v| vec![*v]).collect())
    }

    pub fn with_y0(mut self, y0: i64) -> Self {
        self.y0 = Some(y0);
        self
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        if self.z.len() != model.periods {
            return Err(Error::Validation(format!(
                "cell {} has {} covariate rows, expected {}",
                self.cell_id,
                self.z.len(),
                model.periods
            )));
        }
        if let Some(row) = self.z.iter().find(|r| r.len() != model.dim_z) {
            return Err(Error::Validation(format!(
                "cell {}: covariate row of length {}, expected {}",
                self.cell_id,
                row.len(),
                model.dim_z
            )));
        }
        if self.z.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("cell {}: non-finite covariate", self.cell_id)));
        }
        if let Some(y2) = &self.y2 {
            if y2.len() != model.periods {
                return Err(Error::Validation(format!("cell {}: y2 needs one row per period", self.cell_id)));
            }
        }
        if model.y0 == Y0Status::Observed && model.has_discrete_outcomes() {
            match self.y0 {
                Some(v) if (0..model.n_categories() as i64).contains(&v) => {}
                Some(v) => return Err(Error::Validation(format!("cell {}: y0 = {v} out of range", self.cell_id))),
                None => return Err(Error::Validation(format!("cell {} lacks the observed y0", self.cell_id))),
            }
        }
        Ok(())
    }
}

/// Structural parameters. `beta` holds one coefficient vector per index
/// slot; JSON accepts a flat vector when there is a single slot, and a
/// number wherever a one-element vector is expected.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Theta {
    #[serde(default, deserialize_with = "scalar_or_vec")]
    pub alpha: Vec<f64>,
    #[serde(deserialize_with = "flat_or_nested")]
    pub beta: Vec<Vec<f64>>,
    #[serde(default, deserialize_with = "scalar_or_vec")]
    pub gamma: Vec<f64>,
    #[serde(default)]
    pub cuts: Vec<f64>,
}

fn scalar_or_vec<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match Repr::deserialize(d)? {
        Repr::One(v) => vec![v],
        Repr::Many(v) => v,
    })
}

fn flat_or_nested<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<Vec<f64>>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        One(f64),
        Flat(Vec<f64>),
        Nested(Vec<Vec<f64>>),
    }
    Ok(match Repr::deserialize(d)? {
        Repr::One(v) => vec![vec![v]],
        Repr::Flat(v) => vec![v],
        Repr::Nested(v) => v,
    })
}

impl Theta {
    pub fn scalar_beta(beta: f64) -> Self {
        Theta { beta: vec![vec![beta]], ..Default::default() }
    }

    pub fn with_gamma(mut self, g: f64) -> Self {
        self.gamma = vec![g];
        self
    }

    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        use Family::*;
        let all = self.alpha.iter().chain(self.beta.iter().flatten()).chain(&self.gamma).chain(&self.cuts);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Validation("theta has a non-finite entry".into()));
        }
        if self.beta.len() != model.n_index() {
            return Err(Error::Validation(format!(
                "beta needs {} coefficient vector(s), got {}",
                model.n_index(),
                self.beta.len()
            )));
        }
        if let Some(b) = self.beta.iter().find(|b| b.len() != model.dim_z) {
            return Err(Error::Validation(format!("beta vector of length {}, expected {}", b.len(), model.dim_z)));
        }
        let want_gamma = match (model.family, model.is_static()) {
            (_, true) => 0,
            (Ordered, false) => model.n_categories(),
            (_, false) => 1,
        };
        if self.gamma.len() != want_gamma && !(want_gamma == 0 && self.gamma.iter().all(|g| *g == 0.0)) {
            return Err(Error::Validation(format!("gamma needs {want_gamma} entries, got {}", self.gamma.len())));
        }
        match model.family {
            SimultaneousBinary if self.alpha.len() != 2 => {
                return Err(Error::Validation("simultaneous_binary needs two alpha entries".into()))
            }
            Ordered | Multidiscrete | Linear if !self.alpha.is_empty() => {
                return Err(Error::Validation(format!("{:?} takes no alpha", model.family)))
            }
            _ => {}
        }
        if model.family == Ordered {
            let j = model.n_categories() - 1;
            if self.cuts.len() != j {
                return Err(Error::Validation(format!("ordered needs {j} cuts, got {}", self.cuts.len())));
            }
            if self.cuts.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Validation("cuts must be strictly increasing".into()));
            }
        } else if !self.cuts.is_empty() {
            return Err(Error::Validation(format!("{:?} takes no cuts", model.family)));
        }
        for r in &model.sign_restrictions {
            self.check_sign(r)?;
        }
        Ok(())
    }

    /// Sets one parameter named like `beta`, `gamma[1]` or `cuts[0]`;
    /// `beta` indexes its flattened slots, and a bare name means index 0.
    pub fn set_param(&mut self, param: &str, value: f64) -> Result<()> {
        let (name, index) = split_param(param)?;
        let i = index.unwrap_or(0);
        let slot = match name {
            "alpha" => self.alpha.get_mut(i),
            "gamma" => self.gamma.get_mut(i),
            "cuts" => self.cuts.get_mut(i),
            "beta" => self.beta.iter_mut().flatten().nth(i),
            _ => return Err(Error::Validation(format!("unknown parameter {param:?}"))),
        };
        *slot.ok_or_else(|| Error::Validation(format!("parameter {param:?} is out of range")))? = value;
        Ok(())
    }

    fn check_sign(&self, r: &SignRestriction) -> Result<()> {
        let (name, index) = split_param(&r.param)?;
        let values: Vec<f64> = match name {
            "alpha" => self.alpha.clone(),
            "beta" => self.beta.iter().flatten().copied().collect(),
            "gamma" => self.gamma.clone(),
            "cuts" => self.cuts.clone(),
            _ => return Err(Error::Validation(format!("unknown parameter {:?}", r.param))),
        };
        let values: Vec<f64> = match index {
            Some(i) => {
                vec![*values.get(i).ok_or_else(|| Error::Validation(format!("index out of range in {:?}", r.param)))?]
            }
            None => values,
        };
        let ok = values.iter().all(|v| match r.sign {
            SignKind::Positive => *v > 0.0,
            SignKind::Negative => *v < 0.0,
            SignKind::NonNegative => *v >= 0.0,
            SignKind::NonPositive => *v <= 0.0,
        });
        if ok {
            Ok(())
        } else {
            Err(Error::Validation(format!("{} violates its {:?} restriction", r.param, r.sign)))
        }
    }
}

fn split_param(param: &str) -> Result<(&str, Option<usize>)> {
    match param.split_once('[') {
        Some((n, rest)) => {
            let i: usize = rest
                .strip_suffix(']')
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::Validation(format!("bad parameter name {param:?}")))?;
            Ok((n, Some(i)))
        }
        None => Ok((param, None)),
    }
}

/// Parameter values entering the latent inequalities, either as exact
/// numbers or as symbolic expressions.
#[derive(Clone, Debug)]
pub struct ParamValues<B> {
    /// `zb[k][t-1]`: index of slot `k` in period `t`.
    pub zb: Vec<Vec<B>>,
    pub alpha: Vec<B>,
    pub gamma: Vec<B>,
    pub cuts: Vec<B>,
    /// Replaces `γ·y0` in period one (used for symbolic tables).
    pub initial_lag: Option<B>,
}

impl ParamValues<Rational> {
    /// Exact values of `θ` at a covariate cell.
    pub fn numeric(model: &ModelSpec, theta: &Theta, cell: &CovariateCell) -> Result<Self> {
        model.validate()?;
        theta.validate(model)?;
        cell.validate(model)?;
        let conv = |v: &[f64]| v.iter().map(|x| rational_from_f64(*x)).collect::<Result<Vec<_>>>();
        let z: Vec<Vec<Rational>> = cell.z.iter().map(|r| conv(r)).collect::<Result<_>>()?;
        let mut zb = Vec::new();
        for b in &theta.beta {
            let b = conv(b)?;
            zb.push(z.iter().map(|row| row.iter().zip(&b).map(|(a, c)| a * c).sum()).collect());
        }
        Ok(ParamValues {
            zb,
            alpha: conv(&theta.alpha)?,
            gamma: conv(&theta.gamma)?,
            cuts: conv(&theta.cuts)?,
            initial_lag: None,
        })
    }
}

impl<B: Bound> ParamValues<B> {
    pub(crate) fn gamma_at(&self, j: usize) -> B {
        self.gamma.get(j).cloned().unwrap_or_else(B::zero)
    }
}

#[cfg(test)]
mod tests;
