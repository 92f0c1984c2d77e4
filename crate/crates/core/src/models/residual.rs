//! Structural-equation residuals computed directly from the forward model,
//! and a numerical search for latent values that explain an outcome.

use serde::{Deserialize, Serialize};

use super::{CovariateCell, Family, ModelSpec, OutcomeSeq, Theta, Y0Status};
use crate::error::{Error, Result};

/// Values of the variables projected out of U*: fixed effects and the
/// initial condition.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LatentPoint {
    pub fe: Vec<f64>,
    #[serde(default)]
    pub y0: Option<i64>,
    #[serde(default)]
    pub y0_level: Option<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn hinge(x: f64) -> f64 {
    x.max(0.0)
}

/// Total violation of the structural equations by `(u, v)`. Zero exactly
/// when `(u, v)` generates `y` (ties resolved in favour of `y`). `u` is laid
/// out component-major: `u[c * T + t - 1]`.
pub fn structural_residual(
    model: &ModelSpec,
    theta: &Theta,
    y: &OutcomeSeq,
    cell: &CovariateCell,
    u: &[f64],
    v: &LatentPoint,
) -> Result<f64> {
    let tn = model.periods;
    if u.len() != model.comps().len() * tn {
        return Err(Error::Validation(format!("u has length {}, expected {}", u.len(), model.comps().len() * tn)));
    }
    if v.fe.len() != model.fe_coords().len() {
        return Err(Error::Validation(format!("{} fixed effects, expected {}", v.fe.len(), model.fe_coords().len())));
    }
    let fwd = Forward::new(model, theta, y, cell)?;
    let y0 = match model.y0 {
        Y0Status::Observed => y.y0.or(v.y0).or(cell.y0),
        _ => v.y0,
    };
    let needs_y0 = !model.is_static() && model.has_discrete_outcomes();
    if needs_y0 && y0.is_none() {
        return Err(Error::Validation("initial condition value missing".into()));
    }
    let needs_level = model.family == Family::Censored && !model.is_static();
    let y0_level = y.y0_level.or(v.y0_level);
    if needs_level && y0_level.is_none() {
        return Err(Error::Validation("initial level missing".into()));
    }
    Ok(fwd.residual(u, &v.fe, y0.unwrap_or(0), y0_level.unwrap_or(0.0)))
}

/// Per-period constants of the forward model for one outcome and cell.
struct Forward<'a> {
    model: &'a ModelSpec,
    theta: &'a Theta,
    y: &'a OutcomeSeq,
    /// `zb[k][t]`
    zb: Vec<Vec<f64>>,
    /// Endogenous-regressor contribution per period.
    x: Vec<f64>,
    levels: Vec<f64>,
}

impl<'a> Forward<'a> {
    fn new(model: &'a ModelSpec, theta: &'a Theta, y: &'a OutcomeSeq, cell: &CovariateCell) -> Result<Self> {
        model.validate()?;
        theta.validate(model)?;
        cell.validate(model)?;
        model.check_outcome(y)?;
        let tn = model.periods;
        let zb = theta.beta.iter().map(|b| (0..tn).map(|t| dot(&cell.z[t], b)).collect()).collect();
        let x = (0..tn)
            .map(|t| match (&y.endog, &cell.y2) {
                (Some(e), _) => theta.alpha.first().copied().unwrap_or(0.0) * e[t],
                (None, Some(m)) if model.family != Family::SimultaneousBinary => dot(&m[t], &theta.alpha),
                _ => 0.0,
            })
            .collect();
        Ok(Forward { model, theta, y, zb, x, levels: y.levels.clone().unwrap_or_default() })
    }

    fn residual(&self, u: &[f64], fe: &[f64], y0: i64, y0_level: f64) -> f64 {
        let (model, theta, y) = (self.model, self.theta, self.y);
        let tn = model.periods;
        let g0 = theta.gamma.first().copied().unwrap_or(0.0);
        let discrete_lag = |t: usize| -> f64 {
            if model.is_static() {
                return 0.0;
            }
            let prev = if t == 0 { y0 } else { y.y[t - 1] };
            match model.family {
                Family::Ordered => theta.gamma[prev as usize],
                _ => g0 * prev as f64,
            }
        };
        let mut r = 0.0;
        for t in 0..tn {
            match model.family {
                Family::BinaryStatic | Family::BinaryDynamic => {
                    let index = self.zb[0][t] + self.x[t] + discrete_lag(t) + fe[0] + u[t];
                    r += if y.y[t] == 1 { hinge(-index) } else { hinge(index) };
                }
                Family::Ordered => {
                    let index = self.zb[0][t] + discrete_lag(t) + fe[0] + u[t];
                    let j = y.y[t] as usize;
                    if j >= 1 {
                        r += hinge(theta.cuts[j - 1] - index);
                    }
                    if j < theta.cuts.len() {
                        r += hinge(index - theta.cuts[j]);
                    }
                }
                Family::Multidiscrete => {
                    let k = model.n_categories();
                    let util = |a: usize| {
                        let base = if a == k { 0.0 } else { self.zb[a - 1][t] + fe[a - 1] };
                        base + u[(a - 1) * tn + t]
                    };
                    let d = y.y[t] as usize;
                    let ud = util(d);
                    for e in (1..=k).filter(|e| *e != d) {
                        r += hinge(util(e) - ud);
                    }
                }
                Family::SimultaneousBinary => {
                    for eq in 0..2 {
                        let own = y.y[eq * tn + t];
                        let other = y.y[(1 - eq) * tn + t];
                        let index = theta.alpha[eq] * other as f64 + self.zb[eq][t] + fe[eq] + u[eq * tn + t];
                        r += if own == 1 { hinge(-index) } else { hinge(index) };
                    }
                }
                Family::Censored | Family::Linear => {
                    let lag = if model.family == Family::Linear || model.is_static() {
                        0.0
                    } else if t >= 1 {
                        g0 * self.levels[t - 1]
                    } else {
                        g0 * y0_level
                    };
                    let index = self.x[t] + self.zb[0][t] + lag + fe[0] + u[t];
                    let censored = model.family == Family::Censored && y.y[t] == 1;
                    r += if censored { hinge(index - self.levels[t]) } else { (index - self.levels[t]).abs() };
                }
            }
        }
        r
    }
}

/// Minimises a convex function over a box by nested ternary search.
fn nested_min(f: &dyn Fn(&[f64]) -> f64, dims: usize, radius: f64) -> f64 {
    fn rec(f: &dyn Fn(&[f64]) -> f64, prefix: &mut Vec<f64>, dims: usize, radius: f64, iters: usize) -> f64 {
        if prefix.len() == dims {
            return f(prefix);
        }
        let eval = |x: f64, prefix: &mut Vec<f64>| {
            prefix.push(x);
            let v = rec(f, prefix, dims, radius, iters);
            prefix.pop();
            v
        };
        let (mut lo, mut hi) = (-radius, radius);
        for _ in 0..iters {
            let m1 = lo + (hi - lo) / 3.0;
            let m2 = hi - (hi - lo) / 3.0;
            if eval(m1, prefix) <= eval(m2, prefix) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        eval(0.5 * (lo + hi), prefix)
    }
    let iters = match dims {
        0 | 1 => 100,
        2 => 64,
        _ => 45,
    };
    rec(f, &mut Vec::new(), dims, radius, iters)
}

/// Whether some fixed effect (and initial condition, when unobserved)
/// generates `y` at latent value `u`. Decided numerically from
/// [`structural_residual`] with absolute tolerance `1e-7`.
pub fn feasible_latent(
    model: &ModelSpec,
    theta: &Theta,
    y: &OutcomeSeq,
    cell: &CovariateCell,
    u: &[f64],
) -> Result<bool> {
    if u.len() != model.comps().len() * model.periods {
        return Err(Error::Validation(format!("u has length {}", u.len())));
    }
    let fwd = Forward::new(model, theta, y, cell)?;
    let scale = u
        .iter()
        .chain(fwd.zb.iter().flatten())
        .chain(&fwd.x)
        .chain(&theta.gamma)
        .chain(&theta.alpha)
        .chain(&theta.cuts)
        .chain(&fwd.levels)
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let n_fe = model.fe_coords().len();
    let continuous_init = model.family == Family::Censored && model.y0 == Y0Status::Unobserved;
    let g0 = theta.gamma.first().copied().unwrap_or(0.0).abs();
    // The initial level enters multiplied by γ, so its range scales with 1/|γ|.
    let radius = if continuous_init && g0 > 0.0 { 8.0 * scale / g0.min(1.0) } else { 8.0 * scale };
    let branches: Vec<i64> = match model.y0 {
        Y0Status::Unobserved if model.has_discrete_outcomes() => (0..model.n_categories() as i64).collect(),
        Y0Status::Observed if model.has_discrete_outcomes() => {
            vec![y.y0.or(cell.y0).ok_or_else(|| Error::Validation("observed y0 missing".into()))?]
        }
        _ => vec![0],
    };
    let observed_level = y.y0_level.unwrap_or(0.0);
    if model.family == Family::Censored && model.y0 == Y0Status::Observed && y.y0_level.is_none() {
        return Err(Error::Validation("initial level missing".into()));
    }
    let dims = n_fe + usize::from(continuous_init);
    for b in branches {
        let f = |x: &[f64]| {
            let level = if continuous_init { x[n_fe] } else { observed_level };
            fwd.residual(u, &x[..n_fe], b, level)
        };
        if nested_min(&f, dims, radius) <= 1e-7 {
            return Ok(true);
        }
    }
    Ok(false)
}
