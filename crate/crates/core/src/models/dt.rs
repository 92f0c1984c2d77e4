//! Per-period latent inequalities: the set of `(v, u_t)` that generate the
//! observed outcome in period `t`.

use num_traits::One;

use super::{CovariateCell, Family, ModelSpec, OutcomeSeq, ParamValues, Y0Status};
use crate::error::{Error, Result};
use crate::polyhedra::{Coord, LinIneq, LinIneqSystem};
use crate::scalar::{rational_from_f64, Bound, Rational};

/// Rows generating period `t`'s outcome, conditional on a value of a
/// discrete unobserved initial condition when the period depends on it.
#[derive(Clone, Debug)]
pub struct DtBranch<B> {
    pub y0: Option<i64>,
    pub rows: Vec<LinIneq<B>>,
}

fn one() -> Rational {
    Rational::one()
}

fn neg_one() -> Rational {
    -Rational::one()
}

fn lvl(comp: u8, t: usize) -> Coord {
    Coord::Level { comp, t: t as u8 }
}

/// Discrete initial-condition values to branch over for this outcome.
fn y0_branches(model: &ModelSpec, y: &OutcomeSeq) -> Result<Vec<Option<i64>>> {
    if !model.has_discrete_outcomes() {
        return Ok(vec![None]);
    }
    Ok(match model.y0 {
        Y0Status::Absent => vec![None],
        Y0Status::Observed => {
            vec![Some(y.y0.ok_or_else(|| Error::Validation(format!("outcome {y} lacks the observed y0")))?)]
        }
        Y0Status::Unobserved => (0..model.n_categories() as i64).map(Some).collect(),
    })
}

/// `D_t` for period `t` (1-based): one branch per value of an unobserved
/// discrete initial condition if period one is asked for, else one branch.
pub fn dt_inverse<B: Bound>(
    model: &ModelSpec,
    params: &ParamValues<B>,
    cell: &CovariateCell,
    t: usize,
    y: &OutcomeSeq,
) -> Result<Vec<DtBranch<B>>> {
    model.check_outcome(y)?;
    if t == 0 || t > model.periods {
        return Err(Error::Validation(format!("period {t} out of range")));
    }
    let branches = if t == 1 { y0_branches(model, y)? } else { vec![None] };
    branches.into_iter().map(|b| Ok(DtBranch { y0: b, rows: period_rows(model, params, cell, y, t, b)? })).collect()
}

/// The full latent system `∩_t D_t` for one initial-condition branch.
pub fn latent_system<B: Bound>(
    model: &ModelSpec,
    params: &ParamValues<B>,
    cell: &CovariateCell,
    y: &OutcomeSeq,
) -> Result<Vec<DtBranch<B>>> {
    model.check_outcome(y)?;
    let mut coords = model.latent_coords();
    coords.extend(model.level_coords());
    let mut out = Vec::new();
    for b in y0_branches(model, y)? {
        let mut sys = LinIneqSystem::full(coords.clone());
        for t in 1..=model.periods {
            for r in period_rows(model, params, cell, y, t, b)? {
                sys.push(r)?;
            }
        }
        out.push(DtBranch { y0: b, rows: sys.rows().to_vec() });
    }
    Ok(out)
}

fn exact(x: f64) -> Result<Rational> {
    rational_from_f64(x)
}

/// `Σ_k α_k x_k` for the endogenous regressor values of period `t`.
fn alpha_term<B: Bound>(params: &ParamValues<B>, x: Option<&[f64]>) -> Result<B> {
    let Some(x) = x else { return Ok(B::zero()) };
    if params.alpha.is_empty() {
        return Ok(B::zero());
    }
    if x.len() != params.alpha.len() {
        return Err(Error::Validation(format!(
            "{} endogenous regressor values for {} alpha coefficients",
            x.len(),
            params.alpha.len()
        )));
    }
    let mut acc = B::zero();
    for (a, v) in params.alpha.iter().zip(x) {
        acc = acc + a.scale(&exact(*v)?);
    }
    Ok(acc)
}

fn period_rows<B: Bound>(
    model: &ModelSpec,
    params: &ParamValues<B>,
    cell: &CovariateCell,
    y: &OutcomeSeq,
    t: usize,
    y0: Option<i64>,
) -> Result<Vec<LinIneq<B>>> {
    let zb = |k: usize| -> Result<B> {
        params
            .zb
            .get(k)
            .and_then(|v| v.get(t - 1))
            .cloned()
            .ok_or_else(|| Error::Validation(format!("missing index value for slot {k}, period {t}")))
    };
    let yt = y.y.get(t - 1).copied().unwrap_or(0);
    let lag_index = |prev: i64| -> B {
        match model.family {
            Family::Ordered => params.gamma_at(prev as usize),
            _ => params.gamma_at(0).scale(&Rational::from_integer(prev.into())),
        }
    };
    // Lagged-outcome term for the discrete families.
    let lag = || -> B {
        if model.is_static() {
            return B::zero();
        }
        if t >= 2 {
            return lag_index(y.y[t - 2]);
        }
        match (model.y0, &params.initial_lag) {
            (Y0Status::Observed, Some(l)) => l.clone(),
            _ => lag_index(y0.unwrap_or(0)),
        }
    };

    let mut rows = Vec::new();
    match model.family {
        Family::BinaryStatic | Family::BinaryDynamic => {
            let x = cell.y2.as_ref().map(|m| m[t - 1].as_slice());
            let s = zb(0)? + alpha_term(params, x)? + lag();
            let terms = [(Coord::Fe(0), one()), (lvl(0, t), one())];
            rows.push(if yt == 1 { LinIneq::ge(terms, -s) } else { LinIneq::le(terms, -s) });
        }
        Family::Ordered => {
            let j = yt as usize;
            let top = model.n_categories() - 1;
            let index = zb(0)? + lag();
            let terms = [(Coord::Fe(0), one()), (lvl(0, t), one())];
            if j >= 1 {
                rows.push(LinIneq::ge(terms.clone(), params.cuts[j - 1].clone() - index.clone()));
            }
            if j < top {
                rows.push(LinIneq::le(terms, params.cuts[j].clone() - index));
            }
        }
        Family::Multidiscrete => {
            let k = model.n_categories() as u8;
            let d = yt as u8;
            let index = |a: u8| -> Result<B> {
                if a == k {
                    Ok(B::zero())
                } else {
                    zb(a as usize - 1)
                }
            };
            let utility = |a: u8, sign: Rational| {
                let mut v = vec![(lvl(a, t), sign.clone())];
                if a != k {
                    v.push((Coord::Fe(a), sign));
                }
                v
            };
            for e in (1..=k).filter(|e| *e != d) {
                let mut terms = utility(e, one());
                terms.extend(utility(d, neg_one()));
                rows.push(LinIneq::le(terms, index(d)? - index(e)?));
            }
        }
        Family::SimultaneousBinary => {
            let tn = model.periods;
            for eq in [1u8, 2] {
                let (own, other) = if eq == 1 { (0, tn) } else { (tn, 0) };
                let yo = y.y[other + t - 1];
                let s = params.alpha[eq as usize - 1].scale(&Rational::from_integer(yo.into())) + zb(eq as usize - 1)?;
                let terms = [(Coord::Fe(eq), one()), (lvl(eq, t), one())];
                rows.push(if y.y[own + t - 1] == 1 { LinIneq::ge(terms, -s) } else { LinIneq::le(terms, -s) });
            }
        }
        Family::Censored | Family::Linear => {
            let levels =
                y.levels.as_ref().ok_or_else(|| Error::Validation("continuous outcome needs levels".into()))?;
            let x = y.endog.as_ref().map(|e| vec![e[t - 1]]).or_else(|| cell.y2.as_ref().map(|m| m[t - 1].clone()));
            let mut terms = vec![(Coord::Fe(0), one()), (lvl(0, t), one())];
            let mut lag_term = B::zero();
            if model.family == Family::Censored && !model.is_static() {
                if t >= 2 {
                    lag_term = params.gamma_at(0).scale(&exact(levels[t - 2])?);
                } else if model.y0 == Y0Status::Observed {
                    lag_term = match (&params.initial_lag, y.y0_level) {
                        (Some(l), _) => l.clone(),
                        (None, Some(v)) => params.gamma_at(0).scale(&exact(v)?),
                        (None, None) => {
                            return Err(Error::Validation("censored outcome lacks the observed y0 level".into()))
                        }
                    };
                } else {
                    let g = params.gamma_at(0).as_rational().ok_or_else(|| {
                        Error::Unsupported("symbolic γ with a continuous unobserved initial condition".into())
                    })?;
                    terms.push((Coord::Init, g));
                }
            }
            let e = B::from_rational(&exact(levels[t - 1])?) - alpha_term(params, x.as_deref())? - zb(0)? - lag_term;
            let censored = model.family == Family::Censored && yt == 1;
            rows.push(if censored { LinIneq::le(terms, e) } else { LinIneq::eq(terms, e) });
        }
    }
    Ok(rows)
}
