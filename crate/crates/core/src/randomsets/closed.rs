//! Closed-form U* sets derived family by family from pairwise conditions
//! on the fixed effect, without elimination.

use itertools::Itertools;
use num_traits::One;

use crate::error::{Error, Result};
use crate::models::{CovariateCell, Family, ModelSpec, OutcomeSeq, ParamValues, Y0Status};
use crate::polyhedra::{Coord, LinIneq, LinIneqSystem, RegionUnion};
use crate::scalar::{rational_from_f64, Bound, Rational};

fn level(comp: u8, t: usize) -> Coord {
    Coord::Level { comp, t: t as u8 }
}

/// `Σ k·u_level <= rhs` (or `=`), rewritten in differences.
fn diff_row<B: Bound>(model: &ModelSpec, terms: Vec<(Coord, Rational)>, rhs: B, equality: bool) -> Result<LinIneq<B>> {
    let row = if equality { LinIneq::eq(terms, rhs) } else { LinIneq::le(terms, rhs) };
    model.diff_space().level_row_to_diff(&row)
}

fn int(v: i64) -> Rational {
    Rational::from_integer(v.into())
}

/// Initial-condition values compatible with the outcome.
fn branches(model: &ModelSpec, y: &OutcomeSeq) -> Vec<Option<i64>> {
    match model.y0 {
        Y0Status::Absent => vec![None],
        Y0Status::Observed => vec![y.y0],
        Y0Status::Unobserved => (0..model.n_categories() as i64).map(Some).collect(),
    }
}

/// Index (excluding `c + u_t`) of a single-equation binary or ordered model.
fn single_index<B: Bound>(
    model: &ModelSpec,
    p: &ParamValues<B>,
    cell: &CovariateCell,
    y: &[i64],
    y0: Option<i64>,
    slot: usize,
    t: usize,
) -> Result<B> {
    let mut s = p.zb[slot][t - 1].clone();
    if let (Some(x), false) = (&cell.y2, p.alpha.is_empty()) {
        for (a, v) in p.alpha.iter().zip(&x[t - 1]) {
            s = s + a.scale(&rational_from_f64(*v)?);
        }
    }
    if !model.is_static() {
        let prev = if t == 1 {
            if let (Y0Status::Observed, Some(l)) = (model.y0, &p.initial_lag) {
                return Ok(s + l.clone());
            }
            y0.ok_or_else(|| Error::Validation("initial condition missing".into()))?
        } else {
            y[t - 2]
        };
        let lag = match model.family {
            Family::Ordered => p.gamma[prev as usize].clone(),
            _ => p.gamma[0].scale(&int(prev)),
        };
        s = s + lag;
    }
    Ok(s)
}

/// Binary pairs: for `y_s = 0`, `y_t = 1`, a fixed effect exists iff
/// `u_s - u_t <= s_t - s_s`.
fn binary_rows<B: Bound>(model: &ModelSpec, comp: u8, outcomes: &[i64], index: &[B]) -> Result<Vec<LinIneq<B>>> {
    let tn = outcomes.len();
    let mut rows = Vec::new();
    for s in 1..=tn {
        for t in 1..=tn {
            if outcomes[s - 1] == 0 && outcomes[t - 1] == 1 {
                rows.push(diff_row(
                    model,
                    vec![(level(comp, s), Rational::one()), (level(comp, t), -Rational::one())],
                    index[t - 1].clone() - index[s - 1].clone(),
                    false,
                )?);
            }
        }
    }
    Ok(rows)
}

/// Simple directed cycles on `0..n`, each listed once starting from its
/// smallest node.
fn simple_cycles(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for len in 2..=n {
        for nodes in (0..n).permutations(len) {
            if nodes[0] == *nodes.iter().min().expect("nonempty") {
                out.push(nodes);
            }
        }
    }
    out
}

/// U*(y) from explicit pairwise (or cycle) conditions.
pub fn ustar_closed_form<B: Bound>(
    model: &ModelSpec,
    p: &ParamValues<B>,
    cell: &CovariateCell,
    y: &OutcomeSeq,
) -> Result<RegionUnion<B>> {
    model.check_outcome(y)?;
    let space = model.diff_space();
    let ambient: LinIneqSystem<B> = space.ambient();
    let tn = model.periods;
    let mut parts = Vec::new();
    for b in branches(model, y) {
        let mut rows: Vec<LinIneq<B>> = Vec::new();
        match model.family {
            Family::BinaryStatic | Family::BinaryDynamic => {
                let idx = (1..=tn).map(|t| single_index(model, p, cell, &y.y, b, 0, t)).collect::<Result<Vec<_>>>()?;
                rows.extend(binary_rows(model, 0, &y.y, &idx)?);
            }
            Family::Ordered => {
                let top = model.n_categories() as i64 - 1;
                let idx = (1..=tn).map(|t| single_index(model, p, cell, &y.y, b, 0, t)).collect::<Result<Vec<_>>>()?;
                // upper bound from period s against lower bound from period t
                for s in 1..=tn {
                    for t in 1..=tn {
                        let (ys, yt) = (y.y[s - 1], y.y[t - 1]);
                        if s == t || ys == top || yt == 0 {
                            continue;
                        }
                        let rhs = p.cuts[ys as usize].clone() - p.cuts[yt as usize - 1].clone() - idx[s - 1].clone()
                            + idx[t - 1].clone();
                        rows.push(diff_row(
                            model,
                            vec![(level(0, s), Rational::one()), (level(0, t), -Rational::one())],
                            rhs,
                            false,
                        )?);
                    }
                }
            }
            Family::SimultaneousBinary => {
                for eq in 0..2usize {
                    let own = &y.y[eq * tn..(eq + 1) * tn];
                    let other = &y.y[(1 - eq) * tn..(2 - eq) * tn];
                    let idx: Vec<B> =
                        (0..tn).map(|t| p.zb[eq][t].clone() + p.alpha[eq].scale(&int(other[t]))).collect();
                    rows.extend(binary_rows(model, eq as u8 + 1, own, &idx)?);
                }
            }
            Family::Multidiscrete => {
                let k = model.n_categories();
                let zb = |a: usize, t: usize| -> B {
                    if a == k {
                        B::zero()
                    } else {
                        p.zb[a - 1][t - 1].clone()
                    }
                };
                // v_e - v_a <= (u_a + zb_a) - (u_e + zb_e) for every period
                // choosing a; feasible iff every cycle has nonnegative weight.
                for cycle in simple_cycles(k) {
                    let edges: Vec<(usize, usize)> =
                        (0..cycle.len()).map(|i| (cycle[i] + 1, cycle[(i + 1) % cycle.len()] + 1)).collect();
                    let choices: Vec<Vec<usize>> =
                        edges.iter().map(|(a, _)| (1..=tn).filter(|t| y.y[t - 1] == *a as i64).collect()).collect();
                    if choices.iter().any(|c| c.is_empty()) {
                        continue;
                    }
                    for pick in choices.iter().multi_cartesian_product() {
                        let mut terms = Vec::new();
                        let mut rhs = B::zero();
                        for ((a, e), t) in edges.iter().zip(pick) {
                            terms.push((level(*a as u8, *t), -Rational::one()));
                            terms.push((level(*e as u8, *t), Rational::one()));
                            rhs = rhs + zb(*a, *t) - zb(*e, *t);
                        }
                        rows.push(diff_row(model, terms, rhs, false)?);
                    }
                }
            }
            Family::Censored | Family::Linear => {
                if model.family == Family::Censored && model.y0 == Y0Status::Unobserved {
                    return Err(Error::Unsupported(
                        "closed form for the censored model with an unobserved initial level".into(),
                    ));
                }
                let levels = y.levels.as_ref().ok_or_else(|| Error::Validation("levels missing".into()))?;
                let mut e = Vec::with_capacity(tn);
                for t in 1..=tn {
                    let mut v = B::from_rational(&rational_from_f64(levels[t - 1])?) - p.zb[0][t - 1].clone();
                    let x: Option<Vec<f64>> = match (&y.endog, &cell.y2) {
                        (Some(en), _) => Some(vec![en[t - 1]]),
                        (None, Some(m)) => Some(m[t - 1].clone()),
                        _ => None,
                    };
                    if let Some(x) = x {
                        for (a, xv) in p.alpha.iter().zip(&x) {
                            v = v - a.scale(&rational_from_f64(*xv)?);
                        }
                    }
                    if model.family == Family::Censored && !model.is_static() {
                        let prev = if t == 1 {
                            y.y0_level.ok_or_else(|| Error::Validation("initial level missing".into()))?
                        } else {
                            levels[t - 2]
                        };
                        v = v - p.gamma[0].scale(&rational_from_f64(prev)?);
                    }
                    e.push(v);
                }
                let censored = |t: usize| model.family == Family::Censored && y.y[t - 1] == 1;
                for s in 1..=tn {
                    for t in 1..=tn {
                        if s == t || censored(t) {
                            continue;
                        }
                        // period t pins c = e_t - u_t; period s needs c <= e_s - u_s
                        // (or equality when uncensored)
                        if censored(s) {
                            rows.push(diff_row(
                                model,
                                vec![(level(0, s), Rational::one()), (level(0, t), -Rational::one())],
                                e[s - 1].clone() - e[t - 1].clone(),
                                false,
                            )?);
                        } else if s < t {
                            rows.push(diff_row(
                                model,
                                vec![(level(0, t), Rational::one()), (level(0, s), -Rational::one())],
                                e[t - 1].clone() - e[s - 1].clone(),
                                true,
                            )?);
                        }
                    }
                }
            }
        }
        let mut sys = ambient.clone();
        for r in rows {
            sys.push(r)?;
        }
        if !sys.is_empty() {
            parts.push(sys);
        }
    }
    Ok(RegionUnion::from_parts(space.coords(), parts).simplify())
}
