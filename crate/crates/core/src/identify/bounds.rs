use serde::{Deserialize, Serialize};

use super::scan::{GridPoint, IdentifiedSetGrid, ThetaGrid};
use crate::distributions::{CondOutcomeDist, LatentDist, LatentFamily};
use crate::error::{Error, Result};
use crate::models::{Family, ModelSpec, Theta, Y0Status};
use crate::randomsets::{region_contains, ustar_numeric};
use crate::scalar::rational_from_f64;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// Evaluation points for the envelopes; by default every threshold,
    /// the midpoints between them and one point past either end.
    pub w_grid: Option<Vec<f64>>,
    pub tol: f64,
}

fn default_w(mut cuts: Vec<f64>) -> Vec<f64> {
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let (Some(first), Some(last)) = (cuts.first().copied(), cuts.last().copied()) else {
        return vec![0.0];
    };
    let mut w = vec![first - 1.0];
    for pair in cuts.windows(2) {
        w.push(pair[0]);
        w.push(0.5 * (pair[0] + pair[1]));
    }
    w.push(last);
    w.push(last + 1.0);
    w
}

/// Identified set of `(β, γ)` in the two-period dynamic binary model with
/// an observed initial condition.
///
/// With `H(w) = P(Δu <= w | y0)`, a 1→0 switch needs `Δu <= a10` and a
/// 0→1 switch needs `Δu > a01`, where `a10 = -Δzβ + (y0-1)γ` and
/// `a01 = -Δzβ + y0γ`. Each cell then pins `H(w) >= p10` for `w >= a10`
/// and `H(w) <= 1 - p01` for `w <= a01`; a parameter value is inside when
/// the resulting envelopes never cross, separately for each `y0`.
pub fn profile_bounds_2p_binary(
    model: &ModelSpec,
    grid: &ThetaGrid,
    f: &CondOutcomeDist,
    opts: &ProfileOptions,
) -> Result<IdentifiedSetGrid> {
    model.validate()?;
    if model.family != Family::BinaryDynamic || model.periods != 2 || model.y0 != Y0Status::Observed {
        return Err(Error::Unsupported(
            "profile bounds cover the two-period dynamic binary model with observed y0".into(),
        ));
    }
    grid.validate()?;
    f.validate(model)?;
    let mut points = Vec::with_capacity(grid.len());
    for i in 0..grid.len() {
        let theta = grid.point(i);
        let th = match grid.theta_at(i).and_then(|t| t.validate(model).map(|_| t)) {
            Ok(t) => t,
            Err(e) => {
                points.push(GridPoint {
                    theta,
                    inside: false,
                    min_slack: -1.0,
                    binding: vec![],
                    invalid: Some(e.to_string()),
                });
                continue;
            }
        };
        let (slack, binding) = profile_slack(&th, f, opts.w_grid.as_deref());
        points.push(GridPoint { theta, inside: slack >= -opts.tol, min_slack: slack, binding, invalid: None });
    }
    Ok(IdentifiedSetGrid { label: "sharp".into(), axes: grid.axes.clone(), points, joint: vec![] })
}

fn profile_slack(th: &Theta, f: &CondOutcomeDist, w_grid: Option<&[f64]>) -> (f64, Vec<(usize, usize)>) {
    let gamma = th.gamma[0];
    // (cell, y0, a10, a01, p10, p01)
    let rows: Vec<_> = f
        .cells
        .iter()
        .map(|c| {
            let dzb: f64 = (0..c.cell.z[0].len()).map(|j| (c.cell.z[1][j] - c.cell.z[0][j]) * th.beta[0][j]).sum();
            let y0 = c.cell.y0.expect("validated") as f64;
            (c.cell.cell_id, c.cell.y0, -dzb + (y0 - 1.0) * gamma, -dzb + y0 * gamma, c.probs[2], c.probs[1])
        })
        .collect();
    let mut worst = 1.0f64;
    let mut binding = Vec::new();
    let mut y0s: Vec<_> = rows.iter().map(|r| r.1).collect();
    y0s.sort();
    y0s.dedup();
    for y0 in y0s {
        let group: Vec<_> = rows.iter().filter(|r| r.1 == y0).collect();
        let ws = match w_grid {
            Some(w) => w.to_vec(),
            None => default_w(group.iter().flat_map(|r| [r.2, r.3]).collect()),
        };
        for w in ws {
            let lo = group.iter().filter(|r| r.2 <= w).max_by(|a, b| a.4.total_cmp(&b.4));
            let hi = group.iter().filter(|r| r.3 >= w).min_by(|a, b| (1.0 - a.5).total_cmp(&(1.0 - b.5)));
            let l = lo.map_or(0.0, |r| r.4);
            let u = hi.map_or(1.0, |r| 1.0 - r.5);
            if u - l < worst {
                worst = u - l;
                binding = lo.iter().chain(hi.iter()).map(|r| (r.0, 0)).collect();
            }
        }
    }
    (worst, binding)
}

/// The slope of a linear panel model from per-cell `(E[ΔY], Δz)` pairs.
/// Cells with `Δz = 0` carry no slope information but must have a zero
/// mean change; the others must agree.
pub fn linear_panel_beta(moments: &[(f64, f64)]) -> Result<f64> {
    const TOL: f64 = 1e-8;
    let mut beta: Option<f64> = None;
    for (k, &(dy, dz)) in moments.iter().enumerate() {
        if dz.abs() < 1e-12 {
            if dy.abs() > TOL {
                return Err(Error::Validation(format!("cell {k} has Δz = 0 but E[ΔY] = {dy}")));
            }
            continue;
        }
        let b = dy / dz;
        match beta {
            None => beta = Some(b),
            Some(prev) if (prev - b).abs() > TOL => {
                return Err(Error::Validation(format!("cells disagree on the slope: {prev} vs {b} at cell {k}")))
            }
            Some(_) => {}
        }
    }
    beta.ok_or_else(|| Error::Validation("β is not point identified: every cell has Δz = 0".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtsteinReport {
    pub pass: bool,
    pub min_slack: f64,
    /// Inequalities evaluated: cells times subsets of the support.
    pub n_checked: usize,
    /// `(cell_id, subset bitmask)` of the smallest slack.
    pub worst: Option<(usize, u64)>,
}

pub const ARTSTEIN_MAX_SUPPORT: usize = 20;

/// Checks `F(Y* ⊆ K) <= G(K)` for every subset `K` of a finitely
/// supported latent distribution, at every cell.
pub fn artstein_bruteforce(
    model: &ModelSpec,
    theta: &Theta,
    g: &LatentDist,
    f: &CondOutcomeDist,
    tol: f64,
) -> Result<ArtsteinReport> {
    f.validate(model)?;
    g.validate(model)?;
    let mut worst = (1.0f64, None);
    let mut n_checked = 0;
    for c in &f.cells {
        let id = c.cell.cell_id;
        let LatentFamily::DiscreteGrid { points, weights } = g.at_cell(id) else {
            return Err(Error::Unsupported("brute-force Artstein needs a discrete latent distribution".into()));
        };
        if points.len() > ARTSTEIN_MAX_SUPPORT {
            return Err(Error::Capacity(format!("support of {} points exceeds {ARTSTEIN_MAX_SUPPORT}", points.len())));
        }
        let pts = points
            .iter()
            .map(|p| p.iter().map(|v| rational_from_f64(*v)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let sets = ustar_numeric(model, theta, &c.cell)?;
        let masks = sets
            .iter()
            .map(|s| {
                pts.iter().enumerate().try_fold(0u64, |m, (k, p)| {
                    Ok::<_, Error>(if region_contains(model, &s.region, p)? { m | 1 << k } else { m })
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = points.len();
        for k in 0..(1u64 << n) {
            let gk: f64 = (0..n).filter(|j| k >> j & 1 == 1).map(|j| weights[j]).sum();
            let fk: f64 = masks.iter().zip(&c.probs).filter(|(m, _)| *m & !k == 0).map(|(_, p)| p).sum();
            n_checked += 1;
            if gk - fk < worst.0 {
                worst = (gk - fk, Some((id, k)));
            }
        }
    }
    Ok(ArtsteinReport { pass: worst.0 >= -tol, min_slack: worst.0, n_checked, worst: worst.1 })
}
