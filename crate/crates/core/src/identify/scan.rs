use std::collections::BTreeMap;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{evaluate, prepare_cells, CheckOptions, PreparedCell};
use crate::distributions::{intervals, CondOutcomeDist, LatentDist, Measurer};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, Theta, Y0Status};
use crate::polyhedra::RegionUnion;
use crate::randomsets::{containment_outcomes, hitting_outcomes, region_contains};
use crate::scalar::{rational_from_f64, Rational};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    /// Parameter name as accepted by [`Theta::set_param`].
    pub name: String,
    pub values: Vec<f64>,
}

impl GridAxis {
    /// `n` evenly spaced values from `lo` to `hi`.
    pub fn linspace(name: &str, lo: f64, hi: f64, n: usize) -> Self {
        let values = match n {
            0 => vec![],
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        };
        GridAxis { name: name.into(), values }
    }
}

/// A product grid over some parameters, the rest fixed at `base`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaGrid {
    pub base: Theta,
    pub axes: Vec<GridAxis>,
}

impl ThetaGrid {
    pub fn validate(&self) -> Result<()> {
        if self.axes.is_empty() || self.axes.iter().any(|a| a.values.is_empty()) {
            return Err(Error::Validation("the parameter grid is empty".into()));
        }
        for a in &self.axes {
            if a.values.windows(2).any(|w| !(w[0] < w[1])) || a.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("axis {} must be finite and strictly increasing", a.name)));
            }
            self.base.clone().set_param(&a.name, a.values[0])?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Axis values of point `i`; the last axis varies fastest.
    pub fn point(&self, mut i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = a.values[i % a.values.len()];
            i /= a.values.len();
        }
        out
    }

    pub fn theta_at(&self, i: usize) -> Result<Theta> {
        let mut th = self.base.clone();
        for (a, v) in self.axes.iter().zip(self.point(i)) {
            th.set_param(&a.name, v)?;
        }
        Ok(th)
    }
}

/// Latent distributions searched over at each parameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GFamily {
    /// A finite list of candidate distributions.
    List { dists: Vec<LatentDist> },
    /// Every distribution of a scalar `Δu` with a piecewise-constant
    /// density on the partition cut out by the collection's sets; decided
    /// by a linear program. With an observed initial condition in a
    /// dynamic model each value of `y0` gets its own distribution.
    PiecewiseUniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub theta: Vec<f64>,
    pub inside: bool,
    pub min_slack: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub binding: Vec<(usize, usize)>,
    /// Why the point is outside the parameter space, when it is.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JointPoint {
    pub theta_index: usize,
    pub g_index: usize,
    pub inside: bool,
    pub min_slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentifiedSetGrid {
    /// `sharp`, `outer` or `profile`.
    pub label: String,
    pub axes: Vec<GridAxis>,
    pub points: Vec<GridPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub joint: Vec<JointPoint>,
}

impl IdentifiedSetGrid {
    pub fn inside(&self) -> Vec<bool> {
        self.points.iter().map(|p| p.inside).collect()
    }

    pub fn n_inside(&self) -> usize {
        self.points.iter().filter(|p| p.inside).count()
    }

    /// Range of the last axis over inside points, for each value of the
    /// other axes, as CSV.
    pub fn hull_csv(&self) -> String {
        let names: Vec<&str> = self.axes.iter().map(|a| a.name.as_str()).collect();
        let (last, rest) = names.split_last().expect("grid has axes");
        let mut out = rest.iter().map(|n| n.to_string()).collect::<Vec<_>>();
        out.push(format!("{last}_min"));
        out.push(format!("{last}_max"));
        let mut text = out.join(",") + "\n";
        let mut ranges: BTreeMap<Vec<u64>, (Vec<f64>, f64, f64)> = BTreeMap::new();
        let mut order = Vec::new();
        for p in self.points.iter().filter(|p| p.inside) {
            let (v, head) = p.theta.split_last().expect("grid has axes");
            let key: Vec<u64> = head.iter().map(|x| x.to_bits()).collect();
            let e = ranges.entry(key.clone()).or_insert_with(|| {
                order.push(key);
                (head.to_vec(), *v, *v)
            });
            e.1 = e.1.min(*v);
            e.2 = e.2.max(*v);
        }
        for key in order {
            let (head, lo, hi) = &ranges[&key];
            let mut row: Vec<String> = head.iter().map(|x| x.to_string()).collect();
            row.push(lo.to_string());
            row.push(hi.to_string());
            text += &(row.join(",") + "\n");
        }
        text
    }
}

enum Outcome<T> {
    Ok(T),
    Invalid(String),
}

fn at_theta<T>(grid: &ThetaGrid, i: usize, f: impl FnOnce(&Theta) -> Result<T>) -> Result<Outcome<T>> {
    let th = match grid.theta_at(i) {
        Ok(t) => t,
        Err(e) => return Ok(Outcome::Invalid(e.to_string())),
    };
    match f(&th) {
        Ok(v) => Ok(Outcome::Ok(v)),
        Err(Error::Validation(m)) => Ok(Outcome::Invalid(m)),
        Err(e) => Err(e),
    }
}

fn invalid_point(theta: Vec<f64>, why: String) -> GridPoint {
    GridPoint { theta, inside: false, min_slack: -1.0, binding: vec![], invalid: Some(why) }
}

/// Cells sharing one latent distribution: split by `y0` when it is
/// observed in a dynamic model, otherwise all together.
fn groups(model: &ModelSpec, f: &CondOutcomeDist) -> Vec<Vec<usize>> {
    if model.y0 == Y0Status::Observed && !model.is_static() {
        let mut by: BTreeMap<Option<i64>, Vec<usize>> = BTreeMap::new();
        for (i, c) in f.cells.iter().enumerate() {
            by.entry(c.cell.y0).or_default().push(i);
        }
        by.into_values().collect()
    } else {
        vec![(0..f.cells.len()).collect()]
    }
}

/// Best achievable smallest slack over piecewise-uniform `Δu`
/// distributions, per group of cells.
fn lp_slack(model: &ModelSpec, f: &CondOutcomeDist, cells: &[PreparedCell]) -> Result<(f64, Vec<(usize, usize)>)> {
    let space = model.diff_space();
    let mut worst = 1.0f64;
    let mut binding = Vec::new();
    for group in groups(model, f) {
        let mut cuts: Vec<f64> = Vec::new();
        for &ci in &group {
            for g in &cells[ci].cdc.distinct {
                for (lo, hi) in intervals(&space, &cells[ci].sets[g[0]].region)? {
                    cuts.extend([lo, hi].into_iter().filter(|v| v.is_finite()));
                }
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let reps: Vec<f64> = if cuts.is_empty() {
            vec![0.0]
        } else {
            let mut r = vec![cuts[0] - 1.0];
            r.extend(cuts.windows(2).map(|w| 0.5 * (w[0] + w[1])));
            r.push(cuts[cuts.len() - 1] + 1.0);
            r
        };
        let reps: Vec<Vec<Rational>> =
            reps.iter().map(|x| rational_from_f64(*x).map(|r| vec![r])).collect::<Result<_>>()?;
        let mut rows: Vec<(Vec<usize>, f64, (usize, usize))> = Vec::new();
        for &ci in &group {
            let pc = &cells[ci];
            for (k, it) in pc.cdc.items.iter().enumerate() {
                let inside = reps
                    .iter()
                    .enumerate()
                    .filter_map(|(a, p)| match region_contains(model, &it.s_region, p) {
                        Ok(true) => Some(Ok(a)),
                        Ok(false) => None,
                        Err(e) => Some(Err(e)),
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.push((inside, pc.lhs[k], (pc.cell.cell_id, it.id)));
            }
        }
        if rows.is_empty() {
            continue;
        }
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let mass: Vec<_> = reps.iter().map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
        let s = lp.add_var(1.0, (-1.0, 1.0));
        lp.add_constraint(mass.iter().map(|v| (*v, 1.0)).collect::<Vec<_>>(), ComparisonOp::Eq, 1.0);
        for (inside, lhs, _) in &rows {
            let mut terms: Vec<_> = inside.iter().map(|a| (mass[*a], 1.0)).collect();
            terms.push((s, -1.0));
            lp.add_constraint(terms, ComparisonOp::Ge, *lhs);
        }
        let sol = lp.solve().map_err(|e| Error::Lp(e.to_string()))?;
        let best = sol[s];
        if best < worst - 1e-12 {
            binding.clear();
        }
        if best <= worst + 1e-12 {
            for (inside, lhs, id) in &rows {
                let got: f64 = inside.iter().map(|a| sol[mass[*a]]).sum();
                if got - lhs <= best + 1e-9 {
                    binding.push(*id);
                }
            }
        }
        worst = worst.min(best);
    }
    Ok((worst, binding))
}

/// Parameter values (and, for a finite family, latent distributions)
/// satisfying every collection inequality at every cell of `F`. A
/// parameter value is inside when some distribution of the family passes.
pub fn identified_set_scan(
    model: &ModelSpec,
    grid: &ThetaGrid,
    family: &GFamily,
    f: &CondOutcomeDist,
    opts: &CheckOptions,
) -> Result<IdentifiedSetGrid> {
    model.validate()?;
    grid.validate()?;
    f.validate(model)?;
    if f.cells.is_empty() {
        return Err(Error::Validation("the outcome distribution has no cells".into()));
    }
    let measurers: Vec<Vec<Measurer>> = match family {
        GFamily::List { dists } => {
            if dists.is_empty() {
                return Err(Error::Validation("the latent family is empty".into()));
            }
            dists
                .iter()
                .map(|g| {
                    g.validate(model)?;
                    f.cells.iter().map(|c| Measurer::new(model, g, c.cell.cell_id, opts.measure)).collect()
                })
                .collect::<Result<_>>()?
        }
        GFamily::PiecewiseUniform => {
            if model.diff_space().basis_dim() != 1 {
                return Err(Error::Unsupported(
                    "the piecewise-uniform family needs a one-dimensional differenced space".into(),
                ));
            }
            Vec::new()
        }
    };
    let per_point: Vec<Result<(GridPoint, Vec<JointPoint>)>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let theta = grid.point(i);
            let cells = match at_theta(grid, i, |th| prepare_cells(model, th, f, opts.cap))? {
                Outcome::Ok(c) => c,
                Outcome::Invalid(why) => return Ok((invalid_point(theta, why), Vec::new())),
            };
            if measurers.is_empty() {
                let (s, binding) = lp_slack(model, f, &cells)?;
                let tol = opts
                    .tol
                    .unwrap_or_else(|| 3.0 * cells.iter().flat_map(|c| c.lhs_se.iter().copied()).fold(0.0, f64::max));
                let p = GridPoint { theta, inside: s >= -tol, min_slack: s, binding, invalid: None };
                return Ok((p, Vec::new()));
            }
            let mut joint = Vec::with_capacity(measurers.len());
            let mut best: Option<GridPoint> = None;
            for (gi, ms) in measurers.iter().enumerate() {
                let refs: Vec<&Measurer> = ms.iter().collect();
                let r = evaluate(&cells, &refs, opts.tol)?;
                joint.push(JointPoint { theta_index: i, g_index: gi, inside: r.pass, min_slack: r.min_slack });
                let better = match &best {
                    None => true,
                    Some(b) => (r.pass && !b.inside) || (r.pass == b.inside && r.min_slack > b.min_slack),
                };
                if better {
                    best = Some(GridPoint {
                        theta: theta.clone(),
                        inside: r.pass,
                        min_slack: r.min_slack,
                        binding: r.binding,
                        invalid: None,
                    });
                }
            }
            Ok((best.expect("family is nonempty"), joint))
        })
        .collect();
    let mut points = Vec::with_capacity(per_point.len());
    let mut joint = Vec::new();
    for r in per_point {
        let (p, j) = r?;
        points.push(p);
        joint.extend(j);
    }
    Ok(IdentifiedSetGrid { label: "sharp".into(), axes: grid.axes.clone(), points, joint })
}

/// Parameter values passing `sup_z F(containment of S) <= inf_z F(hitting
/// of S)` for every test set `S`, with no latent distribution specified.
/// Test sets are the collection sets of every cell; cells with different
/// observed initial conditions in a dynamic model are compared only
/// within their own group.
pub fn outer_set_scan(
    model: &ModelSpec,
    grid: &ThetaGrid,
    f: &CondOutcomeDist,
    opts: &CheckOptions,
) -> Result<IdentifiedSetGrid> {
    model.validate()?;
    grid.validate()?;
    f.validate(model)?;
    let groups = groups(model, f);
    let points: Vec<Result<GridPoint>> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let theta = grid.point(i);
            let cells = match at_theta(grid, i, |th| prepare_cells(model, th, f, opts.cap))? {
                Outcome::Ok(c) => c,
                Outcome::Invalid(why) => return Ok(invalid_point(theta, why)),
            };
            let mut tests: BTreeMap<String, &RegionUnion<Rational>> = BTreeMap::new();
            for pc in &cells {
                for it in &pc.cdc.items {
                    tests.entry(it.s_region.canonical_key()).or_insert(&it.s_region);
                }
            }
            let mut worst = 1.0f64;
            let mut max_se = 0.0f64;
            for group in &groups {
                for s in tests.values() {
                    let mut sup_c = 0.0f64;
                    let mut inf_h = 1.0f64;
                    for &ci in group {
                        let pc = &cells[ci];
                        let id = pc.cell.cell_id;
                        let cont = containment_outcomes(&pc.sets, s);
                        let hit = hitting_outcomes(&pc.sets, s);
                        sup_c = sup_c.max(f.prob_y_in(id, &cont)?);
                        inf_h = inf_h.min(f.prob_y_in(id, &hit)?);
                        max_se = max_se.max(f.prob_y_in_se(id, &cont)?).max(f.prob_y_in_se(id, &hit)?);
                    }
                    worst = worst.min(inf_h - sup_c);
                }
            }
            let tol = opts.tol.unwrap_or(3.0 * std::f64::consts::SQRT_2 * max_se);
            Ok(GridPoint { theta, inside: worst >= -tol, min_slack: worst, binding: vec![], invalid: None })
        })
        .collect();
    Ok(IdentifiedSetGrid {
        label: "outer".into(),
        axes: grid.axes.clone(),
        points: points.into_iter().collect::<Result<_>>()?,
        joint: Vec::new(),
    })
}
