//! U* sets, their duals Y*, unions, containment and hitting functionals,
//! and core determining collections.

mod cdc;
mod closed;

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::models::{latent_system, CovariateCell, ModelSpec, OutcomeSeq, ParamValues, Theta};
use crate::polyhedra::{LinIneqSystem, RegionUnion};
use crate::scalar::{rational_from_f64, Bound, Rational};

pub use cdc::{core_determining_collection, Cdc, CdcItem, CdcOptions, CdcOrder, DEFAULT_CDC_CAP};
pub use closed::ustar_closed_form;

/// U*(y): the differenced latent values under which some fixed effect (and
/// initial condition) generates `y`.
#[derive(Clone, Debug)]
pub struct UStarSet<B> {
    pub outcome: OutcomeSeq,
    pub region: RegionUnion<B>,
    pub full: bool,
}

impl<B: Bound> UStarSet<B> {
    pub fn is_empty(&self) -> bool {
        self.region.is_empty()
    }

    /// Rows other than the identities among differences.
    pub fn n_rows(&self, model: &ModelSpec) -> usize {
        let space = model.diff_space();
        self.region.parts().iter().map(|p| p.rows().iter().filter(|r| !space.is_tie(*r)).count()).sum()
    }
}

/// U*(y) by projecting the latent system onto the differenced `u` space.
pub fn ustar<B: Bound>(
    model: &ModelSpec,
    params: &ParamValues<B>,
    cell: &CovariateCell,
    y: &OutcomeSeq,
) -> Result<UStarSet<B>> {
    let space = model.diff_space();
    let ambient: LinIneqSystem<B> = space.ambient();
    let mut coords = model.latent_coords();
    coords.extend(model.level_coords());
    let latent = model.latent_coords();
    let mut parts = Vec::new();
    for branch in latent_system(model, params, cell, y)? {
        let sys = LinIneqSystem::new(coords.clone(), branch.rows)?;
        let proj = sys.eliminate_all(&latent);
        if proj.is_empty() {
            continue;
        }
        let diff = proj.map_rows(|r| space.level_row_to_diff(r))?;
        parts.push(ambient.intersect(&diff));
    }
    let region = RegionUnion::from_parts(space.coords(), parts).simplify();
    let full = region.covers(&ambient);
    Ok(UStarSet { outcome: y.clone(), region, full })
}

/// U* for every outcome of the model at one cell, in enumeration order.
pub fn ustar_all<B: Bound>(
    model: &ModelSpec,
    params: &ParamValues<B>,
    cell: &CovariateCell,
) -> Result<Vec<UStarSet<B>>> {
    model.enumerate_outcomes(cell)?.iter().map(|y| ustar(model, params, cell, y)).collect()
}

/// Numeric U* sets for `θ` at `cell`.
pub fn ustar_numeric(model: &ModelSpec, theta: &Theta, cell: &CovariateCell) -> Result<Vec<UStarSet<Rational>>> {
    let p = ParamValues::numeric(model, theta, cell)?;
    ustar_all(model, &p, cell)
}

/// Exact differenced-basis point of a level vector `u` (component-major).
pub fn basis_point(model: &ModelSpec, u: &[f64]) -> Result<Vec<Rational>> {
    let need = model.comps().len() * model.periods;
    if u.len() != need {
        return Err(Error::Validation(format!("u has length {}, expected {need}", u.len())));
    }
    let tn = model.periods;
    let mut out = Vec::new();
    for c in 0..model.comps().len() {
        let first = rational_from_f64(u[c * tn])?;
        for t in 1..tn {
            out.push(rational_from_f64(u[c * tn + t])? - &first);
        }
    }
    Ok(out)
}

/// Membership of a differenced-basis point in a region.
pub fn region_contains(model: &ModelSpec, region: &RegionUnion<Rational>, basis: &[Rational]) -> Result<bool> {
    let space = model.diff_space();
    region.contains(&|c| space.value_at(basis, c))
}

/// Y*(u): outcomes whose U* set contains `u`.
pub fn ystar(sets: &[UStarSet<Rational>], model: &ModelSpec, u: &[f64]) -> Result<Vec<OutcomeSeq>> {
    let b = basis_point(model, u)?;
    let mut out = Vec::new();
    for s in sets {
        if region_contains(model, &s.region, &b)? {
            out.push(s.outcome.clone());
        }
    }
    Ok(out)
}

/// Union of the given U* regions, simplified.
pub fn union_region<B: Bound>(sets: &[&UStarSet<B>]) -> RegionUnion<B> {
    let mut acc: Option<RegionUnion<B>> = None;
    for s in sets {
        acc = Some(match acc {
            None => s.region.clone(),
            Some(a) => a.union(&s.region),
        });
    }
    acc.map(|r| r.simplify()).unwrap_or_else(|| RegionUnion::empty(Vec::new()))
}

/// Indices of outcomes whose U* set lies inside `s`.
pub fn containment_outcomes<B: Bound>(sets: &[UStarSet<B>], s: &RegionUnion<B>) -> Vec<usize> {
    (0..sets.len()).filter(|i| sets[*i].region.is_subset_of(s)).collect()
}

/// Indices of outcomes whose U* set meets the interior of `s`.
pub fn hitting_outcomes<B: Bound>(sets: &[UStarSet<B>], s: &RegionUnion<B>) -> Vec<usize> {
    (0..sets.len()).filter(|i| sets[*i].region.meets_interior_of(s)).collect()
}

/// Order of U* sets used for canonical collection labels: fewer rows first,
/// then outcome lexicographic.
pub(crate) fn element_order<B: Bound>(model: &ModelSpec, a: &UStarSet<B>, b: &UStarSet<B>) -> Ordering {
    a.n_rows(model).cmp(&b.n_rows(model)).then_with(|| a.outcome.y.cmp(&b.outcome.y))
}
