//! Checking structures against observed outcome distributions, and
//! identified-set, outer-set and profile scans over parameter grids.

mod bounds;
mod scan;

use serde::{Deserialize, Serialize};

use crate::distributions::{CondOutcomeDist, LatentDist, MeasureOptions, Measurer};
use crate::error::{Error, Result};
use crate::models::{CovariateCell, ModelSpec, Theta};
use crate::randomsets::{core_determining_collection, ustar_numeric, Cdc, CdcOptions, UStarSet, DEFAULT_CDC_CAP};
use crate::scalar::Rational;

pub use bounds::{artstein_bruteforce, linear_panel_beta, profile_bounds_2p_binary, ArtsteinReport, ProfileOptions};
pub use scan::{
    identified_set_scan, outer_set_scan, GFamily, GridAxis, GridPoint, IdentifiedSetGrid, JointPoint, ThetaGrid,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub measure: MeasureOptions,
    /// Feasibility tolerance; by default three times the largest standard
    /// error among the inequalities (zero when every term is exact).
    pub tol: Option<f64>,
    pub cap: usize,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions { measure: MeasureOptions::default(), tol: None, cap: DEFAULT_CDC_CAP }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckItem {
    /// Collection item id within the cell.
    pub item: usize,
    pub cell_id: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub std_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
    pub pass: bool,
    /// Smallest slack; 1 when there are no informative inequalities.
    pub min_slack: f64,
    pub tol: f64,
    /// `(cell_id, item)` pairs attaining the smallest slack.
    pub binding: Vec<(usize, usize)>,
}

/// U* sets and collection of one observed cell at one parameter value,
/// with the containment probabilities of its items.
pub(crate) struct PreparedCell {
    pub cell: CovariateCell,
    pub sets: Vec<UStarSet<Rational>>,
    pub cdc: Cdc<Rational>,
    /// Per item, the bitmask of distinct sets whose union is `S`.
    pub masks: Vec<u64>,
    pub lhs: Vec<f64>,
    pub lhs_se: Vec<f64>,
}

impl PreparedCell {
    pub fn atoms(&self) -> Vec<&crate::polyhedra::RegionUnion<Rational>> {
        self.cdc.distinct.iter().map(|g| &self.sets[g[0]].region).collect()
    }
}

pub(crate) fn prepare_cells(
    model: &ModelSpec,
    theta: &Theta,
    f: &CondOutcomeDist,
    cap: usize,
) -> Result<Vec<PreparedCell>> {
    let copts = CdcOptions { cap, ..CdcOptions::default() };
    f.cells
        .iter()
        .map(|c| {
            let sets = ustar_numeric(model, theta, &c.cell)?;
            let cdc = core_determining_collection(model, &sets, &copts)?;
            let masks = cdc
                .items
                .iter()
                .map(|it| {
                    it.t_set.iter().fold(0u64, |m, rep| {
                        let d = cdc.distinct.iter().position(|g| g[0] == *rep).expect("generator is distinct");
                        m | 1 << d
                    })
                })
                .collect();
            let id = c.cell.cell_id;
            let lhs = cdc.items.iter().map(|it| f.prob_y_in(id, &it.y_set)).collect::<Result<Vec<_>>>()?;
            let lhs_se = cdc.items.iter().map(|it| f.prob_y_in_se(id, &it.y_set)).collect::<Result<Vec<_>>>()?;
            Ok(PreparedCell { cell: c.cell.clone(), sets, cdc, masks, lhs, lhs_se })
        })
        .collect()
}

pub(crate) fn evaluate(cells: &[PreparedCell], measurers: &[&Measurer], tol: Option<f64>) -> Result<CheckReport> {
    let mut items = Vec::new();
    for (pc, m) in cells.iter().zip(measurers) {
        let rhs = m.measure_unions(&pc.atoms(), &pc.masks)?;
        for (k, it) in pc.cdc.items.iter().enumerate() {
            items.push(CheckItem {
                item: it.id,
                cell_id: pc.cell.cell_id,
                lhs: pc.lhs[k],
                rhs: rhs[k].estimate,
                slack: rhs[k].estimate - pc.lhs[k],
                std_error: (pc.lhs_se[k].powi(2) + rhs[k].std_error.powi(2)).sqrt(),
            });
        }
    }
    Ok(report(items, tol))
}

fn report(items: Vec<CheckItem>, tol: Option<f64>) -> CheckReport {
    let tol = tol.unwrap_or_else(|| 3.0 * items.iter().map(|i| i.std_error).fold(0.0, f64::max));
    let min_slack = items.iter().map(|i| i.slack).fold(1.0, f64::min);
    let binding = items.iter().filter(|i| i.slack <= min_slack + 1e-12).map(|i| (i.cell_id, i.item)).collect();
    CheckReport { pass: min_slack >= -tol, items, min_slack, tol, binding }
}

/// Evaluates every collection inequality of `θ` at every cell of `F`
/// under the latent distribution `G`.
pub fn check_structure(
    model: &ModelSpec,
    theta: &Theta,
    g: &LatentDist,
    f: &CondOutcomeDist,
    opts: &CheckOptions,
) -> Result<CheckReport> {
    f.validate(model)?;
    g.validate(model)?;
    if f.cells.is_empty() {
        return Err(Error::Validation("the outcome distribution has no cells".into()));
    }
    if let Some(id) = g.per_cell.keys().find(|id| f.cell(**id).is_err()) {
        return Err(Error::Validation(format!("latent distribution names cell {id}, which F lacks")));
    }
    let cells = prepare_cells(model, theta, f, opts.cap)?;
    let measurers =
        f.cells.iter().map(|c| Measurer::new(model, g, c.cell.cell_id, opts.measure)).collect::<Result<Vec<_>>>()?;
    let refs: Vec<&Measurer> = measurers.iter().collect();
    evaluate(&cells, &refs, opts.tol)
}
