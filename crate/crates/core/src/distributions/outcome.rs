use std::collections::BTreeMap;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{CovariateCell, Family, ModelSpec, OutcomeSeq, Y0Status};

/// Outcome probabilities at one cell, in `enumerate_outcomes` order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellProbs {
    pub cell: CovariateCell,
    pub probs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_errors: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_units: Option<u64>,
    /// Fewer units than the requested minimum.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub sparse: bool,
}

/// F_{Y|Z} over a finite set of cells. With an observed initial
/// condition each cell carries its `y0`, so the split by `y0` is a split
/// into cells.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CondOutcomeDist {
    pub cells: Vec<CellProbs>,
}

impl CondOutcomeDist {
    pub fn validate(&self, model: &ModelSpec) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for c in &self.cells {
            c.cell.validate(model)?;
            if !ids.insert(c.cell.cell_id) {
                return Err(Error::Validation(format!("duplicate cell id {}", c.cell.cell_id)));
            }
            let n = model.enumerate_outcomes(&c.cell)?.len();
            if c.probs.len() != n {
                return Err(Error::Validation(format!(
                    "cell {}: {} probabilities for {n} outcomes",
                    c.cell.cell_id,
                    c.probs.len()
                )));
            }
            if c.probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::Validation(format!("cell {}: negative probability", c.cell.cell_id)));
            }
            let s: f64 = c.probs.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("cell {}: probabilities sum to {s}", c.cell.cell_id)));
            }
        }
        Ok(())
    }

    pub fn cell(&self, cell_id: usize) -> Result<&CellProbs> {
        self.cells
            .iter()
            .find(|c| c.cell.cell_id == cell_id)
            .ok_or_else(|| Error::Validation(format!("unknown cell {cell_id}")))
    }

    /// `P[Y ∈ Y_set | cell]`, outcomes given by enumeration index.
    pub fn prob_y_in(&self, cell_id: usize, y_set: &[usize]) -> Result<f64> {
        let c = self.cell(cell_id)?;
        y_set
            .iter()
            .map(|i| {
                c.probs.get(*i).copied().ok_or_else(|| Error::Validation(format!("outcome index {i} out of range")))
            })
            .sum()
    }

    /// Standard error of `prob_y_in`, when the cell reports one.
    pub fn prob_y_in_se(&self, cell_id: usize, y_set: &[usize]) -> Result<f64> {
        let c = self.cell(cell_id)?;
        let p = self.prob_y_in(cell_id, y_set)?;
        Ok(match (c.n_units, &c.std_errors) {
            (Some(n), _) if n > 0 => (p * (1.0 - p) / n as f64).sqrt(),
            (_, Some(se)) => y_set.iter().map(|i| se[*i] * se[*i]).sum::<f64>().sqrt(),
            _ => 0.0,
        })
    }
}

fn field<'r>(rec: &'r csv::StringRecord, idx: &BTreeMap<String, usize>, name: &str, row: usize) -> Result<&'r str> {
    let i = idx.get(name).ok_or_else(|| Error::Parse(format!("missing column {name:?}")))?;
    rec.get(*i).map(str::trim).ok_or_else(|| Error::Parse(format!("row {row}: missing {name:?}")))
}

fn num<T: std::str::FromStr>(s: &str, name: &str, row: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Parse(format!("row {row}: bad {name} value {s:?}")))
}

struct UnitRows {
    first_row: usize,
    periods: BTreeMap<usize, (Vec<i64>, Vec<f64>)>,
    y0: Option<i64>,
}

/// Cell frequencies from a long-format panel CSV with columns `unit`,
/// `period` (1-based), `y` (or `y1`, `y2` for the simultaneous model),
/// `z1..zk` (or `z` when there is one covariate) and `y0` when the initial
/// condition is observed. Each distinct covariate path (and `y0`) is a
/// cell; cells are numbered in order of first appearance.
pub fn estimate_f(model: &ModelSpec, input: impl Read, min_units: u64) -> Result<CondOutcomeDist> {
    model.validate()?;
    if !model.has_discrete_outcomes() {
        return Err(Error::Unsupported(format!("{:?} outcomes are continuous", model.family)));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let idx: BTreeMap<String, usize> = reader.headers()?.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
    let znames: Vec<String> = if model.dim_z == 1 && !idx.contains_key("z1") {
        vec!["z".into()]
    } else {
        (1..=model.dim_z).map(|j| format!("z{j}")).collect()
    };
    let ynames: Vec<&str> = if model.family == Family::SimultaneousBinary { vec!["y1", "y2"] } else { vec!["y"] };
    let wants_y0 = model.y0 == Y0Status::Observed;

    let mut units: BTreeMap<String, UnitRows> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let row = n + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
        let unit = field(&rec, &idx, "unit", row)?.to_string();
        let period: usize = num(field(&rec, &idx, "period", row)?, "period", row)?;
        if !(1..=model.periods).contains(&period) {
            return Err(Error::Parse(format!("row {row}: period {period} outside 1..={}", model.periods)));
        }
        let ys = ynames.iter().map(|c| num(field(&rec, &idx, c, row)?, c, row)).collect::<Result<Vec<i64>>>()?;
        let zs = znames.iter().map(|c| num(field(&rec, &idx, c, row)?, c, row)).collect::<Result<Vec<f64>>>()?;
        if zs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("row {row}: non-finite covariate")));
        }
        let y0 = if wants_y0 { Some(num::<i64>(field(&rec, &idx, "y0", row)?, "y0", row)?) } else { None };
        let entry = units.entry(unit.clone()).or_insert_with(|| {
            order.push(unit.clone());
            UnitRows { first_row: row, periods: BTreeMap::new(), y0 }
        });
        if entry.y0 != y0 {
            return Err(Error::Parse(format!("row {row}: unit {unit} changes y0")));
        }
        if entry.periods.insert(period, (ys, zs)).is_some() {
            return Err(Error::Parse(format!("row {row}: unit {unit} repeats period {period}")));
        }
    }
    if order.is_empty() {
        return Err(Error::Parse("panel has no rows".into()));
    }

    type Key = (Vec<u64>, Option<i64>);
    let mut cells: Vec<(CovariateCell, Vec<u64>)> = Vec::new();
    let mut lookup: BTreeMap<Key, usize> = BTreeMap::new();
    for unit in &order {
        let u = &units[unit];
        if u.periods.len() != model.periods {
            let missing: Vec<String> =
                (1..=model.periods).filter(|t| !u.periods.contains_key(t)).map(|t| t.to_string()).collect();
            return Err(Error::Parse(format!(
                "unit {unit} (first seen at row {}) is missing period(s) {}",
                u.first_row,
                missing.join(", ")
            )));
        }
        let z: Vec<Vec<f64>> = u.periods.values().map(|(_, z)| z.clone()).collect();
        let key: Key = (z.iter().flatten().map(|v| v.to_bits()).collect(), u.y0);
        let ci = *lookup.entry(key).or_insert_with(|| {
            let mut cell = CovariateCell::new(cells.len(), z.clone());
            cell.y0 = u.y0;
            cells.push((cell, Vec::new()));
            cells.len() - 1
        });
        let (cell, counts) = &mut cells[ci];
        let y = if model.family == Family::SimultaneousBinary {
            let mut v: Vec<i64> = u.periods.values().map(|(y, _)| y[0]).collect();
            v.extend(u.periods.values().map(|(y, _)| y[1]));
            v
        } else {
            u.periods.values().map(|(y, _)| y[0]).collect()
        };
        let seq = OutcomeSeq::new(y).with_y0(cell.y0);
        model.check_outcome(&seq).map_err(|e| Error::Parse(format!("unit {unit} (row {}): {e}", u.first_row)))?;
        let outcomes = model.enumerate_outcomes(cell)?;
        if counts.is_empty() {
            counts.resize(outcomes.len(), 0);
        }
        let k = outcomes.iter().position(|o| o.y == seq.y).expect("checked outcome is enumerated");
        counts[k] += 1;
    }

    let cells = cells
        .into_iter()
        .map(|(cell, counts)| {
            let n: u64 = counts.iter().sum();
            let probs: Vec<f64> = counts.iter().map(|c| *c as f64 / n as f64).collect();
            let std_errors = probs.iter().map(|p| (p * (1.0 - p) / n as f64).sqrt()).collect();
            CellProbs { cell, probs, std_errors: Some(std_errors), n_units: Some(n), sparse: n < min_units }
        })
        .collect();
    let f = CondOutcomeDist { cells };
    f.validate(model)?;
    Ok(f)
}
