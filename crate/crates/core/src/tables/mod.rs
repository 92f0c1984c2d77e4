//! Canonical-text tables of U* sets, Y* cells and core determining
//! collections, rendered with symbolic parameters and diffed against the
//! committed golden files.
//!
//! Symbolic sets are computed at a witness parameter point per sign regime.
//! Where a table covers both signs of `γ`, the two regimes are merged row
//! by row into `max(γ,0)` / `min(γ,0)` form.

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::models::{CovariateCell, Family, ModelSpec, OutcomeSeq, ParamValues, Theta, Y0Status};
use crate::polyhedra::{Coord, LinIneq, LinIneqSystem, RegionUnion, Relation};
use crate::randomsets::{core_determining_collection, ustar_all, Cdc, CdcOptions, CdcOrder, UStarSet};
use crate::scalar::{Bound, Rational};
use crate::symbolic::{merge_gamma_regimes, SymExpr, Symbol};

pub const TABLE_IDS: &[&str] = &[
    "ystar2",
    "dbr3",
    "mdc-ustar",
    "oc3-ustar",
    "oc3-cdc",
    "ses-ustar",
    "sbp3-cdc",
    "dbp3-cdc-gpos",
    "dbp3-cdc-gneg",
    "mdc-cdc",
    "ses-cdc",
];

pub fn golden(id: &str) -> Option<&'static str> {
    Some(match id {
        "ystar2" => include_str!("../../golden/ystar2.txt"),
        "dbr3" => include_str!("../../golden/dbr3.txt"),
        "mdc-ustar" => include_str!("../../golden/mdc-ustar.txt"),
        "oc3-ustar" => include_str!("../../golden/oc3-ustar.txt"),
        "oc3-cdc" => include_str!("../../golden/oc3-cdc.txt"),
        "ses-ustar" => include_str!("../../golden/ses-ustar.txt"),
        "sbp3-cdc" => include_str!("../../golden/sbp3-cdc.txt"),
        "dbp3-cdc-gpos" => include_str!("../../golden/dbp3-cdc-gpos.txt"),
        "dbp3-cdc-gneg" => include_str!("../../golden/dbp3-cdc-gneg.txt"),
        "mdc-cdc" => include_str!("../../golden/mdc-cdc.txt"),
        "ses-cdc" => include_str!("../../golden/ses-cdc.txt"),
        _ => return None,
    })
}

/// Outcome of comparing one rendered table with its golden file.
#[derive(Clone, Debug, PartialEq)]
pub struct TableDiff {
    pub id: String,
    pub rendered: String,
    /// First differing line as `(line number, golden, rendered)`.
    pub first_difference: Option<(usize, String, String)>,
}

impl TableDiff {
    pub fn matches(&self) -> bool {
        self.first_difference.is_none()
    }
}

pub fn diff_against_golden(id: &str) -> Result<TableDiff> {
    let want = golden(id).ok_or_else(|| Error::Validation(format!("unknown table {id:?}")))?;
    let got = render(id)?;
    let first_difference = if got == want {
        None
    } else {
        let (g, w): (Vec<&str>, Vec<&str>) = (got.lines().collect(), want.lines().collect());
        let n = g.len().max(w.len());
        (0..n)
            .find(|i| g.get(*i) != w.get(*i))
            .map(|i| (i + 1, w.get(i).unwrap_or(&"").to_string(), g.get(i).unwrap_or(&"").to_string()))
            .or(Some((n + 1, String::new(), String::new())))
    };
    Ok(TableDiff { id: id.into(), rendered: got, first_difference })
}

/// A parameter point whose sign pattern selects one regime, with the
/// numbers used as symbol witnesses.
struct Witness {
    model: ModelSpec,
    theta: Theta,
    cell: CovariateCell,
}

fn witness(family: Family, periods: usize, y0: Y0Status, gamma: f64) -> Witness {
    let z = [0.0, 0.37, -0.61];
    let mut model = ModelSpec::new(family, periods, y0);
    let mut theta = Theta::scalar_beta(1.0);
    match family {
        Family::BinaryDynamic => theta.gamma = vec![gamma],
        Family::Ordered => {
            model = model.with_choices(3);
            theta.cuts = vec![0.0, 1.0];
        }
        Family::Multidiscrete => {
            model = model.with_choices(3);
            theta.beta = vec![vec![1.0], vec![-0.7]];
        }
        Family::SimultaneousBinary => {
            theta.beta = vec![vec![1.0], vec![-0.7]];
            theta.alpha = vec![1.0, 2.0];
        }
        _ => {}
    }
    let mut cell = CovariateCell::scalar(0, &z[..periods]);
    if y0 == Y0Status::Observed {
        cell.y0 = Some(1);
    }
    Witness { model, theta, cell }
}

fn symbolic_params(w: &Witness) -> Result<ParamValues<SymExpr>> {
    let num = ParamValues::numeric(&w.model, &w.theta, &w.cell)?;
    let slot_comp = |k: usize| match w.model.family {
        Family::Multidiscrete | Family::SimultaneousBinary => k as u8 + 1,
        _ => 0,
    };
    let sym = |s: Symbol, v: &Rational| SymExpr::symbol(s, v.clone());
    let zb = num
        .zb
        .iter()
        .enumerate()
        .map(|(k, ts)| {
            ts.iter().enumerate().map(|(t, v)| sym(Symbol::ZBeta { comp: slot_comp(k), t: t as u8 + 1 }, v)).collect()
        })
        .collect();
    let gamma: Vec<SymExpr> = num.gamma.iter().map(|v| sym(Symbol::Gamma, v)).collect();
    let initial_lag = match (w.model.y0, w.cell.y0, gamma.first()) {
        (Y0Status::Observed, Some(y0), Some(g)) => {
            Some(SymExpr::symbol(Symbol::Y0Gamma, g.witness() * Rational::from_integer(y0.into())))
        }
        _ => None,
    };
    Ok(ParamValues {
        zb,
        alpha: num.alpha.iter().enumerate().map(|(j, v)| sym(Symbol::Alpha(j as u8 + 1), v)).collect(),
        gamma,
        cuts: num.cuts.iter().enumerate().map(|(j, v)| sym(Symbol::Cut(j as u8 + 1), v)).collect(),
        initial_lag,
    })
}

fn symbolic_sets(w: &Witness) -> Result<Vec<UStarSet<SymExpr>>> {
    ustar_all(&w.model, &symbolic_params(w)?, &w.cell)
}

/// Left-hand side of a row as text, with differences of two basis
/// coordinates written as a single difference.
fn lhs_text(coeffs: &[(Coord, Rational)], two_periods: bool) -> String {
    let mut terms: Vec<(Rational, String)> = Vec::new();
    let mut used = vec![false; coeffs.len()];
    for i in 0..coeffs.len() {
        if used[i] {
            continue;
        }
        if let (Coord::Diff { comp, t, s: 1 }, k) = (&coeffs[i].0, &coeffs[i].1) {
            let partner = (0..coeffs.len()).find(|j| {
                !used[*j]
                    && *j != i
                    && matches!(&coeffs[*j].0, Coord::Diff { comp: c2, s: 1, .. } if c2 == comp)
                    && (&coeffs[*j].1 + k).is_zero()
            });
            if let Some(j) = partner {
                let Coord::Diff { t: t2, .. } = coeffs[j].0 else { unreachable!() };
                let (hi, lo, k_hi) = if *t > t2 { (*t, t2, k.clone()) } else { (t2, *t, coeffs[j].1.clone()) };
                used[i] = true;
                used[j] = true;
                terms.push((k_hi, Coord::Diff { comp: *comp, t: hi, s: lo }.to_string()));
                continue;
            }
        }
        used[i] = true;
        terms.push((coeffs[i].1.clone(), coeffs[i].0.to_string()));
    }
    if let Some(p) = terms.iter().position(|(k, _)| !k.is_negative()) {
        terms[..=p].rotate_right(1);
    }
    let mut out = String::new();
    for (i, (k, name)) in terms.iter().enumerate() {
        let mag = k.abs();
        let body = if mag.is_one() { name.clone() } else { format!("{mag}*{name}") };
        out += &match (i, k.is_negative()) {
            (0, false) => body,
            (0, true) => format!("-{body}"),
            (_, false) => format!(" + {body}"),
            (_, true) => format!(" - {body}"),
        };
    }
    if two_periods {
        out = out.replace("Δ21u", "Δu");
    }
    out
}

/// `(lhs, relation, rhs)` of a row oriented so that its last coordinate
/// has a positive coefficient.
fn oriented<B: Bound>(row: &LinIneq<B>) -> (Vec<(Coord, Rational)>, &'static str, B) {
    let coeffs: Vec<(Coord, Rational)> = row.coeffs().iter().map(|(c, v)| (c.clone(), v.clone())).collect();
    let flip = coeffs.last().is_some_and(|(_, v)| v.is_negative());
    if !flip {
        return (coeffs, row.rel().symbol(), row.rhs().clone());
    }
    let rel = match row.rel() {
        Relation::Le => ">=",
        Relation::Lt => ">",
        Relation::Eq => "=",
    };
    (coeffs.into_iter().map(|(c, v)| (c, -v)).collect(), rel, row.rhs().scale(&-Rational::one()))
}

fn rhs_text<B: Bound>(b: &B, two_periods: bool) -> String {
    let s = b.render();
    if two_periods {
        s.replace("Δ21z", "Δz")
    } else {
        s
    }
}

/// Rows of one polyhedron, identities among differences left out, sorted
/// by their left-hand sides.
fn system_rows<B: Bound>(model: &ModelSpec, sys: &LinIneqSystem<B>) -> Vec<(String, &'static str, B)> {
    let space = model.diff_space();
    let two = model.periods == 2;
    let mut rows: Vec<_> = sys
        .rows()
        .iter()
        .filter(|r| !space.is_tie(*r))
        .map(|r| {
            let (c, rel, rhs) = oriented(r);
            (lhs_text(&c, two), rel, rhs)
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(b.1)));
    rows
}

fn rows_text<B: Bound>(rows: &[(String, &'static str, B)], two: bool) -> String {
    rows.iter().map(|(l, r, b)| format!("{l} {r} {}", rhs_text(b, two))).collect::<Vec<_>>().join(" ∧ ")
}

fn region_text<B: Bound>(model: &ModelSpec, region: &RegionUnion<B>, full: bool) -> String {
    if full {
        return "R_U".into();
    }
    if region.is_empty() {
        return "∅".into();
    }
    let two = model.periods == 2;
    let region = region.merge_convex();
    let parts: Vec<String> = region.parts().iter().map(|p| rows_text(&system_rows(model, p), two)).collect();
    if parts.len() == 1 {
        parts.into_iter().next().unwrap()
    } else {
        parts.iter().map(|p| format!("({p})")).collect::<Vec<_>>().join(" ∨ ")
    }
}

/// One polyhedron per regime merged into a single row list.
fn merge_systems(
    model: &ModelSpec,
    pos: &LinIneqSystem<SymExpr>,
    neg: &LinIneqSystem<SymExpr>,
) -> Option<Vec<(String, &'static str, SymExpr)>> {
    let a = system_rows(model, pos);
    let b = system_rows(model, neg);
    if a.len() != b.len() {
        return None;
    }
    a.into_iter()
        .zip(b)
        .map(|((la, ra, ba), (lb, rb, bb))| {
            if la != lb || ra != rb {
                return None;
            }
            merge_gamma_regimes(&ba, &bb).map(|m| (la, ra, m))
        })
        .collect()
}

fn merged_region_text(model: &ModelSpec, pos: &UStarSet<SymExpr>, neg: &UStarSet<SymExpr>) -> Result<String> {
    if pos.full && neg.full {
        return Ok("R_U".into());
    }
    let (p, n) = (pos.region.parts(), neg.region.parts());
    if p.len() != n.len() || pos.full != neg.full {
        return Err(Error::Unsupported(format!("U*{} changes shape across the sign of γ", pos.outcome)));
    }
    let two = model.periods == 2;
    let parts = p
        .iter()
        .zip(n)
        .map(|(a, b)| {
            merge_systems(model, a, b)
                .map(|rows| rows_text(&rows, two))
                .ok_or_else(|| Error::Unsupported(format!("U*{} does not merge across the sign of γ", pos.outcome)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(if parts.len() == 1 {
        parts[0].clone()
    } else {
        parts.iter().map(|s| format!("({s})")).collect::<Vec<_>>().join(" ∨ ")
    })
}

fn set_label(outcomes: &[OutcomeSeq], idx: &[usize]) -> String {
    let mut labels: Vec<&OutcomeSeq> = idx.iter().map(|i| &outcomes[*i]).collect();
    labels.sort_by(|a, b| a.y.cmp(&b.y));
    format!("{{{}}}", labels.iter().map(|o| o.label()).collect::<Vec<_>>().join(","))
}

fn ustar_table(header: &str, w: &Witness) -> Result<String> {
    let sets = symbolic_sets(w)?;
    let mut out = format!("{header}\n");
    for (i, s) in sets.iter().enumerate() {
        out += &format!("{} | {} | {}\n", i + 1, s.outcome, region_text(&w.model, &s.region, s.full));
    }
    Ok(out)
}

fn ustar_table_merged(header: &str, pos: &Witness, neg: &Witness) -> Result<String> {
    let a = symbolic_sets(pos)?;
    let b = symbolic_sets(neg)?;
    let mut out = format!("{header}\n");
    for (i, (sa, sb)) in a.iter().zip(&b).enumerate() {
        out += &format!("{} | {} | {}\n", i + 1, sa.outcome, merged_region_text(&pos.model, sa, sb)?);
    }
    Ok(out)
}

fn cdc_of(w: &Witness, order: CdcOrder) -> Result<(Cdc<SymExpr>, Vec<UStarSet<SymExpr>>)> {
    let sets = symbolic_sets(w)?;
    let cdc = core_determining_collection(&w.model, &sets, &CdcOptions { order, ..CdcOptions::default() })?;
    Ok((cdc, sets))
}

fn cdc_table(header: &str, w: &Witness, order: CdcOrder) -> Result<String> {
    let (cdc, _) = cdc_of(w, order)?;
    let mut out = format!("{header}\n");
    for (i, it) in cdc.items.iter().enumerate() {
        out += &format!(
            "{} | Y: {} | T: {}\n",
            i + 1,
            set_label(&cdc.outcomes, &it.y_set),
            set_label(&cdc.outcomes, &it.t_set)
        );
    }
    Ok(out)
}

/// The cells `{u : Y*(u) = Y}` of a two-period binary model, one row per
/// outcome set with a nonempty cell under some sign of `γ`.
fn ystar_block(label: &str, pos: &Witness, neg: &Witness) -> Result<String> {
    let model = &pos.model;
    let space = model.diff_space();
    let ambient: LinIneqSystem<SymExpr> = space.ambient();
    let regimes = [symbolic_sets(pos)?, symbolic_sets(neg)?];
    let n = regimes[0].len();
    let optional: Vec<usize> = (0..n).filter(|i| !regimes[0][*i].full || !regimes[1][*i].full).collect();
    let mut ys: Vec<Vec<usize>> = (0..1usize << optional.len())
        .map(|m| {
            (0..n)
                .filter(|i| !optional.contains(i) || m >> optional.iter().position(|o| o == i).unwrap() & 1 == 1)
                .collect()
        })
        .collect();
    ys.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    let mut out = String::new();
    for y in ys {
        let cells: Vec<(LinIneqSystem<SymExpr>, LinIneqSystem<SymExpr>)> = regimes
            .iter()
            .map(|sets| {
                let mut literal = RegionUnion::from_system(ambient.clone());
                for (i, s) in sets.iter().enumerate() {
                    literal = if y.contains(&i) {
                        literal.intersect(&s.region)
                    } else {
                        literal.intersect(&s.region.complement_within(&ambient))
                    };
                }
                match literal.parts() {
                    [] => Ok(None),
                    [one] => Ok(Some((one.clone(), one.prune_redundant()))),
                    _ => Err(Error::Unsupported("Y* cell is not convex".into())),
                }
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .filter(|(l, _)| !l.is_empty())
            .collect();
        let two = model.periods == 2;
        let text = match cells.as_slice() {
            [] => continue,
            [(_, pruned)] => rows_text(&system_rows(model, pruned), two),
            [(lp, pp), (ln, pn)] => match merge_systems(model, pp, pn).or_else(|| merge_systems(model, lp, ln)) {
                Some(rows) => rows_text(&rows, two),
                None => return Err(Error::Unsupported("Y* cell does not merge across the sign of γ".into())),
            },
            _ => unreachable!(),
        };
        let outcomes: Vec<OutcomeSeq> = regimes[0].iter().map(|s| s.outcome.clone()).collect();
        let ylabel = if y.len() == n { "R_Y".to_string() } else { set_label(&outcomes, &y) };
        out += &format!("{label} | {ylabel} | {text}\n");
    }
    Ok(out)
}

/// Renders one table by id.
pub fn render(id: &str) -> Result<String> {
    use Family::*;
    use Y0Status::*;
    let w = witness;
    match id {
        "ystar2" => {
            let mut out = String::from("# Y* cells, binary response, T=2\n");
            out += &ystar_block("observed", &w(BinaryDynamic, 2, Observed, 1.0), &w(BinaryDynamic, 2, Observed, -1.0))?;
            out += &ystar_block(
                "not observed",
                &w(BinaryDynamic, 2, Unobserved, 1.0),
                &w(BinaryDynamic, 2, Unobserved, -1.0),
            )?;
            Ok(out)
        }
        "dbr3" => ustar_table_merged(
            "# U* sets, dynamic binary response, T=3, y0 not observed",
            &w(BinaryDynamic, 3, Unobserved, 1.0),
            &w(BinaryDynamic, 3, Unobserved, -1.0),
        ),
        "mdc-ustar" => {
            ustar_table("# U* sets, multiple discrete choice, 3 choices, T=2", &w(Multidiscrete, 2, Absent, 0.0))
        }
        "oc3-ustar" => ustar_table("# U* sets, ordered response, 3 categories, T=2", &w(Ordered, 2, Absent, 0.0)),
        "ses-ustar" => {
            ustar_table("# U* sets, simultaneous binary response, T=2", &w(SimultaneousBinary, 2, Absent, 0.0))
        }
        "oc3-cdc" => {
            let wt = w(Ordered, 2, Absent, 0.0);
            let (cdc, _) = cdc_of(&wt, CdcOrder::Containment)?;
            let mut out = String::from("# Core determining inequalities, ordered response, 3 categories, T=2\n");
            for (i, it) in cdc.items.iter().enumerate() {
                out += &format!(
                    "{} | Y: {} | S: {}\n",
                    i + 1,
                    set_label(&cdc.outcomes, &it.y_set),
                    region_text(&wt.model, &it.s_region, false)
                );
            }
            Ok(out)
        }
        "sbp3-cdc" => cdc_table(
            "# Core determining collection, static binary response, T=3",
            &w(BinaryStatic, 3, Absent, 0.0),
            CdcOrder::Support,
        ),
        "dbp3-cdc-gpos" => cdc_table(
            "# Core determining collection, dynamic binary response, T=3, y0 not observed, γ > 0",
            &w(BinaryDynamic, 3, Unobserved, 1.0),
            CdcOrder::Support,
        ),
        "dbp3-cdc-gneg" => cdc_table(
            "# Core determining collection, dynamic binary response, T=3, y0 not observed, γ < 0",
            &w(BinaryDynamic, 3, Unobserved, -1.0),
            CdcOrder::Support,
        ),
        "mdc-cdc" => cdc_table(
            "# Core determining collection, multiple discrete choice, 3 choices, T=2",
            &w(Multidiscrete, 2, Absent, 0.0),
            CdcOrder::Containment,
        ),
        "ses-cdc" => cdc_table(
            "# Core determining collection, simultaneous binary response, T=2, α1, α2 >= 0",
            &w(SimultaneousBinary, 2, Absent, 0.0),
            CdcOrder::Support,
        ),
        _ => Err(Error::Validation(format!("unknown table {id:?}; known: {}", TABLE_IDS.join(", ")))),
    }
}

/// U* sets and collection items at a numeric parameter value, in the same
/// row format as the symbolic tables.
pub fn render_numeric(model: &ModelSpec, theta: &Theta, cell: &CovariateCell, cap: usize) -> Result<String> {
    let sets = crate::randomsets::ustar_numeric(model, theta, cell)?;
    let mut out = format!("# U* sets, cell {}\n", cell.cell_id);
    for (i, s) in sets.iter().enumerate() {
        out += &format!("{} | {} | {}\n", i + 1, s.outcome, region_text(model, &s.region, s.full));
    }
    let cdc = core_determining_collection(model, &sets, &CdcOptions { cap, ..CdcOptions::default() })?;
    out += &format!(
        "# Core determining collection: {} items from {} distinct sets, {} candidate unions\n",
        cdc.items.len(),
        cdc.distinct.len(),
        cdc.candidate_unions
    );
    for (i, it) in cdc.items.iter().enumerate() {
        out += &format!(
            "{} | Y: {} | T: {} | S: {}\n",
            i + 1,
            set_label(&cdc.outcomes, &it.y_set),
            set_label(&cdc.outcomes, &it.t_set),
            region_text(model, &it.s_region, false)
        );
    }
    Ok(out)
}
