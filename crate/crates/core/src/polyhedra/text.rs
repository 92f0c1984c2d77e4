//! Canonical text: one row per line, `a1*x1 + a2*x2 REL b`, rationals as
//! `p/q`, preceded by a `coords:` header.

use num_traits::Signed;

use super::{Coord, LinIneq, LinIneqSystem, Relation};
use crate::error::{Error, Result};
use crate::scalar::{parse_rational, Bound, Rational};

pub(super) fn row_to_text<B: Bound>(row: &LinIneq<B>) -> String {
    let mut lhs = String::new();
    for (i, (c, v)) in row.coeffs.iter().enumerate() {
        if i == 0 {
            lhs.push_str(&format!("{v}*{c}"));
        } else if v.is_negative() {
            lhs.push_str(&format!(" - {}*{c}", v.abs()));
        } else {
            lhs.push_str(&format!(" + {v}*{c}"));
        }
    }
    if lhs.is_empty() {
        lhs.push('0');
    }
    format!("{lhs} {} {}", row.rel.symbol(), row.rhs.render())
}

pub(super) fn system_to_text<B: Bound>(sys: &LinIneqSystem<B>) -> String {
    let coords: Vec<String> = sys.coords.iter().map(|c| c.to_string()).collect();
    let mut out = format!("coords: {}\n", coords.join(", "));
    for r in &sys.rows {
        out.push_str(&r.to_text());
        out.push('\n');
    }
    out
}

pub(super) fn parse_row(line: &str) -> Result<LinIneq<Rational>> {
    let bad = |m: &str| Error::Parse(format!("{m} in row {line:?}"));
    let (lhs, op, rhs) = [" <= ", " >= ", " < ", " > ", " = "]
        .iter()
        .find_map(|op| line.split_once(op).map(|(l, r)| (l, op.trim(), r)))
        .ok_or_else(|| bad("missing relation"))?;
    let rhs = parse_rational(rhs)?;
    let mut terms = Vec::new();
    let lhs = lhs.trim();
    if lhs != "0" {
        let normalized = lhs.replace(" - ", " + -");
        for term in normalized.split(" + ") {
            let (k, c) = term.trim().split_once('*').ok_or_else(|| bad("missing '*'"))?;
            terms.push((Coord::parse(c.trim()), parse_rational(k)?));
        }
    }
    Ok(match op {
        "<=" => LinIneq::le(terms, rhs),
        "<" => LinIneq::lt(terms, rhs),
        "=" => LinIneq::eq(terms, rhs),
        ">=" => LinIneq::ge(terms, rhs),
        _ => LinIneq::new(terms.into_iter().map(|(c, v)| (c, -v)), Relation::Lt, -rhs),
    })
}

pub(super) fn parse_system(s: &str) -> Result<LinIneqSystem<Rational>> {
    let mut coords: Vec<Coord> = Vec::new();
    let mut rows = Vec::new();
    for line in s.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(list) = line.strip_prefix("coords:") {
            coords.extend(list.split(',').map(str::trim).filter(|c| !c.is_empty()).map(Coord::parse));
        } else {
            rows.push(parse_row(line)?);
        }
    }
    if coords.is_empty() {
        for r in &rows {
            coords.extend(r.coeffs.keys().cloned());
        }
    }
    LinIneqSystem::new(coords, rows)
}
