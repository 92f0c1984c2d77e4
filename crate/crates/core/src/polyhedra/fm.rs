use std::collections::BTreeMap;

use num_traits::{Signed, Zero};

use super::{Coord, LinIneq, LinIneqSystem, Relation};
use crate::scalar::{Bound, Rational};

/// Projects `coord` out of the system. Equalities are used for substitution
/// when available; otherwise every upper bound is paired with every lower
/// bound. Strictness propagates, so the projection is exact for mixed
/// strict and weak rows.
pub(super) fn eliminate<B: Bound>(sys: &LinIneqSystem<B>, coord: &Coord) -> LinIneqSystem<B> {
    let mut coords = sys.coords.clone();
    coords.remove(coord);

    let rows = &sys.rows;
    let mut out: Vec<LinIneq<B>> = Vec::new();

    if let Some(pivot) = rows.iter().position(|r| r.rel == Relation::Eq && !r.coeff(coord).is_zero()) {
        let e = &rows[pivot];
        let a = e.coeff(coord);
        for (i, r) in rows.iter().enumerate() {
            if i == pivot {
                continue;
            }
            let k = r.coeff(coord);
            if k.is_zero() {
                out.push(r.clone());
            } else {
                out.push(r.combine(&Rational::from_integer(1.into()), e, &(-k / &a)));
            }
        }
    } else {
        let mut upper = Vec::new();
        let mut lower = Vec::new();
        for r in rows {
            let k = r.coeff(coord);
            if k.is_zero() {
                out.push(r.clone());
            } else if k.is_positive() {
                upper.push((r, k));
            } else {
                lower.push((r, -k));
            }
        }
        for (u, ku) in &upper {
            for (l, kl) in &lower {
                out.push(u.combine(kl, l, ku));
            }
        }
    }

    let mut result = LinIneqSystem { coords, rows: Vec::new() };
    if out.iter().any(|r| r.constant_truth() == Some(false)) {
        result.rows =
            vec![LinIneq::new(Vec::new(), Relation::Le, B::from_rational(&-Rational::from_integer(1.into())))];
        return result;
    }
    for r in tighten_parallel(out.into_iter().filter(|r| r.constant_truth() != Some(true)).collect()) {
        result.push_unchecked(r);
    }
    result
}

/// Among inequalities with identical left-hand sides keeps only the
/// tightest. Exact: the dropped rows are implied by the kept one.
pub(crate) fn tighten_parallel<B: Bound>(rows: Vec<LinIneq<B>>) -> Vec<LinIneq<B>> {
    let mut best: BTreeMap<BTreeMap<Coord, Rational>, usize> = BTreeMap::new();
    let mut keep: Vec<Option<LinIneq<B>>> = Vec::with_capacity(rows.len());
    for r in rows {
        if r.rel == Relation::Eq || r.is_constant() {
            keep.push(Some(r));
            continue;
        }
        match best.get(&r.coeffs) {
            None => {
                best.insert(r.coeffs.clone(), keep.len());
                keep.push(Some(r));
            }
            Some(&j) => {
                let cur = keep[j].as_ref().expect("slot holds the current best");
                let ord = r.rhs.cmp_bound(&cur.rhs);
                let better = ord.is_lt() || (ord.is_eq() && r.is_strict() && !cur.is_strict());
                if better {
                    keep[j] = Some(r);
                }
            }
        }
    }
    keep.into_iter().flatten().collect()
}

pub(super) fn is_empty<B: Bound>(sys: &LinIneqSystem<B>) -> bool {
    let mut cur = sys.clone();
    if cur.rows.iter().any(|r| r.constant_truth() == Some(false)) {
        return true;
    }
    loop {
        let live: Vec<Coord> = cur
            .rows
            .iter()
            .flat_map(|r| r.coeffs.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        if live.is_empty() {
            return cur.rows.iter().any(|r| r.constant_truth() == Some(false));
        }
        let next = pick_variable(&cur, &live);
        cur = eliminate(&cur, &next);
        if cur.rows.iter().any(|r| r.constant_truth() == Some(false)) {
            return true;
        }
    }
}

/// Prefers a coordinate fixed by an equality, then the one whose
/// elimination creates the fewest new rows.
fn pick_variable<B: Bound>(sys: &LinIneqSystem<B>, live: &[Coord]) -> Coord {
    for r in &sys.rows {
        if r.rel == Relation::Eq {
            if let Some(c) = r.coeffs.keys().next() {
                return c.clone();
            }
        }
    }
    let mut best: Option<(i64, &Coord)> = None;
    for c in live {
        let (mut p, mut n) = (0i64, 0i64);
        for r in &sys.rows {
            let k = r.coeff(c);
            if k.is_positive() {
                p += 1;
            } else if k.is_negative() {
                n += 1;
            }
        }
        let growth = p * n - p - n;
        if best.map_or(true, |(g, _)| growth < g) {
            best = Some((growth, c));
        }
    }
    best.expect("live is nonempty").1.clone()
}
