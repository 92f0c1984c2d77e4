use std::collections::BTreeSet;

use super::{Coord, LinIneq, LinIneqSystem};
use crate::error::Result;
use crate::scalar::Bound;

/// A finite union of polyhedra over a common coordinate set. No parts means
/// the empty set.
#[derive(Clone, Debug, PartialEq)]
pub struct RegionUnion<B> {
    coords: BTreeSet<Coord>,
    parts: Vec<LinIneqSystem<B>>,
}

impl<B: Bound> RegionUnion<B> {
    pub fn empty(coords: impl IntoIterator<Item = Coord>) -> Self {
        RegionUnion { coords: coords.into_iter().collect(), parts: Vec::new() }
    }

    pub fn from_system(sys: LinIneqSystem<B>) -> Self {
        RegionUnion { coords: sys.coords.clone(), parts: vec![sys] }
    }

    pub fn from_parts(
        coords: impl IntoIterator<Item = Coord>,
        parts: impl IntoIterator<Item = LinIneqSystem<B>>,
    ) -> Self {
        let coords: BTreeSet<Coord> = coords.into_iter().collect();
        let parts = parts.into_iter().map(|p| p.with_coords(coords.iter().cloned())).collect();
        RegionUnion { coords, parts }
    }

    pub fn coords(&self) -> &BTreeSet<Coord> {
        &self.coords
    }

    pub fn parts(&self) -> &[LinIneqSystem<B>] {
        &self.parts
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut coords = self.coords.clone();
        coords.extend(other.coords.iter().cloned());
        Self::from_parts(coords, self.parts.iter().chain(&other.parts).cloned())
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut coords = self.coords.clone();
        coords.extend(other.coords.iter().cloned());
        let mut parts = Vec::new();
        for p in &self.parts {
            for q in &other.parts {
                let pq = p.intersect(q);
                if !pq.is_empty() {
                    parts.push(pq);
                }
            }
        }
        Self::from_parts(coords, parts)
    }

    pub fn intersect_system(&self, sys: &LinIneqSystem<B>) -> Self {
        self.intersect(&Self::from_system(sys.clone()))
    }

    /// Complement relative to `ambient` (for instance the subspace cut out
    /// by identities among differenced coordinates).
    pub fn complement_within(&self, ambient: &LinIneqSystem<B>) -> Self {
        let mut acc: Vec<LinIneqSystem<B>> = vec![ambient.clone()];
        for part in &self.parts {
            let mut next = Vec::new();
            for a in &acc {
                for row in part.rows() {
                    if ambient.rows().contains(row) {
                        continue;
                    }
                    for neg in row.negation() {
                        let s = a.with_row(neg);
                        if !s.is_empty() {
                            next.push(s);
                        }
                    }
                }
            }
            acc = next;
        }
        Self::from_parts(self.coords.clone(), acc)
    }

    pub fn is_empty(&self) -> bool {
        self.parts.iter().all(|p| p.is_empty())
    }

    /// True when the union covers `ambient`.
    pub fn covers(&self, ambient: &LinIneqSystem<B>) -> bool {
        is_subset(ambient, &self.parts)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.parts.iter().all(|p| is_subset(p, &other.parts))
    }

    pub fn same_set(&self, other: &Self) -> bool {
        self.is_subset_of(other) && other.is_subset_of(self)
    }

    /// Nonempty relative interior.
    pub fn has_interior(&self) -> bool {
        self.parts.iter().any(|p| !p.strict_interior().is_empty())
    }

    /// Whether the intersection with `other` has nonempty relative interior.
    pub fn overlaps_interior(&self, other: &Self) -> bool {
        self.parts.iter().any(|p| {
            let ps = p.strict_interior();
            other.parts.iter().any(|q| !ps.intersect(&q.strict_interior()).is_empty())
        })
    }

    /// Whether this set meets the interior of `other`.
    pub fn meets_interior_of(&self, other: &Self) -> bool {
        self.parts.iter().any(|p| other.parts.iter().any(|q| !p.intersect(&q.strict_interior()).is_empty()))
    }

    /// Drops empty and covered parts, prunes redundant rows and sorts parts
    /// by canonical key. The point set is unchanged.
    pub fn simplify(&self) -> Self {
        let mut parts: Vec<LinIneqSystem<B>> =
            self.parts.iter().filter(|p| !p.is_empty()).map(|p| p.prune_redundant()).collect();
        parts.sort_by_cached_key(|p| p.canonical_key());
        parts.dedup_by(|a, b| a.canonical_key() == b.canonical_key());
        let mut kept: Vec<LinIneqSystem<B>> = Vec::new();
        for i in 0..parts.len() {
            let covered = (0..parts.len()).any(|j| {
                j != i
                    && is_subset(&parts[i], std::slice::from_ref(&parts[j]))
                    && (j < i || !is_subset(&parts[j], std::slice::from_ref(&parts[i])))
            });
            if !covered {
                kept.push(parts[i].clone());
            }
        }
        RegionUnion { coords: self.coords.clone(), parts: kept }
    }

    /// Replaces pairs of parts by their common envelope whenever that
    /// envelope is already covered by the pair, so a union that happens to
    /// be convex prints as one polyhedron. The point set is unchanged.
    pub fn merge_convex(&self) -> Self {
        let mut parts = self.simplify().parts;
        'outer: loop {
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    let env = envelope(&parts[i], &parts[j]);
                    if is_subset(&env, &[parts[i].clone(), parts[j].clone()]) {
                        parts[i] = env.prune_redundant();
                        parts.remove(j);
                        continue 'outer;
                    }
                }
            }
            break;
        }
        RegionUnion { coords: self.coords.clone(), parts }
    }

    pub fn canonical_key(&self) -> String {
        if self.parts.is_empty() {
            return "EMPTY".into();
        }
        let mut keys: Vec<String> = self.parts.iter().map(|p| format!("({})", p.canonical_key())).collect();
        keys.sort();
        keys.dedup();
        keys.join(" | ")
    }

    pub fn contains(&self, point: &dyn Fn(&Coord) -> crate::scalar::Rational) -> Result<bool> {
        for p in &self.parts {
            if p.contains(point)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    pub fn map_parts(&self, f: impl Fn(&LinIneqSystem<B>) -> Result<LinIneqSystem<B>>) -> Result<Self> {
        let parts = self.parts.iter().map(f).collect::<Result<Vec<_>>>()?;
        let mut coords = BTreeSet::new();
        for p in &parts {
            coords.extend(p.coords().iter().cloned());
        }
        Ok(Self::from_parts(coords, parts))
    }

    pub fn with_coords(self, coords: impl IntoIterator<Item = Coord>) -> Self {
        let mut all = self.coords;
        all.extend(coords);
        Self::from_parts(all, self.parts)
    }

    pub fn to_text(&self) -> String {
        if self.parts.is_empty() {
            return "EMPTY\n".into();
        }
        self.parts.iter().map(|p| p.to_text()).collect::<Vec<_>>().join("OR\n")
    }
}

/// Rows of either system that hold on all of the other.
fn envelope<B: Bound>(p: &LinIneqSystem<B>, q: &LinIneqSystem<B>) -> LinIneqSystem<B> {
    let valid_on = |row: &LinIneq<B>, other: &LinIneqSystem<B>| {
        row.as_inequalities().iter().all(|r| r.negation().into_iter().all(|n| other.with_row(n).is_empty()))
    };
    let mut env = LinIneqSystem::full(p.coords().iter().chain(q.coords()).cloned());
    for row in p.rows().iter().filter(|r| valid_on(r, q)).chain(q.rows().iter().filter(|r| valid_on(r, p))) {
        env.push_unchecked(row.clone());
    }
    env
}

/// `a ⊆ b_1 ∪ ... ∪ b_k`, decided exactly by splitting `a` along the facets
/// of `b_1` and recursing on the pieces outside it.
pub fn is_subset<B: Bound>(a: &LinIneqSystem<B>, parts: &[LinIneqSystem<B>]) -> bool {
    if a.is_empty() {
        return true;
    }
    let relevant: Vec<&LinIneqSystem<B>> = parts.iter().filter(|p| !a.intersect(p).is_empty()).collect();
    subset_rec(a, &relevant)
}

fn subset_rec<B: Bound>(a: &LinIneqSystem<B>, parts: &[&LinIneqSystem<B>]) -> bool {
    if a.is_empty() {
        return true;
    }
    let Some((first, rest)) = parts.split_first() else {
        return false;
    };
    let mut acc = a.clone();
    for row in first.rows().iter().flat_map(LinIneq::as_inequalities) {
        if row.constant_truth() == Some(true) || acc.rows().contains(&row) {
            continue;
        }
        for neg in row.negation() {
            let piece = acc.with_row(neg);
            if piece.is_empty() {
                continue;
            }
            let next: Vec<&LinIneqSystem<B>> =
                rest.iter().copied().filter(|p| !piece.intersect(p).is_empty()).collect();
            if !subset_rec(&piece, &next) {
                return false;
            }
        }
        acc = acc.with_row(row);
    }
    true
}
