//! Core determining collections: the unions of U* sets whose containment
//! inequalities suffice for the whole Artstein family.
//!
//! Candidates are unions of distinct non-full U* sets. A candidate is kept
//! when the U* sets it contains form one block under positive-measure
//! overlap; unions of non-overlapping blocks give inequalities implied by
//! the blocks' own. Candidates with the same contained outcomes are merged,
//! labelled by the smallest generating collection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use rayon::prelude::*;

use super::{element_order, UStarSet};
use crate::error::{Error, Result};
use crate::models::{ModelSpec, OutcomeSeq};
use crate::polyhedra::{LinIneqSystem, RegionUnion};
use crate::scalar::Bound;

pub const DEFAULT_CDC_CAP: usize = 12;

/// Row order of the collection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CdcOrder {
    /// By size of the generating collection, then its elements.
    #[default]
    Support,
    /// By size of the contained-outcome set, then its outcomes.
    Containment,
}

#[derive(Clone, Debug)]
pub struct CdcOptions {
    /// Largest number of distinct non-full U* sets accepted.
    pub cap: usize,
    pub order: CdcOrder,
    pub prune_disconnected: bool,
    pub prune_intersection_pairs: bool,
    pub prune_dominated: bool,
}

impl Default for CdcOptions {
    fn default() -> Self {
        CdcOptions {
            cap: DEFAULT_CDC_CAP,
            order: CdcOrder::Support,
            prune_disconnected: true,
            prune_intersection_pairs: true,
            prune_dominated: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CdcItem<B> {
    pub id: usize,
    /// Outcome indices whose U* sets generate the union.
    pub t_set: Vec<usize>,
    /// Outcome indices whose U* sets lie inside the union.
    pub y_set: Vec<usize>,
    pub s_region: RegionUnion<B>,
}

#[derive(Clone, Debug)]
pub struct Cdc<B> {
    pub items: Vec<CdcItem<B>>,
    pub outcomes: Vec<OutcomeSeq>,
    /// Outcome indices sharing one non-full U* set, representative first.
    pub distinct: Vec<Vec<usize>>,
    pub full_outcomes: Vec<usize>,
    /// Nonempty proper sub-collections of the distinct non-full sets.
    pub candidate_unions: u64,
    pub pruned_disconnected: usize,
    pub pruned_intersection_pairs: usize,
    pub pruned_dominated: usize,
}

impl<B> Cdc<B> {
    /// Pairs of outcomes with identical non-full U* sets.
    pub fn identical_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for group in &self.distinct {
            for (i, a) in group.iter().enumerate() {
                for b in &group[i + 1..] {
                    out.push((*a.min(b), *a.max(b)));
                }
            }
        }
        out.sort();
        out
    }

    pub fn outcome_labels(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|i| self.outcomes[*i].label()).collect()
    }
}

fn connected(members: &[usize], overlap: &[Vec<bool>]) -> bool {
    let Some(&start) = members.first() else { return true };
    let mut seen = BTreeSet::from([start]);
    let mut stack = vec![start];
    while let Some(a) = stack.pop() {
        for &b in members {
            if !seen.contains(&b) && overlap[a][b] {
                seen.insert(b);
                stack.push(b);
            }
        }
    }
    seen.len() == members.len()
}

struct Candidate<B> {
    members: Vec<usize>,
    region: RegionUnion<B>,
    contained: Vec<usize>,
}

/// Builds the core determining collection of the given U* sets, which must
/// all come from one model and cell.
pub fn core_determining_collection<B: Bound>(
    model: &ModelSpec,
    sets: &[UStarSet<B>],
    opts: &CdcOptions,
) -> Result<Cdc<B>> {
    let space = model.diff_space();
    let ambient: LinIneqSystem<B> = space.ambient();

    // Distinct non-full sets, in element order.
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by(|a, b| element_order(model, &sets[*a], &sets[*b]));
    let mut full_outcomes = Vec::new();
    let mut distinct: Vec<Vec<usize>> = Vec::new();
    let mut keys: BTreeMap<String, usize> = BTreeMap::new();
    for &i in &order {
        if sets[i].full {
            full_outcomes.push(i);
            continue;
        }
        let key = sets[i].region.canonical_key();
        let found = keys
            .get(&key)
            .copied()
            .or_else(|| distinct.iter().position(|g| sets[g[0]].region.same_set(&sets[i].region)));
        match found {
            Some(d) => distinct[d].push(i),
            None => {
                keys.insert(key, distinct.len());
                distinct.push(vec![i]);
            }
        }
    }
    full_outcomes.sort();
    let k = distinct.len();
    if k > opts.cap {
        return Err(Error::Capacity(format!("{k} distinct non-full U* sets exceed the cap of {}", opts.cap)));
    }
    let region = |d: usize| &sets[distinct[d][0]].region;
    let overlap: Vec<Vec<bool>> =
        (0..k).map(|a| (0..k).map(|b| region(a).overlaps_interior(region(b))).collect()).collect();

    // Generating collections in (size, lexicographic) order so the first
    // hit for a contained-outcome set is its canonical label.
    let masks: Vec<Vec<usize>> = (1..=k).flat_map(|n| (0..k).combinations(n)).collect();
    let evaluated: Vec<Option<Candidate<B>>> = masks
        .par_iter()
        .map(|members| {
            let mut s = region(members[0]).clone();
            for &m in &members[1..] {
                s = s.union(region(m));
            }
            if s.covers(&ambient) {
                return None;
            }
            let contained: Vec<usize> = (0..k).filter(|d| members.contains(d) || region(*d).is_subset_of(&s)).collect();
            Some(Candidate { members: members.clone(), region: s.simplify(), contained })
        })
        .collect();

    let mut pruned_disconnected = 0;
    let mut seen: BTreeSet<Vec<usize>> = BTreeSet::new();
    let mut kept: Vec<Candidate<B>> = Vec::new();
    for cand in evaluated.into_iter().flatten() {
        if !seen.insert(cand.contained.clone()) {
            continue;
        }
        let nonempty: Vec<usize> = cand.contained.iter().copied().filter(|d| !region(*d).is_empty()).collect();
        if opts.prune_disconnected && !connected(&nonempty, &overlap) {
            pruned_disconnected += 1;
            continue;
        }
        kept.push(cand);
    }

    let expand = |ds: &[usize]| -> Vec<usize> {
        let mut v: Vec<usize> = ds.iter().flat_map(|d| distinct[*d].iter().copied()).collect();
        v.sort();
        v
    };
    let all_outcomes: BTreeSet<usize> = (0..sets.len()).collect();

    // Intersection pairs: drop S when S = S1 ∩ S2 with S1 ∪ S2 the whole
    // space and A(S1) ∪ A(S2) every outcome, A(S1) ∩ A(S2) = A(S).
    let mut pruned_intersection_pairs = 0;
    if opts.prune_intersection_pairs {
        let ys: Vec<BTreeSet<usize>> = kept.iter().map(|c| expand(&c.contained).into_iter().collect()).collect();
        let mut drop = BTreeSet::new();
        for i in 0..kept.len() {
            for j in i + 1..kept.len() {
                let union: BTreeSet<usize> = ys[i].union(&ys[j]).copied().collect();
                if union != all_outcomes {
                    continue;
                }
                if !kept[i].region.union(&kept[j].region).covers(&ambient) {
                    continue;
                }
                let inter: BTreeSet<usize> = ys[i].intersection(&ys[j]).copied().collect();
                let meet = kept[i].region.intersect(&kept[j].region);
                for (m, y) in ys.iter().enumerate() {
                    if *y == inter && m != i && m != j && meet.same_set(&kept[m].region) {
                        drop.insert(m);
                    }
                }
            }
        }
        pruned_intersection_pairs = drop.len();
        kept = kept.into_iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, c)| c).collect();
    }

    // Dominance: the same union with a weakly larger contained set.
    let mut pruned_dominated = 0;
    if opts.prune_dominated {
        let mut drop = BTreeSet::new();
        for i in 0..kept.len() {
            for j in 0..kept.len() {
                if i == j || drop.contains(&j) {
                    continue;
                }
                let yi: BTreeSet<usize> = kept[i].contained.iter().copied().collect();
                let yj: BTreeSet<usize> = kept[j].contained.iter().copied().collect();
                if yi.is_subset(&yj) && kept[j].region.is_subset_of(&kept[i].region) {
                    drop.insert(i);
                    break;
                }
            }
        }
        pruned_dominated = drop.len();
        kept = kept.into_iter().enumerate().filter(|(i, _)| !drop.contains(i)).map(|(_, c)| c).collect();
    }

    let mut items: Vec<CdcItem<B>> = kept
        .into_iter()
        .map(|c| CdcItem {
            id: 0,
            t_set: c.members.iter().map(|d| distinct[*d][0]).collect(),
            y_set: expand(&c.contained),
            s_region: c.region,
        })
        .collect();
    // Candidates were generated in Support order already.
    if opts.order == CdcOrder::Containment {
        items.sort_by(|a, b| {
            a.y_set.len().cmp(&b.y_set.len()).then_with(|| cmp_outcome_lists(sets, &a.y_set, &b.y_set))
        });
    }
    for (n, it) in items.iter_mut().enumerate() {
        it.id = n + 1;
    }

    let candidate_unions = if k == 0 { 0 } else { (1u64 << k) - 2 };
    Ok(Cdc {
        items,
        outcomes: sets.iter().map(|s| s.outcome.clone()).collect(),
        distinct,
        full_outcomes,
        candidate_unions,
        pruned_disconnected,
        pruned_intersection_pairs,
        pruned_dominated,
    })
}

/// Lexicographic comparison of outcome-index lists by their outcomes.
fn cmp_outcome_lists<B: Bound>(sets: &[UStarSet<B>], a: &[usize], b: &[usize]) -> Ordering {
    let ya: Vec<&Vec<i64>> = a.iter().map(|i| &sets[*i].outcome.y).collect();
    let yb: Vec<&Vec<i64>> = b.iter().map(|i| &sets[*i].outcome.y).collect();
    ya.cmp(&yb)
}
