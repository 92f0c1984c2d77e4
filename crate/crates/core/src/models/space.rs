use std::collections::BTreeMap;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::polyhedra::{Coord, LinIneq, LinIneqSystem};
use crate::scalar::{Bound, Rational};

/// Differenced latent space: coordinates `Δ_ts u_d = u_dt - u_ds` for every
/// component `d` and every `t > s`, tied together by
/// `Δ_ts = Δ_t1 - Δ_s1`. The basis is `Δ_t1 u_d`, `t = 2..T`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffSpace {
    comps: Vec<u8>,
    periods: usize,
}

impl DiffSpace {
    pub fn new(comps: Vec<u8>, periods: usize) -> Self {
        DiffSpace { comps, periods }
    }

    pub fn comps(&self) -> &[u8] {
        &self.comps
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn coords(&self) -> Vec<Coord> {
        let mut v = Vec::new();
        for &comp in &self.comps {
            for t in 2..=self.periods as u8 {
                for s in 1..t {
                    v.push(Coord::Diff { comp, t, s });
                }
            }
        }
        v
    }

    pub fn basis_dim(&self) -> usize {
        self.comps.len() * (self.periods - 1)
    }

    /// Index of `Δ_t1 u_comp` in the basis.
    fn basis_index(&self, comp: u8, t: u8) -> Option<usize> {
        let ci = self.comps.iter().position(|c| *c == comp)?;
        (t >= 2).then(|| ci * (self.periods - 1) + (t as usize - 2))
    }

    pub fn ties<B: Bound>(&self) -> Vec<LinIneq<B>> {
        let one = Rational::one;
        let mut rows = Vec::new();
        for &comp in &self.comps {
            for t in 3..=self.periods as u8 {
                for s in 2..t {
                    rows.push(LinIneq::eq(
                        [
                            (Coord::Diff { comp, t, s }, one()),
                            (Coord::Diff { comp, t, s: 1 }, -one()),
                            (Coord::Diff { comp, t: s, s: 1 }, one()),
                        ],
                        B::zero(),
                    ));
                }
            }
        }
        rows
    }

    /// The whole differenced space, cut down to its identities.
    pub fn ambient<B: Bound>(&self) -> LinIneqSystem<B> {
        LinIneqSystem::new(self.coords(), self.ties()).expect("ties use declared coordinates")
    }

    pub fn is_tie<B: Bound>(&self, row: &LinIneq<B>) -> bool {
        self.ties::<B>().contains(row)
    }

    /// Rewrites a row in levels `u_dt` as a row in differences. Rows must be
    /// invariant to shifting each component by a constant.
    pub fn level_row_to_diff<B: Bound>(&self, row: &LinIneq<B>) -> Result<LinIneq<B>> {
        let mut per_comp: BTreeMap<u8, Vec<(u8, Rational)>> = BTreeMap::new();
        for (c, v) in row.coeffs() {
            match c {
                Coord::Level { comp, t } => per_comp.entry(*comp).or_default().push((*t, v.clone())),
                other => return Err(Error::Validation(format!("coordinate {other} is not a latent level"))),
            }
        }
        let mut terms = Vec::new();
        for (comp, ts) in per_comp {
            let total: Rational = ts.iter().map(|(_, v)| v.clone()).sum();
            if !total.is_zero() {
                return Err(Error::Validation(format!(
                    "row {} does not depend on differences of component {comp} alone",
                    row.to_text()
                )));
            }
            match ts.as_slice() {
                [(s, _), (t, kt)] => terms.push((Coord::Diff { comp, t: *t, s: *s }, kt.clone())),
                _ => {
                    for (t, k) in ts {
                        if t >= 2 {
                            terms.push((Coord::Diff { comp, t, s: 1 }, k));
                        }
                    }
                }
            }
        }
        Ok(LinIneq::new(terms, row.rel(), row.rhs().clone()))
    }

    /// Basis vector of a level vector laid out component-major.
    pub fn basis_from_levels(&self, levels: &[f64]) -> Vec<f64> {
        let tn = self.periods;
        let mut out = Vec::with_capacity(self.basis_dim());
        for ci in 0..self.comps.len() {
            let row = &levels[ci * tn..(ci + 1) * tn];
            for t in 1..tn {
                out.push(row[t] - row[0]);
            }
        }
        out
    }

    /// `Δ_ts u_d` as a combination of basis entries.
    pub fn expand(&self, coord: &Coord) -> Result<Vec<(usize, f64)>> {
        match coord {
            Coord::Diff { comp, t, s } => {
                let mut v = Vec::new();
                if let Some(i) = self.basis_index(*comp, *t) {
                    v.push((i, 1.0));
                }
                if let Some(i) = self.basis_index(*comp, *s) {
                    v.push((i, -1.0));
                }
                if v.is_empty() {
                    return Err(Error::Validation(format!("{coord} is outside the differenced space")));
                }
                Ok(v)
            }
            other => Err(Error::Validation(format!("{other} is not a differenced coordinate"))),
        }
    }

    /// Exact value of a differenced coordinate at a rational basis point.
    pub fn value_at(&self, basis: &[Rational], coord: &Coord) -> Rational {
        match coord {
            Coord::Diff { comp, t, s } => {
                let get = |tt: u8| self.basis_index(*comp, tt).map(|i| basis[i].clone()).unwrap_or_else(Rational::zero);
                get(*t) - get(*s)
            }
            _ => Rational::zero(),
        }
    }
}
