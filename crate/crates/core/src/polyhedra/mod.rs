//! Exact linear-inequality systems, Fourier–Motzkin elimination and finite
//! unions of polyhedra.

mod fm;
mod region;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::scalar::{Bound, Rational};

pub use region::{is_subset, RegionUnion};

/// A coordinate of the ambient space.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Coord {
    /// Fixed effect; index 0 prints as `c`, index `d >= 1` as `v{d}`.
    Fe(u8),
    /// Continuous initial condition.
    Init,
    /// Level `u_t` of latent component `comp` (0 for scalar models).
    Level {
        comp: u8,
        t: u8,
    },
    /// Difference `u_t - u_s` of component `comp`, with `t > s`.
    Diff {
        comp: u8,
        t: u8,
        s: u8,
    },
    Named(String),
}

impl fmt::Display for Coord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coord::Fe(0) => write!(f, "c"),
            Coord::Fe(d) => write!(f, "v{d}"),
            Coord::Init => write!(f, "y0"),
            Coord::Level { comp: 0, t } => write!(f, "u{t}"),
            Coord::Level { comp, t } => write!(f, "u{comp}.{t}"),
            Coord::Diff { comp: 0, t, s } => write!(f, "Δ{t}{s}u"),
            Coord::Diff { comp, t, s } => write!(f, "Δ{t}{s}u{comp}"),
            Coord::Named(n) => write!(f, "{n}"),
        }
    }
}

impl Coord {
    pub fn parse(s: &str) -> Coord {
        let digit = |c: char| c.to_digit(10).map(|d| d as u8);
        if s == "c" {
            return Coord::Fe(0);
        }
        if s == "y0" {
            return Coord::Init;
        }
        if let Some(d) = s.strip_prefix('v').and_then(|r| r.parse::<u8>().ok()) {
            return Coord::Fe(d);
        }
        if let Some(rest) = s.strip_prefix('Δ') {
            let cs: Vec<char> = rest.chars().collect();
            if cs.len() >= 3 && cs[2] == 'u' {
                if let (Some(t), Some(sv)) = (digit(cs[0]), digit(cs[1])) {
                    let tail: String = cs[3..].iter().collect();
                    if tail.is_empty() {
                        return Coord::Diff { comp: 0, t, s: sv };
                    }
                    if let Ok(comp) = tail.parse() {
                        return Coord::Diff { comp, t, s: sv };
                    }
                }
            }
        }
        if let Some(rest) = s.strip_prefix('u') {
            if let Some((c, t)) = rest.split_once('.') {
                if let (Ok(comp), Ok(t)) = (c.parse(), t.parse()) {
                    return Coord::Level { comp, t };
                }
            } else if let Ok(t) = rest.parse() {
                return Coord::Level { comp: 0, t };
            }
        }
        Coord::Named(s.to_string())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Relation {
    Le,
    Lt,
    Eq,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Lt => "<",
            Relation::Eq => "=",
        }
    }
}

/// `Σ coeffs[x] * x  REL  rhs`, kept normalised: zero coefficients are
/// dropped and the first coefficient has absolute value one (and is positive
/// for equalities).
#[derive(Clone, Debug, PartialEq)]
pub struct LinIneq<B> {
    coeffs: BTreeMap<Coord, Rational>,
    rel: Relation,
    rhs: B,
}

impl<B: Bound> LinIneq<B> {
    pub fn new(coeffs: impl IntoIterator<Item = (Coord, Rational)>, rel: Relation, rhs: B) -> Self {
        let mut map: BTreeMap<Coord, Rational> = BTreeMap::new();
        for (c, v) in coeffs {
            *map.entry(c).or_insert_with(Rational::zero) += v;
        }
        map.retain(|_, v| !v.is_zero());
        let mut row = LinIneq { coeffs: map, rel, rhs };
        row.normalize();
        row
    }

    pub fn le(coeffs: impl IntoIterator<Item = (Coord, Rational)>, rhs: B) -> Self {
        Self::new(coeffs, Relation::Le, rhs)
    }

    pub fn lt(coeffs: impl IntoIterator<Item = (Coord, Rational)>, rhs: B) -> Self {
        Self::new(coeffs, Relation::Lt, rhs)
    }

    pub fn eq(coeffs: impl IntoIterator<Item = (Coord, Rational)>, rhs: B) -> Self {
        Self::new(coeffs, Relation::Eq, rhs)
    }

    /// `Σ a x >= b`, stored as `Σ -a x <= -b`.
    pub fn ge(coeffs: impl IntoIterator<Item = (Coord, Rational)>, rhs: B) -> Self {
        Self::new(coeffs.into_iter().map(|(c, v)| (c, -v)), Relation::Le, -rhs)
    }

    fn normalize(&mut self) {
        let Some(first) = self.coeffs.values().next().cloned() else {
            return;
        };
        let k = if self.rel == Relation::Eq { first } else { first.abs() };
        if k.is_one() {
            return;
        }
        let inv = k.recip();
        for v in self.coeffs.values_mut() {
            *v *= &inv;
        }
        self.rhs = self.rhs.scale(&inv);
    }

    pub fn coeffs(&self) -> &BTreeMap<Coord, Rational> {
        &self.coeffs
    }

    pub fn coeff(&self, c: &Coord) -> Rational {
        self.coeffs.get(c).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn rel(&self) -> Relation {
        self.rel
    }

    pub fn rhs(&self) -> &B {
        &self.rhs
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Truth value of a row without coordinates.
    pub fn constant_truth(&self) -> Option<bool> {
        if !self.is_constant() {
            return None;
        }
        let s = self.rhs.sign();
        Some(match self.rel {
            Relation::Le => s.is_ge(),
            Relation::Lt => s.is_gt(),
            Relation::Eq => s.is_eq(),
        })
    }

    pub fn is_strict(&self) -> bool {
        self.rel == Relation::Lt
    }

    /// The row with `<=` replaced by `<`; equalities are unchanged.
    pub fn strict(&self) -> Self {
        let mut r = self.clone();
        if r.rel == Relation::Le {
            r.rel = Relation::Lt;
        }
        r
    }

    /// Rows whose union is the complement of this row.
    pub fn negation(&self) -> Vec<Self> {
        let flipped = || self.coeffs.iter().map(|(c, v)| (c.clone(), -v.clone()));
        match self.rel {
            Relation::Le => vec![Self::new(flipped(), Relation::Lt, -self.rhs.clone())],
            Relation::Lt => vec![Self::new(flipped(), Relation::Le, -self.rhs.clone())],
            Relation::Eq => vec![
                Self::new(self.coeffs.clone(), Relation::Lt, self.rhs.clone()),
                Self::new(flipped(), Relation::Lt, -self.rhs.clone()),
            ],
        }
    }

    /// Splits an equality into two weak inequalities.
    pub fn as_inequalities(&self) -> Vec<Self> {
        match self.rel {
            Relation::Eq => vec![
                Self::new(self.coeffs.clone(), Relation::Le, self.rhs.clone()),
                Self::new(self.coeffs.iter().map(|(c, v)| (c.clone(), -v.clone())), Relation::Le, -self.rhs.clone()),
            ],
            _ => vec![self.clone()],
        }
    }

    /// `a * self + b * other`, with the relation of an inequality
    /// combination (`a, b > 0` unless one side is an equality).
    pub(crate) fn combine(&self, a: &Rational, other: &Self, b: &Rational) -> Self {
        let mut coeffs: BTreeMap<Coord, Rational> = BTreeMap::new();
        for (c, v) in &self.coeffs {
            *coeffs.entry(c.clone()).or_insert_with(Rational::zero) += v * a;
        }
        for (c, v) in &other.coeffs {
            *coeffs.entry(c.clone()).or_insert_with(Rational::zero) += v * b;
        }
        let rel = match (self.rel, other.rel) {
            (Relation::Eq, r) | (r, Relation::Eq) => r,
            (Relation::Lt, _) | (_, Relation::Lt) => Relation::Lt,
            _ => Relation::Le,
        };
        let rhs = self.rhs.scale(a) + other.rhs.scale(b);
        Self::new(coeffs, rel, rhs)
    }

    pub fn map_rhs<C: Bound>(&self, f: impl Fn(&B) -> C) -> LinIneq<C> {
        LinIneq { coeffs: self.coeffs.clone(), rel: self.rel, rhs: f(&self.rhs) }
    }

    /// Rewrites coordinates through a linear substitution.
    pub fn substitute(&self, f: impl Fn(&Coord) -> Result<Vec<(Coord, Rational)>>) -> Result<Self> {
        let mut terms = Vec::new();
        for (c, v) in &self.coeffs {
            for (c2, w) in f(c)? {
                terms.push((c2, v * w));
            }
        }
        Ok(Self::new(terms, self.rel, self.rhs.clone()))
    }

    /// Exact membership for numeric rows.
    pub fn holds_at(&self, point: &dyn Fn(&Coord) -> Rational) -> Result<bool> {
        let rhs = self.rhs.as_rational().ok_or_else(|| Error::Unsupported("membership test on symbolic row".into()))?;
        let lhs: Rational = self.coeffs.iter().map(|(c, v)| v * point(c)).sum();
        Ok(match self.rel {
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
            Relation::Eq => lhs == rhs,
        })
    }

    pub fn to_text(&self) -> String {
        text::row_to_text(self)
    }
}

impl<B: Bound> fmt::Display for LinIneq<B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// A conjunction of rows over a fixed coordinate set. No rows means the
/// whole space.
#[derive(Clone, Debug, PartialEq)]
pub struct LinIneqSystem<B> {
    coords: BTreeSet<Coord>,
    rows: Vec<LinIneq<B>>,
}

impl<B: Bound> LinIneqSystem<B> {
    pub fn full(coords: impl IntoIterator<Item = Coord>) -> Self {
        LinIneqSystem { coords: coords.into_iter().collect(), rows: Vec::new() }
    }

    /// Builds a system, rejecting rows that mention undeclared coordinates.
    pub fn new(coords: impl IntoIterator<Item = Coord>, rows: impl IntoIterator<Item = LinIneq<B>>) -> Result<Self> {
        let mut sys = Self::full(coords);
        for r in rows {
            sys.push(r)?;
        }
        Ok(sys)
    }

    pub fn push(&mut self, row: LinIneq<B>) -> Result<()> {
        if let Some(c) = row.coeffs.keys().find(|c| !self.coords.contains(*c)) {
            return Err(Error::Validation(format!("row uses undeclared coordinate {c}")));
        }
        if !self.rows.contains(&row) {
            self.rows.push(row);
        }
        Ok(())
    }

    pub(crate) fn push_unchecked(&mut self, row: LinIneq<B>) {
        if !self.rows.contains(&row) {
            self.rows.push(row);
        }
    }

    pub fn with_row(&self, row: LinIneq<B>) -> Self {
        let mut s = self.clone();
        for c in row.coeffs.keys() {
            s.coords.insert(c.clone());
        }
        s.push_unchecked(row);
        s
    }

    pub fn coords(&self) -> &BTreeSet<Coord> {
        &self.coords
    }

    pub fn rows(&self) -> &[LinIneq<B>] {
        &self.rows
    }

    pub fn intersect(&self, other: &Self) -> Self {
        let mut s = self.clone();
        s.coords.extend(other.coords.iter().cloned());
        for r in &other.rows {
            s.push_unchecked(r.clone());
        }
        s
    }

    /// True when no row restricts the space.
    pub fn is_full(&self) -> bool {
        self.rows.iter().all(|r| r.constant_truth() == Some(true))
    }

    /// Relative interior: every weak inequality made strict.
    pub fn strict_interior(&self) -> Self {
        LinIneqSystem { coords: self.coords.clone(), rows: self.rows.iter().map(|r| r.strict()).collect() }
    }

    pub fn eliminate(&self, coord: &Coord) -> Self {
        fm::eliminate(self, coord)
    }

    pub fn eliminate_all<'a>(&self, coords: impl IntoIterator<Item = &'a Coord>) -> Self {
        let mut s = self.clone();
        for c in coords {
            s = fm::eliminate(&s, c);
        }
        s
    }

    pub fn is_empty(&self) -> bool {
        fm::is_empty(self)
    }

    /// Removes rows implied by the remaining ones and drops true constant
    /// rows. The point set is unchanged.
    pub fn prune_redundant(&self) -> Self {
        if self.is_empty() {
            return self.empty_canonical();
        }
        let mut rows: Vec<LinIneq<B>> =
            fm::tighten_parallel(self.rows.iter().filter(|r| r.constant_truth() != Some(true)).cloned().collect());
        let mut i = 0;
        while i < rows.len() {
            if rows[i].rel == Relation::Eq {
                i += 1;
                continue;
            }
            let others = LinIneqSystem {
                coords: self.coords.clone(),
                rows: rows.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, r)| r.clone()).collect(),
            };
            let implied = rows[i].negation().into_iter().all(|neg| others.with_row(neg).is_empty());
            if implied {
                rows.remove(i);
            } else {
                i += 1;
            }
        }
        LinIneqSystem { coords: self.coords.clone(), rows }
    }

    fn empty_canonical(&self) -> Self {
        LinIneqSystem {
            coords: self.coords.clone(),
            rows: vec![LinIneq::new(Vec::new(), Relation::Le, B::from_rational(&-Rational::one()))],
        }
    }

    /// Sorted row texts; equal keys mean syntactically equal systems.
    pub fn canonical_key(&self) -> String {
        let mut keys: Vec<String> =
            self.rows.iter().filter(|r| r.constant_truth() != Some(true)).map(|r| r.to_text()).collect();
        keys.sort();
        keys.dedup();
        if keys.is_empty() {
            "TRUE".into()
        } else {
            keys.join(" & ")
        }
    }

    pub fn contains(&self, point: &dyn Fn(&Coord) -> Rational) -> Result<bool> {
        for r in &self.rows {
            if !r.holds_at(point)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn map_rows(&self, f: impl Fn(&LinIneq<B>) -> Result<LinIneq<B>>) -> Result<Self> {
        let mut s = LinIneqSystem { coords: BTreeSet::new(), rows: Vec::new() };
        for r in &self.rows {
            let r2 = f(r)?;
            s.coords.extend(r2.coeffs.keys().cloned());
            s.push_unchecked(r2);
        }
        Ok(s)
    }

    pub fn with_coords(mut self, coords: impl IntoIterator<Item = Coord>) -> Self {
        self.coords.extend(coords);
        self
    }

    pub fn without_coords(mut self, coords: &[Coord]) -> Self {
        for c in coords {
            self.coords.remove(c);
        }
        self
    }

    pub fn to_text(&self) -> String {
        text::system_to_text(self)
    }
}

impl LinIneqSystem<Rational> {
    /// Parses the format written by [`LinIneqSystem::to_text`].
    pub fn parse(s: &str) -> Result<Self> {
        text::parse_system(s)
    }
}
