//! Affine expressions in model parameters, used to print U* sets with
//! symbolic bounds.
//!
//! Every expression carries a witness value: the number it takes at one
//! concrete parameter point. Sign decisions inside the polyhedral code use
//! the witness, so a symbolic computation is valid for every parameter
//! point sharing the witness's sign pattern.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::scalar::{Bound, Rational};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    /// `z_t β_comp`; component 0 is the single-index case.
    ZBeta {
        comp: u8,
        t: u8,
    },
    /// Ordered-response threshold `c_j`.
    Cut(u8),
    /// Coefficient on the other equation's outcome.
    Alpha(u8),
    /// `y0 γ` with an observed initial condition.
    Y0Gamma,
    Gamma,
    /// `max(γ, 0)`, only produced when merging sign regimes.
    GammaPos,
    /// `min(γ, 0)`, only produced when merging sign regimes.
    GammaNeg,
}

impl Symbol {
    fn name(&self) -> String {
        match self {
            Symbol::ZBeta { comp, t } => format!("z{t}{}", beta_name(*comp)),
            Symbol::Cut(j) => format!("c{j}"),
            Symbol::Alpha(j) => format!("α{j}"),
            Symbol::Y0Gamma => "y₀γ".into(),
            Symbol::Gamma => "γ".into(),
            Symbol::GammaPos => "max(γ,0)".into(),
            Symbol::GammaNeg => "min(γ,0)".into(),
        }
    }
}

fn beta_name(comp: u8) -> String {
    if comp == 0 {
        "β".into()
    } else {
        format!("β{comp}")
    }
}

#[derive(Clone, Debug)]
pub struct SymExpr {
    terms: BTreeMap<Symbol, Rational>,
    constant: Rational,
    witness: Rational,
}

impl PartialEq for SymExpr {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.constant == other.constant
    }
}

impl SymExpr {
    pub fn symbol(sym: Symbol, witness: Rational) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(sym, Rational::one());
        SymExpr { terms, constant: Rational::zero(), witness }
    }

    pub fn constant(c: Rational) -> Self {
        SymExpr { terms: BTreeMap::new(), witness: c.clone(), constant: c }
    }

    pub fn witness(&self) -> &Rational {
        &self.witness
    }

    pub fn coeff(&self, sym: &Symbol) -> Rational {
        self.terms.get(sym).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_part(&self) -> &Rational {
        &self.constant
    }

    pub(crate) fn plus_term(mut self, sym: Symbol, k: Rational) -> SymExpr {
        if k.is_zero() {
            return self;
        }
        let e = self.terms.entry(sym).or_insert_with(Rational::zero);
        *e += k;
        if e.is_zero() {
            self.terms.retain(|_, v| !v.is_zero());
        }
        self
    }

    fn zip(self, other: SymExpr, sign: i64) -> SymExpr {
        let k = Rational::from_integer(sign.into());
        let mut terms = self.terms;
        for (s, v) in other.terms {
            let e = terms.entry(s).or_insert_with(Rational::zero);
            *e += &v * &k;
        }
        terms.retain(|_, v| !v.is_zero());
        SymExpr { terms, constant: self.constant + other.constant * &k, witness: self.witness + other.witness * &k }
    }
}

impl Add for SymExpr {
    type Output = SymExpr;
    fn add(self, rhs: SymExpr) -> SymExpr {
        self.zip(rhs, 1)
    }
}

impl Sub for SymExpr {
    type Output = SymExpr;
    fn sub(self, rhs: SymExpr) -> SymExpr {
        self.zip(rhs, -1)
    }
}

impl Neg for SymExpr {
    type Output = SymExpr;
    fn neg(self) -> SymExpr {
        self.scale(&-Rational::one())
    }
}

impl Zero for SymExpr {
    fn zero() -> Self {
        SymExpr::constant(Rational::zero())
    }
    fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }
}

impl Bound for SymExpr {
    fn from_rational(r: &Rational) -> Self {
        SymExpr::constant(r.clone())
    }
    fn scale(&self, k: &Rational) -> Self {
        let mut terms: BTreeMap<_, _> = self.terms.iter().map(|(s, v)| (s.clone(), v * k)).collect();
        terms.retain(|_, v: &mut Rational| !v.is_zero());
        SymExpr { terms, constant: &self.constant * k, witness: &self.witness * k }
    }
    fn sign(&self) -> Ordering {
        self.witness.cmp(&Rational::zero())
    }
    fn as_rational(&self) -> Option<Rational> {
        self.terms.is_empty().then(|| self.constant.clone())
    }
    fn to_f64(&self) -> f64 {
        crate::scalar::rational_to_f64(&self.witness)
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

struct Term {
    coeff: Rational,
    name: String,
}

impl fmt::Display for SymExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out: Vec<Term> = Vec::new();

        let mut by_comp: BTreeMap<u8, Vec<(u8, Rational)>> = BTreeMap::new();
        for (s, v) in &self.terms {
            if let Symbol::ZBeta { comp, t } = s {
                by_comp.entry(*comp).or_default().push((*t, v.clone()));
            }
        }
        for (comp, ts) in by_comp {
            // k z_t β - k z_s β prints as k Δ_ts zβ.
            if let [(s, ks), (t, kt)] = ts.as_slice() {
                if (ks + kt).is_zero() {
                    out.push(Term { coeff: kt.clone(), name: format!("Δ{t}{s}z{}", beta_name(comp)) });
                    continue;
                }
            }
            for (t, k) in ts {
                out.push(Term { coeff: k, name: Symbol::ZBeta { comp, t }.name() });
            }
        }
        for (s, v) in &self.terms {
            if !matches!(s, Symbol::ZBeta { .. }) {
                out.push(Term { coeff: v.clone(), name: s.name() });
            }
        }
        if !self.constant.is_zero() || out.is_empty() {
            out.push(Term { coeff: self.constant.clone(), name: String::new() });
        }

        for (i, term) in out.iter().enumerate() {
            let neg = term.coeff.is_negative();
            let mag = term.coeff.abs();
            let body = if term.name.is_empty() {
                mag.to_string()
            } else if mag.is_one() {
                term.name.clone()
            } else {
                format!("{mag}*{}", term.name)
            };
            match (i, neg) {
                (0, false) => write!(f, "{body}")?,
                (0, true) => write!(f, "-{body}")?,
                (_, false) => write!(f, " + {body}")?,
                (_, true) => write!(f, " - {body}")?,
            }
        }
        Ok(())
    }
}

/// Combines the same bound computed under `γ > 0` and `γ < 0` into one
/// expression valid for both, using `max(γ,0)` and `min(γ,0)`.
///
/// Returns `None` when the two bounds differ in anything other than the
/// coefficient on `γ`.
pub fn merge_gamma_regimes(pos: &SymExpr, neg: &SymExpr) -> Option<SymExpr> {
    let kp = pos.coeff(&Symbol::Gamma);
    let kn = neg.coeff(&Symbol::Gamma);
    let mut base_p = pos.clone();
    base_p.terms.remove(&Symbol::Gamma);
    let mut base_n = neg.clone();
    base_n.terms.remove(&Symbol::Gamma);
    if base_p != base_n {
        return None;
    }
    let merged = if kp == kn {
        base_p.plus_term(Symbol::Gamma, kp)
    } else {
        base_p.plus_term(Symbol::GammaPos, kp).plus_term(Symbol::GammaNeg, kn)
    };
    Some(merged)
}
