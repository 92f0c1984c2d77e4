use super::*;
use crate::polyhedra::{LinIneq, Relation};
use crate::scalar::rat;

fn dyn2() -> ModelSpec {
    ModelSpec::new(Family::BinaryDynamic, 2, Y0Status::Observed)
}

#[test]
fn residual_flags_a_contradiction() {
    let theta = Theta { alpha: vec![], beta: vec![vec![1.0]], gamma: vec![0.0], cuts: vec![] };
    let cell = CovariateCell::scalar(0, &[0.0, 0.0]).with_y0(0);
    let y = OutcomeSeq::new(vec![0, 0]).with_y0(Some(0));
    let v = LatentPoint { fe: vec![0.0], ..Default::default() };
    let r = structural_residual(&dyn2(), &theta, &y, &cell, &[5.0, 5.0], &v).unwrap();
    assert!(r > 0.0);
    let r = structural_residual(&dyn2(), &theta, &y, &cell, &[-5.0, -5.0], &v).unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn period_rows_for_binary_outcomes() {
    let theta = Theta::scalar_beta(1.0).with_gamma(0.5);
    let cell = CovariateCell::scalar(0, &[0.0, 1.0]).with_y0(1);
    let p = ParamValues::numeric(&dyn2(), &theta, &cell).unwrap();
    let y = OutcomeSeq::new(vec![1, 0]).with_y0(Some(1));
    let d1 = dt_inverse(&dyn2(), &p, &cell, 1, &y).unwrap();
    assert_eq!(d1.len(), 1);
    // y1 = 1: c + u1 >= -(0 + 0.5)
    let c_u1 = [(Coord::Fe(0), rat(1)), (Coord::Level { comp: 0, t: 1 }, rat(1))];
    assert_eq!(d1[0].rows, vec![LinIneq::ge(c_u1, crate::scalar::rat_frac(-1, 2))]);
    // y2 = 0: c + u2 <= -(1 + 0.5)
    let d2 = dt_inverse(&dyn2(), &p, &cell, 2, &y).unwrap();
    assert_eq!(d2[0].rows[0].rel(), Relation::Le);
    assert_eq!(d2[0].rows[0].rhs(), &crate::scalar::rat_frac(-3, 2));
}

#[test]
fn unobserved_initial_condition_branches_in_period_one() {
    let m = ModelSpec::new(Family::Ordered, 3, Y0Status::Unobserved).with_choices(3);
    let theta = Theta { beta: vec![vec![1.0]], gamma: vec![0.0, 0.2, 0.4], cuts: vec![0.0, 1.0], ..Default::default() };
    let cell = CovariateCell::scalar(0, &[0.0, 1.0, 2.0]);
    let p = ParamValues::numeric(&m, &theta, &cell).unwrap();
    let y = OutcomeSeq::new(vec![1, 2, 0]);
    assert_eq!(dt_inverse(&m, &p, &cell, 1, &y).unwrap().len(), 3);
    assert_eq!(dt_inverse(&m, &p, &cell, 2, &y).unwrap().len(), 1);
    // middle category has two rows, the extremes one each
    assert_eq!(dt_inverse(&m, &p, &cell, 1, &y).unwrap()[0].rows.len(), 2);
    assert_eq!(dt_inverse(&m, &p, &cell, 3, &y).unwrap()[0].rows.len(), 1);
}

#[test]
fn outcome_enumeration_is_lexicographic() {
    let m = ModelSpec::new(Family::Multidiscrete, 2, Y0Status::Absent).with_choices(3);
    let ys = m.enumerate_outcomes(&CovariateCell::scalar(0, &[0.0, 0.0])).unwrap();
    let labels: Vec<String> = ys.iter().map(|y| y.label()).collect();
    assert_eq!(labels[..4], ["(1,1)", "(1,2)", "(1,3)", "(2,1)"]);
    assert_eq!(ys.len(), 9);
    let ses = ModelSpec::new(Family::SimultaneousBinary, 2, Y0Status::Absent);
    assert_eq!(ses.enumerate_outcomes(&CovariateCell::scalar(0, &[0.0, 0.0])).unwrap().len(), 16);
    let cens = ModelSpec::new(Family::Censored, 2, Y0Status::Absent);
    assert!(cens.enumerate_outcomes(&CovariateCell::scalar(0, &[0.0, 0.0])).is_err());
}

#[test]
fn json_configs_reject_unknown_keys() {
    let ok: ModelSpec =
        serde_json::from_str(r#"{"family":"ordered","periods":3,"y0":"observed","n_choices":3}"#).unwrap();
    ok.validate().unwrap();
    let bad = serde_json::from_str::<ModelSpec>(r#"{"family":"ordered","periods":3,"colour":"red"}"#);
    assert!(bad.is_err());
    let th: Theta = serde_json::from_str(r#"{"beta":1.5,"gamma":0.5}"#).unwrap();
    assert_eq!(th.beta, vec![vec![1.5]]);
    assert_eq!(th.gamma, vec![0.5]);
    let th: Theta = serde_json::from_str(r#"{"beta":[[1.0],[2.0]],"alpha":[0.5,0.5]}"#).unwrap();
    assert_eq!(th.beta.len(), 2);
    assert!(serde_json::from_str::<Theta>(r#"{"beta":1.0,"delta":2}"#).is_err());
}

#[test]
fn validation_messages() {
    let m = ModelSpec::new(Family::BinaryStatic, 2, Y0Status::Observed);
    assert!(m.validate().is_err());
    let m = ModelSpec::new(Family::BinaryDynamic, 1, Y0Status::Observed);
    assert!(m.validate().is_err());
    let ord = ModelSpec::new(Family::Ordered, 2, Y0Status::Absent).with_choices(3);
    let th = Theta { beta: vec![vec![1.0]], cuts: vec![1.0, 0.0], ..Default::default() };
    assert!(th.validate(&ord).unwrap_err().to_string().contains("increasing"));
    let mut restricted = dyn2();
    restricted.sign_restrictions.push(SignRestriction { param: "gamma".into(), sign: SignKind::Positive });
    assert!(Theta::scalar_beta(1.0).with_gamma(-0.1).validate(&restricted).is_err());
    assert!(Theta::scalar_beta(1.0).with_gamma(0.1).validate(&restricted).is_ok());
    let nan = Theta::scalar_beta(f64::NAN).with_gamma(0.1);
    assert!(nan.validate(&dyn2()).is_err());
}

#[test]
fn level_rows_map_to_differences() {
    let space = DiffSpace::new(vec![0], 3);
    let l = |t| Coord::Level { comp: 0, t };
    let row = LinIneq::le([(l(3), rat(1)), (l(1), rat(-1))], rat(2));
    let d = space.level_row_to_diff(&row).unwrap();
    assert_eq!(d.coeffs().keys().next(), Some(&Coord::Diff { comp: 0, t: 3, s: 1 }));
    let three = LinIneq::le([(l(1), rat(1)), (l(2), rat(-2)), (l(3), rat(1))], rat(0));
    let d = space.level_row_to_diff(&three).unwrap();
    // normalised by the leading coefficient
    assert_eq!(d.coeff(&Coord::Diff { comp: 0, t: 2, s: 1 }), rat(-1));
    assert_eq!(d.coeff(&Coord::Diff { comp: 0, t: 3, s: 1 }), crate::scalar::rat_frac(1, 2));
    let unbalanced = LinIneq::le([(l(1), rat(1))], rat(0));
    assert!(space.level_row_to_diff(&unbalanced).is_err());
    assert_eq!(space.ties::<crate::scalar::Rational>().len(), 1);
    assert_eq!(space.basis_from_levels(&[1.0, 3.0, 0.0]), vec![2.0, -1.0]);
}

#[test]
fn feasibility_search_matches_hand_cases() {
    let m = ModelSpec::new(Family::BinaryStatic, 2, Y0Status::Absent);
    let theta = Theta::scalar_beta(1.0);
    let cell = CovariateCell::scalar(0, &[0.0, 1.0]);
    let y = OutcomeSeq::new(vec![1, 0]);
    // (1,0) needs u1 + 0 >= u2 + 1
    assert!(feasible_latent(&m, &theta, &y, &cell, &[2.0, 0.5]).unwrap());
    assert!(!feasible_latent(&m, &theta, &y, &cell, &[0.0, 0.5]).unwrap());
}

#[test]
fn censored_search_uses_the_observed_initial_level() {
    let m = ModelSpec::new(Family::Censored, 2, Y0Status::Observed);
    let theta = Theta { gamma: vec![0.5], ..Theta::scalar_beta(1.0) };
    let cell = CovariateCell::scalar(0, &[0.0, 0.0]);
    let y = OutcomeSeq { levels: Some(vec![2.0, 3.0]), y0_level: Some(1.0), ..OutcomeSeq::new(vec![0, 0]) };
    // uncensored twice: c + u1 = 2 - 0.5, c + u2 = 3 - 1
    assert!(feasible_latent(&m, &theta, &y, &cell, &[0.0, 0.5]).unwrap());
    assert!(!feasible_latent(&m, &theta, &y, &cell, &[0.0, 0.0]).unwrap());
}
