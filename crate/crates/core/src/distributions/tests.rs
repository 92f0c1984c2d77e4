use super::*;
use crate::models::{CovariateCell, Family, Y0Status};
use crate::polyhedra::{Coord, LinIneq, LinIneqSystem};
use crate::scalar::rat;

fn d(t: u8, s: u8) -> Coord {
    Coord::Diff { comp: 0, t, s }
}

fn region(model: &ModelSpec, rows: Vec<LinIneq<Rational>>) -> RegionUnion<Rational> {
    let mut sys: LinIneqSystem<Rational> = model.diff_space().ambient();
    for r in rows {
        sys.push(r).unwrap();
    }
    RegionUnion::from_system(sys)
}

fn static2() -> ModelSpec {
    ModelSpec::new(Family::BinaryStatic, 2, Y0Status::Absent)
}

fn static3() -> ModelSpec {
    ModelSpec::new(Family::BinaryStatic, 3, Y0Status::Absent)
}

#[test]
fn full_space_and_half_line() {
    let m = static2();
    let g = LatentDist::gaussian(1.0);
    let full = region(&m, vec![]);
    assert_eq!(measure(&m, &g, &full, 0, MeasureOptions::default()).unwrap(), MeasureValue::exact(1.0));
    let half = region(&m, vec![LinIneq::le([(d(2, 1), rat(1))], rat(0))]);
    let v = measure(&m, &g, &half, 0, MeasureOptions::default()).unwrap();
    assert!((v.estimate - 0.5).abs() < 1e-15);
    assert_eq!(v.n_draws, 0);
}

#[test]
fn interval_under_correlated_errors() {
    let m = static2();
    let g: LatentDist = LatentFamily::GaussianCorr { sigma: 2.0, rho: 0.5 }.into();
    // Δu ~ N(0, 2·4·(1 - 0.5)) = N(0, 4)
    let r = region(&m, vec![LinIneq::le([(d(2, 1), rat(1))], rat(2)), LinIneq::ge([(d(2, 1), rat(1))], rat(-2))]);
    let v = measure(&m, &g, &r, 0, MeasureOptions::default()).unwrap();
    assert!((v.estimate - 0.682_689_492_137_085_9).abs() < 1e-9, "{}", v.estimate);
}

/// `∫ φ(x) Φ(x) Φ(x - 1) dx` by composite Simpson on [-10, 10].
fn quadrature_oracle() -> f64 {
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let n = 20_000;
    let h = 20.0 / n as f64;
    let f = |x: f64| phi(x) * normal_cdf(x) * normal_cdf(x - 1.0);
    let mut s = f(-10.0) + f(10.0);
    for i in 1..n {
        let x = -10.0 + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

#[test]
fn two_dimensional_region_matches_quadrature() {
    let m = static3();
    let g = LatentDist::gaussian(1.0);
    // {Δ21 >= 0, Δ32 <= -1}: u1 <= u2 and u3 <= u2 - 1
    let r = region(&m, vec![LinIneq::ge([(d(2, 1), rat(1))], rat(0)), LinIneq::le([(d(3, 2), rat(1))], rat(-1))]);
    let v = measure(&m, &g, &r, 7, MeasureOptions::default()).unwrap();
    let oracle = quadrature_oracle();
    assert!((v.estimate - oracle).abs() < 4.0 * v.std_error, "{} vs {oracle} (se {})", v.estimate, v.std_error);
    assert_eq!(v.n_draws, DEFAULT_DRAWS);
}

#[test]
fn monte_carlo_is_deterministic_and_complements_sum_to_one() {
    let m = static3();
    let g: LatentDist = LatentFamily::GaussianCorr { sigma: 1.0, rho: -0.3 }.into();
    let opts = MeasureOptions { seed: 99, draws: 50_000 };
    let r = region(&m, vec![LinIneq::le([(d(3, 1), rat(1)), (d(2, 1), rat(1))], rat(1))]);
    let comp = r.complement_within(&m.diff_space().ambient());
    let a = Measurer::new(&m, &g, 3, opts).unwrap();
    let b = Measurer::new(&m, &g, 3, opts).unwrap();
    let va = a.measure(&r).unwrap();
    assert_eq!(va, b.measure(&r).unwrap());
    let vc = a.measure(&comp).unwrap();
    assert!((va.estimate + vc.estimate - 1.0).abs() <= 3.0 * (va.std_error + vc.std_error));
    let other_cell = Measurer::new(&m, &g, 4, opts).unwrap().measure(&r).unwrap();
    assert_ne!(va.estimate, other_cell.estimate);
}

#[test]
fn finite_families_are_exact() {
    let m = static3();
    let g: LatentDist = LatentFamily::DiscreteGrid {
        points: vec![vec![0.0, 0.0], vec![1.0, -1.0], vec![-1.0, 2.0]],
        weights: vec![0.5, 0.25, 0.25],
    }
    .into();
    // boundary points count for discrete supports
    let r = region(&m, vec![LinIneq::le([(d(2, 1), rat(1))], rat(0))]);
    assert_eq!(measure(&m, &g, &r, 0, MeasureOptions::default()).unwrap(), MeasureValue::exact(0.75));
    let m2 = static2();
    let pu: LatentDist = LatentFamily::PiecewiseUniform { edges: vec![-1.0, 0.0, 2.0], weights: vec![0.5, 0.5] }.into();
    let r = region(&m2, vec![LinIneq::le([(d(2, 1), rat(1))], rat(1))]);
    assert_eq!(measure(&m2, &pu, &r, 0, MeasureOptions::default()).unwrap().estimate, 0.75);
}

#[test]
fn per_cell_overrides_and_validation() {
    let m = static2();
    let mut g = LatentDist::gaussian(1.0);
    g.per_cell.insert(2, LatentFamily::gaussian(3.0));
    assert_eq!(g.at_cell(2), &LatentFamily::gaussian(3.0));
    assert_eq!(g.at_cell(1), &LatentFamily::gaussian(1.0));
    assert!(LatentFamily::gaussian(-1.0).validate(&m).is_err());
    assert!(LatentFamily::GaussianCorr { sigma: 1.0, rho: 1.0 }.validate(&m).is_err());
    let bad = LatentFamily::DiscreteGrid { points: vec![vec![0.0]], weights: vec![0.9] };
    assert!(bad.validate(&m).is_err());
    let json =
        r#"{"family":"gaussian_corr","sigma":1.5,"rho":0.2,"per_cell":{"1":{"family":"gaussian_iid","sigma":1}}}"#;
    let g: LatentDist = serde_json::from_str(json).unwrap();
    assert_eq!(g.base, LatentFamily::GaussianCorr { sigma: 1.5, rho: 0.2 });
    let r = RegionUnion::from_system(LinIneqSystem::full([Coord::Named("w".into())]));
    assert!(measure(&m, &g, &r, 0, MeasureOptions::default()).is_err());
}

#[test]
fn panel_frequencies() {
    let m = static2();
    let csv = "unit,period,y,z\n1,1,0,0\n1,2,1,1\n2,1,1,0\n2,2,0,1\n";
    let f = estimate_f(&m, csv.as_bytes(), 1).unwrap();
    assert_eq!(f.cells.len(), 1);
    assert_eq!(f.cells[0].probs, vec![0.0, 0.5, 0.5, 0.0]);
    assert_eq!(f.prob_y_in(0, &[0, 1, 2, 3]).unwrap(), 1.0);
    assert_eq!(f.prob_y_in(0, &[]).unwrap(), 0.0);
    assert!(f.prob_y_in(5, &[0]).is_err());
}

#[test]
fn panel_errors_name_units_and_rows() {
    let m = static2();
    let missing = "unit,period,y,z\n1,1,0,0\n1,2,1,1\n7,1,1,0\n";
    let e = estimate_f(&m, missing.as_bytes(), 1).unwrap_err().to_string();
    assert!(e.contains("unit 7") && e.contains("period(s) 2"), "{e}");
    let bad = "unit,period,y,z\n1,1,0,0\n1,2,x,1\n";
    let e = estimate_f(&m, bad.as_bytes(), 1).unwrap_err().to_string();
    assert!(e.contains("row 3"), "{e}");
}

#[test]
fn direct_sums() {
    let f = CondOutcomeDist {
        cells: vec![CellProbs {
            cell: CovariateCell::scalar(0, &[0.0, 1.0]),
            probs: vec![0.1, 0.2, 0.3, 0.4],
            std_errors: None,
            n_units: None,
            sparse: false,
        }],
    };
    f.validate(&static2()).unwrap();
    assert!((f.prob_y_in(0, &[1, 2]).unwrap() - 0.5).abs() < 1e-15);
}
