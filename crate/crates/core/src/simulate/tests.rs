use super::*;
use crate::distributions::estimate_f;
use crate::models::structural_residual;

fn cells(zs: &[&[f64]]) -> Vec<DgpCell> {
    let w = 1.0 / zs.len() as f64;
    zs.iter().enumerate().map(|(i, z)| DgpCell { cell: CovariateCell::scalar(i, z), weight: w }).collect()
}

fn fe(mean: f64, sd: f64) -> FixedEffectSpec {
    FixedEffectSpec { components: vec![MixtureComponent { weight: 1.0, mean, on_z: 0.0, on_u: 0.0, on_y0: 0.0, sd }] }
}

fn dgp(model: ModelSpec, theta: Theta, zs: &[&[f64]]) -> DgpSpec {
    DgpSpec {
        model,
        theta,
        latent: LatentDist::gaussian(1.0),
        latent_by_y0: BTreeMap::new(),
        fixed_effect: FixedEffectSpec {
            components: vec![
                MixtureComponent { weight: 0.6, mean: -0.5, on_z: 0.8, on_u: 0.7, on_y0: 0.5, sd: 0.5 },
                MixtureComponent { weight: 0.4, mean: 1.0, on_z: -0.4, on_u: -1.2, on_y0: 0.0, sd: 1.0 },
            ],
        },
        initial: InitialSpec { intercept: 0.2, on_c: 0.9, on_z: -0.5, level_sd: 0.3 },
        tie: TieRule::Upper,
        selection: Selection::High,
        cells: cells(zs),
    }
}

fn families() -> Vec<DgpSpec> {
    let z2: &[&[f64]] = &[&[0.0, 1.0], &[0.5, -0.5]];
    let z3: &[&[f64]] = &[&[0.0, 1.0, -1.0]];
    let mut cens = dgp(
        ModelSpec::new(Family::Censored, 3, Y0Status::Observed),
        Theta { alpha: vec![0.5], beta: vec![vec![1.0]], gamma: vec![0.4], cuts: vec![] },
        z3,
    );
    cens.cells[0].cell.y3 = Some(vec![0.0, 0.2, -0.1]);
    cens.cells[0].cell.y2 = Some(vec![vec![1.0], vec![0.0], vec![2.0]]);
    vec![
        dgp(ModelSpec::new(Family::BinaryStatic, 3, Y0Status::Absent), Theta::scalar_beta(0.8), z3),
        dgp(ModelSpec::new(Family::BinaryDynamic, 2, Y0Status::Observed), Theta::scalar_beta(1.0).with_gamma(0.5), z2),
        dgp(
            ModelSpec::new(Family::BinaryDynamic, 3, Y0Status::Unobserved),
            Theta::scalar_beta(-0.5).with_gamma(-1.0),
            z3,
        ),
        dgp(
            ModelSpec::new(Family::Ordered, 2, Y0Status::Observed).with_choices(3),
            Theta { beta: vec![vec![1.0]], gamma: vec![0.0, 0.3, 0.6], cuts: vec![-0.5, 0.7], alpha: vec![] },
            z2,
        ),
        dgp(
            ModelSpec::new(Family::Multidiscrete, 2, Y0Status::Absent).with_choices(3),
            Theta { beta: vec![vec![1.0], vec![-0.5]], ..Default::default() },
            z2,
        ),
        dgp(
            ModelSpec::new(Family::SimultaneousBinary, 2, Y0Status::Absent),
            Theta { beta: vec![vec![1.0], vec![-0.5]], alpha: vec![0.7, 1.2], ..Default::default() },
            z2,
        ),
        cens,
    ]
}

#[test]
fn every_record_solves_the_structural_equations() {
    for d in families() {
        for u in simulate_units(&d, 300, 5).unwrap() {
            let cell = d.unit_cell(&u);
            let r = structural_residual(&d.model, &d.theta, &u.outcome, &cell, &u.u, &u.latent).unwrap();
            assert!(r < 1e-9, "{:?}: residual {r} for {}", d.model.family, u.outcome);
        }
    }
}

#[test]
fn degenerate_index_gives_zeros() {
    let mut d =
        dgp(ModelSpec::new(Family::BinaryStatic, 3, Y0Status::Absent), Theta::scalar_beta(0.0), &[&[0.0, 1.0, 2.0]]);
    d.fixed_effect = fe(-1e6, 0.0);
    assert!(simulate_units(&d, 200, 1).unwrap().iter().all(|u| u.outcome.y == vec![0, 0, 0]));
    let mut c = dgp(ModelSpec::new(Family::Censored, 2, Y0Status::Absent), Theta::scalar_beta(0.0), &[&[0.0, 1.0]]);
    c.fixed_effect = fe(-1e6, 0.0);
    c.cells[0].cell.y3 = Some(vec![0.0, 0.0]);
    for u in simulate_units(&c, 100, 2).unwrap() {
        assert_eq!(u.outcome.y, vec![1, 1]);
        assert_eq!(u.outcome.levels, Some(vec![0.0, 0.0]));
    }
}

#[test]
fn fair_coins_are_equiprobable() {
    let mut d =
        dgp(ModelSpec::new(Family::BinaryStatic, 3, Y0Status::Absent), Theta::scalar_beta(0.0), &[&[0.0, 0.0, 0.0]]);
    d.fixed_effect = fe(0.0, 0.0);
    let f = exact_f(&d, 200_000, 3).unwrap();
    let c = &f.cells[0];
    assert!((c.probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    for (p, se) in c.probs.iter().zip(c.std_errors.as_ref().unwrap()) {
        assert!((p - 0.125).abs() < 4.0 * se, "{p}");
    }
}

/// `P(Y = (1,1))` for a static two-period model with `c ~ N(m, s²)`
/// independent of `u ~ N(0, I)`: `∫ Φ(a1 + c) Φ(a2 + c) dN(c)` by Simpson.
fn orthant_oracle(a1: f64, a2: f64, m: f64, s: f64) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n01 = Normal::standard();
    let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let steps = 8_000;
    let h = 16.0 / steps as f64;
    let f = |x: f64| phi(x) * n01.cdf(a1 + m + s * x) * n01.cdf(a2 + m + s * x);
    let mut acc = f(-8.0) + f(8.0);
    for i in 1..steps {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(-8.0 + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn two_period_frequencies_match_the_orthant_probability() {
    let mut d = dgp(ModelSpec::new(Family::BinaryStatic, 2, Y0Status::Absent), Theta::scalar_beta(0.7), &[&[0.0, 1.0]]);
    d.fixed_effect = fe(-0.3, 1.5);
    let f = exact_f(&d, 400_000, 9).unwrap();
    let c = &f.cells[0];
    let oracle = orthant_oracle(0.0, 0.7, -0.3, 1.5);
    let se = c.std_errors.as_ref().unwrap()[3];
    assert!((c.probs[3] - oracle).abs() < 3.0 * se, "{} vs {oracle}", c.probs[3]);
}

#[test]
fn panel_round_trip_matches_exact_frequencies() {
    let d = &families()[1];
    let mut buf = Vec::new();
    simulate_panel(d, 10_000, 17, &mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("unit,period,y,z,y0\n"));
    let est = estimate_f(&d.model, buf.as_slice(), 30).unwrap();
    let ex = exact_f(d, 200_000, 1).unwrap();
    for c in &est.cells {
        let twin = ex
            .cells
            .iter()
            .find(|e| e.cell.z == c.cell.z && e.cell.y0 == c.cell.y0)
            .expect("every estimated cell is a DGP cell");
        for (k, p) in c.probs.iter().enumerate() {
            let q = twin.probs[k];
            let se = (q * (1.0 - q) / c.n_units.unwrap() as f64).sqrt();
            assert!(
                (p - q).abs() <= 3.0 * se + 4.0 * twin.std_errors.as_ref().unwrap()[k] + 1e-12,
                "cell {:?}",
                c.cell
            );
        }
    }
}

#[test]
fn split_cells_carry_the_initial_condition() {
    let d = &families()[3];
    let f = exact_f(d, 20_000, 4).unwrap();
    assert_eq!(f.cells.len(), 6);
    for c in &f.cells {
        assert_eq!(c.cell.cell_id % 3, c.cell.y0.unwrap() as usize);
    }
}

#[test]
fn linear_moments_recover_the_slope() {
    let mut d =
        dgp(ModelSpec::new(Family::Linear, 2, Y0Status::Absent), Theta::scalar_beta(1.5), &[&[0.0, 1.0], &[0.3, -0.9]]);
    d.latent = LatentFamily::GaussianCorr { sigma: 1.0, rho: 0.4 }.into();
    let m = linear_moments(&d).unwrap();
    assert_eq!(m[0], (1.5, 1.0));
    assert!((m[1].0 / m[1].1 - 1.5).abs() < 1e-12);
}

#[test]
fn opposite_interactions_are_rejected() {
    let mut d = families()[5].clone();
    d.theta.alpha = vec![1.0, -1.0];
    assert!(d.validate().is_err());
}
