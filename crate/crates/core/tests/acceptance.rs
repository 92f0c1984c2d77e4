//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! fails. Built with `harness = false`; run with
//! `cargo test -p shortpanel --test acceptance`.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use num_traits::{ToPrimitive, Zero};
use shortpanel::distributions::{CellProbs, CondOutcomeDist, LatentDist, LatentFamily};
use shortpanel::identify::{
    artstein_bruteforce, check_structure, identified_set_scan, linear_panel_beta, outer_set_scan,
    profile_bounds_2p_binary, CheckOptions, GFamily, GridAxis, IdentifiedSetGrid, ProfileOptions, ThetaGrid,
};
use shortpanel::models::{
    feasible_latent, structural_residual, CovariateCell, Family, ModelSpec, OutcomeSeq, ParamValues, Theta, Y0Status,
};
use shortpanel::polyhedra::{RegionUnion, Relation};
use shortpanel::randomsets::{
    basis_point, core_determining_collection, region_contains, ustar, ustar_closed_form, ustar_numeric, CdcOptions,
};
use shortpanel::scalar::{rational_from_f64, Rational};
use shortpanel::simulate::{
    exact_f, linear_moments, simulate_units, DgpCell, DgpSpec, FixedEffectSpec, InitialSpec, MixtureComponent,
    Selection, TieRule,
};
use shortpanel::tables::{diff_against_golden, render, TABLE_IDS};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed <= limit, || format!("took {:.1}s, limit {}s", elapsed.as_secs_f64(), limit.as_secs()))
}

fn e(err: impl std::fmt::Display) -> String {
    err.to_string()
}

/// The six discrete designs: static, dynamic with observed and with
/// unobserved initial condition, ordered, multiple choice, simultaneous.
#[derive(Clone, Copy, Debug)]
enum Design {
    Static,
    DynamicObserved,
    DynamicUnobserved,
    Ordered,
    Multidiscrete,
    Simultaneous,
}

const DESIGNS: [Design; 6] = [
    Design::Static,
    Design::DynamicObserved,
    Design::DynamicUnobserved,
    Design::Ordered,
    Design::Multidiscrete,
    Design::Simultaneous,
];

/// Draws on a coarse lattice half of the time, so that boundary
/// coincidences get exercised as well as generic positions.
fn draw(rng: &mut ChaCha8Rng, lo: f64, hi: f64, lattice: bool) -> f64 {
    let v = rng.gen_range(lo..hi);
    if lattice {
        (v * 4.0).round() / 4.0
    } else {
        v
    }
}

fn random_structure(d: Design, rng: &mut ChaCha8Rng) -> (ModelSpec, Theta, CovariateCell) {
    let lat = rng.gen_bool(0.5);
    let mut g = |lo: f64, hi: f64| draw(rng, lo, hi, lat);
    let (model, theta) = match d {
        Design::Static => (ModelSpec::new(Family::BinaryStatic, 3, Y0Status::Absent), Theta::scalar_beta(g(-2.0, 2.0))),
        Design::DynamicObserved => (
            ModelSpec::new(Family::BinaryDynamic, 3, Y0Status::Observed),
            Theta::scalar_beta(g(-2.0, 2.0)).with_gamma(g(-2.0, 2.0)),
        ),
        Design::DynamicUnobserved => (
            ModelSpec::new(Family::BinaryDynamic, 3, Y0Status::Unobserved),
            Theta::scalar_beta(g(-2.0, 2.0)).with_gamma(g(-2.0, 2.0)),
        ),
        Design::Ordered => {
            let c1 = g(-1.0, 1.0);
            let c2 = c1 + 0.25 + g(0.0, 2.0).abs();
            (
                ModelSpec::new(Family::Ordered, 3, Y0Status::Observed).with_choices(3),
                Theta {
                    beta: vec![vec![g(-2.0, 2.0)]],
                    gamma: vec![0.0, g(-1.0, 1.0), g(-1.0, 1.0)],
                    cuts: vec![c1, c2],
                    ..Default::default()
                },
            )
        }
        Design::Multidiscrete => (
            ModelSpec::new(Family::Multidiscrete, 2, Y0Status::Absent).with_choices(3),
            Theta { beta: vec![vec![g(-2.0, 2.0)], vec![g(-2.0, 2.0)]], ..Default::default() },
        ),
        Design::Simultaneous => (
            ModelSpec::new(Family::SimultaneousBinary, 2, Y0Status::Absent),
            Theta {
                beta: vec![vec![g(-2.0, 2.0)], vec![g(-2.0, 2.0)]],
                alpha: vec![g(-2.0, 2.0), g(-2.0, 2.0)],
                ..Default::default()
            },
        ),
    };
    let z: Vec<f64> = (0..model.periods).map(|_| draw(rng, -2.0, 2.0, lat)).collect();
    let mut cell = CovariateCell::scalar(0, &z);
    if model.y0 == Y0Status::Observed {
        cell.y0 = Some(rng.gen_range(0..model.n_categories() as i64));
    }
    (model, theta, cell)
}

fn golden_tables() -> Outcome {
    let start = Instant::now();
    for id in TABLE_IDS {
        let d = diff_against_golden(id).map_err(e)?;
        if let Some((line, want, got)) = d.first_difference {
            return Err(format!("{id} line {line}: golden {want:?}, rendered {got:?}"));
        }
    }
    let rows = |id: &str| render(id).map(|s| s.lines().count() - 1);
    let counts = [
        ("ystar2", 7),
        ("dbr3", 8),
        ("oc3-ustar", 9),
        ("oc3-cdc", 7),
        ("mdc-ustar", 9),
        ("ses-ustar", 16),
        ("sbp3-cdc", 24),
        ("dbp3-cdc-gpos", 26),
        ("dbp3-cdc-gneg", 27),
        ("mdc-cdc", 18),
        ("ses-cdc", 25),
    ];
    for (id, n) in counts {
        let got = rows(id).map_err(e)?;
        ensure(got == n, || format!("{id} has {got} rows, expected {n}"))?;
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    Ok(format!("{} tables byte-exact in {:.1}s", TABLE_IDS.len(), start.elapsed().as_secs_f64()))
}

fn simultaneous_reference() -> (ModelSpec, Theta, CovariateCell) {
    (
        ModelSpec::new(Family::SimultaneousBinary, 2, Y0Status::Absent),
        Theta { beta: vec![vec![1.0], vec![-0.7]], alpha: vec![1.0, 2.0], ..Default::default() },
        CovariateCell::scalar(0, &[0.0, 0.37]),
    )
}

fn union_count() -> Outcome {
    let (m, th, cell) = simultaneous_reference();
    let sets = ustar_numeric(&m, &th, &cell).map_err(e)?;
    let cdc = core_determining_collection(&m, &sets, &CdcOptions::default()).map_err(e)?;
    let pairs = cdc.identical_pairs().len();
    ensure(cdc.distinct.len() == 8 && cdc.candidate_unions == 254 && pairs == 4, || {
        format!("{} distinct sets, {} unions, {pairs} identical pairs", cdc.distinct.len(), cdc.candidate_unions)
    })?;
    Ok("8 distinct non-full sets, 254 candidate unions, 4 identical pairs".into())
}

fn fm_closed_form() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut compared = 0;
    for d in DESIGNS {
        for _ in 0..200 {
            let (m, th, cell) = random_structure(d, &mut rng);
            let p = ParamValues::numeric(&m, &th, &cell).map_err(e)?;
            for y in m.enumerate_outcomes(&cell).map_err(e)? {
                let fm = ustar(&m, &p, &cell, &y).map_err(e)?;
                let cf = ustar_closed_form(&m, &p, &cell, &y).map_err(e)?;
                ensure(fm.region.same_set(&cf), || format!("{d:?} {y} at {th:?}, z = {:?}", cell.z))?;
                compared += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("{compared} sets over 6 x 200 draws in {:.1}s", start.elapsed().as_secs_f64()))
}

fn duality() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut both = [0usize; 2];
    for d in DESIGNS {
        for _ in 0..1000 {
            let (m, th, cell) = random_structure(d, &mut rng);
            let ys = m.enumerate_outcomes(&cell).map_err(e)?;
            let y = &ys[rng.gen_range(0..ys.len())];
            let u: Vec<f64> = (0..m.comps().len() * m.periods).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let p = ParamValues::numeric(&m, &th, &cell).map_err(e)?;
            let set = ustar(&m, &p, &cell, y).map_err(e)?;
            let in_u = region_contains(&m, &set.region, &basis_point(&m, &u).map_err(e)?).map_err(e)?;
            let in_y = feasible_latent(&m, &th, y, &cell, &u).map_err(e)?;
            ensure(in_u == in_y, || format!("{d:?} {y} at u = {u:?}: U* says {in_u}, Y* says {in_y}"))?;
            both[in_u as usize] += 1;
        }
    }
    Ok(format!("6000 draws, {} inside and {} outside, zero failures", both[1], both[0]))
}

fn cell_f(cells: Vec<(CovariateCell, Vec<f64>)>) -> CondOutcomeDist {
    CondOutcomeDist {
        cells: cells
            .into_iter()
            .map(|(cell, probs)| CellProbs { cell, probs, std_errors: None, n_units: None, sparse: false })
            .collect(),
    }
}

/// Outcome probabilities generated by `G` through a random selection from
/// `Y*(u)`, mixed with random noise for about half of the instances.
fn artstein_f(
    m: &ModelSpec,
    th: &Theta,
    points: &[Vec<f64>],
    weights: &[f64],
    cells: &[CovariateCell],
    rng: &mut ChaCha8Rng,
) -> Result<CondOutcomeDist, String> {
    let keep = if rng.gen_bool(0.5) { 1.0 } else { rng.gen_range(0.7..1.0) };
    let mut out = Vec::new();
    for c in cells {
        let sets = ustar_numeric(m, th, c).map_err(e)?;
        let mut probs = vec![0.0; sets.len()];
        for (pt, w) in points.iter().zip(weights) {
            let b = pt.iter().map(|v| rational_from_f64(*v)).collect::<Result<Vec<_>, _>>().map_err(e)?;
            let mut ys = Vec::new();
            for (k, s) in sets.iter().enumerate() {
                if region_contains(m, &s.region, &b).map_err(e)? {
                    ys.push(k);
                }
            }
            let mut left = *w;
            for (i, y) in ys.iter().enumerate() {
                let share = if i + 1 == ys.len() { left } else { left * rng.gen::<f64>() };
                probs[*y] += share;
                left -= share;
            }
        }
        let noise: Vec<f64> = (0..probs.len()).map(|_| rng.gen::<f64>().powi(2)).collect();
        let s: f64 = noise.iter().sum();
        out.push((c.clone(), probs.iter().zip(&noise).map(|(p, n)| keep * p + (1.0 - keep) * n / s).collect()));
    }
    Ok(cell_f(out))
}

fn cdc_vs_bruteforce() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut verdicts = [0usize; 2];
    let plan = [(2usize, 100usize), (3, 20)];
    for (periods, n_inst) in plan {
        for i in 0..n_inst {
            let dynamic = i % 2 == 1;
            let m = if dynamic {
                let y0 = if periods == 2 { Y0Status::Observed } else { Y0Status::Unobserved };
                ModelSpec::new(Family::BinaryDynamic, periods, y0)
            } else {
                ModelSpec::new(Family::BinaryStatic, periods, Y0Status::Absent)
            };
            let mut th = Theta::scalar_beta(draw(&mut rng, -1.5, 1.5, true));
            if dynamic {
                th.gamma = vec![draw(&mut rng, -1.5, 1.5, true)];
            }
            let cells: Vec<CovariateCell> = (0..2)
                .map(|k| {
                    let z: Vec<f64> = (0..periods).map(|_| draw(&mut rng, -1.5, 1.5, false)).collect();
                    let mut c = CovariateCell::scalar(k, &z);
                    if m.y0 == Y0Status::Observed {
                        c.y0 = Some(rng.gen_range(0..2));
                    }
                    c
                })
                .collect();
            let n = rng.gen_range(2..=9);
            let points: Vec<Vec<f64>> =
                (0..n).map(|_| (1..periods).map(|_| (rng.gen_range(-30..30) as f64 + 0.5) / 10.0).collect()).collect();
            let raw: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.05).collect();
            let s: f64 = raw.iter().sum();
            let weights: Vec<f64> = raw.iter().map(|v| v / s).collect();
            let f = artstein_f(&m, &th, &points, &weights, &cells, &mut rng)?;
            let g: LatentDist = LatentFamily::DiscreteGrid { points, weights }.into();
            let opts = CheckOptions { tol: Some(1e-12), ..CheckOptions::default() };
            let fast = check_structure(&m, &th, &g, &f, &opts).map_err(e)?;
            let slow = artstein_bruteforce(&m, &th, &g, &f, 1e-12).map_err(e)?;
            ensure(fast.pass == slow.pass, || {
                format!(
                    "T={periods} instance {i}: collection {} ({}) vs brute force {} ({})",
                    fast.pass, fast.min_slack, slow.pass, slow.min_slack
                )
            })?;
            verdicts[fast.pass as usize] += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!(
        "120 instances agree ({} pass, {} fail) in {:.1}s",
        verdicts[1],
        verdicts[0],
        start.elapsed().as_secs_f64()
    ))
}

fn sharpness_dgp(d: Design, rng: &mut ChaCha8Rng) -> DgpSpec {
    let (mut model, theta, _) = random_structure(d, rng);
    if matches!(d, Design::DynamicObserved | Design::Ordered) {
        model.periods = 2;
    }
    let mut theta = theta;
    if d == Design::Simultaneous {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        theta.alpha = theta.alpha.iter().map(|a: &f64| sign * a.abs()).collect();
    }
    let sigma = rng.gen_range(0.6..1.5);
    let latent = if rng.gen_bool(0.5) {
        LatentDist::gaussian(sigma)
    } else {
        LatentFamily::GaussianCorr { sigma, rho: rng.gen_range(-0.6..0.6) }.into()
    };
    let comp = |w: f64, rng: &mut ChaCha8Rng| MixtureComponent {
        weight: w,
        mean: rng.gen_range(-1.0..1.0),
        on_z: rng.gen_range(-1.0..1.0),
        on_u: rng.gen_range(-1.5..1.5),
        on_y0: rng.gen_range(-1.0..1.0),
        sd: rng.gen_range(0.2..1.2),
    };
    let w = rng.gen_range(0.2..0.8);
    let fixed_effect = FixedEffectSpec { components: vec![comp(w, rng), comp(1.0 - w, rng)] };
    let initial = InitialSpec {
        intercept: rng.gen_range(-1.0..1.0),
        on_c: rng.gen_range(-1.5..1.5),
        on_z: rng.gen_range(-1.0..1.0),
        level_sd: 0.3,
    };
    let n_cells = rng.gen_range(1..=3);
    let cells = (0..n_cells)
        .map(|k| DgpCell {
            cell: CovariateCell::scalar(k, &(0..model.periods).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<_>>()),
            weight: 1.0 / n_cells as f64,
        })
        .collect();
    DgpSpec {
        model,
        theta,
        latent,
        latent_by_y0: BTreeMap::new(),
        fixed_effect,
        initial,
        tie: TieRule::Upper,
        selection: if rng.gen_bool(0.5) { Selection::High } else { Selection::Low },
        cells,
    }
}

impl PartialEq for Design {
    fn eq(&self, other: &Self) -> bool {
        std::mem::discriminant(self) == std::mem::discriminant(other)
    }
}

fn sharpness_smoke() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst = f64::INFINITY;
    for d in DESIGNS {
        for k in 0..20 {
            let dgp = sharpness_dgp(d, &mut rng);
            let f = exact_f(&dgp, 200_000, 1000 + k).map_err(e)?;
            let r = check_structure(&dgp.model, &dgp.theta, &dgp.latent, &f, &CheckOptions::default()).map_err(e)?;
            ensure(r.pass, || format!("{d:?} DGP {k} rejected: min slack {} below -{}", r.min_slack, r.tol))?;
            worst = worst.min(r.min_slack + r.tol);
        }
    }
    Ok(format!("120 true structures pass; smallest margin {worst:.4} in {:.1}s", start.elapsed().as_secs_f64()))
}

fn linear_panel() -> Outcome {
    let dgp = DgpSpec {
        model: ModelSpec::new(Family::Linear, 2, Y0Status::Absent),
        theta: Theta::scalar_beta(1.5),
        latent: LatentDist::gaussian(1.0),
        latent_by_y0: BTreeMap::new(),
        fixed_effect: FixedEffectSpec {
            components: vec![MixtureComponent { weight: 1.0, mean: 0.3, on_z: 2.0, on_u: 0.5, on_y0: 0.0, sd: 1.0 }],
        },
        initial: InitialSpec::default(),
        tie: TieRule::Upper,
        selection: Selection::High,
        cells: [[0.0, 1.0], [2.0, -1.0], [0.4, 0.4]]
            .iter()
            .enumerate()
            .map(|(k, z)| DgpCell { cell: CovariateCell::scalar(k, z), weight: 1.0 / 3.0 })
            .collect(),
    };
    let b = linear_panel_beta(&linear_moments(&dgp).map_err(e)?).map_err(e)?;
    ensure((b - 1.5).abs() <= 1e-8, || format!("β = {b}"))?;
    Ok(format!("β = {b}"))
}

/// The 41 x 41 two-period dynamic design shared by the last two criteria.
fn scan_instance() -> Result<(ModelSpec, ThetaGrid, CondOutcomeDist), String> {
    let dgp = DgpSpec {
        model: ModelSpec::new(Family::BinaryDynamic, 2, Y0Status::Observed),
        theta: Theta::scalar_beta(1.0).with_gamma(0.5),
        latent: LatentDist::gaussian(1.0),
        latent_by_y0: BTreeMap::new(),
        fixed_effect: FixedEffectSpec {
            components: vec![MixtureComponent { weight: 1.0, mean: 0.0, on_z: 0.0, on_u: 0.0, on_y0: 0.0, sd: 0.3 }],
        },
        initial: InitialSpec { intercept: 0.0, on_c: 1.0, on_z: 0.0, level_sd: 0.5 },
        tie: TieRule::Upper,
        selection: Selection::High,
        cells: [[0.93, -1.07], [-1.11, 0.87], [0.05, 0.61]]
            .iter()
            .enumerate()
            .map(|(k, z)| DgpCell { cell: CovariateCell::scalar(k, z), weight: 1.0 / 3.0 })
            .collect(),
    };
    let f = exact_f(&dgp, 1_000_000, 17).map_err(e)?;
    let grid = ThetaGrid {
        base: dgp.theta.clone(),
        axes: vec![GridAxis::linspace("beta", -2.0, 2.0, 41), GridAxis::linspace("gamma", -2.0, 2.0, 41)],
    };
    Ok((dgp.model, grid, f))
}

/// Every inside point of `a` has an inside point of `b` at most one grid
/// step away along each axis.
fn covered_within_a_step(a: &IdentifiedSetGrid, b: &IdentifiedSetGrid, n: usize) -> Option<(usize, usize)> {
    let inside = |g: &IdentifiedSetGrid, i: usize, j: usize| g.points[i * n + j].inside;
    for i in 0..n {
        for j in 0..n {
            if !inside(a, i, j) {
                continue;
            }
            let near = (i.saturating_sub(1)..=(i + 1).min(n - 1))
                .any(|k| (j.saturating_sub(1)..=(j + 1).min(n - 1)).any(|l| inside(b, k, l)));
            if !near {
                return Some((i, j));
            }
        }
    }
    None
}

fn profile_equivalence(inst: &(ModelSpec, ThetaGrid, CondOutcomeDist)) -> Outcome {
    let start = Instant::now();
    let (m, grid, f) = inst;
    let opts = CheckOptions { tol: Some(1e-9), ..CheckOptions::default() };
    let lp = identified_set_scan(m, grid, &GFamily::PiecewiseUniform, f, &opts).map_err(e)?;
    let prof = profile_bounds_2p_binary(m, grid, f, &ProfileOptions { w_grid: None, tol: 1e-9 }).map_err(e)?;
    let n = 41;
    for (x, y, name) in
        [(&lp, &prof, "scan point missing from profile"), (&prof, &lp, "profile point missing from scan")]
    {
        if let Some((i, j)) = covered_within_a_step(x, y, n) {
            return Err(format!("{name}: β = {}, γ = {}", grid.axes[0].values[i], grid.axes[1].values[j]));
        }
    }
    let exact = lp.points.iter().zip(&prof.points).filter(|(a, b)| a.inside == b.inside).count();
    ensure(lp.n_inside() > 0 && lp.n_inside() < lp.points.len(), || {
        format!("{} inside, uninformative", lp.n_inside())
    })?;
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!(
        "{} of 1681 inside; {exact} points agree exactly; in {:.1}s",
        lp.n_inside(),
        start.elapsed().as_secs_f64()
    ))
}

fn outer_nesting(inst: &(ModelSpec, ThetaGrid, CondOutcomeDist)) -> Outcome {
    let (m, grid, f) = inst;
    let opts = CheckOptions { tol: Some(1e-9), ..CheckOptions::default() };
    let sharp = identified_set_scan(m, grid, &GFamily::PiecewiseUniform, f, &opts).map_err(e)?;
    let outer = outer_set_scan(m, grid, f, &opts).map_err(e)?;
    if let Some(k) = (0..sharp.points.len()).find(|k| sharp.points[*k].inside && !outer.points[*k].inside) {
        return Err(format!("grid point {:?} inside the sharp set but outside the outer set", sharp.points[k].theta));
    }
    Ok(format!("{} sharp points inside the outer set of {}", sharp.n_inside(), outer.n_inside()))
}

/// Largest violation by `u` of the closest part of `region`. Continuous
/// outcomes are simulated in floating point, so their equality rows hold
/// only up to rounding.
fn violation(m: &ModelSpec, region: &RegionUnion<Rational>, u: &[f64]) -> Result<f64, String> {
    let space = m.diff_space();
    let b = basis_point(m, u).map_err(e)?;
    let worst = region.parts().iter().map(|part| {
        part.rows()
            .iter()
            .map(|r| {
                let lhs = r.coeffs().iter().fold(Rational::zero(), |acc, (c, k)| acc + k * space.value_at(&b, c));
                let gap = (lhs - r.rhs()).to_f64().unwrap_or(f64::INFINITY);
                match r.rel() {
                    Relation::Eq => gap.abs(),
                    _ => gap.max(0.0),
                }
            })
            .fold(0.0, f64::max)
    });
    Ok(worst.fold(f64::INFINITY, f64::min))
}

fn censored_dgp(rng: &mut ChaCha8Rng) -> DgpSpec {
    let dynamic = rng.gen_bool(0.5);
    let (model, theta) = if dynamic {
        (
            ModelSpec::new(Family::Censored, 3, Y0Status::Observed),
            Theta {
                alpha: vec![rng.gen_range(-1.0..1.0)],
                beta: vec![vec![rng.gen_range(-1.5..1.5)]],
                gamma: vec![rng.gen_range(-0.8..0.8)],
                cuts: vec![],
            },
        )
    } else {
        (
            ModelSpec::new(Family::Censored, 3, Y0Status::Absent),
            Theta {
                alpha: vec![rng.gen_range(-1.0..1.0)],
                beta: vec![vec![rng.gen_range(-1.5..1.5)]],
                ..Default::default()
            },
        )
    };
    let mut cell = CovariateCell::scalar(0, &(0..3).map(|_| rng.gen_range(-1.0..1.0)).collect::<Vec<_>>());
    cell.y3 = Some((0..3).map(|_| rng.gen_range(-0.5..0.5)).collect());
    cell.y2 = Some((0..3).map(|_| vec![rng.gen_range(-1.0..2.0)]).collect());
    DgpSpec {
        model,
        theta,
        latent: LatentDist::gaussian(1.0),
        latent_by_y0: BTreeMap::new(),
        fixed_effect: FixedEffectSpec {
            components: vec![MixtureComponent { weight: 1.0, mean: 0.0, on_z: 0.5, on_u: 0.4, on_y0: 0.3, sd: 0.8 }],
        },
        initial: InitialSpec { intercept: 0.0, on_c: 0.5, on_z: 0.2, level_sd: 0.5 },
        tie: TieRule::Upper,
        selection: Selection::High,
        cells: vec![DgpCell { cell, weight: 1.0 }],
    }
}

fn censored_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut n = 0;
    let mut censored_periods = 0;
    let mut inside = 0;
    while n < 200 {
        let dgp = censored_dgp(&mut rng);
        let m = &dgp.model;
        for unit in simulate_units(&dgp, 10, rng.gen()).map_err(e)? {
            let cell = dgp.unit_cell(&unit);
            let y: &OutcomeSeq = &unit.outcome;
            let r = structural_residual(m, &dgp.theta, y, &cell, &unit.u, &unit.latent).map_err(e)?;
            ensure(r < 1e-9, || format!("simulated record has residual {r}"))?;
            let p = ParamValues::numeric(m, &dgp.theta, &cell).map_err(e)?;
            let fm = ustar(m, &p, &cell, y).map_err(e)?;
            let cf = ustar_closed_form(m, &p, &cell, y).map_err(e)?;
            ensure(fm.region.same_set(&cf), || format!("elimination and direct systems differ for {y:?}"))?;
            let at_truth = violation(m, &fm.region, &unit.u)?;
            ensure(at_truth < 1e-9, || format!("the generating u misses U* by {at_truth} for {y:?}"))?;
            let shift = rng.gen_range(-1.0..1.0);
            let shifted: Vec<f64> = unit.u.iter().map(|v| v + shift).collect();
            let moved: Vec<f64> = unit.u.iter().map(|v| v + rng.gen_range(-1.0..1.0)).collect();
            for point in [&shifted, &moved] {
                let in_u = violation(m, &fm.region, point)? < 1e-7;
                let in_y = feasible_latent(m, &dgp.theta, y, &cell, point).map_err(e)?;
                ensure(in_u == in_y, || format!("duality fails for {y:?} at {point:?}: U* {in_u}, Y* {in_y}"))?;
                inside += in_u as usize;
            }
            censored_periods += y.y.iter().filter(|v| **v == 1).count();
            n += 1;
        }
    }
    Ok(format!(
        "{n} records ({censored_periods} censored periods): zero residuals, elimination equals direct system, duality at {} points ({inside} inside)",
        2 * n
    ))
}

fn main() {
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome| match outcome {
        Ok(msg) => println!("PASS {name}: {msg}"),
        Err(msg) => {
            failed += 1;
            println!("FAIL {name}: {msg}");
        }
    };
    report("golden-tables", golden_tables());
    report("union-count", union_count());
    report("fm-closed-form", fm_closed_form());
    report("duality", duality());
    report("cdc-vs-bruteforce", cdc_vs_bruteforce());
    report("sharpness-smoke", sharpness_smoke());
    report("linear-panel", linear_panel());
    match scan_instance() {
        Ok(inst) => {
            report("profile-equivalence", profile_equivalence(&inst));
            report("outer-nesting", outer_nesting(&inst));
        }
        Err(msg) => {
            report("profile-equivalence", Err(msg.clone()));
            report("outer-nesting", Err(msg));
        }
    }
    report("censored-properties", censored_properties());
    if failed > 0 {
        std::process::exit(1);
    }
}
