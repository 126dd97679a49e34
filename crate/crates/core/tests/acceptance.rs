//! Acceptance suite: one test per criterion, each printing a pass/fail line
//! with the measured quantities at the pinned tolerances.

use mapfluct::ergodicity::{
    beta_mixing_stationary, fit_rate, tv_decay_curve, EmpiricalMeasure, RateModel,
};
use mapfluct::exponents::{
    drift_dichotomy, invariant_density, invariant_measure, lyapunov_drift_report, resolvent,
    spectral_bound_check, stationary_distribution, DriftVerdict, TestFn,
};
use mapfluct::ladder_sim::{estimate_potential_measure, mc_resolvent, simulate_ladder_overshoot};
use mapfluct::lamperti::{lamperti_kiu_forward, lamperti_kiu_inverse, lamperti_stable_spec};
use mapfluct::law::JumpLaw;
use mapfluct::model::{LadderSpec, LevyComponentSpec, MapSpec};
use mapfluct::rng::{Rng64, RngStream};
use mapfluct::simulate::{simulate_path, SimOptions};
use mapfluct::vigon::{vigon_check, VigonParams};
use mapfluct::quad;

/// The reference two-phase ladder subordinator used across criteria.
fn criterion_ladder() -> LadderSpec {
    LadderSpec {
        drifts: vec![1.0, 0.5],
        jumps: vec![
            Some((1.0, JumpLaw::exponential(2.0))),
            Some((2.0, JumpLaw::exponential(3.0))),
        ],
        q: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
        transitions: vec![
            vec![None, Some(JumpLaw::exponential(1.0))],
            vec![Some(JumpLaw::exponential(1.0)), None],
        ],
        killing: vec![0.0, 0.0],
    }
}

fn report(criterion: &str, pass: bool, detail: String) {
    println!(
        "criterion {criterion}: {} -- {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion}: {detail}");
}

#[test]
fn criterion_01_resolvent_identity_monte_carlo() {
    let t0 = std::time::Instant::now();
    let ladder = criterion_ladder();
    let f = TestFn::exp(-1.0);
    let lam = 1.0;
    let n_paths = 200_000;
    let mut worst_diff: f64 = 0.0;
    let mut worst_se_ratio: f64 = 0.0;
    let mut pass = true;
    for (k, &x) in [0.0, 0.7].iter().enumerate() {
        for i in 0..2 {
            let formula = resolvent(&ladder, &f, x, i, lam).unwrap();
            let (mc, se) = mc_resolvent(
                &ladder,
                &f,
                x,
                i,
                lam,
                n_paths,
                RngStream::new(101, (2 * k + i) as u64),
            )
            .unwrap();
            let diff = (mc - formula).abs();
            worst_diff = worst_diff.max(diff);
            worst_se_ratio = worst_se_ratio.max(diff / se);
            pass &= diff <= 3.0 * se && diff <= 0.01;
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    pass &= elapsed < 90.0;
    report(
        "01 resolvent identity",
        pass,
        format!("max |MC - formula| = {worst_diff:.2e} ({worst_se_ratio:.2} SE), runtime {elapsed:.1}s < 90s"),
    );
}

fn random_law(rng: &mut Rng64) -> JumpLaw {
    match rng.below(4) {
        0 => JumpLaw::exponential(0.5 + 3.0 * rng.uniform()),
        1 => JumpLaw::uniform(0.2 * rng.uniform(), 0.5 + 2.0 * rng.uniform()),
        2 => JumpLaw::point_mass(0.1 + rng.uniform()),
        _ => JumpLaw::pareto(1.2 + 2.0 * rng.uniform(), 0.2 + rng.uniform()),
    }
}

fn random_unkilled_ladder(rng: &mut Rng64) -> LadderSpec {
    let n = 1 + rng.below(3) as usize;
    let drifts: Vec<f64> = (0..n).map(|_| 0.2 + 1.8 * rng.uniform()).collect();
    let jumps: Vec<Option<(f64, JumpLaw)>> = (0..n)
        .map(|_| {
            if rng.uniform() < 0.75 {
                Some((0.3 + 1.7 * rng.uniform(), random_law(rng)))
            } else {
                None
            }
        })
        .collect();
    // fully supported race-around rate matrix keeps Q+ irreducible
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q[i][j] = 0.3 + rng.uniform();
            }
        }
        q[i][i] = -(0..n).filter(|j| *j != i).map(|j| q[i][j]).sum::<f64>();
    }
    let mut transitions: Vec<Vec<Option<JumpLaw>>> = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.uniform() < 0.7 {
                transitions[i][j] = Some(random_law(rng));
            }
        }
    }
    LadderSpec { drifts, jumps, q, transitions, killing: vec![0.0; n] }
}

#[test]
fn criterion_02_constant_resolvent_cancellation() {
    let mut rng = RngStream::new(102, 0).rng();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let ladder = random_unkilled_ladder(&mut rng);
        for lam in [0.37, 1.0, 2.5] {
            for x in [0.0, 1.3] {
                for i in 0..ladder.phases() {
                    let u = resolvent(&ladder, &TestFn::one(), x, i, lam).unwrap();
                    worst = worst.max((u - 1.0 / lam).abs());
                }
            }
        }
    }
    report(
        "02 constant-function resolvent",
        worst < 1e-10,
        format!("max |U_lam 1 - 1/lam| = {worst:.2e} over 20 randomized unkilled specs"),
    );
}

#[test]
fn criterion_03_stationary_law_of_overshoots() {
    let ladder = criterion_ladder();
    let edges: Vec<f64> = (0..=200).map(|k| k as f64 * 0.03).collect();
    let rho = stationary_distribution(&ladder, &edges).unwrap();
    let n_paths = 100_000u64;
    let mut emp = EmpiricalMeasure::new(edges.clone(), 2);
    let stream = RngStream::new(103, 0);
    for p in 0..n_paths {
        let mut rng = stream.substream(p).rng();
        let s = simulate_ladder_overshoot(&ladder, &[50.0], 0.0, 0, &mut rng).unwrap();
        emp.push(s[0].overshoot, s[0].phase);
    }
    let tv = mapfluct::ergodicity::tv_distance(&emp, &rho).unwrap();
    let total = emp.total as f64;
    let mut atom_diff: f64 = 0.0;
    for i in 0..2 {
        atom_diff = atom_diff.max((emp.zero_atom[i] as f64 / total - rho.atoms[i]).abs());
    }
    let creep_freq: f64 = emp.zero_atom.iter().map(|c| *c as f64).sum::<f64>() / total;
    let rho_atoms: f64 = rho.atoms.iter().sum();
    let pass = tv <= 0.03 && atom_diff <= 0.01 && (creep_freq - rho_atoms).abs() <= 0.01;
    report(
        "03 stationary overshoot law",
        pass,
        format!(
            "TV = {tv:.4} <= 0.03, max atom gap {atom_diff:.4}, creep freq {creep_freq:.4} vs {rho_atoms:.4}"
        ),
    );
}

#[test]
fn criterion_04_invariant_mass_closed_form() {
    let ladder = criterion_ladder();
    let edges: Vec<f64> = (0..=10).map(|k| k as f64).collect();
    let chi = invariant_measure(&ladder, &edges).unwrap();
    let pi_plus = mapfluct::model::stationary_of_q(&ladder.q).unwrap();
    // independent quadrature of the density plus the atoms
    let mut mass = 0.0;
    for i in 0..2 {
        mass += chi.atoms[i];
        mass += quad::integrate_upper(|y| invariant_density(&ladder, &pi_plus, y, i), 0.0, 1e-11);
    }
    let err = (mass - chi.total_mass).abs();
    report(
        "04 invariant mass",
        err < 1e-8,
        format!("quadrature {mass:.12} vs closed form {:.12} (|diff| = {err:.2e})", chi.total_mass),
    );
}

fn random_map_spec(rng: &mut Rng64) -> MapSpec {
    let n = 1 + rng.below(3) as usize;
    let mut components = Vec::with_capacity(n);
    for _ in 0..n {
        let jumps = match rng.below(3) {
            0 => mapfluct::model::JumpComponent::None,
            _ => mapfluct::model::JumpComponent::CompoundPoisson {
                rate: 0.3 + 2.0 * rng.uniform(),
                law: match rng.below(4) {
                    0 => JumpLaw::exponential(0.5 + 2.0 * rng.uniform()),
                    1 => JumpLaw::negated(JumpLaw::exponential(0.5 + 2.0 * rng.uniform())),
                    2 => JumpLaw::uniform(-1.0 - rng.uniform(), 1.0 + rng.uniform()),
                    _ => JumpLaw::FiniteMixture {
                        weights: vec![0.4, 0.6],
                        laws: vec![
                            JumpLaw::point_mass(rng.uniform() - 0.5),
                            JumpLaw::uniform(0.0, 1.0 + rng.uniform()),
                        ],
                    },
                },
            },
        };
        components.push(LevyComponentSpec {
            drift: 2.0 * rng.uniform() - 1.0,
            gaussian: if rng.uniform() < 0.5 { rng.uniform() } else { 0.0 },
            jumps,
            killing: 0.0,
        });
    }
    let mut q = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                q[i][j] = 0.2 + rng.uniform();
            }
        }
        q[i][i] = -(0..n).filter(|j| *j != i).map(|j| q[i][j]).sum::<f64>();
    }
    let mut transitions: Vec<Vec<Option<JumpLaw>>> = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.uniform() < 0.6 {
                transitions[i][j] = Some(match rng.below(3) {
                    0 => JumpLaw::point_mass(rng.uniform() - 0.5),
                    1 => JumpLaw::uniform(-0.5, 0.5 + rng.uniform()),
                    _ => JumpLaw::negated(JumpLaw::exponential(1.0 + rng.uniform())),
                });
            }
        }
    }
    MapSpec { components, q, transitions }
}

#[test]
fn criterion_05_spectral_bound() {
    let thetas: Vec<f64> = (-100..=100).map(|k| k as f64 * 0.5).collect();
    let lambdas = [0.1, 1.0, 10.0];
    let mut rng = RngStream::new(105, 0).rng();
    let mut worst_real = f64::NEG_INFINITY;
    let mut worst_det = f64::INFINITY;
    for _ in 0..20 {
        let spec = random_map_spec(&mut rng);
        let r = spectral_bound_check(&spec, &thetas, &lambdas);
        worst_real = worst_real.max(r.max_real_part);
        for (_, d) in r.min_abs_det {
            worst_det = worst_det.min(d);
        }
    }
    report(
        "05 spectral bound",
        worst_real <= 1e-9 && worst_det > 0.0,
        format!("max Re(eig) = {worst_real:.2e} <= 1e-9; min |det(lam I - Psi)| = {worst_det:.2e} > 0"),
    );
}

#[test]
fn criterion_06_renewal_subadditivity() {
    let ladder = criterion_ladder();
    let edges: Vec<f64> = (0..=240).map(|k| k as f64 * 0.05).collect();
    let grid =
        estimate_potential_measure(&ladder, &edges, 50_000, RngStream::new(106, 0)).unwrap();
    let points: Vec<f64> = (1..=10).map(|k| k as f64 * 0.55).collect();
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut pass = true;
    for i in 0..2 {
        for j in 0..2 {
            for &x in &points {
                for &y in &points {
                    let lhs = grid.cumulative(i, j, x + y) - grid.cumulative(i, j, x);
                    let rhs = grid.cumulative(j, j, y);
                    let se = grid.cumulative_se(i, j, x + y) + grid.cumulative_se(j, j, y);
                    let slack = lhs - rhs - 3.0 * se;
                    worst = worst.max(slack);
                    pass &= slack <= 0.0;
                }
            }
        }
    }
    report(
        "06 renewal subadditivity",
        pass,
        format!("max violation of U_ij(x+y) - U_ij(x) <= U_jj(y) + 3 SE: {worst:.3e}"),
    );
}

#[test]
fn criterion_07_vigon_equations() {
    let t0 = std::time::Instant::now();
    // two-phase, transient, creeping class, exponential jumps of both signs
    let spec = MapSpec {
        components: vec![
            LevyComponentSpec::cpp(
                0.7,
                0.9,
                JumpLaw::FiniteMixture {
                    weights: vec![0.5, 0.5],
                    laws: vec![
                        JumpLaw::exponential(1.5),
                        JumpLaw::negated(JumpLaw::exponential(1.2)),
                    ],
                },
            ),
            LevyComponentSpec::cpp(
                0.5,
                1.2,
                JumpLaw::FiniteMixture {
                    weights: vec![0.5, 0.5],
                    laws: vec![
                        JumpLaw::exponential(2.0),
                        JumpLaw::negated(JumpLaw::exponential(1.5)),
                    ],
                },
            ),
        ],
        q: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
        transitions: vec![
            vec![None, Some(JumpLaw::exponential(4.0))],
            vec![Some(JumpLaw::exponential(4.0)), None],
        ],
    };
    assert_eq!(drift_dichotomy(&spec).unwrap().verdict, DriftVerdict::Transient);
    let params = VigonParams {
        n_paths: 100_000,
        horizon: 60.0,
        edges: (0..=13).map(|k| k as f64 * 0.2).collect(),
        potential_edges: (0..=240).map(|k| k as f64 * 0.05).collect(),
        min_events: 100,
    };
    let vr = vigon_check(&spec, &params, RngStream::new(107, 0)).unwrap();
    let mut worst: f64 = 0.0;
    let mut used = 0;
    let mut pass = true;
    for r in &vr.rows {
        if r.lo >= 0.2 - 1e-12 && r.hi <= 2.0 + 1e-12 {
            if let Some(ratio) = r.ratio {
                used += 1;
                worst = worst.max((ratio - 1.0).abs());
                pass &= (0.9..=1.1).contains(&ratio);
            }
        }
    }
    let elapsed = t0.elapsed().as_secs_f64();
    pass &= used >= 8 && elapsed < 300.0;
    report(
        "07 vigon equations",
        pass,
        format!("{used} usable bins on [0.2, 2], max |ratio - 1| = {worst:.3}, runtime {elapsed:.0}s < 300s"),
    );
}

#[test]
fn criterion_08_lamperti_stable_structure() {
    let spec = lamperti_stable_spec(0.5, 0.5).unwrap();
    let f = spec.transitions[0][1].as_ref().unwrap();
    let mass = f.integrate(|_| 1.0, 1e-10);
    let mass_ok = (mass - 1.0).abs() < 1e-8;
    let levy = spec.components[0].levy_measure().unwrap();
    let finite = levy.exp_moment_tail_finite(0.25);
    let finite_value = levy.exp_moment_above(0.25, 1.0).unwrap_finite();
    // numerical divergence at lam = alpha: the truncated integral grows
    // without bound (linearly here) as the cap increases
    let truncated = |cap: f64| {
        quad::integrate(|x| (0.5 * x).exp() * levy.density(x), 1.0, cap, 1e-10)
    };
    let divergent = !levy.exp_moment_tail_finite(0.5)
        && truncated(400.0) > 4.0 * truncated(40.0)
        && truncated(40.0) > 1.5 * truncated(20.0);
    let d = drift_dichotomy(&spec).unwrap();
    let pass = mass_ok && finite && finite_value.is_finite() && divergent
        && d.verdict == DriftVerdict::Transient;
    report(
        "08 lamperti-stable structure",
        pass,
        format!(
            "switch mass {mass:.10}, moment(0.25) = {finite_value:.4}, divergent at 0.5: {divergent}, drift {:.4} (transient)",
            d.drift
        ),
    );
}

/// The light-tailed half of the decay-shape criterion. The fit is faithful
/// to the stated design: the pinned spec, the pinned t grid, exclusion only
/// by bootstrap standard errors. The reference chain regenerates on levels
/// of order one, so its true total variation falls below any affordable
/// Monte Carlo resolution beyond t = 5 (TV(40) is of order 1e-17), and the
/// floor/SE ratio is invariant in the path count, so no design within the
/// stated criterion can reach R^2 >= 0.9. Expected to fail; kept faithful
/// rather than loosened.
#[test]
fn criterion_09a_tv_decay_exponential() {
    let ladder = criterion_ladder();
    let edges: Vec<f64> = (0..=60).map(|k| k as f64 * 0.1).collect();
    let rho = stationary_distribution(&ladder, &edges).unwrap();
    let curve = tv_decay_curve(
        &ladder,
        &rho,
        (0.0, 0),
        &[2.0, 5.0, 10.0, 20.0, 40.0],
        1_000_000,
        200,
        RngStream::new(109, 0),
    )
    .unwrap();
    let fit = fit_rate(&curve, RateModel::Exponential).unwrap();
    let pass = fit.rate > 0.0 && fit.r_squared >= 0.9;
    let tvs: Vec<String> = curve.iter().map(|p| format!("{:.4}", p.tv)).collect();
    report(
        "09a tv decay (exponential)",
        pass,
        format!(
            "rate {:.3}, R^2 = {:.3} (need >= 0.9); TV = [{}]; the chain sits at the Monte Carlo floor beyond t = 5",
            fit.rate,
            fit.r_squared,
            tvs.join(", ")
        ),
    );
}

#[test]
fn criterion_09b_tv_decay_polynomial() {
    // Pareto(4)-jump variant of the reference ladder, scaled so the
    // polynomial tail is resolvable across the pinned grid
    let ladder = LadderSpec {
        drifts: vec![1.0, 0.5],
        jumps: vec![
            Some((1.0, JumpLaw::pareto(4.0, 3.0))),
            Some((2.0, JumpLaw::pareto(4.0, 3.0))),
        ],
        q: vec![vec![-1.0, 1.0], vec![1.0, -1.0]],
        transitions: vec![
            vec![None, Some(JumpLaw::exponential(1.0))],
            vec![Some(JumpLaw::exponential(1.0)), None],
        ],
        killing: vec![0.0, 0.0],
    };
    let edges: Vec<f64> = (0..=60).map(|k| k as f64 * 0.5).collect();
    let rho = stationary_distribution(&ladder, &edges).unwrap();
    let curve = tv_decay_curve(
        &ladder,
        &rho,
        (0.0, 0),
        &[2.0, 5.0, 10.0, 20.0, 40.0],
        400_000,
        200,
        RngStream::new(110, 0),
    )
    .unwrap();
    let fit = fit_rate(&curve, RateModel::Polynomial).unwrap();
    let pass = fit.rate < 0.0 && fit.r_squared >= 0.8;
    report(
        "09b tv decay (polynomial)",
        pass,
        format!("exponent {:.3} < 0, R^2 = {:.3} >= 0.8", fit.rate, fit.r_squared),
    );
}

#[test]
fn criterion_10_beta_mixing() {
    let ladder = criterion_ladder();
    let edges: Vec<f64> = (0..=24).map(|k| k as f64 * 0.25).collect();
    let rho = stationary_distribution(&ladder, &edges).unwrap();
    let curve = beta_mixing_stationary(
        &ladder,
        &rho,
        &[0.0, 5.0, 10.0, 20.0, 40.0],
        32,
        6_000,
        RngStream::new(111, 0),
    )
    .unwrap();
    let mut nonincreasing = true;
    for w in curve.windows(2) {
        nonincreasing &= w[1].beta <= w[0].beta + 3.0 * (w[0].se + w[1].se);
    }
    let last = curve.last().unwrap();
    let betas: Vec<String> = curve.iter().map(|p| format!("{:.3}", p.beta)).collect();
    report(
        "10 beta mixing",
        nonincreasing && last.beta < 0.05,
        format!("beta = [{}], nonincreasing up to 3 SE, beta(40) = {:.4} < 0.05", betas.join(", "), last.beta),
    );
}

#[test]
fn criterion_11_lyapunov_drift() {
    let ladder = criterion_ladder();
    let grid: Vec<f64> = (0..=80).map(|k| k as f64 * 0.25).collect();
    let r = lyapunov_drift_report(&ladder, 0.5, &grid).unwrap();
    report(
        "11 lyapunov drift",
        r.holds && r.max_violation <= 1e-8,
        format!("b = {:.6}, max grid violation of R V <= V/2 + b: {:.2e}", r.b, r.max_violation),
    );
}

#[test]
fn criterion_12_lamperti_round_trip() {
    let spec = MapSpec {
        components: vec![
            LevyComponentSpec::cpp(0.8, 1.0, JumpLaw::uniform(-0.5, 1.0)),
            LevyComponentSpec::cpp(-0.4, 0.7, JumpLaw::exponential(2.0)),
        ],
        q: vec![vec![-1.0, 1.0], vec![1.5, -1.5]],
        transitions: vec![
            vec![None, Some(JumpLaw::uniform(-0.3, 0.3))],
            vec![Some(JumpLaw::point_mass(0.2)), None],
        ],
    };
    let opts = SimOptions::default();
    let mut sup: f64 = 0.0;
    for seed in 0..100u64 {
        let alpha = 0.3 + 0.4 * (seed as f64 / 100.0);
        let mut rng = RngStream::new(112, seed).rng();
        let path =
            simulate_path(&spec, 0.3, (seed % 2) as usize, 5.0, &opts, &mut rng).unwrap();
        let z = lamperti_kiu_inverse(&path, alpha).unwrap();
        let back = lamperti_kiu_forward(&z, alpha).unwrap();
        assert_eq!(back.pieces.len(), path.pieces.len());
        for (a, b) in path.pieces.iter().zip(&back.pieces) {
            assert_eq!(a.phase, b.phase);
            sup = sup
                .max((a.t0 - b.t0).abs())
                .max((a.t1 - b.t1).abs())
                .max((a.x0 - b.x0).abs())
                .max((a.value_left() - b.value_left()).abs());
        }
    }
    report(
        "12 lamperti round trip",
        sup < 1e-9,
        format!("sup-norm over 100 random paths: {sup:.2e} < 1e-9"),
    );
}
