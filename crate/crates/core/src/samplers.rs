//! Exact samplers for the Levy building blocks: compound Poisson event
//! lists, Brownian-with-drift increments, strictly stable increments in the
//! (alpha, rho) parametrization, and small-jump-truncated increments for the
//! infinite-activity components.

use crate::error::{MapError, Result};
use crate::law::{log_stable_lower_mass, stable_constants, JumpLaw};
use crate::model::{JumpComponent, LevyComponentSpec};
use crate::quad;
use crate::rng::Rng64;
use serde::{Deserialize, Serialize};

/// Jump events of one phase segment: strictly increasing times in (0, T].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventList {
    pub horizon: f64,
    pub events: Vec<(f64, f64)>,
}

impl EventList {
    pub fn total_jump(&self) -> f64 {
        self.events.iter().map(|(_, s)| s).sum()
    }
}

/// Poisson(rate * T) events with i.i.d. sizes and uniform order-statistic
/// times.
pub fn sample_cpp_events(rate: f64, law: &JumpLaw, horizon: f64, rng: &mut Rng64) -> EventList {
    debug_assert!(rate > 0.0 && horizon >= 0.0);
    let n = rng.poisson(rate * horizon);
    let mut times: Vec<f64> = (0..n).map(|_| rng.uniform() * horizon).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let events = times.into_iter().map(|t| (t, law.sample(rng))).collect();
    EventList { horizon, events }
}

/// Normal(a dt, b^2 dt) increment; exact for the degenerate cases.
pub fn sample_brownian_drift(a: f64, b: f64, dt: f64, rng: &mut Rng64) -> f64 {
    if dt == 0.0 {
        return 0.0;
    }
    if b == 0.0 {
        return a * dt;
    }
    a * dt + b * dt.sqrt() * rng.normal()
}

/// Skewness beta and overall scale c of the stable exponent
/// c |theta|^alpha (1 - i beta tan(pi alpha / 2) sgn theta) in the
/// (alpha, rho) parametrization.
pub fn stable_beta_scale(alpha: f64, rho: f64) -> (f64, f64) {
    let half = std::f64::consts::PI * alpha * (rho - 0.5);
    if (alpha - 1.0).abs() < 1e-12 {
        return (0.0, 1.0); // symmetric Cauchy only
    }
    let beta = half.tan() / (std::f64::consts::PI * alpha / 2.0).tan();
    let scale = half.cos();
    (beta, scale)
}

/// One strictly alpha-stable increment over time `dt`, positivity parameter
/// rho, Chambers-Mallows-Stuck construction. Excludes the asymmetric
/// alpha = 1 case.
pub fn sample_stable_increment(alpha: f64, rho: f64, dt: f64, rng: &mut Rng64) -> Result<f64> {
    check_stable_params(alpha, rho)?;
    let (beta, scale) = stable_beta_scale(alpha, rho);
    let u = std::f64::consts::PI * (rng.uniform() - 0.5);
    let w = rng.exponential();
    let x = if (alpha - 1.0).abs() < 1e-12 {
        u.tan()
    } else {
        let t = beta * (std::f64::consts::PI * alpha / 2.0).tan();
        let b = t.atan() / alpha;
        let s = (1.0 + t * t).powf(0.5 / alpha);
        s * (alpha * (u + b)).sin() / u.cos().powf(1.0 / alpha)
            * ((u - alpha * (u + b)).cos() / w).powf((1.0 - alpha) / alpha)
    };
    Ok(scale.powf(1.0 / alpha) * dt.powf(1.0 / alpha) * x)
}

fn check_stable_params(alpha: f64, rho: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(MapError::Unsupported(format!("stable index {alpha} outside (0,2)")));
    }
    if (alpha - 1.0).abs() < 1e-12 && (rho - 0.5).abs() > 1e-12 {
        return Err(MapError::Unsupported(
            "alpha = 1 is supported only in the symmetric case".into(),
        ));
    }
    let (lo, hi) = stable_rho_range(alpha);
    if !(rho >= lo && rho <= hi) {
        return Err(MapError::Unsupported(format!(
            "positivity parameter {rho} outside the admissible range [{lo}, {hi}] for alpha {alpha}"
        )));
    }
    Ok(())
}

/// Admissible positivity parameters for a strictly stable law.
pub fn stable_rho_range(alpha: f64) -> (f64, f64) {
    if alpha <= 1.0 {
        (0.0, 1.0)
    } else {
        (1.0 - 1.0 / alpha, 1.0 / alpha)
    }
}

/// rho from the asymmetry constants of the Levy density.
pub fn stable_rho_from_constants(alpha: f64, c_plus: f64, c_minus: f64) -> f64 {
    if c_plus == c_minus {
        return 0.5;
    }
    let beta = (c_plus - c_minus) / (c_plus + c_minus);
    0.5 + (beta * (std::f64::consts::PI * alpha / 2.0).tan()).atan() / (std::f64::consts::PI * alpha)
}

/// Pre-computed small-jump truncation of one infinite-activity component:
/// the retained jumps form a compound Poisson process; the removed mean is
/// compensated where strict stability demands it; optionally the removed
/// variance is reinstated as Gaussian noise.
#[derive(Debug, Clone)]
pub struct TruncatedComponent {
    pub drift: f64,
    pub gaussian: f64,
    pub rate: f64,
    mass_plus: f64,
    mass_minus: f64,
    kind: TruncKind,
    epsilon: f64,
}

#[derive(Debug, Clone)]
enum TruncKind {
    Stable { alpha: f64 },
    LogStable { alpha: f64, cu: f64, cl: f64 },
    /// Finite activity to begin with: exact event sampling, jumps at or
    /// below epsilon dropped to honor the truncation contract.
    Cpp { rate: f64, law: JumpLaw },
    DriftOnly,
}

impl TruncatedComponent {
    /// Build the truncation of `component` at small-jump cutoff `epsilon`.
    /// `gaussian_refinement` reinstates the removed small-jump variance as an
    /// additional Brownian component.
    pub fn new(component: &LevyComponentSpec, epsilon: f64, gaussian_refinement: bool) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(MapError::Unsupported(format!(
                "truncation cutoff must lie in (0,1); got {epsilon}"
            )));
        }
        let mut drift = component.drift;
        let mut gaussian = component.gaussian;
        match &component.jumps {
            JumpComponent::None => Ok(TruncatedComponent {
                drift,
                gaussian,
                rate: 0.0,
                mass_plus: 0.0,
                mass_minus: 0.0,
                kind: TruncKind::DriftOnly,
                epsilon,
            }),
            JumpComponent::CompoundPoisson { rate, law } => Ok(TruncatedComponent {
                drift,
                gaussian,
                rate: *rate,
                mass_plus: 0.0,
                mass_minus: 0.0,
                kind: TruncKind::Cpp { rate: *rate, law: law.clone() },
                epsilon,
            }),
            JumpComponent::StableDensity { alpha, c_plus, c_minus } => {
                let a = *alpha;
                let mass_plus = c_plus * epsilon.powf(-a) / a;
                let mass_minus = c_minus * epsilon.powf(-a) / a;
                if a > 1.0 {
                    // strict stability centers the process: compensate the
                    // full mean of the retained jumps
                    drift -= (c_plus - c_minus) * epsilon.powf(1.0 - a) / (a - 1.0);
                }
                if gaussian_refinement {
                    let var = (c_plus + c_minus) * epsilon.powf(2.0 - a) / (2.0 - a);
                    gaussian = (gaussian * gaussian + var).sqrt();
                }
                Ok(TruncatedComponent {
                    drift,
                    gaussian,
                    rate: mass_plus + mass_minus,
                    mass_plus,
                    mass_minus,
                    kind: TruncKind::Stable { alpha: a },
                    epsilon,
                })
            }
            JumpComponent::LampertiStable { alpha, rho, phase } => {
                let a = *alpha;
                if !(a < 1.0) {
                    return Err(MapError::Unsupported(
                        "log-stable components require alpha in (0,1)".into(),
                    ));
                }
                let (cp, cm) = stable_constants(a, *rho);
                let (cu, cl) = if *phase >= 0 { (cp, cm) } else { (cm, cp) };
                let mass_plus = cu / a * (epsilon.exp() - 1.0).powf(-a);
                let mass_minus = log_stable_lower_mass(-epsilon, a, cl);
                if gaussian_refinement {
                    let law = if *phase >= 0 {
                        JumpLaw::LogStablePositive { alpha: a, rho: *rho }
                    } else {
                        JumpLaw::LogStableNegative { alpha: a, rho: *rho }
                    };
                    let var = quad::integrate_tanh_sinh(|x| x * x * law.density(x), -epsilon, 0.0, 1e-12)
                        + quad::integrate_tanh_sinh(|x| x * x * law.density(x), 0.0, epsilon, 1e-12);
                    gaussian = (gaussian * gaussian + var).sqrt();
                }
                Ok(TruncatedComponent {
                    drift,
                    gaussian,
                    rate: mass_plus + mass_minus,
                    mass_plus,
                    mass_minus,
                    kind: TruncKind::LogStable { alpha: a, cu, cl },
                    epsilon,
                })
            }
        }
    }

    /// One retained-jump size (|x| > epsilon), by inverse transform on the
    /// closed-form tails.
    pub fn sample_jump(&self, rng: &mut Rng64) -> f64 {
        match &self.kind {
            TruncKind::DriftOnly => 0.0,
            TruncKind::Cpp { law, .. } => law.sample(rng),
            TruncKind::Stable { alpha, .. } => {
                let u = rng.uniform() * self.rate;
                if u < self.mass_plus {
                    // tail mass v in (0, mass_plus): x = eps * (v/mass_plus)^{-1/alpha}
                    let v = (u / self.mass_plus).max(f64::MIN_POSITIVE);
                    self.epsilon * v.powf(-1.0 / alpha)
                } else {
                    let v = ((u - self.mass_plus) / self.mass_minus).max(f64::MIN_POSITIVE);
                    -self.epsilon * v.powf(-1.0 / alpha)
                }
            }
            TruncKind::LogStable { alpha, cu, cl } => {
                let u = rng.uniform() * self.rate;
                if u < self.mass_plus {
                    // invert (cu/a)(e^x - 1)^{-a} = m on x > eps
                    let m = (u).max(f64::MIN_POSITIVE);
                    (1.0 + (alpha * m / cu).powf(-1.0 / alpha)).ln()
                } else {
                    // invert lower mass (cl/a)((1-e^y)^{-a} - 1) = m on y < -eps
                    let m = (self.rate - u).max(f64::MIN_POSITIVE).min(self.mass_minus);
                    (1.0 - (1.0 + alpha * m / cl).powf(-1.0 / alpha)).ln()
                }
            }
        }
    }

    /// Increment over `dt`: drift + Gaussian + retained compound Poisson
    /// jumps.
    pub fn increment(&self, dt: f64, rng: &mut Rng64) -> f64 {
        let mut x = sample_brownian_drift(self.drift, self.gaussian, dt, rng);
        match &self.kind {
            TruncKind::DriftOnly => {}
            TruncKind::Cpp { rate, law } => {
                // exact event sampling; the truncation only drops jumps at or
                // below the cutoff, so a cutoff below the support floor
                // reproduces the exact sampler path for path
                let events = sample_cpp_events(*rate, law, dt, rng);
                let mut jump_sum = 0.0;
                for (_, s) in events.events {
                    if s.abs() > self.epsilon {
                        jump_sum += s;
                    }
                }
                x += jump_sum;
            }
            _ => {
                let n = rng.poisson(self.rate * dt);
                for _ in 0..n {
                    x += self.sample_jump(rng);
                }
            }
        }
        x
    }
}

/// Convenience wrapper mirroring the one-shot sampler shape.
pub fn sample_truncated_levy_segment(
    component: &LevyComponentSpec,
    epsilon: f64,
    dt: f64,
    rng: &mut Rng64,
) -> Result<f64> {
    Ok(TruncatedComponent::new(component, epsilon, false)?.increment(dt, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn cpp_zero_horizon_empty() {
        let mut rng = RngStream::new(1, 0).rng();
        let ev = sample_cpp_events(2.0, &JumpLaw::exponential(2.0), 0.0, &mut rng);
        assert!(ev.events.is_empty());
    }

    #[test]
    fn cpp_event_count_and_sizes() {
        let mut rng = RngStream::new(2, 0).rng();
        let reps = 10_000;
        let mut counts = 0.0;
        let mut sizes = Vec::new();
        for _ in 0..reps {
            let ev = sample_cpp_events(2.0, &JumpLaw::exponential(2.0), 10.0, &mut rng);
            counts += ev.events.len() as f64;
            sizes.extend(ev.events.iter().map(|(_, s)| *s));
        }
        let mean_count = counts / reps as f64;
        let se_count = (20.0f64 / reps as f64).sqrt();
        assert!((mean_count - 20.0).abs() < 3.0 * se_count, "{mean_count}");
        let mean_size = sizes.iter().sum::<f64>() / sizes.len() as f64;
        let se_size = 0.5 / (sizes.len() as f64).sqrt();
        assert!((mean_size - 0.5).abs() < 3.0 * se_size, "{mean_size}");
        // strictly increasing times within each draw checked on the last one
        let ev = sample_cpp_events(2.0, &JumpLaw::exponential(2.0), 10.0, &mut rng);
        for w in ev.events.windows(2) {
            assert!(w[0].0 < w[1].0);
        }
    }

    #[test]
    fn cpp_reproducible_bitwise() {
        let mut a = RngStream::new(9, 3).rng();
        let mut b = RngStream::new(9, 3).rng();
        let e1 = sample_cpp_events(1.5, &JumpLaw::pareto(2.0, 1.0), 50.0, &mut a);
        let e2 = sample_cpp_events(1.5, &JumpLaw::pareto(2.0, 1.0), 50.0, &mut b);
        assert_eq!(e1, e2);
    }

    #[test]
    fn brownian_degenerate_cases() {
        let mut rng = RngStream::new(3, 0).rng();
        assert_eq!(sample_brownian_drift(5.0, 2.0, 0.0, &mut rng), 0.0);
        assert_eq!(sample_brownian_drift(1.0, 0.0, 3.0, &mut rng), 3.0);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_brownian_drift(0.0, 1.0, 1.0, &mut rng)).collect();
        let var = xs.iter().map(|x| x * x).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn stable_positivity_parameter() {
        let mut rng = RngStream::new(4, 0).rng();
        let n = 100_000;
        for (alpha, rho) in [(0.5, 0.5), (0.7, 0.6), (1.5, 0.55)] {
            let pos = (0..n)
                .filter(|_| sample_stable_increment(alpha, rho, 1.0, &mut rng).unwrap() >= 0.0)
                .count() as f64
                / n as f64;
            assert!((pos - rho).abs() < 0.005, "alpha={alpha} rho={rho}: {pos}");
        }
    }

    #[test]
    fn stable_tail_constant() {
        // P(X > x) ~ (c+/alpha) x^{-alpha}
        let (alpha, rho) = (0.6, 0.5);
        let (cp, _) = stable_constants(alpha, rho);
        let mut rng = RngStream::new(5, 0).rng();
        let n = 2_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| sample_stable_increment(alpha, rho, 1.0, &mut rng).unwrap())
            .collect();
        for x in [10.0, 30.0, 100.0] {
            let emp = xs.iter().filter(|v| **v > x).count() as f64 / n as f64;
            let theo = cp / alpha * x.powf(-alpha);
            assert!(
                (emp / theo - 1.0).abs() < 0.1,
                "x={x}: empirical {emp:.3e} vs {theo:.3e}"
            );
        }
    }

    #[test]
    fn stable_self_similarity_two_sample_ks() {
        let (alpha, rho) = (0.8, 0.4);
        let mut rng = RngStream::new(6, 0).rng();
        let n = 100_000;
        let mut a: Vec<f64> = (0..n)
            .map(|_| sample_stable_increment(alpha, rho, 2.0, &mut rng).unwrap())
            .collect();
        let mut b: Vec<f64> = (0..n)
            .map(|_| 2.0f64.powf(1.0 / alpha) * sample_stable_increment(alpha, rho, 1.0, &mut rng).unwrap())
            .collect();
        a.sort_by(|x, y| x.partial_cmp(y).unwrap());
        b.sort_by(|x, y| x.partial_cmp(y).unwrap());
        // two-sample KS
        let (mut i, mut j, mut d): (usize, usize, f64) = (0, 0, 0.0);
        while i < n && j < n {
            if a[i] <= b[j] {
                i += 1;
            } else {
                j += 1;
            }
            d = d.max((i as f64 / n as f64 - j as f64 / n as f64).abs());
        }
        assert!(d < 0.01, "KS = {d}");
    }

    #[test]
    fn alpha_one_asymmetric_rejected() {
        let mut rng = RngStream::new(7, 0).rng();
        assert!(sample_stable_increment(1.0, 0.6, 1.0, &mut rng).is_err());
        assert!(sample_stable_increment(1.0, 0.5, 1.0, &mut rng).is_ok());
    }

    #[test]
    fn truncated_drift_only_exact() {
        let comp = LevyComponentSpec::drift_only(2.0);
        let mut rng = RngStream::new(8, 0).rng();
        let x = sample_truncated_levy_segment(&comp, 1e-3, 3.0, &mut rng).unwrap();
        assert_eq!(x, 6.0);
    }

    #[test]
    fn truncated_cpp_matches_exact_path_for_path() {
        let comp = LevyComponentSpec::cpp(0.3, 2.0, JumpLaw::uniform(0.5, 1.5));
        let mut a = RngStream::new(9, 0).rng();
        let mut b = RngStream::new(9, 0).rng();
        let x = sample_truncated_levy_segment(&comp, 1e-3, 5.0, &mut a).unwrap();
        let ev = sample_cpp_events(2.0, &JumpLaw::uniform(0.5, 1.5), 5.0, &mut b);
        let y = 0.3 * 5.0 + ev.total_jump();
        assert_eq!(x.to_bits(), y.to_bits());
    }

    #[test]
    fn truncated_epsilon_bounds_checked() {
        let comp = LevyComponentSpec {
            drift: 0.0,
            gaussian: 0.0,
            jumps: JumpComponent::StableDensity { alpha: 0.5, c_plus: 1.0, c_minus: 1.0 },
            killing: 0.0,
        };
        let mut rng = RngStream::new(10, 0).rng();
        assert!(sample_truncated_levy_segment(&comp, 1.5, 1.0, &mut rng).is_err());
        assert!(sample_truncated_levy_segment(&comp, 0.01, 1.0, &mut rng).is_ok());
    }

    /// Shell-coupled construction: jumps in (eps/2, eps] are added on top of
    /// the eps-truncated increment, so successive refinements are coupled and
    /// the L2 Cauchy rate of the removed-variance bound is observable.
    #[test]
    fn truncation_refinement_cauchy_rate() {
        let alpha = 0.7;
        let comp = LevyComponentSpec {
            drift: 0.0,
            gaussian: 0.0,
            jumps: JumpComponent::LampertiStable { alpha, rho: 0.5, phase: 1 },
            killing: 0.0,
        };
        let dt = 1.0;
        let reps = 40_000;
        let epsilons = [2e-2, 1e-2, 5e-3];
        // per-shell rates from the closed-form masses
        let trunc: Vec<TruncatedComponent> = epsilons
            .iter()
            .map(|e| TruncatedComponent::new(&comp, *e, false).unwrap())
            .collect();
        let mut rng = RngStream::new(11, 0).rng();
        let mut diffs: Vec<Vec<f64>> = vec![Vec::new(), Vec::new()];
        for _ in 0..reps {
            // coarsest level
            let n0 = rng.poisson(trunc[0].rate * dt);
            let mut shells = vec![0.0; 3];
            for _ in 0..n0 {
                let j = trunc[0].sample_jump(&mut rng);
                shells[0] += j;
            }
            // shell (eps1, eps0]
            for lvl in 1..3 {
                let shell_rate = trunc[lvl].rate - trunc[lvl - 1].rate;
                let n = rng.poisson(shell_rate * dt);
                for _ in 0..n {
                    // rejection from the finer truncation into the shell
                    loop {
                        let j = trunc[lvl].sample_jump(&mut rng);
                        if j.abs() <= epsilons[lvl - 1] {
                            shells[lvl] += j;
                            break;
                        }
                    }
                }
            }
            diffs[0].push(shells[1]);
            diffs[1].push(shells[2]);
        }
        let std0 = std_dev(&diffs[0]);
        let std1 = std_dev(&diffs[1]);
        // removed-jump variance scales like eps^{2-alpha}: halving eps
        // shrinks the std by at least 2^{(2-alpha)/2} up to noise
        let shrink = std0 / std1;
        let target = 2.0f64.powf((2.0 - alpha) / 2.0);
        assert!(shrink > target * 0.9, "shrink {shrink} target {target}");
    }

    fn std_dev(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n).sqrt()
    }

    #[test]
    fn log_stable_truncated_masses_match_quadrature() {
        let comp = LevyComponentSpec {
            drift: 0.0,
            gaussian: 0.0,
            jumps: JumpComponent::LampertiStable { alpha: 0.5, rho: 0.5, phase: 1 },
            killing: 0.0,
        };
        let eps = 0.05;
        let t = TruncatedComponent::new(&comp, eps, false).unwrap();
        let law = JumpLaw::LogStablePositive { alpha: 0.5, rho: 0.5 };
        let up = quad::integrate_upper(|x| law.density(x), eps, 1e-10);
        let lo = quad::integrate_lower(|x| law.density(x), -eps, 1e-10);
        assert!((t.mass_plus - up).abs() < 1e-7 * up, "{} vs {up}", t.mass_plus);
        assert!((t.mass_minus - lo).abs() < 1e-7 * lo, "{} vs {lo}", t.mass_minus);
    }
}
