//! The bijection between real self-similar Markov processes and MAPs on
//! two sign phases: log-radius, sign, and the power time change, plus the
//! construction of the MAP associated to a strictly stable process and the
//! mixing bound for stable processes sampled at first hitting times.

use crate::error::{MapError, Result};
use crate::law::{stable_constants, JumpLaw};
use crate::model::{JumpComponent, LevyComponentSpec, MapSpec};
use crate::path::{MapPath, Piece, PieceEnd, SwitchEvent};
use serde::{Deserialize, Serialize};

/// Phase convention on the sign space: index 0 <-> +1, index 1 <-> -1.
pub fn sign_to_phase(sign: i8) -> usize {
    if sign >= 0 {
        0
    } else {
        1
    }
}

pub fn phase_to_sign(phase: usize) -> i8 {
    if phase == 0 {
        1
    } else {
        -1
    }
}

/// Radial shape of one self-similar path segment in its own time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ZSegKind {
    /// |Z(t)| = r on [t0, t1).
    Constant { r: f64 },
    /// |Z(t)| = (a + b (t - t0))^{1/alpha}; emitted by the inverse transform
    /// for alpha > 0, where linear log-radius pieces become power arcs.
    Power { a: f64, b: f64 },
    /// |Z(t)| = exp(x0 + slope (t - t0)); the alpha = 0 (no time change)
    /// image of a linear log-radius piece.
    Exponential { x0: f64, slope: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZSeg {
    pub t0: f64,
    pub t1: f64,
    pub sign: i8,
    pub kind: ZSegKind,
}

impl ZSeg {
    pub fn radius_at(&self, t: f64, alpha: f64) -> f64 {
        match self.kind {
            ZSegKind::Constant { r } => r,
            ZSegKind::Power { a, b } => (a + b * (t - self.t0)).powf(1.0 / alpha),
            ZSegKind::Exponential { x0, slope } => (x0 + slope * (t - self.t0)).exp(),
        }
    }
}

/// Path record of a real-valued self-similar process, absorbed nowhere
/// (every radius strictly positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZPath {
    /// The self-similarity index the parametric segments encode.
    pub alpha: f64,
    pub segments: Vec<ZSeg>,
}

impl ZPath {
    /// Piecewise-constant record from grid samples (t_k, z_k).
    pub fn from_grid(alpha: f64, times: &[f64], values: &[f64]) -> Result<ZPath> {
        if times.len() != values.len() || times.len() < 2 {
            return Err(MapError::Invalid("grid needs matching times and values".into()));
        }
        let mut segments = Vec::with_capacity(times.len() - 1);
        for k in 0..times.len() - 1 {
            let z = values[k];
            if z == 0.0 {
                return Err(MapError::Unsupported("absorbed: the path touches zero".into()));
            }
            segments.push(ZSeg {
                t0: times[k],
                t1: times[k + 1],
                sign: if z > 0.0 { 1 } else { -1 },
                kind: ZSegKind::Constant { r: z.abs() },
            });
        }
        Ok(ZPath { alpha, segments })
    }

    pub fn value_at(&self, t: f64) -> f64 {
        for s in &self.segments {
            if t >= s.t0 && t < s.t1 {
                return s.sign as f64 * s.radius_at(t, self.alpha);
            }
        }
        let s = self.segments.last().expect("non-empty path");
        s.sign as f64 * s.radius_at(s.t1, self.alpha)
    }

    pub fn horizon(&self) -> f64 {
        self.segments.last().map(|s| s.t1).unwrap_or(0.0)
    }
}

/// Time-changed log-radius and sign of a self-similar path: the associated
/// MAP on two sign phases. `alpha` must match the parametric segments.
pub fn lamperti_kiu_forward(z: &ZPath, alpha: f64) -> Result<MapPath> {
    let mut pieces: Vec<Piece> = Vec::with_capacity(z.segments.len());
    let mut switches = Vec::new();
    let mut u = 0.0;
    for (k, seg) in z.segments.iter().enumerate() {
        let dt = seg.t1 - seg.t0;
        let phase = sign_to_phase(seg.sign);
        let (duration, x0, slope) = match seg.kind {
            ZSegKind::Constant { r } => {
                if r <= 0.0 {
                    return Err(MapError::Unsupported("absorbed: zero radius".into()));
                }
                (dt * r.powf(-alpha), r.ln(), 0.0)
            }
            ZSegKind::Power { a, b } => {
                if !(alpha > 0.0) {
                    return Err(MapError::Unsupported(
                        "power segments encode a positive self-similarity index".into(),
                    ));
                }
                if a <= 0.0 || a + b * dt <= 0.0 {
                    return Err(MapError::Unsupported("absorbed: zero radius".into()));
                }
                let duration = if b == 0.0 { dt / a } else { ((a + b * dt) / a).ln() / b };
                (duration, a.ln() / alpha, b / alpha)
            }
            ZSegKind::Exponential { x0, slope } => {
                if alpha == 0.0 {
                    (dt, x0, slope)
                } else {
                    let e0 = (-alpha * x0).exp();
                    let duration = if slope == 0.0 {
                        dt * e0
                    } else {
                        e0 * (1.0 - (-alpha * slope * dt).exp()) / (alpha * slope)
                    };
                    let _ = duration;
                    return Err(MapError::Unsupported(
                        "exponential radial segments map to nonlinear log pieces for alpha > 0"
                            .into(),
                    ));
                }
            }
        };
        let u1 = u + duration;
        // terminating event: relation to the next segment
        let end = match z.segments.get(k + 1) {
            None => PieceEnd::Horizon,
            Some(next) => {
                let next_phase = sign_to_phase(next.sign);
                let x_next = match next.kind {
                    ZSegKind::Constant { r } => r.ln(),
                    ZSegKind::Power { a, .. } => a.ln() / alpha,
                    ZSegKind::Exponential { x0, .. } => x0,
                };
                let x_left = x0 + slope * duration;
                let jump = x_next - x_left;
                if next_phase != phase {
                    switches.push(SwitchEvent { time: u1, from: phase, to: next_phase, jump });
                    PieceEnd::Switch { to: next_phase, jump }
                } else {
                    PieceEnd::Jump(jump)
                }
            }
        };
        pieces.push(Piece { t0: u, t1: u1, phase, x0, slope, end });
        u = u1;
    }
    Ok(MapPath { pieces, switches, horizon: u })
}

/// Inverse transform: the self-similar path of a two-phase MAP path via the
/// exponential time change.
pub fn lamperti_kiu_inverse(path: &MapPath, alpha: f64) -> Result<ZPath> {
    if path.pieces.iter().any(|p| p.phase > 1) {
        return Err(MapError::Unsupported("inverse transform needs a two-phase path".into()));
    }
    let mut segments = Vec::with_capacity(path.pieces.len());
    let mut t = 0.0;
    for p in &path.pieces {
        let du = p.t1 - p.t0;
        let sign = phase_to_sign(p.phase);
        let (duration, kind) = if alpha == 0.0 {
            (du, ZSegKind::Exponential { x0: p.x0, slope: p.slope })
        } else {
            let a = (alpha * p.x0).exp();
            let b = alpha * p.slope;
            let duration = if p.slope == 0.0 {
                a * du
            } else {
                a * ((alpha * p.slope * du).exp() - 1.0) / (alpha * p.slope)
            };
            (duration, ZSegKind::Power { a, b })
        };
        segments.push(ZSeg { t0: t, t1: t + duration, sign, kind });
        t += duration;
    }
    Ok(ZPath { alpha, segments })
}

/// The two-phase MAP associated to a strictly alpha-stable process with
/// two-sided jumps: log-stable Levy components, sign-switch rates c_{-+}/alpha,
/// and the closed-form switch jump law.
pub fn lamperti_stable_spec(alpha: f64, rho: f64) -> Result<MapSpec> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MapError::Unsupported(
            "the transient stable bridge needs alpha in (0,1)".into(),
        ));
    }
    let (c_plus, c_minus) = stable_constants(alpha, rho);
    if !(c_plus > 0.0 && c_minus > 0.0) {
        return Err(MapError::Unsupported(
            "one-sided stable processes have a reducible sign modulator".into(),
        ));
    }
    let q_pm = c_minus / alpha; // +1 -> -1
    let q_mp = c_plus / alpha; // -1 -> +1
    let switch_law = JumpLaw::LogStableSwitch { alpha };
    Ok(MapSpec {
        components: vec![
            LevyComponentSpec {
                drift: 0.0,
                gaussian: 0.0,
                jumps: JumpComponent::LampertiStable { alpha, rho, phase: 1 },
                killing: 0.0,
            },
            LevyComponentSpec {
                drift: 0.0,
                gaussian: 0.0,
                jumps: JumpComponent::LampertiStable { alpha, rho, phase: -1 },
                killing: 0.0,
            },
        ],
        q: vec![vec![-q_pm, q_pm], vec![q_mp, -q_mp]],
        transitions: vec![
            vec![None, Some(switch_law.clone())],
            vec![Some(switch_law), None],
        ],
    })
}

/// Mixing bound C ((t+s)/t)^{-1/(2+delta)} for a transient stable process
/// sampled at first hitting times.
pub fn stable_hitting_mixing_bound(delta: f64, c: f64, t: f64, s: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(MapError::Invalid("delta must lie in (0,1)".into()));
    }
    if !(t >= 1.0 && s >= 0.0) {
        return Err(MapError::Invalid("need t >= 1 and s >= 0".into()));
    }
    Ok(c * ((t + s) / t).powf(-1.0 / (2.0 + delta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::simulate::{simulate_path, SimOptions};

    #[test]
    fn deterministic_exponential_alpha_zero() {
        // Z = e^s on a grid, alpha = 0: xi_t = t at grid points, J = +1
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.1).collect();
        let values: Vec<f64> = times.iter().map(|t| t.exp()).collect();
        let z = ZPath::from_grid(0.0, &times, &values).unwrap();
        let map = lamperti_kiu_forward(&z, 0.0).unwrap();
        assert!(map.switches.is_empty());
        for p in &map.pieces {
            assert_eq!(p.phase, 0);
            assert!((p.x0 - p.t0).abs() < 1e-12);
        }
        assert!((map.horizon - 10.0).abs() < 1e-9);
    }

    #[test]
    fn unit_drift_alpha_one_gives_one_plus_t() {
        // xi_u = u, J = +1, alpha = 1: Z_t = 1 + t
        let path = MapPath {
            pieces: vec![Piece { t0: 0.0, t1: 3.0, phase: 0, x0: 0.0, slope: 1.0, end: PieceEnd::Horizon }],
            switches: vec![],
            horizon: 3.0,
        };
        let z = lamperti_kiu_inverse(&path, 1.0).unwrap();
        for t in [0.0, 0.5, 2.0, 5.0] {
            if t < z.horizon() {
                assert!((z.value_at(t) - (1.0 + t)).abs() < 1e-12, "t={t}");
            }
        }
        // total z-time: int_0^3 e^u du = e^3 - 1
        assert!((z.horizon() - (3.0f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn constant_map_is_constant_z() {
        let path = MapPath {
            pieces: vec![Piece { t0: 0.0, t1: 2.0, phase: 0, x0: 0.0, slope: 0.0, end: PieceEnd::Horizon }],
            switches: vec![],
            horizon: 2.0,
        };
        let z = lamperti_kiu_inverse(&path, 0.7).unwrap();
        for t in [0.0, 0.5, 1.5] {
            assert!((z.value_at(t) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn round_trip_random_paths() {
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
        let alpha = 0.6;
        for seed in 0..100 {
            let mut rng = RngStream::new(60, seed).rng();
            let path = simulate_path(&spec, 0.3, (seed % 2) as usize, 5.0, &SimOptions::default(), &mut rng)
                .unwrap();
            let z = lamperti_kiu_inverse(&path, alpha).unwrap();
            let back = lamperti_kiu_forward(&z, alpha).unwrap();
            assert_eq!(back.pieces.len(), path.pieces.len());
            let mut sup: f64 = 0.0;
            for (a, b) in path.pieces.iter().zip(&back.pieces) {
                assert_eq!(a.phase, b.phase);
                sup = sup.max((a.t0 - b.t0).abs());
                sup = sup.max((a.t1 - b.t1).abs());
                sup = sup.max((a.x0 - b.x0).abs());
                sup = sup.max((a.value_left() - b.value_left()).abs());
            }
            assert!(sup < 1e-9, "seed {seed}: sup-norm {sup}");
        }
    }

    #[test]
    fn stable_spec_structure() {
        let spec = lamperti_stable_spec(0.5, 0.5).unwrap();
        // regression constants: c+- = Gamma(3/2) sin(pi/4) / pi, q = c/alpha
        let c = statrs::function::gamma::gamma(1.5) * (std::f64::consts::PI / 4.0).sin()
            / std::f64::consts::PI;
        assert!((spec.q[0][1] - 2.0 * c).abs() < 1e-12);
        assert!((spec.q[1][0] - 2.0 * c).abs() < 1e-12);
        assert!((spec.q[0][1] - 0.398942280401433).abs() < 1e-12);
        // the switch law is a probability law
        let f = spec.transitions[0][1].as_ref().unwrap();
        assert!((f.total_mass() - 1.0).abs() < 1e-14);
        let quad_mass = f.integrate(|_| 1.0, 1e-10);
        assert!((quad_mass - 1.0).abs() < 1e-8);
        // one-sided cases rejected
        assert!(lamperti_stable_spec(0.5, 1.0).is_err());
    }

    #[test]
    fn stable_spec_moments_and_dichotomy() {
        use crate::exponents::{drift_dichotomy, DriftVerdict};
        use crate::model::ladder_irreducibility_sufficient;
        let spec = lamperti_stable_spec(0.5, 0.5).unwrap();
        let levy = spec.components[0].levy_measure().unwrap();
        assert!(levy.exp_moment_tail_finite(0.25));
        assert!(!levy.exp_moment_tail_finite(0.5));
        let d = drift_dichotomy(&spec).unwrap();
        assert_eq!(d.verdict, DriftVerdict::Transient, "drift {}", d.drift);
        let irr = ladder_irreducibility_sufficient(&spec);
        assert!(irr.holds);
        assert!(crate::model::q_matrix_irreducible(&spec.q));
    }

    #[test]
    fn sign_switch_rate_of_simulated_stable_path() {
        // symmetric alpha = 1/2 stable path on a fine grid: sign switches of
        // the transformed modulator behave like the advertised rates per unit
        // MAP time (grid bias keeps this a coarse check)
        let (alpha, rho) = (0.5, 0.5);
        let (cp, cm) = stable_constants(alpha, rho);
        let q_pm = cm / alpha;
        let q_mp = cp / alpha;
        let dt = 1e-4;
        let steps = 40_000;
        let mut switch_count = 0.0;
        let mut time_plus = 0.0;
        let mut time_minus = 0.0;
        let mut rng = RngStream::new(61, 0).rng();
        for path in 0..400 {
            let _ = path;
            let mut z = 1.0f64;
            for _ in 0..steps {
                let dz = crate::samplers::sample_stable_increment(alpha, rho, dt, &mut rng).unwrap();
                let z_new = z + dz;
                if z_new == 0.0 {
                    break;
                }
                // MAP time increment on this grid cell
                let du = dt * z.abs().powf(-alpha);
                if z > 0.0 {
                    time_plus += du;
                } else {
                    time_minus += du;
                }
                if z.signum() != z_new.signum() {
                    switch_count += 1.0;
                }
                z = z_new;
            }
        }
        let expected = q_pm * time_plus + q_mp * time_minus;
        assert!(
            (switch_count / expected - 1.0).abs() < 0.15,
            "count {switch_count} vs {expected}"
        );
    }

    #[test]
    fn mixing_bound_shape() {
        // s = 0 limit is C
        assert!((stable_hitting_mixing_bound(0.5, 2.0, 1.0, 0.0).unwrap() - 2.0).abs() < 1e-14);
        // t=1, s=3, delta=1 (excluded) ... use delta just below 1
        let v = stable_hitting_mixing_bound(0.999999, 1.0, 1.0, 3.0).unwrap();
        assert!((v - 4.0f64.powf(-1.0 / 2.999999)).abs() < 1e-9);
        // monotone: nonincreasing in s, nondecreasing in t
        let b1 = stable_hitting_mixing_bound(0.5, 1.0, 2.0, 1.0).unwrap();
        let b2 = stable_hitting_mixing_bound(0.5, 1.0, 2.0, 2.0).unwrap();
        let b3 = stable_hitting_mixing_bound(0.5, 1.0, 3.0, 2.0).unwrap();
        assert!(b2 <= b1 && b3 >= b2);
        assert!(stable_hitting_mixing_bound(1.5, 1.0, 1.0, 1.0).is_err());
        assert!(stable_hitting_mixing_bound(0.5, 1.0, 0.5, 1.0).is_err());
    }
}
