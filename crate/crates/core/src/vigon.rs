//! Convolution identities tying the ladder Levy system to the parent Levy
//! system through the dual ladder potential, their Monte Carlo verification,
//! the moment-transfer and absolute-continuity consequences, and the
//! factorization residual of the characteristic matrix exponent.

use crate::error::{MapError, Result};
use crate::exponents::{char_matrix_exponent, ladder_laplace_exponent_complex};
use crate::ladder_est::{
    estimate_ladder_spec, estimate_record_potential, LadderEstimate, RecordPotential,
};
use crate::law::JumpLaw;
use crate::model::{dualize, stationary_of_q, JumpComponent, LadderSpec, MapSpec};
use crate::rng::RngStream;
use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

type C64 = Complex<f64>;

/// Mass of the parent phase-j Levy measure on the interval (a, b].
fn levy_interval(spec: &MapSpec, j: usize, a: f64, b: f64) -> f64 {
    match &spec.components[j].jumps {
        JumpComponent::None => 0.0,
        JumpComponent::CompoundPoisson { rate, law } => rate * (law.tail(a) - law.tail(b)),
        JumpComponent::StableDensity { alpha, c_plus, .. } => {
            if a <= 0.0 {
                return f64::INFINITY;
            }
            c_plus / alpha * (a.powf(-alpha) - b.powf(-alpha))
        }
        JumpComponent::LampertiStable { .. } => {
            let law = spec.components[j].levy_measure().expect("lamperti levy law");
            if a <= 0.0 {
                return f64::INFINITY;
            }
            law.tail(a) - law.tail(b)
        }
    }
}

fn transitional_interval(spec: &MapSpec, k: usize, j: usize, a: f64, b: f64) -> f64 {
    match spec.transitions[k][j].as_ref() {
        Some(law) => law.tail(a) - law.tail(b),
        None => 0.0,
    }
}

/// One side of the ladder Levy system by convolving the parent Levy system
/// against the dual-ladder potential (midpoint rule over the potential
/// cells). With target pair (i, j): the diagonal equation is the case
/// i == j, the transitional one i != j.
pub fn vigon_rhs(
    spec: &MapSpec,
    dual_potential: &RecordPotential,
    pi: &[f64],
    i: usize,
    j: usize,
    lo: f64,
    hi: f64,
) -> f64 {
    let n = spec.phases();
    let mut acc = 0.0;
    // diagonal source: Pi_j convolved with U-hat_{j,i}, weighted pi(j)/pi(i)
    let w_diag = pi[j] / pi[i];
    acc += w_diag * dual_potential.atom[j][i] * levy_interval(spec, j, lo, hi);
    for (cell, w) in dual_potential.edges.windows(2).enumerate() {
        let y = 0.5 * (w[0] + w[1]);
        let m = dual_potential.mass[j][i][cell];
        if m > 0.0 {
            acc += w_diag * m * levy_interval(spec, j, y + lo, y + hi);
        }
    }
    // transitional sources: q_{k,j} F_{k,j} convolved with U-hat_{k,i}
    for k in 0..n {
        if k == j || spec.q[k][j] == 0.0 {
            continue;
        }
        let w_k = pi[k] / pi[i] * spec.q[k][j];
        acc += w_k * dual_potential.atom[k][i] * transitional_interval(spec, k, j, lo, hi);
        for (cell, w) in dual_potential.edges.windows(2).enumerate() {
            let y = 0.5 * (w[0] + w[1]);
            let m = dual_potential.mass[k][i][cell];
            if m > 0.0 {
                acc += w_k * m * transitional_interval(spec, k, j, y + lo, y + hi);
            }
        }
    }
    acc
}

/// Propagated standard error of `vigon_rhs` from the potential-cell errors.
pub fn vigon_rhs_se(
    spec: &MapSpec,
    dual_potential: &RecordPotential,
    pi: &[f64],
    i: usize,
    j: usize,
    lo: f64,
    hi: f64,
) -> f64 {
    let n = spec.phases();
    let mut var = 0.0;
    let w_diag = pi[j] / pi[i];
    for (cell, w) in dual_potential.edges.windows(2).enumerate() {
        let y = 0.5 * (w[0] + w[1]);
        let s = dual_potential.se[j][i][cell] * w_diag * levy_interval(spec, j, y + lo, y + hi);
        var += s * s;
        for k in 0..n {
            if k == j || spec.q[k][j] == 0.0 {
                continue;
            }
            let w_k = pi[k] / pi[i] * spec.q[k][j];
            let s = dual_potential.se[k][i][cell] * w_k * transitional_interval(spec, k, j, y + lo, y + hi);
            var += s * s;
        }
    }
    var.sqrt()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VigonRow {
    pub from: usize,
    pub to: usize,
    pub lo: f64,
    pub hi: f64,
    pub lhs: f64,
    pub lhs_se: f64,
    pub rhs: f64,
    pub rhs_se: f64,
    /// lhs / (scale * rhs), present on the cells where both sides clear the
    /// noise threshold.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VigonReport {
    pub rows: Vec<VigonRow>,
    /// Fitted local-time scale per target phase.
    pub scales: Vec<f64>,
    pub ladder: LadderEstimate,
}

#[derive(Debug, Clone)]
pub struct VigonParams {
    pub n_paths: u64,
    pub horizon: f64,
    pub edges: Vec<f64>,
    /// Grid for the dual potential cells.
    pub potential_edges: Vec<f64>,
    pub min_events: u64,
}

/// Full verification experiment: ladder Levy system estimated on the spec,
/// dual-ladder potential estimated on the time reversal, convolution per
/// bin, one positive scale per target phase fitted in log space.
pub fn vigon_check(spec: &MapSpec, params: &VigonParams, stream: RngStream) -> Result<VigonReport> {
    spec.creeping_class()?;
    match crate::exponents::drift_dichotomy(spec)?.verdict {
        crate::exponents::DriftVerdict::Transient => {}
        other => {
            return Err(MapError::Unsupported(format!(
                "the dual ladder potential is finite only for upward-transient specs (got {other:?})"
            )))
        }
    }
    let n = spec.phases();
    let pi = stationary_of_q(&spec.q)?;
    let ladder = estimate_ladder_spec(
        spec,
        params.n_paths,
        params.horizon,
        &params.edges,
        params.min_events,
        stream.substream(1),
    )?;
    let dual = dualize(spec)?;
    let per_start = params.n_paths / (n as u64);
    let potential = estimate_record_potential(
        &dual,
        &params.potential_edges,
        per_start.max(1),
        params.horizon,
        stream.substream(2),
    )?;

    let mut rows = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for (cell, w) in params.edges.windows(2).enumerate() {
                let (lhs, lhs_se) = if i == j {
                    let b = &ladder.levy_bins[i][cell];
                    (b.intensity, b.se)
                } else {
                    match ladder.trans_bins[i][j].get(cell) {
                        Some(b) => (b.intensity, b.se),
                        None => (0.0, f64::INFINITY),
                    }
                };
                let rhs = vigon_rhs(spec, &potential, &pi, i, j, w[0], w[1]);
                let rhs_se = vigon_rhs_se(spec, &potential, &pi, i, j, w[0], w[1]);
                rows.push(VigonRow {
                    from: i,
                    to: j,
                    lo: w[0],
                    hi: w[1],
                    lhs,
                    lhs_se,
                    rhs,
                    rhs_se,
                    ratio: None,
                });
            }
        }
    }
    // per-phase scale in log space over the cells where both sides clear
    // three standard errors
    let mut scales = vec![1.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        let mut count = 0.0;
        for r in rows.iter().filter(|r| r.from == i) {
            if usable(r) {
                acc += (r.lhs / r.rhs).ln();
                count += 1.0;
            }
        }
        if count > 0.0 {
            scales[i] = (acc / count).exp();
        }
    }
    for r in rows.iter_mut() {
        if usable(r) {
            r.ratio = Some(r.lhs / (scales[r.from] * r.rhs));
        }
    }
    Ok(VigonReport { rows, scales, ladder })
}

fn usable(r: &VigonRow) -> bool {
    r.lhs > 3.0 * r.lhs_se && r.rhs > 3.0 * r.rhs_se && r.rhs > 0.0 && r.lhs > 0.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseTransfer {
    pub holds: bool,
    pub offending: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MomentMode {
    Exponential,
    Polynomial,
}

/// Per-phase finiteness of the transferred ladder moments: the phase Levy
/// measure and every incoming transitional law must carry the requested
/// moment above level one.
pub fn moment_transfer_check(
    spec: &MapSpec,
    lam: f64,
    mode: MomentMode,
) -> Result<Vec<PhaseTransfer>> {
    if mode == MomentMode::Polynomial {
        match crate::exponents::drift_dichotomy(spec)?.verdict {
            crate::exponents::DriftVerdict::Transient => {}
            other => {
                return Err(MapError::Unsupported(format!(
                    "polynomial transfer needs an upward-transient spec (got {other:?})"
                )))
            }
        }
    }
    let n = spec.phases();
    let finite = |law: &JumpLaw| -> bool {
        match mode {
            MomentMode::Exponential => law.exp_moment_tail_finite(lam),
            MomentMode::Polynomial => law.poly_moment_above(lam, 1.0).is_finite(),
        }
    };
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut offending = Vec::new();
        if let Some(levy) = spec.components[i].levy_measure() {
            if !finite(&levy) {
                offending.push(format!("Pi[{i}]: {levy:?}"));
            }
        }
        if let JumpComponent::StableDensity { alpha, c_plus, .. } = &spec.components[i].jumps {
            let bad = match mode {
                MomentMode::Exponential => *c_plus > 0.0,
                MomentMode::Polynomial => *c_plus > 0.0 && lam >= *alpha,
            };
            if bad {
                offending.push(format!("Pi[{i}]: stable upper tail of index {alpha}"));
            }
        }
        for k in 0..n {
            if k != i && spec.q[k][i] > 0.0 {
                if let Some(law) = spec.transitions[k][i].as_ref() {
                    if !finite(law) {
                        offending.push(format!("F[{k}][{i}]: {law:?}"));
                    }
                }
            }
        }
        out.push(PhaseTransfer { holds: offending.is_empty(), offending });
    }
    Ok(out)
}

/// Which skeleton-irreducibility route the parent spec certifies.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbsContReport {
    /// Creeping route: some phase creeps upward (positive linear drift or a
    /// Gaussian part), so the zero atom is accessible.
    pub creeping_route: bool,
    /// Per phase: intervals in (0, inf) where the Levy density is strictly
    /// positive (these transfer to the ladder Levy measure).
    pub phase_intervals: Vec<Vec<(f64, f64)>>,
    /// Per ordered pair: intervals in (0, inf) where the transitional
    /// density is strictly positive (transfer to the ladder transitions).
    pub pair_intervals: Vec<Vec<Vec<(f64, f64)>>>,
    /// Some phase density covers all of (0, inf).
    pub full_halfline_phase: Option<usize>,
    pub certified: bool,
}

/// Density-support bookkeeping for the aperiodicity criteria.
pub fn absolute_continuity_transfer(spec: &MapSpec) -> AbsContReport {
    let n = spec.phases();
    let creeping_route = spec
        .components
        .iter()
        .any(|c| c.gaussian > 0.0 || (c.drift > 0.0 && !c.unbounded_variation()));
    let positive_part = |intervals: Vec<(f64, f64)>| -> Vec<(f64, f64)> {
        intervals
            .into_iter()
            .filter_map(|(a, b)| {
                let a = a.max(0.0);
                if b > a {
                    Some((a, b))
                } else {
                    None
                }
            })
            .collect()
    };
    let mut phase_intervals = Vec::with_capacity(n);
    for c in &spec.components {
        let iv = match c.levy_measure() {
            Some(law) => positive_part(law.density_intervals()),
            None => match &c.jumps {
                JumpComponent::StableDensity { c_plus, .. } if *c_plus > 0.0 => {
                    vec![(0.0, f64::INFINITY)]
                }
                _ => Vec::new(),
            },
        };
        phase_intervals.push(iv);
    }
    let mut pair_intervals = vec![vec![Vec::new(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && spec.q[i][j] > 0.0 {
                if let Some(law) = spec.transitions[i][j].as_ref() {
                    pair_intervals[i][j] = positive_part(law.density_intervals());
                }
            }
        }
    }
    let full_halfline_phase = phase_intervals
        .iter()
        .position(|iv| iv.iter().any(|(a, b)| *a == 0.0 && b.is_infinite()));
    let density_route = phase_intervals.iter().any(|iv| !iv.is_empty())
        || pair_intervals.iter().flatten().any(|iv| !iv.is_empty());
    AbsContReport {
        creeping_route,
        phase_intervals,
        pair_intervals,
        full_halfline_phase,
        certified: creeping_route || density_route,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WienerHopfReport {
    /// Fitted positive local-time scale per phase.
    pub scales: Vec<f64>,
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
}

/// Residual of the factorization -Psi(theta) = Dpi^{-1} PhiHat+(i theta)^T
/// Dpi D Phi+(-i theta) over the frequency grid, after fitting the free
/// positive diagonal D (the local-time scaling) by least squares.
pub fn wiener_hopf_residual(
    spec: &MapSpec,
    ladder: &LadderSpec,
    dual_ladder: &LadderSpec,
    thetas: &[f64],
) -> Result<WienerHopfReport> {
    let n = spec.phases();
    let pi = stationary_of_q(&spec.q)?;
    // least squares for the middle diagonal: T(theta) ~ A(theta) D B(theta)
    let mut gram = DMatrix::<f64>::zeros(n, n);
    let mut rhs = nalgebra::DVector::<f64>::zeros(n);
    let mut targets = Vec::with_capacity(thetas.len());
    let mut designs = Vec::with_capacity(thetas.len());
    for &theta in thetas {
        let t_mat = -char_matrix_exponent(spec, theta).matrix;
        let phi_hat = ladder_laplace_exponent_complex(dual_ladder, C64::new(0.0, theta));
        let phi = ladder_laplace_exponent_complex(ladder, C64::new(0.0, -theta));
        // A = Dpi^{-1} PhiHat^T Dpi ; B = Phi
        let mut a = phi_hat.transpose();
        for r in 0..n {
            for c in 0..n {
                a[(r, c)] *= pi[c] / pi[r];
            }
        }
        for k in 0..n {
            for l in 0..n {
                let mut gkl = 0.0;
                for r in 0..n {
                    for c in 0..n {
                        let xk = a[(r, k)] * phi[(k, c)];
                        let xl = a[(r, l)] * phi[(l, c)];
                        gkl += (xk.conj() * xl).re;
                    }
                }
                gram[(k, l)] += gkl;
            }
            let mut hk = 0.0;
            for r in 0..n {
                for c in 0..n {
                    let xk = a[(r, k)] * phi[(k, c)];
                    hk += (xk.conj() * t_mat[(r, c)]).re;
                }
            }
            rhs[k] += hk;
        }
        targets.push(t_mat);
        designs.push((a, phi));
    }
    let d = gram
        .lu()
        .solve(&rhs)
        .ok_or_else(|| MapError::Invalid("degenerate Wiener-Hopf design".into()))?;
    let scales: Vec<f64> = d.iter().copied().collect();
    let mut max_abs: f64 = 0.0;
    let mut max_t: f64 = 0.0;
    for ((a, phi), t_mat) in designs.iter().zip(&targets) {
        for r in 0..n {
            for c in 0..n {
                let mut fitted = C64::new(0.0, 0.0);
                for k in 0..n {
                    fitted += a[(r, k)] * scales[k] * phi[(k, c)];
                }
                max_abs = max_abs.max((t_mat[(r, c)] - fitted).norm());
                max_t = max_t.max(t_mat[(r, c)].norm());
            }
        }
    }
    Ok(WienerHopfReport {
        scales,
        max_abs_residual: max_abs,
        max_rel_residual: if max_t > 0.0 { max_abs / max_t } else { 0.0 },
    })
}
