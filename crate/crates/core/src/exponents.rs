//! Matrix exponents, spectral checks, drift dichotomy, the closed-form
//! overshoot resolvent, invariant and stationary overshoot laws, and the
//! Lyapunov drift certificates.

use crate::error::{MapError, Result};
use crate::law::{Extended, JumpLaw};
use crate::model::{stationary_of_q, JumpComponent, LadderSpec, MapSpec};
use crate::quad;
use crate::samplers::stable_beta_scale;
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

type C64 = Complex<f64>;

/// Evaluation record of a matrix exponent at one argument.
#[derive(Debug, Clone)]
pub struct MatrixExponentEval {
    pub argument: f64,
    pub matrix: DMatrix<C64>,
}

/// Characteristic exponent of one Levy component at real frequency theta:
/// log E exp(i theta xi_1).
pub fn component_char_exponent(c: &crate::model::LevyComponentSpec, theta: f64) -> C64 {
    let i = C64::new(0.0, 1.0);
    let mut psi = i * c.drift * theta - C64::new(0.5 * c.gaussian * c.gaussian * theta * theta, 0.0);
    match &c.jumps {
        JumpComponent::None => {}
        JumpComponent::CompoundPoisson { rate, law } => {
            psi += C64::new(*rate, 0.0) * (law.cf(theta) - C64::new(1.0, 0.0));
        }
        JumpComponent::StableDensity { alpha, c_plus, c_minus } => {
            let rho = crate::samplers::stable_rho_from_constants(*alpha, *c_plus, *c_minus);
            let (beta, base_scale) = stable_beta_scale(*alpha, rho);
            // rescale to the requested intensity relative to the standard
            // (alpha, rho) constants
            let (cp0, cm0) = crate::law::stable_constants(*alpha, rho);
            let scale = base_scale * (c_plus + c_minus) / (cp0 + cm0);
            let skew = if (*alpha - 1.0).abs() < 1e-12 {
                0.0
            } else {
                beta * (std::f64::consts::PI * alpha / 2.0).tan()
            };
            let magnitude = scale * theta.abs().powf(*alpha);
            psi += -C64::new(magnitude, 0.0)
                * (C64::new(1.0, 0.0) - i * skew * theta.signum());
        }
        JumpComponent::LampertiStable { .. } => {
            let law = match &c.jumps {
                JumpComponent::LampertiStable { alpha, rho, phase } => {
                    if *phase >= 0 {
                        JumpLaw::LogStablePositive { alpha: *alpha, rho: *rho }
                    } else {
                        JumpLaw::LogStableNegative { alpha: *alpha, rho: *rho }
                    }
                }
                _ => unreachable!(),
            };
            // bounded variation (alpha < 1): integral (e^{i theta x} - 1) nu(dx)
            let re = law.integrate(|x| (theta * x).cos() - 1.0, 1e-9);
            let im = law.integrate(|x| (theta * x).sin(), 1e-9);
            psi += C64::new(re, im);
        }
    }
    psi
}

/// Characteristic matrix exponent Psi(theta) = diag(psi_i) + Q hadamard G.
pub fn char_matrix_exponent(spec: &MapSpec, theta: f64) -> MatrixExponentEval {
    let n = spec.phases();
    let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        m[(i, i)] = component_char_exponent(&spec.components[i], theta) + spec.q[i][i];
        for j in 0..n {
            if j != i && spec.q[i][j] != 0.0 {
                let g = match spec.transitions[i][j].as_ref() {
                    Some(law) => law.cf(theta),
                    None => C64::new(1.0, 0.0),
                };
                m[(i, j)] = C64::new(spec.q[i][j], 0.0) * g;
            }
        }
    }
    MatrixExponentEval { argument: theta, matrix: m }
}

/// Laplace exponent of one ladder phase: dagger + d lam + rate (1 - L(lam)).
pub fn ladder_phase_exponent(spec: &LadderSpec, i: usize, lam: f64) -> f64 {
    let kill = spec.killing.get(i).copied().unwrap_or(0.0);
    let mut phi = kill + spec.drifts[i] * lam;
    if let Some((rate, law)) = &spec.jumps[i] {
        phi += rate * (1.0 - law.laplace(lam));
    }
    phi
}

/// Matrix Laplace exponent Phi+(lam) = diag(phi_i) - Q+ hadamard G+ of the
/// ladder subordinator.
pub fn ladder_laplace_exponent(spec: &LadderSpec, lam: f64) -> DMatrix<f64> {
    let n = spec.phases();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = ladder_phase_exponent(spec, i, lam) - spec.q[i][i];
        for j in 0..n {
            if j != i && spec.q[i][j] != 0.0 {
                let g = match spec.transitions[i][j].as_ref() {
                    Some(law) => law.laplace(lam),
                    None => 1.0,
                };
                m[(i, j)] = -spec.q[i][j] * g;
            }
        }
    }
    m
}

/// Complex-argument version, used by the Wiener-Hopf residual.
pub fn ladder_laplace_exponent_complex(spec: &LadderSpec, z: C64) -> DMatrix<C64> {
    let n = spec.phases();
    let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
    for i in 0..n {
        let kill = spec.killing.get(i).copied().unwrap_or(0.0);
        let mut phi = C64::new(kill, 0.0) + z * spec.drifts[i];
        if let Some((rate, law)) = &spec.jumps[i] {
            phi += C64::new(*rate, 0.0) * (C64::new(1.0, 0.0) - laplace_complex(law, z));
        }
        m[(i, i)] = phi - spec.q[i][i];
        for j in 0..n {
            if j != i && spec.q[i][j] != 0.0 {
                let g = match spec.transitions[i][j].as_ref() {
                    Some(law) => laplace_complex(law, z),
                    None => C64::new(1.0, 0.0),
                };
                m[(i, j)] = -C64::new(spec.q[i][j], 0.0) * g;
            }
        }
    }
    m
}

/// E[e^{-z X}] for complex z with Re z >= 0, closed forms where available.
pub fn laplace_complex(law: &JumpLaw, z: C64) -> C64 {
    match law {
        JumpLaw::Exponential { rate } => C64::new(*rate, 0.0) / (z + *rate),
        JumpLaw::PointMass { location } => (-z * *location).exp(),
        JumpLaw::UniformInterval { lo, hi } => {
            if z.norm() < 1e-14 {
                C64::new(1.0, 0.0)
            } else {
                ((-z * *lo).exp() - (-z * *hi).exp()) / (z * (hi - lo))
            }
        }
        JumpLaw::FiniteMixture { weights, laws } => {
            let mut acc = C64::new(0.0, 0.0);
            for (w, l) in weights.iter().zip(laws) {
                acc += C64::new(*w, 0.0) * laplace_complex(l, z);
            }
            acc
        }
        _ => {
            let re = law.integrate(|x| (-z.re * x).exp() * (z.im * x).cos(), 1e-10);
            let im = law.integrate(|x| -(-z.re * x).exp() * (z.im * x).sin(), 1e-10);
            C64::new(re, im)
        }
    }
}

/// Spectral diagnostics of Psi over a frequency grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralReport {
    pub max_real_part: f64,
    /// min over the grid of |det(lam I - Psi(theta))| for each probed lam.
    pub min_abs_det: Vec<(f64, f64)>,
}

/// Max real eigenvalue part of Psi(theta) over the grid, and invertibility
/// margins of lam I - Psi(theta).
pub fn spectral_bound_check(spec: &MapSpec, thetas: &[f64], lambdas: &[f64]) -> SpectralReport {
    let n = spec.phases();
    let mut max_real = f64::NEG_INFINITY;
    let mut min_det: Vec<(f64, f64)> = lambdas.iter().map(|l| (*l, f64::INFINITY)).collect();
    for &theta in thetas {
        let psi = char_matrix_exponent(spec, theta).matrix;
        // embed A + iB as the real 2n x 2n block matrix [[A, -B], [B, A]];
        // its spectrum is the union of spec(A+iB) and its conjugate, so the
        // max real part is preserved
        let mut emb = DMatrix::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                emb[(i, j)] = psi[(i, j)].re;
                emb[(i, j + n)] = -psi[(i, j)].im;
                emb[(i + n, j)] = psi[(i, j)].im;
                emb[(i + n, j + n)] = psi[(i, j)].re;
            }
        }
        for ev in emb.complex_eigenvalues().iter() {
            max_real = max_real.max(ev.re);
        }
        for (lam, best) in min_det.iter_mut() {
            let mut m = -psi.clone();
            for d in 0..n {
                m[(d, d)] += C64::new(*lam, 0.0);
            }
            let det = m.lu().determinant().norm();
            *best = best.min(det);
        }
    }
    SpectralReport { max_real_part: max_real, min_abs_det: min_det }
}

/// Long-run verdict for the ordinator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DriftVerdict {
    /// xi_t -> +infinity.
    Transient,
    Oscillating,
    /// xi_t -> -infinity.
    NegativeDrift,
    /// Some component or transitional mean is not finite.
    Undetermined,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyResult {
    pub verdict: DriftVerdict,
    pub drift: f64,
    pub phase_means: Vec<Extended>,
}

const DRIFT_TOL: f64 = 1e-9;

/// Asymptotic drift sum_i pi(i) (mean_i + sum_j q_ij E Delta_ij) and its
/// sign, with tri-state mean queries guarding against heavy tails.
pub fn drift_dichotomy(spec: &MapSpec) -> Result<DichotomyResult> {
    let n = spec.phases();
    let pi = stationary_of_q(&spec.q)?;
    let mut phase_means = Vec::with_capacity(n);
    let mut drift = 0.0;
    let mut determined = true;
    for i in 0..n {
        let mut m = spec.components[i].mean_rate();
        if let Extended::Finite(base) = m {
            let mut acc = base;
            for j in 0..n {
                if j != i && spec.q[i][j] > 0.0 {
                    if let Some(law) = spec.transitions[i][j].as_ref() {
                        match law.mean() {
                            Extended::Finite(v) => acc += spec.q[i][j] * v,
                            other => {
                                m = other;
                                break;
                            }
                        }
                    }
                }
            }
            if let Extended::Finite(_) = m {
                m = Extended::Finite(acc);
            }
        }
        match m {
            Extended::Finite(v) => drift += pi[i] * v,
            _ => determined = false,
        }
        phase_means.push(m);
    }
    let verdict = if !determined {
        DriftVerdict::Undetermined
    } else if drift > DRIFT_TOL {
        DriftVerdict::Transient
    } else if drift < -DRIFT_TOL {
        DriftVerdict::NegativeDrift
    } else {
        DriftVerdict::Oscillating
    };
    Ok(DichotomyResult { verdict, drift: if determined { drift } else { f64::NAN }, phase_means })
}

/// Test-function family with closed-form Q_lambda action: shapes e^{c y},
/// indicators, optionally restricted to one phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    One,
    /// f(y) = exp(coeff * y); coeff < 0 decays, coeff > 0 grows.
    Exp { coeff: f64 },
    /// f(y) = 1 for lo <= y < hi.
    Indicator { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFn {
    pub shape: Shape,
    /// None: all phases; Some(p): f vanishes off phase p.
    pub phase: Option<usize>,
}

impl TestFn {
    pub fn one() -> Self {
        TestFn { shape: Shape::One, phase: None }
    }

    pub fn exp(coeff: f64) -> Self {
        TestFn { shape: Shape::Exp { coeff }, phase: None }
    }

    pub fn eval(&self, y: f64, phase: usize) -> f64 {
        if let Some(p) = self.phase {
            if p != phase {
                return 0.0;
            }
        }
        match self.shape {
            Shape::One => 1.0,
            Shape::Exp { coeff } => (coeff * y).exp(),
            Shape::Indicator { lo, hi } => {
                if y >= lo && y < hi {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn bounded(&self) -> bool {
        !matches!(self.shape, Shape::Exp { coeff } if coeff > 0.0)
    }
}

/// Q_lambda f(x, i) = integral_0^x e^{-lam t} f(x - t, i) dt, closed form.
pub fn q_lambda(f: &TestFn, x: f64, phase: usize, lam: f64) -> f64 {
    if let Some(p) = f.phase {
        if p != phase {
            return 0.0;
        }
    }
    if x <= 0.0 {
        return 0.0;
    }
    match f.shape {
        Shape::One => (1.0 - (-lam * x).exp()) / lam,
        Shape::Exp { coeff } => {
            let s = lam + coeff;
            if s.abs() < 1e-14 {
                x * (coeff * x).exp()
            } else {
                ((coeff * x).exp() - (-lam * x).exp()) / s
            }
        }
        Shape::Indicator { lo, hi } => {
            // x - t in [lo, hi) <=> t in (x - hi, x - lo]
            let a = (x - hi).max(0.0);
            let b = (x - lo).max(0.0).min(x);
            if b <= a {
                0.0
            } else {
                ((-lam * a).exp() - (-lam * b).exp()) / lam
            }
        }
    }
}

/// Q_lambda for an arbitrary function handle, by adaptive quadrature.
pub fn q_lambda_fn<F: Fn(f64, usize) -> f64>(
    f: F,
    x: f64,
    phase: usize,
    lam: f64,
    tol: f64,
) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    quad::integrate(|t| (-lam * t).exp() * f(x - t, phase), 0.0, x, tol)
}

/// E_nu[Q_lambda f(Y, phase)] against a probability law, closed form for the
/// exponential shapes and quadrature otherwise.
pub fn expected_q_lambda(f: &TestFn, law: &JumpLaw, phase: usize, lam: f64) -> Result<f64> {
    if let Some(p) = f.phase {
        if p != phase {
            return Ok(0.0);
        }
    }
    match f.shape {
        Shape::One => Ok((1.0 - law.laplace(lam)) / lam),
        Shape::Exp { coeff } => {
            let s = lam + coeff;
            if s.abs() < 1e-14 {
                // E[Y e^{coeff Y}] by quadrature
                return Ok(law.integrate(|y| y * (coeff * y).exp(), 1e-11));
            }
            let m = match law.exp_moment(coeff) {
                Extended::Finite(v) => v,
                _ => {
                    return Err(MapError::MomentCondition(format!(
                        "law lacks the exponential moment at {coeff}: {law:?}"
                    )))
                }
            };
            Ok((m - law.laplace(lam)) / s)
        }
        Shape::Indicator { .. } => Ok(law.integrate(|y| q_lambda(f, y, phase, lam), 1e-10)),
    }
}

/// The vector psi(f, lam) of the resolvent formula.
pub fn resolvent_source(spec: &LadderSpec, f: &TestFn, lam: f64) -> Result<DVector<f64>> {
    let n = spec.phases();
    let mut psi = DVector::zeros(n);
    for i in 0..n {
        let mut acc = spec.drifts[i] * f.eval(0.0, i);
        if let Some((rate, law)) = &spec.jumps[i] {
            acc += rate * expected_q_lambda(f, law, i, lam)?;
        }
        for j in 0..n {
            if j != i && spec.q[i][j] > 0.0 {
                let e = match spec.transitions[i][j].as_ref() {
                    Some(law) => expected_q_lambda(f, law, j, lam)?,
                    None => q_lambda(f, 0.0, j, lam),
                };
                acc += spec.q[i][j] * e;
            }
        }
        psi[i] = acc;
    }
    Ok(psi)
}

/// Closed-form lambda-resolvent of the overshoot process:
/// U_lam f(x, i) = Q_lam f(x, i) + e^{-lam x} (Phi+(lam)^{-1} psi(f, lam))_i.
pub fn resolvent(spec: &LadderSpec, f: &TestFn, x: f64, phase: usize, lam: f64) -> Result<f64> {
    let boundary = resolvent_boundary(spec, f, lam)?;
    Ok(q_lambda(f, x, phase, lam) + (-lam * x).exp() * boundary[phase])
}

/// The vector (U_lam f(0, i))_i = Phi+(lam)^{-1} psi(f, lam).
pub fn resolvent_boundary(spec: &LadderSpec, f: &TestFn, lam: f64) -> Result<DVector<f64>> {
    debug_assert!(lam > 0.0);
    let phi = ladder_laplace_exponent(spec, lam);
    let psi = resolvent_source(spec, f, lam)?;
    phi.lu().solve(&psi).ok_or(MapError::SingularExponent)
}

/// Binned overshoot law: explicit zero atoms plus bin masses per phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OvershootLawEval {
    pub edges: Vec<f64>,
    /// Mass at {0} per phase.
    pub atoms: Vec<f64>,
    /// `bins[phase][k]` = mass of `[edges[k], edges[k+1])` excluding atoms.
    pub bins: Vec<Vec<f64>>,
    /// Mass above the last edge, per phase.
    pub tail: Vec<f64>,
    /// Total mass of the (possibly unnormalized) measure.
    pub total_mass: f64,
}

impl OvershootLawEval {
    pub fn phases(&self) -> usize {
        self.atoms.len()
    }

    pub fn normalized(&self) -> OvershootLawEval {
        let z = self.total_mass;
        OvershootLawEval {
            edges: self.edges.clone(),
            atoms: self.atoms.iter().map(|a| a / z).collect(),
            bins: self.bins.iter().map(|r| r.iter().map(|b| b / z).collect()).collect(),
            tail: self.tail.iter().map(|t| t / z).collect(),
            total_mass: 1.0,
        }
    }

    pub fn phase_mass(&self, i: usize) -> f64 {
        self.atoms[i] + self.bins[i].iter().sum::<f64>() + self.tail[i]
    }
}

/// Density of the invariant overshoot measure at (y, i), y > 0:
/// pi+(i) PiBar_i(y) + sum_j pi+(j) q_ji FBar_ji(y).
pub fn invariant_density(spec: &LadderSpec, pi_plus: &[f64], y: f64, i: usize) -> f64 {
    let mut v = pi_plus[i] * spec.levy_tail(i, y);
    for j in 0..spec.phases() {
        if j != i && spec.q[j][i] > 0.0 {
            if let Some(law) = spec.transitions[j][i].as_ref() {
                v += pi_plus[j] * spec.q[j][i] * law.tail(y);
            }
        }
    }
    v
}

/// The invariant measure chi: atoms pi+(i) d_i at zero, tail-function
/// density, and total mass equal to the mean ladder height per unit time
/// under pi+ (closed form).
pub fn invariant_measure(spec: &LadderSpec, edges: &[f64]) -> Result<OvershootLawEval> {
    let n = spec.phases();
    let pi_plus = stationary_of_q(&spec.q)?;
    let mut atoms = Vec::with_capacity(n);
    let mut bins = vec![Vec::with_capacity(edges.len().saturating_sub(1)); n];
    let mut tail = vec![0.0; n];
    let mut total = 0.0;
    for i in 0..n {
        atoms.push(pi_plus[i] * spec.drifts[i]);
        match spec.mean_height_rate(i) {
            Extended::Finite(m) => total += pi_plus[i] * m,
            _ => total = f64::INFINITY,
        }
        for w in edges.windows(2) {
            bins[i].push(bin_mass(spec, &pi_plus, i, w[0], w[1]));
        }
        if let Some(last) = edges.last() {
            tail[i] = bin_mass(spec, &pi_plus, i, *last, f64::INFINITY);
        }
    }
    Ok(OvershootLawEval { edges: edges.to_vec(), atoms, bins, tail, total_mass: total })
}

fn bin_mass(spec: &LadderSpec, pi_plus: &[f64], i: usize, lo: f64, hi: f64) -> f64 {
    let mut v = pi_plus[i] * spec.levy_tail_integral(i, lo, hi);
    for j in 0..spec.phases() {
        if j != i && spec.q[j][i] > 0.0 {
            if let Some(law) = spec.transitions[j][i].as_ref() {
                v += pi_plus[j] * spec.q[j][i] * law.tail_integral(lo, hi);
            }
        }
    }
    v
}

/// The stationary overshoot distribution rho = chi / mass, or an error when
/// the mean ladder height diverges.
pub fn stationary_distribution(spec: &LadderSpec, edges: &[f64]) -> Result<OvershootLawEval> {
    let chi = invariant_measure(spec, edges)?;
    if !chi.total_mass.is_finite() {
        return Err(MapError::NoStationaryDistribution(
            "mean ladder height is infinite".into(),
        ));
    }
    let rho = chi.normalized();
    // normalization sanity on the binned view is the caller's business; the
    // exact constraint atoms + integral density = 1 is checked in tests
    Ok(rho)
}

/// Marginal law of (O_t, J_t) from start (x, i) by numerical convolution of
/// the ladder Levy system against potential-measure estimates on a grid.
/// For x >= t the sawtooth law is deterministic: a point mass at (x - t, i).
pub fn overshoot_marginal(
    spec: &LadderSpec,
    potential: &crate::ladder_sim::PotentialGrid,
    x: f64,
    start_phase: usize,
    t: f64,
    y_edges: &[f64],
) -> Result<OvershootLawEval> {
    let n = spec.phases();
    let cells = y_edges.len() - 1;
    let mut atoms = vec![0.0; n];
    let mut bins = vec![vec![0.0; cells]; n];
    let mut tail = vec![0.0; n];
    if x >= t {
        // deterministic decay
        let y = x - t;
        if y == 0.0 {
            atoms[start_phase] = 1.0;
        } else if y >= *y_edges.last().unwrap() {
            tail[start_phase] = 1.0;
        } else {
            let k = y_edges.partition_point(|e| *e <= y) - 1;
            bins[start_phase][k] = 1.0;
        }
        return Ok(OvershootLawEval { edges: y_edges.to_vec(), atoms, bins, tail, total_mass: 1.0 });
    }
    let span = t - x;
    let top = *potential.edges.last().ok_or_else(|| MapError::Invalid("empty potential".into()))?;
    if span > top {
        return Err(MapError::InsufficientData(format!(
            "potential grid covers [0, {top}) but the convolution needs [0, {span}]"
        )));
    }
    // creeping atom: d_j times the potential density at the passage depth
    for j in 0..n {
        if spec.drifts[j] > 0.0 {
            let k = potential
                .edges
                .partition_point(|e| *e <= span)
                .saturating_sub(1)
                .min(potential.edges.len() - 2);
            let w = potential.edges[k + 1] - potential.edges[k];
            let density = potential.mass[start_phase][j][k] / w;
            atoms[j] = spec.drifts[j] * density;
        }
    }
    // jump overshoot: sum over potential cells below the span
    for j in 0..n {
        for (cell, w) in potential.edges.windows(2).enumerate() {
            if w[0] >= span {
                break;
            }
            let frac = if w[1] <= span { 1.0 } else { (span - w[0]) / (w[1] - w[0]) };
            let wmid = 0.5 * (w[0] + w[1].min(span));
            let depth = span - wmid; // distance below the level when jumping
            // within-phase Levy jumps
            if let Some((rate, law)) = &spec.jumps[j] {
                let m = potential.mass[start_phase][j][cell] * frac;
                if m > 0.0 {
                    for (k, yw) in y_edges.windows(2).enumerate() {
                        bins[j][k] += m * rate * (law.tail(depth + yw[0]) - law.tail(depth + yw[1]));
                    }
                    tail[j] += m * rate * law.tail(depth + *y_edges.last().unwrap());
                }
            }
            // transitional jumps k -> j while the height sits in this cell
            for k_from in 0..n {
                if k_from == j || spec.q[k_from][j] == 0.0 {
                    continue;
                }
                if let Some(law) = spec.transitions[k_from][j].as_ref() {
                    let m = potential.mass[start_phase][k_from][cell] * frac * spec.q[k_from][j];
                    if m > 0.0 {
                        for (k, yw) in y_edges.windows(2).enumerate() {
                            bins[j][k] += m * (law.tail(depth + yw[0]) - law.tail(depth + yw[1]));
                        }
                        tail[j] += m * law.tail(depth + *y_edges.last().unwrap());
                    }
                }
            }
        }
    }
    let total: f64 = atoms.iter().sum::<f64>()
        + bins.iter().flatten().sum::<f64>()
        + tail.iter().sum::<f64>();
    Ok(OvershootLawEval { edges: y_edges.to_vec(), atoms, bins, tail, total_mass: total })
}

/// Drift certificate for the exponential Lyapunov function V(x) = e^{lam x}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub lambda: f64,
    pub beta0: f64,
    pub b: f64,
    pub holds: bool,
    /// max over the grid of R_lam V - (beta0 V + b).
    pub max_violation: f64,
}

/// Exponential-case drift certificate: R_lam V <= V/2 + b with
/// b = lam ||Phi+(lam)^{-1}||_inf sum_i psi_i(V, lam), verified pointwise on
/// the grid via the resolvent formula.
pub fn lyapunov_drift_report(spec: &LadderSpec, lam: f64, grid: &[f64]) -> Result<LyapunovReport> {
    // moment gate with the offending law named
    for (i, j) in spec.jumps.iter().enumerate() {
        if let Some((_, law)) = j {
            if !law.exp_moment(lam).is_finite() {
                return Err(MapError::MomentCondition(format!(
                    "phase {i} jump law lacks the exponential {lam}-moment"
                )));
            }
        }
    }
    for i in 0..spec.phases() {
        for j in 0..spec.phases() {
            if i != j && spec.q[i][j] > 0.0 {
                if let Some(law) = spec.transitions[i][j].as_ref() {
                    if !law.exp_moment(lam).is_finite() {
                        return Err(MapError::MomentCondition(format!(
                            "transitional law F+[{i}][{j}] lacks the exponential {lam}-moment"
                        )));
                    }
                }
            }
        }
    }
    let v = TestFn::exp(lam);
    let phi = ladder_laplace_exponent(spec, lam);
    let inv = phi.clone().try_inverse().ok_or(MapError::SingularExponent)?;
    let norm_inf = (0..inv.nrows())
        .map(|r| (0..inv.ncols()).map(|c| inv[(r, c)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    let psi = resolvent_source(spec, &v, lam)?;
    let b = lam * norm_inf * psi.iter().sum::<f64>();
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..spec.phases() {
        for &x in grid {
            let r = lam * resolvent(spec, &v, x, i, lam)?;
            let bound = 0.5 * (lam * x).exp() + b;
            max_violation = max_violation.max(r - bound);
        }
    }
    Ok(LyapunovReport { lambda: lam, beta0: 0.5, b, holds: max_violation <= 1e-8, max_violation })
}

/// Subgeometric certificate for the polynomial-hybrid Lyapunov function
/// V(x) = e^{lam x} on [0,1), x^lam on [1, inf), lam > 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubgeometricReport {
    pub lambda: f64,
    pub b_tilde: f64,
    /// Threshold x* beyond which the drift inequality needs no indicator.
    pub x_star: f64,
    /// Constant of the indicator term on the small set [0, x*].
    pub c_tilde: f64,
    pub holds: bool,
}

/// Polynomial-case drift data: b~ from the closed-form bound, the petite
/// threshold x*, and the indicator constant.
pub fn subgeometric_drift_report(spec: &LadderSpec, lam: f64) -> Result<SubgeometricReport> {
    if !(lam > 1.0) {
        return Err(MapError::MomentCondition("polynomial case needs lam > 1".into()));
    }
    for (i, j) in spec.jumps.iter().enumerate() {
        if let Some((_, law)) = j {
            if !law.poly_moment_above(lam, 1.0).is_finite() {
                return Err(MapError::MomentCondition(format!(
                    "phase {i} jump law lacks the polynomial {lam}-moment"
                )));
            }
        }
    }
    let phi = ladder_laplace_exponent(spec, lam);
    let inv = phi.clone().try_inverse().ok_or(MapError::SingularExponent)?;
    let norm_inf = (0..inv.nrows())
        .map(|r| (0..inv.ncols()).map(|c| inv[(r, c)].abs()).sum::<f64>())
        .fold(0.0f64, f64::max);
    // psi with the hybrid V via quadrature of Q_lam V against each measure
    let q_hybrid = |x: f64| -> f64 {
        // e^{-lam x} int_0^x e^{lam u} V(u) du
        let a = x.min(1.0);
        let head = ((2.0 * lam * a).exp() - 1.0) / (2.0 * lam);
        let tail = if x > 1.0 {
            quad::integrate(|u| (lam * u).exp() * u.powf(lam), 1.0, x, 1e-10)
        } else {
            0.0
        };
        (-lam * x).exp() * (head + tail)
    };
    let mut sum = 0.0;
    for i in 0..spec.phases() {
        let mut acc = spec.drifts[i] * q_hybrid(0.0);
        if let Some((rate, law)) = &spec.jumps[i] {
            acc += rate * law.integrate(|y| q_hybrid(y.max(0.0)), 1e-9);
        }
        for j in 0..spec.phases() {
            if j != i && spec.q[i][j] > 0.0 {
                if let Some(law) = spec.transitions[i][j].as_ref() {
                    acc += spec.q[i][j] * law.integrate(|y| q_hybrid(y.max(0.0)), 1e-9);
                }
            }
        }
        sum += acc;
    }
    let b_tilde = lam * norm_inf * sum;
    // x*: e^{-lam x}(b~ + e^lam + int_1^x (lam-1) e^{lam t} t^{lam-2} dt) <= x^{lam-1}/2
    let psi_fn = |x: f64| -> f64 {
        let integral = if x > 1.0 {
            quad::integrate(|t| (lam - 1.0) * (lam * t).exp() * t.powf(lam - 2.0), 1.0, x, 1e-9)
        } else {
            0.0
        };
        (-lam * x).exp() * (b_tilde + lam.exp() + integral)
    };
    let mut x_star = 1.5;
    while psi_fn(x_star) > 0.5 * x_star.powf(lam - 1.0) && x_star < 1e6 {
        x_star *= 1.5;
    }
    let mut c_tilde = (lam - 1.0).exp();
    let mut x = 0.0;
    while x <= x_star {
        c_tilde = c_tilde.max((lam - 1.0).exp() + psi_fn(x));
        x += 0.05 * (1.0 + x_star / 40.0);
    }
    Ok(SubgeometricReport { lambda: lam, b_tilde, x_star, c_tilde, holds: x_star < 1e6 })
}

/// Subgeometric total-variation rate Xi(t) = 2 (1 + t / (2 lam))^{1 - lam}.
pub fn subgeometric_rate(lam: f64, t: f64) -> f64 {
    debug_assert!(lam > 1.0 && t >= 0.0);
    2.0 * (1.0 + t / (2.0 * lam)).powf(1.0 - lam)
}

/// Complex matrix exponential (scaling and squaring via nalgebra).
pub fn matrix_exp(m: &DMatrix<C64>) -> DMatrix<C64> {
    m.clone().exp()
}
