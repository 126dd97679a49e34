//! Specification types for Markov additive processes and their ascending
//! ladder subordinators, with structural validation, duality and
//! irreducibility checks.
//!
//! Validation guards are written as negated comparisons (`!(x > 0.0)`) so
//! NaN parameters fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use crate::error::{MapError, Result};
use crate::law::{stable_constants, Extended, JumpLaw};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Conservativeness tolerance for rate matrices ingested from decimal
/// config literals.
pub const RATE_MATRIX_TOL: f64 = 1e-12;

/// Largest supported modulating space; the dense matrix analytics assume
/// tiny phase counts.
pub const MAX_PHASES: usize = 16;

/// Jump structure of one per-phase Levy component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum JumpComponent {
    None,
    /// Finite-activity jumps: Poisson(rate) events with i.i.d. law sizes.
    CompoundPoisson { rate: f64, law: JumpLaw },
    /// Strictly stable density c+ x^{-a-1} on (0,inf), c- |x|^{-a-1} on (-inf,0).
    StableDensity { alpha: f64, c_plus: f64, c_minus: f64 },
    /// Log-radius Levy density of a strictly stable process in the given
    /// sign phase (+1 or -1); infinite activity, bounded variation (alpha<1).
    LampertiStable { alpha: f64, rho: f64, phase: i8 },
}

/// One per-phase Levy component (a_i, b_i, jump part, killing).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyComponentSpec {
    pub drift: f64,
    /// Gaussian volatility b_i >= 0.
    #[serde(default)]
    pub gaussian: f64,
    #[serde(default = "default_jumps")]
    pub jumps: JumpComponent,
    /// Killing rate; only meaningful for ladder components.
    #[serde(default)]
    pub killing: f64,
}

fn default_jumps() -> JumpComponent {
    JumpComponent::None
}

impl LevyComponentSpec {
    pub fn drift_only(drift: f64) -> Self {
        LevyComponentSpec { drift, gaussian: 0.0, jumps: JumpComponent::None, killing: 0.0 }
    }

    pub fn cpp(drift: f64, rate: f64, law: JumpLaw) -> Self {
        LevyComponentSpec { drift, gaussian: 0.0, jumps: JumpComponent::CompoundPoisson { rate, law }, killing: 0.0 }
    }

    /// Unbounded variation of the component's paths.
    pub fn unbounded_variation(&self) -> bool {
        if self.gaussian > 0.0 {
            return true;
        }
        match &self.jumps {
            JumpComponent::StableDensity { alpha, .. } => *alpha >= 1.0,
            _ => false,
        }
    }

    /// Does the Levy measure charge (0, inf)?
    pub fn levy_positive_support(&self) -> bool {
        match &self.jumps {
            JumpComponent::None => false,
            JumpComponent::CompoundPoisson { law, .. } => law.has_positive_support(),
            JumpComponent::StableDensity { c_plus, .. } => *c_plus > 0.0,
            JumpComponent::LampertiStable { alpha, rho, phase } => {
                let (cp, cm) = stable_constants(*alpha, *rho);
                if *phase >= 0 { cp > 0.0 } else { cm > 0.0 }
            }
        }
    }

    /// Mean displacement per unit time, a_i + integral x Pi_i(dx), tri-state.
    pub fn mean_rate(&self) -> Extended {
        match &self.jumps {
            JumpComponent::None => Extended::Finite(self.drift),
            JumpComponent::CompoundPoisson { rate, law } => match law.mean() {
                Extended::Finite(m) => Extended::Finite(self.drift + rate * m),
                other => other,
            },
            JumpComponent::StableDensity { alpha, c_plus, c_minus } => {
                if *alpha > 1.0 {
                    // strictly stable: centered
                    Extended::Finite(self.drift)
                } else if *alpha == 1.0 && (c_plus - c_minus).abs() < 1e-14 {
                    Extended::Finite(self.drift)
                } else {
                    Extended::Indeterminate
                }
            }
            JumpComponent::LampertiStable { .. } => {
                let law = self.lamperti_levy_law().expect("lamperti kind");
                Extended::Finite(self.drift + law.integrate(|x| x, 1e-10))
            }
        }
    }

    /// The Levy measure as a `JumpLaw` measure, where representable.
    pub fn levy_measure(&self) -> Option<JumpLaw> {
        match &self.jumps {
            JumpComponent::None => None,
            JumpComponent::CompoundPoisson { rate, law } => Some(JumpLaw::FiniteMixture {
                weights: vec![*rate],
                laws: vec![law.clone()],
            }),
            JumpComponent::StableDensity { .. } => None,
            JumpComponent::LampertiStable { .. } => self.lamperti_levy_law(),
        }
    }

    fn lamperti_levy_law(&self) -> Option<JumpLaw> {
        match &self.jumps {
            JumpComponent::LampertiStable { alpha, rho, phase } => Some(if *phase >= 0 {
                JumpLaw::LogStablePositive { alpha: *alpha, rho: *rho }
            } else {
                JumpLaw::LogStableNegative { alpha: *alpha, rho: *rho }
            }),
            _ => None,
        }
    }
}

/// Full description of an (unkilled) MAP with finite modulating space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    pub components: Vec<LevyComponentSpec>,
    /// Modulator rate matrix Q, row-conservative.
    pub q: Vec<Vec<f64>>,
    /// Transitional jump laws `F[i][j]`; None on the diagonal and wherever
    /// `q[i][j]` = 0.
    pub transitions: Vec<Vec<Option<JumpLaw>>>,
}

impl MapSpec {
    pub fn phases(&self) -> usize {
        self.components.len()
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        to_dmatrix(&self.q)
    }

    pub fn transition_law(&self, i: usize, j: usize) -> Option<&JumpLaw> {
        self.transitions[i][j].as_ref()
    }

    /// Every component a compound Poisson process with strictly positive
    /// drift and no Gaussian part: paths are piecewise linear and the ladder
    /// height creeps in every phase, so time at the maximum is a valid local
    /// time.
    pub fn creeping_class(&self) -> Result<()> {
        for (i, c) in self.components.iter().enumerate() {
            if c.gaussian != 0.0 {
                return Err(MapError::Unsupported(format!(
                    "phase {i}: Gaussian component excludes time-at-maximum local time"
                )));
            }
            if c.drift <= 0.0 {
                return Err(MapError::Unsupported(format!(
                    "phase {i}: ladder statistics need strictly positive drift"
                )));
            }
            match &c.jumps {
                JumpComponent::None | JumpComponent::CompoundPoisson { .. } => {}
                _ => {
                    return Err(MapError::Unsupported(format!(
                        "phase {i}: infinite-activity component; supply a truncation instead"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Description of a MAP subordinator (the ascending ladder process).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderSpec {
    pub drifts: Vec<f64>,
    /// Per-phase compound Poisson jumps on (0, inf): (rate, law), or None.
    pub jumps: Vec<Option<(f64, JumpLaw)>>,
    pub q: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Option<JumpLaw>>>,
    #[serde(default)]
    pub killing: Vec<f64>,
}

impl LadderSpec {
    pub fn phases(&self) -> usize {
        self.drifts.len()
    }

    pub fn q_matrix(&self) -> DMatrix<f64> {
        to_dmatrix(&self.q)
    }

    pub fn unkilled(&self) -> bool {
        self.killing.iter().all(|k| *k == 0.0)
    }

    /// Tail of the phase-i Levy measure rate * law.tail(y).
    pub fn levy_tail(&self, i: usize, y: f64) -> f64 {
        match &self.jumps[i] {
            Some((rate, law)) => rate * law.tail(y),
            None => 0.0,
        }
    }

    /// integral_lo^hi of the phase-i Levy tail.
    pub fn levy_tail_integral(&self, i: usize, lo: f64, hi: f64) -> f64 {
        match &self.jumps[i] {
            Some((rate, law)) => rate * law.tail_integral(lo, hi),
            None => 0.0,
        }
    }

    /// `E^{0,i}[H_1]` = d_i + integral of the Levy tail + transitional means.
    pub fn mean_height_rate(&self, i: usize) -> Extended {
        let mut acc = self.drifts[i];
        if let Some((rate, law)) = &self.jumps[i] {
            match law.mean() {
                Extended::Finite(m) => acc += rate * m,
                other => return other,
            }
        }
        for j in 0..self.phases() {
            if j == i {
                continue;
            }
            let qij = self.q[i][j];
            if qij > 0.0 {
                if let Some(law) = &self.transitions[i][j] {
                    match law.mean() {
                        Extended::Finite(m) => acc += qij * m,
                        other => return other,
                    }
                }
            }
        }
        Extended::Finite(acc)
    }
}

/// Outcome of structural validation; `ok` holds exactly when no violation
/// was recorded.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<(String, String)>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, msg: impl Into<String>) {
        self.violations.push((path.into(), msg.into()));
    }
}

fn validate_rate_matrix(q: &[Vec<f64>], n: usize, path: &str, report: &mut ValidationReport) {
    if q.len() != n || q.iter().any(|r| r.len() != n) {
        report.push(path, format!("rate matrix must be {n}x{n}"));
        return;
    }
    for i in 0..n {
        let mut sum = 0.0;
        for j in 0..n {
            sum += q[i][j];
            if i != j && q[i][j] < 0.0 {
                report.push(format!("{path}[{i}][{j}]"), "negative off-diagonal rate");
            }
            if i == j && q[i][j] > 0.0 {
                report.push(format!("{path}[{i}][{i}]"), "positive diagonal entry");
            }
        }
        if sum.abs() > RATE_MATRIX_TOL {
            report.push(format!("{path} row {i}"), format!("row not conservative (sum {sum:.3e})"));
        }
    }
}

fn validate_probability_law(law: &JumpLaw, path: &str, report: &mut ValidationReport) {
    let m = law.total_mass();
    if !m.is_finite() {
        report.push(path, "law has infinite mass; jump distributions must be probability laws");
    } else if (m - 1.0).abs() > 1e-9 {
        report.push(path, format!("law mass {m} != 1"));
    }
    validate_law_params(law, path, report);
}

fn validate_law_params(law: &JumpLaw, path: &str, report: &mut ValidationReport) {
    match law {
        JumpLaw::Exponential { rate } => {
            if !(*rate > 0.0) {
                report.push(path, "exponential rate must be positive");
            }
        }
        JumpLaw::Pareto { index, scale } => {
            if !(*index > 0.0 && *scale > 0.0) {
                report.push(path, "pareto index and scale must be positive");
            }
        }
        JumpLaw::UniformInterval { lo, hi } => {
            if !(hi > lo) {
                report.push(path, "uniform interval must have lo < hi");
            }
        }
        JumpLaw::Negated { inner } => validate_law_params(inner, path, report),
        JumpLaw::LogStablePositive { alpha, rho } | JumpLaw::LogStableNegative { alpha, rho } => {
            if !(*alpha > 0.0 && *alpha < 2.0 && *rho > 0.0 && *rho < 1.0) {
                report.push(path, "log-stable parameters out of range");
            }
        }
        JumpLaw::LogStableSwitch { alpha } => {
            if !(*alpha > 0.0 && *alpha < 2.0) {
                report.push(path, "log-stable switch index out of range");
            }
        }
        JumpLaw::TruncatedAbove { inner, .. } | JumpLaw::TruncatedBelow { inner, .. } => {
            validate_law_params(inner, path, report);
            if !(law.total_mass() > 0.0) {
                report.push(path, "truncation removes all mass");
            }
        }
        JumpLaw::FiniteMixture { weights, laws } => {
            if weights.len() != laws.len() || weights.is_empty() {
                report.push(path, "mixture weights and laws must align and be non-empty");
            }
            if weights.iter().any(|w| !(*w >= 0.0)) {
                report.push(path, "mixture weights must be nonnegative");
            }
            for l in laws {
                validate_law_params(l, path, report);
            }
        }
        JumpLaw::PointMass { .. } => {}
    }
}

fn validate_component(c: &LevyComponentSpec, path: &str, ladder_use: bool, report: &mut ValidationReport) {
    if !(c.gaussian >= 0.0) {
        report.push(format!("{path}.gaussian"), "volatility must be nonnegative");
    }
    if !(c.killing >= 0.0) {
        report.push(format!("{path}.killing"), "killing rate must be nonnegative");
    }
    if !ladder_use && c.killing > 0.0 {
        report.push(format!("{path}.killing"), "parent MAP must be unkilled");
    }
    match &c.jumps {
        JumpComponent::None => {}
        JumpComponent::CompoundPoisson { rate, law } => {
            if !(*rate > 0.0 && rate.is_finite()) {
                report.push(format!("{path}.jumps.rate"), "compound Poisson rate must be positive and finite");
            }
            validate_probability_law(law, &format!("{path}.jumps.law"), report);
        }
        JumpComponent::StableDensity { alpha, c_plus, c_minus } => {
            if !(*alpha > 0.0 && *alpha < 2.0) {
                report.push(format!("{path}.jumps.alpha"), "stable index must lie in (0,2)");
            }
            if !(*c_plus >= 0.0 && *c_minus >= 0.0 && c_plus + c_minus > 0.0) {
                report.push(format!("{path}.jumps"), "stable asymmetry constants invalid");
            }
            if (*alpha - 1.0).abs() < 1e-12 && (c_plus - c_minus).abs() > 1e-12 {
                report.push(format!("{path}.jumps"), "alpha = 1 supported only in the symmetric case");
            }
        }
        JumpComponent::LampertiStable { alpha, rho, phase } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                report.push(format!("{path}.jumps.alpha"), "log-stable component requires alpha in (0,1)");
            }
            if !(*rho > 0.0 && *rho < 1.0) {
                report.push(format!("{path}.jumps.rho"), "positivity parameter out of (0,1)");
            }
            if *phase != 1 && *phase != -1 {
                report.push(format!("{path}.jumps.phase"), "phase must be +1 or -1");
            }
        }
    }
}

/// Structural validation of a MAP spec; every violation is reported, none
/// is thrown.
pub fn validate(spec: &MapSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spec.phases();
    if n == 0 {
        report.push("components", "at least one phase required");
        return report;
    }
    if n > MAX_PHASES {
        report.push("components", format!("{n} phases exceed the supported bound {MAX_PHASES}"));
        return report;
    }
    validate_rate_matrix(&spec.q, n, "Q", &mut report);
    for (i, c) in spec.components.iter().enumerate() {
        validate_component(c, &format!("components[{i}]"), false, &mut report);
    }
    if spec.transitions.len() != n || spec.transitions.iter().any(|r| r.len() != n) {
        report.push("F", format!("transitional grid must be {n}x{n}"));
        return report;
    }
    for i in 0..n {
        for j in 0..n {
            if let Some(law) = &spec.transitions[i][j] {
                if i == j {
                    report.push(format!("F[{i}][{i}]"), "diagonal transitional jump");
                } else if spec.q.len() == n && spec.q[i].len() == n && spec.q[i][j] == 0.0 {
                    report.push(
                        format!("F[{i}][{j}]"),
                        "transitional law attached to a zero transition rate",
                    );
                }
                validate_probability_law(law, &format!("F[{i}][{j}]"), &mut report);
            }
        }
    }
    report
}

/// Structural validation of a ladder (MAP subordinator) spec.
pub fn validate_ladder(spec: &LadderSpec) -> ValidationReport {
    let mut report = ValidationReport::default();
    let n = spec.phases();
    if n == 0 {
        report.push("drifts", "at least one phase required");
        return report;
    }
    if n > MAX_PHASES {
        report.push("drifts", format!("{n} phases exceed the supported bound {MAX_PHASES}"));
        return report;
    }
    validate_rate_matrix(&spec.q, n, "Q+", &mut report);
    if spec.jumps.len() != n {
        report.push("jumps", format!("expected {n} per-phase jump entries"));
        return report;
    }
    if !spec.killing.is_empty() && spec.killing.len() != n {
        report.push("killing", format!("expected {n} killing rates"));
    }
    for (i, d) in spec.drifts.iter().enumerate() {
        if !(*d >= 0.0) {
            report.push(format!("drifts[{i}]"), "ladder drift must be nonnegative");
        }
        let has_jumps = match &spec.jumps[i] {
            Some((rate, law)) => {
                if !(*rate > 0.0 && rate.is_finite()) {
                    report.push(format!("jumps[{i}].rate"), "rate must be positive and finite");
                }
                validate_probability_law(law, &format!("jumps[{i}].law"), &mut report);
                if !law.supported_on_nonnegative() {
                    report.push(format!("jumps[{i}].law"), "ladder jumps must be supported on [0,inf)");
                }
                true
            }
            None => false,
        };
        if *d == 0.0 && !has_jumps {
            report.push(
                format!("phase {i}"),
                "subordinator stalls: zero drift and no jumps",
            );
        }
    }
    for k in &spec.killing {
        if !(*k >= 0.0) {
            report.push("killing", "killing rates must be nonnegative");
        }
    }
    if spec.transitions.len() == n && spec.transitions.iter().all(|r| r.len() == n) {
        for i in 0..n {
            for j in 0..n {
                if let Some(law) = &spec.transitions[i][j] {
                    if i == j {
                        report.push(format!("F+[{i}][{i}]"), "diagonal transitional jump");
                    } else if spec.q[i][j] == 0.0 {
                        report.push(
                            format!("F+[{i}][{j}]"),
                            "transitional law attached to a zero transition rate",
                        );
                    }
                    validate_probability_law(law, &format!("F+[{i}][{j}]"), &mut report);
                    if !law.supported_on_nonnegative() {
                        report.push(format!("F+[{i}][{j}]"), "ladder transitional jumps must be supported on [0,inf)");
                    }
                }
            }
        }
    } else {
        report.push("F+", format!("transitional grid must be {n}x{n}"));
    }
    report
}

pub fn to_dmatrix(q: &[Vec<f64>]) -> DMatrix<f64> {
    let n = q.len();
    DMatrix::from_fn(n, n, |i, j| q[i][j])
}

/// Strong connectivity of the directed graph of positive off-diagonal
/// entries.
pub fn q_matrix_irreducible(q: &[Vec<f64>]) -> bool {
    let n = q.len();
    if n == 0 {
        return false;
    }
    if n == 1 {
        return true;
    }
    let reach = |forward: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if forward { q[i][j] } else { q[j][i] };
                if i != j && edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    reach(true).into_iter().all(|b| b) && reach(false).into_iter().all(|b| b)
}

/// Stationary distribution of an irreducible conservative rate matrix:
/// pi Q = 0, sum pi = 1, pi > 0.
pub fn stationary_of_q(q: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = q.len();
    if !q_matrix_irreducible(q) {
        return Err(MapError::ReducibleRateMatrix);
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // solve Q^T pi = 0 with the first equation replaced by sum pi = 1
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = q[j][i];
        }
    }
    for j in 0..n {
        m[(0, j)] = 1.0;
    }
    let mut rhs = nalgebra::DVector::zeros(n);
    rhs[0] = 1.0;
    let lu = m.lu();
    let pi = lu.solve(&rhs).ok_or(MapError::ReducibleRateMatrix)?;
    let pi: Vec<f64> = pi.iter().copied().collect();
    if pi.iter().any(|p| !(*p > 0.0)) {
        return Err(MapError::ReducibleRateMatrix);
    }
    Ok(pi)
}

/// Time reversal: rate matrix pi(j) q_{ji} / pi(i), components negated,
/// transitional laws `F_hat[i][j]` = law of `-Delta[j][i]`.
pub fn dualize(spec: &MapSpec) -> Result<MapSpec> {
    let n = spec.phases();
    let pi = stationary_of_q(&spec.q)?;
    let mut q_hat = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                q_hat[i][j] = spec.q[i][j];
            } else {
                q_hat[i][j] = pi[j] * spec.q[j][i] / pi[i];
            }
        }
    }
    let mut components = Vec::with_capacity(n);
    for (i, c) in spec.components.iter().enumerate() {
        let jumps = match &c.jumps {
            JumpComponent::None => JumpComponent::None,
            JumpComponent::CompoundPoisson { rate, law } => JumpComponent::CompoundPoisson {
                rate: *rate,
                law: negate_law(law),
            },
            JumpComponent::StableDensity { alpha, c_plus, c_minus } => JumpComponent::StableDensity {
                alpha: *alpha,
                c_plus: *c_minus,
                c_minus: *c_plus,
            },
            JumpComponent::LampertiStable { .. } => {
                return Err(MapError::Unsupported(format!(
                    "phase {i}: log-stable components are not closed under negation"
                )))
            }
        };
        components.push(LevyComponentSpec {
            drift: -c.drift,
            gaussian: c.gaussian,
            jumps,
            killing: c.killing,
        });
    }
    let mut transitions = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && q_hat[i][j] > 0.0 {
                transitions[i][j] = spec.transitions[j][i].as_ref().map(negate_law);
            }
        }
    }
    Ok(MapSpec { components, q: q_hat, transitions })
}

fn negate_law(law: &JumpLaw) -> JumpLaw {
    match law {
        JumpLaw::Negated { inner } => (**inner).clone(),
        other => JumpLaw::negated(other.clone()),
    }
}

/// Which sufficient condition certifies that a phase can host new maxima.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IrreducibilityWitness {
    /// Unbounded variation or positive Levy support in the phase itself.
    PhaseCondition,
    /// Some incoming transitional jump law with support unbounded above.
    UnboundedTransitional { from: usize },
    /// Reachable by a positively supported transitional jump from a phase
    /// already certified.
    ViaTransitional { from: usize },
    None,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrreducibilityReport {
    pub holds: bool,
    pub witnesses: Vec<IrreducibilityWitness>,
    /// The alternative route: every edge of some spanning strongly connected
    /// subgraph of Q carries the phase condition or a positively supported
    /// transitional law.
    pub edge_route_holds: bool,
}

/// Sufficient conditions for irreducibility of the ladder modulator, read
/// off the parametric supports of components and transitional laws.
pub fn ladder_irreducibility_sufficient(spec: &MapSpec) -> IrreducibilityReport {
    let n = spec.phases();
    let phase_cond: Vec<bool> = spec
        .components
        .iter()
        .map(|c| c.unbounded_variation() || c.levy_positive_support())
        .collect();

    let mut witnesses = vec![IrreducibilityWitness::None; n];
    // Lambda_1: phase condition, or an incoming transitional law unbounded above
    for j in 0..n {
        if phase_cond[j] {
            witnesses[j] = IrreducibilityWitness::PhaseCondition;
            continue;
        }
        for k in 0..n {
            if k != j && spec.q[k][j] > 0.0 {
                if let Some(law) = &spec.transitions[k][j] {
                    if law.support_unbounded_above() {
                        witnesses[j] = IrreducibilityWitness::UnboundedTransitional { from: k };
                        break;
                    }
                }
            }
        }
    }
    // Lambda_2: positively supported transitional jump from a Lambda_1 phase
    let lambda1: Vec<bool> = witnesses
        .iter()
        .map(|w| !matches!(w, IrreducibilityWitness::None))
        .collect();
    for j in 0..n {
        if lambda1[j] {
            continue;
        }
        for k in 0..n {
            if k != j && lambda1[k] && spec.q[k][j] > 0.0 {
                if let Some(law) = &spec.transitions[k][j] {
                    if law.has_positive_support() {
                        witnesses[j] = IrreducibilityWitness::ViaTransitional { from: k };
                        break;
                    }
                }
            }
        }
    }
    let holds = witnesses.iter().all(|w| !matches!(w, IrreducibilityWitness::None));

    // Edge route: the subgraph of "good" edges must stay strongly connected.
    let mut good = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && spec.q[i][j] > 0.0 {
                let positively_supported = spec.transitions[i][j]
                    .as_ref()
                    .map(|law| law.has_positive_support())
                    .unwrap_or(false);
                if phase_cond[j] || positively_supported {
                    good[i][j] = spec.q[i][j];
                }
            }
        }
    }
    let edge_route_holds = q_matrix_irreducible(&good);

    IrreducibilityReport { holds: holds || edge_route_holds, witnesses, edge_route_holds }
}
