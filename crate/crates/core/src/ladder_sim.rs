//! Event-driven simulation of MAP subordinators: sawtooth overshoot paths,
//! exact path integrals for the resolvent, occupation (potential) measures,
//! and exact sampling from the stationary overshoot law.

use crate::error::{MapError, Result};
use crate::exponents::{Shape, TestFn};
use crate::law::{Extended, JumpLaw};
use crate::model::{stationary_of_q, LadderSpec};
use crate::path::OvershootSample;
use crate::rng::{Rng64, RngStream};
use serde::{Deserialize, Serialize};

/// What terminates a ladder path piece.
enum LadderEvent {
    Jump,
    Switch,
    Killed,
}

struct LadderWalker<'a> {
    spec: &'a LadderSpec,
    height: f64,
    phase: usize,
    /// elapsed subordinator time (only needed by occupation estimates)
    time: f64,
}

impl<'a> LadderWalker<'a> {
    fn new(spec: &'a LadderSpec, height: f64, phase: usize) -> Self {
        LadderWalker { spec, height, phase, time: 0.0 }
    }

    /// Advance to the next event. Returns the creep interval (h0, h1), the
    /// waiting time, and the event.
    fn step(&mut self, rng: &mut Rng64) -> (f64, f64, f64, LadderEvent) {
        let i = self.phase;
        let d = self.spec.drifts[i];
        let jump_rate = self.spec.jumps[i].as_ref().map(|(r, _)| *r).unwrap_or(0.0);
        let hold = -self.spec.q[i][i];
        let kill = self.spec.killing.get(i).copied().unwrap_or(0.0);
        let t_jump = if jump_rate > 0.0 { rng.exponential() / jump_rate } else { f64::INFINITY };
        let t_switch = if hold > 0.0 { rng.exponential() / hold } else { f64::INFINITY };
        let t_kill = if kill > 0.0 { rng.exponential() / kill } else { f64::INFINITY };
        let dt = t_jump.min(t_switch).min(t_kill);
        assert!(
            dt.is_finite() || d > 0.0,
            "subordinator stalls: zero drift and no events in phase {i}"
        );
        let h0 = self.height;
        let h1 = if dt.is_finite() { h0 + d * dt } else { f64::INFINITY };
        let event = if t_jump <= t_switch && t_jump <= t_kill {
            LadderEvent::Jump
        } else if t_switch <= t_kill {
            LadderEvent::Switch
        } else {
            LadderEvent::Killed
        };
        self.height = h1;
        self.time += dt;
        (h0, h1, dt, event)
    }

    /// Apply the event, returning the jump size (0 for killing).
    fn apply(&mut self, event: &LadderEvent, rng: &mut Rng64) -> f64 {
        match event {
            LadderEvent::Jump => {
                let (_, law) = self.spec.jumps[self.phase].as_ref().expect("jump in jumpless phase");
                let s = law.sample(rng);
                self.height += s;
                s
            }
            LadderEvent::Switch => {
                let i = self.phase;
                let hold = -self.spec.q[i][i];
                let u = rng.uniform();
                let mut acc = 0.0;
                let mut to = i;
                for j in 0..self.spec.phases() {
                    if j != i && self.spec.q[i][j] > 0.0 {
                        acc += self.spec.q[i][j] / hold;
                        to = j;
                        if u <= acc {
                            break;
                        }
                    }
                }
                let s = match self.spec.transitions[i][to].as_ref() {
                    Some(law) => law.sample(rng),
                    None => 0.0,
                };
                self.height += s;
                self.phase = to;
                s
            }
            LadderEvent::Killed => 0.0,
        }
    }
}

/// Direct event-driven simulation of the overshoot (sawtooth) process of a
/// MAP subordinator started from overshoot `start` in `start_phase`. Exact:
/// paths are piecewise linear with isolated jumps, so every passage is
/// located in closed form.
pub fn simulate_ladder_overshoot(
    spec: &LadderSpec,
    levels: &[f64],
    start: f64,
    start_phase: usize,
    rng: &mut Rng64,
) -> Result<Vec<OvershootSample>> {
    debug_assert!(levels.windows(2).all(|w| w[0] <= w[1]));
    let mut w = LadderWalker::new(spec, start, start_phase);
    let mut out = Vec::with_capacity(levels.len());
    for &level in levels {
        if w.height > level {
            out.push(OvershootSample::new(level, w.time, w.height - level, w.phase));
            continue;
        }
        loop {
            let d = spec.drifts[w.phase];
            let t0 = w.time;
            let (h0, h1, _dt, event) = w.step(rng);
            if d > 0.0 && h1 > level {
                // creeping passage inside the linear piece; the pending event
                // is discarded, which memorylessness makes lawful
                w.height = level;
                w.time = t0 + (level - h0) / d;
                out.push(OvershootSample::new(level, w.time, 0.0, w.phase));
                break;
            }
            match event {
                LadderEvent::Killed => {
                    return Err(MapError::Stalled(format!(
                        "subordinator killed in phase {} before level {level}",
                        w.phase
                    )))
                }
                ev => {
                    w.apply(&ev, rng);
                    if w.height > level {
                        out.push(OvershootSample::new(level, w.time, w.height - level, w.phase));
                        break;
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Exact sample of (H_t, J_t) of the subordinator at a fixed time of its
/// own clock. Returns None if the path is killed before t.
pub fn sample_ladder_state_at(
    spec: &LadderSpec,
    t: f64,
    start: f64,
    start_phase: usize,
    rng: &mut Rng64,
) -> Option<(f64, usize)> {
    let mut w = LadderWalker::new(spec, start, start_phase);
    loop {
        let t0 = w.time;
        let phase = w.phase;
        let d = spec.drifts[phase];
        let (h0, _h1, _dt, event) = w.step(rng);
        if w.time >= t {
            return Some((h0 + d * (t - t0), phase));
        }
        match event {
            LadderEvent::Killed => return None,
            ev => {
                w.apply(&ev, rng);
            }
        }
    }
}

/// Piece-exact Monte Carlo estimate of the resolvent
/// U_lam f(x, i) = E integral_0^inf e^{-lam t} f(O_t, J_t) dt:
/// every path integral is evaluated in closed form piece by piece,
/// truncated once the discount makes the remainder negligible.
pub fn mc_resolvent(
    spec: &LadderSpec,
    f: &TestFn,
    x: f64,
    start_phase: usize,
    lam: f64,
    n_paths: u64,
    stream: RngStream,
) -> Result<(f64, f64)> {
    if !f.bounded() {
        return Err(MapError::Unsupported(
            "Monte Carlo resolvent needs a bounded test function".into(),
        ));
    }
    let cutoff = x + 38.0 / lam;
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for p in 0..n_paths {
        let mut rng = stream.substream(p).rng();
        let v = resolvent_path_integral(spec, f, x, start_phase, lam, cutoff, &mut rng)?;
        sum += v;
        sumsq += v * v;
    }
    let n = n_paths as f64;
    let mean = sum / n;
    let var = (sumsq / n - mean * mean).max(0.0);
    Ok((mean, (var / n).sqrt()))
}

/// integral_a^b e^{-lam t} f(h - t, j) dt in closed form (the sawtooth piece
/// from a jump landing at height h), for the built-in shapes.
fn sawtooth_piece_integral(f: &TestFn, h: f64, j: usize, a: f64, b: f64, lam: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if let Some(p) = f.phase {
        if p != j {
            return 0.0;
        }
    }
    match f.shape {
        Shape::One => ((-lam * a).exp() - (-lam * b).exp()) / lam,
        Shape::Exp { coeff } => {
            let s = lam + coeff;
            if s.abs() < 1e-14 {
                (coeff * h).exp() * (b - a)
            } else {
                (coeff * h).exp() * ((-s * a).exp() - (-s * b).exp()) / s
            }
        }
        Shape::Indicator { lo, hi } => {
            // h - t in [lo, hi) <=> t in (h - hi, h - lo]
            let aa = a.max(h - hi);
            let bb = b.min(h - lo);
            if bb <= aa {
                0.0
            } else {
                ((-lam * aa).exp() - (-lam * bb).exp()) / lam
            }
        }
    }
}

fn resolvent_path_integral(
    spec: &LadderSpec,
    f: &TestFn,
    x: f64,
    start_phase: usize,
    lam: f64,
    cutoff: f64,
    rng: &mut Rng64,
) -> Result<f64> {
    let mut acc = 0.0;
    // deterministic decay from the start overshoot
    acc += sawtooth_piece_integral(f, x, start_phase, 0.0, x.min(cutoff), lam);
    let mut w = LadderWalker::new(spec, x, start_phase);
    while w.height < cutoff {
        let phase = w.phase;
        let d = spec.drifts[phase];
        let (h0, h1, _dt, event) = w.step(rng);
        if d > 0.0 {
            // creeping: overshoot zero on (h0, h1]
            let b = h1.min(cutoff);
            if b > h0 {
                acc += creep_integral(f, phase, h0, b, lam);
            }
            if h1 >= cutoff {
                break;
            }
        }
        match event {
            LadderEvent::Killed => {
                return Err(MapError::Stalled("killed path in resolvent sampling".into()))
            }
            ev => {
                let before = w.height;
                w.apply(&ev, rng);
                let after = w.height;
                if after > before {
                    // sawtooth from the jump: O_t = after - t on (before, after]
                    let b = after.min(cutoff);
                    acc += sawtooth_piece_integral(f, after, w.phase, before, b, lam);
                }
            }
        }
    }
    Ok(acc)
}

/// integral over the creeping stretch: f(0, j) on levels (a, b].
fn creep_integral(f: &TestFn, j: usize, a: f64, b: f64, lam: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let v = f.eval(0.0, j);
    if v == 0.0 {
        return 0.0;
    }
    v * ((-lam * a).exp() - (-lam * b).exp()) / lam
}

/// Occupation-measure estimates of the ladder subordinator on a spatial
/// grid: `mass[start][occupied phase][cell]` with standard errors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialGrid {
    pub edges: Vec<f64>,
    /// `mass[i][j][k]`: starting phase i, time in phase j while the height is
    /// in cell k.
    pub mass: Vec<Vec<Vec<f64>>>,
    pub se: Vec<Vec<Vec<f64>>>,
    pub paths_per_start: u64,
}

impl PotentialGrid {
    /// `U_{ij}([0, x))` by summing whole cells below x.
    pub fn cumulative(&self, i: usize, j: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, w) in self.edges.windows(2).enumerate() {
            if w[1] <= x {
                acc += self.mass[i][j][k];
            } else if w[0] < x {
                acc += self.mass[i][j][k] * (x - w[0]) / (w[1] - w[0]);
            }
        }
        acc
    }

    pub fn cumulative_se(&self, i: usize, j: usize, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, w) in self.edges.windows(2).enumerate() {
            if w[0] < x {
                let s = self.se[i][j][k];
                acc += s * s;
            }
        }
        acc.sqrt()
    }
}

/// Estimate the potential measures U_{ij} on the grid cells by averaging
/// occupation times over `paths_per_start` paths from each starting phase.
pub fn estimate_potential_measure(
    spec: &LadderSpec,
    edges: &[f64],
    paths_per_start: u64,
    stream: RngStream,
) -> Result<PotentialGrid> {
    let n = spec.phases();
    let cells = edges.len() - 1;
    let top = *edges.last().expect("non-empty grid");
    if !spec.unkilled() {
        // killed ladders are fine: occupation just stops at the killing time
    }
    let mut mass = vec![vec![vec![0.0; cells]; n]; n];
    let mut mass_sq = vec![vec![vec![0.0; cells]; n]; n];
    for i in 0..n {
        for p in 0..paths_per_start {
            let mut rng = stream.substream((i as u64) * paths_per_start + p).rng();
            let mut occ = vec![vec![0.0; cells]; n];
            let mut w = LadderWalker::new(spec, 0.0, i);
            loop {
                let phase = w.phase;
                let d = spec.drifts[phase];
                let (h0, h1, dt, event) = w.step(&mut rng);
                if d > 0.0 {
                    // creeping: time in cell = overlap / d
                    deposit_creep(&mut occ[phase], edges, h0, h1.min(top), 1.0 / d);
                } else if dt.is_finite() {
                    // plateau at h0
                    deposit_point(&mut occ[phase], edges, h0, dt);
                } else {
                    break; // stalled phase with no events: nothing beyond
                }
                if w.height >= top {
                    break;
                }
                match event {
                    LadderEvent::Killed => break,
                    ev => {
                        w.apply(&ev, &mut rng);
                        if w.height >= top {
                            break;
                        }
                    }
                }
            }
            for j in 0..n {
                for k in 0..cells {
                    mass[i][j][k] += occ[j][k];
                    mass_sq[i][j][k] += occ[j][k] * occ[j][k];
                }
            }
        }
    }
    let m = paths_per_start as f64;
    let mut se = vec![vec![vec![0.0; cells]; n]; n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..cells {
                let mean = mass[i][j][k] / m;
                let var = (mass_sq[i][j][k] / m - mean * mean).max(0.0);
                mass[i][j][k] = mean;
                se[i][j][k] = (var / m).sqrt();
            }
        }
    }
    Ok(PotentialGrid { edges: edges.to_vec(), mass, se, paths_per_start })
}

fn deposit_creep(occ: &mut [f64], edges: &[f64], h0: f64, h1: f64, inv_speed: f64) {
    if h1 <= h0 {
        return;
    }
    for (k, w) in edges.windows(2).enumerate() {
        let lo = w[0].max(h0);
        let hi = w[1].min(h1);
        if hi > lo {
            occ[k] += (hi - lo) * inv_speed;
        }
    }
}

fn deposit_point(occ: &mut [f64], edges: &[f64], h: f64, dt: f64) {
    for (k, w) in edges.windows(2).enumerate() {
        if h >= w[0] && h < w[1] {
            occ[k] += dt;
            return;
        }
    }
}


/// Exact sampler from the stationary overshoot law rho: Bernoulli atom
/// selection plus integrated-tail sampling of the density components.
pub struct StationarySampler<'a> {
    spec: &'a LadderSpec,
    /// (cumulative weight, kind)
    table: Vec<(f64, StationaryComponent)>,
    total: f64,
}

#[derive(Debug, Clone)]
enum StationaryComponent {
    Atom { phase: usize },
    LevyTail { phase: usize },
    TransTail { from: usize, to: usize },
}

impl<'a> StationarySampler<'a> {
    pub fn new(spec: &'a LadderSpec) -> Result<Self> {
        let n = spec.phases();
        let pi_plus = stationary_of_q(&spec.q)?;
        let mut table = Vec::new();
        let mut acc = 0.0;
        for i in 0..n {
            let w = pi_plus[i] * spec.drifts[i];
            if w > 0.0 {
                acc += w;
                table.push((acc, StationaryComponent::Atom { phase: i }));
            }
            if let Some((rate, law)) = &spec.jumps[i] {
                match law.mean() {
                    Extended::Finite(m) => {
                        let w = pi_plus[i] * rate * m;
                        if w > 0.0 {
                            acc += w;
                            table.push((acc, StationaryComponent::LevyTail { phase: i }));
                        }
                    }
                    _ => {
                        return Err(MapError::NoStationaryDistribution(format!(
                            "phase {i} jump law has no finite mean"
                        )))
                    }
                }
            }
            for j in 0..n {
                if j != i && spec.q[i][j] > 0.0 {
                    if let Some(law) = spec.transitions[i][j].as_ref() {
                        match law.mean() {
                            Extended::Finite(m) => {
                                let w = pi_plus[i] * spec.q[i][j] * m;
                                if w > 0.0 {
                                    acc += w;
                                    table.push((acc, StationaryComponent::TransTail { from: i, to: j }));
                                }
                            }
                            _ => {
                                return Err(MapError::NoStationaryDistribution(format!(
                                    "transitional law [{i}][{j}] has no finite mean"
                                )))
                            }
                        }
                    }
                }
            }
        }
        Ok(StationarySampler { spec, table, total: acc })
    }

    /// Total mass of chi (the mean ladder height per unit time).
    pub fn mass(&self) -> f64 {
        self.total
    }

    pub fn sample(&self, rng: &mut Rng64) -> (f64, usize) {
        let u = rng.uniform() * self.total;
        let idx = self.table.partition_point(|(c, _)| *c < u);
        let kind = &self.table[idx.min(self.table.len() - 1)].1;
        match kind {
            StationaryComponent::Atom { phase } => (0.0, *phase),
            StationaryComponent::LevyTail { phase } => {
                let (_, law) = self.spec.jumps[*phase].as_ref().expect("tail component");
                (sample_integrated_tail(law, rng), *phase)
            }
            StationaryComponent::TransTail { from, to } => {
                let law = self.spec.transitions[*from][*to].as_ref().expect("tail component");
                // the overshoot lands in the destination phase
                (sample_integrated_tail(law, rng), *to)
            }
        }
    }
}

/// Sample from the integrated-tail (stationary residual) distribution of a
/// law on [0, inf): density tail(y) / mean.
pub fn sample_integrated_tail(law: &JumpLaw, rng: &mut Rng64) -> f64 {
    match law {
        // memoryless: the residual law is the law itself
        JumpLaw::Exponential { rate } => rng.exponential() / rate,
        // residual of a point mass at c is uniform on (0, c)
        JumpLaw::PointMass { location } => rng.uniform() * location,
        _ => {
            let m = law.mean().unwrap_finite();
            let target = rng.uniform() * m;
            // invert y -> integral_0^y tail by bisection
            let (mut lo, mut hi) = (0.0, 1.0);
            while law.tail_integral(0.0, hi) < target && hi < 1e12 {
                hi *= 2.0;
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if law.tail_integral(0.0, mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        }
    }
}
