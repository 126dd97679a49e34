//! Empirical overshoot measures, total-variation distances, convergence-rate
//! fitting, and beta-mixing estimation.

use crate::error::{MapError, Result};
use crate::exponents::OvershootLawEval;
use crate::ladder_sim::{simulate_ladder_overshoot, StationarySampler};
use crate::model::LadderSpec;
use crate::rng::{Rng64, RngStream};
use serde::{Deserialize, Serialize};

/// Histogram of (overshoot, phase) samples with an explicit atom at zero,
/// kept separate from the first bin so creeping mass never smears.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub edges: Vec<f64>,
    pub zero_atom: Vec<u64>,
    pub bins: Vec<Vec<u64>>,
    pub overflow: Vec<u64>,
    pub total: u64,
}

impl EmpiricalMeasure {
    pub fn new(edges: Vec<f64>, phases: usize) -> Self {
        let cells = edges.len() - 1;
        EmpiricalMeasure {
            edges,
            zero_atom: vec![0; phases],
            bins: vec![vec![0; cells]; phases],
            overflow: vec![0; phases],
            total: 0,
        }
    }

    pub fn push(&mut self, value: f64, phase: usize) {
        self.total += 1;
        if value == 0.0 {
            self.zero_atom[phase] += 1;
            return;
        }
        if value >= *self.edges.last().unwrap() {
            self.overflow[phase] += 1;
            return;
        }
        let k = match self.edges.binary_search_by(|e| e.partial_cmp(&value).unwrap()) {
            Ok(k) => k,
            Err(k) => k - 1,
        };
        let cells = self.bins[phase].len();
        self.bins[phase][k.min(cells - 1)] += 1;
    }

    pub fn phases(&self) -> usize {
        self.zero_atom.len()
    }

    /// Flattened normalized masses: per phase the atom, the bins, and the
    /// overflow cell.
    pub fn masses(&self) -> Vec<f64> {
        let n = self.total.max(1) as f64;
        let mut out = Vec::new();
        for p in 0..self.phases() {
            out.push(self.zero_atom[p] as f64 / n);
            for b in &self.bins[p] {
                out.push(*b as f64 / n);
            }
            out.push(self.overflow[p] as f64 / n);
        }
        out
    }

    /// Exact coarsening onto a grid whose edges are a subset of this one.
    pub fn rebin(&self, new_edges: &[f64]) -> Result<EmpiricalMeasure> {
        let idx: Vec<usize> = new_edges
            .iter()
            .map(|e| {
                self.edges
                    .iter()
                    .position(|x| x == e)
                    .ok_or_else(|| MapError::Invalid(format!("edge {e} not on the source grid")))
            })
            .collect::<Result<_>>()?;
        if idx.windows(2).any(|w| w[1] <= w[0]) {
            return Err(MapError::Invalid("target edges must be increasing".into()));
        }
        let mut out = EmpiricalMeasure::new(new_edges.to_vec(), self.phases());
        out.total = self.total;
        for p in 0..self.phases() {
            out.zero_atom[p] = self.zero_atom[p];
            // counts below the first target edge and above the last one
            // flow into the overflow (there is no underflow by construction:
            // grids start at the atom boundary)
            for (k, w) in idx.windows(2).enumerate() {
                out.bins[p][k] = self.bins[p][w[0]..w[1]].iter().sum();
            }
            out.overflow[p] = self.overflow[p]
                + self.bins[p][*idx.last().unwrap()..].iter().sum::<u64>()
                + self.bins[p][..idx[0]].iter().sum::<u64>();
        }
        Ok(out)
    }
}

fn law_masses(law: &OvershootLawEval) -> Vec<f64> {
    let norm = law.total_mass;
    let mut out = Vec::new();
    for p in 0..law.phases() {
        out.push(law.atoms[p] / norm);
        for b in &law.bins[p] {
            out.push(b / norm);
        }
        out.push(law.tail[p] / norm);
    }
    out
}

/// Total variation on the common discretization: half the L1 distance over
/// (zero atom, bins, overflow) x phases. A lower bound of the true total
/// variation, exact on the discretized sigma-algebra.
pub fn tv_distance(a: &EmpiricalMeasure, b: &OvershootLawEval) -> Result<f64> {
    if a.phases() != b.phases() || a.edges != b.edges {
        return Err(MapError::Invalid("measures live on different grids".into()));
    }
    Ok(half_l1(&a.masses(), &law_masses(b)))
}

pub fn tv_distance_empirical(a: &EmpiricalMeasure, b: &EmpiricalMeasure) -> Result<f64> {
    if a.phases() != b.phases() {
        return Err(MapError::Invalid("measures live on different phase spaces".into()));
    }
    if a.edges != b.edges {
        // resample to the coarser grid when one set of edges refines the other
        if let Ok(coarse) = a.rebin(&b.edges) {
            return Ok(half_l1(&coarse.masses(), &b.masses()));
        }
        if let Ok(coarse) = b.rebin(&a.edges) {
            return Ok(half_l1(&a.masses(), &coarse.masses()));
        }
        return Err(MapError::Invalid("measures live on incompatible grids".into()));
    }
    Ok(half_l1(&a.masses(), &b.masses()))
}

pub fn tv_distance_laws(a: &OvershootLawEval, b: &OvershootLawEval) -> Result<f64> {
    if a.phases() != b.phases() || a.edges != b.edges {
        return Err(MapError::Invalid("measures live on different grids".into()));
    }
    Ok(half_l1(&law_masses(a), &law_masses(b)))
}

fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// One point of a convergence curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TvPoint {
    pub t: f64,
    pub tv: f64,
    pub se: f64,
}

/// Empirical law of (O_t, J_t) against the stationary law, per grid level,
/// with bootstrap standard errors (multinomial resampling of the counts).
pub fn tv_decay_curve(
    spec: &LadderSpec,
    rho: &OvershootLawEval,
    start: (f64, usize),
    t_grid: &[f64],
    n_paths: u64,
    n_boot: u32,
    stream: RngStream,
) -> Result<Vec<TvPoint>> {
    let phases = spec.phases();
    let mut hists: Vec<EmpiricalMeasure> =
        t_grid.iter().map(|_| EmpiricalMeasure::new(rho.edges.clone(), phases)).collect();
    for p in 0..n_paths {
        let mut rng = stream.substream(p).rng();
        let samples = simulate_ladder_overshoot(spec, t_grid, start.0, start.1, &mut rng)?;
        for (k, s) in samples.iter().enumerate() {
            hists[k].push(s.overshoot, s.phase);
        }
    }
    let mut boot_rng = stream.substream(u64::MAX / 2).rng();
    let rho_masses = law_masses(rho);
    Ok(hists
        .iter()
        .zip(t_grid)
        .map(|(h, t)| {
            let tv = half_l1(&h.masses(), &rho_masses);
            let se = bootstrap_se(h, &rho_masses, n_boot, &mut boot_rng);
            TvPoint { t: *t, tv, se }
        })
        .collect())
}

/// Bootstrap the TV of an empirical measure against fixed reference masses
/// by binomial resampling of each cell count.
fn bootstrap_se(h: &EmpiricalMeasure, reference: &[f64], n_boot: u32, rng: &mut Rng64) -> f64 {
    let n = h.total;
    if n == 0 || n_boot == 0 {
        return f64::INFINITY;
    }
    let p_hat = h.masses();
    let mut tvs = Vec::with_capacity(n_boot as usize);
    for _ in 0..n_boot {
        let mut resampled: Vec<f64> = p_hat
            .iter()
            .map(|p| binomial(rng, n, *p) as f64 / n as f64)
            .collect();
        // renormalize the resampled masses
        let z: f64 = resampled.iter().sum();
        if z > 0.0 {
            for r in resampled.iter_mut() {
                *r /= z;
            }
        }
        tvs.push(half_l1(&resampled, reference));
    }
    let m = tvs.iter().sum::<f64>() / tvs.len() as f64;
    (tvs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / tvs.len() as f64).sqrt()
}

/// Binomial(n, p) sampler: normal approximation with continuity correction
/// for large n p (the bootstrap regime), exact inversion for small counts.
fn binomial(rng: &mut Rng64, n: u64, p: f64) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    let mean = n as f64 * p;
    if mean > 30.0 && n as f64 * (1.0 - p) > 30.0 {
        let sd = (mean * (1.0 - p)).sqrt();
        let x = (mean + sd * rng.normal()).round();
        return x.clamp(0.0, n as f64) as u64;
    }
    // inversion by waiting times for small means
    if mean < 30.0 {
        let mut count = 0u64;
        let mut acc = 0.0f64;
        let log_q = (1.0 - p).ln();
        loop {
            acc += rng.uniform().ln() / log_q.min(-1e-300);
            if acc > n as f64 {
                return count.min(n);
            }
            count += 1;
            if count >= n {
                return n;
            }
        }
    }
    // small failure count: sample the complement
    n - binomial(rng, n, 1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RateModel {
    Exponential,
    Polynomial,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Decay rate kappa for the exponential model (TV ~ C e^{-kappa t}),
    /// or the exponent for the polynomial model (TV ~ C t^{exponent}).
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub t_used: Vec<f64>,
}

/// Least squares on log TV against t (exponential) or log t (polynomial),
/// using only points whose TV clears three bootstrap standard errors.
pub fn fit_rate(curve: &[TvPoint], model: RateModel) -> Result<RateFit> {
    let usable: Vec<&TvPoint> = curve
        .iter()
        .filter(|p| p.tv > 3.0 * p.se && p.tv > 0.0 && (model == RateModel::Exponential || p.t > 0.0))
        .collect();
    if usable.len() < 5 {
        return Err(MapError::InsufficientData(format!(
            "{} usable points above the noise threshold; need 5",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable
        .iter()
        .map(|p| match model {
            RateModel::Exponential => p.t,
            RateModel::Polynomial => p.t.ln(),
        })
        .collect();
    let ys: Vec<f64> = usable.iter().map(|p| p.tv.ln()).collect();
    let n = xs.len() as f64;
    let xm = xs.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let slope = sxy / sxx;
    let intercept = ym - slope * xm;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let f = intercept + slope * x;
            (y - f) * (y - f)
        })
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ym) * (y - ym)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Ok(RateFit {
        model,
        rate: match model {
            RateModel::Exponential => -slope,
            RateModel::Polynomial => slope,
        },
        intercept,
        r_squared,
        t_used: usable.iter().map(|p| p.t).collect(),
    })
}

/// One point of a beta-mixing curve.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BetaPoint {
    pub t: f64,
    pub beta: f64,
    pub se: f64,
}

/// Stationary beta-mixing coefficient estimate: outer Monte Carlo over
/// starts drawn from the stationary law, inner empirical law per start,
/// beta(t) = average TV to the stationary law.
pub fn beta_mixing_stationary(
    spec: &LadderSpec,
    rho: &OvershootLawEval,
    t_grid: &[f64],
    n_starts: u64,
    paths_per_start: u64,
    stream: RngStream,
) -> Result<Vec<BetaPoint>> {
    let phases = spec.phases();
    let sampler = StationarySampler::new(spec)?;
    let rho_masses = law_masses(rho);
    let mut sums = vec![0.0; t_grid.len()];
    let mut sums_sq = vec![0.0; t_grid.len()];
    for s in 0..n_starts {
        let mut start_rng = stream.substream(s).rng();
        let (x0, i0) = sampler.sample(&mut start_rng);
        let mut hists: Vec<EmpiricalMeasure> =
            t_grid.iter().map(|_| EmpiricalMeasure::new(rho.edges.clone(), phases)).collect();
        for p in 0..paths_per_start {
            let mut rng = stream.substream((s << 24) | (p + 1)).rng();
            let samples = simulate_ladder_overshoot(spec, t_grid, x0, i0, &mut rng)?;
            for (k, smp) in samples.iter().enumerate() {
                hists[k].push(smp.overshoot, smp.phase);
            }
        }
        for (k, h) in hists.iter().enumerate() {
            let tv = half_l1(&h.masses(), &rho_masses);
            sums[k] += tv;
            sums_sq[k] += tv * tv;
        }
    }
    let m = n_starts as f64;
    Ok(t_grid
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let mean = sums[k] / m;
            let var = (sums_sq[k] / m - mean * mean).max(0.0);
            BetaPoint { t: *t, beta: mean, se: (var / m).sqrt() }
        })
        .collect())
}
