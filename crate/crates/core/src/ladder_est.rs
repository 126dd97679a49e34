//! Ladder-height statistics read off simulated parent paths.
//!
//! For the creeping class (every phase a compound Poisson process with
//! strictly positive drift), time at the running maximum is a valid local
//! time. Local time is scaled per phase by the creeping speed so the
//! estimated ladder drifts are identically one; every downstream identity
//! is covariant under this diagonal normalization.
//!
//! The dual of a creeping-class spec drifts downward, so its ladder is pure
//! jump; there the records of the running maximum carry the statistics and
//! the per-record holding clock plays the role of local time (again a
//! per-phase rescaling, absorbed by the scale fits downstream).

use crate::error::{MapError, Result};
use crate::law::JumpLaw;
use crate::model::{LadderSpec, MapSpec};
use crate::path::{MapPath, PieceEnd};
use crate::rng::RngStream;
use crate::simulate::{simulate_path, SimOptions};
use serde::{Deserialize, Serialize};

/// Raw ladder events of one path.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LadderStats {
    /// Lebesgue time spent at the running maximum, per phase.
    pub time_at_max: Vec<f64>,
    /// Heights gained by jumps from (or over) the maximum, per ladder phase.
    pub ladder_jumps: Vec<Vec<f64>>,
    /// `transitional[i][j]`: ladder jumps attached to a ladder phase change
    /// i -> j (zero entries record continuous re-attainment in a new phase).
    pub transitional: Vec<Vec<Vec<f64>>>,
}

impl LadderStats {
    fn new(n: usize) -> Self {
        LadderStats {
            time_at_max: vec![0.0; n],
            ladder_jumps: vec![Vec::new(); n],
            transitional: vec![vec![Vec::new(); n]; n],
        }
    }

    pub fn merge(&mut self, other: &LadderStats) {
        for i in 0..self.time_at_max.len() {
            self.time_at_max[i] += other.time_at_max[i];
            self.ladder_jumps[i].extend_from_slice(&other.ladder_jumps[i]);
            for j in 0..self.time_at_max.len() {
                self.transitional[i][j].extend_from_slice(&other.transitional[i][j]);
            }
        }
    }
}

/// Extract ladder events from a piecewise-linear path. The spec must be in
/// the creeping class, which the caller certifies via
/// `MapSpec::creeping_class`.
pub fn extract_ladder_stats(path: &MapPath, phases: usize) -> Result<LadderStats> {
    let mut stats = LadderStats::new(phases);
    let first = match path.pieces.first() {
        Some(p) => p,
        None => return Ok(stats),
    };
    let mut max = first.x0;
    let mut at_max = true;
    let mut ladder_phase = first.phase;
    for piece in &path.pieces {
        if piece.slope < 0.0 || (piece.slope == 0.0 && !at_max) {
            return Err(MapError::Unsupported(
                "ladder statistics need strictly positive drifts (creeping class)".into(),
            ));
        }
        let p = piece.phase;
        let v_left = piece.value_left();
        if at_max {
            stats.time_at_max[p] += piece.t1 - piece.t0;
            max = v_left;
        } else if piece.slope > 0.0 && v_left >= max {
            // re-attains the old maximum inside the piece
            let t_star = piece.t0 + (max - piece.x0) / piece.slope;
            if p != ladder_phase {
                stats.transitional[ladder_phase][p].push(0.0);
            }
            ladder_phase = p;
            at_max = true;
            stats.time_at_max[p] += piece.t1 - t_star;
            max = v_left;
        }
        // the terminating event
        let (jump, new_phase) = match piece.end {
            PieceEnd::Jump(s) => (s, p),
            PieceEnd::Switch { to, jump } => (jump, to),
            PieceEnd::Horizon => continue,
        };
        let v_after = v_left + jump;
        let is_switch = matches!(piece.end, PieceEnd::Switch { .. });
        if at_max {
            debug_assert_eq!(ladder_phase, p);
            if is_switch {
                if jump >= 0.0 {
                    // ties (post-jump value exactly the old maximum) count as
                    // ladder events
                    stats.transitional[p][new_phase].push(jump);
                    ladder_phase = new_phase;
                    max = v_after;
                } else {
                    at_max = false;
                }
            } else if jump > 0.0 {
                stats.ladder_jumps[p].push(jump);
                max = v_after;
            } else if jump < 0.0 {
                at_max = false;
            }
        } else {
            // below the maximum: only an over-jump (or exact reach) matters
            if v_after > max {
                let overshoot = v_after - max;
                if new_phase == ladder_phase {
                    stats.ladder_jumps[new_phase].push(overshoot);
                } else {
                    stats.transitional[ladder_phase][new_phase].push(overshoot);
                    ladder_phase = new_phase;
                }
                max = v_after;
                at_max = true;
            } else if v_after == max {
                if new_phase != ladder_phase {
                    stats.transitional[ladder_phase][new_phase].push(0.0);
                    ladder_phase = new_phase;
                }
                at_max = true;
            }
        }
    }
    Ok(stats)
}

/// One estimated histogram cell of a ladder Levy measure.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    /// Mass per unit (normalized) local time.
    pub intensity: f64,
    pub se: f64,
}

/// Ladder spec estimate with the sampling detail the convolution checks
/// consume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderEstimate {
    pub spec: LadderSpec,
    /// Normalized local time (drift-scaled time at maximum) per phase.
    pub local_time: Vec<f64>,
    /// Binned jump intensity of each phase Levy measure.
    pub levy_bins: Vec<Vec<BinStat>>,
    /// Binned transitional intensity q+_{ij} F+_{ij}(bin).
    pub trans_bins: Vec<Vec<Vec<BinStat>>>,
    /// Mass of the zero atom of q+_{ij} F+_{ij} (continuous re-attainment).
    pub trans_atom: Vec<Vec<f64>>,
    pub q_hat: Vec<Vec<f64>>,
    pub q_se: Vec<Vec<f64>>,
    pub events: u64,
    /// Too few ladder events for the requested confidence.
    pub wide_ci: bool,
}

/// Estimate the ascending ladder spec of a creeping-class MAP from
/// `n_paths` simulated paths over `[0, horizon]`. Local time is normalized
/// so every estimated drift is 1.
pub fn estimate_ladder_spec(
    spec: &MapSpec,
    n_paths: u64,
    horizon: f64,
    edges: &[f64],
    min_events: u64,
    stream: RngStream,
) -> Result<LadderEstimate> {
    spec.creeping_class()?;
    let n = spec.phases();
    let opts = SimOptions::default();
    // per-path tallies for ratio-estimator standard errors
    let cells = edges.len() - 1;
    let mut ell = vec![0.0; n]; // local time totals
    let mut ell_sq = vec![0.0; n];
    let mut levy_counts = vec![vec![0.0; cells + 1]; n]; // last cell = overflow
    let mut levy_counts_sq = vec![vec![0.0; cells + 1]; n];
    let mut levy_cross = vec![vec![0.0; cells + 1]; n];
    let mut trans_jumps: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; n];
    let mut trans_counts = vec![vec![0.0; n]; n];
    let mut trans_counts_sq = vec![vec![0.0; n]; n];
    let mut trans_cross = vec![vec![0.0; n]; n];
    let mut events = 0u64;
    for p in 0..n_paths {
        let mut rng = stream.substream(p).rng();
        let start_phase = (p as usize) % n;
        let path = simulate_path(spec, 0.0, start_phase, horizon, &opts, &mut rng)?;
        let stats = extract_ladder_stats(&path, n)?;
        for i in 0..n {
            let li = spec.components[i].drift * stats.time_at_max[i];
            ell[i] += li;
            ell_sq[i] += li * li;
            let mut row = vec![0.0; cells + 1];
            for &s in &stats.ladder_jumps[i] {
                let k = cell_of(edges, s);
                row[k] += 1.0;
                events += 1;
            }
            for k in 0..=cells {
                levy_counts[i][k] += row[k];
                levy_counts_sq[i][k] += row[k] * row[k];
                levy_cross[i][k] += row[k] * li;
            }
            for j in 0..n {
                let c = stats.transitional[i][j].len() as f64;
                trans_counts[i][j] += c;
                trans_counts_sq[i][j] += c * c;
                trans_cross[i][j] += c * li;
                trans_jumps[i][j].extend_from_slice(&stats.transitional[i][j]);
                events += stats.transitional[i][j].len() as u64;
            }
        }
    }
    let m = n_paths as f64;

    // ratio estimator R = sum counts / sum local time with delta-method SE
    let ratio_se = |count: f64, count_sq: f64, cross: f64, l: f64, l_sq: f64| -> f64 {
        if l <= 0.0 {
            return f64::INFINITY;
        }
        let r = count / l;
        let var = (count_sq / m) - 2.0 * r * (cross / m) + r * r * (l_sq / m);
        let mean_l = l / m;
        ((var.max(0.0) / m).sqrt()) / mean_l
    };

    let mut levy_bins = vec![Vec::with_capacity(cells); n];
    let mut jumps_spec: Vec<Option<(f64, JumpLaw)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut total = 0.0;
        let mut weights = Vec::new();
        let mut laws = Vec::new();
        for k in 0..cells {
            let intensity = levy_counts[i][k] / ell[i];
            let se = ratio_se(levy_counts[i][k], levy_counts_sq[i][k], levy_cross[i][k], ell[i], ell_sq[i]);
            levy_bins[i].push(BinStat { lo: edges[k], hi: edges[k + 1], intensity, se });
            if levy_counts[i][k] > 0.0 {
                weights.push(intensity);
                laws.push(JumpLaw::uniform(edges[k], edges[k + 1]));
                total += intensity;
            }
        }
        // overflow mass beyond the grid keeps the total intensity honest
        if levy_counts[i][cells] > 0.0 {
            let intensity = levy_counts[i][cells] / ell[i];
            let top = *edges.last().unwrap();
            weights.push(intensity);
            laws.push(JumpLaw::uniform(top, 2.0 * top));
            total += intensity;
        }
        if total > 0.0 {
            let w: Vec<f64> = weights.iter().map(|x| x / total).collect();
            jumps_spec.push(Some((total, JumpLaw::FiniteMixture { weights: w, laws })));
        } else {
            jumps_spec.push(None);
        }
    }

    let mut q_hat = vec![vec![0.0; n]; n];
    let mut q_se = vec![vec![0.0; n]; n];
    let mut trans_bins = vec![vec![Vec::new(); n]; n];
    let mut trans_atom = vec![vec![0.0; n]; n];
    let mut transitions: Vec<Vec<Option<JumpLaw>>> = vec![vec![None; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            q_hat[i][j] = trans_counts[i][j] / ell[i];
            q_se[i][j] =
                ratio_se(trans_counts[i][j], trans_counts_sq[i][j], trans_cross[i][j], ell[i], ell_sq[i]);
            let jumps = &trans_jumps[i][j];
            if jumps.is_empty() {
                continue;
            }
            let zero = jumps.iter().filter(|s| **s == 0.0).count() as f64;
            trans_atom[i][j] = zero / ell[i];
            let mut bin_counts = vec![0.0; cells + 1];
            for &s in jumps {
                if s > 0.0 {
                    bin_counts[cell_of(edges, s)] += 1.0;
                }
            }
            for k in 0..cells {
                trans_bins[i][j].push(BinStat {
                    lo: edges[k],
                    hi: edges[k + 1],
                    intensity: bin_counts[k] / ell[i],
                    se: (bin_counts[k].max(1.0)).sqrt() / ell[i],
                });
            }
            // empirical transitional law: zero atom plus uniform bins
            let total = jumps.len() as f64;
            let mut weights = Vec::new();
            let mut laws = Vec::new();
            if zero > 0.0 {
                weights.push(zero / total);
                laws.push(JumpLaw::point_mass(0.0));
            }
            for k in 0..cells {
                if bin_counts[k] > 0.0 {
                    weights.push(bin_counts[k] / total);
                    laws.push(JumpLaw::uniform(edges[k], edges[k + 1]));
                }
            }
            if bin_counts[cells] > 0.0 {
                let top = *edges.last().unwrap();
                weights.push(bin_counts[cells] / total);
                laws.push(JumpLaw::uniform(top, 2.0 * top));
            }
            transitions[i][j] = Some(JumpLaw::FiniteMixture { weights, laws });
        }
        q_hat[i][i] = -(0..n).filter(|j| *j != i).map(|j| q_hat[i][j]).sum::<f64>();
    }

    let ladder = LadderSpec {
        drifts: vec![1.0; n],
        jumps: jumps_spec,
        q: q_hat.clone(),
        transitions,
        killing: vec![0.0; n],
    };
    Ok(LadderEstimate {
        spec: ladder,
        local_time: ell.clone(),
        levy_bins,
        trans_bins,
        trans_atom,
        q_hat,
        q_se,
        events,
        wide_ci: events < min_events,
    })
}

fn cell_of(edges: &[f64], x: f64) -> usize {
    let cells = edges.len() - 1;
    if x >= *edges.last().unwrap() {
        return cells; // overflow
    }
    match edges.binary_search_by(|e| e.partial_cmp(&x).unwrap()) {
        Ok(k) => k.min(cells - 1),
        Err(k) => k.saturating_sub(1).min(cells - 1),
    }
}

/// Successive strict maxima (records) of a downward-drifting path: the
/// ladder skeleton of the dual spec. Each entry is (record height, phase in
/// which the record was set).
pub fn records_from_path(path: &MapPath, start_value: f64, start_phase: usize) -> Vec<(f64, usize)> {
    let mut records = vec![(start_value, start_phase)];
    let mut max = start_value;
    for piece in &path.pieces {
        debug_assert!(piece.slope <= 0.0, "record extraction expects non-increasing drift");
        let (jump, new_phase) = match piece.end {
            PieceEnd::Jump(s) => (s, piece.phase),
            PieceEnd::Switch { to, jump } => (jump, to),
            PieceEnd::Horizon => continue,
        };
        let v_after = piece.value_left() + jump;
        if v_after > max {
            max = v_after;
            records.push((max, new_phase));
        }
    }
    records
}

/// Record-based potential estimate for the ladder of a downward-drifting
/// MAP: the expected number of records per spatial cell, by record phase,
/// from each starting phase. Proportional to the ladder potential measure
/// with one free positive factor per record phase, which the downstream
/// scale fits absorb.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecordPotential {
    pub edges: Vec<f64>,
    /// `atom[i][j]`: expected records exactly at the origin (the start),
    /// nonzero only for j = i.
    pub atom: Vec<Vec<f64>>,
    /// `mass[i][j][k]`: expected records in cell k with record phase j, start
    /// phase i.
    pub mass: Vec<Vec<Vec<f64>>>,
    pub se: Vec<Vec<Vec<f64>>>,
    pub paths_per_start: u64,
}

/// Estimate the record potential of `dual` (a spec with all drifts
/// negative) over `[0, horizon]` per path.
pub fn estimate_record_potential(
    dual: &MapSpec,
    edges: &[f64],
    paths_per_start: u64,
    horizon: f64,
    stream: RngStream,
) -> Result<RecordPotential> {
    let n = dual.phases();
    for (i, c) in dual.components.iter().enumerate() {
        if !(c.drift < 0.0) || c.gaussian != 0.0 {
            return Err(MapError::Unsupported(format!(
                "record potential needs strictly negative drift, no Gaussian part (phase {i})"
            )));
        }
    }
    let cells = edges.len() - 1;
    let opts = SimOptions::default();
    let mut mass = vec![vec![vec![0.0; cells]; n]; n];
    let mut mass_sq = vec![vec![vec![0.0; cells]; n]; n];
    let mut atom = vec![vec![0.0; n]; n];
    for i in 0..n {
        for p in 0..paths_per_start {
            let mut rng = stream.substream((i as u64) << 32 | p).rng();
            let path = simulate_path(dual, 0.0, i, horizon, &opts, &mut rng)?;
            let recs = records_from_path(&path, 0.0, i);
            let mut occ = vec![vec![0.0; cells]; n];
            for (h, ph) in recs {
                if h == 0.0 {
                    atom[i][ph] += 1.0;
                } else if h < *edges.last().unwrap() {
                    occ[ph][cell_of(edges, h)] += 1.0;
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
            atom[i][j] /= m;
            for k in 0..cells {
                let mean = mass[i][j][k] / m;
                let var = (mass_sq[i][j][k] / m - mean * mean).max(0.0);
                mass[i][j][k] = mean;
                se[i][j][k] = (var / m).sqrt();
            }
        }
    }
    Ok(RecordPotential { edges: edges.to_vec(), atom, mass, se, paths_per_start })
}

/// Ladder potential of a creeping-class MAP, read directly off parent
/// paths: in the drift-normalized local time the ladder height creeps at
/// unit speed, so the occupation of a spatial cell while at the maximum is
/// simply the overlap length of the at-max height range. The zero atom is
/// empty (creeping ladders spend no local time at a point).
pub fn estimate_creeping_potential(
    spec: &MapSpec,
    edges: &[f64],
    paths_per_start: u64,
    horizon: f64,
    stream: RngStream,
) -> Result<RecordPotential> {
    spec.creeping_class()?;
    let n = spec.phases();
    let cells = edges.len() - 1;
    let top = *edges.last().expect("non-empty grid");
    let opts = SimOptions::default();
    let mut mass = vec![vec![vec![0.0; cells]; n]; n];
    let mut mass_sq = vec![vec![vec![0.0; cells]; n]; n];
    for i in 0..n {
        for p in 0..paths_per_start {
            let mut rng = stream.substream((i as u64) << 32 | p).rng();
            let path = simulate_path(spec, 0.0, i, horizon, &opts, &mut rng)?;
            let mut occ = vec![vec![0.0; cells]; n];
            // walk the at-max height ranges
            let mut max = 0.0f64;
            let mut at_max = true;
            for piece in &path.pieces {
                let v_left = piece.value_left();
                if at_max {
                    deposit_overlap(&mut occ[piece.phase], edges, max, v_left.min(top));
                    max = v_left;
                } else if piece.slope > 0.0 && v_left >= max {
                    deposit_overlap(&mut occ[piece.phase], edges, max, v_left.min(top));
                    max = v_left;
                    at_max = true;
                }
                let v_after = piece.value_right();
                match piece.end {
                    PieceEnd::Horizon => {}
                    _ => {
                        if at_max && v_after < max {
                            at_max = false;
                        } else if v_after >= max {
                            max = v_after;
                            at_max = true;
                        }
                    }
                }
                if max >= top {
                    break;
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
    Ok(RecordPotential {
        edges: edges.to_vec(),
        atom: vec![vec![0.0; n]; n],
        mass,
        se,
        paths_per_start,
    })
}

fn deposit_overlap(occ: &mut [f64], edges: &[f64], lo: f64, hi: f64) {
    if hi <= lo {
        return;
    }
    for (k, w) in edges.windows(2).enumerate() {
        let a = w[0].max(lo);
        let b = w[1].min(hi);
        if b > a {
            occ[k] += b - a;
        }
    }
}

/// Ladder spec of a downward-drifting MAP in the record (embedded chain)
/// normalization: unit total event rate per phase, zero drifts, killing
/// from terminated record sequences. Exact up to one positive factor per
/// phase, which Wiener-Hopf style fits absorb.
pub fn estimate_record_ladder_spec(
    dual: &MapSpec,
    n_paths: u64,
    horizon: f64,
    edges: &[f64],
    stream: RngStream,
) -> Result<LadderSpec> {
    let n = dual.phases();
    let cells = edges.len() - 1;
    let opts = SimOptions::default();
    let mut holds = vec![0.0f64; n];
    let mut kills = vec![0.0f64; n];
    let mut same_counts = vec![vec![0.0; cells + 1]; n];
    let mut cross_counts = vec![vec![0.0; n]; n];
    let mut cross_jumps: Vec<Vec<Vec<f64>>> = vec![vec![Vec::new(); n]; n];
    for p in 0..n_paths {
        let mut rng = stream.substream(p).rng();
        let start_phase = (p as usize) % n;
        let path = simulate_path(dual, 0.0, start_phase, horizon, &opts, &mut rng)?;
        let recs = records_from_path(&path, 0.0, start_phase);
        for w in recs.windows(2) {
            let (h0, ph0) = w[0];
            let (h1, ph1) = w[1];
            holds[ph0] += 1.0;
            if ph0 == ph1 {
                same_counts[ph0][cell_of(edges, h1 - h0)] += 1.0;
            } else {
                cross_counts[ph0][ph1] += 1.0;
                cross_jumps[ph0][ph1].push(h1 - h0);
            }
        }
        // the final record holds until the horizon: counted as killed
        if let Some((_, ph)) = recs.last() {
            holds[*ph] += 1.0;
            kills[*ph] += 1.0;
        }
    }
    let mut jumps: Vec<Option<(f64, JumpLaw)>> = Vec::with_capacity(n);
    let mut q = vec![vec![0.0; n]; n];
    let mut transitions: Vec<Vec<Option<JumpLaw>>> = vec![vec![None; n]; n];
    let mut killing = vec![0.0; n];
    for i in 0..n {
        if holds[i] == 0.0 {
            return Err(MapError::InsufficientData(format!("no records in phase {i}")));
        }
        killing[i] = kills[i] / holds[i];
        let total: f64 = same_counts[i].iter().sum();
        if total > 0.0 {
            let mut weights = Vec::new();
            let mut laws = Vec::new();
            for k in 0..cells {
                if same_counts[i][k] > 0.0 {
                    weights.push(same_counts[i][k] / total);
                    laws.push(JumpLaw::uniform(edges[k], edges[k + 1]));
                }
            }
            if same_counts[i][cells] > 0.0 {
                let top = *edges.last().unwrap();
                weights.push(same_counts[i][cells] / total);
                laws.push(JumpLaw::uniform(top, 2.0 * top));
            }
            jumps.push(Some((total / holds[i], JumpLaw::FiniteMixture { weights, laws })));
        } else {
            jumps.push(None);
        }
        for j in 0..n {
            if j != i && cross_counts[i][j] > 0.0 {
                q[i][j] = cross_counts[i][j] / holds[i];
                let jumps_ij = &cross_jumps[i][j];
                let total = jumps_ij.len() as f64;
                let mut bin_counts = vec![0.0; cells + 1];
                for &s in jumps_ij {
                    bin_counts[cell_of(edges, s)] += 1.0;
                }
                let mut weights = Vec::new();
                let mut laws = Vec::new();
                for k in 0..cells {
                    if bin_counts[k] > 0.0 {
                        weights.push(bin_counts[k] / total);
                        laws.push(JumpLaw::uniform(edges[k], edges[k + 1]));
                    }
                }
                if bin_counts[cells] > 0.0 {
                    let top = *edges.last().unwrap();
                    weights.push(bin_counts[cells] / total);
                    laws.push(JumpLaw::uniform(top, 2.0 * top));
                }
                transitions[i][j] = Some(JumpLaw::FiniteMixture { weights, laws });
            }
        }
        q[i][i] = -(0..n).filter(|j| *j != i).map(|j| q[i][j]).sum::<f64>();
    }
    Ok(LadderSpec { drifts: vec![0.0; n], jumps, q, transitions, killing })
}
