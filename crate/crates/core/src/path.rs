//! Piecewise path records for MAPs with piecewise-linear ordinators
//! (drift + compound Poisson in every phase).

use serde::{Deserialize, Serialize};

/// What terminates a linear piece.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PieceEnd {
    /// Within-phase compound Poisson jump of the given size.
    Jump(f64),
    /// Modulator switch to `to` with transitional jump `jump`.
    Switch { to: usize, jump: f64 },
    /// End of the simulated horizon.
    Horizon,
}

/// One maximal linear piece of the ordinator: value x0 + slope (t - t0) on
/// [t0, t1), then the terminating event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Piece {
    pub t0: f64,
    pub t1: f64,
    pub phase: usize,
    pub x0: f64,
    pub slope: f64,
    pub end: PieceEnd,
}

impl Piece {
    pub fn value_left(&self) -> f64 {
        self.x0 + self.slope * (self.t1 - self.t0)
    }

    /// Value right after the terminating event.
    pub fn value_right(&self) -> f64 {
        match self.end {
            PieceEnd::Jump(s) => self.value_left() + s,
            PieceEnd::Switch { jump, .. } => self.value_left() + jump,
            PieceEnd::Horizon => self.value_left(),
        }
    }
}

/// Modulator switch record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SwitchEvent {
    pub time: f64,
    pub from: usize,
    pub to: usize,
    pub jump: f64,
}

/// A simulated MAP path: contiguous linear pieces plus the switch ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapPath {
    pub pieces: Vec<Piece>,
    pub switches: Vec<SwitchEvent>,
    pub horizon: f64,
}

impl MapPath {
    /// Ordinator value at time t (right-continuous).
    pub fn value_at(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0 && t <= self.horizon);
        for p in &self.pieces {
            // the equality case keeps the final piece inclusive at the horizon
            if (t < p.t1 || (p.t1 == self.horizon && t == self.horizon)) && t >= p.t0 {
                return p.x0 + p.slope * (t - p.t0);
            }
        }
        self.pieces.last().map(|p| p.value_left()).unwrap_or(0.0)
    }

    /// Modulator phase at time t (right-continuous).
    pub fn phase_at(&self, t: f64) -> usize {
        for p in &self.pieces {
            if t >= p.t0 && (t < p.t1 || (p.t1 == self.horizon && t == self.horizon)) {
                return p.phase;
            }
        }
        self.pieces.last().map(|p| p.phase).unwrap_or(0)
    }

    pub fn final_value(&self) -> f64 {
        self.pieces.last().map(|p| p.value_right()).unwrap_or(0.0)
    }

    /// Occupation time of each phase over the horizon.
    pub fn phase_occupation(&self, phases: usize) -> Vec<f64> {
        let mut occ = vec![0.0; phases];
        for p in &self.pieces {
            occ[p.phase] += p.t1 - p.t0;
        }
        occ
    }
}

/// First-passage outcome at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OvershootSample {
    pub level: f64,
    pub passage_time: f64,
    pub overshoot: f64,
    pub phase: usize,
    pub crept: bool,
}

impl OvershootSample {
    pub fn new(level: f64, passage_time: f64, overshoot: f64, phase: usize) -> Self {
        OvershootSample { level, passage_time, overshoot, phase, crept: overshoot == 0.0 }
    }
}
