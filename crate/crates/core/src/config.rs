//! Declarative spec ingestion: a config-file-friendly wire format (JSON or
//! TOML) with one block per phase component, one matrix block, and one entry
//! per transitional law.

use crate::error::{MapError, Result};
use crate::law::JumpLaw;
use crate::model::{LadderSpec, LevyComponentSpec, MapSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// One off-diagonal transitional jump law.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub from: usize,
    pub to: usize,
    pub law: JumpLaw,
}

/// Wire format of a MAP spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MapSpecConfig {
    pub components: Vec<LevyComponentSpec>,
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub transitions: Vec<TransitionEntry>,
}

impl MapSpecConfig {
    pub fn resolve(&self) -> Result<MapSpec> {
        let n = self.components.len();
        let mut transitions = vec![vec![None; n]; n];
        for e in &self.transitions {
            if e.from >= n || e.to >= n {
                return Err(MapError::Invalid(format!(
                    "transition ({}, {}) outside the {n}-phase space",
                    e.from, e.to
                )));
            }
            transitions[e.from][e.to] = Some(e.law.clone());
        }
        Ok(MapSpec { components: self.components.clone(), q: self.q.clone(), transitions })
    }

    pub fn from_spec(spec: &MapSpec) -> Self {
        let mut transitions = Vec::new();
        for (i, row) in spec.transitions.iter().enumerate() {
            for (j, law) in row.iter().enumerate() {
                if let Some(law) = law {
                    transitions.push(TransitionEntry { from: i, to: j, law: law.clone() });
                }
            }
        }
        MapSpecConfig { components: spec.components.clone(), q: spec.q.clone(), transitions }
    }
}

/// One per-phase compound Poisson block of a ladder spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PhaseJumpEntry {
    pub phase: usize,
    pub rate: f64,
    pub law: JumpLaw,
}

/// Wire format of a MAP subordinator spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderSpecConfig {
    pub drifts: Vec<f64>,
    #[serde(default)]
    pub jumps: Vec<PhaseJumpEntry>,
    pub q: Vec<Vec<f64>>,
    #[serde(default)]
    pub transitions: Vec<TransitionEntry>,
    #[serde(default)]
    pub killing: Vec<f64>,
}

impl LadderSpecConfig {
    pub fn resolve(&self) -> Result<LadderSpec> {
        let n = self.drifts.len();
        let mut jumps = vec![None; n];
        for e in &self.jumps {
            if e.phase >= n {
                return Err(MapError::Invalid(format!("jump block for phase {} of {n}", e.phase)));
            }
            jumps[e.phase] = Some((e.rate, e.law.clone()));
        }
        let mut transitions = vec![vec![None; n]; n];
        for e in &self.transitions {
            if e.from >= n || e.to >= n {
                return Err(MapError::Invalid(format!(
                    "transition ({}, {}) outside the {n}-phase space",
                    e.from, e.to
                )));
            }
            transitions[e.from][e.to] = Some(e.law.clone());
        }
        let killing = if self.killing.is_empty() { vec![0.0; n] } else { self.killing.clone() };
        Ok(LadderSpec { drifts: self.drifts.clone(), jumps, q: self.q.clone(), transitions, killing })
    }

    pub fn from_spec(spec: &LadderSpec) -> Self {
        let mut jumps = Vec::new();
        for (i, j) in spec.jumps.iter().enumerate() {
            if let Some((rate, law)) = j {
                jumps.push(PhaseJumpEntry { phase: i, rate: *rate, law: law.clone() });
            }
        }
        let mut transitions = Vec::new();
        for (i, row) in spec.transitions.iter().enumerate() {
            for (j, law) in row.iter().enumerate() {
                if let Some(law) = law {
                    transitions.push(TransitionEntry { from: i, to: j, law: law.clone() });
                }
            }
        }
        LadderSpecConfig {
            drifts: spec.drifts.clone(),
            jumps,
            q: spec.q.clone(),
            transitions,
            killing: spec.killing.clone(),
        }
    }
}
