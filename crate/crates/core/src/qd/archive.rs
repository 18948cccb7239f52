use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::{euler_xyz_from_quaternion, Pose};
use crate::robustness::RobustLabel;
use crate::sim::{RejectReason, SettleOutcome};
use crate::space::Genome;

/// Grid resolution: position bins per axis and Euler-angle bins per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinSpec {
    pub position: [usize; 3],
    pub orientation: [usize; 3],
}

impl Default for BinSpec {
    fn default() -> Self {
        Self { position: [10, 10, 5], orientation: [8, 8, 8] }
    }
}

impl BinSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.position.iter().chain(&self.orientation).any(|&n| n == 0) {
            return Err("every bin count must be at least 1".into());
        }
        Ok(())
    }

    pub fn total_cells(&self) -> u64 {
        self.position.iter().chain(&self.orientation).map(|&n| n as u64).product()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveSpec {
    pub bins: BinSpec,
    pub feature_min: [f64; 3],
    pub feature_max: [f64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OutOfBounds;

/// Index of a value in `[0, 1]` scaled onto `n` bins; interior boundaries
/// belong to the lower bin.
fn lower_bin(t: f64, n: usize) -> usize {
    let s = t * n as f64;
    (s.ceil() as i64 - 1).clamp(0, n as i64 - 1) as usize
}

/// Angle bin over `[-π, π)` with bin 0 centred on `-π` and wrap-around, so
/// that zero sits at the centre of bin `n / 2` for even `n`.
fn angle_bin(theta: f64, n: usize) -> usize {
    let width = 2.0 * PI / n as f64;
    let s = (theta + PI) / width + 0.5;
    let k = s.ceil() as i64 - 1;
    k.rem_euclid(n as i64) as usize
}

impl ArchiveSpec {
    pub fn total_cells(&self) -> u64 {
        self.bins.total_cells()
    }

    /// `[ix, iy, iz, i_roll, i_pitch, i_yaw]` of a feature pose.
    pub fn cell_coords(&self, feature: &Pose<f64>) -> Result<[usize; 6], OutOfBounds> {
        let mut out = [0usize; 6];
        for k in 0..3 {
            let (lo, hi) = (self.feature_min[k], self.feature_max[k]);
            let x = feature.position[k];
            if !(x >= lo && x <= hi) {
                return Err(OutOfBounds);
            }
            out[k] = lower_bin((x - lo) / (hi - lo), self.bins.position[k]);
        }
        let angles = euler_xyz_from_quaternion(&feature.orientation);
        for k in 0..3 {
            out[3 + k] = angle_bin(angles[k], self.bins.orientation[k]);
        }
        Ok(out)
    }

    pub fn flatten(&self, c: &[usize; 6]) -> u64 {
        let dims = self.dims();
        c.iter().zip(dims).fold(0u64, |acc, (&i, n)| acc * n as u64 + i as u64)
    }

    pub fn unflatten(&self, mut index: u64) -> [usize; 6] {
        let dims = self.dims();
        let mut out = [0usize; 6];
        for k in (0..6).rev() {
            out[k] = (index % dims[k] as u64) as usize;
            index /= dims[k] as u64;
        }
        out
    }

    fn dims(&self) -> [usize; 6] {
        let (p, o) = (self.bins.position, self.bins.orientation);
        [p[0], p[1], p[2], o[0], o[1], o[2]]
    }

    pub fn cell_index(&self, feature: &Pose<f64>) -> Result<u64, OutOfBounds> {
        self.cell_coords(feature).map(|c| self.flatten(&c))
    }
}

/// Best solution stored in one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Elite {
    pub genome: Genome,
    pub initial: Pose<f64>,
    /// Archive fitness: `-variance` for valid outcomes, capped at `-sigma_st`
    /// for invalid ones so a valid outcome always wins its cell.
    pub fitness: f64,
    pub variance: f64,
    pub feature: Pose<f64>,
    pub valid: bool,
    pub reason: RejectReason,
    pub eval_index: u64,
    pub robust: Option<RobustLabel>,
    pub novelty: Option<f64>,
}

impl Elite {
    /// `None` for outcomes that never produced a settled pose (overlap, blowup).
    pub fn from_outcome(genome: Genome, initial: Pose<f64>, outcome: &SettleOutcome<f64>, eval_index: u64, sigma_st: f64) -> Option<Self> {
        if matches!(outcome.reason, RejectReason::Overlap | RejectReason::Escaped) || !outcome.variance.is_finite() {
            return None;
        }
        let fitness = if outcome.valid { outcome.fitness } else { outcome.fitness.min(-sigma_st) };
        Some(Self {
            genome,
            initial,
            fitness,
            variance: outcome.variance,
            feature: outcome.feature,
            valid: outcome.valid,
            reason: outcome.reason,
            eval_index,
            robust: None,
            novelty: None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArchiveMode {
    /// Plain per-cell replacement on strict fitness improvement.
    MapElites,
    /// Soft acceptance against per-cell thresholds with learning rate `alpha`.
    Annealing { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OfferStatus {
    New,
    Improved,
    Rejected,
    OutOfBounds,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OfferResult {
    pub status: OfferStatus,
    /// Passed the acceptance test (incumbent fitness, or threshold when annealing).
    pub accepted: bool,
    /// Improvement over the incumbent fitness (or threshold when annealing);
    /// an empty cell counts from `f_min`.
    pub delta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Archive {
    pub spec: ArchiveSpec,
    pub mode: ArchiveMode,
    pub f_min: f64,
    pub sigma_st: f64,
    elites: BTreeMap<u64, Elite>,
    thresholds: BTreeMap<u64, f64>,
    valid_cells: u64,
    pub out_of_bounds: u64,
}

pub const DEFAULT_F_MIN: f64 = -10_000.0;

impl Archive {
    pub fn new(spec: ArchiveSpec, mode: ArchiveMode, sigma_st: f64) -> Self {
        Self {
            spec,
            mode,
            f_min: DEFAULT_F_MIN,
            sigma_st,
            elites: BTreeMap::new(),
            thresholds: BTreeMap::new(),
            valid_cells: 0,
            out_of_bounds: 0,
        }
    }

    pub fn with_f_min(mut self, f_min: f64) -> Self {
        self.f_min = f_min;
        self
    }

    pub fn len(&self) -> usize {
        self.elites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elites.is_empty()
    }

    pub fn valid_cells(&self) -> u64 {
        self.valid_cells
    }

    pub fn coverage(&self) -> f64 {
        self.valid_cells as f64 / self.spec.total_cells() as f64
    }

    pub fn get(&self, cell: u64) -> Option<&Elite> {
        self.elites.get(&cell)
    }

    pub fn elites(&self) -> impl Iterator<Item = (u64, &Elite)> {
        self.elites.iter().map(|(&k, v)| (k, v))
    }

    pub fn elites_mut(&mut self) -> impl Iterator<Item = (u64, &mut Elite)> {
        self.elites.iter_mut().map(|(&k, v)| (k, v))
    }

    /// Acceptance threshold of a cell; `f_min` until first accepted.
    pub fn threshold(&self, cell: u64) -> f64 {
        self.thresholds.get(&cell).copied().unwrap_or(self.f_min)
    }

    pub fn thresholds(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.thresholds.iter().map(|(&k, &v)| (k, v))
    }

    pub fn offer(&mut self, candidate: Elite) -> OfferResult {
        let Ok(cell) = self.spec.cell_index(&candidate.feature) else {
            self.out_of_bounds += 1;
            return OfferResult { status: OfferStatus::OutOfBounds, accepted: false, delta: f64::NEG_INFINITY };
        };
        let f = candidate.fitness;
        let incumbent = self.elites.get(&cell).map(|e| e.fitness);
        let beats_incumbent = incumbent.map_or(true, |g| f > g);
        let (accepted, delta) = match self.mode {
            ArchiveMode::MapElites => (beats_incumbent, f - incumbent.unwrap_or(self.f_min)),
            ArchiveMode::Annealing { alpha } => {
                let t = self.threshold(cell);
                let accepted = f > t;
                if accepted {
                    self.thresholds.insert(cell, (1.0 - alpha) * t + alpha * f);
                }
                (accepted, f - t)
            }
        };
        let status = if !beats_incumbent {
            OfferStatus::Rejected
        } else if incumbent.is_none() {
            OfferStatus::New
        } else {
            OfferStatus::Improved
        };
        if status != OfferStatus::Rejected {
            let was_valid = self.elites.get(&cell).is_some_and(|e| e.valid);
            match (was_valid, candidate.valid) {
                (false, true) => self.valid_cells += 1,
                (true, false) => self.valid_cells -= 1,
                _ => {}
            }
            self.elites.insert(cell, candidate);
        }
        OfferResult { status, accepted, delta }
    }

    /// Inserts an elite and threshold without any acceptance logic; used when loading files.
    pub(crate) fn restore(&mut self, cell: u64, elite: Elite) {
        if elite.valid && !self.elites.get(&cell).is_some_and(|e| e.valid) {
            self.valid_cells += 1;
        }
        self.elites.insert(cell, elite);
    }

    pub(crate) fn restore_threshold(&mut self, cell: u64, t: f64) {
        self.thresholds.insert(cell, t);
    }
}

/// One row of a coverage curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoveragePoint {
    pub evaluations: u64,
    pub filled_success_cells: u64,
    pub total_cells: u64,
    pub coverage: f64,
}

/// Coverage after each evaluation, stored as the rows where it changed plus
/// the first and last evaluation counts.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CoverageSeries {
    pub points: Vec<CoveragePoint>,
}

impl CoverageSeries {
    pub fn start(archive: &Archive) -> Self {
        let mut s = Self::default();
        s.push(0, archive);
        s
    }

    fn push(&mut self, evaluations: u64, archive: &Archive) {
        self.points.push(CoveragePoint {
            evaluations,
            filled_success_cells: archive.valid_cells(),
            total_cells: archive.spec.total_cells(),
            coverage: archive.coverage(),
        });
    }

    /// Records the archive state after `evaluations` evaluations when the
    /// success count changed.
    pub fn record(&mut self, evaluations: u64, archive: &Archive) {
        let changed = self.points.last().map_or(true, |p| p.filled_success_cells != archive.valid_cells());
        if changed {
            self.push(evaluations, archive);
        }
    }

    /// Closes the series at the final evaluation count.
    pub fn finish(&mut self, evaluations: u64, archive: &Archive) {
        if self.points.last().map_or(true, |p| p.evaluations != evaluations) {
            self.push(evaluations, archive);
        }
    }

    /// Coverage after `evaluations` evaluations (step interpolation).
    pub fn at(&self, evaluations: u64) -> f64 {
        self.points.iter().take_while(|p| p.evaluations <= evaluations).last().map_or(0.0, |p| p.coverage)
    }

    pub fn final_coverage(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.coverage)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("evaluations,filled_success_cells,total_cells,coverage\n");
        for p in &self.points {
            s.push_str(&format!("{},{},{},{}\n", p.evaluations, p.filled_success_cells, p.total_cells, p.coverage));
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self, String> {
        let mut lines = text.lines();
        let header = lines.next().ok_or("empty coverage file")?;
        if header.trim() != "evaluations,filled_success_cells,total_cells,coverage" {
            return Err(format!("unexpected coverage header: {header}"));
        }
        let mut points = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 4 {
                return Err(format!("line {}: expected 4 fields", i + 2));
            }
            let bad = |e: &dyn std::fmt::Display| format!("line {}: {e}", i + 2);
            points.push(CoveragePoint {
                evaluations: f[0].parse().map_err(|e| bad(&e))?,
                filled_success_cells: f[1].parse().map_err(|e| bad(&e))?,
                total_cells: f[2].parse().map_err(|e| bad(&e))?,
                coverage: f[3].parse().map_err(|e| bad(&e))?,
            });
        }
        Ok(Self { points })
    }
}
