//! Random-mask sidelobe suppression: per-sidelobe (delta, xi) parameters
//! subtract a masked fraction of each sidelobe's phasor from the multi-focus
//! superposition before requantization.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::geometry::ArrayConfig;
use crate::synthesis::{phasor_sum_at, ReflectionProfile};
use crate::{Error, Result};

const CANCEL_EPS: f64 = 1e-12;

/// Suppression parameters for one sidelobe: `delta` is the mask density
/// (fraction of elements participating) and `xi` the subtraction strength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuppressionEntry {
    pub delta: f64,
    pub xi: f64,
}

impl SuppressionEntry {
    pub fn new(delta: f64, xi: f64) -> Result<Self> {
        for (name, v) in [("delta", delta), ("xi", xi)] {
            if !(v.is_finite() && (0.0..=1.0).contains(&v)) {
                return Err(Error::OutOfRange(format!("{name} {v} outside [0, 1]")));
            }
        }
        Ok(Self { delta, xi })
    }

    /// Identity entry: the sidelobe is left untouched.
    pub fn identity() -> Self {
        Self { delta: 0.0, xi: 0.0 }
    }
}

/// One (delta, xi) entry per detected sidelobe, in detection order.
#[derive(Debug, Clone, PartialEq)]
pub struct SuppressionAssignment {
    pub entries: Vec<SuppressionEntry>,
}

impl SuppressionAssignment {
    pub fn identity(count: usize) -> Self {
        Self {
            entries: vec![SuppressionEntry::identity(); count],
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a decorrelated seed, used for oracle mask-seed spreads.
pub(crate) fn derive_seed(seed: u64, salt: u64) -> u64 {
    splitmix64(seed ^ splitmix64(salt))
}

/// Counter-based uniform value in [0, 1) keyed by (seed, sidelobe, element);
/// element (x, y) of sidelobe m is in the mask iff this value < delta.
fn mask_value(seed: u64, m: usize, x: usize, y: usize) -> f64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ m as u64);
    h = splitmix64(h ^ x as u64);
    h = splitmix64(h ^ y as u64);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Random element mask for sidelobe `m` with density `delta`, x-major.
/// Deterministic in (seed, m, x, y); independent of evaluation order.
pub fn make_mask(cfg: &ArrayConfig, seed: u64, m: usize, delta: f64) -> Result<Vec<bool>> {
    cfg.validate()?;
    if !(delta.is_finite() && (0.0..=1.0).contains(&delta)) {
        return Err(Error::OutOfRange(format!("delta {delta} outside [0, 1]")));
    }
    let mut mask = Vec::with_capacity(cfg.elements());
    for x in 0..cfg.elements_x {
        for y in 0..cfg.elements_y {
            mask.push(mask_value(seed, m, x, y) < delta);
        }
    }
    Ok(mask)
}

/// Applies the suppression assignment: element-wise, the quantized target
/// phasors are summed and, for every sidelobe with delta > 0 and xi > 0,
/// xi times its masked quantized phasor is subtracted; the composite phase
/// is then requantized. An all-identity assignment reproduces the plain
/// superposition bit for bit.
pub fn apply_suppression(
    cfg: &ArrayConfig,
    targets: &[ReflectionProfile],
    sidelobes: &[ReflectionProfile],
    assignment: &SuppressionAssignment,
    seed: u64,
) -> Result<ReflectionProfile> {
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::Dimension("suppression needs target profiles".into()));
    }
    if assignment.entries.len() != sidelobes.len() {
        return Err(Error::Dimension(format!(
            "assignment has {} entries for {} sidelobes",
            assignment.entries.len(),
            sidelobes.len()
        )));
    }
    let dims = (cfg.elements_x, cfg.elements_y);
    if targets.iter().chain(sidelobes).any(|p| p.dims() != dims) {
        return Err(Error::Dimension("profile dimensions do not match config".into()));
    }
    for e in &assignment.entries {
        SuppressionEntry::new(e.delta, e.xi)?;
    }

    let active: Vec<(usize, &ReflectionProfile, SuppressionEntry)> = assignment
        .entries
        .iter()
        .enumerate()
        .filter(|(_, e)| e.delta > 0.0 && e.xi > 0.0)
        .map(|(m, e)| (m, &sidelobes[m], *e))
        .collect();

    let mut phases = Vec::with_capacity(cfg.elements());
    for x in 0..cfg.elements_x {
        for y in 0..cfg.elements_y {
            let idx = x * cfg.elements_y + y;
            let mut sum = phasor_sum_at(targets, idx);
            for &(m, profile, entry) in &active {
                if mask_value(seed, m, x, y) < entry.delta {
                    sum -= entry.xi * Complex64::from_polar(1.0, profile.quantized()[idx]);
                }
            }
            phases.push(if sum.norm() < CANCEL_EPS {
                0.0
            } else {
                sum.arg().rem_euclid(TAU)
            });
        }
    }
    ReflectionProfile::from_phases(cfg, phases)
}
