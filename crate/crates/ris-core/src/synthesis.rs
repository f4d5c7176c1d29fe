//! Phase profile synthesis: single-focus compensation, quantization to the
//! b-bit lattice, and multi-focus superposition of quantized profiles.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::farfield;
use crate::geometry::{ArrayConfig, Direction};
use crate::{Error, Result};

/// Threshold below which a superposed phasor sum counts as cancelled; the
/// composite phase falls back to zero there.
const CANCEL_EPS: f64 = 1e-12;

/// Per-element reflection phases over the array, stored x-major
/// (index = x * elements_y + y), with both the continuous value in [0, 2pi)
/// and its quantized counterpart on the 2^bits lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionProfile {
    nx: usize,
    ny: usize,
    continuous: Vec<f64>,
    quantized: Vec<f64>,
}

impl ReflectionProfile {
    /// Builds a profile from continuous phases, wrapping into [0, 2pi) and
    /// quantizing with the array's phase resolution.
    pub fn from_phases(cfg: &ArrayConfig, phases: Vec<f64>) -> Result<Self> {
        cfg.validate()?;
        if phases.len() != cfg.elements() {
            return Err(Error::Dimension(format!(
                "expected {} phases, got {}",
                cfg.elements(),
                phases.len()
            )));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::OutOfRange("phases must be finite".into()));
        }
        let continuous: Vec<f64> = phases.iter().map(|p| p.rem_euclid(TAU)).collect();
        let quantized = continuous
            .iter()
            .map(|&p| quantize_phase(p, cfg.phase_bits))
            .collect();
        Ok(Self {
            nx: cfg.elements_x,
            ny: cfg.elements_y,
            continuous,
            quantized,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.continuous.len()
    }

    pub fn is_empty(&self) -> bool {
        self.continuous.is_empty()
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        x * self.ny + y
    }

    /// Continuous phases in [0, 2pi), x-major.
    pub fn continuous(&self) -> &[f64] {
        &self.continuous
    }

    /// Quantized phases on the 2^bits lattice, x-major.
    pub fn quantized(&self) -> &[f64] {
        &self.quantized
    }

    pub fn phase_at(&self, x: usize, y: usize) -> f64 {
        self.continuous[self.index(x, y)]
    }

    pub fn quantized_at(&self, x: usize, y: usize) -> f64 {
        self.quantized[self.index(x, y)]
    }

    fn matches(&self, cfg: &ArrayConfig) -> bool {
        self.nx == cfg.elements_x && self.ny == cfg.elements_y
    }
}

/// Half-width, in level units, of the band around each level midpoint that
/// is treated as an exact tie. Superposed lattice phasors land on midpoints
/// up to libm rounding, so without the band the tie outcome would depend on
/// the platform's trig implementation.
const TIE_SNAP: f64 = 1e-9;

/// Quantizes a phase to the nearest of the 2^bits levels {i * 2pi / 2^bits}.
/// Ties round toward the upper level; values at least 2pi - pi / 2^bits wrap
/// to level zero. Superposed profiles place many elements exactly on level
/// midpoints, so the tie direction is observable in multi-focus patterns.
pub fn quantize_phase(phase: f64, bits: u32) -> f64 {
    assert!((1..=8).contains(&bits), "phase_bits must lie in 1..=8");
    let levels = 1usize << bits;
    let step = TAU / levels as f64;
    let mut u = phase.rem_euclid(TAU) / step;
    let snapped = (2.0 * u).round() / 2.0;
    if (u - snapped).abs() < TIE_SNAP {
        u = snapped;
    }
    let idx = (u + 0.5).floor();
    if idx >= levels as f64 {
        return 0.0;
    }
    idx * step
}

/// Single-focus compensation profile: each element cancels the path-length
/// difference between the incident and target directions, so reflections
/// add in phase toward the target.
pub fn single_focus(
    cfg: &ArrayConfig,
    incident: Direction,
    target: Direction,
) -> Result<ReflectionProfile> {
    cfg.validate()?;
    let k = cfg.wavenumber();
    let mut phases = Vec::with_capacity(cfg.elements());
    for x in 0..cfg.elements_x {
        for y in 0..cfg.elements_y {
            let opd_t = farfield::opd(cfg, x, y, target);
            let opd_i = farfield::opd(cfg, x, y, incident);
            phases.push((-k * (opd_t - opd_i)).rem_euclid(TAU));
        }
    }
    ReflectionProfile::from_phases(cfg, phases)
}

/// Sums the quantized phasors of the input profiles element-wise.
pub(crate) fn phasor_sum_at(profiles: &[ReflectionProfile], idx: usize) -> Complex64 {
    profiles.iter().fold(Complex64::new(0.0, 0.0), |acc, p| {
        acc + Complex64::from_polar(1.0, p.quantized[idx])
    })
}

/// Multi-focus profile: element-wise complex sum of the quantized
/// single-focus phasors, with the resulting phase requantized. A cancelled
/// sum (magnitude below 1e-12) falls back to phase zero. A single input is
/// returned unchanged.
pub fn superpose(cfg: &ArrayConfig, profiles: &[ReflectionProfile]) -> Result<ReflectionProfile> {
    cfg.validate()?;
    if profiles.is_empty() {
        return Err(Error::Dimension("superpose needs at least one profile".into()));
    }
    if profiles.iter().any(|p| !p.matches(cfg)) {
        return Err(Error::Dimension("profile dimensions do not match config".into()));
    }
    if profiles.len() == 1 {
        return Ok(profiles[0].clone());
    }
    let phases = (0..cfg.elements())
        .map(|idx| {
            let sum = phasor_sum_at(profiles, idx);
            if sum.norm() < CANCEL_EPS {
                0.0
            } else {
                sum.arg().rem_euclid(TAU)
            }
        })
        .collect();
    ReflectionProfile::from_phases(cfg, phases)
}
