//! Array geometry, far-field directions, and the angular evaluation grid.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

/// Physical description of the rectangular reflectarray.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    /// Element count along x.
    pub elements_x: usize,
    /// Element count along y.
    pub elements_y: usize,
    /// Element pitch in meters, identical along x and y.
    pub pitch_m: f64,
    /// Operating frequency in Hz.
    pub frequency_hz: f64,
    /// Phase resolution in bits; the profile uses 2^bits uniform levels.
    pub phase_bits: u32,
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<()> {
        if self.elements_x == 0 || self.elements_y == 0 {
            return Err(Error::Config("element counts must be at least 1".into()));
        }
        if !(self.pitch_m.is_finite() && self.pitch_m > 0.0) {
            return Err(Error::Config("pitch_m must be positive".into()));
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(Error::Config("frequency_hz must be positive".into()));
        }
        if self.phase_bits < 1 || self.phase_bits > 8 {
            return Err(Error::Config("phase_bits must lie in 1..=8".into()));
        }
        Ok(())
    }

    /// Total element count.
    pub fn elements(&self) -> usize {
        self.elements_x * self.elements_y
    }

    /// Free-space wavelength in meters.
    pub fn wavelength_m(&self) -> f64 {
        C0 / self.frequency_hz
    }

    /// Free-space wavenumber, rad/m.
    pub fn wavenumber(&self) -> f64 {
        TAU / self.wavelength_m()
    }

    /// Number of quantization levels, 2^bits.
    pub fn phase_levels(&self) -> usize {
        1usize << self.phase_bits
    }

    /// Quantization step in radians.
    pub fn phase_step_rad(&self) -> f64 {
        TAU / self.phase_levels() as f64
    }

    /// Offset of element (x, y) from the corner element (0, 0), meters.
    pub fn offset_m(&self, x: usize, y: usize) -> (f64, f64) {
        (x as f64 * self.pitch_m, y as f64 * self.pitch_m)
    }
}

/// Far-field direction in degrees: theta from broadside in [0, 90],
/// phi azimuth normalized into [0, 360).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub theta_deg: f64,
    pub phi_deg: f64,
}

impl Direction {
    /// Creates a direction, normalizing phi into [0, 360).
    pub fn new(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        if !theta_deg.is_finite() || !(0.0..=90.0).contains(&theta_deg) {
            return Err(Error::OutOfRange(format!(
                "theta_deg {theta_deg} outside [0, 90]"
            )));
        }
        if !phi_deg.is_finite() {
            return Err(Error::OutOfRange("phi_deg must be finite".into()));
        }
        Ok(Self {
            theta_deg,
            phi_deg: phi_deg.rem_euclid(360.0),
        })
    }

    /// Direction cosine along x: sin(theta) cos(phi).
    pub fn u(&self) -> f64 {
        self.theta_deg.to_radians().sin() * self.phi_deg.to_radians().cos()
    }

    /// Direction cosine along y: sin(theta) sin(phi).
    pub fn v(&self) -> f64 {
        self.theta_deg.to_radians().sin() * self.phi_deg.to_radians().sin()
    }
}

/// Angular separation in degrees used for circles on the (theta, phi) plane:
/// sqrt(dtheta^2 + dphi^2) with the phi difference wrapped into [0, 180].
pub fn angular_distance(a: Direction, b: Direction) -> f64 {
    let dt = a.theta_deg - b.theta_deg;
    let mut dp = (a.phi_deg - b.phi_deg).abs();
    if dp > 180.0 {
        dp = 360.0 - dp;
    }
    (dt * dt + dp * dp).sqrt()
}

/// Uniform evaluation grid: theta in [0, 90] inclusive, phi in [0, 360)
/// exclusive. Steps must divide their spans exactly.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AngularGrid {
    pub theta_step_deg: f64,
    pub phi_step_deg: f64,
}

impl Default for AngularGrid {
    fn default() -> Self {
        Self {
            theta_step_deg: 1.0,
            phi_step_deg: 1.0,
        }
    }
}

fn divides(span: f64, step: f64) -> bool {
    if !(step.is_finite() && step > 0.0 && step <= span) {
        return false;
    }
    let n = span / step;
    (n - n.round()).abs() < 1e-9
}

impl AngularGrid {
    pub fn new(theta_step_deg: f64, phi_step_deg: f64) -> Result<Self> {
        let grid = Self {
            theta_step_deg,
            phi_step_deg,
        };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if !divides(90.0, self.theta_step_deg) {
            return Err(Error::Config(format!(
                "theta_step_deg {} must divide 90",
                self.theta_step_deg
            )));
        }
        if !divides(360.0, self.phi_step_deg) {
            return Err(Error::Config(format!(
                "phi_step_deg {} must divide 360",
                self.phi_step_deg
            )));
        }
        Ok(())
    }

    /// Number of theta samples, including both endpoints.
    pub fn n_theta(&self) -> usize {
        (90.0 / self.theta_step_deg).round() as usize + 1
    }

    /// Number of phi samples; 360 is excluded as an alias of 0.
    pub fn n_phi(&self) -> usize {
        (360.0 / self.phi_step_deg).round() as usize
    }

    /// Total cell count.
    pub fn cells(&self) -> usize {
        self.n_theta() * self.n_phi()
    }

    pub fn theta_at(&self, i: usize) -> f64 {
        i as f64 * self.theta_step_deg
    }

    pub fn phi_at(&self, j: usize) -> f64 {
        j as f64 * self.phi_step_deg
    }

    pub fn direction(&self, i: usize, j: usize) -> Direction {
        Direction {
            theta_deg: self.theta_at(i),
            phi_deg: self.phi_at(j),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir(t: f64, p: f64) -> Direction {
        Direction::new(t, p).unwrap()
    }

    #[test]
    fn angular_distance_wraps_phi() {
        assert_eq!(angular_distance(dir(10.0, 350.0), dir(10.0, 10.0)), 20.0);
    }

    #[test]
    fn angular_distance_broadside_to_opposite_phi() {
        assert_eq!(angular_distance(dir(0.0, 0.0), dir(0.0, 180.0)), 180.0);
    }

    #[test]
    fn angular_distance_self_is_zero() {
        assert_eq!(angular_distance(dir(45.0, 30.0), dir(45.0, 30.0)), 0.0);
    }

    #[test]
    fn angular_distance_is_symmetric() {
        let mut state = 0x1234_5678_u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let a = dir(next() * 90.0, next() * 360.0);
            let b = dir(next() * 90.0, next() * 360.0);
            let ab = angular_distance(a, b);
            assert_eq!(ab, angular_distance(b, a));
            assert!(ab <= (90.0_f64.powi(2) + 180.0_f64.powi(2)).sqrt());
        }
    }

    #[test]
    fn offsets_measured_from_corner_element() {
        let cfg = ArrayConfig {
            elements_x: 2,
            elements_y: 1,
            pitch_m: 0.017,
            frequency_hz: 3.5e9,
            phase_bits: 2,
        };
        assert_eq!(cfg.offset_m(0, 0), (0.0, 0.0));
        assert_eq!(cfg.offset_m(1, 0), (0.017, 0.0));
    }

    #[test]
    fn wavelength_and_pitch_ratio() {
        let cfg = ArrayConfig {
            elements_x: 50,
            elements_y: 50,
            pitch_m: 0.017,
            frequency_hz: 3.5e9,
            phase_bits: 2,
        };
        let ratio = cfg.pitch_m / cfg.wavelength_m();
        assert!((ratio - 0.198470).abs() < 1e-6, "ratio {ratio}");
        assert_eq!(cfg.wavelength_m(), 0.085654988);
    }

    #[test]
    fn grid_counts() {
        let g = AngularGrid::default();
        assert_eq!((g.n_theta(), g.n_phi(), g.cells()), (91, 360, 32760));
        let g2 = AngularGrid::new(2.0, 2.0).unwrap();
        assert_eq!((g2.n_theta(), g2.n_phi(), g2.cells()), (46, 180, 8280));
    }

    #[test]
    fn grid_rejects_non_divisor_steps() {
        assert!(AngularGrid::new(7.0, 1.0).is_err());
        assert!(AngularGrid::new(1.0, 7.0).is_err());
        assert!(AngularGrid::new(0.0, 1.0).is_err());
        assert!(AngularGrid::new(-1.0, 1.0).is_err());
    }

    #[test]
    fn direction_normalizes_phi() {
        assert_eq!(dir(10.0, 370.0).phi_deg, 10.0);
        assert_eq!(dir(10.0, -10.0).phi_deg, 350.0);
        assert_eq!(dir(10.0, 360.0).phi_deg, 0.0);
        assert!(Direction::new(90.5, 0.0).is_err());
        assert!(Direction::new(-0.1, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ArrayConfig {
            elements_x: 4,
            elements_y: 4,
            pitch_m: 0.017,
            frequency_hz: 3.5e9,
            phase_bits: 2,
        };
        assert!(cfg.validate().is_ok());
        cfg.phase_bits = 0;
        assert!(cfg.validate().is_err());
        cfg.phase_bits = 9;
        assert!(cfg.validate().is_err());
        cfg.phase_bits = 8;
        cfg.pitch_m = 0.0;
        assert!(cfg.validate().is_err());
    }
}
