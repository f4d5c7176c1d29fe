//! Pattern analysis: intended and unwanted intensities, the suppression
//! objective, and superposition sidelobe detection.

use crate::farfield::{FarFieldPattern, DB_FLOOR};
use crate::geometry::{angular_distance, AngularGrid, Direction};
use crate::{Error, Result};

/// Intended beam directions sharing one circle radius in degrees; every
/// intensity within `radius_deg` of a target counts as that beam.
#[derive(Debug, Clone)]
pub struct BeamSet {
    pub targets: Vec<Direction>,
    pub radius_deg: f64,
}

impl BeamSet {
    pub fn new(targets: Vec<Direction>, radius_deg: f64) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Config("beam set needs at least one target".into()));
        }
        if !(radius_deg.is_finite() && radius_deg > 0.0) {
            return Err(Error::Config("radius_deg must be positive".into()));
        }
        Ok(Self {
            targets,
            radius_deg,
        })
    }
}

/// One detected sidelobe: grid direction and intensity in dB relative to
/// the pattern reference.
#[derive(Debug, Clone, Copy)]
pub struct Sidelobe {
    pub direction: Direction,
    pub db: f64,
}

/// Detected sidelobes, strongest first.
#[derive(Debug, Clone, Default)]
pub struct SidelobeSet {
    pub lobes: Vec<Sidelobe>,
}

impl SidelobeSet {
    pub fn len(&self) -> usize {
        self.lobes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lobes.is_empty()
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.lobes.iter().map(|l| l.direction).collect()
    }
}

/// Grid cells within `radius_deg` of `center`.
pub fn cells_within(grid: &AngularGrid, center: Direction, radius_deg: f64) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            if angular_distance(grid.direction(i, j), center) <= radius_deg {
                cells.push((i, j));
            }
        }
    }
    cells
}

fn circle_peak_db(pattern: &FarFieldPattern, center: Direction, radius_deg: f64) -> f64 {
    let grid = pattern.grid();
    let mut peak = f64::NEG_INFINITY;
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            if angular_distance(grid.direction(i, j), center) <= radius_deg {
                peak = peak.max(pattern.db(i, j));
            }
        }
    }
    if peak.is_finite() {
        peak
    } else {
        DB_FLOOR
    }
}

/// Weakest intended beam: the minimum over targets of each target's circle
/// peak, in dB relative to the pattern reference.
pub fn intended_intensity(pattern: &FarFieldPattern, beams: &BeamSet) -> f64 {
    beams
        .targets
        .iter()
        .map(|&t| circle_peak_db(pattern, t, beams.radius_deg))
        .fold(f64::INFINITY, f64::min)
}

/// Strongest intensity outside every intended circle, in dB; -400 when no
/// cell lies outside or all outside cells are zero.
pub fn unwanted_intensity(pattern: &FarFieldPattern, beams: &BeamSet) -> f64 {
    let grid = pattern.grid();
    let mut peak = f64::NEG_INFINITY;
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            let d = grid.direction(i, j);
            let outside = beams
                .targets
                .iter()
                .all(|&t| angular_distance(d, t) > beams.radius_deg);
            if outside {
                peak = peak.max(pattern.db(i, j));
            }
        }
    }
    if peak.is_finite() {
        peak
    } else {
        DB_FLOOR
    }
}

/// Suppression objective in dB: intended minus unwanted intensity. Larger
/// is better; independent of the pattern's 0 dB reference.
pub fn objective_db(pattern: &FarFieldPattern, beams: &BeamSet) -> f64 {
    intended_intensity(pattern, beams) - unwanted_intensity(pattern, beams)
}

/// Detects superposition sidelobes: strict local maxima of the dB grid that
/// lie outside every intended circle and within `margin_db` of the weakest
/// intended beam, deduplicated to one lobe per `radius_deg` neighborhood and
/// truncated to the strongest `max_count`.
///
/// The theta = 0 row is physically one direction; it contributes a single
/// broadside candidate when it tops every cell of the next theta row.
pub fn detect_sidelobes(
    pattern: &FarFieldPattern,
    beams: &BeamSet,
    margin_db: f64,
    max_count: usize,
) -> SidelobeSet {
    let grid = pattern.grid();
    let (n_theta, n_phi) = (grid.n_theta(), grid.n_phi());
    let db_at = |i: usize, j: usize| pattern.db(i, j);

    let mut candidates: Vec<(Direction, f64)> = Vec::new();
    let broadside = db_at(0, 0);
    if (0..n_phi).all(|j| broadside > db_at(1, j)) {
        candidates.push((grid.direction(0, 0), broadside));
    }
    for i in 1..n_theta {
        for j in 0..n_phi {
            let v = db_at(i, j);
            let mut is_peak = true;
            'nb: for di in [-1i64, 0, 1] {
                let ii = i as i64 + di;
                if ii < 0 || ii >= n_theta as i64 {
                    continue;
                }
                for dj in [-1i64, 0, 1] {
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let jj = (j as i64 + dj).rem_euclid(n_phi as i64) as usize;
                    if v <= db_at(ii as usize, jj) {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if is_peak {
                candidates.push((grid.direction(i, j), v));
            }
        }
    }

    let intended = intended_intensity(pattern, beams);
    candidates.retain(|&(d, v)| {
        let outside = beams
            .targets
            .iter()
            .all(|&t| angular_distance(d, t) > beams.radius_deg);
        outside && v >= intended - margin_db
    });
    candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());

    let mut lobes: Vec<Sidelobe> = Vec::new();
    for (d, v) in candidates {
        if lobes.len() == max_count {
            break;
        }
        if lobes
            .iter()
            .all(|l| angular_distance(d, l.direction) >= beams.radius_deg)
        {
            lobes.push(Sidelobe { direction: d, db: v });
        }
    }
    SidelobeSet { lobes }
}
