//! CSV serialization with exact float round-trips and atomic file writes.

use std::path::Path;

use crate::env::TrainingRow;
use crate::farfield::FarFieldPattern;
use crate::oracle::OracleResult;
use crate::suppression::SuppressionAssignment;
use crate::synthesis::ReflectionProfile;
use crate::{analysis::SidelobeSet, Error, Result};

/// Formats a float with 17 significant digits so parsing reproduces the
/// exact f64 value.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written artifact. Parent directories are created as needed.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(parent)?;
    let mut tmp_name = path
        .file_name()
        .ok_or_else(|| {
            Error::Io(std::io::Error::new(
                std::io::ErrorKind::InvalidInput,
                format!("not a file path: {}", path.display()),
            ))
        })?
        .to_os_string();
    tmp_name.push(".tmp");
    let tmp = parent.join(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// `x,y,phase_rad,quantized_rad`, x-major.
pub fn profile_csv(profile: &ReflectionProfile) -> String {
    let (nx, ny) = profile.dims();
    let mut out = String::from("x,y,phase_rad,quantized_rad\n");
    for x in 0..nx {
        for y in 0..ny {
            out.push_str(&format!(
                "{x},{y},{},{}\n",
                fmt_float(profile.phase_at(x, y)),
                fmt_float(profile.quantized_at(x, y))
            ));
        }
    }
    out
}

/// `theta_deg,phi_deg,intensity_db`, theta-major.
pub fn pattern_csv(pattern: &FarFieldPattern) -> String {
    let grid = pattern.grid();
    let mut out = String::from("theta_deg,phi_deg,intensity_db\n");
    for i in 0..grid.n_theta() {
        for j in 0..grid.n_phi() {
            out.push_str(&format!(
                "{},{},{}\n",
                fmt_float(grid.theta_at(i)),
                fmt_float(grid.phi_at(j)),
                fmt_float(pattern.db(i, j))
            ));
        }
    }
    out
}

/// `m,theta_deg,phi_deg,intensity_db`, strongest first, m starting at 1.
pub fn detection_csv(lobes: &SidelobeSet) -> String {
    let mut out = String::from("m,theta_deg,phi_deg,intensity_db\n");
    for (m, lobe) in lobes.lobes.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            m + 1,
            fmt_float(lobe.direction.theta_deg),
            fmt_float(lobe.direction.phi_deg),
            fmt_float(lobe.db)
        ));
    }
    out
}

/// `m,delta,xi,seed`, one row per sidelobe, m starting at 1.
pub fn assignment_csv(assignment: &SuppressionAssignment, seed: u64) -> String {
    let mut out = String::from("m,delta,xi,seed\n");
    for (m, e) in assignment.entries.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{seed}\n",
            m + 1,
            fmt_float(e.delta),
            fmt_float(e.xi)
        ));
    }
    out
}

/// `episode,epsilon,reward_db,mean_loss`, one row per episode.
pub fn training_log_csv(rows: &[TrainingRow]) -> String {
    let mut out = String::from("episode,epsilon,reward_db,mean_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.episode,
            fmt_float(r.epsilon),
            fmt_float(r.reward_db),
            fmt_float(r.mean_loss)
        ));
    }
    out
}

/// `assignment_id,delta_1,xi_1,...,delta_M,xi_M,objective_db`, one row per
/// evaluated assignment in evaluation order.
pub fn oracle_csv(result: &OracleResult, sidelobes: usize) -> String {
    let mut out = String::from("assignment_id");
    for m in 1..=sidelobes {
        out.push_str(&format!(",delta_{m},xi_{m}"));
    }
    out.push_str(",objective_db\n");
    for row in &result.rows {
        out.push_str(&row.assignment_id.to_string());
        for e in &row.assignment.entries {
            out.push_str(&format!(",{},{}", fmt_float(e.delta), fmt_float(e.xi)));
        }
        out.push_str(&format!(",{}\n", fmt_float(row.objective_db)));
    }
    out
}

/// Parses a simple numeric CSV produced by this module: a header line and
/// float-parseable cells. Used for round-trip verification.
pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config("empty csv".into()))?
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.parse::<f64>()
                    .map_err(|e| Error::Config(format!("csv line {}: {e}", n + 2)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{AngularGrid, ArrayConfig};
    use crate::suppression::SuppressionEntry;
    use crate::synthesis::ReflectionProfile;

    #[test]
    fn float_format_round_trips_exactly() {
        let values = [
            0.0,
            -0.0,
            1.0,
            std::f64::consts::PI,
            -6.485378874209391,
            2500.0,
            1e-300,
            -4.0e2,
            f64::MIN_POSITIVE,
        ];
        for v in values {
            let s = fmt_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "{v} -> {s}");
        }
    }

    #[test]
    fn profile_csv_round_trips() {
        let cfg = ArrayConfig {
            elements_x: 3,
            elements_y: 2,
            pitch_m: 0.017,
            frequency_hz: 3.5e9,
            phase_bits: 2,
        };
        let p = ReflectionProfile::from_phases(&cfg, vec![0.1, 1.3, 2.7, 3.9, 5.1, 6.2]).unwrap();
        let text = profile_csv(&p);
        let (header, rows) = parse_csv(&text).unwrap();
        assert_eq!(header, ["x", "y", "phase_rad", "quantized_rad"]);
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0][..2], [0.0, 0.0]);
        assert_eq!(rows[5][..2], [2.0, 1.0]);
        for (row, (c, q)) in rows.iter().zip(p.continuous().iter().zip(p.quantized())) {
            assert_eq!(row[2].to_bits(), c.to_bits());
            assert_eq!(row[3].to_bits(), q.to_bits());
        }
    }

    #[test]
    fn pattern_csv_is_theta_major() {
        let grid = AngularGrid::new(45.0, 120.0).unwrap();
        let mags: Vec<f64> = (0..grid.cells()).map(|i| (i + 1) as f64).collect();
        let pat = crate::farfield::FarFieldPattern::from_parts(grid, mags, 9.0);
        let (header, rows) = parse_csv(&pattern_csv(&pat)).unwrap();
        assert_eq!(header, ["theta_deg", "phi_deg", "intensity_db"]);
        assert_eq!(rows.len(), 9);
        assert_eq!(rows[0][..2], [0.0, 0.0]);
        assert_eq!(rows[1][..2], [0.0, 120.0]);
        assert_eq!(rows[3][..2], [45.0, 0.0]);
        assert_eq!(rows[8][2], 0.0);
    }

    #[test]
    fn assignment_csv_has_one_based_rows() {
        let a = SuppressionAssignment {
            entries: vec![
                SuppressionEntry::new(0.5, 0.25).unwrap(),
                SuppressionEntry::identity(),
            ],
        };
        let (header, rows) = parse_csv(&assignment_csv(&a, 7)).unwrap();
        assert_eq!(header, ["m", "delta", "xi", "seed"]);
        assert_eq!(rows[0], vec![1.0, 0.5, 0.25, 7.0]);
        assert_eq!(rows[1], vec![2.0, 0.0, 0.0, 7.0]);
    }

    #[test]
    fn atomic_write_creates_parents_and_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/dir/out.csv");
        atomic_write(&path, b"one\n").unwrap();
        atomic_write(&path, b"two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two\n");
        assert!(!path.with_file_name("out.csv.tmp").exists());
    }

    #[test]
    fn parse_csv_rejects_junk() {
        assert!(parse_csv("").is_err());
        assert!(parse_csv("a,b\n1,x\n").is_err());
        let (h, r) = parse_csv("a,b\n1,2\n\n3,4\n").unwrap();
        assert_eq!(h.len(), 2);
        assert_eq!(r.len(), 2);
    }
}
