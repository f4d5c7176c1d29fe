//! Brute-force suppression oracle: exhaustive search over a coarse (delta,
//! xi) grid for one or two sidelobes, coordinate descent for more, plus a
//! mask-seed sensitivity spread for the best assignment.

use crate::analysis::objective_db;
use crate::env::{ActionGrid, Scenario};
use crate::farfield::pattern;
use crate::suppression::{apply_suppression, SuppressionAssignment, SuppressionEntry};
use crate::{Error, Result};

/// Cap on coordinate-descent sweeps; the objective increases strictly per
/// accepted move, so this only guards against pathological cycling.
const MAX_SWEEPS: usize = 50;

/// One evaluated assignment.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub assignment_id: u64,
    pub assignment: SuppressionAssignment,
    pub objective_db: f64,
}

/// Search outcome over the scenario's sidelobes.
#[derive(Debug)]
pub struct OracleResult {
    pub baseline_objective: f64,
    pub best_objective: f64,
    pub best_assignment: SuppressionAssignment,
    pub evaluations: u64,
    pub rows: Vec<OracleRow>,
    /// Best-assignment objective under ten derived mask seeds.
    pub seed_spread: Vec<f64>,
}

fn evaluate(scenario: &Scenario, assignment: &SuppressionAssignment, seed: u64) -> Result<f64> {
    let profile = apply_suppression(
        &scenario.array,
        &scenario.target_profiles,
        &scenario.sidelobe_profiles,
        assignment,
        seed,
    )?;
    let pat = pattern(&scenario.array, &profile, &scenario.grid)?;
    Ok(objective_db(&pat, &scenario.beams))
}

/// Searches the coarse action grid for the best per-sidelobe (delta, xi)
/// assignment under the scenario's fixed mask seed. Up to two sidelobes are
/// searched exhaustively in lexicographic order (first sidelobe most
/// significant); more use coordinate descent from the identity assignment,
/// sweeping sidelobes in order until a full sweep yields no strict
/// improvement. Ties keep the earliest assignment visited.
pub fn grid_search(scenario: &Scenario, coarse: &ActionGrid, seed: u64) -> Result<OracleResult> {
    let m = scenario.m();
    let baseline = scenario.baseline_objective;
    if m == 0 {
        return Ok(OracleResult {
            baseline_objective: baseline,
            best_objective: baseline,
            best_assignment: SuppressionAssignment::identity(0),
            evaluations: 0,
            rows: Vec::new(),
            seed_spread: vec![baseline; 10],
        });
    }

    let pairs: Vec<SuppressionEntry> = (0..coarse.action_count())
        .map(|a| coarse.decode(a))
        .collect::<Result<_>>()?;
    let p = pairs.len();

    let mut rows = Vec::new();
    let mut evaluations = 0u64;
    let mut best_objective = f64::NEG_INFINITY;
    let mut best_assignment = SuppressionAssignment::identity(m);

    if m <= 2 {
        let total = p.checked_pow(m as u32).ok_or_else(|| {
            Error::Config("coarse grid too large for exhaustive search".into())
        })?;
        for id in 0..total {
            // Lexicographic decode: sidelobe 0 is the most significant digit.
            let mut entries = Vec::with_capacity(m);
            let mut q = id;
            for index in (0..m).rev() {
                let digit = q / p.pow(index as u32);
                q %= p.pow(index as u32);
                entries.push(pairs[digit]);
            }
            let assignment = SuppressionAssignment { entries };
            let objective = evaluate(scenario, &assignment, seed)?;
            evaluations += 1;
            rows.push(OracleRow {
                assignment_id: id as u64,
                assignment: assignment.clone(),
                objective_db: objective,
            });
            if objective > best_objective {
                best_objective = objective;
                best_assignment = assignment;
            }
        }
    } else {
        let mut current = vec![0usize; m];
        let assignment_of = |idx: &[usize]| SuppressionAssignment {
            entries: idx.iter().map(|&i| pairs[i]).collect(),
        };
        best_assignment = assignment_of(&current);
        best_objective = evaluate(scenario, &best_assignment, seed)?;
        evaluations += 1;
        rows.push(OracleRow {
            assignment_id: 0,
            assignment: best_assignment.clone(),
            objective_db: best_objective,
        });

        for _ in 0..MAX_SWEEPS {
            let mut improved = false;
            for slot in 0..m {
                let original = current[slot];
                let mut best_pair = original;
                for pair in 0..p {
                    if pair == original {
                        continue;
                    }
                    current[slot] = pair;
                    let assignment = assignment_of(&current);
                    let objective = evaluate(scenario, &assignment, seed)?;
                    evaluations += 1;
                    rows.push(OracleRow {
                        assignment_id: evaluations,
                        assignment: assignment.clone(),
                        objective_db: objective,
                    });
                    if objective > best_objective {
                        best_objective = objective;
                        best_assignment = assignment;
                        best_pair = pair;
                        improved = true;
                    }
                }
                current[slot] = best_pair;
            }
            if !improved {
                break;
            }
        }
    }

    let seed_spread = (1..=10u64)
        .map(|i| evaluate(scenario, &best_assignment, crate::suppression::derive_seed(seed, i)))
        .collect::<Result<Vec<f64>>>()?;

    Ok(OracleResult {
        baseline_objective: baseline,
        best_objective,
        best_assignment,
        evaluations,
        rows,
        seed_spread,
    })
}
