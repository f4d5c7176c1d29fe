//! Suppression environment: one episode assigns (delta, xi) to each detected
//! sidelobe in order, with a sparse terminal reward equal to the suppression
//! objective, plus the episode-driven training loop.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::analysis::{
    cells_within, detect_sidelobes, objective_db, BeamSet, SidelobeSet,
};
use crate::config::{MaskMode, RunConfig};
use crate::dqn::{
    epsilon_at, select_action, sync_target, train_step, AdamState, AgentConfig, Mlp, ReplayBuffer,
    Transition,
};
use crate::farfield::{db_rel, magnitudes_at, pattern, FarFieldPattern};
use crate::geometry::{AngularGrid, ArrayConfig, Direction};
use crate::suppression::{apply_suppression, SuppressionAssignment, SuppressionEntry};
use crate::synthesis::{single_focus, superpose, ReflectionProfile};
use crate::{Error, Result};

/// State intensities are divided by this many dB before entering the network.
const FEATURE_DB_SCALE: f64 = 40.0;

/// Greedy evaluation period, in episodes.
const GREEDY_EVAL_INTERVAL: usize = 20;

/// Coefficient feature reported for a not-yet-assigned sidelobe.
const UNASSIGNED_COEF: f64 = -1.0;

/// Discrete (delta, xi) action grid; the action index enumerates delta-major.
#[derive(Debug, Clone)]
pub struct ActionGrid {
    delta_values: Vec<f64>,
    xi_values: Vec<f64>,
}

impl ActionGrid {
    pub fn new(delta_values: Vec<f64>, xi_values: Vec<f64>) -> Result<Self> {
        for (name, vals) in [("delta_values", &delta_values), ("xi_values", &xi_values)] {
            if vals.is_empty() {
                return Err(Error::Config(format!("{name} must be nonempty")));
            }
            if vals.iter().any(|v| !(v.is_finite() && (0.0..=1.0).contains(v))) {
                return Err(Error::Config(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(Self {
            delta_values,
            xi_values,
        })
    }

    /// Eleven-point grid {0.0, 0.1, ..., 1.0} on both axes; 121 actions.
    pub fn default_fine() -> Self {
        let vals: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        Self {
            delta_values: vals.clone(),
            xi_values: vals,
        }
    }

    /// Five-point grid {0.0, 0.25, 0.5, 0.75, 1.0}; 25 actions.
    pub fn default_coarse() -> Self {
        let vals: Vec<f64> = (0..=4).map(|i| i as f64 / 4.0).collect();
        Self {
            delta_values: vals.clone(),
            xi_values: vals,
        }
    }

    pub fn action_count(&self) -> usize {
        self.delta_values.len() * self.xi_values.len()
    }

    pub fn decode(&self, action: usize) -> Result<SuppressionEntry> {
        if action >= self.action_count() {
            return Err(Error::OutOfRange(format!(
                "action {action} out of {}",
                self.action_count()
            )));
        }
        SuppressionEntry::new(
            self.delta_values[action / self.xi_values.len()],
            self.xi_values[action % self.xi_values.len()],
        )
    }

    /// Normalized coefficient feature for an action index.
    pub fn coefficient(&self, action: usize) -> f64 {
        let n = self.action_count();
        if n <= 1 {
            0.0
        } else {
            action as f64 / (n - 1) as f64
        }
    }
}

/// Frozen problem instance: array, beams, baseline pattern, detected
/// sidelobes with their single-focus profiles, and the action grid.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub array: ArrayConfig,
    pub grid: AngularGrid,
    pub incident: Direction,
    pub beams: BeamSet,
    pub actions: ActionGrid,
    pub mask_mode: MaskMode,
    pub mask_seed: u64,
    pub target_profiles: Vec<ReflectionProfile>,
    pub multi_focus: ReflectionProfile,
    pub baseline_pattern: FarFieldPattern,
    pub baseline_objective: f64,
    pub sidelobes: SidelobeSet,
    pub sidelobe_profiles: Vec<ReflectionProfile>,
    /// Grid cells of every beam circle: targets first, then sidelobes.
    circle_dirs: Vec<Vec<Direction>>,
}

impl Scenario {
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let array = cfg.array.clone();
        let grid = cfg.angular_grid()?;
        let incident = cfg.incident()?;
        let beams = cfg.beam_set()?;
        let actions = cfg.action_grid()?;

        let target_profiles: Vec<ReflectionProfile> = beams
            .targets
            .iter()
            .map(|&t| single_focus(&array, incident, t))
            .collect::<Result<_>>()?;
        let multi_focus = superpose(&array, &target_profiles)?;
        let baseline_pattern = pattern(&array, &multi_focus, &grid)?;
        let baseline_objective = objective_db(&baseline_pattern, &beams);
        let sidelobes = detect_sidelobes(
            &baseline_pattern,
            &beams,
            cfg.detect.margin_db,
            cfg.detect.max_count,
        );
        let sidelobe_profiles: Vec<ReflectionProfile> = sidelobes
            .directions()
            .iter()
            .map(|&d| single_focus(&array, incident, d))
            .collect::<Result<_>>()?;

        let mut circle_dirs = Vec::new();
        for center in beams.targets.iter().chain(sidelobes.directions().iter()) {
            let dirs: Vec<Direction> = cells_within(&grid, *center, beams.radius_deg)
                .into_iter()
                .map(|(i, j)| grid.direction(i, j))
                .collect();
            circle_dirs.push(dirs);
        }

        Ok(Self {
            array,
            grid,
            incident,
            beams,
            actions,
            mask_mode: cfg.suppress.mask_mode,
            mask_seed: cfg.seed,
            target_profiles,
            multi_focus,
            baseline_pattern,
            baseline_objective,
            sidelobes,
            sidelobe_profiles,
            circle_dirs,
        })
    }

    /// Intended beam count.
    pub fn t(&self) -> usize {
        self.beams.targets.len()
    }

    /// Detected sidelobe count.
    pub fn m(&self) -> usize {
        self.sidelobes.len()
    }

    /// State vector length: one intensity per intended beam, then per
    /// sidelobe an intensity and a coefficient entry.
    pub fn state_len(&self) -> usize {
        self.t() + 2 * self.m()
    }

    /// dB value of a linear magnitude against the absolute single-element
    /// reference (element count maps to 0 dB).
    fn absolute_db(&self, mag: f64) -> f64 {
        db_rel(mag, self.array.elements() as f64)
    }

    /// Peak absolute dB inside each stored circle for the given profile,
    /// evaluated only at that circle's grid cells.
    fn circle_peaks(&self, profile: &ReflectionProfile) -> Result<Vec<f64>> {
        let mut peaks = Vec::with_capacity(self.circle_dirs.len());
        for dirs in &self.circle_dirs {
            let mags = magnitudes_at(&self.array, profile, dirs)?;
            let peak = mags.iter().cloned().fold(0.0_f64, f64::max);
            peaks.push(self.absolute_db(peak));
        }
        Ok(peaks)
    }

    fn circle_peaks_from_pattern(&self, pat: &FarFieldPattern) -> Vec<f64> {
        let grid = pat.grid();
        let mut peaks = Vec::with_capacity(self.circle_dirs.len());
        let centers: Vec<Direction> = self
            .beams
            .targets
            .iter()
            .cloned()
            .chain(self.sidelobes.directions())
            .collect();
        for center in centers {
            let mut peak = 0.0_f64;
            for (i, j) in cells_within(grid, center, self.beams.radius_deg) {
                peak = peak.max(pat.magnitude(i, j));
            }
            peaks.push(self.absolute_db(peak));
        }
        peaks
    }
}

/// Normalized copy of a state vector: intensity entries are divided by
/// 40 dB, coefficient entries pass through.
pub fn features(scenario: &Scenario, state: &[f64]) -> Vec<f64> {
    let t = scenario.t();
    state
        .iter()
        .enumerate()
        .map(|(idx, &v)| {
            let is_coef = idx >= t && (idx - t) % 2 == 1;
            if is_coef {
                v
            } else {
                v / FEATURE_DB_SCALE
            }
        })
        .collect()
}

/// Outcome of one environment step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: Vec<f64>,
    pub reward_db: f64,
    pub terminal: bool,
}

/// One suppression episode over a fixed scenario. Sidelobes are assigned in
/// detection order; the episode terminates after the last assignment with
/// the full-grid objective as reward.
pub struct Env<'a> {
    scenario: &'a Scenario,
    mask_seed: u64,
    state: Vec<f64>,
    assigned: Vec<usize>,
    done: bool,
}

impl<'a> Env<'a> {
    /// Starts an episode; the mask seed fixes every mask drawn during it.
    /// With no detected sidelobes the episode is terminal immediately.
    pub fn reset(scenario: &'a Scenario, mask_seed: u64) -> Result<Self> {
        let peaks = scenario.circle_peaks(&scenario.multi_focus)?;
        let mut state = Vec::with_capacity(scenario.state_len());
        state.extend_from_slice(&peaks[..scenario.t()]);
        for m in 0..scenario.m() {
            state.push(peaks[scenario.t() + m]);
            state.push(UNASSIGNED_COEF);
        }
        Ok(Self {
            scenario,
            mask_seed,
            state,
            assigned: Vec::new(),
            done: scenario.m() == 0,
        })
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn assigned_actions(&self) -> &[usize] {
        &self.assigned
    }

    /// Suppression assignment built from the actions taken so far; pending
    /// sidelobes stay at the identity entry.
    pub fn assignment(&self) -> Result<SuppressionAssignment> {
        let mut entries = vec![SuppressionEntry::identity(); self.scenario.m()];
        for (m, &a) in self.assigned.iter().enumerate() {
            entries[m] = self.scenario.actions.decode(a)?;
        }
        Ok(SuppressionAssignment { entries })
    }

    fn suppressed(&self) -> Result<ReflectionProfile> {
        apply_suppression(
            &self.scenario.array,
            &self.scenario.target_profiles,
            &self.scenario.sidelobe_profiles,
            &self.assignment()?,
            self.mask_seed,
        )
    }

    fn write_intensities(&mut self, peaks: &[f64]) {
        let t = self.scenario.t();
        self.state[..t].copy_from_slice(&peaks[..t]);
        for m in 0..self.scenario.m() {
            self.state[t + 2 * m] = peaks[t + m];
        }
    }

    /// Applies the action to the next unassigned sidelobe. Non-terminal
    /// steps update intensities from the beam circles only and return zero
    /// reward; the terminal step evaluates the full grid and returns the
    /// suppression objective in dB.
    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::OutOfRange("step on a finished episode".into()));
        }
        self.scenario.actions.decode(action)?;
        let m = self.assigned.len();
        self.assigned.push(action);
        self.state[self.scenario.t() + 2 * m + 1] = self.scenario.actions.coefficient(action);
        let profile = self.suppressed()?;

        let terminal = self.assigned.len() == self.scenario.m();
        let reward = if terminal {
            self.done = true;
            let pat = pattern(&self.scenario.array, &profile, &self.scenario.grid)?;
            let peaks = self.scenario.circle_peaks_from_pattern(&pat);
            self.write_intensities(&peaks);
            objective_db(&pat, &self.scenario.beams)
        } else {
            let peaks = self.scenario.circle_peaks(&profile)?;
            self.write_intensities(&peaks);
            0.0
        };
        Ok(StepOutcome {
            state: self.state.clone(),
            reward_db: reward,
            terminal,
        })
    }
}

/// One training log row, mirroring the exported CSV.
#[derive(Debug, Clone)]
pub struct TrainingRow {
    pub episode: usize,
    pub epsilon: f64,
    pub reward_db: f64,
    pub mean_loss: f64,
}

/// Result of a training run, including the best greedy policy found.
#[derive(Debug)]
pub struct TrainingResult {
    pub rows: Vec<TrainingRow>,
    pub baseline_objective: f64,
    pub best_objective: f64,
    pub best_assignment: SuppressionAssignment,
    pub best_episode: usize,
    pub final_profile: ReflectionProfile,
    pub final_pattern: FarFieldPattern,
    pub net: Mlp,
    pub adam: AdamState,
}

/// Greedy rollout of a policy under the scenario's fixed mask seed.
/// Returns the terminal objective and the actions taken.
pub fn greedy_rollout(scenario: &Scenario, net: &Mlp) -> Result<(f64, Vec<usize>)> {
    let mut env = Env::reset(scenario, scenario.mask_seed)?;
    if env.is_done() {
        return Ok((scenario.baseline_objective, Vec::new()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let mut reward = scenario.baseline_objective;
    while !env.is_done() {
        let action = select_action(net, &features(scenario, env.state()), 0.0, &mut rng);
        let out = env.step(action)?;
        if out.terminal {
            reward = out.reward_db;
        }
    }
    Ok((reward, env.assigned_actions().to_vec()))
}

/// Runs episode-driven DQN training on the scenario. One gradient step per
/// environment step once the buffer holds a batch; the target network syncs
/// every `target_update_interval` gradient steps; a greedy evaluation under
/// the fixed mask seed runs every twenty episodes and on the last episode,
/// and the best greedy policy is kept.
pub fn run_training(
    scenario: &Scenario,
    agent: &AgentConfig,
    episodes: usize,
    seed: u64,
) -> Result<TrainingResult> {
    agent.validate()?;
    if episodes == 0 {
        return Err(Error::Config("episodes must be positive".into()));
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut sizes = vec![scenario.state_len()];
    sizes.extend_from_slice(&agent.hidden_layers);
    sizes.push(scenario.actions.action_count());
    let mut net = Mlp::xavier(&sizes, &mut rng)?;
    let mut target = net.clone();
    let mut adam = AdamState::new(&net);
    let mut replay = ReplayBuffer::new(agent.replay_capacity);

    let mut rows = Vec::with_capacity(episodes);
    let mut best: Option<(f64, Vec<usize>, usize)> = None;
    let mut gradient_steps = 0usize;

    for episode in 0..episodes {
        let epsilon = epsilon_at(agent, episode, episodes);
        let mask_seed = match scenario.mask_mode {
            MaskMode::Resample => rng.gen::<u64>(),
            MaskMode::Fixed => scenario.mask_seed,
        };
        let mut env = Env::reset(scenario, mask_seed)?;
        let mut terminal_reward = scenario.baseline_objective;
        let mut losses = Vec::new();

        while !env.is_done() {
            let state = features(scenario, env.state());
            let action = select_action(&net, &state, epsilon, &mut rng);
            let out = env.step(action)?;
            if out.terminal {
                terminal_reward = out.reward_db;
            }
            replay.push(Transition {
                state,
                action,
                reward: out.reward_db,
                next_state: features(scenario, &out.state),
                terminal: out.terminal,
            });
            if replay.len() >= agent.batch_size {
                let batch = replay.sample(agent.batch_size, &mut rng)?;
                losses.push(train_step(&mut net, &target, &mut adam, &batch, agent)?);
                gradient_steps += 1;
                if gradient_steps % agent.target_update_interval == 0 {
                    sync_target(&net, &mut target);
                }
            }
        }

        let mean_loss = if losses.is_empty() {
            0.0
        } else {
            losses.iter().sum::<f64>() / losses.len() as f64
        };
        rows.push(TrainingRow {
            episode,
            epsilon,
            reward_db: terminal_reward,
            mean_loss,
        });

        let due = (episode + 1) % GREEDY_EVAL_INTERVAL == 0 || episode + 1 == episodes;
        if due {
            let (objective, actions) = greedy_rollout(scenario, &net)?;
            let better = match &best {
                Some((b, _, _)) => objective > *b,
                None => true,
            };
            if better {
                best = Some((objective, actions, episode));
            }
        }
    }

    let (best_objective, best_actions, best_episode) =
        best.expect("at least one greedy evaluation runs");
    let mut entries = vec![SuppressionEntry::identity(); scenario.m()];
    for (m, &a) in best_actions.iter().enumerate() {
        entries[m] = scenario.actions.decode(a)?;
    }
    let best_assignment = SuppressionAssignment { entries };
    let final_profile = apply_suppression(
        &scenario.array,
        &scenario.target_profiles,
        &scenario.sidelobe_profiles,
        &best_assignment,
        scenario.mask_seed,
    )?;
    let final_pattern = pattern(&scenario.array, &final_profile, &scenario.grid)?;

    Ok(TrainingResult {
        rows,
        baseline_objective: scenario.baseline_objective,
        best_objective,
        best_assignment,
        best_episode,
        final_profile,
        final_pattern,
        net,
        adam,
    })
}
