//! Desk-scale GRPO training on synthetic tasks with per-task softmax
//! policies.
//!
//! Each task is a tiny bandit: the policy either attempts an answer (which
//! succeeds with the task's latent `p_correct`, or picks one of four MCQ
//! letters) or abstains for a fixed `r_abs`. Groups of `group_size` samples
//! are drawn per task, advantages are normalized group-relative, and the
//! softmax logits take a plain policy-gradient step. Per-task logits keep
//! the abstention threshold analytic: attempting pays `2p - 1` in
//! expectation, so the optimal action flips exactly where `2p - 1 = r_abs`.
//!
//! A group whose rewards are all equal produces exactly zero update, which
//! is what makes the exploration-failure regime reproducible: a policy that
//! never samples the abstain action receives no signal about it.

use crate::core::Violation;
use crate::dataxform::{select_abstain_indices, SftRecord, SftTarget};
use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

/// Action-set shape of a synthetic task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// Two actions: attempt (pays +1 with probability `p_correct`, else -1)
    /// and abstain.
    Bandit,
    /// Five actions: letters A-D (pays +1 only on the designated letter)
    /// and abstain. `p_correct` is ignored.
    Mcq,
}

/// One synthetic task, as stored in task files
/// (`{id, p_correct, mode, correct_letter?}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTask {
    pub id: String,
    pub p_correct: f64,
    pub mode: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct_letter: Option<char>,
}

impl SyntheticTask {
    pub fn bandit(id: impl Into<String>, p_correct: f64) -> Self {
        Self {
            id: id.into(),
            p_correct,
            mode: TaskKind::Bandit,
            correct_letter: None,
        }
    }

    pub fn mcq(id: impl Into<String>, correct_letter: char) -> Self {
        Self {
            id: id.into(),
            p_correct: 0.0,
            mode: TaskKind::Mcq,
            correct_letter: Some(correct_letter),
        }
    }

    pub fn action_count(&self) -> usize {
        match self.mode {
            TaskKind::Bandit => 2,
            TaskKind::Mcq => 5,
        }
    }

    /// The abstain action is always the last one.
    pub fn abstain_index(&self) -> usize {
        self.action_count() - 1
    }

    /// Index of the action an answer-key SFT label maps to. Tasks are
    /// expected to have passed [`validate_tasks`].
    pub fn correct_action_index(&self) -> usize {
        match self.mode {
            TaskKind::Bandit => 0,
            TaskKind::Mcq => self
                .correct_letter
                .map(|c| (c as u8).saturating_sub(b'A') as usize)
                .unwrap_or(0),
        }
    }
}

/// Check task invariants: probabilities in range, MCQ letters designated,
/// ids unique. Violations are data, in input order.
pub fn validate_tasks(tasks: &[SyntheticTask]) -> Vec<Violation> {
    let mut violations = Vec::new();
    let mut seen: HashSet<&str> = HashSet::new();
    for task in tasks {
        if !seen.insert(task.id.as_str()) {
            violations.push(Violation {
                record_id: task.id.clone(),
                message: "duplicate id".to_string(),
            });
        }
        if !task.p_correct.is_finite() || !(0.0..=1.0).contains(&task.p_correct) {
            violations.push(Violation {
                record_id: task.id.clone(),
                message: "p_correct outside [0, 1]".to_string(),
            });
        }
        if task.mode == TaskKind::Mcq
            && !matches!(task.correct_letter, Some('A'..='D'))
        {
            violations.push(Violation {
                record_id: task.id.clone(),
                message: "mcq task requires correct_letter A-D".to_string(),
            });
        }
    }
    violations
}

/// Per-task softmax policy: one logit vector per task, abstain logit last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub logits: Vec<Vec<f64>>,
    pub rng_seed: u64,
}

impl PolicyState {
    /// Uniform over attempt actions, with the abstain action at
    /// `abstain_prob` on every task.
    pub fn with_abstain_prob(tasks: &[SyntheticTask], abstain_prob: f64, rng_seed: u64) -> Self {
        let p = abstain_prob.clamp(1e-12, 1.0 - 1e-12);
        let logits = tasks
            .iter()
            .map(|task| {
                let attempts = (task.action_count() - 1) as f64;
                let mut row = vec![0.0; task.action_count()];
                // softmax([0,..,0,x]) puts p on the last action when
                // x = ln(p * attempts / (1 - p)).
                row[task.action_count() - 1] = (p * attempts / (1.0 - p)).ln();
                row
            })
            .collect();
        Self { logits, rng_seed }
    }

    /// Action probabilities for one task: `softmax(logits)`.
    pub fn probabilities(&self, task_idx: usize) -> Vec<f64> {
        softmax(&self.logits[task_idx])
    }

    /// Probability of the abstain (last) action for one task.
    pub fn abstain_probability(&self, task_idx: usize) -> f64 {
        *self.probabilities(task_idx).last().expect("non-empty action set")
    }
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Simulator configuration.
///
/// `initial_abstain_prob` seeds the starting policy built by
/// [`run_training`]; drive it toward zero to reproduce the
/// exploration-failure regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub group_size: usize,
    pub learning_rate: f64,
    pub steps: usize,
    pub r_abs: f64,
    pub epsilon_std: f64,
    pub kl_beta: f64,
    pub sft_steps: usize,
    pub sft_ratio: f64,
    pub initial_abstain_prob: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            group_size: 8,
            learning_rate: 0.1,
            steps: 500,
            r_abs: -0.25,
            epsilon_std: 1e-8,
            kl_beta: 0.0,
            sft_steps: 0,
            sft_ratio: 0.3,
            initial_abstain_prob: 0.3,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::InvalidConfig(
                "group_size must be at least 2 (group-relative baseline undefined otherwise)"
                    .to_string(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning_rate must be > 0".to_string()));
        }
        if !(self.epsilon_std > 0.0) {
            return Err(Error::InvalidConfig("epsilon_std must be > 0".to_string()));
        }
        if self.kl_beta < 0.0 {
            return Err(Error::InvalidConfig("kl_beta must be >= 0".to_string()));
        }
        if !(0.0..=1.0).contains(&self.sft_ratio) {
            return Err(Error::InvalidConfig("sft_ratio must be in [0, 1]".to_string()));
        }
        if !(0.0..1.0).contains(&self.initial_abstain_prob) {
            return Err(Error::InvalidConfig(
                "initial_abstain_prob must be in [0, 1)".to_string(),
            ));
        }
        if !self.r_abs.is_finite() {
            return Err(Error::NonFiniteRabs(self.r_abs));
        }
        Ok(())
    }
}

/// Draw `group_size` i.i.d. (action, reward) samples for one task.
///
/// Rewards follow the ternary scheme with `r_correct = 1`, `r_wrong = -1`:
/// abstain pays `r_abs`; an attempt pays +1 with probability `p_correct`
/// (bandit) or +1 exactly on the designated letter (MCQ), else -1.
pub fn sample_group(
    policy: &PolicyState,
    task: &SyntheticTask,
    task_idx: usize,
    config: &SimConfig,
    rng: &mut impl Rng,
) -> Vec<(usize, f64)> {
    let probs = policy.probabilities(task_idx);
    let abstain = task.abstain_index();
    (0..config.group_size)
        .map(|_| {
            let action = sample_index(&probs, rng);
            let reward = if action == abstain {
                config.r_abs
            } else {
                let correct = match task.mode {
                    TaskKind::Bandit => rng.random::<f64>() < task.p_correct,
                    TaskKind::Mcq => action == task.correct_action_index(),
                };
                if correct {
                    1.0
                } else {
                    -1.0
                }
            };
            (action, reward)
        })
        .collect()
}

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let draw = rng.random::<f64>();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Group-relative advantages: `(r_i - mean) / (std + epsilon_std)` with the
/// population standard deviation. A zero-variance group yields exact zeros.
pub fn group_advantages(rewards: &[f64], epsilon_std: f64) -> Vec<f64> {
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let variance = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = variance.sqrt() + epsilon_std;
    rewards.iter().map(|r| (r - mean) / denom).collect()
}

/// One policy-gradient step on a task's logits from advantage-weighted
/// samples:
///
/// `logits += lr * mean_i[a_i * (onehot(action_i) - softmax(logits))]`,
/// minus `lr * kl_beta * (softmax(logits) - softmax(reference))` when a
/// reference policy anchors the update.
pub fn policy_update(
    policy: &mut PolicyState,
    task_idx: usize,
    samples: &[(usize, f64)],
    reference: Option<&PolicyState>,
    config: &SimConfig,
) {
    if samples.is_empty() {
        return;
    }
    let probs = softmax(&policy.logits[task_idx]);
    let n_actions = probs.len();
    let inv_n = 1.0 / samples.len() as f64;

    let mut grad = vec![0.0; n_actions];
    let mut advantage_sum = 0.0;
    for &(action, advantage) in samples {
        grad[action] += advantage;
        advantage_sum += advantage;
    }
    let logits = &mut policy.logits[task_idx];
    for k in 0..n_actions {
        let g = (grad[k] - advantage_sum * probs[k]) * inv_n;
        logits[k] += config.learning_rate * g;
    }

    if config.kl_beta > 0.0 {
        if let Some(reference) = reference {
            let ref_probs = softmax(&reference.logits[task_idx]);
            let logits = &mut policy.logits[task_idx];
            for k in 0..n_actions {
                logits[k] -= config.learning_rate * config.kl_beta * (probs[k] - ref_probs[k]);
            }
        }
    }
}

/// Resolve SFT records onto (task index, labeled action index) pairs.
pub fn map_sft_labels(
    records: &[SftRecord],
    tasks: &[SyntheticTask],
) -> Result<Vec<(usize, usize)>> {
    let by_id: HashMap<&str, usize> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();
    records
        .iter()
        .map(|record| {
            let &idx = by_id
                .get(record.question_id.as_str())
                .ok_or_else(|| Error::UnknownTaskId(record.question_id.clone()))?;
            let action = match record.target {
                SftTarget::Abstain => tasks[idx].abstain_index(),
                SftTarget::AnswerKey => tasks[idx].correct_action_index(),
            };
            Ok((idx, action))
        })
        .collect()
}

/// Gradient ascent on the mean log-probability of each labeled action.
/// With at least one step, every labeled action's probability strictly
/// increases (unless already saturated).
pub fn sft_pretrain(
    policy: &mut PolicyState,
    labels: &[(usize, usize)],
    sft_steps: usize,
    learning_rate: f64,
) {
    for _ in 0..sft_steps {
        for &(task_idx, action) in labels {
            let probs = softmax(&policy.logits[task_idx]);
            let logits = &mut policy.logits[task_idx];
            for (k, &p) in probs.iter().enumerate() {
                let onehot = if k == action { 1.0 } else { 0.0 };
                logits[k] += learning_rate * (onehot - p);
            }
        }
    }
}

/// What the ternary reward makes optimal for a bandit task: attempting pays
/// `2p - 1` in expectation, abstaining pays `r_abs`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleAction {
    Attempt,
    Abstain,
    Indifferent,
}

pub fn optimal_action_oracle(p_correct: f64, r_abs: f64) -> OracleAction {
    let attempt_value = 2.0 * p_correct - 1.0;
    if attempt_value < r_abs {
        OracleAction::Abstain
    } else if attempt_value > r_abs {
        OracleAction::Attempt
    } else {
        OracleAction::Indifferent
    }
}

/// Final response distribution of a policy, in percent. The three fractions
/// sum to 100 up to floating-point rounding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Fractions {
    pub correct_pct: f64,
    pub incorrect_pct: f64,
    pub idk_pct: f64,
}

impl Fractions {
    /// Mean ternary reward implied by the distribution.
    pub fn mean_reward(&self, r_abs: f64) -> f64 {
        (self.correct_pct - self.incorrect_pct + self.idk_pct * r_abs) / 100.0
    }
}

/// One training-step log entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub mean_reward: f64,
    pub idk_fraction: f64,
}

/// Outcome of one training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingResult {
    pub final_fractions: Fractions,
    pub per_step_log: Vec<StepLog>,
    pub final_policy: PolicyState,
}

/// Train from the default initial policy (`initial_abstain_prob`, uniform
/// over attempts): optional SFT warm-up, then `steps` GRPO iterations over
/// all tasks, then a 1000-rollout-per-task evaluation. Deterministic in
/// (config, tasks, seed).
pub fn run_training(tasks: &[SyntheticTask], config: &SimConfig) -> Result<TrainingResult> {
    config.validate()?;
    let initial = PolicyState::with_abstain_prob(tasks, config.initial_abstain_prob, config.seed);
    run_training_from(initial, tasks, config)
}

/// Same as [`run_training`] but starting from a caller-built policy.
pub fn run_training_from(
    initial: PolicyState,
    tasks: &[SyntheticTask],
    config: &SimConfig,
) -> Result<TrainingResult> {
    config.validate()?;
    if tasks.is_empty() {
        return Err(Error::InvalidConfig("task set is empty".to_string()));
    }
    if initial.logits.len() != tasks.len() {
        return Err(Error::InvalidConfig(format!(
            "policy covers {} tasks but {} were given",
            initial.logits.len(),
            tasks.len()
        )));
    }

    let mut policy = initial;
    // The pre-SFT policy anchors the KL term.
    let reference = if config.kl_beta > 0.0 {
        Some(policy.clone())
    } else {
        None
    };

    let mut train_rng = stream_rng(config.seed, 0);

    if config.sft_steps > 0 {
        let mut label_rng = stream_rng(config.seed, 1);
        let abstain = select_abstain_indices(tasks.len(), config.sft_ratio, &mut label_rng);
        let labels: Vec<(usize, usize)> = tasks
            .iter()
            .enumerate()
            .map(|(i, task)| {
                let action = if abstain.contains(&i) {
                    task.abstain_index()
                } else {
                    task.correct_action_index()
                };
                (i, action)
            })
            .collect();
        sft_pretrain(&mut policy, &labels, config.sft_steps, config.learning_rate);
    }

    let mut per_step_log = Vec::with_capacity(config.steps);
    for step in 1..=config.steps {
        let mut reward_sum = 0.0;
        let mut abstain_count = 0usize;
        let mut sample_count = 0usize;
        for (idx, task) in tasks.iter().enumerate() {
            let group = sample_group(&policy, task, idx, config, &mut train_rng);
            let rewards: Vec<f64> = group.iter().map(|&(_, r)| r).collect();
            let advantages = group_advantages(&rewards, config.epsilon_std);
            let samples: Vec<(usize, f64)> = group
                .iter()
                .zip(advantages.iter())
                .map(|(&(action, _), &a)| (action, a))
                .collect();
            policy_update(&mut policy, idx, &samples, reference.as_ref(), config);

            reward_sum += rewards.iter().sum::<f64>();
            abstain_count += group
                .iter()
                .filter(|&&(action, _)| action == task.abstain_index())
                .count();
            sample_count += group.len();
        }
        per_step_log.push(StepLog {
            step,
            mean_reward: reward_sum / sample_count as f64,
            idk_fraction: abstain_count as f64 / sample_count as f64,
        });
    }

    let mut eval_rng = stream_rng(config.seed, 2);
    let final_fractions = evaluate_monte_carlo(&policy, tasks, 1000, &mut eval_rng);

    Ok(TrainingResult {
        final_fractions,
        per_step_log,
        final_policy: policy,
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Estimate the response distribution with fresh rollouts per task.
pub fn evaluate_monte_carlo(
    policy: &PolicyState,
    tasks: &[SyntheticTask],
    rollouts_per_task: usize,
    rng: &mut impl Rng,
) -> Fractions {
    let mut correct = 0usize;
    let mut incorrect = 0usize;
    let mut idk = 0usize;
    for (idx, task) in tasks.iter().enumerate() {
        let probs = policy.probabilities(idx);
        for _ in 0..rollouts_per_task {
            let action = sample_index(&probs, rng);
            if action == task.abstain_index() {
                idk += 1;
            } else {
                let hit = match task.mode {
                    TaskKind::Bandit => rng.random::<f64>() < task.p_correct,
                    TaskKind::Mcq => action == task.correct_action_index(),
                };
                if hit {
                    correct += 1;
                } else {
                    incorrect += 1;
                }
            }
        }
    }
    let total = (correct + incorrect + idk) as f64;
    Fractions {
        correct_pct: 100.0 * correct as f64 / total,
        incorrect_pct: 100.0 * incorrect as f64 / total,
        idk_pct: 100.0 * idk as f64 / total,
    }
}

/// Exact-expectation counterpart of [`evaluate_monte_carlo`], for tests.
pub fn evaluate_exact(policy: &PolicyState, tasks: &[SyntheticTask]) -> Fractions {
    let mut correct = 0.0;
    let mut incorrect = 0.0;
    let mut idk = 0.0;
    for (idx, task) in tasks.iter().enumerate() {
        let probs = policy.probabilities(idx);
        let p_abs = probs[task.abstain_index()];
        let p_correct = match task.mode {
            TaskKind::Bandit => probs[0] * task.p_correct,
            TaskKind::Mcq => probs[task.correct_action_index()],
        };
        idk += p_abs;
        correct += p_correct;
        incorrect += 1.0 - p_abs - p_correct;
    }
    let n = tasks.len() as f64;
    Fractions {
        correct_pct: 100.0 * correct / n,
        incorrect_pct: 100.0 * incorrect / n,
        idk_pct: 100.0 * idk / n,
    }
}

/// One independent training run per `r_abs` value, each with a fresh
/// seed-derived stream; results keep input order, so duplicate values with
/// the same seed produce identical results.
pub fn sweep_rabs(
    tasks: &[SyntheticTask],
    base_config: &SimConfig,
    r_abs_values: &[f64],
) -> Result<Vec<(f64, TrainingResult)>> {
    for &v in r_abs_values {
        if !v.is_finite() {
            return Err(Error::NonFiniteRabs(v));
        }
    }
    r_abs_values
        .iter()
        .map(|&r_abs| {
            let config = SimConfig {
                r_abs,
                ..base_config.clone()
            };
            run_training(tasks, &config).map(|result| (r_abs, result))
        })
        .collect()
}
