//! Learning policies and the pieces they are built from.
//!
//! Every policy sees only its own BSS: the σ it obtained last iteration,
//! its own last action and, for the heuristic, the per-channel occupancy it
//! sensed. Nothing is shared between agents.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::spectrum::{Action, ActionSpace};

/// Throughput satisfaction σ = clip(Γ/ℓ, 0, 1).
pub fn reward(throughput_mbps: f64, load_mbps: f64) -> Result<f64> {
    if !(load_mbps > 0.0) {
        return Err(Error::validation(format!("load must be positive, got {load_mbps}")));
    }
    if throughput_mbps.is_nan() {
        return Err(Error::validation("throughput is NaN"));
    }
    Ok((throughput_mbps / load_mbps).clamp(0.0, 1.0))
}

/// Exploration rate ε₀/√t for iteration `t` (1-based).
pub fn epsilon(t: u64, epsilon0: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::validation("iterations are counted from 1"));
    }
    Ok(epsilon0 / (t as f64).sqrt())
}

/// How to choose among arms sharing the maximal estimate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TieBreak {
    #[default]
    Random,
    /// Lowest index wins. Handy for hand-checked tests.
    First,
}

/// Indices holding the maximum of `values`.
pub fn argmax_set(values: &[f64]) -> Vec<usize> {
    let best = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (0..values.len()).filter(|&i| values[i] == best).collect()
}

/// ε-greedy over arbitrary estimates.
///
/// Draw order is fixed (one uniform for the coin, then one index draw for
/// either the exploration or a tie) so that policies built on this function
/// consume identical random streams.
pub fn epsilon_greedy<R: Rng + ?Sized>(values: &[f64], eps: f64, tie: TieBreak, rng: &mut R) -> usize {
    assert!(!values.is_empty(), "no arms");
    if rng.gen::<f64>() < eps {
        return rng.gen_range(0..values.len());
    }
    let best = argmax_set(values);
    match tie {
        TieBreak::First => best[0],
        TieBreak::Random if best.len() == 1 => best[0],
        TieBreak::Random => best[rng.gen_range(0..best.len())],
    }
}

/// Pull counts and running mean rewards of a bandit.
#[derive(Clone, Debug, PartialEq)]
pub struct ArmStats {
    counts: Vec<u64>,
    means: Vec<f64>,
}

impl ArmStats {
    /// Unpulled arms start with mean 0.
    pub fn new(n_arms: usize) -> Self {
        ArmStats {
            counts: vec![0; n_arms],
            means: vec![0.0; n_arms],
        }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn count(&self, arm: usize) -> u64 {
        self.counts[arm]
    }

    pub fn mean(&self, arm: usize) -> f64 {
        self.means[arm]
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Overwrites the estimates; counts are left alone.
    pub fn set_means(&mut self, means: Vec<f64>) {
        assert_eq!(means.len(), self.means.len());
        self.means = means;
    }
}

pub fn egreedy_select<R: Rng + ?Sized>(stats: &ArmStats, eps: f64, tie: TieBreak, rng: &mut R) -> usize {
    epsilon_greedy(&stats.means, eps, tie, rng)
}

pub fn egreedy_update(stats: &mut ArmStats, arm: usize, r: f64) {
    stats.counts[arm] += 1;
    let n = stats.counts[arm] as f64;
    stats.means[arm] += (r - stats.means[arm]) / n;
}

/// Context families for the stateful learners.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ContextSpace {
    /// Satisfied or not.
    Binary,
    /// Satisfaction crossed with the last action taken.
    Combined,
}

impl ContextSpace {
    pub fn size(self, space: &ActionSpace) -> usize {
        match self {
            ContextSpace::Binary => 2,
            ContextSpace::Combined => 2 * space.len(),
        }
    }

    pub fn context(self, sigma: f64, threshold: f64, last: Action, space: &ActionSpace) -> Result<usize> {
        match self {
            ContextSpace::Binary => Ok(context_binary(sigma, threshold)),
            ContextSpace::Combined => context_combined(sigma, threshold, last, space.n_channels()),
        }
    }
}

/// 1 when satisfied (σ ≥ threshold), else 0.
pub fn context_binary(sigma: f64, threshold: f64) -> usize {
    usize::from(sigma >= threshold)
}

/// sat·|A| + index(last).
pub fn context_combined(sigma: f64, threshold: f64, last: Action, n_channels: usize) -> Result<usize> {
    let space = ActionSpace::new(n_channels)?;
    Ok(context_binary(sigma, threshold) * space.len() + space.index(last)?)
}

/// Which counter drives ε in a contextual bandit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum EpsilonClock {
    /// Visits to the current context.
    #[default]
    PerContext,
    /// Iterations overall.
    Global,
}

/// One independent ε-greedy bandit per context.
#[derive(Clone, Debug)]
pub struct ContextualBandit {
    arms: Vec<ArmStats>,
    visits: Vec<u64>,
    steps: u64,
    epsilon0: f64,
    clock: EpsilonClock,
    tie: TieBreak,
}

impl ContextualBandit {
    pub fn new(n_contexts: usize, n_arms: usize, epsilon0: f64, clock: EpsilonClock, tie: TieBreak) -> Self {
        ContextualBandit {
            arms: vec![ArmStats::new(n_arms); n_contexts],
            visits: vec![0; n_contexts],
            steps: 0,
            epsilon0,
            clock,
            tie,
        }
    }

    pub fn n_contexts(&self) -> usize {
        self.arms.len()
    }

    pub fn stats(&self, ctx: usize) -> &ArmStats {
        &self.arms[ctx]
    }

    pub fn visits(&self, ctx: usize) -> u64 {
        self.visits[ctx]
    }

    /// Picks an arm in `ctx`, ticking its clock. Returns the arm and the ε used.
    pub fn select<R: Rng + ?Sized>(&mut self, ctx: usize, rng: &mut R) -> Result<(usize, f64)> {
        if ctx >= self.arms.len() {
            return Err(Error::validation(format!("context {ctx} out of range")));
        }
        self.visits[ctx] += 1;
        self.steps += 1;
        let t = match self.clock {
            EpsilonClock::PerContext => self.visits[ctx],
            EpsilonClock::Global => self.steps,
        };
        let eps = epsilon(t, self.epsilon0)?;
        Ok((egreedy_select(&self.arms[ctx], eps, self.tie, rng), eps))
    }

    pub fn update(&mut self, ctx: usize, arm: usize, r: f64) {
        egreedy_update(&mut self.arms[ctx], arm, r);
    }
}

/// Tabular action values.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    pub alpha: f64,
    pub gamma: f64,
}

impl QTable {
    /// All-zero table.
    pub fn new(n_states: usize, n_actions: usize, alpha: f64, gamma: f64) -> Self {
        QTable {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
            alpha,
            gamma,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    fn check(&self, s: usize, a: usize) -> Result<()> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::validation(format!(
                "(state {s}, action {a}) outside a {}x{} table",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}

/// Q(s,a) += α·(r + γ·max Q(s',·) − Q(s,a)).
pub fn qlearning_update(q: &mut QTable, s: usize, a: usize, r: f64, s_next: usize) -> Result<()> {
    q.check(s, a)?;
    q.check(s_next, 0)?;
    let target = r + q.gamma * q.max(s_next);
    let old = q.get(s, a);
    q.set(s, a, old + q.alpha * (target - old));
    Ok(())
}

pub fn qlearning_select<R: Rng + ?Sized>(q: &QTable, s: usize, eps: f64, tie: TieBreak, rng: &mut R) -> Result<usize> {
    q.check(s, 0)?;
    Ok(epsilon_greedy(q.row(s), eps, tie, rng))
}

/// Keep the action while satisfied; otherwise move the primary to one of the
/// least occupied channels, preferring a channel other than the current one.
pub fn heuristic_select<R: Rng + ?Sized>(
    occupancy: &[f64],
    current: Action,
    satisfied: bool,
    rng: &mut R,
) -> Result<Action> {
    current.validate(occupancy.len())?;
    if satisfied {
        return Ok(current);
    }
    let others: Vec<usize> = (1..=occupancy.len()).filter(|&p| p != current.primary).collect();
    let pool = if others.is_empty() { vec![current.primary] } else { others };
    let least = pool.iter().map(|&p| occupancy[p - 1]).fold(f64::INFINITY, f64::min);
    let best: Vec<usize> = pool.into_iter().filter(|&p| occupancy[p - 1] == least).collect();
    let primary = best[rng.gen_range(0..best.len())];
    Ok(Action::new(primary, current.max_bandwidth))
}

pub fn static_select(fixed: Action) -> Action {
    fixed
}

/// Algorithm selectors accepted on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algo {
    EGreedy,
    CtxEGreedy(ContextSpace),
    QLearning(ContextSpace),
    Heuristic,
    Static,
}

impl Algo {
    pub const ALL: [Algo; 7] = [
        Algo::EGreedy,
        Algo::CtxEGreedy(ContextSpace::Binary),
        Algo::CtxEGreedy(ContextSpace::Combined),
        Algo::QLearning(ContextSpace::Binary),
        Algo::QLearning(ContextSpace::Combined),
        Algo::Heuristic,
        Algo::Static,
    ];

    pub fn needs_occupancy(self) -> bool {
        self == Algo::Heuristic
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Algo::EGreedy => "egreedy",
            Algo::CtxEGreedy(ContextSpace::Binary) => "ctx-egreedy-2",
            Algo::CtxEGreedy(ContextSpace::Combined) => "ctx-egreedy-24",
            Algo::QLearning(ContextSpace::Binary) => "qlearning-2",
            Algo::QLearning(ContextSpace::Combined) => "qlearning-24",
            Algo::Heuristic => "heuristic",
            Algo::Static => "static",
        };
        f.write_str(s)
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.to_string() == s)
            .ok_or_else(|| {
                let names: Vec<String> = Algo::ALL.iter().map(|a| a.to_string()).collect();
                Error::validation(format!("unknown algorithm '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

/// Tunables shared by every learner.
#[derive(Clone, Debug, PartialEq)]
pub struct Hyper {
    pub epsilon0: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub sat_threshold: f64,
    pub tie: TieBreak,
    pub clock: EpsilonClock,
    /// Action of the `static` baseline; defaults to primary 1 with the whole band.
    pub static_action: Option<Action>,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            epsilon0: 1.0,
            alpha: 0.8,
            gamma: 0.2,
            sat_threshold: 0.99,
            tie: TieBreak::Random,
            clock: EpsilonClock::PerContext,
            static_action: None,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon0 > 0.0 && self.epsilon0 <= 1.0) {
            return Err(Error::validation(format!("epsilon0 must be in (0, 1], got {}", self.epsilon0)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::validation(format!("alpha must be in [0, 1], got {}", self.alpha)));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::validation(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.sat_threshold > 0.0 && self.sat_threshold <= 1.0) {
            return Err(Error::validation(format!(
                "sat_threshold must be in (0, 1], got {}",
                self.sat_threshold
            )));
        }
        Ok(())
    }
}

/// What a policy chose this iteration, plus what to log about it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Decision {
    pub action: Action,
    pub epsilon: f64,
    pub context: usize,
}

/// What a policy learns after an iteration.
#[derive(Clone, Copy, Debug)]
pub struct Feedback<'a> {
    pub sigma: f64,
    /// Per-channel busy fraction, only present when the environment can sense.
    pub occupancy: Option<&'a [f64]>,
}

/// A per-BSS decision maker. `select` and `update` alternate, starting at t = 1.
pub trait Policy: Send {
    fn select(&mut self, t: u64, rng: &mut dyn RngCore) -> Result<Decision>;
    fn update(&mut self, fb: &Feedback<'_>) -> Result<()>;
}

/// Before the first observation an agent counts as unsatisfied with action 0.
struct History {
    space: ActionSpace,
    last_sigma: f64,
    last_arm: usize,
}

impl History {
    fn new(space: ActionSpace) -> Self {
        History {
            space,
            last_sigma: 0.0,
            last_arm: 0,
        }
    }

    fn context(&self, cs: ContextSpace, threshold: f64) -> usize {
        match cs {
            ContextSpace::Binary => context_binary(self.last_sigma, threshold),
            ContextSpace::Combined => context_binary(self.last_sigma, threshold) * self.space.len() + self.last_arm,
        }
    }
}

pub struct EGreedyPolicy {
    space: ActionSpace,
    stats: ArmStats,
    epsilon0: f64,
    tie: TieBreak,
    pending: Option<usize>,
}

impl EGreedyPolicy {
    pub fn new(space: ActionSpace, hyper: &Hyper) -> Self {
        EGreedyPolicy {
            space,
            stats: ArmStats::new(space.len()),
            epsilon0: hyper.epsilon0,
            tie: hyper.tie,
            pending: None,
        }
    }

    pub fn stats(&self) -> &ArmStats {
        &self.stats
    }
}

impl Policy for EGreedyPolicy {
    fn select(&mut self, t: u64, rng: &mut dyn RngCore) -> Result<Decision> {
        let eps = epsilon(t, self.epsilon0)?;
        let arm = egreedy_select(&self.stats, eps, self.tie, rng);
        self.pending = Some(arm);
        Ok(Decision {
            action: self.space.action(arm)?,
            epsilon: eps,
            context: 0,
        })
    }

    fn update(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let arm = self.pending.take().ok_or_else(|| Error::validation("update before select"))?;
        egreedy_update(&mut self.stats, arm, fb.sigma);
        Ok(())
    }
}

pub struct ContextualPolicy {
    cs: ContextSpace,
    threshold: f64,
    bandit: ContextualBandit,
    history: History,
    pending: Option<(usize, usize)>,
}

impl ContextualPolicy {
    pub fn new(space: ActionSpace, cs: ContextSpace, hyper: &Hyper) -> Self {
        ContextualPolicy {
            cs,
            threshold: hyper.sat_threshold,
            bandit: ContextualBandit::new(cs.size(&space), space.len(), hyper.epsilon0, hyper.clock, hyper.tie),
            history: History::new(space),
            pending: None,
        }
    }

    pub fn bandit(&self) -> &ContextualBandit {
        &self.bandit
    }
}

impl Policy for ContextualPolicy {
    fn select(&mut self, _t: u64, rng: &mut dyn RngCore) -> Result<Decision> {
        let ctx = self.history.context(self.cs, self.threshold);
        let (arm, eps) = self.bandit.select(ctx, rng)?;
        self.pending = Some((ctx, arm));
        Ok(Decision {
            action: self.history.space.action(arm)?,
            epsilon: eps,
            context: ctx,
        })
    }

    fn update(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let (ctx, arm) = self.pending.take().ok_or_else(|| Error::validation("update before select"))?;
        self.bandit.update(ctx, arm, fb.sigma);
        self.history.last_sigma = fb.sigma;
        self.history.last_arm = arm;
        Ok(())
    }
}

pub struct QLearningPolicy {
    cs: ContextSpace,
    threshold: f64,
    epsilon0: f64,
    tie: TieBreak,
    q: QTable,
    history: History,
    pending: Option<(usize, usize)>,
}

impl QLearningPolicy {
    pub fn new(space: ActionSpace, cs: ContextSpace, hyper: &Hyper) -> Self {
        QLearningPolicy {
            cs,
            threshold: hyper.sat_threshold,
            epsilon0: hyper.epsilon0,
            tie: hyper.tie,
            q: QTable::new(cs.size(&space), space.len(), hyper.alpha, hyper.gamma),
            history: History::new(space),
            pending: None,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.q
    }
}

impl Policy for QLearningPolicy {
    fn select(&mut self, t: u64, rng: &mut dyn RngCore) -> Result<Decision> {
        let s = self.history.context(self.cs, self.threshold);
        let eps = epsilon(t, self.epsilon0)?;
        let arm = qlearning_select(&self.q, s, eps, self.tie, rng)?;
        self.pending = Some((s, arm));
        Ok(Decision {
            action: self.history.space.action(arm)?,
            epsilon: eps,
            context: s,
        })
    }

    fn update(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let (s, arm) = self.pending.take().ok_or_else(|| Error::validation("update before select"))?;
        self.history.last_sigma = fb.sigma;
        self.history.last_arm = arm;
        let s_next = self.history.context(self.cs, self.threshold);
        qlearning_update(&mut self.q, s, arm, fb.sigma, s_next)
    }
}

/// Starts from a random action, then reacts to the occupancy it senses.
pub struct HeuristicPolicy {
    space: ActionSpace,
    threshold: f64,
    current: Option<Action>,
    last: Option<(f64, Vec<f64>)>,
}

impl HeuristicPolicy {
    pub fn new(space: ActionSpace, hyper: &Hyper) -> Self {
        HeuristicPolicy {
            space,
            threshold: hyper.sat_threshold,
            current: None,
            last: None,
        }
    }
}

impl Policy for HeuristicPolicy {
    fn select(&mut self, _t: u64, rng: &mut dyn RngCore) -> Result<Decision> {
        let action = match (self.current, &self.last) {
            (Some(cur), Some((sigma, occ))) => heuristic_select(occ, cur, *sigma >= self.threshold, rng)?,
            _ => self.space.action(rng.gen_range(0..self.space.len()))?,
        };
        self.current = Some(action);
        let context = self.last.as_ref().map_or(0, |(s, _)| context_binary(*s, self.threshold));
        Ok(Decision {
            action,
            epsilon: 0.0,
            context,
        })
    }

    fn update(&mut self, fb: &Feedback<'_>) -> Result<()> {
        let occ = fb.occupancy.ok_or_else(|| {
            Error::Unsupported("the heuristic agent needs channel occupancy, which only live mode provides".into())
        })?;
        self.last = Some((fb.sigma, occ.to_vec()));
        Ok(())
    }
}

pub struct StaticPolicy {
    action: Action,
}

impl Policy for StaticPolicy {
    fn select(&mut self, _t: u64, _rng: &mut dyn RngCore) -> Result<Decision> {
        Ok(Decision {
            action: static_select(self.action),
            epsilon: 0.0,
            context: 0,
        })
    }

    fn update(&mut self, _fb: &Feedback<'_>) -> Result<()> {
        Ok(())
    }
}

/// Builds a fresh policy for one BSS.
pub fn build_policy(algo: Algo, space: ActionSpace, hyper: &Hyper) -> Result<Box<dyn Policy>> {
    hyper.validate()?;
    Ok(match algo {
        Algo::EGreedy => Box::new(EGreedyPolicy::new(space, hyper)),
        Algo::CtxEGreedy(cs) => Box::new(ContextualPolicy::new(space, cs, hyper)),
        Algo::QLearning(cs) => Box::new(QLearningPolicy::new(space, cs, hyper)),
        Algo::Heuristic => Box::new(HeuristicPolicy::new(space, hyper)),
        Algo::Static => {
            let action = hyper
                .static_action
                .unwrap_or_else(|| Action::new(1, space.n_channels()));
            action.validate(space.n_channels())?;
            Box::new(StaticPolicy { action })
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn space4() -> ActionSpace {
        ActionSpace::new(4).unwrap()
    }

    #[test]
    fn reward_examples() {
        assert_eq!(reward(50.0, 50.0).unwrap(), 1.0);
        assert_eq!(reward(25.0, 50.0).unwrap(), 0.5);
        assert_eq!(reward(50.3, 50.0).unwrap(), 1.0);
        assert_eq!(reward(0.0, 50.0).unwrap(), 0.0);
        assert!(reward(1.0, 0.0).is_err());
        assert!(reward(1.0, -3.0).is_err());
    }

    #[test]
    fn epsilon_examples() {
        assert_eq!(epsilon(1, 1.0).unwrap(), 1.0);
        assert_eq!(epsilon(4, 1.0).unwrap(), 0.5);
        assert_eq!(epsilon(25, 1.0).unwrap(), 0.2);
        assert!(epsilon(0, 1.0).is_err());
    }

    #[test]
    fn epsilon_strictly_decreasing() {
        let mut prev = epsilon(1, 1.0).unwrap();
        for t in 2..10_000 {
            let e = epsilon(t, 1.0).unwrap();
            assert!(e < prev && e > 0.0);
            prev = e;
        }
        assert!(prev < 0.011);
    }

    #[test]
    fn forced_exploration_is_uniform() {
        let stats = ArmStats::new(12);
        let mut r = rng(1);
        let mut hist = [0u32; 12];
        let n = 12_000;
        for _ in 0..n {
            hist[egreedy_select(&stats, 1.0, TieBreak::Random, &mut r)] += 1;
        }
        let expected = n as f64 / 12.0;
        let chi2: f64 = hist.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
        // 11 degrees of freedom, 0.999 quantile.
        assert!(chi2 < 31.26, "chi2 {chi2}, hist {hist:?}");
    }

    #[test]
    fn greedy_picks_best() {
        let mut stats = ArmStats::new(12);
        stats.set_means((0..12).map(|i| if i == 7 { 0.9 } else { 0.1 }).collect());
        let mut r = rng(2);
        for _ in 0..100 {
            assert_eq!(egreedy_select(&stats, 0.0, TieBreak::Random, &mut r), 7);
        }
    }

    #[test]
    fn ties_split_evenly() {
        let mut stats = ArmStats::new(12);
        let mut means = vec![0.2; 12];
        means[3] = 0.8;
        means[9] = 0.8;
        stats.set_means(means);
        let mut r = rng(3);
        let n = 10_000;
        let threes = (0..n)
            .filter(|_| egreedy_select(&stats, 0.0, TieBreak::Random, &mut r) == 3)
            .count();
        // Binomial(10000, 0.5) has sd 50; allow 5 sd.
        assert!((threes as i64 - 5000).abs() < 250, "{threes}");
        assert_eq!(egreedy_select(&stats, 0.0, TieBreak::First, &mut r), 3);
    }

    #[test]
    fn incremental_mean_examples() {
        let mut s = ArmStats::new(2);
        egreedy_update(&mut s, 0, 0.5);
        egreedy_update(&mut s, 0, 1.0);
        assert_eq!(s.mean(0), 0.75);
        egreedy_update(&mut s, 1, 0.3);
        assert_eq!(s.mean(1), 0.3);
        let mut s = ArmStats::new(1);
        for _ in 0..1000 {
            egreedy_update(&mut s, 0, 1.0);
        }
        assert_eq!(s.mean(0), 1.0);
        assert_eq!(s.count(0), 1000);
    }

    #[test]
    fn context_examples() {
        assert_eq!(context_binary(1.0, 0.99), 1);
        assert_eq!(context_binary(0.5, 0.99), 0);
        assert_eq!(context_binary(0.99, 0.99), 1);
        let sp = space4();
        let a6 = sp.action(6).unwrap();
        assert_eq!(context_combined(1.0, 0.99, a6, 4).unwrap(), 18);
        assert_eq!(context_combined(0.0, 0.99, sp.action(0).unwrap(), 4).unwrap(), 0);
        let mut seen = std::collections::BTreeSet::new();
        for sigma in [0.0, 1.0] {
            for a in sp.actions() {
                seen.insert(context_combined(sigma, 0.99, a, 4).unwrap());
            }
        }
        assert_eq!(seen, (0..24).collect());
        assert_eq!(ContextSpace::Combined.size(&sp), 24);
        assert_eq!(ContextSpace::Binary.size(&sp), 2);
    }

    #[test]
    fn qlearning_examples() {
        let mut q = QTable::new(2, 12, 0.8, 0.2);
        qlearning_update(&mut q, 0, 5, 0.5, 1).unwrap();
        assert!((q.get(0, 5) - 0.4).abs() < 1e-15);
        // Make max Q(s',·) = 0.4 with Q(s,a) = 0.4.
        q.set(1, 2, 0.4);
        qlearning_update(&mut q, 0, 5, 1.0, 1).unwrap();
        assert!((q.get(0, 5) - 0.944).abs() < 1e-12, "{}", q.get(0, 5));

        let mut frozen = QTable::new(2, 12, 0.0, 0.2);
        frozen.set(1, 1, 0.3);
        let before = frozen.clone();
        qlearning_update(&mut frozen, 0, 4, 1.0, 1).unwrap();
        assert_eq!(frozen, before);

        assert!(qlearning_update(&mut q, 2, 0, 1.0, 0).is_err());
        assert!(qlearning_update(&mut q, 0, 12, 1.0, 0).is_err());
    }

    #[test]
    fn qlearning_select_examples() {
        let mut q = QTable::new(1, 12, 0.8, 0.2);
        let mut r = rng(4);
        let mut hist = [0u32; 12];
        for _ in 0..12_000 {
            hist[qlearning_select(&q, 0, 0.0, TieBreak::Random, &mut r).unwrap()] += 1;
        }
        assert!(hist.iter().all(|&c| (800..1200).contains(&c)), "{hist:?}");
        q.set(0, 10, 0.5);
        assert_eq!(qlearning_select(&q, 0, 0.0, TieBreak::Random, &mut r).unwrap(), 10);
    }

    /// Straight-line restatement of the update on a flat array.
    fn reference_q(steps: &[(usize, usize, f64, usize)], ns: usize, na: usize, alpha: f64, gamma: f64) -> Vec<f64> {
        let mut q = vec![0.0f64; ns * na];
        for &(s, a, r, s2) in steps {
            let mut best = q[s2 * na];
            for k in 1..na {
                if q[s2 * na + k] > best {
                    best = q[s2 * na + k];
                }
            }
            q[s * na + a] = (1.0 - alpha) * q[s * na + a] + alpha * (r + gamma * best);
        }
        q
    }

    #[test]
    fn qlearning_matches_reference() {
        let mut r = rng(5);
        let (ns, na) = (24, 12);
        let steps: Vec<_> = (0..1000)
            .map(|_| (r.gen_range(0..ns), r.gen_range(0..na), r.gen::<f64>(), r.gen_range(0..ns)))
            .collect();
        let mut q = QTable::new(ns, na, 0.8, 0.2);
        for &(s, a, rew, s2) in &steps {
            qlearning_update(&mut q, s, a, rew, s2).unwrap();
        }
        let want = reference_q(&steps, ns, na, 0.8, 0.2);
        for (x, y) in q.values().iter().zip(&want) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn heuristic_examples() {
        let mut r = rng(6);
        let cur = Action::new(1, 2);
        assert_eq!(heuristic_select(&[0.9, 0.0, 0.0, 0.9], cur, true, &mut r).unwrap(), cur);
        let mut seen = [0u32; 5];
        for _ in 0..2000 {
            let a = heuristic_select(&[0.9, 0.0, 0.0, 0.9], cur, false, &mut r).unwrap();
            assert_eq!(a.max_bandwidth, 2);
            seen[a.primary] += 1;
        }
        assert_eq!((seen[1], seen[4]), (0, 0));
        assert!(seen[2] > 850 && seen[3] > 850, "{seen:?}");

        let mut seen = [0u32; 5];
        for _ in 0..3000 {
            seen[heuristic_select(&[0.3; 4], cur, false, &mut r).unwrap().primary] += 1;
        }
        assert_eq!(seen[1], 0);
        assert!(seen[2..].iter().all(|&c| c > 850), "{seen:?}");
        assert!(heuristic_select(&[0.0; 3], cur, false, &mut r).is_err());
    }

    #[test]
    fn static_echoes() {
        for a in [Action::new(1, 1), Action::new(3, 2), Action::new(2, 4)] {
            assert_eq!(static_select(a), a);
        }
        let h = Hyper {
            static_action: Some(Action::new(3, 2)),
            ..Hyper::default()
        };
        let mut p = build_policy(Algo::Static, space4(), &h).unwrap();
        let mut r = rng(0);
        for t in 1..=5 {
            assert_eq!(p.select(t, &mut r).unwrap().action, Action::new(3, 2));
            p.update(&Feedback { sigma: 0.1, occupancy: None }).unwrap();
        }
        let bad = Hyper {
            static_action: Some(Action::new(5, 1)),
            ..Hyper::default()
        };
        assert!(build_policy(Algo::Static, space4(), &bad).is_err());
    }

    #[test]
    fn selector_strings_round_trip() {
        for a in Algo::ALL {
            assert_eq!(a.to_string().parse::<Algo>().unwrap(), a);
        }
        assert!("ucb".parse::<Algo>().is_err());
        assert_eq!("ctx-egreedy-24".parse::<Algo>().unwrap(), Algo::CtxEGreedy(ContextSpace::Combined));
    }

    #[test]
    fn hyper_validation() {
        assert!(Hyper::default().validate().is_ok());
        for h in [
            Hyper { epsilon0: 0.0, ..Hyper::default() },
            Hyper { alpha: 1.5, ..Hyper::default() },
            Hyper { gamma: 1.0, ..Hyper::default() },
            Hyper { sat_threshold: 0.0, ..Hyper::default() },
        ] {
            assert!(h.validate().is_err(), "{h:?}");
        }
    }

    #[test]
    fn heuristic_needs_occupancy() {
        let mut p = build_policy(Algo::Heuristic, space4(), &Hyper::default()).unwrap();
        p.select(1, &mut rng(0)).unwrap();
        assert!(matches!(
            p.update(&Feedback { sigma: 0.5, occupancy: None }),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn fresh_context_explores() {
        let mut b = ContextualBandit::new(2, 12, 1.0, EpsilonClock::PerContext, TieBreak::Random);
        let mut r = rng(7);
        for _ in 0..10 {
            let (arm, _) = b.select(0, &mut r).unwrap();
            b.update(0, arm, 1.0);
        }
        let (_, eps) = b.select(1, &mut r).unwrap();
        assert_eq!(eps, 1.0);
        assert_eq!(b.visits(1), 1);

        let mut g = ContextualBandit::new(2, 12, 1.0, EpsilonClock::Global, TieBreak::Random);
        for _ in 0..3 {
            g.select(0, &mut r).unwrap();
        }
        assert_eq!(g.select(1, &mut r).unwrap().1, 0.5);
        assert!(g.select(2, &mut r).is_err());
    }

    fn reward_of(arm: usize, rng: &mut ChaCha8Rng) -> f64 {
        (arm as f64 / 12.0 + 0.3 * rng.gen::<f64>()).min(1.0)
    }

    #[test]
    fn single_context_equals_plain() {
        for seed in 0..20 {
            let mut plain = EGreedyPolicy::new(space4(), &Hyper::default());
            let mut ctx = ContextualBandit::new(1, 12, 1.0, EpsilonClock::PerContext, TieBreak::Random);
            let (mut ra, mut rb) = (rng(seed), rng(seed));
            let mut env = rng(seed + 1000);
            for t in 1..=200 {
                let d = plain.select(t, &mut ra).unwrap();
                let (arm, eps) = ctx.select(0, &mut rb).unwrap();
                assert_eq!(space4().index(d.action).unwrap(), arm);
                assert_eq!(d.epsilon, eps);
                let r = reward_of(arm, &mut env);
                plain.update(&Feedback { sigma: r, occupancy: None }).unwrap();
                ctx.update(0, arm, r);
            }
            assert_eq!(plain.stats(), ctx.stats(0));
        }
    }

    #[test]
    fn disjoint_contexts_partition_history() {
        // Context alternates deterministically; each sub-bandit must match a
        // plain bandit fed only its own subsequence with its own random stream.
        let mut ctx = ContextualBandit::new(2, 12, 1.0, EpsilonClock::PerContext, TieBreak::Random);
        let mut subs = [ArmStats::new(12), ArmStats::new(12)];
        let mut sub_t = [0u64; 2];
        let mut env = rng(9);
        let (mut ra, mut rb) = (rng(10), rng(10));
        for step in 0..400 {
            let c = usize::from(step % 3 == 0);
            let (arm, _) = ctx.select(c, &mut ra).unwrap();
            sub_t[c] += 1;
            let want = egreedy_select(&subs[c], epsilon(sub_t[c], 1.0).unwrap(), TieBreak::Random, &mut rb);
            assert_eq!(arm, want);
            let r = reward_of(arm, &mut env);
            ctx.update(c, arm, r);
            egreedy_update(&mut subs[c], arm, r);
        }
        assert_eq!(ctx.stats(0), &subs[0]);
        assert_eq!(ctx.stats(1), &subs[1]);
    }

    #[test]
    fn one_state_qlearning_tracks_ema_bandit() {
        let alpha = 0.8;
        let mut q = QTable::new(1, 12, alpha, 0.0);
        let mut ema = vec![0.0f64; 12];
        let mut r = rng(11);
        let mut env = rng(12);
        for t in 1..=500 {
            assert_eq!(argmax_set(q.row(0)), argmax_set(&ema));
            let arm = qlearning_select(&q, 0, epsilon(t, 1.0).unwrap(), TieBreak::Random, &mut r).unwrap();
            let rew = reward_of(arm, &mut env);
            qlearning_update(&mut q, 0, arm, rew, 0).unwrap();
            ema[arm] += alpha * (rew - ema[arm]);
        }
    }

    #[test]
    fn policies_alternate_select_and_update() {
        for algo in [Algo::EGreedy, Algo::CtxEGreedy(ContextSpace::Binary), Algo::QLearning(ContextSpace::Combined)] {
            let mut p = build_policy(algo, space4(), &Hyper::default()).unwrap();
            assert!(p.update(&Feedback { sigma: 1.0, occupancy: None }).is_err(), "{algo}");
        }
    }

    #[test]
    fn combined_context_follows_last_action() {
        let sp = space4();
        let mut p = QLearningPolicy::new(sp, ContextSpace::Combined, &Hyper::default());
        let mut r = rng(13);
        let d1 = p.select(1, &mut r).unwrap();
        assert_eq!(d1.context, 0);
        p.update(&Feedback { sigma: 1.0, occupancy: None }).unwrap();
        let d2 = p.select(2, &mut r).unwrap();
        assert_eq!(d2.context, 12 + sp.index(d1.action).unwrap());
    }

    proptest! {
        #[test]
        fn means_match_brute_force(obs in prop::collection::vec((0usize..12, 0.0f64..=1.0), 1..300)) {
            let mut s = ArmStats::new(12);
            for &(a, r) in &obs {
                egreedy_update(&mut s, a, r);
            }
            for arm in 0..12 {
                let xs: Vec<f64> = obs.iter().filter(|o| o.0 == arm).map(|o| o.1).collect();
                let want = if xs.is_empty() { 0.0 } else { xs.iter().sum::<f64>() / xs.len() as f64 };
                prop_assert!((s.mean(arm) - want).abs() <= 1e-12);
                prop_assert!((0.0..=1.0).contains(&s.mean(arm)));
            }
        }

        #[test]
        fn q_entries_stay_bounded(steps in prop::collection::vec((0usize..24, 0usize..12, 0.0f64..=1.0, 0usize..24), 1..2000)) {
            let mut q = QTable::new(24, 12, 0.8, 0.2);
            for &(s, a, r, s2) in &steps {
                qlearning_update(&mut q, s, a, r, s2).unwrap();
            }
            prop_assert!(q.values().iter().all(|&v| (0.0..=1.25).contains(&v)));
        }

        #[test]
        fn greedy_set_scale_invariant(ks in prop::collection::vec(0u32..16, 12), c in 0.1f64..10.0) {
            let means: Vec<f64> = ks.iter().map(|&k| f64::from(k) / 16.0).collect();
            let scaled: Vec<f64> = means.iter().map(|m| m * c).collect();
            prop_assert_eq!(argmax_set(&means), argmax_set(&scaled));
        }

        #[test]
        fn epsilon_in_range(t in 1u64..1_000_000, e0 in 0.01f64..=1.0) {
            let e = epsilon(t, e0).unwrap();
            prop_assert!(e > 0.0 && e <= e0);
            prop_assert!(epsilon(t + 1, e0).unwrap() < e);
        }

        #[test]
        fn reward_clipped(th in -10.0f64..200.0, load in 0.1f64..100.0) {
            let r = reward(th, load).unwrap();
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }
}
