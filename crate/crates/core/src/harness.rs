//! Multi-agent episodes, run logs, and gain metrics.
//!
//! Agents act simultaneously: every BSS picks an action from its state at
//! t−1, the joint configuration is evaluated once, and each agent then
//! learns from its own σ. Seeds run in parallel but every random stream is
//! keyed by `(base_seed, seed_index, bss)`, so logs do not depend on the
//! thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::agents::{build_policy, reward, Algo, Feedback, Hyper, Policy};
use crate::dataset::Dataset;
use crate::deployment::Deployment;
use crate::error::{Error, Result};
use crate::seed::{rng_from, stable_hash};
use crate::sim::{occupancy_observation, GlobalConfig, MacParams, Simulation};
use crate::spectrum::{Action, ActionSpace};

pub const RUNLOG_HEADER: &str = "seed,iteration,bss,primary,max_bw,sigma,epsilon,context";
pub const SUMMARY_HEADER: &str = "iteration,mean_gain,worst_gain";

/// Result of evaluating one joint configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub sigma: Vec<f64>,
    /// Per BSS, per channel busy fraction.
    pub occupancy: Option<Vec<Vec<f64>>>,
}

/// Something that scores a global configuration.
pub trait Environment: Sync {
    fn n_bss(&self) -> usize;
    fn space(&self) -> ActionSpace;
    /// `seed` is unique per (episode, iteration); replay environments ignore it.
    fn evaluate(&self, g: &GlobalConfig, seed: u64, with_occupancy: bool) -> Result<Evaluation>;
}

/// Replays stored throughput.
pub struct DatasetEnv<'a> {
    dataset: &'a Dataset,
    loads: Vec<f64>,
}

impl<'a> DatasetEnv<'a> {
    /// Fails if the dataset was generated for another deployment.
    pub fn new(dataset: &'a Dataset, d: &Deployment) -> Result<Self> {
        dataset.check_deployment(d)?;
        Self::with_loads(dataset, d.loads())
    }

    pub fn with_loads(dataset: &'a Dataset, loads: Vec<f64>) -> Result<Self> {
        if loads.len() != dataset.n_bss {
            return Err(Error::validation(format!(
                "{} loads for a {}-BSS dataset",
                loads.len(),
                dataset.n_bss
            )));
        }
        Ok(DatasetEnv { dataset, loads })
    }
}

impl Environment for DatasetEnv<'_> {
    fn n_bss(&self) -> usize {
        self.dataset.n_bss
    }

    fn space(&self) -> ActionSpace {
        self.dataset.space()
    }

    fn evaluate(&self, g: &GlobalConfig, _seed: u64, with_occupancy: bool) -> Result<Evaluation> {
        if with_occupancy {
            return Err(Error::Unsupported(
                "a stored dataset has no channel occupancy; use live mode".into(),
            ));
        }
        let th = self.dataset.lookup(g)?;
        let sigma = th
            .iter()
            .zip(&self.loads)
            .map(|(&t, &l)| reward(t, l))
            .collect::<Result<_>>()?;
        Ok(Evaluation { sigma, occupancy: None })
    }
}

/// Runs the simulator for every iteration.
pub struct LiveEnv<'a> {
    deployment: &'a Deployment,
    mac: MacParams,
    duration_s: f64,
}

impl<'a> LiveEnv<'a> {
    pub fn new(deployment: &'a Deployment, mac: MacParams, duration_s: f64) -> Result<Self> {
        mac.validate()?;
        if !(duration_s > 0.0) {
            return Err(Error::validation("iteration duration must be > 0"));
        }
        Ok(LiveEnv {
            deployment,
            mac,
            duration_s,
        })
    }
}

impl Environment for LiveEnv<'_> {
    fn n_bss(&self) -> usize {
        self.deployment.n_bss()
    }

    fn space(&self) -> ActionSpace {
        ActionSpace::new(self.deployment.n_channels).expect("validated deployment")
    }

    fn evaluate(&self, g: &GlobalConfig, seed: u64, with_occupancy: bool) -> Result<Evaluation> {
        let out = Simulation::new(self.deployment, g, self.duration_s, &self.mac, seed)?
            .with_trace(with_occupancy)
            .run();
        let sigma = out
            .result
            .throughput_mbps
            .iter()
            .zip(&self.deployment.bss)
            .map(|(&t, b)| reward(t, b.load_mbps))
            .collect::<Result<_>>()?;
        let occupancy = if with_occupancy {
            Some(
                (0..self.n_bss())
                    .map(|w| occupancy_observation(out.trace.as_ref(), w))
                    .collect::<Result<_>>()?,
            )
        } else {
            None
        };
        Ok(Evaluation { sigma, occupancy })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub iterations: u64,
    pub seeds: u64,
    pub base_seed: u64,
    /// One selector for every BSS, or one per BSS.
    pub algos: Vec<Algo>,
    pub hyper: Hyper,
}

impl RunConfig {
    pub fn new(algo: Algo) -> Self {
        RunConfig {
            iterations: 200,
            seeds: 100,
            base_seed: 0,
            algos: vec![algo],
            hyper: Hyper::default(),
        }
    }

    fn algo_for(&self, bss: usize) -> Algo {
        if self.algos.len() == 1 {
            self.algos[0]
        } else {
            self.algos[bss]
        }
    }

    pub fn validate(&self, n_bss: usize) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::validation("iterations must be >= 1"));
        }
        if self.seeds == 0 {
            return Err(Error::validation("seeds must be >= 1"));
        }
        if self.algos.len() != 1 && self.algos.len() != n_bss {
            return Err(Error::validation(format!(
                "{} algorithms given for {n_bss} BSSs (give one or one per BSS)",
                self.algos.len()
            )));
        }
        self.hyper.validate()
    }
}

/// One agent's step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogRow {
    pub seed: u64,
    pub iteration: u64,
    pub bss: usize,
    pub action: Action,
    pub sigma: f64,
    pub epsilon: f64,
    pub context: usize,
}

/// Rows ordered by seed, iteration, bss.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunLog {
    pub rows: Vec<LogRow>,
}

impl RunLog {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{RUNLOG_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{:.6},{:.6},{}",
                r.seed, r.iteration, r.bss, r.action.primary, r.action.max_bandwidth, r.sigma, r.epsilon, r.context
            )?;
        }
        Ok(())
    }

    /// Rows of one seed.
    pub fn seed(&self, seed: u64) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.seed == seed)
    }
}

/// Seed of the environment at iteration `t` of an episode.
pub fn iteration_seed(episode_seed: u64, t: u64) -> u64 {
    stable_hash(&[episode_seed, t])
}

/// Plays one seed to completion.
pub fn run_episode(env: &dyn Environment, cfg: &RunConfig, seed_index: u64) -> Result<Vec<LogRow>> {
    let n = env.n_bss();
    cfg.validate(n)?;
    let space = env.space();
    let mut agents: Vec<Box<dyn Policy>> = (0..n)
        .map(|w| build_policy(cfg.algo_for(w), space, &cfg.hyper))
        .collect::<Result<_>>()?;
    let mut rngs: Vec<_> = (0..n)
        .map(|w| rng_from(&[cfg.base_seed, seed_index, w as u64]))
        .collect();
    let sensing = (0..n).any(|w| cfg.algo_for(w).needs_occupancy());
    let episode_seed = stable_hash(&[cfg.base_seed, seed_index]);

    let mut rows = Vec::with_capacity(cfg.iterations as usize * n);
    for t in 1..=cfg.iterations {
        let decisions = agents
            .iter_mut()
            .zip(rngs.iter_mut())
            .map(|(a, r)| a.select(t, r))
            .collect::<Result<Vec<_>>>()?;
        let g = GlobalConfig(decisions.iter().map(|d| d.action).collect());
        let eval = env.evaluate(&g, iteration_seed(episode_seed, t), sensing)?;
        for (w, agent) in agents.iter_mut().enumerate() {
            agent.update(&Feedback {
                sigma: eval.sigma[w],
                occupancy: eval.occupancy.as_ref().map(|o| o[w].as_slice()),
            })?;
            rows.push(LogRow {
                seed: seed_index,
                iteration: t,
                bss: w,
                action: decisions[w].action,
                sigma: eval.sigma[w],
                epsilon: decisions[w].epsilon,
                context: decisions[w].context,
            });
        }
    }
    Ok(rows)
}

/// Plays every seed, in parallel on the current rayon pool.
pub fn run(env: &dyn Environment, cfg: &RunConfig) -> Result<RunLog> {
    cfg.validate(env.n_bss())?;
    let per_seed = (0..cfg.seeds)
        .into_par_iter()
        .map(|k| run_episode(env, cfg, k))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunLog {
        rows: per_seed.into_iter().flatten().collect(),
    })
}

/// Running mean G_t/t.
pub fn normalized_gain(rewards: &[f64]) -> Vec<f64> {
    let mut sum = 0.0;
    rewards
        .iter()
        .enumerate()
        .map(|(i, r)| {
            sum += r;
            sum / (i + 1) as f64
        })
        .collect()
}

/// How the worst-BSS curve combines seeds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WorstMode {
    /// Minimum over BSSs within each seed, then averaged over seeds.
    #[default]
    MinThenMean,
    /// Each BSS averaged over seeds, then the minimum.
    MeanThenMin,
}

impl fmt::Display for WorstMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorstMode::MinThenMean => "min-then-mean",
            WorstMode::MeanThenMin => "mean-then-min",
        })
    }
}

impl FromStr for WorstMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-then-mean" => Ok(WorstMode::MinThenMean),
            "mean-then-min" => Ok(WorstMode::MeanThenMin),
            _ => Err(Error::validation(format!(
                "unknown worst mode '{s}' (expected min-then-mean or mean-then-min)"
            ))),
        }
    }
}

/// Final-iteration figures of one seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedSummary {
    pub seed: u64,
    /// BSS-average of G_T/T.
    pub final_mean: f64,
    /// Minimum over BSSs of G_T/T.
    pub final_worst: f64,
    pub tau: Option<u64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSummary {
    pub mean: Vec<f64>,
    pub worst: Vec<f64>,
    pub seeds: Vec<SeedSummary>,
}

impl MetricsSummary {
    pub fn final_mean(&self) -> f64 {
        *self.mean.last().expect("at least one iteration")
    }

    pub fn final_worst(&self) -> f64 {
        *self.worst.last().expect("at least one iteration")
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{SUMMARY_HEADER}")?;
        for (i, (m, w)) in self.mean.iter().zip(&self.worst).enumerate() {
            writeln!(out, "{},{m:.6},{w:.6}", i + 1)?;
        }
        Ok(())
    }
}

/// σ indexed `[seed][t-1][bss]`, checked to be rectangular.
fn sigma_cube(rows: &[LogRow]) -> Result<Vec<(u64, Vec<Vec<f64>>)>> {
    let mut by_seed: BTreeMap<u64, BTreeMap<u64, BTreeMap<usize, f64>>> = BTreeMap::new();
    for r in rows {
        if !(0.0..=1.0).contains(&r.sigma) {
            return Err(Error::validation(format!("sigma {} outside [0, 1]", r.sigma)));
        }
        let prev = by_seed
            .entry(r.seed)
            .or_default()
            .entry(r.iteration)
            .or_default()
            .insert(r.bss, r.sigma);
        if prev.is_some() {
            return Err(Error::validation(format!(
                "duplicate row for seed {} iteration {} bss {}",
                r.seed, r.iteration, r.bss
            )));
        }
    }
    if by_seed.is_empty() {
        return Err(Error::validation("empty run log"));
    }
    let mut shape: Option<(u64, usize)> = None;
    let mut out = Vec::with_capacity(by_seed.len());
    for (seed, iters) in by_seed {
        let t_max = iters.len() as u64;
        if iters.keys().copied().ne(1..=t_max) {
            return Err(Error::validation(format!("seed {seed} has gaps in its iterations")));
        }
        let mut cube = Vec::with_capacity(iters.len());
        for (t, bsss) in iters {
            if bsss.keys().copied().ne(0..bsss.len()) {
                return Err(Error::validation(format!("seed {seed} iteration {t} has gaps in its BSSs")));
            }
            cube.push(bsss.into_values().collect::<Vec<_>>());
        }
        let n_bss = cube[0].len();
        if cube.iter().any(|v| v.len() != n_bss) {
            return Err(Error::validation(format!("seed {seed} has a varying BSS count")));
        }
        match shape {
            None => shape = Some((t_max, n_bss)),
            Some(s) if s != (t_max, n_bss) => {
                return Err(Error::validation(format!(
                    "ragged run log: seed {seed} is {t_max}x{n_bss}, expected {}x{}",
                    s.0, s.1
                )))
            }
            Some(_) => {}
        }
        out.push((seed, cube));
    }
    Ok(out)
}

/// Smallest t at which every BSS has σ ≥ threshold.
pub fn tau(rows: &[LogRow], threshold: f64) -> Result<Option<u64>> {
    let cube = sigma_cube(rows)?;
    if cube.len() != 1 {
        return Err(Error::validation("tau needs the rows of exactly one seed"));
    }
    Ok(tau_of(&cube[0].1, threshold))
}

fn tau_of(per_t: &[Vec<f64>], threshold: f64) -> Option<u64> {
    per_t
        .iter()
        .position(|s| s.iter().all(|&x| x >= threshold))
        .map(|i| i as u64 + 1)
}

/// Seed-averaged mean and worst-BSS curves of G_t/t.
pub fn aggregate(rows: &[LogRow], mode: WorstMode, threshold: f64) -> Result<MetricsSummary> {
    let cube = sigma_cube(rows)?;
    let n_seeds = cube.len() as f64;
    let t_max = cube[0].1.len();
    let n_bss = cube[0].1[0].len();

    let mut mean = vec![0.0; t_max];
    let mut min_then_mean = vec![0.0; t_max];
    let mut per_bss = vec![vec![0.0; t_max]; n_bss];
    let mut seeds = Vec::with_capacity(cube.len());
    for (seed, per_t) in &cube {
        let gains: Vec<Vec<f64>> = (0..n_bss)
            .map(|w| normalized_gain(&per_t.iter().map(|s| s[w]).collect::<Vec<_>>()))
            .collect();
        for t in 0..t_max {
            let col = gains.iter().map(|g| g[t]);
            mean[t] += col.clone().sum::<f64>() / n_bss as f64;
            min_then_mean[t] += col.fold(f64::INFINITY, f64::min);
            for w in 0..n_bss {
                per_bss[w][t] += gains[w][t];
            }
        }
        let last: Vec<f64> = gains.iter().map(|g| g[t_max - 1]).collect();
        seeds.push(SeedSummary {
            seed: *seed,
            final_mean: last.iter().sum::<f64>() / n_bss as f64,
            final_worst: last.iter().copied().fold(f64::INFINITY, f64::min),
            tau: tau_of(per_t, threshold),
        });
    }
    for t in 0..t_max {
        mean[t] /= n_seeds;
        min_then_mean[t] /= n_seeds;
    }
    let worst = match mode {
        WorstMode::MinThenMean => min_then_mean,
        WorstMode::MeanThenMin => (0..t_max)
            .map(|t| per_bss.iter().map(|b| b[t] / n_seeds).fold(f64::INFINITY, f64::min))
            .collect(),
    };
    Ok(MetricsSummary { mean, worst, seeds })
}
