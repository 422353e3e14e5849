//! Block Metropolis-Hastings over bounded hyperparameters.
//!
//! Each sweep visits the blocks in declared order; every block step draws a
//! Gaussian random-walk candidate for that block only and accepts it with
//! the usual MH rule under a bounded uniform prior. Proposal scales adapt
//! during burn-in and are frozen afterwards. The selected hyperparameters
//! are the highest-posterior state visited.

use std::io::Write;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{dense_log_marginal_likelihood, Dataset, EvalTimings, GpModel};
use crate::kernel::ParameterTable;

/// JSON has no infinities: `-inf` log densities are written as `null` and
/// read back as `-inf`.
pub mod log_density {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Result of one target evaluation. Failures are folded into `-inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetEval {
    pub log_density: f64,
    pub timings: Option<EvalTimings>,
    pub error: Option<String>,
}

impl TargetEval {
    pub fn value(log_density: f64) -> Self {
        TargetEval {
            log_density,
            timings: None,
            error: None,
        }
    }
}

/// Log density up to a constant; the uniform prior is applied by the chain.
pub trait LogTarget {
    fn evaluate(&self, theta: &[f64]) -> TargetEval;
}

impl<F: Fn(&[f64]) -> f64> LogTarget for F {
    fn evaluate(&self, theta: &[f64]) -> TargetEval {
        TargetEval::value(self(theta))
    }
}

/// The GP log marginal likelihood as an MCMC target.
pub struct GpTarget<'a> {
    pub model: &'a GpModel,
    pub data: &'a Dataset,
}

impl LogTarget for GpTarget<'_> {
    fn evaluate(&self, theta: &[f64]) -> TargetEval {
        match self.model.log_marginal_likelihood(theta, self.data) {
            Ok(e) => TargetEval {
                log_density: e.lml,
                timings: Some(e.timings),
                error: None,
            },
            Err(err) => {
                log::info!("log marginal likelihood rejected: {err}");
                TargetEval {
                    log_density: f64::NEG_INFINITY,
                    timings: None,
                    error: Some(err.to_string()),
                }
            }
        }
    }
}

/// The dense-Cholesky log marginal likelihood, for models too dense for the
/// sparse pipeline.
pub struct DenseGpTarget<'a> {
    pub model: &'a GpModel,
    pub data: &'a Dataset,
}

impl LogTarget for DenseGpTarget<'_> {
    fn evaluate(&self, theta: &[f64]) -> TargetEval {
        let t0 = Instant::now();
        match dense_log_marginal_likelihood(self.model, theta, self.data) {
            Ok(lml) => TargetEval {
                log_density: lml,
                timings: Some(EvalTimings {
                    total_s: t0.elapsed().as_secs_f64(),
                    ..EvalTimings::default()
                }),
                error: None,
            },
            Err(err) => TargetEval {
                log_density: f64::NEG_INFINITY,
                timings: None,
                error: Some(err.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDef {
    pub name: String,
    pub slots: Vec<String>,
    /// Initial proposal std as a fraction of each slot's bound width.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_scale() -> f64 {
    0.05
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McmcConfig {
    /// Number of sweeps; each sweep steps every block once.
    pub iterations: usize,
    pub seed: u64,
    pub blocks: Vec<BlockDef>,
    /// Sweeps per adaptation window.
    pub adapt_window: usize,
    pub target_accept: f64,
    pub burn_in_fraction: f64,
    pub adapt: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            iterations: 1000,
            seed: 0,
            blocks: Vec::new(),
            adapt_window: 20,
            target_accept: 0.30,
            burn_in_fraction: 0.30,
            adapt: true,
        }
    }
}

pub const ADAPT_RATE: f64 = 0.5;
pub const SCALE_CLIP: (f64, f64) = (1e-6, 1e3);

impl McmcConfig {
    pub fn burn_in(&self) -> usize {
        (self.iterations as f64 * self.burn_in_fraction).floor() as usize
    }

    /// Checks the config and maps block slots to table indices. Every slot
    /// must belong to exactly one block.
    pub fn resolve_blocks(&self, table: &ParameterTable) -> Result<Vec<Vec<usize>>> {
        if self.iterations == 0 {
            return Err(Error::input("iterations must be >= 1"));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::input("target acceptance must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::input("burn-in fraction must lie in [0, 1)"));
        }
        if self.adapt_window == 0 {
            return Err(Error::input("adaptation window must be >= 1"));
        }
        let mut owner = vec![None; table.len()];
        let mut out = Vec::new();
        for (b, block) in self.blocks.iter().enumerate() {
            if block.slots.is_empty() {
                return Err(Error::input(format!("block `{}` is empty", block.name)));
            }
            if !(block.scale >= 0.0 && block.scale.is_finite()) {
                return Err(Error::input(format!(
                    "block `{}` has invalid scale",
                    block.name
                )));
            }
            let mut idx = Vec::new();
            for s in &block.slots {
                let i = table.index_of(s)?;
                if let Some(prev) = owner[i].replace(b) {
                    return Err(Error::input(format!(
                        "slot `{s}` is in blocks `{}` and `{}`",
                        self.blocks[prev].name, block.name
                    )));
                }
                idx.push(i);
            }
            out.push(idx);
        }
        if let Some(i) = owner.iter().position(Option::is_none) {
            return Err(Error::input(format!(
                "slot `{}` is not in any block",
                table.slots()[i].name
            )));
        }
        Ok(out)
    }
}

/// Single block: every slot of the table, in order.
pub fn single_block(table: &ParameterTable, scale: f64) -> Vec<BlockDef> {
    vec![BlockDef {
        name: "all".into(),
        slots: table.names().map(str::to_string).collect(),
        scale,
    }]
}

/// Starting point: bump amplitudes off (0, or the lower bound if 0 is
/// outside the range), everything else at its init value or midpoint.
pub fn initial_theta<'a>(
    table: &ParameterTable,
    disabled: impl IntoIterator<Item = &'a str>,
) -> Result<Vec<f64>> {
    let mut theta = table.initial();
    for name in disabled {
        let i = table.index_of(name)?;
        let s = &table.slots()[i];
        if s.init.is_none() {
            theta[i] = if s.contains(0.0) { 0.0 } else { s.lower };
        }
    }
    Ok(theta)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub block: String,
    pub proposed: Vec<f64>,
    pub accepted: bool,
    /// Log posterior of the chain state after this step.
    #[serde(with = "log_density")]
    pub log_posterior: f64,
    #[serde(with = "log_density")]
    pub proposed_log_posterior: f64,
    /// Proposal scale used for this step.
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<EvalTimings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl TraceRecord {
    /// NDJSON line without wall-clock fields, for replay comparisons.
    pub fn replay_line(&self) -> String {
        let mut r = self.clone();
        r.timings = None;
        serde_json::to_string(&r).expect("trace record serializes")
    }
}

/// Everything needed to resume a chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    /// Completed sweeps.
    pub iteration: usize,
    pub theta: Vec<f64>,
    #[serde(with = "log_density")]
    pub log_posterior: f64,
    pub scales: Vec<f64>,
    pub initial_scales: Vec<f64>,
    pub window_accepts: Vec<usize>,
    pub window_len: usize,
    pub accepted: Vec<usize>,
    pub proposed: Vec<usize>,
    pub accepted_after_burn_in: Vec<usize>,
    pub proposed_after_burn_in: Vec<usize>,
    pub map_theta: Vec<f64>,
    #[serde(with = "log_density")]
    pub map_log_posterior: f64,
    pub evaluations: usize,
    /// ChaCha word position, as a decimal string.
    pub rng_word_pos: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub theta_map: Vec<f64>,
    #[serde(with = "log_density")]
    pub log_posterior_map: f64,
    #[serde(with = "log_density")]
    pub initial_log_posterior: f64,
    pub state: ChainState,
    /// Set when no proposal was accepted after burn-in.
    pub failure: Option<String>,
}

impl ChainResult {
    pub fn acceptance_after_burn_in(&self) -> Vec<f64> {
        self.state
            .accepted_after_burn_in
            .iter()
            .zip(&self.state.proposed_after_burn_in)
            .map(|(&a, &p)| {
                if p == 0 {
                    f64::NAN
                } else {
                    a as f64 / p as f64
                }
            })
            .collect()
    }

    pub fn ensure_trained(&self) -> Result<()> {
        match &self.failure {
            Some(f) => Err(Error::Training(f.clone())),
            None => Ok(()),
        }
    }
}

/// A resumable chain over a target.
pub struct Sampler<'a, T: LogTarget + ?Sized> {
    config: McmcConfig,
    table: ParameterTable,
    blocks: Vec<Vec<usize>>,
    target: &'a T,
    rng: ChaCha8Rng,
    state: ChainState,
    initial_log_posterior: f64,
}

impl<'a, T: LogTarget + ?Sized> Sampler<'a, T> {
    pub fn new(
        config: McmcConfig,
        table: ParameterTable,
        target: &'a T,
        theta0: Vec<f64>,
    ) -> Result<Self> {
        let blocks = config.resolve_blocks(&table)?;
        table.check_len(&theta0)?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let scales: Vec<f64> = config.blocks.iter().map(|b| b.scale).collect();
        let mut sampler = Sampler {
            blocks,
            target,
            rng,
            state: ChainState {
                iteration: 0,
                theta: theta0.clone(),
                log_posterior: f64::NEG_INFINITY,
                initial_scales: scales.clone(),
                scales,
                window_accepts: vec![0; config.blocks.len()],
                window_len: 0,
                accepted: vec![0; config.blocks.len()],
                proposed: vec![0; config.blocks.len()],
                accepted_after_burn_in: vec![0; config.blocks.len()],
                proposed_after_burn_in: vec![0; config.blocks.len()],
                map_theta: theta0.clone(),
                map_log_posterior: f64::NEG_INFINITY,
                evaluations: 0,
                rng_word_pos: "0".into(),
            },
            config,
            table,
            initial_log_posterior: f64::NEG_INFINITY,
        };
        let lp = sampler.log_posterior(&theta0).0.log_density;
        if !lp.is_finite() {
            return Err(Error::Training(format!(
                "initial θ {theta0:?} has log posterior {lp}"
            )));
        }
        sampler.state.log_posterior = lp;
        sampler.state.map_log_posterior = lp;
        sampler.initial_log_posterior = lp;
        Ok(sampler)
    }

    /// Continues a chain from a saved state.
    pub fn resume(
        config: McmcConfig,
        table: ParameterTable,
        target: &'a T,
        state: ChainState,
    ) -> Result<Self> {
        let blocks = config.resolve_blocks(&table)?;
        table.check_len(&state.theta)?;
        if state.scales.len() != blocks.len() {
            return Err(Error::Schema(
                "chain state does not match the block layout".into(),
            ));
        }
        let pos: u128 = state
            .rng_word_pos
            .parse()
            .map_err(|_| Error::Schema("invalid RNG position in chain state".into()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_word_pos(pos);
        Ok(Sampler {
            blocks,
            target,
            rng,
            initial_log_posterior: state.log_posterior,
            state,
            config,
            table,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    /// Uniform prior plus target; out-of-bounds θ is `-inf` without a
    /// target evaluation.
    fn log_posterior(&mut self, theta: &[f64]) -> (TargetEval, bool) {
        if !self.table.in_bounds(theta) {
            return (TargetEval::value(f64::NEG_INFINITY), false);
        }
        self.state.evaluations += 1;
        let mut e = self.target.evaluate(theta);
        if e.log_density.is_nan() || e.log_density == f64::INFINITY {
            e.error
                .get_or_insert_with(|| format!("target returned {}", e.log_density));
            e.log_density = f64::NEG_INFINITY;
        }
        (e, true)
    }

    /// Gaussian random-walk candidate changing only block `b`.
    pub fn propose(&mut self, b: usize) -> Vec<f64> {
        let mut cand = self.state.theta.clone();
        let bounds = self.table.bounds();
        let scale = self.state.scales[b];
        for &i in &self.blocks[b] {
            let z: f64 = self.rng.sample(StandardNormal);
            cand[i] += scale * (bounds[i].1 - bounds[i].0) * z;
        }
        cand
    }

    /// One Metropolis-Hastings step on block `b`.
    pub fn step(&mut self, b: usize) -> TraceRecord {
        let burned_in = self.state.iteration >= self.config.burn_in();
        let scale = self.state.scales[b];
        let cand = self.propose(b);
        let (eval, _) = self.log_posterior(&cand);
        let u: f64 = self.rng.random();
        let accepted =
            eval.log_density.is_finite() && u.ln() < eval.log_density - self.state.log_posterior;
        self.state.proposed[b] += 1;
        if burned_in {
            self.state.proposed_after_burn_in[b] += 1;
        }
        if accepted {
            self.state.theta = cand.clone();
            self.state.log_posterior = eval.log_density;
            self.state.accepted[b] += 1;
            self.state.window_accepts[b] += 1;
            if burned_in {
                self.state.accepted_after_burn_in[b] += 1;
            }
            if eval.log_density > self.state.map_log_posterior {
                self.state.map_log_posterior = eval.log_density;
                self.state.map_theta = cand.clone();
            }
        }
        self.state.rng_word_pos = self.rng.get_word_pos().to_string();
        TraceRecord {
            iteration: self.state.iteration,
            block: self.config.blocks[b].name.clone(),
            proposed: self.blocks[b].iter().map(|&i| cand[i]).collect(),
            accepted,
            log_posterior: self.state.log_posterior,
            proposed_log_posterior: eval.log_density,
            scale,
            timings: eval.timings,
            error: eval.error,
        }
    }

    fn adapt(&mut self) {
        for b in 0..self.blocks.len() {
            let acc = self.state.window_accepts[b] as f64 / self.state.window_len as f64;
            let init = self.state.initial_scales[b];
            let s = self.state.scales[b] * (ADAPT_RATE * (acc - self.config.target_accept)).exp();
            self.state.scales[b] = s.clamp(SCALE_CLIP.0 * init, SCALE_CLIP.1 * init);
        }
        self.state.window_accepts.fill(0);
        self.state.window_len = 0;
    }

    /// One sweep over all blocks in declared order.
    pub fn sweep(&mut self) -> Vec<TraceRecord> {
        let recs: Vec<TraceRecord> = (0..self.blocks.len()).map(|b| self.step(b)).collect();
        self.state.iteration += 1;
        self.state.window_len += 1;
        let in_burn_in = self.state.iteration <= self.config.burn_in();
        if self.config.adapt && in_burn_in && self.state.window_len >= self.config.adapt_window {
            self.adapt();
        }
        if !in_burn_in {
            self.state.window_accepts.fill(0);
            self.state.window_len = 0;
        }
        recs
    }

    /// Runs the remaining sweeps, streaming records to `sink` as NDJSON.
    pub fn run(
        mut self,
        mut sink: Option<&mut dyn Write>,
        mut trace: Option<&mut Vec<TraceRecord>>,
    ) -> Result<ChainResult> {
        let started = Instant::now();
        while self.state.iteration < self.config.iterations {
            for rec in self.sweep() {
                if let Some(w) = sink.as_deref_mut() {
                    serde_json::to_writer(&mut *w, &rec)?;
                    w.write_all(b"\n")?;
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(rec);
                }
            }
        }
        log::info!(
            "chain finished {} sweeps in {:.2}s, MAP log posterior {}",
            self.state.iteration,
            started.elapsed().as_secs_f64(),
            self.state.map_log_posterior
        );
        let post: usize = self.state.proposed_after_burn_in.iter().sum();
        let acc: usize = self.state.accepted_after_burn_in.iter().sum();
        let failure = (post > 0 && acc == 0).then(|| {
            format!(
                "no proposal accepted in {post} post-burn-in steps; final scales {:?}, log posterior {}, {} target evaluations",
                self.state.scales, self.state.log_posterior, self.state.evaluations
            )
        });
        Ok(ChainResult {
            theta_map: self.state.map_theta.clone(),
            log_posterior_map: self.state.map_log_posterior,
            initial_log_posterior: self.initial_log_posterior,
            state: self.state,
            failure,
        })
    }
}

/// Runs a fresh chain from `theta0`, collecting the full trace.
pub fn run_chain<T: LogTarget + ?Sized>(
    config: &McmcConfig,
    table: &ParameterTable,
    target: &T,
    theta0: Vec<f64>,
    sink: Option<&mut dyn Write>,
) -> Result<(Vec<TraceRecord>, ChainResult)> {
    let sampler = Sampler::new(config.clone(), table.clone(), target, theta0)?;
    let mut trace = Vec::new();
    let result = sampler.run(sink, Some(&mut trace))?;
    Ok((trace, result))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::SlotDef;

    fn table2() -> ParameterTable {
        ParameterTable::new(vec![
            SlotDef::new("a", -10.0, 10.0),
            SlotDef::new("b", -10.0, 10.0),
        ])
        .unwrap()
    }

    fn cfg(iterations: usize, blocks: Vec<BlockDef>) -> McmcConfig {
        McmcConfig {
            iterations,
            seed: 7,
            blocks,
            ..McmcConfig::default()
        }
    }

    fn two_blocks(scale: f64) -> Vec<BlockDef> {
        vec![
            BlockDef {
                name: "a".into(),
                slots: vec!["a".into()],
                scale,
            },
            BlockDef {
                name: "b".into(),
                slots: vec!["b".into()],
                scale,
            },
        ]
    }

    #[test]
    fn zero_scale_keeps_state() {
        let t = table2();
        let target = |_: &[f64]| 0.0;
        let mut s = Sampler::new(cfg(5, two_blocks(0.0)), t, &target, vec![1.0, 2.0]).unwrap();
        assert_eq!(s.propose(0), vec![1.0, 2.0]);
    }

    #[test]
    fn block_isolation() {
        let t = table2();
        let target = |_: &[f64]| 0.0;
        let mut s = Sampler::new(cfg(5, two_blocks(0.1)), t, &target, vec![1.0, 2.0]).unwrap();
        for _ in 0..20 {
            let c = s.propose(1);
            assert_eq!(c[0], s.state().theta[0]);
            assert_ne!(c[1], 2.0);
        }
    }

    #[test]
    fn out_of_bounds_rejected_and_not_evaluated() {
        let t = ParameterTable::new(vec![SlotDef::new("a", 0.0, 1e-9)]).unwrap();
        let target = |_: &[f64]| 0.0;
        let blocks = vec![BlockDef {
            name: "a".into(),
            slots: vec!["a".into()],
            scale: 1e6,
        }];
        let (trace, res) = run_chain(&cfg(10, blocks), &t, &target, vec![5e-10], None).unwrap();
        assert!(trace.iter().all(|r| !r.accepted));
        assert_eq!(res.state.evaluations, 1);
        assert!(res.failure.is_some());
        assert!(res.ensure_trained().is_err());
    }

    #[test]
    fn better_candidates_always_accepted() {
        let t = ParameterTable::new(vec![SlotDef::new("a", 0.0, 100.0)]).unwrap();
        // Strictly increasing density: upward moves always accepted.
        let target = |th: &[f64]| 1e6 * th[0];
        let blocks = vec![BlockDef {
            name: "a".into(),
            slots: vec!["a".into()],
            scale: 0.001,
        }];
        let (trace, _) = run_chain(&cfg(50, blocks), &t, &target, vec![1.0], None).unwrap();
        let mut prev = 1.0;
        for r in &trace {
            if r.proposed[0] > prev {
                assert!(r.accepted);
            }
            if r.accepted {
                prev = r.proposed[0];
            }
        }
    }

    #[test]
    fn single_iteration_single_block() {
        let t = table2();
        let target = |_: &[f64]| 0.0;
        let (trace, _) = run_chain(
            &cfg(1, single_block(&t, 0.1)),
            &t,
            &target,
            vec![0.0, 0.0],
            None,
        )
        .unwrap();
        assert_eq!(trace.len(), 1);
    }

    #[test]
    fn adaptation_direction() {
        let t = table2();
        let flat = |_: &[f64]| 0.0;
        let mut c = cfg(200, two_blocks(0.01));
        c.adapt_window = 10;
        let (_, res) = run_chain(&c, &t, &flat, vec![0.0, 0.0], None).unwrap();
        assert!(res.state.scales.iter().all(|&s| s > 0.01));
    }

    #[test]
    fn adaptation_fixed_point() {
        let t = table2();
        let target = |_: &[f64]| 0.0;
        let mut s = Sampler::new(cfg(10, two_blocks(0.2)), t, &target, vec![0.0, 0.0]).unwrap();
        s.state.window_accepts = vec![3, 3];
        s.state.window_len = 10;
        s.adapt();
        assert!((s.state.scales[0] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn block_coverage_validated() {
        let t = table2();
        let only_a = vec![BlockDef {
            name: "a".into(),
            slots: vec!["a".into()],
            scale: 0.1,
        }];
        assert!(cfg(1, only_a).resolve_blocks(&t).is_err());
        let dup = vec![
            BlockDef {
                name: "x".into(),
                slots: vec!["a".into(), "b".into()],
                scale: 0.1,
            },
            BlockDef {
                name: "y".into(),
                slots: vec!["b".into()],
                scale: 0.1,
            },
        ];
        assert!(cfg(1, dup).resolve_blocks(&t).is_err());
    }

    #[test]
    fn initial_theta_disables_amplitudes() {
        let t = ParameterTable::new(vec![
            SlotDef::new("amp", -1.0, 1.0),
            SlotDef::new("pos", 0.5, 1.0),
            SlotDef::new("ell", 0.0, 2.0),
        ])
        .unwrap();
        assert_eq!(
            initial_theta(&t, ["amp", "pos"]).unwrap(),
            vec![0.0, 0.5, 1.0]
        );
    }

    #[test]
    fn resume_matches_uninterrupted_run() {
        let t = table2();
        let target = |th: &[f64]| -0.5 * (th[0] * th[0] + th[1] * th[1]);
        let c = cfg(40, two_blocks(0.1));
        let (full, _) = run_chain(&c, &t, &target, vec![0.0, 0.0], None).unwrap();

        let mut head = c.clone();
        head.iterations = 15;
        let mut first = Vec::new();
        let r = Sampler::new(head, t.clone(), &target, vec![0.0, 0.0])
            .unwrap()
            .run(None, Some(&mut first))
            .unwrap();
        let mut rest = Vec::new();
        Sampler::resume(c, t, &target, r.state)
            .unwrap()
            .run(None, Some(&mut rest))
            .unwrap();
        first.extend(rest);
        assert_eq!(first, full);
    }
}
