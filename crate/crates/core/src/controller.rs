//! The optimization loop: random initialization, model-guided proposals, the
//! convex-region / global-regret switch, and the final local phase.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{
    expected_improvement, global_regret_reduction, maximize_acquisition, AcquisitionContext,
    MaximizerConfig, PesCache, Proposal,
};
use crate::convexity::{pd_sphere_radius, pd_test_point, ConvexRegion, PdTestConfig};
use crate::domain::{Domain, Observation};
use crate::error::{Error, Result};
use crate::gp::{FitOptions, GpModel};
use crate::kernel::KernelFamily;
use crate::local::{bfgs_minimize, build_rescaling, LocalResult};
use crate::optim::{minimize_box, BoxMinimizeOptions};
use crate::regret::{build_support, estimate_global_regret};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    RandomInit,
    BayesAcq,
    GlobalRegretReduction,
    LocalExploit,
    Terminated,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::RandomInit => "RandomInit",
            Phase::BayesAcq => "BayesAcq",
            Phase::GlobalRegretReduction => "GlobalRegretReduction",
            Phase::LocalExploit => "LocalExploit",
            Phase::Terminated => "Terminated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Phase::RandomInit,
            Phase::BayesAcq,
            Phase::GlobalRegretReduction,
            Phase::LocalExploit,
            Phase::Terminated,
        ]
        .into_iter()
        .find(|p| p.as_str() == s)
    }

    /// Whether a trace may step from `self` to `next`.
    pub fn may_precede(self, next: Phase) -> bool {
        use Phase::*;
        match (self, next) {
            (RandomInit, RandomInit | BayesAcq | GlobalRegretReduction | LocalExploit) => true,
            (BayesAcq | GlobalRegretReduction, BayesAcq | GlobalRegretReduction | LocalExploit) => {
                true
            }
            (LocalExploit, LocalExploit | Terminated) => true,
            (RandomInit | BayesAcq | GlobalRegretReduction, Terminated) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BayesAcquisition {
    PesDiscrete,
    #[serde(alias = "ei")]
    ExpectedImprovement,
}

/// `Blossom` runs the full switching logic; `BayesOnly` never leaves the Bayes
/// phase and relies on a stop hook (used by the stopping-rule baselines).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Blossom,
    BayesOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlossomConfig {
    pub target_global_regret: f64,
    /// Initial Latin-hypercube points; `None` means `2(d + 1)`.
    pub n_init: Option<usize>,
    pub pd_epsilon: f64,
    pub n_u: usize,
    /// Radius resolution, normalized units.
    pub h_r: f64,
    pub n_draws: usize,
    pub n_support: usize,
    pub bayes_acquisition: BayesAcquisition,
    /// Cap on objective evaluations, including the local phase.
    pub max_iterations: usize,
    pub grad_tol: f64,
    pub seed: u64,
    pub kernel_family: KernelFamily,
    pub fit_restarts: usize,
    /// Coarse acquisition scan size per dimension.
    pub acquisition_budget_per_dim: usize,
    pub polish_starts: usize,
    pub n_paths: usize,
    pub n_fantasies: usize,
    /// Support size of the entropy-search acquisition.
    pub pes_support: usize,
    /// Evaluation cap for the local phase; `None` uses whatever remains.
    pub local_max_evals: Option<usize>,
    pub strategy: Strategy,
}

impl Default for BlossomConfig {
    fn default() -> Self {
        Self {
            target_global_regret: 1e-2,
            n_init: None,
            pd_epsilon: 0.01,
            n_u: 20,
            h_r: 1e-3,
            n_draws: 400,
            n_support: 100,
            bayes_acquisition: BayesAcquisition::PesDiscrete,
            max_iterations: 200,
            grad_tol: 1e-6,
            seed: 0,
            kernel_family: KernelFamily::Matern52,
            fit_restarts: 4,
            acquisition_budget_per_dim: 2000,
            polish_starts: 5,
            n_paths: 200,
            n_fantasies: 7,
            pes_support: 100,
            local_max_evals: None,
            strategy: Strategy::Blossom,
        }
    }
}

impl BlossomConfig {
    pub fn n_init_for(&self, d: usize) -> usize {
        self.n_init.unwrap_or(2 * (d + 1))
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(self.target_global_regret > 0.0) {
            return bad(format!(
                "target_global_regret must be positive, got {}",
                self.target_global_regret
            ));
        }
        PdTestConfig::new(self.pd_epsilon)?;
        let n_init = self.n_init_for(d);
        if n_init < 2 {
            return bad(format!("n_init must be at least 2, got {n_init}"));
        }
        if self.max_iterations < n_init {
            return bad(format!(
                "max_iterations ({}) must be at least n_init ({n_init})",
                self.max_iterations
            ));
        }
        if self.n_u == 0 || !(self.h_r > 0.0) || !(self.grad_tol > 0.0) {
            return bad("n_u, h_r and grad_tol must be positive".into());
        }
        if self.n_draws < 100 {
            return bad(format!(
                "n_draws must be at least 100, got {}",
                self.n_draws
            ));
        }
        if self.n_support < 4
            || self.n_support % 2 != 0
            || self.pes_support < 4
            || self.pes_support % 2 != 0
        {
            return bad("support sizes must be even and at least 4".into());
        }
        if self.acquisition_budget_per_dim == 0
            || self.n_paths == 0
            || self.n_fantasies == 0
            || self.fit_restarts == 0
        {
            return bad(
                "acquisition budget, n_paths, n_fantasies and fit_restarts must be positive".into(),
            );
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub phase: Phase,
    pub x: Vec<f64>,
    pub y: f64,
    pub incumbent_x: Vec<f64>,
    pub incumbent_y: f64,
    pub region_radius: Option<f64>,
    pub regret_estimate: Option<f64>,
    pub jitter: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TerminationReason {
    RegretTargetMet,
    MaxIterations,
    LocalConverged,
    /// A stop hook ended the run.
    ExternalStop,
    Error,
}

impl TerminationReason {
    pub fn as_str(self) -> &'static str {
        match self {
            TerminationReason::RegretTargetMet => "RegretTargetMet",
            TerminationReason::MaxIterations => "MaxIterations",
            TerminationReason::LocalConverged => "LocalConverged",
            TerminationReason::ExternalStop => "ExternalStop",
            TerminationReason::Error => "Error",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub recommendation: Vec<f64>,
    pub recommended_y: f64,
    pub trace: Vec<StepRecord>,
    pub terminated_reason: TerminationReason,
    pub total_evals: usize,
    /// Model-guided (Bayes-phase or GRR) evaluations.
    pub bayes_iterations: usize,
    pub local: Option<LocalResult>,
    pub error: Option<String>,
}

/// What a stop hook sees before each model-guided evaluation.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub phase: Phase,
    pub model: &'a GpModel,
    pub proposal: &'a Proposal,
    /// Region excluded from the proposal (global-regret-reduction steps only).
    pub region: Option<&'a ConvexRegion>,
    pub incumbent_y: f64,
    pub trace: &'a [StepRecord],
}

/// Per-iteration hook; returning `true` ends the run before the proposal is evaluated.
pub trait StopHook {
    fn should_stop(&mut self, view: &IterationView) -> bool;
}

impl<F: FnMut(&IterationView) -> bool> StopHook for F {
    fn should_stop(&mut self, view: &IterationView) -> bool {
        self(view)
    }
}

/// Minimizer of the posterior mean: a Latin-hypercube scan plus the data points,
/// then gradient polish of the five best. Ties keep the earliest candidate.
pub fn posterior_minimum(model: &GpModel, budget: usize, seed: u64) -> Vec<f64> {
    let domain = model.domain();
    let mut rng = rng::rng_for(seed, &[0x706d_696e]);
    let mut candidates: Vec<Vec<f64>> = model.data().iter().map(|o| o.x.clone()).collect();
    candidates.extend(rng::latin_hypercube(domain, budget.max(1), &mut rng));
    let mut scored: Vec<(f64, usize)> = candidates
        .iter()
        .enumerate()
        .map(|(i, x)| (model.predict_mean(x), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let opts = BoxMinimizeOptions {
        max_iter: 100,
        gtol: 1e-10,
        ftol: 1e-14,
    };
    let mut best = (candidates[scored[0].1].clone(), scored[0].0);
    for &(_, i) in scored.iter().take(5) {
        if let Some(r) = minimize_box(
            |x| Some(model.mean_and_gradient(x)),
            &candidates[i],
            domain.lower(),
            domain.upper(),
            opts,
        ) {
            if r.f < best.1 {
                best = (r.x, r.f);
            }
        }
    }
    best.0
}

struct Recorder<'a> {
    objective: &'a mut dyn FnMut(&[f64]) -> f64,
    start: Instant,
    data: Vec<Observation>,
    trace: Vec<StepRecord>,
    best: Option<(Vec<f64>, f64)>,
}

impl Recorder<'_> {
    fn evaluate(
        &mut self,
        x: &[f64],
        phase: Phase,
        radius: Option<f64>,
        regret: Option<f64>,
        jitter: f64,
    ) -> f64 {
        let y = (self.objective)(x);
        if y.is_finite() && self.best.as_ref().is_none_or(|(_, b)| y < *b) {
            self.best = Some((x.to_vec(), y));
        }
        let (ix, iy) = self.best.clone().unwrap_or((x.to_vec(), f64::NAN));
        self.trace.push(StepRecord {
            iteration: self.trace.len(),
            phase,
            x: x.to_vec(),
            y,
            incumbent_x: ix,
            incumbent_y: iy,
            region_radius: radius,
            regret_estimate: regret,
            jitter,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        });
        y
    }

    /// Evaluates a point that will join the model's data.
    fn observe(
        &mut self,
        x: &[f64],
        phase: Phase,
        radius: Option<f64>,
        regret: Option<f64>,
        jitter: f64,
    ) -> Result<()> {
        let y = self.evaluate(x, phase, radius, regret, jitter);
        if !y.is_finite() {
            return Err(Error::NonFiniteObjective(x.to_vec()));
        }
        self.data.push(Observation::new(x.to_vec(), y));
        Ok(())
    }
}

pub fn run(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    domain: &Domain,
    cfg: &BlossomConfig,
) -> Result<RunResult> {
    run_with_hook(objective, domain, cfg, None)
}

/// Runs the optimizer. Configuration errors are returned as `Err`; failures
/// during the run end it with [`TerminationReason::Error`] and a partial trace.
pub fn run_with_hook(
    objective: &mut dyn FnMut(&[f64]) -> f64,
    domain: &Domain,
    cfg: &BlossomConfig,
    mut hook: Option<&mut dyn StopHook>,
) -> Result<RunResult> {
    let d = domain.dim();
    cfg.validate(d)?;
    let pd_cfg = PdTestConfig::new(cfg.pd_epsilon)?;
    let mut rec = Recorder {
        objective,
        start: Instant::now(),
        data: Vec::new(),
        trace: Vec::new(),
        best: None,
    };
    let mut bayes_iterations = 0;

    let finish = |rec: Recorder,
                  reason: TerminationReason,
                  local: Option<LocalResult>,
                  error: Option<String>,
                  bayes_iterations: usize| {
        let (recommendation, recommended_y) = match &local {
            Some(l) if l.y_final.is_finite() => (l.x_final.clone(), l.y_final),
            _ => rec.best.clone().unwrap_or((domain.center(), f64::NAN)),
        };
        RunResult {
            recommendation,
            recommended_y,
            total_evals: rec.trace.len(),
            trace: rec.trace,
            terminated_reason: reason,
            bayes_iterations,
            local,
            error,
        }
    };

    let mut init_rng = rng::rng_for(cfg.seed, &[0x696e_6974]);
    let init = rng::latin_hypercube(domain, cfg.n_init_for(d), &mut init_rng);
    for x in init.iter().take(cfg.max_iterations) {
        if let Err(e) = rec.observe(x, Phase::RandomInit, None, None, 0.0) {
            return Ok(finish(
                rec,
                TerminationReason::Error,
                None,
                Some(e.to_string()),
                0,
            ));
        }
    }

    let mut warm = None;
    let mut round: u64 = 0;
    while rec.trace.len() < cfg.max_iterations {
        round += 1;
        let seed = rng::derive_seed(cfg.seed, &[round]);
        let fit = FitOptions {
            family: cfg.kernel_family,
            restarts: cfg.fit_restarts,
            warm_start: warm.clone(),
            ..FitOptions::default()
        };
        let model = match GpModel::fit(rec.data.clone(), domain.clone(), seed, &fit) {
            Ok((m, _)) => m,
            Err(e) => {
                return Ok(finish(
                    rec,
                    TerminationReason::Error,
                    None,
                    Some(e.to_string()),
                    bayes_iterations,
                ))
            }
        };
        warm = Some(model.kernel().clone());
        let jitter = model.jitter();

        let step = match choose_step(&model, cfg, &pd_cfg, rec.best.as_ref().map(|b| b.1), seed) {
            Ok(s) => s,
            Err(e) => {
                return Ok(finish(
                    rec,
                    TerminationReason::Error,
                    None,
                    Some(e.to_string()),
                    bayes_iterations,
                ))
            }
        };
        match step {
            Step::Local {
                center,
                radius,
                regret,
            } => {
                let problem = build_rescaling(&model, &center);
                let remaining = cfg.max_iterations - rec.trace.len();
                let budget = cfg.local_max_evals.map_or(remaining, |m| m.min(remaining));
                let mut first = true;
                let mut f = |x: &[f64]| {
                    let (r, g) = if first {
                        (Some(radius), Some(regret))
                    } else {
                        (None, None)
                    };
                    first = false;
                    rec.evaluate(x, Phase::LocalExploit, r, g, jitter)
                };
                let result = bfgs_minimize(&mut f, &problem, domain, &center, cfg.grad_tol, budget);
                let reason = if result.converged {
                    TerminationReason::LocalConverged
                } else {
                    TerminationReason::RegretTargetMet
                };
                return Ok(finish(rec, reason, Some(result), None, bayes_iterations));
            }
            Step::Propose {
                phase,
                proposal,
                region,
                radius,
                regret,
            } => {
                let incumbent_y = rec.best.as_ref().map_or(f64::NAN, |b| b.1);
                if let Some(h) = hook.as_deref_mut() {
                    let view = IterationView {
                        iteration: rec.trace.len(),
                        phase,
                        model: &model,
                        proposal: &proposal,
                        region: region.as_ref(),
                        incumbent_y,
                        trace: &rec.trace,
                    };
                    if h.should_stop(&view) {
                        return Ok(finish(
                            rec,
                            TerminationReason::ExternalStop,
                            None,
                            None,
                            bayes_iterations,
                        ));
                    }
                }
                let x = deduplicate(proposal.x, &rec.data, domain, region.as_ref(), seed);
                bayes_iterations += 1;
                if let Err(e) = rec.observe(&x, phase, radius, regret, jitter) {
                    return Ok(finish(
                        rec,
                        TerminationReason::Error,
                        None,
                        Some(e.to_string()),
                        bayes_iterations,
                    ));
                }
            }
        }
    }
    Ok(finish(
        rec,
        TerminationReason::MaxIterations,
        None,
        None,
        bayes_iterations,
    ))
}

enum Step {
    Local {
        center: Vec<f64>,
        radius: f64,
        regret: f64,
    },
    Propose {
        phase: Phase,
        proposal: Proposal,
        region: Option<ConvexRegion>,
        radius: Option<f64>,
        regret: Option<f64>,
    },
}

fn choose_step(
    model: &GpModel,
    cfg: &BlossomConfig,
    pd_cfg: &PdTestConfig,
    incumbent: Option<f64>,
    seed: u64,
) -> Result<Step> {
    let d = model.domain().dim();
    let maximizer = MaximizerConfig {
        budget: cfg.acquisition_budget_per_dim * d,
        polish_starts: cfg.polish_starts,
        polish_evals_per_dim: 40,
    };
    let mut ctx = AcquisitionContext::new(model);
    if let Some(b) = incumbent {
        ctx.incumbent_best = b;
    }
    let mut radius = None;
    let mut regret = None;
    let mut centre = None;

    if cfg.strategy == Strategy::Blossom {
        let x_min = posterior_minimum(model, 500 * d, seed);
        if pd_test_point(model, &x_min, pd_cfg, seed) {
            let region = pd_sphere_radius(model, &x_min, cfg.n_u, cfg.h_r, pd_cfg, seed)?;
            radius = Some(region.radius);
            if !region.is_empty() {
                let est = estimate_global_regret(model, &region, cfg.n_draws, cfg.n_support, seed)?;
                regret = Some(est.value);
                if est.value <= cfg.target_global_regret {
                    return Ok(Step::Local {
                        center: x_min,
                        radius: region.radius,
                        regret: est.value,
                    });
                }
                let grr_ctx = AcquisitionContext {
                    region: Some(&region),
                    expected_inner_min: Some(est.mu_i),
                    inner_sd: Some(est.sigma_i),
                    ..ctx
                };
                let proposal = maximize_acquisition(
                    |x| global_regret_reduction(&grr_ctx, x).unwrap_or(0.0),
                    model,
                    Some(&region),
                    maximizer,
                    seed,
                );
                match proposal {
                    Ok(p) => {
                        return Ok(Step::Propose {
                            phase: Phase::GlobalRegretReduction,
                            proposal: p,
                            region: Some(region),
                            radius,
                            regret,
                        })
                    }
                    // every candidate lies inside the region: the regret target is
                    // not met, so keep exploring with the unrestricted acquisition
                    Err(Error::NoFeasibleProposal) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        centre = Some(x_min);
    }

    let proposal = match cfg.bayes_acquisition {
        BayesAcquisition::ExpectedImprovement => maximize_acquisition(
            |x| expected_improvement(&ctx, x),
            model,
            None,
            maximizer,
            seed,
        )?,
        BayesAcquisition::PesDiscrete => {
            let centre = centre.unwrap_or_else(|| posterior_minimum(model, 500 * d, seed));
            let anchor = ConvexRegion {
                center: centre,
                radius: 0.0,
                directions_tested: 0,
                resolution: cfg.h_r,
            };
            let support = build_support(
                model,
                &anchor,
                cfg.pes_support,
                rng::derive_seed(seed, &[0x7065]),
            )?;
            let cache = PesCache::new(model, support.points, cfg.n_paths, cfg.n_fantasies, seed)?;
            maximize_acquisition(|x| cache.value(model, x), model, None, maximizer, seed)?
        }
    };
    Ok(Step::Propose {
        phase: Phase::BayesAcq,
        proposal,
        region: None,
        radius,
        regret,
    })
}

/// Replaces a proposal that coincides with an existing observation by a random
/// point (outside `region`, if given), keeping the kernel matrix well posed.
fn deduplicate(
    x: Vec<f64>,
    data: &[Observation],
    domain: &Domain,
    region: Option<&ConvexRegion>,
    seed: u64,
) -> Vec<f64> {
    let clash = |p: &[f64]| {
        data.iter()
            .any(|o| domain.normalized_distance(&o.x, p) < 1e-9)
    };
    if !clash(&x) {
        return x;
    }
    let mut rng = rng::rng_for(seed, &[0x6475_70]);
    let mut candidate = x.clone();
    for _ in 0..10_000 {
        candidate = (0..domain.dim())
            .map(|k| domain.lower()[k] + domain.width(k) * rng.random::<f64>())
            .collect();
        if !clash(&candidate)
            && region.is_none_or(|r| r.is_empty() || !r.contains(domain, &candidate))
        {
            break;
        }
    }
    candidate
}
