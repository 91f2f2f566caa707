//! The `quantcons` command-line tool.
//!
//! Four subcommands share one set of experiment flags, optionally seeded
//! from a JSON config file (flags win):
//!
//! - `run`: one QC or QCF run, trajectory as CSV.
//! - `mc`: Monte Carlo ensemble statistics with matching bounds, as JSON.
//! - `bounds`: every closed-form bound for the configuration, as JSON.
//! - `design`: optimal quantizer step per level count, as CSV.
//!
//! Exit status is 0 on success, 2 for configuration errors and 3 when a
//! numeric precondition fails (disconnected mean graph, divergent series,
//! step size too large).

mod config;
mod format;

pub use config::{parse_graph, ConfigFile, Experiment, ModelKind, X0Spec};
pub use format::{fmt_num, round_json};

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crate::bounds::{
    default_varepsilon, eps_consensus_lb, i_epsilon, mean_contraction_bound, mse_bound,
    optimize_delta, ratio_approx, state_sup_bound, theta_deviation_bound, zero_rate_lb,
    BoundInputs, BoundReport, LyapunovConstants, MseVariant, SupForm, X0Stats,
};
use crate::consensus::{monte_carlo, run_qc, run_qcf, trial_seed, EnsembleOptions};
use crate::graph::{mean_laplacian, spectral};
use crate::quantize::QuantizerSpec;
use crate::Error;

#[derive(Debug, Parser)]
#[command(
    name = "quantcons",
    version,
    about = "Dithered quantized consensus over random links"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Single QC/QCF run; writes the trajectory CSV.
    Run(Overrides),
    /// Monte Carlo ensemble; writes statistics and bounds as JSON.
    Mc(Overrides),
    /// Evaluates the closed-form bounds; writes JSON.
    Bounds(Overrides),
    /// Optimal step size for each p; writes the design table CSV.
    Design {
        #[command(flatten)]
        overrides: Overrides,
        /// Comma-separated level parameters p.
        #[arg(long = "p-sweep", value_delimiter = ',')]
        p_sweep: Option<Vec<u64>>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Quantizer step Δ.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Level parameter p of a 2p+1 level quantizer (QCF).
    #[arg(long)]
    pub levels: Option<u64>,
    #[arg(long = "a")]
    pub a: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Weight scaling s.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub pfail: Option<f64>,
    /// path:N, ring:N, complete:N, circulant:N:K or an edge-list file.
    #[arg(long)]
    pub graph: Option<String>,
    /// fixed, erasure or gossip.
    #[arg(long)]
    pub model: Option<ModelKind>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Bound on |x0_n|.
    #[arg(long = "b")]
    pub b: Option<f64>,
    /// Comma-separated initial state, or "uniform".
    #[arg(long)]
    pub x0: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotConnected(_) | Error::StepSizeTooLarge { .. } | Error::DivergentSeries(_) => {
                3
            }
            _ => 2,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

pub fn load_experiment(o: &Overrides) -> crate::Result<Experiment> {
    let mut file = match &o.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    file.apply(o);
    Experiment::from_config(&file)
}

/// Parses, runs and writes the output of one invocation.
pub fn execute(cli: Cli) -> Result<(), CliError> {
    let (exp, text) = match cli.command {
        Command::Run(o) => {
            let exp = load_experiment(&o)?;
            let text = cmd_run(&exp)?;
            (exp, text)
        }
        Command::Mc(o) => {
            let exp = load_experiment(&o)?;
            let text = cmd_mc(&exp)?;
            (exp, text)
        }
        Command::Bounds(o) => {
            let exp = load_experiment(&o)?;
            let text = cmd_bounds(&exp)?;
            (exp, text)
        }
        Command::Design { overrides, p_sweep } => {
            let mut exp = load_experiment(&overrides)?;
            if let Some(p) = p_sweep {
                exp.p_sweep = p;
            }
            let text = cmd_design(&exp)?;
            (exp, text)
        }
    };
    let io_err = |e: std::io::Error| CliError {
        code: 2,
        message: e.to_string(),
    };
    match &exp.out {
        Some(path) => std::fs::write(path, text).map_err(io_err),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(io_err),
    }
}

/// Header of the trajectory CSV.
pub const RUN_HEADER: &str = "iteration,x_avg,residual_norm,spread,saturated_flag";
/// Header of the design-table CSV.
pub const DESIGN_HEADER: &str = "p,bit_rate,delta_star,T_star_clamped,T_zero_rate";

/// One run seeded with the ensemble's first trial seed; emits the trajectory.
pub fn cmd_run(exp: &Experiment) -> crate::Result<String> {
    let cfg = exp.run_config();
    let seed = trial_seed(exp.seed, 0);
    let out = if exp.quantizer.is_finite() {
        run_qcf(&cfg, seed)?
    } else {
        run_qc(&cfg, seed)?
    };
    let t = out.trajectory.expect("run config records a trajectory");
    let mut s = String::from(RUN_HEADER);
    s.push('\n');
    for k in 0..t.len() {
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            t.iterations[k],
            fmt_num(t.averages[k]),
            fmt_num(t.residual_norms[k]),
            fmt_num(t.spreads[k]),
            u8::from(t.saturated[k])
        ));
    }
    Ok(s)
}

fn bound_inputs(exp: &Experiment) -> crate::Result<BoundInputs> {
    let mut inputs = BoundInputs::from_model(&exp.model, exp.quantizer.step(), exp.weights)?;
    if let Some(b) = exp.b {
        inputs = inputs.with_b(b);
    }
    if let Some(p) = exp.quantizer.p() {
        inputs = inputs.with_p(p);
    }
    if let Some(e) = exp.epsilon {
        inputs = inputs.with_epsilon(e);
    }
    if exp.x0_explicit {
        let l = mean_laplacian(&exp.model)?;
        inputs = inputs.with_x0_stats(X0Stats::from_state(&exp.x0, &l));
    }
    Ok(inputs)
}

struct Collected {
    bounds: Vec<Value>,
    refused: Vec<Value>,
}

impl Collected {
    fn new() -> Self {
        Self {
            bounds: Vec::new(),
            refused: Vec::new(),
        }
    }

    fn report(&mut self, name: &str, r: crate::Result<BoundReport>) {
        match r {
            Ok(r) => self
                .bounds
                .push(json!({ "name": r.name, "value": r.value, "clamped": r.clamped })),
            Err(e) => self.refuse(name, &e.to_string()),
        }
    }

    fn scalar(&mut self, name: &str, r: crate::Result<f64>) {
        match r {
            Ok(v) => self
                .bounds
                .push(json!({ "name": name, "value": v, "clamped": null })),
            Err(e) => self.refuse(name, &e.to_string()),
        }
    }

    fn refuse(&mut self, name: &str, reason: &str) {
        self.refused.push(json!({ "name": name, "reason": reason }));
    }

    fn as_map(&self) -> Map<String, Value> {
        self.bounds
            .iter()
            .map(|b| {
                let name = b["name"].as_str().unwrap_or_default().to_string();
                (
                    name,
                    json!({ "value": b["value"], "clamped": b["clamped"] }),
                )
            })
            .collect()
    }
}

fn mse_variant(exp: &Experiment) -> MseVariant {
    if exp.weights.delta_schedule().is_some() {
        MseVariant::TimeVarying
    } else {
        MseVariant::General
    }
}

fn excursion_level(exp: &Experiment) -> Option<f64> {
    exp.excursion_level
        .or_else(|| exp.quantizer.p().map(|p| p as f64 * exp.quantizer.step()))
}

/// Ensemble statistics with the matching bounds inlined.
pub fn cmd_mc(exp: &Experiment) -> crate::Result<String> {
    let cfg = exp.run_config();
    let opts = EnsembleOptions {
        epsilon: exp.epsilon,
        lyapunov: None,
    };
    let stats = monte_carlo(&cfg, exp.trials, exp.seed, &opts)?;
    let mut c = Collected::new();
    match bound_inputs(exp) {
        Ok(inputs) => {
            c.report("mse_bound", mse_bound(&inputs, mse_variant(exp)));
            if exp.quantizer.is_finite() {
                if exp.epsilon.is_some() {
                    c.report("eps_consensus_lb", eps_consensus_lb(&inputs));
                }
                if let Some(a) = excursion_level(exp) {
                    c.report(
                        "state_sup_bound_ball",
                        state_sup_bound(a, &inputs, SupForm::Ball),
                    );
                }
            } else if let Some(a) = exp.excursion_level {
                let form = if exp.x0_explicit {
                    SupForm::Concrete
                } else {
                    SupForm::Ball
                };
                c.report("state_sup_bound", state_sup_bound(a, &inputs, form));
            }
        }
        Err(e) => c.refuse("all", &e.to_string()),
    }
    let mut v = serde_json::to_value(&stats).expect("stats serialize");
    let obj = v.as_object_mut().expect("stats is an object");
    if let Some(a) = exp.excursion_level {
        obj.insert("excursion_level".into(), json!(a));
        obj.insert(
            "excursion_frequency".into(),
            json!(stats.excursion_frequency(a)),
        );
    }
    obj.insert("bounds".into(), Value::Object(c.as_map()));
    obj.insert("refused".into(), Value::Array(c.refused));
    Ok(to_json(v))
}

/// Every applicable closed-form bound for the configuration.
pub fn cmd_bounds(exp: &Experiment) -> crate::Result<String> {
    let spec = spectral(&mean_laplacian(&exp.model)?)?;
    let inputs = bound_inputs(exp)?;
    let mut c = Collected::new();
    c.report("mse_bound", mse_bound(&inputs, MseVariant::General));
    c.report("mse_bound_gossip", mse_bound(&inputs, MseVariant::Gossip));
    c.report("mse_bound_refined", mse_bound(&inputs, MseVariant::Refined));
    if exp.weights.delta_schedule().is_some() {
        c.report(
            "mse_bound_time_varying",
            mse_bound(&inputs, MseVariant::TimeVarying),
        );
    }
    match excursion_level(exp) {
        Some(a) => {
            if exp.x0_explicit {
                c.report(
                    "state_sup_bound",
                    state_sup_bound(a, &inputs, SupForm::Concrete),
                );
            }
            c.report(
                "state_sup_bound_ball",
                state_sup_bound(a, &inputs, SupForm::Ball),
            );
        }
        None => c.refuse(
            "state_sup_bound",
            "needs excursion_level or a finite quantizer",
        ),
    }
    c.report("eps_consensus_lb", eps_consensus_lb(&inputs));
    c.report("theta_deviation_bound", theta_deviation_bound(&inputs));
    c.report("zero_rate_lb", zero_rate_lb(&inputs));
    c.scalar("ratio_approx", ratio_approx(&inputs));
    let varepsilon = default_varepsilon(&inputs);
    c.scalar(
        "i_epsilon",
        i_epsilon(&inputs, varepsilon).map(|i| i as f64),
    );
    let limit = 2.0 / (spec.lambda2 + spec.lambda_n);
    if exp.weights.alpha(0) <= limit {
        c.scalar(
            "mean_contraction_bound",
            Ok(mean_contraction_bound(
                spec.lambda2,
                &exp.weights,
                &exp.x0,
                exp.max_iter,
            )),
        );
    } else {
        c.refuse(
            "mean_contraction_bound",
            &Error::StepSizeTooLarge {
                iteration: 0,
                alpha: exp.weights.alpha(0),
                limit,
            }
            .to_string(),
        );
    }
    let lyapunov = match LyapunovConstants::new(&inputs) {
        Ok(l) => json!({
            "c_g": l.c_g, "sum_alpha_sq": l.sum_alpha_sq, "prod": l.prod, "log_prod": l.log_prod
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    let v = json!({
        "inputs": inputs,
        "spectral": {
            "lambda2": spec.lambda2,
            "lambda_n": spec.lambda_n,
            "eigenratio": spec.eigenratio(),
            "connected_on_average": spec.connected_on_average,
        },
        "persistence": exp.weights.persistence_check(),
        "lyapunov": lyapunov,
        "varepsilon": varepsilon,
        "bounds": c.bounds,
        "refused": c.refused,
    });
    Ok(to_json(v))
}

/// Design table over the p sweep, sorted by p.
pub fn cmd_design(exp: &Experiment) -> crate::Result<String> {
    let mut ps = exp.p_sweep.clone();
    if ps.is_empty() {
        return Err(Error::param(
            "p_sweep",
            "give at least one p (--p-sweep 1,2,4)",
        ));
    }
    ps.sort_unstable();
    ps.dedup();
    let inputs = bound_inputs(exp)?;
    inputs.require_b()?;
    inputs.require_epsilon()?;
    let mut s = String::from(DESIGN_HEADER);
    s.push('\n');
    for p in ps {
        let at_p = inputs.clone().with_p(p);
        let d = optimize_delta(&at_p)?;
        let z = zero_rate_lb(&at_p.with_delta(d.delta_star))?;
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            p,
            fmt_num(
                QuantizerSpec::finite(d.delta_star, p)?
                    .bit_rate()
                    .unwrap_or(f64::NAN)
            ),
            fmt_num(d.delta_star),
            fmt_num(d.t_star_clamped),
            fmt_num(z.clamped.unwrap_or(z.value)),
        ));
    }
    Ok(s)
}

fn to_json(v: Value) -> String {
    let mut s = serde_json::to_string_pretty(&round_json(v)).expect("json serialize");
    s.push('\n');
    s
}
