use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::consensus::{RunConfig, WeightSequence};
use crate::graph::{LinkFailureModel, Topology};
use crate::quantize::QuantizerSpec;
use crate::{Error, Result, SimRng};

use super::Overrides;

/// Stream used to draw a uniform random x0, distinct from run streams.
const X0_STREAM: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Fixed,
    Erasure,
    Gossip,
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "erasure" => Ok(Self::Erasure),
            "gossip" => Ok(Self::Gossip),
            other => Err(format!(
                "unknown model `{other}` (expected fixed, erasure or gossip)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum X0Spec {
    Values(Vec<f64>),
    /// `"uniform"`: i.i.d. uniform on [−b, b].
    Named(String),
}

/// Experiment description as read from a JSON config file. Every field is
/// optional so that command-line flags can fill in or override it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub graph: Option<String>,
    pub model: Option<ModelKind>,
    pub p_fail: Option<f64>,
    pub delta: Option<f64>,
    pub levels: Option<u64>,
    pub a: Option<f64>,
    pub tau: Option<f64>,
    pub scale: Option<f64>,
    pub tau_d: Option<f64>,
    pub d0: Option<f64>,
    pub x0: Option<X0Spec>,
    pub b: Option<f64>,
    pub max_iter: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub record_every: Option<usize>,
    pub excursion_level: Option<f64>,
    pub p_sweep: Option<Vec<u64>>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::param("config", format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::param("config", format!("{}: {e}", path.display())))
    }

    pub(crate) fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = o.$field.clone() {
                    self.$field = Some(v);
                }
            )*};
        }
        set!(graph, model, delta, levels, a, tau, scale, b, seed, trials, epsilon, out);
        if let Some(v) = o.pfail {
            self.p_fail = Some(v);
        }
        if let Some(v) = o.iters {
            self.max_iter = Some(v);
        }
        if let Some(v) = &o.x0 {
            self.x0 = Some(parse_x0(v));
        }
    }
}

fn parse_x0(s: &str) -> X0Spec {
    let values: std::result::Result<Vec<f64>, _> =
        s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    match values {
        Ok(v) => X0Spec::Values(v),
        Err(_) => X0Spec::Named(s.to_string()),
    }
}

/// `path:N`, `ring:N`, `complete:N`, `circulant:N:K`, `file:PATH` or a path.
pub fn parse_graph(spec: &str) -> Result<Topology> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::param("graph", format!("`{s}` is not a node count in `{spec}`")))
    };
    match parts.as_slice() {
        ["path", n] => {
            let n = num(n)?;
            if n == 0 {
                return Err(Error::param("graph", "path needs at least one node"));
            }
            Ok(Topology::path(n))
        }
        ["ring", n] => Topology::ring(num(n)?),
        ["complete", n] => {
            let n = num(n)?;
            if n == 0 {
                return Err(Error::param("graph", "complete graph needs at least one node"));
            }
            Ok(Topology::complete(n))
        }
        ["circulant", n, k] => Topology::circulant(num(n)?, num(k)?),
        ["file", rest @ ..] => Topology::read_edge_list(rest.join(":")),
        _ if Path::new(spec).is_file() => Topology::read_edge_list(spec),
        _ => Err(Error::param(
            "graph",
            format!("`{spec}` is neither a generator (path:N, ring:N, complete:N, circulant:N:K) nor a file"),
        )),
    }
}

/// A fully validated experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub model: LinkFailureModel,
    pub weights: WeightSequence,
    pub quantizer: QuantizerSpec,
    pub x0: Vec<f64>,
    /// Whether x0 was given explicitly rather than drawn.
    pub x0_explicit: bool,
    pub b: Option<f64>,
    pub max_iter: usize,
    pub trials: usize,
    pub seed: u64,
    pub epsilon: Option<f64>,
    pub record_every: Option<usize>,
    pub excursion_level: Option<f64>,
    pub p_sweep: Vec<u64>,
    pub out: Option<PathBuf>,
}

impl Experiment {
    pub fn from_config(c: &ConfigFile) -> Result<Self> {
        let graph = c
            .graph
            .as_deref()
            .ok_or_else(|| Error::param("graph", "a graph is required (--graph or config)"))?;
        let topology = parse_graph(graph)?;
        let model = match c.model.unwrap_or(ModelKind::Fixed) {
            ModelKind::Fixed => LinkFailureModel::fixed(topology),
            ModelKind::Erasure => {
                let p = c
                    .p_fail
                    .ok_or_else(|| Error::param("p_fail", "erasure model needs p_fail"))?;
                LinkFailureModel::erasure(topology, p)?
            }
            ModelKind::Gossip => LinkFailureModel::gossip(topology),
        };
        let delta = c.delta.unwrap_or(1.0);
        let quantizer = match c.levels {
            Some(p) => QuantizerSpec::finite(delta, p)?,
            None => QuantizerSpec::unbounded(delta)?,
        };
        let mut weights = WeightSequence::new(c.a.unwrap_or(0.1), c.tau.unwrap_or(1.0))?
            .with_scale(c.scale.unwrap_or(1.0))?;
        match (c.tau_d, c.d0) {
            (None, None) => {}
            (tau_d, d0) => {
                weights = weights.with_delta_schedule(d0.unwrap_or(delta), tau_d.unwrap_or(0.0))?
            }
        }
        if let Some(b) = c.b {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::param("b", format!("must be positive, got {b}")));
            }
        }
        let seed = c.seed.unwrap_or(0);
        let n = model.n_nodes();
        let (x0, x0_explicit) = match &c.x0 {
            Some(X0Spec::Values(v)) => {
                if v.len() != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        got: v.len(),
                    });
                }
                (v.clone(), true)
            }
            Some(X0Spec::Named(s)) if s == "uniform" => (uniform_x0(n, c.b, seed)?, false),
            Some(X0Spec::Named(s)) => {
                return Err(Error::param(
                    "x0",
                    format!("expected a list of numbers or \"uniform\", got `{s}`"),
                ))
            }
            None => (uniform_x0(n, c.b, seed)?, false),
        };
        if c.levels.is_some() && c.b.is_none() {
            return Err(Error::param(
                "b",
                "a finite quantizer (levels) needs the bound b",
            ));
        }
        Ok(Self {
            model,
            weights,
            quantizer,
            x0,
            x0_explicit,
            b: c.b,
            max_iter: c.max_iter.unwrap_or(1000),
            trials: c.trials.unwrap_or(100),
            seed,
            epsilon: c.epsilon,
            record_every: c.record_every,
            excursion_level: c.excursion_level,
            p_sweep: c.p_sweep.clone().unwrap_or_default(),
            out: c.out.clone(),
        })
    }

    pub fn run_config(&self) -> RunConfig {
        let mut cfg = RunConfig::new(
            self.x0.clone(),
            self.model.clone(),
            self.weights,
            self.quantizer,
            self.max_iter,
        );
        if let Some(s) = self.record_every {
            cfg = cfg.with_record_every(s);
        }
        if let Some(b) = self.b {
            cfg = cfg.with_initial_bound(b);
        }
        cfg
    }
}

fn uniform_x0(n: usize, b: Option<f64>, seed: u64) -> Result<Vec<f64>> {
    let b =
        b.ok_or_else(|| Error::param("x0", "x0 is required unless b is given for a uniform draw"))?;
    let mut rng = SimRng::seed_from_u64(seed);
    rng.set_stream(X0_STREAM);
    Ok((0..n).map(|_| rng.random_range(-b..=b)).collect())
}
