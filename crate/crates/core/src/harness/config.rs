//! Run configuration: a TOML file with `[run]`, `[model]`, `[thames]`,
//! `[mix_thames]` and `[sampler]` tables, every key optional.

use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::estimators::{Method, DEFAULT_ALPHA_TRUNC, DEFAULT_N_VOL};
use crate::par::Execution;
use crate::targets::{
    GaussianConjugateModel, GaussianMixturePriorModel, MixturePrior, RosenbrockModel, ScaledModel, TargetModel,
    UniformCubeModel,
};

pub const DEFAULT_ALPHA_GRID: [f64; 7] = [0.10, 0.25, 0.50, 0.75, 0.80, 0.90, 0.99];

/// Model name plus optional parameter overrides. Unset fields take the
/// per-model defaults documented on [`ModelConfig::build`].
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    pub d: Option<usize>,
    pub n: Option<usize>,
    /// Data-generating parameter (μ or θ).
    pub true_value: Option<Vec<f64>>,
    /// Gaussian: prior variance s.
    pub prior_scale: Option<f64>,
    /// Mixture: prior weight, means, and isotropic variances.
    pub omega: Option<f64>,
    pub xi1: Option<Vec<f64>>,
    pub xi2: Option<Vec<f64>>,
    pub s1: Option<f64>,
    pub s2: Option<f64>,
    pub sigma_x: Option<f64>,
    /// Rosenbrock: noise scale and constants (broadcast over d − 1).
    pub sigma: Option<f64>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Adds a constant to the log-likelihood.
    pub log_scale: Option<f64>,
}

impl ModelConfig {
    pub fn named(name: &str) -> Self {
        Self { name: name.to_string(), ..Self::default() }
    }

    /// Instantiates the model, simulating its data from `data_seed`.
    ///
    /// * `gaussian`: d = 2, n = 20, s = 1, μ = (1, …, 1).
    /// * `mixture`: d = 2, n = 20, ω = ½, ξ = ∓(1, …, 1), S_k = 0.25 I,
    ///   Σ_X = 400 I, μ = 0.
    /// * `rosenbrock`: d = 2, n = 20 (200 for d > 2), σ = 1, a = 1, b = 10, θ = 0.
    /// * `uniform`: d = 2.
    pub fn build(&self, data_seed: u64) -> Result<Box<dyn TargetModel>> {
        let d = self.d.unwrap_or(2);
        if d == 0 {
            return Err(Error::Config("model dimension must be positive".into()));
        }
        let truth = |default: f64| -> Result<Vec<f64>> {
            let v = self.true_value.clone().unwrap_or_else(|| vec![default; d]);
            if v.len() != d {
                return Err(Error::Config(format!("true_value has length {}, expected {d}", v.len())));
            }
            Ok(v)
        };
        let model: Box<dyn TargetModel> = match self.name.as_str() {
            "gaussian" => Box::new(GaussianConjugateModel::simulate(
                d,
                self.n.unwrap_or(20),
                self.prior_scale.unwrap_or(1.0),
                &truth(1.0)?,
                data_seed,
            )?),
            "mixture" => {
                let base = MixturePrior::separated(d);
                let eye = DMatrix::<f64>::identity(d, d);
                let prior = MixturePrior {
                    omega: self.omega.unwrap_or(base.omega),
                    xi: [
                        self.xi1.clone().unwrap_or(base.xi[0].clone()),
                        self.xi2.clone().unwrap_or(base.xi[1].clone()),
                    ],
                    s: [
                        self.s1.map(|s| &eye * s).unwrap_or(base.s[0].clone()),
                        self.s2.map(|s| &eye * s).unwrap_or(base.s[1].clone()),
                    ],
                    sigma_x: self.sigma_x.map(|s| &eye * s).unwrap_or(base.sigma_x),
                };
                Box::new(GaussianMixturePriorModel::simulate(self.n.unwrap_or(20), &truth(0.0)?, prior, data_seed)?)
            }
            "rosenbrock" => {
                let n = self.n.unwrap_or(if d > 2 { 200 } else { 20 });
                let sigma = self.sigma.unwrap_or(1.0);
                let a = vec![self.a.unwrap_or(1.0); d - 1];
                let b = vec![self.b.unwrap_or(10.0); d - 1];
                let m = RosenbrockModel::simulate_with(n, &truth(0.0)?, a, b, sigma, data_seed)?;
                Box::new(m)
            }
            "uniform" => Box::new(UniformCubeModel::new(d)?),
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        Ok(match self.log_scale {
            Some(c) if c != 0.0 => Box::new(ScaledModel::new(model, c)),
            _ => model,
        })
    }
}

/// Truncation level for Mix-THAMES.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    Fixed(f64),
    /// Chosen per replication by the Kolmogorov-distance rule.
    Ks,
}

/// Source of posterior draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SamplerKind {
    Exact,
    Rwm { step_scale: f64, thin: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub methods: Vec<Method>,
    /// Draws per half; each replication samples 2T.
    pub t: usize,
    pub alpha: f64,
    pub k: f64,
    pub reps: usize,
    pub base_seed: u64,
    pub n_vol: usize,
    pub thames_radius: Option<f64>,
    pub truncation: Truncation,
    pub sampler: SamplerKind,
    /// Uniform draws for the second-moment proxy.
    pub n_mc: usize,
    pub alphas: Vec<f64>,
    pub out: Option<PathBuf>,
    pub exec: Execution,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::named("gaussian"),
            methods: vec![Method::Ecmle],
            t: 10_000,
            alpha: 0.75,
            k: crate::covering::DEFAULT_SUBSAMPLE_RATE,
            reps: 1,
            base_seed: 1,
            n_vol: DEFAULT_N_VOL,
            thames_radius: None,
            truncation: Truncation::Fixed(DEFAULT_ALPHA_TRUNC),
            sampler: SamplerKind::Exact,
            n_mc: 10_000,
            alphas: DEFAULT_ALPHA_GRID.to_vec(),
            out: None,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    #[serde(default)]
    run: RunSection,
    model: Option<ModelConfig>,
    #[serde(default)]
    thames: ThamesSection,
    #[serde(default)]
    mix_thames: MixSection,
    #[serde(default)]
    sampler: SamplerSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    methods: Option<Vec<String>>,
    #[serde(rename = "T")]
    t: Option<usize>,
    alpha: Option<f64>,
    k: Option<f64>,
    reps: Option<usize>,
    seed: Option<u64>,
    n_mc: Option<usize>,
    alphas: Option<Vec<f64>>,
    out: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThamesSection {
    radius: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixSection {
    /// "fixed" or "ks".
    truncation: Option<String>,
    alpha_trunc: Option<f64>,
    n_vol: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplerSection {
    /// "exact" or "rwm".
    kind: Option<String>,
    step_scale: Option<f64>,
    thin: Option<usize>,
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let mut cfg = RunConfig::default();
        if let Some(m) = file.model {
            cfg.model = m;
        }
        let r = file.run;
        if let Some(ms) = r.methods {
            cfg.methods = ms.iter().map(|s| s.parse()).collect::<Result<_>>()?;
        }
        cfg.t = r.t.unwrap_or(cfg.t);
        cfg.alpha = r.alpha.unwrap_or(cfg.alpha);
        cfg.k = r.k.unwrap_or(cfg.k);
        cfg.reps = r.reps.unwrap_or(cfg.reps);
        cfg.base_seed = r.seed.unwrap_or(cfg.base_seed);
        cfg.n_mc = r.n_mc.unwrap_or(cfg.n_mc);
        cfg.alphas = r.alphas.unwrap_or(cfg.alphas);
        cfg.out = r.out;
        cfg.thames_radius = file.thames.radius;
        let mx = file.mix_thames;
        cfg.n_vol = mx.n_vol.unwrap_or(cfg.n_vol);
        cfg.truncation = match mx.truncation.as_deref() {
            None | Some("fixed") => Truncation::Fixed(mx.alpha_trunc.unwrap_or(DEFAULT_ALPHA_TRUNC)),
            Some("ks") => Truncation::Ks,
            Some(other) => return Err(Error::Config(format!("unknown truncation rule `{other}`"))),
        };
        let s = file.sampler;
        cfg.sampler = match s.kind.as_deref() {
            None | Some("exact") => SamplerKind::Exact,
            Some("rwm") => SamplerKind::Rwm { step_scale: s.step_scale.unwrap_or(0.25), thin: s.thin.unwrap_or(1) },
            Some(other) => return Err(Error::Config(format!("unknown sampler `{other}`"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in (0, 1)")))
            }
        };
        if self.t < 100 {
            return Err(Error::Config(format!("T = {} is below the minimum of 100", self.t)));
        }
        if self.reps == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        open("alpha", self.alpha)?;
        open("k", self.k)?;
        for &a in &self.alphas {
            open("alpha", a)?;
        }
        if let Truncation::Fixed(a) = self.truncation {
            open("alpha_trunc", a)?;
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods requested".into()));
        }
        if self.n_vol < 1000 || self.n_mc < 1000 {
            return Err(Error::Config("n_vol and n_mc must be at least 1000".into()));
        }
        if let SamplerKind::Rwm { step_scale, thin } = self.sampler {
            if !(step_scale > 0.0) || thin == 0 {
                return Err(Error::Config("RWM step scale and thinning must be positive".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_file() {
        let text = r#"
[run]
methods = ["ecmle", "THAMES", "mix_thames"]
T = 2000
alpha = 0.8
reps = 3
seed = 9

[model]
name = "mixture"
d = 2
sigma_x = 100.0

[mix_thames]
truncation = "ks"
n_vol = 20000

[sampler]
kind = "rwm"
step_scale = 0.5
"#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.methods, vec![Method::Ecmle, Method::Thames, Method::MixThames]);
        assert_eq!(cfg.t, 2000);
        assert_eq!(cfg.truncation, Truncation::Ks);
        assert_eq!(cfg.n_vol, 20_000);
        assert_eq!(cfg.sampler, SamplerKind::Rwm { step_scale: 0.5, thin: 1 });
        assert_eq!(cfg.model.sigma_x, Some(100.0));
        assert!(cfg.model.build(1).is_ok());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(RunConfig::from_toml_str("[run]\nT = 10"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[run]\nalpha = 1.0"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[run]\nmethods = [\"bridge\"]"), Err(Error::Config(_))));
        assert!(matches!(RunConfig::from_toml_str("[run]\nbogus = 1"), Err(Error::Config(_))));
        assert!(ModelConfig::named("nope").build(0).is_err());
    }

    #[test]
    fn model_defaults() {
        for name in ["gaussian", "mixture", "rosenbrock", "uniform"] {
            let m = ModelConfig::named(name).build(1).unwrap();
            assert_eq!(m.dim(), 2);
            assert!(m.exact_log_evidence().is_some());
        }
        let r = ModelConfig { d: Some(5), ..ModelConfig::named("rosenbrock") }.build(1).unwrap();
        assert_eq!(r.n_data(), 200);
        let s = ModelConfig { log_scale: Some(100.0), ..ModelConfig::named("gaussian") }.build(1).unwrap();
        let g = ModelConfig::named("gaussian").build(1).unwrap();
        assert_eq!(s.exact_log_evidence().unwrap(), g.exact_log_evidence().unwrap() + 100.0);
    }
}
