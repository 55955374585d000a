use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::covering::{build_covering, CoveringConfig};
use crate::draws::{fmt_f64, DrawSet};
use crate::error::{Error, Result};
use crate::estimators::{
    ecmle, ecmle_symmetrized, gd_gaussian, gd_truncated_gaussian, hme_newton_raftery, ks_truncation_level,
    mix_thames, thames, EvidenceEstimate, Method,
};
use crate::geometry::UnitInterval;
use crate::hpd::{partition_halves, split};
use crate::par::map_indices;
use crate::rng::seeded;
use crate::targets::{rwm_sampler, RwmConfig, TargetModel};

use super::config::{RunConfig, SamplerKind, Truncation};

pub const SAMPLER_SEED_OFFSET: u64 = 1000;
pub const COVERING_SEED_OFFSET: u64 = 250_000;
pub const VOLUME_SEED_OFFSET: u64 = 500_000;
pub const PROXY_SEED_OFFSET: u64 = 750_000;

/// One estimator call.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub model: String,
    pub d: usize,
    pub n_data: usize,
    pub method: Method,
    pub rep: usize,
    pub seed: u64,
    pub t: usize,
    pub alpha: f64,
    /// `ok`, or the error that stopped this call.
    pub status: String,
    pub log_z_hat: Option<f64>,
    pub exact_log_z: Option<f64>,
    pub abs_error: Option<f64>,
    pub log_se: Option<f64>,
    pub n_ellipsoids: Option<usize>,
    pub coverage_fraction: Option<f64>,
    pub n_inside: Option<usize>,
    pub n_eval: Option<usize>,
    pub support_volume: Option<f64>,
    /// Not written to the results file; see [`write_timing_csv`].
    pub wall_time_s: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

pub const RESULT_COLUMNS: [&str; 18] = [
    "model",
    "d",
    "n_data",
    "method",
    "rep",
    "seed",
    "T",
    "alpha",
    "status",
    "log_z_hat",
    "exact_log_z",
    "abs_error",
    "log_se",
    "n_ellipsoids",
    "coverage_fraction",
    "n_inside",
    "n_eval",
    "support_volume",
];

/// Sampler seed of replication `rep`.
pub fn sampler_seed(base_seed: u64, rep: usize) -> u64 {
    base_seed.wrapping_add(SAMPLER_SEED_OFFSET).wrapping_add(rep as u64)
}

/// 2T posterior draws for one replication.
pub fn draw_sample(model: &dyn TargetModel, cfg: &RunConfig, seed: u64) -> Result<DrawSet> {
    let mut rng = seeded(seed);
    match cfg.sampler {
        SamplerKind::Exact => model.sample_posterior(2 * cfg.t, &mut rng),
        SamplerKind::Rwm { step_scale, thin } => {
            let init = model.sample_posterior(1, &mut rng)?;
            let rcfg = RwmConfig { step_scale, thin, ..RwmConfig::default() };
            let f = |t: &[f64]| model.log_unnorm_posterior(t);
            Ok(rwm_sampler(&f, init.draw(0), &rcfg, 2 * cfg.t, &mut rng)?.draws)
        }
    }
}

fn covering_config(cfg: &RunConfig, alpha: f64, seed: u64) -> Result<CoveringConfig> {
    let mut c = CoveringConfig::new(UnitInterval::open(alpha)?, seed.wrapping_add(COVERING_SEED_OFFSET))
        .with_subsample_rate(UnitInterval::open(cfg.k)?)?;
    c.exec = cfg.exec;
    Ok(c)
}

/// Runs `method` on one replication's draws.
pub fn run_method(
    method: Method,
    model: &dyn TargetModel,
    draws: &DrawSet,
    cfg: &RunConfig,
    alpha: f64,
    seed: u64,
) -> Result<EvidenceEstimate> {
    let logdens = |t: &[f64]| model.log_unnorm_posterior(t);
    let (build, eval) = split(draws)?;
    match method {
        Method::Ecmle => {
            let ccfg = covering_config(cfg, alpha, seed)?;
            let part = partition_halves(build, eval, ccfg.alpha)?;
            let union = build_covering(&part, &ccfg, &logdens)?;
            ecmle(&part, &union, cfg.exec)
        }
        Method::EcmleSymmetrized => ecmle_symmetrized(draws, &covering_config(cfg, alpha, seed)?, &logdens),
        Method::Hme => hme_newton_raftery(draws, &|t: &[f64]| model.log_likelihood(t)),
        Method::GdGaussian => gd_gaussian(&eval, &build),
        Method::GdTruncgauss => {
            let r = cfg.thames_radius.unwrap_or(((draws.dim() + 1) as f64).sqrt());
            gd_truncated_gaussian(&eval, &build, r)
        }
        Method::Thames => thames(&eval, &build, cfg.thames_radius),
        Method::MixThames => {
            let a = match cfg.truncation {
                Truncation::Fixed(a) => UnitInterval::open(a)?,
                Truncation::Ks => ks_truncation_level(&build)?,
            };
            let mut rng = seeded(seed.wrapping_add(VOLUME_SEED_OFFSET));
            mix_thames(&eval, &build, &logdens, cfg.thames_radius, a, cfg.n_vol, &mut rng)
        }
    }
}

fn status_of(e: &Error) -> String {
    // keep the CSV one field per value
    e.to_string().replace([',', '\n', '"'], " ")
}

fn replication_rows(model: &dyn TargetModel, cfg: &RunConfig, alpha: f64, rep: usize) -> Vec<ResultRow> {
    let seed = sampler_seed(cfg.base_seed, rep);
    let exact = model.exact_log_evidence();
    let template = ResultRow {
        model: model.name().to_string(),
        d: model.dim(),
        n_data: model.n_data(),
        method: Method::Ecmle,
        rep,
        seed,
        t: cfg.t,
        alpha,
        status: "ok".into(),
        log_z_hat: None,
        exact_log_z: exact,
        abs_error: None,
        log_se: None,
        n_ellipsoids: None,
        coverage_fraction: None,
        n_inside: None,
        n_eval: None,
        support_volume: None,
        wall_time_s: 0.0,
    };
    let draws = match draw_sample(model, cfg, seed) {
        Ok(d) => d,
        Err(e) => {
            return cfg
                .methods
                .iter()
                .map(|&m| ResultRow { method: m, status: status_of(&e), ..template.clone() })
                .collect()
        }
    };
    cfg.methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let res = run_method(method, model, &draws, cfg, alpha, seed);
            let wall_time_s = start.elapsed().as_secs_f64();
            let mut row = ResultRow { method, wall_time_s, ..template.clone() };
            match res {
                Ok(est) => {
                    row.log_z_hat = Some(est.log_z);
                    row.abs_error = exact.map(|z| (est.log_z - z).abs());
                    row.log_se = Some(est.log_se).filter(|v| v.is_finite());
                    row.n_ellipsoids = est.diagnostics.get("n_ellipsoids").map(|v| *v as usize);
                    row.coverage_fraction = est.diagnostics.get("coverage").copied();
                    row.n_inside = Some(est.n_inside);
                    row.n_eval = Some(est.n_eval);
                    row.support_volume = est.support_volume;
                }
                Err(e) => row.status = status_of(&e),
            }
            row
        })
        .collect()
}

/// Every requested method on `cfg.reps` replications at `cfg.alpha`.
///
/// The dataset is simulated once from `base_seed`; replication `i` draws with
/// seed `base_seed + 1000 + i`. Replications run in parallel under
/// `cfg.exec` and rows come back ordered by (replication, method).
pub fn run_replications(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let model = cfg.model.build(cfg.base_seed)?;
    Ok(rows_for_alpha(model.as_ref(), cfg, cfg.alpha))
}

fn rows_for_alpha(model: &dyn TargetModel, cfg: &RunConfig, alpha: f64) -> Vec<ResultRow> {
    map_indices(cfg.reps, cfg.exec, |rep| replication_rows(model, cfg, alpha, rep)).into_iter().flatten().collect()
}

/// [`run_replications`] at each level in `alphas`, rows ordered by (α, replication).
pub fn sweep_alpha(cfg: &RunConfig, alphas: &[f64]) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    for &a in alphas {
        UnitInterval::open(a).map_err(|_| Error::Config(format!("alpha = {a} must lie in (0, 1)")))?;
    }
    let model = cfg.model.build(cfg.base_seed)?;
    Ok(alphas.iter().flat_map(|&a| rows_for_alpha(model.as_ref(), cfg, a)).collect())
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

fn opt_n(v: Option<usize>) -> String {
    v.map(|n| n.to_string()).unwrap_or_default()
}

/// Results CSV: one comment line naming the columns, then a header row and
/// one line per row. Wall times are left out so the bytes depend only on the
/// configuration.
pub fn write_results_csv<W: Write>(rows: &[ResultRow], mut w: W) -> Result<()> {
    writeln!(w, "# ecmle results: {}", RESULT_COLUMNS.join(","))?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(RESULT_COLUMNS)?;
    for r in rows {
        wtr.write_record([
            r.model.clone(),
            r.d.to_string(),
            r.n_data.to_string(),
            r.method.to_string(),
            r.rep.to_string(),
            r.seed.to_string(),
            r.t.to_string(),
            fmt_f64(r.alpha),
            r.status.clone(),
            opt(r.log_z_hat),
            opt(r.exact_log_z),
            opt(r.abs_error),
            opt(r.log_se),
            opt_n(r.n_ellipsoids),
            opt(r.coverage_fraction),
            opt_n(r.n_inside),
            opt_n(r.n_eval),
            opt(r.support_volume),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Per-call wall times, keyed like the results file.
pub fn write_timing_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["model", "method", "rep", "alpha", "wall_time_s"])?;
    for r in rows {
        wtr.write_record([r.model.clone(), r.method.to_string(), r.rep.to_string(), fmt_f64(r.alpha), fmt_f64(r.wall_time_s)])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ModelConfig;
    use crate::par::Execution;

    fn small(methods: Vec<Method>) -> RunConfig {
        RunConfig { methods, t: 2000, reps: 2, ..RunConfig::default() }
    }

    #[test]
    fn single_replication_single_row() {
        let cfg = RunConfig { reps: 1, ..small(vec![Method::Ecmle]) };
        let rows = run_replications(&cfg).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].is_ok());
        assert!(rows[0].log_z_hat.unwrap().is_finite());
        assert!(rows[0].wall_time_s > 0.0);
        assert_eq!(rows[0].seed, 1001);
    }

    #[test]
    fn all_methods_run_and_errors_stay_local() {
        let cfg = small(Method::ALL.to_vec());
        let rows = run_replications(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * Method::ALL.len());
        assert!(rows.iter().all(|r| r.is_ok()), "{rows:?}");

        // a radius so small nothing lands inside: THAMES fails, the rest carry on
        let cfg = RunConfig { thames_radius: Some(1e-6), ..small(vec![Method::Thames, Method::Ecmle]) };
        let rows = run_replications(&cfg).unwrap();
        assert!(!rows[0].is_ok());
        assert!(rows[1].is_ok());
    }

    #[test]
    fn csv_is_deterministic_and_parallel_matches_sequential() {
        let cfg = small(vec![Method::Ecmle, Method::MixThames, Method::Hme]);
        let mut a = Vec::new();
        write_results_csv(&run_replications(&cfg).unwrap(), &mut a).unwrap();
        let mut b = Vec::new();
        write_results_csv(&run_replications(&cfg).unwrap(), &mut b).unwrap();
        assert_eq!(a, b);
        let seq = RunConfig { exec: Execution::Sequential, ..cfg };
        let mut c = Vec::new();
        write_results_csv(&run_replications(&seq).unwrap(), &mut c).unwrap();
        assert_eq!(a, c);
        let text = String::from_utf8(a).unwrap();
        assert!(text.starts_with("# ecmle results: model,d,"));
        assert_eq!(text.lines().count(), 2 + 6);
    }

    #[test]
    fn single_alpha_sweep_equals_replications() {
        let cfg = small(vec![Method::Ecmle]);
        let strip = |rows: Vec<ResultRow>| -> Vec<ResultRow> {
            rows.into_iter().map(|r| ResultRow { wall_time_s: 0.0, ..r }).collect()
        };
        assert_eq!(strip(sweep_alpha(&cfg, &[0.75]).unwrap()), strip(run_replications(&cfg).unwrap()));
        assert!(sweep_alpha(&cfg, &[1.0]).is_err());
    }

    #[test]
    fn rwm_sampler_path() {
        let cfg = RunConfig {
            sampler: SamplerKind::Rwm { step_scale: 0.3, thin: 2 },
            model: ModelConfig::named("gaussian"),
            ..small(vec![Method::Thames])
        };
        let rows = run_replications(&cfg).unwrap();
        assert!(rows.iter().all(|r| r.is_ok()));
        assert!(rows.iter().all(|r| r.abs_error.unwrap() < 0.5));
    }
}
