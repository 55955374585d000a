use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covering::{build_covering, EllipsoidUnion};
use crate::draws::fmt_f64;
use crate::error::{Error, Result};
use crate::estimators::{variance_proxy, ThamesRegion};
use crate::geometry::UnitInterval;
use crate::hpd::{partition_halves, split};
use crate::par::map_indices;
use crate::rng::seeded;
use crate::targets::TargetModel;

use super::config::RunConfig;
use super::run::{draw_sample, sampler_seed, COVERING_SEED_OFFSET, PROXY_SEED_OFFSET};

pub const THAMES_FORMAT: &str = "thames-ellipsoid/v1";

/// Serialized THAMES ellipsoid `{θ : (θ − c)ᵀ Σ⁻¹ (θ − c) < r²}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThamesFile {
    pub format: String,
    pub d: usize,
    pub center: Vec<f64>,
    /// Row-major d × d.
    pub covariance: Vec<f64>,
    pub radius: f64,
    pub volume: f64,
}

impl ThamesFile {
    pub fn from_region(region: &ThamesRegion) -> Self {
        let cov = region.covariance();
        let d = cov.nrows();
        Self {
            format: THAMES_FORMAT.to_string(),
            d,
            center: region.center().to_vec(),
            covariance: (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| cov[(i, j)]).collect(),
            radius: region.radius(),
            volume: region.volume(),
        }
    }
}

/// Paths written by [`export_regions`].
#[derive(Debug, Clone)]
pub struct ExportPaths {
    pub union: PathBuf,
    pub thames: PathBuf,
    pub draws: PathBuf,
}

/// Writes the covering, the THAMES ellipse and the labelled draws of
/// replication 0 into `dir` as `union.json`, `thames.json` and `draws.csv`.
pub fn export_regions(cfg: &RunConfig, dir: &Path) -> Result<ExportPaths> {
    cfg.validate()?;
    let model = cfg.model.build(cfg.base_seed)?;
    let seed = sampler_seed(cfg.base_seed, 0);
    let draws = draw_sample(model.as_ref(), cfg, seed)?;
    let (build, eval) = split(&draws)?;
    let region = ThamesRegion::fit(&build, cfg.thames_radius)?;
    let mut ccfg = crate::covering::CoveringConfig::new(UnitInterval::open(cfg.alpha)?, seed + COVERING_SEED_OFFSET)
        .with_subsample_rate(UnitInterval::open(cfg.k)?)?;
    ccfg.exec = cfg.exec;
    let part = partition_halves(build, eval, ccfg.alpha)?;
    let f = |t: &[f64]| model.log_unnorm_posterior(t);
    let union = build_covering(&part, &ccfg, &f)?;

    std::fs::create_dir_all(dir)?;
    let paths = ExportPaths { union: dir.join("union.json"), thames: dir.join("thames.json"), draws: dir.join("draws.csv") };
    union.write_json(BufWriter::new(File::create(&paths.union)?))?;
    serde_json::to_writer_pretty(BufWriter::new(File::create(&paths.thames)?), &ThamesFile::from_region(&region))?;

    let d = draws.dim();
    let mut wtr = csv::Writer::from_writer(BufWriter::new(File::create(&paths.draws)?));
    let mut header: Vec<String> = (1..=d).map(|j| format!("theta_{j}")).collect();
    header.extend(["log_unnorm_posterior", "half", "hpd", "in_union", "in_thames"].map(String::from));
    wtr.write_record(&header)?;
    let mut hpd_flag = vec![false; part.build_half.len()];
    part.hpd_indices.iter().for_each(|&i| hpd_flag[i] = true);
    for (half, set) in [("build", &part.build_half), ("eval", &part.eval_half)] {
        for (i, (row, ld)) in set.rows().zip(set.log_densities()).enumerate() {
            let mut rec: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
            rec.push(fmt_f64(*ld));
            rec.push(half.into());
            rec.push(if half == "build" { (hpd_flag[i] as u8).to_string() } else { String::new() });
            rec.push((union.contains(row)? as u8).to_string());
            rec.push((region.in_ellipsoid(row) as u8).to_string());
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush()?;
    Ok(paths)
}

/// Second-moment proxy of one support at one α and replication.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProxyRow {
    pub model: String,
    pub d: usize,
    pub alpha: f64,
    pub rep: usize,
    pub seed: u64,
    /// `ECMLE` (the covering) or `THAMES` (the moment ellipsoid).
    pub support: String,
    pub status: String,
    pub log_proxy: Option<f64>,
    pub proxy: Option<f64>,
    pub se: Option<f64>,
    pub volume: Option<f64>,
}

/// The variance proxy of the covering at every α in `cfg.alphas`, plus the
/// THAMES ellipsoid as a fixed comparison, for each replication.
pub fn variance_sweep(cfg: &RunConfig) -> Result<Vec<ProxyRow>> {
    cfg.validate()?;
    let model = cfg.model.build(cfg.base_seed)?;
    let m = model.as_ref();
    let per_rep = map_indices(cfg.reps, cfg.exec, |rep| proxy_rows(m, cfg, rep));
    let mut rows: Vec<ProxyRow> = per_rep.into_iter().flatten().collect();
    // (support, α, rep) with THAMES last
    rows.sort_by(|a, b| {
        (a.support != "ECMLE")
            .cmp(&(b.support != "ECMLE"))
            .then(a.alpha.total_cmp(&b.alpha))
            .then(a.rep.cmp(&b.rep))
    });
    Ok(rows)
}

fn proxy_rows(model: &dyn TargetModel, cfg: &RunConfig, rep: usize) -> Vec<ProxyRow> {
    let seed = sampler_seed(cfg.base_seed, rep);
    let row = |support: &str, alpha: f64, res: Result<(crate::estimators::VarianceProxy, f64)>| {
        let mut r = ProxyRow {
            model: model.name().to_string(),
            d: model.dim(),
            alpha,
            rep,
            seed,
            support: support.into(),
            status: "ok".into(),
            log_proxy: None,
            proxy: None,
            se: None,
            volume: None,
        };
        match res {
            Ok((p, v)) => {
                r.log_proxy = Some(p.log_value);
                r.proxy = Some(p.value).filter(|x| x.is_finite());
                r.se = Some(p.se).filter(|x| x.is_finite());
                r.volume = Some(v);
            }
            Err(e) => r.status = e.to_string().replace([',', '\n', '"'], " "),
        }
        r
    };
    let f = |t: &[f64]| model.log_unnorm_posterior(t);
    let draws = match draw_sample(model, cfg, seed).and_then(|d| split(&d)) {
        Ok(x) => x,
        Err(e) => return vec![row("ECMLE", cfg.alpha, Err(e))],
    };
    let (build, eval) = draws;
    let mut out = Vec::new();
    for &alpha in &cfg.alphas {
        let res = (|| {
            let mut ccfg = crate::covering::CoveringConfig::new(UnitInterval::open(alpha)?, seed + COVERING_SEED_OFFSET)
                .with_subsample_rate(UnitInterval::open(cfg.k)?)?;
            ccfg.exec = cfg.exec;
            let part = partition_halves(build.clone(), eval.clone(), ccfg.alpha)?;
            let union: EllipsoidUnion = build_covering(&part, &ccfg, &f)?;
            let mut rng = seeded(seed + PROXY_SEED_OFFSET);
            Ok((variance_proxy(&union, &f, cfg.t, cfg.n_mc, &mut rng)?, union.total_volume()))
        })();
        out.push(row("ECMLE", alpha, res));
    }
    let res = (|| {
        let region = ThamesRegion::fit(&build, cfg.thames_radius)?;
        let mut rng = seeded(seed + PROXY_SEED_OFFSET);
        Ok((variance_proxy(&region, &f, cfg.t, cfg.n_mc, &mut rng)?, region.log_volume().exp()))
    })();
    out.push(row("THAMES", f64::NAN, res));
    out
}

pub fn write_proxy_csv<W: Write>(rows: &[ProxyRow], mut w: W) -> Result<()> {
    const COLS: [&str; 11] = ["model", "d", "alpha", "rep", "seed", "support", "status", "log_proxy", "proxy", "se", "volume"];
    writeln!(w, "# ecmle variance proxy: {}", COLS.join(","))?;
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(COLS)?;
    let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        wtr.write_record([
            r.model.clone(),
            r.d.to_string(),
            if r.alpha.is_nan() { String::new() } else { fmt_f64(r.alpha) },
            r.rep.to_string(),
            r.seed.to_string(),
            r.support.clone(),
            r.status.clone(),
            opt(r.log_proxy),
            opt(r.proxy),
            opt(r.se),
            opt(r.volume),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads back a union written by [`export_regions`].
pub fn read_union(path: &Path) -> Result<EllipsoidUnion> {
    EllipsoidUnion::read_json_path(path)
}

pub fn read_thames(path: &Path) -> Result<ThamesFile> {
    let f: ThamesFile = serde_json::from_reader(File::open(path)?)?;
    if f.format != THAMES_FORMAT {
        return Err(Error::Parse { line: 0, msg: format!("unexpected format `{}`", f.format) });
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ModelConfig;

    #[test]
    fn mixture_export_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig { model: ModelConfig::named("mixture"), t: 5000, ..RunConfig::default() };
        let paths = export_regions(&cfg, dir.path()).unwrap();
        let union = read_union(&paths.union).unwrap();
        assert!(union.len() >= 2);
        assert_eq!(union.dim(), 2);
        let again = EllipsoidUnion::from_file(union.to_file()).unwrap();
        assert_eq!(again.to_file(), union.to_file());
        let th = read_thames(&paths.thames).unwrap();
        assert_eq!(th.d, 2);
        let text = std::fs::read_to_string(&paths.draws).unwrap();
        assert_eq!(text.lines().count(), 1 + 10_000);
        assert!(text.starts_with("theta_1,theta_2,log_unnorm_posterior,half,hpd,in_union,in_thames"));
    }

    #[test]
    fn proxy_sweep_rows() {
        let cfg = RunConfig { t: 2000, reps: 2, alphas: vec![0.5, 0.8], n_mc: 2000, ..RunConfig::default() };
        let rows = variance_sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 3);
        assert!(rows.iter().all(|r| r.status == "ok"));
        assert_eq!(rows.last().unwrap().support, "THAMES");
        let mut buf = Vec::new();
        write_proxy_csv(&rows, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2 + 6);
    }
}
