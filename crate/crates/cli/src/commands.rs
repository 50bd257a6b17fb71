//! Study commands: each produces named in-memory artifacts that [`execute`] writes to disk.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use superabsorb::experiments::{
    angle_scan, grid_power, histogram, phase_map, scaling_power, solve_engine, spectrum, strength_ensemble,
    strength_scaling, ensemble, DisorderSpec, Ensemble, Outcome, LineClass,
};
use superabsorb::heatengine::{EngineConfig, PowerReport};

use crate::config::{EnsembleStudy, RunConfig};
use crate::error::CliError;
use crate::output::{fmt_f64, fmt_opt, sha256_hex, versions, write_artifact, write_manifest, Manifest, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Study {
    Solve,
    Grid,
    Scaling,
    Phasemap,
    Spectrum,
    Ensemble,
    Angles,
}

impl Study {
    pub fn name(self) -> &'static str {
        match self {
            Study::Solve => "solve",
            Study::Grid => "grid",
            Study::Scaling => "scaling",
            Study::Phasemap => "phasemap",
            Study::Spectrum => "spectrum",
            Study::Ensemble => "ensemble",
            Study::Angles => "angles",
        }
    }
}

/// Command-line axis overrides. List-valued for the study that sweeps the axis, otherwise a
/// single value replacing the scalar parameter.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub n: Option<Vec<usize>>,
    pub suppression: Option<Vec<f64>>,
    pub gamma_r: Option<Vec<f64>>,
    pub temps: Option<Vec<f64>>,
    pub seed: Option<u64>,
}

fn single<T: Copy>(flag: &str, v: &[T]) -> Result<T, CliError> {
    match v {
        [x] => Ok(*x),
        _ => Err(CliError::Config(format!("--{flag} takes a single value for this command"))),
    }
}

pub fn apply_overrides(study: Study, mut c: RunConfig, o: &Overrides) -> Result<RunConfig, CliError> {
    if let Some(n) = &o.n {
        if study == Study::Scaling {
            c.scaling.n = n.clone();
        } else {
            c.n_sites = single("n", n)?;
        }
    }
    if let Some(s) = &o.suppression {
        if study == Study::Grid {
            c.grid.suppression = s.clone();
        } else {
            c.optical.suppression = single("suppression", s)?;
        }
    }
    if let Some(g) = &o.gamma_r {
        if study == Study::Grid {
            c.grid.gamma_r = g.clone();
        } else {
            c.reinit.gamma_r = single("gamma-r", g)?;
        }
    }
    if let Some(t) = &o.temps {
        if study == Study::Phasemap {
            c.phasemap.temps = t.clone();
        } else {
            c.vib_temperature = single("temps", t)?;
        }
    }
    if let Some(seed) = o.seed {
        c.seed = seed;
    }
    c.validate()?;
    Ok(c)
}

const REPORT_COLUMNS: [&str; 19] = [
    "status",
    "gamma_t_star",
    "current",
    "voltage",
    "p_out",
    "p_in",
    "p_net",
    "p_in_per_site",
    "p_out_per_site",
    "p_net_per_site",
    "rho_alpha",
    "rho_beta",
    "pump_currents",
    "non_unimodal",
    "trace_dev",
    "herm_dev",
    "min_eig",
    "residual",
    "error",
];

fn report_cells(r: &Outcome<PowerReport>) -> Vec<String> {
    match r {
        Outcome::Ok(p) => {
            let (pin, pout, pnet) = p.per_site();
            let d = p.diagnostics;
            let mut cells = vec!["ok".to_string()];
            cells.extend(
                [p.gamma_t_star, p.current, p.voltage, p.p_out, p.p_in, p.p_net, pin, pout, pnet, p.rho_alpha, p.rho_beta]
                    .map(fmt_f64),
            );
            cells.push(p.pump_currents.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(";"));
            cells.push(p.non_unimodal.to_string());
            cells.extend([d.trace_dev, d.herm_dev, d.min_eig, d.residual].map(fmt_f64));
            cells.push(String::new());
            cells
        }
        Outcome::Failed(msg) => {
            let mut cells = vec!["failed".to_string()];
            cells.extend(std::iter::repeat_n(String::new(), REPORT_COLUMNS.len() - 2));
            cells.push(msg.clone());
            cells
        }
    }
}

fn with_report(prefix: &[&str]) -> Table {
    let cols: Vec<&str> = prefix.iter().copied().chain(REPORT_COLUMNS).collect();
    Table::new(&cols)
}

type Files = Vec<(String, Vec<u8>)>;

fn solve(c: &RunConfig) -> Result<Files, CliError> {
    let report = solve_engine(&c.engine()?, &c.load_scan())?;
    let mut t = with_report(&["n_sites"]);
    let mut row = vec![c.n_sites.to_string()];
    row.extend(report_cells(&Outcome::Ok(report)));
    t.push(row);
    Ok(vec![("solve.csv".into(), t.to_bytes()?)])
}

fn grid(c: &RunConfig) -> Result<Files, CliError> {
    let points = grid_power(&c.engine()?, &c.grid.suppression, &c.grid.gamma_r, &c.load_scan());
    let mut t = with_report(&["n_sites", "suppression", "gamma_r"]);
    for p in &points {
        let mut row = vec![c.n_sites.to_string(), fmt_f64(p.suppression), fmt_f64(p.gamma_r)];
        row.extend(report_cells(&p.result));
        t.push(row);
    }
    Ok(vec![("grid.csv".into(), t.to_bytes()?)])
}

fn scaling(c: &RunConfig) -> Result<Files, CliError> {
    let site = c.site.into();
    let points = scaling_power(&c.engine()?, &site, &c.scaling.n, &c.load_scan(), c.scaling.power_cap);
    let mut power = with_report(&["n_sites"]);
    for p in &points {
        let mut row = vec![p.n_sites.to_string()];
        row.extend(report_cells(&p.result));
        power.push(row);
    }
    let mut strength = Table::new(&[
        "n_sites",
        "guide_slide",
        "parallel",
        "dicke",
        "independent",
        "guide_slide_per_site",
        "parallel_per_site",
        "dicke_per_site",
        "independent_per_site",
    ]);
    for s in strength_scaling(&site, &c.scaling.strength_n, c.scaling.strength_cap)? {
        let mut row = vec![s.n_sites.to_string()];
        row.extend([s.guide_slide, s.parallel, s.dicke, s.independent].map(fmt_f64));
        row.extend(s.per_site().map(fmt_f64));
        strength.push(row);
    }
    Ok(vec![("scaling_power.csv".into(), power.to_bytes()?), ("scaling_strength.csv".into(), strength.to_bytes()?)])
}

fn phasemap(c: &RunConfig) -> Result<Files, CliError> {
    let pm = &c.phasemap;
    let angles = pm.optimize_angles.then_some(&pm.angle_grid);
    let points = phase_map(&c.engine()?, &pm.tau_l, &pm.r_nn, &pm.temps, angles, &c.load_scan());
    let mut t = Table::new(&["t_vib", "tau_l", "r_nn", "theta_eq", "theta_zen", "p_net", "positive"]);
    for p in &points {
        t.push(vec![
            fmt_f64(p.t_vib),
            fmt_f64(p.tau_l),
            fmt_f64(p.r_nn),
            fmt_f64(p.theta_eq),
            fmt_f64(p.theta_zen),
            fmt_opt(p.p_net),
            p.positive.to_string(),
        ]);
    }
    Ok(vec![("phasemap.csv".into(), t.to_bytes()?)])
}

fn angles(c: &RunConfig) -> Result<Files, CliError> {
    let pairs: Vec<(f64, f64)> =
        c.angles.theta_eq.iter().flat_map(|&e| c.angles.theta_zen.iter().map(move |&z| (e, z))).collect();
    let mut t = Table::new(&["theta_eq", "theta_zen", "p_net"]);
    for p in angle_scan(&c.engine()?, &pairs, &c.load_scan()) {
        t.push(vec![fmt_f64(p.theta_eq), fmt_f64(p.theta_zen), fmt_opt(p.p_net)]);
    }
    Ok(vec![("angles.csv".into(), t.to_bytes()?)])
}

fn hist_table(values: &[f64], weights: Option<&[f64]>, bins: usize, lo: f64, hi: f64) -> Result<Table, CliError> {
    let mut t = Table::new(&["lo", "hi", "weight"]);
    if values.is_empty() {
        return Ok(t);
    }
    let h = histogram(values, weights, bins, lo, hi)?;
    for (k, w) in h.counts.iter().enumerate() {
        t.push(vec![fmt_f64(h.edges[k]), fmt_f64(h.edges[k + 1]), fmt_f64(*w)]);
    }
    Ok(t)
}

fn padded_range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

fn spectrum_study(c: &RunConfig) -> Result<Files, CliError> {
    let s = spectrum(&c.ring()?, c.convention)?;
    let mut lines = Table::new(&["omega", "strength", "class", "cutoff"]);
    for l in &s.optical {
        let class = match l.class {
            LineClass::Good => "good",
            LineClass::Bad => "bad",
            LineClass::Other => "other",
        };
        lines.push(vec![fmt_f64(l.omega), fmt_f64(l.strength), class.into(), fmt_opt(s.cutoff)]);
    }
    let mut phonon = Table::new(&["omega"]);
    for w in &s.phonon {
        phonon.push(vec![fmt_f64(*w)]);
    }
    let omegas: Vec<f64> = s.optical.iter().map(|l| l.omega).collect();
    let strengths: Vec<f64> = s.optical.iter().map(|l| l.strength).collect();
    let (lo, hi) = padded_range(&omegas);
    let opt_hist = hist_table(&omegas, Some(&strengths), c.spectrum.bins, lo, hi)?;
    let phmax = s.phonon.iter().copied().fold(0.0, f64::max);
    let ph_hist = hist_table(&s.phonon, None, c.spectrum.bins, 0.0, if phmax > 0.0 { phmax * 1.05 } else { 1e-3 })?;
    Ok(vec![
        ("spectrum_optical.csv".into(), lines.to_bytes()?),
        ("spectrum_phonon.csv".into(), phonon.to_bytes()?),
        ("spectrum_optical_hist.csv".into(), opt_hist.to_bytes()?),
        ("spectrum_phonon_hist.csv".into(), ph_hist.to_bytes()?),
    ])
}

fn power_ensemble(c: &RunConfig, d: &DisorderSpec) -> Result<Ensemble, CliError> {
    let base: EngineConfig = c.engine()?;
    let scan = c.load_scan();
    let metrics = ["p_net_per_site", "p_out_per_site", "p_in_per_site", "gamma_t_star"];
    Ok(ensemble(&base.ring, d, c.ensemble.trials, &metrics, |ring| {
        let ring = superabsorb::geometry::RingSpec { trap: base.ring.trap.clone(), ..ring.clone() };
        let r = solve_engine(&EngineConfig { ring, ..base.clone() }, &scan)?;
        let (pin, pout, pnet) = r.per_site();
        Ok(vec![pnet, pout, pin, r.gamma_t_star])
    })?)
}

fn ensemble_study(c: &RunConfig) -> Result<Files, CliError> {
    let d = DisorderSpec { targets: c.ensemble.targets, ..DisorderSpec::new(c.ensemble.fraction, c.seed) };
    let e = match c.ensemble.study {
        EnsembleStudy::Strength => strength_ensemble(&c.ring()?, &d, c.ensemble.trials)?,
        EnsembleStudy::Power => power_ensemble(c, &d)?,
    };
    let mut header = vec!["trial", "status"];
    header.extend(e.metrics.iter().map(String::as_str));
    let mut trials = Table::new(&header);
    for (k, row) in e.trials.iter().enumerate() {
        let mut cells = vec![k.to_string()];
        match row {
            Some(v) => {
                cells.push("ok".into());
                cells.extend(v.iter().map(|x| fmt_f64(*x)));
            }
            None => {
                cells.push("failed".into());
                cells.extend(std::iter::repeat_n(String::new(), e.metrics.len()));
            }
        }
        trials.push(cells);
    }
    let mut stats = Table::new(&["metric", "count", "mean", "std", "q05", "q25", "q50", "q75", "q95"]);
    for (m, s) in e.metrics.iter().zip(&e.stats) {
        let mut cells = vec![m.clone()];
        match s {
            Some(s) => {
                cells.push(s.count.to_string());
                cells.extend([s.mean, s.std].map(fmt_f64));
                cells.extend(s.quantiles.map(fmt_f64));
            }
            None => cells.extend(std::iter::once("0".to_string()).chain(std::iter::repeat_n(String::new(), 7))),
        }
        stats.push(cells);
    }
    Ok(vec![
        ("ensemble_trials.csv".into(), trials.to_bytes()?),
        ("ensemble_stats.csv".into(), stats.to_bytes()?),
        ("ensemble.json".into(), serde_json::to_vec_pretty(&e)?),
    ])
}

/// Runs a study on the current rayon pool and returns its artifacts in memory.
pub fn run_study(study: Study, c: &RunConfig) -> Result<Files, CliError> {
    match study {
        Study::Solve => solve(c),
        Study::Grid => grid(c),
        Study::Scaling => scaling(c),
        Study::Phasemap => phasemap(c),
        Study::Spectrum => spectrum_study(c),
        Study::Ensemble => ensemble_study(c),
        Study::Angles => angles(c),
    }
}

/// Runs `study` on a pool of `workers` threads and writes its artifacts plus `manifest.json`
/// into `out`.
pub fn execute(study: Study, c: &RunConfig, out: &Path, workers: usize) -> Result<Manifest, CliError> {
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|e| CliError::Io(e.to_string()))?;
    let files = pool.install(|| run_study(study, c))?;
    std::fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    let artifacts = files.iter().map(|(name, bytes)| write_artifact(out, name, bytes)).collect::<Result<Vec<_>, _>>()?;
    let config = serde_json::to_value(c)?;
    let manifest = Manifest {
        command: study.name().into(),
        config_sha256: sha256_hex(&serde_json::to_vec(&config)?),
        config,
        seed: c.seed,
        workers,
        versions: versions(),
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts,
    };
    write_manifest(out, &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_route_by_study() {
        let base = RunConfig::with_sites(3);
        let o = Overrides { n: Some(vec![2, 3]), suppression: Some(vec![0.5]), ..Default::default() };
        let c = apply_overrides(Study::Scaling, base.clone(), &o).unwrap();
        assert_eq!(c.scaling.n, vec![2, 3]);
        assert_eq!(c.optical.suppression, 0.5);
        assert!(apply_overrides(Study::Solve, base.clone(), &o).is_err());
        let g = apply_overrides(Study::Grid, base, &Overrides { gamma_r: Some(vec![1e-4, 1e-2]), ..Default::default() }).unwrap();
        assert_eq!(g.grid.gamma_r, vec![1e-4, 1e-2]);
    }

    #[test]
    fn failed_report_row_has_header_width() {
        assert_eq!(report_cells(&Outcome::Failed("x".into())).len(), REPORT_COLUMNS.len());
    }

    #[test]
    fn spectrum_and_strength_ensemble_write_tables() {
        let mut c = RunConfig::with_sites(4);
        c.ensemble.trials = 5;
        let dir = tempfile::tempdir().unwrap();
        let m = execute(Study::Spectrum, &c, dir.path(), 1).unwrap();
        assert_eq!(m.artifacts.len(), 4);
        let lines = Table::read(&dir.path().join("spectrum_optical.csv")).unwrap();
        assert!(lines.rows.iter().any(|r| r[2] == "good"));
        let m = execute(Study::Ensemble, &c, dir.path(), 2).unwrap();
        assert_eq!(m.command, "ensemble");
        let trials = Table::read(&dir.path().join("ensemble_trials.csv")).unwrap();
        assert_eq!(trials.rows.len(), 5);
        assert!(dir.path().join("manifest.json").exists());
    }

    #[test]
    fn trimer_solve_writes_one_row() {
        let dir = tempfile::tempdir().unwrap();
        execute(Study::Solve, &RunConfig::with_sites(3), dir.path(), 1).unwrap();
        let t = Table::read(&dir.path().join("solve.csv")).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.rows[0][t.column("status").unwrap()], "ok");
    }
}
