//! The `estimate`, `simulate-qkd`, `simulate-tcspc` and `demo` commands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use photon_bounds::channel::TcspcScene;
use photon_bounds::estimator::{estimate_targets, EstimatorConfig, IntervalEstimate, Receiver};
use photon_bounds::lp::lp_interval;
use photon_bounds::qkd::{KeyRateReport, Protocol, QkdScenario};
use photon_bounds::sample::sample_table;
use photon_bounds::table::{DetectorSpec, MeasurementTable};
use photon_bounds::tcspc::{run_tcspc, run_tcspc_sampled, TcspcReport, DEFAULT_ORDER};
use photon_bounds::{HomodyneDetector, PoissonSource};
use rayon::prelude::*;

use crate::config::Config;
use crate::error::{CliError, Result};
use crate::table_io::{num, read_table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Analytical,
    Lp,
    Both,
}

impl FromStr for Method {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "analytical" => Ok(Method::Analytical),
            "lp" => Ok(Method::Lp),
            "both" => Ok(Method::Both),
            other => Err(CliError::Usage(format!(
                "unknown method `{other}` (analytical, lp, both)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2,
    Fig3,
    Fig5,
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "fig2" => Ok(Figure::Fig2),
            "fig3" => Ok(Figure::Fig3),
            "fig5" => Ok(Figure::Fig5),
            other => Err(CliError::Usage(format!(
                "unknown figure `{other}` (fig2, fig3, fig5)"
            ))),
        }
    }
}

/// A configuration plus the output directory. Command-line flags are
/// merged into the configuration before a command runs.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub config: Config,
    pub out: PathBuf,
}

impl RunConfig {
    pub fn new(config: Config, out: impl Into<PathBuf>) -> Self {
        Self {
            config,
            out: out.into(),
        }
    }

    fn seed(&self) -> Result<u64> {
        self.config.get_or("run.seed", 0)
    }

    fn shots(&self) -> Result<Option<u64>> {
        let shots = self.config.get::<u64>("run.shots")?;
        self.config
            .ensure("run.shots", shots != Some(0), "need at least one shot")?;
        Ok(shots)
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

fn source(c: &Config, default: &[f64]) -> Result<PoissonSource> {
    Ok(PoissonSource::new(
        c.list_or("source.intensities", default)?,
    )?)
}

fn homodyne(c: &Config) -> Result<HomodyneDetector> {
    let eta = c.get_or("detector.efficiency", 1.0)?;
    if c.contains("detector.edges") {
        c.ensure(
            "detector.edges",
            !(c.contains("detector.y_max") || c.contains("detector.bins")),
            "give either edges or y_max/bins",
        )?;
        return Ok(HomodyneDetector::new(
            eta,
            c.list_or("detector.edges", &[])?,
        )?);
    }
    Ok(HomodyneDetector::uniform(
        eta,
        c.get_or("detector.y_max", 5.0)?,
        c.get_or("detector.bins", 16)?,
    )?)
}

fn parse_target(c: &Config, s: &str) -> Result<(u32, u32)> {
    let bad = || {
        c.ensure(
            "estimator.targets",
            false,
            &format!("target `{s}` is not `m|n`"),
        )
        .unwrap_err()
    };
    let (m, n) = s.split_once('|').ok_or_else(bad)?;
    Ok((
        n.trim().parse().map_err(|_| bad())?,
        m.trim().parse().map_err(|_| bad())?,
    ))
}

fn estimator_config(
    c: &Config,
    n0_key: &str,
    n0: u32,
    m0_key: &str,
    m0: u32,
) -> Result<EstimatorConfig> {
    let mut cfg = EstimatorConfig::new(c.get_or(n0_key, n0)?, c.get_or(m0_key, m0)?);
    cfg.search = c.get_or("estimator.search", true)?;
    cfg.max_iterations = c.get_or("estimator.max_iterations", cfg.max_iterations)?;
    cfg.tolerance = c.get_or("estimator.tolerance", cfg.tolerance)?;
    c.ensure(
        "estimator.tolerance",
        cfg.tolerance > 0.0,
        "must be positive",
    )?;
    Ok(cfg)
}

/// Scenario of the QKD simulation; unspecified keys keep the defaults.
pub fn qkd_scenario(c: &Config) -> Result<QkdScenario> {
    let d = QkdScenario::default();
    let s = QkdScenario {
        intensities: c.list_or("source.intensities", &d.intensities)?,
        levels: c.list_or("detector.levels", &d.levels)?,
        dark_count: c.get_or("detector.dark_count", d.dark_count)?,
        channel_error: c.get_or("channel.error", d.channel_error)?,
        source_order: c.get_or("qkd.n0", d.source_order)?,
        detector_order: c.get_or("qkd.m0", d.detector_order)?,
    };
    c.ensure(
        "channel.error",
        (0.0..=1.0).contains(&s.channel_error),
        "must lie in [0, 1]",
    )?;
    c.ensure(
        "source.intensities",
        s.intensities.len() >= 2,
        "the decoy baseline needs at least two intensities",
    )?;
    s.source()?;
    s.detectors()?;
    Ok(s)
}

/// Loss grid of the sweep (dB), inclusive of the end point.
pub fn loss_grid(c: &Config) -> Result<Vec<f64>> {
    let start: f64 = c.get_or("channel.loss_start", 0.0)?;
    let stop: f64 = c.get_or("channel.loss_stop", 45.0)?;
    let step: f64 = c.get_or("channel.loss_step", 1.0)?;
    c.ensure(
        "channel.loss_step",
        step > 0.0 && step.is_finite(),
        "must be positive",
    )?;
    c.ensure(
        "channel.loss_stop",
        start.is_finite() && stop >= start,
        "must not be below loss_start",
    )?;
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

fn protocols(c: &Config) -> Result<Vec<Protocol>> {
    let names: Vec<String> = c.list_or(
        "qkd.protocols",
        &["bb84".to_string(), "six-state".to_string()],
    )?;
    names
        .iter()
        .map(|s| {
            s.parse::<Protocol>().map_err(|e| {
                c.ensure("qkd.protocols", false, &e.to_string())
                    .unwrap_err()
            })
        })
        .collect()
}

/// Fluorescence scene and homodyne detector of the TCSPC simulation.
pub fn tcspc_setup(c: &Config) -> Result<(TcspcScene, HomodyneDetector, u32)> {
    let d = TcspcScene::standard();
    let kind = c.str_or("detector.kind", "homodyne");
    c.ensure(
        "detector.kind",
        kind == "homodyne",
        "the time-resolved pipeline needs a homodyne detector",
    )?;
    let t_start: f64 = c.get_or("scene.t_start", d.times[0])?;
    let t_stop: f64 = c.get_or("scene.t_stop", *d.times.last().expect("standard grid"))?;
    let width: f64 = c.get_or("scene.bin_width", d.bin_width)?;
    c.ensure(
        "scene.bin_width",
        width > 0.0 && width.is_finite(),
        "must be positive",
    )?;
    c.ensure(
        "scene.t_stop",
        t_stop >= t_start,
        "must not be below t_start",
    )?;
    let n = ((t_stop - t_start) / width + 1e-9).floor() as usize;
    let times = (0..=n).map(|k| t_start + width * k as f64).collect();
    let scene = TcspcScene::new(
        c.get_or("scene.t0", d.t0)?,
        c.get_or("scene.tau", d.tau)?,
        width,
        c.get_or("scene.excitation", d.excitation)?,
        times,
    )?;
    Ok((scene, homodyne(c)?, c.get_or("scene.order", DEFAULT_ORDER)?))
}

pub const ESTIMATE_HEADER: &str =
    "method,n,m,lo,hi,lambda,raw_lo,raw_hi,source_tail_lo,source_tail_hi,\
detector_tail_lo,detector_tail_hi,cross,qtilde_upper,numerical,designs,consistent";

fn estimate_row(out: &mut String, method: &str, n: u32, e: &IntervalEstimate<u32>) {
    let b = &e.budget;
    let cells = [
        e.lower,
        e.upper,
        e.lambda,
        e.raw_lower,
        e.raw_upper,
        b.source_tail.0,
        b.source_tail.1,
        b.detector_tail.0,
        b.detector_tail.1,
        b.cross,
        b.qtilde_upper,
        b.numerical,
    ];
    let body: Vec<String> = cells.iter().map(|&v| num(v)).collect();
    let _ = writeln!(
        out,
        "{method},{n},{},{},{},{}",
        e.output,
        body.join(","),
        e.designs,
        e.consistent
    );
}

/// Intervals for every target with the requested methods, as CSV.
pub fn estimate_csv(
    table: &MeasurementTable,
    source: &PoissonSource,
    targets: &[(u32, u32)],
    method: Method,
    cfg: &EstimatorConfig,
    truncation: (u32, u32),
) -> Result<String> {
    match &table.detector {
        DetectorSpec::Threshold(d) => {
            estimate_with(table, source, d, targets, method, cfg, truncation)
        }
        DetectorSpec::Homodyne(d) => {
            estimate_with(table, source, d, targets, method, cfg, truncation)
        }
        DetectorSpec::ThresholdPair(..) => Err(CliError::Usage(
            "`estimate` supports threshold and homodyne tables".into(),
        )),
    }
}

fn estimate_with<R: Receiver<Outcome = u32> + Sync>(
    table: &MeasurementTable,
    source: &PoissonSource,
    receiver: &R,
    targets: &[(u32, u32)],
    method: Method,
    cfg: &EstimatorConfig,
    (nc, mc): (u32, u32),
) -> Result<String> {
    let mut out = String::from(ESTIMATE_HEADER);
    out.push('\n');
    if targets.is_empty() {
        return Ok(out);
    }
    let analytical = match method {
        Method::Lp => None,
        _ => Some(estimate_targets(
            table, source, receiver, targets, cfg, None,
        )?),
    };
    let lp = match method {
        Method::Analytical => None,
        _ => Some(
            targets
                .par_iter()
                .map(|&t| lp_interval(table, source, receiver, nc, mc, t))
                .collect::<photon_bounds::Result<Vec<_>>>()?,
        ),
    };
    for (k, &(n, _)) in targets.iter().enumerate() {
        if let Some(a) = &analytical {
            estimate_row(&mut out, "analytical", n, &a[k]);
        }
        if let Some(l) = &lp {
            estimate_row(&mut out, "lp", n, &l[k]);
        }
    }
    Ok(out)
}

/// `estimate`: intervals from a measurement table file.
pub fn cmd_estimate(run: &RunConfig, table_path: Option<&Path>) -> Result<Vec<PathBuf>> {
    let c = &run.config;
    let path = match table_path {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(
            c.get::<String>("input.table")?
                .ok_or_else(|| CliError::Usage("`estimate` needs --table or input.table".into()))?,
        ),
    };
    let mut table = read_table(&path)?;
    if let Some(shots) = run.shots()? {
        table = sample_table(&table, shots, run.seed()?)?;
    }
    let src = source(c, &table.intensities)?;
    let method: Method = c.str_or("estimator.method", "analytical").parse()?;
    let targets = c
        .list_or::<String>("estimator.targets", &["1|1".to_string()])?
        .iter()
        .map(|s| parse_target(c, s))
        .collect::<Result<Vec<_>>>()?;
    let cfg = estimator_config(c, "estimator.n0", 2, "estimator.m0", 2)?;
    let truncation = (c.get_or("estimator.nc", 8)?, c.get_or("estimator.mc", 8)?);
    let csv = estimate_csv(&table, &src, &targets, method, &cfg, truncation)?;
    Ok(vec![run.write("estimate.csv", &csv)?])
}

pub const QKD_HEADER: &str = "loss_db,protocol,key_rate,gain,qber,ex_lo,ex_hi,ey_lo,ey_hi,ez_lo,ez_hi,\
pdet_lo,pdet_hi,lambda0,lambda1,lambda2,lambda3,entropy,vacuum_term,single_photon_term,leakage,baseline_e1";

pub fn qkd_csv(reports: &[KeyRateReport]) -> String {
    let mut out = String::from(QKD_HEADER);
    out.push('\n');
    for r in reports {
        let mut cells = vec![
            num(r.loss_db),
            r.protocol.to_string(),
            num(r.key_rate),
            num(r.gain),
            num(r.qber),
        ];
        for e in &r.errors {
            cells.push(num(e.lo));
            cells.push(num(e.hi));
        }
        cells.push(num(r.p_det.lo));
        cells.push(num(r.p_det.hi));
        match r.lambda {
            Some(l) => cells.extend(l.iter().map(|&v| num(v))),
            None => cells.extend(std::iter::repeat_n("nan".to_string(), 4)),
        }
        for v in [
            r.entropy,
            r.vacuum_term,
            r.single_photon_term,
            r.leakage,
            r.baseline_e1,
        ] {
            cells.push(num(v));
        }
        let _ = writeln!(out, "{}", cells.join(","));
    }
    out
}

fn qkd_sweep(
    run: &RunConfig,
    default_protocols: Option<&[Protocol]>,
) -> Result<Vec<KeyRateReport>> {
    let c = &run.config;
    if run.shots()?.is_some() {
        return Err(CliError::Usage(
            "finite-shot sampling is not available for the QKD sweep".into(),
        ));
    }
    let scenario = qkd_scenario(c)?;
    let protocols = match (default_protocols, c.contains("qkd.protocols")) {
        (Some(p), false) => p.to_vec(),
        _ => protocols(c)?,
    };
    Ok(scenario.sweep(&loss_grid(c)?, &protocols)?)
}

/// `simulate-qkd`: key-rate report over a loss sweep.
pub fn cmd_simulate_qkd(run: &RunConfig) -> Result<Vec<PathBuf>> {
    let reports = qkd_sweep(run, None)?;
    Ok(vec![run.write("qkd.csv", &qkd_csv(&reports))?])
}

fn tcspc_report(run: &RunConfig) -> Result<TcspcReport> {
    let (scene, det, order) = tcspc_setup(&run.config)?;
    let cfg = estimator_config(&run.config, "estimator.n0", 0, "scene.order", order)?;
    Ok(match run.shots()? {
        Some(shots) => run_tcspc_sampled(&scene, &det, order, &cfg, shots, run.seed()?)?,
        None => run_tcspc(&scene, &det, order, &cfg)?,
    })
}

/// `simulate-tcspc`: per-time-bin intervals for the fluorescence scene.
pub fn cmd_simulate_tcspc(run: &RunConfig) -> Result<Vec<PathBuf>> {
    let report = tcspc_report(run)?;
    Ok(vec![run.write("tcspc.csv", &report.to_csv())?])
}

/// Two-column series file with a `#` header naming the columns.
pub fn series(x_name: &str, y_name: &str, points: impl IntoIterator<Item = (f64, f64)>) -> String {
    let mut out = format!("# {x_name} {y_name}\n");
    for (x, y) in points {
        let _ = writeln!(out, "{} {}", num(x), num(y));
    }
    out
}

/// `demo`: runs a figure's configuration and writes its CSV plus plot-ready
/// series files.
pub fn cmd_demo(run: &RunConfig, figure: Figure) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    match figure {
        Figure::Fig2 => {
            let reports = qkd_sweep(run, Some(&[Protocol::Bb84, Protocol::SixState]))?;
            written.push(run.write("fig2.csv", &qkd_csv(&reports))?);
            for p in [Protocol::Bb84, Protocol::SixState] {
                let pts = reports
                    .iter()
                    .filter(|r| r.protocol == p)
                    .map(|r| (r.loss_db, r.key_rate));
                written.push(run.write(
                    &format!("fig2_{}.dat", p.name()),
                    &series("loss_db", "key_rate", pts),
                )?);
            }
        }
        Figure::Fig3 => {
            let reports = qkd_sweep(run, Some(&[Protocol::Bb84]))?;
            let e_ch = qkd_scenario(&run.config)?.channel_error;
            written.push(run.write("fig3.csv", &qkd_csv(&reports))?);
            let exact = reports.iter().map(|r| (r.loss_db, e_ch));
            written.push(run.write("fig3_exact.dat", &series("loss_db", "e_exact", exact))?);
            let upper = reports.iter().map(|r| (r.loss_db, r.errors[2].hi));
            written.push(run.write("fig3_upper.dat", &series("loss_db", "ez_upper", upper))?);
            let base = reports.iter().map(|r| (r.loss_db, r.baseline_e1));
            written.push(run.write("fig3_baseline.dat", &series("loss_db", "baseline_e1", base))?);
        }
        Figure::Fig5 => {
            let report = tcspc_report(run)?;
            written.push(run.write("fig5.csv", &report.to_csv())?);
            type Pick = fn(&photon_bounds::tcspc::TcspcRow) -> f64;
            let cols: [(&str, Pick); 6] = [
                ("q1_exact", |r| r.q1_exact),
                ("q1_lo", |r| r.q1.lo),
                ("q1_hi", |r| r.q1.hi),
                ("q2_exact", |r| r.q2_exact),
                ("q2_lo", |r| r.q2.lo),
                ("q2_hi", |r| r.q2.hi),
            ];
            for (name, pick) in cols {
                let pts = report.rows.iter().map(|r| (r.t_ns, pick(r)));
                written.push(run.write(&format!("fig5_{name}.dat"), &series("t_ns", name, pts))?);
            }
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> Config {
        Config::parse(text, "test").unwrap()
    }

    #[test]
    fn loss_grid_is_inclusive() {
        assert_eq!(loss_grid(&cfg("")).unwrap().len(), 46);
        let g = loss_grid(&cfg(
            "channel.loss_start = 0\nchannel.loss_stop = 40\nchannel.loss_step = 5",
        ))
        .unwrap();
        assert_eq!(g, vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]);
        assert!(loss_grid(&cfg("channel.loss_step = 0")).is_err());
    }

    #[test]
    fn targets_are_output_given_input() {
        let c = cfg("");
        assert_eq!(parse_target(&c, "2|1").unwrap(), (1, 2));
        assert!(parse_target(&c, "21").is_err());
    }

    #[test]
    fn method_and_figure_names() {
        assert_eq!("both".parse::<Method>().unwrap(), Method::Both);
        assert!("simplex".parse::<Method>().is_err());
        assert_eq!("fig5".parse::<Figure>().unwrap(), Figure::Fig5);
        assert_eq!("fig4".parse::<Figure>().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn tcspc_defaults_and_invalid_edges() {
        let (scene, det, order) = tcspc_setup(&cfg("")).unwrap();
        assert_eq!(scene.times.len(), 100);
        assert_eq!(det.num_bins(), 16);
        assert_eq!(order, DEFAULT_ORDER);
        let e = tcspc_setup(&cfg("detector.edges = 0.5, 1, 2, 5")).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn qkd_overrides() {
        let s = qkd_scenario(&cfg("channel.error = 0.1\ndetector.dark_count = 1e-5")).unwrap();
        assert_eq!(s.channel_error, 0.1);
        assert_eq!(s.dark_count, 1e-5);
        assert!(qkd_scenario(&cfg("channel.error = 1.5")).is_err());
        assert_eq!(
            protocols(&cfg("qkd.protocols = six-state")).unwrap(),
            vec![Protocol::SixState]
        );
    }
}
