//! Configuration, experiment drivers and the command line interface.

use crate::curve::{self, Curve};
use crate::flows::{self, EvolutionError, SchemeKind, StepParams, Trajectory};
use crate::metric::MetricSpec;
use crate::oracle;
use crate::surface::{self, ChartMap};
use crate::vec2::Vec2;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Initial data selection.
#[derive(Debug, Clone)]
pub enum InitKind {
    Circle { a0: f64, r0: f64, j: usize },
    Segment { p: Vec2, q: Vec2, j: usize },
    Cigar { center: Vec2, half: f64, cap: f64, vertical: bool, j: usize },
    Polyline { file: PathBuf },
}

/// A fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub metric: MetricSpec,
    pub scheme: SchemeKind,
    pub init: InitKind,
    pub dt: f64,
    pub t_end: f64,
    /// snapshot cadence in simulated time; zero disables interior snapshots
    pub cadence: f64,
    pub outdir: Option<PathBuf>,
    pub picard_tol: f64,
    pub picard_max: usize,
    /// J list for convergence studies
    pub js: Vec<usize>,
}

impl RunConfig {
    pub fn params(&self) -> StepParams {
        StepParams { dt: self.dt, picard_tol: self.picard_tol, picard_max: self.picard_max }
    }

    pub fn build_curve(&self) -> Result<Curve> {
        match &self.init {
            InitKind::Circle { a0, r0, j } => curve::initial_circle(*a0, *r0, *j),
            InitKind::Segment { p, q, j } => curve::initial_segment(*p, *q, *j),
            InitKind::Cigar { center, half, cap, vertical, j } => {
                curve::initial_cigar(*center, *half, *cap, *vertical, *j)
            }
            InitKind::Polyline { file } => {
                let text = std::fs::read_to_string(file)?;
                curve::parse_polyline(&text)
            }
        }
    }
}

/// Parses a flat `key = value` config text; later keys win. Lines starting
/// with `#` are comments.
pub fn parse_config_text(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", ln + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get_f64(map: &BTreeMap<String, String>, key: &str) -> Result<Option<f64>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad number for '{key}': {v}"))),
    }
}

fn get_usize(map: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("bad integer for '{key}': {v}"))),
    }
}

/// Builds a `RunConfig` from parsed keys.
pub fn config_from_map(map: &BTreeMap<String, String>) -> Result<RunConfig> {
    let metric = MetricSpec::parse(
        map.get("metric").ok_or_else(|| Error::Config("missing 'metric'".into()))?,
    )?;
    let scheme = SchemeKind::parse(
        map.get("scheme").ok_or_else(|| Error::Config("missing 'scheme'".into()))?,
    )?;
    let j = get_usize(map, "J")?.unwrap_or(128);
    let init = match map.get("init").map(String::as_str).unwrap_or("circle") {
        "circle" => InitKind::Circle {
            a0: get_f64(map, "a0")?.unwrap_or(2.0),
            r0: get_f64(map, "r0")?.unwrap_or(1.0),
            j,
        },
        "segment" => InitKind::Segment {
            p: Vec2::new(
                get_f64(map, "x0")?.ok_or_else(|| Error::Config("segment needs x0".into()))?,
                get_f64(map, "y0")?.ok_or_else(|| Error::Config("segment needs y0".into()))?,
            ),
            q: Vec2::new(
                get_f64(map, "x1")?.ok_or_else(|| Error::Config("segment needs x1".into()))?,
                get_f64(map, "y1")?.ok_or_else(|| Error::Config("segment needs y1".into()))?,
            ),
            j,
        },
        "cigar" => InitKind::Cigar {
            center: Vec2::new(get_f64(map, "cx")?.unwrap_or(0.0), get_f64(map, "cy")?.unwrap_or(1.0)),
            half: get_f64(map, "half")?.unwrap_or(1.5),
            cap: get_f64(map, "cap")?.unwrap_or(0.5),
            vertical: map.get("vertical").map(String::as_str) == Some("true"),
            j,
        },
        "polyline" => InitKind::Polyline {
            file: PathBuf::from(
                map.get("file").ok_or_else(|| Error::Config("polyline needs 'file'".into()))?,
            ),
        },
        other => return Err(Error::Config(format!("unknown init '{other}'"))),
    };
    let dt = get_f64(map, "dt")?.ok_or_else(|| Error::Config("missing 'dt'".into()))?;
    let t_end = get_f64(map, "t_end")?.ok_or_else(|| Error::Config("missing 't_end'".into()))?;
    if !(dt > 0.0) || !(t_end >= 0.0) || !dt.is_finite() || !t_end.is_finite() {
        return Err(Error::Config("dt must be positive, t_end nonnegative".into()));
    }
    let js = match map.get("js") {
        None => vec![],
        Some(v) => {
            let mut out = Vec::new();
            for item in v.split(',') {
                out.push(
                    item.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad J list entry '{item}'")))?,
                );
            }
            out
        }
    };
    Ok(RunConfig {
        metric,
        scheme,
        init,
        dt,
        t_end,
        cadence: get_f64(map, "cadence")?.unwrap_or(0.0),
        outdir: map.get("outdir").map(PathBuf::from),
        picard_tol: get_f64(map, "picard_tol")?.unwrap_or(1e-10),
        picard_max: get_usize(map, "picard_max")?.unwrap_or(50),
        js,
    })
}

/// Deviation of a polygon's nodes from the circle of radius `r` centred at
/// `(0, a)`: `max_j | |X_j - a e2| - r |`.
pub fn circle_deviation(c: &Curve, a: f64, r: f64) -> f64 {
    let center = Vec2::new(0.0, a);
    c.nodes()
        .iter()
        .map(|&p| ((p - center).norm() - r).abs())
        .fold(0.0, f64::max)
}

/// Runs an evolution while tracking the trajectory error against a moving
/// reference circle `t -> (a(t), r(t))`; the error is the maximum of
/// `circle_deviation` over all accepted steps.
pub fn run_with_circle_error(
    kind: SchemeKind,
    m: &MetricSpec,
    c0: &Curve,
    p: &StepParams,
    t_end: f64,
    mut reference: impl FnMut(f64) -> (f64, f64),
) -> std::result::Result<(Trajectory, f64), EvolutionError> {
    let mut err = 0.0f64;
    let traj = flows::run_evolution(kind, m, c0, p, t_end, |_step, t, report| {
        let (a, r) = reference(t);
        err = err.max(circle_deviation(&report.curve, a, r));
    })?;
    Ok((traj, err))
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub j: usize,
    pub h: f64,
    pub error: f64,
    pub eoc: Option<f64>,
}

/// Reference trajectories available to convergence studies.
#[derive(Debug, Clone, Copy)]
pub enum CircleOracleKind {
    /// hyperbolic circle under curvature flow (metric `mu:1`)
    HyperbolicCurvature,
    /// hyperbolic circle under elastic flow (metric `mu:1`)
    HyperbolicElastic,
}

impl CircleOracleKind {
    /// Chooses the reference for a scheme on the hyperbolic plane.
    pub fn for_scheme(kind: SchemeKind, m: &MetricSpec) -> Result<CircleOracleKind> {
        if !matches!(m, MetricSpec::Mu(mu) if *mu == 1.0) {
            return Err(Error::Config(
                "convergence studies require the hyperbolic plane metric mu:1".into(),
            ));
        }
        if kind.is_elastic() {
            Ok(CircleOracleKind::HyperbolicElastic)
        } else if kind.is_curve_diffusion() {
            Err(Error::Config("no moving-circle reference for curve diffusion".into()))
        } else {
            Ok(CircleOracleKind::HyperbolicCurvature)
        }
    }
}

/// Runs the convergence protocol: for each `J` the circle initial data is
/// evolved with `dt = 0.1 h^2` (`h` the largest initial chord) up to
/// `t_end`, errors are measured against the exact circle, and experimental
/// orders are formed from consecutive rows.
pub fn convergence_study(
    kind: SchemeKind,
    m: &MetricSpec,
    a0: f64,
    r0: f64,
    t_end: f64,
    js: &[usize],
    picard_tol: f64,
    picard_max: usize,
) -> Result<Vec<ConvergenceRow>> {
    let okind = CircleOracleKind::for_scheme(kind, m)?;
    let run_one = |&j: &usize| -> Result<(usize, f64, f64)> {
        let c0 = curve::initial_circle(a0, r0, j)?;
        let frames = c0.element_frames()?;
        let h = frames.iter().map(|f| f.length).fold(0.0f64, f64::max);
        let p = StepParams { dt: 0.1 * h * h, picard_tol, picard_max };
        let err = match okind {
            CircleOracleKind::HyperbolicCurvature => {
                let (_, err) =
                    run_with_circle_error(kind, m, &c0, &p, t_end, |t| {
                        oracle::hyperbolic_cf_circle(a0, r0, t).expect("reference past extinction")
                    })
                    .map_err(|e| e.error)?;
                err
            }
            CircleOracleKind::HyperbolicElastic => {
                let mut orc = oracle::ElasticCircleOracle::new(a0, r0)?;
                let (_, err) = run_with_circle_error(kind, m, &c0, &p, t_end, |t| {
                    orc.advance_to(t)
                })
                .map_err(|e| e.error)?;
                err
            }
        };
        Ok((j, h, err))
    };

    // the runs are pure; execute them concurrently and order rows by J
    let mut results: Vec<Result<(usize, f64, f64)>> = Vec::new();
    std::thread::scope(|scope| {
        let handles: Vec<_> = js.iter().map(|j| scope.spawn(move || run_one(j))).collect();
        for h in handles {
            results.push(h.join().expect("convergence worker panicked"));
        }
    });
    let mut rows = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for res in results {
        let (j, h, error) = res?;
        let eoc = prev.map(|(hp, ep)| (ep / error).ln() / (hp / h).ln());
        rows.push(ConvergenceRow { j, h, error, eoc });
        prev = Some((h, error));
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut s = String::from("J,h,error,eoc\n");
    for r in rows {
        let eoc = r.eoc.map(|e| format!("{e:.6}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:.16e},{:.16e},{}", r.j, r.h, r.error, eoc);
    }
    s
}

fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x:.16e}"),
        None => "nan".into(),
    }
}

/// Result summary of an `evolve`/`geodesic` run.
pub struct EvolveOutcome {
    pub trajectory: Trajectory,
    pub diagnostics_csv: String,
}

/// Runs an evolution, collecting the per-step diagnostics CSV
/// (`step,t,L,A,W,ratio,picard_iters`) and writing polyline snapshots at the
/// configured cadence into `outdir`.
pub fn evolve(cfg: &RunConfig) -> std::result::Result<EvolveOutcome, EvolutionError> {
    let c0 = match cfg.build_curve() {
        Ok(c) => c,
        Err(e) => {
            return Err(EvolutionError {
                step: 0,
                error: e,
                partial: Trajectory {
                    initial: crate::curve::Diagnostics {
                        length: f64::NAN,
                        area: None,
                        elastic_energy: None,
                        ratio: f64::NAN,
                        min_edge: f64::NAN,
                        max_edge: f64::NAN,
                    },
                    records: Vec::new(),
                    final_curve: curve::initial_circle(2.0, 1.0, 3).unwrap(),
                    final_curvature: None,
                },
            })
        }
    };
    let mut csv = String::from("step,t,L,A,W,ratio,picard_iters\n");
    let map_err = |e: Error| EvolutionError {
        step: 0,
        error: e,
        partial: Trajectory {
            initial: crate::curve::Diagnostics {
                length: f64::NAN,
                area: None,
                elastic_energy: None,
                ratio: f64::NAN,
                min_edge: f64::NAN,
                max_edge: f64::NAN,
            },
            records: Vec::new(),
            final_curve: c0.clone(),
            final_curvature: None,
        },
    };
    let init_diag = curve::diagnostics(&cfg.metric, &c0, None).map_err(&map_err)?;
    let _ = writeln!(
        csv,
        "0,{:.16e},{:.16e},{},nan,{:.16e},0",
        0.0,
        init_diag.length,
        fmt_opt(init_diag.area),
        init_diag.ratio
    );
    if let Some(dir) = &cfg.outdir {
        std::fs::create_dir_all(dir).map_err(|e| map_err(Error::Io(e.to_string())))?;
        write_snapshot(dir, 0, &c0).map_err(&map_err)?;
    }
    let cadence = cfg.cadence;
    let mut last_bucket = 0i64;
    let mut snapshot_err: Option<Error> = None;
    let traj = flows::run_evolution(
        cfg.scheme,
        &cfg.metric,
        &c0,
        &cfg.params(),
        cfg.t_end,
        |step, t, report| {
            let _ = writeln!(
                csv,
                "{},{:.16e},{:.16e},{},{},{:.16e},{}",
                step,
                t,
                report.after.length,
                fmt_opt(report.after.area),
                fmt_opt(report.after.elastic_energy),
                report.after.ratio,
                report.picard_iterations
            );
            if cadence > 0.0 {
                let bucket = (t / cadence + 1e-12).floor() as i64;
                if bucket > last_bucket {
                    last_bucket = bucket;
                    if let Some(dir) = &cfg.outdir {
                        if let Err(e) = write_snapshot(dir, step, &report.curve) {
                            snapshot_err.get_or_insert(e);
                        }
                    }
                }
            }
        },
    )?;
    if let Some(e) = snapshot_err {
        return Err(map_err(e));
    }
    if let Some(dir) = &cfg.outdir {
        let last = traj.records.last().map(|r| r.step).unwrap_or(0);
        write_snapshot(dir, last, &traj.final_curve).map_err(&map_err)?;
        std::fs::write(dir.join("diag.csv"), &csv).map_err(|e| map_err(Error::Io(e.to_string())))?;
    }
    Ok(EvolveOutcome { trajectory: traj, diagnostics_csv: csv })
}

fn write_snapshot(dir: &Path, step: usize, c: &Curve) -> Result<()> {
    std::fs::write(dir.join(format!("curve_{step}.txt")), curve::polyline_string(c))?;
    Ok(())
}

// --- command line interface -------------------------------------------------

fn parse_cli(args: &[String]) -> Result<(String, BTreeMap<String, String>)> {
    if args.is_empty() {
        return Err(Error::Config(
            "usage: curveflow <evolve|converge|geodesic|oracle|lift> [--config FILE] [--key value ...]"
                .into(),
        ));
    }
    let sub = args[0].clone();
    let mut overrides = BTreeMap::new();
    let mut map = BTreeMap::new();
    let mut i = 1;
    while i < args.len() {
        let a = &args[i];
        let key = a
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key, got '{a}'")))?;
        let val = args
            .get(i + 1)
            .ok_or_else(|| Error::Config(format!("missing value for --{key}")))?;
        overrides.insert(key.to_string(), val.clone());
        i += 2;
    }
    if let Some(path) = overrides.remove("config") {
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Error::Config(format!("cannot read config '{path}': {e}")))?;
        map = parse_config_text(&text)?;
    }
    // `--out` is shorthand for the output directory
    if let Some(out) = overrides.remove("out") {
        map.insert("outdir".into(), out);
    }
    map.extend(overrides);
    Ok((sub, map))
}

fn oracle_table(map: &BTreeMap<String, String>) -> Result<String> {
    let kind = map
        .get("kind")
        .ok_or_else(|| Error::Config("oracle needs --kind".into()))?
        .as_str();
    let t_end = get_f64(map, "t_end")?.unwrap_or(0.1);
    let samples = get_usize(map, "samples")?.unwrap_or(11);
    let mut out = String::new();
    match kind {
        "hyperbolic_cf" => {
            let a0 = get_f64(map, "a0")?.unwrap_or(2.0);
            let r0 = get_f64(map, "r0")?.unwrap_or(1.0);
            out.push_str("t,a,r,sigma\n");
            for k in 0..samples {
                let t = t_end * k as f64 / (samples.max(2) - 1) as f64;
                let (a, r) = oracle::hyperbolic_cf_circle(a0, r0, t)?;
                let _ = writeln!(out, "{t:.16e},{a:.16e},{r:.16e},{:.16e}", a / r);
            }
        }
        "hyperbolic_elastic" => {
            let a0 = get_f64(map, "a0")?.unwrap_or(1.1);
            let r0 = get_f64(map, "r0")?.unwrap_or(1.0);
            out.push_str("t,a,r,sigma\n");
            for k in 0..samples {
                let t = t_end * k as f64 / (samples.max(2) - 1) as f64;
                let (a, r, s) = oracle::hyperbolic_elastic_circle(a0, r0, t)?;
                let _ = writeln!(out, "{t:.16e},{a:.16e},{r:.16e},{s:.16e}");
            }
        }
        "alpha_cf" => {
            let alpha = get_f64(map, "alpha")?.unwrap_or(-1.0);
            let r0 = get_f64(map, "r0")?.unwrap_or(0.5);
            out.push_str("t,r,R\n");
            for k in 0..samples {
                let t = t_end * k as f64 / (samples.max(2) - 1) as f64;
                let r = oracle::alpha_cf_circle(alpha, r0, t)?;
                let big_r = 2.0 * r / (1.0 + r * r);
                let _ = writeln!(out, "{t:.16e},{r:.16e},{big_r:.16e}");
            }
        }
        "alpha_elastic" => {
            let alpha = get_f64(map, "alpha")?.unwrap_or(-1.0);
            let r0 = get_f64(map, "r0")?.unwrap_or(0.5);
            out.push_str("t,r,R\n");
            for k in 0..samples {
                let t = t_end * k as f64 / (samples.max(2) - 1) as f64;
                let r = oracle::alpha_elastic_circle(alpha, r0, t)?;
                let big_r = 2.0 * r / (1.0 + r * r);
                let _ = writeln!(out, "{t:.16e},{r:.16e},{big_r:.16e}");
            }
        }
        other => return Err(Error::Config(format!("unknown oracle kind '{other}'"))),
    }
    Ok(out)
}

fn numerical_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::SingularSystem { .. }
            | Error::PicardDivergence(_)
            | Error::DomainExit { .. }
            | Error::DegenerateEdge { .. }
            | Error::Domain(_, _)
            | Error::PastExtinction { .. }
            | Error::VanishingVertexNormal(_)
    )
}

/// Entry point of the command line tool; returns the process exit code
/// (0 success, 2 configuration error, 3 numerical failure).
pub fn cli_main(args: &[String]) -> i32 {
    match cli_inner(args) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if numerical_failure(&e) {
                3
            } else {
                2
            }
        }
    }
}

fn cli_inner(args: &[String]) -> Result<()> {
    let (sub, map) = parse_cli(args)?;
    match sub.as_str() {
        "evolve" | "geodesic" => {
            let cfg = config_from_map(&map)?;
            if sub == "geodesic" && !matches!(cfg.scheme, SchemeKind::CfAOpen) {
                return Err(Error::Config("geodesic runs use scheme 'aopen'".into()));
            }
            match evolve(&cfg) {
                Ok(outcome) => {
                    if cfg.outdir.is_none() {
                        print!("{}", outcome.diagnostics_csv);
                    }
                    let final_len = outcome
                        .trajectory
                        .records
                        .last()
                        .map(|r| r.length)
                        .unwrap_or(outcome.trajectory.initial.length);
                    eprintln!("final length {final_len:.6}");
                    if sub == "geodesic" {
                        println!("final_length={final_len:.16e}");
                    }
                    Ok(())
                }
                Err(fail) => {
                    // dump the last valid state before reporting failure
                    if let Some(dir) = &cfg.outdir {
                        let _ = std::fs::create_dir_all(dir);
                        let _ = std::fs::write(
                            dir.join("last_valid.txt"),
                            curve::polyline_string(&fail.partial.final_curve),
                        );
                    }
                    eprintln!("run failed at step {}", fail.step);
                    Err(fail.error)
                }
            }
        }
        "converge" => {
            let cfg = config_from_map(&map)?;
            let (a0, r0) = match cfg.init {
                InitKind::Circle { a0, r0, .. } => (a0, r0),
                _ => return Err(Error::Config("converge requires circle initial data".into())),
            };
            if cfg.js.is_empty() {
                return Err(Error::Config("converge needs a 'js' list".into()));
            }
            let rows = convergence_study(
                cfg.scheme,
                &cfg.metric,
                a0,
                r0,
                cfg.t_end,
                &cfg.js,
                cfg.picard_tol,
                cfg.picard_max,
            )?;
            let csv = convergence_csv(&rows);
            if let Some(dir) = &cfg.outdir {
                std::fs::create_dir_all(dir)?;
                std::fs::write(dir.join("convergence.csv"), &csv)?;
            }
            print!("{csv}");
            Ok(())
        }
        "oracle" => {
            let csv = oracle_table(&map)?;
            print!("{csv}");
            Ok(())
        }
        "lift" => {
            let chart = ChartMap::parse(
                map.get("chart").ok_or_else(|| Error::Config("lift needs --chart".into()))?,
            )?;
            let input = map.get("input").ok_or_else(|| Error::Config("lift needs --input".into()))?;
            let output =
                map.get("output").ok_or_else(|| Error::Config("lift needs --output".into()))?;
            let c = curve::parse_polyline(&std::fs::read_to_string(input)?)?;
            let lifted = surface::lift_curve(&chart, &c);
            std::fs::write(output, surface::lifted_polyline_string(&lifted, c.is_closed()))?;
            Ok(())
        }
        other => Err(Error::Config(format!("unknown subcommand '{other}'"))),
    }
}
