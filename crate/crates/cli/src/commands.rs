use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use bidlab::classes::{class_d_for_robustness, class_i_pareto_slopes, write_tradeoff_csv, Source, TradeoffPoint};
use bidlab::evaluation::{parse_grid, sweep_sigma, write_sweep_csv, Algorithm};
use bidlab::format::fmt12;
use bidlab::function::{sample_sequence, BiddingFunction};
use bidlab::lower_bound::{build_dual_certificate, build_primal, export_lp_text, lower_bound_curve, write_curve_csv};
use bidlab::median::{
    load_graph, load_or_compute_baselines, run_experiment, synthetic_road_graph, write_median_csv, ExperimentConfig,
    Metric, Universe,
};
use bidlab::pareto::{build_polynomial_family, write_qk_csv, RegimeParams};
use serde_json::json;

use crate::run_config::RunConfig;
use crate::{ExportLpArgs, LowerBoundArgs, MassArgs, MedianArgs, ParetoArgs, SampleArgs, SimulateArgs, TradeoffArgs};

/// A failure with the machine-readable code printed on exit.
#[derive(Debug)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: io::Error) -> Self {
        CliError::new("IO_ERROR", format!("{}: {e}", path.display()))
    }

    fn invalid(message: impl Into<String>) -> Self {
        CliError::new("INVALID_ARGUMENT", message)
    }
}

impl From<bidlab::Error> for CliError {
    fn from(e: bidlab::Error) -> Self {
        CliError::new(e.code(), e.to_string())
    }
}

type Result<T> = std::result::Result<T, CliError>;

/// Runs `f` against the file at `out`, or against stdout.
fn emit(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| CliError::io(path, e))?;
            let mut w = BufWriter::new(file);
            f(&mut w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut w = stdout.lock();
            match f(&mut w) {
                // A closed pipe (e.g. `| head`) is not a failure of the run.
                Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
                r => r.map_err(|e| CliError::io(Path::new("<stdout>"), e)),
            }
        }
    }
}

fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    Ok(list
        .split(',')
        .map(|s| Algorithm::parse(s.trim()))
        .collect::<bidlab::Result<_>>()?)
}

/// `steps` evenly spaced values from `lo` to `hi`, both included.
fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

pub fn tradeoff(a: TradeoffArgs) -> Result<()> {
    let e = std::f64::consts::E;
    if !(a.r_min >= e - 1e-12 && a.r_max > a.r_min && a.r_min.is_finite() && a.r_max.is_finite()) {
        return Err(CliError::invalid(format!(
            "need e <= r_min < r_max, got r_min = {}, r_max = {}",
            a.r_min, a.r_max
        )));
    }
    if a.steps < 2 {
        return Err(CliError::invalid("steps must be at least 2"));
    }
    let grid = linspace(a.r_min.max(e), a.r_max, a.steps);
    let mut points = Vec::with_capacity(5 * grid.len());
    // Every class-E function has constant normalized mass, so B(t) = e^t is
    // the best one under any robustness budget r >= e.
    points.extend(grid.iter().map(|&r| TradeoffPoint {
        r,
        c: e,
        source: Source::ClassE,
    }));
    for &r in &grid {
        points.push(TradeoffPoint {
            r,
            c: class_d_for_robustness(r)?.1,
            source: Source::ClassD,
        });
    }
    for &r in &grid {
        points.push(TradeoffPoint {
            r,
            c: class_i_pareto_slopes(r)?.1,
            source: Source::ClassI,
        });
    }
    for &r in &grid {
        points.push(TradeoffPoint {
            r,
            c: RegimeParams::new(r)?.predicted_consistency(),
            source: Source::AlgorithmA,
        });
    }
    points.extend(lower_bound_curve(&grid, a.a, a.n)?);
    emit(a.out.as_deref(), |w| write_tradeoff_csv(&points, w))?;
    RunConfig::new(
        "tradeoff",
        None,
        a.out.as_deref(),
        json!({"r_min": a.r_min, "r_max": a.r_max, "steps": a.steps, "a": a.a, "n": a.n}),
    )
    .log()
}

pub fn pareto(a: ParetoArgs) -> Result<()> {
    let family = build_polynomial_family(a.r, a.tail_tol)?;
    let b = family.to_function()?;
    if let Some(path) = &a.emit {
        b.save(path)?;
    }
    if let Some(path) = &a.emit_qk {
        emit(Some(path), |w| write_qk_csv(&family, w))?;
    }
    let p = family.params;
    if a.emit.is_none() && a.emit_qk.is_none() {
        println!("{}", b.to_json());
    } else {
        println!(
            "{}",
            json!({
                "r": p.r,
                "regime": p.regime,
                "w_hi": p.w_hi,
                "consistency": p.predicted_consistency(),
                "k_max": family.k_max,
            })
        );
    }
    RunConfig::new(
        "pareto",
        None,
        a.emit.as_deref().or(a.emit_qk.as_deref()),
        json!({"r": a.r, "tail_tol": a.tail_tol, "emit": a.emit, "emit_qk": a.emit_qk}),
    )
    .log()
}

pub fn mass(a: MassArgs) -> Result<()> {
    if !(a.step > 0.0 && a.t_max >= a.t_min) {
        return Err(CliError::invalid("need step > 0 and t_max >= t_min"));
    }
    let b = BiddingFunction::load(&a.function)?;
    let n = ((a.t_max - a.t_min) / a.step + 1e-9).floor() as usize;
    emit(a.out.as_deref(), |w| {
        writeln!(w, "t,B,CR,work")?;
        for i in 0..=n {
            let t = a.t_min + i as f64 * a.step;
            writeln!(
                w,
                "{},{},{},{}",
                fmt12(t),
                fmt12(b.value(t)),
                fmt12(b.normalized_mass(t)),
                fmt12(b.work(t))
            )?;
        }
        Ok(())
    })?;
    RunConfig::new(
        "mass",
        None,
        a.out.as_deref(),
        json!({"function": a.function, "t_min": a.t_min, "t_max": a.t_max, "step": a.step}),
    )
    .log()
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let b = BiddingFunction::load(&a.function)?;
    let (s, cost) = sample_sequence(&b, a.seed, a.threshold)?;
    let summary = json!({
        "lambda": s.lambda,
        "window": s.window,
        "cost": cost,
        "normalized_cost": cost / a.threshold,
    });
    match &a.out {
        Some(path) => {
            emit(Some(path), |w| {
                writeln!(w, "i,bid")?;
                for (i, bid) in (s.window.0..).zip(&s.bids) {
                    writeln!(w, "{i},{}", fmt12(*bid))?;
                }
                Ok(())
            })?;
            println!("{summary}");
        }
        None => {
            let mut full = summary;
            full["bids"] = json!(s.bids);
            println!("{full}");
        }
    }
    RunConfig::new(
        "sample",
        Some(a.seed),
        a.out.as_deref(),
        json!({"function": a.function, "threshold": a.threshold}),
    )
    .log()
}

pub fn lower_bound(a: LowerBoundArgs) -> Result<()> {
    let cert = build_dual_certificate(a.a, a.n, a.r)?;
    let text = serde_json::to_string_pretty(&cert).map_err(|e| CliError::new("IO_ERROR", e.to_string()))?;
    emit(a.out.as_deref(), |w| writeln!(w, "{text}"))?;
    if let (Some(grid), Some(path)) = (&a.curve, &a.curve_out) {
        let rs = parse_grid(grid)?;
        let points = lower_bound_curve(&rs, a.a, a.n)?;
        emit(Some(path), |w| write_curve_csv(&points, a.a, a.n, w))?;
    }
    RunConfig::new(
        "lower-bound",
        None,
        a.out.as_deref().or(a.curve_out.as_deref()),
        json!({"r": a.r, "a": a.a, "n": a.n, "curve": a.curve, "curve_out": a.curve_out}),
    )
    .log()
}

pub fn export_lp(a: ExportLpArgs) -> Result<()> {
    let lp = build_primal(a.r, a.a, a.n, a.m)?;
    export_lp_text(&lp, &a.out)?;
    RunConfig::new(
        "export-lp",
        None,
        Some(&a.out),
        json!({"r": a.r, "a": a.a, "n": a.n, "m": a.m}),
    )
    .log()
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let grid = parse_grid(&a.sigma2)?;
    let algorithms = parse_algorithms(&a.algos)?;
    let rows = sweep_sigma(&algorithms, a.r, &grid, a.trials, a.seed)?;
    emit(a.out.as_deref(), |w| write_sweep_csv(&rows, w))?;
    RunConfig::new(
        "simulate",
        Some(a.seed),
        a.out.as_deref(),
        json!({"r": a.r, "sigma2": a.sigma2, "trials": a.trials, "algos": a.algos}),
    )
    .log()
}

pub fn median(a: MedianArgs) -> Result<()> {
    let graph = match (&a.graph, a.synthetic) {
        (Some(path), None) => load_graph(path)?,
        (None, Some(n)) => synthetic_road_graph(n, 3, a.graph_seed)?,
        _ => return Err(CliError::invalid("give exactly one of --graph and --synthetic")),
    };
    let algorithms = parse_algorithms(&a.algos)?;
    let metric = Metric::new(&graph)?;
    let baselines = load_or_compute_baselines(&graph, &metric, a.seed, a.cache.as_deref())?;
    let universe = Universe::new(&baselines, graph.vertex_count())?;
    let cfg = ExperimentConfig {
        r: a.r,
        k_hat: a.k_hat,
        trials: a.trials,
        seed: a.seed,
        fill: a.fill,
    };
    let result = run_experiment(&metric, &universe, &algorithms, &cfg)?;
    emit(a.out.as_deref(), |w| write_median_csv(&result.rows, w))?;
    if a.out.is_some() {
        println!(
            "{}",
            json!({"min_ratio": result.min_ratio, "all_nested": result.all_nested})
        );
    }
    RunConfig::new(
        "median",
        Some(a.seed),
        a.out.as_deref(),
        json!({
            "graph": a.graph,
            "synthetic": a.synthetic,
            "graph_seed": a.graph_seed,
            "graph_hash": graph.content_hash(),
            "r": a.r,
            "k_hat": a.k_hat,
            "algos": a.algos,
            "trials": a.trials,
            "cache": a.cache,
            "fill": a.fill,
        }),
    )
    .log()
}
