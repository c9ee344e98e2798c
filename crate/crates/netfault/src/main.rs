use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use netfault::plant::LeaderMode;
use netfault::plot::{write_chart, ChartSpec, Series};
use netfault::runner::{
    run_closed_loop, run_scenario, sweep_fault_count, write_centralized_csv,
    write_distributed_csv, write_summary_json, write_sweep_csv, EstimatorRun, ScenarioRunResult,
    SweepSpec,
};
use netfault::scenario::{EstimatorChoice, Scenario};

#[derive(Parser)]
#[command(
    name = "netfault",
    version,
    about = "Simulate relative-measurement agent networks and run l1 state-and-fault estimators"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario file and write traces, a summary and plots.
    Run(RunArgs),
    /// Rerun a scenario with growing fault-node counts and compare errors.
    Sweep(SweepArgs),
    /// Re-render plots from a previously written trace CSV.
    Plot(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Override the scenario's estimator list (repeatable):
    /// l1, l1_denoise, kalman, distributed.
    #[arg(long = "estimator")]
    estimators: Vec<String>,
    /// Output directory for traces and plots.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Override the scenario seed (refreshes randomized faults).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the distributed consensus weight.
    #[arg(long)]
    zeta: Option<f64>,
    /// Add the distributed estimator to the run (shorthand for
    /// `--estimator distributed`).
    #[arg(long)]
    distributed: bool,
    /// Override the distributed round budget per step.
    #[arg(long = "lmax")]
    l_max: Option<usize>,
    /// Override the round budget for steps without the leader's absolute
    /// measurement (defaults to the regular budget).
    #[arg(long = "lmax-blind")]
    l_max_blind: Option<usize>,
    /// Override the distributed fault-detection threshold.
    #[arg(long = "detect-eps")]
    detect_eps: Option<f64>,
    /// Close the loop: feed each estimator's state estimate to the controller
    /// instead of the true state (centralized estimators only).
    #[arg(long)]
    control_from_estimate: bool,
    /// Skip SVG plot generation.
    #[arg(long)]
    no_plots: bool,
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario TOML file; its fault table is replaced per sweep cell.
    scenario: PathBuf,
    /// Largest fault-node count; cells cover 1..=max_faults.
    #[arg(long = "max-faults", default_value_t = 6)]
    max_faults: usize,
    /// Inclusive fault window start and end steps.
    #[arg(long, num_args = 2, value_names = ["START", "END"], default_values_t = [100, 300])]
    window: Vec<usize>,
    /// Per-agent coordinates the random faults drive (repeatable).
    #[arg(long = "coord")]
    coords: Vec<usize>,
    /// Uniform fault-value range.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true, default_values_t = [-10.0, 10.0])]
    range: Vec<f64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Trace CSV written by `netfault run`.
    trace: PathBuf,
    /// Output directory; defaults to the trace's directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            eprint!("{e}");
            std::process::exit(1);
        }
        Err(e) => {
            // --help and --version land here.
            print!("{e}");
            std::process::exit(0);
        }
    };
    let code = match cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Sweep(args) => cmd_sweep(args),
        Cmd::Plot(args) => cmd_plot(args),
    };
    std::process::exit(code);
}

fn load_scenario(path: &Path) -> Result<Scenario, i32> {
    Scenario::load(path).map_err(|e| {
        eprintln!("error: {e}");
        1
    })
}

fn ensure_dir(dir: &Path) -> Result<(), i32> {
    std::fs::create_dir_all(dir).map_err(|e| {
        eprintln!("error: cannot create {}: {e}", dir.display());
        2
    })
}

fn runtime_err(e: impl std::fmt::Display) -> i32 {
    eprintln!("error: {e}");
    2
}

fn cmd_run(args: RunArgs) -> i32 {
    let mut sc = match load_scenario(&args.scenario) {
        Ok(sc) => sc,
        Err(code) => return code,
    };
    if let Some(seed) = args.seed {
        // Randomized faults must follow the new seed: reload with it.
        let text = match std::fs::read_to_string(&args.scenario) {
            Ok(t) => t,
            Err(e) => return runtime_err(e),
        };
        let patched = patch_seed(&text, seed);
        sc = match Scenario::from_toml_str(&patched) {
            Ok(sc) => sc,
            Err(e) => {
                eprintln!("error: {e}");
                return 1;
            }
        };
    }
    if !args.estimators.is_empty() {
        let mut choices = Vec::new();
        for name in &args.estimators {
            match EstimatorChoice::from_name(name) {
                Some(c) if !choices.contains(&c) => choices.push(c),
                Some(_) => {}
                None => {
                    eprintln!("error: unknown estimator {name:?}");
                    return 1;
                }
            }
        }
        sc.estimators = choices;
    }
    if args.distributed && !sc.estimators.contains(&EstimatorChoice::Distributed) {
        sc.estimators.push(EstimatorChoice::Distributed);
    }
    if let Some(zeta) = args.zeta {
        sc.distributed.zeta = zeta;
    }
    if let Some(l_max) = args.l_max {
        sc.distributed.l_max = l_max;
    }
    if let Some(l_max_blind) = args.l_max_blind {
        sc.distributed.l_max_blind = Some(l_max_blind);
    }
    if let Some(eps) = args.detect_eps {
        sc.distributed.detect_eps = eps;
    }
    if let Err(e) = sc.distributed.validate() {
        eprintln!("error: {e}");
        return 1;
    }

    if let Err(code) = ensure_dir(&args.out) {
        return code;
    }

    if args.control_from_estimate {
        let runs = match run_closed_loop(&sc) {
            Ok(runs) => runs,
            Err(e) => return runtime_err(e),
        };
        for run in &runs {
            let path = args
                .out
                .join(format!("{}_{}_closedloop.csv", sc.name, run.choice.name()));
            if let Err(e) = write_centralized_csv(&path, &run.run) {
                return runtime_err(e);
            }
            println!("wrote {}", path.display());
            report_run(&run.run);
        }
        if !args.no_plots {
            let spec = error_chart(
                format!("{} closed loop", sc.name),
                runs.iter().map(|r| &r.run),
                &sc,
            );
            let path = args.out.join(format!("{}_closedloop_error.svg", sc.name));
            if let Err(e) = write_chart(&path, &spec) {
                return runtime_err(e);
            }
            println!("wrote {}", path.display());
        }
        return 0;
    }

    let result = match run_scenario(&sc) {
        Ok(r) => r,
        Err(e) => return runtime_err(e),
    };
    for run in &result.centralized {
        let path = args
            .out
            .join(format!("{}_{}.csv", sc.name, run.choice.name()));
        if let Err(e) = write_centralized_csv(&path, run) {
            return runtime_err(e);
        }
        println!("wrote {}", path.display());
        report_run(run);
    }
    if let Some(drun) = &result.distributed {
        let path = args.out.join(format!("{}_distributed.csv", sc.name));
        if let Err(e) = write_distributed_csv(&path, &result.truth, drun) {
            return runtime_err(e);
        }
        println!("wrote {}", path.display());
        let worst = drun
            .rows
            .iter()
            .flat_map(|row| {
                let x = &result.truth.steps[row.k].x;
                row.record.estimates.iter().map(move |e| (e - x).norm())
            })
            .fold(0.0, f64::max);
        let flagged: BTreeSet<usize> = drun
            .rows
            .iter()
            .flat_map(|r| r.record.flagged.iter().flatten().copied())
            .collect();
        println!("  distributed: max node err_x_l2 {worst:.3e}, nodes ever flagged {flagged:?}");
    }
    let summary = args.out.join(format!("{}_summary.json", sc.name));
    if let Err(e) = write_summary_json(&summary, &result) {
        return runtime_err(e);
    }
    println!("wrote {}", summary.display());

    if !args.no_plots {
        if let Err(code) = write_run_plots(&args.out, &sc, &result) {
            return code;
        }
    }
    0
}

/// Replaces (or inserts) the top-level seed assignment in a scenario text.
fn patch_seed(text: &str, seed: u64) -> String {
    let mut lines: Vec<String> = Vec::new();
    let mut replaced = false;
    let mut in_table = false;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with('[') {
            in_table = true;
        }
        if !in_table && !replaced && trimmed.starts_with("seed") {
            let rest = trimmed["seed".len()..].trim_start();
            if rest.starts_with('=') {
                lines.push(format!("seed = {seed}"));
                replaced = true;
                continue;
            }
        }
        lines.push(line.to_string());
    }
    if !replaced {
        // Put it before the first table so it stays top-level.
        let at = lines
            .iter()
            .position(|l| l.trim_start().starts_with('['))
            .unwrap_or(lines.len());
        lines.insert(at, format!("seed = {seed}"));
    }
    lines.join("\n") + "\n"
}

fn report_run(run: &EstimatorRun) {
    let max_err = run.rows.iter().map(|r| r.err_x_l2).fold(0.0, f64::max);
    let final_err = run.rows.last().map_or(0.0, |r| r.err_x_l2);
    let max_f = run.rows.iter().map(|r| r.err_f_l1).fold(0.0, f64::max);
    println!(
        "  {}: max err_x_l2 {max_err:.3e}, final {final_err:.3e}, max err_f_l1 {max_f:.3e}",
        run.choice.name()
    );
}

fn mode_switches(sc: &Scenario) -> Vec<f64> {
    let mut out = Vec::new();
    let mut prev = LeaderMode::Active;
    for k in 0..sc.horizon {
        let mode = sc.mode_at(k);
        if k > 0 && mode != prev {
            out.push(k as f64);
        }
        prev = mode;
    }
    out
}

fn error_chart<'a>(
    title: String,
    runs: impl Iterator<Item = &'a EstimatorRun>,
    sc: &Scenario,
) -> ChartSpec {
    let mut spec = ChartSpec::new(title, "step k", "state error (l2)");
    spec.log_y = true;
    spec.vlines = mode_switches(sc);
    for run in runs {
        spec.series.push(Series::new(
            run.choice.name(),
            run.rows.iter().map(|r| (r.k as f64, r.err_x_l2)).collect(),
        ));
    }
    spec
}

fn write_run_plots(out: &Path, sc: &Scenario, result: &ScenarioRunResult) -> Result<(), i32> {
    let mut error = error_chart(
        format!("{} state error", sc.name),
        result.centralized.iter(),
        sc,
    );
    if let Some(drun) = &result.distributed {
        let series: Vec<(f64, f64)> = drun
            .rows
            .iter()
            .map(|row| {
                let x = &result.truth.steps[row.k].x;
                let worst = row
                    .record
                    .estimates
                    .iter()
                    .map(|e| (e - x).norm())
                    .fold(0.0, f64::max);
                (row.k as f64, worst)
            })
            .collect();
        error
            .series
            .push(Series::new("distributed (worst node)", series));
    }
    write_plot(out, &format!("{}_error.svg", sc.name), &error)?;

    let n = sc.plant.node_state_dim();
    let m = sc.plant.node_count();
    let mut states = ChartSpec::new(
        format!("{} coordinate 0 per node", sc.name),
        "step k",
        "state coordinate 0",
    );
    states.vlines = mode_switches(sc);
    for node0 in 0..m {
        states.series.push(Series::new(
            format!("x{} true", node0 + 1),
            result
                .truth
                .steps
                .iter()
                .map(|s| (s.k as f64, s.x[node0 * n]))
                .collect(),
        ));
    }
    for run in &result.centralized {
        for node0 in 0..m {
            states.series.push(Series::new(
                format!("x{} {}", node0 + 1, run.choice.name()),
                run.rows
                    .iter()
                    .map(|r| (r.k as f64, r.x_hat[node0 * n]))
                    .collect(),
            ));
        }
    }
    write_plot(out, &format!("{}_states.svg", sc.name), &states)?;

    let mut faults = ChartSpec::new(
        format!("{} fault block norms", sc.name),
        "step k",
        "per-node fault l2",
    );
    faults.vlines = mode_switches(sc);
    for node0 in 0..m {
        faults.series.push(Series::new(
            format!("f{} true", node0 + 1),
            result
                .truth
                .steps
                .iter()
                .map(|s| (s.k as f64, s.fault.rows(node0 * n, n).norm()))
                .collect(),
        ));
    }
    for run in &result.centralized {
        for node0 in 0..m {
            faults.series.push(Series::new(
                format!("f{} {}", node0 + 1, run.choice.name()),
                run.rows
                    .iter()
                    .map(|r| (r.k as f64, r.f_hat.rows(node0 * n, n).norm()))
                    .collect(),
            ));
        }
    }
    write_plot(out, &format!("{}_faults.svg", sc.name), &faults)?;
    Ok(())
}

fn write_plot(out: &Path, file: &str, spec: &ChartSpec) -> Result<(), i32> {
    let path = out.join(file);
    write_chart(&path, spec).map_err(|e| runtime_err(e))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> i32 {
    let mut sc = match load_scenario(&args.scenario) {
        Ok(sc) => sc,
        Err(code) => return code,
    };
    if let Some(seed) = args.seed {
        sc.seed = seed;
    }
    if args.max_faults == 0 {
        eprintln!("error: --max-faults must be at least 1");
        return 1;
    }
    let coords = if args.coords.is_empty() {
        vec![2]
    } else {
        args.coords.clone()
    };
    let spec = SweepSpec {
        fault_counts: (1..=args.max_faults).collect(),
        window: (args.window[0], args.window[1]),
        coords,
        range: (args.range[0], args.range[1]),
    };
    let cells = match sweep_fault_count(&sc, &spec) {
        Ok(cells) => cells,
        Err(e) => return runtime_err(e),
    };
    if let Err(code) = ensure_dir(&args.out) {
        return code;
    }
    let csv = args.out.join(format!("{}_sweep.csv", sc.name));
    if let Err(e) = write_sweep_csv(&csv, &cells) {
        return runtime_err(e);
    }
    println!("wrote {}", csv.display());
    for cell in &cells {
        println!(
            "  {} faulty: cumulative err_x_l2 {:.6e}",
            cell.fault_count, cell.cumulative_err_x_l2
        );
    }

    let mut chart = ChartSpec::new(
        format!("{} error vs fault count", sc.name),
        "faulty nodes",
        "cumulative state error (l2)",
    );
    chart.log_y = true;
    chart.series.push(Series::new(
        "l1",
        cells
            .iter()
            .map(|c| (c.fault_count as f64, c.cumulative_err_x_l2))
            .collect(),
    ));
    let svg = args.out.join(format!("{}_sweep.svg", sc.name));
    if let Err(e) = write_chart(&svg, &chart) {
        return runtime_err(e);
    }
    println!("wrote {}", svg.display());
    0
}

fn cmd_plot(args: PlotArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.trace) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", args.trace.display());
            return 1;
        }
    };
    let mut lines = text.lines();
    let header: Vec<&str> = match lines.next() {
        Some(h) => h.split(',').collect(),
        None => {
            eprintln!("error: empty trace file");
            return 1;
        }
    };
    let rows: Vec<Vec<&str>> = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').collect())
        .collect();
    if rows.is_empty() {
        eprintln!("error: trace has no data rows");
        return 1;
    }
    let col = |name: &str| header.iter().position(|h| *h == name);
    let (Some(k_col), Some(err_col)) = (col("k"), col("err_x_l2")) else {
        eprintln!("error: trace lacks the k and err_x_l2 columns");
        return 1;
    };
    let parse = |s: &str| s.parse::<f64>().ok();

    let out_dir = args
        .out
        .clone()
        .unwrap_or_else(|| args.trace.parent().unwrap_or(Path::new(".")).to_path_buf());
    if let Err(code) = ensure_dir(&out_dir) {
        return code;
    }
    let stem = args
        .trace
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "trace".into());

    let mut spec = ChartSpec::new(stem.clone(), "step k", "error");
    spec.log_y = true;
    if let Some(node_col) = col("node") {
        // Distributed trace: one error series per node.
        let nodes: BTreeSet<&str> = rows.iter().map(|r| r[node_col]).collect();
        for node in nodes {
            spec.series.push(Series::new(
                format!("node {node} err_x_l2"),
                rows.iter()
                    .filter(|r| r[node_col] == node)
                    .filter_map(|r| Some((parse(r[k_col])?, parse(r[err_col])?)))
                    .collect(),
            ));
        }
    } else {
        spec.series.push(Series::new(
            "err_x_l2",
            rows.iter()
                .filter_map(|r| Some((parse(r[k_col])?, parse(r[err_col])?)))
                .collect(),
        ));
        if let Some(f_col) = col("err_f_l1") {
            spec.series.push(Series::new(
                "err_f_l1",
                rows.iter()
                    .filter_map(|r| Some((parse(r[k_col])?, parse(r[f_col])?)))
                    .collect(),
            ));
        }
    }
    let path = out_dir.join(format!("{stem}_error.svg"));
    if let Err(e) = write_chart(&path, &spec) {
        return runtime_err(e);
    }
    println!("wrote {}", path.display());

    // State overlay: truth columns solid, estimate columns from the same
    // index, capped to keep the chart readable.
    let state_prefix = if col("xhat_0").is_some() {
        Some("xhat")
    } else if col("chihat_0").is_some() {
        Some("chihat")
    } else {
        None
    };
    if let Some(prefix) = state_prefix {
        let mut states = ChartSpec::new(format!("{stem} states"), "step k", "state");
        let mut i = 0;
        while i < 6 {
            let (Some(xc), Some(hc)) = (col(&format!("x_{i}")), col(&format!("{prefix}_{i}")))
            else {
                break;
            };
            states.series.push(Series::new(
                format!("x_{i} true"),
                rows.iter()
                    .filter_map(|r| Some((parse(r[k_col])?, parse(r[xc])?)))
                    .collect(),
            ));
            states.series.push(Series::new(
                format!("x_{i} est"),
                rows.iter()
                    .filter_map(|r| Some((parse(r[k_col])?, parse(r[hc])?)))
                    .collect(),
            ));
            i += 1;
        }
        let path = out_dir.join(format!("{stem}_states.svg"));
        if let Err(e) = write_chart(&path, &states) {
            return runtime_err(e);
        }
        println!("wrote {}", path.display());
    }
    0
}
