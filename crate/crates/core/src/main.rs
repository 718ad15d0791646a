use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ecomsim::behavior::analytic_session_metrics;
use ecomsim::config::{ConfigFile, Resolved};
use ecomsim::export::{write_curve_csv, write_json, write_queue_csv, write_requests_csv};
use ecomsim::planner::{compare_scenarios, Critical, SweepCurve};
use ecomsim::reference::{deltas, ModelValues, REFERENCE};
use ecomsim::sim::{run_replication, CompiledScenario, RunOptions, Scenario};
use ecomsim::workload::ScenarioMix;

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;

#[derive(Parser)]
#[command(
    name = "ecomsim",
    version,
    about = "Shopping-session simulation against a multi-tier server farm"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML config; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, env = "ECOMSIM_OUT", default_value = "out")]
    out: PathBuf,
    /// Master seed (overrides run.seed).
    #[arg(long)]
    seed: Option<u64>,
    /// Replications per sweep point (overrides run.replications).
    #[arg(long)]
    replications: Option<u32>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check a config and the behavior graph of every class.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// One replication at the configured rate: summary.json, requests.csv, queue_series.csv.
    Run {
        #[command(flatten)]
        common: Common,
        /// Arrival rate (overrides scenario.lambda).
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Replicated λ sweep: curve.csv and sweep.json with the critical rate.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Analytic session metrics and service demands; no simulation.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write oracle.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweeps several configs and tabulates critical rates and demands.
    Compare {
        /// Two or more configs.
        #[arg(long = "config", required = true, num_args = 1..)]
        configs: Vec<PathBuf>,
        #[arg(long, env = "ECOMSIM_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        replications: Option<u32>,
    },
    /// Built-in scenarios against the published reference values.
    Reference {
        /// Rate of the replication used for simulated indicators.
        #[arg(long, default_value_t = 10.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Also run the default sweeps for critical rates (slow).
        #[arg(long)]
        with_sweep: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Runtime(String),
}

type CmdResult = Result<(), Failure>;

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(path: Option<&Path>) -> Result<Resolved, Failure> {
    let file = match path {
        Some(p) => ConfigFile::load(p).map_err(|e| Failure::Config(e.to_string()))?,
        None => ConfigFile::default(),
    };
    file.resolve().map_err(|e| Failure::Config(e.to_string()))
}

fn load_common(c: &Common) -> Result<Resolved, Failure> {
    let mut r = load(c.config.as_deref())?;
    if let Some(s) = c.seed {
        r.sweep.seed = s;
    }
    if let Some(n) = c.replications {
        if n == 0 {
            return Err(Failure::Config("--replications must be >= 1".into()));
        }
        r.sweep.replications = n;
    }
    Ok(r)
}

fn out_dir(p: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(p).map_err(|e| runtime(format!("cannot create {}: {e}", p.display())))
}

fn create(path: PathBuf) -> Result<BufWriter<File>, Failure> {
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| runtime(format!("cannot write {}: {e}", path.display())))
}

fn server_names(r: &Resolved) -> Vec<String> {
    r.scenario
        .farm
        .servers
        .iter()
        .map(|s| s.name.clone())
        .collect()
}

fn describe(c: &Critical) -> String {
    match c {
        Critical::Crossed { lambda, multiple } => {
            format!(
                "{lambda:.3}{}",
                if *multiple {
                    " (threshold crossed more than once)"
                } else {
                    ""
                }
            )
        }
        Critical::NotCrossed => "not crossed".into(),
        Critical::BelowRange => "below range".into(),
    }
}

fn validate(config: Option<&Path>) -> CmdResult {
    let r = load(config)?;
    println!(
        "ok: scenario {} with {} classes, {} states, {} servers",
        r.scenario.name,
        r.scenario.mix.classes.len(),
        r.scenario.graph.states.len(),
        r.scenario.farm.servers.len()
    );
    Ok(())
}

fn run(common: &Common, lambda: Option<f64>) -> CmdResult {
    let mut r = load_common(common)?;
    if let Some(l) = lambda {
        if l.is_nan() || l < 0.0 || l.is_infinite() {
            return Err(Failure::Config(format!("--lambda must be >= 0, got {l}")));
        }
        r.lambda = l;
    }
    let (summary, rep) = r.run(r.sweep.seed).map_err(runtime)?;
    out_dir(&common.out)?;
    write_json(&common.out.join("summary.json"), &summary).map_err(runtime)?;
    write_requests_csv(create(common.out.join("requests.csv"))?, &rep.requests).map_err(runtime)?;
    write_queue_csv(create(common.out.join("queue_series.csv"))?, &rep.queues).map_err(runtime)?;
    let rt = summary.report.response_time.mean;
    println!(
        "{} λ={} seed={}: sessions {} started / {} completed, mean RT {}{}",
        summary.scenario,
        summary.lambda,
        summary.seed,
        summary.sessions_started,
        summary.sessions_completed,
        rt.map(|x| format!("{x:.4} s"))
            .unwrap_or_else(|| "undefined".into()),
        if summary.degenerate {
            " (degenerate)"
        } else {
            ""
        }
    );
    for v in &summary.consistency {
        eprintln!("consistency: {v}");
    }
    println!("wrote {}", common.out.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    scenario: &'a str,
    fingerprint: String,
    seed: u64,
    replications: u32,
    window: f64,
    threshold: f64,
    critical: Critical,
    bottleneck: String,
    lambda_sat: f64,
    curve: &'a SweepCurve,
}

fn sweep_one(r: &Resolved) -> Result<(CompiledScenario, SweepCurve), Failure> {
    let sc = r.scenario.compile().map_err(runtime)?;
    let curve = r.sweep().map_err(runtime)?;
    Ok((sc, curve))
}

fn write_sweep(
    r: &Resolved,
    sc: &CompiledScenario,
    curve: &SweepCurve,
    dir: &Path,
    stem: &str,
) -> CmdResult {
    let d = sc.service_demand().map_err(runtime)?;
    write_curve_csv(
        create(dir.join(format!("{stem}.csv")))?,
        curve,
        &server_names(r),
    )
    .map_err(runtime)?;
    let s = SweepSummary {
        scenario: &r.scenario.name,
        fingerprint: r.fingerprint(),
        seed: r.sweep.seed,
        replications: r.sweep.replications,
        window: r.options.window,
        threshold: r.sweep.threshold,
        critical: curve.critical(),
        bottleneck: d.bottleneck,
        lambda_sat: d.lambda_sat,
        curve,
    };
    write_json(&dir.join(format!("{stem}.json")), &s).map_err(runtime)
}

fn sweep(common: &Common) -> CmdResult {
    let r = load_common(common)?;
    let (sc, curve) = sweep_one(&r)?;
    out_dir(&common.out)?;
    write_sweep(&r, &sc, &curve, &common.out, "curve")?;
    std::fs::rename(common.out.join("curve.json"), common.out.join("sweep.json"))
        .map_err(runtime)?;
    println!(
        "{}: {} points, critical λ {}",
        r.scenario.name,
        curve.points.len(),
        describe(&curve.critical())
    );
    for p in &curve.points {
        for v in &p.consistency {
            eprintln!("consistency at λ={}: {v}", p.lambda);
        }
    }
    println!("wrote {}", common.out.display());
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    scenario: String,
    per_class: Vec<(String, ecomsim::behavior::AnalyticMetrics)>,
    mix: ecomsim::behavior::AnalyticMetrics,
    demand: ecomsim::farm::ServiceDemand,
}

fn print_metrics(m: &ecomsim::behavior::AnalyticMetrics) {
    let pm1: Vec<String> = m.pm1.iter().map(|(k, v)| format!("{k}={v:.5}")).collect();
    let pm2: Vec<String> = m.pm2.iter().map(|(k, v)| format!("{k}={v:.5}")).collect();
    println!("    PM1  {}", pm1.join(" "));
    println!("    PM2  {}", pm2.join(" "));
    println!(
        "    PM3 {:.5}  PM4 {:.3} s  PM5 {:.5}  PM7 {:.5}  PM8 {:.5}  items {:.5}",
        m.pm3, m.pm4, m.pm5, m.pm7, m.pm8, m.items_per_session
    );
}

fn oracle(config: Option<&Path>, out: Option<&Path>) -> CmdResult {
    let r = load(config)?;
    let sc = r.scenario.compile().map_err(runtime)?;
    let mut per_class = Vec::new();
    for b in &sc.behaviors {
        let solo = ScenarioMix {
            classes: vec![b.class_name.clone()],
            pmf: vec![1.0],
        };
        let m = analytic_session_metrics(std::slice::from_ref(b), &solo).map_err(runtime)?;
        per_class.push((b.class_name.clone(), m));
    }
    let mix = sc.analytic().map_err(runtime)?;
    let demand = sc.service_demand().map_err(runtime)?;
    println!("scenario {}", r.scenario.name);
    for (name, m) in &per_class {
        println!("  class {name}");
        print_metrics(m);
    }
    println!("  mix {:?}", r.scenario.mix.pmf);
    print_metrics(&mix);
    println!("  service demand per session:");
    for (s, d) in &demand.per_server {
        println!("    {s:<4} {:.6} s", d);
    }
    println!(
        "  bottleneck {} ({:.6} s), λ_sat = {:.3} sessions/s",
        demand.bottleneck, demand.bottleneck_demand, demand.lambda_sat
    );
    if let Some(dir) = out {
        out_dir(dir)?;
        let rep = OracleReport {
            scenario: r.scenario.name.clone(),
            per_class,
            mix,
            demand,
        };
        write_json(&dir.join("oracle.json"), &rep).map_err(runtime)?;
    }
    Ok(())
}

fn compare(configs: &[PathBuf], out: &Path, seed: Option<u64>, reps: Option<u32>) -> CmdResult {
    if configs.len() < 2 {
        return Err(Failure::Config(
            "compare needs at least two --config files".into(),
        ));
    }
    let mut runs = Vec::new();
    for path in configs {
        let common = Common {
            config: Some(path.clone()),
            out: out.to_path_buf(),
            seed,
            replications: reps,
        };
        let r = load_common(&common)?;
        let (sc, curve) = sweep_one(&r)?;
        runs.push((r, sc, curve));
    }
    out_dir(out)?;
    for (i, (r, sc, curve)) in runs.iter().enumerate() {
        write_sweep(
            r,
            sc,
            curve,
            out,
            &format!("curve_{}_{}", i + 1, r.scenario.name),
        )?;
    }
    let pairs: Vec<_> = runs.iter().map(|(_, sc, c)| (sc, c)).collect();
    let cmp = compare_scenarios(&pairs).map_err(runtime)?;
    println!(
        "{:<10} {:>12} {:>10} {:>12} {:>10} {:>8}",
        "scenario", "critical λ", "bottleneck", "D_max [s]", "λ_sat", "PM8"
    );
    for row in &cmp.rows {
        println!(
            "{:<10} {:>12} {:>10} {:>12.6} {:>10.3} {:>8.4}",
            row.scenario,
            describe(&row.critical),
            row.bottleneck,
            row.bottleneck_demand,
            row.lambda_sat,
            row.pm8
        );
    }
    println!(
        "critical rates ordered by bottleneck demand: {}",
        cmp.ordered_by_demand
    );
    write_json(&out.join("comparison.json"), &cmp).map_err(runtime)
}

#[derive(Serialize)]
struct ReferenceReport {
    scenario: String,
    rows: Vec<ecomsim::reference::DeltaRow>,
}

fn reference(lambda: f64, seed: u64, with_sweep: bool, out: Option<&Path>) -> CmdResult {
    let mut all = Vec::new();
    for r in &REFERENCE {
        let sc = Scenario::preset(r.scenario)
            .expect("built in")
            .compile()
            .map_err(runtime)?;
        let analytic = sc.analytic().map_err(runtime)?;
        let rep = run_replication(&sc, lambda, seed, &RunOptions::default()).map_err(runtime)?;
        let at20 = run_replication(&sc, 20.0, seed, &RunOptions::default()).map_err(runtime)?;
        let lambda_crit = if with_sweep {
            let mut cfg = load(None)?;
            cfg.scenario = sc.scenario.clone();
            cfg.sweep.seed = seed;
            cfg.sweep().map_err(runtime)?.critical().lambda()
        } else {
            None
        };
        let rows = deltas(
            r,
            &ModelValues {
                analytic: Some(&analytic),
                simulated: rep.report.session.as_ref(),
                lambda_crit,
                unhappy_at_20: Some(at20.report.buckets.gt4),
            },
        );
        println!(
            "{} (simulated indicators at λ={lambda}, seed {seed})",
            r.scenario
        );
        println!(
            "  {:<16} {:>12} {:>12} {:>12}",
            "metric", "reference", "model", "delta"
        );
        for d in &rows {
            let f = |x: Option<f64>| x.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
            println!(
                "  {:<16} {:>12.5} {:>12} {:>12}",
                d.metric,
                d.reference,
                f(d.model),
                f(d.delta)
            );
        }
        all.push(ReferenceReport {
            scenario: r.scenario.to_string(),
            rows,
        });
    }
    if let Some(dir) = out {
        out_dir(dir)?;
        write_json(&dir.join("reference.json"), &all).map_err(runtime)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Validate { config } => validate(config.as_deref()),
        Cmd::Run { common, lambda } => run(common, *lambda),
        Cmd::Sweep { common } => sweep(common),
        Cmd::Oracle { config, out } => oracle(config.as_deref(), out.as_deref()),
        Cmd::Compare {
            configs,
            out,
            seed,
            replications,
        } => compare(configs, out, *seed, *replications),
        Cmd::Reference {
            lambda,
            seed,
            with_sweep,
            out,
        } => reference(*lambda, *seed, *with_sweep, out.as_deref()),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
