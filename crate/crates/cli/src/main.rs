use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::Value;

use rmotion::commands::{self, LrmMode};
use rmotion::config::{parse_profile_arg, Layers, UsageError};
use rmotion::suites::{self, TestReport};

#[derive(Parser)]
#[command(name = "rmotion", version, about = "Reinforced jump processes, the Bass-Burdzy flow and the linearly reinforced motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<u64>,
    /// Output directory (for `verify`: the report file).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Cap on worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// JSON file of parameters; explicit flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a lattice process or the diffusion in a random environment.
    Simulate {
        #[command(subcommand)]
        kind: SimulateKind,
    },
    /// Sample random environments.
    Env {
        #[command(subcommand)]
        action: EnvAction,
    },
    /// Integrate the Bass-Burdzy flow against a Brownian driver.
    Flow {
        #[command(subcommand)]
        action: FlowAction,
    },
    /// Build the linearly reinforced motion.
    Lrm {
        #[command(subcommand)]
        action: LrmAction,
    },
    /// Run verification suites; exits 0 iff every suite passes.
    Verify {
        /// Suite names (see --list).
        suites: Vec<String>,
        /// Print the suite names and their default parameters.
        #[arg(long)]
        list: bool,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Subcommand)]
enum SimulateKind {
    /// Vertex-reinforced jump process on 2^-n Z.
    Vrjp {
        #[command(flatten)]
        common: Common,
        /// `unit`, an inline JSON profile or a JSON file.
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        t_max: Option<f64>,
    },
    /// Edge-reinforced random walk on 2^-n Z.
    Errw {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        n: Option<u32>,
        #[arg(long)]
        steps: Option<u64>,
    },
    /// Walk in a Brownian environment at mesh 2^-m.
    Envdiff {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profile: Option<String>,
        #[arg(long)]
        m: Option<u32>,
        #[arg(long)]
        q_max: Option<f64>,
    },
}

#[derive(Subcommand)]
enum EnvAction {
    Sample {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        profile: Option<String>,
        /// discrete, continuous or gamma.
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        n: Option<u32>,
    },
}

#[derive(Subcommand)]
enum FlowAction {
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        du: Option<f64>,
        #[arg(long)]
        u_max: Option<f64>,
        #[arg(long)]
        span: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        #[arg(long)]
        stride: Option<usize>,
        #[arg(long)]
        no_widen: bool,
        #[arg(long)]
        no_events: bool,
    },
}

#[derive(Args, Clone)]
struct LrmArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    profile: Option<String>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long)]
    du: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    u_max: Option<f64>,
    #[arg(long)]
    span: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    /// Comma-separated times for profile snapshots.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<f64>>,
    #[arg(long)]
    stride: Option<usize>,
}

#[derive(Subcommand)]
enum LrmAction {
    Build(LrmArgs),
    /// Build, then rescale by `c`.
    Rescale {
        #[command(flatten)]
        args: LrmArgs,
        #[arg(long)]
        c: Option<f64>,
    },
    /// Build the unit-profile motion and transfer it to `--profile`.
    Transfer(LrmArgs),
}

fn layers(common: &Common) -> anyhow::Result<Layers> {
    let mut l = Layers::new(common.config.as_deref())?;
    l.set("seed", common.seed)?.set("replicas", common.replicas)?;
    Ok(l)
}

fn with_profile(l: &mut Layers, profile: &Option<String>) -> anyhow::Result<()> {
    if let Some(p) = profile {
        let v = parse_profile_arg(p).map_err(|e| UsageError(format!("--profile: {e:#}")))?;
        l.set_value("profile", Some(v));
    }
    Ok(())
}

fn resolve<T: DeserializeOwned>(l: &Layers) -> anyhow::Result<T> {
    l.resolve()
}

fn out_dir(common: &Common, default: &str) -> PathBuf {
    common.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn report_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn threads(common: &Common) -> anyhow::Result<()> {
    if let Some(k) = common.threads {
        if k == 0 {
            anyhow::bail!(UsageError("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(k).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}

fn write_reports(path: &Path, reports: &[TestReport]) -> anyhow::Result<()> {
    let v = if reports.len() == 1 { serde_json::to_value(&reports[0])? } else { serde_json::to_value(reports)? };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(&v)? + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Returns whether every requested check passed.
fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Simulate { kind } => match kind {
            SimulateKind::Vrjp { common, profile, n, t_max } => {
                threads(&common)?;
                let mut l = layers(&common)?;
                with_profile(&mut l, &profile)?;
                l.set("n", n)?.set("t_max", t_max)?;
                let p: commands::SimulateVrjp = resolve(&l)?;
                report_paths(&commands::simulate_vrjp_cmd(&p, &out_dir(&common, "out/simulate-vrjp"))?);
            }
            SimulateKind::Errw { common, profile, n, steps } => {
                threads(&common)?;
                let mut l = layers(&common)?;
                with_profile(&mut l, &profile)?;
                l.set("n", n)?.set("steps", steps)?;
                let p: commands::SimulateErrw = resolve(&l)?;
                report_paths(&commands::simulate_errw_cmd(&p, &out_dir(&common, "out/simulate-errw"))?);
            }
            SimulateKind::Envdiff { common, profile, m, q_max } => {
                threads(&common)?;
                let mut l = layers(&common)?;
                with_profile(&mut l, &profile)?;
                l.set("m", m)?.set("q_max", q_max)?;
                let p: commands::SimulateEnvdiff = resolve(&l)?;
                report_paths(&commands::simulate_envdiff_cmd(&p, &out_dir(&common, "out/simulate-envdiff"))?);
            }
        },
        Command::Env { action: EnvAction::Sample { common, profile, kind, n } } => {
            threads(&common)?;
            let mut l = layers(&common)?;
            with_profile(&mut l, &profile)?;
            l.set("kind", kind)?.set("n", n)?;
            let p: commands::EnvSample = resolve(&l)?;
            report_paths(&commands::env_sample_cmd(&p, &out_dir(&common, "out/env-sample"))?);
        }
        Command::Flow { action: FlowAction::Run { common, du, u_max, span, points, stride, no_widen, no_events } } => {
            threads(&common)?;
            let mut l = layers(&common)?;
            l.set("du", du)?.set("u_max", u_max)?.set("span", span)?.set("points", points)?.set("stride", stride)?;
            l.set("widen", no_widen.then_some(false))?.set("events", no_events.then_some(false))?;
            let p: commands::FlowRunParams = resolve(&l)?;
            report_paths(&commands::flow_run_cmd(&p, &out_dir(&common, "out/flow-run"))?);
        }
        Command::Lrm { action } => {
            let (mode, args, c) = match action {
                LrmAction::Build(a) => (LrmMode::Build, a, None),
                LrmAction::Rescale { args, c } => (LrmMode::Rescale, args, c),
                LrmAction::Transfer(a) => (LrmMode::Transfer, a, None),
            };
            let common = &args.common;
            threads(common)?;
            let mut l = layers(common)?;
            with_profile(&mut l, &args.profile)?;
            l.set("x0", args.x0)?.set("du", args.du)?.set("t_max", args.t_max)?.set("u_max", args.u_max)?;
            l.set("span", args.span)?.set("points", args.points)?.set("snapshots", args.snapshots.clone())?;
            l.set("stride", args.stride)?.set("c", c)?;
            let p: commands::LrmParams = resolve(&l)?;
            let default = match mode {
                LrmMode::Build => "out/lrm-build",
                LrmMode::Rescale => "out/lrm-rescale",
                LrmMode::Transfer => "out/lrm-transfer",
            };
            report_paths(&commands::lrm_cmd(mode, &p, &out_dir(common, default))?);
        }
        Command::Verify { suites: names, list, common } => {
            if list {
                for s in suites::SUITES {
                    println!("{s} {}", suites::default_params(s)?);
                }
                return Ok(true);
            }
            if names.is_empty() {
                anyhow::bail!(UsageError("verify needs at least one suite name (see --list)".into()));
            }
            threads(&common)?;
            let file = Layers::new(common.config.as_deref())?.merged();
            let mut reports = Vec::new();
            for name in &names {
                let mut cfg = match &file {
                    Value::Object(m) if m.contains_key(name) => m[name].clone(),
                    Value::Null => Value::Object(Default::default()),
                    other => other.clone(),
                };
                if let (Some(r), Value::Object(m)) = (common.replicas, &mut cfg) {
                    m.insert("replicas".into(), r.into());
                }
                let report = suites::run_suite(name, cfg, common.seed.unwrap_or(1))?;
                print!("{}", report.summary());
                reports.push(report);
            }
            if let Some(out) = &common.out {
                write_reports(out, &reports)?;
                println!("wrote {}", out.display());
            }
            return Ok(reports.iter().all(|r| r.pass));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("usage error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
