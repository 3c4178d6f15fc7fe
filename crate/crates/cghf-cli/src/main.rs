use std::path::PathBuf;

use anyhow::{anyhow, bail, Context};
use cghf_core::rules::{parse, validate, ContextModel};
use cghf_sim::engine::{RunOptions, Simulation};
use cghf_sim::replay;
use cghf_sim::scenario::LoadedScenario;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "cghf", about = "Context node tooling: simulate, inspect logs, lint rules, serve")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its metrics.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        /// Write events.ndjson and metrics.json here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-derive metrics from a saved event log and check its causal chains.
    Replay {
        #[arg(long)]
        log: PathBuf,
    },
    /// Parse and validate a rules file.
    Lint {
        #[arg(long)]
        rules: PathBuf,
        /// Entity declarations to validate attribute names against.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Print metrics recomputed from a saved event log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
    },
    /// Serve a context node over HTTP (and optionally the line protocol).
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Talk to a running service.
    Client {
        #[arg(long)]
        base: String,
        #[arg(long)]
        token: String,
        #[command(subcommand)]
        op: ClientOp,
    },
}

#[derive(Subcommand)]
enum ClientOp {
    /// Register a service manifest (JSON file).
    Register {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Publish one raw sample.
    Push {
        #[arg(long)]
        topic: String,
        #[arg(long)]
        value: f64,
        #[arg(long, default_value = "")]
        unit: String,
        /// Sample timestamp in ms; defaults to the wall clock.
        #[arg(long)]
        ts: Option<i64>,
    },
    /// Open a context subscription and print its handle.
    Subscribe {
        #[arg(long)]
        pattern: String,
    },
    /// Drain pending contexts from a subscription.
    Fetch {
        #[arg(long)]
        handle: String,
        #[arg(long, default_value_t = usize::MAX)]
        max_n: usize,
    },
    /// Tear down a registration.
    Revoke {
        #[arg(long)]
        registration_id: String,
    },
    /// Advance the node one cycle (admin token required).
    Tick {
        #[arg(long)]
        now: i64,
    },
}

#[tokio::main]
async fn main() {
    let result = match Args::parse().command {
        Command::Run { scenario, seed, out } => run(scenario, seed, out),
        Command::Replay { log } => replay_log(log),
        Command::Lint { rules, model } => lint(rules, model),
        Command::Metrics { log } => metrics(log),
        Command::Serve { config } => serve(config).await,
        Command::Client { base, token, op } => client(base, token, op).await,
    };
    if let Err(e) = result {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(scenario: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> anyhow::Result<()> {
    let mut loaded = LoadedScenario::read(&scenario)
        .with_context(|| format!("reading {}", scenario.display()))?;
    if let Some(seed) = seed {
        loaded.scenario.seed = seed;
    }
    let summary = Simulation::new(loaded)?.run(&RunOptions { out_dir: out })?;
    if let Some(path) = &summary.events_path {
        eprintln!("wrote {}", path.display());
    }
    if let Some(path) = &summary.metrics_path {
        eprintln!("wrote {}", path.display());
    }
    println!("{}", serde_json::to_string_pretty(&summary.metrics)?);
    Ok(())
}

fn replay_log(log: PathBuf) -> anyhow::Result<()> {
    let records = replay::read_log(&log).with_context(|| format!("reading {}", log.display()))?;
    let problems = replay::verify_causality(&records);
    for p in &problems {
        eprintln!("causality: {p}");
    }
    let report = cghf_sim::MetricsReport::compute(&records);
    let recomputed = serde_json::to_value(&report)?;

    // A metrics.json written next to the log by `run` must agree with the
    // log it came from.
    let sibling = log.with_file_name("metrics.json");
    if sibling.exists() {
        let saved: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&sibling)?)?;
        if saved == recomputed {
            eprintln!("metrics match {}", sibling.display());
        } else {
            bail!("recomputed metrics differ from {}", sibling.display());
        }
    }
    if !problems.is_empty() {
        bail!("{} causality violations", problems.len());
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn lint(rules: PathBuf, model: Option<PathBuf>) -> anyhow::Result<()> {
    let base = match &model {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let rs = parse(&text).map_err(|errors| {
                for e in &errors {
                    eprintln!("{}:{e}", path.display());
                }
                anyhow!("model file does not parse")
            })?;
            ContextModel::from_entities(&rs.entities)
        }
        None => ContextModel::default(),
    };
    let text = std::fs::read_to_string(&rules)?;
    let mut problems = 0usize;
    match parse(&text) {
        Ok(rs) => {
            for e in validate(&rs, &base) {
                eprintln!("{}:{e}", rules.display());
                problems += 1;
            }
        }
        Err(errors) => {
            for e in &errors {
                eprintln!("{}:{e}", rules.display());
            }
            problems += errors.len();
        }
    }
    if problems > 0 {
        let plural = if problems == 1 { "" } else { "s" };
        bail!("{problems} problem{plural} in {}", rules.display());
    }
    println!("ok");
    Ok(())
}

fn metrics(log: PathBuf) -> anyhow::Result<()> {
    let report = replay::metrics_from_file(&log)
        .with_context(|| format!("reading {}", log.display()))?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

async fn serve(config: PathBuf) -> anyhow::Result<()> {
    let (config, rules) =
        cghf_service::ServiceConfig::read(&config).with_context(|| "reading config")?;
    let running = cghf_service::start(config, &rules).await.map_err(|e| anyhow!(e))?;
    eprintln!("http on {}", running.http_addr);
    if let Some(addr) = running.line_addr {
        eprintln!("line protocol on {addr}");
    }
    std::future::pending::<()>().await;
    Ok(())
}

async fn client(base: String, token: String, op: ClientOp) -> anyhow::Result<()> {
    let client = cghf_client::Client::new(&base, &token);
    match op {
        ClientOp::Register { manifest } => {
            let manifest = serde_json::from_str(&std::fs::read_to_string(&manifest)?)?;
            let receipt = client.register(&manifest).await?;
            println!("{}", serde_json::to_string_pretty(&receipt)?);
        }
        ClientOp::Push { topic, value, unit, ts } => {
            let ts = ts.unwrap_or_else(cghf_service::state::now_ms);
            let msg_id = client.push(&topic, value, &unit, ts).await?;
            println!("{msg_id}");
        }
        ClientOp::Subscribe { pattern } => {
            println!("{}", client.subscribe(&pattern).await?);
        }
        ClientOp::Fetch { handle, max_n } => {
            for envelope in client.fetch(&handle, max_n).await? {
                println!("{}", serde_json::to_string(&envelope)?);
            }
        }
        ClientOp::Revoke { registration_id } => {
            client.revoke(&registration_id).await?;
            println!("revoked {registration_id}");
        }
        ClientOp::Tick { now } => {
            client.tick(now).await?;
            println!("ticked at {now}");
        }
    }
    Ok(())
}
