// Copyright 2026 The roq Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use roq_harness::config::render_config;
use roq_harness::{
    compare, emit_ospf_report, emit_report, generate_rib, load_config, run_bgp_experiment, run_ospf_experiment,
    write_rib, ExperimentConfig, HarnessError, Protocol, TransportChoice,
};

/// Default bound on the b/a median latency ratio in `compare`.
const DEFAULT_BOUND: f64 = 2.0;

#[derive(Parser)]
#[command(name = "roq", version, about = "Routing protocols over simulated stream transports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a built-in benchmark topology.
    Bench {
        #[command(subcommand)]
        bench: Bench,
    },
    /// Write a synthetic RIB.
    GenRib {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the summaries of two result directories.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Fail when the p50 latency ratio b/a exceeds this.
        #[arg(long, default_value_t = DEFAULT_BOUND)]
        bound: f64,
    },
}

#[derive(Subcommand)]
enum Bench {
    /// Injector, R1, R2, R3 propagation benchmark.
    BgpTriangle {
        #[arg(long, value_enum)]
        transport: BenchTransport,
        #[arg(long, default_value_t = 10_000)]
        routes: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full-mesh convergence benchmark.
    OspfMesh {
        #[arg(long, value_enum)]
        mode: MeshMode,
        #[arg(long)]
        delegate_acks: bool,
        #[arg(long, default_value_t = 6)]
        nodes: u32,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchTransport {
    Tcp,
    Quic,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshMode {
    Native,
    Quic,
}

enum Outcome {
    Done,
    Partial,
}

fn execute(cfg: &ExperimentConfig, default_out: &Path) -> Result<Outcome, HarnessError> {
    let errors = cfg.validate();
    if !errors.is_empty() {
        return Err(HarnessError::Config(roq_harness::ConfigErrors(errors)));
    }
    let out = cfg.out.clone().unwrap_or_else(|| default_out.to_path_buf());
    match cfg.protocol {
        Protocol::Bgp => {
            let report = run_bgp_experiment(cfg)?;
            let files = emit_report(&report, &out)?;
            let lat = report.latencies();
            println!(
                "bgp {}: {}/{} routes complete, lower bound {:?}",
                report.transport,
                report.complete(),
                report.records.len(),
                report.lower_bound
            );
            if let Some(s) = roq_harness::summarize(&lat.iter().map(|d| d.as_micros() as u64).collect::<Vec<_>>()) {
                println!("latency us: p50 {} p90 {} p99 {} max {}", s.p50, s.p90, s.p99, s.max);
            }
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(if report.partial { Outcome::Partial } else { Outcome::Done })
        }
        Protocol::Ospf => {
            let report = run_ospf_experiment(cfg)?;
            let files = emit_ospf_report(&report, &out)?;
            println!(
                "ospf {}: cold start {:?}, reconvergence {:?}",
                report.variant.label(),
                report.cold_start.routes_time(),
                report.reconvergence.routes_time()
            );
            for f in files {
                println!("wrote {}", f.display());
            }
            Ok(if report.partial { Outcome::Partial } else { Outcome::Done })
        }
    }
}

fn dispatch(cli: Cli) -> Result<Outcome, HarnessError> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.out = out;
            }
            execute(&cfg, Path::new("results/run"))
        }
        Command::Bench { bench } => match bench {
            Bench::BgpTriangle { transport, routes, seed, out } => {
                let t = match transport {
                    BenchTransport::Tcp => TransportChoice::TcpLike,
                    BenchTransport::Quic => TransportChoice::Quic,
                };
                let mut cfg = ExperimentConfig::bgp_triangle(t, routes, seed);
                cfg.out = out;
                log::debug!("config:\n{}", render_config(&cfg));
                execute(&cfg, &PathBuf::from(format!("results/bgp-triangle-{}", t)))
            }
            Bench::OspfMesh { mode, delegate_acks, nodes, seed, out } => {
                let t = match mode {
                    MeshMode::Native => TransportChoice::TcpLike,
                    MeshMode::Quic => TransportChoice::Quic,
                };
                let mut cfg = ExperimentConfig::ospf_mesh(nodes, t, delegate_acks, seed);
                cfg.out = out;
                let label = roq_harness::OspfVariant::of(&cfg).label();
                execute(&cfg, &PathBuf::from(format!("results/ospf-mesh-{label}")))
            }
        },
        Command::GenRib { count, seed, out } => {
            if count == 0 {
                return Err(HarnessError::Invalid("--count must be positive".into()));
            }
            let routes = generate_rib(count, seed);
            let file = std::fs::File::create(&out)?;
            write_rib(std::io::BufWriter::new(file), &routes)?;
            println!("wrote {} routes to {}", routes.len(), out.display());
            Ok(Outcome::Done)
        }
        Command::Compare { a, b, bound } => {
            let rows = compare(&a, &b)?;
            println!("metric,a,b,ratio");
            let mut ok = true;
            for r in &rows {
                let ratio = r.ratio.map(|x| format!("{x:.3}")).unwrap_or_default();
                println!("{},{},{},{}", r.metric, r.a, r.b, ratio);
                if r.metric == "p50_us" && r.ratio.is_some_and(|x| x > bound) {
                    ok = false;
                }
            }
            if ok {
                Ok(Outcome::Done)
            } else {
                Err(HarnessError::Invalid(format!("p50 ratio exceeds {bound}")))
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ROQ_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => {
            eprintln!("time cap reached before completion; results are partial");
            ExitCode::from(2)
        }
        Err(HarnessError::SessionFailed(m)) => {
            eprintln!("error: session failed: {m}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
