use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mpc_prompt::bench::{
    cmd_bench_attention, cmd_bench_protocols, cmd_tune, AttentionBenchConfig, BenchmarkReport, ProtocolBenchConfig,
};
use mpc_prompt::error::{Error, Result};
use mpc_prompt::runtime::NetworkPreset;
use mpc_prompt::tuner::TuneConfig;

#[derive(Parser)]
#[command(name = "mpc-prompt", version, about = "Secret-shared transformer benchmarks and forward-only prompt tuning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Network preset for printed estimates (and the tuning config).
    #[arg(long, global = true, default_value = "lan3g", value_parser = ["lan3g", "wan200", "wan100"])]
    net: String,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Rounds, bytes and error of each building-block protocol.
    BenchProtocols,
    /// Secure softmax attention against secure RFA as n grows.
    BenchAttention,
    /// Forward-only prompt tuning.
    Tune,
    /// Merges report.json files into one report with a bytes plot.
    Report { inputs: Vec<PathBuf> },
}

fn read_config<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => toml::from_str(&fs::read_to_string(p)?).map_err(|e| Error::Parse(e.to_string())),
        None => Ok(T::default()),
    }
}

fn print_rows(report: &BenchmarkReport, net: &str) {
    println!("{:<22} {:>6} {:>7} {:>14} {:>12} {:>10}", "operation", "size", "rounds", "bytes/party", net, "max_err");
    for r in &report.rows {
        let t = match net {
            "wan200" => r.wan200_s,
            "wan100" => r.wan100_s,
            _ => r.lan3g_s,
        };
        println!(
            "{:<22} {:>6} {:>7} {:>14} {:>11.4}s {:>10.2e}",
            r.operation, r.size, r.rounds, r.bytes_per_party, t, r.max_error
        );
    }
    for (k, v) in &report.metrics {
        println!("{k} = {v:.4}");
    }
}

fn finish(report: &BenchmarkReport, out: &Path, net: &str) -> Result<()> {
    report.write(out)?;
    if let Some(svg) = report.bytes_plot_svg() {
        fs::write(out.join("bytes.svg"), svg)?;
    }
    print_rows(report, net);
    println!("wrote {}", out.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    NetworkPreset::by_name(&cli.net)?;
    let config = cli.config.as_deref();
    match &cli.command {
        Command::BenchProtocols => {
            let mut cfg: ProtocolBenchConfig = read_config(config)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            finish(&cmd_bench_protocols(&cfg)?, &cli.out, &cli.net)
        }
        Command::BenchAttention => {
            let mut cfg: AttentionBenchConfig = read_config(config)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            finish(&cmd_bench_attention(&cfg)?, &cli.out, &cli.net)
        }
        Command::Tune => {
            let mut cfg: TuneConfig = read_config(config)?;
            cfg.seed = cli.seed.unwrap_or(cfg.seed);
            cfg.network_preset = cli.net.clone();
            fs::create_dir_all(&cli.out)?;
            let run = cmd_tune(&cfg, Some(&cli.out))?;
            for g in &run.outcome.record.generations {
                println!(
                    "gen {:>3}  best {:.4}  mean {:.4}  acc {:.3}",
                    g.generation, g.best_loss, g.mean_loss, g.best_accuracy
                );
            }
            print_rows(&run.report, &cli.net);
            println!("wrote {}", cli.out.display());
            Ok(())
        }
        Command::Report { inputs } => {
            let reports = inputs.iter().map(|p| BenchmarkReport::read(p)).collect::<Result<Vec<_>>>()?;
            finish(&BenchmarkReport::merge(&reports)?, &cli.out, &cli.net)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::FAILURE
        }
    }
}
