use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use loadquant::data::ZoneDataset;
use loadquant::eval::{round_half_up, round_score};
use loadquant::orchestrator::{
    actuals_from, evaluate_round, load_zones, model_sets_json, round_dir, run_round,
    simulate_competition, train_zone, write_scorecards_file, ModelCache, Plan, RoundSpec,
    RunConfig, Strategy,
};
use loadquant::synth::{write_synthetic, SynthConfig};
use loadquant::{Error, Result};

/// Hourly load decile forecasts from per-hour selected regressions and
/// shifted historical temperatures.
#[derive(Parser, Debug)]
#[command(name = "loadquant", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's output_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated zone ids.
    #[arg(long, global = true, value_delimiter = ',')]
    zones: Vec<String>,

    /// Comma-separated round ids.
    #[arg(long, global = true, value_delimiter = ',')]
    rounds: Vec<u32>,

    /// trend, no_trend, ensemble or auto; `simulate` also takes schedule and
    /// a comma-separated list.
    #[arg(long, global = true, value_delimiter = ',')]
    strategy: Vec<String>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest and DST-normalize zones, writing <out>/normalized/<zone>.csv.
    Ingest,
    /// Train model sets for each round and zone, writing model.json.
    Train,
    /// Write decile forecasts for each round and zone.
    Forecast,
    /// Score written forecasts against actuals and the vanilla benchmark.
    Evaluate,
    /// Forecast and score every round under each strategy; writes summary.csv.
    Simulate,
    /// Write seeded synthetic zone files and a matching config.toml.
    Synth {
        #[arg(long, default_value_t = 13)]
        years: u32,
        /// Linear load growth per year as a fraction of base load.
        #[arg(long, default_value_t = 0.0)]
        trend: f64,
        #[arg(long, default_value_t = 0.01)]
        noise: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Command::Synth {
        years,
        trend,
        noise,
    } = cli.command
    {
        return synth(cli, years, trend, noise);
    }
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut config = RunConfig::from_file(path)?;
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    let only = (!cli.zones.is_empty()).then_some(cli.zones.as_slice());
    if let Some(list) = only {
        let known = config.zone_ids();
        if let Some(z) = list.iter().find(|z| !known.contains(z)) {
            return Err(Error::Config(format!("unknown zone {z}")));
        }
    }
    let rounds = select_rounds(&config, &cli.rounds)?;
    let zones = load_zones(&config, only);
    let cache = ModelCache::default();
    let out = config.output_dir.clone();

    match cli.command {
        Command::Ingest => ingest(&zones, &out),
        Command::Train => {
            let override_ = single_strategy(&cli.strategy)?;
            let mut outcomes = Vec::new();
            for round in &rounds {
                let strategy = override_.unwrap_or(round.strategy);
                for (id, data) in &zones {
                    let result = data.as_ref().map_err(clone_err).and_then(|dataset| {
                        let sets = train_zone(&config, round, strategy, dataset, &cache)?;
                        let dir = round_dir(&out, round).join(id);
                        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                            path: dir.clone(),
                            source: e,
                        })?;
                        let json = model_sets_json(id, strategy, &sets)?;
                        let file = dir.join("model.json");
                        std::fs::write(&file, json).map_err(|e| Error::Io {
                            path: file,
                            source: e,
                        })?;
                        Ok(())
                    });
                    report(round.round_id, id, &result, |_| {
                        format!("trained ({strategy})")
                    });
                    outcomes.push(result);
                }
            }
            first_error(outcomes)
        }
        Command::Forecast => {
            let override_ = single_strategy(&cli.strategy)?;
            let mut outcomes = Vec::new();
            for round in &rounds {
                let strategy = override_.unwrap_or(round.strategy);
                for o in run_round(&config, round, strategy, &zones, &out, &cache) {
                    report(round.round_id, &o.zone_id, &o.result, |f| {
                        format!("{} hours written ({})", f.forecast.len(), f.strategy)
                    });
                    outcomes.push(o.result.map(|_| ()));
                }
            }
            first_error(outcomes)
        }
        Command::Evaluate => {
            let mut outcomes = Vec::new();
            for round in &rounds {
                let results = evaluate_round(&config, round, &zones, &out, &cache);
                let mut cards = Vec::new();
                for o in results {
                    report(round.round_id, &o.zone_id, &o.result, |c| {
                        format!(
                            "loss {:.4} bench {:.4} score {:.2}",
                            c.model_loss,
                            c.bench_loss,
                            round_half_up(c.score, 2)
                        )
                    });
                    match o.result {
                        Ok(card) => cards.push(card),
                        Err(e) => outcomes.push(Err(e)),
                    }
                }
                if let Ok(score) = round_score(&cards.iter().map(|c| c.score).collect::<Vec<_>>()) {
                    println!(
                        "round {}: score {:.2}",
                        round.round_id,
                        round_half_up(score, 2)
                    );
                    write_scorecards_file(&round_dir(&out, round).join("scorecards.csv"), &cards)?;
                }
            }
            first_error(outcomes)
        }
        Command::Simulate => {
            let plans = if cli.strategy.is_empty() {
                config.strategies.clone()
            } else {
                cli.strategy
                    .iter()
                    .map(|s| s.parse())
                    .collect::<Result<Vec<Plan>>>()?
            };
            let report = simulate_competition(
                &config,
                &zones,
                &actuals_from(&zones),
                &plans,
                &rounds,
                Some(&out),
                &cache,
            );
            report.write_files(&out)?;
            report.write_summary(std::io::stdout())?;
            for gap in &report.gaps {
                eprintln!(
                    "gap: {} round {} zone {}: {}",
                    gap.strategy, gap.round_id, gap.zone_id, gap.reason
                );
            }
            if report.scorecards.is_empty() {
                return Err(Error::Coverage("no zone could be scored".into()));
            }
            Ok(())
        }
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn synth(cli: &Cli, years: u32, trend: f64, noise: f64) -> Result<()> {
    let out = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("synthetic"));
    let mut config = SynthConfig {
        years,
        trend_per_year: trend,
        noise,
        ..SynthConfig::default()
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if !cli.zones.is_empty() {
        config.zones = cli.zones.clone();
    }
    let paths = write_synthetic(&config, &out)?;
    let zones = paths
        .iter()
        .map(|p| format!("  {{ path = {:?} }},", file_name(p)))
        .collect::<Vec<_>>()
        .join("\n");
    let years = config
        .history_years()
        .iter()
        .map(i32::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    let text = format!(
        "output_dir = \"out\"\nzones = [\n{zones}\n]\n\n[scenarios]\nhistory_years = [{years}]\n"
    );
    let file = out.join("config.toml");
    std::fs::write(&file, text).map_err(|e| Error::Io {
        path: file.clone(),
        source: e,
    })?;
    for p in &paths {
        println!("{}", p.display());
    }
    println!("{}", file.display());
    Ok(())
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn ingest(zones: &[(String, Result<ZoneDataset>)], out: &Path) -> Result<()> {
    let dir = out.join("normalized");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let mut outcomes = Vec::new();
    for (id, data) in zones {
        let result = data.as_ref().map_err(clone_err).and_then(|d| {
            d.write_csv_file(&dir.join(format!("{id}.csv")))?;
            Ok(d)
        });
        match &result {
            Ok(d) => println!(
                "{id}: {} hours, {} temperature channels, {}..{}",
                d.len(),
                d.channel_count(),
                d.first().map(|t| t.to_string()).unwrap_or_default(),
                d.last().map(|t| t.to_string()).unwrap_or_default()
            ),
            Err(e) => error!("{id}: {e}"),
        }
        outcomes.push(result.map(|_| ()));
    }
    first_error(outcomes)
}

fn select_rounds(config: &RunConfig, ids: &[u32]) -> Result<Vec<RoundSpec>> {
    if ids.is_empty() {
        return Ok(config.rounds.clone());
    }
    ids.iter().map(|&id| config.round(id).cloned()).collect()
}

fn single_strategy(values: &[String]) -> Result<Option<Strategy>> {
    match values {
        [] => Ok(None),
        [one] => one.parse().map(Some),
        _ => Err(Error::Config(
            "this command takes a single --strategy".into(),
        )),
    }
}

fn report<T>(round: u32, zone: &str, result: &Result<T>, ok: impl Fn(&T) -> String) {
    match result {
        Ok(v) => info!("round {round} zone {zone}: {}", ok(v)),
        Err(e) => error!("round {round} zone {zone}: {e}"),
    }
}

/// Errors carry io sources, so loading failures are re-raised by exit class.
fn clone_err(e: &Error) -> Error {
    let message = format!("zone did not load: {e}");
    match e.exit_code() {
        1 => Error::Config(message),
        3 => Error::Training(message),
        _ => Error::DataQuality(message),
    }
}

fn first_error(outcomes: Vec<Result<()>>) -> Result<()> {
    outcomes.into_iter().find(Result::is_err).unwrap_or(Ok(()))
}
