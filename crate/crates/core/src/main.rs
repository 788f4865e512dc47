use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mlca_trends::catalog::{bundled_other_cards, bundled_workstation_cards, parse_card_table, CardSource};
use mlca_trends::error::{ConfigError, Error, Result};
use mlca_trends::pipeline::{self, Analysis, RunConfig, RunSummary, CONFIG_ENV};
use mlca_trends::stats::Weighting;
use mlca_trends::synth::{synth_systems, SynthOptions};
use mlca_trends::systems::write_systems_table;

#[derive(Parser)]
#[command(name = "mlca-trends", version, about = "Environmental footprint of ML training runs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and merge card tables and the systems table; write them in canonical form
    Ingest(RunArgs),
    /// Coverage of the systems table (counts per available field)
    Coverage(RunArgs),
    /// Fit the bridge between FLOP-based and direct GPU-hour estimates
    Bridge(RunArgs),
    /// Per-system GPU-hour estimates
    Estimate(RunArgs),
    /// Per-system impacts and embodied shares
    Impacts(RunArgs),
    /// Exponential trends of card characteristics and system impacts
    Trends(RunArgs),
    /// Compare real and reduced-carbon-intensity footprints
    Scenario(RunArgs),
    /// Run every stage and write all tables
    Report(RunArgs),
    /// Generate a synthetic systems table
    Synth(SynthArgs),
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// JSON file bundling all paths and options; flags override its values
    #[arg(long, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    /// Primary card table (defaults to the bundled workstation cards)
    #[arg(long)]
    cards: Option<PathBuf>,
    /// Second card table, cross-validated against the primary one
    #[arg(long)]
    cards_alt: Option<PathBuf>,
    /// Additional curated card tables (defaults to the bundled consumer and accelerator cards)
    #[arg(long)]
    cards_extra: Vec<PathBuf>,
    /// Datasheet override table (name,field,value)
    #[arg(long)]
    overrides: Option<PathBuf>,
    /// Ranked candidate names for ambiguous card names
    #[arg(long)]
    plausibility: Option<PathBuf>,
    #[arg(long)]
    systems: Option<PathBuf>,
    /// Upstream column to field mapping for the systems table
    #[arg(long)]
    systems_columns: Option<PathBuf>,
    #[arg(long)]
    country_aliases: Option<PathBuf>,
    #[arg(long)]
    mixes: Option<PathBuf>,
    #[arg(long)]
    factors: Option<PathBuf>,
    #[arg(long)]
    constants: Option<PathBuf>,
    #[arg(long)]
    server_profiles: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Correct FLOP-based estimates with the fitted bridge
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    apply_bridge: Option<bool>,
    #[arg(long)]
    scenario_ratio: Option<f64>,
    /// Footprints below this GWP (kg) are left out of scenario comparisons
    #[arg(long)]
    gwp_floor: Option<f64>,
    /// Trend weighting: ols or feasible_wls
    #[arg(long)]
    weighting: Option<Weighting>,
    /// Anomaly threshold in median absolute deviations
    #[arg(long)]
    mad_k: Option<f64>,
    /// Recorded in the provenance block
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    count: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Card table whose names are used (defaults to the bundled cards)
    #[arg(long)]
    cards: Option<PathBuf>,
}

impl RunArgs {
    fn into_config(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if self.$field.is_some() {
                    cfg.$field = self.$field;
                }
            )*};
        }
        set!(cards, cards_alt, overrides, plausibility, systems, systems_columns, country_aliases, mixes, factors, constants, server_profiles, scenario_ratio, seed);
        if !self.cards_extra.is_empty() {
            cfg.cards_extra = Some(self.cards_extra);
        }
        if let Some(o) = self.out {
            cfg.out = o;
        }
        if let Some(b) = self.apply_bridge {
            cfg.apply_bridge = b;
        }
        if let Some(g) = self.gwp_floor {
            cfg.gwp_floor = g;
        }
        if let Some(w) = self.weighting {
            cfg.weighting = w;
        }
        if let Some(k) = self.mad_k {
            cfg.mad_k = k;
        }
        Ok(cfg)
    }
}

fn print_outputs(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run_stage(args: RunArgs, stage: impl FnOnce(&Analysis, &RunConfig) -> Result<Vec<PathBuf>>) -> Result<()> {
    let cfg = args.into_config()?;
    let analysis = pipeline::analyze(&cfg)?;
    let outputs = stage(&analysis, &cfg)?;
    print_outputs(&outputs);
    Ok(())
}

fn print_summary(s: &RunSummary) {
    println!(
        "cards {} | systems {} | eligible {} | excluded multi-hardware {} | excluded insufficient-data {}",
        s.cards, s.systems, s.eligible, s.excluded_multi_hardware, s.excluded_insufficient_data
    );
    println!(
        "pairs {} (clean {}) | estimated {} | skipped {} | bridge mode {} | weighting {}",
        s.pairs, s.clean_pairs, s.estimated, s.skipped, s.provenance.bridge_mode, s.provenance.weighting
    );
    print_outputs(&s.outputs);
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => run_stage(a, |an, cfg| pipeline::write_ingest(an, &cfg.out)),
        Command::Coverage(a) => run_stage(a, |an, cfg| {
            Ok(vec![
                pipeline::write_coverage(an, &cfg.out)?,
                pipeline::write_coverage_json(an, &cfg.out)?,
            ])
        }),
        Command::Bridge(a) => run_stage(a, |an, cfg| Ok(vec![pipeline::write_bridge(an, &cfg.out)?])),
        Command::Estimate(a) => run_stage(a, |an, cfg| Ok(vec![pipeline::write_estimates(an, &cfg.out)?])),
        Command::Impacts(a) => run_stage(a, |an, cfg| {
            Ok(vec![
                pipeline::write_impacts(an, &cfg.out)?,
                pipeline::write_embodied_shares(an, &cfg.out)?,
            ])
        }),
        Command::Trends(a) => run_stage(a, |an, cfg| {
            Ok(vec![pipeline::write_trends(an, cfg.weighting, &cfg.out)?])
        }),
        Command::Scenario(a) => run_stage(a, |an, cfg| {
            let ratio = cfg
                .scenario_ratio
                .ok_or_else(|| ConfigError::Invalid("--scenario-ratio is required".into()))?;
            let cmp = pipeline::scenario_from_analysis(an, cfg, ratio)?;
            println!(
                "excluded below {} kg: real {} | scenario {}",
                cmp.gwp_floor,
                cmp.real.excluded.len(),
                cmp.scenario.excluded.len()
            );
            Ok(vec![pipeline::write_scenario(&cmp, &cfg.out)?])
        }),
        Command::Report(a) => {
            let cfg = a.into_config()?;
            let summary = pipeline::run_pipeline(&cfg)?;
            print_summary(&summary);
            Ok(())
        }
        Command::Synth(a) => {
            let catalog = match &a.cards {
                Some(p) => parse_card_table(p, CardSource::Other)?.records,
                None => {
                    let mut c = bundled_workstation_cards();
                    c.extend(bundled_other_cards());
                    c
                }
            };
            let systems = synth_systems(
                &catalog,
                &SynthOptions {
                    count: a.count,
                    seed: a.seed,
                    ..Default::default()
                },
            );
            std::fs::create_dir_all(&a.out).map_err(|e| Error::Io {
                path: a.out.clone(),
                source: e,
            })?;
            let path = a.out.join("systems.csv");
            let file = std::fs::File::create(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            write_systems_table(&systems, std::io::BufWriter::new(file)).map_err(|e| Error::Io {
                path: path.clone(),
                source: std::io::Error::other(e),
            })?;
            print_outputs(&[path]);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlca-trends: error: {e}");
            ExitCode::FAILURE
        }
    }
}
