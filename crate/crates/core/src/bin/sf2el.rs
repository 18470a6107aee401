use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sf2el::harness::{
    self, load_base_dataset, make_stream, parse_methods, write_buffer_trace, write_report, write_sweep,
    ExperimentConfig,
};
use sf2el::stream::{make_swiss_with, write_stream_trace, SwissParams};
use sf2el::{Error, Result};

#[derive(Parser)]
#[command(name = "sf2el", version, about = "Semi-supervised learning over feature-evolvable streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every selected method over every seed and write result CSVs.
    Run(Common),
    /// Repeat `run` for several buffer capacities.
    SweepBuffer {
        #[command(flatten)]
        common: Common,
        /// Comma-separated capacities.
        #[arg(long, value_delimiter = ',', default_value = "10,20,40,60")]
        sizes: Vec<usize>,
    },
    /// Export the event sequence of one seed as `stream_trace.csv`.
    GenStream(Common),
    /// Write the two-spiral dataset to CSV.
    MakeSwiss {
        #[arg(long, default_value_t = 2000)]
        n: usize,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "swiss.csv")]
        out: PathBuf,
    },
}

/// Flags that override the config file.
#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of seeds.
    #[arg(long)]
    seeds: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Comma-separated method names, or `all`.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    buffer: Option<usize>,
    #[arg(long = "p-l")]
    p_l: Option<f64>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    /// Include feature columns in the stream trace.
    #[arg(long)]
    dump_features: bool,
    /// Write per-round reservoir decisions of the first seed.
    #[arg(long)]
    buffer_trace: bool,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.run.base_seed = s;
        }
        if let Some(n) = self.seeds {
            cfg.run.seeds = n;
        }
        if let Some(d) = &self.out_dir {
            cfg.run.out_dir = d.clone();
        }
        if let Some(m) = &self.methods {
            parse_methods(m)?;
            cfg.run.methods = vec![m.clone()];
        }
        if let Some(b) = self.buffer {
            cfg.model.buffer = b;
        }
        if let Some(p) = self.p_l {
            cfg.schedule.label_prob = p;
        }
        if let Some(v) = self.lambda1 {
            cfg.model.lambda1 = v;
        }
        if let Some(v) = self.lambda2 {
            cfg.model.lambda2 = v;
        }
        if self.sigma.is_some() {
            cfg.model.sigma = self.sigma;
        }
        if self.eta.is_some() {
            cfg.model.eta = self.eta;
        }
        cfg.run.buffer_trace |= self.buffer_trace;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.config()?;
            let report = harness::run_experiment(&cfg)?;
            let dir = &cfg.run.out_dir;
            write_report(&report, dir)?;
            if cfg.run.buffer_trace {
                write_buffer_trace(&report, dir)?;
            }
            println!("{:<14} {:>9} {:>9} {:>14}", "method", "acc_mean", "acc_std", "final_cum_risk");
            for s in &report.methods {
                println!(
                    "{:<14} {:>9.4} {:>9.4} {:>14.4}",
                    s.method.name(),
                    s.accuracy_mean,
                    s.accuracy_std,
                    s.final_cum_risk
                );
            }
            if let Some(e) = &report.ensemble {
                println!("bound violations: {} of {} seeds", e.violations, cfg.run.seeds);
            }
            println!("results in {}", dir.display());
        }
        Command::SweepBuffer { common, sizes } => {
            let cfg = common.config()?;
            let rows = harness::sweep_buffer(&cfg, &sizes)?;
            let path = write_sweep(&rows, &cfg.run.out_dir)?;
            for row in &rows {
                for s in &row.summaries {
                    println!("b={:<5} {:<14} {:.4} +- {:.4}", row.buffer, s.method.name(), s.accuracy_mean, s.accuracy_std);
                }
            }
            println!("wrote {}", path.display());
        }
        Command::GenStream(common) => {
            let cfg = common.config()?;
            let base = load_base_dataset(&cfg)?;
            let stream = make_stream(&cfg, &base, cfg.run.base_seed)?;
            std::fs::create_dir_all(&cfg.run.out_dir).map_err(|e| Error::io(&cfg.run.out_dir, e))?;
            let path = cfg.run.out_dir.join("stream_trace.csv");
            write_stream_trace(&stream, &path, common.dump_features)?;
            println!("wrote {} events to {}", stream.events.len(), path.display());
        }
        Command::MakeSwiss { n, noise, seed, out } => {
            let mut params = SwissParams::default();
            if let Some(s) = noise {
                params.noise_std = s;
            }
            let data = make_swiss_with(n, params, seed)?;
            data.write_csv(&out)?;
            println!("wrote {} rows to {}", data.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
