use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use olsatt_cli::commands;
use olsatt_cli::{CliResult, Settings};

#[derive(Parser)]
#[command(name = "olsatt", version, about = "Least squares as attention: benchmarks, fitting and weight export")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw simulated datasets and write them as CSV
    Simulate(Options),
    /// Monte Carlo comparison of estimators across designs
    Bench(Options),
    /// Fit a model to a CSV file
    Fit {
        input: PathBuf,
        #[command(flatten)]
        options: Options,
    },
    /// Predict a CSV file with a saved model
    Predict {
        input: PathBuf,
        #[command(flatten)]
        options: Options,
    },
    /// Export attention weights as a CSV matrix
    Weights(Options),
}

#[derive(Args)]
struct Options {
    /// key = value file; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<String>,
    /// Comma-separated design names, or `all`
    #[arg(long)]
    dgp: Option<String>,
    /// Comma-separated sample sizes
    #[arg(long)]
    n: Option<String>,
    /// Comma-separated signal-to-noise ratios
    #[arg(long)]
    snr: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    /// ols, ridge, pcr, attreg (comma-separated for bench)
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    heads: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long)]
    rank: Option<String>,
    #[arg(long)]
    test_fraction: Option<String>,
    #[arg(long)]
    test_size: Option<String>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    diagonal_mask: bool,
    /// Sample sizes 500, 1000, 2500, 5000
    #[arg(long)]
    full: bool,
    /// Worker threads (0 = all cores)
    #[arg(long)]
    threads: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    exclude: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    query: Option<String>,
    #[arg(long)]
    key: Option<String>,
    /// identity, softmax, relu, elu[:ν]
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    head: Option<String>,
    #[arg(long)]
    no_intercept: bool,
}

impl Options {
    fn settings(&self) -> CliResult<Settings> {
        let mut flags = Settings::default();
        let values = [
            ("seed", &self.seed),
            ("dgp", &self.dgp),
            ("n", &self.n),
            ("snr", &self.snr),
            ("reps", &self.reps),
            ("method", &self.method),
            ("heads", &self.heads),
            ("lambda", &self.lambda),
            ("rank", &self.rank),
            ("test-fraction", &self.test_fraction),
            ("test-size", &self.test_size),
            ("threads", &self.threads),
            ("out", &self.out),
            ("target", &self.target),
            ("exclude", &self.exclude),
            ("model", &self.model),
            ("query", &self.query),
            ("key", &self.key),
            ("activation", &self.activation),
            ("head", &self.head),
        ];
        for (key, value) in values {
            if let Some(v) = value {
                flags.set(key, v)?;
            }
        }
        let switches = [
            ("standardize", self.standardize),
            ("diagonal-mask", self.diagonal_mask),
            ("full", self.full),
            ("no-intercept", self.no_intercept),
        ];
        for (key, on) in switches {
            if on {
                flags.set(key, "true")?;
            }
        }
        match &self.config {
            Some(path) => Ok(Settings::read_config(path)?.overridden_by(flags)),
            None => Ok(flags),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(commands::show).unwrap_or_else(|| "-".into())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(o) => {
            for path in commands::simulate(&o.settings()?)? {
                println!("{}", path.display());
            }
        }
        Command::Bench(o) => {
            let s = o.settings()?;
            let config = commands::experiment_config(&s)?;
            eprintln!(
                "{} cells x {} methods, writing to {}",
                config.cell_count(),
                config.methods.len(),
                config.output_path.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
            );
            let result = olsatt_cli::experiment::run_experiment(&config)?;
            for line in commands::summary_lines(&result) {
                println!("{line}");
            }
        }
        Command::Fit { input, options } => {
            let r = commands::fit_csv(&input, &options.settings()?)?;
            println!("method        {}", r.method);
            println!("observations  {} train, {} test", r.n_train, r.n_test);
            println!("R2 in-sample  {}", commands::show(r.r2_in_sample));
            println!("R2 test       {}", opt(r.r2_test));
            if let Some(d) = &r.attreg {
                println!("loss          {} -> {} ({} iterations, {})", d.initial_loss, d.final_loss, d.iterations, d.stop_reason);
            }
            println!("model         {}", r.model_path.display());
            println!("report        {}", r.report_path.display());
        }
        Command::Predict { input, options } => {
            let r = commands::predict(&input, &options.settings()?)?;
            println!("{} predictions written to {}", r.rows, r.output.display());
            if let Some(r2) = r.r2 {
                println!("R2 {}", commands::show(r2));
            }
        }
        Command::Weights(o) => {
            let w = commands::export_weights(&o.settings()?)?;
            println!(
                "{}x{} weights written to {}",
                w.weights.nrows(),
                w.weights.ncols(),
                w.output.display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
