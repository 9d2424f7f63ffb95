use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use tse_search::harness::{self, AnalyzeMode, SynthOptions};
use tse_search::metrics::quality_proxy;
use tse_search::protocol::{serve, WorkerHook};
use tse_search::scorers::Selector;
use tse_search::{Error, Waveform};

#[derive(Parser)]
#[command(
    name = "tse-search",
    version,
    about = "Inference-time search for target speaker extraction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic two-talker scenes and a manifest.
    Synth {
        #[arg(long)]
        num_scenes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        #[arg(long, default_value_t = 16_000)]
        sample_rate: u32,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        snr_mean: f64,
        #[arg(long, default_value_t = 3.6)]
        snr_std: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the search over a manifest and write a CSV report plus JSON aggregates.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// One or more of oracle, quality, spksim, joint, external.
        #[arg(long, required = true, value_delimiter = ',', num_args = 1..)]
        selector: Vec<Selector>,
        #[arg(long)]
        report: PathBuf,
    },
    /// Merge run reports into a per-selector, per-step table.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        /// Also write the table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Lipschitz estimates and error-bound checks over a manifest.
    Analyze {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "oracle")]
        selector: Selector,
    },
    /// Built-in protocol worker used for conformance tests.
    #[command(hide = true)]
    Worker {
        #[arg(long)]
        mode: WorkerMode,
        #[arg(long, default_value_t = 1.0)]
        value: f64,
        #[arg(long, default_value_t = 0)]
        delay_ms: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    #[value(name = "lipschitz")]
    Lipschitz,
    #[value(name = "det_bound")]
    DetBound,
    #[value(name = "var_bound")]
    VarBound,
}

impl From<Mode> for AnalyzeMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Lipschitz => AnalyzeMode::Lipschitz,
            Mode::DetBound => AnalyzeMode::DetBound,
            Mode::VarBound => AnalyzeMode::VarBound,
        }
    }
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum WorkerMode {
    /// extract returns the input unchanged
    Identity,
    /// score returns `--value`
    Constant,
    /// score returns the built-in quality proxy
    Quality,
    /// extract drops the last sample
    WrongLength,
    /// extract reports a model error and keeps serving
    Failing,
    /// the process exits on the first request
    Crash,
}

struct TestWorker {
    mode: WorkerMode,
    value: f64,
    delay: Duration,
}

impl TestWorker {
    fn pause(&self) {
        if !self.delay.is_zero() {
            std::thread::sleep(self.delay);
        }
    }
}

impl WorkerHook for TestWorker {
    fn ops(&self) -> Vec<&'static str> {
        match self.mode {
            WorkerMode::Constant | WorkerMode::Quality => vec!["score"],
            _ => vec!["extract"],
        }
    }

    fn extract(&mut self, input: &[f32], _enrollment: &[f32], _sample_rate: u32) -> Result<Vec<f32>, String> {
        self.pause();
        match self.mode {
            WorkerMode::Crash => std::process::exit(3),
            WorkerMode::Failing => Err("model failure".into()),
            WorkerMode::WrongLength => Ok(input[..input.len().saturating_sub(1)].to_vec()),
            _ => Ok(input.to_vec()),
        }
    }

    fn score(&mut self, estimate: &[f32], _enrollment: &[f32], sample_rate: u32) -> Result<f64, String> {
        self.pause();
        match self.mode {
            WorkerMode::Quality => {
                let w = Waveform::from_f32(estimate, sample_rate).map_err(|e| e.to_string())?;
                quality_proxy(&w).map_err(|e| e.to_string())
            }
            _ => Ok(self.value),
        }
    }
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::Config(_) | Error::Merge(_) | Error::Precondition(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Synth {
            num_scenes,
            seed,
            duration,
            sample_rate,
            snr_mean,
            snr_std,
            out,
        } => {
            let opts = SynthOptions {
                num_scenes,
                seed,
                duration_secs: duration,
                sample_rate,
                snr_mean_db: snr_mean,
                snr_std_db: snr_std,
                out_dir: out.clone(),
            };
            let manifest = harness::cmd_synth(&opts)?;
            println!(
                "wrote {} scenes to {}",
                manifest.entries.len(),
                out.join(harness::MANIFEST_NAME).display()
            );
            Ok(0)
        }
        Command::Run {
            manifest,
            config,
            selector,
            report,
        } => {
            let result = harness::cmd_run(&manifest, &config, &selector, &report)?;
            let merged = harness::merge(std::slice::from_ref(&result.summary))?;
            print!("{}", merged.render_text());
            for f in &result.summary.failures {
                eprintln!("failed: {} [{}]: {}", f.id, f.selector, f.error);
            }
            Ok(if result.summary.failures.is_empty() { 0 } else { 1 })
        }
        Command::Report { paths, csv } => {
            let merged = harness::cmd_report(&paths)?;
            print!("{}", merged.render_text());
            if let Some(path) = csv {
                std::fs::write(path, merged.render_csv()?)?;
            }
            Ok(0)
        }
        Command::Analyze {
            manifest,
            config,
            mode,
            out,
            selector,
        } => {
            let report = harness::cmd_analyze(&manifest, &config, selector, mode.into(), &out)?;
            match report.max_value {
                Some(v) => println!("{} entries analysed, max value {v:.6}", count(&report.entries)),
                None => println!("{} entries analysed, no defined ratio", count(&report.entries)),
            }
            Ok(0)
        }
        Command::Worker { mode, value, delay_ms } => {
            let mut hook = TestWorker {
                mode,
                value,
                delay: Duration::from_millis(delay_ms),
            };
            serve(std::io::stdin().lock(), std::io::stdout().lock(), &mut hook)?;
            Ok(0)
        }
    }
}

fn count(entries: &harness::AnalysisEntries) -> usize {
    match entries {
        harness::AnalysisEntries::Lipschitz(v) => v.len(),
        harness::AnalysisEntries::DetBound(v) => v.len(),
        harness::AnalysisEntries::VarBound(v) => v.len(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
