use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cellfree_ota::config::{load_config, DetectorKind, EstimatorKind, SystemConfig};
use cellfree_ota::harness::{
    run_coded_ber, run_nmse, run_ser, run_ser_vs_pmax, validate_moments, ExperimentOptions, ExperimentResult,
};

#[derive(Parser)]
#[command(version, about = "Cell-free massive MIMO uplink with an over-the-air fronthaul")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// NMSE of the estimated Gramian and matched filter versus UL SNR.
    Nmse(Common),
    /// Uncoded SER versus UL SNR.
    SerVsSnr(Common),
    /// Uncoded SER versus AP power budget.
    SerVsPmax(Common),
    /// LDPC-coded BER versus Eb/N0.
    CodedBer(Common),
    /// Closed-form moments against Monte Carlo; `--trials` sets the draw count.
    ValidateMoments(Common),
}

#[derive(Args)]
struct Common {
    /// JSON configuration; defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Trial cap per sweep point.
    #[arg(long)]
    trials: Option<u64>,
    /// CSV output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add the wired (exact sum) baseline curves.
    #[arg(long)]
    wired_baseline: bool,
    /// Restrict to one fronthaul estimator; both otherwise.
    #[arg(long)]
    estimator: Option<EstimatorKind>,
    #[arg(long)]
    detector: Option<DetectorKind>,
}

impl Common {
    fn setup(&self) -> cellfree_ota::Result<(SystemConfig, ExperimentOptions)> {
        let mut cfg = match &self.config {
            Some(p) => load_config(p)?,
            None => SystemConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(d) = self.detector {
            cfg.detector = d;
        }
        if let Some(e) = self.estimator {
            cfg.estimator = e;
        }
        cfg.validate()?;
        let mut opts = ExperimentOptions::from_config(&cfg);
        if let Some(e) = self.estimator {
            opts.estimators = vec![e];
        }
        opts.wired_baseline = self.wired_baseline;
        Ok((cfg, opts))
    }

    fn emit(&self, res: &ExperimentResult) -> cellfree_ota::Result<()> {
        match &self.out {
            Some(p) => res.write_csv(p),
            None => {
                print!("{}", res.to_csv());
                Ok(())
            }
        }
    }
}

fn run(cli: Cli) -> cellfree_ota::Result<bool> {
    let (common, runner): (&Common, fn(&SystemConfig, &ExperimentOptions) -> _) = match &cli.command {
        Command::Nmse(c) => (c, run_nmse),
        Command::SerVsSnr(c) => (c, run_ser),
        Command::SerVsPmax(c) => (c, run_ser_vs_pmax),
        Command::CodedBer(c) => (c, run_coded_ber),
        Command::ValidateMoments(c) => {
            let (cfg, _) = c.setup()?;
            let report = validate_moments(&cfg, cfg.trials as usize)?;
            for check in report.checks.iter().filter(|c| !c.pass) {
                eprintln!(
                    "FAIL {}: analytic {:.6e}, empirical {:.6e} (se {:.2e})",
                    check.quantity, check.analytic, check.empirical, check.stderr
                );
            }
            for z in report.zeros.iter().filter(|z| !z.pass) {
                eprintln!("FAIL {}: mean z^2 {:.3}, max |z| {:.3}", z.quantity, z.mean_z2, z.max_abs_z);
            }
            c.emit(&report.to_result(&cfg))?;
            return Ok(report.passed());
        }
    };
    let (cfg, opts) = common.setup()?;
    let res = runner(&cfg, &opts)?;
    common.emit(&res)?;
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("validation failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
