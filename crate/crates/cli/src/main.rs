//! Command-line harness for the semantic communication TTS simulator.
//!
//! Subcommands: `gen-corpus`, `train --stage {1,2}`, `simulate`, `sweep`,
//! `verify`, `print-defaults`. Exit codes: 0 success, 1 runtime failure,
//! 2 usage/configuration error. The output directory resolves from
//! `--out`, then `SCTC_OUT_DIR`, then the config file's `out_dir`.

use clap::{Args, Parser, Subcommand};
use sctc_core::config::RunConfig;
use sctc_core::harness::{
    cmd_gen_corpus, cmd_sweep, cmd_train_stage1, cmd_train_stage2, cmd_verify,
    format_verify_report, parse_fault, OutPaths, TrialContext,
};
use sctc_core::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "sctc",
    version,
    about = "Deterministic semantic communication simulator for text-to-speech"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration (TOML)
    #[arg(long, short)]
    config: PathBuf,
    /// Output directory (overrides SCTC_OUT_DIR and the config's out_dir)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl CommonArgs {
    fn load(&self) -> Result<(RunConfig, OutPaths)> {
        let text = std::fs::read_to_string(&self.config)
            .map_err(|e| Error::Config(format!("cannot read {:?}: {e}", self.config)))?;
        let cfg = RunConfig::from_toml_str(&text)?;
        let dir = self
            .out
            .clone()
            .or_else(|| std::env::var_os("SCTC_OUT_DIR").map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
        Ok((cfg, OutPaths::new(dir)))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus binary and its JSON manifest
    GenCorpus {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train stage 1 (knowledge bases) or stage 2 (end-to-end, per channel)
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// 1 trains the knowledge bases; 2 trains everything else
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
        stage: u8,
        /// Stage-1 knowledge-base file (stage 2 only; defaults to <out>/kb.bin)
        #[arg(long)]
        kb: Option<PathBuf>,
    },
    /// Run one trial and print its record
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Scheme tag, e.g. semantic_awgn or pcm_ldpc_rayleigh
        #[arg(long)]
        scheme: String,
        /// SNR in dB
        #[arg(long)]
        snr: f64,
        /// Communication budget in bits
        #[arg(long)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Run the configured sweep grid; writes results.csv and summary.csv
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Worker threads for trials (output is identical for any value)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Run the self-check battery; exit 0 only if every check passes
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Deliberately break one named check (testing the battery itself)
        #[arg(long)]
        inject_fault: Option<String>,
    },
    /// Print the commented reference configuration
    PrintDefaults,
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::GenCorpus { common } => {
            let (cfg, paths) = common.load()?;
            let corpus = cmd_gen_corpus(&cfg, &paths)?;
            println!(
                "wrote {} utterances to {:?} (manifest {:?})",
                corpus.utterances.len(),
                paths.corpus_bin(),
                paths.corpus_manifest()
            );
            Ok(true)
        }
        Command::Train { common, stage, kb } => {
            let (cfg, paths) = common.load()?;
            if stage == 1 {
                cmd_train_stage1(&cfg, &paths)?;
                println!("stage 1 complete: {:?}", paths.kb_file());
            } else {
                cmd_train_stage2(&cfg, &paths, kb.as_deref())?;
                println!("stage 2 complete: {:?}", paths.checkpoint_file());
            }
            Ok(true)
        }
        Command::Simulate {
            common,
            scheme,
            snr,
            budget,
            trial,
        } => {
            let (cfg, paths) = common.load()?;
            let ctx = TrialContext::load(&cfg, &paths)?;
            let rec = ctx.run_trial(&scheme, snr, budget, trial)?;
            println!(
                "scheme={} snr_db={} budget_bits={} seed={} trial={} wer_token={:.6} wer_synth={:.6} spk={:.6} outage={} h=({:.6},{:.6})",
                rec.scheme,
                rec.snr_db,
                rec.budget_bits,
                rec.seed,
                rec.trial,
                rec.wer_token,
                rec.wer_synth,
                rec.spk,
                u8::from(rec.outage),
                rec.h.0,
                rec.h.1
            );
            Ok(true)
        }
        Command::Sweep { common, jobs } => {
            let (cfg, paths) = common.load()?;
            let (results, summary) = cmd_sweep(&cfg, &paths, jobs)?;
            println!("wrote {results:?} and {summary:?}");
            Ok(true)
        }
        Command::Verify {
            common,
            inject_fault,
        } => {
            let (cfg, _) = common.load()?;
            let fault = inject_fault.as_deref().map(parse_fault).transpose()?;
            let report = cmd_verify(&cfg, fault)?;
            print!("{}", format_verify_report(&report));
            Ok(report.iter().all(|(_, ok)| *ok))
        }
        Command::PrintDefaults => {
            print!("{}", sctc_core::config::DEFAULT_CONFIG_TOML);
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
