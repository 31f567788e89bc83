use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use deepbow_pipeline::report::run_report;
use deepbow_pipeline::sweep::{parse_values, run_sweep, Axis};
use deepbow_pipeline::{toy, CommonArgs, Context};

#[derive(Parser)]
#[command(
    name = "deepbow",
    version,
    about = "Hybrid layer-descriptor features: extract, encode, classify, evaluate"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the network and cache tapped layer outputs.
    Extract(CommonArgs),
    /// Sample descriptors and train one codebook or mixture per layer.
    TrainAgg(CommonArgs),
    /// Encode every image into its hybrid feature.
    Encode(CommonArgs),
    /// Train one-vs-all linear SVMs.
    TrainSvm(CommonArgs),
    /// Score the test split and write per-class AP and mAP.
    Evaluate(CommonArgs),
    /// Write the AP table and charts.
    Report(CommonArgs),
    /// Every stage in order.
    Pipeline(CommonArgs),
    /// One full run per value of a configuration axis.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// layer_subset or codebook_size
        #[arg(long)]
        axis: Axis,
        /// Values separated by `;` (codebook sizes may also use `,`).
        #[arg(long)]
        values: String,
    },
    /// Generate the synthetic three-class dataset with a ready config.
    Toy {
        /// Output directory.
        #[arg(long, default_value = "toy")]
        dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<()> {
    let ctx = |args: &CommonArgs| -> Result<Context> { Context::new(args.resolve()?) };
    match cli.command {
        Command::Extract(a) => ctx(&a)?.run_extract(),
        Command::TrainAgg(a) => ctx(&a)?.run_train_agg(),
        Command::Encode(a) => ctx(&a)?.run_encode(),
        Command::TrainSvm(a) => ctx(&a)?.run_train_svm(),
        Command::Evaluate(a) => {
            print!("{}", ctx(&a)?.run_evaluate()?.to_tsv());
            Ok(())
        }
        Command::Report(a) => run_report(&ctx(&a)?),
        Command::Pipeline(a) => {
            print!("{}", ctx(&a)?.run_all()?.to_tsv());
            Ok(())
        }
        Command::Sweep { common, axis, values } => {
            let rows = run_sweep(&common.resolve()?, axis, &parse_values(axis, &values)?)?;
            print!("{}", deepbow_pipeline::sweep::to_tsv(&rows));
            Ok(())
        }
        Command::Toy { dir, seed } => {
            let cfg = toy::generate(&dir, seed)?;
            println!("{}", cfg.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
