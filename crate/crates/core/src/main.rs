use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hygex::driver::{run_file, with_big_stack, RunConfig};
use hygex::expander::{ExpanderConfig, Stage};

#[derive(Parser)]
#[command(name = "hygex", about = "Hygienic macro expander for a small command language")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum StageArg {
    Expand,
    Elaborate,
}

#[derive(Subcommand)]
enum Command {
    /// Process a command file and print expansions or elaboration results.
    Run {
        file: PathBuf,
        #[arg(long, value_enum, default_value = "expand")]
        stage: StageArg,
        /// Print every macro step as `kind: before ==> after`.
        #[arg(long)]
        trace_expansion: bool,
        /// Print every evaluated tactic with the main goal.
        #[arg(long)]
        trace_tactics: bool,
        /// Expand `notation` to single-backtick quotations (no declaration-time check).
        #[arg(long)]
        no_notation_precheck: bool,
        #[arg(long)]
        no_prelude: bool,
        #[arg(long, default_value_t = 512, value_parser = clap::value_parser!(u64).range(1..))]
        max_expansion_depth: u64,
        #[arg(long, default_value_t = 1024, value_parser = clap::value_parser!(u64).range(1..))]
        max_repeat: u64,
    },
}

fn main() -> ExitCode {
    let Command::Run {
        file,
        stage,
        trace_expansion,
        trace_tactics,
        no_notation_precheck,
        no_prelude,
        max_expansion_depth,
        max_repeat,
    } = Cli::parse().command;
    let cfg = RunConfig {
        expander: ExpanderConfig {
            stage: match stage {
                StageArg::Expand => Stage::Expand,
                StageArg::Elaborate => Stage::Elaborate,
            },
            max_depth: max_expansion_depth as usize,
            max_repeat: max_repeat as usize,
            notation_precheck: !no_notation_precheck,
            trace_expansion,
            trace_tactics,
        },
        no_prelude,
    };
    let out = with_big_stack(move || run_file(&file, &cfg));
    print!("{}", out.stdout);
    for d in &out.diagnostics {
        eprintln!("{}", d.render());
    }
    if out.diagnostics.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
