use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use coarse_lab_cli::{run, verify};

#[derive(Parser)]
#[command(name = "coarse-lab", version, about = "Combing audits, Rips cohomology and corona approximations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute the tasks of a config file.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-evaluate a report against the space and combing files it references.
    Verify { report: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, threads } => {
            if let Some(n) = threads {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
            }
            match run::run(&config, out.as_deref()) {
                Ok(s) => {
                    for r in &s.reports {
                        println!("{}", r.display());
                    }
                    if s.unmet.is_empty() {
                        ExitCode::SUCCESS
                    } else {
                        for u in &s.unmet {
                            eprintln!("expectation not met: {u}");
                        }
                        ExitCode::from(2)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Verify { report } => match verify::verify(&report) {
            Ok(d) if d.is_empty() => {
                println!("ok {}", report.display());
                ExitCode::SUCCESS
            }
            Ok(d) => {
                eprintln!("{} mismatches in {}", d.len(), report.display());
                for line in d {
                    eprintln!("  {line}");
                }
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
