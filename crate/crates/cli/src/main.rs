use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qhahn_cli::{default_format, parse_config, run, CliError, Format};

/// q-Hahn polynomials, Pearson weights and multiboson Jacobi reductions.
#[derive(Debug, Parser)]
#[command(name = "qhahn", version)]
struct Args {
    /// TOML configuration file.
    config: PathBuf,
    /// Write the result here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Suppress the summary line on standard error.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", args.config.display())))?;
    let cfg = parse_config(&text)?;
    let format = args.format.or(cfg.options.format).unwrap_or_else(|| default_format(cfg.command));
    let output = args.output.clone().or_else(|| cfg.options.output.clone());
    let report = run(&cfg)?;
    let body = report.render(format);
    match &output {
        Some(path) => {
            std::fs::write(path, &body).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
            if format != Format::Json && !report.meta.is_empty() {
                let mut side = path.clone().into_os_string();
                side.push(".meta.json");
                std::fs::write(&side, report.meta_json())
                    .map_err(|e| CliError::Io(format!("cannot write {}: {e}", side.to_string_lossy())))?;
            }
        }
        None => print!("{body}"),
    }
    let failed = report.meta.get("failed").and_then(|v| v.as_u64()).unwrap_or(0) as usize;
    if !args.quiet {
        eprintln!("{}: {} row(s)", report.command, report.rows.len());
    }
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    Ok(())
}
