use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use superabsorb_cli::commands::{apply_overrides, execute, Overrides, Study};
use superabsorb_cli::config::{parse_config, RunConfig};
use superabsorb_cli::output::write_error;
use superabsorb_cli::plot::{emit_plot, PlotKind};
use superabsorb_cli::CliError;

#[derive(Parser)]
#[command(name = "superabsorb", version, about = "Superabsorbing ring photocell studies")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; overrides the configuration's `workers`.
    #[arg(long, global = true, env = "SUPERABSORB_WORKERS")]
    workers: Option<usize>,
    /// Output directory; defaults to the configuration's `output_dir`, then `out/<command>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ring sizes: `5`, `2,4,5` or the inclusive range `2..6`.
    #[arg(long, global = true)]
    n: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    suppression: Option<Vec<f64>>,
    #[arg(long = "gamma-r", global = true, value_delimiter = ',')]
    gamma_r: Option<Vec<f64>>,
    /// Vibrational temperatures in K.
    #[arg(long, global = true, value_delimiter = ',')]
    temps: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimised power report for one configuration.
    Solve,
    /// Net power over suppression × γ_r.
    Grid,
    /// Power and target strength against ring size.
    Scaling,
    /// Net power over τ_L × r_nn per vibrational temperature.
    Phasemap,
    /// Optical and phonon transition spectra with histograms.
    Spectrum,
    /// Disorder ensemble statistics.
    Ensemble,
    /// Net power over dipole angles.
    Angles,
    /// Render a result CSV as SVG.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long)]
        output: PathBuf,
        /// Column to bin for histograms of per-trial tables.
        #[arg(long)]
        column: Option<String>,
    },
}

fn parse_n(text: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Config(format!("--n: cannot parse `{text}`"));
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim) {
        match item.split_once("..") {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (a.parse().map_err(|_| bad())?, b.trim_start_matches('=').parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(item.parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

fn study_of(c: &Command) -> Option<Study> {
    Some(match c {
        Command::Solve => Study::Solve,
        Command::Grid => Study::Grid,
        Command::Scaling => Study::Scaling,
        Command::Phasemap => Study::Phasemap,
        Command::Spectrum => Study::Spectrum,
        Command::Ensemble => Study::Ensemble,
        Command::Angles => Study::Angles,
        Command::Plot { .. } => return None,
    })
}

fn run_study(study: Study, g: &Global) -> Result<PathBuf, (Option<PathBuf>, CliError)> {
    let fallback_out = g.out.clone().unwrap_or_else(|| PathBuf::from("out").join(study.name()));
    let fail = |e: CliError| (Some(fallback_out.clone()), e);
    let n = g.n.as_deref().map(parse_n).transpose().map_err(fail)?;
    let base = match (&g.config, &n) {
        (Some(path), _) => parse_config(path).map_err(fail)?,
        (None, Some(n)) if !n.is_empty() => RunConfig::with_sites(n[0]),
        _ => return Err(fail(CliError::Config("--config is required unless --n is given".into()))),
    };
    let out = g.out.clone().or_else(|| base.output_dir.clone()).unwrap_or(fallback_out);
    let fail = |e: CliError| (Some(out.clone()), e);
    let overrides = Overrides { n, suppression: g.suppression.clone(), gamma_r: g.gamma_r.clone(), temps: g.temps.clone(), seed: g.seed };
    let config = apply_overrides(study, base, &overrides).map_err(fail)?;
    let workers = g
        .workers
        .or(config.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(fail(CliError::Config("workers must be >= 1".into())));
    }
    execute(study, &config, &out, workers).map_err(fail)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plot { input, kind, output, column } => {
            emit_plot(input, *kind, output, column.as_deref()).map(|_| output.clone()).map_err(|e| (None, e))
        }
        c => run_study(study_of(c).expect("study command"), &cli.global),
    };
    match result {
        Ok(path) => {
            println!("{}", path.display());
            ExitCode::SUCCESS
        }
        Err((dir, e)) => {
            let command = study_of(&cli.command).map_or("plot", Study::name);
            if let Some(dir) = dir {
                write_error(&dir, command, &e);
            }
            eprintln!("{}", serde_json::json!({ "command": command, "kind": e.kind(), "message": e.to_string() }));
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_lists_and_ranges() {
        assert_eq!(parse_n("5").unwrap(), vec![5]);
        assert_eq!(parse_n("2..6").unwrap(), vec![2, 3, 4, 5, 6]);
        assert_eq!(parse_n("2,4..5").unwrap(), vec![2, 4, 5]);
        assert!(parse_n("6..2").is_err());
        assert!(parse_n("x").is_err());
    }
}
