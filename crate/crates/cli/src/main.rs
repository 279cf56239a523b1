use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfqkd::config::{Preset, SystemParams};
use tfqkd::montecarlo::MIN_SAMPLES;
use tfqkd::sweep::{
    default_l_grid, optimize_point, parse_l_grid, run_sweep, to_csv, to_json, CurvePoint, McCheck, ProtocolSet,
    SweepSpec,
};
use tfqkd::validation::run_validation;

const EXIT_USAGE: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "tfqkd",
    version,
    about = "Twin-field QKD key rates, decoy bounds and Monte Carlo checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Key rate at the given (mu, t) and distance.
    Keyrate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value = "both")]
        protocol: ProtocolSet,
    },
    /// Key rate versus distance.
    Sweep {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value = "both")]
        protocol: ProtocolSet,
        /// Optimize (mu, t) at each distance instead of using the given values.
        #[arg(long)]
        optimize: bool,
        /// Distances in km: "a,b,c" or "start:stop:step".
        #[arg(long = "L_grid", value_parser = |s: &str| parse_l_grid(s).map(Grid))]
        l_grid: Option<Grid>,
        /// Run the Monte Carlo comparison at every distance with this many samples.
        #[arg(long, requires = "seed")]
        samples: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Optimal (mu, t) at one distance, with intermediates.
    Optimize {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value = "both")]
        protocol: ProtocolSet,
    },
    /// Compare Monte Carlo estimates with closed forms.
    Validate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, required = true)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
}

#[derive(Debug, Clone)]
struct Grid(Vec<f64>);

#[derive(Args, Debug)]
struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Emit JSON instead of CSV (or the text report for validate).
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long, default_value = "fig3")]
    preset: Preset,
    /// Flat key = value file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "eta_d")]
    eta_d: Option<f64>,
    #[arg(long = "p_d")]
    p_d: Option<f64>,
    #[arg(long = "L_km")]
    l_km: Option<f64>,
    #[arg(long = "e_opt")]
    e_opt: Option<f64>,
    #[arg(long = "f_ec")]
    f_ec: Option<f64>,
    #[arg(long = "M")]
    slices: Option<u32>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
}

impl ParamArgs {
    fn resolve(&self) -> Result<SystemParams, String> {
        let mut p = self.preset.params();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            p = p.apply_kv(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        }
        let overrides = [
            (&mut p.eta_d, self.eta_d),
            (&mut p.p_d, self.p_d),
            (&mut p.l_km, self.l_km),
            (&mut p.e_opt, self.e_opt),
            (&mut p.f_ec, self.f_ec),
            (&mut p.mu, self.mu),
            (&mut p.t, self.t),
            (&mut p.nu, self.nu),
            (&mut p.omega, self.omega),
        ];
        for (field, value) in overrides {
            if let Some(v) = value {
                *field = v;
            }
        }
        if let Some(m) = self.slices {
            p.slices = m;
        }
        p.validated().map_err(|e| e.to_string())
    }
}

fn emit(out: &OutputArgs, text: &str) -> Result<(), String> {
    match &out.out {
        Some(path) => fs::write(path, text).map_err(|e| format!("{}: {e}", path.display())),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
    }
}

fn render(out: &OutputArgs, rows: &[CurvePoint]) -> String {
    if out.json {
        to_json(rows) + "\n"
    } else {
        to_csv(rows)
    }
}

enum Failure {
    Usage(String),
    Validation(String),
}

impl From<String> for Failure {
    fn from(s: String) -> Self {
        Failure::Usage(s)
    }
}

fn err(e: tfqkd::Error) -> Failure {
    match e {
        tfqkd::Error::ValidationFailed { .. } => Failure::Validation(e.to_string()),
        _ => Failure::Usage(e.to_string()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Keyrate {
            params,
            output,
            protocol,
        } => {
            let p = params.resolve()?;
            let mut spec = SweepSpec::new(p, vec![p.l_km]);
            spec.optimize = false;
            spec.protocol = protocol;
            let rows = run_sweep(&spec).map_err(err)?;
            emit(&output, &render(&output, &rows))?;
        }
        Command::Sweep {
            params,
            output,
            protocol,
            optimize,
            l_grid,
            samples,
            seed,
        } => {
            let p = params.resolve()?;
            let grid = l_grid.map_or_else(|| default_l_grid(Some(params.preset)), |g| g.0);
            let mut spec = SweepSpec::new(p, grid);
            spec.protocol = protocol;
            spec.optimize = optimize;
            if let (Some(n), Some(seed)) = (samples, seed) {
                if n < MIN_SAMPLES {
                    return Err(Failure::Usage(format!("--samples must be at least {MIN_SAMPLES}")));
                }
                spec.mc_validate = Some(McCheck { n_samples: n, seed });
            }
            let rows = run_sweep(&spec).map_err(err)?;
            emit(&output, &render(&output, &rows))?;
        }
        Command::Optimize {
            params,
            output,
            protocol,
        } => {
            let p = params.resolve()?;
            let rows = protocol
                .protocols()
                .iter()
                .map(|&proto| optimize_point(&p, p.l_km, proto))
                .collect::<Result<Vec<_>, _>>()
                .map_err(err)?;
            emit(&output, &render(&output, &rows))?;
        }
        Command::Validate {
            params,
            output,
            seed,
            samples,
        } => {
            let p = params.resolve()?;
            let seed = seed.ok_or_else(|| "--seed is required".to_string())?;
            let report = run_validation(&p, samples, seed).map_err(err)?;
            let text = if output.json {
                serde_json::to_string_pretty(&report).map_err(|e| e.to_string())? + "\n"
            } else {
                report.to_string()
            };
            emit(&output, &text)?;
            if !report.passed() {
                let names: Vec<&str> = report.failures().map(|c| c.quantity.as_str()).collect();
                return Err(Failure::Validation(format!("failed checks: {}", names.join(", "))));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Validation(msg)) => {
            eprintln!("validation failed: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monte_carlo_disagreement_maps_to_validation_exit() {
        let e = tfqkd::Error::ValidationFailed {
            l_km: 100.0,
            checks: "E_ZZ".into(),
        };
        assert!(matches!(err(e), Failure::Validation(_)));
        assert!(matches!(err(tfqkd::Error::Sweep("x".into())), Failure::Usage(_)));
    }
}
