mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Energy-momenta and lower bounds for (4+1)-dimensional asymptotically AdS initial data.
#[derive(Parser, Debug)]
#[command(name = "aads", version)]
pub struct Cli {
    /// Write a JSON report to this path.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Suppress the human-readable table.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run one of the built-in verification suites.
    Verify {
        #[command(subcommand)]
        suite: Suite,
    },
    /// Compute the fifteen charges of a model.
    Charges {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        quad: QuadArgs,
    },
    /// Assemble Q from a charges file and evaluate positivity and bounds.
    Qmatrix {
        /// JSON file with fields e0, c, cp, j (as written by `charges`).
        #[arg(long)]
        charges: PathBuf,
        #[arg(long, value_enum, default_value_t = VariantArg::Proof)]
        variant: VariantArg,
    },
    /// Charges, Q and bounds in one pass.
    Bound {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        quad: QuadArgs,
        #[arg(long, value_enum, default_value_t = VariantArg::Proof)]
        variant: VariantArg,
    },
    /// Compare the spinor boundary integral with 8π λ†Qλ.
    Identity {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        quad: QuadArgs,
        /// Eight numbers: re,im of λ₁..λ₄.
        #[arg(long, default_value = "1,0,0,0,0,0,0,0", allow_hyphen_values = true)]
        lambda: String,
        #[arg(long, value_enum, default_value_t = ModeArg::Leading)]
        mode: ModeArg,
    },
    /// Check the theorem on randomly drawn charge sets with Q ⪰ 0.
    SamplePsd {
        #[arg(long, default_value_t = 1000)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Standard deviation of the momenta.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, value_enum, default_value_t = VariantArg::Proof)]
        variant: VariantArg,
    },
    /// Estimate decay rates of a model.
    Decay {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated radii; defaults to κr = 4,5,6,7 or the grid radii.
        #[arg(long)]
        radii: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
pub enum Suite {
    /// Exact Clifford relations of the gamma matrices.
    Clifford,
    /// Killing spinor equation residuals at random points.
    Spinors {
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
    /// Lie-derivative residuals of the Killing vector fields.
    Killing {
        /// A single label such as `4,0`; all fifteen when omitted.
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1e-3)]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// Inline JSON `{"name":…,"params":{…}}`, a path to such a file, or a
    /// path to an AADS-ID grid file.
    #[arg(long)]
    pub model: String,
}

#[derive(Args, Debug, Clone, Default)]
pub struct QuadArgs {
    #[arg(long)]
    pub ntheta: Option<usize>,
    #[arg(long)]
    pub npsi: Option<usize>,
    #[arg(long)]
    pub nphi: Option<usize>,
    /// Comma-separated radii.
    #[arg(long)]
    pub radii: Option<String>,
    #[arg(long)]
    pub rtol: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum VariantArg {
    Proof,
    Text,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ModeArg {
    Leading,
    Exact,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::error_code(&e))
        }
    }
}
