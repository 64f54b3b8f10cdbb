//! Command implementations behind the `hqnn` binary.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
//! error, 3 numerical divergence or failed numerical check.

mod commands;
mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{cmd_eval, cmd_experiment, cmd_gradcheck, cmd_qsim, cmd_synth, cmd_train};
pub use config::{parse_assignment, set_dotted, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "hqnn", version, about = "Hybrid quantum-classical thermogram classifier")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Run-configuration sources shared by training-style commands.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "BOOL")]
    pub quantum_enabled: Option<bool>,
    /// linear, ring or all-to-all.
    #[arg(long)]
    pub connectivity: Option<String>,
    /// adjoint or parameter-shift.
    #[arg(long)]
    pub grad_method: Option<String>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    /// Arbitrary dotted override, e.g. `--set model.n_layers=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

impl ConfigArgs {
    pub fn overrides(&self) -> crate::Result<Vec<(String, String)>> {
        let mut o = Vec::new();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        push("seed", self.seed.map(|v| v.to_string()));
        push("model.quantum_enabled", self.quantum_enabled.map(|v| v.to_string()));
        push("model.connectivity", self.connectivity.as_ref().map(|v| format!("\"{v}\"")));
        push("model.grad_method", self.grad_method.as_ref().map(|v| format!("\"{v}\"")));
        push("train.max_epochs", self.max_epochs.map(|v| v.to_string()));
        push("train.patience", self.patience.map(|v| v.to_string()));
        push("train.lr0", self.lr.map(|v| format!("{v:?}")));
        push("train.batch", self.batch.map(|v| v.to_string()));
        for s in &self.set {
            o.push(parse_assignment(s)?);
        }
        Ok(o)
    }

    pub fn resolve(&self, extra: &[(String, String)]) -> crate::Result<RunConfig> {
        let mut o = self.overrides()?;
        o.extend_from_slice(extra);
        RunConfig::resolve(self.config.as_deref(), &o)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic thermogram dataset.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        per_class: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Train a model and write checkpoint, curves and metrics.
    Train {
        /// Dataset root with normal/ and malignant/ subdirectories.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Optional held-out test root in the same layout.
        #[arg(long)]
        test_data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Evaluate a checkpoint on one split.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset root; defaults to the manifest saved beside the checkpoint.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
    },
    /// Run the circuit standalone and print gates and expectations.
    Qsim {
        /// Comma-separated encoding angles, one per qubit.
        #[arg(long, allow_hyphen_values = true)]
        angles: String,
        /// File with the L·n·3 rotation angles, whitespace or comma separated.
        #[arg(long, conflicts_with = "theta_zero")]
        theta_file: Option<PathBuf>,
        #[arg(long)]
        theta_zero: bool,
        #[arg(long, default_value = "ring")]
        connectivity: String,
        #[arg(long, default_value_t = 2)]
        layers: usize,
    },
    /// Compare autodiff, parameter-shift and finite-difference gradients.
    Gradcheck {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        eps: f64,
    },
    /// Paired multi-seed comparison of two configurations.
    Experiment {
        #[arg(long)]
        config_a: Option<PathBuf>,
        /// Defaults to config A with the quantum layer disabled.
        #[arg(long)]
        config_b: Option<PathBuf>,
        /// A seed count (counting up from the configured seed) or a comma list.
        #[arg(long, default_value = "5")]
        seeds: String,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code. Reports go to `out`, errors to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth { out: dir, per_class, seed } => cmd_synth(&dir, per_class, seed, out),
        Command::Train { data, test_data, out: dir, cfg } => cmd_train(&cfg, data, test_data, dir, out),
        Command::Eval { checkpoint, data, split, out: dir, cfg } => {
            cmd_eval(&checkpoint, data, &split, dir, &cfg, out)
        }
        Command::Qsim { angles, theta_file, theta_zero, connectivity, layers } => {
            cmd_qsim(&angles, theta_file.as_deref(), theta_zero, &connectivity, layers, out)
        }
        Command::Gradcheck { seed, eps } => cmd_gradcheck(seed, eps, out),
        Command::Experiment { config_a, config_b, seeds, data, out: dir, set } => {
            cmd_experiment(config_a.as_deref(), config_b.as_deref(), &seeds, data, dir, &set, out)
        }
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
