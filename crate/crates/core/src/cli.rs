//! Command-line front end. Exit codes: 0 success, 1 usage, 2 data error,
//! 3 numerical error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::ace::{ace_discrete, AceOptions};
use crate::apps::{recommend, Variant};
use crate::common::{build_common_config, eps_common_information};
use crate::error::{Error, Result};
use crate::experiments::{run_tail_experiment, Metric};
use crate::gaussian::{
    cca, gaussian_common_info, gaussian_mi, prediction_mse, rank_k_regression_kl, rank_k_regression_mmse,
    GaussianJoint,
};
use crate::geom::random_weak_joint;
use crate::modal::{decompose, max_modes, Method};
use crate::prob::{parse_joint_or_samples_tsv, write_joint_tsv, JointPmf};

#[derive(Parser, Debug)]
#[command(name = "modalfeat", version, about = "Modal decomposition of joint distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Tsv,
    Json,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Oracle,
    Ace,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum VariantArg {
    Match,
    YWeighted,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Sigma,
    Mu2,
    Mu2Prime,
    MiError,
}

#[derive(Args, Debug)]
struct Common {
    /// Input file: joint table or samples (TSV), or JSON.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    format: Format,
    /// Number of modes.
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the result here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl Common {
    fn ace_options(&self) -> AceOptions {
        AceOptions {
            tol: self.tol,
            max_iters: self.max_iters,
            seed: self.seed,
            ..AceOptions::default()
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Top-k modes of a joint distribution.
    Decompose {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "oracle")]
        method: MethodArg,
    },
    /// Top-k modes by alternating conditional expectations, with the trace.
    Ace {
        #[command(flatten)]
        common: Common,
    },
    /// Ranked items for a user from a rank-k model.
    Recommend {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 5)]
        top: usize,
        #[arg(long, value_enum, default_value = "match")]
        variant: VariantArg,
    },
    /// ε-common information and its mixture configuration.
    CommonInfo {
        #[command(flatten)]
        common: Common,
    },
    /// Canonical correlation analysis of a Gaussian model (JSON).
    Cca {
        #[command(flatten)]
        common: Common,
    },
    /// Rank-k KL and MMSE linear predictors of a Gaussian model (JSON).
    GaussRegress {
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo check of a sample-complexity tail bound.
    SampleComplexity {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "sigma")]
        metric: MetricArg,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', default_value = "500,2000,8000")]
        n: Vec<usize>,
        /// Comma-separated thresholds.
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        delta: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Random weakly dependent joint with k planted modes.
    Synth {
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        nx: usize,
        #[arg(long, default_value_t = 4)]
        ny: usize,
        /// Largest mode strength before any shrinking for validity.
        #[arg(long, default_value_t = 0.3)]
        strength: f64,
        #[arg(long, value_enum, default_value = "tsv")]
        format: Format,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}: {}", e.code(), e);
            if e.is_numerical() {
                3
            } else {
                2
            }
        }
    }
}

fn read_joint(common: &Common) -> Result<JointPmf> {
    let text = std::fs::read_to_string(&common.input)?;
    match common.format {
        Format::Tsv => parse_joint_or_samples_tsv(&text),
        Format::Json => {
            let j: JointPmf = serde_json::from_str(&text)?;
            JointPmf::new(j.x, j.y, j.probs)
        }
    }
}

fn read_gaussian(common: &Common) -> Result<GaussianJoint> {
    GaussianJoint::from_json(&std::fs::read_to_string(&common.input)?)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn emit_json(output: Option<&Path>, v: &Value) -> Result<()> {
    emit(output, &format!("{}\n", serde_json::to_string_pretty(v)?))
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Decompose { common, method } => {
            let joint = read_joint(&common)?;
            let m = match method {
                MethodArg::Oracle => Method::Oracle,
                MethodArg::Ace => Method::Ace(common.ace_options()),
            };
            let md = decompose(&joint, common.k, m)?;
            emit_json(common.output.as_deref(), &md.to_json())
        }
        Command::Ace { common } => {
            let joint = read_joint(&common)?;
            let (md, trace) = ace_discrete(&joint, common.k, &common.ace_options())?;
            let mut v = md.to_json();
            v["trace"] = json!(trace.values);
            v["converged"] = json!(trace.converged);
            emit_json(common.output.as_deref(), &v)
        }
        Command::Recommend {
            common,
            user,
            top,
            variant,
        } => {
            let joint = read_joint(&common)?;
            let variant = match variant {
                VariantArg::Match => Variant::Match,
                VariantArg::YWeighted => Variant::YWeighted,
            };
            let r = recommend(&joint, common.k, top, &user, variant, Method::Oracle)?;
            emit_json(common.output.as_deref(), &serde_json::to_value(&r)?)
        }
        Command::CommonInfo { common } => {
            let joint = read_joint(&common)?;
            let value = eps_common_information(&joint)?;
            let kmax = max_modes(joint.nx(), joint.ny());
            let md = decompose(&joint, kmax, Method::Oracle)?;
            let config = build_common_config(&md);
            let mut v = json!({ "value": value, "sigmas": md.sigmas });
            match config {
                Ok(c) => {
                    v["config"] = json!({
                        "labels": c.labels,
                        "p_w": c.p_w,
                        "x_given_w": c.x_given_w,
                        "y_given_w": c.y_given_w,
                    })
                }
                Err(e) => v["config_error"] = json!(format!("{}: {}", e.code(), e)),
            }
            emit_json(common.output.as_deref(), &v)
        }
        Command::Cca { common } => {
            let model = read_gaussian(&common)?;
            let c = cca(&model, common.k)?;
            let mi = gaussian_mi(&model)?;
            let ci = gaussian_common_info(&model)?;
            let v = json!({
                "sigmas": c.sigmas,
                "f": c.f,
                "g": c.g,
                "mutual_information": mi.exact,
                "local_mutual_information": mi.local(common.k),
                "common_information": ci.value,
            });
            emit_json(common.output.as_deref(), &v)
        }
        Command::GaussRegress { common } => {
            let model = read_gaussian(&common)?;
            let kl = rank_k_regression_kl(&model, common.k)?;
            let mmse = rank_k_regression_mmse(&model, common.k)?;
            let v = json!({
                "k": common.k,
                "kl_predictor": kl.predictor,
                "kl_cross_cov": kl.cross_cov,
                "kl_mse": prediction_mse(&model, &kl.predictor)?,
                "mmse_predictor": mmse,
                "mmse_mse": prediction_mse(&model, &mmse)?,
            });
            emit_json(common.output.as_deref(), &v)
        }
        Command::SampleComplexity {
            common,
            metric,
            n,
            delta,
            trials,
        } => {
            let joint = read_joint(&common)?;
            let metric = match metric {
                MetricArg::Sigma => Metric::Sigma,
                MetricArg::Mu2 => Metric::Mu2,
                MetricArg::Mu2Prime => Metric::Mu2Prime,
                MetricArg::MiError => Metric::MiError,
            };
            let r = run_tail_experiment(&joint, metric, &n, &delta, common.k, trials, common.seed)?;
            emit_json(common.output.as_deref(), &serde_json::to_value(&r)?)
        }
        Command::Synth {
            k,
            seed,
            nx,
            ny,
            strength,
            format,
            output,
        } => {
            if !(strength > 0.0) {
                return Err(Error::InvalidArgument("strength must be positive".into()));
            }
            let w = random_weak_joint(nx, ny, k, strength, seed)?;
            match format {
                Format::Tsv => emit(output.as_deref(), &write_joint_tsv(&w.joint)),
                Format::Json => emit_json(output.as_deref(), &serde_json::to_value(&w.joint)?),
            }
        }
    }
}
