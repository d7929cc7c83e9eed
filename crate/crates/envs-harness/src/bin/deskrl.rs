//! Command-line front-end: training and evaluation runs, compression
//! reports, coefficient counting, tensor decomposition, scattering, and the
//! optimizer benchmark.

use clap::{Parser, Subcommand};
use envs_harness::{HarnessError, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "deskrl", version, about = "Weight-parsimonious deep Q-learning at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent from a JSON config and write metrics, summary, and a
    /// checkpoint into the output directory.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a finished run directory's checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 12345)]
        seed: u64,
    },
    /// Aggregate finished runs into the compression report CSV.
    Report {
        #[arg(long, num_args = 1.., required = true)]
        runs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Count learnable coefficients of the configured network.
    CountParams {
        #[arg(long)]
        config: PathBuf,
    },
    /// Decompose a TNSR tensor with CP or Tucker.
    Decompose {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_parser = ["cp", "tucker"])]
        method: String,
        #[arg(long)]
        rank: Option<usize>,
        /// Comma-separated per-mode ranks (Tucker).
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Wavelet-scatter a TNSR image and write coefficients plus a path
    /// table sidecar.
    Scatter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long = "J")]
        j: usize,
        #[arg(long = "L")]
        l: usize,
        #[arg(long, default_value_t = 2)]
        order: u8,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-step loss of sgd/adam/kfac on the synthetic Kronecker quadratic.
    BenchOptim {
        #[arg(long, default_value_t = 8)]
        dim_a: usize,
        #[arg(long, default_value_t = 8)]
        dim_b: usize,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> envs_harness::Result<()> {
    match command {
        Command::Train { config, seed, out } => {
            let cfg = RunConfig::load(&config)?;
            let summary = envs_harness::train_run(&cfg, seed, &out)?;
            println!(
                "run complete: variant={} seed={} episodes={} headline={:.4}",
                summary.variant, summary.seed, summary.episodes, summary.headline
            );
            for e in &summary.evals {
                println!("  eval @ step {}: {:.4} +/- {:.4}", e.step, e.mean, e.stddev);
            }
            println!(
                "params: total={} head={} (dense head {}, {:.2}x compression)",
                summary.params_total,
                summary.head_params,
                summary.head_dense_params,
                summary.head_compression_ratio
            );
            Ok(())
        }
        Command::Eval {
            checkpoint,
            episodes,
            seed,
        } => {
            let (mean, stddev) = envs_harness::evaluate_run_dir(&checkpoint, episodes, seed)?;
            println!("{mean:.4} +/- {stddev:.4} over {episodes} episodes");
            Ok(())
        }
        Command::Report { runs, out } => {
            let table = envs_harness::collect_report(&runs)?;
            for m in &table.missing {
                eprintln!("missing run: {m}");
            }
            envs_harness::write_report_csv(&table, &out)?;
            println!("wrote {} variants to {}", table.rows.len(), out.display());
            Ok(())
        }
        Command::CountParams { config } => {
            let cfg = RunConfig::load(&config)?;
            let report = autodiff_net::count_parameters(
                &cfg.network,
                &cfg.env.obs_shape(),
                cfg.env.num_actions(),
            )?;
            println!("{:<28} {:>12} {:>12}", "layer", "params", "dense-equiv");
            for l in &report.layers {
                println!("{:<28} {:>12} {:>12}", l.name, l.params, l.dense_equivalent);
            }
            println!("{:<28} {:>12} {:>12}", "total", report.total, report.dense_equivalent_total);
            println!(
                "{:<28} {:>12} {:>12}",
                "linear stack", report.linear_total, report.dense_equivalent_linear_total
            );
            println!(
                "head compression ratio: {:.4}x",
                report.linear_compression_ratio()
            );
            Ok(())
        }
        Command::Decompose {
            input,
            method,
            rank,
            ranks,
            out,
            seed,
        } => decompose(&input, &method, rank, ranks, &out, seed),
        Command::Scatter {
            input,
            j,
            l,
            order,
            out,
        } => scatter_cmd(&input, j, l, order, &out),
        Command::BenchOptim {
            dim_a,
            dim_b,
            steps,
            out,
            seed,
        } => {
            let trace = envs_harness::run_bench(dim_a, dim_b, steps, seed);
            envs_harness::write_bench_csv(&trace, &out)?;
            println!(
                "final losses after {steps} steps: sgd={:.3e} adam={:.3e} kfac={:.3e}",
                trace.sgd.last().unwrap(),
                trace.adam.last().unwrap(),
                trace.kfac.last().unwrap()
            );
            Ok(())
        }
    }
}

#[derive(serde::Serialize)]
struct DecomposeSummary {
    method: String,
    ranks: Vec<usize>,
    rel_error: f64,
    param_count: usize,
    compression_ratio: f64,
}

fn decompose(
    input: &PathBuf,
    method: &str,
    rank: Option<usize>,
    ranks: Option<Vec<usize>>,
    out: &PathBuf,
    seed: u64,
) -> envs_harness::Result<()> {
    let x = tensor_core::load_tensor(input)?;
    let dense: usize = x.shape().iter().product();
    let prefix = out.to_string_lossy().to_string();
    let summary = match method {
        "cp" => {
            let r = rank.ok_or_else(|| HarnessError::Config("cp needs --rank".into()))?;
            let fit = decomp::cp_als(
                &x,
                r,
                &decomp::CpOptions {
                    seed,
                    ..Default::default()
                },
            )?;
            let d = &fit.decomposition;
            tensor_core::save_tensor(
                format!("{prefix}.weights.tnsr"),
                &tensor_core::DenseTensor::from_vec(vec![d.rank()], d.weights.clone())?,
            )?;
            for (k, f) in d.factors.iter().enumerate() {
                tensor_core::save_tensor(
                    format!("{prefix}.factor{k}.tnsr"),
                    &tensor_core::DenseTensor::from_vec(
                        vec![f.rows(), f.cols()],
                        f.data().to_vec(),
                    )?,
                )?;
            }
            DecomposeSummary {
                method: "cp".into(),
                ranks: vec![r],
                rel_error: fit.rel_error,
                param_count: d.param_count(),
                compression_ratio: dense as f64 / d.param_count() as f64,
            }
        }
        "tucker" => {
            let rs = match (ranks, rank) {
                (Some(rs), _) => rs,
                (None, Some(r)) => vec![r.min(*x.shape().iter().min().unwrap()); x.num_modes()],
                (None, None) => {
                    return Err(HarnessError::Config("tucker needs --ranks or --rank".into()))
                }
            };
            let fit = decomp::tucker_hooi(&x, &rs, &decomp::TuckerOptions::default())?;
            let d = &fit.decomposition;
            tensor_core::save_tensor(format!("{prefix}.core.tnsr"), &d.core)?;
            for (k, f) in d.factors.iter().enumerate() {
                tensor_core::save_tensor(
                    format!("{prefix}.factor{k}.tnsr"),
                    &tensor_core::DenseTensor::from_vec(
                        vec![f.rows(), f.cols()],
                        f.data().to_vec(),
                    )?,
                )?;
            }
            DecomposeSummary {
                method: "tucker".into(),
                ranks: rs,
                rel_error: fit.rel_error,
                param_count: d.param_count(),
                compression_ratio: dense as f64 / d.param_count() as f64,
            }
        }
        other => return Err(HarnessError::Config(format!("unknown method {other}"))),
    };
    std::fs::write(
        format!("{prefix}.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "{}: rel_error={:.3e} params={} compression={:.2}x",
        summary.method, summary.rel_error, summary.param_count, summary.compression_ratio
    );
    Ok(())
}

fn scatter_cmd(
    input: &PathBuf,
    j: usize,
    l: usize,
    order: u8,
    out: &PathBuf,
) -> envs_harness::Result<()> {
    let x = tensor_core::load_tensor(input)?;
    let (h, w) = match x.shape() {
        [h, w] => (*h, *w),
        [_, h, w] => (*h, *w),
        other => {
            return Err(HarnessError::Config(format!(
                "scatter input must be (h, w) or (c, h, w), got {other:?}"
            )))
        }
    };
    let cfg = scattering::ScatteringConfig {
        j,
        l,
        max_order: order,
        height: h,
        width: w,
    };
    let bank = scattering::build_filter_bank(&cfg)?;
    let output = scattering::scatter(&x, &bank, &cfg)?;
    tensor_core::save_tensor(out, &output.coeffs)?;
    let sidecar = out.with_extension("paths.json");
    std::fs::write(&sidecar, serde_json::to_string_pretty(&output.paths)?)?;
    println!(
        "scattered to {:?} channels, wrote {} and {}",
        output.coeffs.shape(),
        out.display(),
        sidecar.display()
    );
    Ok(())
}
