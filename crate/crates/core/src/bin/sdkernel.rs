use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sdkernel::bench::{
    run_pairwise_table, run_scaling, write_csv, ExperimentSpec, Method, MethodRunner, ScalingAxis,
    PAIRWISE_COLUMNS, SCALING_COLUMNS,
};
use sdkernel::noise::{read_path_file, sample_fbm, write_path_csv};
use sdkernel::rough_path::PathSamples;
use sdkernel::sigkernel::{integrate_system, DiagonalDerivativePath};
use sdkernel::Result;

#[derive(Parser)]
#[command(name = "sdkernel", version, about = "Schwinger-Dyson and signature kernels of rough paths")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Kernel values of one path under each method.
    Kernel {
        #[command(flatten)]
        common: Common,
        /// Path CSV; an fBM path is sampled when absent.
        #[arg(long)]
        path: Option<PathBuf>,
        /// Dump the solved table of the first SDK method here.
        #[arg(long)]
        table_out: Option<PathBuf>,
    },
    /// Pairwise discrepancy between methods on fBM paths.
    Table {
        #[command(flatten)]
        common: Common,
    },
    /// Solver runtime along one axis.
    Scaling {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        axis: Option<ScalingAxis>,
        /// Axis values, comma separated.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<u32>>,
    },
    /// Sample one fBM path and write it as CSV.
    Fbm {
        #[command(flatten)]
        common: Common,
    },
    /// Signature kernel of two path CSVs.
    Sigkernel {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Grid steps per axis.
        #[arg(long, default_value_t = 128)]
        grid: usize,
        /// Blocks per path as a power of two; every segment is its own block when absent.
        #[arg(long)]
        log2_coarse: Option<u32>,
        /// Truncation level of the block derivatives.
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON experiment spec; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    hurst: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long = "log2-fine")]
    log2_fine: Option<u32>,
    #[arg(long = "log2-coarse")]
    log2_coarse: Option<u32>,
    #[arg(long)]
    kappa: Option<usize>,
    #[arg(long)]
    zeta: Option<usize>,
    #[arg(long = "matrix-dim")]
    matrix_dim: Option<usize>,
    #[arg(long)]
    sims: Option<usize>,
    #[arg(long = "series-level")]
    series_level: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn spec(&self) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(p) => ExperimentSpec::from_json_file(p)?,
            None => ExperimentSpec::default(),
        };
        macro_rules! set {
            ($field:ident, $flag:ident) => {
                if let Some(v) = &self.$flag {
                    spec.$field = v.clone();
                }
            };
        }
        set!(hurst, hurst);
        set!(methods, methods);
        set!(n_paths, paths);
        set!(dims, dims);
        set!(log2_fine, log2_fine);
        set!(log2_coarse, log2_coarse);
        set!(kappa, kappa);
        set!(matrix_dim, matrix_dim);
        set!(n_sims, sims);
        set!(series_level, series_level);
        set!(seed, seed);
        set!(out, out);
        if self.zeta.is_some() {
            spec.zeta = self.zeta;
        }
        Ok(spec)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            Box::new(io::BufWriter::new(File::create(p)?))
        }
        None => Box::new(io::stdout().lock()),
    })
}

fn fbm_path(spec: &ExperimentSpec) -> Result<PathSamples> {
    let hurst = spec.hurst.first().copied().unwrap_or(0.5);
    sample_fbm(&spec.fbm_config(hurst, spec.seed))
}

fn explicit_out(common: &Common, spec: &ExperimentSpec) -> Option<PathBuf> {
    common.out.clone().or_else(|| common.config.as_ref().map(|_| spec.out.clone()))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Kernel {
            common,
            path,
            table_out,
        } => {
            let spec = common.spec()?;
            let samples = match &path {
                Some(p) => read_path_file(p)?,
                None => fbm_path(&spec)?,
            };
            let runner = MethodRunner::new(&spec, samples.d());
            let mut rows = Vec::new();
            for &m in &spec.methods {
                rows.push(runner.evaluate(m, &samples, spec.seed)?);
            }
            if let Some(tp) = table_out {
                let kappa = spec
                    .methods
                    .iter()
                    .find_map(|m| match m {
                        Method::Sdk(k) => Some(*k),
                        _ => None,
                    })
                    .unwrap_or(spec.kappa);
                let table = runner.table(kappa, &samples)?;
                table.write_binary(io::BufWriter::new(File::create(tp)?))?;
            }
            write_csv(
                &spec,
                &rows,
                &["method", "value", "std_error"],
                output(explicit_out(&common, &spec).as_deref())?,
            )
        }
        Command::Table { common } => {
            let spec = common.spec()?;
            let rows = run_pairwise_table(&spec)?;
            std::fs::create_dir_all(&spec.out)?;
            let file = spec.out.join("pairwise.csv");
            write_csv(&spec, &rows, &PAIRWISE_COLUMNS, output(Some(&file))?)?;
            eprintln!("wrote {}", file.display());
            Ok(())
        }
        Command::Scaling {
            common,
            axis,
            values,
        } => {
            let mut spec = common.spec()?;
            if let Some(a) = axis {
                spec.axis = a;
            }
            if let Some(v) = values {
                spec.axis_values = v;
            }
            let rows = run_scaling(&spec, spec.axis)?;
            std::fs::create_dir_all(&spec.out)?;
            let file = spec.out.join(format!("scaling_{}.csv", spec.axis));
            write_csv(&spec, &rows, &SCALING_COLUMNS, output(Some(&file))?)?;
            eprintln!("wrote {}", file.display());
            Ok(())
        }
        Command::Fbm { common } => {
            let spec = common.spec()?;
            let samples = fbm_path(&spec)?;
            let mut out = output(explicit_out(&common, &spec).as_deref())?;
            write_path_csv(&samples, &mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Sigkernel {
            x,
            y,
            grid,
            log2_coarse,
            level,
            out,
        } => {
            let (px, py) = (read_path_file(&x)?, read_path_file(&y)?);
            let lift = |p: &PathSamples| match log2_coarse {
                Some(n) => DiagonalDerivativePath::from_blocks(p, n, level),
                None => Ok(DiagonalDerivativePath::from_segments(p)),
            };
            let state = integrate_system(&lift(&px)?, &lift(&py)?, grid)?;
            let mut w = output(out.as_deref())?;
            writeln!(w, "{:?}", state.terminal())?;
            w.flush()?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
