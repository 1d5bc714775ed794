use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use shifted_clt::batch::Stage;
use shifted_clt::experiments::{
    dedekind_covariance, dedekind_pairing, dedekind_vectors, emit, emit_document, moment_table, rate_sweep,
    sample_chain, stage_distance_table, ExperimentConfig, Format, SampleRow, Setup,
};
use shifted_clt::shifts_covariance::{check_pd, distance_condition, from_rows, CovarianceSpec, DistanceCondition, PdReport};
use shifted_clt::{Error, Result};

#[derive(Parser)]
#[command(name = "shifted-clt", version, about = "Sampling and distance experiments for shifted L-function vectors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample every requested stage on shared t-draws
    Sample(Common),
    /// Distance table between consecutive stages
    Distances(Common),
    /// Quadrature moments against the diagonal formula
    Moments(Common),
    /// Target and empirical covariance matrices with PD checks (JSON)
    Covariance(Common),
    /// Distance table for every T in T_list
    Rates(Common),
    /// Dedekind-zeta vectors built from principal/quadratic pairs
    Dedekind(Common),
}

#[derive(Clone, Copy, ValueEnum)]
enum Fmt {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config
    #[arg(long)]
    config: PathBuf,
    /// override the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// output file (stdout when omitted; falls back to output_path)
    #[arg(long)]
    out: Option<PathBuf>,
    /// worker threads (results do not depend on this)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Fmt,
}

impl Common {
    fn setup(&self) -> Result<(ExperimentConfig, Option<PathBuf>, Format)> {
        if let Some(n) = self.threads {
            init_threads(n)?;
        }
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        let out = self.out.clone().or_else(|| cfg.output_path.as_ref().map(PathBuf::from));
        let fmt = match self.format {
            Fmt::Csv => Format::Csv,
            Fmt::Json => Format::Json,
        };
        Ok((cfg, out, fmt))
    }
}

#[cfg(feature = "parallel")]
fn init_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn init_threads(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct CovarianceDoc {
    #[serde(flatten)]
    spec: CovarianceSpec,
    c_matrix: Vec<Vec<f64>>,
    alphas: Vec<f64>,
    pd_target_report: PdReport,
    pd_empirical_report: PdReport,
    distance_condition: Vec<DistanceCondition>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct DedekindDoc {
    stage: String,
    pairing: Vec<(usize, usize)>,
    q_matrix: Vec<Vec<f64>>,
    q_pd: PdReport,
    empirical_covariance: Vec<Vec<f64>>,
    rows: Vec<SampleRow>,
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Sample(c) => {
            let (cfg, out, fmt) = c.setup()?;
            let chain = sample_chain(&cfg)?;
            let rows: Vec<SampleRow> = chain.batches.values().flat_map(SampleRow::from_batch).collect();
            eprintln!("t-draw digest {}", chain.t_digest);
            emit(&rows, fmt, "sample", out.as_deref())
        }
        Cmd::Distances(c) => {
            let (cfg, out, fmt) = c.setup()?;
            let chain = sample_chain(&cfg)?;
            emit(&stage_distance_table(&chain, &cfg)?, fmt, "distances", out.as_deref())
        }
        Cmd::Moments(c) => {
            let (cfg, out, fmt) = c.setup()?;
            emit(&moment_table(&cfg)?, fmt, "moments", out.as_deref())
        }
        Cmd::Rates(c) => {
            let (cfg, out, fmt) = c.setup()?;
            let ts = if cfg.t_list.is_empty() { vec![cfg.t] } else { cfg.t_list.clone() };
            emit(&rate_sweep(&cfg, &ts)?, fmt, "rates", out.as_deref())
        }
        Cmd::Covariance(c) => {
            let (mut cfg, out, _) = c.setup()?;
            cfg.stages = vec![Stage::R1T.name().into()];
            let s = Setup::new(&cfg)?;
            let kt = s.k_tilde.as_ref().expect("R1_T setup builds the P1 covariance");
            let n = s.shifts.dim();
            let doc = CovarianceDoc {
                spec: CovarianceSpec::new(cfg.t, &s.k_target, kt),
                c_matrix: (0..n).map(|i| (0..n).map(|j| s.shifts.c(i, j)).collect()).collect(),
                alphas: s.shifts.alphas.clone(),
                pd_target_report: s.k_target.pd.clone(),
                pd_empirical_report: kt.pd.clone(),
                distance_condition: distance_condition(&s.basis, &s.shifts, &s.chars, &s.params)?,
                warnings: s.shifts.warnings.clone(),
            };
            emit_document("covariance", &doc, out.as_deref())
        }
        Cmd::Dedekind(c) => {
            let (mut cfg, out, fmt) = c.setup()?;
            let stage = match &cfg.dedekind_stage {
                Some(s) => Stage::parse(s)?,
                None => cfg.stage_list()?[0],
            };
            cfg.stages = vec![stage.name().into()];
            let chain = sample_chain(&cfg)?;
            let pairing = dedekind_pairing(&chain.setup, &cfg.dedekind_pairing)?;
            let y = dedekind_vectors(&chain.batches[&stage], &pairing)?;
            let rows = SampleRow::from_batch(&y);
            match fmt {
                Format::Csv => emit(&rows, fmt, "dedekind", out.as_deref()),
                Format::Json => {
                    let q = dedekind_covariance(&chain.setup, &pairing);
                    let doc = DedekindDoc {
                        stage: stage.name().into(),
                        pairing,
                        q_pd: check_pd(&from_rows(&q))?,
                        q_matrix: q,
                        empirical_covariance: y.covariance(),
                        rows,
                    };
                    emit_document("dedekind", &doc, out.as_deref())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
