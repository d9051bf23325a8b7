use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use tscc::controller::Algorithm;
use tscc::model::{
    load_metadata, save_metadata, synthesize_metadata, Config, MetadataSpec, VideoMeta,
};
use tscc::oracle::{competitive_suite, dp_agreement_suite};
use tscc::sim::{
    load_bandwidth_trace, load_head_trace, run_simulation, run_sweep, summarize_sweep,
    synthesize_bandwidth, synthesize_head_trace, write_json, write_run_outputs, BandwidthSource,
    BandwidthTrace, HeadModel, HeadParams, HeadTrace, MetadataSource, RunInputs, SweepSpec,
    DEFAULT_BANDWIDTH_SIGMA,
};
use tscc::{Error, Result};

#[derive(Parser)]
#[command(
    name = "tscc",
    version,
    about = "Cybersickness-aware 360-degree video streaming simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over one bandwidth and head trace.
    Simulate(SimulateArgs),
    /// Write synthetic per-tile metadata.
    GenMetadata(GenMetadataArgs),
    /// Run algorithms over a range of bandwidth means and seeds.
    Sweep(SweepArgs),
    /// Compare the fast solvers against brute force on random instances.
    Verify(VerifyArgs),
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// JSON file with a full or partial configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    xi: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha: Option<u32>,
    #[arg(long = "nsl-size")]
    nsl_size: Option<usize>,
    /// Packet queue capacity, seconds.
    #[arg(long)]
    cp: Option<f64>,
    #[arg(long)]
    cs: Option<f64>,
    #[arg(long)]
    omega: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    kdof: Option<f64>,
    /// Comma-separated FoV ratios, largest first.
    #[arg(long = "sfov-ladder", value_delimiter = ',')]
    sfov_ladder: Option<Vec<f64>>,
    /// Never consider DoF simulation.
    #[arg(long)]
    no_dof: bool,
    #[arg(long = "bw-unit")]
    bw_unit: Option<f64>,
}

impl ConfigArgs {
    fn build(&self) -> Result<Config> {
        let mut c = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                    path: path.display().to_string(),
                    source,
                })?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => Config::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { c.$field = v; })*
            };
        }
        set!(xi => xi, rho => rho, epsilon => epsilon, alpha => alpha, nsl_size => nsl_capacity,
             cp => cp_seconds, cs => cs, omega => omega, lambda => lambda_target, kdof => k_dof,
             sfov_ladder => sfov_ladder, bw_unit => bw_unit);
        if self.no_dof {
            c.dof_enabled = false;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Metadata JSON file, or `synthetic[:seed]`.
    #[arg(long)]
    metadata: String,
    /// Bandwidth CSV, or `synthetic:mean=<mbps>[,sigma=<s>]`.
    #[arg(long)]
    bandwidth: String,
    /// Head CSV, or `synthetic:<static|sinusoid|random-walk>[,key=value...]`.
    #[arg(long)]
    head: String,
    #[arg(long, default_value = "etscaa")]
    algo: String,
    #[arg(long)]
    slots: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "scale-bandwidth-mean")]
    scale_bandwidth_mean: Option<f64>,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct GenMetadataArgs {
    #[arg(long, default_value_t = 60)]
    chunks: usize,
    #[arg(long, default_value_t = 6)]
    rows: usize,
    #[arg(long, default_value_t = 8)]
    cols: usize,
    #[arg(long, default_value_t = 5)]
    levels: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// `lo..hi` in 1 Mbps steps, or a comma-separated list.
    #[arg(long = "bandwidth-means", default_value = "3..11")]
    bandwidth_means: String,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "etscaa,greedy,uniform,probdash"
    )]
    algos: Vec<String>,
    /// Number of seeds, starting at `--base-seed`.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long = "base-seed", default_value_t = 1)]
    base_seed: u64,
    #[arg(long, default_value_t = 300)]
    slots: usize,
    /// Metadata JSON file; synthesised per seed when absent.
    #[arg(long)]
    metadata: Option<PathBuf>,
    /// Bandwidth CSV rescaled to each mean; synthesised per seed when absent.
    #[arg(long)]
    bandwidth: Option<PathBuf>,
    #[arg(long, default_value = "synthetic:random-walk")]
    head: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long = "dp-instances", default_value_t = 1000)]
    dp_instances: usize,
    #[arg(long = "bound-instances", default_value_t = 500)]
    bound_instances: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn invalid(msg: String) -> Error {
    Error::InvalidInput(msg)
}

/// Split `synthetic:a,k=v,...` into the leading word and key-value pairs.
fn synthetic_parts(spec: &str) -> Option<(String, Vec<(String, String)>)> {
    let rest = spec.strip_prefix("synthetic")?;
    let rest = rest.strip_prefix(':').unwrap_or(rest);
    let mut head = String::new();
    let mut pairs = Vec::new();
    for (i, part) in rest.split(',').filter(|p| !p.is_empty()).enumerate() {
        match part.split_once('=') {
            Some((k, v)) => pairs.push((k.trim().to_string(), v.trim().to_string())),
            None if i == 0 => head = part.trim().to_string(),
            None => return None,
        }
    }
    Some((head, pairs))
}

fn number(pairs: &[(String, String)], key: &str, default: Option<f64>) -> Result<f64> {
    match pairs.iter().find(|(k, _)| k == key) {
        Some((_, v)) => v
            .parse()
            .map_err(|_| invalid(format!("{key}={v} is not a number"))),
        None => default.ok_or_else(|| invalid(format!("missing {key}=..."))),
    }
}

fn check_keys(pairs: &[(String, String)], allowed: &[&str]) -> Result<()> {
    match pairs.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        Some((k, _)) => Err(invalid(format!(
            "unknown key {k:?}; expected one of {allowed:?}"
        ))),
        None => Ok(()),
    }
}

fn load_bandwidth(spec: &str, len: usize, scale: Option<f64>, seed: u64) -> Result<BandwidthTrace> {
    match synthetic_parts(spec) {
        Some((_, pairs)) => {
            check_keys(&pairs, &["mean", "sigma"])?;
            let mean = number(&pairs, "mean", Some(6.0))?;
            let sigma = number(&pairs, "sigma", Some(DEFAULT_BANDWIDTH_SIGMA))?;
            let trace = synthesize_bandwidth(mean, len, sigma, seed)?;
            match scale {
                Some(m) => trace.scaled_to_mean(m),
                None => Ok(trace),
            }
        }
        None => load_bandwidth_trace(spec, scale),
    }
}

fn head_params(spec: &str) -> Result<Option<HeadParams>> {
    let Some((model, pairs)) = synthetic_parts(spec) else {
        return Ok(None);
    };
    let defaults = HeadParams::default();
    let model = match model.as_str() {
        "static" => {
            check_keys(&pairs, &["max-speed"])?;
            HeadModel::Static
        }
        "sinusoid" => {
            check_keys(&pairs, &["amplitude", "period", "max-speed"])?;
            HeadModel::Sinusoid {
                amplitude_deg: number(&pairs, "amplitude", Some(30.0))?,
                period_s: number(&pairs, "period", Some(20.0))?,
            }
        }
        "random-walk" | "" => {
            check_keys(&pairs, &["sigma", "max-speed"])?;
            HeadModel::RandomWalk {
                sigma_deg_s: number(&pairs, "sigma", Some(15.0))?,
            }
        }
        other => return Err(invalid(format!("unknown head model {other:?}"))),
    };
    Ok(Some(HeadParams {
        model,
        max_speed: number(&pairs, "max-speed", Some(defaults.max_speed))?,
        start: defaults.start,
    }))
}

fn load_head(spec: &str, len: usize, seed: u64) -> Result<HeadTrace> {
    match head_params(spec)? {
        Some(p) => synthesize_head_trace(&p, seed, len),
        None => load_head_trace(spec),
    }
}

fn load_meta(spec: &str) -> Result<VideoMeta> {
    match spec.strip_prefix("synthetic") {
        Some(rest) => {
            let seed = match rest.strip_prefix(':') {
                Some(s) => s
                    .parse()
                    .map_err(|_| invalid(format!("bad metadata seed {s:?}")))?,
                None if rest.is_empty() => MetadataSpec::default().seed,
                None => return Err(invalid(format!("bad metadata source {spec:?}"))),
            };
            synthesize_metadata(&MetadataSpec {
                seed,
                ..Default::default()
            })
        }
        None => load_metadata(spec),
    }
}

fn parse_means(text: &str) -> Result<Vec<f64>> {
    let bad = || invalid(format!("bad bandwidth means {text:?}"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u32 = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).map(f64::from).collect());
    }
    let means = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<Vec<_>>>()?;
    if means.iter().any(|m| m.is_nan() || *m <= 0.0) {
        return Err(bad());
    }
    Ok(means)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let config = args.config.build()?;
    let algo: Algorithm = args.algo.parse()?;
    let meta = load_meta(&args.metadata)?;
    let bandwidth = load_bandwidth(
        &args.bandwidth,
        args.slots,
        args.scale_bandwidth_mean,
        args.seed,
    )?;
    let head = load_head(&args.head, args.slots, args.seed)?;
    let mut report = run_simulation(
        &meta, &bandwidth, &head, &config, algo, args.slots, args.seed,
    )?;
    report.inputs = Some(RunInputs {
        metadata: args.metadata,
        bandwidth: args.bandwidth,
        head: args.head,
        scale_bandwidth_mean: args.scale_bandwidth_mean,
    });
    write_run_outputs(&report, &args.out)?;
    let a = &report.aggregates;
    println!(
        "{}: {} slots, mean cost {:.4}, final Q^S {:.5}, mean SSIM {:.4}, stalls {}",
        report.label, a.slots, a.mean_total_cost, a.final_qs, a.mean_weighted_ssim, a.stalls
    );
    Ok(())
}

fn gen_metadata(args: GenMetadataArgs) -> Result<()> {
    let spec = MetadataSpec {
        chunks: args.chunks,
        rows: args.rows,
        cols: args.cols,
        levels: args.levels,
        seed: args.seed,
    };
    save_metadata(&synthesize_metadata(&spec)?, &args.out)?;
    info!("wrote {}", args.out.display());
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let config = args.config.build()?;
    let algorithms = args
        .algos
        .iter()
        .map(|a| a.parse())
        .collect::<Result<Vec<Algorithm>>>()?;
    let metadata = match &args.metadata {
        Some(path) => MetadataSource::Fixed(load_metadata(path)?),
        None => MetadataSource::Synthetic(MetadataSpec::default()),
    };
    let bandwidth = match &args.bandwidth {
        Some(path) => BandwidthSource::Trace(load_bandwidth_trace(path, None)?),
        None => BandwidthSource::Synthetic {
            sigma: DEFAULT_BANDWIDTH_SIGMA,
        },
    };
    let head = head_params(&args.head)?
        .ok_or_else(|| invalid("sweep needs a synthetic head model".to_string()))?;
    let spec = SweepSpec {
        algorithms,
        bandwidth_means: parse_means(&args.bandwidth_means)?,
        seeds: (args.base_seed..args.base_seed + args.seeds).collect(),
        slots: args.slots,
        config,
        metadata,
        bandwidth,
        head,
    };
    let rows = run_sweep(&spec)?;
    let cells = summarize_sweep(&rows);
    std::fs::create_dir_all(&args.out).map_err(|source| Error::Io {
        path: args.out.display().to_string(),
        source,
    })?;
    write_json(&rows, &args.out.join("runs.json"))?;
    write_json(&cells, &args.out.join("summary.json"))?;
    for c in &cells {
        println!(
            "{:<22} {:>5.1} Mbps  cost {:.4}  final Q^S {:.5}  SSIM {:.4}",
            c.algorithm.label(),
            c.bandwidth_mean,
            c.mean_total_cost,
            c.mean_final_qs,
            c.mean_weighted_ssim
        );
    }
    Ok(())
}

fn verify(args: VerifyArgs) -> Result<bool> {
    let dp = dp_agreement_suite(args.dp_instances, args.seed);
    let bound = competitive_suite(args.bound_instances, args.seed)?;
    for r in [&dp, &bound] {
        println!(
            "{} {}: {} instances, {} skipped, {} failures, worst {:.3e}",
            if r.passed() { "PASS" } else { "FAIL" },
            r.name,
            r.instances,
            r.skipped,
            r.failures,
            r.worst
        );
    }
    Ok(dp.passed() && bound.passed())
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a).map(|_| true),
        Command::GenMetadata(a) => gen_metadata(a).map(|_| true),
        Command::Sweep(a) => sweep(a).map(|_| true),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
