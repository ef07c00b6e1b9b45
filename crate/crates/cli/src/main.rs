use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};

use dstm_core::codebook::pair_stats;
use dstm_core::constellation::{optimize_sphere, OptimizerConfig};
use dstm_core::montecarlo::{run_with_manifest, write_csv, SimConfig};
use dstm_core::scheme::{Scheme, SchemeSpec, ThetaSpec};
use dstm_core::tables::{evaluate_row, table2, table3, RowResult};
use dstm_core::verify::{equivalence_check, noiseless_check, shipped_codebooks, theorem1_battery, unitarity_check};
use dstm_core::{DecoderChoice, DstmError, Real};

#[derive(Parser)]
#[command(name = "dstm", version, about = "Differential space-time modulation with joint constellations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Coding gain, diversity and decoder layout of one scheme
    Gain(GainArgs),
    /// Optimize a spherical code and write its coordinate file
    DesignSphere(DesignArgs),
    /// Run the rotation sweep and the codebook self-checks
    Verify(VerifyArgs),
    /// Block-error-rate simulation, written as CSV plus a JSON manifest
    Simulate(SimulateArgs),
    /// Recompute the coding-gain comparison tables
    Tables(TablesArgs),
    /// Dump every codeword of a scheme as JSON
    Export(ExportArgs),
}

#[derive(Args, Clone, Default)]
struct SchemeArgs {
    /// o4, qo4, o4-psk, o4-half-psk, o8, qo8 or o8-psk
    #[arg(long)]
    scheme: Option<String>,
    /// Pairwise-set size for the quasi-orthogonal schemes
    #[arg(long)]
    m: Option<usize>,
    /// Rotation in radians, or `theorem1`
    #[arg(long)]
    theta: Option<ThetaSpec>,
    /// `builtin:<d>x<n>` or a coordinate file
    #[arg(long)]
    sphere: Option<String>,
    /// PSK order for the symbol-by-symbol schemes
    #[arg(long)]
    psk: Option<usize>,
}

impl SchemeArgs {
    fn is_empty(&self) -> bool {
        self.scheme.is_none() && self.m.is_none() && self.theta.is_none() && self.sphere.is_none() && self.psk.is_none()
    }

    fn apply(&self, spec: &mut SchemeSpec) {
        if let Some(s) = &self.scheme {
            spec.scheme = s.clone();
        }
        if self.m.is_some() {
            spec.m = self.m;
        }
        if self.theta.is_some() {
            spec.theta = self.theta.clone();
        }
        if self.sphere.is_some() {
            spec.sphere = self.sphere.clone();
        }
        if self.psk.is_some() {
            spec.psk = self.psk;
        }
    }

    fn to_spec(&self) -> Result<SchemeSpec, Failure> {
        if self.scheme.is_none() {
            return Err(Failure::Usage("--scheme is required".into()));
        }
        let mut spec = SchemeSpec::default();
        self.apply(&mut spec);
        Ok(spec)
    }
}

#[derive(Args)]
struct GainArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Print the report as JSON
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct DesignArgs {
    #[arg(short = 'd', long = "dim")]
    dim: usize,
    #[arg(short = 'n', long = "points")]
    points: usize,
    #[arg(long, env = "DSTM_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    iterations: usize,
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Coordinate file to write
    #[arg(short = 'o', long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Grid points per π/M in the rotation sweep
    #[arg(long, default_value_t = 64)]
    divisions: usize,
    /// Noisy instances per codebook in the decoder equivalence battery
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Channels per codebook in the noiseless battery
    #[arg(long, default_value_t = 50)]
    channels: usize,
    #[arg(long, env = "DSTM_SEED", default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON file holding one configuration or `{"runs": [...]}`
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    scheme: SchemeArgs,
    /// Comma-separated SNR points in dB
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    snr: Option<Vec<f64>>,
    #[arg(long)]
    n_rx: Option<usize>,
    #[arg(long)]
    max_blocks: Option<u64>,
    #[arg(long)]
    max_errors: Option<u64>,
    #[arg(long)]
    frame_len: Option<usize>,
    /// Master seed; falls back to the config file, then DSTM_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// groupwise or full-ml
    #[arg(long, value_parser = parse_decoder)]
    decoder: Option<DecoderChoice>,
    /// Cap on worker threads
    #[arg(long)]
    workers: Option<usize>,
    /// Directory for `<scheme>.csv` and `<scheme>.manifest.json`
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct TablesArgs {
    /// Only this table (2 or 3)
    #[arg(long)]
    table: Option<u8>,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    scheme: SchemeArgs,
    #[arg(short = 'o', long)]
    output: PathBuf,
}

fn parse_decoder(s: &str) -> Result<DecoderChoice, String> {
    match s {
        "groupwise" => Ok(DecoderChoice::Groupwise),
        "full-ml" => Ok(DecoderChoice::FullMl),
        _ => Err(format!("unknown decoder `{s}` (groupwise or full-ml)")),
    }
}

enum Failure {
    /// Bad input or configuration: exit 2.
    Usage(String),
    /// A check ran and did not pass: exit 1.
    Check(String),
}

impl From<DstmError> for Failure {
    fn from(e: DstmError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Gain(a) => cmd_gain(a),
        Command::DesignSphere(a) => cmd_design_sphere(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Tables(a) => cmd_tables(a),
        Command::Export(a) => cmd_export(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("FAIL: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn cmd_gain(args: GainArgs) -> Result<(), Failure> {
    let scheme = Scheme::from_spec(&args.scheme.to_spec()?)?;
    let start = Instant::now();
    let cb = scheme.build::<f64>()?;
    let stats = pair_stats(&cb, f64::RANK_TOL)?;
    let fast = scheme.fast_coding_gain()?;
    let elapsed = start.elapsed().as_secs_f64();
    if args.json {
        let report = json!({
            "scheme": scheme.label(),
            "n_tx": scheme.n_tx(),
            "coding_gain": stats.coding_gain,
            "fast_coding_gain": fast,
            "min_det": stats.min_det,
            "diversity": stats.diversity,
            "codebook_size": cb.len(),
            "spectral_efficiency": scheme.spectral_efficiency(),
            "decoders": scheme.decoder_count(),
            "search_space": scheme.search_space(),
            "runtime_s": elapsed,
        });
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        return Ok(());
    }
    println!("scheme               {}", scheme.label());
    println!("transmit antennas    {}", scheme.n_tx());
    println!("coding gain          {:.4}", stats.coding_gain);
    println!("coding gain (fast)   {fast:.4}");
    println!("diversity rank       {}", stats.diversity);
    println!("codebook size        {}", cb.len());
    println!("spectral efficiency  {} bps/Hz", scheme.spectral_efficiency());
    println!("parallel decoders    {}", scheme.decoder_count());
    println!("search space         {}", scheme.search_space());
    println!("runtime              {elapsed:.2} s");
    Ok(())
}

fn cmd_design_sphere(args: DesignArgs) -> Result<(), Failure> {
    let cfg = OptimizerConfig {
        seed: args.seed,
        iterations: args.iterations,
        restarts: args.restarts,
    };
    let code = optimize_sphere(args.dim, args.points, &cfg)?;
    if let Some(path) = &args.output {
        std::fs::write(path, code.to_text()).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    }
    println!("min angle {:.4} deg (d={}, n={}, seed={})", code.min_angle(), args.dim, args.points, args.seed);
    Ok(())
}

fn mark(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let mut failures = Vec::new();

    println!("rotation sweep (grid π/({}M))", args.divisions);
    for c in theorem1_battery(2..=12, args.divisions)? {
        let expected: Vec<String> = c.expected.iter().map(|e| format!("{e:.6}")).collect();
        println!(
            "  {} M={:<2} argmax θ={:.6} expected {{{}}} step {:.2e}",
            mark(c.pass),
            c.m,
            c.best_theta,
            expected.join(", "),
            c.grid_step
        );
        if !c.pass {
            failures.push(format!("rotation sweep M={}", c.m));
        }
    }

    let books = shipped_codebooks()?;
    println!("unitarity");
    for (s, cb) in &books {
        let c = unitarity_check(&s.label(), cb)?;
        println!("  {} {:<18} {} codewords, max defect {:.2e}", mark(c.pass), c.label, c.codebook_size, c.max_defect);
        if !c.pass {
            failures.push(format!("unitarity {}", c.label));
        }
    }

    println!("groupwise vs full-ML decoding ({} trials each)", args.trials);
    for (s, cb) in &books {
        let c = equivalence_check(&s.label(), cb, args.trials, args.seed)?;
        println!(
            "  {} {:<18} mismatches {} candidates {} (Σ L_g = {}, N = {})",
            mark(c.pass),
            c.label,
            c.mismatches,
            c.evaluated,
            c.expected_evaluated,
            c.codebook_size
        );
        if !c.pass {
            failures.push(format!("decoder equivalence {}", c.label));
        }
    }

    println!("noiseless round trip ({} channels each)", args.channels);
    for (s, cb) in &books {
        let c = noiseless_check(&s.label(), cb, args.channels, args.seed)?;
        println!("  {} {:<18} {} blocks, {} errors", mark(c.pass), c.label, c.blocks, c.errors);
        if !c.pass {
            failures.push(format!("noiseless {}", c.label));
        }
    }

    if failures.is_empty() {
        println!("all checks passed");
        Ok(())
    } else {
        Err(Failure::Check(failures.join("; ")))
    }
}

#[derive(Deserialize)]
struct Recipe {
    runs: Vec<Value>,
}

/// Reads a config file into one JSON object per run.
fn read_config(path: &Path) -> Result<Vec<Value>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    if value.get("runs").is_some() {
        let recipe: Recipe =
            serde_json::from_value(value).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
        Ok(recipe.runs)
    } else {
        Ok(vec![value])
    }
}

fn env_seed() -> Result<Option<u64>, Failure> {
    match std::env::var("DSTM_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::Usage(format!("DSTM_SEED=`{s}` is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

/// Layers flags over file values over defaults.
fn resolve_runs(args: &SimulateArgs) -> Result<Vec<SimConfig>, Failure> {
    let files = match &args.config {
        Some(p) => read_config(p)?,
        None => vec![json!({})],
    };
    if files.len() > 1 && !args.scheme.is_empty() {
        return Err(Failure::Usage("scheme flags cannot override a multi-run recipe".into()));
    }
    let fallback_seed = env_seed()?.unwrap_or(0);
    let mut runs = Vec::with_capacity(files.len());
    for mut v in files {
        let obj = v
            .as_object_mut()
            .ok_or_else(|| Failure::Usage("each run must be a JSON object".into()))?;
        if !obj.contains_key("scheme") {
            obj.insert("scheme".into(), json!(""));
        }
        if !obj.contains_key("snr_db") {
            obj.insert("snr_db".into(), json!([]));
        }
        if !obj.contains_key("seed") {
            obj.insert("seed".into(), json!(fallback_seed));
        }
        let mut cfg: SimConfig =
            serde_json::from_value(v).map_err(|e| Failure::Usage(format!("invalid configuration: {e}")))?;
        args.scheme.apply(&mut cfg.scheme);
        if cfg.scheme.scheme.is_empty() {
            return Err(Failure::Usage("no scheme given (--scheme or config file)".into()));
        }
        if let Some(snr) = &args.snr {
            cfg.snr_db = snr.clone();
        }
        if let Some(n) = args.n_rx {
            cfg.n_rx = n;
        }
        if let Some(n) = args.max_blocks {
            cfg.max_blocks = n;
        }
        if let Some(n) = args.max_errors {
            cfg.max_errors = n;
        }
        if let Some(n) = args.frame_len {
            cfg.frame_len = n;
        }
        if let Some(s) = args.seed {
            cfg.seed = s;
        }
        if let Some(d) = args.decoder {
            cfg.decoder = d;
        }
        if args.workers.is_some() {
            cfg.workers = args.workers;
        }
        cfg.validate()?;
        runs.push(cfg);
    }
    Ok(runs)
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let runs = resolve_runs(&args)?;
    let mut labels: Vec<(String, usize)> = Vec::new();
    for cfg in &runs {
        let scheme = cfg.validate()?;
        let label = scheme.label();
        if labels.iter().any(|(l, _)| *l == label) {
            return Err(Failure::Usage(format!("two runs share the output name `{label}`")));
        }
        labels.push((label, scheme.n_tx()));
    }
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| Failure::Usage(format!("{}: {e}", args.out_dir.display())))?;
    for (cfg, (label, n_tx)) in runs.iter().zip(&labels) {
        let manifest = run_with_manifest(cfg)?;
        let csv_path = args.out_dir.join(format!("{label}.csv"));
        let mut buf = Vec::new();
        write_csv(&mut buf, label, *n_tx, cfg.n_rx, &manifest.points)?;
        std::fs::write(&csv_path, buf).map_err(|e| Failure::Usage(format!("{}: {e}", csv_path.display())))?;
        let manifest_path = args.out_dir.join(format!("{label}.manifest.json"));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&manifest_path, text + "\n")
            .map_err(|e| Failure::Usage(format!("{}: {e}", manifest_path.display())))?;
        println!("{label}: {} points in {:.1} s -> {}", manifest.points.len(), manifest.wall_clock_s, csv_path.display());
        for p in &manifest.points {
            println!(
                "  {:>6.2} dB  bler {:.3e} ± {:.1e}  ({} errors / {} blocks)",
                p.snr_db, p.bler, p.ci95, p.errors, p.blocks
            );
        }
    }
    Ok(())
}

fn print_row(r: &RowResult) {
    let row = &r.row;
    let head = format!("Table {} | {:.1} bps/Hz | {} | {}", row.table, row.efficiency, row.scheme, row.constellation);
    match (r.coding_gain, r.pass) {
        (Some(gain), Some(pass)) => println!(
            "{} {head} | gain {gain:.4} (fast {:.4}) published {:.2} | decoders {} search {} | {:.2} s | {}",
            mark(pass),
            r.fast_gain.unwrap_or(f64::NAN),
            row.published_gain,
            r.decoders.unwrap_or(0),
            r.search_space.unwrap_or(0),
            r.runtime_s,
            r.note
        ),
        _ => println!(
            "---- {head} | published {:.2} | decoders {} search {} | {}",
            row.published_gain, row.published_decoders, row.published_search_space, r.note
        ),
    }
}

fn cmd_tables(args: TablesArgs) -> Result<(), Failure> {
    let rows = match args.table {
        None => table2().into_iter().chain(table3()).collect::<Vec<_>>(),
        Some(2) => table2(),
        Some(3) => table3(),
        Some(t) => return Err(Failure::Usage(format!("unknown table {t} (2 or 3)"))),
    };
    let mut failed = Vec::new();
    for row in &rows {
        let r = evaluate_row(row)?;
        print_row(&r);
        if r.pass == Some(false) {
            failed.push(format!("table {} {} / {}", row.table, row.scheme, row.constellation));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Check(failed.join("; ")))
    }
}

fn cmd_export(args: ExportArgs) -> Result<(), Failure> {
    let scheme = Scheme::from_spec(&args.scheme.to_spec()?)?;
    let cb = scheme.build::<f64>()?;
    let text = serde_json::to_string(&cb.export()).expect("export serializes");
    std::fs::write(&args.output, text).map_err(|e| Failure::Usage(format!("{}: {e}", args.output.display())))?;
    println!("{}: {} codewords -> {}", scheme.label(), cb.len(), args.output.display());
    Ok(())
}
