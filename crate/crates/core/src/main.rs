use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irs_bss::extractor::{extract, ExtractorParams};
use irs_bss::harness::{aggregate_path, sweep, Settings};
use irs_bss::{Complex64, Error, Result};

#[derive(Parser)]
#[command(name = "irs-bss", version, about = "Blind channel estimation under malicious IRS reflection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo sweep writing per-stream rows and an aggregate file.
    Simulate(SimulateArgs),
    /// Recover the discrete alphabet of a noisy complex sequence.
    ExtractAlphabet(ExtractArgs),
}

#[derive(Parser)]
struct SimulateArgs {
    /// Flat `key = value` settings file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// fig3, fig4, fig5 or fig6.
    #[arg(long)]
    preset: Option<String>,
    /// `desk` (32 antennas) or `paper` (128 antennas).
    #[arg(long)]
    scale: Option<String>,
    #[arg(long)]
    antennas: Option<usize>,
    #[arg(long)]
    block_len: Option<usize>,
    /// SNR grid in dB: `start:step:stop` or a comma list.
    #[arg(long)]
    snr: Option<String>,
    /// Correlation grid: `start:step:stop` or a comma list.
    #[arg(long)]
    rho: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Comma list of proposed, bca, perfect, evd, evd-<path loss>.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run on the calling thread only.
    #[arg(long)]
    sequential: bool,
}

#[derive(Parser)]
struct ExtractArgs {
    /// Two-column CSV (real, imag); a non-numeric first line is skipped.
    input: PathBuf,
    /// Per-axis noise standard deviation.
    #[arg(long)]
    sigma_q: f64,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    #[arg(long, default_value_t = 128)]
    nf: usize,
    /// Peak threshold relative to the strongest peak.
    #[arg(long, default_value_t = 0.1)]
    threshold: f64,
    /// Output CSV (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut settings = match &args.config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let pairs = [
        ("preset", args.preset.clone()),
        ("scale", args.scale.clone()),
        ("antennas", args.antennas.map(|v| v.to_string())),
        ("block_len", args.block_len.map(|v| v.to_string())),
        ("snr", args.snr.clone()),
        ("rho", args.rho.clone()),
        ("trials", args.trials.map(|v| v.to_string())),
        ("methods", args.methods.clone()),
        ("seed", args.seed.map(|v| v.to_string())),
        ("out", args.out.as_ref().map(|p| p.display().to_string())),
        ("sequential", args.sequential.then(|| "true".to_string())),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            settings.set(k, &v)?;
        }
    }
    let mut spec = settings.to_spec()?;
    if spec.out.is_none() {
        spec.out = Some(PathBuf::from("results.csv"));
    }
    let out = sweep(&spec)?;
    let path = spec.out.as_ref().expect("set above");
    eprintln!(
        "wrote {} rows to {} and {} aggregates to {}",
        out.rows.len(),
        path.display(),
        out.aggregates.len(),
        aggregate_path(path).display()
    );
    Ok(())
}

fn read_sequence(path: &PathBuf) -> Result<Vec<Complex64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec?;
        let parse = |k: usize| rec.get(k).and_then(|v| v.parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(re), Some(im)) => out.push(Complex64::new(re, im)),
            _ if i == 0 => continue,
            _ => return Err(Error::Io(format!("line {}: expected two numbers", i + 1))),
        }
    }
    Ok(out)
}

fn extract_alphabet(args: ExtractArgs) -> Result<()> {
    if !(args.sigma_q >= 0.0) || !(args.threshold > 0.0 && args.threshold <= 1.0) || args.bins < 2 {
        return Err(Error::Config("need sigma-q >= 0, 0 < threshold <= 1, bins >= 2".into()));
    }
    let seq = read_sequence(&args.input)?;
    let mut params = ExtractorParams {
        bins: args.bins,
        nf: args.nf,
        ..ExtractorParams::default()
    };
    params.peaks.theta = args.threshold;
    let ex = extract(&seq, args.sigma_q, &params)?;
    let sink: Box<dyn std::io::Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["real", "imag", "weight"])?;
    for (p, wt) in ex.alphabet.points.iter().zip(&ex.alphabet.weights) {
        w.write_record([p.re.to_string(), p.im.to_string(), wt.to_string()])?;
    }
    w.flush()?;
    if ex.dropped_fraction > 0.0 {
        eprintln!("dropped fraction {}", ex.dropped_fraction);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::ExtractAlphabet(a) => extract_alphabet(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
