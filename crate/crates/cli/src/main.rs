use std::fmt;
use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use guidefill::engine::{parse_mu, FillParams};
use guidefill::guide::SplineSet;
use guidefill::harness::{self, SyntheticProblem};
use guidefill::io;
use guidefill::limits::{self, BallKind};
use guidefill::pipeline::{resolve_splines, PipelineError, PipelineParams};
use guidefill_service::{fill_to_png, AppState};

#[derive(Parser)]
#[command(name = "guidefill", version, about = "Guided transport inpainting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fill the inpaint pixels of a mask and write the image plus a JSON report.
    Inpaint(InpaintArgs),
    #[command(subcommand)]
    Splines(SplinesCommand),
    #[command(subcommand)]
    Limits(LimitsCommand),
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Transition widths of a thin line filled at several resolutions.
    Degrade(DegradeArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ParamArgs {
    /// `key=value` overrides, e.g. `mu=50 r=3 order=smart eta=3`.
    #[arg(long = "params", num_args = 1.., value_name = "KEY=VALUE")]
    params: Vec<String>,
}

impl ParamArgs {
    fn pipeline(&self) -> Result<PipelineParams, Failure> {
        let mut p = PipelineParams::default();
        p.apply(self.params.iter().map(String::as_str)).map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(p)
    }

    fn fill(&self) -> Result<FillParams, Failure> {
        let mut p = FillParams::default();
        for pair in &self.params {
            let (k, v) = pair.split_once('=').ok_or_else(|| Failure::Usage(format!("expected key=value, got {pair:?}")))?;
            p.set(k.trim(), v.trim()).map_err(|e| Failure::Usage(e.to_string()))?;
        }
        Ok(p)
    }
}

#[derive(Args)]
struct InpaintArgs {
    #[arg(long)]
    image: PathBuf,
    /// PGM or PNG: 0 readable, 128 bystander, 255 inpaint.
    #[arg(long)]
    mask: PathBuf,
    /// Spline document; splines are detected when omitted.
    #[arg(long)]
    splines: Option<PathBuf>,
    #[arg(short, long, default_value = "inpainted.png")]
    output: PathBuf,
    /// Defaults to the output path with a `.report.json` extension.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Subcommand)]
enum SplinesCommand {
    /// Detect splines where edges meet the inpainting domain.
    Detect {
        #[arg(long)]
        image: PathBuf,
        #[arg(long)]
        mask: PathBuf,
        /// Writes to stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Subcommand)]
enum LimitsCommand {
    /// Limiting transport angle against guidance angle, as CSV.
    Curve {
        /// `axis` or `rotated`.
        #[arg(long, default_value = "rotated")]
        kind: BallKind,
        #[arg(long, default_value_t = 3)]
        r: u32,
        /// A number or `inf`.
        #[arg(long, default_value = "50")]
        mu: String,
        #[arg(long, default_value_t = 1800)]
        samples: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum BenchCommand {
    /// Lane-count and wall-time scaling on the stripe family.
    Scale {
        /// Maintain a frontier list (default).
        #[arg(long, conflicts_with = "untracked")]
        tracked: bool,
        /// Rescan the whole lattice every iteration.
        #[arg(long)]
        untracked: bool,
        #[arg(long, value_delimiter = ',', default_value = "70,100,150,220,330,480,690")]
        heights: Vec<usize>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
}

#[derive(Args)]
struct DegradeArgs {
    /// `WIDTHxHEIGHT` list.
    #[arg(long, value_delimiter = ',', default_value = "200x100,400x200,4000x2000")]
    resolutions: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.3,0.25,0")]
    sections: Vec<f64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[command(flatten)]
    params: ParamArgs,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Overrides the data directory environment variable.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Mismatch(String),
    Unreadable(String),
    Unfillable { pixels: usize, report: PathBuf },
    Other(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) | Failure::Other(_) => 1,
            Failure::Mismatch(_) => 2,
            Failure::Unreadable(_) => 3,
            Failure::Unfillable { .. } => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) | Failure::Mismatch(m) | Failure::Unreadable(m) | Failure::Other(m) => f.write_str(m),
            Failure::Unfillable { pixels, report } => {
                write!(f, "{pixels} pixels could not be reached and were filled from their nearest neighbor; see {}", report.display())
            }
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        if e.is_dimension_mismatch() {
            Failure::Mismatch(e.to_string())
        } else {
            Failure::Other(e.to_string())
        }
    }
}

fn other(e: impl fmt::Display) -> Failure {
    Failure::Other(e.to_string())
}

fn unreadable(what: &str, path: &Path, e: impl fmt::Display) -> Failure {
    Failure::Unreadable(format!("cannot use {what} {}: {e}", path.display()))
}

fn load_inputs(image: &Path, mask: &Path) -> Result<(guidefill::ImageBuffer, guidefill::LabelMask), Failure> {
    let img = io::load_png(image).map_err(|e| unreadable("image", image, e))?;
    let m = io::load_mask(mask).map_err(|e| unreadable("mask", mask, e))?;
    if let Err(e) = m.check_matches(&img) {
        return Err(Failure::Mismatch(e.to_string()));
    }
    Ok((img, m))
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), Failure> {
    match output {
        Some(p) => fs::write(p, bytes).map_err(|e| other(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout().write_all(bytes).map_err(other),
    }
}

fn inpaint(args: &InpaintArgs) -> Result<(), Failure> {
    let params = args.params.pipeline()?;
    let (image, mask) = load_inputs(&args.image, &args.mask)?;
    let splines = match &args.splines {
        Some(p) => {
            let bytes = fs::read(p).map_err(|e| unreadable("spline file", p, e))?;
            Some(SplineSet::from_json(&bytes).map_err(|e| unreadable("spline file", p, e))?)
        }
        None => None,
    };
    let art = fill_to_png(&image, &mask, splines.as_ref(), &params)?;
    fs::write(&args.output, &art.png).map_err(|e| other(format!("cannot write {}: {e}", args.output.display())))?;
    let report_path = args.report.clone().unwrap_or_else(|| args.output.with_extension("report.json"));
    let report = serde_json::json!({ "sha256": art.sha256, "splines": art.splines, "report": art.report });
    emit(Some(&report_path), serde_json::to_string_pretty(&report).map_err(other)?.as_bytes())?;
    if art.report.unfillable() {
        return Err(Failure::Unfillable { pixels: art.report.unfillable_pixels, report: report_path });
    }
    eprintln!(
        "filled {} pixels in {} iterations ({:.1} ms), sha256 {}",
        art.report.filled_pixels, art.report.total_iterations, art.report.wall_time_ms, art.sha256
    );
    Ok(())
}

fn splines(cmd: &SplinesCommand) -> Result<(), Failure> {
    let SplinesCommand::Detect { image, mask, output, params } = cmd;
    let params = params.pipeline()?;
    let (img, m) = load_inputs(image, mask)?;
    let set = resolve_splines(&img, &m, None, &params)?;
    let mut text = set.to_json();
    text.push('\n');
    emit(output.as_deref(), text.as_bytes())
}

fn limits_cmd(cmd: &LimitsCommand) -> Result<(), Failure> {
    let LimitsCommand::Curve { kind, r, mu, samples, output } = cmd;
    let mu = parse_mu(mu).map_err(|e| Failure::Usage(e.to_string()))?;
    let curve = limits::theta_star_curve(*kind, *r, mu, *samples).map_err(|e| Failure::Usage(e.to_string()))?;
    let mut buf = Vec::new();
    limits::write_curve_csv(&curve, &mut buf).map_err(other)?;
    emit(output.as_deref(), &buf)
}

fn bench(cmd: &BenchCommand) -> Result<(), Failure> {
    let BenchCommand::Scale { untracked, heights, out_dir, params, .. } = cmd;
    let tracked = !untracked;
    let fill = params.fill()?;
    if heights.len() < 2 {
        return Err(Failure::Usage("need at least two heights to fit an exponent".into()));
    }
    let problems: Vec<SyntheticProblem> = heights.iter().map(|&h| SyntheticProblem::scaling_stripe(h)).collect();
    let rows = harness::scaling_study(&problems, &fill, tracked).map_err(other)?;
    let csv = harness::save_study(out_dir, "scaling", &rows).map_err(other)?;
    let script = csv.with_extension("gp");
    fs::write(&script, harness::loglog_script(&csv, 1, 5, "max lanes requested")).map_err(other)?;
    let beta = harness::fit_power_law(&rows.iter().map(|r| (r.n as f64, r.threads_max as f64)).collect::<Vec<_>>()).map_err(other)?;
    let alpha = harness::fit_power_law(&rows.iter().map(|r| (r.n as f64, r.wall_ms.max(1e-3))).collect::<Vec<_>>()).map_err(other)?;
    let report = serde_json::json!({
        "tracked": tracked,
        "csv": csv,
        "gnuplot": script,
        "threads_fit": { "beta": beta.alpha, "a": beta.a, "residual": beta.residual },
        "wall_fit": { "alpha": alpha.alpha, "a": alpha.a, "residual": alpha.residual },
        "rows": rows,
    });
    println!("{}", serde_json::to_string_pretty(&report).map_err(other)?);
    Ok(())
}

fn parse_resolution(text: &str) -> Result<(usize, usize), Failure> {
    let bad = || Failure::Usage(format!("resolution must look like 200x100, got {text:?}"));
    let (w, h) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.parse().map_err(|_| bad())?, h.parse().map_err(|_| bad())?))
}

fn degrade(args: &DegradeArgs) -> Result<(), Failure> {
    let fill = args.params.fill()?;
    let resolutions = args.resolutions.iter().map(|r| parse_resolution(r)).collect::<Result<Vec<_>, _>>()?;
    let rows = harness::degradation_study(&resolutions, &args.sections, &fill).map_err(other)?;
    let csv = harness::save_study(&args.out_dir, "degradation", &rows).map_err(other)?;
    let report = serde_json::json!({ "csv": csv, "rows": rows });
    println!("{}", serde_json::to_string_pretty(&report).map_err(other)?);
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<(), Failure> {
    let state = match &args.data_dir {
        Some(dir) => AppState::new(dir),
        None => AppState::from_env(),
    };
    eprintln!("serving /api/v1 on http://{} (data in {})", args.addr, state.store().root().display());
    let runtime = tokio::runtime::Runtime::new().map_err(other)?;
    runtime.block_on(guidefill_service::serve(args.addr, state)).map_err(other)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Inpaint(a) => inpaint(a),
        Command::Splines(c) => splines(c),
        Command::Limits(c) => limits_cmd(c),
        Command::Bench(c) => bench(c),
        Command::Degrade(a) => degrade(a),
        Command::Serve(a) => serve(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("guidefill: {f}");
            ExitCode::from(f.code())
        }
    }
}
