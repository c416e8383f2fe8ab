//! Command-line front end: transforms, heat evolution, kernel evaluation,
//! and the verification suite, emitting CSV and JSON artifacts.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid configuration or
//! parameters, 3 numerical failure (non-convergence or red suite rows).
//! Every failure prints a one-line diagnostic on stderr.

use clap::{Parser, Subcommand, ValueEnum};
use grushin::heat::{kernel_fourier, kernel_hankel, HeatKernelQuery, KernelPoint};
use grushin::io;
use grushin::spectral::functional_calculus;
use grushin::verify::run_verification;
use grushin::{GridFunction, GrushinConfig, GrushinError, SpectralSymbol, TransformPlan};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "grushin", version, about = "Grushin-operator transforms, heat flow, and kernels")]
struct Cli {
    /// Configuration JSON; desk-scale defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (transform, kernel) or directory (evolve, verify).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for the suite's named generator.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel quadratures (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply the forward or inverse transform to a stored array.
    Transform {
        #[arg(value_enum)]
        direction: Direction,
        /// Input data: .csv, or the .json header of a binary pair.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Evolve a stored function under a spectral multiplier.
    Evolve {
        /// Comma-separated times.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        t: Vec<f64>,
        #[arg(long = "in")]
        input: PathBuf,
        /// heat, identity, or projection:<cutoff>.
        #[arg(long, default_value = "heat")]
        symbol: String,
    },
    /// Evaluate the heat kernel at one query or along a coordinate slice.
    Kernel {
        #[arg(long, allow_hyphen_values = true)]
        t: f64,
        /// Comma-separated coordinates, x'-block then x''-block.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        y: Vec<f64>,
        #[arg(long, value_enum, default_value_t = Method::Fourier)]
        method: Method,
        /// axis=start:stop[:count] with axis one of
        /// {x,y}_{prime,doubleprime}_<i>; sweeps that coordinate.
        #[arg(long, allow_hyphen_values = true)]
        grid_slice: Option<String>,
    },
    /// Run the verification suite table and write its JSON report.
    Verify {
        /// Substring filter on row names or groups.
        #[arg(long)]
        only: Option<String>,
        /// Multiplies every pinned tolerance.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
    },
}

#[derive(ValueEnum, Clone, Copy)]
enum Direction {
    Forward,
    Inverse,
}

#[derive(ValueEnum, Clone, Copy)]
enum Method {
    Fourier,
    Hankel,
}

struct Failure {
    code: i32,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

impl From<GrushinError> for Failure {
    fn from(e: GrushinError) -> Self {
        let code = match &e {
            GrushinError::Io(_) | GrushinError::Serialization(_) => 1,
            GrushinError::ConfigValidation(_)
            | GrushinError::InvalidArgument(_)
            | GrushinError::ShapeMismatch { .. } => 2,
            GrushinError::NonFinite(_) | GrushinError::QuadratureNonConvergence { .. } => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(message: String) -> Failure {
    Failure { code: 1, message }
}

fn param_failure(message: String) -> Failure {
    Failure { code: 2, message }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e.message);
        std::process::exit(e.code);
    }
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(param_failure("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .ok();
    }
    let config = Arc::new(load_config(cli.config.as_deref())?);
    match cli.command {
        Command::Transform { direction, input } => {
            cmd_transform(&config, direction, &input, cli.out.as_deref())
        }
        Command::Evolve { t, input, symbol } => {
            cmd_evolve(&config, &t, &input, &symbol, cli.out.as_deref())
        }
        Command::Kernel {
            t,
            x,
            y,
            method,
            grid_slice,
        } => cmd_kernel(&config, t, &x, &y, method, grid_slice.as_deref(), cli.out.as_deref()),
        Command::Verify {
            only,
            tolerance_scale,
        } => cmd_verify(&config, cli.seed, only.as_deref(), tolerance_scale, cli.out.as_deref()),
    }
}

fn load_config(path: Option<&Path>) -> CliResult<GrushinConfig> {
    match path {
        None => Ok(GrushinConfig::desk_default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| io_failure(format!("cannot read config {}: {e}", p.display())))?;
            GrushinConfig::from_json_str(&text)
                .map_err(|e| param_failure(format!("config {}: {e}", p.display())))
        }
    }
}

// Array files -----------------------------------------------------------

enum ArrayFormat {
    Csv,
    Binary,
}

fn array_format(path: &Path) -> CliResult<ArrayFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(ArrayFormat::Csv),
        Some("json") => Ok(ArrayFormat::Binary),
        _ => Err(param_failure(format!(
            "cannot infer the format of {} (use .csv, or .json for a binary pair)",
            path.display()
        ))),
    }
}

fn same_geometry(a: &GrushinConfig, b: &GrushinConfig) -> bool {
    a.d_prime == b.d_prime
        && a.d_doubleprime == b.d_doubleprime
        && a.hermite_cutoff == b.hermite_cutoff
        && a.x_prime_grid == b.x_prime_grid
        && a.x_doubleprime_grid == b.x_doubleprime_grid
}

fn check_embedded_config(active: &GrushinConfig, embedded: &GrushinConfig, path: &Path) -> CliResult<()> {
    if same_geometry(active, embedded) {
        Ok(())
    } else {
        Err(param_failure(format!(
            "{} was written under a different configuration; rerun without --config \
             or point --config at the matching geometry",
            path.display()
        )))
    }
}

fn open_input(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| io_failure(format!("cannot read {}: {e}", path.display())))
}

fn create_output(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| io_failure(format!("cannot write {}: {e}", path.display())))
}

fn read_grid(config: &Arc<GrushinConfig>, path: &Path) -> CliResult<GridFunction> {
    match array_format(path)? {
        ArrayFormat::Csv => Ok(io::read_grid_csv(config.clone(), open_input(path)?)?),
        ArrayFormat::Binary => {
            let f = io::read_grid_binary(path)?;
            check_embedded_config(config, f.config(), path)?;
            Ok(f)
        }
    }
}

fn read_dual(config: &Arc<GrushinConfig>, path: &Path) -> CliResult<grushin::DualCoefficients> {
    match array_format(path)? {
        ArrayFormat::Csv => Ok(io::read_dual_csv(config.clone(), open_input(path)?)?),
        ArrayFormat::Binary => {
            let d = io::read_dual_binary(path)?;
            check_embedded_config(config, d.config(), path)?;
            Ok(d)
        }
    }
}

fn write_grid(f: &GridFunction, path: &Path) -> CliResult<()> {
    match array_format(path)? {
        ArrayFormat::Csv => Ok(io::write_grid_csv(f, create_output(path)?)?),
        ArrayFormat::Binary => Ok(io::write_grid_binary(f, path)?),
    }
}

fn write_dual(d: &grushin::DualCoefficients, path: &Path) -> CliResult<()> {
    match array_format(path)? {
        ArrayFormat::Csv => Ok(io::write_dual_csv(d, create_output(path)?)?),
        ArrayFormat::Binary => Ok(io::write_dual_binary(d, path)?),
    }
}

/// `--out` names the file directly; a directory (or nothing) gets
/// `default_name` appended.
fn resolve_out_file(out: Option<&Path>, default_name: &str) -> PathBuf {
    match out {
        None => PathBuf::from(default_name),
        Some(p) if p.is_dir() => p.join(default_name),
        Some(p) => p.to_path_buf(),
    }
}

fn resolve_out_dir(out: Option<&Path>) -> CliResult<PathBuf> {
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| io_failure(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("JSON render"));
}

// Subcommands -----------------------------------------------------------

fn cmd_transform(
    config: &Arc<GrushinConfig>,
    direction: Direction,
    input: &Path,
    out: Option<&Path>,
) -> CliResult<()> {
    let plan = TransformPlan::new(config.clone())?;
    let (input_norm, output_norm, out_path) = match direction {
        Direction::Forward => {
            let f = read_grid(config, input)?;
            let dual = plan.forward(&f)?;
            let out_path = resolve_out_file(out, "forward.csv");
            write_dual(&dual, &out_path)?;
            (f.l2_norm(), dual.dual_norm(), out_path)
        }
        Direction::Inverse => {
            let dual = read_dual(config, input)?;
            let f = plan.inverse(&dual)?;
            let out_path = resolve_out_file(out, "inverse.csv");
            write_grid(&f, &out_path)?;
            (dual.dual_norm(), f.l2_norm(), out_path)
        }
    };
    print_json(&serde_json::json!({
        "command": "transform",
        "direction": match direction {
            Direction::Forward => "forward",
            Direction::Inverse => "inverse",
        },
        "input": input.display().to_string(),
        "output": out_path.display().to_string(),
        "input_norm": input_norm,
        "output_norm": output_norm,
        "norm_ratio": output_norm / input_norm,
    }));
    Ok(())
}

enum SymbolSpec {
    Heat,
    Identity,
    Projection(f64),
}

fn parse_symbol(s: &str) -> CliResult<SymbolSpec> {
    match s {
        "heat" => Ok(SymbolSpec::Heat),
        "identity" => Ok(SymbolSpec::Identity),
        _ => match s.strip_prefix("projection:") {
            Some(rest) => rest
                .parse::<f64>()
                .map(SymbolSpec::Projection)
                .map_err(|_| param_failure(format!("bad projection cutoff {rest:?}"))),
            None => Err(param_failure(format!(
                "unknown symbol {s:?} (heat, identity, projection:<cutoff>)"
            ))),
        },
    }
}

fn cmd_evolve(
    config: &Arc<GrushinConfig>,
    times: &[f64],
    input: &Path,
    symbol: &str,
    out: Option<&Path>,
) -> CliResult<()> {
    let spec = parse_symbol(symbol)?;
    for &t in times {
        if !t.is_finite() || t < 0.0 {
            return Err(param_failure(format!(
                "evolution times must be finite and >= 0, got {t}"
            )));
        }
    }
    let dir = resolve_out_dir(out)?;
    let plan = TransformPlan::new(config.clone())?;
    let f = read_grid(config, input)?;
    let input_norm = f.l2_norm();
    let mut stages = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        let sym = match spec {
            SymbolSpec::Heat => SpectralSymbol::heat(t)?,
            SymbolSpec::Identity => SpectralSymbol::identity(),
            SymbolSpec::Projection(cutoff) => SpectralSymbol::projection(cutoff)?,
        };
        let evolved = functional_calculus(&plan, &f, &sym)?;
        let name = format!("evolved_{i}_t{t}.csv");
        write_grid(&evolved, &dir.join(&name))?;
        let norm = evolved.l2_norm();
        stages.push(serde_json::json!({
            "t": t,
            "file": name,
            "norm": norm,
            "contraction_ratio": norm / input_norm,
        }));
    }
    let report = serde_json::json!({
        "command": "evolve",
        "symbol": symbol,
        "input": input.display().to_string(),
        "input_norm": input_norm,
        "stages": stages,
    });
    let report_path = dir.join("report.json");
    let mut w = create_output(&report_path)?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report).expect("JSON render"))
        .map_err(|e| io_failure(format!("cannot write {}: {e}", report_path.display())))?;
    print_json(&report);
    Ok(())
}

struct SliceSpec {
    /// Column label, echoed in the CSV header.
    axis: String,
    on_x: bool,
    on_prime: bool,
    index: usize,
    start: f64,
    stop: f64,
    count: usize,
}

fn parse_slice(s: &str) -> CliResult<SliceSpec> {
    let bad = || param_failure(format!(
        "bad --grid-slice {s:?} (want axis=start:stop[:count], axis like y_doubleprime_0)"
    ));
    let (axis, range) = s.split_once('=').ok_or_else(bad)?;
    let mut parts = axis.splitn(3, '_');
    let point = parts.next().ok_or_else(bad)?;
    let block = parts.next().ok_or_else(bad)?;
    let index: usize = parts.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let on_x = match point {
        "x" => true,
        "y" => false,
        _ => return Err(bad()),
    };
    let on_prime = match block {
        "prime" => true,
        "doubleprime" => false,
        _ => return Err(bad()),
    };
    let pieces: Vec<&str> = range.split(':').collect();
    if pieces.len() < 2 || pieces.len() > 3 {
        return Err(bad());
    }
    let start: f64 = pieces[0].parse().map_err(|_| bad())?;
    let stop: f64 = pieces[1].parse().map_err(|_| bad())?;
    let count: usize = if pieces.len() == 3 {
        pieces[2].parse().map_err(|_| bad())?
    } else {
        101
    };
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    Ok(SliceSpec {
        axis: axis.to_string(),
        on_x,
        on_prime,
        index,
        start,
        stop,
        count,
    })
}

fn cmd_kernel(
    config: &Arc<GrushinConfig>,
    t: f64,
    x: &[f64],
    y: &[f64],
    method: Method,
    grid_slice: Option<&str>,
    out: Option<&Path>,
) -> CliResult<()> {
    let dp = config.d_prime;
    let dpp = config.d_doubleprime;
    if x.len() != dp + dpp || y.len() != dp + dpp {
        return Err(param_failure(format!(
            "points need {} coordinates (d' = {dp} then d'' = {dpp}), got {} and {}",
            dp + dpp,
            x.len(),
            y.len()
        )));
    }
    let split = |v: &[f64]| KernelPoint::new(v[..dp].to_vec(), v[dp..].to_vec());
    let base = HeatKernelQuery::new(t, split(x), split(y));
    base.validate()?;
    let eval = match method {
        Method::Fourier => kernel_fourier,
        Method::Hankel => kernel_hankel,
    };
    let sink: Box<dyn Write> = match out {
        Some(_) => Box::new(create_output(&resolve_out_file(out, "kernel.csv"))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    match grid_slice {
        None => {
            let mut header = vec!["t".to_string()];
            header.extend((0..dp).map(|a| format!("x_prime_{a}")));
            header.extend((0..dpp).map(|a| format!("x_doubleprime_{a}")));
            header.extend((0..dp).map(|a| format!("y_prime_{a}")));
            header.extend((0..dpp).map(|a| format!("y_doubleprime_{a}")));
            header.push("p_t".into());
            w.write_record(&header)
                .map_err(|e| io_failure(e.to_string()))?;
            let value = eval(&base)?;
            let mut row = vec![format!("{t}")];
            row.extend(x.iter().chain(y).map(|v| format!("{v}")));
            row.push(format!("{value}"));
            w.write_record(&row).map_err(|e| io_failure(e.to_string()))?;
        }
        Some(s) => {
            let spec = parse_slice(s)?;
            let block_dim = if spec.on_prime { dp } else { dpp };
            if spec.index >= block_dim {
                return Err(param_failure(format!(
                    "axis {} is out of range for d' = {dp}, d'' = {dpp}",
                    spec.axis
                )));
            }
            w.write_record([spec.axis.as_str(), "p_t"])
                .map_err(|e| io_failure(e.to_string()))?;
            for i in 0..spec.count {
                let c = if spec.count == 1 {
                    spec.start
                } else {
                    spec.start
                        + (spec.stop - spec.start) * i as f64 / (spec.count as f64 - 1.0)
                };
                let mut q = base.clone();
                let point = if spec.on_x { &mut q.x } else { &mut q.y };
                let block = if spec.on_prime {
                    &mut point.xp
                } else {
                    &mut point.xpp
                };
                block[spec.index] = c;
                q.validate()?;
                let value = eval(&q)?;
                w.write_record([format!("{c}"), format!("{value}")])
                    .map_err(|e| io_failure(e.to_string()))?;
            }
        }
    }
    w.flush().map_err(|e| io_failure(e.to_string()))?;
    Ok(())
}

fn cmd_verify(
    config: &Arc<GrushinConfig>,
    seed: u64,
    only: Option<&str>,
    tolerance_scale: f64,
    out: Option<&Path>,
) -> CliResult<()> {
    let report = run_verification(config, seed, only, tolerance_scale)?;
    print!("{}", report.render_text());
    let dir = resolve_out_dir(out)?;
    let path = dir.join("report.json");
    io::write_report_json(&report, create_output(&path)?)?;
    println!("report written to {}", path.display());
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure {
            code: 3,
            message: format!("{} verification rows failed", report.failed),
        })
    }
}
