mod grid;
mod output;

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_traits::Zero;
use rayon::prelude::*;
use serde_json::Value;

use sle_spectrum::coeffs::{
    build_theta_table, eval_rho, fit_beta, integral_means_with, max_nonzero_offset, read_table, write_table,
    CoeffTable,
};
use sle_spectrum::eigen::{analyze_exact, coef_a};
use sle_spectrum::mc::{estimate_from_samples, simulate_paths, write_samples, MCConfig, MAX_STEP};
use sle_spectrum::special::deterministic_map_derivative;
use sle_spectrum::spectrum::{
    beta_spectrum, beta_tilde_on_curve, curve_point, gamma_roots, q_of_gamma, q_transition, Branch, CurveParams,
    SleParams,
};
use sle_spectrum::{parse_number, BigRational, Complex64, Error, Number, Scalar};

use grid::{float_grid, parse_grid};
use output::{document, row_object, write_csv, write_json, Cell, Format, Report, Row};

#[derive(Parser, Debug)]
#[command(name = "slespec", version, about = "Integral-means spectrum of interior whole-plane SLE")]
struct Cli {
    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Output format; tables default to csv, reports to json.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Coefficient table order N.
    #[arg(long, global = true)]
    order: Option<usize>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// β(q, κ) on a grid: rows q,kappa,gamma_minus,branch,beta.
    Spectrum {
        /// q grid: `a:b:n`, a list, or one value.
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long, allow_hyphen_values = true)]
        kappa: String,
    },
    /// Truncation-curve points for M = 0..=m-max and the Q(κ) locus.
    Curves {
        #[arg(long, default_value_t = 3)]
        m_max: u32,
        #[arg(long, default_value = "-1:3:81", allow_hyphen_values = true)]
        gamma: String,
        #[arg(long, default_value = "0:8:81")]
        locus_kappa: String,
        /// Also solve the boundary eigenproblem at every point and check
        /// the selected exponent.
        #[arg(long)]
        eigen: bool,
    },
    /// Exact band-truncation certificate for one curve point.
    Truncate {
        #[arg(long)]
        m: u32,
        /// Curve parameter, preferably as a fraction `p/q`.
        #[arg(long, allow_hyphen_values = true)]
        gamma: String,
        /// Override κ (negative control: the table is then off the curve).
        #[arg(long)]
        kappa: Option<String>,
        /// Also export the coefficient table.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Integral-means slope fit against the closed-form β.
    Betafit {
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long)]
        kappa: String,
        /// Radii grid; defaults to r = 1 − 2^−k, k = 3..=7.
        #[arg(long)]
        r: Option<String>,
        #[arg(long, default_value_t = 1024)]
        n_phi: usize,
        /// Relative series-tail tolerance at each radius.
        #[arg(long, default_value_t = 1e-2)]
        tail_tol: f64,
        /// Fail (exit 2) if the relative deviation from β exceeds this.
        #[arg(long)]
        tol: Option<f64>,
        /// Read the coefficient table from a file instead of building it.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Monte Carlo estimate of ρ(w, w̄) against the series oracle.
    Mc {
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[arg(long)]
        kappa: String,
        #[arg(long, allow_hyphen_values = true)]
        w: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        w_im: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        /// Horizon T (default max(ln(10/(1−|w|)), 16)).
        #[arg(long)]
        t_max: Option<f64>,
        /// Number of driving steps (default ⌈T/0.01⌉).
        #[arg(long)]
        steps: Option<usize>,
        /// Largest accepted |z-score| inside the validation envelope.
        #[arg(long, default_value_t = 3.0)]
        max_z: f64,
        /// Raw per-path dump: `index log_deriv_re log_deriv_im B_T`.
        #[arg(long)]
        dump: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Validation(String),
    Io(io::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Usage(_) | Failure::Io(_) => 1,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage: {m}"),
            Failure::Validation(m) => write!(f, "{m}"),
            Failure::Io(e) => write!(f, "i/o: {e}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e),
            Error::Parse(m) => Failure::Usage(m),
            other => Failure::Validation(other.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e)
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn number(text: &str) -> Outcome<Number> {
    parse_number(text).map_err(|e| Failure::Usage(e.to_string()))
}

fn grid(text: &str) -> Outcome<Vec<Number>> {
    parse_grid(text).map_err(Failure::Usage)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("slespec: {f}");
            ExitCode::from(f.code())
        }
    }
}

fn run(cli: Cli) -> Outcome {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(Failure::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    let table_fmt = cli.format.unwrap_or(Format::Csv);
    let report_fmt = cli.format.unwrap_or(Format::Json);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Spectrum { q, kappa } => run_spectrum(q, kappa, out, table_fmt),
        Command::Curves { m_max, gamma, locus_kappa, eigen } => {
            run_curves(*m_max, gamma, locus_kappa, *eigen, out, table_fmt)
        }
        Command::Truncate { m, gamma, kappa, table } => {
            let order = cli.order.unwrap_or(40);
            let report = run_truncate(*m, gamma, kappa.as_deref(), order, table.as_deref())?;
            finish(report, out, report_fmt)
        }
        Command::Betafit { q, kappa, r, n_phi, tail_tol, tol, table } => {
            let opts = FitOptions {
                order: cli.order.unwrap_or(400),
                radii: r.as_deref(),
                n_phi: *n_phi,
                tail_tol: *tail_tol,
                tol: *tol,
                table: table.as_deref(),
            };
            let report = run_betafit(q, kappa, &opts)?;
            finish(report, out, report_fmt)
        }
        Command::Mc { q, kappa, w, w_im, samples, t_max, steps, max_z, dump } => {
            let opts = McOptions {
                w: Complex64::new(*w, *w_im),
                samples: *samples,
                seed: cli.seed.unwrap_or(42),
                t_max: *t_max,
                steps: *steps,
                max_z: *max_z,
                order: cli.order.unwrap_or(400),
                dump: dump.as_deref(),
            };
            let report = run_mc(q, kappa, &opts)?;
            finish(report, out, report_fmt)
        }
    }
}

/// A report plus the check it carries; the report is written either way.
struct Checked {
    report: Report,
    failure: Option<String>,
}

fn finish(c: Checked, out: Option<&std::path::Path>, format: Format) -> Outcome {
    c.report.write(output::open(out)?, format)?;
    match c.failure {
        Some(m) => Err(Failure::Validation(m)),
        None => Ok(()),
    }
}

fn run_spectrum(q: &str, kappa: &str, out: Option<&std::path::Path>, format: Format) -> Outcome {
    let qs = grid(q)?;
    let ks = grid(kappa)?;
    let points: Vec<(&Number, &Number)> = qs.iter().flat_map(|q| ks.iter().map(move |k| (q, k))).collect();
    let rows: Vec<Row> = points
        .par_iter()
        .map(|&(q, k)| -> Outcome<Row> {
            let v = beta_spectrum(&SleParams::new(q.to_f64(), k.to_f64())?);
            let gamma = match v.branch {
                Branch::Derivative => None,
                _ => v.gamma_minus,
            };
            Ok(vec![Cell::number(q), Cell::number(k), Cell::opt(gamma), Cell::Text(v.branch.name().into()), Cell::Float(v.beta)])
        })
        .collect::<Outcome<_>>()?;
    let header = ["q", "kappa", "gamma_minus", "branch", "beta"];
    let w = output::open(out)?;
    match format {
        Format::Csv => write_csv(w, &header, &rows, &[])?,
        Format::Json => {
            let mut doc = document("spectrum");
            doc.insert("rows".into(), Value::Array(rows.iter().map(|r| row_object(&header, r)).collect()));
            write_json(w, doc)?
        }
    }
    Ok(())
}

fn shift<S: Scalar>(beta_tilde: S, gamma: &S) -> S {
    if *gamma <= S::ratio(-1, 2) {
        beta_tilde - S::from_i64(2) * gamma.clone() - S::one()
    } else {
        beta_tilde
    }
}

/// One curves row, or `None` for an invalid point.
fn curve_row<S: Scalar>(m: u32, gamma: &Number, g: S, eigen: bool) -> Outcome<Option<Row>> {
    let Ok(curve) = CurveParams::new(m, g) else { return Ok(None) };
    let Ok(p) = curve_point(&curve) else { return Ok(None) };
    let bt = beta_tilde_on_curve(&curve)?;
    if eigen {
        let exact = curve
            .gamma()
            .to_rational()
            .ok_or_else(|| Failure::Validation("non-finite gamma".into()))?;
        let rep = analyze_exact(&CurveParams::new(m, exact)?)?;
        if rep.even_deviation > 1e-10 {
            return Err(Failure::Validation(format!(
                "M={m} gamma={}: eigenvalues deviate from the closed form by {:e}",
                gamma.render(),
                rep.even_deviation
            )));
        }
    }
    let beta = shift(bt.clone(), curve.gamma());
    Ok(Some(vec![
        Cell::Int(m as i64),
        Cell::number(gamma),
        Cell::scalar(p.q()),
        Cell::scalar(p.kappa()),
        Cell::scalar(&bt),
        Cell::scalar(&beta),
    ]))
}

fn run_curves(
    m_max: u32,
    gamma: &str,
    locus_kappa: &str,
    eigen: bool,
    out: Option<&std::path::Path>,
    format: Format,
) -> Outcome {
    let gammas = grid(gamma)?;
    let locus = grid(locus_kappa)?;
    let jobs: Vec<(u32, &Number)> = (0..=m_max).flat_map(|m| gammas.iter().map(move |g| (m, g))).collect();
    let results: Vec<Option<Row>> = jobs
        .par_iter()
        .map(|&(m, g)| match g {
            Number::Exact(r) => curve_row(m, g, r.clone(), eigen),
            Number::Float(x) => curve_row(m, g, *x, eigen),
        })
        .collect::<Outcome<_>>()?;
    let skipped = results.iter().filter(|r| r.is_none()).count();
    let rows: Vec<Row> = results.into_iter().flatten().collect();
    let locus_rows: Vec<Row> = locus
        .iter()
        .filter(|k| k.to_f64() >= 0.0)
        .map(|k| vec![Cell::Text("Q".into()), Cell::number(k), Cell::Float(q_transition(k.to_f64()))])
        .collect();
    if skipped > 0 {
        eprintln!("slespec: skipped {skipped} invalid curve points");
    }
    let header = ["M", "gamma", "q", "kappa", "beta_tilde", "beta"];
    let w = output::open(out)?;
    match format {
        Format::Csv => write_csv(w, &header, &rows, &locus_rows)?,
        Format::Json => {
            let lh = ["Q", "kappa", "q"];
            let mut doc = document("curves");
            doc.insert("curves".into(), Value::Array(rows.iter().map(|r| row_object(&header, r)).collect()));
            doc.insert(
                "locus".into(),
                Value::Array(locus_rows.iter().map(|r| row_object(&lh[1..], &r[1..].to_vec())).collect()),
            );
            doc.insert("skipped".into(), Value::from(skipped));
            write_json(w, doc)?
        }
    }
    Ok(())
}

fn exact(n: &Number) -> Outcome<BigRational> {
    n.to_rational().ok_or_else(|| Failure::Usage(format!("{n} is not finite")))
}

fn run_truncate(
    m: u32,
    gamma: &str,
    kappa: Option<&str>,
    order: usize,
    table_path: Option<&std::path::Path>,
) -> Outcome<Checked> {
    let g_in = number(gamma)?;
    let g = exact(&g_in)?;
    let curve = CurveParams::new(m, g.clone())?;
    let point = curve_point(&curve)?;
    let kappa = match kappa {
        Some(k) => exact(&number(k)?)?,
        None => point.kappa().clone(),
    };
    let q = q_of_gamma(&g, &kappa);
    let table = build_theta_table(g.clone(), kappa.clone(), order)?;
    if let Some(path) = table_path {
        write_table(&table, BufWriter::new(File::create(path)?))?;
    }
    let width = max_nonzero_offset(&table);
    let a = coef_a(-(m as i64), &g, &kappa);
    let band = width <= m as usize;
    let pass = band && a.is_zero();

    let mut report = Report::new("truncate");
    report
        .field("M", Cell::Int(m as i64))
        .field("gamma", Cell::scalar(&g))
        .field("q", Cell::scalar(&q))
        .field("kappa", Cell::scalar(&kappa))
        .field("order", Cell::Int(order as i64))
        .field("backend", Cell::Text("rational".into()))
        .field("max_offset", Cell::Int(width as i64))
        .field("band_pass", Cell::Bool(band))
        .field("a_minus_m", Cell::scalar(&a))
        .field("pass", Cell::Bool(pass));
    let failure = (!pass).then(|| {
        format!(
            "truncation certificate failed: max |i-j| = {width} (M = {m}), A_-M = {}",
            Number::Exact(a.clone())
        )
    });
    Ok(Checked { report, failure })
}

struct FitOptions<'a> {
    order: usize,
    radii: Option<&'a str>,
    n_phi: usize,
    tail_tol: f64,
    tol: Option<f64>,
    table: Option<&'a std::path::Path>,
}

fn fit_samples<S: Scalar>(table: &CoeffTable<S>, radii: &[f64], o: &FitOptions) -> Outcome<Vec<(f64, f64, f64)>> {
    radii
        .iter()
        .map(|&r| {
            let m = integral_means_with(table, r, o.n_phi, o.tail_tol)?;
            Ok((r, m.value, m.tail))
        })
        .collect()
}

fn run_betafit(q: &str, kappa: &str, o: &FitOptions) -> Outcome<Checked> {
    let (q_in, k_in) = (number(q)?, number(kappa)?);
    let params = SleParams::new(q_in.to_f64(), k_in.to_f64())?;
    let radii = match o.radii {
        Some(text) => float_grid(text).map_err(Failure::Usage)?,
        None => (3..=7).map(|k| 1.0 - 2f64.powi(-k)).collect(),
    };
    let (gamma, kappa_t, order, samples) = match o.table {
        Some(path) => {
            let bytes = std::fs::read(path)?;
            let head = bytes.split(|&b| b == b'\n').next().unwrap_or_default();
            if String::from_utf8_lossy(head).contains("backend=rational") {
                let t: CoeffTable<BigRational> = read_table(&bytes[..])?;
                (t.gamma().to_f64(), t.kappa().to_f64(), t.order(), fit_samples(&t, &radii, o)?)
            } else {
                let t: CoeffTable<f64> = read_table(&bytes[..])?;
                (*t.gamma(), *t.kappa(), t.order(), fit_samples(&t, &radii, o)?)
            }
        }
        None => {
            let g = gamma_roots(&params)?.gamma_minus;
            let t = build_theta_table(g, *params.kappa(), o.order)?;
            (g, *params.kappa(), o.order, fit_samples(&t, &radii, o)?)
        }
    };
    if (kappa_t - params.kappa()).abs() > 1e-12 * params.kappa().abs().max(1.0) {
        return Err(Failure::Validation(format!(
            "table has kappa = {kappa_t}, but --kappa is {}",
            params.kappa()
        )));
    }
    let pts: Vec<(f64, f64)> = samples.iter().map(|s| (s.0, s.1)).collect();
    let fit = fit_beta(&pts)?;
    let closed = beta_spectrum(&params);
    let deviation = fit.slope - closed.beta;
    let relative = (closed.beta != 0.0).then(|| deviation.abs() / closed.beta.abs());

    let mut report = Report::new("betafit");
    report
        .field("q", Cell::number(&q_in))
        .field("kappa", Cell::number(&k_in))
        .field("gamma", Cell::Float(gamma))
        .field("order", Cell::Int(order as i64))
        .field("n_phi", Cell::Int(o.n_phi as i64))
        .field("slope", Cell::Float(fit.slope))
        .field("intercept", Cell::Float(fit.intercept))
        .field("residual", Cell::Float(fit.residual))
        .field("beta", Cell::Float(closed.beta))
        .field("branch", Cell::Text(closed.branch.name().into()))
        .field("deviation", Cell::Float(deviation))
        .field("relative_deviation", Cell::opt(relative));
    report.extra.push((
        "samples",
        Value::Array(
            samples
                .iter()
                .map(|&(r, i, tail)| {
                    row_object(&["r", "integral_mean", "tail"], &vec![Cell::Float(r), Cell::Float(i), Cell::Float(tail)])
                })
                .collect(),
        ),
    ));
    let failure = o.tol.and_then(|tol| {
        let err = relative.unwrap_or(deviation.abs());
        (err > tol).then(|| format!("slope {} deviates from beta {} by {err:e} > {tol:e}", fit.slope, closed.beta))
    });
    Ok(Checked { report, failure })
}

struct McOptions<'a> {
    w: Complex64,
    samples: u64,
    seed: u64,
    t_max: Option<f64>,
    steps: Option<usize>,
    max_z: f64,
    order: usize,
    dump: Option<&'a std::path::Path>,
}

/// Reference value of ρ(w, w̄) and where it came from.
fn mc_oracle(q: f64, kappa: f64, w: Complex64, order: usize) -> Outcome<(Option<f64>, &'static str)> {
    if q == 0.0 {
        return Ok((Some(1.0), "trivial"));
    }
    if kappa == 0.0 {
        let d = deterministic_map_derivative(w, 0.0)?.norm();
        return Ok((Some(d.powf(q)), "deterministic"));
    }
    let Ok(roots) = gamma_roots(&SleParams::new(q, kappa)?) else { return Ok((None, "none")) };
    let table = build_theta_table(roots.gamma_minus, kappa, order)?;
    let v = eval_rho(&table, w, w.conj());
    if v.diverging {
        return Ok((None, "none"));
    }
    Ok((Some(v.value.re), "series"))
}

fn run_mc(q: &str, kappa: &str, o: &McOptions) -> Outcome<Checked> {
    let (q_in, k_in) = (number(q)?, number(kappa)?);
    let (q, kappa) = (q_in.to_f64(), k_in.to_f64());
    let mut cfg = MCConfig::new(kappa, q, o.w, o.samples, o.seed);
    if let Some(t) = o.t_max {
        cfg.t_max = t;
        cfg.n_steps = (t / MAX_STEP).ceil() as usize;
    }
    if let Some(n) = o.steps {
        cfg.n_steps = n;
    }
    let paths = simulate_paths(&cfg)?;
    if let Some(path) = o.dump {
        write_samples(&paths, BufWriter::new(File::create(path)?))?;
    }
    let est = estimate_from_samples(&paths, q, cfg.t_max, o.seed)?;
    let envelope = cfg.envelope_warnings();
    let inside = envelope.is_empty();
    let mut warnings = envelope;
    warnings.extend(est.warnings.iter().cloned());
    let (oracle, source) = mc_oracle(q, kappa, o.w, o.order)?;
    if oracle.is_none() {
        warnings.push("no series oracle at this point".into());
    }

    let (z, pass) = match oracle {
        Some(v) if est.stderr > 0.0 => {
            let z = (est.mean - v) / est.stderr;
            (Some(z), z.abs() <= o.max_z)
        }
        Some(v) => (None, (est.mean - v).abs() <= 1e-6 * v.abs().max(f64::MIN_POSITIVE)),
        None => (None, true),
    };

    let mut report = Report::new("mc");
    report
        .field("q", Cell::number(&q_in))
        .field("kappa", Cell::number(&k_in))
        .field("w_re", Cell::Float(o.w.re))
        .field("w_im", Cell::Float(o.w.im))
        .field("t_max", Cell::Float(cfg.t_max))
        .field("n_steps", Cell::Int(cfg.n_steps as i64))
        .field("n_samples", Cell::Int(est.n_samples as i64))
        .field("seed", Cell::Text(o.seed.to_string()))
        .field("mean", Cell::Float(est.mean))
        .field("stderr", Cell::Float(est.stderr))
        .field("oracle", Cell::opt(oracle))
        .field("oracle_source", Cell::Text(source.into()))
        .field("z_score", Cell::opt(z))
        .field("pass", Cell::Bool(pass))
        .field("warnings", Cell::Text(warnings.join("; ")));
    let failure = (!pass && inside).then(|| match z {
        Some(z) => format!("Monte Carlo mean {} is {z:.2} standard errors from the oracle", est.mean),
        None => format!("Monte Carlo mean {} disagrees with the oracle", est.mean),
    });
    Ok(Checked { report, failure })
}
