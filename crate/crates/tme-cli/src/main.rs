use std::f64::consts::PI;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use tme::chern::{mu_in_window, power_law_fit, ChernParams, ChernSystem};
use tme::gauss::PathOptions;
use tme::io::{self, Record};
use tme::kitaev::{EvalOptions, KitaevParams, KitaevSystem, Method, SweepParam, TorusSector};
use tme::laughlin::{self, MCParams};
use tme::perm::{builtin_spec, topology_report, Family, MeasureSpec};
use tme::predict::{self, AnyonModel, HallData, PhiPhase};
use tme::Error;

#[derive(Parser, Debug)]
#[command(name = "tme", version, about = "Permutation multi-entropy measures of chiral ground states")]
struct Cli {
    /// Worker threads (defaults to TME_WORKERS, then the core count).
    #[arg(long, global = true, env = "TME_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Analytical phase of a built-in measure.
    Predict(PredictArgs),
    /// Cycle/orbit report of a built-in spec.
    Topology(SpecArgs),
    /// Kitaev honeycomb model: single point or parameter scan.
    Kitaev(KitaevArgs),
    /// Charged Rényi modular commutator on the two-copy Chern insulator.
    Chern(ChernArgs),
    /// Monte Carlo on the ν=1/2 Laughlin spin wavefunction.
    Laughlin(LaughlinArgs),
    /// Relative phase errors of result records against predictions.
    Compare(CompareArgs),
    /// Runs the subcommand described by a sectioned key=value file.
    Run { config: PathBuf },
}

#[derive(Args, Debug, Clone)]
struct SpecArgs {
    #[arg(long, value_enum)]
    family: FamilyArg,
    /// n for J_n, K_n, S_{μ,n}; r for Φ_r.
    #[arg(long, alias = "r", default_value_t = 1)]
    n: usize,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum FamilyArg {
    Jn,
    Phir,
    Kn,
    Smun,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Jn => Family::Jn,
            FamilyArg::Phir => Family::Phir,
            FamilyArg::Kn => Family::Kn,
            FamilyArg::Smun => Family::Smun,
        }
    }
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 0.5)]
    c_minus: f64,
    /// Anyon model for Φ_r.
    #[arg(long, value_enum, default_value = "ising")]
    model: ModelArg,
    #[arg(long, default_value_t = 1.0 / (2.0 * PI))]
    sigma_xy: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum ModelArg {
    Ising,
    ToricCode,
}

#[derive(Args, Debug)]
struct OutArgs {
    /// JSON records.
    #[arg(long)]
    out: Option<PathBuf>,
    /// CSV series for scans.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum MethodArg {
    Factorized,
    Literal,
}

#[derive(Args, Debug)]
struct KitaevArgs {
    #[command(flatten)]
    spec: SpecArgs,
    #[arg(long, default_value_t = 10)]
    ns: usize,
    #[arg(long, default_value_t = 1.0)]
    jx: f64,
    #[arg(long, default_value_t = 1.0)]
    jy: f64,
    #[arg(long, default_value_t = 1.0)]
    jz: f64,
    #[arg(long, default_value_t = 0.3)]
    k: f64,
    /// Dimer pinning strength Δ of the b sector.
    #[arg(long, default_value_t = 1.0)]
    pin: f64,
    /// Torus boundary sector as two letters, e.g. PA (periodic x, antiperiodic y).
    #[arg(long)]
    sector: Option<String>,
    #[arg(long, value_enum, default_value = "factorized")]
    method: MethodArg,
    #[arg(long)]
    no_prune: bool,
    /// NAME=start:stop:count; Jx also moves Jy unless --untie is given.
    #[arg(long)]
    scan: Option<String>,
    #[arg(long)]
    untie: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct ChernArgs {
    #[arg(long, default_value_t = 16)]
    ns: usize,
    #[arg(long, default_value_t = 1)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// start:stop:count; replaces --mu and reports a power-law fit.
    #[arg(long)]
    mu_grid: Option<String>,
    #[arg(long, default_value_t = 1.0)]
    j: f64,
    #[arg(long, default_value_t = 0.3)]
    k: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum LaughlinMeasure {
    J1,
    Smu,
}

#[derive(Args, Debug)]
struct LaughlinArgs {
    #[arg(long, value_enum, default_value = "j1")]
    measure: LaughlinMeasure,
    /// Number of spins.
    #[arg(long = "spins", alias = "N", default_value_t = 16)]
    spins: usize,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long)]
    mu_grid: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    burn_in: usize,
    #[arg(long, default_value_t = 100_000)]
    sweeps: usize,
    #[arg(long, default_value_t = 64)]
    bins: usize,
    #[arg(long, default_value_t = 24)]
    rotations: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Seed of the point-distribution start.
    #[arg(long, default_value_t = 1)]
    points_seed: u64,
    /// Per-chain raw bins as CSV.
    #[arg(long)]
    bins_csv: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug)]
struct CompareArgs {
    #[arg(long)]
    result: PathBuf,
    /// Predicted phase; derived from the measure name when omitted.
    #[arg(long)]
    prediction: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    c_minus: f64,
    #[arg(long, default_value_t = 1.0 / (2.0 * PI))]
    sigma_xy: f64,
    #[arg(long, default_value_t = 0.005)]
    tol: f64,
}

/// Exit status 2 for bad input, 3 for numerical failures.
struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) | Error::Parse(_) | Error::NotBijective(_) | Error::Io(_) | Error::Json(_) | Error::SizeMismatch { .. } => 2,
            _ => 3,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<ExitCode> {
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(invalid("workers must be positive"));
        }
        // a nested `run` may find the pool already built
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match cli.cmd {
        Cmd::Predict(a) => predict_cmd(&a),
        Cmd::Topology(a) => topology_cmd(&a),
        Cmd::Kitaev(a) => kitaev_cmd(&a),
        Cmd::Chern(a) => chern_cmd(&a),
        Cmd::Laughlin(a) => laughlin_cmd(&a),
        Cmd::Compare(a) => compare_cmd(&a),
        Cmd::Run { config } => run_cmd(&config),
    }
}

fn spec_of(a: &SpecArgs) -> CliResult<MeasureSpec> {
    Ok(builtin_spec(a.family.into(), a.n)?)
}

/// Writes a line to stdout; a closed reader ends the process quietly.
fn say(text: &str) {
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{text}").and_then(|_| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}

fn emit(records: &[Record], out: Option<&PathBuf>) -> CliResult<()> {
    match out {
        Some(p) => io::write_json(p, records)?,
        None => say(&io::to_json(records)?),
    }
    Ok(())
}

fn predicted(family: Family, n: usize, c_minus: f64, model: &AnyonModel, hall: HallData, mu: f64) -> CliResult<f64> {
    Ok(match family {
        Family::Jn => predict::arg_jn(c_minus, n)?,
        Family::Kn => predict::arg_kn(c_minus, n)?,
        Family::Phir => match predict::phi_r_phase(model, n)? {
            PhiPhase::Phase(p) => p,
            PhiPhase::Vanishing => return Err(Failure { code: 3, msg: format!("Phi{n} vanishes for this model") }),
        },
        Family::Smun => predict::arg_smun(hall, mu, n)?,
    })
}

fn predict_cmd(a: &PredictArgs) -> CliResult<ExitCode> {
    let mut model = match a.model {
        ModelArg::Ising => AnyonModel::ising(),
        ModelArg::ToricCode => AnyonModel::toric_code(),
    };
    model.c_minus = a.c_minus;
    let family: Family = a.spec.family.into();
    let p = predicted(family, a.spec.n, a.c_minus, &model, HallData { sigma_xy: a.sigma_xy }, a.mu)?;
    say(&format!("{p:.7}"));
    let spec = spec_of(&a.spec)?;
    let cfg = json!({"family": family.to_string(), "n": a.spec.n, "c_minus": a.c_minus, "sigma_xy": a.sigma_xy, "mu": a.mu});
    let rec = Record::new("predict", &spec.name, cfg, tme::gauss::C64::from_polar(1.0, p)).with_prediction(p);
    emit(&[rec], None)?;
    Ok(ExitCode::SUCCESS)
}

fn topology_cmd(a: &SpecArgs) -> CliResult<ExitCode> {
    let spec = spec_of(a)?;
    let rep = topology_report(&spec);
    say(&format!("is_manifold={}", rep.is_manifold));
    say(&serde_json::to_string_pretty(&json!({"measure": spec.name, "report": rep})).map_err(Error::from)?);
    Ok(ExitCode::SUCCESS)
}

fn parse_sector(s: &str) -> CliResult<TorusSector> {
    let b = |c: char| match c {
        'A' | 'a' => Ok(true),
        'P' | 'p' => Ok(false),
        _ => Err(invalid(format!("sector letters are P or A, got '{s}'"))),
    };
    let cs: Vec<char> = s.chars().collect();
    if cs.len() != 2 {
        return Err(invalid(format!("sector needs two letters, got '{s}'")));
    }
    Ok(TorusSector { x: b(cs[0])?, y: b(cs[1])? })
}

fn kitaev_cmd(a: &KitaevArgs) -> CliResult<ExitCode> {
    let spec = spec_of(&a.spec)?;
    let params = KitaevParams {
        jx: a.jx,
        jy: a.jy,
        jz: a.jz,
        k: a.k,
        n_s: a.ns,
        gauge_pin: a.pin,
        sector: a.sector.as_deref().map(parse_sector).transpose()?,
    };
    params.validate()?;
    let opts = EvalOptions {
        method: match a.method {
            MethodArg::Factorized => Method::Factorized,
            MethodArg::Literal => Method::Literal,
        },
        prune: !a.no_prune,
        ..EvalOptions::default()
    };
    let config = |p: &KitaevParams| json!({"kitaev": p, "method": format!("{:?}", opts.method), "prune": opts.prune});
    let mut points: Vec<(f64, KitaevParams)> = Vec::new();
    let mut sweep_name = None;
    match &a.scan {
        None => points.push((f64::NAN, params.clone())),
        Some(s) => {
            let (name, grid) = s.split_once('=').ok_or_else(|| invalid("scan must be NAME=start:stop:count"))?;
            let mut sweep: SweepParam = name.parse()?;
            if sweep == SweepParam::Jx && !a.untie {
                sweep = SweepParam::Jxy;
            }
            let grid = io::parse_grid(grid)?;
            if grid.windows(2).any(|w| w[1] <= w[0]) && grid.windows(2).any(|w| w[1] >= w[0]) {
                return Err(invalid("scan grid must be monotone"));
            }
            for v in grid {
                let mut p = params.clone();
                sweep.apply(&mut p, v);
                points.push((v, p));
            }
            sweep_name = Some(name.to_string());
        }
    }
    let mut records = Vec::new();
    let mut failed = None;
    for (_, p) in &points {
        let res = KitaevSystem::new(p.clone()).and_then(|sys| sys.evaluate(&spec, &opts));
        match res {
            Ok(m) => {
                eprintln!("{} jx={} jy={} jz={} k={} arg={:.7} |v|={:.4e} ({} sectors, {:.1}s)", m.measure, p.jx, p.jy, p.jz, p.k, m.phase, m.magnitude, m.sectors_evaluated, m.wall_time_s);
                records.push(Record::from_kitaev(&m, config(p)));
            }
            Err(e) => {
                records.push(Record::failure("kitaev", &spec.name, config(p), &e));
                failed = Some(e);
                break;
            }
        }
    }
    emit(&records, a.out.out.as_ref())?;
    if let (Some(name), Some(path)) = (&sweep_name, &a.out.csv) {
        let grid: Vec<f64> = points.iter().map(|(v, _)| *v).take(records.len()).collect();
        std::fs::write(path, io::scan_csv(name, &grid, &records)?).map_err(Error::from)?;
    }
    match failed {
        Some(e) => Err(e.into()),
        None => Ok(ExitCode::SUCCESS),
    }
}

fn chern_cmd(a: &ChernArgs) -> CliResult<ExitCode> {
    let params = ChernParams::new(a.ns, a.j, a.k);
    let grid = match &a.mu_grid {
        Some(g) => io::parse_grid(g)?,
        None => vec![a.mu],
    };
    let sys = ChernSystem::new(params.clone())?;
    let hall = HallData { sigma_xy: 1.0 / (2.0 * PI) };
    let mut records = Vec::new();
    for &mu in &grid {
        if !mu_in_window(mu, a.ns) {
            eprintln!("warning: mu = {mu} exceeds n_s/4; the quadratic regime may not hold");
        }
        let cfg = json!({"chern": params, "mu": mu, "n": a.n});
        match sys.evaluate(mu, a.n, &PathOptions::default()) {
            Ok(r) => {
                let p = predict::arg_smun(hall, mu, a.n)?;
                eprintln!("S{} mu={mu} arg={:.7} predicted={:.7} ratio={:.4}", a.n, r.phase, p, if p != 0.0 { r.phase / p } else { f64::NAN });
                records.push(Record::from_chern(&r, cfg).with_prediction(p));
            }
            Err(e) => {
                records.push(Record::failure("chern", &format!("S{}", a.n), cfg, &e));
                emit(&records, a.out.out.as_ref())?;
                return Err(e.into());
            }
        }
    }
    if grid.len() > 1 {
        let phases: Vec<f64> = records.iter().map(|r| r.phase).collect();
        if let Ok((amp, eta)) = power_law_fit(&grid, &phases) {
            eprintln!("fit: arg = {amp:.5} mu^{eta:.4}");
        }
    }
    emit(&records, a.out.out.as_ref())?;
    if let Some(path) = &a.out.csv {
        std::fs::write(path, io::scan_csv("mu", &grid, &records)?).map_err(Error::from)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn laughlin_cmd(a: &LaughlinArgs) -> CliResult<ExitCode> {
    let mc = MCParams { burn_in: a.burn_in, sweeps: a.sweeps, bins: a.bins, n_rotations: a.rotations, seed: a.seed };
    let sphere = laughlin::distribute_points(a.spins, a.points_seed)?;
    let mus = match (&a.measure, &a.mu_grid) {
        (LaughlinMeasure::J1, _) => vec![f64::NAN],
        (LaughlinMeasure::Smu, Some(g)) => io::parse_grid(g)?,
        (LaughlinMeasure::Smu, None) => vec![a.mu],
    };
    let start = Instant::now();
    let hall = HallData::laughlin_half();
    let (name, est) = match a.measure {
        LaughlinMeasure::J1 => ("J1", laughlin::estimate_j1(&sphere, &mc).map(|e| vec![e])),
        LaughlinMeasure::Smu => ("S1", laughlin::estimate_smu1_grid(&mus, &sphere, &mc)),
    };
    let cfg = |mu: f64| json!({"mc": mc, "spins": a.spins, "points_seed": a.points_seed, "mu": if mu.is_nan() { Value::Null } else { json!(mu) }});
    let ests = match est {
        Ok(v) => v,
        Err(err) => {
            emit(&[Record::failure("laughlin", name, cfg(mus[0]), &err)], a.out.out.as_ref())?;
            return Err(err.into());
        }
    };
    let runtime = start.elapsed().as_secs_f64();
    if let Some(path) = &a.bins_csv {
        let labels: Vec<f64> = mus.iter().map(|m| if m.is_nan() { 0.0 } else { *m }).collect();
        std::fs::write(path, io::bins_csv("mu", &labels, &ests)?).map_err(Error::from)?;
    }
    let mut records = Vec::new();
    for (&mu, e) in mus.iter().zip(&ests) {
        let pred = match a.measure {
            LaughlinMeasure::J1 => predict::arg_jn(1.0, 1)?,
            LaughlinMeasure::Smu => predict::arg_smun(hall, mu, 1)?,
        };
        eprintln!("{name} mu={mu} arg={:.6} ± {:.6} predicted={:.6} acceptance={:.3}", e.phase(), e.phase_stderr(), pred, e.acceptance_rate);
        records.push(Record::from_estimate(name, e, cfg(mu), a.seed, runtime).with_prediction(pred));
    }
    if mus.len() > 1 {
        let phases: Vec<f64> = records.iter().map(|r| r.phase).collect();
        if let Ok((amp, eta)) = power_law_fit(&mus, &phases) {
            eprintln!("fit: arg = {amp:.5} mu^{eta:.4}");
        }
    }
    emit(&records, a.out.out.as_ref())?;
    if let (Some(path), LaughlinMeasure::Smu) = (&a.out.csv, a.measure) {
        std::fs::write(path, io::scan_csv("mu", &mus, &records)?).map_err(Error::from)?;
    }
    Ok(ExitCode::SUCCESS)
}

/// `J3` → (Jn, 3), `Phi2` → (Phir, 2), `S1` → (Smun, 1).
fn parse_measure(name: &str) -> Option<(Family, usize)> {
    let (fam, rest) = if let Some(r) = name.strip_prefix("Phi") {
        (Family::Phir, r)
    } else if let Some(r) = name.strip_prefix('J') {
        (Family::Jn, r)
    } else if let Some(r) = name.strip_prefix('K') {
        (Family::Kn, r)
    } else if let Some(r) = name.strip_prefix('S') {
        (Family::Smun, r)
    } else {
        return None;
    };
    rest.parse().ok().map(|n| (fam, n))
}

fn compare_cmd(a: &CompareArgs) -> CliResult<ExitCode> {
    let records = io::read_json(&a.result)?;
    let mut model = AnyonModel::ising();
    model.c_minus = a.c_minus;
    let mut rows = Vec::new();
    for r in &records {
        if r.error.is_some() {
            return Err(Failure { code: 3, msg: format!("record for {} is a failure record", r.measure) });
        }
        let pred = match (a.prediction, r.prediction) {
            (Some(p), _) => p,
            (None, Some(p)) => p,
            (None, None) => {
                let (fam, n) = parse_measure(&r.measure).ok_or_else(|| invalid(format!("no prediction for measure '{}'", r.measure)))?;
                let mu = r.params.get("mu").and_then(Value::as_f64).unwrap_or(0.0);
                predicted(fam, n, a.c_minus, &model, HallData { sigma_xy: a.sigma_xy }, mu)?
            }
        };
        rows.push(io::compare_phase(&r.measure, r.phase, pred, a.tol));
    }
    say(io::comparison_table(&rows).trim_end());
    Ok(if rows.iter().all(|r| r.pass) { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn run_cmd(path: &PathBuf) -> CliResult<ExitCode> {
    let text = std::fs::read_to_string(path).map_err(Error::from)?;
    let cfg = io::parse_config(&text)?;
    let mut sections: Vec<&str> = cfg.keys().filter_map(|k| k.split_once('.').map(|(s, _)| s)).collect();
    sections.dedup();
    let [sub] = sections.as_slice() else {
        return Err(invalid("config needs exactly one [subcommand] section"));
    };
    let mut argv = vec!["tme".to_string()];
    if let Some(w) = cfg.get("workers") {
        argv.push("--workers".into());
        argv.push(w.clone());
    }
    argv.push(sub.to_string());
    for (k, v) in &cfg {
        let Some((_, key)) = k.split_once('.') else { continue };
        let flag = format!("--{}", key.replace('_', "-"));
        match v.as_str() {
            "true" => argv.push(flag),
            "false" => {}
            _ => {
                argv.push(flag);
                argv.push(v.clone());
            }
        }
    }
    let cli = Cli::try_parse_from(&argv).map_err(|e| invalid(e.to_string().trim_start_matches("error: ").trim_end()))?;
    if matches!(cli.cmd, Cmd::Run { .. }) {
        return Err(invalid("config may not invoke run"));
    }
    dispatch(cli)
}
