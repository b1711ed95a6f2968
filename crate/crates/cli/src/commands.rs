use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use ularma::diagnostics::{
    accuracy_metrics, cumulative_accuracy, dl_tests, ks_normality, lilliefors_normality, residuals, srcp,
    Accuracy, DlConfig, DlOutcome, Multiplier, Srcp, TestOutcome, SRCP_THRESHOLD,
};
use ularma::forecast::bootstrap_pi;
use ularma::inference::{stepwise_select, SelectionStep, StepwiseOptions};
use ularma::simulate::{run_gof_mc, run_point_mc, GofTest, Scenario};
use ularma::{fit, FitOptions, FittedModel, LinkChoice, ModelSpec};

use crate::data::{ingest, DatasetConfig};
use crate::error::{exit, CliError, CliResult, Internal};
use crate::model_file::{CoefficientRow, ModelFile};

#[derive(Debug, Parser)]
#[command(name = "ularma", version, about = "Fit, select, forecast and diagnose ULARMA models")]
pub struct Cli {
    /// Worker threads for bootstrap and Monte Carlo work (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model of given orders by maximum likelihood.
    Fit(FitArgs),
    /// Stepwise selection of AR and MA lags from a full model.
    Select(SelectArgs),
    /// Point forecasts and bootstrap prediction intervals from a saved model.
    Forecast(ForecastArgs),
    /// Residual tests, AR root check and in-sample accuracy for a saved model.
    Diagnose(DiagnoseArgs),
    /// Generate a sample path from a scenario file.
    Simulate(SimulateArgs),
    /// Monte Carlo study of estimator and test behaviour for a scenario file.
    Mc(McArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum LinkArg {
    Logit,
    Loglog,
    Cloglog,
}

impl From<LinkArg> for LinkChoice {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::Logit => LinkChoice::Logit,
            LinkArg::Loglog => LinkChoice::Loglog,
            LinkArg::Cloglog => LinkChoice::Cloglog,
        }
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DatasetConfig,
    #[arg(long, default_value_t = 0)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub q: usize,
    #[arg(long, value_enum, default_value_t = LinkArg::Logit)]
    pub link: LinkArg,
    /// Model JSON to write.
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
    /// Coefficient table CSV to write.
    #[arg(long, value_name = "CSV")]
    pub table: Option<PathBuf>,
    #[arg(long, default_value_t = FitOptions::default().max_iterations)]
    pub max_iter: usize,
    /// Skip the Nelder-Mead restart when quasi-Newton fails.
    #[arg(long)]
    pub no_fallback: bool,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DatasetConfig,
    #[arg(long, default_value_t = 2)]
    pub pmax: usize,
    #[arg(long, default_value_t = 2)]
    pub qmax: usize,
    #[arg(long, value_enum, default_value_t = LinkArg::Logit)]
    pub link: LinkArg,
    /// p-value above which a coefficient is dropped.
    #[arg(long, default_value_t = 0.15)]
    pub drop: f64,
    /// p-value below which an excluded coefficient is re-admitted.
    #[arg(long, default_value_t = 0.10)]
    pub add: f64,
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
    #[arg(long, value_name = "CSV")]
    pub table: Option<PathBuf>,
    /// Selection trace CSV to write.
    #[arg(long, value_name = "CSV")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DatasetConfig,
    /// Forecast horizon (default: the holdout length).
    #[arg(long)]
    pub h: Option<usize>,
    /// Bootstrap replicates.
    #[arg(long = "B", alias = "bootstrap", default_value_t = 1000)]
    pub b: usize,
    /// Miscoverage of the prediction intervals.
    #[arg(long, default_value_t = 0.10)]
    pub delta: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Forecast CSV to write.
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
    /// Holdout accuracy CSV to write.
    #[arg(long, value_name = "CSV")]
    pub accuracy: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MultiplierArg {
    Mammen,
    Normal,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[arg(long, value_name = "JSON")]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DatasetConfig,
    /// Report JSON to write.
    #[arg(long, value_name = "JSON")]
    pub out: PathBuf,
    /// Residual CSV to write.
    #[arg(long, value_name = "CSV")]
    pub residuals: Option<PathBuf>,
    /// Wild bootstrap replicates for the martingale difference tests.
    #[arg(long, default_value_t = 500)]
    pub bootstrap: usize,
    #[arg(long, default_value_t = 1)]
    pub lags: usize,
    #[arg(long, value_enum, default_value_t = MultiplierArg::Mammen)]
    pub multiplier: MultiplierArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_name = "JSON")]
    pub scenario: PathBuf,
    /// Replica index; each index is an independent stream.
    #[arg(long, default_value_t = 0)]
    pub replica: u64,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Path CSV to write (burn-in removed).
    #[arg(long, value_name = "CSV")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum McKind {
    Point,
    Gof,
    Both,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long, value_name = "JSON")]
    pub scenario: PathBuf,
    #[arg(long, value_enum, default_value_t = McKind::Both)]
    pub kind: McKind,
    /// Overrides the scenario replica count.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Wild bootstrap replicates for the martingale difference tests.
    #[arg(long, default_value_t = 500)]
    pub bootstrap: usize,
    /// Output prefix; writes PREFIX_point.{csv,txt} and PREFIX_gof.{csv,txt}.
    #[arg(long, value_name = "PREFIX")]
    pub out_prefix: PathBuf,
}

pub fn run(cli: Cli) -> CliResult<i32> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(CliError::input("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().internal()?;
    }
    match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Select(a) => cmd_select(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Diagnose(a) => cmd_diagnose(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Mc(a) => cmd_mc(a),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

pub fn coefficient_report(model: &ModelFile) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<10} {:>10} {:>10} {:>9} {:>8}", "", "estimate", "std.err", "z", "p");
    for CoefficientRow { coefficient, estimate, std_error, z_value, p_value } in &model.coefficients {
        let _ = writeln!(
            s,
            "{coefficient:<10} {estimate:>10.4} {:>10} {:>9} {:>8}",
            fmt_opt(*std_error),
            fmt_opt(*z_value),
            fmt_opt(*p_value)
        );
    }
    let c = &model.criteria;
    let _ = writeln!(
        s,
        "loglik {:.4}  AIC {:.4}  BIC {:.4}  HQC {:.4}  n {}  converged {}",
        model.loglik, c.aic, c.bic, c.hqc, model.n_obs, model.converged
    );
    s
}

/// Writes the model and its table, then maps convergence to the exit code.
fn emit_model(fit: &FittedModel, selection: Option<Vec<SelectionStep>>, out: &Path, table: Option<&Path>) -> CliResult<i32> {
    let model = ModelFile::from_fit(fit, selection)?;
    model.save(out)?;
    if let Some(t) = table {
        write_csv(t, &model.coefficients)?;
    }
    print!("{}", coefficient_report(&model));
    if fit.clamp_active {
        log::warn!("the inverse link saturates somewhere at the estimate");
    }
    if model.converged {
        Ok(exit::OK)
    } else {
        eprintln!("warning: optimizer did not converge; outputs were written");
        Ok(exit::NOT_CONVERGED)
    }
}

fn cmd_fit(a: FitArgs) -> CliResult<i32> {
    let ds = ingest(&a.data)?;
    let spec = ModelSpec::new(a.p, a.q, ds.train.r(), a.link.into());
    let opts = FitOptions {
        max_iterations: a.max_iter,
        fallback_enabled: !a.no_fallback,
        ..FitOptions::default()
    };
    let f = fit(&spec, &ds.train, &opts)?;
    emit_model(&f, None, &a.out, a.table.as_deref())
}

#[derive(Serialize)]
struct TraceRow<'a> {
    step: usize,
    action: &'static str,
    coefficient: &'a str,
    p_value: f64,
}

fn cmd_select(a: SelectArgs) -> CliResult<i32> {
    let ds = ingest(&a.data)?;
    let opts = StepwiseOptions { drop: a.drop, add: a.add, ..StepwiseOptions::default() };
    let sel = stepwise_select(&ds.train, a.pmax, a.qmax, a.link.into(), &opts)?;
    for (i, s) in sel.trace.iter().enumerate() {
        println!("step {}: {:?} {} (p = {:.4})", i + 1, s.action, s.coefficient, s.p_value);
    }
    if let Some(path) = &a.trace {
        let rows: Vec<TraceRow> = sel
            .trace
            .iter()
            .enumerate()
            .map(|(i, s)| TraceRow {
                step: i + 1,
                action: match s.action {
                    ularma::inference::StepAction::Drop => "drop",
                    ularma::inference::StepAction::Add => "add",
                },
                coefficient: &s.coefficient,
                p_value: s.p_value,
            })
            .collect();
        write_csv(path, &rows)?;
    }
    emit_model(&sel.fit, Some(sel.trace.clone()), &a.out, a.table.as_deref())
}

#[derive(Debug, Serialize)]
struct ForecastRow<'a> {
    horizon: usize,
    date: Option<&'a str>,
    point: f64,
    lower: f64,
    upper: f64,
    actual: Option<f64>,
}

#[derive(Debug, Serialize)]
struct AccuracyRow {
    horizon: usize,
    rmse: f64,
    mape: f64,
    mape_percent: f64,
}

fn cmd_forecast(a: ForecastArgs) -> CliResult<i32> {
    let model = ModelFile::load(&a.model)?;
    let ds = ingest(&a.data)?;
    let fitted = model.restore(&ds.train)?;
    let h = match a.h {
        Some(0) => return Err(CliError::input("--h must be at least 1")),
        Some(h) => h,
        None if !ds.holdout_y.is_empty() => ds.holdout_y.len(),
        None => return Err(CliError::input("no holdout in the data; give --h")),
    };
    let new_x = if model.spec.r > 0 {
        if ds.holdout_x.nrows() < h {
            return Err(CliError::input(format!(
                "model has covariates: the holdout supplies {} future rows, horizon is {h}",
                ds.holdout_x.nrows()
            )));
        }
        Some(ds.holdout_x.rows(0, h).into_owned())
    } else {
        None
    };
    let res = bootstrap_pi(&fitted, &ds.train, h, a.b, a.delta, new_x.as_ref(), a.seed)?;
    let (lower, upper) = (res.lower.unwrap_or_default(), res.upper.unwrap_or_default());
    let rows: Vec<ForecastRow> = (0..h)
        .map(|k| ForecastRow {
            horizon: k + 1,
            date: ds.holdout_date(k),
            point: res.point[k],
            lower: lower[k],
            upper: upper[k],
            actual: ds.holdout_y.get(k).copied(),
        })
        .collect();
    write_csv(&a.out, &rows)?;
    println!("{:>7} {:>9} {:>9} {:>9}", "horizon", "point", "lower", "upper");
    for r in &rows {
        println!("{:>7} {:>9.4} {:>9.4} {:>9.4}", r.horizon, r.point, r.lower, r.upper);
    }

    let m = h.min(ds.holdout_y.len());
    if m > 0 {
        let table = cumulative_accuracy(&ds.holdout_y[..m], &res.point[..m])?;
        let rows: Vec<AccuracyRow> = table
            .iter()
            .map(|t| AccuracyRow { horizon: t.horizon, rmse: t.rmse, mape: t.mape, mape_percent: 100.0 * t.mape })
            .collect();
        println!("{:>7} {:>9} {:>9}", "horizon", "RMSE", "MAPE");
        for r in &rows {
            println!("{:>7} {:>9.4} {:>9.4}", r.horizon, r.rmse, r.mape);
        }
        if let Some(path) = &a.accuracy {
            write_csv(path, &rows)?;
        }
    } else if a.accuracy.is_some() {
        log::warn!("no holdout observations: accuracy table not written");
    }
    Ok(exit::OK)
}

#[derive(Debug, Serialize)]
pub struct ResidualSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub max: f64,
}

impl ResidualSummary {
    fn of(e: &[f64]) -> Self {
        let n = e.len();
        let mean = e.iter().sum::<f64>() / n as f64;
        let var = e.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64;
        Self {
            n,
            mean,
            sd: var.sqrt(),
            min: e.iter().copied().fold(f64::INFINITY, f64::min),
            max: e.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SrcpReport {
    #[serde(flatten)]
    pub root: Srcp,
    pub threshold: f64,
}

#[derive(Debug, Serialize)]
pub struct DiagnoseReport {
    pub schema_version: u32,
    pub n_obs: usize,
    pub simple_residuals: ResidualSummary,
    pub quantile_residuals: ResidualSummary,
    pub dl_config: DlConfig,
    pub dl: DlOutcome,
    pub ks_normality: TestOutcome,
    /// KS normality with mean and variance estimated from the residuals.
    pub ks_lilliefors: TestOutcome,
    /// Absent when the model has no AR part.
    pub srcp: Option<SrcpReport>,
    pub in_sample: Accuracy,
}

#[derive(Serialize)]
struct ResidualRow<'a> {
    t: usize,
    date: Option<&'a str>,
    y: f64,
    mu: f64,
    simple: f64,
    quantile: f64,
}

fn cmd_diagnose(a: DiagnoseArgs) -> CliResult<i32> {
    let model = ModelFile::load(&a.model)?;
    let ds = ingest(&a.data)?;
    let fitted = model.restore(&ds.train)?;
    let res = residuals(&fitted, &ds.train, true)?;
    let cfg = DlConfig {
        bootstrap: a.bootstrap,
        lags: a.lags,
        multiplier: match a.multiplier {
            MultiplierArg::Mammen => Multiplier::Mammen,
            MultiplierArg::Normal => Multiplier::Normal,
        },
        seed: a.seed,
    };
    let dl = dl_tests(&res.simple, &cfg)?;
    let ks = ks_normality(&res.quantile)?;
    let lks = lilliefors_normality(&res.quantile)?;
    let phi = &fitted.gamma_hat.phi;
    let root = if phi.iter().any(|&c| c != 0.0) { Some(srcp(phi)?) } else { None };
    let in_sample = accuracy_metrics(ds.train.y(), &fitted.fitted_mu)?;
    let report = DiagnoseReport {
        schema_version: crate::model_file::SCHEMA_VERSION,
        n_obs: fitted.n_obs,
        simple_residuals: ResidualSummary::of(&res.simple),
        quantile_residuals: ResidualSummary::of(&res.quantile),
        dl_config: cfg,
        dl,
        ks_normality: ks,
        ks_lilliefors: lks,
        srcp: root.map(|root| SrcpReport { root, threshold: SRCP_THRESHOLD }),
        in_sample,
    };
    write_text(&a.out, &(serde_json::to_string_pretty(&report).internal()? + "\n"))?;

    if let Some(path) = &a.residuals {
        let y = ds.train.y();
        let off = usize::from(res.drop_first);
        let rows: Vec<ResidualRow> = (0..res.simple.len())
            .map(|i| {
                let t = i + off;
                ResidualRow {
                    t: t + 1,
                    date: ds.train_date(t),
                    y: y[t],
                    mu: fitted.fitted_mu[t],
                    simple: res.simple[i],
                    quantile: res.quantile[i],
                }
            })
            .collect();
        write_csv(path, &rows)?;
    }

    println!("DL Cp  statistic {:.4}  p {:.4}", dl.cp.statistic, dl.cp.p_value);
    println!("DL KS  statistic {:.4}  p {:.4}", dl.ks.statistic, dl.ks.p_value);
    println!("KS normality  D {:.4}  p {:.4}", ks.statistic, ks.p_value);
    println!("KS normality, estimated moments  D {:.4}  p {:.4}", lks.statistic, lks.p_value);
    match &report.srcp {
        Some(s) if s.root.near_unit_root => {
            println!("SRCP {:.4} (below {SRCP_THRESHOLD}: near unit root)", s.root.modulus)
        }
        Some(s) => println!("SRCP {:.4}", s.root.modulus),
        None => println!("SRCP: no AR part"),
    }
    println!(
        "in-sample RMSE {:.4}  MAPE {:.4}  MDA {:.4}",
        in_sample.rmse, in_sample.mape, in_sample.mda
    );
    Ok(exit::OK)
}

fn load_scenario(path: &Path, seed: Option<u64>, replicas: Option<usize>) -> CliResult<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut scn: Scenario = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: malformed scenario: {e}", path.display())))?;
    if let Some(s) = seed {
        scn.seed = s;
    }
    if let Some(m) = replicas {
        scn.n_replicas = m;
    }
    scn.validate()?;
    Ok(scn)
}

fn cmd_simulate(a: SimulateArgs) -> CliResult<i32> {
    let scn = load_scenario(&a.scenario, a.seed, None)?;
    let path = scn.simulate_replica(a.replica)?;
    let data = path.observed();
    let mu = path.observed_mu();
    let x = data.x();
    let mut w = csv::Writer::from_path(&a.out).map_err(|e| CliError::input(format!("{}: {e}", a.out.display())))?;
    let mut header = vec!["t".to_string(), "y".to_string(), "mu".to_string()];
    header.extend((1..=x.ncols()).map(|l| format!("x{l}")));
    w.write_record(&header)?;
    for t in 0..data.n() {
        let mut rec = vec![(t + 1).to_string(), data.y()[t].to_string(), mu[t].to_string()];
        rec.extend((0..x.ncols()).map(|l| x[(t, l)].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    println!("wrote {} observations to {}", data.n(), a.out.display());
    Ok(exit::OK)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_mc(a: McArgs) -> CliResult<i32> {
    let scn = load_scenario(&a.scenario, a.seed, a.replicas)?;
    let opts = FitOptions::default();
    if a.kind != McKind::Gof {
        let s = run_point_mc(&scn, &opts)?;
        write_csv(&with_suffix(&a.out_prefix, "_point.csv"), &s.rows)?;
        let text = s.to_string();
        write_text(&with_suffix(&a.out_prefix, "_point.txt"), &text)?;
        print!("{text}");
    }
    if a.kind != McKind::Point {
        let dl = DlConfig { bootstrap: a.bootstrap, ..DlConfig::default() };
        let s = run_gof_mc(&scn, &GofTest::ALL, &opts, &dl)?;
        write_csv(&with_suffix(&a.out_prefix, "_gof.csv"), &s.rows)?;
        let text = s.to_string();
        write_text(&with_suffix(&a.out_prefix, "_gof.txt"), &text)?;
        print!("{text}");
    }
    Ok(exit::OK)
}
