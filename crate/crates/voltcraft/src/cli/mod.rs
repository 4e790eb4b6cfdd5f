//! Command-line front end: flag and config parsing, dispatch, report formatting.

mod output;
mod payoff_spec;

pub use output::{format_float, to_json, to_table};
pub use payoff_spec::parse_payoff;

use crate::analytic::{bs_payoff_delta, bs_payoff_price, implied_volatility, BsParams};
use crate::calibration::{
    calibrate_tikhonov, dupire_local_vol, screen_quotes, CalibrationProblem, PenaltyMode, PriceSurface,
};
use crate::error::{Error, Result};
use crate::market::{read_quotes, MarketState, OptionKind, OptionQuote, QuoteSurface, RateCurve};
use crate::mc::{
    mc_price, simulate_delta_hedge, simulate_paths, HedgeSpec, McEstimate, PathModel, SimulationSpec, StochasticVol,
    Variance,
};
use crate::pde::{solve_backward_pricing, LocalVolSurface, PdeGrid, VolBand, DEFAULT_VOL_FLOOR};
use crate::risk::{
    check_axioms, coherent_risk, entropic_risk, expected_shortfall, value_at_risk, RiskMeasure, RiskReport, RiskSample,
    ScenarioFamily,
};
use crate::superrep::{
    superrep_band, superrep_calibration_constrained_with, superrep_unbounded_vol, ConstraintMode, Hedge,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser, Debug)]
#[command(name = "voltcraft", version, about = "Option pricing, volatility calibration, super-replication and risk")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON file supplying defaults for the command's flags (same key names).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output file, `-` for standard output.
    #[arg(long, global = true, default_value = "-")]
    pub output: String,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Worker threads for parallel sections.
    #[arg(long, global = true, env = "VOLTCRAFT_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Price a European payoff analytically, by PDE or by Monte Carlo.
    Price(PriceArgs),
    /// Implied volatility of one price or of a quotes file.
    ImpliedVol(ImpliedVolArgs),
    /// Calibrate local volatility to a quotes file.
    Calibrate(CalibrateArgs),
    /// Super-replication price and hedge.
    Superrep(SuperrepArgs),
    /// Risk measures of a P&L sample.
    Risk(RiskArgs),
    /// Discrete delta-hedging experiment.
    Hedge(HedgeArgs),
    /// Simulate price paths.
    Simulate(SimulateArgs),
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct MarketArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spot: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t0: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct PriceArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub market: MarketArgs,
    /// analytic, pde, mc or all.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
    /// `call:K`, `put:K`, `butterfly:K1,K2,K3`, `capped:K` or `pwl:@file.csv`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_nodes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub control_variate: Option<bool>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct ImpliedVolArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub market: MarketArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    /// call or put.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// Quotes CSV (`maturity,strike,kind,price,weight`) instead of a single price.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quotes: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct CalibrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub market: MarketArgs,
    /// dupire, tikhonov or avellaneda.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quotes: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_vol: Option<f64>,
    /// Prior volatility for the avellaneda mode (defaults to the initial volatility).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prior_vol: Option<f64>,
    /// Comma-separated knot times; defaults to 0 and the quoted maturities.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knot_times: Option<String>,
    /// Comma-separated knot prices; defaults to five points across the strikes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knot_prices: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_nodes: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SuperrepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub market: MarketArgs,
    /// envelope, band or lp.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time_steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space_nodes: Option<usize>,
    /// Call-price constraints for the lp mode.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quotes: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_min: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub support_max: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub atoms: Option<usize>,
    /// equality, tolerance or at-most.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub constraint_mode: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct RiskArgs {
    /// P&L CSV with a `pnl` column and optional `prob` column.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// var, es, entropic, coherent or all.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    /// JSON array of probability vectors over the outcomes.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<PathBuf>,
    /// Number of randomized axiom trials; none when absent.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub axioms: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct HedgeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub market: MarketArgs,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub payoff: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vol: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rebalances: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Real-world drift; defaults to the rate.
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    /// Level of the reported VaR of the hedging error.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", default)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub market: MarketArgs,
    /// gbm, local-vol or stoch-vol.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vol: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    /// Local volatility surface JSON for the local-vol model.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub surface: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub maturity: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub antithetic: Option<bool>,
}

/// Command result: a JSON report, an optional CSV rendering and the exit code.
struct Output {
    json: Value,
    csv: Option<Vec<u8>>,
    code: i32,
}

impl Output {
    fn json(json: Value) -> Self {
        Output { json, csv: None, code: 0 }
    }
}

fn need<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::invalid(format!("missing --{flag}")))
}

/// Config values under the flags given on the command line.
fn resolve<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Value>) -> Result<T> {
    let Some(cfg) = config else {
        return Ok(flags);
    };
    let mut merged = cfg
        .as_object()
        .cloned()
        .ok_or_else(|| Error::invalid("config file must hold a JSON object"))?;
    if let Value::Object(given) = serde_json::to_value(&flags)? {
        merged.extend(given);
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::invalid(format!("config: {e}")))
}

fn market(m: &MarketArgs) -> Result<MarketState> {
    let rate = m.rate.unwrap_or(0.0);
    if !rate.is_finite() {
        return Err(Error::invalid("--rate must be finite"));
    }
    MarketState::new(m.t0.unwrap_or(0.0), need(m.spot, "spot")?, RateCurve::flat(rate))
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| Error::invalid(format!("cannot open {}: {e}", path.display())))
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::invalid(format!("--{flag}: `{v}` is not a number")))
        })
        .collect()
}

fn estimate_json(e: &McEstimate) -> Value {
    serde_json::to_value(e).expect("estimate serializes")
}

fn cmd_price(a: PriceArgs) -> Result<Output> {
    let mk = market(&a.market)?;
    let payoff = parse_payoff(a.payoff.as_deref().unwrap_or("call"), a.strike)?;
    let vol = need(a.vol, "vol")?;
    let maturity = need(a.maturity, "maturity")?;
    if !(maturity > 0.0) {
        return Err(Error::invalid(format!("--maturity must be positive, got {maturity}")));
    }
    let rate = mk.average_rate(mk.t0 + maturity);
    let analytic = || -> Result<Value> {
        let p = BsParams::new(mk.x0, 1.0, maturity, rate, vol)?;
        Ok(json!({
            "engine": "analytic",
            "price": bs_payoff_price(&payoff, &p),
            "delta": bs_payoff_delta(&payoff, &p),
        }))
    };
    let pde = || -> Result<(Value, Vec<u8>)> {
        if !(vol >= DEFAULT_VOL_FLOOR) {
            return Err(Error::invalid(format!(
                "--vol {vol} is below the PDE volatility floor sigma_floor = {DEFAULT_VOL_FLOOR}"
            )));
        }
        let grid = PdeGrid::new(a.time_steps.unwrap_or(200), a.space_nodes.unwrap_or(400))?;
        let sol = solve_backward_pricing(&mk, &LocalVolSurface::flat(vol)?, &payoff, maturity, &grid)?;
        let mut csv = Vec::new();
        sol.write_csv(&mut csv)?;
        Ok((
            json!({
                "engine": "pde",
                "price": sol.price(),
                "delta": sol.spot_delta(),
                "grid": {"time_steps": grid.time_steps, "space_nodes": grid.space_nodes},
            }),
            csv,
        ))
    };
    let mc = || -> Result<Value> {
        let spec = SimulationSpec::new(maturity, a.paths.unwrap_or(100_000), a.seed.unwrap_or(0))
            .with_steps(1)
            .with_antithetic(a.antithetic.unwrap_or(false));
        let batch = simulate_paths(&mk, &PathModel::gbm(vol), &spec)?;
        let variance = if a.control_variate.unwrap_or(false) {
            Variance::ControlVariate
        } else {
            Variance::Plain
        };
        let est = mc_price(&batch, &payoff, variance)?;
        Ok(json!({
            "engine": "mc",
            "price": est.mean,
            "estimate": estimate_json(&est),
            "seed": spec.seed,
        }))
    };
    match a.engine.as_deref().unwrap_or("analytic") {
        "analytic" => Ok(Output::json(analytic()?)),
        "pde" => {
            let (json, csv) = pde()?;
            Ok(Output {
                json,
                csv: Some(csv),
                code: 0,
            })
        }
        "mc" => Ok(Output::json(mc()?)),
        "all" => {
            let (an, (pd, _), m) = (analytic()?, pde()?, mc()?);
            let p = |v: &Value| v["price"].as_f64().unwrap_or(f64::NAN);
            let gaps = json!({
                "pde_analytic": p(&pd) - p(&an),
                "mc_analytic": p(&m) - p(&an),
                "mc_pde": p(&m) - p(&pd),
            });
            Ok(Output::json(json!({"analytic": an, "pde": pd, "mc": m, "gaps": gaps})))
        }
        other => Err(Error::invalid(format!("unknown --engine `{other}`; expected analytic, pde, mc or all"))),
    }
}

fn parse_kind(kind: Option<&str>) -> Result<OptionKind> {
    match kind.unwrap_or("call") {
        "call" | "C" | "c" => Ok(OptionKind::Call),
        "put" | "P" | "p" => Ok(OptionKind::Put),
        other => Err(Error::invalid(format!("unknown --kind `{other}`; expected call or put"))),
    }
}

fn cmd_implied_vol(a: ImpliedVolArgs) -> Result<Output> {
    let mk = market(&a.market)?;
    if let Some(path) = &a.quotes {
        let quotes = read_quotes(open(path)?, mk.clone())?;
        let rows: Vec<Value> = quotes
            .quotes()
            .iter()
            .map(|q| {
                let mut row = json!({
                    "T": q.maturity,
                    "K": q.strike,
                    "kind": if q.kind == OptionKind::Call { "call" } else { "put" },
                    "price": q.price,
                });
                match implied_volatility(&mk, q) {
                    Ok(v) => row["implied_vol"] = json!(v),
                    Err(e) => row["error"] = json!(e.to_string()),
                }
                row
            })
            .collect();
        return Ok(Output::json(json!({ "quotes": rows })));
    }
    let quote = OptionQuote {
        maturity: mk.t0 + need(a.maturity, "maturity")?,
        strike: need(a.strike, "strike")?,
        kind: parse_kind(a.kind.as_deref())?,
        price: need(a.price, "price")?,
        weight: 1.0,
    };
    let v = implied_volatility(&mk, &quote)?;
    Ok(Output::json(json!({ "implied_vol": v })))
}

fn default_knot_prices(quotes: &QuoteSurface) -> Vec<f64> {
    let lo = quotes.quotes().iter().map(|q| q.strike).fold(f64::INFINITY, f64::min);
    let hi = quotes.quotes().iter().map(|q| q.strike).fold(0.0, f64::max);
    let (lo, hi) = if hi > lo { (lo, hi) } else { (0.8 * lo, 1.2 * lo) };
    (0..5).map(|i| lo + (hi - lo) * i as f64 / 4.0).collect()
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<Output> {
    let mk = market(&a.market)?;
    let quotes = read_quotes(open(&need(a.quotes.clone(), "quotes")?)?, mk.clone())?;
    let mode = a.mode.as_deref().unwrap_or("tikhonov");
    if mode == "dupire" {
        return calibrate_dupire(&mk, &quotes);
    }
    if mode != "tikhonov" && mode != "avellaneda" {
        return Err(Error::invalid(format!("unknown --mode `{mode}`; expected dupire, tikhonov or avellaneda")));
    }
    let times = match &a.knot_times {
        Some(s) => parse_list(s, "knot-times")?,
        None => std::iter::once(mk.t0).chain(quotes.maturities()).collect(),
    };
    let prices = match &a.knot_prices {
        Some(s) => parse_list(s, "knot-prices")?,
        None => default_knot_prices(&quotes),
    };
    let initial_vol = a.initial_vol.unwrap_or(0.2);
    let flat = |v: f64| LocalVolSurface::new(times.clone(), prices.clone(), vec![vec![v; prices.len()]; times.len()]);
    let initial = flat(initial_vol)?;
    let mut problem = CalibrationProblem::new(quotes, initial)?
        .with_alpha(a.alpha.unwrap_or(1e-3))?
        .with_grid(PdeGrid::new(a.time_steps.unwrap_or(100), a.space_nodes.unwrap_or(160))?);
    if let Some(n) = a.max_iterations {
        problem = problem.with_max_iterations(n);
    }
    if mode == "avellaneda" {
        problem = problem.with_penalty(PenaltyMode::PriorDistance(flat(a.prior_vol.unwrap_or(initial_vol))?));
    }
    let report = calibrate_tikhonov(&problem)?;
    let mut json = serde_json::to_value(&report)?;
    json["mode"] = json!(mode);
    Ok(Output::json(json))
}

fn calibrate_dupire(mk: &MarketState, quotes: &QuoteSurface) -> Result<Output> {
    let (_, violations) = screen_quotes(quotes);
    if !violations.is_empty() {
        let json = json!({
            "error": "quotes violate static no-arbitrage",
            "violations": violations
                .iter()
                .map(|v| {
                    let q = &quotes.quotes()[v.index];
                    json!({"index": v.index, "T": q.maturity, "K": q.strike, "kind": v.kind, "amount": v.amount})
                })
                .collect::<Vec<_>>(),
        });
        return Ok(Output { json, csv: None, code: 3 });
    }
    let ts = quotes.maturities();
    let mut ks: Vec<f64> = quotes.quotes().iter().map(|q| q.strike).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let mut values = vec![vec![f64::NAN; ks.len()]; ts.len()];
    for q in quotes.quotes() {
        let i = ts.iter().position(|t| *t == q.maturity).expect("maturity listed");
        let j = ks.iter().position(|k| *k == q.strike).expect("strike listed");
        values[i][j] = q.call_equivalent(mk);
    }
    if values.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::invalid("dupire mode needs a quote at every maturity and strike of the grid"));
    }
    let out = dupire_local_vol(&PriceSurface::new(mk.clone(), ts, ks, values)?)?;
    Ok(Output::json(json!({
        "mode": "dupire",
        "surface": serde_json::to_value(&out.surface)?,
        "invalid_nodes": out.invalid_nodes,
        "reasons": out.reasons,
    })))
}

fn cmd_superrep(a: SuperrepArgs) -> Result<Output> {
    let mk = market(&a.market)?;
    let payoff = parse_payoff(a.payoff.as_deref().unwrap_or("call"), a.strike)?;
    match a.mode.as_deref().unwrap_or("envelope") {
        "envelope" => {
            let r = superrep_unbounded_vol(&mk, &payoff)?;
            let Hedge::Static(h) = &r.hedge else {
                unreachable!("envelope hedges are static")
            };
            Ok(Output::json(json!({"mode": "envelope", "price": r.price, "delta": h.shares, "cash": h.cash})))
        }
        "band" => {
            let band = VolBand::constant(need(a.sigma_min, "sigma-min")?, need(a.sigma_max, "sigma-max")?)?;
            let grid = PdeGrid::new(a.time_steps.unwrap_or(200), a.space_nodes.unwrap_or(400))?;
            let r = superrep_band(&mk, &band, &payoff, need(a.maturity, "maturity")?, &grid)?;
            let Hedge::Dynamic { delta } = r.hedge else {
                unreachable!("band hedges are dynamic")
            };
            Ok(Output::json(json!({"mode": "band", "price": r.price, "delta": delta})))
        }
        "lp" => {
            let constraints = match &a.quotes {
                Some(p) => read_quotes(open(p)?, mk.clone())?,
                None => QuoteSurface::empty(mk.clone()),
            };
            let lo = a.support_min.unwrap_or(mk.x0 / 10.0);
            let hi = a.support_max.unwrap_or(mk.x0 * 10.0);
            let n = a.atoms.unwrap_or(2001);
            if !(lo > 0.0 && hi > lo && n >= 2) {
                return Err(Error::invalid("support needs 0 < support-min < support-max and at least two atoms"));
            }
            let support: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
            let mode = match a.constraint_mode.as_deref().unwrap_or("tolerance") {
                "equality" => ConstraintMode::Equality,
                "tolerance" => ConstraintMode::Tolerance(a.epsilon.unwrap_or(1e-6 * mk.x0)),
                "at-most" => ConstraintMode::AtMost,
                other => {
                    return Err(Error::invalid(format!(
                        "unknown --constraint-mode `{other}`; expected equality, tolerance or at-most"
                    )))
                }
            };
            let r = superrep_calibration_constrained_with(&mk, &constraints, &payoff, &support, mode)?;
            let mut json = serde_json::to_value(r.lp_report().expect("lp results carry a report"))?;
            json["mode"] = json!("lp");
            json["duality_gap"] = json!(r.duality_gap);
            Ok(Output::json(json))
        }
        other => Err(Error::invalid(format!("unknown --mode `{other}`; expected envelope, band or lp"))),
    }
}

fn cmd_risk(a: RiskArgs) -> Result<Output> {
    let sample = RiskSample::read_csv(open(&need(a.input.clone(), "input")?)?)?;
    let level = a.level.unwrap_or(0.95);
    let lambda = a.lambda.unwrap_or(1.0);
    let family = match &a.scenarios {
        Some(p) => {
            let measures: Vec<Vec<f64>> = serde_json::from_reader(open(p)?)?;
            Some(ScenarioFamily::new(measures)?)
        }
        None => None,
    };
    let seed = a.seed.unwrap_or(0);
    let measure = a.measure.as_deref().unwrap_or("all");
    let measures: Vec<(&str, RiskMeasure)> = {
        let mut v = vec![
            ("var", RiskMeasure::ValueAtRisk { level }),
            ("es", RiskMeasure::ExpectedShortfall { level }),
            ("entropic", RiskMeasure::Entropic { aversion: lambda }),
        ];
        if let Some(f) = &family {
            v.push(("coherent", RiskMeasure::Coherent(f.clone())));
        }
        v
    };
    let axioms = |keys: &[&str]| -> Result<serde_json::Map<String, Value>> {
        let mut out = serde_json::Map::new();
        if let Some(trials) = a.axioms {
            for (k, m) in measures.iter().filter(|(k, _)| keys.contains(k)) {
                out.insert(k.to_string(), serde_json::to_value(check_axioms(m, trials, seed)?)?);
            }
        }
        Ok(out)
    };
    let value = match measure {
        "all" => {
            let mut report = serde_json::to_value(RiskReport::compute(&sample, level, lambda, family.as_ref())?)?;
            report["axioms"] = Value::Object(axioms(&["var", "es", "entropic", "coherent"])?);
            return Ok(Output::json(report));
        }
        "var" => value_at_risk(&sample, level)?,
        "es" => expected_shortfall(&sample, level)?,
        "entropic" => entropic_risk(&sample, lambda)?,
        "coherent" => {
            let f = family
                .as_ref()
                .ok_or_else(|| Error::invalid("coherent measure needs --scenarios"))?;
            let r = coherent_risk(sample.outcomes(), f)?;
            let mut json = json!({"measure": "coherent", "value": r.value, "witness_index": r.witness_index});
            json["axioms"] = Value::Object(axioms(&["coherent"])?);
            return Ok(Output::json(json));
        }
        other => {
            return Err(Error::invalid(format!(
                "unknown --measure `{other}`; expected var, es, entropic, coherent or all"
            )))
        }
    };
    let mut json = json!({"measure": measure, "level": level, "value": value});
    if measure == "entropic" {
        json["lambda"] = json!(lambda);
    }
    json["axioms"] = Value::Object(axioms(&[measure])?);
    Ok(Output::json(json))
}

fn cmd_hedge(a: HedgeArgs) -> Result<Output> {
    let mk = market(&a.market)?;
    let payoff = parse_payoff(a.payoff.as_deref().unwrap_or("call"), a.strike.or(Some(mk.x0)))?;
    let mut spec = HedgeSpec::new(
        need(a.vol, "vol")?,
        need(a.maturity, "maturity")?,
        a.rebalances.unwrap_or(16),
        a.paths.unwrap_or(10_000),
        a.seed.unwrap_or(0),
    );
    spec.drift = a.drift;
    let e = simulate_delta_hedge(&mk, &payoff, &spec)?;
    let level = a.level.unwrap_or(0.95);
    let var = value_at_risk(&RiskSample::new(e.errors.clone())?, level)?;
    let mut json = serde_json::to_value(&e)?;
    json["level"] = json!(level);
    json["var"] = json!(var);
    Ok(Output::json(json))
}

fn cmd_simulate(a: SimulateArgs) -> Result<Output> {
    let mk = market(&a.market)?;
    let model_name = a.model.as_deref().unwrap_or("gbm");
    let model = match model_name {
        "gbm" => PathModel::Gbm {
            sigma: need(a.vol, "vol")?,
            mu: a.drift,
        },
        "local-vol" => {
            let surface: LocalVolSurface = serde_json::from_reader(open(&need(a.surface.clone(), "surface")?)?)?;
            PathModel::LocalVol(surface)
        }
        "stoch-vol" => PathModel::StochasticVol(StochasticVol {
            y0: a.vol.unwrap_or(0.2),
            kappa: a.kappa.unwrap_or(1.0),
            theta: a.theta.unwrap_or(a.vol.unwrap_or(0.2)),
            nu: a.nu.unwrap_or(0.3),
            rho: a.rho.unwrap_or(0.0),
        }),
        other => {
            return Err(Error::invalid(format!(
                "unknown --model `{other}`; expected gbm, local-vol or stoch-vol"
            )))
        }
    };
    let maturity = need(a.maturity, "maturity")?;
    let mut spec = SimulationSpec::new(maturity, a.paths.unwrap_or(1000), a.seed.unwrap_or(0))
        .with_antithetic(a.antithetic.unwrap_or(false));
    if let Some(m) = a.steps {
        spec = spec.with_steps(m);
    }
    let batch = simulate_paths(&mk, &model, &spec)?;
    let terminals = batch.terminals();
    let df = mk.discount_to(mk.t0 + maturity);
    let discounted: Vec<f64> = terminals.iter().map(|x| df * x).collect();
    let mut csv = Vec::new();
    batch.write_csv(&mut csv)?;
    Ok(Output {
        json: json!({
            "model": model_name,
            "paths": batch.len(),
            "steps": batch.steps(),
            "seed": batch.seed(),
            "terminal": estimate_json(&McEstimate::from_samples(&terminals)),
            "discounted_terminal": estimate_json(&McEstimate::from_samples(&discounted)),
        }),
        csv: Some(csv),
        code: 0,
    })
}

fn execute(cli: Cli) -> Result<i32> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be at least 1"));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let config: Option<Value> = match &cli.config {
        Some(p) => Some(serde_json::from_reader(open(p)?)?),
        None => None,
    };
    let cfg = config.as_ref();
    let default_format = match cli.command {
        Command::Simulate(_) => Format::Csv,
        _ => Format::Json,
    };
    let out = match cli.command {
        Command::Price(a) => cmd_price(resolve(a, cfg)?)?,
        Command::ImpliedVol(a) => cmd_implied_vol(resolve(a, cfg)?)?,
        Command::Calibrate(a) => cmd_calibrate(resolve(a, cfg)?)?,
        Command::Superrep(a) => cmd_superrep(resolve(a, cfg)?)?,
        Command::Risk(a) => cmd_risk(resolve(a, cfg)?)?,
        Command::Hedge(a) => cmd_hedge(resolve(a, cfg)?)?,
        Command::Simulate(a) => cmd_simulate(resolve(a, cfg)?)?,
    };
    let bytes = match cli.format.unwrap_or(default_format) {
        Format::Json => to_json(&out.json).into_bytes(),
        Format::Table => to_table(&out.json, 12).into_bytes(),
        Format::Csv => out
            .csv
            .ok_or_else(|| Error::invalid("csv output is available for `price --engine pde` and `simulate` only"))?,
    };
    if cli.output == "-" {
        let mut stdout = std::io::stdout().lock();
        stdout.write_all(&bytes)?;
        stdout.flush()?;
    } else {
        std::fs::write(&cli.output, &bytes)?;
    }
    Ok(out.code)
}

/// Runs the command line and returns the process exit code:
/// 0 on success, 2 for invalid input, 3 for numerical failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                3
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let flags = PriceArgs {
            strike: Some(90.0),
            ..Default::default()
        };
        let cfg = json!({"strike": 100.0, "vol": 0.3, "spot": 100.0});
        let merged = resolve(flags, Some(&cfg)).unwrap();
        assert_eq!(merged.strike, Some(90.0));
        assert_eq!(merged.vol, Some(0.3));
        assert_eq!(merged.market.spot, Some(100.0));
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
