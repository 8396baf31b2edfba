//! Command-line driver: `synth`, `rates`, `fit` and `cancel-test`.
//!
//! Every stage reads and writes declared files only. Outputs are rendered in
//! memory first so a failing run leaves nothing behind.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::book::TickReference;
use crate::dist::{fit_family, DistError, DistributionFit, FamilyKind, FitOptions, ModelFamily};
use crate::feed::{decode_stream, Side};
use crate::rates::{
    arrival_density, extract_tallies, read_cancels_csv, read_rates_csv, write_cancels_csv,
    write_rates_csv, BucketKey, ExtractConfig, Granularity, CANCEL_TICKS,
};
use crate::stats::{chi_square_uniformity, l1_error, mean_sd, nps, welch_t_test, Tail, TestResult};
use crate::synth::{generate, SynthSpec};

#[derive(Debug)]
pub enum CliError {
    /// Bad input or arguments; exit code 1.
    Input(String),
    /// Anything else; exit code 2.
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Internal(m) => write!(f, "internal error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn input(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn internal(e: impl std::fmt::Display) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "lobrate", version, about = "Order book arrival-rate analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Same,
    Opposite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TailArg {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SideArg {
    Buy,
    Sell,
    Both,
}

impl SideArg {
    fn keeps(self, side: Side) -> bool {
        match self {
            SideArg::Buy => side == Side::Buy,
            SideArg::Sell => side == Side::Sell,
            SideArg::Both => true,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic LOBF stream and its ground truth.
    Synth {
        #[arg(long)]
        seed: Option<u64>,
        /// JSON spec; flags override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        days: Option<u16>,
        #[arg(long)]
        orders_per_day: Option<u32>,
        #[arg(long)]
        cancel_probability: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay LOBF input and write rates.csv and cancels.csv.
    Rates {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values = ["daily", "weekly", "monthly", "hourly"])]
        granularity: Vec<String>,
        #[arg(long, value_enum, default_value = "same")]
        reference: ReferenceArg,
        #[arg(long, default_value_t = 1)]
        tick_size: u32,
        /// Leave replace messages out of the tallies.
        #[arg(long)]
        exclude_replaces: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit every family to every instance of a rates CSV.
    Fit {
        rates: PathBuf,
        #[arg(long, value_delimiter = ',', default_values = ["geo", "dw", "bb", "exp", "pow"])]
        families: Vec<String>,
        #[arg(long, value_enum, default_value = "both")]
        side: SideArg,
        #[arg(long)]
        truncated_likelihood: bool,
        #[arg(long, value_enum, default_value = "two")]
        tail: TailArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chi-square uniformity test of per-tick cancellation ratios.
    CancelTest {
        cancels: PathBuf,
        #[arg(long, value_delimiter = ',', default_values = ["weekly", "monthly"])]
        granularity: Vec<String>,
        #[arg(long, value_enum, default_value = "both")]
        side: SideArg,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses arguments and runs one subcommand.
pub fn run<I, T>(args: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(input(e)),
    };
    execute(cli.command)
}

pub fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Synth {
            seed,
            spec,
            days,
            orders_per_day,
            cancel_probability,
            out,
        } => {
            let mut s = match spec {
                Some(path) => serde_json::from_str(&read_text(&path)?).map_err(input)?,
                None => SynthSpec::default(),
            };
            if let Some(v) = seed {
                s.seed = v;
            }
            if let Some(v) = days {
                s.days = v;
            }
            if let Some(v) = orders_per_day {
                s.orders_per_day = v;
            }
            if let Some(v) = cancel_probability {
                s.cancel_probability = v;
            }
            cmd_synth(&s, &out)
        }
        Command::Rates {
            inputs,
            granularity,
            reference,
            tick_size,
            exclude_replaces,
            out,
        } => {
            let config = ExtractConfig {
                granularities: parse_granularities(&granularity)?,
                reference: match reference {
                    ReferenceArg::Same => TickReference::SameSide,
                    ReferenceArg::Opposite => TickReference::OppositeSide,
                },
                tick_size,
                include_replaces: !exclude_replaces,
            };
            cmd_rates(&inputs, &config, &out)
        }
        Command::Fit {
            rates,
            families,
            side,
            truncated_likelihood,
            tail,
            out,
        } => {
            let config = FitConfig {
                families: parse_families(&families)?,
                side,
                options: FitOptions {
                    truncated_likelihood,
                    ..Default::default()
                },
                tail: match tail {
                    TailArg::One => Tail::Less,
                    TailArg::Two => Tail::Two,
                },
            };
            cmd_fit(&rates, &config, &out)
        }
        Command::CancelTest {
            cancels,
            granularity,
            side,
            out,
        } => cmd_cancel_test(&cancels, &parse_granularities(&granularity)?, side, &out),
    }
}

fn parse_granularities(names: &[String]) -> Result<Vec<Granularity>, CliError> {
    let mut out: Vec<Granularity> = Vec::new();
    for name in names {
        let g: Granularity = name.trim().parse().map_err(input)?;
        if !out.contains(&g) {
            out.push(g);
        }
    }
    if out.is_empty() {
        return Err(input("at least one granularity is required"));
    }
    Ok(out)
}

fn parse_families(names: &[String]) -> Result<Vec<FamilyKind>, CliError> {
    let mut out: Vec<FamilyKind> = Vec::new();
    for name in names {
        let f: FamilyKind = name.trim().parse().map_err(input)?;
        if !out.contains(&f) {
            out.push(f);
        }
    }
    if out.is_empty() {
        return Err(input("at least one family is required"));
    }
    // fixed order keeps outputs independent of flag order
    Ok(FamilyKind::ALL
        .into_iter()
        .filter(|f| out.contains(f))
        .collect())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>, CliError> {
    fs::read(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))
}

/// Writes all files or none of the ones not yet written: the directory is
/// created only once every output has been rendered.
fn write_outputs(dir: &Path, files: &[(&str, Vec<u8>)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| internal(format!("{}: {e}", dir.display())))?;
    for (name, bytes) in files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| internal(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> Result<(), CliError> {
    let (bytes, truth) = generate(spec).map_err(input)?;
    let json = serde_json::to_vec_pretty(&truth).map_err(internal)?;
    write_outputs(out, &[("stream.lobf", bytes), ("ground_truth.json", json)])
}

pub fn cmd_rates(inputs: &[PathBuf], config: &ExtractConfig, out: &Path) -> Result<(), CliError> {
    let mut frames = Vec::new();
    for path in inputs {
        let bytes = read_bytes(path)?;
        let decoded =
            decode_stream(&bytes).map_err(|e| input(format!("{}: {e}", path.display())))?;
        frames.extend(decoded);
    }
    if frames.is_empty() {
        return Err(input("input contains no frames"));
    }
    let store = extract_tallies(&frames, config).map_err(input)?;
    let d = &store.diagnostics;
    if d.dropped_arrivals + d.dropped_cancels + d.outside_hours > 0 {
        eprintln!(
            "note: {} arrivals beyond tick 15, {} cancels beyond tick 10, {} events outside trading hours were not tallied",
            d.dropped_arrivals, d.dropped_cancels, d.outside_hours
        );
    }
    let mut rates = Vec::new();
    write_rates_csv(&store, &mut rates).map_err(internal)?;
    let mut cancels = Vec::new();
    write_cancels_csv(&store, &mut cancels).map_err(internal)?;
    write_outputs(out, &[("rates.csv", rates), ("cancels.csv", cancels)])
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub families: Vec<FamilyKind>,
    pub side: SideArg,
    pub options: FitOptions,
    pub tail: Tail,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            families: FamilyKind::ALL.to_vec(),
            side: SideArg::Both,
            options: FitOptions::default(),
            tail: Tail::Two,
        }
    }
}

/// A comparison panel: families scored against each other and the Welch
/// contrast reported for it.
struct Panel {
    name: &'static str,
    families: [FamilyKind; 3],
    contrast: (FamilyKind, FamilyKind),
}

const PANELS: [Panel; 2] = [
    Panel {
        name: "discrete",
        families: [
            FamilyKind::Geometric,
            FamilyKind::DiscreteWeibull,
            FamilyKind::BetaBinomial,
        ],
        contrast: (FamilyKind::DiscreteWeibull, FamilyKind::BetaBinomial),
    },
    Panel {
        name: "continuous",
        families: [
            FamilyKind::Exponential,
            FamilyKind::DiscreteWeibull,
            FamilyKind::PowerLaw,
        ],
        contrast: (FamilyKind::DiscreteWeibull, FamilyKind::PowerLaw),
    },
];

/// Table rows: daily, weekly and hourly split by side, monthly pooled.
fn timestep(key: &BucketKey) -> String {
    let side = match key.side {
        Side::Buy => "buy",
        Side::Sell => "sell",
    };
    match key.bucket.granularity() {
        Granularity::Monthly => "monthly".to_string(),
        g => format!("{}_{side}", g.as_str()),
    }
}

const TIMESTEP_ORDER: [&str; 7] = [
    "daily_buy",
    "daily_sell",
    "weekly_buy",
    "weekly_sell",
    "monthly",
    "hourly_buy",
    "hourly_sell",
];

#[derive(Debug, Clone, Serialize)]
pub struct FitRecord {
    pub bucket_key: String,
    pub side: Side,
    pub family: FamilyKind,
    /// `ok`, `not_converged` or `failed`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tick_curve: Option<Vec<f64>>,
    pub boundary: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l1_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub instances: usize,
    pub families: Vec<FamilyKind>,
    pub truncated_likelihood: bool,
    pub records: Vec<FitRecord>,
}

struct InstanceFits {
    key: BucketKey,
    records: Vec<FitRecord>,
}

fn fit_instance(
    key: BucketKey,
    density: &[f64],
    config: &FitConfig,
) -> Result<InstanceFits, CliError> {
    let mut records = Vec::with_capacity(config.families.len());
    for &family in &config.families {
        let (status, fit, error): (_, Option<DistributionFit>, _) =
            match fit_family(density, family, &config.options) {
                Ok(fit) => ("ok", Some(fit), None),
                Err(DistError::NonConvergence(fit)) => ("not_converged", Some(*fit), None),
                Err(e) => ("failed", None, Some(e.to_string())),
            };
        let l1 = match &fit {
            Some(f) => Some(l1_error(density, f.tick_curve.as_slice()).map_err(internal)?),
            None => None,
        };
        records.push(FitRecord {
            bucket_key: key.bucket.to_string(),
            side: key.side,
            family,
            status,
            boundary: fit.as_ref().is_some_and(|f| f.boundary),
            objective: fit.as_ref().map(|f| f.objective),
            tick_curve: fit.as_ref().map(|f| f.tick_curve.as_slice().to_vec()),
            model: fit.map(|f| f.model),
            l1_error: l1,
            error,
        });
    }
    Ok(InstanceFits { key, records })
}

/// NPS per panel family for one instance; families without a fit are left out.
fn panel_nps(inst: &InstanceFits, panel: &Panel) -> Vec<(FamilyKind, f64, f64)> {
    let present: Vec<(FamilyKind, f64)> = panel
        .families
        .iter()
        .filter_map(|&f| {
            inst.records
                .iter()
                .find(|r| r.family == f)
                .and_then(|r| r.l1_error.map(|e| (f, e)))
        })
        .collect();
    let errors: Vec<f64> = present.iter().map(|(_, e)| *e).collect();
    present
        .iter()
        .zip(nps(&errors))
        .map(|(&(f, e), s)| (f, e, s))
        .collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn cmd_fit(rates: &Path, config: &FitConfig, out: &Path) -> Result<(), CliError> {
    let tallies = read_rates_csv(read_bytes(rates)?.as_slice()).map_err(input)?;
    let mut densities = Vec::new();
    for (key, tally) in tallies {
        if !config.side.keeps(key.side) || tally.total() == 0 {
            continue;
        }
        densities.push((key, arrival_density(&tally).map_err(input)?));
    }
    if densities.is_empty() {
        return Err(input("rates file has no instances"));
    }

    let fits: Vec<InstanceFits> = densities
        .par_iter()
        .map(|(key, d)| fit_instance(*key, d, config))
        .collect::<Result<_, _>>()?;
    let failed = fits
        .iter()
        .flat_map(|f| &f.records)
        .filter(|r| r.status != "ok")
        .count();
    if failed > 0 {
        eprintln!("warning: {failed} fits did not converge or failed; see fits.json");
    }

    let mut scores = String::from("bucket_key,side,panel,family,l1_error,nps\n");
    // (panel, timestep, family) -> NPS values
    let mut pooled: BTreeMap<(usize, String, FamilyKind), Vec<f64>> = BTreeMap::new();
    for inst in &fits {
        for (p, panel) in PANELS.iter().enumerate() {
            for (family, err, s) in panel_nps(inst, panel) {
                writeln!(
                    scores,
                    "{},{},{},{},{err},{s}",
                    inst.key.bucket,
                    inst.key.side,
                    panel.name,
                    family.short_name()
                )
                .expect("write to string");
                pooled
                    .entry((p, timestep(&inst.key), family))
                    .or_default()
                    .push(s);
            }
        }
    }

    let mut comparison = String::from("panel,timestep,family,instances,mean_nps,sd_nps,cell\n");
    let mut ttest =
        String::from("panel,timestep,comparison,tail,instances,t,df,p_value,zero_variance\n");
    let tail_name = match config.tail {
        Tail::Two => "two",
        Tail::Less => "one",
    };
    for (p, panel) in PANELS.iter().enumerate() {
        for ts in TIMESTEP_ORDER {
            for &family in &panel.families {
                let Some(values) = pooled.get(&(p, ts.to_string(), family)) else {
                    continue;
                };
                let (m, sd) = mean_sd(values);
                writeln!(
                    comparison,
                    "{},{ts},{},{},{m},{sd},{m:.3} +- {sd:.3}",
                    panel.name,
                    family.short_name(),
                    values.len()
                )
                .expect("write to string");
            }
            let (a, b) = panel.contrast;
            let (Some(xa), Some(xb)) = (
                pooled.get(&(p, ts.to_string(), a)),
                pooled.get(&(p, ts.to_string(), b)),
            ) else {
                continue;
            };
            let name = format!("{}_vs_{}", a.short_name(), b.short_name());
            match welch_t_test(xa, xb, config.tail) {
                Ok(TestResult {
                    statistic,
                    degrees_of_freedom,
                    p_value,
                    zero_variance,
                }) => writeln!(
                    ttest,
                    "{},{ts},{name},{tail_name},{},{statistic},{degrees_of_freedom},{p_value},{zero_variance}",
                    panel.name,
                    xa.len()
                )
                .expect("write to string"),
                Err(e) => eprintln!("warning: no t-test for {} {ts}: {e}", panel.name),
            }
        }
    }

    let report = FitReport {
        instances: fits.len(),
        families: config.families.clone(),
        truncated_likelihood: config.options.truncated_likelihood,
        records: fits.into_iter().flat_map(|f| f.records).collect(),
    };
    let json = serde_json::to_vec_pretty(&report).map_err(internal)?;
    write_outputs(
        out,
        &[
            ("fits.json", json),
            ("scores.csv", scores.into_bytes()),
            ("comparison.csv", comparison.into_bytes()),
            ("ttest.csv", ttest.into_bytes()),
        ],
    )
}

pub fn cmd_cancel_test(
    cancels: &Path,
    granularities: &[Granularity],
    side: SideArg,
    out: &Path,
) -> Result<(), CliError> {
    let summaries = read_cancels_csv(read_bytes(cancels)?.as_slice()).map_err(input)?;
    let mut long = String::from("bucket_key,side,chi2,df,p_value\n");
    // bucket -> (buy, sell)
    let mut wide: BTreeMap<String, [Option<TestResult>; 2]> = BTreeMap::new();
    for (key, summary) in &summaries {
        if !granularities.contains(&key.bucket.granularity()) || !side.keeps(key.side) {
            continue;
        }
        let Some(ratios) = summary
            .mean_ratio
            .iter()
            .copied()
            .collect::<Option<Vec<f64>>>()
        else {
            let missing = summary.mean_ratio.iter().filter(|r| r.is_none()).count();
            eprintln!(
                "warning: skipping {} {}: {missing} of {CANCEL_TICKS} ticks have no cancels",
                key.bucket, key.side
            );
            continue;
        };
        let result = match chi_square_uniformity(&ratios) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("warning: skipping {} {}: {e}", key.bucket, key.side);
                continue;
            }
        };
        writeln!(
            long,
            "{},{},{},{},{}",
            key.bucket, key.side, result.statistic, result.degrees_of_freedom, result.p_value
        )
        .expect("write to string");
        let slot = match key.side {
            Side::Buy => 0,
            Side::Sell => 1,
        };
        wide.entry(key.bucket.to_string()).or_default()[slot] = Some(result);
    }
    let mut table = String::from("timestep,chi2_buy,chi2_sell,p_buy,p_sell\n");
    for (bucket, [buy, sell]) in &wide {
        writeln!(
            table,
            "{bucket},{},{},{},{}",
            fmt_opt(buy.map(|r| r.statistic)),
            fmt_opt(sell.map(|r| r.statistic)),
            fmt_opt(buy.map(|r| r.p_value)),
            fmt_opt(sell.map(|r| r.p_value)),
        )
        .expect("write to string");
    }
    write_outputs(
        out,
        &[
            ("chi_square.csv", long.into_bytes()),
            ("chi_square_table.csv", table.into_bytes()),
        ],
    )
}
