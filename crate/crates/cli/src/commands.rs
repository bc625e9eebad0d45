use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use gtwc_core::compose::compose_alternate;
use gtwc_core::designer::{design_sum_error, golden_alpha, no_feedback_design, ErrorMetric, SearchConfig};
use gtwc_core::eval::{
    append_csv, ol_lower_bound, simulate_alternate, simulate_linear, simulate_repetition, SimOptions, SimResult,
};
use gtwc_core::oracle::exhaustive_minmax_power;
use gtwc_core::{ChannelConfig, Constellation, DesignSolution, TOOL_VERSION};
use serde_json::json;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Bad combination of flags that clap cannot catch on its own.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Metric {
    Bler,
    Ber,
}

impl From<Metric> for ErrorMetric {
    fn from(m: Metric) -> Self {
        match m {
            Metric::Bler => ErrorMetric::Bler,
            Metric::Ber => ErrorMetric::Ber,
        }
    }
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Number of η₂ grid points.
    #[arg(long = "eta2-grid", default_value_t = 40)]
    eta2_grid: usize,
    #[arg(long, value_enum, default_value_t = Metric::Bler)]
    metric: Metric,
    /// Random F₂ starts per weighted-power solve.
    #[arg(long, default_value_t = 2)]
    n_inits: usize,
    /// Per-user energy budget; defaults to N·P.
    #[arg(long)]
    budget: Option<f64>,
}

impl SearchArgs {
    fn config(&self) -> SearchConfig {
        SearchConfig {
            eta2_grid_size: self.eta2_grid,
            metric: self.metric.into(),
            n_inits: self.n_inits,
            budget: self.budget,
            ..SearchConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct DesignArgs {
    #[arg(long, allow_hyphen_values = true)]
    snr1_db: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr2_db: f64,
    /// Channel uses per block.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k1: usize,
    #[arg(long)]
    k2: usize,
    /// Per-use power P.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    search: SearchArgs,
    /// Where to write the design JSON.
    #[arg(long)]
    out: PathBuf,
}

pub fn design(a: DesignArgs) -> Result<()> {
    let cfg = ChannelConfig::from_snr_db(a.snr1_db, a.snr2_db, a.n, a.p)?;
    Constellation::new(a.k1)?;
    Constellation::new(a.k2)?;
    let d = design_sum_error(&cfg, a.k1, a.k2, &a.search.config(), a.seed)?;
    d.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    println!(
        "{}",
        json!({
            "eta1": d.eta1,
            "eta2": d.eta2,
            "alpha": d.alpha,
            "power1": d.power1,
            "power2": d.power2,
            "predicted_sum_bler": d.predicted_sum_bler(),
        })
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct SimArgs {
    /// Trials (message pairs) per configuration.
    #[arg(long, default_value_t = 10_000_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stop once both users reach this many block errors; 0 disables.
    #[arg(long, default_value_t = 1000)]
    early_stop: u64,
    /// Run with the channel noise set to zero.
    #[arg(long)]
    noiseless: bool,
}

impl SimArgs {
    fn options(&self) -> SimOptions {
        SimOptions {
            trials: self.trials,
            seed: self.seed,
            early_stop: (self.early_stop > 0).then_some(self.early_stop),
            noiseless: self.noiseless,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Design JSON files; one CSV row each.
    #[arg(long, required = true, num_args = 1..)]
    design: Vec<PathBuf>,
    #[command(flatten)]
    sim: SimArgs,
    /// Interleave two copies of each design over 2n uses.
    #[arg(long)]
    alternate: bool,
    /// CSV file to append to.
    #[arg(long)]
    out: PathBuf,
}

fn simulate_design(d: &DesignSolution, alternate: bool, opts: &SimOptions) -> Result<SimResult> {
    let c1 = Constellation::new(d.k1)?;
    let c2 = Constellation::new(d.k2)?;
    Ok(if alternate {
        let plan = compose_alternate(d, d)?;
        simulate_alternate(&plan, &c1, &c2, opts)?
    } else {
        simulate_linear(d, &c1, &c2, opts)?
    })
}

pub fn simulate(a: SimulateArgs) -> Result<()> {
    let opts = a.sim.options();
    let mut rows = Vec::new();
    for path in &a.design {
        let d = DesignSolution::load(path).with_context(|| format!("reading {}", path.display()))?;
        rows.push(simulate_design(&d, a.alternate, &opts)?.to_row());
    }
    append_csv(&a.out, &rows)?;
    write_meta(&a.out, a.sim.seed)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    /// Designed linear feedback scheme.
    Linear,
    /// Each user sends its message once at full block energy.
    NoFeedback,
    /// BPSK repetition of the K bits.
    Repetition,
}

impl SchemeKind {
    fn label(self) -> &'static str {
        match self {
            SchemeKind::Linear => "linear",
            SchemeKind::NoFeedback => "no-feedback",
            SchemeKind::Repetition => "repetition",
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, allow_hyphen_values = true)]
    snr1_db: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr2_from: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr2_to: f64,
    #[arg(long, default_value_t = 1.0)]
    snr2_step: f64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "linear")]
    schemes: Vec<SchemeKind>,
    #[arg(long)]
    n: usize,
    /// Bits per message for both users.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[command(flatten)]
    search: SearchArgs,
    #[command(flatten)]
    sim: SimArgs,
    #[arg(long)]
    out: PathBuf,
    /// Directory for two-column (snr2_db, sum_bler) curve files, one per scheme.
    #[arg(long)]
    emit_curves: Option<PathBuf>,
}

fn snr_points(from: f64, to: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !from.is_finite() || !to.is_finite() || from > to {
        return Err(usage(format!("empty SNR range {from}..{to} step {step}")));
    }
    let count = ((to - from) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| from + i as f64 * step).collect())
}

pub fn sweep(a: SweepArgs) -> Result<()> {
    let points = snr_points(a.snr2_from, a.snr2_to, a.snr2_step)?;
    if a.schemes.is_empty() {
        return Err(usage("no schemes requested"));
    }
    let opts = a.sim.options();
    let search = a.search.config();
    let mut rows = Vec::new();
    let mut curves: Vec<(SchemeKind, Vec<(f64, f64)>)> = a.schemes.iter().map(|&s| (s, Vec::new())).collect();
    for &snr2 in &points {
        let cfg = ChannelConfig::from_snr_db(a.snr1_db, snr2, a.n, a.p)?;
        for (kind, curve) in curves.iter_mut() {
            let r = match kind {
                SchemeKind::Linear => {
                    let d = design_sum_error(&cfg, a.k, a.k, &search, a.sim.seed)?;
                    simulate_design(&d, false, &opts)?
                }
                SchemeKind::NoFeedback => {
                    let budget = search.budget(&cfg);
                    let d = no_feedback_design(&cfg, a.k, a.k, budget, a.sim.seed)?;
                    let mut r = simulate_design(&d, false, &opts)?;
                    r.scheme = kind.label().into();
                    r
                }
                SchemeKind::Repetition => {
                    if a.n % a.k != 0 {
                        return Err(usage(format!("repetition needs K | N, got K={} N={}", a.k, a.n)));
                    }
                    simulate_repetition(&cfg, a.k, a.n / a.k, &opts)?
                }
            };
            curve.push((snr2, r.sum_bler()));
            rows.push(r.to_row());
        }
    }
    append_csv(&a.out, &rows)?;
    write_meta(&a.out, a.sim.seed)?;
    if let Some(dir) = &a.emit_curves {
        std::fs::create_dir_all(dir)?;
        for (kind, curve) in &curves {
            let path = dir.join(format!("{}.dat", kind.label()));
            let mut f = std::fs::File::create(&path)?;
            writeln!(f, "# {TOOL_VERSION}")?;
            writeln!(f, "# snr2_db sum_bler")?;
            for (x, y) in curve {
                writeln!(f, "{x} {y:.5e}")?;
            }
        }
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct BaselinesArgs {
    #[arg(long, allow_hyphen_values = true)]
    snr1_db: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr2_db: f64,
    /// Payload bits per user.
    #[arg(long)]
    l: usize,
    /// Channel uses for the whole payload.
    #[arg(long)]
    n_total: usize,
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[command(flatten)]
    sim: SimArgs,
    /// CSV file for the repetition row.
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn baselines(a: BaselinesArgs) -> Result<()> {
    if a.l == 0 || a.n_total % a.l != 0 {
        return Err(usage(format!("{} uses cannot repeat {} bits evenly", a.n_total, a.l)));
    }
    let cfg = ChannelConfig::from_snr_db(a.snr1_db, a.snr2_db, a.n_total, a.p)?;
    let r = simulate_repetition(&cfg, a.l, a.n_total / a.l, &a.sim.options())?;
    let lb = |user| ol_lower_bound(a.l as f64, a.n_total as f64, cfg.snr_ch(user));
    println!(
        "{}",
        json!({
            "repetition": { "ber1": r.ber1, "ber2": r.ber2, "bler1": r.bler1, "bler2": r.bler2, "trials": r.trials },
            "ol_lower_bound": { "bler1": lb(1), "bler2": lb(2) },
        })
    );
    if let Some(out) = &a.out {
        append_csv(out, &[r.to_row()])?;
        write_meta(out, a.sim.seed)?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, allow_hyphen_values = true)]
    snr1_db: f64,
    #[arg(long, allow_hyphen_values = true)]
    snr2_db: f64,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    eta1: f64,
    #[arg(long)]
    eta2: f64,
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    /// Random F₂ starts for the weighted-power optimizer.
    #[arg(long, default_value_t = 30)]
    n_inits: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

pub fn oracle(a: OracleArgs) -> Result<()> {
    let cfg = ChannelConfig::from_snr_db(a.snr1_db, a.snr2_db, a.n, 1.0)?;
    let ex = exhaustive_minmax_power(&cfg, a.eta1, a.eta2, a.grid_step)?;
    let search = SearchConfig {
        n_inits: a.n_inits,
        structured_inits: false,
        wsp: Default::default(),
        ..SearchConfig::default()
    };
    let (alpha, sol) = golden_alpha(&cfg, &search, a.eta1, a.eta2, a.seed)?;
    println!(
        "{}",
        json!({
            "n": a.n,
            "exhaustive_max_power": ex.max_power,
            "wsp_max_power": sol.max_power(),
            "wsp_alpha": alpha,
            "gap": sol.max_power() / ex.max_power - 1.0,
            "evaluated": ex.evaluated,
        })
    );
    Ok(())
}

/// Sidecar next to a CSV output recording the tool version and seed.
fn write_meta(out: &Path, seed: u64) -> Result<()> {
    let mut name = out.as_os_str().to_owned();
    name.push(".meta.json");
    let meta = json!({ "meta": { "tool_version": TOOL_VERSION, "seed": seed } });
    std::fs::write(PathBuf::from(name), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}
