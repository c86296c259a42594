//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 on usage errors, 1 on runtime failures.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{complexity_coded, complexity_uncoded, union_bound_ber_averaged, ComplexityReport};
use crate::group_codes::{
    builtin_code_tables, builtin_spec, search_best_u, verify_group, CodeKind, GroupCodeSpec, GroupReport,
    InitializerStyle,
};
use crate::harness::{self, default_workers, SimConfig};
use crate::ris_channel::{select_patterns_stepwise_depletion, PatternSource};
use crate::transceiver::Scheme;
use crate::Error;

pub const THREADS_ENV: &str = "RIS_SIM_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "ris-drm",
    version,
    about = "Link-level simulator for RIS differential reflecting modulation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo BER sweep.
    Simulate(SimulateArgs),
    /// Optimise reflecting patterns by stepwise depletion.
    SelectPatterns(SelectArgs),
    /// Inspect the built-in group codes.
    Codes {
        #[command(subcommand)]
        action: CodesAction,
    },
    /// Detection complexity.
    Complexity(ComplexityArgs),
    /// Union bound on the bit error rate.
    Bound(BoundArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct LinkArgs {
    /// drm | drm-dstm | ndrm
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long = "K")]
    pub k: Option<usize>,
    #[arg(long = "M")]
    pub m: Option<usize>,
    /// Group code kind: cyclic | dicyclic
    #[arg(long)]
    pub code: Option<String>,
    /// Comma-separated code exponents, e.g. 1,3
    #[arg(long)]
    pub u: Option<String>,
    /// hadamard | identity
    #[arg(long)]
    pub initializer: Option<String>,
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long = "Nr")]
    pub nr: Option<usize>,
    /// optimized | random | file:<path>
    #[arg(long)]
    pub patterns: Option<String>,
    /// Eb/N0 grid in dB: start:step:stop, a comma list, or one value
    #[arg(long, allow_hyphen_values = true)]
    pub ebn0: Option<String>,
    /// How grid values map to noise: ebn0 (per information bit) | rho (per slot)
    #[arg(long)]
    pub snr_axis: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Flat key=value file with defaults for any flag
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    #[arg(long = "T")]
    pub t: Option<usize>,
    #[arg(long)]
    pub min_bit_errors: Option<u64>,
    #[arg(long)]
    pub max_info_bits: Option<u64>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// CSV output path; stdout when absent
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[arg(long = "N", default_value_t = 4)]
    pub n: usize,
    #[arg(long = "M", default_value_t = 2)]
    pub m: usize,
    #[arg(long = "K", default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum CodesAction {
    /// Print the built-in tables.
    List {
        #[arg(long = "K")]
        k: Option<usize>,
        #[arg(long)]
        kind: Option<String>,
    },
    /// Build and check one code.
    Verify {
        #[arg(long = "K")]
        k: usize,
        #[arg(long)]
        kind: String,
        #[arg(long = "M")]
        m: usize,
        /// Exponents; the built-in entry is used when absent
        #[arg(long)]
        u: Option<String>,
        /// Search for the distance-maximising exponents instead
        #[arg(long)]
        search: bool,
    },
}

#[derive(Debug, Args)]
pub struct ComplexityArgs {
    #[arg(long, default_value = "drm")]
    pub scheme: String,
    #[arg(long = "K")]
    pub k: usize,
    #[arg(long = "M")]
    pub m: usize,
    #[arg(long = "Nr", default_value_t = 3)]
    pub nr: usize,
    #[arg(long)]
    pub kind: Option<String>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[command(flatten)]
    pub link: LinkArgs,
    /// Channel realizations to average over
    #[arg(long = "bound-avg", default_value_t = 1)]
    pub bound_avg: usize,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `start:step:stop` (inclusive), `a,b,c` or a single value.
pub fn parse_snr_grid(s: &str) -> crate::Result<Vec<f64>> {
    let num = |t: &str| {
        t.trim()
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Parse(format!("bad number {t:?} in SNR grid {s:?}")))
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, step, stop] => {
            let (start, step, stop) = (num(start)?, num(step)?, num(stop)?);
            if step <= 0.0 || stop < start {
                return Err(Error::Parse(format!("SNR grid {s:?} needs step > 0 and stop >= start")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            if count > 10_000 {
                return Err(Error::Parse(format!("SNR grid {s:?} has too many points")));
            }
            Ok((0..count).map(|i| round_grid(start + i as f64 * step)).collect())
        }
        [list] => {
            let v = list.split(',').map(num).collect::<crate::Result<Vec<_>>>()?;
            if v.is_empty() {
                return Err(Error::Parse("empty SNR grid".into()));
            }
            Ok(v)
        }
        _ => Err(Error::Parse(format!("SNR grid {s:?} is not start:step:stop"))),
    }
}

fn round_grid(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

pub fn parse_u_list(s: &str) -> crate::Result<Vec<usize>> {
    s.split([',', ' '])
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Error::Parse(format!("bad exponent {t:?}")))
        })
        .collect()
}

/// Reads a flat `key=value` file. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> crate::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

const CONFIG_KEYS: &[&str] = &[
    "scheme",
    "K",
    "M",
    "code",
    "u",
    "initializer",
    "N",
    "Nr",
    "T",
    "patterns",
    "ebn0",
    "snr_axis",
    "min_bit_errors",
    "max_info_bits",
    "seed",
    "workers",
];

struct Layered {
    file: BTreeMap<String, String>,
}

impl Layered {
    fn load(path: Option<&Path>) -> CliResult<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
                parse_config_text(&text).map_err(usage)?
            }
            None => BTreeMap::new(),
        };
        if let Some(k) = file.keys().find(|k| !CONFIG_KEYS.contains(&k.as_str())) {
            return Err(usage(format!("unknown config key {k:?}")));
        }
        Ok(Self { file })
    }

    fn string(&self, flag: &Option<String>, key: &str) -> Option<String> {
        flag.clone().or_else(|| self.file.get(key).cloned())
    }

    fn parsed<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> CliResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.file
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| usage(format!("config {key}={v:?} is invalid")))
            })
            .transpose()
    }
}

/// Resolved link settings shared by `simulate` and `bound`.
fn resolve_link(args: &LinkArgs, layers: &Layered, cfg: &mut SimConfig) -> CliResult<()> {
    if let Some(s) = layers.string(&args.scheme, "scheme") {
        cfg.scheme = s.parse().map_err(usage)?;
    }
    if let Some(k) = layers.parsed(args.k, "K")? {
        cfg.k = k;
    }
    let m = layers.parsed(args.m, "M")?;
    if let Some(m) = m {
        cfg.m = m;
    }
    let kind = layers.string(&args.code, "code").filter(|s| s != "none");
    let u = layers.string(&args.u, "u").filter(|s| !s.trim().is_empty());
    match cfg.scheme {
        Scheme::DrmDstm => {
            let kind: CodeKind = kind
                .ok_or_else(|| usage("drm-dstm needs --code cyclic|dicyclic"))?
                .parse()
                .map_err(usage)?;
            if m.is_none() {
                return Err(usage("drm-dstm needs --M"));
            }
            let spec = match u {
                Some(u) => GroupCodeSpec::new(kind, cfg.m, cfg.k, parse_u_list(&u).map_err(usage)?).map_err(usage)?,
                None => builtin_spec(kind, cfg.m, cfg.k)
                    .ok_or_else(|| usage(format!("no built-in {kind} code for M={} K={}; pass --u", cfg.m, cfg.k)))?,
            };
            cfg.code = Some(spec);
        }
        _ => {
            if kind.is_some() || u.is_some() {
                return Err(usage(format!("--code/--u do not apply to scheme {}", cfg.scheme)));
            }
        }
    }
    if let Some(init) = layers.string(&args.initializer, "initializer") {
        cfg.initializer = Some(init.parse::<InitializerStyle>().map_err(usage)?);
    }
    if let Some(n) = layers.parsed(args.n, "N")? {
        cfg.n = n;
    }
    if let Some(nr) = layers.parsed(args.nr, "Nr")? {
        cfg.nr = nr;
    }
    if let Some(p) = layers.string(&args.patterns, "patterns") {
        cfg.patterns = p.parse::<PatternSource>().map_err(usage)?;
    }
    if let Some(g) = layers.string(&args.ebn0, "ebn0") {
        cfg.ebn0_db = parse_snr_grid(&g).map_err(usage)?;
    }
    if let Some(a) = layers.string(&args.snr_axis, "snr_axis") {
        cfg.snr_axis = a.parse().map_err(usage)?;
    }
    if let Some(seed) = layers.parsed(args.seed, "seed")? {
        cfg.seed = seed;
    }
    Ok(())
}

/// Resolves the full simulation config: flags, then the config file, then
/// defaults. The worker count also honours `RIS_SIM_THREADS` between the
/// flag and the file.
pub fn resolve_sim_config(args: &SimulateArgs, env_threads: Option<String>) -> CliResult<SimConfig> {
    let layers = Layered::load(args.link.config.as_deref())?;
    let mut cfg = SimConfig::default();
    resolve_link(&args.link, &layers, &mut cfg)?;
    if let Some(t) = layers.parsed(args.t, "T")? {
        cfg.blocks = t;
    }
    if let Some(v) = layers.parsed(args.min_bit_errors, "min_bit_errors")? {
        cfg.min_bit_errors = v;
    }
    if let Some(v) = layers.parsed(args.max_info_bits, "max_info_bits")? {
        cfg.max_info_bits = v;
    }
    let env = env_threads
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("{THREADS_ENV}={s:?} is not a count")))
        })
        .transpose()?;
    cfg.workers = match (args.workers, env) {
        (Some(w), _) | (None, Some(w)) => w,
        _ => layers.parsed(None, "workers")?.unwrap_or_else(default_workers),
    };
    cfg.validate().map_err(usage)?;
    Ok(cfg)
}

/// Flat `key=value` manifest for a finished sweep.
pub fn manifest_text(cfg: &SimConfig, timestamp: u64) -> String {
    format!(
        "tool=ris-drm\nversion={}\n{}workers={}\nconfig_hash={}\ntimestamp={timestamp}\n",
        env!("CARGO_PKG_VERSION"),
        cfg.canonical_text(),
        cfg.workers,
        cfg.hash()
    )
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest");
    PathBuf::from(s)
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve_sim_config(args, std::env::var(THREADS_ENV).ok())?;
    let result = harness::run_sweep(&cfg).map_err(runtime)?;
    let csv = harness::to_csv(&cfg, &result);
    for p in &result.points {
        let _ = writeln!(
            err,
            "Eb/N0 {:>6} dB  BER {:.5e}  errors {:>8}  bits {:>10}  frames {:>7}  {:.1}s",
            p.ebn0_db, p.ber, p.bit_errors, p.info_bits, p.frames, p.elapsed_secs
        );
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, &csv).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
            let ts = SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let mpath = manifest_path(path);
            std::fs::write(&mpath, manifest_text(&cfg, ts))
                .map_err(|e| runtime(format!("{}: {e}", mpath.display())))?;
            let _ = writeln!(out, "wrote {} ({} rows)", path.display(), result.points.len());
        }
        None => out.write_all(csv.as_bytes()).map_err(runtime)?,
    }
    Ok(())
}

fn cmd_select(args: &SelectArgs, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let outcome = select_patterns_stepwise_depletion(args.n, args.m, args.k).map_err(usage)?;
    if outcome.min_distance <= 1e-9 {
        let _ = writeln!(
            err,
            "warning: no {} patterns of {} units are separable over {}-PSK; D_ED,min = 0",
            args.k, args.n, args.m
        );
    }
    let header = format!(
        "D_ED,min = {:.6}\nN={} M={} K={}",
        outcome.min_distance, args.n, args.m, args.k
    );
    match &args.out {
        Some(path) => {
            outcome.set.store(path, Some(&header)).map_err(runtime)?;
            let _ = writeln!(out, "wrote {} (D_ED,min = {:.6})", path.display(), outcome.min_distance);
        }
        None => out
            .write_all(outcome.set.to_text(Some(&header)).as_bytes())
            .map_err(runtime)?,
    }
    Ok(())
}

fn report_line(spec: &GroupCodeSpec, rep: &GroupReport) -> String {
    let yn = |b: bool| if b { "yes" } else { "NO" };
    let expected = GroupReport::expected_order(spec);
    format!(
        "{:<9} K={} {:<16} |G|={:<3} o={:<3} expected_o={:<3} unitary={} closed={} size={} distinct={}",
        spec.kind().to_string(),
        spec.k(),
        spec.to_string(),
        spec.size(),
        rep.max_order,
        expected,
        yn(rep.unitary),
        yn(rep.closed),
        yn(rep.size_ok),
        yn(rep.distinct),
    )
}

fn cmd_codes(action: &CodesAction, out: &mut dyn Write) -> CliResult<()> {
    match action {
        CodesAction::List { k, kind } => {
            let kind: Option<CodeKind> = kind.as_deref().map(str::parse).transpose().map_err(usage)?;
            for spec in builtin_code_tables() {
                if k.is_some_and(|k| k != spec.k()) || kind.is_some_and(|c| c != spec.kind()) {
                    continue;
                }
                let code = spec.build().map_err(runtime)?;
                let _ = writeln!(out, "{}", report_line(&spec, &verify_group(&code)));
            }
        }
        CodesAction::Verify { k, kind, m, u, search } => {
            let kind: CodeKind = kind.parse().map_err(usage)?;
            let spec = if *search {
                let (spec, d2) = search_best_u(kind, *m, *k).map_err(usage)?;
                let _ = writeln!(out, "search: best {spec} with min squared distance {d2:.6}");
                spec
            } else {
                match u {
                    Some(u) => GroupCodeSpec::new(kind, *m, *k, parse_u_list(u).map_err(usage)?).map_err(usage)?,
                    None => builtin_spec(kind, *m, *k)
                        .ok_or_else(|| usage(format!("no built-in {kind} code for M={m} K={k}; pass --u")))?,
                }
            };
            let code = spec.build().map_err(usage)?;
            let rep = verify_group(&code);
            let _ = writeln!(out, "{}", report_line(&spec, &rep));
            if !rep.all_ok() {
                return Err(runtime(format!("code {spec} failed verification")));
            }
        }
    }
    Ok(())
}

fn write_complexity(out: &mut dyn Write, r: &ComplexityReport) {
    let _ = writeln!(out, "scheme={}", r.scheme);
    let _ = writeln!(out, "K={}\nM={}\nNr={}", r.k, r.m, r.nr);
    if let Some(kind) = r.kind {
        let _ = writeln!(out, "kind={kind}");
    }
    let _ = writeln!(out, "formula={}", r.formula_name);
    let _ = writeln!(out, "multiplications={}", r.multiplications);
    if let Some(g) = r.group_size_count {
        let _ = writeln!(out, "multiplications_group_size={g}");
    }
}

fn cmd_complexity(args: &ComplexityArgs, out: &mut dyn Write) -> CliResult<()> {
    let scheme: Scheme = args.scheme.parse().map_err(usage)?;
    if !(1..=crate::mapping::MAX_SLOTS).contains(&args.k) || args.m < 2 {
        return Err(usage("need 1 <= K <= 8 and M >= 2"));
    }
    let report = match scheme {
        Scheme::Drm | Scheme::Ndrm => {
            if args.kind.is_some() {
                return Err(usage("--kind applies to drm-dstm only"));
            }
            complexity_uncoded(args.k, args.m, args.nr)
        }
        Scheme::DrmDstm => {
            let kind: CodeKind = args
                .kind
                .as_deref()
                .ok_or_else(|| usage("drm-dstm needs --kind"))?
                .parse()
                .map_err(usage)?;
            complexity_coded(args.k, args.m, args.nr, kind)
        }
    };
    write_complexity(out, &report);
    Ok(())
}

fn cmd_bound(args: &BoundArgs, out: &mut dyn Write) -> CliResult<()> {
    let layers = Layered::load(args.link.config.as_deref())?;
    let mut cfg = SimConfig::default();
    resolve_link(&args.link, &layers, &mut cfg)?;
    if cfg.scheme == Scheme::Ndrm {
        return Err(usage("the bound is defined for the differential schemes"));
    }
    if args.bound_avg == 0 {
        return Err(usage("--bound-avg must be at least 1"));
    }
    cfg.validate().map_err(usage)?;
    let link = harness::Link::new(&cfg).map_err(usage)?;
    let _ = writeln!(out, "ebn0_db,sigma2,bound_paper_form,bound_per_bit");
    for &db in &cfg.ebn0_db {
        let sigma2 = 1.0 / cfg.snr_axis.rho(db, cfg.k, link.r());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let b = union_bound_ber_averaged(
            &mut rng,
            cfg.n,
            cfg.nr,
            link.patterns.selected(),
            &link.candidates,
            sigma2,
            args.bound_avg,
        )
        .map_err(runtime)?;
        let _ = writeln!(out, "{db},{sigma2},{:.5e},{:.5e}", b.paper_form, b.per_bit);
    }
    Ok(())
}

pub fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a, out, err),
        Command::SelectPatterns(a) => cmd_select(a, out, err),
        Command::Codes { action } => cmd_codes(action, out),
        Command::Complexity(a) => cmd_complexity(a, out),
        Command::Bound(a) => cmd_bound(a, out),
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            if code == 0 {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "{e}");
            e.exit_code()
        }
    }
}
