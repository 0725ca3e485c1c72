//! Run configuration files (TOML).
//!
//! Parsing happens in two passes: serde reads the document into a loose
//! shape that remembers source spans, then validation checks ranges and
//! kind-specific keys and reports every problem with its line number.

use std::fmt;
use std::ops::Range;
use std::path::PathBuf;

use latgas_core::lattice::{Lattice, Topology};
use latgas_core::models::{IsingParams, TasepParams, TABLE_MAX_SITES, TASEP_MAX_SITES};
use serde::Deserialize;
use toml::Spanned;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_REPLICAS: usize = 8;
pub const DEFAULT_MAX_JUMPS: u64 = 1_000_000;
pub const DEFAULT_DRAIN_BUDGET: u64 = 1_000_000_000;
/// Largest ring the Ising simulator and closed form accept.
pub const ISING_MAX_SITES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    Exact,
    VerifyLaw,
    Profile,
    IsingTau,
    Scan,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Simulate => "simulate",
            Mode::Exact => "exact",
            Mode::VerifyLaw => "verify-law",
            Mode::Profile => "profile",
            Mode::IsingTau => "ising-tau",
            Mode::Scan => "scan",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        [Mode::Simulate, Mode::Exact, Mode::VerifyLaw, Mode::Profile, Mode::IsingTau, Mode::Scan]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopSpec {
    MaxJumps(u64),
    MaxTime(f64),
}

/// Which states a table entry applies to: one character per site, `0`, `1`
/// or `*`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StatePattern {
    care: u64,
    value: u64,
}

impl StatePattern {
    pub fn matches(&self, bits: u64) -> bool {
        bits & self.care == self.value
    }

    pub fn is_exact(&self, sites: usize) -> bool {
        self.care == (1u64 << sites) - 1
    }

    fn parse(text: &str, sites: usize) -> Result<Self, String> {
        if text == "*" {
            return Ok(Self { care: 0, value: 0 });
        }
        if text.chars().count() != sites {
            return Err(format!("pattern {text:?} must have one character per site ({sites}) or be \"*\""));
        }
        let mut care = 0;
        let mut value = 0;
        for (x, c) in text.chars().enumerate() {
            match c {
                '0' => care |= 1 << x,
                '1' => {
                    care |= 1 << x;
                    value |= 1 << x;
                }
                '*' => {}
                _ => return Err(format!("pattern {text:?} may only contain 0, 1 and *")),
            }
        }
        Ok(Self { care, value })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableEvent {
    Inject { site: usize },
    Diffuse { from: usize, to: usize },
    Extract { sites: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateEntry {
    pub event: TableEvent,
    pub state: StatePattern,
    pub rate: f64,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub lattice: Lattice,
    pub diffusion_pairs: Vec<(usize, usize)>,
    pub extraction_subsets: Vec<Vec<usize>>,
    pub rates: Vec<RateEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Ising(IsingParams),
    Tasep(TasepParams),
    Table(TableSpec),
}

impl ModelSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ModelSpec::Ising(_) => "ising",
            ModelSpec::Tasep(_) => "tasep",
            ModelSpec::Table(_) => "custom-table",
        }
    }

    pub fn sites(&self) -> usize {
        match self {
            ModelSpec::Ising(p) => p.sites,
            ModelSpec::Tasep(p) => p.sites,
            ModelSpec::Table(t) => t.lattice.size(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub model: ModelSpec,
    pub stop: StopSpec,
    pub drain_budget: u64,
    pub seed: u64,
    pub replicas: usize,
    /// Initial configuration as a bit string; empty lattice when absent.
    pub initial: Option<String>,
    pub output: Option<PathBuf>,
    pub format: Format,
    /// Lattice sizes for `scan`.
    pub scan_sites: Vec<usize>,
}

/// One schema problem.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaError {
    pub line: Option<usize>,
    pub field: String,
    pub message: String,
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.field, self.message),
            None => write!(f, "{}: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<SchemaError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, e) in self.0.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn as_f64(self) -> f64 {
        match self {
            Num::Int(i) => i as f64,
            Num::Float(f) => f,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Option<Spanned<String>>,
    seed: Option<Spanned<i64>>,
    replicas: Option<Spanned<i64>>,
    initial: Option<Spanned<String>>,
    output: Option<String>,
    format: Option<Spanned<String>>,
    model: Spanned<RawModel>,
    stop: Option<Spanned<RawStop>>,
    scan: Option<Spanned<RawScan>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    kind: Spanned<String>,
    sites: Option<Spanned<i64>>,
    alpha: Option<Spanned<Num>>,
    beta: Option<Spanned<Num>>,
    coupling: Option<Spanned<Num>>,
    chemical_potential: Option<Spanned<Num>>,
    alpha00: Option<Spanned<Num>>,
    alpha10: Option<Spanned<Num>>,
    alpha01: Option<Spanned<Num>>,
    alpha11: Option<Spanned<Num>>,
    kawasaki_scale: Option<Spanned<Num>>,
    topology: Option<Spanned<String>>,
    diffusion_pairs: Option<Spanned<Vec<[i64; 2]>>>,
    extraction_subsets: Option<Spanned<Vec<Vec<i64>>>>,
    rates: Option<Vec<Spanned<RawRate>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRate {
    event: Spanned<String>,
    state: Spanned<String>,
    rate: Spanned<Num>,
    site: Option<Spanned<i64>>,
    from: Option<Spanned<i64>>,
    to: Option<Spanned<i64>>,
    sites: Option<Spanned<Vec<i64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStop {
    max_jumps: Option<Spanned<i64>>,
    max_time: Option<Spanned<Num>>,
    drain_budget: Option<Spanned<i64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScan {
    sites: Spanned<Vec<i64>>,
}

/// Command-line values that replace file keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub max_jumps: Option<u64>,
    pub max_time: Option<f64>,
}

struct Checker<'a> {
    text: &'a str,
    errors: Vec<SchemaError>,
}

impl Checker<'_> {
    fn line(&self, span: Range<usize>) -> usize {
        self.text[..span.start.min(self.text.len())].matches('\n').count() + 1
    }

    fn error(&mut self, span: Option<Range<usize>>, field: &str, message: impl Into<String>) {
        let line = span.map(|s| self.line(s));
        self.errors.push(SchemaError { line, field: field.to_string(), message: message.into() });
    }

    fn positive(&mut self, v: &Option<Spanned<Num>>, field: &str) -> Option<f64> {
        let s = v.as_ref()?;
        let x = s.get_ref().as_f64();
        if !(x.is_finite() && x > 0.0) {
            self.error(Some(s.span()), field, format!("must be a positive finite number, got {x}"));
            return None;
        }
        Some(x)
    }

    fn finite(&mut self, v: &Option<Spanned<Num>>, field: &str) -> Option<f64> {
        let s = v.as_ref()?;
        let x = s.get_ref().as_f64();
        if !x.is_finite() {
            self.error(Some(s.span()), field, format!("must be finite, got {x}"));
            return None;
        }
        Some(x)
    }

    fn int_in(&mut self, v: &Spanned<i64>, field: &str, lo: i64, hi: i64) -> Option<i64> {
        let x = *v.get_ref();
        if x < lo || x > hi {
            self.error(Some(v.span()), field, format!("must be in {lo}..={hi}, got {x}"));
            return None;
        }
        Some(x)
    }

    fn required<'v, T>(&mut self, v: &'v Option<T>, field: &str, at: Range<usize>, kind: &str) -> Option<&'v T> {
        if v.is_none() {
            self.error(Some(at), field, format!("required for kind = \"{kind}\""));
        }
        v.as_ref()
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    parse_config_with(text, &Overrides::default())
}

pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig, ConfigErrors> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        ConfigErrors(vec![SchemaError { line, field: "document".into(), message: e.message().trim().to_string() }])
    })?;
    let mut c = Checker { text, errors: Vec::new() };

    let mode = match (&overrides.mode, &raw.mode) {
        (Some(m), _) => Some(*m),
        (None, Some(s)) => {
            let m = Mode::parse(s.get_ref());
            if m.is_none() {
                c.error(Some(s.span()), "mode", format!("unknown mode {:?}; expected simulate, exact, verify-law, profile, ising-tau or scan", s.get_ref()));
            }
            m
        }
        (None, None) => {
            c.error(None, "mode", "missing; set it in the file or pick a subcommand");
            None
        }
    };

    let seed = match (overrides.seed, &raw.seed) {
        (Some(s), _) => s,
        (None, Some(s)) => c.int_in(s, "seed", 0, i64::MAX).map_or(DEFAULT_SEED, |x| x as u64),
        (None, None) => DEFAULT_SEED,
    };
    let replicas = match (overrides.replicas, &raw.replicas) {
        (Some(r), _) => {
            if r == 0 {
                c.error(None, "replicas", "must be at least 1");
            }
            r
        }
        (None, Some(r)) => c.int_in(r, "replicas", 1, 1 << 20).map_or(DEFAULT_REPLICAS, |x| x as usize),
        (None, None) => DEFAULT_REPLICAS,
    };
    let format = match (overrides.format, &raw.format) {
        (Some(f), _) => f,
        (None, Some(s)) => Format::parse(s.get_ref()).unwrap_or_else(|| {
            c.error(Some(s.span()), "format", format!("unknown format {:?}; expected csv or json", s.get_ref()));
            Format::Csv
        }),
        (None, None) => Format::Csv,
    };
    let output = overrides.output.clone().or(raw.output.map(PathBuf::from));

    let (stop, drain_budget) = parse_stop(&mut c, raw.stop.as_ref(), overrides);
    let scan_sites = match &raw.scan {
        Some(s) => {
            let sites = &s.get_ref().sites;
            if sites.get_ref().is_empty() {
                c.error(Some(sites.span()), "scan.sites", "must list at least one lattice size");
            }
            sites
                .get_ref()
                .iter()
                .filter_map(|&l| {
                    if (2..=TASEP_MAX_SITES as i64).contains(&l) {
                        Some(l as usize)
                    } else {
                        c.error(Some(sites.span()), "scan.sites", format!("size {l} outside 2..={TASEP_MAX_SITES}"));
                        None
                    }
                })
                .collect()
        }
        None => Vec::new(),
    };
    if mode == Some(Mode::Scan) && raw.scan.is_none() {
        c.error(None, "scan", "mode = \"scan\" needs a [scan] table with sites = [...]");
    }

    let model = parse_model(&mut c, &raw.model, mode);

    let initial = raw.initial.as_ref().and_then(|s| {
        let text = s.get_ref();
        let ok = text.chars().all(|ch| ch == '0' || ch == '1');
        let len_ok = model.as_ref().is_none_or(|m| m.sites() == text.chars().count());
        if !ok || !len_ok {
            c.error(Some(s.span()), "initial", "must be a 0/1 string with one character per site");
            None
        } else {
            Some(text.clone())
        }
    });

    if let (Some(mode), Some(model)) = (mode, &model) {
        check_mode_model(&mut c, mode, model, raw.model.span());
    }

    if !c.errors.is_empty() {
        return Err(ConfigErrors(c.errors));
    }
    Ok(RunConfig {
        mode: mode.expect("checked"),
        model: model.expect("checked"),
        stop,
        drain_budget,
        seed,
        replicas,
        initial,
        output,
        format,
        scan_sites,
    })
}

fn parse_stop(c: &mut Checker, raw: Option<&Spanned<RawStop>>, o: &Overrides) -> (StopSpec, u64) {
    let mut budget = DEFAULT_DRAIN_BUDGET;
    let mut stop = None;
    if let Some(s) = raw {
        let r = s.get_ref();
        if r.max_jumps.is_some() && r.max_time.is_some() {
            c.error(Some(s.span()), "stop", "set exactly one of max_jumps and max_time");
        }
        if let Some(j) = &r.max_jumps {
            stop = c.int_in(j, "stop.max_jumps", 0, i64::MAX).map(|x| StopSpec::MaxJumps(x as u64));
        }
        if r.max_time.is_some() {
            stop = c.positive(&r.max_time, "stop.max_time").map(StopSpec::MaxTime);
        }
        if let Some(b) = &r.drain_budget {
            budget = c.int_in(b, "stop.drain_budget", 1, i64::MAX).map_or(budget, |x| x as u64);
        }
    }
    match (o.max_jumps, o.max_time) {
        (Some(_), Some(_)) => c.error(None, "stop", "--max-jumps and --max-time are mutually exclusive"),
        (Some(n), None) => stop = Some(StopSpec::MaxJumps(n)),
        (None, Some(t)) => {
            if t.is_finite() && t > 0.0 {
                stop = Some(StopSpec::MaxTime(t));
            } else {
                c.error(None, "stop.max_time", format!("must be a positive finite number, got {t}"));
            }
        }
        (None, None) => {}
    }
    (stop.unwrap_or(StopSpec::MaxJumps(DEFAULT_MAX_JUMPS)), budget)
}

const TASEP_KEYS: &[&str] = &["sites", "alpha", "beta"];
const ISING_KEYS: &[&str] = &[
    "sites", "alpha", "coupling", "chemical_potential", "alpha00", "alpha10", "alpha01", "alpha11", "kawasaki_scale",
];
const TABLE_KEYS: &[&str] = &["sites", "topology", "diffusion_pairs", "extraction_subsets", "rates"];

fn present_keys(m: &RawModel) -> Vec<(&'static str, Option<Range<usize>>)> {
    fn sp<T>(v: &Option<Spanned<T>>) -> Option<Option<Range<usize>>> {
        v.as_ref().map(|s| Some(s.span()))
    }
    let all = [
        ("sites", sp(&m.sites)),
        ("alpha", sp(&m.alpha)),
        ("beta", sp(&m.beta)),
        ("coupling", sp(&m.coupling)),
        ("chemical_potential", sp(&m.chemical_potential)),
        ("alpha00", sp(&m.alpha00)),
        ("alpha10", sp(&m.alpha10)),
        ("alpha01", sp(&m.alpha01)),
        ("alpha11", sp(&m.alpha11)),
        ("kawasaki_scale", sp(&m.kawasaki_scale)),
        ("topology", sp(&m.topology)),
        ("diffusion_pairs", sp(&m.diffusion_pairs)),
        ("extraction_subsets", sp(&m.extraction_subsets)),
        ("rates", m.rates.as_ref().map(|r| r.first().map(|e| e.span()))),
    ];
    all.into_iter().filter_map(|(k, v)| v.map(|s| (k, s))).collect()
}

fn parse_model(c: &mut Checker, raw: &Spanned<RawModel>, mode: Option<Mode>) -> Option<ModelSpec> {
    let at = raw.span();
    let m = raw.get_ref();
    let kind = m.kind.get_ref().as_str();
    let allowed = match kind {
        "tasep" => TASEP_KEYS,
        "ising" => ISING_KEYS,
        "custom-table" => TABLE_KEYS,
        other => {
            c.error(Some(m.kind.span()), "model.kind", format!("unknown kind {other:?}; expected ising, tasep or custom-table"));
            return None;
        }
    };
    for (key, span) in present_keys(m) {
        if !allowed.contains(&key) {
            c.error(span, &format!("model.{key}"), format!("not used by kind = \"{kind}\""));
        }
    }
    let sites_max = match kind {
        "tasep" => TASEP_MAX_SITES,
        "ising" => ISING_MAX_SITES,
        _ => TABLE_MAX_SITES,
    };
    let sites_min = if kind == "custom-table" { 1 } else { 2 };
    // the scan grid replaces the lattice size
    let sites_needed = !(kind == "tasep" && mode == Some(Mode::Scan));
    let sites = match &m.sites {
        Some(s) => c.int_in(s, "model.sites", sites_min, sites_max as i64).map(|x| x as usize),
        None if sites_needed => {
            c.error(Some(at.clone()), "model.sites", format!("required for kind = \"{kind}\""));
            None
        }
        None => Some(2),
    };
    match kind {
        "tasep" => {
            c.required(&m.alpha, "model.alpha", at.clone(), kind);
            c.required(&m.beta, "model.beta", at.clone(), kind);
            let alpha = c.positive(&m.alpha, "model.alpha");
            let beta = c.positive(&m.beta, "model.beta");
            Some(ModelSpec::Tasep(TasepParams { sites: sites?, alpha: alpha?, beta: beta? }))
        }
        "ising" => {
            c.required(&m.coupling, "model.coupling", at.clone(), kind);
            c.required(&m.chemical_potential, "model.chemical_potential", at.clone(), kind);
            let coupling = c.finite(&m.coupling, "model.coupling");
            let mu = c.finite(&m.chemical_potential, "model.chemical_potential");
            let uniform = c.positive(&m.alpha, "model.alpha");
            let mut alpha = [[0.0; 2]; 2];
            let mut ok = true;
            for (field, value, (l, r)) in [
                ("model.alpha00", &m.alpha00, (0, 0)),
                ("model.alpha10", &m.alpha10, (1, 0)),
                ("model.alpha01", &m.alpha01, (0, 1)),
                ("model.alpha11", &m.alpha11, (1, 1)),
            ] {
                match (value.is_some(), c.positive(value, field), uniform) {
                    (true, Some(x), _) => alpha[l][r] = x,
                    (true, None, _) => ok = false,
                    (false, _, Some(u)) => alpha[l][r] = u,
                    (false, _, None) => {
                        if m.alpha.is_none() {
                            c.error(Some(at.clone()), field, "required unless a uniform alpha is given");
                        }
                        ok = false;
                    }
                }
            }
            let scale = match &m.kawasaki_scale {
                Some(_) => c.positive(&m.kawasaki_scale, "model.kawasaki_scale"),
                None => Some(1.0),
            };
            if !ok {
                return None;
            }
            Some(ModelSpec::Ising(IsingParams {
                sites: sites?,
                coupling: coupling?,
                chemical_potential: mu?,
                alpha,
                kawasaki_scale: scale?,
            }))
        }
        _ => parse_table(c, m, sites?, at),
    }
}

fn parse_table(c: &mut Checker, m: &RawModel, sites: usize, at: Range<usize>) -> Option<ModelSpec> {
    let errors_before = c.errors.len();
    let topology = match m.topology.as_ref().map(|t| t.get_ref().as_str()) {
        None | Some("path") => Topology::Path,
        Some("ring") => Topology::Ring,
        Some(other) => {
            let span = m.topology.as_ref().map(|t| t.span());
            c.error(span, "model.topology", format!("unknown topology {other:?}; expected path or ring"));
            Topology::Path
        }
    };
    let lattice = Lattice::new(sites, topology).ok()?;
    let site = |c: &mut Checker, x: i64, span: Range<usize>, field: &str| -> Option<usize> {
        if (0..sites as i64).contains(&x) {
            Some(x as usize)
        } else {
            c.error(Some(span), field, format!("site {x} outside 0..{sites}"));
            None
        }
    };
    let mut pairs = Vec::new();
    if let Some(p) = &m.diffusion_pairs {
        for &[x, y] in p.get_ref() {
            let (a, b) = (site(c, x, p.span(), "model.diffusion_pairs"), site(c, y, p.span(), "model.diffusion_pairs"));
            if let (Some(a), Some(b)) = (a, b) {
                if a == b {
                    c.error(Some(p.span()), "model.diffusion_pairs", format!("pair [{a}, {b}] must join two different sites"));
                } else {
                    pairs.push((a, b));
                }
            }
        }
    }
    let mut subsets: Vec<Vec<usize>> = Vec::new();
    if let Some(s) = &m.extraction_subsets {
        for set in s.get_ref() {
            let mut v: Vec<usize> = set.iter().filter_map(|&x| site(c, x, s.span(), "model.extraction_subsets")).collect();
            v.sort_unstable();
            v.dedup();
            if v.is_empty() {
                c.error(Some(s.span()), "model.extraction_subsets", "subsets must be nonempty");
            } else {
                subsets.push(v);
            }
        }
    }
    let mut rates = Vec::new();
    let Some(raw_rates) = &m.rates else {
        c.error(Some(at), "model.rates", "required for kind = \"custom-table\"");
        return None;
    };
    for entry in raw_rates {
        let e = entry.get_ref();
        let line = c.line(entry.span());
        let rate = e.rate.get_ref().as_f64();
        if !(rate.is_finite() && rate >= 0.0) {
            c.error(Some(e.rate.span()), "model.rates.rate", format!("must be finite and non-negative, got {rate}"));
        }
        let state = match StatePattern::parse(e.state.get_ref(), sites) {
            Ok(p) => p,
            Err(msg) => {
                c.error(Some(e.state.span()), "model.rates.state", msg);
                continue;
            }
        };
        let stray = |c: &mut Checker, present: bool, key: &str| {
            if present {
                c.error(Some(entry.span()), &format!("model.rates.{key}"), format!("not used by event = {:?}", e.event.get_ref()));
            }
        };
        let event = match e.event.get_ref().as_str() {
            "inject" => {
                stray(c, e.from.is_some(), "from");
                stray(c, e.to.is_some(), "to");
                stray(c, e.sites.is_some(), "sites");
                match &e.site {
                    Some(s) => site(c, *s.get_ref(), s.span(), "model.rates.site").map(|site| TableEvent::Inject { site }),
                    None => {
                        c.error(Some(entry.span()), "model.rates.site", "required for event = \"inject\"");
                        None
                    }
                }
            }
            "diffuse" => {
                stray(c, e.site.is_some(), "site");
                stray(c, e.sites.is_some(), "sites");
                match (&e.from, &e.to) {
                    (Some(f), Some(t)) => {
                        let from = site(c, *f.get_ref(), f.span(), "model.rates.from");
                        let to = site(c, *t.get_ref(), t.span(), "model.rates.to");
                        match (from, to) {
                            (Some(from), Some(to)) if pairs.contains(&(from, to)) => Some(TableEvent::Diffuse { from, to }),
                            (Some(from), Some(to)) => {
                                c.error(Some(entry.span()), "model.rates", format!("pair [{from}, {to}] is not in diffusion_pairs"));
                                None
                            }
                            _ => None,
                        }
                    }
                    _ => {
                        c.error(Some(entry.span()), "model.rates.from", "from and to are required for event = \"diffuse\"");
                        None
                    }
                }
            }
            "extract" => {
                stray(c, e.site.is_some(), "site");
                stray(c, e.from.is_some(), "from");
                stray(c, e.to.is_some(), "to");
                match &e.sites {
                    Some(s) => {
                        let mut v: Vec<usize> = s.get_ref().iter().filter_map(|&x| site(c, x, s.span(), "model.rates.sites")).collect();
                        v.sort_unstable();
                        v.dedup();
                        if subsets.contains(&v) {
                            Some(TableEvent::Extract { sites: v })
                        } else {
                            c.error(Some(s.span()), "model.rates.sites", format!("subset {v:?} is not in extraction_subsets"));
                            None
                        }
                    }
                    None => {
                        c.error(Some(entry.span()), "model.rates.sites", "required for event = \"extract\"");
                        None
                    }
                }
            }
            other => {
                c.error(Some(e.event.span()), "model.rates.event", format!("unknown event {other:?}; expected inject, diffuse or extract"));
                None
            }
        };
        if let Some(event) = event {
            rates.push(RateEntry { event, state, rate, line });
        }
    }
    if c.errors.len() > errors_before {
        return None;
    }
    Some(ModelSpec::Table(TableSpec { lattice, diffusion_pairs: pairs, extraction_subsets: subsets, rates }))
}

fn check_mode_model(c: &mut Checker, mode: Mode, model: &ModelSpec, at: Range<usize>) {
    let need = |c: &mut Checker, ok: bool, what: &str| {
        if !ok {
            c.error(Some(at.clone()), "mode", format!("{} needs {what}, model kind is {}", mode.name(), model.kind()));
        }
    };
    match mode {
        Mode::Profile | Mode::Scan => need(c, matches!(model, ModelSpec::Tasep(_)), "kind = \"tasep\""),
        Mode::IsingTau => need(c, matches!(model, ModelSpec::Ising(_)), "kind = \"ising\""),
        Mode::Exact | Mode::VerifyLaw => {
            let max = latgas_core::oracle::STATIONARY_MAX_SITES;
            if model.sites() > max {
                c.error(Some(at.clone()), "model.sites", format!("{} solves the full state space; at most {max} sites", mode.name()));
            }
        }
        Mode::Simulate => {
            if model.sites() > latgas_core::lattice::MAX_SITES {
                c.error(Some(at.clone()), "model.sites", format!("simulation supports at most {} sites", latgas_core::lattice::MAX_SITES));
            }
        }
    }
}
