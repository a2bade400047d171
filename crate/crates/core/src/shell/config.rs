//! Run configuration: a sectioned key-value file (TOML syntax) with full
//! validation. Parsing collects every violation instead of stopping at the
//! first, and unknown keys are reported with the nearest valid key.

use crate::error::{Error, Result};
use crate::integrate::{IntegratorConfig, Scheme};
use crate::model::Parameters;
use crate::spectral::DomainSpec;
use std::f64::consts::PI;
use std::path::PathBuf;

/// Documented defaults (the reference scenario).
pub mod defaults {
    pub const DT: f64 = 2e-3;
    pub const T_END: f64 = 50.0;
    pub const SAMPLE_EVERY: usize = 10;
    pub const STORE_EVERY: usize = 0;
    pub const ADAPTIVE: bool = true;
    pub const TOL: f64 = 1e-4;
    pub const MODES: usize = 32;
    pub const SEED: u64 = 42;
    pub const ENSEMBLE: usize = 1;
    pub const RADIUS: f64 = 10.0;
    pub const TAIL_FRACTION: f64 = 0.4;
    pub const M_MAX: usize = 24;
    pub const QSTAR: f64 = 1.0;
    pub const EMBED_BUDGET: usize = 2000;
    pub const RENORM_EVERY: usize = 10;
    pub const WARMUP_FRACTION: f64 = 0.5;
    pub const OUT_DIR: &str = "out";
}

/// Initial-data specification.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Seeded smooth random state rescaled to H-norm `radius`.
    RandomBall { radius: f64 },
    /// Explicit list of (component, sorted mode, amplitude) entries.
    Modes(Vec<ModeAmp>),
    /// Resume from a checkpoint file.
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeAmp {
    /// Component index 0..=5 in the order `u, v, phi, w, z, psi`.
    pub comp: usize,
    /// 1-based sorted mode index.
    pub mode: usize,
    pub amp: f64,
}

/// One-parameter sweep specification.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    /// One of the eleven physical parameter names.
    pub param: String,
    pub values: Vec<f64>,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub domain: DomainSpec,
    pub params: Parameters,
    pub modes: usize,
    pub integ: IntegratorConfig,
    pub init: InitSpec,
    pub ensemble: usize,
    pub tail_fraction: f64,
    pub m_max: usize,
    pub qstar: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub embed_budget: usize,
    pub renorm_every: usize,
    /// Fraction of the run discarded before tangent averaging.
    pub warmup_fraction: f64,
    pub sweep: Option<SweepSpec>,
    /// Falsification injection: bound name -> scale factor. Not part of the
    /// config file; set from the command line.
    pub shrink: Vec<(String, f64)>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            domain: DomainSpec::interval(PI).expect("valid"),
            params: Parameters::default_scenario(),
            modes: defaults::MODES,
            integ: IntegratorConfig {
                dt: defaults::DT,
                scheme: Scheme::IfRk2,
                t_end: defaults::T_END,
                sample_every: defaults::SAMPLE_EVERY,
                store_every: defaults::STORE_EVERY,
                adaptive: defaults::ADAPTIVE,
                tol: defaults::TOL,
            },
            init: InitSpec::RandomBall {
                radius: defaults::RADIUS,
            },
            ensemble: defaults::ENSEMBLE,
            tail_fraction: defaults::TAIL_FRACTION,
            m_max: defaults::M_MAX,
            qstar: defaults::QSTAR,
            seed: defaults::SEED,
            out_dir: PathBuf::from(defaults::OUT_DIR),
            embed_budget: defaults::EMBED_BUDGET,
            renorm_every: defaults::RENORM_EVERY,
            warmup_fraction: defaults::WARMUP_FRACTION,
            sweep: None,
            shrink: Vec::new(),
        }
    }
}

pub const PARAMETER_KEYS: [&str; 11] = [
    "d1", "d2", "d3", "D1", "D2", "D3", "a", "b", "k", "lambda", "N",
];

const DOMAIN_KEYS: [&str; 1] = ["lengths"];
const INTEGRATOR_KEYS: [&str; 6] = [
    "dt",
    "scheme",
    "t_end",
    "sample_every",
    "store_every",
    "tol",
];
const INTEGRATOR_BOOL_KEYS: [&str; 1] = ["adaptive"];
const ANALYSIS_KEYS: [&str; 14] = [
    "modes",
    "seed",
    "ensemble",
    "init",
    "radius",
    "init_modes",
    "checkpoint",
    "tail_fraction",
    "m_max",
    "qstar",
    "embed_budget",
    "renorm_every",
    "warmup_fraction",
    "out_dir",
];
const SWEEP_KEYS: [&str; 2] = ["param", "values"];
const SECTIONS: [&str; 5] = ["domain", "parameters", "integrator", "analysis", "sweep"];

fn levenshtein(a: &str, b: &str) -> usize {
    let (a, b): (Vec<char>, Vec<char>) = (a.chars().collect(), b.chars().collect());
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let cost = usize::from(ca != cb);
            cur[j + 1] = (prev[j] + cost).min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn nearest<'a>(key: &str, valid: impl IntoIterator<Item = &'a str>) -> &'a str {
    valid
        .into_iter()
        .min_by_key(|v| levenshtein(key, v))
        .unwrap_or("")
}

/// Collects parsed values and violations while walking the TOML tree.
struct Walker {
    violations: Vec<String>,
}

impl Walker {
    fn float(&mut self, section: &str, key: &str, v: &toml::Value) -> Option<f64> {
        match v {
            toml::Value::Float(f) => Some(*f),
            toml::Value::Integer(i) => Some(*i as f64),
            other => {
                self.violations
                    .push(format!("[{section}] {key}: expected a number, got {other}"));
                None
            }
        }
    }

    fn integer(&mut self, section: &str, key: &str, v: &toml::Value) -> Option<i64> {
        match v {
            toml::Value::Integer(i) => Some(*i),
            other => {
                self.violations.push(format!(
                    "[{section}] {key}: expected an integer, got {other}"
                ));
                None
            }
        }
    }

    fn positive(&mut self, section: &str, key: &str, value: f64) -> Option<f64> {
        if value.is_finite() && value > 0.0 {
            Some(value)
        } else {
            self.violations.push(format!(
                "[{section}] {key} = {value} rejected: must be strictly positive (every physical coefficient of the system is a positive constant)"
            ));
            None
        }
    }
}

/// Parses and validates a configuration file, reporting every violation.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config {
        violations: vec![format!("syntax error: {e}")],
    })?;
    let mut w = Walker {
        violations: Vec::new(),
    };
    let mut cfg = RunConfig::default();

    for (section, value) in &table {
        match section.as_str() {
            "domain" | "parameters" | "integrator" | "analysis" | "sweep" => {}
            other => {
                w.violations.push(format!(
                    "unknown section [{other}]; nearest valid section is [{}]",
                    nearest(other, SECTIONS)
                ));
                continue;
            }
        }
        let Some(sec) = value.as_table() else {
            w.violations
                .push(format!("[{section}] must be a table of keys"));
            continue;
        };
        match section.as_str() {
            "domain" => parse_domain(&mut w, sec, &mut cfg),
            "parameters" => parse_parameters(&mut w, sec, &mut cfg),
            "integrator" => parse_integrator(&mut w, sec, &mut cfg),
            "analysis" => parse_analysis(&mut w, sec, &mut cfg),
            "sweep" => parse_sweep(&mut w, sec, &mut cfg),
            _ => unreachable!(),
        }
    }

    if w.violations.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config {
            violations: w.violations,
        })
    }
}

fn parse_domain(w: &mut Walker, sec: &toml::Table, cfg: &mut RunConfig) {
    for (key, value) in sec {
        match key.as_str() {
            "lengths" => {
                let Some(arr) = value.as_array() else {
                    w.violations
                        .push("[domain] lengths must be an array of numbers".into());
                    continue;
                };
                let mut lengths = Vec::new();
                for v in arr {
                    if let Some(f) = w.float("domain", "lengths", v) {
                        lengths.push(f);
                    }
                }
                match DomainSpec::new(&lengths) {
                    Ok(dom) => cfg.domain = dom,
                    Err(e) => w.violations.push(format!("[domain] lengths: {e}")),
                }
            }
            other => w.violations.push(format!(
                "[domain] unknown key {other:?}; nearest valid key is {:?}",
                nearest(other, DOMAIN_KEYS)
            )),
        }
    }
}

fn parse_parameters(w: &mut Walker, sec: &toml::Table, cfg: &mut RunConfig) {
    let raw = cfg.params.raw();
    let mut vals = [
        raw.d1, raw.d2, raw.d3, raw.c1, raw.c2, raw.c3, raw.a, raw.b, raw.k, raw.lambda, raw.n_rev,
    ];
    for (key, value) in sec {
        match PARAMETER_KEYS.iter().position(|k| k == key) {
            Some(idx) => {
                if let Some(f) = w.float("parameters", key, value) {
                    if let Some(f) = w.positive("parameters", key, f) {
                        vals[idx] = f;
                    }
                }
            }
            None => w.violations.push(format!(
                "[parameters] unknown key {key:?}; nearest valid key is {:?}",
                nearest(key, PARAMETER_KEYS)
            )),
        }
    }
    match Parameters::new(
        vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8], vals[9],
        vals[10],
    ) {
        Ok(p) => cfg.params = p,
        Err(e) => w.violations.push(format!("[parameters] {e}")),
    }
}

fn parse_integrator(w: &mut Walker, sec: &toml::Table, cfg: &mut RunConfig) {
    for (key, value) in sec {
        match key.as_str() {
            "dt" => {
                if let Some(f) = w.float("integrator", key, value) {
                    if let Some(f) = w.positive("integrator", key, f) {
                        cfg.integ.dt = f;
                    }
                }
            }
            "t_end" => {
                if let Some(f) = w.float("integrator", key, value) {
                    if let Some(f) = w.positive("integrator", key, f) {
                        cfg.integ.t_end = f;
                    }
                }
            }
            "tol" => {
                if let Some(f) = w.float("integrator", key, value) {
                    if let Some(f) = w.positive("integrator", key, f) {
                        cfg.integ.tol = f;
                    }
                }
            }
            "scheme" => match value.as_str() {
                Some("if_euler") => cfg.integ.scheme = Scheme::IfEuler,
                Some("if_rk2") => cfg.integ.scheme = Scheme::IfRk2,
                other => w.violations.push(format!(
                    "[integrator] scheme must be \"if_euler\" or \"if_rk2\", got {other:?}"
                )),
            },
            "sample_every" => {
                if let Some(i) = w.integer("integrator", key, value) {
                    if i >= 1 {
                        cfg.integ.sample_every = i as usize;
                    } else {
                        w.violations
                            .push(format!("[integrator] sample_every must be >= 1, got {i}"));
                    }
                }
            }
            "store_every" => {
                if let Some(i) = w.integer("integrator", key, value) {
                    if i >= 0 {
                        cfg.integ.store_every = i as usize;
                    } else {
                        w.violations
                            .push(format!("[integrator] store_every must be >= 0, got {i}"));
                    }
                }
            }
            "adaptive" => match value.as_bool() {
                Some(b) => cfg.integ.adaptive = b,
                None => w
                    .violations
                    .push("[integrator] adaptive must be a boolean".into()),
            },
            other => {
                let valid = INTEGRATOR_KEYS.iter().chain(INTEGRATOR_BOOL_KEYS.iter());
                w.violations.push(format!(
                    "[integrator] unknown key {other:?}; nearest valid key is {:?}",
                    nearest(other, valid.copied())
                ));
            }
        }
    }
}

fn parse_analysis(w: &mut Walker, sec: &toml::Table, cfg: &mut RunConfig) {
    let mut init_kind: Option<String> = None;
    let mut radius = match cfg.init {
        InitSpec::RandomBall { radius } => radius,
        _ => defaults::RADIUS,
    };
    let mut init_modes: Vec<ModeAmp> = Vec::new();
    let mut checkpoint: Option<PathBuf> = None;

    for (key, value) in sec {
        match key.as_str() {
            "modes" => {
                if let Some(i) = w.integer("analysis", key, value) {
                    if i >= 1 {
                        cfg.modes = i as usize;
                    } else {
                        w.violations
                            .push(format!("[analysis] modes must be >= 1, got {i}"));
                    }
                }
            }
            "seed" => {
                if let Some(i) = w.integer("analysis", key, value) {
                    cfg.seed = i as u64;
                }
            }
            "ensemble" => {
                if let Some(i) = w.integer("analysis", key, value) {
                    if i >= 1 {
                        cfg.ensemble = i as usize;
                    } else {
                        w.violations
                            .push(format!("[analysis] ensemble must be >= 1, got {i}"));
                    }
                }
            }
            "m_max" => {
                if let Some(i) = w.integer("analysis", key, value) {
                    if i >= 1 {
                        cfg.m_max = i as usize;
                    } else {
                        w.violations
                            .push(format!("[analysis] m_max must be >= 1, got {i}"));
                    }
                }
            }
            "embed_budget" => {
                if let Some(i) = w.integer("analysis", key, value) {
                    if i >= 1000 {
                        cfg.embed_budget = i as usize;
                    } else {
                        w.violations
                            .push(format!("[analysis] embed_budget must be >= 1000, got {i}"));
                    }
                }
            }
            "renorm_every" => {
                if let Some(i) = w.integer("analysis", key, value) {
                    if i >= 1 {
                        cfg.renorm_every = i as usize;
                    } else {
                        w.violations
                            .push(format!("[analysis] renorm_every must be >= 1, got {i}"));
                    }
                }
            }
            "radius" => {
                if let Some(f) = w.float("analysis", key, value) {
                    if let Some(f) = w.positive("analysis", key, f) {
                        radius = f;
                    }
                }
            }
            "qstar" => {
                if let Some(f) = w.float("analysis", key, value) {
                    if let Some(f) = w.positive("analysis", key, f) {
                        cfg.qstar = f;
                    }
                }
            }
            "tail_fraction" => {
                if let Some(f) = w.float("analysis", key, value) {
                    if f > 0.0 && f <= 1.0 {
                        cfg.tail_fraction = f;
                    } else {
                        w.violations.push(format!(
                            "[analysis] tail_fraction must lie in (0, 1], got {f}"
                        ));
                    }
                }
            }
            "warmup_fraction" => {
                if let Some(f) = w.float("analysis", key, value) {
                    if (0.0..1.0).contains(&f) {
                        cfg.warmup_fraction = f;
                    } else {
                        w.violations.push(format!(
                            "[analysis] warmup_fraction must lie in [0, 1), got {f}"
                        ));
                    }
                }
            }
            "init" => match value.as_str() {
                Some(s @ ("random-ball" | "modes" | "checkpoint")) => {
                    init_kind = Some(s.to_string());
                }
                other => w.violations.push(format!(
                    "[analysis] init must be \"random-ball\", \"modes\", or \"checkpoint\", got {other:?}"
                )),
            },
            "init_modes" => {
                let Some(arr) = value.as_array() else {
                    w.violations
                        .push("[analysis] init_modes must be an array of tables".into());
                    continue;
                };
                for entry in arr {
                    let Some(t) = entry.as_table() else {
                        w.violations.push(
                            "[analysis] init_modes entries must be tables {comp, mode, amp}"
                                .into(),
                        );
                        continue;
                    };
                    let comp = t.get("comp").and_then(|v| v.as_str()).and_then(|name| {
                        crate::model::COMPONENT_NAMES.iter().position(|c| *c == name)
                    });
                    let mode = t.get("mode").and_then(|v| v.as_integer());
                    let amp = t
                        .get("amp")
                        .and_then(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)));
                    match (comp, mode, amp) {
                        (Some(comp), Some(mode), Some(amp)) if mode >= 1 => {
                            init_modes.push(ModeAmp {
                                comp,
                                mode: mode as usize,
                                amp,
                            });
                        }
                        _ => w.violations.push(format!(
                            "[analysis] init_modes entry {entry} must have comp in {:?}, mode >= 1, and a numeric amp",
                            crate::model::COMPONENT_NAMES
                        )),
                    }
                }
            }
            "checkpoint" => match value.as_str() {
                Some(p) => checkpoint = Some(PathBuf::from(p)),
                None => w
                    .violations
                    .push("[analysis] checkpoint must be a path string".into()),
            },
            "out_dir" => match value.as_str() {
                Some(p) => cfg.out_dir = PathBuf::from(p),
                None => w
                    .violations
                    .push("[analysis] out_dir must be a path string".into()),
            },
            other => w.violations.push(format!(
                "[analysis] unknown key {other:?}; nearest valid key is {:?}",
                nearest(other, ANALYSIS_KEYS)
            )),
        }
    }

    match init_kind.as_deref() {
        None | Some("random-ball") => cfg.init = InitSpec::RandomBall { radius },
        Some("modes") => {
            if init_modes.is_empty() {
                w.violations
                    .push("[analysis] init = \"modes\" requires a nonempty init_modes list".into());
            } else {
                cfg.init = InitSpec::Modes(init_modes);
            }
        }
        Some("checkpoint") => match checkpoint {
            Some(p) => cfg.init = InitSpec::Checkpoint(p),
            None => w
                .violations
                .push("[analysis] init = \"checkpoint\" requires a checkpoint path".into()),
        },
        Some(_) => unreachable!(),
    }
}

fn parse_sweep(w: &mut Walker, sec: &toml::Table, cfg: &mut RunConfig) {
    let mut param = None;
    let mut values = Vec::new();
    for (key, value) in sec {
        match key.as_str() {
            "param" => match value.as_str() {
                Some(p) if PARAMETER_KEYS.contains(&p) => param = Some(p.to_string()),
                other => w.violations.push(format!(
                    "[sweep] param must be one of {PARAMETER_KEYS:?}, got {other:?}"
                )),
            },
            "values" => {
                let Some(arr) = value.as_array() else {
                    w.violations
                        .push("[sweep] values must be an array of numbers".into());
                    continue;
                };
                for v in arr {
                    if let Some(f) = w.float("sweep", "values", v) {
                        if let Some(f) = w.positive("sweep", "values", f) {
                            values.push(f);
                        }
                    }
                }
            }
            other => w.violations.push(format!(
                "[sweep] unknown key {other:?}; nearest valid key is {:?}",
                nearest(other, SWEEP_KEYS)
            )),
        }
    }
    match (param, values.is_empty()) {
        (Some(param), false) => cfg.sweep = Some(SweepSpec { param, values }),
        (Some(_), true) => w
            .violations
            .push("[sweep] values must contain at least one number".into()),
        (None, false) => w.violations.push("[sweep] param is required".into()),
        (None, true) => {}
    }
}

fn fmt_f64(v: f64) -> String {
    // Keep floats recognizable as floats for the TOML parser.
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("nan") {
        s
    } else {
        format!("{s}.0")
    }
}

/// Emits a configuration as a config-file string; `parse_config` of the
/// result reproduces the configuration exactly.
pub fn emit_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    s.push_str("[domain]\nlengths = [");
    s.push_str(
        &cfg.domain
            .lengths()
            .iter()
            .map(|l| fmt_f64(*l))
            .collect::<Vec<_>>()
            .join(", "),
    );
    s.push_str("]\n\n[parameters]\n");
    let raw = cfg.params.raw();
    let vals = [
        raw.d1, raw.d2, raw.d3, raw.c1, raw.c2, raw.c3, raw.a, raw.b, raw.k, raw.lambda, raw.n_rev,
    ];
    for (key, v) in PARAMETER_KEYS.iter().zip(vals) {
        s.push_str(&format!("{key} = {}\n", fmt_f64(v)));
    }
    s.push_str("\n[integrator]\n");
    s.push_str(&format!("dt = {}\n", fmt_f64(cfg.integ.dt)));
    s.push_str(&format!(
        "scheme = \"{}\"\n",
        match cfg.integ.scheme {
            Scheme::IfEuler => "if_euler",
            Scheme::IfRk2 => "if_rk2",
        }
    ));
    s.push_str(&format!("t_end = {}\n", fmt_f64(cfg.integ.t_end)));
    s.push_str(&format!("sample_every = {}\n", cfg.integ.sample_every));
    s.push_str(&format!("store_every = {}\n", cfg.integ.store_every));
    s.push_str(&format!("adaptive = {}\n", cfg.integ.adaptive));
    s.push_str(&format!("tol = {}\n", fmt_f64(cfg.integ.tol)));
    s.push_str("\n[analysis]\n");
    s.push_str(&format!("modes = {}\n", cfg.modes));
    s.push_str(&format!("seed = {}\n", cfg.seed));
    s.push_str(&format!("ensemble = {}\n", cfg.ensemble));
    match &cfg.init {
        InitSpec::RandomBall { radius } => {
            s.push_str("init = \"random-ball\"\n");
            s.push_str(&format!("radius = {}\n", fmt_f64(*radius)));
        }
        InitSpec::Modes(modes) => {
            s.push_str("init = \"modes\"\n");
            let entries: Vec<String> = modes
                .iter()
                .map(|m| {
                    format!(
                        "{{ comp = \"{}\", mode = {}, amp = {} }}",
                        crate::model::COMPONENT_NAMES[m.comp],
                        m.mode,
                        fmt_f64(m.amp)
                    )
                })
                .collect();
            s.push_str(&format!("init_modes = [{}]\n", entries.join(", ")));
        }
        InitSpec::Checkpoint(p) => {
            s.push_str("init = \"checkpoint\"\n");
            s.push_str(&format!("checkpoint = {:?}\n", p.display().to_string()));
        }
    }
    s.push_str(&format!("tail_fraction = {}\n", fmt_f64(cfg.tail_fraction)));
    s.push_str(&format!("m_max = {}\n", cfg.m_max));
    s.push_str(&format!("qstar = {}\n", fmt_f64(cfg.qstar)));
    s.push_str(&format!("embed_budget = {}\n", cfg.embed_budget));
    s.push_str(&format!("renorm_every = {}\n", cfg.renorm_every));
    s.push_str(&format!(
        "warmup_fraction = {}\n",
        fmt_f64(cfg.warmup_fraction)
    ));
    s.push_str(&format!(
        "out_dir = {:?}\n",
        cfg.out_dir.display().to_string()
    ));
    if let Some(sweep) = &cfg.sweep {
        s.push_str("\n[sweep]\n");
        s.push_str(&format!("param = \"{}\"\n", sweep.param));
        s.push_str(&format!(
            "values = [{}]\n",
            sweep
                .values
                .iter()
                .map(|v| fmt_f64(*v))
                .collect::<Vec<_>>()
                .join(", ")
        ));
    }
    s
}

/// FNV-1a hash of the canonical config text, embedded in all artifacts.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut hash: u64 = 0xcbf29ce484222325;
    for byte in emit_config(cfg).bytes() {
        hash ^= byte as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    format!("{hash:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.modes, 32);
        assert_eq!(cfg.integ.sample_every, 10);
        assert_eq!(cfg.domain.lengths(), &[PI]);
    }

    #[test]
    fn nonpositive_parameter_rejected_with_positivity_message() {
        let err = parse_config("[parameters]\nd2 = -1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("d2"), "{msg}");
        assert!(msg.contains("positive"), "{msg}");
    }

    #[test]
    fn unknown_key_reports_nearest() {
        let err =
            parse_config("[parameters]\nlambdaa = 1.0\n[integrator]\ndtt = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("lambdaa") && msg.contains("\"lambda\""),
            "{msg}"
        );
        assert!(msg.contains("dtt") && msg.contains("\"dt\""), "{msg}");
    }

    #[test]
    fn all_violations_collected() {
        let err =
            parse_config("[parameters]\nd2 = -1.0\nb = 0.0\n[analysis]\ntail_fraction = 2.0\n")
                .unwrap_err();
        match err {
            Error::Config { violations } => {
                assert!(violations.len() >= 3, "{violations:?}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn roundtrip_through_emit() {
        let text = r#"
[domain]
lengths = [1.0, 2.0]

[parameters]
d1 = 0.5
b = 3.25
N = 2.0

[integrator]
dt = 0.001
scheme = "if_euler"
t_end = 7.5
sample_every = 3
adaptive = false

[analysis]
modes = 12
seed = 7
ensemble = 4
init = "modes"
init_modes = [{ comp = "v", mode = 2, amp = -0.5 }]
qstar = 0.9

[sweep]
param = "b"
values = [1.0, 2.0]
"#;
        let cfg = parse_config(text).unwrap();
        let emitted = emit_config(&cfg);
        let back = parse_config(&emitted).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(config_hash(&cfg), config_hash(&back));
    }

    #[test]
    fn checkpoint_init_requires_path() {
        let err = parse_config("[analysis]\ninit = \"checkpoint\"\n").unwrap_err();
        assert!(err.to_string().contains("checkpoint path"), "{err}");
        let ok =
            parse_config("[analysis]\ninit = \"checkpoint\"\ncheckpoint = \"x.ckpt\"\n").unwrap();
        assert_eq!(ok.init, InitSpec::Checkpoint(PathBuf::from("x.ckpt")));
    }

    #[test]
    fn sweep_requires_known_parameter() {
        let err = parse_config("[sweep]\nparam = \"bb\"\nvalues = [1.0]\n").unwrap_err();
        assert!(err.to_string().contains("param must be one of"), "{err}");
    }
}
