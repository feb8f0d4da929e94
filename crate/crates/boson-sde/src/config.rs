//! Config-file parsing for the `boson-sde` binary: a strict TOML schema with
//! flat sections `[system]`, `[sde]`, `[observables]`, `[output]`.
//!
//! Complex entries are strings in `re+im i` form (`"0.5-1.2i"`, `"i"`,
//! `"2e-3"`); plain numbers are accepted where a complex value is expected.
//! Unknown keys are rejected with a spelling suggestion, never ignored.
//! Parsing is total: any byte sequence yields `Ok` or a structured error,
//! never a panic.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use thiserror::Error;
use toml::Value;

use crate::diffusion::PauliDemo;
use crate::dnse::{build_dnse_spec, c_for_error, DnseParams};
use crate::dynamics::{SystemSpec, TwoBodyTensor};
use crate::linalg::{HermitianMatrix, ModeVector};
use crate::observables::Observable;
use crate::sde::SdeConfig;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Syntax(String),
    #[error("unknown key `{key}` in {section}{suggestion}")]
    UnknownKey {
        section: String,
        key: String,
        suggestion: String,
    },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{field}`: {detail}")]
    Invalid { field: String, detail: String },
    #[error("`{field}`: {source}")]
    Domain {
        field: String,
        source: crate::Error,
    },
}

type CResult<T> = std::result::Result<T, ConfigError>;

/// Experiment driver mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Meanfield,
    Sde,
    Lindblad,
    RandomWalk,
    Verify,
    DnseDemo,
    BetaCheck,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Meanfield,
        Mode::Sde,
        Mode::Lindblad,
        Mode::RandomWalk,
        Mode::Verify,
        Mode::DnseDemo,
        Mode::BetaCheck,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Meanfield => "meanfield",
            Mode::Sde => "sde",
            Mode::Lindblad => "lindblad",
            Mode::RandomWalk => "randomwalk",
            Mode::Verify => "verify",
            Mode::DnseDemo => "dnse-demo",
            Mode::BetaCheck => "beta-check",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .iter()
            .find(|m| m.as_str() == s)
            .copied()
            .ok_or_else(|| {
                format!(
                    "unknown mode `{s}`; expected one of {}",
                    Mode::ALL.map(|m| m.as_str()).join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    Dnse,
    Pauli,
    Explicit,
}

impl SystemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::Dnse => "dnse",
            SystemKind::Pauli => "pauli",
            SystemKind::Explicit => "explicit",
        }
    }
}

/// Fully validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub mode: Mode,
    pub kind: SystemKind,
    pub system: SystemSpec,
    pub z0: ModeVector,
    pub sde: SdeConfig,
    pub observables: Vec<(String, Observable)>,
    pub output_dir: Option<String>,
    /// Grid size for the α_⊥ maximization (verify mode).
    pub alpha_grid: usize,
    /// Bootstrap replicate count for the statistical tolerance (verify mode).
    pub bootstrap: usize,
    /// Verbatim config text, echoed into the run manifest.
    pub raw: String,
}

/// Parses `"re+im i"` style complex literals: `"1"`, `"-2.5e-3"`, `"i"`,
/// `"-i"`, `"0.5+0.5i"`, `"1-2i"`. Whitespace around terms is tolerated.
pub fn parse_complex(input: &str) -> std::result::Result<C64, String> {
    let s: String = input.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    if let Some(body) = s.strip_suffix(['i', 'I']) {
        // Split body into real part and imaginary coefficient at the last
        // +/- that is not an exponent sign and not the leading sign.
        let bytes = body.as_bytes();
        let mut split = None;
        for pos in (1..bytes.len()).rev() {
            let c = bytes[pos];
            if (c == b'+' || c == b'-') && !matches!(bytes[pos - 1], b'e' | b'E') {
                split = Some(pos);
                break;
            }
        }
        let (re_str, im_str) = match split {
            Some(pos) => (&body[..pos], &body[pos..]),
            None => ("", body),
        };
        let re = if re_str.is_empty() {
            0.0
        } else {
            parse_float(re_str)?
        };
        let im = match im_str {
            "" | "+" => 1.0,
            "-" => -1.0,
            other => parse_float(other)?,
        };
        Ok(C64::new(re, im))
    } else {
        Ok(C64::new(parse_float(&s)?, 0.0))
    }
}

fn parse_float(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s
        .parse()
        .map_err(|_| format!("`{s}` is not a number"))?;
    if !v.is_finite() {
        return Err(format!("`{s}` is not finite"));
    }
    Ok(v)
}

fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, &ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, &cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn suggest(key: &str, known: &[&str]) -> String {
    known
        .iter()
        .map(|k| {
            let d = if k.starts_with(key) || key.starts_with(k) {
                1
            } else {
                edit_distance(key, k)
            };
            (d, *k)
        })
        .filter(|(d, _)| *d <= 2)
        .min_by_key(|(d, _)| *d)
        .map(|(_, k)| format!("; did you mean `{k}`?"))
        .unwrap_or_default()
}

fn reject_unknown(table: &toml::Table, section: &str, known: &[&str]) -> CResult<()> {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                section: section.to_string(),
                key: key.clone(),
                suggestion: suggest(key, known),
            });
        }
    }
    Ok(())
}

fn invalid(field: impl Into<String>, detail: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.into(),
        detail: detail.into(),
    }
}

fn get_f64(table: &toml::Table, field: &str) -> CResult<Option<f64>> {
    match table.get(field.rsplit('.').next().unwrap_or(field)) {
        None => Ok(None),
        Some(Value::Float(v)) => Ok(Some(*v)),
        Some(Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(other) => Err(invalid(field, format!("expected a number, got {other}"))),
    }
}

fn get_usize(table: &toml::Table, field: &str) -> CResult<Option<usize>> {
    match table.get(field.rsplit('.').next().unwrap_or(field)) {
        None => Ok(None),
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
        Some(other) => Err(invalid(
            field,
            format!("expected a non-negative integer, got {other}"),
        )),
    }
}

fn get_u64(table: &toml::Table, field: &str) -> CResult<Option<u64>> {
    match table.get(field.rsplit('.').next().unwrap_or(field)) {
        None => Ok(None),
        Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
        Some(other) => Err(invalid(
            field,
            format!("expected a non-negative integer, got {other}"),
        )),
    }
}

fn get_bool(table: &toml::Table, field: &str) -> CResult<Option<bool>> {
    match table.get(field.rsplit('.').next().unwrap_or(field)) {
        None => Ok(None),
        Some(Value::Boolean(v)) => Ok(Some(*v)),
        Some(other) => Err(invalid(field, format!("expected true/false, got {other}"))),
    }
}

fn get_str<'t>(table: &'t toml::Table, field: &str) -> CResult<Option<&'t str>> {
    match table.get(field.rsplit('.').next().unwrap_or(field)) {
        None => Ok(None),
        Some(Value::String(v)) => Ok(Some(v)),
        Some(other) => Err(invalid(field, format!("expected a string, got {other}"))),
    }
}

fn value_as_complex(v: &Value, field: &str) -> CResult<C64> {
    match v {
        Value::String(s) => parse_complex(s).map_err(|e| invalid(field, e)),
        Value::Float(f) => Ok(C64::new(*f, 0.0)),
        Value::Integer(i) => Ok(C64::new(*i as f64, 0.0)),
        other => Err(invalid(
            field,
            format!("expected a complex entry (string or number), got {other}"),
        )),
    }
}

fn value_as_complex_vector(v: &Value, field: &str) -> CResult<Vec<C64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| invalid(field, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, e)| value_as_complex(e, &format!("{field}[{i}]")))
        .collect()
}

fn value_as_complex_matrix(v: &Value, field: &str) -> CResult<DMatrix<C64>> {
    let rows = v
        .as_array()
        .ok_or_else(|| invalid(field, "expected a nested array (matrix)"))?;
    if rows.is_empty() {
        return Err(invalid(field, "matrix must not be empty"));
    }
    let n = rows.len();
    let mut out = DMatrix::zeros(n, n);
    for (j, row) in rows.iter().enumerate() {
        let entries = value_as_complex_vector(row, &format!("{field}[{j}]"))?;
        if entries.len() != n {
            return Err(invalid(
                format!("{field}[{j}]"),
                format!("expected {n} entries for a square matrix, got {}", entries.len()),
            ));
        }
        for (k, e) in entries.into_iter().enumerate() {
            out[(j, k)] = e;
        }
    }
    Ok(out)
}

fn value_as_tensor(v: &Value, field: &str, modes: usize) -> CResult<TwoBodyTensor> {
    let expect_arr = |val: &Value, f: &str| -> CResult<Vec<Value>> {
        val.as_array()
            .map(|a| a.to_vec())
            .ok_or_else(|| invalid(f, "expected an array"))
    };
    let level0 = expect_arr(v, field)?;
    if level0.len() != modes {
        return Err(invalid(
            field,
            format!("expected {modes} outer entries, got {}", level0.len()),
        ));
    }
    let mut entries = vec![C64::new(0.0, 0.0); modes.pow(4)];
    for (j, vj) in level0.iter().enumerate() {
        let level1 = expect_arr(vj, &format!("{field}[{j}]"))?;
        if level1.len() != modes {
            return Err(invalid(format!("{field}[{j}]"), "tensor rank mismatch"));
        }
        for (k, vk) in level1.iter().enumerate() {
            let level2 = expect_arr(vk, &format!("{field}[{j}][{k}]"))?;
            if level2.len() != modes {
                return Err(invalid(format!("{field}[{j}][{k}]"), "tensor rank mismatch"));
            }
            for (l, vl) in level2.iter().enumerate() {
                let level3 =
                    value_as_complex_vector(vl, &format!("{field}[{j}][{k}][{l}]"))?;
                if level3.len() != modes {
                    return Err(invalid(
                        format!("{field}[{j}][{k}][{l}]"),
                        "tensor rank mismatch",
                    ));
                }
                for (m, e) in level3.into_iter().enumerate() {
                    entries[((j * modes + k) * modes + l) * modes + m] = e;
                }
            }
        }
    }
    TwoBodyTensor::from_fn(modes, |j, k, l, m| {
        entries[((j * modes + k) * modes + l) * modes + m]
    })
    .map_err(|e| ConfigError::Domain {
        field: field.to_string(),
        source: e,
    })
}

fn hermitian_from_value(v: &Value, field: &str) -> CResult<HermitianMatrix> {
    let m = value_as_complex_matrix(v, field)?;
    HermitianMatrix::new(m).map_err(|e| ConfigError::Domain {
        field: field.to_string(),
        source: e,
    })
}

const SYSTEM_KEYS: &[&str] = &[
    "kind", "bosons", "z0", "modes", "coupling", "epsilon", "hopping", "h0", "tensor", "xs",
];
const SDE_KEYS: &[&str] = &[
    "dt",
    "t_final",
    "samples",
    "seed",
    "renormalize",
    "snapshot_times",
    "alpha_grid",
    "bootstrap",
];
const OUTPUT_KEYS: &[&str] = &["dir"];
const SECTIONS: &[&str] = &["system", "sde", "observables", "output"];

fn section<'t>(root: &'t toml::Table, name: &str) -> CResult<Option<&'t toml::Table>> {
    match root.get(name) {
        None => Ok(None),
        Some(Value::Table(t)) => Ok(Some(t)),
        Some(other) => Err(invalid(name, format!("expected a [{name}] table, got {other}"))),
    }
}

struct SdeSection {
    dt: Option<f64>,
    t_final: Option<f64>,
    samples: Option<usize>,
    seed: u64,
    renormalize: bool,
    snapshot_times: Option<Vec<f64>>,
    alpha_grid: usize,
    bootstrap: usize,
}

fn parse_sde_section(root: &toml::Table) -> CResult<SdeSection> {
    let empty = toml::Table::new();
    let t = section(root, "sde")?.unwrap_or(&empty);
    reject_unknown(t, "[sde]", SDE_KEYS)?;
    let snapshot_times = match t.get("snapshot_times") {
        None => None,
        Some(Value::Array(arr)) => {
            let mut times = Vec::with_capacity(arr.len());
            for (i, e) in arr.iter().enumerate() {
                let v = match e {
                    Value::Float(f) => *f,
                    Value::Integer(n) => *n as f64,
                    other => {
                        return Err(invalid(
                            format!("sde.snapshot_times[{i}]"),
                            format!("expected a number, got {other}"),
                        ))
                    }
                };
                times.push(v);
            }
            Some(times)
        }
        Some(other) => {
            return Err(invalid(
                "sde.snapshot_times",
                format!("expected an array of numbers, got {other}"),
            ))
        }
    };
    Ok(SdeSection {
        dt: get_f64(t, "sde.dt")?,
        t_final: get_f64(t, "sde.t_final")?,
        samples: get_usize(t, "sde.samples")?,
        seed: get_u64(t, "sde.seed")?.unwrap_or(0),
        renormalize: get_bool(t, "sde.renormalize")?.unwrap_or(true),
        snapshot_times,
        alpha_grid: get_usize(t, "sde.alpha_grid")?.unwrap_or(256),
        bootstrap: get_usize(t, "sde.bootstrap")?.unwrap_or(64),
    })
}

fn parse_system(
    root: &toml::Table,
    sde: &SdeSection,
) -> CResult<(SystemKind, SystemSpec, ModeVector)> {
    let sys = section(root, "system")?
        .ok_or_else(|| ConfigError::Missing("system".into()))?;
    reject_unknown(sys, "[system]", SYSTEM_KEYS)?;
    let kind_str = get_str(sys, "system.kind")?
        .ok_or_else(|| ConfigError::Missing("system.kind".into()))?;
    let kind = match kind_str {
        "dnse" => SystemKind::Dnse,
        "pauli" => SystemKind::Pauli,
        "explicit" => SystemKind::Explicit,
        other => {
            return Err(invalid(
                "system.kind",
                format!("`{other}` is not one of dnse, pauli, explicit"),
            ))
        }
    };
    let bosons = get_usize(sys, "system.bosons")?
        .ok_or_else(|| ConfigError::Missing("system.bosons".into()))?;

    let allowed: &[&str] = match kind {
        SystemKind::Dnse => &["kind", "bosons", "z0", "modes", "coupling", "epsilon", "hopping"],
        SystemKind::Pauli => &["kind", "bosons", "z0"],
        SystemKind::Explicit => &["kind", "bosons", "z0", "h0", "tensor", "xs"],
    };
    for key in sys.keys() {
        if !allowed.contains(&key.as_str()) {
            return Err(invalid(
                format!("system.{key}"),
                format!("not applicable to kind = \"{}\"", kind.as_str()),
            ));
        }
    }

    let spec = match kind {
        SystemKind::Dnse => {
            let modes = get_usize(sys, "system.modes")?
                .ok_or_else(|| ConfigError::Missing("system.modes".into()))?;
            let coupling = match (get_f64(sys, "system.coupling")?, get_f64(sys, "system.epsilon")?) {
                (Some(_), Some(_)) => {
                    return Err(invalid(
                        "system.coupling",
                        "give either coupling or epsilon, not both",
                    ))
                }
                (Some(c), None) => c,
                (None, Some(eps)) => {
                    let t = sde.t_final.ok_or_else(|| {
                        invalid("system.epsilon", "needs sde.t_final to derive the coupling")
                    })?;
                    c_for_error(t, eps).map_err(|e| ConfigError::Domain {
                        field: "system.epsilon".into(),
                        source: e,
                    })?
                }
                (None, None) => {
                    return Err(ConfigError::Missing("system.coupling (or system.epsilon)".into()))
                }
            };
            let params = DnseParams::new(modes, bosons, coupling).map_err(|e| {
                ConfigError::Domain {
                    field: "system".into(),
                    source: e,
                }
            })?;
            let params = match sys.get("hopping") {
                None => params,
                Some(Value::String(s)) if s == "ring" => params,
                Some(Value::String(s)) if s == "none" => params
                    .with_hopping(HermitianMatrix::zeros(modes))
                    .map_err(|e| ConfigError::Domain {
                        field: "system.hopping".into(),
                        source: e,
                    })?,
                Some(Value::String(other)) => {
                    return Err(invalid(
                        "system.hopping",
                        format!("`{other}` is not \"ring\", \"none\", or a matrix"),
                    ))
                }
                Some(v) => {
                    let h0 = hermitian_from_value(v, "system.hopping")?;
                    params.with_hopping(h0).map_err(|e| ConfigError::Domain {
                        field: "system.hopping".into(),
                        source: e,
                    })?
                }
            };
            build_dnse_spec(&params).map_err(|e| ConfigError::Domain {
                field: "system".into(),
                source: e,
            })?
        }
        SystemKind::Pauli => {
            if bosons == 0 {
                return Err(invalid("system.bosons", "must be ≥ 1"));
            }
            PauliDemo::new(bosons).spec()
        }
        SystemKind::Explicit => {
            let h0_val = sys
                .get("h0")
                .ok_or_else(|| ConfigError::Missing("system.h0".into()))?;
            let h0 = hermitian_from_value(h0_val, "system.h0")?;
            let modes = h0.dim();
            let tensor = match sys.get("tensor") {
                None => TwoBodyTensor::zeros(modes),
                Some(v) => value_as_tensor(v, "system.tensor", modes)?,
            };
            let xs = match sys.get("xs") {
                None => Vec::new(),
                Some(Value::Array(items)) => items
                    .iter()
                    .enumerate()
                    .map(|(i, v)| hermitian_from_value(v, &format!("system.xs[{i}]")))
                    .collect::<CResult<Vec<_>>>()?,
                Some(other) => {
                    return Err(invalid(
                        "system.xs",
                        format!("expected an array of matrices, got {other}"),
                    ))
                }
            };
            SystemSpec::new(h0, tensor, xs, bosons).map_err(|e| ConfigError::Domain {
                field: "system".into(),
                source: e,
            })?
        }
    };

    let z0 = match sys.get("z0") {
        None => ModeVector::basis_state(spec.modes(), 0),
        Some(v) => {
            let entries = value_as_complex_vector(v, "system.z0")?;
            if entries.len() != spec.modes() {
                return Err(invalid(
                    "system.z0",
                    format!("expected {} entries, got {}", spec.modes(), entries.len()),
                ));
            }
            ModeVector::unit(DVector::from_vec(entries)).map_err(|e| ConfigError::Domain {
                field: "system.z0".into(),
                source: e,
            })?
        }
    };
    Ok((kind, spec, z0))
}

fn parse_observables(
    root: &toml::Table,
    modes: usize,
) -> CResult<Vec<(String, Observable)>> {
    let table = match section(root, "observables")? {
        None => {
            return Ok(vec![(
                "n0".to_string(),
                Observable::mode_occupation(modes, 0),
            )])
        }
        Some(t) => t,
    };
    // Deterministic order regardless of declaration order in the file.
    let sorted: BTreeMap<&String, &Value> = table.iter().collect();
    let mut out = Vec::with_capacity(sorted.len());
    for (name, value) in sorted {
        let matrix = hermitian_from_value(value, &format!("observables.{name}"))?;
        if matrix.dim() != modes {
            return Err(invalid(
                format!("observables.{name}"),
                format!("one-body matrix must be {modes}×{modes}"),
            ));
        }
        out.push((name.clone(), Observable::one_body(matrix)));
    }
    if out.is_empty() {
        out.push(("n0".to_string(), Observable::mode_occupation(modes, 0)));
    }
    Ok(out)
}

fn mode_requirements(mode: Mode) -> (bool, bool, bool) {
    // (needs dt+t_final, needs samples, uses sde section at all)
    match mode {
        Mode::Meanfield | Mode::Lindblad => (true, false, true),
        Mode::Sde | Mode::RandomWalk | Mode::Verify | Mode::DnseDemo => (true, true, true),
        Mode::BetaCheck => (false, true, true),
    }
}

/// Parses and fully validates a config file for the given mode.
pub fn parse_config(text: &str, mode: Mode) -> CResult<RunConfig> {
    let root: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    for key in root.keys() {
        if !SECTIONS.contains(&key.as_str()) {
            return Err(ConfigError::UnknownKey {
                section: "top level".into(),
                key: key.clone(),
                suggestion: suggest(key, SECTIONS),
            });
        }
    }
    let sde_section = parse_sde_section(&root)?;
    let (kind, system, z0) = parse_system(&root, &sde_section)?;

    if mode == Mode::DnseDemo && kind != SystemKind::Dnse {
        return Err(invalid(
            "system.kind",
            "dnse-demo mode requires kind = \"dnse\"",
        ));
    }

    let (needs_times, needs_samples, _) = mode_requirements(mode);
    if needs_times {
        if sde_section.dt.is_none() {
            return Err(ConfigError::Missing("sde.dt".into()));
        }
        if sde_section.t_final.is_none() {
            return Err(ConfigError::Missing("sde.t_final".into()));
        }
    }
    if needs_samples && sde_section.samples.is_none() {
        return Err(ConfigError::Missing("sde.samples".into()));
    }

    let t_final = sde_section.t_final.unwrap_or(0.0);
    let dt = sde_section.dt.unwrap_or(1.0);
    let snapshot_times = sde_section
        .snapshot_times
        .clone()
        .unwrap_or_else(|| SdeConfig::uniform_snapshots(t_final, 10));
    let sde = SdeConfig {
        dt,
        t_final,
        samples: sde_section.samples.unwrap_or(1),
        seed: sde_section.seed,
        renormalize: sde_section.renormalize,
        snapshot_times,
    };
    if mode != Mode::BetaCheck {
        sde.validate().map_err(|e| ConfigError::Domain {
            field: "sde".into(),
            source: e,
        })?;
    }

    let observables = parse_observables(&root, system.modes())?;

    let output_dir = match section(&root, "output")? {
        None => None,
        Some(t) => {
            reject_unknown(t, "[output]", OUTPUT_KEYS)?;
            get_str(t, "output.dir")?.map(str::to_string)
        }
    };

    Ok(RunConfig {
        mode,
        kind,
        system,
        z0,
        sde,
        observables,
        output_dir,
        alpha_grid: sde_section.alpha_grid.max(1),
        bootstrap: sde_section.bootstrap,
        raw: text.to_string(),
    })
}
