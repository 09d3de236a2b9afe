//! Line-based `key = value` scenario configuration.
//!
//! The grammar is deliberately flat: one key per line, `#` comments,
//! parameter families spelled as `name arg1 arg2 ...`. Unknown and
//! duplicate keys are rejected.

use std::collections::BTreeSet;
use std::path::PathBuf;

use tdosc_core::nalgebra::{Matrix4, Vector4};
use tdosc_core::{
    CoreError, FramePipeline, GaussianState, ParamFamily, RefMassMode, SystemParams, TimeGrid,
};

/// A fully validated scenario.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub params: SystemParams,
    pub grid: TimeGrid,
    pub state: GaussianState,
    pub pipelines: Vec<FramePipeline>,
    pub fock_enabled: bool,
    pub fock_dim: usize,
    pub output_dir: Option<PathBuf>,
}

/// Configuration failure with enough context to locate it.
#[derive(Debug)]
pub enum ConfigError {
    Syntax { line: usize, msg: String },
    Semantic { key: String, msg: String },
    MissingKey(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Syntax { line, msg } => write!(f, "line {line}: {msg}"),
            ConfigError::Semantic { key, msg } => write!(f, "key `{key}`: {msg}"),
            ConfigError::MissingKey(key) => write!(f, "missing key `{key}`"),
        }
    }
}

impl std::error::Error for ConfigError {}

const KNOWN_KEYS: &[&str] = &[
    "m1",
    "m2",
    "w1",
    "w2",
    "k",
    "grid",
    "ref_mass_mode",
    "state",
    "mu",
    "sigma",
    "pipelines",
    "fock",
    "fock_dim",
    "output_dir",
];

struct RawConfig<'a> {
    entries: Vec<(usize, &'a str, &'a str)>,
}

impl<'a> RawConfig<'a> {
    fn parse(text: &'a str) -> Result<Self, ConfigError> {
        let mut entries = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, raw_line) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw_line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("expected `key = value`, got `{line}`"),
                });
            };
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("unknown key `{key}`"),
                });
            }
            if !seen.insert(key) {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("duplicate key `{key}`"),
                });
            }
            entries.push((line_no, key, value));
        }
        Ok(RawConfig { entries })
    }

    fn get(&self, key: &str) -> Option<&'a str> {
        self.entries
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(_, _, v)| *v)
    }

    fn require(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::MissingKey(key.into()))
    }
}

fn semantic(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Semantic {
        key: key.into(),
        msg: msg.into(),
    }
}

fn parse_floats(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| semantic(key, format!("`{tok}` is not a number")))
        })
        .collect()
}

fn parse_family(key: &str, value: &str) -> Result<ParamFamily, ConfigError> {
    let mut toks = value.split_whitespace();
    let name = toks
        .next()
        .ok_or_else(|| semantic(key, "empty family specification"))?;
    let args: Vec<f64> = toks
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| semantic(key, format!("`{tok}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    let expect = |n: usize| -> Result<(), ConfigError> {
        if args.len() == n {
            Ok(())
        } else {
            Err(semantic(
                key,
                format!("family `{name}` takes {n} arguments, got {}", args.len()),
            ))
        }
    };
    match name {
        "constant" => {
            expect(1)?;
            Ok(ParamFamily::Constant(args[0]))
        }
        "exponential" => {
            expect(2)?;
            Ok(ParamFamily::Exponential {
                c0: args[0],
                rate: args[1],
            })
        }
        "power_law" => {
            expect(3)?;
            Ok(ParamFamily::PowerLaw {
                c0: args[0],
                a: args[1],
                n: args[2],
            })
        }
        "harmonic" => {
            expect(4)?;
            Ok(ParamFamily::Harmonic {
                c0: args[0],
                amplitude: args[1],
                nu: args[2],
                phase: args[3],
            })
        }
        "tabulated" => {
            if args.len() < 10 || args.len() % 2 != 0 {
                return Err(semantic(
                    key,
                    "family `tabulated` takes t/value pairs, at least five of them",
                ));
            }
            Ok(ParamFamily::Tabulated(
                args.chunks(2).map(|c| (c[0], c[1])).collect(),
            ))
        }
        other => Err(semantic(key, format!("unknown family `{other}`"))),
    }
}

fn default_mu() -> Vector4<f64> {
    Vector4::new(1.0, 0.5, 0.0, 0.0)
}

/// Parse and validate a scenario configuration.
pub fn parse_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    let raw = RawConfig::parse(text)?;

    let grid_vals = parse_floats("grid", raw.require("grid")?)?;
    let (t0, t1, h) = match grid_vals.as_slice() {
        [t0, t1] => (*t0, *t1, 1e-3),
        [t0, t1, h] => (*t0, *t1, *h),
        _ => return Err(semantic("grid", "expected `t0 t1 [h]`")),
    };
    if !(t1 > t0) {
        return Err(semantic("grid", format!("need t1 > t0, got {t0} {t1}")));
    }
    let grid = TimeGrid::new(t0, t1, h).map_err(|e| semantic("grid", e.to_string()))?;

    let ref_mass_mode = match raw.get("ref_mass_mode").unwrap_or("unity") {
        "unity" => RefMassMode::Unity,
        "geometric_mean" => RefMassMode::GeometricMean,
        other => {
            return Err(semantic(
                "ref_mass_mode",
                format!("expected `unity` or `geometric_mean`, got `{other}`"),
            ))
        }
    };

    let window = (t0, grid.end().max(t1));
    let params = SystemParams::new(
        parse_family("m1", raw.require("m1")?)?,
        parse_family("m2", raw.require("m2")?)?,
        parse_family("w1", raw.require("w1")?)?,
        parse_family("w2", raw.require("w2")?)?,
        parse_family("k", raw.require("k")?)?,
        window,
        ref_mass_mode,
    )
    .map_err(|e| match &e {
        CoreError::NonpositiveMass { index, .. } => semantic(&format!("m{index}"), e.to_string()),
        _ => semantic("grid", e.to_string()),
    })?;

    let state = match raw.get("state").unwrap_or("displaced") {
        "vacuum" => GaussianState::vacuum(),
        "displaced" => GaussianState::displaced(default_mu()),
        "custom" => {
            let mu_vals = parse_floats("mu", raw.require("mu")?)?;
            if mu_vals.len() != 4 {
                return Err(semantic("mu", "expected four numbers: x1 x2 p1 p2"));
            }
            let mu = Vector4::new(mu_vals[0], mu_vals[1], mu_vals[2], mu_vals[3]);
            let sigma = match raw.get("sigma") {
                None => 0.5 * Matrix4::identity(),
                Some(text) => {
                    let vals = parse_floats("sigma", text)?;
                    if vals.len() != 10 {
                        return Err(semantic(
                            "sigma",
                            "expected the 10 upper-triangle entries in row-major order",
                        ));
                    }
                    let mut m = Matrix4::zeros();
                    let mut idx = 0;
                    for i in 0..4 {
                        for j in i..4 {
                            m[(i, j)] = vals[idx];
                            m[(j, i)] = vals[idx];
                            idx += 1;
                        }
                    }
                    m
                }
            };
            GaussianState::new(mu, sigma).map_err(|e| semantic("sigma", e.to_string()))?
        }
        other => {
            return Err(semantic(
                "state",
                format!("expected `vacuum`, `displaced` or `custom`, got `{other}`"),
            ))
        }
    };

    let pipelines = match raw.get("pipelines") {
        None => FramePipeline::all().to_vec(),
        Some(text) => {
            let mut list = Vec::new();
            for tok in text.split_whitespace() {
                let p = FramePipeline::from_name(tok)
                    .ok_or_else(|| semantic("pipelines", format!("unknown pipeline `{tok}`")))?;
                if !list.contains(&p) {
                    list.push(p);
                }
            }
            if list.is_empty() {
                return Err(semantic("pipelines", "at least one pipeline required"));
            }
            list
        }
    };

    let fock_enabled = match raw.get("fock").unwrap_or("off") {
        "on" | "true" => true,
        "off" | "false" => false,
        other => {
            return Err(semantic(
                "fock",
                format!("expected `on` or `off`, got `{other}`"),
            ))
        }
    };
    let fock_dim = match raw.get("fock_dim") {
        None => 30,
        Some(text) => text
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|d| (2..=40).contains(d))
            .ok_or_else(|| semantic("fock_dim", "expected an integer in [2, 40]"))?,
    };

    let output_dir = raw.get("output_dir").map(PathBuf::from);

    Ok(ScenarioConfig {
        params,
        grid,
        state,
        pipelines,
        fock_enabled,
        fock_dim,
        output_dir,
    })
}
