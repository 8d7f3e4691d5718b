//! Scenario configuration: built-in presets, flat `key = value` files and
//! command-line overrides, resolved in that order.
//!
//! Grammar: one `key = value` per line; blank lines and lines starting with
//! `#` are ignored, as is anything after a `#` on a line. Lists are
//! comma-separated. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use qosc_core::dynamics::Window;
use qosc_core::specialfns::J0_FIRST_ZERO;
use qosc_core::vanvleck::Order;
use qosc_core::{SystemParams, Truncation};

use crate::CliError;

const KEYS: &[&str] = &[
    "scenario",
    "units",
    "epsilon",
    "delta",
    "g",
    "omega",
    "amplitude",
    "omega_ex",
    "k_max",
    "l_max",
    "p_max",
    "P_max",
    "denom_tol",
    "k_max_numeric",
    "l_max_numeric",
    "boundary_threshold",
    "sweep_start",
    "sweep_stop",
    "sweep_steps",
    "amplitudes",
    "theta",
    "k_plot",
    "L_max",
    "m",
    "L",
    "duration",
    "samples",
    "numeric",
    "window",
    "order",
];

const DEFAULTS: &[(&str, &str)] = &[
    ("units", "Omega"),
    ("epsilon", "0"),
    ("delta", "0.4"),
    ("g", "0.1"),
    ("omega", "1"),
    ("amplitude", "8"),
    ("omega_ex", "5.3"),
    ("k_max", "20"),
    ("l_max", "40"),
    ("p_max", "30"),
    ("P_max", "30"),
    ("k_max_numeric", "12"),
    ("l_max_numeric", "10"),
    ("boundary_threshold", "0.1"),
    ("sweep_start", "0"),
    ("sweep_stop", "1.5"),
    ("sweep_steps", "151"),
    ("theta", "10"),
    ("k_plot", "4"),
    ("L_max", "2"),
    ("samples", "4096"),
    ("numeric", "on"),
    ("window", "rectangular"),
    ("order", "second"),
];

/// Preset values; anything not listed falls back to [`DEFAULTS`].
fn preset(name: &str) -> Option<Vec<(&'static str, String)>> {
    let fig4 = |g: f64, a: f64| {
        vec![
            ("units", "Omega".to_string()),
            ("epsilon", "0".into()),
            ("delta", "0.4".into()),
            ("omega", "1".into()),
            ("omega_ex", "5.3".into()),
            ("amplitude", format!("{a:?}")),
            ("g", format!("{g:?}")),
            ("theta", "10".into()),
            ("k_max_numeric", "20".into()),
            ("order", "first".into()),
        ]
    };
    let cdt = J0_FIRST_ZERO * 5.3;
    Some(match name {
        "fig1" => vec![
            ("units", "omega_ex".into()),
            ("delta", "0.2".into()),
            ("g", "0.05".into()),
            ("omega", format!("{:?}", std::f64::consts::SQRT_2)),
            ("amplitude", "2".into()),
            ("omega_ex", "1".into()),
            ("k_max", "6".into()),
            ("k_max_numeric", "10".into()),
            ("l_max_numeric", "8".into()),
            ("sweep_start", "-0.5".into()),
            ("sweep_stop", "2.5".into()),
            ("sweep_steps", "301".into()),
        ],
        "fig2" => vec![
            ("units", "Omega".into()),
            ("epsilon", "0".into()),
            ("delta", "1".into()),
            ("omega", "1".into()),
            ("omega_ex", "5.3".into()),
            ("amplitudes", "8.0,12.74".into()),
            ("k_max", "6".into()),
            ("k_max_numeric", "24".into()),
            ("l_max_numeric", "6".into()),
            ("sweep_start", "0".into()),
            ("sweep_stop", "1.5".into()),
            ("sweep_steps", "76".into()),
        ],
        "fig3" => vec![
            ("units", "Omega".into()),
            ("epsilon", "0".into()),
            ("delta", "0.4".into()),
            ("omega", "1".into()),
            ("omega_ex", "5.3".into()),
            ("amplitude", "8".into()),
            ("sweep_start", "0".into()),
            ("sweep_stop", "1.5".into()),
            ("sweep_steps", "301".into()),
            ("k_plot", "4".into()),
            ("order", "first".into()),
        ],
        "fig4a" => fig4(0.1, 8.0),
        "fig4b" => fig4(0.5, 8.0),
        "fig4c" => fig4(1.0, 8.0),
        "fig5" | "fig5b" => fig4(0.5, cdt),
        "fig5a" => fig4(0.1, cdt),
        "fig5c" => fig4(1.0, cdt),
        _ => return None,
    })
}

pub const SCENARIOS: &[&str] = &[
    "fig1", "fig2", "fig3", "fig4a", "fig4b", "fig4c", "fig5", "fig5a", "fig5b", "fig5c",
];

/// Unit all frequencies are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Units {
    Omega,
    OmegaEx,
}

impl FromStr for Units {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "Omega" => Ok(Units::Omega),
            "omega_ex" => Ok(Units::OmegaEx),
            _ => Err(format!("unknown units `{s}` (expected Omega or omega_ex)")),
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Units::Omega => "Omega",
            Units::OmegaEx => "omega_ex",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sweep {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Sweep {
    pub fn points(&self) -> Vec<f64> {
        let h = (self.stop - self.start) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start + i as f64 * h).collect()
    }
}

/// Fully resolved configuration, already converted to the output units.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    /// Every key with its final textual value, for the metadata echo.
    pub entries: BTreeMap<String, String>,
    pub units: Units,
    pub params: SystemParams,
    pub trunc: Truncation,
    pub numeric_trunc: Truncation,
    pub boundary_threshold: f64,
    pub sweep: Sweep,
    pub amplitudes: Vec<f64>,
    pub theta: f64,
    pub k_plot: usize,
    pub resonance_l_max: usize,
    pub manifold: Option<(i64, i64)>,
    pub duration: Option<f64>,
    pub samples: usize,
    pub numeric: bool,
    pub window: Window,
    pub order: Order,
}

/// Parses the flat file format into key/value pairs.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, got `{raw}`", no + 1)))?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `--set key=value` argument.
pub fn parse_override(arg: &str) -> Result<(String, String), CliError> {
    arg.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| CliError::Config(format!("override `{arg}` is not of the form key=value")))
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self
            .raw(key)
            .ok_or_else(|| CliError::Config(format!("missing key `{key}`")))?;
        raw.parse()
            .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{raw}`")))
    }

    fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.raw(key).map(|_| self.get(key)).transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        self.raw(key)
            .map(|raw| {
                raw.split(',')
                    .map(|s| {
                        s.trim()
                            .parse()
                            .map_err(|_| CliError::Config(format!("key `{key}`: cannot parse `{s}`")))
                    })
                    .collect()
            })
            .transpose()
    }
}

impl ScenarioConfig {
    /// Resolves preset → file → overrides. `units` from the command line, if
    /// given, is applied as one more override.
    pub fn resolve(
        file: Option<&Path>,
        overrides: &[(String, String)],
        units: Option<Units>,
    ) -> Result<Self, CliError> {
        let mut layers: Vec<(String, String)> = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            layers.extend(parse_entries(&text)?);
        }
        layers.extend(overrides.iter().cloned());
        if let Some(u) = units {
            layers.push(("units".into(), u.to_string()));
        }
        for (k, _) in &layers {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
        }

        let mut map: BTreeMap<String, String> = DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let scenario = layers
            .iter()
            .rev()
            .find(|(k, _)| k == "scenario")
            .map(|(_, v)| v.clone());
        if let Some(name) = &scenario {
            let values = preset(name).ok_or_else(|| {
                CliError::Config(format!("unknown scenario `{name}` (known: {})", SCENARIOS.join(", ")))
            })?;
            map.extend(values.into_iter().map(|(k, v)| (k.to_string(), v)));
        }
        map.extend(layers);
        Self::from_entries(Entries(map))
    }

    fn from_entries(e: Entries) -> Result<Self, CliError> {
        let units: Units = e.raw("units").unwrap_or("Omega").parse().map_err(CliError::Config)?;
        let raw = SystemParams {
            epsilon: e.get("epsilon")?,
            delta: e.get("delta")?,
            g: e.get("g")?,
            omega: e.get("omega")?,
            amplitude: e.get("amplitude")?,
            omega_ex: e.get("omega_ex")?,
        };
        raw.validate().map_err(|err| CliError::Config(err.to_string()))?;
        let unit = match units {
            Units::Omega => raw.omega,
            Units::OmegaEx => raw.omega_ex,
        };
        let params = raw.scaled(unit);

        let mut trunc = Truncation::for_params(&params);
        trunc.k_max = e.get("k_max")?;
        trunc.l_max = e.get("l_max")?;
        trunc.p_max = e.get("p_max")?;
        trunc.big_p_max = e.get("P_max")?;
        if let Some(tol) = e.opt::<f64>("denom_tol")? {
            trunc.denom_tol = tol / unit;
        }
        trunc.validate().map_err(|err| CliError::Config(err.to_string()))?;
        let numeric_trunc = trunc
            .with_k_max(e.get("k_max_numeric")?)
            .with_l_max(e.get("l_max_numeric")?);
        numeric_trunc
            .validate()
            .map_err(|err| CliError::Config(err.to_string()))?;

        let sweep = Sweep {
            start: e.get::<f64>("sweep_start")? / unit,
            stop: e.get::<f64>("sweep_stop")? / unit,
            steps: e.get("sweep_steps")?,
        };
        if sweep.steps < 2 {
            return Err(CliError::Config("sweep_steps must be at least 2".into()));
        }
        if !(sweep.stop > sweep.start) || !sweep.stop.is_finite() {
            return Err(CliError::Config("sweep_stop must exceed sweep_start".into()));
        }
        let amplitudes = e
            .list("amplitudes")?
            .map(|v| v.into_iter().map(|a| a / unit).collect())
            .unwrap_or_else(|| vec![params.amplitude]);
        let theta: f64 = e.get("theta")?;
        if !(theta > 0.0) {
            return Err(CliError::Config("theta must be positive".into()));
        }
        let manifold = match (e.opt::<i64>("m")?, e.opt::<i64>("L")?) {
            (Some(m), Some(l)) => Some((m, l)),
            (None, None) => None,
            _ => return Err(CliError::Config("`m` and `L` must be given together".into())),
        };
        let duration = e.opt::<f64>("duration")?.map(|d| d * unit);
        if let Some(d) = duration {
            if !(d > 0.0 && d.is_finite()) {
                return Err(CliError::Config(format!("duration must be positive, got {d}")));
            }
        }
        let samples: usize = e.get("samples")?;
        if samples < 2 {
            return Err(CliError::Config("samples must be at least 2".into()));
        }
        let numeric = match e.raw("numeric").unwrap_or("on") {
            "on" | "true" | "yes" => true,
            "off" | "false" | "no" => false,
            other => {
                return Err(CliError::Config(format!(
                    "key `numeric`: expected on/off, got `{other}`"
                )))
            }
        };
        let window = match e.raw("window").unwrap_or("rectangular") {
            "rectangular" => Window::Rectangular,
            "hann" => Window::Hann,
            "blackman" => Window::Blackman,
            other => return Err(CliError::Config(format!("unknown window `{other}`"))),
        };
        let order = match e.raw("order").unwrap_or("second") {
            "first" => Order::First,
            "second" => Order::Second,
            other => return Err(CliError::Config(format!("unknown order `{other}`"))),
        };
        let boundary_threshold: f64 = e.get("boundary_threshold")?;
        if !(boundary_threshold > 0.0 && boundary_threshold <= 1.0) {
            return Err(CliError::Config("boundary_threshold must lie in (0, 1]".into()));
        }
        let k_plot = e.get("k_plot")?;
        let resonance_l_max = e.get("L_max")?;
        Ok(Self {
            entries: e.0,
            units,
            params,
            trunc,
            numeric_trunc,
            boundary_threshold,
            sweep,
            amplitudes,
            theta,
            k_plot,
            resonance_l_max,
            manifold,
            duration,
            samples,
            numeric,
            window,
            order,
        })
    }
}
