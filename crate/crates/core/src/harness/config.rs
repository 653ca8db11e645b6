//! Run configuration: flat `key = value` TOML with optional per-protocol sections.
//!
//! ```toml
//! protocol = "ensemble"
//! L = 600
//! N = 3
//!
//! [ensemble]          # read only when the protocol matches
//! eta_d = 0.9
//! q = 0.96
//! gamma_rep = 5e7
//!
//! [optimize]
//! p = { lo = 1e-4, hi = 1e-2, log = true }
//! R = [0.02, 0.98]
//! # F0 = { lo = 0.5, hi = 1, scale = "log-upper" }
//! N = "1..4"
//!
//! [sweep]
//! param = "L"
//! from = 600
//! to = 1200
//! steps = 7
//! ```

use crate::error::{Error, Result};
use crate::harness::scenario::{is_discrete, Protocol, Scenario, PARAMETER_NAMES};
use crate::harness::search::{AxisScale, ContinuousAxis, DiscreteAxis, OptimizeSpec, SweepSpec, MIN_GRID};
use toml::{Table, Value};

const PROTOCOL_SECTIONS: &[&str] = &["original", "hybrid", "ensemble"];
const SHARED_SECTIONS: &[&str] = &["params", "channel", "detector"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: OptimizeSpec,
    pub sweep: Option<(String, Vec<f64>)>,
}

impl RunConfig {
    pub fn new(base: Scenario) -> Self {
        Self {
            spec: OptimizeSpec::new(base),
            sweep: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| Error::Config(format!("malformed config: {e}")))?;
        let protocol = match table.get("protocol") {
            Some(v) => as_str(v, "protocol")?.parse()?,
            None => Protocol::Original,
        };
        let mut cfg = Self::new(Scenario::new(protocol));
        for (key, value) in &table {
            match key.as_str() {
                "protocol" => {}
                "optimize" | "sweep" => {}
                s if SHARED_SECTIONS.contains(&s) => cfg.apply_section(as_table(value, s)?)?,
                s if PROTOCOL_SECTIONS.contains(&s) => {
                    let section = as_table(value, s)?;
                    if s == protocol.name() {
                        cfg.apply_section(section)?;
                    }
                }
                _ => cfg.apply_key(key, value)?,
            }
        }
        if let Some(v) = table.get("optimize") {
            cfg.apply_optimize(as_table(v, "optimize")?)?;
        }
        if let Some(v) = table.get("sweep") {
            cfg.apply_sweep(as_table(v, "sweep")?)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    fn apply_section(&mut self, section: &Table) -> Result<()> {
        section.iter().try_for_each(|(k, v)| self.apply_key(k, v))
    }

    /// Sets one scenario field from a config key.
    pub fn apply_key(&mut self, key: &str, value: &Value) -> Result<()> {
        let base = &mut self.spec.base;
        match key {
            "qkd" => base.qkd = as_str(value, key)?.parse()?,
            "normalize_per_memory" => {
                base.normalize_per_memory = value.as_bool().ok_or_else(|| type_error(key, "a boolean"))?
            }
            k if PARAMETER_NAMES.contains(&k) => base.set(k, as_f64(value, k)?)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    fn apply_optimize(&mut self, section: &Table) -> Result<()> {
        for (key, value) in section {
            if key == "grid" {
                let grid = value.as_integer().ok_or_else(|| type_error(key, "an integer"))?;
                if grid < MIN_GRID as i64 {
                    return Err(Error::Config(format!("grid needs at least {MIN_GRID} points per axis")));
                }
                self.spec.grid = grid as usize;
            } else if is_discrete(key) {
                let values = match value {
                    Value::String(s) => parse_int_list(s)?,
                    Value::Array(items) => items
                        .iter()
                        .map(|v| {
                            v.as_integer()
                                .and_then(|i| u32::try_from(i).ok())
                                .ok_or_else(|| type_error(key, "non-negative integers"))
                        })
                        .collect::<Result<_>>()?,
                    _ => return Err(type_error(key, "a range string or an integer list")),
                };
                self.spec.discrete.push(DiscreteAxis::new(key, values)?);
            } else {
                let axis = match value {
                    Value::Array(b) if b.len() == 2 => ContinuousAxis::linear(key, as_f64(&b[0], key)?, as_f64(&b[1], key)?)?,
                    Value::Table(t) => {
                        let get = |k: &str| t.get(k).ok_or_else(|| Error::Config(format!("optimize.{key} needs '{k}'")));
                        let log = t.get("log").map(|v| v.as_bool().ok_or_else(|| type_error("log", "a boolean"))).transpose()?;
                        let scale = match (t.get("scale"), log) {
                            (Some(v), _) => as_str(v, "scale")?.parse()?,
                            (None, Some(true)) => AxisScale::Log,
                            (None, _) => AxisScale::Linear,
                        };
                        ContinuousAxis::new(key, as_f64(get("lo")?, key)?, as_f64(get("hi")?, key)?, scale)?
                    }
                    _ => return Err(type_error(key, "[lo, hi] or { lo, hi, scale }")),
                };
                self.spec.base.get(key)?;
                self.spec.continuous.push(axis);
            }
        }
        Ok(())
    }

    fn apply_sweep(&mut self, section: &Table) -> Result<()> {
        let param = as_str(section.get("param").ok_or_else(|| Error::Config("sweep needs 'param'".into()))?, "param")?;
        self.spec.base.get(param)?;
        let values = if let Some(v) = section.get("values") {
            let items = v.as_array().ok_or_else(|| type_error("values", "an array"))?;
            items.iter().map(|x| as_f64(x, "values")).collect::<Result<Vec<_>>>()?
        } else {
            let need = |k: &str| section.get(k).ok_or_else(|| Error::Config(format!("sweep needs 'values' or '{k}'")));
            let steps = need("steps")?.as_integer().filter(|&s| s >= 0).ok_or_else(|| type_error("steps", "a non-negative integer"))?;
            let log = section.get("log").and_then(Value::as_bool).unwrap_or(false);
            linspace(as_f64(need("from")?, "from")?, as_f64(need("to")?, "to")?, steps as usize, log)?
        };
        self.sweep = Some((param.to_string(), values));
        Ok(())
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let (swept, values) = self.sweep.clone().ok_or_else(|| Error::Config("no [sweep] section or --sweep flag".into()))?;
        Ok(SweepSpec {
            optimize: self.spec.clone(),
            swept,
            values,
        })
    }
}

/// Evenly spaced values including both ends; `steps = 0` gives no values.
pub fn linspace(from: f64, to: f64, steps: usize, log: bool) -> Result<Vec<f64>> {
    if log && (from <= 0.0 || to <= 0.0) {
        return Err(Error::Config("log-spaced sweeps need positive bounds".into()));
    }
    Ok(match steps {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n)
            .map(|i| {
                let t = i as f64 / (n - 1) as f64;
                if i == n - 1 {
                    to
                } else if log {
                    from * (to / from).powf(t)
                } else {
                    from + t * (to - from)
                }
            })
            .collect(),
    })
}

/// Integer sets such as `3`, `0..7` (inclusive) or `1,2,5`. A reversed range is empty.
pub fn parse_int_list(s: &str) -> Result<Vec<u32>> {
    let bad = || Error::Config(format!("cannot parse integer range '{s}'"));
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: u32 = a.trim().parse().map_err(|_| bad())?;
            let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(out)
}

/// Float sets: `a..b:steps` (inclusive linear grid), `a..b:steps:log`, or a comma list.
pub fn parse_float_list(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("cannot parse value list '{s}'"));
    if let Some((a, rest)) = s.split_once("..") {
        let mut parts = rest.split(':');
        let b = parts.next().ok_or_else(bad)?;
        let steps: usize = parts.next().ok_or_else(bad)?.trim().parse().map_err(|_| bad())?;
        let log = match parts.next() {
            None => false,
            Some("log") => true,
            Some(_) => return Err(bad()),
        };
        let a: f64 = a.trim().parse().map_err(|_| bad())?;
        let b: f64 = b.trim().parse().map_err(|_| bad())?;
        return linspace(a, b, steps, log);
    }
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| bad()))
        .collect()
}

fn type_error(key: &str, expected: &str) -> Error {
    Error::Config(format!("'{key}' must be {expected}"))
}

fn as_table<'a>(v: &'a Value, key: &str) -> Result<&'a Table> {
    v.as_table().ok_or_else(|| type_error(key, "a section"))
}

fn as_str<'a>(v: &'a Value, key: &str) -> Result<&'a str> {
    v.as_str().ok_or_else(|| type_error(key, "a string"))
}

fn as_f64(v: &Value, key: &str) -> Result<f64> {
    match v {
        Value::Float(x) => Ok(*x),
        Value::Integer(i) => Ok(*i as f64),
        Value::String(s) if s == "inf" || s == "infinity" => Ok(f64::INFINITY),
        _ => Err(type_error(key, "a number")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::QkdProtocol;

    #[test]
    fn parses_full_config() {
        let cfg = RunConfig::parse(
            r#"
            protocol = "ensemble"
            L = 600
            N = 3
            [channel]
            alpha_att = 0.2
            [ensemble]
            eta_d = 0.9
            q = 0.96
            gamma_rep = 5e7
            [original]
            F0 = 0.5
            [optimize]
            grid = 41
            p = { lo = 1e-4, hi = 1e-2, log = true }
            R = [0.02, 0.98]
            F0 = { lo = 0.5, hi = 1.0, scale = "log-upper" }
            N = "1..4"
            [sweep]
            param = "L"
            from = 600
            to = 1200
            steps = 7
            "#,
        )
        .unwrap();
        let s = &cfg.spec.base;
        assert_eq!(s.protocol, Protocol::Ensemble);
        assert_eq!((s.length, s.nesting, s.alpha_att, s.eta_d, s.repetition_rate), (600.0, 3, 0.2, 0.9, 5e7));
        assert_eq!(s.f0, 1.0, "sections of other protocols are ignored");
        assert_eq!(cfg.spec.grid, 41);
        assert_eq!(cfg.spec.continuous.len(), 3);
        assert!(cfg.spec.continuous.iter().any(|a| a.name == "p" && a.scale == AxisScale::Log));
        assert!(cfg.spec.continuous.iter().any(|a| a.name == "F0" && a.scale == AxisScale::LogUpper));
        assert_eq!(cfg.spec.discrete[0].values, vec![1, 2, 3, 4]);
        let sweep = cfg.sweep_spec().unwrap();
        assert_eq!(sweep.values, vec![600.0, 700.0, 800.0, 900.0, 1000.0, 1100.0, 1200.0]);
    }

    #[test]
    fn defaults_and_qkd() {
        let cfg = RunConfig::parse("qkd = \"six-state\"\nF0 = 0.93\ngamma_rep = \"inf\"").unwrap();
        assert_eq!(cfg.spec.base.protocol, Protocol::Original);
        assert_eq!(cfg.spec.base.qkd, QkdProtocol::SixState);
        assert_eq!(cfg.spec.base.f0, 0.93);
        assert!(cfg.spec.base.repetition_rate.is_infinite());
        assert_eq!(cfg.spec.base.alpha_att, 0.17);
        assert_eq!(cfg.spec.base.c, 2e5);
    }

    #[test]
    fn rejects_malformed_configs() {
        for bad in [
            "L = ",
            "bogus = 1",
            "protocol = \"dlcz\"",
            "N = 1.5",
            "[optimize]\ngrid = 10",
            "[optimize]\nF0 = 3",
            "[sweep]\nfrom = 1",
            "[sweep]\nparam = \"L\"\nfrom = 1\nto = 2",
            "[params]\nqkd = \"e91\"",
        ] {
            assert!(matches!(RunConfig::parse(bad), Err(Error::Config(_))), "{bad}");
        }
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_int_list("0..7").unwrap(), (0..=7).collect::<Vec<_>>());
        assert_eq!(parse_int_list("1,3,5").unwrap(), vec![1, 3, 5]);
        assert_eq!(parse_int_list("4").unwrap(), vec![4]);
        assert!(parse_int_list("3..1").unwrap().is_empty());
        assert!(parse_int_list("a..2").is_err());
        assert_eq!(parse_float_list("100..400:4").unwrap(), vec![100.0, 200.0, 300.0, 400.0]);
        assert!(parse_float_list("100..400:0").unwrap().is_empty());
        let logs = parse_float_list("1e-4..1e-2:3:log").unwrap();
        assert!((logs[1] - 1e-3).abs() < 1e-15);
        assert_eq!(parse_float_list("0.5, 0.9").unwrap(), vec![0.5, 0.9]);
        assert!(parse_float_list("1..2").is_err());
    }
}
