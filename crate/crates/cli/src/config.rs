//! Run configuration: per-subcommand parameter schemas, the flat
//! `key = value` file format, and typed access to resolved values.

use std::path::Path;

use serde_json::{Map, Number, Value};

use crate::RunError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kind {
    Float,
    UInt,
    Bool,
    /// A float, or the word `auto` for a value derived from other settings.
    FloatOrAuto,
    /// An unsigned integer, or `auto`.
    UIntOrAuto,
    /// Comma-separated unsigned integers.
    UIntList,
    Choice(&'static [&'static str]),
    /// A file path; empty means unset.
    Path,
}

#[derive(Debug, Clone, Copy)]
pub struct Param {
    pub key: &'static str,
    pub kind: Kind,
    pub default: &'static str,
    pub help: &'static str,
}

const fn p(key: &'static str, kind: Kind, default: &'static str, help: &'static str) -> Param {
    Param {
        key,
        kind,
        default,
        help,
    }
}

const ORIENTATIONS: &[&str] = &["horizontal", "vertical"];
const MODES: &[&str] = &["half", "tilde", "growth_s"];
const NORMALIZATIONS: &[&str] = &["fourier-normalized", "paper-raw"];

#[derive(Debug)]
pub struct Subcommand {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [Param],
}

pub const SUBCOMMANDS: &[Subcommand] = &[
    Subcommand {
        name: "kernel-table",
        about: "Build a kernel profile table and report its bound ratios",
        params: &[
            p("s", Kind::Float, "0.5", "fractional order in (0, 1]"),
            p("N", Kind::UInt, "1", "spatial dimension (profiles exist for N = 1)"),
            p("normalization", Kind::Choice(NORMALIZATIONS), "fourier-normalized", "profile scaling"),
            p("u_min", Kind::Float, "1e-3", "smallest positive table node"),
            p("u_max", Kind::FloatOrAuto, "auto", "largest table node"),
            p("nodes_per_decade", Kind::UInt, "200", "log-spaced nodes per decade"),
            p("grid_points", Kind::UInt, "25", "points per axis of the log ratio grid"),
            p("grid_lo", Kind::Float, "1e-3", "lower end of the log ratio grid in x and t"),
            p("grid_hi", Kind::Float, "1e3", "upper end of the log ratio grid in x and t"),
            p("alpha", Kind::Float, "0.5", "order of the spatial fractional Laplacian in the decay ratios"),
            p("pde_points", Kind::UInt, "20", "sample points for the heat equation identity"),
        ],
    },
    Subcommand {
        name: "segment",
        about: "Capacity experiments for horizontal and vertical segments",
        params: &[
            p("orientation", Kind::Choice(ORIENTATIONS), "horizontal", "segment direction"),
            p("L", Kind::Float, "1", "segment length"),
            p("atoms", Kind::UInt, "400", "midpoint atoms on the segment"),
            p("mode", Kind::Choice(&["half", "tilde"]), "half", "constraint family"),
            p("resolution", Kind::UInt, "200", "constraint grid nodes per axis"),
            p("verify_resolution", Kind::UIntOrAuto, "auto", "verification nodes per axis (0 disables)"),
            p("x_lo", Kind::FloatOrAuto, "auto", "grid box, spatial lower end"),
            p("x_hi", Kind::FloatOrAuto, "auto", "grid box, spatial upper end"),
            p("t_lo", Kind::FloatOrAuto, "auto", "grid box, time lower end"),
            p("t_hi", Kind::FloatOrAuto, "auto", "grid box, time upper end"),
            p("exclusion", Kind::FloatOrAuto, "auto", "grid exclusion radius around atoms"),
            p("shell", Kind::FloatOrAuto, "auto", "radius of the probe shell around atoms (0 disables)"),
            p("doublings", Kind::UInt, "0", "extra runs doubling atoms and grid density"),
            p("check_points", Kind::UInt, "50", "sample points for the closed-form potential check"),
        ],
    },
    Subcommand {
        name: "cantor",
        about: "Corner Cantor generations, growth constants, capacity decay and corner sums",
        params: &[
            p("k_max", Kind::UInt, "4", "last generation"),
            p("mode", Kind::Choice(&["half", "tilde"]), "half", "constraint family"),
            p("growth_d", Kind::Float, "1", "degree of the growth constant"),
            p("capacity", Kind::Bool, "true", "run the capacity LP for each generation"),
            p("verify", Kind::Bool, "true", "verify capacity weights on a refined grid"),
            p("corner_m", Kind::UIntList, "2,4,8", "depths m of the corner sums at k = 0"),
        ],
    },
    Subcommand {
        name: "capacity",
        about: "Capacity lower bound of a set read from a JSON descriptor",
        params: &[
            p("set", Kind::Path, "", "JSON set descriptor"),
            p("mode", Kind::Choice(MODES), "half", "constraint family"),
            p("s", Kind::Float, "0.5", "fractional order"),
            p("N", Kind::UInt, "1", "spatial dimension"),
            p("atoms", Kind::UInt, "200", "atoms on segments (ignored otherwise)"),
            p("resolution", Kind::UInt, "101", "constraint grid nodes per axis"),
            p("verify_resolution", Kind::UIntOrAuto, "auto", "verification nodes per axis (0 disables)"),
            p("exclusion", Kind::FloatOrAuto, "auto", "grid exclusion radius"),
            p("shell", Kind::FloatOrAuto, "auto", "probe shell radius (0 disables)"),
            p("radii", Kind::UIntOrAuto, "auto", "ball radii quantiles in growth_s mode (auto = all)"),
            p("content_depth", Kind::UInt, "10", "dyadic depth of the content bound"),
        ],
    },
    Subcommand {
        name: "growth",
        about: "Growth constant of a measure file or a Cantor generation",
        params: &[
            p("measure", Kind::Path, "", "measure file (lines x_1 .. x_N t weight); empty uses cantor_k"),
            p("cantor_k", Kind::UInt, "3", "Cantor generation when no measure file is given"),
            p("s", Kind::Float, "0.5", "fractional order"),
            p("N", Kind::UInt, "1", "spatial dimension"),
            p("d", Kind::FloatOrAuto, "auto", "growth degree (auto = N + 2s - 1)"),
            p("radii", Kind::UIntOrAuto, "auto", "radius quantiles (auto = every jump radius)"),
        ],
    },
    Subcommand {
        name: "localize",
        about: "Localization of normalized signed measures by a smooth bump",
        params: &[
            p("trials", Kind::UInt, "20", "random signed measures"),
            p("atoms", Kind::UInt, "30", "atoms per measure"),
            p("resolutions", Kind::UIntList, "41,81,161", "grid nodes per axis, one grid each"),
            p("exclusion", Kind::Float, "0.05", "grid exclusion radius"),
            p("margin", Kind::Float, "0.5", "grid margin around the unit cube"),
            p("bump_order", Kind::UInt, "1", "derivative order of the bump bound"),
            p("seed", Kind::UInt, "7", "random seed"),
        ],
    },
    Subcommand {
        name: "bmo-check",
        about: "Lipschitz-in-time and parabolic BMO estimators for a growth measure",
        params: &[
            p("s", Kind::Float, "0.75", "fractional order in (1/2, 1)"),
            p("cantor_k", Kind::UInt, "3", "Cantor generation of the measure"),
            p("pairs", Kind::UInt, "400", "random point pairs for the Lipschitz estimator"),
            p("cubes", Kind::UInt, "50", "cubes for the BMO estimator"),
            p("candidates", Kind::UInt, "2000", "random cubes drawn before filtering"),
            p("cube_nodes", Kind::UInt, "16", "quadrature nodes per cube axis"),
            p("window", Kind::Float, "20", "half-width of the fractional derivative window"),
            p("tol", Kind::Float, "1e-6", "fractional derivative tolerance"),
            p("seed", Kind::UInt, "11", "random seed"),
        ],
    },
];

pub fn subcommand(name: &str) -> Option<&'static Subcommand> {
    SUBCOMMANDS.iter().find(|c| c.name == name)
}

/// Parses one raw value against its kind.
pub fn parse_value(param: &Param, raw: &str) -> Result<Value, RunError> {
    let raw = raw.trim();
    let bad = |what: &str| RunError::invalid(format!("`{}`: expected {what}, got `{raw}`", param.key));
    let float = |s: &str| -> Result<Value, RunError> {
        let v: f64 = s.parse().map_err(|_| bad("a number"))?;
        Number::from_f64(v).map(Value::Number).ok_or_else(|| bad("a finite number"))
    };
    let uint = |s: &str| -> Result<Value, RunError> {
        s.parse::<u64>().map(Value::from).map_err(|_| bad("a nonnegative integer"))
    };
    match param.kind {
        Kind::Float => float(raw),
        Kind::UInt => uint(raw),
        Kind::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(bad("true or false")),
        },
        Kind::FloatOrAuto if raw == "auto" => Ok(Value::from("auto")),
        Kind::FloatOrAuto => float(raw),
        Kind::UIntOrAuto if raw == "auto" => Ok(Value::from("auto")),
        Kind::UIntOrAuto => uint(raw),
        Kind::UIntList => {
            let items: Result<Vec<Value>, _> = raw.split(',').map(|s| uint(s.trim())).collect();
            let items = items?;
            if items.is_empty() {
                return Err(bad("a nonempty list"));
            }
            Ok(Value::Array(items))
        }
        Kind::Choice(options) => {
            if options.contains(&raw) {
                Ok(Value::from(raw))
            } else {
                Err(bad(&format!("one of {}", options.join(", "))))
            }
        }
        Kind::Path => Ok(Value::from(raw)),
    }
}

/// Reads `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn read_config_file(path: &Path) -> Result<Vec<(String, String)>, RunError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::invalid(format!("cannot read config {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            RunError::invalid(format!("{}:{}: expected `key = value`", path.display(), i + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// Fully resolved parameters, in schema order.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub subcommand: &'static Subcommand,
    values: Vec<(&'static str, Value)>,
}

impl RunConfig {
    /// Defaults, then the config file, then flags; unknown keys are errors.
    pub fn resolve(
        subcommand: &'static Subcommand,
        file: &[(String, String)],
        flags: &[(String, String)],
    ) -> Result<Self, RunError> {
        let mut values = Vec::with_capacity(subcommand.params.len());
        for param in subcommand.params {
            values.push((param.key, parse_value(param, param.default)?));
        }
        for (key, raw) in file.iter().chain(flags) {
            let idx = subcommand
                .params
                .iter()
                .position(|p| p.key == key)
                .ok_or_else(|| {
                    RunError::invalid(format!("unknown key `{key}` for `{}`", subcommand.name))
                })?;
            values[idx].1 = parse_value(&subcommand.params[idx], raw)?;
        }
        Ok(Self { subcommand, values })
    }

    fn get(&self, key: &str) -> &Value {
        &self
            .values
            .iter()
            .find(|(k, _)| *k == key)
            .unwrap_or_else(|| panic!("`{key}` is not in the `{}` schema", self.subcommand.name))
            .1
    }

    pub fn f64(&self, key: &str) -> f64 {
        self.get(key).as_f64().expect("numeric parameter")
    }

    pub fn usize(&self, key: &str) -> usize {
        self.get(key).as_u64().expect("integer parameter") as usize
    }

    pub fn u64(&self, key: &str) -> u64 {
        self.get(key).as_u64().expect("integer parameter")
    }

    pub fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().expect("boolean parameter")
    }

    pub fn str(&self, key: &str) -> &str {
        self.get(key).as_str().expect("string parameter")
    }

    pub fn usize_list(&self, key: &str) -> Vec<usize> {
        self.get(key)
            .as_array()
            .expect("list parameter")
            .iter()
            .map(|v| v.as_u64().expect("integer item") as usize)
            .collect()
    }

    pub fn is_auto(&self, key: &str) -> bool {
        self.get(key).as_str() == Some("auto")
    }

    /// Value of an `auto`-capable float, or `None` when it is `auto`.
    pub fn auto_f64(&self, key: &str) -> Option<f64> {
        (!self.is_auto(key)).then(|| self.f64(key))
    }

    pub fn auto_usize(&self, key: &str) -> Option<usize> {
        (!self.is_auto(key)).then(|| self.usize(key))
    }

    /// Replaces an `auto` with the value actually used, so the manifest
    /// records every effective setting.
    pub fn settle(&mut self, key: &str, value: impl Into<Value>) {
        let slot = self
            .values
            .iter_mut()
            .find(|(k, _)| *k == key)
            .unwrap_or_else(|| panic!("`{key}` is not in the schema"));
        if slot.1.as_str() == Some("auto") {
            slot.1 = value.into();
        }
    }

    pub fn manifest(&self) -> Map<String, Value> {
        self.values
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect()
    }

    /// The manifest in the config file format, loadable with `--config`.
    pub fn manifest_text(&self) -> String {
        let mut out = format!("# caloric {} manifest\n", self.subcommand.name);
        for (k, v) in &self.values {
            let text = match v {
                Value::String(s) => s.clone(),
                Value::Array(items) => items
                    .iter()
                    .map(|i| i.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                other => other.to_string(),
            };
            out.push_str(&format!("{k} = {text}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_and_defaults() {
        let sc = subcommand("segment").unwrap();
        let file = vec![("L".to_string(), "2".to_string()), ("atoms".into(), "10".into())];
        let flags = vec![("atoms".to_string(), "20".to_string())];
        let cfg = RunConfig::resolve(sc, &file, &flags).unwrap();
        assert_eq!(cfg.f64("L"), 2.0);
        assert_eq!(cfg.usize("atoms"), 20);
        assert_eq!(cfg.str("orientation"), "horizontal");
        assert!(cfg.is_auto("exclusion"));
    }

    #[test]
    fn unknown_and_malformed_keys_rejected() {
        let sc = subcommand("growth").unwrap();
        assert!(RunConfig::resolve(sc, &[("bogus".into(), "1".into())], &[]).is_err());
        assert!(RunConfig::resolve(sc, &[], &[("s".into(), "half".into())]).is_err());
        assert!(RunConfig::resolve(sc, &[], &[("radii".into(), "-3".into())]).is_err());
    }

    #[test]
    fn manifest_round_trips_through_the_file_format() {
        let sc = subcommand("localize").unwrap();
        let mut cfg = RunConfig::resolve(sc, &[], &[("trials".into(), "3".into())]).unwrap();
        cfg.settle("trials", 99);
        assert_eq!(cfg.usize("trials"), 3);
        let dir = std::env::temp_dir().join(format!("caloric-manifest-{}", std::process::id()));
        std::fs::write(&dir, cfg.manifest_text()).unwrap();
        let again = RunConfig::resolve(sc, &read_config_file(&dir).unwrap(), &[]).unwrap();
        std::fs::remove_file(&dir).unwrap();
        assert_eq!(again.manifest(), cfg.manifest());
    }

    #[test]
    fn every_default_parses() {
        for sc in SUBCOMMANDS {
            RunConfig::resolve(sc, &[], &[]).unwrap();
        }
    }
}
