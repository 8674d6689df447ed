//! Run configuration files: `key = value` lines under optional `[section]`
//! headers. `#` starts a comment. Unknown keys are errors.
//!
//! ```text
//! preset = bump-t3
//! refinement = 3
//! bc = closed
//! seed = 7
//!
//! [target]
//! kind = admissible
//! base = 1 + 0.5*sin(2*pi*x)
//! region = marked
//! level = 1
//! ```

use super::expr::Expr;
use crate::error::{CywError, Result};
use crate::geometry::PresetId;
use crate::global_iteration::{GlobalBc, Route};
use crate::sphere_tools::Extension;
use std::collections::BTreeMap;
use std::path::PathBuf;

/// One value with its source line.
#[derive(Clone, Debug, PartialEq)]
struct Entry {
    value: String,
    line: usize,
}

/// Parsed `section → key → entry`. Top-level keys live in section `""`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("", &["preset", "refinement", "bc", "route", "seed", "output_dir"]),
    ("target", &["kind", "value", "expression", "base", "region", "level", "width"]),
    ("local", &["beta0", "ratio", "radius", "puncture", "normalization_vertex"]),
    ("glue", &["gamma", "mollifier_width", "transition_eps", "max_rounds"]),
    ("iteration", &["step_tolerance", "max_steps", "shift"]),
    ("tolerances", &["curvature", "boundary", "pair", "obstruction"]),
    ("condition", &["extension"]),
];

impl ConfigFile {
    pub fn parse(text: &str) -> Result<ConfigFile> {
        let mut cfg = ConfigFile::default();
        let mut section = String::new();
        cfg.sections.insert(section.clone(), BTreeMap::new());
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(CywError::Config { line, message: "unterminated section header".into() });
                };
                let name = name.trim().to_string();
                if !KNOWN.iter().any(|(s, _)| *s == name) {
                    return Err(CywError::Config { line, message: format!("unknown section [{name}]") });
                }
                section = name;
                cfg.sections.entry(section.clone()).or_default();
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(CywError::Config { line, message: format!("expected 'key = value', found '{body}'") });
            };
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            let keys = KNOWN.iter().find(|(s, _)| *s == section).map(|(_, k)| *k).unwrap_or(&[]);
            if !keys.contains(&key.as_str()) {
                let place = if section.is_empty() { "top level".to_string() } else { format!("[{section}]") };
                return Err(CywError::Config { line, message: format!("unknown key '{key}' at {place}") });
            }
            if value.is_empty() {
                return Err(CywError::Config { line, message: format!("empty value for '{key}'") });
            }
            let map = cfg.sections.get_mut(&section).expect("section inserted above");
            if let Some(prev) = map.get(&key) {
                return Err(CywError::Config {
                    line,
                    message: format!("duplicate key '{key}' (first set on line {})", prev.line),
                });
            }
            map.insert(key, Entry { value, line });
        }
        Ok(cfg)
    }

    fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|m| m.get(key))
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.entry(section, key).map(|e| e.value.as_str())
    }

    fn line(&self, section: &str, key: &str) -> usize {
        self.entry(section, key).map_or(0, |e| e.line)
    }

    fn parsed<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|_| CywError::Config {
                line: e.line,
                message: format!("cannot parse '{}' for '{key}'", e.value),
            }),
        }
    }

    fn positive(&self, section: &str, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.parsed(section, key)?;
        if let Some(x) = v {
            if !(x > 0.0) || !x.is_finite() {
                return Err(CywError::Config {
                    line: self.line(section, key),
                    message: format!("'{key}' must be positive, found {x}"),
                });
            }
        }
        Ok(v)
    }

    fn expression(&self, section: &str, key: &str) -> Result<Option<Expr>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => Expr::parse(&e.value).map(Some).map_err(|err| CywError::Config {
                line: e.line,
                message: format!("in '{key}': {err}"),
            }),
        }
    }
}

/// Where the target is pinned to its level.
#[derive(Clone, Debug, PartialEq)]
pub enum RegionSpec {
    /// The preset's marked region.
    Marked,
    /// Vertices where the expression is negative.
    Negative(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TargetSpec {
    Constant(f64),
    Admissible {
        base: Expr,
        region: RegionSpec,
        level: f64,
        width: Option<f64>,
    },
    /// A general expression, also used as the ambient form on spheres.
    Expression(Expr),
}

/// Named sphere functions accepted by `kind = sphere`.
pub fn named_sphere_function(name: &str) -> Option<&'static str> {
    match name {
        "one" => Some("1"),
        "tau" => Some("tau"),
        "tau-squared" => Some("tau^2"),
        "xi1-squared" => Some("x^2"),
        _ => None,
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Tolerances {
    pub curvature: Option<f64>,
    pub boundary: Option<f64>,
    pub pair: Option<f64>,
    pub obstruction: Option<f64>,
    pub step: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: PresetId,
    pub refinement: u32,
    pub bc: GlobalBc,
    pub route_override: Option<Route>,
    pub target: TargetSpec,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub beta0: Option<f64>,
    pub ratio: Option<f64>,
    pub local_radius: Option<f64>,
    pub puncture: Option<f64>,
    pub normalization_vertex: Option<usize>,
    pub gamma: Option<f64>,
    pub mollifier_width: Option<f64>,
    pub transition_eps: Option<f64>,
    pub max_rounds: Option<usize>,
    pub max_steps: Option<usize>,
    pub shift: Option<f64>,
    pub extension: Extension,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        RunConfig::from_file(&ConfigFile::parse(text)?)
    }

    pub fn from_file(f: &ConfigFile) -> Result<RunConfig> {
        let Some(preset) = f.get("", "preset") else {
            return Err(CywError::Config { line: 0, message: "missing 'preset'".into() });
        };
        let preset = PresetId::parse(preset).map_err(|e| CywError::Config { line: f.line("", "preset"), message: e.to_string() })?;
        let refinement: u32 = f.parsed("", "refinement")?.unwrap_or(1);
        let bc = match f.get("", "bc").unwrap_or(if preset.is_closed() { "closed" } else { "robin" }) {
            "closed" => GlobalBc::Closed,
            "robin" => GlobalBc::Robin,
            other => {
                return Err(CywError::Config { line: f.line("", "bc"), message: format!("bc must be closed or robin, found '{other}'") });
            }
        };
        let route_override = match f.get("", "route") {
            None => None,
            Some(r) => Some(Route::parse(r).map_err(|e| CywError::Config { line: f.line("", "route"), message: e.to_string() })?),
        };
        let target = target_spec(f)?;
        let ratio = f.positive("local", "ratio")?;
        if ratio.is_some_and(|r| r >= 1.0) {
            return Err(CywError::Config { line: f.line("local", "ratio"), message: "'ratio' must lie in (0, 1)".into() });
        }
        let beta0: Option<f64> = f.parsed("local", "beta0")?;
        if beta0.is_some_and(|b| !(b < 0.0)) {
            return Err(CywError::Config { line: f.line("local", "beta0"), message: "'beta0' must be negative".into() });
        }
        let extension = match f.get("condition", "extension").unwrap_or("ambient") {
            "ambient" => Extension::Ambient,
            "degree-zero" => Extension::DegreeZero,
            other => {
                return Err(CywError::Config {
                    line: f.line("condition", "extension"),
                    message: format!("extension must be ambient or degree-zero, found '{other}'"),
                });
            }
        };
        Ok(RunConfig {
            preset,
            refinement,
            bc,
            route_override,
            target,
            tolerances: Tolerances {
                curvature: f.positive("tolerances", "curvature")?,
                boundary: f.positive("tolerances", "boundary")?,
                pair: f.positive("tolerances", "pair")?,
                obstruction: f.positive("tolerances", "obstruction")?,
                step: f.positive("iteration", "step_tolerance")?,
            },
            seed: f.parsed("", "seed")?.unwrap_or(0),
            output_dir: f.get("", "output_dir").map(PathBuf::from),
            beta0,
            ratio,
            local_radius: f.positive("local", "radius")?,
            puncture: f.positive("local", "puncture")?,
            normalization_vertex: f.parsed("local", "normalization_vertex")?,
            gamma: f.positive("glue", "gamma")?,
            mollifier_width: f.positive("glue", "mollifier_width")?,
            transition_eps: f.positive("glue", "transition_eps")?,
            max_rounds: f.parsed("glue", "max_rounds")?,
            max_steps: f.parsed("iteration", "max_steps")?,
            shift: f.parsed("iteration", "shift")?,
            extension,
        })
    }
}

fn target_spec(f: &ConfigFile) -> Result<TargetSpec> {
    let kind = f.get("target", "kind").unwrap_or("constant");
    let line = f.line("target", "kind");
    match kind {
        "constant" => {
            let v: f64 = f.parsed("target", "value")?.ok_or(CywError::Config { line, message: "constant target needs 'value'".into() })?;
            Ok(TargetSpec::Constant(v))
        }
        "expression" => {
            let e = f
                .expression("target", "expression")?
                .ok_or(CywError::Config { line, message: "expression target needs 'expression'".into() })?;
            Ok(TargetSpec::Expression(e))
        }
        "sphere" => {
            let name = f.get("target", "expression").ok_or(CywError::Config { line, message: "sphere target needs 'expression'".into() })?;
            let src = named_sphere_function(name).unwrap_or(name);
            let e = Expr::parse(src).map_err(|err| CywError::Config { line: f.line("target", "expression"), message: format!("in 'expression': {err}") })?;
            Ok(TargetSpec::Expression(e))
        }
        "admissible" => {
            let base = f.expression("target", "base")?.ok_or(CywError::Config { line, message: "admissible target needs 'base'".into() })?;
            let level: f64 = f.parsed("target", "level")?.ok_or(CywError::Config { line, message: "admissible target needs 'level'".into() })?;
            let region = match f.get("target", "region").unwrap_or("marked") {
                "marked" => RegionSpec::Marked,
                _ => RegionSpec::Negative(f.expression("target", "region")?.expect("region present")),
            };
            Ok(TargetSpec::Admissible {
                base,
                region,
                level,
                width: f.positive("target", "width")?,
            })
        }
        other => Err(CywError::Config {
            line,
            message: format!("target kind must be constant, expression, sphere or admissible, found '{other}'"),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_defaults() {
        let c = RunConfig::parse("preset = round-s3\n# comment\n[target]\nvalue = 6\n").unwrap();
        assert_eq!(c.preset, PresetId::RoundS3);
        assert_eq!(c.refinement, 1);
        assert_eq!(c.bc, GlobalBc::Closed);
        assert_eq!(c.target, TargetSpec::Constant(6.0));
        let c = RunConfig::parse("preset = annulus\n[target]\nvalue = 1").unwrap();
        assert_eq!(c.bc, GlobalBc::Robin);
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("preset = round-s3\nbogus = 1\n", 2),
            ("preset = round-s3\n[nowhere]\n", 2),
            ("preset = round-s3\nrefinement = two\n", 2),
            ("preset = round-s3\n[target]\nkind = expression\nexpression = 1 +\n", 4),
            ("preset = round-s3\n[target]\nvalue = 1\n[tolerances]\ncurvature = -1\n", 5),
            ("preset = round-s3\npreset = flat-t3\n", 2),
            ("preset = round-s3\njust text\n", 2),
        ];
        for (text, line) in cases {
            match RunConfig::parse(text) {
                Err(CywError::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("expected config error for {text:?}, got {other:?}"),
            }
        }
    }

    #[test]
    fn sphere_names_resolve() {
        let c = RunConfig::parse("preset = round-s3\n[target]\nkind = sphere\nexpression = tau-squared\n").unwrap();
        let TargetSpec::Expression(e) = c.target else { panic!() };
        assert_eq!(e.eval(&[0.0, 0.0, 0.0, 0.5]), 0.25);
    }
}
