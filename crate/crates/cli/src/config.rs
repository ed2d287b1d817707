//! Run configuration: one flat TOML schema for all scenarios with a
//! discriminating `kind` key. Parsing validates every field and reports
//! all violations at once, naming each offending key.

use std::collections::BTreeSet;

use nalgebra::Vector3;
use pullsim::experiments::{CouplingModel, DnpScenario, Scheme, TorusScenario, WaterScenario};

use crate::filter::FilterSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum OutputFormat {
    Csv,
    JsonLines,
}

impl OutputFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Self::Csv),
            "jsonl" | "json-lines" => Some(Self::JsonLines),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::JsonLines => "jsonl",
        }
    }
}

/// Scenario-independent run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Common {
    pub seed: u64,
    pub out_dir: Option<String>,
    pub format: OutputFormat,
    pub paths: u64,
    pub filter: FilterSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    Torus {
        r1: f64,
        r2: f64,
        mass: f64,
        theta0: f64,
        phi0: f64,
        direction: f64,
        speed: f64,
        dt: f64,
        n_steps: u64,
        record_every: u64,
    },
    Water {
        bond_length: f64,
        bond_angle_deg: f64,
        mass_o: f64,
        mass_h: f64,
        trap_k: f64,
        com0: [f64; 3],
        com_velocity0: [f64; 3],
        quat0: [f64; 4],
        l_body0: [f64; 3],
        dt: f64,
        n_steps: u64,
        record_every: u64,
    },
    Dnp {
        beta_e: f64,
        beta_n: f64,
        s_perp_e: f64,
        s_z_e: f64,
        s_perp_n: f64,
        s_z_n: f64,
        coupling: f64,
        coupling_model: String,
        t_on: f64,
        total_time: f64,
        rank: u64,
        dt: f64,
        scheme: String,
        renormalize: bool,
        record_every: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: Kind,
    pub common: Common,
}

/// All validation problems found in a config document.
#[derive(Debug)]
pub struct ConfigErrors(pub Vec<String>);

impl std::fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "invalid configuration ({} problem(s)):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  - {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

struct Reader<'a> {
    table: &'a toml::Table,
    errors: Vec<String>,
    used: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a toml::Table) -> Self {
        Self {
            table,
            errors: Vec::new(),
            used: BTreeSet::new(),
        }
    }

    fn float(&mut self, key: &str, default: Option<f64>) -> f64 {
        self.used.insert(key.to_string());
        match self.table.get(key) {
            Some(toml::Value::Float(x)) => *x,
            Some(toml::Value::Integer(x)) => *x as f64,
            Some(other) => {
                self.errors
                    .push(format!("key `{key}`: expected a number, got {other}"));
                default.unwrap_or(f64::NAN)
            }
            None => match default {
                Some(d) => d,
                None => {
                    self.errors.push(format!("missing required key `{key}`"));
                    f64::NAN
                }
            },
        }
    }

    fn integer(&mut self, key: &str, default: Option<u64>) -> u64 {
        self.used.insert(key.to_string());
        match self.table.get(key) {
            Some(toml::Value::Integer(x)) if *x >= 0 => *x as u64,
            Some(other) => {
                self.errors.push(format!(
                    "key `{key}`: expected a non-negative integer, got {other}"
                ));
                default.unwrap_or(0)
            }
            None => match default {
                Some(d) => d,
                None => {
                    self.errors.push(format!("missing required key `{key}`"));
                    0
                }
            },
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        self.used.insert(key.to_string());
        match self.table.get(key) {
            Some(toml::Value::Boolean(b)) => *b,
            Some(other) => {
                self.errors
                    .push(format!("key `{key}`: expected a boolean, got {other}"));
                default
            }
            None => default,
        }
    }

    fn string(&mut self, key: &str, default: Option<&str>) -> String {
        self.used.insert(key.to_string());
        match self.table.get(key) {
            Some(toml::Value::String(s)) => s.clone(),
            Some(other) => {
                self.errors
                    .push(format!("key `{key}`: expected a string, got {other}"));
                default.unwrap_or("").to_string()
            }
            None => match default {
                Some(d) => d.to_string(),
                None => {
                    self.errors.push(format!("missing required key `{key}`"));
                    String::new()
                }
            },
        }
    }

    fn vector<const N: usize>(&mut self, key: &str, default: [f64; N]) -> [f64; N] {
        self.used.insert(key.to_string());
        match self.table.get(key) {
            Some(toml::Value::Array(arr)) => {
                if arr.len() != N {
                    self.errors.push(format!(
                        "key `{key}`: expected {N} numbers, got {}",
                        arr.len()
                    ));
                    return default;
                }
                let mut out = [0.0; N];
                for (i, v) in arr.iter().enumerate() {
                    out[i] = match v {
                        toml::Value::Float(x) => *x,
                        toml::Value::Integer(x) => *x as f64,
                        other => {
                            self.errors
                                .push(format!("key `{key}[{i}]`: expected a number, got {other}"));
                            0.0
                        }
                    };
                }
                out
            }
            Some(other) => {
                self.errors
                    .push(format!("key `{key}`: expected an array, got {other}"));
                default
            }
            None => default,
        }
    }

    fn require_positive(&mut self, key: &str, value: f64) {
        if !(value > 0.0) && value.is_finite() {
            self.errors
                .push(format!("key `{key}`: must be positive, got {value}"));
        }
    }

    fn reject_unknown(&mut self) {
        for key in self.table.keys() {
            if !self.used.contains(key) {
                self.errors.push(format!("unknown key `{key}`"));
            }
        }
    }
}

/// Parse and validate a config document; on failure every violation is
/// reported with the offending key named.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigErrors> {
    let table: toml::Table = text
        .parse()
        .map_err(|e| ConfigErrors(vec![format!("TOML syntax: {e}")]))?;
    let mut r = Reader::new(&table);

    let kind_name = r.string("kind", None);
    let kind = match kind_name.as_str() {
        "torus" => {
            let r1 = r.float("r1", Some(2.0));
            let r2 = r.float("r2", Some(1.0));
            let mass = r.float("mass", Some(1.0));
            let dt = r.float("dt", None);
            let speed = r.float("speed", Some(1.0));
            r.require_positive("mass", mass);
            r.require_positive("dt", dt);
            r.require_positive("speed", speed);
            if r1.is_finite() && r2.is_finite() && !(r1 > r2 && r2 > 0.0) {
                r.errors
                    .push(format!("keys `r1`,`r2`: need r1 > r2 > 0, got {r1}, {r2}"));
            }
            Some(Kind::Torus {
                r1,
                r2,
                mass,
                theta0: r.float("theta0", Some(0.0)),
                phi0: r.float("phi0", Some(0.0)),
                direction: r.float("direction", None),
                speed,
                dt,
                n_steps: r.integer("n_steps", None),
                record_every: r.integer("record_every", Some(100)),
            })
        }
        "water" => {
            let bond_length = r.float("bond_length", Some(0.9572));
            let mass_o = r.float("mass_o", Some(16.0));
            let mass_h = r.float("mass_h", Some(1.0));
            let trap_k = r.float("trap_k", Some(1.0));
            let dt = r.float("dt", None);
            r.require_positive("bond_length", bond_length);
            r.require_positive("mass_o", mass_o);
            r.require_positive("mass_h", mass_h);
            r.require_positive("trap_k", trap_k);
            r.require_positive("dt", dt);
            Some(Kind::Water {
                bond_length,
                bond_angle_deg: r.float("bond_angle_deg", Some(104.52)),
                mass_o,
                mass_h,
                trap_k,
                com0: r.vector("com0", [0.4, 0.0, 0.0]),
                com_velocity0: r.vector("com_velocity0", [0.0, 0.0, 0.0]),
                quat0: r.vector("quat0", [1.0, 0.0, 0.0, 0.0]),
                l_body0: r.vector("l_body0", [0.0, 0.0, 2.0]),
                dt,
                n_steps: r.integer("n_steps", None),
                record_every: r.integer("record_every", Some(100)),
            })
        }
        "dnp" => {
            let defaults = DnpScenario::default();
            let s_perp_e = r.float("s_perp_e", Some(defaults.s_perp_e));
            let s_z_e = r.float("s_z_e", Some(defaults.s_z_e));
            let s_perp_n = r.float("s_perp_n", Some(defaults.s_perp_n));
            let s_z_n = r.float("s_z_n", Some(defaults.s_z_n));
            let dt = r.float("dt", Some(defaults.dt));
            for (key, v) in [
                ("s_perp_e", s_perp_e),
                ("s_z_e", s_z_e),
                ("s_perp_n", s_perp_n),
                ("s_z_n", s_z_n),
                ("dt", dt),
            ] {
                r.require_positive(key, v);
            }
            let coupling_model = r.string("coupling_model", Some("hamiltonian"));
            if !["hamiltonian", "transfer"].contains(&coupling_model.as_str()) {
                r.errors.push(format!(
                    "key `coupling_model`: expected \"hamiltonian\" or \"transfer\", got \"{coupling_model}\""
                ));
            }
            let scheme = r.string("scheme", Some("ito"));
            if !["ito", "ito-uncorrected", "stratonovich"].contains(&scheme.as_str()) {
                r.errors.push(format!(
                    "key `scheme`: expected \"ito\", \"ito-uncorrected\", or \"stratonovich\", got \"{scheme}\""
                ));
            }
            let rank = r.integer("rank", Some(2));
            if !(rank == 1 || rank == 2) {
                r.errors
                    .push(format!("key `rank`: must be 1 or 2, got {rank}"));
            }
            let t_on = r.float("t_on", Some(defaults.t_on));
            let total_time = r.float("total_time", Some(defaults.total_time));
            if t_on.is_finite() && total_time.is_finite() && total_time <= t_on {
                r.errors.push(format!(
                    "key `total_time`: must exceed t_on={t_on}, got {total_time}"
                ));
            }
            Some(Kind::Dnp {
                beta_e: r.float("beta_e", Some(defaults.beta_e)),
                beta_n: r.float("beta_n", Some(defaults.beta_n)),
                s_perp_e,
                s_z_e,
                s_perp_n,
                s_z_n,
                coupling: r.float("coupling", Some(defaults.coupling)),
                coupling_model,
                t_on,
                total_time,
                rank,
                dt,
                scheme,
                renormalize: r.boolean("renormalize", true),
                record_every: r.integer("record_every", Some(defaults.record_every as u64)),
            })
        }
        "" => None,
        other => {
            r.errors.push(format!(
                "key `kind`: expected \"torus\", \"water\", or \"dnp\", got \"{other}\""
            ));
            None
        }
    };

    let seed = r.integer("seed", Some(0));
    let out_dir = {
        r.used.insert("out_dir".into());
        match table.get("out_dir") {
            Some(toml::Value::String(s)) => Some(s.clone()),
            Some(other) => {
                r.errors
                    .push(format!("key `out_dir`: expected a string, got {other}"));
                None
            }
            None => None,
        }
    };
    let format_str = r.string("format", Some("csv"));
    let format = OutputFormat::parse(&format_str).unwrap_or_else(|| {
        r.errors.push(format!(
            "key `format`: expected \"csv\" or \"jsonl\", got \"{format_str}\""
        ));
        OutputFormat::Csv
    });
    let paths = r.integer("paths", Some(1));
    let filter_omega_c = r.float("filter_omega_c", Some(1.0 / 125.0));
    r.require_positive("filter_omega_c", filter_omega_c);

    r.reject_unknown();
    if !r.errors.is_empty() {
        return Err(ConfigErrors(r.errors));
    }
    Ok(RunConfig {
        kind: kind.expect("kind validated"),
        common: Common {
            seed,
            out_dir,
            format,
            paths,
            filter: FilterSpec {
                omega_c: filter_omega_c,
            },
        },
    })
}

fn push_float(t: &mut toml::Table, key: &str, v: f64) {
    t.insert(key.to_string(), toml::Value::Float(v));
}

fn push_arr(t: &mut toml::Table, key: &str, v: &[f64]) {
    t.insert(
        key.to_string(),
        toml::Value::Array(v.iter().map(|&x| toml::Value::Float(x)).collect()),
    );
}

/// Serialize back to TOML; `parse_config(serialize(c))` reproduces `c`.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut t = toml::Table::new();
    match &cfg.kind {
        Kind::Torus {
            r1,
            r2,
            mass,
            theta0,
            phi0,
            direction,
            speed,
            dt,
            n_steps,
            record_every,
        } => {
            t.insert("kind".into(), toml::Value::String("torus".into()));
            push_float(&mut t, "r1", *r1);
            push_float(&mut t, "r2", *r2);
            push_float(&mut t, "mass", *mass);
            push_float(&mut t, "theta0", *theta0);
            push_float(&mut t, "phi0", *phi0);
            push_float(&mut t, "direction", *direction);
            push_float(&mut t, "speed", *speed);
            push_float(&mut t, "dt", *dt);
            t.insert("n_steps".into(), toml::Value::Integer(*n_steps as i64));
            t.insert(
                "record_every".into(),
                toml::Value::Integer(*record_every as i64),
            );
        }
        Kind::Water {
            bond_length,
            bond_angle_deg,
            mass_o,
            mass_h,
            trap_k,
            com0,
            com_velocity0,
            quat0,
            l_body0,
            dt,
            n_steps,
            record_every,
        } => {
            t.insert("kind".into(), toml::Value::String("water".into()));
            push_float(&mut t, "bond_length", *bond_length);
            push_float(&mut t, "bond_angle_deg", *bond_angle_deg);
            push_float(&mut t, "mass_o", *mass_o);
            push_float(&mut t, "mass_h", *mass_h);
            push_float(&mut t, "trap_k", *trap_k);
            push_arr(&mut t, "com0", com0);
            push_arr(&mut t, "com_velocity0", com_velocity0);
            push_arr(&mut t, "quat0", quat0);
            push_arr(&mut t, "l_body0", l_body0);
            push_float(&mut t, "dt", *dt);
            t.insert("n_steps".into(), toml::Value::Integer(*n_steps as i64));
            t.insert(
                "record_every".into(),
                toml::Value::Integer(*record_every as i64),
            );
        }
        Kind::Dnp {
            beta_e,
            beta_n,
            s_perp_e,
            s_z_e,
            s_perp_n,
            s_z_n,
            coupling,
            coupling_model,
            t_on,
            total_time,
            rank,
            dt,
            scheme,
            renormalize,
            record_every,
        } => {
            t.insert("kind".into(), toml::Value::String("dnp".into()));
            push_float(&mut t, "beta_e", *beta_e);
            push_float(&mut t, "beta_n", *beta_n);
            push_float(&mut t, "s_perp_e", *s_perp_e);
            push_float(&mut t, "s_z_e", *s_z_e);
            push_float(&mut t, "s_perp_n", *s_perp_n);
            push_float(&mut t, "s_z_n", *s_z_n);
            push_float(&mut t, "coupling", *coupling);
            t.insert(
                "coupling_model".into(),
                toml::Value::String(coupling_model.clone()),
            );
            push_float(&mut t, "t_on", *t_on);
            push_float(&mut t, "total_time", *total_time);
            t.insert("rank".into(), toml::Value::Integer(*rank as i64));
            push_float(&mut t, "dt", *dt);
            t.insert("scheme".into(), toml::Value::String(scheme.clone()));
            t.insert("renormalize".into(), toml::Value::Boolean(*renormalize));
            t.insert(
                "record_every".into(),
                toml::Value::Integer(*record_every as i64),
            );
        }
    }
    t.insert("seed".into(), toml::Value::Integer(cfg.common.seed as i64));
    if let Some(dir) = &cfg.common.out_dir {
        t.insert("out_dir".into(), toml::Value::String(dir.clone()));
    }
    t.insert(
        "format".into(),
        toml::Value::String(cfg.common.format.as_str().into()),
    );
    t.insert(
        "paths".into(),
        toml::Value::Integer(cfg.common.paths as i64),
    );
    push_float(&mut t, "filter_omega_c", cfg.common.filter.omega_c);
    toml::to_string(&toml::Value::Table(t)).expect("tables serialize")
}

impl RunConfig {
    pub fn torus_scenario(&self) -> Option<TorusScenario> {
        match &self.kind {
            Kind::Torus {
                r1,
                r2,
                mass,
                theta0,
                phi0,
                direction,
                speed,
                dt,
                n_steps,
                record_every,
            } => Some(TorusScenario {
                r1: *r1,
                r2: *r2,
                mass: *mass,
                theta0: *theta0,
                phi0: *phi0,
                direction: *direction,
                speed: *speed,
                dt: *dt,
                n_steps: *n_steps as usize,
                lambda: None,
                record_every: (*record_every).max(1) as usize,
                rk4: false,
                store_states: false,
            }),
            _ => None,
        }
    }

    pub fn water_scenario(&self) -> Option<WaterScenario> {
        match &self.kind {
            Kind::Water {
                bond_length,
                bond_angle_deg,
                mass_o,
                mass_h,
                trap_k,
                com0,
                com_velocity0,
                quat0,
                l_body0,
                dt,
                n_steps,
                record_every,
            } => Some(WaterScenario {
                bond_length: *bond_length,
                bond_angle_deg: *bond_angle_deg,
                mass_o: *mass_o,
                mass_h: *mass_h,
                trap_k: *trap_k,
                com0: Vector3::from_row_slice(com0),
                com_velocity0: Vector3::from_row_slice(com_velocity0),
                quat0: *quat0,
                l_body0: Vector3::from_row_slice(l_body0),
                dt: *dt,
                n_steps: *n_steps as usize,
                lambda: None,
                record_every: (*record_every).max(1) as usize,
                rk4: false,
                store_states: false,
            }),
            _ => None,
        }
    }

    pub fn dnp_scenario(&self, path: u64) -> Option<DnpScenario> {
        match &self.kind {
            Kind::Dnp {
                beta_e,
                beta_n,
                s_perp_e,
                s_z_e,
                s_perp_n,
                s_z_n,
                coupling,
                coupling_model,
                t_on,
                total_time,
                rank,
                dt,
                scheme,
                renormalize,
                record_every,
            } => Some(DnpScenario {
                beta_e: *beta_e,
                beta_n: *beta_n,
                s_perp_e: *s_perp_e,
                s_z_e: *s_z_e,
                s_perp_n: *s_perp_n,
                s_z_n: *s_z_n,
                coupling: *coupling,
                model: match coupling_model.as_str() {
                    "transfer" => CouplingModel::LindbladTransfer,
                    _ => CouplingModel::FlipFlopHamiltonian,
                },
                t_on: *t_on,
                total_time: *total_time,
                rank: *rank as usize,
                dt: *dt,
                seed: self.common.seed,
                path,
                scheme: match scheme.as_str() {
                    "ito-uncorrected" => Scheme::ItoUncorrected,
                    "stratonovich" => Scheme::StratonovichHeun,
                    _ => Scheme::ItoCorrected,
                },
                record_every: (*record_every).max(1) as usize,
                renormalize: *renormalize,
                filter_omega: self.common.filter.omega_c,
            }),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_torus_config_parses() {
        let cfg = parse_config(
            r#"
kind = "torus"
direction = 0.4
dt = 1e-4
n_steps = 1000
seed = 7
"#,
        )
        .unwrap();
        assert_eq!(cfg.common.seed, 7);
        let s = cfg.torus_scenario().unwrap();
        assert_eq!(s.n_steps, 1000);
        assert_eq!(s.r1, 2.0);
    }

    #[test]
    fn negative_spectral_density_rejected_with_key_named() {
        let err = parse_config(
            r#"
kind = "dnp"
s_z_n = -0.5
"#,
        )
        .unwrap_err();
        assert!(err.0.iter().any(|e| e.contains("`s_z_n`")), "{err}");
    }

    #[test]
    fn unknown_keys_rejected_and_all_errors_reported() {
        let err = parse_config(
            r#"
kind = "torus"
dt = -1.0
n_steps = 10
bogus_key = 1
another = "x"
"#,
        )
        .unwrap_err();
        let text = format!("{err}");
        assert!(text.contains("`bogus_key`"), "{text}");
        assert!(text.contains("`another`"), "{text}");
        assert!(text.contains("`dt`"), "{text}");
        assert!(text.contains("`direction`"), "{text}"); // missing required
        assert!(err.0.len() >= 4);
    }

    #[test]
    fn round_trip_preserves_config() {
        for text in [
            r#"
kind = "torus"
direction = 0.35
dt = 1e-4
n_steps = 500
seed = 3
format = "jsonl"
"#,
            r#"
kind = "water"
dt = 2e-4
n_steps = 100
l_body0 = [0.1, 0.0, 2.0]
"#,
            r#"
kind = "dnp"
rank = 1
scheme = "stratonovich"
coupling_model = "transfer"
coupling = 2.0
paths = 4
"#,
        ] {
            let cfg = parse_config(text).unwrap();
            let round = parse_config(&serialize_config(&cfg)).unwrap();
            assert_eq!(cfg, round);
        }
    }
}
