//! Run configuration: a TOML file with `[system]`, `[task]` and `[output]`
//! sections. Validation collects every problem with its key path before
//! anything runs.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use magcurv_core::builtins::BUILTIN_NAMES;
use magcurv_core::loopspace::IndexFrame;
use serde::Serialize;
use toml::{Table, Value};

use crate::expr::Expression;

pub const DEFAULT_SEED: u64 = 20_240_611;
pub const DEFAULT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Integrate,
    Curvature,
    ScanK0,
    TheoremB,
    FindOrbit,
    Index,
    Transport,
    BonnetMyers,
    ManeBound,
    Report,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Integrate,
        Command::Curvature,
        Command::ScanK0,
        Command::TheoremB,
        Command::FindOrbit,
        Command::Index,
        Command::Transport,
        Command::BonnetMyers,
        Command::ManeBound,
        Command::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Integrate => "integrate",
            Command::Curvature => "curvature",
            Command::ScanK0 => "scan-k0",
            Command::TheoremB => "theorem-b",
            Command::FindOrbit => "find-orbit",
            Command::Index => "index",
            Command::Transport => "transport",
            Command::BonnetMyers => "bonnet-myers",
            Command::ManeBound => "mane-bound",
            Command::Report => "report",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Commands that locate an orbit from `x0`, `v0` and a period guess.
    pub fn searches(self) -> bool {
        matches!(self, Command::FindOrbit | Command::Index | Command::BonnetMyers | Command::Report)
    }

    fn samples_region(self) -> bool {
        matches!(self, Command::Curvature | Command::ScanK0 | Command::TheoremB | Command::ManeBound)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Shoot,
    Gradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
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

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct SystemConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dimension: Option<usize>,
    /// Row-major `n × n` entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Vec<Expression>>,
    /// Row-major `n × n` entries.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_form: Option<Vec<Expression>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primitive: Option<Vec<Expression>>,
    /// Points with `domain > 0` belong to the chart.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<Expression>,
    /// Period per coordinate; `0` for a non-periodic coordinate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lattice: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub derivative: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fd_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub orientable: Option<bool>,
}

impl SystemConfig {
    pub fn dim(&self) -> usize {
        self.dimension.unwrap_or(2)
    }

    fn expressions(&self) -> impl Iterator<Item = &Expression> {
        self.metric
            .iter()
            .chain(&self.two_form)
            .chain(&self.primitive)
            .flatten()
            .chain(&self.domain)
    }

    pub fn uses_k(&self) -> bool {
        self.expressions().any(Expression::uses_k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskConfig {
    pub command: Command,
    pub seed: u64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w0: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nodes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub modes: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame: Option<IndexFrame>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export_hessian: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub region_upper: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_axis: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub energies: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputConfig {
    pub dir: String,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub system: SystemConfig,
    pub task: TaskConfig,
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchemaIssue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for SchemaIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Syntax(String),
    Schema(Vec<SchemaIssue>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read configuration: {m}"),
            ConfigError::Syntax(m) => write!(f, "configuration syntax error: {m}"),
            ConfigError::Schema(issues) => {
                write!(f, "configuration has {} schema error(s)", issues.len())?;
                for i in issues {
                    write!(f, "\n  {i}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

const SYSTEM_KEYS: &[&str] =
    &["builtin", "b", "dimension", "metric", "two_form", "primitive", "domain", "lattice", "derivative", "fd_step", "orientable"];
const TASK_KEYS: &[&str] = &[
    "command",
    "seed",
    "tolerance",
    "k",
    "k_grid",
    "samples",
    "x0",
    "v0",
    "w0",
    "t_end",
    "period",
    "method",
    "radius",
    "nodes",
    "modes",
    "frame",
    "export_hessian",
    "region_lower",
    "region_upper",
    "per_axis",
    "energies",
];
const OUTPUT_KEYS: &[&str] = &["dir", "format"];

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "string",
        Value::Integer(_) => "integer",
        Value::Float(_) => "float",
        Value::Boolean(_) => "boolean",
        Value::Datetime(_) => "datetime",
        Value::Array(_) => "array",
        Value::Table(_) => "table",
    }
}

fn as_number(v: &Value) -> Option<f64> {
    match v {
        Value::Integer(i) => Some(*i as f64),
        Value::Float(f) => Some(*f),
        _ => None,
    }
}

struct Section<'a> {
    name: &'static str,
    table: Option<&'a Table>,
}

#[derive(Default)]
struct Validator {
    issues: Vec<SchemaIssue>,
}

impl Validator {
    fn issue(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(SchemaIssue { path: path.into(), message: message.into() });
    }

    fn section<'a>(&mut self, root: &'a Table, name: &'static str, keys: &[&str]) -> Section<'a> {
        let table = match root.get(name) {
            None => None,
            Some(Value::Table(t)) => Some(t),
            Some(v) => {
                self.issue(name, format!("expected table, found {}", type_name(v)));
                None
            }
        };
        if let Some(t) = table {
            for key in t.keys().filter(|k| !keys.contains(&k.as_str())) {
                self.issue(format!("{name}.{key}"), "unknown key");
            }
        }
        Section { name, table }
    }

    fn get<'a>(&self, s: &Section<'a>, key: &str) -> Option<&'a Value> {
        s.table.and_then(|t| t.get(key))
    }

    fn number(&mut self, s: &Section, key: &str) -> Option<f64> {
        let v = self.get(s, key)?;
        let n = as_number(v);
        if n.is_none() {
            self.issue(format!("{}.{key}", s.name), format!("expected number, found {}", type_name(v)));
        }
        n.filter(|n| {
            let ok = n.is_finite();
            if !ok {
                self.issue(format!("{}.{key}", s.name), "must be finite");
            }
            ok
        })
    }

    fn positive(&mut self, s: &Section, key: &str) -> Option<f64> {
        let n = self.number(s, key)?;
        if n > 0.0 {
            Some(n)
        } else {
            self.issue(format!("{}.{key}", s.name), format!("must be positive, got {n}"));
            None
        }
    }

    fn count(&mut self, s: &Section, key: &str, min: usize) -> Option<usize> {
        let v = self.get(s, key)?;
        match v {
            Value::Integer(i) if *i >= min as i64 => Some(*i as usize),
            Value::Integer(i) => {
                self.issue(format!("{}.{key}", s.name), format!("must be at least {min}, got {i}"));
                None
            }
            _ => {
                self.issue(format!("{}.{key}", s.name), format!("expected integer, found {}", type_name(v)));
                None
            }
        }
    }

    fn boolean(&mut self, s: &Section, key: &str) -> Option<bool> {
        let v = self.get(s, key)?;
        if let Value::Boolean(b) = v {
            Some(*b)
        } else {
            self.issue(format!("{}.{key}", s.name), format!("expected boolean, found {}", type_name(v)));
            None
        }
    }

    fn string<'a>(&mut self, s: &Section<'a>, key: &str) -> Option<&'a str> {
        let v = self.get(s, key)?;
        if let Value::String(x) = v {
            Some(x.as_str())
        } else {
            self.issue(format!("{}.{key}", s.name), format!("expected string, found {}", type_name(v)));
            None
        }
    }

    fn choice<T>(&mut self, s: &Section, key: &str, names: &[&str], parse: impl Fn(&str) -> Option<T>) -> Option<T> {
        let text = self.string(s, key)?;
        let out = parse(text);
        if out.is_none() {
            self.issue(format!("{}.{key}", s.name), format!("unknown value '{text}'; expected one of {}", names.join(", ")));
        }
        out
    }

    fn numbers(&mut self, s: &Section, key: &str) -> Option<Vec<f64>> {
        let v = self.get(s, key)?;
        let Value::Array(items) = v else {
            self.issue(format!("{}.{key}", s.name), format!("expected array, found {}", type_name(v)));
            return None;
        };
        let mut out = Vec::with_capacity(items.len());
        let mut ok = true;
        for (i, item) in items.iter().enumerate() {
            match as_number(item).filter(|x| x.is_finite()) {
                Some(x) => out.push(x),
                None => {
                    self.issue(format!("{}.{key}[{i}]", s.name), format!("expected finite number, found {}", type_name(item)));
                    ok = false;
                }
            }
        }
        ok.then_some(out)
    }

    fn expression(&mut self, path: String, v: &Value) -> Option<Expression> {
        let text = match v {
            Value::String(s) => s.clone(),
            Value::Integer(_) | Value::Float(_) => as_number(v).map(|x| format!("{x:?}")).unwrap_or_default(),
            _ => {
                self.issue(path, format!("expected expression string or number, found {}", type_name(v)));
                return None;
            }
        };
        match Expression::parse(&text) {
            Ok(e) => Some(e),
            Err(err) => {
                self.issue(path, err.to_string());
                None
            }
        }
    }

    fn expressions(&mut self, s: &Section, key: &str) -> Option<Vec<Expression>> {
        let v = self.get(s, key)?;
        let Value::Array(items) = v else {
            self.issue(format!("{}.{key}", s.name), format!("expected array of expressions, found {}", type_name(v)));
            return None;
        };
        let parsed: Vec<_> = items.iter().enumerate().map(|(i, item)| self.expression(format!("{}.{key}[{i}]", s.name), item)).collect();
        parsed.into_iter().collect()
    }
}

fn check_len(val: &mut Validator, path: &str, len: Option<usize>, expected: usize) {
    if let Some(len) = len {
        if len != expected {
            val.issue(path, format!("expected {expected} entries, got {len}"));
        }
    }
}

fn parse_system(val: &mut Validator, root: &Table) -> SystemConfig {
    let s = val.section(root, "system", SYSTEM_KEYS);
    if s.table.is_none() && !root.contains_key("system") {
        val.issue("system", "missing section");
    }
    let builtin = val.choice(&s, "builtin", BUILTIN_NAMES, |n| BUILTIN_NAMES.contains(&n).then(|| n.to_string()));
    let builtin_given = val.get(&s, "builtin").is_some();
    let derivative = val.choice(&s, "derivative", &["analytic", "finite_difference"], |n| match n {
        "analytic" => Some(Scheme::Analytic),
        "finite_difference" => Some(Scheme::FiniteDifference),
        _ => None,
    });
    let cfg = SystemConfig {
        b: val.number(&s, "b"),
        dimension: val.count(&s, "dimension", 2),
        metric: val.expressions(&s, "metric"),
        two_form: val.expressions(&s, "two_form"),
        primitive: val.expressions(&s, "primitive"),
        domain: val.get(&s, "domain").and_then(|v| val.expression("system.domain".into(), v)),
        lattice: val.numbers(&s, "lattice"),
        fd_step: val.positive(&s, "fd_step"),
        orientable: val.boolean(&s, "orientable"),
        builtin,
        derivative,
    };
    if let Some(l) = &cfg.lattice {
        for (i, p) in l.iter().enumerate() {
            if *p < 0.0 {
                val.issue(format!("system.lattice[{i}]"), "period must be positive, or 0 for none");
            }
        }
    }
    if builtin_given {
        for key in ["dimension", "metric", "two_form", "primitive", "domain", "lattice", "orientable"] {
            if val.get(&s, key).is_some() {
                val.issue(format!("system.{key}"), "not allowed together with system.builtin");
            }
        }
        if (cfg.builtin.as_deref() == Some("round_sphere_polar") || cfg.builtin.as_deref() == Some("hyperbolic_chart"))
            && val.get(&s, "b").is_some() {
                val.issue("system.b", "this builtin has a fixed magnetic form");
            }
    } else if s.table.is_some() {
        let Some(n) = cfg.dimension else {
            if val.get(&s, "dimension").is_none() {
                val.issue("system", "either builtin or dimension with metric and two_form is required");
            }
            return cfg;
        };
        for key in ["metric", "two_form"] {
            if val.get(&s, key).is_none() {
                val.issue(format!("system.{key}"), "required for an expression system");
            }
        }
        if val.get(&s, "b").is_some() {
            val.issue("system.b", "only used with a builtin");
        }
        if cfg.derivative == Some(Scheme::Analytic) {
            val.issue("system.derivative", "expression systems use finite_difference");
        }
        check_len(val, "system.metric", cfg.metric.as_ref().map(Vec::len), n * n);
        check_len(val, "system.two_form", cfg.two_form.as_ref().map(Vec::len), n * n);
        check_len(val, "system.primitive", cfg.primitive.as_ref().map(Vec::len), n);
        check_len(val, "system.lattice", cfg.lattice.as_ref().map(Vec::len), n);
        let fields = [("metric", &cfg.metric), ("two_form", &cfg.two_form), ("primitive", &cfg.primitive)];
        for (key, list) in fields {
            for (i, e) in list.iter().flatten().enumerate() {
                if e.arity() > n {
                    val.issue(format!("system.{key}[{i}]"), format!("uses x{} but dimension is {n}", e.arity()));
                }
            }
        }
        if let Some(d) = &cfg.domain {
            if d.arity() > n {
                val.issue("system.domain", format!("uses x{} but dimension is {n}", d.arity()));
            }
        }
    }
    if cfg.fd_step.is_some() && cfg.derivative != Some(Scheme::FiniteDifference) && (builtin_given || cfg.derivative.is_some()) {
        val.issue("system.fd_step", "only used with derivative = \"finite_difference\"");
    }
    cfg
}

fn parse_task(val: &mut Validator, root: &Table, system: &SystemConfig) -> Option<TaskConfig> {
    let s = val.section(root, "task", TASK_KEYS);
    if !root.contains_key("task") {
        val.issue("task", "missing section");
    }
    let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
    let command = val.choice(&s, "command", &names, Command::parse);
    if s.table.is_some() && val.get(&s, "command").is_none() {
        val.issue("task.command", "required");
    }
    let seed = match val.get(&s, "seed") {
        None => Some(DEFAULT_SEED),
        Some(Value::Integer(i)) if *i >= 0 => Some(*i as u64),
        Some(v) => {
            val.issue("task.seed", format!("expected nonnegative integer, found {}", type_name(v)));
            None
        }
    };
    let method = val.choice(&s, "method", &["shoot", "gradient"], |n| match n {
        "shoot" => Some(Method::Shoot),
        "gradient" => Some(Method::Gradient),
        _ => None,
    });
    let frame = val.choice(&s, "frame", &["coordinate", "transported"], |n| match n {
        "coordinate" => Some(IndexFrame::Coordinate),
        "transported" => Some(IndexFrame::Transported),
        _ => None,
    });
    let task = TaskConfig {
        command: command.unwrap_or(Command::Integrate),
        seed: seed.unwrap_or(DEFAULT_SEED),
        tolerance: if val.get(&s, "tolerance").is_some() { val.positive(&s, "tolerance").unwrap_or(DEFAULT_TOLERANCE) } else { DEFAULT_TOLERANCE },
        k: val.positive(&s, "k"),
        k_grid: val.numbers(&s, "k_grid"),
        samples: val.count(&s, "samples", 1),
        x0: val.numbers(&s, "x0"),
        v0: val.numbers(&s, "v0"),
        w0: val.numbers(&s, "w0"),
        t_end: val.positive(&s, "t_end"),
        period: val.positive(&s, "period"),
        method,
        radius: val.positive(&s, "radius"),
        nodes: val.count(&s, "nodes", 32),
        modes: val.count(&s, "modes", 1),
        frame,
        export_hessian: val.boolean(&s, "export_hessian"),
        region_lower: val.numbers(&s, "region_lower"),
        region_upper: val.numbers(&s, "region_upper"),
        per_axis: val.count(&s, "per_axis", 2),
        energies: val.count(&s, "energies", 1),
    };
    let command = command?;

    if let Some(grid) = &task.k_grid {
        if grid.iter().any(|k| *k <= 0.0) {
            val.issue("task.k_grid", "energies must be positive");
        }
        if command == Command::ScanK0 && grid.windows(2).any(|w| w[0] >= w[1]) {
            val.issue("task.k_grid", "must be strictly increasing");
        }
        if system.uses_k() {
            val.issue("task.k_grid", "system fields depend on k; use a single task.k");
        }
    }
    if system.uses_k() && task.k.is_none() {
        val.issue("task.k", "system fields depend on k, so task.k is required");
    }

    let n = system.dim();
    for (key, v) in [("x0", &task.x0), ("v0", &task.v0), ("w0", &task.w0), ("region_lower", &task.region_lower), ("region_upper", &task.region_upper)] {
        check_len(val, &format!("task.{key}"), v.as_ref().map(Vec::len), n);
    }
    if let (Some(lo), Some(hi)) = (&task.region_lower, &task.region_upper) {
        if lo.len() == hi.len() && lo.iter().zip(hi).any(|(a, b)| a >= b) {
            val.issue("task.region_upper", "must exceed region_lower in every coordinate");
        }
    }
    if task.region_lower.is_some() != task.region_upper.is_some() {
        val.issue("task.region_lower", "region_lower and region_upper go together");
    }

    let mut require = |key: &str, present: bool| {
        if !present {
            val.issue(format!("task.{key}"), format!("required by command {}", command.name()));
        }
    };
    match command {
        Command::Integrate => {
            require("x0", task.x0.is_some());
            require("v0", task.v0.is_some());
            require("t_end", task.t_end.is_some());
        }
        Command::Transport => {
            require("x0", task.x0.is_some());
            require("v0", task.v0.is_some());
            require("w0", task.w0.is_some());
            require("t_end", task.t_end.is_some());
        }
        Command::Curvature | Command::TheoremB => require("k", task.k.is_some()),
        Command::ScanK0 => require("k_grid", task.k_grid.is_some()),
        Command::ManeBound => {}
        Command::FindOrbit | Command::Index | Command::BonnetMyers | Command::Report => {
            if command == Command::Report {
                require("k or k_grid", task.k.is_some() || task.k_grid.is_some());
            } else {
                require("k", task.k.is_some());
            }
            require("x0", task.x0.is_some());
            require("period", task.period.is_some());
            if task.method == Some(Method::Gradient) {
                require("radius", task.radius.is_some());
            } else {
                require("v0", task.v0.is_some());
            }
        }
    }
    if command.samples_region() && system.builtin.is_none() && task.region_lower.is_none() {
        val.issue("task.region_lower", format!("required by command {} for an expression system", command.name()));
    }
    if task.method == Some(Method::Gradient) && !command.searches() {
        val.issue("task.method", "only used by orbit searches");
    }
    Some(task)
}

fn parse_output(val: &mut Validator, root: &Table) -> OutputConfig {
    let s = val.section(root, "output", OUTPUT_KEYS);
    OutputConfig {
        dir: val.string(&s, "dir").unwrap_or(".").to_string(),
        format: val.choice(&s, "format", &["csv", "json"], Format::parse).unwrap_or(Format::Json),
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut val = Validator::default();
    let known: BTreeSet<&str> = ["system", "task", "output"].into();
    for key in root.keys().filter(|k| !known.contains(k.as_str())) {
        val.issue(key.clone(), "unknown section");
    }
    let system = parse_system(&mut val, &root);
    let task = parse_task(&mut val, &root, &system);
    let output = parse_output(&mut val, &root);
    match task {
        Some(task) if val.issues.is_empty() => Ok(RunConfig { system, task, output }),
        _ => Err(ConfigError::Schema(val.issues)),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TORUS: &str = r#"
[system]
builtin = "flat_torus"
b = 1.0

[task]
command = "find-orbit"
k = 0.5
x0 = [0.0, 0.0]
v0 = [1.0, 0.0]
period = 6.0

[output]
format = "json"
"#;

    fn issues(text: &str) -> Vec<SchemaIssue> {
        match parse_config(text) {
            Err(ConfigError::Schema(i)) => i,
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn parses_torus_task() {
        let cfg = parse_config(TORUS).unwrap();
        assert_eq!(cfg.task.command, Command::FindOrbit);
        assert_eq!(cfg.task.seed, DEFAULT_SEED);
        assert_eq!(cfg.system.builtin.as_deref(), Some("flat_torus"));
        assert_eq!(cfg.output.dir, ".");
    }

    #[test]
    fn serialization_is_idempotent() {
        let cfg = parse_config(TORUS).unwrap();
        let once = cfg.to_toml();
        let again = parse_config(&once).unwrap();
        assert_eq!(again, cfg);
        assert_eq!(again.to_toml(), once);
    }

    #[test]
    fn lists_every_issue() {
        let text = r#"
[system]
builtin = "klein_bottle"
colour = "red"

[task]
command = "find-orbit"
tolerance = -1e-9
x0 = [0.0]
"#;
        let paths: Vec<String> = issues(text).into_iter().map(|i| i.path).collect();
        for p in ["system.builtin", "system.colour", "task.tolerance", "task.k", "task.period", "task.v0"] {
            assert!(paths.iter().any(|q| q == p), "missing {p} in {paths:?}");
        }
    }

    #[test]
    fn expression_errors_carry_offsets() {
        let text = r#"
[system]
dimension = 2
metric = ["1", "0", "0", "sin("]
two_form = ["0", "x3", "-1", "0"]

[task]
command = "mane-bound"
region_lower = [0, 0]
region_upper = [1, 1]
"#;
        let found = issues(text);
        assert!(found.iter().any(|i| i.path == "system.metric[3]" && i.message.contains("offset 4")));
        assert!(found.iter().any(|i| i.path == "system.two_form[1]" && i.message.contains("x3")));
    }

    #[test]
    fn k_dependent_fields_need_k() {
        let text = r#"
[system]
dimension = 2
metric = ["1", "0", "0", "1"]
two_form = ["0", "k", "-k", "0"]

[task]
command = "mane-bound"
region_lower = [0, 0]
region_upper = [1, 1]
"#;
        assert!(issues(text).iter().any(|i| i.path == "task.k"));
    }
}
