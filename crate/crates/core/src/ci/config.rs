use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use thiserror::Error;

pub const STORE_ENV: &str = "HETEROTEST_STORE";
pub const DEFAULT_INTERVAL_S: u64 = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Main,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentRef {
    pub name: String,
    pub kind: String,
    pub location: PathBuf,
    pub role: Role,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    Checkout,
    Build,
    Test,
    Coverage,
    Report,
    Notify,
    Cleanup,
}

impl Action {
    pub const ALL: [Action; 7] = [
        Action::Checkout,
        Action::Build,
        Action::Test,
        Action::Coverage,
        Action::Report,
        Action::Notify,
        Action::Cleanup,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Checkout => "checkout",
            Action::Build => "build",
            Action::Test => "test",
            Action::Coverage => "coverage",
            Action::Report => "report",
            Action::Notify => "notify",
            Action::Cleanup => "cleanup",
        }
    }

    /// Actions that still run after an earlier action failed.
    pub fn always_runs(self) -> bool {
        matches!(self, Action::Report | Action::Notify | Action::Cleanup)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Action {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Action::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown action `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotifyConfig {
    pub enabled: bool,
    pub recipients: Vec<String>,
    pub outbox: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CiConfig {
    /// In file order; exactly one has [`Role::Main`].
    pub components: Vec<ComponentRef>,
    pub actions: Vec<Action>,
    pub verbosity: u32,
    pub notify: NotifyConfig,
    pub interval: Duration,
    pub store: PathBuf,
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

enum Section {
    None,
    Component(usize),
    Pipeline,
    Notify,
    Daemon,
}

fn list(v: &str) -> Vec<String> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "on" | "1" => Some(true),
        "false" | "no" | "off" | "0" => Some(false),
        _ => None,
    }
}

impl CiConfig {
    /// Reads a config file. Relative locations resolve against its directory;
    /// `HETEROTEST_STORE` overrides the store path.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        let mut cfg = Self::parse(&text, base)?;
        if let Some(store) = std::env::var_os(STORE_ENV).filter(|s| !s.is_empty()) {
            let store = PathBuf::from(store);
            if cfg.notify.outbox == cfg.store.join("outbox") {
                cfg.notify.outbox = store.join("outbox");
            }
            cfg.store = store;
        }
        Ok(cfg)
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self, ConfigError> {
        let mut components: Vec<ComponentRef> = Vec::new();
        let mut locations: Vec<Option<PathBuf>> = Vec::new();
        let mut roles: Vec<Option<Role>> = Vec::new();
        let mut actions = Action::ALL.to_vec();
        let mut verbosity = 1;
        let mut notify = NotifyConfig {
            enabled: true,
            recipients: Vec::new(),
            outbox: PathBuf::new(),
        };
        let mut outbox = None;
        let mut interval = DEFAULT_INTERVAL_S;
        let mut store = base.join("store");
        let mut section = Section::None;

        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let err = |m: String| ConfigError::Syntax { line: n, message: m };
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(head) = line.strip_prefix('[') {
                let head = head
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header".into()))?
                    .trim();
                let mut words = head.split_whitespace();
                section = match (words.next(), words.next(), words.next()) {
                    (Some("component"), Some(name), None) => {
                        if components.iter().any(|c| c.name == name) {
                            return Err(err(format!("duplicate component `{name}`")));
                        }
                        components.push(ComponentRef {
                            name: name.to_string(),
                            kind: "journal".into(),
                            location: PathBuf::new(),
                            role: Role::External,
                        });
                        locations.push(None);
                        roles.push(None);
                        Section::Component(components.len() - 1)
                    }
                    (Some("pipeline"), None, None) => Section::Pipeline,
                    (Some("notify"), None, None) => Section::Notify,
                    (Some("daemon"), None, None) => Section::Daemon,
                    _ => return Err(err(format!("unknown section `[{head}]`"))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err("expected `key = value`".into()))?;
            match (&section, key) {
                (Section::Component(c), "kind") => components[*c].kind = value.to_string(),
                (Section::Component(c), "location") => locations[*c] = Some(base.join(value)),
                (Section::Component(c), "role") => {
                    roles[*c] = Some(match value {
                        "main" => Role::Main,
                        "external" => Role::External,
                        _ => return Err(err(format!("role must be `main` or `external`, not `{value}`"))),
                    })
                }
                (Section::Pipeline, "actions") => {
                    actions = list(value)
                        .iter()
                        .map(|a| a.parse())
                        .collect::<Result<_, String>>()
                        .map_err(err)?;
                }
                (Section::Pipeline, "verbosity") => {
                    verbosity = value.parse().map_err(|_| err(format!("bad verbosity `{value}`")))?
                }
                (Section::Notify, "enabled") => {
                    notify.enabled = parse_bool(value).ok_or_else(|| err(format!("bad boolean `{value}`")))?
                }
                (Section::Notify, "recipients") => notify.recipients = list(value),
                (Section::Notify, "outbox") => outbox = Some(base.join(value)),
                (Section::Daemon, "interval_s") => {
                    interval = value.parse().map_err(|_| err(format!("bad interval `{value}`")))?
                }
                (Section::Daemon, "store") => store = base.join(value),
                (Section::None, _) => return Err(err(format!("key `{key}` outside any section"))),
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }

        for (i, c) in components.iter_mut().enumerate() {
            c.location = locations[i]
                .take()
                .ok_or_else(|| ConfigError::Invalid(format!("component `{}` has no location", c.name)))?;
            c.role = roles[i].unwrap_or(Role::External);
            if c.kind != "journal" {
                return Err(ConfigError::Invalid(format!(
                    "component `{}`: unsupported kind `{}`",
                    c.name, c.kind
                )));
            }
        }
        let mains = components.iter().filter(|c| c.role == Role::Main).count();
        if mains != 1 {
            return Err(ConfigError::Invalid(format!(
                "exactly one main component required, found {mains}"
            )));
        }
        notify.outbox = outbox.unwrap_or_else(|| store.join("outbox"));
        Ok(CiConfig {
            components,
            actions,
            verbosity,
            notify,
            interval: Duration::from_secs(interval),
            store,
        })
    }
}
