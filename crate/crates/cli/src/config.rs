//! Portfolio configuration file.
//!
//! ```ini
//! [portfolio]
//! timeout = 1200
//! cores = 8
//! kb = kb/
//!
//! [solver chuffed]
//! cmd = ./bin/chuffed --bound {bound} {problem}
//! check = true
//! trusted_completion = true
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use ini::Ini;

use portfolio_core::executor::SolverSpec;

#[derive(Debug, Default)]
pub struct Settings {
    pub timeout: Option<f64>,
    pub cores: Option<usize>,
    pub knn: Option<usize>,
    pub restart_threshold: Option<f64>,
    pub restart_policy: Option<String>,
    pub kb: Option<PathBuf>,
}

#[derive(Debug)]
pub struct Config {
    pub dir: PathBuf,
    pub settings: Settings,
    pub solvers: BTreeMap<String, SolverSpec>,
}

fn parse_bool(value: &str, what: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => bail!("{what}: expected true or false, found `{other}`"),
    }
}

fn parse_value<T: std::str::FromStr>(value: &str, what: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("{what}: cannot parse `{value}`: {e}"))
}

/// A program given as a relative path is looked up next to the config file.
fn resolve_program(program: &str, dir: &Path) -> String {
    let path = Path::new(program);
    if path.is_absolute() {
        return program.to_string();
    }
    let local = dir.join(path);
    if program.contains('/') || local.is_file() {
        local.to_string_lossy().into_owned()
    } else {
        program.to_string()
    }
}

pub fn load(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let dir = path
        .parent()
        .map(Path::to_path_buf)
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| PathBuf::from("."));
    let dir = dir.canonicalize().unwrap_or(dir);
    parse(&text, &dir).with_context(|| format!("bad config {}", path.display()))
}

pub fn parse(text: &str, dir: &Path) -> Result<Config> {
    let ini = Ini::load_from_str(text)?;
    let mut settings = Settings::default();
    let mut solvers = BTreeMap::new();
    for (section, props) in ini.iter() {
        let Some(section) = section else {
            if props.iter().next().is_some() {
                bail!("keys outside of any section");
            }
            continue;
        };
        if section == "portfolio" {
            for (key, value) in props.iter() {
                let what = format!("[portfolio] {key}");
                match key {
                    "timeout" => settings.timeout = Some(parse_value(value, &what)?),
                    "cores" => settings.cores = Some(parse_value(value, &what)?),
                    "knn" => settings.knn = Some(parse_value(value, &what)?),
                    "restart_threshold" => {
                        settings.restart_threshold = Some(parse_value(value, &what)?)
                    }
                    "restart_policy" => settings.restart_policy = Some(value.to_string()),
                    "kb" => settings.kb = Some(dir.join(value)),
                    other => bail!("unknown key `{other}` in [portfolio]"),
                }
            }
            continue;
        }
        let Some(id) = section.strip_prefix("solver ").map(str::trim) else {
            bail!("unknown section [{section}]");
        };
        if id.is_empty() || id.contains(char::is_whitespace) {
            bail!("bad solver id in [{section}]");
        }
        let mut cmd = None;
        let mut check = true;
        let mut trusted = true;
        for (key, value) in props.iter() {
            let what = format!("[{section}] {key}");
            match key {
                "cmd" => cmd = Some(value.to_string()),
                "check" => check = parse_bool(value, &what)?,
                "trusted_completion" => trusted = parse_bool(value, &what)?,
                other => bail!("unknown key `{other}` in [{section}]"),
            }
        }
        let cmd = cmd.ok_or_else(|| anyhow!("[{section}] has no cmd"))?;
        let mut tokens = shell_words::split(&cmd).with_context(|| format!("[{section}] cmd"))?;
        if tokens.is_empty() {
            bail!("[{section}] cmd is empty");
        }
        tokens[0] = resolve_program(&tokens[0], dir);
        let spec = SolverSpec::new(id, tokens, check, trusted)?;
        if solvers.insert(id.to_string(), spec).is_some() {
            bail!("solver `{id}` defined twice");
        }
    }
    if solvers.is_empty() {
        bail!("no [solver <id>] sections");
    }
    Ok(Config {
        dir: dir.to_path_buf(),
        settings,
        solvers,
    })
}
