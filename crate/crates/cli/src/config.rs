//! `--config FILE` support: TOML keys become long flags placed ahead of the
//! command-line ones, so explicit flags override the file.

use std::ffi::OsString;
use std::path::PathBuf;

use toml::Value;

use crate::error::CliError;

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

fn scalar(key: &str, v: &Value) -> Result<String, CliError> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Integer(i) => Ok(i.to_string()),
        Value::Float(f) => Ok(f.to_string()),
        _ => Err(CliError::input(format!("config key `{key}`: unsupported value {v}"))),
    }
}

fn flags(table: &toml::Table) -> Result<Vec<OsString>, CliError> {
    let mut out = Vec::new();
    for (key, v) in table {
        if key == "config" {
            continue;
        }
        let flag = format!("--{}", key.replace('_', "-"));
        match v {
            Value::Boolean(true) => out.push(flag.into()),
            Value::Boolean(false) => {}
            Value::Array(items) => {
                let parts = items.iter().map(|x| scalar(key, x)).collect::<Result<Vec<_>, _>>()?;
                out.push(format!("{flag}={}", parts.join(",")).into());
            }
            other => out.push(format!("{flag}={}", scalar(key, other)?).into()),
        }
    }
    Ok(out)
}

/// `args` with the config file's flags spliced in after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, CliError> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    if args.len() < 2 {
        return Ok(args);
    }
    let text = std::fs::read_to_string(&path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut out = args[..2].to_vec();
    out.extend(flags(&table)?);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_become_flags() {
        let t: toml::Table = toml::from_str("n_boot = 400\ngreat_circle = true\ncovariates = [\"a\", \"b\"]\nalpha = 0.1")
            .unwrap();
        let f: Vec<String> = flags(&t).unwrap().into_iter().map(|s| s.into_string().unwrap()).collect();
        assert!(f.contains(&"--n-boot=400".to_string()));
        assert!(f.contains(&"--covariates=a,b".to_string()));
        assert!(f.contains(&"--alpha=0.1".to_string()));
        assert!(f.contains(&"--great-circle".to_string()));
    }

    #[test]
    fn finds_config_in_either_form() {
        let a: Vec<OsString> = ["x", "solve", "--config", "c.toml"].iter().map(Into::into).collect();
        assert_eq!(config_path(&a), Some(PathBuf::from("c.toml")));
        let b: Vec<OsString> = ["x", "solve", "--config=d.toml"].iter().map(Into::into).collect();
        assert_eq!(config_path(&b), Some(PathBuf::from("d.toml")));
    }
}
