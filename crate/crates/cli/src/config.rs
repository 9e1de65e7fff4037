//! Flat `key = value` config files. Entries become flags inserted right
//! after the subcommand, so flags given on the command line win.

use std::ffi::OsString;
use std::path::Path;

const SUBCOMMANDS: &[&str] = &["run", "check", "ode", "sample"];

fn parse(text: &str, origin: &Path) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key = value, got `{line}`", origin.display(), n + 1))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("{}:{}: invalid key `{key}`", origin.display(), n + 1));
        }
        out.push(format!("--{key}").into());
        out.push(value.trim().into());
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Result<Option<(usize, usize, OsString)>, String> {
    for (i, a) in args.iter().enumerate() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            let v = args.get(i + 1).ok_or("--config needs a path")?;
            return Ok(Some((i, 2, v.clone())));
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Ok(Some((i, 1, v.into())));
        }
    }
    Ok(None)
}

/// Removes `--config PATH` from `args` and splices the file's entries in
/// after the subcommand name.
pub fn expand(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let Some((at, width, path)) = config_path(&args)? else {
        return Ok(args);
    };
    args.drain(at..at + width);
    let path = Path::new(&path);
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let flags = parse(&text, path)?;
    let sub = args.iter().position(|a| SUBCOMMANDS.iter().any(|s| a == s)).ok_or("--config needs a subcommand")?;
    args.splice(sub + 1..sub + 1, flags);
    Ok(args)
}
