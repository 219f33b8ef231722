use std::path::Path;

/// Turns `key=value` lines into `--key value` arguments. Blank lines and
/// lines starting with `#` are skipped; `key=true` becomes a bare `--key`
/// and `key=false` is dropped.
pub fn config_args(text: &str, path: &Path) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected key=value, got `{line}`", path.display(), i + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if key == "config" {
            return Err(format!("{}:{}: nested config files are not supported", path.display(), i + 1));
        }
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

/// Splices the entries of any `--config <file>` right after the subcommand
/// so that explicit flags, which come later, take precedence.
pub fn expand(argv: Vec<String>) -> Result<Vec<String>, String> {
    let pos = argv.iter().position(|a| a == "--config" || a.starts_with("--config="));
    let Some(pos) = pos else { return Ok(argv) };
    let (path, consumed) = match argv[pos].strip_prefix("--config=") {
        Some(p) => (p.to_string(), 1),
        None => match argv.get(pos + 1) {
            Some(p) => (p.clone(), 2),
            None => return Ok(argv),
        },
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let extra = config_args(&text, Path::new(&path))?;
    let mut rest = argv;
    rest.drain(pos..pos + consumed);
    // argv[0] is the program, argv[1] the subcommand.
    let at = rest.len().min(2);
    rest.splice(at..at, extra);
    Ok(rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_become_flags() {
        let args = config_args("# c\nmodel = kelly\n\nmodel-param=piStar=0.6\npercentiles=true\nx=false\n", Path::new("f"))
            .unwrap();
        assert_eq!(args, vec!["--model", "kelly", "--model-param", "piStar=0.6", "--percentiles"]);
        assert!(config_args("oops", Path::new("f")).unwrap_err().contains("f:1"));
    }

    #[test]
    fn file_entries_precede_explicit_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("job.conf");
        std::fs::write(&p, "alpha=0.1\nmodel=kelly\n").unwrap();
        let argv: Vec<String> = ["engine", "warmup", "--alpha", "0.2", "--config", p.to_str().unwrap()]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let out = expand(argv).unwrap();
        assert_eq!(out, vec!["engine", "warmup", "--alpha", "0.1", "--model", "kelly", "--alpha", "0.2"]);
    }
}
