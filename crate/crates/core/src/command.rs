//! External command templates (`sh -c` with `{placeholder}` substitution).

use std::process::Command;

#[derive(Debug)]
pub struct CommandFailure {
    pub status: String,
    pub stderr: String,
}

impl std::fmt::Display for CommandFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "exit status {}: {}", self.status, self.stderr.trim())
    }
}

/// Replaces every `{key}` in `template`. Unknown placeholders are left as is.
pub fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), &shell_quote(v));
    }
    out
}

fn shell_quote(s: &str) -> String {
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || "/._-+:=%,".contains(c)) {
        s.to_string()
    } else {
        format!("'{}'", s.replace('\'', "'\\''"))
    }
}

pub fn run(template: &str, vars: &[(&str, &str)]) -> Result<(), CommandFailure> {
    let cmd = render(template, vars);
    log::debug!("running: {cmd}");
    let output = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .output()
        .map_err(|e| CommandFailure { status: "spawn failed".into(), stderr: e.to_string() })?;
    if output.status.success() {
        Ok(())
    } else {
        Err(CommandFailure {
            status: output.status.code().map_or_else(|| "signal".to_string(), |c| c.to_string()),
            stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placeholders_are_quoted() {
        let s = render("decode {input} {out}", &[("input", "a b.mp4"), ("out", "/tmp/x")]);
        assert_eq!(s, "decode 'a b.mp4' /tmp/x");
    }

    #[test]
    fn failure_captures_stderr() {
        let err = run("echo broken >&2; exit 3", &[]).unwrap_err();
        assert_eq!(err.status, "3");
        assert!(err.stderr.contains("broken"));
    }
}
