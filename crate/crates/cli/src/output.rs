//! Provenance headers and atomic file output.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Resolved parameters of one invocation, in insertion order.
#[derive(Clone, Debug, Default)]
pub struct Provenance {
    command: String,
    params: Vec<(String, String)>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            params: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// First 16 hex digits of SHA-256 over `command` and the `key=value` lines.
    pub fn config_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.command.as_bytes());
        for (k, v) in &self.params {
            h.update(format!("\n{k}={v}").as_bytes());
        }
        h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    /// One line, without comment markers.
    pub fn line(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "tiwork {} {} config={} {}",
            env!("CARGO_PKG_VERSION"),
            self.command,
            self.config_hash(),
            params.join(" ")
        )
        .trim_end()
        .to_string()
    }

    pub fn hash_comment(&self) -> String {
        format!("# {}\n", self.line())
    }

    pub fn xml_comment(&self) -> String {
        format!("<!-- {} -->\n", self.line().replace("--", "- -"))
    }
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    {
        let mut w = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut w)?;
        w.flush()?;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file()
            .set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Text to `path` atomically, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, |w| Ok(w.write_all(text.as_bytes())?)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_depends_on_params() {
        let a = Provenance::new("campaign").param("seed", 1);
        let b = Provenance::new("campaign").param("seed", 2);
        assert_ne!(a.config_hash(), b.config_hash());
        assert_eq!(a.config_hash(), Provenance::new("campaign").param("seed", 1).config_hash());
        assert!(a.hash_comment().starts_with("# tiwork "));
        assert!(a.line().contains("seed=1"));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        emit(Some(&p), "one").unwrap();
        emit(Some(&p), "two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
    }
}
