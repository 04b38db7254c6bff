//! `manifest.txt`: the resolved configuration and headline results of a run.

use std::fmt::Display;
use std::path::Path;

use pcae_core::io::write_key_values;

#[derive(Debug, Default)]
pub struct Manifest {
    pairs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("pcae_version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.pairs.push((key.to_string(), value.to_string()));
        self
    }

    /// Floats are written in their shortest round-trip form.
    pub fn set_f64(&mut self, key: &str, value: f64) -> &mut Self {
        self.set(key, format!("{value:?}"))
    }

    pub fn set_list(&mut self, key: &str, values: &[f64]) -> &mut Self {
        let joined = values.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(",");
        self.set(key, joined)
    }

    pub fn write(&self, dir: &Path) -> pcae_core::Result<()> {
        write_key_values(dir.join("manifest.txt"), &self.pairs)
    }
}
