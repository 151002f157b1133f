use crate::{CliError, Command};
use std::fs;
use std::path::{Path, PathBuf};

/// Output directory of one run: `config.json`, `log.txt` and artifacts.
pub struct RunDir {
    dir: Option<PathBuf>,
    log: Vec<String>,
}

impl RunDir {
    /// Creates the directory (if any) and echoes the resolved command.
    pub fn open(dir: Option<&Path>, command: &Command) -> Result<Self, CliError> {
        if let Some(d) = dir {
            fs::create_dir_all(d)?;
            let config = serde_json::to_string_pretty(command)?;
            fs::write(d.join("config.json"), config + "\n")?;
        }
        Ok(Self { dir: dir.map(Path::to_path_buf), log: Vec::new() })
    }

    pub fn path(&self, name: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(name))
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
        if let Some(p) = self.path(name) {
            fs::write(p, bytes)?;
        }
        Ok(())
    }

    /// Records a line for `log.txt` and echoes it to stderr.
    pub fn log(&mut self, line: impl Into<String>) {
        let line = line.into();
        eprintln!("{line}");
        self.log.push(line);
    }

    pub fn finish(self) -> Result<(), CliError> {
        let mut text = self.log.join("\n");
        text.push('\n');
        self.write("log.txt", text)
    }
}
