//! Files under the data directory: `trials/<id>.jsonl` event logs and
//! `simulations/<id>.json` job snapshots.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("trials"))?;
        fs::create_dir_all(root.join("simulations"))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn trial_log(&self, id: &str) -> PathBuf {
        self.root.join("trials").join(format!("{id}.jsonl"))
    }

    pub fn job_file(&self, id: &str) -> PathBuf {
        self.root.join("simulations").join(format!("{id}.json"))
    }

    /// Appends one JSON line in a single write and syncs it to disk.
    pub fn append<T: Serialize>(&self, id: &str, event: &T) -> io::Result<()> {
        let mut line = serde_json::to_vec(event)?;
        line.push(b'\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.trial_log(id))?;
        f.write_all(&line)?;
        f.sync_data()
    }

    /// Events of one log. A trailing line without a newline is an
    /// interrupted append and is dropped.
    pub fn read_log<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
        let text = fs::read_to_string(path)?;
        let complete = match text.rfind('\n') {
            Some(i) => &text[..=i],
            None => "",
        };
        complete
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| {
                    io::Error::new(
                        io::ErrorKind::InvalidData,
                        format!("{} line {}: {e}", path.display(), i + 1),
                    )
                })
            })
            .collect()
    }

    pub fn trial_logs(&self) -> io::Result<Vec<PathBuf>> {
        list(&self.root.join("trials"), "jsonl")
    }

    pub fn job_files(&self) -> io::Result<Vec<PathBuf>> {
        list(&self.root.join("simulations"), "json")
    }

    /// Writes through a temporary file and renames it into place.
    pub fn write_job<T: Serialize>(&self, id: &str, job: &T) -> io::Result<()> {
        let path = self.job_file(id);
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, job)?;
            f.sync_data()?;
        }
        fs::rename(tmp, path)
    }

    pub fn read_job<T: DeserializeOwned>(path: &Path) -> io::Result<T> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn list(dir: &Path, ext: &str) -> io::Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == ext))
        .collect();
    out.sort();
    Ok(out)
}
