//! Spool-directory watching: the file-based way improvement events reach a
//! watchdog. Writers drop `*.dmdl` files into `<spool>/inbox`; the watcher
//! polls, consumes a file only once its size has been stable across two
//! polls, and renames it `.sent` (decoded) or `.bad` (rejected).

use std::collections::HashMap;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use silotrain_core::codec::{self, ModelArtifact};

pub const POLL_INTERVAL: Duration = Duration::from_millis(200);

#[derive(Debug, Clone, PartialEq)]
pub struct SpoolEvent {
    pub file_name: String,
    /// Parsed from the `v<version>-e<epoch>.dmdl` naming convention; 0 when
    /// the name says nothing.
    pub epoch_index: usize,
    pub artifact: ModelArtifact,
}

/// The conventional spool file name for an improvement at a given epoch.
pub fn spool_file_name(base_version: u64, epoch_index: usize) -> String {
    format!("v{base_version}-e{epoch_index}.dmdl")
}

fn epoch_from_name(name: &str) -> usize {
    let stem = name.strip_suffix(".dmdl").unwrap_or(name);
    stem.rsplit_once("-e")
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0)
}

#[derive(Debug)]
pub struct SpoolWatcher {
    inbox: PathBuf,
    /// Size seen at the previous poll, per pending file.
    sizes: HashMap<PathBuf, u64>,
    bad_files: u64,
}

impl SpoolWatcher {
    /// Creates `<spool>/inbox` if needed and watches it.
    pub fn new(spool_dir: &Path) -> io::Result<Self> {
        let inbox = spool_dir.join("inbox");
        fs::create_dir_all(&inbox)?;
        Ok(SpoolWatcher {
            inbox,
            sizes: HashMap::new(),
            bad_files: 0,
        })
    }

    pub fn inbox(&self) -> &Path {
        &self.inbox
    }

    pub fn bad_files(&self) -> u64 {
        self.bad_files
    }

    /// One poll pass: consumes every `.dmdl` file whose size matches what the
    /// previous pass saw, and remembers sizes for the rest.
    pub fn poll_once(&mut self) -> io::Result<Vec<SpoolEvent>> {
        let mut events = Vec::new();
        let mut names: Vec<PathBuf> = Vec::new();
        for entry in fs::read_dir(&self.inbox)? {
            let entry = entry?;
            let path = entry.path();
            if entry.file_type()?.is_file() && path.extension().is_some_and(|e| e == "dmdl") {
                names.push(path);
            }
        }
        names.sort();

        for path in names {
            let size = fs::metadata(&path)?.len();
            match self.sizes.get(&path) {
                Some(&seen) if seen == size => {
                    self.sizes.remove(&path);
                    let name = path
                        .file_name()
                        .map(|n| n.to_string_lossy().into_owned())
                        .unwrap_or_default();
                    let bytes = fs::read(&path)?;
                    match codec::decode(&bytes) {
                        Ok(artifact) => {
                            fs::rename(&path, path.with_extension("dmdl.sent"))?;
                            events.push(SpoolEvent {
                                epoch_index: epoch_from_name(&name),
                                file_name: name,
                                artifact,
                            });
                        }
                        Err(_) => {
                            fs::rename(&path, path.with_extension("dmdl.bad"))?;
                            self.bad_files += 1;
                        }
                    }
                }
                _ => {
                    self.sizes.insert(path, size);
                }
            }
        }
        Ok(events)
    }

    /// Polls until `stop` says so, sleeping `interval` between passes.
    pub fn watch(
        &mut self,
        interval: Duration,
        mut stop: impl FnMut() -> bool,
        mut on_event: impl FnMut(SpoolEvent),
    ) -> io::Result<()> {
        loop {
            for event in self.poll_once()? {
                on_event(event);
            }
            if stop() {
                return Ok(());
            }
            std::thread::sleep(interval);
        }
    }
}

/// Drops an artifact into the inbox under the conventional name.
pub fn write_spool_file(
    inbox: &Path,
    artifact: &ModelArtifact,
    epoch_index: usize,
) -> io::Result<PathBuf> {
    let path = inbox.join(spool_file_name(
        artifact.metadata.model_version,
        epoch_index,
    ));
    fs::write(&path, codec::encode(artifact))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use silotrain_core::codec::ModelMetadata;
    use silotrain_core::nn::arch::NetworkArchitecture;
    use silotrain_core::nn::init_random;

    fn artifact(version: u64) -> ModelArtifact {
        let arch = NetworkArchitecture::for_depth(1).unwrap();
        let params = init_random(&arch, version);
        ModelArtifact::new(
            arch,
            params,
            ModelMetadata {
                model_version: version,
                origin_node: "spool-test".into(),
                metric_accuracy: 0.5,
                metric_loss: 0.7,
            },
        )
        .unwrap()
    }

    fn dmdl_files(inbox: &Path) -> usize {
        fs::read_dir(inbox)
            .unwrap()
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .path()
                    .extension()
                    .is_some_and(|x| x == "dmdl")
            })
            .count()
    }

    #[test]
    fn consumes_on_the_second_stable_poll() {
        let dir = tempfile::tempdir().unwrap();
        let mut watcher = SpoolWatcher::new(dir.path()).unwrap();
        let a = artifact(3);
        let path = write_spool_file(watcher.inbox(), &a, 7).unwrap();
        assert_eq!(path.file_name().unwrap(), "v3-e7.dmdl");

        assert!(watcher.poll_once().unwrap().is_empty(), "first sighting only records size");
        let events = watcher.poll_once().unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].epoch_index, 7);
        assert_eq!(events[0].artifact, a);
        assert_eq!(dmdl_files(watcher.inbox()), 0);
        assert!(watcher.inbox().join("v3-e7.dmdl.sent").exists());
        assert!(watcher.poll_once().unwrap().is_empty(), "consumed files stay consumed");
    }

    #[test]
    fn a_growing_file_is_left_alone_until_it_settles() {
        let dir = tempfile::tempdir().unwrap();
        let mut watcher = SpoolWatcher::new(dir.path()).unwrap();
        let bytes = codec::encode(&artifact(1));
        let path = watcher.inbox().join("v1-e2.dmdl");
        let head = &bytes[..bytes.len() / 2];

        fs::write(&path, head).unwrap();
        assert!(watcher.poll_once().unwrap().is_empty());
        fs::write(&path, &bytes).unwrap();
        assert!(watcher.poll_once().unwrap().is_empty(), "size changed between polls");
        let events = watcher.poll_once().unwrap();
        assert_eq!(events.len(), 1, "settled file is consumed");
    }

    #[test]
    fn garbage_is_quarantined_not_emitted() {
        let dir = tempfile::tempdir().unwrap();
        let mut watcher = SpoolWatcher::new(dir.path()).unwrap();
        fs::write(watcher.inbox().join("junk.dmdl"), b"not a model").unwrap();

        assert!(watcher.poll_once().unwrap().is_empty());
        assert!(watcher.poll_once().unwrap().is_empty());
        assert_eq!(watcher.bad_files(), 1);
        assert!(watcher.inbox().join("junk.dmdl.bad").exists());
        assert_eq!(dmdl_files(watcher.inbox()), 0);
    }

    #[test]
    fn duplicate_content_under_two_names_is_two_events() {
        let dir = tempfile::tempdir().unwrap();
        let mut watcher = SpoolWatcher::new(dir.path()).unwrap();
        let bytes = codec::encode(&artifact(2));
        fs::write(watcher.inbox().join("v2-e1.dmdl"), &bytes).unwrap();
        fs::write(watcher.inbox().join("copy.dmdl"), &bytes).unwrap();

        watcher.poll_once().unwrap();
        let events = watcher.poll_once().unwrap();
        assert_eq!(events.len(), 2, "dedup belongs to the watchdog, not the spool");
        assert_eq!(events[0].epoch_index, 0, "no epoch in the name");
        assert_eq!(events[1].epoch_index, 1);
    }

    #[test]
    fn ignores_files_that_are_not_models() {
        let dir = tempfile::tempdir().unwrap();
        let mut watcher = SpoolWatcher::new(dir.path()).unwrap();
        fs::write(watcher.inbox().join("README.txt"), b"hello").unwrap();
        assert!(watcher.poll_once().unwrap().is_empty());
        assert!(watcher.poll_once().unwrap().is_empty());
        assert_eq!(watcher.bad_files(), 0);
    }
}
