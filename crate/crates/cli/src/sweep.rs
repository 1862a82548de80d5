//! Parallel grid evaluation with ordered results, periodic checkpoints and
//! resume.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::CliError;
use crate::output::{Row, TableSpec};

/// Rows a grid point contributes to each table, in table order.
pub type PointRows = Vec<Vec<Row>>;

pub trait Job: Sync {
    /// Tables filled point by point.
    fn tables(&self) -> Vec<TableSpec>;
    fn n_points(&self) -> usize;
    /// Workers are stateless: the result may depend only on the index.
    fn point(&self, i: usize) -> Result<PointRows, String>;
    /// Short coordinates of a point for the holes table.
    fn describe(&self, i: usize) -> String;
    /// Tables derived from the completed sweep.
    fn finalize(&self, _results: &[Result<PointRows, String>]) -> Vec<(TableSpec, Vec<Row>)> {
        Vec::new()
    }
    fn summary(&self, _results: &[Result<PointRows, String>]) -> serde_json::Value {
        serde_json::Value::Null
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointState {
    config_hash: String,
    done: usize,
    total: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Record {
    index: usize,
    result: Result<PointRows, String>,
}

pub struct SweepOptions {
    pub checkpoint_every: usize,
    pub resume: bool,
    /// Stop cooperatively once at least this many points are done.
    pub stop_after: Option<usize>,
}

pub fn checkpoint_dir(out: &Path) -> PathBuf {
    out.join(".checkpoint")
}

/// Evaluates every point in index order of output. Work is split into
/// chunks of `checkpoint_every`; each finished chunk is appended to the
/// checkpoint before the next starts.
pub fn run(
    job: &dyn Job,
    out: &Path,
    config_hash: &str,
    opts: &SweepOptions,
    cancel: &AtomicBool,
) -> Result<Vec<Result<PointRows, String>>, CliError> {
    let total = job.n_points();
    let dir = checkpoint_dir(out);
    let mut results = if opts.resume { load(&dir, config_hash, total)? } else { Vec::new() };
    if !opts.resume || results.is_empty() {
        if dir.exists() {
            fs::remove_dir_all(&dir)?;
        }
        fs::create_dir_all(&dir)?;
        fs::File::create(dir.join("points.jsonl"))?;
        save_state(&dir, config_hash, 0, total)?;
    }
    let mut log = fs::OpenOptions::new().append(true).open(dir.join("points.jsonl"))?;
    while results.len() < total {
        if cancel.load(Ordering::SeqCst) || opts.stop_after.is_some_and(|s| results.len() >= s) {
            return Err(CliError::Interrupted { done: results.len(), total });
        }
        let start = results.len();
        let end = (start + opts.checkpoint_every).min(total);
        let chunk: Vec<Option<Result<PointRows, String>>> = (start..end)
            .into_par_iter()
            .map(|i| if cancel.load(Ordering::SeqCst) { None } else { Some(job.point(i)) })
            .collect();
        // Keep the completed prefix; anything after a cancelled point reruns.
        let done: Vec<_> = chunk.into_iter().map_while(|r| r).collect();
        let mut buf = Vec::new();
        for (k, r) in done.iter().enumerate() {
            serde_json::to_writer(&mut buf, &Record { index: start + k, result: r.clone() }).expect("json");
            buf.push(b'\n');
        }
        log.write_all(&buf)?;
        log.sync_data()?;
        results.extend(done);
        save_state(&dir, config_hash, results.len(), total)?;
    }
    Ok(results)
}

fn save_state(dir: &Path, hash: &str, done: usize, total: usize) -> Result<(), CliError> {
    let s = serde_json::to_vec_pretty(&CheckpointState { config_hash: hash.into(), done, total }).expect("json");
    crate::output::write_atomic(&dir.join("state.json"), &s)?;
    Ok(())
}

/// Completed points of an earlier run with the same config. Records past
/// the last saved state (a crash mid-chunk) are dropped.
fn load(dir: &Path, hash: &str, total: usize) -> Result<Vec<Result<PointRows, String>>, CliError> {
    let Ok(text) = fs::read_to_string(dir.join("state.json")) else {
        return Ok(Vec::new());
    };
    let state: CheckpointState =
        serde_json::from_str(&text).map_err(|e| CliError::Io(format!("unreadable checkpoint state: {e}")))?;
    if state.config_hash != hash || state.total != total {
        return Err(CliError::config("--resume", "checkpoint belongs to a different configuration"));
    }
    let f = fs::File::open(dir.join("points.jsonl"))?;
    let mut out = Vec::with_capacity(state.done);
    for line in BufReader::new(f).lines().take(state.done) {
        let r: Record = serde_json::from_str(&line?).map_err(|e| CliError::Io(format!("corrupt checkpoint: {e}")))?;
        if r.index != out.len() {
            return Err(CliError::Io("checkpoint records out of order".into()));
        }
        out.push(r.result);
    }
    if out.len() != state.done {
        return Err(CliError::Io("checkpoint shorter than its state".into()));
    }
    // Rewrite the log to exactly the accepted prefix.
    let mut buf = Vec::new();
    for (index, r) in out.iter().enumerate() {
        serde_json::to_writer(&mut buf, &Record { index, result: r.clone() }).expect("json");
        buf.push(b'\n');
    }
    crate::output::write_atomic(&dir.join("points.jsonl"), &buf)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::output::nums;

    struct Squares(usize);

    impl Job for Squares {
        fn tables(&self) -> Vec<TableSpec> {
            vec![TableSpec::new("sq", &["i", "sq"])]
        }
        fn n_points(&self) -> usize {
            self.0
        }
        fn point(&self, i: usize) -> Result<PointRows, String> {
            if i % 7 == 3 {
                return Err(format!("bad {i}"));
            }
            Ok(vec![vec![nums(&[i as f64, (i * i) as f64])]])
        }
        fn describe(&self, i: usize) -> String {
            format!("i={i}")
        }
    }

    fn opts(k: usize, resume: bool, stop: Option<usize>) -> SweepOptions {
        SweepOptions { checkpoint_every: k, resume, stop_after: stop }
    }

    #[test]
    fn ordered_and_complete() {
        let d = tempfile::tempdir().unwrap();
        let r = run(&Squares(40), d.path(), "h", &opts(6, false, None), &AtomicBool::new(false)).unwrap();
        assert_eq!(r.len(), 40);
        assert_eq!(r[5].as_ref().unwrap()[0][0][1], "25.0");
        assert!(r[10].is_err());
    }

    #[test]
    fn resume_matches_uninterrupted() {
        let d = tempfile::tempdir().unwrap();
        let full = run(&Squares(40), d.path(), "h", &opts(6, false, None), &AtomicBool::new(false)).unwrap();
        let d2 = tempfile::tempdir().unwrap();
        match run(&Squares(40), d2.path(), "h", &opts(6, false, Some(13)), &AtomicBool::new(false)) {
            Err(CliError::Interrupted { done, .. }) => assert_eq!(done, 18),
            other => panic!("{:?}", other.map(|v| v.len())),
        }
        let resumed = run(&Squares(40), d2.path(), "h", &opts(6, true, None), &AtomicBool::new(false)).unwrap();
        assert_eq!(resumed, full);
    }

    #[test]
    fn foreign_checkpoint_is_refused() {
        let d = tempfile::tempdir().unwrap();
        let _ = run(&Squares(20), d.path(), "h", &opts(4, false, Some(4)), &AtomicBool::new(false));
        assert!(matches!(run(&Squares(20), d.path(), "other", &opts(4, true, None), &AtomicBool::new(false)), Err(CliError::Config { .. })));
    }

    #[test]
    fn torn_log_tail_is_dropped() {
        let d = tempfile::tempdir().unwrap();
        let _ = run(&Squares(20), d.path(), "h", &opts(4, false, Some(8)), &AtomicBool::new(false));
        let log = checkpoint_dir(d.path()).join("points.jsonl");
        let mut f = fs::OpenOptions::new().append(true).open(&log).unwrap();
        f.write_all(b"{\"index\":8,\"resu").unwrap();
        let r = run(&Squares(20), d.path(), "h", &opts(4, true, None), &AtomicBool::new(false)).unwrap();
        assert_eq!(r, run(&Squares(20), tempfile::tempdir().unwrap().path(), "h", &opts(4, false, None), &AtomicBool::new(false)).unwrap());
    }

    #[test]
    fn cancellation_stops_at_a_point_boundary() {
        let d = tempfile::tempdir().unwrap();
        let flag = AtomicBool::new(true);
        assert!(matches!(run(&Squares(10), d.path(), "h", &opts(4, false, None), &flag), Err(CliError::Interrupted { done: 0, .. })));
    }
}
