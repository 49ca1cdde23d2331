use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use super::{GradingError, GradingInvocation, GradingOutcome, RESULT_FILE};
use crate::domain::ArtifactRefs;

const POLL: Duration = Duration::from_millis(10);

/// Runs an external script in a scratch directory holding copies of the
/// three artifacts and nothing else. The environment is cleared apart from
/// `PATH`; argv is `[script, scratch_dir]`. The script must write
/// `result.json` into the scratch directory.
pub(super) fn run(script: &Path, inv: &GradingInvocation) -> Result<GradingOutcome, GradingError> {
    if !script.is_file() {
        return Err(GradingError::ScriptNotFound(script.to_path_buf()));
    }
    let scratch = tempfile::tempdir()?;
    for file in ArtifactRefs::FILES {
        std::fs::copy(inv.artifact_dir.join(file), scratch.path().join(file))?;
    }
    let logs = tempfile::tempdir()?;
    let stderr_path = logs.path().join("stderr");
    let stderr = std::fs::File::create(&stderr_path)?;

    let mut cmd = Command::new(script);
    cmd.arg(scratch.path())
        .current_dir(scratch.path())
        .env_clear()
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(stderr);
    if let Some(path) = std::env::var_os("PATH") {
        cmd.env("PATH", path);
    }
    let mut child = match cmd.spawn() {
        Ok(c) => c,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(GradingError::ScriptNotFound(script.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };

    let deadline = Instant::now() + inv.timeout;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(GradingError::ScriptTimeout(inv.timeout));
        }
        std::thread::sleep(POLL);
    };

    if !status.success() {
        let mut tail = String::new();
        std::fs::File::open(&stderr_path)?
            .take(inv.max_output_bytes as u64)
            .read_to_string(&mut tail)
            .ok();
        return Err(GradingError::ScriptCrashed(format!("{status}: {}", tail.trim())));
    }

    let result_path = scratch.path().join(RESULT_FILE);
    let len = match std::fs::metadata(&result_path) {
        Ok(m) => m.len(),
        Err(_) => return Err(GradingError::ScriptMalformedOutput(format!("no {RESULT_FILE} written"))),
    };
    if len > inv.max_output_bytes as u64 {
        return Err(GradingError::ScriptMalformedOutput(format!(
            "{RESULT_FILE} is {len} bytes, limit {}",
            inv.max_output_bytes
        )));
    }
    let text = std::fs::read_to_string(&result_path)?;
    serde_json::from_str(&text).map_err(|e| GradingError::ScriptMalformedOutput(e.to_string()))
}
