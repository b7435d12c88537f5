//! Isolated execution of model-written code.
//!
//! Each call gets a fresh scratch directory, its own process group, a
//! cleared environment and rlimits for address space and file size. The
//! group is killed at the wall-time limit. Network isolation uses a new
//! network namespace when the kernel allows one and is otherwise skipped.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Read};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ArtifactRef, MediaKind};

/// Appended to a stream cut at `max_output`.
pub const TRUNCATION_SENTINEL: &str = "\n[output truncated]\n";

/// Allowance past `wall_time` for killing the process tree and collecting
/// its output.
pub const GRACE: Duration = Duration::from_secs(2);

const POLL: Duration = Duration::from_millis(10);
const DEFAULT_PATH: &str = "/usr/local/bin:/usr/bin:/bin";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxLimits {
    /// Seconds.
    pub wall_time: f64,
    /// Address-space limit in bytes.
    pub memory: u64,
    /// Per-stream capture limit in bytes, sentinel included.
    pub max_output: usize,
    /// Largest file the program may write, in bytes.
    pub workdir_quota: u64,
    pub network: bool,
}

impl Default for SandboxLimits {
    fn default() -> Self {
        Self {
            wall_time: 30.0,
            memory: 512 * 1024 * 1024,
            max_output: 256 * 1024,
            workdir_quota: 64 * 1024 * 1024,
            network: false,
        }
    }
}

impl SandboxLimits {
    pub fn validate(&self) -> Result<(), SandboxError> {
        if !(self.wall_time > 0.0 && self.wall_time.is_finite()) {
            return Err(SandboxError::Config("wall_time must be positive".into()));
        }
        if self.memory == 0 || self.workdir_quota == 0 {
            return Err(SandboxError::Config("memory and workdir_quota must be positive".into()));
        }
        if self.max_output <= TRUNCATION_SENTINEL.len() {
            return Err(SandboxError::Config(format!(
                "max_output must exceed {} bytes",
                TRUNCATION_SENTINEL.len()
            )));
        }
        Ok(())
    }
}

/// Interpreter command line; `{file}` is replaced by the script path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuntimeCommand {
    pub program: String,
    #[serde(default)]
    pub args: Vec<String>,
}

impl Default for RuntimeCommand {
    fn default() -> Self {
        Self {
            program: "python3".into(),
            args: vec!["{file}".into()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxConfig {
    pub runtime: RuntimeCommand,
    pub script_name: String,
    pub limits: SandboxLimits,
    /// Parent of the per-execution scratch directories; system temp if unset.
    pub workdir_root: Option<PathBuf>,
    /// Added to the child's otherwise empty environment.
    pub env: BTreeMap<String, String>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        let env = [
            ("MPLBACKEND", "Agg"),
            ("PYTHONDONTWRITEBYTECODE", "1"),
            ("PYTHONIOENCODING", "utf-8"),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        Self {
            runtime: RuntimeCommand::default(),
            script_name: "main.py".into(),
            limits: SandboxLimits::default(),
            workdir_root: None,
            env,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub exit_ok: bool,
    /// `None` when the process was ended by a signal.
    pub exit_code: Option<i32>,
    pub stdout: String,
    pub stderr: String,
    /// Seconds.
    pub duration: f64,
    pub artifacts: Vec<ArtifactRef>,
    pub timed_out: bool,
}

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("runtime `{0}` not found")]
    RuntimeMissing(String),
    #[error("sandbox configuration: {0}")]
    Config(String),
    #[error("sandbox i/o: {0}")]
    Io(#[from] io::Error),
}

/// Shared capture buffer: keeps the first `keep` bytes, drains the rest.
#[derive(Default)]
struct Capture {
    bytes: Vec<u8>,
    truncated: bool,
}

fn drain(mut reader: impl Read + Send + 'static, keep: usize) -> Arc<Mutex<Capture>> {
    let capture = Arc::new(Mutex::new(Capture::default()));
    let sink = Arc::clone(&capture);
    thread::spawn(move || {
        let mut buf = [0u8; 8192];
        loop {
            match reader.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let mut c = sink.lock().unwrap_or_else(|e| e.into_inner());
                    let room = keep.saturating_sub(c.bytes.len());
                    c.bytes.extend_from_slice(&buf[..n.min(room)]);
                    c.truncated |= n > room;
                }
            }
        }
    });
    capture
}

fn finish_capture(capture: &Mutex<Capture>, max_output: usize) -> String {
    let c = capture.lock().unwrap_or_else(|e| e.into_inner());
    let keep = max_output - TRUNCATION_SENTINEL.len();
    let mut text = String::from_utf8_lossy(&c.bytes).into_owned();
    let mut truncated = c.truncated;
    if text.len() > keep {
        let mut cut = keep;
        while !text.is_char_boundary(cut) {
            cut -= 1;
        }
        text.truncate(cut);
        truncated = true;
    }
    if truncated {
        text.push_str(TRUNCATION_SENTINEL);
    }
    text
}

fn set_limit(resource: libc::__rlimit_resource_t, value: u64) {
    let lim = libc::rlimit {
        rlim_cur: value as libc::rlim_t,
        rlim_max: value as libc::rlim_t,
    };
    // SAFETY: setrlimit is async-signal-safe and only reads `lim`.
    unsafe {
        libc::setrlimit(resource, &lim);
    }
}

/// Moves the child into a fresh network namespace. Failures are ignored.
fn isolate_network(uid_map: &[u8]) {
    // SAFETY: unshare/open/write/close are async-signal-safe; the buffers
    // were allocated before fork.
    unsafe {
        if libc::unshare(libc::CLONE_NEWNET) == 0 {
            return;
        }
        if libc::unshare(libc::CLONE_NEWUSER | libc::CLONE_NEWNET) == 0 {
            let fd = libc::open(c"/proc/self/uid_map".as_ptr(), libc::O_WRONLY);
            if fd >= 0 {
                libc::write(fd, uid_map.as_ptr().cast(), uid_map.len());
                libc::close(fd);
            }
        }
    }
}

fn kill_group(pgid: u32) {
    // SAFETY: sending a signal has no memory-safety preconditions.
    unsafe {
        libc::killpg(pgid as libc::pid_t, libc::SIGKILL);
    }
}

/// Runs `code` with the configured runtime.
pub fn execute(code: &str, config: &SandboxConfig) -> Result<ExecutionResult, SandboxError> {
    execute_with_artifacts(code, config, None)
}

/// Runs `code` and, when `dest` is given, copies the produced artifacts
/// into it before the scratch directory is removed.
pub fn execute_with_artifacts(
    code: &str,
    config: &SandboxConfig,
    dest: Option<&Path>,
) -> Result<ExecutionResult, SandboxError> {
    let limits = &config.limits;
    limits.validate()?;
    let scratch = match &config.workdir_root {
        Some(root) => {
            fs::create_dir_all(root)?;
            tempfile::Builder::new().prefix("finagent-").tempdir_in(root)?
        }
        None => tempfile::Builder::new().prefix("finagent-").tempdir()?,
    };
    let script = scratch.path().join(&config.script_name);
    fs::write(&script, code)?;
    let workdir = scratch.path().join("work");
    fs::create_dir(&workdir)?;

    let file = script.to_string_lossy();
    let mut command = Command::new(&config.runtime.program);
    command
        .args(config.runtime.args.iter().map(|a| a.replace("{file}", &file)))
        .current_dir(&workdir)
        .env_clear()
        .env("PATH", std::env::var("PATH").unwrap_or_else(|_| DEFAULT_PATH.into()))
        .env("HOME", &workdir)
        .env("LANG", "C.UTF-8")
        .envs(&config.env)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0);

    let memory = limits.memory;
    let quota = limits.workdir_quota;
    let network = limits.network;
    // SAFETY: getuid cannot fail.
    let uid = unsafe { libc::getuid() };
    let uid_map = format!("{uid} {uid} 1").into_bytes();
    // SAFETY: the closure only makes async-signal-safe calls.
    unsafe {
        command.pre_exec(move || {
            set_limit(libc::RLIMIT_AS, memory);
            set_limit(libc::RLIMIT_FSIZE, quota);
            set_limit(libc::RLIMIT_CORE, 0);
            if !network {
                isolate_network(&uid_map);
            }
            Ok(())
        });
    }

    let started = Instant::now();
    let mut child = command.spawn().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => SandboxError::RuntimeMissing(config.runtime.program.clone()),
        _ => SandboxError::Io(e),
    })?;
    let pgid = child.id();
    let keep = limits.max_output - TRUNCATION_SENTINEL.len();
    let stdout = drain(child.stdout.take().expect("stdout is piped"), keep);
    let stderr = drain(child.stderr.take().expect("stderr is piped"), keep);

    let wall = Duration::from_secs_f64(limits.wall_time);
    let mut timed_out = false;
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() >= wall {
            timed_out = true;
            kill_group(pgid);
            break child.wait()?;
        }
        thread::sleep(POLL);
    };
    // Stragglers left in the group would hold the pipes open.
    kill_group(pgid);
    let duration = started.elapsed().as_secs_f64();
    let settle = Instant::now();
    while Arc::strong_count(&stdout) + Arc::strong_count(&stderr) > 2 && settle.elapsed() < GRACE / 4 {
        thread::sleep(POLL);
    }

    let mut stderr_text = finish_capture(&stderr, limits.max_output);
    let mut warnings = String::new();
    let artifacts = collect_artifacts_into(&workdir, &mut warnings);
    if let Some(dest) = dest {
        copy_artifacts(&workdir, &artifacts, dest, &mut warnings);
    }
    if !warnings.is_empty() {
        stderr_text = append_bounded(stderr_text, &warnings, limits.max_output);
    }
    Ok(ExecutionResult {
        exit_ok: !timed_out && status.success(),
        exit_code: status.code(),
        stdout: finish_capture(&stdout, limits.max_output),
        stderr: stderr_text,
        duration,
        artifacts,
        timed_out,
    })
}

fn append_bounded(mut text: String, extra: &str, max: usize) -> String {
    if text.len() + extra.len() <= max {
        text.push_str(extra);
    }
    text
}

/// Every regular file under `workdir`, by relative path in lexicographic
/// order. Unreadable files are skipped.
pub fn collect_artifacts(workdir: &Path) -> Vec<ArtifactRef> {
    collect_artifacts_into(workdir, &mut String::new())
}

fn collect_artifacts_into(workdir: &Path, warnings: &mut String) -> Vec<ArtifactRef> {
    let mut out = Vec::new();
    walk(workdir, workdir, &mut out, warnings);
    out.sort_by(|a, b| a.name.cmp(&b.name));
    out
}

fn walk(root: &Path, dir: &Path, out: &mut Vec<ArtifactRef>, warnings: &mut String) {
    let entries = match fs::read_dir(dir) {
        Ok(entries) => entries,
        Err(e) => {
            warnings.push_str(&format!("[sandbox] skipped {}: {e}\n", dir.display()));
            return;
        }
    };
    for entry in entries.flatten() {
        let path = entry.path();
        let Ok(meta) = fs::symlink_metadata(&path) else {
            continue;
        };
        let name = path
            .strip_prefix(root)
            .unwrap_or(&path)
            .to_string_lossy()
            .into_owned();
        if meta.is_dir() {
            walk(root, &path, out, warnings);
        } else if meta.is_file() {
            match fs::File::open(&path) {
                Ok(_) => out.push(ArtifactRef {
                    media_kind: MediaKind::from_file_name(&name),
                    name,
                    byte_size: meta.len(),
                }),
                Err(e) => warnings.push_str(&format!("[sandbox] skipped artifact {name}: {e}\n")),
            }
        }
    }
}

fn copy_artifacts(workdir: &Path, artifacts: &[ArtifactRef], dest: &Path, warnings: &mut String) {
    for a in artifacts {
        let target = dest.join(&a.name);
        let copied = target
            .parent()
            .map_or(Ok(()), fs::create_dir_all)
            .and_then(|_| fs::copy(workdir.join(&a.name), &target));
        if let Err(e) = copied {
            warnings.push_str(&format!("[sandbox] could not copy artifact {}: {e}\n", a.name));
        }
    }
}
