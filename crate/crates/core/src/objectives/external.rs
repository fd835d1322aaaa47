use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveError};
use crate::reparam::HyperConfig;

const POLL: Duration = Duration::from_millis(5);

/// How to run an external training script for one configuration.
///
/// The template is run through `sh -c` after substituting `{lambda_p}`,
/// `{lambda_e}` and `{batch_size}`; the same values are also exported as
/// environment variables. The last non-empty line of stdout is the score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCommandSpec {
    pub template: String,
    #[serde(with = "secs")]
    pub timeout: Duration,
    pub env_names: [String; 3],
}

mod secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

impl ExternalCommandSpec {
    pub fn new(template: &str) -> Result<Self, ObjectiveError> {
        if template.trim().is_empty() {
            return Err(ObjectiveError::Invalid("empty command template".into()));
        }
        Ok(Self {
            template: template.to_string(),
            timeout: Duration::from_secs(24 * 3600),
            env_names: ["LAMBDA_P".into(), "LAMBDA_E".into(), "BATCH_SIZE".into()],
        })
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn render(&self, h: &HyperConfig<f64>) -> String {
        self.template
            .replace("{lambda_p}", &h.lambda_p.to_string())
            .replace("{lambda_e}", &h.lambda_e.to_string())
            .replace("{batch_size}", &round_batch_size(h.batch_size).to_string())
    }
}

/// Nearest even integer, at least 2.
pub fn round_batch_size(b: f64) -> u64 {
    let even = 2.0 * (b / 2.0).round();
    if even.is_finite() && even >= 2.0 {
        even as u64
    } else {
        2
    }
}

/// Runs the command once for `h` and parses its score.
pub fn external_eval(
    spec: &ExternalCommandSpec,
    h: &HyperConfig<f64>,
) -> Result<f64, ObjectiveError> {
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(spec.render(h))
        .env(&spec.env_names[0], h.lambda_p.to_string())
        .env(&spec.env_names[1], h.lambda_e.to_string())
        .env(
            &spec.env_names[2],
            round_batch_size(h.batch_size).to_string(),
        )
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(ObjectiveError::Spawn)?;

    // drain pipes off-thread so a chatty child cannot block on a full buffer
    let mut stdout = child.stdout.take().expect("piped");
    let mut stderr = child.stderr.take().expect("piped");
    let out_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stdout.read_to_string(&mut s);
        s
    });
    let err_reader = std::thread::spawn(move || {
        let mut s = String::new();
        let _ = stderr.read_to_string(&mut s);
        s
    });

    let start = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait().map_err(ObjectiveError::Spawn)? {
            break status;
        }
        if start.elapsed() >= spec.timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(ObjectiveError::TimedOut(spec.timeout));
        }
        std::thread::sleep(POLL);
    };
    let out = out_reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();

    if !status.success() {
        let tail: Vec<&str> = err.lines().rev().take(5).collect();
        return Err(ObjectiveError::CommandFailed {
            status: status.to_string(),
            stderr: tail.into_iter().rev().collect::<Vec<_>>().join("\n"),
        });
    }
    let last = out
        .lines()
        .map(str::trim)
        .rfind(|l| !l.is_empty())
        .unwrap_or("");
    match last.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ObjectiveError::ParseFailed(last.to_string())),
    }
}

/// [`Objective`] over an external command. Runs are serialized unless
/// parallel spawning is enabled.
#[derive(Debug)]
pub struct ExternalObjective {
    spec: ExternalCommandSpec,
    parallel: bool,
    lock: Mutex<()>,
}

impl ExternalObjective {
    pub fn new(spec: ExternalCommandSpec) -> Self {
        Self {
            spec,
            parallel: false,
            lock: Mutex::new(()),
        }
    }

    pub fn parallel(mut self, yes: bool) -> Self {
        self.parallel = yes;
        self
    }

    pub fn spec(&self) -> &ExternalCommandSpec {
        &self.spec
    }
}

impl Objective for ExternalObjective {
    fn evaluate(&self, h: &HyperConfig<f64>) -> Result<f64, ObjectiveError> {
        if self.parallel {
            return external_eval(&self.spec, h);
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        external_eval(&self.spec, h)
    }
}
