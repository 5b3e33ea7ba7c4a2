//! Line-delimited JSON bridge to a classifier running as a child process.
//!
//! One request object per line on the child's stdin, one reply per line on
//! its stdout, strictly in order. A reply carrying an `"error"` key is a
//! failure of that request.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde_json::{json, Value};

use super::{
    new_classifier, restore, Classifier, ClassifierSpec, ConvergencePolicy, ModelKind, ModelState,
    Prediction, TrainReport,
};
use crate::corpus::{Dataset, FunctionSample};
use crate::error::{Error, Result};

pub struct ExternalClassifier {
    spec: ClassifierSpec,
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    capabilities: Vec<String>,
}

impl std::fmt::Debug for ExternalClassifier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalClassifier")
            .field("spec", &self.spec)
            .field("capabilities", &self.capabilities)
            .finish()
    }
}

fn samples_json(data: &Dataset) -> Value {
    Value::Array(
        data.iter()
            .map(|s| json!({"id": s.id, "code": s.code, "label": s.label}))
            .collect(),
    )
}

fn losses_from(reply: &Value) -> Result<Vec<f64>> {
    reply
        .get("epoch_losses")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Bridge("reply lacks epoch_losses".into()))?
        .iter()
        .map(|v| {
            v.as_f64()
                .ok_or_else(|| Error::Bridge(format!("non-numeric loss {v}")))
        })
        .collect()
}

impl ExternalClassifier {
    /// Spawns the configured command and performs the handshake.
    pub fn launch(spec: ClassifierSpec) -> Result<Self> {
        let ModelKind::External { command } = &spec.kind else {
            return Err(Error::Config("not an external classifier spec".into()));
        };
        let (program, args) = command
            .split_first()
            .ok_or_else(|| Error::Config("external classifier command is empty".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Bridge(format!("failed to launch {program:?}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut c = ExternalClassifier {
            spec,
            child,
            stdin,
            stdout,
            capabilities: Vec::new(),
        };
        let reply = c.request(json!({"cmd": "handshake", "seed": c.spec.seed}))?;
        if reply.get("ok") != Some(&Value::Bool(true)) {
            return Err(Error::Bridge(format!("handshake refused: {reply}")));
        }
        c.capabilities = reply
            .get("capabilities")
            .and_then(Value::as_array)
            .map(|a| {
                a.iter()
                    .filter_map(|v| v.as_str().map(String::from))
                    .collect()
            })
            .unwrap_or_default();
        Ok(c)
    }

    pub fn capabilities(&self) -> &[String] {
        &self.capabilities
    }

    fn has(&self, cap: &str) -> bool {
        self.capabilities.iter().any(|c| c == cap)
    }

    fn request(&mut self, msg: Value) -> Result<Value> {
        let io = |e: std::io::Error| Error::Bridge(format!("pipe error: {e}"));
        writeln!(self.stdin, "{msg}").map_err(io)?;
        self.stdin.flush().map_err(io)?;
        let mut line = String::new();
        if self.stdout.read_line(&mut line).map_err(io)? == 0 {
            return Err(Error::Bridge("child closed its output".into()));
        }
        let reply: Value = serde_json::from_str(line.trim())
            .map_err(|e| Error::Bridge(format!("malformed reply {line:?}: {e}")))?;
        if let Some(err) = reply.get("error") {
            return Err(Error::Bridge(match err {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }));
        }
        Ok(reply)
    }

    pub fn restore(&mut self, state: &str) -> Result<()> {
        if !self.has("snapshot") {
            return Err(Error::Unsupported("restore".into()));
        }
        self.request(json!({"cmd": "restore", "state": state}))?;
        Ok(())
    }
}

impl Drop for ExternalClassifier {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Classifier for ExternalClassifier {
    fn spec(&self) -> &ClassifierSpec {
        &self.spec
    }

    fn train(
        &mut self,
        data: &Dataset,
        max_epochs: usize,
        policy: &ConvergencePolicy,
    ) -> Result<TrainReport> {
        let reply = self.request(json!({
            "cmd": "train",
            "samples": samples_json(data),
            "max_epochs": max_epochs,
            "epsilon": policy.epsilon,
        }))?;
        let losses = losses_from(&reply)?;
        if losses.is_empty() || losses.len() > max_epochs {
            return Err(Error::Bridge(format!(
                "train reported {} epochs for max_epochs {max_epochs}",
                losses.len()
            )));
        }
        Ok(TrainReport {
            epochs_run: losses.len(),
            converged: policy.converged(&losses),
            epoch_losses: losses,
        })
    }

    fn fine_tune(&mut self, data: &Dataset, epochs: usize) -> Result<TrainReport> {
        if epochs == 0 || data.is_empty() {
            return Ok(TrainReport::empty());
        }
        let reply = self.request(json!({
            "cmd": "fine_tune",
            "samples": samples_json(data),
            "epochs": epochs,
        }))?;
        let losses = losses_from(&reply)?;
        Ok(TrainReport {
            epochs_run: losses.len(),
            converged: false,
            epoch_losses: losses,
        })
    }

    fn predict(&mut self, sample: &FunctionSample) -> Result<Prediction> {
        let reply = self.request(json!({"cmd": "predict", "code": sample.code}))?;
        match reply.get("p").and_then(Value::as_f64) {
            Some(p) if (0.0..=1.0).contains(&p) => Ok(Prediction::from_probability(p)),
            _ => Err(Error::Bridge(format!("invalid probability in {reply}"))),
        }
    }

    fn snapshot(&mut self) -> Result<ModelState> {
        if !self.has("snapshot") {
            return Err(Error::Unsupported("snapshot".into()));
        }
        let reply = self.request(json!({"cmd": "snapshot"}))?;
        let state = reply
            .get("state")
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Bridge("snapshot reply lacks state".into()))?;
        Ok(ModelState::External {
            spec: self.spec.clone(),
            state: state.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServeOptions {
    /// Advertise and honour snapshot/restore.
    pub snapshot: bool,
}

impl Default for ServeOptions {
    fn default() -> Self {
        ServeOptions { snapshot: true }
    }
}

fn parse_samples(msg: &Value) -> Result<Dataset> {
    let samples: Vec<FunctionSample> = serde_json::from_value(
        msg.get("samples")
            .cloned()
            .unwrap_or(Value::Array(Vec::new())),
    )
    .map_err(|e| Error::Bridge(format!("bad samples: {e}")))?;
    Dataset::new("bridge", samples)
}

fn handle(
    model: &mut Box<dyn Classifier>,
    spec: &ClassifierSpec,
    opts: ServeOptions,
    msg: &Value,
) -> Result<Value> {
    let usize_field = |key: &str| {
        msg.get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| Error::Bridge(format!("missing {key}")))
    };
    match msg.get("cmd").and_then(Value::as_str) {
        Some("handshake") => {
            // the client's seed wins so bridged runs match in-process ones
            if let Some(seed) = msg.get("seed").and_then(Value::as_u64) {
                *model = new_classifier(&spec.with_seed(seed))?;
            }
            let caps: Vec<&str> = if opts.snapshot {
                vec!["snapshot"]
            } else {
                vec![]
            };
            Ok(json!({"ok": true, "capabilities": caps}))
        }
        Some("train") => {
            let data = parse_samples(msg)?;
            let policy = ConvergencePolicy {
                epsilon: msg
                    .get("epsilon")
                    .and_then(Value::as_f64)
                    .unwrap_or(ConvergencePolicy::default().epsilon),
            };
            let r = model.train(&data, usize_field("max_epochs")?, &policy)?;
            Ok(json!({"epoch_losses": r.epoch_losses}))
        }
        Some("fine_tune") => {
            let data = parse_samples(msg)?;
            let r = model.fine_tune(&data, usize_field("epochs")?)?;
            Ok(json!({"epoch_losses": r.epoch_losses}))
        }
        Some("predict") => {
            let code = msg.get("code").and_then(Value::as_str).unwrap_or_default();
            let p = model.predict(&FunctionSample::new("q", code, 0))?;
            Ok(json!({"p": p.probability}))
        }
        Some("snapshot") if opts.snapshot => {
            let state =
                serde_json::to_vec(&model.snapshot()?).map_err(|e| Error::Bridge(e.to_string()))?;
            Ok(json!({"state": B64.encode(state)}))
        }
        Some("restore") if opts.snapshot => {
            let raw = msg.get("state").and_then(Value::as_str).unwrap_or_default();
            let bytes = B64
                .decode(raw)
                .map_err(|e| Error::Bridge(format!("bad state encoding: {e}")))?;
            let state: ModelState =
                serde_json::from_slice(&bytes).map_err(|e| Error::Bridge(e.to_string()))?;
            *model = restore(&state)?;
            Ok(json!({"ok": true}))
        }
        other => Err(Error::Bridge(format!("unsupported command {other:?}"))),
    }
}

/// Serves an in-process classifier over the bridge protocol until `input`
/// reaches end of file. Request failures are reported to the peer and do
/// not stop the loop.
pub fn serve(
    spec: &ClassifierSpec,
    opts: ServeOptions,
    input: impl BufRead,
    mut output: impl Write,
) -> Result<()> {
    let mut model = new_classifier(spec)?;
    let io = |e: std::io::Error| Error::Bridge(format!("pipe error: {e}"));
    for line in input.lines() {
        let line = line.map_err(io)?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match serde_json::from_str::<Value>(&line) {
            Ok(msg) => handle(&mut model, spec, opts, &msg)
                .unwrap_or_else(|e| json!({"error": e.to_string()})),
            Err(e) => json!({"error": format!("malformed request: {e}")}),
        };
        writeln!(output, "{reply}").map_err(io)?;
        output.flush().map_err(io)?;
    }
    Ok(())
}
