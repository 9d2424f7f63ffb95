//! Length-prefixed worker protocol used to reach external extractors and
//! scorers over a child process's stdin/stdout.
//!
//! Every message is an 8-byte little-endian length `N`, `N` bytes of UTF-8
//! JSON header, then the raw `f32` little-endian payloads listed in the
//! header's `payloads` array, in order.
//!
//! ```text
//! -> {"op":"hello","version":1}
//! <- {"ok":true,"ops":["extract"]}
//! -> {"op":"extract","sample_rate":16000,"payloads":[{"name":"input","len":N},{"name":"enrollment","len":M}]} + data
//! <- {"ok":true,"payloads":[{"name":"estimate","len":N}]} + data
//! -> {"op":"score", ...same payloads...}
//! <- {"ok":true,"score":3.2}
//! <- {"ok":false,"error":"..."}
//! ```

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::BackendError;

pub const PROTOCOL_VERSION: u64 = 1;
const MAX_HEADER_BYTES: u64 = 1 << 24;
pub const UNSUPPORTED_OP: &str = "unsupported op";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PayloadSpec {
    pub name: String,
    pub len: usize,
}

/// One decoded message.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub header: Value,
    pub payloads: Vec<(String, Vec<f32>)>,
}

impl Frame {
    pub fn new(header: Value) -> Self {
        Self {
            header,
            payloads: Vec::new(),
        }
    }

    pub fn with_payload(mut self, name: &str, data: Vec<f32>) -> Self {
        self.payloads.push((name.to_string(), data));
        self
    }

    pub fn payload(&self, name: &str) -> Option<&[f32]> {
        self.payloads.iter().find(|(n, _)| n == name).map(|(_, d)| d.as_slice())
    }

    fn ok(&self) -> bool {
        self.header.get("ok").and_then(Value::as_bool).unwrap_or(false)
    }

    fn error_message(&self) -> String {
        self.header
            .get("error")
            .and_then(Value::as_str)
            .unwrap_or("unspecified error")
            .to_string()
    }
}

/// Serializes `frame`. The header's `payloads` array is (re)written from
/// the frame's payload list, so declared and actual lengths always agree.
pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> io::Result<()> {
    let mut header = frame.header.clone();
    if !frame.payloads.is_empty() {
        let specs: Vec<PayloadSpec> = frame
            .payloads
            .iter()
            .map(|(name, data)| PayloadSpec {
                name: name.clone(),
                len: data.len(),
            })
            .collect();
        if let Value::Object(map) = &mut header {
            map.insert("payloads".into(), serde_json::to_value(specs)?);
        }
    }
    let bytes = serde_json::to_vec(&header)?;
    w.write_all(&(bytes.len() as u64).to_le_bytes())?;
    w.write_all(&bytes)?;
    for (_, data) in &frame.payloads {
        let mut raw = Vec::with_capacity(data.len() * 4);
        for v in data {
            raw.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&raw)?;
    }
    w.flush()
}

/// Reads one message. `Ok(None)` means the stream closed cleanly before a
/// new message began.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Frame>> {
    let mut len_buf = [0u8; 8];
    let mut filled = 0;
    while filled < len_buf.len() {
        match r.read(&mut len_buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u64::from_le_bytes(len_buf);
    if len > MAX_HEADER_BYTES {
        return Err(invalid(format!("header length {len} exceeds limit")));
    }
    let mut header_bytes = vec![0u8; len as usize];
    r.read_exact(&mut header_bytes)?;
    let header: Value =
        serde_json::from_slice(&header_bytes).map_err(|e| invalid(format!("header is not JSON: {e}")))?;
    let specs: Vec<PayloadSpec> = match header.get("payloads") {
        None => Vec::new(),
        Some(v) => serde_json::from_value(v.clone()).map_err(|e| invalid(format!("bad payload list: {e}")))?,
    };
    let mut payloads = Vec::with_capacity(specs.len());
    for spec in specs {
        let mut raw = vec![0u8; spec.len * 4];
        r.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        payloads.push((spec.name, data));
    }
    Ok(Some(Frame { header, payloads }))
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

type Incoming = io::Result<Option<Frame>>;

/// Engine side of one worker process. Requests are strictly sequential.
#[derive(Debug)]
pub struct WorkerClient {
    command: Vec<String>,
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    incoming: Receiver<Incoming>,
    timeout: Duration,
    ops: Vec<String>,
    dead: Option<String>,
}

impl WorkerClient {
    /// Spawns the worker and performs the handshake.
    pub fn spawn(command: &[String], timeout: Duration) -> Result<Self, BackendError> {
        let (program, args) = command.split_first().ok_or_else(|| BackendError::Spawn {
            command: command.to_vec(),
            source: io::Error::new(io::ErrorKind::InvalidInput, "empty command"),
        })?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|source| BackendError::Spawn {
                command: command.to_vec(),
                source,
            })?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, incoming) = mpsc::channel();
        thread::spawn(move || {
            let mut reader = BufReader::new(stdout);
            loop {
                let msg = read_frame(&mut reader);
                let stop = !matches!(msg, Ok(Some(_)));
                if tx.send(msg).is_err() || stop {
                    break;
                }
            }
        });
        let mut client = Self {
            command: command.to_vec(),
            child,
            stdin,
            incoming,
            timeout,
            ops: Vec::new(),
            dead: None,
        };
        let reply = client.round_trip(&Frame::new(json!({"op": "hello", "version": PROTOCOL_VERSION})))?;
        let ops = reply
            .header
            .get("ops")
            .and_then(Value::as_array)
            .ok_or_else(|| BackendError::Protocol("handshake reply lacks an ops list".into()))?;
        client.ops = ops.iter().filter_map(|v| v.as_str().map(str::to_string)).collect();
        Ok(client)
    }

    pub fn command(&self) -> &[String] {
        &self.command
    }

    pub fn supports(&self, op: &str) -> bool {
        self.ops.iter().any(|o| o == op)
    }

    pub fn extract(&mut self, input: &[f32], enrollment: &[f32], sample_rate: u32) -> Result<Vec<f32>, BackendError> {
        if !self.supports("extract") {
            return Err(BackendError::UnsupportedOp("extract".into()));
        }
        let reply = self.round_trip(&request("extract", input, enrollment, sample_rate))?;
        let specs = reply.payloads.as_slice();
        match specs {
            [(name, data)] if name == "estimate" && data.len() == input.len() => Ok(data.clone()),
            [(name, data)] if name == "estimate" => Err(BackendError::Protocol(format!(
                "estimate has {} samples, expected {}",
                data.len(),
                input.len()
            ))),
            _ => Err(BackendError::Protocol(
                "extract reply must carry exactly one 'estimate' payload".into(),
            )),
        }
    }

    pub fn score(&mut self, estimate: &[f32], enrollment: &[f32], sample_rate: u32) -> Result<f64, BackendError> {
        if !self.supports("score") {
            return Err(BackendError::UnsupportedOp("score".into()));
        }
        let reply = self.round_trip(&request("score", estimate, enrollment, sample_rate))?;
        let score = reply
            .header
            .get("score")
            .and_then(Value::as_f64)
            .ok_or_else(|| BackendError::Protocol("score reply lacks a numeric score".into()))?;
        if !reply.payloads.is_empty() {
            return Err(BackendError::Protocol("score reply must not carry payloads".into()));
        }
        Ok(score)
    }

    fn round_trip(&mut self, frame: &Frame) -> Result<Frame, BackendError> {
        if let Some(reason) = &self.dead {
            return Err(BackendError::Exited { status: reason.clone() });
        }
        let stdin = self.stdin.as_mut().expect("stdin is open while alive");
        if let Err(e) = write_frame(stdin, frame) {
            if e.kind() == io::ErrorKind::BrokenPipe {
                return Err(self.exited());
            }
            return Err(BackendError::Io(e));
        }
        match self.incoming.recv_timeout(self.timeout) {
            Ok(Ok(Some(reply))) if reply.ok() => Ok(reply),
            Ok(Ok(Some(reply))) => {
                let msg = reply.error_message();
                if msg == UNSUPPORTED_OP {
                    let op = frame.header.get("op").and_then(Value::as_str).unwrap_or("?");
                    Err(BackendError::UnsupportedOp(op.to_string()))
                } else {
                    Err(BackendError::Remote(msg))
                }
            }
            Ok(Ok(None)) | Err(RecvTimeoutError::Disconnected) => Err(self.exited()),
            Ok(Err(e)) if e.kind() == io::ErrorKind::UnexpectedEof => Err(self.exited()),
            Ok(Err(e)) => {
                self.kill("protocol violation");
                Err(BackendError::Protocol(e.to_string()))
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill("timed out");
                Err(BackendError::Timeout(self.timeout.as_secs_f64()))
            }
        }
    }

    fn exited(&mut self) -> BackendError {
        let status = match self.child.wait() {
            Ok(s) => s.to_string(),
            Err(e) => format!("unknown status: {e}"),
        };
        self.dead = Some(status.clone());
        BackendError::Exited { status }
    }

    fn kill(&mut self, reason: &str) {
        let _ = self.child.kill();
        let _ = self.child.wait();
        self.dead = Some(reason.to_string());
    }
}

impl Drop for WorkerClient {
    fn drop(&mut self) {
        // Closing stdin lets a well-behaved worker exit on its own.
        self.stdin.take();
        if self.dead.is_none() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}

fn request(op: &str, input: &[f32], enrollment: &[f32], sample_rate: u32) -> Frame {
    Frame::new(json!({"op": op, "sample_rate": sample_rate}))
        .with_payload("input", input.to_vec())
        .with_payload("enrollment", enrollment.to_vec())
}

/// Model callbacks served by [`serve`].
pub trait WorkerHook {
    fn ops(&self) -> Vec<&'static str>;

    fn extract(&mut self, _input: &[f32], _enrollment: &[f32], _sample_rate: u32) -> Result<Vec<f32>, String> {
        Err(UNSUPPORTED_OP.into())
    }

    fn score(&mut self, _estimate: &[f32], _enrollment: &[f32], _sample_rate: u32) -> Result<f64, String> {
        Err(UNSUPPORTED_OP.into())
    }
}

fn error_frame(msg: impl Into<String>) -> Frame {
    Frame::new(json!({"ok": false, "error": msg.into()}))
}

/// Worker-side loop: answers requests until the input stream closes.
pub fn serve<R: Read, W: Write, H: WorkerHook>(input: R, output: W, hook: &mut H) -> io::Result<()> {
    let mut reader = BufReader::new(input);
    let mut writer = BufWriter::new(output);
    loop {
        let frame = match read_frame(&mut reader) {
            Ok(Some(f)) => f,
            Ok(None) => return Ok(()),
            Err(e) if e.kind() == io::ErrorKind::InvalidData => {
                write_frame(&mut writer, &error_frame(format!("malformed frame: {e}")))?;
                continue;
            }
            Err(e) => return Err(e),
        };
        let reply = dispatch(&frame, hook);
        write_frame(&mut writer, &reply)?;
    }
}

fn dispatch<H: WorkerHook>(frame: &Frame, hook: &mut H) -> Frame {
    let op = frame.header.get("op").and_then(Value::as_str).unwrap_or("");
    if op == "hello" {
        return Frame::new(json!({"ok": true, "ops": hook.ops()}));
    }
    if !hook.ops().contains(&op) {
        return error_frame(UNSUPPORTED_OP);
    }
    let sample_rate = frame.header.get("sample_rate").and_then(Value::as_u64).unwrap_or(0) as u32;
    let (Some(input), Some(enrollment)) = (frame.payload("input"), frame.payload("enrollment")) else {
        return error_frame("request must carry 'input' and 'enrollment' payloads");
    };
    match op {
        "extract" => match hook.extract(input, enrollment, sample_rate) {
            Ok(est) => Frame::new(json!({"ok": true})).with_payload("estimate", est),
            Err(e) => error_frame(e),
        },
        "score" => match hook.score(input, enrollment, sample_rate) {
            Ok(s) if s.is_finite() => Frame::new(json!({"ok": true, "score": s})),
            Ok(s) => error_frame(format!("non-finite score {s}")),
            Err(e) => error_frame(e),
        },
        _ => error_frame(UNSUPPORTED_OP),
    }
}
