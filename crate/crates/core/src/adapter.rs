//! Wire protocol v1 and client for external black-box forecasters.
//!
//! A request is one JSON object; the reply is one JSON object that is either a
//! [`ForecastResponse`] or `{"error": "<message>"}`. Over a subprocess the
//! objects are newline-delimited on stdin/stdout; over HTTP the request is the
//! body of `POST /forecast`. See `docs/protocol.md` for the field reference.
//!
//! [`MockResponder`] answers the protocol in process, and [`serve_stdio`] /
//! [`serve_http`] expose any [`Responder`] as a server.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::str::FromStr;
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DomainProfile, Freq, TimeSeries};
use crate::forecast::{seasonal_naive, ContextPolicy, Forecast, ForecastError, Forecaster};
use crate::statkit::population_std;

pub const PROTOCOL_VERSION: u32 = 1;
pub const ENDPOINT_ENV: &str = "CHRONOSCOPE_ENDPOINT";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("no response within {0:?}")]
    Timeout(Duration),
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("remote error: {0}")]
    Remote(String),
    #[error("invalid endpoint '{0}': expected cmd:<path>, http:<url> or mock:<kind>")]
    BadEndpoint(String),
    #[error("invalid request: {0}")]
    BadRequest(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalingHint {
    #[default]
    None,
    Minmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRequest {
    pub protocol_version: u32,
    pub series_id: String,
    pub freq: Freq,
    pub context: Vec<f64>,
    pub horizon: usize,
    #[serde(default)]
    pub scaling_hint: ScalingHint,
}

impl ForecastRequest {
    pub fn new(series_id: impl Into<String>, freq: Freq, context: Vec<f64>, horizon: usize) -> Self {
        Self {
            protocol_version: PROTOCOL_VERSION,
            series_id: series_id.into(),
            freq,
            context,
            horizon,
            scaling_hint: ScalingHint::None,
        }
    }

    pub fn validate(&self) -> Result<(), AdapterError> {
        if self.protocol_version != PROTOCOL_VERSION {
            return Err(AdapterError::BadRequest(format!(
                "protocol_version {} (supported: {PROTOCOL_VERSION})",
                self.protocol_version
            )));
        }
        if self.context.is_empty() {
            return Err(AdapterError::BadRequest("empty context".into()));
        }
        if self.horizon == 0 {
            return Err(AdapterError::BadRequest("horizon must be at least 1".into()));
        }
        if self.context.iter().any(|v| !v.is_finite()) {
            return Err(AdapterError::BadRequest("non-finite context value".into()));
        }
        Ok(())
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResponse {
    pub point: Vec<f64>,
    /// Quantile level (e.g. `"0.025"`) to one value per step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<BTreeMap<String, Vec<f64>>>,
    pub model_name: String,
    pub latency_ms: u64,
}

impl ForecastResponse {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("response serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ErrorReply {
    error: String,
}

/// Checks a response against the request: length, finiteness and quantile shape.
pub fn validate_response(req: &ForecastRequest, resp: &ForecastResponse) -> Result<(), AdapterError> {
    if resp.point.len() != req.horizon {
        return Err(AdapterError::ProtocolViolation(format!(
            "{} points for horizon {}",
            resp.point.len(),
            req.horizon
        )));
    }
    if let Some(i) = resp.point.iter().position(|v| !v.is_finite()) {
        return Err(AdapterError::ProtocolViolation(format!("non-finite point at step {i}")));
    }
    for (level, values) in resp.quantiles.iter().flatten() {
        if level.parse::<f64>().map_or(true, |q| !(0.0..=1.0).contains(&q)) {
            return Err(AdapterError::ProtocolViolation(format!("bad quantile level '{level}'")));
        }
        if values.len() != req.horizon || values.iter().any(|v| !v.is_finite()) {
            return Err(AdapterError::ProtocolViolation(format!("quantile '{level}' malformed")));
        }
    }
    Ok(())
}

/// Parses one reply line: an error object or a response.
pub fn parse_reply(line: &str) -> Result<ForecastResponse, AdapterError> {
    let value: serde_json::Value =
        serde_json::from_str(line.trim()).map_err(|e| AdapterError::ProtocolViolation(format!("invalid JSON: {e}")))?;
    if let Some(err) = value.get("error") {
        return Err(AdapterError::Remote(
            err.as_str().map_or_else(|| err.to_string(), str::to_string),
        ));
    }
    serde_json::from_value(value).map_err(|e| AdapterError::ProtocolViolation(format!("malformed response: {e}")))
}

/// A channel that delivers one request and returns the raw reply.
pub trait Transport: Send + Sync {
    fn call(&self, req: &ForecastRequest, timeout: Duration) -> Result<ForecastResponse, AdapterError>;

    /// Whether callers may issue requests from several threads at once.
    fn concurrency_safe(&self) -> bool;

    fn describe(&self) -> String;
}

/// Sends `req` and validates the reply.
pub fn call_remote(
    transport: &dyn Transport,
    req: &ForecastRequest,
    timeout: Duration,
) -> Result<ForecastResponse, AdapterError> {
    req.validate()?;
    let resp = transport.call(req, timeout)?;
    validate_response(req, &resp)?;
    Ok(resp)
}

/// Answers protocol requests in process.
pub trait Responder: Send + Sync {
    fn respond(&self, req: &ForecastRequest) -> Result<ForecastResponse, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MockKind {
    /// Repeats the last context value.
    Echo,
    /// Seasonal naive; the period defaults to the frequency's natural cycle.
    Seasonal { period: Option<usize> },
    /// Seasonal naive plus Gaussian noise at a tenth of the context's spread.
    Noisy { period: Option<usize> },
}

impl fmt::Display for MockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (name, period) = match self {
            MockKind::Echo => ("echo", None),
            MockKind::Seasonal { period } => ("seasonal", *period),
            MockKind::Noisy { period } => ("noisy", *period),
        };
        match period {
            Some(p) => write!(f, "{name}:{p}"),
            None => f.write_str(name),
        }
    }
}

impl FromStr for MockKind {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
        let period = arg
            .map(|p| {
                p.parse::<usize>()
                    .ok()
                    .filter(|p| *p > 0)
                    .ok_or_else(|| AdapterError::BadEndpoint(format!("mock:{s}")))
            })
            .transpose()?;
        match (name, period) {
            ("echo", None) => Ok(MockKind::Echo),
            ("seasonal", period) => Ok(MockKind::Seasonal { period }),
            ("noisy", period) => Ok(MockKind::Noisy { period }),
            _ => Err(AdapterError::BadEndpoint(format!("mock:{s}"))),
        }
    }
}

/// Natural cycle length used by the seasonal mocks.
pub fn default_period(freq: Freq) -> usize {
    match freq {
        Freq::Minutely => 1440,
        Freq::Hourly => 24,
        Freq::BusinessDaily => 5,
        Freq::Monthly => 12,
    }
}

/// 64-bit FNV-1a.
fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ u64::from(*b)).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Deterministic stand-in for a foundation model. Noise depends only on the
/// seed and the request bytes, so call order and threading do not matter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MockResponder {
    pub kind: MockKind,
    pub seed: u64,
}

impl MockResponder {
    pub fn new(kind: MockKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    fn seasonal(req: &ForecastRequest, period: Option<usize>) -> Vec<f64> {
        let p = period.unwrap_or_else(|| default_period(req.freq));
        if req.context.len() < p {
            vec![*req.context.last().expect("validated context"); req.horizon]
        } else {
            seasonal_naive(&req.context, req.horizon, p).expect("context covers the period")
        }
    }
}

impl Responder for MockResponder {
    fn respond(&self, req: &ForecastRequest) -> Result<ForecastResponse, String> {
        req.validate().map_err(|e| e.to_string())?;
        let point = match self.kind {
            MockKind::Echo => vec![*req.context.last().expect("validated context"); req.horizon],
            MockKind::Seasonal { period } => Self::seasonal(req, period),
            MockKind::Noisy { period } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(req.to_line().as_bytes()));
                let sd = 0.1 * population_std(&req.context);
                let base = Self::seasonal(req, period);
                if sd > 0.0 {
                    let noise = Normal::new(0.0, sd).expect("positive sd");
                    base.into_iter().map(|v| v + noise.sample(&mut rng)).collect()
                } else {
                    base
                }
            }
        };
        Ok(ForecastResponse {
            point,
            quantiles: None,
            model_name: format!("mock-{}", self.kind),
            latency_ms: 0,
        })
    }
}

/// Answers one request line with one reply line (without the newline).
pub fn handle_line(responder: &dyn Responder, line: &str) -> String {
    let reply = serde_json::from_str::<ForecastRequest>(line.trim())
        .map_err(|e| format!("malformed request: {e}"))
        .and_then(|req| responder.respond(&req));
    match reply {
        Ok(resp) => resp.to_line(),
        Err(error) => serde_json::to_string(&ErrorReply { error }).expect("error serializes"),
    }
}

/// Serves newline-delimited requests until `reader` is exhausted.
pub fn serve_stdio<R: BufRead, W: Write>(
    responder: &dyn Responder,
    reader: R,
    mut writer: W,
) -> std::io::Result<usize> {
    let mut served = 0;
    for line in reader.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        writeln!(writer, "{}", handle_line(responder, &line))?;
        writer.flush()?;
        served += 1;
    }
    Ok(served)
}

/// Serves `POST /forecast` until `max_requests` have been handled (forever if
/// `None`). Other paths get 404.
pub fn serve_http(
    responder: &dyn Responder,
    server: &tiny_http::Server,
    max_requests: Option<usize>,
) -> std::io::Result<()> {
    let json = tiny_http::Header::from_bytes("Content-Type", "application/json").expect("static header");
    for (served, mut request) in server.incoming_requests().enumerate() {
        let is_forecast = *request.method() == tiny_http::Method::Post && request.url() == "/forecast";
        let response = if is_forecast {
            let mut body = String::new();
            request.as_reader().read_to_string(&mut body)?;
            tiny_http::Response::from_string(handle_line(responder, &body)).with_header(json.clone())
        } else {
            tiny_http::Response::from_string(r#"{"error":"not found"}"#)
                .with_status_code(404)
                .with_header(json.clone())
        };
        request.respond(response)?;
        if max_requests.is_some_and(|m| served + 1 >= m) {
            break;
        }
    }
    Ok(())
}

/// In-process transport over a [`Responder`].
pub struct MockTransport<R: Responder = MockResponder> {
    responder: R,
}

impl<R: Responder> MockTransport<R> {
    pub fn new(responder: R) -> Self {
        Self { responder }
    }
}

impl<R: Responder> Transport for MockTransport<R> {
    fn call(&self, req: &ForecastRequest, _timeout: Duration) -> Result<ForecastResponse, AdapterError> {
        self.responder.respond(req).map_err(AdapterError::Remote)
    }

    fn concurrency_safe(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        "in-process mock".into()
    }
}

struct StdioChannel {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Drop for StdioChannel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// Newline-delimited JSON over a subprocess. The process is started on first
/// use and restarted after a timeout or a broken pipe; one request is in
/// flight at a time.
pub struct StdioTransport {
    program: String,
    args: Vec<String>,
    channel: Mutex<Option<StdioChannel>>,
}

impl StdioTransport {
    pub fn new(program: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            program: program.into(),
            args,
            channel: Mutex::new(None),
        }
    }

    fn spawn(&self) -> Result<StdioChannel, AdapterError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Transport(format!("cannot start '{}': {e}", self.program)))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(StdioChannel {
            child,
            stdin,
            lines: rx,
        })
    }
}

impl Transport for StdioTransport {
    fn call(&self, req: &ForecastRequest, timeout: Duration) -> Result<ForecastResponse, AdapterError> {
        let mut guard = self.channel.lock().unwrap_or_else(|e| e.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let channel = guard.as_mut().expect("channel just set");
        let sent = writeln!(channel.stdin, "{}", req.to_line()).and_then(|()| channel.stdin.flush());
        if let Err(e) = sent {
            *guard = None;
            return Err(AdapterError::Transport(format!("write failed: {e}")));
        }
        match channel.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => parse_reply(&line),
            Ok(Err(e)) => {
                *guard = None;
                Err(AdapterError::Transport(format!("read failed: {e}")))
            }
            Err(RecvTimeoutError::Timeout) => {
                *guard = None;
                Err(AdapterError::Timeout(timeout))
            }
            Err(RecvTimeoutError::Disconnected) => {
                *guard = None;
                Err(AdapterError::Transport("forecaster process closed its output".into()))
            }
        }
    }

    fn concurrency_safe(&self) -> bool {
        false
    }

    fn describe(&self) -> String {
        std::iter::once(self.program.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// JSON over `POST <base>/forecast`.
pub struct HttpTransport {
    url: String,
}

impl HttpTransport {
    /// `base` is the server root, e.g. `http://127.0.0.1:8080`.
    pub fn new(base: &str) -> Self {
        let base = base.trim_end_matches('/');
        let url = if base.ends_with("/forecast") {
            base.to_string()
        } else {
            format!("{base}/forecast")
        };
        Self { url }
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Transport for HttpTransport {
    fn call(&self, req: &ForecastRequest, timeout: Duration) -> Result<ForecastResponse, AdapterError> {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        let mut resp = agent.post(&self.url).send_json(req).map_err(|e| match e {
            ureq::Error::Timeout(_) => AdapterError::Timeout(timeout),
            other => AdapterError::Transport(other.to_string()),
        })?;
        let status = resp.status();
        let body = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => AdapterError::Timeout(timeout),
            other => AdapterError::Transport(other.to_string()),
        })?;
        match parse_reply(&body) {
            Err(AdapterError::ProtocolViolation(_)) if !status.is_success() => {
                Err(AdapterError::Transport(format!("HTTP {status}")))
            }
            other => other,
        }
    }

    fn concurrency_safe(&self) -> bool {
        true
    }

    fn describe(&self) -> String {
        self.url.clone()
    }
}

/// Where a remote forecaster lives: `cmd:<program> [args..]`,
/// `http:<url>` (or a bare `http://` URL), `mock:<kind>[:<period>]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Command { program: String, args: Vec<String> },
    Http(String),
    Mock(MockKind),
}

impl FromStr for Endpoint {
    type Err = AdapterError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AdapterError::BadEndpoint(s.to_string());
        if let Some(rest) = s.strip_prefix("cmd:") {
            let mut parts = rest.split_whitespace().map(str::to_string);
            let program = parts.next().ok_or_else(bad)?;
            Ok(Endpoint::Command {
                program,
                args: parts.collect(),
            })
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Endpoint::Http(s.to_string()))
        } else if let Some(rest) = s.strip_prefix("http:") {
            if rest.is_empty() {
                return Err(bad());
            }
            Ok(Endpoint::Http(if rest.contains("://") {
                rest.to_string()
            } else {
                format!("http://{rest}")
            }))
        } else if let Some(rest) = s.strip_prefix("mock:") {
            rest.parse().map(Endpoint::Mock).map_err(|_| bad())
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Command { program, args } => {
                write!(f, "cmd:{program}")?;
                args.iter().try_for_each(|a| write!(f, " {a}"))
            }
            Endpoint::Http(url) => write!(f, "http:{url}"),
            Endpoint::Mock(kind) => write!(f, "mock:{kind}"),
        }
    }
}

impl Endpoint {
    /// The endpoint named by `CHRONOSCOPE_ENDPOINT`, if set.
    pub fn from_env() -> Result<Option<Self>, AdapterError> {
        match std::env::var(ENDPOINT_ENV) {
            Ok(v) if !v.trim().is_empty() => v.trim().parse().map(Some),
            _ => Ok(None),
        }
    }

    /// Mock endpoints take `seed`; the others ignore it.
    pub fn connect(&self, seed: u64) -> Box<dyn Transport> {
        match self {
            Endpoint::Command { program, args } => Box::new(StdioTransport::new(program.clone(), args.clone())),
            Endpoint::Http(url) => Box::new(HttpTransport::new(url)),
            Endpoint::Mock(kind) => Box::new(MockTransport::new(MockResponder::new(*kind, seed))),
        }
    }
}

/// A protocol endpoint as a [`Forecaster`]. Fitting is a no-op: remote models
/// are used zero-shot. Quantiles `0.025`/`0.975`, when returned, become the
/// forecast interval.
pub struct RemoteForecaster {
    name: String,
    transport: Box<dyn Transport>,
    timeout: Duration,
    scaling_hint: ScalingHint,
}

impl RemoteForecaster {
    pub fn new(name: impl Into<String>, transport: Box<dyn Transport>) -> Self {
        Self {
            name: name.into(),
            transport,
            timeout: DEFAULT_TIMEOUT,
            scaling_hint: ScalingHint::None,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }

    pub fn with_scaling_hint(mut self, hint: ScalingHint) -> Self {
        self.scaling_hint = hint;
        self
    }

    pub fn concurrency_safe(&self) -> bool {
        self.transport.concurrency_safe()
    }

    pub fn transport(&self) -> &dyn Transport {
        self.transport.as_ref()
    }
}

impl Forecaster for RemoteForecaster {
    fn name(&self) -> &str {
        &self.name
    }

    fn fit(&mut self, _train: &TimeSeries, _profile: &DomainProfile) -> Result<(), ForecastError> {
        Ok(())
    }

    fn predict(&self, context: &TimeSeries, horizon: usize) -> Result<Forecast, ForecastError> {
        let req = ForecastRequest {
            scaling_hint: self.scaling_hint,
            ..ForecastRequest::new(context.series_id(), context.freq(), context.values().to_vec(), horizon)
        };
        let resp = call_remote(self.transport.as_ref(), &req, self.timeout)
            .map_err(|e| ForecastError::Remote(format!("{}: {e}", self.transport.describe())))?;
        let interval = resp.quantiles.as_ref().and_then(|q| {
            let lo = q.get("0.025")?;
            let hi = q.get("0.975")?;
            Some(lo.iter().zip(hi).map(|(a, b)| (*a, *b)).collect())
        });
        Ok(Forecast {
            point: resp.point,
            interval,
        })
    }

    fn context_policy(&self) -> ContextPolicy {
        ContextPolicy::Window
    }
}

/// Outcome of one conformance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Runs the protocol checks any server must pass: well-formed replies for
/// several horizons and context shapes, determinism on a repeated request, and
/// an error object (not a crash) for an invalid request.
pub fn conformance_suite(transport: &dyn Transport, timeout: Duration) -> Vec<CheckResult> {
    let ramp: Vec<f64> = (0..48).map(|i| f64::from(i) * 0.5 + 10.0).collect();
    let cases = [
        ("horizon-1", ForecastRequest::new("conf", Freq::Hourly, ramp.clone(), 1)),
        ("horizon-5", ForecastRequest::new("conf", Freq::Hourly, ramp.clone(), 5)),
        (
            "constant-context",
            ForecastRequest::new("conf", Freq::Monthly, vec![3.0; 24], 12),
        ),
        (
            "short-context",
            ForecastRequest::new("conf", Freq::BusinessDaily, vec![1.0, 2.0], 5),
        ),
        (
            "minmax-hint",
            ForecastRequest {
                scaling_hint: ScalingHint::Minmax,
                ..ForecastRequest::new("conf", Freq::Hourly, ramp.clone(), 24)
            },
        ),
    ];
    let mut out: Vec<CheckResult> = cases
        .iter()
        .map(|(name, req)| {
            let r = call_remote(transport, req, timeout);
            CheckResult {
                name: (*name).to_string(),
                passed: r.is_ok(),
                detail: r.map_or_else(
                    |e| e.to_string(),
                    |resp| format!("{} points from {}", resp.point.len(), resp.model_name),
                ),
            }
        })
        .collect();

    let req = &cases[1].1;
    let det = match (
        call_remote(transport, req, timeout),
        call_remote(transport, req, timeout),
    ) {
        (Ok(a), Ok(b)) if a.point == b.point => (true, "identical".to_string()),
        (Ok(_), Ok(_)) => (false, "repeated request gave different points".to_string()),
        (Err(e), _) | (_, Err(e)) => (false, e.to_string()),
    };
    out.push(CheckResult {
        name: "deterministic".into(),
        passed: det.0,
        detail: det.1,
    });

    let invalid = ForecastRequest::new("conf", Freq::Hourly, ramp, 0);
    let rejected = match transport.call(&invalid, timeout) {
        Err(AdapterError::Remote(msg)) => (true, msg),
        Err(e) => (false, format!("expected an error reply, got {e}")),
        Ok(resp) => (false, format!("accepted horizon 0 with {} points", resp.point.len())),
    };
    out.push(CheckResult {
        name: "rejects-invalid".into(),
        passed: rejected.0,
        detail: rejected.1,
    });
    out
}
