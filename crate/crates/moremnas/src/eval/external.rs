//! Line-delimited JSON backend for an external trainer reached over a
//! child process's stdio or a TCP socket. Every request carries a fresh
//! id; responses may arrive out of order and are routed back by id.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::net::{Shutdown, TcpStream};
use std::process::{Child, Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Backend, EvalRequest, Quality, RawOutcome, Source};

/// Allowed relative disagreement between a reported mse and the mse
/// implied by the reported psnr.
pub const MSE_CONSISTENCY_REL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Endpoint {
    Subprocess { command: Vec<String> },
    Tcp { addr: String },
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: u64,
    genome: &'a [u32],
    arch: &'a str,
    scale: u32,
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct WireResponse {
    id: u64,
    psnr: f64,
    mse: f64,
}

#[derive(Default)]
struct Router {
    pending: HashMap<u64, mpsc::Sender<WireResponse>>,
    /// Ids whose request timed out; late replies to them are discarded.
    tombstones: HashSet<u64>,
    fatal: Option<String>,
}

pub struct ExternalBackend {
    writer: Mutex<Box<dyn Write + Send>>,
    router: Arc<Mutex<Router>>,
    next_id: AtomicU64,
    timeout: Duration,
    child: Mutex<Option<Child>>,
    tcp: Option<TcpStream>,
    reader: Mutex<Option<JoinHandle<()>>>,
}

fn fail(router: &Arc<Mutex<Router>>, msg: String) {
    let mut r = router.lock().expect("router poisoned");
    if r.fatal.is_none() {
        r.fatal = Some(msg);
    }
    // Dropping the senders wakes every waiter with a disconnect.
    r.pending.clear();
}

fn reader_loop(source: Box<dyn BufRead + Send>, router: Arc<Mutex<Router>>) {
    for line in source.lines() {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                fail(&router, format!("response read failed: {e}"));
                return;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        let resp: WireResponse = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                fail(&router, format!("malformed response line: {e}"));
                return;
            }
        };
        let mut r = router.lock().expect("router poisoned");
        if let Some(tx) = r.pending.remove(&resp.id) {
            let _ = tx.send(resp);
        } else if r.tombstones.contains(&resp.id) {
            // Late reply to a request that already timed out.
        } else {
            drop(r);
            fail(&router, format!("response for unknown id {}", resp.id));
            return;
        }
    }
    fail(&router, "eval stream closed".to_string());
}

fn validate_response(resp: &WireResponse) -> Result<Quality> {
    if !resp.mse.is_finite() || resp.mse <= 0.0 || !resp.psnr.is_finite() {
        return Err(Error::Protocol(format!(
            "response id {} carries non-finite quality (psnr {}, mse {})",
            resp.id, resp.psnr, resp.mse
        )));
    }
    let implied = 10f64.powf(-resp.psnr / 10.0);
    if (resp.mse - implied).abs() > MSE_CONSISTENCY_REL_TOL * implied {
        return Err(Error::PsnrMseMismatch { id: resp.id, psnr: resp.psnr, mse: resp.mse });
    }
    Ok(Quality { psnr: resp.psnr, mse: resp.mse })
}

impl ExternalBackend {
    pub fn new(endpoint: &Endpoint, timeout: Duration) -> Result<Self> {
        let router = Arc::new(Mutex::new(Router::default()));
        let (writer, reader_src, child, tcp): (
            Box<dyn Write + Send>,
            Box<dyn BufRead + Send>,
            Option<Child>,
            Option<TcpStream>,
        ) = match endpoint {
            Endpoint::Subprocess { command } => {
                let (program, args) = command
                    .split_first()
                    .ok_or_else(|| Error::Config("subprocess endpoint needs a command".into()))?;
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| Error::Worker(format!("failed to spawn {program}: {e}")))?;
                let stdin = child.stdin.take().expect("stdin was piped");
                let stdout = child.stdout.take().expect("stdout was piped");
                (Box::new(stdin), Box::new(BufReader::new(stdout)), Some(child), None)
            }
            Endpoint::Tcp { addr } => {
                let stream = TcpStream::connect(addr)
                    .map_err(|e| Error::Worker(format!("failed to connect {addr}: {e}")))?;
                let read_half = stream
                    .try_clone()
                    .map_err(|e| Error::Worker(format!("failed to clone socket: {e}")))?;
                (Box::new(stream.try_clone().map_err(|e| Error::Worker(e.to_string()))?),
                 Box::new(BufReader::new(read_half)),
                 None,
                 Some(stream))
            }
        };
        let reader_router = Arc::clone(&router);
        let handle = std::thread::spawn(move || reader_loop(reader_src, reader_router));
        Ok(ExternalBackend {
            writer: Mutex::new(writer),
            router,
            next_id: AtomicU64::new(1),
            timeout,
            child: Mutex::new(child),
            tcp,
            reader: Mutex::new(Some(handle)),
        })
    }

    /// One request/response exchange; `None` means it timed out.
    fn call_once(&self, req: &EvalRequest) -> Result<Option<Quality>> {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let (tx, rx) = mpsc::channel();
        {
            let mut r = self.router.lock().expect("router poisoned");
            if let Some(msg) = &r.fatal {
                return Err(Error::Protocol(msg.clone()));
            }
            r.pending.insert(id, tx);
        }
        let genome: Vec<u32> = req.genome.cells().iter().map(|&c| c as u32).collect();
        let line = serde_json::to_string(&WireRequest {
            id,
            genome: &genome,
            arch: &req.arch,
            scale: req.scale,
        })?;
        {
            let mut w = self.writer.lock().expect("writer poisoned");
            let wrote = w
                .write_all(line.as_bytes())
                .and_then(|_| w.write_all(b"\n"))
                .and_then(|_| w.flush());
            if let Err(e) = wrote {
                self.router.lock().expect("router poisoned").pending.remove(&id);
                return Err(Error::Worker(format!("request write failed: {e}")));
            }
        }
        match rx.recv_timeout(self.timeout) {
            Ok(resp) => validate_response(&resp).map(Some),
            Err(RecvTimeoutError::Timeout) => {
                let mut r = self.router.lock().expect("router poisoned");
                r.pending.remove(&id);
                r.tombstones.insert(id);
                Ok(None)
            }
            Err(RecvTimeoutError::Disconnected) => {
                let r = self.router.lock().expect("router poisoned");
                Err(Error::Protocol(
                    r.fatal.clone().unwrap_or_else(|| "eval stream closed".to_string()),
                ))
            }
        }
    }
}

impl Backend for ExternalBackend {
    fn evaluate(&self, req: &EvalRequest) -> Result<RawOutcome> {
        if let Some(q) = self.call_once(req)? {
            return Ok(RawOutcome::Done(q));
        }
        // One retry under a fresh id; a second timeout is final.
        match self.call_once(req)? {
            Some(q) => Ok(RawOutcome::Done(q)),
            None => Ok(RawOutcome::TimedOut),
        }
    }

    fn kind(&self) -> Source {
        Source::External
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        if let Ok(mut child) = self.child.lock() {
            if let Some(mut c) = child.take() {
                let _ = c.kill();
                let _ = c.wait();
            }
        }
        if let Some(tcp) = &self.tcp {
            let _ = tcp.shutdown(Shutdown::Both);
        }
        if let Ok(mut reader) = self.reader.lock() {
            if let Some(handle) = reader.take() {
                let _ = handle.join();
            }
        }
    }
}
