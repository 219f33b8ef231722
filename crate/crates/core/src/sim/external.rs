use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ObservableId, Probe, SimError, Simulator};

pub const DEFAULT_HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

/// Where an out-of-process simulator lives.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExternalSimSpec {
    /// Child process speaking the protocol on stdin/stdout.
    Command { program: String, args: Vec<String> },
    /// `host:port` of a listening simulator.
    Tcp { addr: String },
}

impl ExternalSimSpec {
    /// `cmd:<program> <args...>` or `tcp:<host:port>`.
    pub fn parse(s: &str) -> Result<Self, SimError> {
        if let Some(addr) = s.strip_prefix("tcp:") {
            return Ok(ExternalSimSpec::Tcp { addr: addr.to_string() });
        }
        let cmd = s.strip_prefix("cmd:").unwrap_or(s);
        let mut words = cmd.split_whitespace().map(str::to_string);
        let program = words
            .next()
            .ok_or_else(|| SimError::Config("empty external simulator command".into()))?;
        Ok(ExternalSimSpec::Command { program, args: words.collect() })
    }

    pub fn connect(&self) -> Result<ExternalSimulator, SimError> {
        ExternalSimulator::connect(self, DEFAULT_HANDSHAKE_TIMEOUT)
    }
}

/// Proxy for a simulator in another process. One command in flight at a time.
pub struct ExternalSimulator {
    writer: Box<dyn Write + Send>,
    replies: Receiver<std::io::Result<String>>,
    child: Option<Child>,
    timeout: Duration,
    steps: u64,
    names: Vec<ObservableId>,
    /// Values read in the current state; EVAL is assumed side-effect free.
    cache: Vec<Option<f64>>,
}

fn spawn_reader<R: Read + Send + 'static>(source: R) -> Receiver<std::io::Result<String>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut reader = BufReader::new(source);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    let trimmed = line.trim_end_matches(['\n', '\r']).to_string();
                    if tx.send(Ok(trimmed)).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });
    rx
}

impl ExternalSimulator {
    /// Launches or dials the simulator and completes a `RESET 0` handshake
    /// within `timeout`. The same timeout bounds every later reply.
    pub fn connect(spec: &ExternalSimSpec, timeout: Duration) -> Result<Self, SimError> {
        let (writer, replies, child): (Box<dyn Write + Send>, _, _) = match spec {
            ExternalSimSpec::Command { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| SimError::Launch(format!("{program}: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                (Box::new(stdin), spawn_reader(stdout), Some(child))
            }
            ExternalSimSpec::Tcp { addr } => {
                let stream = TcpStream::connect(addr)
                    .map_err(|e| SimError::Launch(format!("{addr}: {e}")))?;
                stream.set_nodelay(true).ok();
                let read_half = stream.try_clone().map_err(|e| SimError::Io(e.to_string()))?;
                (Box::new(stream), spawn_reader(read_half), None)
            }
        };
        let mut sim = ExternalSimulator {
            writer,
            replies,
            child,
            timeout,
            steps: 0,
            names: Vec::new(),
            cache: Vec::new(),
        };
        sim.reset(0)?;
        Ok(sim)
    }

    fn request(&mut self, command: &str) -> Result<String, SimError> {
        let framed = format!("{command}\n");
        self.writer
            .write_all(framed.as_bytes())
            .and_then(|_| self.writer.flush())
            .map_err(|e| SimError::Fault(format!("write `{command}` failed: {e}")))?;
        match self.replies.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(SimError::Io(e.to_string())),
            Err(RecvTimeoutError::Timeout) => Err(SimError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(SimError::Fault("simulator closed the connection".into()))
            }
        }
    }

    fn expect_ok(&mut self, command: &str) -> Result<(), SimError> {
        let line = self.request(command)?;
        if line == "OK" {
            Ok(())
        } else {
            Err(SimError::Protocol { line, reason: format!("expected OK after {command}") })
        }
    }
}

impl Simulator for ExternalSimulator {
    fn reset(&mut self, seed: u64) -> Result<(), SimError> {
        self.cache.iter_mut().for_each(|c| *c = None);
        self.expect_ok(&format!("RESET {seed}"))?;
        self.steps = 0;
        Ok(())
    }

    fn next(&mut self) -> Result<(), SimError> {
        self.cache.iter_mut().for_each(|c| *c = None);
        self.expect_ok("NEXT")?;
        self.steps += 1;
        Ok(())
    }

    fn resolve(&mut self, obs: &ObservableId) -> Result<Probe, SimError> {
        if let Some(i) = self.names.iter().position(|n| n == obs) {
            return Ok(Probe(i));
        }
        self.names.push(obs.clone());
        self.cache.push(None);
        Ok(Probe(self.names.len() - 1))
    }

    fn read(&mut self, probe: Probe) -> Result<f64, SimError> {
        let name = self
            .names
            .get(probe.0)
            .cloned()
            .ok_or_else(|| SimError::UnknownObservable(format!("probe #{}", probe.0)))?;
        if let Some(v) = self.cache[probe.0] {
            return Ok(v);
        }
        let line = self.request(&format!("EVAL {name}"))?;
        if line.starts_with("ERR unknown observable") {
            return Err(SimError::UnknownObservable(name.to_string()));
        }
        let v = line.trim().parse::<f64>().map_err(|_| SimError::Protocol {
            line: line.clone(),
            reason: format!("expected a decimal number after EVAL {name}"),
        })?;
        self.cache[probe.0] = Some(v);
        Ok(v)
    }

    fn step_count(&self) -> u64 {
        self.steps
    }
}

impl Drop for ExternalSimulator {
    fn drop(&mut self) {
        let _ = writeln!(self.writer, "QUIT").and_then(|_| self.writer.flush());
        if let Some(mut child) = self.child.take() {
            for _ in 0..50 {
                if let Ok(Some(_)) = child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}
