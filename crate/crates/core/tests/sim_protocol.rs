use std::io::{BufRead, BufReader, Cursor, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use smc_core::models::{KellyMarket, KellyMarketConfig, ModelSpec};
use smc_core::sim::{serve, ExternalSimSpec, ExternalSimulator, ObservableId, SimError, Simulator};

fn obs(s: &str) -> ObservableId {
    ObservableId::new(s).unwrap()
}

fn transcript(input: &str) -> Vec<String> {
    let mut sim = KellyMarket::new(KellyMarketConfig::reference(0.6)).unwrap();
    let mut out = Vec::new();
    serve(&mut sim, Cursor::new(input.as_bytes()), &mut out).unwrap();
    String::from_utf8(out).unwrap().lines().map(str::to_string).collect()
}

#[test]
fn serve_replies_one_line_per_command() {
    let lines = transcript("RESET 7\nEVAL price\nNEXT\nEVAL steps\nEVAL nosuch\nbogus\nRESET x\nEVALN price\nQUIT\nNEXT\n");
    assert_eq!(lines.len(), 8, "{lines:?}");
    assert_eq!(lines[0], "OK");
    assert_eq!(lines[1], "0.53600000000000003");
    assert_eq!(lines[2], "OK");
    assert_eq!(lines[3], "1");
    assert_eq!(lines[4], "ERR unknown observable");
    assert!(lines[5].starts_with("ERR "));
    assert!(lines[6].starts_with("ERR "));
    assert!(lines[7].starts_with("ERR "));
}

#[test]
fn serve_tolerates_crlf_and_eof() {
    let lines = transcript("RESET 1\r\nEVAL 0\r\n");
    assert_eq!(lines, ["OK", "0.33000000000000002"]);
}

#[test]
fn serve_survives_garbage() {
    let garbage: String = (0..500u32)
        .map(|i| match i % 7 {
            0 => "NEXT\n".to_string(),
            1 => format!("RESET {}\n", i),
            2 => "EVAL \u{00e9}\n".to_string(),
            3 => "\n".to_string(),
            4 => "EVAL price extra\n".to_string(),
            5 => "   \t  \n".to_string(),
            _ => format!("{}\n", "X".repeat(i as usize)),
        })
        .collect();
    let lines = transcript(&garbage);
    assert_eq!(lines.len(), 500);
}

fn spawn_tcp_server(script: Option<fn(&str) -> Option<String>>) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let reader = BufReader::new(stream.try_clone().unwrap());
        match script {
            None => {
                let mut sim = KellyMarket::new(KellyMarketConfig::reference(0.6)).unwrap();
                let _ = serve(&mut sim, reader, stream);
            }
            Some(reply) => {
                let mut w = stream;
                for line in reader.lines() {
                    let Ok(line) = line else { break };
                    if let Some(r) = reply(&line) {
                        if writeln!(w, "{r}").is_err() {
                            break;
                        }
                    }
                }
            }
        }
    });
    addr
}

#[test]
fn external_matches_in_process_over_tcp() {
    let addr = spawn_tcp_server(None);
    let spec = ExternalSimSpec::parse(&format!("tcp:{addr}")).unwrap();
    let mut remote = ExternalSimulator::connect(&spec, Duration::from_secs(5)).unwrap();
    let mut local = KellyMarket::new(KellyMarketConfig::reference(0.6)).unwrap();
    remote.reset(7).unwrap();
    local.reset(7).unwrap();
    for _ in 0..100 {
        for name in ["price", "0", "1", "2"] {
            let (r, l) = (remote.eval(&obs(name)).unwrap(), local.eval(&obs(name)).unwrap());
            assert_eq!(r.to_bits(), l.to_bits(), "{name}");
        }
        remote.next().unwrap();
        local.next().unwrap();
    }
    assert_eq!(remote.step_count(), 100);
    assert!(matches!(remote.eval(&obs("nosuch")), Err(SimError::UnknownObservable(_))));
}

#[test]
fn non_numeric_reply_is_a_protocol_violation() {
    let addr = spawn_tcp_server(Some(|line| {
        Some(if line.starts_with("EVAL") { "banana".into() } else { "OK".into() })
    }));
    let spec = ExternalSimSpec::parse(&format!("tcp:{addr}")).unwrap();
    let mut sim = ExternalSimulator::connect(&spec, Duration::from_secs(5)).unwrap();
    match sim.eval(&obs("price")) {
        Err(SimError::Protocol { line, .. }) => assert_eq!(line, "banana"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn silent_simulator_times_out() {
    let addr = spawn_tcp_server(Some(|line| if line.starts_with("RESET 0") { Some("OK".into()) } else { None }));
    let spec = ExternalSimSpec::parse(&format!("tcp:{addr}")).unwrap();
    let mut sim = ExternalSimulator::connect(&spec, Duration::from_millis(200)).unwrap();
    assert!(matches!(sim.next(), Err(SimError::Timeout(_))));
}

#[test]
fn silent_handshake_times_out() {
    let addr = spawn_tcp_server(Some(|_| None));
    let spec = ExternalSimSpec::parse(&format!("tcp:{addr}")).unwrap();
    assert!(matches!(
        ExternalSimulator::connect(&spec, Duration::from_millis(200)),
        Err(SimError::Timeout(_))
    ));
}

#[test]
fn missing_program_fails_to_launch() {
    let spec = ExternalSimSpec::parse("cmd:/nonexistent/simulator --flag").unwrap();
    assert!(matches!(spec.connect(), Err(SimError::Launch(_))));
}

#[test]
fn child_process_transport() {
    // `cat` echoes commands, so the handshake sees `RESET 0` instead of `OK`.
    let spec = ModelSpec::parse("cmd:cat", &[]).unwrap();
    match spec.instantiate() {
        Err(SimError::Protocol { line, .. }) => assert_eq!(line, "RESET 0"),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("echo server accepted"),
    }
}

#[test]
fn repeated_reads_in_one_state_are_served_from_cache() {
    use std::sync::atomic::{AtomicU64, Ordering};
    static EVALS: AtomicU64 = AtomicU64::new(0);
    let addr = spawn_tcp_server(Some(|line| {
        Some(if line.starts_with("EVAL") {
            (EVALS.fetch_add(1, Ordering::SeqCst) + 1).to_string()
        } else {
            "OK".into()
        })
    }));
    let spec = ExternalSimSpec::parse(&format!("tcp:{addr}")).unwrap();
    let mut sim = ExternalSimulator::connect(&spec, Duration::from_secs(5)).unwrap();
    assert_eq!(sim.eval(&obs("a")).unwrap(), 1.0);
    assert_eq!(sim.eval(&obs("a")).unwrap(), 1.0);
    assert_eq!(sim.eval(&obs("b")).unwrap(), 2.0);
    sim.next().unwrap();
    assert_eq!(sim.eval(&obs("a")).unwrap(), 3.0);
    sim.reset(4).unwrap();
    assert_eq!(sim.eval(&obs("a")).unwrap(), 4.0);
    assert_eq!(EVALS.load(Ordering::SeqCst), 4);
}
