use std::io::{BufRead, Write};

use super::{ObservableId, SimError, Simulator};
use crate::fmt::g17;

/// Serves one simulator over the line protocol until `QUIT` or end of input.
///
/// Malformed commands are answered with `ERR <reason>`; the loop continues.
pub fn serve<R: BufRead, W: Write>(
    sim: &mut dyn Simulator,
    input: R,
    mut output: W,
) -> std::io::Result<()> {
    for line in input.lines() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        let mut parts = line.split_whitespace();
        let reply = match (parts.next(), parts.next(), parts.next()) {
            (Some("RESET"), Some(seed), None) => match seed.parse::<u64>() {
                Ok(seed) => ok_or_err(sim.reset(seed)),
                Err(_) => format!("ERR bad seed `{seed}`"),
            },
            (Some("NEXT"), None, None) => ok_or_err(sim.next()),
            (Some("EVAL"), Some(name), None) => match ObservableId::new(name) {
                Ok(obs) => match sim.eval(&obs) {
                    Ok(v) => g17(v),
                    Err(SimError::UnknownObservable(_)) => "ERR unknown observable".to_string(),
                    Err(e) => format!("ERR {}", one_line(&e.to_string())),
                },
                Err(_) => "ERR unknown observable".to_string(),
            },
            (Some("QUIT"), None, None) => return Ok(()),
            (Some("EVALN"), ..) => "ERR EVALN not implemented".to_string(),
            _ => format!("ERR malformed command `{}`", one_line(line)),
        };
        let mut reply = reply;
        reply.push('\n');
        output.write_all(reply.as_bytes())?;
        output.flush()?;
    }
    Ok(())
}

fn ok_or_err(r: Result<(), SimError>) -> String {
    match r {
        Ok(()) => "OK".into(),
        Err(e) => format!("ERR {}", one_line(&e.to_string())),
    }
}

fn one_line(s: &str) -> String {
    s.replace(['\n', '\r'], " ")
}
