//! Terminal rendering and the stdin verdict prompt used by `solve --interactive`.

use std::io::{self, BufRead, Write};

use gridplan_core::orchestrator::Snapshot;
use gridplan_core::search::{Candidate, Verdict};

/// Draw the snapshot grid using the RLE cell codes, one row per line.
pub fn render_grid(s: &Snapshot) -> String {
    let mut out = String::with_capacity((s.width as usize + 1) * s.height as usize);
    for row in s.cells.chunks(s.width as usize) {
        out.extend(row.iter().map(|c| c.code()));
        out.push('\n');
    }
    out
}

/// Parse one answer line. Empty means accept all; otherwise tokens like
/// `a 1 3 d 2`, `accept 1,3` or `decline 2`. Unnamed ids default to accept.
pub fn parse_verdict_line(line: &str, candidates: &[Candidate]) -> Result<Vec<(u32, Verdict)>, String> {
    let mut declined: Vec<u32> = Vec::new();
    let mut accepted: Vec<u32> = Vec::new();
    let mut mode: Option<Verdict> = None;
    for tok in line.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
        match tok.to_ascii_lowercase().as_str() {
            "a" | "accept" => mode = Some(Verdict::Accept),
            "d" | "decline" => mode = Some(Verdict::Decline),
            num => {
                let id: u32 = num.parse().map_err(|_| format!("unexpected token {tok:?}"))?;
                if !candidates.iter().any(|c| c.id == id) {
                    return Err(format!("no candidate with id {id}"));
                }
                match mode {
                    Some(Verdict::Decline) => declined.push(id),
                    Some(Verdict::Accept) => accepted.push(id),
                    None => return Err("start with 'a' or 'd'".into()),
                }
            }
        }
    }
    if let Some(id) = accepted.iter().find(|id| declined.contains(id)) {
        return Err(format!("candidate {id} both accepted and declined"));
    }
    Ok(candidates
        .iter()
        .map(|c| (c.id, if declined.contains(&c.id) { Verdict::Decline } else { Verdict::Accept }))
        .collect())
}

/// Show the pending candidates and read verdicts until a valid line arrives.
pub fn prompt_verdicts<R: BufRead, W: Write>(
    snapshot: &Snapshot,
    candidates: &[Candidate],
    input: &mut R,
    out: &mut W,
) -> io::Result<Vec<(u32, Verdict)>> {
    write!(out, "{}", render_grid(snapshot))?;
    writeln!(out, "candidates (stage {}, sub-goal {}):", snapshot.stage_index, snapshot.subgoal)?;
    for c in candidates {
        writeln!(out, "  [{}] {}  f={:.2} g={:.2} h={:.2}", c.id, c.cell, c.f, c.g, c.h)?;
    }
    loop {
        write!(out, "verdicts (enter = accept all, e.g. 'd 2 3'): ")?;
        out.flush()?;
        let mut line = String::new();
        if input.read_line(&mut line)? == 0 {
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "input closed while awaiting verdicts"));
        }
        match parse_verdict_line(&line, candidates) {
            Ok(v) => return Ok(v),
            Err(e) => writeln!(out, "  {e}")?,
        }
    }
}
