//! Reference scoring backend for the line-delimited JSON protocol: answers
//! every request with a uniform distribution over its labels.
//!
//! usage: ltcsum-echo-backend --labels a,b,c [--reverse N] [--crash-after K]
//!
//! `--reverse N` buffers N requests and answers them in reverse order;
//! `--crash-after K` exits with status 3 after K answers.

use std::io::{BufRead, Write};

use serde_json::{json, Value};

fn main() {
    let mut labels: Vec<String> = Vec::new();
    let mut reverse = 1usize;
    let mut crash_after: Option<usize> = None;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        let mut val = || args.next().unwrap_or_else(|| usage(&format!("{a} needs a value")));
        match a.as_str() {
            "--labels" => labels = val().split(',').map(String::from).collect(),
            "--reverse" => reverse = val().parse().unwrap_or_else(|_| usage("bad --reverse")),
            "--crash-after" => {
                crash_after = Some(val().parse().unwrap_or_else(|_| usage("bad --crash-after")))
            }
            other => usage(&format!("unknown argument {other}")),
        }
    }
    if labels.is_empty() {
        usage("--labels is required");
    }
    let p = 1.0 / labels.len() as f64;
    let scores: serde_json::Map<String, Value> = labels.iter().map(|l| (l.clone(), json!(p))).collect();

    let stdin = std::io::stdin();
    let mut out = std::io::stdout().lock();
    let mut pending: Vec<String> = Vec::new();
    let mut answered = 0usize;
    let mut flush = |pending: &mut Vec<String>, out: &mut std::io::StdoutLock| {
        while let Some(id) = pending.pop() {
            if crash_after.is_some_and(|k| answered >= k) {
                eprintln!("echo backend: simulated crash");
                std::process::exit(3);
            }
            let line = json!({ "id": id, "scores": scores });
            writeln!(out, "{line}").expect("stdout");
            answered += 1;
        }
        out.flush().expect("stdout");
    };
    for line in stdin.lock().lines() {
        let line = line.expect("stdin");
        if line.trim().is_empty() {
            continue;
        }
        let req: Value = serde_json::from_str(&line).unwrap_or_else(|e| usage(&format!("bad request: {e}")));
        let id = req["id"].as_str().unwrap_or_else(|| usage("request without id")).to_string();
        pending.insert(0, id);
        if pending.len() >= reverse {
            // pop() takes from the back, so reverse the buffer to answer newest first
            pending.reverse();
            flush(&mut pending, &mut out);
        }
    }
    pending.reverse();
    flush(&mut pending, &mut out);
}

fn usage(msg: &str) -> ! {
    eprintln!("ltcsum-echo-backend: {msg}");
    std::process::exit(2);
}
