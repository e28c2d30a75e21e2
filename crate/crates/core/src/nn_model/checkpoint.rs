//! Parameter checkpoints: CSV with header `kind,i,j,value`.
//!
//! `kind` is one of `a`, `W`, `b`, `b0`. Vectors use `j = 0`; `b0` uses
//! `i = j = 0`.

use std::path::Path;

use crate::error::{Error, Result};
use crate::text::{data_lines, fmt_f64, parse_f64, read_to_string, write_string};

use super::NetParams;

pub fn render_checkpoint(params: &NetParams) -> String {
    let mut out = String::from("kind,i,j,value\n");
    for (i, v) in params.a.iter().enumerate() {
        out.push_str(&format!("a,{i},0,{}\n", fmt_f64(*v)));
    }
    for i in 0..params.w.rows() {
        for (j, v) in params.w.row(i).iter().enumerate() {
            out.push_str(&format!("W,{i},{j},{}\n", fmt_f64(*v)));
        }
    }
    for (i, v) in params.b.iter().enumerate() {
        out.push_str(&format!("b,{i},0,{}\n", fmt_f64(*v)));
    }
    out.push_str(&format!("b0,0,0,{}\n", fmt_f64(params.b0)));
    out
}

pub fn parse_checkpoint(text: &str) -> Result<NetParams> {
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, "kind,i,j,value")) => {}
        Some((n, other)) => return Err(Error::parse(n, format!("expected header kind,i,j,value, got {other:?}"))),
        None => return Err(Error::parse(1, "empty checkpoint")),
    }
    let mut entries = Vec::new();
    for (n, line) in lines {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::parse(n, format!("expected 4 fields, found {}", fields.len())));
        }
        let idx = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::parse(n, format!("bad index {s:?}")));
        let (i, j) = (idx(fields[1])?, idx(fields[2])?);
        let v = parse_f64(fields[3], n)?;
        match fields[0] {
            "a" | "W" | "b" | "b0" => entries.push((n, fields[0].to_string(), i, j, v)),
            k => return Err(Error::parse(n, format!("unknown kind {k:?}"))),
        }
    }
    let m = entries.iter().filter(|e| e.1 == "a").map(|e| e.2 + 1).max().unwrap_or(0);
    let d = entries.iter().filter(|e| e.1 == "W").map(|e| e.3 + 1).max().unwrap_or(0);
    let mut p = NetParams::zeros(m, d);
    let mut seen_a = vec![false; m];
    let mut seen_w = vec![false; m * d];
    let mut seen_b = vec![false; m];
    let mut seen_b0 = false;
    for (n, kind, i, j, v) in entries {
        let out_of_range = || Error::parse(n, format!("index ({i},{j}) out of range for m={m}, d={d}"));
        let dup = || Error::parse(n, format!("duplicate entry {kind},{i},{j}"));
        match kind.as_str() {
            "a" | "b" => {
                if i >= m || j != 0 {
                    return Err(out_of_range());
                }
                let (seen, vec) = if kind == "a" { (&mut seen_a, &mut p.a) } else { (&mut seen_b, &mut p.b) };
                if std::mem::replace(&mut seen[i], true) {
                    return Err(dup());
                }
                vec[i] = v;
            }
            "W" => {
                if i >= m || j >= d {
                    return Err(out_of_range());
                }
                if std::mem::replace(&mut seen_w[i * d + j], true) {
                    return Err(dup());
                }
                p.w.set(i, j, v);
            }
            _ => {
                if i != 0 || j != 0 {
                    return Err(out_of_range());
                }
                if std::mem::replace(&mut seen_b0, true) {
                    return Err(dup());
                }
                p.b0 = v;
            }
        }
    }
    if !(seen_a.iter().chain(&seen_w).chain(&seen_b).all(|&s| s) && seen_b0) {
        return Err(Error::parse(0, "checkpoint is missing entries"));
    }
    if m > 0 && d == 0 {
        return Err(Error::parse(0, "checkpoint has no W entries"));
    }
    NetParams::new(p.a, p.w, p.b, p.b0)
}

pub fn save_checkpoint(params: &NetParams, path: &Path) -> Result<()> {
    write_string(path, &render_checkpoint(params))
}

pub fn load_checkpoint(path: &Path) -> Result<NetParams> {
    parse_checkpoint(&read_to_string(path)?)
}
