//! Shared oracles and fixtures for the integration tests.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;

use posbias::posmap::SegmentationPlan;

pub const BIN: &str = env!("CARGO_BIN_EXE_posbias");

/// Brute-force check that `plan` is the balanced partition of `0..n` into `k`
/// contiguous segments with the oversized ones first.
pub fn check_partition(plan: &SegmentationPlan, n: usize, k: usize) -> Result<(), String> {
    let intervals = plan.intervals();
    if intervals.len() != k {
        return Err(format!("{} segments, expected {k}", intervals.len()));
    }
    let mut owner = vec![0usize; n];
    for (j, &(lo, hi)) in intervals.iter().enumerate() {
        if lo > hi || hi >= n {
            return Err(format!("segment {} = [{lo}, {hi}] out of range", j + 1));
        }
        for slot in &mut owner[lo..=hi] {
            if *slot != 0 {
                return Err(format!("index covered twice by segments {} and {}", *slot, j + 1));
            }
            *slot = j + 1;
        }
    }
    if let Some(i) = owner.iter().position(|&o| o == 0) {
        return Err(format!("index {i} not covered"));
    }
    // contiguous and ordered: owners never decrease along the article
    if owner.windows(2).any(|w| w[1] < w[0]) {
        return Err("segments out of order".into());
    }
    let sizes: Vec<usize> = intervals.iter().map(|&(lo, hi)| hi - lo + 1).collect();
    let small = *sizes.iter().min().unwrap();
    let big = *sizes.iter().max().unwrap();
    if big - small > 1 {
        return Err(format!("sizes range from {small} to {big}"));
    }
    // floor(n / k) by repeated subtraction
    let (mut c, mut rest) = (0, n);
    while rest >= k {
        rest -= k;
        c += 1;
    }
    let d = rest;
    if sizes.iter().any(|&s| s != c && s != c + 1) {
        return Err(format!("size outside {{{c}, {}}}", c + 1));
    }
    let oversized = sizes.iter().filter(|&&s| s == c + 1).count();
    if oversized != d {
        return Err(format!("{oversized} oversized segments, expected {d}"));
    }
    if sizes.iter().take(d).any(|&s| s != c + 1) {
        return Err("oversized segments do not come first".into());
    }
    for (i, &o) in owner.iter().enumerate() {
        if plan.segment_of(i) != o {
            return Err(format!("segment_of({i}) = {}, expected {o}", plan.segment_of(i)));
        }
    }
    Ok(())
}

/// Minimum-cost transport between two distributions on a shared support,
/// solved as a min-cost flow with successive shortest paths (Bellman-Ford).
pub fn transport_cost(p: &[f64], q: &[f64], x: &[f64]) -> f64 {
    const EPS: f64 = 1e-15;
    let k = p.len();
    let (source, sink) = (0, 2 * k + 1);
    let nodes = 2 * k + 2;
    struct Edge {
        to: usize,
        cap: f64,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |edges: &mut Vec<Edge>, from: usize, to: usize, cap: f64, cost: f64| {
        adj[from].push(edges.len());
        edges.push(Edge { to, cap, cost });
        adj[to].push(edges.len());
        edges.push(Edge { to: from, cap: 0.0, cost: -cost });
    };
    for i in 0..k {
        add(&mut edges, source, 1 + i, p[i], 0.0);
        add(&mut edges, 1 + k + i, sink, q[i], 0.0);
        for j in 0..k {
            add(&mut edges, 1 + i, 1 + k + j, f64::INFINITY, (x[i] - x[j]).abs());
        }
    }

    let mut total = 0.0;
    loop {
        let mut dist = vec![f64::INFINITY; nodes];
        let mut via: Vec<Option<usize>> = vec![None; nodes];
        dist[source] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if dist[u] == f64::INFINITY {
                    continue;
                }
                for &e in &adj[u] {
                    let edge = &edges[e];
                    if edge.cap > EPS && dist[u] + edge.cost < dist[edge.to] - 1e-15 {
                        dist[edge.to] = dist[u] + edge.cost;
                        via[edge.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if dist[sink] == f64::INFINITY {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while let Some(e) = via[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = via[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            total += push * edges[e].cost;
            v = edges[e ^ 1].to;
        }
    }
    total
}

/// Minimal single-threaded HTTP/1.1 server answering every POST via `handler`.
pub struct MockServer {
    pub url: String,
    pub hits: Arc<AtomicUsize>,
}

impl MockServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(usize, &str, &str) -> (u16, String) + Send + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let hits = Arc::new(AtomicUsize::new(0));
        let counter = Arc::clone(&hits);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let n = counter.fetch_add(1, Ordering::SeqCst);
                let _ = serve(stream, |headers, body| handler(n, headers, body));
            }
        });
        Self { url, hits }
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, handler: impl Fn(&str, &str) -> (u16, String)) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut headers = String::new();
    let mut length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            if name.eq_ignore_ascii_case("content-length") {
                length = value.trim().parse().unwrap_or(0);
            }
        }
        headers.push_str(&line);
    }
    let mut body = vec![0u8; length];
    reader.read_exact(&mut body)?;
    let (status, reply) = handler(&headers, &String::from_utf8_lossy(&body));
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {status} Mock\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
        reply.len()
    )?;
    stream.flush()
}

/// Chat-completion reply body carrying `content`.
pub fn chat_reply(content: &str) -> String {
    serde_json::json!({
        "choices": [{"index": 0, "finish_reason": "stop", "message": {"role": "assistant", "content": content}}]
    })
    .to_string()
}

pub fn posbias(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn point_mass(k: usize, segment: usize) -> String {
    (1..=k)
        .map(|j| if j == segment { "1" } else { "0" })
        .collect::<Vec<_>>()
        .join(",")
}

/// Spec with a tail-heavy gold target and a lead-heavy model.
pub fn head_tail_spec(num_articles: usize, sentences: usize, k: usize, summary_sentences: usize) -> String {
    format!(
        "num_articles = {num_articles}\n\
         sentences_per_article = {sentences}\n\
         k = {k}\n\
         summary_sentences_per_article = {summary_sentences}\n\
         gold_target = {}\n\
         model:lead = {}\n\
         allocation = deterministic_largest_remainder\n\
         seed = 7\n",
        point_mass(k, k),
        point_mass(k, 1)
    )
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Reads the single data row of `metrics.csv` for `model`.
pub fn metrics_row(dir: &Path, model: &str) -> Vec<String> {
    let mut rdr = csv::Reader::from_path(dir.join("metrics.csv")).unwrap();
    rdr.records()
        .map(|r| r.unwrap())
        .find(|r| &r[0] == model)
        .map(|r| r.iter().map(str::to_string).collect())
        .unwrap_or_else(|| panic!("no metrics row for {model}"))
}
