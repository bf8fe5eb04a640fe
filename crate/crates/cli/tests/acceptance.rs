//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::Request;
use http_body_util::BodyExt;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use tower::ServiceExt;

use threadscope_core::analytics::{
    breakdown, classify, post_key, thread_series, tlc_series, AnalyticsConfig, CommentClass, MetricThresholds,
    Report, SortKey, TimeWindow, DEFAULT_TOXICITY_THRESHOLD, MAX_SPAN_SECS, MIN_SPAN_SECS,
};
use threadscope_core::ingest::{generate_synthetic, SpikeConfig, SyntheticConfig};
use threadscope_core::model::PostHeader;
use threadscope_core::{Comment, Corpus, ThreadTree};
use threadscope_server::{router, ActionLog, QueryParams, Service, Snapshot, Telemetry};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const T0: i64 = 1_700_000_000;
const DAY: i64 = 86_400;

// ---------------------------------------------------------------------------
// Independent oracles. None of these call into the analytics module.

fn in_window(t: i64, anchor: i64, span: i64) -> bool {
    anchor - span <= t && t <= anchor
}

fn flags(c: &Comment, tox: f64, score: i64) -> (bool, bool) {
    if c.tombstone {
        (false, false)
    } else {
        (c.toxicity.expect("scored") >= tox, c.score >= score)
    }
}

fn class_name(c: &Comment, tox: f64, score: i64) -> &'static str {
    match flags(c, tox, score) {
        (false, false) => "none",
        (true, false) => "toxic_only",
        (false, true) => "high_score_only",
        (true, true) => "both",
    }
}

/// Exact bin by scanning the published bin boundaries.
fn oracle_bin(t: i64, anchor: i64, span: i64, bins: usize) -> Option<usize> {
    if !in_window(t, anchor, span) {
        return None;
    }
    if t == anchor {
        return Some(bins - 1);
    }
    let scaled = i128::from(t - (anchor - span)) * bins as i128;
    (0..bins).find(|&i| i as i128 * i128::from(span) <= scaled && scaled < (i as i128 + 1) * i128::from(span))
}

fn oracle_key(t: &ThreadTree, key: SortKey, tox: f64, anchor: i64, span: i64) -> (i64, i64, f64) {
    let live: Vec<&Comment> = t.comments.values().filter(|c| in_window(c.created_at, anchor, span)).collect();
    let scored: Vec<&Comment> = live.iter().copied().filter(|c| !c.tombstone).collect();
    match key {
        SortKey::Recency => match live.iter().map(|c| c.created_at).max() {
            Some(m) => (1, m, 0.0),
            None => (0, t.post.created_at, 0.0),
        },
        SortKey::Toxicity => (
            scored.iter().filter(|c| c.toxicity.unwrap() >= tox).count() as i64,
            0,
            scored.iter().map(|c| c.toxicity.unwrap()).fold(f64::NEG_INFINITY, f64::max),
        ),
        SortKey::Score => match scored.iter().map(|c| c.score).max() {
            Some(m) => (1, m, 0.0),
            None => (0, 0, 0.0),
        },
        SortKey::Activity => (live.len() as i64, 0, 0.0),
    }
}

fn oracle_order(corpus: &Corpus, key: SortKey, tox: f64, anchor: i64, span: i64, show_inactive: bool) -> Vec<String> {
    let mut rows: Vec<(String, (i64, i64, f64))> = corpus
        .threads
        .iter()
        .filter(|t| show_inactive || t.comments.values().any(|c| in_window(c.created_at, anchor, span)))
        .map(|t| (t.post.id.clone(), oracle_key(t, key, tox, anchor, span)))
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    rows.sort_by(|a, b| (b.1 .0, b.1 .1).cmp(&(a.1 .0, a.1 .1)).then(b.1 .2.total_cmp(&a.1 .2)));
    rows.into_iter().map(|r| r.0).collect()
}

/// Depth-first display order with siblings sorted by (created_at, id).
fn oracle_preorder(t: &ThreadTree) -> Vec<String> {
    let mut kids: BTreeMap<Option<String>, Vec<&Comment>> = BTreeMap::new();
    for c in t.comments.values() {
        kids.entry(c.parent_id.clone()).or_default().push(c);
    }
    for v in kids.values_mut() {
        v.sort_by(|a, b| (a.created_at, &a.id).cmp(&(b.created_at, &b.id)));
    }
    let mut out = Vec::new();
    let mut stack: Vec<&Comment> = kids.get(&None).map(|v| v.iter().rev().copied().collect()).unwrap_or_default();
    while let Some(c) = stack.pop() {
        out.push(c.id.clone());
        if let Some(children) = kids.get(&Some(c.id.clone())) {
            stack.extend(children.iter().rev());
        }
    }
    out
}

fn oracle_ancestors(t: &ThreadTree, id: &str) -> Vec<String> {
    let mut chain = Vec::new();
    let mut cur = t.comments[id].parent_id.clone();
    while let Some(p) = cur {
        cur = t.comments[&p].parent_id.clone();
        chain.push(p);
    }
    chain.reverse();
    chain
}

fn root_of(t: &ThreadTree, id: &str) -> String {
    let mut id = id.to_string();
    while let Some(p) = t.comments[&id].parent_id.clone() {
        id = p;
    }
    id
}

fn fold_jsonl(text: &str) -> BTreeMap<String, String> {
    let mut rows: Vec<Value> = text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).unwrap()).collect();
    rows.sort_by(|a, b| {
        (a["acted_at"].as_i64().unwrap(), a["action_id"].as_str().unwrap())
            .cmp(&(b["acted_at"].as_i64().unwrap(), b["action_id"].as_str().unwrap()))
    });
    rows.into_iter()
        .map(|r| (r["comment_id"].as_str().unwrap().to_string(), r["kind"].as_str().unwrap().to_string()))
        .collect()
}

// ---------------------------------------------------------------------------
// Corpus builders.

fn random_corpus(rng: &mut StdRng) -> Corpus {
    let posts = rng.random_range(1..=10);
    let lo = rng.random_range(0..=40);
    let hi = rng.random_range(lo..=100);
    let mut cfg = SyntheticConfig::new(posts, (lo, hi), rng.random_range(1..=8), (T0, T0 + 2 * DAY));
    cfg.tombstone_rate = rng.random_range(0.0..0.1);
    cfg.reply_probability = rng.random_range(0.0..=1.0);
    generate_synthetic(&cfg, rng.random()).unwrap()
}

fn random_window(rng: &mut StdRng) -> TimeWindow {
    TimeWindow::new(rng.random_range(T0..=T0 + 3 * DAY), rng.random_range(MIN_SPAN_SECS..=MAX_SPAN_SECS)).unwrap()
}

fn table4_thread() -> ThreadTree {
    let mk = |id: &str, parent: Option<&str>, body: &str, t: i64, score: i64, tox: f64| Comment {
        id: id.into(),
        parent_id: parent.map(Into::into),
        post_id: "p".into(),
        author: "u".into(),
        body: body.into(),
        created_at: t,
        score,
        toxicity: Some(tox),
        depth: 0,
        orphaned: false,
        tombstone: false,
    };
    ThreadTree::build(
        PostHeader {
            id: "p".into(),
            title: "saw".into(),
            author: "op".into(),
            created_at: T0,
            score: 1,
        },
        vec![
            mk("sensor", None, "The saw is a capacitance-based sensor, not a metal detector.", T0 + 1, 31, 0.01),
            mk("retort", Some("sensor"), "What's your issue? Are you busy being a Jack ass", T0 + 2, 1, 0.66),
            mk("oregon", None, "Missed times to say Oregon turns into charred duck", T0 + 3, -10, 0.39),
        ],
    )
    .unwrap()
}

// ---------------------------------------------------------------------------
// Criteria.

fn classification_fixtures() -> Outcome {
    let t = table4_thread();
    let thr = MetricThresholds::default();
    for (id, want) in [
        ("sensor", CommentClass::HighScoreOnly),
        ("retort", CommentClass::ToxicOnly),
        ("oregon", CommentClass::ToxicOnly),
    ] {
        let got = classify(&t.comments[id], &thr).map_err(|e| e.to_string())?;
        ensure!(got == want, "{id}: got {got:?}, want {want:?}");
    }
    Ok(())
}

fn default_contract() -> Outcome {
    let cfg = AnalyticsConfig::default();
    ensure!(cfg.thresholds.toxicity_threshold == 0.2, "analytics default {}", cfg.thresholds.toxicity_threshold);
    ensure!(DEFAULT_TOXICITY_THRESHOLD == 0.2, "constant {}", DEFAULT_TOXICITY_THRESHOLD);
    let q = QueryParams::default();
    ensure!(q.thresholds.toxicity_threshold == 0.2, "server default {}", q.thresholds.toxicity_threshold);
    ensure!((MIN_SPAN_SECS, MAX_SPAN_SECS) == (480, 86_400), "span bounds {MIN_SPAN_SECS}..{MAX_SPAN_SECS}");
    for (asked, want) in [(0, 480), (479, 480), (480, 480), (3600, 3600), (86_400, 86_400), (86_401, 86_400), (i64::MAX, 86_400)] {
        let got = TimeWindow::clamped(0, asked).span;
        ensure!(got == want, "clamp({asked}) = {got}");
        let cfg = AnalyticsConfig {
            span: asked,
            ..AnalyticsConfig::default()
        };
        ensure!(cfg.span() == want, "config span({asked}) = {}", cfg.span());
        let q = QueryParams::parse(&format!("span_seconds={asked}")).map_err(|e| e.to_string())?;
        ensure!(q.span == want, "query span({asked}) = {}", q.span);
    }
    ensure!(TimeWindow::new(0, 479).is_err() && TimeWindow::new(0, 86_401).is_err(), "strict window accepted out-of-range span");
    Ok(())
}

fn bin_conservation() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xB1);
    let thr = MetricThresholds::default();
    for k in 0..100 {
        let corpus = random_corpus(&mut rng);
        ensure!(corpus.comment_count() <= 1000, "corpus {k} too large");
        let w = random_window(&mut rng);
        let bins = rng.random_range(1..=96);
        for t in &corpus.threads {
            let s = thread_series(t, &w, bins, &thr).map_err(|e| e.to_string())?;
            let brute = t.comments.values().filter(|c| in_window(c.created_at, w.anchor, w.span)).count() as u64;
            let sum: u64 = s.total.iter().sum();
            ensure!(sum == brute, "corpus {k} post {}: bins sum {sum}, brute {brute}", t.post.id);
            let mut per_bin = vec![0u64; bins];
            for c in t.comments.values() {
                if let Some(i) = oracle_bin(c.created_at, w.anchor, w.span, bins) {
                    per_bin[i] += 1;
                }
            }
            ensure!(per_bin == s.total, "corpus {k} post {}: per-bin mismatch", t.post.id);
        }
    }
    Ok(())
}

fn spike_salience() -> Outcome {
    let mut hits = 0;
    let mut misses = Vec::new();
    for seed in 0..20u64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let end = T0 + 2 * DAY;
        let center = rng.random_range(end - DAY + 3600..=end - 3600);
        let mut cfg = SyntheticConfig::new(3, (20, 80), 5, (T0, end));
        cfg.spikes = vec![SpikeConfig {
            post_index: 1,
            center,
            width: 600,
            count: 40,
            toxicity: 0.9,
        }];
        let corpus = generate_synthetic(&cfg, seed).unwrap();
        let w = TimeWindow::new(end, DAY).unwrap();
        let s = thread_series(&corpus.threads[1], &w, 48, &MetricThresholds::default()).map_err(|e| e.to_string())?;
        let peak = s.toxic_peak().ok_or("empty series")?;
        let expected = oracle_bin(center, w.anchor, w.span, 48).unwrap();
        if peak.abs_diff(expected) <= 1 {
            hits += 1;
        } else {
            misses.push(format!("seed {seed}: peak {peak}, spike bin {expected}"));
        }
    }
    ensure!(hits == 20, "{hits}/20 ({})", misses.join("; "));
    Ok(())
}

/// Toxic bar counts, toxic bins and toxicity sort keys for one threshold.
type Sweep = (Vec<u64>, Vec<Vec<u64>>, Vec<i64>);

fn threshold_monotonicity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x70);
    let mut violations = Vec::new();
    for k in 0..50 {
        let corpus = random_corpus(&mut rng);
        let w = random_window(&mut rng);
        let score = rng.random_range(-5..30);
        let mut prev: Option<Sweep> = None;
        for step in 0..=10 {
            let thr = MetricThresholds::new(step as f64 / 10.0, score).unwrap();
            let mut bars = Vec::new();
            let mut bins = Vec::new();
            let mut keys = Vec::new();
            for t in &corpus.threads {
                bars.push(breakdown(t, &thr, &w).map_err(|e| e.to_string())?.toxic());
                bins.push(thread_series(t, &w, 24, &thr).map_err(|e| e.to_string())?.toxic);
                keys.push(post_key(t, SortKey::Toxicity, &thr, &w).map_err(|e| e.to_string())?.primary);
            }
            if let Some((pb, pn, pk)) = &prev {
                let bar_ok = bars.iter().zip(pb).all(|(a, b)| a <= b);
                let bin_ok = bins.iter().zip(pn).all(|(a, b)| a.iter().zip(b).all(|(x, y)| x <= y));
                let key_ok = keys.iter().zip(pk).all(|(a, b)| a <= b);
                if !(bar_ok && bin_ok && key_ok) {
                    violations.push(format!("corpus {k} step {step}"));
                }
            }
            prev = Some((bars, bins, keys));
        }
    }
    ensure!(violations.is_empty(), "{} violations: {}", violations.len(), violations.join(", "));
    Ok(())
}

fn subtree_additivity() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0xAD);
    let thr = MetricThresholds::default();
    let mut trees = 0;
    while trees < 50 {
        let corpus = random_corpus(&mut rng);
        let w = random_window(&mut rng);
        let bins = rng.random_range(1..=96);
        for t in corpus.threads.iter().take(50 - trees) {
            trees += 1;
            let whole = thread_series(t, &w, bins, &thr).map_err(|e| e.to_string())?;
            let mut sum = vec![0u64; bins];
            for tlc in &t.post.tlc_ids {
                let s = tlc_series(t, tlc, &w, bins, &thr).map_err(|e| e.to_string())?;
                sum.iter_mut().zip(&s.total).for_each(|(a, b)| *a += b);
                // Each TLC series must also match a parent-walk flatten of its subtree.
                let mut own = vec![0u64; bins];
                for c in t.comments.values().filter(|c| root_of(t, &c.id) == *tlc) {
                    if let Some(i) = oracle_bin(c.created_at, w.anchor, w.span, bins) {
                        own[i] += 1;
                    }
                }
                ensure!(own == s.total, "post {} tlc {tlc}: subtree flatten mismatch", t.post.id);
            }
            ensure!(sum == whole.total, "post {}: TLC sum differs from thread", t.post.id);
        }
    }
    Ok(())
}

async fn call(app: &axum::Router, uri: &str) -> Value {
    let resp = app.clone().oneshot(Request::builder().uri(uri).body(Body::empty()).unwrap()).await.unwrap();
    assert!(resp.status().is_success(), "{uri}: {}", resp.status());
    serde_json::from_slice(&resp.into_body().collect().await.unwrap().to_bytes()).unwrap()
}

async fn sort_filter_pagination() -> Outcome {
    let mut rng = StdRng::seed_from_u64(0x50);
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let classes = ["none", "toxic_only", "high_score_only", "both"];
    for k in 0..8 {
        let posts = rng.random_range(5..=25);
        let mut cfg = SyntheticConfig::new(posts, (0, 500 / posts), 6, (T0, T0 + 2 * DAY));
        cfg.tombstone_rate = 0.05;
        let corpus = generate_synthetic(&cfg, rng.random()).unwrap();
        ensure!(corpus.comment_count() <= 500, "corpus {k} has {} comments", corpus.comment_count());
        let log = ActionLog::open(dir.path().join(format!("log{k}.jsonl"))).map_err(|e| e.to_string())?;
        let svc = Arc::new(Service::new(log, Arc::new(|| T0), Telemetry::default()));
        svc.install(Arc::new(Snapshot::new(corpus.clone(), None).map_err(|e| e.to_string())?));
        let app = router(svc, None);

        for _ in 0..3 {
            let w = random_window(&mut rng);
            let tox = (rng.random_range(0..=10) as f64) / 10.0;
            let score = rng.random_range(-3..20);
            let base = format!("anchor={}&span_seconds={}&toxicity_threshold={tox}&score_threshold={score}", w.anchor, w.span);
            for key in SortKey::ALL {
                for show_inactive in [false, true] {
                    let expected = oracle_order(&corpus, key, tox, w.anchor, w.span, show_inactive);
                    let size = rng.random_range(1..=7);
                    let mut joined = Vec::new();
                    let mut page = 0;
                    loop {
                        let uri = format!("/posts?{base}&sort={}&show_inactive={show_inactive}&page={page}&page_size={size}", key.as_str());
                        let body = call(&app, &uri).await;
                        ensure!(body["total"] == expected.len(), "corpus {k} {key:?}: total {} vs {}", body["total"], expected.len());
                        let items = body["posts"].as_array().unwrap();
                        if items.is_empty() {
                            break;
                        }
                        for p in items {
                            let id = p["id"].as_str().unwrap();
                            let t = corpus.thread(id).unwrap();
                            let mut bar = [0u64; 4];
                            for c in t.comments.values().filter(|c| in_window(c.created_at, w.anchor, w.span)) {
                                bar[classes.iter().position(|n| *n == class_name(c, tox, score)).unwrap()] += 1;
                            }
                            let got = [&p["breakdown"]["neither"], &p["breakdown"]["toxic_only"], &p["breakdown"]["high_score_only"], &p["breakdown"]["both"]]
                                .map(|v| v.as_u64().unwrap());
                            ensure!(got == bar, "corpus {k} post {id}: breakdown {got:?} vs {bar:?}");
                            joined.push(id.to_string());
                        }
                        page += 1;
                    }
                    ensure!(joined == expected, "corpus {k} {key:?} inactive={show_inactive}: pages {joined:?} vs {expected:?}");
                }
            }

            let thread = &corpus.threads[rng.random_range(0..corpus.threads.len())];
            let preorder = oracle_preorder(thread);
            for mask in 0u8..16 {
                let chosen: Vec<&str> = (0..4).filter(|i| mask & (1 << i) != 0).map(|i| classes[i]).collect();
                let filter: String = if chosen.is_empty() { "filter=".into() } else { chosen.iter().map(|c| format!("filter={c}")).collect::<Vec<_>>().join("&") };
                let body = call(&app, &format!("/posts/{}?{base}&{filter}", thread.post.id)).await;
                let expected: Vec<(String, Vec<String>)> = preorder
                    .iter()
                    .filter(|id| chosen.contains(&class_name(&thread.comments[*id], tox, score)))
                    .map(|id| (id.clone(), oracle_ancestors(thread, id)))
                    .collect();
                let got: Vec<(String, Vec<String>)> = serde_json::from_value::<Vec<Value>>(body["matches"].clone())
                    .unwrap()
                    .into_iter()
                    .map(|m| (m["id"].as_str().unwrap().to_string(), serde_json::from_value(m["ancestors"].clone()).unwrap()))
                    .collect();
                ensure!(got == expected, "corpus {k} post {} filter {chosen:?}: matches differ", thread.post.id);
                let shown: BTreeSet<String> = expected.iter().flat_map(|(id, anc)| anc.iter().cloned().chain([id.clone()])).collect();
                let listed: Vec<String> = body["comments"].as_array().unwrap().iter().map(|c| c["id"].as_str().unwrap().to_string()).collect();
                let want: Vec<String> = preorder.iter().filter(|id| shown.contains(*id)).cloned().collect();
                ensure!(listed == want, "corpus {k} post {} filter {chosen:?}: comment list differs", thread.post.id);
                for c in body["comments"].as_array().unwrap() {
                    let id = c["id"].as_str().unwrap();
                    ensure!(c["class"] == class_name(&thread.comments[id], tox, score), "class of {id}");
                }
            }
        }
    }
    Ok(())
}

fn bin_path() -> &'static str {
    env!("CARGO_BIN_EXE_threadscope")
}

fn spawn_server(corpus: &Path, log: &Path) -> Result<(Child, String), String> {
    let mut child = Command::new(bin_path())
        .args(["serve", "--addr", "127.0.0.1:0", "--corpus"])
        .arg(corpus)
        .arg("--log")
        .arg(log)
        .env_remove("THREADSCOPE_ADDR")
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).map_err(|e| e.to_string())?;
    let addr = line.trim().strip_prefix("listening on http://").ok_or(format!("unexpected banner {line:?}"))?;
    Ok((child, addr.to_string()))
}

fn http(addr: &str, method: &str, path: &str, body: Option<&Value>) -> Result<(u16, Value), String> {
    let mut stream = TcpStream::connect(addr).map_err(|e| e.to_string())?;
    let payload = body.map(|b| b.to_string()).unwrap_or_default();
    write!(
        stream,
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{payload}",
        payload.len()
    )
    .map_err(|e| e.to_string())?;
    let mut raw = String::new();
    stream.read_to_string(&mut raw).map_err(|e| e.to_string())?;
    let status = raw.split_whitespace().nth(1).and_then(|s| s.parse().ok()).ok_or("bad status line")?;
    let body = raw.split_once("\r\n\r\n").map(|x| x.1).unwrap_or("");
    Ok((status, serde_json::from_str(body).map_err(|e| format!("{e}: {body}"))?))
}

fn durability() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let corpus_path = dir.path().join("corpus.json");
    let log_path = dir.path().join("actions.jsonl");
    let corpus = generate_synthetic(&SyntheticConfig::new(4, (10, 30), 4, (T0, T0 + DAY)), 42).unwrap();
    corpus.save(&corpus_path).map_err(|e| e.to_string())?;
    let ids: Vec<String> = corpus.comments().map(|c| c.id.clone()).collect();

    let (mut first, addr) = spawn_server(&corpus_path, &log_path)?;
    let mut rng = StdRng::seed_from_u64(0xD0);
    for n in 0..50 {
        let id = &ids[rng.random_range(0..ids.len())];
        let kind = ["approve", "remove", "report"][rng.random_range(0..3)];
        let (status, _) = http(&addr, "POST", "/actions", Some(&json!({"comment_id": id, "kind": kind, "actor": "acc"})))?;
        ensure!(status == 201, "action {n}: status {status}");
    }
    let (_, before) = http(&addr, "GET", "/actions", None)?;
    // Hard kill: nothing gets a chance to flush after the acknowledgements.
    first.kill().map_err(|e| e.to_string())?;
    first.wait().map_err(|e| e.to_string())?;

    let (mut second, addr) = spawn_server(&corpus_path, &log_path)?;
    let (_, after) = http(&addr, "GET", "/actions", None)?;
    let thread_states: BTreeMap<String, String> = {
        let mut m = BTreeMap::new();
        for t in &corpus.threads {
            let (_, detail) = http(&addr, "GET", &format!("/posts/{}", t.post.id), None)?;
            for c in detail["comments"].as_array().unwrap() {
                if let Some(k) = c["moderation"].as_str() {
                    m.insert(c["id"].as_str().unwrap().to_string(), k.to_string());
                }
            }
        }
        m
    };
    second.kill().ok();
    second.wait().ok();

    let oracle = fold_jsonl(&std::fs::read_to_string(&log_path).map_err(|e| e.to_string())?);
    let replayed: BTreeMap<String, String> = serde_json::from_value(after["effective"].clone()).map_err(|e| e.to_string())?;
    ensure!(after["actions"].as_array().map(Vec::len) == Some(50), "replayed {} actions", after["actions"]);
    ensure!(before == after, "log view changed across restart");
    ensure!(replayed == oracle, "effective states differ from independent fold");
    ensure!(thread_states == oracle, "thread annotations differ from independent fold");
    Ok(())
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(bin_path()).args(args).output().map_err(|e| e.to_string())?;
    ensure!(out.status.success(), "{args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    Ok(())
}

fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = |n: &str| dir.path().join(n);
    let s = |path: &std::path::PathBuf| path.to_str().unwrap().to_string();
    std::fs::write(
        p("synth.json"),
        json!({
            "subreddit": "e2e", "posts": 20, "comments_per_post": {"min": 10, "max": 60}, "max_depth": 6,
            "time_range": {"start": T0, "end": T0 + DAY}, "prescore": false,
            "spikes": [{"post_index": 3, "center": T0 + DAY - 5000, "width": 900, "count": 30, "toxicity": 0.95}]
        })
        .to_string(),
    )
    .map_err(|e| e.to_string())?;
    run_cli(&["synth", "--config", &s(&p("synth.json")), "--seed", "11", "--out", &s(&p("corpus.json"))])?;
    let raw = Corpus::load(&p("corpus.json")).map_err(|e| format!("synth output: {e}"))?;
    run_cli(&["score", "--in", &s(&p("corpus.json")), "--provider", "lexicon", "--out", &s(&p("scored.json"))])?;
    let scored = Corpus::load(&p("scored.json")).map_err(|e| format!("score output: {e}"))?;
    ensure!(scored.comment_count() == raw.comment_count(), "scoring changed comment count");
    ensure!(scored.comments().all(|c| c.tombstone || c.toxicity.is_some()), "unscored comments remain");
    let anchor = T0 + DAY;
    let window = format!("{anchor},{}", 6 * 3600);
    run_cli(&["report", "--in", &s(&p("scored.json")), "--window", &window, "--out", &s(&p("report.json"))])?;
    let text = std::fs::read_to_string(p("report.json")).map_err(|e| e.to_string())?;
    let report: Report = serde_json::from_str(&text).map_err(|e| format!("report schema: {e}"))?;
    ensure!(report.schema_version == 1, "report schema_version {}", report.schema_version);
    ensure!(report.posts.len() == scored.threads.len(), "report post count");
    for (pr, t) in report.posts.iter().zip(&scored.threads) {
        let mut bar = [0u64; 4];
        let mut bins = vec![0u64; report.bins];
        for c in t.comments.values() {
            if in_window(c.created_at, anchor, 6 * 3600) {
                let (x, y) = flags(c, 0.2, 10);
                bar[usize::from(x) + 2 * usize::from(y)] += 1;
            }
            if let Some(i) = oracle_bin(c.created_at, anchor, 6 * 3600, report.bins) {
                bins[i] += 1;
            }
        }
        let got = [pr.breakdown.neither, pr.breakdown.toxic_only, pr.breakdown.high_score_only, pr.breakdown.both];
        ensure!(got == bar, "post {}: report breakdown {got:?} vs oracle {bar:?}", t.post.id);
        ensure!(pr.series.total == bins, "post {}: report series differs", t.post.id);
    }
    let order = oracle_order(&scored, SortKey::Toxicity, 0.2, anchor, 6 * 3600, true);
    ensure!(report.orderings[&SortKey::Toxicity] == order, "report toxicity ordering differs");

    let (mut child, addr) = spawn_server(&p("scored.json"), &p("log.jsonl"))?;
    let result = (|| {
        let (status, health) = http(&addr, "GET", "/health", None)?;
        ensure!(status == 200 && health["corpus_loaded"] == true, "health {status} {health}");
        let (status, page) = http(&addr, "GET", &format!("/posts?anchor={anchor}&span_seconds=21600&sort=toxicity"), None)?;
        ensure!(status == 200, "posts status {status}");
        let active = oracle_order(&scored, SortKey::Toxicity, 0.2, anchor, 6 * 3600, false);
        ensure!(page["total"] == active.len(), "served total {} vs {}", page["total"], active.len());
        let (status, hist) = http(&addr, "GET", "/histograms", None)?;
        let n: u64 = hist["toxicity"]["counts"].as_array().ok_or("histogram shape")?.iter().filter_map(Value::as_u64).sum();
        ensure!(status == 200 && n == scored.comments().filter(|c| !c.tombstone).count() as u64, "histogram total {n}");
        Ok(())
    })();
    child.kill().ok();
    child.wait().ok();
    result
}

struct Criterion {
    name: &'static str,
    budget: Duration,
    run: Box<dyn Fn() -> Outcome>,
}

fn main() {
    // Cargo passes harness flags such as `--nocapture` or a name filter; a
    // filter that matches nothing here skips the gate.
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let runtime = Arc::new(runtime);
    let rt = runtime.clone();

    let criteria = vec![
        Criterion { name: "classification fixtures", budget: Duration::from_secs(1), run: Box::new(classification_fixtures) },
        Criterion { name: "default contract", budget: Duration::from_secs(1), run: Box::new(default_contract) },
        Criterion { name: "bin conservation oracle", budget: Duration::from_secs(30), run: Box::new(bin_conservation) },
        Criterion { name: "spike salience", budget: Duration::from_secs(10), run: Box::new(spike_salience) },
        Criterion { name: "threshold monotonicity", budget: Duration::from_secs(60), run: Box::new(threshold_monotonicity) },
        Criterion { name: "subtree additivity", budget: Duration::from_secs(60), run: Box::new(subtree_additivity) },
        Criterion {
            name: "sort/filter/pagination oracle",
            budget: Duration::from_secs(120),
            run: Box::new(move || rt.block_on(sort_filter_pagination())),
        },
        Criterion { name: "durability", budget: Duration::from_secs(60), run: Box::new(durability) },
        Criterion { name: "end-to-end pipeline", budget: Duration::from_secs(60), run: Box::new(end_to_end) },
    ];

    let mut failed = 0;
    let mut ran = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| c.name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| (c.run)())).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or("panic".into()))
        });
        let elapsed = start.elapsed();
        let outcome = outcome.and_then(|()| {
            if elapsed > c.budget {
                Err(format!("took {:.2}s, budget {:.0}s", elapsed.as_secs_f64(), c.budget.as_secs_f64()))
            } else {
                Ok(())
            }
        });
        match outcome {
            Ok(()) => println!("PASS  {:<32} {:>7.2}s", c.name, elapsed.as_secs_f64()),
            Err(e) => {
                failed += 1;
                println!("FAIL  {:<32} {:>7.2}s  {e}", c.name, elapsed.as_secs_f64());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
