//! Release acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any fails.

mod common;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};
use std::panic::AssertUnwindSafe;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use memora_core::chunker::SplitLevel;
use memora_core::{
    split, BuiltinEmbedder, ChunkConfig, EmbeddingVector, MemoryRecord, MemoryStore, RecordId, TextEmbedder, UserId,
    DIMENSION,
};
use memora_server::api::ListQuery;
use memora_server::client::ApiClient;
use memora_server::eval::{self, load_suite, HttpTarget, InProcessTarget, RunOptions};
use memora_server::synthetic::CorpusConfig;
use memora_server::{Service, ServiceConfig};

/// Runs a future to completion on a fresh multi-threaded runtime.
fn block<F: std::future::Future>(f: F) -> F::Output {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .unwrap()
        .block_on(f)
}

type Verdict = Result<String, String>;
type Criterion = (&'static str, fn() -> Verdict);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn percentile(samples: &mut [f64], p: f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * samples.len() as f64).ceil().max(1.0) as usize;
    samples[rank.min(samples.len()) - 1]
}

// ---------------------------------------------------------------- chunker

fn random_text(rng: &mut ChaCha8Rng) -> String {
    let len = rng.random_range(0..=5000);
    let style = rng.random_range(0..5);
    let mut out = String::with_capacity(len * 2);
    for _ in 0..len {
        let c = match style {
            // Any scalar value.
            0 => loop {
                if let Some(c) = char::from_u32(rng.random_range(0..=0x10FFFF)) {
                    break c;
                }
            },
            // Words.
            1 => match rng.random_range(0..8) {
                0 => ' ',
                _ => char::from(b'a' + rng.random_range(0..26)),
            },
            // Lines of words.
            2 => match rng.random_range(0..40) {
                0 => '\n',
                1..=6 => ' ',
                _ => ['e', 'é', 'ж', '漢', '🙂'][rng.random_range(0..5)],
            },
            // Paragraphs, with some oversized ones.
            3 => match rng.random_range(0..400) {
                0 | 1 => '\n',
                2..=50 => ' ',
                _ => 'p',
            },
            // Separator-free.
            _ => ['x', 'é', '漢', '🙂', '\t', '-'][rng.random_range(0..6)],
        };
        out.push(c);
    }
    out
}

fn check_split(text: &str, config: &ChunkConfig) -> Result<usize, String> {
    let chars: Vec<char> = text.chars().collect();
    let chunks = split(text, config);
    if chars.is_empty() {
        return ensure(chunks.is_empty(), || "empty text produced chunks".into()).map(|_| 0);
    }
    let separator_free = !chars.iter().any(|&c| c == ' ' || c == '\n');
    let mut covered = 0;
    for (i, c) in chunks.iter().enumerate() {
        let len = c.end_offset - c.start_offset;
        ensure(len > 0 && len <= 200, || format!("chunk of {len} chars"))?;
        let expected: String = chars[c.start_offset..c.end_offset].iter().collect();
        ensure(c.text == expected, || format!("chunk {i} differs from its source range"))?;
        ensure(c.start_offset <= covered && c.end_offset > covered, || format!("coverage broken at chunk {i}"))?;
        covered = c.end_offset;
        if separator_free && chars.len() > 200 {
            ensure(c.start_offset == i * 150 && c.split_level == SplitLevel::Character, || {
                format!("chunk {i} starts at {} instead of {}", c.start_offset, i * 150)
            })?;
        }
    }
    ensure(covered == chars.len(), || "tail not covered".into())?;
    Ok(chunks.len())
}

fn chunker_properties() -> Verdict {
    let config = ChunkConfig::default();
    ensure(config.stride() == 150, || format!("stride {}", config.stride()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let texts: Vec<String> = (0..10_000).map(|_| random_text(&mut rng)).collect();
    let started = Instant::now();
    let mut chunks = 0;
    for text in &texts {
        chunks += check_split(text, &config)?;
    }
    let secs = started.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1}s"))?;
    Ok(format!("10000 strings, {chunks} chunks checked in {secs:.2}s"))
}

// ---------------------------------------------------------------- retrieval

fn random_unit(rng: &mut ChaCha8Rng) -> EmbeddingVector {
    let raw: Vec<f64> = (0..DIMENSION).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingVector::normalize(&raw).unwrap()
}

/// Independent reference: every score recomputed from raw components, then a
/// full sort by score, recency and id.
fn scan(
    records: &[(usize, i64, String, usize)],
    pool: &[EmbeddingVector],
    user: usize,
    query: &EmbeddingVector,
    k: usize,
) -> Vec<String> {
    let q = query.as_slice();
    let q_norm = q.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt();
    let pool_scores: Vec<f64> = pool
        .iter()
        .map(|v| {
            let v = v.as_slice();
            let mut dot = 0.0;
            let mut sq = 0.0;
            for i in 0..DIMENSION {
                dot += f64::from(q[i]) * f64::from(v[i]);
                sq += f64::from(v[i]) * f64::from(v[i]);
            }
            (dot / (q_norm * sq.sqrt())).clamp(-1.0, 1.0)
        })
        .collect();
    let mut mine: Vec<(f64, i64, &str)> = records
        .iter()
        .filter(|r| r.0 == user)
        .map(|r| (pool_scores[r.3], r.1, r.2.as_str()))
        .collect();
    mine.sort_by(|a, b| match b.0.partial_cmp(&a.0).unwrap() {
        Ordering::Equal => b.1.cmp(&a.1).then_with(|| a.2.cmp(b.2)),
        other => other,
    });
    mine.into_iter().take(k).map(|r| r.2.to_string()).collect()
}

fn retrieval_oracle() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let base = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let users: Vec<UserId> = (0..3).map(|u| UserId::new(format!("user{u}"))).collect();
    let mut total_records = 0;
    let mut queries = 0;
    let started = Instant::now();
    for store_no in 0..1000 {
        let n = rng.random_range(0..=2000);
        let pool: Vec<EmbeddingVector> = (0..rng.random_range(1..=400)).map(|_| random_unit(&mut rng)).collect();
        let store = MemoryStore::new();
        let mut meta = Vec::with_capacity(n);
        let mut batch = Vec::with_capacity(n);
        for i in 0..n {
            let user = rng.random_range(0..users.len());
            let minutes = rng.random_range(0..60);
            let id = format!("{:04x}-{i}", rng.random_range(0..0x1_0000u32));
            let slot = rng.random_range(0..pool.len());
            batch.push(MemoryRecord {
                record_id: RecordId::new(id.clone()),
                user_id: users[user].clone(),
                text: id.clone(),
                timestamp: base + Duration::minutes(minutes),
                source_id: id.clone(),
                chunk_index: 0,
                vector: pool[slot].clone(),
            });
            meta.push((user, minutes, id, slot));
        }
        store.add_all(batch).map_err(|e| e.to_string())?;
        total_records += n;
        for _ in 0..20 {
            let user = rng.random_range(0..users.len());
            let k = rng.random_range(1..=5);
            let query = if rng.random_bool(0.3) { pool[rng.random_range(0..pool.len())].clone() } else { random_unit(&mut rng) };
            let got: Vec<String> = store
                .top_k(&users[user], &query, k)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|r| r.record.record_id.to_string())
                .collect();
            let want = scan(&meta, &pool, user, &query, k);
            ensure(got == want, || format!("store {store_no}: got {got:?}, oracle {want:?}"))?;
            queries += 1;
        }
    }
    Ok(format!(
        "1000 stores ({total_records} records), {queries} queries, 0 mismatches in {:.1}s",
        started.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- synthetic

fn synthetic_accuracy() -> Verdict {
    block(async {
        let service = Arc::new(Service::new(ServiceConfig::default()).unwrap());
        let config = CorpusConfig { seed: 42, topics: 5, entries_per_topic: 40, k: 3, ..CorpusConfig::default() };
        let report = eval::run_synthetic(&config, &mut InProcessTarget::new(service), RunOptions::default())
            .await
            .map_err(|e| e.to_string())?;
        let acc = report.retrieval_accuracy.unwrap_or(0.0);
        if acc >= 0.90 {
            Ok(format!("accuracy {acc:.3} over {} queries (k=3, seed 42)", report.queries.len()))
        } else if acc >= 0.85 {
            eprintln!("WARN synthetic accuracy {acc:.3} is below 0.90 but above the 0.85 floor");
            Ok(format!("accuracy {acc:.3} (warning: under 0.90)"))
        } else {
            Err(format!("accuracy {acc:.3} < 0.85"))
        }
    })
}

// ---------------------------------------------------------------- latency

fn latency() -> Verdict {
    block(async {
        let app = common::spawn_default().await;
        let mut client = ApiClient::new(&app.base);
        client.register("bench", "pw123456").await.map_err(|e| e.to_string())?;
        let login = client.login("bench", "pw123456").await.map_err(|e| e.to_string())?;
        let user = UserId::new(login.user_id);

        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let words = ["river", "budget", "guitar", "doctor", "netflix", "garden", "lisbon", "pasta", "meeting", "sunrise"];
        let sentence = |rng: &mut ChaCha8Rng| -> String {
            (0..12).map(|_| words[rng.random_range(0..words.len())]).collect::<Vec<_>>().join(" ")
        };
        let base = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
        for i in 0..10_000 {
            let text = format!("{} #{i}", sentence(&mut rng));
            app.service
                .ingest_for(&user, &text, Some(base + Duration::seconds(i)))
                .await
                .map_err(|e| e.to_string())?;
        }
        ensure(app.service.store().count(&user) == 10_000, || "ingest count".into())?;

        let mut top_k_ms = Vec::new();
        for _ in 0..200 {
            let q = BuiltinEmbedder.embed(&sentence(&mut rng)).unwrap();
            let t = Instant::now();
            let r = app.service.store().top_k(&user, &q, 3).map_err(|e| e.to_string())?;
            top_k_ms.push(t.elapsed().as_secs_f64() * 1e3);
            ensure(r.len() == 3, || "short result".into())?;
        }
        let mut chat_ms = Vec::new();
        for _ in 0..100 {
            let query = sentence(&mut rng);
            let t = Instant::now();
            client.chat(&query, None).await.map_err(|e| e.to_string())?;
            chat_ms.push(t.elapsed().as_secs_f64() * 1e3);
        }
        let top_k_p95 = percentile(&mut top_k_ms, 95.0);
        let chat_p95 = percentile(&mut chat_ms, 95.0);
        let summary = format!("10000 records: top_k p95 {top_k_p95:.2} ms, HTTP chat p95 {chat_p95:.2} ms");
        ensure(top_k_p95 < 50.0 && chat_p95 < 200.0, || summary.clone())?;
        Ok(summary)
    })
}

// ---------------------------------------------------------------- honesty

const FACTUAL_QUESTIONS: [&str; 20] = [
    "Who is the president of Nigeria?",
    "What is the capital of Australia?",
    "How many moons does Mars have?",
    "Who wrote War and Peace?",
    "What is the boiling point of water at sea level in Fahrenheit?",
    "When did the Berlin Wall fall?",
    "What is the chemical symbol for gold?",
    "Who painted the Mona Lisa?",
    "How tall is Mount Everest?",
    "What is the largest ocean on Earth?",
    "Who discovered penicillin?",
    "What year did the first moon landing happen?",
    "What is the speed of light in a vacuum?",
    "Which planet is closest to the sun?",
    "Who is the current UN Secretary-General?",
    "What is the population of Japan?",
    "How many bones are in the adult human body?",
    "What language is spoken in Brazil?",
    "Who invented the telephone?",
    "What is the square root of 144?",
];

fn honesty() -> Verdict {
    block(async {
        let app = common::spawn_default().await;
        let mut client = ApiClient::new(&app.base);
        client.register("fresh", "pw123456").await.map_err(|e| e.to_string())?;
        client.login("fresh", "pw123456").await.map_err(|e| e.to_string())?;
        for q in FACTUAL_QUESTIONS {
            let reply = client.chat(q, None).await.map_err(|e| e.to_string())?;
            ensure(reply.response_text == "I DO NOT KNOW." && reply.mode.as_str() == "GENERIC", || {
                format!("{q:?} -> {} {:?}", reply.mode.as_str(), reply.response_text)
            })?;
        }
        Ok("20/20 factual questions answered \"I DO NOT KNOW.\" in GENERIC mode".into())
    })
}

// ---------------------------------------------------------------- goldens

fn golden_scenarios() -> Verdict {
    block(async {
        let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios/v1");
        let suite = load_suite(&dir).map_err(|e| e.to_string())?;
        let app = common::spawn_default().await;
        let report = eval::run_suite(&suite, &mut HttpTarget::new(&app.base), RunOptions::default())
            .await
            .map_err(|e| e.to_string())?;
        let failures: Vec<String> = report
            .queries
            .iter()
            .filter(|q| !q.passed)
            .map(|q| format!("{}#{}: {}", q.scenario, q.index, q.reasons.join("; ")))
            .collect();
        ensure(failures.is_empty(), || failures.join(" | "))?;
        for (scenario, needle) in [
            ("personalized_recommendation", "Anime"),
            ("event_reminder", "Doctor"),
            ("writing_style", "Yo fam"),
        ] {
            let hit = report
                .queries
                .iter()
                .filter(|q| q.scenario == scenario)
                .all(|q| q.retrieved.iter().any(|r| r.text.contains(needle)));
            ensure(hit, || format!("{scenario}: {needle} not retrieved"))?;
        }
        Ok(format!("{} scenarios, {} queries passed", report.scenarios.len(), report.passed))
    })
}

// ---------------------------------------------------------------- isolation

fn marker(user: usize) -> String {
    format!("tenant-{user}-marker")
}

fn isolation_fuzz() -> Verdict {
    block(async {
        let service = Arc::new(Service::new(ServiceConfig::default()).unwrap());
        let mut tokens = Vec::new();
        let mut ids = Vec::new();
        for u in 0..8 {
            ids.push(service.register(&format!("user{u}"), "pw123456").await.map_err(|e| e.to_string())?);
            tokens.push(service.login(&format!("user{u}"), "pw123456").await.map_err(|e| e.to_string())?.token);
        }
        let owners: Arc<Mutex<HashMap<String, usize>>> = Arc::default();
        let mut tasks = Vec::new();
        for (u, token) in tokens.into_iter().enumerate() {
            let service = service.clone();
            let owners = owners.clone();
            tasks.push(tokio::spawn(async move {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + u as u64);
                let mine = marker(u);
                let mut live: HashSet<String> = HashSet::new();
                let foreign = |text: &str| (0..8).any(|o| o != u && text.contains(&marker(o)));
                for op in 0..1250 {
                    let lure = marker(rng.random_range(0..8));
                    match rng.random_range(0..100) {
                        0..=39 => {
                            let len = rng.random_range(1..4);
                            let text = format!("{mine} note {op}: {}", "word ".repeat(len * 30));
                            let ids = service.ingest_entry(&token, &text, None).await.map_err(|e| e.to_string())?;
                            let mut owners = owners.lock().unwrap();
                            for id in ids {
                                owners.insert(id.to_string(), u);
                                live.insert(id.to_string());
                            }
                        }
                        40..=74 => {
                            let k = rng.random_range(1..=16);
                            let reply = service
                                .chat(&token, &format!("{lure} note {}", rng.random_range(0..op + 1)), Some(k))
                                .await
                                .map_err(|e| e.to_string())?;
                            for r in &reply.retrieved {
                                if !live.contains(&r.record_id) || foreign(&r.text) {
                                    return Err(format!("user {u} saw {} ({})", r.record_id, r.text));
                                }
                            }
                            if reply.context_ids.iter().any(|id| !live.contains(id)) || foreign(&reply.response_text) {
                                return Err(format!("user {u} got a foreign context"));
                            }
                        }
                        75..=94 => {
                            let query = rng.random_bool(0.5).then(|| lure.clone());
                            let page = service
                                .list_memories(&token, &ListQuery { query, limit: Some(16), offset: None })
                                .await
                                .map_err(|e| e.to_string())?;
                            if page.total != live.len() {
                                return Err(format!("user {u} total {} != {}", page.total, live.len()));
                            }
                            for m in &page.memories {
                                if !live.contains(&m.record_id) || foreign(&m.text) {
                                    return Err(format!("user {u} listed {}", m.record_id));
                                }
                            }
                        }
                        _ => {
                            let deleted = service.delete_memories(&token).map_err(|e| e.to_string())?;
                            if deleted != live.len() {
                                return Err(format!("user {u} deleted {deleted}, owned {}", live.len()));
                            }
                            live.clear();
                        }
                    }
                    if op % 64 == 0 {
                        tokio::task::yield_now().await;
                    }
                }
                Ok::<usize, String>(live.len())
            }));
        }
        let mut remaining = Vec::new();
        for t in tasks {
            remaining.push(t.await.map_err(|e| e.to_string())??);
        }
        let owners = owners.lock().unwrap();
        for (u, live) in remaining.iter().enumerate() {
            let stored = service.store().list(&ids[u]);
            ensure(stored.len() == *live, || format!("user {u}: store holds {}, expected {live}", stored.len()))?;
            for record in stored {
                ensure(owners.get(record.record_id.as_str()) == Some(&u), || {
                    format!("record {} stored under user {u}", record.record_id)
                })?;
            }
        }
        Ok(format!("10000 operations across 8 users, {} records ingested, 0 leaks", owners.len()))
    })
}

// ---------------------------------------------------------------- journal

fn journal_fidelity() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let base: DateTime<Utc> = Utc.with_ymd_and_hms(2024, 3, 1, 0, 0, 0).unwrap();
    let store = MemoryStore::new();
    let users: Vec<UserId> = (0..4).map(|u| UserId::new(format!("u{u}"))).collect();
    for i in 0..1000 {
        store
            .add(MemoryRecord {
                record_id: RecordId::new(format!("entry{}#{}", i / 2, i % 2)),
                user_id: users[i % users.len()].clone(),
                text: format!("record {i}: \"quoted\" ünïcödé 🙂\ttab"),
                timestamp: base + Duration::seconds(rng.random_range(0..10_000)),
                source_id: format!("entry{}", i / 2),
                chunk_index: i % 2,
                vector: random_unit(&mut rng),
            })
            .map_err(|e| e.to_string())?;
    }
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = dir.path().join("first.jsonl");
    let second = dir.path().join("second.jsonl");
    store.save_journal(&first).map_err(|e| e.to_string())?;
    let (loaded, _) = MemoryStore::load_journal(&first).map_err(|e| e.to_string())?;
    ensure(loaded.stats() == store.stats(), || "stats differ".into())?;
    for q in 0..50 {
        let query = random_unit(&mut rng);
        let user = &users[q % users.len()];
        let k = rng.random_range(1..=16);
        let a = store.top_k(user, &query, k).map_err(|e| e.to_string())?;
        let b = loaded.top_k(user, &query, k).map_err(|e| e.to_string())?;
        let same = a.len() == b.len()
            && a.iter().zip(&b).all(|(x, y)| x.record == y.record && x.score.to_bits() == y.score.to_bits());
        ensure(same, || format!("query {q} ranks differently after reload"))?;
    }
    loaded.save_journal(&second).map_err(|e| e.to_string())?;
    let (a, b) = (std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    ensure(a == b, || "second save differs".into())?;
    Ok(format!("1000 records, 50 queries identical after reload; {} byte journal saved twice identically", a.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("chunker property suite", chunker_properties),
        ("retrieval oracle equivalence", retrieval_oracle),
        ("synthetic-corpus accuracy", synthetic_accuracy),
        ("latency", latency),
        ("honesty contract", honesty),
        ("golden scenarios", golden_scenarios),
        ("isolation fuzz", isolation_fuzz),
        ("journal fidelity", journal_fidelity),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = std::panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into())));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
