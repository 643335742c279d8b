//! Browser bindings for the chunker, the builtin embedder and exact top-k
//! retrieval. Every export takes and returns plain strings so the page needs
//! no generated glue beyond `wasm-bindgen`'s.

use chrono::{DateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use memora_core::chunker::SplitLevel;
use memora_core::{
    cosine, split, BuiltinEmbedder, ChunkConfig, MemoryRecord, MemoryStore, RecordId, TextEmbedder, UserId,
};

#[derive(Serialize)]
struct ChunkView {
    text: String,
    start: usize,
    end: usize,
    level: SplitLevel,
}

#[derive(Deserialize)]
struct Entry {
    text: String,
    #[serde(default)]
    timestamp: Option<DateTime<Utc>>,
}

#[derive(Serialize)]
struct Hit {
    record_id: String,
    text: String,
    score: f64,
    timestamp: DateTime<Utc>,
}

pub fn chunk_json(text: &str) -> String {
    let chunks: Vec<ChunkView> = split(text, &ChunkConfig::default())
        .into_iter()
        .map(|c| ChunkView {
            text: c.text,
            start: c.start_offset,
            end: c.end_offset,
            level: c.split_level,
        })
        .collect();
    serde_json::to_string(&chunks).expect("chunks serialize")
}

pub fn similarity_of(a: &str, b: &str) -> Result<f64, String> {
    let a = BuiltinEmbedder.embed(a).map_err(|e| e.to_string())?;
    let b = BuiltinEmbedder.embed(b).map_err(|e| e.to_string())?;
    Ok(cosine(&a, &b))
}

/// `entries` is a JSON array of `{text, timestamp?}`; every entry is chunked,
/// embedded and searched as a single user's memory.
pub fn search_json(entries: &str, query: &str, k: usize) -> Result<String, String> {
    let entries: Vec<Entry> = serde_json::from_str(entries).map_err(|e| e.to_string())?;
    let user = UserId::new("demo");
    let store = MemoryStore::new();
    let config = ChunkConfig::default();
    for (i, entry) in entries.iter().enumerate() {
        let timestamp = entry
            .timestamp
            .unwrap_or_else(|| Utc.timestamp_opt(i as i64, 0).unwrap());
        for chunk in split(&entry.text, &config) {
            if chunk.text.trim().is_empty() {
                continue;
            }
            let vector = BuiltinEmbedder.embed(&chunk.text).map_err(|e| e.to_string())?;
            store
                .add(MemoryRecord {
                    record_id: RecordId::new(format!("entry{i}#{}", chunk.chunk_index)),
                    user_id: user.clone(),
                    text: chunk.text,
                    timestamp,
                    source_id: format!("entry{i}"),
                    chunk_index: chunk.chunk_index,
                    vector,
                })
                .map_err(|e| e.to_string())?;
        }
    }
    let query = BuiltinEmbedder.embed(query).map_err(|e| e.to_string())?;
    let hits: Vec<Hit> = store
        .top_k(&user, &query, k)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| Hit {
            record_id: r.record.record_id.to_string(),
            text: r.record.text,
            score: r.score,
            timestamp: r.record.timestamp,
        })
        .collect();
    Ok(serde_json::to_string(&hits).expect("hits serialize"))
}

#[wasm_bindgen]
pub fn chunk(text: &str) -> String {
    chunk_json(text)
}

#[wasm_bindgen]
pub fn similarity(a: &str, b: &str) -> Result<f64, JsError> {
    similarity_of(a, b).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn search(entries: &str, query: &str, k: usize) -> Result<String, JsError> {
    search_json(entries, query, k).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn chunks_long_text_with_overlap() {
        let text = "x".repeat(450);
        let v: Value = serde_json::from_str(&chunk_json(&text)).unwrap();
        let starts: Vec<u64> = v.as_array().unwrap().iter().map(|c| c["start"].as_u64().unwrap()).collect();
        assert_eq!(starts, [0, 150, 300]);
        assert_eq!(v[0]["level"], "character");
    }

    #[test]
    fn similarity_is_symmetric_and_bounded() {
        let ab = similarity_of("I love anime", "anime recommendations").unwrap();
        let ba = similarity_of("anime recommendations", "I love anime").unwrap();
        assert_eq!(ab, ba);
        assert!(ab > 0.0 && ab <= 1.0);
        assert!((similarity_of("same", "same").unwrap() - 1.0).abs() < 1e-6);
        assert!(similarity_of("", "x").is_err());
    }

    #[test]
    fn search_ranks_the_related_entry_first() {
        let entries = r#"[
            {"text": "I have a Doctor appointment next Wednesday."},
            {"text": "Anime is my favourite thing to watch.", "timestamp": "2024-12-20T18:00:00Z"},
            {"text": "Bought groceries: eggs, milk, bread."}
        ]"#;
        let hits: Value = serde_json::from_str(&search_json(entries, "recommend some anime", 2).unwrap()).unwrap();
        assert_eq!(hits.as_array().unwrap().len(), 2);
        assert_eq!(hits[0]["record_id"], "entry1#0");
        assert_eq!(hits[0]["timestamp"], "2024-12-20T18:00:00Z");
        assert!(hits[0]["score"].as_f64().unwrap() >= hits[1]["score"].as_f64().unwrap());
    }

    #[test]
    fn search_rejects_bad_input() {
        assert!(search_json("not json", "q", 3).is_err());
        assert!(search_json("[]", "q", 0).is_err());
        assert_eq!(search_json("[]", "q", 3).unwrap(), "[]");
    }
}
