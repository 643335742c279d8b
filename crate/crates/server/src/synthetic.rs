//! Seeded synthetic journal: topics with disjoint vocabularies, templated
//! entries and held-out queries.

use std::collections::HashMap;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const VOCABULARIES: &[(&str, [&str; 16])] = &[
    ("cooking", [
        "risotto", "saffron", "sourdough", "braising", "marinade", "paprika", "skillet", "caramelized",
        "dumplings", "ginger", "simmering", "oregano", "focaccia", "custard", "shallots", "broth",
    ]),
    ("fitness", [
        "deadlift", "treadmill", "kettlebell", "squats", "marathon", "stretching", "dumbbells", "cardio",
        "protein", "sprint", "pushups", "yoga", "hamstring", "rowing", "plank", "endurance",
    ]),
    ("travel", [
        "passport", "itinerary", "airport", "luggage", "hostel", "boarding", "lisbon", "kyoto",
        "ferry", "backpack", "visa", "layover", "museum", "train", "souvenir", "hiking",
    ]),
    ("finance", [
        "mortgage", "budget", "savings", "invoice", "dividends", "portfolio", "taxes", "pension",
        "interest", "receipt", "brokerage", "payroll", "loan", "spreadsheet", "expenses", "rent",
    ]),
    ("music", [
        "guitar", "piano", "chords", "concert", "playlist", "violin", "melody", "rehearsal",
        "drummer", "vinyl", "saxophone", "choir", "lyrics", "amplifier", "tempo", "orchestra",
    ]),
    ("gardening", [
        "tomatoes", "compost", "seedlings", "pruning", "mulch", "greenhouse", "tulips", "watering",
        "weeds", "orchard", "basil", "trellis", "fertilizer", "hedge", "bulbs", "raspberries",
    ]),
    ("pets", [
        "puppy", "kitten", "leash", "veterinarian", "aquarium", "hamster", "grooming", "litter",
        "parrot", "kibble", "collar", "adoption", "tortoise", "fetch", "whiskers", "rabbit",
    ]),
    ("programming", [
        "compiler", "debugger", "refactoring", "repository", "unittest", "kubernetes", "rustlang",
        "javascript", "database", "algorithm", "deployment", "pullrequest", "typescript", "linter",
        "benchmark", "recursion",
    ]),
];

const ENTRY_TEMPLATES: [&str; 4] = [
    "Today I spent time on {} then {} and some {}.",
    "Note to self: remember the {} and the {} before {}.",
    "Reflection: {} felt great, {} was harder, {} next time.",
    "Quick email update about {}, {} and {}.",
];

const QUERY_TEMPLATES: [&str; 2] = ["What did I write about {} and {}?", "Remind me about {} and {}."];

fn fill(template: &str, words: &[&str]) -> String {
    let mut out = String::new();
    let mut words = words.iter();
    let mut parts = template.split("{}").peekable();
    while let Some(part) = parts.next() {
        out.push_str(part);
        if parts.peek().is_some() {
            out.push_str(words.next().expect("one word per slot"));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub topics: usize,
    pub entries_per_topic: usize,
    pub queries_per_topic: usize,
    pub seed: u64,
    pub k: usize,
    /// Ingest entries in a seeded random order instead of topic by topic.
    pub shuffle: bool,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            topics: 5,
            entries_per_topic: 40,
            queries_per_topic: 10,
            seed: 42,
            k: 3,
            shuffle: false,
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=VOCABULARIES.len()).contains(&self.topics) {
            return Err(format!("topics must be in 1..={}", VOCABULARIES.len()));
        }
        if self.entries_per_topic == 0 || self.queries_per_topic == 0 {
            return Err("entries_per_topic and queries_per_topic must be positive".into());
        }
        if !(1..=memora_core::MAX_K).contains(&self.k) {
            return Err(format!("k must be in 1..={}", memora_core::MAX_K));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub topic: usize,
    pub text: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub topic: usize,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub topic_names: Vec<&'static str>,
    /// In ingestion order.
    pub entries: Vec<Entry>,
    pub queries: Vec<Probe>,
    topic_of: HashMap<String, usize>,
}

impl Corpus {
    pub fn generate(config: &CorpusConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let base = Utc.with_ymd_and_hms(2024, 1, 1, 8, 0, 0).unwrap();
        let mut entries = Vec::new();
        let mut queries = Vec::new();
        for (topic, (_, vocab)) in VOCABULARIES.iter().enumerate().take(config.topics) {
            for _ in 0..config.entries_per_topic {
                let template = ENTRY_TEMPLATES[rng.random_range(0..ENTRY_TEMPLATES.len())];
                let words: Vec<&str> = index::sample(&mut rng, vocab.len(), 3).iter().map(|i| vocab[i]).collect();
                let timestamp = base + Duration::minutes(entries.len() as i64);
                entries.push(Entry { topic, text: fill(template, &words), timestamp });
            }
            for _ in 0..config.queries_per_topic {
                let template = QUERY_TEMPLATES[rng.random_range(0..QUERY_TEMPLATES.len())];
                let words: Vec<&str> = index::sample(&mut rng, vocab.len(), 2).iter().map(|i| vocab[i]).collect();
                queries.push(Probe { topic, text: fill(template, &words) });
            }
        }
        if config.shuffle {
            let mut order_rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(1));
            entries.shuffle(&mut order_rng);
        }
        let topic_of = entries.iter().map(|e| (e.text.clone(), e.topic)).collect();
        Self {
            topic_names: VOCABULARIES.iter().take(config.topics).map(|(name, _)| *name).collect(),
            entries,
            queries,
            topic_of,
        }
    }

    /// Topic of a generated entry text.
    pub fn topic_of(&self, text: &str) -> Option<usize> {
        self.topic_of.get(text).copied()
    }
}
