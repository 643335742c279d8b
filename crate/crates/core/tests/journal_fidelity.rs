use chrono::{Duration, TimeZone, Utc};
use memora_core::{EmbeddingVector, MemoryRecord, MemoryStore, RecordId, UserId, DIMENSION};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_unit(rng: &mut impl Rng) -> EmbeddingVector {
    let raw: Vec<f64> = (0..DIMENSION).map(|_| rng.random_range(-1.0..1.0)).collect();
    EmbeddingVector::normalize(&raw).unwrap()
}

#[test]
fn rankings_survive_save_and_load() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let store = MemoryStore::new();
    let base = Utc.with_ymd_and_hms(2024, 1, 1, 0, 0, 0).unwrap();
    let users = ["alice", "bob", "carol"];
    for i in 0..1000 {
        let user = users[i % users.len()];
        store
            .add(MemoryRecord {
                record_id: RecordId::new(format!("src{}#{}", i / 3, i % 3)),
                user_id: UserId::new(user),
                text: format!("entry {i} with \"quotes\", unicode é漢🙂 and\nnewlines"),
                timestamp: base + Duration::seconds(rng.random_range(0..100_000)),
                source_id: format!("src{}", i / 3),
                chunk_index: i % 3,
                vector: random_unit(&mut rng),
            })
            .unwrap();
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("memories.jsonl");
    store.save_journal(&path).unwrap();
    let (loaded, load) = MemoryStore::load_journal(&path).unwrap();
    assert_eq!(load.records, 1000);
    assert_eq!(load.truncated_lines, 0);
    assert_eq!(loaded.stats(), store.stats());

    for _ in 0..50 {
        let q = random_unit(&mut rng);
        let k = rng.random_range(1..=16);
        for user in users {
            let user = UserId::new(user);
            let a = store.top_k(&user, &q, k).unwrap();
            let b = loaded.top_k(&user, &q, k).unwrap();
            assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                assert_eq!(x.record, y.record);
                assert_eq!(x.score.to_bits(), y.score.to_bits());
            }
        }
    }

    let again = dir.path().join("again.jsonl");
    loaded.save_journal(&again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(&again).unwrap());
}
