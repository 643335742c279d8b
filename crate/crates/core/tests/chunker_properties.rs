use memora_core::chunker::SplitLevel;
use memora_core::{split, Chunk, ChunkConfig};
use proptest::prelude::*;

/// Independent sliding-window reference for separator-free text.
fn sliding_windows(len: usize, max: usize, stride: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + max).min(len);
        out.push((start, end));
        if end == len {
            return out;
        }
        start += stride;
    }
}

fn check_chunks(text: &str, chunks: &[Chunk], config: &ChunkConfig) {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        assert!(chunks.is_empty());
        return;
    }
    assert!(!chunks.is_empty());
    let mut covered_to = 0;
    for (i, c) in chunks.iter().enumerate() {
        assert_eq!(c.chunk_index, i);
        let len = c.end_offset - c.start_offset;
        assert!(len > 0 && len <= config.max_size(), "chunk {i} has {len} chars");
        assert_eq!(c.text.chars().count(), len);
        let expected: String = chars[c.start_offset..c.end_offset].iter().collect();
        assert_eq!(c.text, expected, "chunk {i} is not the source substring");
        assert!(c.start_offset <= covered_to, "gap before chunk {i}");
        assert!(c.end_offset > covered_to, "chunk {i} adds nothing");
        if i > 0 {
            let prev = &chunks[i - 1];
            assert!(c.start_offset > prev.start_offset);
            let overlap = prev.end_offset.saturating_sub(c.start_offset);
            assert!(overlap <= config.overlap(), "overlap {overlap} at chunk {i}");
            if matches!(c.split_level, SplitLevel::Paragraph | SplitLevel::Line) {
                assert_eq!(overlap, 0, "natural boundary chunk {i} overlaps");
            }
        }
        covered_to = c.end_offset;
    }
    assert_eq!(chunks[0].start_offset, 0);
    assert_eq!(covered_to, chars.len());
}

fn text_from(alphabet: &'static [char]) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(alphabet), 0..1500).prop_map(|v| v.into_iter().collect())
}

const MIXED: &[char] = &['a', 'b', 'z', 'é', '漢', '🙂', ' ', ' ', ' ', '\n', '\n', '\t', '.'];
const SPARSE: &[char] = &['a', 'b', 'c', 'd', 'e', 'f', 'g', 'h', 'ß', ' ', '\n'];
const NO_SEPARATORS: &[char] = &['x', 'y', 'é', '漢', '🙂', '\t', '-'];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn invariants_hold_for_mixed_text(text in text_from(MIXED)) {
        let config = ChunkConfig::default();
        check_chunks(&text, &split(&text, &config), &config);
    }

    #[test]
    fn invariants_hold_for_sparse_separators(text in text_from(SPARSE)) {
        let config = ChunkConfig::default();
        check_chunks(&text, &split(&text, &config), &config);
    }

    #[test]
    fn invariants_hold_for_any_string(text in any::<String>()) {
        let config = ChunkConfig::default();
        check_chunks(&text, &split(&text, &config), &config);
    }

    #[test]
    fn invariants_hold_for_other_configs(
        text in text_from(MIXED),
        max in 2usize..300,
        fraction in 0.0f64..0.95,
    ) {
        if let Ok(config) = ChunkConfig::new(max, fraction) {
            check_chunks(&text, &split(&text, &config), &config);
        }
    }

    #[test]
    fn separator_free_text_matches_sliding_windows(text in text_from(NO_SEPARATORS)) {
        let config = ChunkConfig::default();
        let chunks = split(&text, &config);
        let len = text.chars().count();
        if len > config.max_size() {
            let got: Vec<(usize, usize)> = chunks.iter().map(|c| (c.start_offset, c.end_offset)).collect();
            prop_assert_eq!(got, sliding_windows(len, 200, 150));
            for (i, c) in chunks.iter().enumerate() {
                prop_assert_eq!(c.start_offset, i * 150);
                prop_assert_eq!(c.split_level, SplitLevel::Character);
            }
        } else if len > 0 {
            prop_assert_eq!(chunks.len(), 1);
            prop_assert_eq!(chunks[0].split_level, SplitLevel::WholeInput);
        }
    }

    #[test]
    fn splitting_a_chunk_returns_it(text in text_from(MIXED)) {
        let config = ChunkConfig::default();
        for chunk in split(&text, &config) {
            let again = split(&chunk.text, &config);
            prop_assert_eq!(again.len(), 1);
            prop_assert_eq!(&again[0].text, &chunk.text);
            prop_assert_eq!((again[0].start_offset, again[0].end_offset), (0, chunk.len()));
        }
    }

    #[test]
    fn split_is_deterministic(text in text_from(MIXED)) {
        let config = ChunkConfig::default();
        prop_assert_eq!(split(&text, &config), split(&text, &config));
    }
}

#[test]
fn sliding_window_reference() {
    assert_eq!(sliding_windows(500, 200, 150), vec![(0, 200), (150, 350), (300, 500)]);
    assert_eq!(sliding_windows(360, 200, 150), vec![(0, 200), (150, 350), (300, 360)]);
    assert_eq!(sliding_windows(350, 200, 150), vec![(0, 200), (150, 350)]);
}

#[test]
fn worked_examples() {
    let config = ChunkConfig::default();
    let short = "q".repeat(120);
    let chunks = split(&short, &config);
    assert_eq!(chunks.len(), 1);
    assert_eq!((chunks[0].start_offset, chunks[0].end_offset), (0, 120));
    assert_eq!(chunks[0].split_level, SplitLevel::WholeInput);

    assert!(split("", &config).is_empty());

    let long = "a".repeat(500);
    let offsets: Vec<_> = split(&long, &config).iter().map(|c| (c.start_offset, c.end_offset)).collect();
    assert_eq!(offsets, vec![(0, 200), (150, 350), (300, 500)]);

    let paragraphs = format!("{}\n\n{}", "p".repeat(150), "r".repeat(150));
    let chunks = split(&paragraphs, &config);
    assert_eq!(chunks.len(), 2);
    assert_eq!(chunks[0].split_level, SplitLevel::Paragraph);
    assert_eq!(chunks[0].end_offset, chunks[1].start_offset);
    assert_eq!(chunks[0].text, format!("{}\n\n", "p".repeat(150)));
    assert_eq!(chunks[1].text, "r".repeat(150));
}
