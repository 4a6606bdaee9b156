use super::*;

#[test]
fn encode_plain_letters() {
    assert_eq!(CharVocab::encode("abc"), vec![1, 2, 3]);
    assert_eq!(CharVocab::encode("z"), vec![26]);
    assert_eq!(CharVocab::encode(" "), vec![0]);
}

#[test]
fn out_of_vocab_folds_to_space_and_case_folds() {
    assert_eq!(CharVocab::encode("A9b"), vec![1, 0, 2]);
    assert_eq!(
        CharVocab::encode("Hello, World!"),
        CharVocab::encode("hello  world ")
    );
}

#[test]
fn ids_stay_in_range_and_decode_encode_is_idempotent() {
    for byte in 0u8..=255 {
        let id = CharVocab::id_of(byte);
        assert!(id < CharVocab::SIZE as u32);
    }
    let text = "The 27-symbol Alphabet!";
    let once = CharVocab::decode(&CharVocab::encode(text));
    let twice = CharVocab::decode(&CharVocab::encode(&once));
    assert_eq!(once, twice);
}

#[test]
fn ingest_reads_limit_and_normalizes() {
    let dir = std::env::temp_dir().join("agglo_data_test");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("corpus.txt");
    std::fs::write(&path, b"Abc DEF29xyz").unwrap();
    let (tokens, _) = ingest_text8(&path, Some(7)).unwrap();
    assert_eq!(tokens, CharVocab::encode("abc def"));
    let (all, _) = ingest_text8(&path, None).unwrap();
    assert_eq!(all.len(), 12);
    assert!(ingest_text8(&path, Some(0)).is_err());
    assert!(ingest_text8(&dir.join("missing.txt"), None).is_err());
    std::fs::remove_file(&path).unwrap();
}

#[test]
fn split_uses_floor_floor_remainder() {
    let stream: Vec<u32> = (0..100).map(|i| i % 27).collect();
    let s = split(&stream, (0.9, 0.05, 0.05)).unwrap();
    assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (90, 5, 5));

    let stream: Vec<u32> = (0..10).collect();
    let s = split(&stream, (0.8, 0.1, 0.1)).unwrap();
    assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));

    let stream: Vec<u32> = (0..103).map(|i| i % 27).collect();
    let s = split(&stream, (0.9, 0.05, 0.05)).unwrap();
    assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (92, 5, 6));
}

#[test]
fn split_pieces_are_contiguous_and_cover_the_prefix() {
    let stream: Vec<u32> = (0..1000).map(|i| i % 27).collect();
    let s = split(&stream, (0.7, 0.2, 0.1)).unwrap();
    let mut rebuilt = s.train.clone();
    rebuilt.extend_from_slice(&s.valid);
    rebuilt.extend_from_slice(&s.test);
    assert_eq!(rebuilt, stream);
}

#[test]
fn split_rejects_bad_fractions_and_empty_pieces() {
    let stream: Vec<u32> = (0..100).collect();
    assert!(matches!(
        split(&stream, (0.5, 0.5, 0.5)),
        Err(crate::Error::Config(_))
    ));
    assert!(matches!(
        split(&stream, (0.5, -0.1, 0.6)),
        Err(crate::Error::Config(_))
    ));
    let tiny: Vec<u32> = (0..10).collect();
    assert!(matches!(
        split(&tiny, (0.98, 0.01, 0.01)),
        Err(crate::Error::Data(_))
    ));
}

#[test]
fn windows_are_shifted_pairs() {
    // stream 1..=9, windows (1,2,3,4) and (5,6,7,8); 9 is dropped tail
    let stream: Vec<u32> = (1..=9).collect();
    let mut rows = Vec::new();
    for (inp, tgt) in batches(&stream, 3, 1, 0).unwrap() {
        rows.push((inp.ids.clone(), tgt.ids.clone()));
    }
    rows.sort();
    assert_eq!(
        rows,
        vec![
            (vec![1, 2, 3], vec![2, 3, 4]),
            (vec![5, 6, 7], vec![6, 7, 8]),
        ]
    );
}

#[test]
fn same_seed_means_same_order() {
    let stream: Vec<u32> = (0..500).map(|i| i % 27).collect();
    let collect = |seed: u64| -> Vec<Vec<u32>> {
        batches(&stream, 7, 4, seed)
            .unwrap()
            .map(|(i, _)| i.ids)
            .collect()
    };
    assert_eq!(collect(3), collect(3));
    assert_ne!(collect(3), collect(4));
}

#[test]
fn epoch_window_count_is_deterministic() {
    for (len, t) in [(1000usize, 7usize), (129, 128), (4096, 32)] {
        let stream: Vec<u32> = (0..len as u32).map(|i| i % 27).collect();
        let it = eval_batches(&stream, t, 8).unwrap();
        assert_eq!(it.num_windows(), len / (t + 1));
    }
}

#[test]
fn targets_cover_everything_but_window_heads_and_tail() {
    // 1000 tokens, seq_len 7: 125 windows of 8, batch 5 divides exactly
    let stream: Vec<u32> = (0..1000).collect();
    let mut covered = vec![false; 1000];
    for (_, tgt) in batches(&stream, 7, 5, 11).unwrap() {
        for &v in &tgt.ids {
            covered[v as usize] = true;
        }
    }
    for (pos, &c) in covered.iter().enumerate() {
        let is_window_head = pos % 8 == 0;
        assert_eq!(c, !is_window_head, "position {pos}");
    }
}

#[test]
fn training_batches_drop_ragged_remainder() {
    let stream: Vec<u32> = (0..=80).collect(); // 81 tokens, 10 windows of 8
    let it = batches(&stream, 7, 4, 0).unwrap();
    assert_eq!(it.num_windows(), 10);
    assert_eq!(it.num_batches(), 2); // 8 windows used, 2 dropped
    assert_eq!(it.count(), 2);

    let it = eval_batches(&stream, 7, 4).unwrap();
    assert_eq!(it.num_batches(), 3); // ragged final batch kept
    let sizes: Vec<usize> = it.map(|(i, _)| i.rows).collect();
    assert_eq!(sizes, vec![4, 4, 2]);
}

#[test]
fn too_short_streams_are_rejected() {
    let stream: Vec<u32> = (0..8).collect();
    assert!(batches(&stream, 8, 1, 0).is_err());
    assert!(batches(&stream, 7, 1, 0).is_ok());
}

#[test]
fn synthetic_corpus_is_deterministic_and_in_vocabulary() {
    let a = synthetic_corpus(5000, 42);
    let b = synthetic_corpus(5000, 42);
    assert_eq!(a, b);
    assert_eq!(a.len(), 5000);
    assert!(a.bytes().all(|c| c == b' ' || c.is_ascii_lowercase()));
    let c = synthetic_corpus(5000, 43);
    assert_ne!(a, c);
    // encoding it must be lossless (already normalized)
    assert_eq!(CharVocab::decode(&CharVocab::encode(&a)), a);
}

#[test]
fn word_stock_is_clean() {
    for w in super::words::WORDS {
        assert!(!w.is_empty());
        assert!(w.bytes().all(|b| b.is_ascii_lowercase()), "bad word {w:?}");
    }
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn decode_encode_round_trips_normalized_text(s in "[ -~]{0,200}") {
            let normalized: String = s
                .bytes()
                .map(|b| CharVocab::normalize(b) as char)
                .collect();
            prop_assert_eq!(CharVocab::decode(&CharVocab::encode(&s)), normalized);
        }

        #[test]
        fn every_emitted_pair_is_shifted_by_one(
            len in 20usize..300, t in 1usize..10, seed in 0u64..50
        ) {
            let stream: Vec<u32> = (0..len as u32).collect();
            prop_assume!(len > t);
            for (inp, tgt) in batches(&stream, t, 2, seed).unwrap() {
                for r in 0..inp.rows {
                    for c in 0..t {
                        prop_assert_eq!(inp.ids[r * t + c] + 1, tgt.ids[r * t + c]);
                    }
                }
            }
        }
    }
}
