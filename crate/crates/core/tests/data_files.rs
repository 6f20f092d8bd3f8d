use std::io::{BufReader, Write};

use sarquant::corpus::{self, Category};
use sarquant::features::load_embedding_table;

/// Vote patterns of the five sample sentences, annotators 1..11.
const SAMPLE_VOTES: [[u8; 11]; 5] = [
    [1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1],
    [1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [0, 1, 1, 0, 0, 1, 1, 1, 0, 1, 1],
    [0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0],
    [0; 11],
];

fn votes_file() -> String {
    SAMPLE_VOTES
        .iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::json!({"id": format!("s{}", i + 1), "text": "نص", "category": "politics", "votes": v})
                .to_string()
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sample_corpus_histogram() {
    let records = corpus::read_votes(votes_file().as_bytes(), 11).unwrap();
    let labeled = corpus::aggregate(&records).unwrap();
    let stats = corpus::corpus_stats(&labeled, corpus::DEFAULT_THRESHOLD, 11);
    assert_eq!(stats.total, 5);
    assert_eq!(stats.per_category[&Category::Politics], 5);
    let mut expected = vec![0; 12];
    for k in [10, 3, 7, 4, 0] {
        expected[k] += 1;
    }
    assert_eq!(stats.histogram, expected);
    // 10/11 and 7/11 reach 6/11
    assert_eq!(stats.sarcastic, 2);
}

#[test]
fn aggregated_file_round_trip() {
    let records = corpus::read_votes(votes_file().as_bytes(), 11).unwrap();
    let labeled = corpus::aggregate(&records).unwrap();
    let mut buf = Vec::new();
    corpus::write_corpus(&mut buf, &labeled).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for line in text.lines() {
        let label = serde_json::from_str::<serde_json::Value>(line).unwrap()["label"].to_string();
        let digits = label.chars().filter(char::is_ascii_digit).count();
        assert!(label == "0.0" || label == "1.0" || digits >= 9, "{label}");
    }
    assert_eq!(corpus::read_corpus(text.as_bytes()).unwrap(), labeled);
}

#[test]
fn synthetic_histogram_sums() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let examples: Vec<_> = (0..100)
        .map(|i| corpus::LabeledExample {
            id: i.to_string(),
            text: String::new(),
            category: Category::ALL[rng.random_range(0..5)],
            label: rng.random_range(0..=11) as f64 / 11.0,
            partial: false,
        })
        .collect();
    let stats = corpus::corpus_stats(&examples, 0.5, 11);
    let mut tally = vec![0usize; 12];
    for e in &examples {
        tally[(e.label * 11.0).round() as usize] += 1;
    }
    assert_eq!(stats.histogram, tally);
    assert_eq!(stats.histogram.iter().sum::<usize>(), 100);
}

#[test]
fn embeddings_write_then_read() {
    let mut file = tempfile::NamedTempFile::new().unwrap();
    write!(file, "dim\t3\nt1\t0.125,-2.5,1e-3\nt2\t1.5625,0,-0.000001\n").unwrap();
    let table = load_embedding_table(BufReader::new(std::fs::File::open(file.path()).unwrap())).unwrap();
    assert_eq!(table.dim(), 3);
    assert_eq!(table.len(), 2);
    assert_eq!(table.get("t1").unwrap().as_slice(), &[0.125, -2.5, 0.001]);
    assert_eq!(table.get("t2").unwrap().as_slice(), &[1.5625, 0.0, -0.000001]);
}
