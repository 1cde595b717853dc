//! Corpus files through lexicon construction and statistics.

use std::path::PathBuf;

use scentprompt::corpus::{
    build_lexicon, cooccurrence, frequency_report, load_corpus, prune, CorpusFormat,
};

fn write(dir: &tempfile::TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

const CSV: &str = "id,description,source\n\
m1,\"Sweet, woody, vanilla\",cat-a\n\
m2,\"Woody; smoky and dry\",cat-a\n\
m3,\"vanilla and sweet\",cat-b\n";

#[test]
fn csv_and_jsonl_load_identically() {
    let dir = tempfile::tempdir().unwrap();
    let csv = write(&dir, "c.csv", CSV);
    let jsonl = write(
        &dir,
        "c.jsonl",
        r#"{"id": "m1", "description": "Sweet, woody, vanilla", "source": "cat-a"}
{"id": "m2", "description": "Woody; smoky and dry", "source": "cat-a"}

{"id": "m3", "description": "vanilla and sweet", "source": "cat-b"}
"#,
    );
    let a = load_corpus(&csv, CorpusFormat::from_path(&csv)).unwrap();
    let b = load_corpus(&jsonl, CorpusFormat::from_path(&jsonl)).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        a.iter().map(|d| d.id.as_str()).collect::<Vec<_>>(),
        ["m1", "m2", "m3"]
    );
}

#[test]
fn duplicate_ids_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "d.csv",
        "id,description,source\nm1,sweet,a\nm1,woody,a\n",
    );
    let err = load_corpus(&p, CorpusFormat::Csv).unwrap_err();
    assert!(err.to_string().contains("m1"), "{err}");
}

#[test]
fn wrong_header_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(&dir, "h.csv", "name,text\nm1,sweet\n");
    assert!(load_corpus(&p, CorpusFormat::Csv).is_err());
    let p = write(&dir, "h.jsonl", "{\"id\": \"m1\"\n");
    assert!(load_corpus(&p, CorpusFormat::Jsonl).is_err());
}

#[test]
fn statistics_from_loaded_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let docs = load_corpus(&write(&dir, "c.csv", CSV), CorpusFormat::Csv).unwrap();
    let lex = build_lexicon(&docs);
    assert_eq!(lex.freq("sweet"), Some(2));
    assert_eq!(lex.freq("woody"), Some(2));
    let pareto = frequency_report(&lex);
    let last = pareto.to_csv();
    assert!(last.trim_end().ends_with(",1"), "{last}");
    let (kept, discarded) = prune(&lex, 2).unwrap();
    assert!(kept.iter().all(|(_, e)| e.freq >= 2));
    assert!(discarded > 0.0 && discarded < 1.0);
    let co = cooccurrence(
        &docs,
        &["sweet".into()],
        &["vanilla".into(), "smoky".into()],
    )
    .unwrap();
    assert_eq!(co.get("sweet", "vanilla"), Some(1.0));
    assert_eq!(co.get("sweet", "smoky"), Some(0.0));
}
