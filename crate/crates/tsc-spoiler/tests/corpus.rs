use proptest::prelude::*;
use tsc_spoiler::corpus::{parse_corpus, write_corpus};
use tsc_spoiler::text::{SlangMap, WhitespaceTokenizer};
use tsc_spoiler::Error;

fn parse(text: &str, strict: bool) -> tsc_spoiler::Result<tsc_spoiler::corpus::ParsedCorpus> {
    let slang = SlangMap::parse("2(3+)\tLAUGH\n").unwrap();
    parse_corpus(text.as_bytes(), &slang, &WhitespaceTokenizer, strict)
}

#[test]
fn slang_line_example() {
    let c = parse("v1\t12.5\t\"233333\"\t0\n", true).unwrap();
    let r = &c.videos[0].records[0];
    assert_eq!(r.timestamp, 12.5);
    assert_eq!(r.tokens, ["LAUGH"]);
    assert_eq!(r.raw_text, "233333");
    assert_eq!(r.label, Some(0));
}

#[test]
fn empty_input_gives_no_videos() {
    let c = parse("", true).unwrap();
    assert!(c.videos.is_empty() && c.skipped.is_empty());
}

#[test]
fn records_are_sorted_per_video() {
    let c = parse("v1\t5\tc\n# note\n\nv1\t1\ta\nv2\t0\tz\t1\tmovie\nv1\t3\tb\n", true).unwrap();
    assert_eq!(c.videos.len(), 2);
    let ts: Vec<f64> = c.videos[0].records.iter().map(|r| r.timestamp).collect();
    assert_eq!(ts, [1.0, 3.0, 5.0]);
    assert_eq!(c.videos[0].duration, 5.0);
    assert_eq!(c.videos[1].category.as_deref(), Some("movie"));
    assert_eq!(c.videos[0].records[0].label, None);
}

#[test]
fn malformed_lines_are_skipped_with_line_numbers() {
    let text = "v1\t1\tok\t0\nv1\tsoon\tbad time\nv1\t2\tbad label\t7\nv1\t-1\tnegative\nonly two\tfields\nv1\t3\tfine\t1\n";
    let c = parse(text, false).unwrap();
    let lines: Vec<usize> = c.skipped.iter().map(|i| i.line).collect();
    assert_eq!(lines, [2, 3, 4, 5]);
    assert_eq!(c.videos[0].len(), 2);
    match parse(text, true) {
        Err(Error::Line { line, .. }) => assert_eq!(line, 2),
        other => panic!("expected a line error, got {other:?}"),
    }
}

#[test]
fn duplicates_are_kept_and_empty_texts_dropped() {
    let c = parse("v1\t1\t\"same\"\nv1\t1\t\"same\"\nv1\t2\t\"!!!\"\n", true).unwrap();
    assert_eq!(c.videos[0].len(), 2);
    assert_eq!(c.dropped_empty, 1);
}

#[test]
fn quoted_text_may_contain_quotes() {
    let c = parse("v1\t1\t\"he said \"\"no\"\"\"\n", true).unwrap();
    assert_eq!(c.videos[0].records[0].raw_text, "he said \"no\"");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn write_then_parse_round_trips(
        rows in prop::collection::vec((0usize..3, 0u32..100_000, "[a-z]{1,5}( [a-z]{1,5}){0,3}", prop::option::of(0u8..=1)), 1..30),
    ) {
        let text: String = rows
            .iter()
            .map(|(v, t, s, l)| format!("v{v}\t{}\t\"{s}\"\t{}\n", *t as f64 / 100.0, l.map(|x| x.to_string()).unwrap_or_default()))
            .collect();
        let first = parse(&text, true).unwrap();
        for v in &first.videos {
            prop_assert!(v.records.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        }
        let mut out = Vec::new();
        write_corpus(&mut out, &first.videos).unwrap();
        let second = parse(std::str::from_utf8(&out).unwrap(), true).unwrap();
        prop_assert_eq!(first.videos, second.videos);
    }
}
