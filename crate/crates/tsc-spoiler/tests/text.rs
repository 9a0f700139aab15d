use proptest::prelude::*;
use tsc_spoiler::text::{normalize, CharTokenizer, SlangMap, Tokenizer, WhitespaceTokenizer};

#[test]
fn laughter_digits_become_one_token() {
    let slang = SlangMap::parse("2(3+)\tLAUGH\n").unwrap();
    assert_eq!(normalize("233333", &slang, &WhitespaceTokenizer), ["LAUGH"]);
    assert_eq!(normalize("lol 2333!!", &slang, &WhitespaceTokenizer), ["lol", "LAUGH"]);
}

#[test]
fn rules_apply_in_declaration_order() {
    let slang = SlangMap::parse("# comment\nhigh energy\tALERT\nALERT ahead\tWARN\n").unwrap();
    assert_eq!(slang.len(), 2);
    assert_eq!(slang.apply("high energy ahead"), "WARN");
}

#[test]
fn replacement_matched_by_a_pattern_is_rejected() {
    assert!(SlangMap::parse("a+\taa\n").is_err());
    assert!(SlangMap::parse("x\ty\ny\tz\n").is_err());
    assert!(SlangMap::parse("(\tx\n").is_err());
    assert!(SlangMap::parse("no tab here\n").is_err());
}

#[test]
fn replacement_is_literal() {
    let slang = SlangMap::new(&[("(q)+", "$1")]).unwrap();
    assert_eq!(slang.apply("qqq!"), "$1!");
}

#[test]
fn tokenizers() {
    assert_eq!(WhitespaceTokenizer.tokenize("  a  b\tc "), ["a", "b", "c"]);
    assert_eq!(CharTokenizer.tokenize("剧透 ok2"), ["剧", "透", "ok2"]);
    assert!(normalize("?!...", &SlangMap::default(), &WhitespaceTokenizer).is_empty());
}

fn rule() -> impl Strategy<Value = (String, String)> {
    (
        prop::collection::vec(prop::sample::select(vec!["a", "b", "2", "3", "a+", "3+", "(ab)+", "[23]"]), 1..3),
        "[ab23XY]{0,3}",
    )
        .prop_map(|(p, r)| (p.concat(), r))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn apply_is_idempotent(
        rules in prop::collection::vec(rule(), 1..4),
        text in "[ab23 XY]{0,16}",
    ) {
        if let Ok(slang) = SlangMap::new(&rules) {
            let once = slang.apply(&text);
            prop_assert_eq!(slang.apply(&once), once);
        }
    }
}
