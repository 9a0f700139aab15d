use std::collections::BTreeMap;
use std::path::Path;

use tsc_spoiler::artifact::{hash_json, Artifact, Kind};
use tsc_spoiler::config::PipelineConfig;
use tsc_spoiler::Error;

type Demo = Artifact<BTreeMap<String, f64>, Vec<u32>>;

fn demo() -> Demo {
    let cfg: BTreeMap<String, f64> = [("beta".to_string(), 0.15)].into_iter().collect();
    Demo::new(Kind::Keyframes, cfg, BTreeMap::new(), vec![1, 2, 3]).unwrap()
}

#[test]
fn round_trip_and_config_hash() {
    let a = demo();
    assert_eq!(a.config_hash, hash_json(&a.config).unwrap());
    let b = Demo::from_json(&a.to_json().unwrap(), Kind::Keyframes, Path::new("x")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn wrong_kind_version_or_edited_config_is_rejected() {
    let text = demo().to_json().unwrap();
    let p = Path::new("x");
    assert!(matches!(Demo::from_json(&text, Kind::Checkpoint, p), Err(Error::Mismatch(_))));
    let v2 = text.replace("\"version\":1", "\"version\":2");
    assert!(matches!(Demo::from_json(&v2, Kind::Keyframes, p), Err(Error::Mismatch(_))));
    let edited = text.replace("0.15", "0.2");
    assert!(matches!(Demo::from_json(&edited, Kind::Keyframes, p), Err(Error::Mismatch(_))));
    assert!(matches!(Demo::from_json("{}", Kind::Keyframes, p), Err(Error::Format { .. })));
}

#[test]
fn config_rejects_unknown_keys() {
    assert!(PipelineConfig::parse("[filter]\nmin_count = 5\n", false).is_ok());
    let e = PipelineConfig::parse("[filter]\nmin_cont = 5\n", false).unwrap_err();
    assert!(matches!(e, Error::Config(_)));
    assert!(PipelineConfig::parse("[train.model]\nhiden_dim = 4\n", false).is_err());
    assert!(PipelineConfig::parse("{\"embedding\": {\"dims\": 4}}", true).is_err());
}

#[test]
fn config_values_reach_every_section() {
    let c = PipelineConfig::parse(
        "[paths]\ncorpus = \"c.tsv\"\n[embedding]\ndim = 8\nmin_freq = 2\n[train]\nepochs = 4\n[train.model]\nkeyframes = 2\nframe_len = 5.0\n[train.model.sbn]\nbeta = 0.3\n",
        false,
    )
    .unwrap();
    c.validate().unwrap();
    assert_eq!(c.paths.corpus.as_deref(), Some(Path::new("c.tsv")));
    assert_eq!((c.embedding.dim, c.embedding.min_freq), (8, 2));
    assert_eq!(c.train.epochs, 4);
    assert_eq!((c.train.model.keyframes, c.train.model.frame_len), (2, 5.0));
    assert_eq!(c.train.model.sbn.beta, 0.3);
    assert!(c.train.model.sbn.use_iva);
}

#[test]
fn invalid_values_fail_validation() {
    for bad in ["[filter]\nmin_density = -1.0\n", "[train]\nbatch_size = 0\n", "[embedding]\ndim = 0\n"] {
        let c = PipelineConfig::parse(bad, false).unwrap();
        assert!(matches!(c.validate(), Err(Error::Config(_))), "{bad}");
    }
}
