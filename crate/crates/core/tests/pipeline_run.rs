use std::collections::BTreeSet;
use std::path::Path;

use dubcorpus_core::matcher::read_pairs;
use dubcorpus_core::pipeline::{Pipeline, RunConfig, Stage, StageStatus};
use dubcorpus_core::synth::{generate, SynthSpec, RUN_CONFIG};

fn ids(members: &[dubcorpus_core::matcher::PairMember]) -> Vec<String> {
    members.iter().map(|m| m.id.to_string()).collect()
}

fn run(data: &Path, out: &Path) -> Pipeline {
    let cfg = RunConfig::load(Some(&data.join(RUN_CONFIG)), &[]).unwrap();
    let mut p = Pipeline::new(out, cfg).unwrap();
    p.run_all(false).unwrap();
    p
}

#[test]
fn synthetic_run_recovers_planted_pairs() {
    let data = tempfile::tempdir().unwrap();
    let truth = generate(&SynthSpec::standard(7), data.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let p = run(data.path(), out.path());

    let pairs = read_pairs(&p.artifact(Stage::Match, "pairs.jsonl")).unwrap();
    let found: BTreeSet<(Vec<String>, Vec<String>)> = pairs
        .iter()
        .map(|p| (ids(&p.left), ids(&p.right)))
        .collect();
    let planted: Vec<(Vec<String>, Vec<String>)> = truth
        .pairs
        .iter()
        .map(|t| {
            (
                t.left.iter().map(|s| s.to_string()).collect(),
                t.right.iter().map(|s| s.to_string()).collect(),
            )
        })
        .collect();
    let hits = planted.iter().filter(|p| found.contains(*p)).count();
    println!(
        "recovered {hits}/{} planted, {} pairs total",
        planted.len(),
        pairs.len()
    );
    assert!(hits * 10 >= planted.len() * 9);
    let decoys: BTreeSet<String> = truth.decoys.iter().map(|d| d.to_string()).collect();
    for pair in &pairs {
        assert!(pair.recheck(p.config()).all());
        for m in pair.left.iter().chain(&pair.right) {
            assert!(
                !decoys.contains(&m.id.to_string()),
                "decoy {} matched",
                m.id
            );
        }
    }
}

#[test]
fn rerun_is_skipped_and_force_reproduces_bytes() {
    let data = tempfile::tempdir().unwrap();
    generate(&SynthSpec::standard(3), data.path()).unwrap();
    let out = tempfile::tempdir().unwrap();
    let mut p = run(data.path(), out.path());
    let before = std::fs::read(p.artifact(Stage::Export, "manifest.jsonl")).unwrap();
    let stats = std::fs::read(p.artifact(Stage::Stats, "stats.tsv")).unwrap();
    for (_, st) in p.run_all(false).unwrap() {
        assert!(matches!(st, StageStatus::UpToDate { .. }));
    }
    for (_, st) in p.run_all(true).unwrap() {
        assert!(matches!(st, StageStatus::Ran { .. }));
    }
    assert_eq!(
        before,
        std::fs::read(p.artifact(Stage::Export, "manifest.jsonl")).unwrap()
    );
    assert_eq!(
        stats,
        std::fs::read(p.artifact(Stage::Stats, "stats.tsv")).unwrap()
    );
}

fn outputs(root: &Path) -> std::collections::BTreeMap<std::path::PathBuf, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in std::fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            let rel = p.strip_prefix(root).unwrap().to_path_buf();
            if p.is_dir() {
                stack.push(p);
            } else if rel != Path::new("ledger.json") && !rel.starts_with("cache") {
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn run_equals_individual_stages() {
    let data = tempfile::tempdir().unwrap();
    generate(&SynthSpec::standard(8), data.path()).unwrap();
    let all = tempfile::tempdir().unwrap();
    run(data.path(), all.path());

    let single = tempfile::tempdir().unwrap();
    for stage in Stage::ALL {
        let cfg = RunConfig::load(Some(&data.path().join(RUN_CONFIG)), &[]).unwrap();
        let mut p = Pipeline::new(single.path(), cfg).unwrap();
        assert!(matches!(
            p.run_stage(stage, false).unwrap(),
            StageStatus::Ran { .. }
        ));
    }
    assert_eq!(outputs(all.path()), outputs(single.path()));
}
