#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn metameval<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_metameval"))
        .args(args)
        .output()
        .expect("spawn metameval")
}

fn step(args: &[&dyn AsRef<std::ffi::OsStr>]) {
    let out = metameval(args.iter().map(|a| a.as_ref()));
    assert!(
        out.status.success(),
        "metameval {:?} failed: {}",
        args.iter().map(|a| a.as_ref().to_owned()).collect::<Vec<_>>(),
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Partition, score, ingest and rank the bundled fixture inside `work`.
/// Returns the paths of the markdown and TSV reports.
pub fn run_pipeline(work: &Path) -> (PathBuf, PathBuf) {
    let f = fixture("pipeline");
    let mqm_part = work.join("mqm_partition.json");
    let esa_part = work.join("esa_partition.json");
    let mqm = work.join("mqm_scores.tsv");
    let esa = work.join("esa_scores.tsv");
    let data = work.join("data");
    std::fs::create_dir_all(&data).unwrap();

    step(&[&"partition", &"--assign", &f.join("mqm_assign.tsv"), &"--k", &"3", &"--out", &mqm_part]);
    step(&[
        &"score", &"--spans", &f.join("mqm_spans.tsv"), &"--assign", &f.join("mqm_assign.tsv"),
        &"--partition", &mqm_part, &"--prefix", &"MQM", &"--out", &mqm,
    ]);
    step(&[&"partition", &"--assign", &f.join("esa_assign.tsv"), &"--k", &"2", &"--out", &esa_part]);
    step(&[
        &"score", &"--scalar", &f.join("esa_raters.tsv"), &"--protocol", &"esa",
        &"--assign", &f.join("esa_assign.tsv"), &"--partition", &esa_part,
        &"--prefix", &"ESA", &"--out", &esa,
    ]);
    step(&[
        &"ingest", &"--scores", &mqm, &esa, &f.join("metrics.tsv"),
        &"--partition", &mqm_part, &"--out", &data.join("scores.tsv"),
    ]);
    let md = work.join("report.md");
    let tsv = work.join("report.tsv");
    for (format, out) in [("markdown", &md), ("tsv", &tsv)] {
        step(&[
            &"rank", &"--data", &data, &"--gold", &"MQM-1", &"--human", &"MQM-2,MQM-3,ESA-1,ESA-2",
            &"--measure", &"spa,acc-eq", &"--alpha", &"0.05", &"--perm", &"500",
            &"--pvalue-perm", &"500", &"--seed", &"42", &"--testset", &"fixture",
            &"--langpair", &"xx-yy", &"--format", &format, &"--out", out,
        ]);
    }
    (md, tsv)
}
