use std::path::Path;
use std::process::{Command, Output};

fn cli(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cryptofactor"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_cache_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "[data]\ncache = \"absent-cache.csv\"\n",
    )
    .unwrap();
    let o = cli(dir.path(), &["--config", "run.toml", "analyze"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("absent-cache.csv"), "{}", stderr(&o));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["--config", "nowhere.toml", "analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nowhere.toml"));
}

#[test]
fn invalid_config_lists_the_key() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), "[analysis]\nmin_breadth = 1\n").unwrap();
    let o = cli(dir.path(), &["--config", "run.toml", "analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("min_breadth"), "{}", stderr(&o));

    std::fs::write(dir.path().join("run.toml"), "[analysis]\nmin_bredth = 8\n").unwrap();
    let o = cli(dir.path(), &["--config", "run.toml", "analyze"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("min_bredth"), "{}", stderr(&o));
}

#[test]
fn empty_universe_is_degenerate() {
    let dir = tempfile::tempdir().unwrap();
    let toml = "[data]\ncache = \"c.csv\"\n[universe]\ntop_n = 100\nexclude_ids = [\
        \"S000\",\"S001\",\"S002\",\"S003\",\"S004\",\"S005\",\"S006\",\"S007\",\"S008\",\"S009\"]\n\
        [synth]\nn_assets = 10\n";
    std::fs::write(dir.path().join("run.toml"), toml).unwrap();
    let o = cli(dir.path(), &["--config", "run.toml", "synth"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = cli(dir.path(), &["--config", "run.toml", "analyze"]);
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("empty universe"), "{}", stderr(&o));
}

#[test]
fn synth_analyze_report_round() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "[data]\ncache = \"c.csv\"\n[output]\ndir = \"res\"\n",
    )
    .unwrap();
    let o = cli(
        dir.path(),
        &["--config", "run.toml", "--seed", "5", "synth"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("c.csv").exists());
    assert!(dir.path().join("c.truth.json").exists());

    let o = cli(
        dir.path(),
        &["--config", "run.toml", "--jobs", "2", "analyze"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let cell = dir.path().join("res/cells/simple-change-all");
    let before = std::fs::read(cell.join("descriptive.txt")).unwrap();
    std::fs::write(cell.join("descriptive.txt"), "clobbered").unwrap();

    let o = cli(dir.path(), &["--config", "run.toml", "report"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(std::fs::read(cell.join("descriptive.txt")).unwrap(), before);

    let o = cli(
        dir.path(),
        &["--config", "run.toml", "--output", "elsewhere", "analyze"],
    );
    assert!(o.status.success());
    assert!(dir.path().join("elsewhere/manifest.json").exists());
}

#[test]
fn unknown_subcommand_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(dir.path(), &["frobnicate"]);
    assert!(!o.status.success());
}
