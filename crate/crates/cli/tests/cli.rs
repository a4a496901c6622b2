mod support;

use std::path::{Path, PathBuf};

use support::*;

const FAST: [&str; 8] = ["--batch-size", "16", "--init-std", "0.1", "--learning-rate", "0.02", "--seed", "3"];

fn train(cache: &Path, arch: &str, epochs: &str, out: &Path) -> String {
    let mut args = vec!["train", "--cache", path_str(cache), "--arch", arch, "--epochs", epochs, "--out", path_str(out)];
    args.extend(FAST);
    ok(args)
}

fn small(dir: &Path) -> (PathBuf, PathBuf) {
    prepared(dir, 6, 6, 5)
}

#[test]
fn prepare_reports_dataset_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let (landmarks, layout) = write_landmarks(tmp.path(), 4, 6, 1);
    let out = tmp.path().join("g.cache");
    let text = ok(["prepare", "geometry", "--landmarks", path_str(&landmarks), "--layout", path_str(&layout), "--out", path_str(&out)]);
    assert!(text.contains("24 sequences"), "{text}");
    assert!(text.contains("4 subjects"), "{text}");
    assert!(text.contains("3 classes"), "{text}");

    let manifest = write_images(tmp.path(), 4, 6, 1);
    let out = tmp.path().join("a.cache");
    let text = ok(["prepare", "appearance", "--manifest", path_str(&manifest), "--out", path_str(&out)]);
    assert!(text.contains("24 sequences") && text.contains("3 key frames"), "{text}");
}

#[test]
fn rerun_with_same_inputs_is_a_no_op() {
    let tmp = tempfile::tempdir().unwrap();
    let (landmarks, layout) = write_landmarks(tmp.path(), 3, 3, 1);
    let out = tmp.path().join("g.cache");
    let args = ["prepare", "geometry", "--landmarks", path_str(&landmarks), "--layout", path_str(&layout), "--out", path_str(&out)];
    ok(args);
    let before = std::fs::read(&out).unwrap();
    let modified = std::fs::metadata(&out).unwrap().modified().unwrap();
    let text = ok(args);
    assert!(text.contains("up to date"), "{text}");
    assert_eq!(std::fs::read(&out).unwrap(), before);
    assert_eq!(std::fs::metadata(&out).unwrap().modified().unwrap(), modified);

    // A changed input rebuilds.
    let (landmarks, _) = write_landmarks(tmp.path(), 3, 3, 2);
    let text = ok(["prepare", "geometry", "--landmarks", path_str(&landmarks), "--layout", path_str(&layout), "--out", path_str(&out)]);
    assert!(text.starts_with("wrote"), "{text}");
    assert_ne!(std::fs::read(&out).unwrap(), before);
}

#[test]
fn malformed_row_names_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let (landmarks, layout) = write_landmarks(tmp.path(), 2, 3, 1);
    let text = std::fs::read_to_string(&landmarks).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let head = lines[4].rsplit_once(',').unwrap().0.to_string();
    lines[4] = format!("{head},oops");
    std::fs::write(&landmarks, lines.join("\n")).unwrap();
    let out = tmp.path().join("g.cache");
    let o = dtagn(["prepare", "geometry", "--landmarks", path_str(&landmarks), "--layout", path_str(&layout), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 5"), "{}", stderr(&o));
    assert!(!out.exists());
}

#[test]
fn same_seed_gives_identical_models() {
    let tmp = tempfile::tempdir().unwrap();
    let (geo, _) = small(tmp.path());
    let (a, b) = (tmp.path().join("a.dtag"), tmp.path().join("b.dtag"));
    train(&geo, GEOMETRY_ARCH, "3", &a);
    train(&geo, GEOMETRY_ARCH, "3", &b);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(tmp.path().join("a.dtag.log.csv")).unwrap(),
        std::fs::read(tmp.path().join("b.dtag.log.csv")).unwrap()
    );

    let c = tmp.path().join("c.dtag");
    ok(["train", "--cache", path_str(&geo), "--arch", GEOMETRY_ARCH, "--epochs", "3", "--seed", "4", "--out", path_str(&c)]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn architecture_must_fit_the_cache() {
    let tmp = tempfile::tempdir().unwrap();
    let (geo, app) = small(tmp.path());
    let out = tmp.path().join("m.dtag");
    let o = dtagn(["train", "--cache", path_str(&geo), "--arch", "D20-FC10-S3", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(!out.exists());
    let o = dtagn(["train", "--cache", path_str(&app), "--arch", GEOMETRY_ARCH, "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let o = dtagn(["train", "--cache", path_str(&geo), "--arch", "D24-FC10", "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("classifier"), "{}", stderr(&o));
}

#[test]
fn eval_and_fuse_on_training_data() {
    let tmp = tempfile::tempdir().unwrap();
    let (geo, app) = small(tmp.path());
    let (gm, am) = (tmp.path().join("g.dtag"), tmp.path().join("a.dtag"));
    let text = train(&geo, GEOMETRY_ARCH, "20", &gm);
    assert!(text.contains("training accuracy 100.00%"), "{text}");
    let log = std::fs::read_to_string(tmp.path().join("g.dtag.log.csv")).unwrap();
    assert!(log.starts_with("epoch,loss,accuracy\n") && log.lines().count() == 21, "{log}");
    ok(["train", "--cache", path_str(&app), "--arch", APPEARANCE_ARCH, "--epochs", "5", "--batch-size", "16", "--init-std", "0.1", "--learning-rate", "0.02", "--out", path_str(&am)]);

    let text = ok(["eval", "--model", path_str(&gm), "--cache", path_str(&geo)]);
    assert!(text.lines().any(|l| l.starts_with("DTGN") && l.ends_with("100.00")), "{text}");

    let report = tmp.path().join("fused");
    let text = ok([
        "fuse", "--appearance-model", path_str(&am), "--appearance-cache", path_str(&app), "--geometry-model", path_str(&gm),
        "--geometry-cache", path_str(&geo), "--alpha", "0.5", "--out", path_str(&report), "--class-names", "steady,down,up",
    ]);
    assert!(text.lines().any(|l| l.starts_with("DTAGN (alpha=0.5)") && l.ends_with("100.00")), "{text}");
    for file in ["predictions.csv", "confusion_fused.csv", "confusion_appearance.csv", "confusion_geometry.csv", "summary.txt"] {
        assert!(report.join(file).exists(), "{file}");
    }
    let confusion = std::fs::read_to_string(report.join("confusion_fused.csv")).unwrap();
    assert!(confusion.lines().next().unwrap().contains("steady,down,up"), "{confusion}");

    // A model trained without fold 0 scored on fold 0 only.
    let held = tmp.path().join("held.dtag");
    ok(["train", "--cache", path_str(&geo), "--arch", GEOMETRY_ARCH, "--epochs", "2", "--folds", "3", "--fold", "0", "--out", path_str(&held)]);
    let text = ok(["eval", "--model", path_str(&held), "--cache", path_str(&geo), "--folds", "3", "--fold", "0"]);
    assert!(text.contains("test fold 0, 12 sequences"), "{text}");

    // Swapped models are rejected.
    let o = dtagn([
        "fuse", "--appearance-model", path_str(&gm), "--appearance-cache", path_str(&app), "--geometry-model", path_str(&am),
        "--geometry-cache", path_str(&geo),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn inspect_subcommands() {
    let tmp = tempfile::tempdir().unwrap();
    let (geo, app) = small(tmp.path());
    let (gm, am) = (tmp.path().join("g.dtag"), tmp.path().join("a.dtag"));
    train(&geo, GEOMETRY_ARCH, "2", &gm);
    train(&app, APPEARANCE_ARCH, "1", &am);

    let filters = tmp.path().join("filters");
    ok(["inspect", "filters", "--model", path_str(&am), "--layer", "0", "--out", path_str(&filters)]);
    assert!(filters.join("layer0_grid.pgm").exists());
    assert!(filters.join("layer0_filters.csv").exists());
    assert!(filters.join("layer0_filter0_frame2.pgm").exists());

    let maps = tmp.path().join("maps");
    ok(["inspect", "maps", "--model", path_str(&am), "--cache", path_str(&app), "--sequence", "s01_2", "--layer", "0", "--out", path_str(&maps)]);
    let csv = std::fs::read_to_string(maps.join("layer0_maps.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 4 * IMAGE_SIZE * IMAGE_SIZE, "one row per map cell plus a header");
    assert!(maps.join("layer0_map3.pgm").exists());

    let ranking = tmp.path().join("rank.csv");
    let text = ok(["inspect", "landmarks", "--model", path_str(&gm), "--cache", path_str(&geo), "--top", "4", "--out", path_str(&ranking)]);
    assert_eq!(text.lines().count(), 1 + POINTS, "{text}");
    assert_eq!(std::fs::read_to_string(&ranking).unwrap().lines().count(), 1 + POINTS);

    let acts = tmp.path().join("acts.csv");
    let text = ok(["inspect", "activations", "--model", path_str(&gm), "--cache", path_str(&geo), "--layer", "1", "--augment", "--out", path_str(&acts)]);
    assert!(text.contains(&format!("wrote {} rows", 36 * 14)), "{text}");
    assert!(std::fs::read_to_string(&acts).unwrap().contains("s00_0#13"));

    let o = dtagn(["inspect", "filters", "--model", path_str(&am), "--layer", "99", "--out", path_str(&filters)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("valid layers are"), "{}", stderr(&o));
}

#[test]
fn config_file_supplies_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let (geo, _) = small(tmp.path());
    let config = tmp.path().join("run.cfg");
    std::fs::write(&config, "# training defaults\nepochs = 2\nbatch_size = 8\narch = D24-FC10-FC10-S3\n").unwrap();
    let out = tmp.path().join("m.dtag");
    ok(["--config", path_str(&config), "train", "--cache", path_str(&geo), "--out", path_str(&out)]);
    let log = std::fs::read_to_string(tmp.path().join("m.dtag.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2);

    ok(["--config", path_str(&config), "train", "--cache", path_str(&geo), "--epochs", "3", "--out", path_str(&out)]);
    let log = std::fs::read_to_string(tmp.path().join("m.dtag.log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 3, "the command line wins over the config file");
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.cache");
    let o = dtagn(["eval", "--model", path_str(&missing), "--cache", path_str(&missing)]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let o = dtagn(["train", "--bogus"]);
    assert_eq!(o.status.code(), Some(1));

    let o = dtagn(["--help"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("crossval"));

    let garbage = tmp.path().join("garbage.dtag");
    std::fs::write(&garbage, b"not a model").unwrap();
    let o = dtagn(["inspect", "filters", "--model", path_str(&garbage), "--out", path_str(tmp.path())]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("byte"), "{}", stderr(&o));
}
