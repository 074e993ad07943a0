use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tumorfuse::labels::{LabelMap, LabelSchema, Subregion};
use tumorfuse::nifti::{read_nifti, write_nifti};
use tumorfuse::phantom::{generate_phantom, PhantomSpec};
use tumorfuse::volume::{Dims, Volume};
use tumorfuse::decompose;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tumorfuse"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn labels_at(path: &Path) -> LabelMap {
    LabelMap::new(read_nifti(path).unwrap().into_labels().unwrap(), LabelSchema::pediatric()).unwrap()
}

fn write_spec(dir: &Path, body: &str) -> PathBuf {
    let p = dir.join("spec.cfg");
    fs::write(&p, body).unwrap();
    p
}

#[test]
fn phantom_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "phantom.dims = 40 40 24\nphantom.n_lesions = 2\nphantom.seed = 42\nphantom.degrade.0 = dilate(ET, 1)\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&["phantom", "--spec", s(&spec), "--out", s(out)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["gt.nii", "pred.nii"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
}

#[test]
fn phantom_without_lesions_is_empty() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "phantom.dims = 8,8,8\nphantom.n_lesions = 0\n");
    let o = run(&["phantom", "--spec", s(&spec), "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gt = labels_at(&dir.path().join("gt.nii"));
    assert!(gt.volume().data().iter().all(|v| *v == 0));
    assert!(!dir.path().join("pred.nii").exists());
}

#[test]
fn phantom_drop_label_removes_ed() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(
        dir.path(),
        "phantom.dims = 40 40 24\nphantom.n_lesions = 2\nphantom.seed = 3\nphantom.degrade.0 = drop_label(ED)\n",
    );
    let o = run(&["phantom", "--spec", s(&spec), "--out", s(dir.path()), "--compress"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let gt = labels_at(&dir.path().join("gt.nii.gz"));
    let pred = labels_at(&dir.path().join("pred.nii.gz"));
    assert!(gt.count(Subregion::ED) > 0);
    assert_eq!(pred.count(Subregion::ED), 0);
}

#[test]
fn phantom_spec_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "phantom.dims = 8,8,8\nphantom.sed = 1\n");
    let o = run(&["phantom", "--spec", s(&spec), "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: config-error"), "{}", stderr(&o));
}

/// Writes the whole-tumor mask and the ET/CC/ED map of a phantom.
fn split_phantom(m: &LabelMap, dir: &Path) -> (PathBuf, PathBuf) {
    let (wt, sub) = decompose(m).unwrap();
    let ped = LabelSchema::pediatric();
    let data = (0..wt.bits().len())
        .map(|i| {
            if sub.et().bits()[i] {
                ped.code(Subregion::ET).unwrap()
            } else if sub.cc().bits()[i] {
                ped.code(Subregion::CC).unwrap()
            } else if sub.ed().bits()[i] {
                ped.code(Subregion::ED).unwrap()
            } else {
                0
            }
        })
        .collect();
    let (wt_path, sub_path) = (dir.join("wt.nii"), dir.join("sub.nii"));
    write_nifti(&wt.to_volume(), &wt_path, false).unwrap();
    write_nifti(&Volume::new(m.geometry().clone(), data).unwrap(), &sub_path, false).unwrap();
    (wt_path, sub_path)
}

#[test]
fn fuse_restores_phantom_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_phantom(&PhantomSpec::random(Dims::new(40, 40, 24), [1.0, 1.0, 2.0], 3, 11)).unwrap();
    let (wt, sub) = split_phantom(&m, dir.path());
    let out = dir.path().join("fused.nii");
    let o = run(&["fuse", s(&wt), s(&sub), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains(&format!("NET={}", m.count(Subregion::NET))), "{stdout}");
    assert!(stdout.contains("outside WT: 0"), "{stdout}");
    assert_eq!(labels_at(&out), m);
}

#[test]
fn fuse_geometry_mismatch_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate_phantom(&PhantomSpec::random(Dims::new(16, 16, 16), [1.0; 3], 0, 0)).unwrap();
    let b = generate_phantom(&PhantomSpec::random(Dims::new(16, 16, 17), [1.0; 3], 0, 0)).unwrap();
    let (pa, pb) = (dir.path().join("a.nii"), dir.path().join("b.nii"));
    write_nifti(a.volume(), &pa, false).unwrap();
    write_nifti(b.volume(), &pb, false).unwrap();
    let o = run(&["fuse", s(&pa), s(&pb), "--out", s(&dir.path().join("o.nii"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: geometry-mismatch"), "{}", stderr(&o));
}

/// Three cases `c0..c2` with pred = gt.
fn cohort(dir: &Path) -> Vec<(String, PathBuf, PathBuf)> {
    fs::create_dir_all(dir.join("pred")).unwrap();
    fs::create_dir_all(dir.join("gt")).unwrap();
    (0..3)
        .map(|i| {
            let m = generate_phantom(&PhantomSpec::random(Dims::new(40, 40, 24), [1.0; 3], 2, 100 + i)).unwrap();
            let id = format!("c{i}");
            let p = dir.join("pred").join(format!("{id}.nii.gz"));
            let g = dir.join("gt").join(format!("{id}.nii"));
            write_nifti(m.volume(), &p, true).unwrap();
            write_nifti(m.volume(), &g, false).unwrap();
            (id, p, g)
        })
        .collect()
}

fn eval_lists(cases: &[(String, PathBuf, PathBuf)], out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["eval".to_string(), "--out".into(), s(out).into(), "--pred".into()];
    args.extend(cases.iter().map(|c| s(&c.1).to_string()));
    args.push("--gt".into());
    args.extend(cases.iter().map(|c| s(&c.2).to_string()));
    args.extend(extra.iter().map(|a| a.to_string()));
    run(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn eval_perfect_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let cases = cohort(dir.path());
    let out = dir.path().join("out");
    let o = eval_lists(&cases, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    let mean = md.lines().find(|l| l.starts_with("| **Mean**")).unwrap();
    let cells: Vec<&str> = mean.split('|').map(str::trim).filter(|c| !c.is_empty()).collect();
    // six dice columns, six HD95 columns, then precision and recall for WT and TC
    assert_eq!(cells.len(), 1 + 6 + 6 + 4);
    assert!(cells[1..7].iter().all(|c| *c == "1.000"), "{mean}");
    assert!(cells[7..13].iter().all(|c| *c == "0.00"), "{mean}");
    for id in ["c0", "c1", "c2"] {
        assert!(out.join("cases").join(format!("{id}.json")).exists());
    }
}

#[test]
fn eval_unreadable_case_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let mut cases = cohort(dir.path());
    let broken = dir.path().join("gt").join("broken.nii");
    fs::write(&broken, b"not a volume").unwrap();
    cases[1].2 = broken.clone();
    let out = dir.path().join("out");
    let o = eval_lists(&cases, &out, &["--jobs", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(s(&broken)), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let ids: std::collections::BTreeSet<&str> = csv
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#') && !l.starts_with("COHORT"))
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(ids.into_iter().collect::<Vec<_>>(), vec!["c0", "c2"]);
    assert!(csv.contains("# failed c1"));
}

#[test]
fn manifest_matches_explicit_lists() {
    let dir = tempfile::tempdir().unwrap();
    let cases = cohort(dir.path());
    let manifest: String = cases
        .iter()
        .map(|(id, p, g)| {
            format!(
                "{id}, {}, {}\n",
                p.strip_prefix(dir.path()).unwrap().display(),
                g.strip_prefix(dir.path()).unwrap().display()
            )
        })
        .collect();
    let mpath = dir.path().join("cases.txt");
    fs::write(&mpath, format!("# id pred gt\n{manifest}")).unwrap();

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(eval_lists(&cases, &a, &[]).status.success());
    let o = run(&["eval", "--manifest", s(&mpath), "--out", s(&b), "--jobs", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["report.csv", "report.json", "report.md", "cases/c1.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn eval_reruns_are_identical_and_report_reaggregates() {
    let dir = tempfile::tempdir().unwrap();
    let cases = cohort(dir.path());
    // make one case imperfect
    let m = generate_phantom(&PhantomSpec::random(Dims::new(40, 40, 24), [1.0; 3], 1, 7)).unwrap();
    write_nifti(m.volume(), &cases[0].1, true).unwrap();
    let cfg = dir.path().join("eval.cfg");
    fs::write(&cfg, "metrics.min_lesion_size = 20\nmetrics.percentile_method = nearest_rank\n").unwrap();

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = eval_lists(&cases, out, &["--config", s(&cfg)]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for name in ["report.csv", "report.json", "report.md"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap());
    }
    let csv = fs::read_to_string(a.join("report.csv")).unwrap();
    assert!(csv.contains("# metrics.min_lesion_size = 20"));

    let r = dir.path().join("r");
    let o = run(&["report", "--cases", s(&a.join("report.csv")), "--out", s(&r), "--format", "csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(r.join("report.csv")).unwrap(), csv);
    assert!(!r.join("report.json").exists());
}

#[test]
fn eval_comparison_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate_phantom(&PhantomSpec::random(Dims::new(40, 40, 24), [1.0; 3], 2, 5)).unwrap();
    let cmp = m.to_comparison(&LabelSchema::comparison()).unwrap();
    let (p, g) = (dir.path().join("p.nii"), dir.path().join("g.nii"));
    write_nifti(m.volume(), &p, false).unwrap();
    write_nifti(cmp.volume(), &g, false).unwrap();
    let out = dir.path().join("out");
    let o = run(&["eval", "--pred", s(&p), "--gt", s(&g), "--gt-schema", "comparison", "--out", s(&out), "--format", "md"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let md = fs::read_to_string(out.join("report.md")).unwrap();
    assert!(md.contains("Lesion-wise Dice NC"));
    assert!(md.contains("Lesion-wise Dice AVG"));
    assert!(!md.contains("Dice CC"));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = cohort(dir.path());
    let o = run(&[
        "eval",
        "--out",
        s(dir.path()),
        "--pred",
        s(&cases[0].1),
        s(&cases[1].1),
        "--gt",
        s(&cases[0].2),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["eval", "--out", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["fuse", "--mode", "sideways", "a", "b", "--out", "c"]);
    assert_eq!(o.status.code(), Some(2));
}
