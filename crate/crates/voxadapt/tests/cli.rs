use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use voxadapt::dataset::{read_dataset, simulate, write_dataset};
use voxadapt::formats::write_labels;
use voxadapt::pipeline::{self, cmd_eval, Arm};
use voxadapt::RunConfig;
use voxadapt_core::Image;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_voxadapt"))
}

fn tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn two_frame_pair(root: &Path) -> (PathBuf, PathBuf) {
    let (pred, gt) = (root.join("pred"), root.join("gt"));
    // Frame 0: gt 0 0 1 1, pred 0 1 1 1. Frame 1: gt 2 2, pred 2 0 (plus one undefined pixel).
    write_labels(&gt.join("000000_gt.png"), &Image::from_vec(4, 1, vec![0, 0, 1, 1]).unwrap()).unwrap();
    write_labels(&pred.join("000000_pred.png"), &Image::from_vec(4, 1, vec![0, 1, 1, 1]).unwrap()).unwrap();
    write_labels(&gt.join("000001_gt.png"), &Image::from_vec(3, 1, vec![2, 2, 255]).unwrap()).unwrap();
    write_labels(&pred.join("000001_pred.png"), &Image::from_vec(3, 1, vec![2, 0, 1]).unwrap()).unwrap();
    (pred, gt)
}

#[test]
fn eval_hand_example() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = two_frame_pair(dir.path());
    let cm = cmd_eval(&pred, &gt, 3).unwrap();
    assert_eq!(cm.total(), 6);
    assert!((cm.accuracy() - 4.0 / 6.0).abs() < 1e-12);
    // IoU: class 0 1/3, class 1 2/3, class 2 1/2.
    assert!((cm.miou() - (1.0 / 3.0 + 2.0 / 3.0 + 0.5) / 3.0).abs() < 1e-12);
}

#[test]
fn eval_of_ground_truth_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let (_, gt) = two_frame_pair(dir.path());
    let out = bin().args(["eval", "--pred"]).arg(&gt).arg("--gt").arg(&gt).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("acc 1.000000"), "{text}");
    assert!(text.contains("miou 1.000000"), "{text}");
}

#[test]
fn eval_with_missing_frame_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (pred, gt) = two_frame_pair(dir.path());
    fs::remove_file(pred.join("000001_pred.png")).unwrap();
    assert!(cmd_eval(&pred, &gt, 3).is_err());
    let out = bin().args(["eval", "--pred"]).arg(&pred).arg("--gt").arg(&gt).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("000001"));
}

#[test]
fn simulate_rerun_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let status = bin().args(["--smoke", "--seed", "5", "--out"]).arg(out).arg("simulate").status().unwrap();
        assert!(status.success());
    }
    let (ta, tb) = (tree(&a), tree(&b));
    assert!(!ta.is_empty());
    let strip = |t: Vec<(PathBuf, Vec<u8>)>| -> Vec<(PathBuf, Vec<u8>)> {
        t.into_iter().filter(|(p, _)| p != Path::new("config.json")).collect()
    };
    assert_eq!(strip(ta), strip(tb));
}

#[test]
fn stored_dataset_reads_back_as_simulated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::smoke(3);
    let data = simulate(&cfg).unwrap();
    write_dataset(dir.path(), &data).unwrap();
    assert_eq!(read_dataset(dir.path(), &cfg).unwrap(), data);
}

#[test]
fn staged_commands_are_restartable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = RunConfig::smoke(8);
    let scene = "scene1";
    let sdir = pipeline::scene_dir(out, scene);

    pipeline::cmd_fuse(&cfg, out, scene).unwrap();
    let first = fs::read(sdir.join("map_1.bin")).unwrap();
    fs::remove_file(sdir.join("map_1.bin")).unwrap();
    pipeline::cmd_fuse(&cfg, out, scene).unwrap();
    assert_eq!(fs::read(sdir.join("map_1.bin")).unwrap(), first);

    let pseudo = pipeline::cmd_render_pseudo(&cfg, out, scene).unwrap();
    assert_eq!(pseudo.len(), cfg.adaptation_split().0);
    let replay = pipeline::cmd_adapt(&cfg, out, scene, Arm::Replay).unwrap();
    let finetune = pipeline::cmd_adapt(&cfg, out, scene, Arm::Finetune).unwrap();
    assert_ne!(replay, finetune);
    assert!(sdir.join("theta_1.bin").exists() && sdir.join("theta_ft.bin").exists());
}

#[test]
fn cli_rejects_unknown_scene() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin().args(["--smoke", "--out"]).arg(dir.path()).args(["fuse", "--scene", "nowhere"]).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown scene"));
}
