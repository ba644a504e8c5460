use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const REST: [[f64; 3]; 15] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.02],
    [0.0, 0.72, 0.05],
    [0.18, 0.48, 0.0],
    [0.22, 0.2, 0.05],
    [0.2, -0.05, 0.12],
    [-0.18, 0.48, 0.0],
    [-0.24, 0.22, -0.03],
    [-0.25, -0.02, 0.04],
    [0.1, -0.02, 0.0],
    [0.12, -0.45, 0.06],
    [0.11, -0.88, 0.0],
    [-0.1, -0.02, 0.0],
    [-0.12, -0.46, 0.03],
    [-0.1, -0.9, -0.04],
];

const JOINTS: [&str; 15] = [
    "hip", "neck", "head", "l-shoulder", "l-elbow", "l-hand", "r-shoulder", "r-elbow", "r-hand",
    "l-hip", "l-knee", "l-foot", "r-hip", "r-knee", "r-foot",
];

fn poselift(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_poselift"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Rest pose swaying with `group`-dependent joint motions.
fn motion(group: usize, frames: usize, dims: usize) -> String {
    let axes = ["x", "y", "z"];
    let mut s = format!("frame,joint,{}\n", axes[..dims].join(","));
    for t in 0..frames {
        for (j, p) in REST.iter().enumerate() {
            let mut q = *p;
            if j > 0 {
                for (d, v) in q.iter_mut().enumerate() {
                    let phase = (j * 3 + d + 7 * group) as f64;
                    let t = t as f64;
                    *v += 0.08 * (0.13 * (group + 1) as f64 * t + phase).sin()
                        + 0.03 * (0.41 * t + 2.0 * phase).cos();
                }
            }
            let vals: Vec<String> = q[..dims].iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&format!("{t},{},{}\n", JOINTS[j], vals.join(",")));
        }
    }
    s
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let ws = Workspace { dir: tempfile::tempdir().unwrap() };
        for g in 0..3 {
            ws.write(&format!("corpus/g{g}.csv"), &motion(g, 80, 3));
        }
        ws.write("groups.json", r#"{"walk":["corpus/g0.csv"],"wave":["corpus/g1.csv"],"bend":["corpus/g2.csv"]}"#);
        ws.write("gt.csv", &motion(1, 12, 3));
        ws.write("input.csv", &motion(1, 12, 2));
        ws.write(
            "config.json",
            r#"{"dictionary":"dict.json","lift":{"camera_starts":4},"repeats":2,"out":"out"}"#,
        );
        ws
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) {
        let p = self.path(name);
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, text).unwrap();
    }

    fn run(&self, args: &[&str]) -> Output {
        poselift(args, self.dir.path())
    }

    fn build(&self) {
        let out = self.run(&["build-dict", "--manifest", "groups.json", "--bases", "3", "--out", "dict.json"]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn build_dict_reports_columns() {
    let ws = Workspace::new();
    let out = ws.run(&["build-dict", "--manifest", "groups.json", "--bases", "3", "--out", "dict.json"]);
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("M = 9"), "{stdout}");
    assert!(ws.path("dict.json").is_file());
}

#[test]
fn reconstruct_compare_and_sweep_succeed() {
    let ws = Workspace::new();
    ws.build();

    let out = ws.run(&["reconstruct", "--config", "config.json", "--input", "input.csv", "--filter", "mma", "--window", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(ws.path("out/baseline/sequence.csv").is_file());
    assert!(ws.path("out/mma_w5/sequence.csv").is_file());
    assert!(!ws.path("out/sma_w5").exists());

    let out = ws.run(&["compare", "--config", "config.json", "--gt", "gt.csv", "--filter", "sma,ema", "--out", "cmp"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = fs::read_to_string(ws.path("cmp/report.csv")).unwrap();
    assert_eq!(report.lines().next().unwrap(), "joint,baseline,sma_w5,ema_w5");
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("joint,baseline"));

    let out = ws.run(&["noise-sweep", "--config", "config.json", "--gt", "gt.csv", "--filter", "mma", "--snr", "-3,20", "--out", "sweep"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let sweep = fs::read_to_string(ws.path("sweep/report.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 2 * 2);
    assert!(sweep.contains("baseline,-3.0,"));
}

#[test]
fn exit_codes_follow_error_class() {
    let ws = Workspace::new();
    // usage errors
    assert_eq!(code(&ws.run(&["reconstruct"])), 1);
    assert_eq!(code(&ws.run(&["frobnicate"])), 1);
    assert_eq!(code(&ws.run(&["compare", "--gt", "gt.csv", "--filter", "median"])), 1);
    assert_eq!(code(&ws.run(&["--help"])), 0);
    // configuration errors
    assert_eq!(code(&ws.run(&["compare", "--config", "nope.json", "--gt", "gt.csv"])), 1);
    assert_eq!(code(&ws.run(&["compare", "--config", "config.json", "--gt", "gt.csv"])), 1, "dictionary not built yet");
    ws.build();
    assert_eq!(code(&ws.run(&["compare", "--config", "config.json", "--gt", "gt.csv", "--window", "0"])), 1);
    // data errors
    let out = ws.run(&["compare", "--config", "config.json", "--gt", "missing.csv"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.csv"));
    ws.write("bad.csv", "frame,joint,x,y,z\n0,hip,1,2\n");
    assert_eq!(code(&ws.run(&["compare", "--config", "config.json", "--gt", "bad.csv"])), 2);
    assert_eq!(code(&ws.run(&["reconstruct", "--config", "config.json", "--input", "gt.csv"])), 2);
}
