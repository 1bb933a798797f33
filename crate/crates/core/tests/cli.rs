//! The `vorofit` binary: subcommand chain, outputs and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use vorofit::io;

fn vorofit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vorofit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(out: &Output) -> Value {
    assert_eq!(
        code(out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 path")
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&vorofit(&[])), 1);
    assert_eq!(code(&vorofit(&["frobnicate"])), 1);
    assert_eq!(code(&vorofit(&["config", "--eps1", "abc"])), 1);
    assert_eq!(code(&vorofit(&["config", "--eps1", "0.5"])), 1);
    assert_eq!(code(&vorofit(&["config", "--threads", "0"])), 1);
    assert_eq!(
        code(&vorofit(&[
            "udf",
            "/nonexistent/points.xyz",
            "-o",
            "/tmp/x.nvdu"
        ])),
        1
    );
    assert_eq!(
        code(&vorofit(&["scene", "dodecahedron", "-o", "/tmp/never"])),
        1
    );
    assert_eq!(code(&vorofit(&["--help"])), 0);
    assert_eq!(code(&vorofit(&["--version"])), 0);
}

#[test]
fn config_snapshot() {
    let v = json(&vorofit(&["config"]));
    assert_eq!(v["eps1"], 0.001);
    assert_eq!(v["eps2"], 0.02);
    assert_eq!(v["eps3"], 0.05);
    assert_eq!(v["patch_stride"], 16);
    assert_eq!(v["patch_size"], 32);
    assert_eq!(v["resolution"], 256);
    let v = json(&vorofit(&[
        "config",
        "--resolution",
        "64",
        "--tau",
        "3",
        "--seed",
        "9",
        "--eps3",
        "0.1",
    ]));
    assert_eq!(
        (
            v["resolution"].as_u64(),
            v["detect_tau"].as_f64(),
            v["seed"].as_u64()
        ),
        (Some(64), Some(3.0), Some(9))
    );
    assert_eq!(v["eps3"], 0.1);
}

#[test]
fn subcommands_chain_on_a_scene() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let r = ["--resolution", "32"];
    json(&vorofit(&[&["scene", "cube", "-o", p(d)][..], &r].concat()));
    for f in [
        "points.xyz",
        "gt.json",
        "gt_brep.json",
        "pipeline.json",
        "pipeline_gt.json",
        "primitives/000.xyz",
    ] {
        assert!(d.join(f).is_file(), "{f}");
    }
    let gt = json(&vorofit(
        &[
            &["gt", p(&d.join("gt.json")), "-o", p(&d.join("gt2"))][..],
            &r,
        ]
        .concat(),
    ));
    assert_eq!(gt["labels_present"], 26);
    assert_eq!(
        io::load_labels(&d.join("gt2/labels.nvdl"))
            .unwrap()
            .resolution(),
        32
    );

    let u = json(&vorofit(
        &[
            &["udf", p(&d.join("points.xyz")), "-o", p(&d.join("u.nvdu"))][..],
            &r,
        ]
        .concat(),
    ));
    assert_eq!(u["normalization"]["scale"], 1.0);
    assert_eq!(
        io::load_udf(&d.join("u.nvdu")).unwrap(),
        io::load_udf(&d.join("gt/udf.nvdu")).unwrap()
    );

    let det = json(&vorofit(&[
        "detect",
        p(&d.join("u.nvdu")),
        "-o",
        p(&d.join("b.nvdb")),
    ]));
    assert!(det["boundary_voxels"].as_u64().unwrap() > 0);
    let whole = json(&vorofit(&[
        "detect",
        p(&d.join("u.nvdu")),
        "-o",
        p(&d.join("bw.nvdb")),
        "--whole",
    ]));
    assert!(whole["boundary_voxels"].as_u64().unwrap() > 0);

    let cells = json(&vorofit(&[
        "cells",
        p(&d.join("gt/udf.nvdu")),
        p(&d.join("gt/boundary.nvdb")),
        "-o",
        p(&d.join("c")),
    ]));
    assert!(cells["n_cells"].as_u64().unwrap() >= 6);
    let cells_json: Value =
        serde_json::from_slice(&std::fs::read(d.join("c/cells.json")).unwrap()).unwrap();
    assert_eq!(cells_json["adjacency"]["shape"][0], cells["n_cells"]);

    let fit = json(&vorofit(&[
        "fit",
        p(&d.join("gt/udf.nvdu")),
        p(&d.join("c/cells.nvdl")),
        "-o",
        p(&d.join("fits.json")),
        "--points",
        p(&d.join("points.xyz")),
    ]));
    assert_eq!(fit["cells"], cells["n_cells"]);
    let fits: Value = serde_json::from_slice(&std::fs::read(d.join("fits.json")).unwrap()).unwrap();
    let planes = fits
        .as_array()
        .unwrap()
        .iter()
        .filter(|f| f["fit"].to_string().contains("\"plane\""))
        .count();
    assert_eq!(planes, 6, "{fits}");

    let run = vorofit(&["pipeline", p(&d.join("pipeline.json"))]);
    assert!(code(&run) == 0 || code(&run) == 2);
    for f in [
        "brep.json",
        "fits.json",
        "udf.nvdu",
        "boundary.nvdb",
        "cells.nvdl",
    ] {
        assert!(d.join("out").join(f).is_file(), "{f}");
    }
    let eval = json(&vorofit(&[
        "eval",
        p(&d.join("gt_brep.json")),
        p(&d.join("gt_brep.json")),
        "-o",
        p(&d.join("eval.json")),
    ]));
    assert_eq!(eval["topology"]["fe_f1"], 1.0);
    assert_eq!(eval["chamfer"]["surface"], 0.0);
    assert_eq!(
        eval["detection"]["per_threshold"].as_array().unwrap().len(),
        5
    );
    let doc =
        io::parse_eval(&String::from_utf8(std::fs::read(d.join("eval.json")).unwrap()).unwrap())
            .unwrap();
    assert_eq!(doc.detection.average.surface.f1, 1.0);

    assert_eq!(
        code(&vorofit(&[
            "obj",
            p(&d.join("out/brep.json")),
            "-o",
            p(&d.join("m.obj"))
        ])),
        0
    );
    let obj = std::fs::read_to_string(d.join("m.obj")).unwrap();
    assert!(obj.starts_with("o surface_0\nv "));
}

#[test]
fn mismatched_grids_are_a_stage_failure() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    json(&vorofit(&[
        "scene",
        "two_planes",
        "-o",
        p(&d.join("a")),
        "--resolution",
        "16",
    ]));
    json(&vorofit(&[
        "scene",
        "two_planes",
        "-o",
        p(&d.join("b")),
        "--resolution",
        "8",
    ]));
    let out = vorofit(&[
        "cells",
        p(&d.join("a/gt/udf.nvdu")),
        p(&d.join("b/gt/boundary.nvdb")),
        "-o",
        p(&d.join("c")),
    ]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn invalid_manifests_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.json");
    let write = |text: &str| std::fs::write(&m, text).unwrap();
    write(r#"{"version":1,"input":{"kind":"udf_grid","path":"u.nvdu"},"output_dir":"o"}"#);
    assert_eq!(code(&vorofit(&["pipeline", p(&m)])), 1);
    write(
        r#"{"version":1,"input":{"kind":"labels","path":"l.nvdl"},"boundary":{"analytic":true},"points":"p.xyz","output_dir":"o"}"#,
    );
    assert_eq!(code(&vorofit(&["pipeline", p(&m)])), 1);
    write(
        r#"{"version":2,"input":{"kind":"points","path":"p.xyz"},"boundary":{"analytic":true},"output_dir":"o"}"#,
    );
    assert_eq!(code(&vorofit(&["pipeline", p(&m)])), 1);
    write("not json");
    assert_eq!(code(&vorofit(&["pipeline", p(&m)])), 1);
}

#[test]
fn out_of_box_points_are_normalized_and_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let scene = vorofit::scenes::sphere_plane(vorofit::scenes::default_step(32));
    let scaled: Vec<_> = scene
        .all_points()
        .iter()
        .map(|q| q * 10.0 - vorofit::geom::Vec3::repeat(3.0))
        .collect();
    io::save_points(&d.join("p.xyz"), &scaled).unwrap();
    std::fs::write(
        d.join("m.json"),
        r#"{"version":1,"input":{"kind":"points","path":"p.xyz"},"boundary":{"analytic":true},"config":{"resolution":32},"output_dir":"o"}"#,
    )
    .unwrap();
    let run = vorofit(&["pipeline", p(&d.join("m.json"))]);
    assert!(
        code(&run) == 0 || code(&run) == 2,
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let doc = io::load_brep(&d.join("o/brep.json")).unwrap();
    let n = doc.normalization.expect("normalization recorded");
    assert!((n.scale - 0.08).abs() < 0.01, "{n:?}");
    let back = n.invert(&n.apply(&scaled[0]));
    assert!((back - scaled[0]).norm() < 1e-9);
}
