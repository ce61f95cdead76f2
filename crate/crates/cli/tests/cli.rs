//! End-to-end behavior of the `bethe` binary: output formats,
//! determinism, cache reuse, exit codes and row replay.

use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn bethe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bethe"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "command failed: {}\n{}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn field(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} ")))
        .unwrap_or_else(|| panic!("missing field '{key}' in:\n{stdout}"))
        .to_string()
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

#[test]
fn infer_prints_estimates_and_writes_beliefs() {
    let dir = TempDir::new().unwrap();
    let beliefs = dir.path().join("beliefs.txt");
    let out = bethe(&[
        "infer",
        "--graph",
        "grid:3x3",
        "--omega-f",
        "1.0",
        "--omega-i",
        "0.5",
        "--coupling",
        "mixed",
        "--seed",
        "11",
        "--model-index",
        "2",
        "--method",
        "bethe",
        "--out",
        beliefs.to_str().unwrap(),
    ]);
    let stdout = stdout_of(&out);
    let _: f64 = field(&stdout, "log_partition_estimate").parse().unwrap();
    let dz: f64 = field(&stdout, "logz_error").parse().unwrap();
    assert!(dz.is_finite() && dz >= 0.0);
    let text = std::fs::read_to_string(&beliefs).unwrap();
    assert!(text.starts_with("# beliefs\n9\n"));
}

#[test]
fn infer_on_a_model_file_round_trips_through_serialization() {
    let dir = TempDir::new().unwrap();
    let model_path = dir.path().join("m.fg");
    let g = bethe_core::build_grid(2, 3, false).unwrap();
    let spec = bethe_core::EnsembleSpec {
        field_strength: 0.5,
        interaction_strength: 1.0,
        coupling: bethe_core::CouplingMode::Mixed,
        seed: 4,
        num_models: 1,
    };
    let p: bethe_core::LogPotentials = bethe_core::sample_ising(&g, &spec, 0).unwrap();
    write(&model_path, &bethe_core::serialize_model(&g, &p));

    let out = bethe(&[
        "infer",
        "--model",
        model_path.to_str().unwrap(),
        "--method",
        "bethe",
    ]);
    let stdout = stdout_of(&out);
    // Same model generated in-process gives the same estimate.
    let direct = bethe_core::run_counting_bp(
        &g,
        &p,
        &bethe_core::bethe_numbers(&g),
        &bethe_core::PropagationOptions::default(),
    )
    .unwrap();
    let printed: f64 = field(&stdout, "log_partition_estimate").parse().unwrap();
    assert!((printed - direct.log_partition_estimate).abs() < 1e-12);
}

#[test]
fn sweep_coupling_is_deterministic_and_parallelism_invariant() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    write(
        &cfg,
        "graph = grid:2x3\n\
         omega_f = 1.0\n\
         omega_i = 0.5 1.0\n\
         coupling = mixed\n\
         methods = bethe convexBethe_c\n\
         num_models = 3\n\
         seed = 5\n",
    );
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    let out_c = dir.path().join("c.csv");
    stdout_of(&bethe(&[
        "sweep-coupling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_a.to_str().unwrap(),
        "--jobs",
        "1",
    ]));
    stdout_of(&bethe(&[
        "sweep-coupling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_b.to_str().unwrap(),
        "--jobs",
        "1",
    ]));
    stdout_of(&bethe(&[
        "sweep-coupling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_c.to_str().unwrap(),
        "--jobs",
        "4",
    ]));
    let a = std::fs::read(&out_a).unwrap();
    let b = std::fs::read(&out_b).unwrap();
    let c = std::fs::read(&out_c).unwrap();
    assert_eq!(a, b, "reruns must be byte-identical");
    assert_eq!(a, c, "thread count must not affect output");
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("omega_f,omega_i,method,"));
    assert!(text.lines().count() == 1 + 2 * 2, "{text}");
    assert!(text.ends_with('\n'));
    assert!(!text.contains('\r'));
}

#[test]
fn sweep_rows_are_replayable_through_infer() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    write(
        &cfg,
        "graph = grid:2x3\n\
         omega_f = 0.7\n\
         omega_i = 0.9 1.3\n\
         coupling = attractive\n\
         methods = bethe\n\
         num_models = 3\n\
         seed = 21\n",
    );
    let out_csv = dir.path().join("sweep.csv");
    stdout_of(&bethe(&[
        "sweep-coupling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let omega_i = row[1];
    let mean_logz: f64 = row[3].parse().unwrap();

    // Replay every model index at this point and average.
    let mut sum = 0.0;
    for k in 0..3 {
        let out = bethe(&[
            "infer",
            "--graph",
            "grid:2x3",
            "--omega-f",
            "0.7",
            "--omega-i",
            omega_i,
            "--coupling",
            "attractive",
            "--seed",
            "21",
            "--model-index",
            &k.to_string(),
            "--method",
            "bethe",
        ]);
        let stdout = stdout_of(&out);
        sum += field(&stdout, "logz_error").parse::<f64>().unwrap();
    }
    assert!(
        (sum / 3.0 - mean_logz).abs() < 1e-12,
        "replayed mean {} vs row mean {}",
        sum / 3.0,
        mean_logz
    );
}

#[test]
fn moments_cache_is_reused_not_reestimated() {
    let dir = TempDir::new().unwrap();
    let moments = dir.path().join("A.mat");
    // Estimate with a deliberately small budget so a silent
    // re-estimation (default budget) would rewrite the file.
    stdout_of(&bethe(&[
        "estimate-moments",
        "--graph",
        "grid:2x2",
        "--chains",
        "3",
        "--samples",
        "400",
        "--thin",
        "2",
        "--rhat",
        "3.0",
        "--seed",
        "9",
        "--out",
        moments.to_str().unwrap(),
    ]));
    let before = std::fs::read(&moments).unwrap();

    let cfg = dir.path().join("sweep.cfg");
    write(
        &cfg,
        &format!(
            "graph = grid:2x2\n\
             omega_f = 0.5\n\
             omega_i = 0.5 1.0\n\
             methods = convexBethe_mu\n\
             num_models = 2\n\
             seed = 9\n\
             moments = {}\n",
            moments.display()
        ),
    );
    let out_csv = dir.path().join("mu.csv");
    stdout_of(&bethe(&[
        "sweep-coupling",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]));
    let after = std::fs::read(&moments).unwrap();
    assert_eq!(before, after, "cached moments must be reused untouched");
    assert!(out_csv.exists());
}

#[test]
fn estimate_moments_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.mat");
    let b = dir.path().join("b.mat");
    for out in [&a, &b] {
        stdout_of(&bethe(&[
            "estimate-moments",
            "--graph",
            "grid:2x2",
            "--chains",
            "3",
            "--samples",
            "300",
            "--thin",
            "2",
            "--rhat",
            "3.0",
            "--seed",
            "123",
            "--out",
            out.to_str().unwrap(),
        ]));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn optimize_counting_writes_numbers_readable_by_infer() {
    let dir = TempDir::new().unwrap();
    let numbers = dir.path().join("c.txt");
    let trace = dir.path().join("trace.csv");
    let stdout = stdout_of(&bethe(&[
        "optimize-counting",
        "--graph",
        "grid:2x3",
        "--omega-f",
        "0.5",
        "--omega-i",
        "1.0",
        "--coupling",
        "mixed",
        "--seed",
        "3",
        "--method",
        "convexBethe_u",
        "--out",
        numbers.to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
    ]));
    let bound: f64 = field(&stdout, "bound").parse().unwrap();
    assert!(bound.is_finite());
    let trace_text = std::fs::read_to_string(&trace).unwrap();
    assert!(trace_text.starts_with("iteration,bound,gap\n"));

    let out = bethe(&[
        "infer",
        "--graph",
        "grid:2x3",
        "--omega-f",
        "0.5",
        "--omega-i",
        "1.0",
        "--coupling",
        "mixed",
        "--seed",
        "3",
        "--model-index",
        "0",
        "--counting",
        numbers.to_str().unwrap(),
    ]);
    let stdout = stdout_of(&out);
    let estimate: f64 = field(&stdout, "log_partition_estimate").parse().unwrap();
    assert!(
        (estimate - bound).abs() < 1e-6,
        "re-running at the optimized numbers reproduces the bound"
    );
}

#[test]
fn sweep_space_flags_the_known_cells() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("space.cfg");
    write(
        &cfg,
        "graph = grid:3x3:toroidal\n\
         omega_f = 1.0\n\
         omega_i_value = 0.5\n\
         num_models = 2\n\
         seed = 2\n\
         ci_range = -3 1\n\
         ca_range = 0.5 1\n\
         max_iters = 2000\n",
    );
    let out_csv = dir.path().join("space.csv");
    stdout_of(&bethe(&[
        "sweep-space",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with(
        "c_i,c_alpha,mean_logz_err,mean_marg_l1,frac_converged,is_vvalid,is_certified,is_singular\n"
    ));
    let mut saw_bethe_cell = false;
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let ci: f64 = cols[0].parse().unwrap();
        let ca: f64 = cols[1].parse().unwrap();
        if (ci + 3.0).abs() < 1e-12 && (ca - 1.0).abs() < 1e-12 {
            saw_bethe_cell = true;
            // The Bethe choice is variable-valid but has no certificate
            // on the toroidal grid.
            assert_eq!(cols[5], "1", "is_vvalid: {line}");
            assert_eq!(cols[6], "0", "is_certified: {line}");
            assert_eq!(cols[7], "0", "is_singular: {line}");
        }
        // The variable-valid line is c_i = 1 - 4 c_alpha.
        let expect_vv = (ci + 4.0 * ca - 1.0).abs() <= 1e-9;
        assert_eq!(cols[5] == "1", expect_vv, "{line}");
    }
    assert!(saw_bethe_cell);

    // Non-symmetric graphs are rejected.
    let bad_cfg = dir.path().join("bad.cfg");
    write(
        &bad_cfg,
        "graph = grid:3x3\nci_range = -3 1\nca_range = 0.5 1\nout = x.csv\n",
    );
    let out = bethe(&["sweep-space", "--config", bad_cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_map_of_a_method_against_itself_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("map.cfg");
    write(
        &cfg,
        "graph = grid:2x2\n\
         method_pair = bethe bethe\n\
         omega_f_range = 0.2 0.8\n\
         omega_i_range = 0.5 1.5\n\
         num_models = 2\n\
         seed = 7\n",
    );
    let out_csv = dir.path().join("map.csv");
    stdout_of(&bethe(&[
        "sweep-map",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_csv.to_str().unwrap(),
    ]));
    let text = std::fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("omega_f,omega_i,diff_logz_err,diff_marg_l1\n"));
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[3].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn sweep_map_is_antisymmetric_under_pair_exchange() {
    let dir = TempDir::new().unwrap();
    let make = |pair: &str, name: &str| -> String {
        let cfg = dir.path().join(format!("{name}.cfg"));
        write(
            &cfg,
            &format!(
                "graph = grid:2x2\n\
                 method_pair = {pair}\n\
                 omega_f_range = 0.2 0.8\n\
                 omega_i_range = 0.5 1.5\n\
                 num_models = 2\n\
                 seed = 7\n"
            ),
        );
        let out_csv = dir.path().join(format!("{name}.csv"));
        stdout_of(&bethe(&[
            "sweep-map",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_csv.to_str().unwrap(),
        ]));
        std::fs::read_to_string(&out_csv).unwrap()
    };
    let ab = make("convexBethe_c bethe", "ab");
    let ba = make("bethe convexBethe_c", "ba");
    for (la, lb) in ab.lines().skip(1).zip(ba.lines().skip(1)) {
        let a: Vec<&str> = la.split(',').collect();
        let b: Vec<&str> = lb.split(',').collect();
        assert_eq!(a[0], b[0]);
        assert_eq!(a[1], b[1]);
        for k in [2usize, 3] {
            let x: f64 = a[k].parse().unwrap();
            let y: f64 = b[k].parse().unwrap();
            assert!((x + y).abs() < 1e-15, "{x} vs {y}");
        }
    }
}

#[test]
fn exit_codes_follow_the_contract() {
    // Config error: malformed config file.
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.cfg");
    write(&bad, "graph grid:2x2\n");
    let out = bethe(&["sweep-coupling", "--config", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    // Config error: unknown method.
    let out = bethe(&[
        "infer",
        "--graph",
        "grid:2x2",
        "--method",
        "magic",
    ]);
    assert_eq!(out.status.code(), Some(1));

    // Numerical failure: exact inference guard on a dense graph.
    let out = bethe(&[
        "infer",
        "--graph",
        "complete:30",
        "--omega-f",
        "0.1",
        "--omega-i",
        "0.1",
        "--method",
        "bethe",
    ]);
    assert_eq!(out.status.code(), Some(2));

    // Same command without the exact pass succeeds.
    let out = bethe(&[
        "infer",
        "--graph",
        "complete:30",
        "--omega-f",
        "0.1",
        "--omega-i",
        "0.1",
        "--method",
        "bethe",
        "--no-exact",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn infer_is_deterministic_across_runs() {
    let args = [
        "infer",
        "--graph",
        "grid:3x3",
        "--omega-f",
        "0.3",
        "--omega-i",
        "1.2",
        "--coupling",
        "mixed",
        "--seed",
        "77",
        "--model-index",
        "5",
        "--method",
        "convexBethe_c",
    ];
    let a = stdout_of(&bethe(&args));
    let b = stdout_of(&bethe(&args));
    assert_eq!(a, b);
}
