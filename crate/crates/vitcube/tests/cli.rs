mod common;

use std::path::Path;

use common::{approx, read_json, run, snapshot, truth_csv, vitcube, M0};
use tempfile::tempdir;
use vitcube::manifest::sha256_hex;
use vitcube::observations::parse_observations;
use vitcube_core::cost_model::{macs_of, resolve_arch, ArchFactors};

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn macs_identity_total_matches_cost_model() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    run(&["--out", s(&out), "macs"]);
    let base = vitcube::config::parse_base(vitcube::config::DEFAULT_BASE_TOML).unwrap();
    let expected = macs_of(&resolve_arch(&ArchFactors::IDENTITY, &base).unwrap(), &base).unwrap();

    let mut rdr = csv::Reader::from_path(out.join("macs.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    let total = rows.last().unwrap();
    assert_eq!(&total[0], "total");
    assert_eq!(total[1].parse::<u64>().unwrap(), expected.total);
    assert_eq!(total[1].parse::<u64>().unwrap(), 1_812_645_888);
    assert_eq!(total[2].parse::<u64>().unwrap(), expected.parameter_total);
    let summed: u64 = rows[..rows.len() - 1].iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert_eq!(summed, expected.total);
}

#[test]
fn exit_codes() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(vitcube(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(vitcube(&["--out", s(&out), "macs", "--bogus"]).status.code(), Some(1));
    assert_eq!(vitcube(&["--out", s(&out), "macs", "--r", "abc"]).status.code(), Some(1));
    assert_eq!(vitcube(&["--out", s(&out), "fit-gp", "--input", "/nonexistent.csv"]).status.code(), Some(2));
    assert_eq!(vitcube(&["--out", s(&out), "macs", "--r=-1"]).status.code(), Some(2));
    assert_eq!(vitcube(&["--out", s(&out), "fit-gp", "--factor", "q", "--input", "x.csv"]).status.code(), Some(1));
    assert_eq!(vitcube(&["--help"]).status.code(), Some(0));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "id,r,d_i,d_m,w,macs,top1,top5\na,1,1,1,1,-3,0.8,\n").unwrap();
    let o = vitcube(&["--out", s(&out), "pareto", "--input", s(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.csv") && err.contains("line 2"), "{err}");
}

#[test]
fn numeric_failures_map_to_exit_three() {
    use vitcube::CliError;
    let e = CliError::Core { context: "gp", source: vitcube_core::Error::Numeric("x".into()) };
    assert_eq!(e.exit_code(), 3);
    let e = CliError::Core { context: "gp", source: vitcube_core::Error::Input("x".into()) };
    assert_eq!(e.exit_code(), 2);
}

#[test]
fn config_file_and_seed_flag() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "seed = 11\n[gp]\nrestarts = 3\n").unwrap();
    let out = dir.path().join("o");
    run(&["--config", s(&cfg), "--seed", "5", "--out", s(&out), "fit-gp", "--input", s(&approx("resolution_1d.csv"))]);
    let m = read_json(&out.join("manifest.json"));
    assert_eq!(m["seed"], 5);
    assert_eq!(m["config"]["gp"]["restarts"], 3);

    std::fs::write(&cfg, "[gp]\nrestarts = 0\n").unwrap();
    assert_eq!(vitcube(&["--config", s(&cfg), "--out", s(&out), "macs"]).status.code(), Some(2));
}

#[test]
fn manifest_digests_match_inputs_and_outputs() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    let input = approx("population.csv");
    run(&["--out", s(&out), "pareto", "--input", s(&input)]);
    let m = read_json(&out.join("manifest.json"));
    let inputs = m["inputs"].as_array().unwrap();
    assert_eq!(inputs.len(), 1);
    assert_eq!(inputs[0]["sha256"], sha256_hex(&std::fs::read(&input).unwrap()));
    for o in m["outputs"].as_array().unwrap() {
        let data = std::fs::read(out.join(o["path"].as_str().unwrap())).unwrap();
        assert_eq!(o["sha256"], sha256_hex(&data));
        assert_eq!(o["bytes"], data.len());
    }
    assert!(!m["arguments"].as_array().unwrap().iter().any(|a| a == "--out"));
}

#[test]
fn selected_csv_round_trips() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    let input = approx("population.csv");
    run(&["--out", s(&out), "pareto", "--input", s(&input)]);
    let all = parse_observations(&input).unwrap().records;
    let selected = parse_observations(&out.join("selected.csv")).unwrap().records;
    let summary = read_json(&out.join("summary.json"));
    assert_eq!(selected.len(), summary["selected_count"].as_u64().unwrap() as usize);
    assert!(!selected.is_empty());
    for rec in &selected {
        let orig = all.iter().find(|r| r.id == rec.id).unwrap();
        assert_eq!(orig, rec);
    }
}

#[test]
fn fit_gp_posterior_columns_are_consistent() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    run(&["--out", s(&out), "fit-gp", "--input", s(&approx("resolution_1d.csv")), "--points", "50"]);
    let mut rdr = csv::Reader::from_path(out.join("posterior.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["x", "mean", "variance", "std_dev", "lower95", "upper95"]);
    let mut n = 0;
    for row in rdr.records() {
        let v: Vec<f64> = row.unwrap().iter().map(|x| x.parse().unwrap()).collect();
        assert!(v[2] >= 0.0);
        assert!((v[3] - v[2].sqrt()).abs() < 1e-15);
        assert!((v[4] - (v[1] - 1.96 * v[3])).abs() < 1e-12);
        assert!((v[5] - (v[1] + 1.96 * v[3])).abs() < 1e-12);
        n += 1;
    }
    assert_eq!(n, 50);
}

#[test]
fn grid_matrix_and_long_forms_agree() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    run(&["--out", s(&out), "grid", "--input", s(&approx("resolution_width_2d.csv")), "--nx", "7", "--ny", "5"]);
    let long: Vec<Vec<String>> = csv::Reader::from_path(out.join("surface.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    assert_eq!(long.len(), 35);
    let mut rdr = csv::Reader::from_path(out.join("mean.csv")).unwrap();
    let xs: Vec<String> = rdr.headers().unwrap().iter().skip(1).map(str::to_string).collect();
    assert_eq!(xs.len(), 7);
    for (j, row) in rdr.records().enumerate() {
        let row = row.unwrap();
        for i in 0..7 {
            let l = &long[j * 7 + i];
            assert_eq!(l[0], xs[i]);
            assert_eq!(l[1], &row[0]);
            assert_eq!(l[2], &row[i + 1]);
        }
    }
}

#[test]
fn recommend_half_baseline_on_synthetic_rule() {
    let dir = tempdir().unwrap();
    let input = dir.path().join("truth.csv");
    std::fs::write(&input, truth_csv(25, 25)).unwrap();
    let rule_dir = dir.path().join("rule");
    let m0 = format!("{M0}");
    run(&["--out", s(&rule_dir), "fit-rule", "--input", s(&input), "--m0", &m0]);
    let out = dir.path().join("rec");
    let target = 0.5 * M0;
    run(&[
        "--out",
        s(&out),
        "recommend",
        "--rule",
        s(&rule_dir.join("rule.json")),
        "--target-macs",
        &format!("{target}"),
    ]);
    let rec = read_json(&out.join("recommendation.json"));
    let achieved = rec["achieved_macs"].as_f64().unwrap();
    assert!(((achieved - target) / target).abs() <= 0.01, "achieved {achieved} for {target}");
    let text = std::fs::read_to_string(out.join("recommendation.txt")).unwrap();
    assert!(text.contains(&format!("achieved MACs     {}", rec["achieved_macs"])));
}

#[test]
fn recommend_rejects_garbage_rule() {
    let dir = tempdir().unwrap();
    let rule = dir.path().join("rule.json");
    std::fs::write(&rule, "{\"m0\": 1}").unwrap();
    let o = vitcube(&["--out", s(&dir.path().join("o")), "recommend", "--rule", s(&rule), "--target-macs", "1e9"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn attn_bench_without_timing_is_analytical() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("o");
    run(&["--out", s(&out), "attn-bench", "--tokens", "8,16", "--dims", "4"]);
    let text = std::fs::read_to_string(out.join("attn_bench.csv")).unwrap();
    assert_eq!(
        text,
        "kind,tokens,dim,macs,seconds,ratio_to_half\n\
         separable,8,4,480,,\nseparable,16,4,960,,\nmha,8,4,1024,,\nmha,16,4,3072,,\n"
    );
}

#[test]
fn two_runs_are_byte_identical() {
    let dir = tempdir().unwrap();
    let truth = dir.path().join("truth.csv");
    std::fs::write(&truth, truth_csv(20, 3)).unwrap();
    let pop = approx("population.csv");
    let runs: Vec<Vec<String>> = vec![
        vec!["macs".into(), "--r".into(), "0.9".into(), "--w".into(), "0.75".into()],
        vec!["fit-gp".into(), "--input".into(), s(&approx("resolution_1d.csv")).into()],
        vec![
            "grid".into(),
            "--input".into(),
            s(&approx("resolution_vitdepth_2d.csv")).into(),
            "--y".into(),
            "d_m".into(),
            "--nx".into(),
            "40".into(),
            "--ny".into(),
            "30".into(),
        ],
        vec!["pareto".into(), "--input".into(), s(&pop).into()],
        vec!["fit-rule".into(), "--input".into(), s(&truth).into(), "--m0".into(), format!("{M0}")],
        vec!["attn-bench".into()],
    ];
    for (k, args) in runs.iter().enumerate() {
        let mut snaps = Vec::new();
        for rep in 0..2 {
            let out = dir.path().join(format!("run{k}-{rep}"));
            let mut full = vec!["--seed".to_string(), "9".into(), "--out".into(), s(&out).into()];
            full.extend(args.iter().cloned());
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            run(&refs);
            snaps.push(snapshot(&out));
        }
        assert_eq!(snaps[0], snaps[1], "{}", args[0]);
    }
}

#[test]
fn rule_json_round_trips_exactly() {
    use vitcube_core::downsizer::{fit_rule, EfficiencyRule};
    use vitcube_core::gp::FitConfig;
    let records = vitcube::observations::read_observations(truth_csv(15, 4).as_bytes()).unwrap().records;
    let rule = fit_rule(&records, M0, &FitConfig::default()).unwrap();
    let back: EfficiencyRule = serde_json::from_str(&serde_json::to_string_pretty(&rule).unwrap()).unwrap();
    assert_eq!(rule, back);
    for c in [0.21, 0.5, 0.77, 1.1] {
        assert_eq!(rule.models.r.predict(&[c]).unwrap(), back.models.r.predict(&[c]).unwrap());
    }
}
