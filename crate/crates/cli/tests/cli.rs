use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clusterkr::{make_bands, BandConfig, CovMethod, Estimator, KernelSpec};
use clusterkr_cli::{emit_plot_data, exit_code, fmt_num};
use clusterkr_sim::{generate, DgpConfig, Setup};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_clusterkr"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Simulated data written as CSV with a constant cluster-level column.
fn write_data(dir: &Path) -> PathBuf {
    let cfg = DgpConfig {
        setup: Setup::One,
        clusters: 40,
        ng_base: 6,
        ng_last: 6,
        rho_x: 0.3,
        rho_e: 0.3,
        seed: 11,
    };
    let ds = generate(&cfg, 0).unwrap();
    let mut s = String::from("village,outcome,score,region\n");
    for i in 0..ds.n() {
        let g = ds.cluster_of(i);
        s.push_str(&format!("v{g},{},{},{}\n", ds.y()[i], ds.row(i)[0], g % 3));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, s).unwrap();
    path
}

fn data_args(path: &Path) -> Vec<String> {
    vec![
        "--data".into(),
        path.display().to_string(),
        "--cluster-col".into(),
        "village".into(),
        "--x-cols".into(),
        "score".into(),
    ]
}

fn with<'a>(head: &[&'a str], rest: &'a [String]) -> Vec<&'a str> {
    head.iter().copied().chain(rest.iter().map(String::as_str)).collect()
}

#[test]
fn fit_with_automatic_bandwidth() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let before = std::fs::read(&data).unwrap();
    let d = data_args(&data);
    let o = run(&with(&["fit", "--estimator", "ll", "--h", "auto", "--y-col", "outcome", "--grid", "-1:1:5"], &d));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "score,mhat,n_effective");
    assert_eq!(lines.len(), 6);
    assert!(stderr(&o).contains("h = "));
    // Every emitted number survives a parse and re-format.
    for line in &lines[1..] {
        for (k, field) in line.split(',').enumerate() {
            if k < 2 {
                let v: f64 = field.parse().unwrap();
                assert_eq!(fmt_num(v), field);
            }
        }
    }
    assert_eq!(std::fs::read(&data).unwrap(), before);
}

#[test]
fn missing_response_column_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_args(&write_data(dir.path()));
    let o = run(&with(&["fit", "--h", "0.5"], &d));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--y-col"), "{}", stderr(&o));
    assert!(stderr(&o).to_lowercase().contains("usage"));
}

#[test]
fn varying_cluster_level_column_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "g,y,x,z\na,1,0.1,5\na,2,0.2,5\nb,3,0.3,1\nb,4,0.4,2\n").unwrap();
    let o = run(&[
        "fit", "--data", path.to_str().unwrap(), "--cluster-col", "g", "--y-col", "y", "--x-cols", "x",
        "--cluster-level-cols", "z", "--h", "0.5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cluster 'b'"), "{}", stderr(&o));
}

#[test]
fn empty_window_is_a_numerical_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_args(&write_data(dir.path()));
    let o = run(&with(&["fit", "--y-col", "outcome", "--h", "0.01", "--at", "40"], &d));
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn density_and_bandwidth_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_args(&write_data(dir.path()));
    let o = run(&with(&["density", "--at", "0;0.5", "--h", "0.4"], &d));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().next(), Some("score,fhat"));
    assert_eq!(out.lines().count(), 3);

    let o = run(&with(&["bandwidth", "--method", "cr-cv", "--y-col", "outcome", "--grid-n", "7"], &d));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 8);
    assert_eq!(out.lines().filter(|l| l.ends_with(",1")).count(), 1);
    assert!(stderr(&o).contains("method = cr-cv"));

    let o = run(&with(&["bandwidth", "--method", "cr-rot", "--y-col", "outcome", "--format", "json"], &d));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["method"], "cr-rot");
    assert!(v["h"].as_f64().unwrap() > 0.0);
}

#[test]
fn infer_writes_bands_plot_data_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let d = data_args(&write_data(dir.path()));
    let plot = dir.path().join("plot.csv");
    let svg = dir.path().join("plot.svg");
    let out = dir.path().join("bands.csv");
    let o = run(&with(
        &[
            "infer", "--y-col", "outcome", "--grid", "-0.5:0.5:3", "--undersmooth", "--grid-n", "9",
            "--plot-data", plot.to_str().unwrap(), "--svg", svg.to_str().unwrap(), "--out", out.to_str().unwrap(),
        ],
        &d,
    ));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let bands = std::fs::read_to_string(&out).unwrap();
    assert!(bands.starts_with(
        "score,mhat,se_iid,se_cr,se_lambda,ci_iid_lo,ci_iid_hi,ci_cr_lo,ci_cr_hi,ci_lambda_lo,ci_lambda_hi,warnings\n"
    ));
    let plot_text = std::fs::read_to_string(&plot).unwrap();
    assert_eq!(plot_text.lines().count(), 4);
    assert_eq!(plot_text.lines().next(), Some("x,mhat,iid_lo,iid_hi,cr_lo,cr_hi,lambda_lo,lambda_hi"));
    assert!(std::fs::read_to_string(&svg).unwrap().starts_with("<svg"));
    assert!(stderr(&o).contains("lambda = "));
}

#[test]
fn plot_data_is_stable_and_rejects_empty_input() {
    let cfg = DgpConfig {
        setup: Setup::Two,
        clusters: 30,
        ng_base: 5,
        ng_last: 5,
        rho_x: 0.5,
        rho_e: 0.5,
        seed: 3,
    };
    let ds = generate(&cfg, 1).unwrap();
    let band = BandConfig {
        kernel: KernelSpec::EPANECHNIKOV,
        estimator: Estimator::Ll,
        h_m: 0.4,
        h_f: 0.5,
        h_sigma2: 0.5,
        alpha: 0.05,
        cov_method: CovMethod::Parametric,
    };
    let bands = make_bands(&ds, &band, &[vec![-0.2], vec![0.0], vec![0.3]]).unwrap();
    let a = emit_plot_data(&bands).unwrap();
    assert_eq!(a.lines().count(), 4);
    assert_eq!(a, emit_plot_data(&bands).unwrap());
    let err = emit_plot_data(&[]).unwrap_err();
    assert_eq!(exit_code(&err), 2);
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_data(dir.path());
    let conf = dir.path().join("run.conf");
    std::fs::write(
        &conf,
        format!(
            "# fit settings\ndata = {}\ncluster_col = village\nx-cols = score\ny-col = outcome\nh = 0.5\nat = 0.25\n",
            data.display()
        ),
    )
    .unwrap();
    let c = conf.to_str().unwrap();
    let a = run(&["--config", c, "fit"]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = run(&["fit", "--config", c, "--h", "0.8"]);
    assert_eq!(b.status.code(), Some(0), "{}", stderr(&b));
    assert_ne!(stdout(&a), stdout(&b));
    let direct = run(&with(&["fit", "--y-col", "outcome", "--h", "0.8", "--at", "0.25"], &data_args(&data)));
    assert_eq!(stdout(&b), stdout(&direct));

    std::fs::write(&conf, "bogus = 1\n").unwrap();
    let o = run(&["fit", "--config", c]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key 'bogus'"));
}

#[test]
fn simulate_is_seed_determined_and_thread_independent() {
    let args = [
        "simulate", "--experiment", "ase", "--reps", "2", "--G", "60", "--ng", "5", "--rho-x", "0.2,0.5",
        "--rho-e", "0.2", "--grid-n", "6", "--seed", "9",
    ];
    let one = run(&[&args[..], &["--threads", "1"]].concat());
    let three = run(&[&args[..], &["--threads", "3"]].concat());
    assert_eq!(one.status.code(), Some(0), "{}", stderr(&one));
    assert_eq!(one.stdout, three.stdout);
    let text = stdout(&one);
    assert_eq!(text.lines().count(), 3);
    assert!(text.starts_with("rho_x,rho_e,rot_ase,rot_ase_se,rot_h,rot_h_se,cr-rot_ase"));
    let other = run(&[&args[..], &["--seed", "10"]].concat());
    assert_ne!(one.stdout, other.stdout);

    let json = run(&[
        "simulate", "--experiment", "coverage", "--reps", "2", "--G", "60", "--ng", "5", "--grid-n", "5",
        "--format", "json",
    ]);
    assert_eq!(json.status.code(), Some(0), "{}", stderr(&json));
    let v: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(v[0]["result"].as_array().unwrap().len(), 3);
    assert_eq!(v[0]["result"][2]["ci_variant"], "lambda");
}

#[test]
fn bad_arguments_map_to_usage_errors() {
    assert_eq!(run(&["simulate", "--setup", "3"]).status.code(), Some(1));
    assert_eq!(run(&["nonsense"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["simulate", "--threads", "0"]).status.code(), Some(1));
}
