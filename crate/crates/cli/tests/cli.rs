use std::path::Path;
use std::process::{Command, Output};

fn stschrod(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stschrod")).args(args).output().expect("binary runs")
}

fn stdout_of(args: &[&str]) -> String {
    let out = stschrod(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn headers_match_the_schemas() {
    let cases: [(&[&str], &str); 8] = [
        (&["convergence", "--degree", "1", "--sizes", "2,4"], "p,ht,hx,relL2,relH1,rateL2,rateH1"),
        (&["stability", "--degree", "1", "--nt", "2", "--sizes", "1,2"], "p,ht,hx,ratio,relL2,relH1"),
        (&["conservation", "--nt", "4"], "p,t,mass_dev,energy_dev"),
        (&["conditioning", "--sizes", "8,16", "--rho", "1"], "p,n,rho,kappa,norm"),
        (&["gevp", "--nt", "4"], "p,Nt,re_lambda,im_lambda"),
        (&["symbol", "--rho", "2"], "p,rho,s,u,l,theta_star,residual"),
        (&["wave-check", "--sizes", "8", "--rho", "4"], "p,n,mu,kappa_block,kappa_schur,lemma_bound"),
        (&["solve", "--nt", "4"], "p,nt,nx,relL2,relH1,mass_dev_T,energy_dev_T"),
    ];
    for (args, header) in cases {
        let csv = stdout_of(args);
        assert_eq!(csv.lines().next(), Some(header), "{args:?}");
        assert!(csv.ends_with('\n') && !csv.contains('\r'));
        let width = header.split(',').count();
        assert!(rows(&csv).iter().all(|r| r.len() == width), "{args:?}");
    }
}

#[test]
fn conservation_has_one_row_per_mesh_node() {
    let csv = stdout_of(&["conservation", "--nt", "6", "--degree", "2"]);
    let r = rows(&csv);
    assert_eq!(r.len(), 7);
    assert_eq!(r[0][2].parse::<f64>().unwrap(), 0.0);
    assert!(r[6][2].parse::<f64>().unwrap() < 1e-12);
}

#[test]
fn rates_follow_from_the_error_columns() {
    let csv = stdout_of(&["convergence", "--degree", "2", "--sizes", "4,8,16"]);
    let r = rows(&csv);
    assert_eq!(r[0][5], "");
    for k in 1..r.len() {
        for (err, rate) in [(3, 5), (4, 6)] {
            let prev: f64 = r[k - 1][err].parse().unwrap();
            let cur: f64 = r[k][err].parse().unwrap();
            let stated: f64 = r[k][rate].parse().unwrap();
            assert_eq!(stated, (prev / cur).log2());
        }
    }
}

#[test]
fn output_is_deterministic() {
    let args = ["stability", "--degree", "2", "--nt", "4", "--sizes", "1,2,4"];
    assert_eq!(stdout_of(&args), stdout_of(&args));
}

#[test]
fn config_file_provides_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("out.csv");
    std::fs::write(&cfg, "degree = 3\nnt = 4\nnx = 12\ndomain = [-3.0, 3.0]\nrho = \"1,2\"\n").unwrap();
    let status = stschrod(&["solve", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("3,4,12,"));
    let overridden = stdout_of(&["solve", "--config", cfg.to_str().unwrap(), "--degree", "2"]);
    assert!(overridden.lines().nth(1).unwrap().starts_with("2,4,12,"));
    let listed = stdout_of(&["symbol", "--config", cfg.to_str().unwrap()]);
    assert_eq!(rows(&listed).len(), 2);
}

#[test]
fn bad_input_fails_cleanly() {
    for args in [
        &["solve", "--degree", "0"][..],
        &["convergence", "--domain", "-3,3.1", "--sizes", "16"],
        &["gevp", "--nt", "65"],
        &["conditioning", "--sizes", "40,20"],
        &["symbol", "--rho", "1,x"],
        &["teleport"],
    ] {
        let out = stschrod(args);
        assert!(!out.status.success(), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "degre = 2\n").unwrap();
    assert!(!stschrod(&["solve", "--config", cfg.to_str().unwrap()]).status.success());
    assert!(!stschrod(&["solve", "--config", Path::new("/nonexistent/x.toml").to_str().unwrap()]).status.success());
}
