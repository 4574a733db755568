use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn randprior(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randprior"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

#[test]
fn sweep_without_config_is_a_config_error() {
    assert_eq!(randprior(&["sweep"]).status.code(), Some(2));
}

#[test]
fn bad_configs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let malformed = write(tmp.path(), "bad.toml", "[env\nkind = ");
    let unknown = write(
        tmp.path(),
        "unknown.toml",
        "[env]\nkind = \"chain\"\nsize = 5\n[agent]\nbogus = 1\n",
    );
    let cartpole = write(tmp.path(), "cp.toml", "[env]\nkind = \"cartpole\"\n");
    let missing = tmp.path().join("nope.toml").display().to_string();
    for cfg in [&malformed, &unknown, &missing] {
        assert_eq!(
            randprior(&["sweep", "--config", cfg]).status.code(),
            Some(2),
            "{cfg}"
        );
    }
    assert_eq!(
        randprior(&["run-chain", "--config", &cartpole])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        randprior(&["demo-coin", "--config", &unknown])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn small_chain_run_writes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "chain.toml",
        "[experiment]\nbudget = 150\nseeds = 2\nrecord_wallclock = false\n\
         [env]\nkind = \"chain\"\nsize = 4\n[agent]\nensemble_size = 3\n\
         [grid]\nagents = [\"bsp\", \"eps_greedy\"]\n",
    );
    let out = tmp.path().join("out");
    let o = randprior(&[
        "run-chain",
        "--config",
        &cfg,
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = results.lines();
    assert_eq!(
        lines.next().unwrap(),
        "config_hash,env_kind,N,agent,K,beta,lambda_reg,eps0,seed,time_to_learn,learned,final_trailing_regret,wallclock_s"
    );
    assert_eq!(lines.count(), 4);
    assert_eq!(fs::read_dir(out.join("curves")).unwrap().count(), 4);
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.starts_with("config_hash,agent,N,solved,seeds,median_time_to_learn"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write(
        tmp.path(),
        "chain.toml",
        "[experiment]\nbudget = 50\nseeds = 1\nrecord_wallclock = false\n\
         [env]\nkind = \"chain\"\nsize = 4\n[agent]\nkind = \"eps_greedy\"\n",
    );
    let run = |seed: &str, name: &str| {
        let out = tmp.path().join(name);
        let o = randprior(&[
            "run-chain",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(out.join("results.csv")).unwrap()
    };
    assert_eq!(run("3", "a"), run("3", "b"));
    assert_ne!(run("3", "a"), run("4", "c"));
}

#[test]
fn demos_print_or_write_tables() {
    let o = randprior(&["demo-coin"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("n_heads,n_tails,kind,value,density"));

    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let o = randprior(&[
        "demo-distributional-regret",
        "--budget",
        "1000",
        "--out",
        out,
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("distributional_regret.csv").exists());
    let o = randprior(&["sanity-linear", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    assert!(tmp.path().join("sanity_linear.csv").exists());
    assert!(tmp.path().join("bonus_misalignment.csv").exists());
}
