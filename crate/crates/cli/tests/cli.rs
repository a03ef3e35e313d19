use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use farkas_core::certificates::read_certificate;
use farkas_core::model::Subsystem;
use farkas_core::witness::parse_lp_file;
use farkas_core::{parse_model, verify_certificate};
use tempfile::TempDir;

const D1: &str = "dtmc\nstates: 4\ninitial: 0\ngoal: 2\nfail: 3\n0 - 1 1/2\n0 - 2 3/10\n0 - 3 1/5\n1 - 2 2/5\n1 - 3 3/5\n";

const CHOICE: &str = "mdp\nstates: 4\ninitial: 0\ngoal: 2\nfail: 3\n0 a 1 1/2\n0 a 3 1/2\n0 b 2 1/4\n0 b 3 3/4\n1 a 2 1\n";

const TRIANGLE: &str = "graph 3\n0 1\n0 2\n1 2\n";

/// Six vertices with a single triangle; the exact search cannot close the
/// gap at the root.
const SIX: &str = "graph 6\n0 1\n0 2\n1 2\n2 3\n3 4\n4 5\n1 3\n0 5\n";

struct Env {
    dir: TempDir,
}

impl Env {
    fn new() -> Self {
        let env = Env { dir: TempDir::new().unwrap() };
        env.write("d1.txt", D1);
        env.write("choice.txt", CHOICE);
        env.write("k3.graph", TRIANGLE);
        env.write("six.graph", SIX);
        env
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn write(&self, name: &str, text: &str) {
        fs::write(self.path(name), text).unwrap();
    }

    fn read(&self, name: &str) -> String {
        fs::read_to_string(self.path(name)).unwrap()
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_farkas")).current_dir(self.dir.path()).args(args).output().unwrap()
    }
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn model_at(path: &Path) -> farkas_core::ReachMdp {
    parse_model(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn probability_rational_and_decimal() {
    let env = Env::new();
    let out = env.run(&["probability", "d1.txt", "--dir", "min"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "1/2\n"));
    let out = env.run(&["probability", "choice.txt", "--dir", "max", "--decimal", "3"]);
    assert_eq!(stdout(&out), "0.500\n");
    let out = env.run(&["probability", "choice.txt", "--dir", "min"]);
    assert_eq!(stdout(&out), "1/4\n");
}

#[test]
fn certify_then_verify() {
    let env = Env::new();
    let out = env.run(&["certify", "d1.txt", "--prop", "min>=2/5", "-o", "cert.txt"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = env.read("cert.txt");
    assert!(text.starts_with("farkas-certificate\nproperty: min ge 2/5\nkind: z\n"), "{text}");
    let out = env.run(&["verify", "d1.txt", "cert.txt"]);
    assert_eq!((code(&out), stdout(&out).as_str()), (0, "verified\n"));
}

#[test]
fn tampered_certificate_is_rejected() {
    let env = Env::new();
    env.write("bad.txt", "farkas-certificate\nproperty: min ge 2/5\nkind: z\n0 51/100\n1 2/5\n");
    let out = env.run(&["verify", "d1.txt", "bad.txt"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("violated by 1/100"), "{}", stdout(&out));
}

#[test]
fn false_property_exits_3() {
    let env = Env::new();
    assert_eq!(code(&env.run(&["certify", "d1.txt", "--prop", "min>=3/5"])), 3);
    assert_eq!(code(&env.run(&["certify", "d1.txt", "--prop", "max>1/2"])), 3);
    assert_eq!(code(&env.run(&["witness", "d1.txt", "--prop", "min>=3/5", "--method", "exact"])), 3);
    assert_eq!(code(&env.run(&["tree-witness", "d1.txt", "--lambda", "0.6"])), 3);
}

#[test]
fn input_errors_exit_1() {
    let env = Env::new();
    env.write("broken.txt", "dtmc\nstates: 2\ninitial: 0\ngoal: 1\nfail: 1\n");
    assert_eq!(code(&env.run(&["probability", "d1.txt", "--dir", "min", "--bogus"])), 1);
    assert_eq!(code(&env.run(&["nonsense"])), 1);
    assert_eq!(code(&env.run(&["probability", "missing.txt", "--dir", "min"])), 1);
    assert_eq!(code(&env.run(&["probability", "broken.txt", "--dir", "min"])), 1);
    assert_eq!(code(&env.run(&["certify", "d1.txt", "--prop", "min>=3/2"])), 1);
    assert_eq!(code(&env.run(&["witness", "d1.txt", "--prop", "min>3/10"])), 1);
    assert_eq!(code(&env.run(&["witness", "d1.txt", "--prop", "min>=3/10", "--flavor", "max"])), 1);
    assert_eq!(code(&env.run(&["tree-witness", "choice.txt", "--lambda", "0"])), 1);
    assert_eq!(code(&env.run(&["gen-clique", "k3.graph", "2"])), 1);
}

#[test]
fn exact_witness_of_d1() {
    let env = Env::new();
    let out = env.run(&["witness", "d1.txt", "--prop", "min>=3/10", "--method", "exact", "-o", "sub.txt"]);
    assert_eq!(code(&out), 0);
    let text = env.read("sub.txt");
    assert!(text.ends_with("# states 1 # optimal true # bounds 1 1\n"), "{text}");
    let sub = Subsystem::from_text(&text, &parse_model(D1).unwrap()).unwrap();
    assert_eq!(sub.state_count(), 1);
}

#[test]
fn exhausted_node_limit_reports_non_optimal() {
    let env = Env::new();
    assert_eq!(code(&env.run(&["gen-clique", "six.graph", "3", "-o", "six.txt"])), 0);
    let out = env.run(&["witness", "six.txt", "--prop", "min>=1/6", "--method", "exact", "--nodes", "0"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("# optimal false"), "{}", stdout(&out));
    let out = env.run(&["witness", "six.txt", "--prop", "min>=1/6", "--method", "exact"]);
    assert!(stdout(&out).contains("# optimal true"));
}

#[test]
fn gen_clique_sidecar() {
    let env = Env::new();
    let out = env.run(&["gen-clique", "k3.graph", "3"]);
    let text = stdout(&out);
    assert!(text.ends_with("# lambda 2/3\n# kprime 9\n"), "{text}");
    assert_eq!(parse_model(&text).unwrap().state_count(), 9);
}

#[test]
fn reduce_keeps_probability() {
    let env = Env::new();
    for to in ["state-from-size", "state-from-transition"] {
        let out = env.run(&["reduce", "choice.txt", "--to", to, "-o", "red.txt"]);
        assert_eq!(code(&out), 0);
        for dir in ["min", "max"] {
            let a = stdout(&env.run(&["probability", "choice.txt", "--dir", dir]));
            let b = stdout(&env.run(&["probability", "red.txt", "--dir", dir]));
            assert_eq!(a, b, "{to} {dir}");
        }
    }
}

#[test]
fn validate_reports_unreachable_states() {
    let env = Env::new();
    assert_eq!(stdout(&env.run(&["validate", "d1.txt"])), "ok\n");
    env.write("lonely.txt", "dtmc\nstates: 4\ninitial: 0\ngoal: 2\nfail: 3\n0 - 2 1\n1 - 3 1\n");
    let out = env.run(&["validate", "lonely.txt"]);
    assert_eq!(code(&out), 2);
    assert!(stdout(&out).contains("unreachable"));
}

#[test]
fn swap_turns_upper_bounds_into_lower_bounds() {
    let env = Env::new();
    // Pr^min(goal) <= 1/2 becomes Pr^max(fail) >= 1/2
    let out = env.run(&["--swap-goal-fail", "certify", "d1.txt", "--prop", "min<=1/2", "-o", "swapped.txt"]);
    assert_eq!(code(&out), 0);
    assert!(env.read("swapped.txt").contains("property: max ge 1/2"));
    assert_eq!(code(&env.run(&["verify", "d1.txt", "swapped.txt", "--swap-goal-fail"])), 0);
    let out = env.run(&["witness", "d1.txt", "--prop", "max<=1/2", "--method", "exact", "--swap-goal-fail"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout(&env.run(&["probability", "d1.txt", "--dir", "max", "--swap-goal-fail"])), "1/2\n");
}

#[test]
fn every_emitted_file_reparses() {
    let env = Env::new();
    let runs: [&[&str]; 7] = [
        &["certify", "choice.txt", "--prop", "max>=1/2", "-o", "c1"],
        &["certify", "choice.txt", "--prop", "min<=1/4", "-o", "c2"],
        &["witness", "choice.txt", "--prop", "max>=1/2", "--method", "exact", "--export-milp", "m.lp", "-o", "w1"],
        &["witness", "choice.txt", "--prop", "min>=1/8", "--method", "qs", "--iters", "3", "-o", "w2"],
        &["tree-witness", "d1.txt", "--lambda", "1/2", "-o", "t1"],
        &["reduce", "choice.txt", "--to", "state-from-transition", "-o", "r1"],
        &["gen-clique", "k3.graph", "3", "-o", "g1"],
    ];
    for args in runs {
        assert_eq!(code(&env.run(args)), 0, "{args:?}");
    }
    let choice = parse_model(CHOICE).unwrap();
    for c in ["c1", "c2"] {
        let cert = read_certificate(&env.read(c), &choice).unwrap();
        assert!(verify_certificate(&choice, &cert).unwrap().ok);
    }
    for w in ["w1", "w2"] {
        Subsystem::from_text(&env.read(w), &choice).unwrap();
    }
    Subsystem::from_text(&env.read("t1"), &parse_model(D1).unwrap()).unwrap();
    let lp = parse_lp_file(&env.read("m.lp")).unwrap();
    assert_eq!(lp.binaries.len(), choice.pairs().len());
    model_at(&env.path("r1"));
    model_at(&env.path("g1"));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let env = Env::new();
    let runs: [&[&str]; 6] = [
        &["probability", "choice.txt", "--dir", "max"],
        &["certify", "choice.txt", "--prop", "max>=1/2"],
        &["witness", "choice.txt", "--prop", "max>=1/2", "--method", "qs"],
        &["witness", "d1.txt", "--prop", "min>=1/2", "--method", "exact"],
        &["reduce", "d1.txt", "--to", "state-from-size"],
        &["gen-clique", "six.graph", "3"],
    ];
    for args in runs {
        let a = env.run(args);
        let b = env.run(args);
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.status, b.status);
    }
}
