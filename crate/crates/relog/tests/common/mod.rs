#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;
use std::process::Command;

use relog_core::lineage::StatementLineage;

/// A statement's text at a version: each version rewrites one more word, so
/// consecutive versions share all but one token.
pub fn statement(id: u32, version: u32) -> String {
    let words: Vec<String> =
        (0..16).map(|j| if j < version { format!("s{id}v{j}x") } else { format!("s{id}w{j}") }).collect();
    format!("        logger.info(\"{}\", v{id});", words.join(" "))
}

pub fn java(class: &str, statements: &[(u32, u32)]) -> String {
    let mut out = format!("package demo;\n\npublic class {class} {{\n    void run() {{\n");
    for (i, &(id, v)) in statements.iter().enumerate() {
        out.push_str(&format!("        int local{i} = {i};\n"));
        out.push_str(&statement(id, v));
        out.push('\n');
    }
    out.push_str("    }\n}\n");
    out
}

pub struct Repo {
    dir: tempfile::TempDir,
    /// Ground truth: per lineage, the number of versions seen on the first-parent line.
    pub truth: BTreeMap<&'static str, u32>,
}

impl Repo {
    pub fn new() -> Self {
        let repo = Self { dir: tempfile::tempdir().unwrap(), truth: BTreeMap::new() };
        repo.git(&["init", "-q", "-b", "main"]);
        repo
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn git(&self, args: &[&str]) {
        let status = Command::new("git")
            .arg("-C")
            .arg(self.path())
            .args(["-c", "user.name=t", "-c", "user.email=t@example.com", "-c", "commit.gpgsign=false"])
            .args(args)
            .env("GIT_CONFIG_NOSYSTEM", "1")
            .status()
            .unwrap();
        assert!(status.success(), "git {args:?}");
    }

    pub fn write(&self, rel: &str, text: &str) {
        let p = self.path().join(rel);
        std::fs::create_dir_all(p.parent().unwrap()).unwrap();
        std::fs::write(p, text).unwrap();
    }

    pub fn commit(&self, message: &str) {
        self.git(&["add", "-A"]);
        self.git(&["commit", "-q", "-m", message]);
    }
}

/// The scripted history. Returns the repository and the expected change
/// count of every lineage.
pub fn scripted() -> Repo {
    let mut r = Repo::new();
    // c0: A has s0..s3 and s7, B has s4 and s5; the text file is ignored.
    r.write("src/A.java", &java("A", &[(0, 0), (1, 0), (2, 0), (3, 0), (7, 0)]));
    r.write("src/B.java", &java("B", &[(4, 0), (5, 0)]));
    r.write("notes.txt", "logger.info(\"not code\");\n");
    r.commit("c0");
    // c1: s0, s1 and s7 change.
    r.write("src/A.java", &java("A", &[(0, 1), (1, 1), (2, 0), (3, 0), (7, 1)]));
    r.write("notes.txt", "logger.info(\"still not code\");\n");
    r.commit("c1");
    // c2: s0 and s7 change again; s6 is added.
    r.write("src/A.java", &java("A", &[(0, 2), (1, 1), (2, 0), (3, 0), (7, 2), (6, 0)]));
    r.commit("c2");
    // c3: A is renamed to C and s2 changes in the same commit.
    std::fs::remove_file(r.path().join("src/A.java")).unwrap();
    r.write("src/C.java", &java("A", &[(0, 2), (1, 1), (2, 1), (3, 0), (7, 2), (6, 0)]));
    r.commit("c3");
    // c4: s0 changes a third time; B is deleted.
    r.write("src/C.java", &java("A", &[(0, 3), (1, 1), (2, 1), (3, 0), (7, 2), (6, 0)]));
    std::fs::remove_file(r.path().join("src/B.java")).unwrap();
    r.commit("c4");
    // c5: B comes back with s4 only, as a fresh lineage.
    r.write("src/B.java", &java("B", &[(4, 0)]));
    r.commit("c5");
    // A side branch edits s6 twice; only the merge is on the first-parent line.
    r.git(&["checkout", "-q", "-b", "side"]);
    r.write("src/C.java", &java("A", &[(0, 3), (1, 1), (2, 1), (3, 0), (7, 2), (6, 1)]));
    r.commit("side 1");
    r.write("src/C.java", &java("A", &[(0, 3), (1, 1), (2, 1), (3, 0), (7, 2), (6, 2)]));
    r.commit("side 2");
    r.git(&["checkout", "-q", "main"]);
    r.git(&["merge", "-q", "--no-ff", "-m", "merge side", "side"]);

    r.truth = BTreeMap::from([
        ("s0", 3),
        ("s1", 1),
        ("s2", 1),
        ("s3", 0),
        ("s4", 0),
        ("s4 again", 0),
        ("s5", 0),
        ("s6", 1),
        ("s7", 2),
    ]);
    r
}

/// Change count per lineage, keyed by the statement id of its first
/// sighting; a second lineage of the same id gets an " again" suffix.
pub fn change_counts(lineages: &[StatementLineage]) -> BTreeMap<String, u32> {
    let mut got = BTreeMap::new();
    for l in lineages {
        let first = &l.sightings[0].normalized_template;
        let word = first.split('"').nth(1).unwrap().split_whitespace().next().unwrap();
        let id = word.split(['w', 'v']).next().unwrap().to_string();
        let key = if got.contains_key(&id) { format!("{id} again") } else { id };
        got.insert(key, l.change_count);
    }
    got
}
