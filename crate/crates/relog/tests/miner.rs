mod common;

use std::collections::BTreeMap;

use common::{change_counts, scripted, Repo};
use relog::miner::{lineages_csv, mine, scan_repository, MinerConfig, MinerError};
use relog_core::lineage::distribution_of;


#[test]
fn change_counts_match_the_script() {
    let repo = scripted();
    let mined = mine(repo.path(), &MinerConfig::default()).unwrap();
    assert_eq!(mined.report.commits, 7);

    let got = change_counts(&mined.lineages);
    let want: BTreeMap<String, u32> = repo.truth.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    assert_eq!(got, want);

    let expected = distribution_of(repo.truth.values().copied());
    assert_eq!(mined.report.distribution, expected);
    assert_eq!(mined.report.lineage_count, 9);
    assert!((mined.report.modified_share - 5.0 / 9.0).abs() < 1e-12);
    assert_eq!(expected.percent("1"), Some(60.0));
    assert_eq!(expected.percent("2"), Some(20.0));
    assert_eq!(expected.percent(">=3"), Some(20.0));
}

#[test]
fn renamed_file_keeps_its_lineages() {
    let repo = scripted();
    let mined = mine(repo.path(), &MinerConfig::default()).unwrap();
    let csv = lineages_csv(&mined.lineages);
    let s2 = csv.lines().find(|l| l.contains("s2v0x")).unwrap();
    assert!(s2.contains("src/A.java,src/C.java"), "{s2}");
    assert!(!csv.contains("not code"));
}

#[test]
fn side_branch_commits_are_not_walked() {
    let repo = scripted();
    let scan = scan_repository(repo.path(), &MinerConfig::default()).unwrap();
    assert_eq!(scan.commits.len(), 7);
    assert!(!scan.sightings().any(|s| s.normalized_template.contains("s6v0x") && !s.normalized_template.contains("s6v1x")));
}

#[test]
fn empty_repository_has_no_lineages() {
    let repo = Repo::new();
    let mined = mine(repo.path(), &MinerConfig::default()).unwrap();
    assert_eq!(mined.report.commits, 0);
    assert_eq!(mined.report.lineage_count, 0);
    assert!(mined.report.distribution.buckets.is_empty());
}

#[test]
fn plain_directory_is_unreadable() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(mine(dir.path(), &MinerConfig::default()), Err(MinerError::RepoUnreadable(_))));
}
