use std::path::PathBuf;

use aerocap::config::Manifest;
use aerocap::montecarlo::{DispersionSpec, EntrySet};

fn dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn nominal_directory_is_the_default() {
    assert_eq!(Manifest::load_dir(&dir("nominal")).unwrap(), Manifest::default());
}

#[test]
fn campaign_directories_carry_their_entry_set() {
    for (name, set) in [("baseline", EntrySet::Baseline), ("conservative", EntrySet::Conservative)] {
        let m = Manifest::load_dir(&dir(name)).unwrap();
        assert_eq!(m.dispersion, Some(DispersionSpec::for_entry_set(set, &m.mission, 1)), "{name}");
    }
}
