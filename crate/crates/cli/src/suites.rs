//! Suites shipped with the binary; the JSON files live in `crates/cli/suites`.

use crate::config::ExperimentConfig;
use crate::CliError;

pub const BUNDLED: &[(&str, &str)] = &[
    ("lemma21-flat", include_str!("../suites/lemma21-flat.json")),
    ("regularity-hyperbolic", include_str!("../suites/regularity-hyperbolic.json")),
    ("p1-identity", include_str!("../suites/p1-identity.json")),
    ("geometry", include_str!("../suites/geometry.json")),
    ("identities", include_str!("../suites/identities.json")),
    ("cutoff", include_str!("../suites/cutoff.json")),
    ("density", include_str!("../suites/density.json")),
    ("cone", include_str!("../suites/cone.json")),
    ("doubling", include_str!("../suites/doubling.json")),
    ("spikes", include_str!("../suites/spikes.json")),
    ("transition", include_str!("../suites/transition.json")),
];

pub fn bundled(name: &str) -> Result<ExperimentConfig, CliError> {
    let (_, text) = BUNDLED
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CliError::NotFound(format!("no bundled suite {name:?}; see list-suites")))?;
    ExperimentConfig::parse(text)
}
