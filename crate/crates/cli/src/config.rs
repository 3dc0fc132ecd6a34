//! Run parameters read from a TOML file.
//!
//! Keys mirror the long flag names with underscores. A key only affects commands that take
//! the corresponding flag, so one file can drive a whole pipeline:
//!
//! ```toml
//! seed = 7
//! max_len = 5
//! beam_width = 120
//! multi_ref_policy = "per-metric"
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stepseq::metrics::ReferencePolicy;

use crate::{Cli, CliError, Command};

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub max_len: Option<usize>,
    pub delta: Option<f64>,
    pub x: Option<f64>,
    pub beam_width: Option<usize>,
    pub exclude_identity: Option<bool>,
    pub multi_ref_policy: Option<ReferencePolicy>,
    pub threshold: Option<f64>,
    pub jobs: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    /// Overwrites the matching flags of `cli`.
    pub fn apply(&self, cli: &mut Cli) {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        fn set_opt<T: Clone>(slot: &mut Option<T>, value: &Option<T>) {
            if value.is_some() {
                *slot = value.clone();
            }
        }

        set(&mut cli.jobs, &self.jobs);
        set_opt(&mut cli.out, &self.out);
        match &mut cli.command {
            Command::Scramble(a) => {
                set_opt(&mut a.seed, &self.seed);
                set(&mut a.max_len, &self.max_len);
                set(&mut a.exclude_identity, &self.exclude_identity);
            }
            Command::Simulate(a) => set_opt(&mut a.seed, &self.seed),
            Command::Decode(a) => set(&mut a.beam_width, &self.beam_width),
            Command::Evaluate(a) => set(&mut a.multi_ref_policy, &self.multi_ref_policy),
            Command::Iaa(a) => set_opt(&mut a.threshold, &self.threshold),
            Command::Split(a) => set_opt(&mut a.seed, &self.seed),
            Command::Plan(a) => {
                set_opt(&mut a.seed, &self.seed);
                set(&mut a.delta, &self.delta);
                set(&mut a.x, &self.x);
            }
            Command::CompleteEval(_) | Command::Report(_) => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::Parser;

    #[test]
    fn file_values_override_flags() {
        let mut cli = Cli::parse_from([
            "stepseq",
            "--out",
            "o",
            "scramble",
            "--manifest",
            "m.jsonl",
            "--seed",
            "1",
        ]);
        let cfg = ConfigFile::parse("seed = 9\nmax_len = 4\nexclude_identity = true\nbeam_width = 3").unwrap();
        cfg.apply(&mut cli);
        let Command::Scramble(a) = &cli.command else { panic!() };
        assert_eq!(a.seed, Some(9));
        assert_eq!(a.max_len, 4);
        assert!(a.exclude_identity);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ConfigFile::parse("sead = 1").is_err());
        assert_eq!(
            ConfigFile::parse("multi_ref_policy = \"per-metric\"")
                .unwrap()
                .multi_ref_policy,
            Some(ReferencePolicy::PerMetric)
        );
    }
}
