//! Bundled problems with their expected status and intended backend.

use crate::frontend::{parse, ProblemFile, TheoryChoice};

#[derive(Clone, Copy, Debug)]
pub struct CorpusProblem {
    pub name: &'static str,
    pub text: &'static str,
}

impl CorpusProblem {
    fn header(&self, key: &str) -> Option<&'static str> {
        self.text.lines().find_map(|l| {
            l.strip_prefix("; ")?
                .strip_prefix(key)?
                .strip_prefix(':')
                .map(str::trim)
        })
    }

    pub fn expect_theorem(&self) -> bool {
        self.header("expect") == Some("theorem")
    }

    pub fn theory(&self) -> TheoryChoice {
        self.header("theory")
            .and_then(|t| t.parse().ok())
            .unwrap_or(TheoryChoice::Fol)
    }

    pub fn problem(&self) -> ProblemFile {
        parse(self.text).unwrap_or_else(|e| panic!("corpus problem {}: {}", self.name, e))
    }
}

macro_rules! problems {
    ($($file:literal),* $(,)?) => {
        &[$(CorpusProblem { name: $file, text: include_str!(concat!("../corpus/", $file, ".seq")) }),*]
    };
}

pub const CORPUS: &[CorpusProblem] = problems![
    "01_excluded_middle",
    "02_and_elim",
    "03_peirce",
    "04_de_morgan",
    "05_distribution",
    "06_drinker",
    "07_drinker_dual",
    "08_exists_excluded_middle",
    "09_forall_to_exists",
    "10_exists_forall_swap",
    "11_forall_and",
    "12_forall_or",
    "13_forall_distributes",
    "14_exists_intro",
    "15_instantiate_function",
    "16_successor_chain",
    "17_lone_atom",
    "18_forall_exists_swap",
    "19_two_lines",
    "20_exists_value",
    "21_successor_exists",
    "22_open_interval",
    "23_linear_system",
    "24_empty_interval",
    "25_trichotomy",
];

pub fn get(name: &str) -> Option<&'static CorpusProblem> {
    CORPUS
        .iter()
        .find(|p| p.name == name || p.name.split_once('_').is_some_and(|(_, n)| n == name))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_problem_parses_and_has_headers() {
        assert_eq!(CORPUS.len(), 25);
        for p in CORPUS {
            p.problem();
            assert!(p.header("expect").is_some(), "{}", p.name);
            assert!(p.header("theory").is_some(), "{}", p.name);
        }
    }
}
