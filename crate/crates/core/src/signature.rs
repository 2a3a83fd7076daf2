//! The owner's secret signature message.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Stage-1 symbol: `a` asks for an odd leading digit of `Δ_i`, `b` for an
/// even one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage1Symbol {
    A,
    B,
}

impl Stage1Symbol {
    pub fn from_digit(d: u8) -> Self {
        if d % 2 == 1 {
            Self::A
        } else {
            Self::B
        }
    }

    pub fn accepts(self, digit: u8) -> bool {
        Self::from_digit(digit) == self
    }

    pub fn as_char(self) -> char {
        match self {
            Self::A => 'a',
            Self::B => 'b',
        }
    }

    pub fn from_char(c: char) -> Option<Self> {
        match c {
            'a' => Some(Self::A),
            'b' => Some(Self::B),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("signature must have three `|`-separated parts, got {0}")]
    Parts(usize),
    #[error("stage-1 symbols must be `a` or `b`, found `{0}`")]
    Stage1Symbol(char),
    #[error("stage-2 symbols must be `c` or `d`, found `{0}`")]
    Stage2Symbol(char),
    #[error("stage-3 part must be a count or a run of `e`, got `{0}`")]
    Stage3(String),
}

/// `stage1 | stage2 | stage3_e`, e.g. `ab|ccd|2`. Empty parts mean that stage
/// carries no watermark.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SignatureMessage {
    pub stage1: String,
    pub stage2: String,
    pub stage3_e: usize,
}

impl SignatureMessage {
    pub fn new(
        stage1: impl Into<String>,
        stage2: impl Into<String>,
        stage3_e: usize,
    ) -> Result<Self, SignatureError> {
        let s = Self {
            stage1: stage1.into(),
            stage2: stage2.into(),
            stage3_e,
        };
        s.check_alphabet()?;
        Ok(s)
    }

    pub fn empty() -> Self {
        Self::default()
    }

    fn check_alphabet(&self) -> Result<(), SignatureError> {
        if let Some(c) = self.stage1.chars().find(|c| !matches!(c, 'a' | 'b')) {
            return Err(SignatureError::Stage1Symbol(c));
        }
        if let Some(c) = self.stage2.chars().find(|c| !matches!(c, 'c' | 'd')) {
            return Err(SignatureError::Stage2Symbol(c));
        }
        Ok(())
    }

    pub fn stage1_symbols(&self) -> Vec<Stage1Symbol> {
        self.stage1
            .chars()
            .map(|c| Stage1Symbol::from_char(c).expect("validated"))
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.stage1.is_empty() && self.stage2.is_empty() && self.stage3_e == 0
    }

    /// Number of binary constraints this signature imposes.
    pub fn constraint_count(&self) -> usize {
        self.stage1.len() + self.stage2.len() + self.stage3_e
    }
}

impl FromStr for SignatureMessage {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split('|').collect();
        let parts = match parts.len() {
            1 if parts[0].trim().is_empty() => vec!["", "", ""],
            3 => parts,
            n => return Err(SignatureError::Parts(n)),
        };
        let stage3 = parts[2].trim();
        let stage3_e = if stage3.is_empty() {
            0
        } else if stage3.chars().all(|c| c == 'e') {
            stage3.len()
        } else {
            stage3
                .parse()
                .map_err(|_| SignatureError::Stage3(stage3.to_string()))?
        };
        Self::new(parts[0].trim(), parts[1].trim(), stage3_e)
    }
}

impl fmt::Display for SignatureMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}|{}|{}", self.stage1, self.stage2, self.stage3_e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_wire_format() {
        let s: SignatureMessage = "ab|ccd|2".parse().unwrap();
        assert_eq!(s, SignatureMessage::new("ab", "ccd", 2).unwrap());
        assert_eq!(s.to_string(), "ab|ccd|2");
        let e: SignatureMessage = "ab|ccd|ee".parse().unwrap();
        assert_eq!(e.stage3_e, 2);
        let partial: SignatureMessage = "||3".parse().unwrap();
        assert_eq!(partial, SignatureMessage::new("", "", 3).unwrap());
        assert!("".parse::<SignatureMessage>().unwrap().is_empty());
        assert_eq!(s.constraint_count(), 7);
    }

    #[test]
    fn rejects_bad_symbols() {
        assert_eq!(
            "ax|cc|0".parse::<SignatureMessage>(),
            Err(SignatureError::Stage1Symbol('x'))
        );
        assert_eq!(
            "a|ce|0".parse::<SignatureMessage>(),
            Err(SignatureError::Stage2Symbol('e'))
        );
        assert_eq!(
            "a|c".parse::<SignatureMessage>(),
            Err(SignatureError::Parts(2))
        );
        assert!(matches!(
            "a|c|x".parse::<SignatureMessage>(),
            Err(SignatureError::Stage3(_))
        ));
    }

    #[test]
    fn digit_parity() {
        for d in [1u8, 3, 5, 7, 9] {
            assert_eq!(Stage1Symbol::from_digit(d), Stage1Symbol::A);
        }
        for d in [2u8, 4, 6, 8] {
            assert_eq!(Stage1Symbol::from_digit(d), Stage1Symbol::B);
        }
    }
}
