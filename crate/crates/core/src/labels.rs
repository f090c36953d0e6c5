//! Joint environment + attack class labels.
//!
//! An environment id is three letters over `{a,b,c}` (room size, T60,
//! talker-to-ASV distance). An attack id is `00` for bona fide or two
//! letters over `{A,B,C}` (attacker-to-talker distance, replay device
//! quality). The joint id concatenates both, e.g. `abcAB` or `aaa00`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Ordinal level of a three-way factor: 0 = a/A ... 2 = c/C.
pub type Level = u8;

pub const N_ENVS: usize = 27;
pub const N_ATTACKS: usize = 10;
pub const N_JOINT: usize = N_ENVS * N_ATTACKS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnvId {
    pub room: Level,
    pub t60: Level,
    pub distance: Level,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AttackId {
    Bonafide,
    Replay {
        attacker_distance: Level,
        device_quality: Level,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct JointLabel {
    pub env: EnvId,
    pub attack: AttackId,
}

fn level(c: char, base: char) -> Option<Level> {
    let d = (c as u32).checked_sub(base as u32)?;
    (d < 3).then_some(d as Level)
}

fn letter(l: Level, base: char) -> char {
    char::from_u32(base as u32 + l as u32).expect("level < 3")
}

impl EnvId {
    pub fn all() -> Vec<EnvId> {
        (0..N_ENVS as u8)
            .map(|i| EnvId {
                room: i / 9,
                t60: (i / 3) % 3,
                distance: i % 3,
            })
            .collect()
    }

    pub fn index(self) -> usize {
        self.room as usize * 9 + self.t60 as usize * 3 + self.distance as usize
    }
}

impl AttackId {
    /// Bona fide first, then `AA, AB, ..., CC`.
    pub fn all() -> Vec<AttackId> {
        std::iter::once(AttackId::Bonafide)
            .chain((0..9u8).map(|i| AttackId::Replay {
                attacker_distance: i / 3,
                device_quality: i % 3,
            }))
            .collect()
    }

    pub fn index(self) -> usize {
        match self {
            AttackId::Bonafide => 0,
            AttackId::Replay {
                attacker_distance,
                device_quality,
            } => 1 + attacker_distance as usize * 3 + device_quality as usize,
        }
    }

    pub fn is_bonafide(self) -> bool {
        self == AttackId::Bonafide
    }
}

impl JointLabel {
    /// Environment-major ordering of all 270 joint classes.
    pub fn all() -> Vec<JointLabel> {
        EnvId::all()
            .into_iter()
            .flat_map(|env| {
                AttackId::all()
                    .into_iter()
                    .map(move |attack| JointLabel { env, attack })
            })
            .collect()
    }

    pub fn index(self) -> usize {
        self.env.index() * N_ATTACKS + self.attack.index()
    }

    pub fn from_index(i: usize) -> Option<JointLabel> {
        (i < N_JOINT).then(|| JointLabel::all()[i])
    }
}

impl fmt::Display for EnvId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}{}{}",
            letter(self.room, 'a'),
            letter(self.t60, 'a'),
            letter(self.distance, 'a')
        )
    }
}

impl fmt::Display for AttackId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AttackId::Bonafide => f.write_str("00"),
            AttackId::Replay {
                attacker_distance,
                device_quality,
            } => {
                write!(f, "{}{}", letter(*attacker_distance, 'A'), letter(*device_quality, 'A'))
            }
        }
    }
}

impl fmt::Display for JointLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.env, self.attack)
    }
}

impl FromStr for EnvId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let c: Vec<char> = s.chars().collect();
        match c.as_slice() {
            [r, t, d] => match (level(*r, 'a'), level(*t, 'a'), level(*d, 'a')) {
                (Some(room), Some(t60), Some(distance)) => Ok(EnvId { room, t60, distance }),
                _ => Err(Error::data(format!("invalid environment id {s:?}"))),
            },
            _ => Err(Error::data(format!("invalid environment id {s:?}"))),
        }
    }
}

impl FromStr for AttackId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "00" {
            return Ok(AttackId::Bonafide);
        }
        let c: Vec<char> = s.chars().collect();
        match c.as_slice() {
            [a, q] => match (level(*a, 'A'), level(*q, 'A')) {
                (Some(attacker_distance), Some(device_quality)) => Ok(AttackId::Replay {
                    attacker_distance,
                    device_quality,
                }),
                _ => Err(Error::data(format!("invalid attack id {s:?}"))),
            },
            _ => Err(Error::data(format!("invalid attack id {s:?}"))),
        }
    }
}

impl FromStr for JointLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if !s.is_ascii() || s.len() != 5 {
            return Err(Error::data(format!("invalid joint label {s:?}")));
        }
        Ok(JointLabel {
            env: s[..3].parse()?,
            attack: s[3..].parse()?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_algebra() {
        assert_eq!(EnvId::all().len(), 27);
        assert_eq!(AttackId::all().len(), 10);
        let all = JointLabel::all();
        assert_eq!(all.len(), 270);
        for (i, l) in all.iter().enumerate() {
            assert_eq!(l.index(), i);
            assert_eq!(l.to_string().parse::<JointLabel>().unwrap(), *l);
        }
        assert_eq!(all.iter().filter(|l| l.attack.is_bonafide()).count(), 27);
    }

    #[test]
    fn parsing() {
        let l: JointLabel = "abcAB".parse().unwrap();
        assert_eq!(
            l.env,
            EnvId {
                room: 0,
                t60: 1,
                distance: 2
            }
        );
        assert_eq!(
            l.attack,
            AttackId::Replay {
                attacker_distance: 0,
                device_quality: 1
            }
        );
        assert!("aaa0".parse::<JointLabel>().is_err());
        assert!("adaAA".parse::<JointLabel>().is_err());
        assert!("aaaAD".parse::<JointLabel>().is_err());
        assert!("aaa00".parse::<JointLabel>().unwrap().attack.is_bonafide());
    }
}
