//! Seeded stratified train/validation assignment.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            _ => Err(Error::config(format!("unknown split {s:?} (train, val, test)"))),
        }
    }
}

const SPLIT_TAG: u64 = 0x7370_6c69; // "spli"

/// Per class: shuffle the member indices with the `(seed, class)`
/// substream, then the first `floor(n·train/(train+val))` go to train.
pub fn stratified_split(labels: &[usize], ratio: (usize, usize), seed: u64) -> Result<Vec<Split>> {
    let (tr, va) = ratio;
    if tr == 0 || va == 0 {
        return Err(Error::config(format!("split ratio {tr}:{va} must be positive")));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut out = vec![Split::Val; labels.len()];
    for c in 0..classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if members.len() < 2 {
            return Err(Error::data(format!(
                "class {c} has {} samples; stratified split needs at least 2",
                members.len()
            )));
        }
        Rng::substream(seed, &[SPLIT_TAG, c as u64]).shuffle(&mut members);
        let n_train = members.len() * tr / (tr + va);
        for &i in &members[..n_train] {
            out[i] = Split::Train;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(n0: usize, n1: usize) -> Vec<usize> {
        let mut l = vec![0; n0];
        l.extend(vec![1; n1]);
        l
    }

    fn counts(l: &[usize], s: &[Split], split: Split) -> [usize; 2] {
        let mut c = [0; 2];
        for (lab, sp) in l.iter().zip(s) {
            if *sp == split {
                c[*lab] += 1;
            }
        }
        c
    }

    #[test]
    fn reproduces_reference_counts() {
        let l = labels(132, 130);
        let s = stratified_split(&l, (80, 20), 42).unwrap();
        assert_eq!(counts(&l, &s, Split::Train), [105, 104]);
        assert_eq!(counts(&l, &s, Split::Val), [27, 26]);
        let l = labels(10, 10);
        let s = stratified_split(&l, (80, 20), 1).unwrap();
        assert_eq!(counts(&l, &s, Split::Train), [8, 8]);
        assert_eq!(counts(&l, &s, Split::Val), [2, 2]);
    }

    #[test]
    fn deterministic_under_seed() {
        let l = labels(30, 25);
        let a = stratified_split(&l, (80, 20), 7).unwrap();
        assert_eq!(a, stratified_split(&l, (80, 20), 7).unwrap());
        let b = stratified_split(&l, (80, 20), 8).unwrap();
        assert_ne!(a, b);
        assert_eq!(counts(&l, &a, Split::Train), counts(&l, &b, Split::Train));
    }

    #[test]
    fn tiny_class_is_rejected() {
        assert!(matches!(stratified_split(&[0, 0, 1], (80, 20), 0), Err(Error::Data(_))));
    }

    #[test]
    fn split_names_round_trip() {
        for s in [Split::Train, Split::Val, Split::Test] {
            assert_eq!(s.to_string().parse::<Split>().unwrap(), s);
        }
        assert!("dev".parse::<Split>().is_err());
    }
}
