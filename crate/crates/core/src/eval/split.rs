use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::fingerprint::{tanimoto, Fingerprint};
use crate::pairscore::TripleDataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SplitSpec {
    Random(f64),
    Cold,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec::Random(0.5)
    }
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitSpec::Random(r) => write!(f, "random:{r}"),
            SplitSpec::Cold => f.write_str("cold"),
        }
    }
}

impl FromStr for SplitSpec {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "cold" {
            return Ok(SplitSpec::Cold);
        }
        let bad = || EvalError::InvalidSplitSpec(s.to_string());
        let ratio: f64 = s
            .strip_prefix("random:")
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(EvalError::InvalidRatio(ratio));
        }
        Ok(SplitSpec::Random(ratio))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitKind {
    Random {
        seed: u64,
        ratio: f64,
    },
    /// `set_a` is the larger cluster; training triples use only its drugs.
    Cold {
        set_a: Vec<String>,
        set_b: Vec<String>,
    },
}

/// Disjoint train/test indices into a [`TripleDataset`].
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub kind: SplitKind,
}

/// Seeded shuffle, first `ceil(ratio * n)` indices to train (clamped so both
/// sides are non-empty).
pub fn random_split(data: &TripleDataset, ratio: f64, seed: u64) -> Result<SplitPlan, EvalError> {
    let n = data.len();
    if n < 2 {
        return Err(EvalError::DatasetTooSmall(n));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(EvalError::InvalidRatio(ratio));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = ((ratio * n as f64).ceil() as usize).clamp(1, n - 1);
    let test = idx.split_off(cut);
    Ok(SplitPlan {
        train: idx,
        test,
        kind: SplitKind::Random { seed, ratio },
    })
}

/// One agglomeration step: the two clusters (named by their smallest member)
/// and their complete-linkage distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Linkage {
    /// Remaining clusters, each sorted, ordered by smallest member.
    pub clusters: Vec<Vec<usize>>,
    pub merges: Vec<Merge>,
}

/// Naive complete-linkage agglomerative clustering of items `0..n` until
/// `target` clusters remain.
///
/// Ties between equal-distance candidates go to the pair whose smallest
/// members `(min X, min Y)` are lexicographically smallest; with items sorted
/// by id this is the drug-id order.
pub fn complete_linkage(dist: &[Vec<f64>], target: usize) -> Linkage {
    let n = dist.len();
    let target = target.clamp(1, n.max(1));
    // slot i always holds the cluster whose smallest member is i
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut d: Vec<Vec<f64>> = dist.to_vec();
    let mut merges = Vec::with_capacity(n.saturating_sub(target));
    let mut active = n;
    while active > target {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..n {
            if members[i].is_none() {
                continue;
            }
            for j in i + 1..n {
                if members[j].is_none() {
                    continue;
                }
                if best.is_none_or(|(_, _, bd)| d[i][j] < bd) {
                    best = Some((i, j, d[i][j]));
                }
            }
        }
        let (i, j, dist_ij) = best.expect("at least two active clusters");
        let absorbed = members[j].take().expect("active");
        let keep = members[i].as_mut().expect("active");
        keep.extend(absorbed);
        keep.sort_unstable();
        #[allow(clippy::needless_range_loop)]
        for k in 0..n {
            let m = d[i][k].max(d[j][k]);
            d[i][k] = m;
            d[k][i] = m;
        }
        merges.push(Merge {
            left: i,
            right: j,
            distance: dist_ij,
        });
        active -= 1;
    }
    Linkage {
        clusters: members.into_iter().flatten().collect(),
        merges,
    }
}

/// Tanimoto-cluster cold split.
///
/// Drugs are sorted by id and clustered into two groups by complete linkage on
/// `1 - tanimoto`. `A` is the larger group (ties: the group holding the
/// smallest id). A triple trains iff both its drugs are in `A`.
pub fn cold_split(
    fingerprints: &[Fingerprint],
    data: &TripleDataset,
) -> Result<SplitPlan, EvalError> {
    let mut fps: Vec<&Fingerprint> = fingerprints.iter().collect();
    fps.sort_by(|a, b| a.drug_id.cmp(&b.drug_id));
    fps.dedup_by(|a, b| a.drug_id == b.drug_id);
    let n = fps.len();
    if n < 2 {
        return Err(EvalError::DegenerateClustering(n));
    }
    let index: HashMap<&str, usize> = fps
        .iter()
        .enumerate()
        .map(|(i, f)| (f.drug_id.as_str(), i))
        .collect();
    for t in &data.triples {
        for id in [&t.drug_a, &t.drug_b] {
            if !index.contains_key(id.as_str()) {
                return Err(EvalError::UnknownDrug(id.clone()));
            }
        }
    }
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let d = 1.0 - tanimoto(fps[i], fps[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    let link = complete_linkage(&dist, 2);
    let [c0, c1] = &link.clusters[..] else {
        return Err(EvalError::DegenerateClustering(n));
    };
    // c0 contains item 0, the smallest id, so it wins ties
    let (a, b) = if c1.len() > c0.len() {
        (c1, c0)
    } else {
        (c0, c1)
    };
    let mut in_a = vec![false; n];
    for &i in a {
        in_a[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (k, t) in data.triples.iter().enumerate() {
        if in_a[index[t.drug_a.as_str()]] && in_a[index[t.drug_b.as_str()]] {
            train.push(k);
        } else {
            test.push(k);
        }
    }
    let names = |c: &[usize]| c.iter().map(|&i| fps[i].drug_id.clone()).collect();
    Ok(SplitPlan {
        train,
        test,
        kind: SplitKind::Cold {
            set_a: names(a),
            set_b: names(b),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairscore::Triple;

    fn triple(a: &str, b: &str) -> Triple {
        Triple {
            drug_a: a.into(),
            drug_b: b.into(),
            context: "c".into(),
            label: 0,
        }
    }

    fn dataset(n: usize) -> TripleDataset {
        TripleDataset::new((0..n).map(|i| triple(&format!("d{i}"), "x")).collect())
    }

    #[test]
    fn random_split_basics() {
        let p = random_split(&dataset(4), 0.5, 1).unwrap();
        assert_eq!((p.train.len(), p.test.len()), (2, 2));
        assert_eq!(p, random_split(&dataset(4), 0.5, 1).unwrap());
        let a = random_split(&dataset(1000), 0.5, 1).unwrap();
        let b = random_split(&dataset(1000), 0.5, 2).unwrap();
        assert_ne!(a.train, b.train);
        let mut all: Vec<usize> = a.train.iter().chain(&a.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
        assert_eq!(random_split(&dataset(5), 0.5, 0).unwrap().train.len(), 3);
        assert!(matches!(
            random_split(&dataset(1), 0.5, 0),
            Err(EvalError::DatasetTooSmall(1))
        ));
        assert!(matches!(
            random_split(&dataset(4), 1.0, 0),
            Err(EvalError::InvalidRatio(_))
        ));
        assert_eq!(random_split(&dataset(3), 0.99, 0).unwrap().test.len(), 1);
    }

    #[test]
    fn split_spec_parsing() {
        assert_eq!("cold".parse::<SplitSpec>().unwrap(), SplitSpec::Cold);
        assert_eq!(
            "random:0.5".parse::<SplitSpec>().unwrap(),
            SplitSpec::Random(0.5)
        );
        assert!("random:1.5".parse::<SplitSpec>().is_err());
        assert!("kfold".parse::<SplitSpec>().is_err());
    }

    #[test]
    fn two_identical_pairs() {
        let fps = vec![
            Fingerprint::from_bits("a1", 8, [0, 1]).unwrap(),
            Fingerprint::from_bits("a2", 8, [0, 1]).unwrap(),
            Fingerprint::from_bits("b1", 8, [4, 5]).unwrap(),
            Fingerprint::from_bits("b2", 8, [4, 5]).unwrap(),
        ];
        let data = TripleDataset::new(vec![
            triple("a1", "a2"),
            triple("a1", "b1"),
            triple("b1", "b2"),
        ]);
        let p = cold_split(&fps, &data).unwrap();
        assert_eq!(p.train, vec![0]);
        assert_eq!(p.test, vec![1, 2]);
        let SplitKind::Cold { set_a, set_b } = p.kind else {
            panic!()
        };
        assert_eq!(set_a, ["a1", "a2"]);
        assert_eq!(set_b, ["b1", "b2"]);
    }

    #[test]
    fn identical_fingerprints_leave_last_drug_alone() {
        let fps: Vec<_> = ["d3", "d1", "d4", "d2"]
            .iter()
            .map(|id| Fingerprint::from_bits(*id, 8, [2]).unwrap())
            .collect();
        let data = TripleDataset::new(vec![triple("d1", "d2"), triple("d3", "d4")]);
        let p = cold_split(&fps, &data).unwrap();
        let SplitKind::Cold { set_a, set_b } = &p.kind else {
            panic!()
        };
        assert_eq!(set_b, &["d4"]);
        assert_eq!(set_a, &["d1", "d2", "d3"]);
        assert_eq!(p.train, vec![0]);
        assert_eq!(p.test, vec![1]);
    }

    #[test]
    fn two_drugs_one_triple_is_test() {
        let fps = vec![
            Fingerprint::from_bits("x", 8, [1]).unwrap(),
            Fingerprint::from_bits("y", 8, [2]).unwrap(),
        ];
        let p = cold_split(&fps, &TripleDataset::new(vec![triple("x", "y")])).unwrap();
        assert!(p.train.is_empty());
        assert_eq!(p.test, vec![0]);
    }

    #[test]
    fn cold_split_errors() {
        let one = vec![Fingerprint::from_bits("x", 8, [1]).unwrap()];
        assert!(matches!(
            cold_split(&one, &TripleDataset::default()),
            Err(EvalError::DegenerateClustering(1))
        ));
        let two = vec![
            Fingerprint::from_bits("x", 8, [1]).unwrap(),
            Fingerprint::from_bits("y", 8, [2]).unwrap(),
        ];
        assert!(matches!(
            cold_split(&two, &TripleDataset::new(vec![triple("x", "q")])),
            Err(EvalError::UnknownDrug(id)) if id == "q"
        ));
    }

    #[test]
    fn linkage_merges_closest_first() {
        let d = vec![
            vec![0.0, 0.1, 0.9, 0.8],
            vec![0.1, 0.0, 0.7, 0.95],
            vec![0.9, 0.7, 0.0, 0.2],
            vec![0.8, 0.95, 0.2, 0.0],
        ];
        let l = complete_linkage(&d, 1);
        assert_eq!(
            l.merges[0],
            Merge {
                left: 0,
                right: 1,
                distance: 0.1
            }
        );
        assert_eq!(
            l.merges[1],
            Merge {
                left: 2,
                right: 3,
                distance: 0.2
            }
        );
        assert_eq!(
            l.merges[2],
            Merge {
                left: 0,
                right: 2,
                distance: 0.95
            }
        );
        assert_eq!(l.clusters, vec![vec![0, 1, 2, 3]]);
    }
}
