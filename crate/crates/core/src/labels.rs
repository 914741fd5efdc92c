//! Node labels and train/validation/test masks.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Label {
    Fraud,
    Benign,
    Unknown,
}

impl Label {
    /// 1 for fraud, 0 for benign, `None` for unknown.
    pub fn as_binary(self) -> Option<u8> {
        match self {
            Label::Fraud => Some(1),
            Label::Benign => Some(0),
            Label::Unknown => None,
        }
    }

    /// One-hot `[benign, fraud]` encoding.
    pub fn one_hot(self) -> Option<[f64; 2]> {
        self.as_binary().map(|b| if b == 1 { [0.0, 1.0] } else { [1.0, 0.0] })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// Per-node labels plus disjoint split masks over labeled nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSet {
    labels: Vec<Label>,
    train_mask: Vec<bool>,
    val_mask: Vec<bool>,
    test_mask: Vec<bool>,
}

impl LabelSet {
    /// Labels with all masks empty.
    pub fn unsplit(labels: Vec<Label>) -> Self {
        let n = labels.len();
        LabelSet {
            labels,
            train_mask: vec![false; n],
            val_mask: vec![false; n],
            test_mask: vec![false; n],
        }
    }

    pub fn new(
        labels: Vec<Label>,
        train_mask: Vec<bool>,
        val_mask: Vec<bool>,
        test_mask: Vec<bool>,
    ) -> Result<Self> {
        let n = labels.len();
        for m in [&train_mask, &val_mask, &test_mask] {
            if m.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: m.len(),
                });
            }
        }
        for i in 0..n {
            let hits = train_mask[i] as u8 + val_mask[i] as u8 + test_mask[i] as u8;
            if hits > 1 {
                return Err(Error::InvalidLabels(format!("node {i} is in more than one split")));
            }
            if hits == 1 && labels[i] == Label::Unknown {
                return Err(Error::InvalidLabels(format!("unlabeled node {i} is assigned to a split")));
            }
        }
        Ok(LabelSet {
            labels,
            train_mask,
            val_mask,
            test_mask,
        })
    }

    /// Builds masks from an explicit split assignment per node.
    pub fn with_splits(labels: Vec<Label>, splits: &[Option<Split>]) -> Result<Self> {
        let n = labels.len();
        if splits.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: splits.len(),
            });
        }
        let mask = |s: Split| splits.iter().map(|x| *x == Some(s)).collect::<Vec<_>>();
        Self::new(labels, mask(Split::Train), mask(Split::Val), mask(Split::Test))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Label {
        self.labels[node]
    }

    pub fn mask(&self, split: Split) -> &[bool] {
        match split {
            Split::Train => &self.train_mask,
            Split::Val => &self.val_mask,
            Split::Test => &self.test_mask,
        }
    }

    pub fn split_of(&self, node: usize) -> Option<Split> {
        [Split::Train, Split::Val, Split::Test]
            .into_iter()
            .find(|&s| self.mask(s)[node])
    }

    /// Node indices in `split`, ascending.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.mask(split)
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    pub fn labeled_indices(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.labels[i] != Label::Unknown)
            .collect()
    }

    /// `(fraud, benign)` counts within a split.
    pub fn class_counts(&self, split: Split) -> (usize, usize) {
        let mut counts = (0, 0);
        for (l, &m) in self.labels.iter().zip(self.mask(split)) {
            if m {
                match l {
                    Label::Fraud => counts.0 += 1,
                    Label::Benign => counts.1 += 1,
                    Label::Unknown => {}
                }
            }
        }
        counts
    }

    /// True if every labeled node belongs to some split.
    pub fn covers_all_labeled(&self) -> bool {
        (0..self.len()).all(|i| self.labels[i] == Label::Unknown || self.split_of(i).is_some())
    }

    /// Replaces the masks with a stratified random split of the labeled
    /// nodes in the given proportions (train, val; test takes the rest).
    ///
    /// Global split sizes are fixed first (`round(frac * n_labeled)`) and then
    /// apportioned across the two classes by largest remainder, so the total
    /// sizes are exact and each class is split proportionally.
    pub fn stratified_split(&self, train_frac: f64, val_frac: f64, seed: u64) -> Result<LabelSet> {
        if !(0.0..=1.0).contains(&train_frac)
            || !(0.0..=1.0).contains(&val_frac)
            || train_frac + val_frac > 1.0
        {
            return Err(Error::InvalidConfig(format!(
                "split fractions {train_frac}/{val_frac} are not a valid partition"
            )));
        }
        let mut rng = rng::stream(seed, rng::STREAM_SPLIT);
        let mut fraud: Vec<usize> = Vec::new();
        let mut benign: Vec<usize> = Vec::new();
        for (i, l) in self.labels.iter().enumerate() {
            match l {
                Label::Fraud => fraud.push(i),
                Label::Benign => benign.push(i),
                Label::Unknown => {}
            }
        }
        fraud.shuffle(&mut rng);
        benign.shuffle(&mut rng);

        let total = (fraud.len() + benign.len()) as f64;
        let n_train = round_half_up(train_frac * total);
        let n_val = round_half_up(val_frac * total).min(fraud.len() + benign.len() - n_train);
        let class_sizes = [fraud.len(), benign.len()];
        let train_per = apportion(n_train, &class_sizes, train_frac, &class_sizes);
        let remaining = [class_sizes[0] - train_per[0], class_sizes[1] - train_per[1]];
        let val_per = apportion(n_val, &class_sizes, val_frac, &remaining);

        let n = self.len();
        let mut train_mask = vec![false; n];
        let mut val_mask = vec![false; n];
        let mut test_mask = vec![false; n];
        for (c, members) in [fraud, benign].iter().enumerate() {
            for (pos, &node) in members.iter().enumerate() {
                if pos < train_per[c] {
                    train_mask[node] = true;
                } else if pos < train_per[c] + val_per[c] {
                    val_mask[node] = true;
                } else {
                    test_mask[node] = true;
                }
            }
        }
        LabelSet::new(self.labels.clone(), train_mask, val_mask, test_mask)
    }
}

fn round_half_up(x: f64) -> usize {
    libm::floor(x + 0.5) as usize
}

/// Splits `target` across the two classes proportionally to `sizes * frac`,
/// handing leftovers out by largest remainder (ties to the lower class index)
/// and never exceeding `caps`.
fn apportion(target: usize, sizes: &[usize; 2], frac: f64, caps: &[usize; 2]) -> [usize; 2] {
    let ideal = [sizes[0] as f64 * frac, sizes[1] as f64 * frac];
    let rem = |c: usize| ideal[c] - libm::floor(ideal[c]);
    let mut out = [
        (libm::floor(ideal[0]) as usize).min(caps[0]),
        (libm::floor(ideal[1]) as usize).min(caps[1]),
    ];
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    let mut assigned = out[0] + out[1];
    for &c in &order {
        if assigned < target && out[c] < caps[c] {
            out[c] += 1;
            assigned += 1;
        }
    }
    for &c in &order {
        while assigned < target && out[c] < caps[c] {
            out[c] += 1;
            assigned += 1;
        }
    }
    while assigned > target {
        let c = if out[0] > out[1] { 0 } else { 1 };
        out[c] -= 1;
        assigned -= 1;
    }
    out
}
