//! Datasets of strongly- and weakly-labeled instances.
//!
//! A [`Dataset`] is the one container used for strong, weak, validation and
//! test splits; which optional fields are populated tells them apart. Instance
//! indices are positional and stable. Weak supervision is described by a
//! [`GroupTable`], built from the `group_id`/`group_label` fields.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::error::{config_err, Error, Result};
use crate::math;
use crate::rng::{self, stream};

/// One feature vector with its optional labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub features: Vec<f64>,
    pub true_label: Option<bool>,
    pub group_id: Option<u64>,
    pub group_label: Option<bool>,
}

impl Instance {
    pub fn new(features: Vec<f64>) -> Self {
        Instance {
            features,
            true_label: None,
            group_id: None,
            group_label: None,
        }
    }

    pub fn with_label(mut self, y: bool) -> Self {
        self.true_label = Some(y);
        self
    }

    pub fn with_group(mut self, group_id: u64, g: bool) -> Self {
        self.group_id = Some(group_id);
        self.group_label = Some(g);
        self
    }
}

/// An ordered, immutable set of instances sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    instances: Vec<Instance>,
}

impl Dataset {
    /// Validates and wraps `instances`.
    pub fn new(dim: usize, instances: Vec<Instance>) -> Result<Self> {
        if dim == 0 {
            return Err(config_err!("feature dimension must be positive"));
        }
        for (index, inst) in instances.iter().enumerate() {
            if inst.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: inst.features.len(),
                });
            }
            if inst.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInstance {
                    index,
                    reason: "non-finite feature value",
                });
            }
            if inst.group_label.is_some() && inst.group_id.is_none() {
                return Err(Error::InvalidInstance {
                    index,
                    reason: "group label without group id",
                });
            }
        }
        Ok(Dataset { dim, instances })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn get(&self, index: usize) -> Option<&Instance> {
        self.instances.get(index)
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Instance> {
        self.instances.iter()
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.instances.iter().map(|i| i.features.as_slice()).collect()
    }

    /// True labels of every instance; errors if any is missing.
    pub fn true_labels(&self) -> Result<Vec<bool>> {
        self.instances
            .iter()
            .map(|i| i.true_label.ok_or(Error::MissingLabels("true label (y)")))
            .collect()
    }

    /// Group labels of every instance; errors if any is missing.
    pub fn group_labels(&self) -> Result<Vec<bool>> {
        self.instances
            .iter()
            .map(|i| i.group_label.ok_or(Error::MissingLabels("group label (g)")))
            .collect()
    }

    pub fn has_groups(&self) -> bool {
        self.instances.iter().any(|i| i.group_id.is_some())
    }

    /// New dataset made of the instances at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            let inst = self.instances.get(i).ok_or_else(|| {
                Error::Shape(format!("index {i} out of range for {} instances", self.len()))
            })?;
            out.push(inst.clone());
        }
        Ok(Dataset {
            dim: self.dim,
            instances: out,
        })
    }

    /// Copy with every group field cleared.
    pub fn without_groups(&self) -> Dataset {
        let instances = self
            .instances
            .iter()
            .map(|i| Instance {
                group_id: None,
                group_label: None,
                ..i.clone()
            })
            .collect();
        Dataset {
            dim: self.dim,
            instances,
        }
    }

    /// Concatenation of two datasets with the same dimension.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut instances = self.instances.clone();
        instances.extend(other.instances.iter().cloned());
        Ok(Dataset {
            dim: self.dim,
            instances,
        })
    }

    /// `#neg / #pos` over true labels (infinite when there are no positives).
    pub fn skew(&self) -> Result<f64> {
        let labels = self.true_labels()?;
        let pos = labels.iter().filter(|&&y| y).count();
        let neg = labels.len() - pos;
        Ok(if pos == 0 {
            f64::INFINITY
        } else {
            neg as f64 / pos as f64
        })
    }
}

/// A labeled group of instance indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub label: bool,
    pub members: Vec<usize>,
}

/// Group id to (group label, member indices) for one dataset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroupTable {
    groups: BTreeMap<u64, Group>,
}

impl GroupTable {
    /// Builds the table from the group fields of `ds`. Instances without a
    /// group id are not part of any group.
    pub fn from_dataset(ds: &Dataset) -> Result<Self> {
        let mut groups: BTreeMap<u64, Group> = BTreeMap::new();
        for (index, inst) in ds.iter().enumerate() {
            let Some(group_id) = inst.group_id else {
                continue;
            };
            let label = inst.group_label.ok_or_else(|| Error::InconsistentGroup {
                group_id,
                reason: format!("member {index} has no group label"),
            })?;
            match groups.get_mut(&group_id) {
                Some(group) if group.label != label => {
                    return Err(Error::InconsistentGroup {
                        group_id,
                        reason: format!("member {index} has label {} but group has {}", label as u8, group.label as u8),
                    })
                }
                Some(group) => group.members.push(index),
                None => {
                    groups.insert(
                        group_id,
                        Group {
                            label,
                            members: alloc::vec![index],
                        },
                    );
                }
            }
        }
        Ok(GroupTable { groups })
    }

    /// Checks every table invariant against `ds`.
    pub fn validate(&self, ds: &Dataset) -> Result<()> {
        let mut seen = alloc::vec![false; ds.len()];
        for (&group_id, group) in &self.groups {
            if group.members.is_empty() {
                return Err(Error::InconsistentGroup {
                    group_id,
                    reason: "group has no members".into(),
                });
            }
            for &m in &group.members {
                let inst = ds.get(m).ok_or_else(|| Error::InconsistentGroup {
                    group_id,
                    reason: format!("member index {m} out of range"),
                })?;
                if core::mem::replace(&mut seen[m], true) {
                    return Err(Error::InconsistentGroup {
                        group_id,
                        reason: format!("instance {m} belongs to more than one group"),
                    });
                }
                if inst.group_label != Some(group.label) || inst.group_id != Some(group_id) {
                    return Err(Error::InconsistentGroup {
                        group_id,
                        reason: format!("instance {m} disagrees with its group"),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, group_id: u64) -> Option<&Group> {
        self.groups.get(&group_id)
    }

    /// Groups in ascending id order.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &Group)> {
        self.groups.iter().map(|(&id, g)| (id, g))
    }
}

/// Partitions `ds` into `fractions.len()` datasets after a seeded shuffle.
///
/// Units of assignment are whole groups when the dataset carries group ids
/// (ungrouped instances are singleton units). Each partition receives
/// `round(fraction * units)` units, the last one takes the remainder.
pub fn split(ds: &Dataset, fractions: &[f64], seed: u64) -> Result<Vec<Dataset>> {
    if ds.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if fractions.is_empty() {
        return Err(config_err!("at least one split fraction is required"));
    }
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0)) {
        return Err(config_err!("split fraction {f} must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if math::abs(total - 1.0) > 1e-9 {
        return Err(config_err!("split fractions sum to {total}, expected 1"));
    }

    let mut units: Vec<Vec<usize>> = Vec::new();
    let mut by_group: BTreeMap<u64, usize> = BTreeMap::new();
    for (i, inst) in ds.iter().enumerate() {
        match inst.group_id {
            Some(id) => match by_group.get(&id) {
                Some(&u) => units[u].push(i),
                None => {
                    by_group.insert(id, units.len());
                    units.push(alloc::vec![i]);
                }
            },
            None => units.push(alloc::vec![i]),
        }
    }

    let mut order: Vec<usize> = (0..units.len()).collect();
    order.shuffle(&mut rng::rng(rng::derive_seed(seed, stream::SHUFFLE)));

    let n = units.len();
    let mut sizes = Vec::with_capacity(fractions.len());
    let mut assigned = 0usize;
    for &f in &fractions[..fractions.len() - 1] {
        let size = (math::round(f * n as f64) as usize).min(n - assigned);
        sizes.push(size);
        assigned += size;
    }
    sizes.push(n - assigned);

    let mut out = Vec::with_capacity(sizes.len());
    let mut cursor = 0;
    for size in sizes {
        let indices: Vec<usize> = order[cursor..cursor + size]
            .iter()
            .flat_map(|&u| units[u].iter().copied())
            .collect();
        cursor += size;
        out.push(ds.subset(&indices)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn plain(n: usize) -> Dataset {
        let instances = (0..n)
            .map(|i| Instance::new(vec![i as f64, 0.0]).with_label(i % 2 == 0))
            .collect();
        Dataset::new(2, instances).unwrap()
    }

    fn grouped(groups: usize, size: usize) -> Dataset {
        let mut instances = Vec::new();
        for g in 0..groups {
            for j in 0..size {
                instances.push(Instance::new(vec![(g * size + j) as f64]).with_group(g as u64, g % 2 == 0));
            }
        }
        Dataset::new(1, instances).unwrap()
    }

    #[test]
    fn rejects_ragged_and_non_finite() {
        let bad = vec![Instance::new(vec![1.0, 2.0]), Instance::new(vec![1.0])];
        assert!(matches!(Dataset::new(2, bad), Err(Error::DimensionMismatch { .. })));
        let nan = vec![Instance::new(vec![f64::NAN])];
        assert!(matches!(Dataset::new(1, nan), Err(Error::InvalidInstance { index: 0, .. })));
        let mut orphan = Instance::new(vec![0.0]);
        orphan.group_label = Some(true);
        assert!(Dataset::new(1, vec![orphan]).is_err());
    }

    #[test]
    fn group_table_rejects_mixed_labels() {
        let instances = vec![
            Instance::new(vec![0.0]).with_group(7, false),
            Instance::new(vec![1.0]).with_group(7, true),
        ];
        let ds = Dataset::new(1, instances).unwrap();
        assert!(matches!(
            GroupTable::from_dataset(&ds),
            Err(Error::InconsistentGroup { group_id: 7, .. })
        ));
    }

    #[test]
    fn group_table_round_trips_membership() {
        let ds = grouped(4, 3);
        let gt = GroupTable::from_dataset(&ds).unwrap();
        assert_eq!(gt.len(), 4);
        assert_eq!(gt.get(2).unwrap().members, vec![6, 7, 8]);
        gt.validate(&ds).unwrap();
    }

    #[test]
    fn split_halves_are_disjoint_cover() {
        let ds = plain(100);
        let parts = split(&ds, &[0.5, 0.5], 1).unwrap();
        assert_eq!(parts[0].len(), 50);
        assert_eq!(parts[1].len(), 50);
        let mut all: Vec<f64> = parts.iter().flat_map(|p| p.iter().map(|i| i.features[0])).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(all, expected);
        assert_eq!(parts, split(&ds, &[0.5, 0.5], 1).unwrap());
    }

    #[test]
    fn split_keeps_groups_whole() {
        let ds = grouped(10, 20);
        let parts = split(&ds, &[0.8, 0.2], 3).unwrap();
        let gts: Vec<GroupTable> = parts.iter().map(|p| GroupTable::from_dataset(p).unwrap()).collect();
        assert_eq!(gts[0].len(), 8);
        assert_eq!(gts[1].len(), 2);
        for (id, _) in gts[0].iter() {
            assert!(gts[1].get(id).is_none());
        }
        assert!(gts.iter().all(|gt| gt.iter().all(|(_, g)| g.members.len() == 20)));
    }

    #[test]
    fn split_errors() {
        let empty = Dataset::new(1, Vec::new()).unwrap();
        assert_eq!(split(&empty, &[1.0], 0), Err(Error::EmptyDataset));
        assert!(split(&plain(4), &[0.0, 1.0], 0).is_err());
        assert!(split(&plain(4), &[0.5, 0.4], 0).is_err());
    }

    #[test]
    fn remainder_goes_last() {
        let parts = split(&plain(10), &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Dataset::len).collect();
        assert_eq!(sizes, vec![3, 3, 4]);
    }
}
