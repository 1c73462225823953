use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::record::{LabelId, NameRecord};

/// Record indices grouped by label, labels in order of first appearance.
#[derive(Debug, Clone)]
pub struct LabelGroups {
    pub labels: Vec<LabelId>,
    pub members: Vec<Vec<usize>>,
}

impl LabelGroups {
    pub fn new(records: &[NameRecord]) -> Self {
        let mut position = std::collections::HashMap::new();
        let mut groups = LabelGroups {
            labels: Vec::new(),
            members: Vec::new(),
        };
        for (i, r) in records.iter().enumerate() {
            let g = *position.entry(&r.label).or_insert_with(|| {
                groups.labels.push(r.label.clone());
                groups.members.push(Vec::new());
                groups.labels.len() - 1
            });
            groups.members[g].push(i);
        }
        groups
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// A sampled mini-batch: dataset indices and, per element, its group index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiniBatch {
    pub indices: Vec<usize>,
    pub classes: Vec<usize>,
}

impl MiniBatch {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn records<'a>(&'a self, dataset: &'a [NameRecord]) -> impl Iterator<Item = &'a NameRecord> {
        self.indices.iter().map(|&i| &dataset[i])
    }
}

/// Class-balanced sampling: `batch_size / names_per_class` distinct labels,
/// then `names_per_class` distinct names from each. Classes smaller than
/// `names_per_class` contribute all their names, topped up with replacement.
pub fn sample_batch<R: Rng + ?Sized>(
    groups: &LabelGroups,
    rng: &mut R,
    batch_size: usize,
    names_per_class: usize,
) -> Result<MiniBatch> {
    assert!(names_per_class > 0 && batch_size % names_per_class == 0);
    let n_classes = batch_size / names_per_class;
    if groups.len() < n_classes {
        return Err(Error::DatasetTooSmall(format!(
            "a batch of {batch_size} needs {n_classes} labels, dataset has {}",
            groups.len()
        )));
    }
    let mut batch = MiniBatch {
        indices: Vec::with_capacity(batch_size),
        classes: Vec::with_capacity(batch_size),
    };
    for class in index::sample(rng, groups.len(), n_classes) {
        let members = &groups.members[class];
        if members.len() >= names_per_class {
            for m in index::sample(rng, members.len(), names_per_class) {
                batch.indices.push(members[m]);
            }
        } else {
            for m in index::sample(rng, members.len(), members.len()) {
                batch.indices.push(members[m]);
            }
            for _ in members.len()..names_per_class {
                batch.indices.push(members[rng.gen_range(0..members.len())]);
            }
        }
        batch.classes.extend(std::iter::repeat(class).take(names_per_class));
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::Lang;
    use crate::rng::seeded_rng;
    use std::collections::HashSet;

    fn dataset(classes: usize, per_class: usize) -> Vec<NameRecord> {
        (0..classes)
            .flat_map(|c| {
                (0..per_class).map(move |k| NameRecord {
                    name: format!("name {c} {k}"),
                    label: LabelId::new(format!("C{c}")).unwrap(),
                    lang: Lang::EN,
                })
            })
            .collect()
    }

    #[test]
    fn exact_cover() {
        let data = dataset(256, 2);
        let groups = LabelGroups::new(&data);
        let batch = sample_batch(&groups, &mut seeded_rng(1), 512, 2).unwrap();
        let distinct: HashSet<_> = batch.indices.iter().collect();
        assert_eq!(distinct.len(), 512);
        let classes: HashSet<_> = batch.classes.iter().collect();
        assert_eq!(classes.len(), 256);
        for (i, &c) in batch.indices.iter().zip(&batch.classes) {
            assert_eq!(data[*i].label, groups.labels[c]);
        }
    }

    #[test]
    fn singleton_class_is_repeated() {
        let data = dataset(1, 1);
        let groups = LabelGroups::new(&data);
        let batch = sample_batch(&groups, &mut seeded_rng(1), 2, 2).unwrap();
        assert_eq!(batch.indices, vec![0, 0]);
    }

    #[test]
    fn deterministic_per_seed() {
        let data = dataset(50, 4);
        let groups = LabelGroups::new(&data);
        let a = sample_batch(&groups, &mut seeded_rng(3), 16, 2).unwrap();
        let b = sample_batch(&groups, &mut seeded_rng(3), 16, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn too_few_labels() {
        let groups = LabelGroups::new(&dataset(3, 2));
        assert!(matches!(
            sample_batch(&groups, &mut seeded_rng(1), 8, 2),
            Err(Error::DatasetTooSmall(_))
        ));
    }
}
