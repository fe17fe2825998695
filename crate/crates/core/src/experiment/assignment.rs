use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ExperimentError, ReadingCondition};

pub const GROUP_COUNT: usize = 6;
pub const STORIES_PER_SESSION: usize = 4;

const ROTATING: [ReadingCondition; 3] = [ReadingCondition::C2, ReadingCondition::C3, ReadingCondition::C4];

/// One counterbalancing group: the fixed story is always read under C1, the
/// other three are mapped one-to-one onto C2..C4.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub group_id: u8,
    pub fixed_story_id: String,
    pub rotating: BTreeMap<ReadingCondition, String>,
}

impl GroupAssignment {
    /// Reading slots in presentation order: C1 with the fixed story, then
    /// C2, C3 and C4 with their mapped stories.
    pub fn slots(&self) -> Vec<(ReadingCondition, String)> {
        let mut out = vec![(ReadingCondition::C1, self.fixed_story_id.clone())];
        out.extend(ROTATING.iter().map(|c| (*c, self.rotating[c].clone())));
        out
    }

    pub fn story_for(&self, condition: ReadingCondition) -> &str {
        match condition {
            ReadingCondition::C1 => &self.fixed_story_id,
            c => &self.rotating[&c],
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let keys: BTreeSet<ReadingCondition> = self.rotating.keys().copied().collect();
        let stories: BTreeSet<&String> = self.rotating.values().collect();
        if keys != ROTATING.into_iter().collect() || stories.len() != 3 || stories.contains(&self.fixed_story_id) {
            return Err(ExperimentError::InvalidArgument(format!("group {} is not a bijection onto C2..C4", self.group_id)));
        }
        Ok(())
    }
}

/// All six assignments of the three non-fixed stories onto (C2, C3, C4), in
/// lexicographic permutation order of their positions in `story_ids`.
pub fn build_group_assignments(story_ids: &[String], fixed_story_id: &str) -> Result<Vec<GroupAssignment>, ExperimentError> {
    if story_ids.len() != STORIES_PER_SESSION {
        return Err(ExperimentError::WrongStoryCount(story_ids.len()));
    }
    let distinct: BTreeSet<&String> = story_ids.iter().collect();
    if distinct.len() != story_ids.len() {
        return Err(ExperimentError::DuplicateStoryIds);
    }
    if !story_ids.iter().any(|s| s == fixed_story_id) {
        return Err(ExperimentError::FixedStoryNotFound(fixed_story_id.to_string()));
    }
    let rotating: Vec<&String> = story_ids.iter().filter(|s| *s != fixed_story_id).collect();

    let mut perm = [0usize, 1, 2];
    let mut out = Vec::with_capacity(GROUP_COUNT);
    loop {
        let mapping = ROTATING.iter().zip(perm).map(|(c, i)| (*c, rotating[i].clone())).collect();
        out.push(GroupAssignment {
            group_id: out.len() as u8 + 1,
            fixed_story_id: fixed_story_id.to_string(),
            rotating: mapping,
        });
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).unwrap();
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn lexicographic_order() {
        let groups = build_group_assignments(&ids(&["A", "B", "C", "D"]), "D").unwrap();
        let seq: Vec<String> = groups
            .iter()
            .map(|g| g.slots()[1..].iter().map(|(_, s)| s.as_str()).collect::<String>())
            .collect();
        assert_eq!(seq, vec!["ABC", "ACB", "BAC", "BCA", "CAB", "CBA"]);
        assert!(groups.iter().all(|g| g.validate().is_ok()));
        assert_eq!(groups.iter().map(|g| g.group_id).collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6]);
    }

    #[test]
    fn errors() {
        assert!(matches!(build_group_assignments(&ids(&["A", "A", "C", "D"]), "D"), Err(ExperimentError::DuplicateStoryIds)));
        assert!(matches!(
            build_group_assignments(&ids(&["A", "B", "C", "D"]), "E"),
            Err(ExperimentError::FixedStoryNotFound(_))
        ));
        assert!(matches!(build_group_assignments(&ids(&["A", "B", "C"]), "A"), Err(ExperimentError::WrongStoryCount(3))));
    }
}
