use std::collections::{HashSet, VecDeque};

use rand::seq::SliceRandom;

use super::{Document, TaskId, NUM_CLASSES};
use crate::util::rng_for;
use crate::{Error, Result};

/// Train / development / test partition of a labeled corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub task: TaskId,
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

/// Per-label, per-split document counts: every cell is the floor or ceiling
/// of `count[label] * size[split] / total`, and every split gets exactly its
/// requested size.
///
/// Cells are first rounded by largest remainder; any seats the greedy pass
/// cannot place are settled by augmenting paths, which always succeed because
/// an exact rounding exists when rows and columns have integer sums.
pub fn largest_remainder_targets(counts: &[usize], sizes: &[usize]) -> Result<Vec<Vec<usize>>> {
    let total: usize = counts.iter().sum();
    let requested: usize = sizes.iter().sum();
    if requested > total {
        return Err(Error::InvalidArgument(format!(
            "split sizes sum to {requested} but only {total} documents are available"
        )));
    }
    if total == 0 {
        return Ok(vec![vec![0; sizes.len()]; counts.len()]);
    }
    // A trailing column holds the documents left out of every split.
    let mut columns = sizes.to_vec();
    columns.push(total - requested);
    let (rows, cols) = (counts.len(), columns.len());

    let mut alloc = vec![vec![0usize; cols]; rows];
    let mut remainder = vec![vec![0usize; cols]; rows];
    for (l, &c) in counts.iter().enumerate() {
        for (s, &size) in columns.iter().enumerate() {
            let num = c * size;
            alloc[l][s] = num / total;
            remainder[l][s] = num % total;
        }
    }
    let mut row_need: Vec<usize> = (0..rows)
        .map(|l| counts[l] - alloc[l].iter().sum::<usize>())
        .collect();
    let mut col_need: Vec<usize> = (0..cols)
        .map(|s| columns[s] - (0..rows).map(|l| alloc[l][s]).sum::<usize>())
        .collect();

    let mut bumped = vec![vec![false; cols]; rows];
    let mut cells: Vec<(usize, usize)> = (0..rows)
        .flat_map(|l| (0..cols).map(move |s| (l, s)))
        .filter(|&(l, s)| remainder[l][s] > 0)
        .collect();
    cells.sort_by(|a, b| remainder[b.0][b.1].cmp(&remainder[a.0][a.1]).then(a.cmp(b)));
    for &(l, s) in &cells {
        if row_need[l] > 0 && col_need[s] > 0 {
            bumped[l][s] = true;
            row_need[l] -= 1;
            col_need[s] -= 1;
        }
    }

    while let Some(start) = row_need.iter().position(|&n| n > 0) {
        let (flips, end_col) = augmenting_path(start, &remainder, &bumped, &col_need)
            .ok_or_else(|| Error::Data("no proportional rounding exists for split sizes".into()))?;
        for (l, s, add) in flips {
            bumped[l][s] = add;
        }
        row_need[start] -= 1;
        col_need[end_col] -= 1;
    }

    for l in 0..rows {
        for s in 0..cols {
            alloc[l][s] += bumped[l][s] as usize;
        }
    }
    for row in &mut alloc {
        row.pop();
    }
    Ok(alloc)
}

/// Breadth-first search for an alternating path from row `start` to a column
/// with spare seats. Returns the cell flips to apply and the final column.
fn augmenting_path(
    start: usize,
    remainder: &[Vec<usize>],
    bumped: &[Vec<bool>],
    col_need: &[usize],
) -> Option<(Vec<(usize, usize, bool)>, usize)> {
    let rows = remainder.len();
    let cols = col_need.len();
    let mut col_parent: Vec<Option<usize>> = vec![None; cols];
    let mut row_parent: Vec<Option<usize>> = vec![None; rows];
    let mut row_seen = vec![false; rows];
    row_seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(l) = queue.pop_front() {
        for s in 0..cols {
            if remainder[l][s] == 0 || bumped[l][s] || col_parent[s].is_some() {
                continue;
            }
            col_parent[s] = Some(l);
            if col_need[s] > 0 {
                let mut flips = Vec::new();
                let mut col = s;
                loop {
                    let row = col_parent[col]?;
                    flips.push((row, col, true));
                    match row_parent[row] {
                        Some(prev_col) => {
                            flips.push((row, prev_col, false));
                            col = prev_col;
                        }
                        None => break,
                    }
                }
                return Some((flips, s));
            }
            for next in 0..rows {
                if bumped[next][s] && !row_seen[next] {
                    row_seen[next] = true;
                    row_parent[next] = Some(s);
                    queue.push_back(next);
                }
            }
        }
    }
    None
}

/// Splits `docs` into train/dev/test with every label spread proportionally.
///
/// Within each label the documents are shuffled with `seed` before being
/// dealt out, and each split is shuffled again afterwards.
pub fn stratified_split(
    docs: &[Document],
    task: TaskId,
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<CorpusSplit> {
    let mut seen = HashSet::new();
    if let Some(d) = docs.iter().find(|d| !seen.insert(d.id.as_str())) {
        return Err(Error::Data(format!("duplicate document id {}", d.id)));
    }
    let mut groups: Vec<Vec<&Document>> = vec![Vec::new(); NUM_CLASSES];
    for d in docs {
        groups[d.require_label(task)?].push(d);
    }
    for (label, g) in groups.iter().enumerate() {
        if !g.is_empty() && g.len() < 3 {
            return Err(Error::Data(format!(
                "{task} label {label} has only {} documents, fewer than the 3 splits",
                g.len()
            )));
        }
    }
    let counts: Vec<usize> = groups.iter().map(Vec::len).collect();
    let targets = largest_remainder_targets(&counts, &[sizes.0, sizes.1, sizes.2])?;

    let mut parts: [Vec<Document>; 3] = Default::default();
    for (label, group) in groups.iter_mut().enumerate() {
        group.shuffle(&mut rng_for(seed, label as u64));
        let mut it = group.iter();
        for (s, part) in parts.iter_mut().enumerate() {
            part.extend(it.by_ref().take(targets[label][s]).map(|d| (*d).clone()));
        }
    }
    for (s, part) in parts.iter_mut().enumerate() {
        part.shuffle(&mut rng_for(seed, 100 + s as u64));
    }
    let [train, dev, test] = parts;
    Ok(CorpusSplit {
        task,
        train,
        dev,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn corpus(counts: &[usize], task: TaskId) -> Vec<Document> {
        let mut out = Vec::new();
        for (label, &c) in counts.iter().enumerate() {
            for i in 0..c {
                let mut labels = BTreeMap::new();
                labels.insert(task, label as u8);
                out.push(Document::new(format!("l{label}-{i}"), "word", labels).unwrap());
            }
        }
        out
    }

    fn label_counts(docs: &[Document], task: TaskId) -> Vec<usize> {
        let mut c = vec![0; NUM_CLASSES];
        for d in docs {
            c[d.label(task).unwrap()] += 1;
        }
        c
    }

    #[test]
    fn severity_of_study_distribution() {
        let task = TaskId::new(1).unwrap();
        let docs = corpus(&[58, 940, 402], task);
        let split = stratified_split(&docs, task, (1000, 200, 200), 3).unwrap();
        assert_eq!((split.train.len(), split.dev.len(), split.test.len()), (1000, 200, 200));
        let train0 = label_counts(&split.train, task)[0];
        assert!(train0 == 41 || train0 == 42, "train label-0 count {train0}");
    }

    #[test]
    fn single_label_corpus() {
        let task = TaskId::new(2).unwrap();
        let docs = corpus(&[10], task);
        let split = stratified_split(&docs, task, (8, 1, 1), 0).unwrap();
        assert_eq!((split.train.len(), split.dev.len(), split.test.len()), (8, 1, 1));
    }

    #[test]
    fn deterministic_given_seed() {
        let task = TaskId::new(3).unwrap();
        let docs = corpus(&[30, 50, 20], task);
        let a = stratified_split(&docs, task, (60, 20, 20), 11).unwrap();
        let b = stratified_split(&docs, task, (60, 20, 20), 11).unwrap();
        assert_eq!(a, b);
        let c = stratified_split(&docs, task, (60, 20, 20), 12).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn sparse_label_is_named_in_error() {
        let task = TaskId::new(4).unwrap();
        let docs = corpus(&[20, 2, 20], task);
        let err = stratified_split(&docs, task, (30, 5, 5), 0).unwrap_err();
        assert!(err.to_string().contains("label 1"), "{err}");
    }

    #[test]
    fn oversized_request_rejected() {
        let task = TaskId::new(4).unwrap();
        let docs = corpus(&[5, 5, 5], task);
        assert!(stratified_split(&docs, task, (10, 5, 5), 0).is_err());
    }

    proptest! {
        #[test]
        fn every_cell_within_one_of_proportional_target(
            c0 in 3usize..200, c1 in 3usize..200, c2 in 3usize..200,
            f_train in 0.2f64..0.7, f_dev in 0.05f64..0.15, f_test in 0.05f64..0.15,
            seed in 0u64..1000,
        ) {
            let task = TaskId::new(2).unwrap();
            let counts = [c0, c1, c2];
            let total: usize = counts.iter().sum();
            let sizes = (
                (total as f64 * f_train) as usize,
                (total as f64 * f_dev) as usize,
                (total as f64 * f_test) as usize,
            );
            let docs = corpus(&counts, task);
            let split = stratified_split(&docs, task, sizes, seed).unwrap();
            let parts = [&split.train, &split.dev, &split.test];
            let wanted = [sizes.0, sizes.1, sizes.2];
            let mut ids = HashSet::new();
            for (part, &size) in parts.iter().zip(&wanted) {
                prop_assert_eq!(part.len(), size);
                let got = label_counts(part, task);
                for l in 0..NUM_CLASSES {
                    let target = counts[l] as f64 * size as f64 / total as f64;
                    prop_assert!((got[l] as f64 - target).abs() < 1.0,
                        "label {} got {} target {}", l, got[l], target);
                }
                for d in part.iter() {
                    prop_assert!(ids.insert(d.id.clone()), "document in two splits");
                }
            }
        }
    }
}
