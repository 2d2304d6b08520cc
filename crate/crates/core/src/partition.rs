//! Block partitions of the variable indices, update orders over them, and
//! the seeded generator that assembles them.
//!
//! All randomness comes from [`SolverRng`] (xoshiro256++ seeded through
//! SplitMix64), and bounded integers are drawn as `u64` so that a given seed
//! produces the same partitions on every platform.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{invalid, Error, Result};

/// The crate's only random number generator.
pub type SolverRng = Xoshiro256PlusPlus;

pub fn rng_from_seed(seed: u64) -> SolverRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Largest `n` accepted by the exhaustive enumerations.
pub const MAX_ENUMERATION_N: usize = 10;

/// Uniform Fisher–Yates shuffle.
pub fn shuffle<T>(items: &mut [T], rng: &mut SolverRng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i as u64) as usize;
        items.swap(i, j);
    }
}

/// Grouping of `{0, …, n−1}` into disjoint blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    groups: Vec<Vec<usize>>,
    block_size: usize,
}

impl BlockPartition {
    /// Checks the disjoint-cover property for an explicit grouping over `n`
    /// variables.
    pub fn from_groups(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        check_cover(n, &groups)?;
        let block_size = groups.iter().map(Vec::len).max().unwrap_or(0);
        Ok(Self { groups, block_size })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn num_blocks(&self) -> usize {
        self.groups.len()
    }

    /// The groups swept in their stored order.
    pub fn in_order(&self) -> UpdateOrder {
        UpdateOrder {
            ordered_groups: self.groups.clone(),
        }
    }

    /// The groups swept in a freshly drawn random order.
    pub fn permuted(&self, rng: &mut SolverRng) -> UpdateOrder {
        let mut ordered_groups = self.groups.clone();
        shuffle(&mut ordered_groups, rng);
        UpdateOrder { ordered_groups }
    }
}

/// An ordered sweep over a partition's groups.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UpdateOrder {
    ordered_groups: Vec<Vec<usize>>,
}

impl UpdateOrder {
    pub fn new(n: usize, ordered_groups: Vec<Vec<usize>>) -> Result<Self> {
        check_cover(n, &ordered_groups)?;
        Ok(Self { ordered_groups })
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.ordered_groups
    }

    pub fn num_blocks(&self) -> usize {
        self.ordered_groups.len()
    }

    pub fn dim(&self) -> usize {
        self.ordered_groups.iter().map(Vec::len).sum()
    }

    /// The underlying unordered partition, with each group sorted and the
    /// groups sorted by their smallest index.
    pub fn partition_key(&self) -> Vec<Vec<usize>> {
        let mut groups: Vec<Vec<usize>> = self
            .ordered_groups
            .iter()
            .map(|g| {
                let mut g = g.clone();
                g.sort_unstable();
                g
            })
            .collect();
        groups.sort();
        groups
    }
}

fn check_cover(n: usize, groups: &[Vec<usize>]) -> Result<()> {
    let mut seen = vec![false; n];
    for g in groups {
        if g.is_empty() {
            return Err(invalid("empty block"));
        }
        for &i in g {
            if i >= n {
                return Err(invalid(format!("index {i} outside 0..{n}")));
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(invalid(format!("index {i} appears in two blocks")));
            }
        }
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(invalid(format!("index {i} is not covered by any block")));
    }
    Ok(())
}

/// Splits `0..n` into blocks of `s` (the last block takes the remainder).
///
/// With `randomize` the indices are first shuffled by a generator seeded
/// from `seed`; otherwise blocks are consecutive runs.
pub fn make_partition(n: usize, s: usize, seed: u64, randomize: bool) -> Result<BlockPartition> {
    let mut rng = rng_from_seed(seed);
    partition_with(n, s, randomize.then_some(&mut rng))
}

pub(crate) fn partition_with(
    n: usize,
    s: usize,
    rng: Option<&mut SolverRng>,
) -> Result<BlockPartition> {
    if s == 0 || s > n {
        return Err(invalid(format!("block size {s} must lie in 1..={n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if let Some(rng) = rng {
        shuffle(&mut idx, rng);
    }
    let groups = idx.chunks(s).map(<[usize]>::to_vec).collect();
    Ok(BlockPartition {
        groups,
        block_size: s,
    })
}

fn check_enumeration(n: usize, p: usize) -> Result<usize> {
    if p == 0 || n == 0 || n % p != 0 {
        return Err(invalid(format!("{p} blocks do not divide {n} variables")));
    }
    if n > MAX_ENUMERATION_N {
        return Err(Error::Capacity(format!(
            "exhaustive enumeration is limited to n <= {MAX_ENUMERATION_N}, got {n}"
        )));
    }
    Ok(n / p)
}

/// Every ordered sequence of `p` equal-size blocks covering `0..n`, each
/// exactly once. There are `n! / (s!)^p` of them.
pub fn enumerate_orders(n: usize, p: usize) -> Result<Vec<UpdateOrder>> {
    let s = check_enumeration(n, p)?;
    let mut out = Vec::new();
    let mut remaining: Vec<usize> = (0..n).collect();
    let mut prefix = Vec::with_capacity(p);
    ordered_rec(&mut remaining, s, &mut prefix, &mut out);
    Ok(out)
}

fn ordered_rec(
    remaining: &mut Vec<usize>,
    s: usize,
    prefix: &mut Vec<Vec<usize>>,
    out: &mut Vec<UpdateOrder>,
) {
    if remaining.is_empty() {
        out.push(UpdateOrder {
            ordered_groups: prefix.clone(),
        });
        return;
    }
    for combo in combinations(remaining, s) {
        let rest: Vec<usize> = remaining.iter().copied().filter(|i| !combo.contains(i)).collect();
        let saved = std::mem::replace(remaining, rest);
        prefix.push(combo);
        ordered_rec(remaining, s, prefix, out);
        prefix.pop();
        *remaining = saved;
    }
}

/// Every unordered partition of `0..n` into `p` equal-size blocks. There are
/// `n! / (p! (s!)^p)` of them.
pub fn enumerate_partitions(n: usize, p: usize) -> Result<Vec<BlockPartition>> {
    let s = check_enumeration(n, p)?;
    let mut out = Vec::new();
    let remaining: Vec<usize> = (0..n).collect();
    let mut prefix = Vec::with_capacity(p);
    unordered_rec(&remaining, s, &mut prefix, &mut out);
    Ok(out)
}

fn unordered_rec(
    remaining: &[usize],
    s: usize,
    prefix: &mut Vec<Vec<usize>>,
    out: &mut Vec<BlockPartition>,
) {
    let Some((&first, rest)) = remaining.split_first() else {
        out.push(BlockPartition {
            groups: prefix.clone(),
            block_size: s,
        });
        return;
    };
    // The smallest remaining index anchors the next block, so each
    // partition is produced once.
    for tail in combinations(rest, s - 1) {
        let mut group = Vec::with_capacity(s);
        group.push(first);
        group.extend_from_slice(&tail);
        let left: Vec<usize> = rest.iter().copied().filter(|i| !tail.contains(i)).collect();
        prefix.push(group);
        unordered_rec(&left, s, prefix, out);
        prefix.pop();
    }
}

/// All `p!` orders of one partition's groups.
pub fn orders_of(partition: &BlockPartition) -> Vec<UpdateOrder> {
    let mut out = Vec::new();
    let mut groups = partition.groups.clone();
    permute_rec(&mut groups, 0, &mut out);
    out
}

fn permute_rec(groups: &mut Vec<Vec<usize>>, k: usize, out: &mut Vec<UpdateOrder>) {
    if k == groups.len() {
        out.push(UpdateOrder {
            ordered_groups: groups.clone(),
        });
        return;
    }
    for i in k..groups.len() {
        groups.swap(k, i);
        permute_rec(groups, k + 1, out);
        groups.swap(k, i);
    }
}

/// k-subsets of `items` in lexicographic position order.
fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    comb_rec(items, k, 0, &mut pick, &mut out);
    out
}

fn comb_rec(items: &[usize], k: usize, start: usize, pick: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if pick.len() == k {
        out.push(pick.clone());
        return;
    }
    let need = k - pick.len();
    for i in start..=items.len().saturating_sub(need) {
        if i >= items.len() {
            break;
        }
        pick.push(items[i]);
        comb_rec(items, k, i + 1, pick, out);
        pick.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn factorial(n: usize) -> usize {
        (1..=n).product()
    }

    #[test]
    fn consecutive_chunks() {
        let p = make_partition(4, 2, 0, false).unwrap();
        assert_eq!(p.groups(), &[vec![0, 1], vec![2, 3]]);
        let p = make_partition(5, 2, 0, false).unwrap();
        assert_eq!(p.groups(), &[vec![0, 1], vec![2, 3], vec![4]]);
    }

    #[test]
    fn randomized_partition_is_seed_deterministic() {
        let a = make_partition(4, 2, 42, true).unwrap();
        let b = make_partition(4, 2, 42, true).unwrap();
        assert_eq!(a, b);
        let many: HashSet<_> = (0..50)
            .map(|seed| make_partition(8, 2, seed, true).unwrap().groups().to_vec())
            .collect();
        assert!(many.len() > 1);
    }

    #[test]
    fn rejects_bad_block_size() {
        assert!(matches!(make_partition(3, 0, 0, false), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_partition(3, 4, 0, false), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn order_counts_match_enumeration() {
        assert_eq!(enumerate_orders(4, 2).unwrap().len(), 6);
        assert_eq!(enumerate_orders(2, 2).unwrap().len(), 2);
        assert_eq!(enumerate_orders(2, 1).unwrap().len(), 1);
        assert!(matches!(enumerate_orders(5, 2), Err(Error::InvalidArgument(_))));
        assert!(matches!(enumerate_orders(12, 2), Err(Error::Capacity(_))));
    }

    #[test]
    fn counting_formulas_hold() {
        for (n, p) in [(2, 1), (2, 2), (4, 1), (4, 2), (4, 4), (6, 2), (6, 3), (6, 6), (8, 2), (8, 4)] {
            let s = n / p;
            let orders = enumerate_orders(n, p).unwrap();
            let expected_orders = factorial(n) / factorial(s).pow(p as u32);
            assert_eq!(orders.len(), expected_orders, "orders n={n} p={p}");
            let distinct: HashSet<_> = orders.iter().cloned().collect();
            assert_eq!(distinct.len(), expected_orders);
            for o in &orders {
                assert!(UpdateOrder::new(n, o.groups().to_vec()).is_ok());
            }

            let keys: HashSet<_> = orders.iter().map(UpdateOrder::partition_key).collect();
            let expected_parts = expected_orders / factorial(p);
            assert_eq!(keys.len(), expected_parts, "partitions n={n} p={p}");
            let parts = enumerate_partitions(n, p).unwrap();
            assert_eq!(parts.len(), expected_parts);
            let part_keys: HashSet<_> = parts.iter().map(|q| q.in_order().partition_key()).collect();
            assert_eq!(part_keys, keys);
            assert_eq!(orders_of(&parts[0]).len(), factorial(p));
        }
    }

    #[test]
    fn from_groups_checks_cover() {
        assert!(BlockPartition::from_groups(3, vec![vec![0], vec![1, 2]]).is_ok());
        assert!(BlockPartition::from_groups(3, vec![vec![0], vec![1]]).is_err());
        assert!(BlockPartition::from_groups(3, vec![vec![0, 1], vec![1, 2]]).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_disjoint_cover(n in 1usize..200, s_frac in 0.0f64..1.0, seed: u64, randomize: bool) {
            let s = 1 + ((n - 1) as f64 * s_frac) as usize;
            let p = make_partition(n, s, seed, randomize).unwrap();
            prop_assert!(BlockPartition::from_groups(n, p.groups().to_vec()).is_ok());
            let k = p.num_blocks();
            for (i, g) in p.groups().iter().enumerate() {
                if i + 1 < k || n % s == 0 {
                    prop_assert_eq!(g.len(), s);
                } else {
                    prop_assert_eq!(g.len(), n % s);
                }
            }
        }
    }
}
