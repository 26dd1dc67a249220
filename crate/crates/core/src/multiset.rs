//! Ranking of sorted index tuples (multisets) for canonical symmetric storage.
//!
//! A symmetric order-`L` array over `D` features is stored as one value per
//! non-decreasing tuple `(i1 <= i2 <= ... <= iL)`, enumerated in
//! lexicographic order. There are `C(D+L-1, L)` such tuples.

/// Binomial coefficient `C(n, k)`, zero when `k > n`.
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Number of non-decreasing tuples of length `order` over `dim` symbols.
pub fn canonical_len(dim: usize, order: usize) -> usize {
    if dim == 0 {
        return usize::from(order == 0);
    }
    binomial(dim + order - 1, order)
}

/// Number of non-decreasing tuples of length `len` whose entries lie in `start..dim`.
fn count_from(dim: usize, start: usize, len: usize) -> usize {
    if len == 0 {
        return 1;
    }
    if start >= dim {
        return 0;
    }
    canonical_len(dim - start, len)
}

/// Lexicographic rank of a sorted tuple. The caller guarantees sortedness
/// and that every entry is `< dim`.
pub fn rank_sorted(sorted: &[usize], dim: usize) -> usize {
    let len = sorted.len();
    let mut rank = 0;
    let mut lo = 0;
    for (pos, &v) in sorted.iter().enumerate() {
        let rest = len - pos - 1;
        for skipped in lo..v {
            rank += count_from(dim, skipped, rest);
        }
        lo = v;
    }
    rank
}

/// Rank of an arbitrary (unsorted) index tuple.
pub fn rank(indices: &[usize], dim: usize) -> usize {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    rank_sorted(&sorted, dim)
}

/// All non-decreasing tuples of length `order` over `dim`, in rank order.
pub fn enumerate(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(canonical_len(dim, order));
    let mut cur = Vec::with_capacity(order);
    fn rec(dim: usize, order: usize, lo: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == order {
            out.push(cur.clone());
            return;
        }
        for v in lo..dim {
            cur.push(v);
            rec(dim, order, v, cur, out);
            cur.pop();
        }
    }
    rec(dim, order, 0, &mut cur, &mut out);
    out
}

/// Number of distinct permutations of a sorted tuple (multinomial coefficient).
pub fn multiplicity(sorted: &[usize]) -> usize {
    let n = sorted.len();
    let mut denom: usize = 1;
    let mut run = 0;
    for i in 0..n {
        run += 1;
        if i + 1 == n || sorted[i + 1] != sorted[i] {
            denom *= factorial(run);
            run = 0;
        }
    }
    factorial(n) / denom
}

pub fn factorial(n: usize) -> usize {
    (1..=n).product()
}

/// All ordered tuples of length `order` over `dim` (row-major, last index fastest).
pub fn ordered_tuples(dim: usize, order: usize) -> Vec<Vec<usize>> {
    let total = dim.pow(order as u32);
    (0..total)
        .map(|mut flat| {
            let mut t = vec![0; order];
            for slot in t.iter_mut().rev() {
                *slot = flat % dim;
                flat /= dim;
            }
            t
        })
        .collect()
}

/// Row-major flat position of an ordered tuple.
pub fn flat_index(tuple: &[usize], dim: usize) -> usize {
    tuple.iter().fold(0, |acc, &i| acc * dim + i)
}

/// Index tuples that differ from `sorted` by the insertion of one `extra` index,
/// returned sorted.
pub fn insert_sorted(sorted: &[usize], extra: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(sorted.len() + 1);
    let pos = sorted.partition_point(|&v| v <= extra);
    out.extend_from_slice(&sorted[..pos]);
    out.push(extra);
    out.extend_from_slice(&sorted[pos..]);
    out
}

/// Removes one occurrence of `idx` from a sorted tuple, if present.
pub fn remove_one(sorted: &[usize], idx: usize) -> Option<Vec<usize>> {
    let pos = sorted.iter().position(|&v| v == idx)?;
    let mut out = sorted.to_vec();
    out.remove(pos);
    Some(out)
}

/// Multiplicity of `idx` in a tuple.
pub fn count_of(tuple: &[usize], idx: usize) -> usize {
    tuple.iter().filter(|&&v| v == idx).count()
}

/// Canonical index for all multisets of size `0..=max_order` laid out order by
/// order (order 0 first). Used for derivative tables.
#[derive(Debug, Clone)]
pub struct GradedIndex {
    dim: usize,
    offsets: Vec<usize>,
}

impl GradedIndex {
    pub fn new(dim: usize, max_order: usize) -> Self {
        let mut offsets = Vec::with_capacity(max_order + 2);
        let mut acc = 0;
        for k in 0..=max_order {
            offsets.push(acc);
            acc += canonical_len(dim, k);
        }
        offsets.push(acc);
        Self { dim, offsets }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_order(&self) -> usize {
        self.offsets.len() - 2
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of a sorted multiset.
    pub fn position(&self, sorted: &[usize]) -> usize {
        self.offsets[sorted.len()] + rank_sorted(sorted, self.dim)
    }

    /// All multisets in layout order.
    pub fn multisets(&self) -> Vec<Vec<usize>> {
        (0..=self.max_order())
            .flat_map(|k| enumerate(self.dim, k))
            .collect()
    }
}
