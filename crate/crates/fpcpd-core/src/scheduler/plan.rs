use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One training point `(i, j, k)` of the tensor index grid, 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

/// An ordered set of mutually interchangeable entries: within a block all
/// `i` differ, all `j` differ and all `k` differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub entries: Vec<Entry>,
}

impl Block {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Partition of the full index grid `{0..I} x {0..J} x {0..K}` into `d`
/// independent blocks of `p = min(I, J, K)` interchangeable entries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockPlan {
    pub dims: (usize, usize, usize),
    /// Entries per block.
    pub p: usize,
    /// Number of blocks, `I*J*K / p`.
    pub d: usize,
    pub blocks: Vec<Block>,
}

/// Build the block partition for the given dimensions.
///
/// The construction is a generalized diagonal: with `p = min(I, J, K)`
/// taken along its own mode, the block with offsets `(a, b)` wraps the two
/// remaining modes around their index ranges. For `I` minimal the block
/// `(a, b)` is `{(s, (s+a) mod J, (s+b) mod K) : s in 0..I}` with
/// `a in 0..J, b in 0..K`, and analogously when `J` or `K` is minimal.
/// Every entry `(i, j, k)` lands in exactly one block, every block holds
/// exactly `p` entries, and `d = I*J*K / p` (`p` divides the product since
/// it is one of the dimensions). Block and entry order are deterministic:
/// blocks are enumerated lexicographically in `(a, b)`, entries by `s`.
pub fn build_plan(dims: (usize, usize, usize)) -> Result<BlockPlan> {
    let (i_dim, j_dim, k_dim) = dims;
    if i_dim == 0 || j_dim == 0 || k_dim == 0 {
        return Err(Error::InvalidDimensions(format!(
            "dims must be positive, got {dims:?}"
        )));
    }
    let p = i_dim.min(j_dim).min(k_dim);
    let d = i_dim * j_dim * k_dim / p;
    let mut blocks = Vec::with_capacity(d);

    if p == i_dim {
        for a in 0..j_dim {
            for b in 0..k_dim {
                let entries = (0..p)
                    .map(|s| Entry {
                        i: s,
                        j: (s + a) % j_dim,
                        k: (s + b) % k_dim,
                    })
                    .collect();
                blocks.push(Block { entries });
            }
        }
    } else if p == j_dim {
        for a in 0..i_dim {
            for b in 0..k_dim {
                let entries = (0..p)
                    .map(|s| Entry {
                        i: (s + a) % i_dim,
                        j: s,
                        k: (s + b) % k_dim,
                    })
                    .collect();
                blocks.push(Block { entries });
            }
        }
    } else {
        for a in 0..i_dim {
            for b in 0..j_dim {
                let entries = (0..p)
                    .map(|s| Entry {
                        i: (s + a) % i_dim,
                        j: (s + b) % j_dim,
                        k: s,
                    })
                    .collect();
                blocks.push(Block { entries });
            }
        }
    }

    debug_assert_eq!(blocks.len(), d);
    Ok(BlockPlan { dims, p, d, blocks })
}

/// Check that `plan` covers the full index grid for `dims` exactly once
/// and that every block is pairwise interchangeable.
pub fn verify_plan(plan: &BlockPlan, dims: (usize, usize, usize)) -> bool {
    let (i_dim, j_dim, k_dim) = dims;
    if i_dim == 0 || j_dim == 0 || k_dim == 0 {
        return false;
    }
    let total = i_dim * j_dim * k_dim;
    let mut seen = vec![false; total];
    let mut covered = 0usize;

    // Per-mode markers reset between blocks; a repeated index within a
    // block violates interchangeability.
    let mut mark_i = vec![usize::MAX; i_dim];
    let mut mark_j = vec![usize::MAX; j_dim];
    let mut mark_k = vec![usize::MAX; k_dim];

    for (b_idx, block) in plan.blocks.iter().enumerate() {
        for e in &block.entries {
            if e.i >= i_dim || e.j >= j_dim || e.k >= k_dim {
                return false;
            }
            if mark_i[e.i] == b_idx || mark_j[e.j] == b_idx || mark_k[e.k] == b_idx {
                return false;
            }
            mark_i[e.i] = b_idx;
            mark_j[e.j] = b_idx;
            mark_k[e.k] = b_idx;
            let off = e.i + i_dim * (e.j + j_dim * e.k);
            if seen[off] {
                return false;
            }
            seen[off] = true;
            covered += 1;
        }
    }
    covered == total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_3_has_nine_blocks_of_three() {
        let plan = build_plan((3, 3, 3)).unwrap();
        assert_eq!(plan.d, 9);
        assert_eq!(plan.p, 3);
        assert_eq!(plan.blocks.len(), 9);
        assert!(plan.blocks.iter().all(|b| b.len() == 3));
        assert!(verify_plan(&plan, (3, 3, 3)));
        // Diagonal construction: block (a, b) holds (s, (s+a)%3, (s+b)%3).
        assert_eq!(
            plan.blocks[0].entries,
            vec![
                Entry { i: 0, j: 0, k: 0 },
                Entry { i: 1, j: 1, k: 1 },
                Entry { i: 2, j: 2, k: 2 },
            ]
        );
    }

    #[test]
    fn single_entry_tensor() {
        let plan = build_plan((1, 1, 1)).unwrap();
        assert_eq!(plan.d, 1);
        assert_eq!(plan.p, 1);
        assert_eq!(plan.blocks[0].entries, vec![Entry { i: 0, j: 0, k: 0 }]);
        assert!(verify_plan(&plan, (1, 1, 1)));
    }

    #[test]
    fn non_cubic_2_3_4() {
        let plan = build_plan((2, 3, 4)).unwrap();
        assert_eq!(plan.p, 2);
        assert_eq!(plan.d, 12);
        let total: usize = plan.blocks.iter().map(Block::len).sum();
        assert_eq!(total, 24);
        for block in &plan.blocks {
            assert_eq!(block.len(), 2);
            let [x1, x2] = block.entries[..] else {
                unreachable!()
            };
            assert_ne!(x1.i, x2.i);
            assert_ne!(x1.j, x2.j);
            assert_ne!(x1.k, x2.k);
        }
        assert!(verify_plan(&plan, (2, 3, 4)));
    }

    #[test]
    fn rejects_zero_dims() {
        assert!(build_plan((0, 2, 2)).is_err());
        assert!(build_plan((2, 0, 2)).is_err());
        assert!(build_plan((2, 2, 0)).is_err());
    }

    #[test]
    fn verify_detects_violations() {
        let plan = build_plan((3, 3, 3)).unwrap();
        assert!(verify_plan(&plan, (3, 3, 3)));

        // Shared j within one block violates interchangeability.
        let mut bad = plan.clone();
        bad.blocks[0].entries[1].j = bad.blocks[0].entries[0].j;
        assert!(!verify_plan(&bad, (3, 3, 3)));

        // Missing entry violates the cover.
        let mut short = plan.clone();
        short.blocks[0].entries.pop();
        assert!(!verify_plan(&short, (3, 3, 3)));

        // Wrong dims.
        assert!(!verify_plan(&plan, (3, 3, 4)));
    }

    #[test]
    fn exhaustive_small_grid() {
        for i in 1..=4 {
            for j in 1..=4 {
                for k in 1..=4 {
                    let plan = build_plan((i, j, k)).unwrap();
                    assert!(verify_plan(&plan, (i, j, k)), "failed for ({i},{j},{k})");
                    assert_eq!(plan.p, i.min(j).min(k));
                    assert_eq!(plan.d, i * j * k / plan.p);
                }
            }
        }
    }

    #[test]
    fn cubic_dims_give_n_squared_blocks() {
        for n in 1..=6 {
            let plan = build_plan((n, n, n)).unwrap();
            assert_eq!(plan.d, n * n);
            assert_eq!(plan.p, n);
        }
    }
}
