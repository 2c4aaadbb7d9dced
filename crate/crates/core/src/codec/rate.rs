//! Dimension bank, Gaussian rate proxy and greedy per-block rate allocation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::CodecError;

pub const BANK_SIZE: usize = 16;

/// The 16 selectable per-block output sizes, in real coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionBank {
    dims: [usize; BANK_SIZE],
}

impl Default for DimensionBank {
    /// Geometric ladder `4·32^(j/15)` snapped to even values and forced
    /// strictly increasing: 4, 6, 8, …, 102, 128.
    fn default() -> Self {
        let mut dims = [0usize; BANK_SIZE];
        for (j, d) in dims.iter_mut().enumerate() {
            let v = 4.0 * 32f64.powf(j as f64 / 15.0);
            *d = 2 * (v / 2.0).round() as usize;
        }
        for j in 1..BANK_SIZE {
            if dims[j] <= dims[j - 1] {
                dims[j] = dims[j - 1] + 2;
            }
        }
        Self { dims }
    }
}

impl DimensionBank {
    pub fn new(dims: [usize; BANK_SIZE]) -> Result<Self, CodecError> {
        if dims[0] != 4 || dims[BANK_SIZE - 1] != 128 {
            return Err(CodecError::Bank("bank must run from 4 to 128".into()));
        }
        if dims.iter().any(|d| d % 2 != 0) {
            return Err(CodecError::Bank("bank dimensions must be even".into()));
        }
        if dims.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CodecError::Bank("bank must be strictly increasing".into()));
        }
        Ok(Self { dims })
    }

    pub fn dims(&self) -> &[usize; BANK_SIZE] {
        &self.dims
    }

    pub fn min_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn index_of(&self, dim: usize) -> Option<usize> {
        self.dims.iter().position(|d| *d == dim)
    }

    /// Identifier used in the payload header: 0 for the default ladder.
    pub fn id(&self) -> u8 {
        if *self == Self::default() {
            0
        } else {
            255
        }
    }
}

/// Gaussian rate proxy `Σ max(0, ½·log₂(1 + c²/q²))`, in bits.
pub fn estimate_entropy(coeffs: &[f64], q: f64) -> f64 {
    assert!(q > 0.0, "quantization scale must be positive");
    coeffs
        .iter()
        .map(|c| (0.5 * (1.0 + c * c / (q * q)).log2()).max(0.0))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockAllocation {
    pub block_index: usize,
    /// Real coefficients carried, a bank member.
    pub selected_dim: usize,
    /// Prior variance for each distinct kept coefficient, zig-zag order.
    pub coeff_variances: Vec<f64>,
}

impl BlockAllocation {
    pub fn symbols(&self) -> usize {
        self.selected_dim / 2
    }
}

#[derive(Debug, PartialEq)]
struct Upgrade {
    priority: f64,
    block: usize,
}

impl Eq for Upgrade {}

impl Ord for Upgrade {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.block.cmp(&self.block))
    }
}

impl PartialOrd for Upgrade {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Greedy per-block dimension selection under a budget of `budget_k` complex
/// symbols.
///
/// Blocks with zero occupancy are not transmitted and get no allocation.
/// Every other block starts at the smallest bank entry; then the block with
/// the largest `entropy × occupancy` per added symbol is moved to its next
/// bank entry, lower block index first on ties, until nothing fits or every
/// block sits at its cap. `max_dim` caps the bank for the block size.
/// Returned allocations carry empty `coeff_variances`.
pub fn allocate_rate(
    entropies: &[f64],
    occupancies: &[f64],
    bank: &DimensionBank,
    budget_k: usize,
    max_dim: usize,
) -> Result<Vec<BlockAllocation>, CodecError> {
    if entropies.len() != occupancies.len() {
        return Err(CodecError::LengthMismatch {
            expected: entropies.len(),
            found: occupancies.len(),
        });
    }
    let dims = bank.dims();
    let top = dims
        .iter()
        .rposition(|d| *d <= max_dim)
        .ok_or(CodecError::BlockTooSmall {
            max_dim,
            min_dim: dims[0],
        })?;
    let active: Vec<usize> = (0..entropies.len())
        .filter(|&i| occupancies[i] > 0.0)
        .collect();
    let floor = active.len() * dims[0] / 2;
    if budget_k < floor {
        return Err(CodecError::BudgetInfeasible {
            budget: budget_k,
            floor,
        });
    }
    let mut level = vec![0usize; entropies.len()];
    let mut remaining = budget_k - floor;
    let weight = |i: usize| (entropies[i] * occupancies[i]).max(0.0);
    let step = |j: usize| (dims[j + 1] - dims[j]) / 2;
    let mut heap: BinaryHeap<Upgrade> = active
        .iter()
        .filter(|_| top > 0)
        .map(|&i| Upgrade {
            priority: weight(i) / step(0) as f64,
            block: i,
        })
        .collect();
    while let Some(Upgrade { block, .. }) = heap.pop() {
        let cost = step(level[block]);
        if cost > remaining {
            // Later steps only grow and the budget only shrinks.
            continue;
        }
        remaining -= cost;
        level[block] += 1;
        if level[block] < top {
            heap.push(Upgrade {
                priority: weight(block) / step(level[block]) as f64,
                block,
            });
        }
    }
    Ok(active
        .into_iter()
        .map(|i| BlockAllocation {
            block_index: i,
            selected_dim: dims[level[i]],
            coeff_variances: Vec::new(),
        })
        .collect())
}
