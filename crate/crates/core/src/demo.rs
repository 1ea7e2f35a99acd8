//! Small hand-checked datasets with three neurons (R1, R2, R3) over six
//! inputs (x0..x5), used by examples, tests and the service demo.

use crate::source::{ActivationMatrix, LayerId};

/// Six inputs, three neurons, meant for a 3-partition index.
///
/// Querying `x5` for its two nearest neighbours under l1 visits two rounds:
/// the threshold is 0.2 after the first and 1.7 after the second, and `x0`
/// is never inferred.
///
/// ```text
///       R1   R2   R3
/// x0   2.5  2.0  3.0
/// x1   1.6  0.9  2.4
/// x2   1.5  0.1  1.3
/// x3   2.2  1.8  2.6
/// x4   1.2  1.1  1.4
/// x5   1.1  1.1  1.2
/// ```
pub fn partition_example() -> ActivationMatrix {
    ActivationMatrix::from_rows(
        LayerId(0),
        &[
            vec![2.5, 2.0, 3.0],
            vec![1.6, 0.9, 2.4],
            vec![1.5, 0.1, 1.3],
            vec![2.2, 1.8, 2.6],
            vec![1.2, 1.1, 1.4],
            vec![1.1, 1.1, 1.2],
        ],
    )
    .expect("static dataset is well formed")
}

/// Six inputs, three neurons, meant for a maximum-activation index with
/// ratio 0.6 (four entries per neuron). `x0` is among the top four of R1 and
/// R2 but not of R3; its nearest neighbour is `x1`.
///
/// ```text
///       R1   R2   R3
/// x0   3.0  2.5  1.0
/// x1   2.8  2.4  1.0
/// x2   2.0  0.6  2.9
/// x3   1.5  2.0  2.5
/// x4   1.0  1.8  2.2
/// x5   0.5  0.2  1.9
/// ```
pub fn mai_example() -> ActivationMatrix {
    ActivationMatrix::from_rows(
        LayerId(0),
        &[
            vec![3.0, 2.5, 1.0],
            vec![2.8, 2.4, 1.0],
            vec![2.0, 0.6, 2.9],
            vec![1.5, 2.0, 2.5],
            vec![1.0, 1.8, 2.2],
            vec![0.5, 0.2, 1.9],
        ],
    )
    .expect("static dataset is well formed")
}
