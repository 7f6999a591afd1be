//! Scores a predicted partition against the truth, noise included.

use deinterleave::metrics::{expected_mutual_information, score};
use deinterleave::pdw::{Partition, NOISE};

fn main() -> deinterleave::Result<()> {
    let truth = Partition::from_label_slice(&[0, 0, 0, 1, 1, 1, 2, 2]);
    let pred = Partition::from_label_slice(&[4, 4, 4, 7, 7, NOISE, 9, 9]);
    let s = score(&pred, &truth)?;
    println!(
        "AMI {:.4}  ARI {:.4}  V {:.4}  h {:.4}  c {:.4}",
        s.ami, s.ari, s.v_measure, s.homogeneity, s.completeness
    );

    // The chance term AMI subtracts, from the block sizes alone.
    let emi = expected_mutual_information(&pred.block_sizes(), &truth.block_sizes(), 8);
    println!(
        "noise point scored as a singleton: {} blocks; EMI {:.4} nats",
        pred.n_blocks(),
        emi
    );
    Ok(())
}
