//! Conditional entropy of hand-made symbol streams, checked against the
//! analytic entropy rate of the Markov chain that generates them.
//!
//! Run with `cargo run --example complexity_profile`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use songplexity::infotheory::{conditional_entropy, sequence_complexity, TransitionModel};
use songplexity::synth::{analytic_conditional_entropy, sample_markov};

fn main() -> songplexity::Result<()> {
    println!("constant stream: {:?} bits", sequence_complexity(&[7; 50]));
    println!("alternating stream: {:?} bits", sequence_complexity(&[1, 2, 1, 2, 1, 2, 1, 2]));

    let matrix = vec![vec![0.8, 0.2, 0.0], vec![0.1, 0.6, 0.3], vec![0.5, 0.0, 0.5]];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let states = sample_markov(&mut rng, &matrix, 200_000)?;
    let symbols: Vec<u32> = states.into_iter().map(|s| s as u32).collect();
    let model = TransitionModel::from_symbols(&symbols)?;
    println!(
        "markov stream: measured {:.4} bits, analytic {:.4} bits",
        conditional_entropy(&model)?,
        analytic_conditional_entropy(&matrix)?
    );
    Ok(())
}
