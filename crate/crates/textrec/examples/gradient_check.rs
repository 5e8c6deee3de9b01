//! Check the hand-written backward pass against central finite differences
//! on a random network with mixed activations.
//!
//! ```text
//! cargo run --release --example gradient_check
//! ```

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use textrec::net::{Activation, Network};

fn main() {
    let dims = [6, 8, 4, 2];
    let activations = [Activation::Relu, Activation::Tanh, Activation::Identity];
    let net = Network::init(&dims, &activations, 42).expect("valid shape");
    let mut rng = StdRng::seed_from_u64(7);
    let input: Vec<f64> = (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect();
    let upstream: Vec<f64> = (0..dims[dims.len() - 1])
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();

    let objective = |net: &Network| -> f64 {
        net.forward(&input)
            .iter()
            .zip(&upstream)
            .map(|(o, u)| o * u)
            .sum()
    };

    let (analytic, _) = net.backward(&input, &upstream);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for l in 0..net.layers.len() {
        for o in 0..net.layers[l].weights.len() {
            for i in 0..net.layers[l].weights[o].len() {
                let mut plus = net.clone();
                plus.layers[l].weights[o][i] += eps;
                let mut minus = net.clone();
                minus.layers[l].weights[o][i] -= eps;
                let numeric = (objective(&plus) - objective(&minus)) / (2.0 * eps);
                let a = analytic.layers[l].0[o][i];
                let rel = (numeric - a).abs() / numeric.abs().max(a.abs()).max(1e-8);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }

    println!("network {dims:?} with activations {activations:?}");
    println!("checked {checked} weight gradients against central differences (eps = {eps})");
    println!("worst relative error: {worst:.3e}");
    assert!(worst < 1e-4, "gradients disagree with finite differences");
    println!("analytic backward pass agrees.");
}
