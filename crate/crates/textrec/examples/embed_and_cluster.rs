//! Embed items and users from text, then cluster the users.
//!
//! Builds a toy corpus of two taste groups (speaker lovers and headphone
//! lovers), maps every item into feature space by averaging word vectors over
//! its description and reviews, averages positive items into user vectors,
//! and shows that k-means recovers the two groups.
//!
//! ```text
//! cargo run --release --example embed_and_cluster
//! ```

use textrec::cluster::kmeans;
use textrec::corpus::{EmbeddingTable, StopwordSet};
use textrec::embedding::{embed_item, embed_user, tokenize};

fn main() {
    // four-dimensional word vectors: bass/loud live on the first two
    // dimensions, crisp/light on the last two
    let mut words = EmbeddingTable::new(4);
    words.insert("bass", vec![1.0, 0.6, 0.0, 0.0]);
    words.insert("loud", vec![0.7, 1.0, 0.1, 0.0]);
    words.insert("deep", vec![0.9, 0.8, 0.0, 0.1]);
    words.insert("crisp", vec![0.0, 0.1, 1.0, 0.7]);
    words.insert("light", vec![0.1, 0.0, 0.8, 1.0]);
    words.insert("airy", vec![0.0, 0.0, 0.9, 0.9]);

    let stopwords = StopwordSet::from_words(["the", "and", "a"]);

    let catalog = [
        ("subwoofer", "The deep bass and loud punch", "loud bass, deep!"),
        ("floorstander", "Loud bass and a deep stage", "deep and loud"),
        ("earbuds", "Crisp light sound", "airy and crisp"),
        ("planars", "The airy light and crisp detail", "light, crisp"),
    ];

    println!("item vectors (description mean + review mean):");
    let mut item_vectors = Vec::new();
    for (id, description, review) in catalog {
        let item = embed_item(
            id,
            &tokenize(description, &stopwords),
            &tokenize(review, &stopwords),
            &words,
        );
        println!("  {id:<14} {:?}", rounded(&item.vec));
        item_vectors.push((id, item.vec));
    }

    // two bass fans, two treble fans: user vector = mean of liked items
    let likes = [
        ("ursula", vec!["subwoofer", "floorstander"]),
        ("ulrich", vec!["subwoofer"]),
        ("uma", vec!["earbuds", "planars"]),
        ("umberto", vec!["planars"]),
    ];
    println!("\nuser vectors (mean of liked item vectors):");
    let mut user_vectors = Vec::new();
    for (user, liked) in likes {
        let liked_vecs: Vec<&[f64]> = item_vectors
            .iter()
            .filter(|(id, _)| liked.contains(id))
            .map(|(_, v)| v.as_slice())
            .collect();
        let vec = embed_user(&liked_vecs, 4);
        println!("  {user:<14} {:?}", rounded(&vec));
        user_vectors.push((user.to_string(), vec));
    }

    let model = kmeans(&user_vectors, 2, 7).expect("two clusters fit four users");
    println!("\nk-means assignment (2 clusters):");
    for (user, cluster) in &model.assignment {
        println!("  {user:<14} cluster {cluster}");
    }
    println!(
        "farthest-cluster map (source of supplemented negatives): {:?}",
        model.farthest
    );
}

fn rounded(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 100.0).round() / 100.0).collect()
}
