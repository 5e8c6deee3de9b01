//! K-means user clustering, the farthest-cluster map, and the supplemented
//! negative pool drawn from the farthest cluster's positive items.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::embedding::UserProfile;
use crate::error::{Error, Result};
use crate::linalg::dist_sq;

const CONVERGENCE_SHIFT: f64 = 1e-6;
const MAX_ITERATIONS: usize = 100;

/// The fitted clustering: centroids, user assignment, each cluster's pooled
/// positive items and the farthest-centroid map.
#[derive(Debug, Clone)]
pub struct ClusterModel {
    pub n_cl: usize,
    pub centroids: Vec<Vec<f64>>,
    pub assignment: BTreeMap<String, usize>,
    pub cluster_positive_items: Vec<BTreeSet<String>>,
    pub farthest: BTreeMap<usize, usize>,
}

impl ClusterModel {
    pub fn cluster_of(&self, user_id: &str) -> Option<usize> {
        self.assignment.get(user_id).copied()
    }

    /// Users assigned to `cluster`, in sorted id order.
    pub fn members(&self, cluster: usize) -> Vec<&String> {
        self.assignment
            .iter()
            .filter(|(_, &c)| c == cluster)
            .map(|(u, _)| u)
            .collect()
    }

    /// Pool the positive items of each cluster's members. Users with empty
    /// positive sets contribute nothing but keep their assignment.
    pub fn fill_positive_items(&mut self, profiles: &[UserProfile]) {
        let mut pools = vec![BTreeSet::new(); self.n_cl];
        for p in profiles {
            if let Some(c) = self.cluster_of(&p.user_id) {
                pools[c].extend(p.positives.iter().cloned());
            }
        }
        self.cluster_positive_items = pools;
    }
}

fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = dist_sq(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    (best, best_d)
}

/// k-means++ seeding: first centroid uniform, the rest weighted by squared
/// distance to the nearest chosen centroid. Degenerate inputs (all remaining
/// distances zero) fall back to the lowest-index unused point.
fn seed_centroids(points: &[Vec<f64>], n_cl: usize, rng: &mut StdRng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(n_cl);
    let mut chosen = vec![false; points.len()];
    let first = rng.random_range(0..points.len());
    centroids.push(points[first].clone());
    chosen[first] = true;

    let mut dist = vec![0.0f64; points.len()];
    while centroids.len() < n_cl {
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            dist[i] = nearest_centroid(p, &centroids).1;
            total += dist[i];
        }
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = points.len() - 1;
            for (i, &d) in dist.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            chosen.iter().position(|c| !c).unwrap_or(0)
        };
        chosen[pick] = true;
        centroids.push(points[pick].clone());
    }
    centroids
}

/// Lloyd's algorithm with k-means++ seeding. Converges when the maximum
/// centroid shift drops below 1e-6 or after 100 iterations. Empty clusters
/// are reseeded at the point farthest from its currently assigned centroid.
pub fn kmeans(
    user_vectors: &[(String, Vec<f64>)],
    n_cl: usize,
    seed: u64,
) -> Result<ClusterModel> {
    if n_cl == 0 {
        return Err(Error::Config("cluster count must be positive".into()));
    }
    if n_cl > user_vectors.len() {
        return Err(Error::TooManyClusters {
            requested: n_cl,
            available: user_vectors.len(),
        });
    }

    let points: Vec<Vec<f64>> = user_vectors.iter().map(|(_, v)| v.clone()).collect();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut centroids = seed_centroids(&points, n_cl, &mut rng);
    let mut assignment = vec![0usize; points.len()];
    let mut previous_inertia = f64::INFINITY;

    for _ in 0..MAX_ITERATIONS {
        let mut inertia = 0.0;
        for (i, p) in points.iter().enumerate() {
            let (c, d) = nearest_centroid(p, &centroids);
            assignment[i] = c;
            inertia += d;
        }
        debug_assert!(
            inertia <= previous_inertia * (1.0 + 1e-12) + 1e-9,
            "k-means inertia increased: {previous_inertia} -> {inertia}"
        );
        previous_inertia = inertia;

        let mut counts = vec![0usize; n_cl];
        for &c in &assignment {
            counts[c] += 1;
        }
        for (cluster, &count) in counts.iter().enumerate() {
            if count == 0 {
                // reseed at the point farthest from its own centroid
                let far = points
                    .iter()
                    .enumerate()
                    .max_by(|(ia, a), (ib, b)| {
                        let da = dist_sq(a, &centroids[assignment[*ia]]);
                        let db = dist_sq(b, &centroids[assignment[*ib]]);
                        da.partial_cmp(&db)
                            .unwrap()
                            .then_with(|| ib.cmp(ia)) // tie -> lowest index
                    })
                    .map(|(i, _)| i)
                    .expect("nonempty points");
                centroids[cluster] = points[far].clone();
            }
        }

        let dim = points[0].len();
        let mut sums = vec![vec![0.0; dim]; n_cl];
        let mut counts = vec![0usize; n_cl];
        for (i, p) in points.iter().enumerate() {
            let (c, _) = nearest_centroid(p, &centroids);
            assignment[i] = c;
            counts[c] += 1;
            for (s, x) in sums[c].iter_mut().zip(p) {
                *s += x;
            }
        }
        let mut max_shift = 0.0f64;
        for c in 0..n_cl {
            if counts[c] == 0 {
                continue;
            }
            for s in &mut sums[c] {
                *s /= counts[c] as f64;
            }
            max_shift = max_shift.max(dist_sq(&sums[c], &centroids[c]).sqrt());
            centroids[c] = std::mem::take(&mut sums[c]);
        }
        if max_shift < CONVERGENCE_SHIFT {
            break;
        }
    }

    // final assignment against the converged centroids
    let assignment: BTreeMap<String, usize> = user_vectors
        .iter()
        .map(|(id, v)| (id.clone(), nearest_centroid(v, &centroids).0))
        .collect();

    let mut model = ClusterModel {
        n_cl,
        centroids,
        assignment,
        cluster_positive_items: vec![BTreeSet::new(); n_cl],
        farthest: BTreeMap::new(),
    };
    compute_farthest(&mut model);
    Ok(model)
}

/// For each cluster, the index of the centroid at maximum Euclidean distance;
/// ties break toward the smaller index. A single-cluster model gets an empty
/// map and candidate generation falls back to the unrated-item pool.
pub fn compute_farthest(model: &mut ClusterModel) {
    model.farthest.clear();
    if model.n_cl < 2 {
        return;
    }
    for l in 0..model.n_cl {
        let mut best = None;
        let mut best_d = -1.0;
        for m in 0..model.n_cl {
            if m == l {
                continue;
            }
            let d = dist_sq(&model.centroids[l], &model.centroids[m]);
            if d > best_d {
                best_d = d;
                best = Some(m);
            }
        }
        model.farthest.insert(l, best.expect("n_cl >= 2"));
    }
}

/// Items presumed disliked by `profile`'s owner: the farthest cluster's
/// positive pool minus the user's own cluster positives and the user's
/// negatives. Empty when no farthest cluster exists.
pub fn supplement_pool(model: &ClusterModel, profile: &UserProfile) -> BTreeSet<String> {
    let Some(own) = model.cluster_of(&profile.user_id) else {
        return BTreeSet::new();
    };
    let Some(&far) = model.farthest.get(&own) else {
        return BTreeSet::new();
    };
    let far_pool = &model.cluster_positive_items[far];
    let own_pool = &model.cluster_positive_items[own];
    far_pool
        .iter()
        .filter(|item| !own_pool.contains(*item) && !profile.negatives.contains(*item))
        .cloned()
        .collect()
}

/// Persist centroids and assignment as text: a `clusters <n_cl> <dim>` header,
/// one centroid per line, then `user_id \t cluster` lines.
pub fn write_cluster_model(path: &Path, model: &ClusterModel) -> Result<()> {
    let dim = model.centroids.first().map(Vec::len).unwrap_or(0);
    let mut out = String::new();
    writeln!(out, "clusters {} {}", model.n_cl, dim).expect("write to string");
    for c in &model.centroids {
        for (i, x) in c.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            write!(out, "{x}").expect("write to string");
        }
        out.push('\n');
    }
    for (user, cluster) in &model.assignment {
        writeln!(out, "{user}\t{cluster}").expect("write to string");
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Load a model written by [`write_cluster_model`]. Positive-item pools are
/// refilled from profiles by the caller; the farthest map is recomputed.
pub fn read_cluster_model(path: &Path) -> Result<ClusterModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty cluster model"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 || parts[0] != "clusters" {
        return Err(Error::parse(path, 1, "expected `clusters <n_cl> <dim>`"));
    }
    let n_cl: usize = parts[1]
        .parse()
        .map_err(|_| Error::parse(path, 1, "bad cluster count"))?;
    let dim: usize = parts[2]
        .parse()
        .map_err(|_| Error::parse(path, 1, "bad dimension"))?;

    let mut centroids = Vec::with_capacity(n_cl);
    for _ in 0..n_cl {
        let (idx, line) = lines
            .next()
            .ok_or_else(|| Error::parse(path, 0, "truncated centroid block"))?;
        let c: Vec<f64> = line
            .split_whitespace()
            .map(|p| {
                p.parse()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad float `{p}`")))
            })
            .collect::<Result<_>>()?;
        if c.len() != dim {
            return Err(Error::parse(path, idx + 1, "centroid has wrong dimension"));
        }
        centroids.push(c);
    }

    let mut assignment = BTreeMap::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let (user, cluster) = line
            .split_once('\t')
            .ok_or_else(|| Error::parse(path, idx + 1, "expected `user\\tcluster`"))?;
        let cluster: usize = cluster
            .parse()
            .map_err(|_| Error::parse(path, idx + 1, "bad cluster index"))?;
        if cluster >= n_cl {
            return Err(Error::parse(path, idx + 1, "cluster index out of range"));
        }
        assignment.insert(user.to_owned(), cluster);
    }

    let mut model = ClusterModel {
        n_cl,
        centroids,
        assignment,
        cluster_positive_items: vec![BTreeSet::new(); n_cl],
        farthest: BTreeMap::new(),
    };
    compute_farthest(&mut model);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn named(points: &[Vec<f64>]) -> Vec<(String, Vec<f64>)> {
        points
            .iter()
            .enumerate()
            .map(|(i, p)| (format!("u{i}"), p.clone()))
            .collect()
    }

    /// Brute-force minimum-inertia bipartition, used as the oracle for the
    /// two-cluster example.
    fn best_bipartition_inertia(points: &[Vec<f64>]) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        for mask in 1..(1u32 << n) - 1 {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (i, p) in points.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    a.push(p);
                } else {
                    b.push(p);
                }
            }
            let inertia = |group: &[&Vec<f64>]| -> f64 {
                let dim = group[0].len();
                let mut mean = vec![0.0; dim];
                for p in group {
                    for (m, x) in mean.iter_mut().zip(*p) {
                        *m += x;
                    }
                }
                for m in &mut mean {
                    *m /= group.len() as f64;
                }
                group.iter().map(|p| dist_sq(p, &mean)).sum()
            };
            best = best.min(inertia(&a) + inertia(&b));
        }
        best
    }

    #[test]
    fn two_well_separated_clusters() {
        let points = vec![
            vec![0.0, 0.0],
            vec![0.1, 0.0],
            vec![10.0, 10.0],
            vec![10.0, 10.1],
        ];
        let oracle = best_bipartition_inertia(&points);
        let model = kmeans(&named(&points), 2, 7).unwrap();

        let c0 = model.assignment["u0"];
        assert_eq!(model.assignment["u1"], c0);
        let c2 = model.assignment["u2"];
        assert_eq!(model.assignment["u3"], c2);
        assert_ne!(c0, c2);

        let mut got: Vec<Vec<f64>> = model.centroids.clone();
        got.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((got[0][0] - 0.05).abs() < 1e-9 && got[0][1].abs() < 1e-9);
        assert!((got[1][0] - 10.0).abs() < 1e-9 && (got[1][1] - 10.05).abs() < 1e-9);

        let inertia: f64 = points
            .iter()
            .enumerate()
            .map(|(i, p)| dist_sq(p, &model.centroids[model.assignment[&format!("u{i}")]]))
            .sum();
        assert!((inertia - oracle).abs() < 1e-9);
    }

    #[test]
    fn one_cluster_per_point_has_zero_inertia() {
        let points = vec![vec![0.0], vec![1.0], vec![5.0]];
        let model = kmeans(&named(&points), 3, 3).unwrap();
        for (i, p) in points.iter().enumerate() {
            let c = model.assignment[&format!("u{i}")];
            assert!(dist_sq(p, &model.centroids[c]) < 1e-12);
        }
    }

    #[test]
    fn identical_points_resolve_deterministically() {
        let points = vec![vec![1.0, 1.0]; 4];
        let a = kmeans(&named(&points), 2, 11).unwrap();
        let b = kmeans(&named(&points), 2, 11).unwrap();
        assert_eq!(a.assignment, b.assignment);
        // all points land in a single nonempty cluster
        let first = a.assignment["u0"];
        assert!(a.assignment.values().all(|&c| c == first));
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            kmeans(&named(&points), 3, 0),
            Err(Error::TooManyClusters { .. })
        ));
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let points: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![(i % 7) as f64, (i % 3) as f64])
            .collect();
        let a = kmeans(&named(&points), 4, 99).unwrap();
        let b = kmeans(&named(&points), 4, 99).unwrap();
        assert_eq!(a.assignment, b.assignment);
        assert_eq!(a.centroids, b.centroids);
    }

    fn line_model(xs: &[f64]) -> ClusterModel {
        let mut m = ClusterModel {
            n_cl: xs.len(),
            centroids: xs.iter().map(|&x| vec![x]).collect(),
            assignment: BTreeMap::new(),
            cluster_positive_items: vec![BTreeSet::new(); xs.len()],
            farthest: BTreeMap::new(),
        };
        compute_farthest(&mut m);
        m
    }

    #[test]
    fn farthest_on_a_line() {
        // centroids at 0, 1, 5: farthest(0)=2, farthest(1)=2, farthest(2)=0
        let m = line_model(&[0.0, 1.0, 5.0]);
        assert_eq!(m.farthest[&0], 2);
        assert_eq!(m.farthest[&1], 2);
        assert_eq!(m.farthest[&2], 0);
    }

    #[test]
    fn farthest_two_clusters_and_tie_rule() {
        let m = line_model(&[0.0, 3.0]);
        assert_eq!(m.farthest[&0], 1);
        assert_eq!(m.farthest[&1], 0);

        // centroid 1 is equidistant from 0 and 2: smaller index wins
        let m = line_model(&[0.0, 1.0, 2.0]);
        assert_eq!(m.farthest[&1], 0);
    }

    #[test]
    fn farthest_single_cluster_is_empty() {
        let m = line_model(&[0.0]);
        assert!(m.farthest.is_empty());
    }

    fn profile_with(user: &str, negatives: &[&str]) -> UserProfile {
        UserProfile {
            user_id: user.into(),
            vec: vec![0.0],
            positives: BTreeSet::new(),
            negatives: negatives.iter().map(|s| (*s).to_owned()).collect(),
            positive_history: Vec::new(),
            ratings: BTreeMap::new(),
        }
    }

    #[test]
    fn supplement_pool_is_the_stated_set_difference() {
        let mut m = line_model(&[0.0, 9.0]);
        m.assignment.insert("u".into(), 0);
        m.cluster_positive_items[0] = ["b"].iter().map(|s| (*s).to_owned()).collect();
        m.cluster_positive_items[1] = ["a", "b", "c"].iter().map(|s| (*s).to_owned()).collect();
        let profile = profile_with("u", &["c"]);
        let pool = supplement_pool(&m, &profile);
        assert_eq!(pool.into_iter().collect::<Vec<_>>(), vec!["a"]);
    }

    #[test]
    fn supplement_pool_degenerate_cases() {
        // far pool contained in own pool -> empty
        let mut m = line_model(&[0.0, 9.0]);
        m.assignment.insert("u".into(), 0);
        m.cluster_positive_items[0] = ["a", "b"].iter().map(|s| (*s).to_owned()).collect();
        m.cluster_positive_items[1] = ["a"].iter().map(|s| (*s).to_owned()).collect();
        assert!(supplement_pool(&m, &profile_with("u", &[])).is_empty());

        // disjoint pools, no negatives -> whole far pool
        m.cluster_positive_items[0] = ["x"].iter().map(|s| (*s).to_owned()).collect();
        m.cluster_positive_items[1] = ["a", "b"].iter().map(|s| (*s).to_owned()).collect();
        let pool = supplement_pool(&m, &profile_with("u", &[]));
        assert_eq!(pool.into_iter().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn model_file_round_trips() {
        let points = vec![vec![0.0, 0.5], vec![4.0, 4.0], vec![0.2, 0.4]];
        let model = kmeans(&named(&points), 2, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.tsv");
        write_cluster_model(&path, &model).unwrap();
        let back = read_cluster_model(&path).unwrap();
        assert_eq!(back.n_cl, model.n_cl);
        assert_eq!(back.centroids, model.centroids);
        assert_eq!(back.assignment, model.assignment);
        assert_eq!(back.farthest, model.farthest);
    }
}
