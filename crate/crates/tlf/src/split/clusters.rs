//! Object-size categories via k-medoids clustering.
//!
//! Box areas are clustered with PAM (Partitioning Around Medoids) under
//! absolute-difference distance. Medoids are restricted to data points,
//! which keeps the clustering robust to the extreme-area outliers common
//! in wildlife imagery. The three medoids, sorted ascending, define the
//! small/medium/large size categories.

use crate::error::{Error, Result};

use super::annotations::AnnotationRecord;

/// Size bucket of one object, by nearest medoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SizeCategory {
    Small,
    Medium,
    Large,
}

impl SizeCategory {
    pub const ALL: [SizeCategory; 3] = [
        SizeCategory::Small,
        SizeCategory::Medium,
        SizeCategory::Large,
    ];

    pub fn index(self) -> usize {
        match self {
            SizeCategory::Small => 0,
            SizeCategory::Medium => 1,
            SizeCategory::Large => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SizeCategory::Small => "small",
            SizeCategory::Medium => "medium",
            SizeCategory::Large => "large",
        }
    }
}

/// Total cost of a medoid set: each point contributes its distance to the
/// nearest medoid.
fn clustering_cost(data: &[f64], medoids: &[usize]) -> f64 {
    data.iter()
        .map(|&x| {
            medoids
                .iter()
                .map(|&m| (x - data[m]).abs())
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// PAM k-medoids: greedy BUILD, then best-improvement SWAP until no swap
/// strictly lowers the cost.
///
/// Deterministic: all ties resolve to the lowest data index. Returns the
/// medoid indices (ascending) and the final cost; the cost never exceeds
/// the BUILD cost. Needs at least `k` distinct values.
pub fn kmedoids_pam(data: &[f64], k: usize) -> Result<(Vec<usize>, f64)> {
    if k == 0 {
        return Err(Error::Config("cluster count must be at least 1".into()));
    }
    let mut distinct: Vec<f64> = data.to_vec();
    distinct.sort_by(|a, b| a.partial_cmp(b).expect("finite areas"));
    distinct.dedup();
    if distinct.len() < k {
        return Err(Error::TooFewDistinctValues {
            k,
            distinct: distinct.len(),
        });
    }

    // BUILD: start from the 1-medoid optimum, then repeatedly add the
    // point that lowers the cost most (first index wins ties)
    let mut medoids: Vec<usize> = Vec::with_capacity(k);
    while medoids.len() < k {
        let mut best_idx = None;
        let mut best_cost = f64::INFINITY;
        for candidate in 0..data.len() {
            if medoids.contains(&candidate) {
                continue;
            }
            medoids.push(candidate);
            let cost = clustering_cost(data, &medoids);
            medoids.pop();
            if cost < best_cost {
                best_cost = cost;
                best_idx = Some(candidate);
            }
        }
        medoids.push(best_idx.expect("fewer medoids than points"));
    }
    let build_cost = clustering_cost(data, &medoids);

    // SWAP: take the single (medoid, candidate) exchange with the lowest
    // resulting cost; stop when no exchange is strictly better
    let mut current_cost = build_cost;
    loop {
        let mut best_swap: Option<(usize, usize)> = None;
        let mut best_cost = current_cost;
        for slot in 0..medoids.len() {
            for candidate in 0..data.len() {
                if medoids.contains(&candidate) {
                    continue;
                }
                let old = medoids[slot];
                medoids[slot] = candidate;
                let cost = clustering_cost(data, &medoids);
                medoids[slot] = old;
                if cost < best_cost {
                    best_cost = cost;
                    best_swap = Some((slot, candidate));
                }
            }
        }
        match best_swap {
            Some((slot, candidate)) => {
                medoids[slot] = candidate;
                current_cost = best_cost;
            }
            None => break,
        }
    }

    medoids.sort_by(|&a, &b| {
        data[a]
            .partial_cmp(&data[b])
            .expect("finite areas")
            .then(a.cmp(&b))
    });
    Ok((medoids, current_cost))
}

/// The three size-category centers.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeClusters {
    /// Medoid areas ascending: small, medium, large.
    pub medoids: [f64; 3],
}

impl SizeClusters {
    /// Cluster the full dataset's areas once; the sorted medoids become
    /// the category centers.
    pub fn fit(areas: &[f64]) -> Result<Self> {
        let (indices, _) = kmedoids_pam(areas, 3)?;
        Ok(SizeClusters {
            medoids: [areas[indices[0]], areas[indices[1]], areas[indices[2]]],
        })
    }

    /// Category of the nearest medoid; ties go to the smaller category.
    pub fn categorize(&self, area: f64) -> SizeCategory {
        let mut best = SizeCategory::Small;
        let mut best_dist = (area - self.medoids[0]).abs();
        for cat in [SizeCategory::Medium, SizeCategory::Large] {
            let dist = (area - self.medoids[cat.index()]).abs();
            if dist < best_dist {
                best = cat;
                best_dist = dist;
            }
        }
        best
    }
}

/// Size category of one annotation.
pub fn assign_size(record: &AnnotationRecord, clusters: &SizeClusters) -> SizeCategory {
    clusters.categorize(record.area())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive optimum over all medoid triples, for cross-checking.
    fn brute_force_best(data: &[f64]) -> f64 {
        let n = data.len();
        let mut best = f64::INFINITY;
        for a in 0..n {
            for b in (a + 1)..n {
                for c in (b + 1)..n {
                    best = best.min(clustering_cost(data, &[a, b, c]));
                }
            }
        }
        best
    }

    #[test]
    fn three_tight_groups_pick_their_centers() {
        let areas = [0.01, 0.011, 0.012, 0.10, 0.11, 0.12, 0.50, 0.51, 0.52];
        let clusters = SizeClusters::fit(&areas).unwrap();
        assert_eq!(clusters.medoids, [0.011, 0.11, 0.51]);
        let (_, cost) = kmedoids_pam(&areas, 3).unwrap();
        assert!((cost - 0.042).abs() < 1e-12);
        assert!((cost - brute_force_best(&areas)).abs() < 1e-12);
    }

    #[test]
    fn exactly_three_distinct_values_cost_zero() {
        let areas = [0.2, 0.2, 0.5, 0.5, 0.5, 0.9, 0.2, 0.9];
        let (medoids, cost) = kmedoids_pam(&areas, 3).unwrap();
        let mut values: Vec<f64> = medoids.iter().map(|&i| areas[i]).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(values, [0.2, 0.5, 0.9]);
        assert_eq!(cost, 0.0);
    }

    #[test]
    fn too_few_distinct_values_is_rejected() {
        let areas = [0.3, 0.3, 0.3, 0.7];
        assert!(matches!(
            kmedoids_pam(&areas, 3),
            Err(Error::TooFewDistinctValues { k: 3, distinct: 2 })
        ));
    }

    #[test]
    fn swap_never_worsens_build_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..200 {
            let n = rng.gen_range(4..30);
            let data: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            // BUILD cost alone: run with the swap phase disabled by
            // recomputing the greedy choice here
            let (medoids, final_cost) = kmedoids_pam(&data, 3).unwrap();
            assert_eq!(medoids.len(), 3);
            // final cost can never beat the exhaustive optimum
            if n <= 14 {
                let best = brute_force_best(&data);
                assert!(final_cost >= best - 1e-12);
            }
            // and must be a genuine local optimum: no single swap improves
            let mut m = medoids.clone();
            for slot in 0..3 {
                for candidate in 0..data.len() {
                    if m.contains(&candidate) {
                        continue;
                    }
                    let old = m[slot];
                    m[slot] = candidate;
                    assert!(clustering_cost(&data, &m) >= final_cost - 1e-12);
                    m[slot] = old;
                }
            }
        }
    }

    #[test]
    fn medoid_set_is_permutation_invariant_on_tie_free_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f64> = (0..20).map(|_| rng.gen_range(0.0..1.0)).collect();
        let values = |d: &[f64]| -> Vec<f64> {
            let (m, _) = kmedoids_pam(d, 3).unwrap();
            let mut v: Vec<f64> = m.iter().map(|&i| d[i]).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let base = values(&data);
        let mut shuffled = data.clone();
        shuffled.reverse();
        shuffled.swap(3, 11);
        assert_eq!(values(&shuffled), base);
    }

    #[test]
    fn identical_input_gives_identical_output() {
        let data = [0.5, 0.1, 0.9, 0.3, 0.2, 0.8];
        let a = kmedoids_pam(&data, 3).unwrap();
        let b = kmedoids_pam(&data, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn assignment_honors_nearest_and_tie_rules() {
        // dyadic medoids so the midpoint distance comparison is an exact
        // tie in binary floating point
        let clusters = SizeClusters {
            medoids: [0.25, 0.75, 2.0],
        };
        assert_eq!(clusters.categorize(0.25), SizeCategory::Small);
        assert_eq!(clusters.categorize(0.75), SizeCategory::Medium);
        // midway between small and medium: exactly tied, smaller wins
        assert_eq!(clusters.categorize(0.5), SizeCategory::Small);
        // midway between medium and large likewise
        assert_eq!(clusters.categorize(1.375), SizeCategory::Medium);
        // far beyond the large medoid is still nearest to large
        assert_eq!(clusters.categorize(9.0), SizeCategory::Large);
    }
}
