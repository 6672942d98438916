//! Exhaustive camera-partition search.
//!
//! Every way of dealing the cameras into train/val/test subsets of the
//! prescribed sizes is scored with [`variance_terms`]; the feasible
//! candidate with the smallest objective wins. Feasibility means forced
//! cameras sit in their required subset and neither evaluation subset
//! (val, test) holds more than `max_eval_fraction` of all labelled
//! images. Ties go to the lexicographically smallest (val, test) camera
//! lists, so results are reproducible down to the last bit.
//!
//! The space is tiny at camera scale — 10 cameras with sizes (6, 2, 2)
//! give 10!/(6!·2!·2!) = 1260 candidates — so nothing smarter than
//! enumeration is warranted.

use std::collections::BTreeMap;

use itertools::Itertools;

use crate::error::{Error, Result};

use super::profile::CameraProfile;
use super::variance::{variance_terms, SubsetStats, VarianceTerms};

/// Rules a partition must satisfy.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionConstraints {
    /// Camera counts for (train, val, test); must sum to the camera
    /// count, each at least 1.
    pub sizes: (usize, usize, usize),
    /// Cameras pinned to a subset (0 = train, 1 = val, 2 = test).
    pub forced: BTreeMap<String, usize>,
    /// Val and test may each hold at most this fraction of all labelled
    /// images.
    pub max_eval_fraction: f64,
    /// Multipliers for the class, size, and ratio variance terms.
    pub term_weights: [f64; 3],
}

impl PartitionConstraints {
    pub fn new(sizes: (usize, usize, usize)) -> Self {
        PartitionConstraints {
            sizes,
            forced: BTreeMap::new(),
            max_eval_fraction: 0.25,
            term_weights: [1.0, 1.0, 1.0],
        }
    }
}

/// A scored partition: camera names per subset plus the objective and
/// its breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionSpec {
    /// Camera names, sorted, for (train, val, test).
    pub subsets: [Vec<String>; 3],
    pub objective: f64,
    pub terms: VarianceTerms,
    /// Pooled statistics per subset, in the same order.
    pub stats: [SubsetStats; 3],
    /// How many candidates satisfied the forcing constraints (before the
    /// image-cap filter).
    pub candidates_evaluated: usize,
}

fn validate(profiles: &[CameraProfile], constraints: &PartitionConstraints) -> Result<()> {
    let n = profiles.len();
    let (n1, n2, n3) = constraints.sizes;
    if n1 + n2 + n3 != n {
        return Err(Error::InfeasiblePartition(format!(
            "subset sizes {n1}+{n2}+{n3} do not sum to the camera count {n}"
        )));
    }
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(Error::InfeasiblePartition(
            "every subset needs at least one camera".into(),
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for p in profiles {
        if !seen.insert(p.camera_id.as_str()) {
            return Err(Error::Config(format!(
                "duplicate camera id {:?}",
                p.camera_id
            )));
        }
    }
    let mut forced_per_subset = [0usize; 3];
    for (camera, &subset) in &constraints.forced {
        if subset > 2 {
            return Err(Error::InfeasiblePartition(format!(
                "camera {camera:?} forced to subset {subset}, valid are 0..=2"
            )));
        }
        if !seen.contains(camera.as_str()) {
            return Err(Error::InfeasiblePartition(format!(
                "forced camera {camera:?} is not in the dataset"
            )));
        }
        forced_per_subset[subset] += 1;
    }
    for (idx, (&forced, size)) in forced_per_subset.iter().zip([n1, n2, n3]).enumerate() {
        if forced > size {
            return Err(Error::InfeasiblePartition(format!(
                "{forced} cameras forced into subset {idx}, which only holds {size}"
            )));
        }
    }
    let f = constraints.max_eval_fraction;
    if !(f.is_finite() && 0.0 < f && f <= 1.0) {
        return Err(Error::OutOfRange {
            name: "max_eval_fraction",
            value: f,
        });
    }
    for &w in &constraints.term_weights {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::OutOfRange {
                name: "term_weight",
                value: w,
            });
        }
    }
    Ok(())
}

/// Find the feasible partition with the minimal objective.
pub fn search_partition(
    profiles: &[CameraProfile],
    constraints: &PartitionConstraints,
) -> Result<PartitionSpec> {
    validate(profiles, constraints)?;

    // fix a deterministic camera order: sorted by name
    let mut order: Vec<usize> = (0..profiles.len()).collect();
    order.sort_by(|&a, &b| profiles[a].camera_id.cmp(&profiles[b].camera_id));
    let sorted: Vec<&CameraProfile> = order.iter().map(|&i| &profiles[i]).collect();

    let total_labelled: u64 = sorted.iter().map(|p| p.labelled_images).sum();
    let cap = constraints.max_eval_fraction * total_labelled as f64;
    let (_, n_val, n_test) = constraints.sizes;

    let forced_subset = |camera: &str| constraints.forced.get(camera).copied();

    let mut best: Option<PartitionSpec> = None;
    let mut candidates_evaluated = 0usize;

    // lexicographic enumeration over (val, test) index combinations;
    // "first strictly better" preserves the tie-break
    for val_idx in (0..sorted.len()).combinations(n_val) {
        let rest: Vec<usize> = (0..sorted.len()).filter(|i| !val_idx.contains(i)).collect();
        for test_idx in rest.iter().copied().combinations(n_test) {
            let subset_of = |i: usize| -> usize {
                if val_idx.contains(&i) {
                    1
                } else if test_idx.contains(&i) {
                    2
                } else {
                    0
                }
            };
            let forcing_ok = (0..sorted.len()).all(|i| {
                forced_subset(&sorted[i].camera_id)
                    .map(|want| want == subset_of(i))
                    .unwrap_or(true)
            });
            if !forcing_ok {
                continue;
            }
            candidates_evaluated += 1;

            let members = |subset: usize| -> Vec<usize> {
                (0..sorted.len()).filter(|&i| subset_of(i) == subset).collect()
            };
            let train_idx = members(0);
            let val_members = members(1);
            let test_members = members(2);

            let eval_images = |idx: &[usize]| -> u64 {
                idx.iter().map(|&i| sorted[i].labelled_images).sum()
            };
            if eval_images(&val_members) as f64 > cap || eval_images(&test_members) as f64 > cap
            {
                continue;
            }

            let pool = |idx: &[usize]| SubsetStats::pool(idx.iter().map(|&i| sorted[i]));
            let stats = [pool(&train_idx)?, pool(&val_members)?, pool(&test_members)?];
            let terms = variance_terms(&stats)?;
            let objective = terms.weighted_total(constraints.term_weights);

            if best.as_ref().map_or(true, |b| objective < b.objective) {
                let names = |idx: &[usize]| -> Vec<String> {
                    idx.iter().map(|&i| sorted[i].camera_id.clone()).collect()
                };
                best = Some(PartitionSpec {
                    subsets: [names(&train_idx), names(&val_members), names(&test_members)],
                    objective,
                    terms,
                    stats,
                    candidates_evaluated: 0,
                });
            }
        }
    }

    match best {
        Some(mut spec) => {
            spec.candidates_evaluated = candidates_evaluated;
            debug_assert!(spec.subsets.iter().map(Vec::len).sum::<usize>() == profiles.len());
            Ok(spec)
        }
        None => Err(Error::NoFeasiblePartition {
            fraction: constraints.max_eval_fraction,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::split::variance::fixture_profiles;

    /// Brute-force reference: re-enumerate with nested loops written
    /// independently of the production path.
    fn brute_force(
        profiles: &[CameraProfile],
        constraints: &PartitionConstraints,
    ) -> Option<(f64, [Vec<String>; 3])> {
        let mut sorted: Vec<&CameraProfile> = profiles.iter().collect();
        sorted.sort_by(|a, b| a.camera_id.cmp(&b.camera_id));
        let n = sorted.len();
        let total: u64 = sorted.iter().map(|p| p.labelled_images).sum();
        let mut best: Option<(f64, [Vec<String>; 3])> = None;

        // assign every camera a subset via base-3 counting
        let mut assignment = vec![0usize; n];
        loop {
            let counts = [
                assignment.iter().filter(|&&s| s == 0).count(),
                assignment.iter().filter(|&&s| s == 1).count(),
                assignment.iter().filter(|&&s| s == 2).count(),
            ];
            let sizes = [constraints.sizes.0, constraints.sizes.1, constraints.sizes.2];
            if counts == sizes {
                let forced_ok = sorted.iter().enumerate().all(|(i, p)| {
                    constraints
                        .forced
                        .get(&p.camera_id)
                        .map(|&w| w == assignment[i])
                        .unwrap_or(true)
                });
                if forced_ok {
                    let subset_images = |s: usize| -> u64 {
                        sorted
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| assignment[*i] == s)
                            .map(|(_, p)| p.labelled_images)
                            .sum()
                    };
                    let cap = constraints.max_eval_fraction * total as f64;
                    if subset_images(1) as f64 <= cap && subset_images(2) as f64 <= cap {
                        let pool = |s: usize| {
                            SubsetStats::pool(
                                sorted
                                    .iter()
                                    .enumerate()
                                    .filter(|(i, _)| assignment[*i] == s)
                                    .map(|(_, p)| *p),
                            )
                            .unwrap()
                        };
                        let stats = [pool(0), pool(1), pool(2)];
                        let objective = variance_terms(&stats)
                            .unwrap()
                            .weighted_total(constraints.term_weights);
                        let names = |s: usize| -> Vec<String> {
                            sorted
                                .iter()
                                .enumerate()
                                .filter(|(i, _)| assignment[*i] == s)
                                .map(|(_, p)| p.camera_id.clone())
                                .collect()
                        };
                        let candidate = (objective, [names(0), names(1), names(2)]);
                        let better = match &best {
                            None => true,
                            Some((b, subsets)) => {
                                candidate.0 < *b
                                    || (candidate.0 == *b
                                        && (candidate.1[1].clone(), candidate.1[2].clone())
                                            < (subsets[1].clone(), subsets[2].clone()))
                            }
                        };
                        if better {
                            best = Some(candidate);
                        }
                    }
                }
            }
            // increment base-3 counter
            let mut i = 0;
            loop {
                if i == n {
                    return best;
                }
                assignment[i] += 1;
                if assignment[i] < 3 {
                    break;
                }
                assignment[i] = 0;
                i += 1;
            }
        }
    }

    fn four_cameras() -> Vec<CameraProfile> {
        fixture_profiles().into_iter().take(4).collect()
    }

    #[test]
    fn four_camera_search_matches_brute_force() {
        let profiles = four_cameras();
        let constraints = PartitionConstraints {
            max_eval_fraction: 1.0,
            ..PartitionConstraints::new((2, 1, 1))
        };
        let spec = search_partition(&profiles, &constraints).unwrap();
        assert_eq!(spec.candidates_evaluated, 12);
        let (best_obj, best_subsets) = brute_force(&profiles, &constraints).unwrap();
        assert_eq!(spec.objective, best_obj);
        assert_eq!(spec.subsets, best_subsets);
    }

    #[test]
    fn forced_camera_stays_in_its_subset() {
        let profiles = four_cameras();
        for subset in 0..3 {
            let mut constraints = PartitionConstraints {
                max_eval_fraction: 1.0,
                ..PartitionConstraints::new((2, 1, 1))
            };
            constraints.forced.insert("C".into(), subset);
            let spec = search_partition(&profiles, &constraints).unwrap();
            assert!(
                spec.subsets[subset].contains(&"C".to_string()),
                "C missing from subset {subset} in {:?}",
                spec.subsets
            );
        }
    }

    #[test]
    fn image_cap_keeps_heavy_cameras_out_of_eval_subsets() {
        let mut profiles = four_cameras();
        // camera B already holds 20 of 43 labelled images (47%)
        profiles[1].labelled_images = 20;
        let constraints = PartitionConstraints::new((2, 1, 1));
        let spec = search_partition(&profiles, &constraints).unwrap();
        assert!(!spec.subsets[1].contains(&"B".to_string()));
        assert!(!spec.subsets[2].contains(&"B".to_string()));
    }

    #[test]
    fn impossible_cap_reports_no_feasible_partition() {
        let profiles = four_cameras();
        let mut constraints = PartitionConstraints::new((2, 1, 1));
        constraints.max_eval_fraction = 0.01;
        assert!(matches!(
            search_partition(&profiles, &constraints),
            Err(Error::NoFeasiblePartition { .. })
        ));
    }

    #[test]
    fn identical_cameras_tie_break_lexicographically() {
        let template = &fixture_profiles()[0];
        let profiles: Vec<CameraProfile> = ["a", "b", "c", "d"]
            .iter()
            .map(|id| CameraProfile {
                camera_id: id.to_string(),
                ..template.clone()
            })
            .collect();
        let constraints = PartitionConstraints {
            max_eval_fraction: 1.0,
            ..PartitionConstraints::new((2, 1, 1))
        };
        let spec = search_partition(&profiles, &constraints).unwrap();
        // every candidate scores the same near-zero objective (identical
        // cameras), so the first — lexicographically smallest — wins
        assert!(spec.objective < 1e-30);
        assert_eq!(spec.subsets[1], ["a"]);
        assert_eq!(spec.subsets[2], ["b"]);
        assert_eq!(spec.subsets[0], ["c", "d"]);
    }

    #[test]
    fn structural_invariants_hold() {
        let profiles = fixture_profiles();
        let constraints = PartitionConstraints {
            max_eval_fraction: 1.0,
            ..PartitionConstraints::new((4, 1, 1))
        };
        let spec = search_partition(&profiles, &constraints).unwrap();
        let mut all: Vec<&String> = spec.subsets.iter().flatten().collect();
        all.sort();
        let mut expected: Vec<String> = profiles.iter().map(|p| p.camera_id.clone()).collect();
        expected.sort();
        assert_eq!(
            all.iter().map(|s| s.as_str()).collect::<Vec<_>>(),
            expected.iter().map(|s| s.as_str()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn bad_constraints_are_rejected_up_front() {
        let profiles = four_cameras();
        assert!(search_partition(&profiles, &PartitionConstraints::new((2, 1, 2))).is_err());
        assert!(search_partition(&profiles, &PartitionConstraints::new((4, 0, 0))).is_err());
        let mut c = PartitionConstraints::new((2, 1, 1));
        c.forced.insert("nope".into(), 0);
        assert!(search_partition(&profiles, &c).is_err());
        let mut c = PartitionConstraints::new((2, 1, 1));
        c.forced.insert("A".into(), 5);
        assert!(search_partition(&profiles, &c).is_err());
        let mut c = PartitionConstraints::new((2, 1, 1));
        c.max_eval_fraction = 0.0;
        assert!(search_partition(&profiles, &c).is_err());
        let mut c = PartitionConstraints::new((2, 1, 1));
        c.term_weights = [1.0, -1.0, 1.0];
        assert!(search_partition(&profiles, &c).is_err());
    }
}
