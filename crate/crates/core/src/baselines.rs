//! Reference strategies: a greedy refinement rebalancer and a no-op control.

use crate::model::{MigrationPlan, Move, WorkloadSnapshot};

pub const DEFAULT_GREEDY_TOL: f64 = 0.01;

/// Greedy refinement: while some node exceeds `mean * (1 + tol)`, move an
/// object from the heaviest node to the currently lightest one. The move must
/// keep the source at or above the mean; among qualifying objects the largest
/// one that also fits the destination's deficit is preferred, falling back to
/// the largest one that still leaves the destination below the source.
/// Destinations are unrestricted by any neighbor graph, which is what makes
/// this baseline locality-destroying.
pub fn greedy_refine(s: &WorkloadSnapshot, tol: f64) -> MigrationPlan {
    assert!(tol >= 0.0);
    let mut loads = s.node_loads();
    let mean: f64 = loads.iter().sum::<f64>() / s.node_count as f64;
    let mut members = s.objects_by_node();
    let mut locked = vec![false; s.objects.len()];
    let mut moves = Vec::new();
    if mean <= 0.0 {
        return MigrationPlan::default();
    }

    loop {
        let heaviest = (0..s.node_count)
            .max_by(|&a, &b| loads[a].total_cmp(&loads[b]).then(b.cmp(&a)))
            .unwrap();
        if loads[heaviest] <= mean * (1.0 + tol) {
            break;
        }
        let lightest = (0..s.node_count)
            .min_by(|&a, &b| loads[a].total_cmp(&loads[b]).then(a.cmp(&b)))
            .unwrap();
        let deficit = mean - loads[lightest];

        // Candidates that keep the source at or above the mean.
        let mut pick: Option<(bool, f64, usize)> = None; // (fits deficit, load, id)
        for &obj in &members[heaviest] {
            if locked[obj] {
                continue;
            }
            let w = s.objects[obj].load;
            if w <= 0.0 || loads[heaviest] - w < mean {
                continue;
            }
            let fits = w <= deficit;
            if !fits && loads[lightest] + w >= loads[heaviest] {
                continue; // would not even improve the pair
            }
            let better = match pick {
                None => true,
                Some((pfits, pw, pid)) => {
                    (fits, w, std::cmp::Reverse(obj)) > (pfits, pw, std::cmp::Reverse(pid))
                }
            };
            if better {
                pick = Some((fits, w, obj));
            }
        }
        let Some((_, w, obj)) = pick else {
            break;
        };
        locked[obj] = true;
        members[heaviest].retain(|&o| o != obj);
        members[lightest].push(obj);
        loads[heaviest] -= w;
        loads[lightest] += w;
        moves.push(Move {
            object: obj,
            from_node: heaviest,
            to_node: lightest,
        });
    }

    MigrationPlan {
        moves,
        thread_moves: Vec::new(),
    }
}

/// Control arm: never migrates anything.
pub fn no_lb(_s: &WorkloadSnapshot) -> MigrationPlan {
    MigrationPlan::default()
}
