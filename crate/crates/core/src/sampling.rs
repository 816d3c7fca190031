//! Greedy farthest point sampling.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::geometry::Vec3;

/// Greedy FPS over `n` items under `dist`, seeded with index 0. Each step
/// adds the item with the largest distance to the chosen set; ties go to
/// the lowest index. Returns indices in selection order; `k >= n` selects
/// everything.
pub fn farthest_point_sampling(n: usize, k: usize, dist: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut min_dist = vec![f64::INFINITY; n];
    let mut next = 0usize;
    while chosen.len() < k {
        chosen.push(next);
        taken[next] = true;
        let mut best = None::<(usize, f64)>;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let d = dist(next, i);
            if d < min_dist[i] {
                min_dist[i] = d;
            }
            match best {
                Some((_, bd)) if min_dist[i] <= bd => {}
                _ => best = Some((i, min_dist[i])),
            }
        }
        match best {
            Some((i, _)) => next = i,
            None => break,
        }
    }
    chosen
}

/// Angle between two directions, radians.
pub fn angular_distance(a: &Vec3, b: &Vec3) -> f64 {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    // atan2 stays accurate near 0 and π, where acos of the dot does not
    a.cross(b).norm().atan2(a.dot(b))
}

/// FPS over viewpoint directions using the angular (geodesic) distance.
pub fn fps_sample(viewpoints: &[Vec3], k: usize) -> Vec<usize> {
    farthest_point_sampling(viewpoints.len(), k, |i, j| {
        angular_distance(&viewpoints[i], &viewpoints[j])
    })
}

/// Smallest pairwise angle within a subset.
pub fn min_pairwise_angle(viewpoints: &[Vec3], subset: &[usize]) -> f64 {
    let mut best = f64::INFINITY;
    for (a, &i) in subset.iter().enumerate() {
        for &j in &subset[a + 1..] {
            best = best.min(angular_distance(&viewpoints[i], &viewpoints[j]));
        }
    }
    best
}
