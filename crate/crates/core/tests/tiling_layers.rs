//! Sphere sizes of {3,q} tilings against a combinatorial ring recurrence.
//!
//! Ring n of a hyperbolic triangulation is a cycle. A ring vertex with one
//! inward edge has q-3 outward edges, one with two inward edges has q-4.
//! Consecutive outward fans share their end vertices, and each shared vertex
//! has two inward edges. Hence (ones, twos) -> (ones*(q-5) + twos*(q-6), ones + twos).

use hyperperc::graphs::{build_tiling, build_tree, GraphWindow};

fn ring_recurrence(q: usize, rings: usize) -> Vec<usize> {
    let mut sizes = vec![1, q];
    let (mut ones, mut twos) = (q, 0usize);
    for _ in 1..rings {
        let next_ones = ones * (q - 5) + twos * (q - 6);
        let next_twos = ones + twos;
        ones = next_ones;
        twos = next_twos;
        sizes.push(ones + twos);
    }
    sizes
}

fn sphere_sizes(w: &GraphWindow) -> Vec<usize> {
    (0..=w.radius).map(|n| w.sphere(n).len()).collect()
}

#[test]
fn recurrence_by_hand_for_two_layers() {
    // {3,7}: 7 neighbours; each has 4 outward edges, shared ends give 7*4 - 7 = 21
    assert_eq!(ring_recurrence(7, 2), vec![1, 7, 21]);
}

#[test]
fn triangulation_spheres_match_recurrence() {
    for (q, layers) in [(7usize, 5usize), (8, 4), (9, 3)] {
        let w = build_tiling(3, q, layers).unwrap();
        assert_eq!(sphere_sizes(&w), ring_recurrence(q, layers), "q={q}");
    }
}

#[test]
fn three_seven_four_layers() {
    let w = build_tiling(3, 7, 4).unwrap();
    assert_eq!(w.n_vertices(), ring_recurrence(7, 4).iter().sum::<usize>());
    assert_eq!(w.n_vertices(), 1 + 7 + 21 + 56 + 147);
}

#[test]
fn square_and_other_tilings_are_regular_inside() {
    for (p, q, layers) in [(4usize, 5usize, 5usize), (5, 4, 5), (7, 3, 7), (6, 4, 4)] {
        let w = build_tiling(p, q, layers).unwrap();
        for v in 0..w.n_vertices() as u32 {
            if !w.is_boundary(v) {
                assert_eq!(w.degree(v), q, "{{{p},{q}}} vertex {v}");
            }
        }
        // planar map check: every interior edge lies on faces of length p, so
        // shortest cycle through an interior vertex has length min(p, ...) = p
        let girth = shortest_cycle_through(&w, 0);
        assert_eq!(girth, p, "{{{p},{q}}}");
    }
}

fn shortest_cycle_through(w: &GraphWindow, s: u32) -> usize {
    // BFS labelling each vertex with the first edge taken from s
    let n = w.n_vertices();
    let mut dist = vec![usize::MAX; n];
    let mut branch = vec![u32::MAX; n];
    dist[s as usize] = 0;
    let mut q = std::collections::VecDeque::new();
    for &x in w.neighbors(s) {
        dist[x as usize] = 1;
        branch[x as usize] = x;
        q.push_back(x);
    }
    let mut best = usize::MAX;
    while let Some(v) = q.pop_front() {
        for &x in w.neighbors(v) {
            if x == s {
                continue;
            }
            if dist[x as usize] == usize::MAX {
                dist[x as usize] = dist[v as usize] + 1;
                branch[x as usize] = branch[v as usize];
                q.push_back(x);
            } else if branch[x as usize] != branch[v as usize] {
                best = best.min(dist[x as usize] + dist[v as usize] + 1);
            }
        }
    }
    best
}

#[test]
fn tree_has_no_cycles() {
    let t = build_tree(3, 4).unwrap();
    assert_eq!(shortest_cycle_through(&t, 0), usize::MAX);
}
