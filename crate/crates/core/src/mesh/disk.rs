use std::f64::consts::PI;

use super::{dist, Mesh};
use crate::error::{AetError, Result};

/// Quasi-uniform triangulation of the unit disk with target edge length `h`.
///
/// Nodes sit on concentric rings `r_k = k / n` (`n = round(1/h)`) with `6k`
/// nodes on ring `k`; consecutive rings are stitched by always taking the
/// shorter of the two candidate diagonals. Odd rings are rotated by half a
/// node spacing so that stitched triangles stay close to equilateral.
pub fn generate_disk_mesh(h: f64) -> Result<Mesh> {
    if !(h > 0.0 && h < 1.0) {
        return Err(AetError::Domain(format!("mesh size h = {h} must lie in (0, 1)")));
    }
    let rings = (1.0 / h).round().max(1.0) as usize;

    let mut nodes = vec![[0.0, 0.0]];
    let mut ring_start = vec![0usize];
    let mut ring_len = vec![1usize];
    for k in 1..=rings {
        let count = 6 * k;
        let radius = k as f64 / rings as f64;
        let offset = if k % 2 == 1 { PI / count as f64 } else { 0.0 };
        ring_start.push(nodes.len());
        ring_len.push(count);
        for j in 0..count {
            let theta = offset + 2.0 * PI * j as f64 / count as f64;
            let (s, c) = theta.sin_cos();
            // Exact unit radius on the outer ring.
            let p = if k == rings { [c, s] } else { [radius * c, radius * s] };
            nodes.push(p);
        }
    }

    let mut triangles = Vec::with_capacity(6 * rings * rings);
    // Central fan.
    let s1 = ring_start[1];
    for j in 0..6 {
        triangles.push([0, s1 + j, s1 + (j + 1) % 6]);
    }
    for k in 2..=rings {
        stitch(
            &nodes,
            (ring_start[k - 1], ring_len[k - 1]),
            (ring_start[k], ring_len[k]),
            &mut triangles,
        );
    }
    Mesh::new(nodes, triangles)
}

/// Triangulates the annulus between two rings given as (first index, count).
/// Both rings are ordered counter-clockwise by angle.
fn stitch(
    nodes: &[[f64; 2]],
    inner: (usize, usize),
    outer: (usize, usize),
    triangles: &mut Vec<[usize; 3]>,
) {
    let angle = |v: usize| {
        let p = nodes[v];
        p[1].atan2(p[0]).rem_euclid(2.0 * PI)
    };
    // Start each ring at its node with the smallest polar angle.
    let first = |(s, n): (usize, usize)| {
        (0..n)
            .min_by(|&a, &b| angle(s + a).total_cmp(&angle(s + b)))
            .expect("nonempty ring")
    };
    let (is, in_) = inner;
    let (os, on) = outer;
    let (i0, o0) = (first(inner), first(outer));
    let iv = |i: usize| is + (i0 + i) % in_;
    let ov = |j: usize| os + (o0 + j) % on;

    let (mut i, mut j) = (0usize, 0usize);
    while i < in_ || j < on {
        let advance_outer = if i == in_ {
            true
        } else if j == on {
            false
        } else {
            dist(nodes[iv(i)], nodes[ov(j + 1)]) <= dist(nodes[iv(i + 1)], nodes[ov(j)])
        };
        if advance_outer {
            triangles.push([iv(i), ov(j), ov(j + 1)]);
            j += 1;
        } else {
            triangles.push([iv(i), ov(j), iv(i + 1)]);
            i += 1;
        }
    }
}
