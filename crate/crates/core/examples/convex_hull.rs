//! Builds the hull of an L-shaped footprint and prints its merged facets.
//!
//! Interior points are dropped and coplanar triangles are merged, so a box
//! comes out with 6 facets rather than 12.

use ecpsim::convex_hull;
use nalgebra::Vector3;

fn main() -> ecpsim::Result<()> {
    // L-shaped slab: the notch corner (0.1, 0.1) is not extreme.
    let outline = [(0.0, 0.0), (0.3, 0.0), (0.3, 0.1), (0.1, 0.1), (0.1, 0.3), (0.0, 0.3)];
    let mut points = Vec::new();
    for z in [0.0, 0.05] {
        points.extend(outline.iter().map(|&(x, y)| Vector3::new(x, y, z)));
    }
    points.push(Vector3::new(0.05, 0.05, 0.025)); // strictly inside

    let hull = convex_hull(&points)?;
    println!("{} input points, {} extreme, {} facets", points.len(), hull.vertices.len(), hull.num_facets());
    for (f, verts) in hull.facets.iter().zip(&hull.facet_vertices) {
        println!(
            "n = ({:+.3}, {:+.3}, {:+.3})  d = {:.4}  vertices {:?}",
            f.normal.x, f.normal.y, f.normal.z, f.offset, verts
        );
    }

    let probe = Vector3::new(0.2, 0.2, 0.02);
    println!(
        "probe {:?} inside hull: {} (max facet value {:.4})",
        probe.as_slice(),
        hull.contains_body(&probe, 1e-12),
        hull.max_violation_body(&probe)
    );
    Ok(())
}
