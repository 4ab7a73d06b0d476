//! Structured grid generation, the implicit boundary node sets, custom
//! box-selected sets, and a geometric slit that opens the mesh along a
//! segment by duplicating nodes.
//!
//! Run with `cargo run --example mesh_and_slit`.

use phasefield::mesh::{generate_structured, insert_slit, Segment};
use phasefield::Result;

fn main() -> Result<()> {
    // A 1 mm square plate, 20 x 20 elements.
    let mut mesh = generate_structured(2, &[1.0e-3, 1.0e-3], &[20, 20])?;
    println!(
        "grid: {} nodes, {} elements ({} nodes per element)",
        mesh.n_nodes(),
        mesh.n_elements(),
        mesh.nodes_per_element()
    );
    for set in ["left", "right", "bottom", "top"] {
        println!("  boundary set '{set}': {} nodes", mesh.named_set(set)?.len());
    }

    // A custom set on the upper half of the left edge.
    let nodes = mesh.select_box(&[0.0, 0.5e-3], &[0.0, 1.0e-3], 1e-9);
    mesh.add_named_set("left_upper", nodes)?;
    println!(
        "  custom set 'left_upper': {} nodes",
        mesh.named_set("left_upper")?.len()
    );

    // Open a horizontal slit from the left edge to the plate center.
    // Nodes along the cut are duplicated so the two lips can separate.
    let before = mesh.n_nodes();
    let slit = Segment::new([0.0, 0.5e-3, 0.0], [0.5e-3, 0.5e-3, 0.0])?;
    let cut = insert_slit(&mesh, &slit)?;
    println!(
        "\nslit from (0, 0.5) mm to (0.5, 0.5) mm duplicated {} nodes ({} -> {})",
        cut.n_nodes() - before,
        before,
        cut.n_nodes()
    );

    // The same works in 3D with hexahedral elements.
    let solid = generate_structured(3, &[8.0e-3, 2.0e-3, 0.4e-3], &[16, 4, 2])?;
    println!(
        "\n3D beam: {} nodes, {} elements, boundary sets left/right/bottom/top/front/back",
        solid.n_nodes(),
        solid.n_elements()
    );
    Ok(())
}
