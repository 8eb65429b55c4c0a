use std::fmt::Write as _;

use ctxnav_core::world_model::extract_frontiers;
use ctxnav_core::Explorer;

pub struct LayerFiles {
    /// `(name, row-major values)` for each exported layer.
    pub layers: Vec<(&'static str, Vec<f64>)>,
    pub frontiers: String,
}

/// The four value layers plus a frontier table for the explorer's
/// current state.
pub fn layer_files(explorer: &Explorer, min_frontier_cells: usize) -> LayerFiles {
    let cues = explorer.cues();
    let weights = explorer.weights();
    let map = explorer.map();
    let n = map.width() * map.height();
    let target: Vec<f64> = (0..n).map(|i| explorer.target_layer().value_or_zero(i)).collect();
    let room: Vec<f64> = (0..n).map(|i| explorer.room_layer().value_or_zero(i)).collect();
    let layers = vec![
        ("v_target", target),
        ("v_room", room),
        ("v_object", cues.render_context()),
        ("v_sem", cues.render(weights)),
    ];

    let frontiers = extract_frontiers(map, min_frontier_cells);
    let scores = explorer.frontier_scores(&frontiers);
    let mut table = String::from("id,x,y,cells,v_sem\n");
    for (f, s) in frontiers.iter().zip(scores) {
        let _ = writeln!(table, "{},{:.6},{:.6},{},{:.6}", f.id, f.center.x, f.center.y, f.size(), s);
    }
    LayerFiles { layers, frontiers: table }
}
