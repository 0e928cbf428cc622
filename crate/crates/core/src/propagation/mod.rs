//! Knife-edge diffraction physics and the radio maps built on it.

pub mod fresnel;
pub mod information;
pub mod knife_edge;
pub mod radio_map;

pub use fresnel::fresnel_integrals;
pub use information::{
    check_psd, exponential_prior, fisher_information, greedy_probe_placement, kirchhoff_matrix,
    mutual_information, EdgeDiscretization, EdgeSegment, GreedyPlacement,
};
pub use knife_edge::{
    diffraction_parameter, excess_loss_db, fresnel_zone_width, knife_edge_field_ratio, tail_bound,
    FieldRatioForm, KnifeEdgeGeometry,
};
pub use radio_map::{
    deygout_excess_loss, synthesize_radio_map, synthesize_radio_map_with, PropagationParams,
    RadioMap,
};
