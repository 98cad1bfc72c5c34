//! From-scratch neural components: autodiff graph, parameters, transformer
//! layers, L2V layout rendering and the general-domain encoders.

pub mod checkpoint;
mod config;
mod encoders;
pub mod gradcheck;
pub mod graph;
mod l2v;
pub mod layers;
mod params;
mod vocab;

pub use config::{EncoderConfig, COORD_ROWS};
pub use encoders::{
    query_ids, DocFeatures, EntityEncoder, EntityStates, GdeVars, GeneralEncoders,
    LayoutProjection, QueryEncoding, TokenEncoder, TokenStates,
};
pub use graph::{Gradients, Graph, Mat, Var};
pub use l2v::{layout_means, render_l2v, render_l2v_dims, render_page, Raster};
pub(crate) use params::round_f32;
pub use params::{Init, ParamEntry, ParamGroup, ParamId, ParamStore};
pub use vocab::{Vocab, UNK, UNK_TEXT};

/// Mean-pools raster channels over `bbox` and applies the layout projection.
pub fn pool_l2v(
    raster: &Raster,
    bbox: &crate::docmodel::BBox,
    layout: &LayoutProjection,
    store: &ParamStore,
) -> Mat {
    let m = layout_means(raster, bbox);
    let row = Mat::from_shape_vec((1, 3), m.iter().map(|v| v / 255.0).collect()).expect("1x3");
    let mut g = Graph::new(store);
    let v = layout.forward(&mut g, &row);
    g.value(v).clone()
}
