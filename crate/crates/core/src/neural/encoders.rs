//! General-domain encoding: token encoder, entity visual encoder, L2V layout
//! projection, entity fusion and query encoding.

use super::config::{EncoderConfig, COORD_ROWS};
use super::graph::{Graph, Mat, Var};
use super::l2v::{layout_means, render_l2v, render_page, Raster};
use super::layers::{Linear, TransformerEncoder, INIT_STD};
use super::params::{Init, ParamGroup, ParamId, ParamStore};
use super::vocab::Vocab;
use crate::docmodel::{BBox, Document};
use crate::error::{Error, Result};

/// Model inputs derived from one document. Built once and reused across
/// epochs.
#[derive(Debug, Clone)]
pub struct DocFeatures {
    pub doc_id: String,
    pub word_ids: Vec<usize>,
    /// x0, y0, x1, y1 per token.
    pub coords: [Vec<usize>; 4],
    /// L2V channel means (scaled to [0,1]) per token box.
    pub token_layout: Mat,
    /// L2V channel means (scaled to [0,1]) per entity box.
    pub entity_layout: Mat,
    /// Rendered page, one row per pixel, channels scaled to [0,1].
    pub page: Mat,
    pub page_height: usize,
    pub page_width: usize,
    /// Pixel rows covered by each entity box.
    pub entity_pixels: Vec<Vec<usize>>,
    /// Token positions belonging to each entity.
    pub children: Vec<Vec<usize>>,
    /// Dense token-by-entity relation matrix.
    pub relation: Mat,
}

fn layout_rows(raster: &Raster, boxes: &[BBox]) -> Mat {
    let mut m = Mat::zeros((boxes.len(), 3));
    for (i, b) in boxes.iter().enumerate() {
        let means = layout_means(raster, b);
        for c in 0..3 {
            m[[i, c]] = means[c] / 255.0;
        }
    }
    m
}

impl DocFeatures {
    pub fn new(doc: &Document, vocab: &Vocab, cfg: &EncoderConfig) -> Result<Self> {
        if doc.tokens.len() > cfg.max_tokens {
            return Err(Error::Overflow {
                what: "tokens",
                got: doc.tokens.len(),
                limit: cfg.max_tokens,
            });
        }
        if doc.entities.len() > cfg.max_entities {
            return Err(Error::Overflow {
                what: "entities",
                got: doc.entities.len(),
                limit: cfg.max_entities,
            });
        }
        let word_ids = doc
            .tokens
            .iter()
            .map(|t| vocab.id(&t.text).min(cfg.vocab_size - 1))
            .collect();
        let c = |f: fn(&BBox) -> i32| -> Vec<usize> {
            doc.tokens.iter().map(|t| f(&t.bbox) as usize).collect()
        };
        let coords = [c(|b| b.x0), c(|b| b.y0), c(|b| b.x1), c(|b| b.y1)];
        let l2v = render_l2v(doc);
        let token_boxes: Vec<BBox> = doc.tokens.iter().map(|t| t.bbox).collect();
        let entity_boxes: Vec<BBox> = doc.entities.iter().map(|e| e.bbox).collect();
        let page_raster = render_page(doc);
        let page = Mat::from_shape_fn((page_raster.width * page_raster.height, 3), |(r, ch)| {
            page_raster.data[r * 3 + ch] as f64 / 255.0
        });
        let entity_pixels = entity_boxes
            .iter()
            .map(|b| page_raster.region_pixels(b))
            .collect();
        Ok(DocFeatures {
            doc_id: doc.id.clone(),
            word_ids,
            coords,
            token_layout: layout_rows(&l2v, &token_boxes),
            entity_layout: layout_rows(&l2v, &entity_boxes),
            page,
            page_height: page_raster.height,
            page_width: page_raster.width,
            entity_pixels,
            children: doc.relation_matrix.children(),
            relation: doc.relation_matrix.to_dense(),
        })
    }

    pub fn n_tokens(&self) -> usize {
        self.word_ids.len()
    }

    pub fn n_entities(&self) -> usize {
        self.entity_pixels.len()
    }
}

/// Shared L2V projection (3 → hidden) used for both token and entity boxes.
#[derive(Debug, Clone)]
pub struct LayoutProjection {
    pub proj: Linear,
}

impl LayoutProjection {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        LayoutProjection {
            proj: Linear::new(store, "layout.proj", ParamGroup::Layout, 3, cfg.hidden_dim),
        }
    }

    /// Projects rows of scaled channel means.
    pub fn forward(&self, g: &mut Graph, means: &Mat) -> Var {
        let x = g.constant(means.clone());
        self.proj.forward(g, x)
    }
}

/// Word, coordinate and position embeddings followed by a transformer
/// encoder.
#[derive(Debug, Clone)]
pub struct TokenEncoder {
    pub words: ParamId,
    pub x_coords: ParamId,
    pub y_coords: ParamId,
    pub positions: ParamId,
    pub encoder: TransformerEncoder,
}

impl TokenEncoder {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        let h = cfg.hidden_dim;
        let grp = ParamGroup::TokenEncoder;
        let emb = |store: &mut ParamStore, name: &str, rows: usize| {
            store.register(
                format!("token.{name}"),
                grp,
                (rows, h),
                Init::Normal(INIT_STD),
            )
        };
        TokenEncoder {
            words: emb(store, "words", cfg.vocab_size),
            x_coords: emb(store, "x_coords", COORD_ROWS),
            y_coords: emb(store, "y_coords", COORD_ROWS),
            positions: emb(store, "positions", cfg.max_tokens),
            encoder: TransformerEncoder::new(
                store,
                "token.encoder",
                grp,
                h,
                cfg.n_heads,
                cfg.n_layers,
            ),
        }
    }

    fn embed_words(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let words = g.param(self.words);
        let positions = g.param(self.positions);
        let w = g.gather(words, ids);
        let order: Vec<usize> = (0..ids.len()).collect();
        let p = g.gather(positions, &order);
        g.add(w, p)
    }

    /// Encoder output before the L2V term is added.
    pub fn forward(&self, g: &mut Graph, feats: &DocFeatures) -> Var {
        let mut x = self.embed_words(g, &feats.word_ids);
        let xs = g.param(self.x_coords);
        let ys = g.param(self.y_coords);
        for (k, ids) in feats.coords.iter().enumerate() {
            let table = if k % 2 == 0 { xs } else { ys };
            let e = g.gather(table, ids);
            x = g.add(x, e);
        }
        let x = g.dropout(x);
        self.encoder.forward(g, x)
    }

    /// Query sequence: words and positions only (no box, no L2V).
    pub fn forward_query(&self, g: &mut Graph, ids: &[usize]) -> Var {
        let x = self.embed_words(g, ids);
        self.encoder.forward(g, x)
    }
}

/// Visual pathway (two 3×3 convolutions, RoI mean pooling, projection) and
/// the entity fusion layer.
#[derive(Debug, Clone)]
pub struct EntityEncoder {
    pub conv1: Linear,
    pub conv2: Linear,
    pub visual: Linear,
    pub fusion: Linear,
}

impl EntityEncoder {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        let [c1, c2] = cfg.conv_channels;
        let h = cfg.hidden_dim;
        let grp = ParamGroup::EntityEncoder;
        EntityEncoder {
            conv1: Linear::new(store, "entity.conv1", grp, 27, c1),
            conv2: Linear::new(store, "entity.conv2", grp, 9 * c1, c2),
            visual: Linear::new(store, "entity.visual", grp, c2, h),
            fusion: Linear::new(store, "entity.fusion", grp, 2 * h, h),
        }
    }

    /// V′: one row per entity.
    pub fn visual(&self, g: &mut Graph, feats: &DocFeatures) -> Var {
        let (hgt, wid) = (feats.page_height, feats.page_width);
        let page = g.constant(feats.page.clone());
        let p1 = g.im2col(page, hgt, wid);
        let f1 = self.conv1.forward(g, p1);
        let f1 = g.gelu(f1);
        let p2 = g.im2col(f1, hgt, wid);
        let f2 = self.conv2.forward(g, p2);
        let f2 = g.gelu(f2);
        let pooled = g.pool_rows(f2, feats.entity_pixels.clone());
        self.visual.forward(g, pooled)
    }

    /// `E = Linear(V′ ⊕ T_pool) + L_E`.
    pub fn fuse(&self, g: &mut Graph, visual: Var, token_pool: Var, layout: Var) -> Var {
        let cat = g.concat_cols(&[visual, token_pool]);
        let f = self.fusion.forward(g, cat);
        g.add(f, layout)
    }
}

/// The three general-domain components.
#[derive(Debug, Clone)]
pub struct GeneralEncoders {
    pub tokens: TokenEncoder,
    pub entities: EntityEncoder,
    pub layout: LayoutProjection,
}

/// Graph handles of the general-domain stage.
#[derive(Debug, Clone, Copy)]
pub struct GdeVars {
    /// T̃: token encoder output plus L_T.
    pub tokens: Var,
    /// E: fused entity vectors.
    pub entities: Var,
}

impl GeneralEncoders {
    pub fn new(store: &mut ParamStore, cfg: &EncoderConfig) -> Self {
        GeneralEncoders {
            tokens: TokenEncoder::new(store, cfg),
            entities: EntityEncoder::new(store, cfg),
            layout: LayoutProjection::new(store, cfg),
        }
    }

    pub fn encode_tokens(&self, g: &mut Graph, feats: &DocFeatures) -> Var {
        if feats.n_tokens() == 0 {
            let h = g.params().value(self.tokens.positions).ncols();
            return g.constant(Mat::zeros((0, h)));
        }
        let t = self.tokens.forward(g, feats);
        let l = self.layout.forward(g, &feats.token_layout);
        g.add(t, l)
    }

    pub fn forward(&self, g: &mut Graph, feats: &DocFeatures) -> GdeVars {
        let tokens = self.encode_tokens(g, feats);
        let h = g.cols(tokens);
        let entities = if feats.n_entities() == 0 {
            g.constant(Mat::zeros((0, h)))
        } else {
            let visual = self.entities.visual(g, feats);
            let pool = g.pool_rows(tokens, feats.children.clone());
            let layout = self.layout.forward(g, &feats.entity_layout);
            self.entities.fuse(g, visual, pool, layout)
        };
        GdeVars { tokens, entities }
    }

    /// Query sequence encoding; errors on empty or over-long text.
    pub fn encode_query(
        &self,
        g: &mut Graph,
        text: &str,
        vocab: &Vocab,
        cfg: &EncoderConfig,
    ) -> Result<Var> {
        let ids = query_ids(text, vocab, cfg)?;
        Ok(self.tokens.forward_query(g, &ids))
    }
}

pub fn query_ids(text: &str, vocab: &Vocab, cfg: &EncoderConfig) -> Result<Vec<usize>> {
    let ids: Vec<usize> = vocab
        .encode(text)
        .into_iter()
        .map(|i| i.min(cfg.vocab_size - 1))
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyQuery);
    }
    if ids.len() > cfg.max_tokens {
        return Err(Error::Overflow {
            what: "query words",
            got: ids.len(),
            limit: cfg.max_tokens,
        });
    }
    Ok(ids)
}

/// Query sequence (q_len × hidden) with its mean-pooled vector.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEncoding {
    pub sequence: Mat,
    pub pooled: Mat,
}

/// Staged token representations T̃, T′, T″.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenStates {
    pub stage_gde: Mat,
    pub stage_joint: Mat,
    pub stage_decoder: Option<Mat>,
}

/// Staged entity representations E, E′, E″.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityStates {
    pub stage_fused: Mat,
    pub stage_joint: Mat,
    pub stage_decoder: Option<Mat>,
}
