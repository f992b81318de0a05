//! Vectorised map encoding: every lane segment is embedded by a seeded
//! two-layer map, a polyline's feature is the coordinate-wise max over its
//! segments, and the features are fused into the queries by cross attention.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;
use crate::query_bank::{cross_attention_update, stack_rows, AttentionParams};
use crate::scenario::{MapPolyline, MapSegment};

/// `[start.x, start.y, end.x, end.y, attribute, ordinal]`.
pub const SEGMENT_DIMS: usize = 6;
const COORD_SCALE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub struct MapEncoderParams {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
}

impl MapEncoderParams {
    pub fn seeded(d_h: usize, seed: u64) -> Self {
        let mut rng = math::rng_from(math::derive_seed(seed, &[0x3A9]));
        let b_in = math::init_bound(SEGMENT_DIMS);
        let b_h = math::init_bound(d_h);
        Self {
            w1: math::uniform_matrix(&mut rng, d_h, SEGMENT_DIMS, b_in),
            b1: math::uniform_vector(&mut rng, d_h, b_in),
            w2: math::uniform_matrix(&mut rng, d_h, d_h, b_h),
            b2: math::uniform_vector(&mut rng, d_h, b_h),
        }
    }

    pub fn d_h(&self) -> usize {
        self.b2.len()
    }
}

pub fn segment_vector(seg: &MapSegment) -> DVector<f64> {
    DVector::from_row_slice(&[
        seg.start.x / COORD_SCALE,
        seg.start.y / COORD_SCALE,
        seg.end.x / COORD_SCALE,
        seg.end.y / COORD_SCALE,
        seg.attribute as f64,
        seg.ordinal as f64,
    ])
}

pub fn embed_segment(seg: &MapSegment, params: &MapEncoderParams) -> DVector<f64> {
    let h = (&params.w1 * segment_vector(seg) + &params.b1).map(|v| v.max(0.0));
    &params.w2 * h + &params.b2
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MapFeatureSet {
    pub features: Vec<DVector<f64>>,
    /// Polylines without segments, left out of `features`.
    pub skipped_empty: usize,
}

impl MapFeatureSet {
    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }
}

pub fn encode_polylines(polylines: &[MapPolyline], params: &MapEncoderParams) -> MapFeatureSet {
    let mut set = MapFeatureSet::default();
    for poly in polylines {
        let mut acc: Option<DVector<f64>> = None;
        for seg in &poly.segments {
            let e = embed_segment(seg, params);
            acc = Some(match acc {
                Some(a) => a.zip_map(&e, f64::max),
                None => e,
            });
        }
        match acc {
            Some(f) => set.features.push(f),
            None => set.skipped_empty += 1,
        }
    }
    set
}

/// `Q' = Attention(Q, M)`; identity when the map is empty.
pub fn fuse_map(queries: &DMatrix<f64>, map: &MapFeatureSet, params: &AttentionParams) -> Result<DMatrix<f64>> {
    if map.is_empty() {
        if queries.ncols() != params.d_h {
            return Err(Error::invalid("query width does not match map attention"));
        }
        return Ok(queries.clone());
    }
    let kv = stack_rows(&map.features, params.d_h);
    if map.features.iter().any(|f| f.len() != params.d_h) {
        return Err(Error::invalid("map feature width does not match map attention"));
    }
    Ok(cross_attention_update(queries, &kv, params)?.queries)
}
