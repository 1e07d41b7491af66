use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::ply::{write_ply, PlyEncoding, PlyModel};

/// Default vertex budget for web previews.
pub const PREVIEW_DEFAULT_TARGET: usize = 50_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecimateError {
    #[error("TARGET_ZERO: the vertex target must be positive")]
    TargetZero,
    #[error("NO_VERTEX_ELEMENT: the model has no 'vertex' element")]
    NoVertexElement,
}

impl DecimateError {
    pub fn code(&self) -> &'static str {
        match self {
            DecimateError::TargetZero => "TARGET_ZERO",
            DecimateError::NoVertexElement => "NO_VERTEX_ELEMENT",
        }
    }
}

/// Uniformly subsamples the vertex element down to `target` vertices
/// (reservoir sampling), keeping their original order. Every other element
/// is dropped, since faces would index vertices that no longer exist.
pub fn decimate(model: &PlyModel, target: usize, seed: u64) -> Result<PlyModel, DecimateError> {
    if target == 0 {
        return Err(DecimateError::TargetZero);
    }
    let vertex = model.element("vertex").ok_or(DecimateError::NoVertexElement)?;
    let n = vertex.rows.len();

    let keep: Vec<usize> = if target >= n {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut reservoir: Vec<usize> = (0..target).collect();
        for i in target..n {
            let j = rng.random_range(0..=i as u64) as usize;
            if j < target {
                reservoir[j] = i;
            }
        }
        reservoir.sort_unstable();
        reservoir
    };

    let mut out_vertex = vertex.clone();
    out_vertex.rows = keep.into_iter().map(|i| vertex.rows[i].clone()).collect();
    Ok(PlyModel {
        encoding: model.encoding,
        version: model.version.clone(),
        comments: model.comments.clone(),
        obj_info: model.obj_info.clone(),
        elements: vec![out_vertex],
    })
}

pub fn preview_file_name(object_id: u64) -> String {
    format!("{object_id}.preview.ply")
}

/// Decimates and serializes a preview as binary little endian PLY.
pub fn make_preview(
    model: &PlyModel,
    object_id: u64,
    target: usize,
    seed: u64,
) -> Result<(String, Vec<u8>), DecimateError> {
    let mut small = decimate(model, target, seed)?;
    small.encoding = PlyEncoding::BinaryLittleEndian;
    Ok((preview_file_name(object_id), write_ply(&small, PlyEncoding::BinaryLittleEndian)))
}
