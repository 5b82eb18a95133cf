//! Compression methods behind one trait, selectable by name.

use nalgebra::DMatrix;

use super::{
    build_ensemble, expand_bbit, min_hash_with, random_projection, random_sign_matrix, HashConfig, HashEnsemble,
    HashOutput, MinHashOptions, Variant,
};
use crate::error::{invalid, Error, Result};
use crate::sparse::SparseMatrix;

/// Output of a compressor: the dense design `S` plus hashing state when applicable.
#[derive(Debug, Clone)]
pub struct Compressed {
    pub s: DMatrix<f64>,
    pub hash: Option<HashOutput>,
    pub ensemble: Option<HashEnsemble>,
}

pub trait Compressor: Send + Sync {
    fn name(&self) -> &'static str;
    fn compress(&self, x: &SparseMatrix, cfg: &HashConfig) -> Result<Compressed>;
}

struct MinHashCompressor(Variant);

impl Compressor for MinHashCompressor {
    fn name(&self) -> &'static str {
        self.0.name()
    }

    fn compress(&self, x: &SparseMatrix, cfg: &HashConfig) -> Result<Compressed> {
        if self.0.is_bbit() && !x.is_binary() {
            return Err(Error::Incompatible(format!("{} hashing discards values and needs a binary design", self.0)));
        }
        let cfg = HashConfig { variant: self.0, ..cfg.clone() };
        let e = build_ensemble(&cfg, x.n_cols())?;
        let out = min_hash_with(x, &e, MinHashOptions { materialize_ranks: self.0.is_bbit() })?;
        let s = if self.0.is_bbit() { expand_bbit(&out, &e)?.to_dense() } else { random_sign_matrix(x, &out, &e)? };
        Ok(Compressed { s, hash: Some(out), ensemble: Some(e) })
    }
}

struct ProjectionCompressor;

impl Compressor for ProjectionCompressor {
    fn name(&self) -> &'static str {
        "random-projection"
    }

    fn compress(&self, x: &SparseMatrix, cfg: &HashConfig) -> Result<Compressed> {
        Ok(Compressed { s: random_projection(x, cfg.l, cfg.seed)?, hash: None, ensemble: None })
    }
}

pub struct CompressorRegistry {
    entries: Vec<Box<dyn Compressor>>,
}

impl Default for CompressorRegistry {
    fn default() -> Self {
        let mut r = Self { entries: Vec::new() };
        r.register(Box::new(MinHashCompressor(Variant::BBitPlain)));
        r.register(Box::new(MinHashCompressor(Variant::BBitShuffled)));
        r.register(Box::new(MinHashCompressor(Variant::RandomSign)));
        r.register(Box::new(ProjectionCompressor));
        r
    }
}

impl CompressorRegistry {
    /// Add or replace a compressor under its name.
    pub fn register(&mut self, c: Box<dyn Compressor>) {
        self.entries.retain(|e| e.name() != c.name());
        self.entries.push(c);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Compressor> {
        match self.entries.iter().find(|e| e.name() == name) {
            Some(c) => Ok(c.as_ref()),
            None => invalid(format!("unknown compressor `{name}`; known: {}", self.names().join(", "))),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}
