use std::ops::Index;
use std::sync::Arc;

use ndarray::Array2;

use super::graph::{Gradients, Graph, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

#[derive(Debug, Clone)]
struct Entry {
    name: String,
    value: Arc<Array2<f64>>,
    trainable: bool,
}

/// Named parameter tensors owned by one network.
///
/// Values are reference counted so binding them into a [`Graph`] is free;
/// updates copy-on-write only if a graph still holds the old value.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    entries: Vec<Entry>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Array2<f64>, trainable: bool) -> ParamId {
        let name = name.into();
        assert!(
            self.entries.iter().all(|e| e.name != name),
            "duplicate parameter name {name}"
        );
        self.entries.push(Entry {
            name,
            value: Arc::new(value),
            trainable,
        });
        ParamId(self.entries.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.entries[id.0].value
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Array2<f64> {
        Arc::make_mut(&mut self.entries[id.0].value)
    }

    pub fn is_trainable(&self, id: ParamId) -> bool {
        self.entries[id.0].trainable
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.entries.iter().position(|e| e.name == name).map(ParamId)
    }

    /// Scalar count over trainable tensors.
    pub fn num_parameters(&self) -> usize {
        self.entries.iter().filter(|e| e.trainable).map(|e| e.value.len()).sum()
    }

    /// FNV-1a over names and the bit patterns of every value.
    pub fn checksum(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |bytes: &[u8]| {
            for b in bytes {
                hash ^= *b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        for e in &self.entries {
            feed(e.name.as_bytes());
            for v in e.value.iter() {
                feed(&v.to_bits().to_le_bytes());
            }
        }
        hash
    }

    /// Puts every tensor on the tape. Only trainable tensors of a store bound
    /// with `track = true` receive gradients.
    pub fn bind(&self, graph: &mut Graph, track: bool) -> Bound {
        let vars = self
            .entries
            .iter()
            .map(|e| graph.shared_leaf(Arc::clone(&e.value), track && e.trainable))
            .collect();
        Bound { vars }
    }

    pub fn named(&self) -> impl Iterator<Item = (&str, &Array2<f64>)> {
        self.entries.iter().map(|e| (e.name.as_str(), e.value.as_ref()))
    }

    /// Overwrites values by name. Every parameter must be present with a matching shape.
    pub fn load_named<'a>(&mut self, values: impl IntoIterator<Item = (&'a str, &'a Array2<f64>)>) -> Result<()> {
        let mut filled = vec![false; self.entries.len()];
        for (name, value) in values {
            let Some(id) = self.find(name) else { continue };
            let entry = &mut self.entries[id.0];
            if entry.value.dim() != value.dim() {
                return Err(Error::config(format!(
                    "parameter {name} has shape {:?}, checkpoint holds {:?}",
                    entry.value.dim(),
                    value.dim()
                )));
            }
            entry.value = Arc::new(value.clone());
            filled[id.0] = true;
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            return Err(Error::config(format!(
                "checkpoint lacks parameter {}",
                self.entries[missing].name
            )));
        }
        Ok(())
    }
}

/// Tape handles for one store's tensors, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Bound {
    vars: Vec<Var>,
}

impl Index<ParamId> for Bound {
    type Output = Var;

    fn index(&self, id: ParamId) -> &Var {
        &self.vars[id.0]
    }
}

/// Gradient accumulator shaped like a store.
#[derive(Debug, Clone)]
pub struct ParamGrads {
    grads: Vec<Array2<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(store: &ParamStore) -> Self {
        Self {
            grads: store.entries.iter().map(|e| Array2::zeros(e.value.dim())).collect(),
        }
    }

    pub fn add_from(&mut self, bound: &Bound, gradients: &Gradients) {
        for (slot, var) in self.grads.iter_mut().zip(&bound.vars) {
            if let Some(g) = gradients.get(*var) {
                *slot += g;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for g in &mut self.grads {
            *g *= factor;
        }
    }

    pub fn get(&self, id: ParamId) -> &Array2<f64> {
        &self.grads[id.0]
    }

    pub fn norm(&self) -> f64 {
        self.grads.iter().flat_map(|g| g.iter()).map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.grads.iter().flat_map(|g| g.iter()).all(|v| v.is_finite())
    }
}
