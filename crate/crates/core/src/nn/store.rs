use super::table::EmbeddingTable;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a dense parameter tensor inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Handle to an embedding table inside a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TableId(pub(crate) usize);

/// Owns every learnable array of a model, in registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    tensor_names: Vec<String>,
    tensors: Vec<Tensor>,
    table_names: Vec<String>,
    tables: Vec<EmbeddingTable>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_tensor(&mut self, name: impl Into<String>, tensor: Tensor) -> ParamId {
        self.tensor_names.push(name.into());
        self.tensors.push(tensor.into_param());
        ParamId(self.tensors.len() - 1)
    }

    pub fn add_table(&mut self, name: impl Into<String>, table: EmbeddingTable) -> TableId {
        self.table_names.push(name.into());
        self.tables.push(table);
        TableId(self.tables.len() - 1)
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn table(&self, id: TableId) -> &EmbeddingTable {
        &self.tables[id.0]
    }

    pub fn table_mut(&mut self, id: TableId) -> &mut EmbeddingTable {
        &mut self.tables[id.0]
    }

    pub fn tensors(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensor_names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn tables(&self) -> impl Iterator<Item = (&str, &EmbeddingTable)> {
        self.table_names.iter().map(String::as_str).zip(&self.tables)
    }

    pub fn tensor_ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn table_ids(&self) -> impl Iterator<Item = TableId> {
        (0..self.tables.len()).map(TableId)
    }

    pub fn tensor_count(&self) -> usize {
        self.tensors.len()
    }

    pub fn table_count(&self) -> usize {
        self.tables.len()
    }

    pub fn tensor_name(&self, id: ParamId) -> &str {
        &self.tensor_names[id.0]
    }

    pub fn table_name(&self, id: TableId) -> &str {
        &self.table_names[id.0]
    }

    /// Looks up a dense parameter by name.
    pub fn find_tensor(&self, name: &str) -> Result<ParamId> {
        self.tensor_names
            .iter()
            .position(|n| n == name)
            .map(ParamId)
            .ok_or_else(|| Error::contract(format!("no parameter named `{name}`")))
    }

    pub fn zero_grad(&mut self) {
        for t in &mut self.tensors {
            t.zero_grad();
        }
        for t in &mut self.tables {
            t.zero_grad();
        }
    }

    pub(crate) fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub(crate) fn tables_mut(&mut self) -> &mut [EmbeddingTable] {
        &mut self.tables
    }

    /// Number of scalar parameters, counting every addressable table entry.
    pub fn parameter_count(&self) -> u64 {
        let dense: u64 = self.tensors.iter().map(|t| t.len() as u64).sum();
        let tables: u64 = self
            .tables
            .iter()
            .map(|t| u64::from(t.rows()) * t.width() as u64)
            .sum();
        dense + tables
    }
}
