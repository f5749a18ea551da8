use std::collections::{BTreeSet, HashMap};

use crate::chunker::ChunkExample;

pub const BOS: usize = 0;
pub const EOS: usize = 1;
pub const PAD: usize = 2;
pub const UNK: usize = 3;
pub const NUM_SPECIALS: usize = 4;


/// Symbol ↔ id mapping. Ids 0..4 are BOS, EOS, PAD, UNK; characters follow
/// in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    symbol_to_id: HashMap<char, usize>,
    id_to_symbol: Vec<char>,
}

impl Vocabulary {
    pub fn build(examples: &[ChunkExample]) -> Self {
        let symbols: BTreeSet<char> = examples
            .iter()
            .flat_map(|e| e.source.iter().chain(&e.target).copied())
            .collect();
        Self::from_symbols(symbols)
    }

    pub fn from_symbols(symbols: impl IntoIterator<Item = char>) -> Self {
        let sorted: BTreeSet<char> = symbols.into_iter().collect();
        let id_to_symbol: Vec<char> = sorted.into_iter().collect();
        let symbol_to_id = id_to_symbol
            .iter()
            .enumerate()
            .map(|(i, c)| (*c, i + NUM_SPECIALS))
            .collect();
        Vocabulary { symbol_to_id, id_to_symbol }
    }

    /// Total number of ids including specials.
    pub fn len(&self) -> usize {
        self.id_to_symbol.len() + NUM_SPECIALS
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, symbol: char) -> usize {
        self.symbol_to_id.get(&symbol).copied().unwrap_or(UNK)
    }

    pub fn contains(&self, symbol: char) -> bool {
        self.symbol_to_id.contains_key(&symbol)
    }

    /// `None` for special ids.
    pub fn symbol(&self, id: usize) -> Option<char> {
        id.checked_sub(NUM_SPECIALS).and_then(|i| self.id_to_symbol.get(i).copied())
    }

    pub fn encode(&self, symbols: &[char]) -> Vec<usize> {
        symbols.iter().map(|&c| self.id(c)).collect()
    }

    pub fn decode(&self, ids: &[usize]) -> Vec<char> {
        ids.iter().filter_map(|&i| self.symbol(i)).collect()
    }

    /// Non-special symbols in id order.
    pub fn symbols(&self) -> &[char] {
        &self.id_to_symbol
    }
}
