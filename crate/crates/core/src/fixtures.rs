//! Bundled dataset: three hand-labeled two-voice chorale-style excerpts.
//!
//! Each has a soprano and an alto phrase split into one phrase per measure,
//! and a measure / crotchet / semiquaver metrical tree in 4/4.

use crate::graph::ParseGraph;
use crate::io::load_pg;

/// `(file name, document text)` of every bundled chorale.
pub const CHORALE_DOCUMENTS: [(&str, &str); 3] = [
    ("chorale-1.json", include_str!("../data/chorales/chorale-1.json")),
    ("chorale-2.json", include_str!("../data/chorales/chorale-2.json")),
    ("chorale-3.json", include_str!("../data/chorales/chorale-3.json")),
];

/// The bundled chorales, loaded and relation-deduced.
pub fn chorales() -> Vec<ParseGraph> {
    CHORALE_DOCUMENTS
        .iter()
        .map(|(name, text)| load_pg(text).unwrap_or_else(|e| panic!("bundled fixture {name} is invalid: {e}")))
        .collect()
}

/// The first bundled chorale.
pub fn chorale() -> ParseGraph {
    chorales().swap_remove(0)
}
