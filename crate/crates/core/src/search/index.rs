use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::catalog::Catalog;

use super::embed::Embedder;
use super::SearchError;

#[derive(Debug, Clone, PartialEq)]
pub struct IndexEntry {
    pub name: String,
    pub category: String,
    pub vector: Vec<f32>,
}

/// Exact-scan vector index over specific-tool descriptions. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    entries: Vec<IndexEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub name: String,
    pub similarity: f64,
}

impl VectorIndex {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, category: impl Into<String>, vector: Vec<f32>) -> Result<(), SearchError> {
        if vector.len() != self.dim {
            return Err(SearchError::DimensionMismatch {
                expected: self.dim,
                found: vector.len(),
            });
        }
        self.entries.push(IndexEntry {
            name: name.into(),
            category: category.into(),
            vector,
        });
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[IndexEntry] {
        &self.entries
    }
}

/// Embeds the description of every specific tool in catalog order.
pub fn index_catalog(catalog: &Catalog, embedder: &dyn Embedder) -> Result<VectorIndex, SearchError> {
    let mut index = VectorIndex::new(embedder.dim());
    for spec in catalog.specific_specs() {
        let vector = embedder.embed(&spec.description).map_err(|e| SearchError::Embed {
            tool: spec.name.clone(),
            reason: e.0,
        })?;
        index.push(spec.name.clone(), spec.category.clone(), vector)?;
    }
    Ok(index)
}

/// Cosine similarity accumulated in f64; 0 when either side has zero norm.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (mut dot, mut na, mut nb) = (0f64, 0f64, 0f64);
    for (x, y) in a.iter().zip(b) {
        let (x, y) = (f64::from(*x), f64::from(*y));
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0)
}

/// Heap entry ordered so the heap top is the *worst* kept candidate.
struct Worst<'a> {
    similarity: f64,
    name: &'a str,
}

impl Ord for Worst<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        // Better = higher similarity, then smaller name. The max-heap keeps
        // the worst on top, so "greater" here means "ranks lower".
        other
            .similarity
            .total_cmp(&self.similarity)
            .then_with(|| self.name.cmp(other.name))
    }
}

impl PartialOrd for Worst<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Worst<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Worst<'_> {}

/// Top-`k` entries by cosine similarity among those accepted by `filter`.
///
/// Descending similarity, ties broken by ascending name.
pub fn cosine_topk_filtered(
    index: &VectorIndex,
    query: &[f32],
    k: usize,
    filter: impl Fn(&IndexEntry) -> bool,
) -> Result<Vec<Scored>, SearchError> {
    if query.len() != index.dim {
        return Err(SearchError::DimensionMismatch {
            expected: index.dim,
            found: query.len(),
        });
    }
    if k == 0 {
        return Err(SearchError::InvalidK);
    }
    let mut heap: BinaryHeap<Worst<'_>> = BinaryHeap::with_capacity(k + 1);
    for entry in index.entries.iter().filter(|e| filter(e)) {
        let candidate = Worst {
            similarity: cosine(&entry.vector, query),
            name: &entry.name,
        };
        if heap.len() < k {
            heap.push(candidate);
        } else if let Some(worst) = heap.peek() {
            if candidate < *worst {
                heap.pop();
                heap.push(candidate);
            }
        }
    }
    // Ascending `Worst` order is best-first.
    Ok(heap
        .into_sorted_vec()
        .into_iter()
        .map(|w| Scored {
            name: w.name.to_string(),
            similarity: w.similarity,
        })
        .collect())
}

pub fn cosine_topk(index: &VectorIndex, query: &[f32], k: usize) -> Result<Vec<Scored>, SearchError> {
    cosine_topk_filtered(index, query, k, |_| true)
}
