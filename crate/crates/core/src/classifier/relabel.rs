use super::model::{PartialExample, SoftmaxModel};

#[derive(Debug, Clone, PartialEq)]
pub struct RelabelOutcome {
    pub examples: Vec<PartialExample>,
    /// Indices of examples left as they were because none of their
    /// candidates received a prototype.
    pub unchanged: Vec<usize>,
    /// Per-label prototype, `None` when no example was assigned the label.
    pub prototypes: Vec<Option<Vec<f64>>>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Collapses every example to the single candidate whose prototype is
/// nearest.
///
/// Each example is first assigned the model's most probable label among its
/// original candidates; a label's prototype is the mean feature vector of
/// the examples assigned to it. Each example then takes the candidate (from
/// its original set) with the nearest prototype in Euclidean distance, ties
/// going to the lower label index. The original set is kept on the example.
pub fn prototype_relabel(model: &SoftmaxModel, examples: &[PartialExample]) -> RelabelOutcome {
    let n_labels = model.labels.len();
    let dim = model.dim;
    let mut sums = vec![vec![0.0; dim]; n_labels];
    let mut counts = vec![0usize; n_labels];
    for ex in examples {
        let p = model.probs(&ex.x);
        let mut best = ex.original[0];
        for &y in &ex.original[1..] {
            if p[y] > p[best] {
                best = y;
            }
        }
        counts[best] += 1;
        for (s, x) in sums[best].iter_mut().zip(&ex.x) {
            *s += x;
        }
    }
    let prototypes: Vec<Option<Vec<f64>>> = sums
        .into_iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s.into_iter().map(|v| v / c as f64).collect()))
        .collect();

    let mut unchanged = Vec::new();
    let out = examples
        .iter()
        .enumerate()
        .map(|(i, ex)| {
            let mut best: Option<(f64, usize)> = None;
            for &y in &ex.original {
                if let Some(proto) = &prototypes[y] {
                    let d = sq_dist(&ex.x, proto);
                    if best.is_none_or(|(bd, _)| d < bd) {
                        best = Some((d, y));
                    }
                }
            }
            let mut ex = ex.clone();
            match best {
                Some((_, y)) => ex.candidates = vec![y],
                None => unchanged.push(i),
            }
            ex
        })
        .collect();
    RelabelOutcome {
        examples: out,
        unchanged,
        prototypes,
    }
}
