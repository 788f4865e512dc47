use serde::Serialize;

/// A value together with the spread caused by ambiguous inputs (several
/// candidate cards, several producer countries).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EstimateInterval<T> {
    pub min: T,
    pub reference: T,
    pub max: T,
}

impl<T: Copy> EstimateInterval<T> {
    pub fn degenerate(value: T) -> Self {
        Self {
            min: value,
            reference: value,
            max: value,
        }
    }

    pub fn map<U>(self, f: impl Fn(T) -> U) -> EstimateInterval<U> {
        EstimateInterval {
            min: f(self.min),
            reference: f(self.reference),
            max: f(self.max),
        }
    }
}

impl EstimateInterval<f64> {
    /// Spans `values`, with `reference` as the reference point. `reference`
    /// is included in the span.
    pub fn spanning(reference: f64, values: impl IntoIterator<Item = f64>) -> Self {
        let mut out = Self::degenerate(reference);
        for v in values {
            out.min = out.min.min(v);
            out.max = out.max.max(v);
        }
        out
    }

    pub fn is_ordered(&self) -> bool {
        self.min <= self.reference && self.reference <= self.max
    }
}
