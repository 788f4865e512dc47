//! Card-name normalisation shared by merging and reference resolution.

const VENDOR_TOKENS: &[&str] = &[
    "nvidia", "google", "amd", "huawei", "cerebras", "intel", "tesla",
];

/// A card name reduced to comparable tokens: lower case, punctuation
/// removed, vendor prefixes dropped, and `40 GB` folded into `40gb`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NormalizedName(Vec<String>);

impl NormalizedName {
    pub fn new(raw: &str) -> Self {
        let lowered = raw.to_lowercase();
        let cleaned: String = lowered
            .chars()
            .map(|c| if c.is_alphanumeric() { c } else { ' ' })
            .collect();
        let mut tokens: Vec<String> = Vec::new();
        for tok in cleaned.split_whitespace() {
            // leading vendor words may repeat, e.g. "NVIDIA Tesla V100"
            if tokens.is_empty() && VENDOR_TOKENS.contains(&tok) {
                continue;
            }
            if tok == "gb" {
                if let Some(last) = tokens.last_mut() {
                    if last.chars().all(|c| c.is_ascii_digit()) {
                        last.push_str("gb");
                        continue;
                    }
                }
            }
            tokens.push(tok.to_string());
        }
        NormalizedName(tokens)
    }

    pub fn key(&self) -> String {
        self.0.join(" ")
    }

    fn compact(&self) -> String {
        self.0.concat()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Exact match ignoring token boundaries ("TPUv3" equals "TPU v3").
    pub fn matches_exactly(&self, other: &NormalizedName) -> bool {
        self.compact() == other.compact()
    }

    /// `self` names a family that `candidate` belongs to: the compacted
    /// query equals the compaction of a leading run of candidate tokens.
    pub fn is_family_of(&self, candidate: &NormalizedName) -> bool {
        let target = self.compact();
        if target.is_empty() {
            return false;
        }
        let mut acc = String::new();
        for tok in &candidate.0 {
            acc.push_str(tok);
            if acc == target {
                return true;
            }
            if acc.len() >= target.len() {
                return false;
            }
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        assert_eq!(NormalizedName::new("NVIDIA  Tesla V100-SXM2 32 GB").key(), "v100 sxm2 32gb");
        assert_eq!(NormalizedName::new("Google TPU v3").key(), "tpu v3");
        assert_eq!(NormalizedName::new("a100 sxm4 40gb").key(), "a100 sxm4 40gb");
    }

    #[test]
    fn family_matching_respects_token_boundaries() {
        let a100 = NormalizedName::new("A100");
        assert!(a100.is_family_of(&NormalizedName::new("A100 PCIe 40GB")));
        assert!(!NormalizedName::new("A10").is_family_of(&NormalizedName::new("A100 PCIe 40GB")));
        assert!(NormalizedName::new("TPUv3").is_family_of(&NormalizedName::new("TPU v3")));
        assert!(NormalizedName::new("TPUv3").matches_exactly(&NormalizedName::new("TPU v3")));
    }
}
