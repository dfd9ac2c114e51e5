//! Shared test data: a synthetic five-class corpus of short lowercase
//! feeling statements with a controlled signal structure.
//!
//! Construction per text: common filler words (low IDF) carry no class
//! signal; one or two class cue words (rare, high IDF) determine the
//! label; decoy words are exactly as rare as the cues but uncorrelated
//! with any class. The TF-IDF gate can separate rare from common but not
//! cue from decoy (both have near-identical IDF); content-based attention
//! can. That asymmetry is what the ablation criteria measure.

use std::io::Write as _;
use std::path::Path;

use emoseq::rng::SplitMix64;

pub const CLASS_NAMES: [&str; 5] = ["anger", "fear", "joy", "sadness", "surprise"];

pub const CUES: [[&str; 6]; 5] = [
    ["furious", "rage", "irritated", "resentful", "fuming", "bitter"],
    ["terrified", "anxious", "panicked", "uneasy", "dread", "jittery"],
    ["ecstatic", "delighted", "cheerful", "thrilled", "gleeful", "sunny"],
    ["heartbroken", "gloomy", "mournful", "weary", "hopeless", "downcast"],
    ["astonished", "startled", "stunned", "amazed", "shocked", "speechless"],
];

pub const DECOYS: [&str; 30] = [
    "library", "scrabble", "tree", "roots", "graduated", "students", "kitchen", "window",
    "garden", "letter", "coffee", "river", "mountain", "bicycle", "umbrella", "notebook",
    "puzzle", "ladder", "mirror", "candle", "blanket", "doorway", "hallway", "pocket",
    "sunset", "station", "bridge", "marble", "compass", "lantern",
];

pub const FILLERS: [&str; 15] = [
    "i", "feel", "im", "feeling", "and", "the", "a", "so", "very", "like", "that", "it",
    "was", "really", "just",
];

pub struct SynthSpec {
    pub n: usize,
    pub seed: u64,
    pub min_len: usize,
    pub max_len: usize,
    /// Decoys per text are drawn from 1..=this.
    pub max_decoys: usize,
    pub second_cue_prob: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 2000,
            seed: 1234,
            min_len: 10,
            max_len: 16,
            max_decoys: 2,
            second_cue_prob: 0.3,
        }
    }
}

/// Balanced labeled corpus; row order interleaves classes (the pipeline's
/// seeded split reshuffles anyway).
pub fn synth_corpus(spec: &SynthSpec) -> Vec<(String, usize)> {
    assert!(spec.min_len >= 6 && spec.max_len >= spec.min_len);
    let mut rng = SplitMix64::new(spec.seed);
    let mut rows = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let label = i % CLASS_NAMES.len();
        let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
        let mut toks: Vec<&str> = (0..len).map(|_| FILLERS[rng.below(FILLERS.len())]).collect();
        let mut taken = vec![false; len];
        let place = |rng: &mut SplitMix64, taken: &mut Vec<bool>, toks: &mut Vec<&str>, w| {
            loop {
                let p = rng.below(len);
                if !taken[p] {
                    taken[p] = true;
                    toks[p] = w;
                    break;
                }
            }
        };
        let cue = CUES[label][rng.below(6)];
        place(&mut rng, &mut taken, &mut toks, cue);
        if rng.next_f64() < spec.second_cue_prob {
            let cue = CUES[label][rng.below(6)];
            place(&mut rng, &mut taken, &mut toks, cue);
        }
        let n_decoys = 1 + rng.below(spec.max_decoys);
        for _ in 0..n_decoys {
            let decoy = DECOYS[rng.below(DECOYS.len())];
            place(&mut rng, &mut taken, &mut toks, decoy);
        }
        rows.push((toks.join(" "), label));
    }
    rows
}

pub fn write_csv(path: &Path, rows: &[(String, usize)]) {
    let mut f = std::fs::File::create(path).expect("create csv");
    writeln!(f, "text,label").unwrap();
    for (text, label) in rows {
        writeln!(f, "{text},{label}").unwrap();
    }
}
