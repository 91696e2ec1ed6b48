#pragma once

#include <filesystem>

#include "crackdet/dataset.hpp"
#include "crackdet/rng.hpp"

namespace crackdet {

// Synthetic crack imagery: dark random-walk strokes rasterized onto a
// textured light background, with the exact stroke coverage as mask. Stands
// in for full-scale crack datasets at desk scale; the salient property kept
// is the heavy class imbalance (crack pixels a few percent at most).
struct SyntheticSpec {
    int count = 200;
    int size = 64;
    int min_strokes = 1;
    int max_strokes = 3;
    double min_width = 1.0;  // px
    double max_width = 3.0;
    double crack_ratio_target = 0.015;  // fraction of pixels, in (0, 0.5)
    // per-image stroke darkness is drawn from this range; the upper end sits
    // close to the textured background, so a slice of the population carries
    // barely visible cracks the way real surface imagery does
    double min_stroke_level = 0.05;
    double max_stroke_level = 0.50;
    // dark non-crack streaks (stains, joints, shadow edges) rendered like
    // strokes but absent from the mask; their darkness overlaps the faint end
    // of the crack range, so some pixels stay genuinely ambiguous
    int min_distractors = 0;
    int max_distractors = 0;
    // maxima; each image draws a murk factor in [0.2, 1] scaling both
    double texture_amplitude = 0.20;
    double noise_sigma = 0.06;
    std::uint64_t seed = 0;

    void validate() const {
        if (count < 0 || size < 1) throw ConfigInvalid("bad synthetic count/size");
        if (min_strokes < 0 || max_strokes < min_strokes) throw ConfigInvalid("bad stroke count range");
        if (!(min_width >= 1.0 && max_width >= min_width)) throw ConfigInvalid("stroke width must be >= 1");
        if (!(crack_ratio_target > 0.0 && crack_ratio_target < 0.5))
            throw ConfigInvalid("crack ratio target must be in (0, 0.5)");
        if (!(min_stroke_level >= 0.0 && max_stroke_level >= min_stroke_level &&
              max_stroke_level < 1.0))
            throw ConfigInvalid("bad stroke level range");
        if (min_distractors < 0 || max_distractors < min_distractors)
            throw ConfigInvalid("bad distractor count range");
        if (texture_amplitude < 0.0 || noise_sigma < 0.0)
            throw ConfigInvalid("texture/noise amplitudes must be non-negative");
    }
};

// Deterministic per (spec.seed, index).
Sample synthesize_sample(const SyntheticSpec& spec, int index);

// Writes `img####.png` + `img####.mask.png` pairs into out_dir.
void generate_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

}  // namespace crackdet
