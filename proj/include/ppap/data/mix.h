#pragma once

#include "ppap/calib/calibration.h"
#include "ppap/dsp/audio.h"

namespace ppap::data {

struct MixResult {
    dsp::AudioClip mixture;
    std::size_t clipped = 0;
};

// soundscape + gain * masker, clipped to full scale. A mono masker is added
// to every soundscape channel. Throws DataError on a length, rate or channel
// mismatch.
MixResult mix_with_gain(const dsp::AudioClip & soundscape, const dsp::AudioClip & masker, double gain);

// mix_with_gain at smr_to_gain(table, scene, smr).
MixResult mix_at_smr(const dsp::AudioClip & soundscape, const dsp::AudioClip & masker,
                     const calib::GainLookupTable & table, const calib::SceneMeta & scene, double smr);

} // namespace ppap::data
