#pragma once

#include <array>

namespace ppap::data {

// Likert 1..5 in circumplex order.
enum RatingIndex : std::size_t {
    kPleasant = 0,
    kEventful,
    kUneventful,
    kChaotic,
    kVibrant,
    kCalm,
    kAnnoying,
    kMonotonous,
};

using Ratings = std::array<int, 8>;

// ISO/TS 12913-3 pleasantness projection scaled to [-1, 1]. Eventful and
// uneventful do not enter. Throws DataError on a rating outside 1..5.
double iso_pleasantness(const Ratings & ratings);

} // namespace ppap::data
