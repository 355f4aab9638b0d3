#include "ppap/data/pleasantness.h"

#include "ppap/common/error.h"

#include <cmath>
#include <string>

namespace ppap::data {

double iso_pleasantness(const Ratings & ratings) {
    for (std::size_t i = 0; i < ratings.size(); ++i) {
        if (ratings[i] < 1 || ratings[i] > 5) {
            throw DataError("rating " + std::to_string(i) + " is " + std::to_string(ratings[i]) + ", expected 1..5");
        }
    }
    auto c = [&](RatingIndex i) { return static_cast<double>(ratings[i] - 3); };
    const double h = std::sqrt(2.0) / 2.0;
    const double raw = c(kPleasant) - c(kAnnoying) + h * (c(kCalm) - c(kChaotic) + c(kVibrant) - c(kMonotonous));
    return raw / (4.0 + 4.0 * std::sqrt(2.0));
}

} // namespace ppap::data
