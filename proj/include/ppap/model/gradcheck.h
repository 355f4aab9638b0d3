#pragma once

#include "ppap/model/config.h"

#include <cstdint>
#include <string>
#include <vector>

namespace ppap::model {

struct GradcheckOptions {
    ModelConfig config = ModelConfig::tiny();
    std::uint64_t seed = 0;
    double step = 1e-4;       // central-difference h
    double tolerance = 1e-4;  // max relative error per group
    double floor = 1e-5;      // relative-error denominator floor
    std::size_t batch = 3;
    // Test hook: scale the analytic gradient of this group by 1.01 so the
    // check must fail.
    std::string corrupt_group;
};

struct GroupReport {
    std::string group;  // parameter name up to the last '.'
    std::size_t checked = 0;
    double max_rel_error = 0.0;
    bool pass = true;
};

struct GradcheckReport {
    std::vector<GroupReport> groups;
    double max_rel_error = 0.0;
    bool pass = true;
};

// Full-model loss gradient vs central differences in 64-bit, train mode.
// The dropout rng is reseeded for every evaluation so the mask is fixed.
// Every trainable scalar is perturbed.
GradcheckReport gradient_check(const GradcheckOptions & options);

} // namespace ppap::model
