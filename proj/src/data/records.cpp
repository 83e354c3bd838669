#include "odor/data/records.hpp"

#include "odor/core/errors.hpp"

namespace odor {

std::string_view label_name(Label label) {
    return label == Label::odor ? "odor" : "blank";
}

Label parse_label(std::string_view text) {
    if (text == "odor" || text == "1") return Label::odor;
    if (text == "blank" || text == "0") return Label::blank;
    throw InvalidArgument("unknown label '" + std::string(text) + "' (expected odor or blank)");
}

void TrialRecord::validate() const {
    if (sample_rate_hz <= 0.0) throw InvalidArgument("trial " + trial_id + ": sample rate must be positive");
    if (channels == 0 || samples == 0) throw InvalidArgument("trial " + trial_id + ": empty signal");
    if (data.size() != channels * samples)
        throw InvalidArgument("trial " + trial_id + ": channels have unequal length");
}

}  // namespace odor
