#include "odor/eval/features.hpp"

#include <cmath>
#include <fstream>

namespace odor::eval {

template <typename T>
nn::Predictions export_features(nn::Model<T>& model, std::span<const SpectralFeatures> set,
                                const std::filesystem::path& path) {
    auto pred = nn::predict(model, set);
    std::ofstream out(path);
    if (!out) throw InvalidArgument("cannot write " + path.string());
    out.precision(9);
    out << "trial_id,label";
    for (std::size_t d = 0; d < pred.feature_dim; ++d) out << ",f" << d;
    out << '\n';
    for (std::size_t i = 0; i < set.size(); ++i) {
        out << set[i].trial_id << ',' << label_name(set[i].label);
        for (std::size_t d = 0; d < pred.feature_dim; ++d) out << ',' << pred.features[i * pred.feature_dim + d];
        out << '\n';
    }
    if (!out) throw InvalidArgument("write failed for " + path.string());
    return pred;
}

Separation feature_separation(std::span<const double> features, std::size_t dim, std::span<const Label> labels) {
    if (dim == 0 || features.size() != dim * labels.size())
        throw InvalidArgument("feature_separation: matrix does not match labels");
    std::vector<double> centroid[2] = {std::vector<double>(dim), std::vector<double>(dim)};
    std::size_t count[2] = {0, 0};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const int c = static_cast<int>(labels[i]);
        for (std::size_t d = 0; d < dim; ++d) centroid[c][d] += features[i * dim + d];
        ++count[c];
    }
    if (count[0] == 0 || count[1] == 0) throw InvalidArgument("feature_separation: both classes must be present");
    for (int c = 0; c < 2; ++c)
        for (auto& v : centroid[c]) v /= static_cast<double>(count[c]);

    auto distance = [dim](const double* a, const double* b) {
        double s = 0.0;
        for (std::size_t d = 0; d < dim; ++d) s += (a[d] - b[d]) * (a[d] - b[d]);
        return std::sqrt(s);
    };
    Separation s;
    s.centroid_distance = distance(centroid[0].data(), centroid[1].data());
    for (std::size_t i = 0; i < labels.size(); ++i)
        s.within_class += distance(features.data() + i * dim, centroid[static_cast<int>(labels[i])].data());
    s.within_class /= static_cast<double>(labels.size());
    return s;
}

template nn::Predictions export_features<float>(nn::Model<float>&, std::span<const SpectralFeatures>,
                                                const std::filesystem::path&);
template nn::Predictions export_features<double>(nn::Model<double>&, std::span<const SpectralFeatures>,
                                                 const std::filesystem::path&);

}  // namespace odor::eval
