#ifndef NOISEATTACK_STATS_HPP
#define NOISEATTACK_STATS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "noiseattack/common.hpp"

namespace noiseattack {

inline double median(std::vector<double> v) {
    if (v.empty()) throw InvalidInput("median: empty input");
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    double m = v[mid];
    if (v.size() % 2 == 0) {
        std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid) - 1, v.end());
        m = 0.5 * (m + v[mid - 1]);
    }
    return m;
}

/// Median absolute deviation (unscaled).
inline double mad(const std::vector<double>& v) {
    const double med = median(v);
    std::vector<double> dev(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
    return median(dev);
}

/// Normal-consistent MAD outlier score: |x - median| / (1.4826 * MAD).
/// When MAD is zero the score degenerates: values at the median get 0 and
/// any deviating value gets +infinity (an unambiguous outlier).
inline std::map<int, double> anomaly_index(const std::map<int, double>& values) {
    if (values.size() < 3) throw InvalidInput("anomaly_index: need at least 3 classes");
    std::vector<double> v;
    v.reserve(values.size());
    for (const auto& [cls, x] : values) v.push_back(x);
    const double med = median(v);
    const double scale = 1.4826 * mad(v);
    std::map<int, double> out;
    for (const auto& [cls, x] : values) {
        const double dev = std::abs(x - med);
        if (scale > 0.0)
            out[cls] = dev / scale;
        else
            out[cls] = dev == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return out;
}

/// Shannon entropy -sum p log p of one probability row (natural log).
/// Zero entries contribute zero.
inline double shannon_entropy(const std::vector<double>& probs) {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log(p);
    return h;
}

/// Histogram overlap coefficient of two samples: sum over shared bins of
/// min(p, q). 1 means indistinguishable histograms, 0 means disjoint
/// support. Bins span the pooled range.
inline double histogram_overlap(const std::vector<double>& a, const std::vector<double>& b,
                                int n_bins = 20) {
    if (a.empty() || b.empty()) throw InvalidInput("histogram_overlap: empty sample");
    if (n_bins < 1) throw InvalidParameter("histogram_overlap: n_bins must be positive");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (double x : a) { lo = std::min(lo, x); hi = std::max(hi, x); }
    for (double x : b) { lo = std::min(lo, x); hi = std::max(hi, x); }
    if (lo == hi) return 1.0;  // all mass in one bin for both samples
    std::vector<double> pa(static_cast<std::size_t>(n_bins), 0.0), pb(pa);
    auto bin_of = [&](double x) {
        auto k = static_cast<int>((x - lo) / (hi - lo) * n_bins);
        return std::clamp(k, 0, n_bins - 1);
    };
    for (double x : a) pa[static_cast<std::size_t>(bin_of(x))] += 1.0 / static_cast<double>(a.size());
    for (double x : b) pb[static_cast<std::size_t>(bin_of(x))] += 1.0 / static_cast<double>(b.size());
    double overlap = 0.0;
    for (int k = 0; k < n_bins; ++k)
        overlap += std::min(pa[static_cast<std::size_t>(k)], pb[static_cast<std::size_t>(k)]);
    return overlap;
}

inline double mean(const std::vector<double>& v) {
    if (v.empty()) throw InvalidInput("mean: empty input");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double stddev(const std::vector<double>& v) {
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return v.size() > 1 ? std::sqrt(s / static_cast<double>(v.size() - 1)) : 0.0;
}

}  // namespace noiseattack

#endif  // NOISEATTACK_STATS_HPP
