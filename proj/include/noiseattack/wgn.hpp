#ifndef NOISEATTACK_WGN_HPP
#define NOISEATTACK_WGN_HPP

#include <Eigen/Dense>

#include <cstdint>
#include <fstream>
#include <string>

#include "noiseattack/common.hpp"
#include "noiseattack/image.hpp"

namespace noiseattack {

/// One realization of a white-Gaussian-noise plane on the 0-255 intensity
/// scale. Regenerating with identical (rows, cols, sigma, seed) is
/// bit-identical, across process restarts.
template <typename Scalar>
struct NoiseField {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

    Matrix values;  // rows x cols, entry (i,j) = draw i*cols + j of the stream
    Scalar sigma = Scalar(0);
    std::uint64_t seed = 0;
};

enum class SeedPolicy { kFixed, kFreshPerSample };
enum class ChannelMode { kReplicate, kIndependentPerChannel };

/// How one WGN trigger realization is produced and applied.
struct TriggerSpec {
    double sigma = 0.0;  // std-dev in pixel-intensity units (0-255 scale)
    SeedPolicy seed_policy = SeedPolicy::kFreshPerSample;
    double clip_lo = 0.0;
    double clip_hi = 255.0;
    // Default replicates one spatial plane across channels; independent
    // per-channel noise is an opt-in variant.
    ChannelMode channel_mode = ChannelMode::kReplicate;

    void validate() const {
        if (sigma < 0.0) throw InvalidParameter("TriggerSpec: sigma must be nonnegative");
        if (!(clip_lo < clip_hi)) throw InvalidParameter("TriggerSpec: clip_lo must be < clip_hi");
    }
};

/// Averaged periodogram of the noise generator. For white noise the power
/// is flat and equals sigma^2 at every normalized frequency.
struct SpectrumEstimate {
    Eigen::VectorXd frequencies;  // normalized, in [0, 0.5]
    Eigen::VectorXd power;        // intensity^2 units, nonnegative
    int n_realizations = 0;
};

/// Draws an a x b field of i.i.d. N(0, sigma^2) samples in raster order:
/// entry (i, j) is draw number i*b + j.
template <typename Scalar = float>
NoiseField<Scalar> sample_wgn(int a, int b, double sigma, std::uint64_t seed) {
    if (a <= 0 || b <= 0) throw InvalidParameter("sample_wgn: field shape must be positive");
    if (sigma < 0.0) throw InvalidParameter("sample_wgn: sigma must be nonnegative");
    NoiseField<Scalar> field;
    field.sigma = static_cast<Scalar>(sigma);
    field.seed = seed;
    field.values.resize(a, b);
    GaussianStream g(seed);
    Scalar* p = field.values.data();  // row-major: sequential fill is raster order
    const Eigen::Index n = field.values.size();
    for (Eigen::Index i = 0; i < n; ++i) p[i] = static_cast<Scalar>(g.next(sigma));
    return field;
}

/// Builds the a x b x cc trigger tensor: a single noise plane replicated
/// identically across all cc channels.
template <typename Scalar = float>
Image<Scalar> build_trigger_matrix(int a, int b, int cc, double sigma, std::uint64_t seed) {
    if (cc != 1 && cc != 3) throw InvalidParameter("build_trigger_matrix: cc must be 1 or 3");
    const NoiseField<Scalar> field = sample_wgn<Scalar>(a, b, sigma, seed);
    Image<Scalar> out(a, b, cc);
    for (int c = 0; c < cc; ++c) out.plane(c) = field.values;
    return out;
}

/// Adds a prebuilt noise plane to every channel of the image and clamps to
/// [clip_lo, clip_hi].
template <typename Scalar>
Image<Scalar> apply_trigger(const Image<Scalar>& image, const NoiseField<Scalar>& field,
                            double clip_lo = 0.0, double clip_hi = 255.0) {
    if (field.values.rows() != image.height || field.values.cols() != image.width)
        throw InvalidParameter("apply_trigger: noise shape does not match image shape");
    Image<Scalar> out = image;
    for (int c = 0; c < out.channels; ++c) out.plane(c) += field.values;
    out.clamp(static_cast<Scalar>(clip_lo), static_cast<Scalar>(clip_hi));
    return out;
}

/// Triggers an image per spec: output = clamp(image + X(sigma), clip).
/// sigma == 0 returns the image unchanged.
template <typename Scalar>
Image<Scalar> apply_trigger(const Image<Scalar>& image, const TriggerSpec& spec, std::uint64_t seed) {
    spec.validate();
    const auto lo = static_cast<Scalar>(spec.clip_lo);
    const auto hi = static_cast<Scalar>(spec.clip_hi);
    if ((image.data.array() < lo).any() || (image.data.array() > hi).any())
        throw InvalidParameter("apply_trigger: image values outside clip range");
    if (spec.channel_mode == ChannelMode::kReplicate)
        return apply_trigger(image, sample_wgn<Scalar>(image.height, image.width, spec.sigma, seed),
                             spec.clip_lo, spec.clip_hi);
    Image<Scalar> out = image;
    for (int c = 0; c < out.channels; ++c) {
        const auto field = sample_wgn<Scalar>(image.height, image.width, spec.sigma,
                                              derive_seed(seed, {static_cast<std::uint64_t>(c)}));
        out.plane(c) += field.values;
    }
    out.clamp(lo, hi);
    return out;
}

/// Averaged periodogram over n_realizations independent length-point
/// realizations: P[k] = E |DFT(w)[k]|^2 / length at f_k = k / length for
/// k = 0..length/2. For the generator above this converges to sigma^2 at
/// every bin.
inline SpectrumEstimate estimate_psd(double sigma, int n_realizations, int length,
                                     std::uint64_t seed) {
    if (sigma < 0.0) throw InvalidParameter("estimate_psd: sigma must be nonnegative");
    if (n_realizations < 1) throw InvalidParameter("estimate_psd: n_realizations must be >= 1");
    if (length < 64) throw InvalidParameter("estimate_psd: length must be >= 64");

    Eigen::MatrixXd x(length, n_realizations);
    GaussianStream g(seed);
    for (int r = 0; r < n_realizations; ++r)
        for (int n = 0; n < length; ++n) x(n, r) = g.next(sigma);

    const int n_freq = length / 2 + 1;
    Eigen::MatrixXd dft_cos(n_freq, length), dft_sin(n_freq, length);
    const double w0 = 2.0 * M_PI / length;
    for (int k = 0; k < n_freq; ++k)
        for (int n = 0; n < length; ++n) {
            dft_cos(k, n) = std::cos(w0 * k * n);
            dft_sin(k, n) = std::sin(w0 * k * n);
        }

    const Eigen::MatrixXd re = dft_cos * x;
    const Eigen::MatrixXd im = dft_sin * x;
    const Eigen::MatrixXd periodogram = (re.array().square() + im.array().square()) / length;

    SpectrumEstimate est;
    est.n_realizations = n_realizations;
    est.frequencies = Eigen::VectorXd::LinSpaced(n_freq, 0.0, double(n_freq - 1) / length);
    est.power = periodogram.rowwise().mean();
    return est;
}

/// Biased empirical autocorrelation r[k] = (1/N) sum_n w[n] w[n+k],
/// averaged over realizations, for lags 0..max_lag. White noise gives
/// r[0] ~= sigma^2 and r[k] ~= 0 elsewhere.
inline Eigen::VectorXd estimate_autocorrelation(double sigma, int n_realizations, int length,
                                                int max_lag, std::uint64_t seed) {
    if (sigma < 0.0) throw InvalidParameter("estimate_autocorrelation: sigma must be nonnegative");
    if (n_realizations < 1 || length < 2)
        throw InvalidParameter("estimate_autocorrelation: bad realization parameters");
    if (max_lag < 0 || max_lag >= length)
        throw InvalidParameter("estimate_autocorrelation: max_lag must be in [0, length)");

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(max_lag + 1);
    Eigen::VectorXd w(length);
    GaussianStream g(seed);
    for (int r = 0; r < n_realizations; ++r) {
        for (int n = 0; n < length; ++n) w[n] = g.next(sigma);
        for (int k = 0; k <= max_lag; ++k)
            acc[k] += w.head(length - k).dot(w.tail(length - k));
    }
    return acc / (double(length) * n_realizations);
}

/// Debug dump: noise plane as a mid-gray PGM (offset by 128) plus a JSON
/// metadata sidecar describing (sigma, seed, shape) exactly.
template <typename Scalar>
void dump_noise_field(const NoiseField<Scalar>& field, const std::string& path_prefix) {
    Image<Scalar> vis(static_cast<int>(field.values.rows()), static_cast<int>(field.values.cols()), 1);
    vis.plane(0) = field.values.array() + Scalar(128);
    vis.clamp(Scalar(0), Scalar(255));
    write_pnm(vis, path_prefix + ".pgm");
    std::ofstream meta(path_prefix + ".json");
    meta << "{\"sigma\": " << static_cast<double>(field.sigma) << ", \"seed\": " << field.seed
         << ", \"height\": " << field.values.rows() << ", \"width\": " << field.values.cols()
         << "}\n";
}

}  // namespace noiseattack

#endif  // NOISEATTACK_WGN_HPP
