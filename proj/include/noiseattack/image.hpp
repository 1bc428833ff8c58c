#ifndef NOISEATTACK_IMAGE_HPP
#define NOISEATTACK_IMAGE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>

#include "noiseattack/common.hpp"

namespace noiseattack {

/// Dense planar image tensor (channel, row, col), values on the 0-255
/// intensity scale unless stated otherwise. Planes are row-major so that
/// flat index = c*h*w + i*w + j.
template <typename Scalar>
struct Image {
    using Vector = Eigen::Vector<Scalar, Eigen::Dynamic>;
    using PlaneMap = Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
    using ConstPlaneMap =
        Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

    int height = 0;
    int width = 0;
    int channels = 0;
    Vector data;

    Image() = default;
    Image(int h, int w, int c) : height(h), width(w), channels(c) {
        if (h <= 0 || w <= 0 || c <= 0) throw InvalidParameter("Image: nonpositive shape");
        data = Vector::Zero(static_cast<Eigen::Index>(h) * w * c);
    }

    Eigen::Index size() const { return data.size(); }
    bool same_shape(const Image& o) const {
        return height == o.height && width == o.width && channels == o.channels;
    }

    Scalar& at(int c, int i, int j) { return data[(static_cast<Eigen::Index>(c) * height + i) * width + j]; }
    Scalar at(int c, int i, int j) const {
        return data[(static_cast<Eigen::Index>(c) * height + i) * width + j];
    }

    PlaneMap plane(int c) {
        return PlaneMap(data.data() + static_cast<Eigen::Index>(c) * height * width, height, width);
    }
    ConstPlaneMap plane(int c) const {
        return ConstPlaneMap(data.data() + static_cast<Eigen::Index>(c) * height * width, height, width);
    }

    void clamp(Scalar lo, Scalar hi) { data = data.cwiseMax(lo).cwiseMin(hi); }
};

using ImageF = Image<float>;

/// Bilinear resize of one plane; used to upsample CAM heatmaps to input
/// resolution.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
bilinear_resize(const Eigen::MatrixBase<Derived>& src, int out_h, int out_w) {
    using S = typename Derived::Scalar;
    if (out_h <= 0 || out_w <= 0) throw InvalidParameter("bilinear_resize: nonpositive target shape");
    const int in_h = static_cast<int>(src.rows());
    const int in_w = static_cast<int>(src.cols());
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> out(out_h, out_w);
    const double sy = out_h > 1 ? double(in_h - 1) / (out_h - 1) : 0.0;
    const double sx = out_w > 1 ? double(in_w - 1) / (out_w - 1) : 0.0;
    for (int i = 0; i < out_h; ++i) {
        const double fy = i * sy;
        const int y0 = std::min(in_h - 1, static_cast<int>(fy));
        const int y1 = std::min(in_h - 1, y0 + 1);
        const double wy = fy - y0;
        for (int j = 0; j < out_w; ++j) {
            const double fx = j * sx;
            const int x0 = std::min(in_w - 1, static_cast<int>(fx));
            const int x1 = std::min(in_w - 1, x0 + 1);
            const double wx = fx - x0;
            const double v = (1 - wy) * ((1 - wx) * src(y0, x0) + wx * src(y0, x1)) +
                             wy * ((1 - wx) * src(y1, x0) + wx * src(y1, x1));
            out(i, j) = static_cast<S>(v);
        }
    }
    return out;
}

/// Writes an image as binary PGM (1 channel) or PPM (3 channels), values
/// rounded and clamped to 0..255. This is the debug/report path; the
/// lossless float payload format lives with the dataset code.
template <typename Scalar>
void write_pnm(const Image<Scalar>& img, const std::string& path) {
    if (img.channels != 1 && img.channels != 3)
        throw InvalidParameter("write_pnm: channels must be 1 or 3");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_pnm: cannot open " + path);
    f << (img.channels == 1 ? "P5" : "P6") << "\n"
      << img.width << " " << img.height << "\n255\n";
    for (int i = 0; i < img.height; ++i)
        for (int j = 0; j < img.width; ++j)
            for (int c = 0; c < img.channels; ++c) {
                const double v = std::clamp(static_cast<double>(img.at(c, i, j)), 0.0, 255.0);
                const auto b = static_cast<unsigned char>(std::lround(v));
                f.write(reinterpret_cast<const char*>(&b), 1);
            }
    if (!f) throw std::runtime_error("write_pnm: write failed for " + path);
}

/// Reads binary PGM/PPM produced by write_pnm (or any 8-bit P5/P6 file).
template <typename Scalar = float>
Image<Scalar> read_pnm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw UnsupportedSource("read_pnm: cannot open " + path);
    std::string magic;
    f >> magic;
    if (magic != "P5" && magic != "P6") throw UnsupportedSource("read_pnm: not a binary PGM/PPM: " + path);
    auto next_int = [&f, &path]() {
        // skip whitespace and '#' comment lines
        int ch = f.get();
        while (ch == ' ' || ch == '\n' || ch == '\r' || ch == '\t' || ch == '#') {
            if (ch == '#')
                while (ch != '\n' && ch != EOF) ch = f.get();
            ch = f.get();
        }
        int v = 0;
        bool any = false;
        while (ch >= '0' && ch <= '9') {
            v = v * 10 + (ch - '0');
            any = true;
            ch = f.get();
        }
        if (!any) throw UnsupportedSource("read_pnm: malformed header in " + path);
        return v;
    };
    const int w = next_int();
    const int h = next_int();
    const int maxval = next_int();
    if (maxval != 255) throw UnsupportedSource("read_pnm: only maxval 255 supported: " + path);
    const int c = magic == "P5" ? 1 : 3;
    Image<Scalar> img(h, w, c);
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * c);
    for (int i = 0; i < h; ++i) {
        f.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!f) throw UnsupportedSource("read_pnm: truncated pixel data in " + path);
        for (int j = 0; j < w; ++j)
            for (int ch = 0; ch < c; ++ch)
                img.at(ch, i, j) = static_cast<Scalar>(row[static_cast<std::size_t>(j) * c + ch]);
    }
    return img;
}

}  // namespace noiseattack

#endif  // NOISEATTACK_IMAGE_HPP
