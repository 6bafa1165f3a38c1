#include "ctadapt/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "ctadapt/errors.hpp"

namespace ctadapt {

namespace {

void check_geometry(int height, int width) {
    if (height < 1 || width < 1) {
        throw InputError("image geometry must be at least 1x1, got " + std::to_string(height) +
                         "x" + std::to_string(width));
    }
}

}  // namespace

GrayImage::GrayImage(int height, int width, float fill) : height_(height), width_(width) {
    check_geometry(height, width);
    if (!(fill >= 0.0f && fill <= 1.0f)) throw InputError("fill value outside [0,1]");
    pixels_.assign(static_cast<std::size_t>(height) * width, fill);
}

GrayImage::GrayImage(int height, int width, std::vector<float> pixels)
    : height_(height), width_(width), pixels_(std::move(pixels)) {
    check_geometry(height, width);
    if (pixels_.size() != static_cast<std::size_t>(height) * width) {
        throw InputError("pixel buffer size does not match image geometry");
    }
    for (float v : pixels_) {
        if (!(v >= 0.0f && v <= 1.0f)) throw InputError("pixel value outside [0,1]");
    }
}

void GrayImage::clamp01() {
    for (float& v : pixels_) {
        if (!(v >= 0.0f)) v = 0.0f;  // also maps NaN to 0
        if (v > 1.0f) v = 1.0f;
    }
}

void SelectionParams::validate() const {
    if (!(inner_fraction > 0.0 && inner_fraction <= 1.0)) {
        throw ConfigError("selection.inner_fraction must be in (0, 1]");
    }
    if (!(dark_threshold >= 0.0 && dark_threshold <= 1.0)) {
        throw ConfigError("selection.dark_threshold must be in [0, 1]");
    }
}

GrayImage rescale_u8(int height, int width, std::span<const std::uint8_t> raw) {
    check_geometry(height, width);
    if (raw.size() != static_cast<std::size_t>(height) * width) {
        throw InputError("raw byte count does not match image geometry");
    }
    std::vector<float> px(raw.size());
    std::transform(raw.begin(), raw.end(), px.begin(),
                   [](std::uint8_t b) { return static_cast<float>(b) / 255.0f; });
    return GrayImage(height, width, std::move(px));
}

std::vector<std::uint8_t> to_u8(const GrayImage& img) {
    std::vector<std::uint8_t> out(img.size());
    auto px = img.pixels();
    for (std::size_t i = 0; i < px.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(std::lround(px[i] * 255.0f));
    }
    return out;
}

GrayImage resize(const GrayImage& img, int side) {
    if (side < 1) throw InputError("resize side must be >= 1");
    if (img.empty()) throw InputError("cannot resize an empty image");
    const int in_h = img.height();
    const int in_w = img.width();

    auto sample_axis = [](int dst, int in, int out, int& i0, int& i1, float& t) {
        double src = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        i0 = static_cast<int>(std::floor(src));
        i1 = std::min(i0 + 1, in - 1);
        t = static_cast<float>(src - i0);
    };

    GrayImage out(side, side);
    for (int y = 0; y < side; ++y) {
        int y0, y1;
        float ty;
        sample_axis(y, in_h, side, y0, y1, ty);
        for (int x = 0; x < side; ++x) {
            int x0, x1;
            float tx;
            sample_axis(x, in_w, side, x0, x1, tx);
            const float top = img.at(y0, x0) * (1.0f - tx) + img.at(y0, x1) * tx;
            const float bottom = img.at(y1, x0) * (1.0f - tx) + img.at(y1, x1) * tx;
            out.at(y, x) = top * (1.0f - ty) + bottom * ty;
        }
    }
    out.clamp01();
    return out;
}

GrayImage hflip(const GrayImage& img) {
    GrayImage out = img;
    for (int r = 0; r < img.height(); ++r) {
        for (int c = 0; c < img.width(); ++c) out.at(r, c) = img.at(r, img.width() - 1 - c);
    }
    return out;
}

std::size_t dark_pixel_count(const GrayImage& img, const SelectionParams& p) {
    p.validate();
    const int h = static_cast<int>(std::lround(p.inner_fraction * img.height()));
    const int w = static_cast<int>(std::lround(p.inner_fraction * img.width()));
    const int top = (img.height() - h) / 2;
    const int left = (img.width() - w) / 2;
    const auto cutoff = static_cast<float>(p.dark_threshold);
    std::size_t count = 0;
    for (int r = top; r < top + h; ++r) {
        for (int c = left; c < left + w; ++c) {
            if (img.at(r, c) < cutoff) ++count;
        }
    }
    return count;
}

std::vector<std::size_t> select_large_lung_slices(std::span<const GrayImage> slices,
                                                  const SelectionParams& p) {
    if (slices.empty()) throw InputError("slice selection needs at least one slice");
    std::vector<std::size_t> counts;
    counts.reserve(slices.size());
    std::size_t total = 0;
    for (const auto& s : slices) {
        counts.push_back(dark_pixel_count(s, p));
        total += counts.back();
    }
    // count >= total / n, compared exactly in integers
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] * slices.size() >= total) keep.push_back(i);
    }
    return keep;
}

GrayImage read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open PGM file: " + path.string());

    auto next_token = [&]() {
        std::string tok;
        char ch;
        while (in.get(ch)) {
            if (ch == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!tok.empty()) break;
                continue;
            }
            tok.push_back(ch);
        }
        return tok;
    };

    if (next_token() != "P5") throw DataError("not a binary PGM (P5) file: " + path.string());
    int width = 0, height = 0, maxval = 0;
    try {
        width = std::stoi(next_token());
        height = std::stoi(next_token());
        maxval = std::stoi(next_token());
    } catch (const std::exception&) {
        throw DataError("malformed PGM header: " + path.string());
    }
    if (width < 1 || height < 1 || maxval < 1 || maxval > 255) {
        throw DataError("unsupported PGM geometry or maxval: " + path.string());
    }
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(width) * height);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
        throw DataError("truncated PGM pixel data: " + path.string());
    }
    if (maxval == 255) return rescale_u8(height, width, raw);
    std::vector<float> px(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        px[i] = std::min(1.0f, static_cast<float>(raw[i]) / static_cast<float>(maxval));
    }
    return GrayImage(height, width, std::move(px));
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write PGM file: " + path.string());
    out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
    const auto bytes = to_u8(img);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("failed writing PGM file: " + path.string());
}

}  // namespace ctadapt
