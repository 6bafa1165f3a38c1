#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace ctadapt {

/// Row-major grayscale image with intensities in [0, 1].
class GrayImage {
public:
    GrayImage() = default;
    /// Constant image. Throws InputError on empty geometry or out-of-range fill.
    GrayImage(int height, int width, float fill = 0.0f);
    /// Throws InputError unless pixels.size() == height * width and every pixel is in [0, 1].
    GrayImage(int height, int width, std::vector<float> pixels);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t size() const { return pixels_.size(); }
    bool empty() const { return pixels_.empty(); }

    float at(int row, int col) const { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }
    /// Unchecked write; callers keep values in [0, 1] (see clamp01).
    float& at(int row, int col) { return pixels_[static_cast<std::size_t>(row) * width_ + col]; }

    std::span<const float> pixels() const { return pixels_; }
    std::span<float> pixels() { return pixels_; }

    /// Restores the [0, 1] invariant after arithmetic on pixels().
    void clamp01();

    bool operator==(const GrayImage&) const = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<float> pixels_;
};

/// Images plus one class index per image.
struct LabeledSlices {
    std::vector<GrayImage> images;
    std::vector<int> labels;

    std::size_t size() const { return images.size(); }
    bool empty() const { return images.empty(); }
    void add(GrayImage image, int label) {
        images.push_back(std::move(image));
        labels.push_back(label);
    }
    void append(const LabeledSlices& other) {
        images.insert(images.end(), other.images.begin(), other.images.end());
        labels.insert(labels.end(), other.labels.begin(), other.labels.end());
    }
};

/// Centered inner rectangle and darkness cutoff for lung-area counting.
struct SelectionParams {
    double inner_fraction = 0.6;
    double dark_threshold = 0.3;

    void validate() const;
};

/// pixel = byte / 255.
GrayImage rescale_u8(int height, int width, std::span<const std::uint8_t> raw);

/// round(pixel * 255) per pixel.
std::vector<std::uint8_t> to_u8(const GrayImage& img);

/// Bilinear resize to side x side. Samples at half-pixel centers,
/// src = (dst + 0.5) * in / out - 0.5, with coordinates clamped to the edge.
GrayImage resize(const GrayImage& img, int side);

GrayImage hflip(const GrayImage& img);

/// Pixels strictly darker than p.dark_threshold inside the centered
/// round(f*H) x round(f*W) rectangle, whose top-left corner sits at
/// ((H - h) / 2, (W - w) / 2) with integer division. The rectangle is
/// left-right symmetric whenever W - w is even.
std::size_t dark_pixel_count(const GrayImage& img, const SelectionParams& p);

/// Indices of slices whose dark count is at least the patient's mean count
/// over all of its slices, in original order. Never empty.
std::vector<std::size_t> select_large_lung_slices(std::span<const GrayImage> slices,
                                                  const SelectionParams& p);

/// Binary 8-bit PGM (P5). Maxvals other than 255 are rescaled on read.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& img, const std::filesystem::path& path);

}  // namespace ctadapt
