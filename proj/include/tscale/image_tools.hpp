#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tscale/colorimetry.hpp"

namespace tscale {

using PixelMask = std::vector<std::uint8_t>;  // 1 = specular (excluded / copied)

struct LabImage {
    int width = 0, height = 0;
    std::vector<ColorLab> pixels;  // row-major, top row first

    void validate() const;
    std::size_t size() const { return static_cast<std::size_t>(width) * height; }
    const ColorLab& at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    ColorLab& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Exact median of L over unmasked pixels; lower median for even counts.
double median_lightness(const LabImage& img, const PixelMask& exclude_mask = {});

struct TransferResult {
    LabImage image;
    double lightness_shift = 0.0;
    std::size_t clamped_pixels = 0;
};

// Masked pixels are copied verbatim from the original. Unmasked pixels take
// the reference lightness shifted so the unmasked medians match (clamped to
// [0,100]) and the original's a,b.
TransferResult color_transfer(const LabImage& original, const LabImage& reference,
                              const PixelMask& mask = {});

// Portable float map I/O. Color images are PFM "PF" files with channel order
// (L*, a*, b*); masks are grayscale "Pf" files with values 0 or 1. Both are
// little-endian (negative scale) with rows stored bottom-to-top.
void write_lab_pfm(const LabImage& img, const std::string& path);
LabImage read_lab_pfm(const std::string& path);
void write_mask_pfm(const PixelMask& mask, int width, int height, const std::string& path);
PixelMask read_mask_pfm(const std::string& path, int& width, int& height);

// 8-bit sRGB PNG for inspection; out-of-gamut colors are clamped.
void write_png_srgb(const LabImage& img, const std::string& path);

}  // namespace tscale
