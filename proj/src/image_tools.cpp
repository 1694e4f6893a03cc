#include "tscale/image_tools.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace tscale {

void LabImage::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("LabImage: empty dimensions");
    if (pixels.size() != size()) throw std::invalid_argument("LabImage: pixel count mismatch");
    for (const auto& p : pixels)
        if (p.L < 0.0 || p.L > 100.0)
            throw std::invalid_argument("LabImage: lightness out of [0,100]");
}

namespace {

void check_mask(const LabImage& img, const PixelMask& mask, const char* who) {
    if (!mask.empty() && mask.size() != img.size())
        throw std::invalid_argument(std::string(who) + ": mask dimensions mismatch");
}

}  // namespace

double median_lightness(const LabImage& img, const PixelMask& exclude_mask) {
    img.validate();
    check_mask(img, exclude_mask, "median_lightness");
    std::vector<double> ls;
    ls.reserve(img.size());
    for (std::size_t i = 0; i < img.size(); ++i)
        if (exclude_mask.empty() || !exclude_mask[i]) ls.push_back(img.pixels[i].L);
    if (ls.empty()) throw std::invalid_argument("median_lightness: every pixel is masked");
    // Lower median: element at index (n-1)/2 of the sorted sequence.
    const std::size_t k = (ls.size() - 1) / 2;
    std::nth_element(ls.begin(), ls.begin() + k, ls.end());
    return ls[k];
}

TransferResult color_transfer(const LabImage& original, const LabImage& reference,
                              const PixelMask& mask) {
    original.validate();
    reference.validate();
    if (original.width != reference.width || original.height != reference.height)
        throw std::invalid_argument("color_transfer: image dimensions differ");
    check_mask(original, mask, "color_transfer");

    TransferResult res;
    res.lightness_shift = median_lightness(original, mask) - median_lightness(reference, mask);
    res.image = reference;
    for (std::size_t i = 0; i < original.size(); ++i) {
        if (!mask.empty() && mask[i]) {
            res.image.pixels[i] = original.pixels[i];
            continue;
        }
        double l = reference.pixels[i].L + res.lightness_shift;
        if (l < 0.0 || l > 100.0) {
            l = std::clamp(l, 0.0, 100.0);
            ++res.clamped_pixels;
        }
        res.image.pixels[i] = {l, original.pixels[i].a, original.pixels[i].b};
    }
    return res;
}

namespace {

void write_floats_le(std::ofstream& out, const float* v, std::size_t n) {
    out.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(float)));
}

struct PfmHeader {
    bool color = false;
    int width = 0, height = 0;
};

PfmHeader read_pfm_header(std::ifstream& in, const std::string& path) {
    std::string magic;
    double scale = 0.0;
    PfmHeader h;
    in >> magic >> h.width >> h.height >> scale;
    if (!in || (magic != "PF" && magic != "Pf"))
        throw std::runtime_error(path + ": not a portable float map");
    h.color = magic == "PF";
    if (h.width <= 0 || h.height <= 0) throw std::runtime_error(path + ": bad dimensions");
    if (scale >= 0.0) throw std::runtime_error(path + ": big-endian float maps not supported");
    in.get();  // single whitespace after the scale line
    return h;
}

void read_floats_le(std::ifstream& in, float* v, std::size_t n, const std::string& path) {
    in.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(n * sizeof(float)))
        throw std::runtime_error(path + ": truncated float map");
}

}  // namespace

void write_lab_pfm(const LabImage& img, const std::string& path) {
    img.validate();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "PF\n" << img.width << " " << img.height << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(img.width) * 3);
    for (int y = img.height - 1; y >= 0; --y) {  // PFM rows run bottom-to-top
        for (int x = 0; x < img.width; ++x) {
            const ColorLab& p = img.at(x, y);
            row[3 * x + 0] = static_cast<float>(p.L);
            row[3 * x + 1] = static_cast<float>(p.a);
            row[3 * x + 2] = static_cast<float>(p.b);
        }
        write_floats_le(out, row.data(), row.size());
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

LabImage read_lab_pfm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    const PfmHeader h = read_pfm_header(in, path);
    if (!h.color) throw std::runtime_error(path + ": expected a 3-channel float map");
    LabImage img;
    img.width = h.width;
    img.height = h.height;
    img.pixels.resize(img.size());
    std::vector<float> row(static_cast<std::size_t>(h.width) * 3);
    for (int y = h.height - 1; y >= 0; --y) {
        read_floats_le(in, row.data(), row.size(), path);
        for (int x = 0; x < h.width; ++x)
            img.at(x, y) = {row[3 * x + 0], row[3 * x + 1], row[3 * x + 2]};
    }
    img.validate();
    return img;
}

void write_mask_pfm(const PixelMask& mask, int width, int height, const std::string& path) {
    if (width <= 0 || height <= 0 ||
        mask.size() != static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("write_mask_pfm: dimensions mismatch");
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "Pf\n" << width << " " << height << "\n-1.0\n";
    std::vector<float> row(static_cast<std::size_t>(width));
    for (int y = height - 1; y >= 0; --y) {
        for (int x = 0; x < width; ++x)
            row[x] = mask[static_cast<std::size_t>(y) * width + x] ? 1.0f : 0.0f;
        write_floats_le(out, row.data(), row.size());
    }
    if (!out) throw std::runtime_error("write failed for " + path);
}

PixelMask read_mask_pfm(const std::string& path, int& width, int& height) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    const PfmHeader h = read_pfm_header(in, path);
    if (h.color) throw std::runtime_error(path + ": expected a grayscale float map");
    width = h.width;
    height = h.height;
    PixelMask mask(static_cast<std::size_t>(h.width) * h.height, 0);
    std::vector<float> row(static_cast<std::size_t>(h.width));
    for (int y = h.height - 1; y >= 0; --y) {
        read_floats_le(in, row.data(), row.size(), path);
        for (int x = 0; x < h.width; ++x)
            mask[static_cast<std::size_t>(y) * h.width + x] = row[x] > 0.5f ? 1 : 0;
    }
    return mask;
}

namespace {

// Inverse CIELAB against the given white point.
ColorXYZ lab_to_xyz(const ColorLab& lab, const ColorXYZ& white) {
    constexpr double eps = 216.0 / 24389.0;
    constexpr double kappa = 24389.0 / 27.0;
    const double fy = (lab.L + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    auto f_inv = [&](double f) {
        const double f3 = f * f * f;
        return f3 > eps ? f3 : (116.0 * f - 16.0) / kappa;
    };
    return {f_inv(fx) * white.X, f_inv(fy) * white.Y, f_inv(fz) * white.Z};
}

void append_be32(std::string& buf, std::uint32_t v) {
    buf.push_back(static_cast<char>(v >> 24));
    buf.push_back(static_cast<char>(v >> 16));
    buf.push_back(static_cast<char>(v >> 8));
    buf.push_back(static_cast<char>(v));
}

void append_chunk(std::string& out, const char type[4], const std::string& data) {
    append_be32(out, static_cast<std::uint32_t>(data.size()));
    std::string body(type, 4);
    body += data;
    out += body;
    const std::uint32_t crc = static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size())));
    append_be32(out, crc);
}

}  // namespace

void write_png_srgb(const LabImage& img, const std::string& path) {
    img.validate();
    const ColorXYZ d50 = d50_white();
    const ColorXYZ d65 = d65_white();

    std::string raw;
    raw.reserve(img.size() * 3 + img.height);
    for (int y = 0; y < img.height; ++y) {
        raw.push_back('\0');  // filter type: none
        for (int x = 0; x < img.width; ++x) {
            const ColorXYZ xyz = adapt_white(lab_to_xyz(img.at(x, y), d50), d50, d65);
            const ColorRGB rgb = xyz_to_srgb(xyz);
            for (double ch : {rgb.r, rgb.g, rgb.b})
                raw.push_back(static_cast<char>(std::lround(std::clamp(ch, 0.0, 1.0) * 255.0)));
        }
    }

    uLongf zlen = compressBound(static_cast<uLong>(raw.size()));
    std::string zdata(zlen, '\0');
    if (compress2(reinterpret_cast<Bytef*>(zdata.data()), &zlen,
                  reinterpret_cast<const Bytef*>(raw.data()), static_cast<uLong>(raw.size()),
                  Z_BEST_COMPRESSION) != Z_OK)
        throw std::runtime_error("write_png_srgb: compression failed");
    zdata.resize(zlen);

    std::string out("\x89PNG\r\n\x1a\n", 8);
    std::string ihdr;
    append_be32(ihdr, static_cast<std::uint32_t>(img.width));
    append_be32(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr += '\x08';  // bit depth
    ihdr += '\x02';  // truecolor
    ihdr += '\x00';  // compression
    ihdr += '\x00';  // filter
    ihdr += '\x00';  // no interlace
    append_chunk(out, "IHDR", ihdr);
    append_chunk(out, "IDAT", zdata);
    append_chunk(out, "IEND", "");

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("write failed for " + path);
}

}  // namespace tscale
